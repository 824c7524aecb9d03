//! The batch pipeline the binary exposes: generate, solve and report into a
//! scratch directory.
//!
//! cargo run --release --example cli_pipeline

use pendantss::cli::{run, Command, RunManifest};

fn main() -> pendantss::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    for command in [Command::Generate, Command::Solve, Command::Report] {
        let written = run(&RunManifest {
            command,
            config: Some("preset:a-0.5-soot".into()),
            output_dir: dir.path().to_path_buf(),
            seed: 0,
        })?;
        for p in written {
            println!("{command:?}: wrote {}", p.file_name().unwrap().to_string_lossy());
        }
    }
    Ok(())
}
