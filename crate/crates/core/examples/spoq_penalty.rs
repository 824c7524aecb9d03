//! The smoothed lp/lq penalty, its majorizing metric, and the projections
//! onto the constraint sets.
//!
//! cargo run --example spoq_penalty

use pendantss::projections::{normal_cone_residual_simplex, project_box, project_simplex, BoxSet};
use pendantss::spoq::{chi, grad_psi, lq_power_sum, mm_metric_diag, psi, SpoqParams};

fn main() -> pendantss::Result<()> {
    let params = SpoqParams::default().with_pq(0.75, 2.0);
    params.validate()?;

    let sparse = [0.0, 0.0, 5.0, 0.0, 0.0, 0.0];
    let spread = [5.0 / 6f64.sqrt(); 6];
    println!("same l2 norm, penalty of a 1-sparse vector: {:.4}", psi(&sparse, &params)?);
    println!("same l2 norm, penalty of a flat vector:     {:.4}", psi(&spread, &params)?);
    println!("scale invariance: psi(3x) - psi(x) = {:.2e}", {
        let scaled: Vec<f64> = spread.iter().map(|v| 3.0 * v).collect();
        psi(&scaled, &params)? - psi(&spread, &params)?
    });

    let s = [0.2, 1.5, 3.0, 0.0, 0.7];
    println!("gradient: {:?}", grad_psi(&s, &params)?);
    let rho = lq_power_sum(&s, params.q).powf(1.0 / params.q);
    println!("chi at rho = {rho:.3}: {:.4}", chi(&params, rho));
    println!("metric diagonal: {:?}", mm_metric_diag(&s, 2.0, rho, &params)?);

    let b = BoxSet::new(0.0, 100.0)?;
    println!("box projection of [-1, 50, 120]: {:?}", project_box(&[-1.0, 50.0, 120.0], &b));
    let z = [0.5, -0.2, 1.1, 0.3];
    let p = project_simplex(&z)?;
    println!("simplex projection of {z:?}: {:?}", p.as_slice());
    let g: Vec<f64> = p.iter().zip(&z).map(|(a, b)| a - b).collect();
    println!("optimality residual of the projection: {:.2e}", normal_cone_residual_simplex(p.as_slice(), &g)?);
    Ok(())
}
