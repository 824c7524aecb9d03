use pendantss::filters::{apply_highpass, apply_lowpass, FilterSpec};
use pendantss::metrics::snr;
use pendantss::projections::{project_box, project_simplex, BoxSet};
use pendantss::signal::{convolve_adjoint_kernel, convolve_adjoint_signal, convolve_same};
use pendantss::solver::{center_shift, center_shift_postprocess};
use pendantss::spoq::{grad_psi, psi, SpoqParams};
use pendantss::tuning::{best_row, GridRow, PointStatus};
use pendantss::metrics::MetricsReport;
use proptest::prelude::*;

fn vec_in(len: std::ops::Range<usize>, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn simplex_projection_is_feasible_and_idempotent(z in vec_in(1..30, -5.0, 5.0)) {
        let p = project_simplex(&z).unwrap();
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(p.as_slice()).unwrap();
        for (a, b) in again.iter().zip(p.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_projection_is_the_nearest_point(
        z in vec_in(2..12, -3.0, 3.0),
        w in vec_in(12..13, 0.0, 1.0),
    ) {
        // Any other simplex point is at least as far from z.
        let p = project_simplex(&z).unwrap();
        let total: f64 = w[..z.len()].iter().sum::<f64>().max(1e-12);
        let q: Vec<f64> = w[..z.len()].iter().map(|v| v / total).collect();
        let dp: f64 = p.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
        let dq: f64 = q.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(dp <= dq + 1e-12);
    }

    #[test]
    fn simplex_projection_is_nonexpansive(a in vec_in(5..6, -4.0, 4.0), b in vec_in(5..6, -4.0, 4.0)) {
        let pa = project_simplex(&a).unwrap();
        let pb = project_simplex(&b).unwrap();
        let dp: f64 = pa.iter().zip(pb.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        let dz: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!(dp <= dz + 1e-12);
    }

    #[test]
    fn box_projection_is_a_clamp(z in vec_in(1..40, -200.0, 200.0)) {
        let b = BoxSet::default();
        let p = project_box(&z, &b);
        prop_assert!(b.contains(&p));
        prop_assert_eq!(project_box(&p, &b), p);
    }

    #[test]
    fn convolution_adjoints(
        s in vec_in(15..40, -3.0, 3.0),
        r in vec_in(40..41, -3.0, 3.0),
        k in vec_in(1..8, -1.0, 1.0),
    ) {
        let n = s.len();
        let r = &r[..n];
        let k = if k.len() % 2 == 0 { &k[1..] } else { &k[..] };
        let ks = convolve_same(&s, k).unwrap();
        let lhs = dot(&ks, r);
        let scale = 1.0 + dot(&ks, &ks).sqrt() * dot(r, r).sqrt();
        prop_assert!((lhs - dot(&s, &convolve_adjoint_signal(r, k).unwrap())).abs() <= 1e-12 * scale);
        prop_assert!((lhs - dot(k, &convolve_adjoint_kernel(r, &s, k.len()).unwrap())).abs() <= 1e-12 * scale);
    }

    #[test]
    fn filters_split_the_signal(y in vec_in(16..80, -5.0, 5.0), cut in 0usize..6, tr in 0usize..4) {
        let spec = FilterSpec::new(cut, tr);
        let lo = apply_lowpass(&y, spec).unwrap();
        let hi = apply_highpass(&y, spec).unwrap();
        for i in 0..y.len() {
            prop_assert_eq!(hi[i], y[i] - lo[i]);
        }
        // Gains lie in [0, 1], so neither part carries more energy than y.
        prop_assert!(dot(&lo, &lo) <= dot(&y, &y) * (1.0 + 1e-12) + 1e-24);
        prop_assert!(dot(&hi, &hi) <= dot(&y, &y) * (1.0 + 1e-12) + 1e-24);
    }

    #[test]
    fn penalty_ignores_sign_and_order(s in vec_in(2..30, -5.0, 5.0), rot in 0usize..30, p075 in any::<bool>()) {
        let prm = if p075 { SpoqParams::default().with_pq(0.75, 2.0) } else { SpoqParams::default() };
        let base = psi(&s, &prm).unwrap();
        let mut t: Vec<f64> = s.iter().map(|v| -v).collect();
        t.rotate_left(rot % s.len());
        prop_assert!((psi(&t, &prm).unwrap() - base).abs() <= 1e-12 * (1.0 + base.abs()));
        // Gradient is odd in each coordinate.
        let g = grad_psi(&s, &prm).unwrap();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let gn = grad_psi(&neg, &prm).unwrap();
        for (a, b) in g.iter().zip(&gn) {
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn snr_is_invariant_to_common_scaling(
        r in vec_in(2..20, 0.1, 5.0),
        e in vec_in(20..21, -1.0, 1.0),
        c in 1e-6f64..1e6,
    ) {
        let est: Vec<f64> = r.iter().zip(&e).map(|(a, b)| a + b).collect();
        let base = snr(&r, &est).unwrap();
        let rs: Vec<f64> = r.iter().map(|v| v * c).collect();
        let es: Vec<f64> = est.iter().map(|v| v * c).collect();
        prop_assert!((snr(&rs, &es).unwrap() - base).abs() < 1e-8);
    }

    #[test]
    fn recentring_permutes_the_kernel(pi in vec_in(1..12, 0.0, 1.0), s in vec_in(30..31, 0.0, 3.0)) {
        let pi = if pi.len() % 2 == 0 { pi[1..].to_vec() } else { pi };
        let pi = project_simplex(&pi).unwrap().into_inner();
        let (s2, k2) = center_shift_postprocess(&s, &pi);
        let mut a = pi.clone();
        let mut b = k2.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        prop_assert_eq!(s2.len(), s.len());
        let d = center_shift(&pi);
        // The signal moves by the shift, with zeros shifted in.
        for m in 0..s.len() as isize {
            let src = m - d;
            let want = if (0..s.len() as isize).contains(&src) { s[src as usize] } else { 0.0 };
            prop_assert_eq!(s2[m as usize], want);
        }
    }

    #[test]
    fn best_row_is_the_table_maximum(
        scores in prop::collection::vec(prop::option::of(0.0f64..100.0), 1..20),
    ) {
        let rows: Vec<GridRow> = scores
            .iter()
            .enumerate()
            .map(|(i, w)| GridRow {
                params: SpoqParams::soot(i as f64 + 1.0),
                status: if w.is_some() { PointStatus::Ok } else { PointStatus::Skipped },
                reason: None,
                metrics: w.map(|w| MetricsReport::new(w / 2.0, 0.0, 0.0, 0.0)),
                iterations: None,
                stop_reason: None,
            })
            .collect();
        match best_row(&rows) {
            None => prop_assert!(scores.iter().all(|s| s.is_none())),
            Some(i) => {
                let w = rows[i].metrics.unwrap().weighted;
                for (j, r) in rows.iter().enumerate() {
                    if let Some(m) = r.metrics {
                        prop_assert!(m.weighted < w || (m.weighted == w && j >= i));
                    }
                }
            }
        }
    }
}
