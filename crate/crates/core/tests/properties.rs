use bnls::experiments::{criterion_supercritical, fit_rate_samples, rescale};
use bnls::groundstate::{default_initial_guess, fourier_rearrange, solve_q, PetviashviliOptions};
use bnls::harness::{read_records, write_records, RunConfig};
use bnls::diagnostics::DiagnosticsRecord;
use bnls::{make_grid, make_params, Field};
use num_complex::Complex64;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip(seed in prop::collection::vec(-1.0..1.0f64, 64), d in 2usize..8) {
        let grid = make_grid(d, 15.0, 64).unwrap();
        let plan = grid.plan();
        let a: Vec<Complex64> = seed.chunks(2).cycle().take(64).enumerate()
            .map(|(k, c)| Complex64::new(c[0], c[1]) * (-(k as f64) / 8.0).exp())
            .collect();
        let u = plan.from_coeffs(&a);
        let back = plan.to_coeffs(&u);
        let err: f64 = a.iter().zip(&back).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * size.max(1e-300));
    }

    #[test]
    fn rearrangement_preserves_mass_and_lowers_energy(
        c in prop::collection::vec(-1.0..1.0f64, 4), k in 0.3..3.0f64, w in 0.7..3.0f64,
    ) {
        let grid = make_grid(3, 20.0, 128).unwrap();
        let u = Field::from_fn(grid, |r| {
            Complex64::new(c[0] + c[1] * (k * r).cos(), c[2] * r + c[3] * (k * r).sin()) * (-(r / w).powi(2)).exp()
        });
        let v = fourier_rearrange(&u);
        let (nu, nv) = (u.norms(), v.norms());
        prop_assert!((nu.l2 - nv.l2).abs() <= 1e-10 * nu.l2.max(1e-300));
        prop_assert!(nv.grad_l2 <= nu.grad_l2 + 1e-9);
        prop_assert!(nv.lap_l2 <= nu.lap_l2 + 1e-9);
    }

    #[test]
    fn records_round_trip_bitwise(rows in prop::collection::vec(
        (finite(), finite(), finite(), finite(), finite(), finite(), prop::option::of(finite()), prop::option::of(finite()), finite()),
        0..40,
    )) {
        let recs: Vec<DiagnosticsRecord> = rows.iter().map(|r| DiagnosticsRecord {
            t: r.0, mass: r.1, energy: r.2, grad_l2: r.3, lap_l2: r.4, m_r: r.5, v_r: r.6, n_r: r.7, dt: r.8,
            mass_drift: false, energy_drift: false,
        }).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&path, &recs).unwrap();
        let back = read_records(&path).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            let bits = |r: &DiagnosticsRecord| [r.t, r.mass, r.energy, r.grad_l2, r.lap_l2, r.m_r, r.dt].map(f64::to_bits);
            prop_assert_eq!(bits(a), bits(b));
            prop_assert_eq!(a.v_r.map(f64::to_bits), b.v_r.map(f64::to_bits));
            prop_assert_eq!(a.n_r.map(f64::to_bits), b.n_r.map(f64::to_bits));
        }
    }

    #[test]
    fn config_round_trips(lambda in 0.1..3.0f64, horizon in 0.01..10.0f64, kappa in prop::option::of(0.01..1.0f64), seed in any::<u64>()) {
        let text = format!(
            "id = \"p\"\nseed = {seed}\n[params]\nd = 3\nsigma = 2.0\n[grid]\nrmax = 30.0\nn = 128\n\
             [initial]\nkind = \"scaled_ground_state\"\nlambda = {lambda:?}\n[cutoff]\nscale = 4.0\nkind = \"appendix_b\"\n\
             [evolution]\nhorizon = {horizon:?}\n",
        );
        let mut cfg = RunConfig::from_toml(&text).unwrap();
        cfg.kappa = kappa;
        let once = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&once).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), once);
    }

    #[test]
    fn power_law_rates_recovered(gamma in 0.1..1.8f64, big_t in 0.05..5.0f64) {
        let params = make_params(3, 2.0, 0.0).unwrap();
        let t: Vec<f64> = (0..160).map(|i| big_t * (1.0 - 0.5 * 0.96f64.powi(i))).collect();
        let y: Vec<f64> = t.iter().map(|s| (big_t - s).powf(-gamma)).collect();
        let fit = fit_rate_samples(&t, &y, big_t, &params).unwrap();
        prop_assert!((fit.slope - (2.0 - gamma)).abs() <= 0.01 * (2.0 - gamma));
    }
}

#[test]
fn criterion_is_scale_invariant() {
    // u -> lambda^{2/sigma} u(lambda x) keeps both threshold products fixed
    let params = make_params(3, 2.0, 0.0).unwrap();
    let grid = make_grid(3, 40.0, 384).unwrap();
    let q = solve_q(&params, &default_initial_guess(grid.clone()), &PetviashviliOptions::default()).unwrap();
    let mut product_cases = 0;
    for amp in [0.8, 0.95, 1.05] {
        let u0 = Field::from_real_fn(grid.clone(), |r| amp * (-r * r / 3.0).exp() * 1.8);
        let base = criterion_supercritical(&u0, &params, Some(&q), None).unwrap();
        if base.quantities.contains_key("norm_product") {
            product_cases += 1;
        }
        for lambda in [0.8, 1.25] {
            // rescale is mass-preserving; restore the critical amplitude
            let s = rescale(&u0, lambda).unwrap().scaled(lambda.powf(2.0 / params.sigma - 1.5));
            let v = criterion_supercritical(&s, &params, Some(&q), None).unwrap();
            assert_eq!(v.satisfied, base.satisfied, "amp {amp} lambda {lambda}");
            assert_eq!(v.branch, base.branch, "amp {amp} lambda {lambda}");
            for key in ["energy_mass_product", "norm_product"] {
                if let (Some(a), Some(b)) = (base.quantities.get(key), v.quantities.get(key)) {
                    assert!((a - b).abs() <= 1e-6 * a.abs(), "{key}: {a} vs {b}");
                }
            }
        }
    }
    assert!(product_cases > 0, "no case reached the threshold products");
}
