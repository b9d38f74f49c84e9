use std::f64::consts::PI;

use proptest::prelude::*;

use sepkit::exclusion::{binomial_measure_sampler, ParticleConfig};
use sepkit::hydrodynamics::{
    consistency_check, crank_nicolson_1d, density_field, hdl_experiment, heat_solution, limit_field,
    record_density_series, sample_profile, variance_bound_check, variance_bound_scan, HdlParams, InitialLaw,
    MacroscopicProfile, TestFunction,
};
use sepkit::{EnvLaw, Environment, SepError};

fn env(spec: &str, dims: &[usize], seed: u64) -> Environment {
    Environment::sample(&spec.parse().unwrap(), dims, seed).unwrap()
}

fn small_hdl(event_cap: f64) -> HdlParams {
    HdlParams {
        law: "iid:1,2".parse().unwrap(),
        dim: 1,
        n_grid: vec![16, 32],
        rho_bar: MacroscopicProfile::half_sine(),
        g_list: vec![TestFunction::cosine_bump(vec![0.25], 0.5, 1.0)],
        t_grid: vec![0.0, 0.01],
        sigma: vec![vec![64.0 / 27.0]],
        sigma_source: "test".into(),
        environments: 2,
        replicas: 3,
        seed: 1,
        event_cap,
    }
}

#[test]
fn sine_mode_decays_at_the_diffusive_rate() {
    let sigma = 2.5;
    for t in [0.0, 0.01, 0.1] {
        let sol = heat_solution(&[vec![sigma]], &MacroscopicProfile::half_sine(), t).unwrap();
        for u in [0.1, 0.3, 0.77] {
            let want = 0.5 + 0.5 * (-0.5 * sigma * 4.0 * PI * PI * t).exp() * (2.0 * PI * u).sin();
            assert!((sol.eval(&[u]) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn step_profile_matches_finite_differences() {
    let profile = MacroscopicProfile::Step {
        low: 0.2,
        high: 0.8,
        start: 0.25,
        end: 0.5,
    };
    let (sigma, t, m) = (2.0, 0.01, 400);
    let fd = crank_nicolson_1d(|u| profile.eval(&[u]), sigma, t, m, 400).unwrap();
    let sol = heat_solution(&[vec![sigma]], &profile, t).unwrap();
    for (i, v) in fd.iter().enumerate().step_by(17) {
        let u = i as f64 / m as f64;
        assert!((sol.eval(&[u]) - v).abs() < 2e-3, "u={u}: {} vs {v}", sol.eval(&[u]));
    }
}

#[test]
fn limit_field_for_constant_profile() {
    let g = TestFunction::cosine_bump(vec![0.5], 0.25, 2.0);
    let rho = MacroscopicProfile::Constant { rho: 0.3 };
    let v = limit_field(1.5, &[vec![2.0]], &rho, &g, 0.2).unwrap();
    assert!((v - 1.5 * 0.3 * g.integral()).abs() < 1e-10);
}

#[test]
fn constant_test_function_sees_total_mass() {
    let e = env("iid:1,2,3", &[32], 3);
    let c0 = sample_profile(&e, &MacroscopicProfile::half_sine(), 32, 5).unwrap();
    let g = TestFunction::constant(1, 1.0);
    let series = record_density_series(&e, &c0, 32, std::slice::from_ref(&g), &[0.0, 0.01, 0.05], 7).unwrap();
    let mass = c0.total() as f64 / 32.0;
    for v in &series.values[0] {
        assert!((v - mass).abs() < 1e-12);
    }
}

#[test]
fn density_series_rejects_decreasing_times() {
    let e = env("iid:1,2", &[16], 3);
    let c0 = ParticleConfig::empty(&e);
    let g = TestFunction::constant(1, 1.0);
    assert!(record_density_series(&e, &c0, 16, &[g], &[0.1, 0.05], 1).is_err());
}

#[test]
fn product_measure_concentrates() {
    let e = env("iid:1,2", &[512], 3);
    let g = TestFunction::cosine_bump(vec![0.5], 0.25, 1.0);
    let r = consistency_check(&e, &MacroscopicProfile::half_sine(), 512, &g, 0.05, 200, 9).unwrap();
    assert!(r.probability < 0.05, "{r:?}");
    assert!((r.mean_field - r.target).abs() < 0.02);
}

#[test]
fn variance_scan_matches_single_time_check() {
    let e = env("iid:1,2", &[16], 8);
    let g = TestFunction::cosine_bump(vec![0.5], 0.25, 1.0);
    let init = InitialLaw::Binomial { p: 0.5 };
    let scan = variance_bound_scan(&e, &init, 16, &g, &[0.05, 0.2], 200, 4).unwrap();
    let single = variance_bound_check(&e, &init, 16, &g, 0.2, 200, 4).unwrap();
    assert_eq!(
        scan,
        variance_bound_scan(&e, &init, 16, &g, &[0.05, 0.2], 200, 4).unwrap()
    );
    assert_eq!(scan[1].bound, single.bound);
    let se = scan[1].variance_stderr + single.variance_stderr;
    assert!((scan[1].variance - single.variance).abs() < 4.0 * se);
    assert!(scan.iter().all(|r| r.pass));
}

#[test]
fn variance_vanishes_for_deterministic_frozen_start() {
    let e = env("iid:1,2", &[16], 8);
    let g = TestFunction::cosine_bump(vec![0.5], 0.25, 1.0);
    let init = InitialLaw::Fixed {
        eta: e.alpha().to_vec(),
    };
    let r = variance_bound_check(&e, &init, 16, &g, 0.1, 50, 4).unwrap();
    assert!(r.variance.abs() < 1e-24);
    assert!(r.mean.abs() < 1e-12);
}

#[test]
fn hdl_over_budget_is_refused() {
    assert!(matches!(hdl_experiment(&small_hdl(10.0)), Err(SepError::Budget { .. })));
}

#[test]
fn hdl_report_is_complete_and_reproducible() {
    let a = hdl_experiment(&small_hdl(1e10)).unwrap();
    let b = hdl_experiment(&small_hdl(1e10)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.entries.len(), 2 * 2);
    assert_eq!(a.scales.len(), 2);
    assert_eq!(a.samples.len(), 2 * 2 * 2 * 3);
    assert!(a.to_csv().starts_with("N,t,G_id,replica,value\n"));
    assert!((a.threshold() - 0.05 * 1.5 * 0.5).abs() < 1e-3);
}

fn env_and_config() -> impl Strategy<Value = (Environment, ParticleConfig)> {
    (4usize..40, any::<u64>(), 0.0f64..=1.0).prop_map(|(n, seed, p)| {
        let e = Environment::sample(&EnvLaw::uniform(&[1, 2, 4]).unwrap(), &[n], seed).unwrap();
        let c = binomial_measure_sampler(&e, p, seed ^ 1).unwrap();
        (e, c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_field_lies_between_empty_and_full((e, c) in env_and_config(), amp in 0.1f64..3.0) {
        let n = e.size();
        let g = TestFunction::cosine_bump(vec![0.5], 0.25, amp);
        let x = density_field(&e, &c, n, &g).unwrap();
        let full = density_field(&e, &ParticleConfig::full(&e), n, &g).unwrap();
        prop_assert!(x >= 0.0);
        prop_assert!(x <= full + 1e-12);
    }

    #[test]
    fn density_field_is_linear_in_amplitude((e, c) in env_and_config(), amp in 0.1f64..3.0) {
        let n = e.size();
        let one = density_field(&e, &c, n, &TestFunction::cosine_bump(vec![0.5], 0.25, 1.0)).unwrap();
        let scaled = density_field(&e, &c, n, &TestFunction::cosine_bump(vec![0.5], 0.25, amp)).unwrap();
        prop_assert!((scaled - amp * one).abs() < 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn sampled_profile_respects_capacity(n in 4usize..40, seed in any::<u64>()) {
        let e = Environment::sample(&EnvLaw::uniform(&[1, 3]).unwrap(), &[n], seed).unwrap();
        let c = sample_profile(&e, &MacroscopicProfile::half_sine(), n, seed).unwrap();
        prop_assert!(c.eta().iter().zip(e.alpha()).all(|(&k, &a)| k <= a));
    }
}
