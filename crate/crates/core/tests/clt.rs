use cocycle_clt::clt::*;
use cocycle_clt::cocycle::{MatrixModel, Model};
use cocycle_clt::monodromy::MonodromyRep;
use cocycle_clt::origami::{eierlegende_wollmilchsau, h2_three_square};
use cocycle_clt::rng::{substream, Purpose};
use cocycle_clt::stats;
use rand::Rng;
use rand_distr::StandardNormal;

fn normals(seed: u64, n: usize, var: f64) -> Vec<f64> {
    let mut rng = substream(seed, Purpose::Synthetic, 0);
    (0..n).map(|_| var.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn synthetic(values: Vec<f64>) -> CltSampleSet {
    CltSampleSet::from_values(values, DriverTag::Brownian, 1.0, 0.0, 0)
}

fn complement(p: cocycle_clt::PermPair) -> Model {
    let c = MonodromyRep::build(p).unwrap().tautological_complement().unwrap();
    Model::Matrix(MatrixModel::new("complement", c.rep))
}

fn quick() -> SampleOptions {
    SampleOptions { dt: 1e-2, burn_in: 20.0, ..SampleOptions::default() }
}

#[test]
fn recovers_an_injected_variance() {
    let r = variance_estimate(&synthetic(normals(1, 10_000, 2.0)), BOOTSTRAP_RESAMPLES, 1);
    assert!(r.ci.0 <= 2.0 && 2.0 <= r.ci.1, "{:?}", r.ci);
    assert!(r.ci.0 <= r.v && r.v <= r.ci.1);
    assert!(!r.degenerate);
}

#[test]
fn standard_normal_draws() {
    let r = variance_estimate(&synthetic(normals(2, 100_000, 1.0)), BOOTSTRAP_RESAMPLES, 2);
    assert!((r.v - 1.0).abs() <= 0.02, "{}", r.v);
    assert!(r.ks <= 0.005, "{}", r.ks);
}

#[test]
fn uniform_draws_are_flagged() {
    let mut rng = substream(3, Purpose::Synthetic, 0);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = variance_estimate(&synthetic(xs), BOOTSTRAP_RESAMPLES, 3);
    assert!(r.ks > 0.05, "{}", r.ks);
}

#[test]
fn constant_samples_are_degenerate() {
    let r = variance_estimate(&synthetic(vec![0.25; 500]), BOOTSTRAP_RESAMPLES, 4);
    assert!(r.degenerate);
    assert_eq!(r.v, 0.0);
    assert_eq!(r.ks, 0.0);
    let mut xs = vec![0.0; 100];
    xs[0] = 1e-7;
    let r = variance_estimate(&synthetic(xs), BOOTSTRAP_RESAMPLES, 4);
    assert!(r.degenerate);
    assert!((r.ks - 0.01).abs() < 1e-12);
}

fn exact(v: f64) -> VarianceReport {
    VarianceReport { v, ci: (v, v), ks: 0.0, mean: 0.0, n: 100, t: 1.0, degenerate: false }
}

#[test]
fn relation_arithmetic() {
    let ok = variance_relation(&exact(3.0), &exact(4.0), 1.0, 0.0);
    assert_eq!(ok.residual, 0.0);
    assert!(!ok.violated);
    let bad = variance_relation(&exact(3.0), &exact(3.0), 1.0, 0.0);
    assert_eq!(bad.residual, 1.0);
    assert!(bad.violated);
    assert_eq!(positivity_margin(&exact(3.0), 1.5), 0.75);
}

#[test]
fn bootstrap_coverage_is_nominal() {
    let v = 1.5;
    let hits = (0..200u64)
        .filter(|&i| {
            let r = variance_estimate(&synthetic(normals(100 + i, 400, v)), BOOTSTRAP_RESAMPLES, i);
            r.ci.0 <= v && v <= r.ci.1
        })
        .count();
    let rate = hits as f64 / 200.0;
    // binomial(200, 0.95) has sd 0.015; percentile intervals run slightly short at n = 400
    assert!((0.88..=0.99).contains(&rate), "{rate}");
}

#[test]
fn tautological_calibration() {
    let c = calibrate_lambda(&Model::tautological(), 1, 1e3, 5, &quick()).unwrap();
    assert!((c.lambda - 1.0).abs() < 0.01);
}

#[test]
fn wollmilchsau_calibration_vanishes() {
    let c = calibrate_lambda(&complement(eierlegende_wollmilchsau()), 1, 1e3, 6, &quick()).unwrap();
    assert!(c.lambda.abs() < 0.01, "{c:?}");
}

#[test]
fn calibration_is_stable_under_doubling() {
    let m = complement(h2_three_square());
    let a = calibrate_lambda(&m, 1, 2e3, 7, &quick()).unwrap();
    let b = calibrate_lambda(&m, 1, 4e3, 7, &quick()).unwrap();
    let se = (a.se * a.se + b.se * b.se).sqrt();
    assert!((a.lambda - b.lambda).abs() <= 2.0 * se, "{a:?} {b:?}");
    assert!((b.lambda - 1.0 / 3.0).abs() < 0.05, "{b:?}");
}

#[test]
fn tautological_geodesic_samples_are_exact() {
    let taut = Model::tautological();
    let s = clt_samples(&taut, DriverTag::Geodesic, 100, 30.0, 1.0, 1, 8, &quick()).unwrap();
    assert!(s.values.iter().all(|&x| x == 0.0));
    let s = clt_samples(&taut, DriverTag::Geodesic, 100, 30.0, 0.9, 1, 8, &quick()).unwrap();
    let want = 0.1 * 30f64.sqrt();
    assert!(s.values.iter().all(|&x| (x - want).abs() < 1e-12));
    let r = variance_estimate(&s, BOOTSTRAP_RESAMPLES, 8);
    assert!(r.degenerate && r.v == 0.0);
}

#[test]
fn tautological_brownian_variance_is_one() {
    let taut = Model::tautological();
    let s = clt_samples(&taut, DriverTag::Brownian, 4000, 20.0, 1.0, 1, 9, &quick()).unwrap();
    assert_eq!(s.n, 4000);
    assert!(s.values.iter().all(|x| x.is_finite()));
    let r = variance_estimate(&s, BOOTSTRAP_RESAMPLES, 9);
    assert!((r.v - 1.0).abs() < 0.1, "{r:?}");
    assert!(r.ks < 0.03, "{r:?}");
    let g = variance_estimate(&clt_samples(&taut, DriverTag::Geodesic, 100, 20.0, 1.0, 1, 9, &quick()).unwrap(), 100, 9);
    // V_ρ(T) - 1 is O(1/T) (negative covariance of W_T and η_T), so only the size is pinned here
    let rel = variance_relation(&g, &r, 1.0, 0.0);
    assert!(rel.residual.abs() <= 0.1, "{rel:?}");
}

#[test]
fn stopped_runs_report_retries() {
    let taut = Model::tautological();
    // a tight horizon cap forces some paths to be redrawn
    let opts = SampleOptions { max_horizon_factor: 1.05, ..quick() };
    let s = clt_samples(&taut, DriverTag::BrownianStopped, 400, 10.0, 1.0, 1, 10, &opts).unwrap();
    assert!(s.not_hit > 0);
    assert!(s.values.iter().all(|&x| x.abs() < 1e-9));
}

#[test]
fn reruns_are_bit_identical_for_any_worker_count() {
    let m = complement(h2_three_square());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| clt_samples(&m, DriverTag::Brownian, 64, 10.0, 0.33, 1, 11, &quick()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), run(1).values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn covariance_with_the_radial_noise() {
    let taut = Model::tautological();
    let opts = quick();
    let (obs, _) = brownian_observations(&taut, 4000, 20.0, 1, 12, None, &opts).unwrap();
    let c1 = covariance_from_observations(&obs, 20.0, 1.0, WienerStream::First, 12);
    assert!((c1.cov + 1.0).abs() < 0.1, "{c1:?}");
    assert!(c1.ci.0 <= c1.cov && c1.cov <= c1.ci.1);
    let c2 = covariance_from_observations(&obs, 20.0, 1.0, WienerStream::Second, 12);
    assert!(c2.cov.abs() < 0.05, "{c2:?}");
    assert!(c2.ci.0 <= 0.0 && 0.0 <= c2.ci.1, "{c2:?}");
}

#[test]
fn covariance_on_the_h2_surface() {
    let m = MonodromyRep::build(h2_three_square()).unwrap();
    let m = Model::Matrix(MatrixModel::new("full", m));
    let c = covariance_check(&m, 1000, 20.0, 1.0, 1, 13, WienerStream::First, &quick()).unwrap();
    assert!(c.ci.0 - 0.1 <= -1.0 && -1.0 <= c.ci.1 + 0.1, "{c:?}");
}

#[test]
fn discrepancy_of_identical_and_resampled_sets() {
    let xs = normals(14, 10_000, 1.0);
    assert_eq!(stats::interval_discrepancy(&xs, &xs, &discrepancy_grid(&xs, &xs)), 0.0);
    let ys = normals(15, 10_000, 1.0);
    let d = stats::interval_discrepancy(&xs, &ys, &discrepancy_grid(&xs, &ys));
    assert!(d <= 0.03, "{d}");
}

#[test]
fn tautological_stopped_and_geodesic_coincide() {
    let taut = Model::tautological();
    let mut last = f64::INFINITY;
    for t in [20.0, 40.0, 80.0] {
        let r = stopped_vs_fixed_check(&taut, 200, t, 1.0, 1, 16, &quick()).unwrap();
        assert!(r.discrepancy <= last);
        last = r.discrepancy;
    }
    assert_eq!(last, 0.0);
}
