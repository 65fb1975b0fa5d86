use asian_regime::model::{OptionSpec, RegimeModel};
use asian_regime::noswitch::{bs_european_call, c0_floating, expected_running_integral, fixed_put_ns};
use asian_regime::oracle::{mc_price, path_rng, sample_psi, simulate_path, McConfig, SimulationModel};
use asian_regime::yor::QuadratureConfig;

const PATHS: usize = 200_000;

fn within(value: f64, mean: f64, se: f64, k: f64) -> bool {
    (value - mean).abs() <= k * se
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn no_switch_prices_agree_with_frozen_monte_carlo() {
    let model = RegimeModel::single(0.05, 0.3, 0.01).unwrap();
    let cfg = McConfig::default();
    let quad = QuadratureConfig::default();
    for spec in [
        OptionSpec::floating(0.0, 0.0, 1.0, 100.0, 0.0).unwrap(),
        OptionSpec::floating(0.0, 0.5, 1.0, 100.0, 40.0).unwrap(),
    ] {
        let c0 = c0_floating(&model, &spec, 0, &quad).unwrap();
        let est = mc_price(&model, &spec, 0, PATHS, 31, &cfg).unwrap();
        assert!(within(c0, est.mean, est.std_error, 3.0), "{c0} vs {est:?}");
    }
    let put = OptionSpec::fixed_put(0.0, 0.25, 1.0, 100.0, 30.0, 105.0).unwrap();
    let p = fixed_put_ns(&model, &put, 0, &quad).unwrap();
    let est = mc_price(&model, &put, 0, PATHS, 32, &cfg).unwrap();
    assert!(within(p, est.mean, est.std_error, 3.0), "{p} vs {est:?}");
}

#[test]
fn european_call_matches_plain_monte_carlo() {
    let model = SimulationModel::from(&RegimeModel::single(0.05, 0.2, 0.0).unwrap());
    let spec = OptionSpec::floating(0.0, 0.0, 1.0, 100.0, 0.0).unwrap();
    let payoffs: Vec<f64> = (0..PATHS as u64)
        .map(|p| {
            let path = simulate_path(&model, &spec, 0, &mut path_rng(4, p), 1);
            path.discount * (path.terminal - 100.0).max(0.0)
        })
        .collect();
    let (m, se) = mean_se(&payoffs);
    let bs = bs_european_call(0.05, 0.2, 0.0, 0.0, 1.0, 100.0, 100.0);
    assert!(within(bs, m, se, 3.0), "{bs} vs {m} +- {se}");
}

#[test]
fn running_integral_mean_matches_closed_form() {
    let base = RegimeModel::single(0.06, 0.25, 0.02).unwrap();
    let model = SimulationModel::from(&base);
    let spec = OptionSpec::floating(0.0, 0.2, 1.0, 100.0, 15.0).unwrap();
    let a: Vec<f64> = (0..50_000u64)
        .map(|p| simulate_path(&model, &spec, 0, &mut path_rng(8, p), 256).running)
        .collect();
    let (m, se) = mean_se(&a);
    let exact = expected_running_integral(&base.coefficients(0), 0.8, 100.0, 15.0);
    assert!(within(exact, m, se, 3.0), "{exact} vs {m} +- {se}");
}

#[test]
fn psi_samples_have_gaussian_log_moments() {
    let model = RegimeModel::two_state(1.0, 1.0, [0.05, 0.08], [0.2, 0.4], 0.02).unwrap();
    let dt = 0.7;
    let s = sample_psi(&model, 1, 0.1, 2.0, dt, 100_000, 12, 64).unwrap();
    let z: Vec<f64> = s.iter().map(|p| p.0).collect();
    let ez: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let (mz, sz) = mean_se(&z);
    let (me, se) = mean_se(&ez);
    let nu = model.scalars(1).nu;
    assert!(within(nu * dt, mz, sz, 3.0));
    assert!(within((0.06f64 * dt).exp(), me, se, 3.0));
    assert!(s.iter().all(|p| p.1 >= 2.0));
}

#[test]
fn antithetic_pairs_reduce_variance() {
    let model = RegimeModel::single(0.05, 0.3, 0.01).unwrap();
    let spec = OptionSpec::floating(0.0, 0.0, 1.0, 100.0, 0.0).unwrap();
    let plain = mc_price(&model, &spec, 0, 50_000, 5, &McConfig { substeps: 64, antithetic: false }).unwrap();
    let anti = mc_price(&model, &spec, 0, 50_000, 5, &McConfig { substeps: 64, antithetic: true }).unwrap();
    let ratio = (anti.std_error / plain.std_error).powi(2);
    println!("antithetic variance ratio {ratio:.3}");
    assert!(ratio < 0.75, "{ratio}");
}

#[test]
fn standard_error_scales_like_inverse_root_paths() {
    let model = RegimeModel::two_state(1.0, 1.0, [0.05, 0.08], [0.2, 0.4], 0.02).unwrap();
    let spec = OptionSpec::floating(0.0, 0.0, 1.0, 100.0, 0.0).unwrap();
    let cfg = McConfig { substeps: 32, antithetic: false };
    let se: Vec<f64> = [25_000, 100_000, 400_000]
        .iter()
        .map(|&n| mc_price(&model, &spec, 0, n, 77, &cfg).unwrap().std_error)
        .collect();
    for w in se.windows(2) {
        assert!((w[1] / w[0] / 0.5 - 1.0).abs() < 0.2, "{se:?}");
    }
}

#[test]
fn doubling_substeps_moves_price_less_than_one_standard_error() {
    let model = RegimeModel::two_state(1.0, 1.0, [0.05, 0.08], [0.2, 0.4], 0.02).unwrap();
    let spec = OptionSpec::fixed_put(0.0, 0.0, 1.0, 100.0, 0.0, 100.0).unwrap();
    let coarse = mc_price(&model, &spec, 0, PATHS, 3, &McConfig::default()).unwrap();
    let fine = mc_price(&model, &spec, 0, PATHS, 3, &McConfig { substeps: 512, antithetic: false }).unwrap();
    assert!((coarse.mean - fine.mean).abs() < coarse.std_error, "{coarse:?} {fine:?}");
}
