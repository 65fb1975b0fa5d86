use asian_regime::error::ModelError;
use asian_regime::model::{OptionSpec, RegimeModel};
use asian_regime::noswitch::{bs_european_call, symmetry_transform};
use asian_regime::yor::theta;
use proptest::prelude::*;

fn generator(rates: &[f64]) -> Vec<Vec<f64>> {
    // three regimes: off-diagonals from `rates`, diagonals closing each row
    let mut q = vec![vec![0.0; 3]; 3];
    let mut k = 0;
    for (i, row) in q.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rates[k];
                k += 1;
            }
        }
        row[i] = -(0..3).filter(|&j| j != i).map(|j| row[j]).sum::<f64>();
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn valid_generators_are_accepted(rates in prop::collection::vec(0.0f64..5.0, 6), h in 0.01f64..3.0) {
        let model = RegimeModel::new(generator(&rates), vec![0.03, 0.05, 0.07], vec![0.1, 0.2, 0.3], 0.02).unwrap();
        for i in 0..3 {
            let rho = model.contraction_factor(i, h);
            prop_assert!((0.0..1.0).contains(&rho));
            prop_assert!(model.fixed_strike_contraction_factor(i, h) < 1.0);
        }
    }

    #[test]
    fn broken_row_sums_are_named(rates in prop::collection::vec(0.0f64..5.0, 6), bump in 1e-6f64..1.0, row in 0usize..3) {
        let mut q = generator(&rates);
        q[row][row] += bump;
        let err = RegimeModel::new(q, vec![0.05; 3], vec![0.2; 3], 0.0).unwrap_err();
        let named = matches!(err, ModelError::RowSumNonZero { row: r, .. } if r == row);
        prop_assert!(named);
    }

    #[test]
    fn theta_is_non_negative(r in 0.05f64..20.0, t in 0.05f64..3.0) {
        prop_assert!(theta(r, t).unwrap() >= 0.0);
    }

    #[test]
    fn symmetry_parameters_stay_in_range(s in 0.0f64..0.99, x in 10.0f64..300.0, frac in 0.0f64..1.0) {
        let model = RegimeModel::two_state(1.0, 1.0, [0.05, 0.08], [0.2, 0.4], 0.02).unwrap();
        let a = frac * x * s;
        let spec = OptionSpec::floating(0.0, s, 1.0, x, a).unwrap();
        let sym = symmetry_transform(&model, &spec, 1).unwrap();
        prop_assert!(sym.beta > 0.0 && sym.beta <= 1.0);
        prop_assert!(sym.lambda >= 0.0);
        prop_assert!((sym.coefficients.discount - 0.02).abs() < 1e-15);
        prop_assert!((sym.coefficients.dividend - 0.08).abs() < 1e-15);
    }

    #[test]
    fn european_call_within_no_arbitrage_bounds(k in 1.0f64..300.0, sigma in 0.05f64..1.0, tau in 0.01f64..3.0) {
        let c = bs_european_call(0.05, sigma, 0.02, 0.0, tau, 100.0, k);
        let upper = 100.0 * (-0.02 * tau).exp();
        let lower = (upper - k * (-0.05 * tau).exp()).max(0.0);
        prop_assert!(c <= upper + 1e-9 && c >= lower - 1e-9);
    }
}
