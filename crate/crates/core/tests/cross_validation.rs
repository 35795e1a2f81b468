//! The three independent evaluators (Dicke-ladder simulator, product-basis
//! reference, moment oracle) against each other and against the closed forms.

use proptest::prelude::*;
use qndmetro::disorder::{disorder_average, Evaluation, Quantity};
use qndmetro::formulas::delta_phi;
use qndmetro::oracle::{exact_delta_phi, exact_moments, matched_variance_identity, Label, MomentSet};
use qndmetro::sim::{reference_moments, run_protocol, simulate_moments, Limits};
use qndmetro::{CouplingDistribution, EnsembleConfig, Protocol, ProtocolParams};

fn assert_moments_close(a: &MomentSet, b: &MomentSet, tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.labels(), b.labels());
    for x in a.labels() {
        prop_assert!((a.mean(x).unwrap() - b.mean(x).unwrap()).abs() <= tol, "mean {}", x.name());
        for y in a.labels() {
            let (p, q) = (a.covariance(x, y).unwrap(), b.covariance(x, y).unwrap());
            prop_assert!((p - q).abs() <= tol, "cov {} {}: {p} vs {q}", x.name(), y.name());
        }
    }
    Ok(())
}

fn protocol() -> impl Strategy<Value = Protocol> {
    prop::sample::select(Protocol::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ladder_matches_product_basis(
        weights in prop::collection::vec(0.1f64..2.0, 1..=4),
        n in 1usize..=5,
        chi in 0.0f64..2.0,
        phi in -1.0f64..1.0,
        p in protocol(),
    ) {
        let cfg = EnsembleConfig::new(n, weights).unwrap();
        let params = ProtocolParams::new(chi, phi, p);
        let a = simulate_moments(&cfg, &params, &Limits::default()).unwrap();
        let b = reference_moments(&cfg, &params).unwrap();
        assert_moments_close(&a, &b, 1e-10)?;
    }

    #[test]
    fn ladder_matches_oracle(
        weights in prop::collection::vec(0.1f64..2.0, 1..=5),
        n in 1usize..=48,
        chi in 0.0f64..1.5,
        phi in -1.0f64..1.0,
        p in protocol(),
    ) {
        let cfg = EnsembleConfig::new(n, weights).unwrap();
        let params = ProtocolParams::new(chi, phi, p);
        let a = simulate_moments(&cfg, &params, &Limits::default()).unwrap();
        assert_moments_close(&a, &exact_moments(&cfg, &params), 1e-9)?;
    }

    #[test]
    fn matched_noise_cancels(
        weights in prop::collection::vec(0.1f64..2.0, 1..=5),
        n in 1usize..=48,
        chi in 0.0f64..1.5,
    ) {
        let cfg = EnsembleConfig::new(n, weights.clone()).unwrap();
        let m = simulate_moments(&cfg, &ProtocolParams::new(chi, 0.0, Protocol::Matched), &Limits::default()).unwrap();
        let identity = matched_variance_identity(&weights, n, chi);
        prop_assert!((m.variance(Label::A).unwrap() - identity).abs() < 1e-9);
    }

    #[test]
    fn covariance_is_positive_semidefinite(
        weights in prop::collection::vec(0.1f64..2.0, 1..=6),
        n in 1usize..=2000,
        chi in 0.0f64..1.0,
        phi in -1.0f64..1.0,
        p in protocol(),
    ) {
        let cfg = EnsembleConfig::new(n, weights).unwrap();
        let m = exact_moments(&cfg, &ProtocolParams::new(chi, phi, p));
        prop_assert!(m.min_relative_eigenvalue() > -1e-9);
    }
}

#[test]
fn phase_errors_agree() {
    let cfg = EnsembleConfig::new(100, vec![0.8, 1.1, 1.3]).unwrap();
    for p in Protocol::ALL {
        let params = ProtocolParams::from_xi(0.8, 100, 0.0, p).unwrap();
        let sim = run_protocol(&cfg, &params, 1e-4, &Limits::default()).unwrap();
        let oracle = exact_delta_phi(&cfg, &params, 1e-4).unwrap();
        assert!((sim.delta_phi / oracle.delta_phi - 1.0).abs() < 1e-8, "{p}");
        assert!((sim.signal_slope - oracle.signal_slope).abs() < 1e-8);
    }
}

#[test]
fn stored_improves_matched_by_sqrt2() {
    let cfg = EnsembleConfig::uniform(3, 400).unwrap();
    let dphi = |p| {
        let params = ProtocolParams::from_xi(1.0, 400, 0.0, p).unwrap();
        run_protocol(&cfg, &params, 1e-4, &Limits::default()).unwrap().delta_phi
    };
    let ratio = dphi(Protocol::Stored) / dphi(Protocol::Matched);
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.02, "{ratio}");
}

/// Large-ensemble check through the oracle: N = 1000 atoms, ξΔg² = 0.2.
#[test]
fn gaussian_average_matches_formulas_at_large_n() {
    let (n_atoms, n_photons) = (1000, 100_000);
    let base = EnsembleConfig::uniform(n_atoms, n_photons).unwrap();
    let dist = CouplingDistribution::gaussian(0.2, 8);
    for p in [Protocol::Unmatched, Protocol::Matched] {
        let params = ProtocolParams::from_xi(1.0, n_photons, 0.0, p).unwrap();
        let s = disorder_average(&Evaluation::new(Quantity::Oracle), &dist, 3, &base, &params).unwrap();
        let formula = delta_phi(p, 1.0, 0.2, n_atoms).unwrap().delta_phi;
        let band = 3.0 * s.std_error + 0.05 * formula;
        assert!((s.mean - formula).abs() < band, "{p}: {} vs {formula} (band {band})", s.mean);
    }
}
