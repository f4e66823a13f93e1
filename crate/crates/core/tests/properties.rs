//! Property tests for the linear-algebra core and the correction algebra.

mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use timebin_core::conversion::{convert_channel, max_contrast_from_snr, ConversionConfig};
use timebin_core::hilbert::{
    apply_unitary_dm, apply_unitary_vec, measure_projective, outcome_probabilities, ops,
    DensityMatrix, Operator, StateVector,
};
use timebin_core::tomography::{correct_dark_counts, correct_readout, CorrectedProbability};

fn complex_strategy() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

/// Random normalized pure state on `dims`.
fn state_strategy(dims: Vec<usize>) -> impl Strategy<Value = StateVector> {
    let n: usize = dims.iter().product();
    proptest::collection::vec(complex_strategy(), n).prop_filter_map(
        "state must not be null",
        move |amps| {
            let mut state = StateVector::new(dims.clone(), amps).ok()?;
            state.normalize().ok()?;
            Some(state)
        },
    )
}

/// Random unitary on a `dim`-level system via Gram-Schmidt on a random
/// complex matrix (independent of the library's operator constructors).
fn unitary_strategy(dim: usize) -> impl Strategy<Value = Operator> {
    proptest::collection::vec(complex_strategy(), dim * dim).prop_filter_map(
        "matrix must be invertible",
        move |entries| {
            let mut cols: Vec<Vec<C64>> = (0..dim)
                .map(|c| (0..dim).map(|r| entries[r * dim + c]).collect())
                .collect();
            for c in 0..dim {
                for prev in 0..c {
                    let proj: C64 = cols[prev]
                        .iter()
                        .zip(&cols[c])
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    for r in 0..dim {
                        let sub = proj * cols[prev][r];
                        cols[c][r] -= sub;
                    }
                }
                let norm: f64 = cols[c].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    return None;
                }
                for r in 0..dim {
                    cols[c][r] /= norm;
                }
            }
            let mut mat = vec![C64::ZERO; dim * dim];
            for r in 0..dim {
                for c in 0..dim {
                    mat[r * dim + c] = cols[c][r];
                }
            }
            Operator::new(vec![dim], mat).ok()
        },
    )
}

/// Random mixed state: a convex mixture of a few random pure states.
fn density_strategy(dims: Vec<usize>) -> impl Strategy<Value = DensityMatrix> {
    let pure = state_strategy(dims.clone());
    (
        proptest::collection::vec(pure, 1..4),
        proptest::collection::vec(0.05f64..1.0, 1..4),
    )
        .prop_filter_map("weights/states must align", |(states, weights)| {
            let k = states.len().min(weights.len());
            let total: f64 = weights[..k].iter().sum();
            let parts: Vec<(f64, DensityMatrix)> = states[..k]
                .iter()
                .zip(&weights[..k])
                .map(|(s, w)| (w / total, s.to_density_matrix()))
                .collect();
            DensityMatrix::mixture(&parts).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm_and_trace(
        state in state_strategy(vec![2, 3]),
        u in unitary_strategy(2),
        rho in density_strategy(vec![2, 3]),
    ) {
        prop_assume!(u.is_unitary(1e-9));
        let mut vec_state = state.clone();
        apply_unitary_vec(&mut vec_state, &u, &[0]).unwrap();
        prop_assert!((vec_state.norm() - 1.0).abs() < 1e-10);

        let mut dm = rho.clone();
        apply_unitary_dm(&mut dm, &u, &[0]).unwrap();
        prop_assert!((dm.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(dm.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn tensor_then_partial_trace_recovers_the_system(
        system in density_strategy(vec![2]),
        ancilla in state_strategy(vec![3]),
    ) {
        // Build system ⊗ |anc⟩⟨anc| and trace the ancilla back out.
        let anc = ancilla.to_density_matrix();
        let d_sys = 2;
        let d_anc = 3;
        let mut joint = vec![C64::ZERO; (d_sys * d_anc) * (d_sys * d_anc)];
        for i in 0..d_sys {
            for j in 0..d_sys {
                for a in 0..d_anc {
                    for b in 0..d_anc {
                        let row = i * d_anc + a;
                        let col = j * d_anc + b;
                        joint[row * d_sys * d_anc + col] = system.entry(i, j) * anc.entry(a, b);
                    }
                }
            }
        }
        let joint = DensityMatrix::from_matrix(vec![2, 3], joint).unwrap();
        let back = joint.partial_trace(&[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((back.entry(i, j) - system.entry(i, j)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn projective_outcome_probabilities_sum_to_one(
        rho in density_strategy(vec![2, 3]),
        u in unitary_strategy(6),
    ) {
        prop_assume!(u.is_unitary(1e-9));
        // Complete projector set from a random orthonormal basis.
        let dims = vec![2usize, 3usize];
        let projectors: Vec<Operator> = (0..6)
            .map(|k| {
                let basis = StateVector::basis(&[6], &[k]);
                let mut rotated = basis;
                apply_unitary_vec(&mut rotated, &u, &[0]).unwrap();
                let amps = rotated.amplitudes().to_vec();
                let rotated = StateVector::new(dims.clone(), amps).unwrap();
                Operator::projector(&rotated)
            })
            .collect();
        let probs = outcome_probabilities(&rho, &projectors).unwrap();
        let total: f64 = probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
        prop_assert!(probs.iter().all(|p| *p >= -1e-12));
    }

    #[test]
    fn fidelity_stays_in_the_unit_interval(
        rho in density_strategy(vec![2, 3]),
        target in state_strategy(vec![2, 3]),
    ) {
        let f = rho.fidelity_to_pure(&target).unwrap();
        prop_assert!(f >= -1e-10 && f <= 1.0 + 1e-10, "fidelity {f}");
    }

    #[test]
    fn sampled_measurements_report_consistent_probabilities(
        rho in density_strategy(vec![2, 3]),
        seed in 0u64..1000,
    ) {
        let projectors = [
            ops::level_projector(3, 0).embed(&[2, 3], &[1]).unwrap(),
            ops::level_projector(3, 1).embed(&[2, 3], &[1]).unwrap(),
            ops::level_projector(3, 2).embed(&[2, 3], &[1]).unwrap(),
        ];
        let mut rng = timebin_core::rng::stream(seed, timebin_core::rng::StreamDomain::Trial, 0);
        let out = measure_projective(&rho, &projectors, &mut rng).unwrap();
        let probs = outcome_probabilities(&rho, &projectors).unwrap();
        prop_assert!((out.probability - probs[out.outcome]).abs() < 1e-12);
        prop_assert!((out.post_state.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conversion_channel_is_trace_preserving_and_photon_decreasing(
        rho in density_strategy(vec![2, 3]),
        eta in 0.0f64..1.0,
    ) {
        let cfg = ConversionConfig { eta_c: eta, ..Default::default() };
        let post = convert_channel(&rho, &cfg).unwrap();
        prop_assert!((post.trace().re - 1.0).abs() < 1e-10);
        let photon_pop = |r: &DensityMatrix| {
            r.entry(1, 1).re + r.entry(2, 2).re + r.entry(4, 4).re + r.entry(5, 5).re
        };
        prop_assert!(photon_pop(&post) <= photon_pop(&rho) + 1e-10);
        // Spin marginal untouched by loss.
        let before = rho.partial_trace(&[0]).unwrap();
        let after = post.partial_trace(&[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((before.entry(i, j) - after.entry(i, j)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn snr_contrast_bound_is_monotone(a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo);
        prop_assert!(max_contrast_from_snr(lo).unwrap() <= max_contrast_from_snr(hi).unwrap());
    }

    #[test]
    fn readout_correction_inverts_the_confusion_matrix(
        p_true in 0.0f64..1.0,
        f0 in 0.55f64..1.0,
        f1 in 0.55f64..1.0,
    ) {
        // Corrupt an exact probability through the confusion matrix, then
        // correct counts drawn exactly at that rate.
        let p_meas = f0 * p_true + (1.0 - f1) * (1.0 - p_true);
        let n = 1_000_000u64;
        let n0 = (p_meas * n as f64).round() as u64;
        let corrected = correct_readout(n0, n - n0, f0, f1).unwrap();
        prop_assert!((corrected.p - p_true).abs() < 1e-5, "{} vs {p_true}", corrected.p);
    }

    #[test]
    fn dark_correction_inverts_uniform_dilution(
        p_signal in 0.0f64..1.0,
        dark in 0.0f64..0.9,
    ) {
        let diluted = (1.0 - dark) * p_signal + dark * 0.5;
        let corrected = correct_dark_counts(
            CorrectedProbability { p: diluted, std: 0.01, clamped: false },
            dark,
        )
        .unwrap();
        prop_assert!((corrected.p - p_signal).abs() < 1e-10);
    }
}
