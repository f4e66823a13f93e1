//! Shared analytic oracle for the integration and acceptance suites.
//!
//! The oracle composes expected contrasts from the ensemble-averaged clicked
//! state using exact operator algebra (projectors, routing Kraus operators,
//! partial traces) plus closed-form Gaussian averages and numerical
//! quadrature. It never samples; the Monte Carlo runner shares only the
//! model's operator definitions with this path, so agreement between the two
//! cross-checks the whole sampling pipeline.

#![allow(dead_code)]

use timebin_core::config::ExperimentConfig;
use timebin_core::hilbert::{
    flat_index, states, C64, DensityMatrix, Operator, PHOTON_EARLY, PHOTON_LATE,
};
use timebin_core::interferometer::routing_kraus;
use timebin_core::tomography::{Basis, Detector, Window};

/// Ensemble coherence of the clicked state: Gaussian phase average
/// exp(-(2πσT)²/2) times the no-double-excitation probability (1-p)².
pub fn coherence_visibility(cfg: &ExperimentConfig) -> f64 {
    let sigma = (cfg.protocol.spectral_diffusion_sigma.powi(2)
        + cfg.protocol.laser_lock_sigma.powi(2))
    .sqrt();
    let phase_std = std::f64::consts::TAU * sigma * cfg.protocol.bin_separation;
    (1.0 - cfg.protocol.p_reexc).powi(2) * (-phase_std * phase_std / 2.0).exp()
}

/// Ensemble-averaged clicked state: the Bell target with its single
/// coherence pair scaled by the visibility.
pub fn clicked_ensemble(cfg: &ExperimentConfig) -> DensityMatrix {
    let v = coherence_visibility(cfg);
    let dims = states::spin_photon_dims();
    let mut rho = states::target_bell_state().to_density_matrix();
    let a = flat_index(&dims, &[1, PHOTON_EARLY]);
    let b = flat_index(&dims, &[0, PHOTON_LATE]);
    rho.set_entry(a, b, rho.entry(a, b) * v);
    rho.set_entry(b, a, rho.entry(b, a) * v);
    rho
}

/// Spin state underneath a noise click: attempts with no fiber photon leave
/// the balanced superposition, attempts whose photon is lost (or measured
/// elsewhere) leave the maximally mixed marginal.
pub fn noise_click_spin(cfg: &ExperimentConfig) -> DensityMatrix {
    let p = cfg.protocol.p_emit_collect;
    let plus = states::spin_superposition(0.0).to_density_matrix();
    let marginal = clicked_ensemble(cfg).partial_trace(&[0]).unwrap();
    DensityMatrix::mixture(&[(1.0 - p, plus), (p, marginal)]).unwrap()
}

/// Fraction of recorded clicks that are signal: snr/(snr + 1). Signal and
/// noise photons have identical window/detector marginals, so the ratio
/// survives any window post-selection.
pub fn signal_weight(cfg: &ExperimentConfig) -> f64 {
    cfg.conversion.snr / (cfg.conversion.snr + 1.0)
}

/// Mean of cos(ν·τ) over drift velocities ν ~ N(0, rate²) and click times τ
/// uniform in the measurement window, by Simpson quadrature.
pub fn drift_dephasing_factor(rate: f64, window: f64) -> f64 {
    if rate <= 0.0 {
        return 1.0;
    }
    let f = |tau: f64| (-(rate * tau) * (rate * tau) / 2.0).exp();
    let n = 2000;
    let h = window / n as f64;
    let mut acc = f(0.0) + f(window);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0 / window
}

fn spin_zero_prob(spin: &DensityMatrix, axis_phi: Option<f64>) -> f64 {
    let proj = match axis_phi {
        None => timebin_core::hilbert::ops::level_projector(2, 0),
        Some(phi) => Operator::projector(&states::spin_superposition(phi)),
    };
    spin.expectation(&proj).unwrap().re
}

/// Expected corrected Z contrast: perfectly anti-correlated signal diluted
/// by bin-uniform noise.
pub fn predicted_z_contrast(cfg: &ExperimentConfig) -> f64 {
    let rho = clicked_ensemble(cfg);
    let dims = states::spin_photon_dims();
    let pe = |spin: usize, bin: usize| {
        let i = flat_index(&dims, &[spin, bin]);
        rho.entry(i, i).re
    };
    let p0_given_early = pe(0, PHOTON_EARLY) / (pe(0, PHOTON_EARLY) + pe(1, PHOTON_EARLY));
    let p0_given_late = pe(0, PHOTON_LATE) / (pe(0, PHOTON_LATE) + pe(1, PHOTON_LATE));
    let w = if cfg.scenario.uses_conversion() {
        signal_weight(cfg)
    } else {
        1.0
    };
    let noise_p0 = spin_zero_prob(&noise_click_spin(cfg), None);
    let p_early = w * p0_given_early + (1.0 - w) * noise_p0;
    let p_late = w * p0_given_late + (1.0 - w) * noise_p0;
    (p_early - p_late).abs()
}

/// Expected corrected X or Y contrast from the two readout datasets of
/// middle-window D3 clicks, including lock residual, setpoint error, and
/// intra-window drift dephasing.
pub fn predicted_xy_contrast(cfg: &ExperimentConfig, basis: Basis) -> f64 {
    let setpoint = match basis {
        Basis::X => std::f64::consts::FRAC_PI_4,
        Basis::Y => 3.0 * std::f64::consts::FRAC_PI_4,
        Basis::Z => panic!("use predicted_z_contrast"),
    };
    let mean_phase = setpoint + cfg.interferometer.setpoint_error;
    let rho = clicked_ensemble(cfg);

    // Signal: condition on the middle-window D3 Kraus branch at the mean
    // phase, then scale the coherent part by the Gaussian lock residual and
    // drift averages.
    let kraus = routing_kraus(mean_phase);
    let (_, _, k_mid_d3) = kraus
        .iter()
        .find(|(w, d, _)| *w == Window::Middle && *d == Detector::D3)
        .unwrap();
    let full = k_mid_d3.embed(rho.dims(), &[1]).unwrap();
    let mut post = rho.evolved(&full).unwrap();
    post.renormalize().unwrap();
    let spin = post.partial_trace(&[0]).unwrap();

    let sigma = cfg.interferometer.residual_lock_sigma;
    let lock_factor = (-sigma * sigma / 2.0).exp();
    let drift_factor = drift_dephasing_factor(
        cfg.interferometer.drift_rate,
        cfg.interferometer.free_run_duration(),
    );
    let axis = match basis {
        Basis::X => (0.0, std::f64::consts::PI),
        Basis::Y => (std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2),
        Basis::Z => unreachable!(),
    };
    let damp = |p: f64| 0.5 + (p - 0.5) * lock_factor * drift_factor;
    let p_plus_sig = damp(spin_zero_prob(&spin, Some(axis.0)));
    let p_minus_sig = damp(spin_zero_prob(&spin, Some(axis.1)));

    let noise_spin = noise_click_spin(cfg);
    let p_plus_noise = spin_zero_prob(&noise_spin, Some(axis.0));
    let p_minus_noise = spin_zero_prob(&noise_spin, Some(axis.1));

    let w = signal_weight(cfg);
    let p_plus = w * p_plus_sig + (1.0 - w) * p_plus_noise;
    let p_minus = w * p_minus_sig + (1.0 - w) * p_minus_noise;
    (p_plus - p_minus).abs()
}

/// Effective click-conditioned joint state seen by the analysis: the signal
/// ensemble diluted by noise clicks carrying an uncorrelated bin.
pub fn effective_click_state(cfg: &ExperimentConfig) -> DensityMatrix {
    let dims = states::spin_photon_dims();
    let d = 6;
    let noise_spin = noise_click_spin(cfg);
    let mut noise_joint = vec![C64::ZERO; d * d];
    for s in 0..2 {
        for t in 0..2 {
            for bin in [PHOTON_EARLY, PHOTON_LATE] {
                let i = flat_index(&dims, &[s, bin]);
                let j = flat_index(&dims, &[t, bin]);
                noise_joint[i * d + j] = noise_spin.entry(s, t) * 0.5;
            }
        }
    }
    let noise = DensityMatrix::from_matrix(dims, noise_joint).unwrap();
    let w = signal_weight(cfg);
    DensityMatrix::mixture(&[(w, clicked_ensemble(cfg)), (1.0 - w, noise)]).unwrap()
}

/// Three-sigma binomial tolerance for a contrast built from two conditional
/// probabilities with roughly `n_per_outcome` counts each.
pub fn contrast_tolerance(n_per_outcome: u64) -> f64 {
    3.0 * (2.0 * 0.25 / n_per_outcome.max(1) as f64).sqrt()
}
