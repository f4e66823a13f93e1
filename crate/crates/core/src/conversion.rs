//! Frequency-conversion channel: photon survival with probability η_c and
//! pump-induced noise clicks that are spin-uncorrelated and uniform over the
//! two time bins, parameterized by the measured signal-to-noise ratio.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    apply_kraus_sampled, apply_kraus_sum, C64, DensityMatrix, Operator, PHOTON_DIM, PHOTON_EARLY,
    PHOTON_LATE, PHOTON_VACUUM,
};
use crate::tomography::Window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionConfig {
    /// Total conversion efficiency of the downconversion path.
    pub eta_c: f64,
    /// Signal clicks per noise click within the detection windows.
    pub snr: f64,
    /// Detector dark-count rate (clicks/s), lumped at the detector.
    pub dark_count_rate: f64,
    /// Duration of one detection window (s).
    pub window: f64,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self {
            eta_c: 0.17,
            snr: 6.25,
            dark_count_rate: 0.0,
            window: 25e-9,
        }
    }
}

impl ConversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_c) {
            return Err(Error::Config(format!(
                "conversion.eta_c must be in [0, 1], got {}",
                self.eta_c
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::Config(format!(
                "conversion.snr must be > 0, got {}",
                self.snr
            )));
        }
        if self.dark_count_rate < 0.0 {
            return Err(Error::Config(format!(
                "conversion.dark_count_rate must be >= 0, got {}",
                self.dark_count_rate
            )));
        }
        if self.window <= 0.0 {
            return Err(Error::Config(format!(
                "conversion.window must be > 0, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Which Kraus branch the conversion took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConversionOutcome {
    /// Photon survived; time-bin coherence preserved exactly.
    Survived,
    /// Photon lost from the early bin (which-bin record in the environment).
    LostEarly,
    /// Photon lost from the late bin.
    LostLate,
}

/// Kraus operators of the loss channel on the photonic mode: vacuum passes,
/// each bin survives with amplitude √η, and each bin leaks to vacuum with a
/// which-bin environment record.
pub fn loss_kraus(eta: f64) -> Vec<Operator> {
    let root_eta = C64::new(eta.sqrt(), 0.0);
    let root_loss = C64::new((1.0 - eta).sqrt(), 0.0);
    let mut keep = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
    keep[PHOTON_VACUUM * PHOTON_DIM + PHOTON_VACUUM] = C64::ONE;
    keep[PHOTON_EARLY * PHOTON_DIM + PHOTON_EARLY] = root_eta;
    keep[PHOTON_LATE * PHOTON_DIM + PHOTON_LATE] = root_eta;
    let mut lose_early = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
    lose_early[PHOTON_VACUUM * PHOTON_DIM + PHOTON_EARLY] = root_loss;
    let mut lose_late = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
    lose_late[PHOTON_VACUUM * PHOTON_DIM + PHOTON_LATE] = root_loss;
    vec![
        Operator::new(vec![PHOTON_DIM], keep).expect("3x3"),
        Operator::new(vec![PHOTON_DIM], lose_early).expect("3x3"),
        Operator::new(vec![PHOTON_DIM], lose_late).expect("3x3"),
    ]
}

fn embedded_loss_kraus(state: &DensityMatrix, eta: f64) -> Result<Vec<Operator>> {
    let photon_subsystem = state.dims().len() - 1;
    if state.dims()[photon_subsystem] != PHOTON_DIM {
        return Err(Error::DimensionMismatch(
            "state has no photonic mode in the last slot".into(),
        ));
    }
    loss_kraus(eta)
        .into_iter()
        .map(|k| k.embed(state.dims(), &[photon_subsystem]))
        .collect()
}

/// Sampled conversion of one attempt state (quantum trajectory).
pub fn convert<R: Rng + ?Sized>(
    state: &DensityMatrix,
    cfg: &ConversionConfig,
    rng: &mut R,
) -> Result<(DensityMatrix, ConversionOutcome)> {
    let kraus = embedded_loss_kraus(state, cfg.eta_c)?;
    let (branch, post, _p) = apply_kraus_sampled(state, &kraus, rng)?;
    let outcome = match branch {
        0 => ConversionOutcome::Survived,
        1 => ConversionOutcome::LostEarly,
        _ => ConversionOutcome::LostLate,
    };
    Ok((post, outcome))
}

/// Deterministic conversion channel (ensemble average of [`convert`]).
pub fn convert_channel(state: &DensityMatrix, cfg: &ConversionConfig) -> Result<DensityMatrix> {
    let kraus = embedded_loss_kraus(state, cfg.eta_c)?;
    apply_kraus_sum(state, &kraus)
}

/// A pump-induced noise click. The spin is untouched: conditioned on a noise
/// click it stays in whatever reduced state the attempt left it in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseClick {
    pub window: Window,
}

/// Sample a possible noise click for one attempt.
///
/// `signal_click_prob` is the expected per-attempt signal click probability;
/// the noise probability is anchored to it so the click ensemble mixes
/// signal and noise exactly in the configured SNR ratio. The bin is uniform:
/// pump-induced noise from a CW pump has no bin structure.
pub fn sample_noise_click<R: Rng + ?Sized>(
    cfg: &ConversionConfig,
    signal_click_prob: f64,
    rng: &mut R,
) -> Option<NoiseClick> {
    let p_noise = signal_click_prob / cfg.snr;
    if p_noise <= 0.0 {
        return None;
    }
    if !rng.random_bool(p_noise.min(1.0)) {
        return None;
    }
    let window = if rng.random_bool(0.5) {
        Window::Early
    } else {
        Window::Late
    };
    Some(NoiseClick { window })
}

/// Sample a possible detector dark click for one attempt spanning
/// `n_windows` detection windows.
pub fn sample_dark_click<R: Rng + ?Sized>(
    cfg: &ConversionConfig,
    n_windows: u32,
    rng: &mut R,
) -> Option<Window> {
    let p_dark = cfg.dark_count_rate * cfg.window * n_windows as f64;
    if p_dark <= 0.0 || !rng.random_bool(p_dark.min(1.0)) {
        return None;
    }
    let pick = rng.random_range(0..n_windows);
    Some(match (n_windows, pick) {
        (2, 0) => Window::Early,
        (2, _) => Window::Late,
        (_, 0) => Window::Early,
        (_, 1) => Window::Middle,
        _ => Window::Late,
    })
}

/// Maximum observable contrast for a perfectly correlated signal diluted by
/// spin-uncorrelated, bin-uniform noise: snr/(snr + 1).
pub fn max_contrast_from_snr(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::Config(format!("snr must be > 0, got {snr}")));
    }
    Ok(snr / (snr + 1.0))
}
