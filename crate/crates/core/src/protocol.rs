//! Entangling-attempt state machine.
//!
//! One attempt: prepare the spin in a balanced superposition with a π/2
//! pulse, apply a spin-selective optical π-pulse that excites |0⟩ (early-bin
//! emission), flip the spin, excite again (late-bin emission). With a photon
//! collected into the fiber the joint state is the Bell state
//! (|1,E⟩ + |0,L⟩)/√2; without one the spin is left in a balanced product
//! state. Modeled imperfections:
//!
//! - a random phase e^{i·2π·δν·T} on the late term, δν drawn per attempt from
//!   the combined spectral-diffusion / laser-lock frequency jitter;
//! - double excitation during either optical pulse, which fully dephases that
//!   emission branch (a pinching on the corresponding bin).
//!
//! Rotation conventions: the π/2 preparation rotates about +Y so amplitudes
//! stay real, and the inter-pulse flip is the X gate. Only
//! convention-independent quantities (probabilities, contrasts) are asserted
//! downstream.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    apply_unitary_vec, measure_projective, ops, pinch, states, C64, DensityMatrix, Operator,
    StateVector, PHOTON_DIM, PHOTON_EARLY, PHOTON_LATE, PHOTON_VACUUM,
};

/// Physical parameters of the entangling sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Probability that the charge/resonance pre-check passes.
    pub p_cr_pass: f64,
    /// Combined emission + collection probability into the conversion path,
    /// per optical π-pulse.
    pub p_emit_collect: f64,
    /// Double-excitation probability per optical π-pulse.
    pub p_reexc: f64,
    /// Spectral diffusion frequency std (Hz).
    pub spectral_diffusion_sigma: f64,
    /// Frequency jitter of the locked lasers (Hz).
    pub laser_lock_sigma: f64,
    /// Separation of the early and late bins (s).
    pub bin_separation: f64,
    /// Excited-state lifetime (s); sets detection-time jitter inside a bin.
    pub lifetime: f64,
    /// Attempts before the protocol restarts from the charge check.
    pub max_attempts: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            p_cr_pass: 0.9,
            p_emit_collect: 1.0,
            p_reexc: 0.0,
            spectral_diffusion_sigma: 0.0,
            laser_lock_sigma: 200e3,
            bin_separation: 190e-9,
            lifetime: 12e-9,
            max_attempts: 250,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("protocol.p_cr_pass", self.p_cr_pass),
            ("protocol.p_emit_collect", self.p_emit_collect),
            ("protocol.p_reexc", self.p_reexc),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("protocol.spectral_diffusion_sigma", self.spectral_diffusion_sigma),
            ("protocol.laser_lock_sigma", self.laser_lock_sigma),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("protocol.bin_separation", self.bin_separation),
            ("protocol.lifetime", self.lifetime),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("protocol.max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    /// Std of the per-attempt frequency detuning (Hz).
    pub fn total_frequency_sigma(&self) -> f64 {
        (self.spectral_diffusion_sigma.powi(2) + self.laser_lock_sigma.powi(2)).sqrt()
    }

    /// Ensemble-averaged coherence of the clicked state relative to the
    /// ideal Bell state: the Gaussian phase average e^{-(2πσT)²/2} times the
    /// probability (1-p_reexc)² that neither pulse double-excited.
    pub fn ensemble_visibility(&self) -> f64 {
        let phase_std =
            2.0 * std::f64::consts::PI * self.total_frequency_sigma() * self.bin_separation;
        (1.0 - self.p_reexc).powi(2) * (-phase_std * phase_std / 2.0).exp()
    }
}

/// Result of one entangling attempt, before conversion.
#[derive(Debug, Clone)]
pub struct AttemptOutcome {
    /// Whether a photon was collected into the conversion fiber.
    pub clicked: bool,
    /// Joint spin ⊗ photonic-mode state conditioned on `clicked`.
    pub state: DensityMatrix,
    /// 1-based attempt index within the current protocol round.
    pub attempt_index: u32,
    pub trial_id: u64,
}

/// Bernoulli charge/resonance gate; a failing check is simply repeated by
/// the runner.
pub fn charge_resonance_check<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> bool {
    if cfg.p_cr_pass >= 1.0 {
        return true;
    }
    if cfg.p_cr_pass <= 0.0 {
        return false;
    }
    rng.random_bool(cfg.p_cr_pass)
}

/// Controlled emission pulse: when the spin is |0⟩, move vacuum amplitude
/// into `bin` with amplitude √p (no-emission amplitude √(1-p) stays in
/// vacuum); the |1⟩ sector is untouched.
fn emission_pulse(bin: usize, p: f64) -> Operator {
    let root_p = p.sqrt();
    let root_q = (1.0 - p).sqrt();
    let mut g = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
    for i in 0..PHOTON_DIM {
        g[i * PHOTON_DIM + i] = C64::ONE;
    }
    g[PHOTON_VACUUM * PHOTON_DIM + PHOTON_VACUUM] = C64::new(root_q, 0.0);
    g[bin * PHOTON_DIM + PHOTON_VACUUM] = C64::new(root_p, 0.0);
    g[PHOTON_VACUUM * PHOTON_DIM + bin] = C64::new(-root_p, 0.0);
    g[bin * PHOTON_DIM + bin] = C64::new(root_q, 0.0);
    let g = Operator::new(vec![PHOTON_DIM], g).expect("3x3");
    let p0 = ops::level_projector(2, 0);
    let p1 = ops::level_projector(2, 1);
    p0.tensor(&g)
        .add(&p1.tensor(&Operator::identity(&[PHOTON_DIM])))
        .expect("6x6")
}

/// Precomputed pulse sequence for a fixed configuration.
pub struct AttemptGenerator {
    cfg: ProtocolConfig,
    /// Pure joint state after both optical pulses, before phase noise.
    base_state: StateVector,
    detuning: Option<Normal<f64>>,
    proj_vacuum: Operator,
    proj_photon: Operator,
    pinch_early: [Operator; 2],
    pinch_late: [Operator; 2],
}

impl AttemptGenerator {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = states::spin_photon_dims();
        let mut state = states::spin_zero().tensor(&states::photon_vacuum());
        apply_unitary_vec(&mut state, &ops::rot_y(std::f64::consts::FRAC_PI_2), &[0])?;
        apply_unitary_vec(
            &mut state,
            &emission_pulse(PHOTON_EARLY, cfg.p_emit_collect),
            &[0, 1],
        )?;
        apply_unitary_vec(&mut state, &ops::pauli_x(), &[0])?;
        apply_unitary_vec(
            &mut state,
            &emission_pulse(PHOTON_LATE, cfg.p_emit_collect),
            &[0, 1],
        )?;

        let sigma = cfg.total_frequency_sigma();
        let detuning = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).expect("valid sigma"))
        } else {
            None
        };

        let proj_vacuum = ops::level_projector(PHOTON_DIM, PHOTON_VACUUM).embed(&dims, &[1])?;
        let proj_photon = ops::level_projector(PHOTON_DIM, PHOTON_EARLY)
            .add(&ops::level_projector(PHOTON_DIM, PHOTON_LATE))?
            .embed(&dims, &[1])?;
        let make_pinch = |bin: usize| -> Result<[Operator; 2]> {
            let p = ops::level_projector(PHOTON_DIM, bin).embed(&dims, &[1])?;
            let q = Operator::identity(&dims).add(&p.scale(-C64::ONE))?;
            Ok([p, q])
        };

        Ok(Self {
            cfg: cfg.clone(),
            base_state: state,
            detuning,
            proj_vacuum,
            proj_photon,
            pinch_early: make_pinch(PHOTON_EARLY)?,
            pinch_late: make_pinch(PHOTON_LATE)?,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    /// Run one attempt: sample the phase noise and double-excitation
    /// branches, then condition on whether a photon entered the fiber.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        attempt_index: u32,
        trial_id: u64,
        rng: &mut R,
    ) -> AttemptOutcome {
        let mut state = self.base_state.clone();
        if let Some(detuning) = &self.detuning {
            let delta_nu = detuning.sample(rng);
            let phi = 2.0 * std::f64::consts::PI * delta_nu * self.cfg.bin_separation;
            apply_unitary_vec(&mut state, &ops::photon_late_phase(phi), &[1])
                .expect("cached dims match");
        }
        let mut rho = state.to_density_matrix();
        if self.cfg.p_reexc > 0.0 {
            if rng.random_bool(self.cfg.p_reexc) {
                rho = pinch(&rho, &self.pinch_early).expect("cached pinch");
            }
            if rng.random_bool(self.cfg.p_reexc) {
                rho = pinch(&rho, &self.pinch_late).expect("cached pinch");
            }
        }
        let outcome = measure_projective(
            &rho,
            &[self.proj_vacuum.clone(), self.proj_photon.clone()],
            rng,
        )
        .expect("cached projectors are complete");
        AttemptOutcome {
            clicked: outcome.outcome == 1,
            state: outcome.post_state,
            attempt_index,
            trial_id,
        }
    }

    /// Ensemble-averaged clicked state: the Bell state with its coherence
    /// scaled by [`ProtocolConfig::ensemble_visibility`].
    pub fn clicked_state_ensemble(&self) -> DensityMatrix {
        states::dephased_bell_state(self.cfg.ensemble_visibility())
    }

    /// Spin state of an attempt whose photon never entered the fiber: the
    /// balanced superposition survives because no which-path record exists.
    pub fn unclicked_spin(&self) -> DensityMatrix {
        states::spin_superposition(0.0).to_density_matrix()
    }
}

/// Result of running attempts until the caller's detector fires.
#[derive(Debug, Clone)]
pub enum LoopOutcome<T> {
    Detected { attempt_index: u32, value: T },
    Exhausted { attempts: u32 },
}

impl<T> LoopOutcome<T> {
    pub fn is_detected(&self) -> bool {
        matches!(self, LoopOutcome::Detected { .. })
    }
}

/// Repeat entangling attempts up to `max_attempts`, handing each outcome to
/// the caller's detection chain (conversion, routing, noise). Returns the
/// first detected attempt or the exhausted marker that restarts the protocol.
pub fn run_attempt_loop<R, T, F>(
    generator: &AttemptGenerator,
    trial_id: u64,
    rng: &mut R,
    mut detect: F,
) -> LoopOutcome<T>
where
    R: Rng + ?Sized,
    F: FnMut(AttemptOutcome, &mut R) -> Option<T>,
{
    let max = generator.cfg.max_attempts;
    for attempt in 1..=max {
        let outcome = generator.generate(attempt, trial_id, rng);
        if let Some(value) = detect(outcome, rng) {
            return LoopOutcome::Detected {
                attempt_index: attempt,
                value,
            };
        }
    }
    LoopOutcome::Exhausted { attempts: max }
}
