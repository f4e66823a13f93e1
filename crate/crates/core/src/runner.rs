//! Scenario execution: heralding loops, the per-second stabilization /
//! measurement scheduler, deterministic parallel fan-out, and report
//! assembly.
//!
//! Determinism layout: direct-detection scenarios give every heralding trial
//! its own ChaCha stream keyed by (seed, Trial, trial_id). Interferometer
//! scenarios give every duty cycle its own stream keyed by (seed, Cycle,
//! cycle_index); fringe calibrations draw from (seed, Calibration, epoch).
//! A cycle's incoming phase is recomputed from the previous cycle's first
//! few draws (lock residual and drift velocity), so whole cycles can be
//! farmed out to workers in any order and still reproduce the
//! single-threaded byte stream. This requires the full-gain servo, which
//! config validation enforces for interferometer scenarios.
//!
//! Event timestamps are schematic: attempts are paced on fixed slots and
//! only window-relative times carry physics (bin separation, emission
//! jitter). Rates per wall-clock second are not calibrated to hardware.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Scenario};
use crate::conversion::{
    convert, sample_dark_click, sample_noise_click, ConversionOutcome,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    measure_projective, ops, states, DensityMatrix, Operator, PHOTON_DIM, PHOTON_EARLY,
    PHOTON_LATE,
};
use crate::interferometer::{
    calibrate_fringe, evolve_phase, route_noise_photon, route_photon, stabilize, CyclePhase,
    FringeCalibration, PhasePlant, PhaseSample, PhaseTrace,
};
use crate::protocol::{charge_resonance_check, AttemptGenerator};
use crate::report::{CountSummary, PhaseSummary, RunOutput, RunReport, TimingSummary};
use crate::rng::{derive_seed, stream, StreamDomain};
use crate::tomography::{
    estimate, Basis, DetectionEvent, Detector, EventRecord, Origin, ReadoutBasis, Window,
};

/// Schematic pacing of direct-detection attempts (s per attempt slot).
pub const Z_ATTEMPT_PERIOD: f64 = 5e-6;
/// Schematic spacing between heralding trials in direct scenarios (s).
pub const Z_TRIAL_PERIOD: f64 = 50e-3;
/// Attempt slots inside each measurement window. Chosen so heralds spread
/// over many cycles and the lock-residual ensemble is well sampled.
pub const SLOTS_PER_CYCLE: u32 = 256;

const MAX_PROTOCOL_RESTARTS: u32 = 1_000;
const MAX_CR_CHECKS_PER_TRIAL: u64 = 1_000_000;
const MAX_CYCLES: u64 = 2_000_000;
/// Offset separating per-basis trial-id ranges in combined scenarios.
const BASIS_TRIAL_OFFSET: u64 = 1_000_000_000;

// ---------------------------------------------------------------------------
// Shared per-run machinery
// ---------------------------------------------------------------------------

/// Operators reused across every trial of a run.
struct RunContext {
    generator: AttemptGenerator,
    /// Photon-bin projectors embedded on the joint space (vac, early, late).
    bin_projectors: Vec<Operator>,
    readout: ReadoutProjectors,
    expected_signal_prob: f64,
    jitter: Exp<f64>,
}

impl RunContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let generator = AttemptGenerator::new(&cfg.protocol)?;
        let dims = states::spin_photon_dims();
        let bin_projectors = (0..PHOTON_DIM)
            .map(|b| ops::level_projector(PHOTON_DIM, b).embed(&dims, &[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            generator,
            bin_projectors,
            readout: ReadoutProjectors::new()?,
            expected_signal_prob: cfg.expected_signal_click_prob(),
            jitter: Exp::new(1.0 / cfg.protocol.lifetime).expect("positive lifetime"),
        })
    }
}

/// Spin projector pairs for each readout axis, embedded on the joint space.
/// Outcome 0 corresponds to the axis the readout pulse maps onto |0⟩.
struct ReadoutProjectors {
    z: [Operator; 2],
    plus_x: [Operator; 2],
    minus_x: [Operator; 2],
    plus_y: [Operator; 2],
    minus_y: [Operator; 2],
}

impl ReadoutProjectors {
    fn new() -> Result<Self> {
        let dims = states::spin_photon_dims();
        let pair = |phi: f64| -> Result<[Operator; 2]> {
            let fwd = Operator::projector(&states::spin_superposition(phi)).embed(&dims, &[0])?;
            let bwd = Operator::projector(&states::spin_superposition(phi + std::f64::consts::PI))
                .embed(&dims, &[0])?;
            Ok([fwd, bwd])
        };
        Ok(Self {
            z: [
                ops::level_projector(2, 0).embed(&dims, &[0])?,
                ops::level_projector(2, 1).embed(&dims, &[0])?,
            ],
            plus_x: pair(0.0)?,
            minus_x: pair(std::f64::consts::PI)?,
            plus_y: pair(std::f64::consts::FRAC_PI_2)?,
            minus_y: pair(-std::f64::consts::FRAC_PI_2)?,
        })
    }

    fn projectors(&self, readout: ReadoutBasis) -> &[Operator; 2] {
        match readout {
            ReadoutBasis::Z => &self.z,
            ReadoutBasis::PlusX => &self.plus_x,
            ReadoutBasis::MinusX => &self.minus_x,
            ReadoutBasis::PlusY => &self.plus_y,
            ReadoutBasis::MinusY => &self.minus_y,
        }
    }
}

/// Measure the spin along the readout axis and corrupt the outcome with the
/// readout confusion probabilities.
fn readout_spin<R: Rng + ?Sized>(
    state: &DensityMatrix,
    readout: ReadoutBasis,
    ctx: &RunContext,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> u8 {
    let projectors = ctx.readout.projectors(readout);
    let out = measure_projective(state, projectors.as_slice(), rng)
        .expect("readout projectors are complete");
    let truth = out.outcome as u8;
    match truth {
        0 => {
            if rng.random_bool(1.0 - cfg.tomography.f0) {
                1
            } else {
                0
            }
        }
        _ => {
            if rng.random_bool(1.0 - cfg.tomography.f1) {
                0
            } else {
                1
            }
        }
    }
}

/// Attempt/bookkeeping counters accumulated across a run.
#[derive(Debug, Default)]
pub struct WorkStats {
    pub attempts: u64,
    pub cr_checks: u64,
    pub restarts: u64,
}

// ---------------------------------------------------------------------------
// Direct-detection scenarios (red-zz, telecom-zz)
// ---------------------------------------------------------------------------

struct TrialOutput {
    records: Vec<EventRecord>,
    stats: WorkStats,
}

/// One heralding trial: charge gate, attempt rounds with restart after
/// `max_attempts`, conversion, and direct time-bin detection on D2.
fn run_direct_trial(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    trial_id: u64,
    rng: &mut ChaCha12Rng,
) -> Result<TrialOutput> {
    let uses_conversion = cfg.scenario.uses_conversion();
    let mut stats = WorkStats::default();
    let trial_start = trial_id as f64 * Z_TRIAL_PERIOD;
    let mut local_clock = 0u64;

    for _restart in 0..MAX_PROTOCOL_RESTARTS {
        while !charge_resonance_check(&cfg.protocol, rng) {
            stats.cr_checks += 1;
            local_clock += 1;
            if stats.cr_checks > MAX_CR_CHECKS_PER_TRIAL {
                return Err(Error::InsufficientSignal(format!(
                    "trial {trial_id}: charge gate never passed"
                )));
            }
        }
        stats.cr_checks += 1;
        local_clock += 1;

        for attempt in 1..=cfg.protocol.max_attempts {
            let outcome = ctx.generator.generate(attempt, trial_id, rng);
            stats.attempts += 1;
            local_clock += 1;
            let t_attempt = trial_start + local_clock as f64 * Z_ATTEMPT_PERIOD;

            // Signal chain: conversion then time-resolved detection.
            let mut signal: Option<(Window, f64)> = None;
            let mut spin_source = outcome.state.clone();
            if outcome.clicked {
                let survived = if uses_conversion {
                    let (post, conv) = convert(&outcome.state, &cfg.conversion, rng)?;
                    spin_source = post;
                    conv == ConversionOutcome::Survived
                } else {
                    true
                };
                if survived {
                    let measured =
                        measure_projective(&spin_source, &ctx.bin_projectors, rng)?;
                    let window = match measured.outcome {
                        PHOTON_EARLY => Window::Early,
                        PHOTON_LATE => Window::Late,
                        _ => unreachable!("clicked state has no vacuum weight"),
                    };
                    spin_source = measured.post_state;
                    let offset = if window == Window::Late {
                        cfg.protocol.bin_separation
                    } else {
                        0.0
                    };
                    signal = Some((window, t_attempt + offset + ctx.jitter.sample(rng)));
                }
            }

            // Pump-induced noise and detector dark counts exist only on the
            // converted path.
            let noise = if uses_conversion {
                sample_noise_click(&cfg.conversion, ctx.expected_signal_prob, rng).map(|c| {
                    let offset = if c.window == Window::Late {
                        cfg.protocol.bin_separation
                    } else {
                        0.0
                    };
                    (
                        c.window,
                        t_attempt + offset + rng.random::<f64>() * cfg.conversion.window,
                    )
                })
            } else {
                None
            };
            let dark = if uses_conversion {
                sample_dark_click(&cfg.conversion, 2, rng).map(|w| {
                    let offset = if w == Window::Late {
                        cfg.protocol.bin_separation
                    } else {
                        0.0
                    };
                    (
                        w,
                        t_attempt + offset + rng.random::<f64>() * cfg.conversion.window,
                    )
                })
            } else {
                None
            };

            if signal.is_none() && noise.is_none() && dark.is_none() {
                continue;
            }

            let spin_outcome = readout_spin(&spin_source, ReadoutBasis::Z, ctx, cfg, rng);
            let mut records = Vec::with_capacity(3);
            let mut push = |window: Window, origin: Origin, timestamp: f64| {
                records.push(EventRecord {
                    event: DetectionEvent {
                        trial_id,
                        detector: Detector::D2,
                        window,
                        origin,
                        timestamp,
                    },
                    readout: ReadoutBasis::Z,
                    spin_outcome,
                });
            };
            if let Some((w, t)) = signal {
                push(w, Origin::Signal, t);
            }
            if let Some((w, t)) = noise {
                push(w, Origin::Noise, t);
            }
            if let Some((w, t)) = dark {
                push(w, Origin::Dark, t);
            }
            return Ok(TrialOutput { records, stats });
        }
        stats.restarts += 1;
    }
    Err(Error::InsufficientSignal(format!(
        "trial {trial_id}: no detection within {MAX_PROTOCOL_RESTARTS} protocol restarts"
    )))
}

fn run_direct(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<EventRecord>, WorkStats)> {
    let ctx = RunContext::new(cfg)?;
    check_detectable(cfg, &ctx)?;
    let trial = |i: u64| -> Result<TrialOutput> {
        let mut rng = stream(seed, StreamDomain::Trial, i);
        run_direct_trial(cfg, &ctx, i, &mut rng)
    };
    let outputs: Vec<TrialOutput> = if cfg.parallel {
        (0..cfg.trials)
            .into_par_iter()
            .map(trial)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..cfg.trials).map(trial).collect::<Result<Vec<_>>>()?
    };
    let mut records = Vec::new();
    let mut stats = WorkStats::default();
    for out in outputs {
        records.extend(out.records);
        stats.attempts += out.stats.attempts;
        stats.cr_checks += out.stats.cr_checks;
        stats.restarts += out.stats.restarts;
    }
    Ok((records, stats))
}

fn check_detectable(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    let p_signal = ctx.expected_signal_prob;
    let p_noise = if cfg.scenario.uses_conversion() {
        p_signal / cfg.conversion.snr
    } else {
        0.0
    };
    let p_dark = if cfg.scenario.uses_conversion() {
        cfg.conversion.dark_count_rate * cfg.conversion.window
    } else {
        0.0
    };
    if p_signal + p_noise + p_dark <= 0.0 {
        return Err(Error::InsufficientSignal(
            "no detection channel has positive probability (check p_emit_collect, eta_c, snr, dark_count_rate)"
                .into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Interferometer scenarios (telecom-x, telecom-y)
// ---------------------------------------------------------------------------

fn axis_readout(basis: Basis, plus: bool) -> ReadoutBasis {
    match (basis, plus) {
        (Basis::X, true) => ReadoutBasis::PlusX,
        (Basis::X, false) => ReadoutBasis::MinusX,
        (Basis::Y, true) => ReadoutBasis::PlusY,
        (Basis::Y, false) => ReadoutBasis::MinusY,
        (Basis::Z, _) => ReadoutBasis::Z,
    }
}

/// Fringe calibration in force during `cycle`, reproducible by any worker.
fn calibration_for_cycle(
    cfg: &ExperimentConfig,
    seed: u64,
    cycle: u64,
) -> (FringeCalibration, u64) {
    let icfg = &cfg.interferometer;
    let epoch_len = (icfg.fringe_calibration_interval / icfg.cycle_period)
        .round()
        .max(1.0) as u64;
    let epoch = cycle / epoch_len;
    let epoch_time = (epoch * epoch_len) as f64 * icfg.cycle_period;
    let mut rng = stream(seed, StreamDomain::Calibration, epoch);
    (calibrate_fringe(icfg, epoch_time, &mut rng), epoch)
}

/// Phase at the end of a cycle's free run, recomputed from that cycle's
/// leading draws (valid at full servo gain, which validation guarantees).
fn cycle_end_phase(cfg: &ExperimentConfig, seed: u64, cycle: u64) -> f64 {
    let icfg = &cfg.interferometer;
    let (mut cal, _) = calibration_for_cycle(cfg, seed, cycle);
    let mut rng = stream(seed, StreamDomain::Cycle, cycle);
    let mut plant = PhasePlant::new(icfg.lock_target());
    let now = cycle as f64 * icfg.cycle_period;
    let _ = stabilize(&mut plant, icfg, &mut cal, now, &mut rng);
    evolve_phase(&mut plant, icfg, icfg.free_run_duration(), &mut rng);
    plant.delta_phi
}

struct CycleOutput {
    cycle: u64,
    /// Records grouped per herald, in slot order.
    heralds: Vec<Vec<EventRecord>>,
    post_lock: PhaseSample,
    pre_lock: PhaseSample,
    lock_failed: bool,
    stats: WorkStats,
}

fn run_cycle(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    seed: u64,
    basis: Basis,
    cycle: u64,
) -> Result<CycleOutput> {
    let icfg = &cfg.interferometer;
    let (mut cal, _) = calibration_for_cycle(cfg, seed, cycle);
    let mut rng = stream(seed, StreamDomain::Cycle, cycle);
    let cycle_start = cycle as f64 * icfg.cycle_period;

    let incoming = if cycle == 0 {
        icfg.lock_target()
    } else {
        cycle_end_phase(cfg, seed, cycle - 1)
    };
    let mut plant = PhasePlant::new(incoming);
    let lock = stabilize(&mut plant, icfg, &mut cal, cycle_start, &mut rng);
    let post_lock = PhaseSample {
        time: cycle_start + icfg.lock_duration,
        delta_phi: plant.delta_phi,
        phase_of_cycle: CyclePhase::PostLock,
    };

    let mut output = CycleOutput {
        cycle,
        heralds: Vec::new(),
        post_lock,
        pre_lock: PhaseSample {
            time: (cycle + 1) as f64 * icfg.cycle_period,
            delta_phi: plant.delta_phi,
            phase_of_cycle: CyclePhase::PreLock,
        },
        lock_failed: !lock.success,
        stats: WorkStats::default(),
    };
    if !lock.success {
        // No usable lock: skip the measurement window, free-run the plant
        // so the trace still shows the drift.
        evolve_phase(&mut plant, icfg, icfg.free_run_duration(), &mut rng);
        output.pre_lock.delta_phi = plant.delta_phi;
        return Ok(output);
    }

    let slot_len = icfg.free_run_duration() / SLOTS_PER_CYCLE as f64;
    let mut cr_passed = false;
    let mut attempt_in_round = 0u32;
    for slot in 0..SLOTS_PER_CYCLE {
        evolve_phase(&mut plant, icfg, slot_len, &mut rng);
        let t_slot = cycle_start + icfg.lock_duration + (slot as f64 + 1.0) * slot_len;

        if !cr_passed {
            output.stats.cr_checks += 1;
            if charge_resonance_check(&cfg.protocol, &mut rng) {
                cr_passed = true;
                attempt_in_round = 0;
            }
            continue;
        }

        attempt_in_round += 1;
        output.stats.attempts += 1;
        let trial_id = cycle * 10_000 + output.heralds.len() as u64;
        let outcome = ctx.generator.generate(attempt_in_round, trial_id, &mut rng);

        let mut signal: Option<(Window, Detector, f64)> = None;
        let mut spin_source = outcome.state.clone();
        if outcome.clicked {
            let (post, conv) = convert(&outcome.state, &cfg.conversion, &mut rng)?;
            spin_source = post;
            if conv == ConversionOutcome::Survived {
                let routed = route_photon(&spin_source, plant.delta_phi, &mut rng)?;
                let offset = window_offset(routed.window, cfg.protocol.bin_separation);
                signal = Some((
                    routed.window,
                    routed.detector,
                    t_slot + offset + ctx.jitter.sample(&mut rng),
                ));
                spin_source = routed.post_state;
            }
        }
        let noise = sample_noise_click(&cfg.conversion, ctx.expected_signal_prob, &mut rng)
            .map(|_| {
                let (window, detector) = route_noise_photon(&mut rng);
                let offset = window_offset(window, cfg.protocol.bin_separation);
                (
                    window,
                    detector,
                    t_slot + offset + rng.random::<f64>() * cfg.conversion.window,
                )
            });
        let dark = sample_dark_click(&cfg.conversion, 3, &mut rng).map(|window| {
            let detector = if rng.random_bool(0.5) {
                Detector::D3
            } else {
                Detector::D4
            };
            let offset = window_offset(window, cfg.protocol.bin_separation);
            (
                window,
                detector,
                t_slot + offset + rng.random::<f64>() * cfg.conversion.window,
            )
        });

        if signal.is_none() && noise.is_none() && dark.is_none() {
            if attempt_in_round >= cfg.protocol.max_attempts {
                cr_passed = false;
                output.stats.restarts += 1;
            }
            continue;
        }

        // Readout basis: a middle-window click is read along the scenario
        // axis (alternating sign per herald); side-window-only heralds are
        // read in Z since the arrival time already singled out a bin.
        let has_middle = [&signal, &noise, &dark]
            .into_iter()
            .flatten()
            .any(|(w, _, _)| *w == Window::Middle);
        let readout = if has_middle {
            let plus = (cycle + output.heralds.len() as u64) % 2 == 0;
            axis_readout(basis, plus)
        } else {
            ReadoutBasis::Z
        };
        let spin_outcome = readout_spin(&spin_source, readout, ctx, cfg, &mut rng);

        let mut records = Vec::with_capacity(3);
        let mut push = |window: Window, detector: Detector, origin: Origin, timestamp: f64| {
            records.push(EventRecord {
                event: DetectionEvent {
                    trial_id,
                    detector,
                    window,
                    origin,
                    timestamp,
                },
                readout,
                spin_outcome,
            });
        };
        if let Some((w, d, t)) = signal {
            push(w, d, Origin::Signal, t);
        }
        if let Some((w, d, t)) = noise {
            push(w, d, Origin::Noise, t);
        }
        if let Some((w, d, t)) = dark {
            push(w, d, Origin::Dark, t);
        }
        output.heralds.push(records);
        cr_passed = false;
    }
    output.pre_lock.delta_phi = plant.delta_phi;
    Ok(output)
}

fn window_offset(window: Window, bin_separation: f64) -> f64 {
    match window {
        Window::Early => 0.0,
        Window::Middle => bin_separation,
        Window::Late => 2.0 * bin_separation,
    }
}

struct InterferometerRun {
    records: Vec<EventRecord>,
    trace: PhaseTrace,
    stats: WorkStats,
    cycles: u64,
    lock_failures: u64,
    fringe_calibrations: u64,
}

fn run_interferometer(
    cfg: &ExperimentConfig,
    seed: u64,
    basis: Basis,
) -> Result<InterferometerRun> {
    if cfg.interferometer.lock_gain < 1.0 {
        return Err(Error::Config(
            "interferometer scenarios require interferometer.lock_gain = 1.0 \
             (partial gain couples cycles and breaks parallel reproducibility)"
                .into(),
        ));
    }
    let ctx = RunContext::new(cfg)?;
    check_detectable(cfg, &ctx)?;

    let batch_size: u64 = if cfg.parallel {
        (rayon::current_num_threads() as u64 * 4).max(8)
    } else {
        8
    };
    let mut outputs: Vec<CycleOutput> = Vec::new();
    let mut heralds_total = 0u64;
    let mut next_cycle = 0u64;
    while heralds_total < cfg.trials {
        if next_cycle >= MAX_CYCLES {
            return Err(Error::InsufficientSignal(format!(
                "only {heralds_total} of {} heralds after {MAX_CYCLES} cycles",
                cfg.trials
            )));
        }
        let end = (next_cycle + batch_size).min(MAX_CYCLES);
        let run_one = |c: u64| run_cycle(cfg, &ctx, seed, basis, c);
        let batch: Vec<CycleOutput> = if cfg.parallel {
            (next_cycle..end)
                .into_par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>>>()?
        } else {
            (next_cycle..end).map(run_one).collect::<Result<Vec<_>>>()?
        };
        for out in &batch {
            heralds_total += out.heralds.len() as u64;
        }
        outputs.extend(batch);
        next_cycle = end;
    }

    // Aggregate cycles in index order, truncating at exactly `trials`
    // heralds; the cutoff cycle is data-determined, so any batch size and
    // any execution order agree byte for byte.
    let mut run = InterferometerRun {
        records: Vec::new(),
        trace: PhaseTrace::default(),
        stats: WorkStats::default(),
        cycles: 0,
        lock_failures: 0,
        fringe_calibrations: 0,
    };
    let mut kept = 0u64;
    let mut epochs_seen = std::collections::BTreeSet::new();
    for out in &outputs {
        if kept >= cfg.trials {
            break;
        }
        run.cycles += 1;
        let (_, epoch) = calibration_for_cycle(cfg, seed, out.cycle);
        epochs_seen.insert(epoch);
        if out.lock_failed {
            run.lock_failures += 1;
        }
        run.trace.push(out.post_lock);
        run.trace.push(out.pre_lock);
        run.stats.attempts += out.stats.attempts;
        run.stats.cr_checks += out.stats.cr_checks;
        run.stats.restarts += out.stats.restarts;
        for herald in &out.heralds {
            if kept >= cfg.trials {
                break;
            }
            run.records.extend(herald.iter().cloned());
            kept += 1;
        }
    }
    run.fringe_calibrations = epochs_seen.len() as u64;
    Ok(run)
}

// ---------------------------------------------------------------------------
// Top-level scenario dispatch
// ---------------------------------------------------------------------------

/// Execute a configured scenario and assemble the report.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let (records, stats, trace, cycles, lock_failures, calibrations) = match cfg.scenario {
        Scenario::RedZz | Scenario::TelecomZz => {
            let (records, stats) = run_direct(cfg, cfg.seed)?;
            (records, stats, None, 0, 0, 0)
        }
        Scenario::TelecomX | Scenario::TelecomY => {
            let basis = if cfg.scenario == Scenario::TelecomX {
                Basis::X
            } else {
                Basis::Y
            };
            let run = run_interferometer(cfg, cfg.seed, basis)?;
            (
                run.records,
                run.stats,
                Some(run.trace),
                run.cycles,
                run.lock_failures,
                run.fringe_calibrations,
            )
        }
        Scenario::NoiseBudget => {
            let mut records = Vec::new();
            let mut stats = WorkStats::default();
            let mut cycles = 0;
            let mut lock_failures = 0;
            let mut calibrations = 0;

            let mut z_cfg = cfg.clone();
            z_cfg.scenario = Scenario::TelecomZz;
            let z_seed = derive_seed(cfg.seed, StreamDomain::BasisRun, 0);
            let (z_records, z_stats) = run_direct(&z_cfg, z_seed)?;
            records.extend(z_records);
            stats.attempts += z_stats.attempts;
            stats.cr_checks += z_stats.cr_checks;
            stats.restarts += z_stats.restarts;

            for (i, basis) in [(1u64, Basis::X), (2u64, Basis::Y)] {
                let mut sub_cfg = cfg.clone();
                sub_cfg.scenario = if basis == Basis::X {
                    Scenario::TelecomX
                } else {
                    Scenario::TelecomY
                };
                sub_cfg.interferometer.setpoint = if basis == Basis::X {
                    std::f64::consts::FRAC_PI_4
                } else {
                    3.0 * std::f64::consts::FRAC_PI_4
                };
                sub_cfg.interferometer.drift_rate = cfg.interferometer.drift_rate;
                let sub_seed = derive_seed(cfg.seed, StreamDomain::BasisRun, i);
                let run = run_interferometer(&sub_cfg, sub_seed, basis)?;
                records.extend(run.records.into_iter().map(|mut r| {
                    r.event.trial_id += i * BASIS_TRIAL_OFFSET;
                    r
                }));
                stats.attempts += run.stats.attempts;
                stats.cr_checks += run.stats.cr_checks;
                stats.restarts += run.stats.restarts;
                cycles += run.cycles;
                lock_failures += run.lock_failures;
                calibrations += run.fringe_calibrations;
            }
            (records, stats, None, cycles, lock_failures, calibrations)
        }
    };

    let tomography = estimate(&records, &cfg.tomography)?;
    let counts = CountSummary::tally(&records, &stats);
    let phase = trace.as_ref().map(|t| PhaseSummary {
        cycles,
        lock_failures,
        fringe_calibrations: calibrations,
        pre_lock_mean: phase_moment(t, CyclePhase::PreLock, cfg, true),
        pre_lock_std: phase_moment(t, CyclePhase::PreLock, cfg, false),
        post_lock_mean: phase_moment(t, CyclePhase::PostLock, cfg, true),
        post_lock_std: phase_moment(t, CyclePhase::PostLock, cfg, false),
    });
    let report = RunReport {
        scenario: cfg.scenario,
        seed: cfg.seed,
        trials: cfg.trials,
        parallel: cfg.parallel,
        config: cfg.clone(),
        tomography,
        counts,
        timing: TimingSummary {
            cycle_period: cfg.interferometer.cycle_period,
            lock_duration: cfg.interferometer.lock_duration,
            measurement_window: cfg.interferometer.cycle_period
                - cfg.interferometer.lock_duration,
            cycles,
        },
        phase,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        report,
        records,
        phase_trace: trace,
    })
}

fn phase_moment(
    trace: &PhaseTrace,
    which: CyclePhase,
    cfg: &ExperimentConfig,
    want_mean: bool,
) -> f64 {
    let target = cfg.interferometer.lock_target();
    let residuals: Vec<f64> = trace
        .samples
        .iter()
        .filter(|s| s.phase_of_cycle == which)
        .map(|s| s.delta_phi - target)
        .collect();
    if want_mean {
        crate::stats::mean(&residuals)
    } else {
        crate::stats::std_dev(&residuals)
    }
}

/// Run the stabilization scheduler without taking data, emitting the phase
/// trace for the requested number of cycles.
pub fn run_phase_trace(cfg: &ExperimentConfig, cycles: u64) -> Result<PhaseTrace> {
    cfg.validate()?;
    if !cfg.scenario.uses_interferometer() {
        return Err(Error::Config(format!(
            "scenario {} has no interferometer; use telecom-x or telecom-y",
            cfg.scenario
        )));
    }
    let icfg = &cfg.interferometer;
    let mut trace = PhaseTrace::default();
    for cycle in 0..cycles {
        let (mut cal, _) = calibration_for_cycle(cfg, cfg.seed, cycle);
        let mut rng = stream(cfg.seed, StreamDomain::Cycle, cycle);
        let incoming = if cycle == 0 {
            icfg.lock_target()
        } else {
            cycle_end_phase(cfg, cfg.seed, cycle - 1)
        };
        let mut plant = PhasePlant::new(incoming);
        let now = cycle as f64 * icfg.cycle_period;
        let _ = stabilize(&mut plant, icfg, &mut cal, now, &mut rng);
        trace.push(PhaseSample {
            time: now + icfg.lock_duration,
            delta_phi: plant.delta_phi,
            phase_of_cycle: CyclePhase::PostLock,
        });
        evolve_phase(&mut plant, icfg, icfg.free_run_duration(), &mut rng);
        trace.push(PhaseSample {
            time: (cycle + 1) as f64 * icfg.cycle_period,
            delta_phi: plant.delta_phi,
            phase_of_cycle: CyclePhase::PreLock,
        });
    }
    Ok(trace)
}

/// One sweep point: the varied parameter value and its run output.
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub output: RunOutput,
}

/// Run the scenario once per value of the swept parameter, each point with a
/// seed derived from the base seed.
pub fn sweep(base: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.set_numeric(parameter, value)?;
        cfg.seed = derive_seed(base.seed, StreamDomain::SweepPoint, i as u64);
        cfg.validate()?;
        let output = run_scenario(&cfg)?;
        rows.push(SweepRow {
            parameter: parameter.to_string(),
            value,
            output,
        });
    }
    Ok(rows)
}
