//! Event accumulation, readout/dark-count corrections, contrasts, and the
//! three-contrast entangled-state fidelity estimate with binomial errors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Event vocabulary
// ---------------------------------------------------------------------------

/// Detector channels. D1 reads the spin out optically; D2 is the direct
/// time-bin detector; D3/D4 are the two interferometer outputs (only D3 is
/// analyzed — D4 recovers too slowly after the stabilization light).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    D1,
    D2,
    D3,
    D4,
}

/// Arrival window. Direct detection uses Early/Late; behind the
/// interferometer the side windows Early/Late carry time-bin (Z-like)
/// information while Middle carries the interference signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Early,
    Middle,
    Late,
}

/// Ground-truth click origin. Hidden from estimators; only oracle tests and
/// report bookkeeping may look at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Signal,
    Noise,
    Dark,
}

/// Correlation basis of a measurement setting (matched spin/photon bases).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

/// Axis the spin readout pulse mapped onto |0⟩ before optical readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutBasis {
    Z,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl ReadoutBasis {
    pub fn basis(self) -> Basis {
        match self {
            ReadoutBasis::Z => Basis::Z,
            ReadoutBasis::PlusX | ReadoutBasis::MinusX => Basis::X,
            ReadoutBasis::PlusY | ReadoutBasis::MinusY => Basis::Y,
        }
    }

    /// True for the readout aligned with the expected correlation axis.
    pub fn is_plus(self) -> bool {
        !matches!(self, ReadoutBasis::MinusX | ReadoutBasis::MinusY)
    }
}

impl fmt::Display for ReadoutBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReadoutBasis::Z => "z",
            ReadoutBasis::PlusX => "x",
            ReadoutBasis::MinusX => "-x",
            ReadoutBasis::PlusY => "y",
            ReadoutBasis::MinusY => "-y",
        };
        f.write_str(s)
    }
}

impl FromStr for ReadoutBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" => Ok(ReadoutBasis::Z),
            "x" => Ok(ReadoutBasis::PlusX),
            "-x" => Ok(ReadoutBasis::MinusX),
            "y" => Ok(ReadoutBasis::PlusY),
            "-y" => Ok(ReadoutBasis::MinusY),
            other => Err(Error::Parse(format!("unknown readout basis '{other}'"))),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Detector::D1 => "D1",
            Detector::D2 => "D2",
            Detector::D3 => "D3",
            Detector::D4 => "D4",
        };
        f.write_str(s)
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D1" => Ok(Detector::D1),
            "D2" => Ok(Detector::D2),
            "D3" => Ok(Detector::D3),
            "D4" => Ok(Detector::D4),
            other => Err(Error::Parse(format!("unknown detector '{other}'"))),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Window::Early => "early",
            Window::Middle => "middle",
            Window::Late => "late",
        };
        f.write_str(s)
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(Window::Early),
            "middle" => Ok(Window::Middle),
            "late" => Ok(Window::Late),
            other => Err(Error::Parse(format!("unknown window '{other}'"))),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Origin::Signal => "signal",
            Origin::Noise => "noise",
            Origin::Dark => "dark",
        };
        f.write_str(s)
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" => Ok(Origin::Signal),
            "noise" => Ok(Origin::Noise),
            "dark" => Ok(Origin::Dark),
            other => Err(Error::Parse(format!("unknown origin '{other}'"))),
        }
    }
}

/// One time-tagged detector click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub trial_id: u64,
    pub detector: Detector,
    pub window: Window,
    pub origin: Origin,
    pub timestamp: f64,
}

/// A detection event joined with the spin readout of its trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: DetectionEvent,
    pub readout: ReadoutBasis,
    /// Reported spin outcome after readout corruption (0 or 1).
    pub spin_outcome: u8,
}

// ---------------------------------------------------------------------------
// Corrections
// ---------------------------------------------------------------------------

/// Analysis-side calibration: spin-readout fidelities and the expected dark
/// fraction per analyzed window, both determined independently of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Probability that a true |0⟩ is read out as 0.
    pub f0: f64,
    /// Probability that a true |1⟩ is read out as 1.
    pub f1: f64,
    /// Expected fraction of clicks in each analyzed window that are dark.
    pub dark_fraction: f64,
    /// Repurpose interferometer side-window clicks as Z-basis data instead
    /// of discarding them.
    pub side_windows_as_z: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            f0: 0.97,
            f1: 0.97,
            dark_fraction: 0.0,
            side_windows_as_z: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("tomography.f0", self.f0), ("tomography.f1", self.f1)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {f}")));
            }
        }
        if self.f0 + self.f1 <= 1.0 {
            return Err(Error::SingularCorrection {
                f0: self.f0,
                f1: self.f1,
            });
        }
        if !(0.0..1.0).contains(&self.dark_fraction) {
            return Err(Error::Config(format!(
                "tomography.dark_fraction must be in [0, 1), got {}",
                self.dark_fraction
            )));
        }
        Ok(())
    }
}

/// A corrected probability with its propagated standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedProbability {
    pub p: f64,
    pub std: f64,
    /// Set when the correction pushed the value outside [0, 1].
    pub clamped: bool,
}

/// Invert the 2x2 readout confusion matrix [[f0, 1-f1], [1-f0, f1]] on raw
/// counts (n0, n1), propagating the binomial error through the inversion.
pub fn correct_readout(n0: u64, n1: u64, f0: f64, f1: f64) -> Result<CorrectedProbability> {
    if f0 + f1 <= 1.0 {
        return Err(Error::SingularCorrection { f0, f1 });
    }
    let n = n0 + n1;
    if n == 0 {
        return Err(Error::InsufficientSignal("no counts to correct".into()));
    }
    let n_f = n as f64;
    let p_meas = n0 as f64 / n_f;
    // Laplace-smoothed binomial error so degenerate cells keep a finite std.
    let p_smooth = (n0 as f64 + 1.0) / (n_f + 2.0);
    let sigma_meas = (p_smooth * (1.0 - p_smooth) / n_f).sqrt();
    let det = f0 + f1 - 1.0;
    let p_true = (p_meas - (1.0 - f1)) / det;
    let sigma_true = sigma_meas / det;
    let clamped = !(0.0..=1.0).contains(&p_true);
    Ok(CorrectedProbability {
        p: p_true.clamp(0.0, 1.0),
        std: sigma_true,
        clamped,
    })
}

/// Remove the expected spin-uncorrelated dark contribution from a corrected
/// window probability and renormalize: p → (p − d/2) / (1 − d).
pub fn correct_dark_counts(value: CorrectedProbability, dark_fraction: f64) -> Result<CorrectedProbability> {
    if !(0.0..1.0).contains(&dark_fraction) {
        return Err(Error::Config(format!(
            "dark fraction must be in [0, 1), got {dark_fraction}"
        )));
    }
    if dark_fraction == 0.0 {
        return Ok(value);
    }
    let d = dark_fraction;
    let p = (value.p - d / 2.0) / (1.0 - d);
    let std = value.std / (1.0 - d);
    let clamped = value.clamped || !(0.0..=1.0).contains(&p);
    Ok(CorrectedProbability {
        p: p.clamp(0.0, 1.0),
        std,
        clamped,
    })
}

// ---------------------------------------------------------------------------
// Correlation tables and contrasts
// ---------------------------------------------------------------------------

/// Per-basis correlation counts: two photon outcomes x two spin outcomes.
///
/// For the Z basis the photon outcomes are the early/late windows; for X and
/// Y they are the two spin-readout datasets (along the +axis and −axis),
/// which is how anti-correlations are accessed with a single usable
/// interferometer output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub basis: Basis,
    /// counts[photon_outcome][spin_outcome].
    pub counts: [[u64; 2]; 2],
    pub photon_labels: [String; 2],
}

impl CorrelationTable {
    pub fn new(basis: Basis) -> Self {
        let photon_labels = match basis {
            Basis::Z => ["early".to_string(), "late".to_string()],
            Basis::X => ["x".to_string(), "-x".to_string()],
            Basis::Y => ["y".to_string(), "-y".to_string()],
        };
        Self {
            basis,
            counts: [[0; 2]; 2],
            photon_labels,
        }
    }

    pub fn record(&mut self, photon_outcome: usize, spin_outcome: u8) {
        self.counts[photon_outcome][spin_outcome as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// A contrast |P_a(0) − P_b(0)| with propagated error and the corrected
/// conditional probabilities it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastEstimate {
    pub basis: Basis,
    pub value: f64,
    pub std: f64,
    pub p_a: CorrectedProbability,
    pub p_b: CorrectedProbability,
    pub counts_a: u64,
    pub counts_b: u64,
}

/// Contrast of a correlation table after readout and dark corrections.
pub fn contrast(table: &CorrelationTable, cfg: &AnalysisConfig) -> Result<ContrastEstimate> {
    cfg.validate()?;
    let counts_a = table.counts[0][0] + table.counts[0][1];
    let counts_b = table.counts[1][0] + table.counts[1][1];
    if counts_a == 0 || counts_b == 0 {
        return Err(Error::InsufficientSignal(format!(
            "{:?} basis: photon outcome '{}' has {} counts and '{}' has {}",
            table.basis, table.photon_labels[0], counts_a, table.photon_labels[1], counts_b
        )));
    }
    let correct = |n0: u64, n1: u64| -> Result<CorrectedProbability> {
        let readout = correct_readout(n0, n1, cfg.f0, cfg.f1)?;
        correct_dark_counts(readout, cfg.dark_fraction)
    };
    let p_a = correct(table.counts[0][0], table.counts[0][1])?;
    let p_b = correct(table.counts[1][0], table.counts[1][1])?;
    let value = (p_a.p - p_b.p).abs();
    let std = (p_a.std * p_a.std + p_b.std * p_b.std).sqrt();
    Ok(ContrastEstimate {
        basis: table.basis,
        value,
        std,
        p_a,
        p_b,
        counts_a,
        counts_b,
    })
}

// ---------------------------------------------------------------------------
// Fidelity
// ---------------------------------------------------------------------------

/// Entangled-state fidelity estimate from the three contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub std: f64,
    /// (F − 0.5) / std: distance above the classical boundary.
    pub sigma_above_classical: f64,
}

/// F = (1 + E_X + E_Y + E_Z)/4 with errors combined in quadrature.
pub fn fidelity_from_contrasts(e_x: (f64, f64), e_y: (f64, f64), e_z: (f64, f64)) -> FidelityEstimate {
    let value = (1.0 + e_x.0 + e_y.0 + e_z.0) / 4.0;
    let std = (e_x.1 * e_x.1 + e_y.1 * e_y.1 + e_z.1 * e_z.1).sqrt() / 4.0;
    let sigma_above_classical = if std > 0.0 {
        (value - 0.5) / std
    } else {
        f64::INFINITY
    };
    FidelityEstimate {
        value,
        std,
        sigma_above_classical,
    }
}

/// Full tomography output. A missing basis leaves its contrast `None` and
/// suppresses the fidelity, so partial datasets stay explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub e_x: Option<ContrastEstimate>,
    pub e_y: Option<ContrastEstimate>,
    pub e_z: Option<ContrastEstimate>,
    pub fidelity: Option<FidelityEstimate>,
}

impl TomographyResult {
    pub fn contrast(&self, basis: Basis) -> Option<&ContrastEstimate> {
        match basis {
            Basis::X => self.e_x.as_ref(),
            Basis::Y => self.e_y.as_ref(),
            Basis::Z => self.e_z.as_ref(),
        }
    }
}

// ---------------------------------------------------------------------------
// Estimation pipeline
// ---------------------------------------------------------------------------

/// Group events into per-basis correlation tables.
///
/// D4 clicks are discarded. D3 side-window clicks are discarded from X/Y
/// tomography; with `side_windows_as_z` they are accumulated as Z data
/// instead (their readout is already in the Z basis).
pub fn accumulate(records: &[EventRecord], cfg: &AnalysisConfig) -> BTreeMap<Basis, CorrelationTable> {
    let mut tables: BTreeMap<Basis, CorrelationTable> = BTreeMap::new();
    for record in records {
        let event = &record.event;
        if event.detector == Detector::D4 || event.detector == Detector::D1 {
            continue;
        }
        let slot = match (event.detector, event.window, record.readout) {
            (Detector::D2, Window::Early, ReadoutBasis::Z) => Some((Basis::Z, 0)),
            (Detector::D2, Window::Late, ReadoutBasis::Z) => Some((Basis::Z, 1)),
            (Detector::D3, Window::Middle, r) if r != ReadoutBasis::Z => {
                Some((r.basis(), if r.is_plus() { 0 } else { 1 }))
            }
            (Detector::D3, Window::Early, ReadoutBasis::Z) if cfg.side_windows_as_z => {
                Some((Basis::Z, 0))
            }
            (Detector::D3, Window::Late, ReadoutBasis::Z) if cfg.side_windows_as_z => {
                Some((Basis::Z, 1))
            }
            _ => None,
        };
        if let Some((basis, photon_outcome)) = slot {
            tables
                .entry(basis)
                .or_insert_with(|| CorrelationTable::new(basis))
                .record(photon_outcome, record.spin_outcome);
        }
    }
    tables
}

/// Full estimation: group by basis, correct, and combine into contrasts and
/// (when all three bases are present) the fidelity.
pub fn estimate(records: &[EventRecord], cfg: &AnalysisConfig) -> Result<TomographyResult> {
    cfg.validate()?;
    let tables = accumulate(records, cfg);
    let mut result = TomographyResult {
        e_x: None,
        e_y: None,
        e_z: None,
        fidelity: None,
    };
    for (basis, table) in &tables {
        let est = contrast(table, cfg)?;
        match basis {
            Basis::X => result.e_x = Some(est),
            Basis::Y => result.e_y = Some(est),
            Basis::Z => result.e_z = Some(est),
        }
    }
    if let (Some(x), Some(y), Some(z)) = (&result.e_x, &result.e_y, &result.e_z) {
        result.fidelity = Some(fidelity_from_contrasts(
            (x.value, x.std),
            (y.value, y.std),
            (z.value, z.std),
        ));
    }
    Ok(result)
}
