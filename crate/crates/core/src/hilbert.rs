//! Dense exact linear algebra for small composite quantum systems.
//!
//! States live on an ordered list of subsystem dimensions: the spin qubit is
//! dimension 2 and the photonic time-bin mode is dimension 3 (vacuum, early,
//! late), so the largest space in the simulator is 18-dimensional. Everything
//! is plain row-major complex arithmetic; no sparsity, no BLAS.
//!
//! States are compared up to global phase throughout; tests assert on
//! |⟨a|b⟩| and on probabilities rather than on raw amplitudes.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for completeness / trace checks.
pub const SUM_TOL: f64 = 1e-10;
/// Tolerance for unitarity / Hermiticity / normalization checks.
pub const EXACT_TOL: f64 = 1e-12;

/// Photonic mode basis indices: {vacuum, early, late}.
pub const PHOTON_VACUUM: usize = 0;
pub const PHOTON_EARLY: usize = 1;
pub const PHOTON_LATE: usize = 2;
/// Dimension of the photonic time-bin mode.
pub const PHOTON_DIM: usize = 3;
/// Dimension of the spin qubit.
pub const SPIN_DIM: usize = 2;

fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Flatten a multi-index over `dims` (row-major, first subsystem slowest).
pub fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), idx.len());
    let mut flat = 0;
    for (d, i) in dims.iter().zip(idx) {
        debug_assert!(i < d);
        flat = flat * d + i;
    }
    flat
}

/// Inverse of [`flat_index`].
pub fn multi_index(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

// ---------------------------------------------------------------------------
// StateVector
// ---------------------------------------------------------------------------

/// Pure state of a composite system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        if total_dim(&dims) != amps.len() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector of length {} does not match dims {:?}",
                amps.len(),
                dims
            )));
        }
        Ok(Self { dims, amps })
    }

    /// Basis state |i₀, i₁, …⟩.
    pub fn basis(dims: &[usize], indices: &[usize]) -> Self {
        let mut amps = vec![C64::ZERO; total_dim(dims)];
        amps[flat_index(dims, indices)] = C64::ONE;
        Self {
            dims: dims.to_vec(),
            amps,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-15 {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("inner product dims differ".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩| — the global-phase-free overlap.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Kronecker product, concatenating subsystem lists.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { dims, amps }
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let d = self.amps.len();
        let mut mat = vec![C64::ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                mat[i * d + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix {
            dims: self.dims.clone(),
            mat,
        }
    }
}

// ---------------------------------------------------------------------------
// Operator
// ---------------------------------------------------------------------------

/// Square operator on a composite space (unitary, projector, or Kraus piece).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    mat: Vec<C64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: Vec<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if mat.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "matrix of length {} is not {d}x{d} for dims {:?}",
                mat.len(),
                dims
            )));
        }
        Ok(Self { dims, mat })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        let mut mat = vec![C64::ZERO; d * d];
        for i in 0..d {
            mat[i * d + i] = C64::ONE;
        }
        Self {
            dims: dims.to_vec(),
            mat,
        }
    }

    /// Rank-one projector |ψ⟩⟨ψ|.
    pub fn projector(state: &StateVector) -> Self {
        let rho = state.to_density_matrix();
        Self {
            dims: rho.dims,
            mat: rho.mat,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        total_dim(&self.dims)
    }

    pub fn matrix(&self) -> &[C64] {
        &self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[row * self.side() + col]
    }

    pub fn adjoint(&self) -> Operator {
        let d = self.side();
        let mut mat = vec![C64::ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                mat[j * d + i] = self.mat[i * d + j].conj();
            }
        }
        Operator {
            dims: self.dims.clone(),
            mat,
        }
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("operator product dims differ".into()));
        }
        let d = self.side();
        let mut mat = vec![C64::ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.mat[i * d + k];
                if a == C64::ZERO {
                    continue;
                }
                for j in 0..d {
                    mat[i * d + j] += a * other.mat[k * d + j];
                }
            }
        }
        Ok(Operator {
            dims: self.dims.clone(),
            mat,
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("operator sum dims differ".into()));
        }
        let mat = self
            .mat
            .iter()
            .zip(&other.mat)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Operator {
            dims: self.dims.clone(),
            mat,
        })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            dims: self.dims.clone(),
            mat: self.mat.iter().map(|a| a * factor).collect(),
        }
    }

    /// Kronecker product, concatenating subsystem lists.
    pub fn tensor(&self, other: &Operator) -> Operator {
        let da = self.side();
        let db = other.side();
        let d = da * db;
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut mat = vec![C64::ZERO; d * d];
        for ia in 0..da {
            for ja in 0..da {
                let a = self.mat[ia * da + ja];
                if a == C64::ZERO {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        mat[(ia * db + ib) * d + (ja * db + jb)] = a * other.mat[ib * db + jb];
                    }
                }
            }
        }
        Operator { dims, mat }
    }

    pub fn apply_to_vector(&self, amps: &[C64]) -> Result<Vec<C64>> {
        let d = self.side();
        if amps.len() != d {
            return Err(Error::DimensionMismatch("operator/vector size mismatch".into()));
        }
        let mut out = vec![C64::ZERO; d];
        for i in 0..d {
            let mut acc = C64::ZERO;
            for j in 0..d {
                acc += self.mat[i * d + j] * amps[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Embed this operator into a larger space, acting on the given target
    /// subsystems (in the order of this operator's own subsystem list) and as
    /// identity elsewhere.
    pub fn embed(&self, full_dims: &[usize], targets: &[usize]) -> Result<Operator> {
        if targets.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(
                "target count does not match operator subsystems".into(),
            ));
        }
        for (k, &t) in targets.iter().enumerate() {
            if t >= full_dims.len() {
                return Err(Error::DimensionMismatch(format!(
                    "target subsystem {t} out of range"
                )));
            }
            if full_dims[t] != self.dims[k] {
                return Err(Error::DimensionMismatch(format!(
                    "operator dim {} does not match subsystem {t} dim {}",
                    self.dims[k], full_dims[t]
                )));
            }
            if targets[..k].contains(&t) {
                return Err(Error::DimensionMismatch(format!(
                    "duplicate target subsystem {t}"
                )));
            }
        }
        let full = total_dim(full_dims);
        let dop = self.side();
        let mut mat = vec![C64::ZERO; full * full];
        for row in 0..full {
            let row_idx = multi_index(full_dims, row);
            let op_row: Vec<usize> = targets.iter().map(|&t| row_idx[t]).collect();
            let r = flat_index(&self.dims, &op_row);
            for c in 0..dop {
                let v = self.mat[r * dop + c];
                if v == C64::ZERO {
                    continue;
                }
                let col_sub = multi_index(&self.dims, c);
                let mut col_idx = row_idx.clone();
                for (k, &t) in targets.iter().enumerate() {
                    col_idx[t] = col_sub[k];
                }
                let col = flat_index(full_dims, &col_idx);
                mat[row * full + col] = v;
            }
        }
        Ok(Operator {
            dims: full_dims.to_vec(),
            mat,
        })
    }

    /// Max |U†U − I| entry.
    pub fn unitarity_defect(&self) -> f64 {
        let utu = self.adjoint().mul(self).expect("same dims");
        let d = self.side();
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j { C64::ONE } else { C64::ZERO };
                defect = defect.max((utu.mat[i * d + j] - expected).norm());
            }
        }
        defect
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }
}

/// Max entry of |Σ Kᵢ†Kᵢ − I|; zero for a trace-preserving Kraus set.
pub fn kraus_defect(ops: &[Operator]) -> Result<f64> {
    let dims = ops
        .first()
        .ok_or_else(|| Error::InvalidState("empty Kraus set".into()))?
        .dims
        .clone();
    let mut sum = Operator::identity(&dims).scale(C64::ZERO);
    for k in ops {
        sum = sum.add(&k.adjoint().mul(k)?)?;
    }
    let d = sum.side();
    let mut defect: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let expected = if i == j { C64::ONE } else { C64::ZERO };
            defect = defect.max((sum.mat[i * d + j] - expected).norm());
        }
    }
    Ok(defect)
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Mixed state of a composite system (row-major, side = Π dims).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: Vec<C64>,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian within 1e-12, unit trace within
    /// 1e-12, eigenvalues ≥ −1e-10.
    pub fn from_matrix(dims: Vec<usize>, mat: Vec<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if mat.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "matrix of length {} is not {d}x{d}",
                mat.len()
            )));
        }
        let rho = Self { dims, mat };
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.to_density_matrix()
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        let mut mat = vec![C64::ZERO; d * d];
        for i in 0..d {
            mat[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        Self {
            dims: dims.to_vec(),
            mat,
        }
    }

    /// Convex mixture Σ wᵢ ρᵢ. Weights must sum to 1 within 1e-10.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let dims = first.dims.clone();
        let d = total_dim(&dims);
        let wsum: f64 = parts.iter().map(|(w, _)| w).sum();
        if (wsum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidState(format!("mixture weights sum to {wsum}")));
        }
        let mut mat = vec![C64::ZERO; d * d];
        for (w, rho) in parts {
            if rho.dims != dims {
                return Err(Error::DimensionMismatch("mixture dims differ".into()));
            }
            for (out, v) in mat.iter_mut().zip(&rho.mat) {
                *out += v * *w;
            }
        }
        Ok(Self { dims, mat })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        total_dim(&self.dims)
    }

    pub fn matrix(&self) -> &[C64] {
        &self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[row * self.side() + col]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, value: C64) {
        let d = self.side();
        self.mat[row * d + col] = value;
    }

    pub fn trace(&self) -> C64 {
        let d = self.side();
        (0..d).map(|i| self.mat[i * d + i]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.side();
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                defect = defect.max((self.mat[i * d + j] - self.mat[j * d + i].conj()).norm());
            }
        }
        defect
    }

    pub fn validate(&self) -> Result<()> {
        if self.hermiticity_defect() > EXACT_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {})",
                self.hermiticity_defect()
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > EXACT_TOL || tr.im.abs() > EXACT_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
        }
        let min_eig = self
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig}"
            )));
        }
        Ok(())
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let tr = self.trace().re;
        if tr < 1e-15 {
            return Err(Error::InvalidState("cannot renormalize zero-trace matrix".into()));
        }
        for v in &mut self.mat {
            *v /= tr;
        }
        Ok(())
    }

    /// U ρ U†.
    pub fn evolved(&self, u: &Operator) -> Result<DensityMatrix> {
        if u.dims != self.dims {
            return Err(Error::DimensionMismatch("evolution operator dims differ".into()));
        }
        let urho = u.mul(&Operator {
            dims: self.dims.clone(),
            mat: self.mat.clone(),
        })?;
        let out = urho.mul(&u.adjoint())?;
        Ok(DensityMatrix {
            dims: self.dims.clone(),
            mat: out.mat,
        })
    }

    /// Tr(A ρ).
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dims != self.dims {
            return Err(Error::DimensionMismatch("observable dims differ".into()));
        }
        let d = self.side();
        let mut acc = C64::ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += op.mat[i * d + j] * self.mat[j * d + i];
            }
        }
        Ok(acc)
    }

    /// Reduced state over the subsystems in `keep` (ascending original order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        for &k in keep {
            if k >= self.dims.len() {
                return Err(Error::DimensionMismatch(format!(
                    "keep index {k} out of range"
                )));
            }
        }
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        let traced: Vec<usize> = (0..self.dims.len())
            .filter(|i| !keep_sorted.contains(i))
            .collect();
        let keep_dims: Vec<usize> = keep_sorted.iter().map(|&i| self.dims[i]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&i| self.dims[i]).collect();
        let dk = total_dim(&keep_dims);
        let dt = total_dim(&traced_dims);
        let mut mat = vec![C64::ZERO; dk * dk];
        let mut full_row = vec![0usize; self.dims.len()];
        let mut full_col = vec![0usize; self.dims.len()];
        for r in 0..dk {
            let ridx = multi_index(&keep_dims, r);
            for c in 0..dk {
                let cidx = multi_index(&keep_dims, c);
                let mut acc = C64::ZERO;
                for t in 0..dt {
                    let tidx = multi_index(&traced_dims, t);
                    for (pos, &sub) in keep_sorted.iter().enumerate() {
                        full_row[sub] = ridx[pos];
                        full_col[sub] = cidx[pos];
                    }
                    for (pos, &sub) in traced.iter().enumerate() {
                        full_row[sub] = tidx[pos];
                        full_col[sub] = tidx[pos];
                    }
                    acc += self.entry(
                        flat_index(&self.dims, &full_row),
                        flat_index(&self.dims, &full_col),
                    );
                }
                mat[r * dk + c] = acc;
            }
        }
        Ok(DensityMatrix {
            dims: keep_dims,
            mat,
        })
    }

    /// ⟨target|ρ|target⟩, the overlap with a pure target state.
    pub fn fidelity_to_pure(&self, target: &StateVector) -> Result<f64> {
        if self.dims != target.dims {
            return Err(Error::DimensionMismatch("fidelity dims differ".into()));
        }
        let d = self.side();
        let mut acc = C64::ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += target.amps[i].conj() * self.mat[i * d + j] * target.amps[j];
            }
        }
        debug_assert!(acc.im.abs() < SUM_TOL, "fidelity has imaginary part {}", acc.im);
        Ok(acc.re)
    }

    pub fn purity(&self) -> f64 {
        let d = self.side();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.mat[i * d + j] * self.mat[j * d + i]).re;
            }
        }
        acc
    }

    /// Eigenvalues via cyclic complex Jacobi rotations (Hermitian input).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.side();
        let mut a = self.mat.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[p * d + q].norm_sqr();
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    let r = apq.norm();
                    if r < 1e-18 {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a[p * d + p].re;
                    let aqq = a[q * d + q].re;
                    // 2x2 rotation zeroing the (p, q) entry.
                    let theta = 0.5 * (2.0 * r).atan2(app - aqq);
                    let c = theta.cos();
                    let s = theta.sin();
                    let sigma = phase * s;
                    // Columns: col_p' = c*col_p + sigma*col_q ; col_q' = -conj(sigma)*col_p + c*col_q
                    for i in 0..d {
                        let aip = a[i * d + p];
                        let aiq = a[i * d + q];
                        a[i * d + p] = aip * c + aiq * sigma.conj();
                        a[i * d + q] = -aip * sigma + aiq * c;
                    }
                    for j in 0..d {
                        let apj = a[p * d + j];
                        let aqj = a[q * d + j];
                        a[p * d + j] = apj * c + aqj * sigma;
                        a[q * d + j] = -apj * sigma.conj() + aqj * c;
                    }
                }
            }
        }
        (0..d).map(|i| a[i * d + i].re).collect()
    }
}

// ---------------------------------------------------------------------------
// Channel and measurement operations
// ---------------------------------------------------------------------------

/// Apply a unitary to selected subsystems of a pure state. Norm is preserved.
pub fn apply_unitary_vec(state: &mut StateVector, u: &Operator, targets: &[usize]) -> Result<()> {
    let full = if u.dims == state.dims && targets.iter().copied().eq(0..state.dims.len()) {
        u.clone()
    } else {
        u.embed(&state.dims, targets)?
    };
    state.amps = full.apply_to_vector(&state.amps)?;
    Ok(())
}

/// Apply a unitary to selected subsystems of a density matrix.
pub fn apply_unitary_dm(rho: &mut DensityMatrix, u: &Operator, targets: &[usize]) -> Result<()> {
    let full = if u.dims == rho.dims && targets.iter().copied().eq(0..rho.dims.len()) {
        u.clone()
    } else {
        u.embed(&rho.dims, targets)?
    };
    *rho = rho.evolved(&full)?;
    Ok(())
}

/// Outcome of a sampled projective measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: DensityMatrix,
}

/// Sample a projective measurement with Born probabilities.
///
/// The projector set must be complete (Σ P = I within 1e-10); the
/// post-measurement state is renormalized.
pub fn measure_projective<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    projectors: &[Operator],
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    check_projector_completeness(rho.dims(), projectors)?;
    let probs: Vec<f64> = projectors
        .iter()
        .map(|p| rho.expectation(p).map(|v| v.re.max(0.0)))
        .collect::<Result<_>>()?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "measurement probabilities sum to {total}"
        )));
    }
    let draw: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut outcome = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            outcome = k;
            break;
        }
    }
    let p = probs[outcome];
    if p < 1e-15 {
        return Err(Error::InvalidState("sampled a zero-probability outcome".into()));
    }
    let proj = &projectors[outcome];
    let mut post = rho.evolved(proj)?;
    post.renormalize()?;
    Ok(MeasurementOutcome {
        outcome,
        probability: p,
        post_state: post,
    })
}

/// Born probabilities of a complete projective measurement, without sampling.
pub fn outcome_probabilities(rho: &DensityMatrix, projectors: &[Operator]) -> Result<Vec<f64>> {
    check_projector_completeness(rho.dims(), projectors)?;
    projectors
        .iter()
        .map(|p| rho.expectation(p).map(|v| v.re.max(0.0)))
        .collect()
}

fn check_projector_completeness(dims: &[usize], projectors: &[Operator]) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::IncompleteProjectors("empty projector set".into()));
    }
    let mut sum = Operator::identity(dims).scale(C64::ZERO);
    for p in projectors {
        if p.dims() != dims {
            return Err(Error::DimensionMismatch("projector dims differ from state".into()));
        }
        sum = sum.add(p)?;
    }
    let d = total_dim(dims);
    for i in 0..d {
        for j in 0..d {
            let expected = if i == j { C64::ONE } else { C64::ZERO };
            if (sum.mat[i * d + j] - expected).norm() > SUM_TOL {
                return Err(Error::IncompleteProjectors(format!(
                    "sum deviates from identity at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Pinching channel ρ → Σ P ρ P: kills coherence between the projector
/// subspaces while leaving each block untouched.
pub fn pinch(rho: &DensityMatrix, projectors: &[Operator]) -> Result<DensityMatrix> {
    check_projector_completeness(rho.dims(), projectors)?;
    let mut parts: Vec<DensityMatrix> = Vec::with_capacity(projectors.len());
    for p in projectors {
        parts.push(rho.evolved(p)?);
    }
    let d = rho.side();
    let mut mat = vec![C64::ZERO; d * d];
    for part in parts {
        for (out, v) in mat.iter_mut().zip(&part.mat) {
            *out += v;
        }
    }
    Ok(DensityMatrix {
        dims: rho.dims.clone(),
        mat,
    })
}

/// Deterministic Kraus channel ρ → Σ K ρ K†.
pub fn apply_kraus_sum(rho: &DensityMatrix, kraus: &[Operator]) -> Result<DensityMatrix> {
    let defect = kraus_defect(kraus)?;
    if defect > SUM_TOL {
        return Err(Error::IncompleteProjectors(format!(
            "Kraus set not trace preserving (defect {defect})"
        )));
    }
    let d = rho.side();
    let mut mat = vec![C64::ZERO; d * d];
    for k in kraus {
        let term = rho.evolved(k)?;
        for (out, v) in mat.iter_mut().zip(&term.mat) {
            *out += v;
        }
    }
    Ok(DensityMatrix {
        dims: rho.dims.clone(),
        mat,
    })
}

/// Sample one Kraus branch of a channel (quantum-trajectory step).
pub fn apply_kraus_sampled<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    kraus: &[Operator],
    rng: &mut R,
) -> Result<(usize, DensityMatrix, f64)> {
    let defect = kraus_defect(kraus)?;
    if defect > SUM_TOL {
        return Err(Error::IncompleteProjectors(format!(
            "Kraus set not trace preserving (defect {defect})"
        )));
    }
    let mut branches: Vec<(DensityMatrix, f64)> = Vec::with_capacity(kraus.len());
    for k in kraus {
        let unnorm = rho.evolved(k)?;
        let p = unnorm.trace().re.max(0.0);
        branches.push((unnorm, p));
    }
    let total: f64 = branches.iter().map(|(_, p)| p).sum();
    let draw: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = branches.len() - 1;
    for (k, (_, p)) in branches.iter().enumerate() {
        acc += p;
        if draw < acc {
            pick = k;
            break;
        }
    }
    let (mut post, p) = branches.swap_remove(pick);
    if p < 1e-15 {
        return Err(Error::InvalidState("sampled a zero-probability Kraus branch".into()));
    }
    post.renormalize()?;
    Ok((pick, post, p))
}

// ---------------------------------------------------------------------------
// Common operators and states
// ---------------------------------------------------------------------------

/// Single-qubit gates and photonic-mode operators used across the simulator.
pub mod ops {
    use super::{C64, Operator, PHOTON_DIM};

    fn qubit_op(m: [[C64; 2]; 2]) -> Operator {
        Operator::new(vec![2], vec![m[0][0], m[0][1], m[1][0], m[1][1]]).expect("2x2")
    }

    pub fn pauli_x() -> Operator {
        qubit_op([[C64::ZERO, C64::ONE], [C64::ONE, C64::ZERO]])
    }

    pub fn pauli_y() -> Operator {
        qubit_op([
            [C64::ZERO, C64::new(0.0, -1.0)],
            [C64::new(0.0, 1.0), C64::ZERO],
        ])
    }

    pub fn pauli_z() -> Operator {
        qubit_op([[C64::ONE, C64::ZERO], [C64::ZERO, -C64::ONE]])
    }

    pub fn rot_x(theta: f64) -> Operator {
        let c = C64::new((theta / 2.0).cos(), 0.0);
        let s = C64::new(0.0, -(theta / 2.0).sin());
        qubit_op([[c, s], [s, c]])
    }

    pub fn rot_y(theta: f64) -> Operator {
        let c = C64::new((theta / 2.0).cos(), 0.0);
        let s = C64::new((theta / 2.0).sin(), 0.0);
        qubit_op([[c, -s], [s, c]])
    }

    pub fn rot_z(theta: f64) -> Operator {
        qubit_op([
            [C64::from_polar(1.0, -theta / 2.0), C64::ZERO],
            [C64::ZERO, C64::from_polar(1.0, theta / 2.0)],
        ])
    }

    /// Phase e^{iφ} on the late photonic bin, identity elsewhere.
    pub fn photon_late_phase(phi: f64) -> Operator {
        let mut mat = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
        mat[0] = C64::ONE;
        mat[PHOTON_DIM + 1] = C64::ONE;
        mat[2 * PHOTON_DIM + 2] = C64::from_polar(1.0, phi);
        Operator::new(vec![PHOTON_DIM], mat).expect("3x3")
    }

    /// |i⟩⟨i| on a single subsystem of dimension `dim`.
    pub fn level_projector(dim: usize, level: usize) -> Operator {
        let mut mat = vec![C64::ZERO; dim * dim];
        mat[level * dim + level] = C64::ONE;
        Operator::new(vec![dim], mat).expect("square")
    }
}

/// Constructors for the states the simulator works with.
pub mod states {
    use super::*;

    /// Composite dims of the spin ⊗ photonic-mode space.
    pub fn spin_photon_dims() -> Vec<usize> {
        vec![SPIN_DIM, PHOTON_DIM]
    }

    pub fn spin_zero() -> StateVector {
        StateVector::basis(&[SPIN_DIM], &[0])
    }

    pub fn spin_one() -> StateVector {
        StateVector::basis(&[SPIN_DIM], &[1])
    }

    /// (|0⟩ + e^{iφ}|1⟩)/√2.
    pub fn spin_superposition(phi: f64) -> StateVector {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        StateVector::new(
            vec![SPIN_DIM],
            vec![a, C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phi)],
        )
        .expect("qubit")
    }

    pub fn photon_vacuum() -> StateVector {
        StateVector::basis(&[PHOTON_DIM], &[PHOTON_VACUUM])
    }

    pub fn photon_early() -> StateVector {
        StateVector::basis(&[PHOTON_DIM], &[PHOTON_EARLY])
    }

    pub fn photon_late() -> StateVector {
        StateVector::basis(&[PHOTON_DIM], &[PHOTON_LATE])
    }

    /// Balanced time-bin photon (|E⟩ + e^{iθ}|L⟩)/√2.
    pub fn photon_superposition(theta: f64) -> StateVector {
        let mut amps = vec![C64::ZERO; PHOTON_DIM];
        amps[PHOTON_EARLY] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[PHOTON_LATE] = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, theta);
        StateVector::new(vec![PHOTON_DIM], amps).expect("photon")
    }

    /// The maximally entangled spin-photon target (|1,E⟩ + |0,L⟩)/√2.
    pub fn target_bell_state() -> StateVector {
        let dims = spin_photon_dims();
        let mut amps = vec![C64::ZERO; SPIN_DIM * PHOTON_DIM];
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[flat_index(&dims, &[1, PHOTON_EARLY])] = a;
        amps[flat_index(&dims, &[0, PHOTON_LATE])] = a;
        StateVector::new(dims, amps).expect("bell")
    }

    /// The target state with its spin-photon coherence scaled by `v` — the
    /// ensemble average of a dephased entangling attempt.
    pub fn dephased_bell_state(v: f64) -> DensityMatrix {
        let dims = spin_photon_dims();
        let mut rho = target_bell_state().to_density_matrix();
        let a = flat_index(&dims, &[1, PHOTON_EARLY]);
        let b = flat_index(&dims, &[0, PHOTON_LATE]);
        rho.set_entry(a, b, rho.entry(a, b) * v);
        rho.set_entry(b, a, rho.entry(b, a) * v);
        rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use states::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(7)
    }

    #[test]
    fn tensor_places_basis_amplitude_at_expected_index() {
        let joint = spin_zero().tensor(&photon_early());
        assert_eq!(joint.dims(), &[2, 3]);
        assert_eq!(joint.amplitudes().len(), 6);
        for (i, a) in joint.amplitudes().iter().enumerate() {
            let expected = if i == 1 { C64::ONE } else { C64::ZERO };
            assert!((a - expected).norm() < EXACT_TOL, "index {i}");
        }
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let id = Operator::identity(&[2]).tensor(&Operator::identity(&[3]));
        assert_eq!(id, Operator::identity(&[2, 3]));
    }

    #[test]
    fn tensor_is_linear_over_superpositions() {
        let joint = spin_superposition(0.0).tensor(&photon_vacuum());
        let dims = [2, 3];
        let i0 = flat_index(&dims, &[0, PHOTON_VACUUM]);
        let i1 = flat_index(&dims, &[1, PHOTON_VACUUM]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((joint.amplitudes()[i0].re - r).abs() < EXACT_TOL);
        assert!((joint.amplitudes()[i1].re - r).abs() < EXACT_TOL);
        assert!((joint.norm() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn pi_rotation_flips_spin_up_to_phase() {
        let mut state = spin_zero();
        apply_unitary_vec(&mut state, &ops::rot_x(PI), &[0]).unwrap();
        assert!((state.overlap(&spin_one()).unwrap() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn half_pi_rotation_prepares_balanced_superposition() {
        let mut state = spin_zero();
        apply_unitary_vec(&mut state, &ops::rot_y(FRAC_PI_2), &[0]).unwrap();
        assert!((state.overlap(&spin_superposition(0.0)).unwrap() - 1.0).abs() < EXACT_TOL);
        assert!((state.norm() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn unitary_then_inverse_is_identity() {
        let u = ops::rot_y(1.234);
        let mut state = spin_zero().tensor(&photon_superposition(0.3));
        let original = state.clone();
        apply_unitary_vec(&mut state, &u, &[0]).unwrap();
        apply_unitary_vec(&mut state, &u.adjoint(), &[0]).unwrap();
        let diff: f64 = state
            .amplitudes()
            .iter()
            .zip(original.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(diff < EXACT_TOL);
    }

    #[test]
    fn apply_unitary_rejects_dimension_mismatch() {
        let mut state = spin_zero().tensor(&photon_early());
        let err = apply_unitary_vec(&mut state, &ops::pauli_x(), &[1]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn tracing_photon_out_of_bell_state_gives_mixed_spin() {
        let rho = target_bell_state().to_density_matrix();
        let spin = rho.partial_trace(&[0]).unwrap();
        let expected = DensityMatrix::maximally_mixed(&[2]);
        for (a, b) in spin.matrix().iter().zip(expected.matrix()) {
            assert!((a - b).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn tracing_nothing_returns_input() {
        let rho = target_bell_state().to_density_matrix();
        let same = rho.partial_trace(&[0, 1]).unwrap();
        assert_eq!(rho, same);
    }

    #[test]
    fn tracing_spin_out_of_product_state_gives_photon_factor() {
        let rho = spin_zero().tensor(&photon_early()).to_density_matrix();
        let photon = rho.partial_trace(&[1]).unwrap();
        let expected = photon_early().to_density_matrix();
        for (a, b) in photon.matrix().iter().zip(expected.matrix()) {
            assert!((a - b).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn z_measurement_of_basis_state_is_deterministic() {
        let rho = spin_zero().to_density_matrix();
        let projectors = [ops::level_projector(2, 0), ops::level_projector(2, 1)];
        let out = measure_projective(&rho, &projectors, &mut rng()).unwrap();
        assert_eq!(out.outcome, 0);
        assert!((out.probability - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn z_measurement_of_superposition_is_balanced() {
        let rho = spin_superposition(0.0).to_density_matrix();
        let projectors = [ops::level_projector(2, 0), ops::level_projector(2, 1)];
        let probs = outcome_probabilities(&rho, &projectors).unwrap();
        assert!((probs[0] - 0.5).abs() < EXACT_TOL);
        assert!((probs[1] - 0.5).abs() < EXACT_TOL);
        // Sampled outcome matches one of the projectors with the right post-state.
        let out = measure_projective(&rho, &projectors, &mut rng()).unwrap();
        assert!((out.probability - 0.5).abs() < EXACT_TOL);
        assert!((out.post_state.purity() - 1.0).abs() < SUM_TOL);
    }

    #[test]
    fn photon_bin_measurement_projects_partner_spin() {
        let rho = target_bell_state().to_density_matrix();
        let dims = spin_photon_dims();
        let projectors: Vec<Operator> = (0..PHOTON_DIM)
            .map(|b| {
                ops::level_projector(PHOTON_DIM, b)
                    .embed(&dims, &[1])
                    .unwrap()
            })
            .collect();
        let probs = outcome_probabilities(&rho, &projectors).unwrap();
        assert!(probs[PHOTON_VACUUM].abs() < EXACT_TOL);
        assert!((probs[PHOTON_EARLY] - 0.5).abs() < EXACT_TOL);
        assert!((probs[PHOTON_LATE] - 0.5).abs() < EXACT_TOL);

        // Condition on each bin and inspect the leftover spin.
        let early = rho.evolved(&projectors[PHOTON_EARLY]).unwrap();
        let mut early = early;
        early.renormalize().unwrap();
        let spin_e = early.partial_trace(&[0]).unwrap();
        assert!((spin_e.entry(1, 1).re - 1.0).abs() < EXACT_TOL);

        let mut late = rho.evolved(&projectors[PHOTON_LATE]).unwrap();
        late.renormalize().unwrap();
        let spin_l = late.partial_trace(&[0]).unwrap();
        assert!((spin_l.entry(0, 0).re - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn incomplete_projector_set_is_rejected() {
        let rho = spin_zero().to_density_matrix();
        let projectors = [ops::level_projector(2, 0)];
        let err = measure_projective(&rho, &projectors, &mut rng());
        assert!(matches!(err, Err(Error::IncompleteProjectors(_))));
    }

    #[test]
    fn fidelity_of_target_with_itself_is_one() {
        let target = target_bell_state();
        let rho = target.to_density_matrix();
        assert!((rho.fidelity_to_pure(&target).unwrap() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn fidelity_of_maximally_mixed_qubit_pair_subspace_is_quarter() {
        // I/4 on the spin ⊗ {E, L} subspace, zero on the vacuum row.
        let dims = spin_photon_dims();
        let d = SPIN_DIM * PHOTON_DIM;
        let mut mat = vec![C64::ZERO; d * d];
        for s in 0..SPIN_DIM {
            for b in [PHOTON_EARLY, PHOTON_LATE] {
                let i = flat_index(&dims, &[s, b]);
                mat[i * d + i] = C64::new(0.25, 0.0);
            }
        }
        let rho = DensityMatrix::from_matrix(dims, mat).unwrap();
        let f = rho.fidelity_to_pure(&target_bell_state()).unwrap();
        assert!((f - 0.25).abs() < EXACT_TOL);
    }

    #[test]
    fn fidelity_of_dephased_target_follows_hand_expansion() {
        // ⟨Ψ|ρ_v|Ψ⟩ = (1 + v)/2: expanding over the two populated cells gives
        // (1/2)(ρ_aa + ρ_bb + ρ_ab + ρ_ba) with ρ_aa = ρ_bb = 1/2, ρ_ab = v/2.
        for v in [0.0, 0.35, 0.65, 1.0] {
            let rho = dephased_bell_state(v);
            let f = rho.fidelity_to_pure(&target_bell_state()).unwrap();
            assert!((f - (1.0 + v) / 2.0).abs() < EXACT_TOL, "v = {v}");
        }
    }

    #[test]
    fn fidelity_rejects_dimension_mismatch() {
        let rho = spin_zero().to_density_matrix();
        assert!(rho.fidelity_to_pure(&target_bell_state()).is_err());
    }

    #[test]
    fn tensor_then_partial_trace_roundtrips_ancilla() {
        let system = spin_superposition(1.1).to_density_matrix();
        let ancilla = photon_superposition(0.4).to_density_matrix();
        let joint = StateVector::tensor(&spin_superposition(1.1), &photon_superposition(0.4))
            .to_density_matrix();
        let back = joint.partial_trace(&[0]).unwrap();
        for (a, b) in back.matrix().iter().zip(system.matrix()) {
            assert!((a - b).norm() < EXACT_TOL);
        }
        let photon = joint.partial_trace(&[1]).unwrap();
        for (a, b) in photon.matrix().iter().zip(ancilla.matrix()) {
            assert!((a - b).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn pinch_zeroes_cross_blocks_and_keeps_diagonals() {
        let rho = target_bell_state().to_density_matrix();
        let dims = spin_photon_dims();
        let early = ops::level_projector(PHOTON_DIM, PHOTON_EARLY)
            .embed(&dims, &[1])
            .unwrap();
        let rest = Operator::identity(&dims)
            .add(&early.scale(-C64::ONE))
            .unwrap();
        let pinched = pinch(&rho, &[early, rest]).unwrap();
        let a = flat_index(&dims, &[1, PHOTON_EARLY]);
        let b = flat_index(&dims, &[0, PHOTON_LATE]);
        assert!(pinched.entry(a, b).norm() < EXACT_TOL);
        assert!((pinched.entry(a, a).re - 0.5).abs() < EXACT_TOL);
        assert!((pinched.entry(b, b).re - 0.5).abs() < EXACT_TOL);
    }

    #[test]
    fn jacobi_eigenvalues_match_known_spectra() {
        let rho = states::dephased_bell_state(0.6);
        let mut eigs = rho.eigenvalues();
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((eigs[0] - 0.8).abs() < 1e-9);
        assert!((eigs[1] - 0.2).abs() < 1e-9);
        for e in &eigs[2..] {
            assert!(e.abs() < 1e-9);
        }
        let mixed = DensityMatrix::maximally_mixed(&[2, 3]);
        for e in mixed.eigenvalues() {
            assert!((e - 1.0 / 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kraus_defect_flags_incomplete_sets() {
        let keep = ops::level_projector(2, 0);
        assert!(kraus_defect(&[keep.clone()]).unwrap() > 0.5);
        let full = [keep, ops::level_projector(2, 1)];
        assert!(kraus_defect(&full).unwrap() < EXACT_TOL);
    }
}
