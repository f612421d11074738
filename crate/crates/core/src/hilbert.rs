//! Truncated Fock-space registers, states, local operators and measurement.
//!
//! A register is an ordered list of sites with dimensions `d_i`. Basis index
//! arithmetic is row-major mixed radix with site 0 the most significant
//! digit, so `|a, b⟩` on dims `(da, db)` has index `a * db + b`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigenvalues, hermiticity_error, trace};
use crate::rng::{multinomial, rng_from_seed};
use crate::{CMatrix, CVector, Error, Result, C64};

/// How the levels of a site are labeled when a diagonal "charge" operator
/// is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    /// Levels `0..d-1`.
    Fock,
    /// Levels `-l..l` with `d = 2l + 1`; odd `d` only.
    Symmetric,
}

impl Labeling {
    /// Numerical label of each level `0..d`.
    pub fn labels(self, d: usize) -> Vec<f64> {
        match self {
            Labeling::Fock => (0..d).map(|k| k as f64).collect(),
            Labeling::Symmetric => {
                let l = (d / 2) as f64;
                (0..d).map(|k| k as f64 - l).collect()
            }
        }
    }

    fn check(self, d: usize) -> Result<()> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("site dimension {d} < 2")));
        }
        if self == Labeling::Symmetric && d.is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!(
                "symmetric labeling requires odd dimension, got {d}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegisterSpec {
    dims: Vec<usize>,
    labeling: Vec<Labeling>,
}

impl RegisterSpec {
    /// All sites Fock-labeled.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let labeling = vec![Labeling::Fock; dims.len()];
        Self::with_labeling(dims, labeling)
    }

    pub fn uniform(sites: usize, d: usize, labeling: Labeling) -> Result<Self> {
        Self::with_labeling(vec![d; sites], vec![labeling; sites])
    }

    pub fn with_labeling(dims: Vec<usize>, labeling: Vec<Labeling>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension("register has no sites".into()));
        }
        if dims.len() != labeling.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: labeling.len(),
            });
        }
        for (&d, &lab) in dims.iter().zip(&labeling) {
            lab.check(d)?;
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidDimension("total dimension overflows usize".into()))?;
        Ok(Self { dims, labeling })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn labeling(&self, site: usize) -> Labeling {
        self.labeling[site]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Stride of each site in the flat index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: digits.len(),
            });
        }
        let mut idx = 0;
        for (&k, &d) in digits.iter().zip(&self.dims) {
            if k >= d {
                return Err(Error::InvalidArgument(format!("level {k} out of range for d={d}")));
            }
            idx = idx * d + k;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            digits[i] = index % self.dims[i];
            index /= self.dims[i];
        }
        digits
    }

    /// Register restricted to `sites` (in the given order).
    pub fn subregister(&self, sites: &[usize]) -> Result<Self> {
        self.check_sites(sites)?;
        Self::with_labeling(
            sites.iter().map(|&s| self.dims[s]).collect(),
            sites.iter().map(|&s| self.labeling[s]).collect(),
        )
    }

    pub(crate) fn check_sites(&self, sites: &[usize]) -> Result<()> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty site list".into()));
        }
        for (i, &s) in sites.iter().enumerate() {
            if s >= self.dims.len() {
                return Err(Error::SiteOutOfRange {
                    site: s,
                    sites: self.dims.len(),
                });
            }
            if sites[..i].contains(&s) {
                return Err(Error::InvalidArgument(format!("site {s} repeated")));
            }
        }
        Ok(())
    }
}

/// Index bookkeeping for applying an operator on a subset of sites without
/// building the full embedding.
#[derive(Debug, Clone)]
pub struct LocalLayout {
    /// Flat offset of each local basis index (mixed radix over target sites).
    offsets: Vec<usize>,
    /// Flat index of every basis state whose target digits are all zero.
    bases: Vec<usize>,
}

impl LocalLayout {
    pub fn new(register: &RegisterSpec, sites: &[usize]) -> Result<Self> {
        register.check_sites(sites)?;
        let strides = register.strides();
        let dims = register.dims();

        let mut offsets = vec![0usize];
        for &s in sites {
            let mut next = Vec::with_capacity(offsets.len() * dims[s]);
            for &o in &offsets {
                for k in 0..dims[s] {
                    next.push(o + k * strides[s]);
                }
            }
            offsets = next;
        }

        let mut bases = vec![0usize];
        for s in 0..dims.len() {
            if sites.contains(&s) {
                continue;
            }
            let mut next = Vec::with_capacity(bases.len() * dims[s]);
            for &b in &bases {
                for k in 0..dims[s] {
                    next.push(b + k * strides[s]);
                }
            }
            bases = next;
        }
        Ok(Self { offsets, bases })
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// `amps ← M amps` on the target sites.
    pub fn apply(&self, matrix: &CMatrix, amps: &mut [C64]) {
        let m = self.offsets.len();
        debug_assert_eq!(matrix.nrows(), m);
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let mut out = vec![C64::new(0.0, 0.0); m];
        for &b in &self.bases {
            for (slot, &o) in buf.iter_mut().zip(&self.offsets) {
                *slot = amps[b + o];
            }
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, &v) in buf.iter().enumerate() {
                    acc += matrix[(r, c)] * v;
                }
                *o = acc;
            }
            for (&v, &o) in out.iter().zip(&self.offsets) {
                amps[b + o] = v;
            }
        }
    }

    /// Multiply amplitudes by a diagonal local operator.
    pub fn apply_diagonal(&self, diag: &[C64], amps: &mut [C64]) {
        for &b in &self.bases {
            for (&d, &o) in diag.iter().zip(&self.offsets) {
                amps[b + o] *= d;
            }
        }
    }

    fn embed_into(&self, matrix: &CMatrix, scale: C64, out: &mut CMatrix) {
        for &b in &self.bases {
            for (r, &orow) in self.offsets.iter().enumerate() {
                for (c, &ocol) in self.offsets.iter().enumerate() {
                    let v = matrix[(r, c)];
                    if v != C64::new(0.0, 0.0) {
                        out[(b + orow, b + ocol)] += scale * v;
                    }
                }
            }
        }
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: CVector,
    register: RegisterSpec,
}

pub const NORM_TOL: f64 = 1e-10;

impl QuantumState {
    /// Wrap amplitudes that must already be normalized to `NORM_TOL`.
    pub fn new(register: RegisterSpec, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != register.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: register.total_dim(),
                got: amplitudes.len(),
            });
        }
        let n = amplitudes.norm_squared();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state norm² = {n}, expected 1")));
        }
        Ok(Self { amplitudes, register })
    }

    /// Normalize arbitrary non-zero amplitudes.
    pub fn normalized(register: RegisterSpec, amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize zero vector".into()));
        }
        Self::new(register, amplitudes / C64::new(n, 0.0))
    }

    pub fn basis(register: RegisterSpec, digits: &[usize]) -> Result<Self> {
        let idx = register.index_of(digits)?;
        let mut amps = CVector::zeros(register.total_dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            amplitudes: amps,
            register,
        })
    }

    pub fn vacuum(register: RegisterSpec) -> Self {
        let mut amps = CVector::zeros(register.total_dim());
        amps[0] = C64::new(1.0, 0.0);
        Self {
            amplitudes: amps,
            register,
        }
    }

    /// Equal-weight superposition of all basis states.
    pub fn uniform(register: RegisterSpec) -> Self {
        let d = register.total_dim();
        let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        Self {
            amplitudes: CVector::from_element(d, a),
            register,
        }
    }

    pub(crate) fn from_raw(register: RegisterSpec, amplitudes: CVector) -> Self {
        Self { amplitudes, register }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Apply a local operator to `sites` (mixed-radix kernel, no embedding).
    pub fn apply_local(&mut self, matrix: &CMatrix, sites: &[usize]) -> Result<()> {
        let layout = LocalLayout::new(&self.register, sites)?;
        check_square(matrix, layout.local_dim())?;
        layout.apply(matrix, self.amplitudes.as_mut_slice());
        Ok(())
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        self.amplitudes.as_mut_slice()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
            register: self.register.clone(),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix over a register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    register: RegisterSpec,
}

impl DensityMatrix {
    /// Validated constructor: Hermitian to 1e-10, trace 1 to 1e-9, and
    /// eigenvalues ≥ -1e-8.
    pub fn new(register: RegisterSpec, entries: CMatrix) -> Result<Self> {
        let d = register.total_dim();
        check_square(&entries, d)?;
        if hermiticity_error(&entries) >= 1e-10 {
            return Err(Error::NotValid("Hermitian"));
        }
        if (trace(&entries) - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::NotValid("unit trace"));
        }
        let rho = Self { entries, register };
        if d <= crate::DENSE_LIMIT && rho.min_eigenvalue() < -1e-8 {
            return Err(Error::NotValid("positive semidefinite"));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &QuantumState) -> Self {
        state.to_density()
    }

    pub fn vacuum(register: RegisterSpec) -> Self {
        QuantumState::vacuum(register).to_density()
    }

    pub fn maximally_mixed(register: RegisterSpec) -> Self {
        let d = register.total_dim();
        Self {
            entries: CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
            register,
        }
    }

    pub(crate) fn from_raw(register: RegisterSpec, entries: CMatrix) -> Self {
        Self { entries, register }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries).first().copied().unwrap_or(0.0)
    }

    /// ρ ← U ρ U† with `U` acting on `sites`.
    pub fn apply_unitary(&mut self, u: &CMatrix, sites: &[usize]) -> Result<()> {
        let layout = LocalLayout::new(&self.register, sites)?;
        check_square(u, layout.local_dim())?;
        self.entries = conjugate_by(&layout, u, &self.entries);
        Ok(())
    }

    /// ρ ← Σ_k A_k ρ A_k† with each `A_k` acting on `sites`.
    pub fn apply_kraus(&mut self, ops: &[CMatrix], sites: &[usize]) -> Result<()> {
        let layout = LocalLayout::new(&self.register, sites)?;
        let d = self.dim();
        let mut acc = CMatrix::zeros(d, d);
        for a in ops {
            check_square(a, layout.local_dim())?;
            acc += conjugate_by(&layout, a, &self.entries);
        }
        self.entries = acc;
        Ok(())
    }

    /// (ρ + ρ†)/2.
    pub fn rehermitize(&mut self) {
        let adj = self.entries.adjoint();
        self.entries += adj;
        self.entries *= C64::new(0.5, 0.0);
    }
}

/// `A ρ A†` with `A` local on `layout`.
fn conjugate_by(layout: &LocalLayout, a: &CMatrix, rho: &CMatrix) -> CMatrix {
    let mut x = rho.clone();
    for mut col in x.column_iter_mut() {
        layout.apply(a, col.as_mut_slice());
    }
    // (A X†)† = X A†
    let mut y = x.adjoint();
    for mut col in y.column_iter_mut() {
        layout.apply(a, col.as_mut_slice());
    }
    y.adjoint()
}

fn check_square(m: &CMatrix, expected: usize) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: m.nrows(),
        });
    }
    Ok(())
}

/// A (possibly non-Hermitian) local operator with a scalar coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTerm {
    pub coefficient: C64,
    pub sites: Vec<usize>,
    pub matrix: CMatrix,
    hermitian: bool,
}

pub const HERMITIAN_TOL: f64 = 1e-12;

impl OperatorTerm {
    pub fn new(coefficient: C64, sites: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("operator matrix must be square".into()));
        }
        if sites.is_empty() {
            return Err(Error::InvalidArgument("operator term needs at least one site".into()));
        }
        Ok(Self {
            coefficient,
            sites,
            matrix,
            hermitian: false,
        })
    }

    /// A term flagged Hermitian; `coefficient * matrix` must be Hermitian to
    /// `HERMITIAN_TOL`.
    pub fn hermitian(coefficient: C64, sites: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let mut term = Self::new(coefficient, sites, matrix)?;
        if hermiticity_error(&term.scaled_matrix()) >= HERMITIAN_TOL {
            return Err(Error::NotValid("Hermitian"));
        }
        term.hermitian = true;
        Ok(term)
    }

    pub fn real(coefficient: f64, sites: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        Self::hermitian(C64::new(coefficient, 0.0), sites, matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn scaled_matrix(&self) -> CMatrix {
        &self.matrix * self.coefficient
    }

    pub fn check(&self, register: &RegisterSpec) -> Result<()> {
        register.check_sites(&self.sites)?;
        let m: usize = self.sites.iter().map(|&s| register.dims()[s]).product();
        check_square(&self.matrix, m)
    }
}

/// Bosonic ladder operators truncated to `d` levels.
#[derive(Debug, Clone)]
pub struct BosonicLadder {
    pub annihilate: CMatrix,
    pub create: CMatrix,
    pub number: CMatrix,
}

/// `a|k⟩ = √k |k-1⟩`, `a† = a^†`, `n = diag(0..d-1)`.
pub fn ladder_bosonic(d: usize) -> Result<BosonicLadder> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("d = {d} < 2")));
    }
    let mut a = CMatrix::zeros(d, d);
    for k in 1..d {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let number = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::new(r as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(BosonicLadder {
        create: a.adjoint(),
        annihilate: a,
        number,
    })
}

/// Unit-amplitude (gauge-link style) ladder operators.
#[derive(Debug, Clone)]
pub struct CyclicLadder {
    pub raise: CMatrix,
    pub lower: CMatrix,
    pub lz: CMatrix,
}

/// `raise|m⟩ = |m+1⟩` with the top level annihilated, `lower = raise†`, and
/// `lz` the diagonal of level labels.
pub fn ladder_cyclic(d: usize, labeling: Labeling) -> Result<CyclicLadder> {
    labeling.check(d)?;
    let mut raise = CMatrix::zeros(d, d);
    for k in 0..d - 1 {
        raise[(k + 1, k)] = C64::new(1.0, 0.0);
    }
    let labels = labeling.labels(d);
    let lz = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::new(labels[r], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(CyclicLadder {
        lower: raise.adjoint(),
        raise,
        lz,
    })
}

/// Full `D×D` matrix of `term` on `register`, identity on non-target sites.
pub fn embed(term: &OperatorTerm, register: &RegisterSpec) -> Result<CMatrix> {
    term.check(register)?;
    let d = register.total_dim();
    if d > crate::DENSE_LIMIT {
        return Err(Error::OverLimit {
            dim: d,
            limit: crate::DENSE_LIMIT,
        });
    }
    let layout = LocalLayout::new(register, &term.sites)?;
    let mut out = CMatrix::zeros(d, d);
    layout.embed_into(&term.matrix, term.coefficient, &mut out);
    Ok(out)
}

/// Expectation value `⟨O⟩` of a full-space operator.
pub trait Expectation {
    fn expectation(&self, op: &CMatrix) -> Result<C64>;
}

impl Expectation for QuantumState {
    fn expectation(&self, op: &CMatrix) -> Result<C64> {
        check_square(op, self.dim())?;
        Ok(self.amplitudes.dotc(&(op * &self.amplitudes)))
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &CMatrix) -> Result<C64> {
        check_square(op, self.dim())?;
        // Tr(ρO) = Σ_ij ρ_ij O_ji
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.entries[(i, j)] * op[(j, i)];
            }
        }
        Ok(acc)
    }
}

pub fn expectation<S: Expectation>(state: &S, op: &CMatrix) -> Result<C64> {
    state.expectation(op)
}

/// Reduced density matrix on `keep` (kept sites ordered ascending).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set is empty".into()));
    }
    let reg = rho.register();
    reg.check_sites(keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..reg.num_sites()).filter(|s| !kept.contains(s)).collect();

    let sub = reg.subregister(&kept)?;
    let keep_offsets = offsets_for(reg, &kept);
    let trace_offsets = offsets_for(reg, &traced);
    let dk = keep_offsets.len();
    let mut out = CMatrix::zeros(dk, dk);
    for (i, &oi) in keep_offsets.iter().enumerate() {
        for (j, &oj) in keep_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &trace_offsets {
                acc += rho.entries[(oi + t, oj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix::from_raw(sub, out))
}

fn offsets_for(reg: &RegisterSpec, sites: &[usize]) -> Vec<usize> {
    let strides = reg.strides();
    let mut offsets = vec![0usize];
    for &s in sites {
        let mut next = Vec::with_capacity(offsets.len() * reg.dims()[s]);
        for &o in &offsets {
            for k in 0..reg.dims()[s] {
                next.push(o + k * strides[s]);
            }
        }
        offsets = next;
    }
    offsets
}

/// Computational-basis outcome distribution of a state.
pub trait BasisDistribution {
    fn register_spec(&self) -> &RegisterSpec;
    fn basis_probabilities(&self) -> Vec<f64>;
}

impl BasisDistribution for QuantumState {
    fn register_spec(&self) -> &RegisterSpec {
        &self.register
    }
    fn basis_probabilities(&self) -> Vec<f64> {
        self.probabilities()
    }
}

impl BasisDistribution for DensityMatrix {
    fn register_spec(&self) -> &RegisterSpec {
        &self.register
    }
    fn basis_probabilities(&self) -> Vec<f64> {
        self.populations()
    }
}

/// Multinomial sample of `shots` computational-basis measurements. Keys are
/// per-site level tuples; only observed outcomes appear.
pub fn measure_sample<S: BasisDistribution>(state: &S, shots: u64, seed: u64) -> Result<BTreeMap<Vec<usize>, u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be ≥ 1".into()));
    }
    let probs = state.basis_probabilities();
    let mut rng = rng_from_seed(seed);
    let counts = multinomial(&mut rng, shots, &probs);
    let reg = state.register_spec();
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(i, c)| (reg.digits_of(i), c))
        .collect())
}
