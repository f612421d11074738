//! Cavity-native gates (SNAP, displacement, beam splitter), qudit Clifford
//! gates, and the photon-loss channel.
//!
//! Generators are exponentiated through Hermitian eigendecomposition, so
//! every constructor returns a unitary to round-off. Displacements act on a
//! truncated mode: coherent-state statistics are only faithful while
//! `|α|² ≪ d`, and no automatic dimension inflation is performed.

use std::f64::consts::PI;

use crate::hilbert::ladder_bosonic;
use crate::linalg::{expm_antihermitian, identity, kron, max_abs_diff, unitarity_error};
use crate::{CMatrix, Error, Result, C64};

pub const UNITARY_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A unitary on one or two sites with the given per-target dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl GateMatrix {
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        if unitarity_error(&matrix) >= UNITARY_TOL {
            return Err(Error::NotValid("unitary"));
        }
        Ok(Self { matrix, dims })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// `self · other` (other applied first).
    pub fn compose(&self, other: &GateMatrix) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            dims: self.dims.clone(),
        })
    }

    /// Tensor product, `self` on the more significant site.
    pub fn tensor(&self, other: &GateMatrix) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            matrix: kron(&self.matrix, &other.matrix),
            dims,
        }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            matrix: identity(n),
            dims,
        }
    }

    pub(crate) fn from_unitary_unchecked(matrix: CMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    dims: Vec<usize>,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if operators.is_empty() {
            return Err(Error::InvalidArgument(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        let mut sum = CMatrix::zeros(n, n);
        for a in &operators {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.nrows(),
                });
            }
            sum += a.adjoint() * a;
        }
        if max_abs_diff(&sum, &identity(n)) >= COMPLETENESS_TOL {
            return Err(Error::NotValid("trace preserving (Σ A†A ≠ I)"));
        }
        Ok(Self { operators, dims })
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            operators: vec![identity(n)],
            dims,
        }
    }

    pub fn completeness_error(&self) -> f64 {
        let n: usize = self.dims.iter().product();
        let sum = self
            .operators
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, a| acc + a.adjoint() * a);
        max_abs_diff(&sum, &identity(n))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(format!("d = {d} < 2")))
    } else {
        Ok(())
    }
}

/// Selective number-dependent arbitrary phase: `diag(e^{iθ_0}, …)`.
pub fn snap(phases: &[f64]) -> Result<GateMatrix> {
    check_dim(phases.len())?;
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("SNAP phases must be finite".into()));
    }
    let d = phases.len();
    let mut m = CMatrix::zeros(d, d);
    for (k, &th) in phases.iter().enumerate() {
        m[(k, k)] = C64::from_polar(1.0, th);
    }
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d]))
}

/// `exp(α a† − α* a)` on a mode truncated to `d` levels.
pub fn displacement(alpha: C64, d: usize) -> Result<GateMatrix> {
    check_dim(d)?;
    let l = ladder_bosonic(d)?;
    let g = &l.create * alpha - &l.annihilate * alpha.conj();
    Ok(GateMatrix::from_unitary_unchecked(expm_antihermitian(&g), vec![d]))
}

/// `exp(θ(e^{iφ} a₁†a₂ − e^{−iφ} a₁a₂†))` on two modes; conserves n₁+n₂.
pub fn beam_splitter(theta: f64, phi: f64, d1: usize, d2: usize) -> Result<GateMatrix> {
    check_dim(d1)?;
    check_dim(d2)?;
    let l1 = ladder_bosonic(d1)?;
    let l2 = ladder_bosonic(d2)?;
    let hop = kron(&l1.create, &l2.annihilate) * C64::from_polar(theta, phi);
    let g = &hop - hop.adjoint();
    Ok(GateMatrix::from_unitary_unchecked(expm_antihermitian(&g), vec![d1, d2]))
}

/// Cyclic shift `X|k⟩ = |k+1 mod d⟩`.
pub fn qudit_x(d: usize) -> Result<GateMatrix> {
    check_dim(d)?;
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        m[((k + 1) % d, k)] = C64::new(1.0, 0.0);
    }
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d]))
}

/// Clock `Z = diag(ω^k)`, `ω = e^{2πi/d}`.
pub fn qudit_z(d: usize) -> Result<GateMatrix> {
    check_dim(d)?;
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        m[(k, k)] = C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64);
    }
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d]))
}

/// `CSUM|a⟩|b⟩ = |a⟩|(a+b) mod d⟩`, control on the first site.
pub fn csum(d: usize) -> Result<GateMatrix> {
    check_dim(d)?;
    let n = d * d;
    let mut m = CMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            m[(a * d + (a + b) % d, a * d + b)] = C64::new(1.0, 0.0);
        }
    }
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d, d]))
}

/// CSUM on a pair of sites that must share a dimension.
pub fn csum_dims(d_control: usize, d_target: usize) -> Result<GateMatrix> {
    if d_control != d_target {
        return Err(Error::InvalidDimension(format!(
            "CSUM needs equal dimensions, got {d_control} and {d_target}"
        )));
    }
    csum(d_control)
}

/// Two-level rotation on levels `j < k`:
/// `[[cos θ, −e^{iφ} sin θ], [e^{−iφ} sin θ, cos θ]]`.
pub fn givens(d: usize, j: usize, k: usize, theta: f64, phi: f64) -> Result<GateMatrix> {
    check_dim(d)?;
    if j >= k || k >= d {
        return Err(Error::InvalidArgument(format!(
            "givens levels must satisfy 0 ≤ j < k < d, got j={j} k={k} d={d}"
        )));
    }
    let mut m = identity(d);
    let (s, c) = theta.sin_cos();
    m[(j, j)] = C64::new(c, 0.0);
    m[(k, k)] = C64::new(c, 0.0);
    m[(j, k)] = -C64::from_polar(s, phi);
    m[(k, j)] = C64::from_polar(s, -phi);
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d]))
}

/// Diagonal `e^{−iγ[a=b]}` on two qudits: phase on monochromatic edges.
pub fn edge_phase_separator(d: usize, gamma: f64) -> Result<GateMatrix> {
    check_dim(d)?;
    let n = d * d;
    let mut m = identity(n);
    for a in 0..d {
        m[(a * d + a, a * d + a)] = C64::from_polar(1.0, -gamma);
    }
    Ok(GateMatrix::from_unitary_unchecked(m, vec![d, d]))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Amplitude damping of a truncated mode with loss probability `γ` per photon.
pub fn photon_loss_channel(d: usize, gamma: f64) -> Result<KrausChannel> {
    check_dim(d)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("loss γ = {gamma} outside [0, 1]")));
    }
    let mut ops = Vec::with_capacity(d);
    for k in 0..d {
        let mut a = CMatrix::zeros(d, d);
        let mut nonzero = false;
        for n in k..d {
            let w = binomial(n, k) * gamma.powi(k as i32) * (1.0 - gamma).powi((n - k) as i32);
            if w > 0.0 {
                a[(n - k, n)] = C64::new(w.sqrt(), 0.0);
                nonzero = true;
            }
        }
        if nonzero {
            ops.push(a);
        }
    }
    KrausChannel::new(ops, vec![d])
}

/// Population transfer of the loss channel on a single mode's diagonal:
/// `p'(m) = Σ_{n≥m} C(n, n−m) γ^{n−m} (1−γ)^m p(n)`. The loss channel maps
/// diagonal states to diagonal states, so this is exact for basis-measurement
/// statistics.
pub fn photon_loss_populations(probs: &[f64], gamma: f64) -> Vec<f64> {
    let d = probs.len();
    let mut out = vec![0.0; d];
    for (n, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, slot) in out.iter_mut().enumerate().take(n + 1) {
            let k = n - m;
            *slot += p * binomial(n, k) * gamma.powi(k as i32) * (1.0 - gamma).powi(m as i32);
        }
    }
    out
}
