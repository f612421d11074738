//! Closed-system evolution (exact and Trotterized), Lindblad integration,
//! channels, and circuit execution.

use std::io::Write;

use crate::gates::{photon_loss_channel, GateMatrix, KrausChannel};
use crate::hilbert::{embed, DensityMatrix, Expectation, LocalLayout, OperatorTerm, QuantumState, RegisterSpec};
use crate::linalg::expm_hermitian;
use crate::linalg::{hermitian_eigen, phase_propagator, SparseMatrix};
use crate::{CMatrix, CVector, Error, Result, C64, DENSE_LIMIT};

/// A sum of Hermitian local terms on a register. The term order is the
/// Trotter splitting order.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    terms: Vec<OperatorTerm>,
    register: RegisterSpec,
}

impl Hamiltonian {
    pub fn new(register: RegisterSpec, terms: Vec<OperatorTerm>) -> Result<Self> {
        for t in &terms {
            t.check(&register)?;
            if !t.is_hermitian() {
                return Err(Error::NotValid("Hermitian (Hamiltonian term not flagged)"));
            }
        }
        Ok(Self { terms, register })
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn dim(&self) -> usize {
        self.register.total_dim()
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let d = self.dim();
        check_dense(d)?;
        let mut h = CMatrix::zeros(d, d);
        for t in &self.terms {
            h += embed(t, &self.register)?;
        }
        Ok(h)
    }

    /// Upper bound on the spectral radius (sum of per-term max row sums).
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let m = t.scaled_matrix();
                (0..m.nrows())
                    .map(|r| m.row(r).iter().map(|z| z.norm()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .sum()
    }
}

fn check_dense(d: usize) -> Result<()> {
    if d > DENSE_LIMIT {
        Err(Error::OverLimit {
            dim: d,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Hamiltonian plus collapse operators with rates (1/time).
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: Hamiltonian,
    pub collapses: Vec<(OperatorTerm, f64)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Hamiltonian, collapses: Vec<(OperatorTerm, f64)>) -> Result<Self> {
        for (op, rate) in &collapses {
            if !(rate.is_finite() && *rate >= 0.0) {
                return Err(Error::InvalidArgument(format!("collapse rate {rate} must be ≥ 0")));
            }
            op.check(hamiltonian.register())?;
        }
        Ok(Self { hamiltonian, collapses })
    }

    pub fn max_rate(&self) -> f64 {
        self.collapses.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

/// Cached eigendecomposition of a Hamiltonian for repeated exact evolution.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl ExactPropagator {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let dense = h.to_dense()?;
        let (energies, vectors) = hermitian_eigen(&dense);
        Ok(Self { energies, vectors })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.dim() != self.energies.len() {
            return Err(Error::DimensionMismatch {
                expected: self.energies.len(),
                got: state.dim(),
            });
        }
        let mut coeffs = self.vectors.adjoint() * state.amplitudes();
        for (c, &e) in coeffs.iter_mut().zip(&self.energies) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        Ok(QuantumState::from_raw(state.register().clone(), &self.vectors * coeffs))
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        phase_propagator(&self.energies, &self.vectors, t)
    }
}

/// `e^{-iHt}|ψ⟩` by full eigendecomposition.
pub fn evolve_exact(state: &QuantumState, h: &Hamiltonian, t: f64) -> Result<QuantumState> {
    check_register(state.register(), h.register())?;
    ExactPropagator::new(h)?.evolve(state, t)
}

fn check_register(a: &RegisterSpec, b: &RegisterSpec) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: b.total_dim(),
            got: a.total_dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

impl TrotterOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::InvalidArgument(format!(
                "Trotter order must be 1 or 2, got {order}"
            ))),
        }
    }
}

/// One local factor `e^{-i c M τ}` of a Trotter step.
#[derive(Debug, Clone)]
pub struct TrotterFactor {
    pub sites: Vec<usize>,
    pub unitary: CMatrix,
    /// Set when `unitary` is diagonal: the phases `θ_k` of `diag(e^{iθ_k})`.
    pub diagonal_phases: Option<Vec<f64>>,
}

/// Factors of a single Trotter step of length `dt`, in application order:
/// order 1 is the term list; order 2 is the term list at `dt/2` followed by
/// its reverse at `dt/2`.
pub fn trotter_step_factors(h: &Hamiltonian, dt: f64, order: TrotterOrder) -> Vec<TrotterFactor> {
    let factor = |t: &OperatorTerm, tau: f64| {
        let m = t.scaled_matrix();
        let is_diag = (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)] == C64::new(0.0, 0.0)));
        if is_diag {
            let phases: Vec<f64> = (0..m.nrows()).map(|k| -m[(k, k)].re * tau).collect();
            let diag = CVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p)));
            TrotterFactor {
                sites: t.sites.clone(),
                unitary: CMatrix::from_diagonal(&diag),
                diagonal_phases: Some(phases),
            }
        } else {
            TrotterFactor {
                sites: t.sites.clone(),
                unitary: expm_hermitian(&m, tau),
                diagonal_phases: None,
            }
        }
    };
    match order {
        TrotterOrder::First => h.terms().iter().map(|t| factor(t, dt)).collect(),
        TrotterOrder::Second => {
            let half: Vec<TrotterFactor> = h.terms().iter().map(|t| factor(t, dt / 2.0)).collect();
            let mut seq = half.clone();
            seq.extend(half.into_iter().rev());
            seq
        }
    }
}

/// Product-formula evolution: `steps` repetitions of the splitting of
/// `e^{-iH t/steps}` over the Hamiltonian's terms.
pub fn trotter_evolve(
    state: &QuantumState,
    h: &Hamiltonian,
    t: f64,
    steps: usize,
    order: TrotterOrder,
) -> Result<QuantumState> {
    check_register(state.register(), h.register())?;
    if steps == 0 {
        return Err(Error::InvalidArgument("Trotter steps must be ≥ 1".into()));
    }
    let factors = trotter_step_factors(h, t / steps as f64, order);
    let layouts = factors
        .iter()
        .map(|f| LocalLayout::new(h.register(), &f.sites))
        .collect::<Result<Vec<_>>>()?;
    let diagonals: Vec<Option<Vec<C64>>> = factors
        .iter()
        .map(|f| {
            f.diagonal_phases
                .as_ref()
                .map(|ph| ph.iter().map(|&p| C64::from_polar(1.0, p)).collect())
        })
        .collect();
    let mut out = state.clone();
    let amps = out.amplitudes_mut();
    for _ in 0..steps {
        for ((f, layout), diag) in factors.iter().zip(&layouts).zip(&diagonals) {
            match diag {
                Some(diag) => layout.apply_diagonal(diag, amps),
                None => layout.apply(&f.unitary, amps),
            }
        }
    }
    Ok(out)
}

/// Fixed-step RK4 integrator for `dρ/dt = −i[H,ρ] + Σ κ (LρL† − ½{L†L,ρ})`.
///
/// Written as `−i(H_eff ρ − ρ H_eff†) + Σ κ LρL†` with
/// `H_eff = H − (i/2) Σ κ L†L`, all operators sparse.
#[derive(Debug, Clone)]
pub struct LindbladSolver {
    register: RegisterSpec,
    heff: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    norm_bound: f64,
    max_rate: f64,
}

/// Allowed |Tr ρ − 1| before integration is aborted.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

impl LindbladSolver {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        let h = model.hamiltonian.to_dense()?;
        Self::from_parts(
            model.hamiltonian.register().clone(),
            &h,
            &model.collapses,
            model.hamiltonian.norm_bound(),
        )
    }

    fn from_parts(
        register: RegisterSpec,
        h: &CMatrix,
        collapses: &[(OperatorTerm, f64)],
        norm_bound: f64,
    ) -> Result<Self> {
        let mut heff = h.clone();
        let mut jumps = Vec::new();
        let mut max_rate: f64 = 0.0;
        for (op, rate) in collapses {
            if *rate == 0.0 {
                continue;
            }
            max_rate = max_rate.max(*rate);
            let l = embed(op, &register)?;
            heff -= (l.adjoint() * &l) * C64::new(0.0, 0.5 * rate);
            jumps.push(SparseMatrix::from_dense(&(l * C64::new(rate.sqrt(), 0.0)), 0.0));
        }
        Ok(Self {
            register,
            heff: SparseMatrix::from_dense(&heff, 0.0),
            jumps,
            norm_bound,
            max_rate,
        })
    }

    /// Solver for `H_static + factor · H_mod` sharing one set of collapses;
    /// used for piecewise-constant modulated couplings.
    pub fn with_modulation(model: &LindbladModel, modulation: &CMatrix, factor: f64) -> Result<Self> {
        let h = model.hamiltonian.to_dense()? + modulation * C64::new(factor, 0.0);
        let bound = model.hamiltonian.norm_bound()
            + factor.abs() * crate::linalg::max_abs(modulation) * modulation.nrows() as f64;
        Self::from_parts(model.hamiltonian.register().clone(), &h, &model.collapses, bound)
    }

    /// Documented stability bound: `0.1 / max(‖H‖ estimate, max κ)`.
    pub fn stable_dt(&self) -> f64 {
        0.1 / self.norm_bound.max(self.max_rate).max(1e-12)
    }

    fn rhs(&self, rho: &CMatrix, out: &mut CMatrix) {
        out.fill(C64::new(0.0, 0.0));
        let mi = C64::new(0.0, -1.0);
        self.heff.mul_acc(rho, mi, out);
        self.heff.mul_adjoint_right_acc(rho, -mi, out);
        let n = rho.nrows();
        let mut tmp = CMatrix::zeros(n, n);
        for l in &self.jumps {
            tmp.fill(C64::new(0.0, 0.0));
            l.mul_acc(rho, C64::new(1.0, 0.0), &mut tmp);
            l.mul_adjoint_right_acc(&tmp, C64::new(1.0, 0.0), out);
        }
    }

    fn rk4_step(&self, rho: &mut CMatrix, h: f64, ws: &mut [CMatrix; 5]) {
        let [k1, k2, k3, k4, tmp] = ws;
        let hc = C64::new(h, 0.0);
        self.rhs(rho, k1);
        tmp.copy_from(rho);
        axpy(tmp, hc * 0.5, k1);
        self.rhs(tmp, k2);
        tmp.copy_from(rho);
        axpy(tmp, hc * 0.5, k2);
        self.rhs(tmp, k3);
        tmp.copy_from(rho);
        axpy(tmp, hc, k3);
        self.rhs(tmp, k4);
        let sixth = hc / 6.0;
        axpy(rho, sixth, k1);
        axpy(rho, sixth * 2.0, k2);
        axpy(rho, sixth * 2.0, k3);
        axpy(rho, sixth, k4);
        // Re-Hermitize.
        let adj = rho.adjoint();
        *rho += adj;
        *rho *= C64::new(0.5, 0.0);
    }

    /// Integrate `rho` forward by `t` with steps no longer than `dt`.
    pub fn evolve(&self, rho: &DensityMatrix, t: f64, dt: f64) -> Result<DensityMatrix> {
        Ok(self.trajectory(rho, &[t], dt)?.states.pop().expect("one sample"))
    }

    /// Integrate and record ρ at each of `times` (ascending, ≥ 0). Between
    /// samples the interval is split into `ceil(Δ/dt)` equal RK4 steps.
    pub fn trajectory(&self, rho: &DensityMatrix, times: &[f64], dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if rho.register().dims() != self.register.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.register.total_dim(),
                got: rho.dim(),
            });
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sample times must be ascending and ≥ 0".into()));
        }
        let n = rho.dim();
        let mut ws = [
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
        ];
        let mut cur = rho.entries().clone();
        let tr0 = crate::linalg::trace(&cur).re;
        let mut t_now = 0.0;
        let mut states = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - t_now;
            if span > 0.0 {
                let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for s in 0..steps {
                    self.rk4_step(&mut cur, h, &mut ws);
                    let tr = crate::linalg::trace(&cur).re;
                    // |ρ_ij| ≤ 1 for any density matrix; catches blow-up of
                    // coherences, which the trace alone does not see.
                    let blown = cur.iter().any(|z| !(z.norm() <= 1.0 + TRACE_DRIFT_LIMIT));
                    if blown || !tr.is_finite() || (tr - tr0).abs() > TRACE_DRIFT_LIMIT {
                        return Err(Error::Diverged(format!(
                            "trace {tr} or coherence magnitude out of bounds at t = {:.6} (dt = {h}, stable dt ≈ {:.3e})",
                            t_now + (s + 1) as f64 * h,
                            self.stable_dt()
                        )));
                    }
                }
            }
            t_now = target;
            states.push(DensityMatrix::from_raw(self.register.clone(), cur.clone()));
        }
        Ok(Trajectory {
            times: times.to_vec(),
            states,
        })
    }
}

/// `y += a x` elementwise.
fn axpy(y: &mut CMatrix, a: C64, x: &CMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Density matrices sampled at the requested times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    /// `⟨O⟩(t)` (real part) for each observable; outer index = observable.
    pub fn observables(&self, ops: &[CMatrix]) -> Result<Vec<Vec<f64>>> {
        ops.iter()
            .map(|op| self.states.iter().map(|r| Ok(r.expectation(op)?.re)).collect())
            .collect()
    }

    /// CSV with a `time` column followed by one column per observable.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[&str], ops: &[CMatrix]) -> std::io::Result<()> {
        let values = self
            .observables(ops)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        write!(w, "time")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for col in &values {
                write!(w, ",{}", col[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrate the master equation, sampling ρ at `times`.
pub fn lindblad_evolve(rho: &DensityMatrix, model: &LindbladModel, times: &[f64], dt: f64) -> Result<Trajectory> {
    LindbladSolver::new(model)?.trajectory(rho, times, dt)
}

/// `ρ ← Σ A_k ρ A_k†` on `sites`.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel, sites: &[usize]) -> Result<DensityMatrix> {
    check_site_dims(rho.register(), sites, channel.dims())?;
    let mut out = rho.clone();
    out.apply_kraus(channel.operators(), sites)?;
    Ok(out)
}

fn check_site_dims(reg: &RegisterSpec, sites: &[usize], dims: &[usize]) -> Result<()> {
    reg.check_sites(sites)?;
    let have: Vec<usize> = sites.iter().map(|&s| reg.dims()[s]).collect();
    if have != dims {
        return Err(Error::DimensionMismatch {
            expected: have.iter().product(),
            got: dims.iter().product(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Operation {
    Gate { gate: GateMatrix, sites: Vec<usize> },
    Channel { channel: KrausChannel, sites: Vec<usize> },
}

/// Ordered list of gate and channel applications.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    ops: Vec<Operation>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_gate(&mut self, gate: GateMatrix, sites: Vec<usize>) {
        self.ops.push(Operation::Gate { gate, sites });
    }

    pub fn push_channel(&mut self, channel: KrausChannel, sites: Vec<usize>) {
        self.ops.push(Operation::Channel { channel, sites });
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn operations(&self) -> &[Operation] {
        &self.ops
    }

    /// Adjoint circuit; fails if it contains channels.
    pub fn inverse(&self) -> Result<Self> {
        let ops = self
            .ops
            .iter()
            .rev()
            .map(|op| match op {
                Operation::Gate { gate, sites } => Ok(Operation::Gate {
                    gate: gate.adjoint(),
                    sites: sites.clone(),
                }),
                Operation::Channel { .. } => Err(Error::InvalidArgument("channels are not invertible".into())),
            })
            .collect::<Result<_>>()?;
        Ok(Self { ops })
    }
}

/// State carried through a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Pure(QuantumState),
    Mixed(DensityMatrix),
}

impl SimState {
    pub fn register(&self) -> &RegisterSpec {
        match self {
            SimState::Pure(s) => s.register(),
            SimState::Mixed(r) => r.register(),
        }
    }

    pub fn into_density(self) -> DensityMatrix {
        match self {
            SimState::Pure(s) => s.to_density(),
            SimState::Mixed(r) => r,
        }
    }
}

/// Photon loss of strength `loss` applied to every target site after each
/// gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateNoise {
    pub loss: f64,
}

/// Run a circuit. Noise or channel operations promote a pure state to a
/// density matrix.
pub fn circuit_run(state: SimState, circuit: &Circuit, noise: Option<&GateNoise>) -> Result<SimState> {
    let needs_mixed = noise.is_some() || circuit.ops.iter().any(|o| matches!(o, Operation::Channel { .. }));
    let mut state = match (state, needs_mixed) {
        (SimState::Pure(s), true) => SimState::Mixed(s.to_density()),
        (s, _) => s,
    };
    let reg = state.register().clone();
    for op in &circuit.ops {
        match op {
            Operation::Gate { gate, sites } => {
                check_site_dims(&reg, sites, gate.dims())?;
                match &mut state {
                    SimState::Pure(s) => s.apply_local(gate.matrix(), sites)?,
                    SimState::Mixed(r) => r.apply_unitary(gate.matrix(), sites)?,
                }
                if let (Some(n), SimState::Mixed(r)) = (noise, &mut state) {
                    for &s in sites {
                        let ch = photon_loss_channel(reg.dims()[s], n.loss)?;
                        r.apply_kraus(ch.operators(), &[s])?;
                    }
                }
            }
            Operation::Channel { channel, sites } => {
                check_site_dims(&reg, sites, channel.dims())?;
                if let SimState::Mixed(r) = &mut state {
                    r.apply_kraus(channel.operators(), sites)?;
                }
            }
        }
    }
    Ok(state)
}
