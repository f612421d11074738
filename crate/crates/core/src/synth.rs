//! Unitary synthesis from displacement, SNAP and beam-splitter blocks.
//!
//! The ansatz acts on a truncated workspace (each mode may carry more
//! levels than the target). Fidelity is scored on the computational
//! subspace, `|Tr(T† P†UP)|² / D²`, and the objective adds the average
//! population that leaks out of that subspace. Gradients are central finite
//! differences; the optimizer is Adam with random restarts.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gates::{beam_splitter, displacement, snap, GateMatrix};
use crate::hilbert::{embed, OperatorTerm, RegisterSpec};
use crate::linalg::identity;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{CMatrix, Error, Result, C64, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Displacement(usize),
    Snap(usize),
    /// Modes `(a, b)` with `a < b`.
    BeamSplitter(usize, usize),
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Displacement(m) => write!(f, "D{m}"),
            Block::Snap(m) => write!(f, "S{m}"),
            Block::BeamSplitter(a, b) => write!(f, "B{a}-{b}"),
        }
    }
}

/// Workspace dimensions plus an ordered block list; block 0 acts first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzLayout {
    dims: Vec<usize>,
    blocks: Vec<Block>,
}

impl AnsatzLayout {
    pub fn new(dims: Vec<usize>, blocks: Vec<Block>) -> Result<Self> {
        RegisterSpec::new(dims.clone())?;
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("layout needs at least one block".into()));
        }
        let total: usize = dims.iter().product();
        if total > DENSE_LIMIT {
            return Err(Error::OverLimit {
                dim: total,
                limit: DENSE_LIMIT,
            });
        }
        for b in &blocks {
            let ok = match *b {
                Block::Displacement(m) | Block::Snap(m) => m < dims.len(),
                Block::BeamSplitter(a, c) => a < c && c < dims.len(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "block {b} does not fit {} modes",
                    dims.len()
                )));
            }
        }
        Ok(Self { dims, blocks })
    }

    /// Parse a layout string: comma- or space-separated tokens `D<m>`,
    /// `S<m>`, `B<a>-<b>`, and repetitions `N*[...]` (nestable).
    pub fn parse(dims: Vec<usize>, spec: &str) -> Result<Self> {
        let tokens = tokenize(spec)?;
        let mut pos = 0;
        let blocks = parse_seq(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("unexpected `{}` in layout", tokens[pos])));
        }
        Self::new(dims, blocks)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_arity(&self, b: &Block) -> usize {
        match *b {
            Block::Displacement(_) | Block::BeamSplitter(..) => 2,
            Block::Snap(m) => self.dims[m],
        }
    }

    pub fn num_params(&self) -> usize {
        self.blocks.iter().map(|b| self.block_arity(b)).sum()
    }

    /// Layout as a flat token string that [`AnsatzLayout::parse`] accepts.
    pub fn spec_string(&self) -> String {
        self.blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
    }

    fn block_unitary(&self, b: &Block, p: &[f64]) -> Result<CMatrix> {
        let reg = RegisterSpec::new(self.dims.clone())?;
        let (sites, local) = match *b {
            Block::Displacement(m) => (vec![m], displacement(C64::new(p[0], p[1]), self.dims[m])?),
            Block::Snap(m) => (vec![m], snap(p)?),
            Block::BeamSplitter(a, c) => (vec![a, c], beam_splitter(p[0], p[1], self.dims[a], self.dims[c])?),
        };
        embed(
            &OperatorTerm::new(C64::new(1.0, 0.0), sites, local.into_matrix())?,
            &reg,
        )
    }

    fn block_unitaries(&self, params: &[f64]) -> Result<Vec<CMatrix>> {
        let mut at = 0;
        self.blocks
            .iter()
            .map(|b| {
                let k = self.block_arity(b);
                let u = self.block_unitary(b, &params[at..at + k]);
                at += k;
                u
            })
            .collect()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(())
    }
}

fn tokenize(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' | ']' | '*' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            ',' | ' ' | '\t' | '\n' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c if c.is_ascii_alphanumeric() || c == '-' => cur.push(c),
            c => return Err(Error::Parse(format!("unexpected character {c:?} in layout"))),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn parse_seq(tokens: &[String], pos: &mut usize) -> Result<Vec<Block>> {
    let mut blocks = Vec::new();
    while *pos < tokens.len() && tokens[*pos] != "]" {
        let tok = &tokens[*pos];
        if tokens.get(*pos + 1).map(String::as_str) == Some("*") {
            let n: usize = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad repeat count `{tok}`")))?;
            if tokens.get(*pos + 2).map(String::as_str) != Some("[") {
                return Err(Error::Parse("expected `[` after repeat count".into()));
            }
            *pos += 3;
            let inner = parse_seq(tokens, pos)?;
            if tokens.get(*pos).map(String::as_str) != Some("]") {
                return Err(Error::Parse("unclosed `[` in layout".into()));
            }
            *pos += 1;
            for _ in 0..n {
                blocks.extend_from_slice(&inner);
            }
        } else {
            blocks.push(tok.parse()?);
            *pos += 1;
        }
    }
    Ok(blocks)
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(tok: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown layout token `{tok}`"));
        let (kind, rest) = tok.split_at(tok.chars().next().ok_or_else(bad)?.len_utf8());
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match kind {
            "D" => Ok(Block::Displacement(num(rest)?)),
            "S" => Ok(Block::Snap(num(rest)?)),
            "B" => {
                let (a, b) = rest.split_once('-').ok_or_else(bad)?;
                Ok(Block::BeamSplitter(num(a)?, num(b)?))
            }
            _ => Err(bad()),
        }
    }
}

/// Ordered product of the layout's blocks on the full workspace.
pub fn ansatz_unitary(layout: &AnsatzLayout, params: &[f64]) -> Result<GateMatrix> {
    layout.check_params(params)?;
    let mut u = identity(layout.dims.iter().product());
    for b in layout.block_unitaries(params)? {
        u = b * u;
    }
    GateMatrix::new(u, layout.dims.clone())
}

/// `|Tr(U†V)|² / D²`.
pub fn fidelity(u: &GateMatrix, v: &GateMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(trace_fidelity(u.matrix(), v.matrix()))
}

fn trace_fidelity(u: &CMatrix, v: &CMatrix) -> f64 {
    let d = u.nrows() as f64;
    let tr: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    (tr.norm_sqr() / (d * d)).min(1.0)
}

/// Weight of the leakage term in the synthesis objective.
pub const LEAKAGE_WEIGHT: f64 = 1.0;

/// A target unitary embedded in a (possibly larger) workspace.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    layout: AnsatzLayout,
    target: GateMatrix,
    /// Workspace indices of the computational basis, in target order.
    subspace: Vec<usize>,
}

impl SynthesisProblem {
    pub fn new(target: &GateMatrix, layout: &AnsatzLayout) -> Result<Self> {
        if target.dims().len() != layout.dims.len() || target.dims().iter().zip(&layout.dims).any(|(t, w)| t > w) {
            return Err(Error::InvalidArgument(format!(
                "target dims {:?} do not fit workspace {:?}",
                target.dims(),
                layout.dims
            )));
        }
        let comp = RegisterSpec::new(target.dims().to_vec())?;
        let ws = RegisterSpec::new(layout.dims.clone())?;
        let subspace = (0..comp.total_dim())
            .map(|i| ws.index_of(&comp.digits_of(i)))
            .collect::<Result<_>>()?;
        Ok(Self {
            layout: layout.clone(),
            target: target.clone(),
            subspace,
        })
    }

    pub fn layout(&self) -> &AnsatzLayout {
        &self.layout
    }

    pub fn target(&self) -> &GateMatrix {
        &self.target
    }

    fn project(&self, u: &CMatrix) -> CMatrix {
        let n = self.subspace.len();
        CMatrix::from_fn(n, n, |r, c| u[(self.subspace[r], self.subspace[c])])
    }

    /// `(subspace fidelity, average leakage)` of a workspace unitary.
    pub fn score(&self, u: &CMatrix) -> (f64, f64) {
        let sub = self.project(u);
        let n = self.subspace.len() as f64;
        let kept: f64 = sub.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        (trace_fidelity(self.target.matrix(), &sub), (1.0 - kept).max(0.0))
    }

    pub fn fidelity(&self, params: &[f64]) -> Result<f64> {
        Ok(self.score(ansatz_unitary(&self.layout, params)?.matrix()).0)
    }

    /// `1 − F + LEAKAGE_WEIGHT · leakage`.
    pub fn objective(&self, params: &[f64]) -> Result<f64> {
        let (f, l) = self.score(ansatz_unitary(&self.layout, params)?.matrix());
        Ok(1.0 - f + LEAKAGE_WEIGHT * l)
    }

    /// Central finite differences of [`objective`](Self::objective).
    /// Block unitaries are cached: perturbing a parameter only rebuilds
    /// its own block between precomputed prefix and suffix products.
    pub fn gradient(&self, params: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        self.layout.check_params(params)?;
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be > 0")));
        }
        let blocks = self.layout.block_unitaries(params)?;
        let dim = blocks[0].nrows();
        // prefix[k] = B_{k−1} ⋯ B_0, suffix[k] = B_last ⋯ B_{k+1}.
        let mut prefix = vec![identity(dim)];
        for b in &blocks {
            prefix.push(b * prefix.last().expect("non-empty"));
        }
        let mut suffix = vec![identity(dim); blocks.len()];
        for k in (0..blocks.len().saturating_sub(1)).rev() {
            suffix[k] = &suffix[k + 1] * &blocks[k + 1];
        }
        let mut grad = Vec::with_capacity(params.len());
        let mut at = 0;
        let mut p = params.to_vec();
        for (k, b) in self.layout.blocks.iter().enumerate() {
            let arity = self.layout.block_arity(b);
            for j in at..at + arity {
                let mut eval = |x: f64| -> Result<f64> {
                    p[j] = x;
                    let bu = self.layout.block_unitary(b, &p[at..at + arity])?;
                    let u = &suffix[k] * bu * &prefix[k];
                    let (f, l) = self.score(&u);
                    Ok(1.0 - f + LEAKAGE_WEIGHT * l)
                };
                let plus = eval(params[j] + epsilon)?;
                let minus = eval(params[j] - epsilon)?;
                p[j] = params[j];
                grad.push((plus - minus) / (2.0 * epsilon));
            }
            at += arity;
        }
        Ok(grad)
    }
}

/// Central-difference gradient of `1 − F (+ leakage)` for `target`.
pub fn gradient(layout: &AnsatzLayout, params: &[f64], target: &GateMatrix, epsilon: f64) -> Result<Vec<f64>> {
    SynthesisProblem::new(target, layout)?.gradient(params, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub step: f64,
    pub iters: usize,
    pub restarts: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step: 0.05,
            iters: 2000,
            restarts: 8,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-5,
        }
    }
}

impl OptimizerConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.step > 0.0) {
            v.push(format!("optimizer step = {} must be > 0", self.step));
        }
        if self.restarts == 0 {
            v.push("optimizer restarts must be ≥ 1".to_string());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                v.push(format!("optimizer {name} = {b} must lie in [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            v.push(format!("finite-difference epsilon = {} must be > 0", self.epsilon));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub params: Vec<f64>,
    pub fidelity: f64,
    pub leakage: f64,
    pub objective: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Index of the winning restart.
    pub best_restart: usize,
    /// Objective after each iteration of the winning restart.
    pub trace: Vec<f64>,
}

/// Random start: angles in `[−π, π]`, displacement parts in `[−1, 1]`.
fn initial_params(layout: &AnsatzLayout, seed: u64) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(layout.num_params());
    for b in &layout.blocks {
        let (scale, k) = match b {
            Block::Displacement(_) => (1.0, 2),
            _ => (PI, layout.block_arity(b)),
        };
        out.extend((0..k).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)));
    }
    out
}

/// One Adam run; returns the best point visited and the objective trace.
fn adam_run(problem: &SynthesisProblem, start: Vec<f64>, opt: &OptimizerConfig) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let n = start.len();
    let mut x = start;
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut best_x = x.clone();
    let mut best = problem.objective(&x)?;
    let mut trace = Vec::with_capacity(opt.iters);
    for t in 1..=opt.iters {
        let g = problem.gradient(&x, opt.epsilon)?;
        let c1 = 1.0 - opt.beta1.powi(t as i32);
        let c2 = 1.0 - opt.beta2.powi(t as i32);
        for i in 0..n {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            x[i] -= opt.step * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-12);
        }
        let f = problem.objective(&x)?;
        trace.push(f);
        if f < best {
            best = f;
            best_x.clone_from(&x);
        }
    }
    Ok((best_x, best, trace))
}

/// Adam on the synthesis objective from `opt.restarts` random starts (run
/// in parallel, restart `r` seeded with `derive_seed(seed, r)`); the lowest
/// objective wins, ties to the lower restart index.
pub fn synthesize(
    target: &GateMatrix,
    layout: &AnsatzLayout,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<SynthesisResult> {
    if let Some(msg) = opt.violations().first() {
        return Err(Error::InvalidArgument(msg.clone()));
    }
    let problem = SynthesisProblem::new(target, layout)?;
    let runs = (0..opt.restarts)
        .into_par_iter()
        .map(|r| adam_run(&problem, initial_params(layout, derive_seed(seed, r as u64)), opt))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    let (params, objective, trace) = runs.into_iter().nth(best).expect("restarts ≥ 1");
    let (fidelity, leakage) = problem.score(ansatz_unitary(layout, &params)?.matrix());
    Ok(SynthesisResult {
        params,
        fidelity,
        leakage,
        objective,
        iterations: opt.iters,
        restarts: opt.restarts,
        best_restart: best,
        trace,
    })
}

/// Matrix as CSV: one row per matrix row, columns `re_0,im_0,re_1,im_1,…`.
pub fn write_matrix_csv<W: std::io::Write>(m: &CMatrix, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|c| [format!("re_{c}"), format!("im_{c}")])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols())
            .flat_map(|c| [format!("{:.17e}", m[(r, c)].re), format!("{:.17e}", m[(r, c)].im)])
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_matrix_csv`]; a header row is optional.
pub fn read_matrix_csv(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: non-numeric entry", i + 1))),
        }
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != 2 * n) {
        return Err(Error::Parse(format!("expected {n} rows of {} numbers", 2 * n)));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        C64::new(rows[r][2 * c], rows[r][2 * c + 1])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{csum, qudit_x};
    use crate::linalg::max_abs_diff;

    fn quick(iters: usize, restarts: usize) -> OptimizerConfig {
        OptimizerConfig {
            iters,
            restarts,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn layout_parsing() {
        let l = AnsatzLayout::parse(vec![6], "4*[D0,S0]").unwrap();
        assert_eq!(l.blocks().len(), 8);
        assert_eq!(l.num_params(), 4 * (2 + 6));
        let l = AnsatzLayout::parse(vec![4, 4], "2*[S0 S1 B0-1], S0").unwrap();
        assert_eq!(l.num_params(), 2 * 10 + 4);
        assert_eq!(AnsatzLayout::parse(vec![4, 4], &l.spec_string()).unwrap(), l);
        assert!(AnsatzLayout::parse(vec![4], "D1").is_err());
        assert!(AnsatzLayout::parse(vec![4, 4], "B1-0").is_err());
        assert!(AnsatzLayout::parse(vec![4], "2*[D0").is_err());
        assert!(AnsatzLayout::parse(vec![4], "Q0").is_err());
        assert!(AnsatzLayout::parse(vec![4], "").is_err());
    }

    #[test]
    fn ansatz_examples() {
        let l = AnsatzLayout::parse(vec![3, 3], "D0,S1,B0-1").unwrap();
        let u = ansatz_unitary(&l, &vec![0.0; l.num_params()]).unwrap();
        assert!(max_abs_diff(u.matrix(), &identity(9)) < 1e-12);
        assert!(ansatz_unitary(&l, &[0.0; 3]).is_err());

        let l = AnsatzLayout::parse(vec![4], "S0").unwrap();
        let th = [0.1, -0.4, 1.3, 2.0];
        assert_eq!(ansatz_unitary(&l, &th).unwrap().matrix(), snap(&th).unwrap().matrix());

        let l = AnsatzLayout::parse(vec![5], "D0,S0").unwrap();
        let p = [0.3, -0.2, 0.1, 0.2, 0.3, 0.4, 0.5];
        let manual = snap(&p[2..]).unwrap().into_matrix() * displacement(C64::new(0.3, -0.2), 5).unwrap().into_matrix();
        assert!(max_abs_diff(ansatz_unitary(&l, &p).unwrap().matrix(), &manual) < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let u = ansatz_unitary(
            &AnsatzLayout::parse(vec![4], "D0,S0").unwrap(),
            &[0.2, 0.1, 1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert!((fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let phased = GateMatrix::new(u.matrix() * C64::from_polar(1.0, 0.77), vec![4]).unwrap();
        assert!((fidelity(&u, &phased).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity(&phased, &u).unwrap() - 1.0).abs() < 1e-12);
        let x = qudit_x(2).unwrap();
        assert!(fidelity(&GateMatrix::identity(vec![2]), &x).unwrap().abs() < 1e-15);
        assert!(fidelity(&x, &GateMatrix::identity(vec![3])).is_err());
    }

    #[test]
    fn gradient_checks() {
        let layout = AnsatzLayout::parse(vec![5], "D0,S0,D0").unwrap();
        let target = qudit_x(3).unwrap();
        let problem = SynthesisProblem::new(&target, &layout).unwrap();
        let mut rng = rng_from_seed(4);
        let p: Vec<f64> = (0..layout.num_params()).map(|_| rng.random::<f64>() - 0.5).collect();

        // Richardson consistency: ε and ε/2 agree to O(ε²).
        let g1 = problem.gradient(&p, 1e-3).unwrap();
        let g2 = problem.gradient(&p, 5e-4).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }

        // Directional derivative vs forward difference along a random v.
        let v: Vec<f64> = (0..p.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let g = problem.gradient(&p, 1e-5).unwrap();
        let dd: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        let h = 1e-6;
        let shifted: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let fd = (problem.objective(&shifted).unwrap() - problem.objective(&p).unwrap()) / h;
        assert!((dd - fd).abs() < 1e-4, "{dd} vs {fd}");

        // Stationary at an exact optimum.
        let l = AnsatzLayout::parse(vec![4], "S0").unwrap();
        let th = [0.3, 0.9, -1.2, 2.2];
        let g = gradient(&l, &th, &snap(&th).unwrap(), 1e-5).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn snap_self_target_is_recovered() {
        let th = [0.4, -1.1, 2.5, 0.9];
        let l = AnsatzLayout::parse(vec![4], "S0").unwrap();
        let r = synthesize(&snap(&th).unwrap(), &l, &quick(2000, 2), 3).unwrap();
        assert!(r.fidelity >= 1.0 - 1e-9, "{}", r.fidelity);
        assert!(
            (ansatz_unitary(&l, &r.params)
                .map(|u| SynthesisProblem::new(&snap(&th).unwrap(), &l)
                    .unwrap()
                    .score(u.matrix())
                    .0)
                .unwrap()
                - r.fidelity)
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn synthesis_is_deterministic_and_consistent() {
        let l = AnsatzLayout::parse(vec![4], "2*[D0,S0]").unwrap();
        let target = qudit_x(2).unwrap();
        let a = synthesize(&target, &l, &quick(100, 3), 9).unwrap();
        let b = synthesize(&target, &l, &quick(100, 3), 9).unwrap();
        assert_eq!(a, b);
        let problem = SynthesisProblem::new(&target, &l).unwrap();
        assert!((problem.fidelity(&a.params).unwrap() - a.fidelity).abs() < 1e-9);
        assert!((problem.objective(&a.params).unwrap() - a.objective).abs() < 1e-12);
        assert!(a.trace.iter().all(|&t| t >= a.objective - 1e-12));
    }

    #[test]
    fn adam_trace_mostly_decreases() {
        let l = AnsatzLayout::parse(vec![4], "2*[D0,S0]").unwrap();
        let target = qudit_x(2).unwrap();
        let mut violations = 0usize;
        let mut steps = 0usize;
        for seed in 0..5 {
            let r = synthesize(&target, &l, &quick(2000, 1), seed).unwrap();
            // Warmup: first 10% of iterations. Rises below 1e-7 are jitter
            // on a converged plateau, not transients.
            for w in r.trace[200..].windows(2) {
                steps += 1;
                if w[1] > w[0] + 1e-7 {
                    violations += 1;
                }
            }
        }
        assert!((violations as f64) / (steps as f64) < 0.05, "{violations}/{steps}");
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = csum(3).unwrap().into_matrix() * C64::from_polar(1.0, 0.3);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let back = read_matrix_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert!(max_abs_diff(&m, &back) < 1e-15);
        assert!(read_matrix_csv("1,0,0\n").is_err());
    }

    #[test]
    fn workspace_mismatch_is_rejected() {
        let l = AnsatzLayout::parse(vec![2], "S0").unwrap();
        assert!(SynthesisProblem::new(&qudit_x(3).unwrap(), &l).is_err());
    }
}
