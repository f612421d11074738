//! Qudit QAOA for max graph coloring, with noise-directed adaptive
//! remapping (NDAR) that turns photon loss into a search bias.
//!
//! Node `v` is one qudit of dimension `d`; level `k` encodes color `k`.
//! The cost counts properly colored (bichromatic) edges. Each layer applies
//! `Π_edges e^{−iγ[a=b]}` followed by `e^{−iβ(X+X†)}` on every node.
//!
//! NDAR keeps a per-node relabeling ("frame") in which the incumbent best
//! coloring is the all-zero string, so amplitude damping, which drives every
//! mode toward `|0⟩`, drives samples toward the incumbent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gates::{photon_loss_populations, qudit_x};
use crate::hilbert::{LocalLayout, QuantumState, RegisterSpec};
use crate::linalg::expm_hermitian;
use crate::rng::{derive_seed, rng_from_seed, sample_indices};
use crate::{CMatrix, CVector, Error, Result, C64, STATE_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Edges are stored as `(min, max)` in input order.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a node ≥ n = {n}"
                )));
            }
            let e = (u.min(v), u.max(v));
            if norm.contains(&e) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
            norm.push(e);
        }
        Ok(Self { n, edges: norm })
    }

    /// Parse a `u v` per line edge list (0-indexed, `#` comments). The node
    /// count is `n` when given, else one more than the largest index.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad node index {s:?}", lineno + 1)))
            };
            if parts.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected `u v`, got {line:?}",
                    lineno + 1
                )));
            }
            edges.push((parse(parts[0])?, parse(parts[1])?));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::new(n.unwrap_or(inferred), edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle() -> Self {
        Self::new(3, vec![(0, 1), (1, 2), (0, 2)]).expect("valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::new(n, edges).expect("valid")
    }

    /// Random graph with a planted proper `k`-coloring: each node gets color
    /// `v mod k`, and each bichromatic pair becomes an edge with probability
    /// `p`. Deterministic in `seed`.
    pub fn planted_colorable(n: usize, k: usize, p: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if u % k != v % k && rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Self::new(n, edges).expect("valid")
    }
}

/// A coloring with its score and the NDAR round that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringResult {
    pub assignment: Vec<usize>,
    pub cost: usize,
    pub round: usize,
}

/// Number of properly colored edges.
pub fn cost(assignment: &[usize], graph: &Graph, d: usize) -> Result<usize> {
    if assignment.len() != graph.n {
        return Err(Error::DimensionMismatch {
            expected: graph.n,
            got: assignment.len(),
        });
    }
    if let Some(&c) = assignment.iter().find(|&&c| c >= d) {
        return Err(Error::InvalidArgument(format!("color {c} out of range for d = {d}")));
    }
    Ok(graph
        .edges
        .iter()
        .filter(|&&(u, v)| assignment[u] != assignment[v])
        .count())
}

/// Exhaustive search limit on `dⁿ`.
pub const BRUTE_FORCE_LIMIT: usize = 10_000_000;

/// Maximum cost and the lexicographically first assignment attaining it.
pub fn brute_force_best(graph: &Graph, d: usize) -> Result<(usize, Vec<usize>)> {
    let total = instance_size(graph.n, d)
        .filter(|&t| t <= BRUTE_FORCE_LIMIT)
        .ok_or(Error::OverLimit {
            dim: instance_size(graph.n, d).unwrap_or(usize::MAX),
            limit: BRUTE_FORCE_LIMIT,
        })?;
    let mut digits = vec![0usize; graph.n];
    let mut best = (0usize, digits.clone());
    let mut first = true;
    for _ in 0..total {
        let c = graph.edges.iter().filter(|&&(u, v)| digits[u] != digits[v]).count();
        if first || c > best.0 {
            best = (c, digits.clone());
            first = false;
        }
        // Increment, node 0 most significant.
        for pos in (0..graph.n).rev() {
            digits[pos] += 1;
            if digits[pos] < d {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(best)
}

fn instance_size(n: usize, d: usize) -> Option<usize> {
    d.checked_pow(n as u32)
}

/// QAOA angles; `gammas[k]`, `betas[k]` parametrize layer `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaAngles {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaAngles {
    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    fn from_flat(x: &[f64]) -> Self {
        let p = x.len() / 2;
        Self {
            gammas: x[..p].to_vec(),
            betas: x[p..].to_vec(),
        }
    }
}

/// Per-node color relabeling: logical color `c` of node `v` is stored on
/// physical level `perm[v][c]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    perms: Vec<Vec<usize>>,
}

impl Frame {
    pub fn identity(n: usize, d: usize) -> Self {
        Self {
            perms: vec![(0..d).collect(); n],
        }
    }

    /// Frame in which `incumbent` becomes the all-zero string (cyclic shift
    /// per node).
    pub fn centered_on(incumbent: &[usize], d: usize) -> Self {
        Self {
            perms: incumbent
                .iter()
                .map(|&b| (0..d).map(|c| (c + d - b) % d).collect())
                .collect(),
        }
    }

    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        for p in &perms {
            let mut seen = vec![false; p.len()];
            for &x in p {
                if x >= p.len() || seen[x] {
                    return Err(Error::InvalidArgument("frame entry is not a permutation".into()));
                }
                seen[x] = true;
            }
        }
        Ok(Self { perms })
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn encode(&self, logical: &[usize]) -> Vec<usize> {
        logical.iter().zip(&self.perms).map(|(&c, p)| p[c]).collect()
    }

    pub fn decode(&self, physical: &[usize]) -> Vec<usize> {
        physical
            .iter()
            .zip(&self.perms)
            .map(|(&k, p)| p.iter().position(|&x| x == k).expect("bijection"))
            .collect()
    }
}

/// Dense QAOA state-vector simulator for one graph, color count and frame.
#[derive(Debug, Clone)]
pub struct QaoaSimulator {
    graph: Graph,
    d: usize,
    register: RegisterSpec,
    /// Properly colored edge count of each physical basis state, decoded
    /// through the frame.
    costs: Vec<u32>,
    mixer_layouts: Vec<LocalLayout>,
}

impl QaoaSimulator {
    pub fn new(graph: &Graph, d: usize) -> Result<Self> {
        Self::with_frame(graph, d, &Frame::identity(graph.n, d))
    }

    pub fn with_frame(graph: &Graph, d: usize, frame: &Frame) -> Result<Self> {
        if graph.n == 0 {
            return Err(Error::InvalidArgument("graph has no nodes".into()));
        }
        let dim = instance_size(graph.n, d)
            .filter(|&x| x <= STATE_LIMIT)
            .ok_or(Error::OverLimit {
                dim: instance_size(graph.n, d).unwrap_or(usize::MAX),
                limit: STATE_LIMIT,
            })?;
        let register = RegisterSpec::new(vec![d; graph.n])?;
        // Inverse permutation tables: physical level → logical color.
        let inv: Vec<Vec<usize>> = frame
            .perms
            .iter()
            .map(|p| {
                let mut q = vec![0; d];
                for (c, &k) in p.iter().enumerate() {
                    q[k] = c;
                }
                q
            })
            .collect();
        let costs = (0..dim)
            .map(|i| {
                let phys = register.digits_of(i);
                let logical: Vec<usize> = phys.iter().zip(&inv).map(|(&k, q)| q[k]).collect();
                graph.edges.iter().filter(|&&(u, v)| logical[u] != logical[v]).count() as u32
            })
            .collect();
        let mixer_layouts = (0..graph.n)
            .map(|v| LocalLayout::new(&register, &[v]))
            .collect::<Result<_>>()?;
        Ok(Self {
            graph: graph.clone(),
            d,
            register,
            costs,
            mixer_layouts,
        })
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    /// Cost of every physical basis state (frame-decoded).
    pub fn basis_costs(&self) -> &[u32] {
        &self.costs
    }

    pub fn state(&self, angles: &QaoaAngles) -> Result<QuantumState> {
        if angles.gammas.is_empty() || angles.gammas.len() != angles.betas.len() {
            return Err(Error::InvalidArgument(
                "need p ≥ 1 with len(gammas) = len(betas)".into(),
            ));
        }
        let x = qudit_x(self.d)?.into_matrix();
        let gen = &x + x.adjoint();
        let m = self.graph.num_edges() as u32;
        let mut psi = QuantumState::uniform(self.register.clone());
        {
            let amps = psi.amplitudes_mut();
            for (&gamma, &beta) in angles.gammas.iter().zip(&angles.betas) {
                // Monochromatic count = |E| − cost.
                let phases: Vec<C64> = (0..=m).map(|mono| C64::from_polar(1.0, -gamma * mono as f64)).collect();
                for (a, &c) in amps.iter_mut().zip(&self.costs) {
                    *a *= phases[(m - c) as usize];
                }
                let mixer = expm_hermitian(&gen, beta);
                for layout in &self.mixer_layouts {
                    layout.apply(&mixer, amps);
                }
            }
        }
        Ok(psi)
    }

    pub fn expected_cost(&self, state: &QuantumState) -> Result<f64> {
        if state.dim() != self.costs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.costs.len(),
                got: state.dim(),
            });
        }
        Ok(state
            .amplitudes()
            .iter()
            .zip(&self.costs)
            .map(|(a, &c)| a.norm_sqr() * c as f64)
            .sum())
    }
}

/// QAOA state for `graph` with `d` colors at the given angles.
pub fn qaoa_state(graph: &Graph, d: usize, angles: &QaoaAngles) -> Result<QuantumState> {
    QaoaSimulator::new(graph, d)?.state(angles)
}

/// `⟨H_C⟩` with `H_C = Σ_edges (1 − Π_eq)`.
pub fn expected_cost(state: &QuantumState, graph: &Graph) -> Result<f64> {
    let dims = state.register().dims();
    if dims.len() != graph.n {
        return Err(Error::DimensionMismatch {
            expected: graph.n,
            got: dims.len(),
        });
    }
    let reg = state.register();
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let digits = reg.digits_of(i);
            let c = graph.edges.iter().filter(|&&(u, v)| digits[u] != digits[v]).count();
            a.norm_sqr() * c as f64
        })
        .sum())
}

/// Nelder–Mead simplex minimizer.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let v = f(&c);
                (c, v)
            } else {
                let c = along(0.5);
                let v = f(&c);
                (c, v)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n)
                        .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty");
    (simplex[best].clone(), values[best])
}

pub const NM_MAX_EVALS: usize = 600;

/// Maximize the expected cost over `2p` angles by Nelder–Mead from
/// `restarts` starts: restart 0 starts at the origin (the uniform state),
/// the rest at random `γ ∈ [0, 2π)`, `β ∈ [0, π)`. Restarts run in
/// parallel with derived seeds; the best (lowest index on ties) wins.
pub fn optimize_angles(sim: &QaoaSimulator, p: usize, restarts: usize, seed: u64) -> Result<(QaoaAngles, f64)> {
    use rand::Rng;
    if p == 0 || restarts == 0 {
        return Err(Error::InvalidArgument("need p ≥ 1 and restarts ≥ 1".into()));
    }
    let results: Vec<(Vec<f64>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = if r == 0 {
                vec![0.0; 2 * p]
            } else {
                let mut rng = rng_from_seed(derive_seed(seed, r as u64));
                (0..2 * p)
                    .map(|j| {
                        if j < p {
                            rng.random::<f64>() * 2.0 * std::f64::consts::PI
                        } else {
                            rng.random::<f64>() * std::f64::consts::PI
                        }
                    })
                    .collect()
            };
            let objective = |x: &[f64]| {
                let st = sim.state(&QaoaAngles::from_flat(x)).expect("valid angles");
                -sim.expected_cost(&st).expect("matching dims")
            };
            let (x, v) = nelder_mead(objective, &start, 0.3, NM_MAX_EVALS * p, 1e-10);
            (x, -v)
        })
        .collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1 > results[best].1 {
            best = i;
        }
    }
    let (x, v) = results[best].clone();
    Ok((QaoaAngles::from_flat(&x), v))
}

/// Per-round NDAR statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub round_best: usize,
    pub best: usize,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdarState {
    pub frame: Frame,
    pub best: ColoringResult,
    /// Best cost after each round (non-decreasing).
    pub history: Vec<usize>,
    pub rounds: Vec<RoundStats>,
}

impl NdarState {
    /// Incumbent = all-zero coloring, identity frame.
    pub fn new(graph: &Graph, d: usize) -> Self {
        let assignment = vec![0; graph.n];
        let c = graph
            .edges
            .iter()
            .filter(|&&(u, v)| assignment[u] != assignment[v])
            .count();
        Self {
            frame: Frame::identity(graph.n, d),
            best: ColoringResult {
                assignment,
                cost: c,
                round: 0,
            },
            history: Vec::new(),
            rounds: Vec::new(),
        }
    }
}

/// Photon loss of strength `gamma` on every node, applied to a basis
/// probability vector (amplitude damping maps diagonals to diagonals).
pub fn apply_loss_to_probabilities(probs: &mut [f64], register: &RegisterSpec, gamma: f64) -> Result<()> {
    if gamma == 0.0 {
        return Ok(());
    }
    let strides = register.strides();
    let dims = register.dims();
    let mut buf = Vec::new();
    for (&d, &stride) in dims.iter().zip(&strides) {
        let bases: Vec<usize> = (0..probs.len()).filter(|&i| (i / stride) % d == 0).collect();
        for b in bases {
            buf.clear();
            buf.extend((0..d).map(|k| probs[b + k * stride]));
            let out = photon_loss_populations(&buf, gamma);
            for (k, v) in out.into_iter().enumerate() {
                probs[b + k * stride] = v;
            }
        }
    }
    Ok(())
}

/// One NDAR round: QAOA in the incumbent-centered frame, photon loss on
/// every node, `shots` samples decoded and scored. A strictly better sample
/// replaces the incumbent and recenters the frame.
pub fn ndar_round(
    graph: &Graph,
    d: usize,
    angles: &QaoaAngles,
    gamma_loss: f64,
    shots: usize,
    state: &NdarState,
    seed: u64,
) -> Result<NdarState> {
    if !(0.0..=1.0).contains(&gamma_loss) {
        return Err(Error::InvalidArgument(format!("loss γ = {gamma_loss} outside [0, 1]")));
    }
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be ≥ 1".into()));
    }
    let sim = QaoaSimulator::with_frame(graph, d, &state.frame)?;
    let probs = frame_distribution(&sim, angles, gamma_loss)?;
    let mut rng = rng_from_seed(seed);
    let samples = sample_indices(&mut rng, shots, &probs);

    let round = state.history.len() + 1;
    let mut round_best: Option<(usize, usize)> = None;
    let mut total = 0.0;
    for &idx in &samples {
        let c = sim.costs[idx] as usize;
        total += c as f64;
        if round_best.is_none_or(|(bc, _)| c > bc) {
            round_best = Some((c, idx));
        }
    }
    let (rb_cost, rb_idx) = round_best.expect("shots ≥ 1");
    let mut next = state.clone();
    if rb_cost > state.best.cost {
        let assignment = state.frame.decode(&sim.register.digits_of(rb_idx));
        next.frame = Frame::centered_on(&assignment, d);
        next.best = ColoringResult {
            assignment,
            cost: rb_cost,
            round,
        };
    }
    next.history.push(next.best.cost);
    next.rounds.push(RoundStats {
        round,
        round_best: rb_cost,
        best: next.best.cost,
        mean_cost: total / shots as f64,
    });
    Ok(next)
}

/// Basis-outcome distribution of the QAOA state after per-node loss.
pub fn frame_distribution(sim: &QaoaSimulator, angles: &QaoaAngles, gamma_loss: f64) -> Result<Vec<f64>> {
    let psi = sim.state(angles)?;
    let mut probs = psi.probabilities();
    apply_loss_to_probabilities(&mut probs, &sim.register, gamma_loss)?;
    Ok(probs)
}

/// NDAR driver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NdarConfig {
    pub rounds: usize,
    pub shots: usize,
    pub loss: f64,
    /// Re-optimize angles in each round's frame instead of reusing the
    /// initial angles.
    #[serde(default)]
    pub reoptimize: bool,
    /// Angle-search restarts per round when re-optimizing.
    #[serde(default = "one")]
    pub restarts: usize,
}

fn one() -> usize {
    1
}

/// Run `config.rounds` NDAR rounds; round `r` uses seed
/// `derive_seed(seed, r)`.
pub fn run_ndar(
    graph: &Graph,
    d: usize,
    angles: &QaoaAngles,
    config: &NdarConfig,
    seed: u64,
) -> Result<(NdarState, Vec<QaoaAngles>)> {
    let mut state = NdarState::new(graph, d);
    let mut used = Vec::with_capacity(config.rounds);
    for r in 0..config.rounds {
        let round_angles = if config.reoptimize && r > 0 {
            let sim = QaoaSimulator::with_frame(graph, d, &state.frame)?;
            optimize_angles(
                &sim,
                angles.depth(),
                config.restarts.max(1),
                derive_seed(seed ^ 0xA5A5, r as u64),
            )?
            .0
        } else {
            angles.clone()
        };
        state = ndar_round(
            graph,
            d,
            &round_angles,
            config.loss,
            config.shots,
            &state,
            derive_seed(seed, r as u64),
        )?;
        used.push(round_angles);
    }
    Ok((state, used))
}

/// Dense oracle pieces (full matrices), for cross-checking the simulator.
pub fn dense_cost_operator(graph: &Graph, d: usize) -> Result<CMatrix> {
    let reg = RegisterSpec::new(vec![d; graph.n])?;
    let dim = reg.total_dim();
    let diag = CVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let digits = reg.digits_of(i);
            C64::new(
                graph.edges.iter().filter(|&&(u, v)| digits[u] != digits[v]).count() as f64,
                0.0,
            )
        }),
    );
    Ok(CMatrix::from_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{edge_phase_separator, photon_loss_channel};
    use crate::hilbert::{embed, OperatorTerm};
    use rand::Rng;
    use std::f64::consts::PI;

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = rng_from_seed(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn graph_validation_and_parsing() {
        assert!(Graph::new(3, vec![(0, 0)]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, vec![(0, 3)]).is_err());
        let g = Graph::parse_edge_list("# triangle\n0 1\n1 2  # comment\n\n2 0\n", None).unwrap();
        assert_eq!(g, Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap());
        assert!(Graph::parse_edge_list("0 1 2\n", None).is_err());
        assert!(Graph::parse_edge_list("0 x\n", None).is_err());
        assert_eq!(Graph::parse_edge_list("0 1\n", Some(5)).unwrap().num_nodes(), 5);
    }

    #[test]
    fn cost_examples() {
        let g = Graph::triangle();
        assert_eq!(cost(&[0, 0, 0], &g, 3).unwrap(), 0);
        assert_eq!(cost(&[0, 1, 2], &g, 3).unwrap(), 3);
        assert!(cost(&[0, 1, 3], &g, 3).is_err());
        let g = random_graph(7, 0.5, 3);
        let mut rng = rng_from_seed(4);
        for _ in 0..20 {
            let a: Vec<usize> = (0..7).map(|_| rng.random_range(0..3)).collect();
            let mut recount = 0;
            for u in 0..7 {
                for v in u + 1..7 {
                    if g.edges().contains(&(u, v)) && a[u] != a[v] {
                        recount += 1;
                    }
                }
            }
            assert_eq!(cost(&a, &g, 3).unwrap(), recount);
        }
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_best(&Graph::triangle(), 3).unwrap().0, 3);
        assert_eq!(brute_force_best(&Graph::triangle(), 2).unwrap(), (2, vec![0, 0, 1]));
        assert_eq!(brute_force_best(&Graph::complete(4), 3).unwrap().0, 5);
        assert!(brute_force_best(&Graph::complete(16), 3).is_err());
    }

    #[test]
    fn color_permutation_invariance() {
        let mut rng = rng_from_seed(5);
        let g = random_graph(6, 0.6, 6);
        for _ in 0..20 {
            let a: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let sigma = [2usize, 0, 3, 1];
            let permuted: Vec<usize> = a.iter().map(|&c| sigma[c]).collect();
            assert_eq!(cost(&a, &g, 4).unwrap(), cost(&permuted, &g, 4).unwrap());
            let incumbent: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let frame = Frame::centered_on(&incumbent, 4);
            assert_eq!(frame.encode(&incumbent), vec![0; 6]);
            assert_eq!(frame.decode(&frame.encode(&a)), a);
            let sim = QaoaSimulator::with_frame(&g, 4, &frame).unwrap();
            let phys = frame.encode(&a);
            let idx = sim.register().index_of(&phys).unwrap();
            assert_eq!(sim.basis_costs()[idx] as usize, cost(&a, &g, 4).unwrap());
        }
    }

    #[test]
    fn qaoa_state_examples() {
        let g = Graph::triangle();
        let zero = QaoaAngles {
            gammas: vec![0.0],
            betas: vec![0.0],
        };
        let psi = qaoa_state(&g, 3, &zero).unwrap();
        for p in psi.probabilities() {
            assert!((p - 1.0 / 27.0).abs() < 1e-14);
        }
        assert!((expected_cost(&psi, &g).unwrap() - 2.0).abs() < 1e-12);

        // Edgeless graph: product state.
        let empty = Graph::new(2, vec![]).unwrap();
        let psi = qaoa_state(
            &empty,
            3,
            &QaoaAngles {
                gammas: vec![0.7],
                betas: vec![0.4],
            },
        )
        .unwrap();
        let rho = psi.to_density();
        let red = crate::hilbert::partial_trace(&rho, &[0]).unwrap();
        assert!((red.purity() - 1.0).abs() < 1e-12);

        assert!(qaoa_state(
            &g,
            3,
            &QaoaAngles {
                gammas: vec![],
                betas: vec![]
            }
        )
        .is_err());
    }

    #[test]
    fn triangle_expected_cost_matches_dense_oracle() {
        let g = Graph::triangle();
        let d = 3;
        let reg = RegisterSpec::new(vec![d; 3]).unwrap();
        let (gamma, beta) = (0.83, 0.41);
        // Phase separator from explicit two-qudit gates, embedded.
        let mut u_c = crate::linalg::identity(27);
        for &(u, v) in g.edges() {
            let gate = edge_phase_separator(d, gamma).unwrap().into_matrix();
            u_c = embed(&OperatorTerm::new(C64::new(1.0, 0.0), vec![u, v], gate).unwrap(), &reg).unwrap() * u_c;
        }
        let x = qudit_x(d).unwrap().into_matrix();
        let gen = &x + x.adjoint();
        let mut b = CMatrix::zeros(27, 27);
        for v in 0..3 {
            b += embed(&OperatorTerm::real(1.0, vec![v], gen.clone()).unwrap(), &reg).unwrap();
        }
        let u_m = crate::linalg::expm_hermitian(&b, beta);
        let psi0 = QuantumState::uniform(reg);
        let psi = &u_m * &u_c * psi0.amplitudes();
        let hc = dense_cost_operator(&g, d).unwrap();
        let oracle = psi.dotc(&(&hc * &psi)).re;

        let got = expected_cost(
            &qaoa_state(
                &g,
                d,
                &QaoaAngles {
                    gammas: vec![gamma],
                    betas: vec![beta],
                },
            )
            .unwrap(),
            &g,
        )
        .unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn expected_cost_of_basis_state_and_sampling() {
        let g = random_graph(4, 0.7, 8);
        let reg = RegisterSpec::new(vec![3; 4]).unwrap();
        let psi = QuantumState::basis(reg.clone(), &[0, 2, 1, 1]).unwrap();
        assert_eq!(
            expected_cost(&psi, &g).unwrap(),
            cost(&[0, 2, 1, 1], &g, 3).unwrap() as f64
        );

        let mut rng = rng_from_seed(9);
        let v = CVector::from_fn(81, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = QuantumState::normalized(reg.clone(), v).unwrap();
        let exact = expected_cost(&psi, &g).unwrap();
        let shots = 100_000;
        let samples = sample_indices(&mut rng, shots, &psi.probabilities());
        let vals: Vec<f64> = samples
            .iter()
            .map(|&i| cost(&reg.digits_of(i), &g, 3).unwrap() as f64)
            .collect();
        let mean = vals.iter().sum::<f64>() / shots as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (shots - 1) as f64;
        assert!((mean - exact).abs() < 5.0 * (var / shots as f64).sqrt());
    }

    #[test]
    fn sampling_estimator_is_unbiased() {
        let g = Graph::triangle();
        let sim = QaoaSimulator::new(&g, 3).unwrap();
        let psi = sim
            .state(&QaoaAngles {
                gammas: vec![1.1],
                betas: vec![0.3],
            })
            .unwrap();
        let exact = sim.expected_cost(&psi).unwrap();
        let probs = psi.probabilities();
        let batch = 200;
        let means: Vec<f64> = (0..200)
            .map(|b| {
                let mut rng = rng_from_seed(derive_seed(77, b));
                let s = sample_indices(&mut rng, batch, &probs);
                s.iter().map(|&i| sim.basis_costs()[i] as f64).sum::<f64>() / batch as f64
            })
            .collect();
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        let se = (var / means.len() as f64).sqrt();
        assert!((grand - exact).abs() < 3.0 * se, "{grand} vs {exact} (se {se})");
    }

    #[test]
    fn uniform_state_cost_formula() {
        for (seed, d) in [(1u64, 2usize), (2, 3), (3, 4)] {
            let g = random_graph(5, 0.5, seed);
            let psi = qaoa_state(
                &g,
                d,
                &QaoaAngles {
                    gammas: vec![0.0],
                    betas: vec![0.0],
                },
            )
            .unwrap();
            let expected = g.num_edges() as f64 * (1.0 - 1.0 / d as f64);
            assert!((expected_cost(&psi, &g).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn optimizer_beats_start_and_grid_and_is_deterministic() {
        let g = Graph::triangle();
        let sim = QaoaSimulator::new(&g, 3).unwrap();
        let (angles, val) = optimize_angles(&sim, 1, 4, 11).unwrap();
        assert!(val >= 2.0);
        let recomputed = sim.expected_cost(&sim.state(&angles).unwrap()).unwrap();
        assert!((recomputed - val).abs() < 1e-12);

        let mut grid_best = f64::MIN;
        for i in 0..25 {
            for j in 0..25 {
                let a = QaoaAngles {
                    gammas: vec![2.0 * PI * i as f64 / 25.0],
                    betas: vec![2.0 * PI / 3.0 * j as f64 / 25.0],
                };
                grid_best = grid_best.max(sim.expected_cost(&sim.state(&a).unwrap()).unwrap());
            }
        }
        assert!(val >= grid_best - 0.02, "optimizer {val} vs grid {grid_best}");

        let (again, _) = optimize_angles(&sim, 1, 4, 11).unwrap();
        assert_eq!(angles, again);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2000,
            1e-14,
        );
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
        assert!(v < 1e-10);
    }

    #[test]
    fn loss_on_probabilities_matches_channel() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let sim = QaoaSimulator::new(&g, 3).unwrap();
        let psi = sim
            .state(&QaoaAngles {
                gammas: vec![0.9],
                betas: vec![0.5],
            })
            .unwrap();
        let mut rho = psi.to_density();
        for v in 0..2 {
            rho.apply_kraus(photon_loss_channel(3, 0.35).unwrap().operators(), &[v])
                .unwrap();
        }
        let mut probs = psi.probabilities();
        apply_loss_to_probabilities(&mut probs, sim.register(), 0.35).unwrap();
        for (a, b) in probs.iter().zip(rho.populations()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn full_loss_is_an_attractor_fixed_point() {
        let g = Graph::triangle();
        let mut state = NdarState::new(&g, 3);
        state.best = ColoringResult {
            assignment: vec![1, 2, 2],
            cost: 2,
            round: 0,
        };
        state.frame = Frame::centered_on(&[1, 2, 2], 3);
        let angles = QaoaAngles {
            gammas: vec![0.8],
            betas: vec![0.3],
        };
        let sim = QaoaSimulator::with_frame(&g, 3, &state.frame).unwrap();
        let probs = frame_distribution(&sim, &angles, 1.0).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-12);
        let next = ndar_round(&g, 3, &angles, 1.0, 256, &state, 5).unwrap();
        assert_eq!(next.best, state.best);
        assert_eq!(next.rounds[0].round_best, 2);
        assert_eq!(next.rounds[0].mean_cost, 2.0);
    }

    #[test]
    fn history_is_monotone() {
        let g = random_graph(5, 0.6, 12);
        let config = NdarConfig {
            rounds: 10,
            shots: 16,
            loss: 0.3,
            reoptimize: false,
            restarts: 1,
        };
        let angles = QaoaAngles {
            gammas: vec![0.6],
            betas: vec![0.4],
        };
        let (state, _) = run_ndar(&g, 3, &angles, &config, 13).unwrap();
        assert_eq!(state.history.len(), 10);
        assert!(state.history.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(cost(&state.best.assignment, &g, 3).unwrap(), state.best.cost);
        for f in state.frame.permutations() {
            let mut s = f.clone();
            s.sort_unstable();
            assert_eq!(s, vec![0, 1, 2]);
        }
    }

    #[test]
    fn noiseless_round_samples_plain_qaoa() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let angles = QaoaAngles {
            gammas: vec![0.7],
            betas: vec![0.9],
        };
        let sim = QaoaSimulator::new(&g, 2).unwrap();
        let plain = sim.state(&angles).unwrap().probabilities();
        let framed = frame_distribution(&sim, &angles, 0.0).unwrap();
        assert_eq!(plain, framed);
        let shots = 100_000;
        let mut rng = rng_from_seed(3);
        let samples = sample_indices(&mut rng, shots, &framed);
        let mut counts = [0usize; 4];
        for s in samples {
            counts[s] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&plain)
            .map(|(&c, &p)| (c as f64 / shots as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "TV = {tv}");
    }

    #[test]
    fn seeded_triangle_reaches_optimum() {
        let g = Graph::triangle();
        let angles = QaoaAngles {
            gammas: vec![0.8],
            betas: vec![0.4],
        };
        let config = NdarConfig {
            rounds: 10,
            shots: 512,
            loss: 0.2,
            reoptimize: false,
            restarts: 1,
        };
        let hits = (0..100)
            .filter(|&t| {
                run_ndar(&g, 3, &angles, &config, derive_seed(2024, t))
                    .unwrap()
                    .0
                    .best
                    .cost
                    == 3
            })
            .count();
        assert!(hits >= 95, "{hits}/100");
    }
}
