//! Acceptance run: one pass/fail line per criterion, nonzero exit on any
//! failure. Oracles are computed here, independently of the library paths
//! they check where that is practical.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qumode::dynamics::{evolve_exact, lindblad_evolve, trotter_evolve, Hamiltonian, LindbladModel, TrotterOrder};
use qumode::gates::{
    beam_splitter, csum, displacement, edge_phase_separator, givens, photon_loss_channel, qudit_x, qudit_z, snap,
    GateMatrix,
};
use qumode::hilbert::{ladder_bosonic, Labeling, OperatorTerm, QuantumState, RegisterSpec};
use qumode::linalg::{hermitian_eigenvalues, identity, max_abs_diff, unitarity_error};
use qumode::qaoa::{
    brute_force_best, frame_distribution, ndar_round, optimize_angles, run_ndar, ColoringResult, Frame, Graph,
    NdarConfig, NdarState, QaoaAngles, QaoaSimulator,
};
use qumode::reservoir::{evaluate_task, random_inputs, shot_noise, FeatureSet, Reservoir, ReservoirConfig, Task};
use qumode::rng::derive_seed;
use qumode::sqed::{build_hamiltonian, run_gap_experiment, total_lz_diagonal, Couplings, LatticeSpec};
use qumode::synth::{fidelity, synthesize, AnsatzLayout, OptimizerConfig};
use qumode::{CMatrix, C64};
use qumode_cli::config::Workload;
use qumode_cli::{run_workload, CommonArgs, RunArgs};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn gate_algebra() -> Check {
    let tol = 1e-10;
    for d in 2..=5 {
        let c = csum(d).map_err(e)?;
        let mut p = identity(d * d);
        for _ in 0..d {
            p = c.matrix() * p;
        }
        ensure(max_abs_diff(&p, &identity(d * d)) < tol, format!("csum({d})^{d} ≠ I"))?;
    }
    // CNOT in the |control, target⟩ basis.
    let one = C64::new(1.0, 0.0);
    let mut cnot = CMatrix::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 1), (3, 2), (2, 3)] {
        cnot[(r, c)] = one;
    }
    ensure(
        max_abs_diff(csum(2).map_err(e)?.matrix(), &cnot) < tol,
        "csum(2) is not CNOT",
    )?;
    for d in 2..=6 {
        let (x, z) = (qudit_x(d).map_err(e)?, qudit_z(d).map_err(e)?);
        let omega = C64::from_polar(1.0, 2.0 * PI / d as f64);
        let zx = z.matrix() * x.matrix();
        let xz = x.matrix() * z.matrix() * omega;
        ensure(max_abs_diff(&zx, &xz) < tol, format!("Weyl relation fails at d={d}"))?;
    }
    let mut gates: Vec<(String, GateMatrix)> = Vec::new();
    for d in 2..=6 {
        let phases: Vec<f64> = (0..d).map(|k| 0.37 * k as f64 * k as f64 - 1.1).collect();
        gates.push((format!("snap({d})"), snap(&phases).map_err(e)?));
        gates.push((
            format!("displacement({d})"),
            displacement(C64::new(0.6, -0.4), d).map_err(e)?,
        ));
        gates.push((
            format!("beam_splitter({d})"),
            beam_splitter(0.7, 0.3, d, d + 1).map_err(e)?,
        ));
        gates.push((format!("qudit_x({d})"), qudit_x(d).map_err(e)?));
        gates.push((format!("qudit_z({d})"), qudit_z(d).map_err(e)?));
        gates.push((format!("csum({d})"), csum(d).map_err(e)?));
        gates.push((format!("givens({d})"), givens(d, 0, d - 1, 0.9, 0.2).map_err(e)?));
        gates.push((format!("edge_phase({d})"), edge_phase_separator(d, 0.8).map_err(e)?));
    }
    for (name, g) in &gates {
        ensure(unitarity_error(g.matrix()) < tol, format!("{name} not unitary"))?;
    }
    for d in 2..=6 {
        for gamma in [0.0, 0.3, 1.0] {
            let ch = photon_loss_channel(d, gamma).map_err(e)?;
            ensure(
                ch.completeness_error() < tol,
                format!("loss channel d={d} γ={gamma} incomplete"),
            )?;
        }
    }
    Ok(format!("{} constructors unitary", gates.len()))
}

fn damped_mode() -> Check {
    let (d, kappa, dt) = (10, 0.1, 1e-3);
    let reg = RegisterSpec::new(vec![d]).map_err(e)?;
    let l = ladder_bosonic(d).map_err(e)?;
    let h = Hamiltonian::new(
        reg.clone(),
        vec![OperatorTerm::real(1.0, vec![0], l.number.clone()).map_err(e)?],
    )
    .map_err(e)?;
    let model = LindbladModel::new(
        h,
        vec![(
            OperatorTerm::new(C64::new(1.0, 0.0), vec![0], l.annihilate).map_err(e)?,
            kappa,
        )],
    )
    .map_err(e)?;
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
    let mut worst = (0.0f64, 0.0f64);
    for n0 in [1usize, 4] {
        let rho = QuantumState::basis(reg.clone(), &[n0]).map_err(e)?.to_density();
        let tr = lindblad_evolve(&rho, &model, &times, dt).map_err(e)?;
        let ns = tr.observables(std::slice::from_ref(&l.number)).map_err(e)?;
        for (t, v) in times.iter().zip(&ns[0]) {
            worst.0 = worst.0.max((v - n0 as f64 * (-kappa * t).exp()).abs());
        }
        for r in &tr.states {
            worst.1 = worst.1.max((r.trace().re - 1.0).abs());
        }
    }
    ensure(worst.0 < 1e-6, format!("max |⟨n⟩ − n₀e^(−κt)| = {:.3e}", worst.0))?;
    ensure(worst.1 < 1e-8, format!("trace drift {:.3e}", worst.1))?;
    Ok(format!("max error {:.2e}, trace drift {:.2e}", worst.0, worst.1))
}

fn trotter_order() -> Check {
    let spec = LatticeSpec::chain(
        3,
        3,
        Labeling::Symmetric,
        Couplings {
            mu: 1.0,
            lambda: 0.0,
            x: 0.7,
            y: 0.0,
        },
    );
    let h = build_hamiltonian(&spec).map_err(e)?;
    let lz = total_lz_diagonal(&spec).map_err(e)?;
    let lz_of = |s: &QuantumState| s.probabilities().iter().zip(&lz).map(|(p, l)| p * l).sum::<f64>();
    // Superposition across Lz sectors so the drift check is not vacuous.
    let reg = h.register().clone();
    let amps = (0..reg.total_dim()).map(|k| C64::from_polar(1.0 + (k % 5) as f64, 0.7 * k as f64));
    let psi = QuantumState::normalized(reg, qumode::CVector::from_iterator(27, amps)).map_err(e)?;
    let exact = evolve_exact(&psi, &h, 1.0).map_err(e)?;
    let mut errs = Vec::new();
    let mut drift = 0.0f64;
    for steps in [4, 8, 16, 32] {
        let tr = trotter_evolve(&psi, &h, 1.0, steps, TrotterOrder::Second).map_err(e)?;
        errs.push((tr.amplitudes() - exact.amplitudes()).norm());
        drift = drift.max((lz_of(&tr) - lz_of(&psi)).abs());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let shown = ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    ensure(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("ratios {shown}"),
    )?;
    ensure(drift < 1e-6, format!("Lz drift {drift:.3e}"))?;
    Ok(format!("ratios {shown}; Lz drift {drift:.1e}"))
}

fn gap_consistency() -> Check {
    let mut parts = Vec::new();
    for n in [2, 3] {
        let spec = LatticeSpec::chain(
            n,
            3,
            Labeling::Symmetric,
            Couplings {
                mu: 1.0,
                lambda: 0.3,
                x: -0.3,
                y: 0.2,
            },
        );
        let out = run_gap_experiment(&spec, &vec![1; n], 200.0, 4096).map_err(e)?;
        let ev = hermitian_eigenvalues(&build_hamiltonian(&spec).map_err(e)?.to_dense().map_err(e)?);
        let exact = ev[1] - ev[0];
        let bins = (out.gap_fft.gap - exact).abs() / out.gap_fft.resolution;
        parts.push(format!(
            "N={n}: fft {:.4} exact {exact:.4} ({bins:.2} bins)",
            out.gap_fft.gap
        ));
        ensure(bins <= 1.0, parts.join("; "))?;
    }
    Ok(parts.join("; "))
}

/// Exhaustive best coloring cost, independent of the library enumerator.
fn oracle_best(g: &Graph, d: usize) -> usize {
    let n = g.num_nodes();
    let mut digits = vec![0usize; n];
    let mut best = 0;
    loop {
        let c = g.edges().iter().filter(|&&(u, v)| digits[u] != digits[v]).count();
        best = best.max(c);
        let mut i = 0;
        while i < n {
            digits[i] += 1;
            if digits[i] < d {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn qaoa_coloring() -> Check {
    let d = 3;
    let mut parts = Vec::new();
    for (name, g) in [
        ("triangle", Graph::triangle()),
        ("planted N=9", Graph::planted_colorable(9, 3, 0.5, 9)),
    ] {
        let sim = QaoaSimulator::new(&g, d).map_err(e)?;
        let zero = QaoaAngles {
            gammas: vec![0.0],
            betas: vec![0.0],
        };
        let uniform = sim.expected_cost(&sim.state(&zero).map_err(e)?).map_err(e)?;
        let formula = g.num_edges() as f64 * 2.0 / 3.0;
        ensure(
            (uniform - formula).abs() < 1e-9,
            format!("{name}: uniform cost {uniform} ≠ {formula}"),
        )?;
        let (angles, opt) = optimize_angles(&sim, 1, 3, 5).map_err(e)?;
        let check = sim.expected_cost(&sim.state(&angles).map_err(e)?).map_err(e)?;
        ensure(
            opt > uniform + 1e-9 && (check - opt).abs() < 1e-9,
            format!("{name}: optimized {opt} vs uniform {uniform}"),
        )?;
        let (bf, assignment) = brute_force_best(&g, d).map_err(e)?;
        let oracle = oracle_best(&g, d);
        let direct = g
            .edges()
            .iter()
            .filter(|&&(u, v)| assignment[u] != assignment[v])
            .count();
        ensure(
            bf == oracle && direct == bf,
            format!("{name}: brute force {bf}, oracle {oracle}"),
        )?;

        let config = NdarConfig {
            rounds: 10,
            shots: 64,
            loss: 0.3,
            reoptimize: false,
            restarts: 1,
        };
        let (state, _) = run_ndar(&g, d, &angles, &config, 77).map_err(e)?;
        ensure(
            state.history.windows(2).all(|w| w[0] <= w[1]),
            format!("{name}: history not monotone"),
        )?;
        parts.push(format!(
            "{name}: |E|={} uniform {uniform:.4} p=1 {opt:.4} best {bf}",
            g.num_edges()
        ));
    }

    // Full loss: every sample lands on the incumbent, which is kept.
    let g = Graph::triangle();
    let mut state = NdarState::new(&g, d);
    state.best = ColoringResult {
        assignment: vec![2, 0, 0],
        cost: 2,
        round: 0,
    };
    state.frame = Frame::centered_on(&[2, 0, 0], d);
    let angles = QaoaAngles {
        gammas: vec![0.8],
        betas: vec![0.4],
    };
    let sim = QaoaSimulator::with_frame(&g, d, &state.frame).map_err(e)?;
    let probs = frame_distribution(&sim, &angles, 1.0).map_err(e)?;
    let next = ndar_round(&g, d, &angles, 1.0, 200, &state, 3).map_err(e)?;
    ensure(
        (probs[0] - 1.0).abs() < 1e-12 && next.best == state.best,
        "γ_loss=1 is not a fixed point",
    )?;

    let config = NdarConfig {
        rounds: 10,
        shots: 512,
        loss: 0.2,
        reoptimize: false,
        restarts: 1,
    };
    let mut hits = 0;
    for t in 0..100 {
        if run_ndar(&g, d, &angles, &config, derive_seed(2024, t))
            .map_err(e)?
            .0
            .best
            .cost
            == 3
        {
            hits += 1;
        }
    }
    parts.push(format!("seeded triangle {hits}/100"));
    ensure(hits >= 95, parts.join("; "))?;
    Ok(parts.join("; "))
}

/// Spearman rank correlation (average ranks for ties).
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn reservoir() -> Check {
    let joint = ReservoirConfig {
        dims: vec![9, 9],
        feature_set: FeatureSet::Joint,
        washout: 0,
        ..ReservoirConfig::default()
    };
    let f = Reservoir::new(&joint).map_err(e)?.run_series(&[0.3]).map_err(e)?;
    let physical = f.names.iter().filter(|n| n.as_str() != "bias").count();
    ensure(
        physical == 81 && f.rows[0].len() == 82,
        format!("joint (9,9) gives {physical} features"),
    )?;

    let config = ReservoirConfig::narma_benchmark();
    let res = Reservoir::new(&config).map_err(e)?;
    let shots = [100u64, 1_000, 10_000];
    let mut wins = 0;
    let mut sums = [0.0f64; 4];
    for s in 0..20 {
        let u = random_inputs(500, derive_seed(600, s));
        let f = res.run_series(&u).map_err(e)?;
        let m = evaluate_task(&f, &u, Task::Narma2, config.washout, config.ridge, 0.7)
            .map_err(e)?
            .metrics;
        if m.nmse_test < m.nmse_baseline {
            wins += 1;
        }
        sums[3] += m.nmse_test;
        for (i, &n) in shots.iter().enumerate() {
            let noisy = shot_noise(&f, n, derive_seed(601, s * 8 + i as u64)).map_err(e)?;
            sums[i] += evaluate_task(&noisy, &u, Task::Narma2, config.washout, config.ridge, 0.7)
                .map_err(e)?
                .metrics
                .nmse_test;
        }
    }
    let inv_shots = [1e-2, 1e-3, 1e-4, 0.0];
    let rho = spearman(&inv_shots, &sums);
    let means: Vec<String> = sums.iter().map(|s| format!("{:.3}", s / 20.0)).collect();

    let u = random_inputs(120, 602);
    let a = res.run_series(&u).map_err(e)?;
    let excited = QuantumState::basis(config.register().map_err(e)?, &[1, 0])
        .map_err(e)?
        .to_density();
    let b = res.run_series_from(&excited, &u).map_err(e)?;
    let gap = a
        .rows
        .iter()
        .flatten()
        .zip(b.rows.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    let summary = format!(
        "81 joint features; NARMA2 wins {wins}/20; washout gap {gap:.1e}; Spearman ρ = {rho:.2} (mean NMSE {})",
        means.join(" / ")
    );
    ensure(wins >= 18 && gap < 1e-4 && rho > 0.8, summary.clone())?;
    Ok(summary)
}

fn synthesis() -> Check {
    let opt = OptimizerConfig::default();
    let phases = [0.0, 0.9, -0.4, 2.2];
    let target = snap(&phases).map_err(e)?;
    let r = synthesize(&target, &AnsatzLayout::parse(vec![4], "S0").map_err(e)?, &opt, 3).map_err(e)?;
    ensure(
        r.fidelity >= 1.0 - 1e-9,
        format!("SNAP self-target fidelity {}", r.fidelity),
    )?;

    let layout = AnsatzLayout::parse(vec![6], "4*[D0,S0]").map_err(e)?;
    let x = synthesize(&qudit_x(3).map_err(e)?, &layout, &opt, 1).map_err(e)?;
    ensure(x.fidelity >= 0.99, format!("qudit-X fidelity {}", x.fidelity))?;

    let layout = AnsatzLayout::parse(vec![4, 4], "3*[S0,S1,B0-1],S0,S1").map_err(e)?;
    let cnot = synthesize(&csum(2).map_err(e)?, &layout, &opt, 1).map_err(e)?;
    ensure(
        (cnot.fidelity - 0.25).abs() < 1e-6,
        format!("CNOT fidelity {} (pinned 0.25)", cnot.fidelity),
    )?;

    // The reported fidelity is the subspace score of the returned parameters.
    let u = qumode::synth::ansatz_unitary(&layout, &cnot.params).map_err(e)?;
    ensure(
        u.dim() == 16 && fidelity(&u, &u).map_err(e)? > 1.0 - 1e-12,
        "ansatz unitary malformed",
    )?;
    Ok(format!(
        "SNAP {:.12}; qudit-X {:.6}; CNOT {:.6} (pinned 0.25)",
        r.fidelity, x.fidelity, cnot.fidelity
    ))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn reproducibility() -> Check {
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut names = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .map_err(e)?
        .filter_map(|x| x.ok().map(|x| x.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    for path in entries {
        let text = std::fs::read_to_string(&path).map_err(e)?;
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(e)?;
        let workload: Workload = serde_json::from_value(doc["workload"].clone()).map_err(e)?;
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let args = RunArgs {
                common: CommonArgs {
                    config: path.clone(),
                    overrides: vec![],
                    seed: None,
                },
                out: Some(tmp.path().join(format!("{stem}-{rep}"))),
            };
            let report = run_workload(workload, &args).map_err(|err| format!("{stem}: {err}"))?;
            outputs.push(std::fs::read(report.out_dir.join("result.json")).map_err(e)?);
        }
        ensure(
            outputs[0] == outputs[1],
            format!("{stem}: result.json differs between runs"),
        )?;
        names.push(stem);
    }
    ensure(names.len() >= 4, "too few shipped configs")?;
    Ok(format!("{} configs byte-identical: {}", names.len(), names.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gate algebra", gate_algebra),
        ("damped mode vs analytic decay", damped_mode),
        ("second-order Trotter convergence", trotter_order),
        ("FFT gap vs exact spectrum", gap_consistency),
        ("QAOA coloring and NDAR", qaoa_coloring),
        ("reservoir", reservoir),
        ("gate synthesis", synthesis),
        ("reproducible results", reproducibility),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {}: {name} ({secs:.1} s): {detail}", i + 1);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        total.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
