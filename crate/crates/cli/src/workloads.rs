//! Workload runners. Each returns the result document plus any CSV files;
//! nothing here touches wall-clock time, so results are reproducible.

use std::path::Path;

use qumode::gates::{csum, qudit_x, snap, GateMatrix};
use qumode::qaoa::{brute_force_best, optimize_angles, run_ndar, Graph, QaoaAngles, QaoaSimulator};
use qumode::reservoir::{evaluate_task, random_inputs, shot_noise, Reservoir};
use qumode::rng::derive_seed;
use qumode::sqed::run_gap_experiment;
use qumode::synth::{ansatz_unitary, read_matrix_csv, synthesize, write_matrix_csv, AnsatzLayout};
use serde_json::{json, Value};

use crate::config::{
    ExperimentConfig, GraphSource, QaoaSection, ReservoirSection, SqedSection, SynthSection, SynthTarget,
};

pub struct Output {
    pub result: Value,
    pub csv: Vec<(String, String)>,
    pub summary: String,
}

type RunResult = Result<Output, String>;

/// Stream indices for the config seed.
const STREAM_ANGLES: u64 = 0;
const STREAM_NDAR: u64 = 1;
const STREAM_INPUTS: u64 = 2;
const STREAM_SHOTS: u64 = 3;

pub fn run(cfg: &ExperimentConfig, base_dir: &Path) -> RunResult {
    let section_missing = || format!("workload `{}` has no section", cfg.workload.name());
    let mut out = match cfg.workload {
        crate::config::Workload::Sqed => run_sqed(cfg.sqed.as_ref().ok_or_else(section_missing)?),
        crate::config::Workload::Qaoa => run_qaoa(cfg.qaoa.as_ref().ok_or_else(section_missing)?, cfg.seed, base_dir),
        crate::config::Workload::Reservoir => {
            run_reservoir(cfg.reservoir.as_ref().ok_or_else(section_missing)?, cfg.seed)
        }
        crate::config::Workload::Synth => {
            run_synth(cfg.synth.as_ref().ok_or_else(section_missing)?, cfg.seed, base_dir)
        }
    }?;
    let mut doc = json!({
        "workload": cfg.workload.name(),
        "seed": cfg.seed,
        "config": cfg,
    });
    doc["result"] = std::mem::take(&mut out.result);
    out.result = doc;
    Ok(out)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn csv_lines(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn run_sqed(s: &SqedSection) -> RunResult {
    let initial = s.initial_levels();
    let outcome = run_gap_experiment(&s.lattice, &initial, s.t_max, s.samples).map_err(err)?;
    let series = csv_lines(
        "t,re,im,return_probability",
        outcome
            .times
            .iter()
            .zip(&outcome.series)
            .map(|(t, g)| format!("{t:.12e},{:.12e},{:.12e},{:.12e}", g.re, g.im, g.norm_sqr())),
    );
    let bins_off = outcome
        .gap_exact
        .map(|e| (outcome.gap_fft.gap - e).abs() / outcome.gap_fft.resolution);
    let result = json!({
        "gap_fft": outcome.gap_fft.gap,
        "resolution": outcome.gap_fft.resolution,
        "gap_exact": outcome.gap_exact,
        "bins_off": bins_off,
        "params": {
            "lattice": s.lattice,
            "initial": initial,
            "t_max": s.t_max,
            "samples": s.samples,
        },
    });
    let summary = match outcome.gap_exact {
        Some(e) => format!(
            "sqed: gap_fft={:.6} gap_exact={e:.6} resolution={:.6}",
            outcome.gap_fft.gap, outcome.gap_fft.resolution
        ),
        None => format!(
            "sqed: gap_fft={:.6} resolution={:.6}",
            outcome.gap_fft.gap, outcome.gap_fft.resolution
        ),
    };
    Ok(Output {
        result,
        csv: vec![("loschmidt.csv".into(), series)],
        summary,
    })
}

pub fn load_graph(source: &GraphSource, base_dir: &Path) -> Result<Graph, String> {
    match source {
        GraphSource::Edges { nodes, edges } => Graph::new(*nodes, edges.clone()).map_err(err),
        GraphSource::File { path, nodes } => {
            let full = base_dir.join(path);
            let text =
                std::fs::read_to_string(&full).map_err(|e| format!("cannot read graph {}: {e}", full.display()))?;
            Graph::parse_edge_list(&text, *nodes).map_err(err)
        }
        GraphSource::Planted { nodes, k, p, seed } => Ok(Graph::planted_colorable(*nodes, *k, *p, *seed)),
    }
}

fn run_qaoa(q: &QaoaSection, seed: u64, base_dir: &Path) -> RunResult {
    let graph = load_graph(&q.graph, base_dir)?;
    let sim = QaoaSimulator::new(&graph, q.colors).map_err(err)?;
    let angles = match &q.angles {
        Some(a) => a.clone(),
        None => {
            optimize_angles(&sim, q.depth, q.restarts, derive_seed(seed, STREAM_ANGLES))
                .map_err(err)?
                .0
        }
    };
    let expected = sim.expected_cost(&sim.state(&angles).map_err(err)?).map_err(err)?;
    let uniform = sim
        .expected_cost(
            &sim.state(&QaoaAngles {
                gammas: vec![0.0],
                betas: vec![0.0],
            })
            .map_err(err)?,
        )
        .map_err(err)?;
    let (state, _) = run_ndar(&graph, q.colors, &angles, &q.ndar, derive_seed(seed, STREAM_NDAR)).map_err(err)?;
    let brute = if q.brute_force {
        Some(brute_force_best(&graph, q.colors).map_err(err)?.0)
    } else {
        None
    };
    let rounds = csv_lines(
        "round,round_best,best,mean_cost",
        state
            .rounds
            .iter()
            .map(|r| format!("{},{},{},{:.12e}", r.round, r.round_best, r.best, r.mean_cost)),
    );
    let result = json!({
        "best_cost": state.best.cost,
        "best_assignment": state.best.assignment,
        "best_round": state.best.round,
        "brute_force_cost": brute,
        "history": state.history,
        "angles": angles,
        "expected_cost": expected,
        "uniform_expected_cost": uniform,
        "nodes": graph.num_nodes(),
        "edges": graph.num_edges(),
    });
    let summary = format!(
        "qaoa: best_cost={} of {} edges{} after {} rounds",
        state.best.cost,
        graph.num_edges(),
        brute.map(|b| format!(" (brute force {b})")).unwrap_or_default(),
        state.history.len()
    );
    Ok(Output {
        result,
        csv: vec![("rounds.csv".into(), rounds)],
        summary,
    })
}

fn run_reservoir(r: &ReservoirSection, seed: u64) -> RunResult {
    let res = Reservoir::new(&r.model).map_err(err)?;
    let u = random_inputs(r.length, derive_seed(seed, STREAM_INPUTS));
    let mut features = res.run_series(&u).map_err(err)?;
    if let Some(shots) = r.shots {
        features = shot_noise(&features, shots, derive_seed(seed, STREAM_SHOTS)).map_err(err)?;
    }
    let outcome =
        evaluate_task(&features, &u, r.task, r.model.washout, r.model.ridge, r.train_fraction).map_err(err)?;
    let mut feat_csv = Vec::new();
    features.write_csv(&mut feat_csv).map_err(err)?;
    let split = outcome.metrics.train_rows;
    let preds = csv_lines(
        "step,split,target,prediction",
        outcome
            .targets
            .iter()
            .zip(&outcome.predictions)
            .enumerate()
            .map(|(i, (y, p))| format!("{i},{},{y:.12e},{p:.12e}", if i < split { "train" } else { "test" })),
    );
    let m = &outcome.metrics;
    let result = json!({
        "nmse_train": m.nmse_train,
        "nmse_test": m.nmse_test,
        "nmse_baseline": m.nmse_baseline,
        "shots": r.shots,
        "feature_columns": features.num_columns(),
        "train_rows": m.train_rows,
        "test_rows": m.test_rows,
    });
    let summary = format!(
        "reservoir: nmse_test={:.4} nmse_baseline={:.4} features={}",
        m.nmse_test,
        m.nmse_baseline,
        features.num_columns() - 1
    );
    Ok(Output {
        result,
        csv: vec![
            ("features.csv".into(), String::from_utf8(feat_csv).map_err(err)?),
            ("predictions.csv".into(), preds),
        ],
        summary,
    })
}

pub fn synth_target(t: &SynthTarget, base_dir: &Path) -> Result<GateMatrix, String> {
    match t {
        SynthTarget::Csum { d } => csum(*d).map_err(err),
        SynthTarget::Quditx { d } => qudit_x(*d).map_err(err),
        SynthTarget::Snap { phases } => snap(phases).map_err(err),
        SynthTarget::MatrixFile { path, dims } => {
            let full = base_dir.join(path);
            let text =
                std::fs::read_to_string(&full).map_err(|e| format!("cannot read matrix {}: {e}", full.display()))?;
            GateMatrix::new(read_matrix_csv(&text).map_err(err)?, dims.clone()).map_err(err)
        }
    }
}

fn run_synth(s: &SynthSection, seed: u64, base_dir: &Path) -> RunResult {
    let target = synth_target(&s.target, base_dir)?;
    let layout = AnsatzLayout::parse(s.workspace.clone(), &s.layout).map_err(err)?;
    let r = synthesize(&target, &layout, &s.optimizer, seed).map_err(err)?;
    let trace = csv_lines(
        "iteration,objective",
        r.trace.iter().enumerate().map(|(i, f)| format!("{},{f:.12e}", i + 1)),
    );
    let mut csv = vec![("trace.csv".into(), trace)];
    if s.matrix_out {
        let u = ansatz_unitary(&layout, &r.params).map_err(err)?;
        let mut buf = Vec::new();
        write_matrix_csv(u.matrix(), &mut buf).map_err(err)?;
        csv.push(("matrix.csv".into(), String::from_utf8(buf).map_err(err)?));
    }
    let result = json!({
        "fidelity": r.fidelity,
        "leakage": r.leakage,
        "objective": r.objective,
        "params": r.params,
        "layout": layout.spec_string(),
        "workspace": s.workspace,
        "best_restart": r.best_restart,
        "iterations": r.iterations,
        "restarts": r.restarts,
    });
    let summary = format!(
        "synth: fidelity={:.6} leakage={:.2e} params={}",
        r.fidelity,
        r.leakage,
        r.params.len()
    );
    Ok(Output { result, csv, summary })
}
