//! Task drivers behind the command-line front end. Each task computes its
//! rows in parallel and renders them in config order, so output bytes do not
//! depend on the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::battery::{run_battery, BatteryOptions, BatteryReport};
use crate::config::{DesignConfig, ExperimentConfig, Task};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimands::{anonymous_binomial_values, compute_estimands, EstimandOptions};
use crate::estimators::{replicate_unbiasedness, ReplicationReport};
use crate::graph::InterferenceGraph;
use crate::zoo::{make_fig1_setting, Fig1SettingSpec};

/// Full-precision float for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_line(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "{}", cells.join(","));
}

// ---------------------------------------------------------------------------
// estimands

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimandRow {
    /// Constant treatment probability; `None` for heterogeneous π or a
    /// two-stage design.
    pub pi0: Option<f64>,
    pub ade: f64,
    pub aie: f64,
    pub aoe: f64,
    pub inf: Option<f64>,
    pub se_ade: f64,
    pub se_aie: f64,
    pub method: &'static str,
    pub replications: usize,
    pub design: String,
}

pub fn run_estimands(cfg: &ExperimentConfig) -> Result<Vec<EstimandRow>> {
    let model = cfg.build_model()?;
    let n = model.n();
    let points: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) => s.points().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let options = EstimandOptions {
        replications: cfg.replications,
        seed: cfg.seed,
        fd_step: cfg.fd_step,
    };
    let rows: Vec<Result<EstimandRow>> = points
        .par_iter()
        .map(|&p| {
            let design = cfg.build_design(n, p)?;
            let r = compute_estimands(&model, &design, cfg.method, &options)?;
            Ok(EstimandRow {
                pi0: design.as_bernoulli().and_then(|b| b.pi().constant_value()),
                ade: r.ade,
                aie: r.aie,
                aoe: r.aoe,
                inf: r.inf,
                se_ade: r.se_ade,
                se_aie: r.se_aie,
                method: r.method.as_str(),
                replications: r.replications,
                design: design.describe(),
            })
        })
        .collect();
    rows.into_iter().collect()
}

pub fn estimands_csv(rows: &[EstimandRow]) -> String {
    let mut out = String::from("pi0,ade,aie,aoe,inf,se_ade,se_aie,method,replications,design\n");
    for r in rows {
        csv_line(
            &mut out,
            &[
                fmt_opt(r.pi0),
                fmt_f64(r.ade),
                fmt_f64(r.aie),
                fmt_f64(r.aoe),
                fmt_opt(r.inf),
                fmt_f64(r.se_ade),
                fmt_f64(r.se_aie),
                r.method.to_string(),
                r.replications.to_string(),
                format!("\"{}\"", r.design),
            ],
        );
    }
    out
}

// ---------------------------------------------------------------------------
// fig1

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig1Row {
    pub pi: f64,
    pub ade: f64,
    pub aie: f64,
    /// `ade + aie`
    pub inf: f64,
    /// Expected mean outcome `V(π)`.
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Table {
    pub setting: u8,
    pub rows: Vec<Fig1Row>,
}

impl Fig1Table {
    pub fn file_name(&self) -> String {
        format!("fig1_setting{}.csv", self.setting)
    }
}

/// The three structural settings on a circulant graph, evaluated on the
/// binomial path over an evenly spaced π grid.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Vec<Fig1Table>> {
    let f = &cfg.fig1;
    let graph = InterferenceGraph::circulant(f.n, f.half_width)?;
    let last = (f.points - 1) as f64;
    let grid: Vec<f64> = (0..f.points)
        .map(|k| f.start + (f.stop - f.start) * k as f64 / last)
        .collect();
    (1..=3u8)
        .map(|setting| {
            let model = make_fig1_setting(Fig1SettingSpec {
                setting,
                graph: graph.clone(),
            })?;
            let rows = grid
                .par_iter()
                .map(|&pi| {
                    let v = anonymous_binomial_values(&model, pi)?;
                    Ok(Fig1Row {
                        pi,
                        ade: v.ade,
                        aie: v.aie,
                        inf: v.ade + v.aie,
                        v: v.mean_outcome,
                    })
                })
                .collect::<Vec<Result<_>>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok(Fig1Table { setting, rows })
        })
        .collect()
}

pub fn fig1_csv(table: &Fig1Table) -> String {
    let mut out = String::from("pi,ade,aie,inf,v\n");
    for r in &table.rows {
        csv_line(&mut out, &[r.pi, r.ade, r.aie, r.inf, r.v].map(fmt_f64));
    }
    out
}

// ---------------------------------------------------------------------------
// verify-theorem1

pub fn battery_options(cfg: &ExperimentConfig) -> BatteryOptions {
    let v = &cfg.verify;
    BatteryOptions {
        instances: v.instances,
        min_n: v.min_n,
        max_n: v.max_n,
        edge_probability: v.edge_probability,
        fd_step: cfg.fd_step,
        tolerance: v.tolerance,
        seed: cfg.seed,
        ..BatteryOptions::default()
    }
}

pub fn run_verify_theorem1(cfg: &ExperimentConfig) -> Result<BatteryReport> {
    run_battery(&battery_options(cfg))
}

pub fn battery_csv(report: &BatteryReport) -> String {
    let mut out = String::from("instance,kind,n,edges,ade,aie,aoe,inf,residual,tolerance,passed\n");
    for r in &report.instances {
        csv_line(
            &mut out,
            &[
                (r.index + 1).to_string(),
                r.kind.as_str().to_string(),
                r.n.to_string(),
                r.edges.to_string(),
                fmt_f64(r.ade),
                fmt_f64(r.aie),
                fmt_f64(r.aoe),
                fmt_f64(r.inf),
                fmt_f64(r.residual),
                fmt_f64(report.tolerance),
                r.passed.to_string(),
            ],
        );
    }
    out
}

// ---------------------------------------------------------------------------
// estimators

pub fn run_estimators(cfg: &ExperimentConfig) -> Result<ReplicationReport> {
    if matches!(cfg.design, Some(DesignConfig::TwoStage { .. })) {
        return Err(Error::NonBernoulliDesign("the estimators task"));
    }
    let model = cfg.build_model()?;
    let design: Design = cfg.build_design(model.n(), None)?;
    let graph = cfg.analyst_graph(&model)?;
    replicate_unbiasedness(&model, cfg.noise()?, &design, &graph, cfg.replications, cfg.seed)
}

pub fn replication_csv(r: &ReplicationReport) -> String {
    let mut out = String::from(
        "replication_count,seed,target_ade,mean_ade,sd_ade,se_ade,target_aie,mean_aie,sd_aie,se_aie,design,model,warning_flags\n",
    );
    csv_line(
        &mut out,
        &[
            r.replication_count.to_string(),
            r.seed.to_string(),
            fmt_f64(r.target_ade),
            fmt_f64(r.mean_ade),
            fmt_f64(r.sd_ade),
            fmt_f64(r.se_ade),
            fmt_f64(r.target_aie),
            fmt_f64(r.mean_aie),
            fmt_f64(r.sd_aie),
            fmt_f64(r.se_aie),
            format!("\"{}\"", r.design),
            r.model.clone(),
            r.warning_flags.clone(),
        ],
    );
    out
}

// ---------------------------------------------------------------------------
// dispatch

/// What a task produced: the files written (or `-` for stdout) and, for the
/// battery, whether every instance passed.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub written: Vec<PathBuf>,
    pub battery_passed: Option<bool>,
}

fn emit(path: Option<&Path>, contents: &str) -> Result<PathBuf> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, contents)?;
            Ok(p.to_path_buf())
        }
        None => {
            print!("{contents}");
            Ok(PathBuf::from("-"))
        }
    }
}

/// Runs `task` and writes its output. `out` overrides the config's `output`;
/// for `fig1` it names a directory.
pub fn execute(task: Task, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<TaskOutcome> {
    let target: Option<PathBuf> = out.map(Path::to_path_buf).or_else(|| cfg.output.clone());
    let target = target.as_deref();
    let mut battery_passed = None;
    let written = match task {
        Task::Estimands => {
            let rows = run_estimands(cfg)?;
            let json = target.is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
            let body = if json {
                let mut s = serde_json::to_string_pretty(&rows)?;
                s.push('\n');
                s
            } else {
                estimands_csv(&rows)
            };
            vec![emit(target, &body)?]
        }
        Task::Fig1 => {
            let dir = target.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir)?;
            run_fig1(cfg)?
                .iter()
                .map(|t| emit(Some(&dir.join(t.file_name())), &fig1_csv(t)))
                .collect::<Result<Vec<_>>>()?
        }
        Task::VerifyTheorem1 => {
            let report = run_verify_theorem1(cfg)?;
            battery_passed = Some(report.passed());
            vec![emit(target, &battery_csv(&report))?]
        }
        Task::Estimators => {
            let report = run_estimators(cfg)?;
            vec![emit(target, &replication_csv(&report))?]
        }
    };
    Ok(TaskOutcome {
        written,
        battery_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, Path::new(".")).unwrap()
    }

    #[test]
    fn setting1_sweep_is_flat() {
        let c = cfg(r#"
            seed = 1
            [model]
            kind = "fig1"
            setting = 1
            graph = { kind = "circulant", n = 500, half_width = 50 }
            [design]
            kind = "bernoulli"
            pi = 0.5
            [sweep]
            start = 0.1
            stop = 0.9
            steps = 9
        "#);
        let rows = run_estimands(&c).unwrap();
        assert_eq!(rows.len(), 9);
        for r in &rows {
            assert_eq!(r.method, "anonymous_binomial");
            assert!((r.ade - 2.0 / 3.0).abs() < 1e-12);
            assert!((r.aie - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_aoe_is_bitwise_sum() {
        let c = cfg(r#"
            seed = 1
            method = "exact"
            [model]
            kind = "saturated_linear"
            alpha = [0.1, 0.2, 0.3]
            beta = [1.0, -0.5, 0.25]
            nu = [[0.0, 0.3, 0.1], [0.2, 0.0, 0.7], [0.4, 0.6, 0.0]]
            [design]
            kind = "bernoulli"
            pi = 0.5
        "#);
        let rows = run_estimands(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].aoe.to_bits(), (rows[0].ade + rows[0].aie).to_bits());
        assert_eq!(rows[0].method, "exact");
    }

    #[test]
    fn setting3_indirect_effect_changes_sign() {
        let c = cfg(r#"
            seed = 1
            [model]
            kind = "fig1"
            setting = 3
            graph = { kind = "circulant", n = 500, half_width = 50 }
            [design]
            kind = "bernoulli"
            pi = 0.5
            [sweep]
            start = 0.1
            stop = 0.9
            steps = 9
        "#);
        let rows = run_estimands(&c).unwrap();
        assert!(rows.iter().all(|r| r.aie.is_finite() && r.ade.is_finite()));
        assert!(rows.iter().any(|r| r.aie > 0.0), "{rows:?}");
        assert!(rows.iter().any(|r| r.aie < 0.0), "{rows:?}");
    }

    #[test]
    fn fig1_tables_have_grid() {
        let mut c = cfg("seed = 0\n[fig1]\npoints = 5\n");
        c.fig1.n = 60;
        c.fig1.half_width = 5;
        let tables = run_fig1(&c).unwrap();
        assert_eq!(tables.len(), 3);
        for t in &tables {
            assert_eq!(t.rows.len(), 5);
            assert_eq!(t.rows[0].pi, 0.1);
            assert_eq!(t.rows[4].pi, 0.9);
        }
        assert!(fig1_csv(&tables[0]).starts_with("pi,ade,aie,inf,v\n"));
    }

    #[test]
    fn estimators_reject_two_stage() {
        let c = cfg(r#"
            seed = 1
            [model]
            kind = "no_interference"
            n = 4
            [design]
            kind = "two_stage"
            m = 2
            rho = 0.5
        "#);
        assert!(matches!(run_estimators(&c), Err(Error::NonBernoulliDesign(_))));
    }

    #[test]
    fn formatting_keeps_seventeen_digits() {
        assert_eq!(fmt_f64(2.0 / 3.0), "6.6666666666666663e-1");
        assert_eq!(fmt_f64(2.0 / 3.0).parse::<f64>().unwrap(), 2.0 / 3.0);
    }
}
