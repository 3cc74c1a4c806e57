//! Deterministic file emission: `<out>/<scenario>/<method>/...`.
//!
//! Floats are written with Rust's shortest round-trip formatting and JSON
//! objects with sorted keys, so identical runs give identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::ScenarioConfig;
use super::harness::{AuditReport, AuditSource, CompareReport, ConvergenceTable, ParticleOutcome};
use crate::error::{Error, Result};
use crate::godunov::GodunovRun;
use crate::metrics;
use crate::particles::{ParticleState, Reconstruction};
use crate::profile::DensityProfile;
use crate::trajectory::Trajectory;

/// Version of the file layout and column sets.
pub const FORMAT_VERSION: u32 = 1;

/// One row of `metrics.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub mass: f64,
    pub tv: f64,
    pub min_gap: Option<f64>,
    pub w1_to_reference: f64,
}

pub fn method_dir(out: &Path, scenario: &str, method: &str) -> PathBuf {
    out.join(scenario).join(method)
}

struct Csv {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl Csv {
    fn create_raw(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Csv {
            path: path.to_path_buf(),
            inner: BufWriter::new(file),
        })
    }

    fn create(path: &Path, header: &str) -> Result<Self> {
        let mut csv = Self::create_raw(path)?;
        csv.line(format_args!("{header}"))?;
        Ok(csv)
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        writeln!(self.inner, "{args}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory<ParticleState>) -> Result<()> {
    let mut csv = Csv::create(path, "t,i,x")?;
    for s in traj.snapshots() {
        for (i, x) in s.state.positions().iter().enumerate() {
            csv.line(format_args!("{},{i},{x}", s.time))?;
        }
    }
    csv.finish()
}

pub fn write_density_csv(path: &Path, traj: &Trajectory<DensityProfile>) -> Result<()> {
    let mut csv = Csv::create(path, "t,x_left,x_right,rho")?;
    for s in traj.snapshots() {
        for (a, b, r) in s.state.cells() {
            csv.line(format_args!("{},{a},{b},{r}", s.time))?;
        }
    }
    csv.finish()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut csv = Csv::create(path, "t,mass,tv,min_gap,w1_to_reference")?;
    for r in rows {
        let gap = r.min_gap.map(|g| g.to_string()).unwrap_or_default();
        csv.line(format_args!(
            "{},{},{},{gap},{}",
            r.t, r.mass, r.tv, r.w1_to_reference
        ))?;
    }
    csv.finish()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut csv = Csv::create_raw(path)?;
    for item in items {
        let line = serde_json::to_string(item)?;
        csv.line(format_args!("{line}"))?;
    }
    csv.finish()
}

/// `meta.json`: method, resolved config, versions and run summary.
pub fn write_meta(path: &Path, cfg: &ScenarioConfig, method: &str, summary: Value) -> Result<()> {
    let meta = json!({
        "method": method,
        "config": cfg,
        "versions": {
            "nlftl": env!("CARGO_PKG_VERSION"),
            "format": FORMAT_VERSION,
        },
        "summary": summary,
    });
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Metrics rows with the 1-Wasserstein distance to a reference profile
/// (rescaled to equal mass).
pub fn metrics_rows(
    traj: &Trajectory<DensityProfile>,
    reference: &DensityProfile,
    min_gaps: Option<&[f64]>,
) -> Result<Vec<MetricsRow>> {
    traj.snapshots()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Ok(MetricsRow {
                t: s.time,
                mass: s.diagnostics.mass,
                tv: s.diagnostics.total_variation,
                min_gap: min_gaps.map(|g| g[k]),
                w1_to_reference: metrics::wasserstein1_rescaled(&s.state, reference)?,
            })
        })
        .collect()
}

fn prepare(out: &Path, cfg: &ScenarioConfig, method: &str) -> Result<PathBuf> {
    let dir = method_dir(out, &cfg.name, method);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn particle_files(dir: &Path, outcome: &ParticleOutcome) -> Result<()> {
    let traj = &outcome.run.trajectory;
    write_trajectory_csv(&dir.join("trajectory.csv"), traj)?;
    let densities = outcome.densities(Reconstruction::Forward);
    write_density_csv(&dir.join("density.csv"), &densities)?;
    let gaps: Vec<f64> = traj.snapshots().iter().map(|s| s.state.min_gap()).collect();
    let reference = &densities.first().expect("run has snapshots").state;
    write_metrics_csv(
        &dir.join("metrics.csv"),
        &metrics_rows(&densities, reference, Some(&gaps))?,
    )
}

fn particle_summary(outcome: &ParticleOutcome) -> Value {
    let s = &outcome.run.stats;
    json!({
        "particles": outcome.initial.cells(),
        "mass": outcome.initial.total_mass(),
        "critical_gap": outcome.initial.critical_gap(),
        "min_gap": s.min_gap,
        "gap_tolerance": s.gap_tolerance,
        "accepted_steps": s.accepted_steps,
        "rejected_steps": s.rejected_steps,
        "rhs_evaluations": s.rhs_evaluations,
    })
}

fn godunov_files(dir: &Path, run: &GodunovRun) -> Result<()> {
    write_density_csv(&dir.join("density.csv"), &run.trajectory)?;
    let reference = &run.trajectory.first().expect("run has snapshots").state;
    write_metrics_csv(
        &dir.join("metrics.csv"),
        &metrics_rows(&run.trajectory, reference, None)?,
    )
}

fn godunov_summary(run: &GodunovRun) -> Value {
    let s = &run.stats;
    json!({
        "cells": run.grid.cells(),
        "dx": run.grid.dx(),
        "steps": s.steps,
        "initial_mass": s.initial_mass,
        "final_mass": s.final_mass,
        "mass_drift": s.mass_drift(),
        "clamp_total": s.clamp_total,
        "clamp_warnings": s.clamp_warnings,
    })
}

pub fn emit_particles(
    out: &Path,
    cfg: &ScenarioConfig,
    outcome: &ParticleOutcome,
) -> Result<PathBuf> {
    let dir = prepare(out, cfg, "particles")?;
    particle_files(&dir, outcome)?;
    write_meta(
        &dir.join("meta.json"),
        cfg,
        "particles",
        particle_summary(outcome),
    )?;
    Ok(dir)
}

pub fn emit_godunov(out: &Path, cfg: &ScenarioConfig, run: &GodunovRun) -> Result<PathBuf> {
    let dir = prepare(out, cfg, "godunov")?;
    godunov_files(&dir, run)?;
    write_meta(&dir.join("meta.json"), cfg, "godunov", godunov_summary(run))?;
    Ok(dir)
}

/// Writes both methods' directories plus `compare/` with per-snapshot
/// distances.
pub fn emit_compare(out: &Path, cfg: &ScenarioConfig, report: &CompareReport) -> Result<PathBuf> {
    emit_particles(out, cfg, &report.particles)?;
    emit_godunov(out, cfg, &report.godunov)?;
    let dir = prepare(out, cfg, "compare")?;
    let centered = report.particles.densities(Reconstruction::Centered);
    write_density_csv(&dir.join("density.csv"), &centered)?;
    let mut csv = Csv::create(&dir.join("distances.csv"), "t,l1,w1")?;
    for r in &report.rows {
        csv.line(format_args!("{},{},{}", r.t, r.l1, r.w1))?;
    }
    csv.finish()?;
    let rows: Vec<MetricsRow> = centered
        .snapshots()
        .iter()
        .zip(&report.rows)
        .map(|(s, r)| MetricsRow {
            t: s.time,
            mass: s.state.mass(),
            tv: metrics::total_variation(&s.state),
            min_gap: None,
            w1_to_reference: r.w1,
        })
        .collect();
    write_metrics_csv(&dir.join("metrics.csv"), &rows)?;
    let summary = json!({
        "reconstruction": "centered",
        "final_l1": report.rows.last().map(|r| r.l1),
        "final_w1": report.rows.last().map(|r| r.w1),
        "particles": particle_summary(&report.particles),
        "godunov": godunov_summary(&report.godunov),
    });
    write_meta(&dir.join("meta.json"), cfg, "compare", summary)?;
    Ok(dir)
}

pub fn emit_convergence(
    out: &Path,
    cfg: &ScenarioConfig,
    table: &ConvergenceTable,
) -> Result<PathBuf> {
    let dir = prepare(out, cfg, "converge")?;
    let mut csv = Csv::create(&dir.join("convergence.csv"), "n,error,ratio")?;
    for r in &table.rows {
        let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
        csv.line(format_args!("{},{},{ratio}", r.n, r.error))?;
    }
    csv.finish()?;
    write_meta(
        &dir.join("meta.json"),
        cfg,
        "converge",
        serde_json::to_value(table)?,
    )?;
    Ok(dir)
}

/// Writes the audited trajectory and `entropy.jsonl` to
/// `<out>/<scenario>/<mode>/`.
pub fn emit_entropy_audit(
    out: &Path,
    cfg: &ScenarioConfig,
    report: &AuditReport,
) -> Result<PathBuf> {
    let dir = prepare(out, cfg, report.mode.as_str())?;
    let source = match &report.source {
        AuditSource::Particles(outcome) => {
            particle_files(&dir, outcome)?;
            particle_summary(outcome)
        }
        AuditSource::Godunov(run) => {
            godunov_files(&dir, run)?;
            godunov_summary(run)
        }
        AuditSource::Frozen(profile) => {
            let end = cfg.entropy.horizons.iter().copied().fold(0.0, f64::max) + 1.0;
            let traj = super::harness::frozen_trajectory(profile, end);
            write_density_csv(&dir.join("density.csv"), &traj)?;
            write_metrics_csv(
                &dir.join("metrics.csv"),
                &metrics_rows(&traj, profile, None)?,
            )?;
            json!({ "mass": profile.mass() })
        }
    };
    write_jsonl(&dir.join("entropy.jsonl"), &report.entries)?;
    let summary = json!({
        "mode": report.mode.as_str(),
        "evaluations": report.entries.len(),
        "flagged": report.flagged().count(),
        "first_flagged_horizon": report.first_flagged_horizon(),
        "trajectory": source,
    });
    write_meta(&dir.join("meta.json"), cfg, "entropy-audit", summary)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin_scenario, run_godunov, run_particles};

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn particle_files_have_declared_headers() {
        let mut cfg = builtin_scenario("single-step").unwrap();
        cfg.particles = 8;
        cfg.output_times = Some(vec![0.5]);
        let tmp = tempfile::tempdir().unwrap();
        let outcome = run_particles(&cfg).unwrap();
        let dir = emit_particles(tmp.path(), &cfg, &outcome).unwrap();
        assert_eq!(dir, tmp.path().join("single-step").join("particles"));
        let traj = read(&dir, "trajectory.csv");
        assert!(traj.starts_with("t,i,x\n0,0,-1\n"));
        assert_eq!(traj.lines().count(), 1 + 3 * 9);
        assert!(read(&dir, "density.csv").starts_with("t,x_left,x_right,rho\n"));
        let metrics = read(&dir, "metrics.csv");
        assert!(metrics.starts_with("t,mass,tv,min_gap,w1_to_reference\n0,"));
        let meta: Value = serde_json::from_str(&read(&dir, "meta.json")).unwrap();
        let cfg_back: ScenarioConfig = serde_json::from_value(meta["config"].clone()).unwrap();
        assert_eq!(cfg_back, cfg);
        assert_eq!(meta["versions"]["nlftl"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn godunov_metrics_leave_gap_empty() {
        let mut cfg = builtin_scenario("two-step-0206").unwrap();
        cfg.grid.cells = 100;
        cfg.output_times = Some(vec![0.5]);
        let tmp = tempfile::tempdir().unwrap();
        let run = run_godunov(&cfg).unwrap();
        let dir = emit_godunov(tmp.path(), &cfg, &run).unwrap();
        let metrics = read(&dir, "metrics.csv");
        let row: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[3], "");
        assert_eq!(read(&dir, "density.csv").lines().count(), 1 + 3 * 100);
    }
}
