//! Monte Carlo sweeps over RIS size, pulse count and phase source.
//!
//! Cells run in parallel and so do the realizations inside a cell. Each cell
//! keeps integer counts, so the result does not depend on scheduling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use ris_core::design::{DesignConfig, Provenance};
use ris_core::experiment::{
    make_t_shape, phase_matrix, phase_seed, place_targets, realization_seed, run_extended_target_experiment,
    run_realization, CellTally, ExtendedOutcome, PlacedTarget, RealizationOutcome,
};
use ris_core::forward::{measurement_matrix, Dictionary, ReflectivityVector};
use ris_core::recovery::RecoveryConfig;
use ris_core::{CMatrix, CVector};

use crate::config::ImagerConfig;
use crate::error::ImagerError;
use crate::matrix_io::csv_error;

pub const SWEEP_HEADER: [&str; 6] = ["M", "N", "phase_source", "P_e", "realizations", "seconds"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub phase_source: Provenance,
    pub p_e: f64,
    pub realizations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Orders rows by M, then N, then source name.
    pub fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| (a.m, a.n, a.phase_source.as_str()).cmp(&(b.m, b.n, b.phase_source.as_str())));
    }

    pub fn get(&self, m: usize, n: usize, source: Provenance) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.m == m && r.n == n && r.phase_source == source)
    }
}

/// One evaluated cell with its raw counts.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub ris: (usize, usize),
    pub n: usize,
    pub phase_source: Provenance,
    pub tally: CellTally,
    pub outcomes: Vec<RealizationOutcome>,
    pub seconds: f64,
}

impl CellReport {
    pub fn m(&self) -> usize {
        self.ris.0 * self.ris.1
    }

    pub fn row(&self) -> SweepRow {
        SweepRow {
            m: self.m(),
            n: self.n,
            phase_source: self.phase_source,
            p_e: self.tally.p_e(),
            realizations: self.tally.realizations,
            seconds: self.seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointExperiment {
    pub placements: Vec<PlacedTarget>,
    /// Ascending true support.
    pub support: Vec<usize>,
    pub cells: Vec<CellReport>,
}

impl PointExperiment {
    pub fn result(&self) -> SweepResult {
        let mut r = SweepResult {
            rows: self.cells.iter().map(CellReport::row).collect(),
        };
        r.sort();
        r
    }

    pub fn cell(&self, m: usize, n: usize, source: Provenance) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.m() == m && c.n == n && c.phase_source == source)
    }
}

/// Places the configured targets on the grid and builds the reflectivity.
pub fn point_truth(cfg: &ImagerConfig) -> Result<(Vec<PlacedTarget>, ReflectivityVector), ImagerError> {
    if cfg.target_positions.is_empty() {
        return Err(ImagerError::Usage("no targets configured".into()));
    }
    let grid = cfg.scene.grid_points()?;
    let placements = place_targets(&grid, &cfg.target_positions, cfg.placement)?;
    let mut values = CVector::zeros(grid.len());
    for (p, a) in placements.iter().zip(&cfg.target_amplitudes) {
        if values[p.index] != ris_core::Cx::new(0.0, 0.0) {
            return Err(ImagerError::Usage(format!(
                "two targets map to grid node {}; use exact placement or move one",
                p.index
            )));
        }
        values[p.index] = *a;
    }
    let geometry = cfg.scene.geometry()?;
    let truth = ReflectivityVector {
        values,
        grid_ref: geometry.grid_fingerprint(),
    };
    Ok((placements, truth))
}

/// Builds the measurement matrix of one cell.
pub fn cell_matrix(
    dict: &Dictionary,
    source: Provenance,
    n: usize,
    design: &DesignConfig,
    master_seed: u64,
) -> Result<CMatrix, ImagerError> {
    let phi = phase_matrix(source, dict, n, design, phase_seed(master_seed, dict.num_elements(), n))?;
    Ok(measurement_matrix(&phi, dict)?)
}

fn cells(cfg: &ImagerConfig) -> Vec<((usize, usize), usize, Provenance)> {
    let mut out = Vec::new();
    for &ris in &cfg.ris_sizes {
        for &n in &cfg.n_pulses_list {
            for &s in &cfg.phase_sources {
                out.push((ris, n, s));
            }
        }
    }
    out
}

fn check_sweep(cfg: &ImagerConfig) -> Result<(), ImagerError> {
    if cfg.n_pulses_list.is_empty() {
        return Err(ImagerError::Usage("experiment.n_pulses_list is empty".into()));
    }
    if cfg.phase_sources.is_empty() {
        return Err(ImagerError::Usage("experiment.phase_sources is empty".into()));
    }
    Ok(())
}

fn recovery_for(cfg: &ImagerConfig, t: usize) -> RecoveryConfig {
    RecoveryConfig {
        sparsity: Some(cfg.sparsity.unwrap_or(t)),
        ..cfg.recovery.clone()
    }
}

/// Point-target sweep over `ris_sizes × n_pulses_list × phase_sources`.
pub fn run_point_target_experiment(cfg: &ImagerConfig) -> Result<PointExperiment, ImagerError> {
    check_sweep(cfg)?;
    let (placements, truth) = point_truth(cfg)?;
    let mut support: Vec<usize> = placements.iter().map(|p| p.index).collect();
    support.sort_unstable();
    let recovery = recovery_for(cfg, support.len());

    let dicts = cfg
        .ris_sizes
        .par_iter()
        .map(|&(r, c)| Ok(((r, c), cfg.scene.with_ris(r, c).dictionary()?)))
        .collect::<Result<Vec<_>, ImagerError>>()?;

    let cells = cells(cfg)
        .into_par_iter()
        .map(|(ris, n, source)| {
            let start = Instant::now();
            let dict = &dicts.iter().find(|(k, _)| *k == ris).expect("dictionary built").1;
            let d = cell_matrix(dict, source, n, &cfg.design, cfg.master_seed)?;
            let m = dict.num_elements();
            let outcomes = (0..cfg.num_realizations)
                .into_par_iter()
                .map(|i| {
                    let seed = realization_seed(cfg.master_seed, m, n, source, i);
                    run_realization(&d, &truth, &support, cfg.sigma, seed, &recovery)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut tally = CellTally::new(support.len());
            outcomes.iter().for_each(|o| tally.record(o));
            log::info!("M={m} N={n} {source}: P_e={:.4} success={:.3}", tally.p_e(), tally.success_rate());
            Ok(CellReport {
                ris,
                n,
                phase_source: source,
                tally,
                outcomes,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>, ImagerError>>()?;

    Ok(PointExperiment { placements, support, cells })
}

#[derive(Debug, Clone)]
pub struct ExtendedCell {
    pub ris: (usize, usize),
    pub n: usize,
    pub phase_source: Provenance,
    pub outcome: ExtendedOutcome,
    pub seconds: f64,
}

/// Extended 'T' target, one noise draw per cell.
pub fn run_extended_experiment(cfg: &ImagerConfig) -> Result<(Vec<usize>, Vec<ExtendedCell>), ImagerError> {
    check_sweep(cfg)?;
    let (rows, cols) = cfg.scene.grid_shape();
    let shape = make_t_shape(rows, cols)?;
    let grid_ref = cfg.scene.geometry()?.grid_fingerprint();
    let recovery = recovery_for(cfg, shape.len());
    let cells = cells(cfg)
        .into_par_iter()
        .map(|(ris, n, source)| {
            let start = Instant::now();
            let dict = cfg.scene.with_ris(ris.0, ris.1).dictionary()?;
            let d = cell_matrix(&dict, source, n, &cfg.design, cfg.master_seed)?;
            let seed = realization_seed(cfg.master_seed, dict.num_elements(), n, source, 0);
            let outcome = run_extended_target_experiment(&d, grid_ref, &shape, cfg.sigma, seed, &recovery)?;
            log::info!("M={} N={n} {source}: F1={:.3}", dict.num_elements(), outcome.f1);
            Ok(ExtendedCell {
                ris,
                n,
                phase_source: source,
                outcome,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>, ImagerError>>()?;
    Ok((shape, cells))
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.m, self.n, self.phase_source, self.p_e, self.realizations, self.seconds
        )
    }
}

impl FromStr for SweepRow {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| format!("bad number '{}'", f[i]));
        let int = |i: usize| f[i].parse::<usize>().map_err(|_| format!("bad integer '{}'", f[i]));
        let p_e = num(3)?;
        if !(0.0..=1.0).contains(&p_e) {
            return Err(format!("P_e {p_e} outside [0, 1]"));
        }
        Ok(SweepRow {
            m: int(0)?,
            n: int(1)?,
            phase_source: f[2].parse().map_err(|_| format!("bad phase source '{}'", f[2]))?,
            p_e,
            realizations: int(4)?,
            seconds: num(5)?,
        })
    }
}

/// Sweep CSV text, rows in canonical order.
pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut sorted = result.clone();
    sorted.sort();
    let mut out = SWEEP_HEADER.join(",");
    out.push('\n');
    for row in &sorted.rows {
        out.push_str(&row.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<SweepResult, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SWEEP_HEADER.join(",").as_str()) {
        return Err(format!("header must be {}", SWEEP_HEADER.join(",")));
    }
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| l.parse().map_err(|e| format!("row {}: {e}", i + 1)))
        .collect::<Result<Vec<SweepRow>, _>>()?;
    Ok(SweepResult { rows })
}

pub fn export_sweep(result: &SweepResult, path: &Path) -> Result<(), ImagerError> {
    std::fs::write(path, sweep_to_csv(result)).map_err(|e| ImagerError::io(path, e))
}

pub fn read_sweep(path: &Path) -> Result<SweepResult, ImagerError> {
    let text = std::fs::read_to_string(path).map_err(|e| ImagerError::io(path, e))?;
    parse_sweep_csv(&text).map_err(|m| ImagerError::format(path, m))
}

/// Integer counts per cell: `M,N,phase_source,targets,realizations,missed,exact_successes`.
pub fn export_counts(exp: &PointExperiment, path: &Path) -> Result<(), ImagerError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["M", "N", "phase_source", "targets", "realizations", "missed", "exact_successes"])
        .map_err(|e| csv_error(path, e))?;
    let mut cells: Vec<&CellReport> = exp.cells.iter().collect();
    cells.sort_by_key(|c| (c.m(), c.n, c.phase_source.as_str()));
    for c in cells {
        let t = &c.tally;
        w.write_record([
            c.m().to_string(),
            c.n.to_string(),
            c.phase_source.to_string(),
            t.targets.to_string(),
            t.realizations.to_string(),
            t.missed_total.to_string(),
            t.exact_successes.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}

/// One line per realization: `M,N,phase_source,realization,seed,missed,estimated_support`.
pub fn export_raw(exp: &PointExperiment, path: &Path) -> Result<(), ImagerError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["M", "N", "phase_source", "realization", "seed", "missed", "estimated_support"])
        .map_err(|e| csv_error(path, e))?;
    let mut cells: Vec<&CellReport> = exp.cells.iter().collect();
    cells.sort_by_key(|c| (c.m(), c.n, c.phase_source.as_str()));
    for c in cells {
        for (i, o) in c.outcomes.iter().enumerate() {
            let support: Vec<String> = o.estimated.iter().map(usize::to_string).collect();
            w.write_record([
                c.m().to_string(),
                c.n.to_string(),
                c.phase_source.to_string(),
                i.to_string(),
                o.seed.to_string(),
                o.missed.to_string(),
                support.join(" "),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}
