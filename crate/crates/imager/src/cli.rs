//! Subcommands. Every command that reads a configuration writes
//! `manifest.json` next to its outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ris_core::design::{mutual_coherence, objective, PhaseMatrix};
use ris_core::experiment::{make_t_shape, phase_matrix, realization_seed};
use ris_core::forward::{column_normalize, measurement_matrix, synthesize, ReflectivityVector};
use ris_core::recovery::{debias_on_support, solve_l1, RecoveryConfig};
use ris_core::{CMatrix, CVector, Cx};

use crate::config::{self, ImagerConfig, TargetKind};
use crate::error::ImagerError;
use crate::manifest::{Manifest, TargetMapping};
use crate::matrix_io;
use crate::render::{self, AmplitudeMap};
use crate::sweep;

#[derive(Debug, Parser)]
#[command(name = "ris-imager", version, about = "RIS-aided single-transceiver radar imaging")]
pub struct Cli {
    /// Worker threads (0: one per core).
    #[arg(long, global = true, env = "RIS_IMAGER_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// More output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a phase matrix and report its coherence.
    Design(RunArgs),
    /// Synthesize measurements of the configured targets.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Use this phase matrix (.bin or .csv) instead of building one.
        #[arg(long)]
        phases: Option<PathBuf>,
    },
    /// Recover the scene from measurements.
    Recover {
        #[command(flatten)]
        run: RunArgs,
        /// Measurement matrix D (.bin or .csv).
        #[arg(long)]
        matrix: PathBuf,
        /// Measurement vector y (.csv, one complex column).
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Monte Carlo sweep over RIS sizes, pulse counts and phase sources.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also write one line per realization.
        #[arg(long)]
        raw: bool,
    },
    /// Render an amplitude-map CSV as a graymap image.
    Render {
        /// `row,col,amplitude` CSV.
        #[arg(long)]
        map: PathBuf,
        /// Output .pgm path.
        #[arg(long)]
        out: PathBuf,
        /// Expected grid shape, e.g. 10x10.
        #[arg(long, value_parser = parse_shape)]
        shape: Option<(usize, usize)>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Preset file, or a manifest.json from an earlier run.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// KEY=VALUE settings applied after the config file.
    #[arg(short = 'o', long = "overrides", alias = "set", num_args = 1..)]
    pub overrides: Vec<String>,
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    s.split_once(['x', 'X'])
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .filter(|&(r, c): &(usize, usize)| r > 0 && c > 0)
        .ok_or_else(|| format!("'{s}' is not ROWSxCOLS"))
}

struct Run {
    cfg: ImagerConfig,
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn start(name: &str, args: &RunArgs) -> Result<Self, ImagerError> {
        let resolved = config::load(&args.config, &args.overrides)?;
        let cfg = ImagerConfig::from_resolved(&resolved).map_err(|source| ImagerError::Config {
            path: args.config.display().to_string(),
            source,
        })?;
        std::fs::create_dir_all(&args.out).map_err(|e| ImagerError::io(&args.out, e))?;
        let mut manifest = Manifest::new(name, Some(&args.config), resolved.to_text(), &args.overrides);
        manifest.master_seed = cfg.master_seed;
        Ok(Self {
            cfg,
            out: args.out.clone(),
            manifest,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.into());
        self.out.join(name)
    }

    fn finish(mut self) -> Result<(), ImagerError> {
        let p = self.path("manifest.json");
        self.manifest.write(&p)?;
        log::info!("config sha256 {}", self.manifest.config_sha256);
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<(), ImagerError> {
    match &cli.command {
        Command::Design(args) => cmd_design(args),
        Command::Simulate { run, phases } => cmd_simulate(run, phases.as_deref()),
        Command::Recover { run, matrix, measurements } => cmd_recover(run, matrix, measurements),
        Command::Sweep { run, raw } => cmd_sweep(run, *raw),
        Command::Render { map, out, shape } => cmd_render(map, out, *shape, cli.verbose),
    }
}

fn read_matrix(path: &Path) -> Result<CMatrix, ImagerError> {
    if path.extension().is_some_and(|e| e == "csv") {
        matrix_io::read_matrix_csv(path)
    } else {
        matrix_io::read_binary(path)
    }
}

fn coherence(d: &CMatrix) -> Result<f64, ImagerError> {
    Ok(mutual_coherence(&column_normalize(d)?.0)?)
}

fn build_phases(cfg: &ImagerConfig, dict: &ris_core::forward::Dictionary) -> Result<PhaseMatrix, ImagerError> {
    Ok(phase_matrix(cfg.phase_source, dict, cfg.n_pulses, &cfg.design, cfg.design.seed)?)
}

fn write_phases(run: &mut Run, phi: &PhaseMatrix) -> Result<(), ImagerError> {
    let p = run.path("phases.bin");
    matrix_io::write_binary(phi.entries(), &p)?;
    let p = run.path("phases.csv");
    matrix_io::write_matrix_csv(phi.entries(), &p)
}

pub fn cmd_design(args: &RunArgs) -> Result<(), ImagerError> {
    let mut run = Run::start("design", args)?;
    let cfg = run.cfg.clone();
    let dict = cfg.scene.dictionary()?;
    let phi = build_phases(&cfg, &dict)?;
    run.manifest.seeds.insert("design".into(), cfg.design.seed);
    write_phases(&mut run, &phi)?;

    let d = measurement_matrix(&phi, &dict)?;
    let mu = coherence(&d)?;
    let (initial, final_j, iterations, stopped) = match phi.design_log() {
        Some(log) => {
            let p = run.path("design_log.csv");
            matrix_io::write_design_log(&log.objectives, &p)?;
            (log.initial_objective, log.final_objective(), log.iterations(), log.stopped_early)
        }
        None => {
            let j = objective(phi.entries(), &dict)?;
            (j, j, 0, false)
        }
    };
    let p = run.path("design_summary.csv");
    std::fs::write(
        &p,
        format!(
            "phase_source,N,M,initial_J,final_J,mu,iterations,stopped_early\n{},{},{},{initial},{final_j},{mu},{iterations},{stopped}\n",
            phi.provenance(),
            phi.num_pulses(),
            phi.num_elements()
        ),
    )
    .map_err(|e| ImagerError::io(&p, e))?;
    println!(
        "{} phases N={} M={}: J {initial:.6e} -> {final_j:.6e} after {iterations} iterations, mu(D) = {mu:.6}",
        phi.provenance(),
        phi.num_pulses(),
        phi.num_elements()
    );
    run.finish()
}

fn truth_for(run: &mut Run) -> Result<(ReflectivityVector, Vec<usize>), ImagerError> {
    let cfg = &run.cfg;
    match cfg.target_kind {
        TargetKind::Points => {
            let (placed, truth) = sweep::point_truth(cfg)?;
            for p in &placed {
                if p.distance > 0.0 {
                    log::warn!(
                        "target ({}, {}, {}) snapped to pixel {} ({:.3} m away)",
                        p.requested.x,
                        p.requested.y,
                        p.requested.z,
                        p.index,
                        p.distance
                    );
                }
            }
            run.manifest.target_mapping = placed.iter().map(TargetMapping::from).collect();
            let mut support: Vec<usize> = placed.iter().map(|p| p.index).collect();
            support.sort_unstable();
            Ok((truth, support))
        }
        TargetKind::TShape => {
            let (rows, cols) = cfg.scene.grid_shape();
            let support = make_t_shape(rows, cols)?;
            let mut values = CVector::zeros(rows * cols);
            support.iter().for_each(|&i| values[i] = Cx::new(1.0, 0.0));
            let grid_ref = cfg.scene.geometry()?.grid_fingerprint();
            Ok((ReflectivityVector { values, grid_ref }, support))
        }
    }
}

pub fn cmd_simulate(args: &RunArgs, phases: Option<&Path>) -> Result<(), ImagerError> {
    let mut run = Run::start("simulate", args)?;
    let cfg = run.cfg.clone();
    let dict = cfg.scene.dictionary()?;
    let phi = match phases {
        Some(p) => PhaseMatrix::from_entries(read_matrix(p)?, cfg.phase_source)?,
        None => {
            let phi = build_phases(&cfg, &dict)?;
            run.manifest.seeds.insert("design".into(), cfg.design.seed);
            write_phases(&mut run, &phi)?;
            phi
        }
    };
    let d = measurement_matrix(&phi, &dict)?;
    let (truth, support) = truth_for(&mut run)?;
    let seed = realization_seed(cfg.master_seed, dict.num_elements(), phi.num_pulses(), cfg.phase_source, 0);
    run.manifest.seeds.insert("noise".into(), seed);
    let y = synthesize(&d, &truth, cfg.sigma, seed)?;

    let p = run.path("measurement_matrix.bin");
    matrix_io::write_binary(&d, &p)?;
    let p = run.path("measurements.csv");
    matrix_io::write_vector_csv(&y.y, &p)?;
    let p = run.path("truth.csv");
    matrix_io::write_reflectivity_csv(&truth.values, &p)?;
    let p = run.path("support.csv");
    matrix_io::write_support_csv(&support, &p)?;
    println!(
        "simulated N={} measurements of {} pixels, sigma={}, {} targets",
        y.y.len(),
        truth.values.len(),
        cfg.sigma,
        support.len()
    );
    run.finish()
}

fn amplitude_map(cfg: &ImagerConfig, values: &CVector) -> Option<AmplitudeMap> {
    let (rows, cols) = cfg.scene.grid_shape();
    AmplitudeMap::new(rows, cols, values.iter().map(|z| z.norm()).collect()).ok()
}

pub fn cmd_recover(args: &RunArgs, matrix: &Path, measurements: &Path) -> Result<(), ImagerError> {
    let mut run = Run::start("recover", args)?;
    let cfg = run.cfg.clone();
    let d = read_matrix(matrix)?;
    let y = matrix_io::read_vector_csv(measurements)?;
    let t = match (cfg.sparsity, cfg.target_kind) {
        (Some(t), _) => t,
        (None, TargetKind::Points) => cfg.target_positions.len(),
        (None, TargetKind::TShape) => {
            let (rows, cols) = cfg.scene.grid_shape();
            make_t_shape(rows, cols)?.len()
        }
    };
    let rc = RecoveryConfig { sparsity: Some(t), ..cfg.recovery.clone() };
    let result = solve_l1(&d, &y, &rc)?;
    for w in &result.warnings {
        log::warn!("{w:?}");
    }
    let p = run.path("recovery.csv");
    let s = run.path("recovery_summary.csv");
    matrix_io::write_recovery(&result, &p, &s)?;
    let p = run.path("support.csv");
    matrix_io::write_support_csv(&result.support, &p)?;

    if result.support.len() <= d.nrows() {
        let refit = debias_on_support(&d, &y, &result.support)?;
        if refit.rank_deficient {
            log::warn!("support-restricted matrix is rank deficient; minimum-norm refit used");
        }
        if let Some(map) = amplitude_map(&cfg, &refit.values) {
            let p = run.path("amplitude_map.csv");
            render::write_map_csv(&map, &p)?;
            let p = run.path("amplitude_map.pgm");
            render::write_pgm(&map, &p)?;
        }
    }
    println!(
        "support {:?}, residual {:.4e}, {} iterations, converged: {}",
        result.support, result.residual_norm, result.iterations, result.converged
    );
    run.finish()
}

pub fn cmd_sweep(args: &RunArgs, raw: bool) -> Result<(), ImagerError> {
    let mut run = Run::start("sweep", args)?;
    let cfg = run.cfg.clone();
    match cfg.target_kind {
        TargetKind::Points => {
            let exp = sweep::run_point_target_experiment(&cfg)?;
            run.manifest.target_mapping = exp.placements.iter().map(TargetMapping::from).collect();
            let result = exp.result();
            let p = run.path("sweep.csv");
            sweep::export_sweep(&result, &p)?;
            let p = run.path("counts.csv");
            sweep::export_counts(&exp, &p)?;
            if raw {
                let p = run.path("realizations.csv");
                sweep::export_raw(&exp, &p)?;
            }
            for row in &result.rows {
                let cell = exp.cell(row.m, row.n, row.phase_source).expect("cell exists");
                println!(
                    "M={:<5} N={:<4} {:<9} P_e={:.4} success={:.3} ({:.1}s)",
                    row.m,
                    row.n,
                    row.phase_source.as_str(),
                    row.p_e,
                    cell.tally.success_rate(),
                    row.seconds
                );
            }
        }
        TargetKind::TShape => {
            let (shape, mut cells) = sweep::run_extended_experiment(&cfg)?;
            cells.sort_by_key(|c| (c.ris.0 * c.ris.1, c.n, c.phase_source.as_str()));
            let p = run.path("mask.csv");
            matrix_io::write_support_csv(&shape, &p)?;
            let mut table = String::from("M,N,phase_source,f1,raster_agreement,rank_deficient,iterations,converged,seconds\n");
            for c in &cells {
                let m = c.ris.0 * c.ris.1;
                let map = amplitude_map(&cfg, &CVector::from_iterator(
                    c.outcome.amplitude_map.len(),
                    c.outcome.amplitude_map.iter().map(|&a| Cx::new(a, 0.0)),
                ))
                .expect("map matches grid");
                let stem = format!("map_M{m}_N{}_{}", c.n, c.phase_source);
                let p = run.path(&format!("{stem}.csv"));
                render::write_map_csv(&map, &p)?;
                let p = run.path(&format!("{stem}.pgm"));
                render::write_pgm(&map, &p)?;
                let agreement = render::mask_agreement(&map.to_gray(), map.cols, &shape);
                table.push_str(&format!(
                    "{m},{},{},{},{agreement},{},{},{},{}\n",
                    c.n, c.phase_source, c.outcome.f1, c.outcome.rank_deficient, c.outcome.iterations, c.outcome.converged, c.seconds
                ));
                println!(
                    "M={m:<5} N={:<4} {:<9} F1={:.3} raster={:.3}",
                    c.n,
                    c.phase_source.as_str(),
                    c.outcome.f1,
                    agreement
                );
            }
            let p = run.path("extended.csv");
            std::fs::write(&p, table).map_err(|e| ImagerError::io(&p, e))?;
        }
    }
    run.finish()
}

pub fn cmd_render(map: &Path, out: &Path, shape: Option<(usize, usize)>, verbose: u8) -> Result<(), ImagerError> {
    let m = render::read_map_csv(map, shape)?;
    render::write_pgm(&m, out)?;
    if verbose >= 1 {
        print!("{}", m.ascii());
    }
    Ok(())
}
