//! Building blocks of the support-recovery experiments: scene description,
//! target placement, the error metrics, seed splitting, and single
//! realization evaluation.
//!
//! Aggregation keeps integer counts ([`CellTally`]) so that realizations can
//! be evaluated in any order, or in parallel, and still produce identical
//! results.

use alloc::string::String;
use alloc::vec::Vec;

use crate::design::{design, dft_phases, random_phases, DesignConfig, PhaseMatrix, Provenance};
use crate::error::{invalid, Result};
use crate::forward::{build_dictionary, synthesize, Dictionary, ReflectivityVector};
use crate::geometry::{build_ris_rectangular, build_target_grid, RadioConstants, SceneGeometry};
use crate::recovery::{debias_on_support, extract_support, solve_l1, RecoveryConfig};
use crate::seed::fold;
use crate::{CMatrix, CVector, Cx, Point};

/// Parametric description of a scene: RIS lattice, pixel grid, and radios.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub tx: Point,
    pub rx: Point,
    pub ris_rows: usize,
    pub ris_cols: usize,
    pub ris_spacing_m: f64,
    pub ris_origin: Point,
    pub grid_range_points: usize,
    pub grid_crossrange_points: usize,
    pub grid_spacing_m: f64,
    pub grid_origin: Point,
    pub constants: RadioConstants,
}

impl SceneSpec {
    /// 10 GHz bistatic scene: transmitter at (0.2, 0.1, 0.1) m, receiver at
    /// (0, 0.7, 0) m, a 20×20 RIS with λ/4 spacing in the YZ plane with its
    /// corner at the origin, and a 10×10 grid with 0.6 m pitch starting at
    /// (2, 0, 0) m.
    pub fn reference() -> Self {
        let constants =
            RadioConstants::new(1e10, 3e8, 1.0, Cx::new(1.0, 0.0)).expect("valid constants");
        Self {
            tx: Point::new(0.2, 0.1, 0.1),
            rx: Point::new(0.0, 0.7, 0.0),
            ris_rows: 20,
            ris_cols: 20,
            ris_spacing_m: constants.wavelength_m() / 4.0,
            ris_origin: Point::zeros(),
            grid_range_points: 10,
            grid_crossrange_points: 10,
            grid_spacing_m: 0.6,
            grid_origin: Point::new(2.0, 0.0, 0.0),
            constants,
        }
    }

    /// Same scene with a different RIS lattice.
    pub fn with_ris(&self, rows: usize, cols: usize) -> Self {
        Self {
            ris_rows: rows,
            ris_cols: cols,
            ..self.clone()
        }
    }

    pub fn num_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn num_pixels(&self) -> usize {
        self.grid_range_points * self.grid_crossrange_points
    }

    /// `(rows, cols)` of the pixel grid; rows run along range.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.grid_range_points, self.grid_crossrange_points)
    }

    pub fn grid_points(&self) -> Result<Vec<Point>> {
        build_target_grid(
            self.grid_range_points,
            self.grid_crossrange_points,
            self.grid_spacing_m,
            self.grid_origin,
        )
    }

    pub fn geometry(&self) -> Result<SceneGeometry> {
        let ris = build_ris_rectangular(self.ris_rows, self.ris_cols, self.ris_spacing_m, self.ris_origin)?;
        SceneGeometry::new(self.tx, self.rx, ris, self.grid_points()?, self.constants)
    }

    /// Dictionary at the carrier frequency.
    pub fn dictionary(&self) -> Result<Dictionary> {
        let g = self.geometry()?;
        build_dictionary(&g, self.constants.angular_frequency())
    }
}

/// How requested target coordinates are mapped onto the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Coordinates must coincide with a grid node (within 1e−9 m).
    Exact,
    /// Snap to the nearest node; ties go to the lower index.
    Nearest,
}

/// Grid node assigned to a requested target position.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedTarget {
    pub requested: Point,
    pub index: usize,
    pub node: Point,
    pub distance: f64,
}

const ON_GRID_TOL: f64 = 1e-9;

pub fn place_targets(grid: &[Point], positions: &[Point], placement: Placement) -> Result<Vec<PlacedTarget>> {
    if grid.is_empty() {
        return Err(invalid!("cannot place targets on an empty grid"));
    }
    positions
        .iter()
        .map(|p| {
            let (index, distance) = grid
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - p).norm()))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            if placement == Placement::Exact && distance > ON_GRID_TOL {
                return Err(invalid!(
                    "target ({}, {}, {}) is off the grid (nearest node {} at {distance:.3e} m)",
                    p.x,
                    p.y,
                    p.z,
                    index
                ));
            }
            Ok(PlacedTarget {
                requested: *p,
                index,
                node: grid[index],
                distance,
            })
        })
        .collect()
}

/// Fraction of true indices missing from the estimate, `|S \ Ŝ| / T`.
pub fn support_error(true_support: &[usize], estimated: &[usize], t: usize) -> Result<f64> {
    if t == 0 || true_support.len() != t {
        return Err(invalid!(
            "true support has {} indices but T = {t}",
            true_support.len()
        ));
    }
    Ok(missed(true_support, estimated) as f64 / t as f64)
}

fn missed(true_support: &[usize], estimated: &[usize]) -> usize {
    true_support.iter().filter(|i| !estimated.contains(i)).count()
}

/// F1 score between two index sets. Two empty sets score 1.
pub fn f1_score(true_support: &[usize], estimated: &[usize]) -> f64 {
    if true_support.is_empty() && estimated.is_empty() {
        return 1.0;
    }
    let hits = true_support.iter().filter(|i| estimated.contains(i)).count() as f64;
    2.0 * hits / (true_support.len() + estimated.len()) as f64
}

/// Letter 'T' on a `rows × cols` grid: the full first row plus column
/// `cols / 2` below it.
pub fn make_t_shape(rows: usize, cols: usize) -> Result<Vec<usize>> {
    if rows < 3 || cols < 3 {
        return Err(invalid!("the T shape needs at least a 3x3 grid, got {rows}x{cols}"));
    }
    let center = cols / 2;
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.extend((1..rows).map(|r| r * cols + center));
    Ok(idx)
}

/// Seed of realization `i` in the cell `(M, N, source)`:
/// `fold([master, M, N, tag(source), i])` with `fold` the SplitMix64 chain
/// `s ← mix64(s ^ word)` started at zero.
pub fn realization_seed(master: u64, m: usize, n: usize, source: Provenance, i: usize) -> u64 {
    fold(&[master, m as u64, n as u64, source_tag(source), i as u64])
}

/// Seed of the random initial or baseline phases for cell `(M, N)`.
pub fn phase_seed(master: u64, m: usize, n: usize) -> u64 {
    fold(&[master, m as u64, n as u64, 0x5048_4153_45])
}

fn source_tag(source: Provenance) -> u64 {
    match source {
        Provenance::Designed => 1,
        Provenance::Dft => 2,
        Provenance::Random => 3,
    }
}

/// Builds the phase matrix of the requested kind. Designed and random
/// matrices draw their phases from `seed`.
pub fn phase_matrix(
    source: Provenance,
    dict: &Dictionary,
    n_pulses: usize,
    design_config: &DesignConfig,
    seed: u64,
) -> Result<PhaseMatrix> {
    match source {
        Provenance::Designed => {
            let cfg = DesignConfig { seed, ..design_config.clone() };
            design(dict, n_pulses, &cfg)
        }
        Provenance::Dft => dft_phases(n_pulses, dict.num_elements()),
        Provenance::Random => Ok(random_phases(n_pulses, dict.num_elements(), seed)),
    }
}

/// Outcome of one noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub seed: u64,
    pub estimated: Vec<usize>,
    pub missed: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Synthesizes `y = D r + n` with the given seed, recovers with known `T`,
/// and counts missed true pixels.
pub fn run_realization(
    d: &CMatrix,
    truth: &ReflectivityVector,
    true_support: &[usize],
    sigma: f64,
    seed: u64,
    recovery: &RecoveryConfig,
) -> Result<RealizationOutcome> {
    let t = true_support.len();
    let y = synthesize(d, truth, sigma, seed)?;
    let cfg = RecoveryConfig { sparsity: Some(t), ..recovery.clone() };
    let out = solve_l1(d, &y.y, &cfg)?;
    Ok(RealizationOutcome {
        seed,
        missed: missed(true_support, &out.support),
        estimated: out.support,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Integer error counts of one sweep cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellTally {
    pub targets: usize,
    pub realizations: usize,
    pub missed_total: usize,
    pub exact_successes: usize,
}

impl CellTally {
    pub fn new(targets: usize) -> Self {
        Self { targets, ..Default::default() }
    }

    pub fn record(&mut self, outcome: &RealizationOutcome) {
        self.realizations += 1;
        self.missed_total += outcome.missed;
        if outcome.missed == 0 {
            self.exact_successes += 1;
        }
    }

    pub fn merge(mut self, other: &CellTally) -> Self {
        self.realizations += other.realizations;
        self.missed_total += other.missed_total;
        self.exact_successes += other.exact_successes;
        self
    }

    /// Empirical `P_e`.
    pub fn p_e(&self) -> f64 {
        if self.realizations == 0 {
            return 0.0;
        }
        self.missed_total as f64 / (self.targets * self.realizations) as f64
    }

    /// Fraction of realizations with the full support correct.
    pub fn success_rate(&self) -> f64 {
        if self.realizations == 0 {
            return 0.0;
        }
        self.exact_successes as f64 / self.realizations as f64
    }
}

/// Sequential evaluation of one cell.
pub fn evaluate_cell(
    d: &CMatrix,
    truth: &ReflectivityVector,
    true_support: &[usize],
    sigma: f64,
    seeds: impl IntoIterator<Item = u64>,
    recovery: &RecoveryConfig,
) -> Result<CellTally> {
    let mut tally = CellTally::new(true_support.len());
    for seed in seeds {
        tally.record(&run_realization(d, truth, true_support, sigma, seed, recovery)?);
    }
    Ok(tally)
}

/// Reconstruction of an extended target.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedOutcome {
    pub r_hat: CVector,
    pub estimated: Vec<usize>,
    /// Modulus of the support-restricted least-squares refit, one per pixel.
    pub amplitude_map: Vec<f64>,
    pub f1: f64,
    pub rank_deficient: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Recovers an extended target made of unit-amplitude pixels `shape`.
pub fn run_extended_target_experiment(
    d: &CMatrix,
    grid_ref: u64,
    shape: &[usize],
    sigma: f64,
    seed: u64,
    recovery: &RecoveryConfig,
) -> Result<ExtendedOutcome> {
    if shape.is_empty() {
        return Err(invalid!("the extended target needs at least one pixel"));
    }
    let k = d.ncols();
    let mut values = CVector::zeros(k);
    for &i in shape {
        if i >= k {
            return Err(invalid!("pixel {i} out of range (K = {k})"));
        }
        values[i] = Cx::new(1.0, 0.0);
    }
    let truth = ReflectivityVector { values, grid_ref };
    let y = synthesize(d, &truth, sigma, seed)?;
    let cfg = RecoveryConfig { sparsity: Some(shape.len()), ..recovery.clone() };
    let out = solve_l1(d, &y.y, &cfg)?;
    let estimated = extract_support(&out.r_hat, shape.len())?;
    let refit = if estimated.len() <= d.nrows() {
        debias_on_support(d, &y.y, &estimated)?
    } else {
        crate::recovery::Debiased { values: out.r_hat.clone(), rank_deficient: true }
    };
    Ok(ExtendedOutcome {
        f1: f1_score(shape, &estimated),
        amplitude_map: refit.values.iter().map(|z| z.norm()).collect(),
        rank_deficient: refit.rank_deficient,
        r_hat: out.r_hat,
        estimated,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Human-readable label of a cell, e.g. `M=400 N=12 designed`.
pub fn cell_label(m: usize, n: usize, source: Provenance) -> String {
    alloc::format!("M={m} N={n} {source}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::measurement_matrix;

    #[test]
    fn support_error_examples() {
        assert_eq!(support_error(&[1, 2, 3], &[1, 2, 3], 3).unwrap(), 0.0);
        assert_eq!(support_error(&[1, 2, 3], &[4, 5, 6], 3).unwrap(), 1.0);
        assert_eq!(support_error(&[1, 2, 3], &[1, 2, 7], 3).unwrap(), 1.0 / 3.0);
        assert!(support_error(&[1, 2], &[1, 2], 3).is_err());
    }

    #[test]
    fn t_shape_examples() {
        assert_eq!(make_t_shape(3, 3).unwrap(), vec![0, 1, 2, 4, 7]);
        let t = make_t_shape(10, 10).unwrap();
        assert_eq!(t.len(), 19);
        assert!(make_t_shape(2, 5).is_err());
        // odd widths are mirror symmetric
        for (rows, cols) in [(3, 3), (5, 7), (9, 11)] {
            let t = make_t_shape(rows, cols).unwrap();
            for &i in &t {
                let (r, c) = (i / cols, i % cols);
                assert!(t.contains(&(r * cols + (cols - 1 - c))));
            }
        }
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(f1_score(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(f1_score(&[1, 2, 3, 4], &[1, 2, 5, 6]), 0.5);
    }

    #[test]
    fn seeds_are_distinct_across_cells() {
        let a = realization_seed(7, 400, 12, Provenance::Designed, 0);
        assert_eq!(a, realization_seed(7, 400, 12, Provenance::Designed, 0));
        assert_ne!(a, realization_seed(7, 400, 12, Provenance::Dft, 0));
        assert_ne!(a, realization_seed(7, 400, 16, Provenance::Designed, 0));
        assert_ne!(a, realization_seed(7, 100, 12, Provenance::Designed, 0));
        assert_ne!(a, realization_seed(7, 400, 12, Provenance::Designed, 1));
        assert_ne!(a, realization_seed(8, 400, 12, Provenance::Designed, 0));
    }

    #[test]
    fn nearest_and_exact_placement() {
        let spec = SceneSpec::reference();
        let grid = spec.grid_points().unwrap();
        let requested = [
            Point::new(5.6, 0.6, 0.0),
            Point::new(9.2, 2.4, 0.0),
            Point::new(6.2, 4.8, 0.0),
        ];
        let placed = place_targets(&grid, &requested, Placement::Nearest).unwrap();
        let idx: Vec<usize> = placed.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![61, 94, 78]);
        assert!(placed[0].distance < 1e-9);
        assert!((placed[1].distance - 1.8).abs() < 1e-9);

        let err = place_targets(&grid, &requested, Placement::Exact).unwrap_err();
        assert!(alloc::format!("{err}").contains("9.2"));
    }

    #[test]
    fn noiseless_gaussian_cell_is_exact() {
        let v = crate::forward::complex_gaussian_noise(10 * 16, 1.0, 4);
        let d = CMatrix::from_iterator(10, 16, v.iter().copied());
        let mut values = CVector::zeros(16);
        values[1] = Cx::new(1.0, 0.0);
        values[7] = Cx::new(0.0, -1.0);
        let truth = ReflectivityVector { values, grid_ref: 0 };
        let cfg = RecoveryConfig {
            regularization: crate::recovery::Regularization::Relative(0.01),
            max_iterations: 20_000,
            convergence_tol: 1e-12,
            sparsity: None,
        };
        let tally = evaluate_cell(&d, &truth, &[1, 7], 0.0, [1, 2, 3], &cfg).unwrap();
        assert_eq!(tally.realizations, 3);
        assert_eq!(tally.p_e(), 0.0);
        assert_eq!(tally.success_rate(), 1.0);
    }

    #[test]
    fn tally_merge_is_order_independent() {
        let outcomes = [
            RealizationOutcome { seed: 0, estimated: vec![], missed: 1, iterations: 1, converged: true },
            RealizationOutcome { seed: 1, estimated: vec![], missed: 0, iterations: 1, converged: true },
            RealizationOutcome { seed: 2, estimated: vec![], missed: 3, iterations: 1, converged: true },
        ];
        let mut a = CellTally::new(3);
        outcomes.iter().for_each(|o| a.record(o));
        let mut b = CellTally::new(3);
        outcomes.iter().rev().for_each(|o| b.record(o));
        assert_eq!(a, b);
        assert_eq!(a.missed_total, 4);
        assert_eq!(a.exact_successes, 1);
        assert!((a.p_e() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn extended_single_pixel_is_point_target() {
        let spec = SceneSpec::reference().with_ris(6, 6);
        let dict = spec.dictionary().unwrap();
        let phi = random_phases(8, 36, 1);
        let d = measurement_matrix(&phi, &dict).unwrap();
        let cfg = RecoveryConfig {
            regularization: crate::recovery::Regularization::Relative(0.01),
            max_iterations: 20_000,
            convergence_tol: 1e-12,
            sparsity: None,
        };
        let out = run_extended_target_experiment(&d, 0, &[42], 0.0, 0, &cfg).unwrap();
        assert_eq!(out.f1, 1.0);
        assert_eq!(out.estimated, vec![42]);
        assert!((out.amplitude_map[42] - 1.0).abs() < 1e-6);
        assert!(run_extended_target_experiment(&d, 0, &[], 0.0, 0, &cfg).is_err());
    }
}
