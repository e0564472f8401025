//! RIS phase profile design.
//!
//! The design minimizes the Gram mismatch of the unnormalized measurement
//! matrix,
//!
//! ```text
//! J(Φ) = ‖ Ψᴴ Qᴴ Φᴴ Φ Q Ψ − I ‖²_F,   |Φ_ij| = 1,
//! ```
//!
//! by projected gradient descent: a gradient step on `Φ` followed by an
//! entrywise projection onto the unit circle.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::forward::{column_normalize, gram, Dictionary};
use crate::{CMatrix, Cx};

/// Where a phase matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Designed,
    Dft,
    Random,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Designed => "designed",
            Provenance::Dft => "dft",
            Provenance::Random => "random",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "designed" => Ok(Provenance::Designed),
            "dft" => Ok(Provenance::Dft),
            "random" => Ok(Provenance::Random),
            other => Err(invalid!("unknown phase source '{other}' (designed, dft, random)")),
        }
    }
}

/// Objective trace of one design run.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignLog {
    /// `J(Φ₀)`.
    pub initial_objective: f64,
    /// `J(Φ_k)` after iteration `k = 1, 2, …`.
    pub objectives: Vec<f64>,
    pub stopped_early: bool,
}

impl DesignLog {
    pub fn iterations(&self) -> usize {
        self.objectives.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(self.initial_objective)
    }
}

/// N×M matrix of unit-modulus RIS phase factors, one row per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    entries: CMatrix,
    provenance: Provenance,
    design_log: Option<DesignLog>,
}

/// Entries may deviate from unit modulus by at most this much.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

impl PhaseMatrix {
    pub fn from_entries(entries: CMatrix, provenance: Provenance) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(invalid!("phase matrix must be non-empty"));
        }
        if let Some((i, z)) = entries
            .iter()
            .enumerate()
            .find(|(_, z)| !((z.norm() - 1.0).abs() <= UNIT_MODULUS_TOL))
        {
            return Err(invalid!(
                "phase entry {i} (column-major) has modulus {} instead of 1",
                z.norm()
            ));
        }
        Ok(Self {
            entries,
            provenance,
            design_log: None,
        })
    }

    /// Phases `φ_{n,m}` in radians; entry is `e^{−jφ}`.
    pub fn from_phases(phases: &[f64], n_pulses: usize, provenance: Provenance) -> Result<Self> {
        if n_pulses == 0 || phases.len() % n_pulses != 0 {
            return Err(invalid!(
                "{} phases cannot form {n_pulses} rows",
                phases.len()
            ));
        }
        let m = phases.len() / n_pulses;
        let entries = CMatrix::from_fn(n_pulses, m, |n, j| Cx::from_polar(1.0, -phases[n * m + j]));
        Self::from_entries(entries, provenance)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn design_log(&self) -> Option<&DesignLog> {
        self.design_log.as_ref()
    }

    /// Number of pulses `N`.
    pub fn num_pulses(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of RIS elements `M`.
    pub fn num_elements(&self) -> usize {
        self.entries.ncols()
    }
}

/// Settings of the projected gradient design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub step_size: f64,
    pub max_iter: usize,
    /// Seed of the random initial phases `Φ₀`.
    pub seed: u64,
    /// Stop when `|J_k − J_{k−1}| / max(J_{k−1}, 1e−30)` drops below this. Zero disables.
    pub objective_tolerance: f64,
    /// Scale each step to `step_size · g / ‖g‖_F`.
    pub normalize_gradient: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            max_iter: 1000,
            seed: 0,
            objective_tolerance: 0.0,
            normalize_gradient: false,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(invalid!("step size must be positive, got {}", self.step_size));
        }
        if self.max_iter == 0 {
            return Err(invalid!("max_iter must be at least 1"));
        }
        if !(self.objective_tolerance >= 0.0) {
            return Err(invalid!(
                "objective tolerance must be nonnegative, got {}",
                self.objective_tolerance
            ));
        }
        Ok(())
    }
}

/// Precomputed `A = QΨ` and `Aᴴ` for repeated objective/gradient evaluation.
struct GramProblem {
    a: CMatrix,
    a_h: CMatrix,
}

impl GramProblem {
    fn new(dict: &Dictionary) -> Self {
        let a = dict.weighted();
        let a_h = a.adjoint();
        Self { a, a_h }
    }

    fn check(&self, phi: &CMatrix) -> Result<()> {
        if phi.ncols() != self.a.nrows() {
            return Err(invalid!(
                "phase matrix has {} columns but the dictionary has {} elements",
                phi.ncols(),
                self.a.nrows()
            ));
        }
        Ok(())
    }

    /// Returns `(D, Dᴴ D − I)`.
    fn mismatch(&self, phi: &CMatrix) -> (CMatrix, CMatrix) {
        let d = phi * &self.a;
        let mut e = d.ad_mul(&d);
        for i in 0..e.nrows() {
            e[(i, i)] -= Cx::new(1.0, 0.0);
        }
        (d, e)
    }

    fn objective(&self, phi: &CMatrix) -> f64 {
        let (_, e) = self.mismatch(phi);
        e.norm_squared()
    }

    fn objective_and_gradient(&self, phi: &CMatrix) -> (f64, CMatrix) {
        let (d, e) = self.mismatch(phi);
        let j = e.norm_squared();
        (j, (d * e) * &self.a_h)
    }
}

/// `J(Φ) = ‖ΨᴴQᴴΦᴴΦQΨ − I‖²_F`, evaluated for any complex `Φ`.
pub fn objective(phi: &CMatrix, dict: &Dictionary) -> Result<f64> {
    let p = GramProblem::new(dict);
    p.check(phi)?;
    Ok(p.objective(phi))
}

/// Descent direction `Φ Q Ψ (ΨᴴQᴴΦᴴΦQΨ − I) Ψᴴ Qᴴ`.
///
/// This is half of the conjugate Wirtinger derivative `∂J/∂Φ*`; the missing
/// factor is absorbed into the step size. For a perturbation `Δ`,
/// `d/dε J(Φ + εΔ)|₀ = 4 Re⟨G, Δ⟩` with `⟨A, B⟩ = Σ conj(A_ij) B_ij`.
pub fn gradient(phi: &CMatrix, dict: &Dictionary) -> Result<CMatrix> {
    let p = GramProblem::new(dict);
    p.check(phi)?;
    Ok(p.objective_and_gradient(phi).1)
}

/// Entrywise `z / |z|`, with `0 ↦ 1`.
pub fn project_unit_modulus(m: &CMatrix) -> CMatrix {
    m.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Cx::new(1.0, 0.0)
        }
    })
}

/// Projected gradient design from random unit-modulus phases seeded by `config.seed`.
pub fn design(dict: &Dictionary, n_pulses: usize, config: &DesignConfig) -> Result<PhaseMatrix> {
    if n_pulses == 0 {
        return Err(invalid!("at least one pulse is required"));
    }
    config.validate()?;
    let init = random_phases(n_pulses, dict.num_elements(), config.seed);
    design_from(dict, init.entries().clone(), config)
}

pub fn design_from(dict: &Dictionary, init: CMatrix, config: &DesignConfig) -> Result<PhaseMatrix> {
    design_with_observer(dict, init, config, |_, _, _| {})
}

/// Runs the design loop, calling `observer(k, Φ_k, J(Φ_k))` after every
/// iteration `k ≥ 1`.
pub fn design_with_observer<F>(
    dict: &Dictionary,
    init: CMatrix,
    config: &DesignConfig,
    mut observer: F,
) -> Result<PhaseMatrix>
where
    F: FnMut(usize, &CMatrix, f64),
{
    config.validate()?;
    let problem = GramProblem::new(dict);
    problem.check(&init)?;
    let mut phi = project_unit_modulus(&init);

    let (initial_objective, mut grad) = problem.objective_and_gradient(&phi);
    if !initial_objective.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            objective: initial_objective,
            step_size: config.step_size,
        });
    }
    let mut objectives = Vec::with_capacity(config.max_iter);
    let mut previous = initial_objective;
    let mut stopped_early = false;

    for iteration in 1..=config.max_iter {
        let step = if config.normalize_gradient {
            let n = grad.norm();
            if n > 0.0 {
                config.step_size / n
            } else {
                0.0
            }
        } else {
            config.step_size
        };
        phi -= &grad * Cx::new(step, 0.0);
        phi = project_unit_modulus(&phi);

        let (j, g) = problem.objective_and_gradient(&phi);
        if !j.is_finite() {
            return Err(Error::Divergence {
                iteration,
                objective: j,
                step_size: config.step_size,
            });
        }
        grad = g;
        objectives.push(j);
        observer(iteration, &phi, j);

        if config.objective_tolerance > 0.0
            && (j - previous).abs() / previous.max(1e-30) < config.objective_tolerance
        {
            stopped_early = true;
            break;
        }
        previous = j;
    }

    Ok(PhaseMatrix {
        entries: phi,
        provenance: Provenance::Designed,
        design_log: Some(DesignLog {
            initial_objective,
            objectives,
            stopped_early,
        }),
    })
}

/// First `n` rows of the `m`-point DFT matrix, `e^{−j2π n m / M}`.
pub fn dft_phases(n: usize, m: usize) -> Result<PhaseMatrix> {
    if n == 0 || m == 0 {
        return Err(invalid!("DFT phases need positive dimensions, got {n}x{m}"));
    }
    if n > m {
        return Err(invalid!("cannot take {n} rows of a {m}-point DFT"));
    }
    let entries = CMatrix::from_fn(n, m, |row, col| {
        let k = (row * col) % m;
        Cx::from_polar(1.0, -2.0 * PI * k as f64 / m as f64)
    });
    Ok(PhaseMatrix {
        entries,
        provenance: Provenance::Dft,
        design_log: None,
    })
}

/// I.i.d. phases uniform on `[0, 2π)` from a ChaCha8 stream, filled row by row.
pub fn random_phases(n: usize, m: usize, seed: u64) -> PhaseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let entries = CMatrix::from_fn(n, m, |row, col| Cx::from_polar(1.0, -phases[row * m + col]));
    PhaseMatrix {
        entries,
        provenance: Provenance::Random,
        design_log: None,
    }
}

/// Largest normalized inner product between two distinct columns.
pub fn mutual_coherence(d: &CMatrix) -> Result<f64> {
    if d.ncols() < 2 {
        return Err(invalid!("mutual coherence needs at least two columns"));
    }
    let (normalized, _) = column_normalize(d)?;
    let g = gram(&normalized);
    let mut mu: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..j {
            mu = mu.max(g[(i, j)].norm());
        }
    }
    Ok(mu.min(1.0))
}
