//! Single-frequency compressive measurement model `y = Φ Q Ψ r + n`.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::design::PhaseMatrix;
use crate::error::{invalid, Error, Result};
use crate::geometry::SceneGeometry;
use crate::{CMatrix, CVector, Cx};

/// RIS steering dictionary `Ψ` (M×K) with the diagonal of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    psi: CMatrix,
    q_diag: CVector,
    omega: f64,
}

impl Dictionary {
    /// Assembles a dictionary from explicit parts.
    pub fn from_parts(psi: CMatrix, q_diag: CVector, omega: f64) -> Result<Self> {
        if psi.nrows() != q_diag.len() {
            return Err(invalid!(
                "Q has {} entries but Ψ has {} rows",
                q_diag.len(),
                psi.nrows()
            ));
        }
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid!("dictionary entries must be finite"));
        }
        if q_diag.iter().any(|q| !(q.re.is_finite() && q.im.is_finite())) {
            return Err(invalid!("attenuation coefficients must be finite"));
        }
        Ok(Self { psi, q_diag, omega })
    }

    pub fn psi(&self) -> &CMatrix {
        &self.psi
    }

    /// Diagonal of `Q = P diag(q_1, …, q_M)`.
    pub fn q_diag(&self) -> &CVector {
        &self.q_diag
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Number of RIS elements `M`.
    pub fn num_elements(&self) -> usize {
        self.psi.nrows()
    }

    /// Number of grid pixels `K`.
    pub fn num_pixels(&self) -> usize {
        self.psi.ncols()
    }

    /// `Q Ψ`, i.e. `Ψ` with row `m` scaled by `q_m`.
    pub fn weighted(&self) -> CMatrix {
        let mut a = self.psi.clone();
        for (mut row, q) in a.row_iter_mut().zip(self.q_diag.iter()) {
            row *= *q;
        }
        a
    }
}

/// Reflectivity of every grid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityVector {
    pub values: CVector,
    /// Fingerprint of the grid the vector refers to.
    pub grid_ref: u64,
}

impl ReflectivityVector {
    pub fn zeros(geometry: &SceneGeometry) -> Self {
        Self {
            values: CVector::zeros(geometry.num_targets()),
            grid_ref: geometry.grid_fingerprint(),
        }
    }

    /// Sparse scene with the given `(pixel, amplitude)` pairs.
    pub fn sparse(geometry: &SceneGeometry, entries: &[(usize, Cx)]) -> Result<Self> {
        let mut r = Self::zeros(geometry);
        for &(k, a) in entries {
            if k >= r.values.len() {
                return Err(invalid!("pixel {k} out of range (K = {})", r.values.len()));
            }
            r.values[k] += a;
        }
        Ok(r)
    }
}

/// Noisy observations of one pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub y: CVector,
    pub sigma: f64,
    pub seed: u64,
    /// Fingerprint of the measurement matrix that produced `y`.
    pub matrix_ref: u64,
}

/// Order-sensitive fingerprint of a complex matrix.
pub fn matrix_fingerprint(m: &CMatrix) -> u64 {
    crate::fingerprint_f64s(
        [m.nrows() as f64, m.ncols() as f64]
            .into_iter()
            .chain(m.iter().flat_map(|z| [z.re, z.im])),
    )
}

/// `ψ_k[m] = e^{−jω d_{m,k}/c}`.
pub fn steering_vector(geometry: &SceneGeometry, k: usize, omega: f64) -> Result<CVector> {
    if k >= geometry.num_targets() {
        return Err(invalid!("target {k} out of range (K = {})", geometry.num_targets()));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(invalid!("angular frequency must be positive, got {omega}"));
    }
    let c = geometry.constants().propagation_speed_m_s();
    let entries = (0..geometry.num_elements())
        .map(|m| geometry.path(m, k).map(|d| Cx::from_polar(1.0, -omega * d / c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CVector::from_vec(entries))
}

pub fn build_dictionary(geometry: &SceneGeometry, omega: f64) -> Result<Dictionary> {
    let m = geometry.num_elements();
    let k = geometry.num_targets();
    let mut psi = CMatrix::zeros(m, k);
    for col in 0..k {
        psi.set_column(col, &steering_vector(geometry, col, omega)?);
    }
    let pulse = geometry.constants().pulse_spectrum();
    let q_diag = (0..m)
        .map(|i| geometry.attenuation(i).map(|q| pulse * q))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dictionary {
        psi,
        q_diag: CVector::from_vec(q_diag),
        omega,
    })
}

/// `D = Φ diag(q) Ψ`.
pub fn measurement_matrix(phi: &PhaseMatrix, dict: &Dictionary) -> Result<CMatrix> {
    if phi.num_elements() != dict.num_elements() {
        return Err(invalid!(
            "phase matrix has {} columns but the dictionary has {} elements",
            phi.num_elements(),
            dict.num_elements()
        ));
    }
    Ok(phi.entries() * dict.weighted())
}

/// Circular complex Gaussian noise with total variance `sigma²` per entry.
pub fn complex_gaussian_noise(len: usize, sigma: f64, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = sigma * core::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Cx::new(scale * re, scale * im)
    })
}

/// `y = D r + n` with `n ~ CN(0, σ² I)` drawn from a ChaCha8 stream seeded by `seed`.
pub fn synthesize(
    d: &CMatrix,
    r: &ReflectivityVector,
    sigma: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid!("noise standard deviation must be nonnegative, got {sigma}"));
    }
    if d.ncols() != r.values.len() {
        return Err(invalid!(
            "reflectivity has {} entries but D has {} columns",
            r.values.len(),
            d.ncols()
        ));
    }
    let mut y = d * &r.values;
    if sigma > 0.0 {
        y += complex_gaussian_noise(d.nrows(), sigma, seed);
    }
    Ok(MeasurementSet {
        y,
        sigma,
        seed,
        matrix_ref: matrix_fingerprint(d),
    })
}

/// Returns the column-normalized matrix and the original column norms.
pub fn column_normalize(d: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let mut out = d.clone();
    let mut norms = Vec::with_capacity(d.ncols());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::DegenerateMatrix(alloc::format!("column {j} is zero")));
        }
        col /= Cx::new(n, 0.0);
        norms.push(n);
    }
    Ok((out, norms))
}

/// `G = Dᴴ D`.
pub fn gram(d: &CMatrix) -> CMatrix {
    d.ad_mul(d)
}
