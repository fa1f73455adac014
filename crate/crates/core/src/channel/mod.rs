//! Correlated Rayleigh SIMO channel: covariance models, eigenbasis
//! pre-processing, SNR calibration and block sampling.
//!
//! Every detector consumes only the eigenbasis observations `r_k = U^H y_k`,
//! which given the transmitted level are independent circular Gaussians with
//! per-entry variance `eps * gamma_n + sigma^2`. The fast sampler draws those
//! entries directly; [`FullPathSampler`] goes through `y_k = h_k x_k + z_k`
//! and is kept to validate it.

mod eigen;

pub use eigen::{hermitian_eig, EigenBasis, CONVERGENCE_TOL, HERMITIAN_TOL, ZERO_EIGENVALUE_TOL};

use nalgebra::DMatrix;
pub use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codebook::{AmplitudeSet, Codeword, PartitionPolicy};
use crate::error::{Error, Result};

/// Spatial correlation of the receive array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorrelationModel {
    Isotropic,
    Exponential { rho: f64 },
}

impl CorrelationModel {
    pub fn exponential(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::Exponential { rho })
    }

    /// Correlation coefficient; 0 for the isotropic model.
    pub fn rho(&self) -> f64 {
        match *self {
            Self::Isotropic => 0.0,
            Self::Exponential { rho } => rho,
        }
    }

    pub fn covariance(&self, antennas: usize) -> Result<DMatrix<f64>> {
        exponential_correlation(antennas, self.rho())
    }

    /// Eigenbasis of the covariance. The isotropic case skips the solver.
    pub fn eigen_basis(&self, antennas: usize) -> Result<EigenBasis> {
        let rho = self.rho();
        check_rho(rho)?;
        if rho == 0.0 {
            if antennas == 0 {
                return Err(Error::Domain("antenna count must be at least 1".into()));
            }
            return Ok(EigenBasis::identity(antennas));
        }
        hermitian_eig(&self.covariance(antennas)?.map(Complex64::from))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "correlation rho must lie in [0, 1], got {rho}"
        )));
    }
    Ok(())
}

/// Symmetric Toeplitz matrix with entries `rho^|n - m|`.
pub fn exponential_correlation(antennas: usize, rho: f64) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    if antennas == 0 {
        return Err(Error::Domain("antenna count must be at least 1".into()));
    }
    Ok(DMatrix::from_fn(antennas, antennas, |m, n| {
        rho.powi(m.abs_diff(n) as i32)
    }))
}

/// Eigenbases of the per-subcarrier channel covariances.
#[derive(Debug, Clone, PartialEq)]
pub enum BandBases {
    /// Identically distributed bands sharing one covariance.
    Shared(EigenBasis),
    /// One basis per subcarrier.
    PerBand(Vec<EigenBasis>),
}

impl BandBases {
    pub fn band(&self, k: usize) -> &EigenBasis {
        match self {
            Self::Shared(e) => e,
            Self::PerBand(v) => &v[k],
        }
    }

    /// Index of the distinct basis used by subcarrier `k`.
    pub fn slot(&self, k: usize) -> usize {
        match self {
            Self::Shared(_) => 0,
            Self::PerBand(_) => k,
        }
    }

    pub fn distinct(&self) -> &[EigenBasis] {
        match self {
            Self::Shared(e) => std::slice::from_ref(e),
            Self::PerBand(v) => v,
        }
    }

    pub fn antennas(&self) -> usize {
        self.distinct()[0].dim()
    }

    pub fn is_shared(&self) -> bool {
        matches!(self, Self::Shared(_))
    }

    /// Checks the basis layout fits a block of `subcarriers` bands.
    pub fn check(&self, subcarriers: usize) -> Result<()> {
        let n = self.antennas();
        if let Self::PerBand(v) = self {
            if v.len() != subcarriers {
                return Err(Error::Dimension(format!(
                    "{} per-band bases for {} subcarriers",
                    v.len(),
                    subcarriers
                )));
            }
        }
        if self.distinct().iter().any(|e| e.dim() != n) {
            return Err(Error::Dimension(
                "bases with differing antenna counts".into(),
            ));
        }
        Ok(())
    }

    fn mean_trace(&self) -> f64 {
        let d = self.distinct();
        d.iter().map(EigenBasis::trace).sum::<f64>() / d.len() as f64
    }
}

/// Link parameters of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub subcarriers: usize,
    pub antennas: usize,
    pub model: CorrelationModel,
    pub noise_power: f64,
}

impl ChannelSpec {
    pub fn new(
        subcarriers: usize,
        antennas: usize,
        model: CorrelationModel,
        noise_power: f64,
    ) -> Result<Self> {
        if subcarriers == 0 || antennas == 0 {
            return Err(Error::Domain("K and N must be positive".into()));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(Error::Domain(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        check_rho(model.rho())?;
        Ok(Self {
            subcarriers,
            antennas,
            model,
            noise_power,
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Noise power giving the requested SNR, where SNR is the ratio of total
/// received signal energy `sum_k E|x_k|^2 E||h_k||^2` to total noise energy
/// `K N sigma^2`. `E|x_k|^2` is averaged over uniformly drawn codewords.
pub fn noise_power_for_snr(
    snr_linear: f64,
    policy: &PartitionPolicy,
    amplitudes: &AmplitudeSet,
    bases: &BandBases,
) -> Result<f64> {
    if !(snr_linear > 0.0) || !snr_linear.is_finite() {
        return Err(Error::Domain(format!(
            "SNR must be positive and finite, got {snr_linear}"
        )));
    }
    let symbol_energy = policy.mean_energy(amplitudes)?;
    let signal = symbol_energy * bases.mean_trace();
    if !(signal > 0.0) {
        return Err(Error::Domain("codebook carries no energy".into()));
    }
    Ok(signal / (bases.antennas() as f64 * snr_linear))
}

/// One OFDM block: eigenbasis observations, optionally the raw antenna
/// observations, and the transmitted codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    subcarriers: usize,
    antennas: usize,
    r: Vec<Complex64>,
    y: Option<Vec<Complex64>>,
    truth: Option<Codeword>,
}

impl ReceivedBlock {
    /// Builds a block from a row-major `K x N` observation matrix.
    pub fn new(
        subcarriers: usize,
        antennas: usize,
        r: Vec<Complex64>,
        truth: Option<Codeword>,
    ) -> Result<Self> {
        if r.len() != subcarriers * antennas {
            return Err(Error::Dimension(format!(
                "expected {} observations, got {}",
                subcarriers * antennas,
                r.len()
            )));
        }
        Ok(Self {
            subcarriers,
            antennas,
            r,
            y: None,
            truth,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Eigenbasis observation `r_k`.
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.r[k * self.antennas..(k + 1) * self.antennas]
    }

    /// Raw observation `y_k`, when the block came from the full path.
    pub fn raw_row(&self, k: usize) -> Option<&[Complex64]> {
        self.y
            .as_ref()
            .map(|y| &y[k * self.antennas..(k + 1) * self.antennas])
    }

    pub fn truth(&self) -> Option<&Codeword> {
        self.truth.as_ref()
    }

    /// `u_k = ||r_k||^2` for every subcarrier.
    pub fn energies(&self) -> Vec<f64> {
        self.r
            .chunks_exact(self.antennas)
            .map(|row| row.iter().map(Complex64::norm_sqr).sum())
            .collect()
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `r_{k,n} ~ CN(0, eps_{l(k)} gamma_n + sigma^2)` directly.
///
/// Consumes exactly `2 K N` standard normals in row-major order.
pub fn sample_block_eigen<R: Rng + ?Sized>(
    codeword: &Codeword,
    amplitudes: &AmplitudeSet,
    bases: &BandBases,
    noise_power: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let k_count = codeword.len();
    bases.check(k_count)?;
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!(
            "noise power must be non-negative, got {noise_power}"
        )));
    }
    let n = bases.antennas();
    let energies = amplitudes.energies();
    let mut r = Vec::with_capacity(k_count * n);
    for (k, &level) in codeword.levels().iter().enumerate() {
        let eps = *energies
            .get(level)
            .ok_or_else(|| Error::Dimension(format!("level {level} outside the amplitude set")))?;
        for &g in bases.band(k).eigenvalues() {
            let sd = (eps * g + noise_power).sqrt();
            r.push(complex_normal(rng) * sd);
        }
    }
    ReceivedBlock::new(k_count, n, r, Some(codeword.clone()))
}

/// Samples through the antenna-domain model `y_k = h_k x_k + z_k`, with
/// `h_k = S w`, `S S^H = Sigma_h`, and rotates into the eigenbasis.
#[derive(Debug, Clone)]
pub struct FullPathSampler {
    basis: EigenBasis,
    factor: DMatrix<Complex64>,
}

impl FullPathSampler {
    /// Cholesky factor when the covariance is positive definite, eigen
    /// square root `U diag(sqrt(gamma))` otherwise.
    pub fn new(model: CorrelationModel, antennas: usize) -> Result<Self> {
        let sigma = model.covariance(antennas)?.map(Complex64::from);
        let basis = model.eigen_basis(antennas)?;
        let factor = match nalgebra::Cholesky::new(sigma) {
            Some(ch) => ch.unpack(),
            None => basis.sqrt_factor(),
        };
        Ok(Self { basis, factor })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn factor(&self) -> &DMatrix<Complex64> {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        codeword: &Codeword,
        amplitudes: &AmplitudeSet,
        noise_power: f64,
        rng: &mut R,
    ) -> Result<ReceivedBlock> {
        if !(noise_power >= 0.0) {
            return Err(Error::Domain(format!(
                "noise power must be non-negative, got {noise_power}"
            )));
        }
        let n = self.basis.dim();
        let k_count = codeword.len();
        let noise_sd = noise_power.sqrt();
        let mut y = Vec::with_capacity(k_count * n);
        let mut r = Vec::with_capacity(k_count * n);
        let mut w = vec![Complex64::default(); n];
        for &level in codeword.levels() {
            let amp = *amplitudes.levels().get(level).ok_or_else(|| {
                Error::Dimension(format!("level {level} outside the amplitude set"))
            })?;
            for wi in w.iter_mut() {
                *wi = complex_normal(rng);
            }
            let start = y.len();
            for i in 0..n {
                let h_i: Complex64 = (0..n).map(|j| self.factor[(i, j)] * w[j]).sum();
                y.push(h_i * amp + complex_normal(rng) * noise_sd);
            }
            r.extend(self.basis.rotate(&y[start..]));
        }
        let mut block = ReceivedBlock::new(k_count, n, r, Some(codeword.clone()))?;
        block.y = Some(y);
        Ok(block)
    }
}

/// Convenience wrapper: full-path sample for a channel spec.
pub fn sample_block_full<R: Rng + ?Sized>(
    codeword: &Codeword,
    amplitudes: &AmplitudeSet,
    spec: &ChannelSpec,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    FullPathSampler::new(spec.model, spec.antennas)?.sample(
        codeword,
        amplitudes,
        spec.noise_power,
        rng,
    )
}
