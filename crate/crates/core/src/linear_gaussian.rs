//! Closed-form Gaussian layer: for a fixed latent vector `z` and model `M_k`
//! the g-prior regression is conjugate, so `R^2`, the marginal likelihood and
//! the conditional draws of `(sigma^2, alpha, beta_k)` are all available exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::CenteredDesign;
use crate::error::GaussianError;
use crate::model::ModelIndicator;

/// Upper clamp for `R^2`; keeps the marginal likelihood finite on perfect fits.
pub const R2_MAX: f64 = 1.0 - 1e-12;

/// Below this total sum of squares the latent vector is treated as constant.
pub const TSS_MIN: f64 = 1e-300;

const RANK_TOL: f64 = 1e-10;

/// Lower-triangular `L` with `L L' = X_k'X_k` for the (sorted) columns `cols`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    cols: Vec<usize>,
    l: DMatrix<f64>,
}

impl GramFactor {
    /// Factorizes `X_k'X_k`, falling back to a QR of `X_k` when Cholesky breaks down.
    pub fn new(design: &CenteredDesign, cols: &[usize]) -> Result<Self, GaussianError> {
        let k = cols.len();
        if k == 0 {
            return Ok(GramFactor {
                cols: Vec::new(),
                l: DMatrix::zeros(0, 0),
            });
        }
        if k >= design.n() {
            return Err(GaussianError::RankDeficient);
        }
        let gram = design.gram();
        let xtx = DMatrix::from_fn(k, k, |a, b| gram[(cols[a], cols[b])]);
        let trace: f64 = (0..k).map(|a| xtx[(a, a)]).sum();
        let tol = RANK_TOL * trace / k as f64;
        if !(tol > 0.0) {
            return Err(GaussianError::RankDeficient);
        }
        let l = match xtx.cholesky() {
            Some(ch) => ch.l(),
            None => {
                let xk = DMatrix::from_fn(design.n(), k, |i, a| design.xc()[(i, cols[a])]);
                let r = xk.qr().r();
                let mut l = r.transpose();
                for a in 0..k {
                    if l[(a, a)] < 0.0 {
                        l.column_mut(a).neg_mut();
                    }
                }
                l
            }
        };
        if (0..k).any(|a| !(l[(a, a)] * l[(a, a)] > tol)) {
            return Err(GaussianError::RankDeficient);
        }
        Ok(GramFactor {
            cols: cols.to_vec(),
            l,
        })
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    /// Solves `L w = b`.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("factor has positive diagonal")
    }

    /// Solves `L' v = w`.
    pub fn unwhiten(&self, w: &DVector<f64>) -> DVector<f64> {
        self.l
            .tr_solve_lower_triangular(w)
            .expect("factor has positive diagonal")
    }

    /// `(X_k'X_k)^{-1}`, mostly for diagnostics.
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let k = self.dim();
        let mut inv = DMatrix::identity(k, k);
        self.l.solve_lower_triangular_mut(&mut inv);
        self.l.tr_solve_lower_triangular_mut(&mut inv);
        inv
    }
}

/// Model-independent summaries of a latent vector: `z_bar`, total sum of
/// squares and `Xc'z` over all `p` candidate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSummary {
    pub n: usize,
    pub zbar: f64,
    pub tss: f64,
    pub xtz: Vec<f64>,
}

impl LatentSummary {
    pub fn new(z: &[f64], design: &CenteredDesign) -> Self {
        let n = z.len();
        assert_eq!(n, design.n(), "latent vector length must match design rows");
        let zbar = z.iter().sum::<f64>() / n as f64;
        let tss = z.iter().map(|&v| (v - zbar) * (v - zbar)).sum();
        // columns are centered, so Xc'z == Xc'(z - zbar)
        let xc = design.xc();
        let xtz = (0..design.p())
            .map(|j| xc.column(j).iter().zip(z).map(|(a, b)| a * (b - zbar)).sum())
            .collect();
        LatentSummary { n, zbar, tss, xtz }
    }
}

/// Sufficient statistics of `z` under one model, with the cached factor of `X_k'X_k`.
#[derive(Debug, Clone)]
pub struct ModelSuffStats {
    factor: GramFactor,
    xtz: DVector<f64>,
    // L^{-1} X_k'z
    white: DVector<f64>,
    n: usize,
    pub zbar: f64,
    pub tss: f64,
    pub r2: f64,
}

impl ModelSuffStats {
    pub fn new(
        summary: &LatentSummary,
        model: &ModelIndicator,
        design: &CenteredDesign,
    ) -> Result<Self, GaussianError> {
        if !(summary.tss >= TSS_MIN) {
            return Err(GaussianError::DegenerateZ);
        }
        let factor = GramFactor::new(design, &model.included_sorted())?;
        Ok(Self::with_factor(summary, factor))
    }

    /// Reuses an existing factorization (the model must match `factor.cols()`).
    pub fn with_factor(summary: &LatentSummary, factor: GramFactor) -> Self {
        let xtz = DVector::from_iterator(factor.dim(), factor.cols().iter().map(|&j| summary.xtz[j]));
        let white = factor.whiten(&xtz);
        let r2 = if factor.dim() == 0 {
            0.0
        } else {
            (white.norm_squared() / summary.tss).clamp(0.0, R2_MAX)
        };
        ModelSuffStats {
            factor,
            xtz,
            white,
            n: summary.n,
            zbar: summary.zbar,
            tss: summary.tss,
            r2,
        }
    }

    /// Convenience: summaries straight from a latent vector.
    pub fn from_latent(
        z: &[f64],
        model: &ModelIndicator,
        design: &CenteredDesign,
    ) -> Result<Self, GaussianError> {
        Self::new(&LatentSummary::new(z, design), model, design)
    }

    pub fn p_k(&self) -> usize {
        self.factor.dim()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> &[usize] {
        self.factor.cols()
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    pub fn xtz(&self) -> &DVector<f64> {
        &self.xtz
    }

    /// `z'Q_(1:X_k)z`, the residual sum of squares.
    pub fn rss(&self) -> f64 {
        self.tss * (1.0 - self.r2)
    }

    /// Log marginal likelihood of `z` at fixed `g`, up to a model-independent constant.
    pub fn log_marginal(&self, g: f64) -> f64 {
        log_marginal_given_g(self.r2, self.tss, self.p_k(), self.n, g)
    }

    /// Log marginal likelihood of `z` at fixed `g` and fixed `sigma^2`
    /// (alpha and beta integrated), up to a model-independent constant.
    pub fn log_marginal_fixed_sigma2(&self, g: f64, sigma2: f64) -> f64 {
        let delta = g / (1.0 + g);
        -0.5 * self.p_k() as f64 * g.ln_1p() - self.tss * (1.0 - delta * self.r2) / (2.0 * sigma2)
    }

    /// Shape and rate of the gamma conditional of `sigma^{-2}`.
    pub fn sigma2_gamma_params(&self, g: f64) -> (f64, f64) {
        let delta = g / (1.0 + g);
        let shape = (self.n as f64 - 1.0) / 2.0;
        let rate = 0.5 * (delta * self.rss() + (1.0 - delta) * self.tss);
        (shape, rate)
    }

    /// Draws `sigma^2` via `sigma^{-2} ~ Gamma(c_n, C_n)`.
    pub fn sample_sigma2<R: Rng + ?Sized>(&self, g: f64, rng: &mut R) -> f64 {
        let (shape, rate) = self.sigma2_gamma_params(g);
        let precision: f64 = Gamma::new(shape, 1.0 / rate)
            .expect("positive gamma parameters")
            .sample(rng);
        1.0 / precision
    }

    /// `delta (X_k'X_k)^{-1} X_k'z`, the conditional mean of `beta_k`.
    pub fn beta_mean(&self, g: f64) -> DVector<f64> {
        let delta = g / (1.0 + g);
        self.factor.unwhiten(&(&self.white * delta))
    }

    /// Draws `beta_k ~ N(delta (X'X)^{-1} X'z, delta sigma^2 (X'X)^{-1})`, ordered as `cols()`.
    pub fn sample_beta<R: Rng + ?Sized>(&self, sigma2: f64, g: f64, rng: &mut R) -> DVector<f64> {
        let k = self.p_k();
        if k == 0 {
            return DVector::zeros(0);
        }
        let delta = g / (1.0 + g);
        let sd = (delta * sigma2).sqrt();
        let eps = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        self.factor.unwhiten(&(&self.white * delta + eps * sd))
    }
}

/// `((n-1-p_k)/2) log(1+g) - ((n-1)/2) log((1 + g(1-R^2)) tss)`.
pub fn log_marginal_given_g(r2: f64, tss: f64, p_k: usize, n: usize, g: f64) -> f64 {
    let n1 = n as f64 - 1.0;
    0.5 * (n1 - p_k as f64) * g.ln_1p() - 0.5 * n1 * ((1.0 + g * (1.0 - r2)).ln() + tss.ln())
}

/// Draws `alpha ~ N(z_bar, sigma^2 / n)`.
pub fn sample_alpha<R: Rng + ?Sized>(zbar: f64, sigma2: f64, n: usize, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(StandardNormal);
    zbar + (sigma2 / n as f64).sqrt() * e
}
