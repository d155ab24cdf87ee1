//! Input data, family tags and the centered design matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Outcome family of the latent Gaussian model.
///
/// `Nbl` carries its fixed shape `r >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// Poisson with rate `exp(z)`.
    Pln,
    /// Binomial with success probability `logistic(z)` and per-observation trials.
    Bil,
    /// Negative binomial with success probability `logistic(z)` and fixed `r`.
    Nbl { r: u32 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Pln => "pln",
            Family::Bil => "bil",
            Family::Nbl { .. } => "nbl",
        }
    }

    pub fn needs_trials(&self) -> bool {
        matches!(self, Family::Bil)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Nbl { r } => write!(f, "nbl(r={r})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Family {
    type Err = String;

    /// Parses `pln`, `bil` or `nbl`; for `nbl` the shape defaults to 1 and can be
    /// given as `nbl:<r>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pln" => Ok(Family::Pln),
            "bil" => Ok(Family::Bil),
            "nbl" => Ok(Family::Nbl { r: 1 }),
            other => match other.strip_prefix("nbl:") {
                Some(r) => {
                    let r: u32 = r.parse().map_err(|_| format!("bad nbl shape '{r}'"))?;
                    if r == 0 {
                        return Err("nbl shape r must be >= 1".into());
                    }
                    Ok(Family::Nbl { r })
                }
                None => Err(format!("unknown family '{s}' (expected pln, bil or nbl)")),
            },
        }
    }
}

/// Immutable regression input: counts, optional trial counts and raw covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<u64>,
    trials: Option<Vec<u64>>,
    x: DMatrix<f64>,
    family: Family,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking only structural well-formedness.
    ///
    /// Use [`validate_dataset`] to also check the propriety conditions on the counts.
    pub fn new(
        y: Vec<u64>,
        trials: Option<Vec<u64>>,
        x: DMatrix<f64>,
        family: Family,
    ) -> Result<Self, DataError> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let d = Dataset {
            y,
            trials,
            x,
            family,
            names,
        };
        d.check_structure()?;
        Ok(d)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.p() {
            return Err(DataError::Structural(format!(
                "{} covariate names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn trials(&self) -> Option<&[u64]> {
        self.trials.as_deref()
    }

    /// Trial count of observation `i`, or 0 for families without trials.
    pub fn trials_at(&self, i: usize) -> u64 {
        self.trials.as_ref().map_or(0, |t| t[i])
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rows `idx` of this dataset, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset, DataError> {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let trials = self
            .trials
            .as_ref()
            .map(|t| idx.iter().map(|&i| t[i]).collect());
        let x = DMatrix::from_fn(idx.len(), self.p(), |r, c| self.x[(idx[r], c)]);
        Dataset::new(y, trials, x, self.family)?.with_names(self.names.clone())
    }

    fn check_structure(&self) -> Result<(), DataError> {
        let n = self.y.len();
        if n < 2 {
            return Err(DataError::Structural(format!("need n >= 2 observations, got {n}")));
        }
        if self.x.ncols() < 1 {
            return Err(DataError::Structural("need at least one candidate covariate".into()));
        }
        if self.x.nrows() != n {
            return Err(DataError::Structural(format!(
                "covariate matrix has {} rows but there are {n} outcomes",
                self.x.nrows()
            )));
        }
        for c in 0..self.x.ncols() {
            for r in 0..n {
                if !self.x[(r, c)].is_finite() {
                    return Err(DataError::Structural(format!(
                        "non-finite covariate at row {}, column {}",
                        r + 1,
                        c + 1
                    )));
                }
            }
        }
        match (&self.family, &self.trials) {
            (Family::Bil, None) => {
                return Err(DataError::Structural("bil family requires trial counts".into()))
            }
            (Family::Bil, Some(t)) => {
                if t.len() != n {
                    return Err(DataError::Structural(format!(
                        "{} trial counts for {n} outcomes",
                        t.len()
                    )));
                }
                for (i, (&yi, &ni)) in self.y.iter().zip(t).enumerate() {
                    if ni == 0 {
                        return Err(DataError::Structural(format!(
                            "trial count must be positive (row {})",
                            i + 1
                        )));
                    }
                    if yi > ni {
                        return Err(DataError::Structural(format!(
                            "outcome {yi} exceeds trials {ni} (row {})",
                            i + 1
                        )));
                    }
                }
            }
            (_, Some(_)) => {
                return Err(DataError::Structural(format!(
                    "trial counts are only used by the bil family, not {}",
                    self.family
                )))
            }
            (Family::Nbl { r }, None) if *r == 0 => {
                return Err(DataError::Structural("nbl shape r must be >= 1".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Checks structure and the count conditions needed for a proper posterior.
///
/// PLN/NBL need at least two nonzero counts; BiL needs at least two observations
/// with `0 < y_i < N_i`.
pub fn validate_dataset(d: &Dataset) -> Result<(), DataError> {
    d.check_structure()?;
    let informative = match d.family {
        Family::Pln | Family::Nbl { .. } => d.y.iter().filter(|&&y| y > 0).count(),
        Family::Bil => {
            let t = d.trials.as_ref().expect("checked above");
            d.y.iter().zip(t).filter(|(&y, &n)| y > 0 && y < n).count()
        }
    };
    if informative < 2 {
        let cond = match d.family {
            Family::Bil => "at least two observations with 0 < y_i < N_i",
            _ => "at least two nonzero observations",
        };
        return Err(DataError::PosteriorImproprietyRisk(format!(
            "{} family requires {cond}; found {informative}",
            d.family
        )));
    }
    Ok(())
}

/// How raw covariates are transformed before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Standardize {
    /// Subtract column means only.
    #[default]
    Center,
    /// Subtract means and divide by the (population) standard deviation.
    Zscore,
}

impl FromStr for Standardize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "center" => Ok(Standardize::Center),
            "zscore" => Ok(Standardize::Zscore),
            other => Err(format!("unknown standardization '{other}' (center or zscore)")),
        }
    }
}

impl fmt::Display for Standardize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Standardize::Center => "center",
            Standardize::Zscore => "zscore",
        })
    }
}

/// Column-centered covariates together with the cross-product matrix `Xc'Xc`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDesign {
    xc: DMatrix<f64>,
    col_means: Vec<f64>,
    col_scales: Vec<f64>,
    gram: DMatrix<f64>,
    mode: Standardize,
}

impl CenteredDesign {
    pub fn new(x: &DMatrix<f64>, mode: Standardize) -> Self {
        let (n, p) = x.shape();
        let mut xc = x.clone();
        let mut col_means = Vec::with_capacity(p);
        let mut col_scales = Vec::with_capacity(p);
        for j in 0..p {
            let mut col = xc.column_mut(j);
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
            let scale = match mode {
                Standardize::Center => 1.0,
                Standardize::Zscore => {
                    let sd = (col.norm_squared() / n as f64).sqrt();
                    // constant columns are left at zero rather than divided by zero
                    if sd > 0.0 {
                        sd
                    } else {
                        1.0
                    }
                }
            };
            if scale != 1.0 {
                col.scale_mut(1.0 / scale);
            }
            col_means.push(mean);
            col_scales.push(scale);
        }
        let gram = xc.tr_mul(&xc);
        CenteredDesign {
            xc,
            col_means,
            col_scales,
            gram,
            mode,
        }
    }

    pub fn n(&self) -> usize {
        self.xc.nrows()
    }

    pub fn p(&self) -> usize {
        self.xc.ncols()
    }

    pub fn xc(&self) -> &DMatrix<f64> {
        &self.xc
    }

    pub fn col_means(&self) -> &[f64] {
        &self.col_means
    }

    pub fn col_scales(&self) -> &[f64] {
        &self.col_scales
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn mode(&self) -> Standardize {
        self.mode
    }

    /// Applies the training-time centering (and scaling) to a new covariate row.
    pub fn transform_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.col_means.iter().zip(&self.col_scales))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

/// Subtracts column means; the means are kept for centering new rows.
pub fn center_design(x: &DMatrix<f64>) -> CenteredDesign {
    CenteredDesign::new(x, Standardize::Center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn xcol(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| i as f64)
    }

    #[test]
    fn pln_single_nonzero_is_improper() {
        let d = Dataset::new(vec![0, 0, 0, 5], None, xcol(4), Family::Pln).unwrap();
        assert!(matches!(
            validate_dataset(&d),
            Err(DataError::PosteriorImproprietyRisk(_))
        ));
    }

    #[test]
    fn bil_interior_counts_ok() {
        let d = Dataset::new(vec![1, 2], Some(vec![3, 3]), xcol(2), Family::Bil).unwrap();
        assert_eq!(validate_dataset(&d), Ok(()));
    }

    #[test]
    fn bil_boundary_counts_do_not_count() {
        let d = Dataset::new(vec![0, 3, 1], Some(vec![3, 3, 3]), xcol(3), Family::Bil).unwrap();
        assert!(validate_dataset(&d).is_err());
    }

    #[test]
    fn nbl_two_nonzero_ok() {
        let d = Dataset::new(vec![3, 1, 0], None, xcol(3), Family::Nbl { r: 2 }).unwrap();
        assert_eq!(validate_dataset(&d), Ok(()));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            Dataset::new(vec![1, 2, 3], None, xcol(2), Family::Pln),
            Err(DataError::Structural(_))
        ));
        assert!(Dataset::new(vec![1, 2], None, xcol(2), Family::Bil).is_err());
        assert!(Dataset::new(vec![1, 4], Some(vec![3, 3]), xcol(2), Family::Bil).is_err());
        let mut x = xcol(3);
        x[(1, 0)] = f64::NAN;
        assert!(Dataset::new(vec![1, 2, 3], None, x, Family::Pln).is_err());
        assert!(Dataset::new(vec![1], None, xcol(1), Family::Pln).is_err());
    }

    #[test]
    fn validation_is_pure() {
        let d = Dataset::new(vec![0, 0, 1, 2], None, xcol(4), Family::Pln).unwrap();
        assert_eq!(validate_dataset(&d), validate_dataset(&d));
    }

    #[test]
    fn center_two_rows() {
        let c = center_design(&dmatrix![1.0; 3.0]);
        assert_eq!(c.xc(), &dmatrix![-1.0; 1.0]);
        assert_eq!(c.col_means(), &[2.0]);
    }

    #[test]
    fn centering_already_centered_is_identity() {
        let x = dmatrix![-1.0, 2.0; 0.0, -4.0; 1.0, 2.0];
        let c = center_design(&x);
        assert_eq!(c.xc(), &x);
    }

    #[test]
    fn zscore_gives_unit_variance() {
        let x = dmatrix![1.0; 2.0; 3.0; 10.0];
        let c = CenteredDesign::new(&x, Standardize::Zscore);
        let var = c.xc().column(0).norm_squared() / 4.0;
        assert!((var - 1.0).abs() < 1e-12);
        let back = c.transform_row(&[10.0]);
        assert!((back[0] - c.xc()[(3, 0)]).abs() < 1e-12);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("PLN".parse::<Family>(), Ok(Family::Pln));
        assert_eq!("nbl:3".parse::<Family>(), Ok(Family::Nbl { r: 3 }));
        assert!("nbl:0".parse::<Family>().is_err());
        assert!("probit".parse::<Family>().is_err());
    }
}
