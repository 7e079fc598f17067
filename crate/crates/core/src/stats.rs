//! Descriptive and inferential statistics: t-tests, Pearson correlation with
//! least-squares fit, Hedges' g, 2×2 chi-square, z-scores and Gaussian KDE.
//!
//! Two-sample tests and effect sizes are signed as `first − second`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// (mean, sample SD, n) as reported in summary tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl GroupSummary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Self {
        GroupSummary { mean, sd, n }
    }

    pub fn from_sample(x: &[f64]) -> Result<Self> {
        let (mean, sd) = mean_sd(x)?;
        Ok(GroupSummary {
            mean,
            sd,
            n: x.len(),
        })
    }

    fn var(&self) -> f64 {
        self.sd * self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Student,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub method: TestMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub r: f64,
    pub f_stat: f64,
    pub df: (usize, usize),
    pub p: f64,
    pub rmse: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub hedges_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

pub fn mean(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("mean of an empty sample"));
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

/// Mean and sample (n − 1) standard deviation.
pub fn mean_sd(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::invalid(format!(
            "standard deviation needs at least 2 values, got {}",
            x.len()
        )));
    }
    let m = mean(x)?;
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((m, (ss / (x.len() - 1) as f64).sqrt()))
}

/// Two-sided p-value of a t statistic: `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn p_value_t(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check_sizes(a: &GroupSummary, b: &GroupSummary) -> Result<()> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::invalid(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            a.n, b.n
        )));
    }
    Ok(())
}

/// Zero standard error: equal means give t = 0, unequal means are undefined.
fn degenerate(diff: f64, df: f64, method: TestMethod) -> Result<TTestResult> {
    if diff == 0.0 {
        Ok(TTestResult {
            t: 0.0,
            df,
            p_two_sided: 1.0,
            method,
        })
    } else {
        Err(Error::numeric(
            "zero variance in both groups with different means",
        ))
    }
}

pub fn student_t_summary(a: GroupSummary, b: GroupSummary) -> Result<TTestResult> {
    check_sizes(&a, &b)?;
    let (n1, n2) = (a.n as f64, b.n as f64);
    let df = n1 + n2 - 2.0;
    let pooled = ((n1 - 1.0) * a.var() + (n2 - 1.0) * b.var()) / df;
    let se = (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
    let diff = a.mean - b.mean;
    if se == 0.0 {
        return degenerate(diff, df, TestMethod::Student);
    }
    let t = diff / se;
    Ok(TTestResult {
        t,
        df,
        p_two_sided: p_value_t(t, df),
        method: TestMethod::Student,
    })
}

pub fn student_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    student_t_summary(GroupSummary::from_sample(a)?, GroupSummary::from_sample(b)?)
}

pub fn welch_t_summary(a: GroupSummary, b: GroupSummary) -> Result<TTestResult> {
    check_sizes(&a, &b)?;
    let (n1, n2) = (a.n as f64, b.n as f64);
    let (q1, q2) = (a.var() / n1, b.var() / n2);
    let se2 = q1 + q2;
    let diff = a.mean - b.mean;
    if se2 == 0.0 {
        return degenerate(diff, n1 + n2 - 2.0, TestMethod::Welch);
    }
    let df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    let t = diff / se2.sqrt();
    Ok(TTestResult {
        t,
        df,
        p_two_sided: p_value_t(t, df),
        method: TestMethod::Welch,
    })
}

pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    welch_t_summary(GroupSummary::from_sample(a)?, GroupSummary::from_sample(b)?)
}

/// Pearson correlation plus the least-squares line of `y` on `x`. The F
/// statistic is the regression F with (1, n − 2) degrees of freedom and the
/// RMSE divides the residual sum of squares by n.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid(format!("correlation needs n ≥ 3, got {n}")));
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::numeric("zero variance in correlation input"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - (intercept + slope * xi);
            e * e
        })
        .sum();
    let df2 = n - 2;
    let r2 = r * r;
    let (f_stat, p) = if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let t2 = r2 * df2 as f64 / (1.0 - r2);
        (t2, p_value_t(t2.sqrt(), df2 as f64))
    };
    Ok(CorrelationResult {
        n,
        r,
        f_stat,
        df: (1, df2),
        p,
        rmse: (sse / n as f64).sqrt(),
        slope,
        intercept,
    })
}

/// Cohen's d on the pooled SD times the small-sample correction
/// `J = 1 − 3 / (4(n1 + n2 − 2) − 1)`.
pub fn hedges_g(a: GroupSummary, b: GroupSummary) -> Result<EffectSize> {
    check_sizes(&a, &b)?;
    let (n1, n2) = (a.n as f64, b.n as f64);
    let df = n1 + n2 - 2.0;
    let pooled_sd = (((n1 - 1.0) * a.var() + (n2 - 1.0) * b.var()) / df).sqrt();
    if pooled_sd == 0.0 {
        return Err(Error::numeric("pooled standard deviation is zero"));
    }
    let j = 1.0 - 3.0 / (4.0 * df - 1.0);
    Ok(EffectSize {
        hedges_g: j * (a.mean - b.mean) / pooled_sd,
    })
}

/// Uncorrected Pearson chi-square test of independence on a 2×2 table.
pub fn chi_square_2x2(table: [[f64; 2]; 2]) -> Result<ChiSquareResult> {
    if table
        .iter()
        .flatten()
        .any(|&c| !(c >= 0.0 && c.is_finite()))
    {
        return Err(Error::invalid("counts must be finite and non-negative"));
    }
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let total = rows[0] + rows[1];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::invalid("contingency table has a zero marginal"));
    }
    let mut chi2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] * cols[j] / total;
            let d = table[i][j] - expected;
            chi2 += d * d / expected;
        }
    }
    let dist = ChiSquared::new(1.0).expect("df 1 is valid");
    Ok(ChiSquareResult {
        chi2,
        df: 1,
        p: dist.sf(chi2),
    })
}

pub fn zscore(x: &[f64]) -> Result<Vec<f64>> {
    let (m, sd) = mean_sd(x)?;
    if sd == 0.0 {
        return Err(Error::numeric("cannot standardize a constant series"));
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// `1.06 · sd · n^(−1/5)`.
    Silverman,
    Fixed(f64),
}

pub fn silverman_bandwidth(x: &[f64]) -> Result<f64> {
    let (_, sd) = mean_sd(x)?;
    Ok(1.06 * sd * (x.len() as f64).powf(-0.2))
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde_gaussian(x: &[f64], grid: &[f64], bandwidth: Bandwidth) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::invalid("KDE needs at least 2 samples"));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(x)?,
        Bandwidth::Fixed(h) => h,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth {h} must be positive")));
    }
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            norm * x
                .iter()
                .map(|&xi| {
                    let u = (g - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect())
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
