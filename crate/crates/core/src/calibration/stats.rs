use serde::{Serialize, Serializer};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub sse: f64,
}

/// Least-squares line through `(1, y_1), ..., (T, y_T)`.
pub fn linear_fit(series: &[f64]) -> Result<LinearFit> {
    let ts: Vec<f64> = (1..=series.len()).map(|t| t as f64).collect();
    linear_fit_at(&ts, series)
}

/// Least-squares line through `(ts[k], ys[k])`. The abscissae must not all
/// be equal.
pub fn linear_fit_at(ts: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if ts.len() != ys.len() {
        return Err(Error::SampleMismatch(ts.len(), ys.len()));
    }
    let n = ts.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mt = ts.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        sty += (t - mt) * (y - my);
        stt += (t - mt) * (t - mt);
    }
    if stt == 0.0 {
        return Err(Error::InvalidArgument("all abscissae are equal".into()));
    }
    let a = sty / stt;
    let b = my - a * mt;
    let sse = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - a * t - b).powi(2))
        .sum();
    Ok(LinearFit { a, b, sse })
}

/// Two-tailed paired t-test result. `t` is infinite when every difference
/// is the same non-zero value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    #[serde(serialize_with = "finite_or_string")]
    pub t: f64,
    pub p: f64,
}

fn finite_or_string<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::SampleMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewCases(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0 }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dof = (n - 1) as f64;
    let p = beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p })
}
