//! Identified objects: the treatment share and the conditional outcome
//! distributions per arm, built either from the analytic truncated-normal
//! dgp or from ingested sample data.

use std::io::Read;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::piecewise::MonotoneCurve;

/// P(X=1), the two conditional outcome cdfs and quantile functions, and the
/// per-arm support intervals. Everything downstream is computed from this.
#[derive(Debug, Clone)]
pub struct ObservedJoint {
    pub p1: f64,
    /// cdf of Y | X = 0, in outcome units.
    pub cdf0: MonotoneCurve,
    /// cdf of Y | X = 1, in outcome units.
    pub cdf1: MonotoneCurve,
    /// quantile function of Y | X = 0, on [0,1].
    pub quantile0: MonotoneCurve,
    /// quantile function of Y | X = 1, on [0,1].
    pub quantile1: MonotoneCurve,
    pub support0: (f64, f64),
    pub support1: (f64, f64),
}

impl ObservedJoint {
    pub fn new(p1: f64, cdf0: MonotoneCurve, cdf1: MonotoneCurve) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(Error::Argument(format!("p1 = {p1} must be in (0,1)")));
        }
        let quantile0 = cdf0.swap_axes(false)?;
        let quantile1 = cdf1.swap_axes(false)?;
        let support0 = cdf0.domain();
        let support1 = cdf1.domain();
        Ok(ObservedJoint {
            p1,
            cdf0,
            cdf1,
            quantile0,
            quantile1,
            support0,
            support1,
        })
    }

    pub fn cdf(&self, arm: u8) -> &MonotoneCurve {
        if arm == 0 {
            &self.cdf0
        } else {
            &self.cdf1
        }
    }

    pub fn quantile(&self, arm: u8) -> &MonotoneCurve {
        if arm == 0 {
            &self.quantile0
        } else {
            &self.quantile1
        }
    }

    /// E(Y | X = x), exact integral of the tabulated quantile function.
    pub fn mean(&self, arm: u8) -> Result<f64> {
        self.quantile(arm).integrate(0.0, 1.0)
    }
}

/// The numerical-illustration dgp: Y|X=0 is standard normal truncated to
/// [-4,4]; Y|X=1 is the same variable scaled by (1+gamma) and shifted by pi.
#[derive(Debug, Clone, Copy)]
pub struct TruncNormDgp {
    pub gamma: f64,
    pub pi: f64,
    pub p1: f64,
}

impl Default for TruncNormDgp {
    fn default() -> Self {
        TruncNormDgp {
            gamma: 0.1,
            pi: 1.0,
            p1: 0.5,
        }
    }
}

const TRUNC: f64 = 4.0;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// cdf of the standard normal truncated to [-4,4], symmetric by construction:
/// F(-z) = 1 - F(z) exactly.
pub fn trunc_norm_cdf(z: f64) -> f64 {
    if z <= -TRUNC {
        return 0.0;
    }
    if z >= TRUNC {
        return 1.0;
    }
    let n = std_normal();
    let tail = n.cdf(-TRUNC);
    let denom = 1.0 - 2.0 * tail;
    if z >= 0.0 {
        let upper = (n.cdf(z) - tail) / denom;
        upper.min(1.0)
    } else {
        1.0 - trunc_norm_cdf(-z)
    }
}

/// Quantile of the standard normal truncated to [-4,4]; u in (0,1).
pub fn trunc_norm_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutOfRange(format!("u = {u} not in (0,1)")));
    }
    let n = std_normal();
    let tail = n.cdf(-TRUNC);
    let denom = 1.0 - 2.0 * tail;
    if u >= 0.5 {
        Ok(n.inverse_cdf(tail + u * denom).clamp(-TRUNC, TRUNC))
    } else {
        Ok(-trunc_norm_quantile(1.0 - u)?)
    }
}

impl TruncNormDgp {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= -1.0 {
            return Err(Error::Argument("gamma must exceed -1".into()));
        }
        if !(self.p1 > 0.0 && self.p1 < 1.0) {
            return Err(Error::Argument("p1 must be in (0,1)".into()));
        }
        Ok(())
    }

    /// Analytic quantile of Y | X = arm.
    pub fn quantile(&self, arm: u8, u: f64) -> Result<f64> {
        let z = trunc_norm_quantile(u)?;
        Ok(if arm == 0 {
            z
        } else {
            self.pi + (1.0 + self.gamma) * z
        })
    }

    /// Tabulate the identified objects on `n_knots` points per arm.
    pub fn to_observed(&self, n_knots: usize) -> Result<ObservedJoint> {
        self.validate()?;
        if n_knots < 64 {
            return Err(Error::Argument("n_knots must be at least 64".into()));
        }
        // Even segment count keeps the grid symmetric about 0, so the arm-0
        // cdf at 0 is exactly 0.5.
        let m = (n_knots - 1 + (n_knots - 1) % 2).max(64);
        let mut zs = Vec::with_capacity(m + 1);
        let mut fs = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let z = -TRUNC + 2.0 * TRUNC * j as f64 / m as f64;
            zs.push(z);
            fs.push(trunc_norm_cdf(z));
        }
        // mirror exactly
        for j in 0..=m / 2 {
            fs[j] = 1.0 - fs[m - j];
        }
        fs[0] = 0.0;
        fs[m] = 1.0;
        let knots0: Vec<(f64, f64)> = zs.iter().zip(&fs).map(|(&z, &f)| (z, f)).collect();
        let scale = 1.0 + self.gamma;
        let knots1: Vec<(f64, f64)> = zs
            .iter()
            .zip(&fs)
            .map(|(&z, &f)| (self.pi + scale * z, f))
            .collect();
        let cdf0 = MonotoneCurve::cdf(knots0)?;
        let cdf1 = MonotoneCurve::cdf(knots1)?;
        ObservedJoint::new(self.p1, cdf0, cdf1)
    }
}

/// Build the identified objects from raw (y, x) samples. The per-arm cdf is
/// the empirical cdf linearly interpolated between order statistics, so it is
/// strictly increasing on the sample range (ties aside).
pub fn ingest_samples(rows: &[(f64, u8)]) -> Result<ObservedJoint> {
    let mut arm0: Vec<f64> = Vec::new();
    let mut arm1: Vec<f64> = Vec::new();
    for &(y, x) in rows {
        if !y.is_finite() {
            return Err(Error::Argument(format!("non-finite outcome {y}")));
        }
        match x {
            0 => arm0.push(y),
            1 => arm1.push(y),
            other => return Err(Error::Argument(format!("x must be 0 or 1, got {other}"))),
        }
    }
    if arm0.is_empty() || arm1.is_empty() {
        return Err(Error::Degenerate(
            "both treatment arms must be present".into(),
        ));
    }
    let p1 = arm1.len() as f64 / rows.len() as f64;
    let cdf0 = empirical_cdf(&mut arm0)?;
    let cdf1 = empirical_cdf(&mut arm1)?;
    ObservedJoint::new(p1, cdf0, cdf1)
}

fn empirical_cdf(ys: &mut [f64]) -> Result<MonotoneCurve> {
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = ys.len();
    let distinct = ys.windows(2).filter(|w| w[0] < w[1]).count() + 1;
    if distinct < 2 {
        return Err(Error::Degenerate(
            "need at least 2 distinct outcomes per arm".into(),
        ));
    }
    let knots: Vec<(f64, f64)> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| (y, i as f64 / (n - 1) as f64))
        .collect();
    MonotoneCurve::cdf(knots)
}

/// Parse `y,x` CSV rows (header required). Parse failures abort with the
/// 1-based line number.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<(f64, u8)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        if headers.len() < 2 || headers.get(0) != Some("y") || headers.get(1) != Some("x") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `y,x`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let y: f64 = record
            .get(0)
            .ok_or_else(|| Error::Parse { line, msg: "missing y".into() })?
            .trim()
            .parse()
            .map_err(|e| Error::Parse { line, msg: format!("bad y: {e}") })?;
        let x: u8 = record
            .get(1)
            .ok_or_else(|| Error::Parse { line, msg: "missing x".into() })?
            .trim()
            .parse()
            .map_err(|e| Error::Parse { line, msg: format!("bad x: {e}") })?;
        if x > 1 {
            return Err(Error::Parse { line, msg: format!("x must be 0 or 1, got {x}") });
        }
        rows.push((y, x));
    }
    Ok(rows)
}
