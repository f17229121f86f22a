//! Deciders for the independence relaxations. The workhorse is the
//! average-value characterization: U is T-independent of X exactly when the
//! average of p over every interval with endpoints in T ∪ {0,1} equals
//! P(X=1). U-independence only pins p down to flatness at P(X=1) on the
//! interval itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propensity::GridPropensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndependenceKind {
    Full,
    TSet,
    USet,
    Mean,
}

/// The set of quantile levels an assumption restricts: either finitely many
/// points or a whole interval [a,b] ⊂ (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSet {
    Points(Vec<f64>),
    Interval { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceSpec {
    pub kind: IndependenceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<TauSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl IndependenceSpec {
    pub fn full() -> Self {
        IndependenceSpec { kind: IndependenceKind::Full, taus: None, tolerance: None }
    }

    pub fn mean() -> Self {
        IndependenceSpec { kind: IndependenceKind::Mean, taus: None, tolerance: None }
    }

    pub fn t_points(taus: Vec<f64>) -> Self {
        IndependenceSpec {
            kind: IndependenceKind::TSet,
            taus: Some(TauSet::Points(taus)),
            tolerance: None,
        }
    }

    pub fn t_interval(a: f64, b: f64) -> Self {
        IndependenceSpec {
            kind: IndependenceKind::TSet,
            taus: Some(TauSet::Interval { a, b }),
            tolerance: None,
        }
    }

    pub fn u_interval(a: f64, b: f64) -> Self {
        IndependenceSpec {
            kind: IndependenceKind::USet,
            taus: Some(TauSet::Interval { a, b }),
            tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.kind, &self.taus) {
            (IndependenceKind::Full | IndependenceKind::Mean, _) => Ok(()),
            (IndependenceKind::TSet | IndependenceKind::USet, Some(TauSet::Points(ts))) => {
                if ts.is_empty() {
                    return Err(Error::Argument(
                        "empty tau set; use kind = full for no restriction".into(),
                    ));
                }
                for &t in ts {
                    if !(t > 0.0 && t < 1.0) {
                        return Err(Error::Argument(format!("tau = {t} not in (0,1)")));
                    }
                }
                Ok(())
            }
            (IndependenceKind::TSet | IndependenceKind::USet, Some(TauSet::Interval { a, b })) => {
                if !(*a > 0.0 && *b < 1.0 && a <= b) {
                    return Err(Error::Argument(format!(
                        "interval [{a},{b}] must satisfy 0 < a <= b < 1"
                    )));
                }
                Ok(())
            }
            (IndependenceKind::TSet | IndependenceKind::USet, None) => {
                Err(Error::Argument("t_set/u_set requires taus".into()))
            }
        }
    }

    /// Grid tolerance: one factor 1/N from endpoint snapping, one from
    /// midpoint quadrature.
    pub fn grid_tolerance(&self, n: usize) -> f64 {
        self.tolerance.unwrap_or(2.0 / n as f64)
    }
}

/// Outcome of a check, with a witness of the first violation on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail { t1: f64, t2: f64, average: f64, expected: f64 },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Endpoints to test: T ∪ {0,1} for point sets; for an interval, {0,a,b,1}
/// plus every grid point inside [a,b] (flatness makes this equivalent to the
/// continuum of pairs at grid scale).
fn endpoints(taus: &TauSet, n: usize) -> Vec<f64> {
    let mut es = vec![0.0, 1.0];
    match taus {
        TauSet::Points(ts) => es.extend_from_slice(ts),
        TauSet::Interval { a, b } => {
            es.push(*a);
            es.push(*b);
            for i in 0..=n {
                let g = i as f64 / n as f64;
                if g > *a && g < *b {
                    es.push(g);
                }
            }
        }
    }
    es.sort_by(|x, y| x.partial_cmp(y).unwrap());
    es.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    es
}

pub fn check_t_independence(p: &GridPropensity, spec: &IndependenceSpec) -> Result<Verdict> {
    spec.validate()?;
    if spec.kind != IndependenceKind::TSet {
        return Err(Error::Argument("spec kind must be t_set".into()));
    }
    let tol = spec.grid_tolerance(p.n());
    let expected = p.mean();
    let es = endpoints(spec.taus.as_ref().unwrap(), p.n());
    for i in 0..es.len() {
        for j in (i + 1)..es.len() {
            let (t1, t2) = (es[i], es[j]);
            let avg = p.average(t1, t2)?;
            if (avg - expected).abs() > tol {
                return Ok(Verdict::Fail { t1, t2, average: avg, expected });
            }
        }
    }
    Ok(Verdict::Pass)
}

pub fn check_u_independence(p: &GridPropensity, spec: &IndependenceSpec) -> Result<Verdict> {
    spec.validate()?;
    if spec.kind != IndependenceKind::USet {
        return Err(Error::Argument("spec kind must be u_set".into()));
    }
    let (a, b) = match spec.taus.as_ref() {
        Some(TauSet::Interval { a, b }) => (*a, *b),
        _ => return Err(Error::Argument("u_set requires an interval".into())),
    };
    if a == b {
        // vacuous assumption: P(U ∈ U) = 0
        eprintln!("warning: zero-length U-interval; the assumption is vacuous");
        return Ok(Verdict::Pass);
    }
    let tol = spec.grid_tolerance(p.n());
    let expected = p.mean();
    let n = p.n() as f64;
    for (i, &v) in p.values.iter().enumerate() {
        let c0 = i as f64 / n;
        let c1 = (i + 1) as f64 / n;
        if c1 > a && c0 < b && (v - expected).abs() > tol {
            return Ok(Verdict::Fail { t1: c0, t2: c1, average: v, expected });
        }
    }
    Ok(Verdict::Pass)
}

/// Mean independence of U and X is equivalent to cov(p(U), U) = 0.
pub fn check_mean_independence(p: &GridPropensity) -> (bool, f64) {
    let n = p.n() as f64;
    let mean_p = p.mean();
    let mean_u = 0.5;
    let cov = p
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| (p.midpoint(i) - mean_u) * (v - mean_p))
        .sum::<f64>()
        / n;
    (cov.abs() <= 2.0 / n, cov)
}

/// Equivalent formulation: ∫₀¹ 2u·p(u) du = P(X=1).
pub fn check_weighted_mean_constraint(p: &GridPropensity, p1: f64) -> Result<(bool, f64)> {
    if (p.mean() - p1).abs() > 1e-9 {
        return Err(Error::Inconsistent(format!(
            "mean(p) = {} but p1 = {p1}",
            p.mean()
        )));
    }
    let n = p.n() as f64;
    let integral = p
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| 2.0 * p.midpoint(i) * v)
        .sum::<f64>()
        / n;
    Ok(((integral - p1).abs() <= 2.0 / p.n() as f64, integral))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub is_monotone: bool,
    pub direction_changes: usize,
    /// maximal intervals of constant direction, as (start, end, sign)
    pub partition: Vec<(f64, f64, i8)>,
}

/// Count direction changes of the step function, collapsing flat runs.
pub fn monotonicity_report(p: &GridPropensity) -> MonotonicityReport {
    let n = p.n() as f64;
    let mut partition: Vec<(f64, f64, i8)> = Vec::new();
    let mut last_sign: i8 = 0;
    let mut changes = 0;
    let mut seg_start = 0.0;
    for (i, w) in p.values.windows(2).enumerate() {
        let d = w[1] - w[0];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            continue;
        };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
            let here = (i as f64 + 1.0) / n;
            partition.push((seg_start, here, last_sign));
            seg_start = here;
        }
        last_sign = sign;
    }
    partition.push((seg_start, 1.0, last_sign));
    MonotonicityReport { is_monotone: changes == 0, direction_changes: changes, partition }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityVerdict {
    MonotoneIncreasing { degenerate: bool },
    MonotoneDecreasing,
    NonMonotone,
}

/// Stochastic monotonicity of X in U: every survival column
/// P(X > x_j | U = u_i) must be ordered in u, all the same way.
pub fn check_stochastic_monotonicity(
    cond_survival: &[Vec<f64>],
    tolerance: f64,
) -> Result<MonotonicityVerdict> {
    let rows = cond_survival.len();
    if rows == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    let cols = cond_survival[0].len();
    if cond_survival.iter().any(|r| r.len() != cols) {
        return Err(Error::Argument("ragged matrix".into()));
    }
    let mut any_up = false;
    let mut any_down = false;
    for j in 0..cols {
        for i in 1..rows {
            let d = cond_survival[i][j] - cond_survival[i - 1][j];
            if d > tolerance {
                any_up = true;
            } else if d < -tolerance {
                any_down = true;
            }
        }
    }
    Ok(match (any_up, any_down) {
        (true, true) => MonotonicityVerdict::NonMonotone,
        (true, false) => MonotonicityVerdict::MonotoneIncreasing { degenerate: false },
        (false, true) => MonotonicityVerdict::MonotoneDecreasing,
        (false, false) => MonotonicityVerdict::MonotoneIncreasing { degenerate: true },
    })
}

/// Theorem-2/3 form: the average-value condition must hold per column of the
/// conditional survival matrix, against the marginal survival vector.
pub fn check_t_independence_general(
    cond_survival: &[Vec<f64>],
    spec: &IndependenceSpec,
    marginal_survival: &[f64],
) -> Result<Verdict> {
    spec.validate()?;
    if spec.kind != IndependenceKind::TSet {
        return Err(Error::Argument("spec kind must be t_set".into()));
    }
    let rows = cond_survival.len();
    if rows == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    let cols = cond_survival[0].len();
    if cond_survival.iter().any(|r| r.len() != cols) {
        return Err(Error::Argument("ragged matrix".into()));
    }
    if marginal_survival.len() != cols {
        return Err(Error::Argument(format!(
            "marginal length {} != {} columns",
            marginal_survival.len(),
            cols
        )));
    }
    for j in 0..cols {
        let col: Vec<f64> = cond_survival.iter().map(|r| r[j]).collect();
        let p = GridPropensity::new(col)?;
        let tol = spec.grid_tolerance(rows);
        let es = endpoints(spec.taus.as_ref().unwrap(), rows);
        for i in 0..es.len() {
            for k in (i + 1)..es.len() {
                let avg = p.average(es[i], es[k])?;
                if (avg - marginal_survival[j]).abs() > tol {
                    return Ok(Verdict::Fail {
                        t1: es[i],
                        t2: es[k],
                        average: avg,
                        expected: marginal_survival[j],
                    });
                }
            }
        }
    }
    Ok(Verdict::Pass)
}
