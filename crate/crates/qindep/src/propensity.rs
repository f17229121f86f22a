//! Latent propensity scores p(u) = P(X=1 | U=u) on a uniform grid over the
//! normalized domain [0,1], cell-midpoint semantics, plus the named
//! constructions: constants, zero-mean sawtooths, the extreme attainer with
//! positive-measure level sets, Roy-model propensities, and the bang-bang
//! propensities that attain the bound envelopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::independence::{IndependenceSpec, TauSet};
use crate::piecewise::MonotoneCurve;

/// p(u) sampled at the midpoints of a uniform N-cell partition of [0,1].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridPropensity {
    #[serde(rename = "n")]
    pub n_cells: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl GridPropensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("need at least one cell".into()));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Construction(format!(
                    "propensity value {v} outside [0,1]"
                )));
            }
        }
        Ok(GridPropensity { n_cells: values.len(), values })
    }

    pub fn n(&self) -> usize {
        self.n_cells
    }

    /// Midpoint of cell i.
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n_cells as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n_cells as f64
    }

    /// Prefix sums: out[k] = sum of the first k values. Length N+1.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_cells + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &v in &self.values {
            acc += v;
            out.push(acc);
        }
        out
    }

    /// Exact integral of the step function over [t1, t2] (cells are constant).
    pub fn integral(&self, t1: f64, t2: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t1) || !(0.0..=1.0).contains(&t2) || t1 > t2 {
            return Err(Error::OutOfRange(format!("bad interval [{t1},{t2}]")));
        }
        let n = self.n_cells as f64;
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let c0 = i as f64 / n;
            let c1 = (i + 1) as f64 / n;
            let lo = t1.max(c0);
            let hi = t2.min(c1);
            if hi > lo {
                acc += v * (hi - lo);
            }
        }
        Ok(acc)
    }

    /// Average of p over [t1, t2].
    pub fn average(&self, t1: f64, t2: f64) -> Result<f64> {
        if t2 <= t1 {
            return Err(Error::Argument(format!("empty interval [{t1},{t2}]")));
        }
        Ok(self.integral(t1, t2)? / (t2 - t1))
    }
}

pub fn constant(p1: f64, n: usize) -> Result<GridPropensity> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Argument(format!("p1 = {p1} not in [0,1]")));
    }
    GridPropensity::new(vec![p1; n])
}

/// On each segment between consecutive points of taus ∪ {0,1}, a symmetric
/// tent around the level p1: up to +amplitude at the first quarter, down to
/// -amplitude at the third quarter, back to the level. Each segment averages
/// exactly p1, so the result passes the T-check for T = taus.
pub fn sawtooth(p1: f64, taus: &[f64], amplitude: f64, n: usize) -> Result<GridPropensity> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Argument(format!("p1 = {p1} not in [0,1]")));
    }
    let mut edges = vec![0.0];
    for &t in taus {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Argument(format!("tau = {t} not in (0,1)")));
        }
        if t <= *edges.last().unwrap() {
            return Err(Error::Argument("taus must be sorted strictly".into()));
        }
        edges.push(t);
    }
    edges.push(1.0);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let seg = edges.windows(2).find(|w| u >= w[0] && u <= w[1]).unwrap();
        let s = (u - seg[0]) / (seg[1] - seg[0]);
        // zero-mean triangle wave on [0,1]: 0 -> +1 at 1/4 -> -1 at 3/4 -> 0
        let wave = if s < 0.25 {
            4.0 * s
        } else if s < 0.75 {
            2.0 - 4.0 * s
        } else {
            4.0 * s - 4.0
        };
        let v = p1 + amplitude * wave;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Construction(format!(
                "amplitude {amplitude} pushes value {v} outside [0,1]"
            )));
        }
        values.push(v);
    }
    GridPropensity::new(values)
}

/// p(u) = 1 on [a, a + p1(b-a)), 0 on the rest of [a,b], p1 outside [a,b].
/// Both level sets {p=0} and {p=1} have positive measure, and the average
/// over any interval containing [a,b] (or disjoint from (a,b)) is p1.
pub fn extreme_attainer(p1: f64, a: f64, b: f64, n: usize) -> Result<GridPropensity> {
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::Argument(format!("need 0 < a < b < 1, got [{a},{b}]")));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Argument(format!("p1 = {p1} not in [0,1]")));
    }
    let split = a + p1 * (b - a);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let v = if u < a || u > b {
            p1
        } else if u < split {
            1.0
        } else {
            0.0
        };
        values.push(v);
    }
    GridPropensity::new(values)
}

/// Roy-style selection: p(u) = Φ(mu(y₀)) with y₀ = Φ⁻¹(u), so the grid lives
/// on the ranks of the untreated outcome.
pub fn roy_propensity<F: Fn(f64) -> f64>(mu: F, n: usize) -> Result<GridPropensity> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let norm = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let y0 = norm.inverse_cdf(u);
        let m = mu(y0);
        if !m.is_finite() {
            return Err(Error::Evaluation(format!("mu({y0}) is not finite")));
        }
        values.push(norm.cdf(m));
    }
    GridPropensity::new(values)
}

/// The bang-bang propensity from the sharpness construction whose induced
/// conditional cdf equals the analytic bound envelope. For T-intervals the
/// attaining cdfs are the bound functions themselves; the propensity is their
/// difference quotient. With F_U uniform, Q_U is the identity.
pub fn bound_attainer(
    spec: &IndependenceSpec,
    p_x: f64,
    side: Side,
    n: usize,
) -> Result<GridPropensity> {
    if !(p_x > 0.0 && p_x < 1.0) {
        return Err(Error::Argument(format!("p_x = {p_x} not in (0,1)")));
    }
    let (a, b, is_u) = match (&spec.kind, &spec.taus) {
        (crate::independence::IndependenceKind::TSet, Some(TauSet::Interval { a, b })) => {
            (*a, *b, false)
        }
        (crate::independence::IndependenceKind::USet, Some(TauSet::Interval { a, b })) => {
            (*a, *b, true)
        }
        _ => {
            return Err(Error::Argument(
                "bound_attainer needs a T- or U-interval spec".into(),
            ))
        }
    };
    if !(0.0 < a && a <= b && b < 1.0) {
        return Err(Error::Argument(format!("need 0 < a <= b < 1, got [{a},{b}]")));
    }
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let v = if is_u {
            bang_bang_u(u, a, b, p_x, side)
        } else {
            bang_bang_t(u, a, b, p_x, side)
        };
        values.push(v.clamp(0.0, 1.0));
    }
    GridPropensity::new(values)
}

/// T-interval case: the upper envelope shifts all free mass below a to the
/// front and all free mass above b to just after b; the propensity is 1 on
/// the filled stretches, p_x on [a,b], 0 elsewhere.
fn bang_bang_t(u: f64, a: f64, b: f64, p_x: f64, side: Side) -> f64 {
    match side {
        Side::Upper => {
            if u < p_x * a {
                1.0
            } else if u < a {
                0.0
            } else if u <= b {
                p_x
            } else if u < b + p_x * (1.0 - b) {
                1.0
            } else {
                0.0
            }
        }
        Side::Lower => {
            if u < (1.0 - p_x) * a {
                0.0
            } else if u < a {
                1.0
            } else if u <= b {
                p_x
            } else if u < b + (1.0 - p_x) * (1.0 - b) {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// U-interval case: [a,b] is still pinned at p_x, but the remaining mass
/// p_x·(1-(b-a)) moves freely across the two tails. The case split at
/// (1-(b-a))·p_x = a resolves to the first branch; the bounds coincide there.
fn bang_bang_u(u: f64, a: f64, b: f64, p_x: f64, side: Side) -> f64 {
    let free = (1.0 - (b - a)) * p_x;
    match side {
        Side::Upper => {
            if free <= a {
                // all free mass fits below a
                if u < free {
                    1.0
                } else if u < a {
                    0.0
                } else if u <= b {
                    p_x
                } else {
                    0.0
                }
            } else {
                // fill [0,a) entirely, spill the remainder just after b
                if u < a {
                    1.0
                } else if u <= b {
                    p_x
                } else if u < b + (free - a) {
                    1.0
                } else {
                    0.0
                }
            }
        }
        Side::Lower => {
            if free <= 1.0 - b {
                if u < a {
                    0.0
                } else if u <= b {
                    p_x
                } else if u < 1.0 - (free - 0.0) {
                    0.0
                } else {
                    1.0
                }
            } else {
                if u < a - (free - (1.0 - b)) {
                    0.0
                } else if u < a {
                    1.0
                } else if u <= b {
                    p_x
                } else {
                    1.0
                }
            }
        }
    }
}

/// F_{U|X}(u|x) = (1/p_x) ∫₀ᵘ P(X=x|U=v) dv by exact cell summation.
/// `arm` selects whether the grid values are read as P(X=1|U) or flipped.
pub fn cdf_from_propensity(p: &GridPropensity, p_x: f64, arm: u8) -> Result<MonotoneCurve> {
    if !(p_x > 0.0 && p_x < 1.0) {
        return Err(Error::Argument(format!("p_x = {p_x} not in (0,1)")));
    }
    let mean = p.mean();
    let implied = if arm == 1 { mean } else { 1.0 - mean };
    if (implied - p_x).abs() > 1e-9 {
        return Err(Error::Inconsistent(format!(
            "mean propensity implies P(X={arm}) = {implied}, marginal says {p_x}"
        )));
    }
    let n = p.n_cells as f64;
    let mut knots = Vec::with_capacity(p.n_cells + 1);
    knots.push((0.0, 0.0));
    let mut acc = 0.0;
    for (i, &v) in p.values.iter().enumerate() {
        let mass = if arm == 1 { v } else { 1.0 - v };
        acc += mass / n;
        knots.push(((i as f64 + 1.0) / n, (acc / p_x).min(1.0)));
    }
    // kill accumulated rounding at the top
    let last = knots.last_mut().unwrap();
    last.1 = 1.0;
    MonotoneCurve::cdf(knots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::IndependenceSpec;

    #[test]
    fn constant_is_flat() {
        let p = constant(0.5, 4).unwrap();
        assert_eq!(p.values, vec![0.5; 4]);
        let p = constant(0.0, 2).unwrap();
        assert_eq!(p.values, vec![0.0, 0.0]);
        let p = constant(0.75, 1000).unwrap();
        assert!((p.mean() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sawtooth_segments_average_to_level() {
        let p = sawtooth(0.5, &[0.5], 0.5, 1000).unwrap();
        assert!((p.average(0.0, 0.5).unwrap() - 0.5).abs() < 2e-3);
        assert!((p.average(0.5, 1.0).unwrap() - 0.5).abs() < 2e-3);
    }

    #[test]
    fn sawtooth_zero_amplitude_is_constant() {
        let p = sawtooth(0.3, &[0.4], 0.0, 100).unwrap();
        assert_eq!(p, constant(0.3, 100).unwrap());
    }

    #[test]
    fn sawtooth_rejects_overflow() {
        assert!(sawtooth(0.9, &[0.5], 0.5, 100).is_err());
    }

    #[test]
    fn extreme_attainer_level_set_measure() {
        let p = extreme_attainer(0.5, 0.25, 0.75, 1000).unwrap();
        let ones = p.values.iter().filter(|&&v| v == 1.0).count();
        assert!((ones as f64 / 1000.0 - 0.25).abs() <= 2e-3);
        assert!((p.mean() - 0.5).abs() < 2e-3);
        assert!(extreme_attainer(0.5, 0.75, 0.25, 100).is_err());
    }

    #[test]
    fn roy_constant_mu_gives_half() {
        let p = roy_propensity(|_| 0.0, 100).unwrap();
        assert!(p.values.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn roy_monotone_mu_gives_monotone_p() {
        let p = roy_propensity(|y| y, 200).unwrap();
        assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(p.values[0] < p.values[199]);
    }

    #[test]
    fn roy_rejects_nonfinite_mu() {
        assert!(roy_propensity(|_| f64::NAN, 10).is_err());
    }

    #[test]
    fn cdf_from_constant_is_identity() {
        let p = constant(0.5, 100).unwrap();
        let cdf = cdf_from_propensity(&p, 0.5, 1).unwrap();
        for u in [0.1, 0.37, 0.8] {
            assert!((cdf.eval(u).unwrap() - u).abs() < 1e-12);
        }
        assert_eq!(cdf.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn cdf_from_extreme_attainer_slopes() {
        let p = extreme_attainer(0.5, 0.25, 0.75, 1000).unwrap();
        let cdf = cdf_from_propensity(&p, 0.5, 1).unwrap();
        // p=1 region [0.25, 0.5): slope 1/p_x = 2
        let rise = cdf.eval(0.45).unwrap() - cdf.eval(0.30).unwrap();
        assert!((rise - 2.0 * 0.15).abs() < 5e-3);
    }

    #[test]
    fn cdf_from_propensity_rejects_inconsistent_marginal() {
        let p = constant(0.5, 100).unwrap();
        assert!(matches!(
            cdf_from_propensity(&p, 0.6, 1),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn bound_attainer_mean_matches_marginal() {
        for side in [Side::Lower, Side::Upper] {
            for spec in [
                IndependenceSpec::t_interval(0.25, 0.75),
                IndependenceSpec::u_interval(0.25, 0.75),
            ] {
                let p = bound_attainer(&spec, 0.5, side, 2000).unwrap();
                assert!((p.mean() - 0.5).abs() < 1.5e-3, "side {side:?}");
            }
        }
    }

    #[test]
    fn bound_attainer_u_upper_shape() {
        // case (1-(b-a))p_x = 0.25 <= a = 0.25: ones below 0.25, p_x on [a,b], 0 above
        let spec = IndependenceSpec::u_interval(0.25, 0.75);
        let p = bound_attainer(&spec, 0.5, Side::Upper, 1000).unwrap();
        assert_eq!(p.values[10], 1.0);
        assert_eq!(p.values[500], 0.5);
        assert_eq!(p.values[900], 0.0);
    }

    #[test]
    fn mixing_identity_for_attainer_pairs() {
        // p1·F̄(u|1) + p0·F̲(u|0) = u on the grid
        let n = 2000;
        for spec in [
            IndependenceSpec::t_interval(0.3, 0.6),
            IndependenceSpec::u_interval(0.3, 0.6),
        ] {
            let p1 = 0.4;
            let upper = bound_attainer(&spec, p1, Side::Upper, n).unwrap();
            // complement: the arm-0 lower envelope is induced by the same
            // treatment propensity, read from the other arm
            let f1 = cdf_from_propensity(&upper, p1, 1).unwrap();
            let f0 = cdf_from_propensity(&upper, 1.0 - p1, 0).unwrap();
            for k in 1..20 {
                let u = k as f64 / 20.0;
                let mix = p1 * f1.eval(u).unwrap() + (1.0 - p1) * f0.eval(u).unwrap();
                assert!((mix - u).abs() < 2.0 / n as f64, "u={u} mix={mix}");
            }
        }
    }

    #[test]
    fn grid_propensity_json_shape() {
        let p = constant(0.5, 2).unwrap();
        let j = serde_json::to_value(&p).unwrap();
        assert_eq!(j["n"], 2);
        assert_eq!(j["values"][0], 0.5);
        let back: GridPropensity = serde_json::from_value(j).unwrap();
        assert_eq!(back, p);
    }
}
