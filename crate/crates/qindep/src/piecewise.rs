//! Exact algebra for nondecreasing piecewise-linear functions.
//!
//! Every cdf, quantile function, and bound envelope in this crate is a
//! [`MonotoneCurve`]: a list of knots with nondecreasing x and y. Jumps are
//! encoded as two knots sharing the same x with `y_low < y_high`; evaluation
//! at the jump point returns the upper value (right-continuous convention).

use crate::error::{Error, Result};

/// Tolerance used to deduplicate knots during construction.
pub const KNOT_TOL: f64 = 1e-12;

/// A nondecreasing piecewise-linear function on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCurve {
    knots: Vec<(f64, f64)>,
    is_cdf: bool,
}

impl MonotoneCurve {
    /// Build a curve from knots with nondecreasing x and y. Duplicate-x knot
    /// pairs encode jumps. Knots closer than [`KNOT_TOL`] in both coordinates
    /// are collapsed.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(knots, false)
    }

    /// Build a curve tagged as a cdf: first y must be 0 and last y must be 1
    /// (within 1e-9; they are snapped exactly).
    pub fn cdf(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(knots, true)
    }

    fn build(knots: Vec<(f64, f64)>, is_cdf: bool) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Construction("need at least two knots".into()));
        }
        let mut clean: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
        for (x, y) in knots {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Construction("non-finite knot".into()));
            }
            if let Some(&(px, py)) = clean.last() {
                if x < px - KNOT_TOL {
                    return Err(Error::Construction(format!(
                        "knot x decreases: {px} -> {x}"
                    )));
                }
                if y < py - KNOT_TOL {
                    return Err(Error::Construction(format!(
                        "knot y decreases: {py} -> {y}"
                    )));
                }
                if (x - px).abs() <= KNOT_TOL && (y - py).abs() <= KNOT_TOL {
                    continue; // duplicate knot
                }
                // Keep x exactly equal for jump pairs.
                let x = if (x - px).abs() <= KNOT_TOL { px } else { x };
                let y = y.max(py);
                clean.push((x, y));
            } else {
                clean.push((x, y));
            }
        }
        if clean.len() < 2 {
            return Err(Error::Construction("degenerate curve".into()));
        }
        // Collapse triples at the same x down to the outer pair.
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(clean.len());
        for k in clean {
            let n = out.len();
            if n >= 2 && out[n - 1].0 == k.0 && out[n - 2].0 == k.0 {
                out[n - 1].1 = k.1;
            } else {
                out.push(k);
            }
        }
        let mut curve = MonotoneCurve { knots: out, is_cdf };
        if is_cdf {
            let n = curve.knots.len();
            let y0 = curve.knots[0].1;
            let y1 = curve.knots[n - 1].1;
            if y0.abs() > 1e-9 || (y1 - 1.0).abs() > 1e-9 {
                return Err(Error::Construction(format!(
                    "cdf endpoints must be 0 and 1, got {y0} and {y1}"
                )));
            }
            curve.knots[0].1 = 0.0;
            curve.knots[n - 1].1 = 1.0;
        }
        Ok(curve)
    }

    /// The uniform cdf on [0,1] (the identity).
    pub fn uniform() -> Self {
        MonotoneCurve {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
            is_cdf: true,
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_cdf(&self) -> bool {
        self.is_cdf
    }

    /// Closed domain [x_min, x_max].
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Implied range [y_first, y_last].
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0].1, self.knots[self.knots.len() - 1].1)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if x < lo - 1e-12 || x > hi + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "x = {x} outside domain [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Right-continuous evaluation: at a jump point the upper value.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let x = x.clamp(self.knots[0].0, self.knots[self.knots.len() - 1].0);
        // Last index with knot x <= x; duplicates give the upper knot.
        let idx = self.knots.partition_point(|k| k.0 <= x);
        if idx == 0 {
            return Ok(self.knots[0].1);
        }
        let (x0, y0) = self.knots[idx - 1];
        if x0 == x || idx == self.knots.len() {
            return Ok(y0);
        }
        let (x1, y1) = self.knots[idx];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Left limit: at a jump point the lower value.
    pub fn eval_left(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let x = x.clamp(self.knots[0].0, self.knots[self.knots.len() - 1].0);
        // First index with knot x >= x; duplicates give the lower knot.
        let idx = self.knots.partition_point(|k| k.0 < x);
        if idx == self.knots.len() {
            return Ok(self.knots[idx - 1].1);
        }
        let (x1, y1) = self.knots[idx];
        if x1 == x || idx == 0 {
            return Ok(y1);
        }
        let (x0, y0) = self.knots[idx - 1];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Generalized left-inverse inf{x : eval(x) >= q} for a cdf.
    /// On flats returns the left endpoint of the flat.
    pub fn left_inverse(&self, q: f64) -> Result<f64> {
        if !self.is_cdf {
            return Err(Error::Argument("left_inverse requires a cdf".into()));
        }
        if !(0.0..=1.0).contains(&q) || q <= 0.0 || q >= 1.0 {
            return Err(Error::OutOfRange(format!("q = {q} not in (0,1)")));
        }
        // First knot with y >= q; the previous one has y < q strictly.
        let j = self.knots.partition_point(|k| k.1 < q);
        debug_assert!(j >= 1 && j < self.knots.len());
        let (x1, y1) = self.knots[j];
        let (x0, y0) = self.knots[j - 1];
        if x0 == x1 {
            return Ok(x1); // jump crossing q
        }
        Ok(x0 + (x1 - x0) * (q - y0) / (y1 - y0))
    }

    /// Exact definite integral over [lo, hi] (trapezoid on linear pieces;
    /// vertical jump segments have zero width and contribute nothing).
    pub fn integrate(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo > hi {
            return Err(Error::Argument(format!("lo = {lo} > hi = {hi}")));
        }
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        let mut total = 0.0;
        let mut x_prev = lo;
        let mut y_prev = self.eval(lo)?;
        for &(x, _) in &self.knots {
            if x <= x_prev {
                continue;
            }
            if x >= hi {
                break;
            }
            let y_left = self.eval_left(x)?;
            total += 0.5 * (y_prev + y_left) * (x - x_prev);
            x_prev = x;
            y_prev = self.eval(x)?;
        }
        if hi > x_prev {
            let y_end = self.eval_left(hi)?;
            total += 0.5 * (y_prev + y_end) * (hi - x_prev);
        }
        Ok(total)
    }

    /// Pointwise eps*f + (1-eps)*g over a shared domain. The result carries
    /// the union of both knot sets (with jump pairs preserved).
    pub fn convex_combine(f: &Self, g: &Self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::OutOfRange(format!("eps = {eps} not in [0,1]")));
        }
        let (fl, fh) = f.domain();
        let (gl, gh) = g.domain();
        if (fl - gl).abs() > 1e-9 || (fh - gh).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "domain mismatch: [{fl},{fh}] vs [{gl},{gh}]"
            )));
        }
        // Union of knot x values; multiplicity 2 where either curve jumps.
        let mut xs: Vec<(f64, bool)> = Vec::new();
        let push = |x: f64, dup: bool, xs: &mut Vec<(f64, bool)>| {
            if let Some(last) = xs.last_mut() {
                if (last.0 - x).abs() <= KNOT_TOL {
                    last.1 |= dup;
                    return;
                }
            }
            xs.push((x, dup));
        };
        let mut merged: Vec<f64> = f
            .knots
            .iter()
            .map(|k| k.0)
            .chain(g.knots.iter().map(|k| k.0))
            .collect();
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for x in merged {
            let dup = f.has_jump_at(x) || g.has_jump_at(x);
            push(x, dup, &mut xs);
        }
        let mut knots = Vec::new();
        for (x, dup) in xs {
            if dup {
                let yl = eps * f.eval_left(x)? + (1.0 - eps) * g.eval_left(x)?;
                let yh = eps * f.eval(x)? + (1.0 - eps) * g.eval(x)?;
                knots.push((x, yl));
                knots.push((x, yh));
            } else {
                knots.push((x, eps * f.eval(x)? + (1.0 - eps) * g.eval(x)?));
            }
        }
        Self::build(knots, f.is_cdf && g.is_cdf)
    }

    fn has_jump_at(&self, x: f64) -> bool {
        let i = self.knots.partition_point(|k| k.0 < x - KNOT_TOL);
        i + 1 < self.knots.len()
            && (self.knots[i].0 - x).abs() <= KNOT_TOL
            && self.knots[i + 1].0 == self.knots[i].0
    }

    /// Curve with x and y swapped: the quantile function of a strictly
    /// increasing cdf, or the cdf of a strictly increasing quantile function.
    /// Flats become jumps and vice versa.
    pub fn swap_axes(&self, is_cdf: bool) -> Result<Self> {
        let knots = self.knots.iter().map(|&(x, y)| (y, x)).collect();
        Self::build(knots, is_cdf)
    }
}

/// Incremental builder for piecewise curves assembled branch by branch.
/// Pushing a point at the same x with a larger y creates a jump pair.
pub struct CurveBuilder {
    knots: Vec<(f64, f64)>,
}

impl CurveBuilder {
    pub fn new() -> Self {
        CurveBuilder { knots: Vec::new() }
    }

    pub fn push(&mut self, x: f64, y: f64) {
        if let Some(&(px, py)) = self.knots.last() {
            if (x - px).abs() <= KNOT_TOL && (y - py).abs() <= KNOT_TOL {
                return;
            }
        }
        self.knots.push((x, y));
    }

    /// Append a constant segment [x0, x1] at level v.
    pub fn push_const(&mut self, x0: f64, x1: f64, v: f64) {
        if x1 <= x0 + KNOT_TOL && !self.knots.is_empty() {
            self.push(x1.max(x0), v);
            return;
        }
        self.push(x0, v);
        self.push(x1, v);
    }

    /// Append the source curve over argument range [s0, s1], re-parameterized
    /// so it spans [x0, x0 + (s1 - s0)] here. Arguments are clamped to the
    /// source domain.
    pub fn push_shifted(&mut self, source: &MonotoneCurve, x0: f64, s0: f64, s1: f64) -> Result<()> {
        let (dl, dh) = source.domain();
        let c0 = s0.clamp(dl, dh);
        let c1 = s1.clamp(dl, dh);
        self.push(x0, source.eval(c0)?);
        if c0 > s0 {
            // below-domain arguments saturate at the left endpoint value
            self.push(x0 + (c0 - s0), source.eval(c0)?);
        }
        for &(sx, sy) in source.knots() {
            if sx > c0 + KNOT_TOL && sx < c1 - KNOT_TOL {
                self.push(x0 + (sx - s0), sy);
            }
        }
        self.push(x0 + (c1 - s0), source.eval(c1)?);
        if c1 < s1 {
            self.push(x0 + (s1 - s0), source.eval(c1)?);
        }
        Ok(())
    }

    pub fn finish(self, is_cdf: bool) -> Result<MonotoneCurve> {
        if is_cdf {
            MonotoneCurve::cdf(self.knots)
        } else {
            MonotoneCurve::new(self.knots)
        }
    }
}

impl Default for CurveBuilder {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(knots: &[(f64, f64)]) -> MonotoneCurve {
        MonotoneCurve::new(knots.to_vec()).unwrap()
    }

    #[test]
    fn eval_identity() {
        let c = MonotoneCurve::uniform();
        assert_eq!(c.eval(0.3).unwrap(), 0.3);
        assert_eq!(c.eval(0.25).unwrap(), 0.25);
    }

    #[test]
    fn eval_jump_is_right_continuous() {
        let c = curve(&[(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (1.0, 1.0)]);
        assert_eq!(c.eval(0.5).unwrap(), 0.5);
        assert_eq!(c.eval_left(0.5).unwrap(), 0.0);
        assert!(c.eval(0.49).unwrap() < 1e-12);
    }

    #[test]
    fn eval_out_of_domain_errors() {
        let c = MonotoneCurve::uniform();
        assert!(c.eval(1.5).is_err());
        assert!(c.eval(-0.1).is_err());
    }

    #[test]
    fn left_inverse_uniform() {
        let c = MonotoneCurve::uniform();
        assert!((c.left_inverse(0.75).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn left_inverse_flat_returns_left_endpoint() {
        // flat at level 0.5 over [0.2, 0.8]
        let c = MonotoneCurve::cdf(vec![(0.0, 0.0), (0.2, 0.5), (0.8, 0.5), (1.0, 1.0)]).unwrap();
        assert!((c.left_inverse(0.5).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn left_inverse_atom_at_one() {
        let c = MonotoneCurve::cdf(vec![(0.0, 0.0), (1.0, 0.5), (1.0, 1.0)]).unwrap();
        assert_eq!(c.left_inverse(0.9).unwrap(), 1.0);
    }

    #[test]
    fn left_inverse_requires_interior_q() {
        let c = MonotoneCurve::uniform();
        assert!(c.left_inverse(0.0).is_err());
        assert!(c.left_inverse(1.0).is_err());
    }

    #[test]
    fn integrate_identity_and_constant() {
        let c = MonotoneCurve::uniform();
        assert!((c.integrate(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let k = curve(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!((k.integrate(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_two_pieces_matches_riemann_sum() {
        let c = curve(&[(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]);
        let exact = c.integrate(0.0, 1.0).unwrap();
        assert!((exact - 0.75).abs() < 1e-12);
        // independent fine Riemann sum
        let n = 200_000;
        let mut sum = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            sum += c.eval(x).unwrap();
        }
        assert!((exact - sum / n as f64).abs() < 1e-5);
    }

    #[test]
    fn integrate_bad_order_errors() {
        let c = MonotoneCurve::uniform();
        assert!(c.integrate(0.8, 0.2).is_err());
    }

    #[test]
    fn convex_combine_endpoints_are_identities() {
        let f = MonotoneCurve::uniform();
        let g = MonotoneCurve::cdf(vec![(0.0, 0.0), (0.9, 0.0), (1.0, 1.0)]).unwrap();
        let h1 = MonotoneCurve::convex_combine(&f, &g, 1.0).unwrap();
        let h0 = MonotoneCurve::convex_combine(&f, &g, 0.0).unwrap();
        for &(x, _) in f.knots().iter().chain(g.knots()) {
            assert!((h1.eval(x).unwrap() - f.eval(x).unwrap()).abs() < 1e-12);
            assert!((h0.eval(x).unwrap() - g.eval(x).unwrap()).abs() < 1e-12);
        }
        let h = MonotoneCurve::convex_combine(&f, &g, 0.5).unwrap();
        assert!((h.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((h.eval(0.9).unwrap() - 0.5 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn convex_combine_domain_mismatch_errors() {
        let f = MonotoneCurve::uniform();
        let g = curve(&[(0.0, 0.0), (2.0, 1.0)]);
        assert!(MonotoneCurve::convex_combine(&f, &g, 0.5).is_err());
    }

    #[test]
    fn swap_axes_inverts_strictly_increasing_cdf() {
        let c = MonotoneCurve::cdf(vec![(0.0, 0.0), (2.0, 0.25), (4.0, 1.0)]).unwrap();
        let q = c.swap_axes(false).unwrap();
        assert!((q.eval(0.25).unwrap() - 2.0).abs() < 1e-12);
        assert!((q.eval(1.0).unwrap() - 4.0).abs() < 1e-12);
    }
}
