//! Closed-form bound envelopes for F_{U|X}(·|x) and Q_{Y0|X}(·|1) under
//! T- and U-independence on an interval [a,b], plus the identified sets for
//! E(Y0|X=1), ATT, Q_{Y0|X}(q|1), and QTT(q) assembled from them.
//!
//! The U-independence quantile/mean branch conditions are stated so that each
//! branch is the exact inverse (through the mixing identity
//! p1 F(u|1) + p0 F(u|0) = F_U(u)) of the corresponding conditional-cdf
//! envelope: the lower quantile bound splits on (1-(b-a))·p1 vs a, the upper
//! on (1-(b-a))·p0 vs a. Ties go to the first branch; the branches coincide
//! there.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::independence::{IndependenceKind, IndependenceSpec, TauSet};
use crate::observables::ObservedJoint;
use crate::piecewise::{CurveBuilder, MonotoneCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTarget {
    CdfUGivenX,
    QuantileY0GivenX1,
}

/// Upper and lower envelope curves for one target, with enough context to
/// rebuild the complementary arm's pair.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub lower: MonotoneCurve,
    pub upper: MonotoneCurve,
    pub target: BoundTarget,
    pub spec: IndependenceSpec,
    pub a: f64,
    pub b: f64,
    pub p_x: f64,
    /// marginal F_U, kept for cdf-target pairs
    pub f_u: Option<MonotoneCurve>,
}

impl BoundPair {
    /// Upper bound at tau. At a jump the left limit is the binding (tighter)
    /// value: the bound holds on the open branch intervals.
    pub fn upper_at(&self, tau: f64) -> Result<f64> {
        self.upper.eval_left(tau)
    }

    /// Lower bound at tau; right limit at jumps, symmetrically.
    pub fn lower_at(&self, tau: f64) -> Result<f64> {
        self.lower.eval(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Att,
    Qtt(f64),
    MeanY0GivenX1,
    QuantileY0GivenX1(f64),
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Att => write!(f, "ATT"),
            Param::Qtt(q) => write!(f, "QTT({q})"),
            Param::MeanY0GivenX1 => write!(f, "E_Y0_given_X1"),
            Param::QuantileY0GivenX1(q) => write!(f, "Q_Y0_given_X1({q})"),
        }
    }
}

impl Serialize for Param {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A closed interval [lo, hi] for a scalar parameter. Only the interior is
/// proven attainable, so endpoint attainability is left open.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedSet {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
    pub interior_sharp: bool,
    pub spec: IndependenceSpec,
}

impl Serialize for IdentifiedSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("IdentifiedSet", 5)?;
        st.serialize_field("param", &self.param)?;
        st.serialize_field("lo", &self.lo)?;
        st.serialize_field("hi", &self.hi)?;
        st.serialize_field("interior_sharp", &self.interior_sharp)?;
        st.serialize_field("spec", &self.spec)?;
        st.end()
    }
}

impl IdentifiedSet {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Extract the restriction interval: T/U intervals directly, singletons from
/// one-point sets, and [0,1] for full independence.
pub fn interval_of(spec: &IndependenceSpec) -> Result<(f64, f64, bool)> {
    match (&spec.kind, &spec.taus) {
        (IndependenceKind::Full, _) => Ok((0.0, 1.0, false)),
        (IndependenceKind::TSet, Some(TauSet::Interval { a, b })) => Ok((*a, *b, false)),
        (IndependenceKind::USet, Some(TauSet::Interval { a, b })) => Ok((*a, *b, true)),
        (IndependenceKind::TSet, Some(TauSet::Points(ts))) if ts.len() == 1 => {
            Ok((ts[0], ts[0], false))
        }
        (IndependenceKind::USet, Some(TauSet::Points(ts))) if ts.len() == 1 => {
            Ok((ts[0], ts[0], true))
        }
        _ => Err(Error::Argument(
            "bounds require an interval (or singleton) T/U restriction, or full independence"
                .into(),
        )),
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(0.0 <= a && a <= b && b <= 1.0) {
        return Err(Error::Argument(format!("need 0 <= a <= b <= 1, got [{a},{b}]")));
    }
    Ok(())
}

fn check_px(p_x: f64) -> Result<()> {
    if !(p_x > 0.0 && p_x < 1.0) {
        return Err(Error::Argument(format!("p_x = {p_x} not in (0,1)")));
    }
    Ok(())
}

/// Q_U with saturation at the domain edges (F_U values 0 and 1).
fn q_u(f_u: &MonotoneCurve, q: f64) -> Result<f64> {
    let (lo, hi) = f_u.domain();
    if q <= 0.0 {
        Ok(lo)
    } else if q >= 1.0 {
        Ok(hi)
    } else {
        f_u.left_inverse(q)
    }
}

/// Evaluate a continuous piecewise formula at the union of its breakpoints
/// and the F_U knots; exact because every branch is affine in F_U(u).
fn sample_formula<F>(f_u: &MonotoneCurve, breakpoints: &[f64], formula: F) -> Result<MonotoneCurve>
where
    F: Fn(f64, f64) -> f64,
{
    let (dlo, dhi) = f_u.domain();
    let mut xs: Vec<f64> = f_u.knots().iter().map(|k| k.0).collect();
    xs.extend(breakpoints.iter().map(|&x| x.clamp(dlo, dhi)));
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xs.dedup_by(|p, q| (*p - *q).abs() < 1e-13);
    let mut knots = Vec::with_capacity(xs.len());
    for x in xs {
        let v = formula(x, f_u.eval(x)?).clamp(0.0, 1.0);
        knots.push((x, v));
    }
    MonotoneCurve::cdf(knots)
}

/// Five-piece envelopes on F_{U|X}(·|x) under T-independence on [a,b].
pub fn cdf_bounds_t(a: f64, b: f64, p_x: f64, f_u: &MonotoneCurve) -> Result<BoundPair> {
    check_interval(a, b)?;
    check_px(p_x)?;
    let fa = f_u.eval(a)?;
    let fb = f_u.eval(b)?;
    let u1 = q_u(f_u, p_x * fa)?;
    let u4 = q_u(f_u, p_x + fb * (1.0 - p_x))?;
    let upper = sample_formula(f_u, &[u1, a, b, u4], |u, f| {
        if u <= u1 {
            f / p_x
        } else if u <= a {
            fa
        } else if u <= b {
            f
        } else if u <= u4 {
            (f - fb) / p_x + fb
        } else {
            1.0
        }
    })?;
    let l1 = q_u(f_u, (1.0 - p_x) * fa)?;
    let l4 = q_u(f_u, p_x * fb + (1.0 - p_x))?;
    let lower = sample_formula(f_u, &[l1, a, b, l4], |u, f| {
        if u <= l1 {
            0.0
        } else if u <= a {
            (f - fa) / p_x + fa
        } else if u <= b {
            f
        } else if u <= l4 {
            fb
        } else {
            (f - 1.0) / p_x + 1.0
        }
    })?;
    Ok(BoundPair {
        lower,
        upper,
        target: BoundTarget::CdfUGivenX,
        spec: IndependenceSpec::t_interval(a.max(f64::MIN_POSITIVE), b.min(1.0)),
        a,
        b,
        p_x,
        f_u: Some(f_u.clone()),
    })
}

/// Envelopes on F_{U|X}(·|x) under U-independence on [a,b]. The lower bound
/// splits on (1-(F(b)-F(a)))(1-p_x) vs F(a), the upper on the p_x analogue.
pub fn cdf_bounds_u(a: f64, b: f64, p_x: f64, f_u: &MonotoneCurve) -> Result<BoundPair> {
    check_interval(a, b)?;
    check_px(p_x)?;
    if a == b && a > 0.0 && b < 1.0 {
        eprintln!("warning: zero-length U-interval; assumption is vacuous, bounds are the no-assumptions envelopes");
    }
    let fa = f_u.eval(a)?;
    let fb = f_u.eval(b)?;
    let m = fb - fa;
    let free0 = (1.0 - m) * (1.0 - p_x);
    let lower = if free0 <= fa {
        let c = q_u(f_u, free0)?;
        sample_formula(f_u, &[c, a, b], |u, f| {
            if u <= c {
                0.0
            } else if u <= a {
                (f - free0) / p_x
            } else if u <= b {
                (fb - 1.0) * (1.0 - p_x) / p_x + f
            } else {
                (f - 1.0) / p_x + 1.0
            }
        })?
    } else {
        let c = q_u(f_u, p_x * m + 1.0 - p_x)?;
        sample_formula(f_u, &[a, b, c], |u, f| {
            if u <= a {
                0.0
            } else if u <= b {
                f - fa
            } else if u <= c {
                m
            } else {
                (f - 1.0) / p_x + 1.0
            }
        })?
    };
    let free1 = (1.0 - m) * p_x;
    let upper = if free1 <= fa {
        let c = q_u(f_u, free1)?;
        sample_formula(f_u, &[c, a, b], |u, f| {
            if u <= c {
                f / p_x
            } else if u <= a {
                1.0 - m
            } else if u <= b {
                1.0 - (fb - f)
            } else {
                1.0
            }
        })?
    } else {
        let c = q_u(f_u, m * (1.0 - p_x) + p_x)?;
        sample_formula(f_u, &[a, b, c], |u, f| {
            if u <= a {
                f / p_x
            } else if u <= b {
                fa / p_x + f - fa
            } else if u <= c {
                (m * (p_x - 1.0) + f) / p_x
            } else {
                1.0
            }
        })?
    };
    Ok(BoundPair {
        lower,
        upper,
        target: BoundTarget::CdfUGivenX,
        spec: IndependenceSpec::u_interval(a.max(f64::MIN_POSITIVE), b.min(1.0)),
        a,
        b,
        p_x,
        f_u: Some(f_u.clone()),
    })
}

/// Three-piece envelopes on Q_{Y0|X}(·|1) under T-independence on [a,b]:
/// point identification inside (a,b], support-quantile flats outside.
pub fn quantile_bounds_t(a: f64, b: f64, p1: f64, obs: &ObservedJoint) -> Result<BoundPair> {
    check_interval(a, b)?;
    check_px(p1)?;
    let q0 = &obs.quantile0;
    let q_bot = q0.eval(0.0)?;
    let q_top = q0.eval(1.0)?;
    let qa = q0.eval(a)?;
    let qb = q0.eval(b)?;

    let mut up = CurveBuilder::new();
    up.push_const(0.0, a, qa);
    up.push_shifted(q0, a, a, b)?;
    up.push_const(b, 1.0, q_top);
    let upper = up.finish(false)?;

    let mut lo = CurveBuilder::new();
    lo.push_const(0.0, a, q_bot);
    lo.push_shifted(q0, a, a, b)?;
    lo.push_const(b, 1.0, qb);
    let lower = lo.finish(false)?;

    Ok(BoundPair {
        lower,
        upper,
        target: BoundTarget::QuantileY0GivenX1,
        spec: IndependenceSpec::t_interval(a.max(f64::MIN_POSITIVE), b.min(1.0)),
        a,
        b,
        p_x: p1,
        f_u: None,
    })
}

/// Envelopes on Q_{Y0|X}(·|1) under U-independence on [a,b].
pub fn quantile_bounds_u(a: f64, b: f64, p1: f64, obs: &ObservedJoint) -> Result<BoundPair> {
    check_interval(a, b)?;
    check_px(p1)?;
    if a == b && a > 0.0 && b < 1.0 {
        eprintln!("warning: zero-length U-interval; assumption is vacuous, bounds are the no-assumptions envelopes");
    }
    let p0 = 1.0 - p1;
    let m = b - a;
    let q0 = &obs.quantile0;
    let q_bot = q0.eval(0.0)?;
    let q_top = q0.eval(1.0)?;

    // Lower bound: inverse of the upper F_{U|X}(·|1) envelope, so the case
    // split is on the treated free mass (1-m)·p1 vs a.
    let mut lo = CurveBuilder::new();
    if (1.0 - m) * p1 <= a {
        lo.push_const(0.0, 1.0 - m, q_bot);
        lo.push_shifted(q0, 1.0 - m, 1.0 - m + (b - 1.0) / p0, 1.0 + (b - 1.0) / p0)?;
    } else {
        let t0 = a / p1;
        lo.push_const(0.0, t0, q_bot);
        lo.push_shifted(q0, t0, 0.0, m)?;
        lo.push_const(t0 + m, 1.0, q0.eval(m)?);
    }
    let lower = lo.finish(false)?;

    // Upper bound: inverse of the lower F_{U|X}(·|1) envelope; split on the
    // untreated free mass (1-m)·p0 vs a.
    let mut up = CurveBuilder::new();
    if (1.0 - m) * p0 <= a {
        let t0 = 1.0 - m - (1.0 - b) / p1;
        up.push_const(0.0, t0, q0.eval(1.0 - m)?);
        up.push_shifted(q0, t0, 1.0 - m, 1.0)?;
        up.push_const(1.0 - (1.0 - b) / p1, 1.0, q_top);
    } else {
        up.push_shifted(q0, 0.0, a / p0, a / p0 + m)?;
        up.push_const(m, 1.0, q_top);
    }
    let upper = up.finish(false)?;

    Ok(BoundPair {
        lower,
        upper,
        target: BoundTarget::QuantileY0GivenX1,
        spec: IndependenceSpec::u_interval(a.max(f64::MIN_POSITIVE), b.min(1.0)),
        a,
        b,
        p_x: p1,
        f_u: None,
    })
}

/// Closed-form bounds on E(Y0 | X=1), by exact integration of the tabulated
/// Q_{Y|X}(·|0).
pub fn mean_bounds(spec: &IndependenceSpec, obs: &ObservedJoint) -> Result<IdentifiedSet> {
    let (a, b, is_u) = interval_of(spec)?;
    check_interval(a, b)?;
    let p1 = obs.p1;
    let p0 = 1.0 - p1;
    let q0 = &obs.quantile0;
    let q_bot = q0.eval(0.0)?;
    let q_top = q0.eval(1.0)?;
    let (lo, hi) = if !is_u {
        let hi = a * q0.eval(a)? + q0.integrate(a, b)? + (1.0 - b) * q_top;
        let lo = a * q_bot + q0.integrate(a, b)? + (1.0 - b) * q0.eval(b)?;
        (lo, hi)
    } else {
        let m = b - a;
        let lo = if (1.0 - m) * p1 <= a {
            let s0 = (1.0 - m + (b - 1.0) / p0).max(0.0);
            let s1 = (p0 + b - 1.0) / p0;
            (1.0 - m) * q_bot + q0.integrate(s0, s1)?
        } else {
            let t0 = a / p1;
            t0 * q_bot + q0.integrate(0.0, m)? + (1.0 - m - t0) * q0.eval(m)?
        };
        let hi = if (1.0 - m) * p0 <= a {
            let w = 1.0 - m - (1.0 - b) / p1;
            q0.eval(1.0 - m)? * w + q0.integrate(1.0 - m, 1.0)? + q_top * (1.0 - b) / p1
        } else {
            q0.integrate(a / p0, a / p0 + m)? + (1.0 - m) * q_top
        };
        (lo, hi)
    };
    Ok(IdentifiedSet {
        param: Param::MeanY0GivenX1,
        lo,
        hi,
        interior_sharp: true,
        spec: spec.clone(),
    })
}

/// ATT set: E(Y | X=1) minus the reversed mean bounds.
pub fn att_set(spec: &IndependenceSpec, obs: &ObservedJoint) -> Result<IdentifiedSet> {
    let mb = mean_bounds(spec, obs)?;
    let ey1 = obs.mean(1)?;
    Ok(IdentifiedSet {
        param: Param::Att,
        lo: ey1 - mb.hi,
        hi: ey1 - mb.lo,
        interior_sharp: true,
        spec: spec.clone(),
    })
}

/// Identified set for Q_{Y0|X}(q|1).
pub fn quantile_y0_set(
    q: f64,
    spec: &IndependenceSpec,
    obs: &ObservedJoint,
) -> Result<IdentifiedSet> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange(format!("q = {q} not in (0,1)")));
    }
    let (a, b, is_u) = interval_of(spec)?;
    let pair = if is_u {
        quantile_bounds_u(a, b, obs.p1, obs)?
    } else {
        quantile_bounds_t(a, b, obs.p1, obs)?
    };
    Ok(IdentifiedSet {
        param: Param::QuantileY0GivenX1(q),
        lo: pair.lower_at(q)?,
        hi: pair.upper_at(q)?,
        interior_sharp: true,
        spec: spec.clone(),
    })
}

/// QTT(q) set: Q_{Y|X}(q|1) minus the reversed Q_{Y0|X}(q|1) bounds.
pub fn qtt_set(q: f64, spec: &IndependenceSpec, obs: &ObservedJoint) -> Result<IdentifiedSet> {
    let y0 = quantile_y0_set(q, spec, obs)?;
    let qy1 = obs.quantile1.eval(q)?;
    Ok(IdentifiedSet {
        param: Param::Qtt(q),
        lo: qy1 - y0.hi,
        hi: qy1 - y0.lo,
        interior_sharp: true,
        spec: spec.clone(),
    })
}

/// The jointly attainable pair of conditional cdfs at mixture weight eps:
/// (eps·F̲(·|1) + (1-eps)·F̄(·|1), (1-eps)·F̲(·|0) + eps·F̄(·|0)).
pub fn epsilon_mixture(pair: &BoundPair, eps: f64) -> Result<(MonotoneCurve, MonotoneCurve)> {
    if pair.target != BoundTarget::CdfUGivenX {
        return Err(Error::Argument("epsilon_mixture needs a cdf bound pair".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("eps = {eps} not in [0,1]")));
    }
    let f_u = pair
        .f_u
        .as_ref()
        .ok_or_else(|| Error::Argument("cdf pair is missing its marginal".into()))?;
    let other = match pair.spec.kind {
        IndependenceKind::TSet => cdf_bounds_t(pair.a, pair.b, 1.0 - pair.p_x, f_u)?,
        IndependenceKind::USet => cdf_bounds_u(pair.a, pair.b, 1.0 - pair.p_x, f_u)?,
        _ => return Err(Error::Argument("pair spec must be t_set or u_set".into())),
    };
    let arm1 = MonotoneCurve::convex_combine(&pair.lower, &pair.upper, eps)?;
    let arm0 = MonotoneCurve::convex_combine(&other.lower, &other.upper, 1.0 - eps)?;
    Ok((arm1, arm0))
}
