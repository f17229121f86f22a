//! Brute-force certification of the closed-form envelopes: optimize directly
//! over discretized feasible propensity scores. Two solver paths that share
//! no code with the analytic formulas: a structured greedy (bang-bang
//! water-filling per constraint segment) and a generic bounded-variable dense
//! simplex.

use serde::Serialize;

use crate::bounds::{cdf_bounds_t, cdf_bounds_u, interval_of};
use crate::error::{Error, Result};
use crate::independence::{IndependenceKind, IndependenceSpec, TauSet};
use crate::observables::ObservedJoint;
use crate::piecewise::MonotoneCurve;
use crate::propensity::GridPropensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

/// One equality constraint: the propensity values summed over `ranges`
/// (disjoint index ranges, in order) must equal `mass` (in cell units).
#[derive(Debug, Clone)]
pub struct Segment {
    pub ranges: Vec<std::ops::Range<usize>>,
    pub mass: f64,
}

impl Segment {
    fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().flat_map(|r| r.clone())
    }
}

/// The LP feasible set: box constraints p_i ∈ [0,1], cells pinned by
/// flatness, and disjoint segment-average equalities from the
/// average-value characterization. The constant propensity p ≡ p_x is always
/// feasible.
#[derive(Debug, Clone)]
pub struct FeasibleProgram {
    pub n_cells: usize,
    pub p_x: f64,
    pub pinned: Vec<Option<f64>>,
    pub segments: Vec<Segment>,
}

/// Translate an independence spec into grid constraints, snapping interval
/// endpoints to the nearest cell boundary.
pub fn build_program(spec: &IndependenceSpec, p_x: f64, n: usize) -> Result<FeasibleProgram> {
    if !(p_x > 0.0 && p_x < 1.0) {
        return Err(Error::Argument(format!("p_x = {p_x} not in (0,1)")));
    }
    let mut pinned = vec![None; n];
    let mut segments = Vec::new();
    let snap = |t: f64| ((t * n as f64).round() as usize).min(n);
    if let (IndependenceKind::TSet, Some(TauSet::Points(ts))) = (&spec.kind, &spec.taus) {
        // segments between consecutive points of T ∪ {0,1}
        let mut edges: Vec<usize> = vec![0];
        edges.extend(ts.iter().map(|&t| snap(t)));
        edges.push(n);
        edges.sort_unstable();
        edges.dedup();
        for w in edges.windows(2) {
            segments.push(Segment {
                ranges: vec![w[0]..w[1]],
                mass: p_x * (w[1] - w[0]) as f64,
            });
        }
        return Ok(FeasibleProgram { n_cells: n, p_x, pinned, segments });
    }
    let (a, b, is_u) = interval_of(spec)?;
    let (ia, ib) = (snap(a), snap(b));
    for cell in pinned.iter_mut().take(ib).skip(ia) {
        *cell = Some(p_x);
    }
    if is_u {
        // one global budget over the free cells
        let free = ia + (n - ib);
        if free > 0 {
            segments.push(Segment {
                ranges: vec![0..ia, ib..n],
                mass: p_x * free as f64,
            });
        }
    } else {
        // separate average constraints over [0,a] and [b,1]
        if ia > 0 {
            segments.push(Segment { ranges: vec![0..ia], mass: p_x * ia as f64 });
        }
        if ib < n {
            segments.push(Segment { ranges: vec![ib..n], mass: p_x * (n - ib) as f64 });
        }
    }
    Ok(FeasibleProgram { n_cells: n, p_x, pinned, segments })
}

impl FeasibleProgram {
    /// Bang-bang fill: within each segment, push mass-1 cells as early
    /// (maximizing every prefix sum simultaneously) or as late as the budget
    /// allows. Returns the whole extremal propensity.
    pub fn greedy_fill(&self, early: bool) -> GridPropensity {
        let mut v = vec![0.0; self.n_cells];
        for (i, p) in self.pinned.iter().enumerate() {
            if let Some(p) = p {
                v[i] = *p;
            }
        }
        for seg in &self.segments {
            let mut budget = seg.mass;
            let cells: Vec<usize> = seg.cells().collect();
            let order: Box<dyn Iterator<Item = &usize>> = if early {
                Box::new(cells.iter())
            } else {
                Box::new(cells.iter().rev())
            };
            for &i in order {
                let take = budget.min(1.0);
                v[i] = take;
                budget -= take;
                if budget <= 0.0 {
                    break;
                }
            }
        }
        GridPropensity::new(v).expect("fill stays in [0,1]")
    }

    /// F_{U|X}(k/N | x) for every k, induced by the given propensity.
    pub fn envelope(&self, p: &GridPropensity) -> Vec<f64> {
        let scale = 1.0 / (self.p_x * self.n_cells as f64);
        let mut out = Vec::with_capacity(self.n_cells + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &v in &p.values {
            acc += v;
            out.push((acc * scale).min(1.0));
        }
        out
    }

    fn free_cells(&self) -> Vec<usize> {
        self.segments.iter().flat_map(|s| s.cells()).collect()
    }

    /// Solve for one objective cell with the generic simplex.
    pub fn simplex_extremal_cdf(&self, k: usize, dir: Direction) -> Result<f64> {
        let free = self.free_cells();
        let nv = free.len();
        let m = self.segments.len();
        let mut a = vec![vec![0.0; nv]; m];
        let mut b = vec![0.0; m];
        for (row, seg) in self.segments.iter().enumerate() {
            b[row] = seg.mass;
            for (j, &cell) in free.iter().enumerate() {
                if seg.cells().any(|c| c == cell) {
                    a[row][j] = 1.0;
                }
            }
        }
        let sign = if dir == Direction::Max { 1.0 } else { -1.0 };
        let c: Vec<f64> = free
            .iter()
            .map(|&cell| if cell < k { sign } else { 0.0 })
            .collect();
        let ub = vec![1.0; nv];
        let (obj, _) = simplex_bounded(&a, &b, &c, &ub)?;
        let pinned_below: f64 = self
            .pinned
            .iter()
            .take(k)
            .filter_map(|p| *p)
            .sum();
        Ok((sign * obj + pinned_below) / (self.p_x * self.n_cells as f64))
    }
}

/// Exact optimum of the prefix-sum objective at objective cell k, by greedy.
pub fn solve_extremal_cdf(
    program: &FeasibleProgram,
    k: usize,
    dir: Direction,
) -> Result<(f64, GridPropensity)> {
    if k > program.n_cells {
        return Err(Error::OutOfRange(format!("objective cell {k} out of range")));
    }
    let p = program.greedy_fill(dir == Direction::Max);
    let value = program.envelope(&p)[k];
    Ok((value, p))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub spec: IndependenceSpec,
    pub n_cells: usize,
    pub max_discrepancy: f64,
    pub worst_u: f64,
    pub pass: bool,
}

/// Sweep every grid u*, compare the oracle envelope against the analytic
/// bound formulas, and cross-check a subsample with the simplex.
pub fn verify_bounds(spec: &IndependenceSpec, p_x: f64, n_cells: usize) -> Result<VerifyReport> {
    if n_cells < 100 {
        return Err(Error::Argument(format!(
            "n_cells = {n_cells} too coarse; need at least 100"
        )));
    }
    let program = build_program(spec, p_x, n_cells)?;
    let upper = program.envelope(&program.greedy_fill(true));
    let lower = program.envelope(&program.greedy_fill(false));

    let f_u = MonotoneCurve::uniform();
    let (a, b, is_u) = interval_of(spec)?;
    let pair = if is_u {
        cdf_bounds_u(a, b, p_x, &f_u)?
    } else {
        cdf_bounds_t(a, b, p_x, &f_u)?
    };

    let mut max_disc = 0.0f64;
    let mut worst_u = 0.0;
    for k in 0..=n_cells {
        let u = k as f64 / n_cells as f64;
        let du = (upper[k] - pair.upper.eval(u)?).abs();
        let dl = (lower[k] - pair.lower.eval(u)?).abs();
        let d = du.max(dl);
        if d > max_disc {
            max_disc = d;
            worst_u = u;
        }
    }

    // independent solver path on a subsample of objective cells
    let mut solvers_agree = true;
    let step = (n_cells / 10).max(1);
    for k in (0..=n_cells).step_by(step) {
        for dir in [Direction::Max, Direction::Min] {
            let greedy = match dir {
                Direction::Max => upper[k],
                Direction::Min => lower[k],
            };
            let lp = program.simplex_extremal_cdf(k, dir)?;
            if (greedy - lp).abs() > 1e-9 {
                solvers_agree = false;
            }
        }
    }

    let tol = 3.0 / n_cells as f64;
    Ok(VerifyReport {
        spec: spec.clone(),
        n_cells,
        max_discrepancy: max_disc,
        worst_u,
        pass: max_disc <= tol && solvers_agree,
    })
}

/// Extremal E(Y0 | X=1) over feasible propensities. Uses the rank
/// representation Q_{Y0}(u) = Q_{Y|X}(F_{U|X}(u|0) | 0): maximizing the
/// treated mean means pushing untreated mass early (the arm-0 upper cdf
/// envelope), which the late-treated greedy fill attains at every prefix
/// simultaneously.
pub fn extremal_mean(
    spec: &IndependenceSpec,
    obs: &ObservedJoint,
    dir: Direction,
    n_cells: usize,
) -> Result<f64> {
    let p1 = obs.p1;
    let program = build_program(spec, p1, n_cells)?;
    // treated mass late <=> untreated mass early <=> arm-0 cdf maximal
    let p = program.greedy_fill(dir == Direction::Min);
    let n = n_cells as f64;
    let p0 = 1.0 - p1;
    // E(Y0) = ∫ Q_{Y|X}(G0(u)|0) du with G0 the induced arm-0 cdf,
    // integrated exactly cell by cell (G0 is linear within a cell).
    let mut g_prev = 0.0;
    let mut total = 0.0;
    for &v in &p.values {
        let g_next = (g_prev + (1.0 - v) / (n * p0)).min(1.0);
        let cell = if g_next > g_prev + 1e-15 {
            obs.quantile0.integrate(g_prev, g_next)? / (g_next - g_prev) / n
        } else {
            obs.quantile0.eval(g_prev)? / n
        };
        total += cell;
        g_prev = g_next;
    }
    let e_y0 = total;
    Ok((e_y0 - p0 * obs.mean(0)?) / p1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarStatus {
    Lower,
    Upper,
    Basic,
}

/// max c'x subject to a·x = b (b ≥ 0), 0 ≤ x ≤ ub. Textbook bounded-variable
/// simplex with artificial-variable phase 1 and Bland's rule.
fn simplex_bounded(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    ub: &[f64],
) -> Result<(f64, Vec<f64>)> {
    const EPS: f64 = 1e-9;
    let m = a.len();
    let nv = c.len();
    let total = nv + m;
    // columns: real variables then artificials (identity)
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = a[i].to_vec();
            row.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let mut bounds: Vec<f64> = ub.to_vec();
    bounds.extend(std::iter::repeat(f64::INFINITY).take(m));
    let mut status = vec![VarStatus::Lower; total];
    let mut basis: Vec<usize> = (nv..total).collect();
    for &j in &basis {
        status[j] = VarStatus::Basic;
    }
    let mut xb: Vec<f64> = b.to_vec();

    let run_phase = |t: &mut Vec<Vec<f64>>,
                         xb: &mut Vec<f64>,
                         basis: &mut Vec<usize>,
                         status: &mut Vec<VarStatus>,
                         bounds: &[f64],
                         costs: &[f64]|
     -> Result<()> {
        for _iter in 0..20_000 {
            // reduced costs
            let cb: Vec<f64> = basis.iter().map(|&j| costs[j]).collect();
            let mut entering = None;
            for j in 0..costs.len() {
                if status[j] == VarStatus::Basic {
                    continue;
                }
                let mut d = costs[j];
                for i in 0..m {
                    d -= cb[i] * t[i][j];
                }
                let eligible = match status[j] {
                    VarStatus::Lower => d > EPS,
                    VarStatus::Upper => d < -EPS,
                    VarStatus::Basic => false,
                };
                if eligible {
                    entering = Some(j);
                    break; // Bland's rule
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let s = if status[j] == VarStatus::Lower { 1.0 } else { -1.0 };
            // per unit increase t of the move, basic i changes by -s*t[i][j]
            let mut t_max = bounds[j];
            let mut leave: Option<(usize, VarStatus)> = None;
            for i in 0..m {
                let delta = -s * t[i][j];
                if delta < -EPS {
                    let ratio = xb[i] / (-delta);
                    if ratio < t_max - EPS {
                        t_max = ratio;
                        leave = Some((i, VarStatus::Lower));
                    }
                } else if delta > EPS {
                    let cap = bounds[basis[i]];
                    if cap.is_finite() {
                        let ratio = (cap - xb[i]) / delta;
                        if ratio < t_max - EPS {
                            t_max = ratio;
                            leave = Some((i, VarStatus::Upper));
                        }
                    }
                }
            }
            if !t_max.is_finite() {
                return Err(Error::Infeasible("unbounded program".into()));
            }
            let t_step = t_max.max(0.0);
            for i in 0..m {
                xb[i] += -s * t[i][j] * t_step;
            }
            match leave {
                None => {
                    // entering variable moves across to its other bound
                    status[j] = if status[j] == VarStatus::Lower {
                        VarStatus::Upper
                    } else {
                        VarStatus::Lower
                    };
                }
                Some((r, bound_hit)) => {
                    let entering_val = if s > 0.0 { t_step } else { bounds[j] - t_step };
                    let old = basis[r];
                    status[old] = bound_hit;
                    status[j] = VarStatus::Basic;
                    basis[r] = j;
                    let piv = t[r][j];
                    for col in 0..costs.len() {
                        t[r][col] /= piv;
                    }
                    for i in 0..m {
                        if i != r && t[i][j].abs() > 0.0 {
                            let f = t[i][j];
                            for col in 0..costs.len() {
                                t[i][col] -= f * t[r][col];
                            }
                        }
                    }
                    xb[r] = entering_val;
                }
            }
        }
        Err(Error::Infeasible("simplex iteration limit".into()))
    };

    // phase 1: drive artificials to zero
    let mut phase1 = vec![0.0; total];
    for cost in phase1.iter_mut().skip(nv) {
        *cost = -1.0;
    }
    run_phase(&mut t, &mut xb, &mut basis, &mut status, &bounds, &phase1)?;
    let infeas: f64 = basis
        .iter()
        .zip(xb.iter())
        .filter(|(&j, _)| j >= nv)
        .map(|(_, &v)| v)
        .sum();
    if infeas > 1e-7 {
        return Err(Error::Infeasible(format!("phase-1 residual {infeas}")));
    }
    // phase 2: lock artificials at zero
    for cap in bounds.iter_mut().skip(nv) {
        *cap = 0.0;
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat(0.0).take(m));
    run_phase(&mut t, &mut xb, &mut basis, &mut status, &bounds, &phase2)?;

    let mut x = vec![0.0; nv];
    for j in 0..nv {
        x[j] = match status[j] {
            VarStatus::Lower => 0.0,
            VarStatus::Upper => ub[j],
            VarStatus::Basic => 0.0,
        };
    }
    for (i, &j) in basis.iter().enumerate() {
        if j < nv {
            x[j] = xb[i];
        }
    }
    let obj = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok((obj, x))
}
