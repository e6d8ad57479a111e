//! Bounded-variable primal simplex and the linear programs built on it:
//! the exactly discretized L1 relaxation and the L∞ feasibility test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{discretize_zoh, norm_inf, solve_linear, Matrix};
use crate::model::{AdmissibleSet, PiecewiseConstantControl, Problem};

/// `min cᵀx` subject to `A x = b`, `lo ≤ x ≤ hi` (bounds may be infinite).
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b_eq.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.cost.len();
        if self.a_eq.cols() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "LP with {n} costs, {} matrix columns, {} lower and {} upper bounds",
                self.a_eq.cols(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.a_eq.rows() != self.b_eq.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows with {} right-hand sides",
                self.a_eq.rows(),
                self.b_eq.len()
            )));
        }
        if let Some(j) = (0..n).find(|&j| !(self.lower[j] <= self.upper[j])) {
            return Err(Error::validation(
                "bounds",
                format!("variable {j} has lower {} above upper {}", self.lower[j], self.upper[j]),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap reached before any of the above was established.
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Equality-constraint multipliers of the final basis.
    pub duals: Vec<f64>,
}

pub const MAX_ITERATIONS: usize = 1_000_000;
const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Position {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variable resting at zero.
    Free,
}

/// Dense bounded-variable tableau shared by both phases.
struct Tableau {
    m: usize,
    /// Structural plus artificial columns.
    n: usize,
    /// `B⁻¹ [A | ±I]`, row-major `m × n`.
    t: Vec<f64>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pos: Vec<Position>,
    /// Variable basic in each row.
    basis: Vec<usize>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn col(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(move |i| self.t[i * self.n + j])
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.n..(i + 1) * self.n];
            for (dj, tij) in d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let p = self.t[r * n + j];
        for k in 0..n {
            self.t[r * n + k] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f == 0.0 {
                continue;
            }
            for (k, pk) in pivot_row.iter().enumerate() {
                self.t[i * n + k] -= f * pk;
            }
        }
    }

    /// Runs primal simplex with Bland's rule on `cost`.
    fn optimize(&mut self, cost: &[f64]) -> PhaseOutcome {
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return PhaseOutcome::IterationLimit;
            }
            let d = self.reduced_costs(cost);
            // Entering variable: smallest index with an improving direction.
            let entering = (0..self.n).find_map(|j| {
                if self.lower[j] == self.upper[j] {
                    return None;
                }
                match self.pos[j] {
                    Position::Basic(_) => None,
                    Position::AtLower if d[j] < -OPT_TOL => Some((j, 1.0)),
                    Position::AtUpper if d[j] > OPT_TOL => Some((j, -1.0)),
                    Position::Free if d[j] < -OPT_TOL => Some((j, 1.0)),
                    Position::Free if d[j] > OPT_TOL => Some((j, -1.0)),
                    _ => None,
                }
            });
            let Some((j, dir)) = entering else {
                return PhaseOutcome::Optimal;
            };
            self.iterations += 1;

            // Ratio test; ties go to the smallest leaving variable index.
            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, bool)> = None;
            let col: Vec<f64> = self.col(j).collect();
            for (i, &tij) in col.iter().enumerate() {
                let alpha = dir * tij;
                let bvar = self.basis[i];
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    ((self.x[bvar] - self.lower[bvar]) / alpha, false)
                } else if alpha < -PIVOT_TOL {
                    ((self.upper[bvar] - self.x[bvar]) / -alpha, true)
                } else {
                    continue;
                };
                if !limit.is_finite() {
                    continue;
                }
                let limit = limit.max(0.0);
                // Ties with a bound flip keep the flip.
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((r, _)) => (limit - step).abs() <= 1e-12 && bvar < self.basis[r],
                    None => false,
                };
                if better {
                    step = limit;
                    leave = Some((i, to_upper));
                }
            }
            if !step.is_finite() {
                return PhaseOutcome::Unbounded;
            }

            for (i, &tij) in col.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= dir * step * tij;
            }
            self.x[j] += dir * step;

            match leave {
                None => {
                    // Bound flip: the entering variable crosses its own range.
                    self.pos[j] = if dir > 0.0 {
                        Position::AtUpper
                    } else {
                        Position::AtLower
                    };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.pos[out] = if to_upper { Position::AtUpper } else { Position::AtLower };
                    self.pivot(r, j);
                    self.basis[r] = j;
                    self.pos[j] = Position::Basic(r);
                }
            }
        }
    }
}

/// Solves an LP with Phase I / Phase II bounded-variable primal simplex
/// under Bland's anti-cycling rule.
pub fn simplex_solve(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let m = problem.num_constraints();
    let ns = problem.num_vars();
    let n = ns + m;

    let mut x = vec![0.0; n];
    let mut pos = vec![Position::Free; n];
    for j in 0..ns {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        if lo.is_finite() {
            x[j] = lo;
            pos[j] = Position::AtLower;
        } else if hi.is_finite() {
            x[j] = hi;
            pos[j] = Position::AtUpper;
        }
    }

    // Artificial column i carries sign(r_i) so that it starts nonnegative.
    let mut t = vec![0.0; m * n];
    let mut lower = problem.lower.clone();
    let mut upper = problem.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let row = problem.a_eq.row(i);
        let r = problem.b_eq[i] - row.iter().zip(&x[..ns]).map(|(a, v)| a * v).sum::<f64>();
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        for j in 0..ns {
            t[i * n + j] = sign * row[j];
        }
        t[i * n + ns + i] = 1.0;
        x[ns + i] = r.abs();
        pos[ns + i] = Position::Basic(i);
        basis.push(ns + i);
    }

    let mut tab = Tableau {
        m,
        n,
        t,
        x,
        lower,
        upper,
        pos,
        basis,
        iterations: 0,
    };

    let mut phase1_cost = vec![0.0; n];
    for c in &mut phase1_cost[ns..] {
        *c = 1.0;
    }
    let scale = 1.0 + norm_inf(&problem.b_eq);
    match tab.optimize(&phase1_cost) {
        PhaseOutcome::IterationLimit => return Ok(finish(problem, &tab, LpStatus::IterationLimit)),
        PhaseOutcome::Unbounded => unreachable!("phase I objective is bounded below"),
        PhaseOutcome::Optimal => {}
    }
    let infeasibility: f64 = tab.x[ns..].iter().sum();
    if infeasibility > 1e-9 * scale {
        return Ok(finish(problem, &tab, LpStatus::Infeasible));
    }
    // Pin artificials at zero; any still basic stay degenerate.
    for k in ns..n {
        tab.upper[k] = 0.0;
        tab.x[k] = 0.0;
    }

    let mut phase2_cost = problem.cost.clone();
    phase2_cost.extend(std::iter::repeat_n(0.0, m));
    let status = match tab.optimize(&phase2_cost) {
        PhaseOutcome::Optimal => LpStatus::Optimal,
        PhaseOutcome::Unbounded => LpStatus::Unbounded,
        PhaseOutcome::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(finish(problem, &tab, status))
}

fn finish(problem: &LpProblem, tab: &Tableau, status: LpStatus) -> LpSolution {
    let ns = problem.num_vars();
    let m = problem.num_constraints();
    let mut x = tab.x[..ns].to_vec();
    let mut duals = vec![0.0; m];

    if status == LpStatus::Optimal && m > 0 {
        // Recompute basic values from the basis matrix to shed accumulated roundoff.
        let mut basis_matrix = Matrix::zeros(m, m);
        let mut rhs = problem.b_eq.clone();
        for i in 0..m {
            for (j, xj) in x.iter().enumerate() {
                if !matches!(tab.pos[j], Position::Basic(_)) {
                    rhs[i] -= problem.a_eq[(i, j)] * xj;
                }
            }
        }
        for (r, &bv) in tab.basis.iter().enumerate() {
            for i in 0..m {
                basis_matrix[(i, r)] = if bv < ns { problem.a_eq[(i, bv)] } else { 0.0 };
            }
            if bv >= ns {
                // Degenerate artificial: unit column of its row, value pinned at zero.
                basis_matrix[(bv - ns, r)] = 1.0;
            }
        }
        if let Ok(xb) = solve_linear(&basis_matrix, &rhs) {
            for (r, &bv) in tab.basis.iter().enumerate() {
                if bv < ns {
                    x[bv] = xb[r].clamp(problem.lower[bv], problem.upper[bv]);
                }
            }
        }
        let cb: Vec<f64> = tab
            .basis
            .iter()
            .map(|&bv| if bv < ns { problem.cost[bv] } else { 0.0 })
            .collect();
        if let Ok(y) = solve_linear(&basis_matrix.transpose(), &cb) {
            duals = y;
        }
    }
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = xj.clamp(problem.lower[j], problem.upper[j]);
    }
    let objective = problem.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution {
        x,
        objective,
        status,
        iterations: tab.iterations,
        duals,
    }
}

/// Exact discrete dynamics on a uniform grid of `intervals` steps over `horizon`:
/// returns the per-step input maps `A_d^{N-1-k} B_d` and the free response `A_d^N A`.
fn discrete_reachability(problem: &Problem, horizon: f64, intervals: usize) -> Result<(Vec<Matrix>, Vec<f64>)> {
    let dt = horizon / intervals as f64;
    let (ad, bd) = discretize_zoh(problem.f(), problem.g(), dt)?;
    let mut maps = vec![Matrix::zeros(0, 0); intervals];
    let mut power = Matrix::identity(problem.state_dim());
    for k in (0..intervals).rev() {
        maps[k] = power.matmul(&bd);
        power = power.matmul(&ad);
    }
    let free = power.mul_vec(problem.initial());
    Ok((maps, free))
}

fn box_bounds(problem: &Problem, what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    match problem.admissible() {
        AdmissibleSet::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
        AdmissibleSet::Ball { .. } => Err(Error::Unsupported(format!("{what} needs a box admissible set"))),
    }
}

/// Discretized L1 relaxation with the split `u_k = u_k⁺ - u_k⁻`.
///
/// Variable `2(k m + i)` is `u⁺_{k,i}` and the next one `u⁻_{k,i}`.
pub fn build_l1_lp(problem: &Problem, intervals: usize) -> Result<LpProblem> {
    if intervals == 0 {
        return Err(Error::validation("intervals", "need at least one interval"));
    }
    let (lo, hi) = box_bounds(problem, "the L1 relaxation")?;
    let (d, m) = (problem.state_dim(), problem.input_dim());
    let dt = problem.horizon() / intervals as f64;
    let (maps, free) = discrete_reachability(problem, problem.horizon(), intervals)?;
    let nv = 2 * intervals * m;
    let mut a_eq = Matrix::zeros(d, nv);
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    for (k, map) in maps.iter().enumerate() {
        for i in 0..m {
            let plus = 2 * (k * m + i);
            for r in 0..d {
                a_eq[(r, plus)] = map[(r, i)];
                a_eq[(r, plus + 1)] = -map[(r, i)];
            }
            upper[plus] = hi[i];
            upper[plus + 1] = -lo[i];
            lower[plus] = 0.0;
        }
    }
    let b_eq = crate::linalg::sub(problem.target(), &free);
    Ok(LpProblem {
        cost: vec![dt; nv],
        a_eq,
        b_eq,
        lower,
        upper,
    })
}

/// Reassembles the grid control `u_k = u_k⁺ - u_k⁻` from an L1 LP solution.
pub fn l1_control(problem: &Problem, intervals: usize, x: &[f64]) -> Result<PiecewiseConstantControl> {
    let m = problem.input_dim();
    let dt = problem.horizon() / intervals as f64;
    let breakpoints = (0..=intervals)
        .map(|k| {
            if k == intervals {
                problem.b()
            } else {
                problem.a() + dt * k as f64
            }
        })
        .collect();
    let values = (0..intervals)
        .map(|k| (0..m).map(|i| x[2 * (k * m + i)] - x[2 * (k * m + i) + 1]).collect())
        .collect();
    PiecewiseConstantControl::new(breakpoints, values)
}

/// L1-optimal grid control and its cost `∫‖u‖₁ dt`.
pub fn l1_solve(problem: &Problem, intervals: usize) -> Result<(PiecewiseConstantControl, f64)> {
    let lp = build_l1_lp(problem, intervals)?;
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    Ok((l1_control(problem, intervals, &sol.x)?, sol.objective))
}

/// L1 relaxation with every channel held at least `floor` away from zero on
/// one side: `u ≥ floor` for a positive floor, `u ≤ floor` for a negative one.
/// The returned control is then nonzero on the whole horizon; when its cost
/// still matches [`l1_solve`], the relaxed optimum has a full-support member.
pub fn l1_solve_floored(problem: &Problem, intervals: usize, floor: f64) -> Result<(PiecewiseConstantControl, f64)> {
    if !floor.is_finite() {
        return Err(Error::validation("floor", "must be finite"));
    }
    let mut lp = build_l1_lp(problem, intervals)?;
    let offset = if floor >= 0.0 { 0 } else { 1 };
    for j in (offset..lp.num_vars()).step_by(2) {
        if lp.upper[j] >= floor.abs() {
            lp.lower[j] = floor.abs();
        }
    }
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    Ok((l1_control(problem, intervals, &sol.x)?, sol.objective))
}

/// Literal evaluation of the three inequalities under which the L1 problem
/// for the double integrator from `(ξ1, ξ2)` to the origin in time `T` is singular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityVerdict {
    /// `ξ1 > ξ2²/2`
    pub above_parabola: bool,
    /// `ξ2 < 0`
    pub negative_velocity: bool,
    /// `-ξ2/2 - ξ1/ξ2 ≥ T`
    pub horizon_short: bool,
    pub horizon_bound: f64,
    pub singular: bool,
}

pub fn singularity_check(xi1: f64, xi2: f64, horizon: f64) -> SingularityVerdict {
    let above_parabola = xi1 > xi2 * xi2 / 2.0;
    let negative_velocity = xi2 < 0.0;
    let horizon_bound = -xi2 / 2.0 - xi1 / xi2;
    let horizon_short = horizon_bound >= horizon;
    SingularityVerdict {
        above_parabola,
        negative_velocity,
        horizon_short,
        horizon_bound,
        singular: above_parabola && negative_velocity && horizon_short,
    }
}

/// Smallest `s` such that the target is reachable at horizon `horizon` with
/// `u_k` in `s·U` on a uniform `intervals`-step grid; `s ≤ 1` means feasible.
///
/// Solved through the homogeneous form `max λ` s.t. `Σ M_k v_k = λ r`,
/// `v_k ∈ U`, for which `s = 1/λ`. Returns `+∞` when the target direction is
/// unreachable at any scale.
pub fn linf_feasibility(problem: &Problem, horizon: f64, intervals: usize) -> Result<f64> {
    if intervals == 0 || !(horizon > 0.0) {
        return Err(Error::validation(
            "horizon",
            "need a positive horizon and at least one interval",
        ));
    }
    let (lo, hi) = box_bounds(problem, "the L-infinity feasibility test")?;
    let (d, m) = (problem.state_dim(), problem.input_dim());
    let (maps, free) = discrete_reachability(problem, horizon, intervals)?;
    let r = crate::linalg::sub(problem.target(), &free);
    let scale = 1.0 + norm_inf(problem.target()).max(norm_inf(problem.initial()));
    if norm_inf(&r) <= 1e-13 * scale {
        return Ok(0.0);
    }
    let nv = intervals * m + 1;
    let lam = nv - 1;
    let mut a_eq = Matrix::zeros(d, nv);
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    for (k, map) in maps.iter().enumerate() {
        for i in 0..m {
            for row in 0..d {
                a_eq[(row, k * m + i)] = map[(row, i)];
            }
            lower[k * m + i] = lo[i];
            upper[k * m + i] = hi[i];
        }
    }
    for row in 0..d {
        a_eq[(row, lam)] = -r[row];
    }
    upper[lam] = f64::INFINITY;
    let mut cost = vec![0.0; nv];
    cost[lam] = -1.0;
    let sol = simplex_solve(&LpProblem {
        cost,
        a_eq,
        b_eq: vec![0.0; d],
        lower,
        upper,
    })?;
    match sol.status {
        LpStatus::Optimal => {
            let best = sol.x[lam];
            Ok(if best <= 1e-12 { f64::INFINITY } else { 1.0 / best })
        }
        status => Err(Error::Lp(status)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::l0_cost;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(cost: Vec<f64>, rows: &[Vec<f64>], b: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> LpProblem {
        LpProblem {
            cost,
            a_eq: Matrix::from_rows(rows).unwrap(),
            b_eq: b,
            lower: lo,
            upper: hi,
        }
    }

    fn check_feasible(p: &LpProblem, s: &LpSolution) {
        let r = crate::linalg::sub(&p.a_eq.mul_vec(&s.x), &p.b_eq);
        assert!(norm_inf(&r) <= 1e-8 * (1.0 + norm_inf(&p.b_eq)));
        for j in 0..p.num_vars() {
            assert!(s.x[j] >= p.lower[j] - 1e-10 && s.x[j] <= p.upper[j] + 1e-10);
        }
    }

    #[test]
    fn single_variable() {
        let p = lp(vec![1.0], &[vec![1.0]], vec![1.0], vec![0.0], vec![2.0]);
        let s = simplex_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_optimal_face() {
        let p = lp(
            vec![-1.0, -1.0],
            &[vec![1.0, 1.0]],
            vec![1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        let s = simplex_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
        check_feasible(&p, &s);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(vec![1.0], &[vec![1.0]], vec![3.0], vec![0.0], vec![2.0]);
        assert_eq!(simplex_solve(&p).unwrap().status, LpStatus::Infeasible);
        let q = lp(
            vec![-1.0, 0.0],
            &[vec![1.0, -1.0]],
            vec![0.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        assert_eq!(simplex_solve(&q).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables() {
        // min x + 2y  s.t. x - y = -3, x free, 0 ≤ y ≤ 10  →  y = 0, x = -3.
        let p = lp(
            vec![1.0, 2.0],
            &[vec![1.0, -1.0]],
            vec![-3.0],
            vec![f64::NEG_INFINITY, 0.0],
            vec![f64::INFINITY, 10.0],
        );
        let s = simplex_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_bounds() {
        let p = lp(vec![1.0], &[vec![1.0]], vec![1.0], vec![2.0], vec![1.0]);
        assert!(simplex_solve(&p).is_err());
    }

    /// Objective of the best vertex, by enumerating bases and nonbasic bound patterns.
    pub(crate) fn vertex_oracle(p: &LpProblem) -> Option<f64> {
        let (m, n) = (p.num_constraints(), p.num_vars());
        let mut best: Option<f64> = None;
        let mut choose = vec![0usize; m];
        fn next_combo(c: &mut [usize], n: usize) -> bool {
            let m = c.len();
            for i in (0..m).rev() {
                if c[i] < n - m + i {
                    c[i] += 1;
                    for k in i + 1..m {
                        c[k] = c[k - 1] + 1;
                    }
                    return true;
                }
            }
            false
        }
        for (i, c) in choose.iter_mut().enumerate() {
            *c = i;
        }
        loop {
            let nonbasic: Vec<usize> = (0..n).filter(|j| !choose.contains(j)).collect();
            let mut bm = Matrix::zeros(m, m);
            for (r, &j) in choose.iter().enumerate() {
                for i in 0..m {
                    bm[(i, r)] = p.a_eq[(i, j)];
                }
            }
            for pattern in 0..(1usize << nonbasic.len()) {
                let mut x = vec![0.0; n];
                for (k, &j) in nonbasic.iter().enumerate() {
                    x[j] = if pattern >> k & 1 == 1 { p.upper[j] } else { p.lower[j] };
                }
                let mut rhs = p.b_eq.clone();
                for i in 0..m {
                    for &j in &nonbasic {
                        rhs[i] -= p.a_eq[(i, j)] * x[j];
                    }
                }
                let Ok(xb) = solve_linear(&bm, &rhs) else { break };
                for (r, &j) in choose.iter().enumerate() {
                    x[j] = xb[r];
                }
                if (0..n).all(|j| x[j] >= p.lower[j] - 1e-9 && x[j] <= p.upper[j] + 1e-9) {
                    let obj: f64 = p.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            if !next_combo(&mut choose, n) {
                break;
            }
        }
        best
    }

    pub(crate) fn random_feasible_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LpProblem {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let x0: Vec<f64> = (0..n).map(|j| rng.gen_range(lower[j]..upper[j])).collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let b = a.mul_vec(&x0);
        LpProblem {
            cost: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a_eq: a,
            b_eq: b,
            lower,
            upper,
        }
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let p = random_feasible_lp(&mut rng, 5, 8);
            let s = simplex_solve(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            check_feasible(&p, &s);
            let oracle = vertex_oracle(&p).unwrap();
            assert!((s.objective - oracle).abs() <= 1e-8, "{} vs {}", s.objective, oracle);
        }
    }

    #[test]
    fn strong_duality_on_larger_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let p = random_feasible_lp(&mut rng, 10, 20);
            let s = simplex_solve(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            check_feasible(&p, &s);
            // Dual objective from the multipliers: yᵀb + Σ_j min over bounds of d_j x_j.
            let reduced: Vec<f64> = (0..p.num_vars())
                .map(|j| {
                    p.cost[j]
                        - (0..p.num_constraints())
                            .map(|i| p.a_eq[(i, j)] * s.duals[i])
                            .sum::<f64>()
                })
                .collect();
            let dual: f64 = crate::linalg::dot(&s.duals, &p.b_eq)
                + reduced
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| if d >= 0.0 { d * p.lower[j] } else { d * p.upper[j] })
                    .sum::<f64>();
            assert!((dual - s.objective).abs() < 1e-8, "dual {dual} primal {}", s.objective);
        }
    }

    #[test]
    fn l1_lp_shape_for_example2() {
        let lp = build_l1_lp(&fixtures::example2(), 500).unwrap();
        assert_eq!(lp.num_vars(), 1000);
        assert_eq!(lp.num_constraints(), 2);
    }

    #[test]
    fn l1_rejects_ball() {
        let p = Problem::new(
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            0.0,
            1.0,
            vec![0.0],
            vec![0.0],
            AdmissibleSet::Ball { radius: 1.0 },
        )
        .unwrap();
        assert!(matches!(build_l1_lp(&p, 10), Err(Error::Unsupported(_))));
    }

    #[test]
    fn l1_single_interval_scalar() {
        let reachable = fixtures::example1().with_horizon(0.0, 5.0).unwrap();
        // One ZOH step of length 5 with |u| ≤ 1 reaches 3 → 0 with u = -0.6.
        let (u, cost) = l1_solve(&reachable, 1).unwrap();
        assert!((u.values()[0][0] + 0.6).abs() < 1e-12);
        assert!((cost - 3.0).abs() < 1e-12);
        let tight = fixtures::example1().with_horizon(0.0, 2.0).unwrap();
        assert!(matches!(l1_solve(&tight, 1), Err(Error::Lp(LpStatus::Infeasible))));
    }

    #[test]
    fn l1_costs_on_examples() {
        for problem in [fixtures::example1(), fixtures::example2()] {
            let (u, cost) = l1_solve(&problem, 1000).unwrap();
            assert!((cost - 3.0).abs() < 1e-3, "cost {cost}");
            assert!(cost >= 3.0 - 1e-9);
            let traj = crate::sim::propagate_exact(&problem, &u).unwrap();
            assert!(crate::sim::endpoint_residual(&traj, problem.target()) < 1e-5);
            assert!(u.check_against(&problem, 1e-10).is_ok());
        }
    }

    #[test]
    fn floored_l1_keeps_cost_and_fills_support_on_example2() {
        let p = fixtures::example2();
        let (u, cost) = l1_solve_floored(&p, 1000, 0.05).unwrap();
        assert!((cost - 3.0).abs() <= 1e-6, "cost {cost}");
        assert!((l0_cost(&u, 1e-9) - 5.0).abs() < 1e-12);
        let traj = crate::sim::propagate_exact(&p, &u).unwrap();
        assert!(crate::sim::endpoint_residual(&traj, p.target()) < 1e-6);
        // Example 1 moves down: a positive floor costs extra, a negative one does not.
        let (_, c1) = l1_solve_floored(&fixtures::example1(), 200, 0.05).unwrap();
        assert!(c1 > 3.0 + 0.1);
        let (u1, c1) = l1_solve_floored(&fixtures::example1(), 200, -0.05).unwrap();
        assert!((c1 - 3.0).abs() <= 1e-9);
        assert!((l0_cost(&u1, 1e-9) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singularity_verdicts() {
        let a = singularity_check(10.0, -3.0, 4.8);
        assert!(a.above_parabola && a.negative_velocity && a.horizon_short && a.singular);
        assert!((a.horizon_bound - 29.0 / 6.0).abs() < 1e-15);
        let b = singularity_check(1.0, -3.0, 1.0);
        assert!(!b.above_parabola && !b.singular);
        let c = singularity_check(10.0, -3.0, 5.0);
        assert!(c.above_parabola && c.negative_velocity && !c.horizon_short && !c.singular);
        assert!(!singularity_check(10.0, 3.0, 1.0).negative_velocity);
    }

    #[test]
    fn l1_split_is_complementary() {
        let p = fixtures::example2();
        let lp = build_l1_lp(&p, 200).unwrap();
        let s = simplex_solve(&lp).unwrap();
        for k in 0..200 {
            assert!(s.x[2 * k] * s.x[2 * k + 1] <= 1e-9);
        }
    }

    #[test]
    fn l1_rest_to_rest_is_zero() {
        let p = Problem::new(
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            0.0,
            1.0,
            vec![0.0],
            vec![0.0],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        let (u, cost) = l1_solve(&p, 50).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(l0_cost(&u, 1e-9), 0.0);
    }

    #[test]
    fn l1_cost_converges_under_refinement() {
        let p = fixtures::example2();
        let costs: Vec<f64> = [250, 500, 1000, 2000]
            .iter()
            .map(|&n| l1_solve(&p, n).unwrap().1)
            .collect();
        for c in &costs {
            assert!(*c >= 3.0 - 1e-9);
        }
        let gaps: Vec<f64> = costs.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
        for g in gaps.windows(2) {
            assert!(g[1] <= g[0] + 1e-12, "gaps {gaps:?}");
        }
    }

    #[test]
    fn linf_feasibility_examples() {
        let p = fixtures::example1();
        assert!((linf_feasibility(&p, 5.0, 200).unwrap() - 0.6).abs() < 1e-3);
        assert!((linf_feasibility(&p, 3.0, 200).unwrap() - 1.0).abs() < 1e-3);
        let rest = Problem::new(
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            0.0,
            1.0,
            vec![2.0],
            vec![2.0],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        assert_eq!(linf_feasibility(&rest, 1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn linf_unreachable_direction_is_infinite() {
        // Second state has no input and must move: never reachable.
        let p = Problem::new(
            Matrix::zeros(2, 2),
            Matrix::column(&[1.0, 0.0]),
            0.0,
            1.0,
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        assert_eq!(linf_feasibility(&p, 1.0, 20).unwrap(), f64::INFINITY);
    }
}
