//! Verification of a candidate extremal `(η, p̂, z, u)` against the
//! conditions of the nonsmooth maximum principle: adjoint equation,
//! pointwise Hamiltonian maximization, constancy of the Hamiltonian,
//! nontriviality and (vacuous, for fixed endpoints) transversality.

use serde::{Deserialize, Serialize};

use crate::control_law::{
    adjoint_unchecked, bang_off_bang, control_grid, hamiltonian_value, linear_velocity, AdjointParams, Eta,
    DEFAULT_TIE_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{mat_exp, norm2, norm_inf, Matrix};
use crate::model::{AdmissibleSet, PiecewiseConstantControl, Problem, Trajectory, DEFAULT_ZERO_TOL};
use crate::sim::{
    breakpoint_mask, breakpoint_window, endpoint_residual, hamiltonian_profile, propagate_exact_with, propagate_rk4,
    rk4_grid, HamiltonianProfile, NonlinearDynamics, DEFAULT_GRID,
};

/// Thresholds and sampling densities used by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub adjoint: f64,
    pub hmax: f64,
    pub constancy: f64,
    pub endpoint: f64,
    pub zero_tol: f64,
    pub tie_tol: f64,
    /// Uniform trajectory samples (breakpoints are added on top).
    pub samples: usize,
    /// Points per axis of the control grid searched for the Hamiltonian supremum.
    pub control_grid: usize,
    /// RK4 steps for general dynamics.
    pub rk4_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            adjoint: 1e-6,
            hmax: 1e-6,
            constancy: 1e-6,
            endpoint: 1e-6,
            zero_tol: DEFAULT_ZERO_TOL,
            tie_tol: DEFAULT_TIE_TOL,
            samples: DEFAULT_GRID,
            control_grid: 201,
            rk4_steps: 10_000,
        }
    }
}

/// Outcome of every check, serialized as the certificate JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub eta: Eta,
    pub p_hat: Vec<f64>,
    pub adjoint_residual: f64,
    pub hmax_violation: f64,
    pub constancy_spread: f64,
    pub endpoint_residual: f64,
    pub nontriviality: bool,
    pub transversality: bool,
    pub passed: bool,
    pub locally_optimal: bool,
}

impl CertificateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Step of the central difference used on the analytic adjoint.
const FD_STEP: f64 = 1e-5;

/// Largest defect of `ṗ = -Fᵀ p` along the grid, with `ṗ` from central differences.
pub fn check_adjoint(problem: &Problem, ap: &AdjointParams, traj: &Trajectory) -> Result<f64> {
    if ap.p_hat().len() != problem.state_dim() {
        return Err(Error::Dimension("p_hat does not match the state dimension".into()));
    }
    let ft = problem.f().transpose();
    let mut worst: f64 = 0.0;
    for &t in &traj.grid {
        let p = adjoint_unchecked(problem, ap.p_hat(), t);
        let ahead = mat_exp(&ft, problem.b() - t - FD_STEP)?.mul_vec(ap.p_hat());
        let behind = mat_exp(&ft, problem.b() - t + FD_STEP)?.mul_vec(ap.p_hat());
        let rhs = ft.mul_vec(&p);
        let defect: Vec<f64> = (0..p.len())
            .map(|i| (ahead[i] - behind[i]) / (2.0 * FD_STEP) + rhs[i])
            .collect();
        worst = worst.max(norm_inf(&defect));
    }
    Ok(worst)
}

/// Supremum of the Hamiltonian over `U` at one instant: the control grid plus analytic candidates.
fn hamiltonian_sup(
    velocity: impl Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
    eta: Eta,
    candidates: &[Vec<f64>],
    zero_tol: f64,
) -> f64 {
    candidates
        .iter()
        .map(|v| hamiltonian_value(p, &velocity(v), v, eta, zero_tol))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Control grid for the supremum search, or `None` when it would be too large.
fn search_grid(set: &AdmissibleSet, m: usize, grid_n: usize) -> Option<Vec<Vec<f64>>> {
    control_grid(set, m, grid_n).ok()
}

/// Largest shortfall `sup_v H(v) - H(u(t))` over samples away from switching instants.
pub fn check_hamiltonian_max(
    problem: &Problem,
    ap: &AdjointParams,
    traj: &Trajectory,
    u: &PiecewiseConstantControl,
    grid_n: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if grid_n < 101 {
        return Err(Error::validation(
            "grid_n",
            "control grid needs at least 101 points per axis",
        ));
    }
    let m = problem.input_dim();
    let grid = search_grid(problem.admissible(), m, grid_n).unwrap_or_default();
    let skip = breakpoint_mask(&traj.grid, u, breakpoint_window(u));
    let mut worst: f64 = 0.0;
    for (k, &t) in traj.grid.iter().enumerate() {
        if skip[k] {
            continue;
        }
        let z = &traj.states[k];
        let p = adjoint_unchecked(problem, ap.p_hat(), t);
        let s = problem.g().tr_mul_vec(&p);
        let mut cands = bang_off_bang(problem.admissible(), &s, ap.eta(), tol.tie_tol).representatives(m);
        cands.extend(grid.iter().cloned());
        let vel = |v: &[f64]| linear_velocity(problem, z, v);
        let sup = hamiltonian_sup(vel, &p, ap.eta(), &cands, tol.zero_tol);
        let v = &traj.controls[k];
        let achieved = hamiltonian_value(&p, &vel(v), v, ap.eta(), tol.zero_tol);
        worst = worst.max(sup - achieved);
    }
    Ok(worst)
}

/// `max - min` of the profile over samples not flagged as breakpoints.
pub fn check_constancy(profile: &HamiltonianProfile) -> f64 {
    let (lo, hi) = profile
        .values
        .iter()
        .zip(&profile.at_breakpoint)
        .filter(|(_, flagged)| !**flagged)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (h, _)| {
            (lo.min(*h), hi.max(*h))
        });
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

fn verdict(
    ap: &AdjointParams,
    adjoint_residual: f64,
    hmax_violation: f64,
    constancy_spread: f64,
    endpoint_residual: f64,
    nontriviality: bool,
    affine: bool,
    tol: &Tolerances,
) -> CertificateReport {
    let transversality = true;
    let passed = adjoint_residual <= tol.adjoint
        && hmax_violation <= tol.hmax
        && constancy_spread <= tol.constancy
        && endpoint_residual <= tol.endpoint
        && nontriviality
        && transversality;
    CertificateReport {
        eta: ap.eta(),
        p_hat: ap.p_hat().to_vec(),
        adjoint_residual,
        hmax_violation,
        constancy_spread,
        endpoint_residual,
        nontriviality,
        transversality,
        passed,
        locally_optimal: passed && ap.eta() == Eta::Normal && affine,
    }
}

/// Runs every check on a linear plant. Failed checks are reported, not raised.
pub fn certify(
    problem: &Problem,
    ap: &AdjointParams,
    u: &PiecewiseConstantControl,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    if ap.p_hat().len() != problem.state_dim() {
        return Err(Error::Dimension(format!(
            "p_hat has {} entries but the state has {}",
            ap.p_hat().len(),
            problem.state_dim()
        )));
    }
    u.check_against(problem, 1e-9)?;
    let traj = propagate_exact_with(problem, u, tol.samples)?;
    let adjoint_residual = check_adjoint(problem, ap, &traj)?;
    let hmax_violation = check_hamiltonian_max(problem, ap, &traj, u, tol.control_grid, tol)?;
    let constancy_spread = check_constancy(&hamiltonian_profile(problem, ap, &traj, u)?);
    // e^{(b-t)Fᵀ} is invertible, so p(t) vanishes only when p̂ does.
    let min_adjoint = traj
        .grid
        .iter()
        .map(|&t| norm2(&adjoint_unchecked(problem, ap.p_hat(), t)))
        .fold(f64::INFINITY, f64::min);
    let nontriviality = ap.eta() == Eta::Normal || min_adjoint > 0.0;
    Ok(verdict(
        ap,
        adjoint_residual,
        hmax_violation,
        constancy_spread,
        endpoint_residual(&traj, problem.target()),
        nontriviality,
        true,
        tol,
    ))
}

/// Fixed-endpoint problem with general dynamics, for certification only.
#[derive(Debug)]
pub struct NonlinearProblem {
    pub dynamics: NonlinearDynamics,
    pub a: f64,
    pub b: f64,
    pub initial: Vec<f64>,
    pub target: Vec<f64>,
    pub admissible: AdmissibleSet,
}

/// Adjoint integrated backward from `p̂` with RK4 on the state trajectory's step grid.
fn backward_adjoint(
    np: &NonlinearProblem,
    traj: &Trajectory,
    u: &PiecewiseConstantControl,
    p_hat: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = traj.len();
    let mut out = vec![Vec::new(); n];
    out[n - 1] = p_hat.to_vec();
    let rhs = |z: &[f64], v: &[f64], p: &[f64]| -> Result<Vec<f64>> {
        let j = np.dynamics.state_jacobian(z, v)?;
        Ok(j.tr_mul_vec(p).into_iter().map(|x| -x).collect())
    };
    for k in (0..n - 1).rev() {
        let (t0, t1) = (traj.grid[k], traj.grid[k + 1]);
        let h = t1 - t0;
        let v = u.value_at(t0);
        let z0 = &traj.states[k];
        let z1 = &traj.states[k + 1];
        // Midpoint state from a half RK4 step forward.
        let half = PiecewiseConstantControl::constant(0.0, h / 2.0, v.to_vec())?;
        let zm = crate::sim::propagate_rk4(&np.dynamics, &half, z0, 10)?
            .final_state()
            .to_vec();
        let p1 = &out[k + 1];
        let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
        // Integrate in reversed time s = t1 - t: dp/ds = Jᵀ p.
        let k1 = rhs(z1, v, p1)?;
        let k2 = rhs(&zm, v, &add(p1, &k1, -h / 2.0))?;
        let k3 = rhs(&zm, v, &add(p1, &k2, -h / 2.0))?;
        let k4 = rhs(z0, v, &add(p1, &k3, -h))?;
        let p0: Vec<f64> = (0..p1.len())
            .map(|i| p1[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if p0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Blowup { t: t0 });
        }
        out[k] = p0;
    }
    Ok(out)
}

/// Certifies a candidate for general dynamics `ż = φ(z, u)`.
///
/// The adjoint is integrated backward from `p̂`; its residual is the defect
/// of `ṗ = -(∂φ/∂z)ᵀ p` measured by second-order differences on the step grid.
pub fn certify_nonlinear(
    np: &NonlinearProblem,
    ap: &AdjointParams,
    u: &PiecewiseConstantControl,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    let (d, m) = (np.dynamics.state_dim(), np.dynamics.input_dim());
    if ap.p_hat().len() != d || u.input_dim() != m || np.initial.len() != d || np.target.len() != d {
        return Err(Error::Dimension(
            "certificate, control and dynamics dimensions disagree".into(),
        ));
    }
    let traj = propagate_rk4(&np.dynamics, u, &np.initial, tol.rk4_steps)?;
    debug_assert_eq!(traj.grid, rk4_grid(u, tol.rk4_steps));
    let adjoint = backward_adjoint(np, &traj, u, ap.p_hat())?;
    let bp = u.breakpoints();
    let at_break: Vec<bool> = traj.grid.iter().map(|t| bp.contains(t)).collect();

    let mut adjoint_residual: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        if at_break[k] {
            continue;
        }
        let (h1, h2) = (traj.grid[k] - traj.grid[k - 1], traj.grid[k + 1] - traj.grid[k]);
        let jac: Matrix = np.dynamics.state_jacobian(&traj.states[k], &traj.controls[k])?;
        let rhs = jac.tr_mul_vec(&adjoint[k]);
        for i in 0..d {
            let deriv =
                (h1 * h1 * adjoint[k + 1][i] - h2 * h2 * adjoint[k - 1][i] - (h1 * h1 - h2 * h2) * adjoint[k][i])
                    / (h1 * h2 * (h1 + h2));
            adjoint_residual = adjoint_residual.max((deriv + rhs[i]).abs());
        }
    }

    let grid = control_grid(&np.admissible, m, tol.control_grid)?;
    let window = breakpoint_window(u);
    let skip = breakpoint_mask(&traj.grid, u, window);
    let mut hmax_violation: f64 = 0.0;
    let mut profile = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let z = &traj.states[k];
        let v = &traj.controls[k];
        let p = &adjoint[k];
        let vel = |w: &[f64]| np.dynamics.eval(z, w);
        let achieved = hamiltonian_value(p, &vel(v), v, ap.eta(), tol.zero_tol);
        profile.push(achieved);
        if skip[k] {
            continue;
        }
        let sup = hamiltonian_sup(vel, p, ap.eta(), &grid, tol.zero_tol);
        hmax_violation = hmax_violation.max(sup - achieved);
    }
    let constancy_spread = check_constancy(&HamiltonianProfile {
        values: profile,
        at_breakpoint: skip,
    });
    let nontriviality = ap.eta() == Eta::Normal || adjoint.iter().all(|p| norm2(p) > 0.0);
    let endpoint = norm2(&crate::linalg::sub(traj.final_state(), &np.target));
    Ok(verdict(
        ap,
        adjoint_residual,
        hmax_violation,
        constancy_spread,
        endpoint,
        nontriviality,
        np.dynamics.is_affine_in_state(),
        tol,
    ))
}
