//! Trajectory propagation: exact zero-order-hold stepping for linear plants
//! and fixed-step RK4 for general dynamics.

use std::fmt::Write as _;
use std::path::Path;

use crate::control_law::{adjoint_unchecked, hamiltonian_value, linear_velocity, AdjointParams};
use crate::error::{Error, Result};
use crate::linalg::{discretize_zoh, norm2, Matrix};
use crate::model::{fmt_num, write_file, PiecewiseConstantControl, Problem, Trajectory, DEFAULT_ZERO_TOL};

/// Uniform samples added on top of the control breakpoints.
pub const DEFAULT_GRID: usize = 1000;

/// Right-hand side `φ(z, u)`.
pub type RhsFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
/// State Jacobian `∂φ/∂z (z, u)`.
pub type JacobianFn = dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync;

/// General dynamics `ż = φ(z, u)` supplied as callbacks.
///
/// Callbacks may be invoked from several threads at once.
pub struct NonlinearDynamics {
    state_dim: usize,
    input_dim: usize,
    rhs: Box<RhsFn>,
    jacobian: Option<Box<JacobianFn>>,
    affine_in_state: bool,
}

impl std::fmt::Debug for NonlinearDynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearDynamics")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("has_jacobian", &self.jacobian.is_some())
            .field("affine_in_state", &self.affine_in_state)
            .finish()
    }
}

impl NonlinearDynamics {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        rhs: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            state_dim,
            input_dim,
            rhs: Box::new(rhs),
            jacobian: None,
            affine_in_state: false,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }

    /// Declares `φ(·, u)` affine for every `u`, which enables the local
    /// optimality flag on certificates.
    pub fn affine_in_state(mut self, affine: bool) -> Self {
        self.affine_in_state = affine;
        self
    }

    /// Wraps the linear plant of a problem.
    pub fn from_problem(problem: &Problem) -> Self {
        let lin = problem.clone();
        let jac = problem.f().clone();
        Self::new(problem.state_dim(), problem.input_dim(), move |z, u| {
            linear_velocity(&lin, z, u)
        })
        .with_jacobian(move |_, _| jac.clone())
        .affine_in_state(true)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_affine_in_state(&self) -> bool {
        self.affine_in_state
    }

    pub fn eval(&self, z: &[f64], u: &[f64]) -> Vec<f64> {
        (self.rhs)(z, u)
    }

    /// Supplied Jacobian, or central differences with step `√ε (1 + ‖z‖)`.
    pub fn state_jacobian(&self, z: &[f64], u: &[f64]) -> Result<Matrix> {
        if let Some(j) = &self.jacobian {
            return Ok(j(z, u));
        }
        let d = self.state_dim;
        let h = f64::EPSILON.sqrt() * (1.0 + norm2(z));
        let mut jac = Matrix::zeros(d, d);
        let mut probe = z.to_vec();
        for j in 0..d {
            probe[j] = z[j] + h;
            let fp = self.eval(&probe, u);
            probe[j] = z[j] - h;
            let fm = self.eval(&probe, u);
            probe[j] = z[j];
            for i in 0..d {
                let v = (fp[i] - fm[i]) / (2.0 * h);
                if !v.is_finite() {
                    return Err(Error::Blowup { t: f64::NAN });
                }
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }
}

fn check_dims(problem: &Problem, u: &PiecewiseConstantControl) -> Result<()> {
    if u.input_dim() != problem.input_dim() {
        return Err(Error::Dimension(format!(
            "control has {} channels but the plant has {} inputs",
            u.input_dim(),
            problem.input_dim()
        )));
    }
    Ok(())
}

/// Uniform grid over the control's span merged with its breakpoints.
pub fn sample_grid(u: &PiecewiseConstantControl, samples: usize) -> Vec<f64> {
    let (a, b) = (u.start(), u.end());
    let n = samples.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .chain(u.breakpoints().iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    let eps = 1e-12 * (b - a);
    let bps = u.breakpoints();
    let mut out: Vec<f64> = Vec::with_capacity(grid.len());
    for t in grid {
        match out.last_mut() {
            Some(last) if t - *last <= eps => {
                // Keep the exact breakpoint when a uniform sample lands on it.
                if bps.contains(&t) {
                    *last = t;
                }
            }
            _ => out.push(t),
        }
    }
    out
}

/// States at every breakpoint, advanced segment by segment with exact ZOH steps.
fn breakpoint_states(problem: &Problem, u: &PiecewiseConstantControl) -> Result<Vec<Vec<f64>>> {
    let mut states = Vec::with_capacity(u.num_segments() + 1);
    let mut z = problem.initial().to_vec();
    states.push(z.clone());
    for (t0, t1, v) in u.segments() {
        z = zoh_step(problem, &z, v, t1 - t0)?;
        states.push(z.clone());
    }
    Ok(states)
}

fn zoh_step(problem: &Problem, z: &[f64], v: &[f64], dt: f64) -> Result<Vec<f64>> {
    if dt <= 0.0 {
        return Ok(z.to_vec());
    }
    let (ad, bd) = discretize_zoh(problem.f(), problem.g(), dt)?;
    let mut next = ad.mul_vec(z);
    for (n, x) in next.iter_mut().zip(bd.mul_vec(v)) {
        *n += x;
    }
    Ok(next)
}

/// Final state under `u`, without sampling the interior.
pub fn endpoint_exact(problem: &Problem, u: &PiecewiseConstantControl) -> Result<Vec<f64>> {
    check_dims(problem, u)?;
    Ok(breakpoint_states(problem, u)?
        .pop()
        .expect("at least the initial state"))
}

/// Exact propagation on the default grid.
pub fn propagate_exact(problem: &Problem, u: &PiecewiseConstantControl) -> Result<Trajectory> {
    propagate_exact_with(problem, u, DEFAULT_GRID)
}

/// Exact propagation of a linear plant sampled on `samples` uniform points plus all breakpoints.
pub fn propagate_exact_with(problem: &Problem, u: &PiecewiseConstantControl, samples: usize) -> Result<Trajectory> {
    check_dims(problem, u)?;
    let at_breaks = breakpoint_states(problem, u)?;
    let grid = sample_grid(u, samples);
    let mut states = Vec::with_capacity(grid.len());
    let mut controls = Vec::with_capacity(grid.len());
    for &t in &grid {
        let k = u.segment_index(t);
        let t0 = u.breakpoints()[k];
        let v = &u.values()[k];
        states.push(zoh_step(problem, &at_breaks[k], v, t - t0)?);
        controls.push(v.clone());
    }
    Ok(Trajectory { grid, states, controls })
}

fn rk4_step(dynamics: &NonlinearDynamics, z: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let shifted =
        |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { base.iter().zip(k).map(|(b, k)| b + c * k).collect() };
    let k1 = dynamics.eval(z, v);
    let k2 = dynamics.eval(&shifted(z, &k1, h / 2.0), v);
    let k3 = dynamics.eval(&shifted(z, &k2, h / 2.0), v);
    let k4 = dynamics.eval(&shifted(z, &k3, h), v);
    z.iter()
        .enumerate()
        .map(|(i, zi)| zi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Step grid with about `steps` uniform steps, every breakpoint landing on a node.
pub(crate) fn rk4_grid(u: &PiecewiseConstantControl, steps: usize) -> Vec<f64> {
    let total = u.end() - u.start();
    let mut grid = vec![u.start()];
    for (t0, t1, _) in u.segments() {
        let n = ((steps as f64 * (t1 - t0) / total).round() as usize).max(1);
        for k in 1..n {
            grid.push(t0 + (t1 - t0) * k as f64 / n as f64);
        }
        grid.push(t1);
    }
    grid
}

/// Classical fixed-step RK4 from `initial`; breakpoints of `u` are forced onto the step grid.
pub fn propagate_rk4(
    dynamics: &NonlinearDynamics,
    u: &PiecewiseConstantControl,
    initial: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    if steps < 10 {
        return Err(Error::validation("steps", "need at least 10 steps"));
    }
    if initial.len() != dynamics.state_dim || u.input_dim() != dynamics.input_dim {
        return Err(Error::Dimension(format!(
            "dynamics expect ({}, {}) but got state {} and control {}",
            dynamics.state_dim,
            dynamics.input_dim,
            initial.len(),
            u.input_dim()
        )));
    }
    let grid = rk4_grid(u, steps);
    let mut states = Vec::with_capacity(grid.len());
    let mut controls = Vec::with_capacity(grid.len());
    let mut z = initial.to_vec();
    for (k, &t) in grid.iter().enumerate() {
        let v = u.value_at(t).to_vec();
        if k > 0 {
            // The step [t_{k-1}, t_k) lies in one segment; use its value.
            let prev = grid[k - 1];
            z = rk4_step(dynamics, &z, u.value_at(prev), t - prev);
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::Blowup { t });
            }
        }
        states.push(z.clone());
        controls.push(v);
    }
    Ok(Trajectory { grid, states, controls })
}

/// `‖z(b) - target‖₂`.
pub fn endpoint_residual(traj: &Trajectory, target: &[f64]) -> f64 {
    norm2(&crate::linalg::sub(traj.final_state(), target))
}

/// Hamiltonian sampled along a trajectory, with breakpoint samples flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianProfile {
    pub values: Vec<f64>,
    pub at_breakpoint: Vec<bool>,
}

/// Marks grid samples within `window` of an interior breakpoint of `u`.
pub fn breakpoint_mask(grid: &[f64], u: &PiecewiseConstantControl, window: f64) -> Vec<bool> {
    let interior = &u.breakpoints()[1..u.breakpoints().len() - 1];
    grid.iter()
        .map(|&t| interior.iter().any(|&bp| (t - bp).abs() <= window))
        .collect()
}

/// Exclusion half-width around switching instants: `1e-6 (b - a)`.
pub fn breakpoint_window(u: &PiecewiseConstantControl) -> f64 {
    1e-6 * (u.end() - u.start())
}

/// `H^η(z(t), p(t), u(t))` on the trajectory grid of a linear plant.
pub fn hamiltonian_profile(
    problem: &Problem,
    ap: &AdjointParams,
    traj: &Trajectory,
    u: &PiecewiseConstantControl,
) -> Result<HamiltonianProfile> {
    if ap.p_hat().len() != problem.state_dim() {
        return Err(Error::Dimension("p_hat does not match the state dimension".into()));
    }
    let values = traj
        .grid
        .iter()
        .zip(traj.states.iter().zip(&traj.controls))
        .map(|(&t, (z, v))| {
            let p = adjoint_unchecked(problem, ap.p_hat(), t);
            hamiltonian_value(&p, &linear_velocity(problem, z, v), v, ap.eta(), DEFAULT_ZERO_TOL)
        })
        .collect();
    Ok(HamiltonianProfile {
        values,
        at_breakpoint: breakpoint_mask(&traj.grid, u, breakpoint_window(u)),
    })
}

/// Trajectory as CSV: `t,z_1..z_d,u_1..u_m` and, with an adjoint, `s_1..s_m,H`.
pub fn trajectory_csv(traj: &Trajectory, adjoint: Option<(&Problem, &AdjointParams)>) -> String {
    let d = traj.states.first().map_or(0, Vec::len);
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for i in 1..=d {
        let _ = write!(out, ",z_{i}");
    }
    for i in 1..=m {
        let _ = write!(out, ",u_{i}");
    }
    if adjoint.is_some() {
        for i in 1..=m {
            let _ = write!(out, ",s_{i}");
        }
        out.push_str(",H");
    }
    out.push('\n');
    for k in 0..traj.len() {
        let t = traj.grid[k];
        let _ = write!(out, "{}", fmt_num(t));
        for x in traj.states[k].iter().chain(&traj.controls[k]) {
            let _ = write!(out, ",{}", fmt_num(*x));
        }
        if let Some((problem, ap)) = adjoint {
            let p = adjoint_unchecked(problem, ap.p_hat(), t);
            for s in problem.g().tr_mul_vec(&p) {
                let _ = write!(out, ",{}", fmt_num(s));
            }
            let v = &traj.controls[k];
            let h = hamiltonian_value(
                &p,
                &linear_velocity(problem, &traj.states[k], v),
                v,
                ap.eta(),
                DEFAULT_ZERO_TOL,
            );
            let _ = write!(out, ",{}", fmt_num(h));
        }
        out.push('\n');
    }
    out
}

pub fn save_trajectory(
    traj: &Trajectory,
    adjoint: Option<(&Problem, &AdjointParams)>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_file(path.as_ref(), &trajectory_csv(traj, adjoint))
}
