//! Browser bindings: double-integrator switching profiles, L0 against L1
//! solves, and the singularity test. Every entry point returns JSON.

use handsoff::control_law::{bang_off_bang, switching_function};
use handsoff::fixtures::double_integrator;
use handsoff::lp::{l1_solve, l1_solve_floored, singularity_check};
use handsoff::model::{l0_cost, DEFAULT_ZERO_TOL};
use handsoff::sim::{endpoint_residual, propagate_exact_with};
use handsoff::{synth_l0, AdjointParams, Eta, PiecewiseConstantControl, Problem, SynthOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const PLOT_SAMPLES: usize = 300;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "ok": false, "error": msg.to_string() }).to_string()
}

fn trajectory(problem: &Problem, u: &PiecewiseConstantControl) -> handsoff::Result<Value> {
    let traj = propagate_exact_with(problem, u, PLOT_SAMPLES)?;
    Ok(json!({
        "t": traj.grid,
        "z1": traj.states.iter().map(|z| z[0]).collect::<Vec<_>>(),
        "z2": traj.states.iter().map(|z| z[1]).collect::<Vec<_>>(),
        "residual": endpoint_residual(&traj, problem.target()),
    }))
}

fn control(u: &PiecewiseConstantControl) -> Value {
    json!({
        "breakpoints": u.breakpoints(),
        "values": u.values().iter().map(|v| v[0]).collect::<Vec<_>>(),
    })
}

/// Switching function `s(t) = p̂₂ + (T - t) p̂₁` and the bang-off-bang pick on `[0, T]`.
///
/// `u` is the maximizer of the Hamiltonian; on ties it reports the zero member
/// (`η = 1`) or `null` when the whole interval maximizes (`η = 0`, `s = 0`).
#[wasm_bindgen]
pub fn switching_profile(p1: f64, p2: f64, eta: u8, horizon: f64, samples: usize) -> String {
    let problem = match double_integrator(0.0, 0.0, horizon) {
        Ok(p) => p,
        Err(e) => return error(e),
    };
    let ap = AdjointParams::new(if eta == 0 { Eta::Abnormal } else { Eta::Normal }, vec![p1, p2]);
    let n = samples.clamp(2, 10_000);
    let mut ts = Vec::with_capacity(n);
    let mut ss = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    let mut ties = Vec::with_capacity(n);
    for k in 0..n {
        let t = horizon * k as f64 / (n - 1) as f64;
        let s = match switching_function(&problem, &ap, t) {
            Ok(s) => s,
            Err(e) => return error(e),
        };
        let cands = bang_off_bang(problem.admissible(), &s, ap.eta(), 1e-9);
        let reps = cands.representatives(1);
        let tie = reps.len() > 1;
        let pick = if cands.zero {
            Some(0.0)
        } else if reps.len() == 1 {
            Some(reps[0][0])
        } else {
            None
        };
        ts.push(t);
        ss.push(s[0]);
        us.push(pick);
        ties.push(tie);
    }
    json!({ "ok": true, "t": ts, "s": ss, "u": us, "tie": ties }).to_string()
}

/// Sparsest control and L1-optimal control for the double integrator from `(ξ1, ξ2)` to rest.
#[wasm_bindgen]
pub fn solve(xi1: f64, xi2: f64, horizon: f64, intervals: usize) -> String {
    match solve_inner(xi1, xi2, horizon, intervals.clamp(2, 4000)) {
        Ok(v) => v.to_string(),
        Err(e) => error(e),
    }
}

fn solve_inner(xi1: f64, xi2: f64, horizon: f64, intervals: usize) -> handsoff::Result<Value> {
    let problem = double_integrator(xi1, xi2, horizon)?;
    let l0 = synth_l0(&problem, &SynthOptions::default())?;
    let (l1, l1_cost) = l1_solve(&problem, intervals)?;
    let l1_support = l0_cost(&l1, DEFAULT_ZERO_TOL);
    let witness = [0.05, -0.05]
        .into_iter()
        .filter_map(|floor| l1_solve_floored(&problem, intervals, floor).ok())
        .find(|(_, c)| *c <= l1_cost + 1e-6)
        .map(|(w, c)| json!({ "cost": c, "support": l0_cost(&w, DEFAULT_ZERO_TOL), "control": control(&w) }));
    Ok(json!({
        "ok": true,
        "l0": {
            "support": l0.support,
            "structure": l0.structure.to_string(),
            "control": control(&l0.control),
            "trajectory": trajectory(&problem, &l0.control)?,
            "certified": l0.certified,
            "locally_optimal": l0.locally_optimal,
            "eta": l0.certificate.as_ref().map(|c| c.eta().value()),
            "p_hat": l0.certificate.as_ref().map(|c| c.p_hat().to_vec()),
        },
        "l1": {
            "cost": l1_cost,
            "support": l1_support,
            "control": control(&l1),
            "trajectory": trajectory(&problem, &l1)?,
        },
        "witness": witness,
    }))
}

/// The three singularity inequalities and their conjunction.
#[wasm_bindgen]
pub fn singularity(xi1: f64, xi2: f64, horizon: f64) -> String {
    let v = singularity_check(xi1, xi2, horizon);
    json!({
        "ok": true,
        "above_parabola": v.above_parabola,
        "negative_velocity": v.negative_velocity,
        "horizon_short": v.horizon_short,
        "horizon_bound": v.horizon_bound,
        "singular": v.singular,
    })
    .to_string()
}
