//! L0 synthesis for linear plants: sparsest-first search over bang-off-bang
//! structures, duration fitting for each structure, and recovery of a
//! maximum-principle multiplier for the winner.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{certify, CertificateReport, Tolerances};
use crate::control_law::{AdjointParams, Eta};
use crate::error::{Error, Result};
use crate::linalg::{discretize_zoh, dot, mat_exp, norm2, solve_linear, Matrix};
use crate::lp::linf_feasibility;
use crate::model::{l0_cost, AdmissibleSet, PiecewiseConstantControl, Problem};
use crate::nelder_mead::{minimize, NelderMeadOptions};
use crate::sim::{breakpoint_window, endpoint_exact};

/// Upper bound on the number of enumerated structures.
pub const MAX_STRUCTURES: usize = 1_000_000;

/// One segment label of a structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    /// Per channel: `-1` lower bound, `0` zero, `1` upper bound.
    Box(Vec<i8>),
    Off,
    /// On the sphere of a ball, direction chosen by the optimizer.
    On,
}

impl Label {
    pub fn is_on(&self) -> bool {
        match self {
            Label::Box(c) => c.iter().any(|&x| x != 0),
            Label::Off => false,
            Label::On => true,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Box(c) => {
                let s: String = c
                    .iter()
                    .map(|&x| match x {
                        -1 => '-',
                        1 => '+',
                        _ => '0',
                    })
                    .collect();
                f.write_str(&s)
            }
            Label::Off => f.write_str("off"),
            Label::On => f.write_str("on"),
        }
    }
}

/// Sequence of segment labels with no two neighbours equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Structure {
    pub labels: Vec<Label>,
}

impl Structure {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn on_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_on()).count()
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Box bounds, with a one-dimensional ball treated as the interval `[-r, r]`.
fn box_bounds(set: &AdmissibleSet, m: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    match set {
        AdmissibleSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
        AdmissibleSet::Ball { radius } if m == 1 => Some((vec![-radius], vec![*radius])),
        AdmissibleSet::Ball { .. } => None,
    }
}

/// All label sequences of length `1..=k_max` without consecutive repeats,
/// ordered by number of nonzero segments, then length, then lexicographically
/// (zero before lower before upper, first channel most significant).
pub fn enumerate_structures(m: usize, set: &AdmissibleSet, k_max: usize) -> Result<Vec<Structure>> {
    if k_max == 0 {
        return Err(Error::validation("K_max", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::validation("m", "need at least one input"));
    }
    let alphabet: Vec<Label> = if box_bounds(set, m).is_some() {
        if m as f64 * 3f64.ln() > (MAX_STRUCTURES as f64).ln() {
            return Err(Error::validation("K_max", "too many structures to enumerate"));
        }
        let count = 3usize.pow(m as u32);
        (0..count)
            .map(|mut idx| {
                let mut c = vec![0i8; m];
                for ch in (0..m).rev() {
                    c[ch] = [0, -1, 1][idx % 3];
                    idx /= 3;
                }
                Label::Box(c)
            })
            .collect()
    } else {
        if m > 3 {
            return Err(Error::Unsupported("ball structures need m ≤ 3".into()));
        }
        vec![Label::Off, Label::On]
    };
    let n = alphabet.len() as f64;
    let total: f64 = (1..=k_max).map(|k| n * (n - 1.0).powi(k as i32 - 1)).sum();
    if total > MAX_STRUCTURES as f64 {
        return Err(Error::validation(
            "K_max",
            format!("{total:.0} structures exceed the limit of {MAX_STRUCTURES}"),
        ));
    }
    let mut out = Vec::with_capacity(total as usize);
    fn extend(prefix: &mut Vec<usize>, k: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for a in 0..n {
            if prefix.last() != Some(&a) {
                prefix.push(a);
                extend(prefix, k, n, out);
                prefix.pop();
            }
        }
    }
    for k in 1..=k_max {
        let mut seqs = Vec::new();
        extend(&mut Vec::new(), k, alphabet.len(), &mut seqs);
        out.extend(seqs.into_iter().map(|s| Structure {
            labels: s.into_iter().map(|i| alphabet[i].clone()).collect(),
        }));
    }
    out.sort_by_key(|s| (s.on_count(), s.len()));
    Ok(out)
}

/// Smallest horizon length (within `tol`) at which the target is reachable,
/// by bisection on the discretized L∞ feasibility test. `+∞` when even the
/// full horizon is too short.
pub fn min_time(problem: &Problem, tol: f64, intervals: usize) -> Result<f64> {
    min_time_within(problem, tol, intervals, problem.horizon())
}

/// As [`min_time`], searching horizon lengths in `(0, t_max]`.
pub fn min_time_within(problem: &Problem, tol: f64, intervals: usize, t_max: f64) -> Result<f64> {
    if !(tol > 0.0) || !(t_max > 0.0) {
        return Err(Error::validation("tol", "tolerance and search range must be positive"));
    }
    if problem.initial() == problem.target() {
        return Ok(0.0);
    }
    let feasible = |t: f64| -> Result<bool> { Ok(linf_feasibility(problem, t, intervals)? <= 1.0 + 1e-9) };
    let mut hi = t_max;
    if !feasible(hi)? {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Options of the structure search.
#[derive(Clone, Debug)]
pub struct SynthOptions {
    /// Longest structure tried; `None` means `2d + 1`.
    pub k_max: Option<usize>,
    pub feas_tol: f64,
    /// Multi-start count of the duration fit.
    pub starts: usize,
    pub seed: u64,
    /// Discretization and tolerance of the minimum-time pre-check.
    pub min_time_intervals: usize,
    pub min_time_tol: f64,
    /// Keep searching levels with more nonzero segments after a feasible one.
    pub exhaustive: bool,
    /// Multi-start count of the multiplier recovery.
    pub recover_starts: usize,
    pub tolerances: Tolerances,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            k_max: None,
            feas_tol: 1e-6,
            starts: 20,
            seed: 42,
            min_time_intervals: 400,
            min_time_tol: 1e-4,
            exhaustive: false,
            recover_starts: 50,
            tolerances: Tolerances::default(),
        }
    }
}

impl SynthOptions {
    /// Applies `HANDSOFF_SEED` when it holds an integer.
    pub fn with_env_seed(mut self) -> Self {
        if let Some(seed) = std::env::var("HANDSOFF_SEED").ok().and_then(|s| s.trim().parse().ok()) {
            self.seed = seed;
        }
        self
    }
}

/// Fitted durations (and directions, for balls) of one structure.
#[derive(Clone, Debug, PartialEq)]
pub struct DurationFit {
    pub durations: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub residual: f64,
    pub support: f64,
}

impl DurationFit {
    pub fn control(&self, a: f64) -> Result<PiecewiseConstantControl> {
        let pieces: Vec<(f64, Vec<f64>)> = self
            .durations
            .iter()
            .cloned()
            .zip(self.values.iter().cloned())
            .collect();
        PiecewiseConstantControl::from_durations(a, &pieces)
    }
}

/// Decodes optimizer parameters: `K-1` breakpoints (clamped and sorted) then ball angles.
struct Layout<'a> {
    problem: &'a Problem,
    st: &'a Structure,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    radius: f64,
}

impl<'a> Layout<'a> {
    fn new(problem: &'a Problem, st: &'a Structure) -> Self {
        let m = problem.input_dim();
        let radius = match problem.admissible() {
            AdmissibleSet::Ball { radius } => *radius,
            _ => 0.0,
        };
        Self {
            problem,
            st,
            bounds: box_bounds(problem.admissible(), m),
            radius,
        }
    }

    fn num_breaks(&self) -> usize {
        self.st.len() - 1
    }

    fn angles_per_on(&self) -> usize {
        if self.bounds.is_some() {
            0
        } else {
            self.problem.input_dim() - 1
        }
    }

    fn num_params(&self) -> usize {
        self.num_breaks() + self.angles_per_on() * self.st.labels.iter().filter(|l| **l == Label::On).count()
    }

    fn project(&self, x: &mut [f64]) {
        let (a, b) = (self.problem.a(), self.problem.b());
        let nb = self.num_breaks();
        for t in &mut x[..nb] {
            *t = if t.is_finite() { t.clamp(a, b) } else { a };
        }
        x[..nb].sort_by(f64::total_cmp);
    }

    fn direction(&self, angles: &[f64]) -> Vec<f64> {
        let r = self.radius;
        match angles {
            [] => vec![r],
            [th] => vec![r * th.cos(), r * th.sin()],
            [th, ph] => vec![r * ph.sin() * th.cos(), r * ph.sin() * th.sin(), r * ph.cos()],
            _ => unreachable!("balls are limited to three inputs"),
        }
    }

    fn decode(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut x = x.to_vec();
        self.project(&mut x);
        let nb = self.num_breaks();
        let mut times = vec![self.problem.a()];
        times.extend_from_slice(&x[..nb]);
        times.push(self.problem.b());
        let durations = times.windows(2).map(|w| w[1] - w[0]).collect();
        let m = self.problem.input_dim();
        let per = self.angles_per_on();
        let mut next = nb;
        let values = self
            .st
            .labels
            .iter()
            .map(|label| match label {
                Label::Box(c) => {
                    let (lo, hi) = self.bounds.as_ref().expect("box labels come with box bounds");
                    (0..m)
                        .map(|i| match c[i] {
                            -1 => lo[i],
                            1 => hi[i],
                            _ => 0.0,
                        })
                        .collect()
                }
                Label::Off => vec![0.0; m],
                Label::On => {
                    let v = self.direction(&x[next..next + per]);
                    next += per;
                    v
                }
            })
            .collect();
        (durations, values)
    }

    fn endpoint_error(&self, x: &[f64]) -> Vec<f64> {
        let (durations, values) = self.decode(x);
        endpoint_of(self.problem, &durations, &values)
            .map(|z| crate::linalg::sub(&z, self.problem.target()))
            .unwrap_or_else(|_| vec![f64::INFINITY; self.problem.state_dim()])
    }

    fn residual(&self, x: &[f64]) -> f64 {
        norm2(&self.endpoint_error(x))
    }

    fn support(&self, x: &[f64]) -> f64 {
        let (durations, _) = self.decode(x);
        durations
            .iter()
            .zip(&self.st.labels)
            .filter(|(_, l)| l.is_on())
            .map(|(d, _)| d)
            .sum()
    }

    /// Damped Gauss–Newton on the endpoint error with a forward-difference Jacobian.
    fn polish(&self, x: &mut Vec<f64>) {
        let n = x.len();
        let d = self.problem.state_dim();
        if n == 0 {
            return;
        }
        let h = 1e-7 * self.problem.horizon().max(1.0);
        let mut err = self.endpoint_error(x);
        let mut res = norm2(&err);
        let mut lambda = 1e-10;
        for _ in 0..40 {
            if res < 1e-14 || !res.is_finite() {
                break;
            }
            let mut jac = Matrix::zeros(d, n);
            for j in 0..n {
                let mut xp = x.clone();
                xp[j] += h;
                let ep = self.endpoint_error(&xp);
                for i in 0..d {
                    jac[(i, j)] = (ep[i] - err[i]) / h;
                }
            }
            let step = if n >= d {
                let mut jjt = jac.matmul(&jac.transpose());
                for i in 0..d {
                    jjt[(i, i)] += lambda;
                }
                solve_linear(&jjt, &err).map(|y| jac.tr_mul_vec(&y))
            } else {
                let mut jtj = jac.transpose().matmul(&jac);
                for i in 0..n {
                    jtj[(i, i)] += lambda;
                }
                solve_linear(&jtj, &jac.tr_mul_vec(&err))
            };
            let Ok(step) = step else {
                lambda *= 100.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - s).collect();
            self.project(&mut trial);
            let trial_err = self.endpoint_error(&trial);
            let trial_res = norm2(&trial_err);
            if trial_res < res {
                *x = trial;
                err = trial_err;
                res = trial_res;
                lambda = (lambda / 10.0).max(1e-14);
            } else {
                lambda *= 10.0;
                if lambda > 1e6 {
                    break;
                }
            }
        }
    }
}

/// Endpoint reached by consecutive constant pieces, one exact step per piece.
fn endpoint_of(problem: &Problem, durations: &[f64], values: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut z = problem.initial().to_vec();
    for (&dur, v) in durations.iter().zip(values) {
        if dur <= 0.0 {
            continue;
        }
        if v.iter().all(|&x| x == 0.0) {
            z = mat_exp(problem.f(), dur)?.mul_vec(&z);
        } else {
            let (ad, bd) = discretize_zoh(problem.f(), problem.g(), dur)?;
            let mut next = ad.mul_vec(&z);
            for (n, w) in next.iter_mut().zip(bd.mul_vec(v)) {
                *n += w;
            }
            z = next;
        }
    }
    Ok(z)
}

/// Durations of `k` segments drawn uniformly from the simplex of total `total`.
fn dirichlet(rng: &mut ChaCha8Rng, k: usize, total: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = draws.iter().sum();
    draws.iter().map(|x| total * x / sum).collect()
}

/// Fits the durations of `st` so the endpoint constraint holds, from `init`
/// and `opts.starts - 1` random splits. Among fits within `opts.feas_tol`,
/// the one with the smallest support wins; otherwise the smallest residual.
pub fn solve_durations(problem: &Problem, st: &Structure, init: &[f64], opts: &SynthOptions) -> Result<DurationFit> {
    solve_durations_seeded(problem, st, init, opts, opts.seed)
}

fn solve_durations_seeded(
    problem: &Problem,
    st: &Structure,
    init: &[f64],
    opts: &SynthOptions,
    seed: u64,
) -> Result<DurationFit> {
    if st.is_empty() {
        return Err(Error::validation("structure", "needs at least one segment"));
    }
    if init.len() != st.len() || init.iter().any(|&d| d < 0.0) {
        return Err(Error::validation("init", "needs one nonnegative duration per segment"));
    }
    let layout = Layout::new(problem, st);
    let total = problem.horizon();
    let nb = layout.num_breaks();
    let n = layout.num_params();
    let free = n > problem.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let to_params = |durations: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        let scale = total / durations.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let mut x = Vec::with_capacity(n);
        let mut t = problem.a();
        for d in &durations[..nb] {
            t += d * scale;
            x.push(t);
        }
        while x.len() < n {
            x.push(rng.gen_range(0.0..std::f64::consts::TAU));
        }
        x
    };

    let nm = NelderMeadOptions {
        initial_step: 0.1 * total,
        f_tol: 1e-15,
        x_tol: 1e-12 * total.max(1.0),
        max_evals: 1000 + 400 * n,
    };
    let mut best: Option<(bool, f64, f64, Vec<f64>)> = None;
    let better = |cand: &(bool, f64, f64, Vec<f64>), cur: &Option<(bool, f64, f64, Vec<f64>)>| -> bool {
        let Some(cur) = cur else { return true };
        match (cand.0, cur.0) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => cand.2 < cur.2 - 1e-9 || ((cand.2 - cur.2).abs() <= 1e-9 && cand.3.first() < cur.3.first()),
            (false, false) => cand.1 < cur.1,
        }
    };

    for start in 0..opts.starts.max(1) {
        let durations = if start == 0 {
            init.to_vec()
        } else {
            dirichlet(&mut rng, st.len(), total)
        };
        let mut x = to_params(&durations, &mut rng);
        layout.project(&mut x);
        if n > 0 {
            x = minimize(|p| layout.residual(p), &x, &nm).x;
            layout.project(&mut x);
            layout.polish(&mut x);
        }
        let mut res = layout.residual(&x);
        let mut feasible = res <= opts.feas_tol;
        if feasible && free {
            // Exact penalty: trade support against endpoint error, then restore feasibility.
            let mut y = minimize(|p| layout.support(p) + 100.0 * layout.residual(p), &x, &nm).x;
            layout.project(&mut y);
            layout.polish(&mut y);
            let ry = layout.residual(&y);
            if ry <= opts.feas_tol && layout.support(&y) < layout.support(&x) {
                x = y;
                res = ry;
            }
        }
        feasible = res <= opts.feas_tol;
        let cand = (feasible, res, layout.support(&x), x);
        if better(&cand, &best) {
            best = Some(cand);
        }
        if feasible && !free {
            break;
        }
    }
    let (_, _, _, x) = best.expect("at least one start");
    let (mut durations, values) = layout.decode(&x);
    for d in &mut durations {
        if *d < 1e-10 * total {
            *d = 0.0;
        }
    }
    let leftover = total - durations.iter().sum::<f64>();
    if let Some(last) = durations.iter_mut().rev().find(|d| **d > 0.0) {
        *last += leftover;
    }
    let residual = norm2(&crate::linalg::sub(
        &endpoint_of(problem, &durations, &values)?,
        problem.target(),
    ));
    let support = durations
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.iter().any(|&x| x != 0.0))
        .map(|(d, _)| d)
        .sum();
    Ok(DurationFit {
        durations,
        values,
        residual,
        support,
    })
}

/// One structure's outcome in the search log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub structure: String,
    pub residual: f64,
    pub support: f64,
    pub feasible: bool,
}

/// Outcome of the L0 synthesis.
#[derive(Clone, Debug)]
pub struct SynthResult {
    pub control: PiecewiseConstantControl,
    pub structure: Structure,
    pub support: f64,
    pub endpoint_residual: f64,
    pub min_time: f64,
    pub certificate: Option<AdjointParams>,
    pub report: Option<CertificateReport>,
    pub certified: bool,
    pub locally_optimal: bool,
    pub search_log: Vec<SearchEntry>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    support: f64,
    eta: Option<Eta>,
    p_hat: Option<&'a [f64]>,
    certified: bool,
    locally_optimal: bool,
}

impl SynthResult {
    /// JSON sidecar `{support, eta, p_hat, certified, locally_optimal}`.
    pub fn sidecar_json(&self) -> String {
        let s = Sidecar {
            support: self.support,
            eta: self.certificate.as_ref().map(|c| c.eta()),
            p_hat: self.certificate.as_ref().map(|c| c.p_hat()),
            certified: self.certified,
            locally_optimal: self.locally_optimal,
        };
        serde_json::to_string_pretty(&s).expect("sidecar serializes")
    }
}

fn map_structures<T: Send>(items: &[(usize, Structure)], f: impl Fn(usize, &Structure) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(|(i, s)| f(*i, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(|(i, s)| f(*i, s)).collect()
    }
}

/// Sparsest control found by the structure search, with its certificate when one is recovered.
///
/// Structures are processed in levels of equal nonzero-segment count; the
/// search stops after the first level containing a feasible fit unless
/// `opts.exhaustive` is set.
pub fn synth_l0(problem: &Problem, opts: &SynthOptions) -> Result<SynthResult> {
    let d = problem.state_dim();
    let m = problem.input_dim();
    let k_max = opts.k_max.unwrap_or(2 * d + 1);
    if !(opts.feas_tol > 0.0) {
        return Err(Error::validation("feas_tol", "must be positive"));
    }
    let tmin = if box_bounds(problem.admissible(), m).is_some() {
        min_time(problem, opts.min_time_tol, opts.min_time_intervals)?
    } else {
        f64::NAN
    };
    if tmin > problem.horizon() {
        // Report how long the transfer actually takes when a modestly longer horizon suffices.
        let beyond = min_time_within(
            problem,
            opts.min_time_tol,
            opts.min_time_intervals,
            16.0 * problem.horizon(),
        )?;
        return Err(Error::Infeasible {
            min_time: beyond,
            horizon: problem.horizon(),
        });
    }
    let structures = enumerate_structures(m, problem.admissible(), k_max)?;
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, DurationFit)> = None;
    let mut idx = 0;
    while idx < structures.len() {
        let level = structures[idx].on_count();
        let end = structures[idx..]
            .iter()
            .position(|s| s.on_count() != level)
            .map_or(structures.len(), |p| idx + p);
        let batch: Vec<(usize, Structure)> = (idx..end).map(|i| (i, structures[i].clone())).collect();
        let fits = map_structures(&batch, |i, st| {
            let init = vec![problem.horizon() / st.len() as f64; st.len()];
            solve_durations_seeded(problem, st, &init, opts, opts.seed.wrapping_add(i as u64))
        });
        for ((i, st), fit) in batch.iter().zip(fits) {
            let fit = fit?;
            let feasible = fit.residual <= opts.feas_tol;
            log.push(SearchEntry {
                structure: st.to_string(),
                residual: fit.residual,
                support: fit.support,
                feasible,
            });
            if !feasible {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((s, _, _)) => fit.support < s - 1e-7,
            };
            if replace {
                best = Some((fit.support, *i, fit));
            }
        }
        idx = end;
        if best.is_some() && !opts.exhaustive {
            break;
        }
    }
    let Some((_, i, fit)) = best else {
        return Err(Error::NoFeasibleStructure { k_max });
    };
    let control = fit.control(problem.a())?;
    control.check_against(problem, 1e-9)?;
    let endpoint = endpoint_exact(problem, &control)?;
    let endpoint_residual = norm2(&crate::linalg::sub(&endpoint, problem.target()));
    let recovered = recover_with_report(
        problem,
        &control,
        &RecoverOptions {
            starts: opts.recover_starts,
            seed: opts.seed,
            tolerances: opts.tolerances,
            ..RecoverOptions::default()
        },
    )?;
    let (certificate, report) = match recovered {
        Some((ap, rep)) => (Some(ap), Some(rep)),
        None => (None, None),
    };
    let certified = report.as_ref().is_some_and(|r| r.passed);
    let locally_optimal = report.as_ref().is_some_and(|r| r.locally_optimal);
    Ok(SynthResult {
        support: l0_cost(&control, opts.tolerances.zero_tol),
        control,
        structure: structures[i].clone(),
        endpoint_residual,
        min_time: tmin,
        certificate,
        report,
        certified,
        locally_optimal,
        search_log: log,
    })
}

/// Options of the multiplier recovery.
#[derive(Clone, Debug)]
pub struct RecoverOptions {
    pub starts: usize,
    pub seed: u64,
    /// Uniform midpoint samples of the consistency loss.
    pub samples: usize,
    /// Largest accepted loss before certification.
    pub loss_tol: f64,
    pub tolerances: Tolerances,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        Self {
            starts: 50,
            seed: 42,
            samples: 400,
            loss_tol: 1e-6,
            tolerances: Tolerances::default(),
        }
    }
}

/// Per-sample data of the consistency loss: input map `e^{(b-t)F} G` and control value.
struct LossSample {
    map: Matrix,
    value: Vec<f64>,
}

fn loss_samples(problem: &Problem, u: &PiecewiseConstantControl, samples: usize) -> Result<Vec<LossSample>> {
    let (a, b) = (problem.a(), problem.b());
    let window = breakpoint_window(u);
    let mut times: Vec<f64> = (0..samples)
        .map(|j| a + (j as f64 + 0.5) * (b - a) / samples as f64)
        .collect();
    times.extend(u.segments().map(|(t0, t1, _)| 0.5 * (t0 + t1)));
    times.retain(|t| u.breakpoints().iter().all(|bp| (t - bp).abs() > window));
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            Ok(LossSample {
                map: mat_exp(problem.f(), b - t)?.matmul(problem.g()),
                value: u.value_at(t).to_vec(),
            })
        })
        .collect()
}

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-9 * (1.0 + y.abs())
}

/// Hinge penalty that vanishes iff `v` belongs to the argmax of the Hamiltonian
/// for switching function `s` (zero value, on-band, off-band and tie sets alike).
fn penalty(set: &AdmissibleSet, s: &[f64], v: &[f64], eta: Eta, zero_tol: f64) -> f64 {
    let is_zero = v.iter().all(|x| x.abs() <= zero_tol);
    match set {
        AdmissibleSet::Box { lower, upper } => {
            let best: f64 = s
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(si, (l, u))| (si * l).max(si * u))
                .sum();
            let channel: f64 = s
                .iter()
                .zip(v)
                .zip(lower.iter().zip(upper))
                .map(|((si, vi), (l, u))| {
                    if near(*vi, *u) && near(*vi, *l) {
                        0.0
                    } else if near(*vi, *u) {
                        (-si).max(0.0)
                    } else if near(*vi, *l) {
                        si.max(0.0)
                    } else {
                        si.abs()
                    }
                })
                .sum();
            match eta {
                Eta::Normal if is_zero => (best - 1.0).max(0.0),
                Eta::Normal => channel + (1.0 - dot(s, v)).max(0.0),
                Eta::Abnormal => channel,
            }
        }
        AdmissibleSet::Ball { radius } => {
            let reach = radius * norm2(s);
            let on_sphere = near(norm2(v), *radius);
            match eta {
                Eta::Normal if is_zero => (reach - 1.0).max(0.0),
                Eta::Normal if on_sphere => (reach - dot(s, v)) + (1.0 - dot(s, v)).max(0.0),
                Eta::Normal => 1.0 + reach,
                Eta::Abnormal if on_sphere => reach - dot(s, v),
                Eta::Abnormal => reach,
            }
        }
    }
}

fn consistency_loss(problem: &Problem, samples: &[LossSample], p_hat: &[f64], eta: Eta, zero_tol: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|smp| {
            penalty(
                problem.admissible(),
                &smp.map.tr_mul_vec(p_hat),
                &smp.value,
                eta,
                zero_tol,
            )
        })
        .sum();
    total / samples.len() as f64
}

/// Finds `(η, p̂)` under which `u` satisfies the maximum condition, trying
/// `η = 1` first. The returned multiplier always passes [`certify`].
pub fn recover_adjoint(
    problem: &Problem,
    u: &PiecewiseConstantControl,
    opts: &RecoverOptions,
) -> Result<Option<AdjointParams>> {
    Ok(recover_with_report(problem, u, opts)?.map(|(ap, _)| ap))
}

fn recover_with_report(
    problem: &Problem,
    u: &PiecewiseConstantControl,
    opts: &RecoverOptions,
) -> Result<Option<(AdjointParams, CertificateReport)>> {
    u.check_against(problem, 1e-9)?;
    let d = problem.state_dim();
    let samples = loss_samples(problem, u, opts.samples)?;
    let zt = opts.tolerances.zero_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nm = NelderMeadOptions {
        initial_step: 0.5,
        f_tol: 0.0,
        x_tol: 1e-14,
        max_evals: 3000 + 1000 * d,
    };
    let accept = |ap: AdjointParams, loss: f64| -> Result<Option<(AdjointParams, CertificateReport)>> {
        if loss > opts.loss_tol {
            return Ok(None);
        }
        let report = certify(problem, &ap, u, &opts.tolerances)?;
        Ok(report.passed.then_some((ap, report)))
    };

    let normal = |p: &[f64]| consistency_loss(problem, &samples, p, Eta::Normal, zt);
    for start in 0..opts.starts.max(1) {
        let x0: Vec<f64> = if start == 0 {
            vec![0.0; d]
        } else {
            (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()
        };
        let first = minimize(normal, &x0, &nm);
        let m = minimize(
            normal,
            &first.x,
            &NelderMeadOptions {
                initial_step: 0.01,
                ..nm
            },
        );
        if let Some(found) = accept(AdjointParams::normal(m.x.clone()), m.value)? {
            return Ok(Some(found));
        }
    }

    let unit = |x: &[f64]| -> Option<Vec<f64>> {
        let n = norm2(x);
        (n > 1e-12).then(|| x.iter().map(|v| v / n).collect())
    };
    let abnormal = |x: &[f64]| match unit(x) {
        Some(p) => consistency_loss(problem, &samples, &p, Eta::Abnormal, zt),
        None => f64::INFINITY,
    };
    if d == 1 {
        for p in [1.0, -1.0] {
            if let Some(found) = accept(AdjointParams::abnormal(vec![p]), abnormal(&[p]))? {
                return Ok(Some(found));
            }
        }
        return Ok(None);
    }
    for _ in 0..opts.starts.max(1) {
        let x0: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let first = minimize(abnormal, &x0, &nm);
        let m = minimize(
            abnormal,
            &first.x,
            &NelderMeadOptions {
                initial_step: 0.01,
                ..nm
            },
        );
        if let Some(p) = unit(&m.x) {
            if let Some(found) = accept(AdjointParams::abnormal(p), m.value)? {
                return Ok(Some(found));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(st: &Structure) -> String {
        st.to_string()
    }

    #[test]
    fn enumeration_counts_and_order() {
        let set = AdmissibleSet::symmetric_box(1, 1.0);
        let one = enumerate_structures(1, &set, 1).unwrap();
        assert_eq!(one.iter().map(labels).collect::<Vec<_>>(), ["(0)", "(-)", "(+)"]);
        assert_eq!(enumerate_structures(1, &set, 2).unwrap().len(), 9);
        let three = enumerate_structures(1, &set, 3).unwrap();
        assert_eq!(three.len(), 3 + 6 + 12);
        assert!(three.iter().any(|s| labels(s) == "(0,+,0)"));
        for w in three.windows(2) {
            assert!((w[0].on_count(), w[0].len()) <= (w[1].on_count(), w[1].len()));
        }
        for s in &three {
            assert!(s.labels.windows(2).all(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn enumeration_guards() {
        let set = AdmissibleSet::symmetric_box(1, 1.0);
        assert!(enumerate_structures(1, &set, 0).is_err());
        assert!(enumerate_structures(1, &set, 40).is_err());
        let wide = AdmissibleSet::symmetric_box(6, 1.0);
        assert!(enumerate_structures(6, &wide, 3).is_err());
        let ball = AdmissibleSet::Ball { radius: 1.0 };
        let b = enumerate_structures(2, &ball, 3).unwrap();
        assert_eq!(
            b.iter().map(labels).collect::<Vec<_>>(),
            ["(off)", "(on)", "(off,on)", "(on,off)", "(off,on,off)", "(on,off,on)"]
        );
        assert_eq!(enumerate_structures(1, &ball, 1).unwrap().len(), 3);
        assert!(enumerate_structures(4, &ball, 2).is_err());
    }

    #[test]
    fn min_time_examples() {
        let t = min_time(&fixtures::example1(), 1e-4, 200).unwrap();
        assert!((t - 3.0).abs() < 1e-3, "{t}");
        let short = fixtures::example1().with_horizon(0.0, 2.0).unwrap();
        assert_eq!(min_time(&short, 1e-4, 200).unwrap(), f64::INFINITY);
        let rest = Problem::new(
            Matrix::zeros(1, 1),
            Matrix::column(&[1.0]),
            0.0,
            1.0,
            vec![2.0],
            vec![2.0],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        assert_eq!(min_time(&rest, 1e-4, 10).unwrap(), 0.0);
        let t2 = min_time(&fixtures::example2(), 1e-4, 200).unwrap();
        assert!(t2 > 0.0 && t2 < 5.0);
    }

    fn structure(s: &[i8]) -> Structure {
        Structure {
            labels: s.iter().map(|&c| Label::Box(vec![c])).collect(),
        }
    }

    #[test]
    fn durations_of_example2() {
        let p = fixtures::example2();
        let fit = solve_durations(&p, &structure(&[0, 1, 0]), &[5.0 / 3.0; 3], &SynthOptions::default()).unwrap();
        assert!(fit.residual <= 1e-8, "{}", fit.residual);
        let expect = [11.0 / 6.0, 3.0, 1.0 / 6.0];
        for (d, e) in fit.durations.iter().zip(expect) {
            assert!((d - e).abs() < 1e-6, "{:?}", fit.durations);
        }
        assert!((fit.support - 3.0).abs() < 1e-6);
    }

    #[test]
    fn durations_of_example1() {
        let p = fixtures::example1();
        let fit = solve_durations(&p, &structure(&[-1, 0]), &[2.5, 2.5], &SynthOptions::default()).unwrap();
        assert!(fit.residual <= 1e-8);
        assert!((fit.durations[0] - 3.0).abs() < 1e-8 && (fit.durations[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn zero_structure_is_infeasible_on_example2() {
        let p = fixtures::example2();
        let fit = solve_durations(&p, &structure(&[0]), &[5.0], &SynthOptions::default()).unwrap();
        assert!((fit.residual - 34f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn synth_example1() {
        let r = synth_l0(&fixtures::example1(), &SynthOptions::default()).unwrap();
        assert!((r.support - 3.0).abs() < 1e-6, "{}", r.support);
        assert!(r.endpoint_residual <= 1e-6);
        assert!(r.certified);
        assert!(r.locally_optimal);
        let ap = r.certificate.clone().unwrap();
        assert_eq!(ap.eta(), Eta::Normal);
        assert!((ap.p_hat()[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn synth_example2() {
        let r = synth_l0(&fixtures::example2(), &SynthOptions::default()).unwrap();
        assert!((r.support - 3.0).abs() < 1e-6, "{}", r.support);
        assert_eq!(r.structure.to_string(), "(0,+,0)");
        let bp = r.control.breakpoints();
        assert!((bp[1] - 11.0 / 6.0).abs() < 1e-6 && (bp[2] - 29.0 / 6.0).abs() < 1e-6);
        assert!(r.endpoint_residual <= 1e-6);
        assert!(r.certified && r.locally_optimal);
        let ap = r.certificate.clone().unwrap();
        assert!(ap.p_hat()[0].abs() < 1e-6 && (ap.p_hat()[1] - 1.0).abs() < 1e-6);
        for entry in r.search_log.iter().filter(|e| e.feasible) {
            assert!(r.support <= entry.support + 1e-7);
        }
        let side: serde_json::Value = serde_json::from_str(&r.sidecar_json()).unwrap();
        assert_eq!(side["eta"], 1);
        assert_eq!(side["certified"], true);
    }

    #[test]
    fn synth_rejects_short_horizon() {
        let short = fixtures::example1().with_horizon(0.0, 2.0).unwrap();
        match synth_l0(&short, &SynthOptions::default()) {
            Err(Error::Infeasible { min_time, horizon }) => {
                assert_eq!(horizon, 2.0);
                assert!((min_time - 3.0).abs() < 1e-3, "{min_time}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synth_reports_too_small_k_max() {
        // Rest-to-rest on the double integrator needs an accelerating and a braking segment.
        let p = Problem::new(
            fixtures::example2().f().clone(),
            fixtures::example2().g().clone(),
            0.0,
            5.0,
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        let opts = SynthOptions {
            k_max: Some(1),
            ..Default::default()
        };
        assert!(matches!(
            synth_l0(&p, &opts),
            Err(Error::NoFeasibleStructure { k_max: 1 })
        ));
        let r = synth_l0(&p, &SynthOptions::default()).unwrap();
        assert!(r.endpoint_residual <= 1e-6);
        assert!(r.support < 5.0);
    }

    #[test]
    fn zero_control_when_already_there() {
        let p = Problem::new(
            Matrix::zeros(1, 1),
            Matrix::column(&[1.0]),
            0.0,
            2.0,
            vec![0.5],
            vec![0.5],
            AdmissibleSet::symmetric_box(1, 1.0),
        )
        .unwrap();
        let r = synth_l0(&p, &SynthOptions::default()).unwrap();
        assert_eq!(r.support, 0.0);
        assert_eq!(r.structure.to_string(), "(0)");
    }

    #[test]
    fn recover_examples() {
        let opts = RecoverOptions::default();
        let ap = recover_adjoint(&fixtures::example2(), &fixtures::example2_control(), &opts)
            .unwrap()
            .unwrap();
        assert_eq!(ap.eta(), Eta::Normal);
        assert!(
            ap.p_hat()[0].abs() < 1e-6 && (ap.p_hat()[1] - 1.0).abs() < 1e-6,
            "{:?}",
            ap
        );

        let ap1 = recover_adjoint(&fixtures::example1(), &fixtures::example1_control(), &opts)
            .unwrap()
            .unwrap();
        assert!((ap1.p_hat()[0] + 1.0).abs() < 1e-6);

        let wrong = PiecewiseConstantControl::new(vec![0.0, 1.0, 5.0], vec![vec![1.0], vec![-1.0]]).unwrap();
        assert!(recover_adjoint(&fixtures::example1(), &wrong, &opts).unwrap().is_none());
    }

    #[test]
    fn penalty_vanishes_exactly_on_candidates() {
        let set = AdmissibleSet::symmetric_box(1, 1.0);
        for (s, v, expect) in [
            (2.0, 1.0, 0.0),
            (2.0, 0.0, 1.0),
            (0.5, 0.0, 0.0),
            (0.5, 1.0, 0.5),
            (1.0, 0.0, 0.0),
            (1.0, 1.0, 0.0),
            (-1.0, -1.0, 0.0),
            (1.0, 0.5, 1.5),
        ] {
            assert!(
                (penalty(&set, &[s], &[v], Eta::Normal, 1e-9) - expect).abs() < 1e-15,
                "{s} {v}"
            );
        }
        let ball = AdmissibleSet::Ball { radius: 2.0 };
        assert_eq!(penalty(&ball, &[0.0, 1.0], &[0.0, 2.0], Eta::Normal, 1e-9), 0.0);
        assert_eq!(penalty(&ball, &[0.0, 0.25], &[0.0, 0.0], Eta::Normal, 1e-9), 0.0);
        assert!(penalty(&ball, &[0.0, 1.0], &[2.0, 0.0], Eta::Normal, 1e-9) > 1.0);
    }

    #[test]
    fn ball_synthesis_two_inputs() {
        // ż = u with ‖u‖ ≤ 1: the straight-line move needs support ‖B - A‖.
        let p = Problem::new(
            Matrix::zeros(2, 2),
            Matrix::identity(2),
            0.0,
            4.0,
            vec![0.0, 0.0],
            vec![1.2, -1.6],
            AdmissibleSet::Ball { radius: 1.0 },
        )
        .unwrap();
        let r = synth_l0(&p, &SynthOptions::default()).unwrap();
        assert!((r.support - 2.0).abs() < 1e-5, "{}", r.support);
        assert!(r.endpoint_residual <= 1e-6);
        assert!(r.certified);
    }

    #[test]
    fn env_seed_override() {
        std::env::set_var("HANDSOFF_SEED", "7");
        assert_eq!(SynthOptions::default().with_env_seed().seed, 7);
        std::env::remove_var("HANDSOFF_SEED");
        assert_eq!(SynthOptions::default().with_env_seed().seed, 42);
    }
}
