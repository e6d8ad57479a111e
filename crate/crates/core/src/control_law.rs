//! Adjoint, switching function and the pointwise maximizers of the
//! Hamiltonian `⟨p, F z + G v⟩ + η·1_{0}(v)` over the admissible set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_exp, norm2};
use crate::model::{is_zero, AdmissibleSet, Problem, DEFAULT_ZERO_TOL};

/// Width of the band around a threshold inside which values count as ties.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Multiplier on the running cost in the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Eta {
    /// `η = 0`: the cost drops out of the Hamiltonian.
    Abnormal,
    /// `η = 1`.
    Normal,
}

impl Eta {
    pub fn value(self) -> f64 {
        match self {
            Eta::Abnormal => 0.0,
            Eta::Normal => 1.0,
        }
    }
}

impl From<Eta> for u8 {
    fn from(e: Eta) -> u8 {
        e.value() as u8
    }
}

impl TryFrom<u8> for Eta {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Eta::Abnormal),
            1 => Ok(Eta::Normal),
            _ => Err(Error::validation("eta", format!("must be 0 or 1, got {v}"))),
        }
    }
}

/// Multiplier pair `(η, p̂)` with `p̂ = p(b)` the terminal adjoint.
///
/// Abnormal multipliers are only defined up to positive scaling, so a
/// nonzero `p̂` is stored with unit norm when `η = 0`. The trivial pair
/// `(0, 0)` can be represented so that it can be reported as failing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointParams {
    eta: Eta,
    p_hat: Vec<f64>,
}

impl AdjointParams {
    pub fn new(eta: Eta, p_hat: Vec<f64>) -> Self {
        let n = norm2(&p_hat);
        let p_hat = if eta == Eta::Abnormal && n > 0.0 {
            p_hat.iter().map(|x| x / n).collect()
        } else {
            p_hat
        };
        Self { eta, p_hat }
    }

    pub fn normal(p_hat: Vec<f64>) -> Self {
        Self::new(Eta::Normal, p_hat)
    }

    pub fn abnormal(p_hat: Vec<f64>) -> Self {
        Self::new(Eta::Abnormal, p_hat)
    }

    pub fn eta(&self) -> Eta {
        self.eta
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// `(η, p̂) ≠ (0, 0)`.
    pub fn is_nontrivial(&self) -> bool {
        self.eta == Eta::Normal || self.p_hat.iter().any(|x| *x != 0.0)
    }
}

fn check_time(problem: &Problem, t: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + problem.a().abs().max(problem.b().abs()));
    if t < problem.a() - slack || t > problem.b() + slack || t.is_nan() {
        return Err(Error::OutsideHorizon {
            t,
            a: problem.a(),
            b: problem.b(),
        });
    }
    Ok(())
}

fn check_adjoint_dim(problem: &Problem, ap: &AdjointParams) -> Result<()> {
    if ap.p_hat.len() != problem.state_dim() {
        return Err(Error::Dimension(format!(
            "p_hat has {} entries but the state has {}",
            ap.p_hat.len(),
            problem.state_dim()
        )));
    }
    Ok(())
}

/// `p(t) = e^{(b-t) Fᵀ} p̂`, no horizon check.
pub(crate) fn adjoint_unchecked(problem: &Problem, p_hat: &[f64], t: f64) -> Vec<f64> {
    let e = mat_exp(&problem.f().transpose(), problem.b() - t).expect("F is square");
    e.mul_vec(p_hat)
}

/// Adjoint `p(t) = e^{(b-t) Fᵀ} p̂` of a linear plant.
pub fn adjoint_at(problem: &Problem, ap: &AdjointParams, t: f64) -> Result<Vec<f64>> {
    check_time(problem, t)?;
    check_adjoint_dim(problem, ap)?;
    Ok(adjoint_unchecked(problem, &ap.p_hat, t))
}

/// Switching function `Gᵀ e^{(b-t) Fᵀ} p̂`.
pub fn switching_function(problem: &Problem, ap: &AdjointParams, t: f64) -> Result<Vec<f64>> {
    let p = adjoint_at(problem, ap, t)?;
    Ok(problem.g().tr_mul_vec(&p))
}

/// `⟨p, φ⟩ + η·1_{0}(v)` given the adjoint and the velocity `φ(z, v)`.
pub fn hamiltonian_value(p: &[f64], velocity: &[f64], v: &[f64], eta: Eta, zero_tol: f64) -> f64 {
    let bonus = if is_zero(v, zero_tol) { eta.value() } else { 0.0 };
    dot(p, velocity) + bonus
}

pub(crate) fn linear_velocity(problem: &Problem, z: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = problem.f().mul_vec(z);
    for (o, gv) in out.iter_mut().zip(problem.g().mul_vec(v)) {
        *o += gv;
    }
    out
}

/// `H^η(z, p(t), v) = ⟨p(t), F z + G v⟩ + η·1_{0}(v)` for an admissible `v`.
pub fn pointwise_hamiltonian(problem: &Problem, ap: &AdjointParams, z: &[f64], v: &[f64], t: f64) -> Result<f64> {
    if z.len() != problem.state_dim() {
        return Err(Error::Dimension(format!("state has {} entries", z.len())));
    }
    if !problem.admissible().contains(v, 1e-12) {
        return Err(Error::NotAdmissible { value: v.to_vec() });
    }
    let p = adjoint_at(problem, ap, t)?;
    Ok(hamiltonian_value(
        &p,
        &linear_velocity(problem, z, v),
        v,
        ap.eta,
        DEFAULT_ZERO_TOL,
    ))
}

/// Maximizers of a single channel's linear term `s·v` over `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelSet {
    Point(f64),
    Interval(f64, f64),
}

impl ChannelSet {
    fn distance(&self, x: f64) -> f64 {
        match *self {
            ChannelSet::Point(p) => (x - p).abs(),
            ChannelSet::Interval(lo, hi) => (lo - x).max(x - hi).max(0.0),
        }
    }

    fn representatives(&self) -> Vec<f64> {
        match *self {
            ChannelSet::Point(p) => vec![p],
            ChannelSet::Interval(lo, hi) => {
                let mut r = vec![lo, hi];
                if lo < 0.0 && hi > 0.0 {
                    r.push(0.0);
                }
                r
            }
        }
    }
}

/// Maximizers of the linear part `⟨s, v⟩` over the admissible set.
#[derive(Clone, Debug, PartialEq)]
pub enum Face {
    /// Product of per-channel maximizers over a box.
    Box(Vec<ChannelSet>),
    /// Unique boundary point of a ball.
    BallPoint(Vec<f64>),
    /// The whole ball (switching value vanishes).
    WholeBall(f64),
}

/// Set of pointwise Hamiltonian maximizers: optionally the origin, optionally a face.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub zero: bool,
    pub face: Option<Face>,
}

impl CandidateSet {
    fn only_zero() -> Self {
        Self { zero: true, face: None }
    }

    /// Euclidean distance from `v` to the set.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        if self.zero {
            best = norm2(v);
        }
        if let Some(face) = &self.face {
            let d = match face {
                Face::Box(ch) => ch
                    .iter()
                    .zip(v)
                    .map(|(c, x)| c.distance(*x).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                Face::BallPoint(w) => norm2(&crate::linalg::sub(v, w)),
                Face::WholeBall(r) => (norm2(v) - r).max(0.0),
            };
            best = best.min(d);
        }
        best
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.distance(v) <= tol
    }

    /// Finite set of members: the origin, box vertices of the face, and for
    /// intervals their endpoints and the origin.
    pub fn representatives(&self, m: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if self.zero {
            out.push(vec![0.0; m]);
        }
        match &self.face {
            None => {}
            Some(Face::Box(ch)) => {
                let mut acc: Vec<Vec<f64>> = vec![Vec::new()];
                for c in ch {
                    acc = acc
                        .into_iter()
                        .flat_map(|prefix| {
                            c.representatives().into_iter().map(move |x| {
                                let mut p = prefix.clone();
                                p.push(x);
                                p
                            })
                        })
                        .collect();
                }
                out.extend(acc);
            }
            Some(Face::BallPoint(w)) => out.push(w.clone()),
            Some(Face::WholeBall(r)) => {
                out.push(vec![0.0; m]);
                for i in 0..m {
                    for sign in [-1.0, 1.0] {
                        let mut e = vec![0.0; m];
                        e[i] = sign * r;
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    /// True when the only member is the origin.
    pub fn is_only_zero(&self) -> bool {
        self.zero && self.face.is_none()
    }
}

/// Bang-off-bang law over a box `lower ≤ v ≤ upper`.
///
/// With `η = 1` the origin wins while `max_v ⟨s, v⟩ < 1`, the linear
/// maximizers win above 1, and both are returned inside the tie band.
/// With `η = 0` only the linear maximizers are returned. Channels whose
/// switching value is within `tie_tol` of zero keep their whole interval.
pub fn bang_off_bang_box(s: &[f64], eta: Eta, lower: &[f64], upper: &[f64], tie_tol: f64) -> CandidateSet {
    let mut linear_max = 0.0;
    let channels: Vec<ChannelSet> = s
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&si, (&lo, &hi))| {
            linear_max += (si * hi).max(si * lo);
            if si > tie_tol {
                ChannelSet::Point(hi)
            } else if si < -tie_tol {
                ChannelSet::Point(lo)
            } else {
                ChannelSet::Interval(lo, hi)
            }
        })
        .collect();
    select(eta, linear_max, Face::Box(channels), tie_tol)
}

/// Bang-off-bang law over the ball `‖v‖ ≤ radius`.
pub fn bang_off_bang_ball(w: &[f64], eta: Eta, radius: f64, tie_tol: f64) -> CandidateSet {
    let n = norm2(w);
    let face = if n <= tie_tol {
        Face::WholeBall(radius)
    } else {
        Face::BallPoint(w.iter().map(|x| radius * x / n).collect())
    };
    select(eta, radius * n, face, tie_tol)
}

fn select(eta: Eta, linear_max: f64, face: Face, tie_tol: f64) -> CandidateSet {
    match eta {
        Eta::Abnormal => CandidateSet {
            zero: false,
            face: Some(face),
        },
        Eta::Normal if linear_max > 1.0 + tie_tol => CandidateSet {
            zero: false,
            face: Some(face),
        },
        Eta::Normal if linear_max >= 1.0 - tie_tol => CandidateSet {
            zero: true,
            face: Some(face),
        },
        Eta::Normal => CandidateSet::only_zero(),
    }
}

/// Dispatches to the box or ball law.
pub fn bang_off_bang(set: &AdmissibleSet, s: &[f64], eta: Eta, tie_tol: f64) -> CandidateSet {
    match set {
        AdmissibleSet::Box { lower, upper } => bang_off_bang_box(s, eta, lower, upper, tie_tol),
        AdmissibleSet::Ball { radius } => bang_off_bang_ball(s, eta, *radius, tie_tol),
    }
}

/// Largest number of grid points a brute-force search will evaluate.
const MAX_GRID_POINTS: usize = 4_000_000;

/// Grid over the admissible set, always containing the origin exactly.
pub fn control_grid(set: &AdmissibleSet, m: usize, grid_n: usize) -> Result<Vec<Vec<f64>>> {
    if grid_n < 2 {
        return Err(Error::validation("grid_n", "need at least two points per axis"));
    }
    let linspace = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    };
    let mut points: Vec<Vec<f64>> = match set {
        AdmissibleSet::Box { lower, upper } => {
            let total = grid_n.checked_pow(m as u32).filter(|&n| n <= MAX_GRID_POINTS);
            if total.is_none() {
                return Err(Error::Unsupported(format!(
                    "box grid with {grid_n}^{m} points is too large"
                )));
            }
            let mut acc: Vec<Vec<f64>> = vec![Vec::new()];
            for i in 0..m {
                let axis = linspace(lower[i], upper[i], grid_n);
                acc = acc
                    .into_iter()
                    .flat_map(|prefix| {
                        axis.iter().map(move |&x| {
                            let mut p = prefix.clone();
                            p.push(x);
                            p
                        })
                    })
                    .collect();
            }
            acc
        }
        AdmissibleSet::Ball { radius } => match m {
            1 => linspace(-radius, *radius, grid_n)
                .into_iter()
                .map(|x| vec![x])
                .collect(),
            2 => {
                let nr = ((grid_n as f64).sqrt().ceil() as usize).max(2);
                let na = (grid_n / nr).max(8);
                let mut pts = Vec::with_capacity(nr * na);
                for r in linspace(0.0, *radius, nr).into_iter().skip(1) {
                    for k in 0..na {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / na as f64;
                        pts.push(vec![r * th.cos(), r * th.sin()]);
                    }
                }
                pts
            }
            3 => {
                let n = ((grid_n as f64).cbrt().ceil() as usize).max(2);
                let mut pts = Vec::new();
                for r in linspace(0.0, *radius, n).into_iter().skip(1) {
                    for i in 0..=2 * n {
                        let polar = std::f64::consts::PI * i as f64 / (2 * n) as f64;
                        for k in 0..4 * n {
                            let az = 2.0 * std::f64::consts::PI * k as f64 / (4 * n) as f64;
                            pts.push(vec![
                                r * polar.sin() * az.cos(),
                                r * polar.sin() * az.sin(),
                                r * polar.cos(),
                            ]);
                        }
                    }
                }
                pts
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "brute-force grids over a ball need m ≤ 3, got {m}"
                )))
            }
        },
    };
    points.push(vec![0.0; m]);
    Ok(points)
}

/// Grid maximizers of the pointwise Hamiltonian, as an oracle for the analytic laws.
///
/// Returns every grid point whose value is within `tie_tol` of the grid maximum.
pub fn argmax_hamiltonian_bruteforce(
    problem: &Problem,
    ap: &AdjointParams,
    z: &[f64],
    t: f64,
    grid_n: usize,
    tie_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let p = adjoint_at(problem, ap, t)?;
    let grid = control_grid(problem.admissible(), problem.input_dim(), grid_n)?;
    let values: Vec<f64> = grid
        .iter()
        .map(|v| hamiltonian_value(&p, &linear_velocity(problem, z, v), v, ap.eta, DEFAULT_ZERO_TOL))
        .collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<Vec<f64>> = grid
        .into_iter()
        .zip(values)
        .filter(|(_, h)| *h >= best - tie_tol)
        .map(|(v, _)| v)
        .collect();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const UNIT: ([f64; 1], [f64; 1]) = ([-1.0], [1.0]);

    fn box_law(s: f64, eta: Eta) -> Vec<Vec<f64>> {
        bang_off_bang_box(&[s], eta, &UNIT.0, &UNIT.1, DEFAULT_TIE_TOL).representatives(1)
    }

    #[test]
    fn adjoint_examples() {
        let p = fixtures::example2();
        let ap = AdjointParams::normal(vec![0.7, -0.2]);
        assert_eq!(adjoint_at(&p, &ap, 5.0).unwrap(), vec![0.7, -0.2]);
        for t in [0.0, 1.3, 4.0] {
            let v = adjoint_at(&p, &ap, t).unwrap();
            assert!((v[0] - 0.7).abs() < 1e-15);
            assert!((v[1] - (0.7 * (5.0 - t) - 0.2)).abs() < 1e-14);
        }
        let p1 = fixtures::example1();
        let ap1 = AdjointParams::normal(vec![-1.0]);
        assert_eq!(adjoint_at(&p1, &ap1, 0.3).unwrap(), vec![-1.0]);
        assert!(matches!(adjoint_at(&p1, &ap1, 5.5), Err(Error::OutsideHorizon { .. })));
    }

    #[test]
    fn switching_function_examples() {
        let p = fixtures::example2();
        let certificate = AdjointParams::normal(vec![0.0, 1.0]);
        let ramp = AdjointParams::normal(vec![1.0, 0.0]);
        for t in [0.0, 1.0, 2.5, 5.0] {
            assert!((switching_function(&p, &certificate, t).unwrap()[0] - 1.0).abs() < 1e-15);
            assert!((switching_function(&p, &ramp, t).unwrap()[0] - (5.0 - t)).abs() < 1e-14);
        }
        let any = AdjointParams::normal(vec![0.3, -2.0]);
        assert_eq!(switching_function(&p, &any, 5.0).unwrap(), vec![-2.0]);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = fixtures::example2();
        let ap = AdjointParams::normal(vec![0.0, 1.0]);
        let z = [4.0, -1.5];
        // v = 0: ⟨p, Fz⟩ + η = p₁ z₂ + 1.
        assert!((pointwise_hamiltonian(&p, &ap, &z, &[0.0], 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((pointwise_hamiltonian(&p, &ap, &z, &[1.0], 2.0).unwrap() - 1.0).abs() < 1e-15);
        // Abnormal multipliers are normalized, so compare raw linear parts directly.
        let a1 = AdjointParams::new(Eta::Normal, vec![0.4, 0.9]);
        let a3 = AdjointParams::new(Eta::Normal, vec![1.2, 2.7]);
        let h1 = pointwise_hamiltonian(&p, &a1, &z, &[0.5], 1.0).unwrap();
        let h3 = pointwise_hamiltonian(&p, &a3, &z, &[0.5], 1.0).unwrap();
        assert!((h3 - 3.0 * h1).abs() < 1e-12);
        assert!(matches!(
            pointwise_hamiltonian(&p, &ap, &z, &[1.5], 1.0),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn unit_box_law_examples() {
        assert_eq!(box_law(2.0, Eta::Normal), vec![vec![1.0]]);
        assert_eq!(box_law(0.5, Eta::Normal), vec![vec![0.0]]);
        assert_eq!(box_law(1.0, Eta::Normal), vec![vec![0.0], vec![1.0]]);
        assert_eq!(box_law(-1.0, Eta::Normal), vec![vec![0.0], vec![-1.0]]);
        assert_eq!(box_law(-3.0, Eta::Abnormal), vec![vec![-1.0]]);
        assert_eq!(box_law(0.2, Eta::Abnormal), vec![vec![1.0]]);
        // Vanishing switching value under η = 0 leaves the whole interval.
        let whole = bang_off_bang_box(&[0.0], Eta::Abnormal, &[-1.0], &[1.0], DEFAULT_TIE_TOL);
        assert!(whole.contains(&[0.37], 0.0));
    }

    #[test]
    fn general_box_thresholds_scale_with_bounds() {
        // Upper bound 2 moves the positive threshold to 1/2; lower bound -0.5 moves the negative one to -2.
        let set = |s: f64| bang_off_bang_box(&[s], Eta::Normal, &[-0.5], &[2.0], DEFAULT_TIE_TOL);
        assert!(set(0.4).is_only_zero());
        assert_eq!(set(0.6).representatives(1), vec![vec![2.0]]);
        assert_eq!(set(0.5).representatives(1), vec![vec![0.0], vec![2.0]]);
        assert!(set(-1.5).is_only_zero());
        assert_eq!(set(-2.5).representatives(1), vec![vec![-0.5]]);
    }

    #[test]
    fn multichannel_box_uses_joint_threshold() {
        // Each channel alone is below 1 but the joint linear maximum is 1.2.
        let c = bang_off_bang_box(&[0.6, -0.6], Eta::Normal, &[-1.0, -1.0], &[1.0, 1.0], DEFAULT_TIE_TOL);
        assert_eq!(c.representatives(2), vec![vec![1.0, -1.0]]);
    }

    #[test]
    fn ball_law_examples() {
        assert!(bang_off_bang_ball(&[0.3, 0.4], Eta::Normal, 1.0, DEFAULT_TIE_TOL).is_only_zero());
        let c = bang_off_bang_ball(&[3.0, 4.0], Eta::Normal, 1.0, DEFAULT_TIE_TOL);
        let reps = c.representatives(2);
        assert_eq!(reps.len(), 1);
        assert!((reps[0][0] - 0.6).abs() < 1e-15 && (reps[0][1] - 0.8).abs() < 1e-15);
        assert!(bang_off_bang_ball(&[0.0, 0.0], Eta::Normal, 1.0, DEFAULT_TIE_TOL).is_only_zero());
        let tie = bang_off_bang_ball(&[0.6, 0.8], Eta::Normal, 1.0, DEFAULT_TIE_TOL);
        assert!(tie.zero && tie.face.is_some());
        let abnormal = bang_off_bang_ball(&[0.0, -0.1], Eta::Abnormal, 2.0, DEFAULT_TIE_TOL);
        assert_eq!(abnormal.representatives(2), vec![vec![0.0, -2.0]]);
    }

    #[test]
    fn bruteforce_examples_on_scalar_integrator() {
        let p = fixtures::example1();
        let argmax = |p0: f64| {
            argmax_hamiltonian_bruteforce(
                &p,
                &AdjointParams::normal(vec![p0]),
                &[1.0],
                2.0,
                10001,
                DEFAULT_TIE_TOL,
            )
            .unwrap()
        };
        assert_eq!(argmax(-2.0), vec![vec![-1.0]]);
        assert_eq!(argmax(0.5), vec![vec![0.0]]);
        assert_eq!(argmax(0.0), vec![vec![0.0]]);
        let tie = argmax(-1.0);
        assert!(tie.contains(&vec![-1.0]) && tie.contains(&vec![0.0]) && tie.len() == 2);
    }

    #[test]
    fn bruteforce_zero_adjoint_picks_origin() {
        let p = fixtures::example2();
        let out =
            argmax_hamiltonian_bruteforce(&p, &AdjointParams::normal(vec![0.0, 0.0]), &[1.0, 2.0], 1.0, 101, 1e-9)
                .unwrap();
        assert_eq!(out, vec![vec![0.0]]);
    }

    #[test]
    fn bruteforce_rejects_large_balls() {
        let p = Problem::new(
            crate::Matrix::zeros(1, 1),
            crate::Matrix::from_row_major(1, 4, vec![1.0; 4]),
            0.0,
            1.0,
            vec![0.0],
            vec![0.0],
            AdmissibleSet::Ball { radius: 1.0 },
        )
        .unwrap();
        let ap = AdjointParams::normal(vec![1.0]);
        assert!(matches!(
            argmax_hamiltonian_bruteforce(&p, &ap, &[0.0], 0.5, 11, 1e-9),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn analytic_law_agrees_with_bruteforce_on_ball() {
        let p = Problem::new(
            crate::Matrix::zeros(2, 2),
            crate::Matrix::identity(2),
            0.0,
            1.0,
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            AdmissibleSet::Ball { radius: 1.0 },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let ph = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let ap = AdjointParams::normal(ph.clone());
            let analytic = bang_off_bang_ball(&ph, Eta::Normal, 1.0, DEFAULT_TIE_TOL);
            let grid = argmax_hamiltonian_bruteforce(&p, &ap, &[0.0, 0.0], 0.5, 40000, 1e-9).unwrap();
            // The grid maximizer approximates the analytic one to within the angular spacing.
            for g in &grid {
                assert!(analytic.distance(g) < 0.05, "{ph:?} {g:?}");
            }
        }
    }

    #[test]
    fn abnormal_candidates_are_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = rng.gen_range(-2.0..2.0);
            let alpha = rng.gen_range(0.01..100.0);
            assert_eq!(box_law(s, Eta::Abnormal), box_law(alpha * s, Eta::Abnormal));
        }
        let a = AdjointParams::abnormal(vec![3.0, 4.0]);
        assert!((a.p_hat()[0] - 0.6).abs() < 1e-15);
        assert!(!AdjointParams::abnormal(vec![0.0, 0.0]).is_nontrivial());
        assert!(AdjointParams::normal(vec![0.0, 0.0]).is_nontrivial());
    }

    #[test]
    fn candidates_stay_admissible_and_off_band_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = AdmissibleSet::Box {
            lower: vec![-1.0, -0.5],
            upper: vec![2.0, 1.0],
        };
        for _ in 0..500 {
            let s = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            for eta in [Eta::Normal, Eta::Abnormal] {
                for v in bang_off_bang(&set, &s, eta, DEFAULT_TIE_TOL).representatives(2) {
                    assert!(set.contains(&v, 0.0));
                }
            }
        }
        for _ in 0..500 {
            let s = [rng.gen_range(-1.0 + 1e-9..1.0 - 1e-9)];
            assert!(bang_off_bang_box(&s, Eta::Normal, &[-1.0], &[1.0], DEFAULT_TIE_TOL).is_only_zero());
        }
    }

    #[test]
    fn eta_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&Eta::Normal).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Eta>("0").unwrap(), Eta::Abnormal);
        assert!(serde_json::from_str::<Eta>("2").is_err());
    }
}
