//! Problem data, piecewise-constant controls, trajectories and the sparsity
//! costs evaluated on them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Magnitude at or below which a control component counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// True when every component of `v` is within `zero_tol` of zero.
pub fn is_zero(v: &[f64], zero_tol: f64) -> bool {
    v.iter().all(|x| x.abs() <= zero_tol)
}

/// Compact input set containing the origin in its interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdmissibleSet {
    /// Per-channel interval `lower_i ≤ u_i ≤ upper_i`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball `‖u‖ ≤ radius`.
    Ball { radius: f64 },
}

impl AdmissibleSet {
    /// Symmetric box `[-bound, bound]^m`.
    pub fn symmetric_box(m: usize, bound: f64) -> Self {
        AdmissibleSet::Box {
            lower: vec![-bound; m],
            upper: vec![bound; m],
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            AdmissibleSet::Box { lower, upper } => {
                if lower.len() != m {
                    return Err(Error::validation(
                        "U.lower",
                        format!("expected {m} entries, got {}", lower.len()),
                    ));
                }
                if upper.len() != m {
                    return Err(Error::validation(
                        "U.upper",
                        format!("expected {m} entries, got {}", upper.len()),
                    ));
                }
                if let Some(i) = lower.iter().position(|l| !(l.is_finite() && *l < 0.0)) {
                    return Err(Error::validation(
                        "U.lower",
                        format!("entry {i} is {}; zero must be strictly interior", lower[i]),
                    ));
                }
                if let Some(i) = upper.iter().position(|u| !(u.is_finite() && *u > 0.0)) {
                    return Err(Error::validation(
                        "U.upper",
                        format!("entry {i} is {}; zero must be strictly interior", upper[i]),
                    ));
                }
            }
            AdmissibleSet::Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::validation("U.radius", "radius must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Membership with absolute slack `tol`.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            AdmissibleSet::Box { lower, upper } => {
                v.len() == lower.len()
                    && v.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
            }
            AdmissibleSet::Ball { radius } => crate::linalg::norm2(v) <= radius + tol,
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, AdmissibleSet::Box { .. })
    }
}

/// Raw, unvalidated problem as it appears on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    a: f64,
    b: f64,
    #[serde(rename = "A")]
    initial: Vec<f64>,
    #[serde(rename = "B")]
    target: Vec<f64>,
    #[serde(rename = "U")]
    admissible: AdmissibleSet,
}

/// Fixed-endpoint, fixed-horizon steering problem for `ż = F z + G u`, `u ∈ U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct Problem {
    f: Matrix,
    g: Matrix,
    a: f64,
    b: f64,
    initial: Vec<f64>,
    target: Vec<f64>,
    admissible: AdmissibleSet,
}

impl Problem {
    pub fn new(
        f: Matrix,
        g: Matrix,
        a: f64,
        b: f64,
        initial: Vec<f64>,
        target: Vec<f64>,
        admissible: AdmissibleSet,
    ) -> Result<Self> {
        if !f.is_square() {
            return Err(Error::validation(
                "F",
                format!("must be square, got {}x{}", f.rows(), f.cols()),
            ));
        }
        let d = f.rows();
        if g.rows() != d {
            return Err(Error::validation(
                "G",
                format!("must have {d} rows to match F, got {}", g.rows()),
            ));
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::validation("a", "horizon endpoints must be finite"));
        }
        if b <= a {
            return Err(Error::validation("b", format!("horizon end {b} must exceed start {a}")));
        }
        if initial.len() != d {
            return Err(Error::validation(
                "A",
                format!("expected {d} entries, got {}", initial.len()),
            ));
        }
        if target.len() != d {
            return Err(Error::validation(
                "B",
                format!("expected {d} entries, got {}", target.len()),
            ));
        }
        admissible.validate(g.cols())?;
        Ok(Self {
            f,
            g,
            a,
            b,
            initial,
            target,
            admissible,
        })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn horizon(&self) -> f64 {
        self.b - self.a
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn admissible(&self) -> &AdmissibleSet {
        &self.admissible
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.g.cols()
    }

    /// Same plant and endpoints over `[a, b]`.
    pub fn with_horizon(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(
            self.f.clone(),
            self.g.clone(),
            a,
            b,
            self.initial.clone(),
            self.target.clone(),
            self.admissible.clone(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}

impl TryFrom<ProblemFile> for Problem {
    type Error = Error;
    fn try_from(raw: ProblemFile) -> Result<Self> {
        let f = Matrix::from_rows(&raw.f).map_err(|e| Error::validation("F", e.to_string()))?;
        let g = Matrix::from_rows(&raw.g).map_err(|e| Error::validation("G", e.to_string()))?;
        Problem::new(f, g, raw.a, raw.b, raw.initial, raw.target, raw.admissible)
    }
}

impl From<Problem> for ProblemFile {
    fn from(p: Problem) -> Self {
        ProblemFile {
            f: p.f.to_rows(),
            g: p.g.to_rows(),
            a: p.a,
            b: p.b,
            initial: p.initial,
            target: p.target,
            admissible: p.admissible,
        }
    }
}

/// Reads and validates a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Problem::from_json(&text)
}

pub fn save_problem(problem: &Problem, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &problem.to_json())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Control that is constant on each right-open segment `[t_{k-1}, t_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstantControl {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PiecewiseConstantControl {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("values", "control needs at least one segment"));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::validation(
                "breakpoints",
                format!(
                    "{} breakpoints cannot bound {} segments",
                    breakpoints.len(),
                    values.len()
                ),
            ));
        }
        if let Some(k) = breakpoints.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::validation(
                "breakpoints",
                format!("not strictly increasing at index {}", k + 1),
            ));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::validation("breakpoints", "non-finite time"));
        }
        let m = values[0].len();
        if m == 0 {
            return Err(Error::validation("values", "control dimension must be positive"));
        }
        if let Some(k) = values.iter().position(|v| v.len() != m) {
            return Err(Error::validation(
                "values",
                format!("segment {k} has {} channels, expected {m}", values[k].len()),
            ));
        }
        Ok(Self { breakpoints, values })
    }

    /// Single segment holding `value` over `[a, b]`.
    pub fn constant(a: f64, b: f64, value: Vec<f64>) -> Result<Self> {
        Self::new(vec![a, b], vec![value])
    }

    /// Builds a control from consecutive `(duration, value)` pairs starting at `a`.
    ///
    /// Zero-length segments are dropped and equal neighbours merged.
    pub fn from_durations(a: f64, pieces: &[(f64, Vec<f64>)]) -> Result<Self> {
        let mut breakpoints = vec![a];
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut t = a;
        for (dur, v) in pieces {
            if *dur <= 0.0 {
                continue;
            }
            t += dur;
            if values.last() == Some(v) {
                *breakpoints.last_mut().unwrap() = t;
            } else {
                values.push(v.clone());
                breakpoints.push(t);
            }
        }
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn num_segments(&self) -> usize {
        self.values.len()
    }

    /// `(start, end, value)` for every segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &[f64])> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[0], w[1], v.as_slice()))
    }

    /// Index of the segment in effect at `t` (right-continuous; `end` maps to the last).
    pub fn segment_index(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&bp| bp <= t);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[self.segment_index(t)]
    }

    /// Checks that the control spans the problem horizon and stays inside `U`.
    pub fn check_against(&self, problem: &Problem, tol: f64) -> Result<()> {
        if self.input_dim() != problem.input_dim() {
            return Err(Error::Dimension(format!(
                "control has {} channels but the plant has {} inputs",
                self.input_dim(),
                problem.input_dim()
            )));
        }
        let span_tol = 1e-9 * (1.0 + problem.horizon());
        if (self.start() - problem.a()).abs() > span_tol || (self.end() - problem.b()).abs() > span_tol {
            return Err(Error::validation(
                "breakpoints",
                format!(
                    "control spans [{}, {}] but the horizon is [{}, {}]",
                    self.start(),
                    self.end(),
                    problem.a(),
                    problem.b()
                ),
            ));
        }
        for v in &self.values {
            if !problem.admissible().contains(v, tol) {
                return Err(Error::NotAdmissible { value: v.clone() });
            }
        }
        Ok(())
    }

    /// Splits segment `k` at `t` (same value on both halves).
    pub fn split_at(&self, k: usize, t: f64) -> Result<Self> {
        let mut bp = self.breakpoints.clone();
        let mut vals = self.values.clone();
        bp.insert(k + 1, t);
        vals.insert(k, vals[k].clone());
        Self::new(bp, vals)
    }

    pub fn to_csv(&self) -> String {
        let m = self.input_dim();
        let mut out = String::from("t_start,t_end");
        for i in 1..=m {
            let _ = write!(out, ",u_{i}");
        }
        out.push('\n');
        for (t0, t1, v) in self.segments() {
            let _ = write!(out, "{},{}", fmt_num(t0), fmt_num(t1));
            for x in v {
                let _ = write!(out, ",{}", fmt_num(*x));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty control file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "t_start" || cols[1] != "t_end" {
            return Err(Error::Parse(format!("unexpected control header `{header}`")));
        }
        let m = cols.len() - 2;
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if fields.len() != m + 2 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    m + 2
                )));
            }
            match breakpoints.last() {
                None => breakpoints.push(fields[0]),
                Some(&prev) if prev != fields[0] => {
                    return Err(Error::Parse(format!(
                        "row {} starts at {} but the previous segment ends at {prev}",
                        lineno + 1,
                        fields[0]
                    )))
                }
                Some(_) => {}
            }
            breakpoints.push(fields[1]);
            values.push(fields[2..].to_vec());
        }
        if values.is_empty() {
            return Err(Error::Parse("control file has no segments".into()));
        }
        Self::new(breakpoints, values)
    }
}

/// Enough digits to round-trip any `f64`.
pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn save_control(u: &PiecewiseConstantControl, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &u.to_csv())
}

pub fn load_control(path: impl AsRef<Path>) -> Result<PiecewiseConstantControl> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    PiecewiseConstantControl::from_csv(&text)
}

/// Sampled state-action trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control in effect at each grid instant (right limit at breakpoints).
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has samples")
    }
}

/// Lebesgue measure of the support of `u`.
pub fn l0_cost(u: &PiecewiseConstantControl, zero_tol: f64) -> f64 {
    u.segments()
        .filter(|(_, _, v)| !is_zero(v, zero_tol))
        .map(|(t0, t1, _)| t1 - t0)
        .sum()
}

/// `∫ 1_{0}(u(s)) ds`: total time the control is off.
pub fn off_time(u: &PiecewiseConstantControl, zero_tol: f64) -> f64 {
    u.segments()
        .filter(|(_, _, v)| is_zero(v, zero_tol))
        .map(|(t0, t1, _)| t1 - t0)
        .sum()
}

/// `(1/(b-a)) Σ_i λ_i |supp u_i|`, the additive per-channel variant.
pub fn weighted_l0_cost(u: &PiecewiseConstantControl, weights: &[f64], zero_tol: f64) -> Result<f64> {
    if weights.len() != u.input_dim() {
        return Err(Error::Dimension(format!(
            "{} weights for {} channels",
            weights.len(),
            u.input_dim()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::validation(
            "weights",
            format!("entry {i} is {}; weights must be positive", weights[i]),
        ));
    }
    let total: f64 = u
        .segments()
        .map(|(t0, t1, v)| {
            let on: f64 = v
                .iter()
                .zip(weights)
                .filter(|(x, _)| x.abs() > zero_tol)
                .map(|(_, w)| w)
                .sum();
            on * (t1 - t0)
        })
        .sum();
    Ok(total / (u.end() - u.start()))
}

/// `∫ ‖u(s)‖₁ ds`.
pub fn l1_cost(u: &PiecewiseConstantControl) -> f64 {
    u.segments()
        .map(|(t0, t1, v)| v.iter().map(|x| x.abs()).sum::<f64>() * (t1 - t0))
        .sum()
}

/// All sparsity-related costs of a control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub l0_support: f64,
    pub l1_cost: f64,
    /// Additive per-channel cost with unit weights.
    pub weighted_l0: f64,
    /// `-∫ 1_{0}(u) dt`, equal to `l0_support - (b - a)`.
    pub clarke_cost: f64,
}

impl CostReport {
    pub fn of(u: &PiecewiseConstantControl, zero_tol: f64) -> Self {
        let ones = vec![1.0; u.input_dim()];
        Self {
            l0_support: l0_cost(u, zero_tol),
            l1_cost: l1_cost(u),
            weighted_l0: weighted_l0_cost(u, &ones, zero_tol).expect("unit weights are valid"),
            clarke_cost: -off_time(u, zero_tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn example2_control() -> PiecewiseConstantControl {
        PiecewiseConstantControl::new(
            vec![0.0, 11.0 / 6.0, 29.0 / 6.0, 5.0],
            vec![vec![0.0], vec![1.0], vec![0.0]],
        )
        .unwrap()
    }

    fn example1_control() -> PiecewiseConstantControl {
        PiecewiseConstantControl::new(vec![0.0, 3.0, 5.0], vec![vec![-1.0], vec![0.0]]).unwrap()
    }

    #[test]
    fn example2_problem_file_loads() {
        let json = r#"{"F": [[0,1],[0,0]], "G": [[0],[1]], "a": 0, "b": 5,
            "A": [10,-3], "B": [0,0], "U": {"kind":"box","lower":[-1],"upper":[1]}}"#;
        let p = Problem::from_json(json).unwrap();
        assert_eq!(p, fixtures::example2());
        assert_eq!(p.initial(), &[10.0, -3.0]);
        assert_eq!(p.horizon(), 5.0);
    }

    #[test]
    fn load_problem_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_problem(&fixtures::example1(), &path).unwrap();
        assert_eq!(load_problem(&path).unwrap(), fixtures::example1());
        assert!(matches!(
            load_problem(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn empty_horizon_rejected() {
        let json = r#"{"F": [[0]], "G": [[1]], "a": 2, "b": 2,
            "A": [3], "B": [0], "U": {"kind":"box","lower":[-1],"upper":[1]}}"#;
        match Problem::from_json(json) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "b"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn zero_on_box_boundary_rejected() {
        let json = r#"{"F": [[0]], "G": [[1]], "a": 0, "b": 5,
            "A": [3], "B": [0], "U": {"kind":"box","lower":[0],"upper":[1]}}"#;
        match Problem::from_json(json) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "U.lower"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatches_name_the_field() {
        let cases = [
            (
                r#"{"F": [[0,1],[0,0]], "G": [[1]], "a": 0, "b": 1, "A": [0,0], "B": [0,0], "U": {"kind":"ball","radius":1}}"#,
                "G",
            ),
            (
                r#"{"F": [[0,1],[0,0]], "G": [[0],[1]], "a": 0, "b": 1, "A": [0], "B": [0,0], "U": {"kind":"ball","radius":1}}"#,
                "A",
            ),
            (
                r#"{"F": [[0,1]], "G": [[0]], "a": 0, "b": 1, "A": [0], "B": [0], "U": {"kind":"ball","radius":1}}"#,
                "F",
            ),
            (
                r#"{"F": [[0]], "G": [[1]], "a": 0, "b": 1, "A": [0], "B": [0], "U": {"kind":"ball","radius":0}}"#,
                "U.radius",
            ),
        ];
        for (json, field) in cases {
            match Problem::from_json(json) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected validation error on {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(Problem::from_json("{\"F\": [[0]]"), Err(Error::Parse(_))));
        assert!(matches!(Problem::from_json(r#"{"F": [[0]]}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn l0_cost_examples() {
        assert!((l0_cost(&example2_control(), DEFAULT_ZERO_TOL) - 3.0).abs() < 1e-15);
        let zero = PiecewiseConstantControl::constant(0.0, 5.0, vec![0.0]).unwrap();
        assert_eq!(l0_cost(&zero, DEFAULT_ZERO_TOL), 0.0);
        assert_eq!(l0_cost(&example1_control(), DEFAULT_ZERO_TOL), 3.0);
    }

    #[test]
    fn zero_tol_absorbs_roundoff() {
        let u = PiecewiseConstantControl::new(vec![0.0, 1.0, 2.0], vec![vec![1e-12], vec![0.5]]).unwrap();
        assert_eq!(l0_cost(&u, DEFAULT_ZERO_TOL), 1.0);
        assert_eq!(l0_cost(&u, 0.0), 2.0);
    }

    #[test]
    fn weighted_l0_examples() {
        let w = weighted_l0_cost(&example1_control(), &[1.0], DEFAULT_ZERO_TOL).unwrap();
        assert!((w - 0.6).abs() < 1e-15);
        let zero = PiecewiseConstantControl::constant(0.0, 5.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(weighted_l0_cost(&zero, &[1.0, 2.0], DEFAULT_ZERO_TOL).unwrap(), 0.0);
        // Channel 1 on for 1 s, channel 2 on for 2 s.
        let u = PiecewiseConstantControl::new(
            vec![0.0, 1.0, 2.0, 5.0],
            vec![vec![1.0, 0.5], vec![0.0, -0.5], vec![0.0, 0.0]],
        )
        .unwrap();
        assert!((weighted_l0_cost(&u, &[1.0, 2.0], DEFAULT_ZERO_TOL).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_l0_rejects_nonpositive_weights() {
        let u = example1_control();
        assert!(matches!(
            weighted_l0_cost(&u, &[0.0], DEFAULT_ZERO_TOL),
            Err(Error::Validation { .. })
        ));
        assert!(weighted_l0_cost(&u, &[-1.0], DEFAULT_ZERO_TOL).is_err());
    }

    #[test]
    fn cost_report_of_example2() {
        let r = CostReport::of(&example2_control(), DEFAULT_ZERO_TOL);
        assert!((r.l0_support - 3.0).abs() < 1e-15);
        assert!((r.clarke_cost + 2.0).abs() < 1e-15);
        assert!((r.l1_cost - 3.0).abs() < 1e-15);
        assert!((r.weighted_l0 - 0.6).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_keeps_example2_breakpoints() {
        let u = example2_control();
        let back = PiecewiseConstantControl::from_csv(&u.to_csv()).unwrap();
        assert_eq!(back.breakpoints(), &[0.0, 11.0 / 6.0, 29.0 / 6.0, 5.0]);
        assert_eq!(back, u);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let single = PiecewiseConstantControl::constant(0.0, 5.0, vec![0.0]).unwrap();
        save_control(&single, &path).unwrap();
        assert_eq!(load_control(&path).unwrap(), single);
    }

    #[test]
    fn csv_header_format() {
        let u = PiecewiseConstantControl::constant(0.0, 1.0, vec![0.25, -1.0]).unwrap();
        let csv = u.to_csv();
        assert!(csv.starts_with("t_start,t_end,u_1,u_2\n"));
        let row = csv.lines().nth(1).unwrap();
        // 17 significant digits per field.
        assert_eq!(row.split(',').next().unwrap(), "0.0000000000000000e0");
    }

    #[test]
    fn csv_load_errors() {
        assert!(PiecewiseConstantControl::from_csv("t_start,t_end,u_1\n").is_err());
        assert!(PiecewiseConstantControl::from_csv("").is_err());
        let backwards = "t_start,t_end,u_1\n0,2,1\n2,1,0\n";
        assert!(PiecewiseConstantControl::from_csv(backwards).is_err());
        let gap = "t_start,t_end,u_1\n0,1,1\n1.5,2,0\n";
        assert!(PiecewiseConstantControl::from_csv(gap).is_err());
    }

    #[test]
    fn value_lookup_is_right_continuous() {
        let u = example2_control();
        assert_eq!(u.value_at(0.0), &[0.0]);
        assert_eq!(u.value_at(11.0 / 6.0), &[1.0]);
        assert_eq!(u.value_at(29.0 / 6.0), &[0.0]);
        assert_eq!(u.value_at(5.0), &[0.0]);
        assert_eq!(u.value_at(3.0), &[1.0]);
    }

    #[test]
    fn constructor_rejects_bad_breakpoints() {
        assert!(PiecewiseConstantControl::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(PiecewiseConstantControl::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(PiecewiseConstantControl::new(vec![0.0, 1.0, 2.0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn from_durations_merges_and_drops() {
        let u = PiecewiseConstantControl::from_durations(
            0.0,
            &[(1.0, vec![0.0]), (0.0, vec![1.0]), (2.0, vec![0.0]), (2.0, vec![1.0])],
        )
        .unwrap();
        assert_eq!(u.breakpoints(), &[0.0, 3.0, 5.0]);
        assert_eq!(u.values(), &[vec![0.0], vec![1.0]]);
    }

    #[test]
    fn admissibility_check_against_problem() {
        let p = fixtures::example1();
        assert!(example1_control().check_against(&p, 1e-12).is_ok());
        let bad = PiecewiseConstantControl::constant(0.0, 5.0, vec![1.5]).unwrap();
        assert!(matches!(bad.check_against(&p, 1e-12), Err(Error::NotAdmissible { .. })));
        let short = PiecewiseConstantControl::constant(0.0, 4.0, vec![0.0]).unwrap();
        assert!(short.check_against(&p, 1e-12).is_err());
    }
}
