//! Built-in reference problems: a scalar integrator and a double integrator
//! with a singular L1 relaxation.

use crate::linalg::Matrix;
use crate::model::{AdmissibleSet, PiecewiseConstantControl, Problem};

/// `ż = u`, `z(0) = 3 → z(5) = 0`, `|u| ≤ 1`.
pub fn example1() -> Problem {
    Problem::new(
        Matrix::zeros(1, 1),
        Matrix::identity(1),
        0.0,
        5.0,
        vec![3.0],
        vec![0.0],
        AdmissibleSet::symmetric_box(1, 1.0),
    )
    .expect("valid built-in problem")
}

/// Double integrator from `(ξ1, ξ2)` to the origin over `[0, T]`, `|u| ≤ 1`.
pub fn double_integrator(xi1: f64, xi2: f64, horizon: f64) -> crate::Result<Problem> {
    Problem::new(
        Matrix::from_row_major(2, 2, vec![0.0, 1.0, 0.0, 0.0]),
        Matrix::column(&[0.0, 1.0]),
        0.0,
        horizon,
        vec![xi1, xi2],
        vec![0.0, 0.0],
        AdmissibleSet::symmetric_box(1, 1.0),
    )
}

/// Double integrator with `ξ = (10, -3)` and `T = 5`.
pub fn example2() -> Problem {
    double_integrator(10.0, -3.0, 5.0).expect("valid built-in problem")
}

/// `-1` on `[0, 3)`, `0` on `[3, 5]`: one member of the optimal family for [`example1`].
pub fn example1_control() -> PiecewiseConstantControl {
    PiecewiseConstantControl::new(vec![0.0, 3.0, 5.0], vec![vec![-1.0], vec![0.0]]).expect("valid built-in control")
}

/// The 0/1/0 control steering [`example2`], switching at 11/6 and 29/6.
pub fn example2_control() -> PiecewiseConstantControl {
    PiecewiseConstantControl::new(
        vec![0.0, 11.0 / 6.0, 29.0 / 6.0, 5.0],
        vec![vec![0.0], vec![1.0], vec![0.0]],
    )
    .expect("valid built-in control")
}

/// Looks up a built-in problem by name (`ex1`, `ex2`).
pub fn by_name(name: &str) -> Option<Problem> {
    match name {
        "ex1" => Some(example1()),
        "ex2" => Some(example2()),
        _ => None,
    }
}
