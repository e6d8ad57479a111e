use handsoff_web::{singularity, solve, switching_profile};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).expect("valid JSON")
}

#[test]
fn example2_multiplier_sits_on_the_threshold() {
    let v = parse(switching_profile(0.0, 1.0, 1, 5.0, 51));
    assert_eq!(v["ok"], true);
    let s = v["s"].as_array().unwrap();
    assert_eq!(s.len(), 51);
    assert!(s.iter().all(|x| (x.as_f64().unwrap() - 1.0).abs() < 1e-12));
    assert!(v["tie"].as_array().unwrap().iter().all(|t| t == true));
}

#[test]
fn bang_off_bang_pick_follows_the_switching_function() {
    // s(t) = 5 - t: full thrust until t = 4, off afterwards.
    let v = parse(switching_profile(1.0, 0.0, 1, 5.0, 11));
    let u: Vec<f64> = v["u"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(&u[..8], &[1.0; 8]);
    assert_eq!(&u[9..], &[0.0; 2]);
    // η = 0 with s ≡ 0: every admissible value maximizes.
    let w = parse(switching_profile(0.0, 0.0, 0, 5.0, 3));
    assert!(w["u"].as_array().unwrap().iter().all(Value::is_null));
}

#[test]
fn solve_example2_compares_l0_and_l1() {
    let v = parse(solve(10.0, -3.0, 5.0, 500));
    assert_eq!(v["ok"], true, "{v}");
    assert!((v["l0"]["support"].as_f64().unwrap() - 3.0).abs() < 1e-6);
    assert_eq!(v["l0"]["structure"], "(0,+,0)");
    assert_eq!(v["l0"]["certified"], true);
    assert!((v["l1"]["cost"].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert!(v["l0"]["trajectory"]["residual"].as_f64().unwrap() < 1e-6);
    assert!(v["witness"]["support"].as_f64().unwrap() > 4.0);
}

#[test]
fn solve_reports_infeasible_horizon() {
    let v = parse(solve(10.0, -3.0, 1.0, 100));
    assert_eq!(v["ok"], false);
    assert!(v["error"].as_str().unwrap().contains("infeasible"));
}

#[test]
fn singularity_verdicts() {
    assert_eq!(parse(singularity(10.0, -3.0, 4.8))["singular"], true);
    assert_eq!(parse(singularity(1.0, -3.0, 1.0))["above_parabola"], false);
    let v = parse(singularity(10.0, -3.0, 5.0));
    assert_eq!(v["horizon_short"], false);
    assert_eq!(v["singular"], false);
}
