mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use handsoff::control_law::switching_function;
use handsoff::lp::{l1_solve, l1_solve_floored, singularity_check};
use handsoff::model::{l0_cost, load_control, load_problem, save_control, save_problem, DEFAULT_ZERO_TOL};
use handsoff::sim::{endpoint_residual, propagate_exact, save_trajectory};
use handsoff::synth::min_time;
use handsoff::{
    certify, fixtures, synth_l0, AdjointParams, Error, Eta, PiecewiseConstantControl, Problem, SynthOptions,
    SynthResult, Tolerances, Trajectory,
};
use svg::{Panel, Series};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_UNCERTIFIED: u8 = 3;

/// Floor used to build a full-support L1-optimal witness.
const WITNESS_FLOOR: f64 = 0.05;

#[derive(Parser)]
#[command(
    name = "handsoff",
    version,
    about = "Maximum hands-off (L0-sparse) control for linear plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparsest control by structure search, with a maximum-principle certificate
    SolveL0 {
        problem: PathBuf,
        /// Longest bang-off-bang structure (default 2d+1)
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=31))]
        kmax: Option<u64>,
        #[arg(long, default_value_t = 1e-6)]
        feas_tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// L1 relaxation as an exactly discretized linear program
    SolveL1 {
        problem: PathBuf,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..=1_000_000))]
        intervals: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a control against the maximum principle for a given multiplier
    Certify {
        problem: PathBuf,
        control: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        eta: u8,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        phat: Vec<f64>,
    },
    /// Singularity test of the double-integrator L1 problem
    Singularity {
        #[arg(long, allow_hyphen_values = true)]
        xi1: f64,
        #[arg(long, allow_hyphen_values = true)]
        xi2: f64,
        #[arg(long, allow_hyphen_values = true)]
        horizon: f64,
    },
    /// Reproduce a built-in example: L0 against L1
    Example {
        name: ExampleName,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..=1_000_000))]
        intervals: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Minimum transfer time by bisection on the L-infinity feasibility test
    MinTime {
        problem: PathBuf,
        #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(2..=1_000_000))]
        intervals: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Ex1,
    Ex2,
}

impl ExampleName {
    fn key(self) -> &'static str {
        match self {
            ExampleName::Ex1 => "ex1",
            ExampleName::Ex2 => "ex2",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Infeasible { .. }) => ExitCode::from(EXIT_INFEASIBLE),
                _ => ExitCode::from(EXIT_USAGE),
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::SolveL0 {
            problem,
            kmax,
            feas_tol,
            seed,
            out,
            plot,
        } => {
            let prob = read_problem(&problem)?;
            let mut opts = SynthOptions {
                k_max: kmax.map(|k| k as usize),
                feas_tol,
                ..SynthOptions::default()
            }
            .with_env_seed();
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            let result = synth_l0(&prob, &opts).context("L0 synthesis")?;
            prepare_dir(&out)?;
            let traj = write_l0(&prob, &result, &out)?;
            print_l0("", &result);
            if plot {
                let svg = l0_plot(&prob, &result, &traj)?;
                write(&out.join("solve_l0.svg"), &svg)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveL1 {
            problem,
            intervals,
            out,
        } => {
            let prob = read_problem(&problem)?;
            prepare_dir(&out)?;
            let (u, cost) = l1_solve(&prob, intervals as usize).context("L1 linear program")?;
            let traj = propagate_exact(&prob, &u)?;
            save_control(&u, out.join("l1_control.csv"))?;
            save_trajectory(&traj, None, out.join("l1_trajectory.csv"))?;
            let svg = svg::render(
                "L1-optimal control",
                &[
                    Panel {
                        title: "control".into(),
                        series: control_series("u", &u, false),
                    },
                    Panel {
                        title: "state".into(),
                        series: state_series("z", &traj, false),
                    },
                ],
            );
            write(&out.join("solve_l1.svg"), &svg)?;
            println!("l1_cost={cost:.6}");
            println!("support={:.6}", l0_cost(&u, DEFAULT_ZERO_TOL));
            println!("endpoint_residual={:.3e}", endpoint_residual(&traj, prob.target()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify {
            problem,
            control,
            eta,
            phat,
        } => {
            let prob = read_problem(&problem)?;
            let u = load_control(&control).context("loading control")?;
            let eta = if eta == 1 { Eta::Normal } else { Eta::Abnormal };
            let ap = AdjointParams::new(eta, phat);
            let report = certify(&prob, &ap, &u, &Tolerances::default()).context("certification")?;
            println!("{}", report.to_json());
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_UNCERTIFIED)
            })
        }
        Command::Singularity { xi1, xi2, horizon } => {
            let v = singularity_check(xi1, xi2, horizon);
            println!("xi1 > xi2^2/2: {} ({xi1} > {})", v.above_parabola, xi2 * xi2 / 2.0);
            println!("xi2 < 0: {} ({xi2} < 0)", v.negative_velocity);
            println!(
                "-xi2/2 - xi1/xi2 >= T: {} ({:.6} >= {horizon})",
                v.horizon_short, v.horizon_bound
            );
            println!("singular: {}", v.singular);
            Ok(ExitCode::SUCCESS)
        }
        Command::Example { name, intervals, out } => run_example(name, intervals as usize, &out),
        Command::MinTime {
            problem,
            intervals,
            tol,
        } => {
            let prob = read_problem(&problem)?;
            let t = min_time(&prob, tol, intervals as usize).context("minimum-time bisection")?;
            if t.is_finite() {
                println!("min_time={t:.6}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("min_time=inf");
                Ok(ExitCode::from(EXIT_INFEASIBLE))
            }
        }
    }
}

fn read_problem(path: &Path) -> anyhow::Result<Problem> {
    load_problem(path).with_context(|| format!("loading problem {}", path.display()))
}

fn prepare_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| {
            let s = format!("{x:.6}");
            match s.strip_prefix('-') {
                Some(rest) if rest.bytes().all(|c| c == b'0' || c == b'.') => rest.to_string(),
                _ => s,
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn write_l0(prob: &Problem, result: &SynthResult, out: &Path) -> anyhow::Result<Trajectory> {
    let traj = propagate_exact(prob, &result.control)?;
    save_control(&result.control, out.join("control.csv"))?;
    save_trajectory(
        &traj,
        result.certificate.as_ref().map(|ap| (prob, ap)),
        out.join("trajectory.csv"),
    )?;
    if let Some(report) = &result.report {
        write(&out.join("certificate.json"), &report.to_json())?;
    }
    write(&out.join("synth.json"), &result.sidecar_json())?;
    Ok(traj)
}

fn print_l0(prefix: &str, r: &SynthResult) {
    println!("{prefix}support={:.6}", r.support);
    println!("{prefix}structure={}", r.structure);
    println!("{prefix}breakpoints={}", fmt_list(r.control.breakpoints()));
    println!("{prefix}endpoint_residual={:.3e}", r.endpoint_residual);
    match &r.certificate {
        Some(ap) => {
            println!("{prefix}eta={}", ap.eta().value());
            println!("{prefix}p_hat={}", fmt_list(ap.p_hat()));
        }
        None => println!("{prefix}eta=none"),
    }
    println!("{prefix}certified={}", r.certified);
    println!("{prefix}locally_optimal={}", r.locally_optimal);
}

fn control_series(name: &str, u: &PiecewiseConstantControl, dashed: bool) -> Vec<Series> {
    (0..u.input_dim())
        .map(|i| {
            let s = Series::steps(format!("{name}_{}", i + 1), u, i);
            if dashed {
                s.dashed()
            } else {
                s
            }
        })
        .collect()
}

fn state_series(name: &str, traj: &Trajectory, dashed: bool) -> Vec<Series> {
    let d = traj.states.first().map_or(0, Vec::len);
    (0..d)
        .map(|i| {
            let pts = traj.grid.iter().zip(&traj.states).map(|(t, z)| (*t, z[i])).collect();
            let s = Series::new(format!("{name}_{}", i + 1), pts);
            if dashed {
                s.dashed()
            } else {
                s
            }
        })
        .collect()
}

fn l0_plot(prob: &Problem, r: &SynthResult, traj: &Trajectory) -> anyhow::Result<String> {
    let mut panels = vec![
        Panel {
            title: "state".into(),
            series: state_series("z", traj, false),
        },
        Panel {
            title: "control".into(),
            series: control_series("u", &r.control, false),
        },
    ];
    if let Some(ap) = &r.certificate {
        let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); prob.input_dim()];
        for &t in &traj.grid {
            for (i, s) in switching_function(prob, ap, t)?.into_iter().enumerate() {
                series[i].push((t, s));
            }
        }
        panels.push(Panel {
            title: "switching function".into(),
            series: series
                .into_iter()
                .enumerate()
                .map(|(i, pts)| Series::new(format!("s_{}", i + 1), pts))
                .collect(),
        });
    }
    Ok(svg::render("Maximum hands-off control", &panels))
}

fn run_example(name: ExampleName, intervals: usize, out: &Path) -> anyhow::Result<ExitCode> {
    let key = name.key();
    let prob = fixtures::by_name(key).expect("built-in example");
    prepare_dir(out)?;
    save_problem(&prob, out.join(format!("{key}.json")))?;
    let l0 = synth_l0(&prob, &SynthOptions::default().with_env_seed()).context("L0 synthesis")?;
    let l0_traj = write_l0(&prob, &l0, out)?;
    let (l1, l1_cost) = l1_solve(&prob, intervals).context("L1 linear program")?;
    let l1_traj = propagate_exact(&prob, &l1)?;
    save_control(&l1, out.join("l1_control.csv"))?;
    save_trajectory(&l1_traj, None, out.join("l1_trajectory.csv"))?;

    println!("example={key}");
    print_l0("l0_", &l0);
    let l1_support = l0_cost(&l1, DEFAULT_ZERO_TOL);
    println!("l1_cost={l1_cost:.6}");
    println!("l1_support={l1_support:.6}");
    println!(
        "l1_endpoint_residual={:.3e}",
        endpoint_residual(&l1_traj, prob.target())
    );
    if l1_support > l0.support + 0.05 {
        println!("l1_nonsparse=returned");
    } else {
        // The returned vertex is sparse: look for an equally cheap full-support optimum.
        let mut witness = None;
        for floor in [WITNESS_FLOOR, -WITNESS_FLOOR] {
            if let Ok((w, c)) = l1_solve_floored(&prob, intervals, floor) {
                if c <= l1_cost + 1e-6 {
                    witness = Some((w, c));
                    break;
                }
            }
        }
        match witness {
            Some((w, c)) => {
                let residual = endpoint_residual(&propagate_exact(&prob, &w)?, prob.target());
                println!("witness_cost={c:.6}");
                println!("witness_support={:.6}", l0_cost(&w, DEFAULT_ZERO_TOL));
                println!("witness_endpoint_residual={residual:.3e}");
                save_control(&w, out.join("l1_witness_control.csv"))?;
                println!("l1_nonsparse=witness");
            }
            None => println!("l1_nonsparse=unverified"),
        }
    }

    let svg = svg::render(
        &format!("{key}: L0 (solid) vs L1 (dashed)"),
        &[
            Panel {
                title: "control".into(),
                series: [
                    control_series("L0 u", &l0.control, false),
                    control_series("L1 u", &l1, true),
                ]
                .concat(),
            },
            Panel {
                title: "state".into(),
                series: [
                    state_series("L0 z", &l0_traj, false),
                    state_series("L1 z", &l1_traj, true),
                ]
                .concat(),
            },
        ],
    );
    write(&out.join(format!("{key}_comparison.svg")), &svg)?;
    if l0.endpoint_residual > 1e-6 {
        bail!("L0 endpoint residual {:.3e} exceeds 1e-6", l0.endpoint_residual);
    }
    Ok(ExitCode::SUCCESS)
}
