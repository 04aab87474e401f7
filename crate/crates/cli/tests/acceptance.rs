//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use soliton_lab::energy::{energy_report, first_variation_check, PotentialPath, FIRST_VARIATION_STEP};
use soliton_lab::geometry::{
    charge_identity, curvature_floor_check, metric_difference_leading_constant, metric_difference_rate, volume_growth,
};
use soliton_lab::ma::{
    continuity_solve, ma_residual, verify_exponential_decay, verify_extrema_localization,
    verify_radial_derivative_bound, MaProblem,
};
use soliton_lab::profile::{
    build_profile, expansion_error_exponent, expansion_error_ratios, ConeSpec, Profile, RadialGrid,
};
use soliton_lab::spectral::{poincare_gap, solve_mode, Branch, Forcing, ModeData};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

fn profile(n: usize, a: f64, t_min: f64, t_max: f64, count: usize, tol: f64) -> Profile {
    let spec = ConeSpec::trivial_link(n, a).expect("valid cone");
    build_profile(&spec, &RadialGrid::new(t_min, t_max, count).expect("valid grid"), tol).expect("profile builds")
}

fn long_profile(n: usize) -> Profile {
    profile(n, 0.0, -10.0, 1e4, 16384, 1e-12)
}

fn implicit_residual() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        for a in [0.0, 1.0] {
            let start = Instant::now();
            let p = profile(n, a, -10.0, 300.0, 4096, 1e-10);
            let seconds = start.elapsed().as_secs_f64();
            passed &= p.residual_max <= 1e-10 && seconds < 1.0;
            parts.push(format!("n={n} a={a} residual={:.2e} time={seconds:.3}s", p.residual_max));
        }
    }
    Outcome::new(passed, parts.join(", "))
}

fn expansion() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let p = long_profile(n);
        let exponent = expansion_error_exponent(&p).unwrap();
        let ratios: Vec<f64> =
            expansion_error_ratios(&p).unwrap().into_iter().filter(|(t, _)| *t >= 50.0).map(|r| r.1).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let spread = (hi - lo) / (hi + lo);
        passed &= (-2.3..=-1.7).contains(&exponent) && spread <= 0.2;
        parts.push(format!("n={n} exponent={exponent:.4} ratio in [{lo:.4}, {hi:.4}] spread={spread:.4}"));
    }
    Outcome::new(passed, parts.join(", "))
}

fn first_order_and_curvature() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let p = long_profile(n);
        let nf = n as f64;
        let worst = p
            .grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, t)| **t >= 100.0)
            .map(|(k, &t)| (t * (4.0 * nf - 4.0 * p.phi1[k]) / 4.0 - (nf - 1.0)).abs() / (3.0 * t.ln().powi(2) / t))
            .fold(0.0, f64::max);
        let floor = curvature_floor_check(&p, 0.5).unwrap();
        passed &= worst <= 1.0 && floor.holds;
        parts.push(format!("n={n} worst/bound={worst:.4} floor holds={} from t={:?}", floor.holds, floor.threshold));
    }
    Outcome::new(passed, parts.join(", "))
}

fn metric_rate() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let p = long_profile(n);
        let rate = metric_difference_rate(&p, 100.0, 1e4).unwrap();
        let target = metric_difference_leading_constant(n);
        let ratio = rate.fitted / target;
        passed &= (ratio - 1.0).abs() <= 0.3 && rate.max.is_finite();
        parts.push(format!("n={n} fitted={:.4} target={target:.4} range=[{:.4}, {:.4}]", rate.fitted, rate.min, rate.max));
    }
    Outcome::new(passed, parts.join(", "))
}

fn charge_and_volume() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let p = long_profile(n);
        let charge = charge_identity(&p).into_iter().fold(0.0, f64::max);
        let slope = volume_growth(&p).unwrap().slope;
        passed &= charge <= 1e-12 && (slope / n as f64 - 1.0).abs() <= 0.05;
        parts.push(format!("n={n} charge defect={charge:.2e} volume slope={slope:.4}"));
    }
    Outcome::new(passed, parts.join(", "))
}

fn mode_grid(t_max: f64, count: usize) -> RadialGrid {
    RadialGrid::new(1.0, t_max, count).unwrap()
}

fn modes() -> Outcome {
    let spec = ConeSpec::new(2, 0.0, vec![0.0, 8.0, 80.0], 1.0).unwrap();
    let analytic =
        ModeData::new(8.0, 0.5, mode_grid(200.0, 2048), Forcing::Power { exponent: 0.5, scale: 1.0 }, None).unwrap();
    let sol = solve_mode(&analytic, &spec, 1e-10).unwrap();
    let relative =
        sol.t.iter().zip(&sol.u).map(|(t, u)| (u / (-0.5 * t.sqrt()) - 1.0).abs()).fold(0.0, f64::max);
    let mut residual = sol.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    let fitted: Vec<f64> = [2001usize, 4001]
        .iter()
        .map(|&count| {
            let grid = mode_grid(2000.0, count);
            let q = grid.nodes.iter().map(|s| s.powf(-0.6) * (1.0 + 0.3 * (0.5 * s).sin() / s)).collect();
            let data = ModeData::new(80.0, 0.6, grid, Forcing::Samples(q), None).unwrap();
            let sol = solve_mode(&data, &spec, 1e-2).unwrap();
            assert_eq!(sol.branch, Branch::Backward);
            residual = sol.residual.iter().fold(residual, |m, r| m.max(r.abs()));
            sol.fitted_c
        })
        .collect();
    let drift = (fitted[1] / fitted[0] - 1.0).abs();
    let passed = relative <= 1e-8 && residual <= 1e-8 && drift <= 0.1;
    Outcome::new(
        passed,
        format!("analytic rel err={relative:.2e}, max residual={residual:.2e}, decay constant {fitted:?} drift={drift:.4}"),
    )
}

fn poincare() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let p = profile(n, 0.0, -8.0, 30.0, 512, 1e-12);
        let report = poincare_gap(&p, 0.5).unwrap();
        let floor = 0.8 * n as f64 / 2.0;
        passed &= report.gap >= floor && report.subsolution_certified;
        parts.push(format!(
            "n={n} gap={:.4} (floor {floor}) certified={} exceptional={:?}",
            report.gap, report.subsolution_certified, report.exceptional_set
        ));
    }
    Outcome::new(passed, parts.join(", "))
}

fn reference_problem() -> MaProblem {
    MaProblem::bump(profile(2, 0.0, 0.5, 60.0, 2048, 1e-12), 0.1, 5.0, 8.0).unwrap()
}

fn continuity_and_energies() -> (Outcome, Outcome) {
    let start = Instant::now();
    let template = reference_problem();
    let (psi, trace) = continuity_solve(&template, 20, 1e-10).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let mut prob = template;
    prob.s = 1.0;
    let reached = trace.steps.last().map(|s| s.s) == Some(1.0);
    let residual = ma_residual(&psi, &prob).unwrap().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let extrema = verify_extrema_localization(&psi, &prob, 1e-10);
    let bound = verify_radial_derivative_bound(&psi, &prob, 1e-10);
    let slope = verify_exponential_decay(&psi, &prob).map(|d| d.slope).unwrap_or(f64::NAN);
    let ma = Outcome::new(
        reached && residual <= 1e-9 && seconds < 30.0 && extrema.is_ok() && bound.is_ok() && (0.85..=1.15).contains(&slope),
        format!(
            "reached s=1: {reached}, residual={residual:.2e}, time={seconds:.2}s, extrema={:?}, derivative margin={:?}, decay slope={slope:.4}",
            extrema.map(|e| (e.sup_branch, e.inf_branch)),
            bound.map(|b| b.margin)
        ),
    );

    let report = energy_report(&psi, &prob).unwrap();
    let refined =
        first_variation_check(&PotentialPath::Linear(psi.psi.clone()), &prob, FIRST_VARIATION_STEP / 2.0).unwrap();
    let ck_worst = report
        .ck_table
        .iter()
        .filter(|e| e.f == 50.0 || e.f == 200.0)
        .flat_map(|e| [(e.k >= 1).then_some(e.ratio), e.difference_ratio])
        .flatten()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    let energy = Outcome::new(
        report.path_gap <= 10.0 * report.quadrature_error
            && report.first_variation_defect <= 1e-3
            && refined < report.first_variation_defect
            && report.i_minus_j >= 0.0
            && ck_worst <= 0.1,
        format!(
            "J gap={:.2e} (quadrature error {:.2e}), first variation={:.2e} -> {refined:.2e}, I-J={:.6e}, worst c_k deviation={ck_worst:.4}",
            report.path_gap, report.quadrature_error, report.first_variation_defect, report.i_minus_j
        ),
    );
    (ma, energy)
}

fn collect(root: &Path, dir: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, into);
        } else {
            let name = path.strip_prefix(root).unwrap().display().to_string();
            into.insert(name, std::fs::read(&path).unwrap());
        }
    }
}

fn determinism() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let dir = base.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_soliton-lab"))
            .env("SOLITON_LAB_OUT", &dir)
            .arg("report")
            .output()
            .unwrap()
            .status;
        let mut files = BTreeMap::new();
        if dir.exists() {
            collect(&dir, &dir, &mut files);
        }
        runs.push((status.code(), files));
    }
    let (first, second) = (&runs[0], &runs[1]);
    let identical = first.1 == second.1;
    let differing: Vec<&String> = first.1.keys().filter(|k| second.1.get(*k) != first.1.get(*k)).collect();
    Outcome::new(
        first.0 == Some(0) && second.0 == Some(0) && identical && !first.1.is_empty(),
        format!(
            "exit codes {:?}/{:?}, {} files, byte-identical={identical}, differing={differing:?}",
            first.0,
            second.0,
            first.1.len()
        ),
    )
}

fn main() -> ExitCode {
    let (ma, energy) = continuity_and_energies();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("implicit-equation residual", implicit_residual()),
        ("expansion of phi", expansion()),
        ("first-order term and curvature floor", first_order_and_curvature()),
        ("metric-difference rate", metric_rate()),
        ("charge identity and volume growth", charge_and_volume()),
        ("mode solver", modes()),
        ("spectral gap and subsolution", poincare()),
        ("continuity method", ma),
        ("energy functionals", energy),
        ("determinism of report", determinism()),
    ];
    let mut all = true;
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        all &= outcome.passed;
        println!("[{}] {} {name}: {}", if outcome.passed { "PASS" } else { "FAIL" }, i + 1, outcome.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
