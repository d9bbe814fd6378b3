//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Timing sweeps follow the full protocol (one warm-up, ten timed runs,
//! median per case), so the whole suite takes several minutes. Raw samples
//! and figures go to `<target>/tmp/acceptance/`.

use num_complex::Complex64;
use pfscale::bench::{run_campaign, BenchSample, CampaignSpec, SampleWriter, SizeGrid, Subject};
use pfscale::network::{generate_radial, GeneratorSpec, LoadKind, Network, PhaseSet};
use pfscale::powerflow::{
    build_linearization, solve_constant_admittance, solve_fixed_point, LinearizationKind, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use pfscale::regression::{
    fit_line, fit_loglog, hypothesis_excluded, median_per_case, points_for, slopes_nondecreasing, windowed_slopes,
    CaseMedian, FitReport, DEFAULT_STEP_DECADES, DEFAULT_WINDOW_DECADES,
};
use pfscale::svg::{iterations_svg, scatter_fit_svg, Series};
use pfscale::ybus::{assemble, NodalLoads, YbusSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

type Check = Result<(bool, String), String>;

fn out_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&d).expect("create output dir");
    d
}

fn campaign(spec: &CampaignSpec, file: &str) -> Result<Vec<BenchSample>, String> {
    let path = out_dir().join(file);
    let mut w = SampleWriter::new(BufWriter::new(File::create(&path).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let t0 = Instant::now();
    let mut last_n = 0;
    run_campaign(spec, |s| {
        if s.n != last_n {
            last_n = s.n;
            eprintln!("  n = {:>6}  ({:.0} s)", s.n, t0.elapsed().as_secs_f64());
        }
        rows.push(s.clone());
        w.write(s)
    })
    .map_err(|e| e.to_string())?;
    if let Some(bad) = rows.iter().find(|s| s.failed) {
        return Err(format!("case {} failed", bad.case_id));
    }
    Ok(rows)
}

fn describe(f: &FitReport) -> String {
    format!(
        "alpha = {:.3}, sigma = {:.3}, CI95 = ({:.4}, {:.4}), r2 = {:.3}, cases = {}",
        f.alpha, f.sigma, f.ci95.0, f.ci95.1, f.r2, f.sample_count
    )
}

fn fit_subject(medians: &[CaseMedian], s: Subject) -> Result<FitReport, String> {
    fit_loglog(&points_for(medians, s)).map_err(|e| format!("{s}: {e}"))
}

fn network_sweep() -> Result<Vec<CaseMedian>, String> {
    let spec = CampaignSpec {
        subjects: vec![Subject::YbusSolve, Subject::FixedPointPF, Subject::ImplicitJacobianSolve],
        sizes: Some(SizeGrid {
            min: 300,
            max: 100_000,
            count: 15,
        }),
        repetitions: 10,
        warmup: 1,
        seed: 2024,
        ..Default::default()
    };
    let rows = campaign(&spec, "network_samples.csv")?;
    let medians = median_per_case(&rows);
    let series: Vec<Series> = spec
        .subjects
        .iter()
        .map(|&s| {
            let points = points_for(&medians, s);
            Series {
                label: s.name().into(),
                fit: fit_loglog(&points).ok(),
                points,
            }
        })
        .collect();
    if let Ok(svg) = scatter_fit_svg(&series, "network subjects", "nodes n", "t (s)") {
        let _ = std::fs::write(out_dir().join("network_scatter.svg"), svg);
    }
    Ok(medians)
}

fn sweep_criterion(medians: &[CaseMedian], s: Subject, hi: f64, cubic: bool) -> Check {
    let f = fit_subject(medians, s)?;
    let sizes = medians.iter().filter(|m| m.subject == s).count();
    let mut ok = sizes >= 15 && (1.00..=hi).contains(&f.alpha) && f.r2 >= 0.95;
    let mut detail = describe(&f);
    if cubic {
        let rejected = hypothesis_excluded(&f, 3.0);
        ok &= rejected;
        detail.push_str(&format!(", cubic rejected = {rejected}"));
    }
    Ok((ok, detail))
}

fn iteration_flatness(medians: &[CaseMedian]) -> Check {
    let pts: Vec<(f64, f64)> = medians
        .iter()
        .filter(|m| m.subject == Subject::FixedPointPF)
        .filter_map(|m| m.iterations.map(|k| (m.n as f64, k)))
        .collect();
    let x: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let f = fit_line(&x, &y).map_err(|e| e.to_string())?;
    let worst = y.iter().copied().fold(0.0, f64::max);
    let series = [Series {
        label: "FixedPointPF".into(),
        points: pts,
        fit: None,
    }];
    if let Ok(svg) = iterations_svg(&series, "fixed-point iterations") {
        let _ = std::fs::write(out_dir().join("iterations.svg"), svg);
    }
    Ok((
        f.alpha.abs() <= 1.0 && worst <= 25.0,
        format!("slope = {:.3} iterations/decade, max median = {worst}", f.alpha),
    ))
}

fn upsilon_contrast() -> Check {
    let spec = CampaignSpec {
        subjects: vec![Subject::UpsilonSolve],
        sizes: Some(SizeGrid {
            min: 3000,
            max: 30_000,
            count: 11,
        }),
        repetitions: 10,
        warmup: 1,
        seed: 7,
        ..Default::default()
    };
    let rows = campaign(&spec, "upsilon_samples.csv")?;
    let medians = median_per_case(&rows);
    let pts = points_for(&medians, Subject::UpsilonSolve);
    let f = fit_loglog(&pts).map_err(|e| e.to_string())?;
    let w = windowed_slopes(&pts, DEFAULT_WINDOW_DECADES, DEFAULT_STEP_DECADES).map_err(|e| e.to_string())?;
    let series = [Series {
        label: "UpsilonSolve".into(),
        points: pts,
        fit: Some(f.clone()),
    }];
    if let Ok(svg) = scatter_fit_svg(&series, "random matrix, p = 2", "n", "t (s)") {
        let _ = std::fs::write(out_dir().join("upsilon_scatter.svg"), svg);
    }
    let slopes: Vec<String> = w.iter().map(|s| format!("{:.2}", s.alpha)).collect();
    let ok = medians.len() == 11 && f.alpha >= 2.0 && f.r2 >= 0.95 && w.len() >= 2 && slopes_nondecreasing(&w);
    Ok((ok, format!("{}, window slopes [{}]", describe(&f), slopes.join(", "))))
}

fn nnz_structure() -> Check {
    let mut bad = Vec::new();
    for (p, phases) in [(1usize, "a"), (2, "ab"), (3, "abc")] {
        for m in [2usize, 10, 100] {
            let set: PhaseSet = phases.parse().map_err(|e: String| e)?;
            let net = generate_radial(&GeneratorSpec::uniform(m, set, 11)).map_err(|e| e.to_string())?;
            let sys = assemble(&net).map_err(|e| e.to_string())?;
            let expected = p * p * (3 * m - 2);
            if sys.y_full().nnz() != expected {
                bad.push(format!("p={p} m={m}: {} != {expected}", sys.y_full().nnz()));
            }
        }
    }
    Ok((bad.is_empty(), if bad.is_empty() { "9 of 9 fixtures exact".into() } else { bad.join("; ") }))
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn random_s(n: usize, scale: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5)) * scale)
        .collect()
}

fn network(nodes: usize, seed: u64) -> Result<(Network, YbusSystem), String> {
    let mut g = GeneratorSpec::new(2, seed);
    g.buses = g.buses_for_nodes(nodes);
    let net = generate_radial(&g).map_err(|e| e.to_string())?;
    let sys = assemble(&net).map_err(|e| e.to_string())?;
    Ok((net, sys))
}

/// Single-phase two-bus feeder with a 1 Ω base, so siemens equal per unit.
fn two_bus(y: Complex64, s_kva: Complex64) -> Result<Network, String> {
    let j = format!(
        r#"{{
        "buses": [{{"id": "s", "phases": "a", "nominal_kv": 1.0}}, {{"id": "l", "phases": "a", "nominal_kv": 1.0}}],
        "branches": [{{"from_bus": "s", "to_bus": "l", "phases": "a",
            "primitive_y": [[[{yr}, {yi}], [{nr}, {ni}]], [[{nr}, {ni}], [{yr}, {yi}]]]}}],
        "loads": [{{"bus": "l", "phase": "a", "kind": "constant_power", "s_nominal": [{sr}, {si}]}}],
        "source": {{"bus": "s", "voltage_per_phase": [[1.0, 0.0]], "base_kva": 1000.0}},
        "radial": true
    }}"#,
        yr = y.re,
        yi = y.im,
        nr = -y.re,
        ni = -y.im,
        sr = s_kva.re,
        si = s_kva.im
    );
    Network::from_json_str(&j).map_err(|e| e.to_string())
}

/// Root of `v·conj(v) − conj(v) + conj(s)/y = 0` with the larger magnitude,
/// from `|v|² − conj(v) + a = 0`, `a = conj(s)/y`.
fn quadratic_root(y: Complex64, s: Complex64) -> Complex64 {
    let a = s.conj() / y;
    // v = x + iy: imaginary part gives y = −Im a; real part x² − x + y² + Re a = 0
    let im = -a.im;
    let x = (1.0 + (1.0 - 4.0 * (im * im + a.re)).sqrt()) / 2.0;
    Complex64::new(x, im)
}

fn oracles() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) admittance loads against impedance loads folded into Ybus
    let (net, sys) = network(3000, 5)?;
    let y = NodalLoads::from_network(&net).as_admittance();
    let a = solve_constant_admittance(&sys, &y).map_err(|e| e.to_string())?;
    let zi = assemble(&net.with_load_kind(LoadKind::ConstantImpedance)).map_err(|e| e.to_string())?;
    let zero = vec![Complex64::new(0.0, 0.0); zi.n_load()];
    let b = solve_fixed_point(&zi, &zero, DEFAULT_TOL, DEFAULT_MAX_ITER, None).map_err(|e| e.to_string())?;
    let da = max_diff(&a.v_nodes, &b.v_nodes);
    ok &= da <= 1e-10;
    notes.push(format!("(a) {da:.1e}"));

    // (b) sparse against dense explicit fixed-point model
    let (net, sys) = network(1900, 6)?;
    let n = sys.n_load();
    let s = NodalLoads::from_network(&net).scaled(0.3).power;
    let opts = Default::default();
    let sparse = build_linearization(&sys, LinearizationKind::FixedPoint, None, &opts).map_err(|e| e.to_string())?;
    let dense = build_linearization(&sys, LinearizationKind::DenseExplicit, None, &opts).map_err(|e| e.to_string())?;
    let db = max_diff(
        &sparse.evaluate(&s).map_err(|e| e.to_string())?,
        &dense.evaluate(&s).map_err(|e| e.to_string())?,
    );
    ok &= db <= 1e-10 && n <= 2000;
    notes.push(format!("(b) {db:.1e} at n_L = {n}"));

    // (c) two-bus closed form
    let yb = Complex64::new(10.0, -20.0);
    let s_kva = Complex64::new(500.0, 100.0);
    let net = two_bus(yb, s_kva)?;
    let sys = assemble(&net).map_err(|e| e.to_string())?;
    let s = NodalLoads::from_network(&net).power;
    let sol = solve_fixed_point(&sys, &s, 1e-14, 500, None).map_err(|e| e.to_string())?;
    let dc = (sol.v_nodes[0] - quadratic_root(yb, s_kva / 1000.0)).norm();
    ok &= sol.converged && dc <= 1e-9;
    notes.push(format!("(c) {dc:.1e}"));

    // (d) Jacobian directional derivative against a forward difference
    let (net, sys) = network(600, 8)?;
    let s = NodalLoads::from_network(&net).scaled(0.3).power;
    let ds = random_s(sys.n_load(), 1.0 / sys.n_load() as f64, 4);
    let eps = 1e-6;
    let op = solve_fixed_point(&sys, &s, 1e-15, 1000, None).map_err(|e| e.to_string())?;
    let lin = build_linearization(&sys, LinearizationKind::ImplicitJacobian, Some(&op.v_nodes), &opts)
        .map_err(|e| e.to_string())?;
    let pert: Vec<Complex64> = s.iter().zip(&ds).map(|(a, b)| a + b * eps).collect();
    let moved = solve_fixed_point(&sys, &pert, 1e-15, 1000, Some(&op.v_nodes)).map_err(|e| e.to_string())?;
    let fd: Vec<Complex64> = moved.v_nodes.iter().zip(&op.v_nodes).map(|(a, b)| (a - b) / eps).collect();
    let dir: Vec<Complex64> = lin
        .evaluate(&ds)
        .map_err(|e| e.to_string())?
        .iter()
        .zip(lin.v0())
        .map(|(a, b)| a - b)
        .collect();
    let scale = dir.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dd = max_diff(&fd, &dir) / scale;
    ok &= op.converged && moved.converged && dd <= 1e-3;
    notes.push(format!("(d) {dd:.1e} relative"));

    Ok((ok, notes.join(", ")))
}

fn regression_truth() -> Check {
    let ns = [300.0f64, 1e3, 3e3, 1e4, 3e4, 1e5];
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [1.0, 2.0, 3.0] {
        let pts: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 4e-7 * n.powf(k))).collect();
        let f = fit_loglog(&pts).map_err(|e| e.to_string())?;
        ok &= (f.alpha - k).abs() <= 1e-9 && f.sigma <= 1e-9 && f.r2 == 1.0;
        notes.push(format!("k={k}: alpha-k = {:.1e}", f.alpha - k));
    }
    let r = FitReport::from_alpha_sigma(1.037, 0.014);
    let (lo, hi) = (r.ci95.0, r.ci95.1);
    ok &= format!("{lo:.4}") == "1.0096" && format!("{hi:.4}") == "1.0644";
    notes.push(format!("CI95 = ({lo:.4}, {hi:.4})"));
    Ok((ok, notes.join(", ")))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut line = |id: u32, name: &str, r: Check| {
        let (pass, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += !pass as u32;
        println!("{} {id}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };

    line(6, "nnz structure p^2(3m-2)", nnz_structure());
    line(7, "oracle equivalences", oracles());
    line(8, "regression unit truth", regression_truth());

    eprintln!("network sweep (3 subjects, 15 sizes, 10 runs each)");
    match network_sweep() {
        Ok(m) => {
            line(1, "Ybus solve scaling", sweep_criterion(&m, Subject::YbusSolve, 1.35, false));
            line(2, "fixed-point per-iteration scaling", sweep_criterion(&m, Subject::FixedPointPF, 1.35, true));
            line(3, "implicit Jacobian scaling", sweep_criterion(&m, Subject::ImplicitJacobianSolve, 1.45, false));
            line(5, "iteration flatness", iteration_flatness(&m));
        }
        Err(e) => {
            for (id, name) in [
                (1, "Ybus solve scaling"),
                (2, "fixed-point per-iteration scaling"),
                (3, "implicit Jacobian scaling"),
                (5, "iteration flatness"),
            ] {
                line(id, name, Err(e.clone()));
            }
        }
    }

    eprintln!("random matrix sweep (11 sizes, 10 runs each)");
    line(4, "random matrix super-quadratic contrast", upsilon_contrast());

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
