use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pfscale::bench::{read_samples_csv, run_campaign, BenchSample, CampaignSpec, SampleWriter, SizeGrid, Subject};
use pfscale::network::{load_network, save_network, generate_radial, PhaseSet};
use pfscale::regression::{
    fit_loglog, median_per_case, summarize, write_table_csv, write_table_text, CaseMedian, SummaryRow,
};
use pfscale::svg::{iterations_svg, scatter_fit_svg, spy_svg, Series};
use pfscale::ybus::{assemble, equivalent_p, generate_upsilon, UpsilonSpec};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Scaling benchmarks for sparse power-flow solves.
#[derive(Parser, Debug)]
#[command(name = "pfscale", version)]
struct Cli {
    /// Base seed for generated networks and matrices.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Format of tables and manifests.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a family of random radial networks and a manifest.
    Generate(GenerateArgs),
    /// Run a timing campaign and write samples.
    Bench(BenchArgs),
    /// Fit the complexity coefficient per subject.
    Fit(FitArgs),
    /// Write SVG figures.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Node count range `MIN..MAX`, log-spaced.
    #[arg(long, value_parser = parse_range)]
    sizes: (usize, usize),
    #[arg(long)]
    count: usize,
    /// One-, two- and three-phase bus fractions, e.g. `0.6,0.1,0.3`.
    #[arg(long, value_parser = parse_mix)]
    phase_mix: Option<[f64; 3]>,
    /// Give every bus these phases, e.g. `abc`.
    #[arg(long)]
    uniform_phases: Option<PhaseSet>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Campaign spec JSON; other campaign flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Subjects: fixed-point, const-admittance, jacobian, ybus, upsilon, all.
    #[arg(long = "subject", value_parser = parse_subjects)]
    subjects: Vec<Vec<Subject>>,
    /// Size range `MIN..MAX` for generated cases.
    #[arg(long, value_parser = parse_range)]
    sizes: Option<(usize, usize)>,
    /// Number of log-spaced sizes.
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Network files, or directories of them, instead of generated networks.
    #[arg(long)]
    networks: Vec<PathBuf>,
    /// Phases per branch for the random matrix.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Load step `FROM:TO` as fractions of nominal.
    #[arg(long, value_parser = parse_step)]
    step: Option<(f64, f64)>,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, value_parser = parse_mix)]
    phase_mix: Option<[f64; 3]>,
    /// Output file; defaults to `samples.csv` or `samples.json` in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Sample CSV written by `bench`.
    #[arg(long)]
    samples: PathBuf,
    /// Restrict to these subjects.
    #[arg(long = "subject", value_parser = parse_subjects)]
    subjects: Vec<Vec<Subject>>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(subcommand)]
    kind: PlotKind,
}

#[derive(Subcommand, Debug)]
enum PlotKind {
    /// Sparsity pattern of a network's Ybus or of a random matrix.
    Spy {
        #[arg(long, conflicts_with = "upsilon", required_unless_present = "upsilon")]
        network: Option<PathBuf>,
        /// Size of a random matrix to draw instead.
        #[arg(long)]
        upsilon: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Median time against n on log-log axes with fitted lines.
    Scatter {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long = "subject", value_parser = parse_subjects)]
        subjects: Vec<Vec<Subject>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Median iteration counts against n.
    Iterations {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected MIN..MAX, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a < 2 || a > b {
        return Err(format!("bad range {s:?}"));
    }
    Ok((a, b))
}

fn parse_step(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected FROM:TO, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(a >= 0.0 && b >= 0.0) {
        return Err(format!("bad step {s:?}"));
    }
    Ok((a, b))
}

fn parse_mix(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected three fractions, got {s:?}"))
}

fn parse_subjects(s: &str) -> Result<Vec<Subject>, String> {
    let one = |x: &str| -> Result<Vec<Subject>, String> {
        Ok(match x.trim().to_ascii_lowercase().as_str() {
            "all" => Subject::ALL.to_vec(),
            "fixed-point" | "fixedpoint" => vec![Subject::FixedPointPF],
            "const-admittance" | "admittance" => vec![Subject::ConstAdmittancePF],
            "jacobian" | "implicit-jacobian" => vec![Subject::ImplicitJacobianSolve],
            "ybus" => vec![Subject::YbusSolve],
            "upsilon" => vec![Subject::UpsilonSolve],
            other => vec![other.parse::<Subject>()?],
        })
    };
    let mut out = Vec::new();
    for x in s.split(',') {
        out.extend(one(x)?);
    }
    Ok(out)
}

fn flatten(subjects: &[Vec<Subject>]) -> Vec<Subject> {
    let mut v: Vec<Subject> = subjects.iter().flatten().copied().collect();
    v.sort();
    v.dedup();
    v
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Plot(a) => plot(cli, a),
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<ExitCode> {
    let campaign = CampaignSpec {
        phase_mix: a.phase_mix,
        ..Default::default()
    };
    let sizes = if a.count == 0 {
        Vec::new()
    } else {
        SizeGrid {
            min: a.sizes.0,
            max: a.sizes.1,
            count: a.count,
        }
        .values()
    };
    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let seed = cli.seed.wrapping_add(i as u64);
        let mut g = campaign.generator(n, seed);
        if let Some(p) = a.uniform_phases {
            g.uniform_phases = Some(p);
            g.buses = g.buses_for_nodes(n);
        }
        let net = generate_radial(&g)?;
        let sys = assemble(&net)?;
        let file = format!("network_{i:03}.json");
        save_network(&net, cli.out_dir.join(&file))?;
        rows.push(ManifestRow {
            file,
            n: net.node_count(),
            buses: net.bus_count(),
            nnz: sys.y_full().nnz(),
            equivalent_p: equivalent_p(sys.y_full(), sys.n()),
            seed,
        });
    }
    rows.sort_by(|x, y| (x.n, &x.file).cmp(&(y.n, &y.file)));
    write_manifest(cli, &rows)?;
    eprintln!("wrote {} networks to {}", rows.len(), cli.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

struct ManifestRow {
    file: String,
    n: usize,
    buses: usize,
    nnz: usize,
    equivalent_p: f64,
    seed: u64,
}

fn write_manifest(cli: &Cli, rows: &[ManifestRow]) -> Result<()> {
    match cli.format {
        Format::Csv => {
            let mut w = BufWriter::new(File::create(cli.out_dir.join("manifest.csv"))?);
            writeln!(w, "file,n,buses,nnz,equivalent_p,seed")?;
            for r in rows {
                writeln!(w, "{},{},{},{},{:.6},{}", r.file, r.n, r.buses, r.nnz, r.equivalent_p, r.seed)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let v: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "file": r.file, "n": r.n, "buses": r.buses, "nnz": r.nnz,
                        "equivalent_p": r.equivalent_p, "seed": r.seed,
                    })
                })
                .collect();
            fs::write(cli.out_dir.join("manifest.json"), serde_json::to_string_pretty(&v)? + "\n")?;
        }
    }
    Ok(())
}

fn network_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|x| x == "json")
                        && !f.file_stem().is_some_and(|s| s.to_string_lossy().starts_with("manifest"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("network file {} does not exist", p.display());
        }
    }
    Ok(out)
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<ExitCode> {
    let spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            CampaignSpec::from_json_str(&text)?
        }
        None => {
            let mut spec = CampaignSpec {
                subjects: flatten(&a.subjects),
                sizes: a.sizes.map(|(min, max)| SizeGrid {
                    min,
                    max,
                    count: a.points,
                }),
                networks: network_files(&a.networks)?,
                repetitions: a.repetitions,
                warmup: a.warmup,
                seed: cli.seed,
                phase_mix: a.phase_mix,
                ..Default::default()
            };
            spec.params.p = a.p;
            if let Some((from, to)) = a.step {
                spec.params.load_start = from;
                spec.params.load_step = to;
            }
            spec
        }
    };
    let default_name = match cli.format {
        Format::Csv => "samples.csv",
        Format::Json => "samples.json",
    };
    let path = a.output.clone().unwrap_or_else(|| cli.out_dir.join(default_name));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut failed = 0usize;
    let rows = match cli.format {
        Format::Csv => {
            let mut w = SampleWriter::new(BufWriter::new(file))?;
            run_campaign(&spec, |s| {
                failed += s.failed as usize;
                w.write(s)
            })?
        }
        Format::Json => {
            let mut all: Vec<BenchSample> = Vec::new();
            let rows = run_campaign(&spec, |s| {
                failed += s.failed as usize;
                all.push(s.clone());
                Ok(())
            })?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &all)?;
            w.write_all(b"\n")?;
            w.flush()?;
            rows
        }
    };
    eprintln!("wrote {rows} rows to {}", path.display());
    if failed > 0 {
        eprintln!("{failed} case(s) failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn read_samples(path: &Path) -> Result<Vec<BenchSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    if path.extension().is_some_and(|x| x == "json") {
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    } else {
        Ok(read_samples_csv(file)?)
    }
}

fn medians_for(path: &Path, subjects: &[Vec<Subject>]) -> Result<Vec<CaseMedian>> {
    let wanted = flatten(subjects);
    let mut m = median_per_case(&read_samples(path)?);
    if !wanted.is_empty() {
        m.retain(|c| wanted.contains(&c.subject));
    }
    Ok(m)
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<ExitCode> {
    let medians = medians_for(&a.samples, &a.subjects)?;
    if medians.is_empty() {
        bail!("no usable cases in {}", a.samples.display());
    }
    let mut rows: Vec<SummaryRow> = Vec::new();
    for r in summarize(&medians) {
        match r {
            Ok(row) => rows.push(row),
            Err((s, e)) => bail!("{s}: {e}"),
        }
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    fs::write(cli.out_dir.join("fit.json"), &json)?;
    let stdout = std::io::stdout();
    match cli.format {
        Format::Csv => {
            write_table_text(stdout.lock(), &rows)?;
            write_table_csv(File::create(cli.out_dir.join("fit_table.csv"))?, &rows)?;
        }
        Format::Json => print!("{json}"),
    }
    for r in &rows {
        let f = &r.report;
        eprintln!(
            "{}: CI95 [{:.4}, {:.4}]; linear {}, cubic {}",
            r.subject,
            f.ci95.0,
            f.ci95.1,
            if r.rejects_linear { "rejected" } else { "not rejected" },
            if r.rejects_cubic { "rejected" } else { "not rejected" },
        );
        if let Some(w) = &r.warning {
            let slopes: Vec<String> = r.window_slopes.iter().map(|s| format!("{:.2}", s.alpha)).collect();
            eprintln!("warning: {}: {w} (window slopes {})", r.subject, slopes.join(", "));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn plot(cli: &Cli, a: &PlotArgs) -> Result<ExitCode> {
    let (svg, default_name) = match &a.kind {
        PlotKind::Spy {
            network,
            upsilon,
            p,
            output,
        } => {
            let (svg, name) = match (network, upsilon) {
                (Some(path), _) => {
                    let net = load_network(path).with_context(|| format!("reading {}", path.display()))?;
                    let sys = assemble(&net)?;
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    (spy_svg(sys.y_full(), &format!("Ybus {stem}")), format!("spy_{stem}.svg"))
                }
                (None, Some(n)) => {
                    let u = generate_upsilon(&UpsilonSpec::new(*n, *p, cli.seed))?;
                    (spy_svg(&u, &format!("random matrix n = {n}, p = {p}")), format!("spy_upsilon_{n}.svg"))
                }
                (None, None) => bail!("give --network or --upsilon"),
            };
            return write_svg(&svg, output.clone().unwrap_or_else(|| cli.out_dir.join(name)));
        }
        PlotKind::Scatter {
            samples,
            subjects,
            output,
        } => {
            let medians = medians_for(samples, subjects)?;
            let mut series = Vec::new();
            for s in flatten(&[medians.iter().map(|m| m.subject).collect()]) {
                let points: Vec<(f64, f64)> = medians
                    .iter()
                    .filter(|m| m.subject == s)
                    .map(|m| (m.n as f64, m.t))
                    .collect();
                let fit = fit_loglog(&points).with_context(|| format!("fitting {s}"))?;
                series.push(Series {
                    label: s.name().to_string(),
                    points,
                    fit: Some(fit),
                });
            }
            let svg = scatter_fit_svg(&series, "median time against size", "nodes n", "t (s)")?;
            (svg, output.clone().unwrap_or_else(|| cli.out_dir.join("scatter_fit.svg")))
        }
        PlotKind::Iterations { samples, output } => {
            let medians = medians_for(samples, &[vec![Subject::FixedPointPF]])?;
            let points = medians.iter().filter_map(|m| m.iterations.map(|k| (m.n as f64, k))).collect();
            let series = [Series {
                label: Subject::FixedPointPF.name().to_string(),
                points,
                fit: None,
            }];
            let svg = iterations_svg(&series, "fixed-point iterations")?;
            (svg, output.clone().unwrap_or_else(|| cli.out_dir.join("iterations.svg")))
        }
    };
    write_svg(&svg, default_name)
}

fn write_svg(svg: &str, path: PathBuf) -> Result<ExitCode> {
    fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
