//! Timed campaigns: median-of-ten measurements over size sweeps.
//!
//! Only factorization (ordering included), solves and fixed-point iterations
//! are timed. Network generation, Ybus assembly, Jacobian assembly, warm
//! states and random matrix draws happen before the clock starts.

use crate::network::{load_network, generate_radial, GeneratorSpec, Network, NetworkError};
use crate::powerflow::{
    factorize_timed, solve_constant_admittance, solve_fixed_point, JacobianSystem,
    PowerFlowError, SolveTimings,
};
use crate::sparse::{Scalar, SparseError, SparseMatrix};
use crate::ybus::{assemble, generate_upsilon, NodalLoads, UpsilonSpec, YbusError, YbusSystem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

/// Medians below this are re-measured with an inner loop.
pub const INNER_LOOP_THRESHOLD: f64 = 1e-4;
pub const INNER_LOOP_COUNT: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ybus(#[from] YbusError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("fixed point did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subject {
    FixedPointPF,
    ConstAdmittancePF,
    ImplicitJacobianSolve,
    YbusSolve,
    UpsilonSolve,
}

impl Subject {
    pub const ALL: [Subject; 5] = [
        Subject::FixedPointPF,
        Subject::ConstAdmittancePF,
        Subject::ImplicitJacobianSolve,
        Subject::YbusSolve,
        Subject::UpsilonSolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subject::FixedPointPF => "FixedPointPF",
            Subject::ConstAdmittancePF => "ConstAdmittancePF",
            Subject::ImplicitJacobianSolve => "ImplicitJacobianSolve",
            Subject::YbusSolve => "YbusSolve",
            Subject::UpsilonSolve => "UpsilonSolve",
        }
    }

    /// Whether `t` is reported per iteration.
    pub fn per_iteration(self) -> bool {
        self == Subject::FixedPointPF
    }

    pub fn needs_network(self) -> bool {
        self != Subject::UpsilonSolve
    }
}

impl std::fmt::Display for Subject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Subject {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Subject::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown subject {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseParams {
    pub seed: u64,
    /// Phases per branch for the random matrix.
    pub p: f64,
    /// Warm-state loading for the fixed-point load step.
    pub load_start: f64,
    /// Loading after the step; also the operating point for other subjects.
    pub load_step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self {
            seed: 0,
            p: 2.0,
            load_start: 0.6,
            load_step: 0.3,
            tol: crate::powerflow::DEFAULT_TOL,
            max_iter: crate::powerflow::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub case_id: String,
    pub subject: Subject,
    pub n: usize,
    pub nnz: usize,
    pub params: CaseParams,
}

/// Prepared, untimed inputs of a case.
#[derive(Debug, Clone)]
pub enum CaseInput {
    Network { net: Network, sys: YbusSystem },
    Upsilon(UpsilonSpec),
}

impl CaseInput {
    pub fn from_network(net: Network) -> Result<Self, BenchError> {
        let sys = assemble(&net)?;
        Ok(CaseInput::Network { net, sys })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub case_id: String,
    pub subject: Subject,
    pub n: usize,
    pub nnz: usize,
    pub run_index: usize,
    /// Absent for failed cases.
    pub t_seconds: Option<f64>,
    pub iterations: Option<usize>,
    pub failed: bool,
    /// Runs averaged into `t_seconds`; not part of the CSV.
    #[serde(skip)]
    pub inner_loop: usize,
    /// Phase timers summing to `t_seconds`; not part of the CSV.
    #[serde(skip)]
    pub phases: SolveTimings,
}

/// Builds the case descriptor and prepared input for one subject.
pub fn describe_case(subject: Subject, input: &CaseInput, params: &CaseParams) -> Result<BenchCase, BenchError> {
    let (n, nnz) = match (subject, input) {
        (Subject::UpsilonSolve, CaseInput::Upsilon(spec)) => (spec.n, spec.expected_nnz()),
        (Subject::UpsilonSolve, _) | (_, CaseInput::Upsilon(_)) => {
            return Err(BenchError::InvalidSpec(format!("{subject} does not match its input")))
        }
        (Subject::ImplicitJacobianSolve, CaseInput::Network { sys, .. }) => {
            // n stays the network size; nnz counts the 2n_L block system,
            // four entries per y_LL entry
            (sys.n(), 4 * sys.y_ll().nnz())
        }
        (Subject::YbusSolve, CaseInput::Network { sys, .. }) => (sys.n(), sys.y_ll().nnz()),
        (_, CaseInput::Network { sys, .. }) => (sys.n(), sys.y_full().nnz()),
    };
    Ok(BenchCase {
        case_id: format!("{}-n{}-s{}", subject.name(), n, params.seed),
        subject,
        n,
        nnz,
        params: params.clone(),
    })
}

fn random_real(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// One measured execution: returns phase timers and iteration count.
type RunFn<'a> = Box<dyn FnMut(usize) -> Result<(SolveTimings, usize), BenchError> + 'a>;

fn single_solve<T: Scalar>(a: &SparseMatrix<T>, b: &[T]) -> Result<(SolveTimings, usize), BenchError> {
    let (f, factor_seconds) = factorize_timed(a)?;
    let start = Instant::now();
    let x = f.solve(b)?;
    let solve = start.elapsed().as_secs_f64();
    std::hint::black_box(&x);
    Ok((
        SolveTimings {
            factor_seconds,
            solve_seconds: vec![solve],
        },
        1,
    ))
}

fn prepare<'a>(case: &'a BenchCase, input: &'a CaseInput) -> Result<RunFn<'a>, BenchError> {
    let p = &case.params;
    match (case.subject, input) {
        (Subject::UpsilonSolve, CaseInput::Upsilon(spec)) => {
            let b = random_real(spec.n, p.seed);
            Ok(Box::new(move |run| {
                let mut s = spec.clone();
                s.seed = spec.seed.wrapping_add(run as u64);
                let u = generate_upsilon(&s)?;
                single_solve(&u, &b)
            }))
        }
        (Subject::YbusSolve, CaseInput::Network { sys, .. }) => {
            let b = random_complex(sys.n_load(), p.seed);
            Ok(Box::new(move |_| single_solve(sys.y_ll(), &b)))
        }
        (Subject::ConstAdmittancePF, CaseInput::Network { net, sys }) => {
            let y = NodalLoads::from_network(net).scaled(p.load_step).as_admittance();
            Ok(Box::new(move |_| {
                let sol = solve_constant_admittance(sys, &y)?;
                Ok((sol.timings, 1))
            }))
        }
        (Subject::FixedPointPF, CaseInput::Network { net, sys }) => {
            let nominal = NodalLoads::from_network(net);
            let start = nominal.scaled(p.load_start).power;
            let step = nominal.scaled(p.load_step).power;
            let warm = solve_fixed_point(sys, &start, p.tol, p.max_iter, None)?;
            if !warm.converged {
                return Err(BenchError::NotConverged(p.max_iter));
            }
            let v_warm = warm.v_nodes;
            Ok(Box::new(move |_| {
                let sol = solve_fixed_point(sys, &step, p.tol, p.max_iter, Some(&v_warm))?;
                if !sol.converged {
                    return Err(BenchError::NotConverged(p.max_iter));
                }
                Ok((sol.timings, sol.iterations))
            }))
        }
        (Subject::ImplicitJacobianSolve, CaseInput::Network { net, sys }) => {
            let s = NodalLoads::from_network(net).scaled(p.load_step).power;
            let op = solve_fixed_point(sys, &s, p.tol, p.max_iter, None)?;
            if !op.converged {
                return Err(BenchError::NotConverged(p.max_iter));
            }
            let jac = JacobianSystem::build(sys, &op.v_nodes)?;
            let b = random_real(2 * sys.n_load(), p.seed);
            Ok(Box::new(move |_| single_solve(jac.s_blocks(), &b)))
        }
        _ => Err(BenchError::InvalidSpec(format!("{} does not match its input", case.subject))),
    }
}

fn failed_row(case: &BenchCase) -> BenchSample {
    BenchSample {
        case_id: case.case_id.clone(),
        subject: case.subject,
        n: case.n,
        nnz: case.nnz,
        run_index: 0,
        t_seconds: None,
        iterations: None,
        failed: true,
        inner_loop: 0,
        phases: SolveTimings::default(),
    }
}

fn measure(run: &mut RunFn<'_>, run_index: usize, inner: usize) -> Result<(SolveTimings, usize), BenchError> {
    let mut acc = SolveTimings::default();
    let mut iterations = 0;
    let mut solve_total = 0.0;
    for _ in 0..inner {
        let (t, it) = run(run_index)?;
        acc.factor_seconds += t.factor_seconds;
        solve_total += t.solve_seconds.iter().sum::<f64>();
        iterations = it;
    }
    acc.factor_seconds /= inner as f64;
    acc.solve_seconds = vec![solve_total / inner as f64];
    Ok((acc, iterations))
}

/// Runs one case: `warmup` discarded executions, then `repetitions` timed
/// ones. A solver failure yields a single flagged row.
pub fn run_case(case: &BenchCase, input: &CaseInput, repetitions: usize, warmup: usize) -> Vec<BenchSample> {
    match run_case_inner(case, input, repetitions, warmup) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("case {} failed: {e}", case.case_id);
            vec![failed_row(case)]
        }
    }
}

fn run_case_inner(
    case: &BenchCase,
    input: &CaseInput,
    repetitions: usize,
    warmup: usize,
) -> Result<Vec<BenchSample>, BenchError> {
    let mut run = prepare(case, input)?;
    for _ in 0..warmup {
        run(0)?;
    }
    let mut inner = 1;
    let mut samples = timed_runs(case, &mut run, repetitions, inner)?;
    let mut t: Vec<f64> = samples.iter().filter_map(|s| s.t_seconds).collect();
    t.sort_by(f64::total_cmp);
    if t.get((t.len().max(1) - 1) / 2).is_some_and(|&m| m < INNER_LOOP_THRESHOLD) {
        inner = INNER_LOOP_COUNT;
        samples = timed_runs(case, &mut run, repetitions, inner)?;
    }
    Ok(samples)
}

fn timed_runs(
    case: &BenchCase,
    run: &mut RunFn<'_>,
    repetitions: usize,
    inner: usize,
) -> Result<Vec<BenchSample>, BenchError> {
    (0..repetitions)
        .map(|k| {
            let (phases, iterations) = measure(run, k, inner)?;
            // guard against a zero reading from a coarse clock
            let t = phases.total().max(f64::MIN_POSITIVE);
            Ok(BenchSample {
                case_id: case.case_id.clone(),
                subject: case.subject,
                n: case.n,
                nnz: case.nnz,
                run_index: k,
                t_seconds: Some(t),
                iterations: Some(iterations),
                failed: false,
                inner_loop: inner,
                phases,
            })
        })
        .collect()
}

/// Log-spaced sizes, rounded and deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeGrid {
    pub min: usize,
    pub max: usize,
    pub count: usize,
}

impl SizeGrid {
    pub fn values(&self) -> Vec<usize> {
        if self.count <= 1 || self.min == self.max {
            return vec![self.min];
        }
        let (lo, hi) = ((self.min as f64).ln(), (self.max as f64).ln());
        let mut v: Vec<usize> = (0..self.count)
            .map(|i| (lo + (hi - lo) * i as f64 / (self.count - 1) as f64).exp().round() as usize)
            .collect();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSpec {
    pub subjects: Vec<Subject>,
    /// Target node counts for generated networks and random matrices.
    pub sizes: Option<SizeGrid>,
    /// Network files used instead of generated networks.
    pub networks: Vec<PathBuf>,
    pub repetitions: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Bus phase fractions for generated networks.
    pub phase_mix: Option<[f64; 3]>,
    pub params: CaseParams,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            subjects: Vec::new(),
            sizes: None,
            networks: Vec::new(),
            repetitions: 10,
            warmup: 1,
            seed: 0,
            phase_mix: None,
            params: CaseParams::default(),
        }
    }
}

impl CampaignSpec {
    pub fn from_json_str(s: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(s)?)
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::InvalidSpec("repetitions must be positive".into()));
        }
        if let Some(g) = &self.sizes {
            if g.min < 2 || g.min > g.max || g.count == 0 {
                return Err(BenchError::InvalidSpec(format!("bad size grid {g:?}")));
            }
        }
        let network_subjects = self.subjects.iter().any(|s| s.needs_network());
        if network_subjects && self.sizes.is_none() && self.networks.is_empty() {
            return Err(BenchError::InvalidSpec("network subjects need sizes or network files".into()));
        }
        if self.subjects.contains(&Subject::UpsilonSolve) && self.sizes.is_none() {
            return Err(BenchError::InvalidSpec("UpsilonSolve needs a size grid".into()));
        }
        Ok(())
    }

    /// Generator for a network of about `nodes` nodes.
    pub fn generator(&self, nodes: usize, seed: u64) -> GeneratorSpec {
        let mut g = GeneratorSpec::new(2, seed);
        if let Some(mix) = self.phase_mix {
            g.phase_mix = mix;
        }
        g.buses = g.buses_for_nodes(nodes);
        g
    }
}

/// Runs every case in ascending `n`, passing each sample to `sink` as soon
/// as its case completes.
pub fn run_campaign<F>(spec: &CampaignSpec, mut sink: F) -> Result<usize, BenchError>
where
    F: FnMut(&BenchSample) -> Result<(), BenchError>,
{
    spec.validate()?;
    let mut cases: Vec<(usize, Subject, u64, Source)> = Vec::new();
    let network_subjects: Vec<Subject> = spec.subjects.iter().copied().filter(|s| s.needs_network()).collect();

    enum Source {
        Generated(usize),
        File(PathBuf),
        Upsilon(usize),
    }

    if !network_subjects.is_empty() {
        if spec.networks.is_empty() {
            for (i, n) in spec.sizes.as_ref().map(SizeGrid::values).unwrap_or_default().into_iter().enumerate() {
                let seed = spec.seed.wrapping_add(i as u64);
                for &s in &network_subjects {
                    cases.push((n, s, seed, Source::Generated(n)));
                }
            }
        } else {
            // node counts are only known after loading; read each file once
            for path in &spec.networks {
                let n = load_network(path)?.node_count();
                for &s in &network_subjects {
                    cases.push((n, s, spec.seed, Source::File(path.clone())));
                }
            }
        }
    }
    if spec.subjects.contains(&Subject::UpsilonSolve) {
        for (i, n) in spec.sizes.as_ref().map(SizeGrid::values).unwrap_or_default().into_iter().enumerate() {
            cases.push((n, Subject::UpsilonSolve, spec.seed.wrapping_add(i as u64), Source::Upsilon(n)));
        }
    }
    cases.sort_by_key(|c| (c.0, c.1));

    let mut rows = 0;
    let mut cached: Option<(u64, usize, CaseInput)> = None;
    for (n, subject, seed, source) in cases {
        let params = CaseParams {
            seed,
            ..spec.params.clone()
        };
        let key = (seed, n);
        let input = match source {
            Source::Upsilon(n) => CaseInput::Upsilon(UpsilonSpec::new(n, params.p, seed)),
            Source::Generated(_) | Source::File(_) => {
                if cached.as_ref().map(|c| (c.0, c.1)) != Some(key) {
                    let net = match &source {
                        Source::Generated(n) => generate_radial(&spec.generator(*n, seed))?,
                        Source::File(p) => load_network(p)?,
                        Source::Upsilon(_) => unreachable!(),
                    };
                    cached = Some((seed, n, CaseInput::from_network(net)?));
                }
                cached.as_ref().expect("just filled").2.clone()
            }
        };
        let case = describe_case(subject, &input, &params)?;
        let samples = run_case(&case, &input, spec.repetitions, spec.warmup);
        if let Some(s) = samples.first().filter(|s| s.inner_loop > 1) {
            eprintln!("case {}: median below 100 us, averaged over {} inner runs", s.case_id, s.inner_loop);
        }
        for s in &samples {
            sink(s)?;
            rows += 1;
        }
    }
    Ok(rows)
}

/// Streams samples as CSV with the fixed header.
pub struct SampleWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SampleWriter<W> {
    pub fn new(w: W) -> Result<Self, BenchError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(["case_id", "subject", "n", "nnz", "run_index", "t_seconds", "iterations", "failed"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &BenchSample) -> Result<(), BenchError> {
        self.inner.serialize(s)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<BenchSample>, BenchError> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<Result<Vec<BenchSample>, _>>()?)
}
