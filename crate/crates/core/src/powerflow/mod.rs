//! Power flow on the source-partitioned admittance system.
//!
//! Loads consume power: `s_j` is the complex power drawn at load node `j`,
//! so the current injected into the network there is `−conj(s_j / v_j)`.

mod linear;

pub use linear::{
    build_linearization, evaluate_linearization, JacobianSystem, Linearization,
    LinearizationKind, LinearizationOptions, DEFAULT_DENSE_CAP,
};

use crate::network::Network;
use crate::sparse::{lu_factorize, order_auto, LuFactors, Scalar, SparseError, SparseMatrix, DEFAULT_PIVOT_TOL};
use crate::ybus::YbusSystem;
use num_complex::Complex64;
use std::io::Write;
use std::time::Instant;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("voltage collapsed to zero at load node {node} (iteration {iteration})")]
    ZeroVoltage { node: usize, iteration: usize },
    #[error("iteration diverged to a non-finite voltage at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("expected {expected} load-node values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dense model needs {n} load nodes but the cap is {cap}")]
    DenseCap { n: usize, cap: usize },
    #[error("linearization voltage is zero at load node {0}")]
    ZeroLinearizationVoltage(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Wall-clock split of a solve. Ordering is counted with factorization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTimings {
    pub factor_seconds: f64,
    pub solve_seconds: Vec<f64>,
}

impl SolveTimings {
    pub fn total(&self) -> f64 {
        self.factor_seconds + self.solve_seconds.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Load-node voltages, per unit.
    pub v_nodes: Vec<Complex64>,
    pub iterations: usize,
    /// Relative voltage change of the last iteration.
    pub max_mismatch: f64,
    pub converged: bool,
    pub timings: SolveTimings,
}

impl PowerFlowSolution {
    /// Load-node voltages followed by the source voltages.
    pub fn full_voltage(&self, sys: &YbusSystem) -> Vec<Complex64> {
        let mut v = self.v_nodes.clone();
        v.extend_from_slice(sys.v_source());
        v
    }
}

/// Orders and factorizes a matrix, returning the factors and elapsed time.
pub fn factorize_timed<T: Scalar>(a: &SparseMatrix<T>) -> Result<(LuFactors<T>, f64), SparseError> {
    let start = Instant::now();
    let ord = order_auto(a)?;
    let f = lu_factorize(a, &ord, DEFAULT_PIVOT_TOL)?;
    Ok((f, start.elapsed().as_secs_f64()))
}

fn check_len(expected: usize, found: usize) -> Result<(), PowerFlowError> {
    if expected == found {
        Ok(())
    } else {
        Err(PowerFlowError::DimensionMismatch { expected, found })
    }
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// No-load voltage `v0 = −y_LL⁻¹ y_LS v_S`.
pub fn no_load_voltage(sys: &YbusSystem) -> Result<Vec<Complex64>, PowerFlowError> {
    let (f, _) = factorize_timed(sys.y_ll())?;
    let rhs: Vec<Complex64> = sys.source_injection().iter().map(|c| -c).collect();
    Ok(f.solve(&rhs)?)
}

/// Fixed-point iteration `v ← y_LL \ (−conj(s/v) − y_LS v_S)`.
///
/// `y_LL` is factorized once. Stops when `‖Δv‖∞ / ‖v‖∞ ≤ tol`; after
/// `max_iter` iterations the last iterate is returned with
/// `converged = false`. Without `v_init` the iteration starts from `v0`.
pub fn solve_fixed_point(
    sys: &YbusSystem,
    s_load: &[Complex64],
    tol: f64,
    max_iter: usize,
    v_init: Option<&[Complex64]>,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = sys.n_load();
    check_len(n, s_load.len())?;
    let (factors, factor_seconds) = factorize_timed(sys.y_ll())?;
    let src = sys.source_injection();
    let mut work = vec![Complex64::new(0.0, 0.0); n];

    let mut v = match v_init {
        Some(v) => {
            check_len(n, v.len())?;
            v.to_vec()
        }
        None => {
            let mut v0: Vec<Complex64> = src.iter().map(|c| -c).collect();
            factors.solve_in_place(&mut v0, &mut work)?;
            v0
        }
    };

    let mut timings = SolveTimings {
        factor_seconds,
        solve_seconds: Vec::new(),
    };
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    let mut mismatch = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let start = Instant::now();
        for j in 0..n {
            if v[j].norm_sqr() == 0.0 {
                return Err(PowerFlowError::ZeroVoltage { node: j, iteration: iterations });
            }
            next[j] = -(s_load[j] / v[j]).conj() - src[j];
        }
        factors.solve_in_place(&mut next, &mut work)?;
        let mut dv: f64 = 0.0;
        for j in 0..n {
            dv = dv.max((next[j] - v[j]).norm());
        }
        std::mem::swap(&mut v, &mut next);
        mismatch = dv / max_abs(&v);
        timings.solve_seconds.push(start.elapsed().as_secs_f64());
        if !mismatch.is_finite() {
            return Err(PowerFlowError::Diverged { iteration: iterations });
        }
        if mismatch <= tol {
            break;
        }
    }
    Ok(PowerFlowSolution {
        v_nodes: v,
        iterations,
        converged: mismatch <= tol,
        max_mismatch: mismatch,
        timings,
    })
}

/// One factorization and solve with loads modelled as shunt admittances
/// added to the diagonal of `y_LL`.
pub fn solve_constant_admittance(
    sys: &YbusSystem,
    load_y: &[Complex64],
) -> Result<PowerFlowSolution, PowerFlowError> {
    check_len(sys.n_load(), load_y.len())?;
    let y = sys.y_ll().add_diagonal(load_y)?;
    let (factors, factor_seconds) = factorize_timed(&y)?;
    let start = Instant::now();
    let rhs: Vec<Complex64> = sys.source_injection().iter().map(|c| -c).collect();
    let v = factors.solve(&rhs)?;
    let solve = start.elapsed().as_secs_f64();
    Ok(PowerFlowSolution {
        v_nodes: v,
        iterations: 1,
        max_mismatch: 0.0,
        converged: true,
        timings: SolveTimings {
            factor_seconds,
            solve_seconds: vec![solve],
        },
    })
}

/// `‖diag(conj v)(y_LL v + y_LS v_S) + conj(s)‖∞`, zero at an exact solution.
pub fn power_residual(
    sys: &YbusSystem,
    v: &[Complex64],
    s_load: &[Complex64],
) -> Result<f64, PowerFlowError> {
    check_len(sys.n_load(), v.len())?;
    check_len(sys.n_load(), s_load.len())?;
    let i = sys.y_ll().mul_vec(v)?;
    let src = sys.source_injection();
    Ok((0..v.len())
        .map(|j| (v[j].conj() * (i[j] + src[j]) + s_load[j].conj()).norm())
        .fold(0.0, f64::max))
}

/// Writes node voltages as CSV, load nodes then source nodes.
///
/// Magnitudes are per unit; angles in degrees.
pub fn write_solution_csv<W: Write>(
    w: W,
    net: &Network,
    sys: &YbusSystem,
    sol: &PowerFlowSolution,
) -> Result<(), PowerFlowError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["node_id", "bus", "phase", "v_re", "v_im", "v_mag_pu", "v_ang_deg"])?;
    for (k, (v, &(bus, phase))) in sol.full_voltage(sys).iter().zip(net.nodes()).enumerate() {
        out.write_record([
            k.to_string(),
            net.buses()[bus].id.clone(),
            phase.letter().to_string(),
            format!("{:e}", v.re),
            format!("{:e}", v.im),
            format!("{}", v.norm()),
            format!("{}", v.arg().to_degrees()),
        ])?;
    }
    out.flush()?;
    Ok(())
}
