//! Bus admittance matrix assembly and the random admittance-like contrast
//! matrix.
//!
//! All quantities are per unit on the network's single-phase power base and
//! each bus's line-to-ground nominal voltage.

use crate::network::{LoadKind, Network, NetworkError};
use crate::sparse::{SparseError, SparseMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

#[derive(Debug, thiserror::Error)]
pub enum YbusError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("invalid admittance-like matrix spec: {0}")]
    InvalidUpsilon(String),
}

/// Assembled admittance matrix, partitioned into load nodes `L = 0..n_L`
/// and source nodes `S = n_L..n`.
#[derive(Debug, Clone)]
pub struct YbusSystem {
    y_full: SparseMatrix<Complex64>,
    y_ll: SparseMatrix<Complex64>,
    y_ls: SparseMatrix<Complex64>,
    v_source: Vec<Complex64>,
    n_load: usize,
}

impl YbusSystem {
    pub fn y_full(&self) -> &SparseMatrix<Complex64> {
        &self.y_full
    }

    pub fn y_ll(&self) -> &SparseMatrix<Complex64> {
        &self.y_ll
    }

    pub fn y_ls(&self) -> &SparseMatrix<Complex64> {
        &self.y_ls
    }

    pub fn v_source(&self) -> &[Complex64] {
        &self.v_source
    }

    /// Total node count `n`.
    pub fn n(&self) -> usize {
        self.y_full.nrows()
    }

    pub fn n_load(&self) -> usize {
        self.n_load
    }

    /// Source node ordinals.
    pub fn source_nodes(&self) -> std::ops::Range<usize> {
        self.n_load..self.n()
    }

    /// `Y_LS · v_S`, the source contribution to load-node currents.
    pub fn source_injection(&self) -> Vec<Complex64> {
        self.y_ls
            .mul_vec(&self.v_source)
            .expect("partition dimensions agree")
    }
}

/// Builds `Ybus`. Constant-impedance loads are folded onto the diagonal;
/// constant-power loads are left to [`NodalLoads`].
pub fn assemble(net: &Network) -> Result<YbusSystem, YbusError> {
    let n = net.node_count();
    let n_load = net.load_node_count();
    let base_kva = net.source().base_kva;
    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();

    for br in net.branches() {
        let f = net.bus_index(&br.from_bus).expect("validated");
        let t = net.bus_index(&br.to_bus).expect("validated");
        let kv = net.buses()[f].nominal_kv;
        let z_base = kv * kv * 1e3 / base_kva;
        let idx: Vec<usize> = br
            .phases
            .iter()
            .map(|p| net.node_index(f, p).expect("validated"))
            .chain(br.phases.iter().map(|p| net.node_index(t, p).expect("validated")))
            .collect();
        for (i, &ni) in idx.iter().enumerate() {
            for (j, &nj) in idx.iter().enumerate() {
                triplets.push((ni, nj, br.primitive_y[i][j] * z_base));
            }
        }
    }
    for ld in net.loads() {
        if ld.kind == LoadKind::ConstantImpedance {
            let b = net.bus_index(&ld.bus).expect("validated");
            let node = net.node_index(b, ld.phase).expect("validated");
            triplets.push((node, node, (ld.s_nominal / base_kva).conj()));
        }
    }
    let y_full = SparseMatrix::from_triplets(n, n, triplets)?;
    Ok(YbusSystem {
        y_ll: y_full.block(0..n_load, 0..n_load),
        y_ls: y_full.block(0..n_load, n_load..n),
        v_source: net.source().voltage_per_phase.clone(),
        y_full,
        n_load,
    })
}

/// Per-load-node consumption, per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalLoads {
    /// Constant-power consumption at each load node.
    pub power: Vec<Complex64>,
}

impl NodalLoads {
    /// Sums the network's constant-power loads per node.
    pub fn from_network(net: &Network) -> Self {
        let mut power = vec![Complex64::new(0.0, 0.0); net.load_node_count()];
        let base = net.source().base_kva;
        for ld in net.loads() {
            if ld.kind == LoadKind::ConstantPower {
                let b = net.bus_index(&ld.bus).expect("validated");
                let node = net.node_index(b, ld.phase).expect("validated");
                power[node] += ld.s_nominal / base;
            }
        }
        Self { power }
    }

    /// Admittance drawing the same power at 1 pu: `y = conj(s)`.
    pub fn as_admittance(&self) -> Vec<Complex64> {
        self.power.iter().map(|s| s.conj()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            power: self.power.iter().map(|s| s * factor).collect(),
        }
    }
}

/// `nnz / 3n`, the effective number of phases per branch.
pub fn equivalent_p<T: crate::sparse::Scalar>(y: &SparseMatrix<T>, n: usize) -> f64 {
    y.nnz() as f64 / (3.0 * n as f64)
}

/// Parameters of the symmetric random matrix
/// `sprandsym(n, (3p−1)/n) + Υ₀·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonSpec {
    pub n: usize,
    /// Phases per branch, in `[1, 3]`.
    pub p: f64,
    pub seed: u64,
    /// Added to the largest off-diagonal row sum to form `Υ₀`.
    pub upsilon0_margin: f64,
}

impl UpsilonSpec {
    pub fn new(n: usize, p: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            seed,
            upsilon0_margin: 1.0,
        }
    }

    pub fn density(&self) -> f64 {
        (3.0 * self.p - 1.0) / self.n as f64
    }

    /// Off-diagonal pairs drawn in the strict upper triangle.
    pub fn pair_count(&self) -> usize {
        ((3.0 * self.p - 1.0) * self.n as f64 / 2.0).round() as usize
    }

    /// Stored entries: `(3p − 1)·n` off-diagonal plus the `n` diagonal.
    pub fn expected_nnz(&self) -> usize {
        2 * self.pair_count() + self.n
    }
}

/// Draws a strictly diagonally dominant symmetric random matrix.
///
/// Off-diagonal values are uniform on `[−1, 1]` at uniformly random
/// positions; the diagonal is the scalar
/// `Υ₀ = max_i Σ_{j≠i} |Υ_ij| + margin`.
pub fn generate_upsilon(spec: &UpsilonSpec) -> Result<SparseMatrix<f64>, YbusError> {
    let n = spec.n;
    let d = spec.density();
    if !(1.0..=3.0).contains(&spec.p) {
        return Err(YbusError::InvalidUpsilon(format!("p = {} outside [1, 3]", spec.p)));
    }
    if n < 2 || !(d > 0.0 && d < 1.0) {
        return Err(YbusError::InvalidUpsilon(format!(
            "density {d} outside (0, 1) for n = {n}"
        )));
    }
    if !(spec.upsilon0_margin > 0.0) {
        return Err(YbusError::InvalidUpsilon("upsilon0_margin must be positive".into()));
    }
    let pairs = spec.pair_count();
    if pairs > n * (n - 1) / 2 {
        return Err(YbusError::InvalidUpsilon(format!(
            "{pairs} pairs do not fit in the upper triangle of n = {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(pairs);
    let mut triplets = Vec::with_capacity(2 * pairs + n);
    let mut rowsum = vec![0.0; n];
    while seen.len() < pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            continue;
        }
        let v: f64 = rng.gen_range(-1.0..=1.0);
        rowsum[key.0] += v.abs();
        rowsum[key.1] += v.abs();
        triplets.push((key.0, key.1, v));
        triplets.push((key.1, key.0, v));
    }
    let upsilon0 = rowsum.iter().copied().fold(0.0, f64::max) + spec.upsilon0_margin;
    triplets.extend((0..n).map(|i| (i, i, upsilon0)));
    Ok(SparseMatrix::from_triplets(n, n, triplets)?)
}
