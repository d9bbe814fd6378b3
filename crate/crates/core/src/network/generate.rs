//! Synthetic radial feeders.
//!
//! Buses are added one at a time; each new bus draws its phase count from
//! `phase_mix`, then attaches to a uniformly chosen existing bus whose phase
//! set covers its own. The source bus is three-phase (or carries
//! `uniform_phases` when that is set), so an attachment point always exists.
//!
//! Every branch gets a series impedance drawn log-uniformly from the
//! impedance profile with mutual coupling between phases. Loads are
//! single-phase constant-power wye loads on each non-source node.
//!
//! The per-unit power base is one third of the total connected load at 100%,
//! so the per-phase trunk flow stays near one per-unit whatever the feeder
//! size; this keeps voltage drops and fixed-point convergence comparable
//! across sizes.
//!
//! The equivalent phase count `nnz(Ybus)/3n` is roughly
//! `(f1 + 4 f2 + 9 f3) / (f1 + 2 f2 + 3 f3)` for mix `(f1, f2, f3)` and lies
//! in `[1.35, 3.00]` whenever the three-phase fraction is at least 0.1.

use super::{Branch, Bus, Load, LoadKind, Network, NetworkError, Phase, PhaseSet, SourceSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceProfile {
    /// Series impedance magnitude range, per unit.
    pub z_min_pu: f64,
    pub z_max_pu: f64,
    /// X/R for two- and three-phase branches.
    pub xr_multi: f64,
    /// X/R for single-phase branches.
    pub xr_single: f64,
    /// Mutual impedance as a fraction of self impedance.
    pub mutual_ratio: f64,
}

impl Default for ImpedanceProfile {
    fn default() -> Self {
        Self {
            z_min_pu: 0.01,
            z_max_pu: 0.1,
            xr_multi: 2.0,
            xr_single: 1.0,
            mutual_ratio: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub kind: LoadKind,
    /// Connected load per node at 100%, kVA.
    pub node_kva: f64,
    /// Fraction of `node_kva` actually drawn.
    pub loading: f64,
    pub power_factor: f64,
    /// Probability that a non-source node carries a load.
    pub density: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            kind: LoadKind::ConstantPower,
            node_kva: 10.0,
            loading: 1.0,
            power_factor: 0.95,
            density: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    /// Bus count `m`, source bus included.
    pub buses: usize,
    /// Fractions of one-, two- and three-phase buses among non-source buses.
    pub phase_mix: [f64; 3],
    pub seed: u64,
    pub impedance: ImpedanceProfile,
    pub loads: LoadProfile,
    /// Line-to-ground nominal voltage, kV.
    pub nominal_kv: f64,
    /// When set, every bus (source included) carries exactly these phases.
    pub uniform_phases: Option<PhaseSet>,
}

impl GeneratorSpec {
    pub const DEFAULT_PHASE_MIX: [f64; 3] = [0.6, 0.1, 0.3];

    pub fn new(buses: usize, seed: u64) -> Self {
        Self {
            buses,
            phase_mix: Self::DEFAULT_PHASE_MIX,
            seed,
            impedance: ImpedanceProfile::default(),
            loads: LoadProfile::default(),
            nominal_kv: 11.0 / 3f64.sqrt(),
            uniform_phases: None,
        }
    }

    pub fn uniform(buses: usize, phases: PhaseSet, seed: u64) -> Self {
        Self {
            uniform_phases: Some(phases),
            ..Self::new(buses, seed)
        }
    }

    /// Expected nodes per bus under `phase_mix`.
    pub fn mean_phases(&self) -> f64 {
        match self.uniform_phases {
            Some(p) => p.len() as f64,
            None => self.phase_mix[0] + 2.0 * self.phase_mix[1] + 3.0 * self.phase_mix[2],
        }
    }

    /// Bus count whose expected node count is closest to `nodes`.
    pub fn buses_for_nodes(&self, nodes: usize) -> usize {
        ((nodes as f64 / self.mean_phases()).round() as usize).max(2)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let bad = |field: &'static str, msg: String| Err(NetworkError::InvalidField { field, msg });
        if self.buses < 2 {
            return bad("buses", format!("need at least 2 buses, got {}", self.buses));
        }
        if self.uniform_phases.is_none() {
            let sum: f64 = self.phase_mix.iter().sum();
            if self.phase_mix.iter().any(|f| !f.is_finite() || *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return bad("phase_mix", format!("fractions {:?} must be nonnegative and sum to 1", self.phase_mix));
            }
        } else if self.uniform_phases.is_some_and(|p| p.is_empty()) {
            return bad("uniform_phases", "empty phase set".into());
        }
        let z = &self.impedance;
        if !(z.z_min_pu > 0.0 && z.z_min_pu <= z.z_max_pu && z.z_max_pu.is_finite()) {
            return bad("impedance", format!("range [{}, {}] is invalid", z.z_min_pu, z.z_max_pu));
        }
        if !(z.mutual_ratio >= 0.0 && z.mutual_ratio < 0.5) {
            return bad("mutual_ratio", format!("{} outside [0, 0.5)", z.mutual_ratio));
        }
        let l = &self.loads;
        if !(0.0..=1.0).contains(&l.density) {
            return bad("density", format!("{} outside [0, 1]", l.density));
        }
        if !(l.power_factor > 0.0 && l.power_factor <= 1.0) {
            return bad("power_factor", format!("{} outside (0, 1]", l.power_factor));
        }
        if !(l.node_kva > 0.0 && l.loading >= 0.0 && l.loading.is_finite()) {
            return bad("loads", "node_kva must be positive and loading nonnegative".into());
        }
        if !(self.nominal_kv > 0.0 && self.nominal_kv.is_finite()) {
            return bad("nominal_kv", format!("{}", self.nominal_kv));
        }
        Ok(())
    }
}

const PAIRS: [[Phase; 2]; 3] = [[Phase::A, Phase::B], [Phase::B, Phase::C], [Phase::C, Phase::A]];

pub fn generate_radial(spec: &GeneratorSpec) -> Result<Network, NetworkError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source_phases = spec.uniform_phases.unwrap_or(PhaseSet::ABC);

    let mut phases = Vec::with_capacity(spec.buses);
    let mut parents = Vec::with_capacity(spec.buses);
    // buses grouped by exact phase set, indexed by bitmask
    let mut by_set: [Vec<usize>; 8] = Default::default();
    phases.push(source_phases);
    parents.push(usize::MAX);
    by_set[source_phases.bits() as usize].push(0);

    for b in 1..spec.buses {
        let set = match spec.uniform_phases {
            Some(p) => p,
            None => {
                let u: f64 = rng.gen();
                let q = if u < spec.phase_mix[0] {
                    1
                } else if u < spec.phase_mix[0] + spec.phase_mix[1] {
                    2
                } else {
                    3
                };
                match q {
                    1 => PhaseSet::from_phases(&[Phase::ALL[rng.gen_range(0..3)]]),
                    2 => PhaseSet::from_phases(&PAIRS[rng.gen_range(0..3)]),
                    _ => PhaseSet::ABC,
                }
            }
        };
        let covering: Vec<usize> = (1..8)
            .filter(|&bits| set.is_subset_of(PhaseSet::from_bits(bits as u8)))
            .collect();
        let total: usize = covering.iter().map(|&k| by_set[k].len()).sum();
        let mut pick = rng.gen_range(0..total);
        let mut parent = usize::MAX;
        for &k in &covering {
            if pick < by_set[k].len() {
                parent = by_set[k][pick];
                break;
            }
            pick -= by_set[k].len();
        }
        phases.push(set);
        parents.push(parent);
        by_set[set.bits() as usize].push(b);
    }

    let load_nodes: usize = phases[1..].iter().map(|p| p.len()).sum();
    let base_kva = (spec.loads.node_kva * load_nodes as f64 / 3.0).max(1.0);
    let z_base = spec.nominal_kv * spec.nominal_kv * 1e3 / base_kva;

    let id = |b: usize| format!("bus{b}");
    let buses: Vec<Bus> = phases
        .iter()
        .enumerate()
        .map(|(b, &p)| Bus {
            id: id(b),
            phases: p,
            nominal_kv: spec.nominal_kv,
        })
        .collect();

    let zp = &spec.impedance;
    let (ln_lo, ln_hi) = (zp.z_min_pu.ln(), zp.z_max_pu.ln());
    let mut branches = Vec::with_capacity(spec.buses - 1);
    for b in 1..spec.buses {
        let set = phases[b];
        let q = set.len();
        let mag = if ln_hi > ln_lo {
            rng.gen_range(ln_lo..ln_hi).exp()
        } else {
            zp.z_min_pu
        };
        let xr = if q == 1 { zp.xr_single } else { zp.xr_multi };
        let z_self = Complex64::new(1.0, xr) * (mag / (1.0 + xr * xr).sqrt());
        let z: Vec<Vec<Complex64>> = (0..q)
            .map(|i| {
                (0..q)
                    .map(|j| if i == j { z_self } else { z_self * zp.mutual_ratio })
                    .collect()
            })
            .collect();
        let zi = invert_small(&z);
        // average with the transpose so rounding cannot break reciprocity
        let y_series: Vec<Vec<Complex64>> = (0..q)
            .map(|i| (0..q).map(|j| (zi[i][j] + zi[j][i]) * 0.5 / z_base).collect())
            .collect();
        branches.push(Branch::series(id(parents[b]), id(b), set, &y_series, None));
    }

    let lp = &spec.loads;
    let s_load = Complex64::new(lp.power_factor, (1.0 - lp.power_factor.powi(2)).sqrt())
        * (lp.node_kva * lp.loading);
    let mut loads = Vec::new();
    for (b, set) in phases.iter().enumerate().skip(1) {
        for p in set.iter() {
            if lp.density >= 1.0 || rng.gen::<f64>() < lp.density {
                loads.push(Load {
                    bus: id(b),
                    phase: p,
                    kind: lp.kind,
                    s_nominal: s_load,
                    connection: Default::default(),
                });
            }
        }
    }

    Network::new(
        buses,
        branches,
        loads,
        SourceSpec::balanced(id(0), source_phases, base_kva),
        true,
    )
}

/// Gauss-Jordan inverse of a small nonsingular complex matrix.
fn invert_small(a: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = a.len();
    let mut m: Vec<Vec<Complex64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap();
        m.swap(k, p);
        let pivot = m[k][k];
        for v in m[k].iter_mut() {
            *v /= pivot;
        }
        for i in 0..n {
            if i != k {
                let f = m[i][k];
                if f != Complex64::new(0.0, 0.0) {
                    for j in 0..2 * n {
                        let t = m[k][j] * f;
                        m[i][j] -= t;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}
