//! Multi-phase distribution network model.
//!
//! A [`Network`] is a set of buses (each carrying one to three phases),
//! branches described by their primitive admittance matrices, wye-connected
//! single-phase loads, and a designated source bus with fixed voltages.
//! Construction validates the topology; every load-bearing node gets an
//! ordinal in `0..n`, with the source bus nodes numbered last.

mod generate;
mod io;

pub use generate::{generate_radial, GeneratorSpec, ImpedanceProfile, LoadProfile};
pub use io::{load_network, save_network};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("network file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("duplicate bus id `{0}`")]
    DuplicateBus(String),
    #[error("{context} references undeclared bus `{bus}`")]
    UnknownBus { context: String, bus: String },
    #[error("bus `{0}` has no phases")]
    EmptyPhases(String),
    #[error("branch {index} ({from} -> {to}): phases {phases} not present on bus `{bus}`")]
    BranchPhases {
        index: usize,
        from: String,
        to: String,
        phases: PhaseSet,
        bus: String,
    },
    #[error("branch {index}: primitive admittance must be {expected}x{expected}, found {found}")]
    PrimitiveShape {
        index: usize,
        expected: usize,
        found: String,
    },
    #[error("branch {index}: primitive admittance is not symmetric")]
    PrimitiveAsymmetric { index: usize },
    #[error("branch {index}: endpoints have different nominal voltages (transformers are not modelled)")]
    NominalKvMismatch { index: usize },
    #[error("branch {index} connects bus `{bus}` to itself")]
    SelfLoop { index: usize, bus: String },
    #[error("load {index}: {msg}")]
    InvalidLoad { index: usize, msg: String },
    #[error("source: {0}")]
    InvalidSource(String),
    #[error("bus `{0}` is not connected to the source")]
    Disconnected(String),
    #[error("network flagged radial but is not a tree: {0}")]
    NotRadial(String),
    #[error("invalid value for `{field}`: {msg}")]
    InvalidField { field: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }

    fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            'a' => Some(Phase::A),
            'b' => Some(Phase::B),
            'c' => Some(Phase::C),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.letter().to_string())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next().and_then(Phase::from_letter), chars.next()) {
            (Some(p), None) => Ok(p),
            _ => Err(serde::de::Error::custom(format!("unknown phase `{s}`"))),
        }
    }
}

/// Subset of `{a, b, c}`; serialized as a string such as `"abc"` or `"b"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn from_phases(phases: &[Phase]) -> Self {
        PhaseSet(phases.iter().fold(0, |acc, p| acc | (1 << p.index())))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Self {
        PhaseSet(bits & 0b111)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Phases in a, b, c order.
    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |&p| self.contains(p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut phases = Vec::new();
        for c in s.chars() {
            let p = Phase::from_letter(c).ok_or_else(|| format!("unknown phase `{c}` in `{s}`"))?;
            if phases.contains(&p) {
                return Err(format!("phase `{c}` repeated in `{s}`"));
            }
            phases.push(p);
        }
        Ok(PhaseSet::from_phases(&phases))
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-ground nominal voltage, kV.
    pub nominal_kv: f64,
}

/// Series element between two buses.
///
/// `primitive_y` is the `2q × 2q` two-port admittance in siemens, rows and
/// columns ordered as `[from phases..., to phases...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from_bus: String,
    pub to_bus: String,
    pub phases: PhaseSet,
    pub primitive_y: Vec<Vec<Complex64>>,
}

impl Branch {
    /// Builds the two-port `[[Ys, -Ys], [-Ys, Ys]]` from a `q × q` series
    /// admittance, with an optional shunt added to both diagonal blocks.
    pub fn series(
        from_bus: impl Into<String>,
        to_bus: impl Into<String>,
        phases: PhaseSet,
        y_series: &[Vec<Complex64>],
        y_shunt: Option<&[Vec<Complex64>]>,
    ) -> Self {
        let q = y_series.len();
        let mut y = vec![vec![Complex64::new(0.0, 0.0); 2 * q]; 2 * q];
        for i in 0..q {
            for j in 0..q {
                let ys = y_series[i][j];
                let sh = y_shunt.map_or(Complex64::new(0.0, 0.0), |s| s[i][j]);
                y[i][j] = ys + sh;
                y[i + q][j + q] = ys + sh;
                y[i][j + q] = -ys;
                y[i + q][j] = -ys;
            }
        }
        Self {
            from_bus: from_bus.into(),
            to_bus: to_bus.into(),
            phases,
            primitive_y: y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    ConstantPower,
    ConstantImpedance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    #[default]
    Wye,
}

/// Single-phase wye load; `s_nominal` is consumed power in kVA at nominal voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub bus: String,
    pub phase: Phase,
    pub kind: LoadKind,
    pub s_nominal: Complex64,
    #[serde(default)]
    pub connection: Connection,
}

/// Slack bus and the per-unit system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub bus: String,
    /// Per-unit voltage for each source phase, in a, b, c order.
    pub voltage_per_phase: Vec<Complex64>,
    /// Single-phase power base, kVA.
    pub base_kva: f64,
}

impl SourceSpec {
    /// Balanced 1 pu source at 0°, −120°, +120° on the given phases.
    pub fn balanced(bus: impl Into<String>, phases: PhaseSet, base_kva: f64) -> Self {
        let voltage_per_phase = phases
            .iter()
            .map(|p| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0 * p.index() as f64))
            .collect();
        Self {
            bus: bus.into(),
            voltage_per_phase,
            base_kva,
        }
    }
}

/// Validated network with node numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    loads: Vec<Load>,
    source: SourceSpec,
    radial: bool,
    bus_lookup: HashMap<String, usize>,
    source_bus: usize,
    node_of: Vec<[Option<usize>; 3]>,
    nodes: Vec<(usize, Phase)>,
}

impl Network {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        loads: Vec<Load>,
        source: SourceSpec,
        radial: bool,
    ) -> Result<Self, NetworkError> {
        let mut bus_lookup = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if b.phases.is_empty() {
                return Err(NetworkError::EmptyPhases(b.id.clone()));
            }
            if !(b.nominal_kv.is_finite() && b.nominal_kv > 0.0) {
                return Err(NetworkError::InvalidField {
                    field: "nominal_kv",
                    msg: format!("bus `{}` has nominal_kv {}", b.id, b.nominal_kv),
                });
            }
            if bus_lookup.insert(b.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateBus(b.id.clone()));
            }
        }
        let lookup = |bus: &str, context: String| {
            bus_lookup
                .get(bus)
                .copied()
                .ok_or_else(|| NetworkError::UnknownBus {
                    context,
                    bus: bus.to_string(),
                })
        };

        let source_bus = lookup(&source.bus, "source".into())?;
        if source.voltage_per_phase.len() != buses[source_bus].phases.len() {
            return Err(NetworkError::InvalidSource(format!(
                "{} voltages given for {} phases",
                source.voltage_per_phase.len(),
                buses[source_bus].phases.len()
            )));
        }
        if source
            .voltage_per_phase
            .iter()
            .any(|v| !(v.norm() > 0.0) || !v.norm().is_finite())
        {
            return Err(NetworkError::InvalidSource("voltage magnitudes must be nonzero".into()));
        }
        if !(source.base_kva.is_finite() && source.base_kva > 0.0) {
            return Err(NetworkError::InvalidSource(format!(
                "base_kva must be positive, got {}",
                source.base_kva
            )));
        }

        let mut parent: Vec<usize> = (0..buses.len()).collect();
        let mut cyclic = false;
        for (index, br) in branches.iter().enumerate() {
            let ctx = || format!("branch {index}");
            let f = lookup(&br.from_bus, ctx())?;
            let t = lookup(&br.to_bus, ctx())?;
            if f == t {
                return Err(NetworkError::SelfLoop {
                    index,
                    bus: br.from_bus.clone(),
                });
            }
            for end in [f, t] {
                if br.phases.is_empty() || !br.phases.is_subset_of(buses[end].phases) {
                    return Err(NetworkError::BranchPhases {
                        index,
                        from: br.from_bus.clone(),
                        to: br.to_bus.clone(),
                        phases: br.phases,
                        bus: buses[end].id.clone(),
                    });
                }
            }
            if buses[f].nominal_kv != buses[t].nominal_kv {
                return Err(NetworkError::NominalKvMismatch { index });
            }
            let dim = 2 * br.phases.len();
            if br.primitive_y.len() != dim || br.primitive_y.iter().any(|r| r.len() != dim) {
                let found = format!(
                    "{}x[{}]",
                    br.primitive_y.len(),
                    br.primitive_y
                        .iter()
                        .map(|r| r.len().to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
                return Err(NetworkError::PrimitiveShape {
                    index,
                    expected: dim,
                    found,
                });
            }
            let scale = br
                .primitive_y
                .iter()
                .flatten()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            for i in 0..dim {
                for j in 0..i {
                    if (br.primitive_y[i][j] - br.primitive_y[j][i]).norm() > 1e-9 * scale {
                        return Err(NetworkError::PrimitiveAsymmetric { index });
                    }
                }
            }
            let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
            if rf == rt {
                cyclic = true;
            } else {
                parent[rf] = rt;
            }
        }
        let root = find(&mut parent, source_bus);
        for (i, b) in buses.iter().enumerate() {
            if find(&mut parent, i) != root {
                return Err(NetworkError::Disconnected(b.id.clone()));
            }
        }
        if radial && (cyclic || branches.len() + 1 != buses.len()) {
            return Err(NetworkError::NotRadial(format!(
                "{} branches for {} buses",
                branches.len(),
                buses.len()
            )));
        }

        for (index, ld) in loads.iter().enumerate() {
            let b = lookup(&ld.bus, format!("load {index}"))?;
            if b == source_bus {
                return Err(NetworkError::InvalidLoad {
                    index,
                    msg: format!("load on source bus `{}`", ld.bus),
                });
            }
            if !buses[b].phases.contains(ld.phase) {
                return Err(NetworkError::InvalidLoad {
                    index,
                    msg: format!("phase {} not present on bus `{}`", ld.phase, ld.bus),
                });
            }
            if !(ld.s_nominal.re.is_finite() && ld.s_nominal.im.is_finite()) {
                return Err(NetworkError::InvalidLoad {
                    index,
                    msg: "s_nominal is not finite".into(),
                });
            }
        }

        let mut node_of = vec![[None; 3]; buses.len()];
        let mut nodes = Vec::new();
        let order = (0..buses.len())
            .filter(|&i| i != source_bus)
            .chain(std::iter::once(source_bus));
        for b in order {
            for p in buses[b].phases.iter() {
                node_of[b][p.index()] = Some(nodes.len());
                nodes.push((b, p));
            }
        }

        Ok(Self {
            buses,
            branches,
            loads,
            source,
            radial,
            bus_lookup,
            source_bus,
            node_of,
            nodes,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    /// Bus count `m`.
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Node count `n`, source nodes included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn source_node_count(&self) -> usize {
        self.buses[self.source_bus].phases.len()
    }

    /// Nodes that are not on the source bus; these come first in the numbering.
    pub fn load_node_count(&self) -> usize {
        self.node_count() - self.source_node_count()
    }

    pub fn source_bus_index(&self) -> usize {
        self.source_bus
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_lookup.get(id).copied()
    }

    /// Node ordinal of `(bus, phase)`.
    pub fn node_index(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.node_of.get(bus)?[phase.index()]
    }

    /// `(bus index, phase)` for each node ordinal.
    pub fn nodes(&self) -> &[(usize, Phase)] {
        &self.nodes
    }

    /// Copy with every load's `s_nominal` multiplied by `factor`.
    pub fn scale_loads(&self, factor: f64) -> Network {
        let mut out = self.clone();
        for ld in &mut out.loads {
            ld.s_nominal *= factor;
        }
        out
    }

    /// Copy with every load switched to `kind`.
    pub fn with_load_kind(&self, kind: LoadKind) -> Network {
        let mut out = self.clone();
        for ld in &mut out.loads {
            ld.kind = kind;
        }
        out
    }

    pub(crate) fn into_parts(self) -> (Vec<Bus>, Vec<Branch>, Vec<Load>, SourceSpec, bool) {
        (self.buses, self.branches, self.loads, self.source, self.radial)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_bus(kind: LoadKind) -> Network {
        let y = vec![vec![Complex64::new(1.0, -2.0)]];
        Network::new(
            vec![
                Bus {
                    id: "src".into(),
                    phases: "a".parse().unwrap(),
                    nominal_kv: 1.0,
                },
                Bus {
                    id: "load".into(),
                    phases: "a".parse().unwrap(),
                    nominal_kv: 1.0,
                },
            ],
            vec![Branch::series("src", "load", "a".parse().unwrap(), &y, None)],
            vec![Load {
                bus: "load".into(),
                phase: Phase::A,
                kind,
                s_nominal: Complex64::new(100.0, 20.0),
                connection: Connection::Wye,
            }],
            SourceSpec::balanced("src", "a".parse().unwrap(), 1000.0),
            true,
        )
        .unwrap()
    }

    #[test]
    fn phase_set_parsing() {
        let s: PhaseSet = "ca".parse().unwrap();
        assert_eq!(s.to_string(), "ac");
        assert_eq!(s.len(), 2);
        assert!("ad".parse::<PhaseSet>().is_err());
        assert!("aa".parse::<PhaseSet>().is_err());
        assert!(PhaseSet::from_phases(&[Phase::B]).is_subset_of(PhaseSet::ABC));
    }

    #[test]
    fn source_nodes_numbered_last() {
        let net = two_bus(LoadKind::ConstantPower);
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.node_index(net.source_bus_index(), Phase::A), Some(1));
        assert_eq!(net.node_index(net.bus_index("load").unwrap(), Phase::A), Some(0));
        assert_eq!(net.load_node_count(), 1);
    }

    #[test]
    fn rejects_load_on_source() {
        let net = two_bus(LoadKind::ConstantPower);
        let (buses, branches, mut loads, source, radial) = net.into_parts();
        loads[0].bus = "src".into();
        let e = Network::new(buses, branches, loads, source, radial).unwrap_err();
        assert!(matches!(e, NetworkError::InvalidLoad { .. }));
    }

    #[test]
    fn rejects_cycle_when_radial() {
        let net = two_bus(LoadKind::ConstantPower);
        let (buses, mut branches, loads, source, _) = net.into_parts();
        branches.push(branches[0].clone());
        let e = Network::new(buses.clone(), branches.clone(), loads.clone(), source.clone(), true)
            .unwrap_err();
        assert!(matches!(e, NetworkError::NotRadial(_)));
        assert!(Network::new(buses, branches, loads, source, false).is_ok());
    }

    #[test]
    fn rejects_disconnected_bus() {
        let net = two_bus(LoadKind::ConstantPower);
        let (mut buses, branches, loads, source, _) = net.into_parts();
        buses.push(Bus {
            id: "island".into(),
            phases: PhaseSet::ABC,
            nominal_kv: 1.0,
        });
        let e = Network::new(buses, branches, loads, source, false).unwrap_err();
        assert!(matches!(e, NetworkError::Disconnected(ref b) if b == "island"));
    }

    #[test]
    fn rejects_branch_phase_not_on_bus() {
        let y = vec![vec![Complex64::new(1.0, 0.0)]];
        let e = Network::new(
            vec![
                Bus {
                    id: "s".into(),
                    phases: PhaseSet::ABC,
                    nominal_kv: 1.0,
                },
                Bus {
                    id: "x".into(),
                    phases: "a".parse().unwrap(),
                    nominal_kv: 1.0,
                },
            ],
            vec![Branch::series("s", "x", "b".parse().unwrap(), &y, None)],
            vec![],
            SourceSpec::balanced("s", PhaseSet::ABC, 1.0),
            true,
        )
        .unwrap_err();
        assert!(matches!(e, NetworkError::BranchPhases { .. }));
    }

    #[test]
    fn scaling_is_multiplicative() {
        let net = two_bus(LoadKind::ConstantPower);
        assert_eq!(net.scale_loads(1.0), net);
        assert!(net
            .scale_loads(0.0)
            .loads()
            .iter()
            .all(|l| l.s_nominal == Complex64::new(0.0, 0.0)));
        let a = net.scale_loads(0.6).scale_loads(0.5);
        let b = net.scale_loads(0.3);
        for (x, y) in a.loads().iter().zip(b.loads()) {
            assert!((x.s_nominal - y.s_nominal).norm() <= 1e-12 * y.s_nominal.norm());
        }
        assert_eq!(a.branches(), net.branches());
    }
}
