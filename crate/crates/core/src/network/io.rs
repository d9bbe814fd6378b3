//! JSON network files. Schema: `schema/network.schema.json`.

use super::{Branch, Bus, Load, Network, NetworkError, SourceSpec};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    loads: Vec<Load>,
    source: SourceSpec,
    radial: bool,
}

impl Network {
    pub fn from_json_str(s: &str) -> Result<Network, NetworkError> {
        let f: NetworkFile = serde_json::from_str(s)?;
        Network::new(f.buses, f.branches, f.loads, f.source, f.radial)
    }

    pub fn to_json_string(&self) -> Result<String, NetworkError> {
        Ok(serde_json::to_string_pretty(&self.file_view())?)
    }

    fn file_view(&self) -> NetworkFile {
        let (buses, branches, loads, source, radial) = self.clone().into_parts();
        NetworkFile {
            buses,
            branches,
            loads,
            source,
            radial,
        }
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NetworkError> {
    let f: NetworkFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Network::new(f.buses, f.branches, f.loads, f.source, f.radial)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<(), NetworkError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &net.file_view())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_radial, GeneratorSpec};

    const TWO_BUS: &str = r#"{
      "buses": [
        {"id": "src", "phases": "abc", "nominal_kv": 0.23},
        {"id": "b1", "phases": "abc", "nominal_kv": 0.23}
      ],
      "branches": [
        {"from_bus": "src", "to_bus": "b1", "phases": "a",
         "primitive_y": [[[10, -20], [-10, 20]], [[-10, 20], [10, -20]]]}
      ],
      "loads": [
        {"bus": "b1", "phase": "a", "kind": "constant_power", "s_nominal": [5, 1]}
      ],
      "source": {"bus": "src", "voltage_per_phase": [[1, 0], [-0.5, -0.8660254037844386], [-0.5, 0.8660254037844386]], "base_kva": 100},
      "radial": true
    }"#;

    #[test]
    fn two_bus_fixture() {
        let net = Network::from_json_str(TWO_BUS).unwrap();
        assert_eq!(net.bus_count(), 2);
        assert_eq!(net.node_count(), 6);
    }

    #[test]
    fn undeclared_bus_is_named() {
        let bad = TWO_BUS.replace(r#""to_bus": "b1""#, r#""to_bus": "ghost""#);
        let e = Network::from_json_str(&bad).unwrap_err();
        assert!(e.to_string().contains("ghost"), "{e}");
    }

    #[test]
    fn schema_errors_carry_position() {
        let bad = TWO_BUS.replace(r#""nominal_kv": 0.23}"#, r#""kv": 0.23}"#);
        let e = Network::from_json_str(&bad).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");
        assert!(e.contains("kv"), "{e}");
    }

    #[test]
    fn generated_round_trip() {
        let net = generate_radial(&GeneratorSpec::new(100, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(back, net);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim_end(), net.to_json_string().unwrap());
    }
}
