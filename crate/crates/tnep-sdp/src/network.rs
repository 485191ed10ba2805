//! Power network data model and case-file parsing.
//!
//! Case files are JSON with quantities in engineering units (MW, MVAr, MVA
//! on the system base; admittances already in per-unit). Parsing validates
//! the data and converts powers to per-unit; [`serialize_case`] writes the
//! same format back.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Adjacency;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed case file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid case data: {0}")]
    Invalid(String),
}

// Serde mirror of the on-disk format. Field names are part of the format;
// unknown keys are rejected.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    #[serde(rename = "sBase")]
    s_base: f64,
    #[serde(rename = "lossPenalty")]
    loss_penalty: f64,
    buses: Vec<BusRecord>,
    generators: Vec<GeneratorRecord>,
    corridors: Vec<CorridorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: usize,
    #[serde(rename = "Pd")]
    pd: f64,
    #[serde(rename = "Qd")]
    qd: f64,
    #[serde(rename = "Vmin")]
    vmin: f64,
    #[serde(rename = "Vmax")]
    vmax: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRecord {
    bus: usize,
    #[serde(rename = "Pmin")]
    pmin: f64,
    #[serde(rename = "Pmax")]
    pmax: f64,
    #[serde(rename = "Qmin")]
    qmin: f64,
    #[serde(rename = "Qmax")]
    qmax: f64,
    c2: f64,
    c1: f64,
    c0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorridorRecord {
    from: usize,
    to: usize,
    g: f64,
    b: f64,
    bsh: f64,
    #[serde(rename = "Smax")]
    smax: f64,
    #[serde(rename = "nExisting")]
    n_existing: usize,
    #[serde(rename = "nMin")]
    n_min: usize,
    #[serde(rename = "nMax")]
    n_max: usize,
    #[serde(rename = "cBuild")]
    c_build: f64,
}

/// A bus with demand in per-unit and voltage magnitude bounds.
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub pd: f64,
    pub qd: f64,
    pub vmin: f64,
    pub vmax: f64,
}

/// A generator attached to a bus (by index), limits in per-unit. Cost
/// coefficients apply to the MW output: cost = c2 P^2 + c1 P + c0.
#[derive(Debug, Clone)]
pub struct Generator {
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

/// A corridor between two buses (by index, `from < to` after normalization)
/// with per-circuit admittance, thermal limit in per-unit, the existing
/// circuit count, and expansion data.
#[derive(Debug, Clone)]
pub struct Corridor {
    pub from: usize,
    pub to: usize,
    pub from_id: usize,
    pub to_id: usize,
    /// Per-circuit series admittance g + jb and total shunt susceptance bsh.
    pub g: f64,
    pub b: f64,
    pub bsh: f64,
    /// Per-circuit apparent-power limit, per-unit.
    pub smax: f64,
    pub n_existing: usize,
    /// Minimum circuits in service (existing plus forced additions).
    pub n_min: usize,
    /// Maximum circuits in service.
    pub n_max: usize,
    /// Cost of adding one circuit.
    pub c_build: f64,
}

impl Corridor {
    /// Candidate circuit positions `t`, 1-based over circuits in service.
    pub fn candidates(&self) -> std::ops::RangeInclusive<usize> {
        self.n_existing + 1..=self.n_max
    }
}

/// Result of [`PowerNetwork::fenced_area_stats`]: per-unit demand and
/// generation capacity inside the area and the corridors crossing its
/// boundary.
#[derive(Debug, Clone)]
pub struct AreaStats {
    pub load_sum: f64,
    pub gen_cap_sum: f64,
    /// Corridor indices with exactly one endpoint inside, flagged true when
    /// the `from` endpoint is the inside one.
    pub boundary: Vec<(usize, bool)>,
}

#[derive(Debug, Error)]
#[error("invalid fence area: {0}")]
pub struct AreaError(pub String);

#[derive(Debug, Clone)]
pub struct PowerNetwork {
    pub s_base: f64,
    /// Penalty on total MW generation in the expansion objective.
    pub loss_penalty: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub corridors: Vec<Corridor>,
}

impl PowerNetwork {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Generators at a bus index.
    pub fn generators_at(&self, bus: usize) -> impl Iterator<Item = &Generator> {
        self.generators.iter().filter(move |g| g.bus == bus)
    }

    /// Corridor adjacency over bus indices. With `existing_only`, corridors
    /// without existing circuits contribute no edge.
    pub fn adjacency(&self, existing_only: bool) -> Adjacency {
        let mut g = Adjacency::new(self.n_buses());
        for c in &self.corridors {
            if !existing_only || c.n_existing > 0 {
                g.add_edge(c.from, c.to);
            }
        }
        g
    }

    /// Demand, generation capacity, and boundary corridors of a bus area
    /// (given by bus ids). Errors unless the area is a nonempty proper
    /// subset of the buses.
    pub fn fenced_area_stats(
        &self,
        area: &std::collections::BTreeSet<usize>,
    ) -> Result<AreaStats, AreaError> {
        if area.is_empty() {
            return Err(AreaError("area is empty".into()));
        }
        let mut inside = vec![false; self.n_buses()];
        for &id in area {
            let i = self
                .bus_index(id)
                .ok_or_else(|| AreaError(format!("unknown bus {id}")))?;
            inside[i] = true;
        }
        if area.len() == self.n_buses() {
            return Err(AreaError("area covers every bus".into()));
        }
        let load_sum = self.buses.iter().enumerate().filter(|&(i, _)| inside[i]).map(|(_, b)| b.pd).sum();
        let gen_cap_sum = self.generators.iter().filter(|g| inside[g.bus]).map(|g| g.pmax).sum();
        let boundary = self
            .corridors
            .iter()
            .enumerate()
            .filter(|(_, c)| inside[c.from] != inside[c.to])
            .map(|(k, c)| (k, inside[c.from]))
            .collect();
        Ok(AreaStats { load_sum, gen_cap_sum, boundary })
    }

    pub fn total_pd(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    pub fn total_pmax(&self) -> f64 {
        self.generators.iter().map(|g| g.pmax).sum()
    }

    fn validate(&self) -> Result<(), CaseError> {
        let err = |msg: String| Err(CaseError::Invalid(msg));
        if !(self.s_base > 0.0) {
            return err(format!("sBase must be positive, got {}", self.s_base));
        }
        if self.loss_penalty < 0.0 {
            return err(format!("lossPenalty must be nonnegative, got {}", self.loss_penalty));
        }
        if self.buses.is_empty() {
            return err("case has no buses".into());
        }
        let mut seen = HashMap::new();
        for b in &self.buses {
            if seen.insert(b.id, ()).is_some() {
                return err(format!("duplicate bus id {}", b.id));
            }
            if !(0.0 < b.vmin && b.vmin <= b.vmax) {
                return err(format!("bus {}: need 0 < Vmin <= Vmax", b.id));
            }
            if b.pd < 0.0 {
                return err(format!("bus {}: negative demand", b.id));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if g.bus >= self.n_buses() {
                return err(format!("generator {k}: unknown bus"));
            }
            if g.pmin > g.pmax || g.qmin > g.qmax {
                return err(format!(
                    "generator {k} at bus {}: crossed limits",
                    self.buses[g.bus].id
                ));
            }
        }
        let mut pairs = HashMap::new();
        for c in &self.corridors {
            if c.from >= self.n_buses() || c.to >= self.n_buses() || c.from == c.to {
                return err(format!("corridor {}-{}: bad endpoints", c.from_id, c.to_id));
            }
            if pairs.insert((c.from, c.to), ()).is_some() {
                return err(format!("duplicate corridor {}-{}", c.from_id, c.to_id));
            }
            if !(c.smax > 0.0) {
                return err(format!("corridor {}-{}: Smax must be positive", c.from_id, c.to_id));
            }
            if c.n_existing > c.n_max || c.n_min > c.n_max {
                return err(format!(
                    "corridor {}-{}: need nExisting, nMin <= nMax",
                    c.from_id, c.to_id
                ));
            }
            if c.g < 0.0 {
                return err(format!(
                    "corridor {}-{}: negative series conductance",
                    c.from_id, c.to_id
                ));
            }
            if c.c_build < 0.0 {
                return err(format!("corridor {}-{}: negative build cost", c.from_id, c.to_id));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, CaseError> {
        let raw: CaseFile = serde_json::from_str(text)?;
        let base = raw.s_base;
        let mut buses: Vec<Bus> = raw
            .buses
            .iter()
            .map(|b| Bus {
                id: b.id,
                pd: b.pd / base,
                qd: b.qd / base,
                vmin: b.vmin,
                vmax: b.vmax,
            })
            .collect();
        buses.sort_by_key(|b| b.id);
        let index_of: HashMap<usize, usize> =
            buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let lookup = |id: usize, what: &str| -> Result<usize, CaseError> {
            index_of
                .get(&id)
                .copied()
                .ok_or_else(|| CaseError::Invalid(format!("{what} references unknown bus {id}")))
        };
        let generators = raw
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| {
                Ok(Generator {
                    bus: lookup(g.bus, &format!("generator {k}"))?,
                    pmin: g.pmin / base,
                    pmax: g.pmax / base,
                    qmin: g.qmin / base,
                    qmax: g.qmax / base,
                    c2: g.c2,
                    c1: g.c1,
                    c0: g.c0,
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let mut corridors = raw
            .corridors
            .iter()
            .map(|c| {
                let (mut from_id, mut to_id) = (c.from, c.to);
                if from_id > to_id {
                    std::mem::swap(&mut from_id, &mut to_id);
                }
                Ok(Corridor {
                    from: lookup(from_id, &format!("corridor {}-{}", c.from, c.to))?,
                    to: lookup(to_id, &format!("corridor {}-{}", c.from, c.to))?,
                    from_id,
                    to_id,
                    g: c.g,
                    b: c.b,
                    bsh: c.bsh,
                    smax: c.smax / base,
                    n_existing: c.n_existing,
                    n_min: c.n_min,
                    n_max: c.n_max,
                    c_build: c.c_build,
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        corridors.sort_by_key(|c| (c.from_id, c.to_id));
        let net = PowerNetwork {
            s_base: base,
            loss_penalty: raw.loss_penalty,
            buses,
            generators,
            corridors,
        };
        net.validate()?;
        Ok(net)
    }
}

/// Parse a case file from disk.
pub fn parse_case(path: impl AsRef<Path>) -> Result<PowerNetwork, CaseError> {
    let text = std::fs::read_to_string(path)?;
    PowerNetwork::from_json_str(&text)
}

/// Render a network back to the case-file JSON format.
pub fn serialize_case(net: &PowerNetwork) -> String {
    let base = net.s_base;
    let raw = CaseFile {
        s_base: base,
        loss_penalty: net.loss_penalty,
        buses: net
            .buses
            .iter()
            .map(|b| BusRecord {
                id: b.id,
                pd: b.pd * base,
                qd: b.qd * base,
                vmin: b.vmin,
                vmax: b.vmax,
            })
            .collect(),
        generators: net
            .generators
            .iter()
            .map(|g| GeneratorRecord {
                bus: net.buses[g.bus].id,
                pmin: g.pmin * base,
                pmax: g.pmax * base,
                qmin: g.qmin * base,
                qmax: g.qmax * base,
                c2: g.c2,
                c1: g.c1,
                c0: g.c0,
            })
            .collect(),
        corridors: net
            .corridors
            .iter()
            .map(|c| CorridorRecord {
                from: c.from_id,
                to: c.to_id,
                g: c.g,
                b: c.b,
                bsh: c.bsh,
                smax: c.smax * base,
                n_existing: c.n_existing,
                n_min: c.n_min,
                n_max: c.n_max,
                c_build: c.c_build,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("case serialization")
}
