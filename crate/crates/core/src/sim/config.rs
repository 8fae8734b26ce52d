//! Machine configuration (JSON).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::Opcode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad machine config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown table key {0:?}")]
    UnknownKey(String),
    #[error("energy table has no entry for {0:?}")]
    MissingEnergy(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

/// Behavioral handshake channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// FIFO depth in words.
    pub capacity: usize,
    /// Forward latency per transfer.
    pub tf: u64,
    /// Credit return latency.
    pub tb: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams { capacity: 4, tf: 2, tb: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryParams {
    /// Time charged per batch.
    pub latency: u64,
    /// Words per batch.
    pub batch_words: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams { latency: 100, batch_words: 64 }
    }
}

/// Table key for an opcode. MACQ runs on the MAC unit and shares its entry.
pub fn table_key(op: Opcode) -> &'static str {
    match op {
        Opcode::Macq => "MAC",
        other => other.mnemonic(),
    }
}

fn is_op_key(k: &str) -> bool {
    Opcode::ALL.iter().any(|&op| table_key(op) == k)
}

/// Per-opcode execution latency. Keys are mnemonics; entries missing from a
/// config file keep their defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, u64>", into = "BTreeMap<String, u64>")]
pub struct LatencyTable(BTreeMap<String, u64>);

impl Default for LatencyTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for op in Opcode::ALL {
            let lat = match op {
                Opcode::Halt => 0,
                Opcode::Mac | Opcode::Macq => 2,
                _ => 1,
            };
            m.insert(table_key(op).to_string(), lat);
        }
        LatencyTable(m)
    }
}

impl TryFrom<BTreeMap<String, u64>> for LatencyTable {
    type Error = ConfigError;

    fn try_from(over: BTreeMap<String, u64>) -> Result<Self, Self::Error> {
        let mut t = LatencyTable::default();
        for (k, v) in over {
            let k = k.to_ascii_uppercase();
            if !is_op_key(&k) {
                return Err(ConfigError::UnknownKey(k));
            }
            t.0.insert(k, v);
        }
        Ok(t)
    }
}

impl From<LatencyTable> for BTreeMap<String, u64> {
    fn from(t: LatencyTable) -> Self {
        t.0
    }
}

impl LatencyTable {
    pub fn get(&self, op: Opcode) -> u64 {
        self.0[table_key(op)]
    }

    pub fn set(&mut self, op: Opcode, latency: u64) {
        self.0.insert(table_key(op).to_string(), latency);
    }
}

/// Modeled energy per executed opcode plus `transfer` per channel word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct EnergyTable(BTreeMap<String, f64>);

pub const TRANSFER_KEY: &str = "transfer";

impl EnergyTable {
    /// A table with exactly the given entries (no defaults).
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self, ConfigError> {
        let mut m = BTreeMap::new();
        for (k, v) in entries {
            let key = if k.eq_ignore_ascii_case(TRANSFER_KEY) { TRANSFER_KEY.to_string() } else { k.to_ascii_uppercase() };
            if key != TRANSFER_KEY && !is_op_key(&key) {
                return Err(ConfigError::UnknownKey(k.to_string()));
            }
            if !(v >= 0.0) {
                return Err(ConfigError::Invalid(format!("energy for {k} must be non-negative")));
            }
            m.insert(key, v);
        }
        Ok(EnergyTable(m))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn op(&self, op: Opcode) -> Option<f64> {
        self.get(table_key(op))
    }
}

impl Default for EnergyTable {
    /// Relative costs: moving a word is dearer than an ALU op, and the
    /// multiplier dominates the datapath.
    fn default() -> Self {
        let mut m: BTreeMap<String, f64> = BTreeMap::new();
        for op in Opcode::ALL {
            let e = match op {
                Opcode::Nop | Opcode::Halt => 0.0,
                Opcode::Mul => 3.0,
                Opcode::Mac | Opcode::Macq => 4.0,
                Opcode::Send | Opcode::Recv | Opcode::TryRecv => 1.5,
                _ => 1.0,
            };
            m.insert(table_key(op).to_string(), e);
        }
        m.insert(TRANSFER_KEY.to_string(), 2.0);
        EnergyTable(m)
    }
}

impl TryFrom<BTreeMap<String, f64>> for EnergyTable {
    type Error = ConfigError;

    fn try_from(m: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        let mut t = EnergyTable::default();
        let over = EnergyTable::from_entries(m.iter().map(|(k, v)| (k.as_str(), *v)))?;
        t.0.extend(over.0);
        Ok(t)
    }
}

impl From<EnergyTable> for BTreeMap<String, f64> {
    fn from(t: EnergyTable) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    /// Array size; `None` takes the size of the loaded image.
    pub dims: Option<(usize, usize)>,
    pub channel: ChannelParams,
    pub latency: LatencyTable,
    pub energy: EnergyTable,
    pub memory: MemoryParams,
    pub event_budget: u64,
    /// Internal FIFO depth; raised to the image's requirement when smaller.
    pub internal_fifo: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            dims: None,
            channel: ChannelParams::default(),
            latency: LatencyTable::default(),
            energy: EnergyTable::default(),
            memory: MemoryParams::default(),
            event_budget: 100_000_000,
            internal_fifo: 256,
        }
    }
}

impl MachineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: MachineConfig = serde_json::from_str(text)?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.channel.capacity < 2 {
            return Err(ConfigError::Invalid("channel capacity must hold a 2-word packet".into()));
        }
        if self.channel.tf == 0 {
            return Err(ConfigError::Invalid("forward latency must be positive".into()));
        }
        if self.memory.batch_words == 0 {
            return Err(ConfigError::Invalid("memory batch must be at least one word".into()));
        }
        if let Some((r, c)) = self.dims {
            if r == 0 || c == 0 {
                return Err(ConfigError::Invalid("array dimensions must be positive".into()));
            }
        }
        if self.energy.get(TRANSFER_KEY).is_none() {
            return Err(ConfigError::MissingEnergy(TRANSFER_KEY.into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = MachineConfig::default();
        assert_eq!(c.channel, ChannelParams { capacity: 4, tf: 2, tb: 1 });
        assert_eq!(c.latency.get(Opcode::Add), 1);
        assert_eq!(c.latency.get(Opcode::Mac), 2);
        assert_eq!(c.latency.get(Opcode::Macq), 2);
        assert_eq!(c.memory, MemoryParams { latency: 100, batch_words: 64 });
        assert_eq!(c.event_budget, 100_000_000);
    }

    #[test]
    fn partial_json_overrides() {
        let c = MachineConfig::from_json(r#"{"latency": {"mac": 9}, "channel": {"tf": 5}, "dims": [2, 3]}"#).unwrap();
        assert_eq!(c.latency.get(Opcode::Mac), 9);
        assert_eq!(c.latency.get(Opcode::Macq), 9);
        assert_eq!(c.latency.get(Opcode::Add), 1);
        assert_eq!(c.channel.tf, 5);
        assert_eq!(c.channel.capacity, 4);
        assert_eq!(c.dims, Some((2, 3)));
        assert_eq!(MachineConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(MachineConfig::from_json(r#"{"latency": {"FROB": 1}}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"channel": {"capacity": 1}}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"speed": 3}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"energy": {"ADD": -1.0}}"#).is_err());
    }
}
