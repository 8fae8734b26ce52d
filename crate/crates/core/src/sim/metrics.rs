//! Run metrics and the activity-based energy model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ConfigError, EnergyTable, TRANSFER_KEY};
use crate::isa::Opcode;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Time of the last event other than a trailing credit return.
    pub makespan: u64,
    pub events: u64,
    /// Executed instructions per opcode (only non-zero entries).
    pub opcode_counts: BTreeMap<Opcode, u64>,
    /// Words delivered over all channels.
    pub words_moved: u64,
    /// Delivered words by channel class (`mesh`, `net`, `inject`, `eject`,
    /// `host_in`, `host_out`).
    pub words_by_class: BTreeMap<String, u64>,
    pub mem_batches: u64,
    /// Summed instruction latency per NALE, by NALE id.
    pub busy: Vec<u64>,
    /// Time each NALE entered HALTED, if it did.
    pub halted_at: Vec<Option<u64>>,
    pub energy: f64,
}

impl Metrics {
    pub fn count(&self, op: Opcode) -> u64 {
        self.opcode_counts.get(&op).copied().unwrap_or(0)
    }

    pub fn instructions(&self) -> u64 {
        self.opcode_counts.values().sum()
    }

    /// Column names matching [`Metrics::csv_fields`].
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> =
            ["makespan", "energy", "words_moved", "events", "mem_batches"].iter().map(|s| s.to_string()).collect();
        h.extend(Opcode::ALL.iter().map(|op| op.mnemonic().to_string()));
        h
    }

    pub fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.makespan.to_string(),
            format!("{:.3}", self.energy),
            self.words_moved.to_string(),
            self.events.to_string(),
            self.mem_batches.to_string(),
        ];
        f.extend(Opcode::ALL.iter().map(|&op| self.count(op).to_string()));
        f
    }
}

/// `sum(count(op) * E(op)) + words_moved * E(transfer)`.
///
/// The table needs a `transfer` entry and an entry for every opcode that was
/// actually executed.
pub fn estimate_energy(m: &Metrics, table: &EnergyTable) -> Result<f64, ConfigError> {
    let transfer = table.get(TRANSFER_KEY).ok_or_else(|| ConfigError::MissingEnergy(TRANSFER_KEY.into()))?;
    let mut e = m.words_moved as f64 * transfer;
    for (&op, &n) in &m.opcode_counts {
        if n == 0 {
            continue;
        }
        let per = table.op(op).ok_or_else(|| ConfigError::MissingEnergy(op.mnemonic().into()))?;
        e += n as f64 * per;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(counts: &[(Opcode, u64)], words: u64) -> Metrics {
        Metrics { opcode_counts: counts.iter().copied().collect(), words_moved: words, ..Default::default() }
    }

    #[test]
    fn energy_examples() {
        let t = EnergyTable::from_entries([("MAC", 2.0), ("transfer", 1.0)]).unwrap();
        assert_eq!(estimate_energy(&metrics(&[(Opcode::Mac, 10)], 5), &t).unwrap(), 25.0);

        let zero = EnergyTable::from_entries(
            Opcode::ALL.iter().filter(|&&op| op != Opcode::Macq).map(|op| (op.mnemonic(), 0.0)).chain([("transfer", 0.0)]),
        )
        .unwrap();
        let m = metrics(&[(Opcode::Add, 7), (Opcode::Send, 3)], 40);
        assert_eq!(estimate_energy(&m, &zero).unwrap(), 0.0);

        let d = EnergyTable::default();
        let twice = metrics(&[(Opcode::Add, 14), (Opcode::Send, 6)], 80);
        assert_eq!(estimate_energy(&twice, &d).unwrap(), 2.0 * estimate_energy(&m, &d).unwrap());
    }

    #[test]
    fn missing_entries() {
        let t = EnergyTable::from_entries([("MAC", 2.0)]).unwrap();
        assert!(matches!(estimate_energy(&metrics(&[], 0), &t), Err(ConfigError::MissingEnergy(_))));
        let t = EnergyTable::from_entries([("transfer", 1.0)]).unwrap();
        assert!(matches!(estimate_energy(&metrics(&[(Opcode::Add, 1)], 0), &t), Err(ConfigError::MissingEnergy(_))));
        // Zero counts need no entry.
        assert_eq!(estimate_energy(&metrics(&[(Opcode::Add, 0)], 2), &t).unwrap(), 2.0);
    }
}
