//! Gadget size and build cost as a function of the number of levels.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical_he::HeScheme;
use crate::error::Result;
use crate::gadget::key_update_expr_steps;
use crate::tp::{keygen, GadgetSource};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub levels: usize,
    pub qubits_per_gadget: usize,
    pub total_qubits: usize,
    pub keygen_ms: f64,
    /// Size of the homomorphic key-update circuit for one gadget.
    pub key_update_nodes: usize,
}

/// Runs keygen once per entry of `levels`.
pub fn bench(
    scheme: HeScheme,
    kappa: usize,
    source: GadgetSource,
    levels: &[usize],
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(levels.len());
    for &l in levels {
        let start = Instant::now();
        let bundle = keygen(scheme, kappa, l, source, &mut rng)?;
        let keygen_ms = start.elapsed().as_secs_f64() * 1e3;
        let (qubits_per_gadget, key_update_nodes) = match bundle.gadgets.first() {
            Some(g) => (g.num_qubits(), key_update_expr_steps(g.info.m, g.info.steps).size()),
            None => (0, 0),
        };
        rows.push(BenchRow {
            levels: l,
            qubits_per_gadget,
            total_qubits: bundle.gadget_qubits(),
            keygen_ms,
            key_update_nodes,
        });
    }
    Ok(rows)
}

pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>4}  {:>14}  {:>12}  {:>10}  {:>16}\n",
        "L", "qubits/gadget", "total qubits", "keygen ms", "key-update nodes"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>4}  {:>14}  {:>12}  {:>10.3}  {:>16}\n",
            r.levels, r.qubits_per_gadget, r.total_qubits, r.keygen_ms, r.key_update_nodes
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn or_chain_scales_linearly() {
        let rows = bench(HeScheme::Transparent, 8, GadgetSource::OrExample, &[1, 2, 4, 8], 1).unwrap();
        let totals: Vec<usize> = rows.iter().map(|r| r.total_qubits).collect();
        assert_eq!(totals, [40, 80, 160, 320]);
        assert!(rows.iter().all(|r| r.qubits_per_gadget == 40));
        let table = render_table(&rows);
        assert_eq!(table.lines().count(), 5);
        assert!(table.lines().nth(4).unwrap().contains("320"));
    }

    #[test]
    fn zero_levels() {
        let rows = bench(HeScheme::Toy, 4, GadgetSource::ToyGh, &[0], 1).unwrap();
        assert_eq!(rows[0].total_qubits, 0);
    }
}
