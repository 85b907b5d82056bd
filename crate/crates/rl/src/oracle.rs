//! Exhaustive search over action sequences, for small circuits. It bounds
//! what any policy can reach within the same step cap.

use std::collections::HashMap;

use qpredict_core::device::DeviceModel;
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::{MappingState, PassAction, PassKind};
use qpredict_core::Circuit;

use crate::env::{mask_for, Episode};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub score: f64,
    /// A shortest best sequence, ending in `terminate` when the result is
    /// executable.
    pub actions: Vec<PassAction>,
    /// Distinct states expanded.
    pub states: usize,
}

type Key = (u64, MappingState, usize);

struct Search<'a> {
    d: &'a DeviceModel,
    memo: HashMap<Key, (f64, Vec<PassAction>)>,
}

impl Search<'_> {
    /// Best score reachable from `ep` within `left` further steps. An
    /// executable state can always be cashed in, by `terminate` or by the
    /// step cap, so it scores at least its own value.
    fn value(&mut self, ep: &Episode<'_>, left: usize) -> (f64, Vec<PassAction>) {
        let key = (ep.circuit.fingerprint(), ep.mapping.clone(), left);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let mut best = if ep.status.executable() {
            let end = if left > 0 {
                vec![PassAction::Terminate]
            } else {
                vec![]
            };
            (ep.score(), end)
        } else {
            (0.0, vec![])
        };
        if left > 0 {
            let mask = mask_for(ep.status, ep.mapping.layout.is_some());
            for a in PassAction::ALL {
                if !mask[a.index()] || a == PassAction::Terminate {
                    continue;
                }
                // With one step left only a placing action can give an
                // unplaced circuit the layout that executability needs.
                let places = matches!(a.kind(), PassKind::Layout | PassKind::CombinedMapping);
                if left == 1 && ep.mapping.layout.is_none() && !places {
                    continue;
                }
                let Ok((c, ms)) = a.apply(&ep.circuit, self.d, &ep.mapping) else {
                    continue;
                };
                if c == ep.circuit && ms == ep.mapping {
                    continue;
                }
                let mut next = ep.clone();
                next.set_state(c, ms);
                let (v, rest) = self.value(&next, left - 1);
                let better =
                    v > best.0 + 1e-12 || (v >= best.0 - 1e-12 && v > 0.0 && rest.len() + 1 < best.1.len());
                if better {
                    let mut seq = vec![a];
                    seq.extend(rest);
                    best = (v, seq);
                }
            }
        }
        self.memo.insert(key, best.clone());
        best
    }
}

pub const MAX_ORACLE_QUBITS: usize = 6;
pub const MAX_ORACLE_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("exhaustive search is limited to {MAX_ORACLE_QUBITS} qubits and {MAX_ORACLE_LEN} steps (got {qubits} qubits, {len} steps)")]
    TooBig { qubits: usize, len: usize },
}

/// Best score over all legal action sequences of at most `max_len` steps
/// from `c` with mapping state `ms`.
/// Exponential in `max_len`; memoised on states.
pub fn brute_force(
    c: &Circuit,
    d: &DeviceModel,
    fom: FigureOfMerit,
    max_len: usize,
    ms: &MappingState,
) -> Result<OracleResult, OracleError> {
    if c.num_qubits() > MAX_ORACLE_QUBITS || max_len > MAX_ORACLE_LEN {
        return Err(OracleError::TooBig {
            qubits: c.num_qubits(),
            len: max_len,
        });
    }
    let ep = Episode::with_mapping(c.clone(), d, fom, max_len.max(1), ms.clone());
    let mut s = Search {
        d,
        memo: HashMap::new(),
    };
    let (score, actions) = s.value(&ep, max_len);
    Ok(OracleResult {
        score,
        actions,
        states: s.memo.len(),
    })
}
