//! Memoised pass applications. Passes are deterministic given the circuit,
//! the mapping state and the action, so episodes that revisit a state reuse
//! the earlier result.

use std::collections::HashMap;

use qpredict_core::passes::{MappingState, PassAction, PassError};
use qpredict_core::Circuit;

use crate::env::{Episode, StepError};

type Key = (u64, MappingState, usize);

pub struct TransitionCache {
    map: HashMap<Key, Result<(Circuit, MappingState), PassError>>,
    capacity: usize,
    pub hits: u64,
    pub misses: u64,
}

impl TransitionCache {
    /// Holds at most `capacity` results; it is emptied when full.
    pub fn new(capacity: usize) -> Self {
        TransitionCache {
            map: HashMap::new(),
            capacity: capacity.max(1),
            hits: 0,
            misses: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(
        &mut self,
        a: PassAction,
        c: &Circuit,
        ep: &Episode<'_>,
    ) -> Result<(Circuit, MappingState), PassError> {
        let key = (c.fingerprint(), ep.mapping.clone(), a.index());
        if let Some(r) = self.map.get(&key) {
            self.hits += 1;
            return r.clone();
        }
        self.misses += 1;
        let r = a.apply(c, ep.device, &ep.mapping);
        if self.map.len() >= self.capacity {
            self.map.clear();
        }
        self.map.insert(key, r.clone());
        r
    }
}

impl Default for TransitionCache {
    fn default() -> Self {
        TransitionCache::new(20_000)
    }
}

impl Episode<'_> {
    /// [`Episode::step`] through a cache.
    pub fn step_cached(&mut self, a: PassAction, cache: &mut TransitionCache) -> Result<f64, StepError> {
        if !self.mask()?[a.index()] {
            return Err(StepError::Masked(a.id()));
        }
        if a != PassAction::Terminate {
            let (c, ms) = cache.apply(a, &self.circuit, self)?;
            self.set_state(c, ms);
        }
        self.steps_taken += 1;
        if a == PassAction::Terminate || self.steps_taken >= self.max_steps {
            Ok(self.finish_now())
        } else {
            Ok(0.0)
        }
    }
}
