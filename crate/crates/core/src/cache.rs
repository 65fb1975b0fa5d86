//! Process-wide memo of conditional slice sets.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;
use crate::model::RegimeScalars;
use crate::yor::{QuadratureConfig, SliceLayout, SliceSet};

type Key = (u64, u64, u64, bool, String);

/// Slice sets keyed by regime scalars, `dt`, layout and quadrature settings.
#[derive(Debug, Default)]
pub struct SliceCache {
    sets: Mutex<HashMap<Key, Arc<SliceSet>>>,
}

impl SliceCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shared instance used by the pricing engine.
    pub fn global() -> &'static SliceCache {
        static CACHE: OnceLock<SliceCache> = OnceLock::new();
        CACHE.get_or_init(SliceCache::new)
    }

    pub fn get(&self, scalars: RegimeScalars, dt: f64, cfg: &QuadratureConfig, layout: SliceLayout) -> Result<Arc<SliceSet>> {
        let key = (
            scalars.sigma2.to_bits(),
            scalars.nu.to_bits(),
            dt.to_bits(),
            layout == SliceLayout::Payoff,
            format!("{cfg:?}"),
        );
        if let Some(set) = self.lock().get(&key) {
            return Ok(set.clone());
        }
        let set = Arc::new(SliceSet::build(scalars, dt, cfg, layout)?);
        self.lock().insert(key, set.clone());
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.lock().clear();
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<Key, Arc<SliceSet>>> {
        self.sets.lock().unwrap_or_else(|e| e.into_inner())
    }
}
