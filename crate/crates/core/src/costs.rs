//! Per-message cost derivation from a declarative bottleneck profile.
//!
//! CPU-bound deployments pay serialization on the sender and
//! deserialization on the receiver for every message; network-bound ones pay
//! for bytes on the wire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freshmodel::{CostParams, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("profile coefficient `{name}` must be non-negative and finite, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("custom cost profile is missing `{0}`")]
    MissingOverride(&'static str),
    #[error("key size must be positive")]
    EmptyKey,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bottleneck {
    #[default]
    CacheOrBackendCpu,
    Network,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostProfile {
    pub bottleneck: Bottleneck,
    pub ser_per_byte: f64,
    pub deser_per_byte: f64,
    pub fixed_read: f64,
    pub fixed_update_apply: f64,
    pub fixed_delete: f64,
    pub bytes_per_message_overhead: f64,
    pub c_update: Option<f64>,
    pub c_invalidate: Option<f64>,
    pub c_miss: Option<f64>,
    pub c_serve: f64,
    pub prioritize_latency: bool,
}

impl Default for CostProfile {
    fn default() -> Self {
        Self {
            bottleneck: Bottleneck::CacheOrBackendCpu,
            ser_per_byte: 1.0,
            deser_per_byte: 1.0,
            fixed_read: 0.0,
            fixed_update_apply: 0.0,
            fixed_delete: 0.0,
            bytes_per_message_overhead: 0.0,
            c_update: None,
            c_invalidate: None,
            c_miss: None,
            c_serve: 1.0,
            prioritize_latency: false,
        }
    }
}

impl CostProfile {
    pub fn custom(update: f64, invalidate: f64, miss: f64) -> Self {
        Self {
            bottleneck: Bottleneck::Custom,
            c_update: Some(update),
            c_invalidate: Some(invalidate),
            c_miss: Some(miss),
            ..Self::default()
        }
    }

    pub fn network(overhead: f64) -> Self {
        Self {
            bottleneck: Bottleneck::Network,
            bytes_per_message_overhead: overhead,
            ..Self::default()
        }
    }

    /// Every coefficient multiplied by `factor`; sizes and flags are untouched.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ser_per_byte: self.ser_per_byte * factor,
            deser_per_byte: self.deser_per_byte * factor,
            fixed_read: self.fixed_read * factor,
            fixed_update_apply: self.fixed_update_apply * factor,
            fixed_delete: self.fixed_delete * factor,
            bytes_per_message_overhead: self.bytes_per_message_overhead,
            c_update: self.c_update.map(|c| c * factor),
            c_invalidate: self.c_invalidate.map(|c| c * factor),
            c_miss: self.c_miss.map(|c| c * factor),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("ser_per_byte", self.ser_per_byte),
            ("deser_per_byte", self.deser_per_byte),
            ("fixed_read", self.fixed_read),
            ("fixed_update_apply", self.fixed_update_apply),
            ("fixed_delete", self.fixed_delete),
            ("bytes_per_message_overhead", self.bytes_per_message_overhead),
            ("c_serve", self.c_serve),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CostError::InvalidCoefficient { name, value });
            }
        }
        Ok(())
    }
}

/// Derive `(c_u, c_i, c_m)` for objects with the given key and value sizes (bytes).
pub fn derive_costs(profile: &CostProfile, key_size: u64, value_size: u64) -> Result<CostParams, CostError> {
    profile.validate()?;
    if key_size == 0 {
        return Err(CostError::EmptyKey);
    }
    let key = key_size as f64;
    let entry = (key_size + value_size) as f64;

    let (update, invalidate, miss) = match profile.bottleneck {
        Bottleneck::CacheOrBackendCpu => {
            let ser = |bytes: f64| profile.ser_per_byte * bytes;
            let deser = |bytes: f64| profile.deser_per_byte * bytes;
            // Miss: the cache asks for the key and applies the reply; the store
            // decodes the key, reads, and encodes the entry.
            let miss =
                ser(key) + deser(entry) + profile.fixed_update_apply + deser(key) + profile.fixed_read + ser(entry);
            let invalidate = deser(key) + profile.fixed_delete + ser(key);
            let update = deser(entry) + profile.fixed_update_apply + ser(entry);
            (update, invalidate, miss)
        }
        Bottleneck::Network => {
            let overhead = profile.bytes_per_message_overhead;
            let miss = (key + overhead) + (entry + overhead);
            (entry + overhead, key + overhead, miss)
        }
        Bottleneck::Custom => (
            profile.c_update.ok_or(CostError::MissingOverride("c_update"))?,
            profile.c_invalidate.ok_or(CostError::MissingOverride("c_invalidate"))?,
            profile.c_miss.ok_or(CostError::MissingOverride("c_miss"))?,
        ),
    };

    Ok(CostParams::new(update, invalidate, miss)?
        .with_serve(profile.c_serve)?
        .with_latency_priority(profile.prioritize_latency))
}
