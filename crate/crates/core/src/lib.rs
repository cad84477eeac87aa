//! Cache freshness laboratory: closed-form cost model, workload generation,
//! a discrete-event cache simulator, freshness policies, and per-key
//! read/write estimators.

pub mod costs;
pub mod freshmodel;
pub mod policies;
pub mod simcore;
pub mod sketch;
pub mod workload;
