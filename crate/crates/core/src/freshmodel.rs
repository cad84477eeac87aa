//! Closed-form freshness model for a single cached object.
//!
//! Requests to an object arrive as a Poisson process of rate `lambda`; each
//! request is independently a read with probability `r`. Time is cut into
//! intervals of length `T` (the staleness bound) and costs are reported over a
//! horizon `T'`. Everything here is a pure function of its inputs.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("request rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("read probability must lie in [0, 1], got {0}")]
    InvalidReadRatio(f64),
    #[error("staleness bound must be positive and finite, got {0}")]
    InvalidStalenessBound(f64),
    #[error("horizon {horizon} is shorter than the staleness bound {bound}")]
    HorizonTooShort { horizon: f64, bound: f64 },
    #[error("cost `{name}` must be non-negative and finite, got {value}")]
    InvalidCost { name: &'static str, value: f64 },
    #[error("no expected reads over the horizon; the stale-miss ratio is undefined")]
    NoExpectedReads,
    #[error("update probability must lie in [0, 1], got {0}")]
    InvalidUpdateProbability(f64),
    #[error("gap recurrence has no fixed point when neither reads nor writes occur")]
    DegenerateGap,
    #[error("stale-miss bound must lie in [0, 1], got {0}")]
    InvalidSlo(f64),
    #[error("expected writes between reads must be finite and non-negative, got {0}")]
    InvalidWriteEstimate(f64),
}

/// Workload and freshness parameters of one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    read_ratio: f64,
    staleness_bound: f64,
    horizon: f64,
}

impl ModelParams {
    /// Parameters with the horizon equal to the staleness bound.
    pub fn new(lambda: f64, read_ratio: f64, staleness_bound: f64) -> Result<Self, ModelError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ModelError::InvalidRate(lambda));
        }
        if !(0.0..=1.0).contains(&read_ratio) {
            return Err(ModelError::InvalidReadRatio(read_ratio));
        }
        if !(staleness_bound.is_finite() && staleness_bound > 0.0) {
            return Err(ModelError::InvalidStalenessBound(staleness_bound));
        }
        Ok(Self {
            lambda,
            read_ratio,
            staleness_bound,
            horizon: staleness_bound,
        })
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self, ModelError> {
        if !(horizon.is_finite() && horizon >= self.staleness_bound) {
            return Err(ModelError::HorizonTooShort {
                horizon,
                bound: self.staleness_bound,
            });
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn read_ratio(&self) -> f64 {
        self.read_ratio
    }

    pub fn staleness_bound(&self) -> f64 {
        self.staleness_bound
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of staleness intervals in the horizon, `T'/T`.
    pub fn intervals(&self) -> f64 {
        self.horizon / self.staleness_bound
    }

    /// Expected reads over the horizon, `lambda * r * T'`.
    pub fn expected_reads(&self) -> f64 {
        self.lambda * self.read_ratio * self.horizon
    }

    pub fn expected_writes(&self) -> f64 {
        self.lambda * (1.0 - self.read_ratio) * self.horizon
    }
}

/// Per-message costs, in abstract cost units.
///
/// `serve` is the cost of serving one read and only normalizes the freshness
/// cost. When `latency_priority` is set the miss cost is treated as unbounded
/// by every decision rule, while accounting keeps using the finite `miss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostParams {
    update: f64,
    invalidate: f64,
    miss: f64,
    serve: f64,
    latency_priority: bool,
}

impl CostParams {
    pub fn new(update: f64, invalidate: f64, miss: f64) -> Result<Self, ModelError> {
        for (name, value) in [("c_update", update), ("c_invalidate", invalidate), ("c_miss", miss)] {
            check_cost(name, value)?;
        }
        Ok(Self {
            update,
            invalidate,
            miss,
            serve: 1.0,
            latency_priority: false,
        })
    }

    pub fn with_serve(mut self, serve: f64) -> Result<Self, ModelError> {
        check_cost("c_serve", serve)?;
        self.serve = serve;
        Ok(self)
    }

    pub fn with_latency_priority(mut self, on: bool) -> Self {
        self.latency_priority = on;
        self
    }

    pub fn update(&self) -> f64 {
        self.update
    }

    pub fn invalidate(&self) -> f64 {
        self.invalidate
    }

    pub fn miss(&self) -> f64 {
        self.miss
    }

    pub fn serve(&self) -> f64 {
        self.serve
    }

    pub fn latency_priority(&self) -> bool {
        self.latency_priority
    }

    /// The standing assumption `c_update < c_miss`. The model still evaluates
    /// when it fails; callers surface it as a warning.
    pub fn update_cheaper_than_miss(&self) -> bool {
        self.update < self.miss
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        let scaled = Self::new(self.update * factor, self.invalidate * factor, self.miss * factor)?;
        Ok(Self {
            serve: self.serve,
            latency_priority: self.latency_priority,
            ..scaled
        })
    }
}

fn check_cost(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidCost { name, value })
    }
}

/// Freshness cost (cost units) and staleness cost (stale-read misses) over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PolicyCosts {
    pub freshness_cost: f64,
    pub staleness_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Decision {
    Update,
    Invalidate,
}

/// Policies that have a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ModelPolicy {
    TtlExpiry,
    TtlPolling,
    Update,
    Invalidate,
}

impl ModelPolicy {
    pub const ALL: [ModelPolicy; 4] = [
        ModelPolicy::TtlExpiry,
        ModelPolicy::TtlPolling,
        ModelPolicy::Update,
        ModelPolicy::Invalidate,
    ];

    pub fn costs(self, p: &ModelParams, c: &CostParams) -> PolicyCosts {
        match self {
            ModelPolicy::TtlExpiry => ttl_expiry_costs(p, c),
            ModelPolicy::TtlPolling => ttl_polling_costs(p, c),
            ModelPolicy::Update => update_policy_costs(p, c),
            ModelPolicy::Invalidate => invalidation_costs(p, c),
        }
    }
}

/// Which form of the throughput rule [`decide_throughput`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ThresholdMode {
    /// `c_u < P_R / (P_R + P_W) * (c_m + c_i)`.
    #[default]
    PaperThreshold,
    /// Sign of the `k` coefficient of the expected gap.
    GapArgmin,
}

/// Probability of at least one read in an interval of length `T`.
pub fn prob_read(p: &ModelParams) -> f64 {
    one_minus_exp_neg(p.lambda * p.read_ratio * p.staleness_bound)
}

/// Probability of at least one write in an interval of length `T`.
pub fn prob_write(p: &ModelParams) -> f64 {
    one_minus_exp_neg(p.lambda * (1.0 - p.read_ratio) * p.staleness_bound)
}

// 1 - e^{-x} without cancellation for small x.
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

pub fn ttl_expiry_costs(p: &ModelParams, c: &CostParams) -> PolicyCosts {
    let staleness_cost = p.intervals() * prob_read(p);
    PolicyCosts {
        freshness_cost: staleness_cost * c.miss,
        staleness_cost,
    }
}

pub fn ttl_polling_costs(p: &ModelParams, c: &CostParams) -> PolicyCosts {
    PolicyCosts {
        freshness_cost: c.miss * p.intervals(),
        staleness_cost: 0.0,
    }
}

pub fn update_policy_costs(p: &ModelParams, c: &CostParams) -> PolicyCosts {
    PolicyCosts {
        freshness_cost: p.intervals() * prob_write(p) * c.update,
        staleness_cost: 0.0,
    }
}

/// Stationary probability that the object is invalidated at an interval boundary.
pub fn invalidation_stationary_p(p: &ModelParams) -> f64 {
    let (pr, pw) = (prob_read(p), prob_write(p));
    if pw == 0.0 {
        0.0
    } else if pr == 0.0 {
        1.0
    } else {
        pw / (pr + pw)
    }
}

/// Stationary invalidated probability of the two-state interval chain
/// (valid -> invalidated on a write, invalidated -> valid on a read), found by
/// iterating the chain's transition map until it stops moving.
///
/// The lazy chain `(P + I) / 2` is iterated so that `P_R = P_W = 1` (a chain
/// that flips every interval) still converges.
pub fn invalidation_stationary_by_iteration(p: &ModelParams, tolerance: f64, max_steps: usize) -> f64 {
    let (pr, pw) = (prob_read(p), prob_write(p));
    let mut invalidated = 0.0_f64;
    for _ in 0..max_steps {
        let stepped = (1.0 - invalidated) * pw + invalidated * (1.0 - pr);
        let next = 0.5 * (invalidated + stepped);
        if (next - invalidated).abs() <= tolerance {
            return next;
        }
        invalidated = next;
    }
    invalidated
}

/// `P_R P_W / (P_R + P_W)`: expected stale misses (and invalidates) per interval.
fn invalidation_rate(p: &ModelParams) -> f64 {
    let (pr, pw) = (prob_read(p), prob_write(p));
    if pr + pw == 0.0 {
        0.0
    } else {
        pr * pw / (pr + pw)
    }
}

pub fn invalidation_costs(p: &ModelParams, c: &CostParams) -> PolicyCosts {
    let staleness_cost = p.intervals() * invalidation_rate(p);
    PolicyCosts {
        freshness_cost: staleness_cost * (c.miss + c.invalidate),
        staleness_cost,
    }
}

/// Probability that an interval holds a read and, after its first read, a write.
fn read_then_write(p: &ModelParams) -> f64 {
    let t = p.staleness_bound;
    let a = p.lambda * p.read_ratio;
    let b = p.lambda * (1.0 - p.read_ratio);
    let d = (a - b) * t;
    // integral of e^{-(a-b)s} over [0, T]
    let span = if d.abs() < 1e-12 { t } else { -(-d).exp_m1() / (a - b) };
    (prob_read(p) - a * (-b * t).exp() * span).max(0.0)
}

/// Stationary invalidated probability when a write that follows a refill in
/// the same interval triggers another invalidate at the next boundary.
pub fn strict_invalidation_stationary_p(p: &ModelParams) -> f64 {
    let (pr, pw) = (prob_read(p), prob_write(p));
    let leave = pr - read_then_write(p);
    if pw == 0.0 {
        0.0
    } else if leave <= 0.0 {
        1.0
    } else {
        pw / (leave + pw)
    }
}

/// Invalidation costs under the same rule as [`strict_invalidation_stationary_p`].
/// Agrees with [`invalidation_costs`] as `lambda T -> 0` and is up to twice as
/// large once every interval holds several requests.
pub fn strict_invalidation_costs(p: &ModelParams, c: &CostParams) -> PolicyCosts {
    let staleness_cost = p.intervals() * strict_invalidation_stationary_p(p) * prob_read(p);
    PolicyCosts {
        freshness_cost: staleness_cost * (c.miss + c.invalidate),
        staleness_cost,
    }
}

/// Stale-miss ratio `C_S / (lambda r T')`.
pub fn normalized_staleness(p: &ModelParams, policy: ModelPolicy) -> Result<f64, ModelError> {
    let reads = p.expected_reads();
    if reads <= 0.0 {
        return Err(ModelError::NoExpectedReads);
    }
    Ok(match policy {
        ModelPolicy::TtlPolling | ModelPolicy::Update => 0.0,
        // Divide per interval first; T'/T cancels and small-T precision survives.
        ModelPolicy::TtlExpiry => prob_read(p) / (p.lambda * p.read_ratio * p.staleness_bound),
        ModelPolicy::Invalidate => invalidation_rate(p) / (p.lambda * p.read_ratio * p.staleness_bound),
    })
}

/// Freshness cost over the cost of serving every expected read.
pub fn normalized_freshness(p: &ModelParams, c: &CostParams, policy: ModelPolicy) -> Result<f64, ModelError> {
    let useful = p.expected_reads() * c.serve;
    if useful <= 0.0 {
        return Err(ModelError::NoExpectedReads);
    }
    Ok(policy.costs(p, c).freshness_cost / useful)
}

struct GapTerms {
    wasted_invalidate: f64,
    idle_write: f64,
    k_coefficient: f64,
    denominator: f64,
}

fn gap_terms(p: &ModelParams, c: &CostParams) -> Result<GapTerms, ModelError> {
    let (pr, pw) = (prob_read(p), prob_write(p));
    // 1 - (1 - P_R)(1 - P_W), expanded to stay accurate when both are small.
    let denominator = pr + pw - pr * pw;
    if denominator <= 0.0 {
        return Err(ModelError::DegenerateGap);
    }
    let wasted_invalidate = pr * (c.invalidate + c.miss - c.update);
    let idle_write = (1.0 - pr) * pw;
    Ok(GapTerms {
        wasted_invalidate,
        idle_write,
        k_coefficient: idle_write * c.update - idle_write * c.invalidate - wasted_invalidate,
        denominator,
    })
}

/// Expected cost gap to the omniscient policy when updating with probability `k`.
pub fn gap(k: f64, p: &ModelParams, c: &CostParams) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(ModelError::InvalidUpdateProbability(k));
    }
    let t = gap_terms(p, c)?;
    // Summed per case rather than as constant + k * slope, which cancels at k = 1.
    let numerator =
        (1.0 - k) * t.wasted_invalidate + k * t.idle_write * c.update + (1.0 - k) * t.idle_write * c.invalidate;
    Ok(numerator / t.denominator)
}

/// `d gap / d k`. The gap is affine in `k`; a negative slope favours updates.
pub fn gap_slope(p: &ModelParams, c: &CostParams) -> Result<f64, ModelError> {
    let t = gap_terms(p, c)?;
    Ok(t.k_coefficient / t.denominator)
}

/// Right-hand side of the throughput rule, `P_R / (P_R + P_W) * (c_m + c_i)`.
pub fn update_threshold(p: &ModelParams, c: &CostParams) -> f64 {
    let (pr, pw) = (prob_read(p), prob_write(p));
    if pr + pw == 0.0 {
        return 0.0;
    }
    pr / (pr + pw) * (c.miss + c.invalidate)
}

/// Update-vs-invalidate choice that minimizes throughput overhead. Exact ties
/// go to `Invalidate`.
pub fn decide_throughput(p: &ModelParams, c: &CostParams, mode: ThresholdMode) -> Decision {
    if c.latency_priority {
        return Decision::Update;
    }
    let update = match mode {
        ThresholdMode::PaperThreshold => c.update < update_threshold(p, c),
        ThresholdMode::GapArgmin => gap_slope(p, c).map(|s| s < 0.0).unwrap_or(false),
    };
    if update {
        Decision::Update
    } else {
        Decision::Invalidate
    }
}

/// Throughput rule subject to a bound `slo` on the stale-miss ratio under
/// invalidation: update when updating is cheaper or when invalidating would
/// break the bound.
pub fn decide_with_slo(p: &ModelParams, c: &CostParams, slo: f64) -> Result<Decision, ModelError> {
    check_slo(slo)?;
    if decide_throughput(p, c, ThresholdMode::PaperThreshold) == Decision::Update {
        return Ok(Decision::Update);
    }
    let violates = match normalized_staleness(p, ModelPolicy::Invalidate) {
        Ok(ratio) => ratio > slo,
        Err(ModelError::NoExpectedReads) => false,
        Err(e) => return Err(e),
    };
    Ok(if violates {
        Decision::Update
    } else {
        Decision::Invalidate
    })
}

/// The `T -> 0` form of [`decide_with_slo`], which depends on `r` alone.
pub fn decide_with_slo_limit(read_ratio: f64, c: &CostParams, slo: f64) -> Result<Decision, ModelError> {
    check_slo(slo)?;
    if !(0.0..=1.0).contains(&read_ratio) {
        return Err(ModelError::InvalidReadRatio(read_ratio));
    }
    let update = c.latency_priority || (c.invalidate + c.miss) * read_ratio > c.update || 1.0 - read_ratio > slo;
    Ok(if update { Decision::Update } else { Decision::Invalidate })
}

fn check_slo(slo: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&slo) {
        Ok(())
    } else {
        Err(ModelError::InvalidSlo(slo))
    }
}

/// Pragmatic rule on the expected number of writes between reads: `E[W]`
/// updates cost `E[W] c_u`, one invalidate plus one miss costs `c_i + c_m`.
pub fn decide_from_ew(expected_writes: f64, c: &CostParams) -> Decision {
    debug_assert!(expected_writes.is_finite() && expected_writes >= 0.0);
    if c.latency_priority || expected_writes * c.update < c.miss + c.invalidate {
        Decision::Update
    } else {
        Decision::Invalidate
    }
}

/// Checked variant of [`decide_from_ew`].
pub fn try_decide_from_ew(expected_writes: f64, c: &CostParams) -> Result<Decision, ModelError> {
    if !(expected_writes.is_finite() && expected_writes >= 0.0) {
        return Err(ModelError::InvalidWriteEstimate(expected_writes));
    }
    Ok(decide_from_ew(expected_writes, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, r: f64, t: f64) -> ModelParams {
        ModelParams::new(lambda, r, t).unwrap()
    }

    fn costs(u: f64, i: f64, m: f64) -> CostParams {
        CostParams::new(u, i, m).unwrap()
    }

    #[test]
    fn prob_read_examples() {
        assert!((prob_read(&params(1.0, 0.9, 0.1)) - 0.086_068_814_728_771_81).abs() < 1e-6);
        assert_eq!(prob_read(&params(3.0, 0.0, 2.0)), 0.0);
        assert!((prob_read(&params(10.0, 0.5, 1e6)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prob_write_examples() {
        assert!((prob_write(&params(1.0, 0.9, 0.1)) - 0.009_950_166_250_831_946).abs() < 1e-7);
        assert_eq!(prob_write(&params(5.0, 1.0, 1.0)), 0.0);
        assert!((prob_write(&params(1.0, 0.5, 4f64.ln())) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ttl_expiry_examples() {
        let c = costs(0.5, 0.1, 1.0);
        let worked = ttl_expiry_costs(&params(1.0, 0.9, 0.1), &c);
        assert!((worked.freshness_cost - 0.086).abs() / 0.086 < 1e-3);

        let none = ttl_expiry_costs(&params(1.0, 0.0, 0.1), &c);
        assert_eq!(none, PolicyCosts::default());

        let p = params(10.0, 0.5, 0.2).with_horizon(10.0).unwrap();
        let long = ttl_expiry_costs(&p, &costs(0.5, 0.1, 2.0));
        assert!((long.staleness_cost - 31.606_027_941_427_88).abs() < 1e-9);
        assert!((long.freshness_cost - 63.212_055_882_855_77).abs() < 1e-9);
    }

    #[test]
    fn ttl_polling_examples() {
        let c = costs(0.5, 0.1, 1.0);
        let one = ttl_polling_costs(&params(1.0, 0.9, 0.3), &c);
        assert_eq!(
            one,
            PolicyCosts {
                freshness_cost: 1.0,
                staleness_cost: 0.0
            }
        );

        let p = params(1.0, 0.9, 0.01).with_horizon(1.0).unwrap();
        assert!((ttl_polling_costs(&p, &c).freshness_cost - 100.0).abs() < 1e-9);

        let slow = params(1.0, 0.9, 0.5).with_horizon(7.0).unwrap();
        let fast = params(100.0, 0.9, 0.5).with_horizon(7.0).unwrap();
        assert_eq!(ttl_polling_costs(&slow, &c), ttl_polling_costs(&fast, &c));
    }

    #[test]
    fn update_policy_examples() {
        let c = costs(0.5, 0.1, 1.0);
        let worked = update_policy_costs(&params(1.0, 0.9, 0.1), &c);
        assert!((worked.freshness_cost - 0.004_975_083_125_415_973).abs() < 1e-6);
        assert_eq!(worked.staleness_cost, 0.0);
        assert_eq!(update_policy_costs(&params(1.0, 1.0, 0.1), &c).freshness_cost, 0.0);
    }

    #[test]
    fn stationary_p_examples() {
        for (lambda, t) in [(1.0, 0.1), (7.0, 3.0), (0.2, 0.01)] {
            assert!((invalidation_stationary_p(&params(lambda, 0.5, t)) - 0.5).abs() < 1e-12);
        }
        assert!((invalidation_stationary_p(&params(1.0, 0.9, 0.1)) - 0.103_627_076_118_893).abs() < 1e-5);
        assert_eq!(invalidation_stationary_p(&params(1.0, 1.0, 0.1)), 0.0);
        assert_eq!(invalidation_stationary_p(&params(1.0, 0.0, 0.1)), 1.0);
    }

    #[test]
    fn stationary_iteration_handles_flipping_chain() {
        let p = params(10.0, 0.5, 1e4);
        let iterated = invalidation_stationary_by_iteration(&p, 1e-15, 1_000_000);
        assert!((iterated - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalidation_examples() {
        let c = costs(0.5, 0.3, 1.0);
        let worked = invalidation_costs(&params(1.0, 0.9, 0.1), &c);
        let expected = 0.00892 * (c.invalidate() + c.miss());
        assert!((worked.freshness_cost - expected).abs() / expected < 1e-3);
        for r in [0.0, 1.0] {
            assert_eq!(invalidation_costs(&params(1.0, r, 0.1), &c), PolicyCosts::default());
        }
        let p = params(2.0, 0.4, 0.5);
        assert!(invalidation_costs(&p, &c).staleness_cost < ttl_expiry_costs(&p, &c).staleness_cost);
    }

    #[test]
    fn normalized_staleness_limits() {
        let inv = normalized_staleness(&params(1.0, 0.7, 1e-9), ModelPolicy::Invalidate).unwrap();
        assert!((inv - 0.3).abs() < 1e-6);
        let ttl = normalized_staleness(&params(1.0, 0.7, 1e-9), ModelPolicy::TtlExpiry).unwrap();
        assert!((ttl - 1.0).abs() < 1e-6);
        assert_eq!(
            normalized_staleness(&params(1.0, 0.7, 0.5), ModelPolicy::TtlPolling),
            Ok(0.0)
        );
        assert_eq!(
            normalized_staleness(&params(1.0, 0.0, 0.5), ModelPolicy::Invalidate),
            Err(ModelError::NoExpectedReads)
        );
    }

    #[test]
    fn gap_examples() {
        let c = costs(0.2, 0.05, 1.0);
        let heavy_read = gap(1.0, &params(1.0, 0.999, 0.1), &c).unwrap();
        let heavier = gap(1.0, &params(1.0, 0.999_999, 0.1), &c).unwrap();
        assert!(heavier < heavy_read && heavier < 1e-6);

        let p = params(1.0, 0.9, 0.1);
        let (g0, g1) = (gap(0.0, &p, &c).unwrap(), gap(1.0, &p, &c).unwrap());
        assert!((g1 - 0.019_112_064_947_344_37).abs() < 1e-12);
        assert!((g0 - 0.773_551_740_210_622_5).abs() < 1e-12);
        assert!(g1 < g0);
        assert!((gap(0.5, &p, &c).unwrap() - 0.5 * (g0 + g1)).abs() < 1e-12);
        assert_eq!(gap(1.5, &p, &c), Err(ModelError::InvalidUpdateProbability(1.5)));
    }

    #[test]
    fn throughput_decision_examples() {
        let tiny = 1e-9;
        let c = costs(0.5, 0.1, 1.0);
        assert_eq!(
            decide_throughput(&params(1.0, 0.9, tiny), &c, ThresholdMode::PaperThreshold),
            Decision::Update
        );
        assert_eq!(
            decide_throughput(&params(1.0, 0.1, tiny), &c, ThresholdMode::PaperThreshold),
            Decision::Invalidate
        );
        for r in [0.1, 0.45, 0.46, 0.9] {
            assert_eq!(
                decide_throughput(&params(1.0, r, tiny), &c, ThresholdMode::PaperThreshold),
                decide_throughput(&params(1000.0, r, tiny), &c, ThresholdMode::PaperThreshold),
            );
        }
    }

    #[test]
    fn exact_tie_resolves_to_invalidate() {
        // r = 0.5 gives P_R = P_W, so the threshold is exactly (c_m + c_i) / 2.
        let c = costs(0.75, 0.5, 1.0);
        assert_eq!(update_threshold(&params(3.0, 0.5, 0.25), &c), 0.75);
        assert_eq!(
            decide_throughput(&params(3.0, 0.5, 0.25), &c, ThresholdMode::PaperThreshold),
            Decision::Invalidate
        );
    }

    #[test]
    fn latency_priority_always_updates() {
        let c = costs(1e6, 0.0, 1.0).with_latency_priority(true);
        let p = params(1.0, 0.01, 1.0);
        assert_eq!(
            decide_throughput(&p, &c, ThresholdMode::PaperThreshold),
            Decision::Update
        );
        assert_eq!(decide_throughput(&p, &c, ThresholdMode::GapArgmin), Decision::Update);
        assert_eq!(decide_from_ew(1e9, &c), Decision::Update);
    }

    #[test]
    fn slo_examples() {
        let c = costs(0.5, 0.1, 1.0);
        let p = params(1.0, 0.1, 1e-9);
        assert_eq!(decide_with_slo_limit(0.1, &c, 0.05), Ok(Decision::Update));
        assert_eq!(decide_with_slo(&p, &c, 0.05), Ok(Decision::Update));
        assert_eq!(decide_with_slo_limit(0.1, &c, 0.95), Ok(Decision::Invalidate));
        assert_eq!(decide_with_slo(&p, &c, 0.95), Ok(Decision::Invalidate));
        for r in [0.05, 0.3, 0.5, 0.9] {
            let p = params(1.0, r, 1e-9);
            assert_eq!(
                decide_with_slo(&p, &c, 1.0).unwrap(),
                decide_throughput(&p, &c, ThresholdMode::PaperThreshold)
            );
        }
        assert_eq!(decide_with_slo(&p, &c, 1.5), Err(ModelError::InvalidSlo(1.5)));
    }

    #[test]
    fn ew_examples() {
        let c = costs(0.2, 0.1, 1.0);
        assert_eq!(decide_from_ew(2.0, &c), Decision::Update);
        assert_eq!(decide_from_ew(10.0, &c), Decision::Invalidate);
        assert_eq!(decide_from_ew(0.0, &costs(5.0, 0.1, 1.0)), Decision::Update);
        assert!(try_decide_from_ew(f64::NAN, &c).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 0.5, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.5, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.5, 0.0).is_err());
        assert!(params(1.0, 0.5, 1.0).with_horizon(0.5).is_err());
        assert!(CostParams::new(-1.0, 0.0, 1.0).is_err());
        assert!(!costs(2.0, 0.1, 1.0).update_cheaper_than_miss());
    }

    #[test]
    fn strict_invalidation_limits() {
        let c = CostParams::new(0.2, 0.1, 1.0).unwrap();
        let small = params(1.0, 0.5, 1e-4);
        let ratio =
            strict_invalidation_costs(&small, &c).freshness_cost / invalidation_costs(&small, &c).freshness_cost;
        assert!((ratio - 1.0).abs() < 1e-4, "{ratio}");
        let large = params(10.0, 0.5, 10.0);
        let ratio =
            strict_invalidation_costs(&large, &c).freshness_cost / invalidation_costs(&large, &c).freshness_cost;
        assert!((ratio - 2.0).abs() < 1e-6, "{ratio}");
        for r in [0.0, 1.0] {
            let p = params(3.0, r, 0.7);
            assert_eq!(strict_invalidation_costs(&p, &c), invalidation_costs(&p, &c));
        }
        // a == b takes the limiting branch and matches a nearby unequal pair.
        let near = strict_invalidation_stationary_p(&params(2.0, 0.5 + 1e-9, 0.3));
        assert!((strict_invalidation_stationary_p(&params(2.0, 0.5, 0.3)) - near).abs() < 1e-7);
    }
}
