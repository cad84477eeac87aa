//! Simulator against closed forms on single-key Poisson workloads.

use freshlab::freshmodel::{
    normalized_freshness, normalized_staleness, strict_invalidation_costs, strict_invalidation_stationary_p,
    CostParams, ModelParams, ModelPolicy,
};
use freshlab::policies::PolicyDescriptor;
use freshlab::simcore::{audit_staleness, run, run_detailed, SimConfig, TtlClock};
use freshlab::workload::{generate, EventStream, PoissonSpec, WorkloadSpec};

const LAMBDA: f64 = 10.0;

fn costs() -> CostParams {
    CostParams::new(288.0, 32.0, 320.0).unwrap()
}

fn single_key(r: f64, duration: f64, seed: u64) -> EventStream {
    generate(&WorkloadSpec::Poisson(PoissonSpec::new(LAMBDA, r, 1, duration, seed))).unwrap()
}

fn pooled(policy: PolicyDescriptor, r: f64, t: f64, seeds: u64) -> (f64, f64) {
    let (mut cost, mut reads, mut stale, mut resident) = (0.0, 0, 0, 0);
    for seed in 0..seeds {
        let m = run(&single_key(r, 1e4 * t, seed), &SimConfig::new(t, 4, costs(), policy)).unwrap();
        cost += m.freshness_cost;
        reads += m.reads_total;
        stale += m.stale_misses;
        resident += m.reads_with_resident_object;
    }
    (cost / reads as f64, stale as f64 / resident as f64)
}

#[test]
fn baselines_track_their_closed_forms() {
    for t in [0.02, 0.2, 2.0] {
        let p = ModelParams::new(LAMBDA, 0.5, t).unwrap().with_horizon(1e4 * t).unwrap();
        let cases = [
            (PolicyDescriptor::TtlExpiry, ModelPolicy::TtlExpiry, false),
            (PolicyDescriptor::TtlPolling, ModelPolicy::TtlPolling, true),
            (PolicyDescriptor::AlwaysUpdate, ModelPolicy::Update, true),
        ];
        for (policy, model, freshness) in cases {
            let (cf, cs) = pooled(policy, 0.5, t, 4);
            let (sim, want) = if freshness {
                (cf, normalized_freshness(&p, &costs(), model).unwrap())
            } else {
                (cs, normalized_staleness(&p, model).unwrap())
            };
            assert!((sim / want - 1.0).abs() < 0.08, "{policy} T={t}: {sim} vs {want}");
        }
    }
}

#[test]
fn invalidation_matches_the_strict_form() {
    for (r, t) in [(0.5, 0.05), (0.5, 1.0), (0.9, 0.3), (0.3, 5.0)] {
        let p = ModelParams::new(LAMBDA, r, t).unwrap().with_horizon(1e4 * t).unwrap();
        let (cf, _) = pooled(PolicyDescriptor::AlwaysInvalidate, r, t, 4);
        let want = strict_invalidation_costs(&p, &costs()).freshness_cost / p.expected_reads();
        assert!((cf / want - 1.0).abs() < 0.05, "r={r} T={t}: {cf} vs {want}");
    }
}

#[test]
fn invalidated_fraction_matches_strict_stationary_p() {
    let (r, t) = (0.5, 0.5);
    let m = run(
        &single_key(r, 1e5 * t, 3),
        &SimConfig::new(t, 1, costs(), PolicyDescriptor::AlwaysInvalidate),
    )
    .unwrap();
    let want = strict_invalidation_stationary_p(&ModelParams::new(LAMBDA, r, t).unwrap());
    let got = m.invalidated_fraction().unwrap();
    assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn ttl_expiry_small_t_misses_almost_always() {
    // T = 1e-3 of the mean gap between reads.
    let t = 1e-3 / (LAMBDA * 0.5);
    let events = single_key(0.5, 2000.0, 11);
    for clock in [TtlClock::Aligned, TtlClock::PerEntry] {
        let m = run(
            &events,
            &SimConfig::new(t, 1, costs(), PolicyDescriptor::TtlExpiry).with_ttl_clock(clock),
        )
        .unwrap();
        assert!(m.normalized_staleness().unwrap() >= 0.95);
    }
}

#[test]
fn per_entry_ttl_is_audit_clean() {
    let events = single_key(0.7, 500.0, 5);
    for policy in [PolicyDescriptor::TtlExpiry, PolicyDescriptor::TtlPolling] {
        let cfg = SimConfig::new(0.37, 1, costs(), policy)
            .with_ttl_clock(TtlClock::PerEntry)
            .with_audit(true);
        let out = run_detailed(&events, &cfg).unwrap();
        assert!(audit_staleness(&out.audit.unwrap(), 0.37).is_empty());
    }
}

#[test]
fn adaptive_rates_mode_follows_the_threshold() {
    use freshlab::freshmodel::{decide_throughput, ThresholdMode};
    use freshlab::simcore::RecordKind;
    for r in [0.2, 0.5, 0.8] {
        let t = 0.05;
        let events = single_key(r, 5000.0, 2);
        let policy: PolicyDescriptor = "adaptive:estimator=rates".parse().unwrap();
        let cfg = SimConfig::new(t, 1, costs(), policy).with_transcript(true);
        let transcript = run_detailed(&events, &cfg).unwrap().transcript.unwrap();
        let expected = match decide_throughput(
            &ModelParams::new(LAMBDA, r, t).unwrap(),
            &costs(),
            ThresholdMode::PaperThreshold,
        ) {
            freshlab::freshmodel::Decision::Update => RecordKind::UpdateSent,
            freshlab::freshmodel::Decision::Invalidate => RecordKind::InvalidateSent,
        };
        let after_warmup: Vec<_> = transcript
            .iter()
            .filter(|x| x.time > 500.0 && matches!(x.kind, RecordKind::UpdateSent | RecordKind::InvalidateSent))
            .collect();
        let agree = after_warmup.iter().filter(|x| x.kind == expected).count();
        assert!(
            agree as f64 >= 0.99 * after_warmup.len() as f64,
            "r={r}: {agree}/{}",
            after_warmup.len()
        );
    }
}
