//! Offload policies: threshold rules mapping a metrics snapshot to a
//! local-or-remote decision.
//!
//! Four metric rules mirror the monitored resources — `jobs`, `cpu`, `mem`,
//! `temp` — plus `all-of`/`any-of` combinators and the `always-local` /
//! `always-remote` constants. The boundary convention is uniform: a metric
//! exactly at its threshold decides Remote, so `jobs:4` caps local
//! concurrency at 4 and the fifth concurrent job is offloaded.

use std::fmt;

use thiserror::Error;

use crate::metrics::{MetricsSnapshot, TEMP_SANITY_MAX_C, TEMP_SANITY_MIN_C};

/// Where a job should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Local,
    Remote,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Local => "local",
            Target::Remote => "remote",
        })
    }
}

/// A routing decision together with the comparison that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffloadDecision {
    pub target: Target,
    /// Metric name and observed-vs-threshold comparison, e.g. `jobs 4 ≥ 4`.
    pub reason: String,
}

/// A parsed policy expression.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Remote iff `jobs_in_flight ≥ n`: admitting one more would exceed the
    /// cap.
    Jobs(u32),
    /// Remote iff `cpu_util ≥ threshold` (fraction in `[0, 1]`).
    Cpu(f64),
    /// Remote iff `mem_util ≥ threshold` (fraction in `[0, 1]`).
    Mem(f64),
    /// Remote iff `cpu_temp_c ≥ threshold` (°C).
    Temp(f64),
    /// Remote iff every child decides Remote.
    AllOf(Vec<PolicySpec>),
    /// Remote iff any child decides Remote.
    AnyOf(Vec<PolicySpec>),
    /// Never offloads, regardless of the snapshot.
    AlwaysLocal,
    /// Always offloads, regardless of the snapshot.
    AlwaysRemote,
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_children(f: &mut fmt::Formatter<'_>, children: &[PolicySpec]) -> fmt::Result {
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{child}")?;
            }
            Ok(())
        }
        match self {
            PolicySpec::Jobs(n) => write!(f, "jobs:{n}"),
            PolicySpec::Cpu(t) => write!(f, "cpu:{t}"),
            PolicySpec::Mem(t) => write!(f, "mem:{t}"),
            PolicySpec::Temp(t) => write!(f, "temp:{t}"),
            PolicySpec::AllOf(children) => {
                f.write_str("all-of(")?;
                write_children(f, children)?;
                f.write_str(")")
            }
            PolicySpec::AnyOf(children) => {
                f.write_str("any-of(")?;
                write_children(f, children)?;
                f.write_str(")")
            }
            PolicySpec::AlwaysLocal => f.write_str("always-local"),
            PolicySpec::AlwaysRemote => f.write_str("always-remote"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyParseError {
    #[error("policy syntax error at byte {at}: {detail}")]
    Grammar { at: usize, detail: String },
    #[error("{metric} threshold {value} is outside {range}")]
    OutOfRange {
        metric: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Parses the policy grammar: `kind:value`, `all-of(spec,spec,...)`,
/// `any-of(...)`, `always-local`, `always-remote`. Whitespace around tokens
/// is ignored.
pub fn parse_policy(spec: &str) -> Result<PolicySpec, PolicyParseError> {
    let mut parser = Parser {
        text: spec.as_bytes(),
        pos: 0,
    };
    parser.skip_whitespace();
    let policy = parser.parse_spec()?;
    parser.skip_whitespace();
    if parser.pos != parser.text.len() {
        return Err(parser.grammar("trailing input after policy"));
    }
    Ok(policy)
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn grammar(&self, detail: impl Into<String>) -> PolicyParseError {
        PolicyParseError::Grammar {
            at: self.pos,
            detail: detail.into(),
        }
    }

    fn skip_whitespace(&mut self) {
        while self.text.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, byte: u8) -> Result<(), PolicyParseError> {
        if self.text.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.grammar(format!("expected {:?}", byte as char)))
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self
            .text
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_lowercase() || *b == b'-')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.text[start..self.pos]).expect("ascii subset")
    }

    fn parse_spec(&mut self) -> Result<PolicySpec, PolicyParseError> {
        let at = self.pos;
        match self.word() {
            "always-local" => Ok(PolicySpec::AlwaysLocal),
            "always-remote" => Ok(PolicySpec::AlwaysRemote),
            "all-of" => Ok(PolicySpec::AllOf(self.parse_children()?)),
            "any-of" => Ok(PolicySpec::AnyOf(self.parse_children()?)),
            "jobs" => {
                let value = self.parse_threshold()?;
                if value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&value) {
                    return Err(PolicyParseError::OutOfRange {
                        metric: "jobs",
                        value,
                        range: "nonnegative integers",
                    });
                }
                Ok(PolicySpec::Jobs(value as u32))
            }
            "cpu" => self.parse_fraction("cpu").map(PolicySpec::Cpu),
            "mem" => self.parse_fraction("mem").map(PolicySpec::Mem),
            "temp" => {
                let value = self.parse_threshold()?;
                if !(TEMP_SANITY_MIN_C..=TEMP_SANITY_MAX_C).contains(&value) {
                    return Err(PolicyParseError::OutOfRange {
                        metric: "temp",
                        value,
                        range: "[-20, 120] °C",
                    });
                }
                Ok(PolicySpec::Temp(value))
            }
            "" => Err(PolicyParseError::Grammar {
                at,
                detail: "expected a policy".into(),
            }),
            other => Err(PolicyParseError::Grammar {
                at,
                detail: format!("unknown policy kind {other:?}"),
            }),
        }
    }

    fn parse_fraction(&mut self, metric: &'static str) -> Result<f64, PolicyParseError> {
        let value = self.parse_threshold()?;
        if !(0.0..=1.0).contains(&value) {
            return Err(PolicyParseError::OutOfRange {
                metric,
                value,
                range: "[0, 1]",
            });
        }
        Ok(value)
    }

    fn parse_threshold(&mut self) -> Result<f64, PolicyParseError> {
        self.eat(b':')?;
        self.skip_whitespace();
        let start = self.pos;
        while self
            .text
            .get(self.pos)
            .is_some_and(|b| !matches!(b, b',' | b')') && !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        let raw = std::str::from_utf8(&self.text[start..self.pos]).map_err(|_| {
            PolicyParseError::Grammar {
                at: start,
                detail: "threshold is not valid UTF-8".into(),
            }
        })?;
        raw.parse().map_err(|_| PolicyParseError::Grammar {
            at: start,
            detail: format!("threshold {raw:?} is not a number"),
        })
    }

    fn parse_children(&mut self) -> Result<Vec<PolicySpec>, PolicyParseError> {
        self.eat(b'(')?;
        let mut children = Vec::new();
        loop {
            self.skip_whitespace();
            children.push(self.parse_spec()?);
            self.skip_whitespace();
            match self.text.get(self.pos) {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(children);
                }
                _ => return Err(self.grammar("expected ',' or ')'")),
            }
        }
    }
}

/// Evaluates `policy` against `snapshot`.
///
/// Pure and total: identical inputs always produce the identical decision,
/// and every decision carries a human-readable reason. Combinators report a
/// witness child when one child alone settled the outcome, and all children
/// otherwise.
pub fn decide(policy: &PolicySpec, snapshot: &MetricsSnapshot) -> OffloadDecision {
    fn threshold(name: &str, observed: impl fmt::Display, limit: impl fmt::Display, over: bool) -> OffloadDecision {
        OffloadDecision {
            target: if over { Target::Remote } else { Target::Local },
            reason: format!(
                "{name} {observed} {} {limit}",
                if over { "≥" } else { "<" }
            ),
        }
    }

    match policy {
        PolicySpec::Jobs(n) => threshold(
            "jobs",
            snapshot.jobs_in_flight,
            n,
            snapshot.jobs_in_flight >= *n,
        ),
        PolicySpec::Cpu(t) => threshold("cpu", snapshot.cpu_util, t, snapshot.cpu_util >= *t),
        PolicySpec::Mem(t) => threshold("mem", snapshot.mem_util, t, snapshot.mem_util >= *t),
        PolicySpec::Temp(t) => threshold("temp", snapshot.cpu_temp_c, t, snapshot.cpu_temp_c >= *t),
        PolicySpec::AllOf(children) => {
            let decisions: Vec<OffloadDecision> =
                children.iter().map(|c| decide(c, snapshot)).collect();
            match decisions.iter().find(|d| d.target == Target::Local) {
                Some(witness) => OffloadDecision {
                    target: Target::Local,
                    reason: witness.reason.clone(),
                },
                None => OffloadDecision {
                    target: Target::Remote,
                    reason: join_reasons(&decisions),
                },
            }
        }
        PolicySpec::AnyOf(children) => {
            let decisions: Vec<OffloadDecision> =
                children.iter().map(|c| decide(c, snapshot)).collect();
            match decisions.iter().find(|d| d.target == Target::Remote) {
                Some(witness) => OffloadDecision {
                    target: Target::Remote,
                    reason: witness.reason.clone(),
                },
                None => OffloadDecision {
                    target: Target::Local,
                    reason: join_reasons(&decisions),
                },
            }
        }
        PolicySpec::AlwaysLocal => OffloadDecision {
            target: Target::Local,
            reason: "always-local".into(),
        },
        PolicySpec::AlwaysRemote => OffloadDecision {
            target: Target::Remote,
            reason: "always-remote".into(),
        },
    }
}

fn join_reasons(decisions: &[OffloadDecision]) -> String {
    decisions
        .iter()
        .map(|d| d.reason.as_str())
        .collect::<Vec<_>>()
        .join(" and ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snapshot(jobs: u32, cpu: f64, mem: f64, temp: f64) -> MetricsSnapshot {
        MetricsSnapshot {
            jobs_in_flight: jobs,
            cpu_util: cpu,
            mem_util: mem,
            cpu_temp_c: temp,
            ..MetricsSnapshot::default()
        }
    }

    fn target(policy: &PolicySpec, snap: &MetricsSnapshot) -> Target {
        decide(policy, snap).target
    }

    #[test]
    fn parse_the_four_metric_rules() {
        assert_eq!(parse_policy("jobs:4"), Ok(PolicySpec::Jobs(4)));
        assert_eq!(parse_policy("cpu:0.75"), Ok(PolicySpec::Cpu(0.75)));
        assert_eq!(parse_policy("mem:0.75"), Ok(PolicySpec::Mem(0.75)));
        assert_eq!(parse_policy("temp:75"), Ok(PolicySpec::Temp(75.0)));
    }

    #[test]
    fn parse_constants_and_combinators() {
        assert_eq!(parse_policy("always-local"), Ok(PolicySpec::AlwaysLocal));
        assert_eq!(parse_policy("always-remote"), Ok(PolicySpec::AlwaysRemote));
        assert_eq!(
            parse_policy("any-of(all-of(cpu:0.75,mem:0.75),temp:75)"),
            Ok(PolicySpec::AnyOf(vec![
                PolicySpec::AllOf(vec![PolicySpec::Cpu(0.75), PolicySpec::Mem(0.75)]),
                PolicySpec::Temp(75.0),
            ]))
        );
    }

    #[test]
    fn parse_tolerates_whitespace() {
        assert_eq!(
            parse_policy(" all-of( jobs:4 , temp:75 ) "),
            Ok(PolicySpec::AllOf(vec![
                PolicySpec::Jobs(4),
                PolicySpec::Temp(75.0),
            ]))
        );
    }

    #[test]
    fn out_of_range_thresholds_are_rejected() {
        assert_eq!(
            parse_policy("cpu:1.5"),
            Err(PolicyParseError::OutOfRange {
                metric: "cpu",
                value: 1.5,
                range: "[0, 1]",
            })
        );
        assert!(matches!(
            parse_policy("temp:400"),
            Err(PolicyParseError::OutOfRange { metric: "temp", .. })
        ));
        assert!(matches!(
            parse_policy("jobs:2.5"),
            Err(PolicyParseError::OutOfRange { metric: "jobs", .. })
        ));
    }

    #[test]
    fn grammar_errors_name_the_position() {
        assert!(matches!(
            parse_policy("bogus:3"),
            Err(PolicyParseError::Grammar { at: 0, .. })
        ));
        assert!(matches!(
            parse_policy("jobs:"),
            Err(PolicyParseError::Grammar { at: 5, .. })
        ));
        assert!(matches!(
            parse_policy("all-of()"),
            Err(PolicyParseError::Grammar { .. })
        ));
        assert!(matches!(
            parse_policy("jobs:4 extra"),
            Err(PolicyParseError::Grammar { .. })
        ));
    }

    // One case per metric kind and side of the threshold: below stays local,
    // at and above go remote.
    #[test]
    fn boundary_table_for_all_four_kinds() {
        let cases: [(PolicySpec, [MetricsSnapshot; 3]); 4] = [
            (
                PolicySpec::Jobs(4),
                [
                    snapshot(3, 0.0, 0.0, 20.0),
                    snapshot(4, 0.0, 0.0, 20.0),
                    snapshot(5, 0.0, 0.0, 20.0),
                ],
            ),
            (
                PolicySpec::Cpu(0.75),
                [
                    snapshot(0, 0.74, 0.0, 20.0),
                    snapshot(0, 0.75, 0.0, 20.0),
                    snapshot(0, 0.76, 0.0, 20.0),
                ],
            ),
            (
                PolicySpec::Mem(0.75),
                [
                    snapshot(0, 0.0, 0.74, 20.0),
                    snapshot(0, 0.0, 0.75, 20.0),
                    snapshot(0, 0.0, 0.76, 20.0),
                ],
            ),
            (
                PolicySpec::Temp(75.0),
                [
                    snapshot(0, 0.0, 0.0, 74.9),
                    snapshot(0, 0.0, 0.0, 75.0),
                    snapshot(0, 0.0, 0.0, 75.1),
                ],
            ),
        ];
        for (policy, [below, at, above]) in &cases {
            assert_eq!(target(policy, below), Target::Local, "{policy} below");
            assert_eq!(target(policy, at), Target::Remote, "{policy} at");
            assert_eq!(target(policy, above), Target::Remote, "{policy} above");
        }
    }

    #[test]
    fn boundary_reason_matches_convention() {
        let decision = decide(&PolicySpec::Jobs(4), &snapshot(4, 0.0, 0.0, 20.0));
        assert_eq!(decision.reason, "jobs 4 ≥ 4");
    }

    #[test]
    fn combinator_truth_tables() {
        let snap = MetricsSnapshot::default();
        let l = PolicySpec::AlwaysLocal;
        let r = PolicySpec::AlwaysRemote;
        let table = [
            (PolicySpec::AllOf(vec![l.clone(), l.clone()]), Target::Local),
            (PolicySpec::AllOf(vec![l.clone(), r.clone()]), Target::Local),
            (PolicySpec::AllOf(vec![r.clone(), l.clone()]), Target::Local),
            (PolicySpec::AllOf(vec![r.clone(), r.clone()]), Target::Remote),
            (PolicySpec::AnyOf(vec![l.clone(), l.clone()]), Target::Local),
            (PolicySpec::AnyOf(vec![l.clone(), r.clone()]), Target::Remote),
            (PolicySpec::AnyOf(vec![r.clone(), l]), Target::Remote),
            (PolicySpec::AnyOf(vec![r.clone(), r]), Target::Remote),
        ];
        for (policy, expected) in table {
            assert_eq!(target(&policy, &snap), expected, "{policy}");
        }
    }

    #[test]
    fn any_of_reason_cites_the_triggering_child() {
        let policy = parse_policy("any-of(cpu:0.75,temp:75)").unwrap();
        let decision = decide(&policy, &snapshot(0, 0.8, 0.0, 60.0));
        assert_eq!(decision.target, Target::Remote);
        assert!(decision.reason.starts_with("cpu"), "{}", decision.reason);
    }

    #[test]
    fn remote_decisions_always_carry_a_reason() {
        let policy = parse_policy("all-of(cpu:0.5,temp:50)").unwrap();
        let decision = decide(&policy, &snapshot(0, 0.9, 0.9, 90.0));
        assert_eq!(decision.target, Target::Remote);
        assert!(!decision.reason.is_empty());
    }

    fn arb_policy() -> impl Strategy<Value = PolicySpec> {
        let leaf = prop_oneof![
            (0u32..10).prop_map(PolicySpec::Jobs),
            (0.0..=1.0f64).prop_map(PolicySpec::Cpu),
            (0.0..=1.0f64).prop_map(PolicySpec::Mem),
            (-20.0..=120.0f64).prop_map(PolicySpec::Temp),
            Just(PolicySpec::AlwaysLocal),
            Just(PolicySpec::AlwaysRemote),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..4).prop_map(PolicySpec::AllOf),
                proptest::collection::vec(inner, 1..4).prop_map(PolicySpec::AnyOf),
            ]
        })
    }

    fn arb_snapshot() -> impl Strategy<Value = MetricsSnapshot> {
        (0u32..12, 0.0..=1.0f64, 0.0..=1.0f64, -20.0..=120.0f64).prop_map(
            |(jobs, cpu, mem, temp)| snapshot(jobs, cpu, mem, temp),
        )
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(policy in arb_policy()) {
            prop_assert_eq!(parse_policy(&policy.to_string()), Ok(policy));
        }

        #[test]
        fn decide_is_pure(policy in arb_policy(), snap in arb_snapshot()) {
            prop_assert_eq!(decide(&policy, &snap), decide(&policy, &snap));
        }

        // If A reads ≥ B on every metric, A going local implies B local too.
        #[test]
        fn remote_is_monotone_in_the_snapshot(
            policy in arb_policy(),
            snap in arb_snapshot(),
            d_jobs in 0u32..4,
            d_cpu in 0.0..0.5f64,
            d_mem in 0.0..0.5f64,
            d_temp in 0.0..30.0f64,
        ) {
            let dominating = MetricsSnapshot {
                jobs_in_flight: snap.jobs_in_flight + d_jobs,
                cpu_util: snap.cpu_util + d_cpu,
                mem_util: snap.mem_util + d_mem,
                cpu_temp_c: snap.cpu_temp_c + d_temp,
                ..snap
            };
            if target(&policy, &snap) == Target::Remote {
                prop_assert_eq!(target(&policy, &dominating), Target::Remote);
            }
        }

        #[test]
        fn metric_at_threshold_decides_remote(
            n in 0u32..10,
            frac in 0.0..=1.0f64,
            temp in -20.0..=120.0f64,
        ) {
            prop_assert_eq!(target(&PolicySpec::Jobs(n), &snapshot(n, 0.0, 0.0, -20.0)), Target::Remote);
            prop_assert_eq!(target(&PolicySpec::Cpu(frac), &snapshot(0, frac, 0.0, -20.0)), Target::Remote);
            prop_assert_eq!(target(&PolicySpec::Mem(frac), &snapshot(0, 0.0, frac, -20.0)), Target::Remote);
            prop_assert_eq!(target(&PolicySpec::Temp(temp), &snapshot(0, 0.0, 0.0, temp)), Target::Remote);
        }

        #[test]
        fn constants_ignore_the_snapshot(snap in arb_snapshot()) {
            prop_assert_eq!(target(&PolicySpec::AlwaysLocal, &snap), Target::Local);
            prop_assert_eq!(target(&PolicySpec::AlwaysRemote, &snap), Target::Remote);
        }
    }
}
