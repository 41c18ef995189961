//! Report rendering: the stable JSON schema and the human-readable text
//! form. Both are fully deterministic for a given input and configuration.

use actr_confluence_core::confluence::{
    ConfluenceReport, JoinStatus, OverlapReport, PruneReason, Verdict,
};
use serde::{Deserialize, Serialize};

/// Configuration echo embedded in every JSON report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonConfig {
    pub command: String,
    pub input: String,
    pub max_steps: usize,
    pub universe_padding: usize,
    pub format: String,
    pub clear_to_dm: bool,
    pub all_overlaps: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonViolation {
    pub invariant: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonPruned {
    /// "invariant" or "no_grounding"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<JsonViolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonDerivation {
    pub rules: Vec<String>,
    pub terminal: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonWitness {
    pub start: String,
    pub left: JsonDerivation,
    pub right: JsonDerivation,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonJoin {
    pub status: String,
    pub steps_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meeting_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<JsonWitness>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonOverlap {
    pub rule_a: String,
    pub rule_b: String,
    pub overlap: String,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<usize>,
    pub trivial_symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned: Option<JsonPruned>,
    pub groundings_tested: usize,
    pub groundings_capped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<JsonJoin>,
}

/// Top-level JSON report: `{verdict, overlaps[], termination_note, config}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct JsonReport {
    pub verdict: String,
    pub overlaps: Vec<JsonOverlap>,
    pub termination_note: String,
    pub config: JsonConfig,
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Confluent => "confluent",
        Verdict::NotConfluent => "not_confluent",
        Verdict::Unknown => "unknown",
    }
}

fn status_str(s: JoinStatus) -> &'static str {
    match s {
        JoinStatus::Joinable => "joinable",
        JoinStatus::NotJoinable => "not_joinable",
        JoinStatus::Unknown => "unknown",
    }
}

fn overlap_to_json(r: &OverlapReport) -> JsonOverlap {
    JsonOverlap {
        rule_a: r.overlap.rule_a.clone(),
        rule_b: r.overlap.rule_b.clone(),
        overlap: r.overlap.descriptor.clone(),
        state: r.overlap.state.dump(),
        duplicate_of: r.overlap.duplicate_of,
        trivial_symmetric: r.trivial_symmetric,
        pruned: r.pruned.as_ref().map(|p| match p {
            PruneReason::Violations(vs) => JsonPruned {
                kind: "invariant".into(),
                violations: vs
                    .iter()
                    .map(|(w, d)| JsonViolation {
                        invariant: w.to_string(),
                        detail: d.clone(),
                    })
                    .collect(),
                note: None,
            },
            PruneReason::NoGrounding(note) => JsonPruned {
                kind: "no_grounding".into(),
                violations: Vec::new(),
                note: Some(note.clone()),
            },
        }),
        groundings_tested: r.groundings_tested,
        groundings_capped: r.groundings_capped,
        join: r.join.as_ref().map(|j| JsonJoin {
            status: status_str(j.status).into(),
            steps_used: j.steps_used,
            meeting_state: j.meeting_state.as_ref().map(|s| s.dump()),
            witness: j.witness.as_ref().map(|w| JsonWitness {
                start: w.start.as_ref().map(|s| s.dump()).unwrap_or_default(),
                left: JsonDerivation {
                    rules: w.left.rules.clone(),
                    terminal: w.left.terminal.dump(),
                },
                right: JsonDerivation {
                    rules: w.right.rules.clone(),
                    terminal: w.right.terminal.dump(),
                },
            }),
        }),
    }
}

pub fn to_json_report(report: &ConfluenceReport, config: JsonConfig, all: bool) -> JsonReport {
    JsonReport {
        verdict: verdict_str(report.verdict).into(),
        overlaps: report
            .overlaps
            .iter()
            .filter(|r| all || r.overlap.duplicate_of.is_none())
            .map(overlap_to_json)
            .collect(),
        termination_note: report.termination_note.clone(),
        config,
    }
}

/// The text report: verdict, one block per overlap, witnesses for failed
/// pairs, and the termination note.
pub fn render_text(report: &ConfluenceReport, all: bool) -> String {
    let mut out = String::new();
    let shown: Vec<&OverlapReport> = report
        .overlaps
        .iter()
        .filter(|r| all || r.overlap.duplicate_of.is_none())
        .collect();
    let pruned = shown.iter().filter(|r| r.pruned.is_some()).count();
    out.push_str(&format!(
        "overlaps: {} ({} pruned by the invariant, {} tested)\n",
        shown.len(),
        pruned,
        shown.len() - pruned
    ));
    for (i, r) in shown.iter().enumerate() {
        out.push_str(&format!(
            "  [{}] {} ~ {}  {}\n",
            i + 1,
            r.overlap.rule_a,
            r.overlap.rule_b,
            r.overlap.descriptor
        ));
        if let Some(dup) = r.overlap.duplicate_of {
            out.push_str(&format!(
            "      duplicate of overlap #{}\n",
                dup + 1
            ));
        }
        match &r.pruned {
            Some(PruneReason::Violations(vs)) => {
                for (w, detail) in vs {
                    out.push_str(&format!("      pruned by {w}: {detail}\n"));
                }
            }
            Some(PruneReason::NoGrounding(note)) => {
                out.push_str(&format!("      pruned: {note}\n"));
            }
            None => {
                if let Some(j) = &r.join {
                    out.push_str(&format!(
                        "      {} ({} groundings{}, {} search steps)\n",
                        status_str(j.status),
                        r.groundings_tested,
                        if r.groundings_capped { ", capped" } else { "" },
                        j.steps_used
                    ));
                    if r.trivial_symmetric {
                        out.push_str(
                            "      symbolic pair is trivially equivalent; groundings were still tested for request branching\n",
                        );
                    }
                    if let Some(w) = &j.witness {
                        if let Some(start) = &w.start {
                            out.push_str("      diverging state:\n");
                            out.push_str(&format!("        {}\n", start.dump()));
                        }
                        out.push_str(&format!(
                            "      left derivation  ({}):\n        {}\n",
                            w.left.rules.join(", "),
                            w.left.terminal.dump()
                        ));
                        out.push_str(&format!(
                            "      right derivation ({}):\n        {}\n",
                            w.right.rules.join(", "),
                            w.right.terminal.dump()
                        ));
                    }
                }
            }
        }
    }
    out.push_str(&format!("verdict: {}\n", report.verdict));
    out.push_str(&format!("note: {}\n", report.termination_note));
    out
}
