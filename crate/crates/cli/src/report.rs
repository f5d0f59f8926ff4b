//! JSON reports for search and recognition. Every report carries a `kind`
//! field and validates against the shipped schema.

use std::path::Path;

use acwb_core::recognizer::{ChoiceRun, Verdict, VerdictKind, WitnessSource};
use acwb_core::search::{AbortReason, ExhaustedBound, SearchBounds, SearchOutcome, SearchReport, Strategy};
use acwb_core::Presentation;
use serde_json::{json, Value};

/// The JSON Schema every report validates against.
pub const SCHEMA: &str = include_str!("../schemas/report.schema.json");

fn bounds_json(b: &SearchBounds) -> Value {
    json!({
        "max_depth": b.max_depth,
        "max_relator_length": b.max_relator_length,
        "max_states": b.max_states,
        "max_memory_bytes": b.max_memory_bytes,
        "strategy": match b.strategy {
            Strategy::Bfs => "bfs",
            Strategy::Iddfs => "iddfs",
            Strategy::Bidirectional => "bidirectional",
        },
        "relabel": b.relabel,
    })
}

fn outcome_detail(o: &SearchOutcome) -> Value {
    match o {
        SearchOutcome::Trivialized(_) => Value::Null,
        SearchOutcome::NonTrivialAbelianization { diagonal } => json!(diagonal.join(", ")),
        SearchOutcome::Exhausted(b) => json!(match b {
            ExhaustedBound::Depth => "depth",
            ExhaustedBound::States => "states",
            ExhaustedBound::FrontierEmpty => "frontier_empty",
        }),
        SearchOutcome::Aborted(r) => json!(match r {
            AbortReason::Memory => "memory",
            AbortReason::Signal => "signal",
        }),
    }
}

fn search_body(r: &SearchReport, timing: bool) -> Value {
    let mut v = json!({
        "outcome": r.outcome.kind(),
        "detail": outcome_detail(&r.outcome),
        "certificate": match &r.outcome {
            SearchOutcome::Trivialized(c) => json!(c.to_text()),
            _ => Value::Null,
        },
        "states_expanded": r.states_expanded,
        "states_visited": r.states_visited,
        "frontier_peak": r.frontier_peak,
        "depth_reached": r.depth_reached,
    });
    if timing {
        v["wall_time_ms"] = json!(r.wall_time_ms);
    }
    v
}

pub fn search(p: &Presentation, bounds: &SearchBounds, r: &SearchReport, timing: bool) -> Value {
    let mut v = search_body(r, timing);
    v["kind"] = json!("search");
    v["presentation"] = json!(p.to_string());
    v["bounds"] = bounds_json(bounds);
    v
}

fn run_json(run: &ChoiceRun) -> Value {
    json!({
        "choice": run.choice_index + 1,
        "iterations": run.iterations,
        "measure_trace": run.measure_trace,
        "passed": run.passed,
        "diagnostics": run.diagnostics,
    })
}

pub fn verdict(p: &Presentation, v: &Verdict, witness_path: Option<&Path>, timing: bool) -> Value {
    let witness = match &v.kind {
        VerdictKind::SphereLike(w) => json!({
            "source": match w.source {
                WitnessSource::GreedyCollapse => "greedy_collapse",
                WitnessSource::CertificateSearch => "certificate_search",
            },
            "certificate": w.certificate.to_text(),
            "path": witness_path.map(|p| p.display().to_string()),
            "choice": w.choice_index.map(|k| k + 1),
        }),
        _ => Value::Null,
    };
    let deciding = v.deciding_run();
    json!({
        "kind": "recognize",
        "presentation": p.to_string(),
        "verdict": v.label(),
        "reason": v.reason(),
        "witness": witness,
        "choices_tried": v.choices_tried,
        "choices_total": v.choices_total,
        "iterations": deciding.map_or(0, |r| r.iterations),
        "measure_trace": deciding.map_or(Vec::new(), |r| r.measure_trace.clone()),
        "runs": v.runs.iter().map(run_json).collect::<Vec<_>>(),
        "search": v.search.as_ref().map(|r| search_body(r, timing)),
    })
}
