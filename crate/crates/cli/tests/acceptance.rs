//! The acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use acwb_cli::corpus::corpus;
use acwb_cli::report::SCHEMA;
use acwb_core::compiler::{
    compile_cancellation, compile_cancellation_on_side, compile_move, verify_trace, CompileError, TraceSource,
};
use acwb_core::handles::{
    build_handle_structure, random_choice, reconstruct_presentation, sticky_end, surface_invariants, total_space_euler,
    SurfaceInvariants,
};
use acwb_core::moves::{canonical_form, verify_certificate, AcMove};
use acwb_core::recognizer::{recognize, ChoiceRun, OracleConfig, VerdictKind};
use acwb_core::search::{scramble, trivialization_search, SearchBounds, SearchOutcome, Strategy};
use acwb_core::topology::{Invariants, QuadSide};
use acwb_core::{parse_presentation, Letter, Presentation, Sign, Word};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pres(text: &str) -> Presentation {
    parse_presentation(text).unwrap()
}

fn sticky(p: &Presentation) -> SurfaceInvariants {
    surface_invariants(&sticky_end(&build_handle_structure(p, None).unwrap()))
}

fn euler_m(p: &Presentation) -> i64 {
    total_space_euler(&build_handle_structure(p, None).unwrap())
}

fn all_discs(s: &SurfaceInvariants) -> bool {
    s.per_component.iter().all(|c| c.orientable && c.genus == 0 && c.boundary_circles == 1 && c.euler == 1)
}

fn gallery() -> Outcome {
    let mut failures = Vec::new();
    for n in 1..=4 {
        let free = Presentation::free(n);
        let s = sticky(&free);
        if !(s.components == 2 * n && all_discs(&s) && euler_m(&free) == n as i64) {
            failures.push(format!("free rank {n}"));
        }
        let standard = Presentation::standard(n);
        let s = sticky(&standard);
        let h = build_handle_structure(&standard, None).unwrap();
        if !(h.total_space_components().0 == n && s.components == n && all_discs(&s) && euler_m(&standard) == n as i64)
        {
            failures.push(format!("standard rank {n}"));
        }
    }
    for text in ["<a | a>", "<a,b | a, a b>"] {
        let s = sticky(&pres(text));
        if !(euler_m(&pres(text)) == 1 && s.components == 1 && all_discs(&s)) {
            failures.push(text.to_string());
        }
    }
    let conj = pres("<a,b | a, A b a>");
    let s = sticky(&conj);
    if !(euler_m(&conj) == 0 && s.components == 1 && s.euler == 0 && s.boundary_circles == 2 && s.orientable) {
        failures.push("conjugate".into());
    }
    check(failures.is_empty(), if failures.is_empty() { "all examples match".into() } else { failures.join(", ") })
}

fn random_word(rng: &mut ChaCha8Rng, generators: usize, max_len: usize) -> Word {
    let len = rng.gen_range(1..=max_len);
    Word(
        (0..len)
            .map(|_| Letter::new(rng.gen_range(0..generators), if rng.gen() { Sign::Pos } else { Sign::Neg }))
            .collect(),
    )
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = 0;
    let mut checked = 0;
    let mut circle_counts_vary = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4);
        let relators = rng.gen_range(1..=4);
        let p = Presentation::new(n, (0..relators).map(|_| random_word(&mut rng, n, 12)).collect()).unwrap();
        let mut choices = vec![None];
        choices.extend((0..10).map(|_| Some(random_choice(&p, &mut rng))));
        let mut circles = HashSet::new();
        for c in choices {
            let h = build_handle_structure(&p, c.as_ref()).unwrap();
            checked += 1;
            if reconstruct_presentation(&h) != p {
                bad += 1;
            }
            circles.insert(surface_invariants(&sticky_end(&h)).boundary_circles);
        }
        if circles.len() > 1 {
            circle_counts_vary += 1;
        }
    }
    check(
        bad == 0,
        format!(
            "{checked} structures, {bad} mismatches; boundary-circle count of S varies across choices for {circle_counts_vary} of 1000 presentations"
        ),
    )
}

/// Every word of `len` letters over `n` generators.
fn words(n: usize, len: usize) -> Vec<Word> {
    (0..len)
        .map(|_| (0..n).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect::<Vec<_>>())
        .multi_cartesian_product()
        .map(Word)
        .collect()
}

fn moves_on(p: &Presentation) -> Vec<AcMove> {
    let n = p.relators.len();
    let mut out = Vec::new();
    for i in 0..n {
        out.push(AcMove::Invert { relator: i });
        for g in 0..p.generators {
            for sign in [Sign::Pos, Sign::Neg] {
                out.push(AcMove::Conjugate { relator: i, generator: g, sign });
            }
        }
        for j in (0..n).filter(|&j| j != i) {
            out.push(AcMove::MultiplyRight { target: i, source: j });
        }
    }
    out
}

fn small_presentations() -> Vec<Presentation> {
    let mut out = Vec::new();
    for len in 1..=6 {
        out.extend(words(1, len).into_iter().map(|w| Presentation::new(1, vec![w]).unwrap()));
    }
    for total in 2..=6 {
        for first in 1..total {
            for a in words(2, first) {
                for b in words(2, total - first) {
                    out.push(Presentation::new(2, vec![a.clone(), b]).unwrap());
                }
            }
        }
    }
    out
}

fn compiler_consistency() -> Outcome {
    let presentations = small_presentations();
    let (passed, failed) = presentations
        .par_iter()
        .map(|p| {
            let h = build_handle_structure(p, None).unwrap();
            let (mut ok, mut bad) = (0usize, 0usize);
            for m in moves_on(p) {
                match compile_move(&h, &m) {
                    Ok((post, trace)) if verify_trace(&h, &TraceSource::Move(m), &trace, &post).pass => ok += 1,
                    _ => bad += 1,
                }
            }
            (ok, bad)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    check(failed == 0, format!("{} presentations, {passed} moves pass, {failed} fail", presentations.len()))
}

fn cancellation_composite() -> Outcome {
    let start = pres("<a,b | a, b>");
    let h0 = build_handle_structure(&start, None).unwrap();
    let step = |h, m| compile_move(h, &m).map(|(post, _)| post);
    let h1 = step(&h0, AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos }).unwrap();
    let conjugated = reconstruct_presentation(&h1) == pres("<a,b | a, A b a>");
    let h2 = step(&h1, AcMove::Invert { relator: 0 }).unwrap();
    let h3 = step(&h2, AcMove::MultiplyRight { target: 1, source: 0 }).unwrap();
    let multiplied = reconstruct_presentation(&h3) == pres("<a,b | A, A b a A>");
    let (post, trace) = compile_cancellation(&h3, 1, 2).unwrap();
    let kinds_ok = trace.kinds() == vec!["CutQuad", "CutBigon"];
    let reduced = pres("<a,b | A, A b>");
    let direct = build_handle_structure(&reduced, None).unwrap();
    let report = verify_trace(&h3, &trace.source, &trace, &post);
    let equal = report.pass && report.trace == Invariants::of_handle_structure(&direct);
    let wrong = compile_cancellation_on_side(&h3, 1, 2, QuadSide::Right);
    let wrong_rejected = matches!(wrong, Err(CompileError::HomologyCheckFailed(QuadSide::Right)));
    let pass = conjugated && multiplied && kinds_ok && equal && wrong_rejected;
    check(
        pass,
        format!(
            "conjugate {conjugated}, multiply {multiplied}, trace {:?}, invariants equal {equal}, wrong side rejected {wrong_rejected}",
            trace.kinds()
        ),
    )
}

fn search_recovery() -> Outcome {
    let start = Presentation::standard(2);
    let results: Vec<(bool, usize)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let k = 1 + (seed as usize % 5);
            let (scrambled, _) = scramble(&start, k, seed, 10);
            let bounds = SearchBounds { max_depth: 2 * k, max_relator_length: 10, ..SearchBounds::default() };
            let report = trivialization_search(&scrambled, &bounds).unwrap();
            let ok = match &report.outcome {
                SearchOutcome::Trivialized(c) => {
                    c.start == scrambled && verify_certificate(c, &Presentation::standard(2)).unwrap()
                }
                _ => false,
            };
            (ok, k)
        })
        .collect();
    let recovered = results.iter().filter(|r| r.0).count();
    let torsion = ["<x | x^2>", "<x,y | x^2, y>"].iter().all(|t| {
        matches!(
            trivialization_search(&pres(t), &SearchBounds::default()).unwrap().outcome,
            SearchOutcome::NonTrivialAbelianization { .. }
        )
    });
    check(recovered == 200 && torsion, format!("{recovered}/200 recovered and verified, torsion refuted {torsion}"))
}

/// Cyclically reduced words of exactly `len` letters over `n` generators.
fn cyclic_words(n: usize, len: usize) -> Vec<Word> {
    words(n, len).into_iter().filter(|w| w.is_cyclically_reduced()).collect()
}

/// Balanced presentations of rank at most 2 and total length at most 8, one
/// per canonical class up to relabeling.
fn soundness_suite() -> Vec<Presentation> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |p: Presentation| {
        if seen.insert(canonical_form(&p, true)) {
            out.push(p);
        }
    };
    for len in 1..=8 {
        for w in cyclic_words(1, len) {
            push(Presentation::new(1, vec![w]).unwrap());
        }
    }
    let by_len: Vec<Vec<Word>> = (0..=7).map(|l| if l == 0 { Vec::new() } else { cyclic_words(2, l) }).collect();
    for total in 2..=8 {
        for first in 1..total {
            for a in &by_len[first] {
                for b in &by_len[total - first] {
                    push(Presentation::new(2, vec![a.clone(), b.clone()]).unwrap());
                }
            }
        }
    }
    out
}

fn determinant_is_unit(p: &Presentation) -> bool {
    let row = |w: &Word| (0..p.generators).map(|g| w.exponent_sum(g)).collect::<Vec<i64>>();
    match p.generators {
        1 => row(&p.relators[0])[0].abs() == 1,
        2 => {
            let (a, b) = (row(&p.relators[0]), row(&p.relators[1]));
            (a[0] * b[1] - a[1] * b[0]).abs() == 1
        }
        _ => unreachable!("suite has rank at most 2"),
    }
}

struct SuiteResults {
    presentations: usize,
    sphere_like: usize,
    refuted: usize,
    unknown: usize,
    problems: Vec<String>,
    runs: Vec<ChoiceRun>,
}

fn run_suite() -> SuiteResults {
    let suite = soundness_suite();
    let cfg = OracleConfig {
        search_bounds: SearchBounds {
            max_depth: 6,
            max_relator_length: 10,
            max_states: 20_000,
            ..SearchBounds::default()
        },
        ..OracleConfig::default()
    };
    let confirm = SearchBounds {
        max_depth: 10,
        max_relator_length: 12,
        max_states: 200_000,
        strategy: Strategy::Bfs,
        relabel: true,
        ..SearchBounds::default()
    };
    let results: Vec<(Option<String>, Vec<ChoiceRun>, u8)> = suite
        .par_iter()
        .map(|p| {
            let v = recognize(p, &cfg, 4).unwrap();
            let problem = match &v.kind {
                VerdictKind::SphereLike(w) => {
                    let replayed = verify_certificate(&w.certificate, &Presentation::standard(p.generators)).unwrap()
                        && w.certificate.start == *p;
                    let confirmed =
                        matches!(trivialization_search(p, &confirm).unwrap().outcome, SearchOutcome::Trivialized(_));
                    (!(replayed && confirmed)).then(|| format!("{p}: witness {replayed}, search {confirmed}"))
                }
                VerdictKind::NotSphereLike(_) => {
                    let searched = trivialization_search(p, &confirm).unwrap();
                    let contradicted =
                        matches!(searched.outcome, SearchOutcome::Trivialized(_)) || determinant_is_unit(p);
                    contradicted.then(|| format!("{p}: refuted yet trivial"))
                }
                VerdictKind::Unknown(_) => None,
            };
            let tag = match v.kind {
                VerdictKind::SphereLike(_) => 0,
                VerdictKind::NotSphereLike(_) => 1,
                VerdictKind::Unknown(_) => 2,
            };
            (problem, v.runs, tag)
        })
        .collect();
    let count = |t| results.iter().filter(|r| r.2 == t).count();
    SuiteResults {
        presentations: suite.len(),
        sphere_like: count(0),
        refuted: count(1),
        unknown: count(2),
        problems: results.iter().filter_map(|r| r.0.clone()).collect(),
        runs: results.into_iter().flat_map(|r| r.1).collect(),
    }
}

fn recognizer_soundness(s: &SuiteResults) -> Outcome {
    check(
        s.problems.is_empty(),
        format!(
            "{} classes: {} sphere-like, {} refuted, {} unknown; {} problems{}",
            s.presentations,
            s.sphere_like,
            s.refuted,
            s.unknown,
            s.problems.len(),
            s.problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
        ),
    )
}

fn termination(suite_runs: &[ChoiceRun]) -> Outcome {
    let cfg = OracleConfig { use_certificate_oracle: false, ..OracleConfig::default() };
    let mut runs: Vec<ChoiceRun> = suite_runs.to_vec();
    for e in corpus().into_iter().filter(|e| e.presentation.is_balanced()) {
        runs.extend(recognize(&e.presentation, &cfg, 16).unwrap().runs);
    }
    for seed in 0..20 {
        let (p, _) = scramble(&Presentation::standard(2), 1 + seed as usize % 5, seed, 10);
        runs.extend(recognize(&p, &cfg, 16).unwrap().runs);
    }
    let bad = runs
        .iter()
        .filter(|r| {
            let strictly = r.measure_trace.windows(2).all(|w| w[1] < w[0]);
            !(strictly && r.iterations + 1 == r.measure_trace.len() && r.iterations <= r.measure_trace[0])
        })
        .count();
    check(bad == 0, format!("{} runs, {bad} violations", runs.len()))
}

fn peak_memory_bytes() -> Option<usize> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: usize = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn cli_report(args: &[&str]) -> (i32, Value) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<&str> = std::iter::once("acwb").chain(args.iter().copied()).collect();
    let code = acwb_cli::run(argv, &mut out, &mut err);
    (code, serde_json::from_slice(&out).unwrap_or(Value::Null))
}

fn honest_non_results() -> Outcome {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator =
        jsonschema::JSONSchema::options().with_draft(jsonschema::Draft::Draft202012).compile(&schema).unwrap();
    let bounds = ["--depth", "12", "--maxlen", "14", "--max-states", "1000000"];
    let with = |cmd: &'static str| -> Vec<&'static str> { std::iter::once(cmd).chain(bounds).chain(["ak3"]).collect() };
    let (search_code, search) = cli_report(&with("search"));
    let (recognize_code, verdict) = cli_report(&with("recognize"));
    let valid = validator.is_valid(&search) && validator.is_valid(&verdict);
    let search_ok = search_code == 0 && search["outcome"] == "Exhausted";
    let verdict_ok = recognize_code == 0 && verdict["verdict"] == "Unknown";
    let budget = SearchBounds::default().max_memory_bytes;
    let peak = peak_memory_bytes();
    let memory_ok = peak.is_none_or(|p| p <= budget);
    check(
        valid && search_ok && verdict_ok && memory_ok,
        format!(
            "search {} ({}), verdict {} ({}), schema-valid {valid}, peak memory {} MiB of {} MiB",
            search["outcome"],
            search["detail"],
            verdict["verdict"],
            verdict["reason"],
            peak.map_or("?".into(), |p| (p >> 20).to_string()),
            budget >> 20
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let clock = Instant::now();
        let outcome = f();
        let elapsed = clock.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        let limit_text = limit.map_or(String::new(), |l| format!(" < {} s", l.as_secs_f64()));
        println!(
            "{} criterion {n} {name}: {} [{:.2} s{limit_text}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    };
    report(1, "gallery", Some(Duration::from_secs(1)), &mut gallery);
    report(2, "round trip", Some(Duration::from_secs(10)), &mut round_trip);
    report(3, "compiler consistency", Some(Duration::from_secs(60)), &mut compiler_consistency);
    report(4, "cancellation composite", None, &mut cancellation_composite);
    report(5, "search recovery", Some(Duration::from_secs(120)), &mut search_recovery);
    let mut suite = None;
    report(6, "recognizer soundness", None, &mut || {
        let s = run_suite();
        let o = recognizer_soundness(&s);
        suite = Some(s);
        o
    });
    let runs = suite.map(|s| s.runs).unwrap_or_default();
    report(7, "termination", None, &mut || termination(&runs));
    report(8, "honest non-results", None, &mut honest_non_results);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
