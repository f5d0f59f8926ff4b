//! Restricted recognition of sphere-like presentations.
//!
//! For each attachment choice the handle structure is capped off and each
//! component is tested: the capped total space must have Euler
//! characteristic 2, the capped sticky part must be a single sphere, and the
//! greedy collapse must empty the component. Failing that, tracked annuli
//! are cut and the loop repeats; structures built directly from a
//! presentation carry no tracked annuli, so the loop then ends for that
//! choice. A certificate found by the trivialization search is accepted on
//! its own, since every presentation reachable from the standard one is
//! sphere-like.
//!
//! Verdicts are never negative except when the abelianization is
//! non-trivial.

use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::cancel_cyclic;
use crate::handles::{build_handle_structure, enumerate_choices, HandleError, HandleStructure};
use crate::homology::{abelianization_matrix, smith_normal_form};
use crate::moves::{AcMove, Certificate, Step};
use crate::search::{trivialization_search, SearchBounds, SearchError, SearchOutcome, SearchReport};
use crate::topology::{complexity_measure, SpaceBase, TopologyOp, TrackedSpace};
use crate::words::{Presentation, Word};
use crate::IntegerMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub use_certificate_oracle: bool,
    pub use_greedy_oracle: bool,
    pub search_bounds: SearchBounds,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { use_certificate_oracle: true, use_greedy_oracle: true, search_bounds: SearchBounds::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecognizeError {
    #[error("presentation is not balanced ({generators} generators, {relators} relators)")]
    NotBalanced { generators: usize, relators: usize },
    #[error("relator {} is empty", .0 + 1)]
    EmptyRelator(usize),
    #[error("no oracle enabled")]
    NoOracle,
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// One step of the greedy collapse; indices refer to the presentation's
/// relators and generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollapseStep {
    /// Cancel the pair at `position`, `position + 1` (cyclically).
    Cancel { relator: usize, position: usize },
    /// Remove a plate of one strip together with the beam carrying only it.
    RemovePair { relator: usize, generator: usize },
    /// A plate whose strips all cancelled.
    DiscardPlate { relator: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessSource {
    GreedyCollapse,
    CertificateSearch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub source: WitnessSource,
    /// A certificate from the presentation to the standard one.
    pub certificate: Certificate,
    pub collapse: Vec<CollapseStep>,
    pub choice_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refutation {
    NontrivialHomology {
        diagonal: Vec<String>,
    },
    /// Every attachment choice was refuted by a complete backend.
    OracleRefutation {
        choices: usize,
    },
}

/// A decision procedure for the product test on capped components.
///
/// The built-in checks are only necessary conditions and the tracked
/// annuli are not a maximal family, so without a backend the recognizer
/// never refutes on topological grounds. A backend that reports itself
/// complete decides every component and vouches that the tracked annuli
/// are maximal; only then is a negative answer turned into a verdict.
pub trait RecognitionBackend: Sync {
    /// Whether the capped component is a sphere times an interval with the
    /// sticky part as one boundary sphere; `None` if undecided.
    fn is_sphere_product(&self, ts: &TrackedSpace, component: usize) -> Option<bool>;

    fn is_complete(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exhaustion {
    /// No choice passed and no tracked annuli were left to cut.
    AnnuliExhausted,
    /// The certificate search stopped on a resource limit.
    ResourceLimit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    SphereLike(Witness),
    NotSphereLike(Refutation),
    Unknown(Exhaustion),
}

/// How the loop went for one attachment choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRun {
    pub choice_index: usize,
    /// Loop passes that changed the space (capping or cutting).
    pub iterations: usize,
    /// Complexity measure at the start and after each working pass.
    pub measure_trace: Vec<usize>,
    pub passed: bool,
    /// A complete backend found a component that is not a product once no
    /// tracked annuli were left.
    pub refuted: bool,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    collapse: Option<Vec<CollapseStep>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub choices_tried: usize,
    pub choices_total: String,
    pub runs: Vec<ChoiceRun>,
    pub search: Option<SearchReport>,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self.kind {
            VerdictKind::SphereLike(_) => "SphereLike",
            VerdictKind::NotSphereLike(_) => "NotSphereLike",
            VerdictKind::Unknown(_) => "Unknown",
        }
    }

    pub fn reason(&self) -> String {
        match &self.kind {
            VerdictKind::SphereLike(w) => match w.source {
                WitnessSource::GreedyCollapse => "greedy collapse".into(),
                WitnessSource::CertificateSearch => "certificate".into(),
            },
            VerdictKind::NotSphereLike(Refutation::NontrivialHomology { diagonal }) => {
                format!("non-trivial homology ({})", diagonal.join(", "))
            }
            VerdictKind::NotSphereLike(Refutation::OracleRefutation { choices }) => {
                format!("all {choices} attachment choices refuted by a complete backend")
            }
            VerdictKind::Unknown(Exhaustion::AnnuliExhausted) => "tracked annuli exhausted".into(),
            VerdictKind::Unknown(Exhaustion::ResourceLimit(what)) => format!("resource limit: {what}"),
        }
    }

    pub fn is_sphere_like(&self) -> bool {
        matches!(self.kind, VerdictKind::SphereLike(_))
    }

    /// The run that decided the verdict, or the first one tried.
    pub fn deciding_run(&self) -> Option<&ChoiceRun> {
        self.runs.iter().find(|r| r.passed).or(self.runs.first())
    }
}

pub fn oracle_certificate(
    p: &Presentation,
    bounds: &SearchBounds,
) -> Result<(Option<Certificate>, SearchReport), SearchError> {
    let report = trivialization_search(p, bounds)?;
    let cert = match &report.outcome {
        SearchOutcome::Trivialized(c) => Some(c.clone()),
        _ => None,
    };
    Ok((cert, report))
}

/// Greedy collapse of the relators and generators of one component.
/// Returns the transcript if everything collapses.
pub fn greedy_collapse(p: &Presentation, generators: &[usize], relators: &[usize]) -> Option<Vec<CollapseStep>> {
    let mut words: Vec<Option<Word>> = vec![None; p.relators.len()];
    for &r in relators {
        words[r] = Some(p.relators[r].clone());
    }
    let mut beams: Vec<bool> = vec![false; p.generators];
    for &g in generators {
        beams[g] = true;
    }
    let mut steps = Vec::new();
    loop {
        let mut progress = false;
        for (r, slot) in words.iter_mut().enumerate() {
            while let Some(w) = slot {
                let Some((position, reduced)) = (0..w.len()).find_map(|k| cancel_cyclic(w, k).map(|c| (k, c))) else {
                    break;
                };
                steps.push(CollapseStep::Cancel { relator: r, position });
                progress = true;
                if reduced.is_empty() {
                    steps.push(CollapseStep::DiscardPlate { relator: r });
                    *slot = None;
                } else {
                    *slot = Some(reduced);
                }
            }
        }
        for r in 0..words.len() {
            let Some(w) = &words[r] else { continue };
            if w.len() != 1 {
                continue;
            }
            let g = w.0[0].gen();
            let carried: usize = words.iter().flatten().map(|w| w.0.iter().filter(|l| l.gen() == g).count()).sum();
            if beams[g] && carried == 1 {
                steps.push(CollapseStep::RemovePair { relator: r, generator: g });
                words[r] = None;
                beams[g] = false;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    (words.iter().all(Option::is_none) && !beams.iter().any(|&b| b)).then_some(steps)
}

/// Greedy collapse of a capped component of a space whose history holds
/// only capping. Spaces built by other operations are not decided.
pub fn oracle_greedy_collapse(ts: &TrackedSpace, component: usize) -> bool {
    greedy_component(ts, component).is_some()
}

fn greedy_component(ts: &TrackedSpace, component: usize) -> Option<Vec<CollapseStep>> {
    if ts.history().iter().any(|e| !matches!(e.op, TopologyOp::Cap { .. })) {
        return None;
    }
    let summary = ts.component_summaries().into_iter().find(|c| c.id == component)?;
    if summary.uncapped_circles > 0 {
        return None;
    }
    match ts.base() {
        SpaceBase::StandardPieces(_) => Some(Vec::new()),
        SpaceBase::Handle(h) => {
            let (_, labels) = h.total_space_components();
            let generators: Vec<usize> = (0..h.beams).filter(|&b| labels[b] == component).collect();
            let relators: Vec<usize> = (0..h.plates.len()).filter(|&i| labels[h.beams + i] == component).collect();
            greedy_collapse(&crate::handles::reconstruct_presentation(h), &generators, &relators)
        }
    }
}

/// Turns a successful collapse into a certificate. Cyclic cancellations
/// become a conjugation followed by two linear ones.
pub fn collapse_certificate(p: &Presentation, steps: &[CollapseStep]) -> Certificate {
    let mut c = Certificate::empty(p.clone());
    let mut lengths: Vec<usize> = p.relators.iter().map(|w| w.len()).collect();
    let mut current = p.clone();
    for step in steps {
        let CollapseStep::Cancel { relator, position } = *step else { continue };
        let n = lengths[relator];
        if position + 1 < n {
            c.steps.push(Step::Reduce { relator, position });
        } else {
            let last = current.relators[relator].0[n - 1];
            c.steps.push(Step::Move(AcMove::Conjugate { relator, generator: last.gen(), sign: last.sign.flip() }));
            c.steps.push(Step::Reduce { relator, position: n });
            c.steps.push(Step::Reduce { relator, position: 0 });
        }
        current.relators[relator] = cancel_cyclic(&current.relators[relator], position).expect("replayed collapse");
        lengths[relator] -= 2;
    }
    c
}

/// Passes all step-2 checks on every component, and returns the greedy
/// transcript when the greedy oracle also passes.
fn step_two(ts: &TrackedSpace, use_greedy: bool, diagnostics: &mut Vec<String>) -> Option<Vec<CollapseStep>> {
    let mut transcript = Vec::new();
    for c in ts.component_summaries() {
        if c.sheets == 0 {
            diagnostics.push(format!("component {}: empty sticky part", c.id));
            return None;
        }
        if c.euler_m != 2 || c.euler_s != 2 || c.sheets != 1 {
            diagnostics.push(format!(
                "component {}: capped euler {} and sticky euler {} over {} sheets",
                c.id, c.euler_m, c.euler_s, c.sheets
            ));
            return None;
        }
        if !use_greedy {
            diagnostics.push(format!("component {}: passes the checks, no oracle decides it", c.id));
            return None;
        }
        match greedy_component(ts, c.id) {
            Some(steps) => transcript.extend(steps),
            None => {
                diagnostics.push(format!("component {}: greedy collapse gets stuck", c.id));
                return None;
            }
        }
    }
    Some(transcript)
}

fn run_choice(
    h: &HandleStructure,
    choice_index: usize,
    use_greedy: bool,
    backend: Option<&dyn RecognitionBackend>,
) -> ChoiceRun {
    let mut ts = TrackedSpace::from_handle_structure(h);
    let mut run = ChoiceRun {
        choice_index,
        iterations: 0,
        measure_trace: vec![complexity_measure(&ts)],
        passed: false,
        refuted: false,
        diagnostics: Vec::new(),
        collapse: None,
    };
    loop {
        let capped = ts.cap_off();
        if capped != ts {
            ts = capped;
            run.iterations += 1;
            run.measure_trace.push(complexity_measure(&ts));
        }
        if let Some(steps) = step_two(&ts, use_greedy, &mut run.diagnostics) {
            run.passed = true;
            run.collapse = Some(steps);
            return run;
        }
        if ts.live_annuli() == 0 {
            run.diagnostics.push("no tracked annuli left".into());
            if let Some(b) = backend.filter(|b| b.is_complete()) {
                run.refuted = ts.component_ids().into_iter().any(|c| b.is_sphere_product(&ts, c) == Some(false));
            }
            return run;
        }
        ts = ts.cut_tracked_annuli();
        run.iterations += 1;
        run.measure_trace.push(complexity_measure(&ts));
    }
}

pub fn recognize(p: &Presentation, cfg: &OracleConfig, choice_limit: usize) -> Result<Verdict, RecognizeError> {
    recognize_with_backend(p, cfg, choice_limit, None)
}

/// As [`recognize`], consulting `backend` on choices whose tracked annuli
/// are exhausted. A negative verdict needs a complete backend, a full
/// enumeration of attachment choices, every choice refuted, and no
/// certificate found.
pub fn recognize_with_backend(
    p: &Presentation,
    cfg: &OracleConfig,
    choice_limit: usize,
    backend: Option<&dyn RecognitionBackend>,
) -> Result<Verdict, RecognizeError> {
    if !cfg.use_certificate_oracle && !cfg.use_greedy_oracle {
        return Err(RecognizeError::NoOracle);
    }
    if !p.is_balanced() {
        return Err(RecognizeError::NotBalanced { generators: p.generators, relators: p.relators.len() });
    }
    if let Some(i) = p.relators.iter().position(|w| w.is_empty()) {
        return Err(RecognizeError::EmptyRelator(i));
    }
    let m: IntegerMatrix = abelianization_matrix(p);
    let snf = smith_normal_form(&m).expect("arbitrary precision");
    let enumeration = enumerate_choices(p, choice_limit);
    if snf.rank() < p.generators || !snf.diagonal.iter().all(|d| d.is_one()) {
        let diagonal = snf.diagonal.iter().map(|d| d.to_string()).collect();
        return Ok(Verdict {
            kind: VerdictKind::NotSphereLike(Refutation::NontrivialHomology { diagonal }),
            choices_tried: 0,
            choices_total: enumeration.total,
            runs: Vec::new(),
            search: None,
        });
    }
    let runs: Vec<ChoiceRun> = enumeration
        .choices
        .par_iter()
        .enumerate()
        .map(|(k, choice)| {
            let h = build_handle_structure(p, Some(choice)).map_err(|e| match e {
                HandleError::EmptyRelator(i) => RecognizeError::EmptyRelator(i),
                other => unreachable!("enumerated choices fit: {other}"),
            })?;
            Ok(run_choice(&h, k, cfg.use_greedy_oracle, backend))
        })
        .collect::<Result<_, RecognizeError>>()?;
    let choices_tried = runs.len();
    if let Some(run) = runs.iter().find(|r| r.passed) {
        let steps = run.collapse.clone().unwrap_or_default();
        let witness = Witness {
            source: WitnessSource::GreedyCollapse,
            certificate: collapse_certificate(p, &steps),
            collapse: steps,
            choice_index: Some(run.choice_index),
        };
        return Ok(Verdict {
            kind: VerdictKind::SphereLike(witness),
            choices_tried: run.choice_index + 1,
            choices_total: enumeration.total,
            runs,
            search: None,
        });
    }
    let mut search = None;
    let mut kind = VerdictKind::Unknown(Exhaustion::AnnuliExhausted);
    if cfg.use_certificate_oracle {
        let (cert, report) = oracle_certificate(p, &cfg.search_bounds)?;
        if let SearchOutcome::Aborted(reason) = &report.outcome {
            kind = VerdictKind::Unknown(Exhaustion::ResourceLimit(format!("{reason:?}")));
        }
        if let Some(certificate) = cert {
            kind = VerdictKind::SphereLike(Witness {
                source: WitnessSource::CertificateSearch,
                certificate,
                collapse: Vec::new(),
                choice_index: None,
            });
        }
        search = Some(report);
    }
    let all_refuted = !enumeration.truncated && !runs.is_empty() && runs.iter().all(|r| r.refuted);
    if all_refuted && matches!(kind, VerdictKind::Unknown(Exhaustion::AnnuliExhausted)) {
        kind = VerdictKind::NotSphereLike(Refutation::OracleRefutation { choices: runs.len() });
    }
    Ok(Verdict { kind, choices_tried, choices_total: enumeration.total, runs, search })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::verify_certificate;
    use crate::words::parse_presentation;

    fn pres(text: &str) -> Presentation {
        parse_presentation(text).unwrap()
    }

    fn greedy_only() -> OracleConfig {
        OracleConfig { use_certificate_oracle: false, ..OracleConfig::default() }
    }

    #[test]
    fn standard_presentations_are_sphere_like() {
        for n in 1..=3 {
            let v = recognize(&Presentation::standard(n), &greedy_only(), 4).unwrap();
            assert!(v.is_sphere_like(), "rank {n}");
            assert_eq!(v.deciding_run().unwrap().measure_trace.last(), Some(&0));
        }
    }

    #[test]
    fn conjugated_standard_is_sphere_like() {
        let p = pres("<a,b | a, A b a>");
        let v = recognize(&p, &greedy_only(), 4).unwrap();
        let VerdictKind::SphereLike(w) = &v.kind else { panic!("{v:?}") };
        assert_eq!(w.source, WitnessSource::GreedyCollapse);
        assert!(verify_certificate(&w.certificate, &Presentation::standard(2)).unwrap());
    }

    #[test]
    fn torsion_is_refuted_by_homology() {
        let v = recognize(&pres("<x | x^2>"), &OracleConfig::default(), 4).unwrap();
        assert_eq!(v.kind, VerdictKind::NotSphereLike(Refutation::NontrivialHomology { diagonal: vec!["2".into()] }));
    }

    #[test]
    fn greedy_oracle_examples() {
        let collapse = |text: &str| {
            let p = pres(text);
            let h = build_handle_structure(&p, None).unwrap();
            let ts = TrackedSpace::from_handle_structure(&h).cap_off();
            ts.component_ids().into_iter().all(|c| oracle_greedy_collapse(&ts, c))
        };
        assert!(collapse("<a | a>"));
        assert!(!collapse("<x | x^2>"));
        assert!(collapse("<x,y | x y Y, y>"));
        let uncapped = TrackedSpace::from_handle_structure(&build_handle_structure(&pres("<a | a>"), None).unwrap());
        assert!(!oracle_greedy_collapse(&uncapped, 0));
    }

    #[test]
    fn collapse_certificates_replay() {
        for text in ["<x,y | x y Y, y>", "<a,b | a, A b a>", "<x,y | Y x y, X Y y y x>"] {
            let p = pres(text);
            let steps = greedy_collapse(&p, &[0, 1], &[0, 1]).unwrap();
            let c = collapse_certificate(&p, &steps);
            assert!(verify_certificate(&c, &Presentation::standard(2)).unwrap(), "{text}");
        }
    }

    #[test]
    fn certificate_oracle() {
        let (c, _) = oracle_certificate(&Presentation::standard(2), &SearchBounds::default()).unwrap();
        assert_eq!(c.unwrap().steps.len(), 0);
        let small = SearchBounds { max_depth: 3, max_states: 2000, ..SearchBounds::default() };
        let (c, _) = oracle_certificate(&pres("<x,y | x^3 Y^4, x y x Y X Y>"), &small).unwrap();
        assert!(c.is_none());
    }

    #[test]
    fn measure_decreases_and_bounds_iterations() {
        for text in ["<a,b | a, A b a>", "<x,y | x y x Y X Y, x^2 Y^3>", "<x,y,z | x, y, z>"] {
            let v = recognize(&pres(text), &greedy_only(), 6).unwrap();
            for run in &v.runs {
                assert!(run.measure_trace.windows(2).all(|w| w[1] < w[0]), "{text}: {:?}", run.measure_trace);
                assert!(run.iterations <= run.measure_trace[0]);
            }
        }
    }

    struct Refuter {
        complete: bool,
    }

    impl RecognitionBackend for Refuter {
        fn is_sphere_product(&self, _: &TrackedSpace, _: usize) -> Option<bool> {
            Some(false)
        }

        fn is_complete(&self) -> bool {
            self.complete
        }
    }

    #[test]
    fn refutation_needs_a_complete_backend() {
        let p = pres("<x,y | x y x Y X Y, x^2 Y^3>");
        let cfg = greedy_only();
        let partial = recognize_with_backend(&p, &cfg, 10_000, Some(&Refuter { complete: false })).unwrap();
        assert_eq!(partial.kind, VerdictKind::Unknown(Exhaustion::AnnuliExhausted));
        let full = recognize_with_backend(&p, &cfg, 10_000, Some(&Refuter { complete: true })).unwrap();
        assert!(matches!(full.kind, VerdictKind::NotSphereLike(Refutation::OracleRefutation { .. })), "{full:?}");
        let truncated = recognize_with_backend(&p, &cfg, 3, Some(&Refuter { complete: true })).unwrap();
        assert_eq!(truncated.kind, VerdictKind::Unknown(Exhaustion::AnnuliExhausted));
        let certified = OracleConfig {
            use_certificate_oracle: true,
            search_bounds: SearchBounds { max_depth: 8, ..SearchBounds::default() },
            ..cfg
        };
        let trivial = recognize_with_backend(&p, &certified, 10_000, Some(&Refuter { complete: true })).unwrap();
        assert!(trivial.is_sphere_like());
    }

    #[test]
    fn configuration_errors() {
        let none = OracleConfig { use_certificate_oracle: false, use_greedy_oracle: false, ..OracleConfig::default() };
        assert_eq!(recognize(&Presentation::standard(1), &none, 1).unwrap_err(), RecognizeError::NoOracle);
        assert!(matches!(recognize(&pres("<x,y | x>"), &greedy_only(), 1), Err(RecognizeError::NotBalanced { .. })));
    }
}
