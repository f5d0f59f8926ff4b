//! Built-in named presentations. Entries make no claim about whether they
//! are trivializable.

use acwb_core::{parse_presentation, Presentation};

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub presentation: Presentation,
}

fn entry(name: impl Into<String>, text: &str) -> CorpusEntry {
    let presentation = parse_presentation(text).expect("corpus entries parse");
    CorpusEntry { name: name.into(), presentation }
}

/// `<x,y | x^n Y^(n+1), x y x Y X Y>`.
pub fn akbulut_kirby(n: usize) -> Presentation {
    parse_presentation(&format!("<x,y | x^{n} Y^{}, x y x Y X Y>", n + 1)).expect("well formed")
}

pub fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for n in 2..=5 {
        out.push(CorpusEntry { name: format!("ak{n}"), presentation: akbulut_kirby(n) });
    }
    out.push(entry("free1", "<a | >"));
    out.push(entry("free2", "<a,b | >"));
    out.push(entry("free3", "<a,b,c | >"));
    out.push(entry("single", "<a | a>"));
    out.push(entry("pair", "<a,b | a, b>"));
    out.push(entry("product", "<a,b | a, a b>"));
    out.push(entry("conjugate", "<a,b | a, A b a>"));
    for n in 1..=4 {
        out.push(CorpusEntry { name: format!("standard{n}"), presentation: Presentation::standard(n) });
    }
    out
}

pub fn lookup(name: &str) -> Option<Presentation> {
    corpus().into_iter().find(|e| e.name == name).map(|e| e.presentation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use acwb_core::{abelianization_matrix, smith_normal_form, IntegerMatrix};
    use num_traits::One;

    #[test]
    fn entries_round_trip_through_text() {
        for e in corpus() {
            let text = e.presentation.to_string();
            assert_eq!(parse_presentation(&text).unwrap(), e.presentation, "{}", e.name);
            assert_eq!(parse_presentation(&text).unwrap().to_string(), text);
        }
    }

    #[test]
    fn akbulut_kirby_has_trivial_abelianization() {
        let m: IntegerMatrix = abelianization_matrix(&akbulut_kirby(2));
        let snf = smith_normal_form(&m).unwrap();
        assert_eq!(snf.rank(), 2);
        assert!(snf.diagonal.iter().all(|d| d.is_one()));
        assert_eq!(akbulut_kirby(3).to_string(), "<x,y | x^3 Y^4, x y x Y X Y>");
    }

    #[test]
    fn names_are_unique() {
        let names: std::collections::HashSet<String> = corpus().into_iter().map(|e| e.name).collect();
        assert_eq!(names.len(), corpus().len());
    }
}
