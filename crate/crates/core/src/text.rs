//! Tokenization shared by enrichment and matching.

/// Splits on non-alphanumerics and on lower-to-upper camelCase boundaries,
/// lower-cases, and drops tokens shorter than two characters. No stemming.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for ch in s.chars() {
        if !ch.is_alphanumeric() {
            flush(&mut cur, &mut out);
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower {
            flush(&mut cur, &mut out);
        }
        prev_lower = ch.is_lowercase();
        cur.extend(ch.to_lowercase());
    }
    flush(&mut cur, &mut out);
    out
}

fn flush(cur: &mut String, out: &mut Vec<String>) {
    if cur.chars().count() >= 2 {
        out.push(std::mem::take(cur));
    } else {
        cur.clear();
    }
}

/// Knowledge-graph term form: trimmed, lower-cased, inner whitespace as `_`.
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase()
}

/// Token sequence used to compare object names across sources.
pub fn same_name(a: &str, b: &str) -> bool {
    let ta = tokenize(a);
    !ta.is_empty() && ta == tokenize(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underscores_and_case() {
        assert_eq!(tokenize("Jimmy_Glass_Jazz_bar"), vec!["jimmy", "glass", "jazz", "bar"]);
    }

    #[test]
    fn camel_case_and_short_tokens() {
        assert_eq!(tokenize("atLocation"), vec!["at", "location"]);
        assert_eq!(tokenize("isA"), vec!["is"]);
        assert_eq!(tokenize("HTTPServer x"), vec!["httpserver"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn name_equivalence() {
        assert!(same_name("Virgen_plaza", "VirgenPlaza"));
        assert!(same_name("Virgen plaza", "virgen_plaza"));
        assert!(!same_name("Virgen_plaza", "Plaza_Virgen"));
        assert!(!same_name("a", "b"));
    }

    #[test]
    fn term_form() {
        assert_eq!(normalize_term("  Must See "), "must_see");
    }
}
