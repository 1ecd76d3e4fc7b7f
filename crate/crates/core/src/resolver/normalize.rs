//! Query normalization for prescription text.

use super::ResolveError;

/// Formulation and packaging words dropped from drug names. Compared as
/// whole whitespace-separated tokens after lowercasing.
pub const FORMULATION_TOKENS: &[&str] = &[
    "syringe", "iv", "soln", "solution", "inj", "injection", "flush", "bag", "tab", "tablet", "cap",
    "capsule", "po", "oral", "susp", "suspension", "premix", "vial", "patch", "cream", "oint", "er", "sr",
];

/// Lowercase, drop parenthetical segments and formulation tokens, collapse
/// whitespace. May return an empty string.
pub fn normalize_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for ch in raw.chars() {
        match ch {
            '(' | '[' => {
                depth += 1;
                out.push(' ');
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                out.push(' ');
            }
            _ if depth == 0 => out.extend(ch.to_lowercase()),
            _ => {}
        }
    }
    out.split_whitespace()
        .filter(|t| !FORMULATION_TOKENS.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Strip a trailing `.0` float artifact, require digits only and left-pad
/// to 11 digits. Longer codes are rejected.
pub fn normalize_ndc(raw: &str) -> Result<String, ResolveError> {
    let t = raw.trim();
    let t = t.strip_suffix(".0").unwrap_or(t);
    let invalid = || ResolveError::InvalidNdc(raw.to_string());
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) || t.len() > 11 {
        return Err(invalid());
    }
    Ok(format!("{t:0>11}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(normalize_name("Morphine Sulfate (Syringe)"), "morphine sulfate");
        assert_eq!(normalize_name("Heparin Sodium"), "heparin sodium");
        assert_eq!(normalize_name("  Acetaminophen  "), "acetaminophen");
        assert_eq!(normalize_name("Vancomycin IV Soln"), "vancomycin");
        assert_eq!(normalize_name("Heparin Flush (10 units/ml)"), "heparin");
        assert_eq!(normalize_name("(Syringe)"), "");
        assert_eq!(normalize_name(""), "");
    }

    #[test]
    fn tokens_match_whole_words_only() {
        // "iv" inside a word is kept
        assert_eq!(normalize_name("Ivermectin"), "ivermectin");
    }

    #[test]
    fn ndcs() {
        assert_eq!(normalize_ndc("63323026201.0").unwrap(), "63323026201");
        assert_eq!(normalize_ndc("182844789.0").unwrap(), "00182844789");
        assert_eq!(normalize_ndc("409176230.0").unwrap(), "00409176230");
        assert!(matches!(normalize_ndc("abc"), Err(ResolveError::InvalidNdc(_))));
        assert!(matches!(normalize_ndc(""), Err(ResolveError::InvalidNdc(_))));
        assert!(matches!(normalize_ndc("12-34"), Err(ResolveError::InvalidNdc(_))));
        // twelve digits cannot be an NDC
        assert!(matches!(normalize_ndc("594091985307.0"), Err(ResolveError::InvalidNdc(_))));
    }
}
