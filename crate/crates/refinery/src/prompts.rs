//! Prompt templates shipped as static assets for program providers.
//!
//! The engine itself never renders these; providers that wrap a language
//! model substitute the document text for the `<EXAMPLE>` placeholder.

pub const EDU_SCORE: &str = include_str!("../assets/prompts/edu_score.txt");
pub const FORMAT_SCORE: &str = include_str!("../assets/prompts/format_score.txt");
pub const NAV_REMOVAL: &str = include_str!("../assets/prompts/nav_removal.txt");
pub const URL_REMOVAL: &str = include_str!("../assets/prompts/url_removal.txt");
pub const FOOTER_REMOVAL: &str = include_str!("../assets/prompts/footer_removal.txt");

/// Placeholder providers substitute with the rendered document text.
pub const EXAMPLE_PLACEHOLDER: &str = "<EXAMPLE>";

/// All templates, keyed by a short name.
pub fn all() -> [(&'static str, &'static str); 5] {
    [
        ("edu_score", EDU_SCORE),
        ("format_score", FORMAT_SCORE),
        ("nav_removal", NAV_REMOVAL),
        ("url_removal", URL_REMOVAL),
        ("footer_removal", FOOTER_REMOVAL),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_carry_the_example_placeholder() {
        for (name, text) in all() {
            assert!(
                text.contains(EXAMPLE_PLACEHOLDER),
                "{name} is missing the placeholder"
            );
            assert!(!text.trim().is_empty());
        }
    }

    #[test]
    fn scoring_templates_state_their_score_markers() {
        assert!(EDU_SCORE.contains("Educational score:"));
        assert!(FORMAT_SCORE.contains("Extraction Quality Score:"));
    }
}
