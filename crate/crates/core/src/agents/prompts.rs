//! Versioned prompt templates shipped under `prompts/`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! template {
    ($ident:ident, $file:literal) => {
        pub const $ident: Template = Template {
            name: $file,
            text: include_str!(concat!("../../prompts/", $file)),
        };
    };
}

template!(NEWS_SYSTEM, "news_system.txt");
template!(NEWS_USER, "news_user.txt");
template!(NEWS_IMPACT_QUERY, "news_impact_query.txt");
template!(REPORT_SYSTEM, "report_system.txt");
template!(REPORT_USER, "report_user.txt");
template!(REPORT_QUERY, "report_query.txt");
template!(FORECAST_SYSTEM, "forecast_system.txt");
template!(FORECAST_USER, "forecast_user.txt");
template!(STYLE_SYSTEM, "style_system.txt");
template!(STYLE_USER, "style_user.txt");
template!(DECISION_SYSTEM, "decision_system.txt");
template!(DECISION_USER, "decision_user.txt");
template!(REPAIR, "repair.txt");
template!(REFLECTION, "reflection.txt");
template!(REFLECTION_EMPTY, "reflection_empty.txt");

impl Template {
    /// Substitutes every `{{key}}`. Panics on a placeholder without a value,
    /// which can only come from a template/code mismatch inside this crate.
    pub fn render(&self, vars: &[(&str, String)]) -> String {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .unwrap_or_else(|| panic!("unterminated placeholder in {}", self.name));
            let key = &after[..close];
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .unwrap_or_else(|| panic!("template {} needs `{key}`", self.name));
            out.push_str(&value.1);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        out.trim_end().to_string()
    }

    pub fn trimmed(&self) -> &'static str {
        self.text.trim()
    }
}

#[derive(Debug, Deserialize)]
pub struct Notices {
    pub no_news: String,
    pub no_filing: String,
    pub filing_unavailable: String,
    pub no_cases: String,
    pub no_style_history: String,
}

pub fn notices() -> &'static Notices {
    static NOTICES: OnceLock<Notices> = OnceLock::new();
    NOTICES.get_or_init(|| {
        toml::from_str(include_str!("../../prompts/notices.toml")).expect("bundled notices parse")
    })
}

/// Placeholder names used by a template, in order of first appearance.
pub fn placeholders(template: &Template) -> Vec<String> {
    let mut seen = BTreeMap::new();
    let mut rest = template.text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else { break };
        let n = seen.len();
        seen.entry(after[..close].to_string()).or_insert(n);
        rest = &after[close + 2..];
    }
    let mut keys: Vec<(usize, String)> = seen.into_iter().map(|(k, i)| (i, k)).collect();
    keys.sort();
    keys.into_iter().map(|(_, k)| k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes() {
        let out = REPAIR.render(&[("error", "missing field `action`".into())]);
        assert!(out.starts_with("Your previous reply could not be used: missing field `action`"));
        assert!(!out.contains("{{"));
    }

    #[test]
    #[should_panic(expected = "needs `error`")]
    fn render_panics_on_missing_value() {
        REPAIR.render(&[]);
    }

    #[test]
    fn system_templates_carry_agent_header() {
        for (t, agent) in [
            (NEWS_SYSTEM, "news"),
            (REPORT_SYSTEM, "report"),
            (FORECAST_SYSTEM, "forecast"),
            (STYLE_SYSTEM, "style"),
            (DECISION_SYSTEM, "decision"),
        ] {
            assert!(t.text.starts_with(&format!("[agent:{agent}] [date:{{{{date}}}}] [template:{TEMPLATE_VERSION}]")));
        }
    }

    #[test]
    fn notices_load() {
        assert!(!notices().no_news.is_empty());
        assert_eq!(placeholders(&REPAIR), vec!["error".to_string()]);
    }
}
