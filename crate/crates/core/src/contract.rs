//! Normative rules for which elements get a label.
//!
//! Both the injected labeler script and any other enumerator (the browser
//! extension, the fake protocol server) implement these rules. The helpers
//! below are the Rust rendition; `labeler.js` is the in-page one.

use alloc::string::String;

use crate::label_map::Rect;

/// Accessible-name text is cut to this many characters.
pub const MAX_TEXT_CHARS: usize = 120;

/// ARIA roles that make any element a candidate.
pub const INTERACTIVE_ROLES: &[&str] = &[
    "button", "link", "checkbox", "radio", "textbox", "combobox", "menuitem", "tab",
];

/// Every rule except `tabindex`, whose value needs a numeric check.
pub const BASE_SELECTOR: &str = "a[href], button, input:not([type=hidden]), select, \
textarea, [role=button], [role=link], [role=checkbox], [role=radio], [role=textbox], \
[role=combobox], [role=menuitem], [role=tab], [onclick]";

/// The selector list, in the form the labeler passes to `querySelectorAll`.
/// Matches with a negative `tabindex` and nothing else are dropped afterwards.
pub const CANDIDATE_SELECTOR: &str = "a[href], button, input:not([type=hidden]), select, \
textarea, [role=button], [role=link], [role=checkbox], [role=radio], [role=textbox], \
[role=combobox], [role=menuitem], [role=tab], [onclick], [tabindex]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationContract {
    pub candidate_selector: &'static str,
    pub base_selector: &'static str,
    pub interactive_roles: &'static [&'static str],
    pub max_text_chars: usize,
    /// Nested candidates are all labeled; an ancestor never hides a descendant.
    pub ancestor_suppression: bool,
    pub first_number: u32,
}

const CONTRACT: EnumerationContract = EnumerationContract {
    candidate_selector: CANDIDATE_SELECTOR,
    base_selector: BASE_SELECTOR,
    interactive_roles: INTERACTIVE_ROLES,
    max_text_chars: MAX_TEXT_CHARS,
    ancestor_suppression: false,
    first_number: 1,
};

pub fn enumerate_contract() -> &'static EnumerationContract {
    &CONTRACT
}

/// Read access to one DOM element, enough to apply the candidate rules.
pub trait ElementAttrs {
    /// Tag name in any case.
    fn tag(&self) -> &str;
    fn attr(&self, name: &str) -> Option<&str>;
}

/// Whether the element matches the candidate selector list.
pub fn is_candidate<E: ElementAttrs + ?Sized>(el: &E) -> bool {
    let tag = el.tag();
    let tag_is = |t: &str| tag.eq_ignore_ascii_case(t);
    if tag_is("a") && el.attr("href").is_some() {
        return true;
    }
    if tag_is("button") || tag_is("select") || tag_is("textarea") {
        return true;
    }
    if tag_is("input") && !el.attr("type").is_some_and(|t| t.eq_ignore_ascii_case("hidden")) {
        return true;
    }
    if el
        .attr("role")
        .is_some_and(|r| INTERACTIVE_ROLES.iter().any(|k| r.eq_ignore_ascii_case(k)))
    {
        return true;
    }
    if el.attr("onclick").is_some() {
        return true;
    }
    el.attr("tabindex").is_some_and(tabindex_focusable)
}

/// `tabindex` parsed the way browsers do: leading integer, sign allowed.
fn tabindex_focusable(raw: &str) -> bool {
    let raw = raw.trim();
    let (neg, digits) = match raw.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, raw.strip_prefix('+').unwrap_or(raw)),
    };
    let end = digits
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(digits.len());
    if end == 0 {
        return false;
    }
    // "-0" is zero, which is focusable.
    !neg || digits[..end].bytes().all(|b| b == b'0')
}

/// ARIA role if set, otherwise the lowercase tag name.
pub fn role_of<E: ElementAttrs + ?Sized>(el: &E) -> String {
    el.attr("role")
        .and_then(|r| r.split_whitespace().next())
        .map(str::to_ascii_lowercase)
        .unwrap_or_else(|| el.tag().to_ascii_lowercase())
}

/// Computed-style facts that decide visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleFacts {
    pub display_none: bool,
    pub visibility_hidden: bool,
    pub opacity: f64,
}

impl Default for StyleFacts {
    fn default() -> Self {
        Self {
            display_none: false,
            visibility_hidden: false,
            opacity: 1.0,
        }
    }
}

/// `rect` is viewport-relative; the viewport spans `(0,0)..(width,height)`.
pub fn is_visible(rect: &Rect, viewport_width: f64, viewport_height: f64, style: StyleFacts) -> bool {
    rect.has_area()
        && rect.x < viewport_width
        && rect.x + rect.width > 0.0
        && rect.y < viewport_height
        && rect.y + rect.height > 0.0
        && !style.display_none
        && !style.visibility_hidden
        && style.opacity > 0.0
}

/// Candidate sources for the accessible name, in priority order.
#[derive(Debug, Clone, Copy, Default)]
pub struct NameSources<'a> {
    pub aria_label: Option<&'a str>,
    pub inner_text: Option<&'a str>,
    /// Current form value; omitted for password fields.
    pub value: Option<&'a str>,
    pub placeholder: Option<&'a str>,
    pub title: Option<&'a str>,
    pub alt: Option<&'a str>,
}

/// The first non-blank source, whitespace-collapsed and truncated.
pub fn accessible_text(src: &NameSources<'_>) -> String {
    [
        src.aria_label,
        src.inner_text,
        src.value,
        src.placeholder,
        src.title,
        src.alt,
    ]
    .into_iter()
    .flatten()
    .map(normalize_text)
    .find(|t| !t.is_empty())
    .unwrap_or_default()
}

/// Collapses whitespace runs to one space, trims, and keeps at most
/// [`MAX_TEXT_CHARS`] characters.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::new();
    for (count, word) in raw.split_whitespace().enumerate() {
        if count > 0 {
            out.push(' ');
        }
        out.push_str(word);
    }
    match out.char_indices().nth(MAX_TEXT_CHARS) {
        Some((cut, _)) => {
            out.truncate(cut);
            let trimmed = out.trim_end().len();
            out.truncate(trimmed);
            out
        }
        None => out,
    }
}

/// True when `id` can be used as a bare `#id` selector without escaping.
pub fn is_plain_id(id: &str) -> bool {
    let mut chars = id.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    struct El {
        tag: &'static str,
        attrs: BTreeMap<&'static str, &'static str>,
    }

    impl ElementAttrs for El {
        fn tag(&self) -> &str {
            self.tag
        }
        fn attr(&self, name: &str) -> Option<&str> {
            self.attrs.get(name).copied()
        }
    }

    fn el(tag: &'static str, attrs: &[(&'static str, &'static str)]) -> El {
        El {
            tag,
            attrs: attrs.iter().copied().collect(),
        }
    }

    #[test]
    fn candidate_rules() {
        assert!(is_candidate(&el("A", &[("href", "/x")])));
        assert!(!is_candidate(&el("a", &[])));
        assert!(is_candidate(&el("button", &[])));
        assert!(is_candidate(&el("input", &[])));
        assert!(is_candidate(&el("input", &[("type", "text")])));
        assert!(!is_candidate(&el("input", &[("type", "HIDDEN")])));
        assert!(is_candidate(&el("select", &[])));
        assert!(is_candidate(&el("textarea", &[])));
        assert!(is_candidate(&el("div", &[("role", "Tab")])));
        assert!(!is_candidate(&el("div", &[("role", "banner")])));
        assert!(is_candidate(&el("span", &[("onclick", "go()")])));
        assert!(is_candidate(&el("div", &[("tabindex", "0")])));
        assert!(is_candidate(&el("div", &[("tabindex", "2")])));
        assert!(!is_candidate(&el("div", &[("tabindex", "-1")])));
        assert!(!is_candidate(&el("div", &[("tabindex", "x")])));
        assert!(!is_candidate(&el("div", &[])));
    }

    #[test]
    fn role_prefers_aria() {
        assert_eq!(role_of(&el("DIV", &[("role", "Button extra")])), "button");
        assert_eq!(role_of(&el("A", &[("href", "#")])), "a");
    }

    #[test]
    fn visibility_rules() {
        let r = |x, y, w, h| Rect {
            x,
            y,
            width: w,
            height: h,
        };
        let s = StyleFacts::default();
        assert!(is_visible(&r(0.0, 0.0, 10.0, 10.0), 800.0, 600.0, s));
        assert!(!is_visible(&r(0.0, 0.0, 0.0, 10.0), 800.0, 600.0, s));
        assert!(!is_visible(&r(0.0, 600.0, 10.0, 10.0), 800.0, 600.0, s));
        assert!(is_visible(&r(0.0, -5.0, 10.0, 10.0), 800.0, 600.0, s));
        assert!(!is_visible(&r(0.0, -10.0, 10.0, 10.0), 800.0, 600.0, s));
        let hidden = StyleFacts {
            visibility_hidden: true,
            ..s
        };
        assert!(!is_visible(&r(0.0, 0.0, 10.0, 10.0), 800.0, 600.0, hidden));
        let none = StyleFacts {
            display_none: true,
            ..s
        };
        assert!(!is_visible(&r(0.0, 0.0, 10.0, 10.0), 800.0, 600.0, none));
        let clear = StyleFacts { opacity: 0.0, ..s };
        assert!(!is_visible(&r(0.0, 0.0, 10.0, 10.0), 800.0, 600.0, clear));
    }

    #[test]
    fn text_normalization() {
        assert_eq!(normalize_text("  Sign \n\t in  "), "Sign in");
        let long = "é".repeat(200);
        assert_eq!(normalize_text(&long).chars().count(), MAX_TEXT_CHARS);
        let spaced = alloc::format!("{} b", "a".repeat(MAX_TEXT_CHARS - 1));
        assert_eq!(normalize_text(&spaced), "a".repeat(MAX_TEXT_CHARS - 1));
    }

    #[test]
    fn accessible_text_priority() {
        let src = NameSources {
            aria_label: Some("  "),
            inner_text: None,
            value: Some("typed"),
            placeholder: Some("Name"),
            ..Default::default()
        };
        assert_eq!(accessible_text(&src), "typed");
        assert_eq!(accessible_text(&NameSources::default()), "".to_string());
    }

    #[test]
    fn plain_ids() {
        assert!(is_plain_id("login-btn_2"));
        assert!(!is_plain_id("2fast"));
        assert!(!is_plain_id("a b"));
        assert!(!is_plain_id(""));
    }
}
