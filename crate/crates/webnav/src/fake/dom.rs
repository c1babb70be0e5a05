//! Fixture pages and the live element store the fake server mutates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use webnav_core::contract::{
    accessible_text, is_candidate, is_plain_id, is_visible, role_of, ElementAttrs, NameSources,
    StyleFacts,
};
use webnav_core::label_map::{LabelNumber, LabeledElement, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: f64,
    pub height: f64,
}

impl Default for Viewport {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 400.0,
        }
    }
}

/// A static page: one tree of elements with explicit layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturePage {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub viewport: Viewport,
    /// Scrollable height; defaults to the lowest element edge.
    #[serde(default)]
    pub document_height: Option<f64>,
    #[serde(default)]
    pub body: Vec<FixtureNode>,
}

impl FixturePage {
    pub fn blank() -> Self {
        Self {
            url: "about:blank".into(),
            title: String::new(),
            viewport: Viewport::default(),
            document_height: None,
            body: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureStyle {
    #[serde(default)]
    pub display: Option<String>,
    #[serde(default)]
    pub visibility: Option<String>,
    #[serde(default)]
    pub opacity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureNode {
    pub tag: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
    /// The node's own text, before its children.
    #[serde(default)]
    pub text: String,
    /// `[x, y, width, height]` in document coordinates.
    #[serde(default)]
    pub rect: Option<[f64; 4]>,
    #[serde(default)]
    pub style: FixtureStyle,
    #[serde(default)]
    pub children: Vec<FixtureNode>,
}

#[derive(Debug, Clone)]
pub(crate) struct DomNode {
    tag: String,
    attrs: BTreeMap<String, String>,
    text: String,
    rect: Option<[f64; 4]>,
    style: FixtureStyle,
    parent: Option<usize>,
    children: Vec<usize>,
    pub(crate) value: Option<String>,
    pub(crate) clicks: u32,
}

impl ElementAttrs for DomNode {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }
}

impl DomNode {
    fn tag_is(&self, t: &str) -> bool {
        self.tag.eq_ignore_ascii_case(t)
    }

    fn input_type(&self) -> String {
        self.attr("type").unwrap_or("text").to_ascii_lowercase()
    }
}

/// What a click did beyond bumping the counter.
#[derive(Debug, Default, PartialEq)]
pub(crate) struct ClickEffect {
    pub navigate_to: Option<String>,
    pub submitted: Option<BTreeMap<String, String>>,
}

/// The live document: an arena rooted at `body` (index 0).
#[derive(Debug, Clone)]
pub(crate) struct Dom {
    pub url: String,
    pub title: String,
    pub viewport: Viewport,
    document_height: Option<f64>,
    nodes: Vec<DomNode>,
}

const NON_TEXT_INPUTS: &[&str] = &[
    "button", "submit", "reset", "checkbox", "radio", "file", "image", "hidden", "range", "color",
];

impl Dom {
    pub fn load(page: &FixturePage) -> Self {
        let mut dom = Dom {
            url: page.url.clone(),
            title: page.title.clone(),
            viewport: page.viewport,
            document_height: page.document_height,
            nodes: vec![DomNode {
                tag: "body".into(),
                attrs: BTreeMap::new(),
                text: String::new(),
                rect: None,
                style: FixtureStyle::default(),
                parent: None,
                children: Vec::new(),
                value: None,
                clicks: 0,
            }],
        };
        for child in &page.body {
            dom.insert(0, child);
        }
        dom
    }

    fn insert(&mut self, parent: usize, node: &FixtureNode) {
        let idx = self.nodes.len();
        let has_value = ["input", "textarea", "select", "button"]
            .iter()
            .any(|t| node.tag.eq_ignore_ascii_case(t));
        self.nodes.push(DomNode {
            tag: node.tag.to_ascii_lowercase(),
            attrs: node.attrs.clone(),
            text: node.text.clone(),
            rect: node.rect,
            style: node.style.clone(),
            parent: Some(parent),
            children: Vec::new(),
            value: has_value.then(|| node.attrs.get("value").cloned().unwrap_or_default()),
            clicks: 0,
        });
        self.nodes[parent].children.push(idx);
        for child in &node.children {
            self.insert(idx, child);
        }
    }

    pub fn node(&self, idx: usize) -> &DomNode {
        &self.nodes[idx]
    }

    /// Attached nodes in document order, body first.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            out.push(idx);
            stack.extend(self.nodes[idx].children.iter().rev());
        }
        out
    }

    fn ancestors_and_self(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(idx), move |&i| self.nodes[i].parent)
    }

    /// An element under a `display: none` ancestor has no layout box.
    fn has_box(&self, idx: usize) -> bool {
        self.ancestors_and_self(idx)
            .all(|i| self.nodes[i].style.display.as_deref() != Some("none"))
    }

    fn visibility_hidden(&self, idx: usize) -> bool {
        self.ancestors_and_self(idx)
            .find_map(|i| self.nodes[i].style.visibility.as_deref())
            .is_some_and(|v| v == "hidden" || v == "collapse")
    }

    pub fn rendered(&self, idx: usize) -> bool {
        self.has_box(idx)
            && !self.visibility_hidden(idx)
            && self.nodes[idx].style.opacity.unwrap_or(1.0) > 0.0
    }

    /// Viewport-relative rect, zero-sized when the element has no box.
    pub fn client_rect(&self, idx: usize, scroll_y: f64) -> Rect {
        match (self.nodes[idx].rect, self.has_box(idx)) {
            (Some([x, y, w, h]), true) => Rect {
                x,
                y: y - scroll_y,
                width: w,
                height: h,
            },
            _ => Rect {
                x: 0.0,
                y: 0.0,
                width: 0.0,
                height: 0.0,
            },
        }
    }

    pub fn document_height(&self) -> f64 {
        self.document_height.unwrap_or_else(|| {
            self.nodes
                .iter()
                .filter_map(|n| n.rect.map(|[_, y, _, h]| y + h))
                .fold(self.viewport.height, f64::max)
        })
    }

    pub fn max_scroll(&self) -> f64 {
        (self.document_height() - self.viewport.height).max(0.0)
    }

    /// Rendered text of the subtree, the way `innerText` reads it.
    fn inner_text(&self, idx: usize) -> String {
        let node = &self.nodes[idx];
        if node.tag_is("input") || node.tag_is("textarea") || node.tag_is("select") {
            return String::new();
        }
        let mut parts = Vec::new();
        self.collect_text(idx, &mut parts);
        parts.join(" ")
    }

    fn collect_text(&self, idx: usize, parts: &mut Vec<String>) {
        if !self.has_box(idx) || self.visibility_hidden(idx) {
            return;
        }
        let node = &self.nodes[idx];
        if !node.text.trim().is_empty() {
            parts.push(node.text.clone());
        }
        for &c in &node.children {
            self.collect_text(c, parts);
        }
    }

    fn elements_with_id(&self, id: &str) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .filter(|&i| self.nodes[i].attr("id") == Some(id))
            .collect()
    }

    /// Same path rules as the labeler's `cssPath`.
    pub fn css_path(&self, idx: usize) -> String {
        let mut parts = Vec::new();
        let mut cur = Some(idx);
        while let Some(i) = cur {
            if i == 0 {
                parts.push("body".to_string());
                break;
            }
            let node = &self.nodes[i];
            if let Some(id) = node.attr("id") {
                if is_plain_id(id) && self.elements_with_id(id).len() == 1 {
                    parts.push(format!("#{id}"));
                    break;
                }
            }
            let parent = node.parent.expect("non-root node has a parent");
            let k = self.nodes[parent]
                .children
                .iter()
                .take_while(|&&c| c != i)
                .filter(|&&c| self.nodes[c].tag == node.tag)
                .count()
                + 1;
            parts.push(format!("{}:nth-of-type({k})", node.tag));
            cur = Some(parent);
        }
        parts.reverse();
        parts.join(" > ")
    }

    /// Resolves the selector forms `css_path` produces. Anything else
    /// matches nothing.
    pub fn resolve(&self, selector: &str) -> Vec<usize> {
        let mut segments = selector.split(" > ").map(str::trim);
        let Some(first) = segments.next() else {
            return Vec::new();
        };
        let mut current = if first == "body" {
            vec![0]
        } else if let Some(id) = first.strip_prefix('#') {
            self.elements_with_id(id)
        } else {
            return Vec::new();
        };
        for seg in segments {
            let Some((tag, rest)) = seg.split_once(":nth-of-type(") else {
                return Vec::new();
            };
            let Some(k) = rest.strip_suffix(')').and_then(|k| k.parse::<usize>().ok()) else {
                return Vec::new();
            };
            current = current
                .into_iter()
                .filter_map(|p| {
                    self.nodes[p]
                        .children
                        .iter()
                        .copied()
                        .filter(|&c| self.nodes[c].tag.eq_ignore_ascii_case(tag))
                        .nth(k.checked_sub(1)?)
                })
                .collect();
        }
        current
    }

    /// Runs the enumeration contract against the current layout.
    pub fn enumerate(&self, scroll_y: f64) -> Vec<LabeledElement> {
        let mut out = Vec::new();
        for idx in self.preorder() {
            let node = &self.nodes[idx];
            if !is_candidate(node) {
                continue;
            }
            let rect = self.client_rect(idx, scroll_y);
            let style = StyleFacts {
                display_none: !self.has_box(idx),
                visibility_hidden: self.visibility_hidden(idx),
                opacity: node.style.opacity.unwrap_or(1.0),
            };
            if !is_visible(&rect, self.viewport.width, self.viewport.height, style) {
                continue;
            }
            let inner = self.inner_text(idx);
            let password = node.tag_is("input") && node.input_type() == "password";
            let text = accessible_text(&NameSources {
                aria_label: node.attr("aria-label"),
                inner_text: Some(&inner),
                value: if password { None } else { node.value.as_deref() },
                placeholder: node.attr("placeholder"),
                title: node.attr("title"),
                alt: node.attr("alt"),
            });
            let number = LabelNumber::new(out.len() as u32 + 1).expect("numbering starts at 1");
            out.push(LabeledElement {
                number,
                role: role_of(node),
                text,
                rect,
                selector: self.css_path(idx),
            });
        }
        out
    }

    pub fn is_editable(&self, idx: usize) -> bool {
        let node = &self.nodes[idx];
        if node.attr("disabled").is_some() || node.attr("readonly").is_some() {
            return false;
        }
        node.tag_is("textarea")
            || (node.tag_is("input") && !NON_TEXT_INPUTS.contains(&node.input_type().as_str()))
            || node
                .attr("contenteditable")
                .is_some_and(|v| v.is_empty() || v.eq_ignore_ascii_case("true"))
    }

    pub fn set_text_value(&mut self, idx: usize, text: &str) {
        let node = &mut self.nodes[idx];
        if node.value.is_some() {
            node.value = Some(text.to_string());
        } else {
            node.text = text.to_string();
            node.children.clear();
        }
    }

    pub fn remove(&mut self, idx: usize) {
        if let Some(parent) = self.nodes[idx].parent.take() {
            self.nodes[parent].children.retain(|&c| c != idx);
        }
    }

    fn resolve_href(&self, href: &str) -> Option<String> {
        if href.starts_with('#') || href.starts_with("javascript:") {
            return None;
        }
        let base = url::Url::parse(&self.url).ok();
        match base {
            Some(b) => b.join(href).ok().map(String::from),
            None => url::Url::parse(href).ok().map(String::from),
        }
    }

    pub fn click(&mut self, idx: usize) -> ClickEffect {
        let node = &mut self.nodes[idx];
        node.clicks += 1;
        let clicks = node.clicks;
        node.attrs.insert("data-clicks".into(), clicks.to_string());

        let mut effect = ClickEffect::default();
        let node = &self.nodes[idx];
        if let Some(target) = node.attr("data-toggle").map(str::to_string) {
            for t in self.elements_with_id(&target) {
                let style = &mut self.nodes[t].style;
                style.display = match style.display.as_deref() {
                    Some("none") => None,
                    _ => Some("none".into()),
                };
            }
        }
        let node = &self.nodes[idx];
        if node.tag_is("a") {
            if let Some(href) = node.attr("href") {
                effect.navigate_to = self.resolve_href(href);
            }
            return effect;
        }
        let submits = (node.tag_is("button")
            && matches!(node.attr("type").map(str::to_ascii_lowercase).as_deref(), None | Some("submit")))
            || (node.tag_is("input") && node.input_type() == "submit");
        if submits {
            let form = self
                .ancestors_and_self(idx)
                .find(|&i| self.nodes[i].tag_is("form"));
            if let Some(form) = form {
                let fields = self.form_fields(form);
                effect.navigate_to = self.nodes[form]
                    .attr("action")
                    .and_then(|a| self.resolve_href(a));
                effect.submitted = Some(fields);
            }
        }
        effect
    }

    fn form_fields(&self, form: usize) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut stack = vec![form];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if let (Some(name), Some(value)) = (node.attr("name"), node.value.as_ref()) {
                if !node.tag_is("button") {
                    out.insert(name.to_string(), value.clone());
                }
            }
            stack.extend(node.children.iter().rev());
        }
        out
    }
}
