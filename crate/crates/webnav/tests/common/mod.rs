#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use webnav::backend::ScriptedBackend;
use webnav::fake::{load_fixture_dir, FakeBrowser, FakeConfig, FixturePage};
use webnav::{CdpDriver, DriverOptions};
use webnav_core::LabelMap;

/// Pages whose label maps have hand-counted oracles.
pub const ORACLE_PAGES: [&str; 5] = ["form", "nav", "hidden", "tall", "text"];

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn pages() -> Vec<FixturePage> {
    load_fixture_dir(&fixtures_dir()).expect("fixture pages load")
}

pub fn page_url(name: &str) -> String {
    format!("http://fixtures.test/{name}")
}

pub fn fake_config(start: Option<&str>) -> FakeConfig {
    FakeConfig {
        start_url: start.map(page_url),
        ..FakeConfig::with_pages(pages())
    }
}

pub fn start_fake(start: Option<&str>) -> FakeBrowser {
    FakeBrowser::start(fake_config(start)).expect("fake browser starts")
}

pub fn quick_options() -> DriverOptions {
    DriverOptions {
        connect_timeout: Duration::from_secs(2),
        navigation_timeout: Duration::from_millis(800),
        eval_timeout: Duration::from_millis(800),
        click_settle: Duration::from_millis(100),
    }
}

pub fn connect(fake: &FakeBrowser) -> CdpDriver {
    CdpDriver::connect_with(&fake.http_endpoint(), quick_options()).expect("driver connects")
}

#[derive(Debug, Deserialize, PartialEq)]
pub struct OracleElement {
    pub number: u32,
    pub role: String,
    pub text: String,
    pub selector: String,
    pub rect: [f64; 4],
}

#[derive(Debug, Deserialize)]
pub struct Oracle {
    pub url: String,
    pub elements: Vec<OracleElement>,
}

pub fn oracle(name: &str) -> Oracle {
    let path = fixtures_dir().join("oracles").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).expect("oracle file");
    serde_json::from_str(&text).expect("oracle parses")
}

/// Compares a label map field by field with its oracle.
pub fn check_oracle(map: &LabelMap, oracle: &Oracle) -> Result<(), String> {
    if map.url != oracle.url {
        return Err(format!("url {} != {}", map.url, oracle.url));
    }
    if map.elements.len() != oracle.elements.len() {
        return Err(format!(
            "{} elements, oracle has {}: {:?}",
            map.elements.len(),
            oracle.elements.len(),
            map.elements.iter().map(|e| &e.selector).collect::<Vec<_>>()
        ));
    }
    for (got, want) in map.elements.iter().zip(&oracle.elements) {
        let r = &got.rect;
        let got_o = OracleElement {
            number: got.number.get(),
            role: got.role.clone(),
            text: got.text.clone(),
            selector: got.selector.clone(),
            rect: [r.x, r.y, r.width, r.height],
        };
        if &got_o != want {
            return Err(format!("element {}: got {got_o:?}, oracle {want:?}", want.number));
        }
    }
    Ok(())
}

pub fn action_json(function: &str, params: &str) -> String {
    format!(r#"{{"function":"{function}","parameters":{params}}}"#)
}

/// Fills the three-field contact form and submits it.
pub fn form_fill_backend() -> ScriptedBackend {
    ScriptedBackend::new(
        [
            "The name field is [1].\nType [1] \"Ada Lovelace\"",
            "Type [2] \"ada@example.com\"",
            "Type [3] \"Hello \\\"agent\\\" here.\"",
            "Everything is filled in.\nClick [4]",
            "The thank-you page is showing.\nEND",
        ],
        [
            action_json("Type", r#"{"number":1,"text":"Ada Lovelace"}"#),
            format!("```json\n{}\n```", action_json("Type", r#"{"number":2,"text":"ada@example.com"}"#)),
            action_json("Type", r#"{"number":3,"text":"Hello \"agent\" here."}"#),
            action_json("Click", r#"{"number":4}"#),
        ],
    )
}

pub fn tiny_png(shade: u8) -> webnav::Png {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, 2, 2);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[shade; 12]).unwrap();
    }
    webnav::Png::new(out).unwrap()
}

/// A screenshot pair around `map`, without a browser.
pub fn pair_for(map: LabelMap) -> webnav::ScreenshotPair {
    webnav::ScreenshotPair {
        unlabeled: tiny_png(255),
        labeled: tiny_png(0),
        label_map: map,
    }
}

pub fn element(n: u32, role: &str, text: &str, selector: &str) -> webnav_core::LabeledElement {
    webnav_core::LabeledElement {
        number: webnav_core::LabelNumber::new(n).unwrap(),
        role: role.into(),
        text: text.into(),
        rect: webnav_core::Rect {
            x: 0.0,
            y: 20.0 * f64::from(n),
            width: 100.0,
            height: 18.0,
        },
        selector: selector.into(),
    }
}

/// `n` buttons numbered 1..=n.
pub fn map_of(n: u32) -> LabelMap {
    LabelMap {
        url: "http://fixtures.test/synthetic".into(),
        captured_at: "2026-01-01T00:00:00.000Z".into(),
        elements: (1..=n)
            .map(|i| element(i, "button", &format!("Button {i}"), &format!("#synthetic-button-{i}")))
            .collect(),
    }
}
