//! Flat-color rasterizer for fixture pages. Enough for pixel-level checks:
//! element boxes, typed-value bars, and label badges all change the image.

use webnav_core::contract::is_candidate;
use webnav_core::label_map::LabeledElement;

use super::dom::Dom;

type Rgb = [u8; 3];

const BACKGROUND: Rgb = [255, 255, 255];
const PLAIN_BOX: Rgb = [232, 232, 232];
const CONTROL_FILL: Rgb = [205, 222, 250];
const CONTROL_EDGE: Rgb = [40, 80, 160];
const VALUE_BAR: Rgb = [20, 20, 20];
const BADGE: Rgb = [210, 0, 0];
const BADGE_MARK: Rgb = [255, 255, 255];

struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&BACKGROUND);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    fn fill(&mut self, x: f64, y: f64, w: f64, h: f64, color: Rgb) {
        let clamp_x = |v: f64| v.round().clamp(0.0, self.width as f64) as usize;
        let clamp_y = |v: f64| v.round().clamp(0.0, self.height as f64) as usize;
        let (x0, x1) = (clamp_x(x), clamp_x(x + w));
        let (y0, y1) = (clamp_y(y), clamp_y(y + h));
        for row in y0..y1 {
            let start = (row * self.width + x0) * 3;
            let end = (row * self.width + x1) * 3;
            for px in self.pixels[start..end].chunks_exact_mut(3) {
                px.copy_from_slice(&color);
            }
        }
    }

    fn outline(&mut self, x: f64, y: f64, w: f64, h: f64, color: Rgb) {
        self.fill(x, y, w, 1.0, color);
        self.fill(x, y + h - 1.0, w, 1.0, color);
        self.fill(x, y, 1.0, h, color);
        self.fill(x + w - 1.0, y, 1.0, h, color);
    }

    fn encode(self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Fast);
            let mut writer = enc.write_header().expect("in-memory PNG header");
            writer
                .write_image_data(&self.pixels)
                .expect("in-memory PNG body");
        }
        out
    }
}

pub(crate) fn render(dom: &Dom, scroll_y: f64, overlay: Option<&[LabeledElement]>) -> Vec<u8> {
    let width = dom.viewport.width.max(1.0) as usize;
    let height = dom.viewport.height.max(1.0) as usize;
    let mut canvas = Canvas::new(width, height);

    for idx in dom.preorder() {
        if !dom.rendered(idx) {
            continue;
        }
        let r = dom.client_rect(idx, scroll_y);
        if !r.has_area() {
            continue;
        }
        let node = dom.node(idx);
        if is_candidate(node) {
            canvas.fill(r.x, r.y, r.width, r.height, CONTROL_FILL);
            canvas.outline(r.x, r.y, r.width, r.height, CONTROL_EDGE);
        } else {
            canvas.fill(r.x, r.y, r.width, r.height, PLAIN_BOX);
        }
        if let Some(value) = node.value.as_deref().filter(|v| !v.is_empty()) {
            let bar = (value.chars().count() as f64 * 6.0).min((r.width - 6.0).max(0.0));
            canvas.fill(r.x + 3.0, r.y + r.height / 2.0 - 2.0, bar, 4.0, VALUE_BAR);
        }
    }

    // Badges encode the label number as a row of tick marks per digit.
    for el in overlay.unwrap_or_default() {
        let digits: Vec<u32> = el
            .number
            .get()
            .to_string()
            .bytes()
            .map(|b| u32::from(b - b'0'))
            .collect();
        let w = 6.0 + 5.0 * digits.len() as f64;
        canvas.fill(el.rect.x, el.rect.y, w, 14.0, BADGE);
        for (i, d) in digits.iter().enumerate() {
            let h = 2.0 + f64::from(*d);
            canvas.fill(el.rect.x + 3.0 + 5.0 * i as f64, el.rect.y + 12.0 - h, 3.0, h, BADGE_MARK);
        }
    }

    canvas.encode()
}
