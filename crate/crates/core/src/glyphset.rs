//! Seven-segment glyph rasterization and noisy variant generation.
//!
//! The 128 base glyphs live on a 28x28 canvas. Variants are produced at 10x
//! resolution: upsample, dim the lit pixels by one exponential draw, rotate,
//! translate (both bilinear with zero fill), then block-mean back to 28x28.

use crate::error::CoreError;
use crate::hash::Fnv64;
use crate::rng::StreamKey;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use std::fs;
use std::io::Write as _;
use std::path::Path;

pub const CANVAS_SIDE: usize = 28;
pub const IMAGE_LEN: usize = CANVAS_SIDE * CANVAS_SIDE;
pub const GLYPH_COUNT: usize = 128;

/// One of the 128 seven-segment glyphs; bit k lit means segment k is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlyphId(u8);

impl GlyphId {
    pub fn new(id: u8) -> Option<Self> {
        (id < GLYPH_COUNT as u8).then_some(GlyphId(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn segment_lit(self, segment: usize) -> bool {
        debug_assert!(segment < 7);
        self.0 & (1 << segment) != 0
    }

    /// Glyphs with exactly one lit segment, in segment order 0..6.
    pub fn one_hot() -> [GlyphId; 7] {
        [
            GlyphId(1),
            GlyphId(2),
            GlyphId(4),
            GlyphId(8),
            GlyphId(16),
            GlyphId(32),
            GlyphId(64),
        ]
    }

    pub fn all() -> impl Iterator<Item = GlyphId> {
        (0..GLYPH_COUNT as u8).map(GlyphId)
    }
}

/// Axis-aligned pixel rectangle, half-open in both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl SegRect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Pixel geometry of the seven segments on the 28x28 canvas.
///
/// Segment order: 0 top, 1 top-right, 2 bottom-right, 3 bottom,
/// 4 bottom-left, 5 top-left, 6 middle. The display occupies a centred
/// 12x20 bounding box; segments are 2 pixels thick, vertical segments run
/// to the corners so adjacent segments overlap only there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLayout {
    pub segments: [SegRect; 7],
}

impl Default for SegmentLayout {
    fn default() -> Self {
        let r = |x0, y0, x1, y1| SegRect { x0, y0, x1, y1 };
        SegmentLayout {
            segments: [
                r(8, 4, 20, 6),    // top
                r(18, 4, 20, 14),  // top-right
                r(18, 14, 20, 24), // bottom-right
                r(8, 22, 20, 24),  // bottom
                r(8, 14, 10, 24),  // bottom-left
                r(8, 4, 10, 14),   // top-left
                r(8, 13, 20, 15),  // middle
            ],
        }
    }
}

impl SegmentLayout {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (k, s) in self.segments.iter().enumerate() {
            if s.x0 >= s.x1 || s.y0 >= s.y1 || s.x1 > CANVAS_SIDE || s.y1 > CANVAS_SIDE {
                return Err(CoreError::InvalidConfig(format!(
                    "segment {k} out of canvas: {s:?}"
                )));
            }
        }
        Ok(())
    }

    /// Boolean lit mask for a single segment.
    pub fn segment_mask(&self, segment: usize) -> Vec<bool> {
        let rect = self.segments[segment];
        let mut mask = vec![false; IMAGE_LEN];
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                mask[y * CANVAS_SIDE + x] = true;
            }
        }
        mask
    }
}

/// A 28x28 glyph picture, row-major, intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f32>,
}

impl Image {
    pub fn zeros() -> Self {
        Image {
            pixels: vec![0.0; IMAGE_LEN],
        }
    }

    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self, CoreError> {
        if pixels.len() != IMAGE_LEN {
            return Err(CoreError::Dimension(format!(
                "image has {} pixels, expected {IMAGE_LEN}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CoreError::Dimension("pixel outside [0,1]".into()));
        }
        Ok(Image { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * CANVAS_SIDE + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }
}

/// How the translation std-dev is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaUnits {
    /// Pixels at the upsampled (10x) resolution; the default, since the
    /// translation step happens after upsampling.
    Upsampled,
    /// Pixels at the base 28x28 resolution.
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Mean of the exponential intensity dip (one draw per image).
    pub mu: f64,
    /// Std-dev of the rotation angle, radians.
    pub rho: f64,
    /// Std-dev of the translation, in `sigma_units` pixels.
    pub sigma: f64,
    pub upsample_factor: u32,
    pub sigma_units: SigmaUnits,
}

impl NoiseParams {
    pub fn new(mu: f64, rho: f64, sigma: f64) -> Self {
        NoiseParams {
            mu,
            rho,
            sigma,
            upsample_factor: 10,
            sigma_units: SigmaUnits::Upsampled,
        }
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// The three standard noise conditions.
    pub fn level(level: u8) -> Option<Self> {
        match level {
            1 => Some(Self::new(0.03, 0.05, 4.0)),
            2 => Some(Self::new(0.1, 0.1, 5.0)),
            3 => Some(Self::new(0.1, 0.25, 8.0)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.mu < 0.0 || self.rho < 0.0 || self.sigma < 0.0 || self.upsample_factor == 0 {
            return Err(CoreError::InvalidConfig(format!(
                "bad noise params: {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn render_base_glyph(id: GlyphId, layout: &SegmentLayout) -> Image {
    let mut pixels = vec![0.0f32; IMAGE_LEN];
    for (k, rect) in layout.segments.iter().enumerate() {
        if id.segment_lit(k) {
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    pixels[y * CANVAS_SIDE + x] = 1.0;
                }
            }
        }
    }
    Image { pixels }
}

/// Bilinear sample with zero fill outside the grid.
fn bilinear(src: &[f64], side: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fetch = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= side as i64 || yi >= side as i64 {
            0.0
        } else {
            src[yi as usize * side + xi as usize]
        }
    };
    let x0 = x0 as i64;
    let y0 = y0 as i64;
    let v00 = fetch(x0, y0);
    let v10 = fetch(x0 + 1, y0);
    let v01 = fetch(x0, y0 + 1);
    let v11 = fetch(x0 + 1, y0 + 1);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}

/// Apply the variant pipeline: upsample, intensity dip, rotate, translate,
/// downsample. Pure in the base image; consumes draws from `rng`.
pub fn make_variant<R: Rng + ?Sized>(base: &Image, params: &NoiseParams, rng: &mut R) -> Image {
    let f = params.upsample_factor as usize;
    let side = CANVAS_SIDE * f;

    // Draw the noise up front so the pipeline below is deterministic in it.
    let eps = if params.mu > 0.0 {
        Exp::new(1.0 / params.mu).expect("mu > 0").sample(rng)
    } else {
        0.0
    };
    let theta = if params.rho > 0.0 {
        Normal::new(0.0, params.rho).expect("rho > 0").sample(rng)
    } else {
        0.0
    };
    let sigma_px = match params.sigma_units {
        SigmaUnits::Upsampled => params.sigma,
        SigmaUnits::Base => params.sigma * f as f64,
    };
    let (dx, dy) = if params.sigma > 0.0 {
        let n = Normal::new(0.0, sigma_px).expect("sigma > 0");
        (n.sample(rng), n.sample(rng))
    } else {
        (0.0, 0.0)
    };

    // 1. upsample by pixel replication, 2. intensity: lit pixels -> 1 - eps.
    let lit_value = (1.0 - eps).max(0.0);
    let mut buf = vec![0.0f64; side * side];
    for y in 0..CANVAS_SIDE {
        for x in 0..CANVAS_SIDE {
            let p = base.get(x, y) as f64;
            let v = if p > 0.0 { lit_value * p } else { 0.0 };
            if v != 0.0 {
                for sy in 0..f {
                    let row = (y * f + sy) * side + x * f;
                    buf[row..row + f].fill(v);
                }
            }
        }
    }

    // 3. rotate about the canvas centre.
    if theta != 0.0 {
        let c = (side as f64 - 1.0) / 2.0;
        let (sin, cos) = theta.sin_cos();
        let mut out = vec![0.0f64; side * side];
        for y in 0..side {
            let ry = y as f64 - c;
            for x in 0..side {
                let rx = x as f64 - c;
                let sx = cos * rx + sin * ry + c;
                let sy = -sin * rx + cos * ry + c;
                out[y * side + x] = bilinear(&buf, side, sx, sy);
            }
        }
        buf = out;
    }

    // 4. translate.
    if dx != 0.0 || dy != 0.0 {
        let mut out = vec![0.0f64; side * side];
        for y in 0..side {
            for x in 0..side {
                out[y * side + x] = bilinear(&buf, side, x as f64 - dx, y as f64 - dy);
            }
        }
        buf = out;
    }

    // 5. downsample by block mean.
    let inv = 1.0 / (f * f) as f64;
    let mut pixels = vec![0.0f32; IMAGE_LEN];
    for y in 0..CANVAS_SIDE {
        for x in 0..CANVAS_SIDE {
            let mut sum = 0.0;
            for sy in 0..f {
                let row = (y * f + sy) * side + x * f;
                for v in &buf[row..row + f] {
                    sum += v;
                }
            }
            pixels[y * CANVAS_SIDE + x] = (sum * inv).clamp(0.0, 1.0) as f32;
        }
    }
    Image { pixels }
}

/// The full corpus: 128 base glyphs and `variants_per_glyph` noisy variants
/// of each, plus everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub base: Vec<Image>,
    pub variants: Vec<Vec<Image>>,
    pub params: NoiseParams,
    pub seed: u64,
}

impl Dataset {
    pub fn variants_per_glyph(&self) -> usize {
        self.variants[0].len()
    }

    pub fn base_image(&self, id: GlyphId) -> &Image {
        &self.base[id.index()]
    }

    pub fn variants_of(&self, id: GlyphId) -> &[Image] {
        &self.variants[id.index()]
    }

    pub fn total_variants(&self) -> usize {
        self.variants.iter().map(Vec::len).sum()
    }
}

/// Deterministic function of all of its arguments; each glyph gets its own
/// derived stream so the corpus does not depend on generation order.
pub fn generate_dataset(
    layout: &SegmentLayout,
    params: &NoiseParams,
    variants_per_glyph: usize,
    seed: u64,
) -> Result<Dataset, CoreError> {
    layout.validate()?;
    params.validate()?;
    if variants_per_glyph == 0 {
        return Err(CoreError::InvalidConfig(
            "variants_per_glyph must be >= 1".into(),
        ));
    }
    let key = StreamKey::from_seed(seed);
    let mut base = Vec::with_capacity(GLYPH_COUNT);
    let mut variants = Vec::with_capacity(GLYPH_COUNT);
    for id in GlyphId::all() {
        let img = render_base_glyph(id, layout);
        let mut rng = key.child(id.id() as u64).rng();
        let vs: Vec<Image> = (0..variants_per_glyph)
            .map(|_| make_variant(&img, params, &mut rng))
            .collect();
        base.push(img);
        variants.push(vs);
    }
    Ok(Dataset {
        base,
        variants,
        params: *params,
        seed,
    })
}

const DATASET_MAGIC: &[u8; 4] = b"SGDS";
const DATASET_VERSION: u32 = 1;

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), CoreError> {
    let v = ds.variants_per_glyph() as u32;
    let mut buf: Vec<u8> =
        Vec::with_capacity(64 + (GLYPH_COUNT + ds.total_variants()) * IMAGE_LEN * 4);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&ds.params.mu.to_le_bytes());
    buf.extend_from_slice(&ds.params.rho.to_le_bytes());
    buf.extend_from_slice(&ds.params.sigma.to_le_bytes());
    buf.extend_from_slice(&ds.params.upsample_factor.to_le_bytes());
    buf.push(match ds.params.sigma_units {
        SigmaUnits::Upsampled => 0,
        SigmaUnits::Base => 1,
    });
    buf.extend_from_slice(&ds.seed.to_le_bytes());
    buf.extend_from_slice(&v.to_le_bytes());
    for img in &ds.base {
        for p in img.pixels() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
    }
    for vs in &ds.variants {
        for img in vs {
            for p in img.pixels() {
                buf.extend_from_slice(&p.to_le_bytes());
            }
        }
    }
    let mut h = Fnv64::new();
    h.update(&buf);
    buf.extend_from_slice(&h.finish().to_le_bytes());
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        if self.pos + n > self.data.len() {
            return Err(CoreError::Format("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CoreError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8, CoreError> {
        Ok(self.take(1)?[0])
    }
    fn image(&mut self) -> Result<Image, CoreError> {
        let raw = self.take(IMAGE_LEN * 4)?;
        let pixels = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Image { pixels })
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CoreError> {
    let data = fs::read(path)?;
    if data.len() < 8 {
        return Err(CoreError::Format("truncated file".into()));
    }
    let (body, tail) = data.split_at(data.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let mut h = Fnv64::new();
    h.update(body);
    if h.finish() != stored {
        return Err(CoreError::Checksum);
    }
    let mut cur = Cursor { data: body, pos: 0 };
    if cur.take(4)? != DATASET_MAGIC {
        return Err(CoreError::Format("not a glyph dataset file".into()));
    }
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(CoreError::Version {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let mu = cur.f64()?;
    let rho = cur.f64()?;
    let sigma = cur.f64()?;
    let upsample_factor = cur.u32()?;
    let sigma_units = match cur.u8()? {
        0 => SigmaUnits::Upsampled,
        1 => SigmaUnits::Base,
        n => return Err(CoreError::Format(format!("bad sigma_units byte {n}"))),
    };
    let seed = cur.u64()?;
    let v = cur.u32()? as usize;
    let mut base = Vec::with_capacity(GLYPH_COUNT);
    for _ in 0..GLYPH_COUNT {
        base.push(cur.image()?);
    }
    let mut variants = Vec::with_capacity(GLYPH_COUNT);
    for _ in 0..GLYPH_COUNT {
        let vs: Result<Vec<_>, _> = (0..v).map(|_| cur.image()).collect();
        variants.push(vs?);
    }
    if cur.pos != body.len() {
        return Err(CoreError::Format("trailing bytes".into()));
    }
    Ok(Dataset {
        base,
        variants,
        params: NoiseParams {
            mu,
            rho,
            sigma,
            upsample_factor,
            sigma_units,
        },
        seed,
    })
}

/// Binary PGM export for eyeballing individual images.
pub fn write_pgm(img: &Image, path: &Path) -> Result<(), CoreError> {
    let mut out = format!("P5\n{CANVAS_SIDE} {CANVAS_SIDE}\n255\n").into_bytes();
    out.extend(
        img.pixels()
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_glyph_is_all_zero() {
        let img = render_base_glyph(GlyphId::new(0).unwrap(), &SegmentLayout::default());
        assert!(img.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn one_hot_glyph_equals_segment_mask() {
        let layout = SegmentLayout::default();
        let img = render_base_glyph(GlyphId::new(1).unwrap(), &layout);
        let mask = layout.segment_mask(0);
        for (p, m) in img.pixels().iter().zip(&mask) {
            assert_eq!(*p == 1.0, *m);
        }
    }

    #[test]
    fn full_glyph_matches_union_of_masks() {
        // Independent route: union the per-segment masks directly.
        let layout = SegmentLayout::default();
        let mut union = vec![false; IMAGE_LEN];
        for k in 0..7 {
            for (u, m) in union.iter_mut().zip(layout.segment_mask(k)) {
                *u |= m;
            }
        }
        let img = render_base_glyph(GlyphId::new(127).unwrap(), &layout);
        let lit = img.pixels().iter().filter(|&&p| p == 1.0).count();
        assert_eq!(lit, union.iter().filter(|&&m| m).count());
        for (p, u) in img.pixels().iter().zip(&union) {
            assert_eq!(*p == 1.0, *u);
        }
    }

    #[test]
    fn all_base_glyphs_distinct() {
        let layout = SegmentLayout::default();
        let imgs: Vec<_> = GlyphId::all()
            .map(|id| render_base_glyph(id, &layout))
            .collect();
        for i in 0..imgs.len() {
            for j in i + 1..imgs.len() {
                assert_ne!(imgs[i], imgs[j], "glyphs {i} and {j} render identically");
            }
        }
    }

    #[test]
    fn zero_noise_identity() {
        let layout = SegmentLayout::default();
        let mut rng = StreamKey::from_seed(1).rng();
        for id in GlyphId::all() {
            let base = render_base_glyph(id, &layout);
            let v = make_variant(&base, &NoiseParams::none(), &mut rng);
            assert_eq!(v, base, "glyph {} not reproduced", id.id());
        }
    }

    #[test]
    fn intensity_only_scales_lit_pixels() {
        let layout = SegmentLayout::default();
        let base = render_base_glyph(GlyphId::new(73).unwrap(), &layout);
        let params = NoiseParams::new(0.1, 0.0, 0.0);
        let mut rng = StreamKey::from_seed(3).rng();
        let v = make_variant(&base, &params, &mut rng);
        // All lit pixels share one scale factor; background stays zero.
        let scale: Vec<f32> = base
            .pixels()
            .iter()
            .zip(v.pixels())
            .filter(|(b, _)| **b == 1.0)
            .map(|(_, v)| *v)
            .collect();
        assert!(!scale.is_empty());
        assert!(scale.windows(2).all(|w| w[0] == w[1]));
        assert!(scale[0] < 1.0 && scale[0] >= 0.0);
        for (b, v) in base.pixels().iter().zip(v.pixels()) {
            if *b == 0.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn noise1_variant_stays_close_but_differs() {
        let layout = SegmentLayout::default();
        let base = render_base_glyph(GlyphId::new(5).unwrap(), &layout);
        let params = NoiseParams::level(1).unwrap();
        let mut rng = StreamKey::from_seed(7).rng();
        let v = make_variant(&base, &params, &mut rng);
        let linf = base
            .pixels()
            .iter()
            .zip(v.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        let mean_abs = base
            .pixels()
            .iter()
            .zip(v.pixels())
            .map(|(a, b)| (a - b).abs())
            .sum::<f32>()
            / IMAGE_LEN as f32;
        assert!(linf > 0.0);
        assert!(mean_abs < 0.5, "mean abs change {mean_abs}");
    }

    #[test]
    fn lit_mass_non_increasing_without_geometry() {
        let layout = SegmentLayout::default();
        let base = render_base_glyph(GlyphId::new(127).unwrap(), &layout);
        let params = NoiseParams::new(0.3, 0.0, 0.0);
        let mut rng = StreamKey::from_seed(11).rng();
        for _ in 0..20 {
            let v = make_variant(&base, &params, &mut rng);
            let sum_v: f32 = v.pixels().iter().sum();
            let sum_b: f32 = base.pixels().iter().sum();
            assert!(sum_v <= sum_b + 1e-5);
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let layout = SegmentLayout::default();
        let params = NoiseParams::level(1).unwrap();
        let a = generate_dataset(&layout, &params, 2, 7).unwrap();
        let b = generate_dataset(&layout, &params, 2, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&layout, &params, 2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_zero_noise_variants_equal_base() {
        let ds = generate_dataset(&SegmentLayout::default(), &NoiseParams::none(), 1, 0).unwrap();
        for id in GlyphId::all() {
            assert_eq!(ds.variants_of(id)[0], *ds.base_image(id));
        }
    }

    #[test]
    fn dataset_counts() {
        let ds = generate_dataset(&SegmentLayout::default(), &NoiseParams::none(), 3, 1).unwrap();
        assert_eq!(ds.base.len(), 128);
        assert_eq!(ds.total_variants(), 128 * 3);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = generate_dataset(
            &SegmentLayout::default(),
            &NoiseParams::level(2).unwrap(),
            2,
            42,
        )
        .unwrap();
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = generate_dataset(&SegmentLayout::default(), &NoiseParams::none(), 1, 0).unwrap();
        save_dataset(&ds, &path).unwrap();
        let data = fs::read(&path).unwrap();
        fs::write(&path, &data[..data.len() / 2]).unwrap();
        match load_dataset(&path) {
            Err(CoreError::Checksum) | Err(CoreError::Format(_)) => {}
            other => panic!("expected format/checksum error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = generate_dataset(&SegmentLayout::default(), &NoiseParams::none(), 1, 0).unwrap();
        save_dataset(&ds, &path).unwrap();
        let mut data = fs::read(&path).unwrap();
        data[..4].copy_from_slice(b"XXXX");
        // Re-seal the checksum so the magic check itself is exercised.
        let body_len = data.len() - 8;
        let mut h = Fnv64::new();
        h.update(&data[..body_len]);
        let sum = h.finish().to_le_bytes();
        data[body_len..].copy_from_slice(&sum);
        fs::write(&path, data).unwrap();
        match load_dataset(&path) {
            Err(CoreError::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = generate_dataset(&SegmentLayout::default(), &NoiseParams::none(), 1, 0).unwrap();
        save_dataset(&ds, &path).unwrap();
        let mut data = fs::read(&path).unwrap();
        let mid = data.len() / 2;
        data[mid] ^= 0xff;
        fs::write(&path, data).unwrap();
        assert!(matches!(load_dataset(&path), Err(CoreError::Checksum)));
    }
}
