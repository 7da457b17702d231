//! Generated leaf scenes with planted lesions.
//!
//! A scene is a grey, slightly noisy background with one rotated elliptical
//! leaf. Diseased scenes carry one to three circular lesions placed well
//! inside the leaf. The lesion mask is kept alongside the image so tests can
//! score detections against exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgcore::PixelImage;

pub const HEALTHY: &str = "healthy";
pub const LATE_BLIGHT: &str = "late_blight";
pub const EARLY_BLIGHT: &str = "early_blight";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LesionKind {
    LateBlight,
    EarlyBlight,
}

impl LesionKind {
    pub fn label(self) -> &'static str {
        match self {
            LesionKind::LateBlight => LATE_BLIGHT,
            LesionKind::EarlyBlight => EARLY_BLIGHT,
        }
    }

    fn base_color(self) -> ([i32; 3], i32) {
        match self {
            // h ≈ 22°, v ≈ 0.27
            LesionKind::LateBlight => ([70, 32, 10], 3),
            // h ≈ 37°, v ≈ 0.67
            LesionKind::EarlyBlight => ([170, 120, 40], 5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lesion {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub kind: LesionKind,
}

impl Lesion {
    fn covers(&self, x: u32, y: u32) -> bool {
        let dx = x as f64 + 0.5 - self.cx;
        let dy = y as f64 + 0.5 - self.cy;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leaf {
    pub cx: f64,
    pub cy: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
}

impl Leaf {
    /// Normalized elliptical radius of the pixel centre; `<= 1` is inside.
    fn radius_at(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        ((u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2)).sqrt()
    }

    fn covers(&self, x: u32, y: u32) -> bool {
        self.radius_at(x as f64 + 0.5, y as f64 + 0.5) <= 1.0
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.semi_major * self.semi_minor
    }
}

/// Knobs for [`generate_scene`]. Lengths are fractions of the shorter side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub semi_axis: (f64, f64),
    pub lesion_fraction: (f64, f64),
    pub lesion_radius: (f64, f64),
    pub lesion_margin: f64,
    pub max_lesions: u32,
}

impl SceneParams {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            semi_axis: (0.21, 0.35),
            lesion_fraction: (0.10, 0.16),
            lesion_radius: (0.03, 0.12),
            lesion_margin: 0.025,
            max_lesions: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub image: PixelImage,
    pub label: String,
    pub leaf: Leaf,
    pub lesions: Vec<Lesion>,
    /// Row-major, true where a lesion was painted.
    pub lesion_mask: Vec<bool>,
    pub leaf_pixels: u64,
}

impl SyntheticScene {
    pub fn lesion_pixels(&self) -> u64 {
        self.lesion_mask.iter().filter(|&&m| m).count() as u64
    }

    pub fn is_lesion(&self, x: u32, y: u32) -> bool {
        self.lesion_mask[y as usize * self.image.width() as usize + x as usize]
    }

    /// Leaf area (lesions included) over frame area.
    pub fn leaf_fraction(&self) -> f64 {
        self.leaf_pixels as f64 / (self.image.width() as f64 * self.image.height() as f64)
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: [i32; 3], amp: i32) -> [u8; 3] {
    let mut out = [0u8; 3];
    for (o, b) in out.iter_mut().zip(base) {
        *o = (b + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8;
    }
    out
}

pub fn generate_scene(params: &SceneParams, disease: Option<LesionKind>, rng: &mut ChaCha8Rng) -> SyntheticScene {
    let (w, h) = (params.width, params.height);
    let unit = w.min(h) as f64;

    let a = rng.gen_range(params.semi_axis.0..=params.semi_axis.1) * unit;
    let b = rng.gen_range(params.semi_axis.0..=params.semi_axis.1) * unit;
    let (semi_major, semi_minor) = if a >= b { (a, b) } else { (b, a) };
    let reach = semi_major + 2.0;
    let cx = rng.gen_range(reach.min(w as f64 / 2.0)..=(w as f64 - reach).max(w as f64 / 2.0));
    let cy = rng.gen_range(reach.min(h as f64 / 2.0)..=(h as f64 - reach).max(h as f64 / 2.0));
    let leaf = Leaf {
        cx,
        cy,
        semi_major,
        semi_minor,
        angle: rng.gen_range(0.0..std::f64::consts::PI),
    };

    let lesions = match disease {
        Some(kind) => place_lesions(params, &leaf, kind, rng),
        None => Vec::new(),
    };

    let background = rng.gen_range(100..=160);
    // hue stays within 108..116°
    let leaf_base = [
        rng.gen_range(52..=58),
        rng.gen_range(135..=150),
        rng.gen_range(40..=46),
    ];
    let mut image = PixelImage::filled(w, h, [0, 0, 0]);
    let mut lesion_mask = vec![false; w as usize * h as usize];
    let mut leaf_pixels = 0;
    for y in 0..h {
        for x in 0..w {
            let px = if let Some(l) = lesions.iter().find(|l| l.covers(x, y)) {
                lesion_mask[y as usize * w as usize + x as usize] = true;
                leaf_pixels += 1;
                let (base, amp) = l.kind.base_color();
                jitter(rng, base, amp)
            } else if leaf.covers(x, y) {
                leaf_pixels += 1;
                jitter(rng, leaf_base, 6)
            } else {
                let g = background + rng.gen_range(-8..=8);
                let tint = rng.gen_range(-2..=2);
                jitter(rng, [g, g + tint, g - tint], 0)
            };
            image.set(x, y, px);
        }
    }
    SyntheticScene {
        image,
        label: disease.map_or(HEALTHY, LesionKind::label).to_string(),
        leaf,
        lesions,
        lesion_mask,
        leaf_pixels,
    }
}

/// Tries the drawn lesion count at full size first, then fewer and larger
/// lesions, so the painted area stays near the drawn fraction. Only a single
/// lesion that fits nowhere is shrunk.
fn place_lesions(params: &SceneParams, leaf: &Leaf, kind: LesionKind, rng: &mut ChaCha8Rng) -> Vec<Lesion> {
    const ATTEMPTS: u32 = 400;
    let unit = params.width.min(params.height) as f64;
    let drawn = rng.gen_range(1..=params.max_lesions.max(1));
    let target = rng.gen_range(params.lesion_fraction.0..=params.lesion_fraction.1) * leaf.area();
    let margin = params.lesion_margin * unit;
    let (r_min, r_max) = (params.lesion_radius.0 * unit, params.lesion_radius.1 * unit);
    let sample = |rng: &mut ChaCha8Rng, radius: f64| {
        let px = leaf.cx + rng.gen_range(-1.0..1.0) * leaf.semi_major;
        let py = leaf.cy + rng.gen_range(-1.0..1.0) * leaf.semi_major;
        fits_inside(leaf, px, py, radius + margin).then_some(Lesion {
                cx: px,
                cy: py,
                radius,
                kind,
            })
    };
    for count in (1..=drawn).rev() {
        let radius = (target / (count as f64 * std::f64::consts::PI)).sqrt().clamp(r_min, r_max);
        let mut placed: Vec<Lesion> = Vec::new();
        for _ in 0..ATTEMPTS {
            if placed.len() as u32 == count {
                break;
            }
            if let Some(l) = sample(rng, radius) {
                let apart = placed
                    .iter()
                    .all(|o| (o.cx - l.cx).hypot(o.cy - l.cy) > o.radius + l.radius + 1.0);
                if apart {
                    placed.push(l);
                }
            }
        }
        if placed.len() as u32 == count {
            return placed;
        }
    }
    let mut radius = r_max.min((target / std::f64::consts::PI).sqrt());
    while radius >= 2.0 {
        for _ in 0..ATTEMPTS {
            if let Some(l) = sample(rng, radius) {
                return vec![l];
            }
        }
        radius *= 0.85;
    }
    Vec::new()
}

/// Every sampled point of the disc of radius `r` around `(x, y)` is inside the leaf.
fn fits_inside(leaf: &Leaf, x: f64, y: f64, r: f64) -> bool {
    if leaf.radius_at(x, y) > 1.0 {
        return false;
    }
    (0..32).all(|k| {
        let t = k as f64 * std::f64::consts::TAU / 32.0;
        leaf.radius_at(x + r * t.cos(), y + r * t.sin()) <= 1.0
    })
}

/// Deterministic suite: scenes alternate late blight, early blight and
/// (when `with_healthy`) healthy.
pub fn scene_suite(params: &SceneParams, count: usize, seed: u64, with_healthy: bool) -> Vec<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycle: &[Option<LesionKind>] = if with_healthy {
        &[Some(LesionKind::LateBlight), Some(LesionKind::EarlyBlight), None]
    } else {
        &[Some(LesionKind::LateBlight), Some(LesionKind::EarlyBlight)]
    };
    (0..count)
        .map(|i| generate_scene(params, cycle[i % cycle.len()], &mut rng))
        .collect()
}

/// Training patches used by [`crate::BaselineModel::builtin`].
pub fn builtin_training_set() -> Vec<(PixelImage, String)> {
    let params = SceneParams::new(128, 128);
    scene_suite(&params, 60, 0x5EED_1EAF, true)
        .into_iter()
        .map(|s| (s.image, s.label))
        .collect()
}
