//! Synthetic stick-figure scenes with exact ground truth.
//!
//! Bodies are drawn as flat-shaded capsules over a textured background. Every
//! pixel is a multiple of 1/255, so scenes survive a PNG round trip unchanged.
//! Limb, background and clutter intensities come from disjoint ranges.
//!
//! Scene `i` draws its body from stream `i` of the seed, before anything that
//! depends on the family, so scene `i` of every person family shares one body.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::graph::{kp, NUM_KEYPOINTS};
use crate::io::annotations::PersonRecord;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseFamily {
    Upright,
    /// The upright body turned about its torso center.
    Rotated,
    /// Knees together, ankles swapped across the midline.
    LegsCrossed,
    /// One forearm folded across the torso.
    ArmOccluding,
    /// Clutter only, no person.
    Negative,
}

impl PoseFamily {
    pub fn tag(self) -> &'static str {
        match self {
            PoseFamily::Upright => "upright",
            PoseFamily::Rotated => "rotated",
            PoseFamily::LegsCrossed => "legs-crossed",
            PoseFamily::ArmOccluding => "arm-occluding",
            PoseFamily::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            PoseFamily::Upright,
            PoseFamily::Rotated,
            PoseFamily::LegsCrossed,
            PoseFamily::ArmOccluding,
            PoseFamily::Negative,
        ]
        .into_iter()
        .find(|f| f.tag() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub family: PoseFamily,
    /// Number of clutter strokes per scene.
    pub clutter: usize,
    pub seed: u64,
    /// Index of the first scene; scenes are numbered from here.
    pub first: usize,
    pub width: usize,
    pub height: usize,
    /// Mean torso diameter in pixels.
    pub torso: f64,
    /// Fixed turn for the rotated family; drawn uniformly when `None`.
    pub angle: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 20,
            family: PoseFamily::Upright,
            clutter: 6,
            seed: 0,
            first: 0,
            width: 128,
            height: 128,
            torso: 32.0,
            angle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub raster: Raster,
    /// `None` for negatives.
    pub person: Option<PersonRecord>,
    pub family: PoseFamily,
    pub index: usize,
}

impl SyntheticScene {
    pub fn file_name(&self) -> String {
        format!("{}_{:04}.png", self.family.tag(), self.index)
    }
}

/// Limb segments as keypoint pairs, in drawing order.
pub const LIMBS: [(usize, usize); 11] = [
    (kp::L_HIP, kp::L_KNEE),
    (kp::L_KNEE, kp::L_ANKLE),
    (kp::R_HIP, kp::R_KNEE),
    (kp::R_KNEE, kp::R_ANKLE),
    (kp::NECK, kp::HEAD),
    (kp::L_SHOULDER, kp::L_ELBOW),
    (kp::L_ELBOW, kp::L_WRIST),
    (kp::R_SHOULDER, kp::R_ELBOW),
    (kp::R_ELBOW, kp::R_WRIST),
    (kp::L_SHOULDER, kp::R_SHOULDER),
    (kp::L_HIP, kp::R_HIP),
];

/// Intensities used for the body, in units of 1/255.
pub const BODY_LEVELS: [u8; 7] = [20, 40, 64, 190, 215, 235, 250];
const BACKGROUND: (u8, u8) = (112, 144);
const CLUTTER: (u8, u8) = (80, 176);

fn q(level: u8) -> f64 {
    level as f64 / 255.0
}

/// Whether `v` is one of the body intensities.
pub fn is_body_value(v: f64) -> bool {
    BODY_LEVELS.iter().any(|&l| q(l) == v)
}

struct Body {
    keypoints: [Point; NUM_KEYPOINTS],
    /// Limb half-width per unit torso.
    scale: f64,
}

/// Upright body around the origin (y down), torso diameter about `torso`.
fn draw_body<R: Rng>(rng: &mut R, torso: f64) -> Body {
    let s = torso / 32.2 * rng.gen_range(0.92..1.06);
    let j = |rng: &mut R| rng.gen_range(-1.0..1.0) * s;
    let mut k = [Point::default(); NUM_KEYPOINTS];
    k[kp::NECK] = Point::new(j(rng), -16.0 * s + j(rng));
    k[kp::HEAD] = k[kp::NECK].add(Point::new(j(rng), -14.0 * s));
    k[kp::L_SHOULDER] = Point::new(11.0 * s + j(rng), -13.0 * s + j(rng));
    k[kp::R_SHOULDER] = Point::new(-11.0 * s + j(rng), -13.0 * s + j(rng));
    k[kp::L_HIP] = Point::new(8.0 * s + j(rng), 13.0 * s + j(rng));
    k[kp::R_HIP] = Point::new(-8.0 * s + j(rng), 13.0 * s + j(rng));
    // angles from straight down, positive away from the body
    let limb = |rng: &mut R, from: Point, side: f64, a_lo: f64, a_hi: f64, bend_hi: f64, l1: f64, l2: f64| {
        let a = rng.gen_range(a_lo..a_hi).to_radians();
        let bend = rng.gen_range(0.0..bend_hi).to_radians();
        let d1 = Point::new(side * a.sin(), a.cos());
        let mid = from.add(d1.scale(l1 * s));
        let b = a + bend;
        let d2 = Point::new(side * b.sin(), b.cos());
        (mid, mid.add(d2.scale(l2 * s)))
    };
    let (le, lw) = limb(rng, k[kp::L_SHOULDER], 1.0, -20.0, 110.0, 110.0, 15.0, 14.0);
    let (re, rw) = limb(rng, k[kp::R_SHOULDER], -1.0, -20.0, 110.0, 110.0, 15.0, 14.0);
    let (lk, la) = limb(rng, k[kp::L_HIP], 1.0, -8.0, 25.0, 30.0, 20.0, 19.0);
    let (rk, ra) = limb(rng, k[kp::R_HIP], -1.0, -8.0, 25.0, 30.0, 20.0, 19.0);
    k[kp::L_ELBOW] = le;
    k[kp::L_WRIST] = lw;
    k[kp::R_ELBOW] = re;
    k[kp::R_WRIST] = rw;
    k[kp::L_KNEE] = lk;
    k[kp::L_ANKLE] = la;
    k[kp::R_KNEE] = rk;
    k[kp::R_ANKLE] = ra;
    Body { keypoints: k, scale: s }
}

/// Mean of the shoulders and hips.
pub fn torso_center(k: &[Point]) -> Point {
    let idx = [kp::L_SHOULDER, kp::R_SHOULDER, kp::L_HIP, kp::R_HIP];
    let sum = idx.iter().fold(Point::default(), |a, &i| a.add(k[i]));
    sum.scale(0.25)
}

fn paint_capsule(r: &mut Raster, a: Point, b: Point, half: f64, value: f64) {
    let (w, h) = (r.width() as f64, r.height() as f64);
    let x0 = (a.x.min(b.x) - half).floor().max(0.0) as usize;
    let x1 = (a.x.max(b.x) + half).ceil().min(w - 1.0).max(0.0) as usize;
    let y0 = (a.y.min(b.y) - half).floor().max(0.0) as usize;
    let y1 = (a.y.max(b.y) + half).ceil().min(h - 1.0).max(0.0) as usize;
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = Point::new(x as f64, y as f64);
            let ap = p.sub(a);
            let t = if len2 > 0.0 { ((ap.x * ab.x + ap.y * ab.y) / len2).clamp(0.0, 1.0) } else { 0.0 };
            if p.distance(a.add(ab.scale(t))) <= half {
                r.set(x, y, 0, value);
            }
        }
    }
}

fn paint_quad(r: &mut Raster, quad: [Point; 4], value: f64) {
    for y in 0..r.height() {
        for x in 0..r.width() {
            let p = Point::new(x as f64, y as f64);
            let mut sign = 0.0;
            let mut inside = true;
            for i in 0..4 {
                let (a, b) = (quad[i], quad[(i + 1) % 4]);
                let c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                if c != 0.0 {
                    if sign == 0.0 {
                        sign = c.signum();
                    } else if c.signum() != sign {
                        inside = false;
                        break;
                    }
                }
            }
            if inside {
                r.set(x, y, 0, value);
            }
        }
    }
}

fn background<R: Rng>(rng: &mut R, w: usize, h: usize, clutter: usize) -> Raster {
    let fx = rng.gen_range(0.02..0.08);
    let fy = rng.gen_range(0.02..0.08);
    let ph = rng.gen_range(0.0..2.0 * PI);
    let span = (BACKGROUND.1 - BACKGROUND.0) as f64 / 2.0;
    let mid = (BACKGROUND.0 as f64 + BACKGROUND.1 as f64) / 2.0;
    let mut r = Raster::from_fn(w, h, |x, y| {
        let v = mid + span * ((x as f64 * fx + ph).sin() * (y as f64 * fy).cos());
        q(v.round().clamp(BACKGROUND.0 as f64, BACKGROUND.1 as f64) as u8)
    });
    for _ in 0..clutter {
        let a = Point::new(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        let len = rng.gen_range(6.0..30.0);
        let ang = rng.gen_range(0.0..2.0 * PI);
        let b = a.add(Point::new(ang.cos(), ang.sin()).scale(len));
        let half = rng.gen_range(1.0..3.5);
        let v = q(rng.gen_range(CLUTTER.0..=CLUTTER.1));
        paint_capsule(&mut r, a, b, half, v);
    }
    r
}

fn render_body(r: &mut Raster, k: &[Point], s: f64) {
    let torso = [k[kp::L_SHOULDER], k[kp::L_HIP], k[kp::R_HIP], k[kp::R_SHOULDER]];
    paint_quad(r, torso, q(BODY_LEVELS[4]));
    let half = |u: f64| (u * s).max(1.6);
    for (i, &(a, b)) in LIMBS.iter().enumerate() {
        let (hw, level) = match i {
            0 | 2 => (half(3.2), BODY_LEVELS[1]),
            1 | 3 => (half(2.6), BODY_LEVELS[0]),
            4 => (half(2.4), BODY_LEVELS[5]),
            5 | 7 => (half(2.4), BODY_LEVELS[2]),
            6 | 8 => (half(2.0), BODY_LEVELS[3]),
            _ => (half(1.6), BODY_LEVELS[4]),
        };
        paint_capsule(r, k[a], k[b], hw, q(level));
    }
    paint_capsule(r, k[kp::HEAD], k[kp::HEAD], half(6.0), q(BODY_LEVELS[6]));
}

fn scene<R: Rng>(rng: &mut R, cfg: &SynthConfig, index: usize) -> SyntheticScene {
    let (w, h) = (cfg.width, cfg.height);
    let body = draw_body(rng, cfg.torso);
    let center = Point::new(
        w as f64 / 2.0 + rng.gen_range(-3.0..3.0),
        h as f64 / 2.0 + rng.gen_range(-3.0..3.0),
    );
    let tilt = rng.gen_range(-10.0f64..10.0).to_radians();
    let mut k: Vec<Point> = body.keypoints.iter().map(|p| p.rotate(tilt).add(center)).collect();
    match cfg.family {
        PoseFamily::Rotated => {
            let a = match cfg.angle {
                Some(a) => a,
                None => rng.gen_range(-PI..PI),
            };
            let c = torso_center(&k);
            k = k.iter().map(|p| p.rotate_about(c, a)).collect();
        }
        PoseFamily::LegsCrossed => {
            let mid = k[kp::L_HIP].midpoint(k[kp::R_HIP]);
            let down = k[kp::L_HIP].sub(k[kp::L_SHOULDER]).midpoint(k[kp::R_HIP].sub(k[kp::R_SHOULDER]));
            let u = down.scale(1.0 / down.norm());
            let (l1, l2) = (20.0 * body.scale, 19.0 * body.scale);
            let side = Point::new(-u.y, u.x);
            let cross = rng.gen_range(3.0..7.0) * body.scale;
            k[kp::L_KNEE] = mid.add(u.scale(l1)).add(side.scale(-0.15 * cross));
            k[kp::R_KNEE] = mid.add(u.scale(l1)).add(side.scale(0.15 * cross));
            k[kp::L_ANKLE] = k[kp::L_KNEE].add(u.scale(l2)).add(side.scale(-cross));
            k[kp::R_ANKLE] = k[kp::R_KNEE].add(u.scale(l2)).add(side.scale(cross));
        }
        PoseFamily::ArmOccluding => {
            let target = k[kp::R_SHOULDER].midpoint(k[kp::R_HIP]);
            let t = rng.gen_range(0.3..0.7);
            let e = k[kp::L_SHOULDER].midpoint(k[kp::L_HIP]);
            k[kp::L_ELBOW] = k[kp::L_SHOULDER].add(e.sub(k[kp::L_SHOULDER]).scale(0.9));
            k[kp::L_WRIST] = k[kp::L_ELBOW].add(target.sub(k[kp::L_ELBOW]).scale(0.6 + t * 0.4));
        }
        PoseFamily::Upright | PoseFamily::Negative => {}
    }
    let mut raster = background(rng, w, h, cfg.clutter);
    let person = if cfg.family == PoseFamily::Negative {
        None
    } else {
        render_body(&mut raster, &k, body.scale);
        let file = format!("{}_{:04}.png", cfg.family.tag(), index);
        Some(PersonRecord {
            image: format!("images/{file}"),
            width: Some(w as u32),
            height: Some(h as u32),
            keypoints: k.iter().map(|p| (p.x, p.y, true)).collect(),
            categories: vec![cfg.family.tag().to_string()],
        })
    };
    SyntheticScene {
        raster,
        person,
        family: cfg.family,
        index,
    }
}

/// `cfg.n` scenes, numbered from `cfg.first`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Vec<SyntheticScene> {
    (cfg.first..cfg.first + cfg.n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            scene(&mut rng, cfg, i)
        })
        .collect()
}
