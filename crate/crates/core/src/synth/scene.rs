//! Procedural RGB-D scenes: a floor and a back wall viewed by a level pinhole
//! camera, populated with boxes and spheres standing on the floor. Depth is
//! the camera-space `z` of the first ray hit; color is Lambertian shading of
//! a per-object albedo, so every depth discontinuity is also an albedo edge.

use rand::seq::index::sample;
use rand::Rng;

use crate::config::KeyValues;
use crate::depth::{DepthMap, Grid, RgbImage};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub fov_deg: f64,
    /// Index 0 is the floor, 1 the back wall, the rest go to objects.
    pub palette: Vec<[f64; 3]>,
}

const DEFAULT_PALETTE: [u32; 12] = [
    0x8c7a64, 0xd8d4c8, 0xc0392b, 0x2e86c1, 0x27ae60, 0xf1c40f, 0x8e44ad, 0x16a085, 0xe67e22,
    0x34495e, 0xe84393, 0x1abc9c,
];

fn hex_color(v: u32) -> [f64; 3] {
    [
        ((v >> 16) & 0xff) as f64 / 255.0,
        ((v >> 8) & 0xff) as f64 / 255.0,
        (v & 0xff) as f64 / 255.0,
    ]
}

fn parse_hex(s: &str) -> Result<[f64; 3]> {
    let t = s.trim().trim_start_matches('#');
    if t.len() != 6 {
        return Err(Error::InvalidConfig(format!("bad color {s:?}")));
    }
    u32::from_str_radix(t, 16)
        .map(hex_color)
        .map_err(|_| Error::InvalidConfig(format!("bad color {s:?}")))
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            min_objects: 1,
            max_objects: 8,
            d_min: 1.0,
            d_max: 6.0,
            fov_deg: 60.0,
            palette: DEFAULT_PALETTE.iter().map(|&v| hex_color(v)).collect(),
        }
    }
}

impl SceneConfig {
    pub const KEYS: [&'static str; 8] = [
        "height",
        "width",
        "min_objects",
        "max_objects",
        "d_min",
        "d_max",
        "fov_deg",
        "palette",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.height < 16 || self.width < 16 {
            return bad(format!(
                "scene must be at least 16x16, got {}x{}",
                self.height, self.width
            ));
        }
        if self.min_objects > self.max_objects {
            return bad("min_objects exceeds max_objects".into());
        }
        if !(self.d_min > 0.0 && self.d_max > 2.0 * self.d_min) {
            return bad(format!(
                "depth range [{}, {}] must satisfy 0 < 2*d_min < d_max",
                self.d_min, self.d_max
            ));
        }
        if !(10.0..=120.0).contains(&self.fov_deg) {
            return bad(format!("fov {} outside [10, 120]", self.fov_deg));
        }
        if self.palette.len() < 3 {
            return bad("palette needs at least 3 colors".into());
        }
        if self.palette.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("palette channels must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        kv.read_into("height", &mut cfg.height)?;
        kv.read_into("width", &mut cfg.width)?;
        kv.read_into("min_objects", &mut cfg.min_objects)?;
        kv.read_into("max_objects", &mut cfg.max_objects)?;
        kv.read_into("d_min", &mut cfg.d_min)?;
        kv.read_into("d_max", &mut cfg.d_max)?;
        kv.read_into("fov_deg", &mut cfg.fov_deg)?;
        if let Some(p) = kv.get_str("palette") {
            cfg.palette = p.split(',').map(parse_hex).collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("height", self.height);
        kv.set("width", self.width);
        kv.set("min_objects", self.min_objects);
        kv.set("max_objects", self.max_objects);
        kv.set("d_min", self.d_min);
        kv.set("d_max", self.d_max);
        kv.set("fov_deg", self.fov_deg);
        let palette = self
            .palette
            .iter()
            .map(|c| {
                let b = c.map(|v| (v * 255.0).round() as u32);
                format!("#{:02x}{:02x}{:02x}", b[0], b[1], b[2])
            })
            .collect::<Vec<_>>()
            .join(",");
        kv.set("palette", palette);
        kv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample<T> {
    pub rgb: RgbImage<T>,
    pub depth_true: DepthMap<T>,
    /// Surface id per pixel: 0 floor, 1 back wall, `2 + k` for object `k`.
    pub labels: Grid<u8>,
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Object {
    shape: Shape,
    albedo: [f64; 3],
}

/// Fixed camera and room layout derived from a [`SceneConfig`].
#[derive(Debug, Clone, Copy)]
pub struct RoomGeometry {
    pub focal: f64,
    pub camera_height: f64,
    pub wall_z: f64,
    cx: f64,
    cy: f64,
}

impl RoomGeometry {
    pub fn new(cfg: &SceneConfig) -> Self {
        let half = (cfg.fov_deg.to_radians() / 2.0).tan();
        let focal = (cfg.width as f64 / 2.0) / half;
        let bottom_ray = (cfg.height as f64 / 2.0 - 0.5) / focal;
        Self {
            focal,
            // nearest visible floor point sits at 1.1 * d_min
            camera_height: 1.1 * cfg.d_min * bottom_ray,
            wall_z: 0.98 * cfg.d_max,
            cx: cfg.width as f64 / 2.0,
            cy: cfg.height as f64 / 2.0,
        }
    }

    /// Ray direction through the center of pixel (row, col), with `z = 1`.
    pub fn ray(&self, row: usize, col: usize) -> [f64; 3] {
        [
            (col as f64 + 0.5 - self.cx) / self.focal,
            -(row as f64 + 0.5 - self.cy) / self.focal,
            1.0,
        ]
    }

    /// Depth of the empty room along `dir`, and whether it hit the floor.
    pub fn room_depth(&self, dir: [f64; 3]) -> (f64, bool) {
        if dir[1] < 0.0 {
            let t = self.camera_height / -dir[1];
            if t < self.wall_z {
                return (t, true);
            }
        }
        (self.wall_z, false)
    }
}

fn hit_box(dir: [f64; 3], min: [f64; 3], max: [f64; 3]) -> Option<(f64, [f64; 3])> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0;
    for k in 0..3 {
        if dir[k].abs() < 1e-15 {
            if 0.0 < min[k] || 0.0 > max[k] {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = (min[k] / dir[k], max[k] / dir[k]);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_near {
            t_near = t0;
            axis = k;
        }
        t_far = t_far.min(t1);
    }
    if t_near > t_far || t_near <= 0.0 {
        return None;
    }
    let mut normal = [0.0; 3];
    normal[axis] = -dir[axis].signum();
    Some((t_near, normal))
}

fn hit_sphere(dir: [f64; 3], center: [f64; 3], radius: f64) -> Option<(f64, [f64; 3])> {
    let a = dot(dir, dir);
    let b = -2.0 * dot(dir, center);
    let c = dot(center, center) - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    if t <= 0.0 {
        return None;
    }
    let p = dir.map(|d| d * t);
    let n = [0, 1, 2].map(|k| (p[k] - center[k]) / radius);
    Some((t, n))
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

const LIGHT: [f64; 3] = [-0.4, 0.8, -0.45];
const AMBIENT: f64 = 0.35;

fn shade(albedo: [f64; 3], normal: [f64; 3]) -> [f64; 3] {
    let l = dot(LIGHT, LIGHT).sqrt();
    let lambert = (dot(normal, LIGHT) / l).max(0.0);
    albedo.map(|a| (a * (AMBIENT + (1.0 - AMBIENT) * lambert)).clamp(0.0, 1.0))
}

fn place_objects(cfg: &SceneConfig, geo: &RoomGeometry, seed: u64) -> Vec<Object> {
    let mut rng = rng_from_seed(seed);
    let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let n_colors = cfg.palette.len() - 2;
    let colors: Vec<usize> = if count <= n_colors {
        sample(&mut rng, n_colors, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..n_colors)).collect()
    };
    let half_h = (cfg.width as f64 / 2.0) / geo.focal;
    let floor_y = -geo.camera_height;
    let mut objects = Vec::with_capacity(count);
    for &color in &colors {
        let s = rng.random_range(0.06..0.14) * geo.wall_z;
        let z_lo = 1.2 * cfg.d_min + s;
        let z_hi = (geo.wall_z - s).max(z_lo + 1e-6);
        let zc = rng.random_range(z_lo..z_hi);
        let x_lim = 0.7 * zc * half_h;
        let xc = rng.random_range(-x_lim..x_lim);
        let shape = if rng.random_bool(0.5) {
            let ext = [0, 1, 2].map(|_| s * rng.random_range(0.5..1.0));
            Shape::Box {
                min: [xc - ext[0], floor_y, zc - ext[2]],
                max: [xc + ext[0], floor_y + 2.0 * ext[1], zc + ext[2]],
            }
        } else {
            Shape::Sphere {
                center: [xc, floor_y + s, zc],
                radius: s,
            }
        };
        objects.push(Object {
            shape,
            albedo: cfg.palette[2 + color],
        });
    }
    objects
}

/// Renders the scene for `seed`; identical seeds give identical samples.
pub fn generate_scene<T: Scalar>(seed: u64, cfg: &SceneConfig) -> Result<SceneSample<T>> {
    cfg.validate()?;
    let geo = RoomGeometry::new(cfg);
    let objects = place_objects(cfg, &geo, seed);
    let (h, w) = (cfg.height, cfg.width);
    let mut depth = Vec::with_capacity(h * w);
    let mut rgb = Vec::with_capacity(h * w);
    let mut labels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let dir = geo.ray(r, c);
            let (room_t, on_floor) = geo.room_depth(dir);
            let (mut t, mut normal, mut albedo, mut label) = if on_floor {
                (room_t, [0.0, 1.0, 0.0], cfg.palette[0], 0u8)
            } else {
                (room_t, [0.0, 0.0, -1.0], cfg.palette[1], 1u8)
            };
            for (k, obj) in objects.iter().enumerate() {
                let hit = match obj.shape {
                    Shape::Box { min, max } => hit_box(dir, min, max),
                    Shape::Sphere { center, radius } => hit_sphere(dir, center, radius),
                };
                if let Some((tk, nk)) = hit {
                    if tk < t {
                        t = tk;
                        normal = nk;
                        albedo = obj.albedo;
                        label = 2 + k as u8;
                    }
                }
            }
            depth.push(T::lit(t.clamp(cfg.d_min, cfg.d_max)));
            rgb.push(shade(albedo, normal).map(T::lit));
            labels.push(label);
        }
    }
    Ok(SceneSample {
        rgb: RgbImage::new(Grid::from_vec(h, w, rgb)?)?,
        depth_true: DepthMap::from_vec(h, w, depth)?,
        labels: Grid::from_vec(h, w, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let cfg = SceneConfig::default();
        let a: SceneSample<f64> = generate_scene(11, &cfg).unwrap();
        let b: SceneSample<f64> = generate_scene(11, &cfg).unwrap();
        assert_eq!(a, b);
        let c: SceneSample<f64> = generate_scene(12, &cfg).unwrap();
        assert_ne!(a.depth_true, c.depth_true);
    }

    #[test]
    fn empty_room_is_closed_form_planes() {
        let cfg = SceneConfig {
            min_objects: 0,
            max_objects: 0,
            ..SceneConfig::default()
        };
        let geo = RoomGeometry::new(&cfg);
        let s: SceneSample<f64> = generate_scene(5, &cfg).unwrap();
        for r in 0..cfg.height {
            for c in 0..cfg.width {
                let y = -(r as f64 + 0.5 - cfg.height as f64 / 2.0) / geo.focal;
                let expected = if y < 0.0 {
                    (geo.camera_height / -y).min(geo.wall_z)
                } else {
                    geo.wall_z
                };
                assert_eq!(s.depth_true.get(r, c), expected);
            }
        }
        // bottom row is the nearest floor point
        let bottom = s.depth_true.get(cfg.height - 1, 0);
        assert!((bottom - 1.1 * cfg.d_min).abs() < 1e-12);
    }

    #[test]
    fn depth_stays_in_range_and_dense() {
        let cfg = SceneConfig::default();
        for seed in 0..20 {
            let s: SceneSample<f32> = generate_scene(seed, &cfg).unwrap();
            assert_eq!(s.depth_true.valid_count(), cfg.height * cfg.width);
            for &v in s.depth_true.values() {
                assert!(v >= cfg.d_min as f32 && v <= cfg.d_max as f32);
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let small = SceneConfig {
            height: 8,
            ..SceneConfig::default()
        };
        assert!(generate_scene::<f64>(0, &small).is_err());
        let inverted = SceneConfig {
            d_min: 5.0,
            d_max: 4.0,
            ..SceneConfig::default()
        };
        assert!(generate_scene::<f64>(0, &inverted).is_err());
    }

    #[test]
    fn config_key_values_round_trip() {
        let cfg = SceneConfig {
            height: 32,
            fov_deg: 45.0,
            ..SceneConfig::default()
        };
        let back = SceneConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(back.height, 32);
        assert_eq!(back.fov_deg, 45.0);
        assert_eq!(back.palette.len(), cfg.palette.len());
        for (a, b) in back.palette.iter().zip(&cfg.palette) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }
}
