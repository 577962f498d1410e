//! Fan-beam transmission tomography on a pixel grid.
//!
//! Under the Beer–Lambert law the log-attenuation along a ray is the line
//! integral of the density, so the data are `b_i = Σ_j ℓ_ij x_j` with `ℓ_ij` the
//! length of ray `i` inside pixel `j`. Pixels are unit squares; the imaging
//! domain is the disk of radius `min(nx, ny)/2 − 1` centred in the grid, which
//! keeps the outer ring of pixels empty so they can be eliminated by the prior.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{NoiseModel, SparseMatrix};
use crate::problems::{Problem, ProblemMetadata};
use crate::regularizer::LKind;
use crate::scalar::Scalar;

/// Two inclusions in coordinates relative to the domain radius: a kite of
/// density 1.2 in the upper left and a disk of density 1.0 in the lower right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phantom {
    pub kite_density: f64,
    pub kite_center: [f64; 2],
    pub kite_scale: f64,
    pub disk_density: f64,
    pub disk_center: [f64; 2],
    pub disk_radius: f64,
    /// Sub-samples per pixel side when averaging the density over a pixel.
    pub supersample: usize,
}

impl Default for Phantom {
    fn default() -> Self {
        Phantom {
            kite_density: 1.2,
            kite_center: [-0.35, 0.35],
            kite_scale: 0.2,
            disk_density: 1.0,
            disk_center: [0.35, -0.35],
            disk_radius: 0.25,
            supersample: 8,
        }
    }
}

impl Phantom {
    /// Density at a point given in units of the domain radius, centred at the origin.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        if x * x + y * y > 1.0 {
            return 0.0;
        }
        let (dx, dy) = (x - self.disk_center[0], y - self.disk_center[1]);
        if dx * dx + dy * dy <= self.disk_radius * self.disk_radius {
            return self.disk_density;
        }
        if self.inside_kite(x, y) {
            return self.kite_density;
        }
        0.0
    }

    fn inside_kite(&self, x: f64, y: f64) -> bool {
        // kite curve (cos t + 0.65 cos 2t − 0.65, 1.5 sin t), tested as a polygon
        const SIDES: usize = 256;
        let s = self.kite_scale;
        let [cx, cy] = self.kite_center;
        let pt = |k: usize| {
            let t = 2.0 * PI * k as f64 / SIDES as f64;
            (
                cx + s * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65),
                cy + s * 1.5 * t.sin(),
            )
        };
        let mut inside = false;
        let mut prev = pt(SIDES - 1);
        for k in 0..SIDES {
            let cur = pt(k);
            if (cur.1 > y) != (prev.1 > y) {
                let xc = prev.0 + (y - prev.1) * (cur.0 - prev.0) / (cur.1 - prev.1);
                if x < xc {
                    inside = !inside;
                }
            }
            prev = cur;
        }
        inside
    }

    /// Pixel averages over the interior pixels, row by row from the bottom.
    pub fn rasterize(&self, geom: &TomoGeometry) -> Vec<f64> {
        let ss = self.supersample.max(1);
        let (mx, my) = (geom.nx - 2, geom.ny - 2);
        let mut out = vec![0.0; mx * my];
        for iy in 0..my {
            for ix in 0..mx {
                let mut acc = 0.0;
                for sy in 0..ss {
                    for sx in 0..ss {
                        let px = (ix + 1) as f64 + (sx as f64 + 0.5) / ss as f64;
                        let py = (iy + 1) as f64 + (sy as f64 + 0.5) / ss as f64;
                        let (u, v) = geom.to_unit(px, py);
                        acc += self.density(u, v);
                    }
                }
                out[iy * mx + ix] = acc / (ss * ss) as f64;
            }
        }
        out
    }
}

/// Fan-beam scan geometry in pixel units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomoGeometry {
    pub nx: usize,
    pub ny: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub source_radius: f64,
    pub fan_half_angle: f64,
    pub n_rays: usize,
    pub n_views: usize,
}

impl TomoGeometry {
    pub fn new(nx: usize, ny: usize, n_rays: usize, n_views: usize) -> Self {
        let radius = nx.min(ny) as f64 / 2.0 - 1.0;
        let source_radius = 2.0 * radius;
        TomoGeometry {
            nx,
            ny,
            center: [nx as f64 / 2.0, ny as f64 / 2.0],
            radius,
            source_radius,
            fan_half_angle: (radius / source_radius).asin(),
            n_rays,
            n_views,
        }
    }

    fn to_unit(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.center[0]) / self.radius, (py - self.center[1]) / self.radius)
    }

    /// Source position and unit direction of ray `ray` in view `view`.
    pub fn ray(&self, view: usize, ray: usize) -> ([f64; 2], [f64; 2]) {
        let phi = 2.0 * PI * view as f64 / self.n_views as f64;
        let src = [
            self.center[0] + self.source_radius * phi.cos(),
            self.center[1] + self.source_radius * phi.sin(),
        ];
        let gamma = -self.fan_half_angle + (ray as f64 + 0.5) * 2.0 * self.fan_half_angle / self.n_rays as f64;
        let a = phi + PI + gamma;
        (src, [a.cos(), a.sin()])
    }

    /// Parameter interval `[s0, s1]` where the ray lies inside the domain disk.
    pub fn chord(&self, src: [f64; 2], dir: [f64; 2]) -> Option<(f64, f64)> {
        let w = [src[0] - self.center[0], src[1] - self.center[1]];
        let p = dir[0] * w[0] + dir[1] * w[1];
        let disc = p * p - (w[0] * w[0] + w[1] * w[1] - self.radius * self.radius);
        (disc > 0.0).then(|| (-p - disc.sqrt(), -p + disc.sqrt()))
    }

    /// Interior pixel index of pixel `(ix, iy)`, if it is not on the outer ring.
    pub fn unknown(&self, ix: usize, iy: usize) -> Option<usize> {
        (ix >= 1 && iy >= 1 && ix + 1 < self.nx && iy + 1 < self.ny).then(|| (iy - 1) * (self.nx - 2) + (ix - 1))
    }

    /// `(unknown, length)` pairs of the ray clipped to the domain, by incremental
    /// grid traversal. `None` when the ray misses the domain.
    pub fn trace(&self, src: [f64; 2], dir: [f64; 2]) -> Option<Vec<(usize, f64)>> {
        let (s0, s1) = self.chord(src, dir)?;
        let len = s1 - s0;
        let p0 = [src[0] + s0 * dir[0], src[1] + s0 * dir[1]];
        let clampi = |v: f64, hi: usize| (v.floor().max(0.0) as usize).min(hi - 1);
        let mut ix = clampi(p0[0], self.nx);
        let mut iy = clampi(p0[1], self.ny);
        let axis = |p: f64, d: f64, i: usize| -> (f64, f64) {
            if d > 0.0 {
                (((i + 1) as f64 - p) / d, 1.0 / d)
            } else if d < 0.0 {
                ((i as f64 - p) / d, -1.0 / d)
            } else {
                (f64::INFINITY, f64::INFINITY)
            }
        };
        let (mut tx, dtx) = axis(p0[0], dir[0], ix);
        let (mut ty, dty) = axis(p0[1], dir[1], iy);
        let mut s = 0.0;
        let mut out: Vec<(usize, f64)> = Vec::new();
        while s < len {
            let next = tx.min(ty).min(len);
            if next > s {
                if let Some(j) = self.unknown(ix, iy) {
                    out.push((j, next - s));
                }
            }
            s = next;
            if s >= len {
                break;
            }
            if tx <= ty {
                if dir[0] > 0.0 {
                    ix += 1;
                } else if ix == 0 {
                    break;
                } else {
                    ix -= 1;
                }
                tx += dtx;
            } else {
                if dir[1] > 0.0 {
                    iy += 1;
                } else if iy == 0 {
                    break;
                } else {
                    iy -= 1;
                }
                ty += dty;
            }
            if ix >= self.nx || iy >= self.ny {
                break;
            }
        }
        Some(out)
    }
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoConfig {
    pub nx: usize,
    pub ny: usize,
    pub n_rays: usize,
    pub n_views: usize,
    /// Noise standard deviation as a percentage of `max(b0)`.
    pub noise_pct: f64,
    pub seed: u64,
    pub phantom: Phantom,
}

impl Default for TomoConfig {
    fn default() -> Self {
        TomoConfig {
            nx: 32,
            ny: 32,
            n_rays: 40,
            n_views: 36,
            noise_pct: 1.0,
            seed: 7,
            phantom: Phantom::default(),
        }
    }
}

/// Builds the fan-beam problem. Rays that miss the domain are dropped and
/// counted in `metadata.extra["dropped_rays"]`.
pub fn make_tomo<T: Scalar>(cfg: &TomoConfig) -> Result<Problem<T>> {
    if cfg.nx < 8 || cfg.ny < 8 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("needs at least 8x8 pixels, got {}x{}", cfg.nx, cfg.ny),
        });
    }
    if cfg.n_rays == 0 || cfg.n_views == 0 {
        return Err(Error::InvalidParameter {
            name: "rays",
            reason: "n_rays and n_views must be positive".into(),
        });
    }
    if !(cfg.noise_pct >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise_pct",
            reason: format!("must be nonnegative, got {}", cfg.noise_pct),
        });
    }
    let geom = TomoGeometry::new(cfg.nx, cfg.ny, cfg.n_rays, cfg.n_views);
    let rows: Vec<Option<Vec<(usize, f64)>>> = (0..cfg.n_views * cfg.n_rays)
        .into_par_iter()
        .map(|i| {
            let (src, dir) = geom.ray(i / cfg.n_rays, i % cfg.n_rays);
            geom.trace(src, dir)
        })
        .collect();
    let dropped = rows.iter().filter(|r| r.is_none()).count();
    let n = (cfg.nx - 2) * (cfg.ny - 2);
    let mut triplets = Vec::new();
    let mut m = 0;
    for r in rows.into_iter().flatten() {
        for (j, len) in r {
            triplets.push((m, j, T::lit(len)));
        }
        m += 1;
    }
    let a = SparseMatrix::from_triplets(m, n, &triplets)?;
    let x = cfg.phantom.rasterize(&geom);
    let x_t: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
    let b0 = crate::operators::LinearOperator::apply(&a, &x_t)?;
    let bmax = b0.iter().fold(0.0f64, |acc, v| acc.max(v.as_f64()));
    let sigma = cfg.noise_pct / 100.0 * bmax;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b: Vec<T> = b0
        .iter()
        .map(|&v| {
            let w: f64 = StandardNormal.sample(&mut rng);
            v + T::lit(sigma * w)
        })
        .collect();
    let mut extra = BTreeMap::new();
    extra.insert("dropped_rays".into(), serde_json::json!(dropped));
    extra.insert("noise_pct".into(), serde_json::json!(cfg.noise_pct));
    extra.insert("geometry".into(), serde_json::to_value(&geom)?);
    Ok(Problem {
        a: Arc::new(a),
        b,
        b0: Some(b0),
        noise: NoiseModel::iid(T::lit(sigma)),
        sigma: T::lit(sigma),
        x_true: Some(x_t),
        default_l: Some(LKind::GridIncidence { nx: cfg.nx, ny: cfg.ny }),
        metadata: ProblemMetadata {
            name: "tomo".into(),
            rows: m,
            cols: n,
            seed: Some(cfg.seed),
            extra,
        },
    })
}
