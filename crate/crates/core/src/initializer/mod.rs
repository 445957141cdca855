//! Builds the initial sky, ground and background nodes from scene bounds
//! and an input point cloud.

mod ply;

pub use ply::{parse_ply, read_ply, write_ply, PointCloud};

use std::collections::BTreeMap;

use log::{info, warn};
use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::decoders::{ColorDecoder, DirEncoding, ScaffoldDecoder, ScaffoldShape};
use crate::error::{Error, Result};
use crate::math::{quat_from_z_axis, Aabb, Mat3, Vec3};
use crate::scene::{AnchorSet, AppearanceTable, CodeGaussian, GaussianSet, Scene, SceneDims};

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub dims: SceneDims,
    pub sky_count: usize,
    /// Sky radius as a multiple of the bounds diagonal.
    pub sky_radius_factor: f64,
    pub ground_spacing: f64,
    /// Fraction of the lowest cloud points used to fit the ground.
    pub ground_percentile: f64,
    pub ransac_threshold: f64,
    pub ransac_iterations: usize,
    /// Points closer than this to the ground plane are not background.
    pub ground_exclusion: f64,
    pub voxel: f64,
    /// Half-width of the uniform distribution used for fresh codes.
    pub code_init: f32,
    /// Initial per-anchor offset radius (meters).
    pub anchor_radius: f64,
    /// Initial scale of decoded offset Gaussians (meters).
    pub offset_scale: f64,
    pub color_hidden: Vec<usize>,
    pub scaffold_hidden: Vec<usize>,
    pub encoding: DirEncoding,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            dims: SceneDims::default(),
            sky_count: 1_000,
            sky_radius_factor: 10.0,
            ground_spacing: 0.5,
            ground_percentile: 0.2,
            ransac_threshold: 0.1,
            ransac_iterations: 500,
            ground_exclusion: 0.2,
            voxel: 0.5,
            code_init: 0.1,
            anchor_radius: 1.0,
            offset_scale: 0.25,
            color_hidden: vec![64, 64],
            scaffold_hidden: vec![128, 128],
            encoding: DirEncoding::Raw,
        }
    }
}

fn random_code(rng: &mut impl Rng, n: usize, amp: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-amp..=amp)).collect()
}

/// Mean distance from each point to its nearest neighbor.
pub fn mean_nn_spacing(points: &[[f64; 3]]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let total: f64 = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = f64::INFINITY;
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    best = best.min(d);
                }
            }
            best.sqrt()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / points.len() as f64
}

/// `n` area-uniform points on the upper hemisphere of radius
/// `radius_factor × diagonal` around the bounds centroid.
pub fn init_sky(
    bounds: &Aabb,
    n: usize,
    radius_factor: f64,
    code_dim: usize,
    code_init: f32,
    rng: &mut impl Rng,
) -> Result<GaussianSet> {
    if n == 0 {
        return Err(Error::Config("sky count must be at least 1".into()));
    }
    let c = bounds.center();
    let r = radius_factor * bounds.diagonal().max(1e-6);
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let cos_t: f64 = rng.random::<f64>();
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        pts.push([c.x + r * sin_t * phi.cos(), c.y + r * sin_t * phi.sin(), c.z + r * cos_t]);
    }
    let spacing = mean_nn_spacing(&pts);
    let log_s = spacing.max(1e-6).ln() as f32;
    let mut set = GaussianSet::new(code_dim);
    for p in &pts {
        set.push(&CodeGaussian {
            position: p.map(|v| v as f32),
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [log_s; 3],
            opacity_logit: 0.0,
            code: random_code(rng, code_dim, code_init),
        });
    }
    Ok(set)
}

/// Plane `normal · (x - point) = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.point))
    }
}

/// Seeded RANSAC plane fit followed by a least-squares refit on the inliers.
/// The returned normal points toward +z.
pub fn fit_ground_plane(points: &[[f64; 3]], threshold: f64, iterations: usize, rng: &mut impl Rng) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::GroundPlane);
    }
    let pts: Vec<Vec3> = points.iter().map(|p| Vec3::from(*p)).collect();
    let extent = Aabb::from_points(points).map(|b| b.diagonal()).unwrap_or(1.0).max(1e-9);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iterations.max(1) {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let k = rng.random_range(0..pts.len());
        if i == j || j == k || i == k {
            continue;
        }
        let n = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        if n.norm() < 1e-9 * extent * extent {
            continue;
        }
        let plane = Plane {
            point: pts[i],
            normal: n.normalize(),
        };
        let count = pts.iter().filter(|p| plane.distance(p).abs() < threshold).count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, plane));
        }
    }
    if best.is_none() {
        // random triples can all be degenerate on tiny inputs; try them all
        'outer: for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                for k in j + 1..pts.len() {
                    let n = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    if n.norm() >= 1e-9 * extent * extent {
                        let plane = Plane {
                            point: pts[i],
                            normal: n.normalize(),
                        };
                        let count = pts.iter().filter(|p| plane.distance(p).abs() < threshold).count();
                        best = Some((count, plane));
                        break 'outer;
                    }
                }
            }
        }
    }
    let (_, coarse) = best.ok_or(Error::GroundPlane)?;
    let inliers: Vec<Vec3> = pts
        .iter()
        .filter(|p| coarse.distance(p).abs() < threshold)
        .copied()
        .collect();
    let mut plane = coarse;
    if inliers.len() >= 3 {
        let centroid = inliers.iter().sum::<Vec3>() / inliers.len() as f64;
        let mut cov = Mat3::zeros();
        for p in &inliers {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let k = eig.eigenvalues.imin();
        let n = eig.eigenvectors.column(k).into_owned();
        // a degenerate (collinear) inlier set leaves two tiny eigenvalues
        let mut sorted = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        sorted.sort_by(f64::total_cmp);
        if sorted[1] > 1e-12 * sorted[2].max(1e-300) {
            plane = Plane {
                point: centroid,
                normal: n.normalize(),
            };
        }
    }
    if plane.normal.z < 0.0 {
        plane.normal = -plane.normal;
    }
    Ok(plane)
}

/// Indices of the lowest `fraction` of points by z (at least 3 when possible).
pub fn lowest_band(points: &[[f64; 3]], fraction: f64) -> Vec<[f64; 3]> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|a, b| points[*a][2].total_cmp(&points[*b][2]).then(a.cmp(b)));
    let n = ((points.len() as f64 * fraction).ceil() as usize).clamp(3.min(points.len()), points.len());
    idx[..n].iter().map(|i| points[*i]).collect()
}

/// Ground Code-Gaussians on a regular grid over the fitted plane, clipped to
/// `bounds`. Each Gaussian's thin axis lies along the plane normal.
pub fn init_ground(
    ground_points: &[[f64; 3]],
    bounds: &Aabb,
    cfg: &InitConfig,
    rng: &mut impl Rng,
) -> Result<(GaussianSet, Plane)> {
    let plane = fit_ground_plane(ground_points, cfg.ransac_threshold, cfg.ransac_iterations, rng)?;
    let n = plane.normal;
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    let origin = plane.point - n * plane.distance(&Vec3::zeros()) * 0.0;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for k in 0..8 {
        let corner = Vec3::new(
            if k & 1 == 0 { bounds.min[0] } else { bounds.max[0] },
            if k & 2 == 0 { bounds.min[1] } else { bounds.max[1] },
            if k & 4 == 0 { bounds.min[2] } else { bounds.max[2] },
        );
        let d = corner - origin;
        for (i, e) in [e1, e2].iter().enumerate() {
            lo[i] = lo[i].min(d.dot(e));
            hi[i] = hi[i].max(d.dot(e));
        }
    }
    let s = cfg.ground_spacing;
    let q = quat_from_z_axis(&n).map(|v| v as f32);
    let flat = (s * 0.5).ln() as f32;
    let thin = (s * 0.02).ln() as f32;
    let mut set = GaussianSet::new(cfg.dims.code_dim);
    let (a0, a1) = ((lo[0] / s).floor() as i64, (hi[0] / s).ceil() as i64);
    let (b0, b1) = ((lo[1] / s).floor() as i64, (hi[1] / s).ceil() as i64);
    for b in b0..=b1 {
        for a in a0..=a1 {
            let p = origin + e1 * (a as f64 * s) + e2 * (b as f64 * s);
            if !bounds.contains(&[p.x, p.y, p.z]) {
                continue;
            }
            set.push(&CodeGaussian {
                position: [p.x as f32, p.y as f32, p.z as f32],
                rotation: q,
                log_scale: [flat, flat, thin],
                opacity_logit: 0.0,
                code: random_code(rng, cfg.dims.code_dim, cfg.code_init),
            });
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidScene("ground plane does not intersect the scene bounds".into()));
    }
    Ok((set, plane))
}

/// One anchor per occupied voxel (grid anchored at the minimum of the kept
/// points) at the centroid of its points. Points near the ground plane or
/// outside `bounds` are dropped first.
pub fn init_background(
    cloud: &PointCloud,
    voxel: f64,
    ground: Option<&Plane>,
    bounds: Option<&Aabb>,
    cfg: &InitConfig,
    rng: &mut impl Rng,
) -> Result<AnchorSet> {
    if cloud.is_empty() {
        return Err(Error::EmptyPointCloud);
    }
    if !(voxel > 0.0) {
        return Err(Error::Config("voxel size must be positive".into()));
    }
    let near_ground = |p: &[f64; 3]| ground.is_some_and(|g| g.distance(&Vec3::from(*p)).abs() <= cfg.ground_exclusion);
    let kept: Vec<[f64; 3]> = cloud
        .points
        .iter()
        .filter(|p| !near_ground(p) && bounds.is_none_or(|b| b.contains(p)))
        .copied()
        .collect();
    let d = &cfg.dims;
    let mut set = AnchorSet::new(d.anchor_code_dim, d.offset_code_dim, d.offsets);
    if kept.is_empty() {
        warn!("no background points left after ground/outlier filtering");
        return Ok(set);
    }
    let mut min = kept[0];
    for p in &kept {
        for i in 0..3 {
            min[i] = min[i].min(p[i]);
        }
    }
    let mut cells: BTreeMap<[i64; 3], ([f64; 3], usize)> = BTreeMap::new();
    for p in &kept {
        let key = [0, 1, 2].map(|i| ((p[i] - min[i]) / voxel).floor() as i64);
        let e = cells.entry(key).or_insert(([0.0; 3], 0));
        for i in 0..3 {
            e.0[i] += p[i];
        }
        e.1 += 1;
    }
    let log_r = cfg.anchor_radius.ln() as f32;
    for (sum, count) in cells.values() {
        let c = sum.map(|v| v / *count as f64);
        if near_ground(&c) {
            continue;
        }
        let code = random_code(rng, d.anchor_code_dim, cfg.code_init);
        let offs = random_code(rng, d.offsets * d.offset_code_dim, cfg.code_init);
        set.push(c.map(|v| v as f32), &code, &offs, log_r);
    }
    Ok(set)
}

/// Full initialization: bounds from the cloud plus `extra_points` (camera
/// centers, typically), ground from the lowest height band, sky dome,
/// background anchors, fresh decoders and one appearance row per traversal.
pub fn init_scene(
    cloud: &PointCloud,
    extra_points: &[[f64; 3]],
    traversals: &[u32],
    cfg: &InitConfig,
    seed: u64,
) -> Result<Scene> {
    if cloud.is_empty() {
        return Err(Error::EmptyPointCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<[f64; 3]> = cloud.points.iter().chain(extra_points).copied().collect();
    let raw = Aabb::from_points(&all).ok_or(Error::EmptyPointCloud)?;
    // pad so grid samples on the boundary survive
    let pad = cfg.ground_spacing.max(cfg.voxel);
    let bounds = Aabb::new(raw.min.map(|v| v - pad), raw.max.map(|v| v + pad));

    let band = lowest_band(&cloud.points, cfg.ground_percentile);
    let (ground, plane) = init_ground(&band, &bounds, cfg, &mut rng)?;
    let sky = init_sky(
        &bounds,
        cfg.sky_count,
        cfg.sky_radius_factor,
        cfg.dims.code_dim,
        cfg.code_init,
        &mut rng,
    )?;
    let background = init_background(cloud, cfg.voxel, Some(&plane), Some(&bounds), cfg, &mut rng)?;
    if background.is_empty() {
        return Err(Error::InvalidScene("no background points after ground/outlier filtering".into()));
    }
    info!(
        "initialized {} sky, {} ground, {} anchors",
        sky.len(),
        ground.len(),
        background.len()
    );

    let d = cfg.dims;
    let sky_decoder = ColorDecoder::new(d.latent_dim, d.code_dim, &cfg.color_hidden, cfg.encoding, &mut rng);
    let ground_decoder = ColorDecoder::new(d.latent_dim, d.code_dim, &cfg.color_hidden, cfg.encoding, &mut rng);
    let center = bounds.center();
    let scaffold = ScaffoldDecoder::new(
        ScaffoldShape {
            latent_dim: d.latent_dim,
            anchor_code_dim: d.anchor_code_dim,
            offset_code_dim: d.offset_code_dim,
            offsets: d.offsets,
        },
        &cfg.scaffold_hidden,
        cfg.encoding,
        cfg.offset_scale.ln() as f32,
        [center.x as f32, center.y as f32, center.z as f32],
        (0.5 * bounds.diagonal()).max(1e-3) as f32,
        &mut rng,
    );
    let mut appearance = AppearanceTable::new(d.latent_dim);
    for j in traversals {
        let row = random_code(&mut rng, d.latent_dim, 0.01);
        appearance.register(*j, &row)?;
    }
    appearance.default_id = traversals.first().copied();
    let scene = Scene {
        dims: d,
        bounds,
        sky,
        ground,
        background,
        sky_decoder,
        ground_decoder,
        scaffold,
        appearance,
    };
    scene.validate()?;
    Ok(scene)
}
