//! Minimal-thickness grasp direction of a point cloud.
//!
//! The horizontal projection's width along a unit direction `d` is
//! `max dᵀx − min dᵀx`. Its minimum over `d` is attained at the normal of
//! some convex-hull edge, so rotating calipers over the hull is exact.

use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// Relative tolerance for treating hull turns and widths as zero.
const COLLINEAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateCloud("cloud has no points".into()));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::DegenerateCloud(format!("point {} is not finite", i + 1)));
        }
        Ok(PointCloud { points })
    }

    /// Parses whitespace-separated `x y z` lines; blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::DegenerateCloud(format!("line {}: {e}", n + 1)))?;
            if vals.len() != 3 {
                return Err(Error::DegenerateCloud(format!(
                    "line {}: expected 3 coordinates, got {}",
                    n + 1,
                    vals.len()
                )));
            }
            points.push([vals[0], vals[1], vals[2]]);
        }
        PointCloud::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PointCloud::parse(&text)
    }

    pub fn mean(&self) -> [f64; 3] {
        let n = self.points.len() as f64;
        let mut m = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                m[k] += p[k];
            }
        }
        m.map(|v| v / n)
    }

    pub fn horizontal(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p[0], p[1]]).collect()
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Extent of `points` along unit direction `d`.
pub fn width_along(points: &[[f64; 2]], d: [f64; 2]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let t = d[0] * p[0] + d[1] * p[1];
        (lo.min(t), hi.max(t))
    });
    hi - lo
}

fn canonical(d: [f64; 2]) -> [f64; 2] {
    if d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0) {
        [-d[0], -d[1]]
    } else {
        [d[0] + 0.0, d[1] + 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraspDirection {
    pub direction: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraspPose {
    pub position: [f64; 3],
    pub direction: [f64; 2],
    pub width: f64,
}

/// Direction of minimal horizontal extent, sign-canonicalized to x ≥ 0
/// (ties y ≥ 0).
pub fn grasp_direction(cloud: &PointCloud) -> Result<GraspDirection> {
    let hull = convex_hull(&cloud.horizontal());
    if hull.len() < 2 {
        return Err(Error::DegenerateCloud("all horizontal projections coincide".into()));
    }
    let scale = hull
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if hull.len() < 3 {
        return Err(Error::DegenerateCloud("horizontal projections are collinear".into()));
    }
    let n = hull.len();
    let mut best: Option<GraspDirection> = None;
    // antipodal vertex for edge i, advanced monotonically
    let mut j = 1;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = ex.hypot(ey);
        let dist = |k: usize| cross(a, b, hull[k % n]) / len;
        while dist(j + 1) >= dist(j) && (j + 1) % n != i {
            j += 1;
        }
        let w = dist(j);
        if best.is_none_or(|g| w < g.width) {
            best = Some(GraspDirection {
                direction: canonical([-ey / len, ex / len]),
                width: w,
            });
        }
    }
    let best = best.expect("hull has edges");
    if best.width <= COLLINEAR_EPS * scale {
        return Err(Error::DegenerateCloud("horizontal projections are collinear".into()));
    }
    Ok(best)
}

/// Grasp at the cloud's centroid along the minimal-thickness direction.
pub fn grasp_pose(cloud: &PointCloud) -> Result<GraspPose> {
    let g = grasp_direction(cloud)?;
    Ok(GraspPose {
        position: cloud.mean(),
        direction: g.direction,
        width: g.width,
    })
}
