use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circular region of interest on the ground plane (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Roi {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Manifest(format!("roi radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: [f64; 2],
}

/// Timestamped 2D track with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Manifest("trajectory needs at least 2 samples".into()));
        }
        if samples.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::Manifest("trajectory timestamps not increasing".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiDiagnostics {
    pub duration: f64,
    pub length: f64,
    /// Fraction of arc length inside the disk.
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiDecision {
    pub accepted: bool,
    pub diagnostics: RoiDiagnostics,
}

pub const MIN_DURATION: f64 = 10.0;
pub const MIN_LENGTH: f64 = 20.0;
pub const MIN_OVERLAP: f64 = 0.90;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Length of the part of segment `a→b` that lies inside the disk.
pub fn segment_length_inside(a: [f64; 2], b: [f64; 2], roi: &Roi) -> f64 {
    let len = dist(a, b);
    if roi.contains(a) && roi.contains(b) {
        return len;
    }
    if len == 0.0 {
        return 0.0;
    }
    let d = [b[0] - a[0], b[1] - a[1]];
    let f = [a[0] - roi.center[0], a[1] - roi.center[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (d[0] * f[0] + d[1] * f[1]);
    let qc = f[0] * f[0] + f[1] * f[1] - roi.radius * roi.radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let s = disc.sqrt();
    // numerically stable roots
    let q = -0.5 * (qb + qb.signum() * s);
    let (mut t0, mut t1) = if q != 0.0 { (q / qa, qc / q) } else { (-s / (2.0 * qa), s / (2.0 * qa)) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let lo = t0.max(0.0);
    let hi = t1.min(1.0);
    if hi <= lo {
        0.0
    } else {
        (hi - lo) * len
    }
}

/// Accepts a trajectory when it lasts at least 10 s, covers at least 20 m
/// and keeps strictly more than 90% of its arc length inside the ROI.
pub fn roi_trigger(traj: &Trajectory, roi: &Roi) -> RoiDecision {
    let s = traj.samples();
    let duration = s[s.len() - 1].time - s[0].time;
    let mut length = 0.0;
    let mut inside = 0.0;
    for w in s.windows(2) {
        length += dist(w[0].position, w[1].position);
        inside += segment_length_inside(w[0].position, w[1].position, roi);
    }
    let overlap = if length > 0.0 {
        (inside / length).clamp(0.0, 1.0)
    } else if roi.contains(s[0].position) {
        1.0
    } else {
        0.0
    };
    RoiDecision {
        accepted: duration >= MIN_DURATION && length >= MIN_LENGTH && overlap > MIN_OVERLAP,
        diagnostics: RoiDiagnostics {
            duration,
            length,
            overlap,
        },
    }
}
