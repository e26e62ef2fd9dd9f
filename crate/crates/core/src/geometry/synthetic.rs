//! Analytic face-mesh layouts for tests and the synthetic corpus.
//!
//! Vertices live on an ellipsoidal head. Each named vertex is placed by an
//! azimuth (degrees, negative towards the subject's right), a normalized
//! height `v` in `[-1, 1]` (positive downwards) and an outward protrusion.
//! The head is turned by a yaw angle about the vertical axis and projected
//! orthographically, so yaw moves vertices horizontally only.

use super::mask::{FRONTAL_LEFT_JAW, FRONTAL_RIGHT_JAW, NOSE_BRIDGE, NOSE_TIP, PROFILE_LEFT_JAW, PROFILE_RIGHT_JAW};
use super::FACE_MESH_VERTICES;

/// Eye contour vertices (corners, upper and lower lids) of both eyes.
pub const EYES: [usize; 8] = [33, 133, 159, 145, 263, 362, 386, 374];
pub const EYEBROWS: [usize; 10] = [70, 63, 105, 66, 107, 300, 293, 334, 296, 336];
/// Mouth corners, outer and inner lips.
pub const MOUTH: [usize; 6] = [61, 291, 0, 17, 13, 14];
/// Chin vertices strictly inside the jaw outline.
pub const CHIN: [usize; 2] = [199, 175];
pub const NOSE: [usize; 7] = [168, NOSE_BRIDGE, 197, 195, 5, 4, NOSE_TIP];

/// Height of the jaw tops and of the nose vertex: just below the eyes.
pub const JAW_TOP_V: f64 = -0.12;
pub const CHIN_V: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceParams {
    pub center_x: f64,
    pub center_y: f64,
    /// Half of the face height in pixels.
    pub half_height: f64,
    /// Head width relative to its height.
    pub aspect: f64,
    pub yaw_deg: f64,
}

impl FaceParams {
    pub fn frontal(center_x: f64, center_y: f64, half_height: f64) -> Self {
        FaceParams { center_x, center_y, half_height, aspect: 0.8, yaw_deg: 0.0 }
    }

    pub fn half_width(&self) -> f64 {
        self.aspect * self.half_height
    }

    fn project(&self, azimuth_deg: f64, v: f64, protrusion: f64) -> [f64; 2] {
        let a = self.half_width();
        let rho = (1.0 - v * v).max(0.0).sqrt();
        let az = azimuth_deg.to_radians();
        let x = a * rho * az.sin();
        let z = a * rho * az.cos() + protrusion * self.half_height;
        let yaw = self.yaw_deg.to_radians();
        [self.center_x + x * yaw.cos() + z * yaw.sin(), self.center_y + self.half_height * v]
    }
}

/// `(index, azimuth, v, protrusion)` for every named vertex.
fn named_vertices() -> Vec<(usize, f64, f64, f64)> {
    let mut out = Vec::new();
    let jaw = |t: f64, top_azimuth: f64| (top_azimuth * (1.0 - t * t * t), JAW_TOP_V + t * (CHIN_V - JAW_TOP_V));
    for (i, &idx) in FRONTAL_RIGHT_JAW.iter().enumerate() {
        let (az, v) = jaw(i as f64 / 10.0, -85.0);
        out.push((idx, az, v, 0.0));
    }
    // left jaw runs chin to top and excludes the shared chin vertex
    for (i, &idx) in FRONTAL_LEFT_JAW.iter().enumerate() {
        let (az, v) = jaw((9 - i) as f64 / 10.0, 85.0);
        out.push((idx, az, v, 0.0));
    }
    for (i, &idx) in PROFILE_RIGHT_JAW.iter().enumerate().take(10) {
        let (az, v) = jaw(i as f64 / 10.0, -60.0);
        out.push((idx, az, v, 0.0));
    }
    for (i, &idx) in PROFILE_LEFT_JAW.iter().enumerate() {
        let (az, v) = jaw((9 - i) as f64 / 10.0, 60.0);
        out.push((idx, az, v, 0.0));
    }
    let nose = [(-0.22, 0.05), (JAW_TOP_V, 0.08), (-0.02, 0.12), (0.06, 0.16), (0.12, 0.2), (0.17, 0.24), (0.2, 0.26)];
    for (&idx, (v, p)) in NOSE.iter().zip(nose) {
        out.push((idx, 0.0, v, p));
    }
    let eyes = [(-40.0, -0.25), (-16.0, -0.25), (-28.0, -0.31), (-28.0, -0.19)];
    for (k, (az, v)) in eyes.into_iter().enumerate() {
        out.push((EYES[k], az, v, 0.0));
        out.push((EYES[k + 4], -az, v, 0.0));
    }
    for (k, az) in [-45.0, -36.0, -28.0, -20.0, -12.0].into_iter().enumerate() {
        out.push((EYEBROWS[k], az, -0.42, 0.0));
        out.push((EYEBROWS[k + 5], -az, -0.42, 0.0));
    }
    let mouth = [(-22.0, 0.45, 0.0), (22.0, 0.45, 0.0), (0.0, 0.38, 0.04), (0.0, 0.58, 0.03), (0.0, 0.44, 0.03), (0.0, 0.5, 0.03)];
    for (&idx, (az, v, p)) in MOUTH.iter().zip(mouth) {
        out.push((idx, az, v, p));
    }
    out.push((CHIN[0], 0.0, 0.74, 0.0));
    out.push((CHIN[1], 0.0, 0.85, 0.0));
    out
}

/// Full 468-vertex mesh for a synthetic face. Vertices without a named role
/// are spread over the face on a low-discrepancy lattice.
pub fn face_mesh(params: &FaceParams) -> Vec<[f64; 2]> {
    let mut mesh = vec![None; FACE_MESH_VERTICES];
    for (idx, az, v, p) in named_vertices() {
        mesh[idx] = Some(params.project(az, v, p));
    }
    let free = mesh.iter().filter(|m| m.is_none()).count();
    let mut k = 0usize;
    mesh.into_iter()
        .map(|m| {
            m.unwrap_or_else(|| {
                let frac = (k as f64 * 0.618_033_988_749_895).fract();
                let v = -0.85 + 1.7 * (k as f64 + 0.5) / free as f64;
                k += 1;
                params.project(-75.0 + 150.0 * frac, v, 0.0)
            })
        })
        .collect()
}

/// Head silhouette (used to render the face region of synthetic frames).
///
/// Width and depth of the head are equal, so the silhouette does not change with yaw.
pub fn face_outline(params: &FaceParams, samples: usize) -> Vec<[f64; 2]> {
    let a = params.half_width();
    let b = params.half_height;
    (0..samples)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / samples as f64;
            [params.center_x + a * t.cos(), params.center_y + b * t.sin()]
        })
        .collect()
}
