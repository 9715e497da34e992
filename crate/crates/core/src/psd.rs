//! Projection of symmetric diffusion matrices onto the positive semidefinite
//! cone by clamping negative eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Mat2 = [[f64; 2]; 2];

/// Result of projecting a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection2 {
    /// D⁺ = Σ max(λ, 0) v vᵀ.
    pub projected: Mat2,
    /// B with B Bᵀ = D⁺.
    pub factor: Mat2,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl Projection2 {
    /// Magnitude removed by the clamp.
    pub fn clamped_magnitude(&self) -> f64 {
        (-self.eig_min).max(0.0)
    }

    /// True when the negative part exceeds `floor` relative to the largest
    /// eigenvalue magnitude.
    pub fn is_clamped(&self, floor: f64) -> bool {
        self.eig_min < 0.0 && -self.eig_min > floor * self.eig_max.abs()
    }
}

/// Closed-form eigen-decomposition of [[a, b], [b, c]] with the clamp.
pub fn project_psd_2x2(d: Mat2) -> Projection2 {
    let (a, b, c) = (d[0][0], 0.5 * (d[0][1] + d[1][0]), d[1][1]);
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = (half_diff * half_diff + b * b).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    // Unit eigenvector (co, s) of l1, built from the better-conditioned row.
    let (vx, vy) = if half_diff >= 0.0 {
        (half_diff + r, b)
    } else {
        (b, r - half_diff)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    let (co, s) = if norm > 0.0 { (vx / norm, vy / norm) } else { (1.0, 0.0) };
    // v1 = (co, s) for l1, v2 = (−s, co) for l2
    let s1 = l1.max(0.0).sqrt();
    let s2 = l2.max(0.0).sqrt();
    let factor = [[co * s1, -s * s2], [s * s1, co * s2]];
    let p1 = l1.max(0.0);
    let p2 = l2.max(0.0);
    let projected = if l2 >= 0.0 {
        [[a, b], [b, c]]
    } else {
        [
        [p1 * co * co + p2 * s * s, (p1 - p2) * co * s],
        [(p1 - p2) * co * s, p1 * s * s + p2 * co * co],
        ]
    };
    Projection2 {
        projected,
        factor,
        eig_min: l2,
        eig_max: l1,
    }
}

/// General symmetric projection; returns (D⁺, B, clamped magnitude Σ|λ₋|).
pub fn project_psd(d: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let sym = (d + d.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped: f64 = eig.eigenvalues.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let projected = v * DMatrix::from_diagonal(&vals) * v.transpose();
    let factor = v * DMatrix::from_diagonal(&vals.map(f64::sqrt));
    (projected, factor, clamped)
}
