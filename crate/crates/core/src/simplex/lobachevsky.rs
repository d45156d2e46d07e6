//! The Lobachevsky function and ideal tetrahedron volumes.

use std::f64::consts::PI;
use std::sync::OnceLock;

const TERMS: usize = 32;

/// `zeta(2k) / (k (2k+1) (2 pi)^{2k})` for k = 1..TERMS.
fn clausen_coeffs() -> &'static [f64] {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| {
        let two_pi_sq = (2.0 * PI) * (2.0 * PI);
        let mut out = Vec::with_capacity(TERMS);
        let mut pow = 1.0;
        for k in 1..=TERMS {
            pow *= two_pi_sq;
            let zeta = match k {
                1 => PI * PI / 6.0,
                2 => PI.powi(4) / 90.0,
                3 => PI.powi(6) / 945.0,
                _ => {
                    let e = 2 * k as i32;
                    // Summed from the small terms up; the tail is below 1e-20.
                    (1..=2000).rev().map(|j| (j as f64).powi(-e)).sum()
                }
            };
            let kf = k as f64;
            out.push(zeta / (kf * (2.0 * kf + 1.0) * pow));
        }
        out
    })
}

/// Clausen function `Cl2(x) = sum sin(kx)/k^2`.
pub fn clausen2(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x - two_pi * (x / two_pi).round();
    if y > PI {
        y -= two_pi;
    }
    if y == 0.0 {
        return 0.0;
    }
    let y2 = y * y;
    let mut pow = y;
    let mut tail = 0.0;
    for c in clausen_coeffs() {
        pow *= y2;
        tail += c * pow;
    }
    y - y * y.abs().ln() + tail
}

/// `L(theta) = -int_0^theta log|2 sin u| du = Cl2(2 theta) / 2`; odd and pi-periodic.
pub fn lobachevsky(theta: f64) -> f64 {
    0.5 * clausen2(2.0 * theta)
}

/// Derivative `L'(theta) = -log|2 sin theta|`.
pub fn lobachevsky_derivative(theta: f64) -> f64 {
    -(2.0 * theta.sin()).abs().ln()
}

/// Volume of the ideal tetrahedron with dihedral angles `alpha, beta, gamma`.
pub fn ideal_tet_volume(alpha: f64, beta: f64, gamma: f64) -> Result<f64, super::SimplexError> {
    if [alpha, beta, gamma].iter().any(|a| !(a.is_finite() && *a >= -1e-12)) {
        return Err(super::SimplexError::AngleSum(alpha + beta + gamma));
    }
    if (alpha + beta + gamma - PI).abs() > 1e-9 {
        return Err(super::SimplexError::AngleSum(alpha + beta + gamma));
    }
    Ok((lobachevsky(alpha) + lobachevsky(beta) + lobachevsky(gamma)).max(0.0))
}

/// Volume of the regular ideal tetrahedron, `3 L(pi/3)`.
pub fn regular_ideal_tet_volume() -> f64 {
    3.0 * lobachevsky(PI / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_and_symmetry() {
        assert_eq!(lobachevsky(0.0), 0.0);
        assert!(lobachevsky(PI / 2.0).abs() < 1e-15);
        for t in [0.1, 0.7, 1.3, 2.9] {
            assert!((lobachevsky(-t) + lobachevsky(t)).abs() < 1e-15);
            assert!((lobachevsky(t + PI) - lobachevsky(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_tetrahedron_is_flat() {
        assert!(ideal_tet_volume(0.0, 1.1, PI - 1.1).unwrap().abs() < 1e-12);
        assert!(ideal_tet_volume(1.0, 1.0, 1.0).is_err());
    }
}
