//! Smooth steps, the radial cutoff `ξ = Z(|y|/R0)`, plateau bumps and polynomial bells.

/// Logistic C^∞ step on `[0, 1]`: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
/// Returns the value and first two derivatives.
pub fn step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let g = 1.0 / t - 1.0 / (1.0 - t);
    let g1 = -1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t));
    let g2 = 2.0 / (t * t * t) - 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    let e = (-g.abs()).exp();
    let z = if g > 0.0 { e / (1.0 + e) } else { 1.0 / (1.0 + e) };
    let zz = e / ((1.0 + e) * (1.0 + e)); // z (1 - z)
    let d1 = -zz * g1;
    let d2 = -d1 * (1.0 - 2.0 * z) * g1 - zz * g2;
    (z, d1, d2)
}

/// Cutoff profile: `Z(r) = 0` for `r ≤ 1`, `1` for `r ≥ 2`.
pub fn cutoff_profile(r: f64) -> (f64, f64, f64) {
    step(r - 1.0)
}

/// `ξ(y) = Z(|y|/R0)` with gradient and Laplacian.
pub fn cutoff(y: [f64; 3], r0: f64) -> (f64, [f64; 3], f64) {
    let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    let (z, z1, z2) = cutoff_profile(r / r0);
    if z1 == 0.0 && z2 == 0.0 {
        return (z, [0.0; 3], 0.0);
    }
    let d = z1 / (r0 * r);
    let grad = [d * y[0], d * y[1], d * y[2]];
    let lap = z2 / (r0 * r0) + 2.0 * z1 / (r0 * r);
    (z, grad, lap)
}

/// Plateau bump on `[-1, 1]` (flat on `[-1/2, 1/2]`): a product of two steps.
pub fn bump(x: f64) -> (f64, f64, f64) {
    let w = 0.5;
    let (a, a1, a2) = step((x + 1.0) / w);
    let (b, b1, b2) = step((1.0 - x) / w);
    let (a1, a2) = (a1 / w, a2 / (w * w));
    let (b1, b2) = (-b1 / w, b2 / (w * w));
    (a * b, a1 * b + a * b1, a2 * b + 2.0 * a1 * b1 + a * b2)
}

/// Polynomial bell `(1 − x²)⁶` on `[−1, 1]`, 1 at the origin, with its
/// first two derivatives. It is C⁵ and its spectrum decays algebraically,
/// so grid sums of it and its derivatives converge quickly.
pub fn bell(x: f64) -> (f64, f64, f64) {
    let q = 1.0 - x * x;
    if q <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let q4 = q * q * q * q;
    (q4 * q * q, -12.0 * x * q4 * q, -12.0 * q4 * q + 120.0 * x * x * q4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_derivatives_match_differences() {
        let h = 1e-5;
        for i in 1..40 {
            let x = -0.975 + 0.05 * i as f64;
            let (_, d1, d2) = bell(x);
            assert!((d1 - (bell(x + h).0 - bell(x - h).0) / (2.0 * h)).abs() < 1e-8 * (1.0 + d1.abs()));
            assert!((d2 - (bell(x + h).1 - bell(x - h).1) / (2.0 * h)).abs() < 1e-7 * (1.0 + d2.abs()));
        }
        assert_eq!(bell(0.0).0, 1.0);
        assert_eq!(bell(1.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn plateaus() {
        assert_eq!(cutoff_profile(0.5).0, 0.0);
        assert_eq!(cutoff_profile(2.5).0, 1.0);
        assert!((cutoff_profile(1.5).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.93] {
            let h = 1e-5;
            let (_, d1, d2) = step(t);
            let fd1 = (step(t + h).0 - step(t - h).0) / (2.0 * h);
            let fd2 = (step(t + h).1 - step(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()));
        }
        for &x in &[-0.9, -0.6, 0.0, 0.55, 0.8] {
            let h = 1e-5;
            let (_, d1, d2) = bump(x);
            assert!((d1 - (bump(x + h).0 - bump(x - h).0) / (2.0 * h)).abs() < 1e-5);
            assert!((d2 - (bump(x + h).1 - bump(x - h).1) / (2.0 * h)).abs() < 1e-4 * (1.0 + d2.abs()));
        }
    }
}
