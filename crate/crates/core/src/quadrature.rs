//! Gauss-Legendre building blocks: composite and geometric panels, sphere
//! rules, and the face ("pyramid") parameterization of cube interiors and
//! exteriors.

use gauss_quad::GaussLegendre;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Gauss-Legendre rule of the given order mapped to `[a, b]`.
    pub fn gauss(order: usize, a: f64, b: f64) -> Self {
        let gl = GaussLegendre::new(order.max(2)).expect("order >= 2");
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for &(x, w) in gl.as_node_weight_pairs() {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
        Self { nodes, weights }
    }

    pub fn empty() -> Self {
        Self { nodes: Vec::new(), weights: Vec::new() }
    }

    pub fn extend(&mut self, other: Rule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }

    /// `panels` equal panels on `[a, b]`.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let mut r = Self::empty();
        let w = (b - a) / panels as f64;
        for p in 0..panels {
            r.extend(Self::gauss(order, a + p as f64 * w, a + (p + 1) as f64 * w));
        }
        r
    }

    /// Panels `[a q^i, a q^{i+1}]` for `i < panels`.
    pub fn geometric(a: f64, ratio: f64, panels: usize, order: usize) -> Self {
        let mut r = Self::empty();
        let mut lo = a;
        for _ in 0..panels {
            let hi = lo * ratio;
            r.extend(Self::gauss(order, lo, hi));
            lo = hi;
        }
        r
    }

    /// Panels accumulating geometrically towards zero on `(0, b]`.
    pub fn geometric_to_zero(b: f64, ratio: f64, panels: usize, order: usize) -> Self {
        let mut r = Self::empty();
        let mut hi = b;
        for _ in 0..panels {
            let lo = hi / ratio;
            r.extend(Self::gauss(order, lo, hi));
            hi = lo;
        }
        r
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Product rule on the unit sphere: Gauss in `cos θ`, uniform in `φ`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let polar = Rule::gauss(n_theta, -1.0, 1.0);
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        for (&z, &wz) in polar.nodes.iter().zip(&polar.weights) {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for ip in 0..n_phi {
                let phi = (ip as f64 + 0.5) * dphi;
                directions.push([rho * phi.cos(), rho * phi.sin(), z]);
                weights.push(wz * dphi);
            }
        }
        Self { directions, weights }
    }
}

/// Points `p` on the surface of the cube `|p|_∞ = a` with weights such that
/// `∫_{t0 |p| ... } F dx = Σ w ∫ t² F(t p) dt` (the Jacobian of `x = t p` is
/// `a t²` per face).
#[derive(Debug, Clone)]
pub struct CubeFaces {
    pub half_width: f64,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl CubeFaces {
    pub fn new(half_width: f64, panels: usize, order: usize) -> Self {
        let a = half_width;
        let rule = Rule::composite(-a, a, panels, order);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
                    for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
                        let mut p = [0.0; 3];
                        p[axis] = sign * a;
                        p[(axis + 1) % 3] = u;
                        p[(axis + 2) % 3] = v;
                        points.push(p);
                        weights.push(a * wu * wv);
                    }
                }
            }
        }
        Self { half_width, points, weights }
    }

    /// `∫_{cube} F` via `t ∈ (0, 1]` rays; `t_rule` lives on `(0, 1]`.
    pub fn integrate_inside<F: Fn([f64; 3]) -> f64>(&self, t_rule: &Rule, f: F) -> f64 {
        let mut total = 0.0;
        for (p, &w) in self.points.iter().zip(&self.weights) {
            let ray = t_rule.integrate(|t| t * t * f([t * p[0], t * p[1], t * p[2]]));
            total += w * ray;
        }
        total
    }

    /// `∫_{R³ \ cube} F` via `t ∈ [1, ∞)` rays; `t_rule` lives on `[1, t_max]`.
    pub fn integrate_outside<F: Fn([f64; 3]) -> f64>(&self, t_rule: &Rule, f: F) -> f64 {
        self.integrate_inside(t_rule, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let r = Rule::gauss(8, 0.0, 2.0);
        let v = r.integrate(|x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_area() {
        let s = SphereRule::new(16, 32);
        let a: f64 = s.weights.iter().sum();
        assert!((a - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn cube_volume_from_faces() {
        let faces = CubeFaces::new(1.5, 1, 4);
        let t = Rule::gauss(4, 0.0, 1.0);
        let v = faces.integrate_inside(&t, |_| 1.0);
        assert!((v - 27.0).abs() < 1e-12);
    }
}
