//! Uniform Catmull-Rom interpolation over dual-valued control points.

use crate::autodiff::Dual;

fn weights(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ]
}

fn weight_slopes(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-1.0 + 4.0 * t - 3.0 * t2),
        0.5 * (-10.0 * t + 9.0 * t2),
        0.5 * (1.0 + 8.0 * t - 9.0 * t2),
        0.5 * (-2.0 * t + 3.0 * t2),
    ]
}

/// Segment index and local parameter for global parameter `u` in `[0, n-1]`.
fn locate(n: usize, u: f64) -> (usize, f64) {
    let u = u.clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n.saturating_sub(2));
    (i, u - i as f64)
}

fn control(points: &[Dual], i: isize) -> &Dual {
    &points[i.clamp(0, points.len() as isize - 1) as usize]
}

/// Evaluates the open spline through `points` (endpoints duplicated) at a
/// constant parameter `u` in `[0, n-1]`; passes through `points[k]` at `u = k`.
pub fn catmull_rom(points: &[Dual], u: f64) -> Dual {
    assert!(!points.is_empty(), "spline needs control points");
    if points.len() == 1 {
        return points[0].clone();
    }
    let (i, t) = locate(points.len(), u);
    let w = weights(t);
    let i = i as isize;
    (0..4).fold(Dual::constant(0.0), |acc, k| {
        acc + control(points, i - 1 + k as isize).scale(w[k])
    })
}

/// Same as [`catmull_rom`] but with a differentiable parameter.
pub fn catmull_rom_at(points: &[Dual], u: &Dual) -> Dual {
    assert!(points.len() >= 2, "spline needs two control points");
    let (i, t) = locate(points.len(), u.value());
    let w = weights(t);
    let dw = weight_slopes(t);
    let i = i as isize;
    let mut value = Dual::constant(0.0);
    let mut slope = Dual::constant(0.0);
    for k in 0..4 {
        let c = control(points, i - 1 + k as isize);
        value += &c.scale(w[k]);
        slope += &c.scale(dw[k]);
    }
    // d/du picks up the control-point slope times u's own partials.
    let coupling = Dual::new(0.0, u.partials().iter().map(|p| p * slope.value()).collect());
    value + coupling
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Dual> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| Dual::variable(x, i, v.len()))
            .collect()
    }

    #[test]
    fn interpolates_controls() {
        let p = pts(&[1.0, 3.0, 2.0, 5.0]);
        for (k, c) in p.iter().enumerate() {
            let v = catmull_rom(&p, k as f64);
            assert!((v.value() - c.value()).abs() < 1e-12);
            assert!((v.partial(k) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_controls_stay_constant() {
        let p = pts(&[0.7; 5]);
        for s in 0..=40 {
            let v = catmull_rom(&p, s as f64 * 0.1);
            assert!((v.value() - 0.7).abs() < 1e-12);
            let sum: f64 = v.partials().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "partition of unity");
        }
    }

    #[test]
    fn dual_parameter_matches_finite_difference() {
        let p = pts(&[1.0, 3.0, 2.0, 5.0]);
        let u0 = 1.37;
        let u = Dual::new(u0, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let v = catmull_rom_at(&p, &u);
        let h = 1e-6;
        let fd = (catmull_rom(&p, u0 + h).value() - catmull_rom(&p, u0 - h).value()) / (2.0 * h);
        assert!((v.partial(4) - fd).abs() < 1e-6);
        assert!((v.value() - catmull_rom(&p, u0).value()).abs() < 1e-14);
    }
}
