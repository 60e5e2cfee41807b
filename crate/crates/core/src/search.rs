//! One-dimensional scalar search used by the duration and cooling-rate sweeps.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// `f` must be unimodal on the bracket. Stops when the bracket is narrower
/// than `tol` (absolute) and returns `(argmax, max)`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // bounded so a pathological tol cannot spin forever
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes `f` over `[lo, hi]`: evaluate on a uniform grid of `points`
/// nodes, then refine the bracket around the best node by golden section.
pub fn grid_then_golden_max<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(points >= 3, "grid needs at least three nodes");
    let h = (hi - lo) / (points - 1) as f64;
    let (best, _) = (0..points)
        .map(|i| (i, f(lo + i as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let a = lo + best.saturating_sub(1) as f64 * h;
    let b = lo + (best + 1).min(points - 1) as f64 * h;
    let (x, v) = golden_section_max(&f, a, b, tol);
    let edge = lo + best as f64 * h;
    let fe = f(edge);
    if fe > v {
        (edge, fe)
    } else {
        (x, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 4.0, 1e-10);
        // a flat peak only pins x to about sqrt(machine epsilon)
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn grid_handles_multimodal() {
        // two peaks; the taller one is at 0.8
        let f = |x: f64| (-(x - 0.2f64).powi(2) * 200.0).exp() + 1.5 * (-(x - 0.8f64).powi(2) * 200.0).exp();
        let (x, _) = grid_then_golden_max(f, 0.0, 1.0, 1000, 1e-12);
        assert_abs_diff_eq!(x, 0.8, epsilon = 1e-6);
    }

    #[test]
    fn grid_handles_boundary_peak() {
        let (x, v) = grid_then_golden_max(|x| x, 0.0, 1.0, 11, 1e-12);
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
    }
}
