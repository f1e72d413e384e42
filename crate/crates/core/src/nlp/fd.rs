//! Finite-difference helpers shared by the dense defaults and the
//! transcription.

/// Difference rule for first derivatives, with a relative step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdRule {
    Forward(f64),
    Central(f64),
}

impl FdRule {
    pub fn step_at(&self, v: f64) -> f64 {
        let rel = match *self {
            FdRule::Forward(s) | FdRule::Central(s) => s,
        };
        rel * v.abs().max(1.0)
    }
}

/// Gradient of a scalar function. `z` is used as scratch and restored.
pub fn gradient(f: &dyn Fn(&[f64]) -> f64, z: &mut [f64], rule: FdRule, out: &mut [f64]) {
    let f0 = match rule {
        FdRule::Forward(_) => f(z),
        FdRule::Central(_) => 0.0,
    };
    for i in 0..z.len() {
        let zi = z[i];
        let h = rule.step_at(zi);
        z[i] = zi + h;
        let fp = f(z);
        out[i] = match rule {
            FdRule::Forward(_) => (fp - f0) / h,
            FdRule::Central(_) => {
                z[i] = zi - h;
                (fp - f(z)) / (2.0 * h)
            }
        };
        z[i] = zi;
    }
}

/// Dense row-major Jacobian (`rows x z.len()`) of a vector function.
pub fn jacobian(
    f: &dyn Fn(&[f64], &mut [f64]),
    rows: usize,
    z: &mut [f64],
    rule: FdRule,
) -> Vec<f64> {
    let dim = z.len();
    let mut jac = vec![0.0; rows * dim];
    if rows == 0 {
        return jac;
    }
    let mut f0 = vec![0.0; rows];
    let mut fp = vec![0.0; rows];
    let mut fm = vec![0.0; rows];
    if let FdRule::Forward(_) = rule {
        f(z, &mut f0);
    }
    for i in 0..dim {
        let zi = z[i];
        let h = rule.step_at(zi);
        z[i] = zi + h;
        f(z, &mut fp);
        match rule {
            FdRule::Forward(_) => {
                for r in 0..rows {
                    jac[r * dim + i] = (fp[r] - f0[r]) / h;
                }
            }
            FdRule::Central(_) => {
                z[i] = zi - h;
                f(z, &mut fm);
                for r in 0..rows {
                    jac[r * dim + i] = (fp[r] - fm[r]) / (2.0 * h);
                }
            }
        }
        z[i] = zi;
    }
    jac
}

/// Lower triangle of the Hessian of a scalar function by second-order
/// central differences, as `(i, j, value)` with `i >= j`. Entries that come
/// out exactly zero are dropped so that separable functions keep their
/// sparsity.
pub fn hessian(f: &mut dyn FnMut(&[f64]) -> f64, z: &mut [f64], rel_step: f64) -> Vec<(usize, usize, f64)> {
    let dim = z.len();
    let steps: Vec<f64> = z.iter().map(|v| rel_step * v.abs().max(1.0)).collect();
    let f0 = f(z);
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    let mut out = Vec::new();
    for i in 0..dim {
        let zi = z[i];
        z[i] = zi + steps[i];
        plus[i] = f(z);
        z[i] = zi - steps[i];
        minus[i] = f(z);
        z[i] = zi;
        let d = (plus[i] - 2.0 * f0 + minus[i]) / (steps[i] * steps[i]);
        if d != 0.0 {
            out.push((i, i, d));
        }
    }
    for i in 0..dim {
        for j in 0..i {
            let (zi, zj) = (z[i], z[j]);
            let (hi, hj) = (steps[i], steps[j]);
            z[i] = zi + hi;
            z[j] = zj + hj;
            let fpp = f(z);
            z[j] = zj - hj;
            let fpm = f(z);
            z[i] = zi - hi;
            let fmm = f(z);
            z[j] = zj + hj;
            let fmp = f(z);
            z[i] = zi;
            z[j] = zj;
            // grouped so that a function independent of either variable gives an exact zero
            let d = ((fpp - fmp) - (fpm - fmm)) / (4.0 * hi * hj);
            if d != 0.0 {
                out.push((i, j, d));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_gradient_of_quadratic_is_exact_to_rounding() {
        let f = |z: &[f64]| z[0] * z[0] + 3.0 * z[0] * z[1];
        let mut z = vec![1.0, 2.0];
        let mut g = vec![0.0; 2];
        gradient(&f, &mut z, FdRule::Central(1e-6), &mut g);
        assert!((g[0] - 8.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
        assert_eq!(z, vec![1.0, 2.0]);
    }

    #[test]
    fn hessian_drops_structural_zeros() {
        let mut f = |z: &[f64]| z[0] * z[0] * z[2].exp();
        let mut z = vec![0.5, 0.3, 0.1];
        let h = hessian(&mut f, &mut z, 1e-4);
        assert!(h.iter().all(|&(i, j, _)| i != 1 && j != 1));
        let h00 = h.iter().find(|e| e.0 == 0).unwrap().2;
        assert!((h00 - 2.0 * 0.1f64.exp()).abs() < 1e-6);
    }
}
