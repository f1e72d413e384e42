use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::front::{LowerLevel, LowerSolution};
use crate::nlp::SolveStatus;

const GRID: usize = 20001;

/// Global minimizer of a one-dimensional function on `[lo, hi]`: best grid
/// point, then golden-section search between its neighbours.
fn grid_then_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let step = (hi - lo) / (GRID - 1) as f64;
    let (mut best, mut fbest) = (lo, f(lo));
    for k in 1..GRID {
        let x = lo + step * k as f64;
        let v = f(x);
        if v < fbest {
            best = x;
            fbest = v;
        }
    }
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    if f(x) <= fbest {
        x
    } else {
        best
    }
}

fn solution(objectives: [f64; 2]) -> LowerSolution {
    LowerSolution { objectives: objectives.to_vec(), status: SolveStatus::Success, detail: None }
}

fn chebyshev_value(phi: [f64; 2], w: f64, utopia: [f64; 2]) -> f64 {
    (w * (phi[0] - utopia[0])).max((1.0 - w) * (phi[1] - utopia[1]))
}

/// `phi = (x^2, (x - 2)^2)` for `x` in `[-5, 5]`: a convex front.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConvexParabolas;

impl ConvexParabolas {
    pub fn objectives(x: f64) -> [f64; 2] {
        [x * x, (x - 2.0) * (x - 2.0)]
    }

    /// Chebyshev minimizer in decision space.
    pub fn argmin(w: f64, utopia: [f64; 2]) -> f64 {
        grid_then_golden(|x| chebyshev_value(Self::objectives(x), w, utopia), -5.0, 5.0)
    }
}

impl LowerLevel for ConvexParabolas {
    fn ideal(&self, i: usize) -> Result<LowerSolution> {
        match i {
            0 => Ok(solution(Self::objectives(0.0))),
            1 => Ok(solution(Self::objectives(2.0))),
            _ => Err(Error::InvalidConfig(format!("objective index {i} out of range"))),
        }
    }

    fn chebyshev(&self, w: f64, utopia: [f64; 2], _warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        Ok(solution(Self::objectives(Self::argmin(w, utopia))))
    }

    fn weighted_sum(&self, w: f64, _warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        Ok(solution(Self::objectives(2.0 * (1.0 - w))))
    }
}

/// Outcome set `{(y1, y2) : y2 >= g(y1), 0 <= y1 <= 1}` with
/// `g(y1) = 1 - y1 - 0.3 sin(2 pi y1)`, whose lower boundary has a concave
/// stretch that weighted sums cannot reach.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonconvexFront;

impl NonconvexFront {
    pub fn g(y1: f64) -> f64 {
        1.0 - y1 - 0.3 * (2.0 * PI * y1).sin()
    }

    pub fn objectives(y1: f64) -> [f64; 2] {
        [y1, Self::g(y1)]
    }
}

impl LowerLevel for NonconvexFront {
    fn ideal(&self, i: usize) -> Result<LowerSolution> {
        match i {
            0 => Ok(solution(Self::objectives(0.0))),
            1 => Ok(solution(Self::objectives(grid_then_golden(Self::g, 0.0, 1.0)))),
            _ => Err(Error::InvalidConfig(format!("objective index {i} out of range"))),
        }
    }

    fn chebyshev(&self, w: f64, utopia: [f64; 2], _warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        let y = grid_then_golden(|y| chebyshev_value(Self::objectives(y), w, utopia), 0.0, 1.0);
        Ok(solution(Self::objectives(y)))
    }

    fn weighted_sum(&self, w: f64, _warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        let y = grid_then_golden(|y| w * y + (1.0 - w) * Self::g(y), 0.0, 1.0);
        Ok(solution(Self::objectives(y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabolas_balanced_weight() {
        let x = ConvexParabolas::argmin(0.5, [0.0, 0.0]);
        assert!((x - 1.0).abs() < 1e-9);
        let s = ConvexParabolas.chebyshev(0.5, [0.0, 0.0], None).unwrap();
        assert!((s.objectives[0] - 1.0).abs() < 1e-8 && (s.objectives[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn heavy_first_weight_favours_first_objective() {
        let a = ConvexParabolas.chebyshev(0.9, [0.0, 0.0], None).unwrap();
        let b = ConvexParabolas.chebyshev(0.99, [0.0, 0.0], None).unwrap();
        assert!(b.objectives[0] < a.objectives[0] && a.objectives[0] < 1.0);
    }

    #[test]
    fn nonconvex_ideals() {
        let s = NonconvexFront.ideal(1).unwrap();
        assert!((s.objectives[0] - 1.0).abs() < 1e-9 && s.objectives[1].abs() < 1e-9);
        assert_eq!(NonconvexFront.ideal(0).unwrap().objectives, vec![0.0, 1.0]);
    }
}
