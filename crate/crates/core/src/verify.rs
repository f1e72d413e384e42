//! A-posteriori checks of solved controls against the sign of their
//! switching functions, built from the adjoint estimates.
//!
//! Adjoints recovered from defect multipliers carry an unknown positive
//! factor, so every verdict here depends on signs (or on ratios of
//! adjoints) only.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::Bounds;
use crate::problems::TbParameters;
use crate::scalarize::SolveResult;

/// Relative band around a bound inside which a control counts as saturated.
pub const BANG_TOL: f64 = 0.02;

/// Minimum share of nodes, away from switches, whose control must follow
/// the switching law.
pub const MIN_AGREEMENT: f64 = 0.95;

/// Saturation pattern of one control channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BangBang {
    /// Sequence of bound values the control rests on, e.g. `[1, -1, 1]`.
    pub structure: Vec<f64>,
    pub switch_times: Vec<f64>,
    /// Share of nodes that are neither saturated nor next to a switch.
    pub interior_fraction: f64,
    pub is_bang_bang: bool,
}

impl BangBang {
    pub fn switchings(&self) -> usize {
        self.switch_times.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Lo,
    Hi,
    Interior,
}

/// Classifies every node as resting on the lower bound, the upper bound or
/// neither, and extracts switch times by interpolating where the control
/// crosses the middle of its range.
pub fn detect_bang_bang(times: &[f64], controls: &[f64], bounds: Bounds, tol: f64) -> BangBang {
    let band = tol * bounds.width();
    let mid = bounds.mid();
    let level = |u: f64| {
        if u <= bounds.lo + band {
            Level::Lo
        } else if u >= bounds.hi - band {
            Level::Hi
        } else {
            Level::Interior
        }
    };
    let value = |l: Level| if l == Level::Lo { bounds.lo } else { bounds.hi };

    let mut structure = Vec::new();
    let mut switch_times = Vec::new();
    let mut last: Option<(Level, usize)> = None;
    for (k, &u) in controls.iter().enumerate() {
        let l = level(u);
        if l == Level::Interior {
            continue;
        }
        match last {
            None => structure.push(value(l)),
            Some((prev, i)) if prev != l => {
                structure.push(value(l));
                switch_times.push(crossing(times, controls, i, k, mid));
            }
            _ => {}
        }
        last = Some((l, k));
    }

    let h = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let stray = controls
        .iter()
        .zip(times)
        .filter(|(u, t)| level(**u) == Level::Interior && switch_times.iter().all(|s| (*t - s).abs() > 2.0 * h))
        .count();
    let interior_fraction = if controls.is_empty() { 0.0 } else { stray as f64 / controls.len() as f64 };
    BangBang { structure, switch_times, interior_fraction, is_bang_bang: interior_fraction <= 0.05 }
}

/// First crossing of `level` by the piecewise linear `values` between
/// nodes `i` and `j`.
fn crossing(times: &[f64], values: &[f64], i: usize, j: usize, level: f64) -> f64 {
    for k in i..j {
        let (a, b) = (values[k] - level, values[k + 1] - level);
        if a == 0.0 {
            return times[k];
        }
        if a * b <= 0.0 {
            return times[k] + (times[k + 1] - times[k]) * a / (a - b);
        }
    }
    0.5 * (times[i] + times[j])
}

/// Times where `sigma` changes sign, linearly interpolated.
pub fn sign_changes(times: &[f64], sigma: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for k in 0..sigma.len() {
        if sigma[k] == 0.0 {
            continue;
        }
        if let Some(i) = last {
            if sigma[i].signum() != sigma[k].signum() {
                out.push(crossing(times, sigma, i, k, 0.0));
            }
        }
        last = Some(k);
    }
    out
}

/// One control channel checked against its switching function.
#[derive(Debug, Clone, Serialize)]
pub struct SwitchingProfile {
    pub channel: usize,
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Sign changes of `sigma`.
    pub sigma_switch_times: Vec<f64>,
    pub control: BangBang,
    /// Share of nodes more than two steps from any control switch whose
    /// control matches the law.
    pub agreement: f64,
    /// Every control switch lies within two steps of a sign change of sigma.
    pub switches_match_sigma: bool,
}

impl SwitchingProfile {
    fn build(
        channel: usize,
        times: Vec<f64>,
        sigma: Vec<f64>,
        controls: &[f64],
        bounds: Bounds,
        agrees: impl Fn(usize) -> bool,
    ) -> Self {
        let control = detect_bang_bang(&times, controls, bounds, BANG_TOL);
        let sigma_switch_times = sign_changes(&times, &sigma);
        let h = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let near = |t: f64, set: &[f64]| set.iter().any(|s| (t - s).abs() <= 2.0 * h);
        let (mut hit, mut total) = (0usize, 0usize);
        for (k, &t) in times.iter().enumerate() {
            if near(t, &control.switch_times) {
                continue;
            }
            total += 1;
            if agrees(k) {
                hit += 1;
            }
        }
        let agreement = if total == 0 { 1.0 } else { hit as f64 / total as f64 };
        let switches_match_sigma = control.switch_times.iter().all(|&t| near(t, &sigma_switch_times));
        Self { channel, times, sigma, sigma_switch_times, control, agreement, switches_match_sigma }
    }

    pub fn passed(&self) -> bool {
        self.control.is_bang_bang && self.agreement >= MIN_AGREEMENT && self.switches_match_sigma
    }
}

/// Verdict for one solve.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub problem: String,
    pub w: f64,
    pub channels: Vec<SwitchingProfile>,
    /// Relative spread `(max - min) / |mean|` of adjoints that should be
    /// constant in time.
    pub constant_adjoint_spread: Vec<f64>,
    /// Per channel, the largest control value on the final delay window.
    pub tail_max: Vec<f64>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

fn adjoints(result: &SolveResult) -> Result<&[Vec<f64>]> {
    if result.adjoints.is_empty() || result.adjoints.len() != result.trajectory.times.len() {
        return Err(Error::MissingMultipliers);
    }
    Ok(&result.adjoints)
}

fn mean_and_spread(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count().max(1) as f64;
    let mean = v.clone().sum::<f64>() / n;
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let spread = if mean == 0.0 { f64::INFINITY } else { (hi - lo) / mean.abs() };
    (mean, spread)
}

/// Rayleigh check. For `w >= w_f` the cost adjoint vanishes and
/// `sigma = 16 lambda_2` with `u = -sign(sigma)`; below `w_f`,
/// `sigma = 2 lambda_2 / mean(lambda_3)` and `u = clamp(-sigma, -1, 1)`.
pub fn rayleigh_switching(result: &SolveResult, w: f64, w_f: f64) -> Result<VerificationReport> {
    let lam = adjoints(result)?;
    let traj = &result.trajectory;
    let u = traj.control_column(0);
    let bounds = Bounds::new(-1.0, 1.0);
    let (l3, spread) = mean_and_spread(lam.iter().map(|l| l[2]));
    let bang = w >= w_f;

    let sigma: Vec<f64> = if bang {
        lam.iter().map(|l| 16.0 * l[1]).collect()
    } else {
        let scale = lam.iter().fold(0.0f64, |m, l| m.max(l[1].abs()));
        if !(l3.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::SingularNormalization(l3));
        }
        lam.iter().map(|l| 2.0 * l[1] / l3).collect()
    };
    let band = BANG_TOL * bounds.width();
    let agrees = |k: usize| {
        let s = sigma[k];
        if bang {
            s == 0.0 || (s < 0.0 && u[k] >= bounds.hi - band) || (s > 0.0 && u[k] <= bounds.lo + band)
        } else {
            (u[k] + s.clamp(-1.0, 1.0)).abs() <= 2.0 * band
        }
    };
    let mut profile = SwitchingProfile::build(0, traj.times.clone(), sigma.clone(), &u, bounds, agrees);
    if !bang {
        // interior arcs are part of the law here
        profile.control.is_bang_bang = true;
    }
    let passed = profile.passed();
    Ok(VerificationReport {
        problem: "rayleigh".into(),
        w,
        channels: vec![profile],
        constant_adjoint_spread: vec![spread],
        tail_max: vec![],
        passed,
    })
}

/// TB check with `sigma_k(t) = a_1k l5 + a_2k l6 - eps_k l_Lk(t + d_k) L_k(t + d_k)`,
/// where the lookahead term is dropped once `t + d_k` passes the horizon.
/// The law is `u_k = 1` where `sigma_k < 0` and `u_k = 0` where it is positive.
pub fn tb_switching(result: &SolveResult, w: f64, params: &TbParameters) -> Result<VerificationReport> {
    let lam = adjoints(result)?;
    let traj = &result.trajectory;
    let h = traj.step();
    let last = traj.times.len() - 1;
    let (l5, s5) = mean_and_spread(lam.iter().map(|l| l[4]));
    let (l6, s6) = mean_and_spread(lam.iter().map(|l| l[5]));
    let bounds = Bounds::new(0.0, 1.0);
    let band = BANG_TOL * bounds.width();

    let mut channels = Vec::new();
    let mut tail_max = Vec::new();
    let delays = [params.d_u1, params.d_u2];
    let eps = [params.eps1, params.eps2];
    // L1 and L2 are states 1 and 3
    let latent = [1, 3];
    for k in 0..2 {
        let off = (delays[k] / h).round() as usize;
        let base = params.a[0][k] * l5 + params.a[1][k] * l6;
        let sigma: Vec<f64> = (0..=last)
            .map(|j| {
                let i = j + off;
                if i > last {
                    base
                } else {
                    base - eps[k] * lam[i][latent[k]] * traj.states[i][latent[k]]
                }
            })
            .collect();
        let u = traj.control_column(k);
        let agrees = |j: usize| {
            let s = sigma[j];
            s == 0.0 || (s < 0.0 && u[j] >= bounds.hi - band) || (s > 0.0 && u[j] <= bounds.lo + band)
        };
        let tail_start = last.saturating_sub(off);
        tail_max.push(u[tail_start..].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)));
        channels.push(SwitchingProfile::build(k, traj.times.clone(), sigma.clone(), &u, bounds, agrees));
    }
    let passed = channels.iter().all(|c| c.passed()) && tail_max.iter().all(|m| *m < 0.01);
    Ok(VerificationReport {
        problem: "tuberculosis".into(),
        w,
        channels,
        constant_adjoint_spread: vec![s5, s6],
        tail_max,
        passed,
    })
}
