//! Command-line workflows: ideal costs, single scalarized solves, front
//! sweeps, optimization over the front and bang-bang verification.
//!
//! Every flag has a config-file twin; flags override the file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{
    essential_interval, optimize_over_front, sweep_front, weight_grid, write_front_csv, BisectionOptions,
    BisectionReport, FrontEvaluator, FrontPoint, LowerLevel, LowerSolution, MasterObjective, OcpLowerLevel,
    PointStatus, Termination,
};
use crate::nlp::SolverOptions;
use crate::problems::{
    rayleigh, rayleigh_config, rayleigh_solver_options, tb_config, tb_solver_options, tuberculosis_with,
    ConvexParabolas, NonconvexFront, TbParameters, RAYLEIGH_UTOPIA, TB_UTOPIA,
};
use crate::scalarize::{utopia_vector, SolveResult};
use crate::transcription::{Scheme, TranscriptionConfig};
use crate::verify::{rayleigh_switching, tb_switching, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Rayleigh,
    Tb,
    ToyConvex,
    ToyNonconvex,
}

/// Weight grid for `sweep`; the bounds default to the essential interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: usize,
    /// Write a verification report per point.
    pub verify: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { lo: None, hi: None, points: 21, verify: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// TB transmission coefficient.
    pub beta: Option<f64>,
    /// Mesh intervals; 1000 for Rayleigh and 500 for TB when unset.
    pub grid_n: Option<usize>,
    pub scheme: Scheme,
    pub delta: f64,
    pub eps: f64,
    pub k_max: usize,
    pub eta: Option<[f64; 2]>,
    /// Utopia vector; the problem's default choice when unset and `eta`
    /// is unset too.
    pub utopia: Option<[f64; 2]>,
    pub weight: Option<f64>,
    pub sweep: SweepSpec,
    pub out: PathBuf,
    pub solver: Option<SolverOptions>,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BisectionOptions::default();
        Self {
            problem: ProblemKind::Rayleigh,
            beta: None,
            grid_n: None,
            scheme: Scheme::Trapezoidal,
            delta: b.delta,
            eps: b.eps,
            k_max: b.k_max,
            eta: None,
            utopia: None,
            weight: None,
            sweep: SweepSpec::default(),
            out: PathBuf::from("out"),
            solver: None,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.bisection().validate()?;
        if let Some(w) = self.weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!("weight {w} is outside [0, 1]")));
            }
        }
        if self.grid_n == Some(0) {
            return Err(Error::InvalidConfig("grid_n must be positive".into()));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::InvalidConfig(format!("beta must be positive, got {b}")));
            }
        }
        if let Some(e) = self.eta {
            if e.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidConfig("eta must be positive".into()));
            }
        }
        if self.sweep.points == 0 {
            return Err(Error::InvalidConfig("a sweep needs at least one point".into()));
        }
        if let (Some(lo), Some(hi)) = (self.sweep.lo, self.sweep.hi) {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidConfig(format!("sweep bounds [{lo}, {hi}] must lie in [0, 1]")));
            }
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        self.grid_n.unwrap_or(match self.problem {
            ProblemKind::Tb => 500,
            _ => 1000,
        })
    }

    /// The problem's default utopia is used unless `eta` or `utopia` is set.
    fn utopia_override(&self) -> Option<[f64; 2]> {
        if self.utopia.is_some() || self.eta.is_some() {
            return self.utopia;
        }
        match self.problem {
            ProblemKind::Rayleigh => Some(RAYLEIGH_UTOPIA),
            ProblemKind::Tb => Some(TB_UTOPIA),
            _ => None,
        }
    }

    pub fn bisection(&self) -> BisectionOptions {
        BisectionOptions {
            delta: self.delta,
            eps: self.eps,
            k_max: self.k_max,
            eta: self.eta,
            utopia: self.utopia_override(),
            parallel: self.parallel,
        }
    }

    fn transcription(&self) -> TranscriptionConfig {
        let base = match self.problem {
            ProblemKind::Tb => tb_config(self.intervals()),
            _ => rayleigh_config(self.intervals()),
        };
        TranscriptionConfig { scheme: self.scheme, ..base }
    }

    fn tb_parameters(&self) -> TbParameters {
        TbParameters { beta: self.beta.unwrap_or(TbParameters::default().beta), ..TbParameters::default() }
    }
}

/// A built problem: its lower level and master objective.
pub struct Instance {
    pub lower: Box<dyn LowerLevel>,
    pub master: MasterObjective,
    pub kind: ProblemKind,
}

impl Instance {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let ocp = |problem, master, options: SolverOptions| -> Instance {
            let options = cfg.solver.unwrap_or(options);
            Instance {
                lower: Box::new(OcpLowerLevel::new(problem, cfg.transcription(), options)),
                master,
                kind: cfg.problem,
            }
        };
        Ok(match cfg.problem {
            ProblemKind::Rayleigh => {
                let (p, m) = rayleigh();
                ocp(p, m, rayleigh_solver_options())
            }
            ProblemKind::Tb => {
                let (p, m) = tuberculosis_with(cfg.tb_parameters())?;
                ocp(p, m, tb_solver_options())
            }
            ProblemKind::ToyConvex => Instance {
                lower: Box::new(ConvexParabolas),
                master: MasterObjective::weighted_squared_norm(vec![1.0, 1.0])?,
                kind: cfg.problem,
            },
            ProblemKind::ToyNonconvex => Instance {
                lower: Box::new(NonconvexFront),
                master: MasterObjective::weighted_squared_norm(vec![1.0, 1.0])?,
                kind: cfg.problem,
            },
        })
    }
}

/// Boundary points of the front and what follows from them.
#[derive(Debug, Clone, Serialize)]
pub struct IdealReport {
    pub problem: ProblemKind,
    pub ideal: [f64; 2],
    pub min_phi1: [f64; 2],
    pub min_phi2: [f64; 2],
    pub utopia: [f64; 2],
    pub essential_interval: (f64, f64),
    pub display: Display,
}

/// Four-significant-figure strings for quick reading.
#[derive(Debug, Clone, Serialize)]
pub struct Display(pub BTreeMap<String, String>);

fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.digits$}")
}

fn display(pairs: &[(&str, f64)]) -> Display {
    Display(pairs.iter().map(|(k, v)| (k.to_string(), sig4(*v))).collect())
}

struct Boundary {
    s1: LowerSolution,
    s2: LowerSolution,
    utopia: [f64; 2],
    interval: (f64, f64),
}

fn boundary(inst: &Instance, cfg: &RunConfig) -> Result<Boundary> {
    let s1 = inst.lower.ideal(0)?;
    let s2 = inst.lower.ideal(1)?;
    let ideal = [s1.objectives[0], s2.objectives[1]];
    let b = cfg.bisection();
    let u = utopia_vector(&ideal, b.eta.as_ref().map(|e| &e[..]), b.utopia.as_ref().map(|u| &u[..]))?;
    let utopia = [u[0], u[1]];
    let interval = essential_interval(pair(&s1), pair(&s2), utopia)?;
    Ok(Boundary { s1, s2, utopia, interval })
}

fn pair(s: &LowerSolution) -> [f64; 2] {
    [s.objectives[0], s.objectives[1]]
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Writes `ideal.json`.
pub fn cmd_ideal(cfg: &RunConfig) -> Result<IdealReport> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    let b = boundary(&inst, cfg)?;
    let report = IdealReport {
        problem: cfg.problem,
        ideal: [b.s1.objectives[0], b.s2.objectives[1]],
        min_phi1: pair(&b.s1),
        min_phi2: pair(&b.s2),
        utopia: b.utopia,
        essential_interval: b.interval,
        display: display(&[
            ("phi1_star", b.s1.objectives[0]),
            ("phi2_bar", b.s1.objectives[1]),
            ("phi1_bar", b.s2.objectives[0]),
            ("phi2_star", b.s2.objectives[1]),
            ("w0", b.interval.0),
            ("wf", b.interval.1),
        ]),
    };
    write_json(&cfg.out, "ideal.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub problem: ProblemKind,
    pub w: f64,
    pub utopia: [f64; 2],
    pub objectives: [f64; 2],
    pub master_raw: f64,
    pub master_reported: f64,
    pub status: PointStatus,
    pub alpha: Option<f64>,
    pub t_f: Option<f64>,
    pub terminal_state: Option<Vec<f64>>,
    pub kkt_residual: Option<f64>,
    pub feas_violation: Option<f64>,
    pub display: Display,
}

fn utopia_for_solve(inst: &Instance, cfg: &RunConfig) -> Result<[f64; 2]> {
    match cfg.utopia_override() {
        Some(u) => Ok(u),
        None => Ok(boundary(inst, cfg)?.utopia),
    }
}

/// Writes `solve.json` and, for control problems, `trajectory.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveSummary> {
    cfg.validate()?;
    let w = cfg.weight.ok_or_else(|| Error::InvalidConfig("solve needs a weight".into()))?;
    let inst = Instance::build(cfg)?;
    let utopia = utopia_for_solve(&inst, cfg)?;
    let s = inst.lower.chebyshev(w, utopia, None)?;
    let summary = summarize(&inst, cfg.problem, w, utopia, &s);
    write_json(&cfg.out, "solve.json", &summary)?;
    if let Some(d) = &s.detail {
        write_trajectory_csv(d, create(&cfg.out, "trajectory.csv")?)?;
    }
    Ok(summary)
}

fn summarize(inst: &Instance, problem: ProblemKind, w: f64, utopia: [f64; 2], s: &LowerSolution) -> SolveSummary {
    let raw = inst.master.value(&s.objectives);
    let d = s.detail.as_ref();
    let mut shown = vec![("phi1", s.objectives[0]), ("phi2", s.objectives[1]), ("master", inst.master.reported(raw))];
    if let Some(d) = d {
        shown.push(("t_f", d.trajectory.t_f));
    }
    SolveSummary {
        problem,
        w,
        utopia,
        objectives: pair(s),
        master_raw: raw,
        master_reported: inst.master.reported(raw),
        status: s.status.into(),
        alpha: d.and_then(|d| d.alpha),
        t_f: d.map(|d| d.trajectory.t_f),
        terminal_state: d.map(|d| d.trajectory.final_state().to_vec()),
        kkt_residual: d.map(|d| d.kkt_residual),
        feas_violation: d.map(|d| d.feas_violation),
        display: display(&shown),
    }
}

/// `t, x1.., u1.., lambda1..` with 17 significant digits.
pub fn write_trajectory_csv(res: &SolveResult, mut out: impl Write) -> Result<()> {
    let traj = &res.trajectory;
    let n = traj.states.first().map_or(0, Vec::len);
    let m = traj.controls.first().map_or(0, Vec::len);
    let with_adjoints = res.adjoints.len() == traj.times.len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|j| format!("u{j}")));
    if with_adjoints {
        header.extend((1..=n).map(|i| format!("lambda{i}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for k in 0..traj.times.len() {
        let mut row = vec![traj.times[k]];
        row.extend(&traj.states[k]);
        row.extend(&traj.controls[k]);
        if with_adjoints {
            row.extend(&res.adjoints[k]);
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `front.csv` and, with `sweep.verify`, `verify_<k>.json` per point.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<FrontPoint>> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    let b = boundary(&inst, cfg)?;
    let lo = cfg.sweep.lo.unwrap_or(b.interval.0);
    let hi = cfg.sweep.hi.unwrap_or(b.interval.1);
    let ev = FrontEvaluator::new(inst.lower.as_ref(), &inst.master, b.utopia);
    ev.anchor(b.interval.1, b.s1.clone());
    ev.anchor(b.interval.0, b.s2.clone());
    let grid = weight_grid(lo, hi, cfg.sweep.points);
    let points = sweep_front(&ev, &grid);
    write_front_csv(&points, create(&cfg.out, "front.csv")?)?;
    if cfg.sweep.verify {
        for (k, &w) in grid.iter().enumerate() {
            if let Some(s) = ev.cached(w) {
                if let Some(report) = verify_solution(cfg, &s, w, b.interval.1)? {
                    write_json(&cfg.out, &format!("verify_{k}.json"), &report)?;
                }
            }
        }
    }
    Ok(points)
}

/// Writes `report.json` and `iterates.csv`. Fails with the algorithm's
/// message when the bisection does not finish normally.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<BisectionReport> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    let report = optimize_over_front(inst.lower.as_ref(), &inst.master, &cfg.bisection())?;
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        report: &'a BisectionReport,
        display: Display,
    }
    let shown = display(&[
        ("w_star", report.w_star),
        ("master", report.master_sqrt_at_star),
        ("phi1", report.objectives_at_star[0]),
        ("phi2", report.objectives_at_star[1]),
        ("w0", report.essential_interval.0),
        ("wf", report.essential_interval.1),
    ]);
    write_json(&cfg.out, "report.json", &Out { report: &report, display: shown })?;
    let mut f = create(&cfg.out, "iterates.csv")?;
    writeln!(f, "k,a,b,c,derivative,master_raw,phi1,phi2")?;
    for r in &report.iterations {
        writeln!(
            f,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k, r.a, r.b, r.c, r.derivative, r.master_raw, r.objectives[0], r.objectives[1]
        )?;
    }
    f.flush()?;
    Ok(report)
}

/// Whether a finished report should exit with status zero.
pub fn report_succeeded(report: &BisectionReport) -> bool {
    !matches!(report.termination, Termination::MaxIter | Termination::Failed)
}

fn verify_solution(cfg: &RunConfig, s: &LowerSolution, w: f64, w_f: f64) -> Result<Option<VerificationReport>> {
    let Some(d) = &s.detail else {
        return Ok(None);
    };
    Ok(Some(match cfg.problem {
        ProblemKind::Rayleigh => rayleigh_switching(d, w, w_f)?,
        ProblemKind::Tb => tb_switching(d, w, &cfg.tb_parameters())?,
        _ => return Ok(None),
    }))
}

/// Solves at the configured weight (the right end of the essential
/// interval when unset) and writes `verify.json`.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    if !matches!(cfg.problem, ProblemKind::Rayleigh | ProblemKind::Tb) {
        return Err(Error::InvalidConfig("verification needs an optimal control problem".into()));
    }
    let inst = Instance::build(cfg)?;
    let b = boundary(&inst, cfg)?;
    let w = cfg.weight.unwrap_or(b.interval.1);
    let ev = FrontEvaluator::new(inst.lower.as_ref(), &inst.master, b.utopia);
    ev.anchor(b.interval.1, b.s1.clone());
    ev.anchor(b.interval.0, b.s2.clone());
    let s = ev.solution(w)?;
    let report = verify_solution(cfg, &s, w, b.interval.1)?.expect("control problem");
    write_json(&cfg.out, "verify.json", &report)?;
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(name = "pareto-ocp", version, about = "Optimize a master objective over the Pareto front of a bi-objective control problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ideal costs, boundary points and the essential interval.
    Ideal,
    /// One Chebyshev solve at `--weight`.
    Solve,
    /// Chebyshev solves over a weight grid.
    Sweep,
    /// Minimize the master objective over the front.
    Optimize,
    /// Check the bang-bang structure of a solve against its switching functions.
    Verify,
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    #[arg(long, global = true)]
    pub problem: Option<ProblemKind>,
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Mesh intervals.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// `trapezoidal` or `euler`.
    #[arg(long, global = true)]
    pub scheme: Option<Scheme>,
    /// Finite-difference step in the weight.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Bisection stops once the half-width drops below this.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Iteration cap of the bisection.
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    /// Utopia vector as `b1,b2`.
    #[arg(long, global = true, value_parser = parse_pair)]
    pub utopia: Option<[f64; 2]>,
    /// Shift of the utopia below the ideal costs as `e1,e2`.
    #[arg(long, global = true, value_parser = parse_pair)]
    pub eta: Option<[f64; 2]>,
    /// Chebyshev weight of the first objective, for `solve` and `verify`.
    #[arg(long, global = true)]
    pub weight: Option<f64>,
    /// TB transmission coefficient.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Number of sweep points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Write a verification report for every sweep point.
    #[arg(long, global = true)]
    pub verify_points: bool,
    /// Evaluate the two points of each difference quotient concurrently.
    #[arg(long, global = true)]
    pub parallel: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b] => Ok([a, b]),
        _ => Err(format!("expected two comma-separated numbers, got {s}")),
    }
}

impl Flags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.problem {
            cfg.problem = v;
        }
        if self.grid_n.is_some() {
            cfg.grid_n = self.grid_n;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.kmax {
            cfg.k_max = v;
        }
        if self.utopia.is_some() {
            cfg.utopia = self.utopia;
        }
        if self.eta.is_some() {
            cfg.eta = self.eta;
        }
        if self.weight.is_some() {
            cfg.weight = self.weight;
        }
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if let Some(v) = self.points {
            cfg.sweep.points = v;
        }
        cfg.sweep.verify |= self.verify_points;
        cfg.parallel |= self.parallel;
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match cli.flags.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let outcome: Result<bool> = match cli.command {
        Command::Ideal => cmd_ideal(&cfg).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
            true
        }),
        Command::Solve => cmd_solve(&cfg).map(|s| {
            println!("{}", serde_json::to_string_pretty(&s).unwrap_or_default());
            s.status == PointStatus::Success
        }),
        Command::Sweep => cmd_sweep(&cfg).map(|pts| {
            let failed = pts.iter().filter(|p| p.status != PointStatus::Success).count();
            println!("{} points, {failed} failed, written to {}", pts.len(), cfg.out.join("front.csv").display());
            failed == 0
        }),
        Command::Optimize => cmd_optimize(&cfg).map(|r| {
            println!(
                "w* = {} master = {} phi = ({}, {}) after {} iterations and {} solves",
                r.w_star,
                r.master_sqrt_at_star,
                r.objectives_at_star[0],
                r.objectives_at_star[1],
                r.iterations.len(),
                r.solves
            );
            if let Some(m) = &r.message {
                eprintln!("{m}");
            }
            report_succeeded(&r)
        }),
        Command::Verify => cmd_verify(&cfg).map(|r| {
            for c in &r.channels {
                println!(
                    "u{}: structure {:?} switches {:?} agreement {:.3}",
                    c.channel + 1,
                    c.control.structure,
                    c.control.switch_times,
                    c.agreement
                );
            }
            println!("{}", if r.passed { "bang-bang verified" } else { "verification failed" });
            r.passed
        }),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::InvalidConfig(_)) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"problem": "tb", "eps": 1e-4, "grid_n": 100}"#).unwrap();
        let flags = Flags { config: Some(path), eps: Some(2e-4), ..Flags::default() };
        let cfg = flags.resolve().unwrap();
        assert_eq!(cfg.problem, ProblemKind::Tb);
        assert_eq!(cfg.grid_n, Some(100));
        assert_eq!(cfg.eps, 2e-4);
        assert_eq!(cfg.bisection().utopia, Some(TB_UTOPIA));
    }

    #[test]
    fn weight_outside_unit_interval_is_rejected() {
        let cfg = RunConfig { weight: Some(1.5), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(parse_pair("1,2,3").is_err());
        assert_eq!(parse_pair("0.5, 2").unwrap(), [0.5, 2.0]);
    }

    #[test]
    fn four_figure_display() {
        assert_eq!(sig4(58.7103), "58.71");
        assert_eq!(sig4(0.924712), "0.9247");
        assert_eq!(sig4(27255.4), "27255");
        assert_eq!(sig4(3.70891), "3.709");
    }
}
