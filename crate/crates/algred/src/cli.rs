//! Command-line front end. Exit codes: 0 all checks pass, 1 a check failed,
//! 2 usage error, 3 model error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Settings;
use crate::fixtures;
use crate::hamiltonian::{check_dual_generators_hamiltonian, check_linear_poisson, HamError};
use crate::lifts::{check_atiyah_well_defined, check_cv_relations, check_flow_duality, LiftError};
use crate::model::{model_to_toml, Fixture, ModelError};
use crate::prolong::{build_prolongation_named, ProlongError};
use crate::reduce::{
    check_dynamics, check_general_embedding, check_mu_zero, check_reduced_bracket, check_reduced_form_closed, check_shifted, MagneticTerm,
    QuotientModel, ReduceError, Setting, Trajectory,
};
use crate::report::{Record, Report};
use crate::sampling::Sampler;

#[derive(Parser, Debug)]
#[command(name = "algred", version, about = "Lie algebroid calculus and momentum-map reduction checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Built-in fixture name (see list-fixtures).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub fixture: Option<String>,
    /// Model file in TOML.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Sampling seed; equal seeds give byte-identical reports.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample count for sampled identities; reduction checks use the same count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Multiplies every default tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tol_scale: f64,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Names of the built-in fixtures.
    ListFixtures,
    /// Algebroid axioms, plus the action and Ω invariants when present.
    CheckAxioms {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        common: Common,
    },
    /// Emit the prolongation over the dual as a model file.
    Prolong {
        #[command(flatten)]
        source: Source,
        /// Emit the quotient algebroid of a trivialized fixture instead.
        #[arg(long)]
        quotient: bool,
        /// Write the model here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduced fiber K/G_μ at one point of J⁻¹(μ).
    Reduce {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        common: Common,
        /// Momentum level, comma separated; one value is repeated. Defaults to the fixture's mu, else 0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        /// Point of the phase-space chart; defaults to a sampled level-set point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Option<Vec<f64>>,
    },
    /// Run one verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        common: Common,
        /// Momentum level, comma separated; one value is repeated. Defaults to the fixture's mu, else 0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
    },
    /// Conservation and reduced-trajectory checks for the fixture Hamiltonian.
    Dynamics {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        common: Common,
        /// Dump projected and reduced trajectories as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Lift identities, flow duality, action equivariance.
    Lifts,
    /// Linear Poisson relations and the prolongation bracket.
    Poisson,
    /// Liouville section, canonical Ω and the lifted action.
    Prolongation,
    /// Hamiltonian action, momentum equivariance, level-set subspaces.
    Momentum,
    /// Reduced fiber: kernel, nondegeneracy, representative independence.
    #[value(name = "reduced-fiber", alias = "theorem-2.8")]
    ReducedFiber,
    /// Reduced bracket against invariant extensions.
    #[value(name = "reduced-bracket", alias = "marsden-ratiu")]
    ReducedBracket,
    /// Zero level against the dual of the quotient algebroid.
    #[value(name = "zero-level", alias = "p1")]
    ZeroLevel,
    /// Shifted level with the magnetic term.
    #[value(name = "magnetic", alias = "p2")]
    Magnetic,
    /// Embedding into the reduction by the isotropy group.
    #[value(name = "isotropy-embedding", alias = "t5.3")]
    IsotropyEmbedding,
    /// Energy and momentum conservation, reduced trajectory against the projected one.
    Dynamics,
}

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Model(String),
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Model(e.to_string())
    }
}

macro_rules! model_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Model(e.to_string())
            }
        }
    )*};
}
model_failure!(ReduceError, LiftError, HamError, ProlongError, crate::algebroid::AlgebroidError, crate::symexpr::EvalError);

pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(o) => o,
        Err(Failure::Usage(m)) => Outcome { code: 2, stdout: String::new(), stderr: format!("error: {m}\n") },
        Err(Failure::Model(m)) => Outcome { code: 3, stdout: String::new(), stderr: format!("model error: {m}\n") },
    }
}

fn load(source: &Source) -> Result<Fixture, Failure> {
    match (&source.fixture, &source.model) {
        (Some(name), None) => Ok(fixtures::load(name)?),
        (None, Some(path)) => Ok(Fixture::load(path)?),
        _ => Err(Failure::Usage("give exactly one of --fixture and --model".into())),
    }
}

fn settings(common: &Common) -> Result<Settings, Failure> {
    if !(common.tol_scale > 0.0 && common.tol_scale.is_finite()) {
        return Err(Failure::Usage("--tol-scale must be positive".into()));
    }
    let mut s = Settings::default().with_tol_scale(common.tol_scale);
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(n) = common.samples {
        if n == 0 {
            return Err(Failure::Usage("--samples must be positive".into()));
        }
        s.samples = n;
        s.reduction_samples = n;
    }
    Ok(s)
}

fn finish(report: Report, common: &Common, extra: &str) -> Result<Outcome, Failure> {
    if let Some(path) = &common.out {
        std::fs::write(path, report.to_json() + "\n").map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut stdout = String::new();
    if !extra.is_empty() {
        stdout.push_str(extra);
        stdout.push('\n');
    }
    stdout.push_str(&report.to_string());
    stdout.push('\n');
    Ok(Outcome { code: if report.all_pass() { 0 } else { 1 }, stdout, stderr: String::new() })
}

fn resolve_mu(flag: &Option<Vec<f64>>, f: &Fixture, d: usize) -> Result<Vec<f64>, Failure> {
    let mu = flag.clone().or_else(|| f.mu.clone()).unwrap_or_else(|| vec![0.0; d]);
    match mu.len() {
        n if n == d => Ok(mu),
        // A single value broadcasts, so `--mu 0` works for any group.
        1 => Ok(vec![mu[0]; d]),
        n => Err(Failure::Usage(format!("--mu has {n} entries, the algebra has dimension {d}"))),
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::ListFixtures => {
            let mut out = String::new();
            for name in fixtures::names() {
                let desc = fixtures::load(name).map(|f| f.description).unwrap_or_default();
                out.push_str(&format!("{name:<22} {desc}\n"));
            }
            Ok(Outcome { code: 0, stdout: out, stderr: String::new() })
        }
        Command::CheckAxioms { source, common } => {
            let f = load(&source)?;
            let s = settings(&common)?;
            let mut report = Report::new(&s);
            report.extend(f.model.check_axioms(&s));
            if let Some(act) = &f.action {
                report.extend(act.check_invariants(&s)?);
            }
            if let Some(w) = &f.omega {
                report.extend(w.check_invariants(&s)?);
            }
            finish(report, &common, &format!("# {}", f.name))
        }
        Command::Prolong { source, quotient, out } => {
            let f = load(&source)?;
            let parent = f.model.clone().validated()?;
            let text = if quotient {
                let act = f.require_action()?.clone().validated()?;
                let quo = QuotientModel::new(&act, f.require_trivialization()?)?;
                model_to_toml(quo.model(), &format!("{}-quotient", f.name), &format!("quotient of {} by its action", f.name))
            } else {
                let (_, y) = crate::lifts::dual_chart(&parent);
                let p = build_prolongation_named(&parent, y, f.fiber_box)?;
                model_to_toml(p.model(), &format!("{}-prolongation", f.name), &format!("prolongation over the dual of {}", f.name))
            };
            match out {
                Some(path) => {
                    std::fs::write(&path, &text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
                    Ok(Outcome { code: 0, stdout: String::new(), stderr: String::new() })
                }
                None => Ok(Outcome { code: 0, stdout: text, stderr: String::new() }),
            }
        }
        Command::Reduce { source, common, mu, at } => {
            let f = load(&source)?;
            let s = settings(&common)?;
            let set = Setting::from_fixture(&f)?;
            let mu = resolve_mu(&mu, &f, set.action().dim())?;
            let pt = match at {
                Some(p) if p.len() != set.model().dim() => {
                    return Err(Failure::Usage(format!("--at needs {} coordinates ({})", set.model().dim(), set.model().coords().join(","))))
                }
                Some(p) => p,
                None => set.level_points(&mu, 1, &s)?.remove(0),
            };
            let rf = set.reduce_fiber(&mu, &pt, &s).map_err(|e| match e {
                ReduceError::Ham(HamError::OffLevelSet(r)) => Failure::Usage(format!("--at is off the level set: |J − μ| = {r:e}")),
                e => e.into(),
            })?;
            let mut extra = format!("# {} at ({})\n# dim K = {}, dim G_μ = {}, dim K/G_μ = {}\n# reduced form:", f.name, join(&pt), rf.k.ncols(), rf.g.ncols(), rf.dim());
            for row in rf.omega.row_iter() {
                extra.push_str(&format!("\n#   {}", row.iter().map(|v| format!("{v:>10.6}")).collect::<Vec<_>>().join(" ")));
            }
            let mut report = Report::new(&s);
            report.extend(set.check_fibers(&mu, &[pt], &s)?);
            finish(report, &common, &extra)
        }
        Command::Verify { suite, source, common, mu } => {
            let f = load(&source)?;
            let s = settings(&common)?;
            let mu = match (&mu, &f.action) {
                (Some(_), Some(a)) => Some(resolve_mu(&mu, &f, a.dim())?),
                _ => mu,
            };
            let mut report = Report::new(&s);
            report.extend(run_suite(suite, &f, &mu, &s)?);
            let label = suite.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            finish(report, &common, &format!("# {} {label}", f.name))
        }
        Command::Dynamics { source, common, csv } => {
            let f = load(&source)?;
            let s = settings(&common)?;
            let set = Setting::from_fixture(&f)?;
            let (recs, traj) = check_dynamics(&f, &set, &s)?;
            if let (Some(path), Some((p, r))) = (&csv, &traj) {
                std::fs::write(path, trajectory_csv(p, r)).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let mut report = Report::new(&s);
            report.extend(recs);
            finish(report, &common, &format!("# {}", f.name))
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn trajectory_csv(projected: &Trajectory, reduced: &Trajectory) -> String {
    let k = projected.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t");
    for i in 0..k {
        out.push_str(&format!(",projected{}", i + 1));
    }
    for i in 0..k {
        out.push_str(&format!(",reduced{}", i + 1));
    }
    out.push('\n');
    for ((t, p), r) in projected.times.iter().zip(&projected.states).zip(&reduced.states) {
        out.push_str(&format!("{t}"));
        for v in p.iter().chain(r) {
            out.push_str(&format!(",{v:.12e}"));
        }
        out.push('\n');
    }
    out
}

/// Records of one suite, in a fixed order.
pub fn run_suite(suite: Suite, f: &Fixture, mu_flag: &Option<Vec<f64>>, s: &Settings) -> Result<Vec<Record>, ReduceError> {
    let model = f.model.clone().validated()?;
    let mut out = Vec::new();
    match suite {
        Suite::Lifts => {
            out.extend(check_cv_relations(&model, s)?);
            let mut rng = Sampler::derived(s.seed, "suite-lifts");
            let x = model.section((0..model.rank()).map(|_| rng.small_rational()).collect())?;
            out.push(check_flow_duality(&model, &x, 0.5, s, 10)?);
            if let Some(act) = &f.action {
                let act = act.clone().validated()?;
                out.extend(act.check_invariants(s)?);
                out.push(act.check_psi_equivariance(s, 50)?);
                out.push(act.check_phi_t_group_law(s, 20)?);
                if let Some(t) = &f.trivialization {
                    if let (Some(slots), Some(frame)) = (&t.g_slots, &t.invariant_frame) {
                        out.push(check_atiyah_well_defined(&act, slots, frame, &t.reduced, s, 30)?);
                    }
                }
            }
        }
        Suite::Poisson => {
            out.extend(check_linear_poisson(&model, s)?);
            let (_, y) = crate::lifts::dual_chart(&model);
            let p = build_prolongation_named(&model, y, f.fiber_box)?;
            out.push(p.check_poisson_cover(s)?);
            if let Some(act) = &f.action {
                out.push(check_dual_generators_hamiltonian(&act.clone().validated()?, s)?);
            }
        }
        Suite::Prolongation => {
            let (_, y) = crate::lifts::dual_chart(&model);
            let p = build_prolongation_named(&model, y, f.fiber_box)?;
            out.extend(p.model().check_axioms(s));
            let act = f.action.clone().map(|a| a.validated()).transpose()?;
            out.extend(p.check(act.as_ref(), s)?);
            out.push(p.check_lie_algebra_cover(s, 20)?);
        }
        Suite::Momentum => {
            let set = Setting::from_fixture(f)?;
            let mu = resolve(mu_flag, f, set.action().dim())?;
            out.extend(set.momentum.check_hamiltonian_action(&set.omega, s)?);
            out.push(set.momentum.check_jt_equivariance(s, 30)?);
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(set.momentum.check_level_set_lemmas(&set.omega, &mu, &pts, s)?);
            out.push(set.momentum.check_regular(&pts, s)?);
        }
        Suite::ReducedFiber => {
            let set = Setting::from_fixture(f)?;
            let mu = resolve(mu_flag, f, set.action().dim())?;
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(set.check_fibers(&mu, &pts, s)?);
        }
        Suite::ReducedBracket => {
            let set = Setting::from_fixture(f)?;
            let mu = resolve(mu_flag, f, set.action().dim())?;
            let quo = QuotientModel::new(&set.parent_action, f.require_trivialization()?)?;
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(check_reduced_bracket(&set, &quo, &mu, &pts, s)?);
        }
        Suite::ZeroLevel => {
            let set = Setting::from_fixture(f)?;
            let quo = QuotientModel::new(&set.parent_action, f.require_trivialization()?)?;
            let mu = vec![0.0; set.action().dim()];
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(quo.check(s)?);
            out.extend(check_mu_zero(&set, &quo, &pts, s)?);
            out.push(check_reduced_form_closed(&set, &quo, None, s)?);
        }
        Suite::Magnetic => {
            let set = Setting::from_fixture(f)?;
            let mu = resolve(mu_flag, f, set.action().dim())?;
            let quo = QuotientModel::new(&set.parent_action, f.require_trivialization()?)?;
            let conn = f.require_connection()?;
            let mag = MagneticTerm::new(&set.parent_action, &quo, conn, &mu)?;
            out.extend(mag.check(&set.parent_action, &quo, conn, &mu, s)?);
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(check_shifted(&set, &quo, &mag, &mu, &pts, s)?);
            out.push(check_reduced_form_closed(&set, &quo, Some(&mag), s)?);
        }
        Suite::IsotropyEmbedding => {
            let set = Setting::from_fixture(f)?;
            let mu = resolve(mu_flag, f, set.action().dim())?;
            let pts = set.level_points(&mu, s.reduction_samples, s)?;
            out.extend(check_general_embedding(&set, &mu, &pts, s)?);
        }
        Suite::Dynamics => {
            let set = Setting::from_fixture(f)?;
            out.extend(check_dynamics(f, &set, s)?.0);
        }
    }
    Ok(out)
}

fn resolve(flag: &Option<Vec<f64>>, f: &Fixture, d: usize) -> Result<Vec<f64>, ReduceError> {
    resolve_mu(flag, f, d).map_err(|e| match e {
        Failure::Usage(m) | Failure::Model(m) => ReduceError::Shape(m),
    })
}
