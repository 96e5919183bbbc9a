//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use algred::config::Settings;
use algred::fixtures;
use algred::hamiltonian::{check_linear_poisson, HamError};
use algred::lifts::{check_cv_relations, check_flow_duality, dual_chart};
use algred::model::Fixture;
use algred::prolong::build_prolongation_named;
use algred::reduce::{
    check_dynamics, check_general_embedding, check_mu_zero, check_reduced_bracket, check_shifted, integrate, MagneticTerm, QuotientModel, ReducedSystem,
    Setting,
};
use algred::report::{Record, Sample};
use algred::sampling::Sampler;
use algred::symexpr::Expr;

type Outcome = Result<String, String>;

const AXIOMS: [&str; 5] = ["axioms/antisymmetry", "axioms/leibniz", "axioms/jacobi", "axioms/anchor-morphism", "axioms/d-squared"];
const ALGEBROIDS: [&str; 5] = ["fix-tm2", "fix-so3", "fix-act", "fix-mag", "fix-so3-act"];
const ACTIONS: [&str; 5] = ["fix-so3", "fix-tm2-translation", "fix-act", "fix-mag", "fix-so3-act"];

fn load(name: &str) -> Fixture {
    fixtures::load(name).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Fails with the first record that does not pass.
fn all_pass(what: &str, recs: &[Record]) -> Result<(), String> {
    match recs.iter().find(|r| !r.pass) {
        None => Ok(()),
        Some(r) => Err(format!("{what}: {} residual {:e} tol {:e}", r.id, r.residual, r.tol)),
    }
}

fn find<'a>(recs: &'a [Record], id: &str) -> Result<&'a Record, String> {
    recs.iter().find(|r| r.id == id).ok_or_else(|| format!("no record {id}"))
}

fn below(what: &str, r: &Record, limit: f64) -> Result<(), String> {
    if r.pass && r.residual < limit {
        Ok(())
    } else {
        Err(format!("{what}: {} residual {:e}, limit {limit:e}", r.id, r.residual))
    }
}

fn within(what: &str, took: Duration, limit: u64) -> Result<(), String> {
    if took.as_secs_f64() < limit as f64 {
        Ok(())
    } else {
        Err(format!("{what} took {:.1}s, limit {limit}s", took.as_secs_f64()))
    }
}

fn axioms(s: &Settings) -> Outcome {
    let t0 = Instant::now();
    for name in ALGEBROIDS {
        let f = load(name);
        let recs = f.model.check_axioms(s);
        for id in AXIOMS {
            let r = find(&recs, id)?;
            // The fixtures are rational, so every identity is decided symbolically.
            if !(r.pass && r.sample == Sample::Symbolic && r.residual == 0.0) {
                return Err(format!("{name}: {id} {:?} residual {:e}", r.sample, r.residual));
            }
        }
    }
    within("axiom suite", t0.elapsed(), 30)?;
    Ok(format!("5 identities exact on {} algebroids in {:.1}s", ALGEBROIDS.len(), t0.elapsed().as_secs_f64()))
}

fn lifts(s: &Settings) -> Outcome {
    let mut worst_flow = 0.0f64;
    for name in ALGEBROIDS {
        let f = load(name);
        let model = f.model.clone().validated().map_err(err)?;
        all_pass(name, &check_cv_relations(&model, s).map_err(err)?)?;
        let mut rng = Sampler::derived(s.seed, name);
        let x = model.section((0..model.rank()).map(|_| rng.small_rational()).collect()).map_err(err)?;
        let r = check_flow_duality(&model, &x, 0.5, s, 10).map_err(err)?;
        below(name, &r, 1e-6)?;
        worst_flow = worst_flow.max(r.residual);
    }
    let act = load("fix-act").action.unwrap().validated().map_err(err)?;
    let r = act.check_psi_equivariance(s, 50).map_err(err)?;
    below("fix-act", &r, 1e-6)?;
    if r.sample != Sample::Sampled(50) {
        return Err(format!("equivariance ran on {:?}", r.sample));
    }
    Ok(format!("flow duality {worst_flow:.1e}, equivariance on 50 tuples {:.1e}", r.residual))
}

/// {f, g} = Σ ∂_{x_i} f ∂_{y_i} g − ∂_{y_i} f ∂_{x_i} g.
fn canonical_bracket(f: &Expr, g: &Expr, x: &[String], y: &[String]) -> Expr {
    x.iter().zip(y).map(|(q, p)| f.diff(q) * g.diff(p) - f.diff(p) * g.diff(q)).sum()
}

fn linear_poisson(s: &Settings) -> Outcome {
    for name in ALGEBROIDS.iter().chain(&["fix-tm2-translation"]) {
        let f = load(name);
        let model = f.model.clone().validated().map_err(err)?;
        let recs = check_linear_poisson(&model, s).map_err(err)?;
        all_pass(name, &recs)?;
        if let Some(r) = recs.iter().find(|r| r.sample != Sample::Symbolic) {
            return Err(format!("{name}: {} not decided symbolically", r.id));
        }
        let (_, y) = dual_chart(&model);
        let p = build_prolongation_named(&model, y, f.fiber_box).map_err(err)?;
        below(name, &p.check_poisson_cover(s).map_err(err)?, 1e-9)?;
    }
    let f = load("fix-tm2");
    let model = f.model.clone().validated().map_err(err)?;
    let p = build_prolongation_named(&model, vec!["y1".into(), "y2".into()], f.fiber_box).map_err(err)?;
    let omega = p.omega().map_err(err)?;
    let (x, y) = (model.coords().to_vec(), p.fiber().to_vec());
    let mut rng = Sampler::derived(s.seed, "canonical");
    let vars: Vec<String> = x.iter().chain(&y).cloned().collect();
    for _ in 0..10 {
        let (a, b) = (rng.polynomial(&vars, 3), rng.polynomial(&vars, 3));
        let diff = omega.base_poisson(&a, &b).map_err(|e: HamError| e.to_string())? - canonical_bracket(&a, &b, &x, &y);
        if !diff.is_identically_zero() {
            return Err(format!("fix-tm2 bracket differs from the canonical one: {diff}"));
        }
    }
    Ok("relations symbolic on 6 algebroids; tangent case equals the canonical bracket exactly".into())
}

fn canonical_cover(s: &Settings) -> Outcome {
    for name in ALGEBROIDS.iter().chain(&["fix-tm2-translation"]) {
        let f = load(name);
        let model = f.model.clone().validated().map_err(err)?;
        let (_, y) = dual_chart(&model);
        let p = build_prolongation_named(&model, y, f.fiber_box).map_err(err)?;
        let recs = p.check(None, s).map_err(err)?;
        let r = find(&recs, "prolong/liouville-differential")?;
        if !(r.pass && r.sample == Sample::Symbolic && r.residual == 0.0) {
            return Err(format!("{name}: −dλ differs from the local expression ({:?}, {:e})", r.sample, r.residual));
        }
    }
    let f = load("fix-so3");
    let model = f.model.clone().validated().map_err(err)?;
    let (_, y) = dual_chart(&model);
    let p = build_prolongation_named(&model, y, f.fiber_box).map_err(err)?;
    let r = p.check_lie_algebra_cover(s, 20).map_err(err)?;
    if !(r.pass && r.residual == 0.0 && r.sample == Sample::Sampled(20)) {
        return Err(format!("so(3) cover residual {:e} on {:?}", r.residual, r.sample));
    }
    Ok("−dλ symbolic on 6 algebroids; so(3) cover exact at 20 points".into())
}

fn momentum(s: &Settings) -> Outcome {
    let mut worst = 0.0f64;
    for name in ACTIONS {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let mu = f.mu.clone().unwrap();
        all_pass(name, &set.momentum.check_hamiltonian_action(&set.omega, s).map_err(err)?)?;
        let r = set.momentum.check_jt_equivariance(s, 30).map_err(err)?;
        below(name, &r, 1e-6)?;
        worst = worst.max(r.residual);
        let pts = set.level_points(&mu, 30, s).map_err(err)?;
        if pts.len() != 30 {
            return Err(format!("{name}: {} level points", pts.len()));
        }
        all_pass(name, &set.momentum.check_level_set_lemmas(&set.omega, &mu, &pts, s).map_err(err)?)?;
    }
    Ok(format!("{} actions; dual-map equivariance {worst:.1e}; subspace identities at 30 points", ACTIONS.len()))
}

fn reduced_fiber(s: &Settings) -> Outcome {
    let t0 = Instant::now();
    let mut dims = Vec::new();
    for name in ACTIONS {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 30, s).map_err(err)?;
        let recs = set.check_fibers(&mu, &pts, s).map_err(err)?;
        all_pass(name, &recs)?;
        // Five fresh representative draws per point.
        let mut rng = Sampler::derived(s.seed, "representatives");
        for x in &pts {
            let rf = set.reduce_fiber(&mu, x, s).map_err(err)?;
            let r = rf.well_defined_residual(&mut rng, 5);
            if r > s.tol.well_defined {
                return Err(format!("{name}: representatives disagree by {r:e}"));
            }
        }
        dims.push(format!("{name} {}", set.reduce_fiber(&mu, &pts[0], s).map_err(err)?.dim()));
    }
    let f = load("fix-so3");
    let set = Setting::from_fixture(&f).map_err(err)?;
    let pts = set.level_points(&[0.0, 0.0, 1.0], 30, s).map_err(err)?;
    for x in &pts {
        let d = set.reduce_fiber(&[0.0, 0.0, 1.0], x, s).map_err(err)?.dim();
        // Coadjoint orbit through (0,0,1) is a 2-sphere.
        if d != 2 {
            return Err(format!("so(3) reduced fiber has dimension {d}"));
        }
    }
    within("reduction", t0.elapsed(), 60)?;
    Ok(format!("dims [{}] in {:.1}s", dims.join(", "), t0.elapsed().as_secs_f64()))
}

fn reduced_bracket(s: &Settings) -> Outcome {
    let mut worst = 0.0f64;
    for name in ["fix-tm2-translation", "fix-so3"] {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).map_err(err)?;
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 30, s).map_err(err)?;
        let recs = check_reduced_bracket(&set, &quo, &mu, &pts, s).map_err(err)?;
        all_pass(name, &recs)?;
        let r = find(&recs, "bracket/reduced-agrees")?;
        below(name, r, 1e-6)?;
        worst = worst.max(r.residual);
    }
    Ok(format!("both sides agree to {worst:.1e} at 30 points"))
}

fn zero_level(s: &Settings) -> Outcome {
    let mut worst = 0.0f64;
    for name in ["fix-tm2-translation", "fix-act"] {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).map_err(err)?;
        let mu = vec![0.0; set.action().dim()];
        let pts = set.level_points(&mu, 30, s).map_err(err)?;
        let recs = check_mu_zero(&set, &quo, &pts, s).map_err(err)?;
        all_pass(name, &recs)?;
        let r = find(&recs, "mu-zero/pullback")?;
        below(name, r, 1e-8)?;
        worst = worst.max(r.residual);
        let dim = set.reduce_fiber(&mu, &pts[0], s).map_err(err)?.dim();
        if dim != 2 * quo.model().rank() {
            return Err(format!("{name}: reduced dimension {dim} against rank {}", quo.model().rank()));
        }
    }
    Ok(format!("pullback residual {worst:.1e}, dimensions equal twice the quotient rank"))
}

fn magnetic(s: &Settings) -> Outcome {
    let f = load("fix-mag");
    let set = Setting::from_fixture(&f).map_err(err)?;
    let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).map_err(err)?;
    let mu = f.mu.clone().unwrap();
    let conn = f.connection.as_ref().unwrap();
    let mag = MagneticTerm::new(&set.parent_action, &quo, conn, &mu).map_err(err)?;
    all_pass("magnetic term", &mag.check(&set.parent_action, &quo, conn, &mu, s).map_err(err)?)?;
    // α = μ(x1 dx2 + dx3), so dα = μ dx1∧dx2 and B(e1, e2) = μ everywhere.
    let mut rng = Sampler::derived(s.seed, "magnetic-oracle");
    for _ in 0..10 {
        let q = rng.vector(2, -2.0, 2.0);
        let b = mag.b_at(&q).map_err(err)?;
        if (b[(0, 1)] - mu[0]).abs() > 1e-12 || (b[(1, 0)] + mu[0]).abs() > 1e-12 || b[(0, 0)] != 0.0 || b[(1, 1)] != 0.0 {
            return Err(format!("B at {q:?} is {b}"));
        }
    }
    let pts = set.level_points(&mu, 30, s).map_err(err)?;
    let recs = check_shifted(&set, &quo, &mag, &mu, &pts, s).map_err(err)?;
    all_pass("fix-mag", &recs)?;
    let pull = find(&recs, "shifted/pullback")?;
    below("fix-mag", pull, 1e-8)?;
    let iso = find(&recs, "shifted/difference-is-magnetic")?;
    below("fix-mag", iso, 1e-8)?;
    let note = iso.note.clone().unwrap_or_default();
    // Without B the pullback is off by exactly |B| = μ.
    let without: f64 = note
        .split("max |Υ*Ω_0 − Ω_μ| = ")
        .nth(1)
        .and_then(|t| t.split(',').next())
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| format!("unparsed note {note}"))?;
    if (without - mu[0].abs()).abs() > 1e-8 {
        return Err(format!("dropping B leaves {without:e}, expected {}", mu[0].abs()));
    }
    Ok(format!("pullback {:.1e}; dropping B leaves {without:.3} = |B|", pull.residual))
}

fn isotropy_embedding(s: &Settings) -> Outcome {
    let mut notes = Vec::new();
    for (name, mu, codim) in [("fix-so3-act", vec![0.0, 0.0, 1.0], 2.0), ("fix-tm2-translation", vec![0.0], 0.0), ("fix-mag", vec![1.0], 0.0)] {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let pts = set.level_points(&mu, 30, s).map_err(err)?;
        let recs = check_general_embedding(&set, &mu, &pts, s).map_err(err)?;
        all_pass(name, &recs)?;
        below(name, find(&recs, "embedding/pullback")?, 1e-8)?;
        let c = find(&recs, "embedding/codimension")?;
        if c.residual != codim {
            return Err(format!("{name}: codimension {} expected {codim}", c.residual));
        }
        notes.push(format!("{name} codim {codim}"));
    }
    Ok(notes.join(", "))
}

fn lorentz(mu: f64, q0: [f64; 2], v0: [f64; 2], t: f64) -> [f64; 4] {
    let (c, s) = ((mu * t).cos(), (mu * t).sin());
    let v1 = v0[0] * c + v0[1] * s;
    let v2 = -v0[0] * s + v0[1] * c;
    let q1 = q0[0] + (v0[0] * s - v0[1] * c + v0[1]) / mu;
    let q2 = q0[1] + (v0[0] * c - v0[0] + v0[1] * s) / mu;
    [q1, q2, v1, v2]
}

fn dynamics(s: &Settings) -> Outcome {
    let t0 = Instant::now();
    // Rigid body: |y|² along the flow, measured here from the raw trajectory.
    let f = load("fix-so3");
    let set = Setting::from_fixture(&f).map_err(err)?;
    let h = f.hamiltonian.clone().unwrap();
    let y0 = [0.3, -1.1, 0.7];
    let traj = integrate(&set.omega, &h, &y0, 10.0, s.step, 10).map_err(err)?;
    let cas = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
    let drift = traj.states.iter().map(|y| (cas(y) - cas(&y0)).abs()).fold(0.0, f64::max);
    if drift >= 1e-8 {
        return Err(format!("rigid-body Casimir drifts by {drift:e}"));
    }

    for name in ["fix-so3-act", "fix-mag", "fix-tm2-translation"] {
        let f = load(name);
        let set = Setting::from_fixture(&f).map_err(err)?;
        let (recs, _) = check_dynamics(&f, &set, s).map_err(err)?;
        all_pass(name, &recs)?;
        let m = find(&recs, "dynamics/momentum-conserved")?;
        if m.sample == Sample::NotApplicable {
            return Err(format!("{name}: momentum conservation not exercised"));
        }
        below(name, m, 1e-6)?;
        if name != "fix-so3-act" {
            below(name, find(&recs, "dynamics/reduced-trajectory")?, 1e-5)?;
        }
    }

    // Magnetic fixture: the reduced motion is a charge in a unit field.
    let f = load("fix-mag");
    let set = Setting::from_fixture(&f).map_err(err)?;
    let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).map_err(err)?;
    let mu = f.mu.clone().unwrap();
    let mag = MagneticTerm::new(&set.parent_action, &quo, f.connection.as_ref().unwrap(), &mu).map_err(err)?;
    let red = ReducedSystem::new(&set, &quo, Some(&mag), &mu, f.hamiltonian.as_ref().unwrap()).map_err(err)?;
    let start = set.level_points(&mu, 1, s).map_err(err)?.remove(0);
    let full = integrate(&set.omega, f.hamiltonian.as_ref().unwrap(), &start, 5.0, s.step, 10).map_err(err)?;
    let z0 = red.project(&start).map_err(err)?;
    let mut worst_mag = 0.0f64;
    for (t, z) in full.times.iter().zip(&full.states) {
        let exact = lorentz(mu[0], [z0[0], z0[1]], [z0[2], z0[3]], *t);
        let p = red.project(z).map_err(err)?;
        worst_mag = p.iter().zip(exact).fold(worst_mag, |w, (a, b)| w.max((a - b).abs()));
    }
    if worst_mag >= 1e-5 {
        return Err(format!("magnetic reduced motion off the closed form by {worst_mag:e}"));
    }

    // Translation-reduced plane: a harmonic oscillator in (x2, y2).
    let f = load("fix-tm2-translation");
    let set = Setting::from_fixture(&f).map_err(err)?;
    let start = [0.4, -0.8, 0.0, 1.3];
    let full = integrate(&set.omega, f.hamiltonian.as_ref().unwrap(), &start, 5.0, s.step, 10).map_err(err)?;
    let mut worst_osc = 0.0f64;
    for (t, z) in full.times.iter().zip(&full.states) {
        let (q, p) = (start[1] * t.cos() + start[3] * t.sin(), -start[1] * t.sin() + start[3] * t.cos());
        worst_osc = worst_osc.max((z[1] - q).abs()).max((z[3] - p).abs());
    }
    if worst_osc >= 1e-5 {
        return Err(format!("oscillator off the closed form by {worst_osc:e}"));
    }
    within("dynamics", t0.elapsed(), 60)?;
    Ok(format!(
        "Casimir drift {drift:.1e}; magnetic vs closed form {worst_mag:.1e}; oscillator {worst_osc:.1e}; {:.1}s",
        t0.elapsed().as_secs_f64()
    ))
}

fn main() {
    let s = Settings::default();
    let criteria: [(&str, fn(&Settings) -> Outcome); 11] = [
        ("algebroid axioms", axioms),
        ("lift identities", lifts),
        ("linear Poisson correspondence", linear_poisson),
        ("canonical cover", canonical_cover),
        ("momentum map", momentum),
        ("reduced fiber", reduced_fiber),
        ("reduced bracket", reduced_bracket),
        ("zero-level quotient", zero_level),
        ("magnetic shifted level", magnetic),
        ("isotropy embedding", isotropy_embedding),
        ("dynamics", dynamics),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(|| run(&s)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name:<30} PASS  {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name:<30} FAIL  {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
