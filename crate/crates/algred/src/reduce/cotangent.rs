//! Cotangent-bundle reduction: J⁻¹(0)/G against the dual of the quotient
//! algebroid, the magnetic term of a connection for μ ≠ 0, and the embedding
//! of the μ-reduced space into the one for the isotropy group.

use std::collections::BTreeMap;

use super::{differential, eval_vec, subspace_distance, QuotientModel, ReduceError, Setting};
use crate::algebroid::KFormField;
use crate::config::Settings;
use crate::hamiltonian::SymplecticSection;
use crate::liegroup::GroupElement;
use crate::lifts::{fresh_names, LiftAction};
use crate::linalg::{complement_within, containment_residual, max_abs, null_space, orth, rank, scaled_det, Mat};
use crate::prolong::build_prolongation_named;
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{Compiled, Expr};

/// Φ: prolonged fibers over J⁻¹ levels → prolonged fibers of the quotient,
/// (a, b) ↦ (frame coefficients of a mod ψ, d p_γ(a, b)) with p_γ = y·X_γ.
pub struct QuotientCotangent<'a> {
    quo: &'a QuotientModel,
    pub omega0: SymplecticSection,
    momenta: Vec<Compiled>,
    momenta_d: Vec<Vec<Compiled>>,
    n: usize,
    m: usize,
}

impl<'a> QuotientCotangent<'a> {
    pub fn new(set: &Setting, quo: &'a QuotientModel) -> Result<QuotientCotangent<'a>, ReduceError> {
        let p = set.require_prolonged("cotangent reduction")?;
        let a0 = quo.model();
        let mut taken = a0.coords().to_vec();
        taken.extend(set.model().coords().iter().cloned());
        let names = fresh_names("p", a0.rank(), &taken);
        let reduced = build_prolongation_named(a0, names, (-2.0, 2.0))?;
        let omega0 = reduced.omega()?;
        let model = set.model();
        let exprs: Vec<Expr> = quo.frame().iter().map(|x| x.comps().iter().zip(p.fiber()).map(|(c, y)| c * Expr::var(y)).sum()).collect();
        let momenta = exprs.iter().map(|e| e.compile(model.coords())).collect::<Result<_, _>>()?;
        let momenta_d = exprs.iter().map(|e| differential(model, e)).collect::<Result<_, _>>()?;
        Ok(QuotientCotangent { quo, omega0, momenta, momenta_d, n: p.parent().rank(), m: p.parent().dim() })
    }

    /// Image point (r(x), y·X_γ(x)) and the matrix of Φ at z = (x, y).
    pub fn at(&self, z: &[f64]) -> Result<(Vec<f64>, Mat), ReduceError> {
        let (n, k) = (self.n, self.quo.frame().len());
        let x = &z[..self.m];
        let mut point = self.quo.project_point(x)?;
        for c in &self.momenta {
            point.push(c.eval(z)?);
        }
        let mut phi = Mat::zeros(2 * k, 2 * n);
        phi.view_mut((0, 0), (k, n)).copy_from(&self.quo.projection_at(x)?);
        for (g, d) in self.momenta_d.iter().enumerate() {
            let row = eval_vec(d, z)?;
            for j in 0..2 * n {
                phi[(k + g, j)] = row[j];
            }
        }
        Ok((point, phi))
    }
}

struct Worst {
    pullback: f64,
    orbit: f64,
    det: f64,
    dims_ok: bool,
}

impl Worst {
    fn new() -> Worst {
        Worst { pullback: 0.0, orbit: 0.0, det: f64::INFINITY, dims_ok: true }
    }
}

/// J⁻¹(0)/G ≅ A₀* as symplectic fibers: (ΦQ)ᵀ Ω_{A₀} (ΦQ) = Ω_0 and Φ kills ψ(g).
pub fn check_mu_zero(set: &Setting, quo: &QuotientModel, pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Record>, ReduceError> {
    let cot = QuotientCotangent::new(set, quo)?;
    let mu = vec![0.0; set.action().dim()];
    let mut w = Worst::new();
    for z in pts {
        let rf = set.reduce_fiber(&mu, z, settings)?;
        let (p0, phi) = cot.at(z)?;
        let w0 = cot.omega0.matrix_at(&p0)?;
        let pq = &phi * &rf.q;
        w.dims_ok &= rf.dim() == 2 * quo.model().rank();
        if w.dims_ok {
            w.pullback = w.pullback.max(max_abs(&(pq.transpose() * &w0 * &pq - &rf.omega)));
            w.det = w.det.min(scaled_det(&pq).abs());
        }
        w.orbit = w.orbit.max(max_abs(&(&phi * &rf.g)));
    }
    Ok(records("mu-zero", "zero-level-quotient-is-dual-of-quotient-algebroid", &w, pts.len(), settings, 2 * quo.model().rank()))
}

fn records(prefix: &str, anchor: &str, w: &Worst, count: usize, settings: &Settings, target: usize) -> Vec<Record> {
    let n = Sample::Sampled(count);
    let det_ok = w.det > settings.tol.nondegenerate_det;
    vec![
        Record::verdict(format!("{prefix}/dimension"), anchor, n.clone(), 0.0, 0.0, w.dims_ok).with_note(format!("target dimension {target}")),
        Record::new(format!("{prefix}/pullback"), anchor, n.clone(), if w.dims_ok { w.pullback } else { f64::INFINITY }, settings.tol.pullback),
        Record::new(format!("{prefix}/kills-orbit"), anchor, n.clone(), w.orbit, settings.tol.pullback),
        Record::verdict(format!("{prefix}/injective"), anchor, n, w.det, settings.tol.nondegenerate_det, w.dims_ok && det_ok),
    ]
}

/// α_μ = ⟨μ, 𝒜⟩∘ρ on A, β = d_A α_μ, and the form B on A₀ that β descends to.
#[derive(Clone, Debug)]
pub struct MagneticTerm {
    pub alpha: KFormField,
    pub beta: KFormField,
    pub b: KFormField,
    alpha_c: Vec<Compiled>,
    /// ∂_i α_I.
    alpha_dx: Vec<Vec<Compiled>>,
    b_c: Vec<Vec<Option<Compiled>>>,
}

impl MagneticTerm {
    pub fn new(act: &LiftAction, quo: &QuotientModel, connection: &[Vec<Expr>], mu: &[f64]) -> Result<MagneticTerm, ReduceError> {
        let parent = act.model();
        let (n, m, d) = (parent.rank(), parent.dim(), act.dim());
        if connection.len() != d || mu.len() != d {
            return Err(ReduceError::Shape("connection and μ need one entry per generator".into()));
        }
        let mu_e: Vec<Expr> = mu.iter().map(|v| super::poisson::constant(*v)).collect();
        let comps: Vec<Expr> = (0..n)
            .map(|big| (0..d).map(|a| (0..m).map(|i| &mu_e[a] * &connection[a][i] * parent.rho(big, i)).sum::<Expr>()).sum())
            .collect();
        let alpha = parent.one_form(comps.clone())?;
        let beta = parent.d(&alpha)?;
        let a0 = quo.model();
        let at_section = quo.section_map();
        let mut bc = BTreeMap::new();
        for g in 0..a0.rank() {
            for h in g + 1..a0.rank() {
                let v = parent.eval_form(&beta, &[quo.frame()[g].clone(), quo.frame()[h].clone()])?.subst(&at_section);
                if !v.is_zero() {
                    bc.insert(vec![g, h], v);
                }
            }
        }
        let b = a0.form(2, bc)?;
        let coords = parent.coords();
        let alpha_c = comps.iter().map(|e| e.compile(coords)).collect::<Result<_, _>>()?;
        let alpha_dx = comps.iter().map(|e| coords.iter().map(|c| e.diff(c).compile(coords)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
        let k = a0.rank();
        let b_c = (0..k)
            .map(|g| (0..k).map(|h| if g == h { Ok(None) } else { b.get(&[g, h]).compile(a0.coords()).map(Some) }).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        Ok(MagneticTerm { alpha, beta, b, alpha_c, alpha_dx, b_c })
    }

    pub fn alpha_at(&self, x: &[f64]) -> Result<Vec<f64>, ReduceError> {
        Ok(self.alpha_c.iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?)
    }

    /// (∂α_I/∂x^i ρ_J^i)(x), the fiber part of the derivative of y ↦ y − α(x).
    pub fn alpha_derivative_at(&self, act: &LiftAction, x: &[f64]) -> Result<Mat, ReduceError> {
        let parent = act.model();
        let n = parent.rank();
        let rho: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..parent.dim()).map(|i| parent.rho(j, i).compile(parent.coords()).and_then(|c| c.eval(x))).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        let mut out = Mat::zeros(n, n);
        for big in 0..n {
            let dx: Vec<f64> = self.alpha_dx[big].iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?;
            for j in 0..n {
                out[(big, j)] = dx.iter().zip(&rho[j]).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn b_at(&self, q: &[f64]) -> Result<Mat, ReduceError> {
        let k = self.b_c.len();
        let mut out = Mat::zeros(k, k);
        for g in 0..k {
            for h in 0..k {
                if let Some(c) = &self.b_c[g][h] {
                    out[(g, h)] = c.eval(q)?;
                }
            }
        }
        Ok(out)
    }

    /// Connection normalization and equivariance, α_μ(ψ_a) = μ_a, invariance of
    /// α_μ, horizontality of β, β = π̃*B, and closedness of B.
    pub fn check(&self, act: &LiftAction, quo: &QuotientModel, connection: &[Vec<Expr>], mu: &[f64], settings: &Settings) -> Result<Vec<Record>, ReduceError> {
        let parent = act.model();
        let (n, d) = (parent.rank(), act.dim());
        let ranges = parent.sample_ranges();
        let tol = settings.tol.sampled_identity;
        let rec = |id: &str, anchor: &str, e: &[Expr]| identity_record(id, anchor, e, &ranges, settings.seed, settings.samples, tol);

        let mut norm = Vec::new();
        for a in 0..d {
            for b in 0..d {
                let v: Expr = connection[a].iter().zip(act.generator(b)).map(|(c, g)| c * g).sum();
                norm.push(if a == b { v - Expr::one() } else { v });
            }
        }
        let mut on_psi = Vec::new();
        let mut lie = Vec::new();
        let mut horiz = Vec::new();
        for a in 0..d {
            on_psi.push(parent.pair(&self.alpha, act.psi(a))? - super::poisson::constant(mu[a]));
            lie.extend(parent.lie_derivative_form(act.psi(a), &self.alpha)?.components().map(|(_, e)| e.clone()).collect::<Vec<_>>());
            horiz.extend(parent.interior(act.psi(a), &self.beta)?.components().map(|(_, e)| e.clone()).collect::<Vec<_>>());
        }
        let to_x = quo.reduced_map();
        let proj = quo.projection();
        let k = quo.model().rank();
        let mut descent = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let down: Expr = (0..k)
                    .flat_map(|g| (0..k).map(move |h| (g, h)))
                    .filter(|&(g, h)| g != h)
                    .map(|(g, h)| self.b.get(&[g, h]).subst(&to_x) * &proj[g][i] * &proj[h][j])
                    .sum();
                descent.push(self.beta.get(&[i, j]) - down);
            }
        }
        let closed: Vec<Expr> = quo.model().d(&self.b)?.components().map(|(_, e)| e.clone()).collect();
        let closed_rec = identity_record(
            "magnetic/closed",
            "magnetic-form-closed",
            &closed,
            &quo.model().sample_ranges(),
            settings.seed,
            settings.samples,
            tol,
        );
        Ok(vec![
            rec("magnetic/connection-normalized", "connection-reproduces-generators", &norm),
            self.check_connection_equivariance(act, connection, settings)?,
            rec("magnetic/alpha-on-generators", "shifted-form-pairs-to-mu", &on_psi),
            rec("magnetic/alpha-invariant", "shifted-form-invariant", &lie),
            rec("magnetic/beta-horizontal", "magnetic-form-horizontal", &horiz),
            rec("magnetic/descends", "magnetic-form-descends", &descent),
            closed_rec,
        ])
    }

    /// 𝒜(Tφ_g w) = Ad_g 𝒜(w) along flows of the tangent-lifted action.
    fn check_connection_equivariance(&self, act: &LiftAction, connection: &[Vec<Expr>], settings: &Settings) -> Result<Record, ReduceError> {
        let parent = act.model();
        let (m, d) = (parent.dim(), act.dim());
        let conn: Vec<Vec<Compiled>> =
            connection.iter().map(|r| r.iter().map(|e| e.compile(parent.coords())).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
        let apply = |x: &[f64], w: &[f64]| -> Result<Vec<f64>, ReduceError> {
            conn.iter().map(|r| Ok(r.iter().zip(w).map(|(c, wi)| c.eval(x).map(|v| v * wi)).sum::<Result<f64, _>>()?)).collect()
        };
        let mut s = Sampler::derived(settings.seed, "connection-equivariance");
        let pts = parent.sample_points(settings.seed ^ 0x00c0_ffee, 8);
        let mut worst = 0.0f64;
        for x in &pts {
            let w = s.vector(m, -1.0, 1.0);
            let g = GroupElement::exp(act.algebra(), &s.vector(d, -1.0, 1.0), 0.3).mul(&GroupElement::exp(act.algebra(), &s.vector(d, -1.0, 1.0), 0.2));
            let Ok((x2, w2)) = act.phi_tangent(&g, x, &w, settings.step) else { continue };
            if parent.guards().iter().any(|c| !c.eval(&x2).is_ok_and(f64::is_finite)) {
                continue;
            }
            let lhs = apply(&x2, &w2)?;
            let rhs = g.adjoint(&apply(x, &w)?);
            worst = lhs.iter().zip(&rhs).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        }
        Ok(Record::new("magnetic/connection-equivariant", "connection-equivariant", Sample::Sampled(pts.len()), worst, settings.tol.flow))
    }
}

/// J⁻¹(μ)/G ≅ (A₀*, Ω_{A₀} − B): the shift y ↦ y − α_μ(x) followed by Φ.
pub fn check_shifted(set: &Setting, quo: &QuotientModel, mag: &MagneticTerm, mu: &[f64], pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Record>, ReduceError> {
    let d = set.action().dim();
    let iso = set.isotropy(mu, settings).ncols();
    if iso != d {
        return Err(ReduceError::Isotropy("the shifted cotangent isomorphism", iso, d));
    }
    let cot = QuotientCotangent::new(set, quo)?;
    let (n, m, k) = (cot.n, cot.m, quo.model().rank());
    let zero = vec![0.0; d];
    let mut w = Worst::new();
    let (mut lands, mut diff, mut dmax, mut bmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for z in pts {
        let rf = set.reduce_fiber(mu, z, settings)?;
        let x = &z[..m];
        let alpha = mag.alpha_at(x)?;
        let mut shifted = z.to_vec();
        for (yi, a) in shifted[m..].iter_mut().zip(&alpha) {
            *yi -= a;
        }
        lands = lands.max(set.momentum.value(&shifted)?.iter().zip(&zero).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let mut sh = Mat::identity(2 * n, 2 * n);
        sh.view_mut((n, 0), (n, n)).copy_from(&(-mag.alpha_derivative_at(&set.parent_action, x)?));
        let (p0, phi) = cot.at(&shifted)?;
        let phi_sh = phi * sh;
        let ups = &phi_sh * &rf.q;
        let w0 = cot.omega0.matrix_at(&p0)?;
        let mut bh = Mat::zeros(2 * k, 2 * k);
        bh.view_mut((0, 0), (k, k)).copy_from(&mag.b_at(&p0[..k])?);
        w.dims_ok &= rf.dim() == 2 * k;
        if w.dims_ok {
            w.pullback = w.pullback.max(max_abs(&(ups.transpose() * (&w0 - &bh) * &ups - &rf.omega)));
            let dd = ups.transpose() * &w0 * &ups - &rf.omega;
            diff = diff.max(max_abs(&(&dd - ups.transpose() * &bh * &ups)));
            dmax = dmax.max(max_abs(&dd));
            w.det = w.det.min(scaled_det(&ups).abs());
        }
        w.orbit = w.orbit.max(max_abs(&(&phi_sh * &rf.g)));
        bmax = bmax.max(max_abs(&bh));
    }
    let mut out = records("shifted", "shifted-level-quotient-is-magnetic-dual", &w, pts.len(), settings, 2 * k);
    let n_s = Sample::Sampled(pts.len());
    out.push(Record::new("shifted/lands-in-zero-level", "shift-maps-level-to-zero-level", n_s.clone(), lands, settings.tol.level_set * 10.0));
    out.push(
        Record::new("shifted/difference-is-magnetic", "canonical-pullback-differs-by-magnetic-term", n_s, diff, settings.tol.pullback)
            .with_note(format!("max |Υ*Ω_0 − Ω_μ| = {dmax:.3e}, max |B| = {bmax:.3e}")),
    );
    Ok(out)
}

/// The map K/G_μ → K'/G_μ induced by inclusion, where K' is the level
/// fiber of the momentum map of the isotropy group: it preserves the reduced
/// forms, is injective, and has codimension dim g − dim g_μ.
pub fn check_general_embedding(set: &Setting, mu: &[f64], pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Record>, ReduceError> {
    let rel = settings.tol.svd_rel;
    let z = set.isotropy(mu, settings);
    let (d, dmu) = (set.action().dim(), z.ncols());
    let (mut incl, mut pull, mut gap, mut det) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let (mut inj, mut codim_ok) = (true, true);
    let mut codims = Vec::new();
    for x in pts {
        let rf = set.reduce_fiber(mu, x, settings)?;
        let kk = null_space(&(z.transpose() * set.momentum.tj_rho(x)?), rel);
        let g2 = orth(&(set.action().psi_matrix(x)? * &z), rel);
        gap = gap.max(subspace_distance(&g2, &rf.g, settings.tol.regular_rank_rel));
        let q2 = complement_within(&kk, &g2, rel);
        let om2 = q2.transpose() * &rf.w * &q2;
        incl = incl.max(containment_residual(&kk, &rf.k, settings.tol.regular_rank_rel));
        let t = q2.transpose() * &rf.q;
        pull = pull.max(max_abs(&(t.transpose() * &om2 * &t - &rf.omega)));
        inj &= rank(&t, settings.tol.regular_rank_rel) == rf.dim();
        det = det.min(scaled_det(&om2).abs());
        let c = q2.ncols() as i64 - rf.dim() as i64;
        codim_ok &= c == (d - dmu) as i64;
        codims.push(c);
    }
    let n = Sample::Sampled(pts.len());
    let anchor = "reduced-space-embeds-in-isotropy-reduction";
    let codim = codims.first().copied().unwrap_or(0);
    Ok(vec![
        Record::new("embedding/inclusion", anchor, n.clone(), incl.max(gap), settings.tol.subspace),
        Record::new("embedding/pullback", anchor, n.clone(), pull, settings.tol.pullback),
        Record::verdict("embedding/injective", anchor, n.clone(), 0.0, 0.0, inj),
        Record::verdict("embedding/target-nondegenerate", anchor, n.clone(), det, settings.tol.nondegenerate_det, det > settings.tol.nondegenerate_det),
        Record::verdict("embedding/codimension", anchor, n, codim as f64, 0.0, codim_ok)
            .with_note(format!("codimension {codim}, dim g − dim g_μ = {}", d - dmu)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Fixture;

    fn setup(name: &str) -> (Fixture, Setting, QuotientModel) {
        let f = fixtures::load(name).unwrap();
        let set = Setting::from_fixture(&f).unwrap();
        let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).unwrap();
        (f, set, quo)
    }

    #[test]
    fn zero_level_isomorphisms() {
        let s = Settings::default();
        for name in ["fix-tm2-translation", "fix-act", "fix-mag"] {
            let (_, set, quo) = setup(name);
            let mu = vec![0.0; set.action().dim()];
            let pts = set.level_points(&mu, 8, &s).unwrap();
            let recs = check_mu_zero(&set, &quo, &pts, &s).unwrap();
            assert!(recs.iter().all(|r| r.pass), "{name}: {recs:?}");
        }
    }

    #[test]
    fn magnetic_shift_on_heisenberg_like_bundle() {
        let s = Settings::default();
        let (f, set, quo) = setup("fix-mag");
        let mu = f.mu.clone().unwrap();
        let mag = MagneticTerm::new(&set.parent_action, &quo, f.connection.as_ref().unwrap(), &mu).unwrap();
        // d(dx3 + x1 dx2) = dx1∧dx2.
        assert_eq!(mag.b.get(&[0, 1]), Expr::one());
        let recs = mag.check(&set.parent_action, &quo, f.connection.as_ref().unwrap(), &mu, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        let pts = set.level_points(&mu, 8, &s).unwrap();
        let recs = check_shifted(&set, &quo, &mag, &mu, &pts, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn shifted_affine_case() {
        let s = Settings::default();
        let (f, set, quo) = setup("fix-act");
        let mu = f.mu.clone().unwrap();
        let mag = MagneticTerm::new(&set.parent_action, &quo, f.connection.as_ref().unwrap(), &mu).unwrap();
        let recs = mag.check(&set.parent_action, &quo, f.connection.as_ref().unwrap(), &mu, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        let pts = set.level_points(&mu, 8, &s).unwrap();
        let recs = check_shifted(&set, &quo, &mag, &mu, &pts, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn rotation_embedding_has_codimension_two() {
        let s = Settings::default();
        let f = fixtures::load("fix-so3-act").unwrap();
        let set = Setting::from_fixture(&f).unwrap();
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 8, &s).unwrap();
        let recs = check_general_embedding(&set, &mu, &pts, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        assert_eq!(recs[4].residual, 2.0);
    }

    #[test]
    fn abelian_embedding_is_onto() {
        let s = Settings::default();
        let (f, set, _) = setup("fix-mag");
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 5, &s).unwrap();
        let recs = check_general_embedding(&set, &mu, &pts, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        assert_eq!(recs[4].residual, 0.0);
    }
}
