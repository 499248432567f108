//! One runner per command. Each returns residuals, pass flags and artifacts;
//! nothing is written to disk here.

use std::collections::BTreeMap;
use std::sync::Arc;

use loopsol::algebra::AlgebraContext;
use loopsol::birkhoff::{birkhoff_factor, goursat_solve, random_near_identity_loop, refactor_defect};
use loopsol::dressing::{chain_frame, readout, DressedFrame, DressedSolution, Dressing, FrameEvaluator, Hierarchy, VacuumFrame};
use loopsol::elliptic::{self, EllipticContext, Splitting};
use loopsol::geometry::{self, ImmersionKind};
use loopsol::grid::{Axis, SolutionGrid};
use loopsol::io::to_json_string;
use loopsol::jetcalc::{compute_q_sequence, flow_rhs, recursion_residuals, DiffPolyMatrix, Substitution};
use loopsol::laurent::LaurentLoop;
use loopsol::laxflow::{
    assemble_for, assemble_lax, assemble_minus1, assemble_uu0, default_lambdas, flatness_residual, lift, log_derivative,
    pde_residual, ConnectionField, Equation,
};
use loopsol::matrix::*;
use loopsol::tolerances::Tolerances;
use loopsol::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, GoursatData, SubstitutionTag};

/// What a run produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub residuals: BTreeMap<String, f64>,
    pub pass: BTreeMap<String, bool>,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub partial: bool,
    pub notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, name: &str, value: f64, tol: f64) {
        self.residuals.insert(name.into(), value);
        self.pass.insert(name.into(), value.is_finite() && value <= tol);
    }

    fn record(&mut self, name: &str, value: f64) {
        self.residuals.insert(name.into(), value);
    }

    fn artifact(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.artifacts.push((name.into(), bytes.into()));
    }

    fn csv(&mut self, name: &str, g: &SolutionGrid) -> Result<()> {
        let text = g.to_csv()?;
        self.artifact(name, text);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) {
        let text = to_json_string(v).expect("JSON values serialize");
        self.artifact(name, text + "\n");
    }

    /// A computation failed after validation: keep what was produced and flag it.
    pub fn fail(&mut self, err: loopsol::Error) {
        self.partial = true;
        self.notes.push(err.to_string());
        self.pass.insert("completed".into(), false);
    }

    pub fn passed(&self) -> bool {
        self.pass.values().all(|&p| p)
    }
}

pub fn run(ctx: &Arc<AlgebraContext>, exp: &Experiment, tol: &Tolerances, seed: u64, out: &mut Outcome) -> Result<()> {
    match exp {
        Experiment::ComputeQ { b, j } => compute_q(ctx, b, *j, out),
        Experiment::FlowRhs { b, j, substitution } => flow(ctx, b, *j, *substitution, out),
        Experiment::Dress { hierarchy, chain, x, t, equation } => dress(ctx, hierarchy, chain, *x, *t, equation, tol, out),
        Experiment::Goursat { x, t, data, options } => goursat(ctx, *x, *t, data, options, tol, out),
        Experiment::FiniteType { ec, potential, x, y, substeps } => finite_type(ec, potential, *x, *y, *substeps, tol, out),
        Experiment::VerifyEquation { equation, fields, .. } => verify_equation(ctx, equation, fields, tol, out),
        Experiment::VerifyBirkhoff { count, k, amplitude } => verify_birkhoff(ctx, *count, *k, *amplitude, seed, tol, out),
        Experiment::Extract { hierarchy, chain, x, t, kind } => extract(ctx, hierarchy, chain, *x, *t, *kind, tol, out),
    }
}

fn names(ctx: &AlgebraContext) -> Vec<&'static str> {
    if ctx.dim == 2 {
        vec!["q", "r"]
    } else {
        vec![]
    }
}

fn recursion_check(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize, out: &mut Outcome) -> Result<()> {
    let nonzero = recursion_residuals(ctx, b, j)?.iter().filter(|m| !m.is_zero()).count();
    out.check("recursion_nonzero", nonzero as f64, 0.0);
    Ok(())
}

fn compute_q(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize, out: &mut Outcome) -> Result<()> {
    let qs = compute_q_sequence(ctx, b, j)?;
    out.json("q.json", &qs[j].to_json());
    out.json("q_sequence.json", &serde_json::Value::Array(qs.iter().map(DiffPolyMatrix::to_json).collect()));
    let nm = names(ctx);
    let text: String = qs.iter().enumerate().map(|(k, q)| format!("Q_{k} = {}\n", q.pretty(&nm))).collect();
    out.artifact("q.txt", text);
    recursion_check(ctx, b, j, out)
}

fn flow(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize, sub: Option<SubstitutionTag>, out: &mut Outcome) -> Result<()> {
    let mut rhs = flow_rhs(ctx, b, j)?;
    if let Some(s) = sub {
        let s = match s {
            SubstitutionTag::Su2 => Substitution::su2(),
            SubstitutionTag::So2 => Substitution::so2(),
        };
        rhs = s.apply(&rhs);
    }
    out.json("rhs.json", &rhs.to_json());
    out.artifact("rhs.txt", format!("u_t = {}\n", rhs.pretty(&names(ctx))));
    recursion_check(ctx, b, j, out)
}

fn vacuum(ctx: &Arc<AlgebraContext>, h: &Hierarchy) -> Result<Arc<dyn FrameEvaluator>> {
    Ok(Arc::new(VacuumFrame::new(ctx.clone(), h.clone())?))
}

/// λ away from the unit circle's special points and from every pole.
fn probe_lambda(singular: &[C64]) -> C64 {
    let candidates = [c(0.37, 0.21), c(-0.43, 0.17), c(0.29, -0.61), c(1.3, 0.45)];
    candidates
        .into_iter()
        .max_by(|a, b| {
            let gap = |z: &C64| singular.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min);
            gap(a).total_cmp(&gap(b))
        })
        .expect("nonempty")
}

fn connection_of(ctx: &AlgebraContext, h: &Hierarchy, sol: &DressedSolution) -> Result<Option<ConnectionField>> {
    Ok(match h {
        Hierarchy::Flow { b, j } if *j > 0 => Some(assemble_lax(ctx, b, *j as usize, &sol.u)?),
        Hierarchy::Flow { .. } => None,
        Hierarchy::Minus1 => Some(assemble_minus1(ctx, &sol.u, &sol.v)?),
        Hierarchy::Uu0 => Some(assemble_uu0(ctx, &sol.v)?),
        Hierarchy::Elliptic => None,
    })
}

/// Grid nodes used for the pointwise projection check.
fn sample_nodes(x: Axis, t: Axis) -> Vec<(f64, f64)> {
    let pick = |a: Axis| [0, a.n / 4, a.n / 2, 3 * a.n / 4, a.n - 1].map(|i| a.at(i));
    let (xs, ts) = (pick(x), pick(t));
    xs.iter().flat_map(|&xv| ts.iter().map(move |&tv| (xv, tv))).collect()
}

#[allow(clippy::too_many_arguments)]
fn dress(
    ctx: &Arc<AlgebraContext>,
    h: &Hierarchy,
    chain: &[Dressing],
    x: Axis,
    t: Axis,
    eq: &Equation,
    tol: &Tolerances,
    out: &mut Outcome,
) -> Result<()> {
    let mut frame = vacuum(ctx, h)?;
    let mut reality: f64 = 0.0;
    let mut projection: Option<f64> = None;
    // Validates distinct poles before the step-by-step build below.
    chain_frame(chain, frame.clone())?;
    for el in chain {
        reality = reality.max(el.reality_defect(ctx)?);
        let step = DressedFrame::new(frame, el.clone())?;
        if matches!(el, Dressing::Simple(_)) {
            for (xv, tv) in sample_nodes(x, t) {
                if let Ok(d) = step.projection_defect(xv, tv) {
                    projection = Some(projection.unwrap_or(0.0).max(d));
                }
            }
        }
        frame = Arc::new(step);
    }
    if !chain.is_empty() {
        out.check("reality", reality, tol.reality);
    }
    if let Some(p) = projection {
        out.check("projection", p, tol.projection);
    }
    let poles: Vec<C64> = chain.iter().flat_map(|e| e.poles()).collect();
    let sol = DressedSolution::sample(frame.clone(), poles.clone(), x, t);
    out.record("masked_points", sol.singular.len() as f64);
    if !sol.singular.is_empty() {
        out.notes.push(format!("{} grid points are singular and were masked", sol.singular.len()));
    }

    match h {
        Hierarchy::Flow { .. } => out.csv("u.csv", &sol.u)?,
        Hierarchy::Minus1 => {
            out.csv("u.csv", &sol.u)?;
            out.csv("v.csv", &sol.v)?;
        }
        Hierarchy::Uu0 => out.csv("v.csv", &sol.v)?,
        Hierarchy::Elliptic => {}
    }

    let scalar = match eq {
        Equation::Nls | Equation::Mkdv => Some(readout::q_from_u(&sol.u)),
        Equation::Sge => Some(readout::sge_angle(&sol.v)),
        Equation::Tzitzeica => Some(readout::tzitzeica_w(&sol.v)),
        Equation::Grassmann => Some(readout::grassmann_f(&sol.v)),
        Equation::Harmonic => Some(elliptic::harmonic_map(frame.as_ref(), x, t)),
        _ => None,
    };
    let residual = match (&scalar, eq) {
        (Some(s), Equation::Harmonic) => elliptic::harmonic_residual(ctx, s)?,
        (Some(s), _) => pde_residual(eq, ctx, &[s])?,
        (None, Equation::Minus1) => pde_residual(eq, ctx, &[&sol.u, &sol.v])?,
        (None, Equation::Uu0) => pde_residual(eq, ctx, &[&sol.v])?,
        (None, _) => pde_residual(eq, ctx, &[&sol.u])?,
    };
    out.check("pde_residual", residual, tol.pde_residual);
    if let Some(s) = &scalar {
        let name = if *eq == Equation::Harmonic { "s.csv".to_string() } else { format!("{}.csv", eq.tag()) };
        out.csv(&name, s)?;
        let generic = match h {
            Hierarchy::Minus1 => Some(pde_residual(&Equation::Minus1, ctx, &[&sol.u, &sol.v])?),
            Hierarchy::Uu0 => Some(pde_residual(&Equation::Uu0, ctx, &[&sol.v])?),
            Hierarchy::Flow { b, j } if *j > 0 => {
                Some(pde_residual(&Equation::Flow { b: b.clone(), j: *j as usize }, ctx, &[&sol.u])?)
            }
            _ => None,
        };
        if let Some(g) = generic {
            out.check("hierarchy_residual", g, tol.pde_residual);
        }
    }

    if let Some(theta) = connection_of(ctx, h, &sol)? {
        out.check("flatness", flatness_residual(&theta, &default_lambdas())?, tol.flatness);
        let mut singular = poles;
        singular.extend(frame.singular_lambdas());
        let lambda = probe_lambda(&singular);
        let (ea, eb) = theta.sample(lambda);
        let (la, lb) = log_derivative(&sol.frames(lambda));
        out.check("log_derivative", la.sup_distance(&ea)?.max(lb.sup_distance(&eb)?), tol.log_derivative);
    }
    Ok(())
}

fn axis_sup(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..n).map(f).filter(|v| v.is_finite()).fold(0.0, f64::max)
}

fn goursat(
    ctx: &Arc<AlgebraContext>,
    x: Axis,
    t: Axis,
    data: &GoursatData,
    options: &loopsol::birkhoff::GoursatOptions,
    tol: &Tolerances,
    out: &mut Outcome,
) -> Result<()> {
    let n = ctx.dim;
    let dressed = match data {
        GoursatData::Dressed { chain } => Some(chain_frame(chain, vacuum(ctx, &Hierarchy::Minus1)?)?),
        GoursatData::Profile { .. } => None,
    };
    let b = ctx.b.clone();
    let xi = |xv: f64| -> ComplexMatrix {
        match (data, &dressed) {
            (GoursatData::Profile { xi, profile, scale, .. }, _) => xi * re(profile.eval(scale * xv)),
            (_, Some(f)) => f.fields(xv, 0.0).map(|fl| fl.u).unwrap_or_else(|_| nan_matrix(n)),
            _ => unreachable!("dressed data carries a frame"),
        }
    };
    let eta = |tv: f64| -> ComplexMatrix {
        match (data, &dressed) {
            (GoursatData::Profile { generator, rate, .. }, _) => {
                let g = expm(&(generator * re(rate * tv)));
                expm(&(generator * re(-rate * tv))) * &b * g
            }
            (_, Some(f)) => f.fields(0.0, tv).map(|fl| fl.v).unwrap_or_else(|_| nan_matrix(n)),
            _ => unreachable!("dressed data carries a frame"),
        }
    };
    let sol = goursat_solve(ctx, &xi, &eta, x, t, options)?;
    out.csv("u.csv", &sol.u)?;
    out.csv("v.csv", &sol.v)?;
    let (ix0, it0) = (x.node(0.0).expect("validated"), t.node(0.0).expect("validated"));
    let init = axis_sup(x.n, |ix| dist(sol.u.get(ix, it0), &xi(x.at(ix))))
        .max(axis_sup(t.n, |it| dist(sol.v.get(ix0, it), &eta(t.at(it)))));
    out.check("initial_data", init, tol.goursat_initial_data);
    out.check("pde_residual", pde_residual(&Equation::Minus1, ctx, &[&sol.u, &sol.v])?, tol.goursat_residual);
    let reference = eigenvalues(&b);
    let spectrum = sol
        .v
        .values()
        .iter()
        .filter(|m| is_finite(m))
        .map(|m| spectrum_distance(&eigenvalues(m), &reference))
        .fold(0.0, f64::max);
    out.check("spectrum", spectrum, tol.goursat_spectrum);
    out.check("failed_points", sol.failures.len() as f64, 0.0);
    if !sol.failures.is_empty() {
        out.partial = true;
        out.notes.push(format!("factorization failed at {} grid points; they are masked", sol.failures.len()));
    }
    out.record("max_condition", sol.max_condition);
    out.record("max_reconstruction", sol.max_reconstruction);
    if let Some(f) = dressed {
        let reference = DressedSolution::sample(f, vec![], x, t);
        let mut worst: f64 = 0.0;
        for it in 1..t.n - 1 {
            for ix in 1..x.n - 1 {
                let d = dist(sol.u.get(ix, it), reference.u.get(ix, it)).max(dist(sol.v.get(ix, it), reference.v.get(ix, it)));
                if d.is_finite() {
                    worst = worst.max(d);
                }
            }
        }
        out.check("cross_validation", worst, tol.goursat_cross_validation);
    }
    Ok(())
}

fn finite_type(
    ec: &EllipticContext,
    v: &LaurentLoop,
    x: Axis,
    y: Axis,
    substeps: usize,
    tol: &Tolerances,
    out: &mut Outcome,
) -> Result<()> {
    let ctx = &ec.base;
    let field = elliptic::finite_type_integrate_with(ec, v, x, y, substeps)?;
    let circle: Vec<C64> =
        (0..8).map(|k| C64::from_polar(1.0, std::f64::consts::PI * (k as f64 + 0.5) / 4.0)).collect();
    out.check("isospectral", elliptic::isospectral_drift(&field, v, &circle), tol.isospectral);
    out.check("reality", elliptic::reality_defect(ctx, &field), tol.reality);
    let slots = elliptic::slots(ec, &field);
    let first = if ec.splitting == Splitting::Iwasawa { 0 } else { 1 };
    for (k, s) in slots.iter().enumerate() {
        out.csv(&format!("slot{}.csv", k + first), s)?;
    }
    let normalized = ec.splitting == Splitting::Normalized;
    out.check("system_residual", elliptic::gtau_residual(ctx, &slots, normalized)?, tol.harmonic_residual);
    if !normalized && ctx.sigma.as_ref().is_some_and(|s| !s.antilinear) && ec.m == 1 {
        out.check("primitive", elliptic::primitive_defect(ctx, &slots[0], &slots[1])?, tol.property);
    }
    if ec.m == 1 && normalized && ctx.sigma.is_none() {
        let rec = elliptic::recover_frame(ec, &field, &[re(-1.0), re(1.0)])?;
        let (fm, fp) = (&rec.frames[0].frames, &rec.frames[1].frames);
        let s = fm.map_indexed(|ix, iy| match inverse(fp.get(ix, iy)) {
            Ok(inv) => fm.get(ix, iy) * inv,
            Err(_) => nan_matrix(ctx.dim),
        });
        out.check("harmonic_residual", elliptic::harmonic_residual(ctx, &s)?, tol.harmonic_residual);
        out.csv("s.csv", &s)?;
    }
    Ok(())
}

fn verify_equation(ctx: &AlgebraContext, eq: &Equation, fields: &[SolutionGrid], tol: &Tolerances, out: &mut Outcome) -> Result<()> {
    let refs: Vec<&SolutionGrid> = fields.iter().collect();
    let residual = if *eq == Equation::Harmonic {
        elliptic::harmonic_residual(ctx, refs[0])?
    } else {
        pde_residual(eq, ctx, &refs)?
    };
    out.check("pde_residual", residual, tol.pde_residual);
    if *eq == Equation::Harmonic {
        return Ok(());
    }
    let lifted = if eq.arity() == 1 { lift(eq, ctx, &fields[0])? } else { fields.to_vec() };
    let theta = assemble_for(eq, ctx, &lifted)?;
    out.check("flatness", flatness_residual(&theta, &default_lambdas())?, tol.flatness);
    Ok(())
}

fn verify_birkhoff(
    ctx: &AlgebraContext,
    count: usize,
    k: usize,
    amplitude: f64,
    seed: u64,
    tol: &Tolerances,
    out: &mut Outcome,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut recon, mut idem): (f64, f64) = (0.0, 0.0);
    for _ in 0..count {
        let g = random_near_identity_loop(&mut rng, ctx.dim, k, amplitude);
        let rep = birkhoff_factor(&g)?;
        recon = recon.max(rep.reconstruction_residual);
        idem = idem.max(refactor_defect(&rep)?);
    }
    out.check("reconstruction", recon, tol.birkhoff_reconstruction);
    out.check("idempotence", idem, tol.birkhoff_idempotence);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn extract(
    ctx: &Arc<AlgebraContext>,
    h: &Hierarchy,
    chain: &[Dressing],
    x: Axis,
    t: Axis,
    kind: ImmersionKind,
    tol: &Tolerances,
    out: &mut Outcome,
) -> Result<()> {
    let frame = chain_frame(chain, vacuum(ctx, h)?)?;
    let f = frame.as_ref();
    let im = match kind {
        ImmersionKind::CurvedFlat => {
            let y = geometry::curved_flat_tangent(f, x, t)?;
            out.check("gram", geometry::gram_drift(ctx, &y)?, tol.gram);
            y
        }
        ImmersionKind::Cartan => {
            let psi = geometry::cartan_map(f, x, t)?;
            out.check("cartan_membership", geometry::cartan_membership_defect(ctx, &psi)?, tol.cartan);
            out.record("cartan_derivative", geometry::cartan_derivative_defect(f, &psi)?);
            psi
        }
        ImmersionKind::Harmonic => {
            let s = geometry::harmonic_from_minus1(f, x, t)?;
            out.check("lorentz_residual", geometry::lorentz_harmonic_residual(&s)?, tol.pde_residual);
            out.check("spectrum", geometry::harmonic_spectrum_drift(ctx, &s), tol.spectrum);
            s
        }
    };
    if im.is_group_valued() && geometry::is_compact(ctx) {
        out.record("unitarity", im.unitarity_defect());
    }
    out.record("masked_points", im.values.masked_count() as f64);
    out.csv("immersion.csv", &im.values)?;
    Ok(())
}
