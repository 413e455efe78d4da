use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crkernel::barrier::tangent_fields;
use crkernel::form::{cf_power, cf_product_formula, koppelman_residual, random_section, BarrierRegistry};
use crkernel::kernels::{index_sets_prime, BundleOptions, Identity, KernelBundle};
use crkernel::poly::Poly;
use crkernel::quadrature::{holder_probe, homotopy_check, scaling_probe, CompiledForm, Patch, SamplePlan, TestForm};
use crkernel::sampling;
use crkernel::simplicial::{Chain, Simplex, Vertex};

use crate::config::{Command, RunConfig};
use crate::{CliError, Table};

pub fn run(cfg: &RunConfig, command: Command, out: &Path) -> Result<bool, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))?;
    match command {
        Command::Verify => verify(cfg, out),
        Command::Scaling => scaling(cfg, out),
        Command::Holder => holder(cfg, out),
        Command::Solve => solve(cfg, out),
        Command::Report => crate::report::merge(out),
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

fn bundle(cfg: &RunConfig) -> Result<KernelBundle, CliError> {
    let opts = BundleOptions { validate_samples: cfg.barrier_samples, m_override: cfg.m_override, ..Default::default() };
    KernelBundle::build(&cfg.model, &opts).map_err(internal)
}

fn status(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn random_chain(rng: &mut ChaCha8Rng, dim: usize) -> Chain {
    let p = rng.random_range(0..=4);
    let mut c = Chain::zero();
    for _ in 0..rng.random_range(1..=3) {
        let vs: Vec<Vertex> = (0..=p)
            .map(|_| Vertex::from_ints(&(0..dim).map(|_| rng.random_range(-3..=3)).collect::<Vec<_>>()))
            .collect();
        c.add_term(rng.random_range(-2..=2), Simplex(vs));
    }
    c
}

/// Runs every exact identity suite and writes `verify.csv`.
fn verify(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let mut t = Table::new(&["identity", "residual_terms", "status"]);
    let mut row = |name: &str, terms: usize| {
        t.push(vec![name.to_string(), terms.to_string(), status(terms == 0).to_string()]);
        terms == 0
    };
    let mut ok = true;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut sq, mut comm, mut prism) = (0, 0, 0);
    for _ in 0..cfg.trials.max(100) {
        let c = random_chain(&mut rng, 4);
        sq += c.boundary().and_then(|b| b.boundary()).map_err(internal)?.len();
        let lhs = c.boundary().and_then(|b| b.subdivide(1)).map_err(internal)?;
        comm += lhs.sub(&c.subdivide(1).and_then(|s| s.boundary()).map_err(internal)?).len();
        let h = c.prism().and_then(|p| p.boundary()).map_err(internal)?;
        let h = h.add(&c.boundary().and_then(|b| b.prism()).map_err(internal)?);
        prism += h.sub(&c.subdivide(1).map_err(internal)?.sub(&c)).len();
    }
    ok &= row("boundary_squared", sq);
    ok &= row("subdivision_commutes_with_boundary", comm);
    ok &= row("prism_homotopy", prism);

    let n = cfg.model.n;
    let (mut chain_terms, mut product_terms) = (0, 0);
    for _ in 0..cfg.trials {
        let mut reg = BarrierRegistry::new();
        let maps: Vec<_> = (0..3).map(|_| random_section(n, 2, 2, &mut rng, &mut reg)).collect();
        chain_terms += koppelman_residual(n, &maps[..2], &reg).map_err(internal)?.len();
        chain_terms += koppelman_residual(n, &maps, &reg).map_err(internal)?.len();
        for k in 0..=2 {
            let a = cf_power(n, &maps[0], k, &reg).map_err(internal)?;
            let b = cf_product_formula(n, &maps[0], k, &reg).map_err(internal)?;
            let d = a.sub(&b).map_err(internal)?;
            product_terms += if d.is_zero(&reg) { 0 } else { d.len().max(1) };
        }
    }
    ok &= row("koppelman_random_sections", chain_terms);
    ok &= row("cf_product_formula", product_terms);

    let b = bundle(cfg)?;
    let reg = &b.reg;
    let (k, q) = (cfg.model.k, cfg.model.q);
    ok &= row("depth_selection", usize::from(b.depth.selected.is_err()));
    let bad = b.data.values().filter(|d| d.check_invariants(reg, q + k).is_err()).count();
    ok &= row("leray_invariants", bad);
    let bad = b.validation.iter().filter(|(_, r)| r.min_slack < cfg.tol.slack_floor).count();
    ok &= row("barrier_inequality", bad);
    let basis: Vec<_> = (1..=k as i32).map(|j| b.datum(&Vertex::unit(k, j))).collect::<Result<_, _>>().map_err(internal)?;
    let fields = tangent_fields(&cfg.model, &basis).map_err(internal)?;
    ok &= row("tangent_fields", usize::from(fields.verify(&basis, reg).is_err()));
    let mut total = Chain::zero();
    for i in index_sets_prime(k) {
        total = total.add(&Chain::simplex(i.sigma(k)).boundary().map_err(internal)?.scale(i.sgn()));
    }
    ok &= row("signed_boundary_sum", total.len());
    let high: usize = b
        .high_degree_parts()
        .map_err(internal)?
        .iter()
        .map(|(_, r)| if r.is_zero(reg) { 0 } else { r.len().max(1) })
        .sum();
    ok &= row("high_degree_vanishing", high);
    for id in Identity::ALL {
        let r = b.verify_identity(id).map_err(internal)?;
        ok &= row(id.name(), if r.is_zero(reg) { 0 } else { r.len().max(1) });
    }
    let s = b.structure_check();
    ok &= row("structure_check", usize::from(s.is_err()));
    t.write(&out.join("verify.csv"))?;
    Ok(ok)
}

struct Numeric {
    bundle: KernelBundle,
    patch: Patch,
    point: Vec<f64>,
    plan: SamplePlan,
}

fn numeric(cfg: &RunConfig) -> Result<Numeric, CliError> {
    let bundle = bundle(cfg)?;
    let patch = Patch::new(&cfg.model, cfg.model.radius.to_f64()).map_err(internal)?;
    let point = cfg.point.clone().unwrap_or_else(|| patch.t0.clone());
    let plan = SamplePlan::new(cfg.samples, cfg.shells, cfg.seed);
    Ok(Numeric { bundle, patch, point, plan })
}

fn num(x: f64) -> String {
    format!("{x:.9e}")
}

/// Writes `scaling.csv` (one row per kernel and radius) and `scaling_fit.csv`.
fn scaling(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let nm = numeric(cfg)?;
    let b = &nm.bundle;
    let mut rows = Table::new(&["kernel", "epsilon", "estimate", "stderr"]);
    let mut fit = Table::new(&["kernel", "slope", "low", "high", "status"]);
    let mut ok = true;
    let tol = &cfg.tol;
    for (name, expr, log_power, (lo, hi)) in [
        ("R", b.r().map_err(internal)?, 0, tol.r_slope),
        ("E", b.e().map_err(internal)?, 0, tol.e_slope),
        ("K", b.k().map_err(internal)?, cfg.model.k as u32, tol.k_slope),
    ] {
        let kern = CompiledForm::kernel(&expr, &b.reg);
        let rep = scaling_probe(&kern, &nm.patch, &nm.point, &cfg.epsilon, log_power, &nm.plan).map_err(internal)?;
        for r in &rep.rows {
            rows.push(vec![name.into(), num(r.x), num(r.value), num(r.stderr)]);
        }
        let pass = (lo..=hi).contains(&rep.slope);
        ok &= pass;
        fit.push(vec![name.into(), num(rep.slope), num(lo), num(hi), status(pass).into()]);
    }
    rows.write(&out.join("scaling.csv"))?;
    fit.write(&out.join("scaling_fit.csv"))?;
    Ok(ok)
}

/// Writes `holder.csv` and `holder_fit.csv` for both variable orders.
fn holder(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let nm = numeric(cfg)?;
    let kern = CompiledForm::kernel(&nm.bundle.r().map_err(internal)?, &nm.bundle.reg);
    let dir = cfg.direction.clone().unwrap_or_else(|| {
        let mut d = vec![0.0; nm.point.len()];
        d[0] = 1.0;
        d
    });
    let mut rows = Table::new(&["order", "separation", "D", "stderr"]);
    let mut fit = Table::new(&["order", "exponent", "min", "status"]);
    let mut ok = true;
    for (order, swapped) in [("zeta_z", false), ("z_zeta", true)] {
        let rep = holder_probe(&kern, &nm.patch, &nm.point, &dir, &cfg.separations, cfg.radius, swapped, &nm.plan)
            .map_err(internal)?;
        for r in &rep.rows {
            rows.push(vec![order.into(), num(r.x), num(r.value), num(r.stderr)]);
        }
        let pass = rep.slope >= cfg.tol.holder_min;
        ok &= pass;
        fit.push(vec![order.into(), num(rep.slope), num(cfg.tol.holder_min), status(pass).into()]);
    }
    rows.write(&out.join("holder.csv"))?;
    fit.write(&out.join("holder_fit.csv"))?;
    Ok(ok)
}

/// Checks the homotopy formula on a top-degree bump and on a bump function;
/// writes `homotopy.csv` and `homotopy_fit.csv`.
fn solve(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let mut nm = numeric(cfg)?;
    let top_r = cfg.model.n - cfg.model.k;
    let top_kernel = nm.bundle.extract_solution_kernel(top_r - 1).map_err(internal)?;
    let low_kernel = nm.bundle.extract_solution_kernel(0).map_err(internal)?;
    let p = &nm.patch;
    let mut rng = sampling::stream(cfg.seed, 0x5017);
    let s = cfg.spread;
    let pts: Vec<Vec<f64>> =
        (0..cfg.points).map(|_| nm.point.iter().map(|c| c + rng.random_range(-s..s)).collect()).collect();
    let top = TestForm::new(p, &nm.point, cfg.bump_radius, vec![((0..top_r).collect(), Poly::one())]).map_err(internal)?;
    let fun = TestForm::new(p, &nm.point, cfg.bump_radius, vec![(vec![], Poly::one())]).map_err(internal)?;
    let mut rows = Table::new(&["variant", "point", "component", "residual", "stderr"]);
    let mut fit = Table::new(&["variant", "relative", "max", "status"]);
    let mut ok = true;
    for (name, f, kern) in [("top", &top, &top_kernel), ("function", &fun, &low_kernel)] {
        let rep = homotopy_check(f, kern, &nm.bundle.reg, p, &pts, cfg.step, &nm.plan).map_err(internal)?;
        for r in &rep.rows {
            rows.push(vec![
                name.into(),
                r.point.to_string(),
                r.component.to_string(),
                num((r.value - r.expected).norm()),
                num(r.stderr),
            ]);
        }
        let pass = rep.relative <= cfg.tol.homotopy_max;
        ok &= pass;
        fit.push(vec![name.into(), num(rep.relative), num(cfg.tol.homotopy_max), status(pass).into()]);
    }
    rows.write(&out.join("homotopy.csv"))?;
    fit.write(&out.join("homotopy_fit.csv"))?;
    Ok(ok)
}

/// One-line description of the run for `summary.txt`.
pub fn header(cfg: &RunConfig, command: Command) -> String {
    let mut s = String::new();
    let m = &cfg.model;
    let _ = write!(s, "command {command}; model {} (n = {}, k = {}, q = {}); seed {}", cfg.model_source, m.n, m.k, m.q, cfg.seed);
    if command != Command::Verify && command != Command::Report {
        let _ = write!(s, "; samples {}", cfg.samples);
    }
    s
}
