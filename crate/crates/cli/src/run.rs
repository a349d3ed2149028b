//! Mode dispatch, artifacts and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use fraclimit_core::density::DensityField;
use fraclimit_core::kinetic::{init_ensemble, Scenario};
use fraclimit_core::ops::{
    convergence_study, flux_corrected, op_d2sm1, op_kappa_surface, op_kappa_volume, op_ld, op_leps, op_lm, op_lsr,
    op_regional, Bc, ConvergenceReport, OpContext, OperatorId,
};
use fraclimit_core::solver::{
    assemble, compare, energy, evolve_snapshots, l2_project, mass, reference_specular, to_field, write_matrix_market,
    write_nodal_csv, FourierBox, Mesh1D,
};
use fraclimit_core::testfn::{ds_family, gaussian_bump, TestFunction};
use fraclimit_core::{make_default_equilibrium, Equilibrium, KernelTable};
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};
use crate::CliError;

/// Result of a run that got as far as writing its artifacts.
#[derive(Debug)]
pub struct Outcome {
    pub checks_passed: bool,
    pub messages: Vec<String>,
    pub manifest: PathBuf,
}

struct Recorder {
    out: PathBuf,
    phases: Vec<(String, f64)>,
    messages: Vec<String>,
    checks_passed: bool,
    extra: serde_json::Map<String, Value>,
}

impl Recorder {
    fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let t0 = Instant::now();
        let r = f(self);
        self.phases.push((name.to_string(), t0.elapsed().as_secs_f64()));
        r
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.checks_passed &= ok;
        self.messages.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn tag(x: f64) -> String {
    format!("{x}")
}

/// Runs the configured mode, writing artifacts and `manifest.json` to `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let t0 = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::config(None, format!("cannot start {} workers: {e}", cfg.workers)))?;
    let mut rec = Recorder {
        out: out.to_path_buf(),
        phases: Vec::new(),
        messages: Vec::new(),
        checks_passed: true,
        extra: serde_json::Map::new(),
    };
    pool.install(|| match cfg.mode {
        Mode::SimulateKinetic => simulate(cfg, &mut rec),
        Mode::EvalOperators => eval_operators(cfg, &mut rec),
        Mode::Converge => converge(cfg, &mut rec),
        Mode::SolveLimit => solve_limit(cfg, &mut rec).map(|_| ()),
        Mode::Compare => compare_files(cfg, &mut rec),
        Mode::FullPipeline => full_pipeline(cfg, &mut rec),
    })?;
    let cfg_path = rec.path("config.resolved.ini");
    fs::write(&cfg_path, cfg.raw.to_ini()).map_err(|e| io_err(&cfg_path, e))?;
    let eq = make_default_equilibrium(cfg.params)?;
    let manifest = json!({
        "tool": "fraclimit",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode.name(),
        "config": cfg.raw.to_json(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "constants": serde_json::to_value(eq.constants()).expect("plain struct"),
        "started_unix": started,
        "wall_clock_s": t0.elapsed().as_secs_f64(),
        "phases": rec.phases.iter().map(|(n, s)| json!({"name": n, "seconds": s})).collect::<Vec<_>>(),
        "checks_passed": rec.checks_passed,
        "checks": rec.messages,
        "results": Value::Object(rec.extra.clone()),
    });
    let path = rec.path("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("json values serialise");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(Outcome {
        checks_passed: rec.checks_passed,
        messages: rec.messages,
        manifest: path,
    })
}

fn context(cfg: &RunConfig, eq: &Equilibrium) -> Result<OpContext, CliError> {
    let table = match &cfg.kernel_cache {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            KernelTable::load_or_build(eq, dir)?
        }
        None => KernelTable::build(eq)?,
    };
    Ok(OpContext::with_table(eq, Arc::new(table)))
}

/// Resolves ψ ids: members of the standard family, `ds` for all of it,
/// `bump` for the configured Gaussian, and `flux:<id>` for the flux-free
/// correction of any of these.
fn test_functions(cfg: &RunConfig, ctx: &OpContext) -> Result<Vec<TestFunction>, CliError> {
    let family = ds_family();
    let mut out = Vec::new();
    for id in &cfg.operators.psi {
        let (flux, base) = match id.strip_prefix("flux:") {
            Some(b) => (true, b),
            None => (false, id.as_str()),
        };
        let found: Vec<TestFunction> = match base {
            "ds" => family.clone(),
            "bump" => {
                let (c, s) = match cfg.kinetic.initial {
                    fraclimit_core::kinetic::InitialProfile::Gaussian { center, sigma } => (center, sigma),
                    _ => (2.0, 1.0),
                };
                vec![gaussian_bump(c, s)]
            }
            other => family.iter().filter(|f| f.id == other).cloned().collect(),
        };
        if found.is_empty() {
            let ids: Vec<&str> = family.iter().map(|f| f.id.as_str()).collect();
            return Err(CliError::config(
                None,
                format!("`operators.psi`: unknown test function `{base}` (known: ds, bump, {})", ids.join(", ")),
            ));
        }
        for f in found {
            if flux {
                let mut g = flux_corrected(&f, ctx)?;
                g.id = format!("flux:{}", f.id);
                out.push(g);
            } else {
                out.push(f);
            }
        }
    }
    Ok(out)
}

fn simulate(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), CliError> {
    let k = &cfg.kinetic;
    let eq = make_default_equilibrium(cfg.params)?;
    let mut ens = rec.phase("init", |_| {
        Ok(init_ensemble(&k.initial, k.particles, cfg.params, &eq, cfg.seed)?.with_scenario(Scenario {
            far_mirror: k.far_mirror,
        }))
    })?;
    let fields = rec.phase("transport", |_| Ok(ens.run(k.t_end, &k.snapshots, &k.grid)?))?;
    rec.phase("write", |rec| {
        for f in &fields {
            let p = rec.path(&format!("density_t{}.csv", tag(f.t)));
            f.write_csv(&p)?;
        }
        Ok(())
    })?;
    rec.extra.insert("mean_scatterings".into(), json!(ens.mean_scatterings()));
    rec.extra.insert("velocity_ks".into(), json!(ens.velocity_ks()));
    for f in &fields {
        let total = f.mass() + f.out_of_window;
        rec.check((total - 1.0).abs() < 1e-9, format!("t={} mass in + out of window = {total:.12}", f.t));
    }
    Ok(())
}

fn eval_operators(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), CliError> {
    let eq = make_default_equilibrium(cfg.params)?;
    let ctx = rec.phase("kernel_table", |_| context(cfg, &eq))?;
    let psis = test_functions(cfg, &ctx)?;
    let s = cfg.params.s;
    let eps = cfg.params.eps;
    let bc = Bc::from_alpha(cfg.params.alpha);
    let path = rec.path("operators.csv");
    let mut rows = Vec::new();
    let mut worst_kappa: f64 = 0.0;
    rec.phase("evaluate", |_| {
        for psi in &psis {
            for &x in &cfg.operators.points {
                let p = [x, 0.0, 0.0];
                let kv = op_kappa_volume(psi, &p, &ctx)?;
                let ks = op_kappa_surface(psi, &p, &ctx)?;
                if ks.abs().max(kv.abs()) > 1e-12 {
                    worst_kappa = worst_kappa.max((kv - ks).abs() / ks.abs().max(kv.abs()));
                }
                let mut vals = vec![
                    ("Lsr", op_lsr(psi, &p, &ctx)?),
                    ("regional", op_regional(psi, &p, &ctx)?),
                    ("kappa_volume", kv),
                    ("kappa_surface", ks),
                    ("LM", op_lm(psi, &p, &ctx, cfg.params.alpha)?),
                ];
                if cfg.params.d == 1 {
                    vals.push(("Leps", op_leps(psi, &p, &ctx, eps, bc)?));
                    if s > 0.5 {
                        vals.push(("LD", op_ld(psi, &p, &ctx)?));
                        vals.push(("D2sm1", op_d2sm1(psi, &p, &ctx)?[0]));
                    }
                }
                for (name, v) in vals {
                    rows.push(format!("{},{x},{name},{v:.17e}", psi.id));
                }
            }
        }
        Ok(())
    })?;
    let mut text = String::from("psi_id,x,operator,value\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    rec.check(worst_kappa < 1e-4, format!("kappa volume/surface worst relative gap {worst_kappa:.3e}"));
    Ok(())
}

fn converge(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), CliError> {
    let eq = make_default_equilibrium(cfg.params)?;
    let ctx = rec.phase("kernel_table", |_| context(cfg, &eq))?;
    let psis = test_functions(cfg, &ctx)?;
    let o = &cfg.operators;
    let (flux_ops, diff_ops): (Vec<OperatorId>, Vec<OperatorId>) =
        o.ops.iter().partition(|op| **op == OperatorId::BoundaryFlux);
    let mut report = ConvergenceReport::default();
    if !diff_ops.is_empty() {
        let r = rec.phase("operators", |_| Ok(convergence_study(&psis, &o.eps_list, &diff_ops, &ctx)?))?;
        for c in r.checks(o.max_ratio) {
            rec.check(
                c.monotone,
                format!("{} {} worst ratio {:.3} (bar {})", c.operator, c.psi_id, c.worst_ratio, o.max_ratio),
            );
        }
        report.rows.extend(r.rows);
    }
    if !flux_ops.is_empty() {
        // the flux only decays for ψ with vanishing nonlocal flux
        let flux_psis = psis
            .iter()
            .map(|p| {
                if p.id.starts_with("flux:") {
                    return Ok(p.clone());
                }
                let mut g = flux_corrected(p, &ctx)?;
                g.id = format!("flux:{}", p.id);
                Ok(g)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let r = rec.phase("boundary_flux", |_| Ok(convergence_study(&flux_psis, &o.eps_list, &flux_ops, &ctx)?))?;
        for c in r.checks(1.0) {
            rec.check(c.monotone, format!("{} {} decreasing (worst ratio {:.3})", c.operator, c.psi_id, c.worst_ratio));
        }
        report.rows.extend(r.rows);
    }
    report.write_csv(&rec.path("convergence.csv"))?;
    Ok(())
}

struct LimitSolution {
    /// One binned field per snapshot time.
    fields: Vec<DensityField>,
}

fn solve_limit(cfg: &RunConfig, rec: &mut Recorder) -> Result<LimitSolution, CliError> {
    let eq = make_default_equilibrium(cfg.params)?;
    let sc = &cfg.solver;
    let k = &cfg.kinetic;
    let alpha = cfg.params.alpha;
    let mesh = Mesh1D::graded(sc.length, sc.nodes, sc.grading)?;
    let forms = rec.phase("assemble", |_| Ok(assemble(&mesh, &eq)?))?;
    if sc.export_matrices {
        write_matrix_market(&forms.m, &rec.path("M.mtx"))?;
        write_matrix_market(&forms.a_sr, &rec.path("A_SR.mtx"))?;
        if let Some(a_d) = &forms.a_d {
            write_matrix_market(a_d, &rec.path("A_D.mtx"))?;
        }
    }
    if matches!(k.initial, fraclimit_core::kinetic::InitialProfile::PointMass(_)) {
        return Err(CliError::config(None, "the limit solver needs an initial density, not a point mass".into()));
    }
    let u0 = l2_project(&mesh, &forms.m, |x| k.initial.density(x))?;
    let ev = rec.phase("evolve", |_| Ok(evolve_snapshots(&forms, alpha, &u0, &k.snapshots, sc.dt)?))?;
    let m0 = mass(&forms, &u0);
    let mut e_prev = energy(&forms, &u0);
    let mut fields = Vec::new();
    for (t, u) in ev.times.iter().zip(&ev.states) {
        write_nodal_csv(&mesh, u, &rec.path(&format!("solution_t{}.csv", tag(*t))))?;
        let f = to_field(&mesh, u, &k.grid, *t);
        f.write_csv(&rec.path(&format!("limit_density_t{}.csv", tag(*t))))?;
        fields.push(f);
        let drift = (mass(&forms, u) - m0).abs() / m0;
        let e = energy(&forms, u);
        rec.check(drift < 1e-6, format!("t={t} mass drift {drift:.2e}"));
        rec.check(e <= e_prev * (1.0 + 1e-12), format!("t={t} M-norm {e:.6e} non-increasing"));
        e_prev = e;
    }
    if alpha == 0.0 {
        let mut gaps = Vec::new();
        rec.phase("fourier_reference", |rec| {
            for f in &fields {
                if f.t == 0.0 {
                    continue;
                }
                let r = reference_specular(&k.initial, f.t, &eq, &k.grid, FourierBox::default())?;
                r.write_csv(&rec.path(&format!("fourier_t{}.csv", tag(f.t))))?;
                gaps.push(json!({"t": f.t, "galerkin_vs_fourier": serde_json::to_value(compare(f, &r)?).expect("plain struct")}));
            }
            Ok(())
        })?;
        rec.extra.insert("fourier".into(), Value::Array(gaps));
    }
    rec.extra.insert("mesh".into(), json!(mesh.descriptor()));
    rec.extra.insert("quadrature".into(), serde_json::to_value(&forms.quadrature).expect("plain struct"));
    Ok(LimitSolution { fields })
}

fn compare_files(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), CliError> {
    let (a, b) = (cfg.compare.0.as_ref().expect("validated"), cfg.compare.1.as_ref().expect("validated"));
    let fa = DensityField::read_csv(a)?;
    let fb = DensityField::read_csv(b)?;
    let c = compare(&fa, &fb)?;
    let v = serde_json::to_value(c).expect("plain struct");
    let p = rec.path("compare.json");
    fs::write(&p, serde_json::to_string_pretty(&v).expect("json")).map_err(|e| io_err(&p, e))?;
    rec.messages.push(format!("l2_rel {:.6e} linf_rel {:.6e} mass_gap {:.6e}", c.l2_rel, c.linf_rel, c.mass_gap));
    rec.extra.insert("compare".into(), v);
    Ok(())
}

fn full_pipeline(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), CliError> {
    let limit = solve_limit(cfg, rec)?;
    let k = &cfg.kinetic;
    let eq = make_default_equilibrium(cfg.params)?;
    let mut fourier = Vec::new();
    if cfg.params.alpha == 0.0 {
        for f in &limit.fields {
            fourier.push(reference_specular(&k.initial, f.t, &eq, &k.grid, FourierBox::default())?);
        }
    }
    let path = rec.path("pipeline.csv");
    let mut csv = String::from("epsilon,time,reference,l2_rel,linf_rel,mass_gap,noise_rel\n");
    // final-time errors per reference kind, in ε order
    let mut finals: Vec<(&str, Vec<f64>)> = vec![("galerkin", Vec::new()), ("fourier", Vec::new())];
    for &eps in &cfg.operators.eps_list {
        let params = fraclimit_core::ModelParams { eps, ..cfg.params };
        let fields = rec.phase(&format!("kinetic_eps{}", tag(eps)), |_| {
            let mut ens = init_ensemble(&k.initial, k.particles, params, &eq, cfg.seed)?;
            Ok(ens.run(k.t_end, &k.snapshots, &k.grid)?)
        })?;
        for (i, f) in fields.iter().enumerate() {
            f.write_csv(&rec.path(&format!("density_eps{}_t{}.csv", tag(eps), tag(f.t))))?;
            let mut refs = vec![("galerkin", &limit.fields[i])];
            if let Some(r) = fourier.get(i) {
                refs.push(("fourier", r));
            }
            for (name, r) in refs {
                if f.t == 0.0 {
                    continue;
                }
                let c = compare(f, r)?;
                csv.push_str(&format!(
                    "{eps},{},{name},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                    f.t, c.l2_rel, c.linf_rel, c.mass_gap, c.noise_rel
                ));
                if i + 1 == fields.len() {
                    finals.iter_mut().find(|(n, _)| *n == name).expect("known").1.push(c.l2_rel);
                }
            }
        }
    }
    let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    file.write_all(csv.as_bytes()).map_err(|e| io_err(&path, e))?;
    for (name, errs) in finals {
        if errs.is_empty() {
            continue;
        }
        let ok = errs.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.4}")).collect();
        rec.check(ok, format!("MC vs {name} l2_rel decreasing over eps: [{}]", shown.join(", ")));
    }
    Ok(())
}
