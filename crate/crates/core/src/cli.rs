//! Subcommand dispatch and report emission for the `pdcalc` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::boltzmann::assemble::{assemble_bw_from, assemble_k_from, provenance_tag, tables};
use crate::boltzmann::lemmas::lemma_suite;
use crate::boltzmann::symbols::{decay_fit, maxwell_half, SymbolTables};
use crate::config::{ExperimentConfig, Generator};
use crate::dissipation::{commutator_bound, dissipativity_scan, garding_l2, garding_weighted, parametrix_residual};
use crate::error::{Error, Result};
use crate::grid::{inner_product, GridFunction, PhaseGrid};
use crate::quantize::{calibrate_j_constant, standard_quantize, weyl_quantize, LinearOperator};
use crate::semigroup::{conjugated, evolve, resolvent_check};
use crate::sobolev::{equivalence_constants, random_ensemble, SobolevParams};
use crate::symbol::{j_transform, Builtin, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    GridInfo,
    SymbolEval,
    Quantize,
    NormEquivalence,
    GardingL2,
    GardingWeighted,
    Parametrix,
    Commutator,
    BoltzmannAssemble,
    LemmaSuite,
    Dissipativity,
    Evolve,
    FullReport,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GridInfo => "grid-info",
            Command::SymbolEval => "symbol-eval",
            Command::Quantize => "quantize",
            Command::NormEquivalence => "norm-equivalence",
            Command::GardingL2 => "garding-l2",
            Command::GardingWeighted => "garding-weighted",
            Command::Parametrix => "parametrix",
            Command::Commutator => "commutator",
            Command::BoltzmannAssemble => "boltzmann-assemble",
            Command::LemmaSuite => "lemma-suite",
            Command::Dissipativity => "dissipativity",
            Command::Evolve => "evolve",
            Command::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pdcalc", version, about = "Phase-space calculus and collision-operator certificates")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Config file (TOML, or JSON by extension). Defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub report: Value,
    pub csv: Vec<(String, String)>,
    pub dumps: Vec<(String, LinearOperator)>,
}

impl Outcome {
    fn new(passed: bool, report: impl Serialize) -> Result<Self> {
        Ok(Self {
            passed,
            report: serde_json::to_value(report)?,
            ..Default::default()
        })
    }

    fn with_csv(mut self, name: &str, body: String) -> Self {
        self.csv.push((name.into(), body));
        self
    }
}

/// SHA-256 of the canonical JSON of `(subcommand, config)`.
pub fn input_hash(command: &str, cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(&(command, cfg)).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn write_outcome(dir: &Path, command: &str, cfg: &ExperimentConfig, out: &Outcome, error: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let envelope = json!({
        "subcommand": command,
        "passed": out.passed,
        "input_hash": input_hash(command, cfg),
        "config": cfg,
        "error": error,
        "report": out.report,
    });
    fs::write(dir.join(format!("{command}.json")), serde_json::to_string_pretty(&envelope)? + "\n")?;
    for (name, body) in &out.csv {
        fs::write(dir.join(name), body)?;
    }
    for (name, op) in &out.dumps {
        op.write_to(fs::File::create(dir.join(name))?)?;
    }
    Ok(())
}

/// Runs one subcommand and writes its artifacts; returns the exit status
/// (0 pass, 1 numerical failure, 2 invalid config).
pub fn run(command: Command, cfg: &ExperimentConfig) -> i32 {
    let name = command.name();
    if let Err(e) = cfg.validate_for(name) {
        eprintln!("pdcalc {name}: {e}");
        return 2;
    }
    let dir = cfg.output.dir.clone();
    let result = dispatch(command, cfg);
    let (out, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e.to_string())),
    };
    if let Err(e) = write_outcome(&dir, name, cfg, &out, error.as_deref()) {
        eprintln!("pdcalc {name}: cannot write report: {e}");
        return 1;
    }
    match (&error, out.passed) {
        (Some(e), _) => {
            eprintln!("pdcalc {name}: {e}");
            1
        }
        (None, true) => {
            println!("{name}: PASS ({})", dir.join(format!("{name}.json")).display());
            0
        }
        (None, false) => {
            println!("{name}: FAIL ({})", dir.join(format!("{name}.json")).display());
            1
        }
    }
}

/// Entry point of the binary.
pub fn main_with(args: Args) -> i32 {
    let mut cfg = match &args.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("pdcalc: {e}");
                return 2;
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(o) = args.out {
        cfg.output.dir = o;
    }
    run(args.command, &cfg)
}

fn dispatch(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match command {
        Command::GridInfo => grid_info(cfg),
        Command::SymbolEval => symbol_eval(cfg),
        Command::Quantize => quantize(cfg),
        Command::NormEquivalence => norm_equivalence(cfg),
        Command::GardingL2 => {
            let r = garding_l2(&cfg.symbol("a")?, &cfg.symbol("b_half")?, &cfg.symbol("l")?, &cfg.grid()?, cfg.tolerances.eigen)?;
            Ok(Outcome::new(r.passed, &r)?.with_csv("garding-l2.csv", r.csv()))
        }
        Command::GardingWeighted => {
            let l_half = cfg.symbol("l")?.sqrt();
            let r = garding_weighted(&cfg.symbol("a")?, &cfg.symbol("b_half")?, &l_half, &cfg.sobolev()?, &cfg.grid()?, cfg.tolerances.eigen)?;
            Ok(Outcome::new(r.passed, &r)?.with_csv("garding-weighted.csv", r.csv()))
        }
        Command::Parametrix => {
            let r = parametrix_residual(&cfg.symbol("a")?, &cfg.symbol("l")?, &cfg.ladders.parametrix_k, &cfg.grid()?)?;
            let passed = match r.kappa {
                None => r.rows.iter().all(|x| x.residual <= 1e-12),
                Some(k) => r.strictly_decreasing() && k >= cfg.tolerances.min_kappa,
            };
            Ok(Outcome::new(passed, &r)?.with_csv("parametrix.csv", r.csv()))
        }
        Command::Commutator => {
            let cs = cfg.sobolev()?.weight().symbol();
            let l_half = cfg.symbol("l")?.sqrt();
            let g = cfg.grid()?;
            let r = commutator_bound(&cs, &cfg.symbol("a")?, &cfg.symbol("b_half")?, &l_half, &g, cfg.trials.commutator, cfg.seed)?;
            let passed = r.min_epsilon().is_some_and(|e| e <= cfg.tolerances.commutator_eps);
            Ok(Outcome::new(passed, &r)?.with_csv("commutator.csv", r.csv()))
        }
        Command::BoltzmannAssemble => boltzmann_assemble(cfg),
        Command::LemmaSuite => {
            let r = lemma_suite(cfg.trials.lemma, cfg.seed)?;
            Outcome::new(r.passed(), &r)
        }
        Command::Dissipativity => {
            let t = tables(&cfg.grid()?, &cfg.model()?)?;
            let bw = assemble_bw_from(&t)?;
            let r = dissipativity_scan(&bw, &cfg.sobolev()?, &cfg.ladders.c1, cfg.tolerances.eigen, cfg.seed)?;
            Ok(Outcome::new(r.passed(), &r)?.with_csv("dissipativity.csv", r.csv()))
        }
        Command::Evolve => evolve_cmd(cfg),
        Command::FullReport => full_report(cfg),
    }
}

fn grid_info(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = cfg.grid()?;
    let n = g.n();
    Outcome::new(
        true,
        json!({
            "id": g.id(),
            "d": g.dim(),
            "n": n,
            "r": g.half_width(),
            "dv": g.dv(),
            "deta": g.deta(),
            "nodes": g.len(),
            "v_range": [g.velocity_1d(0), g.velocity_1d(n - 1)],
            "eta_range": [g.frequency_1d(0), g.frequency_1d(n - 1)],
        }),
    )
}

fn symbol_eval(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.grid()?.dim();
    let a = cfg.symbol("a")?;
    let mut csv = String::new();
    csv += &(0..d).map(|k| format!("v{k}")).chain((0..d).map(|k| format!("eta{k}"))).collect::<Vec<_>>().join(",");
    csv += ",re,im\n";
    let mut values = Vec::new();
    let mut finite = true;
    for p in &cfg.symbols.points {
        let z = a.eval(&p[..d], &p[d..])?;
        finite &= z.re.is_finite() && z.im.is_finite();
        csv += &format!("{},{:.15e},{:.15e}\n", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","), z.re, z.im);
        values.push(json!({"point": p, "re": z.re, "im": z.im}));
    }
    Ok(Outcome::new(finite, json!({"symbol": a.label(), "values": values}))?.with_csv("symbol-eval.csv", csv))
}

fn quantize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = cfg.grid()?;
    let a = cfg.symbol("a")?;
    let w = weyl_quantize(&a, &g)?;
    let defect = w.hermitian_defect();
    let scale = w.max_entry().max(1.0);
    let passed = defect <= 1e-12 * scale;
    let mut out = Outcome::new(
        passed,
        json!({
            "symbol": a.label(),
            "grid": g.id(),
            "hermitian_defect": defect,
            "max_entry": w.max_entry(),
            "operator_norm": w.operator_norm(),
            "provenance": w.provenance().to_string(),
        }),
    )?;
    out.dumps.push(("quantize.pdco".into(), w));
    Ok(out)
}

fn norm_equivalence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let r = equivalence_constants(&cfg.sobolev()?, &cfg.grid()?, cfg.trials.norm, cfg.seed)?;
    let passed = r.pairs.values().all(|[lo, hi]| *lo > 0.0 && hi.is_finite());
    let mut csv = String::from("pair,min,max\n");
    for (k, [lo, hi]) in &r.pairs {
        csv += &format!("{k},{lo:.12e},{hi:.12e}\n");
    }
    Ok(Outcome::new(passed, &r)?.with_csv("norm-equivalence.csv", csv))
}

/// Families that make up `K`.
const K_FAMILY: [&str; 5] = ["a1", "a2ca", "a2c", "a2r", "a2d"];

fn boltzmann_assemble(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = cfg.grid()?;
    let model = cfg.model()?;
    let p = cfg.sobolev()?;
    let t = tables(&g, &model)?;
    let k = assemble_k_from(&t)?;
    let bw = assemble_bw_from(&t)?;
    let order = model.params.order();
    let mut fits = serde_json::Map::new();
    let mut csv = String::from("symbol,amplitude,exponent\n");
    let mut growth_ok = true;
    for name in SymbolTables::NAMES {
        let f = decay_fit(t.table(name).expect("known table"), &g, order);
        if K_FAMILY.contains(&name) {
            growth_ok &= f.exponent <= cfg.tolerances.max_growth;
        }
        csv += &format!("{name},{:.12e},{:.6}\n", f.amplitude, f.exponent);
        fits.insert(name.into(), serde_json::to_value(f)?);
    }
    let refinement_ok = t.refinement.iter().all(|(_, c)| *c <= model.quad.tol);
    let l = k.sub(&bw)?;
    let m = GridFunction::from_fn(g, |v| Complex64::new(maxwell_half([v[0], v[1]]), 0.0));
    let mut conservation = 0.0f64;
    for f in random_ensemble(&g, 5, cfg.seed) {
        let lf = l.apply(&f)?;
        conservation = conservation.max(inner_product(&lf, &m)?.norm() / (lf.l2_norm() * m.l2_norm()));
    }
    let k_hc = conjugated(&k, &p)?.operator_norm();
    let passed = growth_ok && refinement_ok && conservation <= model.quad.tol;
    let mut out = Outcome::new(
        passed,
        json!({
            "grid": g.id(),
            "provenance": provenance_tag(&t),
            "refinement": t.refinement,
            "decay_fits": fits,
            "k_norm_hc": k_hc,
            "k_norm_l2": k.operator_norm(),
            "bw_norm_l2": bw.operator_norm(),
            "conservation_relative": conservation,
        }),
    )?
    .with_csv("boltzmann-decay.csv", csv);
    out.dumps.push(("K.pdco".into(), k));
    out.dumps.push(("bw.pdco".into(), bw));
    Ok(out)
}

fn evolve_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.sobolev()?;
    let e = &cfg.evolve;
    let (a, omega, c1, label) = match &e.operator {
        Some(path) => {
            let a = LinearOperator::read_from(fs::File::open(path)?)?;
            let omega = conjugated(&a, &p)?.hermitian_part().eigenvalues()?.last().copied().unwrap_or(0.0).max(0.0);
            (a, omega, None, format!("dump {}", path.display()))
        }
        None => {
            let t = tables(&cfg.grid()?, &cfg.model()?)?;
            let bw = assemble_bw_from(&t)?;
            let scan = dissipativity_scan(&bw, &p, &cfg.ladders.c1, cfg.tolerances.eigen, cfg.seed)?;
            let c1 = scan.c1.ok_or_else(|| Error::LadderExhausted("no C₁ in the ladder makes −(C₁ + b^w) dissipative".into()))?;
            let contraction = bw.shift(c1).scale(Complex64::new(-1.0, 0.0));
            match e.generator {
                Generator::Contraction => (contraction, 0.0, Some(c1), "−(C₁ + b^w)".to_string()),
                Generator::Full => {
                    let k = assemble_k_from(&t)?;
                    let omega = conjugated(&k, &p)?.operator_norm() + c1;
                    (k.sub(&bw)?, omega, Some(c1), "L = −b^w + K".to_string())
                }
            }
        }
    };
    let mut out = Outcome::default();
    let mut logs = Vec::new();
    let mut passed = true;
    for (j, f0) in random_ensemble(a.grid(), e.initial_states, cfg.seed).iter().enumerate() {
        let log = evolve(&a, f0, e.t_final, e.dt, e.scheme, &p)?;
        // Discrete growth bound of the implicit schemes: (1 − ω̂Δt)^{−j} per step count j.
        let bound_ok = log.hc_norms.iter().enumerate().all(|(i, x)| {
            let factor = if omega == 0.0 { 1.0 } else { (1.0 - omega * e.dt).max(f64::MIN_POSITIVE).powi(-(i as i32)) };
            *x <= log.hc_norms[0] * factor * (1.0 + cfg.tolerances.contraction)
        });
        let step_ok = omega > 0.0 || log.max_step_growth() <= 1.0 + cfg.tolerances.contraction;
        let residual_ok = log.max_residual() <= 1e-10;
        passed &= bound_ok && step_ok && residual_ok;
        out.csv.push((format!("evolve-{j}.csv"), log.csv()));
        logs.push(json!({
            "state": j,
            "max_step_growth": log.max_step_growth(),
            "max_residual": log.max_residual(),
            "final_hc_norm": log.hc_norms.last(),
            "initial_hc_norm": log.hc_norms[0],
            "growth_bound_holds": bound_ok,
            "condition": log.condition,
        }));
    }
    let lambda = 1.0 + omega;
    let res = resolvent_check(&a, lambda, cfg.trials.resolvent, cfg.seed)?;
    passed &= res.max_residual <= cfg.tolerances.resolvent;
    out.passed = passed;
    out.report = json!({
        "generator": label,
        "scheme": e.scheme,
        "dt": e.dt,
        "t_final": e.t_final,
        "c1": c1,
        "omega": omega,
        "states": logs,
        "resolvent": res,
    });
    Ok(out)
}

/// Quantization exactness, Hermitian symmetry and the `J` identities on the
/// `d = 1`, `N = 64`, `R = 8` reference grid.
fn calculus_checks() -> Result<Value> {
    let g = PhaseGrid::new(1, 64, 8.0)?;
    let v = weyl_quantize(&Symbol::of_v("v", |v| v[0]), &g)?;
    let mut exact = 0.0f64;
    for i in 0..g.len() {
        for j in 0..g.len() {
            let want = if i == j { g.velocity(i)[0] } else { 0.0 };
            exact = exact.max((v.matrix()[(i, j)] - Complex64::new(want, 0.0)).norm());
        }
    }
    let e = weyl_quantize(&Symbol::of_eta("η", |e| e[0]), &g)?;
    let s = standard_quantize(&Symbol::of_eta("η", |e| e[0]), &g)?;
    exact = exact.max(e.sub(&s)?.max_entry());
    let mut herm = 0.0f64;
    for b in [
        Builtin::C { k: 1.0, n: 1.0 },
        Builtin::L { gamma: -2.0, s: 0.5 },
        Builtin::ATilde { gamma: -2.0, s: 0.5 },
        Builtin::BracketVPow { p: 2.0 },
        Builtin::BracketEtaPow { p: 1.0 },
    ] {
        for grid in [g, PhaseGrid::new(2, 8, 3.0)?] {
            let q = weyl_quantize(&b.symbol(), &grid)?;
            herm = herm.max(q.hermitian_defect() / q.max_entry().max(1.0));
        }
    }
    let kappa = calibrate_j_constant(&g)?;
    let ve = Symbol::new("v.eta", |v, e| Complex64::new(v[0] * e[0], 0.0));
    let probe = GridFunction::from_real_fn(g, |v| (-0.5 * v[0] * v[0]).exp());
    let lhs = standard_quantize(&ve, &g)?.apply(&probe)?;
    let rhs = weyl_quantize(&j_transform(&ve, -0.5, &g)?, &g)?.apply(&probe)?;
    let identity = lhs.sub(&rhs)?.l2_norm() / lhs.l2_norm();
    let mixed = Symbol::real("mixed", |v, e| (-(v[0] * v[0]) / 8.0).exp() * (1.0 + e[0] * e[0]).sqrt());
    let back = j_transform(&j_transform(&mixed, 0.5, &g)?, -0.5, &g)?;
    let mut round = 0.0f64;
    for i in 0..g.len() {
        for m in 0..g.len() {
            let (vv, ee) = (g.velocity(i), g.frequency(m));
            round = round.max((back.eval(&vv[..1], &ee[..1])? - mixed.eval(&vv[..1], &ee[..1])?).norm());
        }
    }
    Ok(json!({
        "quantization_exactness": exact,
        "hermitian_defect": herm,
        "j_constant": [kappa.re, kappa.im],
        "j_identity_residual": identity,
        "j_round_trip": round,
        "passed": exact <= 1e-12 && herm <= 1e-12 && identity <= 1e-10 && round <= 1e-10,
    }))
}

fn full_report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut stages = serde_json::Map::new();
    let mut passed = true;
    let calc = calculus_checks()?;
    passed &= calc["passed"].as_bool().unwrap_or(false);
    stages.insert("calculus".into(), calc);
    let mut equivalence = Vec::new();
    for (k, n) in [(1.0, 1.0), (2.0, -1.0), (-1.0, 2.0)] {
        let p = SobolevParams::new(k, n)?;
        let coarse = equivalence_constants(&p, &PhaseGrid::new(1, 64, 8.0)?, 50, cfg.seed)?;
        let fine = equivalence_constants(&p, &PhaseGrid::new(1, 128, 8.0)?, 50, cfg.seed)?;
        let stable = coarse.max_spread() > 0.0 && (fine.max_spread() - coarse.max_spread()).abs() <= 0.1 * coarse.max_spread();
        passed &= stable;
        equivalence.push(json!({"k": k, "n": n, "spread_64": coarse.max_spread(), "spread_128": fine.max_spread(), "stable": stable}));
    }
    stages.insert("norm_equivalence".into(), Value::Array(equivalence));
    let dir = &cfg.output.dir;
    let sub = [
        Command::GardingL2,
        Command::GardingWeighted,
        Command::Parametrix,
        Command::Commutator,
        Command::BoltzmannAssemble,
        Command::LemmaSuite,
        Command::Dissipativity,
        Command::Evolve,
    ];
    for c in sub {
        let (o, err) = match dispatch(c, cfg) {
            Ok(o) => (o, None),
            Err(e) => (Outcome::default(), Some(e.to_string())),
        };
        write_outcome(dir, c.name(), cfg, &o, err.as_deref())?;
        passed &= o.passed && err.is_none();
        stages.insert(c.name().into(), json!({"passed": o.passed && err.is_none(), "error": err}));
    }
    Outcome::new(passed, Value::Object(stages))
}
