//! Experiment configuration shared by every CLI subcommand (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boltzmann::{CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::semigroup::Scheme;
use crate::sobolev::SobolevParams;
use crate::symbol::{Builtin, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub r: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 2, n: 12, r: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevConfig {
    pub k: f64,
    pub n: f64,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        Self { k: 1.0, n: 1.0 }
    }
}

/// A built-in symbol raised to `pow`. `gamma`, `s`, `k`, `n` come from the
/// kinetic and Sobolev blocks; `power` feeds the bracket powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub name: String,
    #[serde(default)]
    pub power: f64,
    #[serde(default = "one")]
    pub pow: f64,
}

fn one() -> f64 {
    1.0
}

impl SymbolSpec {
    pub fn named(name: &str, pow: f64) -> Self {
        Self {
            name: name.into(),
            power: 0.0,
            pow,
        }
    }

    pub fn resolve(&self, kinetic: &KineticParams, sobolev: &SobolevConfig) -> Result<Symbol> {
        let b = Builtin::from_name(&self.name, kinetic.gamma, kinetic.s, sobolev.k, sobolev.n, self.power)?;
        let w = b.weight();
        Ok(if self.pow == 1.0 { w.to_symbol() } else { w.powf(self.pow).to_symbol() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolsConfig {
    pub a: SymbolSpec,
    pub b_half: SymbolSpec,
    pub l: SymbolSpec,
    /// Points `[v…, η…]` for `symbol-eval`.
    pub points: Vec<Vec<f64>>,
}

impl Default for SymbolsConfig {
    fn default() -> Self {
        Self {
            a: SymbolSpec::named("a_tilde", 1.0),
            b_half: SymbolSpec::named("a_tilde", 0.5),
            l: SymbolSpec::named("l", 1.0),
            points: vec![vec![0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![1.0, -2.0, 0.5, 3.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ladders {
    /// `C₁` values tried by the dissipativity scan, ascending.
    pub c1: Vec<f64>,
    /// `K` values of the parametrix residual, strictly increasing.
    pub parametrix_k: Vec<f64>,
}

impl Default for Ladders {
    fn default() -> Self {
        Self {
            c1: crate::dissipation::c1_ladder(),
            parametrix_k: vec![4.0, 16.0, 64.0, 256.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trials {
    pub norm: usize,
    pub commutator: usize,
    pub lemma: usize,
    pub resolvent: usize,
}

impl Default for Trials {
    fn default() -> Self {
        Self {
            norm: 50,
            commutator: 30,
            lemma: 1000,
            resolvent: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue tolerance of Gårding and dissipativity certificates.
    pub eigen: f64,
    /// Per-step `H(c)` growth allowed for a contraction.
    pub contraction: f64,
    pub resolvent: f64,
    /// Smallest acceptable parametrix decay exponent.
    pub min_kappa: f64,
    /// Largest `ε` the commutator frontier must reach.
    pub commutator_eps: f64,
    /// Largest `|η|` growth exponent of a `K`-family symbol.
    pub max_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eigen: crate::dissipation::DEFAULT_TOL,
            contraction: 1e-8,
            resolvent: 1e-9,
            min_kappa: 0.3,
            commutator_eps: 0.25,
            max_growth: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `−(C₁ + b^w)` with `C₁` from the dissipativity scan.
    Contraction,
    /// `L = −b^w + K`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub generator: Generator,
    pub scheme: Scheme,
    pub t_final: f64,
    pub dt: f64,
    pub initial_states: usize,
    /// Operator dump to evolve instead of the assembled generator.
    pub operator: Option<PathBuf>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            generator: Generator::Contraction,
            scheme: Scheme::ImplicitEuler,
            t_final: 1.0,
            dt: 0.01,
            initial_states: 5,
            operator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("pdcalc-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub kinetic: KineticParams,
    pub kernel: KernelSpec,
    pub quadrature: QuadratureConfig,
    pub sobolev: SobolevConfig,
    pub symbols: SymbolsConfig,
    pub ladders: Ladders,
    pub trials: Trials,
    pub tolerances: Tolerances,
    pub evolve: EvolveConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Re-roots a module validation error under a config path.
fn under(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, message } => config_err(&format!("{prefix}.{field}"), message),
        Error::InvalidGrid(m) => config_err(prefix, m),
        Error::UnknownSymbol(s) => config_err(prefix, format!("unknown symbol `{s}`; expected one of {:?}", Builtin::NAMES)),
        other => config_err(prefix, other.to_string()),
    }
}

fn ascending(path: &str, xs: &[f64], strict: bool) -> Result<()> {
    if xs.is_empty() {
        return Err(config_err(path, "must not be empty"));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(config_err(path, "entries must be finite and nonnegative"));
    }
    if xs.windows(2).any(|w| if strict { w[1] <= w[0] } else { w[1] < w[0] }) {
        return Err(config_err(path, "must be increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e.to_string()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| config_err(&path.display().to_string(), e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| config_err(&path.display().to_string(), e.message().to_string()))
        }
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.grid.d, self.grid.n, self.grid.r).map_err(|e| match e {
            Error::InvalidGrid(m) => {
                let field = if m.starts_with("dimension") {
                    "d"
                } else if m.starts_with("points") {
                    "n"
                } else {
                    "r"
                };
                config_err(&format!("grid.{field}"), m)
            }
            other => under("grid", other),
        })
    }

    pub fn sobolev(&self) -> Result<SobolevParams> {
        SobolevParams::new(self.sobolev.k, self.sobolev.n).map_err(|e| under("sobolev", e))
    }

    pub fn model(&self) -> Result<CollisionModel> {
        self.kinetic.validate().map_err(|e| under("kinetic", e))?;
        self.quadrature.validate().map_err(|e| under("quadrature", e))?;
        CollisionModel::new(self.kinetic, self.kernel, self.quadrature).map_err(|e| under("kernel", e))
    }

    pub fn symbol(&self, which: &str) -> Result<Symbol> {
        let spec = match which {
            "a" => &self.symbols.a,
            "b_half" => &self.symbols.b_half,
            "l" => &self.symbols.l,
            other => return Err(config_err("symbols", format!("no symbol slot `{other}`"))),
        };
        if !spec.pow.is_finite() || !spec.power.is_finite() {
            return Err(config_err(&format!("symbols.{which}"), "exponents must be finite"));
        }
        spec.resolve(&self.kinetic, &self.sobolev).map_err(|e| under(&format!("symbols.{which}.name"), e))
    }

    /// Checks every block a subcommand reads.
    pub fn validate_for(&self, subcommand: &str) -> Result<()> {
        let grid = self.grid()?;
        self.sobolev()?;
        self.model()?;
        for which in ["a", "b_half", "l"] {
            self.symbol(which)?;
        }
        ascending("ladders.c1", &self.ladders.c1, false)?;
        ascending("ladders.parametrix_k", &self.ladders.parametrix_k, true)?;
        if self.ladders.parametrix_k[0] <= 0.0 {
            return Err(config_err("ladders.parametrix_k", "entries must be positive"));
        }
        if self.trials.norm < 50 {
            return Err(config_err("trials.norm", "at least 50 trials"));
        }
        if self.trials.lemma < 1000 {
            return Err(config_err("trials.lemma", "at least 1000 trials"));
        }
        if self.trials.commutator == 0 || self.trials.resolvent == 0 {
            return Err(config_err("trials", "trial counts must be positive"));
        }
        let t = &self.tolerances;
        for (name, x) in [("eigen", t.eigen), ("contraction", t.contraction), ("resolvent", t.resolvent), ("commutator_eps", t.commutator_eps)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(config_err(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        let e = &self.evolve;
        if !(e.dt > 0.0 && e.dt.is_finite()) {
            return Err(config_err("evolve.dt", "Δt > 0 required"));
        }
        if !(e.t_final >= 0.0 && e.t_final.is_finite()) {
            return Err(config_err("evolve.t_final", "must be nonnegative"));
        }
        if e.initial_states == 0 {
            return Err(config_err("evolve.initial_states", "must be positive"));
        }
        if subcommand == "symbol-eval" {
            for (j, p) in self.symbols.points.iter().enumerate() {
                if p.len() != 2 * grid.dim() {
                    return Err(config_err(&format!("symbols.points[{j}]"), format!("expected {} coordinates [v…, η…]", 2 * grid.dim())));
                }
            }
        }
        let needs_boltzmann = matches!(subcommand, "boltzmann-assemble" | "dissipativity" | "full-report")
            || (subcommand == "evolve" && e.operator.is_none());
        if needs_boltzmann && grid.dim() != 2 {
            return Err(config_err("grid.d", "the collision operator needs d = 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_subcommand() {
        let c = ExperimentConfig::default();
        for s in ["grid-info", "symbol-eval", "evolve", "full-report"] {
            c.validate_for(s).unwrap();
        }
    }

    #[test]
    fn bad_s_cites_the_constraint() {
        let c: ExperimentConfig = toml::from_str("[kinetic]\ngamma = -2.0\ns = 1.5\ndelta = 1.0\n").unwrap();
        let e = c.validate_for("garding-l2").unwrap_err().to_string();
        assert!(e.contains("kinetic.s") && e.contains("s∈(0,1)"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[grid]\nm = 3\n").is_err());
    }

    #[test]
    fn symbols_resolve_with_exponents() {
        let c: ExperimentConfig = toml::from_str("[symbols]\na = { name = \"bracket_eta_pow\", power = 2.0 }\n").unwrap();
        let a = c.symbol("a").unwrap();
        assert!((a.eval(&[0.0, 0.0], &[1.0, 2.0]).unwrap().re - 6.0).abs() < 1e-12);
        let b = c.symbol("b_half").unwrap();
        let want = crate::symbol::a_tilde(&[1.0, 0.0], &[0.0, 1.0], -2.0, 0.5).sqrt();
        assert!((b.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap().re - want).abs() < 1e-12);
    }

    #[test]
    fn json_and_toml_agree() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::default();
        let j = dir.path().join("c.json");
        let t = dir.path().join("c.toml");
        std::fs::write(&j, serde_json::to_string(&c).unwrap()).unwrap();
        std::fs::write(&t, toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::load(&j).unwrap(), c);
        assert_eq!(ExperimentConfig::load(&t).unwrap(), c);
    }
}
