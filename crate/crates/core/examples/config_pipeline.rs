//! Run CLI subcommands from an in-code configuration and read back the JSON envelope.
//!
//! cargo run --release --example config_pipeline [out-dir]

use pdcalc::cli::{input_hash, run, Command};
use pdcalc::config::ExperimentConfig;

fn main() -> pdcalc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pipeline-out".into());
    let text = format!(
        r#"
seed = 7
[grid]
d = 2
n = 8
r = 4.0
[sobolev]
k = 1.0
n = 1.0
[output]
dir = "{out}"
"#
    );
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| pdcalc::Error::Config { path: "inline".into(), message: e.to_string() })?;
    for c in [Command::GridInfo, Command::GardingL2, Command::Parametrix, Command::Commutator] {
        let code = run(c, &cfg);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{out}/{}.json", c.name()))?)?;
        println!("{:<12} exit {code}  passed {}  hash {}", c.name(), json["passed"], &input_hash(c.name(), &cfg)[..12]);
    }

    let mut bad = cfg.clone();
    bad.kinetic.s = 1.5;
    println!("s = 1.5 → exit {}", run(Command::GardingL2, &bad));
    Ok(())
}
