//! Drive an experiment from a TOML string, as the CLI does.
use cbe::experiment::{run, ExperimentConfig};

fn main() -> cbe::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
experiment = "max-dist"
n = 256
beta = 2.0
replicas = 200
seed = 11
"#,
    )?;
    let rc = cfg.resolve()?;
    println!("estimated memory {} MiB", rc.memory_estimate_mb());
    let report = run(&rc)?;
    println!("{}", serde_json::to_string_pretty(&report.aggregates)?);
    for c in &report.checks {
        println!("{} {}: {:.3e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    let dir = std::env::temp_dir().join("cbe-example");
    report.write_to(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
