//! Drives an experiment from a TOML configuration and writes its report,
//! as the `bdssep` binary does.

use bdssep::experiments::{cmd_stationary, run_criterion, AcceptanceOptions, ExperimentConfig};

const CONFIG: &str = r#"
[model]
n = [5, 6]
alpha = 0.3
beta = 0.3

[run]
out = "target/example-report"
"#;

fn main() -> bdssep::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG, None)?;
    println!("config hash {}", cfg.hash());
    println!("defaulted: {}", cfg.defaulted.join(", "));
    let report = cmd_stationary(&cfg)?;
    for path in report.write(&cfg.run.out)? {
        println!("wrote {}", path.display());
    }

    let r = run_criterion(1, &AcceptanceOptions::default());
    println!("{}", r.line());
    Ok(())
}
