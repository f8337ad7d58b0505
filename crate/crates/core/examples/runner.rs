//! Runs a reduced verification suite in process and turns its results into
//! plot data.

use supercon::cli::{emit_plotdata, run, ExperimentConfig, Overrides, PlotKind, Suite};

fn main() -> supercon::Result<()> {
    let out = std::env::temp_dir().join("supercon-runner-example");
    let cfg = ExperimentConfig::resolve(&Overrides {
        suite: Some(Suite::Scaling),
        seed: Some(4),
        trials: Some(300),
        dim: Some(32),
        out: Some(out.clone()),
        ..Default::default()
    })?;
    let output = run(&cfg, 0)?;
    for c in &output.checks {
        println!("{:<36} {:<5} value {:.4}", c.name, c.passed, c.value);
    }
    let table = std::fs::File::open(out.join("scaling.csv"))?;
    let mut plot = Vec::new();
    emit_plotdata(table, PlotKind::DeviationVsN, 20, &mut plot)?;
    print!("{}", String::from_utf8_lossy(&plot));
    println!("artifacts in {}", out.display());
    Ok(())
}
