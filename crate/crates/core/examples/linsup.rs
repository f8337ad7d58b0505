//! Paired basic/superiorized runs on random linear feasibility problems.

use supercon::linsup::{batch_experiment, LinSupConfig};

fn main() -> supercon::Result<()> {
    let cfg = LinSupConfig {
        n: 50,
        i: 25,
        trials: 20,
        seed: 1,
        ..Default::default()
    };
    let summary = batch_experiment(&cfg)?;
    for (t, o) in summary.outcomes.iter().enumerate().take(5) {
        println!(
            "trial {t}: φ basic {:>10.4}  φ superiorized {:>10.4}  gap {:>9.4}",
            o.phi_basic, o.phi_sup, o.gap
        );
    }
    println!(
        "{} of {} valid, success rate {:.2}, mean gap {:.3}, max residual {:.2e}",
        summary.valid, summary.trials, summary.success_rate, summary.mean_gap, summary.max_residual
    );
    Ok(())
}
