//! Fits the log-log decay rate of the optimality gap under a diminishing
//! step, and the plateau under a constant one.

use efhc::analysis::{fit_rate, plateau_level, trailing_half};
use efhc::config::{template, ExperimentConfig, PolicyKind, StepKind};
use efhc::suite::run_single;

fn main() -> efhc::Result<()> {
    let mut cfg = ExperimentConfig::parse(template("rate").unwrap())?;
    cfg.iterations = 10_000;
    let gap = run_single(&cfg, PolicyKind::Efhc, 1)?
        .trace
        .optimality_gaps()
        .unwrap();
    let fit = fit_rate(&gap, trailing_half(gap.len()))?;
    println!(
        "diminishing step: slope {:.3} over k in [{}, {}]",
        fit.slope, fit.window.0, fit.window.1
    );

    for alpha in [0.01, 0.005] {
        cfg.step = StepKind::Constant { alpha };
        let gap = run_single(&cfg, PolicyKind::Efhc, 1)?
            .trace
            .optimality_gaps()
            .unwrap();
        println!(
            "constant step {alpha}: plateau {:.3e}",
            plateau_level(&gap, 0.5)?
        );
    }
    Ok(())
}
