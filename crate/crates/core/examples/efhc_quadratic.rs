//! Runs EF-HC on a heterogeneous least-squares problem and prints the
//! trace every 500 iterations.

use efhc::data::{assign_bandwidths, synth_quadratic};
use efhc::engine::Initialization;
use efhc::learning::global_optimum;
use efhc::topology::{gen_rgg, ScheduleMode};
use efhc::{run, SimulationConfig, StepPolicy, TopologySchedule, TriggerPolicy};

fn main() -> efhc::Result<()> {
    let (m, n, seed) = (10, 10, 3);
    let inst = synth_quadratic(m, n, 1.0, seed)?;
    let base = gen_rgg(m, 0.4, seed)?.graph;
    let schedule = TopologySchedule::new(base, ScheduleMode::RandomSubset { p: 0.5, b1: 5 }, seed)?;
    let step = StepPolicy::Diminishing {
        alpha0: 0.1,
        gamma: 1.0,
        theta: 0.5,
    };

    let mut cfg = SimulationConfig::new(
        inst.tasks.clone(),
        schedule,
        TriggerPolicy::Efhc { r: 20_000.0 },
        step,
    );
    cfg.bandwidths = assign_bandwidths(m, 5000.0, 0.9, seed)?;
    cfg.optimum = Some(global_optimum(&inst.tasks)?);
    cfg.init = Initialization::PerDevice { scale: 1.0 };
    cfg.seed = seed;

    let out = run(cfg, 5000)?;
    println!(
        "{:>5} {:>12} {:>12} {:>10}",
        "k", "consensus", "gap", "broadcasts"
    );
    for row in out.trace.rows.iter().step_by(500) {
        println!(
            "{:>5} {:>12.3e} {:>12.3e} {:>10}",
            row.k,
            row.consensus_error,
            row.optimality_gap.unwrap(),
            row.broadcasts
        );
    }
    println!(
        "{} broadcasts out of {} possible",
        out.trace.total_broadcasts(),
        m * out.trace.len()
    );
    Ok(())
}
