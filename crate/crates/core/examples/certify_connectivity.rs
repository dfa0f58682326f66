//! Forces a broadcast at least every `B2` iterations and certifies the
//! resulting information-flow log, once at the guaranteed window length
//! and once at a window that is too short.

use efhc::data::synth_quadratic;
use efhc::engine::EngineFlags;
use efhc::topology::{certify_b_connectivity, compute_window_b, GraphSnapshot, ScheduleMode};
use efhc::{run, SimulationConfig, StepPolicy, TopologySchedule, TriggerPolicy};

fn main() -> efhc::Result<()> {
    let (b1, b2) = (2, 5);
    let schedule = TopologySchedule::new(
        GraphSnapshot::cycle(8),
        ScheduleMode::CyclicPartition { b1 },
        1,
    )?;
    let inst = synth_quadratic(8, 4, 1.0, 1)?;
    let mut cfg = SimulationConfig::new(
        inst.tasks,
        schedule,
        TriggerPolicy::Efhc { r: f64::INFINITY },
        StepPolicy::Constant { alpha: 0.01 },
    );
    cfg.flags = EngineFlags {
        enforce_b2: Some(b2),
        ..EngineFlags::default()
    };
    let out = run(cfg, 100)?;

    let b = compute_window_b(b1, b2);
    for window in [b, 2] {
        let report = certify_b_connectivity(&out.log, window)?;
        println!(
            "B = {window:>2}: {} windows checked, {} disconnected",
            report.windows_checked,
            report.violations.len()
        );
    }
    Ok(())
}
