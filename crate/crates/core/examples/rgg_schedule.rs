//! Draws a random geometric graph and shows how each schedule mode thins it
//! while keeping every `B1`-window connected.

use efhc::topology::{gen_rgg, is_connected, union_graph, ScheduleMode, TopologySchedule};

fn main() -> efhc::Result<()> {
    let rgg = gen_rgg(10, 0.4, 7)?;
    println!(
        "base graph: {} edges, {} resamples before a connected draw",
        rgg.graph.edge_count(),
        rgg.resamples
    );
    for mode in [
        ScheduleMode::Static,
        ScheduleMode::CyclicPartition { b1: 3 },
        ScheduleMode::RandomSubset { p: 0.3, b1: 4 },
    ] {
        let schedule = TopologySchedule::new(rgg.graph.clone(), mode, 7)?;
        let b1 = schedule.b1();
        let counts: Vec<usize> = (0..8)
            .map(|k| schedule.snapshot_at(k).edge_count())
            .collect();
        let window: Vec<_> = (0..b1).map(|k| schedule.snapshot_at(k)).collect();
        println!(
            "{mode:?}: edges per iteration {counts:?}, first window union connected: {}",
            is_connected(&union_graph(&window)?)
        );
    }
    Ok(())
}
