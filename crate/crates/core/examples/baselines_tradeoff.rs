//! Runs the four trigger policies from the `tradeoff` template on one seed
//! and prints the best gap each reached by a common transmission budget.

use efhc::analysis::{tradeoff_table, TradeoffMetric};
use efhc::config::{template, ExperimentConfig};
use efhc::suite::run_single;

fn main() -> efhc::Result<()> {
    let mut cfg = ExperimentConfig::parse(template("tradeoff").unwrap())?;
    cfg.iterations = 2000;
    let seed = 1;
    let mut traces = Vec::new();
    for &policy in &cfg.policies {
        let out = run_single(&cfg, policy, seed)?;
        println!(
            "{:>5}: {:>6} broadcasts, mean transmission score {:.3}",
            policy.label(),
            out.trace.total_broadcasts(),
            out.trace.mean_transmission_score()
        );
        traces.push((policy.label().to_string(), out.trace));
    }
    let table = tradeoff_table(&traces, TradeoffMetric::OptimalityGap, 5)?;
    println!();
    print!("{}", table.to_csv());
    Ok(())
}
