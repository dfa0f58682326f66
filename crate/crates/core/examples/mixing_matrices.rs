//! Builds transition matrices for a few trigger patterns and prints their
//! deflated spectral norms.

use efhc::mixing::{
    build_transition, consensus_spectral_norm, validate_stochasticity, window_product,
};
use efhc::{GraphSnapshot, TriggerVector};

fn main() -> efhc::Result<()> {
    let g = GraphSnapshot::path(4);
    let cases = [
        ("nobody broadcasts", TriggerVector::none(4)),
        (
            "device 1 broadcasts",
            TriggerVector::from_broadcasts(vec![false, true, false, false]),
        ),
        (
            "everyone broadcasts",
            TriggerVector::from_broadcasts(vec![true; 4]),
        ),
        (
            "link 2-3 just connected",
            TriggerVector::none(4).with_connections([(2, 3)]),
        ),
    ];
    for (label, t) in &cases {
        let p = build_transition(&g, t);
        println!("{label}:");
        print!("{}", p.to_csv());
        println!(
            "doubly stochastic: {}, deflated norm {:.4}\n",
            validate_stochasticity(&p, 1e-12),
            consensus_spectral_norm(&p)?
        );
    }
    // Devices 0-1-2 talk, then 2-3: the pair of steps mixes everyone.
    let first = build_transition(&g, &cases[1].1);
    let second = build_transition(&g, &cases[3].1);
    let both = window_product(&[second, first])?;
    println!(
        "two-step window norm {:.4}",
        consensus_spectral_norm(&both)?
    );
    Ok(())
}
