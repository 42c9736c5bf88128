//! Rough per-epoch timing at the desk-scale configuration.

use pinnmamba::model::ModelConfig;
use pinnmamba::optimize::TrainConfig;
use pinnmamba::physics::PdeProblem;
use std::time::Instant;

// epoch loop with explicit eval accounting would need trainer internals;
// infer from history seconds instead

fn main() {
    for (name, epochs, mlp) in [
        ("convection", 6usize, false),
        ("wave", 4, false),
        ("convection", 6, true),
        ("wave", 4, true),
    ] {
        let problem = PdeProblem::by_name(name).unwrap();
        let mut cfg = TrainConfig::defaults(problem);
        cfg.grid_m = 51;
        cfg.grid_n = 51;
        cfg.k = 7;
        cfg.model = if mlp {
            ModelConfig {
                arch: pinnmamba::model::Arch::Mlp,
                hidden: 128,
                depth: 4,
                ..ModelConfig::default()
            }
        } else {
            ModelConfig {
                embed_dim: 16,
                hidden: 128,
                ..ModelConfig::default()
            }
        };
        cfg.epochs = epochs;
        let start = Instant::now();
        let result = pinnmamba::optimize::train(&cfg).unwrap();
        let dt = start.elapsed().as_secs_f64();
        println!(
            "{name}{}: {} epochs in {:.2}s ({:.2}s/epoch), last total {:.3e}",
            if mlp { "-mlp" } else { "" },
            result.history.records.len(),
            dt,
            dt / epochs as f64,
            result.history.records.last().unwrap().total
        );
    }
}
