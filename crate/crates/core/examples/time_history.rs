//! Full Newton ESC on the flat-minimum map from the shipped `fig3.json`
//! preset, with settling times and a CSV/SVG time history per initial state.
//!
//! ```text
//! cargo run --release --example time_history [out_dir]
//! ```

use std::path::PathBuf;

use esc_lab::commands::cmd_simulate;
use esc_lab::config::RunConfig;
use esc_lab::scalar_maps::MapRegistry;

fn main() -> esc_lab::Result<()> {
    let preset = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/fig3.json");
    let mut cfg = RunConfig::load(&preset)?;
    if let Some(out) = std::env::args().nth(1) {
        cfg.out = out.into();
    }
    let summary = cmd_simulate(&cfg, &MapRegistry::default())?;
    println!("theta_bar* = {:?}, Gamma_bar* = {:?}", summary.theta_bar_star, summary.gamma_star);
    for run in &summary.runs {
        println!("ic{} from {:?} -> {}", run.ic_index, run.initial_state, run.file.display());
        println!("  final theta error {:?}, final Gamma error {:?}", run.final_theta_error, run.final_gamma_error);
        for s in &run.settling {
            println!("  |theta_hat - theta_bar*| < {} for t > {:?}", s.threshold, s.last_time_above);
        }
    }
    Ok(())
}
