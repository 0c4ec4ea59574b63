//! Runs the default scenario under each conflict-mitigation mode and prints
//! the headline metrics. Handy for eyeballing calibration changes:
//!
//! ```sh
//! cargo run --release -p ricsim-core --example quickrun [seed] [duration_s]
//! ```

use ricsim_core::config::{CmModeSetting, ScenarioConfig};
use ricsim_core::engine::run;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|a| a.parse().expect("seed")).unwrap_or(1);
    let duration: f64 = args.next().map(|a| a.parse().expect("duration")).unwrap_or(200.0);

    println!(
        "{:>9} {:>8} {:>8} {:>7} {:>6} {:>7} {:>7}  (seed {seed}, {duration} s)",
        "variant", "load%", "sat%", "blocks", "rlf", "ho", "pp"
    );
    for mode in [CmModeSetting::Off, CmModeSetting::PrioMlb, CmModeSetting::PrioMro] {
        let mut config = ScenarioConfig::default();
        config.seed = seed;
        config.duration_s = duration;
        config.cm.mode = mode;
        let out = run(&config).expect("run");
        let s = &out.summary;
        let rejected = out
            .verdicts
            .iter()
            .filter(|p| !p.verdict.accepted())
            .count();
        println!(
            "{:>9} {:>8.2} {:>8.2} {:>7} {:>6} {:>7} {:>7}  ({} msgs, {} rejected)",
            mode.as_str(),
            s.mean_bs_load_pct,
            s.mean_user_satisfaction_pct,
            s.call_block_count,
            s.rlf_count,
            s.handover_count,
            s.pingpong_count,
            out.verdicts.len(),
            rejected,
        );
    }
}
