//! Run metrics: the per-tick trace, the six-figure summary, and the
//! cross-variant comparison table.

use serde::{Deserialize, Serialize};

use crate::Scalar;
use crate::SimTime;

/// The six headline figures of one run.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_bs_load_pct: Scalar,
    pub mean_user_satisfaction_pct: Scalar,
    pub call_block_count: u64,
    pub rlf_count: u64,
    pub handover_count: u64,
    pub pingpong_count: u64,
}

/// One trace row per tick: loads, per-user satisfaction, and cumulative
/// event counters (counted from the end of warm-up).
#[derive(Clone, PartialEq, Debug)]
pub struct TickRow {
    pub time: SimTime,
    pub cell_load: Vec<Scalar>,
    /// `None` for users without an active session this tick.
    pub user_satisfaction: Vec<Option<Scalar>>,
    pub cum_handover: u64,
    pub cum_pingpong: u64,
    pub cum_rlf: u64,
    pub cum_call_block: u64,
}

/// Time-average over measured ticks of the mean satisfaction of active
/// users, in percent. Ticks without a single active user are excluded.
pub fn mean_user_satisfaction(rows: &[TickRow]) -> Scalar {
    let mut tick_means = Vec::new();
    for row in rows {
        let active: Vec<Scalar> = row.user_satisfaction.iter().flatten().copied().collect();
        if !active.is_empty() {
            tick_means.push(active.iter().sum::<Scalar>() / active.len() as Scalar);
        }
    }
    if tick_means.is_empty() {
        return 0.0;
    }
    100.0 * tick_means.iter().sum::<Scalar>() / tick_means.len() as Scalar
}

/// Time-average over measured ticks of the mean load over all cells, in
/// percent.
pub fn mean_bs_load(rows: &[TickRow]) -> Scalar {
    let mut tick_means = Vec::new();
    for row in rows {
        if !row.cell_load.is_empty() {
            tick_means.push(row.cell_load.iter().sum::<Scalar>() / row.cell_load.len() as Scalar);
        }
    }
    if tick_means.is_empty() {
        return 0.0;
    }
    100.0 * tick_means.iter().sum::<Scalar>() / tick_means.len() as Scalar
}

/// Renders the tick trace as CSV: time, one load column per cell, one
/// satisfaction column per user (empty when inactive), cumulative counters.
pub fn trace_csv(rows: &[TickRow], n_cells: usize, n_users: usize) -> String {
    let mut out = String::from("time");
    for c in 0..n_cells {
        out.push_str(&format!(",load_c{c}"));
    }
    for u in 0..n_users {
        out.push_str(&format!(",sat_u{u}"));
    }
    out.push_str(",handovers,pingpongs,rlfs,call_blocks\n");
    for row in rows {
        out.push_str(&format!("{}", row.time.as_secs_f64()));
        for load in &row.cell_load {
            out.push_str(&format!(",{load}"));
        }
        for sat in &row.user_satisfaction {
            match sat {
                Some(s) => out.push_str(&format!(",{s}")),
                None => out.push(','),
            }
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            row.cum_handover, row.cum_pingpong, row.cum_rlf, row.cum_call_block
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Cross-variant comparison
// ---------------------------------------------------------------------------

/// Mean and sample standard deviation of one metric over several seeds.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Scalar,
    pub stddev: Scalar,
}

pub fn aggregate(values: &[Scalar]) -> Aggregate {
    if values.is_empty() {
        return Aggregate { mean: 0.0, stddev: 0.0 };
    }
    let n = values.len() as Scalar;
    let mean = values.iter().sum::<Scalar>() / n;
    let stddev = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<Scalar>() / (n - 1.0)).sqrt()
    };
    Aggregate { mean, stddev }
}

/// Aggregated summary of one variant over its seeds.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: String,
    pub runs: usize,
    pub mean_bs_load_pct: Aggregate,
    pub mean_user_satisfaction_pct: Aggregate,
    pub call_block_count: Aggregate,
    pub rlf_count: Aggregate,
    pub handover_count: Aggregate,
    pub pingpong_count: Aggregate,
}

pub fn aggregate_variant(variant: &str, summaries: &[MetricsSummary]) -> VariantAggregate {
    let collect = |f: fn(&MetricsSummary) -> Scalar| -> Aggregate {
        let values: Vec<Scalar> = summaries.iter().map(f).collect();
        aggregate(&values)
    };
    VariantAggregate {
        variant: variant.to_string(),
        runs: summaries.len(),
        mean_bs_load_pct: collect(|s| s.mean_bs_load_pct),
        mean_user_satisfaction_pct: collect(|s| s.mean_user_satisfaction_pct),
        call_block_count: collect(|s| s.call_block_count as Scalar),
        rlf_count: collect(|s| s.rlf_count as Scalar),
        handover_count: collect(|s| s.handover_count as Scalar),
        pingpong_count: collect(|s| s.pingpong_count as Scalar),
    }
}

const METRIC_ROWS: [(&str, fn(&VariantAggregate) -> Aggregate); 6] = [
    ("mean BS load [%]", |v| v.mean_bs_load_pct),
    ("mean user satisfaction [%]", |v| v.mean_user_satisfaction_pct),
    ("call blockades", |v| v.call_block_count),
    ("radio link failures", |v| v.rlf_count),
    ("handovers", |v| v.handover_count),
    ("ping-pong handovers", |v| v.pingpong_count),
];

/// Renders the comparison: metrics as rows, variants as columns, plus the
/// mean delta of each later variant against the first column.
pub fn comparison_table(aggregates: &[VariantAggregate]) -> String {
    if aggregates.is_empty() {
        return String::new();
    }
    let mut columns: Vec<String> = vec![String::from("metric")];
    columns.extend(aggregates.iter().map(|a| format!("{} (n={})", a.variant, a.runs)));
    for later in &aggregates[1..] {
        columns.push(format!("Δ {} − {}", later.variant, aggregates[0].variant));
    }

    let mut table: Vec<Vec<String>> = vec![columns];
    for (label, metric) in METRIC_ROWS {
        let mut row = vec![label.to_string()];
        for a in aggregates {
            let m = metric(a);
            row.push(format!("{:.2} ± {:.2}", m.mean, m.stddev));
        }
        let base = metric(&aggregates[0]).mean;
        for later in &aggregates[1..] {
            row.push(format!("{:+.2}", metric(later).mean - base));
        }
        table.push(row);
    }

    let widths: Vec<usize> = (0..table[0].len())
        .map(|col| table.iter().map(|row| row[col].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        time_s: f64,
        loads: &[Scalar],
        sats: &[Option<Scalar>],
        counters: (u64, u64, u64, u64),
    ) -> TickRow {
        TickRow {
            time: SimTime::from_secs_f64(time_s),
            cell_load: loads.to_vec(),
            user_satisfaction: sats.to_vec(),
            cum_handover: counters.0,
            cum_pingpong: counters.1,
            cum_rlf: counters.2,
            cum_call_block: counters.3,
        }
    }

    #[test]
    fn satisfaction_of_a_constant_half_served_user() {
        let rows: Vec<TickRow> =
            (0..10).map(|i| row(i as f64, &[0.5], &[Some(0.5)], (0, 0, 0, 0))).collect();
        assert_eq!(mean_user_satisfaction(&rows), 50.0);
    }

    #[test]
    fn fully_served_users_average_to_one_hundred() {
        let rows: Vec<TickRow> =
            (0..5).map(|i| row(i as f64, &[0.5], &[Some(1.0), Some(1.0)], (0, 0, 0, 0))).collect();
        assert_eq!(mean_user_satisfaction(&rows), 100.0);
    }

    #[test]
    fn hand_built_three_tick_average() {
        // Tick 1: users at 0.2 and 0.6 → 0.4. Tick 2: no active users
        // (excluded). Tick 3: one user at 0.8 → 0.8. Average: 0.6 → 60%.
        let rows = vec![
            row(1.0, &[0.1], &[Some(0.2), Some(0.6)], (0, 0, 0, 0)),
            row(2.0, &[0.1], &[None, None], (0, 0, 0, 0)),
            row(3.0, &[0.1], &[Some(0.8), None], (0, 0, 0, 0)),
        ];
        assert!((mean_user_satisfaction(&rows) - 60.0).abs() < 1e-12);
    }

    #[test]
    fn no_active_users_in_entire_run_is_zero() {
        let rows = vec![row(1.0, &[0.5], &[None], (0, 0, 0, 0))];
        assert_eq!(mean_user_satisfaction(&rows), 0.0);
    }

    #[test]
    fn load_average_of_idle_and_saturated_networks() {
        let idle: Vec<TickRow> = (0..4).map(|i| row(i as f64, &[0.0, 0.0], &[], (0, 0, 0, 0))).collect();
        assert_eq!(mean_bs_load(&idle), 0.0);
        let full: Vec<TickRow> = (0..4).map(|i| row(i as f64, &[1.0, 1.0], &[], (0, 0, 0, 0))).collect();
        assert_eq!(mean_bs_load(&full), 100.0);
        // Hand-built mixed trace: means 0.5 and 0.25 → 37.5%.
        let mixed = vec![
            row(0.0, &[1.0, 0.0], &[], (0, 0, 0, 0)),
            row(1.0, &[0.5, 0.0], &[], (0, 0, 0, 0)),
        ];
        assert!((mean_bs_load(&mixed) - 37.5).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_layout_and_empty_cells() {
        let rows = vec![row(0.1, &[0.25], &[Some(0.5), None], (1, 0, 0, 2))];
        let csv = trace_csv(&rows, 1, 2);
        let expected = "time,load_c0,sat_u0,sat_u1,handovers,pingpongs,rlfs,call_blocks\n\
                        0.1,0.25,0.5,,1,0,0,2\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn aggregate_mean_and_sample_stddev() {
        let a = aggregate(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((a.mean - 5.0).abs() < 1e-12);
        // Sample (n−1) standard deviation of this classic set is ~2.138.
        assert!((a.stddev - 2.1380899352993947).abs() < 1e-12);
        let single = aggregate(&[3.0]);
        assert_eq!(single.stddev, 0.0);
    }

    #[test]
    fn identical_summaries_give_zero_deltas() {
        let s = MetricsSummary {
            mean_bs_load_pct: 80.0,
            mean_user_satisfaction_pct: 63.0,
            call_block_count: 500,
            rlf_count: 200,
            handover_count: 5000,
            pingpong_count: 3000,
        };
        let a = aggregate_variant("off", &[s, s]);
        let b = aggregate_variant("prio-mro", &[s, s]);
        let table = comparison_table(&[a, b]);
        for line in table.lines().skip(2) {
            assert!(line.ends_with("+0.00"), "expected zero delta in: {line}");
        }
    }

    #[test]
    fn comparison_table_shape_for_three_variants() {
        let s = MetricsSummary {
            mean_bs_load_pct: 80.0,
            mean_user_satisfaction_pct: 63.0,
            call_block_count: 500,
            rlf_count: 200,
            handover_count: 5000,
            pingpong_count: 3000,
        };
        let aggregates = vec![
            aggregate_variant("off", &[s]),
            aggregate_variant("prio-mlb", &[s]),
            aggregate_variant("prio-mro", &[s]),
        ];
        let table = comparison_table(&aggregates);
        let lines: Vec<&str> = table.lines().collect();
        // Header + separator + six metric rows.
        assert_eq!(lines.len(), 8);
        assert!(lines[0].contains("off"));
        assert!(lines[0].contains("prio-mlb"));
        assert!(lines[0].contains("prio-mro"));
        assert!(lines[2].starts_with("mean BS load"));
        assert!(lines[7].starts_with("ping-pong handovers"));
    }

    #[test]
    fn satisfaction_delta_between_table_columns() {
        let mut off = MetricsSummary {
            mean_bs_load_pct: 81.23,
            mean_user_satisfaction_pct: 63.27,
            call_block_count: 547,
            rlf_count: 204,
            handover_count: 5630,
            pingpong_count: 3371,
        };
        let prio_mro = MetricsSummary {
            mean_bs_load_pct: 82.71,
            mean_user_satisfaction_pct: 65.50,
            call_block_count: 542,
            rlf_count: 204,
            handover_count: 5415,
            pingpong_count: 3273,
        };
        let table = comparison_table(&[
            aggregate_variant("off", &[off]),
            aggregate_variant("prio-mro", &[prio_mro]),
        ]);
        let sat_line = table.lines().find(|l| l.starts_with("mean user satisfaction")).unwrap();
        assert!(sat_line.ends_with("+2.23"), "line: {sat_line}");
        // Self-check of the inputs: the delta really is 2.23 percentage points.
        off.mean_user_satisfaction_pct += 2.23;
        assert!((off.mean_user_satisfaction_pct - prio_mro.mean_user_satisfaction_pct).abs() < 1e-9);
    }
}
