//! Parameter sweep over (K, p) grids: each cell clusters, trains and
//! evaluates independently; rows come out in grid order regardless of how
//! many threads run the cells.

use rigsplit_core::compute_offsets;
use rigsplit_core::exec;
use rigsplit_core::model::{AnimationSet, BlendshapeModel};
use rigsplit_core::{clustering, solver};

pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub seed: u64,
    pub noise: f64,
    pub clamp: bool,
}

/// Runs every (K, p) cell and renders the result as CSV (comma separator,
/// LF line endings). Failed cells keep their row with `error` markers so
/// the grid stays rectangular.
pub fn run_sweep(
    model: &BlendshapeModel,
    train_set: &AnimationSet,
    test_set: &AnimationSet,
    config: &SweepConfig,
) -> String {
    let offsets = compute_offsets(model);
    let cells: Vec<(usize, f64)> = config
        .k_values
        .iter()
        .flat_map(|&k| config.p_values.iter().map(move |&p| (k, p)))
        .collect();

    let rows = exec::map_collect(&cells, |&(k, p)| {
        let outcome = clustering::cluster_offsets(&offsets, k, p, config.seed)
            .map_err(|e| e.to_string())
            .and_then(|clustering| {
                solver::solve_and_evaluate(
                    model,
                    &clustering,
                    train_set,
                    test_set,
                    config.noise,
                    config.clamp,
                )
                .map_err(|e| e.to_string())
            });
        match outcome {
            Ok(report) => format!(
                "{},{},{},{},{},{},{}",
                k, p, report.mean_ce, report.mean_me, report.ncv, report.cpc, report.vpc
            ),
            Err(message) => {
                log::warn!("sweep cell K={k} p={p} failed: {message}");
                format!("{k},{p},error,error,error,error,error")
            }
        }
    });

    let mut csv = String::from("K,p,mean_CE,mean_ME,NCV,CpC,VpC\n");
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    csv
}
