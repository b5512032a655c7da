//! A small seeded sweep over sparsity levels, summarized per cell.

use tau2::harness::{run_experiment, summarize, ExperimentSpec};

fn main() -> tau2::Result<()> {
    let spec = ExperimentSpec::from_json(
        r#"{"schema":"tau2-exp/1",
            "matrix":{"family":"oversampled-dct","m":48,"n":512,"E":2},
            "signal":{"s":[2,6,10,14],"magnitude":{"model":"dynamic-range","d":3}},
            "trials":5,"base_seed":100}"#,
    )?;
    let records = run_experiment(&spec)?;
    for cell in summarize(&spec, &records).cells {
        println!(
            "s={:>2}: success {} ({}/{}), mean error {:.2e}",
            cell.s, cell.success_rate, cell.successes, cell.trials, cell.mean_relative_error
        );
    }
    Ok(())
}
