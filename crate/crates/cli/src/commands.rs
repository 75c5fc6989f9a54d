use std::fs;
use std::path::Path;
use std::time::Instant;

use dmmt::simulate::{
    benchmark, median, replicate_seed, roc_curve, run_replicates, sensitivity_sweep, split_statistics, SimRng,
};
use dmmt::{fit, representative_tree, rescale, roc_auc, Interval, NullSummary, PriorSpec, Rescaling, Scenario};
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::input::{self, Samples};
use crate::{BenchCmd, DataCmd, InputArgs, SimulateCmd, SweepCmd, RESULT_SCHEMA, SUMMARY_SCHEMA};

const META_SCHEMA: &str = "dmmt-meta/1";

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn format_bounds(bounds: &[(f64, f64)]) -> String {
    bounds
        .iter()
        .map(|(lo, hi)| format!("[{lo}, {hi})"))
        .collect::<Vec<_>>()
        .join(" x ")
}

fn intervals(ivs: &[Interval]) -> Vec<(f64, f64)> {
    ivs.iter().map(|iv| (iv.lo, iv.hi)).collect()
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: &'static str,
    command: &'a str,
    wall_millis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_millis: Option<f64>,
    threads: usize,
}

fn write_meta(dir: &Path, command: &str, start: Instant, fit_millis: Option<f64>) -> CliResult<()> {
    let meta = Meta {
        schema_version: META_SCHEMA,
        command,
        wall_millis: start.elapsed().as_secs_f64() * 1e3,
        fit_millis,
        threads: rayon::current_num_threads(),
    };
    write_json(&dir.join("meta.json"), &meta)
}

pub fn load(args: &InputArgs) -> CliResult<Samples> {
    match (&args.input_a, &args.input_b, &args.input, &args.group_col) {
        (Some(a), Some(b), None, None) => input::read_pair(a, b),
        (None, None, Some(path), Some(col)) => input::read_grouped(path, col),
        _ => Err(CliError::Usage(
            "give either --input-a and --input-b, or --input with --group-col".into(),
        )),
    }
}

struct Fitted {
    samples: Samples,
    prior: PriorSpec,
    model: dmmt::PosteriorModel,
    fit_millis: f64,
}

fn fit_data(cmd: &DataCmd) -> CliResult<Fitted> {
    let prior = cmd.prior.resolve()?;
    let samples = load(&cmd.input)?;
    let data = rescale(&samples.group1, &samples.group2)?;
    let start = Instant::now();
    let model = fit(&data, &prior)?;
    let fit_millis = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &cmd.dump_memo {
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        model
            .write_memo_dump(std::io::BufWriter::new(file))
            .map_err(|e| CliError::io(path, e))?;
    }
    Ok(Fitted {
        samples,
        prior,
        model,
        fit_millis,
    })
}

#[derive(Serialize)]
struct TestResult<'a> {
    schema_version: &'static str,
    prob_null: f64,
    log_odds: f64,
    statistic: f64,
    n1: usize,
    n2: usize,
    dims: usize,
    columns: &'a [String],
    groups: &'a [String; 2],
    prior: &'a PriorSpec,
    rescaling: Option<&'a Rescaling>,
    evaluated_nodes: usize,
}

pub fn test(cmd: &DataCmd) -> CliResult<()> {
    let start = Instant::now();
    prepare_out(&cmd.out)?;
    let f = fit_data(cmd)?;
    let summary = NullSummary::of(&f.model);
    let data = f.model.dataset();
    let result = TestResult {
        schema_version: RESULT_SCHEMA,
        prob_null: summary.prob_null,
        log_odds: summary.log_odds,
        statistic: summary.statistic,
        n1: data.n1(),
        n2: data.n2(),
        dims: data.dims(),
        columns: &f.samples.columns,
        groups: &f.samples.labels,
        prior: &f.prior,
        rescaling: data.provenance(),
        evaluated_nodes: f.model.memo_len(),
    };
    write_json(&cmd.out.join("result.json"), &result)?;
    write_meta(&cmd.out, "test", start, Some(f.fit_millis))?;
    println!("prob_null\t{}", summary.prob_null);
    println!("log_odds\t{}", summary.log_odds);
    Ok(())
}

pub fn summarize(cmd: &DataCmd) -> CliResult<()> {
    let start = Instant::now();
    prepare_out(&cmd.out)?;
    let f = fit_data(cmd)?;
    let tree = representative_tree(&f.model, f.prior.delta_star)?;
    write_json(&cmd.out.join("tree.json"), &tree.to_json())?;

    let (n1, n2) = tree.total_counts;
    let frac = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let regions = tree.differential_regions(f.prior.delta_star);
    let rows = regions.iter().map(|node| {
        let bounds = tree.raw_bounds(&node.key).unwrap_or_else(|| node.key.bounds());
        vec![
            node.key.to_string(),
            node.level.to_string(),
            format_bounds(&intervals(&bounds)),
            node.rho_star[0].to_string(),
            node.effect_size.to_string(),
            frac(node.counts.0, n1).to_string(),
            frac(node.counts.1, n2).to_string(),
        ]
    });
    write_rows(
        &cmd.out.join("regions.csv"),
        &["key", "level", "bounds", "rho_star_d", "effect_size", "frac_group1", "frac_group2"],
        rows,
    )?;
    write_meta(&cmd.out, "summarize", start, Some(f.fit_millis))?;
    println!("nodes\t{}", tree.nodes.len());
    println!("differential_regions\t{}", regions.len());
    if let Some(top) = regions.first() {
        println!("top_region\t{}\teffect_size\t{}", top.key, top.effect_size);
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: &'static str,
    scenario: dmmt::ScenarioId,
    replicates: usize,
    seed: u64,
    n1: usize,
    n2: usize,
    prior: &'a PriorSpec,
    auc: f64,
    median_prob_null_null: f64,
    median_prob_null_alternative: f64,
}

pub fn simulate(cmd: &SimulateCmd) -> CliResult<()> {
    let start = Instant::now();
    let prior = cmd.prior.resolve()?;
    if cmd.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    prepare_out(&cmd.out)?;
    let scenario = Scenario::new(cmd.scenario);
    let results = run_replicates(&scenario, cmd.replicates, &prior, cmd.seed)?;

    let rows = results.iter().map(|r| {
        vec![
            r.replicate_index.to_string(),
            r.seed.to_string(),
            r.is_null.to_string(),
            r.prob_null.to_string(),
            r.statistic.to_string(),
            opt(r.top_region_key.as_ref()),
            opt(r.top_effect_size),
            r.top_region_raw_bounds.as_deref().map(format_bounds).unwrap_or_default(),
        ]
    });
    write_rows(
        &cmd.out.join("results.csv"),
        &[
            "replicate",
            "seed",
            "is_null",
            "prob_null",
            "statistic",
            "top_region_key",
            "top_effect_size",
            "top_region_bounds",
        ],
        rows,
    )?;
    write_rows(
        &cmd.out.join("timings.csv"),
        &["replicate", "is_null", "fit_millis"],
        results
            .iter()
            .map(|r| vec![r.replicate_index.to_string(), r.is_null.to_string(), r.fit_millis.to_string()]),
    )?;

    let (null, alt) = split_statistics(&results);
    let auc = roc_auc(&null, &alt)?;
    write_rows(
        &cmd.out.join("roc.csv"),
        &["false_positive_rate", "true_positive_rate"],
        roc_curve(&null, &alt).into_iter().map(|(x, y)| vec![x.to_string(), y.to_string()]),
    )?;
    let pn = |is_null: bool| -> Vec<f64> {
        results.iter().filter(|r| r.is_null == is_null).map(|r| r.prob_null).collect()
    };
    let summary = SimulateSummary {
        schema_version: SUMMARY_SCHEMA,
        scenario: cmd.scenario,
        replicates: cmd.replicates,
        seed: cmd.seed,
        n1: scenario.n1,
        n2: scenario.n2,
        prior: &prior,
        auc,
        median_prob_null_null: median(&pn(true)),
        median_prob_null_alternative: median(&pn(false)),
    };
    write_json(&cmd.out.join("summary.json"), &summary)?;

    if cmd.emit_data {
        // the first replicate's data, exactly as the runner drew it
        let mut rng = SimRng::seed_from_u64(replicate_seed(cmd.seed, 0));
        let (g1, g2) = scenario.generate(&mut rng);
        let columns: Vec<String> = (1..=scenario.dims()).map(|j| format!("x{j}")).collect();
        input::write_points(&cmd.out.join("group_a.csv"), &columns, &g1)?;
        input::write_points(&cmd.out.join("group_b.csv"), &columns, &g2)?;
    }
    write_meta(&cmd.out, "simulate", start, None)?;
    println!("auc\t{auc}");
    println!("median_prob_null_null\t{}", summary.median_prob_null_null);
    println!("median_prob_null_alternative\t{}", summary.median_prob_null_alternative);
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    schema_version: &'static str,
    scenario: dmmt::ScenarioId,
    sizes: &'a [usize],
    replicates: usize,
    inner: usize,
    seed: u64,
    log_log_slope: f64,
}

pub fn bench(cmd: &BenchCmd) -> CliResult<()> {
    let prior = cmd.prior.resolve()?;
    prepare_out(&cmd.out)?;
    let scenario = Scenario::new(cmd.scenario);
    let report = benchmark(&scenario, &cmd.sizes, cmd.replicates, cmd.inner, &prior, cmd.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_rows(
        &cmd.out.join("bench.csv"),
        &["n", "median_fit_millis", "replicates"],
        report
            .rows
            .iter()
            .map(|r| vec![r.n.to_string(), r.median_fit_millis.to_string(), r.replicates.to_string()]),
    )?;
    let summary = BenchSummary {
        schema_version: SUMMARY_SCHEMA,
        scenario: cmd.scenario,
        sizes: &cmd.sizes,
        replicates: cmd.replicates,
        inner: cmd.inner,
        seed: cmd.seed,
        log_log_slope: report.log_log_slope,
    };
    write_json(&cmd.out.join("summary.json"), &summary)?;
    for r in &report.rows {
        println!("n={}\tmedian_fit_millis={:.4}", r.n, r.median_fit_millis);
    }
    println!("log_log_slope\t{}", report.log_log_slope);
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    schema_version: &'static str,
    scenario: dmmt::ScenarioId,
    replicates: usize,
    seed: u64,
    cells: &'a [dmmt::simulate::SweepCell],
}

pub fn sweep(cmd: &SweepCmd) -> CliResult<()> {
    let start = Instant::now();
    let base = cmd.prior.resolve()?;
    if cmd.replicates == 0 || cmd.betas.is_empty() || cmd.gammas.is_empty() {
        return Err(CliError::Usage("sweep needs positive replicates and non-empty grids".into()));
    }
    let grid: Vec<(f64, f64)> = cmd
        .betas
        .iter()
        .flat_map(|&b| cmd.gammas.iter().map(move |&g| (b, g)))
        .collect();
    for &(beta, gamma) in &grid {
        PriorSpec { beta, gamma, ..base.clone() }.validate()?;
    }
    prepare_out(&cmd.out)?;
    let cells = sensitivity_sweep(&Scenario::new(cmd.scenario), &grid, cmd.replicates, &base, cmd.seed)?;
    write_rows(
        &cmd.out.join("sweep.csv"),
        &["beta", "gamma", "median_prob_null_null", "median_prob_null_alternative", "auc"],
        cells.iter().map(|c| {
            vec![
                c.beta.to_string(),
                c.gamma.to_string(),
                c.median_null.to_string(),
                c.median_alt.to_string(),
                c.auc.to_string(),
            ]
        }),
    )?;
    write_json(
        &cmd.out.join("summary.json"),
        &SweepSummary {
            schema_version: SUMMARY_SCHEMA,
            scenario: cmd.scenario,
            replicates: cmd.replicates,
            seed: cmd.seed,
            cells: &cells,
        },
    )?;
    write_meta(&cmd.out, "sweep", start, None)?;
    println!("cells\t{}", cells.len());
    Ok(())
}
