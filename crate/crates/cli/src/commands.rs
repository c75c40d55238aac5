use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spmtl_core::dataset::{load_csv, split, Standardizer};
use spmtl_core::metrics::{evaluate_predictions, EvalResult};
use spmtl_core::model::SavedModel;
use spmtl_core::pace::{instance_losses, write_weight_dump, PaceWeights};
use spmtl_core::parallel::Execution;
use spmtl_core::sweep::{run_sweep, summarize, write_results_csv};
use spmtl_core::toy::generate_toy;
use spmtl_core::{fit, FitReport, ModelState, MultiTaskDataset};

use crate::config::{load_eval, load_run, load_sweep, load_toy, DataSource, EvalConfig, Overrides};

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn gen_toy(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = load_toy(config, seed)?;
    let (data, truth) = generate_toy(&cfg)?;
    create_out(out)?;
    data.write_csv(out.join("toy.csv"))?;
    truth.write_json(out.join("ground_truth.json"))?;
    let state = ModelState {
        u: truth.u_true.clone(),
        v: truth.v_true.clone(),
        w: PaceWeights::ones(&data.task_sizes()),
    };
    SavedModel::new(&state, data.task_ids(), None, None).save(out.join("true_model.json"))?;
    println!(
        "m={} n={} d={} seed={}",
        data.num_tasks(),
        data.num_instances(),
        data.dim(),
        cfg.seed
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReport<'a> {
    fit: &'a FitReport,
    train_metrics: EvalResult,
    test_metrics: Option<EvalResult>,
}

pub fn train(config: &Path, ov: Overrides, out: &Path) -> Result<()> {
    let cfg = load_run(config, ov)?;
    let data = match &cfg.data {
        DataSource::Toy(toy) => generate_toy(toy)?.0,
        DataSource::Csv(src) => load_csv(&src.path, &src.schema)?,
    };
    let (mut train, mut test) = match cfg.split {
        Some(spec) => {
            let (a, b) = split(&data, &spec)?;
            (a, Some(b))
        }
        None => (data, None),
    };
    let standardizer = cfg.standardize.then(|| Standardizer::fit(&train));
    if let Some(st) = &standardizer {
        train = st.apply(&train)?;
        test = test.map(|t| st.apply(&t)).transpose()?;
    }
    create_out(out)?;

    let (state, report) = fit(&train, &cfg.train).context("training failed")?;
    if let Some(warning) = report.pace_init.as_ref().and_then(|p| p.warning.as_ref()) {
        eprintln!("warning: {warning}");
    }
    let train_metrics = state.evaluate(&train)?;
    let test_metrics = test.as_ref().map(|t| state.evaluate(t)).transpose()?;

    let saved = SavedModel::new(
        &state,
        train.task_ids(),
        Some(cfg.train.clone()),
        Some((&report.pace_final).into()),
    );
    saved.save(out.join("model.json"))?;
    if let Some(st) = &standardizer {
        write_json(&out.join("standardizer.json"), st)?;
    }
    write_json(
        &out.join("report.json"),
        &TrainReport {
            fit: &report,
            train_metrics: train_metrics.clone(),
            test_metrics: test_metrics.clone(),
        },
    )?;
    let losses = instance_losses(&state.u, &state.v, &train, cfg.train.execution)?;
    write_weight_dump(out.join("weights.csv"), &train.task_ids(), &losses, &state.w)?;

    print!(
        "mode={} iterations={} termination={:?} train_nmse={:.6}",
        cfg.train.mode,
        report.iterations(),
        report.termination,
        train_metrics.nmse
    );
    match test_metrics {
        Some(t) => println!(" test_nmse={:.6} test_rmse={:.6}", t.nmse, t.rmse),
        None => println!(),
    }
    Ok(())
}

fn load_model_and_data(model: &Path, data: &Path, ecfg: &EvalConfig) -> Result<(SavedModel, ModelState, MultiTaskDataset)> {
    let saved = SavedModel::load(model)?;
    let state = saved.to_state().with_context(|| format!("invalid model {}", model.display()))?;
    let mut ds = load_csv(data, &ecfg.schema)?;
    if let Some(p) = &ecfg.standardizer {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let st: Standardizer = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        ds = st.apply(&ds)?;
    }
    Ok((saved, state, ds))
}

fn model_index(saved: &SavedModel, task_id: &str) -> Result<usize> {
    match saved.task_ids.iter().position(|t| t == task_id) {
        Some(i) => Ok(i),
        None => bail!("task {task_id:?} is not in the model"),
    }
}

pub fn eval(model: &Path, data: &Path, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let ecfg = load_eval(config)?;
    let (saved, state, ds) = load_model_and_data(model, data, &ecfg)?;
    let preds = ds
        .tasks()
        .iter()
        .map(|t| {
            let i = model_index(&saved, &t.task_id)?;
            Ok(state.predict(&t.features, i)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let result = evaluate_predictions(&preds, &ds)?;

    println!("pooled rmse={:.6} nmse={:.6}", result.rmse, result.nmse);
    for t in &result.per_task {
        let nmse = t.nmse.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        println!("task {} n={} rmse={:.6} nmse={nmse}", t.task_id, t.n_test, t.rmse);
    }
    if let Some(dir) = out {
        create_out(dir)?;
        write_json(&dir.join("eval.json"), &result)?;
    }
    Ok(())
}

pub fn weights_dump(model: &Path, data: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let ecfg = load_eval(config)?;
    let (saved, state, ds) = load_model_and_data(model, data, &ecfg)?;
    let ordered = saved
        .task_ids
        .iter()
        .map(|id| match ds.tasks().iter().find(|t| &t.task_id == id) {
            Some(t) => Ok(t.clone()),
            None => bail!("model task {id:?} is missing from {}", data.display()),
        })
        .collect::<Result<Vec<_>>>()?;
    let ordered = MultiTaskDataset::new(ordered)?;
    state
        .w
        .validate(&ordered.task_sizes())
        .context("model weights do not match the data; pass the training split")?;
    let losses = instance_losses(&state.u, &state.v, &ordered, Execution::default())?;
    create_out(out)?;
    let path = out.join("weights.csv");
    write_weight_dump(&path, &saved.task_ids, &losses, &state.w)?;
    println!("{} instances written to {}", ordered.num_instances(), path.display());
    Ok(())
}

pub fn benchmark(config: Option<&Path>, ov: Overrides, out: &Path) -> Result<()> {
    let cfg = load_sweep(config, ov)?;
    create_out(out)?;
    let outcome = run_sweep(&cfg, Some(&out.join("cells")))?;
    write_results_csv(out.join("results.csv"), &outcome.rows)?;
    write_results_csv(out.join("grid.csv"), &outcome.grid)?;
    let summary = summarize(&outcome.rows, &outcome.choices, cfg.t_test, cfg.level)?;
    write_json(&out.join("summary.json"), &summary)?;

    println!(
        "{} cells ({} computed, {} cached), {} result rows",
        outcome.grid.len(),
        outcome.computed,
        outcome.cached,
        outcome.rows.len()
    );
    for g in &summary.groups {
        let fmt = |m: Option<spmtl_core::sweep::MeanStd>| m.map_or("n/a".to_string(), |m| format!("{:.4}±{:.4}", m.mean, m.std));
        println!(
            "{:<6} ratio={:<5} nmse={} rmse={} ok={} failed={}",
            g.method.name(),
            g.train_ratio,
            fmt(g.nmse),
            fmt(g.rmse),
            g.completed,
            g.failed
        );
    }
    for c in &summary.comparisons {
        if let Some(t) = &c.nmse {
            println!(
                "spmtl vs {} ratio={} pairs={} t={:.3} critical={:.3} significant={}",
                c.baseline.name(),
                c.train_ratio,
                c.pairs,
                t.t,
                t.critical,
                t.significant
            );
        }
    }
    Ok(())
}
