use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hmge::checkpoint::{export, load_checkpoint, save_checkpoint, Checkpoint};
use hmge::eval::{
    evaluate_classification, link_task, mean_accuracy, run_ablations, run_embedding_sweep,
    run_synthetic_experiment, write_accuracy_csv, write_report, EvalReport, EvalSettings,
    SyntheticExperiment,
};
use hmge::graph::MultiplexGraph;
use hmge::io::load_multiplex;
use hmge::model::Encoder;
use hmge::sbm::{generate_multiplex, save_dataset, SbmConfig};
use hmge::train::{train, write_train_log};
use serde_json::json;

use crate::options::*;

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(hmge::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| {
        CliError::Core(hmge::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn load_data(flag: &Option<std::path::PathBuf>, file: &FileConfig) -> CliResult<MultiplexGraph> {
    let dir = required_path(flag, &file.data, "data")?;
    Ok(load_multiplex(dir)?)
}

pub fn synth(args: &SynthArgs, file: &FileConfig) -> CliResult<()> {
    let defaults = SbmConfig::default();
    let out = required_path(&args.out, &file.out, "out")?;
    let config = SbmConfig {
        num_nodes: pick(&args.nodes, &file.nodes, defaults.num_nodes),
        num_dims: pick(&args.dims, &file.dims, defaults.num_dims),
        num_classes: pick(&args.classes, &file.classes, defaults.num_classes),
        class_probs: Vec::new(),
        p_in: pick(&args.p_in, &file.p_in, defaults.p_in),
        p_out: pick(&args.p_out, &file.p_out, defaults.p_out),
        seed: pick(&args.seed, &file.seed, defaults.seed),
        features: feature_kind(
            pick(&args.features, &file.features, FeatureArg::Degree),
            pick(&args.feature_width, &file.feature_width, 64),
        ),
    };
    let dataset = generate_multiplex(&config)?;
    save_dataset(&dataset, &out)?;
    println!(
        "wrote {} nodes, {} dimensions, {} edges in total to {}",
        config.num_nodes,
        config.num_dims,
        dataset
            .graph
            .dimensions()
            .iter()
            .map(|a| a.upper_edges().len())
            .sum::<usize>(),
        out.display()
    );
    Ok(())
}

pub fn train_cmd(args: &TrainArgs, file: &FileConfig) -> CliResult<()> {
    let graph = load_data(&args.data, file)?;
    let out = required_path(&args.out, &file.out, "out")?;
    let config = model_config(&args.model, file, graph.num_dims())?;
    let tc = train_config(&args.training, file, TRAIN_EPOCHS)?;
    let outcome = train(&graph, &config, &tc)?;
    create_dir(&out)?;
    export(&out, &outcome.params, &outcome.embeddings)?;
    write_train_log(&out.join("train_log.csv"), &outcome.history)?;
    save_checkpoint(
        out.join("model.bin"),
        &Checkpoint {
            config,
            num_features: graph.num_features(),
            params: outcome.params,
        },
    )?;
    println!(
        "trained {} epochs, best loss {} at epoch {}{}; outputs in {}",
        outcome.history.len(),
        outcome.history[outcome.best_epoch].loss,
        outcome.best_epoch,
        if outcome.stopped_early {
            " (stopped early)"
        } else {
            ""
        },
        out.display()
    );
    Ok(())
}

const TRAIN_EPOCHS: usize = 2000;
const SYNTHETIC_EPOCHS: usize = 500;

fn report(
    out: &Path,
    task: &str,
    metrics: BTreeMap<String, f64>,
    seed: u64,
    config: serde_json::Value,
) -> CliResult<()> {
    create_dir(out)?;
    for (k, v) in &metrics {
        println!("{k}: {v}");
    }
    write_report(
        &out.join("report.json"),
        &EvalReport {
            task: task.to_string(),
            metrics,
            seed,
            config,
        },
    )?;
    Ok(())
}

pub fn eval(args: &EvalArgs, file: &FileConfig) -> CliResult<()> {
    let task = args.task.or(file.task).ok_or_else(|| {
        CliError::Usage("--task is required (classification, link or synthetic)".into())
    })?;
    let out = required_path(&args.out, &file.out, "out")?;
    let model_path = args.model.clone().or_else(|| file.model.clone());
    let fraction = pick(
        &args.train_fraction,
        &file.train_fraction,
        EvalSettings::default().train_fraction,
    );
    match task {
        Task::Classification => {
            let graph = load_data(&args.data, file)?;
            let (z, seed, config) = match model_path {
                Some(path) => {
                    let ckpt = load_checkpoint(&path)?;
                    let encoder = Encoder::new(&graph, &ckpt.config)?;
                    let seed = pick(&args.training.seed, &file.seed, 0);
                    (encoder.embeddings(&ckpt.params)?, seed, ckpt.config)
                }
                None => {
                    let config = model_config(&args.model_args, file, graph.num_dims())?;
                    let tc = train_config(&args.training, file, TRAIN_EPOCHS)?;
                    (train(&graph, &config, &tc)?.embeddings, tc.seed, config)
                }
            };
            let m = evaluate_classification(&z, &graph, fraction, seed)?;
            let metrics = BTreeMap::from([
                ("accuracy".to_string(), m.accuracy),
                ("f1_macro".to_string(), m.f1_macro),
                ("f1_micro".to_string(), m.f1_micro),
            ]);
            report(
                &out,
                "classification",
                metrics,
                seed,
                json!({"model": config, "train_fraction": fraction}),
            )
        }
        Task::Link => {
            if model_path.is_some() {
                return Err(CliError::Usage(
                    "link prediction trains on the graph with held-out edges removed; drop --model"
                        .into(),
                ));
            }
            let graph = load_data(&args.data, file)?;
            let ratio = pick(&args.ratio, &file.ratio, EvalSettings::default().link_ratio);
            let config = model_config(&args.model_args, file, graph.num_dims())?;
            let tc = train_config(&args.training, file, TRAIN_EPOCHS)?;
            let (auc, ap) = link_task(&graph, &config, &tc, ratio)?;
            let metrics = BTreeMap::from([("auc_roc".to_string(), auc), ("ap".to_string(), ap)]);
            report(
                &out,
                "link",
                metrics,
                tc.seed,
                json!({"model": config, "train": tc, "ratio": ratio}),
            )
        }
        Task::Synthetic => {
            let defaults = SyntheticExperiment::default();
            let tc = train_config(&args.training, file, SYNTHETIC_EPOCHS)?;
            let exp = SyntheticExperiment {
                num_nodes: pick(&args.nodes, &file.nodes, defaults.num_nodes),
                dims: pick(&args.dim_counts, &file.dim_counts, defaults.dims.clone()),
                seeds: pick(&args.seeds, &file.seeds, defaults.seeds.clone()),
                embed_size: pick(
                    &args.model_args.embed_size,
                    &file.embed_size,
                    defaults.embed_size,
                ),
                num_layers: pick(&args.model_args.layers, &file.layers, defaults.num_layers),
                train: tc,
                train_fraction: fraction,
                ..defaults
            };
            let rows = run_synthetic_experiment(&exp)?;
            create_dir(&out)?;
            write_accuracy_csv(&out.join("fig6.csv"), &rows)?;
            let metrics = mean_accuracy(&rows)
                .into_iter()
                .map(|((d, method), acc)| (format!("D{d}_{}", method.name()), acc))
                .collect();
            report(
                &out,
                "synthetic",
                metrics,
                0,
                serde_json::to_value(&exp).unwrap_or_default(),
            )
        }
    }
}

pub fn ablate(args: &AblateArgs, file: &FileConfig) -> CliResult<()> {
    let graph = load_data(&args.data, file)?;
    let out = required_path(&args.out, &file.out, "out")?;
    let base = model_config(&args.model, file, graph.num_dims())?;
    if base.is_linear() {
        return Err(CliError::Usage(
            "ablations compare against the hierarchy; use --layers >= 1".into(),
        ));
    }
    let tc = train_config(&args.training, file, TRAIN_EPOCHS)?;
    let defaults = EvalSettings::default();
    let settings = EvalSettings {
        link_ratio: pick(&args.ratio, &file.ratio, defaults.link_ratio),
        train_fraction: pick(
            &args.train_fraction,
            &file.train_fraction,
            defaults.train_fraction,
        ),
    };
    let rows = run_ablations(&graph, &base, &tc, &settings)?;
    create_dir(&out)?;
    let mut csv = String::from("method,link_auc,link_ap,f1_macro,f1_micro\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.method.name(),
            r.link_auc,
            r.link_ap,
            opt(r.f1_macro),
            opt(r.f1_micro)
        )
        .expect("write to memory");
    }
    print!("{csv}");
    write_text(&out.join("ablation.csv"), &csv)?;
    write_report(
        &out.join("report.json"),
        &json!({"task": "ablation", "seed": tc.seed, "rows": rows}),
    )?;
    Ok(())
}

pub fn sweep(args: &SweepArgs, file: &FileConfig) -> CliResult<()> {
    let graph = load_data(&args.data, file)?;
    let out = required_path(&args.out, &file.out, "out")?;
    let sizes = pick(&args.embed_sizes, &file.embed_sizes, vec![16, 32, 64, 128]);
    if sizes.is_empty() {
        return Err(CliError::Usage(
            "--embed-sizes needs at least one value".into(),
        ));
    }
    let base = model_config(&args.model, file, graph.num_dims())?;
    let tc = train_config(&args.training, file, TRAIN_EPOCHS)?;
    let fraction = pick(
        &args.train_fraction,
        &file.train_fraction,
        EvalSettings::default().train_fraction,
    );
    let rows = run_embedding_sweep(&graph, &base, &tc, &sizes, fraction)?;
    create_dir(&out)?;
    let mut csv = String::from("embed_size,f1_macro,f1_micro\n");
    for r in &rows {
        writeln!(csv, "{},{},{}", r.embed_size, r.f1_macro, r.f1_micro).expect("write to memory");
    }
    print!("{csv}");
    write_text(&out.join("sweep.csv"), &csv)?;
    write_report(
        &out.join("report.json"),
        &json!({"task": "sweep", "seed": tc.seed, "rows": rows}),
    )?;
    Ok(())
}

pub fn export_cmd(args: &ExportArgs, file: &FileConfig) -> CliResult<()> {
    let model = required_path(&args.model, &file.model, "model")?;
    let out = required_path(&args.out, &file.out, "out")?;
    let graph = load_data(&args.data, file)?;
    let ckpt = load_checkpoint(&model)?;
    if ckpt.num_features != graph.num_features() {
        return Err(CliError::Core(hmge::Error::Invalid(format!(
            "model expects {} features, dataset has {}",
            ckpt.num_features,
            graph.num_features()
        ))));
    }
    let z = Encoder::new(&graph, &ckpt.config)?.embeddings(&ckpt.params)?;
    for path in export(&out, &ckpt.params, &z)? {
        println!("{}", path.display());
    }
    Ok(())
}
