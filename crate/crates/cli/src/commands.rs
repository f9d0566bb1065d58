use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;

use brnn_core::data::{bc_generate, load_mnist, rad_generate, rad_lite_generate, split};
use brnn_core::io::{parse_spec, read_dataset, write_dataset, write_spec};
use brnn_core::rnn::train::train;
use brnn_core::sweep::{
    feature_names, forest_eval, forest_train, holdout_split, read_registry, run_sweep, BudgetMode, ForestConfig,
    Registry, SweepConfig,
};
use brnn_core::{balance, preset, BalanceRequest, RngStream, SequenceDataset, TrainConfig};

use crate::export::{bin_tables, export, print_bins, write_bins, ExportKind, MetaModel};
use crate::{
    BalanceArgs, BinsArgs, Cli, CliError, CliResult, Command, DataArgs, DataTask, ExportArgs, MetaEvalArgs,
    MetaTrainArgs, SweepArgs, TrainArgs,
};

/// Environment variable naming the default MNIST directory.
pub const DATA_DIR_ENV: &str = "BRNN_DATA_DIR";

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Data(a) => data(cli, a),
        Command::Balance(a) => balance_cmd(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Bins(a) => bins(cli, a),
        Command::MetaTrain(a) => meta_train(cli, a),
        Command::MetaEval(a) => meta_eval(cli, a),
        Command::Export(a) => export_cmd(cli, a),
    }
}

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Data(brnn_core::Error::Config(msg.into())))
}

/// `explicit`, or `name` under the output directory.
fn target(cli: &Cli, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| cli.out_dir.join(name))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

fn clip(no_clip: bool, clip: f64) -> Option<f64> {
    (!no_clip).then_some(clip)
}

fn data(cli: &Cli, a: &DataArgs) -> CliResult<()> {
    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return config_err(format!("--val-fraction must lie in (0, 1), got {}", a.val_fraction));
    }
    let (count, len) = match a.task {
        DataTask::Rad => (a.count.unwrap_or(5000), a.seq_len.unwrap_or(9)),
        DataTask::RadLite => (a.count.unwrap_or(2500), a.seq_len.unwrap_or(5)),
        DataTask::Bc => (a.count.unwrap_or(1000), a.seq_len.unwrap_or(brnn_core::data::bc::BC_LENGTH)),
    };
    let mut rng = RngStream::new(cli.seed, 0);
    let raw = match a.task {
        DataTask::Rad => {
            let dir = match (&a.mnist_dir, std::env::var_os(DATA_DIR_ENV)) {
                (Some(d), _) => d.clone(),
                (None, Some(d)) => PathBuf::from(d),
                (None, None) => return config_err(format!("no MNIST directory: pass --mnist-dir or set {DATA_DIR_ENV}")),
            };
            rad_generate(&load_mnist(&dir)?, count, len, &mut rng)?
        }
        DataTask::RadLite => rad_lite_generate(count, len, a.side, &mut rng)?,
        DataTask::Bc => bc_generate(a.teacher_seed, a.input_dim, a.output_dim, count, len, &mut rng)?,
    };
    let ds = split(raw, a.val_fraction, &mut rng)?;
    let default_name = match a.task {
        DataTask::Rad => "rad.bin",
        DataTask::RadLite => "rad-lite.bin",
        DataTask::Bc => "bc.bin",
    };
    let path = target(cli, &a.output, default_name);
    ensure_parent(&path)?;
    write_dataset(&ds, &path)?;
    println!(
        "wrote {} ({} train, {} validation, {} steps, {} -> {})",
        path.display(),
        ds.train.len(),
        ds.validation.len(),
        ds.seq_len,
        ds.input_dim,
        ds.output_dim
    );
    Ok(())
}

fn balance_cmd(cli: &Cli, a: &BalanceArgs) -> CliResult<()> {
    let req = BalanceRequest {
        input_dim: a.input_dim,
        output_dim: a.output_dim,
        budget: a.budget,
        target_hp: a.target_hp,
        step: a.step,
        max_hidden: a.max_hidden,
    };
    req.validate()?;
    let res = balance(&req)?;
    let text = format!(
        "# hidden_proportion = {}\n# nominal_total = {}\n# sparsified_block = {} at sparsity {}\n{}",
        res.achieved_hp,
        res.nominal_total,
        res.sparsified_block.key(),
        res.sparsity,
        write_spec(&res.spec)
    );
    let path = target(cli, &a.output, "spec.txt");
    ensure_parent(&path)?;
    std::fs::write(&path, text)?;
    println!(
        "hidden proportion {:.4} with hidden_dim {}, {} sparsity {}, {} parameters; wrote {}",
        res.achieved_hp,
        res.spec.hidden_dim,
        res.sparsified_block.key(),
        res.sparsity,
        res.nominal_total,
        path.display()
    );
    Ok(())
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let data = read_dataset(&a.data)?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(brnn_core::Error::Input(format!("{} has an empty split", a.data.display())).into());
    }
    let mut spec = match (&a.spec, a.preset) {
        (Some(p), _) => parse_spec(&std::fs::read_to_string(p)?)?,
        (None, Some(name)) => preset(name, data.input_dim, data.output_dim, a.budget.expect("clap requires --budget"))?,
        (None, None) => return Err(CliError::Usage("pass --spec or --preset".into())),
    };
    if let Some(lr) = a.lr {
        spec.learning_rate = lr;
    }
    let cfg = TrainConfig {
        learning_rate: spec.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        grad_clip_norm: clip(a.no_clip, a.clip),
        seed: cli.seed,
        loss: data.task.loss_kind(),
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let (ckpt, logs) = train(&spec, &data, &cfg)?;

    let path = target(cli, &a.output, "model.ckpt");
    ensure_parent(&path)?;
    ckpt.save(&path)?;
    let log_path = cli.out_dir.join("train_log.csv");
    ensure_parent(&log_path)?;
    let mut w = csv::Writer::from_path(&log_path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "val_acc", "stable"])?;
    for l in &logs {
        w.write_record([
            l.epoch.to_string(),
            l.train_loss.to_string(),
            l.val_loss.to_string(),
            l.val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            l.stable.to_string(),
        ])?;
    }
    w.flush()?;
    let last = logs.last().expect("epochs >= 1");
    println!(
        "hidden_dim {}: final val_loss {}{}; wrote {} and {}",
        spec.hidden_dim,
        last.val_loss,
        last.val_accuracy.map(|v| format!(", val_acc {v:.4}")).unwrap_or_default(),
        path.display(),
        log_path.display()
    );
    match logs.iter().find(|l| !l.stable) {
        Some(l) => Err(CliError::Diverged(format!("at epoch {}", l.epoch))),
        None => Ok(()),
    }
}

fn sweep(cli: &Cli, a: &SweepArgs) -> CliResult<()> {
    let data: SequenceDataset = read_dataset(&a.data)?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(brnn_core::Error::Input(format!("{} has an empty split", a.data.display())).into());
    }
    let budget = match (a.budget, a.hidden_dim) {
        (Some(budget), _) => BudgetMode::Fixed { budget },
        (None, Some(hidden_dim)) => BudgetMode::Free { hidden_dim },
        (None, None) => return Err(CliError::Usage("pass --budget or --hidden-dim".into())),
    };
    let task = a.task.clone().unwrap_or_else(|| {
        a.data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into())
    });
    let mut cfg = SweepConfig::new(task, a.runs, budget, cli.seed);
    cfg.first_run_id = a.first_run_id;
    cfg.max_hidden = a.max_hidden;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.grad_clip_norm = clip(a.no_clip, a.clip);
    cfg.record_timing = a.record_timing;
    cfg.validate()?;
    TrainConfig { batch_size: cfg.batch_size, epochs: cfg.epochs, grad_clip_norm: cfg.grad_clip_norm, ..TrainConfig::default() }
        .validate()?;

    let path = target(cli, &a.registry, "registry.jsonl");
    ensure_parent(&path)?;
    let mut reg = Registry::open(&path)?;
    let new = run_sweep(&cfg, &data, Some(&mut reg))?;
    let unstable = new.iter().filter(|r| !r.stable).count();
    info!("sweep finished: {} new records", new.len());
    println!(
        "{} new runs ({unstable} unstable, {} already present or infeasible); registry {} holds {} runs",
        new.len(),
        a.runs - new.len(),
        path.display(),
        reg.len()
    );
    Ok(())
}

fn bins(cli: &Cli, a: &BinsArgs) -> CliResult<()> {
    let records = read_registry(&a.registry)?;
    let metrics: Vec<_> = match a.metric {
        Some(m) => vec![m],
        None => brnn_core::sweep::BinMetric::ALL.to_vec(),
    };
    let tables = bin_tables(&records, &metrics)?;
    let path = cli.out_dir.join(ExportKind::Bins.file_name());
    ensure_parent(&path)?;
    write_bins(&path, &tables)?;
    let mut out = std::io::stdout().lock();
    print_bins(&mut out, &tables)?;
    writeln!(out, "{} runs; wrote {}", records.len(), path.display())?;
    Ok(())
}

fn meta_train(cli: &Cli, a: &MetaTrainArgs) -> CliResult<()> {
    let cfg = ForestConfig {
        trees: a.trees,
        max_depth: a.max_depth,
        min_leaf: a.min_leaf,
        feature_fraction: a.feature_fraction,
        bootstrap: !a.no_bootstrap,
        seed: cli.seed,
    };
    cfg.validate()?;
    if !(0.0..1.0).contains(&a.holdout) {
        return config_err(format!("--holdout must lie in [0, 1), got {}", a.holdout));
    }
    let records = read_registry(&a.registry)?;
    let holdout_seed = a.holdout_seed.unwrap_or(cli.seed);
    let (train_set, held) = if a.holdout == 0.0 {
        (records, Vec::new())
    } else {
        holdout_split(&records, a.holdout, holdout_seed)?
    };
    let forest = forest_train(&train_set, &cfg)?;
    let ids = |v: &[brnn_core::sweep::RunRecord]| {
        let mut ids: Vec<u64> = v.iter().map(|r| r.run_id).collect();
        ids.sort_unstable();
        ids
    };
    let model = MetaModel {
        features: feature_names(),
        holdout_fraction: a.holdout,
        holdout_seed,
        train_ids: ids(&train_set),
        held_out_ids: ids(&held),
        forest,
    };
    let path = target(cli, &a.output, "forest.json");
    ensure_parent(&path)?;
    std::fs::write(&path, serde_json::to_string(&model)?)?;
    println!(
        "{} trees on {} runs ({} held out); wrote {}",
        model.forest.trees.len(),
        model.train_ids.len(),
        model.held_out_ids.len(),
        path.display()
    );
    Ok(())
}

fn meta_eval(cli: &Cli, a: &MetaEvalArgs) -> CliResult<()> {
    let records = read_registry(&a.registry)?;
    let model = MetaModel::load(&a.model)?;
    let scored: Vec<_> = model.scored(&records).into_iter().cloned().collect();
    if scored.is_empty() {
        return config_err("none of the model's held-out runs are in the registry");
    }
    if model.held_out_ids.is_empty() {
        log::warn!("model has no held-out runs; scoring every record in-sample");
    }
    let report = forest_eval(&model.forest, &scored)?;
    let path = cli.out_dir.join("meta_eval.json");
    ensure_parent(&path)?;
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    println!(
        "{} runs: spearman {}, pearson {}, mae {:.4}; wrote {}",
        report.n,
        fmt(report.spearman),
        fmt(report.pearson),
        report.mae,
        path.display()
    );
    Ok(())
}

fn export_cmd(cli: &Cli, a: &ExportArgs) -> CliResult<()> {
    let kind: ExportKind = a.kind.parse()?;
    if kind == ExportKind::Pred && a.model.is_none() {
        return Err(CliError::Usage("predicted-vs-actual export needs --model".into()));
    }
    let records = read_registry(&a.registry)?;
    let model = a.model.as_deref().map(MetaModel::load).transpose()?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let path = export(&records, kind, model.as_ref(), &cli.out_dir)?;
    println!("wrote {}", path.display());
    Ok(())
}
