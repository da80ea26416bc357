use std::path::Path;

use serde_json::{json, Value};

use crate::checkpoint::{Checkpoint, CheckpointKind};
use crate::cli::verify::default_suite;
use crate::cli::{resolve_config, CheckpointArgs, Common, CountArgs, Outcome, RunConfig, SweepArgs, TrainArgs};
use crate::compress::{
    apply_plan, finetune, gsvt, isvt, lsvt, retained_sv_fraction, Decomposition, IsvtOptions, IsvtStart, RankRule,
    Scheme,
};
use crate::data::{subsample, Dataset};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::metrics::{
    count_flops, count_params, evaluate, resnet20, spectrum_report, sweep_curve, vgg16, write_curve_csv, ArchDescriptor,
};
use crate::nn::Mlp;
use crate::optim::{evaluate_dataset, train_select, train_with, EpochMetrics};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn check_dims(cfg: &RunConfig, ds: &Dataset) -> Result<()> {
    let dims = &cfg.model.dims;
    if dims[0] != ds.dim() || *dims.last().unwrap() < ds.num_classes() {
        return Err(Error::Config(format!(
            "model.dims {dims:?} does not fit data with {} features and {} classes",
            ds.dim(),
            ds.num_classes()
        )));
    }
    Ok(())
}

fn metrics_csv(history: &[EpochMetrics], val: &[f64]) -> Result<Vec<u8>> {
    let layers = history.first().map_or(0, |m| m.collapsed_norms.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "epoch",
        "mean_batch_loss",
        "penalty",
        "objective",
        "train_accuracy",
        "val_accuracy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..layers).map(|l| format!("norm_{l}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (i, m) in history.iter().enumerate() {
        let mut row = vec![
            m.epoch.to_string(),
            m.mean_batch_loss.to_string(),
            m.penalty.to_string(),
            opt(m.objective),
            opt(m.train_accuracy),
            opt(val.get(i).copied()),
        ];
        row.extend(m.collapsed_norms.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

pub fn train(a: &TrainArgs) -> Result<Outcome> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.train.lr = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.train.weight_decay = v;
    }
    cfg.validate()?;
    let (train_all, test) = cfg.load_data()?;
    check_dims(&cfg, &train_all)?;
    let tc = cfg.train_config();
    let model = Mlp::init(&cfg.model.dims, cfg.model.n_factors, cfg.seed)?;

    let (model, history, val_acc, best_epoch) = if cfg.train.validation > 0 {
        if cfg.train.validation >= train_all.len() {
            return Err(Error::Config(format!(
                "validation split {} leaves no training data out of {}",
                cfg.train.validation,
                train_all.len()
            )));
        }
        let (fit, val) = train_all.validation_split(cfg.train.validation)?;
        let sel = train_select(model, &fit, &val, &tc)?;
        (sel.model, sel.report.epochs, sel.val_accuracy, sel.best_epoch)
    } else {
        let mut model = model;
        let report = train_with(&mut model, &train_all, &tc, |_, _| {
            Ok(std::ops::ControlFlow::Continue(()))
        })?;
        let last = report.epochs.len() - 1;
        (model, report.epochs, Vec::new(), last)
    };
    let test_eval = evaluate_dataset(&model, &test)?;

    ensure_dir(&cfg.out)?;
    write_atomic(&cfg.out.join("train_metrics.csv"), &metrics_csv(&history, &val_acc)?)?;
    let ckpt = Checkpoint::factorized(model, cfg.seed)
        .with_metadata(
            "config",
            serde_json::to_value(&cfg).map_err(|e| Error::Config(e.to_string()))?,
        )
        .with_metadata("best_epoch", json!(best_epoch))
        .with_metadata("test_accuracy", json!(test_eval.accuracy))
        .with_metadata("test_loss", json!(test_eval.loss));
    let path = cfg.out.join("model.ckpt");
    ckpt.save(&path)?;
    println!(
        "trained N={} for {} epochs; kept epoch {}; test accuracy {:.4}, loss {:.4}",
        cfg.model.n_factors,
        history.len(),
        best_epoch + 1,
        test_eval.accuracy,
        test_eval.loss
    );
    println!("wrote {}", path.display());
    Ok(Outcome::Success)
}

fn load_trained(path: &Path) -> Result<Mlp> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.kind == CheckpointKind::Compressed {
        return Err(Error::InvalidArgument(format!(
            "{} is already compressed; pass the trained checkpoint",
            path.display()
        )));
    }
    Ok(ckpt.into_model())
}

pub fn compress(a: &CheckpointArgs) -> Result<Outcome> {
    let cfg = resolve_config(&a.common)?;
    let model = load_trained(&a.checkpoint)?;
    let (train_ds, test) = cfg.load_data()?;
    let dec = Decomposition::of(&model)?;
    let c = &cfg.compress;
    let plan = match c.scheme {
        Scheme::Lsvt => lsvt(&dec, c.rank.map_or(RankRule::Fraction(c.keep), RankRule::Rank))?,
        Scheme::Gsvt => gsvt(&dec, c.keep)?,
        Scheme::Isvt => {
            let dense: usize = dec.shapes().iter().map(|(m, n)| m * n).sum();
            let target = c.target_params.unwrap_or((c.keep * dense as f64).ceil() as usize);
            let probe = subsample(&train_ds, c.probe.min(train_ds.len()), cfg.seed)?;
            let opts = IsvtOptions {
                step_params: c.step,
                target_params: target,
                start: c.warm_start.map_or(IsvtStart::Full, IsvtStart::Gsvt),
            };
            let out = isvt(&dec, &probe, &opts)?;
            if !out.reached_target {
                log::warn!("every layer reached rank 1 before the {target}-parameter target");
            }
            out.plan
        }
    };
    let truncated = apply_plan(&dec, &plan)?;
    let acc_before = evaluate(&model, &test)?;
    let acc_truncated = evaluate(&truncated, &test)?;
    let (tuned, _) = finetune(&truncated, &train_ds, &cfg.finetune_config())?;
    let acc_after = evaluate(&tuned, &test)?;

    let dense_arch = ArchDescriptor::from_mlp(&model);
    let comp_arch = ArchDescriptor::from_compressed(&tuned);
    let summary = json!({
        "scheme": c.scheme.to_string(),
        "ranks": plan.ranks(),
        "retained_fraction": retained_sv_fraction(&plan, &dec)?,
        "params_before": count_params(&dense_arch),
        "params_after": tuned.deployed_params(),
        "flops_before": count_flops(&dense_arch),
        "flops_after": count_flops(&comp_arch),
        "accuracy_before": acc_before,
        "accuracy_truncated": acc_truncated,
        "accuracy_after": acc_after,
        "finetune_epochs": c.finetune_epochs,
    });
    ensure_dir(&cfg.out)?;
    let seed = cfg.seed;
    Checkpoint::compressed(tuned, seed)
        .with_metadata("summary", summary.clone())
        .save(&cfg.out.join("compressed.ckpt"))?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Checkpoint(e.to_string()))?;
    write_atomic(&cfg.out.join("compress_summary.json"), text.as_bytes())?;
    print_summary(&summary);
    Ok(Outcome::Success)
}

fn print_summary(s: &Value) {
    println!("scheme            {}", s["scheme"].as_str().unwrap_or_default());
    println!("ranks             {}", s["ranks"]);
    println!(
        "retained fraction {:.4}",
        s["retained_fraction"].as_f64().unwrap_or(f64::NAN)
    );
    println!("params            {} -> {}", s["params_before"], s["params_after"]);
    println!("flops             {} -> {}", s["flops_before"], s["flops_after"]);
    let acc = |k: &str| s[k].as_f64().unwrap_or(f64::NAN);
    println!(
        "accuracy          {:.4} -> {:.4} (truncated) -> {:.4} (after {} fine-tune epochs)",
        acc("accuracy_before"),
        acc("accuracy_truncated"),
        acc("accuracy_after"),
        s["finetune_epochs"]
    );
}

pub fn eval(a: &CheckpointArgs) -> Result<Outcome> {
    let cfg = resolve_config(&a.common)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let (_, test) = cfg.load_data()?;
    let e = evaluate_dataset(ckpt.model(), &test)?;
    let arch = match ckpt.kind {
        CheckpointKind::Compressed => ArchDescriptor::from_compressed(&ckpt.compressed_model()?),
        _ => ArchDescriptor::from_mlp(ckpt.model()),
    };
    println!("kind       {:?}", ckpt.kind);
    println!("accuracy   {:.4}", e.accuracy);
    println!("loss       {:.6}", e.loss);
    println!("params     {}", count_params(&arch));
    println!("flops      {}", count_flops(&arch));
    Ok(Outcome::Success)
}

pub fn sweep(a: &SweepArgs) -> Result<Outcome> {
    let cfg = resolve_config(&a.common)?;
    let model = load_trained(&a.checkpoint)?;
    let (_, test) = cfg.load_data()?;
    let fractions = a.fractions.clone().unwrap_or_else(|| cfg.sweep.fractions.clone());
    let points = sweep_curve(&model, &test, cfg.compress.scheme, &fractions)?;
    let mut buf = Vec::new();
    write_curve_csv(&points, &mut buf)?;
    ensure_dir(&cfg.out)?;
    write_atomic(&cfg.out.join(format!("sweep_{}.csv", cfg.compress.scheme)), &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(Outcome::Success)
}

pub fn spectrum(a: &CheckpointArgs) -> Result<Outcome> {
    let cfg = resolve_config(&a.common)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let model = match ckpt.kind {
        CheckpointKind::Compressed => ckpt.compressed_model()?.as_mlp().collapsed(),
        _ => ckpt.into_model(),
    };
    let mut buf = Vec::new();
    spectrum_report(&model)?.write_csv(&mut buf)?;
    ensure_dir(&cfg.out)?;
    write_atomic(&cfg.out.join("spectrum.csv"), &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(Outcome::Success)
}

pub fn verify(c: &Common) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let checks = default_suite(cfg.seed)?;
    for check in &checks {
        println!("{check}");
    }
    if checks.iter().all(|c| c.pass) {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::VerificationFailed)
    }
}

pub fn count(a: &CountArgs) -> Result<Outcome> {
    let cfg = resolve_config(&a.common)?;
    let arch = match (&a.arch, &a.checkpoint) {
        (_, Some(path)) => {
            let ckpt = Checkpoint::load(path)?;
            match ckpt.kind {
                CheckpointKind::Compressed => ArchDescriptor::from_compressed(&ckpt.compressed_model()?),
                _ => ArchDescriptor::from_mlp(ckpt.model()),
            }
        }
        (Some(name), None) => match name.as_str() {
            "resnet20" => resnet20(),
            "vgg16" => vgg16(),
            "mlp" => {
                let dims = &cfg.model.dims;
                let layers = dims
                    .windows(2)
                    .map(|w| crate::metrics::ArchLayer::Dense { m: w[1], n: w[0] })
                    .collect();
                ArchDescriptor::sequential("mlp", layers)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown architecture {other:?} (expected resnet20, vgg16 or mlp)"
                )))
            }
        },
        (None, None) => return Err(Error::InvalidArgument("pass --arch or --checkpoint".into())),
    };
    let params = count_params(&arch);
    let flops = count_flops(&arch);
    println!(
        "{}: params {} ({:.2}M), flops {} ({:.2}M)",
        arch.name(),
        params,
        params as f64 / 1e6,
        flops,
        flops as f64 / 1e6
    );
    Ok(Outcome::Success)
}
