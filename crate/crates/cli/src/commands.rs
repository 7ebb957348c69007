//! Implementations of the CLI subcommands.

use crate::pipeline;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use strfsed::data::{generate_corpus, load_corpus, write_corpus, SynthSpec};
use strfsed::eval::{default_threshold_grid, f1_mo, rasterize_predictions};
use strfsed::models::{
    load_checkpoint, save_checkpoint, train as train_model, Architecture, ModelConfig, ModelGraph,
    ScalePreset, TrainConfig,
};
use strfsed::signal::{load_wav, melspectrogram, read_feature_blob, write_feature_blob, Compression, MelConfig};
use strfsed::strf::{
    build_bank, modulation_peak, write_bank_manifest, write_kernel_csv, write_kernel_pgm,
    Direction, KernelAxes, ScaleRateParam,
};
use strfsed::{Error, Result};

pub fn kernels(
    out: &Path,
    scales: Option<&str>,
    rates: Option<&str>,
    axes_arg: &str,
) -> Result<ExitCode> {
    let axes = parse_axes(axes_arg)?;
    let default_grid = strfsed::strf::default_init_params();
    let scales = match scales {
        Some(list) => parse_positive_list(list, "scale")?,
        None => dedup_sorted(default_grid.iter().map(|p| p.scale())),
    };
    let rates = match rates {
        Some(list) => parse_positive_list(list, "rate")?,
        None => dedup_sorted(default_grid.iter().map(|p| p.rate())),
    };

    let mut params = Vec::new();
    for &s in &scales {
        for &r in &rates {
            params.push(ScaleRateParam::new(s, r, Direction::Down));
        }
    }
    let bank = build_bank(&params, &axes)?;
    std::fs::create_dir_all(out)?;

    let rate_bin = 1.0 / (axes.n_t as f64 * axes.time_step_s);
    let scale_bin = 1.0 / (axes.n_f as f64 * axes.freq_step_oct);
    println!(
        "{:<6} {:>8} {:>8} {:>5}  {:>10} {:>10}  {}",
        "index", "scale", "rate", "dir", "peak_scale", "peak_rate", "check"
    );
    let mut all_ok = true;
    for (i, kernel) in bank.kernels.iter().enumerate() {
        let stem = format!("kernel_{i:02}_{}", kernel.param.direction);
        write_kernel_csv(kernel, &out.join(format!("{stem}.csv")))?;
        write_kernel_pgm(kernel, &out.join(format!("{stem}.pgm")))?;
        let peak = modulation_peak(
            &kernel.values,
            axes.n_t,
            axes.n_f,
            axes.time_step_s,
            axes.freq_step_oct,
        )?;
        let ok = (peak.rate_hz - kernel.param.rate()).abs() <= rate_bin
            && (peak.scale_cyc_per_oct - kernel.param.scale()).abs() <= scale_bin
            && peak.direction == kernel.param.direction;
        all_ok &= ok;
        println!(
            "{:<6} {:>8.3} {:>8.3} {:>5}  {:>10.3} {:>10.3}  {}",
            i,
            kernel.param.scale(),
            kernel.param.rate(),
            kernel.param.direction,
            peak.scale_cyc_per_oct,
            peak.rate_hz,
            if ok { "ok" } else { "OFF" }
        );
    }
    write_bank_manifest(&bank, &out.join("bank_manifest.json"))?;
    println!(
        "wrote {} kernels to {} (manifest bank_manifest.json)",
        bank.kernels.len(),
        out.display()
    );
    if all_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::InvalidConfig(
            "one or more kernels missed their modulation peak".into(),
        ))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn synth_data(
    out: &Path,
    clips: usize,
    seconds: f64,
    events_min: usize,
    events_max: usize,
    snr_db: f64,
    spec_path: Option<&Path>,
    seed: u64,
) -> Result<ExitCode> {
    let spec = match spec_path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SynthSpec {
            n_clips: clips,
            clip_seconds: seconds,
            events_min,
            events_max,
            snr_db,
            seed,
            ..SynthSpec::default()
        },
    };
    let corpus = generate_corpus(&spec)?;
    write_corpus(&corpus, out)?;
    let n_events: usize = corpus.clips.iter().map(|c| c.events.len()).sum();
    println!(
        "wrote {} clips ({} frames x {} mels), {} events, classes [{}] to {}",
        corpus.clips.len(),
        spec.n_frames(),
        spec.n_mels,
        n_events,
        corpus.classes.join(", "),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn features(
    input: &Path,
    out: &Path,
    n_fft: usize,
    hop: usize,
    n_mels: usize,
    db: bool,
) -> Result<ExitCode> {
    let mut wavs: Vec<PathBuf> = Vec::new();
    if input.is_dir() {
        for entry in std::fs::read_dir(input)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                wavs.push(path);
            }
        }
        wavs.sort();
    } else {
        wavs.push(input.to_path_buf());
    }
    if wavs.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no WAV files under {}",
            input.display()
        )));
    }
    std::fs::create_dir_all(out)?;
    for wav_path in &wavs {
        let wave = load_wav(wav_path)?;
        let cfg = MelConfig {
            n_fft,
            hop,
            n_mels,
            fmin_hz: 0.0,
            fmax_hz: wave.sample_rate_hz as f64 / 2.0,
            compression: if db { Compression::Db } else { Compression::Log1p },
        };
        let mel = melspectrogram(&wave, &cfg)?;
        let stem = out.join(
            wav_path
                .file_stem()
                .ok_or_else(|| Error::InvalidConfig("input has no file name".into()))?,
        );
        write_feature_blob(&stem, &mel.values, mel.frame_period_s)?;
        println!(
            "{} -> {} frames x {} mels (frame period {:.3} s)",
            wav_path.display(),
            mel.n_frames(),
            mel.n_mels(),
            mel.frame_period_s
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub struct TrainArgs {
    pub model: String,
    pub data: PathBuf,
    pub fold: usize,
    pub folds: usize,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub train_config: Option<PathBuf>,
    pub preset: String,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub eval_every: usize,
    pub seed: u64,
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let arch = Architecture::from_str(&args.model)?;
    let corpus = load_corpus(&args.data)?;
    if args.fold >= args.folds {
        return Err(Error::InvalidConfig(format!(
            "fold {} out of range for {} folds",
            args.fold, args.folds
        )));
    }

    let preset = parse_preset(&args.preset)?;
    let mut model_cfg = match &args.config {
        Some(p) => serde_json::from_str::<ModelConfig>(&std::fs::read_to_string(p)?)?,
        None => {
            let mut cfg = ModelConfig::preset(preset, arch, corpus.classes.len());
            cfg.n_mels = corpus.spec.n_mels;
            cfg.seed = args.seed;
            cfg
        }
    };
    if model_cfg.architecture != arch {
        model_cfg.architecture = arch;
    }

    let mut train_cfg = match &args.train_config {
        Some(p) => serde_json::from_str::<TrainConfig>(&std::fs::read_to_string(p)?)?,
        None => {
            let mut tc = match preset {
                ScalePreset::Paper => TrainConfig::paper(),
                ScalePreset::Toy => TrainConfig::toy(),
            };
            tc.seed = args.seed;
            tc
        }
    };
    if let Some(e) = args.epochs {
        train_cfg.epochs = e;
    }
    if let Some(b) = args.batch_size {
        train_cfg.batch_size = b;
    }
    if let Some(lr) = args.lr {
        train_cfg.adam.lr = lr;
    }

    let (train_idx, eval_idx) = pipeline::split_corpus(&corpus, args.folds, args.fold, args.seed)?;
    if train_idx.is_empty() || eval_idx.is_empty() {
        return Err(Error::InvalidConfig("degenerate fold split".into()));
    }
    let items = pipeline::train_items(&corpus, &train_idx, &model_cfg)?;

    println!(
        "training {} ({} params) on {} clips, holding out fold {} ({} clips)",
        arch,
        ModelGraph::build(&model_cfg)?.param_count(),
        items.len(),
        args.fold,
        eval_idx.len()
    );

    let mut model = ModelGraph::build(&model_cfg)?;
    let log_path = args.out.with_extension("log.jsonl");
    let mut log = std::fs::File::create(&log_path)?;
    let epochs = train_cfg.epochs;
    let eval_every = args.eval_every;
    let corpus_ref = &corpus;
    let eval_ref = &eval_idx;
    let trace = train_model(&mut model, &items, &train_cfg, |epoch, loss, m| {
        let last = epoch + 1 == epochs;
        let val = if (eval_every > 0 && (epoch + 1) % eval_every == 0) || last {
            Some(pipeline::heldout_macro_f1(m, corpus_ref, eval_ref)?)
        } else {
            None
        };
        let line = serde_json::json!({
            "epoch": epoch,
            "train_loss": loss,
            "val_macro_f1": val,
        });
        writeln!(log, "{line}").map_err(Error::Io)?;
        match val {
            Some(f1) => println!("epoch {epoch:>3}: loss {loss:.6}, heldout F1 {f1:.4}"),
            None => println!("epoch {epoch:>3}: loss {loss:.6}"),
        }
        Ok(())
    })?;

    save_checkpoint(&mut model, &args.out)?;
    println!(
        "final loss {:.6}; checkpoint {}.json/.bin, log {}",
        trace.last().unwrap(),
        args.out.display(),
        log_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn eval(
    ckpt: &Path,
    data: &Path,
    fold: usize,
    folds: usize,
    out: Option<&Path>,
    seed: u64,
) -> Result<ExitCode> {
    let mut model = load_checkpoint(ckpt)?;
    let corpus = load_corpus(data)?;
    if model.config.n_classes != corpus.classes.len() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has {} classes, corpus has {}",
            model.config.n_classes,
            corpus.classes.len()
        )));
    }
    let (_, eval_idx) = pipeline::split_corpus(&corpus, folds, fold, seed)?;
    let (preds, refs) = pipeline::segment_pairs(&mut model, &corpus, &eval_idx)?;
    let report = f1_mo(&preds, &refs, &corpus.classes, &default_threshold_grid())?;
    print!("{}", report.to_table_string());
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ckpt.with_extension(format!("eval-fold{fold}.json")));
    std::fs::write(&out_path, serde_json::to_string_pretty(&report)?)?;
    println!("report written to {}", out_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn predict(ckpt: &Path, input: &Path, out: &Path) -> Result<ExitCode> {
    let mut model = load_checkpoint(ckpt)?;
    let (features, blob) = read_feature_blob(input)?;
    let probs = pipeline::predict_clip(&mut model, &features)?;
    let out_frames = probs.shape()[0];
    let out_period = blob.frame_period_s * blob.n_frames as f64 / out_frames as f64;
    let segments = rasterize_predictions(&probs, out_period, pipeline::SEGMENT_LENGTH_S)?;

    let mut csv = String::from("segment,class,score\n");
    for s in 0..segments.n_segments() {
        for c in 0..segments.n_classes() {
            csv.push_str(&format!("{s},{c},{:.6}\n", segments.scores.at2(s, c)));
        }
    }
    std::fs::write(out, csv)?;
    println!(
        "wrote {} segment scores ({} segments x {} classes) to {}",
        segments.n_segments() * segments.n_classes(),
        segments.n_segments(),
        segments.n_classes(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn verify() -> Result<ExitCode> {
    let fault = std::env::var("STRFSED_VERIFY_FAULT")
        .ok()
        .as_deref()
        .and_then(strfsed::verify::Fault::parse);
    let results = strfsed::verify::run_all(fault);
    let mut failed = false;
    for r in &results {
        println!(
            "suite {:<20} {}  ({})",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        failed |= !r.passed;
    }
    if failed {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn parse_axes(s: &str) -> Result<KernelAxes> {
    let (t, f) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidConfig(format!("axes '{s}' not in TIMExFREQ form")))?;
    let n_t: usize = t
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad time taps '{t}'")))?;
    let n_f: usize = f
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad frequency taps '{f}'")))?;
    let axes = KernelAxes {
        n_t,
        n_f,
        ..KernelAxes::default()
    };
    axes.validate()?;
    Ok(axes)
}

fn parse_positive_list(list: &str, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in list.split([',', ' ']).filter(|t| !t.is_empty()) {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad {what} '{tok}'")))?;
        if !(v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{what} {v} must be positive"
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("empty {what} list")));
    }
    Ok(out)
}

fn parse_preset(s: &str) -> Result<ScalePreset> {
    match s {
        "toy" => Ok(ScalePreset::Toy),
        "paper" => Ok(ScalePreset::Paper),
        other => Err(Error::InvalidConfig(format!(
            "unknown preset '{other}' (toy, paper)"
        ))),
    }
}

fn dedup_sorted(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = vals.collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}
