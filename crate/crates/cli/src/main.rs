//! Command-line front door for the full pipeline: kernel synthesis and
//! inspection, synthetic corpus generation, feature extraction, training,
//! evaluation, prediction and the built-in verification suites.

mod commands;
mod pipeline;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "strfsed",
    version,
    about = "Auditory-model sound event detection: STRF kernels, dynamic convolution, CRNN training and threshold-optimal F1 evaluation"
)]
struct Cli {
    /// Seed driving every random choice (weights, folds, corpus).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize STRF kernels, dump CSV/PGM images and verify their
    /// modulation peaks.
    Kernels {
        /// Output directory for kernel dumps and the bank manifest.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated scales in cycles/octave (default: the 8-point
        /// init grid).
        #[arg(long)]
        scales: Option<String>,
        /// Comma-separated rates in Hz (default: the 4-point init grid).
        #[arg(long)]
        rates: Option<String>,
        /// Kernel grid as TIMExFREQ taps, e.g. 50x48.
        #[arg(long, default_value = "50x48")]
        axes: String,
    },
    /// Generate the synthetic ripple-event corpus.
    SynthData {
        /// Output directory (feature blobs, labels.csv, corpus.json).
        #[arg(long)]
        out: PathBuf,
        /// Clip count.
        #[arg(long, default_value_t = 60)]
        clips: usize,
        /// Clip length in seconds.
        #[arg(long, default_value_t = 30.0)]
        seconds: f64,
        /// Event count bounds per clip.
        #[arg(long, default_value_t = 3)]
        events_min: usize,
        #[arg(long, default_value_t = 6)]
        events_max: usize,
        /// Event-to-background energy ratio in dB.
        #[arg(long, default_value_t = 6.0)]
        snr_db: f64,
        /// Full spec as JSON; overrides the flags above.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Extract mel-spectrogram feature blobs from WAV files.
    Features {
        /// A WAV file or a directory of WAV files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for feature blobs.
        #[arg(long)]
        out: PathBuf,
        /// Window length in samples.
        #[arg(long, default_value_t = 17640)]
        n_fft: usize,
        /// Hop length in samples.
        #[arg(long, default_value_t = 8820)]
        hop: usize,
        /// Mel bin count.
        #[arg(long, default_value_t = 64)]
        n_mels: usize,
        /// Use dB compression instead of log1p.
        #[arg(long, default_value_t = false)]
        db: bool,
    },
    /// Train a model on a corpus, holding one fold out.
    Train {
        /// Architecture name (see the error message for the list).
        #[arg(long)]
        model: String,
        /// Corpus directory (as written by synth-data).
        #[arg(long)]
        data: PathBuf,
        /// Held-out fold index.
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Fold count.
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Checkpoint stem; writes STEM.json/STEM.bin plus STEM.log.jsonl.
        #[arg(long, default_value = "model")]
        out: PathBuf,
        /// Model config JSON (overrides the preset).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training config JSON (epochs, batch size, optimizer, seed).
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Width preset when no config file is given: toy or paper.
        #[arg(long, default_value = "toy")]
        preset: String,
        /// Training epochs (preset default when omitted).
        #[arg(long)]
        epochs: Option<usize>,
        /// Minibatch size (preset default when omitted).
        #[arg(long)]
        batch_size: Option<usize>,
        /// Adam learning rate (preset default when omitted).
        #[arg(long)]
        lr: Option<f64>,
        /// Evaluate held-out F1 every N epochs (0 = final epoch only).
        #[arg(long, default_value_t = 5)]
        eval_every: usize,
    },
    /// Evaluate a checkpoint on a held-out fold.
    Eval {
        /// Checkpoint stem (as written by train).
        #[arg(long)]
        ckpt: PathBuf,
        /// Corpus directory.
        #[arg(long)]
        data: PathBuf,
        /// Held-out fold index to evaluate.
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Fold count.
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Report JSON path (default: <ckpt>.eval.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one feature blob and write per-segment class scores.
    Predict {
        /// Checkpoint stem.
        #[arg(long)]
        ckpt: PathBuf,
        /// Feature blob stem (scored clip).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV (segment,class,score).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the fast self-check suites.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed;
    let result = match cli.command {
        Command::Kernels {
            out,
            scales,
            rates,
            axes,
        } => commands::kernels(&out, scales.as_deref(), rates.as_deref(), &axes),
        Command::SynthData {
            out,
            clips,
            seconds,
            events_min,
            events_max,
            snr_db,
            spec,
        } => commands::synth_data(
            &out,
            clips,
            seconds,
            events_min,
            events_max,
            snr_db,
            spec.as_deref(),
            seed,
        ),
        Command::Features {
            input,
            out,
            n_fft,
            hop,
            n_mels,
            db,
        } => commands::features(&input, &out, n_fft, hop, n_mels, db),
        Command::Train {
            model,
            data,
            fold,
            folds,
            out,
            config,
            train_config,
            preset,
            epochs,
            batch_size,
            lr,
            eval_every,
        } => commands::train(commands::TrainArgs {
            model,
            data,
            fold,
            folds,
            out,
            config,
            train_config,
            preset,
            epochs,
            batch_size,
            lr,
            eval_every,
            seed,
        }),
        Command::Eval {
            ckpt,
            data,
            fold,
            folds,
            out,
        } => commands::eval(&ckpt, &data, fold, folds, out.as_deref(), seed),
        Command::Predict { ckpt, input, out } => commands::predict(&ckpt, &input, &out),
        Command::Verify => commands::verify(),
    };
    match result {
        Ok(code) => code,
        Err(strfsed::Error::UnknownArchitecture { name, valid }) => {
            eprintln!("error: unknown model '{name}'; valid models: {valid}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
