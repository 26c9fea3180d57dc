//! Command-line front end: train a codec, push images through it, and run
//! the diagnostics, with stable exit codes per failure class (0 success,
//! 1 runtime, 2 usage, 3 malformed input, 4 model mismatch, 5 divergence).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis;
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::model::{decode_image, encode_image, ModelConfig, ModelParams};
use crate::netpbm;
use crate::training::{self, TrainConfig};

#[derive(Parser)]
#[command(
    name = "auxt",
    about = "Transform-coding image codec with a wavelet shortcut branch",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model on a directory of images and save a checkpoint.
    Train {
        /// JSON file with training options (missing keys take defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one option, e.g. --set lambda_rd=0.013 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Directory of .pgm/.ppm training images.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint file to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV training log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compress one image into a bitstream.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decompress a bitstream back into an image.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compress and reconstruct a directory, reporting bpp and PSNR per image.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write the CSV report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write energy, branch, similarity, and per-image reports for a model.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory that receives the report files.
        #[arg(long)]
        out: PathBuf,
        /// Training log (from train --log) to turn into evolution.csv.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// BD-rate of a test RD curve against a reference curve.
    Bdrate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
}

/// Parse `args` (argv[0] included) and run. All output goes to `out`; the
/// return value is the process exit code.
pub fn run(args: &[String], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            // --help / --version are successful exits, bad args are not
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Cmd::Train {
            config,
            set,
            data,
            out: ckpt,
            log,
        } => cmd_train(config.as_deref(), &set, &data, &ckpt, log.as_deref(), out),
        Cmd::Encode {
            model,
            input,
            output,
        } => cmd_encode(&model, &input, &output, out),
        Cmd::Decode {
            model,
            input,
            output,
        } => cmd_decode(&model, &input, &output, out),
        Cmd::Eval { model, data, out: csv } => cmd_eval(&model, &data, csv.as_deref(), out),
        Cmd::Analyze {
            model,
            data,
            out: dir,
            log,
        } => cmd_analyze(&model, &data, &dir, log.as_deref(), out),
        Cmd::Bdrate { reference, test } => cmd_bdrate(&reference, &test, out),
    }
}

/// Load a checkpoint and recover the training config it was saved with.
fn load_model(path: &Path) -> Result<(TrainConfig, ModelConfig, ModelParams)> {
    let ck = checkpoint::load(path)?;
    let tcfg: TrainConfig = serde_json::from_str(&ck.config_json)
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let mcfg = tcfg.to_model_config();
    checkpoint::check_shapes(&ck.params, &mcfg)?;
    Ok((tcfg, mcfg, ck.params))
}

fn config_json(cfg: &TrainConfig) -> Result<String> {
    serde_json::to_string(cfg).map_err(|e| Error::Config(format!("config serialize: {e}")))
}

fn cmd_train(
    config: Option<&Path>,
    sets: &[String],
    data: &Path,
    ckpt: &Path,
    log: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let file_json = config.map(fs::read_to_string).transpose()?;
    let cfg = training::resolve_config(file_json.as_deref(), sets)?;
    writeln!(out, "config: {}", config_json(&cfg)?)?;
    writeln!(out, "seed: {}", cfg.seed)?;

    let images = training::load_corpus(data, cfg.channels)?;
    writeln!(out, "loaded {} training images from {}", images.len(), data.display())?;

    let result = training::train(&cfg, &images, &[])?;
    checkpoint::save(ckpt, &config_json(&cfg)?, &result.params)?;
    if let Some(path) = log {
        fs::write(path, training::log_to_csv(&result.log))?;
    }
    if let Some((iteration, what)) = result.diverged {
        writeln!(
            out,
            "wrote last finite checkpoint to {} before divergence",
            ckpt.display()
        )?;
        return Err(Error::Diverged { iteration, what });
    }
    if let Some(row) = result.log.last() {
        writeln!(
            out,
            "final: iter {} bpp {:.4} mse {:.6} rd_loss {:.4}",
            row.iter, row.bpp, row.mse, row.rd_loss
        )?;
    }
    writeln!(out, "wrote checkpoint to {}", ckpt.display())?;
    Ok(())
}

fn cmd_encode(model: &Path, input: &Path, output: &Path, out: &mut dyn Write) -> Result<()> {
    let (_, mcfg, params) = load_model(model)?;
    let img = netpbm::load_image(input)?;
    if img.c() != mcfg.channels {
        return Err(Error::Format(format!(
            "{}: image has {} channels, model expects {}",
            input.display(),
            img.c(),
            mcfg.channels
        )));
    }
    let (bytes, stats) = encode_image(&params, &mcfg, &img)?;
    fs::write(output, &bytes)?;
    writeln!(
        out,
        "wrote {} bytes ({} payload) to {}",
        stats.total_bytes,
        stats.payload_bytes,
        output.display()
    )?;
    writeln!(out, "payload_bpp: {:.6}", stats.payload_bpp())?;
    Ok(())
}

fn cmd_decode(model: &Path, input: &Path, output: &Path, out: &mut dyn Write) -> Result<()> {
    let (_, mcfg, params) = load_model(model)?;
    let bytes = fs::read(input)?;
    let img = decode_image(&params, &mcfg, &bytes)?;
    netpbm::save_image(output, &img)?;
    writeln!(
        out,
        "wrote {}x{} image to {}",
        img.w(),
        img.h(),
        output.display()
    )?;
    Ok(())
}

fn cmd_eval(model: &Path, data: &Path, csv: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (_, mcfg, params) = load_model(model)?;
    let images = training::load_corpus(data, mcfg.channels)?;
    let rows = analysis::eval_images(&params, &mcfg, &images)?;
    let body = analysis::perimage_csv(&rows);
    write!(out, "{body}")?;
    if let Some(path) = csv {
        fs::write(path, &body)?;
    }
    Ok(())
}

fn cmd_analyze(
    model: &Path,
    data: &Path,
    dir: &Path,
    log: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let (tcfg, mcfg, params) = load_model(model)?;
    let images = training::load_corpus(data, mcfg.channels)?;
    fs::create_dir_all(dir)?;

    let energy = analysis::latent_energy_report(&params, &mcfg, &images)?;
    fs::write(dir.join("energies.csv"), analysis::energies_csv(&energy))?;
    fs::write(dir.join("groups.csv"), analysis::groups_csv(&energy))?;

    let branch = analysis::branch_energy(&params, &mcfg, &images)?;
    fs::write(dir.join("branch.csv"), analysis::branch_csv(&branch))?;

    let similarity = match analysis::effective_operator(&params, &mcfg) {
        Ok(op) => {
            let h = analysis::pairwise_similarity(&op.matrix);
            fs::write(dir.join("similarity.csv"), analysis::similarity_csv(&h))?;
            Some(h)
        }
        Err(e) => {
            writeln!(out, "skipping similarity.csv: {e}")?;
            None
        }
    };

    let rows = analysis::eval_images(&params, &mcfg, &images)?;
    fs::write(dir.join("perimage.csv"), analysis::perimage_csv(&rows))?;

    if let Some(path) = log {
        let body = fs::read_to_string(path)?;
        let parsed = training::parse_log_csv(&body)?;
        fs::write(dir.join("evolution.csv"), analysis::evolution_csv(&parsed))?;
    }

    let n = rows.len() as f64;
    let mean_bpp = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let mean_psnr = rows.iter().map(|r| r.2).sum::<f64>() / n;
    let mut summary = String::new();
    summary.push_str(&format!("images: {}\n", rows.len()));
    summary.push_str(&format!("latent channels: {}\n", mcfg.latent_channels()));
    summary.push_str(&format!("lambda_rd: {}\n", tcfg.lambda_rd));
    summary.push_str(&format!(
        "top 10% channel energy share: {:.4}\n",
        energy.top_fraction_ratio(0.1)
    ));
    summary.push_str(&format!(
        "branch energy aux/main/cross of latent: {:.4}/{:.4}/{:.4}\n",
        branch.aux / branch.latent.max(1e-300),
        branch.main / branch.latent.max(1e-300),
        branch.cross / branch.latent.max(1e-300),
    ));
    match &similarity {
        Some(h) => summary.push_str(&format!(
            "mean |cos| between operator rows: {:.4} over {} pairs\n",
            h.mean_abs_cos, h.pairs
        )),
        None => summary.push_str("operator similarity: unavailable (nonlinear model)\n"),
    }
    summary.push_str(&format!(
        "mean file bpp: {mean_bpp:.4}\nmean psnr_db: {mean_psnr:.4}\n"
    ));
    fs::write(dir.join("summary.txt"), &summary)?;
    write!(out, "{summary}")?;
    writeln!(out, "reports written to {}", dir.display())?;
    Ok(())
}

fn cmd_bdrate(reference: &Path, test: &Path, out: &mut dyn Write) -> Result<()> {
    let parse = |p: &Path| -> Result<Vec<(f64, f64)>> {
        analysis::parse_rd_csv(&fs::read_to_string(p)?)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))
    };
    let pct = analysis::bd_rate_percent(&parse(reference)?, &parse(test)?)?;
    writeln!(out, "{}", analysis::format_bd(pct))?;
    Ok(())
}
