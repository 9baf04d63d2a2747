//! Command-line front end.
//!
//! Every command writes `run.json` (arguments, seed, crate version) next to
//! its outputs. Errors map to exit codes 2 (invalid input), 3 (numeric) and
//! 4 (I/O).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dfe::{save_with_history, AdamaxConfig, CaeConfig, DfeEncoder, TrainOptions, TrainState};
use crate::error::{Error, Result};
use crate::evalstat::{
    calibrate_error_model, chi2_statistic, distance_threshold, pp_plot_data, simulate_distance_cdf, ErrorModel,
    FrameError, Relabel, DEFAULT_SAMPLES,
};
use crate::flow_lk::FlowWindow;
use crate::geom::Point;
use crate::matchcore::{landscape_for, match_feature, DenseDescriber, RawPixelDescriber};
use crate::plot::{landscape_heatmap, line_chart, Series};
use crate::raster::{is_raster_path, read_image, rgb_to_cielab, rgb_to_lab01, to_grayscale, write_image, PlanarImage};
use crate::synthgen::{generate, read_frames, read_labels, write_sequence, Regime, SynthSpec};
use crate::tracker::{ci_line, evaluate, report, track, Matcher, Mode, Track, TrackReport, TrackScheme, UnmatchedPolicy};
use crate::trainpipe::{build_manifest, CropManifest, Split, DEFAULT_STRIDE, DEFAULT_WINDOW};

/// Samples used for the labelling-error distance CDF in reports.
const REPORT_CDF_SAMPLES: usize = 200_000;

#[derive(Debug, Parser, Serialize)]
#[command(name = "dfe-track", version, about = "Skin-feature matching, tracking and error calibration")]
pub struct Cli {
    /// Seed for every random choice; a fresh one is drawn and recorded when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Convert images between color spaces (file or whole directory).
    Convert(ConvertArgs),
    /// Build a training-crop manifest from a directory of images.
    Ingest(IngestArgs),
    /// Train an autoencoder on the crops of a manifest.
    Train(TrainArgs),
    /// Match one reference feature in a target frame.
    Match(MatchArgs),
    /// Track a feature through a directory of frames.
    Track(TrackArgs),
    /// Estimate an error model from repeated labels.
    Calibrate(CalibrateArgs),
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
    /// Evaluate a per-frame error list against an error model.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Target {
    Cielab,
    Lab01,
    Gray,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    /// Input image or directory.
    pub input: PathBuf,
    /// Output image or directory (created).
    pub output: PathBuf,
    /// Target space. CIELAB is min-max scaled to 8 bits on write.
    #[arg(long, value_enum, default_value = "lab01")]
    pub to: Target,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Directory scanned recursively for PNG/PPM/PGM images.
    pub dir: PathBuf,
    /// Manifest CSV to write.
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Fraction of crops held out for validation.
    #[arg(long, default_value_t = 0.1)]
    pub heldout: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Manifest CSV written by `ingest`.
    pub manifest: PathBuf,
    /// Model file to write.
    pub out: PathBuf,
    /// Architecture JSON; the default 31x31 encoder when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.002)]
    pub learning_rate: f64,
    /// Write a checkpoint every N epochs into --checkpoint-dir.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from a checkpoint instead of a fresh model.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum MatcherKind {
    /// Learned encoder (needs --model).
    Dfe,
    /// Raw 31x31 LAB01 pixels.
    Raw,
    /// Pyramidal Lucas-Kanade (tracking only).
    Lk,
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    /// Reference frame.
    pub ref_frame: PathBuf,
    pub ref_x: f64,
    pub ref_y: f64,
    /// Frame searched for the reference feature.
    pub target_frame: PathBuf,
    /// Model file; required for the dfe matcher.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dfe")]
    pub matcher: MatcherKind,
    /// Also write the SSR landscape as CSV and SVG.
    #[arg(long)]
    pub emit_landscape: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum SchemeKind {
    Fixed,
    Previous,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum PolicyKind {
    AssignDiagonal,
    HoldLast,
}

#[derive(Debug, Args, Serialize)]
pub struct TrackArgs {
    /// Directory of frames, read in file-name order.
    pub frames_dir: PathBuf,
    /// Ground-truth CSV (`frame,x,y`); enables the full report.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dfe")]
    pub matcher: MatcherKind,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fixed")]
    pub scheme: SchemeKind,
    /// Error-model name from the catalog or a JSON file written by `calibrate`.
    #[arg(long, default_value = "static-face-mole")]
    pub condition: String,
    /// Start position; defaults to the frame-0 label.
    #[arg(long, requires = "start_y")]
    pub start_x: Option<f64>,
    #[arg(long, requires = "start_x")]
    pub start_y: Option<f64>,
    /// Leave frames unmatched when the nearest-neighbor ratio exceeds this.
    #[arg(long)]
    pub ratio_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "assign-diagonal")]
    pub unmatched: PolicyKind,
    /// Re-extract the reference at held positions in previous-frame mode.
    #[arg(long)]
    pub reextract_on_hold: bool,
    /// Limit the search to this many pixels around the last prediction.
    #[arg(long)]
    pub search_radius: Option<usize>,
    /// Keep every k-th frame.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// CSV with header `image_id,attempt,x,y`.
    pub relabels: PathBuf,
    /// Name stored in the model.
    #[arg(long, default_value = "calibrated")]
    pub condition: String,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Sequence spec JSON; mutually exclusive with --preset.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetKind>,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum PresetKind {
    Static,
    Bike,
    Pd,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// CSV with header `frame,dx,dy`.
    pub errors: PathBuf,
    #[arg(long, default_value = "static-face-mole")]
    pub condition: String,
    /// Image size used to flag diagonal (unmatched) errors.
    #[arg(long, num_args = 2, value_names = ["W", "H"])]
    pub image_size: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    seed_source: &'static str,
    threads: usize,
    cli: &'a Cli,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

struct Outcome {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
    summary: Option<serde_json::Value>,
}

impl Outcome {
    fn new(dir: impl Into<PathBuf>) -> Self {
        Outcome { dir: dir.into(), outputs: Vec::new(), summary: None }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var("DFE_TRACK_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("DFE_TRACK_THREADS must be a positive integer, got `{v}`")))?;
        // The global pool can be built once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = configure_threads()?;
    let (seed, seed_source) = match cli.seed {
        Some(s) => (s, "flag"),
        None => (rand::random::<u64>(), "entropy"),
    };
    let outcome = match &cli.command {
        Command::Convert(a) => cmd_convert(a)?,
        Command::Ingest(a) => cmd_ingest(a, seed)?,
        Command::Train(a) => cmd_train(a, seed)?,
        Command::Match(a) => cmd_match(a)?,
        Command::Track(a) => cmd_track(a, seed)?,
        Command::Calibrate(a) => cmd_calibrate(a)?,
        Command::Synth(a) => cmd_synth(a, seed)?,
        Command::Report(a) => cmd_report(a, seed)?,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        seed_source,
        threads,
        cli,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        summary: outcome.summary,
    };
    fs::create_dir_all(&outcome.dir)?;
    let f = fs::File::create(outcome.dir.join("run.json"))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn convert_one(img: &PlanarImage, to: Target) -> Result<PlanarImage> {
    match to {
        Target::Cielab => rgb_to_cielab(img),
        Target::Lab01 => rgb_to_lab01(img),
        Target::Gray => match img.space() {
            crate::raster::ColorSpace::Gray01 => Ok(img.clone()),
            _ => to_grayscale(img),
        },
    }
}

fn cmd_convert(a: &ConvertArgs) -> Result<Outcome> {
    let mut out = Outcome::new(if a.input.is_dir() { a.output.clone() } else { parent_dir(&a.output) });
    if a.input.is_dir() {
        fs::create_dir_all(&a.output)?;
        let mut files: Vec<PathBuf> = fs::read_dir(&a.input)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.is_file() && is_raster_path(p));
        files.sort();
        for f in files {
            let dest = a.output.join(f.file_name().expect("listed files have names"));
            write_image(&convert_one(&read_image(&f)?, a.to)?, &dest)?;
            out.outputs.push(dest);
        }
    } else {
        write_image(&convert_one(&read_image(&a.input)?, a.to)?, &a.output)?;
        out.outputs.push(a.output.clone());
    }
    Ok(out)
}

fn cmd_ingest(a: &IngestArgs, seed: u64) -> Result<Outcome> {
    let (manifest, skips) = build_manifest(&a.dir, seed, a.heldout, a.window, a.stride)?;
    manifest.write_csv(&a.manifest)?;
    log::info!(
        "{} crops ({} held out), {} files skipped",
        manifest.entries.len(),
        manifest.count(Split::Heldout),
        skips.skipped.len()
    );
    let mut out = Outcome::new(parent_dir(&a.manifest));
    out.outputs.push(a.manifest.clone());
    out.summary = Some(serde_json::json!({
        "crops": manifest.entries.len(),
        "heldout": manifest.count(Split::Heldout),
        "skipped": skips.skipped,
    }));
    Ok(out)
}

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<Outcome> {
    let config = match &a.config {
        Some(p) => serde_json::from_str::<CaeConfig>(&fs::read_to_string(p)?)?,
        None => CaeConfig::default(),
    }
    .with_seed(seed);
    let manifest = CropManifest::read_csv(&a.manifest, seed, config.input_size)?;
    let train = manifest.load_dataset(Split::Train)?;
    let heldout = manifest.load_dataset(Split::Heldout)?;
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch,
        optimizer: AdamaxConfig { learning_rate: a.learning_rate, ..AdamaxConfig::default() },
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir: a.checkpoint_dir.clone(),
    };
    if let Some(dir) = &opts.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut state = match &a.resume {
        Some(p) => crate::dfe::load_checkpoint(p)?,
        None => TrainState::new(config, opts.optimizer)?,
    };
    state.run(&train, &opts)?;
    save_with_history(&state.model, &state.history, &a.out)?;
    let heldout_mse = if heldout.is_empty() { None } else { Some(state.model.reconstruction_loss(&heldout.all())?) };
    if let Some(m) = heldout_mse {
        log::info!("held-out mse {m:.6}");
    }
    let mut out = Outcome::new(parent_dir(&a.out));
    out.outputs.push(a.out.clone());
    out.summary = Some(serde_json::json!({
        "train_crops": train.len(),
        "heldout_crops": heldout.len(),
        "history": state.history,
        "heldout_mse": heldout_mse,
    }));
    Ok(out)
}

fn describer(kind: MatcherKind, model: Option<&Path>) -> Result<Box<dyn DenseDescriber>> {
    match kind {
        MatcherKind::Dfe => {
            let path = model.ok_or_else(|| Error::invalid("the dfe matcher needs --model"))?;
            Ok(Box::new(DfeEncoder::load(path)?))
        }
        MatcherKind::Raw => Ok(Box::new(RawPixelDescriber::default())),
        MatcherKind::Lk => Err(Error::invalid("the lk matcher only tracks; use dfe or raw")),
    }
}

fn cmd_match(a: &MatchArgs) -> Result<Outcome> {
    let d = describer(a.matcher, a.model.as_deref())?;
    let reference = d.prepare(&read_image(&a.ref_frame)?)?;
    let target = d.prepare(&read_image(&a.target_frame)?)?;
    let center = Point::new(a.ref_x, a.ref_y)
        .round_to_pixel()
        .ok_or_else(|| Error::invalid("reference position is outside the image"))?;
    let (_, land) = landscape_for(d.as_ref(), &reference, center, &target)?;
    let m = match_feature(&land)?;
    fs::create_dir_all(&a.out_dir)?;
    let mut out = Outcome::new(&a.out_dir);
    let result = a.out_dir.join("match.json");
    serde_json::to_writer_pretty(fs::File::create(&result)?, &m)?;
    out.outputs.push(result);
    if a.emit_landscape {
        let csv_path = a.out_dir.join("landscape.csv");
        land.write_csv(fs::File::create(&csv_path)?)?;
        let svg_path = a.out_dir.join("landscape.svg");
        fs::write(&svg_path, landscape_heatmap(&land))?;
        out.outputs.extend([csv_path, svg_path]);
    }
    println!("{} {}", m.subpixel_pos.x, m.subpixel_pos.y);
    out.summary = Some(serde_json::to_value(m)?);
    Ok(out)
}

/// Catalog name, or a JSON file holding an [`ErrorModel`].
pub fn resolve_condition(s: &str) -> Result<ErrorModel> {
    let p = Path::new(s);
    if p.is_file() {
        let m: ErrorModel = serde_json::from_str(&fs::read_to_string(p)?)?;
        m.validate()?;
        Ok(m)
    } else {
        ErrorModel::by_name(s)
    }
}

fn write_report_artifacts(rep: &TrackReport, errors: &[FrameError], model: &ErrorModel, out: &mut Outcome) -> Result<()> {
    let dir = out.dir.clone();
    let csv_path = dir.join("report.csv");
    rep.write_csv(fs::File::create(&csv_path)?)?;
    let json_path = dir.join("report.json");
    rep.write_json(&json_path)?;

    let sorted: Vec<(f64, f64)> = rep.sorted_errors.iter().enumerate().map(|(i, &e)| ((i + 1) as f64, e)).collect();
    let sorted_svg = dir.join("sorted_errors.svg");
    fs::write(
        &sorted_svg,
        line_chart("Sorted errors", "rank", "error (px)", &[Series::new("error", sorted, "steelblue")]),
    )?;
    let cumulative: Vec<(f64, f64)> = rep.rows.iter().enumerate().map(|(i, r)| ((i + 1) as f64, r.cumulative)).collect();
    let ci: Vec<(f64, f64)> = rep.rows.iter().enumerate().map(|(i, r)| ((i + 1) as f64, r.ci)).collect();
    let cum_svg = dir.join("cumulative.svg");
    fs::write(
        &cum_svg,
        line_chart(
            "Cumulative standardized error",
            "frame",
            "sum of squared standardized errors",
            &[Series::new("cumulative", cumulative, "steelblue"), Series::new("99% CI", ci, "crimson").dashed()],
        ),
    )?;
    out.outputs.extend([csv_path, json_path, sorted_svg, cum_svg]);
    if errors.len() >= 2 {
        let pp = pp_plot_data(errors, model)?;
        let pp_svg = dir.join("pp.svg");
        fs::write(
            &pp_svg,
            line_chart(
                "P-P plot",
                "theoretical",
                "empirical",
                &[
                    Series::new("errors", pp.points.clone(), "steelblue"),
                    Series::new("x = y", vec![(0.0, 0.0), (1.0, 1.0)], "gray").dashed(),
                ],
            ),
        )?;
        out.outputs.push(pp_svg);
    }
    Ok(())
}

fn cmd_track(a: &TrackArgs, seed: u64) -> Result<Outcome> {
    if a.every == 0 {
        return Err(Error::invalid("--every must be at least 1"));
    }
    let all = read_frames(&a.frames_dir)?;
    let frames: Vec<PlanarImage> = all.into_iter().step_by(a.every).collect();
    let truth = match &a.labels {
        Some(p) => {
            let labels = read_labels(p)?;
            let kept: Vec<Point> = labels.into_iter().step_by(a.every).collect();
            if kept.len() != frames.len() {
                return Err(Error::invalid(format!("{} labels for {} frames", kept.len(), frames.len())));
            }
            Some(kept)
        }
        None => None,
    };
    let start = match (a.start_x, a.start_y, &truth) {
        (Some(x), Some(y), _) => Point::new(x, y),
        (_, _, Some(t)) => t[0],
        _ => return Err(Error::invalid("give --start-x/--start-y or --labels")),
    };
    let scheme = TrackScheme {
        mode: match a.scheme {
            SchemeKind::Fixed => Mode::FixedReference,
            SchemeKind::Previous => Mode::PreviousFrame,
        },
        unmatched: match a.unmatched {
            PolicyKind::AssignDiagonal => UnmatchedPolicy::AssignDiagonal,
            PolicyKind::HoldLast => UnmatchedPolicy::HoldLast,
        },
        ratio_threshold: a.ratio_threshold,
        hold_descriptor: !a.reextract_on_hold,
        search_radius: a.search_radius,
    };
    let owned;
    let matcher = match a.matcher {
        MatcherKind::Lk => Matcher::Lk(FlowWindow::default()),
        kind => {
            owned = describer(kind, a.model.as_deref())?;
            Matcher::Descriptor(owned.as_ref())
        }
    };
    let t: Track = track(&frames, start, matcher, &scheme)?;
    fs::create_dir_all(&a.out_dir)?;
    let mut out = Outcome::new(&a.out_dir);
    let pred = a.out_dir.join("predictions.csv");
    t.write_csv(fs::File::create(&pred)?)?;
    out.outputs.push(pred);
    if let Some(truth) = truth {
        let model = resolve_condition(&a.condition)?;
        let cdf = simulate_distance_cdf(&model, REPORT_CDF_SAMPLES, seed)?;
        let rep = evaluate(&t, &truth, scheme.unmatched, &model, &cdf)?;
        let errors = t.errors(&truth, scheme.unmatched)?;
        write_report_artifacts(&rep, &errors, &model, &mut out)?;
        println!("mean error {:.3} px, max {:.3} px", rep.mean_error, rep.max_error);
        out.summary = Some(serde_json::json!({
            "mean_error": rep.mean_error,
            "max_error": rep.max_error,
            "diverged": rep.diverged,
            "ci_crossing": rep.ci_crossing,
        }));
    }
    Ok(out)
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<Outcome> {
    let mut r = csv::Reader::from_path(&a.relabels)?;
    let relabels = r.deserialize().collect::<std::result::Result<Vec<Relabel>, _>>()?;
    let model = calibrate_error_model(&a.condition, &relabels)?;
    let text = serde_json::to_string_pretty(&model)?;
    let mut out = match &a.out {
        Some(p) => {
            fs::write(p, format!("{text}\n"))?;
            let mut o = Outcome::new(parent_dir(p));
            o.outputs.push(p.clone());
            o
        }
        None => {
            println!("{text}");
            Outcome::new(".")
        }
    };
    out.summary = Some(serde_json::to_value(&model)?);
    Ok(out)
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<Outcome> {
    let spec: SynthSpec = match (&a.spec, a.preset) {
        (Some(p), _) => serde_json::from_str(&fs::read_to_string(p)?)?,
        (None, Some(k)) => {
            let regime = match k {
                PresetKind::Static => Regime::Static,
                PresetKind::Bike => Regime::Bike,
                PresetKind::Pd => Regime::Pd,
            };
            SynthSpec::preset(regime, a.width, a.height, a.frames, seed)
        }
        (None, None) => return Err(Error::invalid("give a spec file or --preset")),
    };
    let seq = generate(&spec)?;
    write_sequence(&seq, &a.out_dir)?;
    let spec_path = a.out_dir.join("spec.json");
    fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)?;
    let mut out = Outcome::new(&a.out_dir);
    out.outputs.push(a.out_dir.join("labels.csv"));
    out.outputs.push(spec_path);
    out.summary = Some(serde_json::json!({ "frames": seq.frames.len() }));
    Ok(out)
}

#[derive(Serialize)]
struct ThresholdRow {
    alpha: f64,
    pixels: f64,
    std_error: f64,
}

fn cmd_report(a: &ReportArgs, seed: u64) -> Result<Outcome> {
    let model = resolve_condition(&a.condition)?;
    let mut r = csv::Reader::from_path(&a.errors)?;
    let errors = r.deserialize().collect::<std::result::Result<Vec<FrameError>, _>>()?;
    let cdf = simulate_distance_cdf(&model, REPORT_CDF_SAMPLES, seed)?;
    let diagonal = a.image_size.as_ref().map(|s| s[0].hypot(s[1]));
    let rep = report(&errors, &model, &cdf, diagonal)?;
    fs::create_dir_all(&a.out_dir)?;
    let mut out = Outcome::new(&a.out_dir);
    write_report_artifacts(&rep, &errors, &model, &mut out)?;

    let thresholds: Vec<ThresholdRow> = [0.5, 0.05, 0.01]
        .iter()
        .map(|&alpha| {
            distance_threshold(&model, alpha, seed).map(|t| ThresholdRow { alpha, pixels: t.pixels, std_error: t.std_error })
        })
        .collect::<Result<_>>()?;
    let th_path = a.out_dir.join("thresholds.json");
    fs::write(&th_path, serde_json::to_string_pretty(&thresholds)?)?;
    out.outputs.push(th_path);

    let chi = chi2_statistic(&errors, &model)?;
    let ci = ci_line(errors.len())?;
    println!(
        "chi2 {:.3} (dof {}), p = {:.3e}, 99% line {:.3}",
        chi.statistic,
        chi.dof,
        chi.p_value,
        ci[ci.len() - 1]
    );
    out.summary = Some(serde_json::json!({
        "chi_square": chi,
        "mean_error": rep.mean_error,
        "max_error": rep.max_error,
        "threshold_samples": DEFAULT_SAMPLES,
    }));
    Ok(out)
}
