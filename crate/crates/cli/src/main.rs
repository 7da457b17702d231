use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use quadleaf::evalbench::{bench_detect, evaluate_dataset, metrics_table, ImageLabelRule};
use quadleaf::grouping::ImageDims;
use quadleaf::imgcore::{load_image, save_image};
use quadleaf::pipeline::{detect_observed, BASE_COLOUR};
use quadleaf::synth::{scene_suite, SceneParams};
use quadleaf::predicates::train_baseline;
use quadleaf::{detect, localize, Error, GroupingMode, PixelImage};

mod annotate;
mod config;
mod dataset;

use config::{ClassifierSpec, OutputFormat, RunConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_CLASSIFIER: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "quadleaf", version, about = "Quadtree leaf-disease detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command that runs the detector.
#[derive(clap::Args, Debug)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// baseline:builtin, baseline:<model.json> or external:<command>
    #[arg(long)]
    classifier: Option<ClassifierSpec>,
    /// faithful or strict
    #[arg(long)]
    grouping: Option<GroupingMode>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(c) = &self.classifier {
            cfg.classifier = c.clone();
        }
        if let Some(g) = self.grouping {
            cfg.grouping = g;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect diseased regions in one image
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Where to write the annotated image
        #[arg(long)]
        annotate: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Report destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write per-layer overlays, the grouping overlay and the layer trace
    Inspect {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score image labels over <dataset>/<label>/<image> folders
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// largest_area, box_count or max_confidence
        #[arg(long)]
        label_rule: Option<ImageLabelRule>,
        #[arg(long, value_enum, default_value = "json")]
        format: EvalFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time repeated detection runs
    Bench {
        /// Image to time; a generated leaf scene when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Side of the generated scene
        #[arg(long, default_value_t = 1024)]
        size: u32,
    },
    /// Train a baseline model from <dataset>/<label>/<image> folders
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum EvalFormat {
    Json,
    Table,
}

#[derive(Serialize)]
struct Report<'a> {
    image: ImageDims,
    config_digest: String,
    diseases: &'a BTreeMap<String, Vec<[u32; 4]>>,
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> anyhow::Result<PixelImage> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn run_detect(
    input: &Path,
    run: &RunArgs,
    annotate: Option<&Path>,
    format: Option<OutputFormat>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let mut cfg = run.resolve()?;
    if let Some(f) = format {
        cfg.output_format = f;
    }
    let wants_image = matches!(cfg.output_format, OutputFormat::Image | OutputFormat::Both);
    if wants_image && annotate.is_none() {
        bail!(Error::Config("--annotate <path> is required for image output".into()));
    }
    let img = read_input(input)?;
    let classifier = cfg.classifier.build(&cfg.pipeline)?;
    let det = detect(&img, &cfg.pipeline, classifier.as_ref())?;
    let report = localize(&det.features, img.dims(), cfg.grouping);
    log::info!(
        "{} layers, {} segments examined, {} classifier calls",
        det.trace.layers.len(),
        det.trace.total_examined(),
        det.trace.total_classified()
    );
    if wants_image {
        let labels: Vec<String> = cfg.pipeline.disease_ranges.keys().cloned().collect();
        let out = annotate::annotate_report(&img, &labels, &report.diseases);
        let path = annotate.expect("checked above");
        save_image(path, &out).with_context(|| format!("writing {}", path.display()))?;
    }
    if matches!(cfg.output_format, OutputFormat::Report | OutputFormat::Both) {
        let body = Report {
            image: report.image,
            config_digest: cfg.digest(),
            diseases: &report.diseases,
        };
        write_output(output, &serde_json::to_string_pretty(&body)?)?;
    }
    Ok(())
}

fn run_inspect(input: &Path, run: &RunArgs, out_dir: &Path) -> anyhow::Result<()> {
    let cfg = run.resolve()?;
    let img = read_input(input)?;
    let classifier = cfg.classifier.build(&cfg.pipeline)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let labels: Vec<String> = cfg.pipeline.disease_ranges.keys().cloned().collect();
    let mut overlays = Vec::new();
    let det = detect_observed(&img, &cfg.pipeline, classifier.as_ref(), |depth, fm| {
        let mut layer = img.clone();
        for (label, segs) in fm.iter() {
            let colour = if label == BASE_COLOUR {
                annotate::FRONTIER
            } else {
                annotate::label_colour(labels.iter().position(|l| l == label).unwrap_or(0))
            };
            for s in segs {
                annotate::draw_segment(&mut layer, s, 1, colour);
            }
        }
        overlays.push((depth, layer));
    })?;
    for (depth, layer) in &overlays {
        save_image(&out_dir.join(format!("layer_{depth:02}.png")), layer)?;
    }
    let report = localize(&det.features, img.dims(), cfg.grouping);
    save_image(
        &out_dir.join("grouping.png"),
        &annotate::annotate_report(&img, &labels, &report.diseases),
    )?;
    std::fs::write(out_dir.join("trace.json"), serde_json::to_string_pretty(&det.trace)?)?;
    let body = Report {
        image: report.image,
        config_digest: cfg.digest(),
        diseases: &report.diseases,
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&body)?)?;
    println!("wrote {} layer overlays to {}", overlays.len(), out_dir.display());
    Ok(())
}

fn run_eval(
    dataset: &Path,
    run: &RunArgs,
    label_rule: Option<ImageLabelRule>,
    format: EvalFormat,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let mut cfg = run.resolve()?;
    if let Some(r) = label_rule {
        cfg.label_rule = r;
    }
    let samples = dataset::load_samples(dataset)?;
    let classifier = cfg.classifier.build(&cfg.pipeline)?;
    let summary = evaluate_dataset(&samples, &cfg.pipeline, classifier.as_ref(), cfg.grouping, cfg.label_rule)?;
    let text = match format {
        EvalFormat::Json => serde_json::to_string_pretty(&summary)?,
        EvalFormat::Table => {
            let mut t = metrics_table(&summary.metrics);
            t.push_str(&format!("\nconfusion matrix (rows truth, columns predicted): {:?}\n", summary.matrix.labels()));
            for (label, row) in summary.matrix.labels().iter().zip(summary.matrix.counts()) {
                t.push_str(&format!("{label}: {row:?}\n"));
            }
            t.push_str(&format!("evaluated {} images", summary.evaluated));
            for f in &summary.failures {
                t.push_str(&format!("\nunreadable {}: {}", f.id, f.reason));
            }
            t
        }
    };
    write_output(output, &text)
}

fn run_bench(input: Option<&Path>, run: &RunArgs, reps: usize, size: u32) -> anyhow::Result<()> {
    let cfg = run.resolve()?;
    let img = match input {
        Some(p) => read_input(p)?,
        None => {
            if size == 0 {
                bail!(Error::Config("--size must be positive".into()));
            }
            scene_suite(&SceneParams::new(size, size), 1, 7, false)
                .remove(0)
                .image
        }
    };
    let classifier = cfg.classifier.build(&cfg.pipeline)?;
    let report = bench_detect(&img, &cfg.pipeline, classifier.as_ref(), reps)?;
    write_output(None, &serde_json::to_string_pretty(&report)?)
}

fn run_train(dataset: &Path, output: &Path) -> anyhow::Result<()> {
    let data = dataset::load_training(dataset)?;
    let model = train_baseline(&data)?;
    model.save(output).with_context(|| format!("writing {}", output.display()))?;
    println!("trained {} classes on {} images", model.classes.len(), data.len());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let classifier_failed = err
        .chain()
        .filter_map(|e| e.downcast_ref::<Error>())
        .any(Error::is_classifier_failure);
    if classifier_failed {
        EXIT_CLASSIFIER
    } else {
        EXIT_USAGE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QUADLEAF_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect {
            input,
            run,
            annotate,
            format,
            output,
        } => run_detect(input, run, annotate.as_deref(), *format, output.as_deref()),
        Command::Inspect { input, run, out_dir } => run_inspect(input, run, out_dir),
        Command::Eval {
            dataset,
            run,
            label_rule,
            format,
            output,
        } => run_eval(dataset, run, *label_rule, *format, output.as_deref()),
        Command::Bench { input, run, reps, size } => run_bench(input.as_deref(), run, *reps, *size),
        Command::Train { dataset, output } => run_train(dataset, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
