use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use adaptrack::bench::{self, Report, ResultsFile, SequenceMeta};
use adaptrack::tracker::AdapterSource;
use adaptrack::{Error, FeatureExtractor, Network, Result, TrackerConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adaptrack", version, about = "Correlation-filter tracking on adapted CNN features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one sequence and write per-frame boxes.
    Track {
        /// Sequence directory with `img/` and `groundtruth_rect.txt`.
        #[arg(long)]
        seq: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Results file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Decode all frames before timing.
        #[arg(long)]
        preload: bool,
    },
    /// One-pass evaluation over every sequence in a dataset directory.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        /// Report file (JSON).
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        preload: bool,
        /// Sequences tracked concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        #[command(flatten)]
        model: ModelArgs,
        /// Directory for CSV plot tables.
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Also write per-frame boxes here.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Score a results file against ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        /// Dataset directory, or a single sequence directory.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        plots: PathBuf,
        /// Also write a JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Backbone manifest, or `raw` for scaled pixel intensities.
    #[arg(long, default_value = "raw")]
    net: String,
    /// Adapter manifest, `identity`, or `random:SEED`. Overrides the config.
    #[arg(long)]
    adapter: Option<String>,
    /// Tracker configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<(Arc<FeatureExtractor>, TrackerConfig)> {
        let config = match &self.config {
            Some(p) => TrackerConfig::load(p)?,
            None => TrackerConfig::default(),
        };
        let network = if self.net == "raw" {
            Network::raw_intensity()
        } else {
            Network::load(Path::new(&self.net))?
        };
        let source: AdapterSource = self
            .adapter
            .as_deref()
            .or(config.adapter.as_deref())
            .unwrap_or("identity")
            .parse()?;
        let extractor = FeatureExtractor::from_source(network, &source)?;
        Ok((Arc::new(extractor), config))
    }
}

fn print_summary(report: &Report) {
    for s in &report.sequences {
        match (&s.curves, &s.failure) {
            (Some(c), _) => println!(
                "{:<24} dp20 {:.3}  auc {:.3}  fps {:.1}  passes/frame {:.2}",
                s.name, c.dp20, c.auc, c.fps, s.forward_pass_ratio
            ),
            (None, Some(f)) => println!("{:<24} failed: {f}", s.name),
            (None, None) => println!("{:<24} not scored", s.name),
        }
    }
    let a = &report.aggregate;
    println!(
        "mean over {} sequences ({} failed): dp20 {:.3}  auc {:.3}  fps {:.1}",
        a.sequences, a.failures, a.curves.dp20, a.curves.auc, a.curves.fps
    );
}

fn write_plots(report: &Report, dir: &Path) -> Result<()> {
    for s in &report.sequences {
        if let Some(c) = &s.curves {
            bench::emit_plot_data(c, dir, &s.name)?;
        }
    }
    bench::emit_plot_data(&report.aggregate.curves, dir, "overall")?;
    Ok(())
}

fn ground_truth_for(gt: &Path, name: &str) -> Result<Vec<adaptrack::Rect>> {
    let nested = gt.join(name).join(bench::dataset::GROUND_TRUTH_FILE);
    let path = if nested.is_file() {
        nested
    } else {
        gt.join(bench::dataset::GROUND_TRUTH_FILE)
    };
    if !path.is_file() {
        return Err(Error::Data(format!("no ground truth for `{name}` under {}", gt.display())));
    }
    bench::dataset::load_ground_truth(&path)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Track { seq, model, out, preload } => {
            let (extractor, config) = model.load()?;
            let meta = bench::load_sequence(&seq)?;
            let result = bench::run_ope(extractor, &config, &meta, preload)?;
            ResultsFile::from_results(std::slice::from_ref(&result)).write(&out)?;
            if let Some(f) = result.failure {
                return Err(Error::Init(format!("{}: {f}", meta.name)));
            }
            println!(
                "{}: {} frames, {:.1} fps, {} forward passes",
                meta.name, result.frames, result.fps, result.forward_passes
            );
            Ok(())
        }
        Command::Bench { dataset, report, preload, jobs, model, plots, results } => {
            let (extractor, config) = model.load()?;
            let dirs = bench::discover_sequences(&dataset)?;
            if dirs.is_empty() {
                return Err(Error::Data(format!("no sequences under {}", dataset.display())));
            }
            let sequences: Vec<SequenceMeta> = dirs.iter().map(|d| bench::load_sequence(d)).collect::<Result<_>>()?;
            let runs = bench::run_benchmark(extractor, &config, &sequences, preload, jobs as usize)?;
            let gt: Vec<_> = sequences.iter().map(|s| s.ground_truth.clone()).collect();
            let rep = Report::build(&runs, &gt)?;
            rep.write(&report)?;
            if let Some(p) = results {
                ResultsFile::from_results(&runs).write(&p)?;
            }
            if let Some(dir) = plots {
                write_plots(&rep, &dir)?;
            }
            print_summary(&rep);
            Ok(())
        }
        Command::Eval { results, gt, plots, report } => {
            let runs = ResultsFile::read(&results)?.to_results();
            let truth = runs.iter().map(|r| ground_truth_for(&gt, &r.name)).collect::<Result<Vec<_>>>()?;
            let rep = Report::build(&runs, &truth)?;
            write_plots(&rep, &plots)?;
            if let Some(p) = report {
                rep.write(&p)?;
            }
            print_summary(&rep);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}
