use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scrollmat::pipeline::{self, Manifest, RunConfig};
use scrollmat::spectral::FeatureKind;
use scrollmat::synth::CorpusSpec;
use scrollmat::{par, report, Error, ImageSet};

#[derive(Parser)]
#[command(
    name = "scrollmat",
    version,
    about = "Parchment/papyrus classification of manuscript fragment images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isolate fragments listed in a manifest.
    Segment(Opts),
    /// Fill text and holes in segmented fragments.
    Fill(Opts),
    /// Sample filled fragments and write feature vectors.
    Features(Opts),
    /// Leave-one-fragment-out evaluation and reports.
    Evaluate(Opts),
    /// Render a synthetic corpus with masks and a manifest.
    Synth(SynthOpts),
    /// Run segment, fill, features and evaluate in sequence.
    Run(Opts),
}

#[derive(Args)]
struct Opts {
    /// Manifest (.csv or .json); required by segment and run.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    grid_n: usize,
    /// Samples per side of the sample grid.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, default_value_t = 256)]
    patch: usize,
    #[arg(long, default_value_t = 6)]
    rings: usize,
    #[arg(long, default_value_t = 19)]
    bins: usize,
    #[arg(long, default_value_t = 9)]
    inpaint_patch: usize,
    #[arg(long, default_value_t = 3)]
    kmeans_k: usize,
    #[arg(long, default_value_t = 4096)]
    kmeans_min_area: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature kinds to evaluate (comma separated); default all.
    #[arg(long, value_delimiter = ',')]
    fv: Vec<FeatureKind>,
    /// Image sets to evaluate (comma separated); default all present.
    #[arg(long = "set", value_delimiter = ',')]
    sets: Vec<ImageSet>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SynthOpts {
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    /// Corpus spec JSON; defaults to the bundled 33-fragment corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl Opts {
    fn config(&self) -> RunConfig {
        RunConfig {
            grid_n: self.grid_n,
            samples_per_side: self.samples,
            patch: self.patch,
            rings: self.rings,
            bins: self.bins,
            inpaint_patch: self.inpaint_patch,
            kmeans_k: self.kmeans_k,
            kmeans_min_area: self.kmeans_min_area,
            seed: self.seed,
            fv: if self.fv.is_empty() {
                FeatureKind::ALL.to_vec()
            } else {
                self.fv.clone()
            },
            sets: self.sets.clone(),
            out: self.out.clone(),
            workers: self.workers,
            ..RunConfig::default()
        }
    }

    fn manifest(&self) -> scrollmat::Result<Manifest> {
        match &self.manifest {
            Some(p) => Manifest::load(p),
            None => Err(Error::Invalid("--manifest is required for this command".into())),
        }
    }
}

fn run(cli: Cli) -> scrollmat::Result<()> {
    match cli.command {
        Command::Segment(o) => {
            let cfg = o.config();
            let manifest = o.manifest()?;
            let fragments = par::with_threads(o.workers, || pipeline::cmd_segment(&manifest, &cfg))?;
            println!(
                "segmented {} fragment(s) into {}",
                fragments.len(),
                cfg.stage_dir("segment").display()
            );
        }
        Command::Fill(o) => {
            let cfg = o.config();
            let entries = par::with_threads(o.workers, || pipeline::cmd_fill(&cfg))?;
            let failed = entries
                .iter()
                .filter(|e| e.status == pipeline::FillStatus::Failed)
                .count();
            println!("filled {} fragment(s), {failed} failed", entries.len());
        }
        Command::Features(o) => {
            let cfg = o.config();
            let summary = par::with_threads(o.workers, || pipeline::cmd_features(&cfg))?;
            println!(
                "wrote {} records for {} fragment(s), skipped {}",
                summary.records,
                summary.fragments,
                summary.skipped.len()
            );
        }
        Command::Evaluate(o) => {
            let cfg = o.config();
            let reports = par::with_threads(o.workers, || pipeline::cmd_evaluate(&cfg))?;
            print!("{}", report::render_all(&reports));
        }
        Command::Run(o) => {
            let cfg = o.config();
            let manifest = o.manifest()?;
            let reports = par::with_threads(o.workers, || pipeline::run_all(&manifest, &cfg))?;
            print!("{}", report::render_all(&reports));
        }
        Command::Synth(o) => {
            let corpus = match &o.corpus {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    CorpusSpec::from_json(&text)?
                }
                None => CorpusSpec::default_corpus(),
            };
            let manifest = par::with_threads(o.workers, || pipeline::cmd_synth(&corpus, &o.out))?;
            println!(
                "wrote {} plate(s); manifest {}",
                corpus.fragments.len(),
                manifest.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "kind": e.code() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
