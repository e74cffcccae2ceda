use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use attn_topo::classifier::{train, Mode, Network, NetworkConfig, TrainOptions};
use attn_topo::distance::{distance_matrix, write_matrix_csv, GroundMetric};
use attn_topo::eval::{robustness_eval, write_metrics_csv, Confusion};
use attn_topo::filtration::FiltrationKind;
use attn_topo::graph::{EdgeTransform, SymmetryFunction};
use attn_topo::heads::{prune_dataset, score_heads, top_n, HeadScore};
use attn_topo::image::{build_stacks, ImageStack, Pipeline};
use attn_topo::synthetic::{generate, perturb, Distractor, SyntheticConfig};
use attn_topo::tensor_io::{
    manifest_path, read_dataset, read_paired_stacks, read_stack_dataset, write_dataset, write_stack_dataset,
    DatasetKind, DatasetManifest, Split,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_USAGE: u8 = 1;
const EXIT_CONTRACT: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "attn-topo", version, about = "Topological analysis of transformer attention maps")]
struct Cli {
    /// Seed for every random choice; runs with the same seed are reproducible.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an attention or image-stack dataset against the format contract.
    Validate {
        dataset: PathBuf,
    },
    /// Turn an attention dataset into an image-stack dataset.
    Transform(TransformArgs),
    /// Train the classifier on an image-stack dataset.
    Train(TrainArgs),
    /// Write per-sentence logits and predicted classes.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Accuracy, MCC and confusion counts on a labelled dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Gradient-based relevance of every head.
    ScoreHeads {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Score on the first N sentences only.
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        output: PathBuf,
        /// Also write a layer × head grid.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Keep only the channels of the best-scoring heads.
    Prune {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        top: usize,
        /// Keep every head except the top ones.
        #[arg(long)]
        invert: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pairwise Wasserstein distances between the diagrams of one head.
    Distances(DistanceArgs),
    /// Compare predictions on paired before/after image-stack datasets.
    Robustness {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Layer × head grid of log10 perturbation.
        #[arg(long)]
        heatmap: PathBuf,
    },
    /// Write a synthetic attention dataset with two attention-pattern classes.
    Synthesize(SynthesizeArgs),
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Filtration::Ordinary)]
    filtration: Filtration,
    #[arg(long, value_enum, default_value_t = Symmetry::Max)]
    symmetry: Symmetry,
    /// Gaussian width for every image instead of the per-class default.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value_t = EdgeMap::OneMinus)]
    directed_edge_transform: EdgeMap,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Architecture as JSON.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Tuned architecture for `cola`, `imdb`, `spam` or `sst2`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Model directory to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// Attention dataset.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Filtration::Ordinary)]
    filtration: Filtration,
    #[arg(long, value_enum, default_value_t = Symmetry::Max)]
    symmetry: Symmetry,
    #[arg(long, value_enum, default_value_t = EdgeMap::OneMinus)]
    directed_edge_transform: EdgeMap,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Metric::Euclidean)]
    metric: Metric,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SynthesizeArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    sentences: usize,
    #[arg(long, default_value_t = 12)]
    layers: usize,
    #[arg(long, default_value_t = 12)]
    heads: usize,
    #[arg(long, default_value_t = 8)]
    min_tokens: usize,
    #[arg(long, default_value_t = 16)]
    max_tokens: usize,
    /// Only this head (global index) follows the label; others are distractors.
    #[arg(long)]
    planted: Option<usize>,
    /// Also write `<output>-noisy`, paired with the output, with rows perturbed by U(0, eps).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value = "synthetic")]
    name: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Filtration {
    Ordinary,
    Multidim,
    Directed,
}

impl From<Filtration> for FiltrationKind {
    fn from(f: Filtration) -> Self {
        match f {
            Filtration::Ordinary => FiltrationKind::Ordinary,
            Filtration::Multidim => FiltrationKind::MultiDim,
            Filtration::Directed => FiltrationKind::Directed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Symmetry {
    Max,
    Min,
    Mean,
    Mult,
}

impl From<Symmetry> for SymmetryFunction {
    fn from(s: Symmetry) -> Self {
        match s {
            Symmetry::Max => SymmetryFunction::Max,
            Symmetry::Min => SymmetryFunction::Min,
            Symmetry::Mean => SymmetryFunction::Mean,
            Symmetry::Mult => SymmetryFunction::Mult,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeMap {
    OneMinus,
    Identity,
}

impl From<EdgeMap> for EdgeTransform {
    fn from(e: EdgeMap) -> Self {
        match e {
            EdgeMap::OneMinus => EdgeTransform::OneMinus,
            EdgeMap::Identity => EdgeTransform::Identity,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    Euclidean,
    Linf,
}

fn pipeline(filtration: Filtration, symmetry: Symmetry, edges: EdgeMap, sigma: Option<f64>) -> Pipeline {
    let mut p = Pipeline::new(filtration.into(), symmetry.into());
    p.edge_transform = edges.into();
    p.sigma = sigma;
    p
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn load_stacks(path: &Path) -> Result<(DatasetManifest, Vec<ImageStack>)> {
    let (manifest, stacks) = read_stack_dataset(path)?;
    if stacks.is_empty() {
        bail!("{} has no records", manifest_path(path).display());
    }
    Ok((manifest, stacks))
}

fn validate(dataset: &Path) -> Result<()> {
    let path = manifest_path(dataset);
    let manifest = DatasetManifest::load(&path)?;
    let count = match manifest.kind {
        DatasetKind::Attention => read_dataset(&path)?.len(),
        DatasetKind::ImageStack => read_stack_dataset(&path)?.1.len(),
    };
    println!("{}: {count} valid {:?} records", path.display(), manifest.kind);
    Ok(())
}

fn transform(args: &TransformArgs) -> Result<()> {
    let input = manifest_path(&args.input);
    let source = DatasetManifest::load(&input)?;
    let records = read_dataset(&input)?;
    if records.is_empty() {
        bail!("{} has no records", input.display());
    }
    let p = pipeline(args.filtration, args.symmetry, args.directed_edge_transform, args.sigma);
    let stacks = build_stacks(&records, &p, args.jobs)?;
    let suffix = FiltrationKind::from(args.filtration).to_string();
    let mut manifest = DatasetManifest::new(format!("{}.{suffix}", source.name), source.split, source.num_layers, source.num_heads);
    manifest.max_tokens = source.max_tokens;
    manifest.pair_of = source.pair_of.map(|name| format!("{name}.{suffix}"));
    let tokens: Vec<usize> = records.iter().map(|r| r.num_tokens).collect();
    let written = write_stack_dataset(&args.output, manifest, &stacks, &tokens)?;
    println!("{}: {} stacks of shape {:?} ({p})", written.display(), stacks.len(), stacks[0].shape());
    Ok(())
}

fn train_cmd(args: &TrainArgs, seed: Option<u64>) -> Result<()> {
    let (manifest, stacks) = load_stacks(&args.input)?;
    let validation = match &args.validation {
        Some(path) => load_stacks(path)?.1,
        None => Vec::new(),
    };
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => NetworkConfig::load(path)?,
        (None, Some(name)) => {
            let kind: FiltrationKind = manifest
                .stack
                .as_ref()
                .map(|s| s.filtration.parse())
                .transpose()?
                .context("image-stack manifest has no layout")?;
            NetworkConfig::preset(name, kind)?
        }
        (None, None) => bail!("give either --config or --preset"),
    };
    config.input_shape = stacks[0].shape();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let mut net = Network::build(&config)?;
    let report = train(&mut net, &stacks, &validation, TrainOptions { epochs: args.epochs, batch_size: args.batch_size })?;
    net.save(&args.output)?;
    let mut log = create(&args.output.join("training.csv"))?;
    writeln!(log, "epoch,loss,val_accuracy,seconds")?;
    for e in &report.epochs {
        let acc = e.val_accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(log, "{},{},{acc},{}", e.epoch, e.loss, e.seconds)?;
    }
    log.flush()?;
    let last = report.epochs.last();
    println!(
        "trained {} epochs on {} stacks; final loss {}{}",
        report.epochs.len(),
        stacks.len(),
        last.map_or(f64::NAN, |e| e.loss),
        report.final_accuracy().map(|a| format!(", validation accuracy {a:.4}")).unwrap_or_default()
    );
    Ok(())
}

fn predictions(net: &mut Network, stacks: &[ImageStack]) -> Result<Vec<(f64, u8)>> {
    stacks
        .iter()
        .map(|s| {
            let logit = net.forward(s, Mode::Eval)?;
            Ok((logit, (logit > 0.0) as u8))
        })
        .collect()
}

fn predict(model: &Path, input: &Path, output: &Path) -> Result<()> {
    let mut net = Network::load(model)?;
    let (_, stacks) = load_stacks(input)?;
    let mut out = create(output)?;
    writeln!(out, "sentence_id,label,logit,prediction")?;
    for (s, (logit, pred)) in stacks.iter().zip(predictions(&mut net, &stacks)?) {
        writeln!(out, "{},{},{logit},{pred}", s.sentence_id, s.label)?;
    }
    out.flush()?;
    println!("{}: {} predictions", output.display(), stacks.len());
    Ok(())
}

fn eval(model: &Path, input: &Path, output: Option<&Path>) -> Result<()> {
    let mut net = Network::load(model)?;
    let (_, stacks) = load_stacks(input)?;
    let preds: Vec<u8> = predictions(&mut net, &stacks)?.into_iter().map(|p| p.1).collect();
    let labels: Vec<u8> = stacks.iter().map(|s| s.label).collect();
    let c = Confusion::from_predictions(&preds, &labels)?;
    if let Some(path) = output {
        let mut out = create(path)?;
        write_metrics_csv(&mut out, &preds, &labels)?;
        out.flush()?;
    }
    println!("accuracy {:.4}, mcc {:.4} on {} sentences", c.accuracy(), c.mcc(), stacks.len());
    Ok(())
}

fn encoder_shape(manifest: &DatasetManifest) -> (usize, usize) {
    (manifest.num_layers, manifest.num_heads)
}

fn score(model: &Path, input: &Path, sentences: Option<usize>, output: &Path, heatmap: Option<&Path>) -> Result<()> {
    let mut net = Network::load(model)?;
    let (manifest, stacks) = load_stacks(input)?;
    let take = match sentences {
        Some(0) => bail!("--sentences must be positive"),
        Some(n) => n.min(stacks.len()),
        None => stacks.len(),
    };
    let (layers, heads) = encoder_shape(&manifest);
    let scores = score_heads(&mut net, &stacks[..take], layers, heads, &manifest.name)?;
    let mut out = create(output)?;
    scores.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = heatmap {
        let mut out = create(path)?;
        scores.write_heatmap_csv(&mut out)?;
        out.flush()?;
    }
    let best = top_n(&scores, 1)?[0];
    println!("scored {} heads on {take} sentences; best head layer {} head {}", layers * heads, best / heads, best % heads);
    Ok(())
}

fn prune(input: &Path, scores: &Path, top: usize, invert: bool, output: &Path) -> Result<()> {
    let (manifest, stacks) = load_stacks(input)?;
    let (layers, heads) = encoder_shape(&manifest);
    let text = fs::read_to_string(scores).with_context(|| format!("cannot read {}", scores.display()))?;
    let scores = HeadScore::read_csv(&text, layers, heads)?;
    let chosen = top_n(&scores, top)?;
    let pruned = prune_dataset(&stacks, &chosen, invert)?;
    let tokens: Vec<usize> = manifest.records.iter().map(|r| r.num_tokens).collect();
    let mut out_manifest = manifest.clone();
    let tag = if invert { "without" } else { "top" };
    out_manifest.name = format!("{}.{tag}{top}", manifest.name);
    out_manifest.pair_of = manifest.pair_of.map(|name| format!("{name}.{tag}{top}"));
    let written = write_stack_dataset(output, out_manifest, &pruned, &tokens)?;
    let layout = pruned[0].layout();
    println!("{}: C={} channels from {} heads, shape {:?}", written.display(), layout.channels, layout.heads.len(), pruned[0].shape());
    Ok(())
}

fn distances(args: &DistanceArgs) -> Result<()> {
    let records = read_dataset(&args.input)?;
    let p = pipeline(args.filtration, args.symmetry, args.directed_edge_transform, None);
    let kind = FiltrationKind::from(args.filtration);
    if args.dim > kind.max_dim() {
        bail!("{kind} filtrations have homology up to dimension {}", kind.max_dim());
    }
    let diagrams = records
        .iter()
        .map(|r| {
            if args.layer >= r.num_layers || args.head >= r.num_heads {
                bail!("head ({}, {}) is outside the {}×{} encoder", args.layer, args.head, r.num_layers, r.num_heads);
            }
            Ok(p.diagrams(r, args.layer, args.head)?.swap_remove(args.dim))
        })
        .collect::<Result<Vec<_>>>()?;
    let metric = match args.metric {
        Metric::Euclidean => GroundMetric::Euclidean,
        Metric::Linf => GroundMetric::LInfinity,
    };
    let matrix = distance_matrix(&diagrams, args.p, metric)?;
    let ids: Vec<String> = records.iter().map(|r| r.sentence_id.clone()).collect();
    let mut out = create(&args.output)?;
    write_matrix_csv(&mut out, &ids, &matrix)?;
    out.flush()?;
    println!("{}: {}×{} W_{} distances", args.output.display(), ids.len(), ids.len(), args.p);
    Ok(())
}

fn robustness(model: &Path, before: &Path, after: &Path, output: &Path, heatmap: &Path) -> Result<()> {
    let mut net = Network::load(model)?;
    let manifest = DatasetManifest::load(&manifest_path(before))?;
    let pairs = read_paired_stacks(before, after)?;
    let (layers, heads) = encoder_shape(&manifest);
    let report = robustness_eval(&mut net, &pairs, layers, heads)?;
    let mut out = create(output)?;
    report.write_summary_csv(&mut out)?;
    out.flush()?;
    let mut out = create(heatmap)?;
    report.write_log_heatmap_csv(&mut out)?;
    out.flush()?;
    println!(
        "avoided {}/{} ({:.1}%), common {} ({:.1}%), initially correct {}",
        report.avoided,
        report.total,
        report.avoided_pct(),
        report.avoided_common,
        report.avoided_common_pct(),
        report.initially_correct
    );
    Ok(())
}

fn synthesize(args: &SynthesizeArgs, seed: u64) -> Result<()> {
    if args.min_tokens < 2 || args.min_tokens > args.max_tokens {
        bail!("token range {}..={} is empty or too short", args.min_tokens, args.max_tokens);
    }
    if let Some(h) = args.planted.filter(|&h| h >= args.layers * args.heads) {
        bail!("planted head {h} is outside the {}×{} encoder", args.layers, args.heads);
    }
    let cfg = SyntheticConfig {
        sentences: args.sentences,
        min_tokens: args.min_tokens,
        max_tokens: args.max_tokens,
        num_layers: args.layers,
        num_heads: args.heads,
        informative_heads: args.planted.map(|h| vec![h]),
        distractor: Distractor::RandomPattern,
        seed,
    };
    let records = generate(&cfg)?;
    let manifest = DatasetManifest::new(&args.name, Split::Train, args.layers, args.heads);
    let written = write_dataset(&args.output, manifest, &records)?;
    println!("{}: {} sentences", written.display(), records.len());
    if let Some(eps) = args.noise {
        if !(eps > 0.0 && eps.is_finite()) {
            bail!("noise level must be positive, got {eps}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973);
        let noisy: Vec<_> = records.iter().map(|r| perturb(r, eps, &mut rng)).collect();
        let mut manifest = DatasetManifest::new(format!("{}-noisy", args.name), Split::Train, args.layers, args.heads);
        manifest.pair_of = Some(args.name.clone());
        let mut dir = args.output.clone().into_os_string();
        dir.push("-noisy");
        let written = write_dataset(Path::new(&dir), manifest, &noisy)?;
        println!("{}: {} perturbed sentences", written.display(), noisy.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { dataset } => validate(dataset),
        Command::Transform(args) => transform(args),
        Command::Train(args) => train_cmd(args, cli.seed),
        Command::Predict { model, input, output } => predict(model, input, output),
        Command::Eval { model, input, output } => eval(model, input, output.as_deref()),
        Command::ScoreHeads { model, input, sentences, output, heatmap } => {
            score(model, input, *sentences, output, heatmap.as_deref())
        }
        Command::Prune { input, scores, top, invert, output } => prune(input, scores, *top, *invert, output),
        Command::Distances(args) => distances(args),
        Command::Robustness { model, before, after, output, heatmap } => robustness(model, before, after, output, heatmap),
        Command::Synthesize(args) => synthesize(args, cli.seed.unwrap_or(0)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONTRACT)
        }
    }
}
