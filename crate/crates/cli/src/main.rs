//! `gradmix` command line: dataset augmentation, statistics, synthetic
//! fixture generation and per-pair inspection dumps.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use gradmix_core::codec;
use gradmix_core::dataset::NucleusRecord;
use gradmix_core::imageops::centroid_offset;
use gradmix_core::mixer::{self, NormMode, TracedOutcome};
use gradmix_core::pipeline::{
    augment_dataset, color_delta, dataset_stats, AugmentationConfig, ColorAdjust, ColorMeanScope,
    DatasetContext, Mode,
};
use gradmix_core::raster::{LabelRaster, Rect, RgbRaster};
use gradmix_core::synth::{synth_dataset, SynthParams};
use gradmix_core::{MixSettings, Real};

#[derive(Parser)]
#[command(
    name = "gradmix",
    version,
    about = "Rebalance instance-annotated nucleus datasets by replacing major-class nuclei with rare-class nuclei through a distance-graded mixing mask"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment every sample of a dataset and write a self-contained output
    /// tree (originals + augmented samples, merged manifest, provenance
    /// log, count report).
    Augment(AugmentArgs),
    /// Print the per-class instance count table for a dataset.
    Stats(StatsArgs),
    /// Dump the intermediate artifacts (mask, partition, arrival field,
    /// before/after patches) for one explicit pair.
    Inspect(InspectArgs),
    /// Generate a synthetic dataset of non-overlapping ellipses.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Gradmix,
    Cutmix,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Max,
    Sum,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SwitchArg {
    On,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ColorAdjustArg {
    All,
    Inter,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Phi,
    AllNuclei,
}

impl From<ModeArg> for Mode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Gradmix => Mode::Gradmix,
            ModeArg::Cutmix => Mode::Cutmix,
        }
    }
}

impl From<NormArg> for NormMode {
    fn from(v: NormArg) -> Self {
        match v {
            NormArg::Max => NormMode::Max,
            NormArg::Sum => NormMode::Sum,
        }
    }
}

impl From<ColorAdjustArg> for ColorAdjust {
    fn from(v: ColorAdjustArg) -> Self {
        match v {
            ColorAdjustArg::All => ColorAdjust::All,
            ColorAdjustArg::Inter => ColorAdjust::InterOnly,
            ColorAdjustArg::Off => ColorAdjust::Off,
        }
    }
}

impl From<ScopeArg> for ColorMeanScope {
    fn from(v: ScopeArg) -> Self {
        match v {
            ScopeArg::Phi => ColorMeanScope::Phi,
            ScopeArg::AllNuclei => ColorMeanScope::AllNuclei,
        }
    }
}

fn default_cfg() -> AugmentationConfig {
    AugmentationConfig::default()
}

/// Tunables shared by `augment` and `inspect`. Defaults mirror
/// `AugmentationConfig::default()`; an explicit flag overrides the same
/// field of a `--config` file.
#[derive(Args)]
struct ConfigFlags {
    /// JSON config file with `AugmentationConfig` fields; explicit flags
    /// override it.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Run seed; echoed into the provenance log.
    #[arg(long, default_value_t = default_cfg().seed)]
    seed: u64,
    /// Replacement mode.
    #[arg(long, value_enum, default_value = "gradmix")]
    mode: ModeArg,
    /// Mask normalization over the blend region.
    #[arg(long, value_enum, default_value = "max")]
    norm: NormArg,
    /// Fraction of major-class nuclei replaced per image.
    #[arg(long, default_value_t = default_cfg().major_fraction)]
    major_fraction: f64,
    /// Probability of sourcing the rare nucleus from the same image.
    #[arg(long = "intra-prob", default_value_t = default_cfg().intra_image_prob)]
    intra_prob: f64,
    /// Rare eligibility bound: area < size-ratio * major area (strict).
    #[arg(long, default_value_t = default_cfg().size_ratio)]
    size_ratio: f64,
    /// 3x3 dilation passes applied to the major footprint.
    #[arg(long = "dilate-iters", default_value_t = default_cfg().dilation_iterations)]
    dilate_iters: u32,
    /// Estimator neighborhood radius for hole filling.
    #[arg(long, default_value_t = default_cfg().inpaint_radius)]
    inpaint_radius: u32,
    /// Keep other instances bitwise intact and reselect on overlap.
    #[arg(long, value_enum, default_value = "on")]
    protect_neighbors: SwitchArg,
    /// When to shift the source colors toward the target tone.
    #[arg(long, value_enum, default_value = "all")]
    color_adjust: ColorAdjustArg,
    /// Which target nuclei define the reference color mean.
    #[arg(long, value_enum, default_value = "phi")]
    color_mean_scope: ScopeArg,
    /// Redraws from a pool after a geometric skip before falling back.
    #[arg(long, default_value_t = default_cfg().max_reselect)]
    max_reselect: u32,
}

impl ConfigFlags {
    /// Resolve the effective config: file (or defaults), then every flag
    /// the user actually passed on the command line.
    fn resolve(&self, matches: &ArgMatches) -> anyhow::Result<AugmentationConfig> {
        let mut cfg = match &self.config {
            Some(path) => codec::read_json(path)
                .with_context(|| format!("reading config file {}", path.display()))?,
            None => AugmentationConfig::default(),
        };
        let explicit = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
        if explicit("seed") {
            cfg.seed = self.seed;
        }
        if explicit("mode") {
            cfg.mode = self.mode.into();
        }
        if explicit("norm") {
            cfg.norm_mode = self.norm.into();
        }
        if explicit("major_fraction") {
            cfg.major_fraction = self.major_fraction;
        }
        if explicit("intra_prob") {
            cfg.intra_image_prob = self.intra_prob;
        }
        if explicit("size_ratio") {
            cfg.size_ratio = self.size_ratio;
        }
        if explicit("dilate_iters") {
            cfg.dilation_iterations = self.dilate_iters;
        }
        if explicit("inpaint_radius") {
            cfg.inpaint_radius = self.inpaint_radius;
        }
        if explicit("protect_neighbors") {
            cfg.protect_neighbors = self.protect_neighbors == SwitchArg::On;
        }
        if explicit("color_adjust") {
            cfg.color_adjust = self.color_adjust.into();
        }
        if explicit("color_mean_scope") {
            cfg.color_mean_scope = self.color_mean_scope.into();
        }
        if explicit("max_reselect") {
            cfg.max_reselect = self.max_reselect;
        }
        if cfg.mode == Mode::Cutmix && explicit("norm") {
            eprintln!("warning: --norm is ignored in cutmix mode");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct AugmentArgs {
    /// Dataset manifest to augment.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Output directory for the augmented dataset.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads; the output is byte-identical for any count.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Args)]
struct StatsArgs {
    /// Dataset manifest to count.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Also write the report as JSON to this path.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset manifest.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Target sample id.
    #[arg(long, value_name = "SAMPLE")]
    target: String,
    /// Major instance id within the target sample.
    #[arg(long, value_name = "ID")]
    major: u32,
    /// Source sample id.
    #[arg(long, value_name = "SAMPLE")]
    source: String,
    /// Rare instance id within the source sample.
    #[arg(long, value_name = "ID")]
    rare: u32,
    /// Directory for the artifact dumps.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated dataset.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = SynthParams::default().samples)]
    samples: usize,
    #[arg(long, default_value_t = SynthParams::default().height)]
    height: u32,
    #[arg(long, default_value_t = SynthParams::default().width)]
    width: u32,
    #[arg(long, default_value_t = SynthParams::default().major_classes)]
    major_classes: u32,
    #[arg(long, default_value_t = SynthParams::default().rare_classes)]
    rare_classes: u32,
    #[arg(long, default_value_t = SynthParams::default().majors_per_image)]
    majors_per_image: u32,
    #[arg(long, default_value_t = SynthParams::default().rares_per_image)]
    rares_per_image: u32,
    #[arg(long, default_value_t = SynthParams::default().major_radius.0)]
    major_radius_min: u32,
    #[arg(long, default_value_t = SynthParams::default().major_radius.1)]
    major_radius_max: u32,
    #[arg(long, default_value_t = SynthParams::default().rare_radius.0)]
    rare_radius_min: u32,
    #[arg(long, default_value_t = SynthParams::default().rare_radius.1)]
    rare_radius_max: u32,
    /// Minimum Chebyshev gap between footprints (0 allows touching).
    #[arg(long, default_value_t = SynthParams::default().spacing)]
    spacing: u32,
    /// Keep-out border around the frame.
    #[arg(long, default_value_t = SynthParams::default().margin)]
    margin: u32,
    /// Per-pixel color jitter amplitude.
    #[arg(long, default_value_t = SynthParams::default().noise)]
    noise: u8,
    #[arg(long, default_value_t = SynthParams::default().max_attempts)]
    max_attempts: u32,
    #[arg(long, default_value_t = SynthParams::default().seed)]
    seed: u64,
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(err) => err.exit(),
    };
    let result = match cli.command {
        Command::Augment(args) => {
            let sub = matches.subcommand_matches("augment").expect("parsed");
            run_augment(&args, sub)
        }
        Command::Stats(args) => run_stats(&args),
        Command::Inspect(args) => {
            let sub = matches.subcommand_matches("inspect").expect("parsed");
            run_inspect(&args, sub)
        }
        Command::Synth(args) => run_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_augment(args: &AugmentArgs, matches: &ArgMatches) -> anyhow::Result<()> {
    let cfg = args.config.resolve(matches)?;
    let ctx = DatasetContext::load(&args.manifest)
        .with_context(|| format!("loading dataset {}", args.manifest.display()))?;
    let report = augment_dataset(&ctx, &cfg, &args.out, args.workers)?;
    print!("{}", report.stats.render());
    println!("applied: {}", report.applied);
    for (reason, count) in &report.skipped {
        println!("skipped:{reason}: {count}");
    }
    Ok(())
}

fn run_stats(args: &StatsArgs) -> anyhow::Result<()> {
    let ctx = DatasetContext::load(&args.manifest)
        .with_context(|| format!("loading dataset {}", args.manifest.display()))?;
    let report = dataset_stats(&ctx);
    print!("{}", report.render());
    if let Some(path) = &args.json {
        codec::write_json(path, &report)?;
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let params = SynthParams {
        samples: args.samples,
        height: args.height,
        width: args.width,
        major_classes: args.major_classes,
        rare_classes: args.rare_classes,
        majors_per_image: args.majors_per_image,
        rares_per_image: args.rares_per_image,
        major_radius: (args.major_radius_min, args.major_radius_max),
        rare_radius: (args.rare_radius_min, args.rare_radius_max),
        spacing: args.spacing,
        margin: args.margin,
        noise: args.noise,
        max_attempts: args.max_attempts,
        seed: args.seed,
    };
    let census = synth_dataset(&params, &args.out)?;
    println!("wrote {} samples to {}", params.samples, args.out.display());
    for (class, count) in &census {
        println!("class {class}: {count}");
    }
    Ok(())
}

fn find_record(
    ctx: &DatasetContext,
    sample_idx: usize,
    instance_id: u32,
) -> anyhow::Result<&NucleusRecord> {
    ctx.inventories[sample_idx]
        .iter()
        .find(|rec| rec.id == instance_id)
        .ok_or_else(|| {
            anyhow!(
                "instance {instance_id} not found in sample {}",
                ctx.samples[sample_idx].id
            )
        })
}

/// Scale a unit-range raster into the 16-bit grayscale encoding.
fn quantize_u16<FV: Fn(u32, u32) -> f64>(height: u32, width: u32, value: FV) -> LabelRaster {
    let mut out = LabelRaster::filled(height, width, 0);
    for r in 0..height {
        for c in 0..width {
            let v = (value(r, c) * 65535.0).round().clamp(0.0, 65535.0) as u32;
            out.set(r, c, v);
        }
    }
    out
}

fn run_inspect(args: &InspectArgs, matches: &ArgMatches) -> anyhow::Result<()> {
    let cfg = args.config.resolve(matches)?;
    let ctx = DatasetContext::load(&args.manifest)?;
    let target_idx = ctx.sample_index(&args.target)?;
    let source_idx = ctx.sample_index(&args.source)?;
    let major = find_record(&ctx, target_idx, args.major)?;
    let rare = find_record(&ctx, source_idx, args.rare)?;
    if !ctx.manifest.is_major(major.class_id) {
        eprintln!(
            "warning: instance {} has class {} which is not a major class",
            major.id, major.class_id
        );
    }
    if !ctx.manifest.is_rare(rare.class_id) {
        eprintln!(
            "warning: instance {} has class {} which is not a rare class",
            rare.id, rare.class_id
        );
    }

    let target = &ctx.samples[target_idx];
    let source = &ctx.samples[source_idx];
    // Reference mean: every major-class nucleus of the target stands in
    // for the sampled selection.
    let majors: Vec<&NucleusRecord> = ctx.inventories[target_idx]
        .iter()
        .filter(|rec| ctx.manifest.is_major(rec.class_id))
        .collect();
    let delta = if majors.is_empty() {
        eprintln!("warning: target has no major-class nuclei, skipping the color shift");
        [0.0; 3]
    } else {
        let mut coords: Vec<(u32, u32)> = Vec::new();
        for rec in &majors {
            coords.extend(rec.footprint.iter());
        }
        let reference = gradmix_core::pixelset::PixelSet::from_pixels(
            target.dims().0,
            target.dims().1,
            coords,
        )?;
        color_delta(target, &reference, source, rare, &cfg)?
    };
    let settings = MixSettings {
        dilation_iterations: cfg.dilation_iterations,
        inpaint_radius: cfg.inpaint_radius,
        norm_mode: cfg.norm_mode,
        protect_neighbors: cfg.protect_neighbors,
        color_delta: delta,
    };

    match cfg.mode {
        Mode::Gradmix => {
            inspect_gradmix(args, &ctx, target_idx, major, source_idx, rare, &settings, delta)
        }
        Mode::Cutmix => {
            inspect_cutmix(args, &ctx, target_idx, major, source_idx, rare, &settings, delta)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn inspect_gradmix(
    args: &InspectArgs,
    ctx: &DatasetContext,
    target_idx: usize,
    major: &NucleusRecord,
    source_idx: usize,
    rare: &NucleusRecord,
    settings: &MixSettings,
    delta: [Real; 3],
) -> anyhow::Result<()> {
    let target = &ctx.samples[target_idx];
    let source = &ctx.samples[source_idx];
    let traced = mixer::gradmix_pair_traced(target, major, source, rare, settings)?;
    let (edit, artifacts) = match traced {
        TracedOutcome::Applied(edit, artifacts) => (edit, artifacts),
        TracedOutcome::Skipped(reason) => bail!("pair skipped: {}", reason.as_str()),
    };
    let patch = edit.patch;

    let mask = &artifacts.mask;
    let mask_png = quantize_u16(patch.height, patch.width, |r, c| {
        mask.get(patch.top + r, patch.left + c)
    });
    codec::write_label_png(&args.out.join("mask.png"), &mask_png)?;

    let partition = &artifacts.partition;
    let mut partition_map = RgbRaster::filled(patch.height, patch.width, [0, 0, 0]);
    for (r, c) in partition.outside.iter() {
        partition_map.set(r - patch.top, c - patch.left, [70, 70, 200]);
    }
    for (r, c) in partition.blend.iter() {
        partition_map.set(r - patch.top, c - patch.left, [80, 190, 120]);
    }
    for (r, c) in partition.nucleus.iter() {
        partition_map.set(r - patch.top, c - patch.left, [220, 70, 70]);
    }
    codec::write_rgb_png(&args.out.join("partition.png"), &partition_map)?;

    let arrival = &artifacts.arrival;
    let t_max = arrival
        .as_slice()
        .iter()
        .fold(0.0f64, |acc, &t| acc.max(t))
        .max(f64::MIN_POSITIVE);
    let t_png = quantize_u16(arrival.height(), arrival.width(), |r, c| {
        arrival.get(r, c) / t_max
    });
    codec::write_label_png(&args.out.join("t_field.png"), &t_png)?;

    dump_before_after(args, target, &patch, &edit)?;
    write_pair_summary(args, target, major, source, rare, delta, Some(&patch), "applied")
}

#[allow(clippy::too_many_arguments)]
fn inspect_cutmix(
    args: &InspectArgs,
    ctx: &DatasetContext,
    target_idx: usize,
    major: &NucleusRecord,
    source_idx: usize,
    rare: &NucleusRecord,
    settings: &MixSettings,
    delta: [Real; 3],
) -> anyhow::Result<()> {
    let target = &ctx.samples[target_idx];
    let source = &ctx.samples[source_idx];
    let outcome = mixer::cutmix_pair(target, major, source, rare, settings)?;
    let edit = match outcome {
        mixer::MixOutcome::Applied(edit) => edit,
        mixer::MixOutcome::Skipped(reason) => bail!("pair skipped: {}", reason.as_str()),
    };
    let patch = edit.patch;
    dump_before_after(args, target, &patch, &edit)?;
    write_pair_summary(args, target, major, source, rare, delta, Some(&patch), "applied")
}

fn dump_before_after(
    args: &InspectArgs,
    target: &gradmix_core::dataset::Sample,
    patch: &Rect,
    edit: &mixer::PatchEdit,
) -> anyhow::Result<()> {
    let before = target.image.crop(patch);
    codec::write_rgb_png(&args.out.join("before.png"), &before)?;
    let edited = mixer::apply_edit(target, edit)?;
    let after = edited.image.crop(patch);
    codec::write_rgb_png(&args.out.join("after.png"), &after)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_pair_summary(
    args: &InspectArgs,
    target: &gradmix_core::dataset::Sample,
    major: &NucleusRecord,
    source: &gradmix_core::dataset::Sample,
    rare: &NucleusRecord,
    delta: [Real; 3],
    patch: Option<&Rect>,
    outcome: &str,
) -> anyhow::Result<()> {
    let offset = centroid_offset(&rare.footprint, &major.footprint)?;
    let summary = serde_json::json!({
        "target": target.id,
        "major_id": major.id,
        "major_area": major.area,
        "source": source.id,
        "rare_id": rare.id,
        "rare_area": rare.area,
        "translation": offset,
        "color_delta": delta,
        "patch": patch.map(|p| BTreeMap::from([
            ("top", p.top), ("left", p.left), ("height", p.height), ("width", p.width),
        ])),
        "outcome": outcome,
    });
    codec::write_atomic(
        &args.out.join("pair.json"),
        format!("{summary:#}\n").as_bytes(),
    )?;
    Ok(())
}
