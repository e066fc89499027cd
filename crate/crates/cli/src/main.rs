//! `tdcz`: generate, analyze, build tables for, compress, decompress and
//! report on TDC event streams.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error.

mod codec_args;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use tdc_compress::codec::{
    build_codebook, compress_frame, decode_frame_checked, default_ladder, deserialize_codebook, report_cost,
    serialize_codebook, write_report_csv, write_report_json, CodeBook, ContainerReader, ContainerWriter,
};
use tdc_compress::datagen::{generate_events, GenParams, CALIBRATED_SEED};
use tdc_compress::event_model::{
    fixed_cost, ingest_legacy, read_jsonl, relative_to_legacy, to_legacy_event, write_jsonl, FilterConfig,
    LegacyWriter, RelativeEvent, ValueType, DEFAULT_MAX_WIDTH,
};
use tdc_compress::selftest::{run_selftest, SelftestOptions};
use tdc_compress::stats::{empirical_cdf, histogram, write_distribution_csv, EmpiricalCdf, MAX_PLOT_POINTS};

use codec_args::{report_entry, CodecArgs};

#[derive(Debug, Parser)]
#[command(name = "tdcz", version, about = "Lossless compression of TDC event streams")]
struct Cli {
    /// Worker threads for frame-parallel work; 0 uses every core.
    #[arg(long, global = true, env = "TDC_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, clap::Args)]
struct InputArgs {
    /// Legacy word stream, or JSON lines of relative events (`.jsonl`).
    input: PathBuf,
    /// Channel count for legacy input.
    #[arg(long, default_value_t = 48)]
    channels: usize,
    /// Pulses wider than this many ticks are rejected [default: 2^20].
    #[arg(long)]
    max_width: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus as legacy words plus a JSON lines dump.
    Gen {
        #[arg(long)]
        events: usize,
        #[arg(long, default_value_t = 48)]
        channels: usize,
        #[arg(long, default_value_t = CALIBRATED_SEED)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// JSON lines dump [default: OUTPUT with extension .jsonl].
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[arg(long, conflicts_with = "jsonl")]
        no_jsonl: bool,
    },
    /// Pulses probabilities and start/width/distance CDFs.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write one width CDF per channel.
        #[arg(long)]
        per_channel: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Train a codebook on a corpus.
    Build {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        codec: Box<CodecArgs>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compress a corpus with a codebook into a container.
    Compress {
        /// Legacy word stream or `.jsonl` relative events.
        input: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        max_width: Option<u64>,
    },
    /// Expand a container back to legacy words (or `.jsonl`).
    Decompress {
        input: PathBuf,
        /// Must match the codebook stored in the container.
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Bits/event by value type for a list of configs.
    Report {
        #[command(flatten)]
        input: InputArgs,
        /// Presets or config files, comma separated or repeated
        /// [default: fixed,huffman-simple,tans-adaptive,tans-adaptive-per-channel].
        #[arg(long = "config", value_delimiter = ',')]
        configs: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the worked numeric examples.
    Selftest {
        #[arg(long, hide = true)]
        tamper: bool,
    },
}

/// Bad flags or settings, reported with exit code 2.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e).into())
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn filter_config(max_width: Option<u64>) -> FilterConfig {
    FilterConfig {
        max_width: max_width.unwrap_or(DEFAULT_MAX_WIDTH),
    }
}

/// Reads a corpus; rejects and emptied events go to `sidecar` when given.
fn load_events(path: &Path, channels: usize, filter: &FilterConfig, sidecar: Option<&Path>) -> Result<Vec<RelativeEvent>> {
    if is_jsonl(path) {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let events = read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        for (i, e) in events.iter().enumerate() {
            e.validate().with_context(|| format!("{}: event {i}", path.display()))?;
        }
        return Ok(events);
    }
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let ingested = ingest_legacy(&bytes, channels, filter).with_context(|| format!("parsing {}", path.display()))?;
    if !ingested.rejects.is_empty() || !ingested.empty_events.is_empty() {
        eprintln!(
            "{}: {} rejected hits, {} events left empty",
            path.display(),
            ingested.rejects.len(),
            ingested.empty_events.len()
        );
    }
    if let Some(sidecar) = sidecar.filter(|_| !ingested.rejects.is_empty()) {
        let mut w = BufWriter::new(File::create(sidecar)?);
        for r in &ingested.rejects {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(ingested.events)
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

fn cmd_gen(events: usize, channels: usize, seed: u64, output: &Path, jsonl: Option<PathBuf>, no_jsonl: bool) -> Result<()> {
    let params = GenParams {
        channel_count: channels,
        ..GenParams::with_seed(seed)
    };
    usage(params.validate().map_err(Into::into))?;
    if events == 0 {
        return Err(UsageError(anyhow::anyhow!("--events must be at least 1")).into());
    }
    let corpus = generate_events(&params, events)?;
    fs::write(output, relative_to_legacy(&corpus)?).with_context(|| format!("writing {}", output.display()))?;
    if !no_jsonl {
        let path = jsonl.unwrap_or_else(|| output.with_extension("jsonl"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
        write_jsonl(&corpus, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_cdf(cdf: Option<EmpiricalCdf>, path: &Path, format: Format) -> Result<()> {
    let cdf = cdf.map(|c| c.downsample(MAX_PLOT_POINTS)).unwrap_or(EmpiricalCdf { points: Vec::new() });
    let w = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    match format {
        Format::Csv => cdf.write_csv(w)?,
        Format::Json => cdf.write_json(w)?,
    }
    Ok(())
}

fn cmd_analyze(input: &InputArgs, output: &Path, per_channel: bool, format: Format) -> Result<()> {
    let events = load_events(&input.input, input.channels, &filter_config(input.max_width), None)?;
    if events.is_empty() {
        bail!("{}: no events", input.input.display());
    }
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let ext = format.ext();

    let pulses: Vec<u64> = events.iter().flat_map(|e| e.values(ValueType::Pulses)).collect();
    let bound = pulses.iter().max().map_or(1, |&m| m as usize + 1);
    let dist = histogram(&pulses, bound)?;
    let path = output.join(format!("pulses.{ext}"));
    let w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Csv => write_distribution_csv(&dist, w)?,
        Format::Json => serde_json::to_writer(w, &dist.probs())?,
    }

    for kind in [ValueType::Start, ValueType::Width, ValueType::Distance] {
        let values: Vec<u64> = events.iter().flat_map(|e| e.values(kind)).collect();
        let cdf = empirical_cdf(&values).ok();
        write_cdf(cdf, &output.join(format!("{}_cdf.{ext}", kind.name())), format)?;
    }

    let costs = fixed_cost(&events);
    let path = output.join(format!("fixed_cost.{ext}"));
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Csv => {
            writeln!(w, "type,max,bits,values_per_event,bits_per_event")?;
            for c in &costs {
                writeln!(w, "{},{},{},{},{}", c.kind.name(), c.max, c.bits, c.values_per_event, c.bits_per_event)?;
            }
        }
        Format::Json => serde_json::to_writer_pretty(&mut w, &costs)?,
    }
    w.flush()?;

    if per_channel {
        let channels = events[0].channels.len();
        for c in 0..channels {
            let widths: Vec<u64> = events.iter().flat_map(|e| e.channels[c].widths.iter().copied()).collect();
            write_cdf(empirical_cdf(&widths).ok(), &output.join(format!("width_cdf_ch{c:03}.{ext}")), format)?;
        }
    }
    Ok(())
}

fn cmd_build(input: &InputArgs, codec: &CodecArgs, output: &Path) -> Result<()> {
    let (config, file_max_width) = usage(codec.resolve())?;
    let filter = filter_config(input.max_width.or(file_max_width));
    let events = load_events(&input.input, input.channels, &filter, None)?;
    let cb = build_codebook(&events, &config)?;
    fs::write(output, serialize_codebook(&cb)?).with_context(|| format!("writing {}", output.display()))?;
    eprintln!(
        "codebook: {} channels, {} classes, {} events",
        cb.channel_count(),
        cb.class_count(),
        events.len()
    );
    Ok(())
}

fn read_codebook(path: &Path) -> Result<CodeBook> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_codebook(&bytes).with_context(|| format!("loading codebook {}", path.display()))
}

/// Frames handled together: one per worker.
fn batch_frames() -> usize {
    rayon::current_num_threads().max(1)
}

fn cmd_compress(input: &Path, codebook: &Path, output: &Path, max_width: Option<u64>) -> Result<()> {
    let cb = read_codebook(codebook)?;
    let sidecar = with_extension(output, ".rejects.jsonl");
    let events = load_events(input, cb.channel_count(), &filter_config(max_width), Some(&sidecar))?;
    let frame_size = cb.config().frame_size as usize;
    let chunks: Vec<&[RelativeEvent]> = events.chunks(frame_size).collect();
    let file = File::create(output).with_context(|| format!("writing {}", output.display()))?;
    let mut writer = ContainerWriter::new(BufWriter::new(file), &cb, chunks.len())?;
    let mut bytes_out = 0usize;
    for batch in chunks.chunks(batch_frames()) {
        let frames = batch
            .par_iter()
            .map(|chunk| compress_frame(chunk, &cb))
            .collect::<tdc_compress::Result<Vec<_>>>()?;
        for (bytes, stats) in frames {
            writer.write_frame(&bytes, stats.events)?;
            bytes_out += bytes.len();
        }
    }
    writer.finish()?.flush()?;
    if !events.is_empty() {
        eprintln!(
            "{} events, {} frames, {:.1} payload bits/event",
            events.len(),
            chunks.len(),
            bytes_out as f64 * 8.0 / events.len() as f64
        );
    }
    Ok(())
}

fn cmd_decompress(input: &Path, codebook: Option<&Path>, output: &Path) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut reader = ContainerReader::open(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
    if let Some(path) = codebook {
        if read_codebook(path)? != *reader.codebook() {
            bail!("codebook {} does not match the one in {}", path.display(), input.display());
        }
    }
    let jsonl = is_jsonl(output);
    let mut out = BufWriter::new(File::create(output).with_context(|| format!("writing {}", output.display()))?);
    let mut legacy = LegacyWriter::new();
    let mut seq = 0u32;
    let indices: Vec<usize> = (0..reader.frame_count()).collect();
    for batch in indices.chunks(batch_frames()) {
        let raw = batch
            .iter()
            .map(|&i| reader.frame_bytes(i).map(|b| (i, b)))
            .collect::<tdc_compress::Result<Vec<_>>>()?;
        let cb = reader.codebook();
        let dir = reader.directory();
        let decoded = raw
            .par_iter()
            .map(|(i, b)| decode_frame_checked(b, cb, *i, dir[*i].events))
            .collect::<tdc_compress::Result<Vec<_>>>()?;
        for events in decoded {
            if jsonl {
                write_jsonl(&events, &mut out)?;
                continue;
            }
            for e in &events {
                legacy.write_event(&to_legacy_event(e, seq)?, &mut out)?;
                seq += 1;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_report(input: &InputArgs, configs: &[String], format: Format, output: Option<&Path>) -> Result<()> {
    let list = if configs.is_empty() {
        default_ladder()
    } else {
        usage(configs.iter().map(|c| report_entry(c)).collect())?
    };
    let events = load_events(&input.input, input.channels, &filter_config(input.max_width), None)?;
    let reports = report_cost(&events, &list)?;
    let mut sink: Box<dyn Write> = match output {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("writing {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => write_report_csv(&reports, &mut sink)?,
        Format::Json => write_report_json(&reports, &mut sink)?,
    }
    sink.flush()?;
    if let Some(r) = reports.first() {
        eprintln!("note: {}", r.gaps);
    }
    Ok(())
}

fn cmd_selftest(tamper: bool) -> Result<bool> {
    let checks = run_selftest(SelftestOptions {
        tamper_decoding_table: tamper,
    });
    let mut out = std::io::stdout().lock();
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(failed == 0)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Gen {
            events,
            channels,
            seed,
            output,
            jsonl,
            no_jsonl,
        } => cmd_gen(*events, *channels, *seed, output, jsonl.clone(), *no_jsonl)?,
        Command::Analyze {
            input,
            output,
            per_channel,
            format,
        } => cmd_analyze(input, output, *per_channel, *format)?,
        Command::Build { input, codec, output } => cmd_build(input, codec, output)?,
        Command::Compress {
            input,
            codebook,
            output,
            max_width,
        } => cmd_compress(input, codebook, output, *max_width)?,
        Command::Decompress {
            input,
            codebook,
            output,
        } => cmd_decompress(input, codebook.as_deref(), output)?,
        Command::Report {
            input,
            configs,
            format,
            output,
        } => cmd_report(input, configs, *format, output.as_deref())?,
        Command::Selftest { tamper } => return cmd_selftest(*tamper),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(UsageError(e.into()).into()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
