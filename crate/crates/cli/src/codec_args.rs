//! Codec settings from a preset, an optional config file and flags, applied
//! in that order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use tdc_compress::codec::{BinningMode, ChannelMode, CodecConfig, CoderKind};
use tdc_compress::event_model::ValueType;

#[derive(Debug, Clone, Default, Args)]
pub struct CodecArgs {
    /// Starting preset: fixed, huffman-simple, tans-adaptive,
    /// tans-adaptive-per-channel or expgolomb-direct.
    #[arg(long)]
    pub preset: Option<String>,
    /// File of `key=value` lines or a JSON object; keys are the long flag
    /// names without dashes in front.
    #[arg(long, value_name = "FILE")]
    pub config_file: Option<PathBuf>,
    /// shared, per-channel or classed:K
    #[arg(long)]
    pub channel_mode: Option<String>,
    #[arg(long)]
    pub frame_size: Option<u32>,
    /// Do not store per-event reference times.
    #[arg(long)]
    pub no_ref: bool,
    /// Fail on values outside the binning tables instead of escaping them.
    #[arg(long)]
    pub no_escape: bool,
    /// tANS table log for every tANS-coded value type.
    #[arg(long)]
    pub table_log: Option<u8>,
    /// direct, simple:LOW, top:TOP or adaptive:MINVAL
    #[arg(long)]
    pub start_binning: Option<String>,
    #[arg(long)]
    pub width_binning: Option<String>,
    #[arg(long)]
    pub distance_binning: Option<String>,
    /// tans, huffman, exp-golomb or fixed
    #[arg(long)]
    pub pulses_coder: Option<String>,
    #[arg(long)]
    pub start_coder: Option<String>,
    #[arg(long)]
    pub width_coder: Option<String>,
    #[arg(long)]
    pub distance_coder: Option<String>,
}

const KEYS: [&str; 14] = [
    "preset",
    "channel-mode",
    "frame-size",
    "no-ref",
    "no-escape",
    "table-log",
    "start-binning",
    "width-binning",
    "distance-binning",
    "pulses-coder",
    "start-coder",
    "width-coder",
    "distance-coder",
    "max-width",
];

/// Reads `key=value` lines (`#` comments) or a flat JSON object.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let json: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for (k, v) in json {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            map.insert(k.replace('_', "-"), v);
        }
    } else {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), n + 1);
            };
            map.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
    }
    if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        bail!("{}: unknown key '{k}'", path.display());
    }
    Ok(map)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: expected true or false, got '{v}'"),
    }
}

fn apply(config: &mut CodecConfig, key: &str, v: &str) -> Result<()> {
    let stream = |name: &str| match name {
        "pulses" => ValueType::Pulses,
        "start" => ValueType::Start,
        "width" => ValueType::Width,
        _ => ValueType::Distance,
    };
    match key {
        "channel-mode" => config.channel_mode = v.parse::<ChannelMode>()?,
        "frame-size" => config.frame_size = v.parse().with_context(|| format!("frame-size '{v}'"))?,
        "no-ref" => config.store_ref = !parse_bool(key, v)?,
        "no-escape" => config.escape = !parse_bool(key, v)?,
        "table-log" => {
            let r: u8 = v.parse().with_context(|| format!("table-log '{v}'"))?;
            for kind in ValueType::ALL {
                let s = config.stream_mut(kind);
                if s.coder == CoderKind::Tans {
                    s.table_log = Some(r);
                }
            }
        }
        k if k.ends_with("-binning") => {
            config.stream_mut(stream(k.trim_end_matches("-binning"))).binning = v.parse::<BinningMode>()?
        }
        k if k.ends_with("-coder") => {
            let s = config.stream_mut(stream(k.trim_end_matches("-coder")));
            s.coder = v.parse::<CoderKind>()?;
            if s.coder != CoderKind::Tans {
                s.table_log = None;
            }
        }
        _ => {}
    }
    Ok(())
}

impl CodecArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        // coders before binnings and the table log, which depend on them
        push("pulses-coder", self.pulses_coder.clone());
        push("start-coder", self.start_coder.clone());
        push("width-coder", self.width_coder.clone());
        push("distance-coder", self.distance_coder.clone());
        push("start-binning", self.start_binning.clone());
        push("width-binning", self.width_binning.clone());
        push("distance-binning", self.distance_binning.clone());
        push("channel-mode", self.channel_mode.clone());
        push("frame-size", self.frame_size.map(|v| v.to_string()));
        push("table-log", self.table_log.map(|v| v.to_string()));
        push("no-ref", self.no_ref.then(|| "true".into()));
        push("no-escape", self.no_escape.then(|| "true".into()));
        out
    }

    /// Preset, then file keys, then flags; the result is validated.
    pub fn resolve(&self) -> Result<(CodecConfig, Option<u64>)> {
        let file = match &self.config_file {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let preset = self
            .preset
            .as_deref()
            .or(file.get("preset").map(String::as_str))
            .unwrap_or("tans-adaptive");
        let mut config = CodecConfig::preset(preset)?;
        let order = |k: &str| KEYS.iter().position(|x| *x == k).unwrap_or(0);
        let mut file_pairs: Vec<(&String, &String)> = file.iter().collect();
        // same dependency order as flags: coders first
        file_pairs.sort_by_key(|(k, _)| (!k.ends_with("-coder"), order(k)));
        for (k, v) in file_pairs {
            apply(&mut config, k, v)?;
        }
        for (k, v) in self.flag_pairs() {
            apply(&mut config, k, &v)?;
        }
        config.validate()?;
        let max_width = file
            .get("max-width")
            .map(|v| v.parse::<u64>().with_context(|| format!("max-width '{v}'")))
            .transpose()?;
        Ok((config, max_width))
    }
}

/// A report entry: preset name or config file path.
pub fn report_entry(spec: &str) -> Result<(String, CodecConfig)> {
    if let Ok(config) = CodecConfig::preset(spec) {
        return Ok((spec.to_string(), config));
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!("'{spec}' is neither a preset nor a config file");
    }
    let args = CodecArgs {
        config_file: Some(path.to_path_buf()),
        ..CodecArgs::default()
    };
    let name = path.file_stem().map_or(spec.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, args.resolve()?.0))
}
