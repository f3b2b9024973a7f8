use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Gswin, ModelConfig, StageLayout};
use crate::sgu::{SguParams, WindowGrid};

pub const FLOP_CONVENTION: &str = "1 MAC = 1 FLOP; projections, spatial mixing, gates and norms counted; bias adds and GELU not counted";

/// How shifted windows are evaluated when counting FLOPs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftStrategy {
    /// Every group mixes only its own tokens.
    PaddingFree,
    /// Every window is padded to full size first.
    ZeroPadding,
}

impl ShiftStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftStrategy::PaddingFree => "padding-free",
            ShiftStrategy::ZeroPadding => "zero-padding",
        }
    }
}

impl fmt::Display for ShiftStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "padding-free" => Ok(ShiftStrategy::PaddingFree),
            "zero-padding" => Ok(ShiftStrategy::ZeroPadding),
            other => Err(Error::Invalid(format!("unknown strategy {other:?}; use padding-free or zero-padding"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostEntry {
    pub module: String,
    pub params: u64,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub entries: Vec<CostEntry>,
    pub total_params: u64,
    /// Zero unless produced by [`count_flops`].
    pub total_flops: u64,
    pub resolution: usize,
    pub strategy: Option<ShiftStrategy>,
    pub convention: &'static str,
}

impl CostReport {
    fn from_entries(entries: Vec<CostEntry>, resolution: usize, strategy: Option<ShiftStrategy>) -> Self {
        CostReport {
            total_params: entries.iter().map(|e| e.params).sum(),
            total_flops: entries.iter().map(|e| e.flops).sum(),
            entries,
            resolution,
            strategy,
            convention: FLOP_CONVENTION,
        }
    }

    pub fn entry(&self, module: &str) -> Option<&CostEntry> {
        self.entries.iter().find(|e| e.module == module)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table with one row per module and a total row.
    pub fn to_table(&self) -> String {
        let with_flops = self.strategy.is_some();
        let width = self.entries.iter().map(|e| e.module.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        if with_flops {
            out += &format!("{:<width$}  {:>12}  {:>16}\n", "module", "params", "flops");
        } else {
            out += &format!("{:<width$}  {:>12}\n", "module", "params");
        }
        let mut row = |name: &str, p: u64, f: u64| {
            if with_flops {
                out += &format!("{name:<width$}  {p:>12}  {f:>16}\n");
            } else {
                out += &format!("{name:<width$}  {p:>12}\n");
            }
        };
        for e in &self.entries {
            row(&e.module, e.params, e.flops);
        }
        row("total", self.total_params, self.total_flops);
        out
    }
}

/// Groups a parameter name into its report row:
/// `stages.2.blocks.7.sgu.w_win` belongs to `stages.2.sgu`.
pub fn module_key(name: &str) -> String {
    let parts: Vec<&str> = name.split('.').collect();
    match parts.as_slice() {
        ["stages", s, "blocks", _, part, ..] => format!("stages.{s}.{part}"),
        ["stages", s, "merge", ..] => format!("stages.{s}.merge"),
        [first, ..] => first.to_string(),
        [] => String::new(),
    }
}

fn module_order(cfg: &ModelConfig) -> Vec<String> {
    let mut keys = vec!["embed".to_string()];
    for s in cfg.stages() {
        for part in ["norm", "proj_in", "sgu", "proj_out"] {
            keys.push(format!("stages.{}.{part}", s.index));
        }
        if s.merges {
            keys.push(format!("stages.{}.merge", s.index));
        }
    }
    keys.push("head_norm".into());
    keys.push("head".into());
    keys
}

fn linear(input: usize, output: usize) -> u64 {
    (input * output + output) as u64
}

fn closed_form(cfg: &ModelConfig) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    let c = cfg.base_channels;
    let p = cfg.patch_size;
    m.insert("embed".to_string(), linear(p * p * 3, c) + 2 * c as u64);
    for s in cfg.stages() {
        let d = s.dim;
        let hidden = cfg.expansion * d;
        let n = s.depth as u64;
        let key = |part: &str| format!("stages.{}.{part}", s.index);
        m.insert(key("norm"), n * 2 * d as u64);
        m.insert(key("proj_in"), n * linear(d, hidden));
        let sgu = SguParams::param_count((s.window, s.window), cfg.heads, cfg.relative_bias) as u64;
        m.insert(key("sgu"), n * sgu);
        m.insert(key("proj_out"), n * linear(hidden / 2, d));
        if s.merges {
            m.insert(key("merge"), 2 * 4 * d as u64 + linear(4 * d, 2 * d));
        }
    }
    let last = cfg.stage_dim(cfg.stage_count() - 1);
    m.insert("head_norm".into(), 2 * last as u64);
    m.insert("head".into(), linear(last, cfg.num_classes));
    m
}

/// Closed-form parameter count; no model is built.
pub fn count_params(cfg: &ModelConfig) -> Result<CostReport> {
    cfg.validate()?;
    let map = closed_form(cfg);
    let entries = module_order(cfg)
        .into_iter()
        .map(|k| CostEntry { params: map[&k], module: k, flops: 0 })
        .collect();
    Ok(CostReport::from_entries(entries, cfg.image_size, None))
}

/// Parameter count by walking an instantiated model, grouped the same way as [`count_params`].
pub fn enumerate_params(model: &Gswin) -> CostReport {
    let mut map: BTreeMap<String, u64> = BTreeMap::new();
    for p in model.parameters() {
        *map.entry(module_key(p.name())).or_default() += p.numel() as u64;
    }
    let mut entries: Vec<CostEntry> = module_order(model.config())
        .into_iter()
        .map(|k| CostEntry { params: map.remove(&k).unwrap_or(0), module: k, flops: 0 })
        .collect();
    entries.extend(map.into_iter().map(|(k, v)| CostEntry { module: k, params: v, flops: 0 }));
    CostReport::from_entries(entries, model.config().image_size, None)
}

fn mixing_flops(layout: &StageLayout, shifted: bool, channels: usize, strategy: ShiftStrategy) -> Result<u64> {
    let image = (layout.resolution, layout.resolution);
    let window = (layout.window, layout.window);
    let grid = if shifted { WindowGrid::shifted(image, window)? } else { WindowGrid::unshifted(image, window)? };
    let per_channel: usize = match strategy {
        ShiftStrategy::PaddingFree => grid.groups().iter().map(|g| g.len() * g.tokens_per_window().pow(2)).sum(),
        ShiftStrategy::ZeroPadding => grid.padded_window_count() * (layout.window * layout.window).pow(2),
    };
    Ok((per_channel * channels) as u64)
}

/// Multiply-accumulate count of one forward pass on a `resolution²` image.
/// Independent of the head count by construction: heads only partition channels.
pub fn count_flops(cfg: &ModelConfig, resolution: usize, strategy: ShiftStrategy) -> Result<CostReport> {
    let cfg = ModelConfig { image_size: resolution, ..cfg.clone() };
    cfg.validate()?;
    let mut map = closed_form(&cfg);
    let mut flops: BTreeMap<String, u64> = BTreeMap::new();
    let p = cfg.patch_size;
    let tokens0 = (resolution / p).pow(2) as u64;
    let c = cfg.base_channels as u64;
    flops.insert("embed".into(), tokens0 * (p * p * 3) as u64 * c + tokens0 * c);
    let layouts = cfg.stages();
    for s in &layouts {
        let n = (s.resolution * s.resolution) as u64;
        let d = s.dim as u64;
        let gate = (cfg.expansion / 2 * s.dim) as u64;
        let key = |part: &str| format!("stages.{}.{part}", s.index);
        let blocks = s.depth as u64;
        flops.insert(key("norm"), blocks * n * d);
        flops.insert(key("proj_in"), blocks * n * d * 2 * gate);
        flops.insert(key("proj_out"), blocks * n * gate * d);
        let mut mixing = 0;
        for b in 0..s.depth {
            mixing += mixing_flops(s, s.block_shifted(b), gate as usize, strategy)? + n * gate;
        }
        flops.insert(key("sgu"), mixing);
        if s.merges {
            let merged = n / 4;
            flops.insert(key("merge"), merged * 4 * d + merged * 4 * d * 2 * d);
        }
    }
    let last = layouts.last().expect("validated config has a stage");
    let (n, d) = ((last.resolution * last.resolution) as u64, last.dim as u64);
    flops.insert("head_norm".into(), n * d);
    flops.insert("head".into(), n * d + d * cfg.num_classes as u64);
    let entries = module_order(&cfg)
        .into_iter()
        .map(|k| CostEntry { params: map.remove(&k).unwrap_or(0), flops: flops[&k], module: k })
        .collect();
    Ok(CostReport::from_entries(entries, resolution, Some(strategy)))
}
