//! The `gswin` command line.
//!
//! Output is one `key=value` line per fact (several pairs may share a line),
//! or a single JSON document with `--json`. Exit codes: 0 success, 1 usage,
//! 2 invalid input or I/O failure, 3 a check did not pass.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::analysis::{count_flops, count_params, enumerate_params, export_weight_maps, CostReport, ShiftStrategy};
use crate::error::{Error, Result};
use crate::gradcheck::{run_scope, Scope};
use crate::model::{checkpoint, preset, presets, Gswin, ModelConfig};
use crate::sgu::{check_equivalence, equivalence_case, EQUIV_TOL};
use crate::train::{RunConfig, SyntheticTask, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "gswin", version, about = "Windowed spatial-gating backbones: sizes, FLOPs, checks and training")]
struct Cli {
    /// Emit one JSON document instead of key=value lines.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct ModelArgs {
    /// Preset name (see `presets`).
    #[arg(long, default_value = "gswin-t", conflicts_with = "config")]
    model: String,
    /// Model config file; a training config's [model] table also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the head count.
    #[arg(long)]
    heads: Option<usize>,
    /// Drop the relative positional bias.
    #[arg(long)]
    no_rel_bias: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parameter count per module.
    Count {
        #[command(flatten)]
        model: ModelArgs,
        /// Also instantiate the model and compare against its enumerated parameters.
        #[arg(long)]
        verify: bool,
    },
    /// Multiply-accumulate count of one forward pass.
    Flops {
        #[command(flatten)]
        model: ModelArgs,
        /// Input side in pixels; defaults to the config's image size.
        #[arg(long)]
        res: Option<usize>,
        /// padding-free or zero-padding.
        #[arg(long, default_value = "padding-free")]
        strategy: String,
    },
    /// Finite-difference gradient checks.
    Gradcheck {
        /// ops, block or model.
        #[arg(long, default_value = "ops")]
        scope: String,
        #[arg(long, env = "GSWIN_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Compare the padding-free shifted gate with the zero-padded reference.
    Equiv {
        /// Number of random cases.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, env = "GSWIN_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Train on synthetic gratings.
    Train {
        /// Training config with [model], [train] and [task] tables; all optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the step count; the warm-up keeps its share of the run.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the seed.
        #[arg(long, env = "GSWIN_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        /// Save the trained weights here.
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Write one head's effective spatial weights as CSV and PGM tiles.
    ExportWeights {
        #[arg(long)]
        ckpt: PathBuf,
        /// Zero-based stage index.
        #[arg(long)]
        stage: usize,
        /// Zero-based block index within the stage.
        #[arg(long)]
        layer: usize,
        /// Zero-based head index.
        #[arg(long)]
        head: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List the model presets.
    Presets,
}

/// Loads a model config, accepting either a bare model file or a training file with a `[model]` table.
pub fn load_model_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    let value: toml::Table = toml::from_str(&text)?;
    if value.get("model").is_some_and(toml::Value::is_table) {
        Ok(RunConfig::from_toml_str(&text)?.model)
    } else {
        ModelConfig::from_toml_str(&text)
    }
}

impl ModelArgs {
    fn resolve(&self) -> Result<(String, ModelConfig)> {
        let (label, mut cfg) = match &self.config {
            Some(path) => (path.display().to_string(), load_model_config(path)?),
            None => {
                let cfg = preset(&self.model).ok_or_else(|| {
                    let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
                    Error::Invalid(format!(
                        "unknown model {:?}; known: {}, gswin-tiny, gswin-micro",
                        self.model,
                        names.join(", ")
                    ))
                })?;
                (self.model.clone(), cfg)
            }
        };
        if let Some(k) = self.heads {
            cfg.heads = k;
        }
        if self.no_rel_bias {
            cfg.relative_bias = false;
        }
        cfg.validate()?;
        Ok((label, cfg))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged { .. } => EXIT_CHECK_FAILED,
        _ => EXIT_INVALID,
    }
}

struct Out<'a> {
    w: &'a mut dyn Write,
    json: bool,
}

impl Out<'_> {
    fn line(&mut self, text: impl AsRef<str>) {
        if !self.json {
            let _ = writeln!(self.w, "{}", text.as_ref());
        }
    }

    fn doc(&mut self, value: serde_json::Value) {
        if self.json {
            let _ = writeln!(self.w, "{}", serde_json::to_string_pretty(&value).expect("json"));
        }
    }
}

/// Parses `argv` (program name first) and runs the command, writing to stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut o = Out { w: out, json: cli.json };
    match dispatch(cli.command, &mut o) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, o: &mut Out) -> Result<i32> {
    match cmd {
        Command::Count { model, verify } => cmd_count(&model, verify, o),
        Command::Flops { model, res, strategy } => cmd_flops(&model, res, &strategy, o),
        Command::Gradcheck { scope, seed } => cmd_gradcheck(&scope, seed, o),
        Command::Equiv { seeds, seed } => cmd_equiv(seeds, seed, o),
        Command::Train { config, steps, seed, metrics, ckpt } => {
            cmd_train(config.as_deref(), steps, seed, &metrics, ckpt.as_deref(), o)
        }
        Command::ExportWeights { ckpt, stage, layer, head, model, out } => {
            cmd_export(&ckpt, stage, layer, head, &model, &out, o)
        }
        Command::Presets => Ok(cmd_presets(o)),
    }
}

fn report_lines(r: &CostReport, o: &mut Out) {
    for e in &r.entries {
        if r.strategy.is_some() {
            o.line(format!("module={} params={} flops={}", e.module, e.params, e.flops));
        } else {
            o.line(format!("module={} params={}", e.module, e.params));
        }
    }
}

fn cmd_count(args: &ModelArgs, verify: bool, o: &mut Out) -> Result<i32> {
    let (label, cfg) = args.resolve()?;
    let report = count_params(&cfg)?;
    let mut code = EXIT_OK;
    let mut enumerated = None;
    if verify {
        let model = Gswin::new(&cfg, 0)?;
        let e = enumerate_params(&model);
        if e.entries != report.entries {
            code = EXIT_CHECK_FAILED;
        }
        enumerated = Some(e.total_params);
    }
    o.line(format!("model={label}"));
    o.line(format!("params={}", report.total_params));
    o.line(format!("params_m={:.2}", report.total_params as f64 / 1e6));
    if let Some(n) = enumerated {
        o.line(format!("enumerated={n}"));
        o.line(format!("match={}", code == EXIT_OK));
    }
    report_lines(&report, o);
    o.doc(json!({ "model": label, "report": report, "enumerated": enumerated }));
    Ok(code)
}

fn cmd_flops(args: &ModelArgs, res: Option<usize>, strategy: &str, o: &mut Out) -> Result<i32> {
    let (label, cfg) = args.resolve()?;
    let strategy: ShiftStrategy = strategy.parse()?;
    let res = res.unwrap_or(cfg.image_size);
    let report = count_flops(&cfg, res, strategy)?;
    o.line(format!("model={label}"));
    o.line(format!("resolution={res}"));
    o.line(format!("strategy={strategy}"));
    o.line(format!("flops={}", report.total_flops));
    o.line(format!("gflops={:.3}", report.total_flops as f64 / 1e9));
    o.line(format!("params={}", report.total_params));
    o.line(format!("convention={}", report.convention));
    report_lines(&report, o);
    o.doc(json!({ "model": label, "report": report }));
    Ok(EXIT_OK)
}

fn cmd_gradcheck(scope: &str, seed: u64, o: &mut Out) -> Result<i32> {
    let scope: Scope = scope.parse()?;
    let outcomes = run_scope(scope, seed)?;
    let passed = outcomes.iter().filter(|c| c.passed()).count();
    let mut rows = Vec::new();
    for c in &outcomes {
        let status = if c.passed() { "ok" } else { "fail" };
        o.line(format!(
            "check={} checked={} max_rel_err={:.3e} max_abs_err={:.3e} tol={:e} status={status}",
            c.name, c.report.checked, c.report.max_rel_err, c.report.max_abs_err, c.tolerance
        ));
        rows.push(json!({
            "name": c.name,
            "checked": c.report.checked,
            "max_rel_err": c.report.max_rel_err,
            "max_abs_err": c.report.max_abs_err,
            "tolerance": c.tolerance,
            "passed": c.passed(),
        }));
    }
    o.line(format!("scope={scope}"));
    o.line(format!("passed={passed}/{}", outcomes.len()));
    o.doc(json!({ "scope": scope.to_string(), "seed": seed, "checks": rows, "passed": passed == outcomes.len() }));
    Ok(if passed == outcomes.len() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_equiv(seeds: usize, seed: u64, o: &mut Out) -> Result<i32> {
    if seeds == 0 {
        return Err(Error::Invalid("--seeds must be at least 1".into()));
    }
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for i in 0..seeds {
        let case = equivalence_case(i);
        let s = seed.wrapping_add(i as u64);
        let diff = check_equivalence(&case, s)?;
        worst = worst.max(diff);
        let shape = format!("{}x{}x{}x{}", case.batch, case.image.0, case.image.1, case.channels);
        o.line(format!(
            "case={i} seed={s} shape={shape} window={} heads={} shifted={} rel_bias={} max_abs_diff={diff:.3e}",
            case.window, case.heads, case.shifted, case.relative_bias
        ));
        rows.push(json!({
            "seed": s, "shape": shape, "window": case.window, "heads": case.heads,
            "shifted": case.shifted, "relative_bias": case.relative_bias, "max_abs_diff": diff,
        }));
    }
    let ok = worst < EQUIV_TOL;
    o.line(format!("max_abs_diff={worst:.3e}"));
    o.line(format!("tolerance={EQUIV_TOL:e}"));
    o.line(format!("equivalent={ok}"));
    o.doc(json!({ "cases": rows, "max_abs_diff": worst, "tolerance": EQUIV_TOL, "equivalent": ok }));
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_train(
    config: Option<&Path>,
    steps: Option<usize>,
    seed: Option<u64>,
    metrics: &Path,
    ckpt: Option<&Path>,
    o: &mut Out,
) -> Result<i32> {
    let mut run = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = steps {
        let share = run.train.warmup_steps as f64 / run.train.total_steps.max(1) as f64;
        run.train.total_steps = n;
        run.train.warmup_steps = ((n as f64 * share).round() as usize).min(n);
    }
    if let Some(s) = seed {
        run.train.seed = s;
    }
    run.validate()?;
    let task = SyntheticTask::new(run.task.clone())?;
    let mut model = Gswin::new(&run.model, run.train.seed)?;
    let params = model.param_count();
    o.line(format!("params={params}"));
    let history = {
        let mut trainer = Trainer::new(&mut model, &task, run.train.clone())?;
        trainer.run(|r| {
            if let Some(acc) = r.eval_acc {
                o.line(format!("step={} lr={:.4e} train_loss={:.6} eval_acc={acc:.4}", r.step, r.lr, r.train_loss));
            }
        })?
    };
    history.write_csv(metrics)?;
    if let Some(path) = ckpt {
        checkpoint::save(&model, path)?;
        o.line(format!("ckpt={}", path.display()));
    }
    let window = 10.min(history.records.len());
    let reduction = history.loss_reduction(window);
    let acc = history.final_eval_acc().unwrap_or(0.0);
    o.line(format!("first_loss_mean={:.6}", history.head_mean(window)));
    o.line(format!("last_loss_mean={:.6}", history.tail_mean(window)));
    o.line(format!("loss_reduction={reduction:.4}"));
    o.line(format!("final_eval_acc={acc:.4}"));
    o.line(format!("metrics={}", metrics.display()));
    o.doc(json!({
        "params": params,
        "steps": history.records.len(),
        "loss_reduction": reduction,
        "final_eval_acc": acc,
        "metrics": metrics.display().to_string(),
        "ckpt": ckpt.map(|p| p.display().to_string()),
    }));
    Ok(EXIT_OK)
}

fn cmd_export(
    ckpt: &Path,
    stage: usize,
    layer: usize,
    head: usize,
    args: &ModelArgs,
    dir: &Path,
    o: &mut Out,
) -> Result<i32> {
    let (label, cfg) = args.resolve()?;
    let model = Gswin::new(&cfg, 0)?;
    checkpoint::load_into(&model, ckpt)?;
    let files = export_weight_maps(&model, stage, layer, head, dir)?;
    o.line(format!("model={label}"));
    o.line(format!("csv={}", files.csv.display()));
    o.line(format!("pgm={}", files.pgm.display()));
    o.line(format!("rows={}", files.rows));
    o.line(format!("cols={}", files.cols));
    o.doc(json!({
        "model": label,
        "csv": files.csv.display().to_string(),
        "pgm": files.pgm.display().to_string(),
        "rows": files.rows,
        "cols": files.cols,
    }));
    Ok(EXIT_OK)
}

fn cmd_presets(o: &mut Out) -> i32 {
    let mut rows = Vec::new();
    for p in presets() {
        let c = &p.config;
        let depths: Vec<String> = c.depths.iter().map(usize::to_string).collect();
        o.line(format!(
            "{}: C={} depths={} heads={} window={} drop_path={} drop_path_coco={} drop_path_ade20k={}",
            p.name,
            c.base_channels,
            depths.join(","),
            c.heads,
            c.window,
            p.drop_path.imagenet,
            p.drop_path.coco,
            p.drop_path.ade20k
        ));
        rows.push(json!({
            "name": p.name,
            "base_channels": c.base_channels,
            "depths": c.depths,
            "heads": c.heads,
            "window": c.window,
            "drop_path": { "imagenet": p.drop_path.imagenet, "coco": p.drop_path.coco, "ade20k": p.drop_path.ade20k },
        }));
    }
    o.doc(json!({ "presets": rows }));
    EXIT_OK
}
