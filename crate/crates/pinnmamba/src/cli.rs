//! Configuration files and the command-line surface.
//!
//! Config files are TOML with one section per module; unknown keys are
//! rejected, missing keys take the defaults (101x101 grid, k = 7,
//! dt = 1e-2, embedding 32, state width 8, hidden 512, one encoder block,
//! weights [1, 1, 10], alignment weight 1000, 1000 epochs). `--set a.b=v`
//! overrides single values on top of the file.
//!
//! ```toml
//! [problem]
//! name = "convection"   # convection | reaction | wave
//! beta = 50.0
//!
//! [grid]
//! m = 101
//! n = 101
//!
//! [sequence]
//! k = 7
//! dt = 1e-2
//! extrapolate_beyond_T = true
//! mode = "sub"          # sub | long
//!
//! [model]
//! arch = "pinnmamba"    # pinnmamba | mlp
//! embed_dim = 32
//! ssm_state = 8
//! inner_mult = 2
//! blocks = 1
//! hidden = 512
//! depth = 4             # mlp only
//! activation = "wavelet"
//! ssm = "selective"     # selective | lti | none
//!
//! [loss]
//! lambda_f = 1.0
//! lambda_i = 1.0
//! lambda_b = 10.0
//! lambda_align = 1000.0
//! wave_auto_align = true
//! initial_loss_mode = "j0"   # j0 | all
//!
//! [optim]
//! epochs = 1000
//! history = 50
//! seed = 0
//! eval_every = 1
//!
//! [out]
//! dir = "runs/my-run"
//! ```

use crate::autodiff::{finite_diff_check, ParamFn};
use crate::collocation::SequenceMode;
use crate::error::{Error, Result};
use crate::eval::{ablate, export_grid, predict_grid, rmae, rrmse, AblationPlan, AblationVariant};
use crate::model::{Activation, Arch, ModelConfig, SsmKind};
use crate::optimize::{train, LbfgsConfig, TrainConfig};
use crate::oracles::{self, ReferenceLossFn};
use crate::physics::{InitialLossMode, LossWeights, PdeProblem, ProblemKind};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    problem: ProblemSection,
    grid: GridSection,
    sequence: SequenceSection,
    model: ModelSection,
    loss: LossSection,
    optim: OptimSection,
    out: OutSection,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct ProblemSection {
    name: Option<String>,
    beta: Option<f64>,
    rho: Option<f64>,
    freq: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct GridSection {
    m: Option<usize>,
    n: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct SequenceSection {
    k: Option<usize>,
    dt: Option<f64>,
    #[serde(rename = "extrapolate_beyond_T")]
    extrapolate_beyond_t: Option<bool>,
    mode: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    arch: Option<String>,
    embed_dim: Option<usize>,
    ssm_state: Option<usize>,
    inner_mult: Option<usize>,
    blocks: Option<usize>,
    hidden: Option<usize>,
    depth: Option<usize>,
    activation: Option<String>,
    ssm: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct LossSection {
    lambda_f: Option<f64>,
    lambda_i: Option<f64>,
    lambda_b: Option<f64>,
    lambda_align: Option<f64>,
    wave_auto_align: Option<bool>,
    initial_loss_mode: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct OptimSection {
    epochs: Option<usize>,
    history: Option<usize>,
    seed: Option<u64>,
    eval_every: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct OutSection {
    dir: Option<String>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Applies a `key.path=value` override onto a parsed TOML tree.
fn apply_set(root: &mut toml::Table, set: &str) -> Result<()> {
    let (key, value) = set
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{set}'")))?;
    let key = key.trim();
    let value = value.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() < 2 {
        return Err(Error::Config(format!(
            "--set key must be section.field, got '{key}'"
        )));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{part}' is not a section")))?;
    }
    let parsed: toml::Value = value
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(value.to_string()));
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Reads and fully resolves a config file (missing file sections default).
/// Unknown keys, type mismatches, and constraint violations are errors
/// naming the key.
pub fn parse_config(path: Option<&Path>, sets: &[String]) -> Result<TrainConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    resolve_config(&text, sets)
}

fn resolve_config(text: &str, sets: &[String]) -> Result<TrainConfig> {
    let mut tree: toml::Table = text.parse().map_err(config_err)?;
    for set in sets {
        apply_set(&mut tree, set)?;
    }
    let file: FileConfig = toml::Value::Table(tree).try_into().map_err(config_err)?;

    let name = file.problem.name.as_deref().unwrap_or("convection");
    let mut problem = PdeProblem::by_name(name)?;
    match &mut problem.kind {
        ProblemKind::Convection { beta } => {
            if let Some(b) = file.problem.beta {
                *beta = b;
            }
        }
        ProblemKind::Reaction { rho } => {
            if let Some(r) = file.problem.rho {
                *rho = r;
            }
        }
        ProblemKind::Wave { freq } => {
            if let Some(f) = file.problem.freq {
                *freq = f;
            }
        }
    }

    let grid_m = file.grid.m.unwrap_or(101);
    let grid_n = file.grid.n.unwrap_or(101);
    if grid_m < 2 {
        return Err(Error::Config(format!("grid.m must be at least 2, got {grid_m}")));
    }
    if grid_n < 2 {
        return Err(Error::Config(format!("grid.n must be at least 2, got {grid_n}")));
    }

    let mode = match file.sequence.mode.as_deref().unwrap_or("sub") {
        "sub" => SequenceMode::Sub,
        "long" => SequenceMode::Long,
        other => {
            return Err(Error::Config(format!(
                "sequence.mode must be 'sub' or 'long', got '{other}'"
            )))
        }
    };
    let k = file.sequence.k.unwrap_or(7);
    if mode == SequenceMode::Sub && k < 2 {
        return Err(Error::Config(format!("sequence.k must be at least 2, got {k}")));
    }

    let arch = Arch::parse(file.model.arch.as_deref().unwrap_or("pinnmamba"))?;
    let model = ModelConfig {
        arch,
        embed_dim: file.model.embed_dim.unwrap_or(32),
        hidden: file.model.hidden.unwrap_or(512),
        inner_mult: file.model.inner_mult.unwrap_or(2),
        state: file.model.ssm_state.unwrap_or(8),
        blocks: file.model.blocks.unwrap_or(1),
        depth: file.model.depth.unwrap_or(4),
        activation: Activation::parse(file.model.activation.as_deref().unwrap_or("wavelet"))?,
        ssm: SsmKind::parse(file.model.ssm.as_deref().unwrap_or("selective"))?,
    };

    let defaults = LossWeights::defaults_for(&problem);
    let weights = LossWeights {
        lambda_f: file.loss.lambda_f.unwrap_or(defaults.lambda_f),
        lambda_i: file.loss.lambda_i.unwrap_or(defaults.lambda_i),
        lambda_b: file.loss.lambda_b.unwrap_or(defaults.lambda_b),
        lambda_align: file.loss.lambda_align.unwrap_or(defaults.lambda_align),
        wave_auto_align: file
            .loss
            .wave_auto_align
            .unwrap_or(defaults.wave_auto_align),
    };
    let initial_mode = match file.loss.initial_loss_mode.as_deref().unwrap_or("j0") {
        "j0" => InitialLossMode::AnchorOnly,
        "all" => InitialLossMode::AllTokens,
        other => {
            return Err(Error::Config(format!(
                "loss.initial_loss_mode must be 'j0' or 'all', got '{other}'"
            )))
        }
    };

    let lbfgs = LbfgsConfig {
        history: file.optim.history.unwrap_or(50),
        ..LbfgsConfig::default()
    };

    let cfg = TrainConfig {
        problem,
        grid_m,
        grid_n,
        mode,
        k,
        dt: None,
        extrapolate_beyond_horizon: file.sequence.extrapolate_beyond_t.unwrap_or(true),
        model,
        weights,
        initial_mode,
        epochs: file.optim.epochs.unwrap_or(1000),
        lbfgs,
        seed: file.optim.seed.unwrap_or(0),
        eval_every: file.optim.eval_every.unwrap_or(1),
        out_dir: file.out.dir.map(PathBuf::from),
    };
    // resolve the sequence interval so the echoed config is complete
    let dt = file.sequence.dt.unwrap_or_else(|| cfg.resolved_dt());
    if !(dt > 0.0) {
        return Err(Error::Config(format!("sequence.dt must be positive, got {dt}")));
    }
    let cfg = TrainConfig {
        dt: Some(dt),
        ..cfg
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a resolved config so that re-parsing it reproduces the same
/// [`TrainConfig`].
pub fn resolved_toml(cfg: &TrainConfig) -> String {
    let (beta, rho, freq) = match cfg.problem.kind {
        ProblemKind::Convection { beta } => (Some(beta), None, None),
        ProblemKind::Reaction { rho } => (None, Some(rho), None),
        ProblemKind::Wave { freq } => (None, None, Some(freq)),
    };
    let file = FileConfig {
        problem: ProblemSection {
            name: Some(cfg.problem.name().to_string()),
            beta,
            rho,
            freq,
        },
        grid: GridSection {
            m: Some(cfg.grid_m),
            n: Some(cfg.grid_n),
        },
        sequence: SequenceSection {
            k: Some(cfg.k),
            dt: Some(cfg.resolved_dt()),
            extrapolate_beyond_t: Some(cfg.extrapolate_beyond_horizon),
            mode: Some(
                match cfg.mode {
                    SequenceMode::Sub => "sub",
                    SequenceMode::Long => "long",
                }
                .to_string(),
            ),
        },
        model: ModelSection {
            arch: Some(cfg.model.arch.name().to_string()),
            embed_dim: Some(cfg.model.embed_dim),
            ssm_state: Some(cfg.model.state),
            inner_mult: Some(cfg.model.inner_mult),
            blocks: Some(cfg.model.blocks),
            hidden: Some(cfg.model.hidden),
            depth: Some(cfg.model.depth),
            activation: Some(cfg.model.activation.name().to_string()),
            ssm: Some(cfg.model.ssm.name().to_string()),
        },
        loss: LossSection {
            lambda_f: Some(cfg.weights.lambda_f),
            lambda_i: Some(cfg.weights.lambda_i),
            lambda_b: Some(cfg.weights.lambda_b),
            lambda_align: Some(cfg.weights.lambda_align),
            wave_auto_align: Some(cfg.weights.wave_auto_align),
            initial_loss_mode: Some(
                match cfg.initial_mode {
                    InitialLossMode::AnchorOnly => "j0",
                    InitialLossMode::AllTokens => "all",
                }
                .to_string(),
            ),
        },
        optim: OptimSection {
            epochs: Some(cfg.epochs),
            history: Some(cfg.lbfgs.history),
            seed: Some(cfg.seed),
            eval_every: Some(cfg.eval_every),
        },
        out: OutSection {
            dir: cfg.out_dir.as_ref().map(|p| p.display().to_string()),
        },
    };
    toml::to_string(&file).expect("config serializes")
}

#[derive(Parser, Debug)]
#[command(
    name = "pinnmamba",
    version,
    about = "Physics-informed PDE training with a sub-sequential state-space encoder"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Train a model and write history + checkpoints to the run directory.
    Train(RunArgs),
    /// Load a checkpoint, report metrics, and export the prediction grid.
    Eval(EvalArgs),
    /// Train the ablation variants and write a results table.
    Ablate(AblateArgs),
    /// Check parameter gradients of the full loss against finite
    /// differences on a tiny model.
    Gradcheck(GradcheckArgs),
    /// Run the self-check oracle suites.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. --set problem.name=wave
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run directory (defaults to a timestamped directory under
    /// $PINNMAMBA_OUT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint to load.
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Where to write the prediction grid CSV.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Comma-separated variant names; defaults to the component-removal set.
    #[arg(long)]
    variants: Option<String>,
    /// Seeds per variant.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Concurrent variant workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Root for run directories: `$PINNMAMBA_OUT` or `./runs`.
fn out_root() -> PathBuf {
    std::env::var_os("PINNMAMBA_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir_for(cfg: &TrainConfig, explicit: Option<PathBuf>) -> PathBuf {
    if let Some(d) = explicit {
        return d;
    }
    if let Some(d) = &cfg.out_dir {
        return d.clone();
    }
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
    out_root().join(format!("{stamp}-{}-{}", cfg.problem.name(), cfg.model.arch.name()))
}

/// Entry point for the command-line binary; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let mut argv: Vec<String> = vec!["pinnmamba".into()];
    argv.extend(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints usage/help itself; help/version are successes
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Ablate(args) => cmd_ablate(args),
        Cmd::Gradcheck(args) => cmd_gradcheck(args),
        Cmd::Oracle(args) => cmd_oracle(args),
    }
}

fn cmd_train(args: RunArgs) -> Result<()> {
    let mut cfg = parse_config(args.config.as_deref(), &args.sets)?;
    let dir = run_dir_for(&cfg, args.out);
    cfg.out_dir = Some(dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let echo = dir.join("config.resolved.toml");
    std::fs::write(&echo, resolved_toml(&cfg)).map_err(|e| Error::io(&echo, e))?;
    println!("training {} ({}) -> {}", cfg.problem.name(), cfg.model.arch.name(), dir.display());
    let result = train(&cfg)?;
    if let Some(rec) = result.history.records.last() {
        println!(
            "epoch {}: loss {:.6e}, rMAE {:.6e}, rRMSE {:.6e}",
            rec.epoch, rec.total, rec.rmae, rec.rrmse
        );
    }
    println!(
        "best rMAE {:.6e} at epoch {}; artifacts in {}",
        result.best_rmae,
        result.best_epoch,
        dir.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (model, params) = crate::model::load_checkpoint(&args.checkpoint)?;
    let mut cfg = parse_config(args.config.as_deref(), &args.sets)?;
    cfg.model = model.config;
    let grid = cfg.grid()?;
    let pred = predict_grid(&model, &params, &cfg, &grid);
    let truth: Vec<f64> = grid
        .points()
        .map(|(x, t)| cfg.problem.analytical_solution(x, t))
        .collect();
    let (ma, mr) = (rmae(&pred, &truth)?, rrmse(&pred, &truth)?);
    println!("rMAE  {ma:.6e}");
    println!("rRMSE {mr:.6e}");
    let export = args.export.unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("prediction.csv")
    });
    export_grid(&grid, &cfg.problem, &pred, &export)?;
    println!("prediction grid written to {}", export.display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let mut base = parse_config(args.config.as_deref(), &args.sets)?;
    let dir = run_dir_for(&base, args.out);
    base.out_dir = Some(dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let variants: Vec<AblationVariant> = match &args.variants {
        None => AblationVariant::core_set(),
        Some(list) => list
            .split(',')
            .map(|v| AblationVariant::parse(v.trim()))
            .collect::<Result<_>>()?,
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let jobs = args.jobs.max(1);
    let table = if jobs == 1 || variants.len() == 1 {
        ablate(&base, &AblationPlan { variants, seeds })
    } else {
        // run variant chunks on worker threads, assemble in variant order
        let chunks: Vec<Vec<AblationVariant>> = variants
            .chunks(variants.len().div_ceil(jobs))
            .map(|c| c.to_vec())
            .collect();
        let mut tables = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    let base = base.clone();
                    let seeds = seeds.clone();
                    scope.spawn(move || {
                        ablate(
                            &base,
                            &AblationPlan {
                                variants: chunk,
                                seeds,
                            },
                        )
                    })
                })
                .collect();
            for h in handles {
                tables.push(h.join().expect("ablation worker"));
            }
        });
        let mut merged = crate::eval::AblationTable::default();
        for t in tables {
            merged.rows.extend(t.rows);
        }
        merged
    };
    let path = dir.join("ablation.csv");
    std::fs::write(&path, table.csv()).map_err(|e| Error::io(&path, e))?;
    print!("{}", table.csv());
    println!("results table written to {}", path.display());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let problem = PdeProblem::by_name("convection")?;
    let mut cfg = TrainConfig::defaults(problem);
    cfg.grid_m = 2;
    cfg.grid_n = 2;
    cfg.k = 3;
    cfg.model = ModelConfig {
        embed_dim: 4,
        hidden: 6,
        state: 2,
        ..ModelConfig::default()
    };
    let reference = ReferenceLossFn::new(cfg.clone());
    let theta = reference.model.init_params(args.seed);
    let tape_err = finite_diff_check(&reference, &theta, 1e-4);
    println!("tape gradient vs finite differences:     max rel err {tape_err:.3e}");

    let (_, fast_grad) = crate::optimize::loss_and_grad(&cfg, &theta)?;
    let mut worst = 0.0f64;
    let mut probe = theta.clone();
    let eps = 1e-4;
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = reference.eval::<f64>(&probe);
        probe[i] = theta[i] - eps;
        let dn = reference.eval::<f64>(&probe);
        probe[i] = theta[i];
        let fd = (up - dn) / (2.0 * eps);
        let rel = (fast_grad[i] - fd).abs() / 1.0f64.max(fast_grad[i].abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    println!("training gradient vs finite differences: max rel err {worst:.3e}");
    if tape_err < 1e-5 && worst < 1e-5 {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch: 0,
            msg: format!("gradient check failed: tape {tape_err:.3e}, fast {worst:.3e}"),
        })
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let reports = oracles::run_all(args.seed);
    let mut all_ok = true;
    let mut out = String::new();
    for r in &reports {
        let _ = writeln!(out, "{}", r.line());
        all_ok &= r.passed();
    }
    print!("{out}");
    if all_ok {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch: 0,
            msg: "oracle suite failed".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = resolve_config("", &[]).unwrap();
        assert_eq!(cfg.problem.name(), "convection");
        assert_eq!((cfg.grid_m, cfg.grid_n), (101, 101));
        assert_eq!(cfg.k, 7);
        assert_eq!(cfg.dt, Some(0.01));
        assert_eq!(cfg.model.embed_dim, 32);
        assert_eq!(cfg.model.state, 8);
        assert_eq!(cfg.model.hidden, 512);
        assert_eq!(cfg.model.blocks, 1);
        assert_eq!(cfg.epochs, 1000);
        assert_eq!(
            (cfg.weights.lambda_f, cfg.weights.lambda_i, cfg.weights.lambda_b),
            (1.0, 1.0, 10.0)
        );
        assert_eq!(cfg.weights.lambda_align, 1000.0);
    }

    #[test]
    fn problem_name_alone_pulls_coefficient_defaults() {
        let cfg = resolve_config("[problem]\nname = \"convection\"\n", &[]).unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Convection { beta: 50.0 });
        let cfg = resolve_config("[problem]\nname = \"wave\"\n", &[]).unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Wave { freq: 3.0 });
        assert!(cfg.weights.wave_auto_align);
    }

    #[test]
    fn degenerate_grid_rejected_naming_key() {
        let err = resolve_config("[grid]\nm = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("grid.m"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = resolve_config("[grid]\nq = 3\n", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('q'), "{msg}");
        let err = resolve_config("[nonsense]\nx = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("nonsense"));
    }

    #[test]
    fn set_overrides_apply() {
        let cfg = resolve_config(
            "[problem]\nname = \"reaction\"\n",
            &["grid.m=11".into(), "optim.epochs=5".into(), "problem.rho=2.5".into()],
        )
        .unwrap();
        assert_eq!(cfg.grid_m, 11);
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.problem.kind, ProblemKind::Reaction { rho: 2.5 });
    }

    #[test]
    fn resolved_echo_round_trips() {
        for (name, sets) in [
            ("convection", vec!["sequence.k=5".to_string()]),
            ("wave", vec!["model.embed_dim=16".to_string(), "grid.n=51".to_string()]),
        ] {
            let cfg = resolve_config(
                &format!("[problem]\nname = \"{name}\"\n"),
                &sets,
            )
            .unwrap();
            let echo = resolved_toml(&cfg);
            let again = resolve_config(&echo, &[]).unwrap();
            assert_eq!(cfg, again, "echo drifted:\n{echo}");
        }
    }

    #[test]
    fn unknown_subcommand_fails_with_usage() {
        let code = run(["frobnicate".to_string()]);
        assert_ne!(code, 0);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["--help".to_string()]), 0);
    }
}
