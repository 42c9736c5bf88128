//! Metrics, prediction-grid export, reference-grid loading, and the
//! ablation/sensitivity sweep harness.

use crate::collocation::Grid;
use crate::collocation::{SequenceMode, SequenceSet};
use crate::error::{Error, Result};
use crate::model::{embed_token, encoder_forward, mlp_forward, Arch, Model};
use crate::optimize::{train, TrainConfig};
use crate::physics::PdeProblem;
use std::fmt::Write as _;
use std::path::Path;

/// Relative mean absolute error: `sum|pred - truth| / sum|truth|`.
pub fn rmae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    assert_eq!(pred.len(), truth.len(), "metric length mismatch");
    let denom: f64 = truth.iter().map(|u| u.abs()).sum();
    if denom == 0.0 {
        return Err(Error::Metrics(
            "rMAE undefined: ground truth is identically zero".into(),
        ));
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, u)| (p - u).abs()).sum();
    Ok(num / denom)
}

/// Relative root mean square error: `sqrt(sum|pred - truth|^2 / sum|truth|^2)`.
pub fn rrmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    assert_eq!(pred.len(), truth.len(), "metric length mismatch");
    let denom: f64 = truth.iter().map(|u| u * u).sum();
    if denom == 0.0 {
        return Err(Error::Metrics(
            "rRMSE undefined: ground truth is identically zero".into(),
        ));
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, u)| (p - u) * (p - u)).sum();
    Ok((num / denom).sqrt())
}

/// Grid predictions of a trained model: the anchor-token output per grid
/// point, x-major.
pub fn predict_grid(model: &Model, params: &[f64], cfg: &TrainConfig, grid: &Grid) -> Vec<f64> {
    match model.config.arch {
        Arch::Mlp => grid
            .points()
            .map(|(x, t)| mlp_forward::<f64>(model, params, x, t))
            .collect(),
        Arch::PinnMamba => {
            let seqs = SequenceSet::build(
                grid,
                cfg.mode,
                cfg.k,
                cfg.resolved_dt(),
                cfg.extrapolate_beyond_horizon,
            );
            let de = model.config.embed_dim;
            let mut embeds = vec![0.0f64; seqs.points.len() * de];
            for (p, pt) in seqs.points.iter().enumerate() {
                let e = embed_token::<f64>(model, params, pt.x, pt.t);
                embeds[p * de..(p + 1) * de].copy_from_slice(&e);
            }
            let k = seqs.k;
            let mut preds = vec![0.0f64; seqs.n_seq() * k];
            let mut gathered = vec![0.0f64; k * de];
            for s in 0..seqs.n_seq() {
                for j in 0..k {
                    let p = seqs.token_index(s, j);
                    gathered[j * de..(j + 1) * de]
                        .copy_from_slice(&embeds[p * de..(p + 1) * de]);
                }
                let out = encoder_forward::<f64>(model, params, &gathered, k);
                preds[s * k..(s + 1) * k].copy_from_slice(&out);
            }
            let mut grid_pred = Vec::with_capacity(grid.len());
            for i in 0..grid.m {
                for j in 0..grid.n {
                    let (s, jj) = seqs.prediction_slot(i, j);
                    grid_pred.push(preds[s * k + jj]);
                }
            }
            grid_pred
        }
    }
}

/// Writes `x,t,u_pred,u_true,abs_err` rows for every grid point (x-major,
/// 17 significant digits, LF endings).
pub fn export_grid(
    grid: &Grid,
    problem: &PdeProblem,
    grid_pred: &[f64],
    path: &Path,
) -> Result<()> {
    assert_eq!(grid_pred.len(), grid.len(), "prediction count mismatch");
    let mut out = String::from("x,t,u_pred,u_true,abs_err\n");
    for (idx, (x, t)) in grid.points().enumerate() {
        let u_pred = grid_pred[idx];
        let u_true = problem.analytical_solution(x, t);
        let abs_err = (u_pred - u_true).abs();
        let _ = writeln!(
            out,
            "{x:.16e},{t:.16e},{u_pred:.16e},{u_true:.16e},{abs_err:.16e}"
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Ground-truth samples loaded from file: unique `(x, t)` keys mapped to
/// reference values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReferenceGrid {
    pub samples: Vec<(f64, f64, f64)>,
}

/// Reads a comma-separated reference grid. The header names the columns;
/// `x`, `t` and one of `u_true`/`u` are required, extras are ignored.
/// Non-finite values and duplicate keys are rejected with their line
/// number.
pub fn load_reference(path: &Path) -> Result<ReferenceGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(ReferenceGrid::default());
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let xi = find("x").ok_or_else(|| bad(1, "missing column 'x'".into()))?;
    let ti = find("t").ok_or_else(|| bad(1, "missing column 't'".into()))?;
    let ui = find("u_true")
        .or_else(|| find("u"))
        .ok_or_else(|| bad(1, "missing column 'u_true' or 'u'".into()))?;

    let mut samples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            let raw = fields
                .get(i)
                .ok_or_else(|| bad(ln + 1, format!("missing column {i}")))?;
            let v: f64 = raw
                .parse()
                .map_err(|e| bad(ln + 1, format!("bad number '{raw}': {e}")))?;
            if !v.is_finite() {
                return Err(bad(ln + 1, format!("non-finite value '{raw}'")));
            }
            Ok(v)
        };
        let (x, t, u) = (get(xi)?, get(ti)?, get(ui)?);
        if !seen.insert((x.to_bits(), t.to_bits())) {
            return Err(bad(ln + 1, format!("duplicate key ({x}, {t})")));
        }
        samples.push((x, t, u));
    }
    Ok(ReferenceGrid { samples })
}

/// Named configuration deltas mirroring the component-removal and
/// sensitivity studies.
#[derive(Clone, Debug, PartialEq)]
pub enum AblationVariant {
    Full,
    NoAlignment,
    LongSequence,
    LtiSsm,
    NoSsmMlp,
    TanhActivation,
    ReluActivation,
    SeqLength(usize),
    Interval(f64),
}

impl AblationVariant {
    /// The component-removal rows.
    pub fn core_set() -> Vec<AblationVariant> {
        vec![
            AblationVariant::Full,
            AblationVariant::NoAlignment,
            AblationVariant::LongSequence,
            AblationVariant::LtiSsm,
            AblationVariant::NoSsmMlp,
            AblationVariant::TanhActivation,
        ]
    }

    /// Sensitivity sweeps over sequence length and interval, plus the
    /// activation swaps.
    pub fn sensitivity_set() -> Vec<AblationVariant> {
        let mut v = vec![
            AblationVariant::TanhActivation,
            AblationVariant::ReluActivation,
        ];
        for k in [3usize, 5, 7, 9, 21] {
            v.push(AblationVariant::SeqLength(k));
        }
        for dt in [2e-3, 5e-3, 1e-2, 1e-1] {
            v.push(AblationVariant::Interval(dt));
        }
        v
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => AblationVariant::Full,
            "no-alignment" => AblationVariant::NoAlignment,
            "long-sequence" => AblationVariant::LongSequence,
            "lti-ssm" => AblationVariant::LtiSsm,
            "no-ssm-mlp" => AblationVariant::NoSsmMlp,
            "tanh-activation" => AblationVariant::TanhActivation,
            "relu-activation" => AblationVariant::ReluActivation,
            other => {
                if let Some(k) = other.strip_prefix("seq-length-") {
                    AblationVariant::SeqLength(k.parse().map_err(|_| {
                        Error::Config(format!("bad sequence length in '{other}'"))
                    })?)
                } else if let Some(dt) = other.strip_prefix("interval-") {
                    AblationVariant::Interval(
                        dt.parse()
                            .map_err(|_| Error::Config(format!("bad interval in '{other}'")))?,
                    )
                } else {
                    return Err(Error::Config(format!(
                        "unknown ablation variant '{other}'"
                    )));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            AblationVariant::Full => "full".into(),
            AblationVariant::NoAlignment => "no-alignment".into(),
            AblationVariant::LongSequence => "long-sequence".into(),
            AblationVariant::LtiSsm => "lti-ssm".into(),
            AblationVariant::NoSsmMlp => "no-ssm-mlp".into(),
            AblationVariant::TanhActivation => "tanh-activation".into(),
            AblationVariant::ReluActivation => "relu-activation".into(),
            AblationVariant::SeqLength(k) => format!("seq-length-{k}"),
            AblationVariant::Interval(dt) => format!("interval-{dt}"),
        }
    }

    /// Applies this variant's delta to a base config.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        use crate::model::{Activation, SsmKind};
        let mut cfg = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::NoAlignment => {
                cfg.weights.lambda_align = 0.0;
                cfg.weights.wave_auto_align = false;
            }
            AblationVariant::LongSequence => cfg.mode = SequenceMode::Long,
            AblationVariant::LtiSsm => cfg.model.ssm = SsmKind::Lti,
            AblationVariant::NoSsmMlp => cfg.model.ssm = SsmKind::None,
            AblationVariant::TanhActivation => cfg.model.activation = Activation::Tanh,
            AblationVariant::ReluActivation => cfg.model.activation = Activation::Relu,
            AblationVariant::SeqLength(k) => cfg.k = *k,
            AblationVariant::Interval(dt) => cfg.dt = Some(*dt),
        }
        cfg
    }
}

/// Multi-seed ablation plan.
#[derive(Clone, Debug)]
pub struct AblationPlan {
    pub variants: Vec<AblationVariant>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: String,
    pub seed: String,
    pub rmae: f64,
    pub rrmse: f64,
    pub epochs: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("variant,seed,rmae,rrmse,epochs,seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.variant, r.seed, r.rmae, r.rrmse, r.epochs, r.seconds
            );
        }
        out
    }

    /// Mean rMAE of a variant over its per-seed rows.
    pub fn mean_rmae(&self, variant: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.seed == "mean")
            .map(|r| r.rmae)
    }
}

/// Trains every variant x seed, recording final metrics per run plus a
/// `mean` row per variant. A failed run records NaN metrics and the sweep
/// continues.
pub fn ablate(base: &TrainConfig, plan: &AblationPlan) -> AblationTable {
    let mut table = AblationTable::default();
    for variant in &plan.variants {
        let name = variant.name();
        let mut sum_rmae = 0.0f64;
        let mut sum_rrmse = 0.0f64;
        let mut ok = 0usize;
        for &seed in &plan.seeds {
            let mut cfg = variant.apply(base);
            cfg.seed = seed;
            cfg.out_dir = base
                .out_dir
                .as_ref()
                .map(|d| d.join(format!("{name}-seed{seed}")));
            let started = std::time::Instant::now();
            match train(&cfg) {
                Ok(result) => {
                    let last = result.history.records.last();
                    let (m_rmae, m_rrmse) = last
                        .map(|r| (r.rmae, r.rrmse))
                        .unwrap_or((f64::NAN, f64::NAN));
                    sum_rmae += m_rmae;
                    sum_rrmse += m_rrmse;
                    ok += 1;
                    table.rows.push(AblationRow {
                        variant: name.clone(),
                        seed: seed.to_string(),
                        rmae: m_rmae,
                        rrmse: m_rrmse,
                        epochs: result.history.records.len(),
                        seconds: started.elapsed().as_secs_f64(),
                    });
                }
                Err(err) => {
                    log::warn!("variant {name} seed {seed} failed: {err}");
                    table.rows.push(AblationRow {
                        variant: name.clone(),
                        seed: seed.to_string(),
                        rmae: f64::NAN,
                        rrmse: f64::NAN,
                        epochs: 0,
                        seconds: started.elapsed().as_secs_f64(),
                    });
                }
            }
        }
        if ok > 0 {
            table.rows.push(AblationRow {
                variant: name.clone(),
                seed: "mean".into(),
                rmae: sum_rmae / ok as f64,
                rrmse: sum_rrmse / ok as f64,
                epochs: 0,
                seconds: 0.0,
            });
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::Domain;
    use crate::optimize::TrainConfig;

    #[test]
    fn rmae_basics() {
        let truth = [1.0, -2.0, 0.5];
        assert_eq!(rmae(&truth, &truth).unwrap(), 0.0);
        let doubled: Vec<f64> = truth.iter().map(|v| 2.0 * v).collect();
        assert!((rmae(&doubled, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!((rmae(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(rmae(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn rrmse_basics() {
        let truth = [3.0, 4.0];
        assert_eq!(rrmse(&truth, &truth).unwrap(), 0.0);
        assert!((rrmse(&[0.0, 0.0], &truth).unwrap() - 1.0).abs() < 1e-15);
        let pred = [3.0 + 4.0, 4.0 - 3.0];
        assert!((rrmse(&pred, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(rrmse(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn metric_scale_invariance() {
        let truth = [0.3, -0.7, 1.9, 0.01];
        let pred = [0.31, -0.72, 1.85, 0.03];
        let base = rmae(&pred, &truth).unwrap();
        // dyadic scaling is exact in floating point
        for c in [2.0f64, 0.5, -4.0, 1024.0] {
            let sp: Vec<f64> = pred.iter().map(|v| c * v).collect();
            let st: Vec<f64> = truth.iter().map(|v| c * v).collect();
            assert_eq!(rmae(&sp, &st).unwrap(), base);
        }
        // arbitrary scaling to rounding
        let c = 3.7;
        let sp: Vec<f64> = pred.iter().map(|v| c * v).collect();
        let st: Vec<f64> = truth.iter().map(|v| c * v).collect();
        assert!((rmae(&sp, &st).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn export_and_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        let problem = PdeProblem::convection(50.0);
        let grid = Grid::new(Domain::new(0.0, 1.0, 1.0), 3, 4).unwrap();
        let pred: Vec<f64> = (0..grid.len()).map(|i| i as f64 * 0.125).collect();
        export_grid(&grid, &problem, &pred, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + grid.len());
        assert!(text.starts_with("x,t,u_pred,u_true,abs_err\n"));

        let re = load_reference(&path).unwrap();
        assert_eq!(re.samples.len(), grid.len());
        for ((x, t), (rx, rt, _)) in grid.points().zip(&re.samples) {
            assert_eq!(x, *rx);
            assert_eq!(t, *rt);
        }
    }

    #[test]
    fn export_u_true_matches_analytical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        let problem = PdeProblem::wave(3.0);
        let grid = Grid::new(problem.domain, 4, 4).unwrap();
        let pred = vec![0.25f64; grid.len()];
        export_grid(&grid, &problem, &pred, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for (line, (x, t)) in text.lines().skip(1).zip(grid.points()) {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert!((cols[3] - problem.analytical_solution(x, t)).abs() < 1e-12);
            assert_eq!(cols[4], (cols[2] - cols[3]).abs());
        }
    }

    #[test]
    fn empty_reference_file_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert_eq!(load_reference(&path).unwrap().samples.len(), 0);
    }

    #[test]
    fn reference_rejects_nan_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,t,u\n0,0,1\n0.5,0,NaN\n").unwrap();
        let err = load_reference(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "{msg}");
    }

    #[test]
    fn reference_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(&path, "x,t,u\n0,0,1\n0,0,2\n").unwrap();
        assert!(load_reference(&path).is_err());
    }

    #[test]
    fn ablation_variant_round_trip_and_core_set() {
        let names: Vec<String> = AblationVariant::core_set()
            .iter()
            .map(|v| v.name())
            .collect();
        assert_eq!(
            names,
            vec![
                "full",
                "no-alignment",
                "long-sequence",
                "lti-ssm",
                "no-ssm-mlp",
                "tanh-activation"
            ]
        );
        for v in AblationVariant::core_set()
            .into_iter()
            .chain(AblationVariant::sensitivity_set())
        {
            assert_eq!(AblationVariant::parse(&v.name()).unwrap(), v);
        }
        let lengths: Vec<usize> = AblationVariant::sensitivity_set()
            .iter()
            .filter_map(|v| match v {
                AblationVariant::SeqLength(k) => Some(*k),
                _ => None,
            })
            .collect();
        assert_eq!(lengths, vec![3, 5, 7, 9, 21]);
    }

    #[test]
    fn single_variant_ablation_runs() {
        let problem = PdeProblem::by_name("convection").unwrap();
        let mut base = TrainConfig::defaults(problem);
        base.grid_m = 4;
        base.grid_n = 4;
        base.k = 2;
        base.model.embed_dim = 3;
        base.model.hidden = 4;
        base.model.state = 2;
        base.epochs = 2;
        let plan = AblationPlan {
            variants: vec![AblationVariant::Full],
            seeds: vec![0],
        };
        let table = ablate(&base, &plan);
        assert_eq!(table.rows.len(), 2); // one run + one mean row
        assert_eq!(table.rows[0].variant, "full");
        assert!(table.mean_rmae("full").is_some());
    }
}
