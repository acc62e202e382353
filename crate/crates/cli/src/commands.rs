//! The five subcommands. Each writes its CSV or JSON output plus a
//! `manifest.json` into the output directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use mtp_amp::limits::{
    critical_point_inclusion_check, sweep, t_norm, variational_solve, BranchFlag, SweepRow, VariationalConfig, VariationalProblem,
};
use mtp_amp::se::{OperatorT, OverlapModel};
use mtp_amp::stability::{classify_fixed_point, perron_frobenius_check, PerronFrobenius, StabilityVerdict, DEFAULT_MARGIN};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{ExperimentConfig, ResolvedModel};
use crate::error::{CliError, Result};
use crate::output::{matrix_columns, matrix_fields, num, vector_columns, version, write_manifest, Table};
use crate::run::{aggregate, predicted_mse, run_trials, se_from_init};

/// Inclusion residual above which a variational solution is rejected.
pub const INCLUSION_TOL: f64 = 1e-5;

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub jobs: usize,
    pub resume: bool,
    /// Stop the phase diagram after this many newly computed points.
    pub stop_after: Option<usize>,
    pub interrupt: Arc<AtomicBool>,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: PathBuf) -> Self {
        Context {
            config,
            out,
            jobs: 1,
            resume: false,
            stop_after: None,
            interrupt: Arc::new(AtomicBool::new(false)),
        }
    }

    fn seed(&self) -> u64 {
        self.config.amp.seed
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))
    }

    fn prepare(&self, command: &str) -> Result<ResolvedModel> {
        std::fs::create_dir_all(&self.out)?;
        write_manifest(&self.out, command, &self.config)?;
        self.config.resolve_model()
    }
}

pub fn cmd_simulate(ctx: &Context) -> Result<PathBuf> {
    let model = ctx.prepare("simulate")?;
    let d = model.profile.d();
    let beta = model.profile.beta().to_vec();
    let traces = run_trials(&model, &ctx.config.amp, ctx.seed(), &ctx.pool()?)?;
    let se = se_from_init(&model, ctx.config.amp.rho, &ctx.config.se)?;
    let mut cols = vec!["t".to_string(), "trials".to_string()];
    cols.extend(vector_columns("mse_mean", d));
    cols.extend(vector_columns("mse_stderr", d));
    cols.extend(vector_columns("mse_aligned_mean", d));
    cols.extend(vector_columns("mse_aligned_stderr", d));
    cols.extend(matrix_columns("q_hat_mean", d));
    cols.extend(matrix_columns("q_hat_stderr", d));
    cols.extend(matrix_columns("se_q", d));
    cols.extend(vector_columns("se_mse", d));
    let mut table = Table::new(ctx.seed(), cols);
    for row in aggregate(&traces) {
        let q_se = &se.q[row.t.min(se.q.len() - 1)];
        let mut f = vec![row.t.to_string(), traces.len().to_string()];
        f.extend(row.mse_mean.iter().map(|v| num(*v)));
        f.extend(row.mse_stderr.iter().map(|v| num(*v)));
        f.extend(row.aligned_mean.iter().map(|v| num(*v)));
        f.extend(row.aligned_stderr.iter().map(|v| num(*v)));
        f.extend(matrix_fields(&row.q_mean));
        f.extend(matrix_fields(&row.q_stderr));
        f.extend(matrix_fields(q_se));
        f.extend(predicted_mse(q_se, &beta).into_iter().map(num));
        table.push(f);
    }
    let path = ctx.out.join("simulate.csv");
    table.write(&path)?;
    Ok(path)
}

pub fn cmd_se(ctx: &Context) -> Result<PathBuf> {
    let model = ctx.prepare("se")?;
    let d = model.profile.d();
    let se = se_from_init(&model, ctx.config.amp.rho, &ctx.config.se)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(matrix_columns("q", d));
    cols.extend(matrix_columns("s", d));
    cols.extend(vector_columns("mse", d));
    cols.push("converged".into());
    let mut table = Table::new(ctx.seed(), cols);
    for (t, (q, s)) in se.q.iter().zip(&se.s).enumerate() {
        let mut f = vec![t.to_string()];
        f.extend(matrix_fields(q));
        f.extend(matrix_fields(s));
        f.extend(predicted_mse(q, model.profile.beta()).into_iter().map(num));
        f.push(se.converged.to_string());
        table.push(f);
    }
    let path = ctx.out.join("se.csv");
    table.write(&path)?;
    if !se.converged {
        return Err(CliError::NonConvergence(format!("SE did not converge within {} iterations", se.iterations)));
    }
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub version: String,
    pub seed: u64,
    /// `diag(β)Λ∘²`.
    pub t_matrix: Vec<Vec<f64>>,
    pub perron: Option<PerronFrobenius>,
    pub zero: StabilityVerdict,
    pub se_converged: bool,
    pub se_iterations: usize,
    /// Verdict at the SE limit from the side-information start, when it is
    /// a nonzero fixed point.
    pub fixed_point: Option<StabilityVerdict>,
}

pub fn cmd_stability(ctx: &Context) -> Result<(PathBuf, StabilityReport)> {
    let model = ctx.prepare("stability")?;
    let d = model.profile.d();
    let om = OverlapModel::Block(model.profile.clone());
    let op = OperatorT::new(model.couplings.clone());
    let zero = classify_fixed_point(&om, &op, &DMatrix::zeros(d, d), DEFAULT_MARGIN)?;
    let t = DMatrix::from_diagonal(&DVector::from_column_slice(model.profile.beta())) * model.couplings.hadamard_square();
    let perron = perron_frobenius_check(&t).ok();
    let se = se_from_init(&model, ctx.config.amp.rho, &ctx.config.se)?;
    let fixed_point = if se.converged && se.fixed_point().norm() > 1e-8 {
        Some(classify_fixed_point(&om, &op, se.fixed_point(), DEFAULT_MARGIN)?)
    } else {
        None
    };
    let report = StabilityReport {
        version: version().to_string(),
        seed: ctx.seed(),
        t_matrix: (0..d).map(|i| (0..d).map(|j| t[(i, j)]).collect()).collect(),
        perron,
        zero,
        se_converged: se.converged,
        se_iterations: se.iterations,
        fixed_point,
    };
    let path = ctx.out.join("stability.json");
    let text = serde_json::to_string_pretty(&report).map_err(mtp_amp::Error::from)?;
    crate::output::atomic_write(&path, text.as_bytes())?;
    if !se.converged {
        return Err(CliError::NonConvergence(format!("SE did not converge within {} iterations", se.iterations)));
    }
    Ok((path, report))
}

fn variational_config(ctx: &Context) -> VariationalConfig {
    VariationalConfig {
        grid_res: ctx.config.sweep.as_ref().map_or(400, |s| s.grid_res),
        ..VariationalConfig::default()
    }
}

/// Variational solutions along the sweep grid for one `ε`.
fn limits_for(ctx: &Context, eps: f64, cs: &[f64]) -> Result<(ResolvedModel, Vec<SweepRow>)> {
    let model = ctx.config.at_point(eps, 1.0)?.resolve_model()?;
    let xi = model.xi.clone().expect("profile couplings");
    let rows = sweep(&model.profile, &xi, cs, &variational_config(ctx))?;
    Ok((model, rows))
}

pub fn cmd_limits(ctx: &Context) -> Result<PathBuf> {
    let model = ctx.prepare("limits")?;
    let d = model.profile.d();
    let mut cols = vec!["eps".to_string(), "c".into(), "norm_Tc".into()];
    cols.extend((1..=d).map(|j| format!("q{j}_star")));
    cols.extend(vector_columns("mmse_bound", d));
    cols.push("branch_flag".into());
    cols.push("residual".into());
    let mut table = Table::new(ctx.seed(), cols);
    let mut worst: f64 = 0.0;
    let mut push = |table: &mut Table, eps: String, r: &SweepRow| {
        let mut f = vec![eps, num(r.c), num(r.norm_tc)];
        f.extend(r.q_star.iter().map(|v| num(*v)));
        f.extend(r.mmse_bound.iter().map(|v| num(*v)));
        f.push(r.branch.to_string());
        f.push(num(r.residual));
        table.push(f);
        worst = worst.max(r.residual);
    };
    match &ctx.config.sweep {
        Some(s) => {
            let cs = ctx.config.c_grid()?;
            for &eps in &s.eps {
                let (_, rows) = limits_for(ctx, eps, &cs)?;
                for r in &rows {
                    push(&mut table, num(eps), r);
                }
            }
        }
        None => {
            let lambda2 = model.couplings.hadamard_square();
            let problem = VariationalProblem::new(model.profile.clone(), lambda2)?;
            let res = variational_solve(&problem, &variational_config(ctx))?;
            let rep = critical_point_inclusion_check(&res, &problem)?;
            let (c, norm) = match (&model.xi, model.c) {
                (Some(xi), Some(c)) => (c, t_norm(model.profile.beta(), xi, c)),
                _ => (f64::NAN, f64::NAN),
            };
            let row = SweepRow {
                c,
                norm_tc: norm,
                q_star: res.q_star.clone(),
                mmse_bound: res.mmse_bound.clone(),
                branch: if res.is_degenerate() { BranchFlag::Tie } else { BranchFlag::Single },
                residual: rep.residual,
            };
            push(&mut table, "none".into(), &row);
        }
    }
    let path = ctx.out.join("limits.csv");
    table.write(&path)?;
    if worst > INCLUSION_TOL {
        return Err(CliError::NonConvergence(format!("variational solution off the SE fixed-point set (residual {worst:e})")));
    }
    Ok(path)
}

/// One `(ε, c)` point of the phase diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub eps: f64,
    pub c: f64,
    pub norm_tc: f64,
    pub n: usize,
    pub trials: usize,
    /// Trial mean of the sign-aligned block MSE at the last iteration.
    pub amp_mse: Vec<f64>,
    pub amp_stderr: Vec<f64>,
    pub se_mse: Vec<f64>,
    pub bound: Vec<f64>,
    pub branch: String,
}

impl PhaseRow {
    fn weighted(v: &[f64], beta: &[f64]) -> f64 {
        v.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub fn amp_total(&self, beta: &[f64]) -> f64 {
        Self::weighted(&self.amp_mse, beta)
    }

    pub fn bound_total(&self, beta: &[f64]) -> f64 {
        Self::weighted(&self.bound, beta)
    }
}

fn phase_columns(d: usize) -> Vec<String> {
    let mut cols = vec!["eps".to_string(), "c".into(), "norm_Tc".into(), "n".into(), "trials".into()];
    cols.extend(vector_columns("amp_mse", d));
    cols.extend(vector_columns("amp_stderr", d));
    cols.extend(vector_columns("se_mse", d));
    cols.extend(vector_columns("bound", d));
    cols.extend(["amp_mse_total", "se_mse_total", "bound_total", "branch_flag"].map(String::from));
    cols
}

fn phase_fields(r: &PhaseRow, beta: &[f64]) -> Vec<String> {
    let mut f = vec![num(r.eps), num(r.c), num(r.norm_tc), r.n.to_string(), r.trials.to_string()];
    for v in [&r.amp_mse, &r.amp_stderr, &r.se_mse, &r.bound] {
        f.extend(v.iter().map(|x| num(*x)));
    }
    f.push(num(r.amp_total(beta)));
    f.push(num(PhaseRow::weighted(&r.se_mse, beta)));
    f.push(num(r.bound_total(beta)));
    f.push(r.branch.clone());
    f
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| CliError::Config(format!("checkpoint: bad {what} '{s}'")))
}

/// Reads a phase-diagram CSV written by [`cmd_phase_diagram`].
pub fn read_phase_csv(path: &Path) -> Result<Vec<(u64, PhaseRow)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let idx: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let d = header.iter().filter(|h| h.starts_with("amp_mse_") && *h != "amp_mse_total").count();
    let col = |name: &str| idx.get(name).copied().ok_or_else(|| CliError::Config(format!("checkpoint: column {name} missing")));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |name: &str| -> Result<&str> { Ok(&rec[col(name)?]) };
        let vec = |prefix: &str| -> Result<Vec<f64>> {
            (1..=d).map(|j| parse_f64(get(&format!("{prefix}_{j}"))?, prefix)).collect()
        };
        let seed: u64 = get("seed")?.parse().map_err(|_| CliError::Config("checkpoint: bad seed".into()))?;
        out.push((
            seed,
            PhaseRow {
                eps: parse_f64(get("eps")?, "eps")?,
                c: parse_f64(get("c")?, "c")?,
                norm_tc: parse_f64(get("norm_Tc")?, "norm_Tc")?,
                n: get("n")?.parse().map_err(|_| CliError::Config("checkpoint: bad n".into()))?,
                trials: get("trials")?.parse().map_err(|_| CliError::Config("checkpoint: bad trials".into()))?,
                amp_mse: vec("amp_mse")?,
                amp_stderr: vec("amp_stderr")?,
                se_mse: vec("se_mse")?,
                bound: vec("bound")?,
                branch: get("branch_flag")?.to_string(),
            },
        ));
    }
    Ok(out)
}

fn point_key(eps: f64, c: f64) -> (u64, u64) {
    (eps.to_bits(), c.to_bits())
}

pub fn cmd_phase_diagram(ctx: &Context) -> Result<PathBuf> {
    let base = ctx.prepare("phase-diagram")?;
    let sweep_cfg = ctx.config.sweep.clone().ok_or_else(|| CliError::Config("sweep: section missing".into()))?;
    let d = base.profile.d();
    let beta = base.profile.beta().to_vec();
    let cs = ctx.config.c_grid()?;
    let path = ctx.out.join("phase_diagram.csv");

    let mut done: HashMap<(u64, u64), PhaseRow> = HashMap::new();
    if ctx.resume && path.exists() {
        for (seed, row) in read_phase_csv(&path)? {
            if seed != ctx.seed() {
                return Err(CliError::Config(format!("checkpoint was written with seed {seed}, config has {}", ctx.seed())));
            }
            done.insert(point_key(row.eps, row.c), row);
        }
        log::info!("resuming with {} completed points", done.len());
    }

    let pool = ctx.pool()?;
    let mut limits = Vec::with_capacity(sweep_cfg.eps.len());
    for &eps in &sweep_cfg.eps {
        limits.push(limits_for(ctx, eps, &cs)?.1);
    }
    let worst = limits.iter().flatten().map(|r| r.residual).fold(0.0, f64::max);

    let total = sweep_cfg.eps.len() * cs.len();
    let write = |rows: &[PhaseRow]| -> Result<()> {
        let mut table = Table::new(ctx.seed(), phase_columns(d));
        for r in rows {
            table.push(phase_fields(r, &beta));
        }
        table.write(&path)
    };
    let mut rows: Vec<PhaseRow> = Vec::with_capacity(total);
    let mut fresh = 0usize;
    for (e_idx, &eps) in sweep_cfg.eps.iter().enumerate() {
        for (c_idx, &c) in cs.iter().enumerate() {
            if let Some(r) = done.get(&point_key(eps, c)) {
                rows.push(r.clone());
                continue;
            }
            let interrupted = ctx.interrupt.load(Ordering::SeqCst);
            if interrupted || ctx.stop_after.is_some_and(|k| fresh >= k) {
                write(&rows)?;
                return Err(CliError::Interrupted { done: rows.len(), total });
            }
            let point_cfg = ctx.config.at_point(eps, c)?;
            let model = point_cfg.resolve_model()?;
            let traces = run_trials(&model, &point_cfg.amp, ctx.seed(), &pool)?;
            let last = aggregate(&traces).pop().expect("nonempty trace");
            let se = se_from_init(&model, point_cfg.amp.rho, &point_cfg.se)?;
            let lim = &limits[e_idx][c_idx];
            rows.push(PhaseRow {
                eps,
                c,
                norm_tc: lim.norm_tc,
                n: model.n,
                trials: traces.len(),
                amp_mse: last.aligned_mean,
                amp_stderr: last.aligned_stderr,
                se_mse: predicted_mse(se.fixed_point(), &beta),
                bound: lim.mmse_bound.clone(),
                branch: lim.branch.to_string(),
            });
            fresh += 1;
            write(&rows)?;
            log::info!("point {}/{total}: eps = {eps}, ||T_c|| = {:.4}", rows.len(), lim.norm_tc);
        }
    }
    write(&rows)?;
    if sweep_cfg.svg {
        for j in 0..d {
            let svg = crate::svg::phase_plot(&rows, j);
            crate::output::atomic_write(&ctx.out.join(format!("phase_diagram_block_{}.svg", j + 1)), svg.as_bytes())?;
        }
    }
    if worst > INCLUSION_TOL {
        return Err(CliError::NonConvergence(format!("variational solution off the SE fixed-point set (residual {worst:e})")));
    }
    Ok(path)
}
