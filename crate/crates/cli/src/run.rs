//! Monte Carlo trials and their aggregation.

use mtp_amp::amp::{run_symmetric, AmpConfig, AmpTrace, Reweighting};
use mtp_amp::denoise::BlockDenoiser;
use mtp_amp::model::{sample_signal, synthesize_block};
use mtp_amp::rng::trial_seed;
use mtp_amp::se::{run_se, OperatorT, OverlapModel, SeTrajectory};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{AmpSection, ResolvedModel, SeSection};
use crate::error::Result;

/// Runs `amp.trials` independent instances. Trial `i` draws its signal,
/// noise and initialization from `trial_seed(seed, i)`, so results do not
/// depend on the thread count.
pub fn run_trials(model: &ResolvedModel, amp: &AmpSection, seed: u64, pool: &rayon::ThreadPool) -> Result<Vec<AmpTrace>> {
    pool.install(|| {
        (0..amp.trials)
            .into_par_iter()
            .map(|i| run_trial(model, amp, trial_seed(seed, i as u64)))
            .collect()
    })
}

pub fn run_trial(model: &ResolvedModel, amp: &AmpSection, seed: u64) -> Result<AmpTrace> {
    let (x, layout) = sample_signal::<f64>(&model.profile, model.n, seed)?;
    let inst = synthesize_block(&x, &layout, &model.couplings, seed)?;
    let cfg = AmpConfig {
        max_iter: amp.max_iter,
        reweighting: Reweighting::BayesOptimal,
        correction: amp.correction,
        rho: amp.rho,
        seed,
        early_stop: amp.early_stop,
        snapshots: false,
    };
    Ok(run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg)?)
}

/// SE started from the overlap of the side information, `ρ·diag(β)`.
pub fn se_from_init(model: &ResolvedModel, rho: f64, se: &SeSection) -> Result<SeTrajectory> {
    let beta = nalgebra::DVector::from_column_slice(model.profile.beta());
    let q1 = DMatrix::from_diagonal(&(beta * rho));
    Ok(run_se(
        &OverlapModel::Block(model.profile.clone()),
        &OperatorT::new(model.couplings.clone()),
        &q1,
        se.tol,
        se.max_iter,
    )?)
}

/// Per-block MSE `1 − q_jj/β_j` predicted by an overlap.
pub fn predicted_mse(q: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    beta.iter().enumerate().map(|(j, b)| 1.0 - q[(j, j)] / b).collect()
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub t: usize,
    pub mse_mean: Vec<f64>,
    pub mse_stderr: Vec<f64>,
    pub aligned_mean: Vec<f64>,
    pub aligned_stderr: Vec<f64>,
    pub q_mean: DMatrix<f64>,
    pub q_stderr: DMatrix<f64>,
}

fn mean_and_stderr(vals: &[f64]) -> (f64, f64) {
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Mean and standard error across trials at every iteration. Traces that
/// stopped early are held at their last record.
pub fn aggregate(traces: &[AmpTrace]) -> Vec<AggregateRow> {
    let len = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let d = traces.first().map_or(0, |t| t.records[0].q_hat.nrows());
    (0..len)
        .map(|t| {
            let recs: Vec<_> = traces.iter().map(|tr| &tr.records[t.min(tr.records.len() - 1)]).collect();
            let mut mse_mean = vec![0.0; d];
            let mut mse_stderr = vec![0.0; d];
            let mut aligned_mean = vec![0.0; d];
            let mut aligned_stderr = vec![0.0; d];
            for j in 0..d {
                let v: Vec<f64> = recs.iter().map(|r| r.mse[j]).collect();
                (mse_mean[j], mse_stderr[j]) = mean_and_stderr(&v);
                let v: Vec<f64> = recs.iter().map(|r| r.mse_aligned[j]).collect();
                (aligned_mean[j], aligned_stderr[j]) = mean_and_stderr(&v);
            }
            let mut q_mean = DMatrix::zeros(d, d);
            let mut q_stderr = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let v: Vec<f64> = recs.iter().map(|r| r.q_hat[(i, j)]).collect();
                    (q_mean[(i, j)], q_stderr[(i, j)]) = mean_and_stderr(&v);
                }
            }
            AggregateRow {
                t,
                mse_mean,
                mse_stderr,
                aligned_mean,
                aligned_stderr,
                q_mean,
                q_stderr,
            }
        })
        .collect()
}
