//! The AMP engine for symmetric and asymmetric MTP observations.
//!
//! One iteration computes
//! `Xᵗ = Σ_k Y_k M^{t−1} A_kᵀ − M^{t−2} (B^{t−1})ᵀ` and `Mᵗ = f_t(Xᵗ)`,
//! with `B^{t} = Σ_k A_k Dᵗ A_k` built from the empirical divergence of
//! the denoiser. The denoiser is told which Gaussian channel to expect
//! through `K = Σ_k Λ_k Q̂ A_kᵀ` and `Σ = Σ_k A_k Q̂ A_kᵀ`, where `Q̂` is
//! the empirical overlap of the previous estimate.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::denoise::{symmetrize, ChannelParams, Denoiser};
use crate::error::{Error, Result};
use crate::model::{cast_matrix, embed_asymmetric, BlockLayout, CouplingSet, MtpInstance, ScalarPrior};
use crate::quadrature::hermite_pair;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Real;
use crate::se::SeTrajectory;

/// Choice of the reweighting matrices `A_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reweighting {
    /// `A_k = Λ_k`.
    BayesOptimal,
    /// The same matrices at every iteration, one per view.
    Fixed(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    AnalyticDivergence,
    /// Drops the memory term entirely.
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    pub max_iter: usize,
    pub reweighting: Reweighting,
    pub correction: Correction,
    /// Initial overlap level `ρ ∈ [0, 1]`.
    pub rho: f64,
    /// Seed of the initialization stream.
    pub seed: u64,
    /// Stop once `‖Q̂ᵗ − Q̂^{t−1}‖_F` stays below [`EARLY_STOP_TOL`] for
    /// [`EARLY_STOP_PATIENCE`] consecutive iterations.
    pub early_stop: bool,
    /// Keep every iterate `Xᵗ` and estimate `Mᵗ`.
    pub snapshots: bool,
}

pub const EARLY_STOP_TOL: f64 = 1e-6;
pub const EARLY_STOP_PATIENCE: usize = 3;

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            max_iter: 50,
            reweighting: Reweighting::BayesOptimal,
            correction: Correction::AnalyticDivergence,
            rho: 0.05,
            seed: 0,
            early_stop: false,
            snapshots: false,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("ρ = {} lies outside [0, 1]", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("maxIter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Overlaps of one side of an embedded asymmetric run, normalized by the
/// side's own dimension.
#[derive(Debug, Clone, Serialize)]
pub struct SideRecord {
    pub f_hat: DMatrix<f64>,
    pub q_hat: DMatrix<f64>,
    pub mse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmpRecord {
    /// Index of the estimate: `0` is `M⁰`, `t ≥ 1` is `Mᵗ = f_t(Xᵗ)`.
    pub t: usize,
    /// `(1/n) Xᵀ Mᵗ`.
    pub f_hat: DMatrix<f64>,
    /// `(1/n) (Mᵗ)ᵀ Mᵗ`, symmetrized.
    pub q_hat: DMatrix<f64>,
    /// `‖X_{:,j} − Mᵗ_{:,j}‖² / n_j` with `n_j` the size of block `j`
    /// (or `n` without a block layout).
    pub mse: Vec<f64>,
    /// Block MSE of `s·Mᵗ` with the global sign `s = sign(tr F̂ᵗ)`. The
    /// model cannot tell `X` from `−X`, so this is the error an estimator
    /// can be held to when the initialization does not pin the sign.
    pub mse_aligned: Vec<f64>,
    /// Noise covariance `Σ` handed to the denoiser (zero at `t = 0`).
    pub sigma: DMatrix<f64>,
    /// Empirical divergence `D̂ᵗ` in the denoiser's convention.
    pub divergence: DMatrix<f64>,
    pub sides: Option<(SideRecord, SideRecord)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmpTrace {
    pub records: Vec<AmpRecord>,
    /// Reweighting matrices actually used.
    pub reweighting: Vec<DMatrix<f64>>,
    pub early_stopped: bool,
    /// `Xᵗ` for `t = 1..`, present with snapshots enabled.
    pub iterates: Vec<DMatrix<f64>>,
    /// `Mᵗ` for `t = 0..`, present with snapshots enabled.
    pub estimates: Vec<DMatrix<f64>>,
}

impl AmpTrace {
    pub fn last(&self) -> &AmpRecord {
        self.records.last().expect("a trace holds at least the initialization")
    }

    /// Final per-block MSE.
    pub fn final_mse(&self) -> &[f64] {
        &self.last().mse
    }
}

/// Side information `M⁰ = ρX + √(ρ − ρ²) Z`. `Z` is standard normal on
/// the support of `X`, scaled column-wise by the root mean square of the
/// nonzero entries, so that `(1/n) Xᵀ M⁰` and `(1/n) (M⁰)ᵀ M⁰` both
/// concentrate at `ρ (1/n) XᵀX`.
pub fn init_side_information<T: Real>(x: &DMatrix<T>, rho: f64, seed: u64) -> Result<DMatrix<T>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("ρ = {rho} lies outside [0, 1]")));
    }
    let (n, d) = x.shape();
    let mut rng = stream_rng(seed, Stream::Init);
    let noise = (rho - rho * rho).max(0.0).sqrt();
    let mut m = DMatrix::<T>::zeros(n, d);
    for j in 0..d {
        let col = x.column(j);
        let (sum, count) = col
            .iter()
            .filter(|v| **v != T::zero())
            .fold((0.0, 0usize), |(s, c), v| (s + v.to64().powi(2), c + 1));
        let scale = if count > 0 { (sum / count as f64).sqrt() } else { 0.0 };
        for i in 0..n {
            let xi = x[(i, j)];
            let z: T = T::sample_normal(&mut rng);
            m[(i, j)] = if xi == T::zero() {
                T::zero()
            } else {
                T::of(rho) * xi + T::of(noise * scale) * z
            };
        }
    }
    Ok(m)
}

fn gram<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    (a.transpose() * b).map(|v| v.to64() / n)
}

fn block_mse<T: Real>(x: &DMatrix<T>, m: &DMatrix<T>, layout: Option<&BlockLayout>, rows: std::ops::Range<usize>) -> Vec<f64> {
    signed_block_mse(x, m, 1.0, layout, rows)
}

fn signed_block_mse<T: Real>(
    x: &DMatrix<T>,
    m: &DMatrix<T>,
    sign: f64,
    layout: Option<&BlockLayout>,
    rows: std::ops::Range<usize>,
) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| {
            let r = match layout {
                Some(l) => l.ranges[j].clone(),
                None => rows.clone(),
            };
            let len = r.len().max(1) as f64;
            r.map(|i| (x[(i, j)].to64() - sign * m[(i, j)].to64()).powi(2)).sum::<f64>() / len
        })
        .collect()
}

fn aligned_mse<T: Real>(x: &DMatrix<T>, m: &DMatrix<T>, f_hat: &DMatrix<f64>, layout: Option<&BlockLayout>, n: usize) -> Vec<f64> {
    let sign = if f_hat.trace() < 0.0 { -1.0 } else { 1.0 };
    signed_block_mse(x, m, sign, layout, 0..n)
}

fn side_records<T: Real>(
    inst: &MtpInstance<T>,
    m: &DMatrix<T>,
) -> Option<(SideRecord, SideRecord)> {
    let e = inst.embedding?;
    let side = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        let xs = inst.x.view((rows.start, cols.start), (rows.len(), cols.len())).clone_owned();
        let ms = m.view((rows.start, cols.start), (rows.len(), cols.len())).clone_owned();
        let layout = inst.layout.as_ref().map(|l| {
            let ranges = l.ranges[cols.clone()]
                .iter()
                .map(|r| r.start - rows.start..r.end - rows.start)
                .collect::<Vec<_>>();
            ranges
        });
        let mse = (0..cols.len())
            .map(|j| {
                let r = layout.as_ref().map_or(0..rows.len(), |l| l[j].clone());
                let len = r.len().max(1) as f64;
                r.map(|i| (xs[(i, j)].to64() - ms[(i, j)].to64()).powi(2)).sum::<f64>() / len
            })
            .collect();
        SideRecord {
            f_hat: gram(&xs, &ms),
            q_hat: symmetrize(&gram(&ms, &ms)),
            mse,
        }
    };
    Some((
        side(0..e.n1, 0..e.d1),
        side(e.n1..e.n1 + e.n2, e.d1..e.d1 + e.d2),
    ))
}

fn check_finite<T: Real>(m: &DMatrix<T>, iteration: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration })
    }
}

fn reweighting_matrices(config: &AmpConfig, couplings: &CouplingSet) -> Result<Vec<DMatrix<f64>>> {
    match &config.reweighting {
        Reweighting::BayesOptimal => Ok(couplings.matrices().to_vec()),
        Reweighting::Fixed(a) => {
            let d = couplings.d();
            if a.len() != couplings.k() || a.iter().any(|m| m.shape() != (d, d)) {
                return Err(Error::InvalidDimension(format!(
                    "expected {} reweighting matrices of size {d}×{d}",
                    couplings.k()
                )));
            }
            Ok(a.clone())
        }
    }
}

/// Symmetric AMP on `instance`, started from [`init_side_information`].
pub fn run_symmetric<T: Real, D: Denoiser<T> + ?Sized>(
    instance: &MtpInstance<T>,
    denoiser: &D,
    config: &AmpConfig,
) -> Result<AmpTrace> {
    config.validate()?;
    let m0 = init_side_information(&instance.x, config.rho, config.seed)?;
    run_from(instance, denoiser, config, m0)
}

/// Symmetric AMP from an explicit initial estimate `M⁰`.
pub fn run_from<T: Real, D: Denoiser<T> + ?Sized>(
    instance: &MtpInstance<T>,
    denoiser: &D,
    config: &AmpConfig,
    m0: DMatrix<T>,
) -> Result<AmpTrace> {
    config.validate()?;
    let (n, d) = instance.x.shape();
    if m0.shape() != (n, d) || instance.couplings.d() != d {
        return Err(Error::InvalidDimension(format!(
            "initialization is {:?}, signal is {n}×{d}",
            m0.shape()
        )));
    }
    if instance.observations.iter().any(|y| y.shape() != (n, n)) {
        return Err(Error::InvalidDimension("observations must be n×n".into()));
    }
    let a = reweighting_matrices(config, &instance.couplings)?;
    let lambdas = instance.couplings.matrices();
    let a_t: Vec<DMatrix<T>> = a.iter().map(|m| cast_matrix::<T>(&m.transpose())).collect();
    let matched = config.reweighting == Reweighting::BayesOptimal;
    let layout = instance.layout.as_ref();

    let q0 = symmetrize(&gram(&m0, &m0));
    let f0 = gram(&instance.x, &m0);
    let mut records = vec![AmpRecord {
        t: 0,
        mse: block_mse(&instance.x, &m0, layout, 0..n),
        mse_aligned: aligned_mse(&instance.x, &m0, &f0, layout, n),
        f_hat: f0,
        q_hat: q0.clone(),
        sigma: DMatrix::zeros(d, d),
        divergence: DMatrix::zeros(d, d),
        sides: side_records(instance, &m0),
    }];
    let mut iterates = Vec::new();
    let mut estimates = Vec::new();
    if config.snapshots {
        estimates.push(m0.map(|v| v.to64()));
    }

    let mut m_prev: DMatrix<T> = m0;
    let mut m_prev2: Option<DMatrix<T>> = None;
    let mut b_prev: Option<DMatrix<f64>> = None;
    let mut q_prev = q0;
    let mut quiet = 0usize;
    let mut early_stopped = false;

    for t in 1..=config.max_iter {
        let mut x_t = DMatrix::<T>::zeros(n, d);
        for (y, at) in instance.observations.iter().zip(&a_t) {
            x_t += (y * &m_prev) * at;
        }
        if config.correction == Correction::AnalyticDivergence {
            if let (Some(m2), Some(b)) = (&m_prev2, &b_prev) {
                x_t -= m2 * cast_matrix::<T>(&b.transpose());
            }
        }
        check_finite(&x_t, t)?;

        let mut sigma = DMatrix::zeros(d, d);
        for ak in &a {
            sigma += ak * &q_prev * ak.transpose();
        }
        let channel = if matched {
            ChannelParams::matched(&sigma)?
        } else {
            let mut k = DMatrix::zeros(d, d);
            for (lk, ak) in lambdas.iter().zip(&a) {
                k += lk * &q_prev * ak.transpose();
            }
            ChannelParams::general(k, sigma.clone())?
        };
        let eval = denoiser.denoise(&x_t, &channel)?;
        let m_t = eval.value;
        check_finite(&m_t, t)?;

        // The leave-one-out expansion uses D_{ab} = mean ∂f_a/∂x_b, the
        // transpose of the denoiser's convention.
        let d_loo = eval.divergence.transpose();
        let mut b_t = DMatrix::zeros(d, d);
        for ak in &a {
            b_t += ak * &d_loo * ak;
        }

        let q_t = symmetrize(&gram(&m_t, &m_t));
        let f_t = gram(&instance.x, &m_t);
        records.push(AmpRecord {
            t,
            mse: block_mse(&instance.x, &m_t, layout, 0..n),
            mse_aligned: aligned_mse(&instance.x, &m_t, &f_t, layout, n),
            f_hat: f_t,
            q_hat: q_t.clone(),
            sigma: channel.sigma.clone(),
            divergence: eval.divergence,
            sides: side_records(instance, &m_t),
        });
        if config.snapshots {
            iterates.push(x_t.map(|v| v.to64()));
            estimates.push(m_t.map(|v| v.to64()));
        }

        let change = (&q_t - &q_prev).norm();
        quiet = if change < EARLY_STOP_TOL { quiet + 1 } else { 0 };
        m_prev2 = Some(std::mem::replace(&mut m_prev, m_t));
        b_prev = Some(b_t);
        q_prev = q_t;
        if config.early_stop && quiet >= EARLY_STOP_PATIENCE {
            early_stopped = true;
            break;
        }
    }
    Ok(AmpTrace {
        records,
        reweighting: a,
        early_stopped,
        iterates,
        estimates,
    })
}

/// Asymmetric AMP for the model of [`embed_asymmetric`], run as the
/// symmetric recursion on the embedded instance. Per-side overlaps are
/// recorded in [`AmpRecord::sides`].
pub fn run_asymmetric<T: Real, D: Denoiser<T> + ?Sized>(
    x1: &DMatrix<T>,
    x2: &DMatrix<T>,
    gammas: &CouplingSet,
    layouts: Option<(&BlockLayout, &BlockLayout)>,
    instance_seed: u64,
    denoiser: &D,
    config: &AmpConfig,
) -> Result<(MtpInstance<T>, AmpTrace)> {
    let inst = embed_asymmetric(x1, x2, gammas, layouts, instance_seed)?;
    let trace = run_symmetric(&inst, denoiser, config)?;
    Ok((inst, trace))
}

/// One test function compared against its SE prediction.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionCheck {
    pub name: String,
    pub column: usize,
    pub empirical: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub t: usize,
    /// `(1/n) RᵀR` for `R = Xᵗ − X Kᵗ`.
    pub residual_covariance: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// `‖(1/n) RᵀR − Σᵗ‖_F`.
    pub covariance_distance: f64,
    pub tests: Vec<TestFunctionCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianityReport {
    pub rows: Vec<DiagnosticRow>,
}

impl GaussianityReport {
    pub fn at(&self, t: usize) -> Option<&DiagnosticRow> {
        self.rows.iter().find(|r| r.t == t)
    }

    pub fn max_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.covariance_distance).fold(0.0, f64::max)
    }
}

/// Law of `a·x + Z`, `Z ~ N(0, σ²)`, as a Gaussian mixture.
fn iterate_mixture(prior: ScalarPrior, a: f64, var: f64) -> Vec<(f64, f64, f64)> {
    match prior {
        ScalarPrior::Rademacher => vec![(0.5, a, var.sqrt()), (0.5, -a, var.sqrt())],
        ScalarPrior::GaussianUnit => vec![(1.0, 0.0, (a * a + var).sqrt())],
        ScalarPrior::BernoulliGaussian(eps) if eps >= 1.0 => vec![(1.0, 0.0, (a * a + var).sqrt())],
        ScalarPrior::BernoulliGaussian(eps) => vec![
            (eps, 0.0, (a * a / eps + var).sqrt()),
            (1.0 - eps, 0.0, var.sqrt()),
        ],
    }
}

fn soft(h: f64, tau: f64) -> f64 {
    h.signum() * (h.abs() - tau).max(0.0)
}

/// Compares snapshot iterates with the Gaussian law predicted by `se`.
///
/// Iterate `Xᵗ` is matched with `Kᵗ = Σ_k Λ_k Q A_kᵀ` and
/// `Σᵗ = Σ_k A_k Q A_kᵀ` at `Q = se.q[t−1]`. Requires a trace recorded
/// with snapshots; the test-function battery needs a block layout.
pub fn gaussianity_diagnostic<T: Real>(
    trace: &AmpTrace,
    instance: &MtpInstance<T>,
    se: &SeTrajectory,
) -> GaussianityReport {
    let x = instance.x.map(|v| v.to64());
    let (n, d) = x.shape();
    let lambdas = instance.couplings.matrices();
    let rule = &hermite_pair().0;
    let mut rows = Vec::new();
    for (idx, xt) in trace.iterates.iter().enumerate() {
        let t = idx + 1;
        let q = &se.q[(t - 1).min(se.q.len() - 1)];
        let mut k = DMatrix::zeros(d, d);
        let mut sigma = DMatrix::zeros(d, d);
        for (lk, ak) in lambdas.iter().zip(&trace.reweighting) {
            k += lk * q * ak.transpose();
            sigma += ak * q * ak.transpose();
        }
        let r = xt - &x * &k;
        let cov = symmetrize(&(r.transpose() * &r / n as f64));
        let distance = (&cov - &sigma).norm();

        let mut tests = Vec::new();
        if let Some(layout) = &instance.layout {
            let priors = layout.profile.priors();
            for l in 0..d {
                let var = sigma[(l, l)].max(0.0);
                let tau = var.sqrt();
                type Phi = fn(f64, f64) -> f64;
                let battery: [(&str, Phi); 3] = [
                    ("square", |h, _| h * h),
                    ("abs", |h, _| h.abs()),
                    ("soft_threshold_sq", |h, tau| soft(h, tau).powi(2)),
                ];
                for (name, phi) in battery {
                    let mut empirical = 0.0;
                    let mut predicted = 0.0;
                    for (j, range) in layout.ranges.iter().enumerate() {
                        empirical += range.clone().map(|i| phi(xt[(i, l)], tau)).sum::<f64>();
                        let frac = range.len() as f64;
                        let e: f64 = iterate_mixture(priors[j], k[(j, l)], var)
                            .into_iter()
                            .map(|(w, mu, sd)| w * rule.expect(mu, sd, |h| phi(h, tau)))
                            .sum();
                        predicted += frac * e;
                    }
                    tests.push(TestFunctionCheck {
                        name: name.into(),
                        column: l,
                        empirical: empirical / n as f64,
                        predicted: predicted / n as f64,
                    });
                }
                // (1/n) Σ_i X_ij Xᵗ_il against β_j K_jl E[x²], summed over j.
                let empirical = (0..d)
                    .map(|j| (0..n).map(|i| x[(i, j)] * xt[(i, l)]).sum::<f64>())
                    .sum::<f64>()
                    / n as f64;
                let predicted = (0..d)
                    .map(|j| layout.ranges[j].len() as f64 / n as f64 * k[(j, l)] * priors[j].second_moment())
                    .sum();
                tests.push(TestFunctionCheck {
                    name: "signal_cross".into(),
                    column: l,
                    empirical,
                    predicted,
                });
            }
        }
        rows.push(DiagnosticRow {
            t,
            residual_covariance: cov,
            sigma,
            covariance_distance: distance,
            tests,
        });
    }
    GaussianityReport { rows }
}

/// Writes `trial, t, F_hat_i_j…, Q_hat_i_j…, mse_block_1..d` rows.
pub fn write_trace_csv<W: Write>(w: &mut W, traces: &[(usize, &AmpTrace)]) -> Result<()> {
    let Some((_, first)) = traces.first() else {
        return Ok(());
    };
    let d = first.records[0].f_hat.nrows();
    let mut header = vec!["trial".to_string(), "t".to_string()];
    for tag in ["F_hat", "Q_hat"] {
        for i in 1..=d {
            for j in 1..=d {
                header.push(format!("{tag}_{i}_{j}"));
            }
        }
    }
    header.extend((1..=d).map(|j| format!("mse_block_{j}")));
    writeln!(w, "{}", header.join(","))?;
    for (trial, trace) in traces {
        for r in &trace.records {
            let mut row = vec![trial.to_string(), r.t.to_string()];
            for m in [&r.f_hat, &r.q_hat] {
                for i in 0..d {
                    for j in 0..d {
                        row.push(format!("{:.12e}", m[(i, j)]));
                    }
                }
            }
            row.extend(r.mse.iter().map(|v| format!("{v:.12e}")));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

pub fn write_trace_csv_file(path: &Path, traces: &[(usize, &AmpTrace)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace_csv(&mut w, traces)?;
    w.flush()?;
    Ok(())
}

/// Smallest eigenvalue of each recorded `Q̂ᵗ`.
pub fn min_overlap_eigenvalues(trace: &AmpTrace) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| SymmetricEigen::new(r.q_hat.clone()).eigenvalues.min())
        .collect()
}
