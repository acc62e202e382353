//! State evolution: overlap functions, the coupling operator 𝒯, SE orbits,
//! Gaussian closed forms and the matrix-MMSE gradient identity.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::denoise::{natural_moments, symmetrize, GaussianFactorDenoiser};
use crate::error::{Error, Result};
use crate::model::{BlockLayout, BlockPriorProfile, CouplingSet, ScalarPrior};
use crate::quadrature::{gaussian_expect_adaptive, hermite_pair};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Real;

/// Largest tolerated gap between the 61- and 122-node Hermite rules before
/// switching to adaptive integration.
const HERMITE_AGREEMENT: f64 = 1e-11;

/// `E[f(√s·X + Z)]` over the channel output, where `f` is evaluated in
/// normalized coordinates.
pub(crate) fn channel_expect<F: Fn(f64) -> f64>(prior: ScalarPrior, s: f64, f: F) -> Result<f64> {
    let mix = prior.channel_mixture(s);
    let (lo, hi) = hermite_pair();
    let a: f64 = mix.iter().map(|(w, m, sd)| w * lo.expect(*m, *sd, &f)).sum();
    let b: f64 = mix.iter().map(|(w, m, sd)| w * hi.expect(*m, *sd, &f)).sum();
    if (a - b).abs() <= HERMITE_AGREEMENT {
        return Ok(b);
    }
    let mut total = 0.0;
    for (w, m, sd) in mix {
        total += w * gaussian_expect_adaptive(m, sd, &f, 1e-14)?;
    }
    Ok(total)
}

/// Overlap `E[E[X | √s·X + Z]²]` of a single unit-variance coordinate.
pub fn overlap_psi_scalar(prior: ScalarPrior, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("SNR must be nonnegative, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if s.is_infinite() {
        return Ok(1.0);
    }
    let rs = s.sqrt();
    let v = channel_expect(prior, s, |y| {
        let m = natural_moments(prior, s, rs * y).0;
        m * m
    })?;
    Ok(v.clamp(0.0, 1.0))
}

/// Overlap for the shifted coordinate `X + μ`: `E[(E[X + μ | y])²]` with
/// `y = √s(X + μ) + Z`.
pub fn overlap_psi_shifted(prior: ScalarPrior, s: f64, mu: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(mu * mu);
    }
    let rs = s.sqrt();
    // The √s·μ offset is known; removing it leaves the centered channel.
    channel_expect(prior, s, |y| {
        let m = natural_moments(prior, s, rs * y).0 + mu;
        m * m
    })
}

/// `dψ/ds` by central differences with step `max(1e-5, 1e-3·s)`, using a
/// one-sided second-order stencil near `s = 0`.
pub fn overlap_psi_derivative(prior: ScalarPrior, s: f64) -> Result<f64> {
    let h = (1e-3 * s).max(1e-5);
    if s >= h {
        let a = overlap_psi_scalar(prior, s + h)?;
        let b = overlap_psi_scalar(prior, s - h)?;
        Ok((a - b) / (2.0 * h))
    } else {
        let f0 = overlap_psi_scalar(prior, s)?;
        let f1 = overlap_psi_scalar(prior, s + h)?;
        let f2 = overlap_psi_scalar(prior, s + 2.0 * h)?;
        Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h))
    }
}

/// The coupling operator `𝒯(Q) = Σ_k Λ_k Q Λ_k`.
#[derive(Debug, Clone)]
pub struct OperatorT {
    pub couplings: CouplingSet,
}

impl OperatorT {
    pub fn new(couplings: CouplingSet) -> Self {
        OperatorT { couplings }
    }

    pub fn d(&self) -> usize {
        self.couplings.d()
    }

    pub fn apply(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_t(self, q)
    }
}

pub fn apply_t(op: &OperatorT, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = op.d();
    if q.shape() != (d, d) {
        return Err(Error::InvalidDimension(format!(
            "𝒯 acts on {d}×{d} matrices, got {:?}",
            q.shape()
        )));
    }
    let mut out = DMatrix::zeros(d, d);
    for l in op.couplings.matrices() {
        out += l * q * l;
    }
    Ok(symmetrize(&out))
}

/// Limiting overlap function `ψ` of a signal model.
#[derive(Debug, Clone)]
pub enum OverlapModel {
    /// Block-diagonal signal with one scalar prior per column.
    Block(BlockPriorProfile),
    /// Gaussian matrix prior with explicit covariance factor.
    GaussianFactor(GaussianFactorDenoiser),
}

impl OverlapModel {
    pub fn d(&self) -> usize {
        match self {
            OverlapModel::Block(p) => p.d(),
            OverlapModel::GaussianFactor(g) => g.d,
        }
    }

    /// `ψ(S)`. Block models use only the diagonal of `S`.
    pub fn psi(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            OverlapModel::Block(p) => {
                let d = p.d();
                if s.shape() != (d, d) {
                    return Err(Error::InvalidDimension("S must be d×d".into()));
                }
                let mut out = DMatrix::zeros(d, d);
                for j in 0..d {
                    out[(j, j)] = p.beta()[j] * overlap_psi_scalar(p.priors()[j], s[(j, j)].max(0.0))?;
                }
                Ok(out)
            }
            OverlapModel::GaussianFactor(g) => g.overlap(s),
        }
    }

    /// Limiting second moment `(1/n) E[XᵀX]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        match self {
            OverlapModel::Block(p) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(p.beta())),
            OverlapModel::GaussianFactor(g) => {
                let phi = &g.factor * g.factor.transpose();
                let n = g.n;
                DMatrix::from_fn(g.d, g.d, |j, k| {
                    (0..n).map(|i| phi[(i + n * j, i + n * k)]).sum::<f64>() / n as f64
                })
            }
        }
    }
}

/// Vector form of the heteroskedastic SE map, `q ↦ (β_j ψ_j((Λ∘² q)_j))_j`.
pub fn se_map_vector(profile: &BlockPriorProfile, lambda2: &DMatrix<f64>, q: &[f64]) -> Result<Vec<f64>> {
    let d = profile.d();
    if lambda2.shape() != (d, d) || q.len() != d {
        return Err(Error::InvalidDimension("SE map dimensions disagree".into()));
    }
    (0..d)
        .map(|j| {
            let s: f64 = (0..d).map(|l| lambda2[(j, l)] * q[l]).sum();
            Ok(profile.beta()[j] * overlap_psi_scalar(profile.priors()[j], s.max(0.0))?)
        })
        .collect()
}

/// An SE orbit `Q^{t+1} = ψ(𝒯(Qᵗ))`. Entry `t` of `q` and `s` holds
/// `Q^{t+1}` and `S^{t+1} = 𝒯(Q^{t+1})`, so `q[0]` is the initialization.
#[derive(Debug, Clone, Serialize)]
pub struct SeTrajectory {
    pub q: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl SeTrajectory {
    pub fn fixed_point(&self) -> &DMatrix<f64> {
        self.q.last().expect("trajectory is never empty")
    }

    /// Writes `t, q_1..q_d, s_1..s_d, converged` (diagonal entries).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.q[0].nrows();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|j| format!("q_{j}")));
        header.extend((1..=d).map(|j| format!("s_{j}")));
        header.push("converged".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, (q, s)) in self.q.iter().zip(&self.s).enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend((0..d).map(|j| format!("{:.12e}", q[(j, j)])));
            row.extend((0..d).map(|j| format!("{:.12e}", s[(j, j)])));
            row.push(self.converged.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub const DEFAULT_SE_TOL: f64 = 1e-10;
pub const DEFAULT_SE_MAX_ITER: usize = 10_000;

/// Iterates `Q ↦ ψ(𝒯(Q))` from `q1` until successive iterates differ by
/// less than `tol` in Frobenius norm or `max_iter` steps are taken.
pub fn run_se(
    model: &OverlapModel,
    op: &OperatorT,
    q1: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SeTrajectory> {
    let d = model.d();
    if op.d() != d || q1.shape() != (d, d) {
        return Err(Error::InvalidDimension("SE dimensions disagree".into()));
    }
    let q1 = symmetrize(q1);
    let min = SymmetricEigen::new(q1.clone()).eigenvalues.min();
    if min < -1e-10 {
        return Err(Error::Domain(format!("initial overlap is not PSD ({min:e})")));
    }
    let mut q = vec![q1.clone()];
    let mut s = vec![apply_t(op, &q1)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = symmetrize(&model.psi(s.last().expect("nonempty"))?);
        let delta = (&next - q.last().expect("nonempty")).norm();
        s.push(apply_t(op, &next)?);
        q.push(next);
        iterations += 1;
        if delta < tol {
            converged = true;
            break;
        }
    }
    Ok(SeTrajectory {
        q,
        s,
        converged,
        iterations,
    })
}

/// Gaussian-prior overlap `ψ(S)` from a covariance factor.
pub fn gaussian_overlap(factor: &GaussianFactorDenoiser, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    factor.overlap(s)
}

/// Matrix MMSE `(1/n) E[XᵀX] − ψ(S)` for centered priors.
pub fn mmse_matrix(model: &OverlapModel, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(model.second_moment() - model.psi(s)?)
}

/// Settings of [`mmse_gradient_check`].
#[derive(Debug, Clone)]
pub struct GradientCheckConfig {
    pub n: usize,
    pub directions: usize,
    pub replications: usize,
    /// Finite-difference step along each direction.
    pub step: f64,
    /// Absolute tolerance the check is meant to resolve.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        GradientCheckConfig {
            n: 50,
            directions: 3,
            replications: 4000,
            step: 1e-4,
            tolerance: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionCheck {
    /// Unit-Frobenius PSD direction `ΔS`.
    pub direction: Vec<Vec<f64>>,
    /// Finite-difference directional derivative of `M_n` (entries `(j, j)`).
    pub finite_difference: Vec<f64>,
    /// Monte Carlo estimate of `−E[Ψ(H_S)]·vec(ΔS)` (entries `(j, j)`).
    pub monte_carlo: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// `max_j |fd_j − mc_j| / se_j`.
    pub z_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheckReport {
    pub directions: Vec<DirectionCheck>,
    pub max_z: f64,
    pub max_abs_error: f64,
}

impl GradientCheckReport {
    /// Whether every direction agrees within `k` standard errors.
    pub fn passes(&self, k: f64) -> bool {
        self.max_z <= k
    }
}

/// Checks `∇M_n(S) = −E[Ψ(H_S)]` for a block prior at finite `n`.
///
/// For block signals the conditional covariance of a row is the scalar
/// posterior variance `v_i` on its own column, so `Ψ` is supported on the
/// `((j,j),(j,j))` entries with value `(1/n) Σ_{i∈J_j} v_i²`. `M_n` is
/// evaluated by quadrature and `E[Ψ]` by Monte Carlo over the row blocks.
pub fn mmse_gradient_check(
    profile: &BlockPriorProfile,
    s: &DMatrix<f64>,
    cfg: &GradientCheckConfig,
) -> Result<GradientCheckReport> {
    let d = profile.d();
    if s.shape() != (d, d) {
        return Err(Error::InvalidDimension("S must be d×d".into()));
    }
    if cfg.n > 100 || cfg.n < d {
        return Err(Error::InvalidDimension(format!(
            "gradient check needs d ≤ n ≤ 100, got {}",
            cfg.n
        )));
    }
    let layout = BlockLayout::new(profile.clone(), cfg.n)?;
    let frac = layout.fractions();
    let priors = profile.priors();
    let mmse_n = |sm: &DMatrix<f64>| -> Result<Vec<f64>> {
        (0..d)
            .map(|j| Ok(frac[j] * (1.0 - overlap_psi_scalar(priors[j], sm[(j, j)].max(0.0))?)))
            .collect()
    };

    // Posterior-variance draws are shared across directions: Ψ does not
    // depend on the direction.
    let mut rng = stream_rng(cfg.seed, Stream::MonteCarlo(0));
    let mut psi_sum = vec![0.0; d];
    let mut psi_sq = vec![0.0; d];
    for _ in 0..cfg.replications {
        for (j, r) in layout.ranges.iter().enumerate() {
            let sj = s[(j, j)].max(0.0);
            let rs = sj.sqrt();
            let mut acc = 0.0;
            for _ in r.clone() {
                let x: f64 = priors[j].sample(&mut rng);
                let z = f64::sample_normal(&mut rng);
                let v = natural_moments(priors[j], sj, rs * (rs * x + z)).2;
                acc += v * v;
            }
            let psi = acc / cfg.n as f64;
            psi_sum[j] += psi;
            psi_sq[j] += psi * psi;
        }
    }
    let reps = cfg.replications as f64;
    let psi_mean: Vec<f64> = psi_sum.iter().map(|v| v / reps).collect();
    let psi_se: Vec<f64> = (0..d)
        .map(|j| {
            let var = (psi_sq[j] / reps - psi_mean[j] * psi_mean[j]).max(0.0) * reps / (reps - 1.0);
            (var / reps).sqrt()
        })
        .collect();

    let mut dir_rng = stream_rng(cfg.seed, Stream::MonteCarlo(1));
    let mut out = Vec::with_capacity(cfg.directions);
    let mut max_z: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for _ in 0..cfg.directions {
        let a = DMatrix::<f64>::from_fn(d, d, |_, _| f64::sample_normal(&mut dir_rng));
        let mut delta = &a * a.transpose();
        delta /= delta.norm();
        let h = cfg.step;
        let plus = mmse_n(&(s + &delta * h))?;
        let minus = mmse_n(&(s - &delta * h))?;
        let fd: Vec<f64> = (0..d).map(|j| (plus[j] - minus[j]) / (2.0 * h)).collect();
        let mc: Vec<f64> = (0..d).map(|j| -psi_mean[j] * delta[(j, j)]).collect();
        let se: Vec<f64> = (0..d).map(|j| psi_se[j] * delta[(j, j)].abs()).collect();
        let mut z: f64 = 0.0;
        for j in 0..d {
            if se[j] > 0.5 * cfg.tolerance {
                return Err(Error::Inconclusive(format!(
                    "standard error {:e} exceeds half the tolerance {:e}",
                    se[j], cfg.tolerance
                )));
            }
            let err = (fd[j] - mc[j]).abs();
            max_abs = max_abs.max(err);
            if se[j] > 0.0 {
                z = z.max(err / se[j]);
            } else if err > 1e-9 {
                z = f64::INFINITY;
            }
        }
        max_z = max_z.max(z);
        out.push(DirectionCheck {
            direction: delta.row_iter().map(|r| r.iter().copied().collect()).collect(),
            finite_difference: fd,
            monte_carlo: mc,
            standard_error: se,
            z_score: z,
        });
    }
    Ok(GradientCheckReport {
        directions: out,
        max_z,
        max_abs_error: max_abs,
    })
}

/// Monte Carlo estimate of `E[η(s, √s·X + Z)·X]` and `E[η²]`, returned as
/// `(cross, square, standard error of their difference)`.
pub fn nishimori_monte_carlo<R: Rng>(prior: ScalarPrior, s: f64, samples: usize, rng: &mut R) -> (f64, f64, f64) {
    let rs = s.sqrt();
    let (mut a, mut b, mut dd, mut dd2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let x: f64 = prior.sample(rng);
        let z = f64::sample_normal(rng);
        let m = natural_moments(prior, s, rs * (rs * x + z)).0;
        a += m * x;
        b += m * m;
        let diff = m * x - m * m;
        dd += diff;
        dd2 += diff * diff;
    }
    let n = samples as f64;
    let var = (dd2 / n - (dd / n).powi(2)).max(0.0);
    (a / n, b / n, (var / n).sqrt())
}
