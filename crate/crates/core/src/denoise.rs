//! Bayes-optimal posterior-mean denoisers and their divergences.
//!
//! Scalar functions come in two parametrizations. The *normalized* form
//! takes `y = √s·X + Z` and is what callers usually want. The *natural*
//! form takes `h = s·X + √s·Z = √s·y`, which is how an AMP iterate
//! presents a block column under matched reweighting; it stays finite as
//! `s → 0`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{BlockLayout, ScalarPrior};
use crate::scalar::Real;

fn check_snr(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("SNR must be a finite nonnegative number, got {s}")))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Slab responsibility of the Bernoulli-Gaussian posterior in natural
/// coordinates, via its log-odds.
#[inline]
fn bg_responsibility(eps: f64, s: f64, h: f64) -> f64 {
    let log_odds = (eps / (1.0 - eps)).ln() - 0.5 * (1.0 + s / eps).ln()
        + 0.5 * h * h / (eps + s);
    sigmoid(log_odds)
}

/// `(E[X | h], ∂/∂h E[X | h], Var[X | h])` for `h = s·X + √s·Z`.
#[inline]
pub fn natural_moments(prior: ScalarPrior, s: f64, h: f64) -> (f64, f64, f64) {
    match prior {
        ScalarPrior::Rademacher => {
            let t = h.tanh();
            let v = 1.0 - t * t;
            (t, v, v)
        }
        ScalarPrior::GaussianUnit => {
            let v = 1.0 / (1.0 + s);
            (h * v, v, v)
        }
        ScalarPrior::BernoulliGaussian(eps) if eps >= 1.0 => {
            natural_moments(ScalarPrior::GaussianUnit, s, h)
        }
        ScalarPrior::BernoulliGaussian(eps) => {
            let pi = bg_responsibility(eps, s, h);
            let inv = 1.0 / (eps + s);
            let slab_mean = h * inv;
            let mean = pi * slab_mean;
            let dlogodds = h * inv;
            let deriv = inv * pi + slab_mean * pi * (1.0 - pi) * dlogodds;
            let second = pi * (slab_mean * slab_mean + inv);
            (mean, deriv, (second - mean * mean).max(0.0))
        }
    }
}

/// `E[X | √s·X + Z = y]`.
pub fn posterior_mean_scalar(prior: ScalarPrior, s: f64, y: f64) -> Result<f64> {
    check_snr(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(natural_moments(prior, s, s.sqrt() * y).0)
}

/// `∂/∂y E[X | √s·X + Z = y]`.
pub fn posterior_mean_derivative_scalar(prior: ScalarPrior, s: f64, y: f64) -> Result<f64> {
    check_snr(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let rs = s.sqrt();
    Ok(rs * natural_moments(prior, s, rs * y).1)
}

/// `Var[X | √s·X + Z = y]`.
pub fn posterior_variance_scalar(prior: ScalarPrior, s: f64, y: f64) -> Result<f64> {
    check_snr(s)?;
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok(natural_moments(prior, s, s.sqrt() * y).2)
}

/// Law of an AMP iterate `H ≈ X·K + Z`, rows of `Z` distributed as
/// `N(0, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub k: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// `K = Σ = S`, the situation under Bayes-optimal reweighting.
    pub matched: bool,
}

impl ChannelParams {
    /// Matched channel with effective SNR `S` (symmetrized on input).
    pub fn matched(s: &DMatrix<f64>) -> Result<Self> {
        let s = symmetrize(s);
        check_psd(&s, 1e-10)?;
        Ok(ChannelParams {
            k: s.clone(),
            sigma: s,
            matched: true,
        })
    }

    pub fn general(k: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if k.shape() != sigma.shape() || !k.is_square() {
            return Err(Error::InvalidDimension("K and Σ must be d×d".into()));
        }
        let sigma = symmetrize(&sigma);
        check_psd(&sigma, 1e-10)?;
        Ok(ChannelParams {
            k,
            sigma,
            matched: false,
        })
    }

    pub fn d(&self) -> usize {
        self.k.nrows()
    }

    /// Effective SNR `S = K Σ† Kᵀ`.
    pub fn effective_snr(&self) -> DMatrix<f64> {
        if self.matched {
            return self.sigma.clone();
        }
        let pinv = pseudo_inverse(&self.sigma);
        symmetrize(&(&self.k * pinv * self.k.transpose()))
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_psd(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite SNR matrix".into()));
    }
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    let scale = m.norm().max(1.0);
    if min < -tol * scale {
        return Err(Error::Domain(format!(
            "SNR matrix is not PSD (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

pub(crate) fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let cutoff = 1e-12 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let inv = eig
        .eigenvalues
        .map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Denoiser output together with the empirical divergence matrix
/// `D̂_{jk} = (1/n) Σ_i ∂[f(H)]_{ik} / ∂H_{ij}`.
#[derive(Debug, Clone)]
pub struct DenoiserEval<T: Real> {
    pub value: DMatrix<T>,
    pub divergence: DMatrix<f64>,
}

/// A denoiser usable inside AMP. The input is the raw iterate `H`.
pub trait Denoiser<T: Real>: Sync {
    fn denoise(&self, h: &DMatrix<T>, channel: &ChannelParams) -> Result<DenoiserEval<T>>;
}

/// Separable posterior-mean denoiser for block-diagonal signals.
#[derive(Debug, Clone)]
pub struct BlockDenoiser {
    pub layout: BlockLayout,
}

impl BlockDenoiser {
    pub fn new(layout: BlockLayout) -> Self {
        BlockDenoiser { layout }
    }
}

impl<T: Real> Denoiser<T> for BlockDenoiser {
    fn denoise(&self, h: &DMatrix<T>, channel: &ChannelParams) -> Result<DenoiserEval<T>> {
        let d = self.layout.ranges.len();
        let n = h.nrows();
        if h.ncols() != d || n != self.layout.n() || channel.d() != d {
            return Err(Error::InvalidDimension(format!(
                "denoiser expects {}×{d} input, got {}×{}",
                self.layout.n(),
                n,
                h.ncols()
            )));
        }
        let priors = self.layout.profile.priors();
        let mut value = DMatrix::<T>::zeros(n, d);
        let mut div = DMatrix::<f64>::zeros(d, d);
        if channel.matched {
            // Rows of block j carry all their information in column j.
            for (j, r) in self.layout.ranges.iter().enumerate() {
                let s = channel.sigma[(j, j)].max(0.0);
                let mut acc = 0.0;
                for i in r.clone() {
                    let (m, dm, _) = natural_moments(priors[j], s, h[(i, j)].to64());
                    value[(i, j)] = T::of(m);
                    acc += dm;
                }
                div[(j, j)] = acc / n as f64;
            }
        } else {
            let pinv = pseudo_inverse(&channel.sigma);
            for (j, r) in self.layout.ranges.iter().enumerate() {
                // Sufficient statistic w·h_i with w = Σ† K_{j,:}ᵀ.
                let kj = channel.k.row(j).transpose();
                let w = &pinv * &kj;
                let s = kj.dot(&w).max(0.0);
                let mut acc = 0.0;
                for i in r.clone() {
                    let t: f64 = (0..d).map(|l| w[l] * h[(i, l)].to64()).sum();
                    let (m, dm, _) = natural_moments(priors[j], s, t);
                    value[(i, j)] = T::of(m);
                    acc += dm;
                }
                for l in 0..d {
                    div[(l, j)] = acc * w[l] / n as f64;
                }
            }
        }
        Ok(DenoiserEval {
            value,
            divergence: div,
        })
    }
}

/// Separable denoiser evaluated in normalized coordinates: entry `(i, j)`
/// of the output is `E[X | √s_j·X + Z = Y_ij]` for `i ∈ J_j`, with
/// `s_j = S_jj`. The divergence is taken with respect to `Y`.
///
/// Off-diagonal entries of `S` do not enter; a block row's sufficient
/// statistic is its own column.
pub fn block_denoiser<T: Real>(
    layout: &BlockLayout,
    s: &DMatrix<f64>,
    y: &DMatrix<T>,
) -> Result<DenoiserEval<T>> {
    let d = layout.ranges.len();
    let n = y.nrows();
    if y.ncols() != d || n != layout.n() || s.shape() != (d, d) {
        return Err(Error::InvalidDimension("block denoiser shapes disagree".into()));
    }
    let off = (0..d)
        .flat_map(|a| (0..d).filter(move |b| *b != a).map(move |b| (a, b)))
        .map(|(a, b)| s[(a, b)].abs())
        .fold(0.0, f64::max);
    if off > 1e-8 {
        log::debug!("block denoiser ignores off-diagonal SNR entries (max {off:e})");
    }
    let priors = layout.profile.priors();
    let mut value = DMatrix::<T>::zeros(n, d);
    let mut div = DMatrix::<f64>::zeros(d, d);
    for (j, r) in layout.ranges.iter().enumerate() {
        let sj = s[(j, j)];
        check_snr(sj)?;
        let mut acc = 0.0;
        for i in r.clone() {
            let yi = y[(i, j)].to64();
            value[(i, j)] = T::of(posterior_mean_scalar(priors[j], sj, yi)?);
            acc += posterior_mean_derivative_scalar(priors[j], sj, yi)?;
        }
        div[(j, j)] = acc / n as f64;
    }
    Ok(DenoiserEval {
        value,
        divergence: div,
    })
}

/// Posterior mean for a Gaussian matrix prior `vec(X) ~ N(0, VVᵀ)`
/// (column-major `vec`, `V` of size `nd × q`).
#[derive(Debug, Clone)]
pub struct GaussianFactorDenoiser {
    pub factor: DMatrix<f64>,
    pub n: usize,
    pub d: usize,
}

const MAX_CONDITION: f64 = 1e12;

impl GaussianFactorDenoiser {
    pub fn new(factor: DMatrix<f64>, n: usize, d: usize) -> Result<Self> {
        if factor.nrows() != n * d {
            return Err(Error::InvalidDimension(format!(
                "factor has {} rows, expected n·d = {}",
                factor.nrows(),
                n * d
            )));
        }
        Ok(GaussianFactorDenoiser { factor, n, d })
    }

    /// `(S ⊗ I_n)·v` for column-major `v`.
    fn kron_apply(&self, s: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(v.nrows(), v.ncols());
        for c in 0..v.ncols() {
            for j in 0..self.d {
                for k in 0..self.d {
                    let w = s[(j, k)];
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        out[(i + n * j, c)] += w * v[(i + n * k, c)];
                    }
                }
            }
        }
        out
    }

    /// `V (I + Vᵀ(S⊗I)V)⁻¹` as an `nd × q` matrix.
    fn gain(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let v = &self.factor;
        let q = v.ncols();
        let sv = self.kron_apply(s, v);
        let c = DMatrix::<f64>::identity(q, q) + v.transpose() * sv;
        let c = symmetrize(&c);
        let eig = SymmetricEigen::new(c.clone()).eigenvalues;
        let cond = eig.max() / eig.min();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Conditioning(cond));
        }
        let chol = Cholesky::new(c).ok_or(Error::Conditioning(f64::INFINITY))?;
        Ok(chol.solve(&v.transpose()).transpose())
    }

    /// `(linear map L, divergence)`, `L` acting on `vec(input)`.
    fn linear_map(&self, s: &DMatrix<f64>, s_half: Option<&DMatrix<f64>>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let g = self.gain(s)?;
        let mut w = self.factor.transpose();
        if let Some(r) = s_half {
            // Vᵀ(S^{1/2} ⊗ I) = ((S^{1/2} ⊗ I) V)ᵀ since S^{1/2} is symmetric.
            w = self.kron_apply(r, &self.factor).transpose();
        }
        let l = g * w;
        let n = self.n;
        let mut div = DMatrix::zeros(self.d, self.d);
        for j in 0..self.d {
            for k in 0..self.d {
                let tr: f64 = (0..n).map(|i| l[(i + n * k, i + n * j)]).sum();
                div[(j, k)] = tr / n as f64;
            }
        }
        Ok((l, div))
    }

    /// `g(y; S) = V(I + Vᵀ(S⊗I)V)⁻¹Vᵀ(S^{1/2}⊗I)·vec(y)`.
    pub fn denoise_normalized(&self, s: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DenoiserEval<f64>> {
        self.check_input(s, y)?;
        let s = symmetrize(s);
        check_psd(&s, 1e-10)?;
        let (l, div) = self.linear_map(&s, Some(&psd_sqrt(&s)))?;
        Ok(DenoiserEval {
            value: self.unvec(&(l * self.vec(y))),
            divergence: div,
        })
    }

    /// Gaussian overlap `(1/n) tr_n{V(I + Vᵀ(S⊗I)V)⁻¹Vᵀ(S⊗I)VVᵀ}`.
    pub fn overlap(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if s.shape() != (self.d, self.d) {
            return Err(Error::InvalidDimension("S must be d×d".into()));
        }
        let s = symmetrize(s);
        check_psd(&s, 1e-10)?;
        let g = self.gain(&s)?;
        let v = &self.factor;
        let m = g * (v.transpose() * self.kron_apply(&s, v)) * v.transpose();
        Ok(symmetrize(&self.partial_trace(&m)))
    }

    fn partial_trace(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(self.d, self.d, |j, k| {
            (0..n).map(|i| m[(i + n * j, i + n * k)]).sum::<f64>() / n as f64
        })
    }

    fn check_input(&self, s: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        if s.shape() != (self.d, self.d) || y.shape() != (self.n, self.d) {
            return Err(Error::InvalidDimension("Gaussian denoiser shapes disagree".into()));
        }
        Ok(())
    }

    fn vec<T: Real>(&self, y: &DMatrix<T>) -> DMatrix<f64> {
        DMatrix::from_iterator(self.n * self.d, 1, y.iter().map(|x| x.to64()))
    }

    fn unvec<T: Real>(&self, v: &DMatrix<f64>) -> DMatrix<T> {
        DMatrix::from_iterator(self.n, self.d, v.iter().map(|x| T::of(*x)))
    }
}

impl<T: Real> Denoiser<T> for GaussianFactorDenoiser {
    fn denoise(&self, h: &DMatrix<T>, channel: &ChannelParams) -> Result<DenoiserEval<T>> {
        if h.shape() != (self.n, self.d) || channel.d() != self.d {
            return Err(Error::InvalidDimension("Gaussian denoiser shapes disagree".into()));
        }
        // Natural coordinates: for H = X·K + Z with Z ~ N(0, Σ⊗I) the
        // posterior mean is V(I + Vᵀ(S⊗I)V)⁻¹Vᵀ(KΣ†⊗I)·vec(H).
        let s = channel.effective_snr();
        let pre = if channel.matched {
            None
        } else {
            Some(&channel.k * pseudo_inverse(&channel.sigma))
        };
        let g = self.gain(&s)?;
        let w = match &pre {
            None => self.factor.transpose(),
            Some(a) => self.kron_apply(&a.transpose(), &self.factor).transpose(),
        };
        let l = g * w;
        let n = self.n;
        let div = DMatrix::from_fn(self.d, self.d, |j, k| {
            (0..n).map(|i| l[(i + n * k, i + n * j)]).sum::<f64>() / n as f64
        });
        Ok(DenoiserEval {
            value: self.unvec(&(l * self.vec(h))),
            divergence: div,
        })
    }
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let r = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&r) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BlockPriorProfile;

    const PRIORS: [ScalarPrior; 4] = [
        ScalarPrior::Rademacher,
        ScalarPrior::GaussianUnit,
        ScalarPrior::BernoulliGaussian(0.1),
        ScalarPrior::BernoulliGaussian(0.5),
    ];

    #[test]
    fn rademacher_matches_likelihood_ratio() {
        // E[X|y] = (φ(y-√s) - φ(y+√s)) / (φ(y-√s) + φ(y+√s))
        for &s in &[0.1, 1.0, 4.0] {
            for &y in &[-3.0, -0.4, 0.0, 0.7, 2.5] {
                let rs: f64 = (s as f64).sqrt();
                let a = (-(y - rs) * (y - rs) / 2.0f64).exp();
                let b = (-(y + rs) * (y + rs) / 2.0f64).exp();
                let oracle = (a - b) / (a + b);
                let got = posterior_mean_scalar(ScalarPrior::Rademacher, s, y).unwrap();
                assert!((got - oracle).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_snr_and_domain() {
        for p in PRIORS {
            assert_eq!(posterior_mean_scalar(p, 0.0, 3.0).unwrap(), 0.0);
            assert_eq!(posterior_mean_derivative_scalar(p, 0.0, 3.0).unwrap(), 0.0);
            assert!(posterior_mean_scalar(p, -1.0, 0.0).is_err());
        }
    }

    #[test]
    fn bg_one_is_gaussian() {
        for &s in &[0.3, 2.0, 50.0] {
            for &y in &[-8.0, -1.0, 0.2, 5.0] {
                let a = posterior_mean_scalar(ScalarPrior::BernoulliGaussian(1.0), s, y).unwrap();
                let b = posterior_mean_scalar(ScalarPrior::GaussianUnit, s, y).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bg_is_stable_for_large_inputs() {
        let p = ScalarPrior::BernoulliGaussian(0.05);
        for &y in &[40.0, -200.0, 1e4] {
            let m = posterior_mean_scalar(p, 2.0, y).unwrap();
            let slab = 2.0f64.sqrt() * y / (0.05 + 2.0);
            assert!(m.is_finite());
            assert!((m - slab).abs() < 1e-9 * slab.abs());
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-5;
        for p in PRIORS {
            for &s in &[0.1, 1.0, 10.0] {
                let mut y = -10.0;
                while y <= 10.0 {
                    let fd = (posterior_mean_scalar(p, s, y + h).unwrap()
                        - posterior_mean_scalar(p, s, y - h).unwrap())
                        / (2.0 * h);
                    let an = posterior_mean_derivative_scalar(p, s, y).unwrap();
                    let scale = an.abs().max(1e-3);
                    assert!((fd - an).abs() / scale < 1e-6, "{p} s={s} y={y}: {fd} vs {an}");
                    y += 0.25;
                }
            }
        }
    }

    #[test]
    fn tweedie_derivative_equals_scaled_variance() {
        for p in PRIORS {
            for &s in &[0.5, 3.0] {
                for &y in &[-2.0, 0.0, 1.5] {
                    let d = posterior_mean_derivative_scalar(p, s, y).unwrap();
                    let v = posterior_variance_scalar(p, s, y).unwrap();
                    assert!((d - s.sqrt() * v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_denoiser_zero_input() {
        let prof = BlockPriorProfile::new(vec![
            (ScalarPrior::Rademacher, 0.6),
            (ScalarPrior::GaussianUnit, 0.4),
        ])
        .unwrap();
        let layout = BlockLayout::new(prof, 10).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let y = DMatrix::<f64>::zeros(10, 2);
        let out = block_denoiser(&layout, &s, &y).unwrap();
        assert!(out.value.iter().all(|v| *v == 0.0));
        assert!((out.divergence[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((out.divergence[(1, 1)] - 0.4 * 3.0f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(out.divergence[(0, 1)], 0.0);
    }

    #[test]
    fn general_channel_reduces_to_matched() {
        let prof = BlockPriorProfile::new(vec![
            (ScalarPrior::Rademacher, 0.5),
            (ScalarPrior::BernoulliGaussian(0.3), 0.5),
        ])
        .unwrap();
        let layout = BlockLayout::new(prof, 8).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let h = DMatrix::from_fn(8, 2, |i, j| ((i * 3 + j) as f64).sin());
        let den = BlockDenoiser::new(layout);
        let a: DenoiserEval<f64> = den.denoise(&h, &ChannelParams::matched(&s).unwrap()).unwrap();
        let b: DenoiserEval<f64> = den
            .denoise(&h, &ChannelParams::general(s.clone(), s.clone()).unwrap())
            .unwrap();
        assert!((a.value - b.value).amax() < 1e-12);
        assert!((a.divergence - b.divergence).amax() < 1e-12);
    }

    #[test]
    fn gaussian_factor_isotropic() {
        let n = 4;
        let den = GaussianFactorDenoiser::new(DMatrix::identity(n, n), n, 1).unwrap();
        let s = DMatrix::from_element(1, 1, 2.0);
        let y = DMatrix::from_column_slice(n, 1, &[1.0, -2.0, 0.5, 3.0]);
        let out = den.denoise_normalized(&s, &y).unwrap();
        let c = 2.0f64.sqrt() / 3.0;
        for i in 0..n {
            assert!((out.value[(i, 0)] - c * y[(i, 0)]).abs() < 1e-14);
        }
        assert!((out.divergence[(0, 0)] - c).abs() < 1e-14);
        let zero = den.denoise_normalized(&DMatrix::zeros(1, 1), &y).unwrap();
        assert!(zero.value.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gaussian_factor_rejects_ill_conditioning() {
        let v = DMatrix::from_row_slice(2, 2, &[1e7, 0.0, 0.0, 1.0]);
        let den = GaussianFactorDenoiser::new(v, 2, 1).unwrap();
        let s = DMatrix::from_element(1, 1, 1.0);
        let y = DMatrix::zeros(2, 1);
        assert!(matches!(
            den.denoise_normalized(&s, &y),
            Err(Error::Conditioning(_))
        ));
    }
}
