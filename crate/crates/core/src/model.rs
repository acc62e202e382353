//! Signal priors, coupling structures and synthesis of MTP observations.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Real;

/// Law of a single signal coordinate. Every variant is centered with unit
/// second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScalarPrior {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// `B·N` with `B ~ Bernoulli(ε)` and `N ~ N(0, 1/ε)`.
    BernoulliGaussian(f64),
    /// Standard normal.
    GaussianUnit,
}

impl ScalarPrior {
    /// Validated Bernoulli-Gaussian prior.
    pub fn bernoulli_gaussian(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidProfile(format!(
                "Bernoulli-Gaussian sparsity must lie in (0, 1], got {eps}"
            )));
        }
        Ok(ScalarPrior::BernoulliGaussian(eps))
    }

    pub fn sample<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            ScalarPrior::Rademacher => {
                if rng.random::<bool>() {
                    T::one()
                } else {
                    -T::one()
                }
            }
            ScalarPrior::GaussianUnit => T::sample_normal(rng),
            ScalarPrior::BernoulliGaussian(eps) => {
                // One uniform and one normal per draw regardless of B keeps
                // streams aligned across different ε.
                let u: f64 = rng.random();
                let z = T::sample_normal(rng);
                if u < eps {
                    z * T::of(eps.sqrt().recip())
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `E[X²]`; every supported prior has unit second moment.
    pub fn second_moment(&self) -> f64 {
        1.0
    }

    /// Gaussian mixture law of `√s·X + Z` conditioned on each mixture
    /// component, as `(weight, mean, standard deviation)`.
    pub fn channel_mixture(&self, s: f64) -> Vec<(f64, f64, f64)> {
        let rs = s.sqrt();
        match *self {
            ScalarPrior::Rademacher => vec![(0.5, rs, 1.0), (0.5, -rs, 1.0)],
            ScalarPrior::GaussianUnit => vec![(1.0, 0.0, (1.0 + s).sqrt())],
            ScalarPrior::BernoulliGaussian(eps) if eps >= 1.0 => {
                vec![(1.0, 0.0, (1.0 + s).sqrt())]
            }
            ScalarPrior::BernoulliGaussian(eps) => vec![
                (eps, 0.0, (1.0 + s / eps).sqrt()),
                (1.0 - eps, 0.0, 1.0),
            ],
        }
    }
}

impl fmt::Display for ScalarPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarPrior::Rademacher => write!(f, "rademacher"),
            ScalarPrior::GaussianUnit => write!(f, "gaussian"),
            ScalarPrior::BernoulliGaussian(eps) => write!(f, "bg:{eps}"),
        }
    }
}

impl FromStr for ScalarPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "rademacher" => Ok(ScalarPrior::Rademacher),
            "gaussian" => Ok(ScalarPrior::GaussianUnit),
            _ => match t.strip_prefix("bg:") {
                Some(eps) => {
                    let eps: f64 = eps
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad sparsity in prior '{s}'")))?;
                    ScalarPrior::bernoulli_gaussian(eps)
                }
                None => Err(Error::Parse(format!(
                    "unknown prior '{s}' (expected rademacher, gaussian or bg:<eps>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for ScalarPrior {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScalarPrior> for String {
    fn from(p: ScalarPrior) -> String {
        p.to_string()
    }
}

/// One scalar prior and one limiting row fraction per signal column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPriorProfile {
    priors: Vec<ScalarPrior>,
    beta: Vec<f64>,
}

impl BlockPriorProfile {
    pub fn new(blocks: Vec<(ScalarPrior, f64)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidProfile("profile has no blocks".into()));
        }
        let (priors, beta): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(Error::InvalidProfile(format!(
                "block fraction {b} outside (0, 1]"
            )));
        }
        let total: f64 = beta.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProfile(format!(
                "block fractions sum to {total}, expected 1"
            )));
        }
        Ok(BlockPriorProfile { priors, beta })
    }

    /// A single block.
    pub fn single(prior: ScalarPrior) -> Self {
        BlockPriorProfile {
            priors: vec![prior],
            beta: vec![1.0],
        }
    }

    pub fn d(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[ScalarPrior] {
        &self.priors
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Row blocks `J_j` for a problem of size `n`: `n_j = round(β_j n)`,
    /// with the last block taking whatever remains.
    pub fn partition(&self, n: usize) -> Result<Vec<Range<usize>>> {
        let d = self.d();
        if n < d {
            return Err(Error::InvalidDimension(format!(
                "n = {n} is smaller than the block count {d}"
            )));
        }
        let mut out = Vec::with_capacity(d);
        let mut start = 0usize;
        for (j, b) in self.beta.iter().enumerate() {
            let end = if j + 1 == d {
                n
            } else {
                (start + (b * n as f64).round() as usize).min(n)
            };
            if end <= start {
                return Err(Error::InvalidDimension(format!(
                    "block {j} is empty at n = {n}"
                )));
            }
            out.push(start..end);
            start = end;
        }
        Ok(out)
    }
}

/// A block profile together with its concrete row partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub profile: BlockPriorProfile,
    pub ranges: Vec<Range<usize>>,
}

impl BlockLayout {
    pub fn new(profile: BlockPriorProfile, n: usize) -> Result<Self> {
        let ranges = profile.partition(n)?;
        Ok(BlockLayout { profile, ranges })
    }

    pub fn n(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// Empirical fractions `n_j / n`.
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.ranges.iter().map(|r| r.len() as f64 / n).collect()
    }
}

/// Symmetric (or, before embedding, rectangular) coupling matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    matrices: Vec<DMatrix<f64>>,
}

impl CouplingSet {
    /// Couplings of a symmetric model. Every matrix must be square,
    /// symmetric and of the same size.
    pub fn symmetric(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let set = CouplingSet::unchecked(matrices)?;
        for (k, l) in set.matrices.iter().enumerate() {
            if !l.is_square() || l.nrows() != set.d() {
                return Err(Error::CouplingValidation(format!(
                    "Λ_{k} is {}×{}, expected {d}×{d}",
                    l.nrows(),
                    l.ncols(),
                    d = set.d()
                )));
            }
            let asym = (l - l.transpose()).norm();
            if asym != 0.0 {
                return Err(Error::CouplingValidation(format!(
                    "Λ_{k} is not symmetric (‖Λ − Λᵀ‖_F = {asym:e})"
                )));
            }
        }
        Ok(set)
    }

    /// Rectangular couplings `Γ_k` of an asymmetric model.
    pub fn rectangular(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let set = CouplingSet::unchecked(matrices)?;
        let (r, c) = set.matrices[0].shape();
        if set.matrices.iter().any(|g| g.shape() != (r, c)) {
            return Err(Error::CouplingValidation(
                "coupling matrices have different shapes".into(),
            ));
        }
        Ok(set)
    }

    fn unchecked(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::CouplingValidation("no coupling matrices".into()));
        }
        if matrices.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::CouplingValidation("non-finite coupling entry".into()));
        }
        Ok(CouplingSet { matrices })
    }

    /// Single-view coupling `Λ`.
    pub fn single(lambda: DMatrix<f64>) -> Result<Self> {
        CouplingSet::symmetric(vec![lambda])
    }

    /// Signal width (row count of each matrix).
    pub fn d(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Number of views.
    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Entrywise square `Σ_k Λ_k ∘ Λ_k`.
    pub fn hadamard_square(&self) -> DMatrix<f64> {
        let d = self.d();
        let mut out = DMatrix::zeros(d, self.matrices[0].ncols());
        for l in &self.matrices {
            out += l.component_mul(l);
        }
        out
    }
}

/// Heteroskedastic coupling parametrized by a global scale:
/// `Λ = √c·Ξ^∘½`, so that `Λ∘Λ = c·Ξ`.
pub fn scaled_profile_coupling(c: f64, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c < 0.0 || xi.iter().any(|x| *x < 0.0) {
        return Err(Error::Domain(
            "scale and profile entries must be nonnegative".into(),
        ));
    }
    Ok(xi.map(|x| (c * x).sqrt()))
}

/// Coordinates of the two sides of an embedded asymmetric model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    pub n1: usize,
    pub n2: usize,
    pub d1: usize,
    pub d2: usize,
}

impl EmbeddingLayout {
    /// Aspect ratio `α = n2 / n1`.
    pub fn alpha(&self) -> f64 {
        self.n2 as f64 / self.n1 as f64
    }
}

/// A sampled MTP instance `Y_k = (1/n) X Λ_k Xᵀ + (1/√n) G_k`.
#[derive(Debug, Clone)]
pub struct MtpInstance<T: Real> {
    pub n: usize,
    pub x: DMatrix<T>,
    pub observations: Vec<DMatrix<T>>,
    pub seed: u64,
    pub couplings: CouplingSet,
    /// Block structure of the signal, when it has one.
    pub layout: Option<BlockLayout>,
    /// Present when the instance embeds an asymmetric model.
    pub embedding: Option<EmbeddingLayout>,
}

#[derive(Serialize)]
struct InstanceMeta<'a> {
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    profile: Option<&'a BlockPriorProfile>,
    partition: Option<&'a [Range<usize>]>,
    couplings: Vec<Vec<Vec<f64>>>,
    embedding: Option<EmbeddingLayout>,
}

impl<T: Real> MtpInstance<T> {
    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.observations.len()
    }

    /// Noiseless part `(1/n) X Λ_k Xᵀ` of view `k`.
    pub fn noiseless(&self, k: usize) -> DMatrix<T> {
        let lam = cast_matrix::<T>(&self.couplings.matrices()[k]);
        let xl = &self.x * lam;
        (xl * self.x.transpose()) * T::of(1.0 / self.n as f64)
    }

    /// The asymmetric observation of view `k` recovered from an embedded
    /// instance: `√(1+α)` times the upper-right block.
    pub fn asymmetric_view(&self, k: usize) -> Option<DMatrix<T>> {
        let e = self.embedding?;
        let blk = self.observations[k].view((0, e.n1), (e.n1, e.n2)).clone_owned();
        Some(blk * T::of((1.0 + e.alpha()).sqrt()))
    }

    /// Writes `X.csv`, `Y_<k>.csv` and `meta.json` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&dir.join("X.csv"), &self.x)?;
        for (k, y) in self.observations.iter().enumerate() {
            write_matrix_csv(&dir.join(format!("Y_{k}.csv")), y)?;
        }
        let meta = InstanceMeta {
            n: self.n,
            d: self.d(),
            k: self.k(),
            seed: self.seed,
            profile: self.layout.as_ref().map(|l| &l.profile),
            partition: self.layout.as_ref().map(|l| l.ranges.as_slice()),
            couplings: self
                .couplings
                .matrices()
                .iter()
                .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            embedding: self.embedding,
        };
        let f = std::fs::File::create(dir.join("meta.json"))?;
        serde_json::to_writer_pretty(f, &meta)?;
        Ok(())
    }
}

fn write_matrix_csv<T: Real>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:e}", m[(i, j)].to64()));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn cast_matrix<T: Real>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::of)
}

/// GOE matrix `(W + Wᵀ)/√2`: unit off-diagonal and doubled diagonal
/// variance.
pub fn sample_goe<T: Real>(n: usize, seed: u64) -> Result<DMatrix<T>> {
    let mut rng = stream_rng(seed, Stream::Noise(0));
    goe_from_rng(n, &mut rng)
}

fn goe_from_rng<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidDimension("GOE size must be positive".into()));
    }
    let sqrt2 = T::of(std::f64::consts::SQRT_2);
    let mut g = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        g[(j, j)] = T::sample_normal(rng) * sqrt2;
        for i in 0..j {
            let v = T::sample_normal(rng);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Block-diagonal signal drawn from `profile`.
pub fn sample_signal<T: Real>(
    profile: &BlockPriorProfile,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<T>, BlockLayout)> {
    let layout = BlockLayout::new(profile.clone(), n)?;
    let mut x = DMatrix::<T>::zeros(n, profile.d());
    let mut rng = stream_rng(seed, Stream::Signal);
    for (j, (range, prior)) in layout.ranges.iter().zip(profile.priors()).enumerate() {
        for i in range.clone() {
            x[(i, j)] = prior.sample(&mut rng);
        }
    }
    Ok((x, layout))
}

/// Spreads a length-`n` vector over the block columns of `layout`.
pub fn lift_block_diagonal<T: Real>(x: &[T], layout: &BlockLayout) -> Result<DMatrix<T>> {
    if x.len() != layout.n() {
        return Err(Error::InvalidDimension(format!(
            "vector has length {}, layout covers {}",
            x.len(),
            layout.n()
        )));
    }
    let mut out = DMatrix::<T>::zeros(x.len(), layout.ranges.len());
    for (j, r) in layout.ranges.iter().enumerate() {
        for i in r.clone() {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

/// Observations of `X` through every coupling with independent GOE noise.
pub fn synthesize_symmetric<T: Real>(
    x: &DMatrix<T>,
    couplings: &CouplingSet,
    seed: u64,
) -> Result<MtpInstance<T>> {
    let couplings = CouplingSet::symmetric(couplings.matrices().to_vec())?;
    let (n, d) = x.shape();
    if couplings.d() != d {
        return Err(Error::InvalidDimension(format!(
            "couplings are {}×{}, signal has width {d}",
            couplings.d(),
            couplings.d()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidDimension("empty signal".into()));
    }
    let inv_n = T::of(1.0 / n as f64);
    let inv_sqrt_n = T::of(1.0 / (n as f64).sqrt());
    let mut obs = Vec::with_capacity(couplings.k());
    for (k, lam) in couplings.matrices().iter().enumerate() {
        let mut rng = stream_rng(seed, Stream::Noise(k as u32));
        let mut y = goe_from_rng::<T, _>(n, &mut rng)?;
        y *= inv_sqrt_n;
        let xl = x * cast_matrix::<T>(lam);
        y.gemm(inv_n, &xl, &x.transpose(), T::one());
        symmetrize_in_place(&mut y);
        obs.push(y);
    }
    Ok(MtpInstance {
        n,
        x: x.clone(),
        observations: obs,
        seed,
        couplings,
        layout: None,
        embedding: None,
    })
}

/// Same as [`synthesize_symmetric`] for a block signal, keeping its layout.
pub fn synthesize_block<T: Real>(
    x: &DMatrix<T>,
    layout: &BlockLayout,
    couplings: &CouplingSet,
    seed: u64,
) -> Result<MtpInstance<T>> {
    if layout.n() != x.nrows() || layout.ranges.len() != x.ncols() {
        return Err(Error::InvalidDimension(
            "layout does not match the signal".into(),
        ));
    }
    let mut inst = synthesize_symmetric(x, couplings, seed)?;
    inst.layout = Some(layout.clone());
    Ok(inst)
}

// Floating-point products are not exactly symmetric; mirror the upper
// triangle.
fn symmetrize_in_place<T: Real>(y: &mut DMatrix<T>) {
    let n = y.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = y[(i, j)];
            y[(j, i)] = v;
        }
    }
}

/// Heteroskedastic rank-one observation of `x` with block SNR coupling `Λ`.
pub fn synthesize_heteroskedastic<T: Real>(
    x: &[T],
    lambda: &DMatrix<f64>,
    profile: &BlockPriorProfile,
    seed: u64,
) -> Result<MtpInstance<T>> {
    if lambda.nrows() != profile.d() {
        return Err(Error::InvalidDimension(format!(
            "Λ is {}×{}, profile has {} blocks",
            lambda.nrows(),
            lambda.ncols(),
            profile.d()
        )));
    }
    let layout = BlockLayout::new(profile.clone(), x.len())?;
    let lifted = lift_block_diagonal(x, &layout)?;
    let couplings = CouplingSet::single(lambda.clone())?;
    synthesize_block(&lifted, &layout, &couplings, seed)
}

/// Entry `(a, b)` of the SNR profile matrix `Δ`, i.e. `Λ_{jl}` for
/// `a ∈ J_j`, `b ∈ J_l`, computed without materializing `Δ`.
pub fn snr_profile_entry(lambda: &DMatrix<f64>, layout: &BlockLayout, a: usize, b: usize) -> f64 {
    let block = |i: usize| {
        layout
            .ranges
            .iter()
            .position(|r| r.contains(&i))
            .expect("index inside the layout")
    };
    lambda[(block(a), block(b))]
}

/// Symmetric embedding of the asymmetric model
/// `Y_k = (1/n1) X1 Γ_k X2ᵀ + W_k/√n1` on the direct sum `X1 ⊕ X2`.
///
/// The embedded coupling is `[[0, √(1+α)Γ], [√(1+α)Γᵀ, 0]]` and the
/// diagonal noise blocks are fresh GOE draws. Optional layouts for the two
/// sides are concatenated into a layout of the embedding.
pub fn embed_asymmetric<T: Real>(
    x1: &DMatrix<T>,
    x2: &DMatrix<T>,
    gammas: &CouplingSet,
    layouts: Option<(&BlockLayout, &BlockLayout)>,
    seed: u64,
) -> Result<MtpInstance<T>> {
    let (n1, d1) = x1.shape();
    let (n2, d2) = x2.shape();
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidDimension("empty side in embedding".into()));
    }
    if gammas.matrices()[0].shape() != (d1, d2) {
        return Err(Error::InvalidDimension(format!(
            "Γ is {:?}, expected ({d1}, {d2})",
            gammas.matrices()[0].shape()
        )));
    }
    let e = EmbeddingLayout { n1, n2, d1, d2 };
    let nn = n1 + n2;
    let dd = d1 + d2;
    let scale = (1.0 + e.alpha()).sqrt();

    let mut x = DMatrix::<T>::zeros(nn, dd);
    x.view_mut((0, 0), (n1, d1)).copy_from(x1);
    x.view_mut((n1, d1), (n2, d2)).copy_from(x2);

    let mut lambdas = Vec::with_capacity(gammas.k());
    for g in gammas.matrices() {
        let mut l = DMatrix::<f64>::zeros(dd, dd);
        l.view_mut((0, d1), (d1, d2)).copy_from(&(g * scale));
        l.view_mut((d1, 0), (d2, d1)).copy_from(&(g.transpose() * scale));
        lambdas.push(l);
    }
    let couplings = CouplingSet::symmetric(lambdas)?;

    let inv_n = T::of(1.0 / nn as f64);
    let inv_sqrt_n = T::of(1.0 / (nn as f64).sqrt());
    let mut obs = Vec::with_capacity(couplings.k());
    for (k, lam) in couplings.matrices().iter().enumerate() {
        let mut rng = stream_rng(seed, Stream::Noise(k as u32));
        let mut g = DMatrix::<T>::zeros(nn, nn);
        for j in 0..n2 {
            for i in 0..n1 {
                let v = T::sample_normal(&mut rng);
                g[(i, n1 + j)] = v;
                g[(n1 + j, i)] = v;
            }
        }
        let mut aux = stream_rng(seed, Stream::NoiseAux(k as u32));
        let g11 = goe_from_rng::<T, _>(n1, &mut aux)?;
        let g22 = goe_from_rng::<T, _>(n2, &mut aux)?;
        g.view_mut((0, 0), (n1, n1)).copy_from(&g11);
        g.view_mut((n1, n1), (n2, n2)).copy_from(&g22);
        g *= inv_sqrt_n;
        let xl = &x * cast_matrix::<T>(lam);
        g.gemm(inv_n, &xl, &x.transpose(), T::one());
        symmetrize_in_place(&mut g);
        obs.push(g);
    }

    let layout = match layouts {
        None => None,
        Some((l1, l2)) => {
            if l1.n() != n1 || l2.n() != n2 || l1.ranges.len() != d1 || l2.ranges.len() != d2 {
                return Err(Error::InvalidDimension(
                    "side layouts do not match the signals".into(),
                ));
            }
            let w1 = n1 as f64 / nn as f64;
            let w2 = n2 as f64 / nn as f64;
            let blocks: Vec<(ScalarPrior, f64)> = l1
                .profile
                .priors()
                .iter()
                .zip(l1.profile.beta())
                .map(|(p, b)| (*p, b * w1))
                .chain(
                    l2.profile
                        .priors()
                        .iter()
                        .zip(l2.profile.beta())
                        .map(|(p, b)| (*p, b * w2)),
                )
                .collect();
            let profile = BlockPriorProfile::new(blocks)?;
            let ranges = l1
                .ranges
                .iter()
                .cloned()
                .chain(l2.ranges.iter().map(|r| r.start + n1..r.end + n1))
                .collect();
            Some(BlockLayout { profile, ranges })
        }
    };

    Ok(MtpInstance {
        n: nn,
        x,
        observations: obs,
        seed,
        couplings,
        layout,
        embedding: Some(e),
    })
}
