//! Completely positive operators, restricted PSD-cone norms and stability
//! of SE fixed points.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::Serialize;

use crate::denoise::symmetrize;
use crate::error::{Error, Result};
use crate::model::CouplingSet;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Real;
use crate::se::{apply_t, overlap_psi_derivative, OperatorT, OverlapModel};

/// `T(X) = Σ_k L_k X L_kᵀ`.
#[derive(Debug, Clone)]
pub struct CpOperator {
    pub kraus: Vec<DMatrix<f64>>,
}

impl CpOperator {
    pub fn new(kraus: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidDimension("empty Kraus list".into()))?;
        let d = first.nrows();
        if kraus.iter().any(|l| l.shape() != (d, d)) {
            return Err(Error::InvalidDimension("Kraus factors must all be d×d".into()));
        }
        Ok(CpOperator { kraus })
    }

    /// The operator `𝒯` of a coupling set.
    pub fn from_couplings(c: &CouplingSet) -> Self {
        CpOperator {
            kraus: c.matrices().to_vec(),
        }
    }

    pub fn d(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d(), self.d());
        for l in &self.kraus {
            out += l * x * l.transpose();
        }
        out
    }

    /// Multiplies every Kraus factor by `√c`, scaling the operator by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let r = c.sqrt();
        CpOperator {
            kraus: self.kraus.iter().map(|l| l * r).collect(),
        }
    }

    /// Matrix of the operator acting on column-major `vec(X)`: `Σ L ⊗ L`.
    pub fn superoperator(&self) -> DMatrix<f64> {
        let d = self.d();
        let mut out = DMatrix::zeros(d * d, d * d);
        for l in &self.kraus {
            out += l.kronecker(l);
        }
        out
    }
}

/// Eigenpair of a CP operator on `ℝ^{d×d}`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenTerm {
    pub value: f64,
    pub vector: DMatrix<f64>,
    pub symmetric: bool,
}

/// Choi matrix, canonical Kraus form and (for self-adjoint operators) the
/// symmetric/skew eigendecomposition.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralForm {
    pub choi: DMatrix<f64>,
    /// `(θ_i, V_i)` with `θ_i > 1e-12` and Frobenius-orthonormal `V_i`.
    pub canonical_kraus: Vec<(f64, DMatrix<f64>)>,
    /// Present when the operator is self-adjoint in the Frobenius inner
    /// product (for instance when every Kraus factor is symmetric).
    pub eigen: Option<Vec<EigenTerm>>,
}

impl SpectralForm {
    /// Kraus rank, the rank of the Choi matrix.
    pub fn kraus_rank(&self) -> usize {
        self.canonical_kraus.len()
    }

    /// Applies `Σ θ_i V_i X V_iᵀ`.
    pub fn apply_canonical(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = x.nrows();
        let mut out = DMatrix::zeros(d, d);
        for (t, v) in &self.canonical_kraus {
            out += v * x * v.transpose() * *t;
        }
        out
    }

    /// Largest `|λ_i|` over symmetric eigenvectors.
    pub fn max_symmetric_eigenvalue(&self) -> Option<f64> {
        self.eigen.as_ref().map(|e| {
            e.iter()
                .filter(|t| t.symmetric)
                .map(|t| t.value.abs())
                .fold(0.0, f64::max)
        })
    }
}

fn unvec(v: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v)
}

/// Orthonormal bases of symmetric and skew-symmetric `d×d` matrices, as
/// columns of vectorizations.
fn sym_skew_bases(d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut sym = Vec::new();
    let mut skew = Vec::new();
    for j in 0..d {
        for i in 0..=j {
            let mut v = vec![0.0; d * d];
            if i == j {
                v[i + d * i] = 1.0;
                sym.push(v);
            } else {
                v[i + d * j] = r;
                v[j + d * i] = r;
                sym.push(v.clone());
                v[j + d * i] = -r;
                skew.push(v);
            }
        }
    }
    let to_mat = |cols: Vec<Vec<f64>>| {
        let n = cols.len();
        DMatrix::from_fn(d * d, n, |a, b| cols[b][a])
    };
    (to_mat(sym), to_mat(skew))
}

pub fn choi_and_kraus(op: &CpOperator) -> SpectralForm {
    let d = op.d();
    let mut choi = DMatrix::zeros(d * d, d * d);
    for l in &op.kraus {
        let v = DVector::from_column_slice(l.as_slice());
        choi += &v * v.transpose();
    }
    let eig = SymmetricEigen::new(choi.clone());
    let mut canonical: Vec<(f64, DMatrix<f64>)> = (0..d * d)
        .filter(|&i| eig.eigenvalues[i] > 1e-12)
        .map(|i| {
            let u: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            (eig.eigenvalues[i], unvec(&u, d))
        })
        .collect();
    canonical.sort_by(|a, b| b.0.total_cmp(&a.0));

    let sup = op.superoperator();
    let self_adjoint = (&sup - sup.transpose()).amax() <= 1e-12 * sup.amax().max(1.0);
    let eigen = self_adjoint.then(|| {
        // The operator commutes with transposition, so the symmetric and
        // skew subspaces are invariant; diagonalize each separately.
        let (bs, bk) = sym_skew_bases(d);
        let mut terms = Vec::with_capacity(d * d);
        for (basis, symmetric) in [(bs, true), (bk, false)] {
            if basis.ncols() == 0 {
                continue;
            }
            let restricted = symmetrize(&(basis.transpose() * &sup * &basis));
            let e = SymmetricEigen::new(restricted);
            for i in 0..basis.ncols() {
                let v = &basis * e.eigenvectors.column(i);
                terms.push(EigenTerm {
                    value: e.eigenvalues[i],
                    vector: unvec(v.as_slice(), d),
                    symmetric,
                });
            }
        }
        terms.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
        terms
    });
    SpectralForm {
        choi,
        canonical_kraus: canonical,
        eigen,
    }
}

/// A linear map on symmetric `d×d` matrices.
pub trait SymmetricMap {
    fn dim(&self) -> usize;
    fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64>;
}

impl SymmetricMap for CpOperator {
    fn dim(&self) -> usize {
        self.d()
    }

    fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        CpOperator::apply(self, y)
    }
}

/// A map given by a closure.
pub struct FnMap<F: Fn(&DMatrix<f64>) -> DMatrix<f64>> {
    pub d: usize,
    pub f: F,
}

impl<F: Fn(&DMatrix<f64>) -> DMatrix<f64>> SymmetricMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        (self.f)(y)
    }
}

/// A map given by its `d²×d²` matrix on column-major `vec`.
pub struct MatrixMap {
    pub d: usize,
    pub matrix: DMatrix<f64>,
}

impl SymmetricMap for MatrixMap {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.matrix * DVector::from_column_slice(y.as_slice());
        unvec(v.as_slice(), self.d)
    }
}

/// Outcome of [`restricted_psd_norm`].
#[derive(Debug, Clone, Serialize)]
pub struct RestrictedNorm {
    pub value: f64,
    /// Unit-Frobenius PSD maximizer.
    pub direction: DMatrix<f64>,
    /// Leading singular value on the whole symmetric subspace, an upper
    /// bound on `value`.
    pub symmetric_bound: f64,
    pub restarts_agreeing: usize,
}

pub const DEFAULT_RESTARTS: usize = 20;

fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(symmetrize(m));
    let pos = e.eigenvalues.map(|l| l.max(0.0));
    &e.eigenvectors * DMatrix::from_diagonal(&pos) * e.eigenvectors.transpose()
}

/// `max ‖map(Y)‖_F` over PSD `Y` with `‖Y‖_F = 1`.
///
/// Each restart draws `Y = VVᵀ/‖VVᵀ‖_F` and runs projected power ascent
/// `Y ← Π₊(A*A·Y)/‖·‖_F`, which increases `‖A·Y‖_F` monotonically. The best
/// value must be reproduced by at least one other restart to within
/// `10·tol`.
pub fn restricted_psd_norm<M: SymmetricMap + ?Sized>(map: &M, tol: f64, seed: u64) -> Result<RestrictedNorm> {
    restricted_psd_norm_with(map, tol, seed, DEFAULT_RESTARTS)
}

pub fn restricted_psd_norm_with<M: SymmetricMap + ?Sized>(
    map: &M,
    tol: f64,
    seed: u64,
    restarts: usize,
) -> Result<RestrictedNorm> {
    let d = map.dim();
    let (basis, _) = sym_skew_bases(d);
    let m = basis.ncols();
    // Columns: vec(map(B_i)) for the orthonormal symmetric basis.
    let mut r = DMatrix::zeros(d * d, m);
    for i in 0..m {
        let b = unvec(basis.column(i).as_slice(), d);
        let img = map.apply(&b);
        r.set_column(i, &DVector::from_column_slice(img.as_slice()));
    }
    let gram = r.transpose() * &r;
    let symmetric_bound = SVD::new(r.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max);
    if symmetric_bound == 0.0 {
        let mut y = DMatrix::zeros(d, d);
        y[(0, 0)] = 1.0;
        return Ok(RestrictedNorm {
            value: 0.0,
            direction: y,
            symmetric_bound,
            restarts_agreeing: restarts,
        });
    }
    let to_coords = |y: &DMatrix<f64>| basis.transpose() * DVector::from_column_slice(y.as_slice());
    let to_mat = |c: &DVector<f64>| unvec((&basis * c).as_slice(), d);

    let mut rng = stream_rng(seed, Stream::Restart(0));
    let mut results: Vec<(f64, DMatrix<f64>)> = Vec::with_capacity(restarts);
    for _ in 0..restarts.max(2) {
        let v = DMatrix::<f64>::from_fn(d, d, |_, _| f64::sample_normal(&mut rng));
        let mut y = &v * v.transpose();
        y /= y.norm();
        let mut val = (&r * to_coords(&y)).norm();
        for _ in 0..20_000 {
            let g = to_mat(&(&gram * to_coords(&y)));
            let p = psd_part(&g);
            let pn = p.norm();
            if pn == 0.0 {
                break;
            }
            let next = p / pn;
            let nv = (&r * to_coords(&next)).norm();
            let step = (&next - &y).norm();
            y = next;
            let done = (nv - val).abs() <= 1e-15 * nv.max(1.0) && step < 1e-10;
            val = nv;
            if done {
                break;
            }
        }
        results.push((val, y));
    }
    results.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best = results[0].0;
    let agreeing = results
        .iter()
        .filter(|(v, _)| (best - v).abs() <= 10.0 * tol * best.max(1.0))
        .count();
    if agreeing < 2 {
        return Err(Error::NonConvergence(format!(
            "restricted norm restarts disagree: best {best}, runner-up {}",
            results[1].0
        )));
    }
    if best > symmetric_bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::NonConvergence(format!(
            "restricted norm {best} exceeds the symmetric-subspace bound {symmetric_bound}"
        )));
    }
    Ok(RestrictedNorm {
        value: best,
        direction: results.swap_remove(0).1,
        symmetric_bound,
        restarts_agreeing: agreeing,
    })
}

/// `𝒯̃(X) = Σ_k L_k X L_k` with `L_k` the top-left `p×p` block of `Λ_k`.
pub fn zero_point_operator(couplings: &CouplingSet, p: usize) -> Result<CpOperator> {
    let d = couplings.d();
    if p == 0 || p > d {
        return Err(Error::Domain(format!("effective rank p must lie in 1..={d}, got {p}")));
    }
    CpOperator::new(
        couplings
            .matrices()
            .iter()
            .map(|l| l.view((0, 0), (p, p)).clone_owned())
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub fixed_point: DMatrix<f64>,
    pub nu: f64,
    pub classification: Classification,
    pub margin: f64,
    pub maximizing_direction: DMatrix<f64>,
}

pub const DEFAULT_MARGIN: f64 = 0.02;

pub fn classify(nu: f64, delta: f64) -> Classification {
    if nu < 1.0 - delta {
        Classification::Stable
    } else if nu > 1.0 + delta {
        Classification::Unstable
    } else {
        Classification::Marginal
    }
}

/// Jacobian `J = diag(β_j ψ_j′(s_j)) Λ∘²` of the heteroskedastic SE map
/// `q ↦ ψ(Λ∘² q)` at `q`.
pub fn block_se_jacobian(
    profile: &crate::model::BlockPriorProfile,
    lambda2: &DMatrix<f64>,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    let d = profile.d();
    let s = lambda2 * DVector::from_column_slice(q);
    let mut j = lambda2.clone();
    for a in 0..d {
        let g = profile.beta()[a] * overlap_psi_derivative(profile.priors()[a], s[a].max(0.0))?;
        for b in 0..d {
            j[(a, b)] *= g;
        }
    }
    Ok(j)
}

/// Stability verdict of an SE fixed point `Q*`.
///
/// For block priors SE keeps overlaps diagonal, and the linearization is
/// taken on that invariant subspace: `Y ↦ Diag(J·diag(Y))` with
/// `J = diag(β_j ψ_j′(s*_j)) Λ∘²`. For Gaussian-factor priors the full map
/// `Y ↦ ∇ψ(𝒯(Q*))[𝒯(Y)]` is used, with `∇ψ` by central differences.
pub fn classify_fixed_point(
    model: &OverlapModel,
    op: &OperatorT,
    q_star: &DMatrix<f64>,
    delta: f64,
) -> Result<StabilityVerdict> {
    let d = model.d();
    if op.d() != d || q_star.shape() != (d, d) {
        return Err(Error::InvalidDimension("fixed point dimensions disagree".into()));
    }
    let image = model.psi(&apply_t(op, q_star)?)?;
    let residual = (&image - q_star).norm();
    if residual >= 1e-8 {
        return Err(Error::Precondition(format!(
            "not a fixed point: ‖ψ(𝒯(Q*)) − Q*‖_F = {residual:e}"
        )));
    }
    let norm = match model {
        OverlapModel::Block(profile) => {
            let lambda2 = op.couplings.hadamard_square();
            let q: Vec<f64> = (0..d).map(|j| q_star[(j, j)]).collect();
            let jac = block_se_jacobian(profile, &lambda2, &q)?;
            let map = FnMap {
                d,
                f: move |y: &DMatrix<f64>| {
                    let v = &jac * y.diagonal();
                    DMatrix::from_diagonal(&v)
                },
            };
            restricted_psd_norm(&map, 1e-9, 0)?
        }
        OverlapModel::GaussianFactor(_) => {
            let s_star = apply_t(op, q_star)?;
            // ∇ψ(S*) along PSD directions so the steps stay feasible when S* is
            // singular; off-diagonal responses follow by linearity.
            let h = 1e-5;
            let fwd = |p: &DMatrix<f64>| -> Result<DMatrix<f64>> {
                let f0 = model.psi(&s_star)?;
                let f1 = model.psi(&(&s_star + p * h))?;
                let f2 = model.psi(&(&s_star + p * (2.0 * h)))?;
                Ok((f1 * 4.0 - f0 * 3.0 - f2) / (2.0 * h))
            };
            let mut diag_resp = Vec::with_capacity(d);
            for i in 0..d {
                let mut e = DMatrix::zeros(d, d);
                e[(i, i)] = 1.0;
                diag_resp.push(fwd(&e)?);
            }
            let mut off_resp = Vec::new();
            for j in 0..d {
                for i in 0..j {
                    let mut u = DVector::zeros(d);
                    u[i] = 1.0;
                    u[j] = 1.0;
                    let r = fwd(&(&u * u.transpose()))? - &diag_resp[i] - &diag_resp[j];
                    off_resp.push((i, j, r));
                }
            }
            let op2 = op.clone();
            let map = FnMap {
                d,
                f: move |y: &DMatrix<f64>| {
                    let ty = apply_t(&op2, y).expect("square input");
                    let mut out = DMatrix::zeros(d, d);
                    for (i, r) in diag_resp.iter().enumerate() {
                        out += r * ty[(i, i)];
                    }
                    for (i, j, r) in &off_resp {
                        out += r * (0.5 * (ty[(*i, *j)] + ty[(*j, *i)]));
                    }
                    out
                },
            };
            restricted_psd_norm(&map, 1e-9, 0)?
        }
    };
    Ok(StabilityVerdict {
        fixed_point: q_star.clone(),
        nu: norm.value,
        classification: classify(norm.value, delta),
        margin: delta,
        maximizing_direction: norm.direction,
    })
}

/// Irreducibility and Perron data of a nonnegative matrix.
#[derive(Debug, Clone, Serialize)]
pub struct PerronFrobenius {
    pub irreducible: bool,
    pub leading_eigenvalue: f64,
    pub leading_vector: Option<Vec<f64>>,
}

pub fn perron_frobenius_check(t: &DMatrix<f64>) -> Result<PerronFrobenius> {
    if !t.is_square() {
        return Err(Error::InvalidDimension("matrix must be square".into()));
    }
    if t.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain("matrix has negative or non-finite entries".into()));
    }
    let d = t.nrows();
    // Strong connectivity of the support digraph i → j when T_ij > 0.
    let reach = |from: usize, transpose: bool| {
        let mut seen = vec![false; d];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for j in 0..d {
                let w = if transpose { t[(j, i)] } else { t[(i, j)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    let irreducible = if d == 1 { t[(0, 0)] > 0.0 } else { reach(0, false) && reach(0, true) };

    // Power iteration on I + T shares eigenvectors with T and converges
    // for irreducible T even when T is periodic.
    let shifted = t + DMatrix::<f64>::identity(d, d);
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..100_000 {
        let w = &shifted * &v;
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        let next = w / nw;
        let diff = (&next - &v).amax();
        v = next;
        lam = v.dot(&(t * &v));
        if diff < 1e-15 {
            break;
        }
    }
    let leading_vector = irreducible.then(|| v.iter().copied().collect());
    Ok(PerronFrobenius {
        irreducible,
        leading_eigenvalue: lam,
        leading_vector,
    })
}
