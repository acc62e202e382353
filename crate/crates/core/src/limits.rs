//! Fundamental limits of the heteroskedastic rank-one model: Gaussian
//! channel relative entropies, the I-MMSE relation and the variational
//! formula for the asymptotic block MMSE.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BlockPriorProfile, ScalarPrior};
use crate::quadrature::{integrate, GAUSS_WINDOW};
use crate::se::{overlap_psi_derivative, overlap_psi_scalar, se_map_vector};
use crate::stability::perron_frobenius_check;

/// `log p_s(y) − log φ(y)` for the channel output density `p_s`.
fn log_likelihood_ratio(mix: &[(f64, f64, f64)], y: f64) -> f64 {
    let terms: Vec<f64> = mix
        .iter()
        .map(|(w, m, sd)| {
            let z = (y - m) / sd;
            w.ln() - sd.ln() - 0.5 * z * z + 0.5 * y * y
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `KL(P_{√s X + Z} ‖ N(0, 1))` by adaptive integration over a `±12σ`
/// window around each mixture component.
pub fn kl_channel(prior: ScalarPrior, s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("SNR must be finite and nonnegative, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let mix = prior.channel_mixture(s);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for &(w, m, sd) in &mix {
        let part = integrate(
            |z| norm * (-0.5 * z * z).exp() * log_likelihood_ratio(&mix, m + sd * z),
            -GAUSS_WINDOW,
            GAUSS_WINDOW,
            1e-15,
            1e-13,
        )?;
        total += w * part;
    }
    Ok(total.max(0.0))
}

/// Largest deviation between the centered finite-difference derivative of
/// [`kl_channel`] and `½ψ(s)` over `s_grid`. `β_j` cancels between the
/// two sides and is accepted only for symmetry with the block form.
pub fn immse_consistency(prior: ScalarPrior, beta: f64, s_grid: &[f64]) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain("block fraction must be positive".into()));
    }
    let mut worst: f64 = 0.0;
    for &s in s_grid {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("grid point {s} is not positive")));
        }
        let h = 1e-4 * s.max(1.0);
        let h = h.min(0.5 * s);
        let fd = beta * (kl_channel(prior, s + h)? - kl_channel(prior, s - h)?) / (2.0 * h);
        let half_psi = 0.5 * beta * overlap_psi_scalar(prior, s)?;
        worst = worst.max((fd - half_psi).abs() / beta);
    }
    Ok(worst)
}

/// Tabulated `D` and `ψ` of one prior on `[0, s_max]`, interpolated by
/// cubic Hermite splines with exact slopes `D′ = ½ψ`.
#[derive(Debug, Clone)]
struct ChannelTable {
    s: Vec<f64>,
    d: Vec<f64>,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

impl ChannelTable {
    fn new(prior: ScalarPrior, s_max: f64, nodes: usize) -> Result<Self> {
        // Quadratic spacing concentrates nodes near s = 0 where the
        // curvature of sparse priors is largest.
        let s: Vec<f64> = (0..=nodes)
            .map(|k| s_max * (k as f64 / nodes as f64).powi(2))
            .collect();
        let mut d = Vec::with_capacity(s.len());
        let mut psi = Vec::with_capacity(s.len());
        let mut dpsi = Vec::with_capacity(s.len());
        for &v in &s {
            d.push(kl_channel(prior, v)?);
            psi.push(overlap_psi_scalar(prior, v)?);
            dpsi.push(overlap_psi_derivative(prior, v)?);
        }
        Ok(ChannelTable { s, d, psi, dpsi })
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.s.len();
        let x = x.clamp(0.0, self.s[n - 1]);
        let k = match self.s.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        };
        let h = self.s[k + 1] - self.s[k];
        (k, (x - self.s[k]) / h, h)
    }

    fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, t: f64, h: f64) -> f64 {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1
    }

    fn kl(&self, x: f64) -> f64 {
        let (k, t, h) = self.locate(x);
        Self::hermite(self.d[k], self.d[k + 1], 0.5 * self.psi[k], 0.5 * self.psi[k + 1], t, h)
    }

    fn overlap(&self, x: f64) -> f64 {
        let (k, t, h) = self.locate(x);
        Self::hermite(self.psi[k], self.psi[k + 1], self.dpsi[k], self.dpsi[k + 1], t, h)
    }

    /// Smallest tabulated `s` with `ψ(s) ≥ target`, refined by bisection on
    /// the interpolant.
    fn overlap_inverse(&self, target: f64) -> Option<f64> {
        let n = self.s.len();
        if target <= 0.0 {
            return Some(0.0);
        }
        if target > self.psi[n - 1] {
            return None;
        }
        let k = self.psi.partition_point(|p| *p < target).max(1);
        let (mut lo, mut hi) = (self.s[k - 1], self.s[k]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.overlap(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Interpolation tables of `D` and `ψ` for every block of a profile,
/// valid for SNRs up to `s_max`.
#[derive(Debug, Clone)]
pub struct LimitTables {
    tables: Vec<ChannelTable>,
    s_max: f64,
}

impl LimitTables {
    pub fn new(profile: &BlockPriorProfile, s_max: f64, nodes: usize) -> Result<Self> {
        if !(s_max > 0.0) || nodes < 2 {
            return Err(Error::Domain("tables need a positive range and at least two nodes".into()));
        }
        let tables = profile
            .priors()
            .iter()
            .map(|p| ChannelTable::new(*p, s_max, nodes))
            .collect::<Result<_>>()?;
        Ok(LimitTables { tables, s_max })
    }

    /// Tables covering every SNR reachable by `problem`.
    pub fn for_problem(problem: &VariationalProblem, nodes: usize) -> Result<Self> {
        let beta = DVector::from_column_slice(problem.profile.beta());
        let s_max = (problem.lambda2.clone() * beta).max().max(1e-6) * 1.0001;
        LimitTables::new(&problem.profile, s_max, nodes)
    }
}

/// Heteroskedastic variational problem.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub profile: BlockPriorProfile,
    /// `Λ∘²`.
    pub lambda2: DMatrix<f64>,
}

/// Settings of [`variational_solve`].
#[derive(Debug, Clone)]
pub struct VariationalConfig {
    /// Grid points per axis.
    pub grid_res: usize,
    /// Refine grid candidates to exact critical points.
    pub refine: bool,
    /// Nodes of the interpolation tables for `D` and `ψ`.
    pub table_nodes: usize,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        VariationalConfig {
            grid_res: 400,
            refine: true,
            table_nodes: 1200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Maximization of `F(q) = ⟨β, D(Λ∘² q)⟩ − ¼⟨q, Λ∘² q⟩`.
    Reduced,
    /// Explicit max–inf over `(q, s)`.
    MaxInf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub q: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalResult {
    pub q_star: Vec<f64>,
    pub objective: f64,
    /// `1 − q*_j / β_j`.
    pub mmse_bound: Vec<f64>,
    pub grid_res: usize,
    pub refined: bool,
    pub route: Route,
    /// Every maximizer within `1e-10` of the best, when they are more than
    /// two grid cells apart; empty otherwise.
    pub near_ties: Vec<Candidate>,
    /// All critical points found, sorted by objective.
    pub candidates: Vec<Candidate>,
}

impl VariationalResult {
    pub fn is_degenerate(&self) -> bool {
        !self.near_ties.is_empty()
    }
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min() >= -1e-12 * m.amax().max(1.0)
}

impl VariationalProblem {
    pub fn new(profile: BlockPriorProfile, lambda2: DMatrix<f64>) -> Result<Self> {
        let d = profile.d();
        if lambda2.shape() != (d, d) {
            return Err(Error::InvalidDimension("Λ∘² must be d×d".into()));
        }
        if lambda2.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain("Λ∘² must be entrywise nonnegative".into()));
        }
        if (&lambda2 - lambda2.transpose()).amax() > 1e-12 {
            return Err(Error::Domain("Λ∘² must be symmetric".into()));
        }
        Ok(VariationalProblem { profile, lambda2 })
    }

    pub fn d(&self) -> usize {
        self.profile.d()
    }

    fn snr(&self, q: &[f64]) -> Vec<f64> {
        (self.lambda2.clone() * DVector::from_column_slice(q)).iter().copied().collect()
    }

    /// `F(q)` with exact relative entropies.
    pub fn objective(&self, q: &[f64]) -> Result<f64> {
        let s = self.snr(q);
        let mut f = 0.0;
        for j in 0..self.d() {
            f += self.profile.beta()[j] * kl_channel(self.profile.priors()[j], s[j].max(0.0))?;
        }
        Ok(f - 0.25 * quad(&self.lambda2, q))
    }

    /// Max–inf objective `G(q) = inf_s {⟨β, D(s)⟩ + ¼⟨q, Λ∘² q⟩ − ½⟨s, q⟩}`
    /// with exact inner minimization. `q_j = β_j` is allowed only for
    /// priors with finite entropy.
    pub fn maxinf_objective(&self, q: &[f64]) -> Result<f64> {
        let mut g = 0.25 * quad(&self.lambda2, q);
        for j in 0..self.d() {
            let b = self.profile.beta()[j];
            let prior = self.profile.priors()[j];
            let target = q[j] / b;
            let s = invert_overlap(prior, target)?;
            g += b * kl_channel(prior, s)? - 0.5 * s * q[j];
        }
        Ok(g)
    }

    /// Residual `‖q − ψ(Λ∘² q)‖_∞`.
    pub fn fixed_point_residual(&self, q: &[f64]) -> Result<f64> {
        let img = se_map_vector(&self.profile, &self.lambda2, q)?;
        Ok(q.iter().zip(&img).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Drives `q` to a nearby fixed point: SE iteration on the tabulated
    /// overlaps, then Newton steps on `q − ψ(Λ∘² q)` with exact overlaps,
    /// then plain SE iteration if Newton stalls.
    fn refine(&self, q0: &[f64], tables: &[ChannelTable]) -> Result<Vec<f64>> {
        let d = self.d();
        let beta = self.profile.beta();
        let mut q = q0.to_vec();
        for _ in 0..100_000 {
            let s = self.snr(&q);
            let next: Vec<f64> = (0..d).map(|j| beta[j] * tables[j].overlap(s[j]).clamp(0.0, 1.0)).collect();
            let diff = dist_inf(&next, &q);
            q = next;
            if diff < 1e-13 {
                break;
            }
        }
        let mut res = self.fixed_point_residual(&q)?;
        for _ in 0..30 {
            if res < 1e-14 {
                return Ok(q);
            }
            let s = self.snr(&q);
            let img = se_map_vector(&self.profile, &self.lambda2, &q)?;
            let r = DVector::from_iterator(d, q.iter().zip(&img).map(|(a, b)| a - b));
            let mut jac = DMatrix::<f64>::identity(d, d);
            for a in 0..d {
                let g = beta[a] * overlap_psi_derivative(self.profile.priors()[a], s[a].max(0.0))?;
                for b in 0..d {
                    jac[(a, b)] -= g * self.lambda2[(a, b)];
                }
            }
            let Some(step) = jac.lu().solve(&r) else { break };
            let trial: Vec<f64> = (0..d).map(|j| (q[j] - step[j]).clamp(0.0, beta[j])).collect();
            let tr = self.fixed_point_residual(&trial)?;
            if tr >= res {
                break;
            }
            q = trial;
            res = tr;
        }
        for _ in 0..2000 {
            if res < 1e-12 {
                break;
            }
            q = se_map_vector(&self.profile, &self.lambda2, &q)?;
            res = self.fixed_point_residual(&q)?;
        }
        Ok(q)
    }
}

fn quad(m: &DMatrix<f64>, q: &[f64]) -> f64 {
    let v = DVector::from_column_slice(q);
    v.dot(&(m * &v))
}

/// `s ≥ 0` with `ψ(s) = target`, by bracketing and bisection.
fn invert_overlap(prior: ScalarPrior, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    if target >= 1.0 {
        return Err(Error::Domain("overlap target must be below 1".into()));
    }
    let mut hi = 1.0;
    while overlap_psi_scalar(prior, hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Precision("overlap inverse out of range".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if overlap_psi_scalar(prior, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizes the heteroskedastic variational formula over `[0, β]`.
///
/// When `Λ∘²` is PSD the inner infimum is attained at `s = Λ∘² q` and the
/// reduced objective `F` is searched on a `grid_res^d` grid. Otherwise the
/// max–inf form is searched directly; its inner infimum separates into one
/// scalar equation `ψ_j(s_j) = q_j/β_j` per block. Grid local maxima, the
/// SE orbit from `q = β`, the SE orbit from a small Perron-direction
/// initialization and `q = 0` are refined to critical points and compared
/// with exact relative entropies.
pub fn variational_solve(problem: &VariationalProblem, cfg: &VariationalConfig) -> Result<VariationalResult> {
    let route = if is_psd(&problem.lambda2) { Route::Reduced } else { Route::MaxInf };
    solve_with_route(problem, cfg, route)
}

/// [`variational_solve`] forced onto a particular route.
pub fn solve_with_route(problem: &VariationalProblem, cfg: &VariationalConfig, route: Route) -> Result<VariationalResult> {
    if problem.lambda2.iter().all(|x| *x == 0.0) {
        return solve_with_tables(problem, cfg, route, None);
    }
    let tables = LimitTables::for_problem(problem, cfg.table_nodes)?;
    solve_with_tables(problem, cfg, route, Some(&tables))
}

/// [`solve_with_route`] reusing precomputed tables.
pub fn solve_with_tables(
    problem: &VariationalProblem,
    cfg: &VariationalConfig,
    route: Route,
    tables: Option<&LimitTables>,
) -> Result<VariationalResult> {
    let d = problem.d();
    let beta = problem.profile.beta().to_vec();
    if cfg.grid_res < 2 {
        return Err(Error::InvalidDimension("grid resolution must be at least 2".into()));
    }
    if d > 3 {
        return Err(Error::InvalidDimension(format!(
            "dense grid search supports d ≤ 3, got {d}"
        )));
    }
    if problem.lambda2.iter().all(|x| *x == 0.0) {
        let zero = vec![0.0; d];
        return Ok(VariationalResult {
            q_star: zero.clone(),
            objective: 0.0,
            mmse_bound: vec![1.0; d],
            grid_res: cfg.grid_res,
            refined: cfg.refine,
            route,
            near_ties: Vec::new(),
            candidates: vec![Candidate { q: zero, objective: 0.0 }],
        });
    }

    let tables = tables.ok_or_else(|| Error::Domain("interpolation tables required".into()))?;
    let reach = (problem.lambda2.clone() * DVector::from_column_slice(&beta)).max();
    if reach > tables.s_max {
        return Err(Error::Domain(format!(
            "tables cover s ≤ {}, problem reaches {reach}",
            tables.s_max
        )));
    }
    let tables = &tables.tables;

    let res = cfg.grid_res;
    let axis = |j: usize, k: usize| -> f64 {
        let top = match route {
            Route::Reduced => 1.0,
            // q_j = β_j needs s = ∞; stay strictly inside.
            Route::MaxInf => 1.0 - 0.5 / res as f64,
        };
        beta[j] * top * k as f64 / res as f64
    };
    let eval = |idx: &[usize]| -> f64 {
        let q: Vec<f64> = idx.iter().enumerate().map(|(j, k)| axis(j, *k)).collect();
        match route {
            Route::Reduced => {
                let s = problem.snr(&q);
                let mut f = 0.0;
                for j in 0..d {
                    f += beta[j] * tables[j].kl(s[j]);
                }
                f - 0.25 * quad(&problem.lambda2, &q)
            }
            Route::MaxInf => {
                let mut g = 0.25 * quad(&problem.lambda2, &q);
                for j in 0..d {
                    match tables[j].overlap_inverse(q[j] / beta[j]) {
                        Some(s) => g += beta[j] * tables[j].kl(s) - 0.5 * s * q[j],
                        // Beyond the table the objective keeps decreasing.
                        None => return f64::NEG_INFINITY,
                    }
                }
                g
            }
        }
    };

    let pts = res + 1;
    let total = pts.pow(d as u32);
    let unflatten = |mut f: usize| -> Vec<usize> {
        let mut idx = vec![0; d];
        for slot in idx.iter_mut() {
            *slot = f % pts;
            f /= pts;
        }
        idx
    };
    let values: Vec<f64> = (0..total).map(|f| eval(&unflatten(f))).collect();

    // Local maxima over the full neighbourhood (faces included).
    let mut local: Vec<(f64, Vec<usize>)> = Vec::new();
    for f in 0..total {
        let idx = unflatten(f);
        let v = values[f];
        if !v.is_finite() {
            continue;
        }
        let mut is_max = true;
        for off in 0..3usize.pow(d as u32) {
            let mut o = off;
            let mut flat = 0usize;
            let mut stride = 1usize;
            let mut valid = true;
            let mut center = true;
            for &i in &idx {
                let step = (o % 3) as isize - 1;
                o /= 3;
                if step != 0 {
                    center = false;
                }
                let ni = i as isize + step;
                if ni < 0 || ni >= pts as isize {
                    valid = false;
                    break;
                }
                flat += ni as usize * stride;
                stride *= pts;
            }
            if center || !valid {
                continue;
            }
            if values[flat] > v {
                is_max = false;
                break;
            }
        }
        if is_max {
            local.push((v, idx));
        }
    }
    local.sort_by(|a, b| b.0.total_cmp(&a.0));
    local.truncate(12);

    let mut starts: Vec<Vec<f64>> = local
        .iter()
        .map(|(_, idx)| idx.iter().enumerate().map(|(j, k)| axis(j, *k)).collect())
        .collect();
    starts.push(beta.clone());
    starts.push(vec![0.0; d]);
    if let Ok(pf) = perron_frobenius_check(&(DMatrix::from_diagonal(&DVector::from_column_slice(&beta)) * &problem.lambda2)) {
        if let Some(v) = pf.leading_vector {
            starts.push(v.iter().zip(&beta).map(|(x, b)| 1e-4 * x.abs() * b).collect());
        }
    }

    let mut cands: Vec<Candidate> = Vec::new();
    let grid_best = local.first().map(|l| l.1.clone());
    for q0 in starts {
        let q = if cfg.refine { problem.refine(&q0, tables)? } else { q0 };
        if cands.iter().any(|c| dist_inf(&c.q, &q) < 1e-7) {
            continue;
        }
        let objective = match route {
            Route::Reduced => problem.objective(&q)?,
            Route::MaxInf => {
                if q.iter().zip(&beta).any(|(a, b)| *a >= *b * (1.0 - 1e-12)) {
                    problem.objective(&q)?
                } else {
                    problem.maxinf_objective(&q)?
                }
            }
        };
        cands.push(Candidate { q, objective });
    }
    if !cfg.refine {
        if let Some(idx) = grid_best {
            let q: Vec<f64> = idx.iter().enumerate().map(|(j, k)| axis(j, *k)).collect();
            let objective = problem.objective(&q)?;
            cands.push(Candidate { q, objective });
        }
    }
    cands.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    let best = cands[0].clone();
    let cell = beta.iter().fold(f64::INFINITY, |a, b| a.min(*b)) / res as f64;
    let ties: Vec<Candidate> = cands
        .iter()
        .filter(|c| best.objective - c.objective <= 1e-10)
        .cloned()
        .collect();
    let spread = ties.iter().any(|c| dist_inf(&c.q, &best.q) > 2.0 * cell);
    let mmse_bound = best
        .q
        .iter()
        .zip(&beta)
        .map(|(q, b)| (1.0 - q / b).clamp(0.0, 1.0))
        .collect();
    Ok(VariationalResult {
        q_star: best.q.clone(),
        objective: best.objective,
        mmse_bound,
        grid_res: res,
        refined: cfg.refine,
        route,
        near_ties: if spread { ties } else { Vec::new() },
        candidates: cands,
    })
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub residual: f64,
    pub passes: bool,
}

/// Checks that `q*` satisfies `q = ψ(Λ∘² q)` to `1e-6`.
pub fn critical_point_inclusion_check(result: &VariationalResult, problem: &VariationalProblem) -> Result<InclusionReport> {
    let residual = problem.fixed_point_residual(&result.q_star)?;
    Ok(InclusionReport {
        residual,
        passes: residual < 1e-6,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchFlag {
    Single,
    /// Several maximizers tie at this point.
    Tie,
    /// The maximizer jumped since the previous sweep point.
    Jump,
}

impl std::fmt::Display for BranchFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BranchFlag::Single => "single",
            BranchFlag::Tie => "tie",
            BranchFlag::Jump => "jump",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub norm_tc: f64,
    pub q_star: Vec<f64>,
    pub mmse_bound: Vec<f64>,
    pub branch: BranchFlag,
    pub residual: f64,
}

/// Operator norm `‖T_c‖_op` of `T_c = c·diag(β)Ξ`.
pub fn t_norm(beta: &[f64], xi: &DMatrix<f64>, c: f64) -> f64 {
    let t = DMatrix::from_diagonal(&DVector::from_column_slice(beta)) * xi * c;
    t.singular_values().max()
}

/// Solves the variational problem along `Λ∘² = c·Ξ` for every `c`.
pub fn sweep(profile: &BlockPriorProfile, xi: &DMatrix<f64>, cs: &[f64], cfg: &VariationalConfig) -> Result<Vec<SweepRow>> {
    let c_max = cs.iter().copied().fold(0.0, f64::max);
    let tables = if c_max > 0.0 {
        Some(LimitTables::for_problem(&VariationalProblem::new(profile.clone(), xi * c_max)?, cfg.table_nodes)?)
    } else {
        None
    };
    let mut rows: Vec<SweepRow> = Vec::with_capacity(cs.len());
    for &c in cs {
        let problem = VariationalProblem::new(profile.clone(), xi * c)?;
        let route = if is_psd(&problem.lambda2) { Route::Reduced } else { Route::MaxInf };
        let r = solve_with_tables(&problem, cfg, route, tables.as_ref())?;
        let residual = problem.fixed_point_residual(&r.q_star)?;
        let mut branch = if r.is_degenerate() { BranchFlag::Tie } else { BranchFlag::Single };
        if let Some(prev) = rows.last() {
            if branch == BranchFlag::Single && dist_inf(&prev.q_star, &r.q_star) > 0.1 {
                branch = BranchFlag::Jump;
            }
        }
        rows.push(SweepRow {
            c,
            norm_tc: t_norm(profile.beta(), xi, c),
            q_star: r.q_star,
            mmse_bound: r.mmse_bound,
            branch,
            residual,
        });
    }
    Ok(rows)
}

/// Writes `c, norm_Tc, q1_star.., mmse_bound_1.., branch_flag`.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let d = rows.first().map_or(0, |r| r.q_star.len());
    let mut header = vec!["c".to_string(), "norm_Tc".to_string()];
    header.extend((1..=d).map(|j| format!("q{j}_star")));
    header.extend((1..=d).map(|j| format!("mmse_bound_{j}")));
    header.push("branch_flag".into());
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut line = vec![format!("{:.12e}", r.c), format!("{:.12e}", r.norm_tc)];
        line.extend(r.q_star.iter().map(|v| format!("{v:.12e}")));
        line.extend(r.mmse_bound.iter().map(|v| format!("{v:.12e}")));
        line.push(r.branch.to_string());
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
