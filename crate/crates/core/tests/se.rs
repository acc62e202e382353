mod common;

use mtp_amp::denoise::{natural_moments, GaussianFactorDenoiser};
use mtp_amp::model::{BlockPriorProfile, CouplingSet, ScalarPrior};
use mtp_amp::rng::{stream_rng, Stream};
use mtp_amp::se::*;
use mtp_amp::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

// Oracle values from scipy.integrate.quad at 1e-13 absolute tolerance.
const PSI_RAD_1: f64 = 0.550_400_490_793_327;
const PSI_RAD_25: f64 = 0.999_999_107_179_957;
const PSI_BG01_1: f64 = 0.793_275_635_786_258;
const PSI_BG005_2: f64 = 0.946_006_264_659_553;
// Scalar Rademacher SE fixed points q = ψ(λ²q) from q = 0.01.
const Q_STAR_RAD: [(f64, f64); 3] = [(1.2, 0.357_659_118_180), (1.5, 0.692_294_654_948), (2.0, 0.916_511_011_038)];
// Heteroskedastic fixed points at ‖T‖ = 2 from q = 0.05·β.
const Q_STAR_HET_05: [f64; 2] = [0.376_346_54, 0.216_767_09];
const Q_STAR_HET_1: [f64; 2] = [0.369_920_49, 0.195_945_78];

const PRIORS: [ScalarPrior; 5] = [
    ScalarPrior::Rademacher,
    ScalarPrior::GaussianUnit,
    ScalarPrior::BernoulliGaussian(0.05),
    ScalarPrior::BernoulliGaussian(0.1),
    ScalarPrior::BernoulliGaussian(0.5),
];

fn normal<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn random_psd<R: rand::Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d + 1, |_, _| normal(rng));
    &a * a.transpose()
}

fn random_symmetric<R: rand::Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    (&a + a.transpose()) * 0.5
}

/// Trapezoid rule on a dense grid, independent of both library integrators.
fn trapezoid_psi(prior: ScalarPrior, s: f64, m: usize) -> f64 {
    let rs = s.sqrt();
    prior
        .channel_mixture(s)
        .into_iter()
        .map(|(w, mu, sd)| {
            let (lo, hi) = (-14.0, 14.0);
            let h = (hi - lo) / m as f64;
            let f = |z: f64| {
                let y = mu + sd * z;
                let e = natural_moments(prior, s, rs * y).0;
                (-0.5 * z * z).exp() * e * e
            };
            let inner: f64 = (1..m).map(|i| f(lo + i as f64 * h)).sum();
            w * h * (inner + 0.5 * (f(lo) + f(hi))) / (2.0 * std::f64::consts::PI).sqrt()
        })
        .sum()
}

#[test]
fn psi_closed_form_for_gaussian_prior() {
    for i in 0..=200 {
        let s = i as f64 * 0.5;
        let v = overlap_psi_scalar(ScalarPrior::GaussianUnit, s).unwrap();
        assert!((v - s / (1.0 + s)).abs() < 1e-10);
    }
}

#[test]
fn psi_vanishes_at_zero_and_rejects_negative_snr() {
    for prior in PRIORS {
        assert_eq!(overlap_psi_scalar(prior, 0.0).unwrap(), 0.0);
        assert!(matches!(overlap_psi_scalar(prior, -1e-3), Err(Error::Domain(_))));
    }
}

#[test]
fn psi_matches_frozen_oracle_values() {
    let cases = [
        (ScalarPrior::Rademacher, 1.0, PSI_RAD_1),
        (ScalarPrior::Rademacher, 25.0, PSI_RAD_25),
        (ScalarPrior::BernoulliGaussian(0.1), 1.0, PSI_BG01_1),
        (ScalarPrior::BernoulliGaussian(0.05), 2.0, PSI_BG005_2),
    ];
    for (prior, s, want) in cases {
        let got = overlap_psi_scalar(prior, s).unwrap();
        assert!((got - want).abs() < 1e-10, "{prior} s={s}: {got} vs {want}");
    }
    assert!(overlap_psi_scalar(ScalarPrior::Rademacher, 25.0).unwrap() >= 0.99);
}

#[test]
fn psi_has_unit_slope_at_zero() {
    for prior in PRIORS {
        let slope = overlap_psi_scalar(prior, 1e-4).unwrap() / 1e-4;
        assert!((slope - 1.0).abs() < 1e-3, "{prior}: {slope}");
    }
}

#[test]
fn psi_is_monotone_and_bounded() {
    for prior in PRIORS {
        let mut prev = 0.0;
        for i in 1..=400 {
            let s = i as f64 * 0.25;
            let v = overlap_psi_scalar(prior, s).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev - 1e-12, "{prior} s={s}");
            prev = v;
        }
    }
}

#[test]
fn gaussian_prior_is_least_favorable() {
    for prior in PRIORS {
        for i in 0..=300 {
            let s = i as f64 / 3.0;
            let v = overlap_psi_scalar(prior, s).unwrap();
            assert!(v >= s / (1.0 + s) - 1e-8, "{prior} s={s}: {v}");
        }
    }
}

#[test]
fn shifted_prior_translates_the_overlap() {
    for prior in PRIORS {
        for s in [0.0, 0.3, 2.0, 15.0] {
            for mu in [-1.5, 0.2, 0.7] {
                let shifted = overlap_psi_shifted(prior, s, mu).unwrap();
                let base = overlap_psi_scalar(prior, s).unwrap();
                assert!((shifted - base - mu * mu).abs() < 1e-8, "{prior} s={s} μ={mu}");
            }
        }
    }
}

#[test]
fn psi_is_converged_over_the_snr_range() {
    for prior in PRIORS {
        for i in 0..=100 {
            let s = i as f64;
            let coarse = trapezoid_psi(prior, s, 40_000);
            let fine = trapezoid_psi(prior, s, 80_000);
            assert!((coarse - fine).abs() < 1e-9, "{prior} s={s}: oracle moved by {:e}", coarse - fine);
            let ours = overlap_psi_scalar(prior, s).unwrap();
            assert!((ours - fine).abs() < 1e-9, "{prior} s={s}: {ours} vs {fine}");
        }
    }
}

#[test]
fn psi_derivative_is_central_difference() {
    for prior in PRIORS {
        for s in [0.0, 0.5, 4.0] {
            let d = overlap_psi_derivative(prior, s).unwrap();
            let h = 1e-4;
            let lo = overlap_psi_scalar(prior, (s - h).max(0.0)).unwrap();
            let hi = overlap_psi_scalar(prior, s + h).unwrap();
            let fd = (hi - lo) / (s + h - (s - h).max(0.0));
            assert!((d - fd).abs() < 1e-3, "{prior} s={s}: {d} vs {fd}");
        }
    }
    let g = overlap_psi_derivative(ScalarPrior::GaussianUnit, 3.0).unwrap();
    assert!((g - 1.0 / 16.0).abs() < 1e-6);
}

#[test]
fn coupling_operator_examples() {
    let swap = OperatorT::new(CouplingSet::single(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap());
    let id = DMatrix::<f64>::identity(2, 2);
    assert_eq!(apply_t(&swap, &id).unwrap(), id);
    let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let unit = OperatorT::new(CouplingSet::single(id.clone()).unwrap());
    assert_eq!(apply_t(&unit, &q).unwrap(), q);
    assert!(matches!(apply_t(&unit, &DMatrix::identity(3, 3)), Err(Error::InvalidDimension(_))));
}

#[test]
fn coupling_operator_preserves_psd_on_random_cases() {
    let mut rng = stream_rng(8, Stream::MonteCarlo(0));
    for case in 0..100 {
        let d = 2 + case % 4;
        let k = 1 + case % 3;
        let ls: Vec<_> = (0..k).map(|_| random_symmetric(d, &mut rng)).collect();
        let op = OperatorT::new(CouplingSet::symmetric(ls).unwrap());
        let q = random_psd(d, &mut rng);
        let out = apply_t(&op, &q).unwrap();
        assert!(min_eig(&out) >= -1e-10 * out.norm().max(1.0));
        assert_eq!(out, out.transpose());
    }
}

#[test]
fn run_se_examples() {
    let rad = OverlapModel::Block(BlockPriorProfile::single(ScalarPrior::Rademacher));
    let op = |l: f64| OperatorT::new(common::scalar_coupling(l));
    let q = |v: f64| DMatrix::from_element(1, 1, v);

    let zero = run_se(&rad, &op(2.0), &q(0.0), DEFAULT_SE_TOL, 100).unwrap();
    assert!(zero.converged);
    assert_eq!(zero.iterations, 1);
    assert_eq!(zero.fixed_point()[(0, 0)], 0.0);

    let weak = run_se(&rad, &op(0.5), &q(0.5), DEFAULT_SE_TOL, DEFAULT_SE_MAX_ITER).unwrap();
    assert!(weak.converged);
    assert!(weak.fixed_point()[(0, 0)].abs() < 1e-6);

    for (lambda, want) in Q_STAR_RAD {
        let tr = run_se(&rad, &op(lambda), &q(0.01), 1e-13, DEFAULT_SE_MAX_ITER).unwrap();
        assert!(tr.converged);
        let got = tr.fixed_point()[(0, 0)];
        assert!((got - want).abs() < 1e-9, "λ={lambda}: {got} vs {want}");
        for w in tr.q.windows(2) {
            assert!(w[1][(0, 0)] >= w[0][(0, 0)] - 1e-15);
        }
    }
    assert!(Q_STAR_RAD[2].1 > 0.9);

    let capped = run_se(&rad, &op(2.0), &q(0.01), 0.0, 3).unwrap();
    assert!(!capped.converged);
    assert_eq!(capped.iterations, 3);
    assert_eq!(capped.q.len(), 4);
}

#[test]
fn heteroskedastic_fixed_points() {
    for (eps, want) in [(0.5, Q_STAR_HET_05), (1.0, Q_STAR_HET_1)] {
        let profile = common::hetero_profile(eps);
        let lam = mtp_amp::model::scaled_profile_coupling(2.0 / common::T1_NORM, &common::xi()).unwrap();
        let op = OperatorT::new(CouplingSet::single(lam).unwrap());
        let tr = run_se(&OverlapModel::Block(profile), &op, &common::diag(&[0.03, 0.02]), 1e-13, DEFAULT_SE_MAX_ITER).unwrap();
        let q = tr.fixed_point();
        for j in 0..2 {
            assert!((q[(j, j)] - want[j]).abs() < 1e-7, "ε={eps}: {q}");
        }
        assert_eq!(q[(0, 1)], 0.0);
    }
}

#[test]
fn large_snr_saturates_at_beta() {
    let profile = common::hetero_profile(0.1);
    let lam = mtp_amp::model::scaled_profile_coupling(2000.0, &common::xi()).unwrap();
    let op = OperatorT::new(CouplingSet::single(lam).unwrap());
    let tr = run_se(&OverlapModel::Block(profile), &op, &common::diag(&[0.01, 0.01]), 1e-12, 1000).unwrap();
    for j in 0..2 {
        assert!((tr.fixed_point()[(j, j)] - common::BETA[j]).abs() < 1e-3);
    }
}

#[test]
fn vector_map_agrees_with_matrix_orbit() {
    let profile = common::hetero_profile(0.05);
    let lam = mtp_amp::model::scaled_profile_coupling(2.0, &common::xi()).unwrap();
    let lam2 = lam.component_mul(&lam);
    let op = OperatorT::new(CouplingSet::single(lam).unwrap());
    let model = OverlapModel::Block(profile.clone());
    let q = vec![0.2, 0.1];
    let v = se_map_vector(&profile, &lam2, &q).unwrap();
    let m = model.psi(&apply_t(&op, &common::diag(&q)).unwrap()).unwrap();
    for j in 0..2 {
        assert!((v[j] - m[(j, j)]).abs() < 1e-15);
    }
}

#[test]
fn orbits_increase_in_loewner_order() {
    // A Gaussian factor prior with correlated columns exercises full matrices.
    let (n, d) = (6, 2);
    let mut rng = stream_rng(12, Stream::MonteCarlo(0));
    let v = DMatrix::from_fn(n * d, 4, |_, _| normal(&mut rng) * 0.5);
    let model = OverlapModel::GaussianFactor(GaussianFactorDenoiser::new(v, n, d).unwrap());
    let l1 = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, 1.5]);
    let l2 = DMatrix::from_row_slice(2, 2, &[0.5, -0.3, -0.3, 1.1]);
    let op = OperatorT::new(CouplingSet::symmetric(vec![l1, l2]).unwrap());
    let tr = run_se(&model, &op, &DMatrix::zeros(2, 2), 1e-12, 200).unwrap();
    // From zero the orbit is Loewner-increasing since ψ ⪰ 0 and ψ∘𝒯 is monotone.
    for w in tr.q.windows(2) {
        assert!(min_eig(&(&w[1] - &w[0])) >= -1e-9);
    }

    let block = OverlapModel::Block(common::hetero_profile(0.1));
    let lam = mtp_amp::model::scaled_profile_coupling(3.0, &common::xi()).unwrap();
    let op = OperatorT::new(CouplingSet::single(lam).unwrap());
    let tr = run_se(&block, &op, &common::diag(&[0.006, 0.004]), 1e-12, 500).unwrap();
    for w in tr.q.windows(2) {
        assert!(min_eig(&(&w[1] - &w[0])) >= -1e-9);
    }
}

#[test]
fn gaussian_overlap_closed_forms() {
    let n = 5;
    let iso = GaussianFactorDenoiser::new(DMatrix::identity(n, n), n, 1).unwrap();
    for s in [0.0, 0.4, 3.0] {
        let v = gaussian_overlap(&iso, &DMatrix::from_element(1, 1, s)).unwrap();
        assert!((v[(0, 0)] - s / (1.0 + s)).abs() < 1e-14);
    }
    // Unit Gaussian blocks: V selects the support of the block-diagonal signal.
    let n = 10;
    let layout = mtp_amp::model::BlockLayout::new(common::hetero_profile(1.0), n).unwrap();
    let mut v = DMatrix::zeros(2 * n, n);
    for (j, r) in layout.ranges.iter().enumerate() {
        for i in r.clone() {
            v[(i + n * j, i)] = 1.0;
        }
    }
    let g = GaussianFactorDenoiser::new(v, n, 2).unwrap();
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 4.0]);
    let psi = gaussian_overlap(&g, &s).unwrap();
    assert!((psi[(0, 0)] - 0.6 * 0.5).abs() < 1e-14);
    assert!((psi[(1, 1)] - 0.4 * 0.8).abs() < 1e-14);
    assert!(psi[(0, 1)].abs() < 1e-14);
    assert_eq!(gaussian_overlap(&g, &DMatrix::zeros(2, 2)).unwrap().amax(), 0.0);
}

#[test]
fn gaussian_overlap_matches_monte_carlo() {
    let (n, d) = (6, 2);
    let mut rng = stream_rng(21, Stream::MonteCarlo(0));
    let v = DMatrix::from_fn(n * d, 2, |_, _| normal(&mut rng));
    let g = GaussianFactorDenoiser::new(v.clone(), n, d).unwrap();
    let s = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
    let exact = gaussian_overlap(&g, &s).unwrap();

    // The denoiser is linear, so its matrix is read off from basis inputs.
    let mut lin = DMatrix::zeros(n * d, n * d);
    for c in 0..n * d {
        let mut e = DMatrix::zeros(n, d);
        e[(c % n, c / n)] = 1.0;
        let out = g.denoise_normalized(&s, &e).unwrap().value;
        lin.column_mut(c).copy_from_slice(out.as_slice());
    }
    let r = mtp_amp::denoise::psd_sqrt(&s).kronecker(&DMatrix::identity(n, n));
    let samples = 1_000_000;
    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut sum2 = DMatrix::<f64>::zeros(d, d);
    let mut w = nalgebra::DVector::zeros(2);
    let mut z = nalgebra::DVector::zeros(n * d);
    for _ in 0..samples {
        w.iter_mut().for_each(|x| *x = normal(&mut rng));
        z.iter_mut().for_each(|x| *x = normal(&mut rng));
        let y = &r * (&v * &w) + &z;
        let est = &lin * y;
        let m = DMatrix::from_column_slice(n, d, est.as_slice());
        let o = m.transpose() * m / n as f64;
        sum += &o;
        sum2 += o.component_mul(&o);
    }
    let k = samples as f64;
    for j in 0..d {
        for l in 0..d {
            let mean = sum[(j, l)] / k;
            let se = ((sum2[(j, l)] / k - mean * mean) / k).sqrt();
            assert!((mean - exact[(j, l)]).abs() < 3.0 * se, "({j},{l}): {mean} vs {}", exact[(j, l)]);
        }
    }
}

#[test]
fn mmse_matrix_examples() {
    let model = OverlapModel::Block(common::hetero_profile(0.1));
    assert_eq!(mmse_matrix(&model, &DMatrix::zeros(2, 2)).unwrap(), common::diag(&common::BETA));
    let g = OverlapModel::Block(BlockPriorProfile::single(ScalarPrior::GaussianUnit));
    for s in [0.2, 1.0, 5.0] {
        let h = 1e-5;
        let up = mmse_matrix(&g, &DMatrix::from_element(1, 1, s + h)).unwrap()[(0, 0)];
        let dn = mmse_matrix(&g, &DMatrix::from_element(1, 1, s - h)).unwrap()[(0, 0)];
        let fd = (up - dn) / (2.0 * h);
        assert!((fd + 1.0 / (1.0 + s).powi(2)).abs() < 1e-6);
    }
}

#[test]
fn mmse_gradient_identity_holds() {
    let rad = BlockPriorProfile::single(ScalarPrior::Rademacher);
    let report = mmse_gradient_check(&rad, &DMatrix::from_element(1, 1, 1.0), &GradientCheckConfig::default()).unwrap();
    assert_eq!(report.directions.len(), 3);
    assert!(report.passes(3.0), "max z = {}", report.max_z);

    let het = common::hetero_profile(0.5);
    let s = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.6]);
    let report = mmse_gradient_check(&het, &s, &GradientCheckConfig { seed: 4, ..Default::default() }).unwrap();
    assert!(report.passes(3.0), "max z = {}", report.max_z);
}

#[test]
fn gradient_check_reports_inconclusive_runs() {
    let rad = BlockPriorProfile::single(ScalarPrior::Rademacher);
    let cfg = GradientCheckConfig { replications: 20, tolerance: 1e-4, ..Default::default() };
    let err = mmse_gradient_check(&rad, &DMatrix::from_element(1, 1, 1.0), &cfg).unwrap_err();
    assert!(matches!(err, Error::Inconclusive(_)));
    let big = GradientCheckConfig { n: 101, ..Default::default() };
    assert!(mmse_gradient_check(&rad, &DMatrix::from_element(1, 1, 1.0), &big).is_err());
}

#[test]
fn trajectory_csv_columns() {
    let model = OverlapModel::Block(common::hetero_profile(0.5));
    let lam = mtp_amp::model::scaled_profile_coupling(3.0, &common::xi()).unwrap();
    let op = OperatorT::new(CouplingSet::single(lam).unwrap());
    let tr = run_se(&model, &op, &common::diag(&[0.03, 0.02]), 1e-10, 50).unwrap();
    let mut buf = Vec::new();
    tr.write_csv_to(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,q_1,q_2,s_1,s_2,converged");
    assert_eq!(lines.count(), tr.q.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_monotone_componentwise(
        s1 in 0.0f64..30.0, s2 in 0.0f64..30.0,
        d1 in 0.0f64..10.0, d2 in 0.0f64..10.0,
        eps in 0.02f64..1.0,
    ) {
        let model = OverlapModel::Block(common::hetero_profile(eps));
        let a = model.psi(&common::diag(&[s1, s2])).unwrap();
        let b = model.psi(&common::diag(&[s1 + d1, s2 + d2])).unwrap();
        prop_assert!(b[(0, 0)] >= a[(0, 0)] - 1e-12);
        prop_assert!(b[(1, 1)] >= a[(1, 1)] - 1e-12);
        prop_assert!(a[(0, 0)] <= common::BETA[0] && a[(1, 1)] <= common::BETA[1]);
    }

    #[test]
    fn se_map_preserves_order(
        q1 in 0.0f64..0.6, q2 in 0.0f64..0.4,
        f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
        c in 0.1f64..10.0,
        eps in 0.02f64..1.0,
    ) {
        let profile = common::hetero_profile(eps);
        let lam2 = common::xi() * c;
        let lo = [q1 * f1, q2 * f2];
        let a = se_map_vector(&profile, &lam2, &lo).unwrap();
        let b = se_map_vector(&profile, &lam2, &[q1, q2]).unwrap();
        prop_assert!(b[0] >= a[0] - 1e-12 && b[1] >= a[1] - 1e-12);
    }

    #[test]
    fn coupling_operator_is_linear(
        a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>(),
    ) {
        let mut rng = stream_rng(seed, Stream::MonteCarlo(0));
        let op = OperatorT::new(CouplingSet::symmetric(vec![random_symmetric(3, &mut rng), random_symmetric(3, &mut rng)]).unwrap());
        let x = random_symmetric(3, &mut rng);
        let y = random_symmetric(3, &mut rng);
        let lhs = apply_t(&op, &(&x * a + &y * b)).unwrap();
        let rhs = apply_t(&op, &x).unwrap() * a + apply_t(&op, &y).unwrap() * b;
        prop_assert!((lhs - rhs).amax() < 1e-12 * (1.0 + x.amax() + y.amax()) * 10.0);
    }
}
