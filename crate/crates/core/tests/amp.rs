mod common;

use common::{block_instance, scalar_coupling};
use mtp_amp::amp::*;
use mtp_amp::denoise::BlockDenoiser;
use mtp_amp::model::{sample_signal, synthesize_block, BlockLayout, BlockPriorProfile, CouplingSet, ScalarPrior};
use mtp_amp::se::{run_se, OperatorT, OverlapModel};
use mtp_amp::{Error, Instance32};
use nalgebra::DMatrix;

// Fixed points of q = E[tanh(λ²q + λ√q Z)], scipy quad to 1e-13.
const Q_STAR_RAD_2: f64 = 0.916_511_011_038;

fn rademacher() -> BlockPriorProfile {
    BlockPriorProfile::single(ScalarPrior::Rademacher)
}

fn run(lambda: f64, n: usize, seed: u64, cfg: &AmpConfig) -> (mtp_amp::Instance, AmpTrace) {
    let (inst, layout) = block_instance(&rademacher(), &scalar_coupling(lambda), n, seed);
    let trace = run_symmetric(&inst, &BlockDenoiser::new(layout), cfg).unwrap();
    (inst, trace)
}

#[test]
fn init_rho_zero_is_uninformative() {
    let (x, _) = sample_signal::<f64>(&rademacher(), 500, 3).unwrap();
    let m = init_side_information(&x, 0.0, 1).unwrap();
    assert!(m.iter().all(|v| *v == 0.0));
}

#[test]
fn init_rho_one_returns_signal() {
    let (x, _) = sample_signal::<f64>(&common::hetero_profile(0.1), 500, 3).unwrap();
    let m = init_side_information(&x, 1.0, 1).unwrap();
    assert_eq!(m, x);
}

#[test]
fn init_overlaps_concentrate_at_rho() {
    let (x, _) = sample_signal::<f64>(&rademacher(), 4000, 11).unwrap();
    let m = init_side_information(&x, 0.3, 12).unwrap();
    let f = (x.transpose() * &m)[(0, 0)] / 4000.0;
    let q = (m.transpose() * &m)[(0, 0)] / 4000.0;
    assert!((f - 0.3).abs() < 0.02, "F̂¹ = {f}");
    assert!((q - 0.3).abs() < 0.02, "Q̂¹ = {q}");
}

#[test]
fn init_sparse_blocks_match_rho_beta() {
    let profile = common::hetero_profile(0.1);
    let (x, _) = sample_signal::<f64>(&profile, 20_000, 5).unwrap();
    let m = init_side_information(&x, 0.4, 6).unwrap();
    let f = x.transpose() * &m / 20_000.0;
    let q = m.transpose() * &m / 20_000.0;
    for j in 0..2 {
        assert!((f[(j, j)] - 0.4 * common::BETA[j]).abs() < 0.02);
        assert!((q[(j, j)] - 0.4 * common::BETA[j]).abs() < 0.02);
    }
}

#[test]
fn init_rejects_rho_outside_unit_interval() {
    let x = DMatrix::<f64>::from_element(4, 1, 1.0);
    assert!(matches!(init_side_information(&x, 1.5, 0), Err(Error::Domain(_))));
    assert!(matches!(init_side_information(&x, -0.1, 0), Err(Error::Domain(_))));
}

#[test]
fn config_validation() {
    let cfg = AmpConfig { max_iter: 0, ..Default::default() };
    assert!(cfg.validate().is_err());
    let cfg = AmpConfig { rho: 2.0, ..Default::default() };
    assert!(cfg.validate().is_err());
}

#[test]
fn zero_signal_keeps_overlaps_at_zero() {
    let layout = BlockLayout::new(rademacher(), 1000).unwrap();
    let x = DMatrix::<f64>::zeros(1000, 1);
    let inst = synthesize_block(&x, &layout, &scalar_coupling(2.0), 4).unwrap();
    let cfg = AmpConfig { rho: 0.0, max_iter: 10, ..Default::default() };
    let trace = run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg).unwrap();
    let bound = 5.0 / (1000f64).sqrt();
    assert!(trace.records.iter().all(|r| r.f_hat[(0, 0)].abs() <= bound));
}

#[test]
fn zero_coupling_leaves_mse_at_one() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 10, ..Default::default() };
    let (_, trace) = run(0.0, 2000, 9, &cfg);
    for r in &trace.records[1..] {
        assert_eq!(r.mse[0], 1.0);
    }
}

#[test]
fn strong_signal_converges_to_se_fixed_point() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 30, seed: 2, ..Default::default() };
    let (_, trace) = run(2.0, 4000, 21, &cfg);
    let q: Vec<f64> = trace.records.iter().map(|r| r.q_hat[(0, 0)]).collect();
    for w in q.windows(2).take(8) {
        assert!(w[1] > w[0], "overlap should grow early on: {q:?}");
    }
    let last = *q.last().unwrap();
    assert!((last - Q_STAR_RAD_2).abs() < 0.03, "Q̂ = {last}");
}

#[test]
fn aligned_mse_undoes_a_global_sign_flip() {
    // From a near-zero init the sign AMP settles on is a coin flip.
    let mut mirrored = 0;
    for seed in 0..8 {
        let cfg = AmpConfig { rho: 1e-4, max_iter: 40, seed, ..Default::default() };
        let (_, trace) = run(2.0, 2000, 100 + seed, &cfg);
        let last = trace.last();
        if last.f_hat[(0, 0)] < 0.0 {
            mirrored += 1;
            assert!(last.mse[0] > 3.0, "seed {seed}: MSE {}", last.mse[0]);
        } else {
            assert_eq!(last.mse_aligned, last.mse);
        }
        assert!((last.mse_aligned[0] - (1.0 - Q_STAR_RAD_2)).abs() < 0.05, "seed {seed}: aligned MSE {}", last.mse_aligned[0]);
    }
    assert!((1..8).contains(&mirrored), "{mirrored} of 8 runs mirrored");
}

#[test]
fn weak_signal_decays() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 20, seed: 2, ..Default::default() };
    let (_, trace) = run(0.5, 4000, 22, &cfg);
    assert!(trace.records[20].q_hat[(0, 0)] < 0.05);
}

#[test]
fn traces_are_deterministic() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 8, seed: 5, ..Default::default() };
    let (_, a) = run(1.5, 800, 1, &cfg);
    let (_, b) = run(1.5, 800, 1, &cfg);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.q_hat, rb.q_hat);
        assert_eq!(ra.f_hat, rb.f_hat);
        assert_eq!(ra.mse, rb.mse);
    }
}

#[test]
fn overlaps_are_psd_and_bounded_by_frobenius_norm() {
    let profile = common::hetero_profile(0.5);
    let lam = mtp_amp::model::scaled_profile_coupling(2.0 / common::T1_NORM, &common::xi()).unwrap();
    let (inst, layout) = block_instance(&profile, &CouplingSet::single(lam).unwrap(), 1500, 8);
    let cfg = AmpConfig { rho: 0.05, max_iter: 10, snapshots: true, ..Default::default() };
    let trace = run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg).unwrap();
    for lo in min_overlap_eigenvalues(&trace) {
        assert!(lo >= -1e-10);
    }
    for (r, m) in trace.records.iter().zip(&trace.estimates) {
        assert!((&r.q_hat - r.q_hat.transpose()).amax() == 0.0);
        let op = r.q_hat.symmetric_eigenvalues().amax();
        assert!(op <= m.norm_squared() / 1500.0 + 1e-12);
    }
}

#[test]
fn non_finite_iterates_report_the_iteration() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 5, ..Default::default() };
    let (mut inst, layout) = block_instance(&rademacher(), &scalar_coupling(1.0), 200, 1);
    inst.observations[0][(3, 4)] = f64::NAN;
    let err = run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence { iteration: 1 }));
}

#[test]
fn early_stop_ends_a_converged_run() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 200, early_stop: true, ..Default::default() };
    let (_, trace) = run(3.0, 2000, 4, &cfg);
    assert!(trace.early_stopped);
    assert!(trace.records.len() < 100);
}

#[test]
fn fixed_reweighting_equal_to_couplings_matches_bayes_optimal() {
    let base = AmpConfig { rho: 0.1, max_iter: 10, ..Default::default() };
    let fixed = AmpConfig { reweighting: Reweighting::Fixed(vec![DMatrix::from_element(1, 1, 1.4)]), ..base.clone() };
    let (_, a) = run(1.4, 1000, 6, &base);
    let (_, b) = run(1.4, 1000, 6, &fixed);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert!((&ra.q_hat - &rb.q_hat).amax() < 1e-10);
    }
}

#[test]
fn rescaled_reweighting_yields_the_same_estimates() {
    // Scaling A multiplies Xᵗ, K and Σ consistently, so the sufficient
    // statistic seen by the denoiser is unchanged.
    let profile = common::hetero_profile(0.5);
    let lam = mtp_amp::model::scaled_profile_coupling(3.0, &common::xi()).unwrap();
    let a2 = &lam * 2.5;
    let (inst, layout) = block_instance(&profile, &CouplingSet::single(lam.clone()).unwrap(), 1200, 2);
    let den = BlockDenoiser::new(layout);
    let base = AmpConfig { rho: 0.1, max_iter: 8, ..Default::default() };
    let a = run_symmetric(&inst, &den, &AmpConfig { reweighting: Reweighting::Fixed(vec![lam]), ..base.clone() }).unwrap();
    let b = run_symmetric(&inst, &den, &AmpConfig { reweighting: Reweighting::Fixed(vec![a2]), ..base }).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert!((&ra.q_hat - &rb.q_hat).amax() < 1e-9);
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 15, ..Default::default() };
    let (inst, layout) = block_instance(&rademacher(), &scalar_coupling(2.0), 1500, 3);
    let den = BlockDenoiser::new(layout);
    let a = run_symmetric(&inst, &den, &cfg).unwrap();
    let inst32 = Instance32 {
        n: inst.n,
        x: inst.x.map(|v| v as f32),
        observations: inst.observations.iter().map(|y| y.map(|v| v as f32)).collect(),
        seed: inst.seed,
        couplings: inst.couplings.clone(),
        layout: inst.layout.clone(),
        embedding: None,
    };
    let b = run_symmetric(&inst32, &den, &cfg).unwrap();
    assert!((a.last().q_hat[(0, 0)] - b.last().q_hat[(0, 0)]).abs() < 1e-3);
}

#[test]
fn asymmetric_zero_coupling_is_uninformative() {
    let p = rademacher();
    let (x1, l1) = sample_signal::<f64>(&p, 600, 1).unwrap();
    let (x2, l2) = sample_signal::<f64>(&p, 400, 2).unwrap();
    let gammas = CouplingSet::rectangular(vec![DMatrix::zeros(1, 1)]).unwrap();
    let inst = mtp_amp::model::embed_asymmetric(&x1, &x2, &gammas, Some((&l1, &l2)), 3).unwrap();
    let den = BlockDenoiser::new(inst.layout.clone().unwrap());
    let cfg = AmpConfig { rho: 0.1, max_iter: 10, ..Default::default() };
    let (_, trace) = run_asymmetric(&x1, &x2, &gammas, Some((&l1, &l2)), 3, &den, &cfg).unwrap();
    let (u, v) = trace.last().sides.clone().unwrap();
    assert_eq!(u.f_hat[(0, 0)], 0.0);
    assert_eq!(v.f_hat[(0, 0)], 0.0);
    assert_eq!(u.mse[0], 1.0);
}

#[test]
fn asymmetric_gaussian_matches_bipartite_state_evolution() {
    // Embedded coupling √(1+α)γ gives per-side overlaps
    // m_u ← ψ(γ² α m_v), m_v ← ψ(γ² m_u) with ψ(s) = s/(1+s).
    let (n1, n2, gamma, rho, trials) = (2400, 1200, 2.0, 0.1, 4u64);
    let alpha = n2 as f64 / n1 as f64;
    let p = BlockPriorProfile::single(ScalarPrior::GaussianUnit);
    let gammas = CouplingSet::rectangular(vec![DMatrix::from_element(1, 1, gamma)]).unwrap();
    let mut mean = vec![(0.0, 0.0); 13];
    for trial in 0..trials {
        let (x1, l1) = sample_signal::<f64>(&p, n1, 31 + trial).unwrap();
        let (x2, l2) = sample_signal::<f64>(&p, n2, 62 + trial).unwrap();
        let probe = mtp_amp::model::embed_asymmetric(&x1, &x2, &gammas, Some((&l1, &l2)), 33).unwrap();
        let den = BlockDenoiser::new(probe.layout.clone().unwrap());
        let cfg = AmpConfig { rho, max_iter: 12, seed: trial, ..Default::default() };
        let (_, trace) = run_asymmetric(&x1, &x2, &gammas, Some((&l1, &l2)), 33 + trial, &den, &cfg).unwrap();
        for r in &trace.records {
            let (u, v) = r.sides.clone().unwrap();
            mean[r.t].0 += u.q_hat[(0, 0)] / trials as f64;
            mean[r.t].1 += v.q_hat[(0, 0)] / trials as f64;
        }
    }
    let psi = |s: f64| s / (1.0 + s);
    let (mut mu, mut mv) = (rho, rho);
    for (t, (u, v)) in mean.iter().enumerate() {
        assert!((u - mu).abs() < 0.03, "t={t} u {u} vs {mu}");
        assert!((v - mv).abs() < 0.03, "t={t} v {v} vs {mv}");
        (mu, mv) = (psi(gamma * gamma * alpha * mv), psi(gamma * gamma * mu));
    }
}

#[test]
fn duplicated_symmetric_inputs_match_the_symmetric_run() {
    let (n, lambda, rho) = (2000, 1.6, 0.1);
    let p = rademacher();
    let (x, l) = sample_signal::<f64>(&p, n, 41).unwrap();
    let gammas = CouplingSet::rectangular(vec![DMatrix::from_element(1, 1, lambda)]).unwrap();
    let probe = mtp_amp::model::embed_asymmetric(&x, &x, &gammas, Some((&l, &l)), 42).unwrap();
    let den = BlockDenoiser::new(probe.layout.clone().unwrap());
    let cfg = AmpConfig { rho, max_iter: 15, seed: 7, ..Default::default() };
    let (_, asym) = run_asymmetric(&x, &x, &gammas, Some((&l, &l)), 42, &den, &cfg).unwrap();
    let sym_inst = synthesize_block(&x, &l, &scalar_coupling(lambda), 42).unwrap();
    let sym = run_symmetric(&sym_inst, &BlockDenoiser::new(l.clone()), &cfg).unwrap();
    for (ra, rs) in asym.records.iter().zip(&sym.records) {
        let (u, _) = ra.sides.clone().unwrap();
        assert!((u.q_hat[(0, 0)] - rs.q_hat[(0, 0)]).abs() < 0.06, "t={}", ra.t);
    }
}

/// Trial-averaged residual variance at `t = 1` and distance of the
/// trial-averaged residual variance from `Σ⁵` at `t = 5`.
fn diagnostic_runs(correction: Correction, trials: u64) -> (f64, f64) {
    let (lambda, rho, n) = (1.5, 0.05, 4000);
    let cs = scalar_coupling(lambda);
    let se = run_se(
        &OverlapModel::Block(rademacher()),
        &OperatorT::new(cs.clone()),
        &DMatrix::from_element(1, 1, rho),
        1e-12,
        50,
    )
    .unwrap();
    let (mut v1, mut v5, mut sigma5) = (0.0, 0.0, 0.0);
    for trial in 0..trials {
        let cfg = AmpConfig { rho, max_iter: 5, seed: 100 + trial, snapshots: true, correction, ..Default::default() };
        let (inst, layout) = block_instance(&rademacher(), &cs, n, 200 + trial);
        let trace = run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg).unwrap();
        let report = gaussianity_diagnostic(&trace, &inst, &se);
        let r1 = report.at(1).unwrap();
        assert!((r1.sigma[(0, 0)] - lambda * lambda * rho).abs() < 1e-12);
        v1 += r1.residual_covariance[(0, 0)] / trials as f64;
        let r5 = report.at(5).unwrap();
        v5 += r5.residual_covariance[(0, 0)] / trials as f64;
        sigma5 = r5.sigma[(0, 0)];
    }
    (v1, (v5 - sigma5).abs())
}

#[test]
fn gaussianity_diagnostic_matches_state_evolution() {
    let (v1, d5) = diagnostic_runs(Correction::AnalyticDivergence, 10);
    assert!((v1 - 1.5 * 1.5 * 0.05).abs() < 0.01, "t=1 residual variance {v1}");
    assert!(d5 <= 0.05, "distance at t=5: {d5}");
}

#[test]
fn disabling_the_correction_inflates_the_residual() {
    let (_, d5) = diagnostic_runs(Correction::Disabled, 3);
    assert!(d5 > 0.2, "distance at t=5 without correction: {d5}");
}

#[test]
fn diagnostic_battery_tracks_predictions() {
    // Rademacher blocks keep the sample second moments exact.
    let p = BlockPriorProfile::new(vec![(ScalarPrior::Rademacher, 0.6), (ScalarPrior::Rademacher, 0.4)]).unwrap();
    let lam = mtp_amp::model::scaled_profile_coupling(4.0, &common::xi()).unwrap();
    let cs = CouplingSet::single(lam).unwrap();
    let q1 = common::diag(&[0.5 * 0.6, 0.5 * 0.4]);
    let se = run_se(&OverlapModel::Block(p.clone()), &OperatorT::new(cs.clone()), &q1, 1e-12, 10).unwrap();
    let trials = 4u64;
    let mut reports = Vec::new();
    for trial in 0..trials {
        let (inst, layout) = block_instance(&p, &cs, 3000, 50 + trial);
        let cfg = AmpConfig { rho: 0.5, max_iter: 3, snapshots: true, seed: trial, ..Default::default() };
        let trace = run_symmetric(&inst, &BlockDenoiser::new(layout), &cfg).unwrap();
        reports.push(gaussianity_diagnostic(&trace, &inst, &se));
    }
    assert_eq!(reports[0].rows.len(), 3);
    for (i, row) in reports[0].rows.iter().enumerate() {
        assert_eq!(row.tests.len(), 2 * 4);
        for (k, test) in row.tests.iter().enumerate() {
            let empirical: f64 = reports.iter().map(|r| r.rows[i].tests[k].empirical).sum::<f64>() / trials as f64;
            assert!(
                (empirical - test.predicted).abs() < 0.05 * test.predicted.abs().max(1.0),
                "t={} {} column {}: {empirical} vs {}",
                row.t,
                test.name,
                test.column,
                test.predicted
            );
        }
    }
}

#[test]
fn trace_csv_has_one_row_per_record() {
    let cfg = AmpConfig { rho: 0.1, max_iter: 4, ..Default::default() };
    let (_, a) = run(1.2, 300, 1, &cfg);
    let (_, b) = run(1.2, 300, 2, &cfg);
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &[(0, &a), (1, &b)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,t,F_hat_1_1,Q_hat_1_1,mse_block_1");
    assert_eq!(lines.len(), 1 + 2 * 5);
    assert!(lines[6].starts_with("1,0,"));
}
