#![allow(dead_code)]

use mtp_amp::model::{sample_signal, synthesize_block, BlockLayout, BlockPriorProfile, CouplingSet, ScalarPrior};
use mtp_amp::Instance;
use nalgebra::DMatrix;

pub fn xi() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7])
}

pub const BETA: [f64; 2] = [0.6, 0.4];

/// Operator norm of `diag(β)Ξ`, from an SVD in numpy.
pub const T1_NORM: f64 = 0.516_812_814_977_474_4;

pub fn hetero_profile(eps: f64) -> BlockPriorProfile {
    BlockPriorProfile::new(vec![
        (ScalarPrior::Rademacher, BETA[0]),
        (ScalarPrior::BernoulliGaussian(eps), BETA[1]),
    ])
    .unwrap()
}

pub fn scalar_coupling(lambda: f64) -> CouplingSet {
    CouplingSet::single(DMatrix::from_element(1, 1, lambda)).unwrap()
}

pub fn block_instance(profile: &BlockPriorProfile, couplings: &CouplingSet, n: usize, seed: u64) -> (Instance, BlockLayout) {
    let (x, layout) = sample_signal::<f64>(profile, n, seed).unwrap();
    let inst = synthesize_block(&x, &layout, couplings, seed).unwrap();
    (inst, layout)
}

pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}
