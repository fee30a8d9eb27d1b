//! The bivariate purely spatial random fields used for visual illustration:
//! a 30 x 30 rook lattice, `T = 1`, `A = 1`, `ψ_11 = ψ_22 = 0.5`, `Π = 0`,
//! with the cross coefficient `ψ_12 = ψ_21` either 0.35 or 0.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{AMode, ATilde, Dimensions, ErrorDist, ModelConfig, ParamSet};
use crate::simulate::{simulate, SimOptions, SimOutput};
use crate::weights::{Contiguity, SpatialWeights};

pub const FIG1_SIDE: usize = 30;
pub const FIG1_CROSS: [f64; 2] = [0.35, 0.0];

pub fn fig1_weights() -> SpatialWeights<f64> {
    SpatialWeights::grid_contiguity(FIG1_SIDE, FIG1_SIDE, Contiguity::Rook)
        .and_then(|w| w.row_standardize())
        .expect("fixed lattice is valid")
}

pub fn fig1_params(cross: f64) -> Result<ParamSet<f64>> {
    ParamSet::from_a(
        ATilde::Constant(DVector::from_element(2, 1.0)),
        DMatrix::from_row_slice(2, 2, &[0.5, cross, cross, 0.5]),
        DMatrix::zeros(2, 2),
        &ErrorDist::standard_normal(),
    )
}

/// One field for the given cross coefficient, reusing the caller's weights.
pub fn fig1_simulate(w: &Arc<SpatialWeights<f64>>, cross: f64, seed: u64) -> Result<SimOutput<f64>> {
    let dims = Dimensions::new(FIG1_SIDE * FIG1_SIDE, 2, 1)?;
    let cfg = ModelConfig::new(dims, w.clone(), ErrorDist::standard_normal(), AMode::ConstantAcrossSpace, seed)?;
    simulate(&cfg, &fig1_params(cross)?, SimOptions::default())
}

/// Pearson correlation across locations between `ln Y^2` of two variables
/// in one `vec(Y_t)` slice.
pub fn cross_field_correlation(slice: &[f64], n: usize, a: usize, b: usize) -> f64 {
    let x: Vec<f64> = slice[a * n..(a + 1) * n].iter().map(|y| (y * y).ln()).collect();
    let y: Vec<f64> = slice[b * n..(b + 1) * n].iter().map(|y| (y * y).ln()).collect();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(&y) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx) * (u - mx);
        syy += (v - my) * (v - my);
    }
    sxy / (sxx * syy).sqrt()
}
