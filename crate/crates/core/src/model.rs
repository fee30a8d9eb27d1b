//! Domain types shared across the crate.
//!
//! Panels are stored as `n x p x (T + 1)` arrays. Slice `t` is laid out as
//! `vec(Y_t)` (column-major over locations, then variables), so a slice can be
//! viewed directly as an `n x p` nalgebra matrix. Slice 0 is the conditioning
//! observation `Y_0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PanelIndex, Result};
use crate::scalar::Real;
use crate::special::{digamma, trigamma, EULER_GAMMA, TRIGAMMA_HALF};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    /// Number of locations.
    pub n: usize,
    /// Number of variables.
    pub p: usize,
    /// Number of time points after the conditioning slice.
    pub t_len: usize,
}

impl Dimensions {
    pub fn new(n: usize, p: usize, t_len: usize) -> Result<Self> {
        if n == 0 || p == 0 || t_len == 0 {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got n={n}, p={p}, T={t_len}"
            )));
        }
        Ok(Self { n, p, t_len })
    }

    #[inline]
    pub fn np(&self) -> usize {
        self.n * self.p
    }

    /// Number of stored time slices, `T + 1`.
    #[inline]
    pub fn slices(&self) -> usize {
        self.t_len + 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.np() * self.slices()
    }

    #[inline]
    pub fn index(&self, location: usize, variable: usize, time: usize) -> usize {
        time * self.np() + variable * self.n + location
    }
}

/// Observed (or simulated) `n x p x (T + 1)` panel with index labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<T: Real> {
    pub dims: Dimensions,
    values: Vec<T>,
    pub location_ids: Vec<String>,
    pub variable_names: Vec<String>,
    pub time_labels: Vec<String>,
    /// Entries that were replaced by a jitter draw during ingestion.
    pub jittered: Vec<PanelIndex>,
}

impl<T: Real> Panel<T> {
    pub fn new(
        dims: Dimensions,
        values: Vec<T>,
        location_ids: Vec<String>,
        variable_names: Vec<String>,
        time_labels: Vec<String>,
    ) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::Shape(format!(
                "panel has {} values, dims {}x{}x{} need {}",
                values.len(),
                dims.n,
                dims.p,
                dims.slices(),
                dims.len()
            )));
        }
        if location_ids.len() != dims.n
            || variable_names.len() != dims.p
            || time_labels.len() != dims.slices()
        {
            return Err(Error::Shape("label counts do not match panel dimensions".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.finite()) {
            return Err(Error::Data(format!("non-finite panel value at flat index {pos}")));
        }
        Ok(Self {
            dims,
            values,
            location_ids,
            variable_names,
            time_labels,
            jittered: Vec::new(),
        })
    }

    /// Panel with generated labels `loc0.., var0.., 0..T`.
    pub fn with_default_labels(dims: Dimensions, values: Vec<T>) -> Result<Self> {
        let locs = (0..dims.n).map(|i| format!("loc{i}")).collect();
        let vars = (0..dims.p).map(|j| format!("var{j}")).collect();
        let times = (0..dims.slices()).map(|t| t.to_string()).collect();
        Self::new(dims, values, locs, vars, times)
    }

    #[inline]
    pub fn get(&self, location: usize, variable: usize, time: usize) -> T {
        self.values[self.dims.index(location, variable, time)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `vec(Y_t)` as a slice of length `n * p`.
    pub fn slice(&self, time: usize) -> &[T] {
        let np = self.dims.np();
        &self.values[time * np..(time + 1) * np]
    }

    /// `Y_t` as an `n x p` matrix.
    pub fn slice_matrix(&self, time: usize) -> DMatrix<T> {
        DMatrix::from_column_slice(self.dims.n, self.dims.p, self.slice(time))
    }

    /// Coordinates of every entry that is exactly zero.
    pub fn zero_entries(&self) -> Vec<PanelIndex> {
        let d = self.dims;
        let mut out = Vec::new();
        for t in 0..d.slices() {
            for j in 0..d.p {
                for i in 0..d.n {
                    if self.get(i, j, t) == T::zero() {
                        out.push((i, j, t));
                    }
                }
            }
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Relabels locations: new location `k` is old location `perm[k]`.
    pub fn permute_locations(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dims;
        if perm.len() != d.n {
            return Err(Error::Shape("permutation length differs from n".into()));
        }
        let mut values = vec![T::zero(); d.len()];
        for t in 0..d.slices() {
            for j in 0..d.p {
                for (k, &old) in perm.iter().enumerate() {
                    values[d.index(k, j, t)] = self.get(old, j, t);
                }
            }
        }
        let locs = perm.iter().map(|&o| self.location_ids[o].clone()).collect();
        Self::new(d, values, locs, self.variable_names.clone(), self.time_labels.clone())
    }
}

/// How the transformed intercept `Ã` varies over space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    /// One intercept per variable, shared by all locations.
    ConstantAcrossSpace,
    /// A free `n x p` intercept matrix.
    FreePerLocation,
}

/// Intercept of the log-squared model, stored on the centred (`Ã`) scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ATilde<T: Real> {
    Constant(DVector<T>),
    Free(DMatrix<T>),
}

impl<T: Real> ATilde<T> {
    pub fn mode(&self) -> AMode {
        match self {
            ATilde::Constant(_) => AMode::ConstantAcrossSpace,
            ATilde::Free(_) => AMode::FreePerLocation,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ATilde::Constant(v) => v.len(),
            ATilde::Free(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Broadcast to a full `n x p` matrix.
    pub fn to_matrix(&self, n: usize) -> DMatrix<T> {
        match self {
            ATilde::Constant(v) => DMatrix::from_fn(n, v.len(), |_, j| v[j]),
            ATilde::Free(m) => m.clone(),
        }
    }

    /// Adds `delta` to every entry (used to move between `A` and `Ã`).
    pub fn shifted(&self, delta: T) -> Self {
        match self {
            ATilde::Constant(v) => ATilde::Constant(v.add_scalar(delta)),
            ATilde::Free(m) => ATilde::Free(m.add_scalar(delta)),
        }
    }

    fn as_slice(&self) -> &[T] {
        match self {
            ATilde::Constant(v) => v.as_slice(),
            ATilde::Free(m) => m.as_slice(),
        }
    }
}

/// Full parameter set `(Ã, Ψ, Π)` together with the known variance `σ²_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T: Real> {
    pub a_tilde: ATilde<T>,
    pub psi: DMatrix<T>,
    pub pi: DMatrix<T>,
    pub sigma2_u: T,
}

impl<T: Real> ParamSet<T> {
    pub fn new(a_tilde: ATilde<T>, psi: DMatrix<T>, pi: DMatrix<T>, sigma2_u: T) -> Result<Self> {
        let p = psi.nrows();
        if psi.ncols() != p || pi.nrows() != p || pi.ncols() != p {
            return Err(Error::Shape("Psi and Pi must both be p x p".into()));
        }
        match &a_tilde {
            ATilde::Constant(v) if v.len() != p => {
                return Err(Error::Shape(format!("constant intercept has length {}, p = {p}", v.len())))
            }
            ATilde::Free(m) if m.ncols() != p => {
                return Err(Error::Shape(format!("free intercept has {} columns, p = {p}", m.ncols())))
            }
            _ => {}
        }
        if !(sigma2_u > T::zero()) || !sigma2_u.finite() {
            return Err(Error::InvalidParameter("sigma2_u must be positive and finite".into()));
        }
        let all_finite = a_tilde.as_slice().iter().chain(psi.iter()).chain(pi.iter()).all(|v| v.finite());
        if !all_finite {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        Ok(Self { a_tilde, psi, pi, sigma2_u })
    }

    /// Builds a parameter set from the user-facing intercept `A`, centring it
    /// with the error distribution's `E ln eps^2`. `σ²_u` is the distribution's
    /// `Var ln eps^2`.
    pub fn from_a(a: ATilde<T>, psi: DMatrix<T>, pi: DMatrix<T>, dist: &ErrorDist) -> Result<Self> {
        let a_tilde = a.shifted(T::of(dist.mean_log_sq));
        Self::new(a_tilde, psi, pi, T::of(dist.var_log_sq))
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.psi.nrows()
    }

    pub fn a_mode(&self) -> AMode {
        self.a_tilde.mode()
    }

    /// Back-transformed intercept `A = Ã - E ln eps^2`.
    pub fn a(&self, mean_log_sq: f64) -> ATilde<T> {
        self.a_tilde.shifted(-T::of(mean_log_sq))
    }

    /// Validates that the intercept fits `n` locations.
    pub fn check_locations(&self, n: usize) -> Result<()> {
        if let ATilde::Free(m) = &self.a_tilde {
            if m.nrows() != n {
                return Err(Error::Shape(format!("free intercept has {} rows, n = {n}", m.nrows())));
            }
        }
        Ok(())
    }
}

/// Length of the packed parameter vector.
pub fn packed_len(n: usize, p: usize, mode: AMode) -> usize {
    let a_len = match mode {
        AMode::ConstantAcrossSpace => p,
        AMode::FreePerLocation => n * p,
    };
    a_len + 2 * p * p
}

/// Packs `(vec(Ã), vec(Ψ), vec(Π))`, all column-major.
pub fn pack_params<T: Real>(params: &ParamSet<T>, mode: AMode) -> Result<DVector<T>> {
    if params.a_mode() != mode {
        return Err(Error::Shape(format!(
            "intercept is {:?} but {:?} was requested",
            params.a_mode(),
            mode
        )));
    }
    let data: Vec<T> = params
        .a_tilde
        .as_slice()
        .iter()
        .chain(params.psi.as_slice())
        .chain(params.pi.as_slice())
        .copied()
        .collect();
    Ok(DVector::from_vec(data))
}

/// Inverse of [`pack_params`].
pub fn unpack_params<T: Real>(
    theta: &[T],
    n: usize,
    p: usize,
    mode: AMode,
    sigma2_u: T,
) -> Result<ParamSet<T>> {
    let expected = packed_len(n, p, mode);
    if theta.len() != expected {
        return Err(Error::Shape(format!(
            "packed vector has length {}, expected {expected}",
            theta.len()
        )));
    }
    let (a_part, rest) = theta.split_at(expected - 2 * p * p);
    let (psi_part, pi_part) = rest.split_at(p * p);
    let a_tilde = match mode {
        AMode::ConstantAcrossSpace => ATilde::Constant(DVector::from_column_slice(a_part)),
        AMode::FreePerLocation => ATilde::Free(DMatrix::from_column_slice(n, p, a_part)),
    };
    ParamSet::new(
        a_tilde,
        DMatrix::from_column_slice(p, p, psi_part),
        DMatrix::from_column_slice(p, p, pi_part),
        sigma2_u,
    )
}

/// Elementwise `ln(y^2)` of every panel entry.
///
/// Fails with [`Error::ZeroValue`] listing all exact zeros.
pub fn log_sq_transform<T: Real>(panel: &Panel<T>) -> Result<Vec<T>> {
    let zeros = panel.zero_entries();
    if !zeros.is_empty() {
        return Err(Error::ZeroValue(zeros));
    }
    Ok(panel.values().iter().map(|&y| (y * y).ln()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    StandardNormal,
    StudentT { df: f64 },
}

/// Innovation distribution together with the moments of `ln eps^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDist {
    pub kind: ErrorKind,
    pub mean_log_sq: f64,
    pub var_log_sq: f64,
}

impl ErrorDist {
    pub fn standard_normal() -> Self {
        Self::new(ErrorKind::StandardNormal).expect("normal moments always exist")
    }

    pub fn student_t(df: f64) -> Result<Self> {
        Self::new(ErrorKind::StudentT { df })
    }

    pub fn new(kind: ErrorKind) -> Result<Self> {
        let (mean_log_sq, var_log_sq) = error_dist_moments(kind)?;
        Ok(Self { kind, mean_log_sq, var_log_sq })
    }

    /// Short label, `normal` or `t<df>`.
    pub fn label(&self) -> String {
        match self.kind {
            ErrorKind::StandardNormal => "normal".into(),
            ErrorKind::StudentT { df } => format!("t{df}"),
        }
    }

    /// Parses `normal` or `t<df>` (e.g. `t3`).
    pub fn parse(label: &str) -> Result<Self> {
        let l = label.trim().to_ascii_lowercase();
        if l == "normal" || l == "gaussian" {
            return Ok(Self::standard_normal());
        }
        if let Some(df) = l.strip_prefix('t') {
            let df: f64 = df
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad error distribution '{label}'")))?;
            return Self::student_t(df);
        }
        Err(Error::InvalidParameter(format!("unknown error distribution '{label}'")))
    }

    /// One unit-variance innovation draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ErrorKind::StandardNormal => StandardNormal.sample(rng),
            ErrorKind::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("df validated at construction").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}

/// Mean and variance of `ln eps^2` for the unit-variance innovation.
pub fn error_dist_moments(kind: ErrorKind) -> Result<(f64, f64)> {
    match kind {
        ErrorKind::StandardNormal => Ok((-(EULER_GAMMA + std::f64::consts::LN_2), TRIGAMMA_HALF)),
        ErrorKind::StudentT { df } => {
            if !(df > 2.0) || !df.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "Student-t needs df > 2 for unit-variance scaling, got {df}"
                )));
            }
            let scale_sq = (df - 2.0) / df;
            let mean = digamma(0.5) - digamma(df / 2.0) + df.ln() + scale_sq.ln();
            let var = trigamma(0.5) + trigamma(df / 2.0);
            Ok((mean, var))
        }
    }
}

/// Everything needed to simulate one panel.
#[derive(Debug, Clone)]
pub struct ModelConfig<T: Real> {
    pub dims: Dimensions,
    pub weights: Arc<SpatialWeights<T>>,
    pub error_dist: ErrorDist,
    pub a_mode: AMode,
    pub seed: u64,
}

impl<T: Real> ModelConfig<T> {
    pub fn new(
        dims: Dimensions,
        weights: Arc<SpatialWeights<T>>,
        error_dist: ErrorDist,
        a_mode: AMode,
        seed: u64,
    ) -> Result<Self> {
        if weights.n() != dims.n {
            return Err(Error::Shape(format!(
                "weights are {}x{} but the panel has n = {}",
                weights.n(),
                weights.n(),
                dims.n
            )));
        }
        if dims.t_len == 1 && a_mode != AMode::ConstantAcrossSpace {
            return Err(Error::InvalidParameter(
                "T = 1 requires an intercept that is constant across space".into(),
            ));
        }
        Ok(Self { dims, weights, error_dist, a_mode, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(p: usize, mode: AMode, n: usize, seed: u64) -> ParamSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = || rng.random_range(-2.0..2.0);
        let a = match mode {
            AMode::ConstantAcrossSpace => ATilde::Constant(DVector::from_fn(p, |_, _| r())),
            AMode::FreePerLocation => ATilde::Free(DMatrix::from_fn(n, p, |_, _| r())),
        };
        let psi = DMatrix::from_fn(p, p, |_, _| r());
        let pi = DMatrix::from_fn(p, p, |_, _| r());
        ParamSet::new(a, psi, pi, 4.9).unwrap()
    }

    #[test]
    fn pack_univariate_layout() {
        let ps = ParamSet::new(
            ATilde::Constant(DVector::from_vec(vec![-1.27])),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.3),
            TRIGAMMA_HALF,
        )
        .unwrap();
        let theta = pack_params(&ps, AMode::ConstantAcrossSpace).unwrap();
        assert_eq!(theta.as_slice(), &[-1.27, 0.5, 0.3]);
    }

    #[test]
    fn pack_bivariate_length_and_order() {
        let ps = params(2, AMode::ConstantAcrossSpace, 4, 1);
        let theta = pack_params(&ps, AMode::ConstantAcrossSpace).unwrap();
        assert_eq!(theta.len(), 10);
        assert_eq!(packed_len(4, 2, AMode::ConstantAcrossSpace), 10);
        assert_eq!(packed_len(4, 2, AMode::FreePerLocation), 16);
        // psi_21 (row 1, col 0) is the second psi entry in column-major order
        assert_eq!(theta[3], ps.psi[(1, 0)]);
        assert_eq!(theta[4], ps.psi[(0, 1)]);
        assert_eq!(theta[7], ps.pi[(1, 0)]);
    }

    #[test]
    fn pack_rejects_mode_mismatch() {
        let ps = params(2, AMode::ConstantAcrossSpace, 4, 2);
        assert!(pack_params(&ps, AMode::FreePerLocation).is_err());
        assert!(unpack_params(&[0.0; 9], 4, 2, AMode::ConstantAcrossSpace, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(seed in any::<u64>(), p in 1usize..4, n in 1usize..6, free in any::<bool>()) {
            let mode = if free { AMode::FreePerLocation } else { AMode::ConstantAcrossSpace };
            let ps = params(p, mode, n, seed);
            let theta = pack_params(&ps, mode).unwrap();
            let back = unpack_params(theta.as_slice(), n, p, mode, ps.sigma2_u).unwrap();
            prop_assert_eq!(back, ps);
        }

        #[test]
        fn log_sq_is_sign_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims = Dimensions::new(3, 2, 2).unwrap();
            let vals: Vec<f64> = (0..dims.len()).map(|_| {
                let v: f64 = rng.random_range(0.01..10.0);
                if rng.random::<bool>() { v } else { -v }
            }).collect();
            let panel = Panel::with_default_labels(dims, vals).unwrap();
            let a = log_sq_transform(&panel).unwrap();
            let b = log_sq_transform(&panel.map_values(|v| -v)).unwrap();
            prop_assert_eq!(&a, &b);
            for (x, y) in a.iter().zip(panel.values()) {
                prop_assert!((x - 2.0 * y.abs().ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_sq_examples() {
        let dims = Dimensions::new(2, 1, 1).unwrap();
        let panel = Panel::with_default_labels(dims, vec![1.0, -std::f64::consts::E, 2.0, 3.0]).unwrap();
        let out = log_sq_transform(&panel).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_sq_reports_every_zero() {
        let dims = Dimensions::new(2, 2, 1).unwrap();
        let mut vals = vec![1.0; dims.len()];
        vals[dims.index(1, 0, 0)] = 0.0;
        vals[dims.index(0, 1, 1)] = 0.0;
        let panel = Panel::with_default_labels(dims, vals).unwrap();
        match log_sq_transform(&panel) {
            Err(Error::ZeroValue(z)) => assert_eq!(z, vec![(1, 0, 0), (0, 1, 1)]),
            other => panic!("expected ZeroValue, got {other:?}"),
        }
    }

    #[test]
    fn normal_moments() {
        let (m, v) = error_dist_moments(ErrorKind::StandardNormal).unwrap();
        assert!((m + 1.270_362_845_461_478).abs() < 1e-12);
        assert!((v - 4.934_802_200_544_679).abs() < 1e-12);
    }

    #[test]
    fn student_t3_moments_closed_form() {
        let (m, v) = error_dist_moments(ErrorKind::StudentT { df: 3.0 }).unwrap();
        // digamma(3/2) = digamma(1/2) + 2 and ln 3 + ln(1/3) = 0
        assert!((m + 2.0).abs() < 1e-12);
        assert!((v - (TRIGAMMA_HALF + TRIGAMMA_HALF - 4.0)).abs() < 1e-12);
        assert!((v - 5.869_604_401_089_358).abs() < 1e-12);
    }

    #[test]
    fn student_t_requires_df_above_two() {
        assert!(ErrorDist::student_t(2.0).is_err());
        assert!(ErrorDist::student_t(1.5).is_err());
        assert!(ErrorDist::parse("t3").is_ok());
        assert!(ErrorDist::parse("cauchy").is_err());
    }

    fn sampled_log_sq_moments(dist: &ErrorDist, draws: usize, seed: u64) -> (f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s, mut s2, mut e2) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let e = dist.draw(&mut rng);
            let l = (e * e).ln();
            s += l;
            s2 += l * l;
            e2 += e * e;
        }
        let m = s / draws as f64;
        (m, s2 / draws as f64 - m * m, e2 / draws as f64)
    }

    #[test]
    fn normal_moments_match_sampling() {
        let d = ErrorDist::standard_normal();
        let (m, v, _) = sampled_log_sq_moments(&d, 1_000_000, 11);
        assert!(((m - d.mean_log_sq) / d.mean_log_sq).abs() < 0.01, "mean {m}");
        assert!(((v - d.var_log_sq) / d.var_log_sq).abs() < 0.01, "var {v}");
    }

    #[test]
    fn student_t3_moments_match_sampling() {
        let d = ErrorDist::student_t(3.0).unwrap();
        let (m, v, _) = sampled_log_sq_moments(&d, 1_000_000, 12);
        assert!(((m - d.mean_log_sq) / d.mean_log_sq).abs() < 0.01, "mean {m}");
        assert!(((v - d.var_log_sq) / d.var_log_sq).abs() < 0.01, "var {v}");
    }

    #[test]
    fn student_t_draws_have_unit_variance() {
        // t5 has a finite fourth moment, so the sample variance settles quickly
        let d = ErrorDist::student_t(5.0).unwrap();
        let (_, _, e2) = sampled_log_sq_moments(&d, 1_000_000, 13);
        assert!((e2 - 1.0).abs() < 0.02, "E eps^2 = {e2}");
    }

    #[test]
    fn from_a_centres_the_intercept() {
        let d = ErrorDist::standard_normal();
        let ps = ParamSet::from_a(
            ATilde::Constant(DVector::from_vec(vec![1.0, 1.0])),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            &d,
        )
        .unwrap();
        match ps.a(d.mean_log_sq) {
            ATilde::Constant(a) => assert!((a[0] - 1.0f64).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!((ps.sigma2_u - d.var_log_sq).abs() < 1e-15);
    }

    #[test]
    fn config_requires_constant_mode_for_single_period() {
        let w = Arc::new(SpatialWeights::<f64>::grid_contiguity(2, 2, crate::weights::Contiguity::Rook).unwrap());
        let dims = Dimensions::new(4, 1, 1).unwrap();
        let d = ErrorDist::standard_normal();
        assert!(ModelConfig::new(dims, w.clone(), d, AMode::FreePerLocation, 0).is_err());
        assert!(ModelConfig::new(dims, w.clone(), d, AMode::ConstantAcrossSpace, 0).is_ok());
        let wrong = Dimensions::new(5, 1, 3).unwrap();
        assert!(ModelConfig::new(wrong, w, d, AMode::ConstantAcrossSpace, 0).is_err());
    }
}
