//! Replicated simulate-then-fit experiments with bias/RMSE aggregation.
//!
//! Every replication draws its seed from a ChaCha8 stream keyed by
//! `(base seed, cell, replication)`, and results are collected in index
//! order, so reports do not depend on the number of worker threads.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions};
use crate::model::{AMode, ATilde, Dimensions, ErrorDist, ModelConfig, ParamSet};
use crate::simulate::{simulate, SimOptions};
use crate::stability::check_stability;
use crate::weights::{Contiguity, SpatialWeights};

/// Cells with a larger share of failed fits are flagged.
pub const FAILURE_FLAG_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinModel {
    A,
    B,
    C,
}

impl std::str::FromStr for BuiltinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// One `(grid, T)` pair of the design ladder; `n = rows * cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSize {
    pub rows: usize,
    pub cols: usize,
    pub t_len: usize,
}

impl McSize {
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }
}

/// Monte-Carlo design. Matrices are given row by row; `a` holds one
/// intercept per variable on the untransformed scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDesign {
    pub model_id: String,
    pub a: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub sizes: Vec<McSize>,
    pub error_dists: Vec<String>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// `σ²_u` plugged into the likelihood; the distribution's own value if absent.
    #[serde(default)]
    pub sigma2_u: Option<f64>,
}

fn default_burn_in() -> usize {
    50
}

fn default_scheme() -> String {
    "queen".into()
}

fn rows_to_matrix(rows: &[Vec<f64>], p: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape(format!("{name} must be {p} x {p}")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// The three built-in designs: `A_0 = 1`, grids 5x5/7x7/10x10 with
/// `T = 30/100/200`, row-standardised queen weights, 200 replications.
pub fn builtin_design(model: BuiltinModel) -> McDesign {
    let (psi, pi) = match model {
        BuiltinModel::A => ([[0.5, 0.1], [0.1, 0.5]], [[0.3, 0.0], [0.0, 0.3]]),
        BuiltinModel::B => ([[0.5, 0.1], [0.1, 0.5]], [[0.0, 0.0], [0.0, 0.0]]),
        BuiltinModel::C => ([[0.2, 0.4], [0.4, 0.2]], [[0.3, 0.0], [0.0, 0.3]]),
    };
    McDesign {
        model_id: format!("{model:?}"),
        a: vec![1.0, 1.0],
        psi: psi.iter().map(|r| r.to_vec()).collect(),
        pi: pi.iter().map(|r| r.to_vec()).collect(),
        sizes: vec![
            McSize { rows: 5, cols: 5, t_len: 30 },
            McSize { rows: 7, cols: 7, t_len: 100 },
            McSize { rows: 10, cols: 10, t_len: 200 },
        ],
        error_dists: vec!["normal".into(), "t3".into()],
        replications: 200,
        seed: 1,
        burn_in: default_burn_in(),
        scheme: default_scheme(),
        sigma2_u: None,
    }
}

impl McDesign {
    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn psi_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.psi, self.p(), "psi")
    }

    pub fn pi_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.pi, self.p(), "pi")
    }

    pub fn dists(&self) -> Result<Vec<ErrorDist>> {
        self.error_dists.iter().map(|s| ErrorDist::parse(s)).collect()
    }

    pub fn contiguity(&self) -> Result<Contiguity> {
        self.scheme.parse()
    }

    /// Data-generating parameters under one error distribution.
    pub fn params0(&self, dist: &ErrorDist) -> Result<ParamSet<f64>> {
        ParamSet::from_a(
            ATilde::Constant(DVector::from_column_slice(&self.a)),
            self.psi_matrix()?,
            self.pi_matrix()?,
            dist,
        )
    }

    pub fn weights(&self, size: McSize) -> Result<SpatialWeights<f64>> {
        SpatialWeights::grid_contiguity(size.rows, size.cols, self.contiguity()?)?.row_standardize()
    }

    /// Rejects malformed designs and configurations that are not stable.
    pub fn validate(&self) -> Result<()> {
        if self.p() == 0 {
            return Err(Error::InvalidParameter("design needs at least one variable".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be positive".into()));
        }
        if self.sizes.is_empty() || self.error_dists.is_empty() {
            return Err(Error::InvalidParameter("design needs sizes and error distributions".into()));
        }
        if let Some(s) = self.sigma2_u {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("sigma2_u must be positive".into()));
            }
        }
        for size in &self.sizes {
            if size.n() < 2 || size.t_len < 2 {
                return Err(Error::InvalidParameter(format!(
                    "size {}x{} with T = {} is too small",
                    size.rows, size.cols, size.t_len
                )));
            }
        }
        let params = self.params0(&ErrorDist::standard_normal())?;
        self.dists()?;
        for size in &self.sizes {
            let rep = check_stability(&params, &self.weights(*size)?)?;
            if !rep.stable {
                return Err(Error::Unstable { radius: rep.spectral_radius, s_invertible: rep.s_invertible });
            }
        }
        Ok(())
    }

    /// Column names: `a`, then `psi` and `pi` entries in vec order.
    pub fn columns(&self) -> Vec<String> {
        let p = self.p();
        let mut cols = vec!["a".to_string()];
        for prefix in ["psi", "pi"] {
            for l in 0..p {
                for k in 0..p {
                    cols.push(format!("{prefix}{}{}", k + 1, l + 1));
                }
            }
        }
        cols
    }

    fn truth(&self) -> Result<Vec<f64>> {
        let a_mean = self.a.iter().sum::<f64>() / self.p() as f64;
        let mut v = vec![a_mean];
        v.extend(self.psi_matrix()?.as_slice());
        v.extend(self.pi_matrix()?.as_slice());
        Ok(v)
    }
}

/// Seed of replication `rep` in cell `cell`.
pub fn replication_seed(base_seed: u64, cell: usize, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub converged: bool,
    /// Table columns; `None` for failed replications.
    pub estimates: Option<Vec<f64>>,
    /// t-values of the packed parameter vector `(Ã, vec Ψ, vec Π)`.
    pub t_values: Option<Vec<Option<f64>>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model_id: String,
    pub error_dist: String,
    pub n: usize,
    pub t_len: usize,
    pub replications: usize,
    pub failures: usize,
    pub convergence_rate: f64,
    pub flagged: bool,
    pub truth: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    pub variance: Vec<f64>,
    pub raw: Vec<ReplicationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub design: McDesign,
    pub columns: Vec<String>,
    pub cells: Vec<CellReport>,
}

fn run_replication(
    design: &McDesign,
    dist: &ErrorDist,
    params0: &ParamSet<f64>,
    weights: &Arc<SpatialWeights<f64>>,
    size: McSize,
    rep: usize,
    seed: u64,
) -> ReplicationResult {
    let attempt = || -> Result<(bool, Vec<f64>, Vec<Option<f64>>)> {
        let dims = Dimensions::new(size.n(), design.p(), size.t_len)?;
        let cfg = ModelConfig::new(dims, weights.clone(), *dist, AMode::ConstantAcrossSpace, seed)?;
        let sim = simulate(&cfg, params0, SimOptions { burn_in: design.burn_in, ..Default::default() })?;
        let opts = FitOptions { sigma2_u: design.sigma2_u, ..Default::default() };
        let res = fit(&sim.panel, weights, dist, AMode::ConstantAcrossSpace, &opts)?;
        let ATilde::Constant(a) = &res.a else { unreachable!("constant mode fit") };
        let mut est = vec![a.mean()];
        est.extend(res.params.psi.as_slice());
        est.extend(res.params.pi.as_slice());
        Ok((res.converged, est, res.t_values))
    };
    match attempt() {
        Ok((true, est, t)) => ReplicationResult {
            replication: rep,
            seed,
            converged: true,
            estimates: Some(est),
            t_values: Some(t),
            error: None,
        },
        Ok((false, _, _)) => ReplicationResult {
            replication: rep,
            seed,
            converged: false,
            estimates: None,
            t_values: None,
            error: Some("optimizer did not converge".into()),
        },
        Err(e) => ReplicationResult {
            replication: rep,
            seed,
            converged: false,
            estimates: None,
            t_values: None,
            error: Some(e.to_string()),
        },
    }
}

/// Per-coordinate `(bias, rmse, variance)` over the successful replications.
pub fn aggregate(truth: &[f64], raw: &[ReplicationResult]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ok: Vec<&Vec<f64>> = raw.iter().filter_map(|r| r.estimates.as_ref()).collect();
    let k = truth.len();
    if ok.is_empty() {
        return (vec![f64::NAN; k], vec![f64::NAN; k], vec![f64::NAN; k]);
    }
    let m = ok.len() as f64;
    let mut bias = vec![0.0; k];
    let mut rmse = vec![0.0; k];
    let mut var = vec![0.0; k];
    for c in 0..k {
        let mean = ok.iter().map(|e| e[c]).sum::<f64>() / m;
        bias[c] = ok.iter().map(|e| e[c] - truth[c]).sum::<f64>() / m;
        rmse[c] = (ok.iter().map(|e| (e[c] - truth[c]).powi(2)).sum::<f64>() / m).sqrt();
        var[c] = ok.iter().map(|e| (e[c] - mean).powi(2)).sum::<f64>() / m;
    }
    (bias, rmse, var)
}

/// Runs every `(error distribution, size)` cell of the design on a pool of
/// `workers` threads.
pub fn run_design(design: &McDesign, workers: usize) -> Result<McReport> {
    design.validate()?;
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be positive".into()));
    }
    let dists = design.dists()?;
    let weights: Vec<Arc<SpatialWeights<f64>>> =
        design.sizes.iter().map(|s| design.weights(*s).map(Arc::new)).collect::<Result<_>>()?;
    let params: Vec<ParamSet<f64>> = dists.iter().map(|d| design.params0(d)).collect::<Result<_>>()?;
    let n_sizes = design.sizes.len();
    let tasks: Vec<(usize, usize)> = (0..dists.len() * n_sizes)
        .flat_map(|cell| (0..design.replications).map(move |r| (cell, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<ReplicationResult> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, r)| {
                let (di, si) = (cell / n_sizes, cell % n_sizes);
                let seed = replication_seed(design.seed, cell, r);
                run_replication(design, &dists[di], &params[di], &weights[si], design.sizes[si], r, seed)
            })
            .collect()
    });
    let truth = design.truth()?;
    let cells = results
        .chunks(design.replications)
        .enumerate()
        .map(|(cell, raw)| {
            let (di, si) = (cell / n_sizes, cell % n_sizes);
            let (bias, rmse, variance) = aggregate(&truth, raw);
            let failures = raw.iter().filter(|r| r.estimates.is_none()).count();
            let size = design.sizes[si];
            CellReport {
                model_id: design.model_id.clone(),
                error_dist: dists[di].label(),
                n: size.n(),
                t_len: size.t_len,
                replications: raw.len(),
                failures,
                convergence_rate: (raw.len() - failures) as f64 / raw.len() as f64,
                flagged: failures as f64 > FAILURE_FLAG_SHARE * raw.len() as f64,
                truth: truth.clone(),
                bias,
                rmse,
                variance,
                raw: raw.to_vec(),
            }
        })
        .collect();
    Ok(McReport { columns: design.columns(), design: design.clone(), cells })
}

impl McReport {
    /// Merges reports that share a column layout (used for the full ladder).
    pub fn merge(reports: Vec<McReport>) -> Result<McReport> {
        let mut it = reports.into_iter();
        let mut first = it.next().ok_or_else(|| Error::InvalidParameter("nothing to merge".into()))?;
        for r in it {
            if r.columns != first.columns {
                return Err(Error::Shape("reports have different columns".into()));
            }
            first.cells.extend(r.cells);
        }
        Ok(first)
    }

    /// Copy without the per-replication records.
    pub fn without_raw(&self) -> McReport {
        let mut r = self.clone();
        r.cells.iter_mut().for_each(|c| c.raw.clear());
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    AlignedText,
    Csv,
}

fn groups(report: &McReport) -> Vec<(String, String, Vec<&CellReport>)> {
    let mut out: Vec<(String, String, Vec<&CellReport>)> = Vec::new();
    for c in &report.cells {
        match out.iter_mut().find(|(m, d, _)| *m == c.model_id && *d == c.error_dist) {
            Some(g) => g.2.push(c),
            None => out.push((c.model_id.clone(), c.error_dist.clone(), vec![c])),
        }
    }
    for g in &mut out {
        g.2.sort_by_key(|c| (c.n, c.t_len));
    }
    out
}

/// Bias and RMSE tables per `(model, error distribution)`, rows by `(n, T)`.
pub fn emit_tables(report: &McReport, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let _ = writeln!(out, "table,model,dist,n,T,replications,failures,{}", report.columns.join(","));
            for (_, _, cells) in groups(report) {
                for (name, pick) in [("bias", 0), ("rmse", 1)] {
                    for c in &cells {
                        let vals = if pick == 0 { &c.bias } else { &c.rmse };
                        let nums: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
                        let _ = writeln!(
                            out,
                            "{name},{},{},{},{},{},{},{}",
                            c.model_id,
                            c.error_dist,
                            c.n,
                            c.t_len,
                            c.replications,
                            c.failures,
                            nums.join(",")
                        );
                    }
                }
            }
        }
        TableFormat::AlignedText => {
            let header = |out: &mut String| {
                let _ = write!(out, "{:>5} {:>5}", "n", "T");
                for c in &report.columns {
                    let _ = write!(out, " {c:>9}");
                }
                let _ = writeln!(out, " {:>9}", "failures");
            };
            let gs = groups(report);
            if gs.is_empty() {
                header(&mut out);
            }
            for (model, dist, cells) in gs {
                for (title, pick) in [("Average bias", 0), ("Root-mean-square error", 1)] {
                    let _ = writeln!(out, "{title}: model {model}, {dist} errors");
                    header(&mut out);
                    for c in &cells {
                        let vals = if pick == 0 { &c.bias } else { &c.rmse };
                        let _ = write!(out, "{:>5} {:>5}", c.n, c.t_len);
                        for v in vals {
                            let _ = write!(out, " {v:>9.4}");
                        }
                        let flag = if c.flagged { " !" } else { "" };
                        let _ = writeln!(out, " {:>7}/{}{flag}", c.failures, c.replications);
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(model: BuiltinModel, reps: usize) -> McDesign {
        McDesign {
            sizes: vec![McSize { rows: 3, cols: 3, t_len: 20 }, McSize { rows: 4, cols: 4, t_len: 30 }],
            error_dists: vec!["normal".into()],
            replications: reps,
            ..builtin_design(model)
        }
    }

    #[test]
    fn builtin_designs_match_the_published_models() {
        let a = builtin_design(BuiltinModel::A);
        assert_eq!(a.psi_matrix().unwrap(), DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]));
        assert_eq!(a.pi_matrix().unwrap(), DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.3]));
        assert_eq!(builtin_design(BuiltinModel::B).pi_matrix().unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(
            builtin_design(BuiltinModel::C).psi_matrix().unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.2, 0.4, 0.4, 0.2])
        );
        let ns: Vec<(usize, usize)> = a.sizes.iter().map(|s| (s.n(), s.t_len)).collect();
        assert_eq!(ns, vec![(25, 30), (49, 100), (100, 200)]);
        for m in [BuiltinModel::A, BuiltinModel::B, BuiltinModel::C] {
            builtin_design(m).validate().unwrap();
        }
    }

    #[test]
    fn column_order() {
        let cols = builtin_design(BuiltinModel::A).columns();
        assert_eq!(cols, ["a", "psi11", "psi21", "psi12", "psi22", "pi11", "pi21", "pi12", "pi22"]);
    }

    #[test]
    fn single_replication_rmse_equals_abs_bias() {
        let r = run_design(&tiny(BuiltinModel::A, 1), 2).unwrap();
        for c in &r.cells {
            assert_eq!(c.raw.len(), 1);
            if c.failures == 0 {
                for (b, e) in c.bias.iter().zip(&c.rmse) {
                    assert!((b.abs() - e).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn aggregation_identity_and_rmse_bound() {
        let r = run_design(&tiny(BuiltinModel::C, 12), 3).unwrap();
        for c in &r.cells {
            for k in 0..c.bias.len() {
                assert!(c.rmse[k] >= c.bias[k].abs());
                assert!((c.rmse[k].powi(2) - c.bias[k].powi(2) - c.variance[k]).abs() < 1e-12);
            }
            assert_eq!(c.replications - c.failures, c.raw.iter().filter(|x| x.estimates.is_some()).count());
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let d = tiny(BuiltinModel::B, 6);
        let one = run_design(&d, 1).unwrap();
        let four = run_design(&d, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(emit_tables(&one, TableFormat::Csv), emit_tables(&four, TableFormat::Csv));
    }

    #[test]
    fn unstable_design_rejected() {
        let mut d = tiny(BuiltinModel::A, 2);
        d.pi = vec![vec![1.2, 0.0], vec![0.0, 0.3]];
        assert!(matches!(run_design(&d, 1), Err(Error::Unstable { .. })));
    }

    #[test]
    fn empty_report_is_header_only() {
        let d = builtin_design(BuiltinModel::A);
        let r = McReport { columns: d.columns(), design: d, cells: vec![] };
        let csv = emit_tables(&r, TableFormat::Csv);
        assert_eq!(csv.lines().count(), 1);
        let txt = emit_tables(&r, TableFormat::AlignedText);
        assert_eq!(txt.lines().count(), 1);
        assert!(txt.contains("psi21"));
    }

    #[test]
    fn csv_round_trips() {
        let r = run_design(&tiny(BuiltinModel::A, 3), 2).unwrap();
        let csv = emit_tables(&r, TableFormat::Csv);
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 4);
        // bias rows of both cells come first, then rmse rows
        for (i, c) in r.cells.iter().enumerate() {
            let bias: Vec<f64> = rows[i].iter().skip(7).map(|s| s.parse().unwrap()).collect();
            let rmse: Vec<f64> = rows[2 + i].iter().skip(7).map(|s| s.parse().unwrap()).collect();
            assert_eq!(bias, c.bias);
            assert_eq!(rmse, c.rmse);
        }
    }

    #[test]
    fn seeds_are_distinct_per_cell_and_replication() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..6 {
            for r in 0..50 {
                assert!(seen.insert(replication_seed(1, cell, r)));
            }
        }
    }

    #[test]
    fn design_round_trips_through_toml() {
        let d = builtin_design(BuiltinModel::C);
        let text = toml::to_string(&d).unwrap();
        let back: McDesign = toml::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
