//! Fit documents: an aligned estimate/standard-error table with one column
//! pair per variable, and a one-row-per-parameter CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estimator::{AssumptionReport, FitResult};
use crate::model::{AMode, Panel};

/// `|t|` above `double` earns `**`, above `single` earns `*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Markers {
    pub single: f64,
    pub double: f64,
}

impl Markers {
    pub const TABLE: Markers = Markers { single: 1.9, double: 2.0 };
    pub const CONVENTIONAL: Markers = Markers { single: 1.96, double: 2.576 };

    pub fn mark(&self, t: Option<f64>) -> &'static str {
        match t.map(f64::abs) {
            Some(a) if a > self.double => "**",
            Some(a) if a > self.single => "*",
            _ => "",
        }
    }
}

/// One estimated coordinate with its position in `Ã`, `Ψ` or `Π`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterRow {
    pub block: &'static str,
    pub row: String,
    pub column: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
    pub marker: &'static str,
}

/// Labels every packed coordinate in pack order.
pub fn parameter_rows(result: &FitResult<f64>, panel: &Panel<f64>, markers: Markers) -> Vec<ParameterRow> {
    let (n, p) = (panel.dims.n, panel.dims.p);
    let vars = &panel.variable_names;
    let mut labels: Vec<(&'static str, String, String)> = Vec::new();
    match result.a_mode {
        AMode::ConstantAcrossSpace => labels.extend(vars.iter().map(|v| ("A~", String::new(), v.clone()))),
        AMode::FreePerLocation => {
            for v in vars {
                for loc in panel.location_ids.iter().take(n) {
                    labels.push(("A~", loc.clone(), v.clone()));
                }
            }
        }
    }
    for block in ["Psi", "Pi"] {
        for l in 0..p {
            for k in 0..p {
                labels.push((block, vars[k].clone(), vars[l].clone()));
            }
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, (block, row, column))| ParameterRow {
            block,
            row,
            column,
            estimate: result.theta[i],
            std_error: result.std_errors[i],
            t_value: result.t_values[i],
            marker: markers.mark(result.t_values[i]),
        })
        .collect()
}

/// `parameter,row,column,estimate,std_error,t_value,marker`, 17 significant digits.
pub fn fit_csv(result: &FitResult<f64>, panel: &Panel<f64>, markers: Markers) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.16e}"));
    let mut out = String::from("parameter,row,column,estimate,std_error,t_value,marker\n");
    for r in parameter_rows(result, panel, markers) {
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{},{},{}",
            r.block,
            r.row,
            r.column,
            r.estimate,
            opt(r.std_error),
            opt(r.t_value),
            r.marker
        );
    }
    out
}

/// Human-readable fit document.
pub fn fit_document(
    result: &FitResult<f64>,
    panel: &Panel<f64>,
    assumptions: Option<&AssumptionReport>,
    markers: Markers,
) -> String {
    let d = panel.dims;
    let p = d.p;
    let rows = parameter_rows(result, panel, markers);
    let mut out = String::new();
    let _ = writeln!(out, "QML estimates and standard errors");
    let _ = writeln!(out, "n = {}, p = {}, T = {}, error distribution {}", d.n, p, d.t_len, result.error_dist.label());
    let _ = writeln!(out, "sigma2_u = {:.6}", result.params.sigma2_u);
    let _ = writeln!(out, "log-likelihood = {:.6}", result.log_lik);
    let _ = writeln!(
        out,
        "converged = {}, iterations = {}, gradient sup-norm = {:.3e}, spectral radius = {:.6}",
        if result.converged { "yes" } else { "no" },
        result.iterations,
        result.gradient_norm,
        result.spectral_radius_at_solution
    );
    if !result.hessian_negative_definite {
        let _ = writeln!(out, "warning: Hessian is not negative definite; some standard errors are unavailable");
    }
    out.push('\n');

    let label_width = panel
        .variable_names
        .iter()
        .chain(panel.location_ids.iter())
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(4)
        + 6;
    let cell = 11;
    let _ = write!(out, "{:label_width$}", "");
    for v in &panel.variable_names {
        let _ = write!(out, " {:>w$}", v, w = 2 * cell + 1);
    }
    out.push('\n');
    let _ = write!(out, "{:label_width$}", "");
    for _ in 0..p {
        let _ = write!(out, " {:>cell$} {:>cell$}", "Estimate", "Std. error");
    }
    out.push('\n');
    let rule = "-".repeat(label_width + p * (2 * cell + 2));
    let _ = writeln!(out, "{rule}");

    let fmt_est = |r: &ParameterRow| format!("{:.3}{}", r.estimate, r.marker);
    let fmt_se = |r: &ParameterRow| r.std_error.map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"));
    // estimates for column l of a block sit at rows[offset + l * p + k]
    let emit_block = |out: &mut String, title: &str, row_labels: &[String], start: usize, stride: usize| {
        for (k, lab) in row_labels.iter().enumerate() {
            let head = if k == 0 { format!("{title:<5} {lab}") } else { format!("{:<5} {lab}", "") };
            let _ = write!(out, "{head:label_width$}");
            for l in 0..p {
                let r = &rows[start + l * stride + k];
                let _ = write!(out, " {:>cell$} {:>cell$}", fmt_est(r), fmt_se(r));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{rule}");
    };
    match result.a_mode {
        AMode::ConstantAcrossSpace => {
            let _ = write!(out, "{:label_width$}", "A~");
            for r in rows.iter().take(p) {
                let _ = write!(out, " {:>cell$} {:>cell$}", fmt_est(r), fmt_se(r));
            }
            out.push('\n');
            let _ = writeln!(out, "{rule}");
            emit_block(&mut out, "Psi", &panel.variable_names, p, p);
            emit_block(&mut out, "Pi", &panel.variable_names, p + p * p, p);
        }
        AMode::FreePerLocation => {
            emit_block(&mut out, "A~", &panel.location_ids, 0, d.n);
            emit_block(&mut out, "Psi", &panel.variable_names, d.n * p, p);
            emit_block(&mut out, "Pi", &panel.variable_names, d.n * p + p * p, p);
        }
    }
    let _ = writeln!(out, "Significance: * |t| > {}, ** |t| > {}", markers.single, markers.double);
    if let Some(a) = assumptions {
        out.push('\n');
        let _ = writeln!(out, "Assumption checks");
        out.push_str(&a.to_text());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_thresholds() {
        let m = Markers::TABLE;
        assert_eq!(m.mark(Some(-4.686 / 1.381)), "**");
        assert_eq!(m.mark(Some(-2.652 / 1.337)), "*");
        assert_eq!(m.mark(Some(0.111 / 0.074)), "");
        assert_eq!(m.mark(Some(2.0)), "*");
        assert_eq!(m.mark(None), "");
        assert_eq!(Markers::CONVENTIONAL.mark(Some(-2.652 / 1.337)), "*");
        assert_eq!(Markers::CONVENTIONAL.mark(Some(1.93)), "");
    }
}
