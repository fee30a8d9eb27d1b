//! Subcommand arguments. Every field can also come from a TOML config file
//! section of the same name; flags given on the command line win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Takes each option from `flags` when present, otherwise from `file`.
/// Boolean switches are on if either source turns them on.
macro_rules! merged {
    ($flags:ident, $file:ident; opts: [$($o:ident),*]; switches: [$($s:ident),*]) => {
        Self {
            $($o: $flags.$o.or($file.$o),)*
            $($s: $flags.$s || $file.$s,)*
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsArgs {
    /// Lattice size as ROWSxCOLS, e.g. 7x7
    #[arg(long)]
    pub grid: Option<String>,
    /// Contiguity scheme for --grid: queen or rook
    #[arg(long)]
    pub scheme: Option<String>,
    /// Row-standardise the matrix
    #[arg(long)]
    pub standardize: bool,
    /// Read the matrix from a file (coordinate list or dense CSV)
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Exit with status 2 when the validation report fails
    #[arg(long)]
    pub validate: bool,
    /// Bound on the absolute row sums
    #[arg(long)]
    pub bound: Option<f64>,
    /// Output format: coordinate or dense
    #[arg(long)]
    pub format: Option<String>,
    /// Output file name inside the output directory
    #[arg(long)]
    pub output: Option<String>,
}

impl WeightsArgs {
    pub fn merge(self, file: Self) -> Self {
        let flags = self;
        merged!(flags, file; opts: [grid, scheme, load, bound, format, output]; switches: [standardize, validate])
    }

    pub fn resolved(mut self) -> Self {
        self.bound.get_or_insert(1.0);
        self.format.get_or_insert_with(|| "coordinate".into());
        if self.grid.is_some() {
            self.scheme.get_or_insert_with(|| "queen".into());
        }
        let ext = if self.format.as_deref() == Some("dense") { "csv" } else { "txt" };
        self.output.get_or_insert_with(|| format!("weights.{ext}"));
        self
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Emit the two bivariate 30x30 illustration fields (cross coefficient 0.35 and 0)
    #[arg(long)]
    pub fig1: bool,
    /// Take A, Psi and Pi from a built-in design: A, B or C
    #[arg(long)]
    pub model: Option<String>,
    /// Intercepts A, one per variable, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Psi row by row, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<String>,
    /// Pi row by row, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub pi: Option<String>,
    /// Lattice as ROWSxCOLS for row-standardised contiguity weights
    #[arg(long)]
    pub grid: Option<String>,
    /// Contiguity scheme for --grid: queen or rook
    #[arg(long)]
    pub scheme: Option<String>,
    /// Weight matrix file, used as given (overrides --grid)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Number of periods T; T + 1 slices are written
    #[arg(long = "t")]
    pub t_len: Option<usize>,
    /// Error distribution: normal or t<df>
    #[arg(long)]
    pub dist: Option<String>,
    /// Discarded warm-up periods
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SimulateArgs {
    pub fn merge(self, file: Self) -> Self {
        let flags = self;
        merged!(flags, file;
            opts: [model, a, psi, pi, grid, scheme, weights, t_len, dist, burn_in, seed];
            switches: [fig1])
    }

    pub fn resolved(mut self) -> Self {
        self.seed.get_or_insert(0);
        if self.fig1 {
            return self;
        }
        if self.weights.is_none() {
            self.grid.get_or_insert_with(|| "5x5".into());
            self.scheme.get_or_insert_with(|| "queen".into());
        }
        self.t_len.get_or_insert(30);
        self.dist.get_or_insert_with(|| "normal".into());
        self.burn_in.get_or_insert(50);
        self
    }
}

pub const GAUSSIAN_SIGMA2U: f64 = std::f64::consts::PI * std::f64::consts::PI / 2.0;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Long-format panel file (location, variable, time, value)
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Weight matrix file
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Treat the panel values as prices and convert them to log returns
    #[arg(long)]
    pub prices: bool,
    #[arg(long)]
    pub location_col: Option<String>,
    #[arg(long)]
    pub variable_col: Option<String>,
    #[arg(long)]
    pub time_col: Option<String>,
    #[arg(long)]
    pub value_col: Option<String>,
    /// Single-character field delimiter
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Standard deviation of the draws replacing zero returns (with --prices)
    #[arg(long)]
    pub jitter_sd: Option<f64>,
    #[arg(long)]
    pub jitter_seed: Option<u64>,
    /// Innovation variance of the log-squared model
    #[arg(long)]
    pub sigma2u: Option<f64>,
    /// Error distribution used to recover A from the fitted intercept
    #[arg(long)]
    pub dist: Option<String>,
    /// Intercept layout: constant or free
    #[arg(long)]
    pub a_mode: Option<String>,
    /// Mark significance at 1.96 and 2.576 instead of 1.9 and 2
    #[arg(long)]
    pub conventional: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Additional random starts around the default start
    #[arg(long)]
    pub multistart: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FitArgs {
    pub fn merge(self, file: Self) -> Self {
        let flags = self;
        merged!(flags, file;
            opts: [panel, weights, location_col, variable_col, time_col, value_col, delimiter, jitter_sd,
                   jitter_seed, sigma2u, dist, a_mode, max_iter, multistart, seed];
            switches: [prices, conventional])
    }

    pub fn resolved(mut self) -> Self {
        self.location_col.get_or_insert_with(|| "location".into());
        self.variable_col.get_or_insert_with(|| "variable".into());
        self.time_col.get_or_insert_with(|| "time".into());
        self.value_col.get_or_insert_with(|| "value".into());
        self.delimiter.get_or_insert(',');
        if self.prices {
            self.jitter_sd.get_or_insert(1e-4);
            self.jitter_seed.get_or_insert(0);
        }
        self.sigma2u.get_or_insert(GAUSSIAN_SIGMA2U);
        self.dist.get_or_insert_with(|| "normal".into());
        self.a_mode.get_or_insert_with(|| "constant".into());
        self.max_iter.get_or_insert(500);
        self.multistart.get_or_insert(0);
        self.seed.get_or_insert(0);
        self
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McArgs {
    /// Built-in design: A, B or C
    #[arg(long)]
    pub model: Option<String>,
    /// Error distributions, comma separated (normal, t3)
    #[arg(long)]
    pub dist: Option<String>,
    /// Replications per cell
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker threads
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size ladder as ROWSxCOLSxT entries, comma separated
    #[arg(long)]
    pub sizes: Option<String>,
    /// Run models A, B and C over both distributions and the full size ladder
    #[arg(long)]
    pub paper_ladder: bool,
    /// Design file (TOML)
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Also write per-replication estimates
    #[arg(long)]
    pub raw: bool,
}

impl McArgs {
    pub fn merge(self, file: Self) -> Self {
        let flags = self;
        merged!(flags, file; opts: [model, dist, reps, workers, seed, sizes, design]; switches: [paper_ladder, raw])
    }

    pub fn resolved(mut self) -> Self {
        if self.design.is_none() && !self.paper_ladder {
            self.model.get_or_insert_with(|| "A".into());
        }
        self.workers.get_or_insert_with(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        self
    }
}

/// Optional config file: an `out` key plus one table per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub out: Option<PathBuf>,
    pub weights: WeightsArgs,
    pub simulate: SimulateArgs,
    pub fit: FitArgs,
    pub mc: McArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Parses `ROWSxCOLS`.
pub fn parse_grid(s: &str) -> anyhow::Result<(usize, usize)> {
    let Some((r, c)) = s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
    else {
        bail!("grid '{s}' is not of the form ROWSxCOLS");
    };
    Ok((r.parse().with_context(|| format!("bad grid rows in '{s}'"))?, c.parse().with_context(|| format!("bad grid columns in '{s}'"))?))
}

pub fn parse_list(s: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number '{t}' in {what}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let flags = FitArgs { sigma2u: Some(3.0), ..Default::default() };
        let file = FitArgs { sigma2u: Some(5.0), max_iter: Some(7), conventional: true, ..Default::default() };
        let m = flags.merge(file).resolved();
        assert_eq!(m.sigma2u, Some(3.0));
        assert_eq!(m.max_iter, Some(7));
        assert!(m.conventional);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("7x7").unwrap(), (7, 7));
        assert_eq!(parse_grid("10X19").unwrap(), (10, 19));
        assert!(parse_grid("7").is_err());
        assert!(parse_grid("ax2").is_err());
    }

    #[test]
    fn default_sigma2u_is_gaussian_variance() {
        assert!((GAUSSIAN_SIGMA2U - 4.934_802_200_544_679).abs() < 1e-14);
    }
}
