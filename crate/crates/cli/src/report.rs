//! Deterministic CSV emission and the analytic-vs-simulation comparison.
//!
//! Every file starts with `#`-prefixed metadata lines (tool version, config
//! name, simulation seed where applicable), then a header row. Analyze-mode
//! output is byte-for-byte reproducible for a given config.

use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fctl_core::sim::SimStats;
use fctl_core::solver::{QueueSolution, TailTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Reporter {
    out_dir: PathBuf,
    config_name: String,
}

impl Reporter {
    pub fn new(out_dir: &Path, config_name: &str) -> Result<Reporter> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Reporter {
            out_dir: out_dir.to_path_buf(),
            config_name: config_name.to_string(),
        })
    }

    fn header(&self, extra: &str) -> String {
        let mut s = String::new();
        writeln!(s, "# fctl {VERSION}").unwrap();
        writeln!(s, "# config {}", self.config_name).unwrap();
        if !extra.is_empty() {
            writeln!(s, "{extra}").unwrap();
        }
        s
    }

    fn write(&self, file: &str, body: String) -> Result<PathBuf> {
        let path = self.out_dir.join(file);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// `means_<queue>.csv`: per-slot mean queue length, slot 0 = cycle start.
    pub fn means_analytic(&self, queue: &str, sol: &QueueSolution) -> Result<PathBuf> {
        let mut body = self.header("");
        body.push_str("slot,mean\n");
        for (k, m) in sol.means().iter().enumerate() {
            writeln!(body, "{k},{m:.9}").unwrap();
        }
        self.write(&format!("means_{queue}.csv"), body)
    }

    pub fn means_simulated(&self, queue: &str, stats: &SimStats, seed: u64) -> Result<PathBuf> {
        let mut body = self.header(&format!(
            "# seed {seed}\n# cycles {} replications {}",
            stats.cycles_measured / stats.replications.max(1) as u64,
            stats.replications
        ));
        body.push_str("slot,mean,stderr\n");
        for k in 0..stats.mean_x.len() {
            writeln!(body, "{k},{:.9},{:.9}", stats.mean_x[k], stats.stderr_x[k]).unwrap();
        }
        self.write(&format!("means_{queue}.csv"), body)
    }

    /// `tails_<queue>.csv`: `P(X >= m)` rows for cycle start, green end, and
    /// an arbitrary slot.
    pub fn tails(&self, queue: &str, tails: &TailTable, simulated: bool) -> Result<PathBuf> {
        let mut body = self.header("");
        let levels = tails.x0.len();
        body.push_str("queue_at");
        for m in 1..=levels {
            write!(body, ",p_ge_{m}").unwrap();
        }
        body.push('\n');
        for (label, row) in [
            ("cycle_start", &tails.x0),
            ("green_end", &tails.x_green_end),
            ("arbitrary_slot", &tails.x_average),
        ] {
            write!(body, "{label}").unwrap();
            for v in row {
                write!(body, ",{v:.9}").unwrap();
            }
            body.push('\n');
        }
        let prefix = if simulated { "sim_tails" } else { "tails" };
        self.write(&format!("{prefix}_{queue}.csv"), body)
    }

    pub fn tails_simulated(&self, queue: &str, stats: &SimStats) -> Result<PathBuf> {
        let table = TailTable {
            x0: stats.tail_x0.clone(),
            x_green_end: stats.tail_xg.clone(),
            x_average: stats.tail_xbar.clone(),
        };
        self.tails(queue, &table, true)
    }

    /// `greendist_<queue>.csv`: distribution of the effective green time.
    pub fn green_dist(&self, queue: &str, dist: &[f64]) -> Result<PathBuf> {
        let mut body = self.header("");
        body.push_str("effective_green,probability\n");
        for (j, p) in dist.iter().enumerate() {
            writeln!(body, "{j},{p:.9}").unwrap();
        }
        self.write(&format!("greendist_{queue}.csv"), body)
    }

    /// `roots_<queue>.csv`: interior roots of the characteristic equation.
    pub fn roots(&self, queue: &str, roots: &fctl_core::RootSet) -> Result<PathBuf> {
        let mut body = self.header("");
        body.push_str("re,im,modulus,residual\n");
        for (z, r) in roots.roots.iter().zip(&roots.residuals) {
            writeln!(body, "{:.15},{:.15},{:.15},{:.3e}", z.re, z.im, z.norm(), r).unwrap();
        }
        self.write(&format!("roots_{queue}.csv"), body)
    }

    /// `pmf_<queue>.csv`: queue-length pmf at cycle start, green end, and an
    /// arbitrary slot, out to where all three laws have mass `1 - 1e-9`.
    pub fn pmf(&self, queue: &str, sol: &QueueSolution) -> Result<PathBuf> {
        let g = sol.plan().green;
        let mut body = self.header("");
        body.push_str("k,p_cycle_start,p_green_end,p_arbitrary_slot\n");
        let mut cums = [0.0f64; 3];
        for k in 0..400 {
            let p0 = fctl_core::invert_pgf(sol.x0_pgf(), k);
            let pg = fctl_core::invert_pgf(sol.xk_pgf(g)?, k);
            let pb = fctl_core::invert_pgf(sol.xbar_pgf(), k);
            writeln!(body, "{k},{p0:.9},{pg:.9},{pb:.9}").unwrap();
            cums[0] += p0;
            cums[1] += pg;
            cums[2] += pb;
            if cums.iter().all(|&c| c >= 1.0 - 1e-9) {
                break;
            }
        }
        self.write(&format!("pmf_{queue}.csv"), body)
    }

    /// `network_summary.csv`: one row per queue.
    pub fn network_summary(&self, rows: &[SummaryRow]) -> Result<PathBuf> {
        let mut body = self.header("");
        body.push_str("index,queue,rho,mean_queue_length,stderr\n");
        for (i, row) in rows.iter().enumerate() {
            writeln!(
                body,
                "{i},{},{:.9},{:.9},{}",
                row.name,
                row.rho,
                row.mean_xbar,
                row.stderr
                    .map(|e| format!("{e:.9}"))
                    .unwrap_or_default()
            )
            .unwrap();
        }
        self.write("network_summary.csv", body)
    }

    /// `compare_<queue>.csv` plus the worst sigma multiple observed.
    pub fn compare(
        &self,
        queue: &str,
        sol: &QueueSolution,
        stats: &SimStats,
    ) -> Result<(PathBuf, f64, f64)> {
        let mut body = self.header("");
        body.push_str("slot,analytic,simulated,stderr,abs_dev,sigma_multiple\n");
        let mut worst_sigma = 0.0f64;
        let mut worst_dev = 0.0f64;
        for k in 0..stats.mean_x.len() {
            let analytic = sol.means()[k];
            let simulated = stats.mean_x[k];
            let stderr = stats.stderr_x[k];
            let dev = (analytic - simulated).abs();
            let sigma = if stderr > 0.0 {
                dev / stderr
            } else if dev <= 1e-9 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_sigma = worst_sigma.max(sigma);
            worst_dev = worst_dev.max(dev);
            writeln!(
                body,
                "{k},{analytic:.9},{simulated:.9},{stderr:.9},{dev:.9},{sigma:.3}"
            )
            .unwrap();
        }
        let path = self.write(&format!("compare_{queue}.csv"), body)?;
        Ok((path, worst_dev, worst_sigma))
    }
}

pub struct SummaryRow {
    pub name: String,
    pub rho: f64,
    pub mean_xbar: f64,
    pub stderr: Option<f64>,
}
