//! Per-iteration convergence records shared by all solvers.

use std::io::{self, Write};

use crate::adaptive::WeightStats;

/// One solver iteration: objective value, ADMM residuals and weight stats.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    /// 1-based iteration counter.
    pub iter: usize,
    pub energy: f64,
    /// `||grad(u) - z||_2` (all splitting constraints for the flow solver).
    pub primal_res: f64,
    /// `mu * ||z_next - z||_2`.
    pub dual_res: f64,
    pub lambda: WeightStats,
    /// A-priori weight floor; recorded only for smoothed adaptive runs.
    pub lambda_floor: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<String>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Writes the trace as CSV with a versioned header comment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# adaptv trace csv v1")?;
        writeln!(w, "iter,energy,primal_res,dual_res,lambda_mean,lambda_std")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter, r.energy, r.primal_res, r.dual_res, r.lambda.mean, r.lambda.std_dev
            )?;
        }
        Ok(())
    }
}
