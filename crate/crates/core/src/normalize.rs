//! Robust piecewise-linear percentile scaling.
//!
//! Values between the 2.5th and 97.5th training percentiles map affinely onto
//! `[0.025, 0.975]`; the tails between the observed extremes and the
//! percentiles map onto `[0, 0.025)` and `(0.975, 1]`; anything outside the
//! training range clamps. Directional columns get the same map followed by
//! `y ↦ 2y − 1`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LOWER_PERCENTILE: f64 = 0.025;
pub const UPPER_PERCENTILE: f64 = 0.975;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScale {
    pub min: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub max: f64,
    pub directional: bool,
}

impl ColumnScale {
    pub fn is_degenerate(&self) -> bool {
        self.p_lo == self.p_hi
    }

    pub fn apply(&self, x: f64) -> f64 {
        let y = self.unit(x);
        if self.directional {
            2.0 * y - 1.0
        } else {
            y
        }
    }

    fn unit(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return 0.5;
        }
        let (lo_t, hi_t) = (LOWER_PERCENTILE, UPPER_PERCENTILE);
        if x <= self.min {
            // x == min with min == p_lo belongs to the middle segment
            if x == self.min && self.min == self.p_lo {
                return lo_t;
            }
            return 0.0;
        }
        if x >= self.max {
            if x == self.max && self.max == self.p_hi {
                return hi_t;
            }
            return 1.0;
        }
        if x < self.p_lo {
            lo_t * (x - self.min) / (self.p_lo - self.min)
        } else if x <= self.p_hi {
            lo_t + (hi_t - lo_t) * (x - self.p_lo) / (self.p_hi - self.p_lo)
        } else {
            hi_t + (1.0 - hi_t) * (x - self.p_hi) / (self.max - self.p_hi)
        }
    }
}

/// Per-column breakpoints fit on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustScaler {
    pub columns: Vec<ColumnScale>,
    pub names: Vec<String>,
}

/// Percentile by linear interpolation between the closest order statistics
/// of an already sorted slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    let v = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    v.clamp(sorted[lo], sorted[hi])
}

impl RobustScaler {
    pub fn fit(train: &Matrix, directional: &[bool]) -> Result<Self> {
        let names = (0..train.cols()).map(|c| format!("col{c}")).collect();
        Self::fit_named(train, directional, names)
    }

    pub fn fit_named(train: &Matrix, directional: &[bool], names: Vec<String>) -> Result<Self> {
        if train.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "scaler needs at least 2 rows, got {}",
                train.rows()
            )));
        }
        if directional.len() != train.cols() {
            return Err(Error::DimensionMismatch {
                expected: train.cols(),
                got: directional.len(),
            });
        }
        if names.len() != train.cols() {
            return Err(Error::DimensionMismatch {
                expected: train.cols(),
                got: names.len(),
            });
        }
        if !train.all_finite() {
            return Err(Error::NonFinite("scaler training matrix"));
        }
        let columns = (0..train.cols())
            .map(|c| {
                let mut col = train.column(c);
                col.sort_by(f64::total_cmp);
                ColumnScale {
                    min: col[0],
                    p_lo: percentile_sorted(&col, LOWER_PERCENTILE),
                    p_hi: percentile_sorted(&col, UPPER_PERCENTILE),
                    max: col[col.len() - 1],
                    directional: directional[c],
                }
            })
            .collect();
        Ok(Self { columns, names })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.cols(),
            });
        }
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (v, s) in out.row_mut(r).iter_mut().zip(&self.columns) {
                *v = s.apply(*v);
            }
        }
        Ok(out)
    }

    /// TSV sidecar: `column, min, p_lo, p_hi, max, directional`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "column\tmin\tp_lo\tp_hi\tmax\tdirectional")?;
        for (name, c) in self.names.iter().zip(&self.columns) {
            writeln!(
                w,
                "{name}\t{}\t{}\t{}\t{}\t{}",
                c.min, c.p_lo, c.p_hi, c.max, c.directional as u8
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut columns = Vec::new();
        let mut names = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(Error::Artifact(format!("scaler line {}: {} fields", n + 1, f.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Artifact(format!("scaler line {}: bad number `{s}`", n + 1)))
            };
            names.push(f[0].to_string());
            columns.push(ColumnScale {
                min: num(f[1])?,
                p_lo: num(f[2])?,
                p_hi: num(f[3])?,
                max: num(f[4])?,
                directional: f[5] == "1",
            });
        }
        Ok(Self { columns, names })
    }
}
