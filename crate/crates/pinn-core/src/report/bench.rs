//! Inference timing over growing batches of fresh evaluation points
//!
//! Measures what a consumer of a trained model pays after training:
//! predictions plus PDE residuals at freshly drawn points, never the
//! training loop. Absolute seconds are machine facts; the quantity of
//! interest is the scaling, summarized by a least-squares line and its R².

use std::hint::black_box;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::csvio::{parse_f64, parse_usize, CsvDoc};
use super::ReportError;
use crate::network::MlpModel;
use crate::pde::{residual, ProblemSpec};

pub const DEFAULT_COUNTS: [usize; 10] = [
    1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub points: usize,
    pub seconds: f64,
}

/// Least-squares line seconds ≈ slope·points + intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
    pub fit: LinearFit,
}

fn linear_fit(rows: &[TimingRow]) -> LinearFit {
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r.points as f64).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.seconds).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for r in rows {
        let dx = r.points as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (r.seconds - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for r in rows {
        let fitted = slope * r.points as f64 + intercept;
        ss_res += (r.seconds - fitted) * (r.seconds - fitted);
        ss_tot += (r.seconds - mean_y) * (r.seconds - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Times prediction and residual evaluation over `counts.len()` batches of
/// fresh uniform points (one RNG stream across batches, so no batch reuses
/// another's points) and fits a line to (count, seconds).
pub fn benchmark_inference(
    model: &MlpModel,
    problem: &ProblemSpec,
    counts: &[usize],
    seed: u64,
) -> Result<TimingTable, ReportError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let points: Vec<(f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(problem.x_range.0..=problem.x_range.1),
                    rng.random_range(problem.t_range.0..=problem.t_range.1),
                )
            })
            .collect();
        let started = Instant::now();
        let mut acc = 0.0;
        for &(x, t) in &points {
            acc += model.forward(x, t);
            acc += residual(model, problem, x, t)?;
        }
        let seconds = started.elapsed().as_secs_f64();
        black_box(acc);
        rows.push(TimingRow {
            points: count,
            seconds,
        });
    }
    let fit = linear_fit(&rows);
    Ok(TimingTable { rows, fit })
}

impl TimingTable {
    /// True when every batch takes at least as long as the previous one,
    /// allowing the given relative jitter (0.1 = 10% backslide).
    pub fn monotone_within(&self, jitter: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].seconds >= w[0].seconds * (1.0 - jitter))
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new(&["points", "seconds"]);
        doc.add_meta("table", "inference_timing");
        doc.add_meta("fit_slope", self.fit.slope);
        doc.add_meta("fit_intercept", self.fit.intercept);
        doc.add_meta("fit_r_squared", self.fit.r_squared);
        for r in &self.rows {
            doc.rows
                .push(vec![r.points.to_string(), r.seconds.to_string()]);
        }
        doc.emit()
    }

    pub fn from_csv(text: &str) -> Result<TimingTable, ReportError> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&["points", "seconds"])?;
        let fit = LinearFit {
            slope: parse_f64(doc.meta_value("fit_slope")?, "timing fit slope")?,
            intercept: parse_f64(doc.meta_value("fit_intercept")?, "timing fit intercept")?,
            r_squared: parse_f64(doc.meta_value("fit_r_squared")?, "timing fit r_squared")?,
        };
        let mut rows = Vec::with_capacity(doc.rows.len());
        for fields in &doc.rows {
            rows.push(TimingRow {
                points: parse_usize(&fields[0], "timing points")?,
                seconds: parse_f64(&fields[1], "timing seconds")?,
            });
        }
        Ok(TimingTable { rows, fit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_glorot, ActivationKind};
    use crate::pde::make_problem1;

    #[test]
    fn exact_line_fits_with_unit_r_squared() {
        let rows: Vec<TimingRow> = (1..=5)
            .map(|i| TimingRow {
                points: i * 1000,
                seconds: 2e-4 * (i * 1000) as f64 + 0.01,
            })
            .collect();
        let fit = linear_fit(&rows);
        assert!((fit.slope - 2e-4).abs() < 1e-12);
        assert!((fit.intercept - 0.01).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_line_keeps_high_r_squared_monotone_detects_backslides() {
        let rows: Vec<TimingRow> = (1..=10)
            .map(|i| TimingRow {
                points: i * 1000,
                seconds: 1e-4 * (i * 1000) as f64 * if i % 2 == 0 { 1.02 } else { 0.98 },
            })
            .collect();
        let fit = linear_fit(&rows);
        assert!(fit.r_squared > 0.99);
        let table = TimingTable { rows, fit };
        assert!(table.monotone_within(0.1));
        let mut dipped = table.clone();
        dipped.rows[5].seconds = dipped.rows[4].seconds * 0.5;
        dipped.fit = linear_fit(&dipped.rows);
        assert!(!dipped.monotone_within(0.1));
    }

    #[test]
    fn measured_batches_scale_roughly_linearly() {
        let model = init_glorot(&[2, 20, 20, 1], ActivationKind::Gelu, true, 10, 0).unwrap();
        let problem = make_problem1();
        let counts = [2000, 4000, 6000, 8000];
        let table = benchmark_inference(&model, &problem, &counts, 9).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows.iter().all(|r| r.seconds > 0.0));
        assert!(
            table.fit.r_squared > 0.9,
            "fit {:?} rows {:?}",
            table.fit,
            table.rows
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let model = init_glorot(&[2, 8, 1], ActivationKind::Tanh, false, 10, 1).unwrap();
        let problem = make_problem1();
        let table = benchmark_inference(&model, &problem, &[500, 1000], 3).unwrap();
        let back = TimingTable::from_csv(&table.to_csv()).unwrap();
        assert_eq!(table, back);
    }
}
