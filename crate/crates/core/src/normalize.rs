//! Per-feature min-max normalization, `(F − F_min) / (F_max − F_min)`.
//!
//! By default training and test matrices are each normalized with their own
//! statistics ([`NormalizationMode::Separate`]); [`NormalizationMode::TrainStats`]
//! applies the training statistics to both.

use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    #[default]
    Separate,
    TrainStats,
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(Self::Separate),
            "train-stats" | "train" => Ok(Self::TrainStats),
            other => Err(Error::Config(format!("unknown normalization mode {other:?}"))),
        }
    }
}

impl NormalizationStats {
    pub fn fit(matrix: &Array2<f64>) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::Size("cannot fit normalization on an empty matrix".into()));
        }
        let fold = |init: f64, pick: fn(f64, f64) -> f64| -> Vec<f64> {
            matrix
                .axis_iter(Axis(1))
                .map(|col| col.iter().copied().fold(init, pick))
                .collect()
        };
        Ok(Self {
            min: fold(f64::INFINITY, f64::min),
            max: fold(f64::NEG_INFINITY, f64::max),
        })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Scales each column; degenerate columns (`F_max == F_min`) map to 0.
    /// Values outside the fitted range are not clamped.
    pub fn apply(&self, matrix: &Array2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.width() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, stats have {}",
                matrix.ncols(),
                self.width()
            )));
        }
        let mut out = matrix.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, span) = (self.min[j], self.max[j] - self.min[j]);
            if span > 0.0 {
                col.mapv_inplace(|v| (v - lo) / span);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }

    /// CSV with columns `feature,min,max`.
    pub fn write_csv<W: Write>(&self, out: W, names: &[&str]) -> Result<()> {
        if names.len() != self.width() {
            return Err(Error::Shape(format!("{} names for {} features", names.len(), self.width())));
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["feature", "min", "max"])?;
        for ((name, lo), hi) in names.iter().zip(&self.min).zip(&self.max) {
            writer.write_record([name.to_string(), lo.to_string(), hi.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<(Self, Vec<String>)> {
        let mut reader = csv::Reader::from_reader(input);
        let (mut names, mut min, mut max) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Format("normalization CSV rows need 3 fields".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("invalid number {s:?}")));
            names.push(record[0].to_string());
            min.push(num(&record[1])?);
            max.push(num(&record[2])?);
        }
        Ok((Self { min, max }, names))
    }
}

/// Normalizes a train/test pair. Returns the normalized matrices and the
/// training statistics.
pub fn normalize_pair(
    train: &Array2<f64>,
    test: &Array2<f64>,
    mode: NormalizationMode,
) -> Result<(Array2<f64>, Array2<f64>, NormalizationStats)> {
    let stats = NormalizationStats::fit(train)?;
    let train_n = stats.apply(train)?;
    let test_n = match mode {
        NormalizationMode::Separate => NormalizationStats::fit(test)?.apply(test)?,
        NormalizationMode::TrainStats => stats.apply(test)?,
    };
    Ok((train_n, test_n, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn single_row_stats() {
        let m = array![[1.0, -2.0, 3.5]];
        let s = NormalizationStats::fit(&m).unwrap();
        assert_eq!(s.min, vec![1.0, -2.0, 3.5]);
        assert_eq!(s.max, s.min);
        assert_eq!(s.apply(&m).unwrap(), array![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn midpoint_and_extrema() {
        let m = array![[0.0], [2.0], [4.0]];
        let s = NormalizationStats::fit(&m).unwrap();
        assert_eq!((s.min[0], s.max[0]), (0.0, 4.0));
        assert_eq!(s.apply(&m).unwrap(), array![[0.0], [0.5], [1.0]]);
        // foreign data is not clamped
        assert_eq!(s.apply(&array![[8.0]]).unwrap(), array![[2.0]]);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(NormalizationStats::fit(&Array2::zeros((0, 3))), Err(Error::Size(_))));
        let s = NormalizationStats::fit(&array![[0.0, 1.0]]).unwrap();
        assert!(matches!(s.apply(&array![[0.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn modes_differ_on_shifted_test_data() {
        let train = array![[0.0], [10.0]];
        let test = array![[5.0], [15.0]];
        let (_, sep, _) = normalize_pair(&train, &test, NormalizationMode::Separate).unwrap();
        let (_, ts, _) = normalize_pair(&train, &test, NormalizationMode::TrainStats).unwrap();
        assert_eq!(sep, array![[0.0], [1.0]]);
        assert_eq!(ts, array![[0.5], [1.5]]);
    }

    #[test]
    fn csv_round_trip() {
        let s = NormalizationStats { min: vec![0.1, -3.0], max: vec![0.7, 1e-17] };
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &["a", "b"]).unwrap();
        let (back, names) = NormalizationStats::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert_eq!(names, vec!["a", "b"]);
    }

    fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
        (1usize..30, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-1e3f64..1e3, r * c)
                .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn fitted_data_lands_in_unit_interval(m in matrix_strategy()) {
            let s = NormalizationStats::fit(&m).unwrap();
            let n = s.apply(&m).unwrap();
            prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
            // brute-force extrema
            for j in 0..m.ncols() {
                let col: Vec<f64> = m.column(j).to_vec();
                prop_assert_eq!(s.min[j], col.iter().cloned().fold(f64::MAX, f64::min));
                prop_assert_eq!(s.max[j], col.iter().cloned().fold(f64::MIN, f64::max));
            }
            // refit on normalized data gives (0, 1) on non-degenerate columns
            let again = NormalizationStats::fit(&n).unwrap();
            for j in 0..m.ncols() {
                if s.max[j] > s.min[j] {
                    prop_assert_eq!((again.min[j], again.max[j]), (0.0, 1.0));
                }
            }
        }

        #[test]
        fn column_order_is_preserved(m in matrix_strategy()) {
            let n = NormalizationStats::fit(&m).unwrap().apply(&m).unwrap();
            for j in 0..m.ncols() {
                for a in 0..m.nrows() {
                    for b in 0..m.nrows() {
                        if m[[a, j]] < m[[b, j]] {
                            prop_assert!(n[[a, j]] <= n[[b, j]]);
                        }
                    }
                }
            }
        }
    }
}
