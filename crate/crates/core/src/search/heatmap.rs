use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsp::{Tour, TspInstance};

/// Edge scores from an external model: `score(i, j)` is the model's belief
/// that edge `{i, j}` belongs to an optimal tour. Nonnegative, symmetrized
/// on construction, diagonal ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    n: usize,
    scores: Vec<f64>,
}

/// JSON form: `{"n": int, "scores": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapFile {
    pub n: usize,
    pub scores: Vec<Vec<f64>>,
}

impl Heatmap {
    /// Validates a row-major `n × n` matrix and replaces it by
    /// `(S + Sᵀ) / 2`.
    pub fn new(n: usize, mut scores: Vec<f64>) -> Result<Self> {
        if scores.len() != n * n {
            return Err(Error::InvalidHeatmap(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                scores.len()
            )));
        }
        for (idx, &s) in scores.iter().enumerate() {
            let (i, j) = (idx / n, idx % n);
            if i != j && !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidHeatmap(format!(
                    "score ({i}, {j}) = {s} is not a nonnegative number"
                )));
            }
        }
        for i in 0..n {
            scores[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let s = (scores[i * n + j] + scores[j * n + i]) / 2.0;
                scores[i * n + j] = s;
                scores[j * n + i] = s;
            }
        }
        Ok(Self { n, scores })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidHeatmap(format!(
                "row {i} has {} columns, expected {n}",
                r.len()
            )));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    /// `n` rows of `n` comma-separated numbers, no header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidHeatmap(format!("CSV row {i}: {e}")))?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::InvalidHeatmap(format!("CSV row {i}: {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: HeatmapFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidHeatmap(format!("malformed heatmap JSON: {e}")))?;
        if file.n != file.scores.len() {
            return Err(Error::InvalidHeatmap(format!(
                "declared n = {} but {} rows given",
                file.n,
                file.scores.len()
            )));
        }
        Self::from_rows(file.scores)
    }

    /// Loads a `.csv` or `.json` heatmap file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            Self::from_csv_str(&text)
        } else {
            Self::from_json_str(&text)
        }
    }

    pub fn to_file(&self) -> HeatmapFile {
        HeatmapFile {
            n: self.n,
            scores: self.scores.chunks(self.n).map(<[f64]>::to_vec).collect(),
        }
    }

    /// `1 / dist(i, j)`, the model-free baseline.
    pub fn inverse_distance(instance: &TspInstance) -> Self {
        let n = instance.n();
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    scores[i * n + j] = 1.0 / instance.dist(i, j);
                }
            }
        }
        // Coincident points would give infinities; cap them.
        for s in &mut scores {
            if !s.is_finite() {
                *s = f64::MAX;
            }
        }
        Self { n, scores }
    }

    /// 1 on the edges of `tour`, 0 elsewhere.
    pub fn tour_indicator(tour: &Tour) -> Self {
        let n = tour.order().len();
        let mut scores = vec![0.0; n * n];
        for (a, b) in tour.edges() {
            scores[a * n + b] = 1.0;
            scores[b * n + a] = 1.0;
        }
        Self { n, scores }
    }

    pub fn uniform(n: usize) -> Self {
        let mut scores = vec![1.0; n * n];
        for i in 0..n {
            scores[i * n + i] = 0.0;
        }
        Self { n, scores }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn score(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn check_size(&self, instance: &TspInstance) -> Result<()> {
        if self.n != instance.n() {
            return Err(Error::InvalidHeatmap(format!(
                "heatmap is {0}×{0}, instance has {1} vertices",
                self.n,
                instance.n()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrizes_and_validates() {
        let h = Heatmap::from_rows(vec![
            vec![5.0, 1.0, 0.0],
            vec![3.0, 9.0, 2.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert_eq!(h.score(0, 1), 2.0);
        assert_eq!(h.score(1, 0), 2.0);
        assert_eq!(h.score(1, 2), 1.0);
        assert_eq!(h.score(0, 0), 0.0);

        assert!(Heatmap::from_rows(vec![vec![0.0, -1.0], vec![0.0, 0.0]]).is_err());
        assert!(Heatmap::from_rows(vec![vec![0.0, 1.0], vec![0.0]]).is_err());
        assert!(Heatmap::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_and_json_agree() {
        let csv = "0, 0.5, 0.25\n0.5,0,1\n0.25,1,0\n";
        let json = r#"{"n": 3, "scores": [[0, 0.5, 0.25], [0.5, 0, 1], [0.25, 1, 0]]}"#;
        let a = Heatmap::from_csv_str(csv).unwrap();
        let b = Heatmap::from_json_str(json).unwrap();
        assert_eq!(a, b);
        assert!(Heatmap::from_csv_str("0,x\n1,0\n").is_err());
        assert!(Heatmap::from_json_str(r#"{"n": 2, "scores": [[0, 1]]}"#).is_err());
    }
}
