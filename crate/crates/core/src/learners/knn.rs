//! Brute-force k-nearest-neighbour regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::linear::check_xy;
use crate::matrix::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub k: usize,
    pub weighting: Weighting,
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize, weighting: Weighting) -> Result<KnnModel> {
    check_xy(x, y)?;
    if k == 0 || k > x.rows() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            x.rows()
        )));
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k,
        weighting,
    })
}

impl KnnModel {
    /// Indices of the k nearest rows, ties broken by lower training index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, q), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    pub fn predict_row(&self, q: &[f64]) -> f64 {
        let nb = self.neighbors(q);
        match self.weighting {
            Weighting::Uniform => nb.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / nb.len() as f64,
            Weighting::InverseDistance => {
                let exact: Vec<f64> = nb
                    .iter()
                    .filter(|(d, _)| *d == 0.0)
                    .map(|&(_, i)| self.y[i])
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (mut num, mut den) = (0.0, 0.0);
                for &(d2, i) in &nb {
                    let w = 1.0 / d2.sqrt();
                    num += w * self.y[i];
                    den += w;
                }
                num / den
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn predict_knn(model: &KnnModel, x: &Matrix) -> Vec<f64> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]]).unwrap();
        (x, vec![1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn k1_nearest_target() {
        let (x, y) = toy();
        let m = fit_knn(&x, &y, 1, Weighting::Uniform).unwrap();
        assert_eq!(m.predict_row(&[0.9, 0.2]), 2.0);
        assert_eq!(m.predict(&x), y);
    }

    #[test]
    fn exact_match_inverse_distance() {
        let (x, y) = toy();
        let m = fit_knn(&x, &y, 3, Weighting::InverseDistance).unwrap();
        assert_eq!(m.predict_row(&[0.0, 2.0]), 3.0);
    }

    #[test]
    fn inverse_distance_hand_oracle() {
        let (x, y) = toy();
        let m = fit_knn(&x, &y, 2, Weighting::InverseDistance).unwrap();
        // query (0.5, 0): distances 0.5 and 0.5 to rows 0 and 1
        assert!((m.predict_row(&[0.5, 0.0]) - 1.5).abs() < 1e-12);
        // query (2, 0): rows 1 (d=1) and 0 (d=2): (2*1 + 1*0.5) / 1.5
        assert!((m.predict_row(&[2.0, 0.0]) - 2.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn k_n_uniform_is_mean() {
        let (x, y) = toy();
        let m = fit_knn(&x, &y, 4, Weighting::Uniform).unwrap();
        assert_eq!(m.predict_row(&[100.0, -4.0]), 2.5);
    }

    #[test]
    fn tie_prefers_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let m = fit_knn(&x, &[10.0, 20.0], 1, Weighting::Uniform).unwrap();
        assert_eq!(m.predict_row(&[0.0]), 10.0);
    }

    #[test]
    fn k_too_large() {
        let (x, y) = toy();
        assert!(fit_knn(&x, &y, 5, Weighting::Uniform).is_err());
        assert!(fit_knn(&x, &y, 0, Weighting::Uniform).is_err());
    }
}
