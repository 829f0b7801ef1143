//! Linear regressors: ordinary least squares, ridge, LASSO and Huber.
//!
//! The bias is never penalized. OLS and ridge solve the normal equations,
//! LASSO runs cyclic coordinate descent on centered data, Huber uses
//! iteratively reweighted least squares.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
const HUBER_MAX_ITER: usize = 100;
const HUBER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    None,
    /// LASSO: `(1/2n) ||y - Xw - b||^2 + lambda ||w||_1`.
    L1 { lambda: f64 },
    /// Ridge: `||y - Xw - b||^2 + lambda ||w||^2`.
    L2 { lambda: f64 },
    /// `(1/n) sum huber_eps(r_i) + lambda ||w||^2`.
    Huber { epsilon: f64, lambda: f64 },
}

impl Penalty {
    pub fn huber_default() -> Self {
        Penalty::Huber {
            epsilon: 1.35,
            lambda: 1e-4,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = match *self {
            Penalty::None => false,
            Penalty::L1 { lambda } | Penalty::L2 { lambda } => !(lambda >= 0.0),
            Penalty::Huber { epsilon, lambda } => !(lambda >= 0.0) || !(epsilon > 0.0),
        };
        if bad {
            return Err(Error::invalid(format!("invalid penalty {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn fit_linear(x: &Matrix, y: &[f64], penalty: Penalty) -> Result<LinearModel> {
    check_xy(x, y)?;
    penalty.validate()?;
    let (weights, bias) = match penalty {
        Penalty::None => solve_weighted(x, y, None, 0.0)?,
        Penalty::L2 { lambda } => solve_weighted(x, y, None, lambda)?,
        Penalty::L1 { lambda } => lasso(x, y, lambda, LASSO_MAX_SWEEPS, LASSO_TOL, None),
        Penalty::Huber { epsilon, lambda } => huber(x, y, epsilon, lambda)?,
    };
    Ok(LinearModel {
        weights,
        bias,
        penalty,
    })
}

pub fn predict_linear(model: &LinearModel, x: &Matrix) -> Vec<f64> {
    model.predict(x)
}

pub(crate) fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::empty("no training rows"));
    }
    if x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    x.ensure_finite("features")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets contain non-finite values"));
    }
    Ok(())
}

/// Solves `min sum w_i (y_i - x_i.beta - b)^2 + lambda ||beta||^2` with an
/// unpenalized bias through the augmented normal equations.
fn solve_weighted(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    let d = x.cols();
    let p = d + 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut aug = vec![0.0; p];
    for (i, row) in x.iter_rows().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        aug[..d].copy_from_slice(row);
        aug[d] = 1.0;
        for r in 0..p {
            let wr = w * aug[r];
            rhs[r] += wr * y[i];
            for c in r..p {
                a[(r, c)] += wr * aug[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }
    for j in 0..d {
        a[(j, j)] += lambda;
    }
    let chol = Cholesky::new(a).ok_or_else(singular)?;
    let diag: Vec<f64> = (0..p).map(|i| chol.l_dirty()[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || (min / max).powi(2) < 1e-13 {
        return Err(singular());
    }
    let sol = chol.solve(&rhs);
    Ok((sol.iter().take(d).cloned().collect(), sol[d]))
}

fn singular() -> Error {
    Error::Singular(
        "normal equations are singular; use a ridge penalty with lambda > 0".into(),
    )
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= x.rows() as f64);
    m
}

/// LASSO objective `(1/2n) ||y - Xw - b||^2 + lambda ||w||_1`.
pub fn lasso_objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let rss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, t)| (t - dot(w, r) - b).powi(2))
        .sum();
    rss / (2.0 * n) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent; `trace` receives the objective after each sweep.
pub(crate) fn lasso(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    max_sweeps: usize,
    tol: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vec<f64>, f64) {
    let n = x.rows();
    let d = x.cols();
    let nf = n as f64;
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / nf;
    // column-major centered copy
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| x.iter_rows().map(|r| r[j] - xm[j]).collect())
        .collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut w = vec![0.0; d];
    for _ in 0..max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if sq[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + sq[j] * w[j];
            let new = soft_threshold(rho, lambda) / sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= delta * a;
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            let b = ym - dot(&w, &xm);
            t.push(lasso_objective(x, y, &w, b, lambda));
        }
        if max_delta < tol {
            break;
        }
    }
    let b = ym - dot(&w, &xm);
    (w, b)
}

fn huber(x: &Matrix, y: &[f64], epsilon: f64, lambda: f64) -> Result<(Vec<f64>, f64)> {
    let n = x.rows() as f64;
    // The weighted system is scaled by 1/n so lambda matches the mean loss.
    let ridge = 2.0 * lambda * n;
    let mut weights = vec![1.0; x.rows()];
    let (mut w, mut b) = solve_weighted(x, y, Some(&weights), ridge)?;
    for _ in 0..HUBER_MAX_ITER {
        for (i, row) in x.iter_rows().enumerate() {
            let r = (y[i] - dot(&w, row) - b).abs();
            weights[i] = if r <= epsilon { 1.0 } else { epsilon / r };
        }
        let (w2, b2) = solve_weighted(x, y, Some(&weights), ridge)?;
        let change = w2
            .iter()
            .zip(&w)
            .map(|(a, c)| (a - c).abs())
            .fold((b2 - b).abs(), f64::max);
        w = w2;
        b = b2;
        if change < HUBER_TOL {
            break;
        }
    }
    Ok((w, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_rows(&v.iter().map(|x| [*x]).collect::<Vec<_>>()).unwrap()
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 - 1.0) * v).sum::<f64>() + rng.random_range(-0.5..0.5))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn ols_interpolates_line() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 2.0, 4.0, 6.0];
        let m = fit_linear(&x, &y, Penalty::None).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-8);
        assert!(m.bias.abs() < 1e-8);
    }

    #[test]
    fn ridge_matches_hand_normal_equations() {
        // x = [1, 2, 3], y = [1, 3, 2], lambda = 1 on the slope only:
        // [sum x^2 + 1, sum x; sum x, n] [w; b] = [sum xy; sum y]
        // [15, 6; 6, 3] [w; b] = [13; 6]  =>  det = 9, w = (13*3 - 6*6)/9, b = (15*6 - 6*13)/9
        let x = col(&[1.0, 2.0, 3.0]);
        let y = [1.0, 3.0, 2.0];
        let m = fit_linear(&x, &y, Penalty::L2 { lambda: 1.0 }).unwrap();
        assert!((m.weights[0] - 3.0 / 9.0).abs() < 1e-12);
        assert!((m.bias - 12.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn lasso_full_shrinkage() {
        let (x, y) = random_problem(1, 40, 3);
        let m = fit_linear(&x, &y, Penalty::L1 { lambda: 1e6 }).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.bias - mean).abs() < 1e-12);
    }

    #[test]
    fn lasso_zero_penalty_matches_ols() {
        let (x, y) = random_problem(2, 60, 3);
        let ols = fit_linear(&x, &y, Penalty::None).unwrap();
        let l = fit_linear(&x, &y, Penalty::L1 { lambda: 0.0 }).unwrap();
        for (a, b) in ols.weights.iter().zip(&l.weights) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_without_penalty() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(fit_linear(&x, &y, Penalty::None), Err(Error::Singular(_))));
        assert!(fit_linear(&x, &y, Penalty::L2 { lambda: 0.1 }).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        let x = col(&[1.0, f64::NAN]);
        assert!(fit_linear(&x, &[1.0, 2.0], Penalty::None).is_err());
        let x = col(&[1.0, 2.0]);
        assert!(fit_linear(&x, &[1.0, f64::INFINITY], Penalty::None).is_err());
        assert!(fit_linear(&x, &[1.0, 2.0], Penalty::L2 { lambda: -1.0 }).is_err());
    }

    #[test]
    fn huber_resists_outlier() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let mut y: Vec<f64> = xs.iter().map(|v| 2.0 * v + 1.0).collect();
        y[19] = 500.0;
        let x = col(&xs);
        let h = fit_linear(&x, &y, Penalty::huber_default()).unwrap();
        let o = fit_linear(&x, &y, Penalty::None).unwrap();
        assert!((h.weights[0] - 2.0).abs() < 0.05, "{:?}", h.weights);
        assert!((o.weights[0] - 2.0).abs() > 1.0);
    }

    #[test]
    fn ols_residuals_orthogonal() {
        for seed in 0..5 {
            let (x, y) = random_problem(seed, 50, 4);
            let m = fit_linear(&x, &y, Penalty::None).unwrap();
            let pred = m.predict(&x);
            for j in 0..x.cols() {
                let g: f64 = (0..x.rows()).map(|i| x.get(i, j) * (y[i] - pred[i])).sum();
                assert!(g.abs() <= 1e-6, "{g}");
            }
            let r: f64 = y.iter().zip(&pred).map(|(a, b)| a - b).sum();
            assert!(r.abs() <= 1e-6);
        }
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda() {
        let (x, y) = random_problem(9, 30, 3);
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 5.0, 20.0, 100.0] {
            let m = fit_linear(&x, &y, Penalty::L2 { lambda }).unwrap();
            let norm = dot(&m.weights, &m.weights).sqrt();
            assert!(norm <= prev + 1e-12);
            prev = norm;
        }
    }

    proptest! {
        #[test]
        fn lasso_objective_never_increases(seed in 0u64..1000, lambda in 0.0f64..1.0) {
            let (x, y) = random_problem(seed, 25, 4);
            let mut trace = Vec::new();
            let start = lasso_objective(&x, &y, &[0.0; 4], y.iter().sum::<f64>() / 25.0, lambda);
            lasso(&x, &y, lambda, 200, 1e-10, Some(&mut trace));
            let mut prev = start;
            for v in trace {
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }
}
