//! Shared oracle helpers for the acceptance gate, deliberately independent
//! of the cone/metric machinery they cross-check.

use nalgebra::{DMatrix, DVector};

/// Spectral radius and l1-normalized right Perron vector by plain power
/// iteration.
pub fn perron_right(a: &DMatrix<f64>, iters: usize) -> (f64, DVector<f64>) {
    let n = a.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut rho = 0.0;
    for _ in 0..iters {
        let w = a * &v;
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        rho = norm;
        v = w / norm;
    }
    (rho, v)
}

/// Left Perron data: power iteration on the transpose.
pub fn perron_left(a: &DMatrix<f64>, iters: usize) -> (f64, DVector<f64>) {
    perron_right(&a.transpose(), iters)
}

/// l1 distance between the l1-normalized representatives of two rays.
pub fn ray_distance(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let su: f64 = u.iter().map(|x| x.abs()).sum();
    let sv: f64 = v.iter().map(|x| x.abs()).sum();
    (u / su - v / sv).iter().map(|x| x.abs()).sum()
}
