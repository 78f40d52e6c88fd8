//! Local least-squares polynomial fits used to estimate derivatives of
//! uniformly sampled data, including at the end of the sample range.

use nalgebra::{DMatrix, DVector};

/// Weights `w[n][k]` such that `sum_k w[n][k] * y[k] / h^n` approximates the
/// n-th derivative at window position `eval_pos` (in sample units) of a
/// degree-`degree` least-squares fit to `nwin` equispaced samples.
pub fn derivative_weights(degree: usize, nwin: usize, eval_pos: f64, max_order: usize) -> Vec<Vec<f64>> {
    assert!(nwin > degree, "window must exceed the fit degree");
    let c = (nwin as f64 - 1.0) / 2.0;
    let s = c.max(1.0);
    let v = DMatrix::from_fn(nwin, degree + 1, |i, j| ((i as f64 - c) / s).powi(j as i32));
    let pinv = v
        .pseudo_inverse(1e-14)
        .expect("SVD of a Vandermonde matrix does not fail");
    let ue = (eval_pos - c) / s;
    (0..=max_order)
        .map(|n| {
            let mut dn = DVector::zeros(degree + 1);
            for k in n..=degree {
                let mut f = 1.0;
                for j in 0..n {
                    f *= (k - j) as f64;
                }
                dn[k] = f * ue.powi((k - n) as i32) / s.powi(n as i32);
            }
            let row = pinv.transpose() * dn;
            row.iter().copied().collect()
        })
        .collect()
}

/// Derivatives of orders 0..=max_order at the last sample.
pub fn endpoint_derivatives(y: &[f64], h: f64, degree: usize, nwin: usize, max_order: usize) -> Vec<f64> {
    let nwin = nwin.min(y.len());
    let degree = degree.min(nwin - 1);
    let w = derivative_weights(degree, nwin, (nwin - 1) as f64, max_order);
    let tail = &y[y.len() - nwin..];
    w.iter()
        .enumerate()
        .map(|(n, row)| row.iter().zip(tail).map(|(a, b)| a * b).sum::<f64>() / h.powi(n as i32))
        .collect()
}

/// Largest |d^n| the endpoint estimator can report for data bounded by 1:
/// sum_k |w[n][k]| / h^n.
pub fn endpoint_gain(h: f64, degree: usize, nwin: usize, max_order: usize) -> Vec<f64> {
    let degree = degree.min(nwin - 1);
    derivative_weights(degree, nwin, (nwin - 1) as f64, max_order)
        .iter()
        .enumerate()
        .map(|(n, row)| row.iter().map(|a| a.abs()).sum::<f64>() / h.powi(n as i32))
        .collect()
}

/// For each order n <= max_order, the maximum over all sample positions of
/// the estimated |d^n y| (windows centred where possible, one-sided at the
/// ends).
pub fn max_abs_derivatives(y: &[f64], h: f64, degree: usize, nwin: usize, max_order: usize) -> Vec<f64> {
    let len = y.len();
    let nwin = nwin.min(len);
    let degree = degree.min(nwin - 1);
    let weights: Vec<Vec<Vec<f64>>> = (0..nwin)
        .map(|p| derivative_weights(degree, nwin, p as f64, max_order))
        .collect();
    let mut out = vec![0.0f64; max_order + 1];
    let half = nwin / 2;
    for i in 0..len {
        let start = i.saturating_sub(half).min(len - nwin);
        let w = &weights[i - start];
        let win = &y[start..start + nwin];
        for (n, row) in w.iter().enumerate() {
            let v: f64 = row.iter().zip(win).map(|(a, b)| a * b).sum::<f64>() / h.powi(n as i32);
            out[n] = out[n].max(v.abs());
        }
    }
    out
}
