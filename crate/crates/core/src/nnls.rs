//! Lawson-Hanson non-negative least squares: min |A t - b| subject to t >= 0.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub t: DVector<f64>,
    pub residual: DVector<f64>,
    pub iterations: usize,
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(passive);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-13).expect("svd with both factors")
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let k = a.ncols();
    let max_outer = 3 * k + 30;
    let scale = a.amax().max(1e-300) * b.amax().max(1e-300);
    let wtol = 1e-13 * scale * (a.nrows() as f64);
    let mut x = DVector::<f64>::zeros(k);
    let mut in_p = vec![false; k];
    let mut iterations = 0;
    let mut r = b.clone();
    loop {
        let w = a.tr_mul(&r);
        let mut j = usize::MAX;
        let mut wmax = wtol;
        for i in 0..k {
            if !in_p[i] && w[i] > wmax {
                wmax = w[i];
                j = i;
            }
        }
        if j == usize::MAX || iterations >= max_outer {
            break;
        }
        iterations += 1;
        in_p[j] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let passive: Vec<usize> = (0..k).filter(|&i| in_p[i]).collect();
            let s = solve_passive(a, b, &passive);
            if s.iter().all(|&v| v > 0.0) || inner > 3 * k + 10 {
                for (c, &i) in passive.iter().enumerate() {
                    x[i] = s[c].max(0.0);
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &i) in passive.iter().enumerate() {
                if s[c] <= 0.0 {
                    let denom = x[i] - s[c];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (c, &i) in passive.iter().enumerate() {
                x[i] += alpha * (s[c] - x[i]);
                if x[i] <= 1e-15 * (1.0 + s[c].abs()) {
                    x[i] = 0.0;
                    in_p[i] = false;
                }
            }
            if !in_p.iter().any(|&p| p) {
                break;
            }
        }
        r = b - a * &x;
    }
    let residual = b - a * &x;
    NnlsSolution {
        t: x,
        residual,
        iterations,
    }
}
