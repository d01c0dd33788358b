//! Small dense helpers.

use nalgebra::{DMatrix, DVector};

const POWER_ITERATIONS: usize = 50;
const POWER_TOL: f64 = 1e-10;

/// Operator 2-norm by power iteration on `MᵀM`.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    let g = m.transpose() * m;
    // start from the heaviest column of the Gram matrix
    let (col, norm) =
        g.column_iter()
            .enumerate()
            .map(|(j, c)| (j, c.norm()))
            .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
    if norm == 0.0 {
        return 0.0;
    }
    let mut v: DVector<f64> = g.column(col) / norm;
    let mut est = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = &g * &v;
        let next = w.norm();
        if next == 0.0 {
            break;
        }
        v = w / next;
        if (next - est).abs() <= POWER_TOL * next {
            est = next;
            break;
        }
        est = next;
    }
    est.sqrt()
}

pub fn sup_norm(values: &[DVector<f64>]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
