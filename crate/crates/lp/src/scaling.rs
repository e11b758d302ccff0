//! Geometric-mean row/column scaling.
//!
//! Factors are rounded to powers of two so scaling and unscaling are exact in
//! floating point.

const PASSES: usize = 6;

/// Row and column scale factors.
#[derive(Debug, Clone)]
pub(crate) struct Scaled {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round().clamp(-60.0, 60.0) as i32)
}

/// Computes scale factors for the columns `cols[j] = [(row, value)]`.
pub(crate) fn geometric_scaling(m: usize, cols: &[Vec<(usize, f64)>]) -> Scaled {
    let n = cols.len();
    let mut r = vec![1.0; m];
    let mut c = vec![1.0; n];
    for _ in 0..PASSES {
        let mut rmin = vec![f64::INFINITY; m];
        let mut rmax = vec![0.0f64; m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                let v = (a * c[j]).abs();
                rmin[i] = rmin[i].min(v);
                rmax[i] = rmax[i].max(v);
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                r[i] = pow2(1.0 / (rmin[i] * rmax[i]).sqrt());
            }
        }
        for (j, col) in cols.iter().enumerate() {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &(i, a) in col {
                let v = (a * r[i]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > 0.0 {
                c[j] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
    }
    Scaled {
        row_scale: r,
        col_scale: c,
    }
}
