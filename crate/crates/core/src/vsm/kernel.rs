//! Dot-product kernels. Four independent accumulators let the compiler
//! vectorize the loop; the reduction order is fixed so results are
//! reproducible across runs.

#[inline]
pub fn dot_mixed(row: &[f32], q: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), q.len());
    let mut acc = [0.0f64; 4];
    let chunks = row.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += row[i] as f64 * q[i];
        acc[1] += row[i + 1] as f64 * q[i + 1];
        acc[2] += row[i + 2] as f64 * q[i + 2];
        acc[3] += row[i + 3] as f64 * q[i + 3];
    }
    let mut out = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..row.len() {
        out += row[i] as f64 * q[i];
    }
    out
}

#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut out = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        out += a[i] * b[i];
    }
    out
}

#[inline]
pub(crate) fn norm_f32(row: &[f32]) -> f64 {
    row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}
