//! First principal component via a cyclic Jacobi eigensolver on whichever
//! of the Gram or covariance matrix is smaller.

use super::flatten;
use crate::error::{Error, Result};
use crate::vsm::{dot_f64, WordVector};

/// Eigen-decomposition of a symmetric `n x n` matrix (row-major).
/// Returns eigenvalues and eigenvectors (as columns of a row-major matrix),
/// unsorted.
pub fn symmetric_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, v)
}

/// Unit leading eigenvector of the covariance of the mean-centered rows,
/// oriented so that its dot product with the row mean is non-negative.
///
/// Fails when fewer than two rows are given or when the centered rows
/// carry no variance relative to their magnitude.
pub fn first_principal_component(rows: &[&WordVector]) -> Result<WordVector> {
    if rows.len() < 2 {
        return Err(Error::invalid("principal component needs at least two rows"));
    }
    let (x, d) = flatten(rows)?;
    let m = rows.len();
    let mut mean = vec![0.0; d];
    for i in 0..m {
        for k in 0..d {
            mean[k] += x[i * d + k];
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let xc: Vec<f64> = (0..m * d).map(|idx| x[idx] - mean[idx % d]).collect();
    let row = |i: usize| &xc[i * d..(i + 1) * d];

    let mut pc = if m <= d {
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot_f64(row(i), row(j));
                gram[i * m + j] = v;
                gram[j * m + i] = v;
            }
        }
        let (eig, vecs) = symmetric_eigen(gram, m);
        let top = argmax(&eig);
        check_variance(eig[top], m, &x)?;
        let mut pc = vec![0.0; d];
        for i in 0..m {
            let u = vecs[i * m + top];
            for k in 0..d {
                pc[k] += u * xc[i * d + k];
            }
        }
        pc
    } else {
        let mut cov = vec![0.0; d * d];
        for i in 0..m {
            let r = row(i);
            for a in 0..d {
                for b in a..d {
                    cov[a * d + b] += r[a] * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[a * d + b] = cov[b * d + a];
            }
        }
        let (eig, vecs) = symmetric_eigen(cov, d);
        let top = argmax(&eig);
        check_variance(eig[top], m, &x)?;
        (0..d).map(|k| vecs[k * d + top]).collect()
    };

    let n = dot_f64(&pc, &pc).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::numeric("degenerate principal component"));
    }
    pc.iter_mut().for_each(|v| *v /= n);
    let along = dot_f64(&pc, &mean);
    let flip = if along != 0.0 {
        along < 0.0
    } else {
        pc.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
    };
    if flip {
        pc.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(WordVector(pc))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn check_variance(top: f64, m: usize, raw: &[f64]) -> Result<()> {
    let mean_sq = raw.iter().map(|v| v * v).sum::<f64>() / m as f64;
    if top / m as f64 <= 1e-10 * mean_sq {
        return Err(Error::numeric(
            "rows have no spread (all equal); principal component undefined",
        ));
    }
    Ok(())
}
