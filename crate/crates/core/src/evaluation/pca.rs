use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// one row of `components` coordinates per input vector
    pub coords: Vec<Vec<f64>>,
    /// unit principal directions, strongest first
    pub components: Vec<Vec<f64>>,
    /// covariance eigenvalues for `components`
    pub variances: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with eigenvectors as rows.
pub fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude coordinate is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn project_pca<T: Scalar>(vectors: &[Vec<T>], components: usize) -> Result<Projection, EvalError> {
    let n = vectors.len();
    if components == 0 {
        return Err(EvalError::InvalidParameter("at least one component is required".into()));
    }
    if n < components + 1 {
        return Err(EvalError::InvalidParameter(format!(
            "{components} components need at least {} vectors, got {n}",
            components + 1
        )));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(EvalError::InvalidParameter(format!(
            "vectors have mixed dimensions {d} and {}",
            bad.len()
        )));
    }
    if components > d {
        return Err(EvalError::RankDeficient { rank: d, components });
    }
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| x.to_f64_lossy()).collect())
        .collect();
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centred {
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (values, vectors) = symmetric_eigen(cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let tiny = 1e-12 * total.max(f64::MIN_POSITIVE);
    let rank = values.iter().filter(|&&v| v > tiny).count();
    if rank < components {
        return Err(EvalError::RankDeficient { rank, components });
    }
    let mut comps: Vec<Vec<f64>> = vectors.into_iter().take(components).collect();
    comps.iter_mut().for_each(|c| orient(c));
    let coords = centred
        .iter()
        .map(|r| comps.iter().map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let variances: Vec<f64> = values[..components].to_vec();
    Ok(Projection {
        coords,
        explained_ratio: variances.iter().map(|v| v / total).collect(),
        variances,
        components: comps,
        mean,
    })
}

/// CSV `post_id,pc1,pc2,...,kw_count`.
pub fn projection_csv(ids: &[u64], kw_counts: &[usize], p: &Projection) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let k = p.components.len();
    let mut header = vec!["post_id".to_string()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    header.push("kw_count".into());
    w.write_record(&header).expect("in-memory write");
    for ((id, kw), row) in ids.iter().zip(kw_counts).zip(&p.coords) {
        let mut rec = vec![id.to_string()];
        rec.extend(row.iter().map(|x| format!("{x}")));
        rec.push(kw.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_on_one_axis() {
        let v: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 - 2.0, 0.0]).collect();
        let p = project_pca(&v, 1).unwrap();
        assert_eq!(p.coords.len(), 6);
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-12);
        assert!((p.components[0][0] - 1.0).abs() < 1e-12);
        assert!(matches!(project_pca(&v, 2), Err(EvalError::RankDeficient { rank: 1, .. })));
    }

    #[test]
    fn jacobi_diagonalises() {
        let a = vec![vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 0.5], vec![2.0, 0.5, 5.0]];
        let (vals, vecs) = symmetric_eigen(a.clone());
        for (l, v) in vals.iter().zip(&vecs) {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i][j] * v[j]).sum();
                assert!((av - l * v[i]).abs() < 1e-10);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_layout() {
        let v: Vec<Vec<f32>> = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.5]];
        let p = project_pca(&v, 2).unwrap();
        let csv = projection_csv(&[7, 8, 9], &[0, 1, 2], &p);
        assert!(csv.starts_with("post_id,pc1,pc2,kw_count\n7,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
