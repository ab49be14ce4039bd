use serde::{Deserialize, Serialize};

use super::EvalError;

/// Combined sample size up to which p-values are computed exactly.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// A tends to be smaller than B
    Less,
    /// A tends to be larger than B
    Greater,
    TwoSided,
}

impl Alternative {
    pub fn mirrored(self) -> Self {
        match self {
            Alternative::Less => Alternative::Greater,
            Alternative::Greater => Alternative::Less,
            Alternative::TwoSided => Alternative::TwoSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// rank-sum statistic of sample A
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled values, plus the tie group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn check(sample: &[f64], which: &str) -> Result<(), EvalError> {
    if sample.is_empty() {
        return Err(EvalError::EmptySample(which.to_string()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidParameter(format!("sample {which} contains a non-finite value")));
    }
    Ok(())
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MannWhitney, EvalError> {
    check(a, "a")?;
    check(b, "b")?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let base = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - base;

    if na + nb <= EXACT_LIMIT {
        let p = exact_p(&ranks, na, u, base, alternative);
        return Ok(MannWhitney { u, p_value: p, exact: true });
    }

    let n = (na + nb) as f64;
    let mean = (na * nb) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 1e-12 {
        return Ok(MannWhitney { u, p_value: 1.0, exact: false });
    }
    let sd = var.sqrt();
    let p = match alternative {
        Alternative::Less => normal_cdf((u - mean + 0.5) / sd),
        Alternative::Greater => normal_sf((u - mean - 0.5) / sd),
        Alternative::TwoSided => (2.0 * normal_sf(((u - mean).abs() - 0.5).max(0.0) / sd)).min(1.0),
    };
    Ok(MannWhitney { u, p_value: p, exact: false })
}

/// Exact p-value: every way of drawing `na` of the pooled ranks for A.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64, base: f64, alternative: Alternative) -> f64 {
    const EPS: f64 = 1e-9;
    let n = ranks.len();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    let mut idx: Vec<usize> = (0..na).collect();
    loop {
        let u = idx.iter().map(|&i| ranks[i]).sum::<f64>() - base;
        total += 1;
        if u <= u_obs + EPS {
            le += 1;
        }
        if u >= u_obs - EPS {
            ge += 1;
        }
        // next combination in lexicographic order
        let mut i = na;
        loop {
            if i == 0 {
                let (pl, pg) = (le as f64 / total as f64, ge as f64 / total as f64);
                return match alternative {
                    Alternative::Less => pl,
                    Alternative::Greater => pg,
                    Alternative::TwoSided => (2.0 * pl.min(pg)).min(1.0),
                };
            }
            i -= 1;
            if idx[i] < n - na + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..na {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Standardised mean difference with the pooled (n-1) standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    check(a, "a")?;
    check(b, "b")?;
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::InvalidParameter("each sample needs at least two values".into()));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let ss = |s: &[f64], m: f64| s.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let (ma, mb) = (mean(a), mean(b));
    let pooled = ((ss(a, ma) + ss(b, mb)) / (a.len() + b.len() - 2) as f64).sqrt();
    if pooled == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((ma - mb) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p_value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn constant_samples() {
        let r = mann_whitney_u(&[2.0; 5], &[2.0; 7], Alternative::TwoSided).unwrap();
        assert_eq!(r.u, 17.5);
        assert_eq!(r.p_value, 1.0);
        let big = mann_whitney_u(&[2.0; 10], &[2.0; 10], Alternative::Less).unwrap();
        assert_eq!((big.u, big.p_value, big.exact), (50.0, 1.0, false));
    }

    #[test]
    fn mirrored_alternative() {
        let a = [0.3, 1.2, 2.2, 0.9, 4.0, 1.2];
        let b = [1.5, 2.5, 3.5, 1.2, 5.0];
        for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
            let x = mann_whitney_u(&a, &b, alt).unwrap();
            let y = mann_whitney_u(&b, &a, alt.mirrored()).unwrap();
            assert!((x.p_value - y.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_approximation_detects_shift() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64 + 8.5).collect();
        let r = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 0.01, "{}", r.p_value);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(mann_whitney_u(&[], &[1.0], Alternative::Less), Err(EvalError::EmptySample(_))));
    }

    #[test]
    fn cohen_examples() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        // both samples have sd 1, means 1 apart
        let d = cohens_d(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
