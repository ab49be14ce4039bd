use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Gradient descent with Barzilai-Borwein steps and Armijo backtracking.
///
/// `f` returns the objective and writes its gradient. Stops when the
/// gradient 2-norm drops below `tol`; otherwise returns the best iterate
/// seen after `max_iter` steps.
pub fn minimize<T: Scalar, F>(x0: Vec<T>, tol: f64, max_iter: usize, mut f: F) -> (Vec<T>, Convergence)
where
    F: FnMut(&[T], &mut [T]) -> T,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g);
    let mut gn = dot(&g, &g).sqrt().to_f64_lossy();
    let mut best = (x.clone(), fx, gn);
    let mut step = T::one();
    let c1 = T::from_f64_lossy(1e-4);
    let half = T::from_f64_lossy(0.5);

    let mut x_new = vec![T::zero(); n];
    let mut g_new = vec![T::zero(); n];
    for it in 0..max_iter {
        if gn < tol {
            return (
                x,
                Convergence {
                    iterations: it,
                    grad_norm: gn,
                    converged: true,
                },
            );
        }
        let g2 = dot(&g, &g);
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for ((xn, &xi), &gi) in x_new.iter_mut().zip(&x).zip(&g) {
                *xn = xi - step * gi;
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx - c1 * step * g2 {
                accepted = true;
                break;
            }
            step *= half;
        }
        if !accepted {
            break;
        }
        // BB1 step from the secant pair
        let mut sy = T::zero();
        let mut ss = T::zero();
        for i in 0..n {
            let s = x_new[i] - x[i];
            let y = g_new[i] - g[i];
            sy += s * y;
            ss += s * s;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        gn = dot(&g, &g).sqrt().to_f64_lossy();
        if gn < best.2 {
            best = (x.clone(), fx, gn);
        }
        step = if sy > T::zero() { ss / sy } else { step * T::from_f64_lossy(2.0) };
        let cap = T::from_f64_lossy(1e6);
        if !step.is_finite() || step > cap {
            step = cap;
        }
    }
    if gn < tol {
        return (
            x,
            Convergence {
                iterations: max_iter,
                grad_norm: gn,
                converged: true,
            },
        );
    }
    (
        best.0,
        Convergence {
            iterations: max_iter,
            grad_norm: best.2,
            converged: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        // f = (x-3)^2 + 10 (y+1)^2
        let (x, conv) = minimize(vec![0.0f64, 0.0], 1e-10, 500, |v, g| {
            g[0] = 2.0 * (v[0] - 3.0);
            g[1] = 20.0 * (v[1] + 1.0);
            (v[0] - 3.0).powi(2) + 10.0 * (v[1] + 1.0).powi(2)
        });
        assert!(conv.converged);
        assert!((x[0] - 3.0).abs() < 1e-9 && (x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let (_, conv) = minimize(vec![10.0f64], 1e-30, 2, |v, g| {
            g[0] = 4.0 * v[0].powi(3);
            v[0].powi(4)
        });
        assert!(!conv.converged);
    }
}
