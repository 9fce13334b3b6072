//! Jacobi-preconditioned conjugate gradient for symmetric positive definite
//! operators.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Matrix-free symmetric positive definite operator.
pub trait SpdOperator<T> {
    fn dim(&self) -> usize;

    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);

    fn diagonal(&self) -> Vec<T>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Target relative residual `‖A x − b‖ / ‖b‖`.
    pub tol: T,
    pub max_iters: usize,
    pub jacobi: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10).max(T::lit(100.0) * T::epsilon()),
            max_iters: 20_000,
            jacobi: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn true_residual<T: Scalar, A: SpdOperator<T>>(op: &A, x: &[T], b: &[T], r: &mut [T]) {
    op.apply(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves `A x = b`, starting from `x0` (zero when `None`).
pub fn solve_spd_from<T: Scalar, A: SpdOperator<T>>(
    op: &A,
    rhs: &[T],
    x0: Option<&[T]>,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    let n = op.dim();
    assert_eq!(rhs.len(), n, "rhs length must match operator dimension");
    let b_norm = norm(rhs);
    if b_norm == T::zero() {
        return Ok(Solution {
            x: vec![T::zero(); n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<T> = if opts.jacobi {
        op.diagonal()
            .into_iter()
            .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
            .collect()
    } else {
        vec![T::one(); n]
    };

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![T::zero(); n],
    };
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    let target = opts.tol * b_norm;
    let mut iterations = 0;

    // Outer loop restarts from the true residual whenever the recurrence
    // claims convergence but the recomputed residual disagrees.
    loop {
        true_residual(op, &x, rhs, &mut r);
        let res = norm(&r);
        if res <= target {
            return Ok(Solution {
                x,
                iterations,
                relative_residual: (res / b_norm).as_f64(),
            });
        }
        if iterations >= opts.max_iters {
            return Err(Error::SolverDivergence {
                iterations,
                residual: (res / b_norm).as_f64(),
            });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let start = iterations;
        while iterations < opts.max_iters {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
                r[i] = r[i] - alpha * ap[i];
            }
            iterations += 1;
            if norm(&r) <= target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if iterations == start {
            // breakdown without progress
            true_residual(op, &x, rhs, &mut r);
            return Err(Error::SolverDivergence {
                iterations,
                residual: (norm(&r) / b_norm).as_f64(),
            });
        }
    }
}

/// Solves `A x = b` from a zero start.
pub fn solve_spd<T: Scalar, A: SpdOperator<T>>(
    op: &A,
    rhs: &[T],
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    solve_spd_from(op, rhs, None, opts).map(|s| s.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense symmetric matrix as an operator.
    struct Dense {
        n: usize,
        a: Vec<f64>,
    }

    impl SpdOperator<f64> for Dense {
        fn dim(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
        }
        fn diagonal(&self) -> Vec<f64> {
            (0..self.n).map(|i| self.a[i * self.n + i]).collect()
        }
    }

    #[test]
    fn solves_small_dense_system() {
        let op = Dense {
            n: 3,
            a: vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0],
        };
        let b = [1.0, 2.0, 3.0];
        let x = solve_spd(&op, &b, &SolverOptions::default()).unwrap();
        let mut ax = [0.0; 3];
        op.apply(&x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = Dense {
            n: 2,
            a: vec![2.0, 0.0, 0.0, 2.0],
        };
        let s = solve_spd_from(&op, &[0.0, 0.0], None, &SolverOptions::default()).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let op = Dense {
            n: 3,
            a: vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0],
        };
        let opts = SolverOptions {
            tol: 1e-14,
            max_iters: 1,
            jacobi: false,
        };
        assert!(matches!(
            solve_spd(&op, &[1.0, -2.0, 3.0], &opts),
            Err(Error::SolverDivergence { .. })
        ));
    }
}
