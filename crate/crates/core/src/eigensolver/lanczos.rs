//! Hermitian Lanczos for the lowest eigenpair with full reorthogonalization
//! and explicit restarts from the current Ritz vector.

use crate::error::{Error, Result};
use crate::hamiltonians::LinearMap;
use crate::operators::{inner, norm, C64};

use super::tridiagonal::Tridiagonal;

/// Krylov basis vectors kept per restart cycle.
pub const MAX_BASIS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub reorthogonalize: bool,
    pub max_basis: usize,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
    /// `‖A x - λ x‖₂`, computed explicitly.
    pub residual: f64,
    pub iterations: usize,
    /// Lowest Ritz value after every Lanczos step.
    pub ritz_history: Vec<f64>,
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn scale(v: &mut [C64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

/// Removes the components of `w` along each (orthonormal) vector of `basis`.
fn orthogonalize(w: &mut [C64], basis: &[impl AsRef<[C64]>]) {
    for b in basis {
        let b = b.as_ref();
        let c = inner(b, w);
        axpy(w, -c, b);
    }
}

/// Lowest eigenpair of `op` in the orthogonal complement of `deflate`.
///
/// `deflate` must be orthonormal. The result depends only on `start` and the
/// operator, so a fixed start vector gives a reproducible representative of
/// a degenerate eigenspace (the normalized projection of `start` onto it).
pub fn lowest_eigenpair(
    op: &dyn LinearMap,
    start: &[C64],
    deflate: &[&[C64]],
    opts: &LanczosOptions,
) -> Result<Eigenpair> {
    let dim = op.dim();
    if start.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: start.len() });
    }
    if deflate.len() >= dim {
        return Err(Error::InvalidConfig(format!("no room left after deflating {} vectors", deflate.len())));
    }
    let mut x = start.to_vec();
    orthogonalize(&mut x, deflate);
    orthogonalize(&mut x, deflate);
    let nx = norm(&x);
    if nx < 1e-12 {
        return Err(Error::InvalidConfig("start vector lies in the deflated space".into()));
    }
    scale(&mut x, 1.0 / nx);

    let basis_cap = opts.max_basis.max(2).min(dim - deflate.len());
    let mut iterations = 0usize;
    let mut history = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut w = vec![C64::new(0.0, 0.0); dim];

    loop {
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut t = Tridiagonal::default();
        let mut ritz;
        loop {
            let j = basis.len() - 1;
            op.apply_into(&basis[j], &mut w);
            iterations += 1;
            let alpha = inner(&basis[j], &w).re;
            axpy(&mut w, C64::new(-alpha, 0.0), &basis[j]);
            if j > 0 {
                axpy(&mut w, C64::new(-t.off[j - 1], 0.0), &basis[j - 1]);
            }
            orthogonalize(&mut w, deflate);
            if opts.reorthogonalize {
                // two Gram-Schmidt sweeps keep the basis orthogonal to
                // working precision
                let before = norm(&w);
                orthogonalize(&mut w, &basis);
                if norm(&w) < 0.7 * before {
                    orthogonalize(&mut w, &basis);
                }
                orthogonalize(&mut w, deflate);
            }
            let beta = norm(&w);
            t.diag.push(alpha);

            let theta = t.lowest_eigenvalue();
            let s = t.eigenvector(theta);
            history.push(theta);
            let estimate = beta * s.last().copied().unwrap_or(1.0).abs();
            let spread = t.diag.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0);
            ritz = (theta, s);

            let invariant = beta <= 1e-13 * spread;
            if invariant || estimate < 0.1 * opts.tol || basis.len() >= basis_cap || iterations >= opts.max_iterations {
                break;
            }
            t.off.push(beta);
            let mut next = w.clone();
            scale(&mut next, 1.0 / beta);
            basis.push(next);
        }

        // Ritz vector and its certified residual
        let (_, s) = &ritz;
        let mut y = vec![C64::new(0.0, 0.0); dim];
        for (coef, b) in s.iter().zip(&basis) {
            axpy(&mut y, C64::new(*coef, 0.0), b);
        }
        orthogonalize(&mut y, deflate);
        let ny = norm(&y);
        scale(&mut y, 1.0 / ny);
        op.apply_into(&y, &mut w);
        let value = inner(&y, &w).re;
        axpy(&mut w, C64::new(-value, 0.0), &y);
        let residual = norm(&w);
        best_residual = best_residual.min(residual);
        if residual <= opts.tol {
            return Ok(Eigenpair { value, vector: y, residual, iterations, ritz_history: history });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations, best_residual });
        }
        x = y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Hermitian test operator.
    struct DenseOp(nalgebra::DMatrix<C64>);

    impl LinearMap for DenseOp {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply_into(&self, v: &[C64], out: &mut [C64]) {
            let x = nalgebra::DVector::from_column_slice(v);
            out.copy_from_slice((&self.0 * x).as_slice());
        }
    }

    fn random_hermitian(n: usize, seed: u64) -> nalgebra::DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = nalgebra::DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn random_start(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn opts() -> LanczosOptions {
        LanczosOptions { tol: 1e-10, max_iterations: 2000, reorthogonalize: true, max_basis: MAX_BASIS }
    }

    #[test]
    fn lowest_of_random_hermitian() {
        for (n, seed) in [(3, 1), (17, 2), (150, 3)] {
            let m = random_hermitian(n, seed);
            let want = m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let got = lowest_eigenpair(&DenseOp(m), &random_start(n, 9), &[], &opts()).unwrap();
            assert!((got.value - want).abs() < 1e-9, "n={n}");
            assert!(got.residual <= 1e-10);
        }
    }

    #[test]
    fn ritz_values_never_increase() {
        let m = random_hermitian(120, 4);
        let got = lowest_eigenpair(&DenseOp(m), &random_start(120, 5), &[], &opts()).unwrap();
        for pair in got.ritz_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn small_basis_restarts_converge() {
        let m = random_hermitian(90, 6);
        let want = m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let o = LanczosOptions { max_basis: 8, ..opts() };
        let got = lowest_eigenpair(&DenseOp(m), &random_start(90, 7), &[], &o).unwrap();
        assert!((got.value - want).abs() < 1e-9);
    }

    #[test]
    fn deflation_gives_second_eigenvalue() {
        let m = random_hermitian(60, 8);
        let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let op = DenseOp(m);
        let first = lowest_eigenpair(&op, &random_start(60, 1), &[], &opts()).unwrap();
        let second = lowest_eigenpair(&op, &random_start(60, 2), &[&first.vector], &opts()).unwrap();
        assert!((second.value - ev[1]).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let m = random_hermitian(100, 10);
        let o = LanczosOptions { max_iterations: 3, ..opts() };
        match lowest_eigenpair(&DenseOp(m), &random_start(100, 1), &[], &o) {
            Err(Error::NotConverged { iterations: 3, best_residual }) => assert!(best_residual > 1e-10),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_space_returns_projected_start() {
        // diag(-1, -1, 0, 1, ...) : lowest eigenspace spanned by e0, e1
        let n = 12;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i < 2 {
                C64::new(-1.0, 0.0)
            } else {
                C64::new(i as f64 - 2.0, 0.0)
            }
        });
        let start = random_start(n, 3);
        let got = lowest_eigenpair(&DenseOp(m), &start, &[], &opts()).unwrap();
        let p = (start[0].norm_sqr() + start[1].norm_sqr()).sqrt();
        let overlap = inner(&got.vector, &start).norm();
        assert!((overlap - p).abs() < 1e-9);
    }
}
