//! Spin-1 site operators and their matrix-free action on chain states.
//!
//! The computational basis of an `N`-site chain is indexed base 3 with site 1
//! as the most significant digit, so `index = sum_l d_l * 3^(N - l)`. Digit
//! `d` encodes the local `S^z` eigenvalue `m = 1 - d` (digit 0 is `m = +1`).
//! This ordering makes a full-space operator the Kronecker product
//! `op_1 ⊗ op_2 ⊗ … ⊗ op_N` in the usual left-to-right sense.

use std::fmt;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Spin component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A 3x3 spin-1 matrix in the `m = (+1, 0, -1)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteOperator {
    axis: Axis,
    entries: [[C64; 3]; 3],
}

impl SiteOperator {
    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn entries(&self) -> &[[C64; 3]; 3] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row][col]
    }
}

/// Standard spin-1 matrix for `axis`.
pub fn site_operator(axis: Axis) -> SiteOperator {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    let one = C64::new(1.0, 0.0);
    let entries = match axis {
        Axis::X => [[ZERO, r, ZERO], [r, ZERO, r], [ZERO, r, ZERO]],
        // S^y = (S+ - S-) / 2i
        Axis::Y => [[ZERO, -i, ZERO], [i, ZERO, -i], [ZERO, i, ZERO]],
        Axis::Z => [[one, ZERO, ZERO], [ZERO, ZERO, ZERO], [ZERO, ZERO, -one]],
    };
    SiteOperator { axis, entries }
}

/// Local `S^z` eigenvalue of a base-3 digit.
#[inline]
pub fn digit_to_m(digit: u8) -> i32 {
    1 - digit as i32
}

/// `3^n` as usize.
pub fn hilbert_dim(site_count: usize) -> usize {
    3usize.pow(site_count as u32)
}

/// Index stride of 1-based `site` in an `N`-site chain.
#[inline]
pub fn site_stride(site_count: usize, site: usize) -> usize {
    3usize.pow((site_count - site) as u32)
}

/// A computational basis state of an `N`-site chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    site_count: usize,
    index: usize,
}

impl BasisIndex {
    pub fn new(site_count: usize, index: usize) -> Result<Self> {
        if site_count < 2 {
            return Err(Error::InvalidSpec(format!("site count {site_count} < 2")));
        }
        let dim = hilbert_dim(site_count);
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: index });
        }
        Ok(Self { site_count, index })
    }

    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        if let Some(bad) = digits.iter().find(|&&d| d > 2) {
            return Err(Error::InvalidSpec(format!("base-3 digit {bad} out of range")));
        }
        let index = digits.iter().fold(0usize, |acc, &d| acc * 3 + d as usize);
        Self::new(digits.len(), index)
    }

    /// Basis state from local magnetizations `m_l ∈ {-1, 0, 1}`.
    pub fn from_magnetizations(ms: &[i32]) -> Result<Self> {
        let digits: Option<Vec<u8>> = ms
            .iter()
            .map(|&m| if (-1..=1).contains(&m) { Some((1 - m) as u8) } else { None })
            .collect();
        let digits = digits.ok_or_else(|| Error::InvalidSpec("local m outside -1..=1".into()))?;
        Self::from_digits(&digits)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// Digits `d_1 … d_N` (site 1 first).
    pub fn digits(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.site_count];
        decode_digits(self.index, &mut out);
        out
    }

    pub fn magnetization(&self) -> i32 {
        index_magnetization(self.index, self.site_count)
    }
}

/// Writes the base-3 digits of `index` into `out` (site 1 first).
#[inline]
pub fn decode_digits(mut index: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % 3) as u8;
        index /= 3;
    }
}

pub fn index_magnetization(mut index: usize, site_count: usize) -> i32 {
    let mut m = 0;
    for _ in 0..site_count {
        m += digit_to_m((index % 3) as u8);
        index /= 3;
    }
    m
}

/// Normalized basis vector for local magnetizations `ms`.
pub fn basis_state(ms: &[i32]) -> Result<Vec<C64>> {
    let b = BasisIndex::from_magnetizations(ms)?;
    let mut v = vec![ZERO; hilbert_dim(ms.len())];
    v[b.index()] = C64::new(1.0, 0.0);
    Ok(v)
}

fn check_state(site_count: usize, state: &[C64]) -> Result<()> {
    let expected = hilbert_dim(site_count);
    if state.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: state.len() });
    }
    Ok(())
}

fn check_site(site_count: usize, site: usize) -> Result<()> {
    if site == 0 || site > site_count {
        return Err(Error::SiteOutOfRange { site, site_count });
    }
    Ok(())
}

/// `(1 ⊗ … ⊗ op_site ⊗ … ⊗ 1) · state` without forming the Kronecker product.
pub fn apply_site(op: &SiteOperator, site: usize, site_count: usize, state: &[C64]) -> Result<Vec<C64>> {
    check_state(site_count, state)?;
    check_site(site_count, site)?;
    let mut out = vec![ZERO; state.len()];
    apply_site_into(op, site, site_count, state, &mut out);
    Ok(out)
}

/// Unchecked kernel behind [`apply_site`]; `out` is overwritten.
pub fn apply_site_into(op: &SiteOperator, site: usize, site_count: usize, state: &[C64], out: &mut [C64]) {
    let stride = site_stride(site_count, site);
    let block = 3 * stride;
    let m = &op.entries;
    for base in (0..state.len()).step_by(block) {
        for j in base..base + stride {
            let a = state[j];
            let b = state[j + stride];
            let c = state[j + 2 * stride];
            out[j] = m[0][0] * a + m[0][1] * b + m[0][2] * c;
            out[j + stride] = m[1][0] * a + m[1][1] * b + m[1][2] * c;
            out[j + 2 * stride] = m[2][0] * a + m[2][1] * b + m[2][2] * c;
        }
    }
}

/// `op_a` at `site_a` times `op_b` at `site_b`; the sites must differ.
pub fn apply_two_site(
    op_a: &SiteOperator,
    site_a: usize,
    op_b: &SiteOperator,
    site_b: usize,
    site_count: usize,
    state: &[C64],
) -> Result<Vec<C64>> {
    check_site(site_count, site_a)?;
    check_site(site_count, site_b)?;
    if site_a == site_b {
        return Err(Error::EqualSites(site_a));
    }
    let inner = apply_site(op_b, site_b, site_count, state)?;
    apply_site(op_a, site_a, site_count, &inner)
}

/// `<u, v>` with the first argument conjugated.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) mod dense_oracle {
    //! Dense Kronecker-product construction used only to check the
    //! matrix-free kernels.
    use super::*;

    pub type Dense = Vec<Vec<C64>>;

    pub fn identity(n: usize) -> Dense {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect())
            .collect()
    }

    pub fn kron(a: &Dense, b: &Dense) -> Dense {
        let (ra, rb) = (a.len(), b.len());
        let mut out = vec![vec![ZERO; ra * rb]; ra * rb];
        for i in 0..ra {
            for j in 0..ra {
                for k in 0..rb {
                    for l in 0..rb {
                        out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    pub fn site_matrix(op: &SiteOperator) -> Dense {
        op.entries().iter().map(|r| r.to_vec()).collect()
    }

    /// Full matrix of `op` at `site` via explicit Kronecker products.
    pub fn embed(op: &SiteOperator, site: usize, n: usize) -> Dense {
        let mut acc = if site == 1 { site_matrix(op) } else { identity(3) };
        for l in 2..=n {
            let factor = if l == site { site_matrix(op) } else { identity(3) };
            acc = kron(&acc, &factor);
        }
        acc
    }

    pub fn matmul(a: &Dense, b: &Dense) -> Dense {
        let n = a.len();
        let mut out = vec![vec![ZERO; n]; n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i][k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i][j] += aik * b[k][j];
                }
            }
        }
        out
    }

    pub fn matvec(a: &Dense, v: &[C64]) -> Vec<C64> {
        a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::dense_oracle::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
        (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn mat3_mul(a: &SiteOperator, b: &SiteOperator) -> [[C64; 3]; 3] {
        let mut out = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += a.get(i, k) * b.get(k, j);
                }
            }
        }
        out
    }

    #[test]
    fn sz_is_diagonal() {
        let z = site_operator(Axis::Z);
        let diag: Vec<f64> = (0..3).map(|i| z.get(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(z.get(i, j), ZERO);
                }
            }
        }
    }

    #[test]
    fn sx_matches_ladder_form() {
        let x = site_operator(Axis::X);
        let pattern = [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((x.get(i, j) - C64::new(pattern[i][j] * FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn hermitian_and_casimir() {
        let ops: Vec<_> = Axis::ALL.iter().map(|&a| site_operator(a)).collect();
        let mut casimir = [[ZERO; 3]; 3];
        for op in &ops {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((op.get(i, j) - op.get(j, i).conj()).norm() < 1e-12);
                }
            }
            let sq = mat3_mul(op, op);
            for i in 0..3 {
                for j in 0..3 {
                    casimir[i][j] += sq[i][j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((casimir[i][j] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn su2_commutators() {
        let [x, y, z] = Axis::ALL.map(site_operator);
        for (a, b, c) in [(&x, &y, &z), (&y, &z, &x), (&z, &x, &y)] {
            let ab = mat3_mul(a, b);
            let ba = mat3_mul(b, a);
            for i in 0..3 {
                for j in 0..3 {
                    let comm = ab[i][j] - ba[i][j];
                    assert!((comm - C64::i() * c.get(i, j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eigenvalues_are_unit_spaced() {
        // Sx and Sy have characteristic polynomial λ^3 - λ, so checking
        // S^3 = S together with trace 0 and Casimir pins the spectrum {-1,0,1}.
        for axis in Axis::ALL {
            let op = site_operator(axis);
            let sq = mat3_mul(&op, &op);
            let sq_op = SiteOperator { axis, entries: sq };
            let cube = mat3_mul(&sq_op, &op);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((cube[i][j] - op.get(i, j)).norm() < 1e-12);
                }
            }
            let trace: C64 = (0..3).map(|i| op.get(i, i)).sum();
            let trace_sq: C64 = (0..3).map(|i| sq[i][i]).sum();
            assert!(trace.norm() < 1e-12);
            assert!((trace_sq - C64::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_round_trip() {
        for n in 2..=5 {
            for idx in 0..hilbert_dim(n) {
                let b = BasisIndex::new(n, idx).unwrap();
                let back = BasisIndex::from_digits(&b.digits()).unwrap();
                assert_eq!(back, b);
                let m: i32 = b.digits().iter().map(|&d| digit_to_m(d)).sum();
                assert_eq!(m, b.magnetization());
                assert!(m.abs() <= n as i32);
            }
        }
        assert!(BasisIndex::new(2, 9).is_err());
    }

    #[test]
    fn sz_on_polarized_site_is_eigen() {
        let v = basis_state(&[1, 0, -1]).unwrap();
        let out = apply_site(&site_operator(Axis::Z), 1, 3, &v).unwrap();
        assert!(max_diff(&out, &v) < 1e-15);
    }

    #[test]
    fn sx_lowers_into_zero_component() {
        let v = basis_state(&[-1, 1, 0]).unwrap();
        let out = apply_site(&site_operator(Axis::X), 2, 3, &v).unwrap();
        let target = BasisIndex::from_magnetizations(&[-1, 0, 0]).unwrap().index();
        assert!((out[target] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let rest: f64 = out.iter().enumerate().filter(|(i, _)| *i != target).map(|(_, z)| z.norm()).sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn matches_kronecker_oracle_at_three_sites() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_state(&mut rng, 27);
        for axis in Axis::ALL {
            let op = site_operator(axis);
            for site in 1..=3 {
                let dense = embed(&op, site, 3);
                let want = matvec(&dense, &v);
                let got = apply_site(&op, site, 3, &v).unwrap();
                assert!(max_diff(&want, &got) < 1e-12);
            }
        }
    }

    #[test]
    fn two_site_matches_oracle_and_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = random_state(&mut rng, 27);
        for a in Axis::ALL {
            for b in Axis::ALL {
                let (oa, ob) = (site_operator(a), site_operator(b));
                for (sa, sb) in [(1, 2), (2, 3), (3, 1)] {
                    let dense = matmul(&embed(&oa, sa, 3), &embed(&ob, sb, 3));
                    let want = matvec(&dense, &v);
                    let got = apply_two_site(&oa, sa, &ob, sb, 3, &v).unwrap();
                    assert!(max_diff(&want, &got) < 1e-12);
                    let swapped = apply_two_site(&ob, sb, &oa, sa, 3, &v).unwrap();
                    assert!(max_diff(&got, &swapped) < 1e-14);
                }
            }
        }
    }

    #[test]
    fn two_site_small_examples() {
        let v = basis_state(&[1, 1]).unwrap();
        let z = site_operator(Axis::Z);
        let x = site_operator(Axis::X);
        let zz = apply_two_site(&z, 1, &z, 2, 2, &v).unwrap();
        assert!(max_diff(&zz, &v) < 1e-15);
        let xx = apply_two_site(&x, 1, &x, 2, 2, &v).unwrap();
        let want = {
            let mut w = vec![ZERO; 9];
            w[BasisIndex::from_magnetizations(&[0, 0]).unwrap().index()] = C64::new(0.5, 0.0);
            w
        };
        assert!(max_diff(&xx, &want) < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = site_operator(Axis::Z);
        let short = vec![ZERO; 8];
        match apply_site(&z, 1, 2, &short) {
            Err(Error::DimensionMismatch { expected: 9, actual: 8 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(apply_site(&z, 3, 2, &vec![ZERO; 9]), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(apply_two_site(&z, 1, &z, 1, 2, &vec![ZERO; 9]), Err(Error::EqualSites(1))));
    }

    #[test]
    fn magnetization_selection_rules() {
        let n = 3;
        let x = site_operator(Axis::X);
        let z = site_operator(Axis::Z);
        for idx in 0..hilbert_dim(n) {
            let mut v = vec![ZERO; hilbert_dim(n)];
            v[idx] = C64::new(1.0, 0.0);
            let m0 = index_magnetization(idx, n);
            for site in 1..=n {
                for (j, amp) in apply_site(&z, site, n, &v).unwrap().iter().enumerate() {
                    if amp.norm() > 0.0 {
                        assert_eq!(index_magnetization(j, n), m0);
                    }
                }
                for (j, amp) in apply_site(&x, site, n, &v).unwrap().iter().enumerate() {
                    if amp.norm() > 0.0 {
                        assert_eq!((index_magnetization(j, n) - m0).abs(), 1);
                    }
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state_strategy(dim: usize) -> impl Strategy<Value = Vec<C64>> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), dim)
        }

        proptest! {
            #[test]
            fn linear(u in state_strategy(27), v in state_strategy(27), a in -2.0f64..2.0, b in -2.0f64..2.0, site in 1usize..=3) {
                let op = site_operator(Axis::Y);
                let combo: Vec<C64> = u.iter().zip(&v).map(|(x, y)| x * a + y * b).collect();
                let lhs = apply_site(&op, site, 3, &combo).unwrap();
                let (au, bv) = (apply_site(&op, site, 3, &u).unwrap(), apply_site(&op, site, 3, &v).unwrap());
                let rhs: Vec<C64> = au.iter().zip(&bv).map(|(x, y)| x * a + y * b).collect();
                prop_assert!(max_diff(&lhs, &rhs) < 1e-13);
            }

            #[test]
            fn hermitian_action(u in state_strategy(27), v in state_strategy(27), site in 1usize..=3, axis in 0usize..3) {
                let op = site_operator(Axis::ALL[axis]);
                let lhs = inner(&u, &apply_site(&op, site, 3, &v).unwrap());
                let rhs = inner(&apply_site(&op, site, 3, &u).unwrap(), &v);
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }
}
