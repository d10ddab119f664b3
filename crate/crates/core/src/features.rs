//! Spin-correlation features of a ground state.
//!
//! For an `N`-site ring the feature vector holds, per axis `k ∈ {x, y, z}`,
//! the pair correlations `<S_1^k S_i^k>` for `i = 1..=N/2+1` (with `i = 1`
//! the on-site `<(S_1^k)^2>`), followed by the three string correlations
//! `<prod_j S_j^k>`. Column order is frozen:
//! `cxx_1.., cyy_1.., czz_1.., gx, gy, gz`, giving `3 (N/2 + 1) + 3` entries
//! (24 at `N = 12`).

use crate::eigensolver::GroundState;
use crate::error::{Error, Result};
use crate::hamiltonians::{Model, ModelSpec, Params};
use crate::labels::PhaseLabel;
use crate::operators::{apply_site, apply_site_into, inner, norm, site_operator, Axis, C64};

/// Largest imaginary residue tolerated on a Hermitian expectation.
pub const REALNESS_TOL: f64 = 1e-10;

/// Smallest feature norm accepted by [`spatial_sign`].
pub const MIN_NORM: f64 = 1e-12;

/// Pair correlations per axis for an `N`-site ring.
pub fn pair_count(site_count: usize) -> usize {
    site_count / 2 + 1
}

pub fn feature_count(site_count: usize) -> usize {
    3 * pair_count(site_count) + 3
}

fn axis_tag(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "xx",
        Axis::Y => "yy",
        Axis::Z => "zz",
    }
}

/// Column names in frozen order.
pub fn feature_names(site_count: usize) -> Vec<String> {
    let k = pair_count(site_count);
    let mut names = Vec::with_capacity(feature_count(site_count));
    for axis in Axis::ALL {
        for i in 1..=k {
            names.push(format!("c{}_{i}", axis_tag(axis)));
        }
    }
    names.extend(["gx", "gy", "gz"].map(String::from));
    names
}

/// Position of a named feature, e.g. `czz_6` or `gx`.
pub fn feature_index(name: &str, site_count: usize) -> Option<usize> {
    feature_names(site_count).iter().position(|n| n == name)
}

fn axis_slot(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}

fn check_normalized(state: &GroundState) -> Result<()> {
    let n = norm(&state.vector);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidSpec(format!("state norm {n} is not 1")));
    }
    Ok(())
}

fn real_part(z: C64) -> Result<f64> {
    if z.im.abs() > REALNESS_TOL {
        return Err(Error::NotReal(z.im.abs()));
    }
    Ok(z.re)
}

/// `Re <ψ| S_1^k S_i^k |ψ>`; `i = 1` is `<(S_1^k)^2>`.
pub fn pair_correlation(state: &GroundState, axis: Axis, i: usize) -> Result<f64> {
    let n = state.site_count;
    let max = pair_count(n);
    if i == 0 || i > max {
        return Err(Error::CorrelationIndex { index: i, max });
    }
    check_normalized(state)?;
    real_part(pair_expectation(state, axis, 1, i)?)
}

/// `<ψ| S_a^k S_b^k |ψ>` for arbitrary sites, kept complex.
pub fn pair_expectation(state: &GroundState, axis: Axis, site_a: usize, site_b: usize) -> Result<C64> {
    let n = state.site_count;
    let op = site_operator(axis);
    let once = apply_site(&op, site_b, n, &state.vector)?;
    let twice = apply_site(&op, site_a, n, &once)?;
    Ok(inner(&state.vector, &twice))
}

/// `Re <ψ| prod_j S_j^k |ψ>`.
pub fn global_correlation(state: &GroundState, axis: Axis) -> Result<f64> {
    check_normalized(state)?;
    let n = state.site_count;
    let op = site_operator(axis);
    let mut cur = state.vector.clone();
    let mut next = vec![C64::new(0.0, 0.0); cur.len()];
    for site in 1..=n {
        apply_site_into(&op, site, n, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    real_part(inner(&state.vector, &cur))
}

/// One labeled (or not yet labeled) point of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub params: Params,
    pub site_count: usize,
    pub features: Vec<f64>,
    pub degenerate: bool,
    pub label: Option<PhaseLabel>,
}

impl FeatureRow {
    pub fn model(&self) -> Model {
        self.params.model()
    }

    pub fn pair(&self, axis: Axis, i: usize) -> f64 {
        self.features[axis_slot(axis) * pair_count(self.site_count) + i - 1]
    }

    pub fn global(&self, axis: Axis) -> f64 {
        self.features[3 * pair_count(self.site_count) + axis_slot(axis)]
    }
}

/// Computes every feature of `state` in frozen column order.
pub fn extract_features(state: &GroundState, spec: &ModelSpec) -> Result<FeatureRow> {
    let n = spec.site_count();
    if n % 2 == 1 {
        return Err(Error::InvalidSpec(format!("features need an even ring, got N = {n}")));
    }
    if state.site_count != n {
        return Err(Error::DimensionMismatch { expected: n, actual: state.site_count });
    }
    let mut features = Vec::with_capacity(feature_count(n));
    for axis in Axis::ALL {
        for i in 1..=pair_count(n) {
            features.push(pair_correlation(state, axis, i)?);
        }
    }
    for axis in Axis::ALL {
        features.push(global_correlation(state, axis)?);
    }
    Ok(FeatureRow { params: spec.params(), site_count: n, features, degenerate: false, label: None })
}

/// A row whose feature vector has unit Euclidean norm. Only
/// [`spatial_sign`] builds these, so holding one proves normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRow {
    row: FeatureRow,
}

impl NormalizedRow {
    pub fn features(&self) -> &[f64] {
        &self.row.features
    }

    pub fn label(&self) -> Option<PhaseLabel> {
        self.row.label
    }

    pub fn params(&self) -> Params {
        self.row.params
    }

    pub fn degenerate(&self) -> bool {
        self.row.degenerate
    }

    pub fn row(&self) -> &FeatureRow {
        &self.row
    }
}

/// Spatial-sign transform: scales the feature vector to unit norm.
pub fn spatial_sign(row: &FeatureRow) -> Result<NormalizedRow> {
    let n = row.features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > MIN_NORM) {
        return Err(Error::ZeroNorm(n));
    }
    let mut out = row.clone();
    out.features.iter_mut().for_each(|x| *x /= n);
    Ok(NormalizedRow { row: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{dense_ground, ground_state, SolverConfig};
    use crate::operators::basis_state;

    fn polarized(n: usize) -> GroundState {
        GroundState::from_vector(basis_state(&vec![1; n]).unwrap(), n).unwrap()
    }

    #[test]
    fn polarized_product_state() {
        let s = polarized(4);
        for i in 1..=3 {
            assert!((pair_correlation(&s, Axis::Z, i).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(pair_correlation(&s, Axis::X, 2).unwrap().abs() < 1e-15);
        assert!((global_correlation(&s, Axis::Z).unwrap() - 1.0).abs() < 1e-15);
        assert!(global_correlation(&s, Axis::X).unwrap().abs() < 1e-15);
        assert!((pair_correlation(&s, Axis::X, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_site_kills_string() {
        let s = GroundState::from_vector(basis_state(&[1, 0, -1, 1]).unwrap(), 4).unwrap();
        assert_eq!(global_correlation(&s, Axis::Z).unwrap(), 0.0);
    }

    #[test]
    fn index_range_checked() {
        let s = polarized(4);
        assert!(matches!(pair_correlation(&s, Axis::Z, 0), Err(Error::CorrelationIndex { .. })));
        assert!(matches!(pair_correlation(&s, Axis::Z, 4), Err(Error::CorrelationIndex { index: 4, max: 3 })));
    }

    #[test]
    fn feature_counts() {
        assert_eq!(feature_count(12), 24);
        assert_eq!(feature_count(8), 18);
        assert_eq!(feature_names(12).len(), 24);
        assert_eq!(feature_index("czz_6", 12), Some(2 * 7 + 5));
        assert_eq!(feature_index("cxx_2", 12), Some(1));
        assert_eq!(feature_index("gz", 12), Some(23));
        assert_eq!(feature_index("czz_6", 8), None);
    }

    /// Dense-oracle expectation built from explicit Kronecker matrices.
    fn dense_expectation(v: &[C64], axis: Axis, a: usize, b: usize, n: usize) -> C64 {
        use crate::operators::dense_oracle::{embed, matmul, matvec};
        let op = site_operator(axis);
        let m = matmul(&embed(&op, a, n), &embed(&op, b, n));
        inner(v, &matvec(&m, v))
    }

    #[test]
    fn heisenberg_ring_nearest_neighbour() {
        let spec = ModelSpec::h1(1.0, 0.0, 4).unwrap();
        let gs = dense_ground(&spec).unwrap();
        let got = pair_correlation(&gs, Axis::Z, 2).unwrap();
        let want = dense_expectation(&gs.vector, Axis::Z, 1, 2, 4);
        assert!((got - want.re).abs() < 1e-9);
        // singlet ground state of the isotropic ring: E = 3 N <S1^z S2^z>
        assert!((3.0 * 4.0 * got - gs.energy).abs() < 1e-9);
    }

    #[test]
    fn polarized_ground_features() {
        let spec = ModelSpec::h1(-4.0, -4.0, 4).unwrap();
        let gs = dense_ground(&spec).unwrap();
        let row = extract_features(&gs, &spec).unwrap();
        assert_eq!(row.features.len(), 12);
        for i in 1..=3 {
            assert!((row.pair(Axis::Z, i) - 1.0).abs() < 1e-12);
        }
        for axis in [Axis::X, Axis::Y] {
            assert!((row.pair(axis, 1) - 0.5).abs() < 1e-12);
            assert!(row.pair(axis, 2).abs() < 1e-12 && row.pair(axis, 3).abs() < 1e-12);
            assert!(row.global(axis).abs() < 1e-12);
        }
        assert!((row.global(Axis::Z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_invariance() {
        let spec = ModelSpec::h3(0.4, 6).unwrap();
        let gs = dense_ground(&spec).unwrap();
        let a = extract_features(&gs, &spec).unwrap();
        let phase = C64::from_polar(1.0, 1.234);
        let rotated = GroundState { vector: gs.vector.iter().map(|z| z * phase).collect(), ..gs.clone() };
        let b = extract_features(&rotated, &spec).unwrap();
        for (x, y) in a.features.iter().zip(&b.features) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bounded_and_real_on_ground_states() {
        let cfg = SolverConfig::default();
        for spec in [
            ModelSpec::h1(0.2, 1.5, 6).unwrap(),
            ModelSpec::h2(-0.5, 0.7, 6).unwrap(),
            ModelSpec::h3(3.7, 6).unwrap(),
        ] {
            let gs = ground_state(&spec, &cfg).unwrap();
            let row = extract_features(&gs, &spec).unwrap();
            for axis in Axis::ALL {
                let onsite = row.pair(axis, 1);
                assert!((0.0..=1.0 + 1e-12).contains(&onsite));
                for i in 1..=4 {
                    assert!(row.pair(axis, i).abs() <= 1.0 + 1e-12);
                }
                for i in 1..=4 {
                    let z = pair_expectation(&gs, axis, 1, i).unwrap();
                    assert!(z.im.abs() <= REALNESS_TOL);
                }
            }
        }
    }

    #[test]
    fn cyclic_consistency_uniform_models() {
        for spec in [ModelSpec::h1(0.6, 0.2, 4).unwrap(), ModelSpec::h3(0.5, 4).unwrap()] {
            let sol = crate::eigensolver::solve(&spec, &SolverConfig::default()).unwrap();
            assert!(!sol.is_degenerate());
            for axis in Axis::ALL {
                let a = pair_expectation(&sol.ground, axis, 1, 2).unwrap();
                let b = pair_expectation(&sol.ground, axis, 2, 3).unwrap();
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn spatial_sign_examples() {
        let mut row = FeatureRow {
            params: Params::H3 { theta: 0.0 },
            site_count: 2,
            features: vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            degenerate: false,
            label: Some(PhaseLabel::Haldane),
        };
        let n = spatial_sign(&row).unwrap();
        assert!((n.features()[0] - 0.6).abs() < 1e-15 && (n.features()[1] - 0.8).abs() < 1e-15);
        assert_eq!(n.label(), Some(PhaseLabel::Haldane));
        let again = spatial_sign(n.row()).unwrap();
        for (a, b) in again.features().iter().zip(n.features()) {
            assert!((a - b).abs() < 1e-15);
        }
        row.features.iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(spatial_sign(&row), Err(Error::ZeroNorm(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn row(features: Vec<f64>) -> FeatureRow {
            FeatureRow { params: Params::H1 { jz: 0.0, d: 0.0 }, site_count: 4, features, degenerate: false, label: None }
        }

        proptest! {
            #[test]
            fn unit_norm_and_scale_invariant(v in proptest::collection::vec(-3.0f64..3.0, 12), c in 0.01f64..100.0) {
                let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assume!(nrm > 1e-6);
                let a = spatial_sign(&row(v.clone())).unwrap();
                let unit = a.features().iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!((unit - 1.0).abs() < 1e-12);
                let cos: f64 = a.features().iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / nrm;
                prop_assert!((cos - 1.0).abs() < 1e-12);
                let b = spatial_sign(&row(v.iter().map(|x| x * c).collect())).unwrap();
                for (x, y) in a.features().iter().zip(b.features()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                let again = spatial_sign(a.row()).unwrap();
                for (x, y) in a.features().iter().zip(again.features()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
