//! The three periodic spin-1 chains as matrix-free operators, plus their
//! total-`S^z` sectors.
//!
//! Every model is a sum of nearest-neighbour two-site terms and (for H1) an
//! on-site `(S^z)^2` term. The fast path stores each bond as a sparse 9x9
//! gate on the pair `(d_l, d_{l+1})`; [`Hamiltonian::apply_reference`] builds
//! the same action from [`crate::operators`] one product term at a time and
//! serves as the oracle for the gates.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    apply_site, apply_two_site, decode_digits, digit_to_m, hilbert_dim, index_magnetization, inner,
    site_operator, site_stride, Axis, C64,
};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    H1,
    H2,
    H3,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::H1, Model::H2, Model::H3];

    pub fn name(self) -> &'static str {
        match self {
            Model::H1 => "H1",
            Model::H2 => "H2",
            Model::H3 => "H3",
        }
    }

    /// Number of tuning parameters (`p1`, and `p2` when two).
    pub fn param_count(self) -> usize {
        match self {
            Model::H1 | Model::H2 => 2,
            Model::H3 => 1,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "H1" => Ok(Model::H1),
            "H2" => Ok(Model::H2),
            "H3" => Ok(Model::H3),
            _ => Err(Error::InvalidSpec(format!("unknown model {s:?} (expected h1, h2 or h3)"))),
        }
    }
}

/// Model parameters. `J` of H1 is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Params {
    /// XXZ chain with single-ion anisotropy: `(J_z, D)`.
    H1 { jz: f64, d: f64 },
    /// Bond-alternating XXZ chain: `(Δ, δ)`.
    H2 { anisotropy: f64, alternation: f64 },
    /// Bilinear-biquadratic chain: `θ` in radians.
    H3 { theta: f64 },
}

impl Params {
    pub fn model(&self) -> Model {
        match self {
            Params::H1 { .. } => Model::H1,
            Params::H2 { .. } => Model::H2,
            Params::H3 { .. } => Model::H3,
        }
    }

    pub fn p1(&self) -> f64 {
        match *self {
            Params::H1 { jz, .. } => jz,
            Params::H2 { anisotropy, .. } => anisotropy,
            Params::H3 { theta } => theta,
        }
    }

    pub fn p2(&self) -> Option<f64> {
        match *self {
            Params::H1 { d, .. } => Some(d),
            Params::H2 { alternation, .. } => Some(alternation),
            Params::H3 { .. } => None,
        }
    }

    /// Rebuilds parameters from `(p1, p2)` columns.
    pub fn from_columns(model: Model, p1: f64, p2: Option<f64>) -> Result<Self> {
        let need = |p2: Option<f64>| p2.ok_or_else(|| Error::InvalidSpec(format!("{model} needs p2")));
        Ok(match model {
            Model::H1 => Params::H1 { jz: p1, d: need(p2)? },
            Model::H2 => Params::H2 { anisotropy: p1, alternation: need(p2)? },
            Model::H3 => {
                if p2.is_some() {
                    return Err(Error::InvalidSpec("H3 takes a single parameter".into()));
                }
                Params::H3 { theta: p1 }
            }
        })
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Params::H1 { jz, d } => write!(f, "H1(jz={jz}, d={d})"),
            Params::H2 { anisotropy, alternation } => write!(f, "H2(delta={anisotropy}, alternation={alternation})"),
            Params::H3 { theta } => write!(f, "H3(theta={theta})"),
        }
    }
}

/// A model, its parameters and the chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    params: Params,
    site_count: usize,
}

impl ModelSpec {
    pub fn new(params: Params, site_count: usize) -> Result<Self> {
        if site_count < 2 {
            return Err(Error::InvalidSpec(format!("chain needs at least 2 sites, got {site_count}")));
        }
        // 3^N has to index comfortably into memory and u32 sector tables.
        if site_count > 16 {
            return Err(Error::InvalidSpec(format!("N = {site_count} is beyond exact diagonalization")));
        }
        let params = match params {
            Params::H2 { .. } if site_count % 2 == 1 => {
                return Err(Error::InvalidSpec(format!(
                    "bond alternation needs an even ring, got N = {site_count}"
                )))
            }
            Params::H3 { theta } => Params::H3 { theta: wrap_angle(theta) },
            p => p,
        };
        let finite = params.p1().is_finite() && params.p2().map_or(true, f64::is_finite);
        if !finite {
            return Err(Error::InvalidSpec(format!("non-finite parameters {params}")));
        }
        Ok(Self { params, site_count })
    }

    pub fn h1(jz: f64, d: f64, site_count: usize) -> Result<Self> {
        Self::new(Params::H1 { jz, d }, site_count)
    }

    pub fn h2(anisotropy: f64, alternation: f64, site_count: usize) -> Result<Self> {
        Self::new(Params::H2 { anisotropy, alternation }, site_count)
    }

    pub fn h3(theta: f64, site_count: usize) -> Result<Self> {
        Self::new(Params::H3 { theta }, site_count)
    }

    pub fn model(&self) -> Model {
        self.params.model()
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn dim(&self) -> usize {
        hilbert_dim(self.site_count)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Anything that acts linearly on vectors of a fixed dimension.
pub trait LinearMap {
    fn dim(&self) -> usize;
    fn apply_into(&self, v: &[C64], out: &mut [C64]);

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        self.apply_into(v, &mut out);
        out
    }
}

/// A two-site gate stored by rows: `rows[p]` lists `(q, value)` with
/// `G[p][q] != 0`, where `p = 3 d_a + d_b` indexes the pair state.
#[derive(Debug, Clone)]
struct Bond {
    site_a: usize,
    site_b: usize,
    rows: [Vec<(u8, C64)>; 9],
}

pub type Gate = [[C64; 9]; 9];

fn gate_zero() -> Gate {
    [[ZERO; 9]; 9]
}

/// `op_a ⊗ op_b` on the two-site space.
fn kron_pair(axis_a: Axis, axis_b: Axis) -> Gate {
    let (a, b) = (site_operator(axis_a), site_operator(axis_b));
    let mut g = gate_zero();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    g[3 * i + k][3 * j + l] = a.get(i, j) * b.get(k, l);
                }
            }
        }
    }
    g
}

fn gate_add(acc: &mut Gate, g: &Gate, scale: f64) {
    for (ra, rg) in acc.iter_mut().zip(g) {
        for (x, y) in ra.iter_mut().zip(rg) {
            *x += y * scale;
        }
    }
}

fn gate_mul(a: &Gate, b: &Gate) -> Gate {
    let mut out = gate_zero();
    for i in 0..9 {
        for k in 0..9 {
            if a[i][k] == ZERO {
                continue;
            }
            for j in 0..9 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// `S_a · S_b` on the two-site space.
pub fn heisenberg_gate() -> Gate {
    let mut g = gate_zero();
    for axis in Axis::ALL {
        gate_add(&mut g, &kron_pair(axis, axis), 1.0);
    }
    g
}

/// `x (SxSx + SySy) + z SzSz`.
fn xxz_gate(xy: f64, zz: f64) -> Gate {
    let mut g = gate_zero();
    gate_add(&mut g, &kron_pair(Axis::X, Axis::X), xy);
    gate_add(&mut g, &kron_pair(Axis::Y, Axis::Y), xy);
    gate_add(&mut g, &kron_pair(Axis::Z, Axis::Z), zz);
    g
}

/// Bilinear-biquadratic bond `cos θ (S·S) + sin θ (S·S)^2`, with the square
/// formed as the gate product (two successive bond applications).
pub fn bilinear_biquadratic_gate(theta: f64) -> Gate {
    let b = heisenberg_gate();
    let b2 = gate_mul(&b, &b);
    let mut g = gate_zero();
    gate_add(&mut g, &b, theta.cos());
    gate_add(&mut g, &b2, theta.sin());
    g
}

fn sparse_rows(g: &Gate) -> [Vec<(u8, C64)>; 9] {
    std::array::from_fn(|p| {
        (0..9)
            .filter(|&q| g[p][q].norm() > 1e-15)
            .map(|q| (q as u8, g[p][q]))
            .collect()
    })
}

/// A model Hamiltonian on a periodic ring (site `N + 1` is site 1).
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    spec: ModelSpec,
    bonds: Vec<Bond>,
    /// On-site diagonal energy per local digit (the `D (S^z)^2` term).
    onsite: [f64; 3],
}

/// Bond-alternation factor `1 - δ (-1)^l` for 1-based bond index `l`.
pub fn alternation_factor(alternation: f64, bond: usize) -> f64 {
    let sign = if bond % 2 == 0 { 1.0 } else { -1.0 };
    1.0 - alternation * sign
}

/// Builds the matrix-free Hamiltonian of `spec`.
pub fn build_hamiltonian(spec: &ModelSpec) -> Result<Hamiltonian> {
    let spec = ModelSpec::new(spec.params, spec.site_count)?;
    let n = spec.site_count;
    let bond_gate = |l: usize| -> Gate {
        match spec.params {
            Params::H1 { jz, .. } => xxz_gate(1.0, jz),
            Params::H2 { anisotropy, alternation } => {
                let f = alternation_factor(alternation, l);
                xxz_gate(f, f * anisotropy)
            }
            Params::H3 { theta } => bilinear_biquadratic_gate(theta),
        }
    };
    let bonds = (1..=n)
        .map(|l| Bond { site_a: l, site_b: l % n + 1, rows: sparse_rows(&bond_gate(l)) })
        .collect();
    let onsite = match spec.params {
        Params::H1 { d, .. } => [d, 0.0, d],
        _ => [0.0; 3],
    };
    Ok(Hamiltonian { spec, bonds, onsite })
}

impl Hamiltonian {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn site_count(&self) -> usize {
        self.spec.site_count
    }

    /// `(H v)[i]` for basis state `i`, reading `v` through `fetch`.
    #[inline]
    fn row_action(&self, index: usize, digits: &mut [u8], fetch: impl Fn(usize) -> C64) -> C64 {
        let n = self.spec.site_count;
        decode_digits(index, digits);
        let mut acc = ZERO;
        let diag: f64 = digits.iter().map(|&d| self.onsite[d as usize]).sum();
        if diag != 0.0 {
            acc += fetch(index) * diag;
        }
        for bond in &self.bonds {
            let (da, db) = (digits[bond.site_a - 1] as isize, digits[bond.site_b - 1] as isize);
            let (sa, sb) = (site_stride(n, bond.site_a) as isize, site_stride(n, bond.site_b) as isize);
            for &(q, val) in &bond.rows[(3 * da + db) as usize] {
                let (qa, qb) = ((q / 3) as isize, (q % 3) as isize);
                let j = index as isize + (qa - da) * sa + (qb - db) * sb;
                acc += val * fetch(j as usize);
            }
        }
        acc
    }

    /// Action built term by term from site operators; the oracle for the
    /// gate fast path. `(S_l·S_{l+1})^2` is two successive bond applications.
    pub fn apply_reference(&self, v: &[C64]) -> Result<Vec<C64>> {
        let n = self.spec.site_count;
        let mut out = vec![ZERO; v.len()];
        let add = |out: &mut Vec<C64>, w: &[C64], c: f64| {
            for (o, x) in out.iter_mut().zip(w) {
                *o += x * c;
            }
        };
        let bond_sum = |l: usize, w: &[C64], coeffs: [f64; 3]| -> Result<Vec<C64>> {
            let mut acc = vec![ZERO; w.len()];
            for (axis, c) in Axis::ALL.into_iter().zip(coeffs) {
                if c == 0.0 {
                    continue;
                }
                let op = site_operator(axis);
                let t = apply_two_site(&op, l, &op, l % n + 1, n, w)?;
                add(&mut acc, &t, c);
            }
            Ok(acc)
        };
        for l in 1..=n {
            match self.spec.params {
                Params::H1 { jz, .. } => add(&mut out, &bond_sum(l, v, [1.0, 1.0, jz])?, 1.0),
                Params::H2 { anisotropy, alternation } => {
                    let f = alternation_factor(alternation, l);
                    add(&mut out, &bond_sum(l, v, [1.0, 1.0, anisotropy])?, f)
                }
                Params::H3 { theta } => {
                    let once = bond_sum(l, v, [1.0; 3])?;
                    let twice = bond_sum(l, &once, [1.0; 3])?;
                    add(&mut out, &once, theta.cos());
                    add(&mut out, &twice, theta.sin());
                }
            }
        }
        if let Params::H1 { d, .. } = self.spec.params {
            let z = site_operator(Axis::Z);
            for l in 1..=n {
                let once = apply_site(&z, l, n, v)?;
                let twice = apply_site(&z, l, n, &once)?;
                add(&mut out, &twice, d);
            }
        }
        Ok(out)
    }

    /// The Hamiltonian restricted to one magnetization sector.
    pub fn restrict<'a>(&'a self, sector: &'a SectorBasis) -> SectorOperator<'a> {
        SectorOperator { hamiltonian: self, sector }
    }
}

impl LinearMap for Hamiltonian {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let mut digits = vec![0u8; self.spec.site_count];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_action(i, &mut digits, |j| v[j]);
        }
    }
}

/// Basis states with fixed total magnetization.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    magnetization: i32,
    site_count: usize,
    states: Vec<u32>,
    /// Full index to position within that index's own sector.
    positions: Arc<Vec<u32>>,
}

impl SectorBasis {
    pub fn magnetization(&self) -> i32 {
        self.magnetization
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Full-space indices, ascending.
    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Sector position of a full-space index, if it belongs here.
    pub fn position(&self, index: usize) -> Option<usize> {
        (index_magnetization(index, self.site_count) == self.magnetization)
            .then(|| self.positions[index] as usize)
    }

    /// Zero-pads a sector vector into the full space.
    pub fn embed(&self, v: &[C64]) -> Vec<C64> {
        let mut full = vec![ZERO; hilbert_dim(self.site_count)];
        for (&s, &x) in self.states.iter().zip(v) {
            full[s as usize] = x;
        }
        full
    }

    /// Restricts a full-space vector to this sector's components.
    pub fn project(&self, full: &[C64]) -> Vec<C64> {
        self.states.iter().map(|&s| full[s as usize]).collect()
    }
}

/// Partitions the `3^N` basis of `spec` by total magnetization, `M = -N..=N`.
pub fn sector_split(spec: &ModelSpec) -> Vec<SectorBasis> {
    sectors_for(spec.site_count())
}

pub fn sectors_for(site_count: usize) -> Vec<SectorBasis> {
    let n = site_count as i32;
    let dim = hilbert_dim(site_count);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); (2 * n + 1) as usize];
    let mut positions = vec![0u32; dim];
    for (i, pos) in positions.iter_mut().enumerate() {
        let bucket = &mut buckets[(index_magnetization(i, site_count) + n) as usize];
        *pos = bucket.len() as u32;
        bucket.push(i as u32);
    }
    let positions = Arc::new(positions);
    buckets
        .into_iter()
        .enumerate()
        .map(|(k, states)| SectorBasis {
            magnetization: k as i32 - n,
            site_count,
            states,
            positions: Arc::clone(&positions),
        })
        .collect()
}

/// Hamiltonian acting on the coefficients of one sector.
pub struct SectorOperator<'a> {
    hamiltonian: &'a Hamiltonian,
    sector: &'a SectorBasis,
}

impl SectorOperator<'_> {
    pub fn sector(&self) -> &SectorBasis {
        self.sector
    }
}

impl LinearMap for SectorOperator<'_> {
    fn dim(&self) -> usize {
        self.sector.len()
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let mut digits = vec![0u8; self.sector.site_count];
        let positions = &self.sector.positions;
        for (o, &s) in out.iter_mut().zip(&self.sector.states) {
            // every model conserves M, so targets always lie in this sector
            *o = self.hamiltonian.row_action(s as usize, &mut digits, |j| v[positions[j] as usize]);
        }
    }
}

/// Largest `|<u, h v> - <h u, v>|` over `trials` random complex pairs.
pub fn hermiticity_check(h: &dyn LinearMap, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = h.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let u: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let lhs = inner(&u, &h.apply(&v));
        let rhs = inner(&h.apply(&u), &v);
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// Local `m` of each site of a basis index, site 1 first.
pub fn local_magnetizations(index: usize, site_count: usize) -> Vec<i32> {
    let mut digits = vec![0u8; site_count];
    decode_digits(index, &mut digits);
    digits.into_iter().map(digit_to_m).collect()
}

/// θ value where the bilinear term vanishes.
pub const PURE_BIQUADRATIC: f64 = PI / 2.0;
