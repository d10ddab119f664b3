//! Global ground states by sector-wise diagonalization.
//!
//! Every model commutes with total `S^z`, so each magnetization sector is
//! solved on its own and the minimum is taken. All three models are also
//! invariant under the global spin flip `m -> -m`, which maps sector `M` onto
//! `-M` with the same spectrum; only `M >= 0` is diagonalized and
//! the mirrored energies are inferred.
//!
//! Degenerate ground manifolds (energy spread below [`DEGENERACY_GAP`]) are
//! resolved by taking the sector with the smallest `|M|`, preferring positive
//! `M`. Inside a sector the representative is the normalized projection of a
//! seeded start vector onto the lowest eigenspace, which the Lanczos and
//! dense paths both produce.

mod lanczos;
mod statefile;
mod tridiagonal;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{build_hamiltonian, sector_split, Hamiltonian, LinearMap, ModelSpec, SectorBasis};
use crate::operators::{inner, norm, C64};
use crate::par;

pub use lanczos::{lowest_eigenpair, Eigenpair, LanczosOptions, MAX_BASIS};
pub use statefile::{read_state, write_state, StateDump, STATE_MAGIC};
pub use tridiagonal::Tridiagonal;

/// Energy spread under which two levels count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Largest chain the dense path accepts (`3^6 = 729 <= 1000`).
pub const DENSE_MAX_SITES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub reorthogonalize: bool,
    /// Chains with `N <= dense_threshold` are diagonalized densely.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 2000, reorthogonalize: true, dense_threshold: 6, seed: 0x5151_2024 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.dense_threshold < 2 {
            return Err(Error::InvalidConfig("dense_threshold must be at least 2".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Same config forced onto the Lanczos path.
    pub fn lanczos_only(self) -> Self {
        Self { dense_threshold: 2, ..self }
    }

    fn lanczos_options(&self) -> LanczosOptions {
        LanczosOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
            reorthogonalize: self.reorthogonalize,
            max_basis: MAX_BASIS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    /// Unit vector in the full `3^N` space; the largest-magnitude amplitude
    /// is real and positive.
    pub vector: Vec<C64>,
    pub sector_m: i32,
    pub residual: f64,
    pub solver: SolverKind,
    pub site_count: usize,
}

impl GroundState {
    /// Wraps an arbitrary normalized state, e.g. a product state, so it can
    /// be fed to the feature extractors.
    pub fn from_vector(vector: Vec<C64>, site_count: usize) -> Result<Self> {
        let expected = crate::operators::hilbert_dim(site_count);
        if vector.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: vector.len() });
        }
        Ok(Self { energy: f64::NAN, vector, sector_m: 0, residual: f64::NAN, solver: SolverKind::Dense, site_count })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degeneracy {
    pub is_degenerate: bool,
    /// Gap between the two lowest levels over all sectors.
    pub gap: f64,
}

/// Ground state plus the gap to the next level.
#[derive(Debug, Clone)]
pub struct Solution {
    pub ground: GroundState,
    pub gap: f64,
}

impl Solution {
    pub fn is_degenerate(&self) -> bool {
        self.gap < DEGENERACY_GAP
    }
}

/// Lowest level of one sector.
#[derive(Debug, Clone)]
struct SectorLow {
    energy: f64,
    vector: Vec<C64>,
    residual: f64,
    /// Second level, when it was computed.
    second: Option<f64>,
}

/// Deterministic start vector for the sector of magnetization `m`.
pub fn start_vector(seed: u64, m: i32, dim: usize) -> Vec<C64> {
    let stream = seed ^ (m as i64 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn residual_of(op: &dyn LinearMap, v: &[C64]) -> (f64, f64) {
    let hv = op.apply(v);
    let e = inner(v, &hv).re;
    let r = hv.iter().zip(v).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
    (e, r)
}

fn dense_matrix(op: &dyn LinearMap) -> DMatrix<C64> {
    let d = op.dim();
    let mut m = DMatrix::zeros(d, d);
    let mut e = vec![C64::new(0.0, 0.0); d];
    for j in 0..d {
        e[j] = C64::new(1.0, 0.0);
        op.apply_into(&e, m.column_mut(j).as_mut_slice());
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

/// Sorted eigenvalues and matching eigenvectors (columns) of a sector.
fn dense_eigen(op: &dyn LinearMap) -> (Vec<f64>, DMatrix<C64>) {
    let eig = dense_matrix(op).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_sector(h: &Hamiltonian, sector: &SectorBasis, seed: u64) -> SectorLow {
    let op = h.restrict(sector);
    let (values, vectors) = dense_eigen(&op);
    let e0 = values[0];
    let start = start_vector(seed, sector.magnetization(), sector.len());
    // project the start vector onto the (numerically) degenerate lowest space
    let mut v = vec![C64::new(0.0, 0.0); sector.len()];
    for (k, _) in values.iter().enumerate().take_while(|(_, &e)| e - e0 < DEGENERACY_GAP) {
        let col = vectors.column(k);
        let c: C64 = col.iter().zip(&start).map(|(a, b)| a.conj() * b).sum();
        for (vi, a) in v.iter_mut().zip(col.iter()) {
            *vi += c * a;
        }
    }
    if norm(&v) < 1e-8 {
        v = vectors.column(0).iter().copied().collect();
    }
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let (energy, residual) = residual_of(&op, &v);
    SectorLow { energy, vector: v, residual, second: values.get(1).copied() }
}

fn lanczos_sector(h: &Hamiltonian, sector: &SectorBasis, cfg: &SolverConfig) -> Result<SectorLow> {
    let op = h.restrict(sector);
    let start = start_vector(cfg.seed, sector.magnetization(), sector.len());
    let pair = lowest_eigenpair(&op, &start, &[], &cfg.lanczos_options())?;
    Ok(SectorLow { energy: pair.value, vector: pair.vector, residual: pair.residual, second: None })
}

fn lanczos_second(h: &Hamiltonian, sector: &SectorBasis, ground: &[C64], cfg: &SolverConfig) -> Result<Option<f64>> {
    if sector.len() < 2 {
        return Ok(None);
    }
    let op = h.restrict(sector);
    let start = start_vector(cfg.seed.wrapping_add(1), sector.magnetization(), sector.len());
    let pair = lowest_eigenpair(&op, &start, &[ground], &cfg.lanczos_options())?;
    Ok(Some(pair.value))
}

/// Fixes the global phase: largest-magnitude amplitude real positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = v[best].conj() / v[best].norm();
    v.iter_mut().for_each(|z| *z *= phase);
    v[best] = C64::new(v[best].re, 0.0);
}

fn solve_inner(spec: &ModelSpec, cfg: &SolverConfig, kind: SolverKind, want_gap: bool) -> Result<Solution> {
    cfg.validate()?;
    let h = build_hamiltonian(spec)?;
    let sectors: Vec<SectorBasis> = sector_split(spec).into_iter().filter(|s| s.magnetization() >= 0).collect();
    let lows: Vec<Result<SectorLow>> = par::map(&sectors, |s| match kind {
        SolverKind::Dense => Ok(dense_sector(&h, s, cfg.seed)),
        SolverKind::Lanczos => lanczos_sector(&h, s, cfg),
    });
    let mut lows: Vec<SectorLow> = lows.into_iter().collect::<Result<_>>()?;

    let (argmin, e_min) = lows
        .iter()
        .enumerate()
        .map(|(i, l)| (i, l.energy))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one sector");
    // sectors are ordered by ascending M >= 0, so the first near-minimal one
    // has the smallest |M| and positive M wins the tie with -M
    let chosen = lows.iter().position(|l| l.energy - e_min < DEGENERACY_GAP).unwrap_or(argmin);

    let gap = if want_gap {
        let mut levels: Vec<f64> = Vec::with_capacity(2 * lows.len() + 1);
        for (s, l) in sectors.iter().zip(&lows) {
            levels.push(l.energy);
            if s.magnetization() > 0 {
                levels.push(l.energy);
            }
        }
        if sectors[argmin].magnetization() == 0 {
            let second = match kind {
                SolverKind::Dense => lows[argmin].second,
                SolverKind::Lanczos => lanczos_second(&h, &sectors[argmin], &lows[argmin].vector, cfg)?,
            };
            levels.extend(second);
        }
        levels.sort_by(f64::total_cmp);
        if levels.len() >= 2 {
            (levels[1] - levels[0]).max(0.0)
        } else {
            f64::INFINITY
        }
    } else {
        f64::NAN
    };

    let low = lows.swap_remove(chosen);
    let sector = &sectors[chosen];
    if !(low.residual <= cfg.tol) {
        return Err(Error::NotConverged { iterations: cfg.max_iterations, best_residual: low.residual });
    }
    let mut vector = sector.embed(&low.vector);
    fix_phase(&mut vector);
    Ok(Solution {
        ground: GroundState {
            energy: low.energy,
            vector,
            sector_m: sector.magnetization(),
            residual: low.residual,
            solver: kind,
            site_count: spec.site_count(),
        },
        gap,
    })
}

fn kind_for(spec: &ModelSpec, cfg: &SolverConfig) -> SolverKind {
    if spec.site_count() <= cfg.dense_threshold.min(DENSE_MAX_SITES) {
        SolverKind::Dense
    } else {
        SolverKind::Lanczos
    }
}

/// Global ground state of `spec`.
pub fn ground_state(spec: &ModelSpec, cfg: &SolverConfig) -> Result<GroundState> {
    Ok(solve_inner(spec, cfg, kind_for(spec, cfg), false)?.ground)
}

/// Ground state together with the gap to the next level.
pub fn solve(spec: &ModelSpec, cfg: &SolverConfig) -> Result<Solution> {
    solve_inner(spec, cfg, kind_for(spec, cfg), true)
}

/// Full dense diagonalization of every sector; the oracle for Lanczos.
pub fn dense_ground(spec: &ModelSpec) -> Result<GroundState> {
    dense_ground_with(spec, &SolverConfig::default())
}

/// [`dense_ground`] with the seed (and so the degenerate representative)
/// taken from `cfg`.
pub fn dense_ground_with(spec: &ModelSpec, cfg: &SolverConfig) -> Result<GroundState> {
    check_dense(spec)?;
    Ok(solve_inner(spec, cfg, SolverKind::Dense, false)?.ground)
}

fn check_dense(spec: &ModelSpec) -> Result<()> {
    if spec.site_count() > DENSE_MAX_SITES {
        return Err(Error::TooLargeForDense(spec.site_count()));
    }
    Ok(())
}

/// Sorted eigenvalues of the sector with magnetization `m`, densely.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub magnetization: i32,
    pub eigenvalues: Vec<f64>,
}

/// All eigenvalues of every sector (including negative `M`), nondecreasing
/// within each sector.
pub fn dense_spectrum(spec: &ModelSpec) -> Result<Vec<SectorSpectrum>> {
    check_dense(spec)?;
    let h = build_hamiltonian(spec)?;
    Ok(sector_split(spec)
        .iter()
        .map(|s| SectorSpectrum { magnetization: s.magnetization(), eigenvalues: dense_eigen(&h.restrict(s)).0 })
        .collect())
}

/// Lowest energy of one sector with the configured solver.
pub fn sector_ground_energy(spec: &ModelSpec, magnetization: i32, cfg: &SolverConfig) -> Result<f64> {
    let h = build_hamiltonian(spec)?;
    let sector = sector_split(spec)
        .into_iter()
        .find(|s| s.magnetization() == magnetization)
        .ok_or_else(|| Error::InvalidSpec(format!("no sector M = {magnetization}")))?;
    match kind_for(spec, cfg) {
        SolverKind::Dense => Ok(dense_sector(&h, &sector, cfg.seed).energy),
        SolverKind::Lanczos => Ok(lanczos_sector(&h, &sector, cfg)?.energy),
    }
}

/// Gap between the two lowest certified levels across all sectors.
pub fn degeneracy_probe(spec: &ModelSpec, cfg: &SolverConfig, gap_tol: f64) -> Result<Degeneracy> {
    let sol = solve(spec, cfg)?;
    Ok(Degeneracy { is_degenerate: sol.gap < gap_tol, gap: sol.gap })
}

/// `<v, H v>` for a unit vector `v`.
pub fn rayleigh_quotient(h: &Hamiltonian, v: &[C64]) -> f64 {
    inner(v, &h.apply(v)).re / inner(v, v).re
}
