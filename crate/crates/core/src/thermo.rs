//! Exact-diagonalization thermal states and observables.
//!
//! Hamiltonians here conserve `(N_↑, N_↓)`, so a thermal state is stored as a
//! collection of per-sector eigendecompositions. Two cost controls keep the
//! desk-scale instances inside the dense-eigensolve ceiling:
//!
//! - sectors whose Gershgorin lower bound lies provably above the thermal
//!   window `E₀ + cut` are skipped; the skipped Boltzmann weight is bounded
//!   rigorously and reported;
//! - for spin-symmetric Hamiltonians the `(a, b)` and `(b, a)` sectors are
//!   related by the exact spin-swap unitary, so only one of each pair is
//!   diagonalized and eigenvectors are transported through the signed mode
//!   permutation when observables are evaluated in the mirror sector.

use crate::error::{CoreError, Result};
use crate::fock::{FockBasis, ProductBasisState, Sector, SparseOperator, SPIN_DOWN, SPIN_UP};
use crate::lattice::{parity, Lattice};
use crate::linalg::eigh;
use crate::C64;
use ndarray::Array2;
use serde::Serialize;
use std::collections::HashMap;

/// One `(N_↑, N_↓)` sector of a thermal state.
pub struct SectorEigen {
    pub n_up: u32,
    pub n_down: u32,
    pub basis: FockBasis,
    pub vals: Vec<f64>,
    pub vecs: Array2<C64>,
    /// Set when this sector's data was transported from its spin mirror.
    pub mirrored: bool,
}

/// Thermal state `e^{−βH}/Z` of a sector-conserving Hermitian Hamiltonian.
pub struct ThermalState {
    pub beta: f64,
    pub sectors: Vec<SectorEigen>,
    /// Global ground energy.
    pub e0: f64,
    /// `Σ_k e^{−β(E_k − E₀)}` over all kept sectors.
    pub z_shifted: f64,
    /// Rigorous bound on the relative weight of skipped sectors.
    pub skipped_weight: f64,
}

/// Options controlling the sector sweep.
#[derive(Debug, Clone)]
pub struct ThermalOptions {
    /// Sectors with provable minimum energy above `E₀ + window` are skipped.
    /// `f64::INFINITY` disables skipping.
    pub window: f64,
    /// Exploit the spin-swap symmetry (valid for all Hamiltonians built by
    /// this crate's model module).
    pub spin_symmetric: bool,
}

impl Default for ThermalOptions {
    fn default() -> Self {
        ThermalOptions { window: f64::INFINITY, spin_symmetric: false }
    }
}

impl ThermalOptions {
    /// Window that keeps the skipped relative weight below `tol` for a total
    /// dimension `dim_total`.
    pub fn windowed(beta: f64, dim_total: f64, tol: f64) -> Self {
        let window = ((dim_total / tol).ln() / beta).max(1.0);
        ThermalOptions { window, spin_symmetric: true }
    }
}

fn gershgorin_lower(h: &SparseOperator) -> f64 {
    let mut diag = vec![0.0f64; h.dim];
    let mut radius = vec![0.0f64; h.dim];
    let mut map: HashMap<(u32, u32), C64> = HashMap::new();
    for &(r, c, v) in &h.entries {
        *map.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v;
    }
    for (&(r, c), &v) in &map {
        if r == c {
            diag[r as usize] += v.re;
        } else {
            radius[r as usize] += v.norm();
        }
    }
    (0..h.dim).map(|i| diag[i] - radius[i]).fold(f64::INFINITY, f64::min)
}

/// Signed spin-swap permutation from an `(a, b)` sector basis onto the
/// `(b, a)` one: index map plus the fermionic sign `(−1)^{#doubly occupied}`.
fn spin_swap_map(src: &FockBasis, dst: &FockBasis) -> Vec<(usize, f64)> {
    src.states
        .iter()
        .map(|s| {
            let k = src.sites.len();
            let mut e = 0u64;
            let mut doubles = 0u32;
            for pos in 0..k {
                let up = s.occupied(2 * pos);
                let dn = s.occupied(2 * pos + 1);
                if up {
                    e |= 1 << (2 * pos + 1);
                }
                if dn {
                    e |= 1 << (2 * pos);
                }
                if up && dn {
                    doubles += 1;
                }
            }
            let j = dst
                .index_of(&ProductBasisState { elec: e, phonon: s.phonon.clone() })
                .expect("swapped state in mirror basis");
            (j, if doubles % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

impl ThermalState {
    /// Diagonalize `builder(basis)` in every `(N_↑, N_↓)` sector of the sites
    /// at truncation `n_max`.
    pub fn build<F>(
        sites: &[usize],
        n_max: usize,
        beta: f64,
        builder: F,
        opts: &ThermalOptions,
    ) -> Result<ThermalState>
    where
        F: Fn(&FockBasis) -> Result<SparseOperator>,
    {
        let ns = sites.len() as u32;
        struct Pending {
            n_up: u32,
            n_down: u32,
            basis: FockBasis,
            h: SparseOperator,
            lower: f64,
        }
        let mut pending = Vec::new();
        for n_up in 0..=ns {
            for n_down in 0..=ns {
                if opts.spin_symmetric && n_down < n_up {
                    continue; // mirror of (n_down, n_up)
                }
                let basis = FockBasis::enumerate(sites, n_max, Sector::Spin(n_up, n_down))?;
                let h = builder(&basis)?;
                if h.hermiticity_defect() > 1e-9 {
                    return Err(CoreError::Numerical(
                        "thermal state requires a Hermitian Hamiltonian".into(),
                    ));
                }
                let lower = gershgorin_lower(&h);
                pending.push(Pending { n_up, n_down, basis, h, lower });
            }
        }
        pending.sort_by(|a, b| a.lower.partial_cmp(&b.lower).unwrap());

        let mut sectors: Vec<SectorEigen> = Vec::new();
        let mut e0 = f64::INFINITY;
        let mut skipped_weight_abs = 0.0f64;
        for p in pending {
            if p.lower > e0 + opts.window {
                let mult = if opts.spin_symmetric && p.n_up != p.n_down { 2.0 } else { 1.0 };
                skipped_weight_abs += mult * p.basis.dim() as f64 * (-beta * (p.lower - e0)).exp();
                continue;
            }
            let (vals, vecs) = eigh(&p.h.to_dense())?;
            e0 = e0.min(vals[0]);
            sectors.push(SectorEigen {
                n_up: p.n_up,
                n_down: p.n_down,
                basis: p.basis,
                vals: vals.to_vec(),
                vecs,
                mirrored: false,
            });
        }
        if opts.spin_symmetric {
            let mut mirrors = Vec::new();
            for s in &sectors {
                if s.n_up == s.n_down {
                    continue;
                }
                let basis = FockBasis::enumerate(sites, n_max, Sector::Spin(s.n_down, s.n_up))?;
                let map = spin_swap_map(&s.basis, &basis);
                let dim = s.basis.dim();
                let mut vecs = Array2::<C64>::zeros((dim, dim));
                for (i, &(j, sign)) in map.iter().enumerate() {
                    for k in 0..dim {
                        vecs[(j, k)] = s.vecs[(i, k)] * sign;
                    }
                }
                mirrors.push(SectorEigen {
                    n_up: s.n_down,
                    n_down: s.n_up,
                    basis,
                    vals: s.vals.clone(),
                    vecs,
                    mirrored: true,
                });
            }
            sectors.extend(mirrors);
        }
        let z_shifted: f64 = sectors
            .iter()
            .flat_map(|s| s.vals.iter())
            .map(|&e| (-beta * (e - e0)).exp())
            .sum();
        if !(z_shifted.is_finite() && z_shifted > 0.0) {
            return Err(CoreError::Numerical("non-finite partition value".into()));
        }
        Ok(ThermalState {
            beta,
            sectors,
            e0,
            z_shifted,
            skipped_weight: skipped_weight_abs / z_shifted,
        })
    }

    /// `Tr[Ψ e^{−βH}]/Z` for an observable assembled per sector; only the
    /// sector-diagonal block of `Ψ` contributes to the trace.
    pub fn expectation<F>(&self, op: F) -> Result<C64>
    where
        F: Fn(&FockBasis) -> Result<SparseOperator>,
    {
        let mut num = C64::new(0.0, 0.0);
        for s in &self.sectors {
            let psi = op(&s.basis)?;
            let dim = s.basis.dim();
            for k in 0..dim {
                let w = (-self.beta * (s.vals[k] - self.e0)).exp();
                if w < 1e-300 {
                    continue;
                }
                let col = s.vecs.column(k);
                let mut acc = C64::new(0.0, 0.0);
                for &(r, c, v) in &psi.entries {
                    acc += col[r as usize].conj() * v * col[c as usize];
                }
                num += acc * w;
            }
        }
        Ok(num / self.z_shifted)
    }

    /// Ground-subspace average (`β → ∞` limit, degeneracy-weighted).
    pub fn ground_expectation<F>(&self, op: F, degeneracy_tol: f64) -> Result<C64>
    where
        F: Fn(&FockBasis) -> Result<SparseOperator>,
    {
        let mut num = C64::new(0.0, 0.0);
        let mut count = 0usize;
        for s in &self.sectors {
            let psi = op(&s.basis)?;
            for k in 0..s.vals.len() {
                if s.vals[k] - self.e0 > degeneracy_tol {
                    continue;
                }
                let col = s.vecs.column(k);
                let mut acc = C64::new(0.0, 0.0);
                for &(r, c, v) in &psi.entries {
                    acc += col[r as usize].conj() * v * col[c as usize];
                }
                num += acc;
                count += 1;
            }
        }
        Ok(num / count as f64)
    }

    /// `log Z` reconstructed from the shifted sum.
    pub fn log_z(&self) -> f64 {
        self.z_shifted.ln() - self.beta * self.e0
    }
}

/// Number operator `n̂_x` on a basis (by site position).
pub fn density_op(basis: &FockBasis, pos: usize) -> SparseOperator {
    crate::fock::diagonal_operator(basis, |s| s.site_occupation(pos) as f64)
}

/// Spin operator `S^{(i)}_x`, `i ∈ {1, 2, 3}`.
pub fn spin_op(basis: &FockBasis, pos: usize, i: usize) -> SparseOperator {
    use crate::fock::{apply_annihilation, apply_creation};
    let mut op = SparseOperator::zero(basis.dim());
    match i {
        3 => {
            for (k, s) in basis.states.iter().enumerate() {
                let up = s.occupied(basis.mode(pos, SPIN_UP)) as u32 as f64;
                let dn = s.occupied(basis.mode(pos, SPIN_DOWN)) as u32 as f64;
                op.push(k, k, C64::new(0.5 * (up - dn), 0.0));
            }
        }
        1 | 2 => {
            for (k, s) in basis.states.iter().enumerate() {
                for (from, to) in [(SPIN_DOWN, SPIN_UP), (SPIN_UP, SPIN_DOWN)] {
                    let Some((s1, g1)) = apply_annihilation(s, basis.mode(pos, from)) else {
                        continue;
                    };
                    let Some((s2, g2)) = apply_creation(&s1, basis.mode(pos, to)) else {
                        continue;
                    };
                    if let Some(j) = basis.index_of(&s2) {
                        let amp = if i == 1 {
                            C64::new(0.5 * (g1 * g2) as f64, 0.0)
                        } else {
                            // S² = (c†↑c↓ − c†↓c↑)/(2i)
                            let sgn = if to == SPIN_UP { 1.0 } else { -1.0 };
                            C64::new(0.0, -0.5 * sgn * (g1 * g2) as f64)
                        };
                        op.push(j, k, amp);
                    }
                }
            }
        }
        _ => panic!("spin component must be 1, 2 or 3"),
    }
    op
}

/// Staggered density `Δ = (1/|Λ|) Σ_x (−1)^x ⟨n̂_x⟩`.
pub fn staggered_density(state: &ThermalState, lattice: &Lattice, sites: &[usize]) -> Result<f64> {
    let mut acc = 0.0;
    for (pos, &site) in sites.iter().enumerate() {
        let sign = parity(lattice.site(site)) as f64;
        let v = state.expectation(|b| Ok(density_op(b, pos)))?;
        acc += sign * v.re;
    }
    Ok(acc / sites.len() as f64)
}

/// Connected density correlation `⟨n̂_x n̂_y⟩ − ⟨n̂_x⟩⟨n̂_y⟩`.
pub fn density_correlation(state: &ThermalState, pos_a: usize, pos_b: usize) -> Result<f64> {
    let ab = state.expectation(|b| {
        Ok(crate::fock::diagonal_operator(b, |s| {
            (s.site_occupation(pos_a) * s.site_occupation(pos_b)) as f64
        }))
    })?;
    let a = state.expectation(|b| Ok(density_op(b, pos_a)))?;
    let b = state.expectation(|b| Ok(density_op(b, pos_b)))?;
    Ok(ab.re - a.re * b.re)
}

/// Least-squares fit of `log|c|` against distance.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Correlation length `ξ` from slope `−1/ξ`.
    pub xi: f64,
    pub slope: f64,
    pub residual: f64,
    pub points_used: usize,
}

pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| c.abs() > 1e-14)
        .map(|&(d, c)| (d, c.abs().ln()))
        .collect();
    if usable.len() < 3 {
        return Err(CoreError::InvalidParameter(format!(
            "decay fit needs ≥ 3 usable separations, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = usable
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(DecayFit { xi: -1.0 / slope, slope, residual, points_used: usable.len() })
}

/// Extensive observable density, with a numeric check that the observable is
/// diagonal in the energy eigenbasis (the finite-size form of the
/// commutation requirement).
pub fn extensive_density<F>(
    state: &ThermalState,
    q_builder: F,
    num_sites: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&FockBasis) -> Result<SparseOperator>,
{
    let mut defect = 0.0f64;
    for s in &state.sectors {
        let q = q_builder(&s.basis)?;
        let dim = s.basis.dim();
        let kmax = dim.min(40);
        for j in 0..kmax {
            for k in 0..kmax {
                if (s.vals[j] - s.vals[k]).abs() < 1e-9 {
                    continue;
                }
                let cj = s.vecs.column(j);
                let ck = s.vecs.column(k);
                let mut acc = C64::new(0.0, 0.0);
                for &(r, c, v) in &q.entries {
                    acc += cj[r as usize].conj() * v * ck[c as usize];
                }
                defect = defect.max(acc.norm());
            }
        }
    }
    if defect > 1e-8 {
        return Err(CoreError::Numerical(format!(
            "extensive observable does not commute with H (defect {defect:.2e})"
        )));
    }
    let v = state.expectation(q_builder)?;
    Ok((v.re / num_sites as f64, defect))
}

/// Observable value per truncation level, with successive differences.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<(usize, f64)>,
    pub diffs: Vec<f64>,
    pub monotone: bool,
}

/// Scan an observable over ascending `n_max` values.
pub fn truncation_scan<F>(n_max_list: &[usize], mut eval: F) -> Result<ConvergenceTable>
where
    F: FnMut(usize) -> Result<f64>,
{
    if n_max_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidParameter("n_max list must be ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in n_max_list {
        rows.push((n, eval(n)?));
    }
    let diffs: Vec<f64> = rows.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0] + 1e-14);
    Ok(ConvergenceTable { rows, diffs, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::model::{build_holstein_hubbard, build_transformed, Boundary, ModelParams};
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams {
            t: 0.0,
            u: 0.0,
            w: 1.0,
            mu: 0.0,
            g: 0.0,
            omega0: 1.0,
            lambda: C64::new(0.0, 0.0),
            beta: 20.0,
            m_slices: 1,
            d: 1,
            l: 1,
            r0: 1,
            n_max: 0,
        }
    }

    #[test]
    fn identity_expectation_is_one() {
        let p = params();
        let lat = Lattice::build(1, 1, false).unwrap();
        let sites: Vec<usize> = (0..2).collect();
        let state = ThermalState::build(
            &sites,
            0,
            2.0,
            |b| build_transformed(&p, &lat, b, Boundary::Classical(1)),
            &ThermalOptions::default(),
        )
        .unwrap();
        let one = state.expectation(|b| Ok(SparseOperator::identity(b.dim()))).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn single_site_gibbs_closed_form() {
        // λ = 0, t = 0, one site: ⟨n̂⟩ matches the 4-state hand sum
        let p = ModelParams { u: 0.8, mu: 0.2, w: 0.0, ..params() };
        let beta = 1.7;
        let sites = vec![0usize];
        let lat = Lattice::build(1, 1, false).unwrap();
        let state = ThermalState::build(
            &sites,
            0,
            beta,
            |b| Ok(crate::model::build_hubbard(&p, &lat, b)),
            &ThermalOptions::default(),
        )
        .unwrap();
        let n = state.expectation(|b| Ok(density_op(b, 0))).unwrap().re;
        // energies: 0, −μ−U/2 (×2), −2μ
        let e1 = -(p.mu + p.u / 2.0);
        let e2 = -2.0 * p.mu;
        let z = 1.0 + 2.0 * (-beta * e1).exp() + (-beta * e2).exp();
        let want = (2.0 * (-beta * e1).exp() + 2.0 * (-beta * e2).exp()) / z;
        assert_abs_diff_eq!(n, want, epsilon = 1e-12);
    }

    #[test]
    fn staggered_density_classical_limit() {
        // t = 0, g = 0 inside S_ep,0 with ℓ = 1 boundary: Δ → 1
        let p = params();
        let lat = Lattice::build(1, 1, false).unwrap();
        let sites: Vec<usize> = (0..2).collect();
        let build = |b: &FockBasis| build_transformed(&p, &lat, b, Boundary::Classical(1));
        let state =
            ThermalState::build(&sites, 0, 20.0, build, &ThermalOptions::default()).unwrap();
        let delta = staggered_density(&state, &lat, &sites).unwrap();
        assert!((delta - 1.0).abs() < 1e-6, "Δ = {delta}");
        // ℓ = 2 flips the sign exactly
        let build2 = |b: &FockBasis| build_transformed(&p, &lat, b, Boundary::Classical(2));
        let state2 =
            ThermalState::build(&sites, 0, 20.0, build2, &ThermalOptions::default()).unwrap();
        let delta2 = staggered_density(&state2, &lat, &sites).unwrap();
        assert_abs_diff_eq!(delta2, -delta, epsilon = 1e-12);
    }

    #[test]
    fn spin_expectations_vanish_and_zeeman_control() {
        let p = ModelParams { t: 0.3, u: 1.0, ..params() };
        let lat = Lattice::build(1, 1, false).unwrap();
        let sites: Vec<usize> = (0..2).collect();
        let state = ThermalState::build(
            &sites,
            0,
            3.0,
            |b| Ok(crate::model::build_hubbard(&p, &lat, b)),
            &ThermalOptions { window: f64::INFINITY, spin_symmetric: true },
        )
        .unwrap();
        for i in 1..=3 {
            for pos in 0..2 {
                let v = state.expectation(|b| Ok(spin_op(b, pos, i))).unwrap();
                assert!(v.norm() < 1e-9, "⟨S^{i}⟩ = {v}");
            }
        }
        // explicitly broken: add a Zeeman term and the expectation moves
        let state = ThermalState::build(
            &sites,
            0,
            3.0,
            |b| {
                let h = crate::model::build_hubbard(&p, &lat, b);
                let z = spin_op(b, 0, 3).scaled(C64::new(-0.5, 0.0));
                Ok(h.add(&z))
            },
            &ThermalOptions::default(),
        )
        .unwrap();
        let v = state.expectation(|b| Ok(spin_op(b, 0, 3))).unwrap();
        assert!(v.re > 1e-3, "Zeeman-broken ⟨S³⟩ = {v}");
    }

    #[test]
    fn product_state_has_no_cross_correlations() {
        // λ = 0 with no classical neighbor coupling (W = 0): the thermal
        // state is a product over sites and every cross-site connected
        // correlation of diagonal observables vanishes identically. (With
        // W > 0 the classical part couples neighbors and connected
        // correlations merely decay; see the decay test below.)
        let p = ModelParams { w: 0.0, u: 0.4, mu: 0.2, g: 0.3, n_max: 1, ..params() };
        let lat = Lattice::build(1, 2, false).unwrap();
        let sites: Vec<usize> = (0..4).collect();
        let state = ThermalState::build(
            &sites,
            1,
            2.0,
            |b| build_transformed(&p, &lat, b, Boundary::Classical(1)),
            &ThermalOptions::default(),
        )
        .unwrap();
        let c = density_correlation(&state, 0, 3).unwrap();
        assert!(c.abs() < 1e-10, "connected correlation {c}");
        let c = density_correlation(&state, 0, 1).unwrap();
        assert!(c.abs() < 1e-10, "nearest-neighbor connected correlation {c}");
        // same-site variance is non-negative
        let v = density_correlation(&state, 1, 1).unwrap();
        assert!(v >= -1e-12);
    }

    #[test]
    fn partition_consistency_against_dense_trace() {
        let p = ModelParams { t: 0.4, u: 0.7, g: 0.3, n_max: 1, ..params() };
        let lat = Lattice::build(1, 1, false).unwrap();
        let sites: Vec<usize> = (0..2).collect();
        let beta = 1.3;
        let state = ThermalState::build(
            &sites,
            1,
            beta,
            |b| Ok(build_holstein_hubbard(&p, &lat, b)),
            &ThermalOptions::default(),
        )
        .unwrap();
        // direct dense exponential over the full basis
        let basis = FockBasis::enumerate(&sites, 1, Sector::Full).unwrap();
        let h = build_holstein_hubbard(&p, &lat, &basis).to_dense();
        let shifted = h.mapv(|v| C64::new(-beta, 0.0) * (v - C64::new(state.e0, 0.0) * 0.0))
            + Array2::from_diag(&ndarray::Array1::from_elem(
                basis.dim(),
                C64::new(beta * state.e0, 0.0),
            ));
        let em = crate::linalg::expm(&shifted).unwrap();
        let tr: f64 = (0..basis.dim()).map(|i| em[(i, i)].re).sum();
        assert!(
            (tr - state.z_shifted).abs() / tr < 1e-10,
            "Z mismatch: {tr} vs {}",
            state.z_shifted
        );
    }

    #[test]
    fn polaron_truncation_scan() {
        // single-site polaron energy → −g²/ω₀ with shrinking differences
        let base = ModelParams { u: 0.0, w: 0.0, mu: 0.0, g: 0.5, ..params() };
        let lat = Lattice::build(1, 1, false).unwrap();
        let table = truncation_scan(&[4, 8, 16, 32], |n_max| {
            let p = ModelParams { n_max, ..base.clone() };
            let basis = FockBasis::enumerate(&[0], n_max, Sector::Spin(1, 0)).unwrap();
            let h = build_holstein_hubbard(&p, &lat, &basis).to_dense();
            Ok(crate::linalg::eigvalsh(&h).unwrap()[0])
        })
        .unwrap();
        let last = table.rows.last().unwrap().1;
        // with U = W = μ = 0 the single-electron ground energy is −g²/ω₀
        assert!((last - (-0.25)).abs() < 1e-8, "polaron energy {last}");
        assert!(table.monotone, "differences must shrink: {:?}", table.diffs);
        // g = 0: constant in n_max
        let table = truncation_scan(&[1, 2, 3], |n_max| {
            let p = ModelParams { g: 0.0, n_max, ..base.clone() };
            let basis = FockBasis::enumerate(&[0], n_max, Sector::Spin(1, 0)).unwrap();
            let h = build_holstein_hubbard(&p, &lat, &basis).to_dense();
            Ok(crate::linalg::eigvalsh(&h).unwrap()[0])
        })
        .unwrap();
        assert!(table.diffs.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn decay_fit_needs_three_points() {
        assert!(fit_decay(&[(1.0, 0.1), (2.0, 0.01)]).is_err());
        let fit = fit_decay(&[(1.0, 0.1), (2.0, 0.01), (3.0, 0.001)]).unwrap();
        assert!((fit.xi - 1.0 / 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn small_t_correlations_decrease_with_distance() {
        // electron-only 6-site chain, small hopping: |connected| shrinks
        let p = ModelParams { t: 0.1, u: 0.5, w: 1.0, l: 3, ..params() };
        let lat = Lattice::build(1, 3, false).unwrap();
        let sites: Vec<usize> = (0..6).collect();
        let state = ThermalState::build(
            &sites,
            0,
            4.0,
            |b| Ok(crate::model::build_hubbard(&p, &lat, b)),
            &ThermalOptions { window: f64::INFINITY, spin_symmetric: true },
        )
        .unwrap();
        let c1 = density_correlation(&state, 0, 1).unwrap().abs();
        let c3 = density_correlation(&state, 0, 3).unwrap().abs();
        let c5 = density_correlation(&state, 0, 5).unwrap().abs();
        assert!(c1 > c3 && c3 > c5, "expected decay: {c1} {c3} {c5}");
        let fit = fit_decay(&[(1.0, c1), (3.0, c3), (5.0, c5)]).unwrap();
        assert!(fit.xi > 0.0);
    }

    #[test]
    fn extensive_density_of_number_operator() {
        let p = ModelParams { t: 0.2, ..params() };
        let lat = Lattice::build(1, 1, false).unwrap();
        let sites: Vec<usize> = (0..2).collect();
        let state = ThermalState::build(
            &sites,
            0,
            8.0,
            |b| {
                build_transformed(
                    &ModelParams { lambda: C64::new(0.2, 0.0), ..p.clone() },
                    &lat,
                    b,
                    Boundary::Classical(1),
                )
            },
            &ThermalOptions::default(),
        )
        .unwrap();
        let (rho, defect) = extensive_density(
            &state,
            |b| {
                let mut op = SparseOperator::zero(b.dim());
                for (k, s) in b.states.iter().enumerate() {
                    op.push(k, k, C64::new(s.electron_count() as f64, 0.0));
                }
                Ok(op)
            },
            2,
        )
        .unwrap();
        // half filling at the particle-hole symmetric point
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-9);
        assert!(defect < 1e-10);
    }
}
