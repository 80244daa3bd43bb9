//! Truncated electron-phonon Fock spaces.
//!
//! A basis is attached to an ordered set of sites (ascending in the global
//! lattice order). Electron modes are `(site, spin)` pairs ordered site-major
//! with ↑ before ↓ within a site; a basis vector is
//! `|n_e⟩ ⊗ |n_p⟩ = Π_m (c*_m)^{n_m} |∅⟩ ⊗ Π_x (b*_x)^{n_x}/√(n_x!) |∅⟩`
//! with the creation product taken in increasing mode order.
//!
//! Phonons are truncated at occupation `n_max` with projected truncation:
//! `b†` annihilates the top level so that every operator stays a
//! well-defined matrix on the truncated space.

use crate::error::{CoreError, Result};
use crate::C64;
use ndarray::Array2;
use std::collections::HashMap;

pub const SPIN_UP: usize = 0;
pub const SPIN_DOWN: usize = 1;

/// One electron-phonon configuration on an ordered site set: electron
/// occupations as a bitmask over modes `2·pos + spin`, phonon occupations per
/// site position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductBasisState {
    pub elec: u64,
    pub phonon: Vec<u8>,
}

impl ProductBasisState {
    pub fn vacuum(num_sites: usize) -> Self {
        ProductBasisState { elec: 0, phonon: vec![0; num_sites] }
    }

    pub fn electron_count(&self) -> u32 {
        self.elec.count_ones()
    }

    pub fn spin_count(&self, spin: usize) -> u32 {
        let mask = if spin == SPIN_UP { 0x5555_5555_5555_5555u64 } else { 0xAAAA_AAAA_AAAA_AAAAu64 };
        (self.elec & mask).count_ones()
    }

    /// Total occupation `n_x = n_{x↑} + n_{x↓}` at a site position.
    pub fn site_occupation(&self, pos: usize) -> u32 {
        let up = (self.elec >> (2 * pos)) & 1;
        let dn = (self.elec >> (2 * pos + 1)) & 1;
        (up + dn) as u32
    }

    pub fn occupied(&self, mode: usize) -> bool {
        (self.elec >> mode) & 1 == 1
    }
}

/// Apply `c*_mode`; `None` on Pauli exclusion. Sign is
/// `(−1)^{#occupied modes preceding mode}`.
pub fn apply_creation(state: &ProductBasisState, mode: usize) -> Option<(ProductBasisState, i32)> {
    if state.occupied(mode) {
        return None;
    }
    let below = (state.elec & ((1u64 << mode) - 1)).count_ones();
    let sign = if below % 2 == 0 { 1 } else { -1 };
    let mut new = state.clone();
    new.elec |= 1u64 << mode;
    Some((new, sign))
}

/// Apply `c_mode`; `None` on an empty mode.
pub fn apply_annihilation(
    state: &ProductBasisState,
    mode: usize,
) -> Option<(ProductBasisState, i32)> {
    if !state.occupied(mode) {
        return None;
    }
    let below = (state.elec & ((1u64 << mode) - 1)).count_ones();
    let sign = if below % 2 == 0 { 1 } else { -1 };
    let mut new = state.clone();
    new.elec &= !(1u64 << mode);
    Some((new, sign))
}

/// Boson ladder kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BosonOp {
    Lower,
    Raise,
}

/// Apply `b` or `b†` at a site position under projected truncation.
pub fn apply_boson(
    state: &ProductBasisState,
    pos: usize,
    kind: BosonOp,
    n_max: usize,
) -> Option<(ProductBasisState, f64)> {
    let n = state.phonon[pos] as usize;
    match kind {
        BosonOp::Lower => {
            if n == 0 {
                None
            } else {
                let mut new = state.clone();
                new.phonon[pos] = (n - 1) as u8;
                Some((new, (n as f64).sqrt()))
            }
        }
        BosonOp::Raise => {
            if n >= n_max {
                None
            } else {
                let mut new = state.clone();
                new.phonon[pos] = (n + 1) as u8;
                Some((new, ((n + 1) as f64).sqrt()))
            }
        }
    }
}

/// Restriction on the electron sector when enumerating a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Full,
    /// Fixed total electron number.
    Electrons(u32),
    /// Fixed (N_↑, N_↓).
    Spin(u32, u32),
}

/// Basis of the truncated space over an ordered site set.
#[derive(Debug, Clone)]
pub struct FockBasis {
    /// Global site indices, ascending.
    pub sites: Vec<usize>,
    pub n_max: usize,
    pub states: Vec<ProductBasisState>,
    index: HashMap<(u64, u64), usize>,
}

impl FockBasis {
    /// Enumerate the basis. Ordering: electron bitmask ascending, phonon
    /// mixed-radix code ascending within each electron configuration.
    pub fn enumerate(sites: &[usize], n_max: usize, sector: Sector) -> Result<FockBasis> {
        let mut sorted = sites.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sites.len() {
            return Err(CoreError::Geometry("duplicate sites in basis".into()));
        }
        let k = sorted.len();
        if 2 * k > 62 {
            return Err(CoreError::DimensionOverflow { dim: u128::MAX, budget: 1 << 62 });
        }
        let e_dim: u128 = 1u128 << (2 * k);
        let p_dim: u128 = ((n_max + 1) as u128).pow(k as u32);
        let dim = e_dim * p_dim;
        if dim > (1 << 26) {
            return Err(CoreError::DimensionOverflow { dim, budget: 1 << 26 });
        }
        let mut states = Vec::new();
        for elec in 0..(1u64 << (2 * k)) {
            let keep = match sector {
                Sector::Full => true,
                Sector::Electrons(n) => elec.count_ones() == n,
                Sector::Spin(up, dn) => {
                    let s = ProductBasisState { elec, phonon: vec![] };
                    s.spin_count(SPIN_UP) == up && s.spin_count(SPIN_DOWN) == dn
                }
            };
            if !keep {
                continue;
            }
            let mut phonon = vec![0u8; k];
            loop {
                states.push(ProductBasisState { elec, phonon: phonon.clone() });
                // mixed-radix increment, last site fastest
                let mut j = k;
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    if (phonon[j] as usize) < n_max {
                        phonon[j] += 1;
                        break;
                    }
                    phonon[j] = 0;
                    if j == 0 {
                        break;
                    }
                }
                if phonon.iter().all(|&n| n == 0) {
                    break;
                }
                if k == 0 {
                    break;
                }
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.elec, phonon_code(&s.phonon, n_max)), i))
            .collect();
        Ok(FockBasis { sites: sorted, n_max, states, index })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &ProductBasisState {
        &self.states[i]
    }

    pub fn position_of_site(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    pub fn index_of(&self, state: &ProductBasisState) -> Option<usize> {
        self.index.get(&(state.elec, phonon_code(&state.phonon, self.n_max))).copied()
    }

    /// Electron mode index of `(site position, spin)`.
    pub fn mode(&self, pos: usize, spin: usize) -> usize {
        2 * pos + spin
    }
}

fn phonon_code(phonon: &[u8], n_max: usize) -> u64 {
    let base = (n_max + 1) as u64;
    phonon.iter().fold(0u64, |acc, &n| acc * base + n as u64)
}

/// Coordinate-sparse operator on a fixed basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(u32, u32, C64)>,
}

impl SparseOperator {
    pub fn zero(dim: usize) -> Self {
        SparseOperator { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOperator {
            dim,
            entries: (0..dim).map(|i| (i as u32, i as u32, C64::new(1.0, 0.0))).collect(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        if value.norm_sqr() != 0.0 {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    pub fn scaled(&self, z: C64) -> SparseOperator {
        SparseOperator {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * z)).collect(),
        }
    }

    pub fn add(&self, other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        SparseOperator { dim: self.dim, entries }
    }

    pub fn dagger(&self) -> SparseOperator {
        SparseOperator {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::<C64>::zeros((self.dim, self.dim));
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for &(r, c, val) in &self.entries {
            out[r as usize] += val * v[c as usize];
        }
        out
    }

    /// `‖A − A†‖_max` after coalescing duplicate coordinates.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut map: HashMap<(u32, u32), C64> = HashMap::new();
        for &(r, c, v) in &self.entries {
            *map.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut worst = 0.0f64;
        for (&(r, c), &v) in &map {
            let vt = map.get(&(c, r)).copied().unwrap_or(C64::new(0.0, 0.0));
            worst = worst.max((v - vt.conj()).norm());
        }
        worst
    }
}

/// Assemble `c*_{(pos,spin)}` on a basis.
pub fn creation_operator(basis: &FockBasis, pos: usize, spin: usize) -> SparseOperator {
    let mode = basis.mode(pos, spin);
    let mut op = SparseOperator::zero(basis.dim());
    for (i, s) in basis.states.iter().enumerate() {
        if let Some((new, sign)) = apply_creation(s, mode) {
            if let Some(j) = basis.index_of(&new) {
                op.push(j, i, C64::new(sign as f64, 0.0));
            }
        }
    }
    op
}

/// Assemble `c_{(pos,spin)}`.
pub fn annihilation_operator(basis: &FockBasis, pos: usize, spin: usize) -> SparseOperator {
    creation_operator(basis, pos, spin).dagger()
}

/// Assemble `b_pos` (kind = Lower) or `b*_pos` (kind = Raise).
pub fn boson_operator(basis: &FockBasis, pos: usize, kind: BosonOp) -> SparseOperator {
    let mut op = SparseOperator::zero(basis.dim());
    for (i, s) in basis.states.iter().enumerate() {
        if let Some((new, amp)) = apply_boson(s, pos, kind, basis.n_max) {
            if let Some(j) = basis.index_of(&new) {
                op.push(j, i, C64::new(amp, 0.0));
            }
        }
    }
    op
}

/// Diagonal operator from per-configuration values.
pub fn diagonal_operator<F: Fn(&ProductBasisState) -> f64>(
    basis: &FockBasis,
    f: F,
) -> SparseOperator {
    let mut op = SparseOperator::zero(basis.dim());
    for (i, s) in basis.states.iter().enumerate() {
        op.push(i, i, C64::new(f(s), 0.0));
    }
    op
}

/// Single-mode position/momentum matrices `q = (b + b†)/√2`,
/// `p = i(b† − b)/√2` on the `(n_max+1)`-level truncated oscillator.
pub fn qp_matrices(n_max: usize) -> (Array2<C64>, Array2<C64>) {
    let dim = n_max + 1;
    let mut q = Array2::<C64>::zeros((dim, dim));
    let mut p = Array2::<C64>::zeros((dim, dim));
    for n in 0..n_max {
        let amp = ((n + 1) as f64).sqrt() / 2f64.sqrt();
        q[(n + 1, n)] = C64::new(amp, 0.0);
        q[(n, n + 1)] = C64::new(amp, 0.0);
        p[(n + 1, n)] = C64::new(0.0, amp);
        p[(n, n + 1)] = C64::new(0.0, -amp);
    }
    (q, p)
}

/// Per-site `q_x`, `p_x` as sparse operators on a full basis.
pub fn build_qp_operators(basis: &FockBasis, pos: usize) -> (SparseOperator, SparseOperator) {
    let raise = boson_operator(basis, pos, BosonOp::Raise);
    let lower = boson_operator(basis, pos, BosonOp::Lower);
    let inv_sqrt2 = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let i_inv_sqrt2 = C64::new(0.0, 1.0 / 2f64.sqrt());
    let q = raise.scaled(inv_sqrt2).add(&lower.scaled(inv_sqrt2));
    let p = raise.scaled(i_inv_sqrt2).add(&lower.scaled(-i_inv_sqrt2));
    (q, p)
}

/// The sign `θ` in `|n_Λ⟩ = θ |n_{Λ₁}⟩ ⊗ |n_{Λ₂}⟩` for a partition of the
/// basis sites into `part1 ⊔ part2` (each given as site positions into the
/// basis site list, `part1` the first tensor factor).
///
/// The sign counts the transpositions needed to reorder the globally ordered
/// occupied-mode product into (part1 modes, then part2 modes).
pub fn factorization_sign(state: &ProductBasisState, part1: &[usize], part2: &[usize]) -> i32 {
    let in_part1: Vec<bool> = {
        let max_pos = part1.iter().chain(part2.iter()).copied().max().map_or(0, |m| m + 1);
        let mut v = vec![false; max_pos];
        for &p in part1 {
            v[p] = true;
        }
        v
    };
    let mut seen_part2_occupied = 0u32;
    let mut inversions = 0u32;
    let total_modes = 2 * (part1.len() + part2.len());
    for mode in 0..total_modes {
        if !state.occupied(mode) {
            continue;
        }
        let pos = mode / 2;
        if in_part1[pos] {
            inversions += seen_part2_occupied;
        } else {
            seen_part2_occupied += 1;
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Conditional expectation `⟨n_{Λ₁}| X |n_{Λ₁}⟩` of a diagonal operator:
/// substitute the fixed occupations on `outer` (site positions of the full
/// basis) and return the induced diagonal operator on `inner_basis` (the
/// basis over the complementary sites).
pub fn conditional_expectation(
    op: &SparseOperator,
    full_basis: &FockBasis,
    outer: &[usize],
    outer_config: &ProductBasisState,
    inner_basis: &FockBasis,
) -> Result<SparseOperator> {
    // verify diagonality
    let mut diag = vec![C64::new(0.0, 0.0); full_basis.dim()];
    for &(r, c, v) in &op.entries {
        if r != c {
            return Err(CoreError::NotDiagonal(format!("entry at ({r}, {c})")));
        }
        diag[r as usize] += v;
    }
    let outer_set: Vec<usize> = outer.to_vec();
    let inner_positions: Vec<usize> =
        (0..full_basis.sites.len()).filter(|p| !outer_set.contains(p)).collect();
    if inner_positions.len() != inner_basis.sites.len() {
        return Err(CoreError::Geometry("inner basis does not match the partition".into()));
    }
    let mut out = SparseOperator::zero(inner_basis.dim());
    for (j, inner_state) in inner_basis.states.iter().enumerate() {
        // assemble the full configuration
        let mut full = ProductBasisState::vacuum(full_basis.sites.len());
        for (ipos, &fpos) in inner_positions.iter().enumerate() {
            for spin in [SPIN_UP, SPIN_DOWN] {
                if inner_state.occupied(2 * ipos + spin) {
                    full.elec |= 1u64 << (2 * fpos + spin);
                }
            }
            full.phonon[fpos] = inner_state.phonon[ipos];
        }
        for (opos, &fpos) in outer_set.iter().enumerate() {
            for spin in [SPIN_UP, SPIN_DOWN] {
                if outer_config.occupied(2 * opos + spin) {
                    full.elec |= 1u64 << (2 * fpos + spin);
                }
            }
            full.phonon[fpos] = outer_config.phonon[opos];
        }
        let fi = full_basis
            .index_of(&full)
            .ok_or_else(|| CoreError::Geometry("assembled configuration not in basis".into()))?;
        out.push(j, j, diag[fi]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_counts() {
        let b = FockBasis::enumerate(&[0], 0, Sector::Full).unwrap();
        assert_eq!(b.dim(), 4);
        let b = FockBasis::enumerate(&[0], 2, Sector::Full).unwrap();
        assert_eq!(b.dim(), 12);
        let b = FockBasis::enumerate(&[0, 1], 1, Sector::Electrons(2)).unwrap();
        assert_eq!(b.dim(), 24); // C(4,2) = 6 electron configs × 2² phonons
    }

    #[test]
    fn basis_index_bijection() {
        let b = FockBasis::enumerate(&[0, 3], 2, Sector::Full).unwrap();
        for (i, s) in b.states.iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
    }

    #[test]
    fn creation_signs() {
        // Basis products are taken in increasing mode order,
        // |n⟩ = Π_{m ascending} (c*_m)^{n_m} |∅⟩, so creating mode m picks up
        // one −1 per occupied mode *below* m.
        let vac = ProductBasisState::vacuum(2);
        // mode order: (site 0, ↑) < (site 0, ↓) < (site 1, ↑) < (site 1, ↓)
        let (s1, sign) = apply_creation(&vac, 0).unwrap();
        assert_eq!(sign, 1);
        // creating a later mode past one occupied earlier mode: sign −1
        let (s2, sign) = apply_creation(&s1, 2).unwrap();
        assert_eq!(sign, -1);
        // creating an earlier mode with nothing below it: sign +1
        let (s1b, _) = apply_creation(&vac, 2).unwrap();
        let (s2b, sign) = apply_creation(&s1b, 0).unwrap();
        assert_eq!(sign, 1);
        // both routes reach the same basis vector with opposite sign products,
        // matching c*_0 c*_2 = −c*_2 c*_0
        assert_eq!(s2.elec, s2b.elec);
        // Pauli exclusion
        assert!(apply_creation(&s2, 0).is_none());
    }

    #[test]
    fn boson_amplitudes() {
        let mut s = ProductBasisState::vacuum(1);
        s.phonon[0] = 3;
        let (t, amp) = apply_boson(&s, 0, BosonOp::Lower, 5).unwrap();
        assert_eq!(t.phonon[0], 2);
        assert_abs_diff_eq!(amp, 3f64.sqrt(), epsilon = 1e-15);
        let vac = ProductBasisState::vacuum(1);
        let (t, amp) = apply_boson(&vac, 0, BosonOp::Raise, 5).unwrap();
        assert_eq!(t.phonon[0], 1);
        assert_abs_diff_eq!(amp, 1.0, epsilon = 1e-15);
        let mut top = ProductBasisState::vacuum(1);
        top.phonon[0] = 5;
        assert!(apply_boson(&top, 0, BosonOp::Raise, 5).is_none());
    }

    #[test]
    fn car_relations_on_small_instance() {
        // {c_m, c*_m'} = δ as assembled sparse matrices on a 2-site basis
        let b = FockBasis::enumerate(&[0, 1], 0, Sector::Full).unwrap();
        for pos_a in 0..2 {
            for spin_a in [SPIN_UP, SPIN_DOWN] {
                for pos_b in 0..2 {
                    for spin_b in [SPIN_UP, SPIN_DOWN] {
                        let c = annihilation_operator(&b, pos_a, spin_a).to_dense();
                        let cd = creation_operator(&b, pos_b, spin_b).to_dense();
                        let anti = c.dot(&cd) + cd.dot(&c);
                        let delta = if pos_a == pos_b && spin_a == spin_b { 1.0 } else { 0.0 };
                        for i in 0..b.dim() {
                            for j in 0..b.dim() {
                                let want = if i == j { delta } else { 0.0 };
                                assert_abs_diff_eq!(anti[(i, j)].re, want, epsilon = 1e-14);
                                assert_abs_diff_eq!(anti[(i, j)].im, 0.0, epsilon = 1e-14);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn qp_truncated_matrix() {
        let (q, _p) = qp_matrices(1);
        let x = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(q[(0, 1)].re, x, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(1, 0)].re, x, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(0, 0)].re, 0.0, epsilon = 1e-15);
        // ⟨0|q²|0⟩ = 1/2 once the n=2 level is present
        let (q, p) = qp_matrices(2);
        let q2 = q.dot(&q);
        assert_abs_diff_eq!(q2[(0, 0)].re, 0.5, epsilon = 1e-15);
        // [q,p] = i on the block below the cutoff
        let comm = q.dot(&p) - p.dot(&q);
        assert_abs_diff_eq!(comm[(0, 0)].im, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(comm[(1, 1)].im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn factorization_sign_examples() {
        // two sites; one electron in each part
        let mut s = ProductBasisState::vacuum(2);
        s.elec = 0b0101; // site0 ↑ and site1 ↑
        // part1 = {site 1}, part2 = {site 0}: the global order interleaves
        // (site0↑ ∈ part2) before (site1↑ ∈ part1): one inversion.
        assert_eq!(factorization_sign(&s, &[1], &[0]), -1);
        // part1 = {site 0} first: no inversion
        assert_eq!(factorization_sign(&s, &[0], &[1]), 1);
        // no electrons in part2 → +1
        let mut s = ProductBasisState::vacuum(2);
        s.elec = 0b0011; // both spins on site 0
        assert_eq!(factorization_sign(&s, &[1], &[0]), 1);
        // vacuum → +1
        let vac = ProductBasisState::vacuum(2);
        assert_eq!(factorization_sign(&vac, &[0], &[1]), 1);
    }

    #[test]
    fn factorization_sign_associative() {
        // sign for Λ = Λ₁⊔Λ₂⊔Λ₃ computed via either grouping agrees:
        // θ(1|23)·θ(2|3) = θ(12|3)·θ(1|2) for every configuration.
        for elec in 0..(1u64 << 6) {
            let s = ProductBasisState { elec, phonon: vec![0; 3] };
            // restrict to parts: positions {0},{1},{2}
            let theta_1_23 = factorization_sign(&s, &[0], &[1, 2]);
            let theta_12_3 = factorization_sign(&s, &[0, 1], &[2]);
            // sign for splitting {1,2} → {1}|{2} inside the tail: uses the
            // configuration restricted to sites 1,2
            let tail = ProductBasisState { elec: elec >> 2, phonon: vec![0; 2] };
            let theta_2_3 = factorization_sign(&tail, &[0], &[1]);
            let head = ProductBasisState { elec: elec & 0b1111, phonon: vec![0; 2] };
            let theta_1_2 = factorization_sign(&head, &[0], &[1]);
            assert_eq!(theta_1_23 * theta_2_3, theta_12_3 * theta_1_2, "elec={elec:b}");
        }
    }

    #[test]
    fn mode_roundtrip_property() {
        // c c* + c* c = 1 mode-wise on every basis vector
        let b = FockBasis::enumerate(&[0, 2], 1, Sector::Full).unwrap();
        for s in &b.states {
            for mode in 0..4 {
                let a = apply_creation(s, mode).map(|(t, sg)| (t, sg));
                let b_ = apply_annihilation(s, mode);
                assert!(a.is_some() != b_.is_some());
            }
        }
    }

    #[test]
    fn conditional_expectation_examples() {
        let full = FockBasis::enumerate(&[0, 1], 1, Sector::Full).unwrap();
        let inner = FockBasis::enumerate(&[1], 1, Sector::Full).unwrap();
        // op = n̂_{site0}: with outer config n_0 = 1 (spin ↑) the result is
        // the constant 1 on the inner factor
        let op = diagonal_operator(&full, |s| s.site_occupation(0) as f64);
        let mut outer_cfg = ProductBasisState::vacuum(1);
        outer_cfg.elec = 0b01;
        let r = conditional_expectation(&op, &full, &[0], &outer_cfg, &inner).unwrap();
        let d = r.to_dense();
        for j in 0..inner.dim() {
            assert_abs_diff_eq!(d[(j, j)].re, 1.0, epsilon = 1e-15);
        }
        // op = n̂_0 n̂_1 with n_0 = 1 → n̂_1 on the inner factor
        let op = diagonal_operator(&full, |s| {
            (s.site_occupation(0) * s.site_occupation(1)) as f64
        });
        let r = conditional_expectation(&op, &full, &[0], &outer_cfg, &inner).unwrap();
        let d = r.to_dense();
        for (j, s) in inner.states.iter().enumerate() {
            assert_abs_diff_eq!(d[(j, j)].re, s.site_occupation(0) as f64, epsilon = 1e-15);
        }
        // op = n̂_1 (inner site) stays n̂_1
        let op = diagonal_operator(&full, |s| s.site_occupation(1) as f64);
        let r = conditional_expectation(&op, &full, &[0], &outer_cfg, &inner).unwrap();
        let d = r.to_dense();
        for (j, s) in inner.states.iter().enumerate() {
            assert_abs_diff_eq!(d[(j, j)].re, s.site_occupation(0) as f64, epsilon = 1e-15);
        }
        // non-diagonal input rejected
        let bad = creation_operator(&full, 0, SPIN_UP);
        assert!(conditional_expectation(&bad, &full, &[0], &outer_cfg, &inner).is_err());
    }
}
