//! Space-time contour representation of the partition function.
//!
//! The transfer operator `T = e^{−β̃H}` is decomposed as `T = Σ_B T(B)` over
//! the union `B` of the hopping supports acting in a slab. `T(B)` is computed
//! exactly by Möbius inversion over sub-Hamiltonian exponentials,
//! `T(B) = Σ_{C⊆B} (−1)^{|B\C|} e^{−β̃(H⁰ + λV_C)}`, which reproduces the
//! time-ordered expansion without quadrature; an order-truncated evaluation
//! of the time-ordered integrals is kept as an independent cross-check.
//!
//! A space-time configuration is a slice sequence `Σ_t = (D_q^{(t)}, n^{(t)})`;
//! a cube is excited when its neighborhood configuration deviates from every
//! ground configuration or when it carries quantum hops. Contours are the
//! connected components of the excited set together with the labels of the
//! surrounding ground regions, and their activities are the configuration
//! sums over all slice sequences realizing exactly that contour.

use crate::classical::{classify_region, ground_spin, pair_energy, Region};
use crate::error::{CoreError, Result};
use crate::fock::{
    apply_annihilation, apply_creation, FockBasis, ProductBasisState, Sector, SparseOperator,
    SPIN_DOWN, SPIN_UP,
};
use crate::lattice::{CubeSet, Lattice, NeighborSite, SpaceTimeLattice};
use crate::linalg::{exp_divided_difference, expm};
use crate::model::{dressed_hopping, phase_of_q, HoppingFamily, HoppingTerm, ModelParams};
use crate::C64;
use ndarray::Array2;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanC64 {
    sum: (f64, f64),
    comp: (f64, f64),
}

impl KahanC64 {
    pub fn add(&mut self, v: C64) {
        let y = v.re - self.comp.0;
        let t = self.sum.0 + y;
        self.comp.0 = (t - self.sum.0) - y;
        self.sum.0 = t;
        let y = v.im - self.comp.1;
        let t = self.sum.1 + y;
        self.comp.1 = (t - self.sum.1) - y;
        self.sum.1 = t;
    }

    pub fn value(&self) -> C64 {
        C64::new(self.sum.0, self.sum.1)
    }
}

/// One time slice of a space-time configuration: the quantum-excited site
/// set and the electron-phonon configuration of the whole lattice.
#[derive(Debug, Clone)]
pub struct SliceLabel {
    pub quantum_sites: BTreeSet<usize>,
    pub config: ProductBasisState,
}

/// A contour: connected excited support plus the labels of the surrounding
/// ground regions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Contour {
    pub support: CubeSet,
    pub exterior_label: usize,
    /// Finite complement components enclosed by the support, with labels.
    pub interior: Vec<(CubeSet, usize)>,
    pub winding: bool,
    /// Quantum/classical partition recorded at extraction time.
    pub q_cubes: Option<CubeSet>,
}

/// How the block propagators are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityMethod {
    /// Exact Möbius inversion over sub-Hamiltonian exponentials.
    MoebiusExact,
    /// Time-ordered expansion truncated at total hop order `order_cut`;
    /// `quad_nodes = 0` evaluates the simplex integrals analytically in the
    /// eigenbasis, `quad_nodes > 0` uses composite midpoint quadrature.
    DuhamelTruncated { order_cut: usize, quad_nodes: usize },
}

/// Contribution key of the activity decomposition record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DecompKey {
    pub quantum: Vec<(usize, usize)>,
    pub electron_excited: Vec<(usize, usize)>,
    pub phonon_excited: Vec<(usize, usize)>,
}

/// A contour's numeric activity.
#[derive(Debug, Clone)]
pub struct ActivityValue {
    pub rho: C64,
    pub method: ActivityMethod,
    pub decomposition: Vec<(DecompKey, C64)>,
}

/// The audit instance: a free lattice with classical boundary label, periodic
/// time, and all caches needed to evaluate activities exactly.
pub struct ContourInstance {
    pub params: ModelParams,
    pub lattice: Lattice,
    pub st: SpaceTimeLattice,
    pub label: usize,
    pub family: HoppingFamily,
    pub full_basis: FockBasis,
    /// Per-site ground energy density of the effective potential.
    pub e_e: f64,
    prop_cache: RefCell<HashMap<PropKey, Array2<C64>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PropKey {
    sites: Vec<usize>,
    boundary: Vec<(u64, u64)>,
    method_tag: (usize, usize, bool),
}

impl ContourInstance {
    pub fn new(params: ModelParams, label: usize) -> Result<Self> {
        params.validate()?;
        if label != 1 && label != 2 {
            return Err(CoreError::UnknownLabel(label));
        }
        let (u, m) = params.normalized_coords();
        let region = classify_region(u, m, params.w, 1e-9)?;
        if region != Region::SepZero {
            return Err(CoreError::InvalidParameter(format!(
                "contour machinery requires parameters in the staggered region, got {region:?}"
            )));
        }
        let lattice = Lattice::build(params.d, params.l, false)?;
        let st = SpaceTimeLattice::new(lattice.clone(), params.m_slices)?;
        let sites: Vec<usize> = (0..lattice.num_sites()).collect();
        let full_basis = FockBasis::enumerate(&sites, params.n_max, Sector::Full)?;
        let family = HoppingFamily::hubbard_nn(&lattice);
        let e_e = params.d as f64 * pair_energy(1.0, -1.0, u, m, params.w);
        Ok(ContourInstance {
            params,
            lattice,
            st,
            label,
            family,
            full_basis,
            e_e,
            prop_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn beta_tilde(&self) -> f64 {
        self.params.beta_tilde()
    }

    /// Ground electron-phonon configuration `g^{(m)}` on the whole lattice.
    pub fn ground_config(&self, m: usize) -> ProductBasisState {
        let k = self.lattice.num_sites();
        let mut s = ProductBasisState::vacuum(k);
        for pos in 0..k {
            if ground_spin(m, self.lattice.site(pos)) > 0.0 {
                s.elec |= 1u64 << (2 * pos);
                s.elec |= 1u64 << (2 * pos + 1);
            }
        }
        s
    }

    /// Whether the cube at `site` is in the `m`-ground state for the given
    /// slice configuration (spins and phonons match `g^{(m)}` on `U(x)`).
    pub fn cube_is_m_ground(&self, config: &ProductBasisState, site: usize, m: usize) -> bool {
        let coords = self.lattice.site(site).clone();
        for nb in self.lattice.chebyshev_ball(&coords, self.params.r0) {
            match nb {
                NeighborSite::Inside(y) => {
                    let want = if ground_spin(m, self.lattice.site(y)) > 0.0 { 2 } else { 0 };
                    if config.site_occupation(y) != want || config.phonon[y] != 0 {
                        return false;
                    }
                    // spin-resolved match: occupation 2 means both spins
                    if want == 2 && (!config.occupied(2 * y) || !config.occupied(2 * y + 1)) {
                        return false;
                    }
                }
                NeighborSite::Outside(c) => {
                    // outside sites carry the boundary configuration g^{(ℓ)}
                    if (ground_spin(m, &c) > 0.0) != (ground_spin(self.label, &c) > 0.0) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Ground label of a cube, if any.
    pub fn cube_ground_label(&self, config: &ProductBasisState, site: usize) -> Option<usize> {
        (1..=2).find(|&m| self.cube_is_m_ground(config, site, m))
    }

    /// `E(n_B) = Σ_{x∈B} {Φ^{(ℓ)}_eff,x(n_e) + ω₀ n_{x,p}}`.
    pub fn config_energy(&self, config: &ProductBasisState, sites: &BTreeSet<usize>) -> f64 {
        let mut e = 0.0;
        for &x in sites {
            e += crate::model::phi_eff_site(
                &self.params,
                &self.lattice,
                &self.full_basis,
                config,
                x,
                crate::model::Boundary::Classical(self.label),
            );
            e += self.params.omega0 * config.phonon[x] as f64;
        }
        e
    }

    /// Site sets `B` that can be covered exactly by hopping supports.
    pub fn coverable(&self, b: &BTreeSet<usize>) -> bool {
        if b.is_empty() {
            return false;
        }
        b.iter().all(|&x| {
            self.family.terms.iter().any(|t| {
                let s = t.support();
                s.contains(&x) && s.is_subset(b)
            })
        })
    }

    // -----------------------------------------------------------------------
    // Block propagators
    // -----------------------------------------------------------------------

    fn filtered_family(&self, c: &BTreeSet<usize>) -> HoppingFamily {
        HoppingFamily {
            terms: self
                .family
                .terms
                .iter()
                .filter(|t| t.support().is_subset(c))
                .cloned()
                .collect(),
        }
    }

    /// Diagonal conditional Hamiltonian `H⁰_{ℓ,B}(n_{∂̄B})` on the local
    /// basis over `B`, given the slice configuration outside `B`.
    fn conditional_h0(
        &self,
        local: &FockBasis,
        b: &BTreeSet<usize>,
        outer: &ProductBasisState,
    ) -> Vec<f64> {
        let thick: BTreeSet<usize> =
            self.lattice.thicken(&b.iter().copied().collect::<Vec<_>>(), self.params.r0);
        local
            .states
            .iter()
            .map(|ls| {
                let full = self.assemble(outer, local, ls);
                let mut e = 0.0;
                for &x in &thick {
                    e += crate::model::phi_eff_site(
                        &self.params,
                        &self.lattice,
                        &self.full_basis,
                        &full,
                        x,
                        crate::model::Boundary::Classical(self.label),
                    );
                    e += self.params.omega0 * full.phonon[x] as f64;
                }
                e
            })
            .collect()
    }

    /// Insert a local configuration over `B` into a full configuration.
    fn assemble(
        &self,
        outer: &ProductBasisState,
        local: &FockBasis,
        ls: &ProductBasisState,
    ) -> ProductBasisState {
        let mut full = outer.clone();
        for (pos, &site) in local.sites.iter().enumerate() {
            full.elec &= !(0b11u64 << (2 * site));
            for spin in [SPIN_UP, SPIN_DOWN] {
                if ls.occupied(2 * pos + spin) {
                    full.elec |= 1u64 << (2 * site + spin);
                }
            }
            full.phonon[site] = ls.phonon[pos];
        }
        full
    }

    /// The exact block propagator `𝒯_B(n_{∂̄B})` as a dense matrix on the
    /// local basis over `B`.
    pub fn propagator_block(
        &self,
        b: &BTreeSet<usize>,
        outer: &ProductBasisState,
        method: ActivityMethod,
    ) -> Result<Array2<C64>> {
        if b.len() > 12 {
            return Err(CoreError::InstanceTooLarge(format!(
                "block of {} sites exceeds the 2^|B| subset-sum cap",
                b.len()
            )));
        }
        let sites: Vec<usize> = b.iter().copied().collect();
        let thick = self.lattice.thicken(&sites, 2 * self.params.r0);
        let boundary_key: Vec<(u64, u64)> = thick
            .iter()
            .filter(|x| !b.contains(x))
            .map(|&x| {
                let e = (outer.elec >> (2 * x)) & 0b11;
                (e, outer.phonon[x] as u64)
            })
            .collect();
        let method_tag = match method {
            ActivityMethod::MoebiusExact => (usize::MAX, usize::MAX, false),
            ActivityMethod::DuhamelTruncated { order_cut, quad_nodes } => {
                (order_cut, quad_nodes, true)
            }
        };
        let key = PropKey { sites: sites.clone(), boundary: boundary_key, method_tag };
        if let Some(hit) = self.prop_cache.borrow().get(&key) {
            return Ok(hit.clone());
        }

        let local = FockBasis::enumerate(&sites, self.params.n_max, Sector::Full)?;
        let h0 = self.conditional_h0(&local, b, outer);
        let beta_t = self.beta_tilde();
        let dim = local.dim();

        // T(B) = 0 unless B is exactly coverable by hopping supports.
        if !self.coverable(b) {
            let z = Array2::<C64>::zeros((dim, dim));
            self.prop_cache.borrow_mut().insert(key, z.clone());
            return Ok(z);
        }

        let result = match method {
            ActivityMethod::MoebiusExact => {
                let mut acc = Array2::<C64>::zeros((dim, dim));
                let n = sites.len();
                for mask in 0..(1u32 << n) {
                    let c: BTreeSet<usize> = sites
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &s)| s)
                        .collect();
                    let sign = if (n as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                    let v = dressed_hopping(&self.params, &self.filtered_family(&c), &local);
                    let mut m = v.to_dense();
                    for (i, &e) in h0.iter().enumerate() {
                        m[(i, i)] += C64::new(e, 0.0);
                    }
                    m.mapv_inplace(|x| x * C64::new(-beta_t, 0.0));
                    let f = expm(&m)?;
                    acc += &f.mapv(|x| x * sign);
                }
                acc
            }
            ActivityMethod::DuhamelTruncated { order_cut, quad_nodes } => {
                let mut acc = Array2::<C64>::zeros((dim, dim));
                let n = sites.len();
                for mask in 0..(1u32 << n) {
                    let c: BTreeSet<usize> = sites
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &s)| s)
                        .collect();
                    let sign = if (n as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                    let v = dressed_hopping(
                        &ModelParams { lambda: C64::new(1.0, 0.0), ..self.params.clone() },
                        &self.filtered_family(&c),
                        &local,
                    );
                    let series =
                        duhamel_series(&v, &h0, self.params.lambda, beta_t, order_cut, quad_nodes)?;
                    acc += &series.mapv(|x| x * sign);
                }
                acc
            }
        };
        self.prop_cache.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    /// Matrix element `⟨na| T(B, nb) |nb⟩` of the slab operator
    /// `K(Σ) = e^{−β̃E(n_{Λ\B̄})} 𝒯_B(n_{∂̄B}) P_n`, including the fermionic
    /// factorization signs of the `H_B ⊗ H_{Λ\B}` identification.
    pub fn k_element(
        &self,
        na: &ProductBasisState,
        b: &BTreeSet<usize>,
        nb: &ProductBasisState,
        method: ActivityMethod,
    ) -> Result<C64> {
        let beta_t = self.beta_tilde();
        let all: BTreeSet<usize> = (0..self.lattice.num_sites()).collect();
        if b.is_empty() {
            if na != nb {
                return Ok(C64::new(0.0, 0.0));
            }
            let e = self.config_energy(nb, &all);
            return Ok(C64::new((-beta_t * e).exp(), 0.0));
        }
        // configurations must agree outside B
        for x in all.difference(b) {
            let ea = (na.elec >> (2 * x)) & 0b11;
            let eb = (nb.elec >> (2 * x)) & 0b11;
            if ea != eb || na.phonon[*x] != nb.phonon[*x] {
                return Ok(C64::new(0.0, 0.0));
            }
        }
        let sites: Vec<usize> = b.iter().copied().collect();
        let thick = self.lattice.thicken(&sites, self.params.r0);
        let outside: BTreeSet<usize> = all.difference(&thick).copied().collect();
        let energy = self.config_energy(nb, &outside);
        let prop = self.propagator_block(b, nb, method)?;
        let local = FockBasis::enumerate(&sites, self.params.n_max, Sector::Full)?;
        let (la, sa) = self.restrict(na, &local);
        let (lb, sb) = self.restrict(nb, &local);
        let v = prop[(la, lb)];
        Ok(v * (sa * sb) as f64 * C64::new((-beta_t * energy).exp(), 0.0))
    }

    /// Restrict a full configuration to a local basis over `B`, returning the
    /// local index and the factorization sign `θ` of `|n_Λ⟩ = θ |n_B⟩⊗|n_rest⟩`.
    fn restrict(&self, full: &ProductBasisState, local: &FockBasis) -> (usize, i32) {
        let mut ls = ProductBasisState::vacuum(local.sites.len());
        for (pos, &site) in local.sites.iter().enumerate() {
            for spin in [SPIN_UP, SPIN_DOWN] {
                if full.occupied(2 * site + spin) {
                    ls.elec |= 1u64 << (2 * pos + spin);
                }
            }
            ls.phonon[pos] = full.phonon[site];
        }
        let idx = local.index_of(&ls).expect("restricted state in local basis");
        let rest: Vec<usize> =
            (0..self.lattice.num_sites()).filter(|s| !local.sites.contains(s)).collect();
        let sign = crate::fock::factorization_sign(full, &local.sites, &rest);
        (idx, sign)
    }

    // -----------------------------------------------------------------------
    // Contour extraction
    // -----------------------------------------------------------------------

    /// Excited-cube set of a slice sequence.
    fn excited_set(&self, slices: &[SliceLabel]) -> CubeSet {
        let mut cubes = CubeSet::new();
        for (ti, slice) in slices.iter().enumerate() {
            let t = ti + 1;
            for x in 0..self.lattice.num_sites() {
                let quantum = slice.quantum_sites.contains(&x);
                if quantum || self.cube_ground_label(&slice.config, x).is_none() {
                    cubes.insert((x, t));
                }
            }
        }
        cubes
    }

    /// Complement components of a cube set, each flagged with whether it
    /// touches the outside ground region (spatial boundary of `Λ`).
    fn complement_components(&self, support: &CubeSet) -> Vec<(CubeSet, bool)> {
        let mut rest = CubeSet::new();
        for c in self.st.cubes() {
            if !support.contains(&c) {
                rest.insert(c);
            }
        }
        let comps = rest.connected_components(&self.st);
        comps
            .into_iter()
            .map(|c| {
                let touches = c.iter().any(|&(x, _)| {
                    self.lattice
                        .neighbors(x)
                        .iter()
                        .any(|nb| matches!(nb, NeighborSite::Outside(_)))
                });
                (c, touches)
            })
            .collect()
    }

    /// Extract the contour family realized by a slice sequence; errors on
    /// label-inconsistent (non-matching) configurations.
    pub fn extract_contours(&self, slices: &[SliceLabel]) -> Result<Vec<Contour>> {
        if slices.len() != self.st.m {
            return Err(CoreError::Geometry("slice count must equal M".into()));
        }
        let excited = self.excited_set(slices);
        let q_all = CubeSet::from_cubes(slices.iter().enumerate().flat_map(|(ti, s)| {
            s.quantum_sites.iter().map(move |&x| (x, ti + 1)).collect::<Vec<_>>()
        }));
        // ground-cube labels
        let mut label_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (ti, slice) in slices.iter().enumerate() {
            let t = ti + 1;
            for x in 0..self.lattice.num_sites() {
                if excited.contains(&(x, t)) {
                    continue;
                }
                let m = self
                    .cube_ground_label(&slice.config, x)
                    .ok_or_else(|| CoreError::NonMatching("excited cube outside support".into()))?;
                label_of.insert((x, t), m);
            }
        }
        // complement components must be label-constant; outside-touching ones
        // must carry the boundary label
        let comps = self.complement_components(&excited);
        let mut comp_label: Vec<(CubeSet, usize, bool)> = Vec::new();
        for (comp, touches) in comps {
            let mut labels: BTreeSet<usize> = BTreeSet::new();
            for c in comp.iter() {
                labels.insert(label_of[c]);
            }
            if labels.len() != 1 {
                return Err(CoreError::NonMatching(format!(
                    "complement component carries labels {labels:?}"
                )));
            }
            let l = *labels.iter().next().unwrap();
            if touches && l != self.label {
                return Err(CoreError::NonMatching(format!(
                    "exterior region carries label {l}, boundary is {}",
                    self.label
                )));
            }
            comp_label.push((comp, l, touches));
        }
        // assemble contours
        let mut out = Vec::new();
        for supp in excited.connected_components(&self.st) {
            let winding = supp.wraps_time(&self.st);
            // interiors: complement components adjacent only to this support
            // (at desk scale: components not touching the outside)
            let interior: Vec<(CubeSet, usize)> = comp_label
                .iter()
                .filter(|(c, _, touches)| !touches && self.adjacent(c, &supp))
                .map(|(c, l, _)| (c.clone(), *l))
                .collect();
            let q = supp.intersection(&q_all);
            out.push(Contour {
                support: supp,
                exterior_label: self.label,
                interior,
                winding,
                q_cubes: Some(q),
            });
        }
        Ok(out)
    }

    fn adjacent(&self, a: &CubeSet, b: &CubeSet) -> bool {
        for &(x, t) in a.iter() {
            for nb in self.lattice.neighbors(x) {
                if let NeighborSite::Inside(y) = nb {
                    if b.contains(&(y, t)) {
                        return true;
                    }
                }
            }
            if b.contains(&(x, self.st.t_next(t))) || b.contains(&(x, self.st.t_prev(t))) {
                return true;
            }
        }
        false
    }

    /// Enumerate all contours with support size ≤ `max_cubes` (single
    /// connected components, labels induced by the boundary).
    pub fn enumerate_contours(&self, max_cubes: usize) -> Result<Vec<Contour>> {
        let all: Vec<(usize, usize)> = self.st.cubes().collect();
        let mut supports: BTreeSet<CubeSet> = BTreeSet::new();
        // grow connected sets from each seed
        let mut queue: VecDeque<CubeSet> = VecDeque::new();
        for &c in &all {
            let mut s = CubeSet::new();
            s.insert(c);
            queue.push_back(s);
        }
        while let Some(s) = queue.pop_front() {
            if supports.contains(&s) {
                continue;
            }
            supports.insert(s.clone());
            if s.len() >= max_cubes {
                continue;
            }
            for &c in &all {
                if s.contains(&c) {
                    continue;
                }
                let mut bigger = s.clone();
                bigger.insert(c);
                if bigger.is_connected(&self.st) && !supports.contains(&bigger) {
                    queue.push_back(bigger);
                }
            }
        }
        let mut out = Vec::new();
        for supp in supports {
            if supp.is_empty() || !supp.is_connected(&self.st) {
                continue;
            }
            let comps = self.complement_components(&supp);
            if comps.iter().any(|(_, touches)| !touches) {
                // enclosed interior regions do not occur at audit scale
                continue;
            }
            let winding = supp.wraps_time(&self.st);
            out.push(Contour {
                support: supp,
                exterior_label: self.label,
                interior: vec![],
                winding,
                q_cubes: None,
            });
        }
        Ok(out)
    }

    // -----------------------------------------------------------------------
    // Activities
    // -----------------------------------------------------------------------

    /// Ground label seen by a non-support cube of a family.
    fn family_ground_label(&self, family: &[Contour], cube: (usize, usize)) -> Result<usize> {
        // exterior: boundary label; interiors: look up in the members
        for y in family {
            for (comp, l) in &y.interior {
                if comp.contains(&cube) {
                    return Ok(*l);
                }
            }
        }
        Ok(self.label)
    }

    /// Valid slice states of a family at slice `t`: quantum subsets and free
    /// configurations on the support sites, constrained so the realized
    /// excited set matches the family exactly.
    fn slice_states(
        &self,
        family: &[Contour],
        fiat: &CubeSet,
        t: usize,
    ) -> Result<Vec<(BTreeSet<usize>, ProductBasisState)>> {
        let union: CubeSet = family
            .iter()
            .fold(CubeSet::new(), |acc, y| acc.union(&y.support))
            .union(fiat);
        let slice_sites: Vec<usize> = union.slice(t).into_iter().collect();
        let k = slice_sites.len();
        // baseline configuration from the complement labels
        let mut base = ProductBasisState::vacuum(self.lattice.num_sites());
        for x in 0..self.lattice.num_sites() {
            if slice_sites.contains(&x) {
                continue;
            }
            let m = self.family_ground_label(family, (x, t))?;
            if ground_spin(m, self.lattice.site(x)) > 0.0 {
                base.elec |= 0b11u64 << (2 * x);
            }
        }
        // enumerate configurations on the support sites
        let per_site = 4 * (self.params.n_max + 1);
        let total = per_site.pow(k as u32);
        if total > 2_000_000 {
            return Err(CoreError::InstanceTooLarge(format!(
                "slice enumeration of {total} configurations"
            )));
        }
        // quantum subsets: ∅ plus coverable subsets of the slice sites
        let mut q_options: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
        for mask in 1u32..(1 << k) {
            let b: BTreeSet<usize> = slice_sites
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            if self.coverable(&b) {
                q_options.push(b);
            }
        }
        let mut out = Vec::new();
        for code in 0..total {
            let mut cfg = base.clone();
            let mut c = code;
            for &x in &slice_sites {
                let v = c % per_site;
                c /= per_site;
                let elec = (v % 4) as u64;
                let ph = (v / 4) as u8;
                cfg.elec |= elec << (2 * x);
                cfg.phonon[x] = ph;
            }
            // spill protection: cubes outside the union must sit in the
            // ground state matching their assigned label
            let mut ok = true;
            for x in 0..self.lattice.num_sites() {
                if union.contains(&(x, t)) {
                    continue;
                }
                let m = self.family_ground_label(family, (x, t))?;
                if !self.cube_is_m_ground(&cfg, x, m) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            for q in &q_options {
                // support cubes that are neither quantum nor anchor cubes
                // must be configuration-excited
                let mut valid = true;
                for &x in &slice_sites {
                    let cube = (x, t);
                    let in_support = family.iter().any(|y| y.support.contains(&cube));
                    let quantum = q.contains(&x);
                    if quantum && !in_support && !fiat.contains(&cube) {
                        valid = false; // quantum sites must lie in the support
                        break;
                    }
                    if in_support
                        && !quantum
                        && !fiat.contains(&cube)
                        && self.cube_ground_label(&cfg, x).is_some()
                    {
                        valid = false;
                        break;
                    }
                }
                if valid {
                    out.push((q.clone(), cfg.clone()));
                }
            }
        }
        Ok(out)
    }

    /// Joint activity `ρ(Y₁, …, Y_n) = Σ_{Σ ∈ 𝒮(𝕐)} w(Σ)` of a compatible
    /// family, by exhaustive enumeration of the realizing slice sequences.
    pub fn activity_of_family(
        &self,
        family: &[Contour],
        method: ActivityMethod,
    ) -> Result<ActivityValue> {
        let total_cubes: usize = family.iter().map(|y| y.support.len()).sum();
        if total_cubes > 10 {
            return Err(CoreError::InstanceTooLarge(format!(
                "family with {total_cubes} cubes exceeds the activity cap"
            )));
        }
        let fiat = CubeSet::new();
        self.activity_engine(family, &fiat, None, method)
    }

    /// Activity of a single contour.
    pub fn activity(&self, y: &Contour, method: ActivityMethod) -> Result<ActivityValue> {
        self.activity_of_family(std::slice::from_ref(y), method)
    }

    /// `|ρ(Y₁,Y₂) − ρ(Y₁)ρ(Y₂)|` for a compatible pair.
    pub fn factorization_check(
        &self,
        y1: &Contour,
        y2: &Contour,
        method: ActivityMethod,
    ) -> Result<f64> {
        if !self.compatible(y1, y2) {
            return Err(CoreError::InvalidParameter("contours are not compatible".into()));
        }
        let joint = self.activity_of_family(&[y1.clone(), y2.clone()], method)?.rho;
        let a = self.activity(y1, method)?.rho;
        let b = self.activity(y2, method)?.rho;
        Ok((joint - a * b).norm())
    }

    /// Compatibility: disjoint supports that do not merge under face
    /// adjacency (the union's components are exactly the two supports).
    pub fn compatible(&self, y1: &Contour, y2: &Contour) -> bool {
        y1.support.is_disjoint(&y2.support) && !self.adjacent(&y1.support, &y2.support)
    }

    /// The common engine: enumerate slice states, chain the transfer
    /// elements around the periodic time direction, weight by the
    /// ground-energy normalization.
    fn activity_engine(
        &self,
        family: &[Contour],
        fiat: &CubeSet,
        psi: Option<&PsiInsertion>,
        method: ActivityMethod,
    ) -> Result<ActivityValue> {
        let m = self.st.m;
        let mut per_slice = Vec::with_capacity(m);
        for t in 1..=m {
            per_slice.push(self.slice_states(family, fiat, t)?);
        }
        if per_slice.iter().any(|s| s.is_empty()) {
            // no slice sequence realizes this family
            return Ok(ActivityValue {
                rho: C64::new(0.0, 0.0),
                method,
                decomposition: vec![],
            });
        }
        let chains: usize = per_slice.iter().map(|s| s.len()).product();
        if chains > 50_000_000 {
            return Err(CoreError::InstanceTooLarge(format!("{chains} slice chains")));
        }
        // precompute transfer matrices between consecutive slices
        // T_t[a][b] = ⟨n_a | K(B_b, n_b) | n_b⟩ for a ∈ slice t, b ∈ slice t+1
        // (the Ψ insertion modifies the M → 1 bond)
        let mut transfer: Vec<Array2<C64>> = Vec::with_capacity(m);
        for ti in 0..m {
            let from = &per_slice[ti];
            let to = &per_slice[(ti + 1) % m];
            let mut mat = Array2::<C64>::zeros((from.len(), to.len()));
            for (ai, (_, na)) in from.iter().enumerate() {
                for (bi, (qb, nb)) in to.iter().enumerate() {
                    let mut v = if ti + 1 == m {
                        // bond M → 1 carries the observable if present
                        match psi {
                            Some(p) => self.k_element_with_psi(na, qb, nb, p, method)?,
                            None => self.k_element(na, qb, nb, method)?,
                        }
                    } else {
                        self.k_element(na, qb, nb, method)?
                    };
                    if v.norm() < 1e-300 {
                        v = C64::new(0.0, 0.0);
                    }
                    mat[(ai, bi)] = v;
                }
            }
            transfer.push(mat);
        }
        // decomposition record by explicit chain enumeration when affordable
        let union: CubeSet =
            family.iter().fold(CubeSet::new(), |acc, y| acc.union(&y.support)).union(fiat);
        let ground_cubes = self.st.num_cubes() - union.len();
        let norm = (self.beta_tilde() * self.e_e * ground_cubes as f64).exp();

        let mut total = KahanC64::default();
        let mut decomposition: BTreeMap<DecompKey, KahanC64> = BTreeMap::new();
        let record = chains <= 2_000_000;
        // iterate chains with an index vector
        let mut idx = vec![0usize; m];
        'outer: loop {
            // weight of this chain
            let mut w = C64::new(1.0, 0.0);
            for ti in 0..m {
                let a = idx[ti];
                let b = idx[(ti + 1) % m];
                w *= transfer[ti][(a, b)];
                if w.norm() == 0.0 {
                    break;
                }
            }
            if w.norm() > 0.0 {
                total.add(w);
                if record {
                    let key = self.decomp_key(family, &per_slice, &idx);
                    decomposition.entry(key).or_default().add(w);
                }
            }
            // increment
            let mut k = m;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_slice[k].len() {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    break 'outer;
                }
            }
        }
        let rho = total.value() * norm;
        let decomposition = decomposition
            .into_iter()
            .map(|(k, v)| (k, v.value() * norm))
            .collect();
        Ok(ActivityValue { rho, method, decomposition })
    }

    fn decomp_key(
        &self,
        family: &[Contour],
        per_slice: &[Vec<(BTreeSet<usize>, ProductBasisState)>],
        idx: &[usize],
    ) -> DecompKey {
        let mut quantum = Vec::new();
        let mut ee = Vec::new();
        let mut pe = Vec::new();
        for (ti, &i) in idx.iter().enumerate() {
            let t = ti + 1;
            let (q, cfg) = &per_slice[ti][i];
            for &x in q {
                quantum.push((x, t));
            }
            for y in family {
                for &(x, tt) in y.support.iter() {
                    if tt != t || q.contains(&x) {
                        continue;
                    }
                    // classical cube: classify electron/phonon excitation
                    if cfg.phonon[x] > 0 {
                        pe.push((x, t));
                    }
                    let mut probe = cfg.clone();
                    probe.phonon = vec![0; probe.phonon.len()];
                    if self.cube_ground_label(&probe, x).is_none() {
                        ee.push((x, t));
                    }
                }
            }
        }
        quantum.sort_unstable();
        ee.sort_unstable();
        pe.sort_unstable();
        DecompKey { quantum, electron_excited: ee, phonon_excited: pe }
    }

    // -----------------------------------------------------------------------
    // Observable-anchored activities
    // -----------------------------------------------------------------------

    /// `⟨na| Ψ K(B, nb) |nb⟩` for the bond carrying the observable.
    fn k_element_with_psi(
        &self,
        na: &ProductBasisState,
        b: &BTreeSet<usize>,
        nb: &ProductBasisState,
        psi: &PsiInsertion,
        method: ActivityMethod,
    ) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (nc, amp) in psi.column_support(self, na) {
            let k = self.k_element(&nc, b, nb, method)?;
            acc += amp * k;
        }
        Ok(acc)
    }

    /// Anchor cubes of an observable: the cubes over its support at the two
    /// slices adjacent to the insertion bond (`t = 1` and `t = M`).
    pub fn psi_anchor(&self, psi: &PsiInsertion) -> CubeSet {
        let mut fiat = CubeSet::new();
        for &x in &psi.support {
            fiat.insert((x, 1));
            fiat.insert((x, self.st.m));
        }
        fiat
    }

    /// Observable-anchored activity `ρ_Ψ(Y_Ψ)`: the anchor cubes join the
    /// support at the insertion slices, their configurations are summed
    /// unconstrained, and `Ψ` is inserted in the `M → 1` bond.
    ///
    /// `support` is the excited part `D` of `supp Y_Ψ = D ∪ D(Ψ)`; it may be
    /// empty (pure anchor contour). The union with the anchor must be
    /// connected.
    pub fn activity_with_observable(
        &self,
        support: &CubeSet,
        psi: &PsiInsertion,
        method: ActivityMethod,
    ) -> Result<ActivityValue> {
        let fiat = self.psi_anchor(psi);
        let total = support.union(&fiat);
        if !total.is_connected(&self.st) {
            return Err(CoreError::InvalidParameter(
                "observable anchor must be contained in a single contour support".into(),
            ));
        }
        if total.len() > 10 {
            return Err(CoreError::InstanceTooLarge("anchored support too large".into()));
        }
        let y = Contour {
            support: support.clone(),
            exterior_label: self.label,
            interior: vec![],
            winding: total.wraps_time(&self.st),
            q_cubes: None,
        };
        let family = if support.is_empty() { vec![] } else { vec![y] };
        self.activity_engine(&family, &fiat, Some(psi), method)
    }

    /// Reconstruction summary.
    pub fn reconstruct_partition(&self, method: ActivityMethod) -> Result<Reconstruction> {
        let ns = self.lattice.num_sites();
        if ns > 4 || self.st.m > 3 || self.params.n_max > 2 {
            return Err(CoreError::InstanceTooLarge(
                "reconstruction needs |Λ| ≤ 4, M ≤ 3, n_max ≤ 2".into(),
            ));
        }
        // direct side
        let h = crate::model::build_transformed(
            &self.params,
            &self.lattice,
            &self.full_basis,
            crate::model::Boundary::Classical(self.label),
        )?
        .to_dense();
        let scaled = h.mapv(|v| v * C64::new(-self.params.beta, 0.0));
        let em = expm(&scaled)?;
        let z_direct: C64 = (0..self.full_basis.dim()).map(|i| em[(i, i)]).sum();

        // contour side: enumerate contours and compatible families
        let contours = self.enumerate_contours(self.st.num_cubes())?;
        let mut activities = Vec::new();
        for y in &contours {
            activities.push(self.activity(y, method)?.rho);
        }
        let mut z_contour = KahanC64::default();
        // empty family
        z_contour.add(C64::new(
            (-self.beta_tilde() * self.e_e * self.st.num_cubes() as f64).exp(),
            0.0,
        ));
        // families: all subsets of pairwise-compatible contours
        let n = contours.len();
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, vec![])];
        while let Some((start, chosen)) = stack.pop() {
            for i in start..n {
                if chosen.iter().any(|&j| !self.compatible(&contours[i], &contours[j])) {
                    continue;
                }
                let mut fam = chosen.clone();
                fam.push(i);
                let cubes: usize = fam.iter().map(|&j| contours[j].support.len()).sum();
                let ground = self.st.num_cubes() - cubes;
                let mut w = C64::new((-self.beta_tilde() * self.e_e * ground as f64).exp(), 0.0);
                for &j in &fam {
                    w *= activities[j];
                }
                z_contour.add(w);
                stack.push((i + 1, fam));
            }
        }
        let z_contour = z_contour.value();
        let deviation = (z_contour / z_direct - C64::new(1.0, 0.0)).norm();
        Ok(Reconstruction { z_contour, z_direct, deviation, contours_used: contours.len() })
    }

    /// Brute-force partition value by summing `W(Σ)` over every slice
    /// sequence (test oracle; guards its own size).
    pub fn brute_force_partition(&self, method: ActivityMethod) -> Result<C64> {
        let mut states: Vec<(BTreeSet<usize>, ProductBasisState)> = Vec::new();
        let sites: Vec<usize> = (0..self.lattice.num_sites()).collect();
        let mut b_options: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
        for mask in 1u32..(1 << sites.len()) {
            let b: BTreeSet<usize> = sites
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            if self.coverable(&b) {
                b_options.push(b);
            }
        }
        for cfg in &self.full_basis.states {
            for b in &b_options {
                states.push((b.clone(), cfg.clone()));
            }
        }
        let m = self.st.m;
        let chains = states.len().pow(m as u32);
        if chains > 100_000_000 {
            return Err(CoreError::InstanceTooLarge(format!("{chains} sequences")));
        }
        // transfer matrix over all states
        let n = states.len();
        let mut mat = Array2::<C64>::zeros((n, n));
        for (ai, (_, na)) in states.iter().enumerate() {
            for (bi, (qb, nb)) in states.iter().enumerate() {
                mat[(ai, bi)] = self.k_element(na, qb, nb, method)?;
            }
        }
        // Tr[Tᴹ]
        let mut pow = mat.clone();
        for _ in 1..m {
            pow = pow.dot(&mat);
        }
        Ok((0..n).map(|i| pow[(i, i)]).sum())
    }
}

/// Reconstruction comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    #[serde(skip)]
    pub z_contour: C64,
    #[serde(skip)]
    pub z_direct: C64,
    pub deviation: f64,
    pub contours_used: usize,
}

/// A product observable `Ψ = Ψ_e ⊗ exp(i Σ_x μ_x q_x)` anchored at `t = 1`.
pub struct PsiInsertion {
    /// Electron factor as a sparse operator on the full basis.
    pub electron: SparseOperator,
    /// Site positions carrying phonon phases with their strengths `μ_x`.
    pub phonon_phases: Vec<(usize, f64)>,
    /// Support of the electron factor (site positions).
    pub support: Vec<usize>,
}

impl PsiInsertion {
    /// Density observable `n̂_x` (no phonon factor).
    pub fn density(instance: &ContourInstance, site: usize) -> PsiInsertion {
        let electron = crate::fock::diagonal_operator(&instance.full_basis, |s| {
            s.site_occupation(site) as f64
        });
        PsiInsertion { electron, phonon_phases: vec![], support: vec![site] }
    }

    /// Identity observable anchored at a site.
    pub fn identity(instance: &ContourInstance, site: usize) -> PsiInsertion {
        PsiInsertion {
            electron: SparseOperator::identity(instance.full_basis.dim()),
            phonon_phases: vec![],
            support: vec![site],
        }
    }

    /// Phonon phase observable `e^{iμ q_x}` anchored at a site.
    pub fn phonon_phase(instance: &ContourInstance, site: usize, mu: f64) -> PsiInsertion {
        PsiInsertion {
            electron: SparseOperator::identity(instance.full_basis.dim()),
            phonon_phases: vec![(site, mu)],
            support: vec![site],
        }
    }

    /// Operator norm `‖Ψ‖` for the diagonal electron factors used here
    /// (phonon phases are unitary).
    pub fn norm(&self) -> f64 {
        let mut by_diag: HashMap<u32, C64> = HashMap::new();
        for &(r, c, v) in &self.electron.entries {
            assert_eq!(r, c, "norm helper expects a diagonal electron factor");
            *by_diag.entry(r).or_insert(C64::new(0.0, 0.0)) += v;
        }
        by_diag.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Row expansion `⟨na|Ψ = Σ_c amp_c ⟨n_c|` with `amp_c = Ψ[na, c]`.
    fn column_support(
        &self,
        instance: &ContourInstance,
        na: &ProductBasisState,
    ) -> Vec<(ProductBasisState, C64)> {
        let na_idx = instance.full_basis.index_of(na).expect("state in basis");
        let mut partial: Vec<(ProductBasisState, C64)> = Vec::new();
        for &(r, c, v) in &self.electron.entries {
            if r as usize == na_idx {
                partial.push((instance.full_basis.state(c as usize).clone(), v));
            }
        }
        // phonon phases: ⟨…,n_in,…| e^{iμq_x} = Σ_{n_out} phase[n_in, n_out] ⟨…,n_out,…|
        for &(site, mu) in &self.phonon_phases {
            let phase = phase_of_q(mu, instance.params.n_max);
            let mut next = Vec::new();
            for (state, amp) in partial {
                let n_in = state.phonon[site] as usize;
                for n_out in 0..=instance.params.n_max {
                    let a = phase[(n_in, n_out)];
                    if a.norm_sqr() == 0.0 {
                        continue;
                    }
                    let mut s = state.clone();
                    s.phonon[site] = n_out as u8;
                    next.push((s, amp * a));
                }
            }
            partial = next;
        }
        partial
    }
}

/// Order-truncated time-ordered expansion of `e^{−β̃(H⁰ + λV)}` in the
/// eigenbasis of the diagonal `H⁰` (energies given per basis state). With
/// `quad_nodes = 0` the simplex integrals are divided differences of the
/// exponential; otherwise composite midpoint quadrature with the given
/// resolution.
pub fn duhamel_series(
    v: &SparseOperator,
    h0: &[f64],
    lambda: C64,
    beta_t: f64,
    order_cut: usize,
    quad_nodes: usize,
) -> Result<Array2<C64>> {
    let dim = v.dim;
    let mut acc = Array2::<C64>::zeros((dim, dim));
    // order 0
    for i in 0..dim {
        acc[(i, i)] = C64::new((-beta_t * h0[i]).exp(), 0.0);
    }
    // adjacency of V
    let mut adj: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
    for &(r, c, val) in &v.entries {
        adj[c as usize].push((r as usize, val));
    }
    // walk paths of length n: k0 → k1 → … → kn contributes
    // (−λ)^n Π V[k_{j}, k_{j−1}] · I(E_{k0..kn})
    for n in 1..=order_cut {
        let lam_pow = (-lambda).powu(n as u32);
        // enumerate paths from each starting basis state
        let mut stack: Vec<(Vec<usize>, C64)> = (0..dim).map(|k| (vec![k], C64::new(1.0, 0.0))).collect();
        while let Some((path, amp)) = stack.pop() {
            if path.len() == n + 1 {
                let energies: Vec<f64> = path.iter().map(|&k| h0[k]).collect();
                let integral = if quad_nodes == 0 {
                    exp_divided_difference(beta_t, &energies)?
                } else {
                    simplex_quadrature(beta_t, &energies, quad_nodes)
                };
                let row = *path.last().unwrap();
                let col = path[0];
                acc[(row, col)] += lam_pow * amp * integral;
                continue;
            }
            let last = *path.last().unwrap();
            for &(next, val) in &adj[last] {
                let mut p = path.clone();
                p.push(next);
                stack.push((p, amp * val));
            }
        }
    }
    Ok(acc)
}

/// Composite midpoint evaluation of the time-ordered simplex integral
/// `∫_{0≤s₁≤…≤s_n≤β̃} e^{−s₁e₀} e^{−(s₂−s₁)e₁} ⋯ e^{−(β̃−s_n)e_n} ds`.
fn simplex_quadrature(beta_t: f64, energies: &[f64], nodes: usize) -> f64 {
    let n = energies.len() - 1;
    if n == 0 {
        return (-beta_t * energies[0]).exp();
    }
    let h = beta_t / nodes as f64;
    let mut acc = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        let ordered = idx.windows(2).all(|w| w[0] <= w[1]);
        if ordered {
            let s: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
            let mut expo = -s[0] * energies[0];
            for j in 1..n {
                expo += -(s[j] - s[j - 1]) * energies[j];
            }
            expo += -(beta_t - s[n - 1]) * energies[n];
            // coincident midpoints sit on simplex facets: half weight each
            let mut weight = 1.0;
            for j in 1..n {
                if idx[j] == idx[j - 1] {
                    weight *= 0.5;
                }
            }
            acc += weight * expo.exp() * h.powi(n as i32);
        }
        let mut k = n;
        loop {
            if k == 0 {
                return acc;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            if k == 0 {
                return acc;
            }
        }
    }
}

/// Fixed hop sequence `ω = ((s_1, A_1), …, (s_m, A_m))` with ascending
/// times; used for the factorized-evaluation cross-checks.
pub struct OmegaSample {
    pub events: Vec<(f64, HoppingTerm)>,
}

impl ContourInstance {
    /// `𝒯_B(ω, n_{∂̄B})` for a fixed hop sequence: the explicit product
    /// `e^{−s₁H⁰} h₁ e^{−(s₂−s₁)H⁰} ⋯ h_m e^{−(β̃−s_m)H⁰}` on the local basis.
    pub fn propagator_fixed_omega(
        &self,
        b: &BTreeSet<usize>,
        outer: &ProductBasisState,
        omega: &OmegaSample,
    ) -> Result<Array2<C64>> {
        let sites: Vec<usize> = b.iter().copied().collect();
        let local = FockBasis::enumerate(&sites, self.params.n_max, Sector::Full)?;
        let h0 = self.conditional_h0(&local, b, outer);
        let dim = local.dim();
        let beta_t = self.beta_tilde();
        let mut acc = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            acc[(i, i)] = C64::new(1.0, 0.0);
        }
        // accumulate left-to-right: acc ← acc · e^{−gap H⁰} · h
        let scale_cols = |m: &mut Array2<C64>, gap: f64| {
            for (j, &e) in h0.iter().enumerate() {
                let f = C64::new((-gap * e).exp(), 0.0);
                for i in 0..m.nrows() {
                    m[(i, j)] *= f;
                }
            }
        };
        let mut prev = 0.0;
        for (s, term) in &omega.events {
            if *s < prev || *s > beta_t {
                return Err(CoreError::InvalidParameter(
                    "ω times must be ordered in [0, β̃]".into(),
                ));
            }
            scale_cols(&mut acc, s - prev);
            let hop = dressed_hopping(
                &ModelParams { lambda: C64::new(1.0, 0.0), ..self.params.clone() },
                &HoppingFamily { terms: vec![term.clone()] },
                &local,
            )
            .to_dense();
            acc = acc.dot(&hop);
            prev = *s;
        }
        scale_cols(&mut acc, beta_t - prev);
        Ok(acc)
    }
}

/// Electron monomial application used by tests.
pub fn apply_monomial(
    basis: &FockBasis,
    term: &HoppingTerm,
    state: &ProductBasisState,
) -> Option<(ProductBasisState, i32)> {
    let mut cur = state.clone();
    let mut sign = 1i32;
    for m in term.modes.iter().rev() {
        let pos = basis.position_of_site(m.site)?;
        let mode = basis.mode(pos, m.spin);
        let step = if m.kappa == 1 {
            apply_creation(&cur, mode)
        } else {
            apply_annihilation(&cur, mode)
        };
        match step {
            Some((next, sg)) => {
                cur = next;
                sign *= sg;
            }
            None => return None,
        }
    }
    Some((cur, sign))
}
