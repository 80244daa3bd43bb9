//! Finite hypercubic lattices `Λ_L = [−L, L−1]^d ∩ Z^d`, the space-time
//! lattice `Λ × {1,…,M}` with periodic time, and the cube-set geometry the
//! contour machinery is built on.
//!
//! Conventions used across the whole crate:
//!
//! - Sites are ordered lexicographically on their coordinate tuples. This
//!   single total order also induces the fermionic mode order (see
//!   [`crate::fock`]).
//! - Edges are nearest-neighbor pairs in the ℓ¹ sense (`‖x−y‖₁ = 1`);
//!   distances, balls and thickenings use the Chebyshev (max) norm.
//! - Cube adjacency is face adjacency: `2(d+1)` neighbors, spatial ℓ¹
//!   neighbors at equal time plus the two time neighbors `t ± 1 (mod M)`.

use crate::error::{CoreError, Result};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Coordinates of a lattice point of `Z^d`.
pub type Site = Vec<i64>;

/// Sign `(−1)^{Σ_i |x_i|}`: `+1` on even sites, `−1` on odd sites.
pub fn parity(site: &[i64]) -> i64 {
    let s: i64 = site.iter().map(|c| c.abs()).sum();
    if s % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A finite hypercubic lattice, optionally with torus identification.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub d: usize,
    pub l: i64,
    pub periodic: bool,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    /// Canonical edge list: one entry `(x, x+e_i)` per site and direction
    /// (kept with multiplicity on small tori).
    edges: Vec<(usize, usize)>,
}

impl Lattice {
    /// Build `Λ_L = [−L, L−1]^d` with canonical (lexicographic) site order.
    pub fn build(d: usize, l: i64, periodic: bool) -> Result<Lattice> {
        if d < 1 || l < 1 {
            return Err(CoreError::Geometry(format!("need d ≥ 1 and L ≥ 1, got d={d}, L={l}")));
        }
        let side = 2 * l as u128;
        let mut count: u128 = 1;
        for _ in 0..d {
            count = count.checked_mul(side).ok_or(CoreError::DimensionOverflow {
                dim: u128::MAX,
                budget: 1 << 32,
            })?;
        }
        if count > (1 << 32) {
            return Err(CoreError::DimensionOverflow { dim: count, budget: 1 << 32 });
        }

        let side = side as usize;
        let mut sites = Vec::with_capacity(count as usize);
        for idx in 0..count as usize {
            let mut k = idx;
            let mut s = vec![0i64; d];
            for j in (0..d).rev() {
                s[j] = -l + (k % side) as i64;
                k /= side;
            }
            sites.push(s);
        }
        Self::finish(d, l, periodic, sites)
    }

    fn finish(d: usize, l: i64, periodic: bool, mut sites: Vec<Site>) -> Result<Lattice> {
        sites.sort();
        let index: HashMap<Site, usize> =
            sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut edges = Vec::new();
        for (i, s) in sites.iter().enumerate() {
            for dir in 0..d {
                let mut y = s.clone();
                y[dir] += 1;
                if periodic {
                    wrap_into(&mut y, l);
                    edges.push((i, index[&y]));
                } else if let Some(&j) = index.get(&y) {
                    edges.push((i, j));
                }
            }
        }
        Ok(Lattice { d, l, periodic, sites, index, edges })
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, idx: usize) -> &Site {
        &self.sites[idx]
    }

    /// Index of an in-lattice site, wrapping first on the torus.
    pub fn site_index(&self, site: &[i64]) -> Option<usize> {
        if self.periodic {
            let mut s = site.to_vec();
            wrap_into(&mut s, self.l);
            self.index.get(&s).copied()
        } else {
            self.index.get(site).copied()
        }
    }

    /// Canonical edge list (one `(x, x+e_i)` entry per site and direction).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The `2d` nearest neighbors of a site, with multiplicity. Off-lattice
    /// neighbors of a free lattice are reported by coordinates.
    pub fn neighbors(&self, idx: usize) -> Vec<NeighborSite> {
        let mut out = Vec::with_capacity(2 * self.d);
        for dir in 0..self.d {
            for step in [1i64, -1] {
                let mut y = self.sites[idx].clone();
                y[dir] += step;
                out.push(self.resolve(y));
            }
        }
        out
    }

    fn resolve(&self, mut y: Site) -> NeighborSite {
        if self.periodic {
            wrap_into(&mut y, self.l);
        }
        match self.index.get(&y) {
            Some(&j) => NeighborSite::Inside(j),
            None => NeighborSite::Outside(y),
        }
    }

    /// Chebyshev distance, on the torus metric for periodic lattices.
    pub fn dist(&self, a: &[i64], b: &[i64]) -> i64 {
        (0..self.d)
            .map(|k| {
                let mut diff = (a[k] - b[k]).abs();
                if self.periodic {
                    let period = 2 * self.l;
                    diff %= period;
                    diff = diff.min(period - diff);
                }
                diff
            })
            .max()
            .unwrap_or(0)
    }

    /// The Chebyshev ball `U(x) = {y : dist(x,y) ≤ r}`, possibly reaching
    /// outside the lattice (free case).
    pub fn chebyshev_ball(&self, x: &[i64], r: i64) -> Vec<NeighborSite> {
        let mut out = Vec::new();
        let mut offset = vec![-r; self.d];
        'outer: loop {
            let y: Site = x.iter().zip(&offset).map(|(a, o)| a + o).collect();
            out.push(self.resolve(y));
            let mut k = self.d;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                offset[k] += 1;
                if offset[k] <= r {
                    break;
                }
                offset[k] = -r;
                if k == 0 {
                    break 'outer;
                }
            }
        }
        out
    }

    /// Thicken a set of in-lattice sites by Chebyshev distance `r`, keeping
    /// only in-lattice sites: `B̄ = {x ∈ Λ : dist(x, B) ≤ r}`.
    pub fn thicken(&self, b: &[usize], r: i64) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &i in b {
            for y in self.chebyshev_ball(&self.sites[i].clone(), r) {
                if let NeighborSite::Inside(j) = y {
                    out.insert(j);
                }
            }
        }
        out
    }

    /// `{x ∈ Λ \ B : dist(x, B) ≤ k}` — the in-lattice part of `∂B` (k = R₀)
    /// or `∂̄B` (k = 2R₀).
    pub fn boundary(&self, b: &[usize], k: i64) -> BTreeSet<usize> {
        let inner: BTreeSet<usize> = b.iter().copied().collect();
        self.thicken(b, k).into_iter().filter(|j| !inner.contains(j)).collect()
    }
}

/// A lattice neighbor: either an in-lattice site index or the coordinates of
/// a point outside a free lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NeighborSite {
    Inside(usize),
    Outside(Site),
}

fn wrap_into(site: &mut [i64], l: i64) {
    let period = 2 * l;
    for c in site.iter_mut() {
        *c = (*c + l).rem_euclid(period) - l;
    }
}

/// The space-time lattice `Λ × {1,…,M}` with periodic time.
#[derive(Debug, Clone)]
pub struct SpaceTimeLattice {
    pub base: Lattice,
    pub m: usize,
}

impl SpaceTimeLattice {
    pub fn new(base: Lattice, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(CoreError::Geometry("need M ≥ 1 time slices".into()));
        }
        Ok(SpaceTimeLattice { base, m })
    }

    /// Time successor with `M + a ≡ a`.
    pub fn t_next(&self, t: usize) -> usize {
        if t == self.m {
            1
        } else {
            t + 1
        }
    }

    pub fn t_prev(&self, t: usize) -> usize {
        if t == 1 {
            self.m
        } else {
            t - 1
        }
    }

    pub fn num_cubes(&self) -> usize {
        self.base.num_sites() * self.m
    }

    /// All cube centers `(site index, t)`, t in `1..=M`.
    pub fn cubes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.m).flat_map(move |t| (0..self.base.num_sites()).map(move |x| (x, t)))
    }
}

/// A set of elementary space-time cubes, identified by their centers
/// `(site index, time slice)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct CubeSet {
    cubes: BTreeSet<(usize, usize)>,
}

impl CubeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cubes<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        CubeSet { cubes: iter.into_iter().collect() }
    }

    pub fn insert(&mut self, cube: (usize, usize)) {
        self.cubes.insert(cube);
    }

    pub fn contains(&self, cube: &(usize, usize)) -> bool {
        self.cubes.contains(cube)
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.cubes.iter()
    }

    pub fn union(&self, other: &CubeSet) -> CubeSet {
        CubeSet { cubes: self.cubes.union(&other.cubes).copied().collect() }
    }

    pub fn difference(&self, other: &CubeSet) -> CubeSet {
        CubeSet { cubes: self.cubes.difference(&other.cubes).copied().collect() }
    }

    pub fn intersection(&self, other: &CubeSet) -> CubeSet {
        CubeSet { cubes: self.cubes.intersection(&other.cubes).copied().collect() }
    }

    pub fn is_disjoint(&self, other: &CubeSet) -> bool {
        self.cubes.is_disjoint(&other.cubes)
    }

    /// Spatial projection `[B]_S`.
    pub fn spatial_projection(&self) -> BTreeSet<usize> {
        self.cubes.iter().map(|&(x, _)| x).collect()
    }

    /// Temporal projection `[B]_T`.
    pub fn temporal_projection(&self) -> BTreeSet<usize> {
        self.cubes.iter().map(|&(_, t)| t).collect()
    }

    /// Time slice `[T_t(B)]_S`.
    pub fn slice(&self, t: usize) -> BTreeSet<usize> {
        self.cubes.iter().filter(|&&(_, s)| s == t).map(|&(x, _)| x).collect()
    }

    /// Column `[S_x(B)]_T`.
    pub fn column(&self, x: usize) -> BTreeSet<usize> {
        self.cubes.iter().filter(|&&(y, _)| y == x).map(|&(_, t)| t).collect()
    }

    fn face_neighbors(&self, st: &SpaceTimeLattice, cube: (usize, usize)) -> Vec<(usize, usize)> {
        let (x, t) = cube;
        let mut out = Vec::new();
        for nb in st.base.neighbors(x) {
            if let NeighborSite::Inside(y) = nb {
                out.push((y, t));
            }
        }
        out.push((x, st.t_next(t)));
        out.push((x, st.t_prev(t)));
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Connected components under face adjacency with periodic time,
    /// ordered by their minimal member.
    pub fn connected_components(&self, st: &SpaceTimeLattice) -> Vec<CubeSet> {
        let mut unseen: BTreeSet<(usize, usize)> = self.cubes.clone();
        let mut components = Vec::new();
        while let Some(&start) = unseen.iter().next() {
            unseen.remove(&start);
            let mut comp = BTreeSet::new();
            comp.insert(start);
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                for nb in self.face_neighbors(st, c) {
                    if unseen.remove(&nb) {
                        comp.insert(nb);
                        queue.push_back(nb);
                    }
                }
            }
            components.push(CubeSet { cubes: comp });
        }
        components
    }

    pub fn is_connected(&self, st: &SpaceTimeLattice) -> bool {
        self.is_empty() || self.connected_components(st).len() == 1
    }

    /// `W(D) = {x : [S_x(D)]_T = 𝕄}` — sites whose full time column lies in
    /// the set. Nonempty iff the set contains a simple loop.
    pub fn winding_sites(&self, st: &SpaceTimeLattice) -> BTreeSet<usize> {
        let mut per_site: BTreeMap<usize, usize> = BTreeMap::new();
        for &(x, _) in &self.cubes {
            *per_site.entry(x).or_insert(0) += 1;
        }
        per_site.into_iter().filter(|&(_, n)| n == st.m).map(|(x, _)| x).collect()
    }

    /// Whether the set wraps around the periodic time direction: its lift to
    /// the time cover `Z` connects a cube to its own translate by `M`.
    pub fn wraps_time(&self, st: &SpaceTimeLattice) -> bool {
        if self.is_empty() {
            return false;
        }
        // BFS in the cover: track (cube, winding number); wrap detected when a
        // cube is reached at two different winding numbers.
        let start = *self.cubes.iter().next().unwrap();
        let mut level: HashMap<(usize, usize), i64> = HashMap::new();
        level.insert(start, 0);
        let mut queue = VecDeque::from([(start, 0i64)]);
        while let Some(((x, t), w)) = queue.pop_front() {
            let mut neighbors: Vec<((usize, usize), i64)> = Vec::new();
            for nb in st.base.neighbors(x) {
                if let NeighborSite::Inside(y) = nb {
                    neighbors.push((((y), t), w));
                }
            }
            // time steps, tracking the winding increment
            let up = st.t_next(t);
            let dn = st.t_prev(t);
            neighbors.push(((x, up), if up == 1 && st.m > 1 { w + 1 } else { w }));
            neighbors.push(((x, dn), if dn == st.m && st.m > 1 { w - 1 } else { w }));
            if st.m == 1 {
                // single slice: the time edge is a self-loop around the torus
                if self.cubes.contains(&(x, t)) {
                    return true;
                }
            }
            for (nb, nw) in neighbors {
                if !self.cubes.contains(&nb) {
                    continue;
                }
                match level.get(&nb) {
                    Some(&old) if old != nw => return true,
                    Some(_) => {}
                    None => {
                        level.insert(nb, nw);
                        queue.push_back((nb, nw));
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_lattice() {
        let lat = Lattice::build(1, 1, false).unwrap();
        assert_eq!(lat.num_sites(), 2);
        assert_eq!(lat.sites(), &[vec![-1], vec![0]]);
        assert_eq!(lat.edges().len(), 1);
    }

    #[test]
    fn unit_square() {
        let lat = Lattice::build(2, 1, false).unwrap();
        assert_eq!(lat.num_sites(), 4);
        assert_eq!(lat.edges().len(), 4);
    }

    #[test]
    fn torus_counts_by_enumeration() {
        // brute enumeration of (Z/4Z)^2: every site has 4 distinct neighbors
        let lat = Lattice::build(2, 2, true).unwrap();
        assert_eq!(lat.num_sites(), 16);
        assert_eq!(lat.edges().len(), 32);
        let mut degree = vec![0usize; 16];
        for &(a, b) in lat.edges() {
            degree[a] += 1;
            degree[b] += 1;
        }
        assert!(degree.iter().all(|&d| d == 4));
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity(&[0, 0]), 1);
        assert_eq!(parity(&[1, 0]), -1);
        assert_eq!(parity(&[-1, 1]), 1);
    }

    #[test]
    fn neighborhood_examples() {
        let lat = Lattice::build(1, 2, false).unwrap();
        let x = lat.site_index(&[0]).unwrap();
        let ball = lat.chebyshev_ball(&[0], 0);
        assert_eq!(ball.len(), 1);
        let ball = lat.chebyshev_ball(&[0], 1);
        assert_eq!(ball.len(), 3);
        assert!(ball.iter().all(|n| matches!(n, NeighborSite::Inside(_))));
        let _ = x;

        let lat2 = Lattice::build(2, 2, false).unwrap();
        let ball = lat2.chebyshev_ball(&[0, 0], 1);
        assert_eq!(ball.len(), 9);
    }

    #[test]
    fn empty_components() {
        let lat = Lattice::build(1, 1, false).unwrap();
        let st = SpaceTimeLattice::new(lat, 3).unwrap();
        assert!(CubeSet::new().connected_components(&st).is_empty());
    }

    #[test]
    fn face_sharing_cubes_form_one_component() {
        let lat = Lattice::build(1, 2, false).unwrap();
        let st = SpaceTimeLattice::new(lat, 4).unwrap();
        let set = CubeSet::from_cubes([(0, 1), (1, 1)]);
        assert_eq!(set.connected_components(&st).len(), 1);
        // corner-adjacent cubes stay separate
        let set = CubeSet::from_cubes([(0, 1), (1, 2)]);
        assert_eq!(set.connected_components(&st).len(), 2);
    }

    #[test]
    fn full_column_winds_in_time() {
        let lat = Lattice::build(1, 2, false).unwrap();
        let st = SpaceTimeLattice::new(lat, 5).unwrap();
        let column = CubeSet::from_cubes((1..=5).map(|t| (0, t)));
        assert_eq!(column.connected_components(&st).len(), 1);
        assert_eq!(column.winding_sites(&st), BTreeSet::from([0]));
        assert!(column.wraps_time(&st));
    }

    #[test]
    fn single_cube_does_not_wind() {
        let lat = Lattice::build(1, 1, false).unwrap();
        let st = SpaceTimeLattice::new(lat, 2).unwrap();
        let set = CubeSet::from_cubes([(0, 1)]);
        assert!(set.winding_sites(&st).is_empty());
        assert!(!set.wraps_time(&st));
    }

    #[test]
    fn two_columns_are_two_winding_sites() {
        // two full time columns: both sites wind
        let lat = Lattice::build(1, 2, false).unwrap();
        let st = SpaceTimeLattice::new(lat.clone(), 3).unwrap();
        let mut set = CubeSet::new();
        let a = lat.site_index(&[0]).unwrap();
        let b = lat.site_index(&[1]).unwrap();
        for t in 1..=3 {
            set.insert((a, t));
            set.insert((b, t));
        }
        assert_eq!(set.winding_sites(&st), BTreeSet::from([a, b]));
        assert!(set.winding_sites(&st).iter().all(|x| set.spatial_projection().contains(x)));
    }

    #[test]
    fn thicken_bounds() {
        let lat = Lattice::build(2, 3, false).unwrap();
        let b = vec![lat.site_index(&[0, 0]).unwrap(), lat.site_index(&[1, 0]).unwrap()];
        for r0 in [1i64, 2] {
            let thick = lat.thicken(&b, r0);
            let ball = (2 * r0 + 1).pow(2) as usize;
            assert!(thick.len() <= ball * b.len());
            assert!(b.iter().all(|s| thick.contains(s)));
        }
        // monotonicity
        let b2 = vec![b[0]];
        let t1 = lat.thicken(&b2, 1);
        let t2 = lat.thicken(&b, 1);
        assert!(t1.is_subset(&t2));
        // the crude |B| ≥ R₀^{−d}|B̄| inequality fails already at R₀ = 1:
        // a thickened set is strictly larger than the set itself.
        let thick = lat.thicken(&b2, 1);
        assert!(b2.len() < thick.len());
    }

    #[test]
    fn projections_consistent() {
        let lat = Lattice::build(1, 2, false).unwrap();
        let st = SpaceTimeLattice::new(lat, 4).unwrap();
        let set = CubeSet::from_cubes([(0, 1), (2, 3), (1, 1)]);
        let sp = set.spatial_projection();
        let tp = set.temporal_projection();
        for &(x, t) in set.iter() {
            assert!(sp.contains(&x));
            assert!(tp.contains(&t));
        }
        let comps = set.connected_components(&st);
        let total: usize = comps.iter().map(|c| c.len()).sum();
        assert_eq!(total, set.len());
    }
}
