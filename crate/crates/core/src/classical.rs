//! Classical side of the theory: the pair energies `h(s_x, s_y)`, the
//! ground-state phase diagram in the normalized coordinates
//! `(u, m) = (U_eff/4d, μ_spin/2d)`, ground configurations, the Peierls gap
//! `γ_e`, and numeric checkers for the structural assumptions on the
//! effective potential.

use crate::error::{CoreError, Result};
use crate::lattice::parity;
use crate::model::{sobolev_norm_nn, ModelParams};
use serde::Serialize;

/// `h(s_x, s_y) = W s_x s_y + u (s_x² + s_y²) − m (s_x + s_y)`.
pub fn pair_energy(sx: f64, sy: f64, u: f64, m: f64, w: f64) -> f64 {
    w * sx * sy + u * (sx * sx + sy * sy) - m * (sx + sy)
}

/// The six inequivalent spin pairs on an (even, odd) bond.
pub const PAIRS: [(f64, f64); 6] =
    [(1.0, 1.0), (1.0, 0.0), (0.0, 0.0), (-1.0, 0.0), (1.0, -1.0), (-1.0, -1.0)];

/// Ground-state region of the `(u, m)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    SepPlus,
    SepMinus,
    SepZero,
    H0,
    H1,
    H2,
    /// Two or more pair minima tie within tolerance.
    Boundary,
}

fn region_of_pair(pair: (f64, f64)) -> Region {
    match pair {
        (1.0, 1.0) => Region::H2,
        (1.0, 0.0) => Region::SepPlus,
        (0.0, 0.0) => Region::H1,
        (-1.0, 0.0) => Region::SepMinus,
        (1.0, -1.0) => Region::SepZero,
        (-1.0, -1.0) => Region::H0,
        _ => unreachable!(),
    }
}

/// Classify by the argmin over the six pair energies, reporting `Boundary`
/// when the two lowest values tie within `tol`.
pub fn classify_region(u: f64, m: f64, w: f64, tol: f64) -> Result<Region> {
    if w <= 0.0 {
        return Err(CoreError::InvalidParameter("classifier requires W > 0".into()));
    }
    let mut vals: Vec<(f64, (f64, f64))> =
        PAIRS.iter().map(|&p| (pair_energy(p.0, p.1, u, m, w), p)).collect();
    vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if vals[1].0 - vals[0].0 <= tol {
        Ok(Region::Boundary)
    } else {
        Ok(region_of_pair(vals[0].1))
    }
}

/// Spin value of the ground configuration `g^{(ℓ)}` at given coordinates:
/// `g^{(1)}` has `s = +1` on even sites, `g^{(2)}` is the sublattice swap.
pub fn ground_spin(label: usize, coords: &[i64]) -> f64 {
    let p = parity(coords) as f64;
    match label {
        1 => p,
        2 => -p,
        _ => panic!("unknown boundary label {label}"),
    }
}

/// A set of ground-state configurations for a finitely degenerate region.
#[derive(Debug, Clone, Serialize)]
pub struct GroundConfigSet {
    pub region: Region,
    /// Per-site spin values of each ground configuration (lattice order).
    pub configs: Vec<Vec<i8>>,
    pub degeneracy: usize,
    /// Per-site ground energy density `e_e = d·min_pair h`.
    pub e_e: f64,
    /// Per-configuration energies `e_ℓ` (all equal to `e_e` on the minimum).
    pub e_ell: Vec<f64>,
}

/// Explicit ground configurations on a lattice for the finitely degenerate
/// regions. `H1`, `SepPlus` and `SepMinus` have infinite degeneracy and are
/// rejected.
pub fn ground_configs(
    region: Region,
    sites: &[Vec<i64>],
    u: f64,
    m: f64,
    w: f64,
    d: usize,
) -> Result<GroundConfigSet> {
    let e_pair = |p: (f64, f64)| pair_energy(p.0, p.1, u, m, w);
    match region {
        Region::SepZero => {
            let c1: Vec<i8> = sites.iter().map(|s| parity(s) as i8).collect();
            let c2: Vec<i8> = c1.iter().map(|&s| -s).collect();
            let e = d as f64 * e_pair((1.0, -1.0));
            Ok(GroundConfigSet {
                region,
                configs: vec![c1, c2],
                degeneracy: 2,
                e_e: e,
                e_ell: vec![e, e],
            })
        }
        Region::H0 => {
            let e = d as f64 * e_pair((-1.0, -1.0));
            Ok(GroundConfigSet {
                region,
                configs: vec![vec![-1; sites.len()]],
                degeneracy: 1,
                e_e: e,
                e_ell: vec![e],
            })
        }
        Region::H2 => {
            let e = d as f64 * e_pair((1.0, 1.0));
            Ok(GroundConfigSet {
                region,
                configs: vec![vec![1; sites.len()]],
                degeneracy: 1,
                e_e: e,
                e_ell: vec![e],
            })
        }
        other => Err(CoreError::Unsupported(format!(
            "{other:?} has infinitely degenerate ground configurations"
        ))),
    }
}

/// Per-site effective potential `Φ_eff,x = ½ Σ_{y:‖x−y‖₁=1} h(s_x, s_y)` of
/// a local spin pattern on the Chebyshev ball `U(0)` of radius `r0 ≥ 1` in
/// `Z^d`. The pattern is indexed in lexicographic ball order.
fn phi_eff_local(pattern: &[i8], ball: &[Vec<i64>], u: f64, m: f64, w: f64, d: usize) -> f64 {
    let center = ball.iter().position(|c| c.iter().all(|&v| v == 0)).unwrap();
    let sx = pattern[center] as f64;
    let mut e = 0.0;
    for dir in 0..d {
        for step in [1i64, -1] {
            let mut y = vec![0i64; d];
            y[dir] = step;
            let idx = ball.iter().position(|c| *c == y).unwrap();
            e += 0.5 * pair_energy(sx, pattern[idx] as f64, u, m, w);
        }
    }
    e
}

fn chebyshev_ball_origin(d: usize, r0: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &out {
            for v in -r0..=r0 {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Result of the Peierls-gap enumeration.
#[derive(Debug, Clone, Serialize)]
pub struct PeierlsGap {
    pub gamma_e: f64,
    /// A local spin pattern attaining `e_e + γ_e`.
    pub witness: Vec<i8>,
    pub e_e: f64,
}

/// `γ_e = min { Φ_eff,x(n) − e_e : x excited in n }` by exhaustive
/// enumeration of the `3^{|U(x)|}` spin patterns on `U(x)`.
///
/// "Excited" means the pattern does not coincide with any ground
/// configuration of the region on the whole ball. Only the finitely
/// degenerate regions are supported.
pub fn peierls_gap(u: f64, m: f64, w: f64, d: usize, r0: i64) -> Result<PeierlsGap> {
    let region = classify_region(u, m, w, 1e-9)?;
    let ball = chebyshev_ball_origin(d, r0);
    let ground_patterns: Vec<Vec<i8>> = match region {
        Region::SepZero | Region::Boundary => vec![
            ball.iter().map(|c| parity(c) as i8).collect(),
            ball.iter().map(|c| -parity(c) as i8).collect(),
        ],
        Region::H0 => vec![vec![-1; ball.len()]],
        Region::H2 => vec![vec![1; ball.len()]],
        other => {
            return Err(CoreError::Unsupported(format!(
                "Peierls gap undefined for infinitely degenerate region {other:?}"
            )))
        }
    };
    let e_e = ground_patterns
        .iter()
        .map(|p| phi_eff_local(p, &ball, u, m, w, d))
        .fold(f64::INFINITY, f64::min);

    let n = ball.len();
    let mut best = f64::INFINITY;
    let mut witness = vec![0i8; n];
    let mut pattern = vec![-1i8; n];
    loop {
        let excited = ground_patterns.iter().all(|g| *g != pattern);
        if excited {
            let e = phi_eff_local(&pattern, &ball, u, m, w, d);
            if e - e_e < best {
                best = e - e_e;
                witness = pattern.clone();
            }
        }
        // ternary increment
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(PeierlsGap { gamma_e: best, witness, e_e });
            }
            k -= 1;
            if pattern[k] < 1 {
                pattern[k] += 1;
                break;
            }
            pattern[k] = -1;
            if k == 0 {
                return Ok(PeierlsGap { gamma_e: best, witness, e_e });
            }
        }
    }
}

/// Outcome of the structural-assumption checks on a parameter grid.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// (A.1) two Néel ground configurations at the sample point.
    pub a1_pass: bool,
    /// (A.2) finite-difference smoothness of `e_ℓ`.
    pub a2_pass: bool,
    pub a2_max_fd_mismatch: f64,
    /// (A.3) numeric rank of `[∂e_ℓ/∂ν̄_i]` equals `r − 1 = 1`.
    pub a3_pass: bool,
    pub a3_rank: usize,
    /// (A.4) Peierls gap positive at every grid point.
    pub a4_pass: bool,
    pub gamma_e_min: f64,
    pub a4_witness: Option<(f64, f64)>,
    /// (A.5) uniform bound on `|∂Φ_eff/∂ν̄_i|`.
    pub a5_pass: bool,
    pub c0: f64,
    /// (A.6) `‖t‖_{γ_Q}` finite (closed form for nearest-neighbor hopping).
    pub a6_pass: bool,
    pub t_norm_gamma_q: f64,
}

/// Energy `e_ℓ` of the staggered configuration as a function of the raw
/// parameters `ν̄ = (g, μ, U, W)` (both Néel configurations give the same
/// value).
fn e_ell_raw(nu: &[f64; 4], d: usize, omega0: f64) -> f64 {
    let (g, mu, u_raw, w) = (nu[0], nu[1], nu[2], nu[3]);
    let alpha2 = 2.0 * g * g / (omega0 * omega0);
    let u_eff = u_raw - omega0 * alpha2;
    let u = u_eff / (4.0 * d as f64);
    let m = (mu + omega0 * alpha2) / (2.0 * d as f64);
    d as f64 * pair_energy(1.0, -1.0, u, m, w)
}

/// Run the assumption checkers over a grid of `(u, m)` points (raw
/// parameters reconstructed at `g`, `ω₀` fixed).
pub fn check_assumptions(
    grid: &[(f64, f64)],
    w: f64,
    d: usize,
    r0: i64,
    g: f64,
    g0_cap: f64,
    omega0: f64,
    gamma_q: f64,
) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(CoreError::InvalidParameter("empty assumption grid".into()));
    }
    // (A.1) at the first grid point
    let (u0, m0) = grid[0];
    let region = classify_region(u0, m0, w, 1e-9)?;
    let a1_pass = region == Region::SepZero;

    // (A.2)/(A.3): finite differences of e_ℓ in ν̄ = (g, μ, U, W)
    let alpha2 = 2.0 * g * g / (omega0 * omega0);
    let u_raw = u0 * 4.0 * d as f64 + omega0 * alpha2;
    let mu_raw = m0 * 2.0 * d as f64 - omega0 * alpha2;
    let nu0 = [g, mu_raw, u_raw, w];
    let mut grad = [0.0f64; 4];
    let mut a2_max_fd_mismatch = 0.0f64;
    for i in 0..4 {
        let mut d1 = [0.0; 2];
        for (k, h) in [1e-4, 1e-5].iter().enumerate() {
            let mut plus = nu0;
            let mut minus = nu0;
            plus[i] += h;
            minus[i] -= h;
            d1[k] = (e_ell_raw(&plus, d, omega0) - e_ell_raw(&minus, d, omega0)) / (2.0 * h);
        }
        a2_max_fd_mismatch = a2_max_fd_mismatch.max((d1[0] - d1[1]).abs());
        grad[i] = d1[1];
    }
    let a2_pass = a2_max_fd_mismatch < 1e-5;

    // (A.3): both rows of E equal this gradient (the two Néel states are
    // exactly degenerate); rank 1 iff the gradient is nonzero.
    let norm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a3_rank = usize::from(norm > 1e-8);
    let a3_pass = a3_rank == 1;

    // (A.4): Peierls gap over the grid; points with infinitely degenerate
    // ground configurations fail the assumption rather than aborting the run
    let mut gamma_e_min = f64::INFINITY;
    let mut a4_witness = None;
    let mut a4_degenerate = false;
    for &(u, m) in grid {
        match peierls_gap(u, m, w, d, r0) {
            Ok(gap) => {
                if gap.gamma_e < gamma_e_min {
                    gamma_e_min = gap.gamma_e;
                    if gap.gamma_e <= 0.0 {
                        a4_witness = Some((u, m));
                    }
                }
            }
            Err(CoreError::Unsupported(_)) => {
                a4_degenerate = true;
                a4_witness = Some((u, m));
            }
            Err(e) => return Err(e),
        }
    }
    let a4_pass = !a4_degenerate && gamma_e_min > 0.0;

    // (A.5): max |∂Φ_eff/∂ν̄_i| over local patterns and grid points, with the
    // g-derivative evaluated at the cap |g| ≤ g0.
    let ball = chebyshev_ball_origin(d, r0);
    let mut c0 = 0.0f64;
    let mut pattern = vec![-1i8; ball.len()];
    loop {
        for &(u, m) in grid.iter().take(9) {
            let u_raw = u * 4.0 * d as f64 + omega0 * alpha2;
            let mu_raw = m * 2.0 * d as f64 - omega0 * alpha2;
            for i in 0..4 {
                let h = 1e-5;
                let mut plus = [g0_cap, mu_raw, u_raw, w];
                let mut minus = plus;
                plus[i] += h;
                minus[i] -= h;
                let phi = |nu: &[f64; 4]| {
                    let a2 = 2.0 * nu[0] * nu[0] / (omega0 * omega0);
                    let ue = nu[2] - omega0 * a2;
                    let un = ue / (4.0 * d as f64);
                    let mn = (nu[1] + omega0 * a2) / (2.0 * d as f64);
                    phi_eff_local(&pattern, &ball, un, mn, nu[3], d)
                };
                let der = (phi(&plus) - phi(&minus)) / (2.0 * h);
                c0 = c0.max(der.abs());
            }
        }
        let mut k = ball.len();
        let mut done = false;
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            if pattern[k] < 1 {
                pattern[k] += 1;
                break;
            }
            pattern[k] = -1;
            if k == 0 {
                done = true;
                break;
            }
        }
        if done {
            break;
        }
    }
    let a5_pass = c0.is_finite();

    let t_norm_gamma_q = sobolev_norm_nn(gamma_q, d);
    let a6_pass = t_norm_gamma_q.is_finite();

    Ok(AssumptionReport {
        a1_pass,
        a2_pass,
        a2_max_fd_mismatch,
        a3_pass,
        a3_rank,
        a4_pass,
        gamma_e_min,
        a4_witness,
        a5_pass,
        c0,
        a6_pass,
        t_norm_gamma_q,
    })
}

/// Peierls gap of a model instance, evaluated at its normalized coordinates.
pub fn peierls_gap_of(params: &ModelParams) -> Result<PeierlsGap> {
    let (u, m) = params.normalized_coords();
    peierls_gap(u, m, params.w, params.d, params.r0)
}

/// Membership in `S_ep,ε` (normalized coordinates):
/// `u < (W−ε)/2` is implied by the pair conditions
/// `|m| < min{W−ε, W−ε−u}` together with `u < (W−ε)/2`.
pub fn in_sep_epsilon(u: f64, m: f64, w: f64, eps: f64) -> bool {
    let we = w - eps;
    u < we / 2.0 && m.abs() < we.min(we - u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pair_energy_printed_values() {
        let (u, m, w) = (0.37, -0.21, 1.3);
        // the six closed forms, coefficient-level
        assert_abs_diff_eq!(pair_energy(1.0, 1.0, u, m, w), w + 2.0 * u - 2.0 * m);
        assert_abs_diff_eq!(pair_energy(1.0, 0.0, u, m, w), u - m);
        assert_abs_diff_eq!(pair_energy(0.0, 0.0, u, m, w), 0.0);
        assert_abs_diff_eq!(pair_energy(-1.0, 0.0, u, m, w), u + m);
        assert_abs_diff_eq!(pair_energy(1.0, -1.0, u, m, w), -w + 2.0 * u);
        assert_abs_diff_eq!(pair_energy(-1.0, -1.0, u, m, w), w + 2.0 * u + 2.0 * m);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_region(0.0, 0.0, 1.0, 1e-9).unwrap(), Region::SepZero);
        assert_eq!(classify_region(2.0, 0.0, 1.0, 1e-9).unwrap(), Region::H1);
        assert_eq!(classify_region(0.5, 0.0, 1.0, 1e-9).unwrap(), Region::Boundary);
        assert!(classify_region(0.0, 0.0, 0.0, 1e-9).is_err());
    }

    #[test]
    fn classify_particle_hole_symmetry() {
        // m → −m swaps SepPlus ↔ SepMinus and H0 ↔ H2
        let w = 2.0;
        for &(u, m) in &[(0.3, 1.9), (0.3, 2.5), (-1.0, 2.5), (1.7, 0.4), (-2.0, 0.3)] {
            let a = classify_region(u, m, w, 1e-9).unwrap();
            let b = classify_region(u, -m, w, 1e-9).unwrap();
            let mirrored = match a {
                Region::SepPlus => Region::SepMinus,
                Region::SepMinus => Region::SepPlus,
                Region::H0 => Region::H2,
                Region::H2 => Region::H0,
                other => other,
            };
            assert_eq!(b, mirrored, "at (u,m)=({u},{m})");
        }
    }

    #[test]
    fn ground_config_counts() {
        let sites: Vec<Vec<i64>> = vec![vec![-1], vec![0]];
        let g = ground_configs(Region::SepZero, &sites, 0.0, 0.0, 1.0, 1).unwrap();
        assert_eq!(g.degeneracy, 2);
        assert_eq!(g.configs.len(), 2);
        // d=1: e_e = −W + U_eff/2d = −W + 2u
        assert_abs_diff_eq!(g.e_e, -1.0, epsilon = 1e-14);
        let g = ground_configs(Region::H0, &sites, -1.0, -3.0, 1.0, 1).unwrap();
        assert_eq!(g.degeneracy, 1);
        assert!(g.configs[0].iter().all(|&s| s == -1));
        let g = ground_configs(Region::H2, &sites, -1.0, 3.0, 1.0, 1).unwrap();
        assert!(g.configs[0].iter().all(|&s| s == 1));
        assert!(ground_configs(Region::H1, &sites, 2.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn peierls_gap_interior_and_boundary() {
        // deep in S_ep,0 at d=1: the cheapest excitation flips one site
        let gap = peierls_gap(0.0, 0.0, 1.0, 1, 1).unwrap();
        assert!(gap.gamma_e > 0.0);
        assert_abs_diff_eq!(gap.gamma_e, 0.5, epsilon = 1e-12);
        // tightness: the witness attains e_e + γ_e
        let ball = chebyshev_ball_origin(1, 1);
        let e = phi_eff_local(&gap.witness, &ball, 0.0, 0.0, 1.0, 1);
        assert_abs_diff_eq!(e, gap.e_e + gap.gamma_e, epsilon = 1e-12);
        // on the boundary u = W/2, m = 0 the gap closes
        let gap = peierls_gap(0.5, 0.0, 1.0, 1, 1).unwrap();
        assert_abs_diff_eq!(gap.gamma_e, 0.0, epsilon = 1e-12);
        // H0 interior has a positive gap
        let gap = peierls_gap(-1.0, -3.0, 1.0, 1, 1).unwrap();
        assert!(gap.gamma_e > 0.0);
    }

    #[test]
    fn assumption_grid_passes_inside_sep() {
        let w = 2.0;
        let eps = 0.2;
        let mut grid = Vec::new();
        for i in 0..11 {
            for j in 0..11 {
                let u = -2.0 + 1.5 * i as f64 / 10.0; // stays below (W−ε)/2
                let m = -1.0 + 2.0 * j as f64 / 10.0;
                if in_sep_epsilon(u, m, w, eps) {
                    grid.push((u, m));
                }
            }
        }
        assert!(grid.len() > 50);
        let rep = check_assumptions(&grid, w, 1, 1, 0.3, 1.0, 2.0, 1.5).unwrap();
        assert!(rep.a1_pass && rep.a2_pass && rep.a3_pass && rep.a4_pass && rep.a5_pass && rep.a6_pass);
        assert!(rep.gamma_e_min > 0.0);
        assert!(rep.c0 > 0.0);
        // a point in H1 fails (A.1)
        let rep = check_assumptions(&[(2.0, 0.0)], w, 1, 1, 0.3, 1.0, 2.0, 1.5).unwrap();
        assert!(!rep.a1_pass);
    }

    #[test]
    fn e_e_closed_form_at_d1() {
        // e_e at (u, m=0) in S_ep,0 equals −W + U_eff/2d for d = 1
        for &u in &[-0.5, 0.0, 0.3] {
            let sites: Vec<Vec<i64>> = vec![vec![0]];
            let g = ground_configs(Region::SepZero, &sites, u, 0.0, 1.0, 1).unwrap();
            assert_abs_diff_eq!(g.e_e, -1.0 + 2.0 * u, epsilon = 1e-13);
        }
    }
}
