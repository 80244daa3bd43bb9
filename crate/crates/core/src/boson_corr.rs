//! Gaussian correlation functions of products of `e^{iφ(f)}` under free
//! harmonic evolution: the vacuum and thermal closed forms, the determinant
//! partition formula, α-derivatives, and a truncated-Fock brute-force oracle
//! used to cross-check all of them.
//!
//! Only diagonal frequency operators are supported (site-local phonons, one
//! mode per site).

use crate::error::{CoreError, Result};
use crate::linalg::eigh;
use crate::C64;
use ndarray::Array2;

/// A free oscillator family with positive diagonal frequencies.
#[derive(Debug, Clone)]
pub struct OscillatorSpec {
    pub omega: Vec<f64>,
}

impl OscillatorSpec {
    pub fn single(omega: f64) -> Self {
        OscillatorSpec { omega: vec![omega] }
    }

    pub fn modes(&self) -> usize {
        self.omega.len()
    }

    fn check_positive(&self) -> Result<()> {
        if self.omega.iter().any(|&w| w <= 0.0) {
            return Err(CoreError::InvalidParameter(
                "thermal formulas require strictly positive frequencies".into(),
            ));
        }
        Ok(())
    }
}

/// Ordered insertion times and the mode-space vectors of `e^{iφ(f_i)}`.
#[derive(Debug, Clone)]
pub struct InsertionList {
    pub times: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl InsertionList {
    pub fn new(times: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != vectors.len() {
            return Err(CoreError::InvalidParameter("times/vectors length mismatch".into()));
        }
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(CoreError::InvalidParameter("insertion times must be sorted".into()));
        }
        Ok(InsertionList { times, vectors })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `Σ_{ij} ⟨f_i| e^{−|s_i−s_j| ω} f_j⟩`.
pub fn vacuum_quadratic_form(spec: &OscillatorSpec, ins: &InsertionList) -> f64 {
    let n = ins.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let tau = (ins.times[i] - ins.times[j]).abs();
            for (k, &w) in spec.omega.iter().enumerate() {
                acc += ins.vectors[i][k] * ins.vectors[j][k] * (-tau * w).exp();
            }
        }
    }
    acc
}

/// `Σ_{ij} ⟨f_i| (1−e^{−βω})^{−1}(e^{−|s_i−s_j|ω} + e^{−(β−|s_i−s_j|)ω}) f_j⟩`.
pub fn thermal_quadratic_form(spec: &OscillatorSpec, ins: &InsertionList, beta: f64) -> f64 {
    let n = ins.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let tau = (ins.times[i] - ins.times[j]).abs();
            for (k, &w) in spec.omega.iter().enumerate() {
                let kernel =
                    ((-tau * w).exp() + (-(beta - tau) * w).exp()) / (1.0 - (-beta * w).exp());
                acc += ins.vectors[i][k] * ins.vectors[j][k] * kernel;
            }
        }
    }
    acc
}

/// Vacuum correlation `G_n = exp(−½ Σ ⟨f_i|e^{−|s_i−s_j|ω} f_j⟩) ∈ (0, 1]`.
pub fn vacuum_corr(spec: &OscillatorSpec, ins: &InsertionList) -> f64 {
    (-0.5 * vacuum_quadratic_form(spec, ins)).exp()
}

/// Thermal correlation `G_{β,n}`; the unnormalized trace is `G_{β,n} · Z_β`.
pub fn thermal_corr(spec: &OscillatorSpec, ins: &InsertionList, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(CoreError::InvalidParameter("β must be positive".into()));
    }
    spec.check_positive()?;
    if ins.times.iter().any(|&s| s < 0.0 || s >= beta) {
        return Err(CoreError::InvalidParameter("insertion times must lie in [0, β)".into()));
    }
    Ok((-0.5 * thermal_quadratic_form(spec, ins, beta)).exp())
}

/// `Z_β = 1/det(1 − e^{−βω})` for diagonal `ω`.
pub fn partition_det(spec: &OscillatorSpec, beta: f64) -> Result<f64> {
    spec.check_positive()?;
    Ok(spec.omega.iter().map(|&w| 1.0 / (1.0 - (-beta * w).exp())).product())
}

/// Analytic α-derivative of the correlation of insertions scaled by `α`,
/// together with the bound it is audited against.
#[derive(Debug, Clone)]
pub struct AlphaDerivative {
    pub value: f64,
    /// `1/(α e^{1/2})`: sharp for `α² X ≤ 1`, where `X` is the quadratic form
    /// of the unscaled insertions.
    pub bound_unit_regime: f64,
    /// `2/(α e)`: valid for every quadratic form value.
    pub bound_uniform: f64,
    /// `α² X`, for deciding which regime the sample sits in.
    pub scaled_form: f64,
}

/// `∂/∂α G(α f_1, …, α f_n)` for the vacuum (`beta = None`) or thermal
/// (`beta = Some`) correlation: `−α X e^{−α² X/2}` with `X` the respective
/// quadratic form of the unscaled vectors.
pub fn alpha_derivative(
    spec: &OscillatorSpec,
    ins: &InsertionList,
    alpha: f64,
    beta: Option<f64>,
) -> Result<AlphaDerivative> {
    if alpha <= 0.0 {
        return Err(CoreError::InvalidParameter("α must be positive".into()));
    }
    let x = match beta {
        None => vacuum_quadratic_form(spec, ins),
        Some(b) => {
            if b <= 0.0 {
                return Err(CoreError::InvalidParameter("β must be positive".into()));
            }
            spec.check_positive()?;
            thermal_quadratic_form(spec, ins, b)
        }
    };
    let value = -alpha * x * (-alpha * alpha * x / 2.0).exp();
    Ok(AlphaDerivative {
        value,
        bound_unit_regime: 1.0 / (alpha * 0.5f64.exp()),
        bound_uniform: 2.0 / (alpha * std::f64::consts::E),
        scaled_form: alpha * alpha * x,
    })
}

// ---------------------------------------------------------------------------
// Truncated-Fock oracle
// ---------------------------------------------------------------------------

/// Dense `e^{iφ(f)}` on the truncated multi-mode space.
fn exp_iphi(f: &[f64], n_max: usize) -> Array2<C64> {
    let modes = f.len();
    let per = n_max + 1;
    let dim = per.pow(modes as u32);
    // φ(f) = Σ_k f_k (b_k + b_k†)
    let mut phi = Array2::<C64>::zeros((dim, dim));
    let decode = |idx: usize| -> Vec<usize> {
        let mut out = vec![0; modes];
        let mut k = idx;
        for j in (0..modes).rev() {
            out[j] = k % per;
            k /= per;
        }
        out
    };
    let encode = |lv: &[usize]| -> usize { lv.iter().fold(0, |acc, &n| acc * per + n) };
    for idx in 0..dim {
        let levels = decode(idx);
        for (k, &fk) in f.iter().enumerate() {
            if levels[k] + 1 <= n_max {
                let mut up = levels.clone();
                up[k] += 1;
                let amp = ((levels[k] + 1) as f64).sqrt() * fk;
                phi[(encode(&up), idx)] += C64::new(amp, 0.0);
            }
            if levels[k] > 0 {
                let mut dn = levels.clone();
                dn[k] -= 1;
                let amp = (levels[k] as f64).sqrt() * fk;
                phi[(encode(&dn), idx)] += C64::new(amp, 0.0);
            }
        }
    }
    let (vals, vecs) = eigh(&phi).expect("φ(f) is Hermitian");
    let mut out = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += vecs[(i, k)] * C64::new(0.0, vals[k]).exp() * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Truncated-Fock evaluation of the vacuum (`beta = None`) or normalized
/// thermal (`beta = Some`) correlation function by explicit matrix products.
/// The truncation error decays like `e^{−c·n_max}` at fixed insertions.
pub fn brute_force_corr(
    spec: &OscillatorSpec,
    ins: &InsertionList,
    beta: Option<f64>,
    n_max: usize,
) -> Result<f64> {
    let modes = spec.modes();
    let per = n_max + 1;
    let dim = per.pow(modes as u32);
    if dim > 20_000 {
        return Err(CoreError::InstanceTooLarge(format!("oracle dimension {dim}")));
    }
    let energy = |idx: usize| -> f64 {
        let mut k = idx;
        let mut e = 0.0;
        for j in (0..modes).rev() {
            e += (k % per) as f64 * spec.omega[j];
            k /= per;
        }
        e
    };
    match beta {
        None => {
            // ⟨∅| e^{−s₁H₀} e^{iφ₁} e^{−(s₂−s₁)H₀} ⋯ e^{iφ_n} |∅⟩
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[0] = C64::new(1.0, 0.0);
            for i in (0..ins.len()).rev() {
                let u = exp_iphi(&ins.vectors[i], n_max);
                let mut w = vec![C64::new(0.0, 0.0); dim];
                for r in 0..dim {
                    let mut acc = C64::new(0.0, 0.0);
                    for c in 0..dim {
                        acc += u[(r, c)] * v[c];
                    }
                    w[r] = acc;
                }
                let gap = if i == 0 { ins.times[0] } else { ins.times[i] - ins.times[i - 1] };
                for (r, val) in w.iter_mut().enumerate() {
                    *val *= C64::new((-gap * energy(r)).exp(), 0.0);
                }
                v = w;
            }
            Ok(v[0].re)
        }
        Some(b) => {
            if b <= 0.0 {
                return Err(CoreError::InvalidParameter("β must be positive".into()));
            }
            // Tr[e^{−s₁H₀} e^{iφ₁} ⋯ e^{iφ_n} e^{−(β−s_n)H₀}] / Z_trunc
            let mut prod = Array2::<C64>::zeros((dim, dim));
            for i in 0..dim {
                prod[(i, i)] = C64::new(1.0, 0.0);
            }
            let mut prev = 0.0;
            for i in 0..ins.len() {
                let gap = ins.times[i] - prev;
                let mut diag = Array2::<C64>::zeros((dim, dim));
                for r in 0..dim {
                    diag[(r, r)] = C64::new((-gap * energy(r)).exp(), 0.0);
                }
                prod = prod.dot(&diag).dot(&exp_iphi(&ins.vectors[i], n_max));
                prev = ins.times[i];
            }
            let mut z = 0.0;
            let mut tr = C64::new(0.0, 0.0);
            for r in 0..dim {
                let tail = (-(b - prev) * energy(r)).exp();
                tr += prod[(r, r)] * tail;
                z += (-b * energy(r)).exp();
            }
            Ok(tr.re / z)
        }
    }
}
