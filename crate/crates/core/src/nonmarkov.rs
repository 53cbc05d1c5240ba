//! Collision models with memory.
//!
//! Four families are covered: ancilla-ancilla (AA) collisions interleaved
//! with the system-ancilla ones, initially correlated ancillas, delayed
//! bi-local collisions in the single-excitation sector, and composite models
//! where a memory subsystem mediates between the system and the bath.

use rayon::prelude::*;
use thiserror::Error;

use crate::collision::{self, exchange_coupling, CollisionError, CollisionModelSpec, Source, Variant};
use crate::linalg::{
    self, c, conjugate_local, cr, eigh, expm_unitary, kron, ops, partial_trace_idx, LinalgError, Mat, I,
    C64,
};
use crate::master_eq::{LindbladGenerator, MasterEqError, Solution, MAX_STEP_FRACTION};
use crate::states::{DensityMatrix, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonMarkovError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    MasterEq(#[from] MasterEqError),
    #[error("joint dimension {dim} exceeds cap {cap}; request a window")]
    CapExceeded { dim: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("step too coarse: dt·rate = {product:.3e} exceeds {limit}")]
    StepTooCoarse { product: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, NonMarkovError>;

/// Largest joint dimension `d_S·d_Aᵏ` the AA engine will hold.
pub const AA_DIM_CAP: usize = 1024;
/// Largest `γΔt` accepted by the delayed-collision model.
pub const DELAY_STEP_GUARD: f64 = 0.1;
/// Tolerance on mixture weights summing to one.
pub const WEIGHT_TOL: f64 = 1e-12;

fn check_probability(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NonMarkovError::InvalidParameter(format!("{name} = {p} must lie in [0, 1]")));
    }
    Ok(())
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NonMarkovError::InvalidParameter(format!("{name} = {x} must be > 0")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ancilla-ancilla collisions

/// How ancilla `n−1` talks to ancilla `n` before `n` meets the system.
#[derive(Debug, Clone, PartialEq)]
pub enum AaMode {
    /// `W = √q I − i√p S`, a unitary partial swap.
    CoherentPartialSwap,
    /// `σ ↦ qσ + p SσS`, a probabilistic swap.
    IncoherentSwapMap,
    /// Arbitrary unitary on (older ancilla ⊗ newer ancilla); `p` is ignored.
    Unitary(Mat),
}

#[derive(Debug, Clone)]
pub struct AASpec {
    pub base: CollisionModelSpec,
    pub p: f64,
    pub mode: AaMode,
}

impl AASpec {
    pub fn new(base: CollisionModelSpec, p: f64, mode: AaMode) -> Result<Self> {
        let spec = Self { base, p, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.p, "swap probability p")?;
        self.base.validate()?;
        if !matches!(self.base.variant, Variant::Basic) {
            return Err(NonMarkovError::Unsupported("AA collisions need a basic base model".into()));
        }
        if let AaMode::Unitary(w) = &self.mode {
            let d = self.base.ancilla.at(1).dim();
            if w.nrows() != d * d || w.ncols() != d * d {
                return Err(NonMarkovError::DimensionMismatch(format!(
                    "AA unitary is {}×{}, ancilla pair needs {}",
                    w.nrows(),
                    w.ncols(),
                    d * d
                )));
            }
        }
        Ok(())
    }

    /// The AA unitary, when the mode has one.
    pub fn aa_unitary(&self, d_a: usize) -> Option<Mat> {
        match &self.mode {
            AaMode::CoherentPartialSwap => Some(partial_swap(d_a, self.p)),
            AaMode::IncoherentSwapMap => None,
            AaMode::Unitary(w) => Some(w.clone()),
        }
    }
}

/// `√(1−p) I − i√p S` on two `d`-level systems. Unitary because `S² = I`.
pub fn partial_swap(d: usize, p: f64) -> Mat {
    let q = 1.0 - p;
    linalg::identity(d * d) * cr(q.sqrt()) - ops::swap(d) * (I * p.sqrt())
}

/// Retention policy of the ancilla register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaRoute {
    /// Keep every ancilla; fails past [`AA_DIM_CAP`].
    Exact,
    /// Keep the last `ℓ ≥ 1` ancillas and trace out older ones.
    ///
    /// An ancilla's last interaction is the AA collision with its
    /// successor, so any `ℓ ≥ 1` reproduces the exact route.
    Window(usize),
}

/// System states `ρ₀..ρ_n` of the AA model.
///
/// Step `n` brings in `η_n`, applies the AA collision on `(n−1, n)` (from
/// step 2 on) and then the system-ancilla unitary `U_n`.
pub fn run_aa(spec: &AASpec, rho0: &Mat, n: usize, route: AaRoute) -> Result<Vec<Mat>> {
    spec.validate()?;
    let keep = match route {
        AaRoute::Exact => usize::MAX,
        AaRoute::Window(0) => {
            return Err(NonMarkovError::InvalidParameter("window length must be ≥ 1".into()));
        }
        AaRoute::Window(l) => l,
    };
    let d_s = rho0.nrows();
    let mut dims = vec![d_s];
    let mut joint = rho0.clone();
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho0.clone());
    for step in 1..=n {
        let eta = spec.base.ancilla.at(step);
        let d_a = eta.dim();
        if let Some(&prev) = dims.get(1..).and_then(|s| s.last()) {
            if prev != d_a {
                return Err(NonMarkovError::DimensionMismatch(format!("ancilla dims {prev} and {d_a} differ")));
            }
        }
        let dim = joint.nrows() * d_a;
        if dim > AA_DIM_CAP {
            return Err(NonMarkovError::CapExceeded { dim, cap: AA_DIM_CAP });
        }
        joint = kron(&joint, eta.matrix())?;
        dims.push(d_a);
        let k = dims.len() - 1;
        if k >= 2 {
            joint = match spec.aa_unitary(d_a) {
                Some(w) => conjugate_local(&w, &joint, &dims, &[k - 1, k])?,
                None => {
                    let swapped = conjugate_local(&ops::swap(d_a), &joint, &dims, &[k - 1, k])?;
                    joint * cr(1.0 - spec.p) + swapped * cr(spec.p)
                }
            };
        }
        let u = spec.base.unitary(step)?;
        joint = conjugate_local(&u, &joint, &dims, &[0, k])?;
        out.push(hermitize(partial_trace_idx(&joint, &dims, &[0])?));
        while dims.len() - 1 > keep {
            let rest: Vec<usize> = (0..dims.len()).filter(|&i| i != 1).collect();
            joint = partial_trace_idx(&joint, &dims, &rest)?;
            dims.remove(1);
        }
    }
    Ok(out)
}

/// Composite-model form of a coherent AA model: memory = ancilla 1,
/// `U_SM = U₁` and memory-ancilla unitary `S·W`.
pub fn aa_as_composite(spec: &AASpec) -> Result<(Mat, Mat)> {
    spec.validate()?;
    let d_a = spec.base.ancilla.at(1).dim();
    let w = spec
        .aa_unitary(d_a)
        .ok_or_else(|| NonMarkovError::Unsupported("incoherent AA map has no unitary form".into()))?;
    Ok((spec.base.unitary(1)?, ops::swap(d_a) * w))
}

// ---------------------------------------------------------------------------
// Memory kernel

/// `ℱ_j[ρ] = Tr_A{U^j (ρ⊗η) U^{†j}}` as a column-stacked superoperator.
fn power_map(u_j: &Mat, eta: &Mat, d_s: usize) -> Result<Mat> {
    Ok(collision::kraus_superop(&collision::kraus_operators(u_j, eta, d_s)?))
}

/// Closed recursion of the incoherent AA model:
/// `ρ_n = q Σ_{j=1}^{n−1} p^{j−1} ℱ_j[ρ_{n−j}] + p^{n−1} ℱ_n[ρ₀]`.
pub fn memory_kernel_recursion(u1: &Mat, eta: &Mat, p: f64, rho0: &Mat, n: usize) -> Result<Vec<Mat>> {
    check_probability(p, "swap probability p")?;
    let d_s = rho0.nrows();
    let q = 1.0 - p;
    let mut maps = Vec::with_capacity(n);
    let mut u_j = linalg::identity(u1.nrows());
    for _ in 0..n {
        u_j = u1 * &u_j;
        maps.push(power_map(&u_j, eta, d_s)?);
    }
    let mut states: Vec<Mat> = vec![rho0.clone()];
    for m in 1..=n {
        let mut acc = linalg::apply_superop(&maps[m - 1], rho0) * cr(p.powi(m as i32 - 1));
        for j in 1..m {
            acc += linalg::apply_superop(&maps[j - 1], &states[m - j]) * cr(q * p.powi(j as i32 - 1));
        }
        states.push(hermitize(acc));
    }
    Ok(states)
}

/// Memory-kernel master equation
/// `ρ̇ = Γ∫₀ᵗ e^{−Γs} ℱ(s)[ρ̇(t−s)] ds + e^{−Γt} ℱ̇(t)[ρ₀]`
/// with `ℱ(t)[ρ] = Tr_A{e^{−iHt}(ρ⊗η)e^{iHt}}`.
///
/// The history integral is a trapezoid rule on the outer grid; the `s = 0`
/// end involves the unknown `ρ̇(t)` and is solved for in closed form.
pub fn memory_kernel_me(gamma: f64, h: &Mat, eta: &Mat, rho0: &Mat, t_max: f64, dt: f64) -> Result<Solution> {
    if !(gamma >= 0.0) {
        return Err(NonMarkovError::InvalidParameter(format!("Γ = {gamma} must be ≥ 0")));
    }
    check_positive(dt, "dt")?;
    let d_s = rho0.nrows();
    let d_a = eta.nrows();
    if h.nrows() != d_s * d_a {
        return Err(NonMarkovError::DimensionMismatch(format!("H is {}×{}, need {}", h.nrows(), h.ncols(), d_s * d_a)));
    }
    let (vals, vecs) = eigh(h)?;
    let h_norm = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let product = dt * (gamma + 2.0 * h_norm);
    if product > MAX_STEP_FRACTION {
        return Err(NonMarkovError::StepTooCoarse { product, limit: MAX_STEP_FRACTION });
    }
    let steps = (t_max / dt).round() as usize;
    let unitary_at = |t: f64| {
        let mut scaled = vecs.clone();
        for (j, &l) in vals.iter().enumerate() {
            let ph = C64::from_polar(1.0, -l * t);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= ph;
            }
        }
        scaled * vecs.adjoint()
    };
    let joint0 = kron(rho0, eta)?;
    let dims = [d_s, d_a];
    let mut maps = Vec::with_capacity(steps + 1);
    let mut drive = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let u = unitary_at(k as f64 * dt);
        maps.push(power_map(&u, eta, d_s)?);
        let evolved = &u * &joint0 * u.adjoint();
        let deriv = linalg::commutator(h, &evolved) * c(0.0, -1.0);
        drive.push(partial_trace_idx(&deriv, &dims, &[0])?);
    }
    let decay = |k: usize| (-gamma * k as f64 * dt).exp();
    let denom = 1.0 - gamma * dt / 2.0;
    let mut rates: Vec<Mat> = Vec::with_capacity(steps + 1);
    rates.push(drive[0].clone());
    for k in 1..=steps {
        let mut hist = linalg::apply_superop(&maps[k], &rates[0]) * cr(0.5 * decay(k));
        for j in 1..k {
            hist += linalg::apply_superop(&maps[j], &rates[k - j]) * cr(decay(j));
        }
        let r = (hist * cr(gamma * dt) + &drive[k] * cr(decay(k))) * cr(1.0 / denom);
        rates.push(r);
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut rho = rho0.clone();
    times.push(0.0);
    states.push(rho.clone());
    for k in 1..=steps {
        rho += (&rates[k - 1] + &rates[k]) * cr(dt / 2.0);
        rho = hermitize(rho);
        times.push(k as f64 * dt);
        states.push(rho.clone());
    }
    Ok(Solution { times, states })
}

// ---------------------------------------------------------------------------
// Initially correlated ancillas

/// Bath state `Σ_m p_m ⊗_n η_{mn}`.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub components: Vec<Source<DensityMatrix>>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, components: Vec<Source<DensityMatrix>>) -> Result<Self> {
        let spec = Self { weights, components };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.components.len() || self.weights.is_empty() {
            return Err(NonMarkovError::InvalidParameter(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(NonMarkovError::InvalidParameter(format!("weight {w} must be ≥ 0")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(NonMarkovError::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// `ρ_n = Σ_m p_m ℰ_m^n[ρ₀]` for `n = 0..=n_steps`, one basic run per component.
pub fn mixture_dynamics(
    spec: &MixtureSpec,
    base: &CollisionModelSpec,
    rho0: &Mat,
    n_steps: usize,
) -> Result<Vec<Mat>> {
    spec.validate()?;
    let runs = spec
        .components
        .par_iter()
        .map(|comp| {
            let mut s = base.clone();
            s.ancilla = comp.clone();
            collision::run_states(&s, rho0, n_steps)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = vec![Mat::zeros(rho0.nrows(), rho0.ncols()); n_steps + 1];
    for (w, run) in spec.weights.iter().zip(&runs) {
        for (acc, rho) in out.iter_mut().zip(run) {
            *acc += rho * cr(*w);
        }
    }
    Ok(out.into_iter().map(hermitize).collect())
}

// ---------------------------------------------------------------------------
// Delayed bi-local collisions

/// Emitter coupled to a unidirectional field at two points `d` steps apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    pub gamma: f64,
    pub dt: f64,
    pub delay: usize,
    pub phi: f64,
}

impl DelaySpec {
    pub fn new(gamma: f64, dt: f64, delay: usize, phi: f64) -> Result<Self> {
        let spec = Self { gamma, dt, delay, phi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive(self.gamma, "γ")?;
        check_positive(self.dt, "Δt")?;
        if self.delay == 0 {
            return Err(NonMarkovError::InvalidParameter("delay must be ≥ 1".into()));
        }
        if self.gamma * self.dt > DELAY_STEP_GUARD {
            return Err(NonMarkovError::InvalidParameter(format!(
                "γΔt = {} exceeds {DELAY_STEP_GUARD}",
                self.gamma * self.dt
            )));
        }
        Ok(())
    }

    /// Delay time `τ = dΔt`.
    pub fn tau(&self) -> f64 {
        self.delay as f64 * self.dt
    }
}

/// Emitter amplitudes `α⁽⁰⁾..α⁽ⁿ⁾` from the finite-difference equation
/// `α⁽ⁿ⁺¹⁾ = (1−γΔt)α⁽ⁿ⁾ − γΔt e^{iφ} α⁽ⁿ⁻ᵈ⁾ θ(n ≥ d)`, starting excited.
pub fn delayed_emission(spec: &DelaySpec, n_max: usize) -> Result<Vec<C64>> {
    spec.validate()?;
    let gdt = spec.gamma * spec.dt;
    let phase = C64::from_polar(1.0, spec.phi);
    let mut alpha = Vec::with_capacity(n_max + 1);
    alpha.push(cr(1.0));
    for n in 0..n_max {
        let mut next = alpha[n] * (1.0 - gdt);
        if n >= spec.delay {
            next -= phase * alpha[n - spec.delay] * gdt;
        }
        alpha.push(next);
    }
    Ok(alpha)
}

/// Single-excitation collision generator on `(α, λ_n, λ_{n−d})`.
pub fn delay_coupling(spec: &DelaySpec) -> Mat {
    let k = cr((spec.gamma / spec.dt).sqrt());
    let e = C64::from_polar(1.0, spec.phi);
    Mat::from_row_slice(3, 3, &[cr(0.0), k, k * e, k, cr(0.0), cr(0.0), k * e.conj(), cr(0.0), cr(0.0)])
}

/// Emitter amplitudes with each bi-local collision applied as the full
/// exponential `exp(−iVΔt)` in the single-excitation sector.
///
/// Ancilla `m` is fresh at step `m → m+1` and is met again `d` steps later;
/// ancillas with negative index are empty.
pub fn delayed_emission_exact(spec: &DelaySpec, n_max: usize) -> Result<Vec<C64>> {
    spec.validate()?;
    let u = expm_unitary(&delay_coupling(spec), spec.dt)?;
    let mut lambda = vec![cr(0.0); n_max];
    let mut alpha = Vec::with_capacity(n_max + 1);
    let mut a = cr(1.0);
    alpha.push(a);
    for n in 0..n_max {
        let b = lambda[n];
        let c_old = if n >= spec.delay { lambda[n - spec.delay] } else { cr(0.0) };
        let a2 = u[(0, 0)] * a + u[(0, 1)] * b + u[(0, 2)] * c_old;
        let b2 = u[(1, 0)] * a + u[(1, 1)] * b + u[(1, 2)] * c_old;
        let c2 = u[(2, 0)] * a + u[(2, 1)] * b + u[(2, 2)] * c_old;
        a = a2;
        lambda[n] = b2;
        if n >= spec.delay {
            lambda[n - spec.delay] = c2;
        }
        alpha.push(a);
    }
    Ok(alpha)
}

/// RK4 solution of `α̇ = −γα − γe^{iφ}α(t−τ)θ(t−τ)` on a grid of step `h`
/// dividing `τ`; delayed values between grid points use cubic Hermite
/// interpolation of the stored history.
pub fn delay_dde(gamma: f64, tau: f64, phi: f64, t_max: f64, h: f64) -> Result<Vec<(f64, C64)>> {
    check_positive(gamma, "γ")?;
    check_positive(tau, "τ")?;
    check_positive(h, "h")?;
    let m_f = tau / h;
    let m = m_f.round() as usize;
    if m == 0 || (m_f - m as f64).abs() > 1e-9 * m_f.max(1.0) {
        return Err(NonMarkovError::InvalidParameter(format!("step {h} does not divide τ = {tau}")));
    }
    let e = C64::from_polar(1.0, phi);
    let steps = (t_max / h).round() as usize;
    // per interval k: (α_k, α_{k+1}, α̇ at left, α̇ at right)
    let mut pieces: Vec<(C64, C64, C64, C64)> = Vec::with_capacity(steps);
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = cr(1.0);
    out.push((0.0, a));
    let delayed = |pieces: &[(C64, C64, C64, C64)], k: usize, s: f64| -> C64 {
        // value at grid position (k − m) + s, s ∈ [0, 1]
        if k < m {
            return cr(0.0);
        }
        let (y0, y1, d0, d1) = pieces[k - m];
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * (h * (s3 - 2.0 * s2 + s))
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + d1 * (h * (s3 - s2))
    };
    for k in 0..steps {
        let active = k >= m;
        let f = |y: C64, del: C64| -> C64 {
            let mut r = -y * gamma;
            if active {
                r -= e * del * gamma;
            }
            r
        };
        let d_start = delayed(&pieces, k, 0.0);
        let d_mid = delayed(&pieces, k, 0.5);
        let d_end = delayed(&pieces, k, 1.0);
        let k1 = f(a, d_start);
        let k2 = f(a + k1 * (h / 2.0), d_mid);
        let k3 = f(a + k2 * (h / 2.0), d_mid);
        let k4 = f(a + k3 * h, d_end);
        let next = a + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        pieces.push((a, next, k1, f(next, d_end)));
        a = next;
        out.push(((k + 1) as f64 * h, a));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Composite collision models

/// System `𝒮`, memory `M` and bath ancillas are qubits; `𝒮–M` and
/// `M–ancilla` exchange excitations at rates `G` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeSpec {
    pub big_g: f64,
    pub g: f64,
    pub dt: f64,
}

impl CompositeSpec {
    pub fn new(big_g: f64, g: f64, dt: f64) -> Result<Self> {
        let spec = Self { big_g, g, dt };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.big_g >= 0.0) || !(self.g >= 0.0) {
            return Err(NonMarkovError::InvalidParameter(format!(
                "rates G = {}, g = {} must be ≥ 0",
                self.big_g, self.g
            )));
        }
        check_positive(self.dt, "Δt")
    }

    /// `γ = g²Δt`.
    pub fn gamma(&self) -> f64 {
        self.g * self.g * self.dt
    }
}

/// Excitation amplitudes of `𝒮` and `M` from `(1, 0)` under
/// `D = [[C, −icS], [−iS, cC]]`, `c = cos gΔt`, `C = cos GΔt`, `S = sin GΔt`.
///
/// `β⁽ⁿ⁾` is the memory amplitude just after the memory's `n`-th bath
/// collision has been discounted from the system side, so `α⁽ⁿ⁾` is the
/// system amplitude after `n` full steps of the composite map.
pub fn composite_recurrence(spec: &CompositeSpec, n_max: usize) -> Result<Vec<(C64, C64)>> {
    spec.validate()?;
    let sc = (spec.g * spec.dt).cos();
    let (big_s, big_c) = (spec.big_g * spec.dt).sin_cos();
    let mi = c(0.0, -1.0);
    let mut out = Vec::with_capacity(n_max + 1);
    let (mut a, mut b) = (cr(1.0), cr(0.0));
    out.push((a, b));
    for _ in 0..n_max {
        let a2 = a * big_c + mi * b * (sc * big_s);
        let b2 = mi * a * big_s + b * (sc * big_c);
        a = a2;
        b = b2;
        out.push((a, b));
    }
    Ok(out)
}

/// `e^{−γt/4}[cos(δt/2) + (γ/2δ) sin(δt/2)]` with `δ = √(4G² − γ²/4)` taken complex.
pub fn cossin_amplitude(gamma: f64, big_g: f64, t: f64) -> C64 {
    let delta = cr(4.0 * big_g * big_g - gamma * gamma / 4.0).sqrt();
    let envelope = (-gamma * t / 4.0).exp();
    if delta.norm() < 1e-12 {
        // critical damping limit of sin(δt/2)/δ
        return cr(envelope * (1.0 + gamma * t / 4.0));
    }
    let x = delta * (t / 2.0);
    (x.cos() + x.sin() * cr(gamma / 2.0) / delta) * envelope
}

/// `(U_𝒮M, U_Mn)` for a composite model, resonant and in the interaction picture.
pub fn composite_unitaries(spec: &CompositeSpec) -> Result<(Mat, Mat)> {
    spec.validate()?;
    let sm = ops::sigma_minus();
    let u_sm = expm_unitary(&exchange_coupling(&sm, &sm, spec.big_g), spec.dt)?;
    let u_mn = expm_unitary(&exchange_coupling(&sm, &sm, spec.g), spec.dt)?;
    Ok((u_sm, u_mn))
}

/// System states `ρ₀..ρ_n` of `ρ_n = Tr_M (ℳ 𝒰_𝒮M)ⁿ [ρ₀ ⊗ η_M]`, where
/// `ℳ[σ] = Tr_n{U_Mn (σ ⊗ η) U_Mn†}` acts on the memory.
pub fn composite_map_run(u_sm: &Mat, u_mn: &Mat, eta_m: &Mat, eta: &Mat, rho0: &Mat, n: usize) -> Result<Vec<Mat>> {
    let (d_s, d_m, d_a) = (rho0.nrows(), eta_m.nrows(), eta.nrows());
    if u_sm.nrows() != d_s * d_m || u_sm.ncols() != d_s * d_m {
        return Err(NonMarkovError::DimensionMismatch(format!("U_SM is {}×{}, need {}", u_sm.nrows(), u_sm.ncols(), d_s * d_m)));
    }
    if u_mn.nrows() != d_m * d_a || u_mn.ncols() != d_m * d_a {
        return Err(NonMarkovError::DimensionMismatch(format!("U_Mn is {}×{}, need {}", u_mn.nrows(), u_mn.ncols(), d_m * d_a)));
    }
    let dims = [d_s, d_m, d_a];
    let mut joint = kron(rho0, eta_m)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho0.clone());
    for _ in 0..n {
        joint = u_sm * &joint * u_sm.adjoint();
        let mut big = kron(&joint, eta)?;
        big = conjugate_local(u_mn, &big, &dims, &[1, 2])?;
        joint = hermitize(partial_trace_idx(&big, &dims, &[0, 1])?);
        out.push(partial_trace_idx(&joint, &dims[..2], &[0])?);
    }
    Ok(out)
}

/// Coarse-grained master equation of `𝒮 ⊗ M`: exchange at rate `G`, memory decay at `γ`.
pub fn cqed_generator(big_g: f64, gamma: f64) -> Result<LindbladGenerator> {
    let sm = ops::sigma_minus();
    let h = exchange_coupling(&sm, &sm, big_g);
    let mem_decay = kron(&linalg::identity(2), &sm)?;
    Ok(LindbladGenerator::new(h, vec![(gamma, mem_decay)])?)
}

/// RK4 solution of `α̇ = −iGβ`, `β̇ = −iGα − (γ/2)β` from `(1, 0)`.
pub fn cqed_amplitudes(big_g: f64, gamma: f64, t_max: f64, dt: f64) -> Result<Vec<(f64, C64, C64)>> {
    check_positive(dt, "dt")?;
    let f = |a: C64, b: C64| (I * (-big_g) * b, I * (-big_g) * a - b * (gamma / 2.0));
    let steps = (t_max / dt).round() as usize;
    let (mut a, mut b) = (cr(1.0), cr(0.0));
    let mut out = vec![(0.0, a, b)];
    for k in 0..steps {
        let (ka1, kb1) = f(a, b);
        let (ka2, kb2) = f(a + ka1 * (dt / 2.0), b + kb1 * (dt / 2.0));
        let (ka3, kb3) = f(a + ka2 * (dt / 2.0), b + kb2 * (dt / 2.0));
        let (ka4, kb4) = f(a + ka3 * dt, b + kb3 * dt);
        a += (ka1 + ka2 * 2.0 + ka3 * 2.0 + ka4) * (dt / 6.0);
        b += (kb1 + kb2 * 2.0 + kb3 * 2.0 + kb4) * (dt / 6.0);
        out.push(((k + 1) as f64 * dt, a, b));
    }
    Ok(out)
}

fn hermitize(m: Mat) -> Mat {
    (&m + m.adjoint()) * cr(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::all_qubit_coupling;
    use crate::linalg::max_abs_diff;
    use crate::states::qubit_hamiltonian;

    fn qubit_spec(g: f64, dt: f64, eta: &Mat) -> CollisionModelSpec {
        CollisionModelSpec::basic(
            qubit_hamiltonian(1.0),
            qubit_hamiltonian(1.0),
            all_qubit_coupling(g, 0.0),
            DensityMatrix::single(eta.clone(), "A").unwrap(),
            dt,
        )
    }

    fn ground() -> Mat {
        linalg::projector(&ops::ground())
    }

    fn excited() -> Mat {
        linalg::projector(&ops::excited())
    }

    #[test]
    fn partial_swap_is_unitary() {
        let w = partial_swap(3, 0.3);
        assert!(max_abs_diff(&(&w * w.adjoint()), &linalg::identity(9)) < 1e-14);
    }

    #[test]
    fn aa_with_p_zero_is_basic() {
        let spec = AASpec::new(qubit_spec(1.0, 0.3, &ground()), 0.0, AaMode::CoherentPartialSwap).unwrap();
        let aa = run_aa(&spec, &excited(), 5, AaRoute::Exact).unwrap();
        let basic = collision::run_states(&spec.base, &excited(), 5).unwrap();
        for (a, b) in aa.iter().zip(&basic) {
            assert!(max_abs_diff(a, b) < 1e-14);
        }
    }

    #[test]
    fn window_matches_exact() {
        let spec = AASpec::new(qubit_spec(1.0, 0.4, &ground()), 0.35, AaMode::CoherentPartialSwap).unwrap();
        let exact = run_aa(&spec, &excited(), 6, AaRoute::Exact).unwrap();
        let windowed = run_aa(&spec, &excited(), 6, AaRoute::Window(1)).unwrap();
        for (a, b) in exact.iter().zip(&windowed) {
            assert!(max_abs_diff(a, b) < 1e-13);
        }
    }

    #[test]
    fn exact_route_hits_cap() {
        let spec = AASpec::new(qubit_spec(1.0, 0.4, &ground()), 0.5, AaMode::IncoherentSwapMap).unwrap();
        let err = run_aa(&spec, &excited(), 12, AaRoute::Exact).unwrap_err();
        assert!(matches!(err, NonMarkovError::CapExceeded { .. }));
        assert!(run_aa(&spec, &excited(), 12, AaRoute::Window(2)).is_ok());
    }

    #[test]
    fn kernel_recursion_limits() {
        let spec = qubit_spec(1.0, 0.3, &ground());
        let u = spec.unitary(1).unwrap();
        let basic = collision::run_states(&spec, &excited(), 4).unwrap();
        let r0 = memory_kernel_recursion(&u, &ground(), 0.0, &excited(), 4).unwrap();
        assert!(max_abs_diff(&r0[4], &basic[4]) < 1e-14);
        let r1 = memory_kernel_recursion(&u, &ground(), 1.0, &excited(), 4).unwrap();
        let u4 = &u * &u * &u * &u;
        let direct = power_map(&u4, &ground(), 2).unwrap();
        assert!(max_abs_diff(&r1[4], &linalg::apply_superop(&direct, &excited())) < 1e-14);
    }

    #[test]
    fn delay_is_memoryless_before_d() {
        let spec = DelaySpec::new(1.0, 1e-3, 20, 0.7).unwrap();
        let a = delayed_emission(&spec, 20).unwrap();
        let mut expected = 1.0;
        for v in &a {
            assert_eq!(*v, cr(expected));
            expected *= 1.0 - 1e-3;
        }
        assert!(DelaySpec::new(1.0, 0.2, 3, 0.0).is_err());
    }

    #[test]
    fn rabi_recurrence_conserves_norm() {
        let spec = CompositeSpec::new(1.0, 0.0, 0.1).unwrap();
        for (a, b) in composite_recurrence(&spec, 200).unwrap() {
            assert!((a.norm_sqr() + b.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cossin_at_origin() {
        assert!((cossin_amplitude(1.0, 1.0, 0.0) - cr(1.0)).norm() < 1e-15);
        assert!((cossin_amplitude(1.0, 0.1, 0.0) - cr(1.0)).norm() < 1e-15);
        let v = cossin_amplitude(1.0, 0.1, 3.0);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn mixture_weights_validated() {
        let eta = DensityMatrix::single(ground(), "A").unwrap();
        assert!(MixtureSpec::new(vec![0.5, 0.4], vec![eta.clone().into(), eta.clone().into()]).is_err());
        assert!(MixtureSpec::new(vec![-0.5, 1.5], vec![eta.clone().into(), eta.into()]).is_err());
    }
}
