//! Master equations from collision models.
//!
//! For a coupling `V = Σ_ν g_ν A_ν ⊗ B_ν` and ancilla state `η`, the
//! second-order expansion of one collision gives the discrete Lindblad equation
//! `Δρ/Δt = -i[H_S + H', ρ] + D[ρ]` with `H' = Σ g_ν⟨B_ν⟩A_ν` and
//! `D[ρ] = Σ g_ν g_μ Δt ⟨B_μB_ν⟩ (A_ν ρ A_μ − ½{A_μA_ν, ρ})`.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, cr, eigh, kron, ops, LinalgError, Mat, C64};
use crate::states::{StateError, TAIL_MASS_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterEqError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("invalid moment matrix: {0}")]
    InvalidMoments(String),
    #[error("dt too coarse: dt·rate = {product:.3e} exceeds {limit}")]
    DtTooCoarse { product: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncation too small: {0}")]
    Truncation(String),
}

pub type Result<T> = std::result::Result<T, MasterEqError>;

/// Tolerance below which negative Kossakowski eigenvalues are clamped to zero.
pub const PSD_TOL: f64 = 1e-10;
/// Largest allowed `dt × rate_scale` for the fixed-step integrator.
pub const MAX_STEP_FRACTION: f64 = 1.0;

/// One term `g A ⊗ B` of a coupling Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTerm {
    pub g: C64,
    pub a: Mat,
    pub b: Mat,
}

impl CouplingTerm {
    pub fn new(g: C64, a: Mat, b: Mat) -> Self {
        Self { g, a, b }
    }
}

/// Coupling decomposition with ancilla first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentData {
    pub terms: Vec<CouplingTerm>,
    /// `⟨B_ν⟩`.
    pub first: Vec<C64>,
    /// `second[(ν, μ)] = ⟨B_ν B_μ⟩`.
    pub second: Mat,
}

impl MomentData {
    /// Moments evaluated on an ancilla state.
    pub fn from_state(terms: Vec<CouplingTerm>, eta: &Mat) -> Result<Self> {
        check_coupling(&terms)?;
        let first = terms.iter().map(|t| linalg::expect(&t.b, eta)).collect();
        let k = terms.len();
        let second = Mat::from_fn(k, k, |nu, mu| linalg::expect(&(&terms[nu].b * &terms[mu].b), eta));
        Ok(Self { terms, first, second })
    }

    /// Moments supplied directly (e.g. for baths known only through moments).
    pub fn explicit(terms: Vec<CouplingTerm>, first: Vec<C64>, second: Mat) -> Result<Self> {
        check_coupling(&terms)?;
        let k = terms.len();
        if first.len() != k || second.nrows() != k || second.ncols() != k {
            return Err(MasterEqError::DimensionMismatch(format!("{k} terms but moments of other size")));
        }
        Ok(Self { terms, first, second })
    }

    /// Generic decomposition `V = Σ_ab |a⟩⟨b| ⊗ B_ab` of a joint coupling.
    pub fn from_coupling(v: &Mat, d_s: usize, eta: &Mat) -> Result<Self> {
        let d_a = eta.nrows();
        if v.nrows() != d_s * d_a {
            return Err(MasterEqError::DimensionMismatch(format!("coupling dimension {} ≠ {d_s}·{d_a}", v.nrows())));
        }
        let mut terms = Vec::with_capacity(d_s * d_s);
        for a in 0..d_s {
            for b in 0..d_s {
                let block = v.view((a * d_a, b * d_a), (d_a, d_a)).into_owned();
                if linalg::max_abs(&block) == 0.0 {
                    continue;
                }
                terms.push(CouplingTerm::new(cr(1.0), ops::matrix_unit(d_s, a, b), block));
            }
        }
        Self::from_state(terms, eta)
    }

    pub fn system_dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.a.nrows())
    }

    /// `Σ g_ν A_ν ⊗ B_ν`.
    pub fn coupling(&self) -> Result<Mat> {
        coupling_of(&self.terms)
    }
}

fn coupling_of(terms: &[CouplingTerm]) -> Result<Mat> {
    let first = terms.first().ok_or_else(|| MasterEqError::DimensionMismatch("empty coupling".into()))?;
    let d = first.a.nrows() * first.b.nrows();
    let mut v = Mat::zeros(d, d);
    for t in terms {
        v += kron(&t.a, &t.b)? * t.g;
    }
    Ok(v)
}

fn check_coupling(terms: &[CouplingTerm]) -> Result<()> {
    let v = coupling_of(terms)?;
    let dev = linalg::hermitian_deviation(&v);
    if dev > linalg::HERMITIAN_TOL {
        return Err(MasterEqError::InvalidMoments(format!("coupling not Hermitian ({dev:.3e})")));
    }
    Ok(())
}

/// `−i[H, ρ] + Σ_r γ_r (L_r ρ L_r† − ½{L_r†L_r, ρ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladGenerator {
    pub hamiltonian: Mat,
    pub jumps: Vec<(f64, Mat)>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: Mat, jumps: Vec<(f64, Mat)>) -> Result<Self> {
        linalg::ensure_hermitian(&hamiltonian)?;
        if let Some((r, _)) = jumps.iter().find(|(r, _)| *r < -1e-12) {
            return Err(MasterEqError::InvalidMoments(format!("negative rate {r}")));
        }
        Ok(Self { hamiltonian, jumps })
    }

    pub fn zero(d: usize) -> Self {
        Self { hamiltonian: Mat::zeros(d, d), jumps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn with_hamiltonian(mut self, h: &Mat) -> Result<Self> {
        linalg::ensure_hermitian(h)?;
        self.hamiltonian += h;
        Ok(self)
    }

    pub fn apply(&self, rho: &Mat) -> Mat {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
        for (rate, l) in &self.jumps {
            if *rate == 0.0 {
                continue;
            }
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * cr(0.5)) * cr(*rate);
        }
        out
    }

    /// Column-stacked superoperator.
    pub fn superop(&self) -> Mat {
        let d = self.dim();
        let id = linalg::identity(d);
        let h = &self.hamiltonian;
        let mut s = (linalg::sandwich_superop(h, &id) - linalg::sandwich_superop(&id, h)) * C64::new(0.0, -1.0);
        for (rate, l) in &self.jumps {
            let ld = l.adjoint();
            let ldl = &ld * l;
            s += (linalg::sandwich_superop(l, &ld)
                - (linalg::sandwich_superop(&ldl, &id) + linalg::sandwich_superop(&id, &ldl)) * cr(0.5))
                * cr(*rate);
        }
        s
    }

    /// Upper bound on the generator's fastest rate.
    pub fn rate_scale(&self) -> f64 {
        let h_norm = spectral_radius(&self.hamiltonian);
        let diss: f64 = self
            .jumps
            .iter()
            .map(|(r, l)| r.abs() * spectral_radius(&(l.adjoint() * l)))
            .sum();
        2.0 * h_norm + diss
    }
}

fn spectral_radius(h: &Mat) -> f64 {
    let herm = (h + h.adjoint()) * cr(0.5);
    linalg::eigvalsh(&herm).map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs()))).unwrap_or(f64::INFINITY)
}

/// Right-hand side of a (possibly time-dependent) master equation.
pub trait Generator: Sync {
    fn apply(&self, t: f64, rho: &Mat) -> Mat;
    fn rate_scale(&self) -> f64;
}

impl Generator for LindbladGenerator {
    fn apply(&self, _t: f64, rho: &Mat) -> Mat {
        LindbladGenerator::apply(self, rho)
    }

    fn rate_scale(&self) -> f64 {
        LindbladGenerator::rate_scale(self)
    }
}

/// A Lindblad generator plus a time-dependent Hamiltonian `H(t)`.
#[derive(Clone)]
pub struct DrivenGenerator {
    pub base: LindbladGenerator,
    pub drive: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    /// Bound on `‖H(t)‖` used for the step-size guard.
    pub drive_bound: f64,
}

impl Generator for DrivenGenerator {
    fn apply(&self, t: f64, rho: &Mat) -> Mat {
        let h = (self.drive)(t);
        self.base.apply(rho) + (&h * rho - rho * &h) * C64::new(0.0, -1.0)
    }

    fn rate_scale(&self) -> f64 {
        self.base.rate_scale() + 2.0 * self.drive_bound
    }
}

/// Kossakowski coefficients in the matrix-unit basis `F_i = |a⟩⟨b|`, `i = a·d + b`.
fn kossakowski(terms: &[CouplingTerm], coeff: &Mat) -> Mat {
    let d = terms[0].a.nrows();
    let n = d * d;
    // F_j = F_{k}† with k the transposed unit
    let tr = |i: usize| (i % d) * d + i / d;
    let mut k = Mat::zeros(n, n);
    for (nu, tn) in terms.iter().enumerate() {
        for (mu, tm) in terms.iter().enumerate() {
            let cnm = coeff[(nu, mu)];
            if cnm == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                let ai = tn.a[(i / d, i % d)];
                if ai == C64::new(0.0, 0.0) {
                    continue;
                }
                for kk in 0..n {
                    let j = tr(kk);
                    let aj = tm.a[(j / d, j % d)];
                    if aj != C64::new(0.0, 0.0) {
                        k[(i, kk)] += cnm * ai * aj;
                    }
                }
            }
        }
    }
    k
}

/// Diagonalizes a Kossakowski matrix into (rate, jump) pairs.
fn jumps_from_kossakowski(k: &Mat, d: usize) -> Result<Vec<(f64, Mat)>> {
    let scale = linalg::max_abs(k).max(1.0);
    let dev = linalg::hermitian_deviation(k);
    if dev > PSD_TOL * scale {
        return Err(MasterEqError::InvalidMoments(format!("coefficient matrix not Hermitian ({dev:.3e})")));
    }
    let herm = (k + k.adjoint()) * cr(0.5);
    let (vals, vecs) = eigh(&herm)?;
    let mut jumps = Vec::new();
    for (r, &lam) in vals.iter().enumerate() {
        if lam < -PSD_TOL * scale {
            return Err(MasterEqError::InvalidMoments(format!("negative eigenvalue {lam:.3e}")));
        }
        if lam <= 0.0 {
            continue;
        }
        let mut l = Mat::zeros(d, d);
        for i in 0..d * d {
            l[(i / d, i % d)] = vecs[(i, r)];
        }
        jumps.push((lam, l));
    }
    Ok(jumps)
}

/// Discrete-time generator (`H'` and dissipator) from bath moments.
pub fn generator_from_moments(m: &MomentData, dt: f64) -> Result<LindbladGenerator> {
    let d = m.system_dim();
    let mut h = Mat::zeros(d, d);
    for (t, b) in m.terms.iter().zip(&m.first) {
        h += &t.a * (t.g * b);
    }
    let k = m.terms.len();
    let coeff = Mat::from_fn(k, k, |nu, mu| m.terms[nu].g * m.terms[mu].g * dt * m.second[(mu, nu)]);
    let kos = kossakowski(&m.terms, &coeff);
    let jumps = jumps_from_kossakowski(&kos, d)?;
    let h = (&h + h.adjoint()) * cr(0.5);
    LindbladGenerator::new(h, jumps)
}

/// Jump operators `L_kk' = √p_k ⟨k'|V|k⟩ √Δt` over the eigenbasis of `η`.
pub fn jumps_from_spectral(v: &Mat, eta: &Mat, dt: f64) -> Result<Vec<Mat>> {
    let da = eta.nrows();
    if v.nrows() % da != 0 {
        return Err(MasterEqError::DimensionMismatch("coupling vs ancilla".into()));
    }
    let ds = v.nrows() / da;
    let (vals, vecs) = eigh(eta)?;
    let mut out = Vec::new();
    for (k, &p) in vals.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let vk = vecs.column(k);
        for kp in 0..da {
            let vkp = vecs.column(kp);
            let mut l = Mat::zeros(ds, ds);
            for a in 0..ds {
                for b in 0..ds {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..da {
                        let left = vkp[i].conj();
                        if left == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for j in 0..da {
                            acc += left * v[(a * da + i, b * da + j)] * vk[j];
                        }
                    }
                    l[(a, b)] = acc * (p * dt).sqrt();
                }
            }
            out.push(l);
        }
    }
    Ok(out)
}

/// Generator built from the spectral route: `H' = Tr_n{Vη}` and unit-rate jumps `L_kk'`.
pub fn generator_from_spectral(v: &Mat, eta: &Mat, dt: f64) -> Result<LindbladGenerator> {
    let da = eta.nrows();
    let ds = v.nrows() / da;
    let id = linalg::identity(ds);
    let h = linalg::partial_trace_idx(&(v * kron(&id, eta)?), &[ds, da], &[0])?;
    let h = (&h + h.adjoint()) * cr(0.5);
    let jumps = jumps_from_spectral(v, eta, dt)?.into_iter().map(|l| (1.0, l)).collect();
    LindbladGenerator::new(h, jumps)
}

/// Samples of an integrated master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Mat>,
}

/// Fixed-step RK4 from `t = 0` to `t_max`, recording every `stride` steps.
pub fn integrate(gen: &dyn Generator, rho0: &Mat, t_max: f64, dt: f64, stride: usize) -> Result<Solution> {
    if !(dt > 0.0) {
        return Err(MasterEqError::DtTooCoarse { product: f64::INFINITY, limit: MAX_STEP_FRACTION });
    }
    let product = dt * gen.rate_scale();
    if product > MAX_STEP_FRACTION {
        return Err(MasterEqError::DtTooCoarse { product, limit: MAX_STEP_FRACTION });
    }
    let steps = (t_max / dt).round() as usize;
    let stride = stride.max(1);
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut rho = rho0.clone();
    for n in 0..steps {
        let t = n as f64 * dt;
        rho = rk4_step(gen, t, &rho, dt);
        if (n + 1) % stride == 0 || n + 1 == steps {
            times.push((n + 1) as f64 * dt);
            states.push(rho.clone());
        }
    }
    Ok(Solution { times, states })
}

pub fn rk4_step(gen: &dyn Generator, t: f64, rho: &Mat, dt: f64) -> Mat {
    let h = cr(dt);
    let half = cr(dt / 2.0);
    let k1 = gen.apply(t, rho);
    let k2 = gen.apply(t + dt / 2.0, &(rho + &k1 * half));
    let k3 = gen.apply(t + dt / 2.0, &(rho + &k2 * half));
    let k4 = gen.apply(t + dt, &(rho + &k3 * h));
    let out = rho + (k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(dt / 6.0);
    (&out + out.adjoint()) * cr(0.5)
}

/// All-qubit exchange coupling terms `g(σ₊⊗σ₋ + σ₋⊗σ₊)` with `g = √(γ/Δt)`.
pub fn exchange_terms(gamma: f64, dt: f64) -> Vec<CouplingTerm> {
    let g = cr((gamma / dt).sqrt());
    vec![
        CouplingTerm::new(g, ops::sigma_plus(), ops::sigma_minus()),
        CouplingTerm::new(g, ops::sigma_minus(), ops::sigma_plus()),
    ]
}

/// Qubit colliding with vacuum qubit ancillas at diverging coupling.
pub fn spontaneous_emission_moments(gamma: f64, dt: f64) -> Result<MomentData> {
    MomentData::from_state(exchange_terms(gamma, dt), &linalg::projector(&ops::ground()))
}

/// Ancillas in `(|0⟩ + α√Δt|1⟩)/norm`.
pub fn coherent_superposition_moments(gamma: f64, alpha: C64, dt: f64) -> Result<MomentData> {
    let mut chi = ops::ground();
    chi[ops::EXCITED] = alpha * dt.sqrt();
    let chi = &chi / cr(chi.norm());
    MomentData::from_state(exchange_terms(gamma, dt), &linalg::projector(&chi))
}

/// Qubit exchanging excitations `√(γ/Δt)(σ₊ b + σ₋ b†)` with oscillator ancillas in `η`.
pub fn oscillator_bath_moments(gamma: f64, dt: f64, eta: &Mat) -> Result<MomentData> {
    let d = eta.nrows();
    let b = ops::annihilation(d);
    let g = cr((gamma / dt).sqrt());
    let terms = vec![
        CouplingTerm::new(g, ops::sigma_plus(), b.clone()),
        CouplingTerm::new(g, ops::sigma_minus(), b.adjoint()),
    ];
    MomentData::from_state(terms, eta)
}

/// Spontaneous emission plus a classical drive `Ω(e^{−iω_L t}σ₋ + e^{iω_L t}σ₊)`.
pub fn bloch_generator(gamma: f64, rabi: f64, omega_l: f64) -> DrivenGenerator {
    let base = LindbladGenerator { hamiltonian: Mat::zeros(2, 2), jumps: vec![(gamma, ops::sigma_minus())] };
    let drive = Arc::new(move |t: f64| {
        ops::sigma_minus() * C64::from_polar(rabi, -omega_l * t) + ops::sigma_plus() * C64::from_polar(rabi, omega_l * t)
    });
    DrivenGenerator { base, drive, drive_bound: rabi.abs() }
}

/// Cavity operators of the micromaser map on `d` Fock levels:
/// `(C, C', S)` with `C = cos(gτ√(aa†))`, `C' = cos(gτ√n̂)`, `S = sin(gτ√(aa†))/√(aa†)`.
///
/// `aa†` is the truncated product, so its top level is 0 and the map stays
/// exactly trace preserving.
pub fn micromaser_operators(g_tau: f64, d: usize) -> (Mat, Mat, Mat) {
    let mut c = Mat::zeros(d, d);
    let mut cp = Mat::zeros(d, d);
    let mut s = Mat::zeros(d, d);
    for n in 0..d {
        let x = if n + 1 < d { (n + 1) as f64 } else { 0.0 };
        let rx = x.sqrt();
        c[(n, n)] = cr((g_tau * rx).cos());
        cp[(n, n)] = cr((g_tau * (n as f64).sqrt()).cos());
        s[(n, n)] = cr(if x == 0.0 { g_tau } else { (g_tau * rx).sin() / rx });
    }
    (c, cp, s)
}

/// Kraus operators of the micromaser collision map with excited-atom probability `p`.
pub fn micromaser_kraus(g_tau: f64, p: f64, d: usize) -> Vec<Mat> {
    let (c, cp, s) = micromaser_operators(g_tau, d);
    let a = ops::annihilation(d);
    let (q, pp) = ((1.0 - p).sqrt(), p.sqrt());
    vec![&cp * cr(q), &s * &a * cr(q), &c * cr(pp), a.adjoint() * &s * cr(pp)]
}

/// One micromaser collision applied to the cavity state.
pub fn micromaser_map(rho: &Mat, g_tau: f64, p: f64) -> Result<Mat> {
    let d = rho.nrows();
    if d < 3 {
        return Err(MasterEqError::Truncation(format!("cavity truncation {d} < 3")));
    }
    let top = rho[(d - 1, d - 1)].re;
    if top > TAIL_MASS_TOL {
        return Err(MasterEqError::Truncation(format!("population {top:.3e} on the top Fock level")));
    }
    let mut out = Mat::zeros(d, d);
    for k in micromaser_kraus(g_tau, p, d) {
        out += &k * rho * k.adjoint();
    }
    Ok(out)
}

/// `(1−p)Γ D[a] + pΓ D[a†]` with `Γ = g²τ²/Δt`.
pub fn micromaser_generator(g: f64, tau: f64, dt: f64, p: f64, d: usize) -> LindbladGenerator {
    let gamma = g * g * tau * tau / dt;
    let a = ops::annihilation(d);
    LindbladGenerator {
        hamiltonian: Mat::zeros(d, d),
        jumps: vec![((1.0 - p) * gamma, a.clone()), (p * gamma, a.adjoint())],
    }
}

/// Cascaded generator on `S₁ ⊗ S₂`.
///
/// `m.terms[ν].a` holds `A_{1ν}` and `a2[ν]` holds `A_{2ν}`, both embedded on
/// `S₁ ⊗ S₂`; each sub-collision lasts `Δt/2`, so couplings enter as `g/2`.
pub fn cascaded_generator(m: &MomentData, a2: &[Mat], dt: f64) -> Result<LindbladGenerator> {
    if a2.len() != m.terms.len() {
        return Err(MasterEqError::DimensionMismatch(format!("{} A₂ operators for {} terms", a2.len(), m.terms.len())));
    }
    let d = m.system_dim();
    if a2.iter().any(|a| a.nrows() != d) {
        return Err(MasterEqError::DimensionMismatch("A₂ operators must act on S₁ ⊗ S₂".into()));
    }
    let collective: Vec<CouplingTerm> = m
        .terms
        .iter()
        .zip(a2)
        .map(|(t, a)| CouplingTerm::new(t.g / 2.0, &t.a + a, t.b.clone()))
        .collect();
    let k = collective.len();
    let mut h1 = Mat::zeros(d, d);
    for (t, b) in collective.iter().zip(&m.first) {
        h1 += &t.a * (t.g * b);
    }
    let mut h2 = Mat::zeros(d, d);
    for nu in 0..k {
        for mu in 0..k {
            let comm = m.second[(nu, mu)] - m.second[(mu, nu)];
            if comm == C64::new(0.0, 0.0) {
                continue;
            }
            let w = C64::new(0.0, dt / 2.0) * collective[nu].g * collective[mu].g * comm;
            h2 += &a2[mu] * &m.terms[nu].a * w;
        }
    }
    let coeff = Mat::from_fn(k, k, |nu, mu| collective[nu].g * collective[mu].g * dt * m.second[(mu, nu)]);
    let jumps = jumps_from_kossakowski(&kossakowski(&collective, &coeff), d)?;
    let h = h1 + h2;
    let h = (&h + h.adjoint()) * cr(0.5);
    LindbladGenerator::new(h, jumps)
}
