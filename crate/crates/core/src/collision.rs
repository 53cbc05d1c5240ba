//! The collision engine.
//!
//! A step `n` (counting from 1) prepares a fresh ancilla `η_n`, applies
//! `U_n = exp(-i(H_S + H_n + V_n)Δt)` to `ρ_{n-1} ⊗ η_n` and traces the ancilla out.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{
    self, apply_left, apply_right, cr, embed, expm_unitary, identity, kron, LinalgError, Mat, TensorSpace, Vector,
    C64,
};
use crate::states::{DensityMatrix, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollisionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid collision model: {0}")]
    InvalidSpec(String),
    #[error("MPS track requires pure states")]
    NotPure,
}

pub type Result<T> = std::result::Result<T, CollisionError>;

/// A value that is either constant or a function of the step index.
pub enum Source<T> {
    Fixed(T),
    PerStep(Arc<dyn Fn(usize) -> T + Send + Sync>),
}

impl<T: Clone> Source<T> {
    pub fn per_step(f: impl Fn(usize) -> T + Send + Sync + 'static) -> Self {
        Source::PerStep(Arc::new(f))
    }

    pub fn at(&self, n: usize) -> T {
        match self {
            Source::Fixed(v) => v.clone(),
            Source::PerStep(f) => f(n),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Source::Fixed(_))
    }
}

impl<T: Clone> Clone for Source<T> {
    fn clone(&self) -> Self {
        match self {
            Source::Fixed(v) => Source::Fixed(v.clone()),
            Source::PerStep(f) => Source::PerStep(Arc::clone(f)),
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            Source::PerStep(_) => f.write_str("PerStep(..)"),
        }
    }
}

impl<T> From<T> for Source<T> {
    fn from(v: T) -> Self {
        Source::Fixed(v)
    }
}

#[derive(Debug, Clone)]
pub enum Variant {
    /// One ancilla per step colliding with the whole system.
    Basic,
    /// System `S₁ ⊗ S₂`. Each ancilla collides with `S₁` through the main
    /// coupling and then with `S₂` through `second`; both couplings are
    /// given on (subsystem, ancilla) and each sub-collision lasts `Δt/2`.
    Cascaded { subsystem_dims: [usize; 2], second: Source<Mat> },
    /// Ancilla register made of several baths collided simultaneously.
    /// The coupling and ancilla state live on `S ⊗ B₁ ⊗ B₂ ⊗ ...`.
    MultiBath { bath_dims: Vec<usize> },
}

/// Declarative description of a collision model.
#[derive(Debug, Clone)]
pub struct CollisionModelSpec {
    pub h_s: Source<Mat>,
    pub h_anc: Source<Mat>,
    pub coupling: Source<Mat>,
    pub ancilla: Source<DensityMatrix>,
    pub dt: f64,
    pub variant: Variant,
}

impl CollisionModelSpec {
    pub fn basic(h_s: Mat, h_anc: Mat, coupling: Mat, ancilla: DensityMatrix, dt: f64) -> Self {
        Self {
            h_s: h_s.into(),
            h_anc: h_anc.into(),
            coupling: coupling.into(),
            ancilla: ancilla.into(),
            dt,
            variant: Variant::Basic,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        let variant_fixed = match &self.variant {
            Variant::Cascaded { second, .. } => second.is_fixed(),
            _ => true,
        };
        self.h_s.is_fixed() && self.h_anc.is_fixed() && self.coupling.is_fixed() && self.ancilla.is_fixed() && variant_fixed
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CollisionError::InvalidSpec(format!("Δt = {} must be > 0", self.dt)));
        }
        Ok(())
    }

    /// System, ancilla dimensions at step `n`.
    pub fn dims(&self, n: usize) -> (usize, usize) {
        (self.h_s.at(n).nrows(), self.ancilla.at(n).dim())
    }

    /// Joint Hamiltonian `H_S ⊗ I + I ⊗ H_n + V_n` (basic and multi-bath variants).
    pub fn joint_hamiltonian(&self, n: usize) -> Result<Mat> {
        joint_hamiltonian(&self.h_s.at(n), &self.h_anc.at(n), &self.coupling.at(n))
    }

    /// Collision unitary on `S ⊗ ancilla` for step `n`.
    pub fn unitary(&self, n: usize) -> Result<Mat> {
        self.validate()?;
        match &self.variant {
            Variant::Basic | Variant::MultiBath { .. } => {
                build_unitary(&self.h_s.at(n), &self.h_anc.at(n), &self.coupling.at(n), self.dt)
            }
            Variant::Cascaded { subsystem_dims, second } => {
                let (u1, u2) = cascaded_unitaries(
                    &self.h_s.at(n),
                    &self.h_anc.at(n),
                    &self.coupling.at(n),
                    &second.at(n),
                    *subsystem_dims,
                    self.dt,
                )?;
                Ok(u2 * u1)
            }
        }
    }

    /// Ancilla labels used for the joint state.
    pub fn ancilla_labels(&self) -> Vec<String> {
        match &self.variant {
            Variant::MultiBath { bath_dims } => (1..=bath_dims.len()).map(|k| format!("B{k}")).collect(),
            _ => vec!["A".to_string()],
        }
    }
}

pub fn joint_hamiltonian(h_s: &Mat, h_n: &Mat, v: &Mat) -> Result<Mat> {
    let (ds, da) = (h_s.nrows(), h_n.nrows());
    if v.nrows() != ds * da || v.ncols() != ds * da {
        return Err(CollisionError::DimensionMismatch(format!(
            "coupling is {}x{}, joint space has dimension {}",
            v.nrows(),
            v.ncols(),
            ds * da
        )));
    }
    Ok(kron(h_s, &identity(da))? + kron(&identity(ds), h_n)? + v)
}

/// `exp(-i(H_S + H_n + V_n)Δt)`.
pub fn build_unitary(h_s: &Mat, h_n: &Mat, v: &Mat, dt: f64) -> Result<Mat> {
    Ok(expm_unitary(&joint_hamiltonian(h_s, h_n, v)?, dt)?)
}

/// Sub-collision unitaries `U₁`, `U₂` on `S₁ ⊗ S₂ ⊗ n`, each of duration `Δt/2`.
pub fn cascaded_unitaries(
    h_s: &Mat,
    h_n: &Mat,
    v1: &Mat,
    v2: &Mat,
    subsystem_dims: [usize; 2],
    dt: f64,
) -> Result<(Mat, Mat)> {
    let [d1, d2] = subsystem_dims;
    let da = h_n.nrows();
    if h_s.nrows() != d1 * d2 {
        return Err(CollisionError::DimensionMismatch(format!(
            "cascaded system Hamiltonian has dimension {}, expected {}",
            h_s.nrows(),
            d1 * d2
        )));
    }
    let dims = [d1, d2, da];
    let free = embed(h_s, &dims, &[0, 1])? + embed(h_n, &dims, &[2])?;
    let h1 = &free + embed(v1, &dims, &[0, 2])?;
    let h2 = &free + embed(v2, &dims, &[1, 2])?;
    Ok((expm_unitary(&h1, dt / 2.0)?, expm_unitary(&h2, dt / 2.0)?))
}

/// Result of one collision.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub index: usize,
    pub rho_prev: DensityMatrix,
    pub rho: DensityMatrix,
    pub eta_in: DensityMatrix,
    pub eta_out: DensityMatrix,
    /// Post-collision joint state `U(ρ ⊗ η)U†` when retained.
    pub joint: Option<DensityMatrix>,
}

/// One collision: `ϱ = U(ρ ⊗ η)U†` and its two marginals.
pub fn collide(rho: &DensityMatrix, eta: &DensityMatrix, u: &Mat) -> Result<StepRecord> {
    let space = rho.space().join(eta.space())?;
    let d = space.dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(CollisionError::DimensionMismatch(format!("unitary is {}x{}, joint dimension {d}", u.nrows(), u.ncols())));
    }
    let prod = kron(rho.matrix(), eta.matrix())?;
    let joint = u * prod * u.adjoint();
    let joint = hermitize(joint);
    marginals(rho, eta, joint, space)
}

fn hermitize(m: Mat) -> Mat {
    (&m + m.adjoint()) * cr(0.5)
}

fn marginals(rho: &DensityMatrix, eta: &DensityMatrix, joint: Mat, space: TensorSpace) -> Result<StepRecord> {
    let ns = rho.space().len();
    let sys: Vec<usize> = (0..ns).collect();
    let anc: Vec<usize> = (ns..space.len()).collect();
    let r = linalg::partial_trace_idx(&joint, space.dims(), &sys)?;
    let e = linalg::partial_trace_idx(&joint, space.dims(), &anc)?;
    Ok(StepRecord {
        index: 0,
        rho_prev: rho.clone(),
        rho: DensityMatrix::new(r, rho.space().clone())?,
        eta_in: eta.clone(),
        eta_out: DensityMatrix::new(e, eta.space().clone())?,
        joint: Some(DensityMatrix::new(joint, space)?),
    })
}

/// Cascaded collision with sub-collision unitaries already embedded on `S₁ ⊗ S₂ ⊗ n`.
pub fn cascaded_step(rho: &DensityMatrix, eta: &DensityMatrix, u1: &Mat, u2: &Mat) -> Result<StepRecord> {
    collide(rho, eta, &(u2 * u1))
}

fn system_with_labels(spec: &CollisionModelSpec, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    let rho = match &spec.variant {
        Variant::Cascaded { subsystem_dims, .. } if rho0.space().len() == 1 => {
            let space = TensorSpace::new(subsystem_dims.to_vec(), vec!["S1", "S2"])?;
            DensityMatrix::new(rho0.matrix().clone(), space)?
        }
        _ => rho0.clone(),
    };
    Ok(rho)
}

fn ancilla_with_labels(spec: &CollisionModelSpec, n: usize) -> Result<DensityMatrix> {
    let eta = spec.ancilla.at(n);
    match &spec.variant {
        Variant::MultiBath { bath_dims } => {
            if bath_dims.iter().product::<usize>() != eta.dim() {
                return Err(CollisionError::DimensionMismatch(format!(
                    "bath dimensions {bath_dims:?} do not match ancilla dimension {}",
                    eta.dim()
                )));
            }
            let labels = spec.ancilla_labels();
            let space = TensorSpace::new(bath_dims.clone(), labels)?;
            Ok(DensityMatrix::new(eta.into_matrix(), space)?)
        }
        _ => Ok(eta),
    }
}

/// Runs `n_steps` collisions, retaining the joint state of each.
pub fn run(spec: &CollisionModelSpec, rho0: &DensityMatrix, n_steps: usize) -> Result<Vec<StepRecord>> {
    run_with(spec, rho0, n_steps, true)
}

pub fn run_with(spec: &CollisionModelSpec, rho0: &DensityMatrix, n_steps: usize, retain_joint: bool) -> Result<Vec<StepRecord>> {
    spec.validate()?;
    let mut rho = system_with_labels(spec, rho0)?;
    let mut out = Vec::with_capacity(n_steps);
    let mut cached: Option<Mat> = None;
    for n in 1..=n_steps {
        let u = match (&cached, spec.is_homogeneous()) {
            (Some(u), true) => u.clone(),
            _ => {
                let u = spec.unitary(n)?;
                if spec.is_homogeneous() {
                    cached = Some(u.clone());
                }
                u
            }
        };
        let eta = ancilla_with_labels(spec, n)?;
        let mut rec = collide(&rho, &eta, &u)?;
        rec.index = n;
        if !retain_joint {
            rec.joint = None;
        }
        rho = rec.rho.clone();
        out.push(rec);
    }
    Ok(out)
}

/// System states `ρ₀, ρ₁, ..., ρ_n` through the Kraus form of each collision.
pub fn run_states(spec: &CollisionModelSpec, rho0: &Mat, n_steps: usize) -> Result<Vec<Mat>> {
    spec.validate()?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(rho0.clone());
    let mut kraus: Option<Vec<Mat>> = None;
    let mut rho = rho0.clone();
    for n in 1..=n_steps {
        let ks = match (&kraus, spec.is_homogeneous()) {
            (Some(k), true) => k.clone(),
            _ => {
                let k = kraus_operators(&spec.unitary(n)?, spec.ancilla.at(n).matrix(), rho0.nrows())?;
                if spec.is_homogeneous() {
                    kraus = Some(k.clone());
                }
                k
            }
        };
        rho = apply_kraus(&ks, &rho);
        states.push(rho.clone());
    }
    Ok(states)
}

/// Kraus operators `K_jk = √p_k ⟨j|U|v_k⟩` of `ρ ↦ Tr_n{U(ρ⊗η)U†}` with `η = Σ p_k |v_k⟩⟨v_k|`.
pub fn kraus_operators(u: &Mat, eta: &Mat, d_s: usize) -> Result<Vec<Mat>> {
    let da = eta.nrows();
    if u.nrows() != d_s * da {
        return Err(CollisionError::DimensionMismatch(format!(
            "unitary dimension {} ≠ {d_s}·{da}",
            u.nrows()
        )));
    }
    let (vals, vecs) = linalg::eigh(eta)?;
    let mut out = Vec::new();
    for (k, &p) in vals.iter().enumerate() {
        if p <= 1e-18 {
            continue;
        }
        let v = vecs.column(k);
        let sp = p.sqrt();
        for j in 0..da {
            let mut kj = Mat::zeros(d_s, d_s);
            for a in 0..d_s {
                for b in 0..d_s {
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..da {
                        acc += u[(a * da + j, b * da + m)] * v[m];
                    }
                    kj[(a, b)] = acc * sp;
                }
            }
            out.push(kj);
        }
    }
    Ok(out)
}

pub fn apply_kraus(kraus: &[Mat], rho: &Mat) -> Mat {
    let mut out = Mat::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    hermitize(out)
}

/// Column-stacked superoperator `Σ_k conj(K_k) ⊗ K_k`.
pub fn kraus_superop(kraus: &[Mat]) -> Mat {
    let d = kraus.first().map_or(0, |k| k.nrows());
    let mut s = Mat::zeros(d * d, d * d);
    for k in kraus {
        s += linalg::sandwich_superop(k, &k.adjoint());
    }
    s
}

/// Superoperator of the step-`n` collision map on the system.
pub fn collision_superop(spec: &CollisionModelSpec, n: usize) -> Result<Mat> {
    let u = spec.unitary(n)?;
    let eta = spec.ancilla.at(n);
    let d_s = u.nrows() / eta.dim();
    Ok(kraus_superop(&kraus_operators(&u, eta.matrix(), d_s)?))
}

/// Fixed point of a homogeneous map by repeated squaring of its superoperator.
///
/// Returns the state `S^{2^k} ρ₀` once two successive iterates differ by
/// less than `tol` in max-abs norm, with the number of squarings used.
/// Iterates are renormalized to unit trace: rounding moves the unit
/// eigenvalue off 1 and repeated squaring would otherwise amplify it.
pub fn steady_by_squaring(superop: &Mat, rho0: &Mat, tol: f64, max_squarings: usize) -> Option<(Mat, usize)> {
    let normalized = |m: Mat| {
        let tr = m.trace();
        if tr.norm() > 0.0 { m / tr } else { m }
    };
    let mut s = superop.clone();
    let mut prev = normalized(linalg::apply_superop(&s, rho0));
    for k in 1..=max_squarings {
        s = &s * &s;
        let next = normalized(linalg::apply_superop(&s, rho0));
        if linalg::max_abs_diff(&next, &prev) < tol {
            return Some((hermitize(next), k));
        }
        prev = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub enum Steady {
    Fixed(Mat),
    Oscillating { period: usize },
    NotConverged,
}

/// Empirical steady-state detection on a sequence of states.
///
/// Reports a fixed point when the last `window` consecutive trace distances
/// are below `tol` and `map` leaves the last state invariant within `tol`;
/// otherwise looks for the smallest period `2..=window` repeating over the
/// last `window` states.
pub fn detect_steady(states: &[Mat], window: usize, tol: f64, map: &dyn Fn(&Mat) -> Mat) -> Result<Steady> {
    let n = states.len();
    if window == 0 || n < window + 1 {
        return Ok(Steady::NotConverged);
    }
    let td = |a: &Mat, b: &Mat| linalg::trace_distance(a, b);
    let mut settled = true;
    for k in (n - window)..n {
        if td(&states[k], &states[k - 1])? >= tol {
            settled = false;
            break;
        }
    }
    let last = &states[n - 1];
    if settled && td(&map(last), last)? < tol {
        return Ok(Steady::Fixed(last.clone()));
    }
    for period in 2..=window {
        if n < window + period {
            break;
        }
        let mut periodic = true;
        for k in (n - window)..n {
            if td(&states[k], &states[k - period])? >= tol {
                periodic = false;
                break;
            }
        }
        if periodic {
            return Ok(Steady::Oscillating { period });
        }
    }
    Ok(Steady::NotConverged)
}

/// Pure joint system–ancillas state stored as a chain of per-collision tensors.
///
/// Tensor `k` of collision `n` is the `d_S × d_S` matrix
/// `T_n[k]_{α'α} = ⟨α', k|U_n|α, r⟩` with `r` the ancilla reference state,
/// so that the amplitude of `|α, k₁, ..., k_n⟩` is `(T_n[k_n] ⋯ T_1[k_1] ψ₀)_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureChainState {
    initial: Vector,
    d_a: usize,
    reference: usize,
    tensors: Vec<Vec<Mat>>,
}

impl PureChainState {
    pub fn new(initial: Vector, d_a: usize, reference: usize) -> Result<Self> {
        if (initial.norm() - 1.0).abs() > 1e-10 {
            return Err(CollisionError::NotPure);
        }
        if reference >= d_a {
            return Err(CollisionError::DimensionMismatch(format!("reference level {reference} ≥ {d_a}")));
        }
        Ok(Self { initial, d_a, reference, tensors: Vec::new() })
    }

    /// From density matrices; both must be pure and the ancilla a basis state.
    pub fn from_density(rho: &Mat, eta: &Mat) -> Result<Self> {
        let psi = pure_vector(rho)?;
        let reference = (0..eta.nrows())
            .find(|&k| (eta[(k, k)].re - 1.0).abs() < 1e-10)
            .ok_or(CollisionError::NotPure)?;
        let basis = linalg::projector(&linalg::ops::ket(eta.nrows(), reference));
        if linalg::max_abs_diff(&basis, eta) > 1e-10 {
            return Err(CollisionError::NotPure);
        }
        Self::new(psi, eta.nrows(), reference)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn d_s(&self) -> usize {
        self.initial.len()
    }

    pub fn tensors(&self) -> &[Vec<Mat>] {
        &self.tensors
    }

    /// The `d_S × d_A` leading tensor `(T_1[k] ψ₀)_α`.
    pub fn leading(&self) -> Option<Mat> {
        let first = self.tensors.first()?;
        let mut m = Mat::zeros(self.d_s(), self.d_a);
        for (k, t) in first.iter().enumerate() {
            m.set_column(k, &(t * &self.initial));
        }
        Some(m)
    }

    /// Full state vector on `S ⊗ A₁ ⊗ ... ⊗ A_n`.
    pub fn contract(&self) -> Result<Vector> {
        let n = self.tensors.len();
        let dim = linalg::checked_dim(&[vec![self.d_s()], vec![self.d_a; n]].concat())?;
        let mut out = Vector::zeros(dim);
        let anc_dim = dim / self.d_s();
        for idx in 0..anc_dim {
            let mut v = self.initial.clone();
            let mut rem = idx;
            let mut ks = vec![0; n];
            for j in (0..n).rev() {
                ks[j] = rem % self.d_a;
                rem /= self.d_a;
            }
            for (j, &k) in ks.iter().enumerate() {
                v = &self.tensors[j][k] * v;
            }
            for a in 0..self.d_s() {
                out[a * anc_dim + idx] = v[a];
            }
        }
        Ok(out)
    }

    /// Reduced system state, obtained without forming the joint vector.
    pub fn reduced_system(&self) -> Mat {
        let mut m = linalg::projector(&self.initial);
        for layer in &self.tensors {
            let mut next = Mat::zeros(m.nrows(), m.ncols());
            for t in layer {
                next += t * &m * t.adjoint();
            }
            m = next;
        }
        m
    }
}

fn pure_vector(rho: &Mat) -> Result<Vector> {
    let (vals, vecs) = linalg::eigh(rho)?;
    let (k, &top) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(CollisionError::NotPure)?;
    if (top - 1.0).abs() > 1e-10 {
        return Err(CollisionError::NotPure);
    }
    Ok(vecs.column(k).into_owned())
}

/// Appends the tensor of one more collision with unitary `u` on `S ⊗ A`.
pub fn mps_evolve(chain: &PureChainState, u: &Mat) -> Result<PureChainState> {
    let (ds, da) = (chain.d_s(), chain.d_a);
    if u.nrows() != ds * da || u.ncols() != ds * da {
        return Err(CollisionError::DimensionMismatch(format!("unitary is {}x{}, expected {}", u.nrows(), u.ncols(), ds * da)));
    }
    let layer: Vec<Mat> = (0..da)
        .map(|k| Mat::from_fn(ds, ds, |a2, a| u[(a2 * da + k, a * da + chain.reference)]))
        .collect();
    let mut out = chain.clone();
    out.tensors.push(layer);
    Ok(out)
}

/// `U(ρ ⊗ η)U†` for a unitary acting on a subset of a larger register.
pub fn conjugate_on(u: &Mat, rho: &Mat, dims: &[usize], targets: &[usize]) -> Result<Mat> {
    let left = apply_left(u, rho, dims, targets)?;
    Ok(apply_right(&left, &u.adjoint(), dims, targets)?)
}

/// All-qubit exchange coupling `g(σ₊⊗σ₋ + σ₋⊗σ₊) + g_z σ_z⊗σ_z`.
pub fn all_qubit_coupling(g: f64, g_z: f64) -> Mat {
    use linalg::ops::*;
    let ex = kron(&sigma_plus(), &sigma_minus()).unwrap() + kron(&sigma_minus(), &sigma_plus()).unwrap();
    ex * cr(g) + kron(&sigma_z(), &sigma_z()).unwrap() * cr(g_z)
}

/// Excitation-exchange coupling `g(A ⊗ B† + A† ⊗ B)`.
pub fn exchange_coupling(a: &Mat, b: &Mat, g: f64) -> Mat {
    (kron(a, &b.adjoint()).unwrap() + kron(&a.adjoint(), b).unwrap()) * cr(g)
}

/// Sum of per-bath free Hamiltonians and couplings on `S ⊗ B₁ ⊗ B₂ ⊗ ...`.
///
/// Each coupling is given on `S ⊗ B_k`. Returns `(H_baths, V)`.
pub fn multibath_operators(d_s: usize, baths: &[(Mat, Mat)]) -> Result<(Mat, Mat)> {
    let bath_dims: Vec<usize> = baths.iter().map(|(h, _)| h.nrows()).collect();
    let mut dims = vec![d_s];
    dims.extend_from_slice(&bath_dims);
    let db: usize = linalg::checked_dim(&bath_dims)?;
    let mut h = Mat::zeros(db, db);
    let mut v = Mat::zeros(d_s * db, d_s * db);
    for (k, (hk, vk)) in baths.iter().enumerate() {
        h += embed(hk, &bath_dims, &[k])?;
        v += embed(vk, &dims, &[0, k + 1])?;
    }
    Ok((h, v))
}

/// Product state of several baths.
pub fn product_ancilla(etas: &[&DensityMatrix]) -> Result<DensityMatrix> {
    let mut out = etas
        .first()
        .ok_or_else(|| CollisionError::InvalidSpec("no baths".into()))?
        .matrix()
        .clone();
    for e in &etas[1..] {
        out = kron(&out, e.matrix())?;
    }
    let dims: Vec<usize> = etas.iter().map(|e| e.dim()).collect();
    let labels: Vec<String> = (1..=etas.len()).map(|k| format!("B{k}")).collect();
    Ok(DensityMatrix::new(out, TensorSpace::new(dims, labels)?)?)
}
