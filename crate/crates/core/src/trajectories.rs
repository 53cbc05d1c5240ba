//! Quantum trajectories: conditional Kraus operators from ancilla measurements,
//! jump Monte Carlo, the stochastic Schrödinger equation and ensemble averages.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::collision::{CollisionError, CollisionModelSpec};
use crate::linalg::{self, cr, LinalgError, Mat, Vector, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("basis incomplete: {0}")]
    BasisIncomplete(String),
    #[error("state annihilated")]
    StateAnnihilated,
    #[error("weak-measurement guard violated: dt·⟨L†L⟩ = {0:.3e} > {WEAK_MEASUREMENT_GUARD}")]
    WeakMeasurement(f64),
    #[error("ancilla must be pure for unraveling")]
    MixedAncilla,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, TrajectoryError>;

pub const COMPLETENESS_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-10;
pub const WEAK_MEASUREMENT_GUARD: f64 = 0.1;
/// Probabilities below this are treated as zero.
const ANNIHILATED: f64 = 1e-300;

/// Orthonormal ancilla basis. Outcome `k` refers to `vectors[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    vectors: Vec<Vector>,
}

impl MeasurementBasis {
    pub fn new(vectors: Vec<Vector>) -> Result<Self> {
        let d = vectors.first().map_or(0, |v| v.len());
        if d == 0 || vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
            return Err(TrajectoryError::BasisIncomplete(format!("{} vectors of dimension {d}", vectors.len())));
        }
        for (i, a) in vectors.iter().enumerate() {
            for (j, b) in vectors.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                let dev = (a.dotc(b) - cr(want)).norm();
                if dev > COMPLETENESS_TOL {
                    return Err(TrajectoryError::BasisIncomplete(format!("Gram[{i},{j}] off by {dev:.3e}")));
                }
            }
        }
        Ok(Self { vectors })
    }

    /// Fock/computational basis in index order.
    pub fn computational(d: usize) -> Self {
        Self { vectors: (0..d).map(|k| linalg::ops::ket(d, k)).collect() }
    }

    /// Qubit basis `{|0⟩, |1⟩}` so that outcome 1 is the jump.
    pub fn qubit_jump() -> Self {
        Self { vectors: vec![linalg::ops::ground(), linalg::ops::excited()] }
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// `K_k = ⟨k|U|χ⟩`, an operator on the system.
pub fn conditional_kraus(u: &Mat, chi: &Vector, basis: &MeasurementBasis) -> Result<Vec<Mat>> {
    let da = basis.dim();
    if chi.len() != da || u.nrows() % da != 0 {
        return Err(TrajectoryError::DimensionMismatch(format!("ancilla dimension {da}")));
    }
    if (chi.norm() - 1.0).abs() > NORM_TOL {
        return Err(TrajectoryError::DimensionMismatch("ancilla vector not normalized".into()));
    }
    let ds = u.nrows() / da;
    // U|χ⟩ as a (d_s·d_a) × d_s block
    let mut u_chi = Mat::zeros(ds * da, ds);
    for b in 0..ds {
        for r in 0..ds * da {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..da {
                acc += u[(r, b * da + j)] * chi[j];
            }
            u_chi[(r, b)] = acc;
        }
    }
    let ks: Vec<Mat> = basis
        .vectors
        .iter()
        .map(|k| {
            Mat::from_fn(ds, ds, |a, b| {
                (0..da).fold(C64::new(0.0, 0.0), |acc, i| acc + k[i].conj() * u_chi[(a * da + i, b)])
            })
        })
        .collect();
    check_completeness(&ks)?;
    Ok(ks)
}

pub fn check_completeness(ks: &[Mat]) -> Result<()> {
    let d = ks.first().map_or(0, |k| k.ncols());
    let sum = ks.iter().fold(Mat::zeros(d, d), |acc, k| acc + k.adjoint() * k);
    let dev = linalg::max_abs_diff(&sum, &linalg::identity(d));
    if dev > COMPLETENESS_TOL {
        return Err(TrajectoryError::BasisIncomplete(format!("Σ K†K deviates from I by {dev:.3e}")));
    }
    Ok(())
}

/// Index selected by inverse CDF; ties go to the lower index.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if target <= acc {
            return k;
        }
    }
    last
}

/// Uniform variate keyed by `(seed, trajectory, step)`.
pub fn keyed_uniform(seed: u64, trajectory: u64, step: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng.set_word_pos(u128::from(step) * 16);
    rng.random::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmOutcome<S> {
    pub outcome: usize,
    pub state: S,
    pub probability: f64,
}

pub fn outcome_probabilities(psi: &Vector, kraus: &[Mat]) -> Vec<f64> {
    kraus.iter().map(|k| (k * psi).norm_squared()).collect()
}

/// Measures a pure state given a uniform variate `u ∈ [0, 1)`.
pub fn povm_step(psi: &Vector, kraus: &[Mat], u: f64) -> Result<PovmOutcome<Vector>> {
    let probs = outcome_probabilities(psi, kraus);
    let total: f64 = probs.iter().sum();
    if total < ANNIHILATED {
        return Err(TrajectoryError::StateAnnihilated);
    }
    let k = sample_index(&probs, u);
    let post = &kraus[k] * psi;
    let norm = post.norm();
    Ok(PovmOutcome { outcome: k, state: post / cr(norm), probability: probs[k] / total })
}

pub fn povm_step_rng<R: Rng + ?Sized>(psi: &Vector, kraus: &[Mat], rng: &mut R) -> Result<PovmOutcome<Vector>> {
    povm_step(psi, kraus, rng.random::<f64>())
}

/// Measures a density matrix; the post-state is `K_k ρ K_k† / p_k`.
pub fn povm_step_density(rho: &Mat, kraus: &[Mat], u: f64) -> Result<PovmOutcome<Mat>> {
    let branches: Vec<Mat> = kraus.iter().map(|k| k * rho * k.adjoint()).collect();
    let probs: Vec<f64> = branches.iter().map(|b| b.trace().re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total < ANNIHILATED {
        return Err(TrajectoryError::StateAnnihilated);
    }
    let k = sample_index(&probs, u);
    let state = &branches[k] / cr(probs[k]);
    Ok(PovmOutcome { outcome: k, state: (&state + state.adjoint()) * cr(0.5), probability: probs[k] / total })
}

/// One sampled history of conditional states.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    /// Outcome of each step; for jump unravelings, 0 is "no jump".
    pub outcomes: Vec<usize>,
    /// `states[0]` is the initial state, `states[n]` the state after step `n`.
    pub states: Vec<Vector>,
    pub jumps: Vec<usize>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Keeps every `stride`-th state (steps `0, stride, 2·stride, ...`).
    pub fn subsample(mut self, stride: usize) -> Self {
        let stride = stride.max(1);
        self.states = self.states.into_iter().step_by(stride).collect();
        self
    }

    /// `|⟨φ|ψ_n⟩|²` along the record.
    pub fn overlaps(&self, phi: &Vector) -> Vec<f64> {
        self.states.iter().map(|s| phi.dotc(s).norm_sqr()).collect()
    }
}

/// Pure-state vector of an ancilla density matrix.
pub fn pure_ancilla_vector(eta: &Mat) -> Result<Vector> {
    let (vals, vecs) = linalg::eigh(eta)?;
    let (k, &top) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(TrajectoryError::MixedAncilla)?;
    if (top - 1.0).abs() > NORM_TOL {
        return Err(TrajectoryError::MixedAncilla);
    }
    Ok(vecs.column(k).into_owned())
}

/// Monte Carlo unraveling of a collision model measured in `basis` after every collision.
pub fn simulate_trajectory(
    spec: &CollisionModelSpec,
    psi0: &Vector,
    basis: &MeasurementBasis,
    seed: u64,
    index: u64,
    n: usize,
) -> Result<TrajectoryRecord> {
    spec.validate()?;
    let homogeneous = spec.is_homogeneous();
    let mut cached: Option<Vec<Mat>> = None;
    let mut psi = psi0 / cr(psi0.norm());
    let mut rec = TrajectoryRecord { seed, index, outcomes: Vec::with_capacity(n), states: vec![psi.clone()], jumps: Vec::new() };
    for step in 1..=n {
        let ks = match (&cached, homogeneous) {
            (Some(ks), true) => ks.clone(),
            _ => {
                let chi = pure_ancilla_vector(spec.ancilla.at(step).matrix())?;
                let ks = conditional_kraus(&spec.unitary(step)?, &chi, basis)?;
                if homogeneous {
                    cached = Some(ks.clone());
                }
                ks
            }
        };
        let out = povm_step(&psi, &ks, keyed_uniform(seed, index, step as u64))?;
        if out.outcome != 0 {
            rec.jumps.push(step);
        }
        rec.outcomes.push(out.outcome);
        psi = out.state;
        rec.states.push(psi.clone());
    }
    Ok(rec)
}

/// Continuous-measurement scheme with a single jump operator.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpScheme {
    pub jump: Mat,
    pub hamiltonian: Option<Mat>,
    pub dt: f64,
}

impl JumpScheme {
    pub fn new(jump: Mat, hamiltonian: Option<Mat>, dt: f64) -> Result<Self> {
        if let Some(h) = &hamiltonian {
            linalg::ensure_hermitian(h)?;
            if h.nrows() != jump.nrows() {
                return Err(TrajectoryError::DimensionMismatch("Hamiltonian vs jump operator".into()));
            }
        }
        if !(dt > 0.0) {
            return Err(TrajectoryError::DimensionMismatch("dt must be > 0".into()));
        }
        Ok(Self { jump, hamiltonian, dt })
    }

    /// `⟨L†L⟩dt`, the jump probability of one step.
    pub fn jump_probability(&self, psi: &Vector) -> f64 {
        (&self.jump * psi).norm_squared() * self.dt
    }

    fn guard(&self, psi: &Vector) -> Result<f64> {
        let p = self.jump_probability(psi);
        if p > WEAK_MEASUREMENT_GUARD {
            return Err(TrajectoryError::WeakMeasurement(p));
        }
        Ok(p)
    }

    fn drift(&self, psi: &Vector) -> Vector {
        let ldl = self.jump.adjoint() * &self.jump;
        let mut d = &ldl * psi * cr(-0.5 * self.dt);
        if let Some(h) = &self.hamiltonian {
            d += h * psi * C64::new(0.0, -self.dt);
        }
        d
    }
}

/// One normalized SSE step. Returns the new state and whether a jump occurred.
pub fn sse_step(psi: &Vector, scheme: &JumpScheme, u: f64) -> Result<(Vector, bool)> {
    let p = scheme.guard(psi)?;
    if u < p {
        let lpsi = &scheme.jump * psi;
        let n = lpsi.norm();
        return Ok((lpsi / cr(n), true));
    }
    let next = psi + scheme.drift(psi);
    let n = next.norm();
    if n < ANNIHILATED {
        return Err(TrajectoryError::StateAnnihilated);
    }
    Ok((next / cr(n), false))
}

/// Increment of the differential SSE for a given `dN ∈ {0, 1}`:
/// `dψ = [−iH − ½(L†L − ⟨L†L⟩)]ψ dt + (L/√⟨L†L⟩ − 1)ψ dN`.
pub fn sse_increment(psi: &Vector, scheme: &JumpScheme, dn: u8) -> Vector {
    let mean = (&scheme.jump * psi).norm_squared();
    let mut d = scheme.drift(psi) + psi * cr(0.5 * mean * scheme.dt);
    if dn == 1 && mean > 0.0 {
        d += &scheme.jump * psi / cr(mean.sqrt()) - psi;
    }
    d
}

pub fn sse_trajectory(scheme: &JumpScheme, psi0: &Vector, seed: u64, index: u64, n: usize) -> Result<TrajectoryRecord> {
    let mut psi = psi0 / cr(psi0.norm());
    let mut rec = TrajectoryRecord { seed, index, outcomes: Vec::with_capacity(n), states: vec![psi.clone()], jumps: Vec::new() };
    for step in 1..=n {
        let (next, jumped) = sse_step(&psi, scheme, keyed_uniform(seed, index, step as u64))?;
        if jumped {
            rec.jumps.push(step);
        }
        rec.outcomes.push(usize::from(jumped));
        psi = next;
        rec.states.push(psi.clone());
    }
    Ok(rec)
}

/// Runs `n_traj` trajectories in parallel; results are in index order.
pub fn run_ensemble<F>(n_traj: usize, f: F) -> Result<Vec<TrajectoryRecord>>
where
    F: Fn(u64) -> Result<TrajectoryRecord> + Sync,
{
    (0..n_traj as u64).into_par_iter().map(&f).collect()
}

/// Sample mean of `|ψ_n⟩⟨ψ_n|` with element-wise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverage {
    pub mean: Vec<Mat>,
    pub std_error: Vec<DMatrix<f64>>,
    pub count: usize,
}

pub fn ensemble_average(records: &[TrajectoryRecord]) -> Result<EnsembleAverage> {
    if records.len() < 2 {
        return Err(TrajectoryError::GridMismatch(format!("need ≥ 2 trajectories, got {}", records.len())));
    }
    let steps = records[0].states.len();
    let d = records[0].states[0].len();
    if let Some(r) = records.iter().find(|r| r.states.len() != steps || r.states[0].len() != d) {
        return Err(TrajectoryError::GridMismatch(format!(
            "trajectory {} has {} samples, expected {steps}",
            r.index,
            r.states.len()
        )));
    }
    let n = records.len() as f64;
    let mut mean = Vec::with_capacity(steps);
    let mut std_error = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut sum = Mat::zeros(d, d);
        let mut sq = DMatrix::<f64>::zeros(d, d);
        for r in records {
            let p = linalg::projector(&r.states[t]);
            for (s, x) in sq.iter_mut().zip(p.iter()) {
                *s += x.norm_sqr();
            }
            sum += p;
        }
        let m = sum / cr(n);
        let var = DMatrix::from_fn(d, d, |i, j| ((sq[(i, j)] / n - m[(i, j)].norm_sqr()) * n / (n - 1.0)).max(0.0));
        std_error.push(var.map(|v| (v / n).sqrt()));
        mean.push(m);
    }
    Ok(EnsembleAverage { mean, std_error, count: records.len() })
}

/// One measured history with its exact probability and normalized conditional state.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub state: Mat,
}

/// All `K^n` outcome histories of `n` repeated measurements.
pub fn enumerate_histories(kraus: &[Mat], rho0: &Mat, n: usize) -> Vec<History> {
    let mut layer = vec![History { outcomes: Vec::new(), probability: 1.0, state: rho0.clone() }];
    for _ in 0..n {
        let mut next = Vec::with_capacity(layer.len() * kraus.len());
        for h in &layer {
            for (k, op) in kraus.iter().enumerate() {
                let branch = op * &h.state * op.adjoint();
                let p = branch.trace().re;
                let mut outcomes = h.outcomes.clone();
                outcomes.push(k);
                let state = if p > 0.0 { branch / cr(p) } else { Mat::zeros(rho0.nrows(), rho0.ncols()) };
                next.push(History { outcomes, probability: h.probability * p.max(0.0), state });
            }
        }
        layer = next;
    }
    layer
}

/// `Σ_histories p · ρ_cond`.
pub fn history_average(histories: &[History]) -> Mat {
    let d = histories.first().map_or(0, |h| h.state.nrows());
    histories.iter().fold(Mat::zeros(d, d), |acc, h| acc + &h.state * cr(h.probability))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::all_qubit_coupling;
    use crate::linalg::ops::*;

    fn all_qubit_unitary(g_dt: f64) -> Mat {
        linalg::expm_unitary(&all_qubit_coupling(g_dt, 0.0), 1.0).unwrap()
    }

    #[test]
    fn identity_unitary_has_no_backaction() {
        let chi = plus();
        let ks = conditional_kraus(&linalg::identity(4), &chi, &MeasurementBasis::qubit_jump()).unwrap();
        for (k, op) in ks.iter().enumerate() {
            let amp = MeasurementBasis::qubit_jump().vectors()[k].dotc(&chi);
            assert!(linalg::max_abs_diff(op, &(linalg::identity(2) * amp)) < 1e-15);
        }
    }

    #[test]
    fn vacuum_kraus_closed_form() {
        let gdt = 0.3_f64;
        let ks = conditional_kraus(&all_qubit_unitary(gdt), &ground(), &MeasurementBasis::qubit_jump()).unwrap();
        let k0 = linalg::projector(&excited()) * cr(gdt.cos()) + linalg::projector(&ground());
        let k1 = sigma_minus() * C64::new(0.0, -gdt.sin());
        assert!(linalg::max_abs_diff(&ks[0], &k0) < 1e-14);
        assert!(linalg::max_abs_diff(&ks[1], &k1) < 1e-14);
    }

    #[test]
    fn jump_collapses_to_ground() {
        let ks = conditional_kraus(&all_qubit_unitary(0.2), &ground(), &MeasurementBasis::qubit_jump()).unwrap();
        let out = povm_step(&plus(), &ks, 0.999_999).unwrap();
        assert_eq!(out.outcome, 1);
        assert!((out.state[GROUND].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_cdf_ties_go_low() {
        assert_eq!(sample_index(&[0.5, 0.5], 0.5), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.5 + 1e-12), 1);
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(sample_index(&[0.3, 0.7], 0.999_999_999), 1);
    }

    #[test]
    fn keyed_stream_is_order_independent() {
        let a = keyed_uniform(7, 3, 11);
        let _ = keyed_uniform(7, 2, 11);
        assert_eq!(a, keyed_uniform(7, 3, 11));
        assert_ne!(a, keyed_uniform(7, 3, 12));
        assert_ne!(a, keyed_uniform(7, 4, 11));
    }

    #[test]
    fn sse_no_jump_on_dark_state() {
        let scheme = JumpScheme::new(sigma_minus(), None, 0.01).unwrap();
        let (next, jumped) = sse_step(&ground(), &scheme, 0.0).unwrap();
        assert!(!jumped);
        assert_eq!(next, ground());
    }

    #[test]
    fn sse_guard() {
        let scheme = JumpScheme::new(sigma_minus() * cr(10.0), None, 0.01).unwrap();
        assert!(matches!(sse_step(&excited(), &scheme, 0.5), Err(TrajectoryError::WeakMeasurement(_))));
    }

    #[test]
    fn nonorthonormal_basis_rejected() {
        assert!(MeasurementBasis::new(vec![ground(), plus()]).is_err());
    }
}
