//! Density matrices, ancilla factories and entropy functionals.
//!
//! Entropies are in nats.

use thiserror::Error;

use crate::linalg::{
    self, c, cr, eigh, hermitian_deviation, kron, ops, LinalgError, Mat, TensorSpace, Vector, C64,
};

pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as exact zeros in entropies.
pub const ZERO_EIGENVALUE: f64 = 1e-14;
/// Weight on the kernel of the reference state above which a relative entropy is infinite.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Maximum Fock-space mass allowed above level `d - 2` of a truncated oscillator.
pub const TAIL_MASS_TOL: f64 = 1e-8;
pub const DEFAULT_TRUNCATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("not a state: {0}")]
    NotAState(String),
    #[error("negative temperature not supported here")]
    NegativeTemperature,
    #[error("truncation too small: tail mass {mass:.3e} above level {level}")]
    TruncationTooSmall { mass: f64, level: usize },
    #[error("relative entropy infinite")]
    RelativeEntropyInfinite,
    #[error("invalid ancilla: {0}")]
    InvalidAncilla(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// A validated density matrix tagged with its tensor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: Mat,
    space: TensorSpace,
}

impl DensityMatrix {
    pub fn new(mat: Mat, space: TensorSpace) -> Result<Self> {
        validate(&mat, &space)?;
        Ok(Self { mat, space })
    }

    /// Wraps a matrix on a single subsystem with the given label.
    pub fn single(mat: Mat, label: &str) -> Result<Self> {
        let space = TensorSpace::single(mat.nrows(), label)?;
        Self::new(mat, space)
    }

    pub fn pure(psi: &Vector, space: TensorSpace) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(StateError::NotAState(format!("vector norm {n}")));
        }
        Self::new(linalg::projector(psi), space)
    }

    pub fn maximally_mixed(space: TensorSpace) -> Self {
        let d = space.dim();
        Self { mat: linalg::identity(d) * cr(1.0 / d as f64), space }
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat {
        self.mat
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Same matrix with new subsystem labels.
    pub fn relabel(self, labels: &[&str]) -> Result<Self> {
        let space = TensorSpace::new(self.space.dims().to_vec(), labels.to_vec())?;
        Ok(Self { mat: self.mat, space })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let space = self.space.join(&other.space)?;
        Ok(Self { mat: kron(&self.mat, &other.mat)?, space })
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let idx = keep.iter().map(|l| self.space.index_of(l)).collect::<std::result::Result<Vec<_>, _>>()?;
        let mat = linalg::partial_trace_idx(&self.mat, self.space.dims(), &idx)?;
        let space = self.space.restrict(&idx)?;
        Ok(Self { mat, space })
    }

    pub fn expect(&self, op: &Mat) -> f64 {
        linalg::expect(op, &self.mat).re
    }

    pub fn purity(&self) -> f64 {
        linalg::expect(&self.mat, &self.mat).re
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.mat).expect("validated state")
    }
}

fn validate(mat: &Mat, space: &TensorSpace) -> Result<()> {
    if mat.nrows() != mat.ncols() || mat.nrows() != space.dim() {
        return Err(StateError::NotAState(format!(
            "{}x{} matrix on a space of dimension {}",
            mat.nrows(),
            mat.ncols(),
            space.dim()
        )));
    }
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(StateError::NotAState("non-finite entry".into()));
    }
    let herm = hermitian_deviation(mat);
    if herm > linalg::HERMITIAN_TOL {
        return Err(StateError::NotAState(format!("not Hermitian ({herm:.3e})")));
    }
    let tr = mat.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(StateError::NotAState(format!("trace {tr}")));
    }
    let min = min_eigenvalue(mat)?;
    if min < -POSITIVITY_TOL {
        return Err(StateError::NotAState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

fn min_eigenvalue(mat: &Mat) -> Result<f64> {
    let vals = linalg::eigvalsh(mat)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Qubit populations and coherence in the `(|1⟩, |0⟩)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub p: f64,
    pub c: C64,
}

impl QubitParams {
    pub fn new(p: f64, c: C64) -> Self {
        Self { p, c }
    }

    pub fn from_matrix(m: &Mat) -> Self {
        Self { p: m[(0, 0)].re, c: m[(0, 1)] }
    }

    /// `(1 - 2p)² + 4|c|² ≤ 1`.
    pub fn is_physical(&self) -> bool {
        (0.0..=1.0).contains(&self.p) && (1.0 - 2.0 * self.p).powi(2) + 4.0 * self.c.norm_sqr() <= 1.0 + 1e-12
    }
}

pub fn qubit_density(q: QubitParams) -> Result<DensityMatrix> {
    if !q.is_physical() {
        return Err(StateError::NotAState(format!("qubit parameters p={}, c={} violate positivity", q.p, q.c)));
    }
    let m = Mat::from_row_slice(2, 2, &[cr(q.p), q.c, q.c.conj(), cr(1.0 - q.p)]);
    DensityMatrix::single(m, "S")
}

/// Gibbs state `e^{-βh} / Tr e^{-βh}`.
pub fn thermal_state(h: &Mat, beta: f64) -> Result<DensityMatrix> {
    if beta < 0.0 || beta.is_nan() {
        return Err(StateError::NegativeTemperature);
    }
    let (vals, vecs) = eigh(h)?;
    let emin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = vals.iter().map(|&e| (-beta * (e - emin)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut m = Mat::zeros(h.nrows(), h.nrows());
    for (k, w) in weights.iter().enumerate() {
        let v = vecs.column(k);
        m += (v * v.adjoint()) * cr(w / z);
    }
    let m = (&m + m.adjoint()) * cr(0.5);
    DensityMatrix::single(m, "S")
}

/// Thermal occupation `1/(e^{βω₀} - 1)`.
pub fn mean_occupation(beta: f64, omega0: f64) -> f64 {
    1.0 / (beta * omega0).exp_m1()
}

/// Qubit Hamiltonian `ω₀ σ₊σ₋`.
pub fn qubit_hamiltonian(omega0: f64) -> Mat {
    ops::sigma_plus() * ops::sigma_minus() * cr(omega0)
}

/// Oscillator Hamiltonian `ω₀ a†a` on `d` levels.
pub fn oscillator_hamiltonian(omega0: f64, d: usize) -> Mat {
    ops::number(d) * cr(omega0)
}

/// Untruncated Poisson tail `Σ_{n ≥ from} e^{-|a|²}|a|^{2n}/n!`.
fn poisson_tail(mean: f64, from: usize) -> f64 {
    if mean == 0.0 {
        return if from == 0 { 1.0 } else { 0.0 };
    }
    let head_terms = from;
    // sum the head in log space; tail by direct summation when the head is close to 1
    let mut log_term = -mean;
    let mut head = 0.0;
    for n in 0..head_terms {
        head += log_term.exp();
        log_term += mean.ln() - ((n + 1) as f64).ln();
    }
    let mut tail = 0.0;
    let mut n = from;
    loop {
        let t = log_term.exp();
        tail += t;
        if (n as f64) > mean && t < 1e-30 * tail.max(1e-300) {
            break;
        }
        if n > from + 100_000 {
            break;
        }
        n += 1;
        log_term += mean.ln() - (n as f64).ln();
    }
    if head > 0.5 { tail } else { 1.0 - head }
}

/// Coherent time-bin state of amplitude `α√Δt` on `d` Fock levels.
pub fn coherent_bin_state(alpha: C64, dt: f64, d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(StateError::InvalidAncilla(format!("truncation {d} < 2")));
    }
    if !(dt > 0.0) {
        return Err(StateError::InvalidAncilla(format!("time bin Δt = {dt} must be > 0")));
    }
    let a = alpha * dt.sqrt();
    let tail = poisson_tail(a.norm_sqr(), d - 1);
    if tail > TAIL_MASS_TOL {
        return Err(StateError::TruncationTooSmall { mass: tail, level: d - 2 });
    }
    let mut psi = Vector::zeros(d);
    let mut coef = cr(1.0);
    for n in 0..d {
        psi[n] = coef;
        coef = coef * a / ((n + 1) as f64).sqrt();
    }
    let norm = psi.norm();
    psi /= cr(norm);
    DensityMatrix::pure(&psi, TensorSpace::single(d, "A")?)
}

/// Truncated thermal oscillator; the weight above level `d - 2` is checked.
pub fn thermal_oscillator(beta: f64, omega0: f64, d: usize) -> Result<DensityMatrix> {
    if beta < 0.0 {
        return Err(StateError::NegativeTemperature);
    }
    if d < 2 {
        return Err(StateError::InvalidAncilla(format!("truncation {d} < 2")));
    }
    // untruncated geometric weights (1-q) q^n; tail above d-2 is q^{d-1}
    let q = (-beta * omega0).exp();
    let tail = q.powi(d as i32 - 1);
    if tail > TAIL_MASS_TOL {
        return Err(StateError::TruncationTooSmall { mass: tail, level: d - 2 });
    }
    thermal_state(&oscillator_hamiltonian(omega0, d), beta)?.relabel(&["A"])
}

/// Mean field and second moments of one bosonic time bin: `⟨b⟩`, `⟨b†b⟩`, `⟨bb⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMoments {
    pub mean: C64,
    pub n: f64,
    pub m: C64,
}

/// States of individual ancillas or of a whole bath.
#[derive(Debug, Clone, PartialEq)]
pub enum AncillaSpec {
    PureVector(Vector),
    ThermalQubit { beta: f64, omega0: f64 },
    ThermalOscillator { beta: f64, omega0: f64, d: usize },
    CoherentBin { alpha: C64, dt: f64, d: usize },
    /// Gaussian white-noise bath described only by its moments:
    /// `⟨dB⟩ = β_t dt`, `⟨dB†dB⟩ = N dt`, `⟨dB dB⟩ = M dt`.
    GaussianMoments { beta_t: C64, n: f64, m: C64 },
    /// One photon spread over qubit time bins with amplitudes `c_n`.
    SinglePhotonChain { amplitudes: Vec<C64> },
}

impl AncillaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            AncillaSpec::PureVector(v) => {
                if (v.norm() - 1.0).abs() > 1e-10 {
                    return Err(StateError::InvalidAncilla(format!("pure vector norm {}", v.norm())));
                }
            }
            AncillaSpec::ThermalQubit { beta, .. } | AncillaSpec::ThermalOscillator { beta, .. } => {
                if *beta < 0.0 {
                    return Err(StateError::NegativeTemperature);
                }
            }
            AncillaSpec::CoherentBin { dt, d, .. } => {
                if !(*dt > 0.0) || *d < 2 {
                    return Err(StateError::InvalidAncilla("coherent bin needs Δt > 0 and d ≥ 2".into()));
                }
            }
            AncillaSpec::GaussianMoments { n, m, .. } => {
                if *n < 0.0 {
                    return Err(StateError::InvalidAncilla(format!("N = {n} < 0")));
                }
                if m.norm_sqr() > n * (n + 1.0) + 1e-12 {
                    return Err(StateError::InvalidAncilla(format!("|M|² = {} exceeds N(N+1)", m.norm_sqr())));
                }
            }
            AncillaSpec::SinglePhotonChain { amplitudes } => {
                let total: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
                if amplitudes.is_empty() || (total - 1.0).abs() > 1e-10 {
                    return Err(StateError::InvalidAncilla(format!("Σ|c_n|² = {total}")));
                }
            }
        }
        Ok(())
    }

    /// The ancilla state. Chain specs give the joint state of all bins
    /// (labels `A1`, `A2`, ...); moment-only specs have no state.
    pub fn state(&self) -> Result<DensityMatrix> {
        self.validate()?;
        match self {
            AncillaSpec::PureVector(v) => DensityMatrix::pure(v, TensorSpace::single(v.len(), "A")?),
            AncillaSpec::ThermalQubit { beta, omega0 } => {
                thermal_state(&qubit_hamiltonian(*omega0), *beta)?.relabel(&["A"])
            }
            AncillaSpec::ThermalOscillator { beta, omega0, d } => thermal_oscillator(*beta, *omega0, *d),
            AncillaSpec::CoherentBin { alpha, dt, d } => coherent_bin_state(*alpha, *dt, *d),
            AncillaSpec::GaussianMoments { .. } => Err(StateError::InvalidAncilla(
                "Gaussian moment bath has no finite-dimensional state".into(),
            )),
            AncillaSpec::SinglePhotonChain { amplitudes } => single_photon_chain(amplitudes),
        }
    }

    /// Time-bin field moments for bosonic specs.
    pub fn field_moments(&self, dt: f64) -> Result<FieldMoments> {
        self.validate()?;
        match self {
            AncillaSpec::GaussianMoments { beta_t, n, m } => {
                let mean = beta_t * dt.sqrt();
                Ok(FieldMoments { mean, n: n + mean.norm_sqr(), m: m + mean * mean })
            }
            AncillaSpec::ThermalOscillator { .. } | AncillaSpec::CoherentBin { .. } => {
                let rho = self.state()?;
                let a = ops::annihilation(rho.dim());
                Ok(FieldMoments {
                    mean: linalg::expect(&a, rho.matrix()),
                    n: linalg::expect(&(a.adjoint() * &a), rho.matrix()).re,
                    m: linalg::expect(&(&a * &a), rho.matrix()),
                })
            }
            _ => Err(StateError::InvalidAncilla("field moments need a bosonic ancilla".into())),
        }
    }
}

fn single_photon_chain(amplitudes: &[C64]) -> Result<DensityMatrix> {
    let n = amplitudes.len();
    let labels: Vec<String> = (1..=n).map(|k| format!("A{k}")).collect();
    let space = TensorSpace::new(vec![2; n], labels)?;
    let mut psi = Vector::zeros(space.dim());
    // bin k excited, all others in |0⟩ (index 1 per qubit)
    let all_ground: usize = (0..n).map(|j| 1usize << (n - 1 - j)).sum();
    for (k, &amp) in amplitudes.iter().enumerate() {
        psi[all_ground & !(1usize << (n - 1 - k))] = amp;
    }
    DensityMatrix::pure(&psi, space)
}

/// Von Neumann entropy in nats.
pub fn entropy(rho: &Mat) -> Result<f64> {
    let vals = linalg::eigvalsh(rho)?;
    Ok(vals.iter().filter(|&&l| l > ZERO_EIGENVALUE).map(|&l| -l * l.ln()).sum())
}

/// `S(ρ‖σ) = Tr ρ ln ρ − Tr ρ ln σ`.
pub fn relative_entropy(rho: &Mat, sigma: &Mat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(LinalgError::DimensionMismatch("relative_entropy".into()).into());
    }
    let (vals, vecs) = eigh(sigma)?;
    let mut cross = 0.0;
    for (k, &l) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let w = (v.adjoint() * rho * v)[(0, 0)].re;
        if l <= ZERO_EIGENVALUE {
            if w > SUPPORT_TOL {
                return Err(StateError::RelativeEntropyInfinite);
            }
            continue;
        }
        cross += w * l.ln();
    }
    Ok(-entropy(rho)? - cross)
}

/// `I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)` for the split `part_a` | rest.
pub fn mutual_information(rho: &DensityMatrix, part_a: &[&str]) -> Result<f64> {
    let a_idx = part_a
        .iter()
        .map(|l| rho.space().index_of(l))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let b_idx: Vec<usize> = (0..rho.space().len()).filter(|i| !a_idx.contains(i)).collect();
    let dims = rho.space().dims();
    let ra = linalg::partial_trace_idx(rho.matrix(), dims, &a_idx)?;
    let rb = linalg::partial_trace_idx(rho.matrix(), dims, &b_idx)?;
    Ok(entropy(&ra)? + entropy(&rb)? - entropy(rho.matrix())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub von_neumann: f64,
    pub relative: Option<f64>,
    pub mutual: f64,
}

/// Entropy of `rho`, its mutual information across `part_a`, and optionally
/// its relative entropy to `reference` (`None` also when that is infinite).
pub fn entropy_report(rho: &DensityMatrix, part_a: &[&str], reference: Option<&Mat>) -> Result<EntropyReport> {
    let relative = match reference {
        Some(r) => match relative_entropy(rho.matrix(), r) {
            Ok(v) => Some(v),
            Err(StateError::RelativeEntropyInfinite) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(EntropyReport { von_neumann: rho.entropy(), relative, mutual: mutual_information(rho, part_a)? })
}

/// Pure qubit `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
pub fn qubit_pure(theta: f64, phi: f64) -> Vector {
    Vector::from_vec(vec![C64::from_polar((theta / 2.0).sin(), phi), c((theta / 2.0).cos(), 0.0)])
}
