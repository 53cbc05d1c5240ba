//! Dense complex linear algebra on small tensor-product Hilbert spaces.
//!
//! Subsystem 0 is the most significant factor of a composite index, which is
//! the ordering produced by [`kron`]. Qubits are stored in the basis
//! `(|1⟩, |0⟩)`: index 0 is the excited state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Largest Hilbert-space dimension accepted by [`kron`] and friends.
pub const DEFAULT_DIM_CAP: usize = 1 << 16;
/// Max-abs tolerance on `h - h†` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("space too large: dimension {dim} exceeds cap {cap}")]
    SpaceTooLarge { dim: usize, cap: usize },
    #[error("not Hermitian: max |h - h†| = {0:.3e}")]
    NotHermitian(f64),
    #[error("no such subsystem: {0}")]
    NoSuchSubsystem(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tensor space: {0}")]
    InvalidSpace(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Ordered list of subsystem dimensions with unique labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl TensorSpace {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.is_empty() {
            return Err(LinalgError::InvalidSpace("no subsystems".into()));
        }
        if dims.len() != labels.len() {
            return Err(LinalgError::InvalidSpace(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(LinalgError::InvalidSpace(format!("subsystem dimension {d} < 2")));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(LinalgError::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        let dim = checked_product(&dims, DEFAULT_DIM_CAP)?;
        let _ = dim;
        Ok(Self { dims, labels })
    }

    /// Single-subsystem space.
    pub fn single(dim: usize, label: &str) -> Result<Self> {
        Self::new(vec![dim], vec![label])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| LinalgError::NoSuchSubsystem(label.to_string()))
    }

    /// Concatenation `self ⊗ other`.
    pub fn join(&self, other: &TensorSpace) -> Result<TensorSpace> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        TensorSpace::new(dims, labels)
    }

    /// The space formed by the listed subsystems, kept in their original order.
    pub fn restrict(&self, keep: &[usize]) -> Result<TensorSpace> {
        let mut idx = keep.to_vec();
        idx.sort_unstable();
        idx.dedup();
        TensorSpace::new(
            idx.iter().map(|&i| self.dims[i]).collect(),
            idx.iter().map(|&i| self.labels[i].clone()).collect(),
        )
    }
}

/// Product of `dims`, failing when it exceeds [`DEFAULT_DIM_CAP`].
pub fn checked_dim(dims: &[usize]) -> Result<usize> {
    checked_product(dims, DEFAULT_DIM_CAP)
}

fn checked_product(dims: &[usize], cap: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for &d in dims {
        dim = dim
            .checked_mul(d)
            .filter(|&x| x <= cap)
            .ok_or(LinalgError::SpaceTooLarge { dim: dim.saturating_mul(d), cap })?;
    }
    Ok(dim)
}

pub fn identity(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn dagger(m: &Mat) -> Mat {
    m.adjoint()
}

pub fn trace(m: &Mat) -> C64 {
    m.trace()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

pub fn anticommutator(a: &Mat, b: &Mat) -> Mat {
    a * b + b * a
}

/// `⟨ψ|op|ψ⟩` style expectation `Tr{op ρ}`.
pub fn expect(op: &Mat, rho: &Mat) -> C64 {
    // Tr{AB} = Σ_ij A_ij B_ji without forming the product.
    let n = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc
}

pub fn outer(a: &Vector, b: &Vector) -> Mat {
    a * b.adjoint()
}

pub fn projector(psi: &Vector) -> Mat {
    outer(psi, psi)
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &Mat, b: &Mat) -> Result<Mat> {
    kron_capped(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_capped(a: &Mat, b: &Mat, cap: usize) -> Result<Mat> {
    checked_product(&[a.nrows().max(1), b.nrows().max(1)], cap)?;
    checked_product(&[a.ncols().max(1), b.ncols().max(1)], cap)?;
    Ok(a.kronecker(b))
}

pub fn kron_all(ms: &[&Mat]) -> Result<Mat> {
    let mut out = Mat::identity(1, 1);
    for m in ms {
        out = kron(&out, m)?;
    }
    Ok(out)
}

pub fn kron_vec(a: &Vector, b: &Vector) -> Result<Vector> {
    checked_product(&[a.len(), b.len()], DEFAULT_DIM_CAP)?;
    Ok(a.kronecker(b))
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Groups full-space indices by the value of the complementary multi-index.
///
/// Returns `groups[r][t]` = full index whose target multi-index (in the order
/// of `targets`) is `t` and whose remaining multi-index is `r`.
fn index_groups(dims: &[usize], targets: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n = dims.len();
    for (k, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(LinalgError::DimensionMismatch(format!("subsystem index {t} out of range")));
        }
        if targets[..k].contains(&t) {
            return Err(LinalgError::DimensionMismatch(format!("subsystem {t} listed twice")));
        }
    }
    let st = strides(dims);
    let rest: Vec<usize> = (0..n).filter(|i| !targets.contains(i)).collect();
    let t_dims: Vec<usize> = targets.iter().map(|&i| dims[i]).collect();
    let r_dims: Vec<usize> = rest.iter().map(|&i| dims[i]).collect();
    let t_total: usize = t_dims.iter().product();
    let r_total: usize = r_dims.iter().product();
    let t_st = strides(&t_dims);
    let r_st = strides(&r_dims);
    let mut groups = vec![vec![0usize; t_total]; r_total];
    for (r, group) in groups.iter_mut().enumerate() {
        let mut base = 0;
        for (k, &i) in rest.iter().enumerate() {
            base += ((r / r_st[k]) % r_dims[k]) * st[i];
        }
        for (t, slot) in group.iter_mut().enumerate() {
            let mut full = base;
            for (k, &i) in targets.iter().enumerate() {
                full += ((t / t_st[k]) % t_dims[k]) * st[i];
            }
            *slot = full;
        }
    }
    Ok(groups)
}

fn check_square(m: &Mat, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(LinalgError::DimensionMismatch(format!(
            "{what}: expected {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Partial trace keeping the labelled subsystems (returned in space order).
pub fn partial_trace(m: &Mat, space: &TensorSpace, keep: &[&str]) -> Result<Mat> {
    let idx = keep.iter().map(|l| space.index_of(l)).collect::<Result<Vec<_>>>()?;
    partial_trace_idx(m, space.dims(), &idx)
}

/// Partial trace by subsystem position; kept subsystems come out in ascending order.
pub fn partial_trace_idx(m: &Mat, dims: &[usize], keep: &[usize]) -> Result<Mat> {
    let dim = checked_product(dims, DEFAULT_DIM_CAP)?;
    check_square(m, dim, "partial_trace")?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    // groups indexed by kept multi-index; inner index runs over traced part
    let groups = index_groups(dims, &traced)?;
    let dk = groups.len();
    let mut out = Mat::zeros(dk, dk);
    let nt = groups.first().map_or(0, Vec::len);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..nt {
                acc += m[(groups[a][t], groups[b][t])];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Embeds `op`, acting on `targets` (in the listed order), into the full space.
pub fn embed(op: &Mat, dims: &[usize], targets: &[usize]) -> Result<Mat> {
    let dim = checked_product(dims, DEFAULT_DIM_CAP)?;
    let groups = index_groups(dims, targets)?;
    let dt = groups.first().map_or(1, Vec::len);
    check_square(op, dt, "embed")?;
    let mut out = Mat::zeros(dim, dim);
    for g in &groups {
        for (i, &fi) in g.iter().enumerate() {
            for (j, &fj) in g.iter().enumerate() {
                out[(fi, fj)] = op[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `(op ⊗ I) m` for `op` acting on `targets`, without forming the embedded operator.
pub fn apply_left(op: &Mat, m: &Mat, dims: &[usize], targets: &[usize]) -> Result<Mat> {
    let dim = checked_product(dims, DEFAULT_DIM_CAP)?;
    let groups = index_groups(dims, targets)?;
    let dt = groups.first().map_or(1, Vec::len);
    check_square(op, dt, "apply_left")?;
    if m.nrows() != dim {
        return Err(LinalgError::DimensionMismatch("apply_left: operand rows".into()));
    }
    let mut out = Mat::zeros(dim, m.ncols());
    let mut buf = vec![C64::new(0.0, 0.0); dt];
    for col in 0..m.ncols() {
        for g in &groups {
            for (j, &fj) in g.iter().enumerate() {
                buf[j] = m[(fj, col)];
            }
            for (i, &fi) in g.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..dt {
                    acc += op[(i, j)] * buf[j];
                }
                out[(fi, col)] = acc;
            }
        }
    }
    Ok(out)
}

/// `m (op ⊗ I)` for `op` acting on `targets`.
pub fn apply_right(m: &Mat, op: &Mat, dims: &[usize], targets: &[usize]) -> Result<Mat> {
    let dim = checked_product(dims, DEFAULT_DIM_CAP)?;
    let groups = index_groups(dims, targets)?;
    let dt = groups.first().map_or(1, Vec::len);
    check_square(op, dt, "apply_right")?;
    if m.ncols() != dim {
        return Err(LinalgError::DimensionMismatch("apply_right: operand cols".into()));
    }
    let mut out = Mat::zeros(m.nrows(), dim);
    let mut buf = vec![C64::new(0.0, 0.0); dt];
    for row in 0..m.nrows() {
        for g in &groups {
            for (i, &fi) in g.iter().enumerate() {
                buf[i] = m[(row, fi)];
            }
            for (j, &fj) in g.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..dt {
                    acc += buf[i] * op[(i, j)];
                }
                out[(row, fj)] = acc;
            }
        }
    }
    Ok(out)
}

/// `U m U†` for a local `U` on `targets`.
pub fn conjugate_local(u: &Mat, m: &Mat, dims: &[usize], targets: &[usize]) -> Result<Mat> {
    let left = apply_left(u, m, dims, targets)?;
    apply_right(&left, &u.adjoint(), dims, targets)
}

pub fn hermitian_deviation(m: &Mat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &Mat, tol: f64) -> bool {
    hermitian_deviation(m) <= tol
}

pub fn ensure_hermitian(m: &Mat) -> Result<()> {
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(dev));
    }
    Ok(())
}

/// Connected components of the nonzero pattern of `m`.
fn components(m: &Mat) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != C64::new(0.0, 0.0) || m[(j, i)] != C64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut map: Vec<Option<usize>> = vec![None; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match map[r] {
            Some(k) => out[k].push(i),
            None => {
                map[r] = Some(out.len());
                out.push(vec![i]);
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix: `h = V diag(λ) V†`.
///
/// The matrix is first split into the connected blocks of its sparsity
/// pattern, so number-conserving Hamiltonians in a Fock basis are
/// diagonalized sector by sector.
pub fn eigh(h: &Mat) -> Result<(Vec<f64>, Mat)> {
    if h.nrows() != h.ncols() {
        return Err(LinalgError::DimensionMismatch("eigh: matrix not square".into()));
    }
    ensure_hermitian(h)?;
    let n = h.nrows();
    let mut values = vec![0.0; n];
    let mut vectors = Mat::zeros(n, n);
    let mut col = 0;
    for block in components(h) {
        let k = block.len();
        if k == 1 {
            values[col] = h[(block[0], block[0])].re;
            vectors[(block[0], col)] = C64::new(1.0, 0.0);
            col += 1;
            continue;
        }
        let mut sub = Mat::zeros(k, k);
        for (a, &i) in block.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                // symmetrize so the solver sees an exactly Hermitian input
                sub[(a, b)] = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            }
        }
        let eig = SymmetricEigen::new(sub);
        for r in 0..k {
            values[col + r] = eig.eigenvalues[r];
            for (a, &i) in block.iter().enumerate() {
                vectors[(i, col + r)] = eig.eigenvectors[(a, r)];
            }
        }
        col += k;
    }
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigvalsh(h: &Mat) -> Result<Vec<f64>> {
    let (mut v, _) = eigh(h)?;
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// `f(h)` for Hermitian `h` through its spectral decomposition.
pub fn hermitian_function(h: &Mat, f: impl Fn(f64) -> C64) -> Result<Mat> {
    let (vals, vecs) = eigh(h)?;
    Ok(spectral_rebuild(&vals, &vecs, f))
}

fn spectral_rebuild(vals: &[f64], vecs: &Mat, f: impl Fn(f64) -> C64) -> Mat {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fj = f(l);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn expm_unitary(h: &Mat, t: f64) -> Result<Mat> {
    if h.nrows() != h.ncols() {
        return Err(LinalgError::DimensionMismatch("expm_unitary: matrix not square".into()));
    }
    ensure_hermitian(h)?;
    if t == 0.0 {
        return Ok(identity(h.nrows()));
    }
    hermitian_function(h, |l| C64::from_polar(1.0, -l * t))
}

/// Trace distance `½ Σ |λ(a - b)|`, clamped to `[0, 1]`.
pub fn trace_distance(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch(format!(
            "trace_distance: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let diff = a - b;
    let vals = eigvalsh(&diff)?;
    let d = 0.5 * vals.iter().map(|v| v.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// Column-stacking vectorization.
pub fn vec_of(m: &Mat) -> Vector {
    Vector::from_iterator(m.len(), m.iter().copied())
}

pub fn unvec(v: &Vector, d: usize) -> Mat {
    Mat::from_iterator(d, d, v.iter().copied())
}

/// Matrix of the linear map `f` on `d × d` matrices, acting on column-stacked vectors.
pub fn superop_from_fn(d: usize, f: impl Fn(&Mat) -> Mat) -> Mat {
    let mut s = Mat::zeros(d * d, d * d);
    for col in 0..d {
        for row in 0..d {
            let mut e = Mat::zeros(d, d);
            e[(row, col)] = C64::new(1.0, 0.0);
            let img = f(&e);
            let k = col * d + row;
            for (i, z) in img.iter().enumerate() {
                s[(i, k)] = *z;
            }
        }
    }
    s
}

/// Superoperator of `X ↦ A X B`.
pub fn sandwich_superop(a: &Mat, b: &Mat) -> Mat {
    b.transpose().kronecker(a)
}

pub fn apply_superop(s: &Mat, m: &Mat) -> Mat {
    unvec(&(s * vec_of(m)), m.nrows())
}

/// Standard operators. Qubit basis order is `(|1⟩, |0⟩)`, Fock order is `|0⟩, |1⟩, ...`.
pub mod ops {
    use super::*;

    pub const EXCITED: usize = 0;
    pub const GROUND: usize = 1;

    pub fn ket(d: usize, k: usize) -> Vector {
        let mut v = Vector::zeros(d);
        v[k] = C64::new(1.0, 0.0);
        v
    }

    /// Qubit `|1⟩`.
    pub fn excited() -> Vector {
        ket(2, EXCITED)
    }

    /// Qubit `|0⟩`.
    pub fn ground() -> Vector {
        ket(2, GROUND)
    }

    /// `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Vector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Vector::from_vec(vec![cr(s), cr(s)])
    }

    pub fn sigma_z() -> Mat {
        Mat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }

    pub fn sigma_x() -> Mat {
        Mat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn sigma_y() -> Mat {
        Mat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
    }

    /// `σ₊ = |1⟩⟨0|`.
    pub fn sigma_plus() -> Mat {
        Mat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)])
    }

    /// `σ₋ = |0⟩⟨1|`.
    pub fn sigma_minus() -> Mat {
        Mat::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(1.0), cr(0.0)])
    }

    /// Truncated bosonic annihilation operator on `d` Fock levels.
    pub fn annihilation(d: usize) -> Mat {
        let mut a = Mat::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = cr((n as f64).sqrt());
        }
        a
    }

    pub fn creation(d: usize) -> Mat {
        annihilation(d).adjoint()
    }

    pub fn number(d: usize) -> Mat {
        Mat::from_diagonal(&Vector::from_iterator(d, (0..d).map(|n| cr(n as f64))))
    }

    /// Swap operator on two `d`-level subsystems.
    pub fn swap(d: usize) -> Mat {
        let mut s = Mat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                s[(i * d + j, j * d + i)] = cr(1.0);
            }
        }
        s
    }

    /// Matrix unit `|a⟩⟨b|` on a `d`-dimensional space.
    pub fn matrix_unit(d: usize, a: usize, b: usize) -> Mat {
        let mut m = Mat::zeros(d, d);
        m[(a, b)] = cr(1.0);
        m
    }
}
