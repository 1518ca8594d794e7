//! Dense complex linear algebra for small Hilbert spaces (dimension ≤ 8).
//!
//! Matrices are stored row-major. Hermitian eigendecomposition uses cyclic
//! complex Jacobi rotations, and every propagator `exp(-iHt)` is built from
//! that spectrum, so unitarity holds to machine precision.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance used for Hermiticity and unitarity preconditions.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Normalization tolerance for [`StateVector`].
pub const NORM_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max |H - H†| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary (max |U†U - 1| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },
    #[error("non-finite entry in input")]
    NonFinite,
}

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if `entries.len()` is
    /// not a perfect square.
    pub fn from_row_major(entries: Vec<C64>) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert!(dim > 0 && dim * dim == entries.len(), "entries do not form a square matrix");
        Self { dim, data: entries }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn unitarity_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// `self · v` on raw amplitudes. Panics on length mismatch.
    pub fn mul_slice(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// In-place variant of [`mul_slice`](Self::mul_slice) using a caller-owned scratch buffer.
    pub fn mul_slice_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim;
        debug_assert!(v.len() == n && out.len() == n);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// Column `j` as a raw vector.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes that must already have unit norm.
    pub fn new(amps: Vec<C64>) -> Result<Self, LinalgError> {
        if amps.is_empty() {
            return Err(LinalgError::DimensionMismatch { expected: 1, found: 0 });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let norm = norm_of(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(LinalgError::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(amps: Vec<C64>) -> Result<Self, LinalgError> {
        let norm = norm_of(&amps);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LinalgError::NotNormalized { norm });
        }
        Self::new(amps.into_iter().map(|z| z / norm).collect())
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub(crate) fn from_raw_unchecked(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Self { amps }
    }

    pub fn scaled(&self, s: C64) -> Vec<C64> {
        self.amps.iter().map(|z| z * s).collect()
    }

    /// Euclidean distance to a raw vector.
    pub fn distance_to(&self, other: &[C64]) -> f64 {
        assert_eq!(self.dim(), other.len());
        self.amps
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn norm_of(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectrum of a Hermitian matrix: ascending eigenvalues with orthonormal
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V·diag(f(λ))·V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * weights[k] * v[(j, k)].conj())
                .sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| C64::new(l, 0.0))
    }

    /// Exact time evolution of `psi` under the decomposed Hamiltonian.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> StateVector {
        let coeffs = self.vectors.adjoint().mul_slice(psi.amplitudes());
        let rotated: Vec<C64> = coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, &l)| c * C64::from_polar(1.0, -l * t))
            .collect();
        StateVector::from_raw_unchecked(self.vectors.mul_slice(&rotated))
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |r, c| {
        let (i, k) = (r / nb, r % nb);
        let (j, l) = (c / nb, c % nb);
        a[(i, j)] * b[(k, l)]
    })
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn herm_eig(h: &ComplexMatrix) -> Result<EigenDecomposition, LinalgError> {
    if !h.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let deviation = h.hermitian_deviation();
    if deviation > STRUCTURE_TOL {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let n = h.dim();
    // Work on the exactly Hermitian part.
    let mut a = ComplexMatrix::from_fn(n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_REL_THRESHOLD * a.frobenius_norm();

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(EigenDecomposition { values, vectors })
}

/// One rotation in the (p, q) plane that annihilates `a[p][q]`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = C64::new(0.0, 0.0);
        a[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag;
    // Real symmetric 2x2 problem [[app, mag], [mag, aqq]].
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.dim();

    // G = [[c, s·e^{iφ}], [-s·e^{-iφ}, c]] on (p, q); A ← G† A G, V ← V G.
    let gpq = phase * s;
    let gqp = -phase.conj() * s;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c + akq * gqp;
        a[(k, q)] = akp * gpq + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c + aqk * gqp.conj();
        a[(q, k)] = apk * gpq.conj() + aqk * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c + vkq * gqp;
        v[(k, q)] = vkp * gpq + vkq * c;
    }
}

/// `exp(-iHt)` via the Hermitian spectrum of `h`.
pub fn propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, LinalgError> {
    let eig = herm_eig(h)?;
    Ok(eig.reconstruct_with(|l| C64::from_polar(1.0, -l * t)))
}

/// Eigendecomposition of a unitary `w = V·diag(e^{iφ})·V†`.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    pub phases: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl UnitarySpectrum {
    /// `w^k · psi` evaluated through eigenphases.
    pub fn power_apply(&self, coeffs: &[C64], k: f64, out: &mut [C64]) {
        let n = self.phases.len();
        let mut rotated = [C64::new(0.0, 0.0); 16];
        let rotated = &mut rotated[..n];
        for ((r, c), &phi) in rotated.iter_mut().zip(coeffs).zip(&self.phases) {
            *r = c * C64::from_polar(1.0, phi * k);
        }
        self.vectors.mul_slice_into(rotated, out);
    }

    /// Coordinates of `psi` in the eigenbasis.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        self.vectors.adjoint().mul_slice(psi)
    }
}

const UNITARY_EIG_TOL: f64 = 1e-12;

/// Diagonalizes a unitary through a Hermitian combination of `(w + w†)/2`
/// and `(w − w†)/2i`, which commute because `w` is normal. A candidate basis
/// is accepted only if `V†wV` is diagonal within 1e-12; otherwise `None`.
pub fn unitary_eig(w: &ComplexMatrix) -> Result<Option<UnitarySpectrum>, LinalgError> {
    let deviation = w.unitarity_deviation();
    if deviation > STRUCTURE_TOL {
        return Err(LinalgError::NotUnitary { deviation });
    }
    if w.dim() > 16 {
        return Err(LinalgError::DimensionMismatch {
            expected: 16,
            found: w.dim(),
        });
    }
    let n = w.dim();
    let wd = w.adjoint();
    let re_part = (w + &wd).scale_real(0.5);
    let im_part = (w - &wd).scale(C64::new(0.0, -0.5));
    // Irrational weights so that distinct eigenphases map to distinct values.
    for kappa in [0.577_350_269_189_625_8, 1.618_033_988_749_895, 0.267_949_192_431_122_7] {
        let m = &re_part + &im_part.scale_real(kappa);
        let eig = herm_eig(&m)?;
        let v = eig.vectors;
        let d = &(&v.adjoint() * w) * &v;
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(d[(i, j)].norm());
                }
            }
        }
        if off <= UNITARY_EIG_TOL {
            let phases = (0..n).map(|i| d[(i, i)].arg()).collect();
            return Ok(Some(UnitarySpectrum { phases, vectors: v }));
        }
    }
    Ok(None)
}

/// Applies a unitary to a state.
pub fn apply(u: &ComplexMatrix, psi: &StateVector) -> Result<StateVector, LinalgError> {
    if u.dim() != psi.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: u.dim(),
            found: psi.dim(),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > STRUCTURE_TOL {
        return Err(LinalgError::NotUnitary { deviation });
    }
    Ok(StateVector::from_raw_unchecked(u.mul_slice(psi.amplitudes())))
}

/// `⟨ψ|O|ψ⟩` for Hermitian `O`; the vanishing imaginary part is dropped.
pub fn expectation(psi: &StateVector, o: &ComplexMatrix) -> Result<f64, LinalgError> {
    if o.dim() != psi.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: o.dim(),
            found: psi.dim(),
        });
    }
    let deviation = o.hermitian_deviation();
    if deviation > STRUCTURE_TOL {
        return Err(LinalgError::NotHermitian { deviation });
    }
    Ok(expectation_raw(psi.amplitudes(), o))
}

/// Unchecked `Re⟨ψ|O|ψ⟩` on raw amplitudes for hot loops.
pub fn expectation_raw(psi: &[C64], o: &ComplexMatrix) -> f64 {
    let n = o.dim();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..n {
            row += o[(i, j)] * psi[j];
        }
        acc += (psi[i].conj() * row).re;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_row_major(vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        assert_eq!(
            kron(&sigma_z(), &i2),
            ComplexMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0])
        );
    }

    #[test]
    fn kron_index_formula() {
        let xx = kron(&sigma_x(), &sigma_x());
        assert_eq!(xx[(0, 3)], c(1.0, 0.0));
        for i in 0..4 {
            assert_eq!(xx[(i, i)], c(0.0, 0.0));
        }
    }

    #[test]
    fn eig_identity_and_sigma_x() {
        let e = herm_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);

        let e = herm_eig(&sigma_x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        // Eigenvectors ∝ |−⟩ and |+⟩.
        let minus = e.vectors.column(0);
        let plus = e.vectors.column(1);
        assert!(((minus[0] + minus[1]).norm()) < 1e-14);
        assert!(((plus[0] - plus[1]).norm()) < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_major(vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(herm_eig(&m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn eig_zero_matrix() {
        let e = herm_eig(&ComplexMatrix::zeros(3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn propagator_of_sigma_z_at_pi() {
        let u = propagator(&sigma_z(), PI).unwrap();
        let minus_one = ComplexMatrix::identity(2).scale_real(-1.0);
        assert!(u.max_abs_diff(&minus_one) < 1e-14);
        let u0 = propagator(&sigma_z(), 0.0).unwrap();
        assert!(u0.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn apply_and_expectation_basics() {
        let zero = StateVector::basis(2, 0);
        let one = apply(&sigma_x(), &zero).unwrap();
        assert_eq!(one, StateVector::basis(2, 1));
        assert_eq!(apply(&ComplexMatrix::identity(2), &zero).unwrap(), zero);
        assert!(matches!(
            apply(&ComplexMatrix::identity(4), &zero),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        let not_unitary = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(apply(&not_unitary, &zero), Err(LinalgError::NotUnitary { .. })));

        // ω1(1 − σz) with ω1 = 1/√2.
        let hb = ComplexMatrix::from_real_diagonal(&[0.0, SQRT_2]);
        assert_eq!(expectation(&zero, &hb).unwrap(), 0.0);
        assert!((expectation(&one, &hb).unwrap() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn state_construction_checks_norm() {
        assert!(StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        let s = StateVector::normalized(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::normalized(vec![c(0.0, 0.0)]).is_err());
        assert!(matches!(
            StateVector::new(vec![c(f64::NAN, 0.0)]),
            Err(LinalgError::NonFinite)
        ));
    }
}
