//! Hilbert-space layout for a register of spin-½ electrons and nuclei.
//!
//! Basis index convention, shared by every module: the index is a bit
//! string, electrons occupy bits `0..n_electrons`, nuclei occupy bits
//! `n_electrons..n_electrons + n_nuclei`, and a set bit means spin up
//! (σ^z eigenvalue +1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinRegister {
    n_electrons: usize,
    n_nuclei: usize,
}

impl SpinRegister {
    pub fn new(n_electrons: usize, n_nuclei: usize) -> Self {
        Self {
            n_electrons,
            n_nuclei,
        }
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn n_nuclei(&self) -> usize {
        self.n_nuclei
    }

    pub fn n_spins(&self) -> usize {
        self.n_electrons + self.n_nuclei
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    /// Spin index of electron `e`.
    pub fn electron(&self, e: usize) -> Result<usize> {
        if e < self.n_electrons {
            Ok(e)
        } else {
            Err(Error::SpinOutOfRange {
                index: e,
                len: self.n_electrons,
            })
        }
    }

    /// Spin index of the nucleus at donor site `site`.
    pub fn nucleus(&self, site: usize) -> Result<usize> {
        if site < self.n_nuclei {
            Ok(self.n_electrons + site)
        } else {
            Err(Error::SpinOutOfRange {
                index: site,
                len: self.n_nuclei,
            })
        }
    }

    pub fn is_electron(&self, spin: usize) -> bool {
        spin < self.n_electrons
    }

    pub fn is_nucleus(&self, spin: usize) -> bool {
        spin >= self.n_electrons && spin < self.n_spins()
    }

    fn check_spin(&self, spin: usize) -> Result<()> {
        if spin < self.n_spins() {
            Ok(())
        } else {
            Err(Error::SpinOutOfRange {
                index: spin,
                len: self.n_spins(),
            })
        }
    }

    /// Basis index with exactly the listed spins up.
    pub fn basis_index(&self, up_spins: &[usize]) -> Result<usize> {
        up_spins.iter().try_fold(0usize, |acc, &s| {
            self.check_spin(s)?;
            Ok(acc | (1 << s))
        })
    }

    /// Number of up spins in basis state `index`.
    pub fn ups(&self, index: usize) -> usize {
        index.count_ones() as usize
    }

    /// All attainable total J_z values, from most negative to most positive.
    pub fn jz_values(&self) -> Vec<f64> {
        let n = self.n_spins();
        (0..=n).map(|ups| ups as f64 - n as f64 / 2.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: CMatrix,
    label: String,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
            label: "0".into(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            label: "I".into(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * factor),
            label: format!("{}*{}", factor, self.label),
        }
    }

    pub fn plus(&self, other: &HermitianOperator) -> Self {
        Self {
            matrix: &self.matrix + &other.matrix,
            label: format!("{}+{}", self.label, other.label),
        }
    }

    pub fn minus(&self, other: &HermitianOperator) -> Self {
        Self {
            matrix: &self.matrix - &other.matrix,
            label: format!("{}-{}", self.label, other.label),
        }
    }

    /// Largest element of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        let c = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        max_abs(&c)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)].norm() <= tol))
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinState {
    amps: CVector,
}

impl SpinState {
    pub fn new(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; fails only for the zero vector.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self { amps: amps / Complex64::new(norm, 0.0) })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Self { amps }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn to_density(&self) -> DensityState {
        DensityState {
            rho: &self.amps * self.amps.adjoint(),
        }
    }

    pub(crate) fn from_vector_unchecked(amps: CVector) -> Self {
        Self { amps }
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    rho: CMatrix,
}

impl DensityState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                got: rho.ncols(),
            });
        }
        let dev = hermitian_deviation(&rho);
        if dev > NORM_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian ({dev:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min_ev = SymmetricEigen::new(rho.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -NORM_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(Self { rho })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Tr(ρ·op)
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (&self.rho * op).trace().re
    }

    pub fn tensor(&self, other: &DensityState) -> DensityState {
        DensityState {
            rho: self.rho.kronecker(&other.rho),
        }
    }

    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Self {
        Self { rho }
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.rho
    }
}

/// Pauli operator on `spin`, identity elsewhere.
pub fn embed_pauli(register: &SpinRegister, spin: usize, axis: Axis) -> Result<HermitianOperator> {
    register.check_spin(spin)?;
    let dim = register.dim();
    let bit = 1usize << spin;
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let up = col & bit != 0;
        match axis {
            Axis::Z => m[(col, col)] = if up { ONE } else { -ONE },
            Axis::X => m[(col ^ bit, col)] = ONE,
            // σ^y|↑⟩ = i|↓⟩, σ^y|↓⟩ = −i|↑⟩
            Axis::Y => m[(col ^ bit, col)] = if up { I } else { -I },
        }
    }
    let name = match axis {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    };
    Ok(HermitianOperator::from_matrix_unchecked(
        m,
        format!("s{name}[{spin}]"),
    ))
}

/// Swap of two spins' states.
pub fn swap_operator(register: &SpinRegister, a: usize, b: usize) -> Result<CMatrix> {
    register.check_spin(a)?;
    register.check_spin(b)?;
    let dim = register.dim();
    let (ba, bb) = (1usize << a, 1usize << b);
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let (ua, ub) = (col & ba != 0, col & bb != 0);
        let row = if ua == ub { col } else { col ^ ba ^ bb };
        m[(row, col)] = ONE;
    }
    Ok(m)
}

/// Unit-strength contact coupling σ_e·σ_n between spin indices `electron`
/// and `nucleus`.
pub fn heisenberg(register: &SpinRegister, electron: usize, nucleus: usize) -> Result<HermitianOperator> {
    register.check_spin(electron)?;
    register.check_spin(nucleus)?;
    if !register.is_electron(electron) {
        return Err(Error::NotElectron(electron));
    }
    if !register.is_nucleus(nucleus) {
        return Err(Error::NotNucleus(nucleus));
    }
    // σ·σ = 2·SWAP − I
    let dim = register.dim();
    let m = swap_operator(register, electron, nucleus)? * Complex64::new(2.0, 0.0)
        - CMatrix::identity(dim, dim);
    Ok(HermitianOperator::from_matrix_unchecked(
        m,
        format!("S[{electron}]*S[{nucleus}]"),
    ))
}

/// Σ_k σ^z_k, diagonal.
pub fn total_sigma_z(register: &SpinRegister) -> HermitianOperator {
    let n = register.n_spins() as f64;
    let diag = CVector::from_iterator(
        register.dim(),
        (0..register.dim()).map(|i| Complex64::new(2.0 * register.ups(i) as f64 - n, 0.0)),
    );
    HermitianOperator::from_matrix_unchecked(CMatrix::from_diagonal(&diag), "Sz_total")
}

fn sector_ups(register: &SpinRegister, jz: f64) -> Result<usize> {
    let ups = jz + register.n_spins() as f64 / 2.0;
    let rounded = ups.round();
    if (ups - rounded).abs() > 1e-9 || rounded < 0.0 || rounded > register.n_spins() as f64 {
        return Err(Error::UnattainableJz(jz));
    }
    Ok(rounded as usize)
}

/// Diagonal projector onto basis states with (ups − downs)/2 = `jz`.
pub fn jz_sector_projector(register: &SpinRegister, jz: f64) -> Result<HermitianOperator> {
    let ups = sector_ups(register, jz)?;
    let diag = CVector::from_iterator(
        register.dim(),
        (0..register.dim()).map(|i| if register.ups(i) == ups { ONE } else { ZERO }),
    );
    Ok(HermitianOperator::from_matrix_unchecked(
        CMatrix::from_diagonal(&diag),
        format!("P[jz={jz}]"),
    ))
}

/// Projectors for every J_z sector of the register, most negative first.
pub fn jz_sector_projectors(register: &SpinRegister) -> Vec<HermitianOperator> {
    register
        .jz_values()
        .into_iter()
        .map(|jz| jz_sector_projector(register, jz).expect("attainable by construction"))
        .collect()
}

/// Reduced density matrix on `keep`; `keep[k]` becomes bit k of the
/// subsystem index.
pub fn reduced_density(register: &SpinRegister, rho: &CMatrix, keep: &[usize]) -> Result<CMatrix> {
    if rho.nrows() != register.dim() {
        return Err(Error::DimensionMismatch {
            expected: register.dim(),
            got: rho.nrows(),
        });
    }
    for &s in keep {
        register.check_spin(s)?;
    }
    let keep_mask: usize = keep.iter().map(|&s| 1usize << s).sum();
    let sub = |i: usize| -> usize {
        keep.iter()
            .enumerate()
            .map(|(k, &s)| ((i >> s) & 1) << k)
            .sum()
    };
    let sub_dim = 1usize << keep.len();
    let mut out = CMatrix::zeros(sub_dim, sub_dim);
    let dim = register.dim();
    for i in 0..dim {
        for j in 0..dim {
            if i & !keep_mask == j & !keep_mask {
                out[(sub(i), sub(j))] += rho[(i, j)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn sigma_z_on_up() {
        let reg = SpinRegister::new(1, 0);
        let z = embed_pauli(&reg, 0, Axis::Z).unwrap();
        let up = SpinState::basis(2, 1);
        let out = z.matrix() * up.amplitudes();
        assert_eq!(out, up.amplitudes().clone());
    }

    #[test]
    fn pauli_commutator() {
        let reg = SpinRegister::new(1, 1);
        for spin in 0..2 {
            let x = embed_pauli(&reg, spin, Axis::X).unwrap();
            let y = embed_pauli(&reg, spin, Axis::Y).unwrap();
            let z = embed_pauli(&reg, spin, Axis::Z).unwrap();
            let comm = x.matrix() * y.matrix() - y.matrix() * x.matrix();
            assert!(close(&comm, &(z.matrix() * Complex64::new(0.0, 2.0)), 1e-14));
        }
    }

    #[test]
    fn distinct_spins_commute() {
        let reg = SpinRegister::new(1, 1);
        for a in Axis::ALL {
            for b in Axis::ALL {
                let pa = embed_pauli(&reg, 0, a).unwrap();
                let pb = embed_pauli(&reg, 1, b).unwrap();
                assert_eq!(pa.commutator_norm(&pb), 0.0);
            }
        }
    }

    #[test]
    fn pauli_out_of_range() {
        let reg = SpinRegister::new(1, 1);
        assert!(matches!(
            embed_pauli(&reg, 2, Axis::X),
            Err(Error::SpinOutOfRange { .. })
        ));
    }

    #[test]
    fn heisenberg_spectrum_and_swap_identity() {
        let reg = SpinRegister::new(1, 1);
        let h = heisenberg(&reg, 0, 1).unwrap();
        let ev = h.eigenvalues();
        let expected = [-3.0, 1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let by_paulis = Axis::ALL.iter().fold(CMatrix::zeros(4, 4), |acc, &ax| {
            acc + embed_pauli(&reg, 0, ax).unwrap().matrix() * embed_pauli(&reg, 1, ax).unwrap().matrix()
        });
        assert!(close(h.matrix(), &by_paulis, 1e-14));
    }

    #[test]
    fn heisenberg_on_up_down() {
        // |↑_e↓_n⟩ → 2|↓_e↑_n⟩ − |↑_e↓_n⟩
        let reg = SpinRegister::new(1, 1);
        let h = heisenberg(&reg, 0, 1).unwrap();
        let up_down = reg.basis_index(&[0]).unwrap();
        let down_up = reg.basis_index(&[1]).unwrap();
        let out = h.matrix() * SpinState::basis(4, up_down).amplitudes();
        assert!((out[down_up] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((out[up_down] + ONE).norm() < 1e-14);
    }

    #[test]
    fn heisenberg_species_checked() {
        let reg = SpinRegister::new(2, 2);
        assert!(matches!(heisenberg(&reg, 0, 1), Err(Error::NotNucleus(1))));
        assert!(matches!(heisenberg(&reg, 2, 3), Err(Error::NotElectron(2))));
        assert!(heisenberg(&reg, 1, 2).is_ok());
    }

    #[test]
    fn sector_ranks() {
        let two = SpinRegister::new(1, 1);
        let p0 = jz_sector_projector(&two, 0.0).unwrap();
        assert_eq!(p0.matrix().trace().re, 2.0);
        let up_down = two.basis_index(&[0]).unwrap();
        let down_up = two.basis_index(&[1]).unwrap();
        assert_eq!(p0.matrix()[(up_down, up_down)], ONE);
        assert_eq!(p0.matrix()[(down_up, down_up)], ONE);
        let p1 = jz_sector_projector(&two, 1.0).unwrap();
        assert_eq!(p1.matrix().trace().re, 1.0);
        assert_eq!(p1.matrix()[(3, 3)], ONE);
        let four = SpinRegister::new(2, 2);
        assert_eq!(jz_sector_projector(&four, 0.0).unwrap().matrix().trace().re, 6.0);
        assert!(matches!(
            jz_sector_projector(&four, 0.5),
            Err(Error::UnattainableJz(_))
        ));
        assert!(jz_sector_projector(&four, 3.0).is_err());
    }

    #[test]
    fn sectors_sum_to_identity_exactly() {
        let reg = SpinRegister::new(2, 3);
        let sum = jz_sector_projectors(&reg)
            .iter()
            .fold(CMatrix::zeros(reg.dim(), reg.dim()), |acc, p| acc + p.matrix());
        assert_eq!(sum, CMatrix::identity(reg.dim(), reg.dim()));
    }

    #[test]
    fn hyperfine_preserves_sectors() {
        let reg = SpinRegister::new(2, 2);
        let h = heisenberg(&reg, 0, 3).unwrap();
        assert_eq!(h.commutator_norm(&total_sigma_z(&reg)), 0.0);
        for p in jz_sector_projectors(&reg) {
            assert_eq!(h.commutator_norm(&p), 0.0);
        }
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(matches!(
            HermitianOperator::new(m, "bad"),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn density_validation() {
        assert!(DensityState::new(CMatrix::identity(2, 2)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(DensityState::new(m).is_err());
        assert!(DensityState::new(DensityState::maximally_mixed(4).matrix().clone()).is_ok());
    }

    #[test]
    fn reduced_density_of_product() {
        // e up, n down: reduced on nucleus is |↓⟩⟨↓|
        let reg = SpinRegister::new(1, 1);
        let psi = SpinState::basis(4, reg.basis_index(&[0]).unwrap());
        let rho_n = reduced_density(&reg, psi.to_density().matrix(), &[1]).unwrap();
        assert_eq!(rho_n[(0, 0)], ONE);
        assert_eq!(rho_n[(1, 1)], ZERO);
        let rho_pair = reduced_density(&reg, psi.to_density().matrix(), &[0, 1]).unwrap();
        assert_eq!(&rho_pair, psi.to_density().matrix());
    }
}
