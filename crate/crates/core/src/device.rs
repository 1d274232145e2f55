//! Physical constants, clock/field derivation, donor layout, and the
//! instantaneous Hamiltonian.
//!
//! Internal units: neV (energy), ns (time), mT (field), GHz (frequency).
//! The Zeeman term is written for spin ½, so an electron flip costs
//! ΔE_e = g_e·μ_B·B and a nuclear flip ΔE_n = g_nμ_N·B.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinspace::{heisenberg, CMatrix, CVector, HermitianOperator, SpinRegister};

/// Planck constant in neV·ns.
pub const PLANCK_NEV_NS: f64 = 4135.667696;
pub const HBAR_NEV_NS: f64 = PLANCK_NEV_NS / TAU;
/// Bohr magneton in neV/mT.
pub const BOHR_MAGNETON_NEV_PER_MT: f64 = 57.883818;
/// P donor ground-state contact strength in neV.
pub const P_DONOR_HYPERFINE_NEV: f64 = 121.517;
pub const FREE_ELECTRON_G: f64 = 2.0023;
pub const DONOR_ELECTRON_G: f64 = 1.9985;
/// ³¹P nuclear splitting per field, h·γ_n with γ_n/2π = 17.235 MHz/T.
pub const P31_NUCLEAR_NEV_PER_MT: f64 = PLANCK_NEV_NS * 17.235e-6;

pub const DEFAULT_CYCLES_PER_TA: u64 = 96;
pub const DEFAULT_CYCLES_PER_TB: u64 = 256;
pub const DEFAULT_DT_CYCLES: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    pub hyperfine_nev: f64,
    pub g_e_donor: f64,
    pub g_e_interface: f64,
    pub gn_mun_nev_per_mt: f64,
    pub field_mt: f64,
    pub clock_ghz: f64,
    pub cycles_per_ta: u64,
    pub cycles_per_tb: u64,
    pub dt_cycles: u64,
    /// Relative hyperfine strength per donor site (absent = 1).
    pub site_hyperfine_scale: BTreeMap<usize, f64>,
    /// Relative field strength per donor site (absent = 1).
    pub site_field_scale: BTreeMap<usize, f64>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl PhysicalParams {
    /// Clock and field chosen so that T_A spans `cycles_per_ta` clock cycles
    /// and the magnetic period T_B = h/ΔE_r spans `cycles_per_tb`.
    pub fn derive_clock(
        hyperfine_nev: f64,
        g_e: f64,
        gn_mun_nev_per_mt: f64,
        cycles_per_ta: u64,
        cycles_per_tb: u64,
    ) -> Result<Self> {
        if !(hyperfine_nev > 0.0 && g_e > 0.0 && gn_mun_nev_per_mt > 0.0) {
            return Err(Error::InvalidParams(
                "A, g_e and g_n mu_N must be positive".into(),
            ));
        }
        if cycles_per_ta == 0 || cycles_per_tb == 0 {
            return Err(Error::InvalidParams("cycle counts must be positive".into()));
        }
        let t_a = PLANCK_NEV_NS / (4.0 * hyperfine_nev);
        let clock_ghz = cycles_per_ta as f64 / t_a;
        let field_mt = Self::resonant_field(clock_ghz, g_e, gn_mun_nev_per_mt, cycles_per_tb);
        let params = Self {
            hyperfine_nev,
            g_e_donor: g_e,
            g_e_interface: g_e,
            gn_mun_nev_per_mt,
            field_mt,
            clock_ghz,
            cycles_per_ta,
            cycles_per_tb,
            dt_cycles: DEFAULT_DT_CYCLES,
            site_hyperfine_scale: BTreeMap::new(),
            site_field_scale: BTreeMap::new(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Field for which ΔE_r = h·f/cycles_per_tb.
    pub fn resonant_field(clock_ghz: f64, g_e: f64, gn_mun_nev_per_mt: f64, cycles_per_tb: u64) -> f64 {
        let delta_e_r = PLANCK_NEV_NS * clock_ghz / cycles_per_tb as f64;
        delta_e_r / (g_e * BOHR_MAGNETON_NEV_PER_MT + gn_mun_nev_per_mt)
    }

    /// P donor in silicon at the default 96/256 clock.
    pub fn nominal() -> Self {
        Self::derive_clock(
            P_DONOR_HYPERFINE_NEV,
            FREE_ELECTRON_G,
            P31_NUCLEAR_NEV_PER_MT,
            DEFAULT_CYCLES_PER_TA,
            DEFAULT_CYCLES_PER_TB,
        )
        .expect("nominal parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        if !(self.hyperfine_nev > 0.0) {
            return bad("A must be positive");
        }
        if !(self.field_mt > 0.0) {
            return bad("B must be positive");
        }
        if !(self.clock_ghz > 0.0) {
            return bad("f must be positive");
        }
        if !(self.g_e_donor > 0.0 && self.g_e_interface > 0.0 && self.gn_mun_nev_per_mt > 0.0) {
            return bad("g-factors must be positive");
        }
        if self.dt_cycles < 2 || !self.dt_cycles.is_multiple_of(2) {
            return bad("dt_cycles must be even and >= 2");
        }
        if self.dt_cycles >= self.cycles_per_tb {
            return bad("dt_cycles must be smaller than cycles_per_TB");
        }
        if self.cycles_per_ta == 0 {
            return bad("cycles_per_TA must be positive");
        }
        Ok(())
    }

    /// Hyperfine period h/(4A).
    pub fn t_a_ns(&self) -> f64 {
        PLANCK_NEV_NS / (4.0 * self.hyperfine_nev)
    }

    pub fn delta_e_e(&self, g_e: f64) -> f64 {
        g_e * BOHR_MAGNETON_NEV_PER_MT * self.field_mt
    }

    pub fn delta_e_n(&self) -> f64 {
        self.gn_mun_nev_per_mt * self.field_mt
    }

    /// ΔE_r = ΔE_e + ΔE_n for electrons away from the donor.
    pub fn delta_e_r(&self) -> f64 {
        self.delta_e_e(self.g_e_interface) + self.delta_e_n()
    }

    /// Magnetic period h/ΔE_r.
    pub fn t_b_ns(&self) -> f64 {
        PLANCK_NEV_NS / self.delta_e_r()
    }

    pub fn cycle_ns(&self) -> f64 {
        1.0 / self.clock_ghz
    }

    pub fn cycles_to_ns(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_ghz
    }

    pub fn hyperfine_at(&self, site: usize) -> f64 {
        self.hyperfine_nev * self.site_hyperfine_scale.get(&site).copied().unwrap_or(1.0)
    }

    pub fn field_scale_at(&self, site: usize) -> f64 {
        self.site_field_scale.get(&site).copied().unwrap_or(1.0)
    }

    /// Hyperfine step count of one full T_A.
    pub fn steps_per_ta(&self) -> u64 {
        self.cycles_per_ta / self.dt_cycles
    }

    /// Same clock with the field multiplied by `k` and the magnetic period
    /// shortened to `cycles_per_tb / k` cycles.
    pub fn with_field_multiple(&self, k: u64) -> Result<Self> {
        if k == 0 || !self.cycles_per_tb.is_multiple_of(k) {
            return Err(Error::InvalidParams(format!(
                "field multiple {k} does not divide cycles_per_TB {}",
                self.cycles_per_tb
            )));
        }
        let mut p = self.clone();
        p.field_mt *= k as f64;
        p.cycles_per_tb /= k;
        p.validate()?;
        Ok(p)
    }

    pub fn with_dt_cycles(&self, dt_cycles: u64) -> Result<Self> {
        let mut p = self.clone();
        p.dt_cycles = dt_cycles;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coupling {
    pub electron: usize,
    pub site: usize,
}

impl Coupling {
    pub fn new(electron: usize, site: usize) -> Self {
        Self { electron, site }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElectronSlot {
    pub site: usize,
    pub bound: bool,
}

/// Donor sites (one nucleus each) and the electrons sitting on them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeviceLayout {
    n_sites: usize,
    electrons: Vec<ElectronSlot>,
    active: BTreeSet<Coupling>,
}

impl DeviceLayout {
    /// Electron `i` starts at `positions[i]`, unbound, nothing coupled.
    pub fn new(n_sites: usize, positions: &[usize]) -> Result<Self> {
        let layout = Self {
            n_sites,
            electrons: positions
                .iter()
                .map(|&site| ElectronSlot { site, bound: false })
                .collect(),
            active: BTreeSet::new(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Electron `i` on site `i` for every electron.
    pub fn home(n_sites: usize, n_electrons: usize) -> Result<Self> {
        Self::new(n_sites, &(0..n_electrons).collect::<Vec<_>>())
    }

    /// One electron on one donor.
    pub fn single_pair() -> Self {
        Self::home(1, 1).expect("valid")
    }

    /// Two electron-donor pairs plus a spare donor site for shuttling.
    pub fn two_qubit() -> Self {
        Self::home(3, 2).expect("valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.electrons.len() > self.n_sites {
            return Err(Error::Layout(format!(
                "{} electrons on {} sites",
                self.electrons.len(),
                self.n_sites
            )));
        }
        let mut seen = BTreeSet::new();
        for (e, slot) in self.electrons.iter().enumerate() {
            if slot.site >= self.n_sites {
                return Err(Error::Layout(format!(
                    "electron {e} at nonexistent site {}",
                    slot.site
                )));
            }
            if !seen.insert(slot.site) {
                return Err(Error::Layout(format!("two electrons on site {}", slot.site)));
            }
        }
        for c in &self.active {
            let slot = self.electrons.get(c.electron).ok_or_else(|| {
                Error::Layout(format!("coupling references electron {}", c.electron))
            })?;
            if slot.site != c.site || !slot.bound {
                return Err(Error::Layout(format!(
                    "coupling (e{}, s{}) requires the electron bound at that site",
                    c.electron, c.site
                )));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_electrons(&self) -> usize {
        self.electrons.len()
    }

    pub fn register(&self) -> SpinRegister {
        SpinRegister::new(self.electrons.len(), self.n_sites)
    }

    pub fn electrons(&self) -> &[ElectronSlot] {
        &self.electrons
    }

    pub fn site_of(&self, electron: usize) -> Option<usize> {
        self.electrons.get(electron).map(|s| s.site)
    }

    pub fn electron_at(&self, site: usize) -> Option<usize> {
        self.electrons.iter().position(|s| s.site == site)
    }

    pub fn positions(&self) -> Vec<usize> {
        self.electrons.iter().map(|s| s.site).collect()
    }

    pub fn active_couplings(&self) -> &BTreeSet<Coupling> {
        &self.active
    }

    /// Switches on exactly `couplings`; coupled electrons become bound,
    /// all others are pulled off their donors.
    pub fn activate(&self, couplings: &[Coupling]) -> Result<Self> {
        let mut next = self.clone();
        next.active = couplings.iter().copied().collect();
        for (e, slot) in next.electrons.iter_mut().enumerate() {
            slot.bound = next.active.iter().any(|c| c.electron == e);
        }
        if next.active.len() != couplings.len() {
            return Err(Error::Layout("duplicate coupling".into()));
        }
        let mut electrons = BTreeSet::new();
        for c in &next.active {
            if !electrons.insert(c.electron) {
                return Err(Error::Layout(format!(
                    "electron {} coupled to two sites",
                    c.electron
                )));
            }
        }
        next.validate()?;
        Ok(next)
    }

    /// Switches on the A-gates of `sites`, coupling whichever electron sits
    /// on each.
    pub fn activate_sites(&self, sites: &[usize]) -> Result<Self> {
        let couplings = sites
            .iter()
            .map(|&s| {
                self.electron_at(s)
                    .map(|e| Coupling::new(e, s))
                    .ok_or_else(|| Error::Layout(format!("A-gate on empty site {s}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.activate(&couplings)
    }

    pub fn deactivate(&self) -> Self {
        let mut next = self.clone();
        next.active.clear();
        for slot in &mut next.electrons {
            slot.bound = false;
        }
        next
    }

    /// Ideal coherent shuttle: moves the electron, leaves spins untouched.
    pub fn apply_shuttle(&self, electron: usize, target_site: usize) -> Result<Self> {
        let slot = self
            .electrons
            .get(electron)
            .ok_or_else(|| Error::Layout(format!("no electron {electron}")))?;
        if target_site >= self.n_sites {
            return Err(Error::Layout(format!("no site {target_site}")));
        }
        if self.active.iter().any(|c| c.electron == electron) {
            return Err(Error::ElectronCoupled(electron));
        }
        if slot.site == target_site {
            return Ok(self.clone());
        }
        if self.electron_at(target_site).is_some() {
            return Err(Error::TargetOccupied(target_site));
        }
        let mut next = self.clone();
        next.electrons[electron] = ElectronSlot {
            site: target_site,
            bound: false,
        };
        Ok(next)
    }
}

/// H = Σ_active A_s σ_e·σ_n(s) + Σ_e (ΔE_e/2) σ^z_e − Σ_n (ΔE_n/2) σ^z_n.
///
/// Bound electrons use `g_e_donor`, all others `g_e_interface`. Site field
/// scales apply to the nucleus of the site and to the electron on it.
pub fn build_hamiltonian(
    register: &SpinRegister,
    layout: &DeviceLayout,
    params: &PhysicalParams,
) -> Result<HermitianOperator> {
    if register.n_electrons() != layout.n_electrons() || register.n_nuclei() != layout.n_sites() {
        return Err(Error::Layout(format!(
            "register ({} e, {} n) does not match layout ({} e, {} sites)",
            register.n_electrons(),
            register.n_nuclei(),
            layout.n_electrons(),
            layout.n_sites()
        )));
    }
    layout.validate()?;
    let dim = register.dim();

    let mut zeeman_half = Vec::with_capacity(register.n_spins());
    for slot in layout.electrons() {
        let g = if slot.bound {
            params.g_e_donor
        } else {
            params.g_e_interface
        };
        zeeman_half.push(0.5 * params.delta_e_e(g) * params.field_scale_at(slot.site));
    }
    for site in 0..layout.n_sites() {
        zeeman_half.push(-0.5 * params.delta_e_n() * params.field_scale_at(site));
    }
    let diag = CVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let e: f64 = zeeman_half
                .iter()
                .enumerate()
                .map(|(k, w)| if i >> k & 1 == 1 { *w } else { -*w })
                .sum();
            Complex64::new(e, 0.0)
        }),
    );
    let mut h = CMatrix::from_diagonal(&diag);
    for c in layout.active_couplings() {
        let coupling = heisenberg(register, register.electron(c.electron)?, register.nucleus(c.site)?)?;
        h += coupling.matrix() * Complex64::new(params.hyperfine_at(c.site), 0.0);
    }
    Ok(HermitianOperator::from_matrix_unchecked(h, "H"))
}

/// H_B alone, electrons idle (unbound) at their current sites.
pub fn zeeman_hamiltonian(layout: &DeviceLayout, params: &PhysicalParams) -> Result<HermitianOperator> {
    build_hamiltonian(&layout.register(), &layout.deactivate(), params).map(|h| h.with_label("H_B"))
}

/// H_A for the given couplings, independent of electron positions.
pub fn hyperfine_hamiltonian(
    register: &SpinRegister,
    couplings: &[Coupling],
    params: &PhysicalParams,
) -> Result<HermitianOperator> {
    let dim = register.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for c in couplings {
        let coupling = heisenberg(register, register.electron(c.electron)?, register.nucleus(c.site)?)?;
        h += coupling.matrix() * Complex64::new(params.hyperfine_at(c.site), 0.0);
    }
    Ok(HermitianOperator::from_matrix_unchecked(h, "H_A"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::total_sigma_z;

    #[test]
    fn derived_clock_matches_published_values() {
        let p = PhysicalParams::nominal();
        // h/4A with CODATA h; the published 8.50847 ns differs by 7e-6
        assert!((p.t_a_ns() / 8.50847 - 1.0).abs() < 1e-5);
        assert!((p.clock_ghz / 11.2829 - 1.0).abs() < 1e-5);
        assert!((p.field_mt / 1.57171 - 1.0).abs() < 2e-3);
        assert!((p.clock_ghz * p.t_a_ns() - 96.0).abs() < 1e-12);
        assert!((p.t_b_ns() * p.clock_ghz - 256.0).abs() < 1e-9);
    }

    #[test]
    fn nuclear_moment_from_gyromagnetic_ratio() {
        assert!((P31_NUCLEAR_NEV_PER_MT - 0.0712782).abs() < 1e-7);
    }

    #[test]
    fn derive_rejects_bad_inputs() {
        assert!(PhysicalParams::derive_clock(-1.0, 2.0, 0.07, 96, 256).is_err());
        assert!(PhysicalParams::derive_clock(121.0, 2.0, 0.07, 96, 0).is_err());
        let mut p = PhysicalParams::nominal();
        p.dt_cycles = 3;
        assert!(p.validate().is_err());
        p.dt_cycles = 256;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rederiving_from_own_clock_is_exact() {
        let p = PhysicalParams::nominal();
        let b = PhysicalParams::resonant_field(p.clock_ghz, p.g_e_interface, p.gn_mun_nev_per_mt, 256);
        assert_eq!(b, p.field_mt);
        let mut q = p.clone();
        q.field_mt = b;
        assert_eq!(q.delta_e_r(), p.delta_e_r());
        assert_eq!(q.delta_e_e(q.g_e_donor), p.delta_e_e(p.g_e_donor));
    }

    #[test]
    fn zero_field_no_coupling_is_zero() {
        let mut p = PhysicalParams::nominal();
        p.field_mt = 0.0;
        let layout = DeviceLayout::single_pair();
        let h = build_hamiltonian(&layout.register(), &layout, &p).unwrap();
        assert!(h.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn coupled_pair_at_zero_field() {
        let mut p = PhysicalParams::nominal();
        p.field_mt = 0.0;
        let layout = DeviceLayout::single_pair()
            .activate(&[Coupling::new(0, 0)])
            .unwrap();
        let ev = build_hamiltonian(&layout.register(), &layout, &p)
            .unwrap()
            .eigenvalues();
        let a = p.hyperfine_nev;
        for (x, y) in ev.iter().zip([-3.0 * a, a, a, a]) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn uncoupled_gap_is_delta_e_r() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::single_pair();
        let reg = layout.register();
        let h = build_hamiltonian(&reg, &layout, &p).unwrap();
        assert!(h.is_diagonal(0.0));
        let up_down = reg.basis_index(&[0]).unwrap();
        let down_up = reg.basis_index(&[1]).unwrap();
        let gap = h.matrix()[(up_down, up_down)].re - h.matrix()[(down_up, down_up)].re;
        assert!((gap - p.delta_e_r()).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_conserves_jz() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::two_qubit()
            .apply_shuttle(1, 2)
            .unwrap()
            .apply_shuttle(0, 1)
            .unwrap()
            .activate(&[Coupling::new(0, 1)])
            .unwrap();
        let reg = layout.register();
        let h = build_hamiltonian(&reg, &layout, &p).unwrap();
        assert!(h.commutator_norm(&total_sigma_z(&reg)) < 1e-12);
    }

    #[test]
    fn shuttle_rules() {
        let two = DeviceLayout::home(2, 1).unwrap();
        let moved = two.apply_shuttle(0, 1).unwrap();
        assert_eq!(moved.site_of(0), Some(1));
        moved.validate().unwrap();

        let full = DeviceLayout::home(2, 2).unwrap();
        assert!(matches!(full.apply_shuttle(0, 1), Err(Error::TargetOccupied(1))));

        let coupled = DeviceLayout::home(2, 1)
            .unwrap()
            .activate(&[Coupling::new(0, 0)])
            .unwrap();
        assert!(matches!(coupled.apply_shuttle(0, 1), Err(Error::ElectronCoupled(0))));
    }

    #[test]
    fn displace_then_shuttle_makes_cross_coupling_available() {
        let layout = DeviceLayout::home(3, 2).unwrap();
        assert!(layout.activate(&[Coupling::new(0, 1)]).is_err());
        let layout = layout.apply_shuttle(1, 2).unwrap().apply_shuttle(0, 1).unwrap();
        let active = layout.activate(&[Coupling::new(0, 1)]).unwrap();
        assert!(active.electrons()[0].bound);
        assert!(!active.electrons()[1].bound);
    }

    #[test]
    fn layout_invariants() {
        assert!(DeviceLayout::new(2, &[0, 0]).is_err());
        assert!(DeviceLayout::new(1, &[0, 1]).is_err());
        assert!(DeviceLayout::new(2, &[3]).is_err());
        let l = DeviceLayout::home(2, 2).unwrap();
        assert!(l.activate(&[Coupling::new(0, 0), Coupling::new(0, 1)]).is_err());
        assert!(l.activate_sites(&[0, 1]).is_ok());
        assert!(DeviceLayout::home(3, 2).unwrap().activate_sites(&[2]).is_err());
    }

    #[test]
    fn field_multiple_keeps_resonance() {
        let p = PhysicalParams::nominal();
        let q = p.with_field_multiple(2).unwrap();
        assert_eq!(q.cycles_per_tb, 128);
        assert!((q.t_b_ns() * q.clock_ghz - 128.0).abs() < 1e-9);
        assert!(p.with_field_multiple(3).is_err());
    }
}
