//! Propagators, ideal pulses, resonant hyperfine stepping and bit-train
//! execution.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::device::{
    build_hamiltonian, hyperfine_hamiltonian, zeeman_hamiltonian, Coupling, DeviceLayout,
    PhysicalParams, HBAR_NEV_NS,
};
use crate::error::{Error, Result};
use crate::spinspace::{
    hermitian_deviation, CMatrix, DensityState, HermitianOperator, SpinRegister, SpinState,
};

const UNITARY_TOL: f64 = 1e-10;
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct UnitaryOperator {
    matrix: CMatrix,
    label: String,
}

pub(crate) fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let prod = m * m.adjoint();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
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

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Max elementwise deviation of U·U† from I.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    /// `later · self`: apply `self` first.
    pub fn then(&self, later: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator {
            matrix: &later.matrix * &self.matrix,
            label: format!("{}.{}", later.label, self.label),
        }
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator {
            matrix: self.matrix.adjoint(),
            label: format!("({})^+", self.label),
        }
    }

    pub fn apply(&self, state: &SpinState) -> SpinState {
        SpinState::from_vector_unchecked(&self.matrix * state.amplitudes())
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }
}

/// exp(−iHt/ħ) by Hermitian eigendecomposition.
pub fn exact_propagator(h: &HermitianOperator, t_ns: f64) -> Result<UnitaryOperator> {
    if !(t_ns >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative evolution time {t_ns}")));
    }
    let scale = h.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(h.matrix());
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    if t_ns == 0.0 {
        return Ok(UnitaryOperator::identity(h.dim()).with_label("exp(0)"));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let v = &eig.eigenvectors;
    let phases = eig
        .eigenvalues
        .map(|lambda| Complex64::from_polar(1.0, -lambda * t_ns / HBAR_NEV_NS));
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Ok(UnitaryOperator::from_matrix_unchecked(
        vd * v.adjoint(),
        format!("exp(-i {} t)", h.label()),
    ))
}

impl UnitaryOperator {
    fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Pulse generator: the global field, or a set of switched-on couplings.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    Field,
    Hyperfine(Vec<Coupling>),
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Generator::Field => write!(f, "B"),
            Generator::Hyperfine(cs) => {
                write!(f, "A")?;
                for (k, c) in cs.iter().enumerate() {
                    let sep = if k == 0 { "[" } else { "+" };
                    write!(f, "{sep}e{}s{}", c.electron, c.site)?;
                }
                write!(f, "]")
            }
        }
    }
}

/// (B,φ) = exp(−i H_B φ T_B/h), (A,θ) = exp(−i H_A θ T_A/h).
///
/// Hyperfine pulses use only the coupling term, with no field; this is the
/// idealization resonant stepping approximates.
pub fn ideal_pulse(
    layout: &DeviceLayout,
    generator: &Generator,
    angle: f64,
    params: &PhysicalParams,
) -> Result<UnitaryOperator> {
    if !(-GRID_TOL..TAU + GRID_TOL).contains(&angle) {
        return Err(Error::InvalidArgument(format!(
            "pulse angle {angle} outside [0, 2pi)"
        )));
    }
    let angle = angle.max(0.0);
    let (h, period) = match generator {
        Generator::Field => (zeeman_hamiltonian(layout, params)?, params.t_b_ns()),
        Generator::Hyperfine(couplings) => (
            hyperfine_hamiltonian(&layout.register(), couplings, params)?,
            params.t_a_ns(),
        ),
    };
    let u = exact_propagator(&h, angle * period / TAU)?;
    Ok(u.with_label(format!("({generator},{angle:.6})")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrainEvent {
    /// `cycles` clock cycles with the A-gates of `sites_on` switched on.
    Segment { cycles: u64, sites_on: Vec<usize> },
    /// Instantaneous coherent move of an electron to a donor site.
    Shuttle { electron: usize, site: usize },
}

/// Clock-cycle schedule of A-gate segments and shuttle events.
#[derive(Clone, Debug, PartialEq)]
pub struct BitTrain {
    clock_ghz: f64,
    events: Vec<TrainEvent>,
}

impl BitTrain {
    pub fn new(clock_ghz: f64) -> Self {
        Self {
            clock_ghz,
            events: Vec::new(),
        }
    }

    pub fn from_events(clock_ghz: f64, events: Vec<TrainEvent>) -> Result<Self> {
        let mut train = Self::new(clock_ghz);
        for ev in events {
            train.push(ev)?;
        }
        Ok(train)
    }

    pub fn clock_ghz(&self) -> f64 {
        self.clock_ghz
    }

    pub fn events(&self) -> &[TrainEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, event: TrainEvent) -> Result<()> {
        if let TrainEvent::Segment { cycles, sites_on } = &event {
            if *cycles == 0 {
                return Err(Error::InvalidTrain("segment of zero cycles".into()));
            }
            let mut sorted = sites_on.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != sites_on.len() {
                return Err(Error::InvalidTrain("repeated site in segment".into()));
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub(crate) fn push_segment(&mut self, cycles: u64, sites_on: Vec<usize>) {
        if cycles > 0 {
            self.events.push(TrainEvent::Segment { cycles, sites_on });
        }
    }

    pub fn append(&mut self, other: &BitTrain) {
        self.events.extend(other.events.iter().cloned());
    }

    pub fn total_cycles(&self) -> u64 {
        self.events
            .iter()
            .map(|e| match e {
                TrainEvent::Segment { cycles, .. } => *cycles,
                TrainEvent::Shuttle { .. } => 0,
            })
            .sum()
    }

    pub fn duration_ns(&self) -> f64 {
        self.total_cycles() as f64 / self.clock_ghz
    }

    /// Number of segments with at least one A-gate on.
    pub fn on_segments(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TrainEvent::Segment { sites_on, .. } if !sites_on.is_empty()))
            .count()
    }

    /// Coalesces adjacent all-off segments; durations and dynamics are
    /// unchanged.
    pub fn merge_waits(&self) -> BitTrain {
        let mut events: Vec<TrainEvent> = Vec::with_capacity(self.events.len());
        for ev in &self.events {
            if let (
                Some(TrainEvent::Segment {
                    cycles: prev,
                    sites_on: prev_sites,
                }),
                TrainEvent::Segment { cycles, sites_on },
            ) = (events.last_mut(), ev)
            {
                if prev_sites.is_empty() && sites_on.is_empty() {
                    *prev += cycles;
                    continue;
                }
            }
            events.push(ev.clone());
        }
        BitTrain {
            clock_ghz: self.clock_ghz,
            events,
        }
    }

    /// Walks the train against `layout`, returning the final layout.
    pub fn validate(&self, layout: &DeviceLayout) -> Result<DeviceLayout> {
        let mut current = layout.deactivate();
        for ev in &self.events {
            match ev {
                TrainEvent::Segment { sites_on, .. } => {
                    current.activate_sites(sites_on)?;
                }
                TrainEvent::Shuttle { electron, site } => {
                    current = current.apply_shuttle(*electron, *site)?;
                }
            }
        }
        Ok(current)
    }
}

/// Resonant stepping where the A-gate of each listed site is on for its
/// own number of steps (the first `steps` of them).
///
/// Layout: a wait of T_B − Δt/2, then per step Δt on followed by a wait of
/// T_B − Δt (the last one T_B − Δt/2). The waits are the time-reversed
/// half-steps of magnetic evolution, up to per-sector phases.
pub fn stepped_train(site_steps: &[(usize, u64)], params: &PhysicalParams) -> Result<BitTrain> {
    params.validate()?;
    let steps = site_steps.iter().map(|&(_, n)| n).max().unwrap_or(0);
    if steps == 0 {
        return Err(Error::InvalidTrain("resonant stepping needs at least one step".into()));
    }
    let dt = params.dt_cycles;
    let tb = params.cycles_per_tb;
    let mut train = BitTrain::new(params.clock_ghz);
    train.push_segment(tb - dt / 2, vec![]);
    for k in 0..steps {
        let mut on: Vec<usize> = site_steps
            .iter()
            .filter(|&&(_, n)| n > k)
            .map(|&(s, _)| s)
            .collect();
        on.sort_unstable();
        train.push_segment(dt, on);
        let wait = if k + 1 == steps { tb - dt / 2 } else { tb - dt };
        train.push_segment(wait, vec![]);
    }
    Ok(train)
}

/// Step count for hyperfine angle θ: θ/2π · cycles_per_TA/dt_cycles.
pub fn hyperfine_steps(angle: f64, params: &PhysicalParams) -> Result<u64> {
    let exact = angle / TAU * params.cycles_per_ta as f64 / params.dt_cycles as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() > GRID_TOL * exact.abs().max(1.0) || rounded < 0.0 {
        return Err(Error::OffGrid {
            angle,
            step: TAU * params.dt_cycles as f64 / params.cycles_per_ta as f64,
        });
    }
    Ok(rounded as u64)
}

/// Bit train approximating (A,θ) on `couplings` by resonant stepping.
pub fn resonant_step_train(couplings: &[Coupling], angle: f64, params: &PhysicalParams) -> Result<BitTrain> {
    params.validate()?;
    let steps = hyperfine_steps(angle, params)?;
    if steps == 0 {
        return Err(Error::OffGrid {
            angle,
            step: TAU * params.dt_cycles as f64 / params.cycles_per_ta as f64,
        });
    }
    let site_steps: Vec<(usize, u64)> = couplings.iter().map(|c| (c.site, steps)).collect();
    stepped_train(&site_steps, params)
}

/// Anything a unitary can act on.
pub trait Propagate {
    fn dim(&self) -> usize;
    fn propagate(&mut self, u: &UnitaryOperator);
}

impl Propagate for SpinState {
    fn dim(&self) -> usize {
        SpinState::dim(self)
    }

    fn propagate(&mut self, u: &UnitaryOperator) {
        let next = u.matrix() * self.amplitudes();
        *self.amplitudes_mut() = next;
    }
}

impl Propagate for DensityState {
    fn dim(&self) -> usize {
        DensityState::dim(self)
    }

    fn propagate(&mut self, u: &UnitaryOperator) {
        let next = u.matrix() * self.matrix() * u.matrix().adjoint();
        *self.matrix_mut() = next;
    }
}

impl Propagate for UnitaryOperator {
    fn dim(&self) -> usize {
        UnitaryOperator::dim(self)
    }

    fn propagate(&mut self, u: &UnitaryOperator) {
        self.matrix = u.matrix() * &self.matrix;
    }
}

#[derive(Clone, Debug)]
pub struct Execution<S> {
    pub state: S,
    pub layout: DeviceLayout,
    pub total_cycles: u64,
}

type SegmentKey = (u64, Vec<usize>, Vec<usize>);

/// Runs `train` segment by segment under the exact Hamiltonian of each
/// segment's layout. Shuttles only update the layout.
pub fn execute<S: Propagate + Clone>(
    state: &S,
    train: &BitTrain,
    layout: &DeviceLayout,
    params: &PhysicalParams,
) -> Result<Execution<S>> {
    let register: SpinRegister = layout.register();
    if state.dim() != register.dim() {
        return Err(Error::DimensionMismatch {
            expected: register.dim(),
            got: state.dim(),
        });
    }
    // the train's own clock reference is informational; physics uses params
    let mut cache: HashMap<SegmentKey, UnitaryOperator> = HashMap::new();
    let mut current = layout.deactivate();
    let mut out = state.clone();
    for ev in train.events() {
        match ev {
            TrainEvent::Segment { cycles, sites_on } => {
                let key = (*cycles, sites_on.clone(), current.positions());
                if !cache.contains_key(&key) {
                    let seg_layout = current.activate_sites(sites_on)?;
                    let h = build_hamiltonian(&register, &seg_layout, params)?;
                    let u = exact_propagator(&h, params.cycles_to_ns(*cycles))?;
                    cache.insert(key.clone(), u);
                }
                out.propagate(&cache[&key]);
            }
            TrainEvent::Shuttle { electron, site } => {
                current = current.apply_shuttle(*electron, *site)?;
            }
        }
    }
    Ok(Execution {
        state: out,
        layout: current,
        total_cycles: train.total_cycles(),
    })
}

/// Full unitary realized by `train`.
pub fn train_unitary(
    train: &BitTrain,
    layout: &DeviceLayout,
    params: &PhysicalParams,
) -> Result<UnitaryOperator> {
    let id = UnitaryOperator::identity(layout.register().dim());
    Ok(execute(&id, train, layout, params)?.state.with_label("train"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::heisenberg;
    use std::f64::consts::PI;

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_time_is_identity() {
        let reg = SpinRegister::new(1, 1);
        let h = heisenberg(&reg, 0, 1).unwrap();
        let u = exact_propagator(&h, 0.0).unwrap();
        assert_eq!(u.matrix(), &CMatrix::identity(4, 4));
        assert!(exact_propagator(&h, -1.0).is_err());
    }

    #[test]
    fn full_hyperfine_period_is_global_phase() {
        // singlet and triplet phases differ by exactly 2π after T_A
        let p = PhysicalParams::nominal();
        let reg = SpinRegister::new(1, 1);
        let h = heisenberg(&reg, 0, 1).unwrap().scaled(p.hyperfine_nev);
        let u = exact_propagator(&h, p.t_a_ns()).unwrap();
        let expected = CMatrix::identity(4, 4) * Complex64::from_polar(1.0, -PI / 2.0);
        assert!(max_diff(u.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn spin_swap_pulse() {
        // (A,π)|↑_e↓_n⟩ = e^{−iπ/4}|↓_e↑_n⟩
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::single_pair();
        let reg = layout.register();
        let u = ideal_pulse(&layout, &Generator::Hyperfine(vec![Coupling::new(0, 0)]), PI, &p).unwrap();
        let out = u.apply(&SpinState::basis(4, reg.basis_index(&[0]).unwrap()));
        let target = reg.basis_index(&[1]).unwrap();
        assert!((out.amplitudes()[target] - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-12);
    }

    #[test]
    fn field_full_period_is_sector_phase() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::two_qubit();
        let reg = layout.register();
        let u = ideal_pulse(&layout, &Generator::Field, TAU - 1e-15, &p).unwrap();
        // diagonal, with one phase per sector
        let m = u.matrix();
        let mut sector_phase = vec![None; reg.n_spins() + 1];
        for i in 0..reg.dim() {
            for j in 0..reg.dim() {
                if i != j {
                    assert!(m[(i, j)].norm() < 1e-12);
                }
            }
            let phase = *sector_phase[reg.ups(i)].get_or_insert(m[(i, i)]);
            assert!((m[(i, i)] - phase).norm() < 1e-9, "state {i}");
        }
        let zero = ideal_pulse(&layout, &Generator::Hyperfine(vec![Coupling::new(0, 0)]), 0.0, &p).unwrap();
        assert_eq!(zero.matrix(), &CMatrix::identity(reg.dim(), reg.dim()));
    }

    #[test]
    fn swap_train_shape() {
        let p = PhysicalParams::nominal();
        let train = resonant_step_train(&[Coupling::new(0, 0)], PI, &p).unwrap();
        assert_eq!(train.on_segments(), 24);
        assert_eq!(train.total_cycles(), 6400);
        assert!((train.duration_ns() / 1000.0 - 0.5672).abs() < 1e-4);
        let half = resonant_step_train(&[Coupling::new(0, 0)], PI / 2.0, &p).unwrap();
        assert_eq!(half.on_segments(), 12);
        assert_eq!(half.total_cycles(), 3328);
        // every on segment is dt long, followed by a wait to the next period
        let events = train.events();
        assert_eq!(events[0], TrainEvent::Segment { cycles: 255, sites_on: vec![] });
        assert_eq!(events[1], TrainEvent::Segment { cycles: 2, sites_on: vec![0] });
        assert_eq!(events[2], TrainEvent::Segment { cycles: 254, sites_on: vec![] });
        assert_eq!(events.last(), Some(&TrainEvent::Segment { cycles: 255, sites_on: vec![] }));
    }

    #[test]
    fn off_grid_angle_rejected() {
        let p = PhysicalParams::nominal();
        assert!(matches!(
            resonant_step_train(&[Coupling::new(0, 0)], 0.1, &p),
            Err(Error::OffGrid { .. })
        ));
        assert!(resonant_step_train(&[Coupling::new(0, 0)], 0.0, &p).is_err());
    }

    #[test]
    fn merge_waits_keeps_totals() {
        let p = PhysicalParams::nominal();
        let mut train = resonant_step_train(&[Coupling::new(0, 0)], PI / 2.0, &p).unwrap();
        train.push_segment(64, vec![]);
        let merged = train.merge_waits();
        assert_eq!(merged.total_cycles(), train.total_cycles());
        assert!(merged.events().len() < train.events().len());
        let layout = DeviceLayout::single_pair();
        let u1 = train_unitary(&train, &layout, &p).unwrap();
        let u2 = train_unitary(&merged, &layout, &p).unwrap();
        assert!(max_diff(u1.matrix(), u2.matrix()) < 1e-10);
    }

    #[test]
    fn empty_train_leaves_state() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::single_pair();
        let psi = SpinState::basis(4, 1);
        let out = execute(&psi, &BitTrain::new(p.clock_ghz), &layout, &p).unwrap();
        assert_eq!(out.state, psi);
        assert_eq!(out.total_cycles, 0);
    }

    #[test]
    fn execute_rejects_bad_trains() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::home(2, 1).unwrap();
        let psi = SpinState::basis(8, 0);
        let mut train = BitTrain::new(p.clock_ghz);
        train.push_segment(2, vec![1]);
        assert!(execute(&psi, &train, &layout, &p).is_err());
        assert!(execute(&SpinState::basis(4, 0), &BitTrain::new(p.clock_ghz), &layout, &p).is_err());
        assert!(BitTrain::from_events(1.0, vec![TrainEvent::Segment { cycles: 0, sites_on: vec![] }]).is_err());
    }
}
