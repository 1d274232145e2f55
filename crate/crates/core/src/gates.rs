//! Pulse algebra, compilation to bit trains, and the gate library.
//!
//! A [`PulseSeq`] is stored in application order (first pulse applied
//! first). Gate formulas written as operator products are entered with
//! [`PulseSeq::from_product`], which reverses them.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::device::{Coupling, DeviceLayout, PhysicalParams};
use crate::error::{Error, Result};
use crate::evolution::{hyperfine_steps, ideal_pulse, stepped_train, BitTrain, Generator, TrainEvent, UnitaryOperator};

const GRID_TOL: f64 = 1e-9;

/// An electron and the donor nucleus it is paired with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LogicalQubit {
    pub electron: usize,
    pub site: usize,
}

impl LogicalQubit {
    pub fn new(electron: usize, site: usize) -> Self {
        Self { electron, site }
    }

    pub fn coupling(&self) -> Coupling {
        Coupling::new(self.electron, self.site)
    }

    /// Every electron paired with the site it currently occupies.
    pub fn from_layout(layout: &DeviceLayout) -> Vec<LogicalQubit> {
        layout
            .positions()
            .into_iter()
            .enumerate()
            .map(|(e, s)| LogicalQubit::new(e, s))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    pub generator: Generator,
    pub angle: f64,
}

fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if TAU - a < GRID_TOL {
        0.0
    } else {
        a
    }
}

impl Pulse {
    pub fn field(angle: f64) -> Self {
        Self {
            generator: Generator::Field,
            angle: wrap_angle(angle),
        }
    }

    pub fn hyperfine(couplings: &[Coupling], angle: f64) -> Self {
        Self {
            generator: Generator::Hyperfine(couplings.to_vec()),
            angle: wrap_angle(angle),
        }
    }

    /// Hardware-native inverse: the complementary angle 2π − θ.
    pub fn adjoint(&self) -> Self {
        Self {
            generator: self.generator.clone(),
            angle: wrap_angle(TAU - self.angle),
        }
    }
}

impl fmt::Display for Pulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{:.4}pi)", self.generator, self.angle / PI)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSeq {
    pulses: Vec<Pulse>,
}

impl PulseSeq {
    pub fn from_applied(pulses: Vec<Pulse>) -> Self {
        Self { pulses }
    }

    /// Operator-product order: the rightmost pulse is applied first.
    pub fn from_product(mut pulses: Vec<Pulse>) -> Self {
        pulses.reverse();
        Self { pulses }
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// `self` then `next`.
    pub fn then(&self, next: &PulseSeq) -> PulseSeq {
        let mut pulses = self.pulses.clone();
        pulses.extend(next.pulses.iter().cloned());
        PulseSeq { pulses }
    }

    /// Reverse order, complementary angles.
    pub fn adjoint(&self) -> PulseSeq {
        PulseSeq {
            pulses: self.pulses.iter().rev().map(Pulse::adjoint).collect(),
        }
    }

    /// Hyperfine angles on the 2π·dt/cycles_per_TA grid, field angles on the
    /// 2π/cycles_per_TB grid.
    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        for p in &self.pulses {
            match p.generator {
                Generator::Field => {
                    field_cycles(p.angle, params)?;
                }
                Generator::Hyperfine(_) => {
                    hyperfine_steps(p.angle, params)?;
                }
            }
        }
        Ok(())
    }

    pub fn hyperfine_angles(&self) -> Vec<f64> {
        self.pulses
            .iter()
            .filter(|p| matches!(p.generator, Generator::Hyperfine(_)))
            .map(|p| p.angle)
            .collect()
    }
}

impl fmt::Display for PulseSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.pulses.iter().enumerate() {
            if k > 0 {
                write!(f, " ; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

fn field_cycles(angle: f64, params: &PhysicalParams) -> Result<u64> {
    let exact = angle / TAU * params.cycles_per_tb as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() > GRID_TOL * exact.abs().max(1.0) {
        return Err(Error::OffGrid {
            angle,
            step: TAU / params.cycles_per_tb as f64,
        });
    }
    Ok(rounded as u64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Run consecutive hyperfine pulses as one resonant train, each coupling
    /// keeping its own accumulated angle mod 2π. Couplings act on disjoint
    /// spins, so they commute and (A,2π) is a global phase.
    pub fuse_hyperfine: bool,
    /// Coalesce adjacent all-off segments afterwards.
    pub merge_waits: bool,
    /// All-off cycles spent per shuttle.
    pub shuttle_cycles: u64,
    /// Shuttle electrons back to their starting sites at the end.
    pub return_home: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            fuse_hyperfine: true,
            merge_waits: false,
            shuttle_cycles: 0,
            return_home: true,
        }
    }
}

impl CompileOptions {
    pub fn literal() -> Self {
        Self {
            fuse_hyperfine: false,
            ..Self::default()
        }
    }
}

enum Block {
    Field(u64),
    Hyperfine(BTreeMap<Coupling, u64>),
}

fn compatible(existing: &BTreeMap<Coupling, u64>, extra: &[Coupling]) -> bool {
    let mut by_electron: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_site: BTreeMap<usize, usize> = BTreeMap::new();
    existing.keys().chain(extra.iter()).all(|c| {
        let e_ok = *by_electron.entry(c.electron).or_insert(c.site) == c.site;
        let s_ok = *by_site.entry(c.site).or_insert(c.electron) == c.electron;
        e_ok && s_ok
    })
}

/// Moves that bring every electron in `needed` to its site, using free
/// sites to break exchanges.
pub fn plan_shuttles(layout: &DeviceLayout, needed: &[Coupling]) -> Result<Vec<Coupling>> {
    let targets: BTreeSet<usize> = needed.iter().map(|c| c.site).collect();
    let mut current = layout.deactivate();
    let mut moves = Vec::new();
    for _ in 0..4 * (layout.n_sites() + 1) {
        let pending: Vec<Coupling> = needed
            .iter()
            .copied()
            .filter(|c| current.site_of(c.electron) != Some(c.site))
            .collect();
        let Some(first) = pending.first() else {
            return Ok(moves);
        };
        if let Some(c) = pending.iter().find(|c| current.electron_at(c.site).is_none()) {
            current = current.apply_shuttle(c.electron, c.site)?;
            moves.push(*c);
            continue;
        }
        let occupant = current.electron_at(first.site).expect("blocked target is occupied");
        let spare = (0..layout.n_sites())
            .find(|s| current.electron_at(*s).is_none() && !targets.contains(s))
            .ok_or_else(|| {
                Error::ShuttlePlan(format!(
                    "no free site to displace electron {occupant} from site {}",
                    first.site
                ))
            })?;
        current = current.apply_shuttle(occupant, spare)?;
        moves.push(Coupling::new(occupant, spare));
    }
    Err(Error::ShuttlePlan("shuttle planning did not converge".into()))
}

fn emit_moves(
    train: &mut BitTrain,
    layout: &mut DeviceLayout,
    moves: &[Coupling],
    shuttle_cycles: u64,
) -> Result<()> {
    for m in moves {
        *layout = layout.apply_shuttle(m.electron, m.site)?;
        train.push(TrainEvent::Shuttle {
            electron: m.electron,
            site: m.site,
        })?;
        train.push_segment(shuttle_cycles, vec![]);
    }
    Ok(())
}

/// Compiles `seq` into a bit train for `layout`: (B,φ) becomes one all-off
/// segment of φ/2π·cycles_per_TB cycles, hyperfine pulses become resonant
/// stepping trains, and shuttles are inserted wherever a coupling needs an
/// electron somewhere else.
pub fn compile(
    seq: &PulseSeq,
    layout: &DeviceLayout,
    params: &PhysicalParams,
    options: &CompileOptions,
) -> Result<BitTrain> {
    params.validate()?;
    seq.validate(params)?;
    let full_turn = params.steps_per_ta();

    let mut blocks: Vec<Block> = Vec::new();
    for pulse in seq.pulses() {
        match &pulse.generator {
            Generator::Field => blocks.push(Block::Field(field_cycles(pulse.angle, params)?)),
            Generator::Hyperfine(couplings) => {
                let steps = hyperfine_steps(pulse.angle, params)?;
                let fusable = options.fuse_hyperfine
                    && matches!(blocks.last(), Some(Block::Hyperfine(m)) if compatible(m, couplings));
                if !fusable {
                    if !compatible(&BTreeMap::new(), couplings) {
                        return Err(Error::Layout(format!(
                            "inconsistent coupling set {}",
                            pulse.generator
                        )));
                    }
                    blocks.push(Block::Hyperfine(BTreeMap::new()));
                }
                let Some(Block::Hyperfine(map)) = blocks.last_mut() else {
                    unreachable!()
                };
                for c in couplings {
                    *map.entry(*c).or_insert(0) += steps;
                }
            }
        }
    }

    let mut train = BitTrain::new(params.clock_ghz);
    let mut current = layout.deactivate();
    for block in blocks {
        match block {
            Block::Field(cycles) => train.push_segment(cycles, vec![]),
            Block::Hyperfine(map) => {
                let active: Vec<(Coupling, u64)> = map
                    .into_iter()
                    .map(|(c, n)| (c, if options.fuse_hyperfine { n % full_turn } else { n }))
                    .filter(|&(_, n)| n > 0)
                    .collect();
                if active.is_empty() {
                    continue;
                }
                let needed: Vec<Coupling> = active.iter().map(|&(c, _)| c).collect();
                let moves = plan_shuttles(&current, &needed)?;
                emit_moves(&mut train, &mut current, &moves, options.shuttle_cycles)?;
                let site_steps: Vec<(usize, u64)> = active.iter().map(|&(c, n)| (c.site, n)).collect();
                train.append(&stepped_train(&site_steps, params)?);
            }
        }
    }
    if options.return_home {
        let home: Vec<Coupling> = layout
            .positions()
            .into_iter()
            .enumerate()
            .map(|(e, s)| Coupling::new(e, s))
            .collect();
        let moves = plan_shuttles(&current, &home)?;
        emit_moves(&mut train, &mut current, &moves, options.shuttle_cycles)?;
    }
    train.validate(layout)?;
    Ok(if options.merge_waits {
        train.merge_waits()
    } else {
        train
    })
}

/// Product of ideal pulses.
pub fn ideal_unitary(seq: &PulseSeq, layout: &DeviceLayout, params: &PhysicalParams) -> Result<UnitaryOperator> {
    let mut u = UnitaryOperator::identity(layout.register().dim());
    for p in seq.pulses() {
        u = u.then(&ideal_pulse(layout, &p.generator, p.angle, params)?);
    }
    Ok(u)
}

/// (A,π) between a qubit's electron and its own nucleus.
pub fn swap_en(q: LogicalQubit) -> PulseSeq {
    PulseSeq::from_applied(vec![Pulse::hyperfine(&[q.coupling()], PI)])
}

fn cross(a: LogicalQubit, b: LogicalQubit) -> Coupling {
    Coupling::new(a.electron, b.site)
}

fn require_distinct(q1: LogicalQubit, q2: LogicalQubit) -> Result<()> {
    if q1.electron == q2.electron || q1.site == q2.site {
        return Err(Error::InvalidArgument("qubits must be distinct".into()));
    }
    Ok(())
}

/// N = (A₁₂+A₂₁,3π/2)(B,π/2)(A₂₁,π)(B,3π/2)(A₁₂+A₂₁,π/2), where A₁₂
/// couples q1's electron to q2's nucleus.
pub fn entangler_n(q1: LogicalQubit, q2: LogicalQubit) -> Result<PulseSeq> {
    require_distinct(q1, q2)?;
    let both = [cross(q1, q2), cross(q2, q1)];
    Ok(PulseSeq::from_product(vec![
        Pulse::hyperfine(&both, 3.0 * FRAC_PI_2),
        Pulse::field(FRAC_PI_2),
        Pulse::hyperfine(&[cross(q2, q1)], PI),
        Pulse::field(3.0 * FRAC_PI_2),
        Pulse::hyperfine(&both, FRAC_PI_2),
    ]))
}

/// L₁⊗Z₂ = (B,3π/2)(A₁₁+A₂₂,π)(A₁₁,π/2)(B,π/2).
pub fn l1_z2(q1: LogicalQubit, q2: LogicalQubit) -> Result<PulseSeq> {
    require_distinct(q1, q2)?;
    Ok(PulseSeq::from_product(vec![
        Pulse::field(3.0 * FRAC_PI_2),
        Pulse::hyperfine(&[q1.coupling(), q2.coupling()], PI),
        Pulse::hyperfine(&[q1.coupling()], FRAC_PI_2),
        Pulse::field(FRAC_PI_2),
    ]))
}

/// CNOT = (L₁⊗Z₂)·N·(L₁⊗Z₂)†.
pub fn cnot(control: LogicalQubit, target: LogicalQubit) -> Result<PulseSeq> {
    let dress = l1_z2(control, target)?;
    Ok(dress.adjoint().then(&entangler_n(control, target)?).then(&dress))
}

/// exp(−iaZ/2) in the logical basis (|0⟩ = singlet, |1⟩ = T₀).
pub fn rz(a: f64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::from_polar(1.0, -a / 2.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0, a / 2.0),
    )
}

/// exp(−ibX/2) in the logical basis.
pub fn rx(b: f64) -> Matrix2<Complex64> {
    let (c, s) = ((b / 2.0).cos(), (b / 2.0).sin());
    Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(0.0, -s),
        Complex64::new(0.0, -s),
        Complex64::new(c, 0.0),
    )
}

/// Logical action of a single-qubit pulse, up to global phase:
/// (A,θ) = Rz(−θ), (B,φ) = Rx(φ).
pub fn logical_pulse_matrix(pulse: &Pulse) -> Matrix2<Complex64> {
    match pulse.generator {
        Generator::Field => rx(pulse.angle),
        Generator::Hyperfine(_) => rz(-pulse.angle),
    }
}

/// 1 − |Tr(A†B)/2|², zero iff equal up to global phase.
pub fn phase_insensitive_infidelity(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> f64 {
    let t = (a.adjoint() * b).trace() / 2.0;
    (1.0 - t.norm_sqr()).max(0.0)
}

#[derive(Clone, Debug)]
pub struct EulerDecomposition {
    pub seq: PulseSeq,
    /// Rz(a)·Rx(b)·Rz(c) = target (up to global phase), as [c, b, a].
    pub angles: [f64; 3],
    pub exact_infidelity: f64,
    pub quantization_infidelity: f64,
    /// Largest |exact − quantized| over the hyperfine angles.
    pub max_hyperfine_rounding: f64,
}

/// Decomposes a single-qubit unitary into [(A,θ₁),(B,φ),(A,θ₂)] on `qubit`,
/// angles rounded to the compilable grid. Zero-angle pulses are dropped.
pub fn euler_decompose(
    target: &Matrix2<Complex64>,
    qubit: LogicalQubit,
    params: &PhysicalParams,
) -> Result<EulerDecomposition> {
    let gram = target.adjoint() * target;
    let dev = (gram - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::NotUnitary(dev));
    }
    let su = target / target.determinant().sqrt();
    let (u00, u10, u11) = (su[(0, 0)], su[(1, 0)], su[(1, 1)]);
    let b = 2.0 * u10.norm().atan2(u00.norm());
    let (a, c) = if u10.norm() < 1e-12 {
        (2.0 * u11.arg(), 0.0)
    } else if u00.norm() < 1e-12 {
        (2.0 * (Complex64::new(0.0, 1.0) * u10).arg(), 0.0)
    } else {
        let sum = 2.0 * u11.arg();
        let diff = 2.0 * (Complex64::new(0.0, 1.0) * u10).arg();
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    let exact = rz(a) * rx(b) * rz(c);
    let exact_infidelity = phase_insensitive_infidelity(target, &exact);

    let a_grid = TAU * params.dt_cycles as f64 / params.cycles_per_ta as f64;
    let b_grid = TAU / params.cycles_per_tb as f64;
    let snap = |x: f64, grid: f64| wrap_angle((wrap_angle(x) / grid).round() * grid);
    let theta1 = snap(-c, a_grid);
    let phi = snap(b, b_grid);
    let theta2 = snap(-a, a_grid);
    let rounding = |x: f64, q: f64| {
        let d = (wrap_angle(x) - q).abs();
        d.min(TAU - d)
    };
    let max_hyperfine_rounding = rounding(-c, theta1).max(rounding(-a, theta2));

    let mut pulses = Vec::new();
    if theta1 != 0.0 {
        pulses.push(Pulse::hyperfine(&[qubit.coupling()], theta1));
    }
    if phi != 0.0 {
        pulses.push(Pulse::field(phi));
    }
    if theta2 != 0.0 {
        pulses.push(Pulse::hyperfine(&[qubit.coupling()], theta2));
    }
    let seq = PulseSeq::from_applied(pulses);
    let quantized = seq
        .pulses()
        .iter()
        .fold(Matrix2::identity(), |acc, p| logical_pulse_matrix(p) * acc);
    Ok(EulerDecomposition {
        quantization_infidelity: phase_insensitive_infidelity(target, &quantized),
        seq,
        angles: [c, b, a],
        exact_infidelity,
        max_hyperfine_rounding,
    })
}

/// Library gates exposed to the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    SwapEn,
    Entangler,
    Cnot,
    Rot(Matrix2<Complex64>),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::SwapEn => "swap_en",
            GateKind::Entangler => "entangler",
            GateKind::Cnot => "cnot",
            GateKind::Rot(_) => "rot",
        }
    }

    pub fn parse(name: &str, matrix: Option<&[f64]>) -> Result<Self> {
        match name {
            "swap_en" => Ok(GateKind::SwapEn),
            "entangler" => Ok(GateKind::Entangler),
            "cnot" => Ok(GateKind::Cnot),
            "rot" => {
                let m = matrix.ok_or_else(|| Error::InvalidArgument("rot needs --matrix <8 floats>".into()))?;
                if m.len() != 8 {
                    return Err(Error::InvalidArgument(format!(
                        "rot needs 8 floats (re,im row-major), got {}",
                        m.len()
                    )));
                }
                let c = |k: usize| Complex64::new(m[2 * k], m[2 * k + 1]);
                Ok(GateKind::Rot(Matrix2::new(c(0), c(1), c(2), c(3))))
            }
            other => Err(Error::InvalidArgument(format!("unknown gate {other:?}"))),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            GateKind::Entangler | GateKind::Cnot => 2,
            _ => 1,
        }
    }
}

/// A library gate bound to a layout and to the qubits it acts on.
#[derive(Clone, Debug)]
pub struct GateSetup {
    pub kind: GateKind,
    pub seq: PulseSeq,
    pub layout: DeviceLayout,
    pub qubits: Vec<LogicalQubit>,
}

impl GateSetup {
    /// Acts on qubit 0 (and 1) of `layout`, each electron paired with the
    /// site it starts on.
    pub fn new(kind: GateKind, layout: DeviceLayout, params: &PhysicalParams) -> Result<Self> {
        let all = LogicalQubit::from_layout(&layout);
        if all.len() < kind.n_qubits() {
            return Err(Error::Layout(format!(
                "{} needs {} electrons, layout has {}",
                kind.name(),
                kind.n_qubits(),
                all.len()
            )));
        }
        let qubits = all[..kind.n_qubits()].to_vec();
        let seq = match &kind {
            GateKind::SwapEn => swap_en(qubits[0]),
            GateKind::Entangler => entangler_n(qubits[0], qubits[1])?,
            GateKind::Cnot => cnot(qubits[0], qubits[1])?,
            GateKind::Rot(m) => euler_decompose(m, qubits[0], params)?.seq,
        };
        Ok(Self {
            kind,
            seq,
            layout,
            qubits,
        })
    }

    /// Default layouts: one pair for single-qubit gates, two pairs and a
    /// spare site for two-qubit gates.
    pub fn standard(kind: GateKind, params: &PhysicalParams) -> Result<Self> {
        let layout = if kind.n_qubits() == 2 {
            DeviceLayout::two_qubit()
        } else {
            DeviceLayout::single_pair()
        };
        Self::new(kind, layout, params)
    }

    pub fn compile(&self, params: &PhysicalParams, options: &CompileOptions) -> Result<BitTrain> {
        compile(&self.seq, &self.layout, params, options)
    }

    pub fn ideal(&self, params: &PhysicalParams) -> Result<UnitaryOperator> {
        ideal_unitary(&self.seq, &self.layout, params)
    }
}
