//! Logical encoding and readout, the swap-based memory bus, singlet/triplet
//! measurement, and the initialization cascade.
//!
//! A logical qubit lives in the J_z = 0 subspace of an ordered spin pair
//! (first, second): |0⟩ = (|↑↓⟩ − |↓↑⟩)/√2 and |1⟩ = (|↑↓⟩ + |↓↑⟩)/√2,
//! where |↑↓⟩ has the first spin up.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::device::{Coupling, DeviceLayout, PhysicalParams};
use crate::error::{Error, Result};
use crate::evolution::train_unitary;
use crate::gates::{compile, ideal_unitary, CompileOptions, LogicalQubit, Pulse, PulseSeq};
use crate::spinspace::{reduced_density, swap_operator, CMatrix, CVector, DensityState, SpinRegister, SpinState, ONE, ZERO};

/// Boltzmann constant in neV/K.
pub const BOLTZMANN_NEV_PER_K: f64 = 8.617333262e4;

const NORM_TOL: f64 = 1e-10;

/// Two spins of a register, by spin index. `first` is bit 0 of pair
/// operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinPair {
    pub first: usize,
    pub second: usize,
}

impl SpinPair {
    pub fn new(first: usize, second: usize) -> Self {
        Self { first, second }
    }

    /// Electron first, nucleus second.
    pub fn of_qubit(register: &SpinRegister, q: LogicalQubit) -> Result<Self> {
        Ok(Self::new(register.electron(q.electron)?, register.nucleus(q.site)?))
    }

    fn check(&self, register: &SpinRegister) -> Result<()> {
        for s in [self.first, self.second] {
            if s >= register.n_spins() {
                return Err(Error::SpinOutOfRange {
                    index: s,
                    len: register.n_spins(),
                });
            }
        }
        if self.first == self.second {
            return Err(Error::InvalidArgument("pair spins must differ".into()));
        }
        Ok(())
    }
}

/// Amplitudes on (|↑↓⟩, |↓↑⟩) of α|0⟩ + β|1⟩.
fn pair_amplitudes(alpha: Complex64, beta: Complex64) -> (Complex64, Complex64) {
    ((alpha + beta) * FRAC_1_SQRT_2, (beta - alpha) * FRAC_1_SQRT_2)
}

fn check_logical_norm(alpha: Complex64, beta: Complex64) -> Result<()> {
    let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// Logical |0⟩ and |1⟩ as 4-vectors of a pair (bit 0 = first spin).
pub fn pair_logical_vectors() -> [CVector; 2] {
    [0, 1].map(|k| {
        let (ud, du) = if k == 0 {
            pair_amplitudes(ONE, ZERO)
        } else {
            pair_amplitudes(ZERO, ONE)
        };
        CVector::from_vec(vec![ZERO, ud, du, ZERO])
    })
}

/// α|0⟩ + β|1⟩ on a lone electron–nucleus pair.
pub fn encode_logical(alpha: Complex64, beta: Complex64) -> Result<SpinState> {
    check_logical_norm(alpha, beta)?;
    let (ud, du) = pair_amplitudes(alpha, beta);
    SpinState::new(CVector::from_vec(vec![ZERO, ud, du, ZERO]))
}

/// Product of logical states on the given pairs; every other spin is ↓.
pub fn encode_product(register: &SpinRegister, qubits: &[(SpinPair, Complex64, Complex64)]) -> Result<SpinState> {
    let mut terms: Vec<(usize, Complex64)> = vec![(0, ONE)];
    let mut used = 0usize;
    for &(pair, alpha, beta) in qubits {
        pair.check(register)?;
        check_logical_norm(alpha, beta)?;
        let mask = (1 << pair.first) | (1 << pair.second);
        if used & mask != 0 {
            return Err(Error::InvalidArgument("logical qubits share a spin".into()));
        }
        used |= mask;
        let (ud, du) = pair_amplitudes(alpha, beta);
        terms = terms
            .into_iter()
            .flat_map(|(i, c)| [(i | 1 << pair.first, c * ud), (i | 1 << pair.second, c * du)])
            .collect();
    }
    let mut amps = CVector::zeros(register.dim());
    for (i, c) in terms {
        amps[i] += c;
    }
    SpinState::new(amps)
}

/// Logical computational basis of `pairs`, first pair most significant.
pub fn logical_basis(register: &SpinRegister, pairs: &[SpinPair]) -> Result<Vec<SpinState>> {
    let k = pairs.len();
    (0..1usize << k)
        .map(|i| {
            let inputs: Vec<(SpinPair, Complex64, Complex64)> = pairs
                .iter()
                .enumerate()
                .map(|(q, &p)| {
                    if (i >> (k - 1 - q)) & 1 == 0 {
                        (p, ONE, ZERO)
                    } else {
                        (p, ZERO, ONE)
                    }
                })
                .collect();
            encode_product(register, &inputs)
        })
        .collect()
}

/// Logical basis of the qubits' own electron–nucleus pairs.
pub fn qubit_basis(layout: &DeviceLayout, qubits: &[LogicalQubit]) -> Result<Vec<SpinState>> {
    let reg = layout.register();
    let pairs = qubits
        .iter()
        .map(|&q| SpinPair::of_qubit(&reg, q))
        .collect::<Result<Vec<_>>>()?;
    logical_basis(&reg, &pairs)
}

/// Embeds a 4×4 operator on `pair` into the full register.
pub fn embed_pair_operator(register: &SpinRegister, pair: SpinPair, op: &CMatrix) -> Result<CMatrix> {
    pair.check(register)?;
    if op.nrows() != 4 || op.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: op.nrows(),
        });
    }
    let dim = register.dim();
    let mask = (1 << pair.first) | (1 << pair.second);
    let sub = |i: usize| (i >> pair.first & 1) | (i >> pair.second & 1) << 1;
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                out[(i, j)] = op[(sub(i), sub(j))];
            }
        }
    }
    Ok(out)
}

/// ρ restricted to the pair's logical subspace (2×2, unnormalized).
pub fn logical_density(register: &SpinRegister, rho: &CMatrix, pair: SpinPair) -> Result<Matrix2<Complex64>> {
    pair.check(register)?;
    let red = reduced_density(register, rho, &[pair.first, pair.second])?;
    let l = pair_logical_vectors();
    Ok(Matrix2::from_fn(|a, b| (l[a].adjoint() * &red * &l[b])[(0, 0)]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogicalReadout {
    pub alpha: Complex64,
    pub beta: Complex64,
    /// Weight outside the pair's logical subspace.
    pub leakage: f64,
}

/// Logical amplitudes of `pair`. On a two-spin register these are exact
/// overlaps. Otherwise they come from the pair's reduced state, with the
/// larger of the two amplitudes taken real and non-negative.
pub fn readout_logical(register: &SpinRegister, state: &SpinState, pair: SpinPair) -> Result<LogicalReadout> {
    pair.check(register)?;
    if state.dim() != register.dim() {
        return Err(Error::DimensionMismatch {
            expected: register.dim(),
            got: state.dim(),
        });
    }
    if register.n_spins() == 2 {
        let full = |k: usize| {
            let v = &pair_logical_vectors()[k];
            let mut out = CVector::zeros(4);
            for i in 0..4 {
                let j = (i & 1) << pair.first | (i >> 1 & 1) << pair.second;
                out[j] = v[i];
            }
            out
        };
        let alpha = (full(0).adjoint() * state.amplitudes())[(0, 0)];
        let beta = (full(1).adjoint() * state.amplitudes())[(0, 0)];
        let leakage = (1.0 - alpha.norm_sqr() - beta.norm_sqr()).clamp(0.0, 1.0);
        return Ok(LogicalReadout { alpha, beta, leakage });
    }
    let rl = logical_density(register, &state.to_density().matrix().clone(), pair)?;
    let p0 = rl[(0, 0)].re.max(0.0);
    let p1 = rl[(1, 1)].re.max(0.0);
    // the larger population is the better-conditioned pivot
    let (alpha, beta) = if p0 >= p1 && p0 > 0.0 {
        let a = p0.sqrt();
        (Complex64::new(a, 0.0), rl[(1, 0)] / a)
    } else if p1 > 0.0 {
        let b = p1.sqrt();
        (rl[(0, 1)] / b, Complex64::new(b, 0.0))
    } else {
        (ZERO, ZERO)
    };
    let leakage = (1.0 - p0 - p1).clamp(0.0, 1.0);
    Ok(LogicalReadout { alpha, beta, leakage })
}

/// ⟨ψ|ρ_L|ψ⟩ for ψ = α|0⟩ + β|1⟩ on `pair`.
pub fn logical_fidelity(
    register: &SpinRegister,
    rho: &CMatrix,
    pair: SpinPair,
    alpha: Complex64,
    beta: Complex64,
) -> Result<f64> {
    let rl = logical_density(register, rho, pair)?;
    let psi = nalgebra::Vector2::new(alpha, beta);
    Ok((psi.adjoint() * rl * psi)[(0, 0)].re)
}

/// Spin swap (A,π) between the data electron and the ancilla's nucleus.
/// Afterwards the data qubit is carried by (ancilla nucleus, data nucleus)
/// and the ancilla qubit by (ancilla electron, data electron).
pub fn memory_transfer(data: LogicalQubit, ancilla: LogicalQubit) -> Result<PulseSeq> {
    if data.electron == ancilla.electron || data.site == ancilla.site {
        return Err(Error::InvalidArgument("data and ancilla must be distinct".into()));
    }
    Ok(PulseSeq::from_applied(vec![Pulse::hyperfine(
        &[Coupling::new(data.electron, ancilla.site)],
        PI,
    )]))
}

/// Pairs holding (data, ancilla) after [`memory_transfer`].
pub fn transferred_pairs(register: &SpinRegister, data: LogicalQubit, ancilla: LogicalQubit) -> Result<(SpinPair, SpinPair)> {
    Ok((
        SpinPair::new(register.nucleus(ancilla.site)?, register.nucleus(data.site)?),
        SpinPair::new(register.electron(ancilla.electron)?, register.electron(data.electron)?),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairOutcome {
    Singlet,
    Triplet,
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome<S> {
    pub label: PairOutcome,
    pub probability: f64,
    /// `None` for a branch of zero probability.
    pub post_state: Option<S>,
}

/// States that can be projected and renormalized.
pub trait Projectable: Sized {
    /// Born probability of `p` and the collapsed state.
    fn project(&self, p: &CMatrix) -> (f64, Option<Self>);
}

impl Projectable for SpinState {
    fn project(&self, p: &CMatrix) -> (f64, Option<Self>) {
        let v = p * self.amplitudes();
        let prob = v.norm_squared();
        let post = (prob > 1e-30).then(|| SpinState::from_vector_unchecked(v / Complex64::new(prob.sqrt(), 0.0)));
        (prob, post)
    }
}

impl Projectable for DensityState {
    fn project(&self, p: &CMatrix) -> (f64, Option<Self>) {
        let r = p * self.matrix() * p;
        let prob = r.trace().re;
        let post = (prob > 1e-30).then(|| DensityState::from_matrix_unchecked(r / Complex64::new(prob, 0.0)));
        (prob, post)
    }
}

/// Projector onto the singlet of `pair`.
pub fn singlet_projector(register: &SpinRegister, pair: SpinPair) -> Result<CMatrix> {
    pair.check(register)?;
    let swap = swap_operator(register, pair.first, pair.second)?;
    let id = CMatrix::identity(register.dim(), register.dim());
    Ok((id - swap) * Complex64::new(0.5, 0.0))
}

/// Both branches of a singlet/triplet measurement on `pair`.
pub fn measure_singlet_triplet<S: Projectable>(
    register: &SpinRegister,
    state: &S,
    pair: SpinPair,
) -> Result<[MeasurementOutcome<S>; 2]> {
    let ps = singlet_projector(register, pair)?;
    let pt = CMatrix::identity(register.dim(), register.dim()) - &ps;
    let (p_s, s) = state.project(&ps);
    let (p_t, t) = state.project(&pt);
    Ok([
        MeasurementOutcome {
            label: PairOutcome::Singlet,
            probability: p_s,
            post_state: s,
        },
        MeasurementOutcome {
            label: PairOutcome::Triplet,
            probability: p_t,
            post_state: t,
        },
    ])
}

/// Draws one branch with Born probabilities.
pub fn sample_singlet_triplet<S: Projectable, R: Rng + ?Sized>(
    register: &SpinRegister,
    state: &S,
    pair: SpinPair,
    rng: &mut R,
) -> Result<MeasurementOutcome<S>> {
    let [singlet, triplet] = measure_singlet_triplet(register, state, pair)?;
    let total = singlet.probability + triplet.probability;
    Ok(if rng.random::<f64>() * total < singlet.probability {
        singlet
    } else {
        triplet
    })
}

/// Boltzmann state of an idle electron–nucleus pair under the static field;
/// `None` gives the infinite-temperature (maximally mixed) state.
pub fn initial_pair_state(params: &PhysicalParams, temperature_k: Option<f64>) -> Result<DensityState> {
    let Some(t) = temperature_k else {
        return Ok(DensityState::maximally_mixed(4));
    };
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {t}")));
    }
    let ee = params.delta_e_e(params.g_e_interface) / 2.0;
    let en = params.delta_e_n() / 2.0;
    let energies: Vec<f64> = (0..4)
        .map(|i| {
            let se = if i & 1 == 1 { 1.0 } else { -1.0 };
            let sn = if i & 2 == 2 { 1.0 } else { -1.0 };
            se * ee - sn * en
        })
        .collect();
    let kt = BOLTZMANN_NEV_PER_K * t;
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0) / kt).exp()).collect();
    let z: f64 = w.iter().sum();
    let diag = CVector::from_iterator(4, w.iter().map(|x| Complex64::new(x / z, 0.0)));
    DensityState::new(CMatrix::from_diagonal(&diag))
}

#[derive(Clone, Debug, PartialEq)]
pub enum CascadeMode {
    Ideal,
    Compiled(CompileOptions),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    /// Unconditional probability of reaching this round.
    pub reached: f64,
    pub p_singlet: f64,
    pub p_triplet: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeReport {
    pub rounds: usize,
    pub yield_zero: f64,
    /// J_z = ±1 weight of the data pair after the last round.
    pub discarded: f64,
    /// Everything else: J_z = 0 triplet weight left over, and any non-|0⟩
    /// weight in finished branches.
    pub residual: f64,
    pub log: Vec<RoundLog>,
}

/// Fixed circuit: data pair (e0, n0), measurement partner e1 homed on s1,
/// spare site s2. A round swaps n0 with e1 so that (e0, e1) carries the
/// data, measures singlet/triplet, and swaps back; triplets get (B,π) and
/// go round again.
struct Cascade {
    register: SpinRegister,
    data: SpinPair,
    swap: CMatrix,
    flip: CMatrix,
    singlet: CMatrix,
    triplet: CMatrix,
    zero: CMatrix,
    polarized: CMatrix,
}

impl Cascade {
    fn new(params: &PhysicalParams, mode: &CascadeMode) -> Result<Self> {
        let layout = DeviceLayout::two_qubit();
        let register = layout.register();
        let swap_seq = PulseSeq::from_applied(vec![Pulse::hyperfine(&[Coupling::new(1, 0)], PI)]);
        let flip_seq = PulseSeq::from_applied(vec![Pulse::field(PI)]);
        let unitary = |seq: &PulseSeq| -> Result<CMatrix> {
            Ok(match mode {
                CascadeMode::Ideal => ideal_unitary(seq, &layout, params)?.matrix().clone(),
                CascadeMode::Compiled(opts) => {
                    let train = compile(seq, &layout, params, opts)?;
                    train_unitary(&train, &layout, params)?.matrix().clone()
                }
            })
        };
        let data = SpinPair::new(register.electron(0)?, register.nucleus(0)?);
        let measured = SpinPair::new(register.electron(0)?, register.electron(1)?);
        let singlet = singlet_projector(&register, measured)?;
        let triplet = CMatrix::identity(register.dim(), register.dim()) - &singlet;
        let l0 = &pair_logical_vectors()[0];
        let zero = embed_pair_operator(&register, data, &(l0 * l0.adjoint()))?;
        let mut pol = CMatrix::zeros(4, 4);
        pol[(0, 0)] = ONE;
        pol[(3, 3)] = ONE;
        let polarized = embed_pair_operator(&register, data, &pol)?;
        Ok(Self {
            swap: unitary(&swap_seq)?,
            flip: unitary(&flip_seq)?,
            register,
            data,
            singlet,
            triplet,
            zero,
            polarized,
        })
    }

    /// Pair state on (e0, n0); every other spin ↓.
    fn embed_density(&self, pair_rho: &CMatrix) -> CMatrix {
        let dim = self.register.dim();
        let map = |i: usize| (i & 1) << self.data.first | (i >> 1 & 1) << self.data.second;
        let mut out = CMatrix::zeros(dim, dim);
        for i in 0..4 {
            for j in 0..4 {
                out[(map(i), map(j))] = pair_rho[(i, j)];
            }
        }
        out
    }

    fn embed_vector(&self, pair_psi: &CVector) -> CVector {
        let map = |i: usize| (i & 1) << self.data.first | (i >> 1 & 1) << self.data.second;
        let mut out = CVector::zeros(self.register.dim());
        for i in 0..4 {
            out[map(i)] = pair_psi[i];
        }
        out
    }
}

fn check_cascade_input(input: &DensityState, max_rounds: usize) -> Result<()> {
    if max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
    }
    if input.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: input.dim(),
        });
    }
    Ok(())
}

fn conj(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    u * rho * u.adjoint()
}

fn tr(op: &CMatrix, rho: &CMatrix) -> f64 {
    (op * rho).trace().re
}

/// Exact branch probabilities of the cascade on a data-pair density matrix.
pub fn init_cascade(
    input: &DensityState,
    max_rounds: usize,
    params: &PhysicalParams,
    mode: &CascadeMode,
) -> Result<CascadeReport> {
    check_cascade_input(input, max_rounds)?;
    let c = Cascade::new(params, mode)?;
    let mut rho = c.embed_density(input.matrix());
    let mut yield_zero = 0.0;
    let mut finished_other = 0.0;
    let mut log = Vec::new();
    let mut rounds = 0;
    for round in 1..=max_rounds {
        let reached = rho.trace().re;
        if reached < 1e-15 {
            break;
        }
        rounds = round;
        let swapped = conj(&c.swap, &rho);
        let s = conj(&c.singlet, &swapped);
        let t = conj(&c.triplet, &swapped);
        let (p_s, p_t) = (s.trace().re, t.trace().re);
        log.push(RoundLog {
            round,
            reached,
            p_singlet: p_s / reached,
            p_triplet: p_t / reached,
        });
        let done = conj(&c.swap, &s);
        let z = tr(&c.zero, &done);
        yield_zero += z;
        finished_other += p_s - z;
        rho = conj(&c.flip, &conj(&c.swap, &t));
    }
    let left = rho.trace().re;
    let discarded = tr(&c.polarized, &rho);
    let residual = (finished_other + (left - discarded)).max(0.0);
    let total = yield_zero + discarded + residual;
    Ok(CascadeReport {
        rounds,
        yield_zero: yield_zero / total,
        discarded: discarded / total,
        residual: residual / total,
        log,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrajectoryOutcome {
    Zero,
    Discarded,
    Residual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub trajectories: usize,
    pub zero: usize,
    pub discarded: usize,
    pub residual: usize,
    /// Trajectories finishing in round k are counted at index k − 1.
    pub rounds_histogram: Vec<usize>,
}

impl MonteCarloReport {
    pub fn yield_zero(&self) -> f64 {
        self.zero as f64 / self.trajectories.max(1) as f64
    }

    /// Binomial standard error of [`Self::yield_zero`].
    pub fn yield_sigma(&self) -> f64 {
        let p = self.yield_zero();
        (p * (1.0 - p) / self.trajectories.max(1) as f64).sqrt()
    }
}

fn apply(u: &CMatrix, psi: &CVector) -> CVector {
    u * psi
}

fn born(p: &CMatrix, psi: &CVector) -> f64 {
    (psi.adjoint() * p * psi)[(0, 0)].re
}

fn collapse(p: &CMatrix, psi: &CVector) -> CVector {
    let v = p * psi;
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Sampled cascade trajectories. Trajectory `k` draws from a ChaCha8
/// generator seeded with `seed` on stream `k`, so results do not depend on
/// thread scheduling.
pub fn init_cascade_monte_carlo(
    input: &DensityState,
    max_rounds: usize,
    trajectories: usize,
    seed: u64,
    params: &PhysicalParams,
    mode: &CascadeMode,
) -> Result<MonteCarloReport> {
    check_cascade_input(input, max_rounds)?;
    let c = Cascade::new(params, mode)?;
    let eig = SymmetricEigen::new(input.matrix().clone());
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|w| w.max(0.0)).collect();
    let total_w: f64 = weights.iter().sum();
    let starts: Vec<CVector> = (0..4).map(|k| c.embed_vector(&eig.eigenvectors.column(k).into_owned())).collect();

    let outcomes: Vec<(TrajectoryOutcome, usize)> = (0..trajectories)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut r = rng.random::<f64>() * total_w;
            let mut pick = 3;
            for (i, w) in weights.iter().enumerate() {
                if r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            let mut psi = starts[pick].clone();
            for round in 1..=max_rounds {
                psi = apply(&c.swap, &psi);
                if rng.random::<f64>() < born(&c.singlet, &psi) {
                    psi = apply(&c.swap, &collapse(&c.singlet, &psi));
                    let outcome = if rng.random::<f64>() < born(&c.zero, &psi) {
                        TrajectoryOutcome::Zero
                    } else {
                        TrajectoryOutcome::Residual
                    };
                    return (outcome, round);
                }
                psi = apply(&c.flip, &apply(&c.swap, &collapse(&c.triplet, &psi)));
            }
            let outcome = if rng.random::<f64>() < born(&c.polarized, &psi) {
                TrajectoryOutcome::Discarded
            } else {
                TrajectoryOutcome::Residual
            };
            (outcome, max_rounds)
        })
        .collect();

    let mut report = MonteCarloReport {
        trajectories,
        zero: 0,
        discarded: 0,
        residual: 0,
        rounds_histogram: vec![0; max_rounds],
    };
    for (o, rounds) in outcomes {
        match o {
            TrajectoryOutcome::Zero => report.zero += 1,
            TrajectoryOutcome::Discarded => report.discarded += 1,
            TrajectoryOutcome::Residual => report.residual += 1,
        }
        report.rounds_histogram[rounds - 1] += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn encode_examples() {
        let s = encode_logical(ONE, ZERO).unwrap();
        assert!((s.amplitudes()[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[2] + c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let t = encode_logical(ZERO, ONE).unwrap();
        assert!((t.amplitudes()[2] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let h = c(FRAC_1_SQRT_2, 0.0);
        let ud = encode_logical(h, h).unwrap();
        assert!((ud.amplitudes()[1] - ONE).norm() < 1e-15);
        assert!(ud.amplitudes()[2].norm() < 1e-15);
        assert!(matches!(encode_logical(ONE, ONE), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn readout_round_trip_and_leakage() {
        let reg = SpinRegister::new(1, 1);
        let pair = SpinPair::new(0, 1);
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let r = readout_logical(&reg, &encode_logical(a, b).unwrap(), pair).unwrap();
        assert!((r.alpha - a).norm() < 1e-14 && (r.beta - b).norm() < 1e-14);
        assert!(r.leakage < 1e-14);
        let r = readout_logical(&reg, &SpinState::basis(4, 3), pair).unwrap();
        assert_eq!((r.alpha, r.beta, r.leakage), (ZERO, ZERO, 1.0));
    }

    #[test]
    fn readout_in_larger_register() {
        let reg = SpinRegister::new(2, 2);
        let q0 = SpinPair::new(0, 2);
        let q1 = SpinPair::new(1, 3);
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let s = encode_product(&reg, &[(q0, a, b), (q1, ONE, ZERO)]).unwrap();
        let r = readout_logical(&reg, &s, q0).unwrap();
        // the larger amplitude is made real
        assert!((r.alpha - c(0.0, -0.6)).norm() < 1e-12 && (r.beta - c(0.8, 0.0)).norm() < 1e-12);
        let r1 = readout_logical(&reg, &s, q1).unwrap();
        assert!((r1.alpha - ONE).norm() < 1e-12 && r1.leakage < 1e-12);
    }

    #[test]
    fn logical_basis_is_orthonormal_first_qubit_msb() {
        let reg = SpinRegister::new(2, 3);
        let pairs = [SpinPair::new(0, 2), SpinPair::new(1, 3)];
        let basis = logical_basis(&reg, &pairs).unwrap();
        for (i, x) in basis.iter().enumerate() {
            for (j, y) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((x.inner(y).norm() - expect).abs() < 1e-14);
            }
        }
        // |01⟩: first qubit |0⟩ (singlet), second |1⟩
        let r0 = readout_logical(&reg, &basis[1], pairs[0]).unwrap();
        let r1 = readout_logical(&reg, &basis[1], pairs[1]).unwrap();
        assert!((r0.alpha.norm() - 1.0).abs() < 1e-12);
        assert!((r1.beta.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_examples() {
        let reg = SpinRegister::new(1, 1);
        let pair = SpinPair::new(0, 1);
        let [s, t] = measure_singlet_triplet(&reg, &encode_logical(ONE, ZERO).unwrap(), pair).unwrap();
        assert!((s.probability - 1.0).abs() < 1e-14);
        assert!(t.post_state.is_none());
        let [s, _] = measure_singlet_triplet(&reg, &DensityState::maximally_mixed(4), pair).unwrap();
        assert!((s.probability - 0.25).abs() < 1e-14);
        let [s, t] = measure_singlet_triplet(&reg, &SpinState::basis(4, 1), pair).unwrap();
        assert!((s.probability - 0.5).abs() < 1e-14);
        assert!((s.probability + t.probability - 1.0).abs() < 1e-14);
        assert!((s.post_state.unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_seeded() {
        let reg = SpinRegister::new(1, 1);
        let pair = SpinPair::new(0, 1);
        let state = SpinState::basis(4, 1);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_singlet_triplet(&reg, &state, pair, &mut rng).unwrap().label)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert!(draw(9).contains(&PairOutcome::Singlet) && draw(9).contains(&PairOutcome::Triplet));
    }

    #[test]
    fn memory_transfer_moves_data_to_nuclei() {
        let p = PhysicalParams::nominal();
        let layout = DeviceLayout::two_qubit();
        let reg = layout.register();
        let (qd, qa) = (LogicalQubit::new(0, 0), LogicalQubit::new(1, 1));
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let input = encode_product(
            &reg,
            &[
                (SpinPair::of_qubit(&reg, qd).unwrap(), a, b),
                (SpinPair::of_qubit(&reg, qa).unwrap(), ONE, ZERO),
            ],
        )
        .unwrap();
        let seq = memory_transfer(qd, qa).unwrap();
        let u = ideal_unitary(&seq, &layout, &p).unwrap();
        let out = u.apply(&input);
        let (nuclear, electronic) = transferred_pairs(&reg, qd, qa).unwrap();
        let rho = out.to_density().matrix().clone();
        assert!(logical_fidelity(&reg, &rho, nuclear, a, b).unwrap() > 1.0 - 1e-12);
        assert!(logical_fidelity(&reg, &rho, electronic, ONE, ZERO).unwrap() > 1.0 - 1e-12);
        let back = u.apply(&out);
        assert!(back.inner(&input).norm() > 1.0 - 1e-12);
        assert!(memory_transfer(qd, qd).is_err());
    }

    #[test]
    fn cascade_exact_examples() {
        let p = PhysicalParams::nominal();
        let r = init_cascade(&DensityState::maximally_mixed(4), 2, &p, &CascadeMode::Ideal).unwrap();
        assert!((r.yield_zero - 0.5).abs() < 1e-12, "{r:?}");
        assert!((r.discarded - 0.5).abs() < 1e-12);
        assert!(r.residual.abs() < 1e-12);
        assert!((r.log[0].p_singlet - 0.25).abs() < 1e-12);

        let zero = encode_logical(ONE, ZERO).unwrap().to_density();
        let r = init_cascade(&zero, 3, &p, &CascadeMode::Ideal).unwrap();
        assert_eq!(r.rounds, 1);
        assert!((r.yield_zero - 1.0).abs() < 1e-12);

        let one = encode_logical(ZERO, ONE).unwrap().to_density();
        let r = init_cascade(&one, 1, &p, &CascadeMode::Ideal).unwrap();
        assert!((r.residual - 1.0).abs() < 1e-12);
        assert!(init_cascade(&one, 0, &p, &CascadeMode::Ideal).is_err());
    }

    #[test]
    fn cascade_monte_carlo_is_deterministic() {
        let p = PhysicalParams::nominal();
        let mixed = DensityState::maximally_mixed(4);
        let a = init_cascade_monte_carlo(&mixed, 2, 400, 7, &p, &CascadeMode::Ideal).unwrap();
        let b = init_cascade_monte_carlo(&mixed, 2, 400, 7, &p, &CascadeMode::Ideal).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.zero + a.discarded + a.residual, 400);
        assert!((a.yield_zero() - 0.5).abs() < 4.0 * a.yield_sigma());
    }

    #[test]
    fn thermal_state_tends_to_mixed() {
        let p = PhysicalParams::nominal();
        let hot = initial_pair_state(&p, Some(1e6)).unwrap();
        let mixed = DensityState::maximally_mixed(4);
        assert!((hot.matrix() - mixed.matrix()).norm() < 1e-6);
        let cold = initial_pair_state(&p, Some(1e-4)).unwrap();
        // electron polarizes, the nucleus barely does
        let m = cold.matrix();
        assert!((m[(0, 0)] + m[(2, 2)]).re > 0.999);
        assert!((cold.purity() - 0.5).abs() < 0.01);
        assert!(initial_pair_state(&p, Some(-1.0)).is_err());
    }
}
