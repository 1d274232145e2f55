//! Gate-error metrics, sector-aligned distances, local invariants, Trotter
//! convergence and parameter-sensitivity thresholds.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::device::{Coupling, DeviceLayout, PhysicalParams};
use crate::error::{Error, Result};
use crate::evolution::{ideal_pulse, resonant_step_train, train_unitary, BitTrain, Generator, UnitaryOperator};
use crate::gates::{CompileOptions, GateSetup};
use crate::protocols::qubit_basis;
use crate::spinspace::{jz_sector_projectors, CMatrix, SpinRegister, SpinState, ONE, ZERO};

const ORTHO_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// Haar-average state infidelity over the logical subspace.
    pub avg_error: f64,
    pub worst_error: f64,
    /// Mean infidelity over the logical basis states.
    pub basis_error: f64,
    pub leakage: f64,
    pub duration_cycles: u64,
    pub duration_us: f64,
}

impl ErrorReport {
    pub fn with_duration(mut self, train: &BitTrain, params: &PhysicalParams) -> Self {
        let (cycles, us) = duration_report(train, params);
        self.duration_cycles = cycles;
        self.duration_us = us;
        self
    }
}

/// Columns are the basis vectors.
fn basis_matrix(basis: &[SpinState]) -> Result<CMatrix> {
    let Some(first) = basis.first() else {
        return Err(Error::InvalidArgument("empty logical basis".into()));
    };
    let dim = first.dim();
    let mut b = CMatrix::zeros(dim, basis.len());
    for (k, s) in basis.iter().enumerate() {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.dim(),
            });
        }
        b.set_column(k, s.amplitudes());
    }
    let gram = b.adjoint() * &b;
    let dev = (gram - CMatrix::identity(basis.len(), basis.len()))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > ORTHO_TOL {
        return Err(Error::NonOrthonormalBasis(dev));
    }
    Ok(b)
}

/// B† U B for a basis given as states.
pub fn logical_matrix(u: &UnitaryOperator, basis: &[SpinState]) -> Result<CMatrix> {
    let b = basis_matrix(basis)?;
    if u.dim() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            got: u.dim(),
        });
    }
    Ok(b.adjoint() * u.matrix() * b)
}

fn probes(d: usize) -> Vec<nalgebra::DVector<Complex64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut v = nalgebra::DVector::zeros(d);
        v[i] = ONE;
        out.push(v);
    }
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..4 {
                let mut v = nalgebra::DVector::zeros(d);
                v[i] = Complex64::new(FRAC_1_SQRT_2, 0.0);
                v[j] = Complex64::from_polar(FRAC_1_SQRT_2, k as f64 * std::f64::consts::FRAC_PI_2);
                out.push(v);
            }
        }
    }
    out
}

/// Error of `actual` against `ideal` on the span of `basis`.
///
/// With M = B†·U_ideal†·U_actual·B, the average error is
/// 1 − (Tr M†M + |Tr M|²)/(d(d+1)) and leakage is 1 − Tr M†M/d. The worst
/// error is taken over basis states and their pairwise equal superpositions
/// and never reported below the average.
pub fn gate_error(actual: &UnitaryOperator, ideal: &UnitaryOperator, basis: &[SpinState]) -> Result<ErrorReport> {
    if actual.dim() != ideal.dim() {
        return Err(Error::DimensionMismatch {
            expected: ideal.dim(),
            got: actual.dim(),
        });
    }
    let b = basis_matrix(basis)?;
    if actual.dim() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            got: actual.dim(),
        });
    }
    let m = b.adjoint() * ideal.matrix().adjoint() * actual.matrix() * &b;
    let d = basis.len() as f64;
    let mm = (m.adjoint() * &m).trace().re;
    let tr = m.trace().norm_sqr();
    let avg = (1.0 - (mm + tr) / (d * (d + 1.0))).clamp(0.0, 1.0);
    let leakage = (1.0 - mm / d).clamp(0.0, 1.0);
    let basis_error = (0..basis.len()).map(|i| 1.0 - m[(i, i)].norm_sqr()).sum::<f64>() / d;
    let probe_worst = probes(basis.len())
        .iter()
        .map(|v| 1.0 - (v.adjoint() * &m * v)[(0, 0)].norm_sqr())
        .fold(0.0, f64::max);
    Ok(ErrorReport {
        avg_error: avg,
        worst_error: probe_worst.max(avg).clamp(0.0, 1.0),
        basis_error: basis_error.clamp(0.0, 1.0),
        leakage,
        duration_cycles: 0,
        duration_us: 0.0,
    })
}

fn sector_overlaps(u1: &UnitaryOperator, u2: &UnitaryOperator, register: &SpinRegister) -> Result<(f64, f64)> {
    if u1.dim() != u2.dim() || u1.dim() != register.dim() {
        return Err(Error::DimensionMismatch {
            expected: register.dim(),
            got: if u1.dim() != register.dim() { u1.dim() } else { u2.dim() },
        });
    }
    let m = u2.matrix().adjoint() * u1.matrix();
    let sum: f64 = jz_sector_projectors(register)
        .iter()
        .map(|p| (p.matrix() * &m).trace().norm())
        .sum();
    let mm = (m.adjoint() * &m).trace().re;
    Ok((sum, mm))
}

/// Haar-average infidelity between `u1` and `u2`, minimized over one free
/// phase per J_z sector.
pub fn sector_aligned_error(u1: &UnitaryOperator, u2: &UnitaryOperator, register: &SpinRegister) -> Result<f64> {
    let (sum, mm) = sector_overlaps(u1, u2, register)?;
    let d = u1.dim() as f64;
    Ok((1.0 - (mm + sum * sum) / (d * (d + 1.0))).max(0.0))
}

/// sqrt(1 − Σ_s|Tr(P_s U₂†U₁)|/d): an operator distance, linear in the
/// generator error where [`sector_aligned_error`] is quadratic.
pub fn sector_aligned_distance(u1: &UnitaryOperator, u2: &UnitaryOperator, register: &SpinRegister) -> Result<f64> {
    let (sum, _) = sector_overlaps(u1, u2, register)?;
    Ok((1.0 - sum / u1.dim() as f64).max(0.0).sqrt())
}

/// Nearest unitary (polar factor).
pub fn unitarize(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

/// Makhlin invariants (G₁, G₂) of a two-qubit unitary: (1, 3) for the
/// identity, (0, 1) for CNOT.
pub fn local_invariants(u: &CMatrix) -> Result<(Complex64, f64)> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: u.nrows(),
        });
    }
    let dev = (u.adjoint() * u - CMatrix::identity(4, 4))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > 1e-6 {
        return Err(Error::NotUnitary(dev));
    }
    let i = Complex64::new(0.0, 1.0);
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    #[rustfmt::skip]
    let q = DMatrix::from_row_slice(4, 4, &[
        ONE, ZERO, ZERO, i,
        ZERO, i, ONE, ZERO,
        ZERO, i, -ONE, ZERO,
        ONE, ZERO, ZERO, -i,
    ]) * s;
    let ub = q.adjoint() * u * &q;
    let m = ub.transpose() * &ub;
    let det = u.determinant();
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    let g1 = tr * tr / (det * 16.0);
    let g2 = ((tr * tr - tr2) / (det * 4.0)).re;
    Ok((g1, g2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrotterPoint {
    pub dt_cycles: u64,
    pub error: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrotterReport {
    pub points: Vec<TrotterPoint>,
    /// Log-log slope of the sector-aligned distance.
    pub distance_slope: f64,
    /// Log-log slope of the sector-aligned infidelity (twice the above).
    pub error_slope: f64,
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Resonant-stepped (A,θ) against the ideal pulse for each step length.
pub fn trotter_convergence(
    couplings: &[Coupling],
    angle: f64,
    dt_list: &[u64],
    layout: &DeviceLayout,
    params: &PhysicalParams,
) -> Result<TrotterReport> {
    if dt_list.len() < 3 {
        return Err(Error::InvalidArgument("trotter_convergence needs at least 3 step lengths".into()));
    }
    let register = layout.register();
    let ideal = ideal_pulse(layout, &Generator::Hyperfine(couplings.to_vec()), angle, params)?;
    let points = dt_list
        .par_iter()
        .map(|&dt| {
            let p = params.with_dt_cycles(dt)?;
            let train = resonant_step_train(couplings, angle, &p)?;
            let u = train_unitary(&train, &layout.deactivate(), &p)?;
            Ok(TrotterPoint {
                dt_cycles: dt,
                error: sector_aligned_error(&u, &ideal, &register)?,
                distance: sector_aligned_distance(&u, &ideal, &register)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.dt_cycles as f64).collect();
    let ds: Vec<f64> = points.iter().map(|p| p.distance).collect();
    let es: Vec<f64> = points.iter().map(|p| p.error).collect();
    Ok(TrotterReport {
        distance_slope: loglog_slope(&xs, &ds),
        error_slope: loglog_slope(&xs, &es),
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Frequency,
    Field,
    Hyperfine,
    /// Donor-bound g-factor relative to the interface value the controller
    /// is calibrated on.
    GFactor,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [SweepParam::Frequency, SweepParam::Field, SweepParam::Hyperfine, SweepParam::GFactor];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Frequency => "f",
            SweepParam::Field => "B",
            SweepParam::Hyperfine => "A",
            SweepParam::GFactor => "g_e_interface",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "f" | "f_GHz" => Ok(SweepParam::Frequency),
            "B" | "B_mT" => Ok(SweepParam::Field),
            "A" | "A_neV" => Ok(SweepParam::Hyperfine),
            "g_e_interface" | "g_e_donor" | "g_e" => Ok(SweepParam::GFactor),
            other => Err(Error::InvalidArgument(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepScope {
    Global,
    /// Only the donor at this site.
    Site(usize),
}

/// Physics with `param` scaled by 1 + δ.
pub fn perturb(params: &PhysicalParams, param: SweepParam, scope: SweepScope, delta: f64) -> Result<PhysicalParams> {
    let k = 1.0 + delta;
    let mut p = params.clone();
    match (param, scope) {
        (SweepParam::Frequency, SweepScope::Global) => p.clock_ghz *= k,
        (SweepParam::Field, SweepScope::Global) => p.field_mt *= k,
        (SweepParam::Field, SweepScope::Site(s)) => *p.site_field_scale.entry(s).or_insert(1.0) *= k,
        (SweepParam::Hyperfine, SweepScope::Global) => p.hyperfine_nev *= k,
        (SweepParam::Hyperfine, SweepScope::Site(s)) => *p.site_hyperfine_scale.entry(s).or_insert(1.0) *= k,
        (SweepParam::GFactor, SweepScope::Global) => p.g_e_donor = p.g_e_interface * k,
        (param, SweepScope::Site(_)) => {
            return Err(Error::InvalidArgument(format!("{param} has no per-site variant")));
        }
    }
    p.validate()?;
    Ok(p)
}

/// A compiled gate frozen at nominal parameters, ready to run under
/// perturbed physics.
#[derive(Clone, Debug)]
pub struct FrozenGate {
    pub train: BitTrain,
    pub layout: DeviceLayout,
    pub ideal: UnitaryOperator,
    pub basis: Vec<SpinState>,
    pub nominal: PhysicalParams,
}

impl FrozenGate {
    pub fn new(setup: &GateSetup, params: &PhysicalParams, options: &CompileOptions) -> Result<Self> {
        Ok(Self {
            train: setup.compile(params, options)?,
            ideal: setup.ideal(params)?,
            basis: qubit_basis(&setup.layout, &setup.qubits)?,
            layout: setup.layout.clone(),
            nominal: params.clone(),
        })
    }

    pub fn unitary_under(&self, physics: &PhysicalParams) -> Result<UnitaryOperator> {
        train_unitary(&self.train, &self.layout, physics)
    }

    pub fn error_under(&self, physics: &PhysicalParams) -> Result<ErrorReport> {
        let u = self.unitary_under(physics)?;
        Ok(gate_error(&u, &self.ideal, &self.basis)?.with_duration(&self.train, &self.nominal))
    }

    pub fn error_at(&self, param: SweepParam, scope: SweepScope, delta: f64) -> Result<ErrorReport> {
        self.error_under(&perturb(&self.nominal, param, scope, delta)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub report: ErrorReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub scope: SweepScope,
    pub budget: f64,
    pub nominal_error: f64,
    pub grid: Vec<SweepPoint>,
    /// min of the two one-sided thresholds, rounded down to 2 significant
    /// figures.
    pub threshold: f64,
    pub threshold_plus: f64,
    pub threshold_minus: f64,
    /// Whether the grid errors are nondecreasing in |δ| on each side.
    pub monotone: bool,
}

pub const BRACKET: (f64, f64) = (1e-8, 1e-1);
const BISECTION_STEPS: usize = 40;

/// Rounds down to two significant figures.
pub fn floor_2sf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    // divide by an exact power of ten so results like 2e-5 come out exact
    let p = 1 - x.log10().floor() as i32;
    if p >= 0 {
        let scale = 10f64.powi(p);
        (x * scale * (1.0 + 1e-12)).floor() / scale
    } else {
        let scale = 10f64.powi(-p);
        (x / scale * (1.0 + 1e-12)).floor() * scale
    }
}

/// ±10^(k/2) for k spanning the bisection bracket, negative side first.
pub fn default_grid() -> Vec<f64> {
    let mags: Vec<f64> = (-16..=-2).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
    let mut out: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    out.push(0.0);
    out.extend(mags);
    out
}

fn one_sided_threshold(gate: &FrozenGate, param: SweepParam, scope: SweepScope, sign: f64, budget: f64) -> Result<f64> {
    let ok = |mag: f64| -> Result<bool> { Ok(gate.error_at(param, scope, sign * mag)?.avg_error <= budget) };
    let (lo_b, hi_b) = BRACKET;
    if ok(hi_b)? {
        return Ok(hi_b);
    }
    if !ok(lo_b)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (lo_b.ln(), hi_b.ln());
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp())? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp())
}

/// Largest |δ| keeping the frozen gate's average error within `budget`,
/// by log-bisection on each sign over [`BRACKET`].
pub fn sensitivity_threshold(
    gate: &FrozenGate,
    param: SweepParam,
    scope: SweepScope,
    budget: f64,
    grid: &[f64],
) -> Result<SweepResult> {
    perturb(&gate.nominal, param, scope, 0.0)?;
    let nominal = gate.error_under(&gate.nominal)?.avg_error;
    if !(budget > nominal) {
        return Err(Error::InvalidArgument(format!(
            "error budget {budget:e} is not above the nominal error {nominal:e}"
        )));
    }
    let points = grid
        .par_iter()
        .map(|&delta| {
            Ok(SweepPoint {
                delta,
                report: gate.error_at(param, scope, delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (plus, minus) = rayon::join(
        || one_sided_threshold(gate, param, scope, 1.0, budget),
        || one_sided_threshold(gate, param, scope, -1.0, budget),
    );
    let (plus, minus) = (plus?, minus?);
    let side_monotone = |sign: f64| {
        let mut side: Vec<&SweepPoint> = points.iter().filter(|p| p.delta * sign >= 0.0).collect();
        side.sort_by(|a, b| a.delta.abs().total_cmp(&b.delta.abs()));
        side.windows(2)
            .all(|w| w[1].report.avg_error >= w[0].report.avg_error * (1.0 - 1e-6) - 1e-12)
    };
    Ok(SweepResult {
        param,
        scope,
        budget,
        nominal_error: nominal,
        monotone: side_monotone(1.0) && side_monotone(-1.0),
        grid: points,
        threshold: floor_2sf(plus.min(minus)),
        threshold_plus: plus,
        threshold_minus: minus,
    })
}

impl SweepResult {
    /// `param,delta,avg_error,worst_error,leakage`, one row per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["param", "delta", "avg_error", "worst_error", "leakage"])?;
        for p in &self.grid {
            w.write_record([
                self.param.name().to_string(),
                format!("{:e}", p.delta),
                format!("{:e}", p.report.avg_error),
                format!("{:e}", p.report.worst_error),
                format!("{:e}", p.report.leakage),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// (cycles, μs).
pub fn duration_report(train: &BitTrain, params: &PhysicalParams) -> (u64, f64) {
    let cycles = train.total_cycles();
    (cycles, params.cycles_to_ns(cycles) * 1e-3)
}
