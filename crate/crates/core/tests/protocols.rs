use num_complex::Complex64;

use hydrospin::gates::ideal_unitary;
use hydrospin::protocols::{
    encode_logical, encode_product, init_cascade, init_cascade_monte_carlo, initial_pair_state, logical_fidelity,
    measure_singlet_triplet, memory_transfer, readout_logical, transferred_pairs, CascadeMode, PairOutcome, SpinPair,
};
use hydrospin::{DensityState, DeviceLayout, LogicalQubit, PhysicalParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn encoded_amplitudes_read_back() {
    let reg = DeviceLayout::single_pair().register();
    let pair = SpinPair::new(0, 1);
    let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
    let psi = encode_logical(a, b).unwrap();
    let r = readout_logical(&reg, &psi, pair).unwrap();
    assert!((r.alpha - a).norm() < 1e-12 && (r.beta - b).norm() < 1e-12);
    assert!(r.leakage < 1e-12);
}

#[test]
fn reduced_readout_of_product_state() {
    let layout = DeviceLayout::two_qubit();
    let reg = layout.register();
    let p0 = SpinPair::of_qubit(&reg, LogicalQubit::new(0, 0)).unwrap();
    let p1 = SpinPair::of_qubit(&reg, LogicalQubit::new(1, 1)).unwrap();
    let psi = encode_product(&reg, &[(p0, c(0.0, 0.0), c(0.0, 1.0)), (p1, c(0.8, 0.0), c(0.6, 0.0))]).unwrap();
    let r = readout_logical(&reg, &psi, p0).unwrap();
    assert!(r.alpha.norm() < 1e-12 && (r.beta.norm() - 1.0).abs() < 1e-12);
    let r = readout_logical(&reg, &psi, p1).unwrap();
    assert!((r.alpha - c(0.8, 0.0)).norm() < 1e-12 && (r.beta - c(0.6, 0.0)).norm() < 1e-12);
}

#[test]
fn singlet_measurement_of_logical_states() {
    let reg = DeviceLayout::single_pair().register();
    let pair = SpinPair::new(0, 1);
    let psi = encode_logical(c(0.6, 0.0), c(0.8, 0.0)).unwrap();
    let [s, t] = measure_singlet_triplet(&reg, &psi, pair).unwrap();
    assert_eq!(s.label, PairOutcome::Singlet);
    assert!((s.probability - 0.36).abs() < 1e-12);
    assert!((t.probability - 0.64).abs() < 1e-12);
    let rho = DensityState::maximally_mixed(4);
    let [s, t] = measure_singlet_triplet(&reg, &rho, pair).unwrap();
    assert!((s.probability - 0.25).abs() < 1e-12 && (t.probability - 0.75).abs() < 1e-12);
    let zero = encode_logical(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
    let [_, t] = measure_singlet_triplet(&reg, &zero, pair).unwrap();
    assert!(t.post_state.is_none());
}

#[test]
fn memory_transfer_moves_data_to_nuclei() {
    let p = PhysicalParams::nominal();
    let layout = DeviceLayout::two_qubit();
    let reg = layout.register();
    let (qd, qa) = (LogicalQubit::new(0, 0), LogicalQubit::new(1, 1));
    let (pd, pa) = (SpinPair::of_qubit(&reg, qd).unwrap(), SpinPair::of_qubit(&reg, qa).unwrap());
    let (nuclear, electronic) = transferred_pairs(&reg, qd, qa).unwrap();
    let u = ideal_unitary(&memory_transfer(qd, qa).unwrap(), &layout, &p).unwrap();
    let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
    let input = encode_product(&reg, &[(pd, a, b), (pa, c(1.0, 0.0), c(0.0, 0.0))]).unwrap();
    let rho = u.apply(&input).to_density().matrix().clone();
    assert!(logical_fidelity(&reg, &rho, nuclear, a, b).unwrap() > 1.0 - 1e-9);
    assert!(logical_fidelity(&reg, &rho, electronic, c(1.0, 0.0), c(0.0, 0.0)).unwrap() > 1.0 - 1e-9);
    assert!(memory_transfer(qd, qd).is_err());
}

#[test]
fn cascade_keeps_pure_zero() {
    let p = PhysicalParams::nominal();
    let zero = encode_logical(c(1.0, 0.0), c(0.0, 0.0)).unwrap().to_density();
    let r = init_cascade(&zero, 5, &p, &CascadeMode::Ideal).unwrap();
    assert_eq!(r.rounds, 1);
    assert!((r.yield_zero - 1.0).abs() < 1e-9);
    assert!(r.discarded < 1e-9 && r.residual < 1e-9);
}

#[test]
fn cascade_from_mixed_state_sums_to_one() {
    let p = PhysicalParams::nominal();
    let r = init_cascade(&initial_pair_state(&p, None).unwrap(), 4, &p, &CascadeMode::Ideal).unwrap();
    assert!((r.yield_zero + r.discarded + r.residual - 1.0).abs() < 1e-12);
    assert!(r.yield_zero > 0.0 && r.discarded > 0.0);
    assert_eq!(r.log.len(), r.rounds);
    assert!(initial_pair_state(&p, Some(-1.0)).is_err());
}

#[test]
fn monte_carlo_is_seeded() {
    let p = PhysicalParams::nominal();
    let rho = initial_pair_state(&p, None).unwrap();
    let a = init_cascade_monte_carlo(&rho, 4, 400, 7, &p, &CascadeMode::Ideal).unwrap();
    let b = init_cascade_monte_carlo(&rho, 4, 400, 7, &p, &CascadeMode::Ideal).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.zero + a.discarded + a.residual, 400);
    assert_eq!(a.rounds_histogram.iter().sum::<usize>(), 400);
    let exact = init_cascade(&rho, 4, &p, &CascadeMode::Ideal).unwrap();
    assert!((a.yield_zero() - exact.yield_zero).abs() < 4.0 * a.yield_sigma().max(1e-3));
}
