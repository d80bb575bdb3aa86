//! Free-fermion results against the dense spin simulation.

use fring_core::ed;
use fring_core::nambu::{bdg_energies, diagonalize, gap_curve, interpolate};
use fring_core::observables::{
    gaussian_overlap_sq, greens, populations, residual_energy, sector_levels, GaussianState,
};
use fring_core::propagate::{propagate, step_unitary, BdGPropagator, Schedule};
use fring_core::RingModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_schedule(rng: &mut ChaCha8Rng, depth: usize) -> Schedule {
    let mut draw = || (0..depth).map(|_| rng.random_range(-1.0..3.0)).collect::<Vec<f64>>();
    let tx = draw();
    let tz = draw();
    Schedule::new(tx, tz).unwrap()
}

#[test]
fn single_step_correlators_n5() {
    let m = RingModel::new(5).unwrap();
    let s = Schedule::new(vec![0.3], vec![0.2]).unwrap();
    let corr = greens(&propagate(&m, &s).unwrap()).correlators();
    let psi = ed::evolve(&m, &s).unwrap();
    let obs = ed::observables(&psi, &m).unwrap();
    for (a, b) in corr.iter().zip(&obs.correlators) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn random_schedules_match_state_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let n = [5, 7, 9, 11][trial % 4];
        let m = RingModel::new(n).unwrap();
        let s = random_schedule(&mut rng, 1 + trial % 10);
        let prop = propagate(&m, &s).unwrap();
        let psi = ed::evolve(&m, &s).unwrap();
        let obs = ed::observables(&psi, &m).unwrap();
        for (a, b) in greens(&prop).correlators().iter().zip(&obs.correlators) {
            assert!((a - b).abs() < 1e-9);
        }
        let eps = residual_energy(&m, &prop);
        assert!((eps - ed::residual_energy(&psi, &m).unwrap()).abs() < 1e-9);
        assert!(eps > -1e-12);
        assert!((obs.parity + 1.0).abs() < 1e-12);
    }
}

#[test]
fn parity_conserved_at_every_step() {
    let m = RingModel::new(9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut psi = ed::initial_state(&m).unwrap();
    for _ in 0..12 {
        let (tx, tz) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        psi = ed::apply_step(&psi, &m, tx, tz).unwrap();
        assert!((ed::observables(&psi, &m).unwrap().parity + 1.0).abs() < 1e-12);
    }
}

#[test]
fn angle_shift_by_pi_leaves_observables() {
    let m = RingModel::new(7).unwrap();
    let a = Schedule::new(vec![0.4, 1.1], vec![0.7, 0.3]).unwrap();
    let b = Schedule::new(vec![0.4 + std::f64::consts::PI, 1.1], vec![0.7, 0.3]).unwrap();
    let ca = greens(&propagate(&m, &a).unwrap()).correlators();
    let cb = greens(&propagate(&m, &b).unwrap()).correlators();
    for (x, y) in ca.iter().zip(&cb) {
        assert!((x - y).abs() < 1e-12);
    }
    let sa = step_unitary(&m, 0.4, 0.7).unwrap();
    let sb = step_unitary(&m, 0.4 + std::f64::consts::PI, 0.7).unwrap();
    let ratio = sb.u_blk[(0, 0)] / sa.u_blk[(0, 0)];
    assert!((ratio.norm() - 1.0).abs() < 1e-12 && ratio.im.abs() < 1e-12);
}

#[test]
fn ground_energy_from_bdg_spectrum() {
    // E_0 = -sum eps below the zero crossing; above it the lowest mode is
    // filled and E_0 = -sum eps + 2 eps_1
    for n in [5, 7, 9, 11] {
        let m = RingModel::new(n).unwrap();
        for i in 0..20 {
            let s = (i as f64 + 0.5) / 20.0;
            let spec = diagonalize(&interpolate(&m, s).unwrap()).unwrap();
            let mut e0 = -spec.energies.iter().sum::<f64>();
            if spec.vacuum_parity() != 1 {
                e0 += 2.0 * spec.energies[0];
            }
            let exact = ed::spectrum_sector(&m, s, 1).unwrap()[0];
            assert!((e0 - exact).abs() < 1e-10, "N={n} s={s}: {e0} vs {exact}");
        }
    }
}

#[test]
fn target_spectrum_pairs_and_sector_ground_energy() {
    let m = RingModel::new(9).unwrap();
    let full = m.nambu_hz().unwrap().assemble();
    let eig = nalgebra::SymmetricEigen::new(full);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    vals.sort_by(f64::total_cmp);
    for i in 0..9 {
        assert!((vals[i] + vals[17 - i]).abs() < 1e-12);
    }
    // the vacuum of H_z is even, so the odd-sector ground state fills one
    // mode: sum of negative eigenvalues plus twice the smallest level
    let neg: f64 = vals[..9].iter().sum();
    let exact = ed::spectrum_sector(&m, 1.0, 1).unwrap()[0];
    assert!((neg + 2.0 * vals[9] - exact).abs() < 1e-12);
}

#[test]
fn gap_curve_matches_sector_spectrum() {
    for n in [5, 7, 9, 11] {
        let m = RingModel::new(n).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let curve = gap_curve(&m, &grid).unwrap();
        for (s, gap) in grid.iter().zip(&curve.gaps) {
            let e = ed::spectrum_sector(&m, *s, 2).unwrap();
            assert!((gap - (e[1] - e[0])).abs() < 1e-9, "N={n} s={s} {gap} {}", e[1] - e[0]);
        }
    }
    let m = RingModel::new(13).unwrap();
    let spec = bdg_energies(&m.nambu_hz().unwrap()).unwrap();
    let e = ed::spectrum_sector(&m, 1.0, 2).unwrap();
    assert!((2.0 * (spec[1] - spec[0]) - (e[1] - e[0])).abs() < 1e-12);
}

#[test]
fn sector_levels_match_sector_spectrum() {
    for (n, s) in [(7, 0.35), (9, 0.8), (9, 0.95), (11, 0.6)] {
        let m = RingModel::new(n).unwrap();
        let lv = sector_levels(&interpolate(&m, s).unwrap(), 8).unwrap();
        let e = ed::spectrum_sector(&m, s, 8).unwrap();
        for (a, b) in lv.excitation_energies.iter().zip(&e) {
            assert!((a - (b - e[0])).abs() < 1e-9, "N={n} s={s}");
        }
    }
}

fn spin_state_overlaps(
    m: &RingModel,
    s: f64,
    k: usize,
    psi: &ed::SpinState,
) -> (Vec<f64>, Vec<f64>) {
    let (e, states) = ed::eigenstates_sector(m, s, k).unwrap();
    (e, states.iter().map(|phi| ed::overlap_sq(phi, psi)).collect())
}

/// Sums populations over clusters of degenerate levels, where individual
/// eigenvectors are basis dependent.
fn cluster(energies: &[f64], pops: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (i, p) in pops.iter().enumerate() {
        if i > 0 && (energies[i] - energies[i - 1]).abs() < 1e-7 {
            *out.last_mut().unwrap() += p;
        } else {
            out.push(*p);
        }
    }
    out
}

#[test]
fn ground_state_overlap_matches_state_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = RingModel::new(9).unwrap();
    for _ in 0..5 {
        let sched = random_schedule(&mut rng, 4);
        let s = rng.random_range(0.0..1.0);
        let psi_f = GaussianState::from(&propagate(&m, &sched).unwrap());
        let gs = &sector_levels(&interpolate(&m, s).unwrap(), 1).unwrap().states[0];
        let psi = ed::evolve(&m, &sched).unwrap();
        let (_, exact) = spin_state_overlaps(&m, s, 1, &psi);
        assert!((gaussian_overlap_sq(gs, &psi_f) - exact[0]).abs() < 1e-9);
    }
}

#[test]
fn populations_match_state_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..6 {
        let n = [5, 7, 9][trial % 3];
        let m = RingModel::new(n).unwrap();
        let sched = random_schedule(&mut rng, 5);
        let trace = populations(&m, &sched, 5).unwrap();
        let mut psi = ed::initial_state(&m).unwrap();
        for i in 1..trace.p_index.len() {
            let (p, s, row) = (trace.p_index[i], trace.s_p[i], &trace.pops[i]);
            let step = p - 1;
            psi = ed::apply_step(&psi, &m, sched.theta_x()[step], sched.theta_z()[step]).unwrap();
            let (e, exact) = spin_state_overlaps(&m, s, 5, &psi);
            let lv = sector_levels(&m.nambu_hz().unwrap().combine(s, &m.nambu_hx(), 1.0 - s), 5)
                .unwrap();
            let bdg_e: Vec<f64> = lv.excitation_energies.iter().map(|x| x + e[0]).collect();
            for (a, b) in bdg_e.iter().zip(&e) {
                assert!((a - b).abs() < 1e-9);
            }
            let ca = cluster(&e, row);
            let cb = cluster(&e, &exact);
            for (a, b) in ca.iter().zip(&cb) {
                assert!((a - b).abs() < 1e-8, "N={n} p={p}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn long_run_unitarity() {
    let m = RingModel::new(13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = random_schedule(&mut rng, 10_000);
    let prop = propagate(&m, &s).unwrap();
    assert!(prop.unitarity_drift() <= 1e-10);
    let init = BdGPropagator::fully_occupied(13);
    assert_eq!(init.unitarity_drift(), 0.0);
}
