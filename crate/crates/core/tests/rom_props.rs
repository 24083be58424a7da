mod common;

use std::f64::consts::PI;

use ndarray::{array, Array1, Array2, Array3};
use rand_chacha::ChaCha8Rng;
use romstab::mes::lagrange_stability_check;
use romstab::pod::{compute_basis, effective_rank, PodBasis};
use romstab::rom::{assemble, integrate_rom, integrate_rom_until_blow_up, ClosureConfig, QuadraticRom};
use romstab::truth::{make_synthetic, simulate, TruthKind, TruthModel};
use romstab::RomError;

use common::*;

/// `e = 0`, skew `L`, energy-conserving `C` with `|C|_F = c_norm`, diagonal `D < 0`.
fn conservative_rom(g: &mut ChaCha8Rng, r: usize, c_norm: f64, mu: f64) -> QuadraticRom {
    let raw = random_tensor(g, r, 1.0);
    let mut c = Array3::from_shape_fn((r, r, r), |(i, j, k)| 0.5 * (raw[[i, j, k]] - raw[[j, i, k]]));
    let f = frob(c.view());
    c.mapv_inplace(|x| x * c_norm / f);
    let l = random_skew(g, r);
    let d = Array2::from_diag(&Array1::from_shape_fn(r, |i| -(1.0 + i as f64) * (1.0 + 0.3 * normal(g).abs())));
    QuadraticRom::new(Array1::zeros(r), l, d, c, mu, "random").unwrap()
}

/// Direction uniform on the sphere, norm log-uniform on `[1e-4, 1e4]`.
fn random_state(g: &mut ChaCha8Rng, r: usize) -> Array1<f64> {
    let v = gaussian_vec(g, r);
    let scale = 10f64.powf(-4.0 + 8.0 * rand::Rng::random::<f64>(g));
    &v * (scale / norm2(v.view()))
}

fn matrix_norm2(m: &Array2<f64>) -> f64 {
    let mtm = m.t().dot(m);
    lambda_max_power(mtm.view(), 1.0 + mtm.iter().map(|x| x.abs()).sum::<f64>()).sqrt()
}

fn fourier_basis(n: usize) -> PodBasis {
    let modes = Array2::from_shape_fn((n, 2), |(k, j)| {
        let x = 2.0 * PI * k as f64 / n as f64;
        2f64.sqrt() * if j == 0 { x.sin() } else { x.cos() }
    });
    PodBasis::from_modes(modes, Array1::zeros(n), Array1::from_elem(n, 1.0 / n as f64)).unwrap()
}

#[test]
fn identity_projection_reproduces_synthetic_coefficients() {
    let n = 7;
    let spectrum: Vec<f64> = (0..n).map(|k| 3.0 - 0.3 * k as f64).collect();
    let model = make_synthetic(n, 4, &spectrum).unwrap().with_viscosity(0.7);
    let TruthKind::SyntheticQuadratic(truth) = &model.kind else {
        panic!("expected synthetic model")
    };
    let basis = PodBasis::from_modes(Array2::eye(n), Array1::zeros(n), Array1::from_elem(n, 1.0)).unwrap();
    let rom = assemble(&model, &basis).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    assert!(rom.e().iter().zip(truth.e.iter()).all(|(a, b)| close(*a, *b)));
    assert!(rom.l().iter().zip(truth.l.iter()).all(|(a, b)| close(*a, *b)));
    assert!(rom.d().iter().zip(truth.d.iter()).all(|(a, b)| close(*a, *b)));
    assert!(rom.c().iter().zip(truth.c.iter()).all(|(a, b)| close(*a, *b)));

    let mut g = rng(11);
    for _ in 0..20 {
        let z = gaussian_vec(&mut g, n);
        let want = model.rhs(z.view(), 0.7).unwrap();
        let got = rom.rhs_nominal(z.view()).unwrap();
        assert!(norm2((&got - &want).view()) <= 1e-12 * norm2(want.view()));
    }
}

#[test]
fn fourier_pair_damping_matches_discrete_laplacian() {
    let n = 256;
    let model = TruthModel::burgers(n, 0.01).unwrap();
    let rom = assemble(&model, &fourier_basis(n)).unwrap();
    let h = 1.0 / n as f64;
    // eigenvalue of the three-point Laplacian on the first harmonic
    let discrete = -4.0 / (h * h) * (PI * h).sin().powi(2);
    let d = rom.d();
    for i in 0..2 {
        assert!(rel_err(d[[i, i]], discrete) <= 1e-10, "{} vs {discrete}", d[[i, i]]);
    }
    assert!(d[[0, 1]].abs() <= 1e-9 && d[[1, 0]].abs() <= 1e-9);
    // the continuum value is only reached as h -> 0
    assert!((d[[0, 0]] + 4.0 * PI * PI).abs() < 2e-2);
}

#[test]
fn full_rank_rom_tracks_projected_truth() {
    let n = 8;
    let spectrum: Vec<f64> = (0..n).map(|k| 2.6 - 0.2 * k as f64).collect();
    let model = make_synthetic(n, 2, &spectrum).unwrap().with_viscosity(0.5);
    let mut g = rng(12);
    let z0 = gaussian_vec(&mut g, n);
    let traj = simulate(&model, z0.view(), 0.5, 1.0, 1e-3).unwrap();
    let snaps = model.collect_snapshots(&traj, 5).unwrap();
    let probe = compute_basis(&snaps, 1, false).unwrap();
    let r = effective_rank(probe.spectrum.view());
    assert_eq!(r, n);
    let basis = compute_basis(&snaps, r, false).unwrap();
    let rom = assemble(&model, &basis).unwrap();
    let q0 = basis.project(z0.view()).unwrap();
    let rom_traj = integrate_rom(&rom, None, q0.view(), 1.0, 1e-3).unwrap();
    let projected = basis.project_rows(&traj.states).unwrap();
    for j in (0..traj.len()).step_by(50) {
        let diff = &rom_traj.state(j) - &projected.row(j);
        assert!(norm2(diff.view()) <= 1e-8 * norm2(projected.row(j)), "t = {}", traj.times[j]);
    }
}

#[test]
fn hand_evaluated_closure() {
    let rom = QuadraticRom::new(
        Array1::zeros(2),
        Array2::zeros((2, 2)),
        Array2::from_diag(&array![-1.0, -2.0]),
        Array3::zeros((2, 2, 2)),
        0.5,
        "hand",
    )
    .unwrap();
    let cfg = ClosureConfig::new(0.0, 0.1, 10.0);
    assert!((cfg.bound(array![1.0, 1.0].view()) - 20.0).abs() < 1e-12);
    let h = rom.closure_h(&cfg, array![1.0, 1.0].view()).unwrap();
    assert!((h[0] + 2.0).abs() < 1e-12 && (h[1] + 4.0).abs() < 1e-12);
    assert_eq!(rom.closure_h(&cfg, array![0.0, 0.0].view()).unwrap(), array![0.0, 0.0]);
}

#[test]
fn zero_closure_is_nominal_and_bad_configs_are_rejected() {
    let mut g = rng(13);
    let rom = conservative_rom(&mut g, 5, 3.0, 0.2);
    let off = ClosureConfig::new(0.0, 0.0, 10.0);
    for _ in 0..20 {
        let q = gaussian_vec(&mut g, 5);
        assert_eq!(rom.rhs_stabilized(&off, q.view()).unwrap(), rom.rhs_nominal(q.view()).unwrap());
    }
    let q = gaussian_vec(&mut g, 5);
    assert!(rom.rhs_stabilized(&ClosureConfig::new(-0.2, 0.0, 10.0), q.view()).is_err());
    assert!(rom.rhs_stabilized(&ClosureConfig::new(0.0, -1e-3, 10.0), q.view()).is_err());
    assert!(rom.rhs_stabilized(&ClosureConfig::new(0.85, 1.25e-6, 10.0), q.view()).is_ok());
}

#[test]
fn indefinite_damping_is_an_error() {
    let d = array![[-1.0, 0.0], [0.0, 0.5]];
    let res = QuadraticRom::new(Array1::zeros(2), Array2::zeros((2, 2)), d, Array3::zeros((2, 2, 2)), 1.0, "bad");
    assert!(matches!(res, Err(RomError::IndefiniteDamping(_))));
}

#[test]
fn conservative_rhs_never_injects_energy() {
    let mut g = rng(14);
    for _ in 0..20 {
        let rom = conservative_rom(&mut g, 6, 5.0, 0.1);
        for _ in 0..50 {
            let q = gaussian_vec(&mut g, 6);
            let rhs = rom.rhs_nominal(q.view()).unwrap();
            let power: f64 = q.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum();
            assert!(power <= 1e-12 * norm2(q.view()) * norm2(rhs.view()));
        }
    }
}

#[test]
fn bound_function_dominates_f_tilde() {
    let mut g = rng(15);
    let rom = conservative_rom(&mut g, 5, 10.0, 0.1);
    let l_max = matrix_norm2(rom.l()) * (1.0 + 1e-9);
    let quad = ClosureConfig::new(0.0, 0.0, 10.0);
    let affine = quad.with_affine_bound(l_max);
    let no_linear = QuadraticRom::new(Array1::zeros(5), Array2::zeros((5, 5)), rom.d().clone(), rom.c().clone(), 0.1, "c only").unwrap();
    for _ in 0..100_000 {
        let q = random_state(&mut g, 5);
        let f = rom.f_tilde(q.view()).unwrap();
        assert!(norm2(f.view()) <= affine.bound(q.view()) * (1.0 + 1e-12));
        let f = no_linear.f_tilde(q.view()).unwrap();
        assert!(norm2(f.view()) <= quad.bound(q.view()) * (1.0 + 1e-12));
    }
}

#[test]
fn lyapunov_bound_holds_and_is_negative_outside_the_set() {
    let mut g = rng(16);
    let mut outside = 0;
    for trial in 0..10 {
        let rom = conservative_rom(&mut g, 4, 10.0, 0.05);
        let cfg = ClosureConfig::new(0.02 * trial as f64, 1e-3 * trial as f64, 10.0).with_affine_bound(matrix_norm2(rom.l()) * (1.0 + 1e-9));
        let lam = {
            let sym = (rom.d() + &rom.d().t()) * 0.5;
            lambda_max_power(sym.view(), 1.0 + sym.iter().map(|x| x.abs()).sum::<f64>())
        };
        assert!(rel_err(lam, rom.lambda_max_d()) < 1e-8);
        for _ in 0..500 {
            let q = random_state(&mut g, 4);
            let nq = norm2(q.view());
            let rhs = rom.rhs_stabilized(&cfg, q.view()).unwrap();
            let measured: f64 = q.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum();
            let bound = rom.lyapunov_bound(&cfg, q.view()).unwrap();
            assert!(measured <= bound + 1e-10 * bound.abs().max(nq * nq));
            if rom.invariant_set_margin(&cfg, q.view()).unwrap() < 0.0 {
                outside += 1;
                assert!(bound < 0.0);
            }
        }
    }
    assert!(outside > 500, "only {outside} samples outside the set");
}

#[test]
fn margin_decreases_with_nonlinear_gain() {
    let mut g = rng(17);
    let rom = conservative_rom(&mut g, 4, 10.0, 0.1);
    for _ in 0..200 {
        let q = random_state(&mut g, 4);
        let lo = rom.invariant_set_margin(&ClosureConfig::new(0.1, 1e-3, 10.0), q.view()).unwrap();
        let hi = rom.invariant_set_margin(&ClosureConfig::new(0.1, 2e-3, 10.0), q.view()).unwrap();
        assert!(hi < lo);
    }
    let zero = Array1::zeros(4);
    assert_eq!(
        rom.invariant_set_margin(&ClosureConfig::new(0.1, 1e-3, 10.0), zero.view()).unwrap(),
        f64::INFINITY
    );
}

#[test]
fn tiny_states_lie_outside_the_set() {
    let mut g = rng(18);
    let rom = conservative_rom(&mut g, 4, 10.0, 0.1);
    let cfg = ClosureConfig::new(0.0, 1e-6, 10.0);
    for _ in 0..100 {
        let v = gaussian_vec(&mut g, 4);
        let q = &v * (1e-6 / norm2(v.view()));
        assert!(rom.invariant_set_margin(&cfg, q.view()).unwrap() < 0.0);
        assert!(rom.lyapunov_bound(&cfg, q.view()).unwrap() < 0.0);
    }
}

#[test]
fn closure_keeps_bounded_trajectories_bounded() {
    for seed in 0..12u64 {
        let mut g = rng(100 + seed);
        let mut rom = conservative_rom(&mut g, 4, 2.0, 0.05);
        // a constant forcing makes the nominal dynamics non-trivial
        rom = QuadraticRom::new(gaussian_vec(&mut g, 4), rom.l().clone(), rom.d().clone(), rom.c().clone(), 0.05, "forced").unwrap();
        let q0 = gaussian_vec(&mut g, 4);
        let (nominal, blow) = integrate_rom_until_blow_up(&rom, None, q0.view(), 5.0, 1e-3).unwrap();
        if blow.is_some() || !lagrange_stability_check(&nominal) {
            continue;
        }
        let cfg = ClosureConfig::new(0.05 * seed as f64, 1e-3 * seed as f64, 10.0);
        let tuned = integrate_rom(&rom, Some(&cfg), q0.view(), 5.0, 1e-3).unwrap();
        assert!(lagrange_stability_check(&tuned));
    }
    let zero = Array1::zeros(3);
    let rom = conservative_rom(&mut rng(3), 3, 1.0, 0.1);
    let traj = integrate_rom(&rom, None, zero.view(), 1.0, 0.01).unwrap();
    assert!(traj.states.iter().all(|&x| x == 0.0));
}

#[test]
fn rom_json_round_trips() {
    let mut g = rng(19);
    let rom = conservative_rom(&mut g, 3, 4.0, 0.3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rom.json");
    rom.save_json(&path).unwrap();
    let back = QuadraticRom::load_json(&path).unwrap();
    assert_eq!(back, rom);
}
