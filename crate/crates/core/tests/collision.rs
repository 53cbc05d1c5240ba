use collide::collision::*;
use collide::linalg::{self, c, cr, kron, max_abs_diff, ops, partial_trace_idx, trace_distance, Mat, Vector, C64};
use collide::random;
use collide::states::{qubit_density, DensityMatrix, QubitParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vacuum() -> DensityMatrix {
    DensityMatrix::single(linalg::projector(&ops::ground()), "A").unwrap()
}

fn all_qubit_spec(g: f64, gz: f64, dt: f64, eta: DensityMatrix) -> CollisionModelSpec {
    CollisionModelSpec::basic(Mat::zeros(2, 2), Mat::zeros(2, 2), all_qubit_coupling(g, gz), eta, dt)
}

fn dm(m: Mat) -> DensityMatrix {
    DensityMatrix::single(m, "S").unwrap()
}

#[test]
fn vacuum_map_closed_form_for_200_steps() {
    let (g, gz, dt) = (0.8, 0.35, 0.1);
    let (p0, c0) = (0.7, c(0.2, -0.3));
    let rho0 = qubit_density(QubitParams::new(p0, c0)).unwrap();
    let states = run_states(&all_qubit_spec(g, gz, dt, vacuum()), rho0.matrix(), 200).unwrap();
    let co = (g * dt).cos();
    for (n, rho) in states.iter().enumerate() {
        let q = QubitParams::from_matrix(rho);
        let pn = co.powi(2 * n as i32) * p0;
        let cn = C64::from_polar(co.powi(n as i32), 2.0 * gz * n as f64 * dt) * c0;
        assert!((q.p - pn).abs() < 1e-12, "n = {n}: p {} vs {pn}", q.p);
        assert!((q.c - cn).norm() < 1e-12, "n = {n}: c {} vs {cn}", q.c);
    }
}

#[test]
fn heisenberg_collisions_homogenize() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let eta = random::density(&mut rng, 2);
    let rho0 = random::density(&mut rng, 2);
    let g = 1.0;
    let spec = all_qubit_spec(g, g / 2.0, 0.6, DensityMatrix::single(eta.clone(), "A").unwrap());
    let states = run_states(&spec, &rho0, 400).unwrap();
    let td = trace_distance(states.last().unwrap(), &eta).unwrap();
    assert!(td < 1e-6, "trace distance to ancilla state {td:.3e}");
}

#[test]
fn pi_map_fixes_diagonal_and_oscillates_from_plus() {
    let u = build_unitary(&Mat::zeros(2, 2), &Mat::zeros(2, 2), &all_qubit_coupling(1.0, 0.0), std::f64::consts::PI).unwrap();
    let ks = kraus_operators(&u, vacuum().matrix(), 2).unwrap();
    let map = |r: &Mat| apply_kraus(&ks, r);
    let diag = qubit_density(QubitParams::new(0.3, cr(0.0))).unwrap().into_matrix();
    assert!(max_abs_diff(&map(&diag), &diag) < 1e-14);

    let plus = linalg::projector(&ops::plus());
    let mut states = vec![plus];
    for _ in 0..20 {
        let next = map(states.last().unwrap());
        states.push(next);
    }
    assert_eq!(detect_steady(&states, 6, 1e-10, &map).unwrap(), Steady::Oscillating { period: 2 });
}

fn cascaded_spec(u1_off: bool) -> CollisionModelSpec {
    let h2 = ops::sigma_z() * cr(0.4);
    let h_s = kron(&Mat::zeros(2, 2), &linalg::identity(2)).unwrap() + kron(&linalg::identity(2), &h2).unwrap();
    let v1 = if u1_off { Mat::zeros(4, 4) } else { all_qubit_coupling(0.9, 0.2) };
    CollisionModelSpec {
        h_s: h_s.into(),
        h_anc: (ops::sigma_z() * cr(0.3)).into(),
        coupling: v1.into(),
        ancilla: vacuum().into(),
        dt: 0.4,
        variant: Variant::Cascaded { subsystem_dims: [2, 2], second: all_qubit_coupling(0.7, 0.1).into() },
    }
}

#[test]
fn first_cascaded_system_ignores_the_second() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rho0 = random::density(&mut rng, 4);
    let spec = cascaded_spec(false);
    let joint = run_states(&spec, &rho0, 12).unwrap();
    let alone = CollisionModelSpec::basic(
        Mat::zeros(2, 2),
        ops::sigma_z() * cr(0.3),
        all_qubit_coupling(0.9, 0.2),
        vacuum(),
        spec.dt / 2.0,
    );
    let rho1 = partial_trace_idx(&rho0, &[2, 2], &[0]).unwrap();
    let single = run_states(&alone, &rho1, 12).unwrap();
    for (n, (j, s)) in joint.iter().zip(&single).enumerate() {
        let r1 = partial_trace_idx(j, &[2, 2], &[0]).unwrap();
        assert!(max_abs_diff(&r1, s) < 1e-12, "step {n}: {}", max_abs_diff(&r1, s));
    }
}

#[test]
fn idle_first_collision_leaves_plain_model_on_second() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let rho0 = random::density(&mut rng, 4);
    let joint = run_states(&cascaded_spec(true), &rho0, 10).unwrap();
    // U₂ still carries the ancilla free evolution of the first half step.
    let ancilla_half = linalg::expm_unitary(&(ops::sigma_z() * cr(0.3)), 0.2).unwrap();
    let u2 = build_unitary(&(ops::sigma_z() * cr(0.4)), &(ops::sigma_z() * cr(0.3)), &all_qubit_coupling(0.7, 0.1), 0.2).unwrap();
    let s2_free = linalg::expm_unitary(&(ops::sigma_z() * cr(0.4)), 0.2).unwrap();
    let u = &u2 * kron(&s2_free, &ancilla_half).unwrap();
    let ks = kraus_operators(&u, vacuum().matrix(), 2).unwrap();
    let mut rho2 = partial_trace_idx(&rho0, &[2, 2], &[1]).unwrap();
    for (n, j) in joint.iter().enumerate() {
        let r2 = partial_trace_idx(j, &[2, 2], &[1]).unwrap();
        assert!(max_abs_diff(&r2, &rho2) < 1e-12, "step {n}");
        rho2 = apply_kraus(&ks, &rho2);
    }
}

#[test]
fn cascade_order_matters_for_second_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let rho0 = DensityMatrix::new(random::density(&mut rng, 4), linalg::TensorSpace::new(vec![2, 2], vec!["S1", "S2"]).unwrap()).unwrap();
    let h_s = Mat::zeros(4, 4);
    let (u1, u2) = cascaded_unitaries(
        &h_s,
        &Mat::zeros(2, 2),
        &all_qubit_coupling(1.1, 0.0),
        &(all_qubit_coupling(0.6, 0.0) + kron(&ops::sigma_x(), &ops::sigma_z()).unwrap() * cr(0.5)),
        [2, 2],
        0.8,
    )
    .unwrap();
    let eta = vacuum();
    let step = |rho: &DensityMatrix, a: &Mat, b: &Mat| cascaded_step(rho, &eta, a, b).unwrap().rho;
    let forward = step(&step(&rho0, &u1, &u2), &u1, &u2);
    let reversed = step(&step(&rho0, &u2, &u1), &u2, &u1);
    let s2 = |r: &DensityMatrix| partial_trace_idx(r.matrix(), &[2, 2], &[1]).unwrap();
    assert!(max_abs_diff(&s2(&forward), &s2(&reversed)) > 1e-6);
}

#[test]
fn chain_contraction_matches_dense_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let (ds, da) = (2, 2);
    let psi0 = random::pure_state(&mut rng, ds);
    let spec = CollisionModelSpec::basic(
        random::hermitian(&mut rng, ds),
        random::hermitian(&mut rng, da),
        random::hermitian(&mut rng, ds * da),
        vacuum(),
        0.5,
    );
    let u = spec.unitary(1).unwrap();
    let reference = ops::ket(da, 1);
    let mut chain = PureChainState::new(psi0.clone(), da, 1).unwrap();
    let mut dense = Mat::from_column_slice(ds, 1, psi0.as_slice());
    let mut dims = vec![ds];
    let engine = run_states(&spec, &linalg::projector(&psi0), 3).unwrap();
    for k in 1..=3 {
        chain = mps_evolve(&chain, &u).unwrap();
        dense = kron(&dense, &Mat::from_column_slice(da, 1, reference.as_slice())).unwrap();
        dims.push(da);
        dense = linalg::apply_left(&u, &dense, &dims, &[0, k]).unwrap();
        let contracted: Vector = chain.contract().unwrap();
        let dev = contracted.iter().zip(dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12, "n = {k}: {dev:.3e}");
        assert!((contracted.norm() - 1.0).abs() < 1e-10);
        assert!(max_abs_diff(&chain.reduced_system(), &engine[k]) < 1e-12);
    }
}

fn random_setup(seed: u64, ds: usize, da: usize) -> (Mat, Mat, Mat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random::unitary(&mut rng, ds * da);
    let eta = random::density(&mut rng, da);
    let rho = random::density(&mut rng, ds);
    (u, eta, rho)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kraus_operators_are_complete(seed in any::<u64>(), ds in 2usize..4, da in 2usize..4) {
        let (u, eta, _) = random_setup(seed, ds, da);
        let ks = kraus_operators(&u, &eta, ds).unwrap();
        let sum = ks.iter().fold(Mat::zeros(ds, ds), |acc, k| acc + k.adjoint() * k);
        prop_assert!(max_abs_diff(&sum, &linalg::identity(ds)) < 1e-12);
    }

    #[test]
    fn kraus_map_matches_dilation(seed in any::<u64>(), ds in 2usize..4, da in 2usize..4) {
        let (u, eta, rho) = random_setup(seed, ds, da);
        let rec = collide(
            &DensityMatrix::single(rho.clone(), "S").unwrap(),
            &DensityMatrix::single(eta.clone(), "A").unwrap(),
            &u,
        ).unwrap();
        let ks = kraus_operators(&u, &eta, ds).unwrap();
        prop_assert!(max_abs_diff(&apply_kraus(&ks, &rho), rec.rho.matrix()) < 1e-12);
        let via_superop = linalg::apply_superop(&kraus_superop(&ks), &rho);
        prop_assert!(max_abs_diff(&via_superop, rec.rho.matrix()) < 1e-12);
    }

    #[test]
    fn collisions_conserve_joint_purity_and_trace(seed in any::<u64>()) {
        let (u, eta, rho) = random_setup(seed, 2, 3);
        let rec = collide(&dm(rho.clone()), &DensityMatrix::single(eta.clone(), "A").unwrap(), &u).unwrap();
        let joint = rec.joint.as_ref().unwrap();
        let before = kron(&rho, &eta).unwrap();
        let purity_before = (&before * &before).trace().re;
        prop_assert!((joint.purity() - purity_before).abs() < 1e-12);
        prop_assert!((rec.rho.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!((rec.eta_out.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::eigvalsh(rec.rho.matrix()).unwrap().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn squaring_returns_a_fixed_point(seed in any::<u64>()) {
        let (u, eta, rho) = random_setup(seed, 2, 2);
        let s = kraus_superop(&kraus_operators(&u, &eta, 2).unwrap());
        if let Some((ss, _)) = steady_by_squaring(&s, &rho, 1e-13, 64) {
            prop_assert!(max_abs_diff(&linalg::apply_superop(&s, &ss), &ss) < 1e-9);
            prop_assert!((ss.trace().re - 1.0).abs() < 1e-12);
        }
    }
}
