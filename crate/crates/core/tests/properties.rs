use hubmag::control::StepController;
use hubmag::dense;
use hubmag::io::{fmt_f64, read_model, write_model, CsvTable};
use hubmag::krylov::{lanczos_expm, DenseHermitian, DEFAULT_M_MAX};
use hubmag::sparse::{cdot, diff_norm, norm2, MatvecCounter};
use hubmag::{Basis, Geometry, HubbardModel, Method, PulseParams, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let s = norm2(&v);
    v.into_iter().map(|z| z / s).collect()
}

fn geometry() -> impl Strategy<Value = Geometry> {
    let shape = prop::sample::select(vec![(1usize, 2usize), (1, 4), (2, 2), (2, 3)]);
    (shape, -1.5f64..1.5, prop::collection::vec(-3.0f64..3.0, 6)).prop_map(|((r, c), hop, e)| {
        let mut g = Geometry::uniform(r, c, 0.0, hop);
        g.on_site = e[..r * c].to_vec();
        g
    })
}

fn pulse() -> impl Strategy<Value = PulseParams> {
    (0.0f64..1.0, 0.5f64..8.0, 0.5f64..3.0, 0.0f64..10.0).prop_map(|(a, w, s, tp)| PulseParams::new(a, w, s, tp))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_index_inverts_enumeration(n in 2usize..=10, up in 0usize..=5, down in 0usize..=5) {
        prop_assume!(up <= n && down <= n);
        let b = Basis::enumerate(n, up, down).unwrap();
        for (k, (u, d)) in b.states().enumerate() {
            prop_assert_eq!(b.index_of(u, d), Some(k));
            prop_assert_eq!((u.count() as usize, d.count() as usize), (up, down));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(g in geometry(), u in 0.0f64..10.0, p in pulse(), t in 0.0f64..12.0) {
        let m = HubbardModel::half_filled(&g, u, p).unwrap();
        let h = m.dense(t);
        prop_assert!((&h - h.adjoint()).iter().all(|z| z.norm() < 1e-14));
        let s = m.h_symm.to_dense();
        let a = m.h_anti.to_dense();
        prop_assert!((&s - s.transpose()).amax() == 0.0);
        prop_assert!((&a + a.transpose()).amax() == 0.0);
    }

    #[test]
    fn spectrum_does_not_depend_on_the_drive_phase(g in geometry(), u in 0.0f64..8.0, p in pulse(), t in 0.0f64..12.0) {
        let m = HubbardModel::half_filled(&g, u, p).unwrap();
        let a = dense::eigvalsh(&m.dense(0.0));
        let b = dense::eigvalsh(&m.dense(t));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn every_step_is_unitary_except_runge_kutta(
        p in pulse(), t0 in 0.0f64..12.0, tau in 0.01f64..0.5, seed in 0u64..1000,
    ) {
        let m = HubbardModel::half_filled(&Geometry::uniform(2, 2, -1.0, 1.0), 4.0, p).unwrap();
        let psi = random_state(m.dim(), seed);
        let c = MatvecCounter::new();
        for method in Method::EXPONENTIAL {
            let next = method.stepper(1e-13).step(&m, t0, tau, &psi, &c).unwrap();
            prop_assert!((norm2(&next) - 1.0).abs() < 1e-11, "{}", method);
        }
    }

    #[test]
    fn symmetric_schemes_are_time_reversible(p in pulse(), t0 in 0.0f64..12.0, tau in 0.01f64..0.3, seed in 0u64..1000) {
        let m = HubbardModel::half_filled(&Geometry::uniform(1, 2, -1.0, 1.0), 4.0, p).unwrap();
        let psi = random_state(m.dim(), seed);
        let c = MatvecCounter::new();
        for method in [Method::Cf2, Method::Cf4, Method::Cf4o, Method::Cf4oH, Method::Magnus4, Method::MagnusStrang4] {
            let s = method.stepper(1e-14);
            let fwd = s.step(&m, t0, tau, &psi, &c).unwrap();
            let back = s.step(&m, t0 + tau, -tau, &fwd, &c).unwrap();
            prop_assert!(diff_norm(&back, &psi) < 1e-11, "{}", method);
        }
    }

    #[test]
    fn lanczos_propagator_preserves_norm(n in 5usize..40, t in -3.0f64..3.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dense::random_hermitian(n, &mut rng);
        let v = random_state(n, seed + 1);
        let r = lanczos_expm(&DenseHermitian(h.clone()), &v, t, 1e-12, DEFAULT_M_MAX).unwrap();
        prop_assert!((norm2(&r.w) - 1.0).abs() < 1e-12);
        prop_assert!(diff_norm(&r.w, &dense::expm_hermitian_apply(&h, t, &v)) < 1e-11);
        prop_assert!(r.bound >= 0.0);
    }

    #[test]
    fn controller_accepts_exactly_within_tolerance(
        tol in 1e-14f64..1e-2, err in 0.0f64..1.0, tau in 1e-6f64..1.0, order in 1u32..8,
    ) {
        let c = StepController::new(tol, order).unwrap();
        let (accept, next) = c.propose(tau, err);
        prop_assert_eq!(accept, err <= tol);
        prop_assert!(next >= 0.25 * tau * (1.0 - 1e-15) && next <= 4.0 * tau * (1.0 + 1e-15));
        let (_, next_worse) = c.propose(tau, 2.0 * err + 1e-300);
        prop_assert!(next_worse <= next);
    }

    #[test]
    fn energy_is_real_and_double_occupation_bounded(p in pulse(), t in 0.0f64..12.0, seed in 0u64..1000) {
        let m = HubbardModel::half_filled(&Geometry::uniform(2, 2, -0.5, 1.0), 4.0, p).unwrap();
        let psi = random_state(m.dim(), seed);
        let e = m.energy(t, &psi).unwrap();
        let h = m.dense(t);
        let hp = &h * nalgebra::DVector::from_column_slice(&psi);
        let exact = cdot(&psi, hp.as_slice());
        prop_assert!((e - exact.re).abs() < 1e-12 && exact.im.abs() < 1e-12);
        let d = m.double_occupation(&psi).unwrap();
        prop_assert!((0.0..=0.5 + 1e-12).contains(&d));
    }

    #[test]
    fn model_files_round_trip(g in geometry(), u in 0.0f64..10.0, p in pulse()) {
        let m = HubbardModel::half_filled(&g, u, p).unwrap();
        let mut bytes = Vec::new();
        write_model(&mut bytes, &m).unwrap();
        let back = read_model(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.dim(), m.dim());
        prop_assert_eq!(back.pulse, m.pulse);
        prop_assert_eq!(&back.h_diag, &m.h_diag);
        prop_assert!(back.dense(1.3) == m.dense(1.3));
        for cut in [0, 4, bytes.len() / 2, bytes.len() - 1] {
            prop_assert!(read_model(&mut &bytes[..cut]).is_err());
        }
    }

    #[test]
    fn csv_numbers_round_trip(xs in prop::collection::vec(any::<f64>(), 1..20)) {
        let mut t = CsvTable::new(&["x"]);
        t.meta("command", "test");
        for &x in &xs {
            t.push(vec![fmt_f64(x)]).unwrap();
        }
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = CsvTable::read(buf.as_slice()).unwrap();
        prop_assert_eq!(back.get_meta("command"), Some("test"));
        for (row, &x) in back.rows.iter().zip(&xs) {
            let y: f64 = row[0].parse().unwrap();
            prop_assert!(y == x || (x.is_nan() && y.is_nan()));
        }
    }
}
