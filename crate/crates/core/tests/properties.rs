use std::f64::consts::PI;

use matterwave::analysis::{efficiency, fwhm, populations, IntervalSet, Numerics};
use matterwave::interferometer::signal;
use matterwave::physics::{AmplitudeState, DiffractionConfig, Geometry, InternalState, Mechanism, MomentumGrid, WavePacket, C64};
use matterwave::solver::{evolve_converged, SolverSettings};
use matterwave::transition::{cache, ColumnInput, TransitionFunction};
use proptest::prelude::*;

fn system() -> impl Strategy<Value = (Mechanism, Geometry)> {
    (prop_oneof![Just(Mechanism::Raman), Just(Mechanism::Bragg)], prop_oneof![Just(Geometry::Single), Just(Geometry::Double)])
}

fn small_numerics() -> Numerics {
    Numerics::default().with_grid_points(64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_preserves_norm(
        (mech, geom) in system(),
        delta_tau in 1.0f64..15.0,
        area in 0.0f64..(2.0 * PI),
        q in -0.5f64..0.5,
        order in -1i32..=1,
    ) {
        let settings = SolverSettings::default();
        let cfg = DiffractionConfig::resonant(mech, geom, delta_tau, area);
        let init = AmplitudeState::eigenstate(mech, 3, q, InternalState::Ground, order).unwrap();
        let out = evolve_converged(&init, &cfg, &settings).unwrap();
        prop_assert!((out.state.norm_sqr() - 1.0).abs() <= 10.0 * settings.rel_tol);
    }

    #[test]
    fn double_diffraction_is_mirror_symmetric(
        mech in prop_oneof![Just(Mechanism::Raman), Just(Mechanism::Bragg)],
        delta_tau in 1.5f64..10.0,
        area in 0.5f64..4.0,
        q in 0.0f64..0.5,
    ) {
        let settings = SolverSettings::with_tolerances(1e-9, 1e-11);
        let cfg = DiffractionConfig::resonant(mech, Geometry::Double, delta_tau, area);
        let run = |q: f64| {
            let init = AmplitudeState::eigenstate(mech, 4, q, InternalState::Ground, 0).unwrap();
            evolve_converged(&init, &cfg.with_n_max(matterwave::physics::TruncationOrder::Fixed(6)), &settings).unwrap().state
        };
        let (plus, minus) = (run(q), run(-q));
        for n in -3..=3 {
            for s in [InternalState::Ground, InternalState::Excited] {
                prop_assert!((plus.probability(s, n) - minus.probability(s, -n)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn transition_function_is_linear(
        (mech, geom) in system(),
        delta_tau in 2.0f64..8.0,
        c1 in -0.3f64..0.3,
        c2 in -0.3f64..0.3,
        w1 in 0.03f64..0.15,
        w2 in 0.03f64..0.15,
        a in (-1.0f64..1.0, -1.0f64..1.0),
        b in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let grid = MomentumGrid::new(16);
        let cfg = DiffractionConfig::resonant(mech, geom, delta_tau, PI);
        let inputs: Vec<ColumnInput> = (-2..=2).map(ColumnInput::ground).collect();
        let tf = TransitionFunction::build(&cfg, grid, &inputs, &SolverSettings::default()).unwrap();
        let p1 = WavePacket::gaussian(grid, 2, mech, InternalState::Ground, c1, w1).unwrap();
        let p2 = WavePacket::gaussian(grid, 2, mech, InternalState::Ground, c2, w2).unwrap();
        let (a, b) = (C64::new(a.0, a.1), C64::new(b.0, b.1));
        let lhs = tf.apply(&p1.combine(a, &p2, b).unwrap()).unwrap();
        let rhs = tf.apply(&p1).unwrap().combine(a, &tf.apply(&p2).unwrap(), b).unwrap();
        let diff = lhs.combine(C64::new(1.0, 0.0), &rhs, C64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm_sqr() < 1e-24 * (1.0 + lhs.norm_sqr()));
    }

    #[test]
    fn efficiency_is_a_probability(
        (mech, geom) in system(),
        delta_tau in 1.0f64..10.0,
        area in 0.0f64..(2.0 * PI),
        delta_p in 0.005f64..0.3,
    ) {
        let numerics = small_numerics();
        let cfg = DiffractionConfig::resonant(mech, geom, delta_tau, area);
        let e = efficiency(&cfg, delta_p, None, &numerics).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&e));
        let d = matterwave::analysis::diffract(&cfg, delta_p, &numerics).unwrap();
        let inside = IntervalSet::target().probability(&d.output);
        let edge = d.output.n_max() as f64 + 1.0;
        let outside = IntervalSet::new(vec![(-edge, 0.5), (1.5, edge)]).unwrap().probability(&d.output);
        prop_assert!((inside + outside - 1.0).abs() <= 10.0 * numerics.settings.rel_tol, "{} + {}", inside, outside);
    }

    #[test]
    fn populations_are_complete(
        mech in prop_oneof![Just(Mechanism::Raman), Just(Mechanism::Bragg)],
        delta_tau in 1.0f64..10.0,
        delta_p in 0.005f64..0.2,
    ) {
        let numerics = small_numerics();
        let p = populations(&DiffractionConfig::resonant(mech, Geometry::Double, delta_tau, PI), delta_p, &numerics).unwrap();
        prop_assert!((p.total() - 1.0).abs() <= 10.0 * numerics.settings.rel_tol);
        for v in [p.minus, p.rest, p.plus, p.other] {
            prop_assert!(v >= -1e-12);
        }
    }

    #[test]
    fn fwhm_recovers_gaussian_widths(sigma in 0.01f64..0.3, center in -0.2f64..0.2, height in 0.01f64..1.0) {
        let xs: Vec<f64> = (0..4001).map(|i| -2.0 + i as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| height * (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let exact = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma;
        prop_assert!((fwhm(&xs, &ys, true).unwrap() / exact - 1.0).abs() < 5e-3);
    }

    #[test]
    fn cache_encoding_round_trips(
        (mech, geom) in system(),
        delta_tau in 1.0f64..6.0,
        area in 0.0f64..4.0,
        offset in -0.5f64..0.5,
    ) {
        let grid = MomentumGrid::centered(8, offset);
        let cfg = DiffractionConfig::resonant(mech, geom, delta_tau, area).with_p0_resonant(offset);
        let tf = TransitionFunction::build(&cfg, grid, &[ColumnInput::ground(0), ColumnInput::ground(1)], &SolverSettings::default()).unwrap();
        let back = cache::decode(&cache::encode(&tf)).unwrap();
        prop_assert_eq!(cache::encode(&back), cache::encode(&tf));
        prop_assert_eq!(back.columns().len(), tf.columns().len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interferogram_invariants(
        (mech, geom) in system(),
        delta_tau in 1.5f64..8.0,
        delta_p in 0.01f64..0.2,
    ) {
        let numerics = small_numerics();
        let s = signal(&DiffractionConfig::resonant(mech, geom, delta_tau, PI), delta_p, 65, &numerics).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&s.contrast));
        prop_assert!((0.0..=1.0 + 1e-2).contains(&s.amplitude));
        let n = s.intensities.len();
        for i in 0..n {
            let d = (s.intensities[i] - s.intensities[n - 1 - i]).abs();
            // exact for identical arms; solver error breaks it at O(rel_tol)
            prop_assert!(d <= numerics.settings.rel_tol * s.amplitude, "I({}) − I(2π − φ) = {:e}", s.phases[i], d);
        }
        prop_assert!(s.fit_residual < 1e-10);
    }

    #[test]
    fn efficiency_falls_with_packet_width(
        (mech, geom) in system(),
        micros in 25.0f64..60.0,
    ) {
        let tau = matterwave::physics::UnitSystem::default().micros_to_dimensionless(micros);
        let cfg = DiffractionConfig::resonant(mech, geom, tau, PI);
        let numerics = Numerics::default().with_grid_points(128);
        let values: Vec<f64> = (0..8)
            .map(|i| efficiency(&cfg, 0.005 + 0.03 * i as f64, None, &numerics).unwrap().value)
            .collect();
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-3, "{:?}", values);
        }
    }
}
