use agmon::auxmetric::{agmon_field, aux_value, AuxField, AuxKind, AuxSettings, PathNorm};
use agmon::cubature::{check_discrete_jensen, check_hadamard, psi, psi_scale, QuadratureRule};
use agmon::grid::Grid;
use agmon::linalg::{random_frame, random_psd, SymMat};
use agmon::report::{read_field_binary, write_aux_binary};
use agmon::MatrixWeight;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

fn catalog_weight() -> impl Strategy<Value = (String, MatrixWeight)> {
    (0usize..4).prop_map(|k| {
        let (name, w) = MatrixWeight::catalog(3).swap_remove(k);
        (name.to_string(), w)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catalog_weights_are_symmetric_psd((_, w) in catalog_weight(), x in point()) {
        // Avoid the power weight's singular origin.
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let m = w.eval(&x).unwrap();
        prop_assert!(m.is_symmetric());
        prop_assert!(m.lambda_min() >= -1e-12 * m.norm().max(1.0));
    }

    #[test]
    fn psi_of_identity_is_exact(x in point(), r in 0.01f64..5.0) {
        let w = MatrixWeight::identity(3, 2);
        let m = psi(&w, &x, r, &QuadratureRule::default()).unwrap();
        let expect = SymMat::scaled_identity(2, psi_scale(3, r));
        prop_assert!(m.sub(&expect).frobenius() <= 1e-12 * expect.frobenius());
    }

    #[test]
    fn psi_dominates_under_doubling((_, w) in catalog_weight(), x in point(), r in 0.05f64..1.5) {
        // Ψ(x, r) = r^{2−n}∫_{Q(x,r)} W and Q(x, r) ⊂ Q(x, 2r), so Ψ(x, 2r) ⪰ 2^{2−n}Ψ(x, r).
        let rule = QuadratureRule::default();
        let a = psi(&w, &x, r, &rule).unwrap();
        let b = psi(&w, &x, 2.0 * r, &rule).unwrap();
        let gap = b.sub(&a.scale(0.5));
        prop_assert!(gap.lambda_min() >= -1e-8 * b.norm(), "{}", gap.lambda_min());
    }

    #[test]
    fn directional_aux_lies_between_lower_and_upper((_, w) in catalog_weight(), x in point(), t in 0.0f64..std::f64::consts::TAU) {
        let s = AuxSettings::default();
        let e = vec![t.cos(), t.sin()];
        let lo = aux_value(&w, &x, &AuxKind::Lower, &s).unwrap();
        let hi = aux_value(&w, &x, &AuxKind::Upper, &s).unwrap();
        let me = aux_value(&w, &x, &AuxKind::Directional { e }, &s).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-6));
        prop_assert!(lo * (1.0 - 1e-6) <= me && me <= hi * (1.0 + 1e-6), "{lo} {me} {hi}");
    }

    #[test]
    fn agmon_distance_is_a_metric(values in prop::collection::vec(0.1f64..10.0, 216), a in 0usize..216, b in 0usize..216, c in 0usize..216) {
        let g = Grid::new(3, 1.0, 6).unwrap();
        let f = AuxField { grid: g, d: 1, kind: AuxKind::Lower, values };
        for norm in [PathNorm::Linf, PathNorm::L2] {
            let da = agmon_field(&f, a, norm);
            let db = agmon_field(&f, b, norm);
            prop_assert_eq!(da.values[a], 0.0);
            prop_assert!((da.values[b] - db.values[a]).abs() <= 1e-12 * da.values[b].max(1.0));
            prop_assert!(da.values[c] <= da.values[b] + db.values[c] + 1e-12);
        }
    }

    #[test]
    fn discrete_jensen_and_hadamard_hold(seed in any::<u64>(), d in 2usize..5, k in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<SymMat> = (0..k).map(|_| random_psd(d, d + 2, &mut rng)).collect();
        let t = vec![1.0 / k as f64; k];
        prop_assert!(check_discrete_jensen(&mats, &t, 1e-12).unwrap().pass);
        let m = random_psd(d, 1 + (seed as usize % d), &mut rng);
        prop_assert!(check_hadamard(&m, &random_frame(d, &mut rng)).unwrap().pass);
    }

    #[test]
    fn aux_binary_round_trips(values in prop::collection::vec(any::<f64>(), 125)) {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(3, 2.0, 5).unwrap();
        let f = AuxField { grid: g, d: 2, kind: AuxKind::Upper, values };
        let p = dir.path().join("f.bin");
        write_aux_binary(&p, &f).unwrap();
        let (head, back) = read_field_binary(&p).unwrap();
        prop_assert_eq!(head.grid().unwrap(), g);
        prop_assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
