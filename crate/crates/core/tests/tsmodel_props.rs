use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsobs::linalg::{Mat, Vector};
use tsobs::model_io::{ParamAffineDoc, TsModelDoc};
use tsobs::random::{random_dimensions, random_param_affine_model, RandomScales};
use tsobs::tsmodel::{vertex_pattern, ModelError, Premise, PremiseSpec};
use tsobs::{example, snl_decompose, ParamAffineModel, TsModel};

fn random_model(seed: u64) -> (ParamAffineModel, TsModel, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = random_dimensions(&mut rng, 5, 3, 3);
    let pam = random_param_affine_model(&mut rng, dims, RandomScales::default());
    let ts = snl_decompose(&pam).unwrap();
    (pam, ts, rng)
}

fn point_in_box(rng: &mut ChaCha8Rng, ts: &TsModel) -> Vector {
    let ps = ts.premises().premises();
    Vector::from_iterator(ps.len(), ps.iter().map(|p| rng.random_range(p.min..=p.max)))
}

fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weights_are_convex(seed in any::<u64>()) {
        let (_, ts, mut rng) = random_model(seed);
        let mu = ts.eval_weights(&point_in_box(&mut rng, &ts)).unwrap();
        prop_assert!((mu.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(mu.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn weights_stay_convex_outside_the_box(seed in any::<u64>(), stretch in -5.0f64..5.0) {
        let (_, ts, mut rng) = random_model(seed);
        let z = point_in_box(&mut rng, &ts).map(|v| v * stretch);
        let mu = ts.eval_weights(&z).unwrap();
        prop_assert!((mu.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(mu.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn decomposition_reconstructs_the_affine_model(seed in any::<u64>()) {
        let (pam, ts, mut rng) = random_model(seed);
        let z = point_in_box(&mut rng, &ts);
        let theta = Vector::from_fn(ts.dims().n_theta, |_, _| rng.random_range(-2.0..=2.0));
        let direct = pam.evaluate(&z, &theta);
        let blended = ts.assemble(&ts.eval_weights(&z).unwrap(), &theta).unwrap();
        prop_assert!(rel_diff(&direct.a, &blended.a) <= 1e-10);
        prop_assert!(rel_diff(&direct.b, &blended.b) <= 1e-10);
        prop_assert!(rel_diff(&direct.f, &blended.f) <= 1e-10);
    }

    #[test]
    fn corners_select_their_vertex(seed in any::<u64>()) {
        let (_, ts, _) = random_model(seed);
        let r = ts.dims().r;
        for i in 0..r {
            let z = ts.premises().corner(&ts.patterns()[i]);
            let mu = ts.eval_weights(&z).unwrap();
            for k in 0..r {
                prop_assert_eq!(mu[k], if k == i { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let (pam, ts, _) = random_model(seed);
        let text = serde_json::to_string(&ParamAffineDoc::from_model(&pam)).unwrap();
        let back: ParamAffineDoc = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_model().unwrap(), pam);
        let text = serde_json::to_string(&TsModelDoc::from_model(&ts)).unwrap();
        let back: TsModelDoc = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_model().unwrap(), ts);
    }
}

#[test]
fn vertex_patterns_are_a_bijection() {
    for n_p in 1..=6 {
        let r = 1usize << n_p;
        let mut seen = std::collections::HashSet::new();
        for i in 0..r {
            let bits = vertex_pattern(i, n_p);
            assert_eq!(bits.len(), n_p);
            let back = bits.iter().fold(0usize, |acc, &upper| (acc << 1) | usize::from(!upper));
            assert_eq!(back, i);
            assert!(seen.insert(bits));
        }
        assert!(vertex_pattern(0, n_p).iter().all(|b| *b));
    }
}

#[test]
fn example_decomposition_is_exact() {
    let ts = snl_decompose(&example::param_affine_model()).unwrap();
    let reference = example::reference_matrices();
    assert_eq!(ts.dims().r, 2);
    assert_eq!(ts.a(0), &reference.a1);
    assert_eq!(ts.a(1), &reference.a2);
    assert_eq!(ts.a(0)[(0, 0)], -1.4);
    assert_eq!(ts.a(1)[(1, 2)], 0.0);
    for i in 0..2 {
        assert_eq!(ts.a_bar(i, 0), &reference.a_bar);
        assert_eq!(ts.b(i), &reference.b);
        assert_eq!(ts.b_bar(i, 0), &reference.b_bar);
    }
    assert_eq!(ts.c(), &reference.c);
}

#[test]
fn example_weights_follow_the_premise() {
    let ts = snl_decompose(&example::param_affine_model()).unwrap();
    let mu = ts.eval_weights(&Vector::from_element(1, 0.5)).unwrap();
    assert_eq!(mu.as_slice(), &[0.25, 0.75]);
    // y = (x1 + x2, x2) with x1 = 1.2
    let pv = ts
        .premise_from_io(&Vector::from_row_slice(&[1.5, 0.3]), &Vector::from_element(1, 0.0))
        .unwrap();
    assert!((pv.z[0] - 1.2).abs() < 1e-15);
    assert!(!pv.saturated);
    let pv = ts
        .premise_from_io(&Vector::from_row_slice(&[3.0, 0.0]), &Vector::from_element(1, 0.0))
        .unwrap();
    assert_eq!(pv.z[0], 2.0);
    assert!(pv.saturated);
}

#[test]
fn assemble_rejects_non_convex_weights() {
    let ts = snl_decompose(&example::param_affine_model()).unwrap();
    let err = ts.assemble(&Vector::from_row_slice(&[0.7, 0.7]), &Vector::zeros(1)).unwrap_err();
    assert!(matches!(err, ModelError::NonConvexWeights { .. }));
    let err = ts.assemble(&Vector::from_row_slice(&[1.0]), &Vector::zeros(1)).unwrap_err();
    assert!(matches!(err, ModelError::DimensionMismatch { .. }));
}

#[test]
fn degenerate_premise_box_is_rejected() {
    let err = PremiseSpec::new(vec![Premise { min: 1.0, max: 1.0, selector: Vector::zeros(3) }], 3).unwrap_err();
    assert!(err.to_string().contains("min < max"), "{err}");
}
