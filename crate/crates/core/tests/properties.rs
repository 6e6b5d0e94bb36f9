use proptest::prelude::*;

use hyperwalk::estimators::stats::{wilson, Moments};
use hyperwalk::geometry::{GroupElement, Mobius, SpaceModel, Word};
use hyperwalk::verifier::lattice::DEFAULT_STATE_CAP;
use hyperwalk::verifier::LatticeLaw;
use hyperwalk::walk::{decompose, sample_path_for_trial, Atom, StepDistribution, WalkConfig, DEFAULT_CONVOLUTION_CAP};

fn letters(rank: u8) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..2 * rank, 0..14)
}

fn tree_word() -> impl Strategy<Value = GroupElement> {
    letters(2).prop_map(|l| GroupElement::Word(Word::from_letters(l)))
}

fn mobius() -> impl Strategy<Value = GroupElement> {
    (0.0..6.3f64, 0.0..6.0f64, -3.0..3.0f64)
        .prop_map(|(r, d, b)| GroupElement::Mobius(Mobius::rotation(r).mul(&Mobius::dilation(d)).mul(&Mobius::boost(b))))
}

fn tree() -> SpaceModel {
    SpaceModel::free_group(2).unwrap()
}

fn plane() -> SpaceModel {
    SpaceModel::upper_half_plane(0.7).unwrap()
}

proptest! {
    #[test]
    fn words_stay_reduced(l in letters(3)) {
        let w = Word::from_letters(l);
        prop_assert!(w.letters().windows(2).all(|p| p[0] != p[1] ^ 1));
        prop_assert_eq!(Word::parse(&w.to_string()).unwrap(), w.clone());
        prop_assert!(w.mul(&w.inverse()).is_empty());
    }

    #[test]
    fn word_multiplication_is_associative(a in letters(2), b in letters(2), c in letters(2)) {
        let (a, b, c) = (Word::from_letters(a), Word::from_letters(b), Word::from_letters(c));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }

    #[test]
    fn tree_metric_axioms(x in tree_word(), y in tree_word(), z in tree_word()) {
        let m = tree();
        let (dxy, dyz, dxz) = (m.distance(&x, &y).unwrap(), m.distance(&y, &z).unwrap(), m.distance(&x, &z).unwrap());
        prop_assert_eq!(dxy, m.distance(&y, &x).unwrap());
        prop_assert!(dxz <= dxy + dyz);
        prop_assert_eq!(m.distance(&x, &x).unwrap(), 0.0);
        // left multiplication is an isometry
        let gx = x.compose(&y).unwrap();
        let gz = x.compose(&z).unwrap();
        prop_assert_eq!(m.distance(&gx, &gz).unwrap(), dyz);
    }

    #[test]
    fn half_plane_isometry_invariance(g in mobius(), x in mobius(), y in mobius()) {
        let m = plane();
        let d = m.distance(&x, &y).unwrap();
        let d2 = m.distance(&g.compose(&x).unwrap(), &g.compose(&y).unwrap()).unwrap();
        prop_assert!((d - d2).abs() <= 1e-6 * (1.0 + d));
        prop_assert!((m.distance(&y, &x).unwrap() - d).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn gromov_product_bounds(x in tree_word(), y in tree_word(), g in mobius(), h in mobius()) {
        let m = tree();
        let gp = m.gromov_product_at_identity(&x, &y).unwrap();
        prop_assert!(gp >= 0.0 && gp <= m.norm(&x).unwrap().min(m.norm(&y).unwrap()));
        let p = plane();
        let gp = p.gromov_product_at_identity(&g, &h).unwrap();
        prop_assert!(gp >= 0.0 && gp <= p.norm(&g).unwrap().min(p.norm(&h).unwrap()) + 1e-9);
    }

    #[test]
    fn horofunction_is_normalized_and_lipschitz(g in tree_word(), w in tree_word(), v in tree_word()) {
        let m = tree();
        prop_assert_eq!(m.horofunction(&g, &m.identity()).unwrap(), 0.0);
        let (rw, rv) = (m.horofunction(&g, &w).unwrap(), m.horofunction(&g, &v).unwrap());
        prop_assert!((rw - rv).abs() <= m.distance(&w, &v).unwrap());
        prop_assert!(rw.abs() <= m.norm(&w).unwrap());
    }

    #[test]
    fn shadows_shrink_with_depth(w in tree_word(), g in tree_word(), d in 0.0..10.0f64) {
        let m = tree();
        if m.in_shadow(&w, &g, d + 1.0).unwrap() {
            prop_assert!(m.in_shadow(&w, &g, d).unwrap());
        }
        prop_assert!(m.in_shadow_radius(&g, &g, 0.0).unwrap());
    }

    #[test]
    fn tree_four_point_defect_is_nonpositive(a in tree_word(), b in tree_word(), c in tree_word(), d in tree_word()) {
        prop_assert!(tree().four_point_defect(&a, &b, &c, &d).unwrap() <= 0.0);
    }

    #[test]
    fn distributions_keep_unit_mass(weights in prop::collection::vec(0.01..1.0f64, 1..5), n in 1usize..5) {
        let model = tree();
        let gens = model.generators();
        let total: f64 = weights.iter().sum();
        let atoms = weights.iter().zip(&gens).map(|(w, g)| Atom { element: g.clone(), probability: w / total }).collect();
        let mu = StepDistribution::new(&model, atoms).unwrap();
        let power = mu.convolution_power(&model, n, DEFAULT_CONVOLUTION_CAP).unwrap();
        let mass: f64 = power.atoms().iter().map(|a| a.probability).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert_eq!(mu.reflected().reflected(), mu.clone());
        for a in mu.atoms() {
            prop_assert!((mu.reflected().probability_of(&a.element.inverse()) - a.probability).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposition_is_euclidean(n in 0usize..10_000, a in 1usize..50) {
        let (i, r) = decompose(n, a);
        prop_assert_eq!(a * i + r, n);
        prop_assert!(r < a);
    }

    #[test]
    fn wilson_interval_contains_estimate(trials in 1u64..5000, frac in 0.0..=1.0f64) {
        let hits = ((trials as f64) * frac).round() as u64;
        let (lo, hi) = wilson(hits, trials);
        let p = hits as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn moments_merge_like_concatenation(xs in prop::collection::vec(-100.0..100.0f64, 2..50), split in 0usize..50) {
        let split = split.min(xs.len());
        let whole: Moments = xs.iter().copied().collect();
        let mut left: Moments = xs[..split].iter().copied().collect();
        left.merge(&xs[split..].iter().copied().collect());
        prop_assert_eq!(whole.count, left.count);
        prop_assert!((whole.mean() - left.mean()).abs() < 1e-9);
    }

    #[test]
    fn lattice_steps_preserve_mass(p in 0.0..=1.0f64, steps in 1usize..40) {
        let increments = vec![(1i64, p), (-1, 1.0 - p)];
        let mut law = LatticeLaw::point_mass(0);
        for _ in 0..steps {
            law = law.step(&increments, DEFAULT_STATE_CAP).unwrap();
        }
        let mass: f64 = law.support().map(|(_, q)| q).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert!(law.support().all(|(v, _)| (v - steps as i64).rem_euclid(2) == 0));
    }

    #[test]
    fn paths_depend_only_on_seed_and_trial(seed in any::<u64>(), trial in 0u64..1000) {
        let model = tree();
        let mu = StepDistribution::uniform_generators(&model).unwrap();
        let config = WalkConfig::new(model, mu, seed, 40).unwrap();
        let a = sample_path_for_trial(&config, trial);
        let b = sample_path_for_trial(&config, trial);
        prop_assert_eq!(&a.locations, &b.locations);
        for pair in a.locations.windows(2) {
            prop_assert_eq!(config.model.distance(&pair[0], &pair[1]).unwrap(), 1.0);
        }
    }
}
