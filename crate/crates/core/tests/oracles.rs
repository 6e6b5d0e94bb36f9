//! Estimators and exact propagation compared against independent closed
//! forms and hand-rolled dynamic programs.

use std::collections::BTreeMap;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use hyperwalk::estimators::stats::wilson;
use hyperwalk::estimators::{four_point_supremum, polya_mgf, polya_mgf_derivative};
use hyperwalk::geometry::{GroupElement, Mobius, SpaceModel, Word};
use hyperwalk::rng::trial_rng;
use hyperwalk::verifier::lattice::DEFAULT_STATE_CAP;
use hyperwalk::verifier::SyntheticProcess;
use hyperwalk::walk::{sample_path_for_trial, Atom, StepDistribution, WalkConfig, DEFAULT_CONVOLUTION_CAP};

fn word(s: &str) -> GroupElement {
    GroupElement::Word(Word::parse(s).unwrap())
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let mut log = 0.0;
    for j in 0..k {
        log += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
    }
    (log + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

#[test]
fn line_convolution_matches_binomial() {
    let model = SpaceModel::integer_line();
    let mu = StepDistribution::polya(0.75).unwrap();
    let n = 30;
    let law = mu.convolution_power(&model, n, DEFAULT_CONVOLUTION_CAP).unwrap();
    for k in 0..=n as u64 {
        let site = GroupElement::Translation(2 * k as i64 - n as i64);
        assert!((law.probability_of(&site) - binomial_pmf(n as u64, k, 0.75)).abs() < 1e-12);
    }
    let lattice = SyntheticProcess::polya(0.75, n).laws(DEFAULT_STATE_CAP).unwrap();
    for k in 0..=n as u64 {
        let v = 2 * k as i64 - n as i64;
        assert!((lattice[n].probability(v) - binomial_pmf(n as u64, k, 0.75)).abs() < 1e-12);
    }
}

#[test]
fn tree_length_law_matches_birth_death_chain() {
    let model = SpaceModel::free_group(2).unwrap();
    let mu = StepDistribution::uniform_generators(&model).unwrap();
    let n = 8;
    let mut law = mu.clone();
    let mut chain = vec![0.0; n + 2];
    chain[1] = 1.0;
    for step in 1..=n {
        if step > 1 {
            law = law.convolution(&mu, DEFAULT_CONVOLUTION_CAP).unwrap();
            let mut next = vec![0.0; n + 2];
            next[1] += chain[0];
            for k in 1..=n {
                next[k + 1] += 0.75 * chain[k];
                next[k - 1] += 0.25 * chain[k];
            }
            chain = next;
        }
        let mut by_len = vec![0.0; n + 2];
        for atom in law.atoms() {
            by_len[model.norm(&atom.element).unwrap() as usize] += atom.probability;
        }
        for k in 0..=n {
            assert!((by_len[k] - chain[k]).abs() < 1e-12, "step {step}, length {k}");
        }
    }
}

#[test]
fn polya_mgf_closed_form() {
    for &t in &[0.0f64, 0.1, 0.5, 1.0] {
        let direct = 0.75 * (-t).exp() + 0.25 * t.exp();
        assert!((polya_mgf(0.75, t) - direct).abs() < 1e-15);
    }
    assert!((polya_mgf_derivative(0.75, 0.0) + 0.5).abs() < 1e-15);
    let h = 1e-6;
    let fd = (polya_mgf(0.75, h) - polya_mgf(0.75, -h)) / (2.0 * h);
    assert!((fd + 0.5).abs() < 1e-8);
}

#[test]
fn wilson_interval_is_calibrated() {
    let (p, n) = (0.3, 200u64);
    let covered = (0..100u64)
        .filter(|&run| {
            let mut rng = trial_rng(77, run);
            let hits = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
            let (lo, hi) = wilson(hits, n);
            lo <= p && p <= hi
        })
        .count();
    assert!(covered >= 93, "coverage {covered} of 100");
}

#[test]
fn inverse_path_follows_reflected_law() {
    let model = SpaceModel::free_group(2).unwrap();
    let atoms = vec![
        Atom { element: word("a"), probability: 0.5 },
        Atom { element: word("b"), probability: 0.3 },
        Atom { element: word("A"), probability: 0.2 },
    ];
    let mu = StepDistribution::new(&model, atoms).unwrap();
    let n = 3;
    let exact = mu.reflected().convolution_power(&model, n, DEFAULT_CONVOLUTION_CAP).unwrap();
    let config = WalkConfig::new(model, mu, 31, n).unwrap();
    let trials = 20_000u64;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for trial in 0..trials {
        let path = sample_path_for_trial(&config, trial);
        *counts.entry(format!("{:?}", path.locations[n].inverse().key())).or_default() += 1;
    }
    let mut stat = 0.0;
    let mut cells = 0;
    let mut seen = 0;
    for atom in exact.atoms() {
        let expected = atom.probability * trials as f64;
        let observed = counts.get(&format!("{:?}", atom.element.key())).copied().unwrap_or(0);
        seen += observed;
        stat += (observed as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    assert_eq!(seen, trials, "inverse landed outside the reflected support");
    let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat} on {cells} cells, p = {p_value}");
}

#[test]
fn tree_is_zero_hyperbolic_on_small_ball() {
    let model = SpaceModel::free_group(2).unwrap();
    let ball: Vec<GroupElement> = Word::enumerate_ball(2, 3).into_iter().map(GroupElement::Word).collect();
    let id = model.identity();
    let mut worst = f64::NEG_INFINITY;
    for x in &ball {
        for y in &ball {
            for z in &ball {
                worst = worst.max(model.four_point_defect(&id, x, y, z).unwrap());
            }
        }
    }
    assert!(worst <= 0.0, "defect {worst}");
    assert!(four_point_supremum(&model, 8.0, 2000, 5).unwrap() <= 0.0);
}

#[test]
fn line_is_zero_hyperbolic() {
    let model = SpaceModel::integer_line();
    let pts: Vec<GroupElement> = (-6..=6).map(GroupElement::Translation).collect();
    for a in &pts {
        for b in &pts {
            for c in &pts {
                for d in &pts {
                    assert!(model.four_point_defect(a, b, c, d).unwrap() <= 0.0);
                }
            }
        }
    }
}

#[test]
fn half_plane_defect_stays_below_its_constant() {
    let model = SpaceModel::upper_half_plane(0.7).unwrap();
    let sup = four_point_supremum(&model, 10.0, 3000, 6).unwrap();
    // the sharp four-point constant of the plane is ln 2 ≈ 0.693
    assert!(sup > 0.3 && sup <= 0.7, "sup {sup}");
}

#[test]
fn half_plane_distance_closed_forms() {
    let model = SpaceModel::upper_half_plane(0.7).unwrap();
    for &len in &[0.1, 1.0, 3.5, 9.0] {
        let g = GroupElement::Mobius(Mobius::dilation(len));
        assert!((model.norm(&g).unwrap() - len).abs() < 1e-9);
        let h = GroupElement::Mobius(Mobius::boost(len));
        assert!((model.norm(&h).unwrap() - len).abs() < 1e-9);
        // dilation and boost move along perpendicular geodesics through i
        let c = (len.cosh() * len.cosh()).acosh();
        assert!((model.distance(&g, &h).unwrap() - c).abs() < 1e-8);
    }
}

#[test]
fn horofunction_identity_on_all_models() {
    let mut rng = trial_rng(9, 0);
    let tree = SpaceModel::free_group(3).unwrap();
    let plane = SpaceModel::upper_half_plane(0.7).unwrap();
    let line = SpaceModel::integer_line();
    for _ in 0..500 {
        let letters = |rng: &mut rand_chacha::ChaCha8Rng| {
            let len = rng.random_range(0..12);
            Word::from_letters((0..len).map(|_| rng.random_range(0..6u8)))
        };
        let (w, g) = (GroupElement::Word(letters(&mut rng)), GroupElement::Word(letters(&mut rng)));
        let lhs = tree.norm(&w).unwrap() - tree.horofunction(&g, &w).unwrap();
        assert!((lhs - 2.0 * tree.gromov_product_at_identity(&w, &g).unwrap()).abs() < 1e-12);

        let m = |rng: &mut rand_chacha::ChaCha8Rng| {
            GroupElement::Mobius(Mobius::rotation(rng.random_range(0.0..6.3)).mul(&Mobius::dilation(rng.random_range(0.0..8.0))))
        };
        let (w, g) = (m(&mut rng), m(&mut rng));
        let lhs = plane.norm(&w).unwrap() - plane.horofunction(&g, &w).unwrap();
        assert!((lhs - 2.0 * plane.gromov_product_at_identity(&w, &g).unwrap()).abs() < 1e-7);

        let (w, g) = (GroupElement::Translation(rng.random_range(-50..50)), GroupElement::Translation(rng.random_range(-50..50)));
        let lhs = line.norm(&w).unwrap() - line.horofunction(&g, &w).unwrap();
        assert!((lhs - 2.0 * line.gromov_product_at_identity(&w, &g).unwrap()).abs() < 1e-12);
    }
}
