mod common;

use ambival::oracle::enumerate_stopping_times;
use ambival::priors::{
    density_process, paste, sphere_directions, DensityProcess, ParamRegion, Selection, TableFamily,
    TiltFamily,
};
use ambival::scenario::{ScenarioLattice, StoppingTime};
use proptest::prelude::*;
use rand::Rng;

fn random_spd(seed: u64, k: usize) -> Vec<f64> {
    let mut r = common::rng(seed);
    let a: Vec<f64> = (0..k * k).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut s = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            s[i * k + j] = (0..k).map(|m| a[i * k + m] * a[j * k + m]).sum::<f64>()
                + if i == j { 0.1 } else { 0.0 };
        }
    }
    s
}

fn unit(r: &mut impl Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    v.iter().map(|x| x / n).collect()
}

#[test]
fn hand_factors_multiply_along_paths() {
    let l = ScenarioLattice::uniform(2, &[0.5, 0.5]).unwrap();
    let fam = TableFamily::new(&l, vec![vec![1.0, 1.2, 0.8, 0.9, 1.1, 0.9, 1.1]]).unwrap();
    let d = density_process(&l, &fam, &Selection::Constant(vec![0.0])).unwrap();
    let leaves: Vec<f64> = l.leaves().iter().map(|&n| d.at(n)).collect();
    for (a, b) in leaves.iter().zip([1.08, 1.32, 0.72, 0.88]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn non_adapted_selection_is_rejected() {
    let l = ScenarioLattice::uniform(2, &[0.5, 0.5]).unwrap();
    let fam = TiltFamily::new(&l, (0..l.len()).map(|id| vec![id as f64 % 2.0]).collect()).unwrap();
    let mut ths: Vec<Vec<f64>> = vec![vec![0.0]; l.len()];
    ths[l.children(1)[0]] = vec![1.0];
    let err = density_process(&l, &fam, &Selection::PerNode(ths)).unwrap_err();
    assert!(err.to_string().contains('1'), "{err}");
}

#[test]
fn chi_square_radius() {
    let r = ParamRegion::ellipsoid(
        vec![0.0; 4],
        vec![
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ],
        0.9,
    )
    .unwrap();
    assert!((r.radius_sq - 7.7794).abs() < 1e-3);
    let p = r.project(&[2, 3]).unwrap();
    assert_eq!(p.radius_sq, r.radius_sq);
}

#[test]
fn non_positive_definite_is_rejected() {
    assert!(ParamRegion::ellipsoid(vec![0.0; 2], vec![1.0, 2.0, 2.0, 1.0], 0.5).is_err());
}

#[test]
fn axis_points_for_identity() {
    let r = ParamRegion::with_radius_sq(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 4.0).unwrap();
    let pts = r.boundary_grid(4).unwrap();
    let expect = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
    for (p, e) in pts.iter().zip(expect) {
        assert!(
            (p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12,
            "{p:?}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densities_are_positive_normalized_martingales(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        for th in &inst.grid {
            let d = density_process(l, &inst.family, &Selection::Constant(th.clone())).unwrap();
            prop_assert!(d.values.iter().all(|&v| v > 0.0));
            for t in 0..=l.horizon() {
                prop_assert!((d.expectation(l, t) - 1.0).abs() < 1e-10);
            }
            for n in l.nodes().iter().enumerate().filter(|(_, n)| !n.children.is_empty()) {
                let e: f64 = n.1.children.iter().map(|&c| l.node(c).prob * d.at(c)).sum();
                prop_assert!((e - d.at(n.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pasting_matches_spliced_selection(seed in any::<u64>(), pick in any::<u64>()) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        let mut r = common::rng(seed ^ 7);
        let horizon = l.horizon();
        let s1: Vec<Vec<f64>> = (0..horizon).map(|_| vec![r.random_range(-2.0..2.0)]).collect();
        let s2: Vec<Vec<f64>> = (0..horizon).map(|_| vec![r.random_range(-2.0..2.0)]).collect();
        let rules = enumerate_stopping_times(l, 0, 1, 1_000_000).unwrap();
        let rule = &rules[(pick % rules.len() as u64) as usize];
        let tau = StoppingTime::new(l, rule.per_leaf.iter().map(|&v| v as usize).collect()).unwrap();
        let d1 = density_process(l, &inst.family, &Selection::PerTime(s1.clone())).unwrap();
        let d2 = density_process(l, &inst.family, &Selection::PerTime(s2.clone())).unwrap();
        let pasted = paste(l, &d1, &d2, &tau).unwrap();
        let spliced: Vec<Vec<f64>> = (0..l.len())
            .map(|id| {
                let t = l.node(id).time;
                if t == 0 {
                    vec![0.0]
                } else if tau.reaches(l, id, t) {
                    s1[t - 1].clone()
                } else {
                    s2[t - 1].clone()
                }
            })
            .collect();
        let direct = density_process(l, &inst.family, &Selection::PerNode(spliced)).unwrap();
        for (a, b) in pasted.values.iter().zip(&direct.values) {
            prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        prop_assert!(pasted.validate(l).is_ok());
    }

    #[test]
    fn pasting_at_the_ends(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        let d1 = density_process(l, &inst.family, &Selection::Constant(vec![1.5])).unwrap();
        let d2 = density_process(l, &inst.family, &Selection::Constant(vec![-0.7])).unwrap();
        let at0 = paste(l, &d1, &d2, &StoppingTime::constant(l, 0)).unwrap();
        let at_t = paste(l, &d1, &d2, &StoppingTime::constant(l, l.horizon())).unwrap();
        for id in 0..l.len() {
            prop_assert!((at0.at(id) - d2.at(id)).abs() < 1e-12 * d2.at(id).max(1.0));
            prop_assert!((at_t.at(id) - d1.at(id)).abs() < 1e-12 * d1.at(id).max(1.0));
        }
    }

    #[test]
    fn mixtures_stay_valid(seed in any::<u64>(), c in 0.0f64..=1.0) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        let d1 = density_process(l, &inst.family, &Selection::Constant(vec![-1.0])).unwrap();
        let d2 = density_process(l, &inst.family, &Selection::Constant(vec![1.0])).unwrap();
        let m = DensityProcess::mix(c, &d1, &d2).unwrap();
        prop_assert!(m.validate(l).is_ok());
        prop_assert!(m.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn membership_matches_parameterization(seed in any::<u64>(), k in 1usize..5, frac in 0.0f64..1.0) {
        let sigma = random_spd(seed, k);
        let mu: Vec<f64> = (0..k).map(|i| i as f64 - 1.0).collect();
        let region = ParamRegion::ellipsoid(mu.clone(), sigma, 0.8).unwrap();
        let mut r = common::rng(seed);
        let s = unit(&mut r, k);
        let z = region.point(&s, frac * region.radius());
        prop_assert!((region.mahalanobis_sq(&z) - frac * frac * region.radius_sq).abs() < 1e-10 * region.radius_sq.max(1.0));
        prop_assert!(region.contains(&z));
        prop_assert!(region.contains(&mu));
        let outside = region.point(&s, 1.01 * region.radius());
        prop_assert!(!region.contains(&outside));
        for i in 0..k {
            prop_assert!(region.chol[i * k + i] > 0.0);
            for j in i + 1..k {
                prop_assert_eq!(region.chol[i * k + j], 0.0);
            }
        }
        for p in region.boundary_grid(32).unwrap() {
            prop_assert!((region.mahalanobis_sq(&p) - region.radius_sq).abs() < 1e-10 * region.radius_sq.max(1.0));
        }
    }

    #[test]
    fn diagonal_projection_is_a_section(seed in any::<u64>(), z0 in -2.0f64..2.0, z2 in -2.0f64..2.0) {
        let mut r = common::rng(seed);
        let d: Vec<f64> = (0..4).map(|_| r.random_range(0.1..2.0)).collect();
        let mut sigma = vec![0.0; 16];
        for i in 0..4 {
            sigma[i * 5] = d[i];
        }
        let mu = vec![0.1, 0.2, 0.3, 0.4];
        let full = ParamRegion::ellipsoid(mu.clone(), sigma, 0.5).unwrap();
        let proj = full.project(&[0, 2]).unwrap();
        let point = vec![z0, mu[1], z2, mu[3]];
        prop_assert!((proj.mahalanobis_sq(&[z0, z2]) - full.mahalanobis_sq(&point)).abs() < 1e-12);
        let all = full.project(&[0, 1, 2, 3]).unwrap();
        prop_assert_eq!(all, full);
    }

    #[test]
    fn doubling_resolution_never_lowers_the_max(seed in any::<u64>(), m in 4usize..200, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let region = ParamRegion::ellipsoid(vec![0.5, -0.5], random_spd(seed, 2), 0.7).unwrap();
        let f = |z: &[f64]| (a * z[0]).sin() + b * z[1] * z[0];
        let best = |m: usize| region.boundary_grid(m).unwrap().iter().map(|z| f(z)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(best(2 * m) >= best(m));
    }

    #[test]
    fn high_dimensional_directions_are_nested(m in 2usize..100) {
        let small = sphere_directions(4, m).unwrap();
        let big = sphere_directions(4, 2 * m).unwrap();
        prop_assert_eq!(&big[..m], &small[..]);
    }
}
