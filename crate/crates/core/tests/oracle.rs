mod common;

use ambival::oracle::{
    check_instance, count_selections, count_stopping_times, enumerate_selections,
    enumerate_stopping_times, snell_bruteforce, Instance, DEFAULT_CAP,
};
use ambival::priors::TiltFamily;
use ambival::scenario::ScenarioLattice;
use ambival::valuation::{payoff_process, value_with_table, CashFlowSpec, FactorTable, Payoff};
use ambival::Error;
use proptest::prelude::*;

/// Classical single-measure Snell envelope from the root, with one-step
/// probabilities `q[node]`. Stopping at `s` pays `H_s`, decided at time `s`.
fn textbook_snell(l: &ScenarioLattice, h: &Payoff, q: &[f64]) -> f64 {
    let horizon = l.horizon();
    let mut w = vec![0.0; l.len()];
    for t in (1..=horizon).rev() {
        for &n in l.layer(t) {
            let cont = if t == horizon {
                h.at(l, horizon + 1, n)
            } else {
                l.children(n).iter().map(|&c| q[c] * w[c]).sum()
            };
            let stop = h.at(l, t, l.parent(n).unwrap());
            w[n] = stop.max(cont);
        }
    }
    l.children(0).iter().map(|&c| q[c] * w[c]).sum()
}

/// The same instance with every sibling list reversed and the grid reversed.
fn relabeled(inst: &Instance) -> Instance {
    let l = &inst.lattice;
    let orig = |path: &[usize]| {
        let mut n = 0;
        for &b in path {
            let ch = l.children(n);
            n = ch[ch.len() - 1 - b];
        }
        n
    };
    let lattice = ScenarioLattice::build(
        l.horizon(),
        |info| {
            let n = orig(info.path);
            l.children(n)
                .iter()
                .rev()
                .map(|&c| l.node(c).prob)
                .collect()
        },
        |info| {
            l.node(orig(info.path))
                .payload
                .iter()
                .map(|(k, v)| (k.clone(), *v))
                .collect()
        },
    )
    .unwrap();
    let cf = CashFlowSpec::from_payload(&lattice, "X").unwrap();
    let family = TiltFamily::from_payload(&lattice, "xi").unwrap();
    let grid: Vec<_> = inst.grid.iter().rev().cloned().collect();
    let table = FactorTable::new(&lattice, &family, &grid).unwrap();
    Instance {
        lattice,
        cf,
        family,
        grid,
        table,
        rm: inst.rm,
    }
}

#[test]
fn stopping_rule_counts() {
    let one = ScenarioLattice::uniform(1, &[1.0]).unwrap();
    assert_eq!(count_stopping_times(&one, 1, 1).unwrap(), 2);
    let bin = ScenarioLattice::uniform(2, &[0.5, 0.5]).unwrap();
    let rules = enumerate_stopping_times(&bin, 1, 1, DEFAULT_CAP).unwrap();
    assert_eq!(rules.len(), 5);
    let mut sorted = rules.iter().map(|r| r.per_leaf.clone()).collect::<Vec<_>>();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 5);
    let line = ScenarioLattice::uniform(2, &[1.0]).unwrap();
    assert_eq!(count_stopping_times(&line, 0, 1).unwrap(), 3);
    assert!(count_stopping_times(&bin, 0, 2).is_err());
}

#[test]
fn selection_counts() {
    let bin = ScenarioLattice::uniform(2, &[0.5, 0.5]).unwrap();
    assert_eq!(count_selections(&bin, 0, 1), 1);
    let sels = enumerate_selections(&bin, 0, 2, DEFAULT_CAP).unwrap();
    assert_eq!(sels.len(), 8);
    for s in &sels {
        assert!(s
            .as_selection(&bin, &[vec![0.0], vec![1.0]])
            .check_measurable(&bin)
            .is_ok());
    }
}

#[test]
fn caps_refuse() {
    let big = ScenarioLattice::uniform(4, &[0.25; 4]).unwrap();
    match enumerate_stopping_times(&big, 0, 1, 1000) {
        Err(Error::CapExceeded { count, cap }) => assert!(count > cap),
        other => panic!("expected a cap error, got {other:?}"),
    }
    assert!(matches!(
        enumerate_selections(&big, 0, 3, 1000),
        Err(Error::CapExceeded { .. })
    ));
}

#[test]
fn monotone_payoff_runs_off() {
    let l = ScenarioLattice::uniform(3, &[0.5, 0.5]).unwrap();
    let h = Payoff {
        values: vec![vec![], vec![0.0], vec![1.0; 2], vec![2.0; 4], vec![3.0; 8]],
    };
    let q: Vec<f64> = (0..l.len()).map(|id| l.node(id).prob).collect();
    assert_eq!(textbook_snell(&l, &h, &q), 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_prior_matches_textbook_snell(seed in any::<u64>()) {
        let limits = ambival::oracle::InstanceLimits { max_grid: 1, ..Default::default() };
        let inst = common::instance_with(seed, &limits);
        let l = &inst.lattice;
        let out = value_with_table(l, &inst.cf, &inst.rm, &inst.table).unwrap();
        let r = out.r_process(l);
        let brute = snell_bruteforce(l, &inst.cf, &r, &inst.table, 0, DEFAULT_CAP).unwrap();
        let h = payoff_process(l, &r, &inst.cf.residual).unwrap();
        let q: Vec<f64> = (0..l.len()).map(|id| l.node(id).prob * inst.table.factors[0][id]).collect();
        let classic = textbook_snell(l, &h, &q);
        prop_assert!((brute[0].sup_inf - classic).abs() < 1e-12);
        prop_assert!((out.c0() - classic).abs() < 1e-12);
    }

    #[test]
    fn engine_matches_brute_force(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let chk = check_instance(&inst, DEFAULT_CAP).unwrap();
        prop_assert!(chk.c0_error() < 1e-12);
        prop_assert!(chk.minimax_error() < 1e-12);
        prop_assert!(chk.c0_oracle <= chk.inf_sup + 1e-12);
        prop_assert!((chk.inf_sup - chk.c0_oracle).abs() < 1e-12);
        prop_assert!((chk.envelope - chk.c0_engine).abs() < 1e-12);
    }

    #[test]
    fn every_selection_is_dominated_and_one_attains(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        let out = value_with_table(l, &inst.cf, &inst.rm, &inst.table).unwrap();
        let h = payoff_process(l, &out.r_process(l), &inst.cf.residual).unwrap();
        let mut best = f64::NEG_INFINITY;
        for sel in enumerate_selections(l, 0, inst.table.len(), DEFAULT_CAP).unwrap() {
            let map = sel.node_map(l);
            let q: Vec<f64> = (0..l.len())
                .map(|id| match l.parent(id) {
                    Some(p) => l.node(id).prob * inst.table.factors[map[p]][id],
                    None => 1.0,
                })
                .collect();
            let v = out.r0() - textbook_snell(l, &h, &q);
            prop_assert!(v <= out.v0() + 1e-12);
            best = best.max(v);
        }
        prop_assert!((best - out.v0()).abs() < 1e-12);
    }

    #[test]
    fn relabeling_changes_nothing(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let other = relabeled(&inst);
        let a = check_instance(&inst, DEFAULT_CAP).unwrap();
        let b = check_instance(&other, DEFAULT_CAP).unwrap();
        prop_assert!((a.c0_oracle - b.c0_oracle).abs() < 1e-12);
        prop_assert!((a.v0_engine - b.v0_engine).abs() < 1e-12);
    }

    #[test]
    fn interior_nodes_match_too(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let l = &inst.lattice;
        let out = value_with_table(l, &inst.cf, &inst.rm, &inst.table).unwrap();
        let r = out.r_process(l);
        for t in 0..l.horizon() {
            for v in snell_bruteforce(l, &inst.cf, &r, &inst.table, t, DEFAULT_CAP).unwrap() {
                prop_assert!((v.sup_inf - out.c[t][l.slot(v.node)]).abs() < 1e-12);
                prop_assert!((v.envelope - v.sup_inf).abs() < 1e-12);
            }
        }
    }
}
