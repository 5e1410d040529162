use itertools::Itertools;
use num_traits::Zero;
use proptest::prelude::*;
use rankmin_core::assignment::row_strictly_prefers;
use rankmin_core::strategy::opponent_profiles;
use rankmin_core::*;

fn market(caps: &[u32], agents: usize) -> Market {
    let mut types: Vec<TypeSpec> = caps
        .iter()
        .enumerate()
        .map(|(i, &q)| TypeSpec::new(format!("o{}", i + 1), q))
        .collect();
    types.push(TypeSpec::null("n", agents as u32));
    Market::new((1..=agents).map(|a| format!("a{a}")).collect(), types).unwrap()
}

fn order(perm: Vec<usize>) -> PreferenceOrder {
    let n = perm.len();
    PreferenceOrder::new(perm.into_iter().map(TypeId).collect(), n).unwrap()
}

/// Random market with 2..=5 agents and 3..=5 types, plus one profile.
fn market_and_profile() -> impl Strategy<Value = (Market, Profile)> {
    (2usize..=5, 2usize..=4)
        .prop_flat_map(|(agents, real)| {
            let caps = proptest::collection::vec(1..agents as u32, real);
            let perms = proptest::collection::vec(Just((0..=real).collect::<Vec<_>>()).prop_shuffle(), agents);
            (Just(agents), caps, perms)
        })
        .prop_map(|(agents, caps, perms)| {
            let m = market(&caps, agents);
            let p = Profile::new(&m, perms.into_iter().map(order).collect()).unwrap();
            (m, p)
        })
}

/// Every capacity-feasible deterministic assignment of minimum rank value,
/// found by scanning the full product space.
fn brute_force_optimum(m: &Market, p: &Profile) -> (u64, Vec<Vec<TypeId>>) {
    let feasible = std::iter::repeat(m.types().collect::<Vec<_>>())
        .take(m.num_agents())
        .multi_cartesian_product()
        .filter(|choice| m.types().all(|o| choice.iter().filter(|&&c| c == o).count() as u32 <= m.capacity(o)));
    let mut best = u64::MAX;
    let mut members = Vec::new();
    for choice in feasible {
        let value: u64 = choice
            .iter()
            .enumerate()
            .map(|(a, &o)| p.order(AgentId(a)).rank(o).unwrap() as u64)
            .sum();
        if value < best {
            best = value;
            members.clear();
        }
        if value == best {
            members.push(choice);
        }
    }
    (best, members)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimum_set_matches_brute_force((m, p) in market_and_profile()) {
        let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
        let (best, members) = brute_force_optimum(&m, &p);
        prop_assert_eq!(set.optimum, Rational::from_integer(best as i64));
        let found: Vec<Vec<TypeId>> = set.members.iter().map(|y| y.choice().to_vec()).collect();
        prop_assert_eq!(found, members);
    }

    #[test]
    fn mechanism_outputs_are_fair_and_optimal((m, p) in market_and_profile()) {
        let optimum = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap().optimum;
        for kind in [MechanismKind::Uniform, MechanismKind::Modified] {
            let x = kind.assign(&m, &p).unwrap();
            prop_assert_eq!(rank_value(&m, &x, &p).unwrap(), optimum);
            prop_assert!(is_wasteful(&m, &x, &p).unwrap().is_none());
            prop_assert!(check_ete(&m, &kind, &p).unwrap());
            let d = decompose(&m, &x).unwrap();
            prop_assert_eq!(d.recombine(&m), x);
        }
    }

    #[test]
    fn modified_differs_only_when_pattern_fires((m, p) in market_and_profile()) {
        let u = uniform_mechanism(&m, &p, Budget::default()).unwrap();
        let f = modified_mechanism(&m, &p, Budget::default()).unwrap();
        if detect_modified_pattern(&m, &p).unwrap().is_none() {
            prop_assert_eq!(u, f);
        }
    }

    #[test]
    fn refusal_is_idempotent((m, p) in market_and_profile()) {
        let x = uniform_mechanism(&m, &p, Budget::default()).unwrap();
        let truths = Profile::new(&m, p.orders().iter().rev().cloned().collect()).unwrap();
        let g = refusal_transform(&m, &x, &truths).unwrap();
        prop_assert_eq!(refusal_transform(&m, &g, &truths).unwrap(), g.clone());
        for a in m.agents() {
            prop_assert!(g.get(a, m.null()) >= x.get(a, m.null()));
        }
        // acceptable entries are untouched
        let own = refusal_transform(&m, &x, &p).unwrap();
        for a in m.agents() {
            for o in m.types() {
                if m.is_acceptable(p.order(a), o).unwrap() {
                    prop_assert_eq!(own.get(a, o), x.get(a, o));
                }
            }
        }
    }

    #[test]
    fn truth_favoring_profile_separates_orders(
        (m, p) in market_and_profile(),
        swap in any::<prop::sample::Index>(),
    ) {
        let truth = p.order(AgentId(0)).clone();
        let mut ranking = truth.ranking().to_vec();
        let i = swap.index(ranking.len() - 1);
        ranking.swap(i, i + 1);
        let candidate = PreferenceOrder::new(ranking, m.num_types()).unwrap();
        match truth_favoring_profile(&m, AgentId(0), &truth, &candidate) {
            Ok(q) => {
                prop_assert!(!m.essentially_equal(&truth, &candidate));
                prop_assert_eq!(q.order(AgentId(0)), &truth);
                let xt = uniform_mechanism(&m, &q, Budget::default()).unwrap();
                let xc = uniform_mechanism(&m, &q.with_order(AgentId(0), candidate.clone()), Budget::default()).unwrap();
                prop_assert!(strictly_prefers(&truth, &xt, &xc, AgentId(0)));
            }
            Err(Error::Domain(_)) => prop_assert!(m.essentially_equal(&truth, &candidate)),
            Err(e) => prop_assert!(e.is_budget()),
        }
    }

    #[test]
    fn demotion_orders_keep_acceptable_prefix((m, p) in market_and_profile()) {
        let truth = p.order(AgentId(0));
        let cut = m.null_rank(truth) - 1;
        for d in ods_set(&m, truth) {
            prop_assert_eq!(&d.ranking()[..cut], &truth.ranking()[..cut]);
            prop_assert_eq!(d.at(m.num_types()), m.null());
        }
        for (o, u) in condition_f_witnesses(&m, truth) {
            prop_assert!(m.is_acceptable(truth, o).unwrap());
            prop_assert!(!m.is_acceptable(truth, u).unwrap() && u != m.null());
            let d = targeted_demotion(&m, truth, u).unwrap();
            prop_assert_eq!(d.at(cut + 1), u);
        }
    }
}

#[test]
fn demotion_sweeps_on_four_agent_markets() {
    for caps in [[1, 1], [2, 1], [1, 3], [2, 2]] {
        let m = market(&caps, 4);
        for property in [
            Property::OdsWeakDominance,
            Property::OdsStrictDominance,
            Property::OdsWaste,
        ] {
            let r = run_sweep(&m, property, &SweepOptions { parallel: true, ..SweepOptions::default() }).unwrap();
            assert!(r.passed(), "{caps:?} {r}");
        }
    }
}

#[test]
fn dominance_matches_direct_evaluation() {
    let m = market(&[1, 2], 3);
    let truth = m.order(&["o2", "n", "o1"]).unwrap();
    let candidate = m.order(&["o2", "o1", "n"]).unwrap();
    let q = DominanceQuery {
        agent: AgentId(1),
        truth: truth.clone(),
        candidate: candidate.clone(),
        mechanism: Rule::new(MechanismKind::Uniform),
        refusal: true,
        parallel: false,
    };
    let verdict = check_dominance(&m, &q).unwrap();

    let mut weak = true;
    let mut strict = false;
    for others in opponent_profiles(&m, Budget::default()).unwrap() {
        let t = Profile::assemble(AgentId(1), truth.clone(), &others);
        let c = t.with_order(AgentId(1), candidate.clone());
        let xt = refusal_transform(&m, &uniform_mechanism(&m, &t, Budget::default()).unwrap(), &t).unwrap();
        let xc = refusal_transform(&m, &uniform_mechanism(&m, &c, Budget::default()).unwrap(), &t).unwrap();
        // cumulative comparison written out against the true order
        let mut sum_t = Rational::zero();
        let mut sum_c = Rational::zero();
        let mut gap = false;
        for (k, &o) in truth.ranking().iter().enumerate() {
            sum_t += xt.get(AgentId(1), o);
            sum_c += xc.get(AgentId(1), o);
            weak &= sum_c >= sum_t;
            gap |= k + 1 < m.num_types() && sum_c > sum_t;
        }
        strict |= gap;
    }
    assert_eq!(verdict.weakly_dominates, weak);
    assert_eq!(verdict.strictly_dominates, weak && strict);
    assert_eq!(verdict.profiles_checked, 36);
}

#[test]
fn modified_mechanism_can_leave_orders_unseparated() {
    // two agents, unit capacities: reporting the null type second makes the
    // deviator the competitor of an opponent who shares its first choice
    let m = market(&[1, 1], 2);
    let truth = m.order(&["o1", "o2", "n"]).unwrap();
    let candidate = m.order(&["o1", "n", "o2"]).unwrap();
    assert!(!m.essentially_equal(&truth, &candidate));

    let q = truth_favoring_profile(&m, AgentId(0), &truth, &candidate).unwrap();
    let deviating = q.with_order(AgentId(0), candidate.clone());
    assert!(detect_modified_pattern(&m, &deviating).unwrap().is_some());
    let xt = modified_mechanism(&m, &q, Budget::default()).unwrap();
    let xc = modified_mechanism(&m, &deviating, Budget::default()).unwrap();
    assert!(strictly_prefers(&truth, &xc, &xt, AgentId(0)));

    for refusal in [false, true] {
        let v = check_dominance(
            &m,
            &DominanceQuery {
                agent: AgentId(0),
                truth: truth.clone(),
                candidate: candidate.clone(),
                mechanism: Rule::new(MechanismKind::Modified),
                refusal,
                parallel: false,
            },
        )
        .unwrap();
        assert!(!v.weakly_dominates && !v.strictly_dominates);
        let w = v.failure_witness.unwrap();
        assert!(!row_strictly_prefers(&truth, &w.truthful_row, &w.candidate_row));
    }
}
