//! Rank-minimizing mechanisms: exhaustive enumeration of the deterministic
//! optimum set, the uniform mechanism, the modified mechanism and fairness
//! checks.

use std::fmt;

use crate::assignment::{Assignment, DeterministicAssignment, Rational};
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Profile, TypeId};

/// Size limits for exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_agents: usize,
    pub max_types: usize,
    /// Cap on opponent profiles visited by the dominance oracle.
    pub max_profiles: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_agents: 8,
            max_types: 6,
            max_profiles: 1_000_000,
        }
    }
}

impl Budget {
    pub fn check(&self, market: &Market) -> Result<()> {
        if market.num_agents() > self.max_agents {
            return Err(Error::BudgetExceeded {
                what: "agent count",
                limit: self.max_agents,
                actual: market.num_agents(),
            });
        }
        if market.num_types() > self.max_types {
            return Err(Error::BudgetExceeded {
                what: "object type count",
                limit: self.max_types,
                actual: market.num_types(),
            });
        }
        Ok(())
    }
}

/// Every deterministic assignment attaining the minimum rank value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMinimizingSet {
    pub optimum: Rational,
    /// Sorted lexicographically by each agent's type index.
    pub members: Vec<DeterministicAssignment>,
}

/// Enumerates all capacity-feasible deterministic assignments of minimum rank
/// value for `p`.
///
/// Depth-first over agents in index order, pruning any branch whose partial
/// rank value plus each remaining agent's best still-available rank already
/// exceeds the incumbent.
pub fn enumerate_rank_minimizers(
    market: &Market,
    p: &Profile,
    budget: Budget,
) -> Result<RankMinimizingSet> {
    budget.check(market)?;
    if p.len() != market.num_agents() {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} orders for {} agents",
            p.len(),
            market.num_agents()
        )));
    }
    let mut search = Search {
        market,
        p,
        remaining: market.types().map(|o| market.capacity(o)).collect(),
        choice: Vec::with_capacity(market.num_agents()),
        best: u64::MAX,
        members: Vec::new(),
    };
    search.descend(0);
    Ok(RankMinimizingSet {
        optimum: Rational::from_integer(search.best as i64),
        members: search
            .members
            .into_iter()
            .map(DeterministicAssignment::from_choice_unchecked)
            .collect(),
    })
}

struct Search<'a> {
    market: &'a Market,
    p: &'a Profile,
    remaining: Vec<u32>,
    choice: Vec<TypeId>,
    best: u64,
    members: Vec<Vec<TypeId>>,
}

impl Search<'_> {
    fn partial(&self) -> u64 {
        self.choice
            .iter()
            .enumerate()
            .map(|(a, &o)| self.p.order(AgentId(a)).rank_unchecked(o) as u64)
            .sum()
    }

    fn lower_bound(&self, from: usize) -> u64 {
        (from..self.market.num_agents())
            .map(|a| {
                let order = self.p.order(AgentId(a));
                order
                    .ranking()
                    .iter()
                    .position(|o| self.remaining[o.0] > 0)
                    .map_or(u64::MAX / 4, |k| k as u64 + 1)
            })
            .sum()
    }

    fn descend(&mut self, a: usize) {
        let partial = self.partial();
        if a == self.market.num_agents() {
            if partial < self.best {
                self.best = partial;
                self.members.clear();
            }
            if partial == self.best {
                self.members.push(self.choice.clone());
            }
            return;
        }
        if partial + self.lower_bound(a) > self.best {
            return;
        }
        for o in self.market.types() {
            if self.remaining[o.0] == 0 {
                continue;
            }
            self.remaining[o.0] -= 1;
            self.choice.push(o);
            self.descend(a + 1);
            self.choice.pop();
            self.remaining[o.0] += 1;
        }
    }
}

/// Equal-weight average over every deterministic rank-minimizing assignment.
pub fn uniform_mechanism(market: &Market, p: &Profile, budget: Budget) -> Result<Assignment> {
    let set = enumerate_rank_minimizers(market, p, budget)?;
    Assignment::uniform_average(market, &set.members)
}

/// A profile shape on which the modified mechanism departs from the uniform
/// one.
///
/// The special agent ranks the focal type first and the null type third or
/// lower. Every competitor ranks the null type at `prefix_length`, agrees with
/// the special agent above it, and its acceptable types cannot cover all
/// agents. Bystanders rank the null type first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModifiedPattern {
    pub special_agent: AgentId,
    pub focal_type: TypeId,
    pub prefix_length: usize,
    pub competitors: Vec<AgentId>,
    pub bystanders: Vec<AgentId>,
}

/// Finds the modified-mechanism pattern in `p`, if any.
///
/// Bystanders are the agents ranking the null type first. Among the rest,
/// one agent must qualify as the special agent and all others as competitors
/// sharing a common null rank; there must be at least as many competitors as
/// copies of the focal type.
pub fn detect_modified_pattern(market: &Market, p: &Profile) -> Result<Option<ModifiedPattern>> {
    let null = market.null();
    let (bystanders, active): (Vec<AgentId>, Vec<AgentId>) =
        market.agents().partition(|&a| p.order(a).at(1) == null);
    if active.len() < 2 {
        return Ok(None);
    }

    let mut found = Vec::new();
    for &special in &active {
        let sp = p.order(special);
        let focal = sp.at(1);
        let special_null = market.null_rank(sp);
        if special_null < 3 {
            continue;
        }
        let competitors: Vec<AgentId> = active.iter().copied().filter(|&a| a != special).collect();
        let l = market.null_rank(p.order(competitors[0]));
        let qualifies = l >= 2
            && special_null > l
            && competitors.len() >= market.capacity(focal) as usize
            && competitors.iter().all(|&c| {
                let cp = p.order(c);
                market.null_rank(cp) == l
                    && cp.ranking()[..l - 1] == sp.ranking()[..l - 1]
                    && market.capacity_threshold_rank(cp) == l
            });
        if qualifies {
            found.push(ModifiedPattern {
                special_agent: special,
                focal_type: focal,
                prefix_length: l,
                competitors,
                bystanders: bystanders.clone(),
            });
        }
    }
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        n => Err(Error::AmbiguousPattern(format!(
            "{n} agents qualify as the special agent"
        ))),
    }
}

/// The modified uniform rank-minimizing mechanism.
///
/// Off-pattern it equals the uniform mechanism. On-pattern the special agent
/// receives its revealed second-best type with certainty and the output is
/// the uniform average of the rank-minimizing deterministic assignments that
/// do so: with exactly as many competitors as focal copies that is the single
/// assignment giving each competitor the focal type and each bystander the
/// null type.
pub fn modified_mechanism(market: &Market, p: &Profile, budget: Budget) -> Result<Assignment> {
    let set = enumerate_rank_minimizers(market, p, budget)?;
    let Some(pattern) = detect_modified_pattern(market, p)? else {
        return Assignment::uniform_average(market, &set.members);
    };
    let second = p.order(pattern.special_agent).at(2);
    let kept: Vec<DeterministicAssignment> = set
        .members
        .into_iter()
        .filter(|y| y.of(pattern.special_agent) == second)
        .collect();
    if kept.is_empty() {
        return Err(Error::Domain(
            "no rank-minimizing assignment gives the special agent its second-best type".into(),
        ));
    }
    Assignment::uniform_average(market, &kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Uniform,
    Modified,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Uniform => "uniform",
            MechanismKind::Modified => "modified",
        })
    }
}

/// Anything mapping a revealed profile to an assignment.
pub trait Mechanism: Sync {
    fn assign(&self, market: &Market, p: &Profile) -> Result<Assignment>;
}

/// A built-in mechanism together with its enumeration budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rule {
    pub kind: MechanismKind,
    pub budget: Budget,
}

impl Rule {
    pub fn new(kind: MechanismKind) -> Self {
        Rule {
            kind,
            budget: Budget::default(),
        }
    }

    pub fn with_budget(kind: MechanismKind, budget: Budget) -> Self {
        Rule { kind, budget }
    }
}

impl Mechanism for Rule {
    fn assign(&self, market: &Market, p: &Profile) -> Result<Assignment> {
        match self.kind {
            MechanismKind::Uniform => uniform_mechanism(market, p, self.budget),
            MechanismKind::Modified => modified_mechanism(market, p, self.budget),
        }
    }
}

impl Mechanism for MechanismKind {
    fn assign(&self, market: &Market, p: &Profile) -> Result<Assignment> {
        Rule::new(*self).assign(market, p)
    }
}

impl<F> Mechanism for F
where
    F: Fn(&Market, &Profile) -> Result<Assignment> + Sync,
{
    fn assign(&self, market: &Market, p: &Profile) -> Result<Assignment> {
        self(market, p)
    }
}

/// First pair of agents whose orders count as equal but whose rows differ.
/// With `essential` the orders only need to agree up to the capacity
/// threshold rank; otherwise they must be identical.
pub fn equal_treatment_violation(
    market: &Market,
    f: &dyn Mechanism,
    p: &Profile,
    essential: bool,
) -> Result<Option<(AgentId, AgentId)>> {
    let x = f.assign(market, p)?;
    for a in market.agents() {
        for b in market.agents().filter(|b| b.0 > a.0) {
            let equal = if essential {
                market.essentially_equal(p.order(a), p.order(b))
            } else {
                p.order(a) == p.order(b)
            };
            if equal && x.row(a) != x.row(b) {
                return Ok(Some((a, b)));
            }
        }
    }
    Ok(None)
}

/// Equal treatment of equals at `p`: essentially equal orders get equal rows.
pub fn check_ete(market: &Market, f: &dyn Mechanism, p: &Profile) -> Result<bool> {
    Ok(equal_treatment_violation(market, f, p, true)?.is_none())
}

/// Weak equal treatment of equals at `p`: identical orders get equal rows.
pub fn check_weak_ete(market: &Market, f: &dyn Mechanism, p: &Profile) -> Result<bool> {
    Ok(equal_treatment_violation(market, f, p, false)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{is_wasteful, rank_value};
    use crate::market::fixtures::*;
    use crate::market::TypeSpec;

    const BETA: &[&str] = &["o1", "o2", "n"];
    const BETA_P: &[&str] = &["o2", "o1", "n"];
    const BETA_PP: &[&str] = &["o1", "n", "o2"];
    const ALPHA: &[&str] = &["o1", "o2", "n", "o3"];
    const ALPHA_P: &[&str] = &["o1", "o2", "o3", "n"];

    fn grid(m: &Market, rows: &[&str]) -> Assignment {
        Assignment::parse_rows(m, rows).unwrap()
    }

    /// Independent oracle: every choice vector, filtered by capacity.
    fn brute_force(m: &Market, p: &Profile) -> (u64, Vec<Vec<TypeId>>) {
        let n = m.num_agents();
        let t = m.num_types();
        let mut best = u64::MAX;
        let mut all = Vec::new();
        for code in 0..t.pow(n as u32) {
            let mut c = code;
            let choice: Vec<TypeId> = (0..n)
                .map(|_| {
                    let o = TypeId(c % t);
                    c /= t;
                    o
                })
                .collect();
            let feasible = m
                .types()
                .all(|o| choice.iter().filter(|&&x| x == o).count() as u32 <= m.capacity(o));
            if !feasible {
                continue;
            }
            let rv: u64 = choice
                .iter()
                .enumerate()
                .map(|(a, &o)| p.order(AgentId(a)).rank(o).unwrap() as u64)
                .sum();
            if rv < best {
                best = rv;
                all.clear();
            }
            if rv == best {
                all.push(choice);
            }
        }
        all.sort();
        (best, all)
    }

    #[test]
    fn enumeration_matches_brute_force_on_every_small_profile() {
        let m = example2();
        let orders = m.all_orders();
        for x in &orders {
            for y in &orders {
                for z in &orders {
                    let p = Profile::new(&m, vec![x.clone(), y.clone(), z.clone()]).unwrap();
                    let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
                    let (best, all) = brute_force(&m, &p);
                    assert_eq!(set.optimum, Rational::from_integer(best as i64));
                    let got: Vec<Vec<TypeId>> =
                        set.members.iter().map(|y| y.choice().to_vec()).collect();
                    assert_eq!(got, all);
                }
            }
        }
    }

    #[test]
    fn single_member_when_truthful_agent_prefers_null() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA_PP, BETA, BETA_P]).unwrap();
        let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
        assert_eq!(set.members.len(), 1);
        assert_eq!(
            set.members[0].choice(),
            &[m.null(), TypeId(0), TypeId(1)]
        );
    }

    #[test]
    fn distinct_first_choices_give_everyone_their_best() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA, BETA_P, &["n", "o1", "o2"]]).unwrap();
        let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
        assert_eq!(set.members.len(), 1);
        assert_eq!(set.optimum, Rational::from_integer(3));
    }

    #[test]
    fn six_members_for_all_beta() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA, BETA, BETA]).unwrap();
        let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
        assert_eq!(set.members.len(), 6);
        let x = Assignment::uniform_average(&m, &set.members).unwrap();
        assert_eq!(x, grid(&m, &["1/3 1/3 1/3"; 3]));
    }

    #[test]
    fn budget_is_enforced() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA, BETA, BETA]).unwrap();
        let tight = Budget {
            max_agents: 2,
            ..Budget::default()
        };
        let err = enumerate_rank_minimizers(&m, &p, tight).unwrap_err();
        assert!(err.is_budget());
        let tight = Budget {
            max_types: 2,
            ..Budget::default()
        };
        assert!(uniform_mechanism(&m, &p, tight).unwrap_err().is_budget());
    }

    #[test]
    fn uniform_examples() {
        let m = example2();
        let b = Budget::default();
        let f = |rows: &[&[&str]]| uniform_mechanism(&m, &Profile::from_names(&m, rows).unwrap(), b).unwrap();
        assert_eq!(f(&[BETA_PP, BETA, BETA_P]), grid(&m, &["0 0 1", "1 0 0", "0 1 0"]));
        assert_eq!(f(&[BETA_PP, BETA_PP, BETA_PP]), grid(&m, &["1/3 0 2/3"; 3]));

        let m3 = example3();
        let p = Profile::from_names(
            &m3,
            &[&["o1", "o3", "o2", "n"], &["o1", "o3", "o2", "n"], &["o3", "o1", "o2", "n"]],
        )
        .unwrap();
        let x = uniform_mechanism(&m3, &p, b).unwrap();
        assert_eq!(x.row(AgentId(0))[0], Rational::new(1, 2));
    }

    #[test]
    fn pattern_detection() {
        let m = example1(1);
        let p = Profile::from_names(&m, &[ALPHA_P, ALPHA, ALPHA]).unwrap();
        let pat = detect_modified_pattern(&m, &p).unwrap().expect("pattern");
        assert_eq!(pat.special_agent, AgentId(0));
        assert_eq!(pat.focal_type, TypeId(0));
        assert_eq!(pat.prefix_length, 3);
        assert_eq!(pat.competitors, vec![AgentId(1), AgentId(2)]);
        assert!(pat.bystanders.is_empty());

        let m = example1(2);
        let p = Profile::from_names(&m, &[ALPHA_P, ALPHA, ALPHA]).unwrap();
        assert_eq!(detect_modified_pattern(&m, &p).unwrap(), None);

        let m = example2();
        let null_first: &[&str] = &["n", "o1", "o2"];
        let p = Profile::from_names(&m, &[null_first; 3]).unwrap();
        assert_eq!(detect_modified_pattern(&m, &p).unwrap(), None);
    }

    #[test]
    fn pattern_with_bystander() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA, BETA_PP, &["n", "o2", "o1"]]).unwrap();
        let pat = detect_modified_pattern(&m, &p).unwrap().expect("pattern");
        assert_eq!(pat.special_agent, AgentId(0));
        assert_eq!(pat.competitors, vec![AgentId(1)]);
        assert_eq!(pat.bystanders, vec![AgentId(2)]);
        let x = modified_mechanism(&m, &p, Budget::default()).unwrap();
        assert_eq!(x, grid(&m, &["0 1 0", "1 0 0", "0 0 1"]));
    }

    #[test]
    fn modified_examples() {
        let m = example2();
        let b = Budget::default();
        let p = Profile::from_names(&m, &[BETA, BETA_PP, BETA_PP]).unwrap();
        assert_eq!(
            modified_mechanism(&m, &p, b).unwrap(),
            grid(&m, &["0 1 0", "1/2 0 1/2", "1/2 0 1/2"])
        );
        // truth-telling profile is off-pattern
        let p = Profile::from_names(&m, &[BETA_PP, BETA_PP, BETA_PP]).unwrap();
        assert_eq!(modified_mechanism(&m, &p, b).unwrap(), uniform_mechanism(&m, &p, b).unwrap());

        let m4 = example4();
        let delta: &[&str] = &["o1", "o2", "n"];
        let delta_p: &[&str] = &["o1", "n", "o2"];
        let p = Profile::from_names(&m4, &[delta_p, delta]).unwrap();
        let x = modified_mechanism(&m4, &p, b).unwrap();
        assert_eq!(x.get(AgentId(0), TypeId(0)), Rational::from_integer(1));
        let p = Profile::from_names(&m4, &[delta, delta]).unwrap();
        let x = modified_mechanism(&m4, &p, b).unwrap();
        assert_eq!(x, uniform_mechanism(&m4, &p, b).unwrap());
        assert_eq!(x.row(AgentId(0)), &[Rational::new(1, 2), Rational::new(1, 2), Rational::from_integer(0)]);
    }

    #[test]
    fn weak_ete_examples() {
        let m = example2();
        let p = Profile::from_names(&m, &[BETA_PP, BETA_PP, BETA_PP]).unwrap();
        assert!(check_weak_ete(&m, &MechanismKind::Uniform, &p).unwrap());
        let p = Profile::from_names(&m, &[BETA_PP, BETA, BETA_P]).unwrap();
        assert!(check_weak_ete(&m, &MechanismKind::Uniform, &p).unwrap());
        assert!(check_ete(&m, &MechanismKind::Uniform, &p).unwrap());
    }

    #[test]
    fn ete_catches_a_biased_mechanism() {
        let m = example2();
        // always gives o1 to the lowest-indexed agent ranking it first
        let biased = |m: &Market, p: &Profile| {
            let set = enumerate_rank_minimizers(m, p, Budget::default())?;
            Assignment::uniform_average(m, &set.members[..1])
        };
        let p = Profile::from_names(&m, &[BETA, BETA, BETA_P]).unwrap();
        assert!(!check_weak_ete(&m, &biased, &p).unwrap());
        assert!(!check_ete(&m, &biased, &p).unwrap());
    }

    #[test]
    fn outputs_are_rank_minimizing_and_not_wasteful() {
        let m = example2();
        let orders = m.all_orders();
        for x in &orders {
            for y in &orders {
                for z in &orders {
                    let p = Profile::new(&m, vec![x.clone(), y.clone(), z.clone()]).unwrap();
                    let opt = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap().optimum;
                    for kind in [MechanismKind::Uniform, MechanismKind::Modified] {
                        let out = kind.assign(&m, &p).unwrap();
                        assert_eq!(rank_value(&m, &out, &p).unwrap(), opt);
                        assert_eq!(is_wasteful(&m, &out, &p).unwrap(), None);
                        assert!(check_ete(&m, &kind, &p).unwrap(), "{kind} at {p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn larger_market_within_budget() {
        let agents: Vec<String> = (0..6).map(|i| format!("a{i}")).collect();
        let m = Market::new(
            agents,
            vec![
                TypeSpec::new("x", 2),
                TypeSpec::new("y", 2),
                TypeSpec::new("z", 1),
                TypeSpec::null("n", 6),
            ],
        )
        .unwrap();
        let order: &[&str] = &["x", "y", "z", "n"];
        let p = Profile::from_names(&m, &[order; 6]).unwrap();
        let set = enumerate_rank_minimizers(&m, &p, Budget::default()).unwrap();
        // 6!/(2!2!1!1!) ways to hand out x,x,y,y,z,n
        assert_eq!(set.members.len(), 180);
        let x = uniform_mechanism(&m, &p, Budget::default()).unwrap();
        assert_eq!(x.row(AgentId(3))[0], Rational::new(1, 3));
    }
}
