//! Refusal option, outside-option-demotion strategies and the brute-force
//! strategic dominance oracle.

use itertools::Itertools;
use num_traits::Zero;
use rayon::prelude::*;

use crate::assignment::{row_strictly_prefers, row_weakly_prefers, Assignment, Rational};
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, PreferenceOrder, Profile, TypeId};
use crate::mechanisms::{Budget, Mechanism, Rule};

/// Applies the accept-or-refuse decision of every agent: mass on types the
/// agent truly ranks at or below the null type moves to the null type.
pub fn refusal_transform(market: &Market, x: &Assignment, truth: &Profile) -> Result<Assignment> {
    if x.num_agents() != market.num_agents()
        || x.num_types() != market.num_types()
        || truth.len() != market.num_agents()
    {
        return Err(Error::DimensionMismatch(
            "assignment, true profile and market disagree in size".into(),
        ));
    }
    let null = market.null();
    let mut out = x.clone();
    for a in market.agents() {
        let order = truth.order(a);
        let cutoff = market.null_rank(order);
        let mut refused = Rational::zero();
        for o in market.types() {
            if order.rank(o)? >= cutoff {
                refused += x.get(a, o);
                out.set(a, o, Rational::zero());
            }
        }
        out.set(a, null, refused);
    }
    Ok(out)
}

fn split_at_null(market: &Market, truth: &PreferenceOrder) -> (Vec<TypeId>, Vec<TypeId>) {
    let cut = market.null_rank(truth) - 1;
    let ranking = truth.ranking();
    (ranking[..cut].to_vec(), ranking[cut + 1..].to_vec())
}

fn demoted(market: &Market, acceptable: &[TypeId], middle: impl IntoIterator<Item = TypeId>) -> PreferenceOrder {
    let ranking: Vec<TypeId> = acceptable
        .iter()
        .copied()
        .chain(middle)
        .chain(std::iter::once(market.null()))
        .collect();
    PreferenceOrder::new(ranking, market.num_types()).expect("demotion keeps a permutation")
}

/// Every outside-option-demotion order for `truth`: truly acceptable types
/// keep their ranks, the null type moves to the bottom and the truly
/// unacceptable types fill the gap in any order. The first element is the
/// full extension.
pub fn ods_set(market: &Market, truth: &PreferenceOrder) -> Vec<PreferenceOrder> {
    let (acceptable, unacceptable) = split_at_null(market, truth);
    let n = unacceptable.len();
    unacceptable
        .into_iter()
        .permutations(n)
        .map(|middle| demoted(market, &acceptable, middle))
        .collect()
}

/// The demotion order that keeps the true relative order of the unacceptable
/// types.
pub fn full_extension(market: &Market, truth: &PreferenceOrder) -> PreferenceOrder {
    let (acceptable, unacceptable) = split_at_null(market, truth);
    demoted(market, &acceptable, unacceptable)
}

/// Pairs `(o, o')` with `o` truly acceptable, `o'` truly unacceptable and the
/// copies of all acceptable types plus those of `o'` short of the agent count.
pub fn condition_f_witnesses(market: &Market, truth: &PreferenceOrder) -> Vec<(TypeId, TypeId)> {
    let (acceptable, unacceptable) = split_at_null(market, truth);
    let covered: u64 = acceptable.iter().map(|&o| u64::from(market.capacity(o))).sum();
    let agents = market.num_agents() as u64;
    acceptable
        .iter()
        .flat_map(|&o| {
            unacceptable
                .iter()
                .filter(move |&&u| covered + u64::from(market.capacity(u)) < agents)
                .map(move |&u| (o, u))
        })
        .collect()
}

/// The demotion order that puts `promoted` exactly where the null type truly
/// sits, followed by the other unacceptable types in their true order.
pub fn targeted_demotion(
    market: &Market,
    truth: &PreferenceOrder,
    promoted: TypeId,
) -> Result<PreferenceOrder> {
    market.check_type(promoted)?;
    let (acceptable, unacceptable) = split_at_null(market, truth);
    if !unacceptable.contains(&promoted) {
        return Err(Error::Domain(format!(
            "type `{}` is not truly unacceptable",
            market.type_name(promoted)
        )));
    }
    let middle = std::iter::once(promoted).chain(unacceptable.into_iter().filter(|&o| o != promoted));
    Ok(demoted(market, &acceptable, middle))
}

/// Builds an opponent profile under which `agent` truly preferring `truth`
/// is strictly better off reporting `truth` than `candidate` under any fair
/// rank-minimizing mechanism.
///
/// With `k` the first position where the orders differ: for `k = 1` every
/// opponent ranks the null type first. Otherwise `q(r1)` opponents copy
/// `truth`; for each `j` in `2..k`, `q(rj)` opponents rank the rotated
/// prefix `(rj, .., r(k-1), r1, .., r(j-1))` followed by `rk` and the rest of
/// `truth`; every other opponent ranks the null type first.
///
/// The returned profile holds `truth` in `agent`'s slot.
pub fn truth_favoring_profile(
    market: &Market,
    agent: AgentId,
    truth: &PreferenceOrder,
    candidate: &PreferenceOrder,
) -> Result<Profile> {
    if agent.0 >= market.num_agents() {
        return Err(Error::Domain(format!("no agent with index {}", agent.0)));
    }
    let k = truth
        .first_difference(candidate)
        .ok_or_else(|| Error::Domain("candidate equals the true order".into()))?;
    if k > market.capacity_threshold_rank(candidate) {
        return Err(Error::Domain(
            "essentially equal orders: they agree through the capacity threshold rank".into(),
        ));
    }

    let null_first: Vec<TypeId> = std::iter::once(market.null())
        .chain(truth.ranking().iter().copied().filter(|&o| o != market.null()))
        .collect();
    let mut groups: Vec<(usize, Vec<TypeId>)> = Vec::new();
    if k >= 2 {
        let r = truth.ranking();
        groups.push((market.capacity(r[0]) as usize, r.to_vec()));
        let prefix = &r[..k - 1];
        for j in 1..k - 1 {
            let ranking: Vec<TypeId> = prefix[j..]
                .iter()
                .chain(&prefix[..j])
                .chain(&r[k - 1..])
                .copied()
                .collect();
            groups.push((market.capacity(r[j]) as usize, ranking));
        }
    }
    let needed: usize = groups.iter().map(|(n, _)| n).sum();
    let available = market.num_agents() - 1;
    if needed > available {
        return Err(Error::BudgetExceeded {
            what: "opponents required by the construction",
            limit: available,
            actual: needed,
        });
    }

    let mut opponents: Vec<PreferenceOrder> = Vec::with_capacity(available);
    for (count, ranking) in groups {
        let order = PreferenceOrder::new(ranking, market.num_types())?;
        opponents.extend(std::iter::repeat(order).take(count));
    }
    let filler = PreferenceOrder::new(null_first, market.num_types())?;
    opponents.resize(available, filler);
    Ok(Profile::assemble(agent, truth.clone(), &opponents))
}

/// A question of whether reporting `candidate` strategically dominates
/// reporting `truth` for `agent`.
#[derive(Clone, Debug)]
pub struct DominanceQuery {
    pub agent: AgentId,
    pub truth: PreferenceOrder,
    pub candidate: PreferenceOrder,
    pub mechanism: Rule,
    /// Compare outcomes after every agent refuses unacceptable assignments.
    pub refusal: bool,
    /// Fan out over opponent profiles with rayon.
    pub parallel: bool,
}

/// An opponent profile together with the queried agent's two outcome rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// Opponent orders with `truth` in the queried agent's slot.
    pub profile: Profile,
    pub truthful_row: Vec<Rational>,
    pub candidate_row: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominanceVerdict {
    pub weakly_dominates: bool,
    pub strictly_dominates: bool,
    /// First opponent profile where the candidate outcome is not weakly preferred.
    pub failure_witness: Option<Witness>,
    /// First opponent profile where the candidate outcome is strictly preferred.
    pub strict_witness: Option<Witness>,
    /// The two rows coincide at every opponent profile.
    pub identical_everywhere: bool,
    pub profiles_checked: usize,
}

/// Every opponent profile, lexicographic by agent then by order index.
pub fn opponent_profiles(market: &Market, budget: Budget) -> Result<Vec<Vec<PreferenceOrder>>> {
    let orders = market.all_orders();
    let opponents = market.num_agents() - 1;
    let count = (orders.len() as u128).checked_pow(opponents as u32).unwrap_or(u128::MAX);
    if count > budget.max_profiles as u128 {
        return Err(Error::BudgetExceeded {
            what: "opponent profile count",
            limit: budget.max_profiles,
            actual: usize::try_from(count).unwrap_or(usize::MAX),
        });
    }
    Ok(std::iter::repeat(orders)
        .take(opponents)
        .multi_cartesian_product()
        .collect())
}

struct Outcome {
    weak: bool,
    strict: bool,
    identical: bool,
    truthful_row: Vec<Rational>,
    candidate_row: Vec<Rational>,
}

fn evaluate(market: &Market, q: &DominanceQuery, others: &[PreferenceOrder]) -> Result<Outcome> {
    let truthful = Profile::assemble(q.agent, q.truth.clone(), others);
    let deviating = truthful.with_order(q.agent, q.candidate.clone());
    let mut xt = q.mechanism.assign(market, &truthful)?;
    let mut xc = q.mechanism.assign(market, &deviating)?;
    if q.refusal {
        // opponents' revealed orders stand in for their true ones; only the
        // queried agent's row is compared
        xt = refusal_transform(market, &xt, &truthful)?;
        xc = refusal_transform(market, &xc, &truthful)?;
    }
    let (rt, rc) = (xt.row(q.agent), xc.row(q.agent));
    Ok(Outcome {
        weak: row_weakly_prefers(&q.truth, rc, rt),
        strict: row_strictly_prefers(&q.truth, rc, rt),
        identical: rt == rc,
        truthful_row: rt.to_vec(),
        candidate_row: rc.to_vec(),
    })
}

/// Decides weak and strict strategic dominance of `candidate` over `truth` by
/// evaluating the mechanism at every opponent profile.
pub fn check_dominance(market: &Market, q: &DominanceQuery) -> Result<DominanceVerdict> {
    if q.agent.0 >= market.num_agents() {
        return Err(Error::Domain(format!("no agent with index {}", q.agent.0)));
    }
    if q.truth.len() != market.num_types() || q.candidate.len() != market.num_types() {
        return Err(Error::DimensionMismatch("order length differs from type count".into()));
    }
    q.mechanism.budget.check(market)?;
    let profiles = opponent_profiles(market, q.mechanism.budget)?;
    let outcomes: Vec<Outcome> = if q.parallel {
        profiles
            .par_iter()
            .map(|others| evaluate(market, q, others))
            .collect::<Result<_>>()?
    } else {
        profiles
            .iter()
            .map(|others| evaluate(market, q, others))
            .collect::<Result<_>>()?
    };

    let witness = |i: usize, o: &Outcome| Witness {
        profile: Profile::assemble(q.agent, q.truth.clone(), &profiles[i]),
        truthful_row: o.truthful_row.clone(),
        candidate_row: o.candidate_row.clone(),
    };
    let failure_witness = outcomes
        .iter()
        .position(|o| !o.weak)
        .map(|i| witness(i, &outcomes[i]));
    let strict_witness = outcomes
        .iter()
        .position(|o| o.strict)
        .map(|i| witness(i, &outcomes[i]));
    let weakly_dominates = failure_witness.is_none();
    Ok(DominanceVerdict {
        weakly_dominates,
        strictly_dominates: weakly_dominates && strict_witness.is_some(),
        failure_witness,
        strict_witness,
        identical_everywhere: outcomes.iter().all(|o| o.identical),
        profiles_checked: outcomes.len(),
    })
}
