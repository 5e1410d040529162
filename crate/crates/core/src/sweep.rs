//! Exhaustive and sampled property sweeps over a market.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::is_wasteful;
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, PreferenceOrder, Profile};
use crate::mechanisms::{equal_treatment_violation, Budget, Mechanism, MechanismKind, Rule};
use crate::strategy::{
    check_dominance, condition_f_witnesses, ods_set, refusal_transform, targeted_demotion,
    DominanceQuery, DominanceVerdict,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    /// Essentially equal orders receive equal rows under the uniform mechanism.
    EteUniform,
    /// Same for the modified mechanism.
    EteModified,
    /// No misreport strictly dominates the truth under the uniform mechanism
    /// without refusal; essentially equal reports are outcome-equivalent and
    /// every other report fails weak dominance somewhere.
    TruthUndominatedUniform,
    /// No misreport strictly dominates the truth under the modified mechanism,
    /// with and without refusal.
    TruthUndominatedModified,
    /// Every demotion order weakly dominates the truth under the uniform
    /// mechanism with refusal.
    OdsWeakDominance,
    /// Whenever some unacceptable type leaves agents uncovered, promoting it
    /// to the top unacceptable slot strictly dominates the truth.
    OdsStrictDominance,
    /// Under the same condition, everyone reporting that demotion order yields
    /// a wasteful outcome after refusal.
    OdsWaste,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::EteUniform,
        Property::EteModified,
        Property::TruthUndominatedUniform,
        Property::TruthUndominatedModified,
        Property::OdsWeakDominance,
        Property::OdsStrictDominance,
        Property::OdsWaste,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::EteUniform => "ete-uniform",
            Property::EteModified => "ete-modified",
            Property::TruthUndominatedUniform => "truth-undominated-uniform",
            Property::TruthUndominatedModified => "truth-undominated-modified",
            Property::OdsWeakDominance => "ods-weak-dominance",
            Property::OdsStrictDominance => "ods-strict-dominance",
            Property::OdsWaste => "ods-waste",
        }
    }

    /// Whether the sweep runs over a list of full profiles.
    pub fn is_profile_sweep(self) -> bool {
        matches!(self, Property::EteUniform | Property::EteModified)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown property `{s}` (expected one of: {})",
                    Property::ALL.iter().map(|p| p.name()).join(", ")
                )
            })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub budget: Budget,
    pub parallel: bool,
    /// Profiles for the equal-treatment sweeps; every profile when `None`.
    pub profiles: Option<Vec<Profile>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepReport {
    pub property: Property,
    pub checked: usize,
    pub violations: usize,
    pub first_counterexample: Option<String>,
}

impl SweepReport {
    fn new(property: Property) -> Self {
        SweepReport {
            property,
            checked: 0,
            violations: 0,
            first_counterexample: None,
        }
    }

    fn record(&mut self, violation: Option<String>) {
        self.checked += 1;
        if let Some(text) = violation {
            self.violations += 1;
            self.first_counterexample.get_or_insert(text);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} checked, {} violations",
            self.property, self.checked, self.violations
        )?;
        if let Some(c) = &self.first_counterexample {
            write!(f, "\nfirst counterexample: {c}")?;
        }
        Ok(())
    }
}

/// Every profile of the market, lexicographic with agent `a1` most significant.
pub fn all_profiles(market: &Market, budget: Budget) -> Result<Vec<Profile>> {
    let orders = market.all_orders();
    let count = (orders.len() as u128)
        .checked_pow(market.num_agents() as u32)
        .unwrap_or(u128::MAX);
    if count > budget.max_profiles as u128 {
        return Err(Error::BudgetExceeded {
            what: "profile count",
            limit: budget.max_profiles,
            actual: usize::try_from(count).unwrap_or(usize::MAX),
        });
    }
    Ok(std::iter::repeat(orders)
        .take(market.num_agents())
        .multi_cartesian_product()
        .map(|orders| Profile::new(market, orders).expect("orders from the market"))
        .collect())
}

/// `count` profiles with every order drawn uniformly, reproducible from `seed`.
pub fn sample_profiles(market: &Market, count: usize, seed: u64) -> Vec<Profile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<_> = market.types().collect();
    (0..count)
        .map(|_| {
            let orders = market
                .agents()
                .map(|_| {
                    let mut ranking = base.clone();
                    ranking.shuffle(&mut rng);
                    PreferenceOrder::new(ranking, market.num_types()).expect("shuffled permutation")
                })
                .collect();
            Profile::new(market, orders).expect("orders from the market")
        })
        .collect()
}

pub fn describe_profile(market: &Market, p: &Profile) -> String {
    market
        .agents()
        .map(|a| format!("{}: {}", market.agent_name(a), market.display_order(p.order(a))))
        .join("; ")
}

pub fn run_sweep(market: &Market, property: Property, options: &SweepOptions) -> Result<SweepReport> {
    options.budget.check(market)?;
    match property {
        Property::EteUniform => ete_sweep(market, property, MechanismKind::Uniform, options),
        Property::EteModified => ete_sweep(market, property, MechanismKind::Modified, options),
        Property::TruthUndominatedUniform => truth_undominated_uniform(market, options),
        Property::TruthUndominatedModified => truth_undominated_modified(market, options),
        Property::OdsWeakDominance => ods_weak(market, options),
        Property::OdsStrictDominance => ods_strict(market, options),
        Property::OdsWaste => ods_waste(market, options),
    }
}

fn ete_sweep(
    market: &Market,
    property: Property,
    kind: MechanismKind,
    options: &SweepOptions,
) -> Result<SweepReport> {
    let owned;
    let profiles = match &options.profiles {
        Some(list) => list,
        None => {
            owned = all_profiles(market, options.budget)?;
            &owned
        }
    };
    let rule = Rule::with_budget(kind, options.budget);
    let mut report = SweepReport::new(property);
    for p in profiles {
        let v = equal_treatment_violation(market, &rule, p, true)?.map(|(a, b)| {
            format!(
                "{} and {} report essentially equal orders but get different rows at {}",
                market.agent_name(a),
                market.agent_name(b),
                describe_profile(market, p)
            )
        });
        report.record(v);
    }
    Ok(report)
}

struct Case<'a> {
    market: &'a Market,
    options: &'a SweepOptions,
    agent: AgentId,
    truth: &'a PreferenceOrder,
}

impl Case<'_> {
    fn verdict(&self, candidate: &PreferenceOrder, kind: MechanismKind, refusal: bool) -> Result<DominanceVerdict> {
        check_dominance(
            self.market,
            &DominanceQuery {
                agent: self.agent,
                truth: self.truth.clone(),
                candidate: candidate.clone(),
                mechanism: Rule::with_budget(kind, self.options.budget),
                refusal,
                parallel: self.options.parallel,
            },
        )
    }

    fn describe(&self, candidate: &PreferenceOrder, what: &str) -> String {
        format!(
            "agent {}, truth {}, report {}: {what}",
            self.market.agent_name(self.agent),
            self.market.display_order(self.truth),
            self.market.display_order(candidate)
        )
    }
}

fn for_each_case(
    market: &Market,
    options: &SweepOptions,
    mut body: impl FnMut(&Case<'_>) -> Result<()>,
) -> Result<()> {
    for agent in market.agents() {
        for truth in market.all_orders() {
            body(&Case {
                market,
                options,
                agent,
                truth: &truth,
            })?;
        }
    }
    Ok(())
}

fn truth_undominated_uniform(market: &Market, options: &SweepOptions) -> Result<SweepReport> {
    let mut report = SweepReport::new(Property::TruthUndominatedUniform);
    let orders = market.all_orders();
    for_each_case(market, options, |case| {
        for candidate in orders.iter().filter(|c| *c != case.truth) {
            let v = case.verdict(candidate, MechanismKind::Uniform, false)?;
            let problem = if v.strictly_dominates {
                Some("strictly dominates the truth")
            } else if market.essentially_equal(case.truth, candidate) {
                (!v.identical_everywhere).then_some("essentially equal yet outcomes differ")
            } else {
                v.weakly_dominates.then_some("weakly dominates the truth")
            };
            report.record(problem.map(|w| case.describe(candidate, w)));
        }
        Ok(())
    })?;
    Ok(report)
}

fn truth_undominated_modified(market: &Market, options: &SweepOptions) -> Result<SweepReport> {
    let mut report = SweepReport::new(Property::TruthUndominatedModified);
    let orders = market.all_orders();
    for_each_case(market, options, |case| {
        for candidate in orders.iter().filter(|c| *c != case.truth) {
            for refusal in [true, false] {
                let v = case.verdict(candidate, MechanismKind::Modified, refusal)?;
                let what = if refusal {
                    "strictly dominates the truth with refusal"
                } else {
                    "strictly dominates the truth"
                };
                report.record(v.strictly_dominates.then(|| case.describe(candidate, what)));
            }
        }
        Ok(())
    })?;
    Ok(report)
}

fn ods_weak(market: &Market, options: &SweepOptions) -> Result<SweepReport> {
    let mut report = SweepReport::new(Property::OdsWeakDominance);
    for_each_case(market, options, |case| {
        for d in ods_set(market, case.truth) {
            let v = case.verdict(&d, MechanismKind::Uniform, true)?;
            report.record(
                (!v.weakly_dominates).then(|| case.describe(&d, "fails to weakly dominate the truth")),
            );
        }
        Ok(())
    })?;
    Ok(report)
}

fn promoted_types(market: &Market, truth: &PreferenceOrder) -> Vec<crate::market::TypeId> {
    condition_f_witnesses(market, truth)
        .into_iter()
        .map(|(_, u)| u)
        .unique()
        .collect()
}

fn ods_strict(market: &Market, options: &SweepOptions) -> Result<SweepReport> {
    let mut report = SweepReport::new(Property::OdsStrictDominance);
    for_each_case(market, options, |case| {
        for u in promoted_types(market, case.truth) {
            let d = targeted_demotion(market, case.truth, u)?;
            let v = case.verdict(&d, MechanismKind::Uniform, true)?;
            report.record(
                (!v.strictly_dominates)
                    .then(|| case.describe(&d, "fails to strictly dominate the truth")),
            );
        }
        Ok(())
    })?;
    Ok(report)
}

fn ods_waste(market: &Market, options: &SweepOptions) -> Result<SweepReport> {
    let mut report = SweepReport::new(Property::OdsWaste);
    let rule = Rule::with_budget(MechanismKind::Uniform, options.budget);
    for_each_case(market, options, |case| {
        for u in promoted_types(market, case.truth) {
            let d = targeted_demotion(market, case.truth, u)?;
            let others = vec![d.clone(); market.num_agents() - 1];
            let revealed = Profile::assemble(case.agent, d.clone(), &others);
            let truths = revealed.with_order(case.agent, case.truth.clone());
            let x = refusal_transform(market, &rule.assign(market, &revealed)?, &truths)?;
            let waste = is_wasteful(market, &x, &truths)?;
            report.record(
                waste
                    .is_none()
                    .then(|| case.describe(&d, "outcome after refusal is not wasteful when everyone reports it")),
            );
        }
        Ok(())
    })?;
    Ok(report)
}
