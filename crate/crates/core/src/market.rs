//! Markets, strict preference orders and the rank function.

use std::fmt;

use crate::error::{Error, Result};

/// Index of an agent in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub usize);

/// Index of an object type in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Declaration of one object type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeSpec {
    pub name: String,
    pub capacity: u32,
    pub is_null: bool,
}

impl TypeSpec {
    pub fn new(name: impl Into<String>, capacity: u32) -> Self {
        TypeSpec {
            name: name.into(),
            capacity,
            is_null: false,
        }
    }

    pub fn null(name: impl Into<String>, capacity: u32) -> Self {
        TypeSpec {
            name: name.into(),
            capacity,
            is_null: true,
        }
    }
}

/// Agents, object types and capacities. Exactly one type is the null type
/// (the outside option), whose capacity covers every agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Market {
    agents: Vec<String>,
    types: Vec<String>,
    capacities: Vec<u32>,
    null: TypeId,
}

impl Market {
    /// Validates and builds a market.
    ///
    /// Requires at least two agents and three types, exactly one null type
    /// with capacity at least the number of agents, and every other capacity
    /// in `1..agents`. Names must be unique.
    pub fn new<S: Into<String>>(agents: Vec<S>, types: Vec<TypeSpec>) -> Result<Self> {
        let agents: Vec<String> = agents.into_iter().map(Into::into).collect();
        if agents.len() < 2 {
            return Err(Error::InvalidMarket(format!(
                "need at least 2 agents, got {}",
                agents.len()
            )));
        }
        if types.len() < 3 {
            return Err(Error::InvalidMarket(format!(
                "need at least 3 object types, got {}",
                types.len()
            )));
        }
        if let Some(dup) = first_duplicate(agents.iter()) {
            return Err(Error::InvalidMarket(format!("duplicate agent `{dup}`")));
        }
        if let Some(dup) = first_duplicate(types.iter().map(|t| &t.name)) {
            return Err(Error::InvalidMarket(format!("duplicate type `{dup}`")));
        }
        let nulls: Vec<usize> = types
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_null)
            .map(|(i, _)| i)
            .collect();
        let null = match nulls.as_slice() {
            [i] => TypeId(*i),
            [] => return Err(Error::InvalidMarket("no null type declared".into())),
            _ => {
                return Err(Error::InvalidMarket(format!(
                    "{} null types declared, expected exactly one",
                    nulls.len()
                )))
            }
        };
        let n = agents.len() as u32;
        for t in &types {
            if t.is_null {
                if t.capacity < n {
                    return Err(Error::InvalidMarket(format!(
                        "null type `{}` has capacity {} below the {} agents",
                        t.name, t.capacity, n
                    )));
                }
            } else if t.capacity < 1 || t.capacity >= n {
                return Err(Error::InvalidMarket(format!(
                    "type `{}` has capacity {}, expected 1..{}",
                    t.name, t.capacity, n
                )));
            }
        }
        Ok(Market {
            agents,
            capacities: types.iter().map(|t| t.capacity).collect(),
            types: types.into_iter().map(|t| t.name).collect(),
            null,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + Clone {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn types(&self) -> impl Iterator<Item = TypeId> + Clone {
        (0..self.types.len()).map(TypeId)
    }

    pub fn null(&self) -> TypeId {
        self.null
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn type_name(&self, o: TypeId) -> &str {
        &self.types[o.0]
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|n| n == name).map(AgentId)
    }

    pub fn type_by_name(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|n| n == name).map(TypeId)
    }

    pub fn capacity(&self, o: TypeId) -> u32 {
        self.capacities[o.0]
    }

    pub fn type_specs(&self) -> Vec<TypeSpec> {
        self.types()
            .map(|o| TypeSpec {
                name: self.type_name(o).to_string(),
                capacity: self.capacity(o),
                is_null: o == self.null,
            })
            .collect()
    }

    /// Builds an order from type names, best first.
    pub fn order(&self, names: &[&str]) -> Result<PreferenceOrder> {
        let ranking = names
            .iter()
            .map(|n| {
                self.type_by_name(n)
                    .ok_or_else(|| Error::InvalidOrder(format!("unknown type `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        PreferenceOrder::new(ranking, self.num_types())
    }

    /// Renders an order as `(o1, o2, null)`.
    pub fn display_order(&self, order: &PreferenceOrder) -> String {
        let names: Vec<&str> = order.ranking().iter().map(|&o| self.type_name(o)).collect();
        format!("({})", names.join(", "))
    }

    pub fn check_type(&self, o: TypeId) -> Result<()> {
        if o.0 < self.num_types() {
            Ok(())
        } else {
            Err(Error::UnknownType(o))
        }
    }

    /// 1-based rank of the null type under `order`.
    pub fn null_rank(&self, order: &PreferenceOrder) -> usize {
        order.rank_unchecked(self.null)
    }

    /// True iff `o` is ranked strictly above the null type.
    pub fn is_acceptable(&self, order: &PreferenceOrder, o: TypeId) -> Result<bool> {
        Ok(order.rank(o)? < self.null_rank(order))
    }

    /// Number of types ranked above the null type.
    pub fn acceptable_count(&self, order: &PreferenceOrder) -> usize {
        self.null_rank(order) - 1
    }

    /// Least `k` such that the capacities of the `k` top-ranked types cover
    /// every agent. Never exceeds the rank of the null type.
    pub fn capacity_threshold_rank(&self, order: &PreferenceOrder) -> usize {
        let need = self.num_agents() as u64;
        let mut covered = 0u64;
        for (i, &o) in order.ranking().iter().enumerate() {
            covered += u64::from(self.capacity(o));
            if covered >= need {
                return i + 1;
            }
        }
        unreachable!("null capacity covers all agents")
    }

    /// True iff the two orders agree on every position up to the capacity
    /// threshold rank of `first`. Under a non-wasteful assignment nothing
    /// ranked below that threshold is ever assigned, so such orders are
    /// interchangeable.
    pub fn essentially_equal(&self, first: &PreferenceOrder, second: &PreferenceOrder) -> bool {
        let k = self.capacity_threshold_rank(first);
        let agree = first.ranking()[..k] == second.ranking()[..k];
        if agree {
            debug_assert_eq!(k, self.capacity_threshold_rank(second));
        }
        agree
    }

    /// Every strict order over the market's types, in lexicographic order of
    /// type indices.
    pub fn all_orders(&self) -> Vec<PreferenceOrder> {
        use itertools::Itertools;
        let n = self.num_types();
        (0..n)
            .map(TypeId)
            .permutations(n)
            .map(|ranking| PreferenceOrder::new(ranking, n).expect("permutation"))
            .collect()
    }
}

fn first_duplicate<'a, I: Iterator<Item = &'a String>>(names: I) -> Option<&'a String> {
    let mut seen = std::collections::HashSet::new();
    names.into_iter().find(|n| !seen.insert(n.as_str()))
}

/// A strict ranking of all object types, best first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PreferenceOrder {
    ranking: Vec<TypeId>,
    // position of each type in `ranking`, 0-based
    positions: Vec<usize>,
}

impl PreferenceOrder {
    /// Builds an order from a full ranking of `num_types` types.
    pub fn new(ranking: Vec<TypeId>, num_types: usize) -> Result<Self> {
        if ranking.len() != num_types {
            return Err(Error::InvalidOrder(format!(
                "ranking lists {} types, market has {}",
                ranking.len(),
                num_types
            )));
        }
        let mut positions = vec![usize::MAX; num_types];
        for (k, &o) in ranking.iter().enumerate() {
            if o.0 >= num_types {
                return Err(Error::UnknownType(o));
            }
            if positions[o.0] != usize::MAX {
                return Err(Error::InvalidOrder(format!("type {o} listed twice")));
            }
            positions[o.0] = k;
        }
        Ok(PreferenceOrder { ranking, positions })
    }

    pub fn ranking(&self) -> &[TypeId] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    /// The `k`-th best type, 1-based.
    pub fn at(&self, k: usize) -> TypeId {
        self.ranking[k - 1]
    }

    /// 1-based rank of `o`.
    pub fn rank(&self, o: TypeId) -> Result<usize> {
        self.positions
            .get(o.0)
            .map(|p| p + 1)
            .ok_or(Error::UnknownType(o))
    }

    pub(crate) fn rank_unchecked(&self, o: TypeId) -> usize {
        self.positions[o.0] + 1
    }

    /// 1-based position of the first disagreement, or `None` if identical.
    pub fn first_difference(&self, other: &PreferenceOrder) -> Option<usize> {
        self.ranking
            .iter()
            .zip(&other.ranking)
            .position(|(a, b)| a != b)
            .map(|i| i + 1)
    }
}

/// One revealed order per agent, indexed by agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile {
    orders: Vec<PreferenceOrder>,
}

impl Profile {
    pub fn new(market: &Market, orders: Vec<PreferenceOrder>) -> Result<Self> {
        if orders.len() != market.num_agents() {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} orders, market has {} agents",
                orders.len(),
                market.num_agents()
            )));
        }
        if let Some(bad) = orders.iter().find(|o| o.len() != market.num_types()) {
            return Err(Error::DimensionMismatch(format!(
                "order of length {} in a market with {} types",
                bad.len(),
                market.num_types()
            )));
        }
        Ok(Profile { orders })
    }

    /// Profile built from type-name rankings, one per agent.
    pub fn from_names(market: &Market, rankings: &[&[&str]]) -> Result<Self> {
        let orders = rankings
            .iter()
            .map(|r| market.order(r))
            .collect::<Result<Vec<_>>>()?;
        Profile::new(market, orders)
    }

    pub fn order(&self, a: AgentId) -> &PreferenceOrder {
        &self.orders[a.0]
    }

    pub fn orders(&self) -> &[PreferenceOrder] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Copy of this profile with agent `a` revealing `order` instead.
    pub fn with_order(&self, a: AgentId, order: PreferenceOrder) -> Profile {
        let mut orders = self.orders.clone();
        orders[a.0] = order;
        Profile { orders }
    }

    /// Inserts `order` for agent `a` into the orders of the other agents.
    pub fn assemble(a: AgentId, order: PreferenceOrder, others: &[PreferenceOrder]) -> Profile {
        let mut orders = Vec::with_capacity(others.len() + 1);
        orders.extend_from_slice(&others[..a.0]);
        orders.push(order);
        orders.extend_from_slice(&others[a.0..]);
        Profile { orders }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        let m = example2();
        let first = m.order(&["o1", "o2", "n"]).unwrap();
        assert_eq!(first.rank(TypeId(0)).unwrap(), 1);
        let beta2 = m.order(&["o1", "n", "o2"]).unwrap();
        assert_eq!(beta2.rank(m.type_by_name("o2").unwrap()).unwrap(), 3);

        let m1 = example1(1);
        let alpha = m1.order(&["o1", "o2", "n", "o3"]).unwrap();
        assert_eq!(alpha.rank(m1.null()).unwrap(), 3);
    }

    #[test]
    fn rank_rejects_unknown_type() {
        let m = example2();
        let order = m.order(&["o1", "o2", "n"]).unwrap();
        assert!(matches!(order.rank(TypeId(7)), Err(Error::UnknownType(_))));
        assert!(m.is_acceptable(&order, TypeId(9)).is_err());
    }

    #[test]
    fn acceptability() {
        let m = example2();
        let beta2 = m.order(&["o1", "n", "o2"]).unwrap();
        assert!(m.is_acceptable(&beta2, TypeId(0)).unwrap());
        assert!(!m.is_acceptable(&beta2, TypeId(1)).unwrap());
        for order in m.all_orders() {
            assert!(!m.is_acceptable(&order, m.null()).unwrap());
        }
    }

    #[test]
    fn threshold_rank_examples() {
        let alpha = ["o1", "o2", "n", "o3"];
        let m = example1(1);
        assert_eq!(m.capacity_threshold_rank(&m.order(&alpha).unwrap()), 3);
        let m = example1(2);
        assert_eq!(m.capacity_threshold_rank(&m.order(&alpha).unwrap()), 2);
        let null_first = m.order(&["n", "o1", "o2", "o3"]).unwrap();
        assert_eq!(m.capacity_threshold_rank(&null_first), 1);
    }

    #[test]
    fn essential_equality_examples() {
        let alpha = ["o1", "o2", "n", "o3"];
        let alpha_p = ["o1", "o2", "o3", "n"];
        let m = example1(2);
        let (a, ap) = (m.order(&alpha).unwrap(), m.order(&alpha_p).unwrap());
        assert!(m.essentially_equal(&a, &a));
        assert!(m.essentially_equal(&a, &ap));
        assert!(m.essentially_equal(&ap, &a));

        // with q_o2 = 1 the threshold is 3 and position 3 differs
        let m = example1(1);
        let (a, ap) = (m.order(&alpha).unwrap(), m.order(&alpha_p).unwrap());
        assert_eq!(a.first_difference(&ap), Some(3));
        assert!(!m.essentially_equal(&a, &ap));
    }

    #[test]
    fn market_validation() {
        let ok = |agents: Vec<&str>, types: Vec<TypeSpec>| Market::new(agents, types);
        assert!(ok(vec!["a"], vec![TypeSpec::new("x", 1), TypeSpec::new("y", 1), TypeSpec::null("n", 1)]).is_err());
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 1), TypeSpec::null("n", 2)]).is_err());
        // no null
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 1), TypeSpec::new("y", 1), TypeSpec::new("z", 1)]).is_err());
        // two nulls
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 1), TypeSpec::null("y", 2), TypeSpec::null("z", 2)]).is_err());
        // null too small
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 1), TypeSpec::new("y", 1), TypeSpec::null("n", 1)]).is_err());
        // non-null capacity must stay below the agent count
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 2), TypeSpec::new("y", 1), TypeSpec::null("n", 2)]).is_err());
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 0), TypeSpec::new("y", 1), TypeSpec::null("n", 2)]).is_err());
        // duplicates
        assert!(ok(vec!["a", "a"], vec![TypeSpec::new("x", 1), TypeSpec::new("y", 1), TypeSpec::null("n", 2)]).is_err());
        assert!(ok(vec!["a", "b"], vec![TypeSpec::new("x", 1), TypeSpec::new("x", 1), TypeSpec::null("n", 2)]).is_err());
    }

    #[test]
    fn orders_must_be_permutations() {
        let m = example2();
        assert!(m.order(&["o1", "o2"]).is_err());
        assert!(m.order(&["o1", "o1", "n"]).is_err());
        assert!(m.order(&["o1", "zz", "n"]).is_err());
        assert_eq!(m.all_orders().len(), 6);
    }

    fn market_and_order() -> impl Strategy<Value = (Market, PreferenceOrder, PreferenceOrder)> {
        (2usize..6, 3usize..6)
            .prop_flat_map(|(n_agents, n_types)| {
                let caps = proptest::collection::vec(1..n_agents as u32, n_types - 1);
                let perm = Just((0..n_types).collect::<Vec<_>>()).prop_shuffle();
                (Just(n_agents), caps, perm.clone(), perm)
            })
            .prop_map(|(n_agents, caps, p1, p2)| {
                let mut types: Vec<TypeSpec> = caps
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| TypeSpec::new(format!("o{i}"), c))
                    .collect();
                types.push(TypeSpec::null("n", n_agents as u32));
                let agents: Vec<String> = (0..n_agents).map(|i| format!("a{i}")).collect();
                let m = Market::new(agents, types).unwrap();
                let n = m.num_types();
                let o1 = PreferenceOrder::new(p1.into_iter().map(TypeId).collect(), n).unwrap();
                let o2 = PreferenceOrder::new(p2.into_iter().map(TypeId).collect(), n).unwrap();
                (m, o1, o2)
            })
    }

    proptest! {
        #[test]
        fn rank_is_a_bijection((m, order, _) in market_and_order()) {
            let mut ranks: Vec<usize> = m.types().map(|o| order.rank(o).unwrap()).collect();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (1..=m.num_types()).collect::<Vec<_>>());
            for o in m.types() {
                prop_assert_eq!(order.at(order.rank(o).unwrap()), o);
            }
        }

        #[test]
        fn threshold_never_exceeds_null_rank((m, order, _) in market_and_order()) {
            prop_assert!(m.capacity_threshold_rank(&order) <= m.null_rank(&order));
            let acceptable = m.types().filter(|&o| m.is_acceptable(&order, o).unwrap()).count();
            prop_assert_eq!(acceptable, m.null_rank(&order) - 1);
            prop_assert_eq!(acceptable, m.acceptable_count(&order));
        }

        #[test]
        fn essential_equality_is_symmetric((m, a, b) in market_and_order()) {
            prop_assert!(m.essentially_equal(&a, &a));
            prop_assert_eq!(m.essentially_equal(&a, &b), m.essentially_equal(&b, &a));
            if m.essentially_equal(&a, &b) {
                prop_assert_eq!(m.capacity_threshold_rank(&a), m.capacity_threshold_rank(&b));
            }
        }
    }
}
