//! Random assignments as exact probability matrices.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::market::{AgentId, Market, PreferenceOrder, Profile, TypeId};

/// Exact probability. Always stored in lowest terms with a positive denominator.
pub type Rational = num_rational::Rational64;

/// Agents × types matrix of probabilities. Rows sum to one and column sums
/// stay within capacity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    agents: usize,
    types: usize,
    entries: Vec<Rational>,
}

impl Assignment {
    /// Validates a matrix given row by row (agents in market order, types in
    /// market order).
    pub fn new(market: &Market, rows: Vec<Vec<Rational>>) -> Result<Self> {
        if rows.len() != market.num_agents() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} agents",
                rows.len(),
                market.num_agents()
            )));
        }
        let mut entries = Vec::with_capacity(market.num_agents() * market.num_types());
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != market.num_types() {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries for {} types",
                    a,
                    row.len(),
                    market.num_types()
                )));
            }
            entries.extend(row);
        }
        let x = Assignment {
            agents: market.num_agents(),
            types: market.num_types(),
            entries,
        };
        x.validate(market)?;
        Ok(x)
    }

    /// Parses whitespace-separated fraction rows such as `"1/3 0 2/3"`.
    pub fn parse_rows(market: &Market, rows: &[&str]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| {
                row.split_whitespace()
                    .map(|cell| {
                        cell.parse::<Rational>().map_err(|_| {
                            Error::InvalidAssignment(format!("cannot parse `{cell}` as a fraction"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Assignment::new(market, parsed)
    }

    pub(crate) fn zeros(market: &Market) -> Self {
        Assignment {
            agents: market.num_agents(),
            types: market.num_types(),
            entries: vec![Rational::zero(); market.num_agents() * market.num_types()],
        }
    }

    /// Equal-weight average of deterministic assignments.
    pub fn uniform_average(market: &Market, members: &[DeterministicAssignment]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Domain("cannot average an empty set of assignments".into()));
        }
        let mut counts = vec![0i64; market.num_agents() * market.num_types()];
        for y in members {
            for (a, &o) in y.choice.iter().enumerate() {
                counts[a * market.num_types() + o.0] += 1;
            }
        }
        let n = members.len() as i64;
        Ok(Assignment {
            agents: market.num_agents(),
            types: market.num_types(),
            entries: counts.into_iter().map(|c| Rational::new(c, n)).collect(),
        })
    }

    fn validate(&self, market: &Market) -> Result<()> {
        for (i, v) in self.entries.iter().enumerate() {
            if *v < Rational::zero() || *v > Rational::one() {
                return Err(Error::InvalidAssignment(format!(
                    "entry ({}, {}) = {} outside [0, 1]",
                    i / self.types,
                    i % self.types,
                    v
                )));
            }
        }
        for a in market.agents() {
            let sum: Rational = self.row(a).iter().sum();
            if !sum.is_one() {
                return Err(Error::InvalidAssignment(format!(
                    "row of {} sums to {}",
                    market.agent_name(a),
                    sum
                )));
            }
        }
        for o in market.types() {
            let sum = self.column_sum(o);
            if sum > Rational::from_integer(i64::from(market.capacity(o))) {
                return Err(Error::InvalidAssignment(format!(
                    "column {} sums to {} above capacity {}",
                    market.type_name(o),
                    sum,
                    market.capacity(o)
                )));
            }
        }
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.agents
    }

    pub fn num_types(&self) -> usize {
        self.types
    }

    pub fn get(&self, a: AgentId, o: TypeId) -> Rational {
        self.entries[a.0 * self.types + o.0]
    }

    pub(crate) fn set(&mut self, a: AgentId, o: TypeId, v: Rational) {
        self.entries[a.0 * self.types + o.0] = v;
    }

    pub fn row(&self, a: AgentId) -> &[Rational] {
        &self.entries[a.0 * self.types..(a.0 + 1) * self.types]
    }

    pub fn column_sum(&self, o: TypeId) -> Rational {
        (0..self.agents)
            .map(|a| self.entries[a * self.types + o.0])
            .sum()
    }

    /// The deterministic assignment this matrix encodes, if every entry is 0 or 1.
    pub fn as_deterministic(&self) -> Option<DeterministicAssignment> {
        let mut choice = Vec::with_capacity(self.agents);
        for a in 0..self.agents {
            let row = self.row(AgentId(a));
            if row.iter().any(|v| !v.is_zero() && !v.is_one()) {
                return None;
            }
            choice.push(TypeId(row.iter().position(|v| v.is_one())?));
        }
        Some(DeterministicAssignment { choice })
    }

    fn check_dims(&self, market: &Market) -> Result<()> {
        if self.agents != market.num_agents() || self.types != market.num_types() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} assignment in a {}x{} market",
                self.agents,
                self.types,
                market.num_agents(),
                market.num_types()
            )));
        }
        Ok(())
    }

    /// Aligned fraction grid with a header of type names and one row per agent.
    pub fn render(&self, market: &Market) -> String {
        let mut cells: Vec<Vec<String>> = Vec::with_capacity(self.agents + 1);
        let mut header = vec![String::new()];
        header.extend(market.types().map(|o| market.type_name(o).to_string()));
        cells.push(header);
        for a in market.agents() {
            let mut line = vec![market.agent_name(a).to_string()];
            line.extend(self.row(a).iter().map(|v| v.to_string()));
            cells.push(line);
        }
        let widths: Vec<usize> = (0..=self.types)
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &cells {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// CSV rows `agent,type,probability` with fractions as `n/d`.
    pub fn to_csv(&self, market: &Market) -> String {
        let mut out = String::from("agent,type,probability\n");
        for a in market.agents() {
            for o in market.types() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    market.agent_name(a),
                    market.type_name(o),
                    self.get(a, o)
                ));
            }
        }
        out
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.agents {
            let row: Vec<String> = self.row(AgentId(a)).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// One object type per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicAssignment {
    choice: Vec<TypeId>,
}

impl DeterministicAssignment {
    pub fn new(market: &Market, choice: Vec<TypeId>) -> Result<Self> {
        if choice.len() != market.num_agents() {
            return Err(Error::DimensionMismatch(format!(
                "{} choices for {} agents",
                choice.len(),
                market.num_agents()
            )));
        }
        let mut used = vec![0u32; market.num_types()];
        for &o in &choice {
            market.check_type(o)?;
            used[o.0] += 1;
            if used[o.0] > market.capacity(o) {
                return Err(Error::InvalidAssignment(format!(
                    "type {} used beyond its capacity {}",
                    market.type_name(o),
                    market.capacity(o)
                )));
            }
        }
        Ok(DeterministicAssignment { choice })
    }

    pub(crate) fn from_choice_unchecked(choice: Vec<TypeId>) -> Self {
        DeterministicAssignment { choice }
    }

    pub fn choice(&self) -> &[TypeId] {
        &self.choice
    }

    pub fn of(&self, a: AgentId) -> TypeId {
        self.choice[a.0]
    }

    /// Rank value of a deterministic assignment: the sum of each agent's
    /// revealed rank of its type.
    pub fn rank_value(&self, p: &Profile) -> u64 {
        self.choice
            .iter()
            .zip(p.orders())
            .map(|(&o, order)| order.rank_unchecked(o) as u64)
            .sum()
    }

    pub fn to_assignment(&self, market: &Market) -> Assignment {
        let mut x = Assignment::zeros(market);
        for (a, &o) in self.choice.iter().enumerate() {
            x.set(AgentId(a), o, Rational::one());
        }
        x
    }

    pub fn render(&self, market: &Market) -> String {
        let parts: Vec<String> = market
            .agents()
            .map(|a| format!("{}->{}", market.agent_name(a), market.type_name(self.of(a))))
            .collect();
        parts.join(" ")
    }
}

/// Convex combination of deterministic assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub parts: Vec<(Rational, DeterministicAssignment)>,
}

impl Decomposition {
    /// Weighted sum of the parts.
    pub fn recombine(&self, market: &Market) -> Assignment {
        let mut x = Assignment::zeros(market);
        for (w, y) in &self.parts {
            for (a, &o) in y.choice.iter().enumerate() {
                let cur = x.get(AgentId(a), o);
                x.set(AgentId(a), o, cur + w);
            }
        }
        x
    }

    pub fn total_weight(&self) -> Rational {
        self.parts.iter().map(|(w, _)| *w).sum()
    }
}

/// Sum over agents and types of revealed rank times probability.
pub fn rank_value(market: &Market, x: &Assignment, p: &Profile) -> Result<Rational> {
    x.check_dims(market)?;
    if p.len() != market.num_agents() {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} orders for {} agents",
            p.len(),
            market.num_agents()
        )));
    }
    let mut total = Rational::zero();
    for a in market.agents() {
        let order = p.order(a);
        for o in market.types() {
            let v = x.get(a, o);
            if !v.is_zero() {
                total += v * Rational::from_integer(order.rank(o)? as i64);
            }
        }
    }
    Ok(total)
}

/// Evidence that an assignment is wasteful: `agent` holds some of `held`
/// while it prefers `preferred`, which still has spare capacity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WasteWitness {
    pub agent: AgentId,
    pub preferred: TypeId,
    pub held: TypeId,
}

/// Returns the lexicographically first `(agent, preferred, held)` witness of
/// wastefulness, or `None` if the assignment is not wasteful for `p`.
pub fn is_wasteful(market: &Market, x: &Assignment, p: &Profile) -> Result<Option<WasteWitness>> {
    x.check_dims(market)?;
    let slack: Vec<bool> = market
        .types()
        .map(|o| x.column_sum(o) < Rational::from_integer(i64::from(market.capacity(o))))
        .collect();
    for a in market.agents() {
        let order = p.order(a);
        for preferred in market.types().filter(|o| slack[o.0]) {
            let pr = order.rank(preferred)?;
            for held in market.types() {
                if x.get(a, held) > Rational::zero() && pr < order.rank(held)? {
                    return Ok(Some(WasteWitness {
                        agent: a,
                        preferred,
                        held,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Cumulative probability over the `k` top-ranked types, for each `k`.
fn cumulative(order: &PreferenceOrder, row: &[Rational]) -> Vec<Rational> {
    order
        .ranking()
        .iter()
        .scan(Rational::zero(), |acc, o| {
            *acc += row[o.0];
            Some(*acc)
        })
        .collect()
}

/// First-order stochastic dominance of lottery `row` over `other` under `order`.
pub fn row_weakly_prefers(order: &PreferenceOrder, row: &[Rational], other: &[Rational]) -> bool {
    cumulative(order, row)
        .iter()
        .zip(cumulative(order, other))
        .all(|(a, b)| *a >= b)
}

pub fn row_strictly_prefers(order: &PreferenceOrder, row: &[Rational], other: &[Rational]) -> bool {
    let c1 = cumulative(order, row);
    let c2 = cumulative(order, other);
    let n = c1.len();
    c1.iter().zip(&c2).all(|(a, b)| a >= b) && c1[..n - 1].iter().zip(&c2[..n - 1]).any(|(a, b)| a > b)
}

/// True iff `agent` with preference `order` weakly prefers its row of `x` to
/// its row of `other` in the sense of first-order stochastic dominance.
/// Incomparable lotteries give `false`.
pub fn weakly_prefers(order: &PreferenceOrder, x: &Assignment, other: &Assignment, agent: AgentId) -> bool {
    row_weakly_prefers(order, x.row(agent), other.row(agent))
}

pub fn strictly_prefers(order: &PreferenceOrder, x: &Assignment, other: &Assignment, agent: AgentId) -> bool {
    row_strictly_prefers(order, x.row(agent), other.row(agent))
}

/// Writes `x` as a convex combination of deterministic assignments.
///
/// Repeatedly extracts a deterministic assignment supported on the positive
/// entries of the remainder that fills every column already at capacity,
/// then subtracts the largest weight that keeps the remainder feasible.
/// Each step zeroes an entry or saturates a column, so the loop is finite.
pub fn decompose(market: &Market, x: &Assignment) -> Result<Decomposition> {
    x.check_dims(market)?;
    x.validate(market)?;
    let caps: Vec<i64> = market.types().map(|o| i64::from(market.capacity(o))).collect();
    let mut rest = x.clone();
    let mut total = Rational::one();
    let mut parts: BTreeMap<DeterministicAssignment, Rational> = BTreeMap::new();
    let max_steps = market.num_agents() * market.num_types() + market.num_types() + 1;

    for _ in 0..max_steps {
        if total.is_zero() {
            break;
        }
        let sums: Vec<Rational> = market.types().map(|o| rest.column_sum(o)).collect();
        let tight: Vec<bool> = market
            .types()
            .map(|o| sums[o.0] == total * Rational::from_integer(caps[o.0]))
            .collect();
        let choice = support_assignment(market, &rest, &tight).ok_or_else(|| {
            Error::InvalidAssignment("no deterministic assignment fits the remainder".into())
        })?;

        let mut used = vec![0i64; market.num_types()];
        for &o in &choice {
            used[o.0] += 1;
        }
        let mut weight = choice
            .iter()
            .enumerate()
            .map(|(a, &o)| rest.get(AgentId(a), o))
            .min()
            .expect("at least one agent");
        for o in market.types() {
            let free = caps[o.0] - used[o.0];
            if !tight[o.0] && free > 0 {
                let bound = (total * Rational::from_integer(caps[o.0]) - sums[o.0])
                    / Rational::from_integer(free);
                weight = weight.min(bound);
            }
        }

        for (a, &o) in choice.iter().enumerate() {
            let cur = rest.get(AgentId(a), o);
            rest.set(AgentId(a), o, cur - weight);
        }
        total -= weight;
        *parts
            .entry(DeterministicAssignment::from_choice_unchecked(choice))
            .or_insert_with(Rational::zero) += weight;
    }
    if !total.is_zero() {
        return Err(Error::InvalidAssignment(
            "decomposition did not terminate within its step bound".into(),
        ));
    }
    Ok(Decomposition {
        parts: parts.into_iter().map(|(y, w)| (w, y)).collect(),
    })
}

/// Depth-first search for a capacity-feasible choice on the positive support
/// of `rest` that uses every tight column to capacity.
fn support_assignment(market: &Market, rest: &Assignment, tight: &[bool]) -> Option<Vec<TypeId>> {
    fn go(
        market: &Market,
        rest: &Assignment,
        tight: &[bool],
        a: usize,
        used: &mut [u32],
        choice: &mut Vec<TypeId>,
    ) -> bool {
        let remaining = market.num_agents() - a;
        let owed: u32 = market
            .types()
            .filter(|o| tight[o.0])
            .map(|o| market.capacity(o) - used[o.0])
            .sum();
        if owed as usize > remaining {
            return false;
        }
        if a == market.num_agents() {
            return true;
        }
        for o in market.types() {
            if rest.get(AgentId(a), o) > Rational::zero() && used[o.0] < market.capacity(o) {
                used[o.0] += 1;
                choice.push(o);
                if go(market, rest, tight, a + 1, used, choice) {
                    return true;
                }
                choice.pop();
                used[o.0] -= 1;
            }
        }
        false
    }
    let mut used = vec![0u32; market.num_types()];
    let mut choice = Vec::with_capacity(market.num_agents());
    go(market, rest, tight, 0, &mut used, &mut choice).then_some(choice)
}
