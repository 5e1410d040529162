//! Bundled worked examples with their expected matrices as golden data.

use std::fmt::Write as _;

use rankmin_core::{
    check_dominance, check_ete, check_weak_ete, detect_modified_pattern, enumerate_rank_minimizers,
    full_extension, is_wasteful, refusal_transform, AgentId, Assignment, Budget, DominanceQuery,
    Market, Mechanism, MechanismKind, PreferenceOrder, Profile, Rational, Result, Rule,
};

use crate::commands::{Report, Status};
use crate::spec::parse_market_spec;

pub const TWO_GOODS: &str = "\
type o1 capacity 1
type o2 capacity 1
type n capacity 3 null
agent a1 prefers o1 > n > o2
agent a2 prefers o1 > o2 > n
agent a3 prefers o2 > o1 > n
";

pub const THREE_GOODS: &str = "\
type o1 capacity 1
type o2 capacity 2
type o3 capacity 1
type n capacity 3 null
agent a1 prefers o1 > n > o2 > o3
agent a2 prefers o1 > o3 > o2 > n
agent a3 prefers o3 > o1 > o2 > n
";

pub const SHARED_SECOND: &str = "\
type o1 capacity 1
type o2 capacity 1
type o3 capacity 1
type n capacity 3 null
agent a1 prefers o1 > o2 > o3 > n
agent a2 prefers o1 > o2 > o3 > n
agent a3 prefers o1 > o2 > o3 > n
";

pub const TWO_AGENTS: &str = "\
type o1 capacity 1
type o2 capacity 1
type n capacity 2 null
agent a1 prefers o1 > o2 > n
agent a2 prefers o1 > o2 > n
";

#[derive(Clone, Debug)]
pub struct Check {
    pub label: String,
    pub ok: bool,
    pub detail: String,
}

struct Checks(Vec<Check>);

impl Checks {
    fn claim(&mut self, label: &str, ok: bool, detail: impl Into<String>) {
        self.0.push(Check {
            label: label.into(),
            ok,
            detail: detail.into(),
        });
    }

    fn matrix(&mut self, label: &str, market: &Market, computed: Result<Assignment>, expected: &[&str]) {
        let expected = Assignment::parse_rows(market, expected).expect("golden matrix");
        match computed {
            Ok(x) if x == expected => self.claim(label, true, ""),
            Ok(x) => self.claim(
                label,
                false,
                format!("expected\n{}\ncomputed\n{}", expected.render(market), x.render(market)),
            ),
            Err(e) => self.claim(label, false, e.to_string()),
        }
    }

    fn row(&mut self, label: &str, computed: Result<Assignment>, agent: usize, expected: &str) {
        let expected: Vec<Rational> = expected
            .split_whitespace()
            .map(|s| s.parse().expect("golden fraction"))
            .collect();
        let show = |r: &[Rational]| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        match computed {
            Ok(x) if x.row(AgentId(agent)) == expected.as_slice() => self.claim(label, true, ""),
            Ok(x) => self.claim(
                label,
                false,
                format!("expected {}, computed {}", show(&expected), show(x.row(AgentId(agent)))),
            ),
            Err(e) => self.claim(label, false, e.to_string()),
        }
    }
}

fn profile(market: &Market, orders: &[&PreferenceOrder]) -> Profile {
    Profile::new(market, orders.iter().map(|&o| o.clone()).collect()).expect("fixture profile")
}

fn load(text: &str) -> Market {
    parse_market_spec(text).expect("bundled spec").0
}

fn with_capacity(text: &str, from: &str, to: &str) -> Market {
    load(&text.replacen(from, to, 1))
}

fn two_goods(c: &mut Checks) {
    let m = load(TWO_GOODS);
    let beta = m.order(&["o1", "o2", "n"]).unwrap();
    let beta_p = m.order(&["o2", "o1", "n"]).unwrap();
    let beta_pp = m.order(&["o1", "n", "o2"]).unwrap();
    let (r, d) = (&beta_pp, &beta);
    let u = |p: &Profile| MechanismKind::Uniform.assign(&m, p);

    c.matrix("two goods: uniform at (truth, b, b')", &m, u(&profile(&m, &[r, &beta, &beta_p])), &["0 0 1", "1 0 0", "0 1 0"]);
    c.matrix("two goods: uniform at (demoted, b, b')", &m, u(&profile(&m, &[d, &beta, &beta_p])), &["1/2 0 1/2", "1/2 0 1/2", "0 1 0"]);
    c.matrix("two goods: uniform at (truth, b'', b'')", &m, u(&profile(&m, &[r, &beta_pp, &beta_pp])), &["1/3 0 2/3"; 3]);
    c.matrix("two goods: uniform at (demoted, b'', b'')", &m, u(&profile(&m, &[d, &beta_pp, &beta_pp])), &["1/3 2/3 0", "1/3 0 2/3", "1/3 0 2/3"]);
    c.matrix("two goods: uniform at (truth, b, b)", &m, u(&profile(&m, &[r, &beta, &beta])), &["0 0 1", "1/2 1/2 0", "1/2 1/2 0"]);
    let all_beta = profile(&m, &[d, &beta, &beta]);
    c.matrix("two goods: uniform at (demoted, b, b)", &m, u(&all_beta), &["1/3 1/3 1/3"; 3]);

    let truths = profile(&m, &[r, &beta, &beta]);
    let g = u(&all_beta).and_then(|x| refusal_transform(&m, &x, &truths));
    c.matrix("two goods: refusal after (demoted, b, b)", &m, g.clone(), &["1/3 0 2/3", "1/3 1/3 1/3", "1/3 1/3 1/3"]);
    let waste = g.and_then(|g| is_wasteful(&m, &g, &truths));
    c.claim(
        "two goods: refusal outcome is wasteful",
        matches!(waste, Ok(Some(_))),
        format!("{waste:?}"),
    );

    let fm = MechanismKind::Modified.assign(&m, &profile(&m, &[d, &beta_pp, &beta_pp]));
    c.matrix("two goods: modified at (demoted, b'', b'')", &m, fm.clone(), &["0 1 0", "1/2 0 1/2", "1/2 0 1/2"]);
    let truths = profile(&m, &[r, &beta_pp, &beta_pp]);
    c.matrix(
        "two goods: refusal after modified (demoted, b'', b'')",
        &m,
        fm.and_then(|x| refusal_transform(&m, &x, &truths)),
        &["0 0 1", "1/2 0 1/2", "1/2 0 1/2"],
    );
}

fn three_goods(c: &mut Checks) {
    let m = load(THREE_GOODS);
    let truth = m.order(&["o1", "n", "o2", "o3"]).unwrap();
    let gamma_p = m.order(&["o1", "o3", "o2", "n"]).unwrap();
    let gamma_pp = m.order(&["o3", "o1", "o2", "n"]).unwrap();
    let u = |p: &Profile| MechanismKind::Uniform.assign(&m, p);

    c.matrix(
        "three goods: uniform at (truth, g', g'')",
        &m,
        u(&profile(&m, &[&truth, &gamma_p, &gamma_pp])),
        &["0 0 0 1", "1 0 0 0", "0 0 1 0"],
    );
    let truths = profile(&m, &[&truth, &gamma_p, &gamma_pp]);
    c.matrix(
        "three goods: refusal after (g', g', g'')",
        &m,
        u(&profile(&m, &[&gamma_p, &gamma_p, &gamma_pp])).and_then(|x| refusal_transform(&m, &x, &truths)),
        &["1/2 0 0 1/2", "1/2 1/2 0 0", "0 0 1 0"],
    );

    let query = |candidate: &PreferenceOrder| DominanceQuery {
        agent: AgentId(0),
        truth: truth.clone(),
        candidate: candidate.clone(),
        mechanism: Rule::new(MechanismKind::Uniform),
        refusal: true,
        parallel: false,
    };
    match check_dominance(&m, &query(&gamma_p)) {
        Ok(v) => c.claim(
            "three goods: g' strictly dominates the truth with refusal",
            v.strictly_dominates,
            format!("{v:?}"),
        ),
        Err(e) => c.claim("three goods: g' strictly dominates the truth with refusal", false, e.to_string()),
    }
    let gamma = full_extension(&m, &truth);
    match check_dominance(&m, &query(&gamma)) {
        Ok(v) => c.claim(
            "three goods: full extension gives identical rows at all 576 profiles",
            v.identical_everywhere && v.profiles_checked == 576,
            format!("identical {}, profiles {}", v.identical_everywhere, v.profiles_checked),
        ),
        Err(e) => c.claim("three goods: full extension gives identical rows", false, e.to_string()),
    }
}

/// The rank-minimizing rule that, whenever exactly one agent reports `alpha_p`
/// and the other two report `alpha`, averages over optimal assignments
/// keeping the `alpha_p` agent off the first type; uniform otherwise.
fn excluding_rule(alpha: PreferenceOrder, alpha_p: PreferenceOrder) -> impl Fn(&Market, &Profile) -> Result<Assignment> + Sync {
    move |m: &Market, p: &Profile| {
        let odd: Vec<AgentId> = m.agents().filter(|&a| p.order(a) == &alpha_p).collect();
        let rest = m.agents().filter(|&a| p.order(a) == &alpha).count();
        let set = enumerate_rank_minimizers(m, p, Budget::default())?;
        match odd.as_slice() {
            &[a] if rest == 2 => {
                let kept: Vec<_> = set.members.into_iter().filter(|y| y.of(a) != alpha.at(1)).collect();
                Assignment::uniform_average(m, &kept)
            }
            _ => Assignment::uniform_average(m, &set.members),
        }
    }
}

fn shared_second(c: &mut Checks) {
    let m = load(SHARED_SECOND);
    let alpha = m.order(&["o1", "o2", "n", "o3"]).unwrap();
    let alpha_p = m.order(&["o1", "o2", "o3", "n"]).unwrap();
    let f = |p: &Profile| MechanismKind::Modified.assign(&m, p);
    c.row("shared second: modified at (a', a', a'), row a1", f(&profile(&m, &[&alpha_p, &alpha_p, &alpha_p])), 0, "1/3 1/3 1/3 0");
    c.row("shared second: modified at (a, a', a'), row a1", f(&profile(&m, &[&alpha, &alpha_p, &alpha_p])), 0, "1/3 1/3 0 1/3");
    let odd = profile(&m, &[&alpha_p, &alpha, &alpha]);
    let fired = detect_modified_pattern(&m, &odd);
    c.claim("shared second: pattern fires at (a', a, a) with unit capacities", matches!(fired, Ok(Some(_))), format!("{fired:?}"));

    let m2 = with_capacity(SHARED_SECOND, "o2 capacity 1", "o2 capacity 2");
    let odd = profile(&m2, &[&alpha_p, &alpha, &alpha]);
    let fired = detect_modified_pattern(&m2, &odd);
    c.claim("shared second: no pattern at (a', a, a) when o2 has two copies", matches!(fired, Ok(None)), format!("{fired:?}"));
    let rule = excluding_rule(alpha.clone(), alpha_p.clone());
    let ete = check_ete(&m2, &rule, &odd);
    let weak = check_weak_ete(&m2, &rule, &odd);
    c.claim(
        "shared second: excluding rule violates equal treatment when o2 has two copies",
        matches!((&ete, &weak), (Ok(false), Ok(true))),
        format!("ete {ete:?}, weak ete {weak:?}"),
    );
    let ete = check_ete(&m, &rule, &profile(&m, &[&alpha_p, &alpha, &alpha]));
    c.claim("shared second: excluding rule treats equals equally with unit capacities", matches!(ete, Ok(true)), format!("{ete:?}"));
}

fn two_agents(c: &mut Checks) {
    let m = load(TWO_AGENTS);
    let delta = m.order(&["o1", "o2", "n"]).unwrap();
    let delta_p = m.order(&["o1", "n", "o2"]).unwrap();
    let same = profile(&m, &[&delta, &delta]);
    let split = profile(&m, &[&delta_p, &delta]);
    for kind in [MechanismKind::Modified, MechanismKind::Uniform] {
        c.row(&format!("two agents: {kind} at (d, d), row a1"), kind.assign(&m, &same), 0, "1/2 1/2 0");
    }
    c.row("two agents: modified at (d', d), row a1", MechanismKind::Modified.assign(&m, &split), 0, "1 0 0");
    c.row("two agents: uniform at (d', d), row a1", MechanismKind::Uniform.assign(&m, &split), 0, "1/2 0 1/2");
}

pub fn run_examples() -> Vec<Check> {
    let mut c = Checks(Vec::new());
    two_goods(&mut c);
    three_goods(&mut c);
    shared_second(&mut c);
    two_agents(&mut c);
    c.0
}

pub fn reproduce_examples() -> Report {
    let checks = run_examples();
    let mut text = String::new();
    for check in &checks {
        writeln!(text, "{} {}", if check.ok { "ok  " } else { "FAIL" }, check.label).unwrap();
        if !check.ok {
            for line in check.detail.lines() {
                writeln!(text, "     {line}").unwrap();
            }
        }
    }
    let failed = checks.iter().filter(|c| !c.ok).count();
    writeln!(text, "{} checks, {failed} failed", checks.len()).unwrap();
    Report {
        text,
        csv: None,
        status: if failed == 0 { Status::Passed } else { Status::Failed },
    }
}
