//! Subcommand implementations. Each returns a [`Report`]; file handling and
//! process exit codes live in the binary.

use std::fmt::Write as _;

use rankmin_core::assignment::row_strictly_prefers;
use rankmin_core::strategy::Witness;
use rankmin_core::sweep::describe_profile;
use rankmin_core::{
    check_dominance, decompose, full_extension, is_wasteful, ods_set, rank_value, refusal_transform,
    run_sweep, sample_profiles, Assignment, Budget, DominanceQuery, Market, Mechanism,
    MechanismKind, PreferenceOrder, Profile, Property, Rule, SweepOptions, WasteWitness,
};

use crate::spec::{parse_order, render_order};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    /// CSV rows `agent,type,probability` for the final matrix, when one exists.
    pub csv: Option<String>,
    pub status: Status,
}

impl Report {
    fn passed(text: String) -> Self {
        Report {
            text,
            csv: None,
            status: Status::Passed,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Spec {
        path: String,
        source: crate::spec::SpecError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] rankmin_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_budget() => 3,
            _ => 2,
        }
    }

    /// Suggestion printed under budget errors.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Core(rankmin_core::Error::BudgetExceeded { what, .. }) => Some(match *what {
                "agent count" => "raise --budget-agents to enumerate larger markets",
                "object type count" => "raise --budget-types to enumerate larger markets",
                _ => "raise --budget-profiles, or sample profiles with --sample",
            }),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn describe_waste(market: &Market, w: Option<WasteWitness>) -> String {
    match w {
        None => "wasteful: no".into(),
        Some(w) => format!(
            "wasteful: yes ({} prefers under-filled {} to {}, which it holds with positive probability)",
            market.agent_name(w.agent),
            market.type_name(w.preferred),
            market.type_name(w.held)
        ),
    }
}

/// Evaluates the mechanism at `revealed`; with `truths`, also applies the
/// refusal transform and judges waste against the true orders.
pub fn assign(
    market: &Market,
    revealed: &Profile,
    kind: MechanismKind,
    budget: Budget,
    truths: Option<&Profile>,
) -> Result<Report> {
    let x = Rule::with_budget(kind, budget).assign(market, revealed)?;
    let mut text = String::new();
    writeln!(text, "mechanism: {kind}").unwrap();
    writeln!(text, "revealed: {}", describe_profile(market, revealed)).unwrap();
    writeln!(text, "{}", x.render(market)).unwrap();
    writeln!(text, "rank value: {}", rank_value(market, &x, revealed)?).unwrap();
    writeln!(text, "{}", describe_waste(market, is_wasteful(market, &x, revealed)?)).unwrap();
    let mut last = x.clone();
    if let Some(truths) = truths {
        let g = refusal_transform(market, &x, truths)?;
        writeln!(text).unwrap();
        writeln!(text, "after refusal under: {}", describe_profile(market, truths)).unwrap();
        writeln!(text, "{}", g.render(market)).unwrap();
        writeln!(text, "{}", describe_waste(market, is_wasteful(market, &g, truths)?)).unwrap();
        last = g;
    }
    Ok(Report {
        csv: Some(last.to_csv(market)),
        ..Report::passed(text)
    })
}

pub struct DominanceArgs<'a> {
    pub agent: &'a str,
    /// Defaults to the agent's order in the spec.
    pub truth: Option<&'a str>,
    /// An order, or `ods` for every outside-option-demotion order.
    pub candidate: &'a str,
    pub kind: MechanismKind,
    pub refusal: bool,
    pub parallel: bool,
    pub budget: Budget,
}

fn write_witness(text: &mut String, market: &Market, label: &str, w: &Witness) {
    let row = |r: &[rankmin_core::Rational]| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    writeln!(text, "  {label}: {}", describe_profile(market, &w.profile)).unwrap();
    writeln!(text, "    truthful row:  {}", row(&w.truthful_row)).unwrap();
    writeln!(text, "    candidate row: {}", row(&w.candidate_row)).unwrap();
}

pub fn dominance(market: &Market, profile: &Profile, args: &DominanceArgs<'_>) -> Result<Report> {
    let agent = market
        .agent_by_name(args.agent)
        .ok_or_else(|| CliError::Usage(format!("unknown agent `{}`", args.agent)))?;
    let truth = match args.truth {
        Some(t) => parse_order(market, t).map_err(CliError::Usage)?,
        None => profile.order(agent).clone(),
    };
    let candidates: Vec<(PreferenceOrder, &str)> = if args.candidate == "ods" {
        let full = full_extension(market, &truth);
        ods_set(market, &truth)
            .into_iter()
            .map(|d| {
                let label = if d == full { " (full extension)" } else { "" };
                (d, label)
            })
            .collect()
    } else {
        vec![(parse_order(market, args.candidate).map_err(CliError::Usage)?, "")]
    };

    let mut text = String::new();
    writeln!(
        text,
        "agent {}, truth {}, mechanism {}, refusal {}",
        args.agent,
        render_order(market, &truth),
        args.kind,
        if args.refusal { "on" } else { "off" }
    )
    .unwrap();
    for (candidate, label) in candidates {
        let v = check_dominance(
            market,
            &DominanceQuery {
                agent,
                truth: truth.clone(),
                candidate: candidate.clone(),
                mechanism: Rule::with_budget(args.kind, args.budget),
                refusal: args.refusal,
                parallel: args.parallel,
            },
        )?;
        let yes = |b: bool| if b { "yes" } else { "no" };
        writeln!(
            text,
            "candidate {}{label}: weak {}, strict {}, identical rows {}, profiles {}",
            render_order(market, &candidate),
            yes(v.weakly_dominates),
            yes(v.strictly_dominates),
            yes(v.identical_everywhere),
            v.profiles_checked
        )
        .unwrap();
        if let Some(w) = &v.failure_witness {
            let kind = if row_strictly_prefers(&truth, &w.truthful_row, &w.candidate_row) {
                "truth strictly better at"
            } else {
                "incomparable at"
            };
            write_witness(&mut text, market, kind, w);
        }
        if let Some(w) = &v.strict_witness {
            write_witness(&mut text, market, "candidate strictly better at", w);
        }
    }
    Ok(Report::passed(text))
}

pub struct SweepArgs {
    pub parallel: bool,
    pub budget: Budget,
    /// Sample this many profiles from `seed` instead of enumerating all of them.
    pub sample: Option<(usize, u64)>,
}

pub fn sweep(market: &Market, property: Property, args: &SweepArgs) -> Result<Report> {
    if args.sample.is_some() && !property.is_profile_sweep() {
        return Err(CliError::Usage(format!(
            "--sample applies only to ete-uniform and ete-modified, not {property}"
        )));
    }
    let options = SweepOptions {
        budget: args.budget,
        parallel: args.parallel,
        profiles: args.sample.map(|(n, seed)| sample_profiles(market, n, seed)),
    };
    let report = run_sweep(market, property, &options)?;
    Ok(Report {
        text: format!("{report}\n"),
        csv: None,
        status: if report.passed() {
            Status::Passed
        } else {
            Status::Failed
        },
    })
}

/// Reads a matrix written as one whitespace-separated row of fractions per
/// agent; blank lines and `#` comments are skipped.
pub fn parse_matrix(market: &Market, text: &str) -> Result<Assignment> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    Ok(Assignment::parse_rows(market, &rows)?)
}

/// Splits `x` into weighted deterministic assignments; with a profile, also
/// reports each part's rank value.
pub fn decompose_matrix(market: &Market, x: &Assignment, profile: Option<&Profile>) -> Result<Report> {
    let d = decompose(market, x)?;
    let mut text = String::new();
    writeln!(text, "{}", x.render(market)).unwrap();
    writeln!(text, "{} deterministic parts", d.parts.len()).unwrap();
    for (w, y) in &d.parts {
        let choice = market
            .agents()
            .map(|a| format!("{}->{}", market.agent_name(a), market.type_name(y.of(a))))
            .collect::<Vec<_>>()
            .join(" ");
        match profile {
            Some(p) => writeln!(text, "  {w}  {choice}  rank value {}", y.rank_value(p)).unwrap(),
            None => writeln!(text, "  {w}  {choice}").unwrap(),
        }
    }
    let exact = d.recombine(market) == *x;
    writeln!(text, "recombines exactly: {}", if exact { "yes" } else { "no" }).unwrap();
    Ok(Report {
        text,
        csv: None,
        status: if exact { Status::Passed } else { Status::Failed },
    })
}
