//! Plain-text rendering of search results and the interactive session loop.
//!
//! Output is a pure function of the input lines and the loaded data, so a
//! replayed script produces a byte-identical transcript.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use anyhow::Result;
use fm_core::{
    facet_counts, search, tokenize, FacetValueRef, JointMeaning, Query, SearchOutcome, Session,
};

pub fn render_joint_meaning(jm: &JointMeaning) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "joint meaning: {} link(s), {} fixpoint iteration(s)",
        jm.len(),
        jm.fixpoint_iterations
    );
    for l in &jm.links {
        let _ = writeln!(
            out,
            "  {} | {} | {} -> {} d={:.4}{}",
            l.pair.tag,
            l.pair.facet_value,
            l.pair.speaker_id,
            l.concept,
            l.dissimilarity,
            if l.is_anchor() { " (anchor)" } else { "" }
        );
    }
    out
}

pub fn render_outcome(outcome: &SearchOutcome) -> String {
    let mut out = render_joint_meaning(&outcome.joint_meaning);
    for w in &outcome.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if outcome.hits.is_empty() {
        out.push_str("no results\n");
        return out;
    }
    let _ = writeln!(out, "{} result(s)", outcome.hits.len());
    for (i, hit) in outcome.hits.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>3}. {} [{}] {:.4}",
            i + 1,
            hit.resource.id,
            hit.resource.title,
            hit.score
        );
        if !hit.annotations.is_empty() {
            let badges: Vec<String> = hit
                .annotations
                .iter()
                .map(|a| format!("{} ({})", a.value, a.speaker_id))
                .collect();
            let _ = writeln!(out, "     {}", badges.join(", "));
        }
    }
    out.push_str("facets:\n");
    for (group, values) in facet_counts(&outcome.hits) {
        let cells: Vec<String> = values.iter().map(|(v, n)| format!("{v}={n}")).collect();
        let _ = writeln!(out, "  {group}: {}", cells.join(" "));
    }
    out
}

fn parse_value(arg: &str) -> Result<FacetValueRef> {
    // Accept both `group=value` and `group value`.
    let normalized = match arg.split_once(char::is_whitespace) {
        Some((g, v)) if !arg.contains('=') => format!("{g}={}", v.trim()),
        _ => arg.to_string(),
    };
    Ok(normalized.parse()?)
}

/// Runs one REPL command; failures are reported in the transcript.
fn step(session: &mut Session, last_query: &mut Option<String>, line: &str, out: &mut String) {
    let (cmd, arg) = match line.split_once(char::is_whitespace) {
        Some((c, a)) => (c, a.trim()),
        None => (line, ""),
    };
    let result: Result<()> = (|| {
        match cmd {
            "query" => {
                let outcome = search(session, &Query::new(arg))?;
                *last_query = Some(arg.to_string());
                out.push_str(&render_outcome(&outcome));
            }
            "commit" => {
                let v = parse_value(arg)?;
                session.commit(v.clone())?;
                let _ = writeln!(out, "committed {v}");
            }
            "retract" => {
                let v = session.retract(arg)?;
                let _ = writeln!(out, "retracted {v}");
            }
            "show-jm" => match last_query {
                Some(q) => {
                    let (jm, _) = session.compute_joint_meaning(&tokenize(q)?)?;
                    out.push_str(&render_joint_meaning(&jm));
                }
                None => out.push_str("joint meaning: no query yet\n"),
            },
            "commitments" => {
                let c = session.commitments();
                if c.is_empty() {
                    out.push_str("no commitments\n");
                }
                for v in c {
                    let _ = writeln!(out, "  {v}");
                }
            }
            other => anyhow::bail!(
                "unknown command `{other}` (expected query, commit, retract, show-jm, commitments, quit)"
            ),
        }
        Ok(())
    })();
    if let Err(e) = result {
        let _ = writeln!(out, "error: {e:#}");
    }
}

/// Reads commands from `input` until `quit` or end of input, writing the
/// transcript to `output`. `on_turn` runs after every command, typically to
/// persist the session.
pub fn run(
    session: &mut Session,
    input: impl BufRead,
    mut output: impl Write,
    mut on_turn: impl FnMut(&Session) -> Result<()>,
) -> Result<()> {
    let mut last_query = None;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        writeln!(output, "> {line}")?;
        if matches!(line, "quit" | "exit") {
            writeln!(output, "bye")?;
            break;
        }
        let mut out = String::new();
        step(session, &mut last_query, line, &mut out);
        output.write_all(out.as_bytes())?;
        output.flush()?;
        on_turn(session)?;
    }
    Ok(())
}
