//! Line-oriented guessing-game console.

use std::io::{self, BufRead, IsTerminal, Write};

use blockid::identify::{IdentifyResponse, Identifier};
use blockid::synth::oracle_truth;

const HELP: &str = "type symbols separated by spaces (empty line = no description)\n\
!select <object>  compare an object with the oracle's choice for the last description\n\
!symbols          list the lexicon\n\
!quit             leave";

pub fn format_response(r: &IdentifyResponse) -> String {
    let width = r.posterior.iter().map(|o| o.object_id.len()).max().unwrap_or(0);
    let mut out = String::new();
    for o in &r.posterior {
        out.push_str(&format!("{:<width$}  {:.4}\n", o.object_id, o.prob));
    }
    out.push_str(&format!("entropy {:.4} nats\n", r.entropy));
    out
}

/// Reads descriptions from `input` until EOF or `!quit`.
pub fn run<R: BufRead, W: Write>(id: &Identifier, env_id: &str, json: bool, input: R, mut out: W) -> io::Result<()> {
    let interactive = io::stdin().is_terminal() && !json;
    let mut last: Vec<String> = Vec::new();
    if interactive {
        writeln!(out, "environment {env_id}; !help for commands")?;
    }
    let mut lines = input.lines();
    loop {
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line?;
        let line = line.trim();
        if let Some(cmd) = line.strip_prefix('!') {
            let mut parts = cmd.split_whitespace();
            match parts.next() {
                Some("quit") | Some("q") => break,
                Some("help") => writeln!(out, "{HELP}")?,
                Some("symbols") => {
                    let names: Vec<&str> = id.lexicon().symbols().iter().map(|s| s.name.as_str()).collect();
                    writeln!(out, "{}", names.join(" "))?;
                }
                Some("select") => reveal(id, env_id, &last, parts.next(), json, &mut out)?,
                _ => writeln!(out, "unknown command; !help lists commands")?,
            }
            continue;
        }
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        match id.identify(env_id, &tokens) {
            Ok(r) => {
                last = tokens;
                if json {
                    writeln!(out, "{}", serde_json::to_string(&r).expect("serializable"))?;
                } else {
                    write!(out, "{}", format_response(&r))?;
                }
            }
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(())
}

fn reveal<W: Write>(
    id: &Identifier,
    env_id: &str,
    last: &[String],
    object: Option<&str>,
    json: bool,
    out: &mut W,
) -> io::Result<()> {
    let Some(object) = object else {
        return writeln!(out, "usage: !select <object>");
    };
    let env = id.env(env_id).expect("environment checked at startup");
    let Some(o) = env.object_index(object) else {
        return writeln!(out, "error: unknown object '{object}'");
    };
    let desc = id.lexicon().parse_description(last).expect("tokens parsed before");
    let truth = oracle_truth(env, id.lexicon());
    let chosen = id.oracle(env_id, last).expect("tokens parsed before");
    let hit = chosen.iter().any(|c| c == object);
    let grade = truth.joint(o, &desc);
    if json {
        let v = serde_json::json!({
            "object_id": object,
            "oracle_selected": chosen,
            "correct": hit,
            "grade": grade,
        });
        writeln!(out, "{v}")
    } else {
        writeln!(
            out,
            "{object}: {} (grade {grade:.3}); oracle picks {}",
            if hit { "correct" } else { "wrong" },
            chosen.join(" ")
        )
    }
}
