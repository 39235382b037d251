//! Browser bindings: each export takes text and returns a plain-text report.

use nomrtm::bisim::{branching_bisim, dp_branching_bisim};
use nomrtm::compilers::{compile_ltsa_to_rtma, verify_compiled, Mode};
use nomrtm::lts::{bounded_reach, emit_aut, parse_aut};
use nomrtm::pi::{effective_ltsa_of, parse_pi_named, pretty_named};
use wasm_bindgen::prelude::*;

/// Branching bisimilarity of two `.aut` texts; `mode` is `bb` or `dpbb`.
#[wasm_bindgen]
pub fn bisim_aut(left: &str, right: &str, mode: &str) -> String {
    let run = || -> Result<String, String> {
        let mode: Mode = mode.parse()?;
        let l1 = parse_aut(left).map_err(|e| format!("left: {e}"))?;
        let l2 = parse_aut(right).map_err(|e| format!("right: {e}"))?;
        let v = match mode {
            Mode::Bb => branching_bisim(&l1, &l2),
            Mode::Dpbb => dp_branching_bisim(&l1, &l2),
        };
        Ok(match (v.related, v.distinction) {
            (true, _) => format!("related ({mode})\nrelation: {} pairs\n", v.witness.len()),
            (false, Some(d)) => format!("not related ({mode})\ndistinction: {d}\n"),
            (false, None) => format!("not related ({mode})\n"),
        })
    };
    run().unwrap_or_else(|e| format!("error: {e}\n"))
}

/// The quotient graph of a π-term to `depth` followed by its compile-and-verify report.
#[wasm_bindgen]
pub fn pi_compile(term: &str, depth: u32) -> String {
    let run = || -> Result<String, String> {
        let (p, names) = parse_pi_named(term).map_err(|e| e.to_string())?;
        let sys = effective_ltsa_of(&p);
        let e = bounded_reach(&sys, depth as usize).map_err(|e| e.to_string())?;
        let table: String = names.iter().map(|(a, n)| format!(" {n}={a}")).collect();
        let mut s = format!("term: {}\nnames:{table}\n{}", pretty_named(&p, &names), emit_aut(&e.lts));
        if !e.closed {
            s.push_str("(graph cut at the depth bound)\n");
        }
        let m = compile_ltsa_to_rtma(&sys);
        s.push_str(&verify_compiled(&sys, &m, depth as usize, Mode::Bb).to_string());
        Ok(s)
    };
    run().unwrap_or_else(|e| format!("error: {e}\n"))
}

/// One of the scripted demos, by its command-line name.
#[wasm_bindgen]
pub fn demo(which: &str) -> String {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    nomrtm::cli::run(["nomrtm", "demo", which], &mut out, &mut err);
    out.extend(err);
    String::from_utf8_lossy(&out).into_owned()
}
