//! Plain-text pulse sequences.
//!
//! One step per line:
//!
//! ```text
//! # comment
//! mw 0:00 -1:00 pi 0
//! rf -1:00 -1:10 pi/2 -pi/2 control=2:0
//! rf 4 7 1.5708 0 duration=2.5 detuning=0.01
//! wait 12.5
//! wait tau
//! ```
//!
//! Targets are eigenstate indices or `ms:bits` labels with the nuclear bits
//! in binary. Angles and phases accept plain numbers or `[k*]pi[/m]`.

use super::{Channel, Control, Label, Pulse, PulseSequence, Register, SequenceStep};
use crate::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_angle(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok().filter(|d| *d != 0.0)?),
        None => (body, 1.0),
    };
    let k = match num {
        "pi" => 1.0,
        _ => num.strip_suffix("*pi").or_else(|| num.strip_suffix("pi"))?.parse::<f64>().ok()?,
    };
    Some(sign * k * std::f64::consts::PI / den)
}

/// Parses a level given as an eigenstate index or an `ms:bits` label.
pub fn parse_level(reg: &Register, s: &str) -> Result<usize> {
    let bad = |m: String| Error::Validation(m);
    if let Ok(k) = s.parse::<usize>() {
        if k >= reg.dimension() {
            return Err(bad(format!("level {k} outside the {}-level register", reg.dimension())));
        }
        return Ok(k);
    }
    let (ms, bits) = s.split_once(':').ok_or_else(|| bad(format!("bad target {s:?}")))?;
    let ms: i8 = ms.parse().map_err(|_| bad(format!("bad m_s in {s:?}")))?;
    let n = reg.n_nuclei();
    let bits = if n == 0 && bits.is_empty() {
        0
    } else if bits.len() == n && bits.chars().all(|c| c == '0' || c == '1') {
        usize::from_str_radix(bits, 2).map_err(|e| bad(e.to_string()))?
    } else {
        return Err(bad(format!("target {s:?} needs {n} nuclear bits")));
    };
    reg.index_of(Label::new(ms, bits))
}

fn parse_target(reg: &Register, s: &str, line: usize) -> Result<usize> {
    parse_level(reg, s).map_err(|e| match e {
        Error::Validation(m) => parse_err(line, m),
        e => parse_err(line, e.to_string()),
    })
}

/// Parses a sequence file against `reg`. `tau` substitutes `wait tau`.
/// Errors carry 1-based line numbers; pulse validity is checked when the
/// sequence runs.
pub fn parse_sequence(text: &str, reg: &Register, tau: Option<f64>) -> Result<PulseSequence> {
    let mut steps = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens[0].eq_ignore_ascii_case("wait") {
            let [_, arg] = tokens[..] else {
                return Err(parse_err(line, "wait takes one argument"));
            };
            let t = if arg == "tau" {
                tau.ok_or_else(|| parse_err(line, "wait tau used but no tau given"))?
            } else {
                arg.parse::<f64>().map_err(|_| parse_err(line, format!("bad wait time {arg:?}")))?
            };
            if !(t >= 0.0 && t.is_finite()) {
                return Err(parse_err(line, "wait time must be non-negative"));
            }
            steps.push(SequenceStep::Wait(t));
            continue;
        }
        if tokens.len() < 5 {
            return Err(parse_err(line, "expected: channel target_i target_j angle phase [key=value...]"));
        }
        let channel: Channel = tokens[0].parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let i = parse_target(reg, tokens[1], line)?;
        let j = parse_target(reg, tokens[2], line)?;
        let angle = parse_angle(tokens[3]).ok_or_else(|| parse_err(line, format!("bad angle {:?}", tokens[3])))?;
        let phase = parse_angle(tokens[4]).ok_or_else(|| parse_err(line, format!("bad phase {:?}", tokens[4])))?;
        let mut pulse = Pulse::ideal(channel, i, j, angle, phase);
        for opt in &tokens[5..] {
            let (key, value) = opt.split_once('=').ok_or_else(|| parse_err(line, format!("bad option {opt:?}")))?;
            let number = || value.parse::<f64>().map_err(|_| parse_err(line, format!("bad value in {opt:?}")));
            match key {
                "control" => {
                    let (q, st) = value.split_once(':').ok_or_else(|| parse_err(line, "control=qubit:state"))?;
                    let qubit = q.parse().map_err(|_| parse_err(line, format!("bad control qubit {q:?}")))?;
                    let state = st.parse().map_err(|_| parse_err(line, format!("bad control state {st:?}")))?;
                    pulse.control = Some(Control { qubit, state });
                }
                "duration" => pulse.duration_us = Some(number()?),
                "detuning" => pulse.detuning = number()?,
                _ => return Err(parse_err(line, format!("unknown option {key:?}"))),
            }
        }
        steps.push(SequenceStep::Pulse(pulse));
    }
    Ok(PulseSequence { steps })
}
