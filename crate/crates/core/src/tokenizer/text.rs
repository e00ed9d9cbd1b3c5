//! The `TRAJ_####` wire form of token sequences.

use std::fmt;

use thiserror::Error;

use super::TokenSequence;

/// Largest id the textual grammar accepts.
pub const MAX_WIRE_ID: usize = 2047;
const PREFIX: &str = "TRAJ_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid trajectory token {token:?} at position {position}: {reason}")]
pub struct FormatError {
    /// First offending token, verbatim.
    pub token: String,
    pub position: usize,
    pub reason: FormatReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatReason {
    Empty,
    MissingPrefix,
    NotFourDigits,
    OutOfRange,
}

impl fmt::Display for FormatReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormatReason::Empty => "empty token",
            FormatReason::MissingPrefix => "missing TRAJ_ prefix",
            FormatReason::NotFourDigits => "id is not exactly four decimal digits",
            FormatReason::OutOfRange => "id exceeds 2047",
        };
        f.write_str(s)
    }
}

/// Space-separated `TRAJ_` tokens with zero-padded 4-digit ids.
pub fn serialize(ids: &TokenSequence) -> String {
    let mut out = String::with_capacity(ids.len() * 10);
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{PREFIX}{id:04}"));
    }
    out
}

/// Parses one or more single-space-separated `TRAJ_dddd` tokens with value
/// at most 2047. Anything else is rejected with the first offending token.
pub fn parse(text: &str) -> Result<TokenSequence, FormatError> {
    let mut ids = Vec::new();
    for (position, token) in text.split(' ').enumerate() {
        let fail = |reason| FormatError { token: token.to_string(), position, reason };
        if token.is_empty() {
            return Err(fail(FormatReason::Empty));
        }
        let digits = token.strip_prefix(PREFIX).ok_or_else(|| fail(FormatReason::MissingPrefix))?;
        if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(fail(FormatReason::NotFourDigits));
        }
        let id: usize = digits.parse().map_err(|_| fail(FormatReason::NotFourDigits))?;
        if id > MAX_WIRE_ID {
            return Err(fail(FormatReason::OutOfRange));
        }
        ids.push(id);
    }
    Ok(TokenSequence::new(ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialize_pads_to_four_digits() {
        assert_eq!(
            serialize(&TokenSequence::new(vec![242, 150, 172])),
            "TRAJ_0242 TRAJ_0150 TRAJ_0172"
        );
        assert_eq!(serialize(&TokenSequence::new(vec![0])), "TRAJ_0000");
        assert_eq!(serialize(&TokenSequence::new(vec![])), "");
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse("TRAJ_0042 TRAJ_2047").unwrap().ids(), &[42, 2047]);
        let e = parse("TRAJ_42").unwrap_err();
        assert_eq!(e.reason, FormatReason::NotFourDigits);
        assert_eq!(e.token, "TRAJ_42");
        assert_eq!(parse("TRAJ_2048").unwrap_err().reason, FormatReason::OutOfRange);
        assert_eq!(parse("").unwrap_err().reason, FormatReason::Empty);
    }

    #[test]
    fn parse_reports_first_offender() {
        let e = parse("TRAJ_0001 traj_0002 TRAJ_9").unwrap_err();
        assert_eq!(e.position, 1);
        assert_eq!(e.token, "traj_0002");
        assert_eq!(e.reason, FormatReason::MissingPrefix);
    }

    #[test]
    fn parse_rejects_stray_whitespace_and_signs() {
        for bad in [" TRAJ_0001", "TRAJ_0001 ", "TRAJ_0001  TRAJ_0002", "TRAJ_0001\tTRAJ_0002", "TRAJ_+001", "TRAJ_٠٠٠١"] {
            assert!(parse(bad).is_err(), "{bad:?} accepted");
        }
    }
}
