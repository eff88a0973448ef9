//! Decision audit log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::agents::Tier;

use super::search::{Decision, DeltaActionSpace, MAX_CIO_STEP, MAX_TTT_STEP};
use super::CpdmError;
use crate::params::ttt_index;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub interval: u64,
    pub tier: Tier,
    /// Cell (CA) or directed pair (CPA).
    pub agent: (u16, Option<u16>),
    /// FNV-1a digest of the state's bit patterns.
    pub state_digest: u64,
    pub previous: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub chosen: Vec<f64>,
    pub explored: bool,
}

pub fn state_digest(state: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in state {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl AuditRecord {
    pub fn new(interval: u64, tier: Tier, agent: (u16, Option<u16>), state: &[f64], previous: Vec<f64>, space: &DeltaActionSpace, d: &Decision) -> Self {
        Self {
            interval,
            tier,
            agent,
            state_digest: state_digest(state),
            previous,
            candidates: space.candidates.iter().map(|c| c.action.clone()).collect(),
            scores: d.scores.clone(),
            chosen: d.action.clone(),
            explored: d.explored,
        }
    }

    /// Whether the executed change respects the bounded-step rule.
    pub fn is_safe(&self) -> bool {
        match self.tier {
            Tier::Ca => match (ttt_index(self.previous[0] as u32), ttt_index(self.chosen[0] as u32)) {
                (Some(a), Some(b)) => a.abs_diff(b) <= MAX_TTT_STEP,
                _ => false,
            },
            _ => {
                self.previous.len() == self.chosen.len()
                    && self.previous.iter().zip(&self.chosen).all(|(a, b)| (a - b).abs() <= f64::from(MAX_CIO_STEP))
            }
        }
    }
}

pub fn write_audit<W: Write>(mut w: W, records: &[AuditRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_audit<R: BufRead>(r: R) -> Result<Vec<AuditRecord>, CpdmError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| CpdmError::Checkpoint(e.to_string()))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| CpdmError::Checkpoint(format!("audit line {}: {e}", i + 1)))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(tier: Tier, previous: Vec<f64>, chosen: Vec<f64>) -> AuditRecord {
        AuditRecord { interval: 0, tier, agent: (0, None), state_digest: 0, previous, candidates: vec![], scores: vec![], chosen, explored: false }
    }

    #[test]
    fn safety_rule() {
        assert!(rec(Tier::Ca, vec![320.0], vec![512.0]).is_safe());
        assert!(!rec(Tier::Ca, vec![320.0], vec![640.0]).is_safe());
        assert!(rec(Tier::Cpa, vec![0.0, 3.0], vec![2.0, 1.0]).is_safe());
        assert!(!rec(Tier::Cpa, vec![0.0, 3.0], vec![3.0, 3.0]).is_safe());
    }

    #[test]
    fn digest_depends_on_every_bit() {
        assert_ne!(state_digest(&[1.0, 2.0]), state_digest(&[2.0, 1.0]));
        assert_ne!(state_digest(&[0.0]), state_digest(&[-0.0]));
        assert_eq!(state_digest(&[1.5]), state_digest(&[1.5]));
    }

    #[test]
    fn jsonl_round_trip() {
        let r = vec![rec(Tier::Cpa, vec![0.0, 1.0], vec![1.0, 1.0])];
        let mut buf = Vec::new();
        write_audit(&mut buf, &r).unwrap();
        assert_eq!(read_audit(buf.as_slice()).unwrap(), r);
    }
}
