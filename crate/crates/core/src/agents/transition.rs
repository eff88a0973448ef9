use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::observe::{swap_cpa_action, swap_cpa_state};
use super::reward::{RlfClass, TputClass};
use super::AgentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Ca,
    Cpa,
    Baseline,
}

/// Measured next-interval metrics, the sub-critic regression targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ho_cost: f64,
    pub class: TputClass,
    pub rlf: RlfClass,
}

/// Reward and metrics seen from the other end of a CPA pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mirror {
    pub reward: f64,
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub tier: Tier,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub metrics: Option<Metrics>,
    /// Present on CPA transitions.
    pub mirror: Option<Mirror>,
}

impl Transition {
    /// The same transition with the pair roles exchanged. An involution.
    pub fn swapped(&self) -> Transition {
        assert_eq!(self.tier, Tier::Cpa, "only CPA transitions can be swapped");
        let mirror = self.mirror.expect("CPA transition carries its mirror reward");
        Transition {
            tier: Tier::Cpa,
            state: swap_cpa_state(&self.state),
            action: swap_cpa_action(&self.action),
            reward: mirror.reward,
            next_state: swap_cpa_state(&self.next_state),
            metrics: mirror.metrics,
            mirror: Some(Mirror { reward: self.reward, metrics: self.metrics }),
        }
    }
}

pub fn write_transitions<W: Write>(mut w: W, ts: &[Transition]) -> std::io::Result<()> {
    for t in ts {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transitions<R: BufRead>(r: R) -> Result<Vec<Transition>, AgentError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| AgentError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AgentError::Log(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cpa() -> Transition {
        Transition {
            tier: Tier::Cpa,
            state: (0..28).map(f64::from).collect(),
            action: vec![2.0, -3.0],
            reward: 2.25,
            next_state: (100..128).map(f64::from).collect(),
            metrics: Some(Metrics { ho_cost: -0.1, class: TputClass::Good, rlf: RlfClass::Normal }),
            mirror: Some(Mirror { reward: 1.5, metrics: Some(Metrics { ho_cost: -0.1, class: TputClass::Poor, rlf: RlfClass::Normal }) }),
        }
    }

    #[test]
    fn swap_is_an_involution() {
        let t = cpa();
        let s = t.swapped();
        assert_ne!(s, t);
        assert_eq!(s.state.len(), 28);
        assert_eq!(s.reward, 1.5);
        assert_eq!(s.action, vec![-3.0, 2.0]);
        assert_eq!(s.swapped(), t);
    }

    #[test]
    fn jsonl_round_trip() {
        let ts = vec![cpa(), cpa().swapped()];
        let mut buf = Vec::new();
        write_transitions(&mut buf, &ts).unwrap();
        assert_eq!(read_transitions(buf.as_slice()).unwrap(), ts);
        assert!(read_transitions("{oops".as_bytes()).is_err());
    }
}
