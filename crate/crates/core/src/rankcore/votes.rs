//! Combines the per-window assignments of one scene into a final ranking.
//!
//! Each proposal sits in `W` windows. A proposal labelled non-salient in a
//! strict majority of them ends at order 0. The rest are ordered by
//! pairwise majority: for every pair sharing windows, the one with the
//! smaller in-window label (0 counts as `W + 1`) in more of those windows
//! beats the other, and proposals are sorted by their number of wins. Ties
//! fall back to the summed in-window labels (a 0 adds `W + 1`), then to
//! summed salient probability (descending), then to proposal id.

use super::acb::Window;
use super::ecs::WindowAssignment;
use crate::domain::Ranking;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub window: Window,
    pub assignment: WindowAssignment,
    /// Row-wise class probabilities, `W × (W + 1)`.
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoteState {
    pub rank_sum: u64,
    pub zero_votes: u32,
    pub salient_prob_sum: f64,
    pub appearances: u32,
}

impl VoteState {
    fn sort_key(&self, window: usize) -> u64 {
        self.rank_sum + u64::from(self.zero_votes) * (window as u64 + 1)
    }
}

/// `ids[i]` and `dummy[i]` describe proposal index `i` of the scene.
pub fn aggregate_votes(
    outcomes: &[WindowOutcome],
    ids: &[u32],
    dummy: &[bool],
    window: usize,
) -> Result<Ranking> {
    let n = ids.len();
    assert_eq!(dummy.len(), n, "dummy mask length");
    let mut state = vec![VoteState::default(); n];
    // pref[a * n + b]: windows where a outranked b
    let mut pref = vec![0u32; n * n];
    let effective = |label: usize| if label == 0 { window + 1 } else { label };

    for out in outcomes {
        let members = &out.window.members;
        for (r, &m) in members.iter().enumerate() {
            if dummy[m] {
                continue;
            }
            let label = out.assignment.labels[r];
            let st = &mut state[m];
            st.appearances += 1;
            if label == 0 {
                st.zero_votes += 1;
            } else {
                st.rank_sum += label as u64;
            }
            st.salient_prob_sum += 1.0 - out.probs[r][0];
            for (s, &o) in members.iter().enumerate() {
                if s != r && !dummy[o] && effective(label) < effective(out.assignment.labels[s]) {
                    pref[m * n + o] += 1;
                }
            }
        }
    }

    for i in 0..n {
        if !dummy[i] && state[i].appearances as usize != window {
            return Err(Error::CoverageViolation {
                id: ids[i],
                appearances: state[i].appearances as usize,
                expected: window,
            });
        }
    }

    let salient: Vec<usize> = (0..n)
        .filter(|&i| !dummy[i] && 2 * state[i].zero_votes as usize <= window)
        .collect();
    let wins: Vec<usize> = salient
        .iter()
        .map(|&a| {
            salient
                .iter()
                .filter(|&&b| b != a && pref[a * n + b] > pref[b * n + a])
                .count()
        })
        .collect();
    let mut order: Vec<usize> = (0..salient.len()).collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (salient[x], salient[y]);
        wins[y]
            .cmp(&wins[x])
            .then(state[a].sort_key(window).cmp(&state[b].sort_key(window)))
            .then(
                state[b]
                    .salient_prob_sum
                    .total_cmp(&state[a].salient_prob_sum),
            )
            .then(ids[a].cmp(&ids[b]))
    });

    let mut labels: std::collections::BTreeMap<u32, u32> =
        (0..n).filter(|&i| !dummy[i]).map(|i| (ids[i], 0)).collect();
    for (rank, &x) in order.iter().enumerate() {
        labels.insert(ids[salient[x]], rank as u32 + 1);
    }
    Ranking::new(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankcore::acb::acb_sequences;

    fn outcome(window: Window, labels: Vec<usize>) -> WindowOutcome {
        let w = labels.len();
        let probs = labels
            .iter()
            .map(|&l| {
                let mut row = vec![0.0; w + 1];
                row[l] = 1.0;
                row
            })
            .collect();
        WindowOutcome {
            window,
            assignment: WindowAssignment { labels },
            probs,
        }
    }

    /// Per-window labels given as `table[window][proposal]`; proposals not
    /// in the window are ignored.
    fn from_table(n: usize, w: usize, table: &[[usize; 6]]) -> Vec<WindowOutcome> {
        acb_sequences(n, w)
            .unwrap()
            .into_iter()
            .map(|win| {
                let labels = win.members.iter().map(|&m| table[win.index][m]).collect();
                outcome(win, labels)
            })
            .collect()
    }

    #[test]
    fn unanimous_first() {
        let wins = acb_sequences(6, 5).unwrap();
        // proposal 2 always label 1, others ordered by index after it
        let outs: Vec<_> = wins
            .into_iter()
            .map(|win| {
                let mut sorted = win.members.clone();
                sorted.sort_by_key(|&m| (m != 2, m));
                let labels = win
                    .members
                    .iter()
                    .map(|&m| 1 + sorted.iter().position(|&o| o == m).unwrap())
                    .collect();
                outcome(win, labels)
            })
            .collect();
        let ids: Vec<u32> = (0..6).collect();
        let r = aggregate_votes(&outs, &ids, &[false; 6], 5).unwrap();
        assert_eq!(r.get(2), Some(1));
    }

    #[test]
    fn all_zero_votes_give_zero() {
        let outs: Vec<_> = acb_sequences(5, 5)
            .unwrap()
            .into_iter()
            .map(|win| {
                let labels = win
                    .members
                    .iter()
                    .map(|&m| if m == 4 { 0 } else { m + 1 })
                    .collect();
                outcome(win, labels)
            })
            .collect();
        let ids: Vec<u32> = (10..15).collect();
        let r = aggregate_votes(&outs, &ids, &[false; 5], 5).unwrap();
        assert_eq!(r.get(14), Some(0));
        assert_eq!(r.get(10), Some(1));
    }

    #[test]
    fn hand_built_six_window_trace() {
        // rows: windows 0..5, columns: proposals 0..5 (9 = not in window)
        let table = [
            [1, 2, 3, 4, 5, 9],
            [9, 2, 3, 4, 5, 0],
            [1, 9, 3, 4, 5, 0],
            [2, 1, 9, 3, 4, 0],
            [1, 2, 4, 9, 3, 0],
            [2, 4, 1, 3, 9, 0],
        ];
        let outs = from_table(6, 5, &table);
        for o in &outs {
            assert!(o.assignment.labels.iter().all(|&l| l != 9));
            assert!(o.assignment.is_exclusive());
        }
        let sums: Vec<usize> = (0..6)
            .map(|p| {
                (0..6)
                    .filter(|&w| table[w][p] != 9)
                    .map(|w| table[w][p])
                    .sum()
            })
            .collect();
        assert_eq!(&sums[..5], &[7, 11, 14, 18, 22]);
        let ids: Vec<u32> = (0..6).collect();
        let r = aggregate_votes(&outs, &ids, &[false; 6], 5).unwrap();
        let got: Vec<u32> = (0..6).map(|i| r.get(i).unwrap()).collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5, 0]);
    }

    #[test]
    fn dummies_left_out() {
        let outs: Vec<_> = acb_sequences(5, 5)
            .unwrap()
            .into_iter()
            .map(|win| {
                let labels = win
                    .members
                    .iter()
                    .map(|&m| if m >= 3 { 0 } else { m + 1 })
                    .collect();
                outcome(win, labels)
            })
            .collect();
        let r = aggregate_votes(
            &outs,
            &[0, 1, 2, 3, 4],
            &[false, false, false, true, true],
            5,
        )
        .unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.get(3), None);
    }

    #[test]
    fn missing_window_is_coverage_violation() {
        let mut outs: Vec<_> = acb_sequences(6, 5)
            .unwrap()
            .into_iter()
            .map(|win| outcome(win, vec![1, 2, 3, 4, 5]))
            .collect();
        outs.pop();
        let err = aggregate_votes(&outs, &[0, 1, 2, 3, 4, 5], &[false; 6], 5).unwrap_err();
        assert!(matches!(err, Error::CoverageViolation { expected: 5, .. }));
    }
}
