//! Bradley-Terry abilities by minorize-maximize iteration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Choice, Vote};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 10_000;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-10;
const SMOOTHING: f64 = 0.5;
const DEGENERATE_SPREAD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityFit {
    pub clip: String,
    /// Sorted method ids.
    pub methods: Vec<String>,
    /// Sum to 1.
    pub abilities: Vec<f64>,
    pub log_abilities: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// +0.5 was added to both directions of every observed pair.
    pub smoothed: bool,
    /// Number of scored votes that were ties, each counted as half a win per side.
    pub ties: usize,
    /// Log-likelihood before the first sweep and after each sweep.
    pub likelihood_trace: Vec<f64>,
}

impl AbilityFit {
    pub fn ability(&self, method: &str) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.abilities[i])
    }
}

/// Sorted methods and the win matrix `w[i][j]` (wins of i over j, ties halved)
/// from the scored votes on `clip`. Also returns the tie count.
pub fn win_matrix(votes: &[Vote], clip: &str) -> (Vec<String>, Vec<Vec<f64>>, usize) {
    let scored: Vec<&Vote> = votes.iter().filter(|v| !v.is_verification && v.pair_id.clip == clip).collect();
    let methods: Vec<String> = scored
        .iter()
        .flat_map(|v| [v.pair_id.a.clone(), v.pair_id.b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = methods.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let k = methods.len();
    let mut w = vec![vec![0.0; k]; k];
    let mut ties = 0;
    for v in scored {
        let (a, b) = (index[v.pair_id.a.as_str()], index[v.pair_id.b.as_str()]);
        match v.choice {
            Choice::A => w[a][b] += 1.0,
            Choice::B => w[b][a] += 1.0,
            Choice::Tie => {
                w[a][b] += 0.5;
                w[b][a] += 0.5;
                ties += 1;
            }
        }
    }
    (methods, w, ties)
}

/// sum over i != j of w_ij * ln(pi_i / (pi_i + pi_j))
pub fn log_likelihood(w: &[Vec<f64>], pi: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (i, row) in w.iter().enumerate() {
        for (j, &wij) in row.iter().enumerate() {
            if i != j && wij > 0.0 {
                ll += wij * (pi[i] / (pi[i] + pi[j])).ln();
            }
        }
    }
    ll
}

/// Nodes reachable from `start` along `edge`.
fn reachable(k: usize, start: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; k];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..k {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn undirected_components(w: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let k = w.len();
    let edge = |i: usize, j: usize| w[i][j] + w[j][i] > 0.0;
    let mut assigned = vec![false; k];
    let mut out = Vec::new();
    for s in 0..k {
        if assigned[s] {
            continue;
        }
        let r = reachable(k, s, &edge);
        let comp: Vec<usize> = (0..k).filter(|&i| r[i]).collect();
        for &i in &comp {
            assigned[i] = true;
        }
        out.push(comp);
    }
    out
}

fn strongly_connected(w: &[Vec<f64>]) -> bool {
    let k = w.len();
    let fwd = reachable(k, 0, &|i, j| w[i][j] > 0.0);
    let back = reachable(k, 0, &|i, j| w[j][i] > 0.0);
    fwd.iter().chain(&back).all(|&b| b)
}

/// Fit abilities for one clip from filtered votes.
pub fn bradley_terry_fit(votes: &[Vote], clip: &str) -> Result<AbilityFit> {
    let (methods, mut w, ties) = win_matrix(votes, clip);
    let k = methods.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!("no scored votes for clip `{clip}`")));
    }
    let comps = undirected_components(&w);
    if comps.len() > 1 {
        return Err(Error::DisconnectedGraph(
            comps
                .into_iter()
                .map(|c| c.into_iter().map(|i| methods[i].clone()).collect())
                .collect(),
        ));
    }
    let smoothed = !strongly_connected(&w);
    if smoothed {
        log::warn!("clip `{clip}`: win graph not strongly connected, adding {SMOOTHING} to observed pairs");
        for i in 0..k {
            for j in i + 1..k {
                if w[i][j] + w[j][i] > 0.0 {
                    w[i][j] += SMOOTHING;
                    w[j][i] += SMOOTHING;
                }
            }
        }
    }

    let wins: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let n: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| w[i][j] + w[j][i]).collect()).collect();
    let mut pi = vec![1.0 / k as f64; k];
    let mut trace = vec![log_likelihood(&w, &pi)];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        let mut next: Vec<f64> = (0..k)
            .map(|i| {
                let denom: f64 = (0..k).filter(|&j| j != i && n[i][j] > 0.0).map(|j| n[i][j] / (pi[i] + pi[j])).sum();
                wins[i] / denom
            })
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= total);
        let delta = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a.ln() - b.ln()).abs())
            .fold(0.0, f64::max);
        pi = next;
        sweeps += 1;
        trace.push(log_likelihood(&w, &pi));
        if delta <= CONVERGENCE_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("clip `{clip}`: Bradley-Terry did not converge in {MAX_SWEEPS} sweeps");
    }
    Ok(AbilityFit {
        clip: clip.to_owned(),
        log_abilities: pi.iter().map(|p| p.ln()).collect(),
        abilities: pi,
        methods,
        sweeps,
        converged,
        smoothed,
        ties,
        likelihood_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledScores {
    pub clip: String,
    pub methods: Vec<String>,
    /// In [0, 1], same order as `methods`.
    pub scores: Vec<f64>,
    /// All log-abilities equal; every score set to 0.5.
    pub degenerate: bool,
}

impl RescaledScores {
    pub fn score(&self, method: &str) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.scores[i])
    }
}

/// Min-max rescale of log-abilities within the clip.
pub fn rescale_scores(fit: &AbilityFit) -> RescaledScores {
    let lo = fit.log_abilities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fit.log_abilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(hi - lo > DEGENERATE_SPREAD);
    let scores = if degenerate {
        vec![0.5; fit.log_abilities.len()]
    } else {
        fit.log_abilities.iter().map(|l| (l - lo) / (hi - lo)).collect()
    };
    RescaledScores {
        clip: fit.clip.clone(),
        methods: fit.methods.clone(),
        scores,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subjective::PairId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn votes(spec: &[(&str, &str, usize, usize, usize)]) -> Vec<Vote> {
        let mut out = Vec::new();
        let mut t = 0;
        for &(a, b, wa, wb, tie) in spec {
            let p = PairId::new("c", a, b).unwrap();
            for (count, choice) in [(wa, Choice::A), (wb, Choice::B), (tie, Choice::Tie)] {
                for _ in 0..count {
                    out.push(Vote::new(format!("u{t}"), p.clone(), choice, false, t as u64));
                    t += 1;
                }
            }
        }
        out
    }

    fn assert_monotone(fit: &AbilityFit) {
        for w in fit.likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", fit.likelihood_trace);
        }
    }

    #[test]
    fn symmetric_pair() {
        let fit = bradley_terry_fit(&votes(&[("x", "y", 10, 10, 0)]), "c").unwrap();
        assert_eq!(fit.abilities, vec![0.5, 0.5]);
        assert!(!fit.smoothed);
    }

    #[test]
    fn all_ties_are_uniform() {
        let fit = bradley_terry_fit(&votes(&[("x", "y", 0, 0, 4), ("y", "z", 0, 0, 3), ("x", "z", 0, 0, 5)]), "c").unwrap();
        for a in &fit.abilities {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(fit.ties, 12);
        let r = rescale_scores(&fit);
        assert!(r.degenerate);
        assert_eq!(r.scores, vec![0.5; 3]);
    }

    #[test]
    fn recovers_generative_abilities() {
        let truth = [("p", 1.0), ("q", 2.0), ("r", 4.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let p = PairId::new("c", truth[i].0, truth[j].0).unwrap();
                let prob = truth[i].1 / (truth[i].1 + truth[j].1);
                for t in 0..1000 {
                    let choice = if rng.random::<f64>() < prob { Choice::A } else { Choice::B };
                    v.push(Vote::new(format!("u{t}"), p.clone(), choice, false, 0));
                }
            }
        }
        let fit = bradley_terry_fit(&v, "c").unwrap();
        assert!(fit.converged);
        assert_monotone(&fit);
        assert!(fit.abilities[0] < fit.abilities[1] && fit.abilities[1] < fit.abilities[2]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let est = fit.abilities[i] / (fit.abilities[i] + fit.abilities[j]);
                    let tru = truth[i].1 / (truth[i].1 + truth[j].1);
                    assert!((est - tru).abs() < 0.05, "{i} {j} {est} {tru}");
                }
            }
        }
    }

    #[test]
    fn relabeling_is_equivariant() {
        let base = votes(&[("a", "b", 7, 3, 1), ("b", "c", 4, 6, 2), ("a", "c", 5, 5, 0), ("c", "d", 2, 8, 1), ("a", "d", 3, 1, 0)]);
        let rename = |m: &str| match m {
            "a" => "z",
            "b" => "y",
            "c" => "x",
            _ => "w",
        };
        let renamed: Vec<Vote> = base
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v.pair_id.a = rename(&v.pair_id.a).to_owned();
                v.pair_id.b = rename(&v.pair_id.b).to_owned();
                v
            })
            .collect();
        let f1 = bradley_terry_fit(&base, "c").unwrap();
        let f2 = bradley_terry_fit(&renamed, "c").unwrap();
        assert_monotone(&f1);
        for (i, m) in f1.methods.iter().enumerate() {
            let other = f2.ability(rename(m)).unwrap();
            assert!((f1.abilities[i] - other).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicated_votes_do_not_move_abilities() {
        let v = votes(&[("a", "b", 7, 3, 1), ("b", "c", 4, 6, 2), ("a", "c", 5, 2, 3)]);
        let mut doubled = v.clone();
        doubled.extend(v.iter().cloned());
        let f1 = bradley_terry_fit(&v, "c").unwrap();
        let f2 = bradley_terry_fit(&doubled, "c").unwrap();
        for (a, b) in f1.abilities.iter().zip(&f2.abilities) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let v = votes(&[("a", "b", 1, 1, 0), ("c", "d", 2, 1, 0)]);
        match bradley_terry_fit(&v, "c") {
            Err(Error::DisconnectedGraph(c)) => {
                assert_eq!(c, vec![vec!["a".to_string(), "b".into()], vec!["c".to_string(), "d".into()]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn never_winning_method_is_smoothed() {
        let v = votes(&[("a", "b", 5, 0, 0), ("b", "c", 3, 0, 0), ("a", "c", 2, 0, 0)]);
        let fit = bradley_terry_fit(&v, "c").unwrap();
        assert!(fit.smoothed);
        assert!(fit.converged);
        assert_monotone(&fit);
        assert!(fit.abilities.iter().all(|&p| p > 0.0));
        assert!(fit.ability("a").unwrap() > fit.ability("b").unwrap());
        assert!(fit.ability("b").unwrap() > fit.ability("c").unwrap());
        // unsmoothed fixtures stay exact
        assert!(!bradley_terry_fit(&votes(&[("a", "b", 2, 1, 0)]), "c").unwrap().smoothed);
    }

    #[test]
    fn other_clips_and_verification_are_ignored() {
        let mut v = votes(&[("a", "b", 3, 1, 0)]);
        let mut extra = v[0].clone();
        extra.pair_id.clip = "other".into();
        extra.choice = Choice::B;
        v.push(extra);
        let mut ver = v[0].clone();
        ver.is_verification = true;
        ver.choice = Choice::B;
        v.push(ver);
        let fit = bradley_terry_fit(&v, "c").unwrap();
        assert!((fit.ability("a").unwrap() - 0.75).abs() < 1e-9);
        assert!(bradley_terry_fit(&v, "missing").is_err());
    }

    fn fit_from_logs(logs: Vec<f64>) -> AbilityFit {
        AbilityFit {
            clip: "c".into(),
            methods: (0..logs.len()).map(|i| format!("m{i}")).collect(),
            abilities: logs.iter().map(|l| l.exp()).collect(),
            log_abilities: logs,
            sweeps: 0,
            converged: true,
            smoothed: false,
            ties: 0,
            likelihood_trace: vec![],
        }
    }

    #[test]
    fn rescale_fixture() {
        let r = rescale_scores(&fit_from_logs(vec![0.0, 1.0, 2.0]));
        assert_eq!(r.scores, vec![0.0, 0.5, 1.0]);
        assert!(!r.degenerate);
    }

    proptest! {
        #[test]
        fn rescale_preserves_order(logs in prop::collection::vec(-5.0f64..5.0, 2..10)) {
            let r = rescale_scores(&fit_from_logs(logs.clone()));
            for i in 0..logs.len() {
                prop_assert!((0.0..=1.0).contains(&r.scores[i]));
                for j in 0..logs.len() {
                    if logs[i] < logs[j] && !r.degenerate {
                        prop_assert!(r.scores[i] <= r.scores[j]);
                    }
                }
            }
        }
    }
}
