//! Deterministic assignment of pairs to study sessions.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::VerificationKey;
use super::{Choice, PairId};
use crate::error::{Error, Result};

/// A pair with an obvious predefined answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPair {
    pub pair: PairId,
    pub answer: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub views_per_pair: usize,
    pub session_size: usize,
    pub verification_per_session: usize,
    pub seed: u64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            views_per_pair: 15,
            session_size: 25,
            verification_per_session: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Scored,
    Verification,
    /// Shown to keep the session length; votes on it are not scored.
    Filler,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub kind: SlotKind,
    /// As displayed: `a` left, `b` right.
    pub pair: PairId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub index: usize,
    pub slots: Vec<Slot>,
}

impl SessionPlan {
    pub fn count(&self, kind: SlotKind) -> usize {
        self.slots.iter().filter(|s| s.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub params: ScheduleParams,
    pub scored_per_session: usize,
    pub total_scored: usize,
    pub sessions: Vec<SessionPlan>,
    pub verification_pool: Vec<VerificationPair>,
}

impl SchedulePlan {
    /// Scored assignments per unordered pair.
    pub fn scored_counts(&self) -> BTreeMap<PairId, usize> {
        let mut out = BTreeMap::new();
        for s in &self.sessions {
            for slot in s.slots.iter().filter(|s| s.kind == SlotKind::Scored) {
                *out.entry(slot.pair.unordered()).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn verification_key(&self) -> VerificationKey {
        let mut key = VerificationKey::new();
        for v in &self.verification_pool {
            key.insert(&v.pair, v.answer);
        }
        key
    }
}

fn infeasible(msg: String) -> Error {
    Error::InfeasibleSchedule(msg)
}

/// Every unordered method pair on every clip, `views_per_pair` times, packed
/// into fixed-size sessions with verification pairs at random positions.
///
/// Each session carries `min(session_size - verification, N)` scored pairs
/// where N is the number of distinct (pair, clip) items. Consecutive windows
/// of one repeated permutation are used, so no session repeats an item. The
/// last session, or every session when N is small, is topped up with filler
/// pairs: unused study items first, then verification-pool pairs.
pub fn schedule_pairs(
    methods: &[String],
    clips: &[String],
    params: &ScheduleParams,
    verification_pool: &[VerificationPair],
) -> Result<SchedulePlan> {
    let distinct: BTreeSet<&String> = methods.iter().collect();
    if distinct.len() != methods.len() {
        return Err(infeasible("duplicate method ids".into()));
    }
    if methods.len() < 2 || clips.is_empty() {
        return Err(infeasible(format!("{} methods x {} clips gives no pairs", methods.len(), clips.len())));
    }
    if verification_pool.is_empty() {
        return Err(infeasible("verification pool is empty".into()));
    }
    if params.views_per_pair == 0 {
        return Err(infeasible("views_per_pair is 0".into()));
    }
    let v = params.verification_per_session;
    if params.session_size <= v {
        return Err(infeasible(format!(
            "session of {} slots minus {v} verification pairs leaves no scored slot",
            params.session_size
        )));
    }

    let mut sorted: Vec<&String> = methods.iter().collect();
    sorted.sort();
    let mut items = Vec::new();
    for clip in clips {
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                items.push(PairId::new(clip.clone(), sorted[i].clone(), sorted[j].clone())?);
            }
        }
    }
    let n = items.len();
    let s = (params.session_size - v).min(n);
    let total = n * params.views_per_pair;
    let sessions = total.div_ceil(s);
    log::info!(
        "{n} items x {} views = {total} scored assignments over {sessions} sessions of {s}",
        params.views_per_pair
    );

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    items.shuffle(&mut rng);
    let mut plans = Vec::with_capacity(sessions);
    for k in 0..sessions {
        let start = k * s;
        let end = (start + s).min(total);
        let mut content: Vec<Slot> = (start..end)
            .map(|t| Slot {
                kind: SlotKind::Scored,
                pair: items[t % n].clone(),
            })
            .collect();
        let used: BTreeSet<PairId> = content.iter().map(|c| c.pair.clone()).collect();

        let chosen: Vec<&VerificationPair> = if verification_pool.len() >= v {
            index::sample(&mut rng, verification_pool.len(), v)
                .into_iter()
                .map(|i| &verification_pool[i])
                .collect()
        } else {
            (0..v).map(|i| &verification_pool[i % verification_pool.len()]).collect()
        };

        let missing = params.session_size - v - content.len();
        if missing > 0 {
            let mut fillers: Vec<PairId> = (0..n)
                .map(|o| items[(end + o) % n].clone())
                .filter(|p| !used.contains(p))
                .take(missing)
                .collect();
            let chosen_ids: BTreeSet<&PairId> = chosen.iter().map(|c| &c.pair).collect();
            let mut pool_order: Vec<&VerificationPair> = verification_pool.iter().filter(|p| !chosen_ids.contains(&p.pair)).collect();
            pool_order.extend(verification_pool.iter().filter(|p| chosen_ids.contains(&p.pair)));
            let mut cursor = 0;
            while fillers.len() < missing {
                fillers.push(pool_order[cursor % pool_order.len()].pair.clone());
                cursor += 1;
            }
            if cursor > pool_order.len() {
                log::warn!("session {k}: filler pairs repeat; study is too small to fill {} slots", params.session_size);
            }
            content.extend(fillers.into_iter().map(|pair| Slot {
                kind: SlotKind::Filler,
                pair,
            }));
        }
        content.shuffle(&mut rng);
        for c in content.iter_mut() {
            if rng.random_bool(0.5) {
                c.pair = c.pair.swapped();
            }
        }

        let positions: BTreeSet<usize> = index::sample(&mut rng, params.session_size, v).into_iter().collect();
        let mut verif = chosen.into_iter();
        let mut rest = content.into_iter();
        let slots = (0..params.session_size)
            .map(|p| {
                if positions.contains(&p) {
                    let vp = verif.next().expect("v verification pairs");
                    Slot {
                        kind: SlotKind::Verification,
                        pair: vp.pair.clone(),
                    }
                } else {
                    rest.next().expect("session_size - v content slots")
                }
            })
            .collect();
        plans.push(SessionPlan { index: k, slots });
    }
    Ok(SchedulePlan {
        params: *params,
        scored_per_session: s,
        total_scored: total,
        sessions: plans,
        verification_pool: verification_pool.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn pool(n: usize) -> Vec<VerificationPair> {
        (0..n)
            .map(|i| VerificationPair {
                pair: PairId::new(format!("check{i}"), "pristine", "damaged").unwrap(),
                answer: Choice::A,
            })
            .collect()
    }

    fn check_plan(plan: &SchedulePlan, items: usize) {
        let p = plan.params;
        for s in &plan.sessions {
            assert_eq!(s.slots.len(), p.session_size);
            assert_eq!(s.count(SlotKind::Verification), p.verification_per_session);
            let scored: Vec<PairId> = s.slots.iter().filter(|x| x.kind == SlotKind::Scored).map(|x| x.pair.unordered()).collect();
            let distinct: BTreeSet<&PairId> = scored.iter().collect();
            assert_eq!(distinct.len(), scored.len());
        }
        let counts = plan.scored_counts();
        assert_eq!(counts.len(), items);
        assert!(counts.values().all(|&c| c == p.views_per_pair));
    }

    #[test]
    fn full_scale_counts() {
        let params = ScheduleParams::default();
        let plan = schedule_pairs(&names("m", 10), &names("clip", 3), &params, &pool(6)).unwrap();
        assert_eq!(plan.total_scored, 2025);
        assert_eq!(plan.sessions.len(), 93);
        assert_eq!(plan.scored_per_session, 22);
        check_plan(&plan, 135);
        // 2025 = 92 * 22 + 1
        assert_eq!(plan.sessions[92].count(SlotKind::Scored), 1);
        assert_eq!(plan.sessions[92].count(SlotKind::Filler), 21);
        let seen: BTreeSet<PairId> = plan.sessions[92].slots.iter().filter(|s| s.kind != SlotKind::Verification).map(|s| s.pair.unordered()).collect();
        assert_eq!(seen.len(), 22);
    }

    #[test]
    fn smallest_study() {
        let params = ScheduleParams {
            views_per_pair: 2,
            ..Default::default()
        };
        let plan = schedule_pairs(&names("m", 2), &names("c", 1), &params, &pool(4)).unwrap();
        assert_eq!(plan.sessions.len(), 2);
        check_plan(&plan, 1);
        for s in &plan.sessions {
            assert_eq!(s.count(SlotKind::Scored), 1);
            assert_eq!(s.count(SlotKind::Filler), 21);
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let params = ScheduleParams::default();
        let a = schedule_pairs(&names("m", 5), &names("c", 2), &params, &pool(3)).unwrap();
        let b = schedule_pairs(&names("m", 5), &names("c", 2), &params, &pool(3)).unwrap();
        assert_eq!(a, b);
        let c = schedule_pairs(&names("m", 5), &names("c", 2), &ScheduleParams { seed: 1, ..params }, &pool(3)).unwrap();
        assert_ne!(a, c);
        check_plan(&a, 20);
    }

    #[test]
    fn verification_positions_vary() {
        let plan = schedule_pairs(&names("m", 10), &names("c", 3), &ScheduleParams::default(), &pool(5)).unwrap();
        let firsts: BTreeSet<usize> = plan
            .sessions
            .iter()
            .map(|s| s.slots.iter().position(|x| x.kind == SlotKind::Verification).unwrap())
            .collect();
        assert!(firsts.len() > 3);
        let key = plan.verification_key();
        assert_eq!(key.len(), 5);
    }

    #[test]
    fn infeasible_inputs() {
        let p = ScheduleParams::default();
        let err = |r: Result<SchedulePlan>| matches!(r, Err(Error::InfeasibleSchedule(_)));
        assert!(err(schedule_pairs(&names("m", 3), &names("c", 1), &p, &[])));
        assert!(err(schedule_pairs(&names("m", 1), &names("c", 1), &p, &pool(3))));
        assert!(err(schedule_pairs(&names("m", 3), &[], &p, &pool(3))));
        assert!(err(schedule_pairs(&names("m", 3), &names("c", 1), &ScheduleParams { session_size: 3, ..p }, &pool(3))));
        assert!(err(schedule_pairs(&["a".into(), "a".into()], &names("c", 1), &p, &pool(3))));
    }
}
