//! Content-based recommendation: items are ranked by the cosine similarity
//! between their category profile and the user's.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::Profile;

/// Top-V recommendations for one user, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub user: String,
    pub entries: Vec<(String, f64)>,
    pub v: usize,
}

#[derive(Serialize)]
struct RankedLine<'a> {
    user: &'a str,
    items: Vec<&'a str>,
    scores: Vec<f64>,
}

impl RankedList {
    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(i, _)| i.as_str())
    }

    /// One JSON line: `{"user":…, "items":[…], "scores":[…]}`.
    pub fn to_json_line(&self) -> String {
        let line = RankedLine {
            user: &self.user,
            items: self.entries.iter().map(|(i, _)| i.as_str()).collect(),
            scores: self.entries.iter().map(|(_, s)| *s).collect(),
        };
        serde_json::to_string(&line).expect("ranked lists serialize")
    }
}

pub fn cosine_similarity(p: &Profile, q: &Profile) -> Result<f64> {
    p.ensure_compatible(q)?;
    Ok(cosine(p.components(), q.components()))
}

/// Cosine of two non-negative vectors, clamped to `[0, 1]`; zero if either
/// vector is zero.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
}

/// Score descending, then position ascending.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// A fixed set of candidate items, kept sorted by identifier so that ties in
/// score fall back to ascending identifier order.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    ids: Vec<String>,
    profiles: Vec<Option<Vec<f64>>>,
}

impl CandidatePool {
    /// Candidates without a profile (no training annotations) score zero.
    pub fn new(candidates: impl IntoIterator<Item = (String, Option<Profile>)>) -> Self {
        let mut all: Vec<(String, Option<Profile>)> = candidates.into_iter().collect();
        all.sort_by(|a, b| a.0.cmp(&b.0));
        all.dedup_by(|a, b| a.0 == b.0);
        let (ids, profiles) = all
            .into_iter()
            .map(|(id, p)| (id, p.map(|p| p.components().to_vec())))
            .unzip();
        Self { ids, profiles }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Top `v` `(position, score)` pairs for the given profile components.
    pub fn top(&self, user: &[f64], v: usize) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = self
            .profiles
            .iter()
            .enumerate()
            .map(|(k, q)| (k, q.as_deref().map_or(0.0, |q| cosine(user, q))))
            .collect();
        let keep = v.min(scored.len());
        if keep == 0 {
            return Vec::new();
        }
        if keep < scored.len() {
            scored.select_nth_unstable_by(keep - 1, rank_order);
            scored.truncate(keep);
        }
        scored.sort_unstable_by(rank_order);
        scored
    }

    pub fn rank(&self, user_id: &str, user: &Profile, v: usize) -> Result<RankedList> {
        if v == 0 {
            return Err(Error::Config("list length V must be positive".into()));
        }
        if let Some(len) = self.profiles.iter().flatten().map(Vec::len).next() {
            if len != user.len() {
                return Err(Error::CategoryMismatch);
            }
        }
        let entries = self
            .top(user.components(), v)
            .into_iter()
            .map(|(k, s)| (self.ids[k].clone(), s))
            .collect();
        Ok(RankedList {
            user: user_id.to_string(),
            entries,
            v,
        })
    }
}

/// Scores every candidate against `user_profile` and keeps the best `v`.
/// Ties are broken by ascending item identifier.
pub fn rank_items(
    user_id: &str,
    user_profile: &Profile,
    candidates: &[(String, Profile)],
    v: usize,
) -> Result<RankedList> {
    if v == 0 {
        return Err(Error::Config("list length V must be positive".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Validation("no candidate items to rank".into()));
    }
    for (_, q) in candidates {
        user_profile.ensure_compatible(q)?;
    }
    let pool = CandidatePool::new(candidates.iter().map(|(id, p)| (id.clone(), Some(p.clone()))));
    pool.rank(user_id, user_profile, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folksonomy::CategorySet;
    use std::sync::Arc;

    fn cats(n: usize) -> Arc<CategorySet> {
        Arc::new(CategorySet::new((0..n).map(|i| format!("c{i}"))).unwrap())
    }

    #[test]
    fn cosine_examples() {
        let c = cats(2);
        let a = Profile::new(c.clone(), vec![1.0, 0.0]).unwrap();
        let b = Profile::new(c.clone(), vec![0.0, 1.0]).unwrap();
        let h = Profile::uniform(c.clone());
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        assert!((cosine_similarity(&a, &h).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(cosine_similarity(&a, &Profile::uniform(cats(3))).is_err());
    }

    #[test]
    fn ranking_basics() {
        let c = cats(2);
        let u = Profile::new(c.clone(), vec![1.0, 0.0]).unwrap();
        let list = rank_items("u", &u, &[("x".into(), u.clone())], 5).unwrap();
        assert_eq!(list.entries, vec![("x".to_string(), 1.0)]);

        let other = Profile::new(c.clone(), vec![0.0, 1.0]).unwrap();
        let list = rank_items("u", &u, &[("a".into(), other), ("b".into(), u.clone())], 2).unwrap();
        assert_eq!(list.items().collect::<Vec<_>>(), ["b", "a"]);

        assert!(rank_items("u", &u, &[("a".into(), u.clone())], 0).is_err());
        assert!(rank_items("u", &u, &[], 3).is_err());
    }

    #[test]
    fn ties_break_by_identifier() {
        let c = cats(2);
        let u = Profile::uniform(c.clone());
        let cands: Vec<(String, Profile)> = ["d", "b", "c", "a"]
            .iter()
            .map(|id| (id.to_string(), u.clone()))
            .collect();
        let list = rank_items("u", &u, &cands, 3).unwrap();
        assert_eq!(list.items().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn unprofiled_candidates_score_zero() {
        let c = cats(2);
        let u = Profile::new(c.clone(), vec![0.0, 1.0]).unwrap();
        let pool = CandidatePool::new(vec![
            ("a".to_string(), None),
            ("b".to_string(), Some(Profile::new(c.clone(), vec![1.0, 0.0]).unwrap())),
            ("c".to_string(), Some(Profile::uniform(c))),
        ]);
        let list = pool.rank("u", &u, 3).unwrap();
        assert_eq!(list.items().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert_eq!(list.entries[1].1, 0.0);
    }

    #[test]
    fn json_line_shape() {
        let list = RankedList {
            user: "u1".into(),
            entries: vec![("i2".into(), 1.0), ("i1".into(), 0.5)],
            v: 2,
        };
        assert_eq!(
            list.to_json_line(),
            r#"{"user":"u1","items":["i2","i1"],"scores":[1.0,0.5]}"#
        );
    }
}
