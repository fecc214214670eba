//! Threshold-based dual annotation with third-reviewer dispute resolution.
//!
//! Each post is scored 0..=10 by two primary annotators. A score becomes a
//! binary label via `score >= theta`. Agreeing labels resolve the post by
//! consensus; disagreeing labels put it in the `Disputed` state, where a third
//! reviewer's thresholded score becomes final.
//!
//! [`AnnotationRecord::apply`] is the state machine; [`annotate_labels_batch`]
//! is the same rule as a plain function over score triples.

mod service;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use service::{router, serve};
pub use store::{AnnotationStore, ScoreEvent};

pub const SCORE_MIN: u8 = 0;
pub const SCORE_MAX: u8 = 10;
pub const DEFAULT_THETA: u8 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationConfig {
    pub theta: u8,
}

impl AnnotationConfig {
    pub fn new(theta: u8) -> Result<Self> {
        if theta > SCORE_MAX {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in {SCORE_MIN}..={SCORE_MAX}, got {theta}"
            )));
        }
        Ok(AnnotationConfig { theta })
    }

    pub fn label(&self, score: u8) -> bool {
        score >= self.theta
    }
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Primary1,
    Primary2,
    ThirdReviewer,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Primary1, Role::Primary2, Role::ThirdReviewer];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Primary1 => "Primary1",
            Role::Primary2 => "Primary2",
            Role::ThirdReviewer => "ThirdReviewer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown role {s:?} (expected Primary1, Primary2 or ThirdReviewer)"
                ))
            })
    }
}

/// An annotator. Identity is role-based: the store only looks at `role`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorId {
    pub id: String,
    pub role: Role,
}

impl AnnotatorId {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        AnnotatorId { id: id.into(), role }
    }
}

impl From<&AnnotatorId> for Role {
    fn from(a: &AnnotatorId) -> Role {
        a.role
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordState {
    PendingFirst,
    PendingSecond,
    Disputed,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResolvedBy {
    Consensus,
    ThirdReviewer,
    #[serde(rename = "None")]
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub post_id: String,
    pub score1: Option<u8>,
    pub score2: Option<u8>,
    pub score3: Option<u8>,
    pub label1: Option<bool>,
    pub label2: Option<bool>,
    pub final_label: Option<bool>,
    pub state: RecordState,
    pub resolved_by: ResolvedBy,
}

pub fn check_score(score: i64) -> Result<u8> {
    if (i64::from(SCORE_MIN)..=i64::from(SCORE_MAX)).contains(&score) {
        Ok(score as u8)
    } else {
        Err(Error::ScoreOutOfRange(score))
    }
}

impl AnnotationRecord {
    pub fn new(post_id: impl Into<String>) -> Self {
        AnnotationRecord {
            post_id: post_id.into(),
            score1: None,
            score2: None,
            score3: None,
            label1: None,
            label2: None,
            final_label: None,
            state: RecordState::PendingFirst,
            resolved_by: ResolvedBy::Unresolved,
        }
    }

    /// The record as `role` may see it. Until the post is resolved each
    /// primary sees only their own score, and the third reviewer sees only
    /// the state, not the primaries' scores.
    pub fn view_for(&self, role: Role) -> AnnotationRecord {
        let mut view = self.clone();
        if self.state != RecordState::Resolved {
            if role != Role::Primary1 {
                (view.score1, view.label1) = (None, None);
            }
            if role != Role::Primary2 {
                (view.score2, view.label2) = (None, None);
            }
        }
        view
    }

    /// True when `role` currently has something to score on this record.
    pub fn awaits(&self, role: Role) -> bool {
        match role {
            Role::Primary1 => self.score1.is_none(),
            Role::Primary2 => self.score2.is_none(),
            Role::ThirdReviewer => self.state == RecordState::Disputed,
        }
    }

    /// Records `score` in the slot owned by `role` and advances the state.
    /// On error the record is left untouched.
    pub fn apply(&mut self, role: Role, score: i64, config: &AnnotationConfig) -> Result<()> {
        let score = check_score(score)?;
        let label = config.label(score);
        match role {
            Role::Primary1 | Role::Primary2 => {
                let (slot, lab) = if role == Role::Primary1 {
                    (&mut self.score1, &mut self.label1)
                } else {
                    (&mut self.score2, &mut self.label2)
                };
                if slot.is_some() {
                    return Err(Error::DoubleSubmission {
                        post_id: self.post_id.clone(),
                        role: role.to_string(),
                    });
                }
                *slot = Some(score);
                *lab = Some(label);
                match (self.label1, self.label2) {
                    (Some(a), Some(b)) if a == b => {
                        self.final_label = Some(a);
                        self.state = RecordState::Resolved;
                        self.resolved_by = ResolvedBy::Consensus;
                    }
                    (Some(_), Some(_)) => self.state = RecordState::Disputed,
                    _ => self.state = RecordState::PendingSecond,
                }
            }
            Role::ThirdReviewer => {
                if self.score3.is_some() {
                    return Err(Error::DoubleSubmission {
                        post_id: self.post_id.clone(),
                        role: role.to_string(),
                    });
                }
                if self.state != RecordState::Disputed {
                    return Err(Error::WrongState {
                        post_id: self.post_id.clone(),
                        message: format!("third review requires a disputed record, state is {:?}", self.state),
                    });
                }
                self.score3 = Some(score);
                self.final_label = Some(label);
                self.state = RecordState::Resolved;
                self.resolved_by = ResolvedBy::ThirdReviewer;
            }
        }
        Ok(())
    }

    /// Checks the record invariants against `config`.
    pub fn is_consistent(&self, config: &AnnotationConfig) -> bool {
        let slot_ok = |s: Option<u8>, l: Option<bool>| match (s, l) {
            (Some(s), Some(l)) => l == config.label(s),
            (None, None) => true,
            _ => false,
        };
        if !slot_ok(self.score1, self.label1) || !slot_ok(self.score2, self.label2) {
            return false;
        }
        let state_ok = match self.state {
            RecordState::PendingFirst => self.score1.is_none() && self.score2.is_none(),
            RecordState::PendingSecond => self.score1.is_some() != self.score2.is_some(),
            RecordState::Disputed => {
                self.label1.is_some() && self.label2.is_some() && self.label1 != self.label2
            }
            RecordState::Resolved => self.final_label.is_some(),
        };
        let resolution_ok = match self.resolved_by {
            ResolvedBy::ThirdReviewer => {
                self.score3.map(|s| config.label(s)) == self.final_label && self.final_label.is_some()
            }
            ResolvedBy::Consensus => {
                self.final_label.is_some()
                    && self.final_label == self.label1
                    && self.label1 == self.label2
            }
            ResolvedBy::Unresolved => self.final_label.is_none(),
        };
        state_ok && resolution_ok
    }
}

/// Storage-free form of the labeling loop: consensus gives the shared label,
/// a dispute with a third score gives that score's label, and a dispute
/// without one gives `None`.
pub fn annotate_labels_batch(
    scores: &[(i64, i64, Option<i64>)],
    config: &AnnotationConfig,
) -> Result<Vec<Option<bool>>> {
    scores
        .iter()
        .map(|&(s1, s2, s3)| {
            let l1 = config.label(check_score(s1)?);
            let l2 = config.label(check_score(s2)?);
            let s3 = s3.map(check_score).transpose()?;
            Ok(if l1 == l2 {
                Some(l1)
            } else {
                s3.map(|s| config.label(s))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(scores: &[(Role, i64)], theta: u8) -> Result<AnnotationRecord> {
        let cfg = AnnotationConfig::new(theta).unwrap();
        let mut r = AnnotationRecord::new("p");
        for &(role, s) in scores {
            r.apply(role, s, &cfg)?;
        }
        Ok(r)
    }

    #[test]
    fn consensus_positive() {
        let r = drive(&[(Role::Primary1, 7), (Role::Primary2, 9)], 6).unwrap();
        assert_eq!(r.state, RecordState::Resolved);
        assert_eq!(r.final_label, Some(true));
        assert_eq!(r.resolved_by, ResolvedBy::Consensus);
    }

    #[test]
    fn disagreement_disputes_then_third_resolves() {
        let r = drive(&[(Role::Primary1, 7), (Role::Primary2, 3)], 6).unwrap();
        assert_eq!(r.state, RecordState::Disputed);
        assert_eq!(r.final_label, None);
        let r = drive(&[(Role::Primary1, 7), (Role::Primary2, 3), (Role::ThirdReviewer, 6)], 6).unwrap();
        assert_eq!(r.state, RecordState::Resolved);
        assert_eq!(r.final_label, Some(true));
        assert_eq!(r.resolved_by, ResolvedBy::ThirdReviewer);
    }

    #[test]
    fn consensus_negative() {
        let r = drive(&[(Role::Primary1, 5), (Role::Primary2, 5)], 6).unwrap();
        assert_eq!(r.final_label, Some(false));
        assert_eq!(r.resolved_by, ResolvedBy::Consensus);
    }

    #[test]
    fn either_primary_may_go_first() {
        let r = drive(&[(Role::Primary2, 1)], 6).unwrap();
        assert_eq!(r.state, RecordState::PendingSecond);
        assert!(r.awaits(Role::Primary1));
        assert!(!r.awaits(Role::Primary2));
    }

    #[test]
    fn rejects_bad_submissions() {
        assert!(matches!(drive(&[(Role::Primary1, 11)], 6), Err(Error::ScoreOutOfRange(11))));
        assert!(matches!(drive(&[(Role::Primary1, -1)], 6), Err(Error::ScoreOutOfRange(-1))));
        assert!(matches!(
            drive(&[(Role::Primary1, 1), (Role::Primary1, 2)], 6),
            Err(Error::DoubleSubmission { .. })
        ));
        assert!(matches!(
            drive(&[(Role::Primary1, 9), (Role::Primary2, 9), (Role::ThirdReviewer, 2)], 6),
            Err(Error::WrongState { .. })
        ));
        assert!(matches!(drive(&[(Role::ThirdReviewer, 2)], 6), Err(Error::WrongState { .. })));
        assert!(matches!(
            drive(&[(Role::Primary1, 9), (Role::Primary2, 1), (Role::ThirdReviewer, 2), (Role::ThirdReviewer, 3)], 6),
            Err(Error::DoubleSubmission { .. })
        ));
    }

    #[test]
    fn failed_apply_leaves_record_unchanged() {
        let mut r = drive(&[(Role::Primary1, 4)], 6).unwrap();
        let before = r.clone();
        assert!(r.apply(Role::Primary1, 5, &AnnotationConfig::default()).is_err());
        assert_eq!(r, before);
    }

    #[test]
    fn batch_examples() {
        let cfg = AnnotationConfig::default();
        let out = annotate_labels_batch(&[(10, 10, None), (6, 6, None), (6, 2, Some(5)), (6, 2, None)], &cfg)
            .unwrap();
        assert_eq!(out, vec![Some(true), Some(true), Some(false), None]);
        assert!(annotate_labels_batch(&[(11, 0, None)], &cfg).is_err());
        assert!(annotate_labels_batch(&[(1, 0, Some(-3))], &cfg).is_err());
    }

    #[test]
    fn theta_must_be_in_range() {
        assert!(AnnotationConfig::new(11).is_err());
        assert_eq!(AnnotationConfig::default().theta, 6);
    }

    #[test]
    fn primaries_do_not_see_each_other_before_resolution() {
        let c = AnnotationConfig::default();
        let mut r = AnnotationRecord::new("p");
        r.apply(Role::Primary1, 7, &c).unwrap();
        r.apply(Role::Primary2, 3, &c).unwrap();
        let v = r.view_for(Role::Primary2);
        assert_eq!((v.score1, v.label1, v.score2), (None, None, Some(3)));
        let v = r.view_for(Role::Primary1);
        assert_eq!((v.score1, v.score2, v.label2), (Some(7), None, None));
        let v = r.view_for(Role::ThirdReviewer);
        assert_eq!((v.score1, v.score2, v.state), (None, None, RecordState::Disputed));
        r.apply(Role::ThirdReviewer, 6, &c).unwrap();
        assert_eq!(r.view_for(Role::Primary1), r);
    }

    #[test]
    fn role_parsing() {
        assert_eq!("primary2".parse::<Role>().unwrap(), Role::Primary2);
        assert!("Reviewer".parse::<Role>().is_err());
    }

    #[test]
    fn resolved_by_serializes_none_literal() {
        let r = AnnotationRecord::new("x");
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["resolved_by"], "None");
        assert_eq!(v["state"], "PendingFirst");
    }
}
