//! The fish-bone diagram model: head (topic), joints (task clusters), one
//! backbone per issue side, fine-bones (theme clusters) and child-bones
//! (same-paper links to the opposite issue side).

mod build;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::IssueLabel;
use crate::cluster::ClusterError;
use crate::embedding::EmbedError;
use crate::summarizer::{SummarizerError, SUMMARY_WORD_LIMIT, THEME_WORD_LIMIT};

pub use build::{
    assemble, build_fishbone, cluster_plan, BuildConfig, ClusterPlan, GroupPlan, SidePlan, TaskK, TaskPlan,
};

#[derive(Debug, Error)]
pub enum FishboneError {
    #[error("a bird's-eye view needs at least 2 papers, got {0}")]
    TooFewPapers(usize),
    #[error("paper {0} has no sentences")]
    EmptyPaper(String),
    #[error("paper {0} appears more than once")]
    DuplicatePaper(String),
    #[error("sentence {index} is filed under paper {expected} but names paper {found}")]
    InconsistentInput {
        expected: String,
        found: String,
        index: usize,
    },
    #[error("topic must not be empty")]
    EmptyTopic,
    #[error("invalid build parameter: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Summarizer(#[from] SummarizerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub paper_id: String,
    pub index: usize,
    pub label: IssueLabel,
    pub text: String,
}

/// Classifier output for one paper, sentences in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPaper {
    pub paper_id: String,
    pub sentences: Vec<SentenceRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkDirection {
    ImprovableToEmphasize,
    EmphasizeToImprovable,
}

impl LinkDirection {
    pub fn from_source(label: IssueLabel) -> Option<Self> {
        match label {
            IssueLabel::Improvable => Some(LinkDirection::ImprovableToEmphasize),
            IssueLabel::Emphasize => Some(LinkDirection::EmphasizeToImprovable),
            IssueLabel::Others => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildBone {
    pub child_id: String,
    pub source_fine_bone_id: String,
    pub paper_id: String,
    pub direction: LinkDirection,
    /// Opposite-label sentences of `paper_id`. Empty when the paper has none.
    pub linked_sentences: Vec<SentenceRef>,
    /// Opposite fine-bone holding most of the linked sentences.
    pub target_fine_bone_id: Option<String>,
    /// Empty exactly when there are no linked sentences.
    pub summary: String,
}

impl ChildBone {
    pub fn is_linked(&self) -> bool {
        !self.linked_sentences.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineBone {
    pub fine_bone_id: String,
    pub theme: String,
    pub member_sentences: Vec<SentenceRef>,
    pub child_bones: Vec<ChildBone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub label: IssueLabel,
    /// Set when the joint has no sentence of this label.
    pub bare: bool,
    pub fine_bones: Vec<FineBone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub joint_id: String,
    pub task_name: String,
    pub member_paper_ids: Vec<String>,
    pub backbones: Vec<Backbone>,
}

impl Joint {
    pub fn backbone(&self, label: IssueLabel) -> Option<&Backbone> {
        self.backbones.iter().find(|b| b.label == label)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub prelude_k: usize,
    pub task_k: usize,
    pub fine_bone_n: usize,
    pub embedding_provider: String,
    pub summarizer_provider: String,
    #[serde(default)]
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FishboneDiagram {
    pub head: String,
    pub joints: Vec<Joint>,
    pub provenance: Provenance,
}

impl FishboneDiagram {
    pub fn fine_bones(&self) -> impl Iterator<Item = (&Joint, &Backbone, &FineBone)> {
        self.joints.iter().flat_map(|j| {
            j.backbones
                .iter()
                .flat_map(move |b| b.fine_bones.iter().map(move |f| (j, b, f)))
        })
    }

    pub fn child_bones(&self) -> impl Iterator<Item = &ChildBone> {
        self.fine_bones().flat_map(|(_, _, f)| f.child_bones.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Id of the offending element (`head` for diagram-level problems).
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Checks every structural invariant. An empty list means valid.
pub fn validate(d: &FishboneDiagram) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |element: &str, message: String| {
        out.push(Violation {
            element: element.to_string(),
            message,
        })
    };

    if d.head.trim().is_empty() {
        flag("head", "topic is empty".into());
    }
    if d.joints.is_empty() {
        flag("head", "diagram has no joints".into());
    }

    let mut ids: HashSet<&str> = HashSet::new();
    let mut paper_joint: HashMap<&str, &str> = HashMap::new();
    let mut placed: HashSet<(&str, usize)> = HashSet::new();

    for j in &d.joints {
        let jid = j.joint_id.as_str();
        if !ids.insert(jid) {
            flag(jid, "duplicate id".into());
        }
        if j.task_name.trim().is_empty() || word_count(&j.task_name) > THEME_WORD_LIMIT {
            flag(
                jid,
                format!("task name {:?} must have 1 to {THEME_WORD_LIMIT} words", j.task_name),
            );
        }
        if j.member_paper_ids.is_empty() {
            flag(jid, "joint has no member papers".into());
        }
        for p in &j.member_paper_ids {
            if let Some(prev) = paper_joint.insert(p, jid) {
                flag(jid, format!("paper {p} also belongs to {prev}"));
            }
        }
        let members: HashSet<&str> = j.member_paper_ids.iter().map(String::as_str).collect();

        let count = |l: IssueLabel| j.backbones.iter().filter(|b| b.label == l).count();
        if j.backbones.len() != 2 || count(IssueLabel::Emphasize) != 1 || count(IssueLabel::Improvable) != 1 {
            flag(jid, "needs exactly one Emphasize and one Improvable backbone".into());
        }

        // Every member sentence of the joint, for resolving child-bone links.
        let mut by_ref: HashMap<(&str, usize), (&SentenceRef, &str)> = HashMap::new();
        for b in &j.backbones {
            for f in &b.fine_bones {
                for s in &f.member_sentences {
                    by_ref.insert((s.paper_id.as_str(), s.index), (s, f.fine_bone_id.as_str()));
                }
            }
        }

        for b in &j.backbones {
            if b.label == IssueLabel::Others {
                flag(jid, "Others backbone is not allowed".into());
            }
            if b.bare != b.fine_bones.is_empty() {
                flag(
                    jid,
                    format!("{} backbone bare flag disagrees with its fine-bones", b.label),
                );
            }
            let mut themes: HashSet<String> = HashSet::new();
            for f in &b.fine_bones {
                let fid = f.fine_bone_id.as_str();
                if !ids.insert(fid) {
                    flag(fid, "duplicate id".into());
                }
                if f.theme.trim().is_empty() || word_count(&f.theme) > THEME_WORD_LIMIT {
                    flag(
                        fid,
                        format!("theme {:?} must have 1 to {THEME_WORD_LIMIT} words", f.theme),
                    );
                }
                if !themes.insert(f.theme.to_lowercase()) {
                    flag(fid, format!("theme {:?} repeats within the backbone", f.theme));
                }
                if f.member_sentences.is_empty() {
                    flag(fid, "fine-bone has no member sentences".into());
                }
                for s in &f.member_sentences {
                    if s.label != b.label {
                        flag(
                            fid,
                            format!(
                                "sentence {}#{} is {} on a {} backbone",
                                s.paper_id, s.index, s.label, b.label
                            ),
                        );
                    }
                    if !members.contains(s.paper_id.as_str()) {
                        flag(fid, format!("sentence from non-member paper {}", s.paper_id));
                    }
                    if !placed.insert((s.paper_id.as_str(), s.index)) {
                        flag(fid, format!("sentence {}#{} is placed twice", s.paper_id, s.index));
                    }
                }
                for c in &f.child_bones {
                    check_child(c, f, b.label, &by_ref, &mut ids, &mut flag);
                }
            }
        }
    }
    out
}

fn check_child<'a>(
    c: &'a ChildBone,
    f: &FineBone,
    label: IssueLabel,
    by_ref: &HashMap<(&str, usize), (&SentenceRef, &str)>,
    ids: &mut HashSet<&'a str>,
    flag: &mut impl FnMut(&str, String),
) {
    let cid = c.child_id.as_str();
    if !ids.insert(cid) {
        flag(cid, "duplicate id".into());
    }
    if c.source_fine_bone_id != f.fine_bone_id {
        flag(
            cid,
            format!("source {} is not the enclosing fine-bone", c.source_fine_bone_id),
        );
    }
    if Some(c.direction) != LinkDirection::from_source(label) {
        flag(cid, format!("direction {:?} does not start at {label}", c.direction));
    }
    if !f.member_sentences.iter().any(|s| s.paper_id == c.paper_id) {
        flag(cid, format!("fine-bone has no sentence from paper {}", c.paper_id));
    }
    let strays: Vec<&str> = c
        .linked_sentences
        .iter()
        .filter(|s| s.paper_id != c.paper_id)
        .map(|s| s.paper_id.as_str())
        .collect();
    if !strays.is_empty() {
        flag(cid, format!("links sentences from other papers: {}", strays.join(", ")));
    }
    let opposite = label.opposite();
    for s in c.linked_sentences.iter().filter(|s| s.paper_id == c.paper_id) {
        if Some(s.label) != opposite {
            flag(
                cid,
                format!("linked sentence {}#{} has label {}", s.paper_id, s.index, s.label),
            );
        }
        match by_ref.get(&(s.paper_id.as_str(), s.index)) {
            Some((r, _)) if *r == s => {}
            _ => flag(
                cid,
                format!("linked sentence {}#{} does not resolve", s.paper_id, s.index),
            ),
        }
    }
    if c.summary.is_empty() == c.is_linked() {
        flag(cid, "summary must be empty exactly when nothing is linked".into());
    }
    if word_count(&c.summary) > SUMMARY_WORD_LIMIT {
        flag(cid, format!("summary exceeds {SUMMARY_WORD_LIMIT} words"));
    }
    match &c.target_fine_bone_id {
        None if c.is_linked() => flag(cid, "linked child-bone has no target fine-bone".into()),
        Some(t) if !c.is_linked() => flag(cid, format!("unlinked child-bone targets {t}")),
        Some(t) if !by_ref.values().any(|(r, fid)| fid == t && Some(r.label) == opposite) => {
            flag(cid, format!("target fine-bone {t} is not on the opposite backbone"))
        }
        _ => {}
    }
}
