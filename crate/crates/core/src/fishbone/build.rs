use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{
    Backbone, ChildBone, ClassifiedPaper, FineBone, FishboneDiagram, FishboneError, Joint, LinkDirection, Provenance,
    SentenceRef,
};
use crate::classifier::IssueLabel;
use crate::cluster::{choose_k, kmeans, ClusterConfig};
use crate::embedding::{EmbeddingProvider, EmbeddingVector};
use crate::scalar::cosine;
use crate::summarizer::Summarizer;

/// Sides in the order they appear under each joint.
const SIDES: [IssueLabel; 2] = [IssueLabel::Emphasize, IssueLabel::Improvable];

/// Number of task clusters: fixed, or chosen by silhouette over a range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskK {
    Fixed(usize),
    Range { min: usize, max: usize },
}

fn default_prelude_k() -> usize {
    2
}
fn default_n_init() -> usize {
    10
}
fn default_max_iterations() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    #[serde(default = "default_prelude_k")]
    pub prelude_k: usize,
    pub task_k: TaskK,
    pub fine_bone_n: usize,
    pub seed: u64,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl BuildConfig {
    pub fn new(task_k: TaskK, fine_bone_n: usize, seed: u64) -> Self {
        Self {
            prelude_k: default_prelude_k(),
            task_k,
            fine_bone_n,
            seed,
            n_init: default_n_init(),
            max_iterations: default_max_iterations(),
        }
    }

    fn cluster_config(&self, k: usize) -> ClusterConfig {
        ClusterConfig {
            max_iterations: self.max_iterations,
            n_init: self.n_init,
            ..ClusterConfig::new(k, self.seed)
        }
    }

    fn validate(&self) -> Result<(), FishboneError> {
        let bad = |m: &str| Err(FishboneError::InvalidConfig(m.into()));
        if self.prelude_k == 0 {
            return bad("prelude_k must be at least 1");
        }
        if self.fine_bone_n == 0 {
            return bad("fine_bone_n must be at least 1");
        }
        if self.n_init == 0 {
            return bad("n_init must be at least 1");
        }
        match self.task_k {
            TaskK::Fixed(0) => bad("task_k must be at least 1"),
            TaskK::Range { min, max } if min < 2 || max < min => bad("task_k range needs 2 <= min <= max"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub fine_bone_id: String,
    pub members: Vec<SentenceRef>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidePlan {
    pub label: IssueLabel,
    pub groups: Vec<GroupPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub joint_id: String,
    pub member_paper_ids: Vec<String>,
    pub prelude_texts: Vec<String>,
    pub sides: Vec<SidePlan>,
}

/// Output of the clustering stage: joints and fine-bone groups, not yet
/// named or linked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub config: BuildConfig,
    pub task_k: usize,
    /// `(k, mean silhouette)` when k was chosen from a range.
    pub silhouette: Vec<(usize, f64)>,
    pub embedding_provider: String,
    pub tasks: Vec<TaskPlan>,
    pub warnings: Vec<String>,
}

fn check_input(papers: &[ClassifiedPaper]) -> Result<(), FishboneError> {
    if papers.len() < 2 {
        return Err(FishboneError::TooFewPapers(papers.len()));
    }
    let mut seen = HashSet::new();
    for p in papers {
        if !seen.insert(p.paper_id.as_str()) {
            return Err(FishboneError::DuplicatePaper(p.paper_id.clone()));
        }
        if p.sentences.is_empty() {
            return Err(FishboneError::EmptyPaper(p.paper_id.clone()));
        }
        if let Some(s) = p.sentences.iter().find(|s| s.paper_id != p.paper_id) {
            return Err(FishboneError::InconsistentInput {
                expected: p.paper_id.clone(),
                found: s.paper_id.clone(),
                index: s.index,
            });
        }
    }
    Ok(())
}

/// Groups of indices ordered by their smallest member.
fn ordered_groups(members: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = members.into_iter().filter(|g| !g.is_empty()).collect();
    groups.sort_by_key(|g| g[0]);
    groups
}

fn side_letter(label: IssueLabel) -> &'static str {
    match label {
        IssueLabel::Emphasize => "E",
        IssueLabel::Improvable => "I",
        IssueLabel::Others => "O",
    }
}

fn mean_point(points: &[&Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; points[0].len()];
    for p in points {
        for (a, v) in acc.iter_mut().zip(p.iter()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= points.len() as f64);
    acc
}

fn choose_task_k(
    points: &[Vec<f64>],
    cfg: &BuildConfig,
    warnings: &mut Vec<String>,
) -> Result<(usize, Vec<(usize, f64)>), FishboneError> {
    let n = points.len();
    match cfg.task_k {
        TaskK::Fixed(k) if k > n => {
            warnings.push(format!("task_k = {k} exceeds the {n} papers; using {n}"));
            Ok((n, Vec::new()))
        }
        TaskK::Fixed(k) => Ok((k, Vec::new())),
        TaskK::Range { min, max } => {
            let hi = max.min(n.saturating_sub(1));
            if n < 3 || min > hi {
                let k = min.min(n);
                warnings.push(format!(
                    "task_k range {min}..={max} does not fit {n} papers; using k = {k}"
                ));
                return Ok((k, Vec::new()));
            }
            let chosen = choose_k(points, (min, hi), &cfg.cluster_config(min))?;
            warnings.extend(chosen.warning);
            Ok((chosen.k, chosen.scores))
        }
    }
}

/// Embeds preludes and issue sentences, clusters papers into tasks and each
/// task's Emphasize and Improvable sentences into fine-bone groups.
pub fn cluster_plan(
    papers: &[ClassifiedPaper],
    embedder: &dyn EmbeddingProvider,
    cfg: &BuildConfig,
) -> Result<ClusterPlan, FishboneError> {
    cfg.validate()?;
    check_input(papers)?;
    let mut warnings = Vec::new();

    let texts: Vec<&str> = papers
        .iter()
        .flat_map(|p| p.sentences.iter().map(|s| s.text.as_str()))
        .collect();
    let vectors = embedder.embed_batch(&texts)?;
    let mut vectors = vectors.into_iter();
    let per_paper: Vec<Vec<EmbeddingVector>> = papers
        .iter()
        .map(|p| vectors.by_ref().take(p.sentences.len()).collect())
        .collect();

    let mut preludes = Vec::with_capacity(papers.len());
    for (p, vs) in papers.iter().zip(&per_paper) {
        if p.sentences.len() < cfg.prelude_k {
            warnings.push(format!(
                "paper {} has {} sentence(s); prelude uses all of them",
                p.paper_id,
                p.sentences.len()
            ));
        }
        let take = cfg.prelude_k.min(vs.len());
        let mean = EmbeddingVector::mean(&vs[..take]).expect("non-empty paper");
        preludes.push(mean.to_scalars::<f64>());
    }

    let (task_k, silhouette) = choose_task_k(&preludes, cfg, &mut warnings)?;
    let task_clusters = kmeans(&preludes, &cfg.cluster_config(task_k))?;

    let mut tasks = Vec::new();
    for (j, paper_idx) in ordered_groups(task_clusters.members()).into_iter().enumerate() {
        let joint_id = format!("J{j}");
        let prelude_texts = paper_idx
            .iter()
            .flat_map(|&i| papers[i].sentences.iter().take(cfg.prelude_k).map(|s| s.text.clone()))
            .collect();

        let mut sides = Vec::new();
        for label in SIDES {
            let mut members: Vec<(&SentenceRef, Vec<f64>)> = Vec::new();
            for &i in &paper_idx {
                for (s, v) in papers[i].sentences.iter().zip(&per_paper[i]) {
                    if s.label == label {
                        members.push((s, v.to_scalars::<f64>()));
                    }
                }
            }
            let mut groups = Vec::new();
            if !members.is_empty() {
                let points: Vec<Vec<f64>> = members.iter().map(|(_, v)| v.clone()).collect();
                let k = cfg.fine_bone_n.min(points.len());
                let result = kmeans(&points, &cfg.cluster_config(k))?;
                for (g, idx) in ordered_groups(result.members()).into_iter().enumerate() {
                    let pts: Vec<&Vec<f64>> = idx.iter().map(|&i| &points[i]).collect();
                    groups.push(GroupPlan {
                        fine_bone_id: format!("{joint_id}-{}{g}", side_letter(label)),
                        members: idx.iter().map(|&i| members[i].0.clone()).collect(),
                        centroid: mean_point(&pts),
                    });
                }
            }
            sides.push(SidePlan { label, groups });
        }

        tasks.push(TaskPlan {
            joint_id,
            member_paper_ids: paper_idx.iter().map(|&i| papers[i].paper_id.clone()).collect(),
            prelude_texts,
            sides,
        });
    }

    Ok(ClusterPlan {
        config: cfg.clone(),
        task_k,
        silhouette,
        embedding_provider: embedder.provider_id().to_string(),
        tasks,
        warnings,
    })
}

/// Greedy one-to-one matching of themes to groups by cosine similarity
/// between the embedded theme and the group centroid. Returns the theme
/// index for each group.
fn match_themes(centroids: &[&Vec<f64>], themes: &[Vec<f64>]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (g, c) in centroids.iter().enumerate() {
        for (t, v) in themes.iter().enumerate() {
            pairs.push((cosine(c, v), g, t));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; centroids.len()];
    let mut used = vec![false; themes.len()];
    for (_, g, t) in pairs {
        if out[g] == usize::MAX && !used[t] {
            out[g] = t;
            used[t] = true;
        }
    }
    out
}

struct PendingChild {
    joint: usize,
    side: usize,
    group: usize,
    bone: ChildBone,
}

/// Names tasks and fine-bones, links child-bones and summarizes them.
pub fn assemble(
    topic: &str,
    plan: &ClusterPlan,
    summarizer: &Summarizer,
    embedder: &dyn EmbeddingProvider,
) -> Result<FishboneDiagram, FishboneError> {
    if topic.trim().is_empty() {
        return Err(FishboneError::EmptyTopic);
    }

    let mut joints = Vec::with_capacity(plan.tasks.len());
    let mut pending: Vec<PendingChild> = Vec::new();

    for (ji, task) in plan.tasks.iter().enumerate() {
        let task_name = summarizer.name_task(&task.prelude_texts)?;
        let mut backbones = Vec::new();

        for (si, side) in task.sides.iter().enumerate() {
            let mut fine_bones = Vec::new();
            if !side.groups.is_empty() {
                let texts: Vec<&str> = side
                    .groups
                    .iter()
                    .flat_map(|g| g.members.iter().map(|s| s.text.as_str()))
                    .collect();
                let themes = summarizer.name_themes(&texts, side.groups.len())?;
                let theme_refs: Vec<&str> = themes.iter().map(String::as_str).collect();
                let theme_vecs: Vec<Vec<f64>> = embedder
                    .embed_batch(&theme_refs)?
                    .iter()
                    .map(|v| v.to_scalars::<f64>())
                    .collect();
                let centroids: Vec<&Vec<f64>> = side.groups.iter().map(|g| &g.centroid).collect();
                let assignment = match_themes(&centroids, &theme_vecs);

                let opposite = side.label.opposite().expect("issue sides have opposites");
                let opposite_side = task.sides.iter().find(|s| s.label == opposite);

                for (gi, group) in side.groups.iter().enumerate() {
                    let mut papers: Vec<&str> = Vec::new();
                    for s in &group.members {
                        if !papers.contains(&s.paper_id.as_str()) {
                            papers.push(&s.paper_id);
                        }
                    }
                    for (ci, paper) in papers.into_iter().enumerate() {
                        let mut linked: Vec<SentenceRef> = Vec::new();
                        let mut per_target: Vec<(&str, usize)> = Vec::new();
                        for g in opposite_side.map_or(&[][..], |s| &s.groups) {
                            let hits: Vec<&SentenceRef> = g.members.iter().filter(|s| s.paper_id == paper).collect();
                            if !hits.is_empty() {
                                per_target.push((&g.fine_bone_id, hits.len()));
                                linked.extend(hits.into_iter().cloned());
                            }
                        }
                        linked.sort_by_key(|s| s.index);
                        // Earliest fine-bone wins ties.
                        let target = per_target
                            .iter()
                            .fold(None::<(&str, usize)>, |best, &(id, n)| match best {
                                Some((_, bn)) if bn >= n => best,
                                _ => Some((id, n)),
                            })
                            .map(|(id, _)| id.to_string());
                        pending.push(PendingChild {
                            joint: ji,
                            side: si,
                            group: gi,
                            bone: ChildBone {
                                child_id: format!("{}-C{ci}", group.fine_bone_id),
                                source_fine_bone_id: group.fine_bone_id.clone(),
                                paper_id: paper.to_string(),
                                direction: LinkDirection::from_source(side.label).expect("issue side"),
                                linked_sentences: linked,
                                target_fine_bone_id: target,
                                summary: String::new(),
                            },
                        });
                    }
                    fine_bones.push(FineBone {
                        fine_bone_id: group.fine_bone_id.clone(),
                        theme: themes[assignment[gi]].clone(),
                        member_sentences: group.members.clone(),
                        child_bones: Vec::new(),
                    });
                }
            }
            backbones.push(Backbone {
                label: side.label,
                bare: fine_bones.is_empty(),
                fine_bones,
            });
        }

        joints.push(Joint {
            joint_id: task.joint_id.clone(),
            task_name,
            member_paper_ids: task.member_paper_ids.clone(),
            backbones,
        });
    }

    let linked: Vec<usize> = (0..pending.len()).filter(|&i| pending[i].bone.is_linked()).collect();
    let groups: Vec<Vec<String>> = linked
        .iter()
        .map(|&i| {
            pending[i]
                .bone
                .linked_sentences
                .iter()
                .map(|s| s.text.clone())
                .collect()
        })
        .collect();
    let summaries = summarizer.summarize_many(&groups)?;
    for (i, summary) in linked.into_iter().zip(summaries) {
        pending[i].bone.summary = summary;
    }
    for p in pending {
        joints[p.joint].backbones[p.side].fine_bones[p.group]
            .child_bones
            .push(p.bone);
    }

    Ok(FishboneDiagram {
        head: topic.trim().to_string(),
        joints,
        provenance: Provenance {
            seed: plan.config.seed,
            prelude_k: plan.config.prelude_k,
            task_k: plan.task_k,
            fine_bone_n: plan.config.fine_bone_n,
            embedding_provider: plan.embedding_provider.clone(),
            summarizer_provider: summarizer.provider_id().to_string(),
            config_hash: String::new(),
        },
    })
}

/// `cluster_plan` followed by `assemble`.
pub fn build_fishbone(
    topic: &str,
    papers: &[ClassifiedPaper],
    embedder: &dyn EmbeddingProvider,
    summarizer: &Summarizer,
    cfg: &BuildConfig,
) -> Result<FishboneDiagram, FishboneError> {
    if topic.trim().is_empty() {
        return Err(FishboneError::EmptyTopic);
    }
    let plan = cluster_plan(papers, embedder, cfg)?;
    assemble(topic, &plan, summarizer, embedder)
}
