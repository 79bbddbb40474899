use std::collections::{HashMap, HashSet};

use fishbone_core::classifier::IssueLabel;
use fishbone_core::embedding::HashingEmbedder;
use fishbone_core::fishbone::{
    build_fishbone, cluster_plan, validate, BuildConfig, ClassifiedPaper, FishboneDiagram, FishboneError,
    LinkDirection, TaskK,
};
use fishbone_core::summarizer::Summarizer;

fn toy() -> Vec<ClassifiedPaper> {
    serde_json::from_str(include_str!("fixtures/toy_classified.json")).unwrap()
}

fn build(papers: &[ClassifiedPaper], cfg: &BuildConfig) -> FishboneDiagram {
    let embedder = HashingEmbedder::new(256).unwrap();
    build_fishbone("neural", papers, &embedder, &Summarizer::stub(), cfg).unwrap()
}

fn toy_diagram() -> FishboneDiagram {
    build(&toy(), &BuildConfig::new(TaskK::Fixed(2), 1, 42))
}

#[test]
fn toy_structure() {
    let d = toy_diagram();
    assert!(validate(&d).is_empty(), "{:?}", validate(&d));
    assert_eq!(d.joints.len(), 2);
    let mut groups: Vec<Vec<&str>> = d
        .joints
        .iter()
        .map(|j| j.member_paper_ids.iter().map(String::as_str).collect())
        .collect();
    groups.sort();
    assert_eq!(groups, [vec!["qa1", "qa2", "qa3"], vec!["seg1", "seg2", "seg3"]]);
    for j in &d.joints {
        assert_eq!(j.backbones.len(), 2);
        for b in &j.backbones {
            assert_eq!(b.fine_bones.len(), 1);
            let f = &b.fine_bones[0];
            assert_eq!(f.child_bones.len(), 3);
            for c in &f.child_bones {
                assert!(c.is_linked());
                assert!(c.linked_sentences.iter().all(|s| s.paper_id == c.paper_id));
                assert!(f.member_sentences.iter().any(|s| s.paper_id == c.paper_id));
            }
        }
    }
}

#[test]
fn toy_partition_purity_and_coverage() {
    let papers = toy();
    let d = toy_diagram();
    let mut seen_papers = HashMap::new();
    for j in &d.joints {
        for p in &j.member_paper_ids {
            *seen_papers.entry(p.clone()).or_insert(0) += 1;
        }
    }
    assert_eq!(seen_papers.len(), papers.len());
    assert!(seen_papers.values().all(|&n| n == 1));

    let mut placed = HashSet::new();
    for (_, b, f) in d.fine_bones() {
        for s in &f.member_sentences {
            assert_ne!(s.label, IssueLabel::Others);
            assert_eq!(s.label, b.label);
            assert!(placed.insert((s.paper_id.clone(), s.index)));
        }
        for c in &f.child_bones {
            assert!(c.linked_sentences.iter().all(|s| s.label != IssueLabel::Others));
        }
    }
    let issues: HashSet<(String, usize)> = papers
        .iter()
        .flat_map(|p| p.sentences.iter())
        .filter(|s| s.label != IssueLabel::Others)
        .map(|s| (s.paper_id.clone(), s.index))
        .collect();
    assert_eq!(placed, issues);
}

#[test]
fn stub_build_is_deterministic() {
    assert_eq!(toy_diagram(), toy_diagram());
}

#[test]
fn one_paper_is_rejected() {
    let embedder = HashingEmbedder::new(64).unwrap();
    let err = build_fishbone(
        "neural",
        &toy()[..1],
        &embedder,
        &Summarizer::stub(),
        &BuildConfig::new(TaskK::Fixed(1), 1, 1),
    )
    .unwrap_err();
    assert!(matches!(err, FishboneError::TooFewPapers(1)));
}

#[test]
fn emphasize_only_paper_gets_unlinked_child_bone() {
    let mut papers = toy();
    papers[0].sentences.retain(|s| s.label != IssueLabel::Improvable);
    let d = build(&papers, &BuildConfig::new(TaskK::Fixed(2), 1, 42));
    assert!(validate(&d).is_empty(), "{:?}", validate(&d));
    let c = d
        .child_bones()
        .find(|c| c.paper_id == papers[0].paper_id)
        .expect("qa1 has an Emphasize child-bone");
    assert_eq!(c.direction, LinkDirection::EmphasizeToImprovable);
    assert!(c.linked_sentences.is_empty());
    assert!(c.summary.is_empty());
    assert!(c.target_fine_bone_id.is_none());
}

#[test]
fn missing_side_gives_bare_backbone() {
    let mut papers = toy();
    for p in &mut papers {
        p.sentences.retain(|s| s.label != IssueLabel::Improvable);
    }
    let d = build(&papers, &BuildConfig::new(TaskK::Fixed(2), 1, 42));
    assert!(validate(&d).is_empty(), "{:?}", validate(&d));
    for j in &d.joints {
        let b = j.backbone(IssueLabel::Improvable).unwrap();
        assert!(b.bare && b.fine_bones.is_empty());
    }
}

#[test]
fn mixed_paper_child_bone_is_one_violation() {
    let mut d = toy_diagram();
    let other = d.joints[0].member_paper_ids[1].clone();
    let child = &mut d.joints[0].backbones[0].fine_bones[0].child_bones[0];
    child.linked_sentences[0].paper_id = other;
    let id = child.child_id.clone();
    let v = validate(&d);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].element, id);
}

#[test]
fn duplicate_emphasize_backbone_is_flagged() {
    let mut d = toy_diagram();
    d.joints[0].backbones[1].label = IssueLabel::Emphasize;
    assert!(validate(&d)
        .iter()
        .any(|v| v.element == d.joints[0].joint_id && v.message.contains("exactly one")));
}

#[test]
fn more_fine_bones_than_sentences_is_clamped() {
    let d = build(&toy(), &BuildConfig::new(TaskK::Fixed(2), 5, 7));
    assert!(validate(&d).is_empty(), "{:?}", validate(&d));
    for (_, _, f) in d.fine_bones() {
        assert_eq!(f.member_sentences.len(), 1);
        assert_eq!(f.child_bones.len(), 1);
    }
}

#[test]
fn task_k_from_range_finds_two_groups() {
    let embedder = HashingEmbedder::new(256).unwrap();
    let plan = cluster_plan(
        &toy(),
        &embedder,
        &BuildConfig::new(TaskK::Range { min: 2, max: 4 }, 1, 42),
    )
    .unwrap();
    assert_eq!(plan.task_k, 2);
    assert_eq!(plan.silhouette.len(), 3);
}
