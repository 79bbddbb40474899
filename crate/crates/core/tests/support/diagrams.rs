//! Random structurally valid diagrams with awkward label text.

use fishbone_core::classifier::IssueLabel;
use fishbone_core::fishbone::{
    Backbone, ChildBone, FineBone, FishboneDiagram, Joint, LinkDirection, Provenance, SentenceRef,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "retrieval",
    "graph",
    "<noise>",
    "Q&A",
    "\"quoted\"",
    "naïve",
    "it's",
    "tensor",
    "bias",
    "λ-calculus",
    "scale",
];

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A structurally valid diagram with random shape and awkward text.
pub fn random_diagram(seed: u64) -> FishboneDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut joints = Vec::new();
    for j in 0..rng.gen_range(1..4) {
        let jid = format!("J{j}");
        let papers: Vec<String> = (0..rng.gen_range(1..4)).map(|p| format!("p{j}-{p}")).collect();
        let mut sides: Vec<(IssueLabel, Vec<SentenceRef>)> = Vec::new();
        for label in [IssueLabel::Emphasize, IssueLabel::Improvable] {
            let mut sents = Vec::new();
            for (pi, p) in papers.iter().enumerate() {
                for k in 0..rng.gen_range(0..3) {
                    sents.push(SentenceRef {
                        paper_id: p.clone(),
                        index: 10 * pi + k + if label == IssueLabel::Emphasize { 0 } else { 5 },
                        label,
                        text: words(&mut rng, 6),
                    });
                }
            }
            sides.push((label, sents));
        }
        let mut backbones = Vec::new();
        let mut groups: Vec<Vec<(String, Vec<SentenceRef>)>> = Vec::new();
        for (label, sents) in &sides {
            let n = if sents.is_empty() {
                0
            } else {
                rng.gen_range(1..=sents.len().min(3))
            };
            let letter = if *label == IssueLabel::Emphasize { "E" } else { "I" };
            let mut g: Vec<(String, Vec<SentenceRef>)> =
                (0..n).map(|f| (format!("{jid}-{letter}{f}"), Vec::new())).collect();
            for (i, s) in sents.iter().enumerate() {
                g[i % n.max(1)].1.push(s.clone());
            }
            groups.push(g);
        }
        for (si, (label, _)) in sides.iter().enumerate() {
            let opposite = &groups[1 - si];
            let mut fine_bones = Vec::new();
            for (fi, (fid, members)) in groups[si].iter().enumerate() {
                let mut child_bones = Vec::new();
                let mut seen = Vec::new();
                for s in members {
                    if seen.contains(&s.paper_id) {
                        continue;
                    }
                    seen.push(s.paper_id.clone());
                    let mut linked = Vec::new();
                    let mut target = None;
                    for (ofid, om) in opposite {
                        for o in om.iter().filter(|o| o.paper_id == s.paper_id) {
                            linked.push(o.clone());
                            target.get_or_insert_with(|| ofid.clone());
                        }
                    }
                    let summary = if linked.is_empty() {
                        String::new()
                    } else {
                        words(&mut rng, 12)
                    };
                    child_bones.push(ChildBone {
                        child_id: format!("{fid}-C{}", child_bones.len()),
                        source_fine_bone_id: fid.clone(),
                        paper_id: s.paper_id.clone(),
                        direction: LinkDirection::from_source(*label).unwrap(),
                        linked_sentences: linked,
                        target_fine_bone_id: target,
                        summary,
                    });
                }
                fine_bones.push(FineBone {
                    fine_bone_id: fid.clone(),
                    theme: format!("theme {fi} {}", words(&mut rng, 2)),
                    member_sentences: members.clone(),
                    child_bones,
                });
            }
            backbones.push(Backbone {
                label: *label,
                bare: fine_bones.is_empty(),
                fine_bones,
            });
        }
        joints.push(Joint {
            joint_id: jid,
            task_name: words(&mut rng, 4),
            member_paper_ids: papers,
            backbones,
        });
    }
    FishboneDiagram {
        head: format!("topic {}", words(&mut rng, 2)),
        joints,
        provenance: Provenance {
            seed,
            prelude_k: 2,
            task_k: 1,
            fine_bone_n: 3,
            embedding_provider: "hashing-fnv1a64".into(),
            summarizer_provider: "stub-tf".into(),
            config_hash: String::new(),
        },
    }
}
