use std::fmt::Write as _;

use crate::fishbone::{ChildBone, FishboneDiagram, LinkDirection};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' | '\r' => out.push(' '),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Edge endpoints, always from the Improvable side to the Emphasize side.
fn endpoints(c: &ChildBone) -> Option<(&str, &str)> {
    let target = c.target_fine_bone_id.as_deref()?;
    Some(match c.direction {
        LinkDirection::ImprovableToEmphasize => (&c.source_fine_bone_id, target),
        LinkDirection::EmphasizeToImprovable => (target, &c.source_fine_bone_id),
    })
}

/// Head, joints and fine-bones become nodes; backbones become nested
/// clusters; every linked child-bone becomes one edge.
pub fn to_dot(d: &FishboneDiagram) -> String {
    let mut out = String::new();
    out.push_str("digraph fishbone {\n");
    out.push_str("  rankdir=RL;\n  compound=true;\n  node [fontname=\"Helvetica\"];\n");
    let _ = writeln!(out, "  head [label={}, shape=doubleoctagon];", quote(&d.head));

    for j in &d.joints {
        let _ = writeln!(out, "  subgraph {} {{", quote(&format!("cluster_{}", j.joint_id)));
        let _ = writeln!(out, "    label={};", quote(&j.joint_id));
        let _ = writeln!(
            out,
            "    {} [label={}, shape=box];",
            quote(&j.joint_id),
            quote(&j.task_name)
        );
        for b in &j.backbones {
            let name = format!("cluster_{}_{}", j.joint_id, b.label.as_str());
            let label = if b.bare {
                format!("{} (none)", b.label.as_str())
            } else {
                b.label.as_str().to_string()
            };
            let _ = writeln!(out, "    subgraph {} {{", quote(&name));
            let _ = writeln!(out, "      label={};", quote(&label));
            for f in &b.fine_bones {
                let _ = writeln!(
                    out,
                    "      {} [label={}, shape=ellipse];",
                    quote(&f.fine_bone_id),
                    quote(&f.theme)
                );
            }
            out.push_str("    }\n");
        }
        out.push_str("  }\n");
    }

    for c in d.child_bones() {
        if let Some((from, to)) = endpoints(c) {
            let _ = writeln!(
                out,
                "  {} -> {} [id={}, label={}];",
                quote(from),
                quote(to),
                quote(&c.child_id),
                quote(&c.summary)
            );
        }
    }
    out.push_str("}\n");
    out
}
