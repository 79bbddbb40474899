//! Ishikawa layout. The spine runs left to right with the head at the right
//! end. Joints sit on bones leaning left at 60°, alternating above and below
//! the spine. Each joint's backbones, fine-bones and child-bone leaves are
//! stacked as horizontal rows hanging off its bone, nearest the spine first.

use std::fmt::Write as _;

use super::{ellipsize, RenderError, RenderOptions};
use crate::classifier::IssueLabel;
use crate::fishbone::{FishboneDiagram, Joint};

const BONE_ANGLE_DEG: f64 = 60.0;
/// Average glyph advance as a fraction of the font size.
const GLYPH_WIDTH: f64 = 0.6;

enum Prim {
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        class: &'static str,
    },
    Text {
        x: f64,
        y: f64,
        anchor: Anchor,
        class: &'static str,
        id: String,
        text: String,
    },
}

#[derive(Clone, Copy)]
enum Anchor {
    Start,
    Middle,
    End,
}

impl Anchor {
    fn as_str(self) -> &'static str {
        match self {
            Anchor::Start => "start",
            Anchor::Middle => "middle",
            Anchor::End => "end",
        }
    }
}

struct Row {
    class: &'static str,
    stroke: f64,
    id: String,
    label: String,
}

struct Layout {
    fs: f64,
    line: f64,
    base: f64,
    max_label: usize,
}

impl Layout {
    fn text_width(&self, s: &str) -> f64 {
        s.chars().count() as f64 * self.fs * GLYPH_WIDTH
    }

    fn rows(&self, j: &Joint) -> Vec<Row> {
        let mut rows = Vec::new();
        for b in &j.backbones {
            let side = match b.label {
                IssueLabel::Emphasize => "Emphasize",
                IssueLabel::Improvable => "Improvable",
                IssueLabel::Others => "Others",
            };
            let name = if b.bare {
                format!("{side} (none)")
            } else {
                side.to_string()
            };
            rows.push(Row {
                class: match b.label {
                    IssueLabel::Emphasize => "backbone emphasize",
                    _ => "backbone improvable",
                },
                stroke: 6.0 * self.fs,
                id: format!("{}/{}", j.joint_id, b.label.as_str()),
                label: name,
            });
            for f in &b.fine_bones {
                rows.push(Row {
                    class: "fine-bone",
                    stroke: 4.0 * self.fs,
                    id: f.fine_bone_id.clone(),
                    label: ellipsize(&f.theme, self.max_label),
                });
                for c in &f.child_bones {
                    let text = if c.is_linked() {
                        ellipsize(&c.summary, self.max_label)
                    } else {
                        "(no linked issue)".to_string()
                    };
                    rows.push(Row {
                        class: if c.is_linked() {
                            "child-bone"
                        } else {
                            "child-bone empty"
                        },
                        stroke: 2.0 * self.fs,
                        id: c.child_id.clone(),
                        label: text,
                    });
                }
            }
        }
        rows
    }

    /// Height of row `r` above (or below) the spine.
    fn row_height(&self, r: usize) -> f64 {
        self.base + r as f64 * self.line
    }

    /// Leftward reach of a joint block measured from the bone's foot.
    fn reach(&self, rows: &[Row], title: &str) -> f64 {
        let cot = 1.0 / BONE_ANGLE_DEG.to_radians().tan();
        let mut w = 0.0f64;
        for (r, row) in rows.iter().enumerate() {
            let along = self.row_height(r) * cot;
            w = w.max(along + row.stroke + self.fs * 0.4 + self.text_width(&row.label));
        }
        let tip = self.row_height(rows.len()) * cot;
        w.max(tip + self.text_width(title) / 2.0)
    }
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn to_svg(d: &FishboneDiagram, opts: &RenderOptions) -> Result<String, RenderError> {
    opts.validate()?;
    let fs = opts.font_size;
    let lay = Layout {
        fs,
        line: fs * 1.6,
        base: fs * 2.0,
        max_label: opts.max_label_len,
    };
    let cot = 1.0 / BONE_ANGLE_DEG.to_radians().tan();
    let gap = fs * 2.0;

    let mut prims = Vec::new();
    // Rightmost foot so far on each side, and overall.
    let mut side_end = [0.0f64; 2];
    let mut last_foot = f64::NEG_INFINITY;

    for (i, j) in d.joints.iter().enumerate() {
        let rows = lay.rows(j);
        let title = ellipsize(&j.task_name, opts.max_label_len);
        let reach = lay.reach(&rows, &title);
        // Even joints above the spine (negative y), odd below. A block only
        // has to clear the previous block on its own side.
        let side = i % 2;
        let sign = if side == 0 { -1.0 } else { 1.0 };
        let x0 = (side_end[side] + reach).max(last_foot + gap);
        last_foot = x0;

        let top = lay.row_height(rows.len());
        let tip = (x0 - top * cot, sign * top);
        // A wide centred title can stick out to the right of the foot.
        side_end[side] = x0.max(tip.0 + lay.text_width(&title) / 2.0) + gap;
        prims.push(Prim::Line {
            x1: x0,
            y1: 0.0,
            x2: tip.0,
            y2: tip.1,
            class: "joint-bone",
        });
        prims.push(Prim::Text {
            x: tip.0,
            y: tip.1 + if sign < 0.0 { -0.5 * fs } else { 1.2 * fs },
            anchor: Anchor::Middle,
            class: "joint",
            id: j.joint_id.clone(),
            text: title,
        });

        for (r, row) in rows.into_iter().enumerate() {
            let h = lay.row_height(r);
            let xb = x0 - h * cot;
            let y = sign * h;
            prims.push(Prim::Line {
                x1: xb,
                y1: y,
                x2: xb - row.stroke,
                y2: y,
                class: row.class,
            });
            prims.push(Prim::Text {
                x: xb - row.stroke - fs * 0.4,
                y: y + fs * 0.35,
                anchor: Anchor::End,
                class: row.class,
                id: row.id,
                text: row.label,
            });
        }
    }

    let spine_end = last_foot.max(0.0) + fs * 4.0;
    prims.insert(
        0,
        Prim::Line {
            x1: 0.0,
            y1: 0.0,
            x2: spine_end,
            y2: 0.0,
            class: "spine",
        },
    );
    prims.push(Prim::Text {
        x: spine_end + fs * 0.6,
        y: fs * 0.35,
        anchor: Anchor::Start,
        class: "head",
        id: "head".into(),
        text: ellipsize(&d.head, opts.max_label_len),
    });

    // Bounding box over every primitive, text measured by estimated extent.
    let (mut x_min, mut y_min, mut x_max, mut y_max) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    let mut grow = |x: f64, y: f64| {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    };
    for p in &prims {
        match p {
            Prim::Line { x1, y1, x2, y2, .. } => {
                grow(*x1, *y1);
                grow(*x2, *y2);
            }
            Prim::Text { x, y, anchor, text, .. } => {
                let w = lay.text_width(text);
                let (l, r) = match anchor {
                    Anchor::Start => (*x, x + w),
                    Anchor::Middle => (x - w / 2.0, x + w / 2.0),
                    Anchor::End => (x - w, *x),
                };
                grow(l, y - fs);
                grow(r, y + fs * 0.3);
            }
        }
    }
    let margin = fs * 2.0;
    let (vx, vy) = (x_min - margin, y_min - margin);
    let (vw, vh) = (x_max - x_min + 2.0 * margin, y_max - y_min + 2.0 * margin);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="{} {} {} {}" font-family="Helvetica, Arial, sans-serif" font-size="{}">"#,
        fmt_num(opts.width),
        fmt_num(opts.height),
        fmt_num(vx),
        fmt_num(vy),
        fmt_num(vw),
        fmt_num(vh),
        fmt_num(fs)
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&d.head));
    out.push_str(
        "<style>line{stroke:#333;stroke-width:1.5}line.spine{stroke-width:4}line.joint-bone{stroke-width:2.5}\
text.head{font-weight:bold}text.joint{font-weight:bold}text.backbone{font-style:italic}\
text.child-bone{fill:#555}text.empty{fill:#999}\
line.emphasize{stroke:#1f5fa8}line.improvable{stroke:#b8452e}line.child-bone{stroke:#888}</style>\n",
    );
    for p in &prims {
        match p {
            Prim::Line { x1, y1, x2, y2, class } => {
                let _ = writeln!(
                    out,
                    r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                    fmt_num(*x1),
                    fmt_num(*y1),
                    fmt_num(*x2),
                    fmt_num(*y2)
                );
            }
            Prim::Text {
                x,
                y,
                anchor,
                class,
                id,
                text,
            } => {
                let _ = writeln!(
                    out,
                    r#"<text class="{class}" data-id="{}" x="{}" y="{}" text-anchor="{}">{}</text>"#,
                    escape(id),
                    fmt_num(*x),
                    fmt_num(*y),
                    anchor.as_str(),
                    escape(text)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
