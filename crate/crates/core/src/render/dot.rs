//! Graphviz DOT output.

use std::fmt::Write;

use crate::configuration::{BondKind, Configuration};
use crate::generator::GeneratorKind;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Grounded concepts are solid ellipses, cues dashed ellipses and feature
/// generators grey boxes. Edges carry their bond value and energy.
pub fn to_dot(c: &Configuration, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(name)).unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
    for (site, g) in c.generators() {
        let attrs = match g.kind() {
            GeneratorKind::Grounded => {
                let role = g.role().map(|r| r.as_str()).unwrap_or("other");
                format!(
                    "label={}, shape=ellipse, style=solid, penwidth=2",
                    quote(&format!("{}\n[{}]", g.concept().to_words(), role))
                )
            }
            GeneratorKind::Ungrounded => {
                format!("label={}, shape=ellipse, style=dashed", quote(&g.concept().to_words()))
            }
            GeneratorKind::Feature => format!(
                "label={}, shape=box, style=filled, fillcolor=lightgray",
                quote(g.concept().as_str())
            ),
        };
        writeln!(out, "  {site} [{attrs}];").unwrap();
    }
    for e in c.edges() {
        let style = match e.kind {
            BondKind::Support => "dotted",
            BondKind::Semantic => "solid",
        };
        writeln!(
            out,
            "  {} -> {} [label={}, style={style}];",
            e.from.site,
            e.to.site,
            quote(&format!("{} ({:.3})", e.value, e.energy))
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
