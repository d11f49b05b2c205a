//! Plain-text graph serialization.
//!
//! ```text
//! mpe-graph <TAB> 1
//! N <TAB> id <TAB> S|NP <TAB> lemmas <TAB> surface <TAB> group,group <TAB> group:idx,group:idx
//! E <TAB> parent-id <TAB> child-id
//! C <TAB> group <TAB> caption-index <TAB> node-id
//! T <TAB> group <TAB> caption-index
//! ```
//!
//! Node lines come first, in id order; `T` lines list captions whose closure
//! was cut to the caption itself. Group ids may not contain tabs, commas or
//! newlines.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::{BuildDiagnostics, CaptionRef, GraphError, NodeKind, PhraseGraph, PhraseNode};

pub const GRAPH_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "mpe-graph";

pub fn write_graph<W: Write>(mut w: W, graph: &PhraseGraph) -> Result<(), GraphError> {
    writeln!(w, "{MAGIC}\t{GRAPH_FORMAT_VERSION}")?;
    for n in graph.nodes() {
        for g in &n.groups {
            if g.contains(['\t', ',', '\n', '\r']) || g.is_empty() {
                return Err(GraphError::Format {
                    line: 0,
                    message: format!("group id {g:?} cannot be serialized"),
                });
            }
        }
        let kind = match n.kind {
            NodeKind::Sentence => "S",
            NodeKind::NounPhrase => "NP",
        };
        let groups: Vec<&str> = n.groups.iter().map(String::as_str).collect();
        let captions: Vec<String> = n.captions.iter().map(ToString::to_string).collect();
        writeln!(
            w,
            "N\t{}\t{kind}\t{}\t{}\t{}\t{}",
            n.id,
            n.key(),
            n.surface,
            groups.join(","),
            captions.join(",")
        )?;
    }
    for (p, c) in graph.edges() {
        writeln!(w, "E\t{p}\t{c}")?;
    }
    for (c, id) in graph.captions() {
        writeln!(w, "C\t{}\t{}\t{id}", c.group, c.index)?;
    }
    for c in &graph.diagnostics.truncated {
        writeln!(w, "T\t{}\t{}", c.group, c.index)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph<R: BufRead>(r: R) -> Result<PhraseGraph, GraphError> {
    let mut nodes: Vec<PhraseNode> = Vec::new();
    let mut parents: Vec<Vec<usize>> = Vec::new();
    let mut captions = BTreeMap::new();
    let mut diagnostics = BuildDiagnostics::default();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let err = |message: String| GraphError::Format { line: line_no, message };
        let f: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if f.len() != 2 || f[0] != MAGIC {
                return Err(err("missing mpe-graph header".into()));
            }
            if f[1] != GRAPH_FORMAT_VERSION.to_string() {
                return Err(err(format!("unsupported graph format version {}", f[1])));
            }
            saw_header = true;
            continue;
        }
        let id = |s: &str, bound: usize| -> Result<usize, GraphError> {
            let v: usize = s.parse().map_err(|_| err(format!("bad node id {s:?}")))?;
            if v >= bound {
                return Err(err(format!("node id {v} out of range")));
            }
            Ok(v)
        };
        let caption = |g: &str, idx: &str| -> Result<CaptionRef, GraphError> {
            let index = idx.parse().map_err(|_| err(format!("bad caption index {idx:?}")))?;
            Ok(CaptionRef::new(g, index))
        };
        match (f[0], f.len()) {
            ("N", 7) => {
                let expected = nodes.len();
                let nid: usize = f[1].parse().map_err(|_| err(format!("bad node id {:?}", f[1])))?;
                if nid != expected {
                    return Err(err(format!("expected node id {expected}, got {nid}")));
                }
                let kind = match f[2] {
                    "S" => NodeKind::Sentence,
                    "NP" => NodeKind::NounPhrase,
                    other => return Err(err(format!("bad node kind {other:?}"))),
                };
                let lemmas: Vec<String> = f[3].split(' ').map(String::from).collect();
                if f[3].is_empty() {
                    return Err(err("empty phrase".into()));
                }
                let groups: BTreeSet<String> = f[5].split(',').filter(|g| !g.is_empty()).map(String::from).collect();
                let mut caps = BTreeSet::new();
                for c in f[6].split(',').filter(|c| !c.is_empty()) {
                    let (g, idx) = c.rsplit_once(':').ok_or_else(|| err(format!("bad caption {c:?}")))?;
                    caps.insert(caption(g, idx)?);
                }
                if groups.is_empty() {
                    return Err(err("node without support".into()));
                }
                nodes.push(PhraseNode {
                    id: nid,
                    lemmas,
                    surface: f[4].to_string(),
                    kind,
                    groups,
                    captions: caps,
                });
                parents.push(Vec::new());
            }
            ("E", 3) => {
                let p = id(f[1], nodes.len())?;
                let c = id(f[2], nodes.len())?;
                if p == c {
                    return Err(err("self edge".into()));
                }
                parents[c].push(p);
            }
            ("C", 4) => {
                let node = id(f[3], nodes.len())?;
                captions.insert(caption(f[1], f[2])?, node);
            }
            ("T", 3) => diagnostics.truncated.push(caption(f[1], f[2])?),
            _ => return Err(err(format!("unrecognized record {:?}", f[0]))),
        }
    }
    if !saw_header {
        return Err(GraphError::Format {
            line: 0,
            message: "empty graph file".into(),
        });
    }
    Ok(PhraseGraph::assemble(nodes, parents, captions, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ReductionRules};
    use crate::text::TextPipeline;

    #[test]
    fn round_trip_is_identical() {
        let p = TextPipeline::english();
        let caps: Vec<_> = ["a man in a red hat runs", "two girls sitting down", "a dog on a beach"]
            .iter()
            .enumerate()
            .map(|(i, r)| (CaptionRef::new(format!("g{}", i % 2), i as u32), p.normalize(r).unwrap()))
            .collect();
        let g = build_graph(&caps, &ReductionRules::english());
        let mut buf = Vec::new();
        write_graph(&mut buf, &g).unwrap();
        let back = read_graph(&buf[..]).unwrap();
        let mut again = Vec::new();
        write_graph(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back.nodes(), g.nodes());
        assert_eq!(back.captions(), g.captions());
    }

    #[test]
    fn errors_name_the_line() {
        let text = "mpe-graph\t1\nN\t0\tS\tdog\tdog\tg\tg:0\nE\t0\t5\n";
        let err = read_graph(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_graph("graph\t1\n".as_bytes()).is_err());
        assert!(read_graph("mpe-graph\t9\n".as_bytes()).is_err());
    }
}
