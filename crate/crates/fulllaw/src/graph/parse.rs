//! Line-oriented graph file format.
//!
//! ```text
//! # comment
//! var X1 missing          # creates X1 and its implicit indicator R1
//! var O1 observed
//! var U1 hidden           # optional cardinality: `var U1 hidden 3`
//! var R9 indicator        # output extension: explicit indicator
//! var X9 proxy R9         # output extension: proxy paired with an indicator
//! edge A -> B
//! biedge A <-> B
//! ```
//!
//! Indicators and proxies of `missing` vars are implicit; edge lines may refer to
//! them by the conventional names (`X3` pairs with `R3`, anything else `W` with
//! `R_W`). The `indicator`/`proxy` keywords exist so projected graphs (whose
//! proxies no longer have the missing-data shape) can round-trip through files.

use super::{indicator_name_for, GraphError, MixedGraph, Vertex, VertexRole};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown vertex `{name}`")]
    UnknownVertex { line: usize, name: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
}

/// Parse the file format into an unvalidated [`MixedGraph`].
pub fn parse_graph(input: &str) -> Result<MixedGraph, ParseError> {
    let mut g = MixedGraph::new();
    let mut next_pair: usize = 0;
    // Deferred edge lines: all vertices must exist before edges are resolved, and
    // files are allowed to list edges before vars.
    let mut edges: Vec<(usize, String, String, bool)> = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let line = lineno + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "var" => {
                if tokens.len() < 3 {
                    return Err(ParseError::Syntax {
                        line,
                        message: "expected `var <id> <observed|missing|hidden|indicator|proxy>`"
                            .to_string(),
                    });
                }
                let name = tokens[1];
                match tokens[2] {
                    "observed" => {
                        add_vertex(&mut g, line, name, VertexRole::FullyObserved)?;
                    }
                    "missing" => {
                        let idx = next_pair;
                        next_pair += 1;
                        add_vertex(&mut g, line, name, VertexRole::PotentiallyMissing(idx))?;
                        let r = indicator_name_for(name);
                        add_vertex(&mut g, line, &r, VertexRole::MissingnessIndicator(idx))?;
                    }
                    "hidden" => {
                        let card = match tokens.get(3) {
                            None => 2,
                            Some(t) => t.parse::<usize>().map_err(|_| ParseError::Syntax {
                                line,
                                message: format!("bad hidden cardinality `{t}`"),
                            })?,
                        };
                        if card < 2 {
                            return Err(ParseError::Syntax {
                                line,
                                message: "hidden cardinality must be at least 2".to_string(),
                            });
                        }
                        add_vertex(&mut g, line, name, VertexRole::Hidden { cardinality: card })?;
                    }
                    "indicator" => {
                        let idx = next_pair;
                        next_pair += 1;
                        add_vertex(&mut g, line, name, VertexRole::MissingnessIndicator(idx))?;
                    }
                    "proxy" => {
                        let Some(ind) = tokens.get(3) else {
                            return Err(ParseError::Syntax {
                                line,
                                message: "expected `var <id> proxy <indicator-id>`".to_string(),
                            });
                        };
                        let Some(rv) = g.vertex(ind) else {
                            return Err(ParseError::UnknownVertex {
                                line,
                                name: ind.to_string(),
                            });
                        };
                        let VertexRole::MissingnessIndicator(idx) = *g.role(rv) else {
                            return Err(ParseError::Syntax {
                                line,
                                message: format!("`{ind}` is not an indicator"),
                            });
                        };
                        add_vertex(&mut g, line, name, VertexRole::Proxy(idx))?;
                    }
                    other => {
                        return Err(ParseError::Syntax {
                            line,
                            message: format!("unknown role `{other}`"),
                        });
                    }
                }
            }
            "edge" => {
                if tokens.len() != 4 || tokens[2] != "->" {
                    return Err(ParseError::Syntax {
                        line,
                        message: "expected `edge A -> B`".to_string(),
                    });
                }
                edges.push((line, tokens[1].to_string(), tokens[3].to_string(), false));
            }
            "biedge" => {
                if tokens.len() != 4 || tokens[2] != "<->" {
                    return Err(ParseError::Syntax {
                        line,
                        message: "expected `biedge A <-> B`".to_string(),
                    });
                }
                edges.push((line, tokens[1].to_string(), tokens[3].to_string(), true));
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    message: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    for (line, a, b, bi) in edges {
        let va = resolve(&g, line, &a)?;
        let vb = resolve(&g, line, &b)?;
        let res = if bi { g.add_biedge(va, vb) } else { g.add_edge(va, vb) };
        res.map_err(|source| ParseError::Graph { line, source })?;
    }
    Ok(g)
}

fn add_vertex(g: &mut MixedGraph, line: usize, name: &str, role: VertexRole) -> Result<Vertex, ParseError> {
    g.add_vertex(name, role)
        .map_err(|source| ParseError::Graph { line, source })
}

fn resolve(g: &MixedGraph, line: usize, name: &str) -> Result<Vertex, ParseError> {
    g.vertex(name).ok_or_else(|| ParseError::UnknownVertex {
        line,
        name: name.to_string(),
    })
}

/// Render a graph in the file format. `parse_graph(render_graph(g))` reproduces `g`
/// up to vertex numbering.
pub fn render_graph(g: &MixedGraph) -> String {
    let mut out = String::new();
    // Missing vars whose indicator follows the naming convention are emitted as a
    // single `missing` line; everything else gets explicit role lines.
    let mut implicit_indicators = std::collections::BTreeSet::new();
    for v in g.vertices() {
        if let VertexRole::PotentiallyMissing(i) = g.role(v) {
            let conventional = indicator_name_for(g.name(v));
            if let Some(r) = g.vertex(&conventional) {
                if *g.role(r) == VertexRole::MissingnessIndicator(*i) {
                    implicit_indicators.insert(r);
                }
            }
        }
    }
    for v in g.vertices() {
        match g.role(v) {
            VertexRole::FullyObserved => out.push_str(&format!("var {} observed\n", g.name(v))),
            VertexRole::PotentiallyMissing(_) => {
                out.push_str(&format!("var {} missing\n", g.name(v)))
            }
            VertexRole::MissingnessIndicator(_) => {
                if !implicit_indicators.contains(&v) {
                    out.push_str(&format!("var {} indicator\n", g.name(v)));
                }
            }
            VertexRole::Proxy(i) => {
                let indicator = g
                    .vertices()
                    .find(|&r| *g.role(r) == VertexRole::MissingnessIndicator(*i))
                    .map(|r| g.name(r).to_string())
                    .unwrap_or_default();
                out.push_str(&format!("var {} proxy {}\n", g.name(v), indicator));
            }
            VertexRole::Hidden { cardinality } => {
                if *cardinality == 2 {
                    out.push_str(&format!("var {} hidden\n", g.name(v)));
                } else {
                    out.push_str(&format!("var {} hidden {}\n", g.name(v), cardinality));
                }
            }
        }
    }
    for (a, b) in g.directed_edges() {
        out.push_str(&format!("edge {} -> {}\n", g.name(a), g.name(b)));
    }
    for (a, b) in g.bidirected_edges() {
        out.push_str(&format!("biedge {} <-> {}\n", g.name(a), g.name(b)));
    }
    out
}
