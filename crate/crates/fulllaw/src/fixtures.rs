//! Programmatic access to the fixture graphs shipped under `fixtures/`.
//!
//! The same files anchor the golden CLI tests; loading them through
//! `include_str!` keeps tests independent of the working directory.

use crate::graph::{parse_graph, validate, MissingDataGraph, MixedGraph};

macro_rules! fixture_fn {
    ($name:ident, $file:literal) => {
        pub fn $name() -> MissingDataGraph {
            validate(parse_graph(include_str!(concat!("../fixtures/", $file))).expect("fixture parses"))
                .expect("fixture validates")
        }
    };
}

fixture_fn!(fig1a, "fig1a.mdg");
fixture_fn!(fig1a_dashed, "fig1a_dashed.mdg");
fixture_fn!(fig2a, "fig2a.mdg");
fixture_fn!(fig2a_dashed, "fig2a_dashed.mdg");
fixture_fn!(fig2b, "fig2b.mdg");
fixture_fn!(fig2b_dashed, "fig2b_dashed.mdg");
fixture_fn!(fig4a, "fig4a.mdg");
fixture_fn!(fig4b, "fig4b.mdg");
fixture_fn!(fig5a, "fig5a.mdg");
fixture_fn!(fig5b, "fig5b.mdg");
fixture_fn!(fig5d, "fig5d.mdg");
fixture_fn!(fig5e, "fig5e.mdg");
fixture_fn!(selfcensor, "selfcensor.mdg");
fixture_fn!(colluder, "colluder.mdg");
fixture_fn!(mcar, "mcar.mdg");

/// fig5c is an observed-law projection, not a valid missing-data graph; it is
/// exposed raw.
pub fn fig5c_raw() -> MixedGraph {
    parse_graph(include_str!("../fixtures/fig5c.mdg")).expect("fixture parses")
}

/// fig5f, the common observed-law projection of fig5d and fig5e, raw.
pub fn fig5f_raw() -> MixedGraph {
    parse_graph(include_str!("../fixtures/fig5f.mdg")).expect("fixture parses")
}

/// The four colluding-path forms over an otherwise disconnected graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig6Form {
    A,
    B,
    C,
    D,
}

/// Colluding-path gadget of the given form and span, if the form is realizable
/// at that span. Forms c and d end with a directed edge out of `R1` into the
/// last chain vertex, which must be an indicator, so they need span >= 1.
///
/// Returns the graph together with the number of companion singleton vertices
/// (the pair partners of chain indicators), which contribute one Moebius
/// parameter to the full and observed counts alike.
pub fn fig6(form: Fig6Form, span: usize) -> Option<(MissingDataGraph, usize)> {
    let text = match (form, span) {
        (Fig6Form::A, 0) => include_str!("../fixtures/fig6_a_s0.mdg"),
        (Fig6Form::A, 1) => include_str!("../fixtures/fig6_a_s1.mdg"),
        (Fig6Form::A, 2) => include_str!("../fixtures/fig6_a_s2.mdg"),
        (Fig6Form::A, 3) => include_str!("../fixtures/fig6_a_s3.mdg"),
        (Fig6Form::A, 4) => include_str!("../fixtures/fig6_a_s4.mdg"),
        (Fig6Form::B, 0) => include_str!("../fixtures/fig6_b_s0.mdg"),
        (Fig6Form::B, 1) => include_str!("../fixtures/fig6_b_s1.mdg"),
        (Fig6Form::B, 2) => include_str!("../fixtures/fig6_b_s2.mdg"),
        (Fig6Form::B, 3) => include_str!("../fixtures/fig6_b_s3.mdg"),
        (Fig6Form::B, 4) => include_str!("../fixtures/fig6_b_s4.mdg"),
        (Fig6Form::C, 1) => include_str!("../fixtures/fig6_c_s1.mdg"),
        (Fig6Form::C, 2) => include_str!("../fixtures/fig6_c_s2.mdg"),
        (Fig6Form::C, 3) => include_str!("../fixtures/fig6_c_s3.mdg"),
        (Fig6Form::C, 4) => include_str!("../fixtures/fig6_c_s4.mdg"),
        (Fig6Form::D, 1) => include_str!("../fixtures/fig6_d_s1.mdg"),
        (Fig6Form::D, 2) => include_str!("../fixtures/fig6_d_s2.mdg"),
        (Fig6Form::D, 3) => include_str!("../fixtures/fig6_d_s3.mdg"),
        (Fig6Form::D, 4) => include_str!("../fixtures/fig6_d_s4.mdg"),
        _ => return None,
    };
    let g = validate(parse_graph(text).expect("fixture parses")).expect("fixture validates");
    let companions = match form {
        Fig6Form::A | Fig6Form::B => 0,
        // X2 is the off-path partner of the chain indicator R2.
        Fig6Form::C | Fig6Form::D => 1,
    };
    Some((g, companions))
}
