//! Hand-authored template of a stylized Circle of Willis.
//!
//! The template lives in unit coordinates [0,1]^3 (x: left→right,
//! y: posterior→anterior, z: inferior→superior) and is scaled into a volume
//! at generation time. It defines 13 labeled bifurcations, two unlabeled
//! helper junctions where the posterior communicating arteries attach, three
//! inflow stems and a set of distal terminals.
//!
//! Every labeled junction has exactly three incident segments, one of which
//! is free of other landmarks and is designated as the branch to delete when
//! that bifurcation is anatomically absent. Deletions are therefore strictly
//! local: removing a landmark never moves or removes any other landmark.

use crate::landmarks::LandmarkLabel;

/// Node ids: 13 labeled junctions (indices = LandmarkLabel order), then
/// helper junctions and terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeId {
    Label(LandmarkLabel),
    /// Left / right posterior-communicating attachment on the carotid top.
    HelperLeft,
    HelperRight,
    /// Inflow stems entering from below.
    LeftCarotidIn,
    RightCarotidIn,
    BasilarIn,
    /// Distal terminals, two per side where needed.
    Terminal(u8),
}

pub struct TemplateNode {
    pub id: NodeId,
    pub pos: [f64; 3],
}

pub struct TemplateEdge {
    pub a: usize,
    pub b: usize,
    /// Label whose absence deletes this edge, if any.
    pub deleted_when_absent: Option<LandmarkLabel>,
}

pub struct CowTemplate {
    pub nodes: Vec<TemplateNode>,
    pub edges: Vec<TemplateEdge>,
}

use LandmarkLabel as L;

impl CowTemplate {
    pub fn build() -> CowTemplate {
        let nodes = vec![
            // 0..13: labeled junctions in channel order A..M
            TemplateNode { id: NodeId::Label(L::A), pos: [0.44, 0.78, 0.55] },
            TemplateNode { id: NodeId::Label(L::B), pos: [0.56, 0.78, 0.55] },
            TemplateNode { id: NodeId::Label(L::C), pos: [0.40, 0.60, 0.48] },
            TemplateNode { id: NodeId::Label(L::D), pos: [0.60, 0.60, 0.48] },
            TemplateNode { id: NodeId::Label(L::E), pos: [0.22, 0.55, 0.50] },
            TemplateNode { id: NodeId::Label(L::F), pos: [0.78, 0.55, 0.50] },
            TemplateNode { id: NodeId::Label(L::G), pos: [0.33, 0.67, 0.52] },
            TemplateNode { id: NodeId::Label(L::H), pos: [0.67, 0.67, 0.52] },
            TemplateNode { id: NodeId::Label(L::I), pos: [0.50, 0.30, 0.40] },
            TemplateNode { id: NodeId::Label(L::J), pos: [0.42, 0.38, 0.44] },
            TemplateNode { id: NodeId::Label(L::K), pos: [0.58, 0.38, 0.44] },
            TemplateNode { id: NodeId::Label(L::L), pos: [0.34, 0.22, 0.46] },
            TemplateNode { id: NodeId::Label(L::M), pos: [0.66, 0.22, 0.46] },
            // 13, 14: helper junctions on the carotid→anterior path
            TemplateNode { id: NodeId::HelperLeft, pos: [0.37, 0.63, 0.50] },
            TemplateNode { id: NodeId::HelperRight, pos: [0.63, 0.63, 0.50] },
            // 15..18: inflow stems
            TemplateNode { id: NodeId::LeftCarotidIn, pos: [0.40, 0.58, 0.12] },
            TemplateNode { id: NodeId::RightCarotidIn, pos: [0.60, 0.58, 0.12] },
            TemplateNode { id: NodeId::BasilarIn, pos: [0.50, 0.28, 0.08] },
            // 18..: terminals
            TemplateNode { id: NodeId::Terminal(0), pos: [0.42, 0.86, 0.78] }, // A distal
            TemplateNode { id: NodeId::Terminal(1), pos: [0.58, 0.86, 0.78] }, // B distal
            TemplateNode { id: NodeId::Terminal(2), pos: [0.26, 0.74, 0.60] }, // G twig
            TemplateNode { id: NodeId::Terminal(3), pos: [0.74, 0.74, 0.60] }, // H twig
            TemplateNode { id: NodeId::Terminal(4), pos: [0.10, 0.62, 0.60] }, // E branch 1
            TemplateNode { id: NodeId::Terminal(5), pos: [0.08, 0.45, 0.44] }, // E branch 2
            TemplateNode { id: NodeId::Terminal(6), pos: [0.90, 0.62, 0.60] }, // F branch 1
            TemplateNode { id: NodeId::Terminal(7), pos: [0.92, 0.45, 0.44] }, // F branch 2
            TemplateNode { id: NodeId::Terminal(8), pos: [0.26, 0.10, 0.52] }, // L branch 1
            TemplateNode { id: NodeId::Terminal(9), pos: [0.28, 0.18, 0.62] }, // L branch 2
            TemplateNode { id: NodeId::Terminal(10), pos: [0.74, 0.10, 0.52] }, // M branch 1
            TemplateNode { id: NodeId::Terminal(11), pos: [0.72, 0.18, 0.62] }, // M branch 2
        ];

        let (ia, ib, ic, id, ie, if_, ig, ih, ii, ij, ik, il, im) =
            (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12);
        let (nl, nr) = (13, 14);
        let (lin, rin, bin) = (15, 16, 17);
        let t = |n: usize| 18 + n;

        let e = |a: usize, b: usize, del: Option<L>| TemplateEdge { a, b, deleted_when_absent: del };
        let edges = vec![
            e(lin, ic, Some(L::C)), // left carotid inflow
            e(rin, id, Some(L::D)),
            e(bin, ii, Some(L::I)), // basilar inflow
            e(ic, nl, None),
            e(nl, ig, None),
            e(ic, ie, None), // left M1
            e(id, nr, None),
            e(nr, ih, None),
            e(id, if_, None), // right M1
            e(ig, ia, None),  // left A1
            e(ih, ib, None),  // right A1
            e(ia, ib, None),  // anterior communicating
            e(ia, t(0), Some(L::A)),
            e(ib, t(1), Some(L::B)),
            e(ig, t(2), Some(L::G)),
            e(ih, t(3), Some(L::H)),
            e(ie, t(4), Some(L::E)),
            e(ie, t(5), None),
            e(if_, t(6), Some(L::F)),
            e(if_, t(7), None),
            e(ii, ij, None), // left P1
            e(ii, ik, None),
            e(nl, ij, Some(L::J)), // left posterior communicating
            e(nr, ik, Some(L::K)),
            e(ij, il, None), // left P2
            e(ik, im, None),
            e(il, t(8), Some(L::L)),
            e(il, t(9), None),
            e(im, t(10), Some(L::M)),
            e(im, t(11), None),
        ];

        CowTemplate { nodes, edges }
    }

    pub fn label_node(&self, label: LandmarkLabel) -> &TemplateNode {
        &self.nodes[label.index()]
    }

    /// Edges incident to a node in the full (no deletions) template.
    pub fn incident(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.a == node || e.b == node)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn labeled_junctions_have_degree_three() {
        let t = CowTemplate::build();
        for &l in &LandmarkLabel::ALL {
            assert_eq!(t.incident(l.index()).len(), 3, "label {l}");
        }
    }

    #[test]
    fn every_label_has_one_landmark_free_deletable_branch() {
        let t = CowTemplate::build();
        for &l in &LandmarkLabel::ALL {
            let deletable: Vec<&TemplateEdge> = t
                .edges
                .iter()
                .filter(|e| e.deleted_when_absent == Some(l))
                .collect();
            assert_eq!(deletable.len(), 1, "label {l}");
            let e = deletable[0];
            // the deletable edge is incident to the label and its far end is
            // not another labeled junction
            let far = if e.a == l.index() { e.b } else { e.a };
            assert!(e.a == l.index() || e.b == l.index(), "label {l}");
            assert!(far >= 13, "label {l} deletable branch touches a landmark");
        }
    }

    #[test]
    fn ring_adjacency_matches_schematic() {
        // the anterior/posterior ring structure: adjacency between labeled
        // junctions along vessel segments (helper junctions collapse C-G and
        // D-H into two-hop paths)
        let t = CowTemplate::build();
        let adjacent = |x: LandmarkLabel, y: LandmarkLabel| {
            t.edges
                .iter()
                .any(|e| (e.a == x.index() && e.b == y.index()) || (e.a == y.index() && e.b == x.index()))
        };
        use LandmarkLabel::*;
        for (x, y) in [(A, B), (G, A), (H, B), (C, E), (D, F), (I, J), (I, K), (J, L), (K, M)] {
            assert!(adjacent(x, y), "{x}-{y} must be adjacent");
        }
        // C reaches G (and D reaches H) through the helper junction
        let helper_path = |c: LandmarkLabel, g: LandmarkLabel, helper: usize| {
            let hop1 = t.edges.iter().any(|e| {
                (e.a == c.index() && e.b == helper) || (e.a == helper && e.b == c.index())
            });
            let hop2 = t.edges.iter().any(|e| {
                (e.a == g.index() && e.b == helper) || (e.a == helper && e.b == g.index())
            });
            hop1 && hop2
        };
        assert!(helper_path(C, G, 13));
        assert!(helper_path(D, H, 14));
    }

    #[test]
    fn node_positions_inside_unit_cube() {
        let t = CowTemplate::build();
        let mut ids = BTreeSet::new();
        for n in &t.nodes {
            for c in n.pos {
                assert!((0.05..=0.95).contains(&c), "{:?}", n.pos);
            }
            ids.insert(format!("{:?}", n.id));
        }
        assert_eq!(ids.len(), t.nodes.len(), "duplicate node ids");
    }
}
