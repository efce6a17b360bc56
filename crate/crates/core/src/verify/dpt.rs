//! Double-patterning conflict graphs and two-mask decomposition.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::geom::{parallel_runs, FlatLayout, Rect, ShapeId};
use crate::libio::{LayerRule, Mask};

use super::drc::connectivity_from_runs;
use super::{VerifyError, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    /// Connected shapes sharing one mask, ascending.
    pub shapes: Vec<ShapeId>,
    pub bbox: Rect,
}

/// Nodes are groups of touching shapes; an edge joins two groups that must
/// land on different masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictGraph {
    pub layer: String,
    pub nodes: Vec<GraphNode>,
    /// Sorted, deduplicated, `u < v`.
    pub edges: Vec<(u32, u32)>,
}

impl ConflictGraph {
    /// Bare graph for algorithm tests; node geometry is left empty.
    pub fn from_edges(node_count: usize, edges: &[(u32, u32)]) -> Self {
        let mut e: Vec<(u32, u32)> = edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        ConflictGraph {
            layer: String::new(),
            nodes: (0..node_count)
                .map(|_| GraphNode {
                    shapes: Vec::new(),
                    bbox: Rect::new(0, 0, 0, 0),
                })
                .collect(),
            edges: e,
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// Conflict graph of one double-patterning layer: an edge wherever two
/// unconnected groups face each other closer than the same-mask spacing.
pub fn build_conflict_graph(layout: &FlatLayout, layer: u16, rule: &LayerRule) -> ConflictGraph {
    let runs = parallel_runs(layout, layer, (rule.spacing_same_mask - 1).max(0));
    let conn = connectivity_from_runs(layout, layer, &runs);
    let mut nodes: Vec<GraphNode> = Vec::with_capacity(conn.component_count);
    for (i, &id) in conn.shapes.iter().enumerate() {
        let c = conn.component[i] as usize;
        let rect = layout.shape(id).rect;
        if c == nodes.len() {
            nodes.push(GraphNode {
                shapes: vec![id],
                bbox: rect,
            });
        } else {
            let n = &mut nodes[c];
            n.shapes.push(id);
            n.bbox = n.bbox.union(&rect);
        }
    }
    let mut edges: Vec<(u32, u32)> = runs
        .iter()
        .filter(|r| r.spacing > 0 && r.run_length > 0 && r.spacing < rule.spacing_same_mask)
        .filter_map(|r| {
            let a = conn.component_of(r.a)?;
            let b = conn.component_of(r.b)?;
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    ConflictGraph {
        layer: rule.name.clone(),
        nodes,
        edges,
    }
}

/// Outcome of coloring a graph component by component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    /// Mask per node; `None` for nodes of components that are not
    /// two-colorable.
    pub node_masks: Vec<Option<Mask>>,
    /// One shortest-found odd cycle per non-bipartite component, as node
    /// indices in cycle order.
    pub odd_cycles: Vec<Vec<u32>>,
}

impl Decomposition {
    pub fn is_bipartite(&self) -> bool {
        self.odd_cycles.is_empty()
    }
}

/// BFS two-coloring. Components are visited in node order and each root
/// takes Mask1. A same-color edge closes an odd cycle through the BFS tree;
/// the shortest such cycle seen in a component is kept as its witness.
pub fn decompose(graph: &ConflictGraph) -> Decomposition {
    let n = graph.nodes.len();
    let adj = graph.adjacency();
    let mut color: Vec<Option<Mask>> = vec![None; n];
    let mut depth = vec![0u32; n];
    let mut parent = vec![u32::MAX; n];
    let mut node_masks = vec![None; n];
    let mut odd_cycles = Vec::new();
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(Mask::Mask1);
        let mut members = vec![root as u32];
        let mut queue = VecDeque::from([root as u32]);
        let mut best: Option<Vec<u32>> = None;
        while let Some(u) = queue.pop_front() {
            let cu = color[u as usize].expect("queued nodes are colored");
            for &v in &adj[u as usize] {
                match color[v as usize] {
                    None => {
                        color[v as usize] = Some(cu.opposite());
                        depth[v as usize] = depth[u as usize] + 1;
                        parent[v as usize] = u;
                        members.push(v);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu && u < v => {
                        let cycle = tree_cycle(u, v, &parent, &depth);
                        if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
                            best = Some(cycle);
                        }
                    }
                    _ => {}
                }
            }
        }
        match best {
            Some(cycle) => odd_cycles.push(cycle),
            None => {
                for &m in &members {
                    node_masks[m as usize] = color[m as usize];
                }
            }
        }
    }
    Decomposition {
        node_masks,
        odd_cycles,
    }
}

/// Cycle formed by edge (u, v) and the BFS tree paths to their common
/// ancestor.
fn tree_cycle(u: u32, v: u32, parent: &[u32], depth: &[u32]) -> Vec<u32> {
    let (mut a, mut b) = (u, v);
    let mut left = vec![a];
    let mut right = vec![b];
    while depth[a as usize] > depth[b as usize] {
        a = parent[a as usize];
        left.push(a);
    }
    while depth[b as usize] > depth[a as usize] {
        b = parent[b as usize];
        right.push(b);
    }
    while a != b {
        a = parent[a as usize];
        b = parent[b as usize];
        left.push(a);
        right.push(b);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

/// Per-shape masks for one layer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MaskAssignment {
    pub layer: String,
    pub masks: BTreeMap<ShapeId, Mask>,
}

/// Two-colors the graph. Succeeds only if every component is bipartite;
/// otherwise reports one odd-cycle violation per offending component.
pub fn color_decompose(graph: &ConflictGraph) -> Result<MaskAssignment, Vec<Violation>> {
    let d = decompose(graph);
    if !d.is_bipartite() {
        return Err(odd_cycle_violations(graph, &d));
    }
    Ok(assignment_from(graph, &d))
}

pub fn odd_cycle_violations(graph: &ConflictGraph, d: &Decomposition) -> Vec<Violation> {
    d.odd_cycles
        .iter()
        .map(|cycle| {
            let mut shapes: Vec<ShapeId> = cycle
                .iter()
                .flat_map(|&n| graph.nodes[n as usize].shapes.iter().copied())
                .collect();
            shapes.sort_unstable();
            let bbox = cycle
                .iter()
                .map(|&n| graph.nodes[n as usize].bbox)
                .reduce(|a, b| a.union(&b))
                .expect("cycles are non-empty");
            Violation::new(ViolationKind::OddCycle, &graph.layer, bbox, shapes)
        })
        .collect()
}

/// Masks for every shape in a two-colored node.
pub fn assignment_from(graph: &ConflictGraph, d: &Decomposition) -> MaskAssignment {
    let mut masks = BTreeMap::new();
    for (node, mask) in graph.nodes.iter().zip(&d.node_masks) {
        if let Some(m) = mask {
            for &s in &node.shapes {
                masks.insert(s, *m);
            }
        }
    }
    MaskAssignment {
        layer: graph.layer.clone(),
        masks,
    }
}

/// Rewrites the masks of every shape on the assignment's layer.
pub fn apply_colors(layout: &FlatLayout, assignment: &MaskAssignment) -> Result<FlatLayout, VerifyError> {
    let Some(layer) = layout.layer_id(&assignment.layer) else {
        return Ok(layout.clone());
    };
    if let Some(s) = layout
        .shapes_on(layer)
        .find(|s| !assignment.masks.contains_key(&s.id))
    {
        return Err(VerifyError::IncompleteAssignment {
            layer: assignment.layer.clone(),
            shape: s.id,
        });
    }
    Ok(layout.with_masks(|s| {
        if s.layer == layer {
            assignment.masks[&s.id]
        } else {
            s.mask
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::FlatShape;
    use crate::libio::parse_rules;

    fn rule() -> LayerRule {
        parse_rules(
            "row_height = 576\nsite_width = 50\n[[layer]]\nname = \"M1\"\nmin_width = 32\nspacing_any_mask = 32\nspacing_same_mask = 64\ndpt = true\n",
        )
        .unwrap()
        .layers
        .remove(0)
    }

    fn layout(rects: &[Rect]) -> FlatLayout {
        let shapes = rects
            .iter()
            .map(|&rect| FlatShape {
                id: 0,
                layer: 0,
                mask: Mask::None,
                rect,
                instance: 0,
            })
            .collect();
        FlatLayout::from_shapes(Rect::new(0, 0, 2000, 2000), vec!["M1".into()], vec!["u".into()], shapes, 64)
    }

    #[test]
    fn path_colors_alternate() {
        let g = ConflictGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let d = decompose(&g);
        assert_eq!(d.node_masks, vec![Some(Mask::Mask1), Some(Mask::Mask2), Some(Mask::Mask1)]);
    }

    #[test]
    fn triangle_is_odd() {
        let g = ConflictGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        let d = decompose(&g);
        assert_eq!(d.odd_cycles.len(), 1);
        assert_eq!(d.odd_cycles[0].len(), 3);
        assert!(color_decompose(&g).is_err());
    }

    #[test]
    fn shortest_witness_in_component() {
        // A 5-cycle sharing node 0 with a triangle.
        let g = ConflictGraph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 5), (5, 6), (6, 0)]);
        let d = decompose(&g);
        assert_eq!(d.odd_cycles.len(), 1);
        let mut c = d.odd_cycles[0].clone();
        c.sort_unstable();
        assert_eq!(c, vec![0, 5, 6]);
    }

    #[test]
    fn triangle_of_bars() {
        // Two bars side by side with a third bar above both.
        let l = layout(&[
            Rect::new(0, 0, 32, 300),
            Rect::new(80, 0, 112, 300),
            Rect::new(0, 340, 112, 372),
        ]);
        let g = build_conflict_graph(&l, 0, &rule());
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 2)]);
        let v = color_decompose(&g).unwrap_err();
        assert_eq!(v[0].kind, ViolationKind::OddCycle);
        assert_eq!(v[0].bbox, Rect::new(0, 0, 112, 372));
    }

    #[test]
    fn touching_shapes_merge() {
        let l = layout(&[
            Rect::new(0, 0, 32, 300),
            Rect::new(32, 0, 64, 300),
            Rect::new(104, 0, 136, 300),
        ]);
        let g = build_conflict_graph(&l, 0, &rule());
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, vec![(0, 1)]);
        let l = layout(&[Rect::new(0, 0, 32, 300)]);
        let g = build_conflict_graph(&l, 0, &rule());
        assert_eq!((g.nodes.len(), g.edges.len()), (1, 0));
    }

    #[test]
    fn apply_requires_full_assignment() {
        let l = layout(&[Rect::new(0, 0, 32, 300), Rect::new(80, 0, 112, 300)]);
        let g = build_conflict_graph(&l, 0, &rule());
        let a = color_decompose(&g).unwrap();
        let colored = apply_colors(&l, &a).unwrap();
        assert_eq!(colored.shapes[0].mask, Mask::Mask1);
        assert_eq!(colored.shapes[1].mask, Mask::Mask2);
        assert_eq!(build_conflict_graph(&colored, 0, &rule()), g);
        let mut partial = a.clone();
        partial.masks.remove(&1);
        assert_eq!(
            apply_colors(&l, &partial).unwrap_err(),
            VerifyError::IncompleteAssignment { layer: "M1".into(), shape: 1 }
        );
    }
}
