//! Witness trees: reconstruction from execution logs, the replay check
//! against a random source, the branching-process sampler with its exact
//! tree probability, and bounded-size enumeration.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::criteria::XAssignment;
use crate::model::{DependencyGraph, EventId, ProblemInstance, VarId};
use crate::sample::{SampleError, SampleSource};
use crate::sequential::ExecutionLog;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("tree is not proper: siblings share a label")]
    ImproperTree,
    #[error("enumeration would exceed the cap of {cap} trees")]
    ExplosionGuard { cap: usize },
}

#[derive(Debug, Clone)]
struct Node {
    label: EventId,
    parent: Option<usize>,
    depth: usize,
    /// Log step at which the vertex was attached during reconstruction;
    /// `None` for sampled or enumerated trees.
    attach_step: Option<usize>,
}

/// A rooted tree labelled with event ids; node 0 is the root.
#[derive(Debug, Clone)]
pub struct WitnessTree {
    nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
}

impl WitnessTree {
    fn singleton(label: EventId, attach_step: Option<usize>) -> Self {
        WitnessTree {
            nodes: vec![Node { label, parent: None, depth: 0, attach_step }],
            children: vec![Vec::new()],
        }
    }

    fn attach(&mut self, parent: usize, label: EventId, attach_step: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label,
            parent: Some(parent),
            depth: self.nodes[parent].depth + 1,
            attach_step,
        });
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root_label(&self) -> EventId {
        self.nodes[0].label
    }

    pub fn label(&self, v: usize) -> EventId {
        self.nodes[v].label
    }

    pub fn depth_of(&self, v: usize) -> usize {
        self.nodes[v].depth
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn attach_step(&self, v: usize) -> Option<usize> {
        self.nodes[v].attach_step
    }

    /// Maximum vertex depth.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Vertex indices grouped by depth, level 0 first.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![Vec::new(); self.depth() + 1];
        for (i, n) in self.nodes.iter().enumerate() {
            levels[n.depth].push(i);
        }
        levels
    }

    /// Parenthesized text form with children ordered by label, e.g. `0(1(0),2)`.
    pub fn to_text(&self) -> String {
        fn rec(tree: &WitnessTree, v: usize, out: &mut String) {
            let _ = write!(out, "{}", tree.nodes[v].label);
            let mut kids: Vec<usize> = tree.children[v].to_vec();
            kids.sort_by_key(|&c| tree.nodes[c].label);
            if !kids.is_empty() {
                out.push('(');
                for (i, c) in kids.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    rec(tree, *c, out);
                }
                out.push(')');
            }
        }
        let mut out = String::new();
        rec(self, 0, &mut out);
        out
    }
}

/// Reconstructs the witness tree justifying log step `step` (0-based).
///
/// The root carries the event at `step`; scanning earlier steps backwards,
/// each event whose label lies in some vertex's inclusive neighborhood is
/// attached under a deepest such vertex (ties to the vertex attached
/// earliest), all others are skipped. The graph kind decides whether the
/// standard or the lopsided inclusive neighborhood is used.
pub fn build_witness_tree(
    log: &ExecutionLog,
    step: usize,
    graph: &DependencyGraph,
) -> WitnessTree {
    assert!(step < log.steps.len(), "step {step} out of log of length {}", log.steps.len());
    let mut tree = WitnessTree::singleton(log.steps[step], Some(step));
    for i in (0..step).rev() {
        let event = log.steps[i];
        let mut best: Option<usize> = None;
        for v in 0..tree.len() {
            if graph.in_inclusive_neighborhood(event, tree.nodes[v].label) {
                let better = match best {
                    None => true,
                    // nodes are pushed in attach order, so the earlier-attached
                    // candidate at equal depth has the smaller index
                    Some(b) => tree.nodes[v].depth > tree.nodes[b].depth,
                };
                if better {
                    best = Some(v);
                }
            }
        }
        if let Some(parent) = best {
            tree.attach(parent, event, Some(i));
        }
    }
    tree
}

/// Distinct labels among the children of every vertex.
pub fn is_proper(tree: &WitnessTree) -> bool {
    for v in 0..tree.len() {
        let kids = tree.children(v);
        for i in 0..kids.len() {
            for j in (i + 1)..kids.len() {
                if tree.label(kids[i]) == tree.label(kids[j]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Replays the tree against a sample source: visits vertices in decreasing
/// depth and evaluates each label on the samples the coupled solver run would
/// have seen. The sample index for variable P at vertex v is the number of
/// strictly deeper vertices whose label's support contains P.
pub fn tree_check<S: SampleSource + ?Sized>(
    tree: &WitnessTree,
    instance: &ProblemInstance,
    source: &S,
) -> Result<bool, SampleError> {
    for v in 0..tree.len() {
        let event = &instance.events()[tree.label(v)];
        let mut values = Vec::with_capacity(event.support.len());
        for &var in &event.support {
            let index = deeper_count(tree, instance, v, var);
            values.push(source.peek_at(var, index)?);
        }
        if !(event.predicate)(&values) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn deeper_count(tree: &WitnessTree, instance: &ProblemInstance, v: usize, var: VarId) -> usize {
    let d = tree.depth_of(v);
    (0..tree.len())
        .filter(|&w| {
            tree.depth_of(w) > d
                && instance.events()[tree.label(w)].support.binary_search(&var).is_ok()
        })
        .count()
}

#[derive(Debug, Clone)]
pub enum GwOutcome {
    Tree(WitnessTree),
    /// The process was still alive past the depth limit.
    Overflow,
}

pub const GW_DEFAULT_DEPTH_LIMIT: usize = 64;

/// Multitype branching process: starting from a root labelled `root_event`,
/// each vertex labelled A independently births a child labelled B with
/// probability x(B), for every B in the inclusive neighborhood of A.
pub fn gw_sample<R: Rng>(
    root_event: EventId,
    x: &XAssignment,
    graph: &DependencyGraph,
    depth_limit: usize,
    rng: &mut R,
) -> GwOutcome {
    let mut tree = WitnessTree::singleton(root_event, None);
    let mut frontier = vec![0usize];
    let mut depth = 0usize;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            let label = tree.label(v);
            for b in graph.inclusive_neighbors(label) {
                if rng.gen::<f64>() < x.get(b) {
                    if depth + 1 > depth_limit {
                        return GwOutcome::Overflow;
                    }
                    next.push(tree.attach(v, b, None));
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    GwOutcome::Tree(tree)
}

/// Exact probability that the branching process yields this tree:
/// ((1 - x(A)) / x(A)) times the product over vertices of x'([v]), with
/// x'(B) = x(B) times the product over neighbors C of (1 - x(C)).
pub fn gw_tree_probability(
    tree: &WitnessTree,
    x: &XAssignment,
    graph: &DependencyGraph,
) -> Result<f64, WitnessError> {
    if !is_proper(tree) {
        return Err(WitnessError::ImproperTree);
    }
    let root = tree.root_label();
    let mut p = (1.0 - x.get(root)) / x.get(root);
    for v in 0..tree.len() {
        let b = tree.label(v);
        let mut xp = x.get(b);
        for &c in graph.neighbors(b) {
            xp *= 1.0 - x.get(c);
        }
        p *= xp;
    }
    Ok(p)
}

/// Nested canonical shape used during enumeration.
#[derive(Debug, Clone)]
struct Shape {
    label: EventId,
    children: Vec<Shape>,
}

impl Shape {
    fn to_tree(&self) -> WitnessTree {
        let mut tree = WitnessTree::singleton(self.label, None);
        let mut queue: std::collections::VecDeque<(usize, &Shape)> =
            std::collections::VecDeque::new();
        queue.push_back((0, self));
        while let Some((node, shape)) = queue.pop_front() {
            for child in &shape.children {
                let id = tree.attach(node, child.label, None);
                queue.push_back((id, child));
            }
        }
        tree
    }
}

struct Enumerator<'g> {
    graph: &'g DependencyGraph,
    memo: std::collections::HashMap<(EventId, usize), std::rc::Rc<Vec<Shape>>>,
    cap: usize,
    produced: usize,
}

impl<'g> Enumerator<'g> {
    fn budget(&mut self, n: usize) -> Result<(), WitnessError> {
        self.produced += n;
        if self.produced > self.cap {
            return Err(WitnessError::ExplosionGuard { cap: self.cap });
        }
        Ok(())
    }

    /// All proper shapes rooted at `label` with exactly `size` vertices,
    /// children in ascending label order.
    fn rooted(&mut self, label: EventId, size: usize) -> Result<std::rc::Rc<Vec<Shape>>, WitnessError> {
        if let Some(cached) = self.memo.get(&(label, size)) {
            return Ok(cached.clone());
        }
        let mut shapes = Vec::new();
        if size == 1 {
            shapes.push(Shape { label, children: Vec::new() });
        } else {
            let candidates = self.graph.inclusive_neighbors(label);
            let mut current: Vec<Shape> = Vec::new();
            self.compose(label, &candidates, 0, size - 1, &mut current, &mut shapes)?;
        }
        self.budget(shapes.len())?;
        let rc = std::rc::Rc::new(shapes);
        self.memo.insert((label, size), rc.clone());
        Ok(rc)
    }

    /// Distributes `remaining` vertices over the candidate labels starting at
    /// `from`; each candidate is either absent or carries a subtree of at
    /// least one vertex.
    fn compose(
        &mut self,
        label: EventId,
        candidates: &[EventId],
        from: usize,
        remaining: usize,
        current: &mut Vec<Shape>,
        out: &mut Vec<Shape>,
    ) -> Result<(), WitnessError> {
        if remaining == 0 {
            out.push(Shape { label, children: current.clone() });
            return Ok(());
        }
        if from == candidates.len() {
            return Ok(());
        }
        for sub_size in 1..=remaining {
            let subtrees = self.rooted(candidates[from], sub_size)?;
            for sub in subtrees.iter() {
                current.push(sub.clone());
                self.compose(label, candidates, from + 1, remaining - sub_size, current, out)?;
                current.pop();
            }
        }
        // candidate absent
        self.compose(label, candidates, from + 1, remaining, current, out)
    }
}

/// Enumerates every proper witness tree (any root label) with a vertex count
/// in `lo..=hi`, each exactly once, in a deterministic canonical order:
/// ascending size, then root label, then child-subtree composition order.
pub fn enumerate_trees(
    graph: &DependencyGraph,
    lo: usize,
    hi: usize,
    cap: usize,
) -> Result<Vec<WitnessTree>, WitnessError> {
    assert!(lo >= 1 && lo <= hi);
    let mut en = Enumerator {
        graph,
        memo: std::collections::HashMap::new(),
        cap,
        produced: 0,
    };
    let mut out = Vec::new();
    for size in lo..=hi {
        for root in 0..graph.num_events() {
            let shapes = en.rooted(root, size)?;
            if out.len() + shapes.len() > cap {
                return Err(WitnessError::ExplosionGuard { cap });
            }
            for s in shapes.iter() {
                out.push(s.to_tree());
            }
        }
    }
    Ok(out)
}

/// The size window that must contain a consistent tree whenever one of size
/// at least `u` exists, for dependency-graph degree at most `k`.
pub fn shrink_range_bound(u: usize, k: usize) -> (usize, usize) {
    assert!(u >= 1);
    (u, (k + 1) * u)
}
