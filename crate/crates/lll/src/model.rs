//! Core problem model: variables, assignments, events, instances and the
//! two dependency graphs (support-intersection and lopsided).

use std::sync::Arc;

use thiserror::Error;

pub type VarId = usize;
pub type EventId = usize;

/// Violation predicate over the restriction of an assignment to the event's
/// support, in sorted support order.
pub type Predicate = Arc<dyn Fn(&[usize]) -> bool + Send + Sync>;

/// Exact conditional violation probability given a partial evaluation of the
/// support (sorted support order, `None` = still random).
pub type ConditionalProb = Arc<dyn Fn(&[Option<usize>]) -> f64 + Send + Sync>;

/// Product-of-domain-sizes cap for the generic enumeration oracles.
pub const ENUMERATION_GUARD: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable {var}: domain_size must be >= 1")]
    EmptyDomain { var: VarId },
    #[error("variable {var}: weight vector has length {got}, expected {expected}")]
    WeightLength { var: VarId, got: usize, expected: usize },
    #[error("variable {var}: weights must be non-negative and sum to 1 (sum = {sum})")]
    BadWeights { var: VarId, sum: f64 },
    #[error("event {event}: support references unknown variable {var}")]
    UnknownVariable { event: EventId, var: VarId },
    #[error("event {event}: prob_bound {bound} outside [0, 1]")]
    BadProbBound { event: EventId, bound: f64 },
    #[error("event {event}: empty support with constant-true predicate can never be avoided")]
    UnavoidableEvent { event: EventId },
    #[error("ids must be dense 0..len, found {found} at position {pos}")]
    NonDenseIds { found: usize, pos: usize },
    #[error("enumeration limit exceeded: domain product {product} > {limit}")]
    EnumerationLimitExceeded { product: u64, limit: u64 },
    #[error("supplied lopsided edge ({a}, {b}) joins events with disjoint supports")]
    SuppliedEdgeNotSubset { a: EventId, b: EventId },
    #[error("assignment length {got} does not match variable count {expected}")]
    AssignmentLength { got: usize, expected: usize },
    #[error("assignment value {value} out of range for variable {var} (domain {domain})")]
    AssignmentValue { var: VarId, value: usize, domain: usize },
}

#[derive(Debug, Clone)]
pub struct VariableSpec {
    pub id: VarId,
    pub domain_size: usize,
    /// Per-value probabilities; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

impl VariableSpec {
    pub fn uniform(id: VarId, domain_size: usize) -> Self {
        VariableSpec { id, domain_size, weights: None }
    }

    /// Probability of drawing `value`.
    pub fn weight(&self, value: usize) -> f64 {
        match &self.weights {
            Some(w) => w[value],
            None => 1.0 / self.domain_size as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<usize>,
}

impl Assignment {
    pub fn new(values: Vec<usize>) -> Self {
        Assignment { values }
    }
}

#[derive(Clone)]
pub struct EventSpec {
    pub id: EventId,
    /// vbl(A), sorted and deduplicated.
    pub support: Vec<VarId>,
    /// Upper bound on the violation probability under the product distribution.
    pub prob_bound: f64,
    pub predicate: Predicate,
    /// Required by the deterministic solver only.
    pub conditional_prob: Option<ConditionalProb>,
}

impl EventSpec {
    pub fn new(id: EventId, mut support: Vec<VarId>, prob_bound: f64, predicate: Predicate) -> Self {
        support.sort_unstable();
        support.dedup();
        EventSpec { id, support, prob_bound, predicate, conditional_prob: None }
    }

    pub fn with_conditional(mut self, cond: ConditionalProb) -> Self {
        self.conditional_prob = Some(cond);
        self
    }
}

impl std::fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventSpec")
            .field("id", &self.id)
            .field("support", &self.support)
            .field("prob_bound", &self.prob_bound)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    variables: Vec<VariableSpec>,
    events: Vec<EventSpec>,
    /// For each variable, the sorted list of events whose support contains it.
    var_to_events: Vec<Vec<EventId>>,
}

impl ProblemInstance {
    pub fn new(variables: Vec<VariableSpec>, events: Vec<EventSpec>) -> Result<Self, ModelError> {
        for (pos, v) in variables.iter().enumerate() {
            if v.id != pos {
                return Err(ModelError::NonDenseIds { found: v.id, pos });
            }
            if v.domain_size == 0 {
                return Err(ModelError::EmptyDomain { var: v.id });
            }
            if let Some(w) = &v.weights {
                if w.len() != v.domain_size {
                    return Err(ModelError::WeightLength {
                        var: v.id,
                        got: w.len(),
                        expected: v.domain_size,
                    });
                }
                let sum: f64 = w.iter().sum();
                if w.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(ModelError::BadWeights { var: v.id, sum });
                }
            }
        }
        for (pos, e) in events.iter().enumerate() {
            if e.id != pos {
                return Err(ModelError::NonDenseIds { found: e.id, pos });
            }
            if !(0.0..=1.0).contains(&e.prob_bound) {
                return Err(ModelError::BadProbBound { event: e.id, bound: e.prob_bound });
            }
            for &v in &e.support {
                if v >= variables.len() {
                    return Err(ModelError::UnknownVariable { event: e.id, var: v });
                }
            }
            if e.support.is_empty() && (e.predicate)(&[]) {
                return Err(ModelError::UnavoidableEvent { event: e.id });
            }
        }
        let mut var_to_events = vec![Vec::new(); variables.len()];
        for e in &events {
            for &v in &e.support {
                var_to_events[v].push(e.id);
            }
        }
        Ok(ProblemInstance { variables, events, var_to_events })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn events(&self) -> &[EventSpec] {
        &self.events
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Events whose support contains the given variable, sorted by id.
    pub fn events_on_var(&self, var: VarId) -> &[EventId] {
        &self.var_to_events[var]
    }

    /// s = m + n + sum of domain sizes.
    pub fn problem_size(&self) -> usize {
        self.num_events()
            + self.num_vars()
            + self.variables.iter().map(|v| v.domain_size).sum::<usize>()
    }

    pub fn validate_assignment(&self, a: &Assignment) -> Result<(), ModelError> {
        if a.values.len() != self.num_vars() {
            return Err(ModelError::AssignmentLength {
                got: a.values.len(),
                expected: self.num_vars(),
            });
        }
        for (var, &value) in a.values.iter().enumerate() {
            let d = self.variables[var].domain_size;
            if value >= d {
                return Err(ModelError::AssignmentValue { var, value, domain: d });
            }
        }
        Ok(())
    }

    /// Evaluates the event's predicate on the restriction of `assignment` to
    /// its support.
    pub fn is_violated(&self, event: EventId, assignment: &Assignment) -> bool {
        let e = &self.events[event];
        let restricted: Vec<usize> = e.support.iter().map(|&v| assignment.values[v]).collect();
        (e.predicate)(&restricted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Standard,
    Lopsided,
}

#[derive(Debug, Clone)]
pub struct DependencyGraph {
    kind: GraphKind,
    /// Sorted neighbor lists, one per event.
    adjacency: Vec<Vec<EventId>>,
    max_degree: usize,
}

impl DependencyGraph {
    fn from_adjacency(kind: GraphKind, adjacency: Vec<Vec<EventId>>) -> Self {
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        DependencyGraph { kind, adjacency, max_degree }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn num_events(&self) -> usize {
        self.adjacency.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn neighbors(&self, a: EventId) -> &[EventId] {
        &self.adjacency[a]
    }

    pub fn is_edge(&self, a: EventId, b: EventId) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Membership in the inclusive neighborhood of `a`.
    pub fn in_inclusive_neighborhood(&self, b: EventId, a: EventId) -> bool {
        a == b || self.is_edge(a, b)
    }

    /// Inclusive neighborhood of `a` in ascending id order.
    pub fn inclusive_neighbors(&self, a: EventId) -> Vec<EventId> {
        let mut out = self.adjacency[a].clone();
        let pos = out.partition_point(|&b| b < a);
        out.insert(pos, a);
        out
    }
}

fn supports_intersect(a: &[VarId], b: &[VarId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Builds the standard dependency graph: events adjacent iff distinct with
/// intersecting supports.
pub fn build_dependency_graph(instance: &ProblemInstance) -> DependencyGraph {
    let m = instance.num_events();
    let mut adjacency = vec![Vec::new(); m];
    for a in 0..m {
        for b in (a + 1)..m {
            if supports_intersect(&instance.events()[a].support, &instance.events()[b].support) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }
    DependencyGraph::from_adjacency(GraphKind::Standard, adjacency)
}

/// Iterates all evaluations of the given variables, calling `f` with the
/// value tuple (parallel to `vars`). Stops early when `f` returns false.
pub(crate) fn for_each_evaluation<F>(
    instance: &ProblemInstance,
    vars: &[VarId],
    mut f: F,
) -> Result<(), ModelError>
where
    F: FnMut(&[usize]) -> bool,
{
    let mut product: u64 = 1;
    for &v in vars {
        product = product.saturating_mul(instance.variables()[v].domain_size as u64);
        if product > ENUMERATION_GUARD {
            return Err(ModelError::EnumerationLimitExceeded {
                product,
                limit: ENUMERATION_GUARD,
            });
        }
    }
    let mut values = vec![0usize; vars.len()];
    loop {
        if !f(&values) {
            return Ok(());
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == vars.len() {
                return Ok(());
            }
            values[i] += 1;
            if values[i] < instance.variables()[vars[i]].domain_size {
                break;
            }
            values[i] = 0;
            i += 1;
        }
    }
}

/// Decides whether events `a` and `b` are lopsidependent by exhaustive search
/// over evaluation pairs that agree outside the shared support.
///
/// True iff there are evaluations f, g differing only on vbl(a) ∩ vbl(b) with
/// f violating a, g violating b, and f not violating b or g not violating a.
pub fn detect_lopsidependent(
    instance: &ProblemInstance,
    a: EventId,
    b: EventId,
) -> Result<bool, ModelError> {
    assert_ne!(a, b, "lopsidependence is defined for distinct events");
    let sa = &instance.events()[a].support;
    let sb = &instance.events()[b].support;
    if !supports_intersect(sa, sb) {
        return Ok(false);
    }
    let shared: Vec<VarId> = sa.iter().copied().filter(|v| sb.binary_search(v).is_ok()).collect();
    let mut union: Vec<VarId> = sa.iter().chain(sb.iter()).copied().collect();
    union.sort_unstable();
    union.dedup();
    let outside: Vec<VarId> = union.iter().copied().filter(|v| !shared.contains(v)).collect();

    let mut product: u64 = 1;
    for &v in union.iter() {
        product = product.saturating_mul(instance.variables()[v].domain_size as u64);
        if product > ENUMERATION_GUARD {
            return Err(ModelError::EnumerationLimitExceeded {
                product,
                limit: ENUMERATION_GUARD,
            });
        }
    }

    let eval_event = |event: EventId, outer: &[usize], inner: &[usize]| -> bool {
        let support = &instance.events()[event].support;
        let restricted: Vec<usize> = support
            .iter()
            .map(|v| {
                if let Some(i) = shared.iter().position(|s| s == v) {
                    inner[i]
                } else {
                    let i = outside.iter().position(|s| s == v).unwrap();
                    outer[i]
                }
            })
            .collect();
        (instance.events()[event].predicate)(&restricted)
    };

    let mut found = false;
    for_each_evaluation(instance, &outside, |outer| {
        let mut local_found = false;
        // f and g share `outer` and differ only on `shared`
        let _ = for_each_evaluation(instance, &shared, |inner_f| {
            let f_viol_a = eval_event(a, outer, inner_f);
            if !f_viol_a {
                return true;
            }
            let f_viol_b = eval_event(b, outer, inner_f);
            let _ = for_each_evaluation(instance, &shared, |inner_g| {
                let g_viol_b = eval_event(b, outer, inner_g);
                if !g_viol_b {
                    return true;
                }
                let g_viol_a = eval_event(a, outer, inner_g);
                if !f_viol_b || !g_viol_a {
                    local_found = true;
                    return false;
                }
                true
            });
            !local_found
        });
        if local_found {
            found = true;
            return false;
        }
        true
    })?;
    Ok(found)
}

/// Builds the lopsidependency graph, either from a supplied edge list (each
/// edge must join support-intersecting events) or by running
/// [`detect_lopsidependent`] on every intersecting pair.
pub fn build_lopsidependency_graph(
    instance: &ProblemInstance,
    supplied: Option<&[(EventId, EventId)]>,
) -> Result<DependencyGraph, ModelError> {
    let m = instance.num_events();
    let mut adjacency = vec![Vec::new(); m];
    match supplied {
        Some(edges) => {
            for &(a, b) in edges {
                if !supports_intersect(
                    &instance.events()[a].support,
                    &instance.events()[b].support,
                ) {
                    return Err(ModelError::SuppliedEdgeNotSubset { a, b });
                }
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        None => {
            for a in 0..m {
                for b in (a + 1)..m {
                    if supports_intersect(
                        &instance.events()[a].support,
                        &instance.events()[b].support,
                    ) && detect_lopsidependent(instance, a, b)?
                    {
                        adjacency[a].push(b);
                        adjacency[b].push(a);
                    }
                }
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }
    Ok(DependencyGraph::from_adjacency(GraphKind::Lopsided, adjacency))
}

/// All event ids violated under the assignment, ascending.
pub fn violated_events(instance: &ProblemInstance, assignment: &Assignment) -> Vec<EventId> {
    (0..instance.num_events())
        .filter(|&e| instance.is_violated(e, assignment))
        .collect()
}

/// Exact violation probability under the product distribution, by exhaustive
/// enumeration of the support. Desk-scale oracle for validating prob_bound.
pub fn exact_probability(instance: &ProblemInstance, event: EventId) -> Result<f64, ModelError> {
    let support = instance.events()[event].support.clone();
    let mut total = 0.0;
    for_each_evaluation(instance, &support, |values| {
        if (instance.events()[event].predicate)(values) {
            let mut p = 1.0;
            for (i, &v) in support.iter().enumerate() {
                p *= instance.variables()[v].weight(values[i]);
            }
            total += p;
        }
        true
    })?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_vars(n: usize) -> Vec<VariableSpec> {
        (0..n).map(|i| VariableSpec::uniform(i, 2)).collect()
    }

    /// Clause event: violated iff every listed literal is false. Signs are
    /// parallel to the sorted support.
    fn clause_event(id: EventId, lits: &[(VarId, bool)]) -> EventSpec {
        let mut lits = lits.to_vec();
        lits.sort_by_key(|&(v, _)| v);
        let support: Vec<VarId> = lits.iter().map(|&(v, _)| v).collect();
        let signs: Vec<bool> = lits.iter().map(|&(_, s)| s).collect();
        let prob = 0.5f64.powi(lits.len() as i32);
        EventSpec::new(
            id,
            support,
            prob,
            Arc::new(move |vals: &[usize]| {
                vals.iter().zip(&signs).all(|(&v, &pos)| (v == 1) != pos)
            }),
        )
    }

    fn instance_from_clauses(n: usize, clauses: &[&[(VarId, bool)]]) -> ProblemInstance {
        let events = clauses
            .iter()
            .enumerate()
            .map(|(i, c)| clause_event(i, c))
            .collect();
        ProblemInstance::new(coin_vars(n), events).unwrap()
    }

    #[test]
    fn disjoint_supports_no_edge() {
        let inst = instance_from_clauses(4, &[&[(0, true), (1, true)], &[(2, true), (3, true)]]);
        let g = build_dependency_graph(&inst);
        assert!(g.neighbors(0).is_empty());
        assert!(g.neighbors(1).is_empty());
    }

    #[test]
    fn chain_edges_only() {
        let inst = instance_from_clauses(
            4,
            &[
                &[(0, true), (1, true)],
                &[(1, true), (2, true)],
                &[(3, true)],
            ],
        );
        let g = build_dependency_graph(&inst);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert!(g.neighbors(2).is_empty());
    }

    #[test]
    fn shared_variable_clique() {
        // k events all containing variable 0: complete graph, degree k-1.
        let k = 5;
        let clauses: Vec<Vec<(VarId, bool)>> =
            (0..k).map(|i| vec![(0, true), (i + 1, true)]).collect();
        let refs: Vec<&[(VarId, bool)]> = clauses.iter().map(|c| c.as_slice()).collect();
        let inst = instance_from_clauses(k + 1, &refs);
        let g = build_dependency_graph(&inst);
        // oracle: pairwise intersection enumeration
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    assert!(g.is_edge(a, b));
                }
            }
        }
        assert_eq!(g.max_degree(), k - 1);
    }

    #[test]
    fn lopsidependent_conflict_pair() {
        // (x1 v x2), (!x1 v x2): complementary literal on x1
        let inst = instance_from_clauses(2, &[&[(0, true), (1, true)], &[(0, false), (1, true)]]);
        assert!(detect_lopsidependent(&inst, 0, 1).unwrap());
    }

    #[test]
    fn lopsidependent_shared_literal_negative() {
        // (x1 v x2), (x1 v x3): shared literal, no complement
        let inst = instance_from_clauses(3, &[&[(0, true), (1, true)], &[(0, true), (2, true)]]);
        assert!(!detect_lopsidependent(&inst, 0, 1).unwrap());
    }

    #[test]
    fn lopsidependent_disjoint_false() {
        let inst = instance_from_clauses(4, &[&[(0, true), (1, true)], &[(2, true), (3, true)]]);
        assert!(!detect_lopsidependent(&inst, 0, 1).unwrap());
    }

    #[test]
    fn lopsided_graph_subset_of_standard() {
        let inst = instance_from_clauses(
            3,
            &[
                &[(0, true), (1, true)],
                &[(0, false), (2, true)],
                &[(0, true), (2, true)],
            ],
        );
        let std_g = build_dependency_graph(&inst);
        let lop = build_lopsidependency_graph(&inst, None).unwrap();
        for a in 0..inst.num_events() {
            for &b in lop.neighbors(a) {
                assert!(std_g.is_edge(a, b));
            }
        }
        // conflict pairs: (0,1) via x0; (1,2) via x0
        assert!(lop.is_edge(0, 1));
        assert!(lop.is_edge(1, 2));
        assert!(!lop.is_edge(0, 2));
    }

    #[test]
    fn supplied_edge_must_intersect() {
        let inst = instance_from_clauses(4, &[&[(0, true), (1, true)], &[(2, true), (3, true)]]);
        let err = build_lopsidependency_graph(&inst, Some(&[(0, 1)])).unwrap_err();
        assert!(matches!(err, ModelError::SuppliedEdgeNotSubset { .. }));
    }

    #[test]
    fn violated_events_matches_full_scan() {
        let inst = instance_from_clauses(
            3,
            &[
                &[(0, true), (1, true)],
                &[(1, false), (2, true)],
                &[(0, false)],
            ],
        );
        for bits in 0..8usize {
            let a = Assignment::new(vec![bits & 1, (bits >> 1) & 1, (bits >> 2) & 1]);
            let got = violated_events(&inst, &a);
            let expect: Vec<EventId> = (0..inst.num_events())
                .filter(|&e| inst.is_violated(e, &a))
                .collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn clause_violation_basics() {
        let inst = instance_from_clauses(2, &[&[(0, true), (1, true)]]);
        assert_eq!(violated_events(&inst, &Assignment::new(vec![0, 0])), vec![0]);
        assert!(violated_events(&inst, &Assignment::new(vec![1, 0])).is_empty());
    }

    #[test]
    fn unavoidable_event_rejected() {
        let vars = coin_vars(1);
        let e = EventSpec::new(0, vec![], 1.0, Arc::new(|_: &[usize]| true));
        assert!(matches!(
            ProblemInstance::new(vars, vec![e]),
            Err(ModelError::UnavoidableEvent { .. })
        ));
    }

    #[test]
    fn exact_probability_matches_bound_for_clauses() {
        let inst = instance_from_clauses(3, &[&[(0, true), (1, false), (2, true)]]);
        let p = exact_probability(&inst, 0).unwrap();
        assert!((p - 0.125).abs() < 1e-12);
        assert!(inst.events()[0].prob_bound >= p - 1e-12);
    }

    #[test]
    fn enumeration_guard_trips() {
        let vars: Vec<VariableSpec> = (0..3).map(|i| VariableSpec::uniform(i, 256)).collect();
        let e0 = EventSpec::new(0, vec![0, 1, 2], 1e-6, Arc::new(|v: &[usize]| v.iter().all(|&x| x == 0)));
        let e1 = EventSpec::new(1, vec![0, 1, 2], 1e-6, Arc::new(|v: &[usize]| v.iter().all(|&x| x == 1)));
        let inst = ProblemInstance::new(vars, vec![e0, e1]).unwrap();
        assert!(matches!(
            detect_lopsidependent(&inst, 0, 1),
            Err(ModelError::EnumerationLimitExceeded { .. })
        ));
    }

    #[test]
    fn predicate_locality_brute_force() {
        // flipping a variable outside the support never changes violation
        let inst = instance_from_clauses(3, &[&[(0, true), (1, true)]]);
        for bits in 0..8usize {
            let mut a = Assignment::new(vec![bits & 1, (bits >> 1) & 1, (bits >> 2) & 1]);
            let before = inst.is_violated(0, &a);
            a.values[2] ^= 1;
            assert_eq!(before, inst.is_violated(0, &a));
        }
    }
}
