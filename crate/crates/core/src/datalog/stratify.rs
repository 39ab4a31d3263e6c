use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{DatalogError, Literal, Rule};

/// Partitions `rules` into strata so that every negated dependency points to
/// a strictly lower stratum. Rules keep their program order inside a stratum
/// and empty strata are dropped.
pub fn stratify(rules: &[Rule]) -> Result<Vec<Vec<Rule>>, DatalogError> {
    Ok(stratify_indices(rules)?
        .into_iter()
        .map(|s| s.into_iter().map(|i| rules[i].clone()).collect())
        .collect())
}

pub(crate) fn stratify_indices(rules: &[Rule]) -> Result<Vec<Vec<usize>>, DatalogError> {
    fn node<'a>(
        graph: &mut DiGraph<&'a str, bool>,
        nodes: &mut BTreeMap<&'a str, NodeIndex>,
        p: &'a str,
    ) -> NodeIndex {
        *nodes.entry(p).or_insert_with(|| graph.add_node(p))
    }
    let mut graph = DiGraph::<&str, bool>::new();
    let mut nodes = BTreeMap::<&str, NodeIndex>::new();
    // Edges run body -> head; the weight records negation.
    let mut edges = Vec::new();
    for rule in rules {
        let head = node(&mut graph, &mut nodes, rule.head().predicate.as_str());
        for lit in rule.body() {
            let (atom, negated) = match lit {
                Literal::Pos(a) => (a, false),
                Literal::Neg(a) => (a, true),
                Literal::Cmp(_) => continue,
            };
            let dep = node(&mut graph, &mut nodes, atom.predicate.as_str());
            graph.add_edge(dep, head, negated);
            edges.push((dep, head, negated));
        }
    }

    for scc in tarjan_scc(&graph) {
        let negative_inside = edges
            .iter()
            .any(|&(from, to, neg)| neg && scc.contains(&from) && scc.contains(&to));
        if negative_inside {
            let mut cycle: Vec<String> = scc.iter().map(|&n| graph[n].to_string()).collect();
            cycle.sort();
            return Err(DatalogError::CyclicNegation(cycle));
        }
    }

    // Longest-path levels; terminates because no cycle carries a negative edge.
    let mut level = vec![0usize; graph.node_count()];
    loop {
        let mut changed = false;
        for &(from, to, neg) in &edges {
            let want = level[from.index()] + usize::from(neg);
            if level[to.index()] < want {
                level[to.index()] = want;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut by_level = BTreeMap::<usize, Vec<usize>>::new();
    for (i, rule) in rules.iter().enumerate() {
        let head = nodes[rule.head().predicate.as_str()];
        by_level.entry(level[head.index()]).or_default().push(i);
    }
    Ok(by_level.into_values().collect())
}
