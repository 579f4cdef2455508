//! Graph analysis of the superconducting subgraph: spanning forest, islands,
//! closure loops, and the branch–node incidence matrix.
//!
//! The forest is grown deterministically: start at ground, repeatedly attach
//! the first branch (inductors before junctions, then canonical id order)
//! with exactly one endpoint in the tree; when growth stalls, seed a new tree
//! at the lowest-ordered unreached node (that component's virtual ground).
//! Every superconducting branch left out of the forest closes exactly one
//! irreducible loop, reported as the branch plus the signed tree path back.

use crate::netlist::{BranchKind, Circuit};
use ndarray::Array2;
use serde::Serialize;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components over the extended node set: indices `0..n` are the
/// circuit's non-ground nodes in canonical order, index `n` is ground.
/// Component ids count up in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    /// Component id per extended node.
    pub of: Vec<usize>,
    pub count: usize,
    /// Component id of ground.
    pub ground: usize,
}

impl Components {
    /// Member extended-node lists, indexed by component id.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.count];
        for (node, &c) in self.of.iter().enumerate() {
            g[c].push(node);
        }
        g
    }
}

/// Components of the graph on `n_nodes + 1` extended nodes induced by
/// `edges` (pairs of extended indices).
pub fn components(n_nodes: usize, edges: impl Iterator<Item = (usize, usize)>) -> Components {
    let total = n_nodes + 1;
    let mut uf = UnionFind::new(total);
    for (a, b) in edges {
        uf.union(a, b);
    }
    let mut of = vec![usize::MAX; total];
    let mut count = 0;
    for v in 0..total {
        let r = uf.find(v);
        if of[r] == usize::MAX {
            of[r] = count;
            count += 1;
        }
        of[v] = of[r];
    }
    Components { ground: of[n_nodes], of, count }
}

/// One irreducible superconducting loop: a closure branch plus the signed
/// spanning-forest path that closes it.
#[derive(Debug, Clone, Serialize)]
pub struct ClosureLoop {
    /// Branch id of the closure (non-forest) branch.
    pub closure: String,
    /// Forest branches from the closure's `to` node back to its `from` node;
    /// the sign is +1 where the walk follows the branch's from→to direction.
    pub path: Vec<(String, i8)>,
    /// Integer fluxoid number threading this loop (default 0).
    pub fluxoid: i64,
}

#[derive(Debug, Clone)]
pub struct Topology {
    /// Inductive and junction branch ids in canonical order (rows of `r_bn`).
    pub galvanic: Vec<String>,
    /// Signed incidence of galvanic branches onto non-ground nodes:
    /// +1 at the from node, −1 at the to node, ground column omitted.
    pub r_bn: Array2<f64>,
    /// Spanning-forest branch ids, in the order they were attached.
    pub forest: Vec<String>,
    pub closures: Vec<ClosureLoop>,
    /// Extended-node groups of superconducting components with no path to
    /// ground (charge islands), ordered by lowest member node.
    pub islands: Vec<Vec<usize>>,
    /// Components of the inductor-only subgraph.
    pub inductor_comps: Components,
    /// Components of the full superconducting (inductor + junction) subgraph.
    pub galvanic_comps: Components,
    /// Per extended node: (parent node, branch id, +1 if the branch runs
    /// child→parent). Roots have `None`.
    parent: Vec<Option<(usize, usize, i8)>>,
    branch_ids: Vec<String>,
}

impl Topology {
    pub fn is_forest_branch(&self, id: &str) -> bool {
        self.forest.iter().any(|f| f == id)
    }

    /// Junction branches that ended up in the forest, canonical order.
    /// Each one seeds a Josephson mode.
    pub fn forest_junctions<'a>(&'a self, c: &'a Circuit) -> Vec<&'a str> {
        self.galvanic
            .iter()
            .filter(|id| {
                c.branch(id).map(|b| b.kind == BranchKind::Junction).unwrap_or(false)
                    && self.is_forest_branch(id)
            })
            .map(|s| s.as_str())
            .collect()
    }
}

/// Build the topology of a grammatically valid circuit.
pub fn build_topology(c: &Circuit) -> Topology {
    let n = c.nodes.len();
    let ground = n;
    let ext = |name: &str| -> usize {
        if name == crate::netlist::GROUND {
            ground
        } else {
            c.node_index(name).expect("endpoint must be a circuit node")
        }
    };

    let galvanic: Vec<_> = c.galvanic_branches().collect();
    let ids: Vec<String> = galvanic.iter().map(|b| b.id.clone()).collect();
    let ends: Vec<(usize, usize)> = galvanic.iter().map(|b| (ext(&b.from), ext(&b.to))).collect();

    let galvanic_comps = components(n, ends.iter().copied());
    let inductor_comps = components(
        n,
        galvanic
            .iter()
            .zip(&ends)
            .filter(|(b, _)| b.kind == BranchKind::Inductor)
            .map(|(_, &e)| e),
    );

    let mut islands: Vec<Vec<usize>> = galvanic_comps
        .groups()
        .into_iter()
        .enumerate()
        .filter(|(cid, _)| *cid != galvanic_comps.ground)
        .map(|(_, g)| g)
        .collect();
    islands.sort_by_key(|g| g[0]);

    // Priority order for forest growth: inductors first, then junctions,
    // canonical id order within each kind.
    let mut priority: Vec<usize> = (0..galvanic.len()).collect();
    priority.sort_by_key(|&i| match galvanic[i].kind {
        BranchKind::Inductor => 0usize,
        _ => 1,
    });

    let mut in_tree = vec![false; n + 1];
    let mut used = vec![false; galvanic.len()];
    let mut parent: Vec<Option<(usize, usize, i8)>> = vec![None; n + 1];
    let mut forest: Vec<String> = Vec::new();

    let grow = |seed: usize,
                    in_tree: &mut Vec<bool>,
                    used: &mut Vec<bool>,
                    parent: &mut Vec<Option<(usize, usize, i8)>>,
                    forest: &mut Vec<String>| {
        in_tree[seed] = true;
        loop {
            let mut attached = false;
            for &bi in &priority {
                if used[bi] {
                    continue;
                }
                let (f, t) = ends[bi];
                let (child, par, sign) = if in_tree[f] && !in_tree[t] {
                    (t, f, -1) // branch runs parent→child
                } else if in_tree[t] && !in_tree[f] {
                    (f, t, 1) // branch runs child→parent
                } else {
                    continue;
                };
                used[bi] = true;
                in_tree[child] = true;
                parent[child] = Some((par, bi, sign));
                forest.push(ids[bi].clone());
                attached = true;
                break;
            }
            if !attached {
                break;
            }
        }
    };

    grow(ground, &mut in_tree, &mut used, &mut parent, &mut forest);
    for v in 0..n {
        if !in_tree[v] {
            grow(v, &mut in_tree, &mut used, &mut parent, &mut forest);
        }
    }

    // Every unused galvanic branch closes one loop through the forest.
    let chain = |mut v: usize| -> Vec<usize> {
        let mut nodes = vec![v];
        while let Some((p, _, _)) = parent[v] {
            v = p;
            nodes.push(v);
        }
        nodes
    };
    let mut closures = Vec::new();
    for (bi, b) in galvanic.iter().enumerate() {
        if used[bi] {
            continue;
        }
        let (f, t) = ends[bi];
        let up_from = chain(f);
        let up_to = chain(t);
        let lca = *up_to
            .iter()
            .find(|v| up_from.contains(v))
            .expect("closure endpoints share a forest tree");
        let mut path: Vec<(String, i8)> = Vec::new();
        let mut v = t;
        while v != lca {
            let (p, bidx, sign) = parent[v].unwrap();
            path.push((ids[bidx].clone(), sign));
            v = p;
        }
        let mut down: Vec<(String, i8)> = Vec::new();
        v = f;
        while v != lca {
            let (p, bidx, sign) = parent[v].unwrap();
            down.push((ids[bidx].clone(), -sign));
            v = p;
        }
        down.reverse();
        path.extend(down);
        closures.push(ClosureLoop { closure: b.id.clone(), path, fluxoid: 0 });
    }

    let mut r_bn = Array2::zeros((galvanic.len(), n));
    for (bi, &(f, t)) in ends.iter().enumerate() {
        if f != ground {
            r_bn[[bi, f]] = 1.0;
        }
        if t != ground {
            r_bn[[bi, t]] = -1.0;
        }
    }

    Topology {
        galvanic: ids.clone(),
        r_bn,
        forest,
        closures,
        islands,
        inductor_comps,
        galvanic_comps,
        parent,
        branch_ids: ids,
    }
}

impl Topology {
    /// Signed forest path from extended node `a` to extended node `b`
    /// (+1 entries follow the branch's from→to direction). Panics when the
    /// two nodes sit in different trees.
    pub fn forest_path(&self, a: usize, b: usize) -> Vec<(String, i8)> {
        let chain = |mut v: usize| -> Vec<usize> {
            let mut nodes = vec![v];
            while let Some((p, _, _)) = self.parent[v] {
                v = p;
                nodes.push(v);
            }
            nodes
        };
        let up_a = chain(a);
        let up_b = chain(b);
        let lca = *up_a
            .iter()
            .find(|v| up_b.contains(v))
            .expect("nodes must share a forest tree");
        let mut path = Vec::new();
        let mut v = a;
        while v != lca {
            let (p, bidx, sign) = self.parent[v].unwrap();
            path.push((self.branch_ids[bidx].clone(), sign));
            v = p;
        }
        let mut down = Vec::new();
        v = b;
        while v != lca {
            let (p, bidx, sign) = self.parent[v].unwrap();
            down.push((self.branch_ids[bidx].clone(), -sign));
            v = p;
        }
        down.reverse();
        path.extend(down);
        path
    }
}
