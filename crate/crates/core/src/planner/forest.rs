//! Multi-tree storage: nodes, per-tree parent edges, union-find over trees
//! and the bridge edges recorded when two trees are joined.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::cspace::{Configuration, StateId};
use crate::robot::JointVector;

#[derive(Clone, Debug)]
pub struct Node {
    pub config: Configuration,
    pub parent: Option<usize>,
    /// Tree the node was created in (a union-find element).
    pub tree: usize,
}

#[derive(Clone, Debug, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn add(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; returns false when already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    /// Number of disjoint sets.
    pub fn components(&self) -> usize {
        (0..self.parent.len()).filter(|&i| self.parent[i] == i).count()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Forest {
    pub nodes: Vec<Node>,
    pub trees: UnionFind,
    /// Edges that joined two trees, as node index pairs.
    pub bridges: Vec<(usize, usize)>,
    by_state: HashMap<StateId, Vec<usize>>,
    /// States holding at least one node, in order of first appearance.
    pub states: Vec<StateId>,
}

impl Forest {
    /// `init_tree`: a new tree rooted at `config`; returns the node index.
    pub fn init_tree(&mut self, config: Configuration) -> usize {
        let tree = self.trees.add();
        self.push(config, None, tree)
    }

    /// Adds `config` as a child of `parent` in the parent's tree.
    pub fn add_edge(&mut self, parent: usize, config: Configuration) -> usize {
        let tree = self.nodes[parent].tree;
        self.push(config, Some(parent), tree)
    }

    fn push(&mut self, config: Configuration, parent: Option<usize>, tree: usize) -> usize {
        let idx = self.nodes.len();
        let list = self.by_state.entry(config.state).or_default();
        if list.is_empty() {
            self.states.push(config.state);
        }
        list.push(idx);
        self.nodes.push(Node { config, parent, tree });
        idx
    }

    /// `get_tree`: the merged tree a node belongs to.
    pub fn tree_of(&self, node: usize) -> usize {
        self.trees.find(self.nodes[node].tree)
    }

    pub fn merge(&mut self, a: usize, b: usize) -> bool {
        let joined = self.trees.union(self.nodes[a].tree, self.nodes[b].tree);
        if joined {
            self.bridges.push((a, b));
        }
        joined
    }

    pub fn nodes_in(&self, state: StateId) -> &[usize] {
        self.by_state.get(&state).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tree_count(&self) -> usize {
        self.trees.components()
    }

    /// Nearest node to `q` in `state`, optionally restricted to one merged
    /// tree. Ties go to the lowest (tree id, node index).
    pub fn nearest(&self, q: &JointVector, state: StateId, tree: Option<usize>) -> Option<usize> {
        let candidates = self.nodes_in(state).iter().copied().filter(|&i| match tree {
            Some(t) => self.tree_of(i) == t,
            None => true,
        });
        nearest_neighbor(q, candidates.map(|i| (self.nodes[i].tree, i, &self.nodes[i].config.q)))
    }

    /// Nearest node in `state` for every merged tree other than `exclude`.
    pub fn nearest_per_tree(&self, q: &JointVector, state: StateId, exclude: usize) -> BTreeMap<usize, usize> {
        let mut best: BTreeMap<usize, (f64, usize, usize)> = BTreeMap::new();
        for &i in self.nodes_in(state) {
            let t = self.tree_of(i);
            if t == exclude {
                continue;
            }
            let d = (&self.nodes[i].config.q - q).norm_squared();
            let key = (d, self.nodes[i].tree, i);
            match best.get(&t) {
                Some(cur) if !better(key, *cur) => {}
                _ => {
                    best.insert(t, key);
                }
            }
        }
        best.into_iter().map(|(t, (_, _, i))| (t, i)).collect()
    }

    /// Node sequence from `from` to `to` along tree and bridge edges, fewest
    /// edges first; ties follow node index order.
    pub fn path_between(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                adj[i].push(p);
                adj[p].push(i);
            }
        }
        for &(a, b) in &self.bridges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut prev = vec![usize::MAX; n];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &v in &adj[u] {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut out = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            out.push(cur);
        }
        out.reverse();
        Some(out)
    }
}

fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Exact linear-scan nearest neighbour over `(tree id, node index, joints)`
/// candidates; ties go to the lowest (tree id, node index).
pub fn nearest_neighbor<'a>(
    q: &JointVector,
    candidates: impl IntoIterator<Item = (usize, usize, &'a JointVector)>,
) -> Option<usize> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (tree, idx, c) in candidates {
        let key = ((c - q).norm_squared(), tree, idx);
        if best.is_none_or(|b| better(key, b)) {
            best = Some(key);
        }
    }
    best.map(|(_, _, i)| i)
}
