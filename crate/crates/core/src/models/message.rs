//! Intra- and inter-level message passing between per-boundary branches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Init};
use crate::tensor::{Bound, Graph, ParamStore, Var};
use crate::{Error, Result};

/// Directed parent-to-child edges over boundary indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageTree {
    pub edges: Vec<(usize, usize)>,
}

impl Default for MessageTree {
    /// Facial adjacency rooted at the outer contour, in canonical boundary
    /// order: contour feeds the brows and the nose bridge, each brow feeds
    /// its upper then lower eyelid, and the nose runs down through the four
    /// lip lines.
    fn default() -> Self {
        Self {
            edges: vec![
                (0, 1),
                (0, 2),
                (0, 3),
                (3, 4),
                (1, 5),
                (5, 6),
                (2, 7),
                (7, 8),
                (4, 9),
                (9, 10),
                (10, 11),
                (11, 12),
            ],
        }
    }
}

impl MessageTree {
    pub fn new(edges: Vec<(usize, usize)>) -> Self {
        Self { edges }
    }

    /// Breadth-first node order from the root and each node's parent edge.
    /// Errors unless the edges form one tree covering all `k` nodes.
    pub fn order(&self, k: usize) -> Result<(Vec<usize>, Vec<Option<usize>>)> {
        let err = |m: String| Err(Error::config(format!("message tree: {m}")));
        if self.edges.len() + 1 != k {
            return err(format!("{} edges cannot span {k} nodes", self.edges.len()));
        }
        let mut parent_edge: Vec<Option<usize>> = vec![None; k];
        for (e, &(p, c)) in self.edges.iter().enumerate() {
            if p >= k || c >= k || p == c {
                return err(format!("invalid edge {p}->{c}"));
            }
            if parent_edge[c].replace(e).is_some() {
                return err(format!("node {c} has two parents"));
            }
        }
        let roots: Vec<usize> = (0..k).filter(|&n| parent_edge[n].is_none()).collect();
        if roots.len() != 1 {
            return err(format!("expected one root, found {}", roots.len()));
        }
        let mut order = vec![roots[0]];
        let mut i = 0;
        while i < order.len() {
            let node = order[i];
            order.extend(self.edges.iter().filter(|e| e.0 == node).map(|e| e.1));
            i += 1;
        }
        if order.len() != k {
            return err("edges do not reach every node from the root".into());
        }
        Ok((order, parent_edge))
    }
}

/// Learned message transforms for one stack.
#[derive(Debug, Clone)]
pub struct MessagePassing {
    tree: MessageTree,
    order: Vec<usize>,
    parent_edge: Vec<Option<usize>>,
    up: Vec<Conv>,
    down: Vec<Conv>,
    inter: Option<Vec<Conv>>,
}

impl MessagePassing {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        tree: &MessageTree,
        k: usize,
        channels: usize,
        inter_level: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (order, parent_edge) = tree.order(k)?;
        let init = Init::He(0.2);
        let mut edge_convs = |dir: &str, rng: &mut _| -> Vec<Conv> {
            tree.edges
                .iter()
                .map(|&(p, c)| Conv::new(store, &format!("{name}.{dir}.{p}-{c}"), channels, channels, 3, 1, init, rng))
                .collect()
        };
        let up = edge_convs("up", rng);
        let down = edge_convs("down", rng);
        let inter = inter_level.then(|| {
            (0..k)
                .map(|i| Conv::new(store, &format!("{name}.inter.{i}"), channels, channels, 3, 1, init, rng))
                .collect()
        });
        Ok(Self {
            tree: tree.clone(),
            order,
            parent_edge,
            up,
            down,
            inter,
        })
    }

    pub fn has_inter_level(&self) -> bool {
        self.inter.is_some()
    }

    /// Zeroes every message transform, making the block an identity.
    pub fn zero(&self, store: &mut ParamStore) {
        for c in self.up.iter().chain(&self.down).chain(self.inter.iter().flatten()) {
            c.zero(store);
        }
    }

    /// Zeroes only the leaf-to-root transforms.
    pub fn zero_upward(&self, store: &mut ParamStore) {
        for c in &self.up {
            c.zero(store);
        }
    }

    /// Inter-level messages first (when a previous stack exists), then a
    /// leaf-to-root sweep and a root-to-leaf sweep. Each message is a 3x3
    /// convolution of the sender's group added into the receiver's group.
    pub fn forward(&self, g: &mut Graph, p: &Bound, groups: &[Var], prev: Option<&[Var]>) -> Result<Vec<Var>> {
        if groups.len() != self.order.len() {
            return Err(Error::dim(format!("{} branch groups for a {}-node tree", groups.len(), self.order.len())));
        }
        let mut h = groups.to_vec();
        if let (Some(prev), Some(inter)) = (prev, &self.inter) {
            for (i, conv) in inter.iter().enumerate() {
                let m = conv.forward(g, p, prev[i])?;
                h[i] = g.add(h[i], m)?;
            }
        }
        for &node in self.order.iter().rev() {
            if let Some(e) = self.parent_edge[node] {
                let parent = self.tree.edges[e].0;
                let m = self.up[e].forward(g, p, h[node])?;
                h[parent] = g.add(h[parent], m)?;
            }
        }
        for &node in &self.order {
            if let Some(e) = self.parent_edge[node] {
                let parent = self.tree.edges[e].0;
                let m = self.down[e].forward(g, p, h[parent])?;
                h[node] = g.add(h[node], m)?;
            }
        }
        Ok(h)
    }
}
