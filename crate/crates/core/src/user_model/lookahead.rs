//! Limited-horizon valuation of design changes under subjective dynamics.
//!
//! `Q_h(s, a) = V_h(s')` with `s'` the designer's predicted result of `a`,
//! `V_0(x) = U(x)` and `V_k(x) = max_{a'} V_{k-1}(x after a')`, where the max
//! runs over the `beam_width` best changes by immediate utility plus `NoOp`.
//!
//! The expanded states do not depend on utility parameters, so one tree per
//! root state is shared by every hypothesis evaluated there.

use crate::design::{DesignDomain, Dynamics};
use crate::error::{Error, Result};
use crate::user_model::{UserModelConfig, UserModelParams};

struct Child<C> {
    change: C,
    /// For `NoOp` this is the parent itself.
    node: usize,
}

struct Node<D: DesignDomain> {
    state: D::State,
    outcomes: D::Outcomes,
    children: Option<Vec<Child<D::Change>>>,
}

/// Lookahead values of every legal change at one state, under one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<C> {
    /// Legal changes, sorted.
    pub changes: Vec<C>,
    pub values: Vec<f64>,
    /// Position of `NoOp` in `changes`.
    pub noop: usize,
}

impl<C: Copy + Eq> QTable<C> {
    pub fn index_of(&self, change: C) -> Option<usize> {
        self.changes.iter().position(|&c| c == change)
    }

    pub fn value(&self, change: C) -> Option<f64> {
        self.index_of(change).map(|i| self.values[i])
    }
}

/// Lazily expanded tree of subjectively predicted states rooted at one design.
pub struct LookaheadTree<'d, D: DesignDomain> {
    domain: &'d D,
    nodes: Vec<Node<D>>,
    beam_width: usize,
}

impl<'d, D: DesignDomain> LookaheadTree<'d, D> {
    pub fn new(domain: &'d D, root: &D::State, config: &UserModelConfig) -> Result<Self> {
        config.validate()?;
        let mut tree = Self {
            domain,
            nodes: vec![Node {
                state: root.clone(),
                outcomes: domain.outcomes(root)?,
                children: None,
            }],
            beam_width: config.beam_width,
        };
        tree.expand(0)?;
        Ok(tree)
    }

    pub fn root_state(&self) -> &D::State {
        &self.nodes[0].state
    }

    pub fn root_outcomes(&self) -> &D::Outcomes {
        &self.nodes[0].outcomes
    }

    /// Legal changes at the root, sorted.
    pub fn root_changes(&self) -> Vec<D::Change> {
        self.children_of(0).iter().map(|c| c.change).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn children_of(&self, node: usize) -> &[Child<D::Change>] {
        self.nodes[node].children.as_deref().expect("node expanded")
    }

    fn expand(&mut self, node: usize) -> Result<()> {
        if self.nodes[node].children.is_some() {
            return Ok(());
        }
        let noop = self.domain.noop();
        let state = self.nodes[node].state.clone();
        let mut children = Vec::new();
        for change in self.domain.legal_changes(&state)? {
            let target = if change == noop {
                node
            } else {
                let next = self.domain.apply(&state, change, Dynamics::Subjective)?;
                let outcomes = self.domain.outcomes(&next)?;
                self.nodes.push(Node {
                    state: next,
                    outcomes,
                    children: None,
                });
                self.nodes.len() - 1
            };
            children.push(Child { change, node: target });
        }
        self.nodes[node].children = Some(children);
        Ok(())
    }

    fn utility(&self, node: usize, utility: &D::Utility) -> f64 {
        self.domain.utility(utility, &self.nodes[node].outcomes)
    }

    fn value(&mut self, node: usize, depth: u32, utility: &D::Utility) -> Result<f64> {
        if depth == 0 {
            return Ok(self.utility(node, utility));
        }
        self.expand(node)?;
        if depth == 1 {
            // the beam always contains the best immediate change, so a
            // one-step value is the plain max
            let best = self
                .children_of(node)
                .iter()
                .map(|c| self.utility(c.node, utility))
                .fold(f64::NEG_INFINITY, f64::max);
            return Ok(best);
        }
        let noop = self.domain.noop();
        let mut ranked: Vec<(f64, D::Change, usize)> = self
            .children_of(node)
            .iter()
            .filter(|c| c.change != noop)
            .map(|c| (self.utility(c.node, utility), c.change, c.node))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(self.beam_width);
        let mut best = self.value(node, depth - 1, utility)?;
        for (_, _, child) in ranked {
            best = best.max(self.value(child, depth - 1, utility)?);
        }
        Ok(best)
    }

    /// Lookahead value of `change` at the root.
    pub fn q_value(&mut self, change: D::Change, utility: &D::Utility, horizon: u32) -> Result<f64> {
        let child = self
            .children_of(0)
            .iter()
            .find(|c| c.change == change)
            .map(|c| c.node)
            .ok_or_else(|| Error::IllegalChange(format!("{change:?} is not legal here")))?;
        self.value(child, horizon, utility)
    }

    /// Lookahead values of all legal root changes for one hypothesis.
    pub fn q_table(&mut self, utility: &D::Utility, params: &UserModelParams) -> Result<QTable<D::Change>> {
        let noop_change = self.domain.noop();
        let targets: Vec<(D::Change, usize)> =
            self.children_of(0).iter().map(|c| (c.change, c.node)).collect();
        let mut values = Vec::with_capacity(targets.len());
        let mut noop = 0;
        for (i, &(change, node)) in targets.iter().enumerate() {
            if change == noop_change {
                noop = i;
            }
            values.push(self.value(node, params.horizon, utility)?);
        }
        Ok(QTable {
            changes: targets.into_iter().map(|(c, _)| c).collect(),
            values,
            noop,
        })
    }
}

/// `Q_h(state, change)` for a single change.
pub fn lookahead_value<D: DesignDomain>(
    domain: &D,
    state: &D::State,
    change: D::Change,
    utility: &D::Utility,
    params: &UserModelParams,
    config: &UserModelConfig,
) -> Result<f64> {
    params.validate(config.horizon_max)?;
    let mut tree = LookaheadTree::new(domain, state, config)?;
    tree.q_value(change, utility, params.horizon)
}
