use super::dataset::{Column, Encoded};
use crate::features::{FeatureId, FeatureVector, ValueRef};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A binary test; rows satisfying it go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum Split {
    IsTrue { feature: FeatureId },
    Equals { feature: FeatureId, value: String },
    AtMost { feature: FeatureId, threshold: f64 },
}

impl Split {
    pub fn feature(&self) -> FeatureId {
        match self {
            Split::IsTrue { feature } | Split::Equals { feature, .. } | Split::AtMost { feature, .. } => *feature,
        }
    }

    /// Unseen categorical values simply fail the equality test.
    pub fn goes_left(&self, fv: &FeatureVector) -> bool {
        match self {
            Split::IsTrue { feature } => matches!(fv.value(*feature), ValueRef::Bool(true)),
            Split::Equals { feature, value } => matches!(fv.value(*feature), ValueRef::Cat(s) if s == value),
            Split::AtMost { feature, threshold } => fv.value(*feature).as_f64().is_some_and(|x| x <= *threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { positive: u32, total: u32 },
    Split { split: Split, left: u32, right: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
        }
    }
}

/// CART tree over Gini impurity. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
enum Rule {
    Bool(usize),
    Cat(usize, u32),
    Num(usize, f64),
}

impl Rule {
    fn left(&self, enc: &Encoded, row: usize) -> bool {
        match (*self, &enc.columns[self.col()]) {
            (Rule::Bool(_), Column::Bool(v)) => v[row],
            (Rule::Cat(_, code), Column::Cat { codes, .. }) => codes[row] == code,
            (Rule::Num(_, t), Column::Num(v)) => v[row] <= t,
            _ => unreachable!("rule does not match column kind"),
        }
    }

    fn col(&self) -> usize {
        match *self {
            Rule::Bool(c) | Rule::Cat(c, _) | Rule::Num(c, _) => c,
        }
    }

    fn to_split(self, enc: &Encoded) -> Split {
        let feature = enc.features[self.col()];
        match (self, &enc.columns[self.col()]) {
            (Rule::Bool(_), _) => Split::IsTrue { feature },
            (Rule::Cat(_, code), Column::Cat { vocab, .. }) => Split::Equals {
                feature,
                value: vocab[code as usize].clone(),
            },
            (Rule::Num(_, threshold), _) => Split::AtMost { feature, threshold },
            _ => unreachable!(),
        }
    }
}

fn purity(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        let neg = total - pos;
        (pos * pos + neg * neg) / total
    }
}

/// Sum over children of n·(1 − gini) is maximised, which is the same as
/// maximising the weighted Gini decrease.
struct Best {
    score: f64,
    rule: Option<Rule>,
}

impl Best {
    fn offer(&mut self, score: f64, rule: Rule) {
        if score > self.score + 1e-12 {
            self.score = score;
            self.rule = Some(rule);
        }
    }
}

fn best_split(enc: &Encoded, rows: &[usize], cols: &[usize], min_leaf: usize) -> Option<Rule> {
    let total = rows.len();
    let pos = rows.iter().filter(|&&r| enc.positive[r]).count();
    let mut best = Best {
        score: purity(pos as f64, total as f64),
        rule: None,
    };
    let ok = |l: usize| l >= min_leaf && total - l >= min_leaf;
    let score = |lp: usize, l: usize| purity(lp as f64, l as f64) + purity((pos - lp) as f64, (total - l) as f64);
    for &c in cols {
        match &enc.columns[c] {
            Column::Bool(v) => {
                let (mut l, mut lp) = (0, 0);
                for &r in rows {
                    if v[r] {
                        l += 1;
                        lp += enc.positive[r] as usize;
                    }
                }
                if ok(l) {
                    best.offer(score(lp, l), Rule::Bool(c));
                }
            }
            Column::Cat { codes, vocab } => {
                let mut counts = vec![(0usize, 0usize); vocab.len()];
                for &r in rows {
                    let e = &mut counts[codes[r] as usize];
                    e.0 += 1;
                    e.1 += enc.positive[r] as usize;
                }
                for (code, &(l, lp)) in counts.iter().enumerate() {
                    if l > 0 && ok(l) {
                        best.offer(score(lp, l), Rule::Cat(c, code as u32));
                    }
                }
            }
            Column::Num(v) => {
                let mut pairs: Vec<(f64, bool)> = rows.iter().map(|&r| (v[r], enc.positive[r])).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut lp = 0;
                for i in 0..pairs.len() - 1 {
                    lp += pairs[i].1 as usize;
                    let l = i + 1;
                    if pairs[i].0 < pairs[i + 1].0 && ok(l) {
                        let t = pairs[i].0 + (pairs[i + 1].0 - pairs[i].0) / 2.0;
                        best.offer(score(lp, l), Rule::Num(c, t));
                    }
                }
            }
        }
    }
    best.rule
}

struct Grower<'a> {
    enc: &'a Encoded,
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn candidate_columns(&mut self) -> Vec<usize> {
        let d = self.enc.columns.len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut cols = sample(rng, d, m).into_vec();
                cols.sort_unstable();
                cols
            }
            _ => (0..d).collect(),
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let positive = rows.iter().filter(|&&r| self.enc.positive[r]).count();
        self.nodes.push(Node::Leaf {
            positive: positive as u32,
            total: rows.len() as u32,
        });
        if depth >= self.params.max_depth || positive == 0 || positive == rows.len() {
            return id;
        }
        let cols = self.candidate_columns();
        let Some(rule) = best_split(self.enc, &rows, &cols, self.params.min_leaf.max(1)) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&row| rule.left(self.enc, row));
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            split: rule.to_split(self.enc),
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree on `rows` (indices into the encoding, repeats allowed).
    /// `rng` drives per-split feature sampling when `max_features` is below
    /// the feature count.
    pub(crate) fn grow(enc: &Encoded, rows: &[usize], params: TreeParams, rng: Option<&mut ChaCha8Rng>) -> Self {
        let mut g = Grower {
            enc,
            params,
            rng,
            nodes: Vec::new(),
        };
        g.grow(rows.to_vec(), 0);
        DecisionTree { nodes: g.nodes }
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        DecisionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root_split(&self) -> Option<&Split> {
        match self.nodes.first() {
            Some(Node::Split { split, .. }) => Some(split),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: u32) -> usize {
            match &nodes[i as usize] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Positive fraction of the training rows in the reached leaf.
    pub fn score(&self, fv: &FeatureVector) -> f64 {
        let mut i = 0u32;
        loop {
            match &self.nodes[i as usize] {
                Node::Leaf { positive, total } => {
                    return if *total == 0 { 0.0 } else { *positive as f64 / *total as f64 };
                }
                Node::Split { split, left, right } => i = if split.goes_left(fv) { *left } else { *right },
            }
        }
    }

    /// Structural sanity for trees read from disk.
    pub(crate) fn check(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = n {
                let ok = |c: u32| (c as usize) > i && (c as usize) < self.nodes.len();
                if !ok(*left) || !ok(*right) {
                    return Err(format!("node {i} has an invalid child"));
                }
            }
        }
        Ok(())
    }
}
