use serde::{Deserialize, Serialize};

use super::{CartError, DecisionTree, Node, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum NodeJson {
    Internal { id: usize, feature: usize, threshold: f64, left: usize, right: usize, samples: usize },
    Leaf { id: usize, class: usize, samples: usize },
}

/// On-disk JSON shape: every node carries its own index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    root: usize,
    num_features: usize,
    num_classes: usize,
    nodes: Vec<NodeJson>,
}

impl From<&DecisionTree> for TreeJson {
    fn from(tree: &DecisionTree) -> Self {
        let nodes = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(id, node)| match *node {
                Node::Internal { feature, threshold, left, right, sample_count } => {
                    NodeJson::Internal { id, feature, threshold, left, right, samples: sample_count }
                }
                Node::Leaf { class_label, sample_count } => NodeJson::Leaf { id, class: class_label, samples: sample_count },
            })
            .collect();
        TreeJson { root: tree.root, num_features: tree.num_features, num_classes: tree.num_classes, nodes }
    }
}

impl TryFrom<TreeJson> for DecisionTree {
    type Error = CartError;

    fn try_from(json: TreeJson) -> Result<Self> {
        let mut nodes = Vec::with_capacity(json.nodes.len());
        for (pos, node) in json.nodes.into_iter().enumerate() {
            let (id, node) = match node {
                NodeJson::Internal { id, feature, threshold, left, right, samples } => {
                    (id, Node::Internal { feature, threshold, left, right, sample_count: samples })
                }
                NodeJson::Leaf { id, class, samples } => (id, Node::Leaf { class_label: class, sample_count: samples }),
            };
            if id != pos {
                return Err(CartError::InvalidTree(format!("node at position {pos} claims id {id}")));
            }
            nodes.push(node);
        }
        let tree = DecisionTree { nodes, root: json.root, num_features: json.num_features, num_classes: json.num_classes };
        tree.validate()?;
        Ok(tree)
    }
}

impl DecisionTree {
    /// Check that every node is reachable exactly once from the root and that splits
    /// reference valid features with finite thresholds.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(CartError::InvalidTree(format!("root {} out of {n} nodes", self.root)));
        }
        let mut visited = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= n {
                return Err(CartError::InvalidTree(format!("child index {id} out of {n} nodes")));
            }
            if std::mem::replace(&mut visited[id], true) {
                return Err(CartError::InvalidTree(format!("node {id} reached twice")));
            }
            match self.nodes[id] {
                Node::Internal { feature, threshold, left, right, .. } => {
                    if feature >= self.num_features || !threshold.is_finite() {
                        return Err(CartError::InvalidTree(format!("node {id} has split ({feature}, {threshold})")));
                    }
                    stack.push(left);
                    stack.push(right);
                }
                Node::Leaf { class_label, .. } => {
                    if class_label >= self.num_classes.max(1) {
                        return Err(CartError::InvalidTree(format!("leaf {id} predicts class {class_label}")));
                    }
                }
            }
        }
        if let Some(orphan) = visited.iter().position(|v| !v) {
            return Err(CartError::InvalidTree(format!("node {orphan} is unreachable")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TreeJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        DecisionTree::try_from(serde_json::from_str::<TreeJson>(text)?)
    }
}
