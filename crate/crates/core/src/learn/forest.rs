//! Random forest of CART trees with Gini splits.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Classifier, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    /// Train each tree on a bootstrap resample instead of all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class histogram of the training rows that reached this leaf.
    Leaf { counts: Vec<u32> },
}

/// Nodes in a flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn argmax_counts(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl Tree {
    /// A depth-1 tree.
    pub fn stump(feature: usize, threshold: f64, left: Vec<u32>, right: Vec<u32>) -> Self {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { counts: left },
                Node::Leaf { counts: right },
            ],
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Majority class of the leaf reached by `x`; ties go to the lower index.
    pub fn vote(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return argmax_counts(counts),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    classes: Vec<String>,
    n_features: usize,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn from_trees(classes: Vec<String>, n_features: usize, trees: Vec<Tree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::DegenerateModel("forest has no trees".into()));
        }
        let k = classes.len();
        for t in &trees {
            for n in &t.nodes {
                match n {
                    Node::Leaf { counts } if counts.len() != k => {
                        return Err(Error::invalid("forest", "leaf histogram size differs from class count"))
                    }
                    Node::Split {
                        feature, left, right, ..
                    } if *feature >= n_features || *left >= t.nodes.len() || *right >= t.nodes.len() => {
                        return Err(Error::invalid("forest", "split refers outside the tree or features"))
                    }
                    _ => {}
                }
            }
        }
        Ok(ForestModel {
            classes,
            n_features,
            trees,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

impl Classifier for ForestModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Majority vote over trees, ties to the lexicographically smallest label.
    fn predict_index(&self, x: &[f64]) -> usize {
        let mut votes = vec![0u32; self.classes.len()];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        argmax_counts(&votes)
    }
}

fn gini(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a ForestParams,
    mtry: usize,
    k: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.k];
        for &r in rows {
            c[self.data.targets()[r]] += 1;
        }
        c
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let n = rows.len() as u32;
        let parent = gini(&counts, n);
        if depth >= self.params.max_depth || parent == 0.0 || rows.len() < 2 * self.params.min_leaf {
            return id;
        }

        let d = self.data.n_features();
        let feats = sample(rng, d, self.mtry);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.clone();
        for f in feats.iter() {
            let x = |r: usize| self.data.features()[r][f];
            sorted.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
            let mut left = vec![0u32; self.k];
            for i in 0..sorted.len() - 1 {
                left[self.data.targets()[sorted[i]]] += 1;
                let nl = i + 1;
                let nr = sorted.len() - nl;
                let (a, b) = (x(sorted[i]), x(sorted[i + 1]));
                if a == b || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right: Vec<u32> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let score = (nl as f64 * gini(&left, nl as u32) + nr as f64 * gini(&right, nr as u32)) / n as f64;
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, a + (b - a) / 2.0));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return id;
        };
        if score >= parent - 1e-12 {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&row| self.data.features()[row][feature] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Trains `n_trees` trees, by default on bootstrap resamples. Tree `i` draws from its own
/// stream of the seeded generator, so trees are independent of build order.
pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    data.check_trainable()?;
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    let d = data.n_features();
    let mtry = params
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n = data.len();
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                data,
                params,
                mtry,
                k: data.classes().len(),
                nodes: Vec::new(),
            };
            b.build(rows, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        classes: data.classes().to_vec(),
        n_features: d,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..6 {
            x.push(vec![0.2; 5]);
            y.push("a");
            x.push(vec![0.9; 5]);
            y.push("b");
            let _ = i;
        }
        Dataset::new(x, &y).unwrap()
    }

    #[test]
    fn separable_constant_vectors() {
        let d = separable();
        let m = train_forest(&d, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        for (x, &t) in d.features().iter().zip(d.targets()) {
            assert_eq!(m.predict_index(x), t);
        }
    }

    #[test]
    fn stump_threshold_lies_between_classes() {
        let xs = [0.1, 0.3, 0.35, 0.5, 1.2, 1.4, 1.9, 2.0];
        let ys = ["a", "a", "a", "a", "b", "b", "b", "b"];
        let d = Dataset::new(xs.iter().map(|&v| vec![v]).collect(), &ys).unwrap();
        for seed in 0..20 {
            let m = train_forest(
                &d,
                &ForestParams {
                    n_trees: 1,
                    max_depth: 1,
                    bootstrap: false,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let (f, thr) = m.trees()[0].root_split().expect("a split");
            assert_eq!(f, 0);
            // Exhaustive oracle: every threshold between the classes has zero
            // impurity, and none outside does.
            let pure = |t: f64| xs.iter().zip(&ys).all(|(x, y)| (*x <= t) == (*y == "a"));
            assert!(pure(thr), "seed {seed}: {thr}");
            assert!(thr > 0.5 && thr < 1.2);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let d = Dataset::new(vec![vec![1.0], vec![2.0]], &["a", "a"]).unwrap();
        assert!(matches!(train_forest(&d, &ForestParams::default()), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn tied_vote_goes_to_smallest_label() {
        let classes = vec!["alpha".to_string(), "beta".to_string()];
        let t1 = Tree::stump(0, 0.5, vec![0, 3], vec![0, 3]);
        let t2 = Tree::stump(0, 0.5, vec![3, 0], vec![3, 0]);
        let m = ForestModel::from_trees(classes, 1, vec![t1, t2]).unwrap();
        assert_eq!(m.predict(&[0.1]).unwrap(), "alpha");
        let t3 = Tree::stump(0, 0.5, vec![0, 3], vec![0, 3]);
        let m = ForestModel::from_trees(m.classes().to_vec(), 1, [m.trees().to_vec(), vec![t3]].concat()).unwrap();
        assert_eq!(m.predict(&[0.1]).unwrap(), "beta");
        assert!(matches!(m.predict(&[0.1, 0.2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn stump_on_own_point() {
        let d = Dataset::new(vec![vec![0.0], vec![0.1], vec![1.0], vec![1.1]], &["x", "x", "y", "y"]).unwrap();
        let m = train_forest(&d, &ForestParams { n_trees: 1, max_depth: 1, seed: 4, ..Default::default() }).unwrap();
        assert_eq!(m.predict(&[1.0]).unwrap(), "y");
        assert_eq!(m.predict(&[0.0]).unwrap(), "x");
    }

    #[test]
    fn deterministic_per_seed() {
        let d = separable();
        let p = ForestParams { n_trees: 7, seed: 9, ..Default::default() };
        assert_eq!(train_forest(&d, &p).unwrap(), train_forest(&d, &p).unwrap());
    }

    #[test]
    fn depth_is_bounded() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let y: Vec<&str> = (0..40).map(|i| if (i * 3) % 4 < 2 { "p" } else { "q" }).collect();
        let d = Dataset::new(x, &y).unwrap();
        let m = train_forest(&d, &ForestParams { n_trees: 3, max_depth: 3, ..Default::default() }).unwrap();
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
    }
}
