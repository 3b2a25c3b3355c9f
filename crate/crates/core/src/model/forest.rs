use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Design, ModelError, ModelSpec};
use crate::rng;
use crate::stats;

/// Tree `i` draws from a generator seeded with `seed ^ i`.
pub const SEED_RULE: &str = "tree i is grown from seed XOR i";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes stored flat; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

struct Grower<'a> {
    d: &'a Design,
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    rng: rng::PipelineRng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let ys: Vec<f64> = idx.iter().map(|&i| self.d.y[i]).collect();
        let (lo, hi) = (stats::min(&ys).unwrap(), stats::max(&ys).unwrap());
        let value = stats::mean(&ys).unwrap().clamp(lo, hi);
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let first = self.d.y[idx[0]];
        let constant = idx.iter().all(|&i| self.d.y[i] == first);
        if depth >= self.max_depth || n < 2 * self.min_leaf || constant {
            return self.leaf(idx);
        }
        let features = rng::sample_without_replacement(self.d.p, self.mtry, &mut self.rng);
        let Some(best) = self.best_split(idx, &features) else {
            return self.leaf(idx);
        };
        let at = partition(idx, |i| self.d.at(i, best.feature) <= best.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let (l, r) = idx.split_at_mut(at);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        slot
    }

    /// The split with the smallest summed squared deviation of the children,
    /// scanning midpoints between consecutive distinct values. Ties keep the
    /// first candidate found.
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<Candidate> {
        let n = idx.len();
        let ys: Vec<f64> = idx.iter().map(|&i| self.d.y[i]).collect();
        let m = stats::mean(&ys).unwrap();
        let total: f64 = ys.iter().map(|y| y - m).sum();
        let base = total * total / n as f64;
        let mut best: Option<Candidate> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.d.at(i, f), self.d.y[i] - m)));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for k in 0..n - 1 {
                left += pairs[k].1;
                let (nl, nr) = (k + 1, n - k - 1);
                if nl < self.min_leaf || nr < self.min_leaf || pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let right = total - left;
                let score = left * left / nl as f64 + right * right / nr as f64;
                if score > base && best.as_ref().is_none_or(|b| score > b.score) {
                    let (a, b) = (pairs[k].0, pairs[k + 1].0);
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid >= b { a } else { mid };
                    best = Some(Candidate { feature: f, threshold, score });
                }
            }
        }
        best
    }
}

/// Stable partition: rows satisfying `pred` first. Returns the split point.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let at = l.len();
    idx[..at].copy_from_slice(&l);
    idx[at..].copy_from_slice(&r);
    at
}

fn grow_tree(d: &Design, spec: &ModelSpec, index: usize) -> Tree {
    let mut rng = rng::seeded(spec.seed ^ index as u64);
    let n = d.n();
    let mut idx: Vec<usize> = if spec.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let mut g = Grower {
        d,
        max_depth: spec.max_depth.unwrap_or(usize::MAX),
        min_leaf: spec.min_samples_leaf,
        mtry: spec.effective_mtry(),
        rng,
        nodes: Vec::new(),
    };
    g.grow(&mut idx, 0);
    Tree { nodes: g.nodes }
}

pub(crate) fn fit(d: &Design, spec: &ModelSpec, threads: Option<usize>) -> Result<Vec<Tree>, ModelError> {
    let indices: Vec<usize> = (0..spec.n_trees).collect();
    let build = || crate::par::map(&indices, |&i| grow_tree(d, spec, i));
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| ModelError::DegenerateData(format!("thread pool: {e}")))?;
        return Ok(pool.install(build));
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(build())
}

pub(crate) fn predict_row(trees: &[Tree], x: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::super::tests::table;
    use super::super::{fit_forest, fit_forest_with_threads, predict, ModelSpec, Payload};
    use super::*;

    #[test]
    fn depth_zero_predicts_mean() {
        let t = table(vec![("x", (0..10).map(f64::from).collect()), ("y", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])]);
        let spec = ModelSpec { n_trees: 1, max_depth: Some(0), bootstrap: false, ..ModelSpec::forest("y", &["x"], 1) };
        let a = fit_forest(&t, &spec).unwrap();
        let p = predict(&a, &t).unwrap();
        assert!(p.values.iter().all(|v| *v == Some(5.5)));
    }

    /// Brute force over every threshold between distinct sorted values.
    fn best_threshold(xs: &[f64], ys: &[f64]) -> f64 {
        let mut v: Vec<f64> = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let sse = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|y| (y - m).powi(2)).sum::<f64>()
        };
        let mut best = (f64::INFINITY, 0.0);
        for w in v.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<f64> = xs.iter().zip(ys).filter(|(x, _)| **x <= t).map(|(_, y)| *y).collect();
            let r: Vec<f64> = xs.iter().zip(ys).filter(|(x, _)| **x > t).map(|(_, y)| *y).collect();
            let s = sse(&l) + sse(&r);
            if s < best.0 {
                best = (s, t);
            }
        }
        best.1
    }

    #[test]
    fn step_function() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 - 49.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
        let t = table(vec![("x", xs.clone()), ("y", ys.clone())]);
        let spec = ModelSpec {
            n_trees: 1,
            max_depth: Some(2),
            min_samples_leaf: 1,
            mtry: Some(1),
            bootstrap: false,
            ..ModelSpec::forest("y", &["x"], 3)
        };
        let a = fit_forest(&t, &spec).unwrap();
        let p = predict(&a, &t).unwrap();
        for (got, want) in p.values.iter().zip(&ys) {
            assert_eq!(got.unwrap(), *want);
        }
        let Payload::RandomForest { trees } = &a.payload else { panic!() };
        match trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, best_threshold(&xs, &ys)),
            _ => panic!("root should split"),
        }
    }

    #[test]
    fn identical_leaves_average_exactly() {
        let trees = vec![Tree { nodes: vec![Node::Leaf { value: 4.2 }] }; 7];
        assert_eq!(predict_row(&trees, &[123.0]), 4.2);
    }

    #[test]
    fn deterministic_across_threads() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let zs: Vec<f64> = (0..200).map(|i| ((i * 13) % 17) as f64).collect();
        let ys: Vec<f64> = xs.iter().zip(&zs).map(|(x, z)| (x / 10.0).sin() + z * 0.3).collect();
        let t = table(vec![("x", xs), ("z", zs), ("y", ys)]);
        let spec = ModelSpec { n_trees: 20, ..ModelSpec::forest("y", &["x", "z"], 11) };
        let a = fit_forest_with_threads(&t, &spec, Some(1)).unwrap();
        let b = fit_forest_with_threads(&t, &spec, Some(4)).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        let c = fit_forest_with_threads(&t, &ModelSpec { seed: 12, ..spec }, Some(4)).unwrap();
        assert_ne!(a.content_hash, c.content_hash);
    }

    #[test]
    fn constant_target_gives_single_leaves() {
        let t = table(vec![("x", (0..20).map(f64::from).collect()), ("y", vec![3.0; 20])]);
        let a = fit_forest(&t, &ModelSpec { n_trees: 5, ..ModelSpec::forest("y", &["x"], 0) }).unwrap();
        let Payload::RandomForest { trees } = &a.payload else { panic!() };
        assert!(trees.iter().all(|t| t.nodes.len() == 1));
    }
}
