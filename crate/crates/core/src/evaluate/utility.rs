//! Train-on-synthetic, test-on-real classifiers.

use serde::{Deserialize, Serialize};

use super::fidelity::check_same_schema;
use super::stats::mean_std;
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};

const LOGISTIC_ITERATIONS: usize = 300;
const LOGISTIC_RATE: f64 = 0.5;
const LOGISTIC_L2: f64 = 1e-4;
const TREE_MAX_DEPTH: usize = 8;
const TREE_MIN_LEAF: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScore {
    pub classifier: String,
    pub accuracy: f64,
}

/// Classifiers from the usual five-model zoo that are not implemented here.
pub const OMITTED_CLASSIFIERS: [&str; 2] = ["random_forest", "adaboost"];

/// Features of one table relative to a label column.
struct Features<'a> {
    data: &'a Dataset,
    numeric: Vec<usize>,
    categorical: Vec<(usize, usize)>,
}

impl<'a> Features<'a> {
    fn new(data: &'a Dataset, label: usize) -> Self {
        let schema = data.schema();
        let numeric = schema.numeric_indices();
        let categorical = schema
            .categorical_indices()
            .into_iter()
            .filter(|&i| i != label)
            .map(|i| (i, schema.columns()[i].vocabulary().map_or(0, |v| v.len())))
            .collect();
        Features {
            data,
            numeric,
            categorical,
        }
    }
}

/// Accuracy of each classifier trained on `synth_train` and scored on
/// `real_test`, plus their mean.
pub fn utility(synth_train: &Dataset, real_test: &Dataset, label: &str) -> Result<(f64, Vec<ClassifierScore>)> {
    check_same_schema(synth_train, real_test)?;
    let label_idx = synth_train
        .schema()
        .column_index(label)
        .ok_or(Error::MissingLabelColumn)?;
    let classes = match &synth_train.schema().columns()[label_idx].vocabulary() {
        Some(v) => v.len(),
        None => return Err(Error::MissingLabelColumn),
    };
    if synth_train.is_empty() || real_test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train = Features::new(synth_train, label_idx);
    let test = Features::new(real_test, label_idx);
    let y_train: Vec<usize> = synth_train.categorical(label_idx).iter().map(|&c| c as usize).collect();
    let y_test: Vec<usize> = real_test.categorical(label_idx).iter().map(|&c| c as usize).collect();

    let accuracy = |pred: Vec<usize>| {
        pred.iter().zip(&y_test).filter(|(a, b)| a == b).count() as f64 / y_test.len() as f64
    };
    let scores = vec![
        ClassifierScore {
            classifier: "logistic_regression".into(),
            accuracy: accuracy(LogisticRegression::fit(&train, &y_train, classes).predict(&test)),
        },
        ClassifierScore {
            classifier: "naive_bayes".into(),
            accuracy: accuracy(NaiveBayes::fit(&train, &y_train, classes).predict(&test)),
        },
        ClassifierScore {
            classifier: "decision_tree".into(),
            accuracy: accuracy(DecisionTree::fit(&train, &y_train, classes).predict(&test)),
        },
    ];
    let mean = scores.iter().map(|s| s.accuracy).sum::<f64>() / scores.len() as f64;
    Ok((mean, scores))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax regression on standardized numerics and one-hot categoricals,
/// full-batch gradient descent from zero weights.
struct LogisticRegression {
    scaling: Vec<(f64, f64)>,
    weights: Vec<f64>,
    width: usize,
    classes: usize,
}

impl LogisticRegression {
    fn design(f: &Features<'_>, scaling: &[(f64, f64)]) -> (Vec<f64>, usize) {
        let width = 1 + f.numeric.len() + f.categorical.iter().map(|c| c.1).sum::<usize>();
        let rows = f.data.n_rows();
        let mut x = vec![0.0; rows * width];
        for r in 0..rows {
            let row = &mut x[r * width..(r + 1) * width];
            row[0] = 1.0;
            let mut k = 1;
            for (j, &ci) in f.numeric.iter().enumerate() {
                let (m, s) = scaling[j];
                row[k] = (f.data.numeric(ci)[r] - m) / s;
                k += 1;
            }
            for &(ci, size) in &f.categorical {
                row[k + f.data.categorical(ci)[r] as usize] = 1.0;
                k += size;
            }
        }
        (x, width)
    }

    fn fit(f: &Features<'_>, y: &[usize], classes: usize) -> Self {
        let scaling: Vec<(f64, f64)> = f
            .numeric
            .iter()
            .map(|&ci| {
                let (m, s) = mean_std(f.data.numeric(ci));
                (m, if s > 0.0 { s } else { 1.0 })
            })
            .collect();
        let (x, width) = Self::design(f, &scaling);
        let n = y.len();
        let mut w = vec![0.0; width * classes];
        let mut probs = vec![0.0; classes];
        for _ in 0..LOGISTIC_ITERATIONS {
            let mut grad = vec![0.0; width * classes];
            for (r, &label) in y.iter().enumerate() {
                let xr = &x[r * width..(r + 1) * width];
                softmax_scores(xr, &w, classes, &mut probs);
                for k in 0..classes {
                    let g = probs[k] - if k == label { 1.0 } else { 0.0 };
                    if g != 0.0 {
                        for (gw, &xv) in grad[k * width..(k + 1) * width].iter_mut().zip(xr) {
                            *gw += g * xv;
                        }
                    }
                }
            }
            for (wv, gv) in w.iter_mut().zip(&grad) {
                *wv -= LOGISTIC_RATE * (gv / n as f64 + LOGISTIC_L2 * *wv);
            }
        }
        LogisticRegression {
            scaling,
            weights: w,
            width,
            classes,
        }
    }

    fn predict(&self, f: &Features<'_>) -> Vec<usize> {
        let (x, width) = Self::design(f, &self.scaling);
        debug_assert_eq!(width, self.width);
        let mut probs = vec![0.0; self.classes];
        (0..f.data.n_rows())
            .map(|r| {
                softmax_scores(&x[r * width..(r + 1) * width], &self.weights, self.classes, &mut probs);
                argmax(&probs)
            })
            .collect()
    }
}

fn softmax_scores(x: &[f64], w: &[f64], classes: usize, out: &mut [f64]) {
    let width = x.len();
    for k in 0..classes {
        out[k] = w[k * width..(k + 1) * width].iter().zip(x).map(|(a, b)| a * b).sum();
    }
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Gaussian likelihood for numerics, Laplace-smoothed categorical
/// likelihood for categoricals, Laplace-smoothed class prior.
struct NaiveBayes {
    log_prior: Vec<f64>,
    /// Per class, per numeric feature: (mean, variance).
    gaussian: Vec<Vec<(f64, f64)>>,
    /// Per class, per categorical feature, per category: log probability.
    categorical: Vec<Vec<Vec<f64>>>,
}

impl NaiveBayes {
    fn fit(f: &Features<'_>, y: &[usize], classes: usize) -> Self {
        let n = y.len();
        let mut counts = vec![0usize; classes];
        for &c in y {
            counts[c] += 1;
        }
        let log_prior = counts
            .iter()
            .map(|&c| ((c + 1) as f64 / (n + classes) as f64).ln())
            .collect();
        // Variance floor relative to the largest feature variance.
        let max_var = f
            .numeric
            .iter()
            .map(|&ci| mean_std(f.data.numeric(ci)).1.powi(2))
            .fold(0.0, f64::max);
        let floor = 1e-9 * max_var.max(1e-12);
        let gaussian = (0..classes)
            .map(|k| {
                f.numeric
                    .iter()
                    .map(|&ci| {
                        let vals: Vec<f64> = f
                            .data
                            .numeric(ci)
                            .iter()
                            .zip(y)
                            .filter(|(_, &c)| c == k)
                            .map(|(&v, _)| v)
                            .collect();
                        if vals.is_empty() {
                            (0.0, 1.0)
                        } else {
                            let (m, s) = mean_std(&vals);
                            (m, s * s + floor)
                        }
                    })
                    .collect()
            })
            .collect();
        let categorical = (0..classes)
            .map(|k| {
                f.categorical
                    .iter()
                    .map(|&(ci, size)| {
                        let mut c = vec![1.0; size];
                        for (&v, &label) in f.data.categorical(ci).iter().zip(y) {
                            if label == k {
                                c[v as usize] += 1.0;
                            }
                        }
                        let total: f64 = c.iter().sum();
                        c.iter().map(|v| (v / total).ln()).collect()
                    })
                    .collect()
            })
            .collect();
        NaiveBayes {
            log_prior,
            gaussian,
            categorical,
        }
    }

    fn predict(&self, f: &Features<'_>) -> Vec<usize> {
        let classes = self.log_prior.len();
        (0..f.data.n_rows())
            .map(|r| {
                let scores: Vec<f64> = (0..classes)
                    .map(|k| {
                        let mut s = self.log_prior[k];
                        for (j, &ci) in f.numeric.iter().enumerate() {
                            let (m, v) = self.gaussian[k][j];
                            let x = f.data.numeric(ci)[r];
                            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
                        }
                        for (j, &(ci, _)) in f.categorical.iter().enumerate() {
                            s += self.categorical[k][j][f.data.categorical(ci)[r] as usize];
                        }
                        s
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Split {
    /// Go left when `x <= threshold`.
    Numeric { column: usize, threshold: f64 },
    /// Go left when the category equals `value`.
    Categorical { column: usize, value: u32 },
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(usize),
    Branch { split: Split, left: Box<Node>, right: Box<Node> },
}

/// CART tree grown on Gini impurity with a depth limit.
struct DecisionTree {
    root: Node,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    fn fit(f: &Features<'_>, y: &[usize], classes: usize) -> Self {
        let rows: Vec<usize> = (0..y.len()).collect();
        DecisionTree {
            root: Self::grow(f, y, classes, rows, 0),
        }
    }

    fn grow(f: &Features<'_>, y: &[usize], classes: usize, rows: Vec<usize>, depth: usize) -> Node {
        let mut counts = vec![0usize; classes];
        for &r in &rows {
            counts[y[r]] += 1;
        }
        let n = rows.len();
        let parent = gini(&counts, n);
        if depth >= TREE_MAX_DEPTH || n < 2 * TREE_MIN_LEAF || parent == 0.0 {
            return Node::Leaf(majority(&counts));
        }
        let mut best: Option<(f64, Split)> = None;
        let mut consider = |score: f64, split: Split| {
            if score < parent - 1e-12 && best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, split));
            }
        };

        for &ci in &f.numeric {
            let col = f.data.numeric(ci);
            let mut order = rows.clone();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left = vec![0usize; classes];
            for i in 0..n - 1 {
                left[y[order[i]]] += 1;
                let (a, b) = (col[order[i]], col[order[i + 1]]);
                let nl = i + 1;
                if a == b || nl < TREE_MIN_LEAF || n - nl < TREE_MIN_LEAF {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                consider(
                    score,
                    Split::Numeric {
                        column: ci,
                        threshold: 0.5 * (a + b),
                    },
                );
            }
        }

        for &(ci, size) in &f.categorical {
            let col = f.data.categorical(ci);
            let mut per = vec![vec![0usize; classes]; size];
            for &r in &rows {
                per[col[r] as usize][y[r]] += 1;
            }
            for (value, left) in per.iter().enumerate() {
                let nl: usize = left.iter().sum();
                if nl < TREE_MIN_LEAF || n - nl < TREE_MIN_LEAF {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(left).map(|(t, l)| t - l).collect();
                let score = (nl as f64 * gini(left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                consider(
                    score,
                    Split::Categorical {
                        column: ci,
                        value: value as u32,
                    },
                );
            }
        }

        let Some((_, split)) = best else {
            return Node::Leaf(majority(&counts));
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&row| goes_left(&split, f.data, row));
        Node::Branch {
            left: Box::new(Self::grow(f, y, classes, l, depth + 1)),
            right: Box::new(Self::grow(f, y, classes, r, depth + 1)),
            split,
        }
    }

    fn predict(&self, f: &Features<'_>) -> Vec<usize> {
        (0..f.data.n_rows())
            .map(|r| {
                let mut node = &self.root;
                loop {
                    match node {
                        Node::Leaf(c) => return *c,
                        Node::Branch { split, left, right } => {
                            node = if goes_left(split, f.data, r) { left } else { right };
                        }
                    }
                }
            })
            .collect()
    }
}

fn goes_left(split: &Split, data: &Dataset, row: usize) -> bool {
    match *split {
        Split::Numeric { column, threshold } => match data.column(column) {
            Column::Numeric(v) => v[row] <= threshold,
            Column::Categorical(_) => unreachable!(),
        },
        Split::Categorical { column, value } => data.categorical(column)[row] == value,
    }
}
