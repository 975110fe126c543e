use super::{GbmModel, Node, Schema, Tree, TrainConfig, MODEL_FORMAT_VERSION};
use crate::error::{Error, Result};

const HESSIAN_FLOOR: f64 = 1e-12;
const PROB_CLAMP: f64 = 1e-6;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Cross-entropy with a soft label `y`, as a function of the raw score.
pub fn xentropy(raw: f64, y: f64) -> f64 {
    // log(1+e^x) - y*x, stable for large |x|
    let softplus = if raw > 0.0 {
        raw + (-raw).exp().ln_1p()
    } else {
        raw.exp().ln_1p()
    };
    softplus - y * raw
}

/// First and second derivative of [`xentropy`] in the raw score:
/// `(p - y, p(1 - p))` with `p = sigmoid(raw)`.
pub fn xentropy_grad_hess(raw: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(raw);
    (p - y, p * (1.0 - p))
}

/// A chosen split: rows with `value <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda).max(HESSIAN_FLOOR)
}

/// Second-order split gain.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda))
}

/// Scans every feature's sorted row list for the best admissible split.
/// Ties keep the earlier (feature, threshold) because only a strictly
/// larger gain replaces the incumbent.
fn scan(
    rows: &[&[f64]],
    sorted: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    config: &TrainConfig,
) -> Option<Split> {
    let n = sorted.first().map_or(0, Vec::len);
    let min_leaf = config.min_data_in_leaf;
    if n < 2 * min_leaf {
        return None;
    }
    let (gt, ht) = sorted[0]
        .iter()
        .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
    let mut best: Option<Split> = None;
    for (f, order) in sorted.iter().enumerate() {
        let (mut gl, mut hl) = (0.0, 0.0);
        for i in 0..n - 1 {
            let r = order[i] as usize;
            gl += g[r];
            hl += h[r];
            let left = i + 1;
            if left < min_leaf {
                continue;
            }
            if n - left < min_leaf {
                break;
            }
            let v = rows[r][f];
            let next = rows[order[i + 1] as usize][f];
            if v >= next {
                continue;
            }
            let gain = split_gain(gl, hl, gt - gl, ht - hl, config.l2_reg);
            if best.is_none_or(|b| gain > b.gain) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > config.min_split_gain)
}

fn presort(rows: &[&[f64]], members: &[u32], n_features: usize) -> Vec<Vec<u32>> {
    (0..n_features)
        .map(|f| {
            let mut idx = members.to_vec();
            idx.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Best split over the rows `members` (indices into `rows`).
pub fn best_split(
    rows: &[&[f64]],
    members: &[usize],
    g: &[f64],
    h: &[f64],
    config: &TrainConfig,
) -> Option<Split> {
    let n_features = rows.first().map_or(0, |r| r.len());
    let members: Vec<u32> = members.iter().map(|&m| m as u32).collect();
    scan(rows, &presort(rows, &members, n_features), g, h, config)
}

struct Frontier {
    node: usize,
    sorted: Vec<Vec<u32>>,
    split: Option<Split>,
}

fn leaf_value(members: &[u32], g: &[f64], h: &[f64], config: &TrainConfig) -> f64 {
    let (gs, hs) = members
        .iter()
        .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
    -config.learning_rate * gs / (hs + config.l2_reg).max(HESSIAN_FLOOR)
}

fn grow_tree(rows: &[&[f64]], root_sorted: Vec<Vec<u32>>, g: &[f64], h: &[f64], config: &TrainConfig) -> Tree {
    let n_total = rows.len();
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        count: root_sorted[0].len(),
    }];
    let split = scan(rows, &root_sorted, g, h, config);
    let mut frontier = vec![Frontier {
        node: 0,
        sorted: root_sorted,
        split,
    }];
    let mut goes_left = vec![false; n_total];
    let mut n_leaves = 1;

    while n_leaves < config.max_leaves {
        // first-created frontier leaf wins gain ties
        let pick = frontier
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.split.map(|s| (i, s.gain)))
            .fold(None, |best: Option<(usize, f64)>, (i, gain)| match best {
                Some((_, bg)) if bg >= gain => best,
                _ => Some((i, gain)),
            });
        let Some((i, _)) = pick else { break };
        let leaf = frontier.remove(i);
        let s = leaf.split.expect("picked leaf has a split");
        for &r in &leaf.sorted[0] {
            goes_left[r as usize] = rows[r as usize][s.feature] <= s.threshold;
        }
        let (left_sorted, right_sorted): (Vec<Vec<u32>>, Vec<Vec<u32>>) = leaf
            .sorted
            .into_iter()
            .map(|order| order.into_iter().partition(|&r| goes_left[r as usize]))
            .unzip();
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf {
            value: 0.0,
            count: left_sorted[0].len(),
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            count: right_sorted[0].len(),
        });
        let count = match nodes[leaf.node] {
            Node::Leaf { count, .. } => count,
            Node::Split { count, .. } => count,
        };
        nodes[leaf.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            gain: s.gain,
            count,
            left: l,
            right: r,
        };
        for (node, sorted) in [(l, left_sorted), (r, right_sorted)] {
            let split = scan(rows, &sorted, g, h, config);
            frontier.push(Frontier { node, sorted, split });
        }
        n_leaves += 1;
    }
    for f in &frontier {
        let value = leaf_value(&f.sorted[0], g, h, config);
        if let Node::Leaf { value: v, .. } = &mut nodes[f.node] {
            *v = value;
        }
    }
    Tree { nodes }
}

/// Fits the boosted ensemble. `weights`, when given, scale every row's
/// gradient and hessian (and its share of the base score).
pub fn train_weighted(
    rows: &[&[f64]],
    labels: &[f64],
    weights: Option<&[f64]>,
    schema: &Schema,
    config: &TrainConfig,
) -> Result<GbmModel> {
    config.validate()?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if labels.len() != n {
        return Err(Error::invalid("label count differs from row count"));
    }
    if n < config.min_data_in_leaf {
        return Err(Error::invalid(format!(
            "{n} rows is fewer than min_data_in_leaf = {}",
            config.min_data_in_leaf
        )));
    }
    if let Some(&y) = labels.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::LabelOutOfRange(y));
    }
    let n_features = schema.feature_names.len();
    if rows.iter().any(|r| r.len() != n_features) {
        return Err(Error::invalid("row width differs from the feature schema"));
    }
    if rows.iter().any(|r| r.iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("feature values must be finite"));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != n => return Err(Error::invalid("weight count differs from row count")),
        Some(w) if w.iter().any(|x| !x.is_finite() || *x < 0.0) => {
            return Err(Error::invalid("weights must be finite and non-negative"))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let mean = labels.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let base_score = logit(mean.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));

    let mut model = GbmModel {
        format_version: MODEL_FORMAT_VERSION,
        registry_version: schema.registry_version.clone(),
        feature_names: schema.feature_names.clone(),
        base_score,
        config: config.clone(),
        trees: Vec::new(),
    };
    let constant = labels.iter().all(|&y| y == labels[0]);
    if constant || n_features == 0 {
        return Ok(model);
    }

    let all: Vec<u32> = (0..n as u32).collect();
    let sorted = presort(rows, &all, n_features);
    let mut raw = vec![base_score; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..config.num_trees {
        for i in 0..n {
            let (gi, hi) = xentropy_grad_hess(raw[i], labels[i]);
            g[i] = w[i] * gi;
            h[i] = w[i] * hi;
        }
        let tree = grow_tree(rows, sorted.clone(), &g, &h, config);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += tree.predict_raw(rows[i]);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

pub fn train(rows: &[&[f64]], labels: &[f64], schema: &Schema, config: &TrainConfig) -> Result<GbmModel> {
    train_weighted(rows, labels, None, schema, config)
}
