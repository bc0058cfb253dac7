//! Segmentation losses on S² cells and confusion-matrix metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::projection::IGNORE;
use crate::sphere::S2Signal;

/// Positive per-class loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig("class weights must be finite and positive".into()));
        }
        Ok(Self(w))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0; classes])
    }

    pub fn get(&self) -> &[f64] {
        &self.0
    }
}

/// `w_c = 1 / ln(1.02 + f_c)`; classes never seen get the largest weight.
pub fn compute_weights(histogram: &[u64]) -> Result<ClassWeights> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut w: Vec<Option<f64>> = histogram
        .iter()
        .map(|&h| (h > 0).then(|| 1.0 / (1.02 + h as f64 / total as f64).ln()))
        .collect();
    let max = w.iter().flatten().cloned().fold(f64::MIN, f64::max);
    w.iter_mut().for_each(|v| *v = Some(v.unwrap_or(max)));
    ClassWeights::new(w.into_iter().flatten().collect())
}

fn check_shapes(x: &S2Signal, targets: &[u8]) -> Result<()> {
    if targets.len() != x.plane_len() {
        return Err(Error::ShapeMismatch(format!("{} targets for {} cells", targets.len(), x.plane_len())));
    }
    Ok(())
}

/// Per-cell softmax over channels, with max subtraction.
pub fn softmax(logits: &S2Signal) -> S2Signal {
    let (c, n) = (logits.channels(), logits.plane_len());
    let x = logits.values();
    let mut out = vec![0.0; c * n];
    for i in 0..n {
        let max = (0..c).map(|k| x[k * n + i]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for k in 0..c {
            let e = (x[k * n + i] - max).exp();
            out[k * n + i] = e;
            sum += e;
        }
        for k in 0..c {
            out[k * n + i] /= sum;
        }
    }
    S2Signal::from_vec(logits.bw(), c, out).expect("same shape")
}

/// Per-cell argmax over channels; ties go to the lowest class.
pub fn argmax(x: &S2Signal) -> Vec<u8> {
    let (c, n) = (x.channels(), x.plane_len());
    let v = x.values();
    (0..n)
        .map(|i| {
            let mut best = 0;
            for k in 1..c {
                if v[k * n + i] > v[best * n + i] {
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}

/// Weighted cross-entropy averaged over valid cells, and its gradient wrt logits.
pub fn weighted_xent(logits: &S2Signal, targets: &[u8], weights: &ClassWeights) -> Result<(f64, Vec<f64>)> {
    check_shapes(logits, targets)?;
    let (c, n) = (logits.channels(), logits.plane_len());
    if weights.0.len() != c {
        return Err(Error::ShapeMismatch(format!("{} weights for {c} classes", weights.0.len())));
    }
    let valid = targets.iter().filter(|&&y| y != IGNORE).count();
    if valid == 0 {
        return Err(Error::AllIgnored);
    }
    let p = softmax(logits);
    let (p, x) = (p.values(), logits.values());
    let mut grad = vec![0.0; c * n];
    let mut loss = 0.0;
    let scale = 1.0 / valid as f64;
    for (i, &y) in targets.iter().enumerate() {
        if y == IGNORE {
            continue;
        }
        let y = y as usize;
        if y >= c {
            return Err(Error::ShapeMismatch(format!("label {y} outside {c} classes")));
        }
        let max = (0..c).map(|k| x[k * n + i]).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + (0..c).map(|k| (x[k * n + i] - max).exp()).sum::<f64>().ln();
        let w = weights.0[y];
        loss += w * (lse - x[y * n + i]);
        for k in 0..c {
            grad[k * n + i] = w * scale * (p[k * n + i] - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

/// Lovász extension of the Jaccard loss for one class: value and gradient wrt
/// the error vector.
pub fn lovasz_class(errors: &[f64], fg: &[bool]) -> (f64, Vec<f64>) {
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let gts = fg.iter().filter(|&&f| f).count() as f64;
    let mut grad = vec![0.0; errors.len()];
    let (mut loss, mut prev) = (0.0, 0.0);
    let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
    for &i in &order {
        if fg[i] {
            cum_fg += 1.0;
        } else {
            cum_bg += 1.0;
        }
        let jac = 1.0 - (gts - cum_fg) / (gts + cum_bg);
        let g = jac - prev;
        prev = jac;
        grad[i] = g;
        loss += g * errors[i];
    }
    (loss, grad)
}

/// Lovász-softmax averaged over classes present among valid cells; gradient wrt `probs`.
pub fn lovasz_softmax(probs: &S2Signal, targets: &[u8]) -> Result<(f64, Vec<f64>)> {
    check_shapes(probs, targets)?;
    let (c, n) = (probs.channels(), probs.plane_len());
    let valid: Vec<usize> = (0..n).filter(|&i| targets[i] != IGNORE).collect();
    if valid.is_empty() {
        return Err(Error::AllIgnored);
    }
    let p = probs.values();
    let present: Vec<usize> = (0..c).filter(|&k| valid.iter().any(|&i| targets[i] as usize == k)).collect();
    let mut grad = vec![0.0; c * n];
    let mut loss = 0.0;
    let scale = 1.0 / present.len() as f64;
    for &k in &present {
        let fg: Vec<bool> = valid.iter().map(|&i| targets[i] as usize == k).collect();
        let errors: Vec<f64> =
            valid.iter().zip(&fg).map(|(&i, &f)| if f { 1.0 - p[k * n + i] } else { p[k * n + i] }).collect();
        let (l, g) = lovasz_class(&errors, &fg);
        loss += l;
        for ((&i, &f), &gi) in valid.iter().zip(&fg).zip(&g) {
            grad[k * n + i] = scale * if f { -gi } else { gi };
        }
    }
    Ok((loss * scale, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub xent: f64,
    pub lovasz: f64,
    /// Gradient of `total` wrt the logits.
    pub grad: Vec<f64>,
}

/// Weighted cross-entropy plus Lovász-softmax, differentiated wrt logits.
pub fn total_loss(logits: &S2Signal, targets: &[u8], weights: &ClassWeights) -> Result<LossValue> {
    let (xent, mut grad) = weighted_xent(logits, targets, weights)?;
    let probs = softmax(logits);
    let (lovasz, gp) = lovasz_softmax(&probs, targets)?;
    let (c, n) = (logits.channels(), logits.plane_len());
    let p = probs.values();
    for i in 0..n {
        let dot: f64 = (0..c).map(|k| p[k * n + i] * gp[k * n + i]).sum();
        for k in 0..c {
            grad[k * n + i] += p[k * n + i] * (gp[k * n + i] - dot);
        }
    }
    Ok(LossValue { total: xent + lovasz, xent, lovasz, grad })
}

/// Counts `[truth][prediction]`; pairs with an ignored truth are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn add(&mut self, truth: u8, pred: u8) {
        if truth == IGNORE || truth as usize >= self.classes || pred as usize >= self.classes {
            return;
        }
        self.counts[truth as usize * self.classes + pred as usize] += 1;
    }

    pub fn add_all(&mut self, truth: &[u8], pred: &[u8]) {
        truth.iter().zip(pred).for_each(|(&t, &p)| self.add(t, p));
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "class count");
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub miou: f64,
    pub accuracy: f64,
    /// `None` for classes absent from both truth and prediction.
    pub iou: Vec<Option<f64>>,
}

pub fn miou_accuracy(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let c = cm.classes;
    let iou: Vec<Option<f64>> = (0..c)
        .map(|k| {
            let tp = cm.get(k, k);
            let fp: u64 = (0..c).filter(|&t| t != k).map(|t| cm.get(t, k)).sum();
            let fneg: u64 = (0..c).filter(|&p| p != k).map(|p| cm.get(k, p)).sum();
            let union = tp + fp + fneg;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = iou.iter().flatten().cloned().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    let accuracy = (0..c).map(|k| cm.get(k, k)).sum::<u64>() as f64 / total as f64;
    Ok(Metrics { miou, accuracy, iou })
}

/// Metrics report for one evaluation level (cells or points).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub level: String,
    pub miou: f64,
    pub accuracy: f64,
    pub classes: Vec<ClassReport>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: usize,
    pub name: String,
    pub iou: Option<f64>,
    /// Cells or points whose true label is this class.
    pub count: u64,
}

pub fn metrics_report(level: &str, cm: &ConfusionMatrix, names: &[&str]) -> Result<MetricsReport> {
    let m = miou_accuracy(cm)?;
    let classes = (0..cm.classes)
        .map(|k| ClassReport {
            class: k,
            name: names.get(k).map_or_else(|| format!("class{k}"), |s| s.to_string()),
            iou: m.iou[k],
            count: (0..cm.classes).map(|p| cm.get(k, p)).sum(),
        })
        .collect();
    Ok(MetricsReport { level: level.into(), miou: m.miou, accuracy: m.accuracy, classes, total: cm.total() })
}
