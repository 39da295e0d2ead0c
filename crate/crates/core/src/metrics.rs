//! Dice overlap, the soft-Dice training loss and its logit gradient, and
//! the Average BvSB uncertainty score.
//!
//! All sums are accumulated in `f64` in row-major pixel order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{LabelMap, Logits, ProbMap, NUM_CLASSES};

/// Additive smoothing of the soft Dice ratio, numerator and denominator.
pub const SOFT_DICE_EPS: f64 = 1e-6;

fn same_dims(a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::DimMismatch {
            left: a.to_vec(),
            right: b.to_vec(),
        });
    }
    Ok(())
}

/// `2|A∩B| / (|A|+|B|)` for the pixels of `class_id`; 1.0 when the class is absent from both.
pub fn hard_dice(pred: &LabelMap, gt: &LabelMap, class_id: u8) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    if class_id as usize >= NUM_CLASSES {
        return Err(Error::invariant(format!("class id {class_id} out of range")));
    }
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let (ip, ig) = (p == class_id, g == class_id);
        a += ip as usize;
        b += ig as usize;
        inter += (ip && ig) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

/// Hard Dice for every class, plus the mean over the three tissues.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiceReport {
    pub per_class: [f64; NUM_CLASSES],
    pub mean_foreground: f64,
}

impl DiceReport {
    pub const CSV_HEADER: &'static str = "class_0,class_1,class_2,class_3,mean_foreground";

    pub fn from_per_class(per_class: [f64; NUM_CLASSES]) -> Self {
        let mean_foreground = per_class[1..].iter().sum::<f64>() / (NUM_CLASSES - 1) as f64;
        Self {
            per_class,
            mean_foreground,
        }
    }

    /// Class-wise arithmetic mean of several reports.
    pub fn mean(reports: &[DiceReport]) -> Option<DiceReport> {
        if reports.is_empty() {
            return None;
        }
        let mut acc = [0.0; NUM_CLASSES];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.per_class) {
                *a += v;
            }
        }
        Some(Self::from_per_class(acc.map(|a| a / reports.len() as f64)))
    }

    pub fn to_csv_row(&self) -> String {
        let p = self.per_class;
        format!("{},{},{},{},{}", p[0], p[1], p[2], p[3], self.mean_foreground)
    }
}

pub fn dice_report(pred: &LabelMap, gt: &LabelMap) -> Result<DiceReport> {
    same_dims(pred.dims(), gt.dims())?;
    let mut per_class = [0.0; NUM_CLASSES];
    for (c, slot) in per_class.iter_mut().enumerate() {
        *slot = hard_dice(pred, gt, c as u8)?;
    }
    Ok(DiceReport::from_per_class(per_class))
}

/// Multi-class soft Dice loss: `4 - Σ_c DSC_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub per_class_soft_dsc: [f64; NUM_CLASSES],
}

/// Per-class running sums of the soft Dice ratio.
#[derive(Default, Clone, Copy)]
struct DiceSums {
    intersection: [f64; NUM_CLASSES],
    pred_mass: [f64; NUM_CLASSES],
    gt_mass: [f64; NUM_CLASSES],
}

impl DiceSums {
    fn accumulate(probs: &[f64], gt: &[u8]) -> Self {
        let mut s = Self::default();
        for (px, &g) in probs.chunks_exact(NUM_CLASSES).zip(gt) {
            for (m, &v) in s.pred_mass.iter_mut().zip(px) {
                *m += v;
            }
            s.intersection[g as usize] += px[g as usize];
            s.gt_mass[g as usize] += 1.0;
        }
        s
    }

    fn numerator(&self, c: usize) -> f64 {
        2.0 * self.intersection[c] + SOFT_DICE_EPS
    }

    fn denominator(&self, c: usize) -> f64 {
        self.pred_mass[c] + self.gt_mass[c] + SOFT_DICE_EPS
    }

    fn loss(&self) -> LossValue {
        let mut per_class_soft_dsc = [0.0; NUM_CLASSES];
        for (c, d) in per_class_soft_dsc.iter_mut().enumerate() {
            *d = self.numerator(c) / self.denominator(c);
        }
        let value = NUM_CLASSES as f64 - per_class_soft_dsc.iter().sum::<f64>();
        LossValue {
            value,
            per_class_soft_dsc,
        }
    }
}

pub fn soft_dice_loss<S: Scalar>(pred: &ProbMap<S>, gt: &LabelMap) -> Result<LossValue> {
    same_dims(pred.dims(), gt.dims())?;
    let probs: Vec<f64> = pred.data().iter().map(|v| v.widen()).collect();
    Ok(DiceSums::accumulate(&probs, gt.data()).loss())
}

/// Numerically stable softmax of each 4-channel pixel, in place.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    for px in values.chunks_exact_mut(NUM_CLASSES) {
        let max = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in px.iter_mut() {
            *v /= sum;
        }
    }
}

pub fn softmax<S: Scalar>(logits: &Logits<S>) -> ProbMap<S> {
    let mut p: Vec<f64> = logits.data().iter().map(|v| v.widen()).collect();
    softmax_in_place(&mut p);
    ProbMap::new(logits.dims().to_vec(), p.into_iter().map(S::narrow).collect()).expect("softmax output is normalized")
}

/// Loss and `∂L/∂logits` for softmax probabilities `probs` (f64, interleaved).
///
/// With `a_c(x) = ∂L/∂p_c(x) = -(2 g_c(x) den_c - num_c) / den_c²`, the chain
/// through the softmax Jacobian gives `∂L/∂z_k(x) = p_k (a_k - Σ_c p_c a_c)`.
pub(crate) fn loss_and_logit_grad(probs: &[f64], gt: &[u8]) -> (LossValue, Vec<f64>) {
    let sums = DiceSums::accumulate(probs, gt);
    let loss = sums.loss();
    // a_c(x) = coef_bg[c] + g_c(x) * coef_fg[c]
    let mut base = [0.0; NUM_CLASSES];
    let mut hit = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let den = sums.denominator(c);
        base[c] = sums.numerator(c) / (den * den);
        hit[c] = -2.0 / den;
    }
    let mut grad = vec![0.0; probs.len()];
    for ((px, out), &g) in probs
        .chunks_exact(NUM_CLASSES)
        .zip(grad.chunks_exact_mut(NUM_CLASSES))
        .zip(gt)
    {
        let mut a = base;
        a[g as usize] += hit[g as usize];
        let mean: f64 = (0..NUM_CLASSES).map(|c| px[c] * a[c]).sum();
        for k in 0..NUM_CLASSES {
            out[k] = px[k] * (a[k] - mean);
        }
    }
    (loss, grad)
}

/// Analytic gradient of `soft_dice_loss(softmax(logits), gt)` with respect to the logits.
pub fn soft_dice_grad<S: Scalar>(logits: &Logits<S>, gt: &LabelMap) -> Result<Logits<S>> {
    same_dims(logits.dims(), gt.dims())?;
    let mut p = Vec::with_capacity(logits.data().len());
    for (i, v) in logits.data().iter().enumerate() {
        let v = v.widen();
        if !v.is_finite() {
            return Err(Error::invariant(format!("non-finite logit {v} at flat index {i}")));
        }
        p.push(v);
    }
    softmax_in_place(&mut p);
    let (_, grad) = loss_and_logit_grad(&p, gt.data());
    Logits::new(logits.dims().to_vec(), grad.into_iter().map(S::narrow).collect())
}

/// Best-versus-second-best margin of one pixel.
#[inline]
pub(crate) fn pixel_margin(px: &[f64]) -> f64 {
    let (mut best, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in px {
        if v > best {
            second = best;
            best = v;
        } else if v > second {
            second = v;
        }
    }
    best - second
}

/// Mean best-versus-second-best margin over all pixels; lower means more uncertain.
pub fn average_bvsb<S: Scalar>(pred: &ProbMap<S>) -> f64 {
    let mut px = [0.0; NUM_CLASSES];
    let mut total = 0.0;
    for chunk in pred.data().chunks_exact(NUM_CLASSES) {
        for (d, v) in px.iter_mut().zip(chunk) {
            *d = v.widen();
        }
        total += pixel_margin(&px);
    }
    total / pred.num_pixels() as f64
}
