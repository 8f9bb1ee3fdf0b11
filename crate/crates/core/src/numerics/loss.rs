/// Numerically stable binary cross-entropy on a raw logit.
///
/// Returns `(loss, dloss/dlogit)`. The loss is evaluated as
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`, which never overflows.
pub fn bce_with_logits(logit: f64, label: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - label)
}

/// Mean loss over a batch together with the per-logit gradient of that mean.
pub fn bce_with_logits_mean(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(logits.len(), labels.len());
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let (l, g) = bce_with_logits(z, y);
            total += l;
            g / n
        })
        .collect();
    (total / n, grads)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
