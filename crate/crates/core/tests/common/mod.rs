//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::Rng;
use toric_core::nn::{Architecture, Batch, QNetwork};
use toric_core::{rng, CodeDistance};

/// He-initialised network with random biases in ±0.1 and order-one output
/// biases.
pub fn randomized(d: usize, seed: u64) -> QNetwork {
    let arch = Architecture::for_distance(CodeDistance::new(d).unwrap());
    let mut r = rng::stream(seed, 1);
    let mut net = QNetwork::random(arch, &mut r).unwrap();
    // nonzero biases keep pre-activations of all-zero patches off the ReLU kink
    for (i, t) in net.params_mut().iter_mut().enumerate() {
        if i % 2 == 1 {
            for b in &mut t.data {
                *b = r.random_range(-0.1..0.1);
            }
        }
    }
    // order-one outputs so relative comparisons are not dominated by cancellation
    let last = net.params().len() - 1;
    for b in &mut net.params_mut()[last].data {
        *b = if r.random_bool(0.5) { -1.0 } else { 1.0 } * r.random_range(0.5..2.0);
    }
    net
}

pub fn random_input(d: usize, r: &mut impl Rng) -> Vec<f64> {
    (0..d * d).map(|_| r.random_bool(0.3) as u8 as f64).collect()
}

/// Central differences with step 1e-5 of the loss on a sample of components
/// from every tensor: 40 random ones plus the 10 largest. Relative error must
/// be below 1e-4; components below 1e-7 in magnitude are held to an absolute
/// 1e-9 instead, since their relative error is floating-point cancellation.
/// Returns the number of components checked and the worst relative error.
pub fn gradient_check(d: usize, seed: u64) -> Result<(usize, f64), String> {
    let net = randomized(d, seed);
    let mut r = rng::stream(seed, 3);
    let mut batch = Batch::default();
    for _ in 0..6 {
        let x = random_input(d, &mut r);
        batch.push(&x, r.random_range(0..4), r.random_range(-4.0..0.0));
    }
    let grads = net.gradients(&batch).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (t, g) in grads.iter().enumerate() {
        let n = g.data.len();
        let mut picks: Vec<usize> = (0..40.min(n)).map(|_| r.random_range(0..n)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| g.data[b].abs().total_cmp(&g.data[a].abs()));
        picks.extend(order.into_iter().take(10));
        for idx in picks {
            let mut plus = net.clone();
            plus.params_mut()[t].data[idx] += h;
            let mut minus = net.clone();
            minus.params_mut()[t].data[idx] -= h;
            let numeric = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
            let analytic = g.data[idx];
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-7 {
                if (analytic - numeric).abs() >= 1e-9 {
                    return Err(format!("d={d} seed={seed} tensor {t}[{idx}]: {analytic} vs {numeric}"));
                }
            } else {
                let rel = (analytic - numeric).abs() / scale;
                worst = worst.max(rel);
                if rel >= 1e-4 {
                    return Err(format!("d={d} seed={seed} tensor {t}[{idx}]: {analytic} vs {numeric} (rel {rel:.2e})"));
                }
            }
            checked += 1;
        }
    }
    Ok((checked, worst))
}
