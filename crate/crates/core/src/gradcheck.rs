//! Central finite-difference checks of every backward pass, over randomized
//! shapes and values.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::genvae::{vae_backward_with_noise, vae_loss_with_noise, VaeArch, VaeModel};
use crate::layers::{
    avg_pool_halve, avg_pool_halve_backward, conv1d_backward, conv1d_forward, relu, relu_backward,
    upsample_double, upsample_double_backward, ConvLayer, Padding,
};
use crate::loss::{
    kl_standard_normal, kl_standard_normal_backward, l1_loss, l1_loss_backward, l2_loss,
    l2_loss_backward, reparameterize_backward, reparameterize_with_noise, softmax_cross_entropy,
    softmax_cross_entropy_backward,
};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradReport {
    /// Randomized cases (one shape/seed draw each).
    pub cases: usize,
    /// Individual coordinates compared.
    pub checks: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Compares `analytic[i]` with the central difference of `loss` along
    /// coordinate `i` of `point`.
    pub fn check(
        &mut self,
        what: &str,
        point: &[f64],
        analytic: &[f64],
        loss: impl Fn(&[f64]) -> f64,
    ) {
        if point.len() != analytic.len() {
            self.failures.push(format!(
                "{what}: {} coordinates, {} gradients",
                point.len(),
                analytic.len()
            ));
            return;
        }
        let mut p = point.to_vec();
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + STEP;
            let up = loss(&p);
            p[i] = orig - STEP;
            let down = loss(&p);
            p[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let e = relative_error(analytic[i], numeric);
            self.checks += 1;
            self.worst = self.worst.max(e);
            if !(e <= REL_TOL) {
                self.failures.push(format!(
                    "{what}[{i}]: analytic {} numeric {numeric} rel {e:e}",
                    analytic[i]
                ));
            }
        }
    }
}

fn randn<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Standard normal values pushed at least `gap` away from zero, keeping
/// kinks outside the difference stencil.
fn away_from_zero<R: Rng + ?Sized>(rng: &mut R, n: usize, gap: f64) -> Vec<f64> {
    randn(rng, n)
        .into_iter()
        .map(|v| {
            if v.abs() < gap {
                v.signum() * gap + v
            } else {
                v
            }
        })
        .collect()
}

fn tensor(d: usize, h: usize, v: Vec<f64>) -> Tensor {
    Tensor::from_values(d, h, v).expect("sizes match")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn conv_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    let (i, o, k) = (
        rng.random_range(1..4),
        rng.random_range(1..4),
        rng.random_range(1..7),
    );
    let padding = if rng.random_bool(0.5) {
        Padding::SameZero
    } else {
        Padding::Valid
    };
    let h = rng.random_range(if padding == Padding::Valid { k } else { 1 }..k + 10);
    let x = tensor(i, h, randn(rng, i * h));
    let w = randn(rng, o * i * k);
    let b = randn(rng, o);
    let layer = ConvLayer::with_params(i, o, k, w.clone(), b.clone()).expect("valid layer");
    let mut out = conv1d_forward(&x, &layer, padding).expect("valid shapes");
    let probe = randn(rng, out.values().len());
    out.grad_mut().copy_from_slice(&probe);
    let (mut xg, mut lg) = (x.clone(), layer.clone());
    conv1d_backward(&mut xg, &mut lg, padding, &out).expect("valid shapes");

    let f = |xv: &[f64], wv: &[f64], bv: &[f64]| {
        let l = ConvLayer::with_params(i, o, k, wv.to_vec(), bv.to_vec()).expect("valid layer");
        dot(
            conv1d_forward(&tensor(i, h, xv.to_vec()), &l, padding)
                .expect("valid shapes")
                .values(),
            &probe,
        )
    };
    report.check("conv input", x.values(), xg.grad(), |p| f(p, &w, &b));
    report.check("conv weights", &w, &lg.weight_grad, |p| {
        f(x.values(), p, &b)
    });
    report.check("conv bias", &b, &lg.bias_grad, |p| f(x.values(), &w, p));
    report.cases += 1;
}

fn unary_case<R: Rng + ?Sized>(
    rng: &mut R,
    report: &mut GradReport,
    name: &str,
    fwd: impl Fn(&Tensor) -> Tensor,
    bwd: impl Fn(&mut Tensor, &Tensor),
) {
    let (d, h) = (rng.random_range(1..4), rng.random_range(2..15));
    let x = tensor(d, h, away_from_zero(rng, d * h, 1e-2));
    let mut out = fwd(&x);
    let probe = randn(rng, out.values().len());
    out.grad_mut().copy_from_slice(&probe);
    let mut xg = x.clone();
    bwd(&mut xg, &out);
    report.check(name, x.values(), xg.grad(), |p| {
        dot(fwd(&tensor(d, h, p.to_vec())).values(), &probe)
    });
    report.cases += 1;
}

pub fn relu_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    unary_case(rng, report, "relu", relu, |x, o| {
        relu_backward(x, o).expect("same shape")
    });
}

pub fn pool_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    unary_case(
        rng,
        report,
        "average pool",
        |x| avg_pool_halve(x).expect("height >= 2"),
        |x, o| avg_pool_halve_backward(x, o).expect("matching shapes"),
    );
}

pub fn upsample_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    unary_case(rng, report, "upsample", upsample_double, |x, o| {
        upsample_double_backward(x, o).expect("matching shapes")
    });
}

/// Weighted cross-entropy, L2 and L1 (away from its kink).
pub fn loss_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    let (d, h) = (rng.random_range(2..6), rng.random_range(1..12));
    let logits = tensor(d, h, randn(rng, d * h));
    let labels: Vec<usize> = (0..h).map(|_| rng.random_range(0..d)).collect();
    let weights: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
    let mut g = logits.clone();
    softmax_cross_entropy_backward(&mut g, &labels, &weights).expect("valid labels");
    report.check("cross entropy", logits.values(), g.grad(), |p| {
        softmax_cross_entropy(&tensor(d, h, p.to_vec()), &labels, &weights).expect("valid labels")
    });

    let pred = tensor(d, h, randn(rng, d * h));
    let target = tensor(d, h, randn(rng, d * h));
    let mut g = pred.clone();
    l2_loss_backward(&mut g, &target).expect("same shape");
    report.check("l2", pred.values(), g.grad(), |p| {
        l2_loss(&tensor(d, h, p.to_vec()), &target).expect("same shape")
    });

    let offsets = away_from_zero(rng, d * h, 1e-2);
    let pred = tensor(
        d,
        h,
        target
            .values()
            .iter()
            .zip(&offsets)
            .map(|(t, o)| t + o)
            .collect(),
    );
    let mut g = pred.clone();
    l1_loss_backward(&mut g, &target).expect("same shape");
    report.check("l1", pred.values(), g.grad(), |p| {
        l1_loss(&tensor(d, h, p.to_vec()), &target).expect("same shape")
    });
    report.cases += 1;
}

/// KL to the standard normal and reparameterization with frozen noise.
pub fn latent_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    let h = rng.random_range(1..10);
    let mean = tensor(1, h, randn(rng, h));
    let lv = tensor(1, h, randn(rng, h));
    let (mut mg, mut lg) = (mean.clone(), lv.clone());
    kl_standard_normal_backward(&mut mg, &mut lg).expect("same shape");
    report.check("kl mean", mean.values(), mg.grad(), |p| {
        kl_standard_normal(&tensor(1, h, p.to_vec()), &lv).expect("same shape")
    });
    report.check("kl log variance", lv.values(), lg.grad(), |p| {
        kl_standard_normal(&mean, &tensor(1, h, p.to_vec())).expect("same shape")
    });

    let noise = randn(rng, h);
    let probe = randn(rng, h);
    let mut z = reparameterize_with_noise(&mean, &lv, &noise).expect("same shape");
    z.grad_mut().copy_from_slice(&probe);
    let (mut mg, mut lg) = (mean.clone(), lv.clone());
    reparameterize_backward(&mut mg, &mut lg, &noise, &z).expect("same shape");
    let f = |m: &Tensor, l: &Tensor| {
        dot(
            reparameterize_with_noise(m, l, &noise)
                .expect("same shape")
                .values(),
            &probe,
        )
    };
    report.check("reparameterize mean", mean.values(), mg.grad(), |p| {
        f(&tensor(1, h, p.to_vec()), &lv)
    });
    report.check("reparameterize log variance", lv.values(), lg.grad(), |p| {
        f(&mean, &tensor(1, h, p.to_vec()))
    });
    report.cases += 1;
}

/// Whole VAE objective (L2 + KL) with frozen noise, against every weight of
/// a small model.
pub fn vae_case<R: Rng + ?Sized>(rng: &mut R, report: &mut GradReport) {
    let model = VaeModel::new(
        &VaeArch {
            kernel_height: 3,
            widths: [4, 5],
        },
        rng,
    )
    .expect("valid arch");
    let h = 8;
    let deltas = tensor(
        3,
        h,
        randn(rng, 3 * h).into_iter().map(|v| 0.5 * v).collect(),
    );
    let noise = randn(rng, h / 4);
    let mut grads = model.clone();
    grads.layers.iter_mut().for_each(ConvLayer::zero_grad);
    vae_backward_with_noise(&mut grads, &deltas, &noise).expect("valid shapes");
    for li in 0..model.layers.len() {
        let loss = |p: &[f64]| {
            let mut m = model.clone();
            m.layers[li].weights.copy_from_slice(p);
            vae_loss_with_noise(&m, &deltas, &noise).expect("valid shapes")
        };
        report.check(
            "vae weights",
            &model.layers[li].weights,
            &grads.layers[li].weight_grad,
            loss,
        );
    }
    report.cases += 1;
}

/// 40 convolution cases, 15 each of ReLU, pooling and upsampling, 20 loss
/// cases, 20 latent cases and 3 whole-VAE cases.
pub fn run_suite<R: Rng + ?Sized>(rng: &mut R) -> GradReport {
    let mut report = GradReport::default();
    for _ in 0..40 {
        conv_case(rng, &mut report);
    }
    for _ in 0..15 {
        relu_case(rng, &mut report);
        pool_case(rng, &mut report);
        upsample_case(rng, &mut report);
    }
    for _ in 0..20 {
        loss_case(rng, &mut report);
        latent_case(rng, &mut report);
    }
    for _ in 0..3 {
        vae_case(rng, &mut report);
    }
    report
}
