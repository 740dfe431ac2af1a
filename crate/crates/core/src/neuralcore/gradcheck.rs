//! Central finite-difference verification of every layer and loss, in the
//! 64-bit profile. Used by the verify command and the acceptance suite.

use rand::{Rng, SeedableRng};

use crate::neuralcore::layers::{LayerSpec, Padding};
use crate::neuralcore::loss::{cross_entropy_loss, mse_loss};
use crate::neuralcore::network::{Network, NetworkSpec};
use crate::neuralcore::tensor::Tensor;
use crate::seed::{derive_seed, Prng};

/// Loss closed over its target, so the whole forward becomes a scalar
/// function of parameters and input.
#[derive(Debug, Clone)]
pub enum CheckLoss {
    Mse(Tensor<f64>),
    CrossEntropy(Vec<usize>),
}

/// Train-mode loss with a fixed dropout stream: every evaluation re-seeds
/// the rng, so finite differencing sees frozen masks.
pub fn loss_of(net: &Network<f64>, x: &Tensor<f64>, loss: &CheckLoss, mask_seed: u64) -> f64 {
    let mut rng = Prng::seed_from_u64(mask_seed);
    let (out, _) = net.forward_train(x, &mut rng).expect("forward");
    match loss {
        CheckLoss::Mse(target) => mse_loss(&out, target).expect("mse").0,
        CheckLoss::CrossEntropy(labels) => {
            cross_entropy_loss(&out, labels).expect("ce").0
        }
    }
}

/// Backprop gradients for parameters and input.
pub fn analytic_grads(
    net: &Network<f64>,
    x: &Tensor<f64>,
    loss: &CheckLoss,
    mask_seed: u64,
) -> (Vec<Tensor<f64>>, Tensor<f64>) {
    let mut rng = Prng::seed_from_u64(mask_seed);
    let (out, cache) = net.forward_train(x, &mut rng).expect("forward");
    let out_grad = match loss {
        CheckLoss::Mse(target) => mse_loss(&out, target).expect("mse").1,
        CheckLoss::CrossEntropy(labels) => {
            cross_entropy_loss(&out, labels).expect("ce").1
        }
    };
    net.backward(&cache, &out_grad)
}

/// Central finite differences with step `h` for parameters and input.
pub fn numeric_grads(
    net: &Network<f64>,
    x: &Tensor<f64>,
    loss: &CheckLoss,
    mask_seed: u64,
    h: f64,
) -> (Vec<Tensor<f64>>, Tensor<f64>) {
    let mut work = net.clone();
    let mut param_grads = Vec::with_capacity(net.params.len());
    for pi in 0..net.params.len() {
        let mut g = Tensor::zeros(net.params[pi].shape());
        for e in 0..net.params[pi].numel() {
            let orig = work.params[pi].data()[e];
            work.params[pi].data_mut()[e] = orig + h;
            let lp = loss_of(&work, x, loss, mask_seed);
            work.params[pi].data_mut()[e] = orig - h;
            let lm = loss_of(&work, x, loss, mask_seed);
            work.params[pi].data_mut()[e] = orig;
            g.data_mut()[e] = (lp - lm) / (2.0 * h);
        }
        param_grads.push(g);
    }
    let mut xg = Tensor::zeros(x.shape());
    let mut xw = x.clone();
    for e in 0..x.numel() {
        let orig = xw.data()[e];
        xw.data_mut()[e] = orig + h;
        let lp = loss_of(net, &xw, loss, mask_seed);
        xw.data_mut()[e] = orig - h;
        let lm = loss_of(net, &xw, loss, mask_seed);
        xw.data_mut()[e] = orig;
        xg.data_mut()[e] = (lp - lm) / (2.0 * h);
    }
    (param_grads, xg)
}

/// Worst elementwise relative error, with a 1e-6 floor on the denominator.
pub fn max_rel_err(analytic: &[Tensor<f64>], numeric: &[Tensor<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&av, &nv) in a.data().iter().zip(n.data()) {
            let denom = av.abs().max(nv.abs()).max(1e-6);
            worst = worst.max((av - nv).abs() / denom);
        }
    }
    worst
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub name: &'static str,
    pub net: NetworkSpec,
    pub cross_entropy: bool,
}

/// One instance per layer/loss combination named in the acceptance gate.
pub fn standard_cases() -> Vec<CaseSpec> {
    let conv = |oc, kernel, padding| LayerSpec::Conv2d {
        out_channels: oc,
        kernel,
        padding,
    };
    vec![
        CaseSpec {
            name: "Conv2d(1x21)",
            net: NetworkSpec {
                input_shape: vec![1, 2, 32],
                layers: vec![conv(2, (1, 21), Padding::symmetric(0, 10))],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "Conv2d(2x21)",
            net: NetworkSpec {
                input_shape: vec![2, 2, 24],
                layers: vec![conv(3, (2, 21), Padding::symmetric(0, 10))],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "Conv2d(2x21,height-preserving)",
            net: NetworkSpec {
                input_shape: vec![2, 2, 24],
                layers: vec![conv(
                    3,
                    (2, 21),
                    Padding {
                        top: 1,
                        bottom: 0,
                        left: 10,
                        right: 10,
                    },
                )],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "Linear",
            net: NetworkSpec {
                input_shape: vec![7],
                layers: vec![LayerSpec::Linear { out_features: 4 }],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "ReLU",
            net: NetworkSpec {
                input_shape: vec![6],
                layers: vec![LayerSpec::Linear { out_features: 5 }, LayerSpec::ReLU],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "Dropout(train,fixed-mask)",
            net: NetworkSpec {
                input_shape: vec![6],
                layers: vec![
                    LayerSpec::Linear { out_features: 5 },
                    LayerSpec::Dropout { rate: 0.5 },
                ],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "Softmax",
            net: NetworkSpec {
                input_shape: vec![5],
                layers: vec![LayerSpec::Linear { out_features: 6 }, LayerSpec::Softmax],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "loss:mse",
            net: NetworkSpec {
                input_shape: vec![9],
                layers: vec![LayerSpec::Linear { out_features: 5 }],
            },
            cross_entropy: false,
        },
        CaseSpec {
            name: "loss:cross_entropy",
            net: NetworkSpec {
                input_shape: vec![9],
                layers: vec![LayerSpec::Linear { out_features: 6 }],
            },
            cross_entropy: true,
        },
    ]
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub instances: usize,
    pub max_rel_err: f64,
    pub ok: bool,
}

/// Builds a random instance (net params, input, targets) for a case.
pub fn build_instance(
    case: &CaseSpec,
    instance: u64,
) -> (Network<f64>, Tensor<f64>, CheckLoss, u64) {
    let seed = derive_seed(0xC0FFEE, &[instance]);
    let net = Network::init(case.net.clone(), derive_seed(seed, &[1])).unwrap();
    let mut rng = Prng::seed_from_u64(derive_seed(seed, &[2]));
    let batch = 2usize;
    let mut xshape = vec![batch];
    xshape.extend_from_slice(&case.net.input_shape);
    let x_data: Vec<f64> = (0..xshape.iter().product())
        .map(|_| rng.gen_range(-1.5..1.5))
        .collect();
    let x = Tensor::from_vec(&xshape, x_data);
    let out_shape = case.net.output_shape().unwrap();
    let loss = if case.cross_entropy {
        let k = out_shape[0];
        CheckLoss::CrossEntropy((0..batch).map(|_| rng.gen_range(0..k)).collect())
    } else {
        let mut tshape = vec![batch];
        tshape.extend_from_slice(&out_shape);
        let t_data: Vec<f64> = (0..tshape.iter().product())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        CheckLoss::Mse(Tensor::from_vec(&tshape, t_data))
    };
    let mask_seed = derive_seed(seed, &[3]);
    (net, x, loss, mask_seed)
}

pub fn check_case(case: &CaseSpec, instances: usize) -> CaseResult {
    let mut worst = 0.0f64;
    for k in 0..instances {
        let (net, x, loss, mask_seed) = build_instance(case, k as u64);
        let (ag, axg) = analytic_grads(&net, &x, &loss, mask_seed);
        let (ng, nxg) = numeric_grads(&net, &x, &loss, mask_seed, GRADCHECK_STEP);
        worst = worst.max(max_rel_err(&ag, &ng));
        worst = worst.max(max_rel_err(
            std::slice::from_ref(&axg),
            std::slice::from_ref(&nxg),
        ));
    }
    CaseResult {
        name: case.name.to_string(),
        instances,
        max_rel_err: worst,
        ok: worst < GRADCHECK_TOLERANCE,
    }
}

/// The full suite; every layer type and both losses.
pub fn run_gradient_checks(instances: usize) -> Vec<CaseResult> {
    standard_cases()
        .iter()
        .map(|c| check_case(c, instances))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_standard_cases_pass_at_tolerance() {
        for result in run_gradient_checks(5) {
            assert!(
                result.ok,
                "{}: max rel err {}",
                result.name, result.max_rel_err
            );
        }
    }

    // A planted sign error in Conv2d's weight gradient must be caught, and
    // the failing case must name the layer.
    #[test]
    fn injected_conv_backward_sign_error_is_detected() {
        let case = &standard_cases()[0];
        assert!(case.name.contains("Conv2d"));
        let (net, x, loss, mask_seed) = build_instance(case, 0);
        let (mut ag, _) = analytic_grads(&net, &x, &loss, mask_seed);
        for v in ag[0].data_mut() {
            *v = -*v;
        }
        let (ng, _) = numeric_grads(&net, &x, &loss, mask_seed, GRADCHECK_STEP);
        let err = max_rel_err(&ag, &ng);
        assert!(
            err > GRADCHECK_TOLERANCE,
            "sign flip in {} went unnoticed (err {err})",
            case.name
        );
    }

    #[test]
    fn zero_output_grad_gives_zero_param_grads() {
        let case = &standard_cases()[1];
        let (net, x, _, mask_seed) = build_instance(case, 0);
        let mut rng = Prng::seed_from_u64(mask_seed);
        let (out, cache) = net.forward_train(&x, &mut rng).unwrap();
        let zero = Tensor::zeros(out.shape());
        let (grads, xg) = net.backward(&cache, &zero);
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
        assert!(xg.data().iter().all(|&v| v == 0.0));
    }

    // backward(alpha * g) = alpha * backward(g)
    #[test]
    fn backward_is_linear_in_the_output_gradient() {
        let case = &standard_cases()[2];
        let (net, x, _, mask_seed) = build_instance(case, 1);
        let mut rng = Prng::seed_from_u64(mask_seed);
        let (out, cache) = net.forward_train(&x, &mut rng).unwrap();
        let g1_data: Vec<f64> = (0..out.numel()).map(|i| (i as f64 * 0.37).sin()).collect();
        let g1 = Tensor::from_vec(out.shape(), g1_data.clone());
        let g2 = Tensor::from_vec(
            out.shape(),
            g1_data.iter().map(|v| v * 2.5).collect::<Vec<_>>(),
        );
        let (grads1, _) = net.backward(&cache, &g1);
        let (grads2, _) = net.backward(&cache, &g2);
        for (a, b) in grads1.iter().zip(&grads2) {
            for (&x1, &x2) in a.data().iter().zip(b.data()) {
                assert!((x2 - 2.5 * x1).abs() < 1e-9 * x1.abs().max(1.0));
            }
        }
    }
}
