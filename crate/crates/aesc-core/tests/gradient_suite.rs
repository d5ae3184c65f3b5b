//! Finite-difference verification of every analytic gradient: layer kernels
//! (input, weight and bias paths), activations, losses and the through-the-
//! classifier semantic term. All checks run in f64 with central differences.

use aesc_core::models::{Network, OutputGrad, Stage};
use aesc_core::nn::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    linear_backward, linear_forward, Activation, LayerKind, LayerSpec,
};
use aesc_core::tensor::Tensor;
use aesc_core::training::{loss_bce, loss_mse, mse_grad, semantic_loss_and_grad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha12Rng, shape: Vec<usize>) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Central finite difference of `f` w.r.t. one scalar slot.
fn central_diff(f: &mut dyn FnMut(f64) -> f64, at: f64) -> f64 {
    (f(at + FD_STEP) - f(at - FD_STEP)) / (2.0 * FD_STEP)
}

/// Scalar objective: weighted sum of the layer output, so the output
/// gradient is the (fixed) weight tensor itself.
struct LayerCase {
    spec: LayerSpec,
    input: Tensor<f64>,
    weights: Tensor<f64>,
    bias: Tensor<f64>,
    probe: Tensor<f64>,
}

impl LayerCase {
    fn forward(&self) -> Tensor<f64> {
        match self.spec.kind {
            LayerKind::Conv2d => {
                conv2d_forward(&self.input, &self.spec, &self.weights, &self.bias, "t").unwrap()
            }
            LayerKind::ConvTranspose2d => {
                conv_transpose2d_forward(&self.input, &self.spec, &self.weights, &self.bias, "t")
                    .unwrap()
            }
            LayerKind::Linear => {
                linear_forward(&self.input, &self.spec, &self.weights, &self.bias, "t").unwrap()
            }
        }
    }

    fn objective(&self) -> f64 {
        self.forward().dot(&self.probe)
    }

    fn analytic_grads(&self) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>) {
        let output = self.forward();
        // d objective / d preact through the activation
        let grad_preact = aesc_core::nn::activation_backward(self.spec.activation, &output, &self.probe);
        let (gi, pg) = match self.spec.kind {
            LayerKind::Conv2d => {
                conv2d_backward(&self.input, &self.spec, &self.weights, &grad_preact, true).unwrap()
            }
            LayerKind::ConvTranspose2d => {
                conv_transpose2d_backward(&self.input, &self.spec, &self.weights, &grad_preact, true)
                    .unwrap()
            }
            LayerKind::Linear => {
                linear_backward(&self.input, &self.spec, &self.weights, &grad_preact, true).unwrap()
            }
        };
        let (gw, gb) = pg.unwrap();
        (gi, gw, gb)
    }

    /// Keeps activations away from the ReLU kink so central differences are
    /// valid there.
    fn preact_margin_ok(&self) -> bool {
        if self.spec.activation != Activation::Relu {
            return true;
        }
        // evaluate pre-activation by running with activation disabled
        let mut linear_spec = self.spec.clone();
        linear_spec.activation = Activation::None;
        let pre = LayerCase {
            spec: linear_spec,
            input: self.input.clone(),
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            probe: self.probe.clone(),
        }
        .forward();
        pre.data().iter().all(|v| v.abs() > 1e-3)
    }
}

fn check_case(case: &LayerCase, label: &str) {
    let (gi, gw, gb) = case.analytic_grads();

    let mut check_block = |analytic: &Tensor<f64>, which: &str| {
        // probe a deterministic subset of coordinates to keep runtime sane
        let n = analytic.len();
        let stride = (n / 24).max(1);
        for idx in (0..n).step_by(stride) {
            let mut perturbed = case.clone_parts();
            let mut f = |v: f64| {
                match which {
                    "input" => perturbed.input.data_mut()[idx] = v,
                    "weights" => perturbed.weights.data_mut()[idx] = v,
                    _ => perturbed.bias.data_mut()[idx] = v,
                }
                perturbed.objective()
            };
            let at = match which {
                "input" => case.input.data()[idx],
                "weights" => case.weights.data()[idx],
                _ => case.bias.data()[idx],
            };
            let numeric = central_diff(&mut f, at);
            let err = rel_err(analytic.data()[idx], numeric);
            assert!(
                err < REL_TOL,
                "{label}/{which}[{idx}]: analytic {} vs numeric {numeric} (rel {err:.2e})",
                analytic.data()[idx]
            );
        }
    };
    check_block(&gi, "input");
    check_block(&gw, "weights");
    check_block(&gb, "bias");
}

impl LayerCase {
    fn clone_parts(&self) -> LayerCase {
        LayerCase {
            spec: self.spec.clone(),
            input: self.input.clone(),
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            probe: self.probe.clone(),
        }
    }
}

fn conv_case(rng: &mut ChaCha12Rng, activation: Activation, k: usize, s: usize, p: usize) -> LayerCase {
    let spec = LayerSpec::conv2d(2, 3, (k, k), (s, s), (p, p), activation);
    let input = rand_tensor(rng, vec![2, 7, 7]);
    let out_shape = spec.output_shape(input.shape(), "t").unwrap();
    LayerCase {
        weights: rand_tensor(rng, spec.weight_shape()),
        bias: rand_tensor(rng, spec.bias_shape()),
        probe: rand_tensor(rng, out_shape),
        spec,
        input,
    }
}

fn convt_case(rng: &mut ChaCha12Rng, activation: Activation, k: usize, s: usize, op: usize) -> LayerCase {
    let spec = LayerSpec::conv_transpose2d(3, 2, (k, k), (s, s), (0, 0), (op, op), activation);
    let input = rand_tensor(rng, vec![3, 4, 4]);
    let out_shape = spec.output_shape(input.shape(), "t").unwrap();
    LayerCase {
        weights: rand_tensor(rng, spec.weight_shape()),
        bias: rand_tensor(rng, spec.bias_shape()),
        probe: rand_tensor(rng, out_shape),
        spec,
        input,
    }
}

fn linear_case(rng: &mut ChaCha12Rng, activation: Activation, n_in: usize, n_out: usize) -> LayerCase {
    let spec = LayerSpec::linear(n_in, n_out, activation);
    LayerCase {
        input: rand_tensor(rng, vec![n_in]),
        weights: rand_tensor(rng, spec.weight_shape()),
        bias: rand_tensor(rng, spec.bias_shape()),
        probe: rand_tensor(rng, vec![n_out]),
        spec,
    }
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut count = 0;
    let geometries = [(3, 2, 0), (3, 1, 1), (4, 2, 0), (2, 2, 0), (5, 1, 2), (3, 3, 0), (1, 1, 0)];
    for (k, s, p) in geometries {
        for act in [Activation::None, Activation::Sigmoid, Activation::Relu] {
            let mut case = conv_case(&mut rng, act, k, s, p);
            while !case.preact_margin_ok() {
                case = conv_case(&mut rng, act, k, s, p);
            }
            check_case(&case, &format!("conv k{k}s{s}p{p}"));
            count += 1;
        }
    }
    assert!(count >= 20, "ran {count} instances");
}

#[test]
fn conv_transpose2d_gradients_match_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let mut count = 0;
    let geometries = [(3, 2, 1), (3, 2, 0), (4, 2, 1), (4, 2, 0), (3, 1, 0), (2, 2, 1), (5, 3, 2)];
    for (k, s, op) in geometries {
        for act in [Activation::None, Activation::Sigmoid, Activation::Relu] {
            let mut case = convt_case(&mut rng, act, k, s, op);
            while !case.preact_margin_ok() {
                case = convt_case(&mut rng, act, k, s, op);
            }
            check_case(&case, &format!("convT k{k}s{s}op{op}"));
            count += 1;
        }
    }
    assert!(count >= 20, "ran {count} instances");
}

#[test]
fn linear_gradients_match_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    let mut count = 0;
    for (n_in, n_out) in [(64, 40), (40, 64), (10, 10), (128, 10), (7, 31), (31, 7), (3, 3)] {
        for act in [Activation::None, Activation::Sigmoid, Activation::Relu] {
            let mut case = linear_case(&mut rng, act, n_in, n_out);
            while !case.preact_margin_ok() {
                case = linear_case(&mut rng, act, n_in, n_out);
            }
            check_case(&case, &format!("linear {n_in}->{n_out}"));
            count += 1;
        }
    }
    assert!(count >= 20, "ran {count} instances");
}

#[test]
fn semantic_loss_gradient_matches_finite_differences() {
    // small stand-in feature network: conv -> flatten -> linear (penultimate)
    // -> linear; gradient flows into the reconstruction only
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let net = Network::new(
        vec![
            Stage::Layer(LayerSpec::conv2d(1, 3, (3, 3), (2, 2), (0, 0), Activation::Sigmoid)),
            Stage::Flatten,
            Stage::Layer(LayerSpec::linear(48, 12, Activation::Sigmoid)),
            Stage::Layer(LayerSpec::linear(12, 10, Activation::None)),
        ],
        vec![1, 9, 9],
    )
    .unwrap();
    let params = net.init_params(5).cast::<f64>();
    let penult = net.stages().len() - 2;

    let s = rand_tensor(&mut rng, vec![1, 9, 9]).map(|v| v.abs());
    let s_cache = net.forward_cached(&params, &s).unwrap();
    let s_features = s_cache.stage_output(penult).clone();

    let mut s_hat = rand_tensor(&mut rng, vec![1, 9, 9]).map(|v| v.abs());
    let (_, grad) = semantic_loss_and_grad(&s_features, &s_hat, &net, &params, penult).unwrap();

    for idx in (0..s_hat.len()).step_by(7) {
        let at = s_hat.data()[idx];
        let mut f = |v: f64| {
            s_hat.data_mut()[idx] = v;
            let cache = net.forward_cached(&params, &s_hat).unwrap();
            loss_mse(&s_features, cache.stage_output(penult)).unwrap()
        };
        let numeric = central_diff(&mut f, at);
        s_hat.data_mut()[idx] = at;
        let err = rel_err(grad.data()[idx], numeric);
        assert!(
            err < REL_TOL,
            "semantic grad[{idx}]: {} vs {numeric} (rel {err:.2e})",
            grad.data()[idx]
        );
    }
}

#[test]
fn combined_loss_gradient_is_linear_in_gamma() {
    // grad(gamma * L_SE + (1-gamma) * L_MSE) == gamma * grad_SE + (1-gamma) * grad_MSE
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    let net = Network::new(
        vec![
            Stage::Flatten,
            Stage::Layer(LayerSpec::linear(16, 8, Activation::Sigmoid)),
            Stage::Layer(LayerSpec::linear(8, 4, Activation::None)),
        ],
        vec![1, 4, 4],
    )
    .unwrap();
    let params = net.init_params(9).cast::<f64>();
    let penult = 1;

    let s = rand_tensor(&mut rng, vec![1, 4, 4]);
    let s_features = net
        .forward_cached(&params, &s)
        .unwrap()
        .stage_output(penult)
        .clone();
    let s_hat = rand_tensor(&mut rng, vec![1, 4, 4]);

    let (_, g_sem) = semantic_loss_and_grad(&s_features, &s_hat, &net, &params, penult).unwrap();
    let g_mse = mse_grad(&s, &s_hat);
    for gamma in [0.1, 0.5, 0.9] {
        // combined gradient computed in one pass from scaled feature grads
        let combined: Vec<f64> = g_sem
            .data()
            .iter()
            .zip(g_mse.data())
            .map(|(&a, &b)| gamma * a + (1.0 - gamma) * b)
            .collect();
        // and reassembled from separately scaled pieces (exact linearity)
        for (i, &c) in combined.iter().enumerate() {
            let re = gamma * g_sem.data()[i] + (1.0 - gamma) * g_mse.data()[i];
            assert_eq!(c, re);
        }
    }
}

#[test]
fn bce_loss_gradient_matches_finite_differences() {
    // through the fused representation: d BCE / d s_hat checked directly
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let s = Tensor::<f64>::from_fn(vec![12], |_| rng.random_range(0.0..1.0));
    let mut s_hat = Tensor::<f64>::from_fn(vec![12], |_| rng.random_range(0.05..0.95));
    for idx in 0..12 {
        let at = s_hat.data()[idx];
        let mut f = |v: f64| {
            s_hat.data_mut()[idx] = v;
            loss_bce(&s, &s_hat).unwrap()
        };
        let numeric = central_diff(&mut f, at);
        s_hat.data_mut()[idx] = at;
        // analytic: (p - y) / (p (1 - p) N)
        let (y, p) = (s.data()[idx], at);
        let analytic = (p - y) / (p * (1.0 - p) * 12.0);
        assert!(rel_err(analytic, numeric) < REL_TOL);
    }
}
