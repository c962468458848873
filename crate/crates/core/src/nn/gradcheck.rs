use crate::Scalar;

use super::{Activation, Matrix, Mlp, NnError, Result};

/// Gradients smaller than this in magnitude are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

const CHUNK: usize = 256;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error<T: Scalar>(analytic: T, numeric: T) -> T {
    let scale = analytic.abs().max(numeric.abs()).max(T::lit(RELATIVE_ERROR_FLOOR));
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport<T> {
    pub max_param_error: T,
    /// Worst error over input coordinates, when requested.
    pub max_input_error: Option<T>,
    pub checked: usize,
    /// Entries whose central difference straddled a ReLU kink and were
    /// estimated one-sided from the side that keeps the activation pattern.
    pub one_sided: usize,
}

impl<T: Scalar> GradCheckReport<T> {
    pub fn max_error(&self) -> T {
        self.max_input_error.map_or(self.max_param_error, |e| e.max(self.max_param_error))
    }
}

/// Worst relative error between [`Mlp::backward`] and central differences of
/// the summed output, over every parameter.
pub fn grad_check<T: Scalar>(params: &Mlp<T>, input: &[T], epsilon: T) -> Result<T> {
    let upstream = vec![T::one(); params.output_dim()];
    Ok(grad_check_with(params, input, &upstream, epsilon, false)?.max_param_error)
}

/// Checks the gradient of `<upstream, forward(input)>` against central
/// differences on every parameter and, when `check_input`, every input
/// coordinate.
pub fn grad_check_with<T: Scalar>(
    params: &Mlp<T>,
    input: &[T],
    upstream: &[T],
    epsilon: T,
    check_input: bool,
) -> Result<GradCheckReport<T>> {
    if !(epsilon > T::lit(1e-8) && epsilon < T::lit(1e-3)) {
        return Err(NnError::Config(format!("finite-difference step {epsilon} outside (1e-8, 1e-3)")));
    }
    let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
    let cache = params.forward_batch(&x)?;
    let up = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
    let (grads, input_grad) = params.backward_batch(&cache, &up, check_input)?;

    let checker = Checker {
        net: params,
        cache_pre: &cache.pre,
        upstream,
        f0: dot(upstream, cache.output.row(0)),
        eps: epsilon,
    };
    let mut report = GradCheckReport {
        max_param_error: T::zero(),
        max_input_error: None,
        checked: 0,
        one_sided: 0,
    };

    for (l, layer) in params.layers().iter().enumerate() {
        let x_l = cache.inputs[l].row(0);
        // perturbing W[o][i] moves only unit o's pre-activation, by eps * x_l[i]
        let mut perturbations = Vec::with_capacity(layer.weights.len() + layer.bias.len());
        for o in 0..layer.outputs {
            for &xi in x_l {
                perturbations.push((o, xi));
            }
        }
        for o in 0..layer.outputs {
            perturbations.push((o, T::one()));
        }
        let analytic: Vec<T> = grads.layers[l].weights.iter().chain(&grads.layers[l].bias).copied().collect();
        let numeric = checker.numeric(l, perturbations.len(), &mut report.one_sided, |z, k, sign| {
            let (o, scale) = perturbations[k];
            z[o] += sign * epsilon * scale;
        });
        for (&a, &n) in analytic.iter().zip(&numeric) {
            report.max_param_error = report.max_param_error.max(relative_error(a, n));
        }
        report.checked += analytic.len();
    }

    if let Some(dx) = input_grad {
        let first = &params.layers()[0];
        let numeric = checker.numeric(0, first.inputs, &mut report.one_sided, |z, i, sign| {
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += sign * epsilon * first.weight(o, i);
            }
        });
        let worst = dx
            .row(0)
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| relative_error(a, n))
            .fold(T::zero(), T::max);
        report.max_input_error = Some(worst);
        report.checked += first.inputs;
    }
    Ok(report)
}

struct Checker<'a, T> {
    net: &'a Mlp<T>,
    cache_pre: &'a [Matrix<T>],
    upstream: &'a [T],
    f0: T,
    eps: T,
}

impl<T: Scalar> Checker<'_, T> {
    /// Finite-difference derivatives for `count` perturbations of layer
    /// `layer`'s pre-activation. `perturb(z, k, sign)` shifts row `z` by the
    /// effect of moving entry `k` by `sign * eps`.
    fn numeric(
        &self,
        layer: usize,
        count: usize,
        one_sided: &mut usize,
        perturb: impl Fn(&mut [T], usize, T),
    ) -> Vec<T> {
        let base = self.cache_pre[layer].row(0);
        let width = base.len();
        let mut out = Vec::with_capacity(count);
        let mut start = 0;
        while start < count {
            let n = CHUNK.min(count - start);
            let mut batch = Matrix::zeros(2 * n, width);
            for k in 0..n {
                for (r, sign) in [(2 * k, T::one()), (2 * k + 1, -T::one())] {
                    let row = batch.row_mut(r);
                    row.copy_from_slice(base);
                    perturb(row, start + k, sign);
                }
            }
            let (y, pres) = self.net.forward_from(layer, batch);
            for k in 0..n {
                let (rp, rm) = (2 * k, 2 * k + 1);
                let fp = dot(self.upstream, y.row(rp));
                let fm = dot(self.upstream, y.row(rm));
                let keep_p = self.same_pattern(layer, &pres, rp);
                let keep_m = self.same_pattern(layer, &pres, rm);
                let d = match (keep_p, keep_m) {
                    (false, true) => {
                        *one_sided += 1;
                        (self.f0 - fm) / self.eps
                    }
                    (true, false) => {
                        *one_sided += 1;
                        (fp - self.f0) / self.eps
                    }
                    _ => (fp - fm) / (self.eps + self.eps),
                };
                out.push(d);
            }
            start += n;
        }
        out
    }

    /// Whether row `row` of a perturbed pass keeps the unperturbed ReLU signs.
    fn same_pattern(&self, layer: usize, pres: &[Matrix<T>], row: usize) -> bool {
        if self.net.hidden_activation() != Activation::Relu {
            return true;
        }
        let hidden = self.net.layers().len() - 1;
        (layer..hidden).all(|m| {
            let perturbed = pres[m - layer].row(row);
            let base = self.cache_pre[m].row(0);
            perturbed
                .iter()
                .zip(base)
                .all(|(&a, &b)| (a > T::zero()) == (b > T::zero()))
        })
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, MlpSpec, OutputActivation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_networks_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [MlpSpec::actor(7, 2, 3), MlpSpec::critic(12)] {
            let net = Mlp::<f64>::new(&spec, &mut rng).unwrap();
            let x: Vec<f64> = (0..spec.input).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..spec.output).map(|_| rng.random_range(-1.0..1.0)).collect();
            let report = grad_check_with(&net, &x, &up, 1e-5, true).unwrap();
            assert!(report.max_error() < 1e-4, "{report:?}");
            assert_eq!(report.checked, net.num_params() + spec.input);
        }
    }

    #[test]
    fn linear_network_is_near_exact() {
        let spec = MlpSpec {
            input: 5,
            hidden: vec![4, 4],
            output: 2,
            hidden_activation: Activation::Identity,
            output_activation: OutputActivation::Identity,
        };
        let net = Mlp::<f64>::new(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        // on a linear map the step only affects rounding
        let err = grad_check(&net, &[0.5, -0.25, 1.0, 0.4, 0.75], 1e-4).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn one_parameter_network() {
        // y = tanh(w x) with w = 0.3, x = 2: dy/dw = x (1 - tanh^2(w x))
        let net = Mlp::from_layers(
            vec![Layer { inputs: 1, outputs: 1, weights: vec![0.3], bias: vec![0.0] }],
            Activation::Relu,
            OutputActivation::Tanh,
        )
        .unwrap();
        let (g, _) = net.backward(&[2.0], &[1.0], false).unwrap();
        let expected = 2.0 * (1.0 - (0.6f64).tanh().powi(2));
        assert!((g.layers[0].weights[0] - expected).abs() < 1e-15);
        assert!(grad_check(&net, &[2.0], 1e-5).unwrap() < 1e-9);
    }

    #[test]
    fn relative_error_scale() {
        assert!(relative_error(1.0, 1.001) > 1e-4);
        assert!(relative_error(1e-9, 2e-9) < 1e-2);
        assert_eq!(relative_error(0.0f64, 0.0), 0.0);
    }

    #[test]
    fn epsilon_out_of_range() {
        let net = Mlp::<f64>::zeros(&MlpSpec::critic(2)).unwrap();
        assert!(matches!(grad_check(&net, &[0.0, 0.0], 1e-2), Err(NnError::Config(_))));
        assert!(matches!(grad_check(&net, &[0.0, 0.0], 1e-9), Err(NnError::Config(_))));
    }

    #[test]
    fn kink_straddling_entries_fall_back_to_one_side() {
        // hidden unit pre-activation sits 1e-7 above zero, inside the step
        let net = Mlp::from_layers(
            vec![
                Layer { inputs: 1, outputs: 1, weights: vec![1.0], bias: vec![1e-7 - 1.0] },
                Layer { inputs: 1, outputs: 1, weights: vec![2.0], bias: vec![0.0] },
            ],
            Activation::Relu,
            OutputActivation::Identity,
        )
        .unwrap();
        let report = grad_check_with(&net, &[1.0], &[1.0], 1e-5, true).unwrap();
        assert!(report.one_sided > 0);
        assert!(report.max_error() < 1e-6, "{report:?}");
    }
}
