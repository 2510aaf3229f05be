use gancmp::data::{split_indices, SplitSpec};
use gancmp::gan::{discriminator_loss_value, generator_loss_value, total_objective_value, GeneratorLoss};
use gancmp::layers::{conv2d, conv2d_transpose, conv_output_size, sigmoid, tanh};
use gancmp::metrics::{auc, confusion, metrics, roc_curve};
use gancmp::models::{build_discriminator, build_generator, build_mlp_discriminator, build_mlp_generator, ForwardMode};
use gancmp::sampling::{rng_stream, Stream};
use gancmp::{Tape, Tensor, Var};
use proptest::prelude::*;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

/// `sum(x² · y) + sum(exp(x) / (1 + y²))`, built on a given tape.
fn graph_f(tape: &mut Tape, x: Var, y: Var) -> Var {
    let x2 = tape.square(x).unwrap();
    let a = tape.mul(x2, y).unwrap();
    let a = tape.sum_all(a).unwrap();
    let ex = tape.exp(x).unwrap();
    let y2 = tape.square(y).unwrap();
    let den = tape.add_scalar(y2, 1.0).unwrap();
    let b = tape.div(ex, den).unwrap();
    let b = tape.sum_all(b).unwrap();
    tape.add(a, b).unwrap()
}

/// `mean(x · y) - sum(log(1 + x²))`.
fn graph_g(tape: &mut Tape, x: Var, y: Var) -> Var {
    let xy = tape.mul(x, y).unwrap();
    let a = tape.mean_all(xy).unwrap();
    let x2 = tape.square(x).unwrap();
    let inner = tape.add_scalar(x2, 1.0).unwrap();
    let l = tape.log(inner).unwrap();
    let b = tape.sum_all(l).unwrap();
    tape.sub(a, b).unwrap()
}

fn grads_of(x: &Tensor, y: &Tensor, combine: impl Fn(&mut Tape, Var, Var) -> Var) -> (Tensor, Tensor) {
    let mut tape = Tape::new();
    let xv = tape.param(x.clone()).unwrap();
    let yv = tape.param(y.clone()).unwrap();
    let loss = combine(&mut tape, xv, yv);
    let g = tape.backward(loss).unwrap();
    (g.get(xv).unwrap().clone(), g.get(yv).unwrap().clone())
}

fn naive_conv(x: &Tensor, k: &Tensor, stride: usize, pad: usize) -> Vec<f64> {
    let [b, c, h, w] = x.shape().try_into().unwrap();
    let [f, _, kh, kw] = k.shape().try_into().unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; b * f * oh * ow];
    for n in 0..b {
        for o in 0..f {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for ch in 0..c {
                        for p in 0..kh {
                            for q in 0..kw {
                                let (r, s) = ((i * stride + p) as isize - pad as isize, (j * stride + q) as isize - pad as isize);
                                if r < 0 || s < 0 || r >= h as isize || s >= w as isize {
                                    continue;
                                }
                                acc += x.data()[((n * c + ch) * h + r as usize) * w + s as usize]
                                    * k.data()[((o * c + ch) * kh + p) * kw + q];
                            }
                        }
                    }
                    out[((n * f + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
struct ConvCase {
    x: Tensor,
    k: Tensor,
    stride: usize,
    pad: usize,
}

fn conv_case() -> impl Strategy<Value = ConvCase> {
    (1usize..3, 1usize..4, 1usize..4, 3usize..8, 1usize..4, 1usize..3, 0usize..2, any::<u64>())
        .prop_filter("kernel fits", |&(_, _, _, size, kernel, _, pad, _)| kernel <= size + 2 * pad)
        .prop_map(|(b, c, f, size, kernel, stride, pad, seed)| {
            let mut rng = rng_stream(seed, Stream::Data);
            ConvCase {
                x: Tensor::uniform(&[b, c, size, size], -2.0, 2.0, &mut rng),
                k: Tensor::uniform(&[f, c, kernel, kernel], -2.0, 2.0, &mut rng),
                stride,
                pad,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_is_linear(x in finite_vec(6), y in finite_vec(6), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (x, y) = (Tensor::new(&[2, 3], x).unwrap(), Tensor::new(&[2, 3], y).unwrap());
        let (fx, fy) = grads_of(&x, &y, graph_f);
        let (gx, gy) = grads_of(&x, &y, graph_g);
        let (hx, hy) = grads_of(&x, &y, |t, x, y| {
            let f = graph_f(t, x, y);
            let g = graph_g(t, x, y);
            let f = t.scale(f, a).unwrap();
            let g = t.scale(g, b).unwrap();
            t.add(f, g).unwrap()
        });
        for (h, (f, g)) in [(hx, (fx, gx)), (hy, (fy, gy))] {
            for i in 0..h.numel() {
                let expect = a * f.data()[i] + b * g.data()[i];
                prop_assert!((h.data()[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn identical_graphs_are_bitwise_identical(x in finite_vec(6), y in finite_vec(6)) {
        let (x, y) = (Tensor::new(&[3, 2], x).unwrap(), Tensor::new(&[3, 2], y).unwrap());
        let first = grads_of(&x, &y, graph_f);
        let second = grads_of(&x, &y, graph_f);
        prop_assert_eq!(first, second);
    }

    #[test]
    fn auc_survives_monotone_maps(scores in prop::collection::vec(-5.0f64..5.0, 4..40), seed in any::<u64>(), shift in -3.0f64..3.0, gain in 0.1f64..4.0) {
        let labels: Vec<u8> = (0..scores.len()).map(|i| ((i as u64 ^ seed) % 2) as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let base = auc(&roc_curve(&scores, &labels).unwrap());
        for mapped in [
            scores.iter().map(|s| gain * s + shift).collect::<Vec<_>>(),
            scores.iter().map(|s| (gain * s).exp()).collect(),
            scores.iter().map(|s| s.powi(3) + shift).collect(),
            scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect(),
        ] {
            prop_assert_eq!(auc(&roc_curve(&mapped, &labels).unwrap()), base);
        }
    }

    #[test]
    fn roc_is_monotone_from_origin_to_corner(scores in prop::collection::vec(-1.0f64..1.0, 2..60), flips in prop::collection::vec(any::<bool>(), 60)) {
        let labels: Vec<u8> = scores.iter().zip(&flips).map(|(_, &f)| u8::from(f)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let roc = roc_curve(&scores, &labels).unwrap();
        prop_assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn macro_metrics_ignore_class_names(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..80), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = metrics(&confusion(&pred, &truth, 5).unwrap()).unwrap();
        let pred2: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        let truth2: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
        let m2 = metrics(&confusion(&pred2, &truth2, 5).unwrap()).unwrap();
        prop_assert!((m.precision - m2.precision).abs() < 1e-12);
        prop_assert!((m.recall - m2.recall).abs() < 1e-12);
        prop_assert!((m.f1 - m2.f1).abs() < 1e-12);
        prop_assert_eq!(m.accuracy, m2.accuracy);
    }

    #[test]
    fn f1_is_the_harmonic_mean(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let counts = confusion(&pred, &truth, 4).unwrap();
        for c in &counts.per_class {
            prop_assert_eq!(c.tp + c.fp + c.fn_ + c.tn, pred.len());
        }
        let m = metrics(&counts).unwrap();
        for v in [m.precision, m.recall, m.accuracy, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if m.precision + m.recall > 0.0 {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        }
        for c in &m.per_class {
            if c.precision + c.recall > 0.0 {
                prop_assert!((c.f1 - 2.0 * c.precision * c.recall / (c.precision + c.recall)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn splits_partition_the_indices(labels in prop::collection::vec(0usize..4, 1..200), frac in 0.0f64..0.9, seed in any::<u64>(), cap in prop::option::of(0usize..30)) {
        let spec = SplitSpec { test_fraction: frac, seed, per_class_cap: cap };
        let (train, test) = match split_indices(&labels, 4, &spec) {
            Ok(parts) => parts,
            Err(e) => {
                // only an oversized cap may be refused
                prop_assert!(cap.is_some(), "{e}");
                return Ok(());
            }
        };
        prop_assert!(test.len() + train.len() <= labels.len());
        prop_assert!(train.iter().chain(&test).all(|&i| i < labels.len()));
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(test.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(train.iter().all(|i| test.binary_search(i).is_err()));
    }

    #[test]
    fn total_objective_negates_discriminator_loss(real in prop::collection::vec(0.0f64..=1.0, 1..16), fake in prop::collection::vec(0.0f64..=1.0, 1..16)) {
        let (r, f) = (Tensor::from_vec(real), Tensor::from_vec(fake));
        let v = total_objective_value(&r, &f).unwrap();
        let d = discriminator_loss_value(&r, &f).unwrap();
        prop_assert_eq!(v + d, 0.0);
        prop_assert!(v.is_finite());
        for form in [GeneratorLoss::Minimax, GeneratorLoss::NonSaturating] {
            prop_assert!(generator_loss_value(&f, form).unwrap().is_finite());
        }
    }

    #[test]
    fn squashing_stays_strictly_inside(xs in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..32)) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(xs)).unwrap();
        let t = tanh(&mut tape, x).unwrap();
        let s = sigmoid(&mut tape, x).unwrap();
        prop_assert!(tape.value(t).data().iter().all(|&v| v > -1.0 && v < 1.0));
        prop_assert!(tape.value(s).data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn conv_matches_naive_loop(case in conv_case()) {
        let mut tape = Tape::new();
        let x = tape.constant(case.x.clone()).unwrap();
        let k = tape.constant(case.k.clone()).unwrap();
        let y = conv2d(&mut tape, x, k, case.stride, case.pad).unwrap();
        let reference = naive_conv(&case.x, &case.k, case.stride, case.pad);
        prop_assert_eq!(tape.value(y).numel(), reference.len());
        for (a, b) in tape.value(y).data().iter().zip(&reference) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_the_adjoint(case in conv_case(), seed in any::<u64>()) {
        let [b, _, size, _] = case.x.shape().try_into().unwrap();
        let [f, _, kernel, _] = case.k.shape().try_into().unwrap();
        let out = conv_output_size(size, kernel, case.stride, case.pad).unwrap();
        prop_assume!((out - 1) * case.stride + kernel == size + 2 * case.pad);
        let v = Tensor::uniform(&[b, f, out, out], -2.0, 2.0, &mut rng_stream(seed, Stream::Noise));
        let mut tape = Tape::new();
        let (x, k, vv) = (tape.constant(case.x.clone()).unwrap(), tape.constant(case.k.clone()).unwrap(), tape.constant(v.clone()).unwrap());
        let ax = conv2d(&mut tape, x, k, case.stride, case.pad).unwrap();
        let atv = conv2d_transpose(&mut tape, vv, k, case.stride, case.pad).unwrap();
        let lhs = tape.value(ax).dot(&v).unwrap();
        let rhs = case.x.dot(tape.value(atv)).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conv_models_stay_in_range(seed in any::<u64>(), scale in 0.1f64..50.0, colour in any::<bool>()) {
        let (channels, size) = if colour { (3, 32) } else { (1, 28) };
        let g = build_generator(6, channels, size, &[8, 4, 4]).unwrap();
        let d = build_discriminator(channels, size, &[4, 4, 8]).unwrap();
        let mut rng = rng_stream(seed, Stream::Init);
        let gp = g.init_params(&mut rng).unwrap();
        let dp = d.init_params(&mut rng).unwrap();
        let z = Tensor::randn(&[3, 6], 0.0, scale, &mut rng);
        let images = &g.predict(&gp, &z, ForwardMode::Train).unwrap()[0];
        prop_assert_eq!(images.shape(), &[3, channels, size, size]);
        prop_assert!(images.data().iter().all(|&v| v > -1.0 && v < 1.0));
        let x = Tensor::uniform(&[3, channels, size, size], -scale, scale, &mut rng);
        for input in [images, &x] {
            for mode in [ForwardMode::Train, ForwardMode::Eval] {
                let p = &d.predict(&dp, input, mode).unwrap()[0];
                prop_assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }

    #[test]
    fn mlp_models_stay_in_range(seed in any::<u64>(), scale in 0.1f64..1e3) {
        let g = build_mlp_generator(4, &[8], &[2]).unwrap().with_init_std(1.0).unwrap();
        let d = build_mlp_discriminator(&[2], &[8]).unwrap().with_init_std(1.0).unwrap();
        let mut rng = rng_stream(seed, Stream::Init);
        let gp = g.init_params(&mut rng).unwrap();
        let dp = d.init_params(&mut rng).unwrap();
        let z = Tensor::randn(&[16, 4], 0.0, scale, &mut rng);
        let out = &g.predict(&gp, &z, ForwardMode::Eval).unwrap()[0];
        prop_assert!(out.data().iter().all(|&v| v > -1.0 && v < 1.0));
        let x = Tensor::uniform(&[16, 2], -scale, scale, &mut rng);
        let p = &d.predict(&dp, &x, ForwardMode::Eval).unwrap()[0];
        prop_assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
