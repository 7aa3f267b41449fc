//! Helpers shared by integration test targets.

#![allow(dead_code)]

use dqn_adapt::nnet::{BiasInit, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-8;

fn loss(net: &Network, x: &[f64], t: &[f64]) -> f64 {
    let y = net.forward(x).unwrap();
    y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// A parameter coordinate: layer, bias or weight, index within the layer.
#[derive(Debug, Clone, Copy)]
struct Coord {
    layer: usize,
    bias: bool,
    idx: usize,
}

fn nudge(net: &mut Network, c: Coord, delta: f64) {
    if c.bias {
        net.biases_mut(c.layer)[c.idx] += delta;
    } else {
        net.weights_mut(c.layer)[c.idx] += delta;
    }
}

/// True when moving this parameter by EPS could push a hidden unit across
/// its ReLU kink. Only parameters feeding a hidden layer move hidden
/// pre-activations directly; for nets with more than one hidden layer any
/// near-zero pre-activation downstream also disqualifies the coordinate.
fn near_kink(net: &Network, pre: &[Vec<f64>], c: Coord) -> bool {
    let close = |v: f64| v.abs() < 10.0 * EPS;
    let downstream = pre.iter().skip(c.layer + 1).flatten().any(|&v| close(v));
    if c.layer >= pre.len() {
        return downstream;
    }
    let n_in = net.dims()[c.layer];
    let unit = if c.bias { c.idx } else { c.idx / n_in };
    close(pre[c.layer][unit]) || downstream
}

/// Checks `samples` random coordinates (plus every output bias) for one
/// random (net, input, target) triple. Returns (checked, skipped).
pub fn check_case(dims: &[usize], rng: &mut ChaCha8Rng, samples: usize) -> (usize, usize) {
    let bias = if rng.gen() { BiasInit::Uniform } else { BiasInit::Zero };
    let mut net = Network::init_with(dims, rng.gen(), bias).unwrap();
    let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let t: Vec<f64> = (0..*dims.last().unwrap()).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let g = net.backward_mse(&x, &t).unwrap();
    assert!((g.loss - loss(&net, &x, &t)).abs() <= 1e-12 * g.loss.max(1.0));
    let pre = net.hidden_preactivations(&x).unwrap();

    let last = net.num_layers() - 1;
    let mut coords: Vec<Coord> = (0..net.output_dim()).map(|idx| Coord { layer: last, bias: true, idx }).collect();
    for _ in 0..samples {
        let layer = rng.gen_range(0..net.num_layers());
        let bias = rng.gen_bool(0.3);
        let len = if bias { net.biases(layer).len() } else { net.weights(layer).len() };
        coords.push(Coord {
            layer,
            bias,
            idx: rng.gen_range(0..len),
        });
    }

    let (mut checked, mut skipped) = (0, 0);
    for c in coords {
        if near_kink(&net, &pre, c) {
            skipped += 1;
            continue;
        }
        nudge(&mut net, c, EPS);
        let up = loss(&net, &x, &t);
        nudge(&mut net, c, -2.0 * EPS);
        let down = loss(&net, &x, &t);
        nudge(&mut net, c, EPS);
        let fd = (up - down) / (2.0 * EPS);
        let an = if c.bias { g.biases[c.layer][c.idx] } else { g.weights[c.layer][c.idx] };
        let denom = fd.abs().max(an.abs()).max(FLOOR);
        assert!(
            (fd - an).abs() / denom <= REL_TOL || (fd - an).abs() <= FLOOR,
            "dims {dims:?} {c:?}: analytic {an:e} vs finite difference {fd:e}"
        );
        checked += 1;
    }
    (checked, skipped)
}

pub fn run_arch(dims: &[usize], cases: usize, samples: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut skipped) = (0, 0);
    for _ in 0..cases {
        let (c, s) = check_case(dims, &mut rng, samples);
        checked += c;
        skipped += s;
    }
    assert!(checked > 10 * skipped, "{dims:?}: checked {checked}, skipped {skipped}");
}
