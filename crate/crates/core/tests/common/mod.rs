#![allow(dead_code)]

use std::path::PathBuf;

use hype_core::model::HypeModel;

pub mod gen;
pub mod laws;

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(model_path(name)).unwrap()
}

pub fn load(name: &str) -> HypeModel {
    hype_core::parser::parse_model(&source(name)).unwrap()
}

/// Two-sided Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for `n` samples, with
/// Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-rate * x).exp()
        }
    }
}

pub fn parse(src: &str) -> HypeModel {
    hype_core::parser::parse_model(src).unwrap_or_else(|e| panic!("{e:?}"))
}

pub const DECAY: &str = "model decay;
var K;
const c = 600;
type const = 1;
type linear(x) = x;
iv(a) = K;
iv(b) = K;
subcomponent Source = init:(a, c, const).Source;
subcomponent Loss(K) = init:(b, -1, linear(K)).Loss(K);
controller Idle = 0;
system Decay = Source sync{init} Loss(K) sync{init} init.Idle;
ec(init) = (true, K' = 250);
";

pub const CLOCK: &str = "model clock;
var T;
type const = 1;
iv(t) = T;
subcomponent Clock = init:(t, 1, const).Clock;
controller Idle = 0;
system Run = Clock sync{init} init.Idle;
ec(init) = (true, T' = 0);
";

/// Two instantaneous events whose guards are always true and which only
/// move the controller back and forth.
pub const ZENO: &str = "model zeno;
var x;
type const = 1;
iv(v) = x;
subcomponent Drift = init:(v, 1, const).Drift + ping:(v, 1, const).Drift + pong:(v, 1, const).Drift;
controller Loop = ping.pong.Loop;
system Z = Drift sync{init, ping, pong} init.Loop;
ec(init) = (true, x' = 0);
ec(ping) = (x >= 0, true);
ec(pong) = (true, true);
";
