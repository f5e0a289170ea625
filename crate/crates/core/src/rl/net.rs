//! Small fully-connected networks with hand-rolled backpropagation: tanh
//! hidden layers, linear output, uniform init in +/- 1/sqrt(fan_in).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::RlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Row-major rows x cols (output x input).
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            rows,
            cols,
        }
    }

    fn random<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        Layer {
            w: (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            b: (0..rows).map(|_| rng.random_range(-bound..bound)).collect(),
            rows,
            cols,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Post-activation values per layer, starting with the input itself.
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has layers")
    }
}

/// Gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }
}

impl Mlp {
    /// `sizes` runs input -> hidden... -> output; tanh on every layer but
    /// the last.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        Mlp {
            layers: sizes
                .windows(2)
                .map(|w| Layer::random(w[1], w[0], rng))
                .collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[1], w[0])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.cols).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, RlError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.activations.pop().expect("trace has layers"))
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, RlError> {
        if x.len() != self.input_dim() {
            return Err(RlError::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = activations.last().unwrap();
            let last = li + 1 == self.layers.len();
            let mut out = Vec::with_capacity(layer.rows);
            for r in 0..layer.rows {
                let mut z = layer.b[r];
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for (wv, av) in row.iter().zip(prev.iter()) {
                    z += wv * av;
                }
                out.push(if last { z } else { z.tanh() });
            }
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Exact gradients of a scalar objective whose derivative w.r.t. the
    /// network output is `upstream`. Returns (parameter grads, dL/dinput).
    pub fn backprop(&self, trace: &Trace, upstream: &[f64]) -> (MlpGrads, Vec<f64>) {
        assert_eq!(upstream.len(), self.output_dim());
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = upstream.to_vec(); // linear output layer
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let below = &trace.activations[li];
            let g = &mut grads.layers[li];
            for r in 0..layer.rows {
                g.b[r] = delta[r];
                let row = &mut g.w[r * layer.cols..(r + 1) * layer.cols];
                for (c, gw) in row.iter_mut().enumerate() {
                    *gw = delta[r] * below[c];
                }
            }
            let mut prev_delta = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for (c, pd) in prev_delta.iter_mut().enumerate() {
                    *pd += row[c] * delta[r];
                }
            }
            if li > 0 {
                // The activation below is a tanh output.
                for (pd, a) in prev_delta.iter_mut().zip(below.iter()) {
                    *pd *= 1.0 - a * a;
                }
            }
            delta = prev_delta;
        }
        (grads, delta)
    }

    /// Plain gradient step: descent for positive `lr`, ascent via
    /// `add_scaled` with a positive scale.
    pub fn descend(&mut self, grads: &MlpGrads, lr: f64) {
        self.add_scaled(grads, -lr);
    }

    pub fn add_scaled(&mut self, grads: &MlpGrads, scale: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.w.iter_mut().zip(&g.w) {
                *w += scale * gw;
            }
            for (b, gb) in l.b.iter_mut().zip(&g.b) {
                *b += scale * gb;
            }
        }
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }
}

/// Blend online parameters into a target network: target <- tau*online +
/// (1-tau)*target, element-wise.
pub fn soft_update(online: &Mlp, target: &mut Mlp, tau: f64) {
    assert_eq!(online.layers.len(), target.layers.len(), "shape mismatch");
    for (o, t) in online.layers.iter().zip(target.layers.iter_mut()) {
        assert_eq!((o.rows, o.cols), (t.rows, t.cols), "shape mismatch");
        for (ov, tv) in o.w.iter().zip(t.w.iter_mut()) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
        for (ov, tv) in o.b.iter().zip(t.b.iter_mut()) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
}

/// Actor, critic, and their target copies. The critic consumes the state
/// concatenated with the flattened action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
}

impl ActorCritic {
    pub fn new<R: Rng>(state_dim: usize, action_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let actor = Mlp::new(&[state_dim, hidden, hidden, action_dim], rng);
        let critic = Mlp::new(&[state_dim + action_dim, hidden, hidden, 1], rng);
        ActorCritic {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        }
    }

    pub fn critic_value(&self, critic: &Mlp, state: &[f64], action: &[f64]) -> Result<f64, RlError> {
        let mut input = Vec::with_capacity(state.len() + action.len());
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        Ok(critic.forward_trace(&input)?.output()[0])
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.critic.is_finite()
            && self.actor_target.is_finite()
            && self.critic_target.is_finite()
    }
}

const CHECKPOINT_MAGIC: &str = "WFPLACE-CHECKPOINT 1";

/// Text checkpoint with a shape header and hex-encoded f64 bits, so that
/// save -> load -> save is byte-identical.
pub fn save_checkpoint(nets: &ActorCritic, path: impl AsRef<Path>) -> Result<(), RlError> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    for (name, net) in named(nets) {
        let _ = writeln!(out, "net {name} {}", net.layers.len());
        for layer in &net.layers {
            let _ = writeln!(out, "layer {} {}", layer.rows, layer.cols);
            push_hex_line(&mut out, &layer.b);
            for r in 0..layer.rows {
                push_hex_line(&mut out, &layer.w[r * layer.cols..(r + 1) * layer.cols]);
            }
        }
    }
    fs::write(path.as_ref(), out).map_err(|e| RlError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ActorCritic, RlError> {
    let text =
        fs::read_to_string(path.as_ref()).map_err(|e| RlError::Checkpoint(e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(RlError::Checkpoint("bad magic line".into()));
    }
    let mut nets = Vec::new();
    let mut lines = lines.peekable();
    while let Some(header) = lines.next() {
        let mut parts = header.split_whitespace();
        if parts.next() != Some("net") {
            return Err(RlError::Checkpoint(format!("expected net header, got {header:?}")));
        }
        let name = parts
            .next()
            .ok_or_else(|| RlError::Checkpoint("net header missing name".into()))?
            .to_string();
        let n_layers: usize = parse(parts.next())?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let lh = lines
                .next()
                .ok_or_else(|| RlError::Checkpoint("truncated layer header".into()))?;
            let mut parts = lh.split_whitespace();
            if parts.next() != Some("layer") {
                return Err(RlError::Checkpoint(format!("expected layer header, got {lh:?}")));
            }
            let rows: usize = parse(parts.next())?;
            let cols: usize = parse(parts.next())?;
            let b = parse_hex_line(lines.next(), rows)?;
            let mut w = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                w.extend(parse_hex_line(lines.next(), cols)?);
            }
            layers.push(Layer { w, b, rows, cols });
        }
        nets.push((name, Mlp { layers }));
    }
    let take = |want: &str| -> Result<Mlp, RlError> {
        nets.iter()
            .find(|(n, _)| n == want)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| RlError::Checkpoint(format!("missing net {want}")))
    };
    Ok(ActorCritic {
        actor: take("actor")?,
        critic: take("critic")?,
        actor_target: take("actor_target")?,
        critic_target: take("critic_target")?,
    })
}

fn named(nets: &ActorCritic) -> [(&'static str, &Mlp); 4] {
    [
        ("actor", &nets.actor),
        ("critic", &nets.critic),
        ("actor_target", &nets.actor_target),
        ("critic_target", &nets.critic_target),
    ]
}

fn push_hex_line(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:016x}", v.to_bits());
    }
    out.push('\n');
}

fn parse_hex_line(line: Option<&str>, expect: usize) -> Result<Vec<f64>, RlError> {
    let line = line.ok_or_else(|| RlError::Checkpoint("truncated values".into()))?;
    let vals: Result<Vec<f64>, _> = line
        .split_whitespace()
        .map(|tok| u64::from_str_radix(tok, 16).map(f64::from_bits))
        .collect();
    let vals = vals.map_err(|e| RlError::Checkpoint(format!("bad value: {e}")))?;
    if vals.len() != expect {
        return Err(RlError::Checkpoint(format!(
            "expected {expect} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse(tok: Option<&str>) -> Result<usize, RlError> {
    tok.ok_or_else(|| RlError::Checkpoint("missing count".into()))?
        .parse()
        .map_err(|e| RlError::Checkpoint(format!("bad count: {e}")))
}
