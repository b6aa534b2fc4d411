//! Plain-text checkpoints.
//!
//! ```text
//! sac-checkpoint 1
//! hyper gamma 0.99
//! ...
//! max_action 0.005
//! net policy 261,64,64,6
//! <one parameter per line>
//! net q1 ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so loading is bit-exact.
//! Optimizer moments are not stored.

use std::fmt::Write as _;
use std::path::Path;

use super::learner::SacLearner;
use super::mlp::{param_count, Mlp};
use super::policy::GaussianPolicy;
use super::{SacError, SacHyper};

const MAGIC: &str = "sac-checkpoint 1";
const NETS: [&str; 5] = ["policy", "q1", "q2", "q1_target", "q2_target"];

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn to_string(learner: &SacLearner) -> String {
    let h = &learner.hyper;
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "hyper gamma {:?}", h.gamma).unwrap();
    writeln!(out, "hyper tau {:?}", h.tau).unwrap();
    writeln!(out, "hyper lr {:?}", h.lr).unwrap();
    writeln!(out, "hyper batch_size {}", h.batch_size).unwrap();
    writeln!(out, "hyper alpha {:?}", h.alpha).unwrap();
    writeln!(out, "hyper grad_steps {}", h.grad_steps).unwrap();
    writeln!(out, "hyper warmup_steps {}", h.warmup_steps).unwrap();
    writeln!(out, "hyper hidden {}", join(&h.hidden)).unwrap();
    writeln!(out, "hyper buffer_capacity {}", h.buffer_capacity).unwrap();
    writeln!(out, "max_action {:?}", learner.policy.max_action()).unwrap();
    let nets = [&learner.policy.net, &learner.q1, &learner.q2, &learner.q1_target, &learner.q2_target];
    for (name, net) in NETS.iter().zip(nets) {
        writeln!(out, "net {name} {}", join(net.sizes())).unwrap();
        for p in net.params() {
            writeln!(out, "{p:?}").unwrap();
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, SacError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: impl Into<String>) -> SacError {
        SacError::Checkpoint {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn keyed(&mut self, prefix: &str) -> Result<&'a str, SacError> {
        let l = self.next()?;
        l.strip_prefix(prefix)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{prefix}`")))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, SacError> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}

pub fn from_str(text: &str) -> Result<SacLearner, SacError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.err("not a checkpoint"));
    }
    let f = |lines: &mut Lines, key: &str| -> Result<f64, SacError> {
        let v = lines.keyed(&format!("hyper {key}"))?;
        lines.parse(v)
    };
    let u = |lines: &mut Lines, key: &str| -> Result<usize, SacError> {
        let v = lines.keyed(&format!("hyper {key}"))?;
        lines.parse(v)
    };
    let sizes = |lines: &Lines, s: &str| -> Result<Vec<usize>, SacError> { s.split(',').map(|x| lines.parse(x)).collect() };
    let gamma = f(&mut lines, "gamma")?;
    let tau = f(&mut lines, "tau")?;
    let lr = f(&mut lines, "lr")?;
    let batch_size = u(&mut lines, "batch_size")?;
    let alpha = f(&mut lines, "alpha")?;
    let grad_steps = u(&mut lines, "grad_steps")?;
    let warmup_steps = u(&mut lines, "warmup_steps")?;
    let hidden_s = lines.keyed("hyper hidden")?;
    let hidden = sizes(&lines, hidden_s)?;
    let buffer_capacity = u(&mut lines, "buffer_capacity")?;
    let hyper = SacHyper {
        gamma,
        tau,
        lr,
        batch_size,
        alpha,
        grad_steps,
        warmup_steps,
        hidden,
        buffer_capacity,
    };
    hyper.validate()?;
    let ma = lines.keyed("max_action")?;
    let max_action: f64 = lines.parse(ma)?;
    let mut nets = Vec::new();
    for name in NETS {
        let header = lines.keyed(&format!("net {name}"))?;
        let shape = sizes(&lines, header)?;
        if shape.len() < 2 {
            return Err(lines.err("network needs at least two layer sizes"));
        }
        let mut params = Vec::with_capacity(param_count(&shape));
        for _ in 0..param_count(&shape) {
            let l = lines.next()?;
            params.push(lines.parse::<f64>(l)?);
        }
        nets.push(Mlp::from_params(&shape, params)?);
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    let mut it = nets.into_iter();
    let mut take = || it.next().unwrap();
    let policy = GaussianPolicy::from_net(take(), max_action);
    let (q1, q2, q1t, q2t) = (take(), take(), take(), take());
    if q1.sizes() != q2.sizes() || q1.sizes() != q1t.sizes() || q2.sizes() != q2t.sizes() {
        return Err(lines.err("critic shapes differ"));
    }
    Ok(SacLearner::from_parts(hyper, policy, q1, q2, q1t, q2t))
}

pub fn save(learner: &SacLearner, path: &Path) -> Result<(), SacError> {
    std::fs::write(path, to_string(learner))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SacLearner, SacError> {
    from_str(&std::fs::read_to_string(path)?)
}
