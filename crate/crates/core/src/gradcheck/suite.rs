use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_gradients, check_projected_gradients, GradCheckReport};
use crate::error::{Error, Result};
use crate::model::{micro_config, tiny_config, BlockSpec, Gswin, GswinBlock};
use crate::sgu::{materialize_relative_bias, sgu, window_sgu, SguInit, SguParams, WindowGrid};
use crate::tensor::Tensor;

/// Tolerance for matmul and GELU.
pub const TIGHT_TOL: f64 = 1e-6;
/// Tolerance for every other primitive.
pub const OP_TOL: f64 = 1e-5;
/// Tolerance for composed blocks and whole models.
pub const END_TO_END_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.passes(self.tolerance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Ops,
    Block,
    Model,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ops" => Ok(Scope::Ops),
            "block" => Ok(Scope::Block),
            "model" => Ok(Scope::Model),
            other => Err(Error::Invalid(format!("unknown scope {other:?}; use ops, block or model"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Ops => "ops",
            Scope::Block => "block",
            Scope::Model => "model",
        })
    }
}

pub fn run_scope(scope: Scope, seed: u64) -> Result<Vec<CheckOutcome>> {
    match scope {
        Scope::Ops => op_suite(seed),
        Scope::Block => block_suite(seed),
        Scope::Model => model_suite(seed),
    }
}

fn leaf(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-2.0..2.0)).requires_grad()
}

fn named(pairs: &[(&str, &Tensor)]) -> Vec<(String, Tensor)> {
    pairs.iter().map(|(n, t)| (n.to_string(), (*t).clone())).collect()
}

struct Suite {
    out: Vec<CheckOutcome>,
    seed: u64,
}

impl Suite {
    fn check<F>(&mut self, name: &str, tol: f64, inputs: &[(&str, &Tensor)], cap: Option<usize>, f: F) -> Result<()>
    where
        F: Fn() -> Result<Tensor>,
    {
        let seed = self.seed;
        let report = check_projected_gradients(&named(inputs), f, seed, cap)?;
        self.out.push(CheckOutcome { name: name.into(), tolerance: tol, report });
        Ok(())
    }
}

/// Every differentiable primitive on random inputs in `[-2, 2]`.
pub fn op_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Suite { out: Vec::new(), seed: seed ^ 0x5eed };

    let a = leaf(&[3, 4], &mut rng);
    let b = leaf(&[4, 2], &mut rng);
    s.check("matmul", TIGHT_TOL, &[("a", &a), ("b", &b)], None, || a.matmul(&b))?;

    let v = leaf(&[17], &mut rng);
    s.check("gelu", TIGHT_TOL, &[("x", &v)], None, || Ok(v.gelu()))?;

    let x = leaf(&[2, 3, 4], &mut rng);
    let y = leaf(&[2, 3, 4], &mut rng);
    s.check("add", OP_TOL, &[("x", &x), ("y", &y)], None, || x.add(&y))?;
    s.check("sub", OP_TOL, &[("x", &x), ("y", &y)], None, || x.sub(&y))?;
    s.check("mul", OP_TOL, &[("x", &x), ("y", &y)], None, || x.mul(&y))?;
    s.check("scale", OP_TOL, &[("x", &x)], None, || Ok(x.scale(-1.7)))?;
    s.check("sum", OP_TOL, &[("x", &x)], None, || Ok(x.mul(&x)?.sum()))?;
    s.check("mean", OP_TOL, &[("x", &x)], None, || Ok(x.mul(&y)?.mean()))?;
    s.check("mean_axis", OP_TOL, &[("x", &x)], None, || x.mean_axis(1))?;
    s.check("reshape", OP_TOL, &[("x", &x)], None, || x.reshape(&[4, 6]))?;
    s.check("permute", OP_TOL, &[("x", &x)], None, || x.permute(&[2, 0, 1]))?;
    s.check("slice", OP_TOL, &[("x", &x)], None, || x.slice(&[0..2, 1..3, 1..4]))?;
    s.check("narrow", OP_TOL, &[("x", &x)], None, || x.narrow(2, 1..3))?;
    s.check("pad", OP_TOL, &[("x", &x)], None, || x.pad(&[(0, 1), (2, 0), (1, 1)]))?;
    s.check("concat", OP_TOL, &[("x", &x), ("y", &y)], None, || Tensor::concat(&[x.clone(), y.clone()], 1))?;

    let bias = leaf(&[4], &mut rng);
    s.check("add_bias", OP_TOL, &[("x", &x), ("bias", &bias)], None, || x.add_bias(&bias))?;
    s.check("scale_rows", OP_TOL, &[("x", &x)], None, || x.scale_rows(&[0.0, 1.25]))?;

    let gamma = leaf(&[4], &mut rng);
    let beta = leaf(&[4], &mut rng);
    s.check("layer_norm", OP_TOL, &[("x", &x), ("gamma", &gamma), ("beta", &beta)], None, || {
        x.layer_norm(&gamma, &beta, 1e-5)
    })?;

    let table = leaf(&[5, 3], &mut rng);
    s.check("gather_rows", OP_TOL, &[("table", &table)], None, || table.gather_rows(&[4, 0, 4, 2, 1, 4]))?;

    let logits = leaf(&[4, 5], &mut rng);
    s.check("cross_entropy", OP_TOL, &[("logits", &logits)], None, || {
        logits.cross_entropy(&[0, 3, 3, 4], 0.1)
    })?;

    let rel = leaf(&[35, 2], &mut rng);
    s.check("relative_bias", OP_TOL, &[("table", &rel)], None, || materialize_relative_bias(&rel, (3, 4)))?;

    // whole-sequence gate built from primitives, with a relative table
    let z = leaf(&[6, 4], &mut rng);
    let params = SguParams::from_tensors(
        "sgu",
        leaf(&[6, 6, 1], &mut rng),
        leaf(&[6, 1], &mut rng),
        Some(leaf(&[15, 1], &mut rng)),
        (2, 3),
        1,
    )?;
    let (w, bw, rt) = (
        params.w_win.tensor().clone(),
        params.b_win.tensor().clone(),
        params.rel_table.as_ref().expect("table").tensor().clone(),
    );
    s.check("sgu", OP_TOL, &[("z", &z), ("w_win", &w), ("b_win", &bw), ("rel_table", &rt)], None, || {
        sgu(&z, &params)
    })?;

    // fused window gate: shifted grid with partial windows on every side, three heads
    for (name, image, window) in [("window_sgu_shifted", (9, 10), 4), ("window_sgu_unshifted", (9, 10), 4)] {
        let grid = if name.ends_with("unshifted") {
            WindowGrid::unshifted(image, (window, window))?
        } else {
            WindowGrid::shifted(image, (window, window))?
        };
        let n = window * window;
        let x = leaf(&[2, image.0, image.1, 12], &mut rng);
        let w = leaf(&[n, n, 3], &mut rng);
        let bw = leaf(&[n, 3], &mut rng);
        s.check(name, OP_TOL, &[("x", &x), ("weight", &w), ("bias", &bw)], None, || {
            window_sgu(&x, &w, &bw, &grid, 3)
        })?;
    }
    Ok(s.out)
}

fn block_case(
    s: &mut Suite,
    name: &str,
    spec: BlockSpec,
    image: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let blk = GswinBlock::new("block", spec, rng)?;
    // move the gate away from its near-identity start so every path carries signal
    for p in blk.parameters() {
        p.tensor().data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.5..0.5));
    }
    let x = leaf(&[2, image.0, image.1, spec.dim], rng);
    let mut inputs: Vec<(String, Tensor)> = vec![("x".into(), x.clone())];
    inputs.extend(blk.parameters().iter().map(|p| (p.name().to_string(), p.tensor().clone())));
    let seed = s.seed;
    let report = check_projected_gradients(&inputs, || blk.forward(&x, None), seed, None)?;
    s.out.push(CheckOutcome { name: name.into(), tolerance: END_TO_END_TOL, report });
    Ok(())
}

/// Single blocks, shifted and unshifted, input and every parameter.
pub fn block_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Suite { out: Vec::new(), seed: seed ^ 0xb10c };
    let spec = |shifted, relative_bias| BlockSpec {
        dim: 4,
        expansion: 6,
        heads: 3,
        window: 4,
        shifted,
        drop_prob: 0.0,
        relative_bias,
        sgu_init: SguInit::NearIdentity,
    };
    block_case(&mut s, "block_unshifted", spec(false, true), (8, 8), &mut rng)?;
    block_case(&mut s, "block_shifted", spec(true, true), (8, 8), &mut rng)?;
    block_case(&mut s, "block_shifted_no_rel", spec(true, false), (6, 7), &mut rng)?;
    Ok(s.out)
}

fn model_case(s: &mut Suite, name: &str, model: &Gswin, cap: Option<usize>, rng: &mut ChaCha8Rng) -> Result<()> {
    let outcome = check_model(model, name, cap, rng.gen(), s.seed)?;
    s.out.push(outcome);
    Ok(())
}

/// Forward plus label-smoothed cross-entropy on two random images, checked
/// against every parameter of `model` (or `cap` per tensor). Parameters are
/// jittered by up to 0.1 first; drop path uses one fixed mask throughout.
pub fn check_model(model: &Gswin, name: &str, cap: Option<usize>, seed: u64, mask_seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.parameters() {
        p.tensor().data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
    }
    let size = model.config().image_size;
    let image = Tensor::from_fn(&[2, size, size, 3], |_| rng.gen_range(-2.0..2.0));
    let classes = model.config().num_classes;
    let targets = [0, classes - 1];
    let inputs: Vec<(String, Tensor)> =
        model.parameters().iter().map(|p| (p.name().to_string(), p.tensor().clone())).collect();
    let loss = || {
        let mut drop = ChaCha8Rng::seed_from_u64(mask_seed);
        model.forward(&image, Some(&mut drop))?.cross_entropy(&targets, 0.1)
    };
    let report = check_gradients(&inputs, loss, cap)?;
    Ok(CheckOutcome { name: name.into(), tolerance: END_TO_END_TOL, report })
}

/// Full forward plus label-smoothed cross-entropy: every parameter of the
/// micro model, and a strided sample of every parameter tensor of the tiny one.
pub fn model_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Suite { out: Vec::new(), seed: seed ^ 0x30de1 };
    let mut micro = micro_config();
    micro.drop_path_rate = 0.3;
    let model = Gswin::new(&micro, seed)?;
    model_case(&mut s, "micro_model_all_parameters", &model, None, &mut rng)?;
    let model = Gswin::new(&tiny_config(), seed)?;
    model_case(&mut s, "tiny_model_sampled", &model, Some(6), &mut rng)?;
    Ok(s.out)
}
