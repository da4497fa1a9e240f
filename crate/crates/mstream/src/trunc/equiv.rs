//! Observational equivalence at finite depth and the causal-function view
//! of deterministic streams.
//!
//! Equivalence is decided on synchronized belief classes rather than on
//! materialized joint distributions. A class tracks, for one reachable
//! (input history, output history) pair, the conditional distribution over
//! each stream's memory. The memory distribution determines the entire
//! future, so classes with equal belief pairs merge; by the chain rule, the
//! joints agree at every depth up to `n` exactly when the conditional
//! next-output distributions of the two sides agree on every class up to
//! depth `n`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::kernel::{Dist, Kernel, Rat, Value};
use crate::stream::{MStream, StepKernel};

use super::joint::{dist_json, InputSpec};
use super::TruncError;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Equal,
    Differ,
}

/// Where two streams first disagree: the step, the input history, and the
/// two exact distributions.
#[derive(Clone, Debug)]
pub struct EquivWitness {
    pub step: usize,
    pub inputs: Vec<Value>,
    pub left: Dist,
    pub right: Dist,
}

#[derive(Clone, Debug)]
pub struct EquivReport {
    pub verdict: Verdict,
    pub witness: Option<EquivWitness>,
}

impl EquivReport {
    pub fn equal(&self) -> bool {
        self.verdict == Verdict::Equal
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.witness {
            None => serde_json::json!({ "verdict": "equal" }),
            Some(w) => serde_json::json!({
                "verdict": "differ",
                "step": w.step,
                "inputs": w.inputs.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "left": dist_json(&w.left),
                "right": dist_json(&w.right),
            }),
        }
    }
}

/// Conditional memory distribution of one side, with interned memory ids.
type Belief = Vec<(u32, Rat)>;

/// Side-local interning of memory tuples plus kernel decompositions.
struct Side {
    node: StepKernel,
    stream: MStream,
    mems: Vec<Vec<Value>>,
    lookup: BTreeMap<Vec<Value>, u32>,
}

impl Side {
    fn new(stream: &MStream) -> Side {
        let mut side = Side {
            node: stream.unroll(0).pop().expect("step 0 exists"),
            stream: stream.clone(),
            mems: Vec::new(),
            lookup: BTreeMap::new(),
        };
        side.intern(vec![]);
        side
    }

    fn intern(&mut self, mem: Vec<Value>) -> u32 {
        if let Some(&id) = self.lookup.get(&mem) {
            return id;
        }
        let id = self.mems.len() as u32;
        self.mems.push(mem.clone());
        self.lookup.insert(mem, id);
        id
    }

    /// Move to the next step. The memory interning table persists: ids
    /// assigned to successor memories remain valid as current memories.
    fn advance(&mut self) {
        self.stream = self.stream.later().clone();
        self.node = StepKernel {
            mem_in: self.stream.mem_in().to_vec(),
            kernel: self.stream.now().clone(),
            mem_out: self.stream.mem_out().to_vec(),
        };
    }

    /// For a belief and an input row: the emission distribution over output
    /// blocks together with the unnormalized successor belief per block.
    fn step(
        &mut self,
        belief: &Belief,
        row: &[Value],
    ) -> Result<BTreeMap<Vec<Value>, (Rat, BTreeMap<u32, Rat>)>, TruncError> {
        let mem_out = self.node.mem_out.len();
        let kernel: Kernel = self.node.kernel.clone();
        let mut out: BTreeMap<Vec<Value>, (Rat, BTreeMap<u32, Rat>)> = BTreeMap::new();
        for (mem_id, w) in belief {
            let mut kin = self.mems[*mem_id as usize].clone();
            kin.extend(row.iter().cloned());
            let d = kernel.apply_exact(&kin)?;
            for (kout, kw) in d.iter() {
                let Value::Tuple(kout) = kout else { unreachable!() };
                let (mem2, emitted) = kout.split_at(mem_out);
                let mem2_id = self.intern(mem2.to_vec());
                let add = w.clone() * kw.clone();
                let entry = out
                    .entry(emitted.to_vec())
                    .or_insert_with(|| (Rat::zero(), BTreeMap::new()));
                entry.0 += add.clone();
                *entry.1.entry(mem2_id).or_insert_with(Rat::zero) += add;
            }
        }
        Ok(out)
    }
}

fn normalize(unnorm: BTreeMap<u32, Rat>, total: &Rat) -> Belief {
    unnorm
        .into_iter()
        .map(|(m, w)| (m, w / total.clone()))
        .collect()
}

fn emission_dist(e: &BTreeMap<Vec<Value>, (Rat, BTreeMap<u32, Rat>)>) -> Dist {
    Dist::from_weights(
        e.iter().map(|(block, (p, _))| (Value::Tuple(block.clone()), p.clone())),
    )
    .expect("emission probabilities sum to one")
}

/// Decide observational equivalence of two streams at truncation depth
/// `depth`: equal exactly when their joint output semantics agree for every
/// enumerated input history at every depth up to `depth`. The witness
/// reports the conditional distributions of the first divergence, given a
/// reproducing input history.
pub fn obs_equiv(
    f: &MStream,
    g: &MStream,
    inputs: &InputSpec,
    depth: usize,
) -> Result<EquivReport, TruncError> {
    if !f.inputs().matches(g.inputs()) || !f.outputs().matches(g.outputs()) {
        return Err(TruncError::ScheduleMismatch {
            left: format!("{:?} -> {:?}", f.inputs(), f.outputs()),
            right: format!("{:?} -> {:?}", g.inputs(), g.outputs()),
        });
    }
    let mut side_f = Side::new(f);
    let mut side_g = Side::new(g);
    // Classes of reachable (input history, output history) pairs, keyed by
    // the pair of conditional memory distributions; the representative
    // input history reproduces the class.
    let mut classes: BTreeMap<(Belief, Belief), Vec<Value>> = BTreeMap::new();
    classes.insert(
        (vec![(0, Rat::one())], vec![(0, Rat::one())]),
        Vec::new(),
    );
    for t in 0..=depth {
        if t > 0 {
            side_f.advance();
            side_g.advance();
        }
        let rows = inputs.rows_at(&side_f.node, t)?;
        let mut next: BTreeMap<(Belief, Belief), Vec<Value>> = BTreeMap::new();
        for ((bf, bg), path) in &classes {
            for row in &rows {
                let ef = side_f.step(bf, row)?;
                let eg = side_g.step(bg, row)?;
                let mut path2 = path.clone();
                path2.extend(row.iter().cloned());
                let same = ef.len() == eg.len()
                    && ef.iter().zip(&eg).all(|((bl, (p, _)), (br, (q, _)))| {
                        bl == br && p == q
                    });
                if !same {
                    return Ok(EquivReport {
                        verdict: Verdict::Differ,
                        witness: Some(EquivWitness {
                            step: t,
                            inputs: path2,
                            left: emission_dist(&ef),
                            right: emission_dist(&eg),
                        }),
                    });
                }
                for (block, (p, unnorm_f)) in &ef {
                    let (_, unnorm_g) = &eg[block];
                    let key = (
                        normalize(unnorm_f.clone(), p),
                        normalize(unnorm_g.clone(), p),
                    );
                    next.entry(key).or_insert_with(|| path2.clone());
                }
            }
        }
        classes = next;
    }
    Ok(EquivReport { verdict: Verdict::Equal, witness: None })
}

/// Evaluate a fully deterministic stream on a prefix of concrete inputs.
/// The output at step `t` is a function of inputs `0..=t` only.
pub fn causal_eval(
    f: &MStream,
    inputs: &[Vec<Value>],
) -> Result<Vec<Vec<Value>>, TruncError> {
    let mut mem: Vec<Value> = Vec::new();
    let mut outs = Vec::with_capacity(inputs.len());
    let mut cur = f.clone();
    for (t, row) in inputs.iter().enumerate() {
        let node = cur.now();
        if !node.is_det() {
            return Err(TruncError::NotDeterministic(node.name().to_string()));
        }
        let expected = node.inputs().len() - cur.mem_in().len();
        if row.len() != expected {
            return Err(TruncError::InputArity { step: t, expected, got: row.len() });
        }
        let mut kin = mem;
        kin.extend(row.iter().cloned());
        let kout = node.apply_det(&kin)?;
        let split = cur.mem_out().len();
        mem = kout[..split].to_vec();
        outs.push(kout[split..].to_vec());
        cur = cur.later().clone();
    }
    Ok(outs)
}
