//! Exact joint output distributions of finite truncations, and the
//! causality (marginalisation) check.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::kernel::{enumerate_tuples, rat_string, Dist, Rat, Value};
use crate::stream::MStream;

use super::TruncError;

/// How the inputs of a stream are supplied to exact evaluation.
#[derive(Clone)]
pub enum InputSpec {
    /// The stream takes no inputs.
    Closed,
    /// Concrete input tuples, one per step.
    Fixed(Vec<Vec<Value>>),
    /// Explicit finite domains, one per input wire, used at every step.
    Domains(Vec<Vec<Value>>),
    /// Enumerate from the finite-domain descriptors on the input types.
    FromTypes,
}

impl InputSpec {
    /// The input assignments to enumerate at step `t`.
    pub(crate) fn rows_at(
        &self,
        node: &crate::stream::StepKernel,
        t: usize,
    ) -> Result<Vec<Vec<Value>>, TruncError> {
        let tys = &node.kernel.inputs()[node.mem_in.len()..];
        match self {
            InputSpec::Closed => {
                if tys.is_empty() {
                    Ok(vec![vec![]])
                } else {
                    Err(TruncError::InputArity { step: t, expected: tys.len(), got: 0 })
                }
            }
            InputSpec::Fixed(rows) => {
                let row = rows.get(t).ok_or(TruncError::InputArity {
                    step: t,
                    expected: tys.len(),
                    got: 0,
                })?;
                if row.len() != tys.len() {
                    return Err(TruncError::InputArity {
                        step: t,
                        expected: tys.len(),
                        got: row.len(),
                    });
                }
                Ok(vec![row.clone()])
            }
            InputSpec::Domains(doms) => {
                if doms.len() != tys.len() {
                    return Err(TruncError::InputArity {
                        step: t,
                        expected: tys.len(),
                        got: doms.len(),
                    });
                }
                let mut rows = vec![Vec::new()];
                for dom in doms {
                    let mut next = Vec::with_capacity(rows.len() * dom.len());
                    for r in &rows {
                        for v in dom {
                            let mut r2 = r.clone();
                            r2.push(v.clone());
                            next.push(r2);
                        }
                    }
                    rows = next;
                }
                Ok(rows)
            }
            InputSpec::FromTypes => enumerate_tuples(tys).map_err(TruncError::from),
        }
    }
}

/// The exact n-stage semantics of a stream: for each input history, the
/// distribution over output histories (flattened across steps), obtained by
/// threading the joint distribution over memory and emitted outputs through
/// the unrolled kernels and discarding the final memory.
#[derive(Clone, Debug)]
pub struct JointDist {
    depth: usize,
    in_arities: Vec<usize>,
    out_arities: Vec<usize>,
    table: BTreeMap<Vec<Value>, Dist>,
}

impl JointDist {
    /// Assemble a joint distribution directly from a table; used by
    /// harnesses that need families the engine cannot produce.
    pub fn from_table(
        in_arities: Vec<usize>,
        out_arities: Vec<usize>,
        table: BTreeMap<Vec<Value>, Dist>,
    ) -> JointDist {
        assert_eq!(in_arities.len(), out_arities.len());
        assert!(!in_arities.is_empty());
        JointDist { depth: in_arities.len() - 1, in_arities, out_arities, table }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn in_arities(&self) -> &[usize] {
        &self.in_arities
    }

    pub fn out_arities(&self) -> &[usize] {
        &self.out_arities
    }

    pub fn table(&self) -> &BTreeMap<Vec<Value>, Dist> {
        &self.table
    }

    /// The distribution for an input history; closed streams use `&[]`.
    pub fn dist_for(&self, inputs: &[Value]) -> Option<&Dist> {
        self.table.get(inputs)
    }

    /// Marginal distribution of the output block at step `t`, per input
    /// history.
    pub fn step_marginals(&self, t: usize) -> Vec<(Vec<Value>, Dist)> {
        let start: usize = self.out_arities[..t].iter().sum();
        let keep: Vec<usize> = (start..start + self.out_arities[t]).collect();
        self.table
            .iter()
            .map(|(k, d)| {
                let m = if keep.is_empty() {
                    d.map(|_| Value::Tuple(vec![]))
                } else {
                    d.map(|v| {
                        let Value::Tuple(parts) = v else { unreachable!() };
                        Value::Tuple(keep.iter().map(|&i| parts[i].clone()).collect())
                    })
                };
                (k.clone(), m)
            })
            .collect()
    }

    /// Drop the final step: marginalize the last output block away and
    /// regroup input histories by their prefix. Fails with a witness when
    /// two extensions of the same prefix disagree, i.e. when the "past"
    /// depends on a future input.
    pub fn truncate_once(&self) -> Result<JointDist, Box<CausalityWitness>> {
        assert!(self.depth > 0);
        let last_in = *self.in_arities.last().unwrap();
        let last_out = *self.out_arities.last().unwrap();
        let kept_out: usize = self.out_arities.iter().sum::<usize>() - last_out;
        let mut table: BTreeMap<Vec<Value>, Dist> = BTreeMap::new();
        for (key, dist) in &self.table {
            let prefix = key[..key.len() - last_in].to_vec();
            let marg = dist.map(|v| {
                let Value::Tuple(parts) = v else { unreachable!() };
                Value::Tuple(parts[..kept_out].to_vec())
            });
            match table.get(&prefix) {
                None => {
                    table.insert(prefix, marg);
                }
                Some(existing) if *existing == marg => {}
                Some(existing) => {
                    return Err(Box::new(CausalityWitness {
                        step: self.depth - 1,
                        inputs: key.clone(),
                        expected: existing.clone(),
                        got: marg,
                    }));
                }
            }
        }
        Ok(JointDist {
            depth: self.depth - 1,
            in_arities: self.in_arities[..self.depth].to_vec(),
            out_arities: self.out_arities[..self.depth].to_vec(),
            table,
        })
    }
}

impl PartialEq for JointDist {
    fn eq(&self, other: &Self) -> bool {
        self.out_arities == other.out_arities && self.table == other.table
    }
}

/// Interning pool for output histories: each history is a parent id plus
/// one emitted block, so joint threading never clones whole histories.
#[derive(Default)]
struct HistPool {
    // (parent, block id) -> id; node storage for materialization.
    nodes: Vec<(u32, u32)>,
    lookup: HashMap<(u32, u32), u32>,
    blocks: Vec<Vec<Value>>,
    block_lookup: HashMap<Vec<Value>, u32>,
}

const ROOT_HIST: u32 = u32::MAX;

impl HistPool {
    fn intern_block(&mut self, block: &[Value]) -> u32 {
        if let Some(&id) = self.block_lookup.get(block) {
            return id;
        }
        let id = self.blocks.len() as u32;
        self.blocks.push(block.to_vec());
        self.block_lookup.insert(block.to_vec(), id);
        id
    }

    fn extend(&mut self, parent: u32, block: u32) -> u32 {
        if let Some(&id) = self.lookup.get(&(parent, block)) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push((parent, block));
        self.lookup.insert((parent, block), id);
        id
    }

    fn materialize(&self, mut id: u32) -> Vec<Value> {
        let mut rev_blocks = Vec::new();
        while id != ROOT_HIST {
            let (parent, block) = self.nodes[id as usize];
            rev_blocks.push(block);
            id = parent;
        }
        let mut out = Vec::new();
        for b in rev_blocks.into_iter().rev() {
            out.extend(self.blocks[b as usize].iter().cloned());
        }
        out
    }
}

/// Weighted state of one input history: joint over (memory id, history id).
type StateDist = HashMap<(u32, u32), Rat>;

struct ProcState {
    pool: HistPool,
    mems: Vec<Vec<Value>>,
    mem_lookup: HashMap<Vec<Value>, u32>,
    // input history -> joint over (memory, output history).
    table: Vec<(Vec<Value>, StateDist)>,
}

impl ProcState {
    fn intern_mem(&mut self, mem: Vec<Value>) -> u32 {
        if let Some(&id) = self.mem_lookup.get(&mem) {
            return id;
        }
        let id = self.mems.len() as u32;
        self.mems.push(mem.clone());
        self.mem_lookup.insert(mem, id);
        id
    }

    fn snapshot(
        &self,
        depth: usize,
        in_arities: &[usize],
        out_arities: &[usize],
    ) -> Result<JointDist, TruncError> {
        let mut table = BTreeMap::new();
        for (key, state) in &self.table {
            let mut acc: BTreeMap<Value, Rat> = BTreeMap::new();
            for (&(_, hist), w) in state {
                let v = Value::Tuple(self.pool.materialize(hist));
                *acc.entry(v).or_insert_with(Rat::zero) += w.clone();
            }
            table.insert(key.clone(), Dist::from_weights_unchecked(acc));
        }
        Ok(JointDist {
            depth,
            in_arities: in_arities.to_vec(),
            out_arities: out_arities.to_vec(),
            table,
        })
    }
}

/// Thread the exact joint semantics of a stream up to `depth`, reporting a
/// snapshot at every depth where `want` returns true. The running state per
/// input history is the joint distribution over (memory, output history);
/// snapshots discard the memory.
fn proc_run(
    f: &MStream,
    inputs: &InputSpec,
    depth: usize,
    want: impl Fn(usize) -> bool,
) -> Result<Vec<Option<JointDist>>, TruncError> {
    let nodes = f.unroll(depth);
    let cap = crate::kernel::support_cap();
    let mut in_arities: Vec<usize> = Vec::with_capacity(depth + 1);
    let mut out_arities: Vec<usize> = Vec::with_capacity(depth + 1);
    let mut family = Vec::with_capacity(depth + 1);
    let mut st = ProcState {
        pool: HistPool::default(),
        mems: Vec::new(),
        mem_lookup: HashMap::new(),
        table: Vec::new(),
    };
    let root_mem = st.intern_mem(vec![]);
    let mut initial = StateDist::new();
    initial.insert((root_mem, ROOT_HIST), Rat::one());
    st.table.push((vec![], initial));
    for (t, node) in nodes.iter().enumerate() {
        let rows = inputs.rows_at(node, t)?;
        in_arities.push(node.kernel.inputs().len() - node.mem_in.len());
        out_arities.push(node.kernel.outputs().len() - node.mem_out.len());
        let mem_out = node.mem_out.len();
        let mut next: Vec<(Vec<Value>, StateDist)> = Vec::new();
        for row in rows.iter() {
            // The kernel sees only (memory, input row): decompose its exact
            // output once per distinct memory into (new mem id, block id, w).
            let mut memo: HashMap<u32, Vec<(u32, u32, Rat)>> = HashMap::new();
            for table_idx in 0..st.table.len() {
                let (hist_key, state) = &st.table[table_idx];
                let mut key = hist_key.clone();
                key.extend(row.iter().cloned());
                let mut acc = StateDist::new();
                let entries: Vec<((u32, u32), Rat)> =
                    state.iter().map(|(k, w)| (*k, w.clone())).collect();
                for ((mem_id, hist_id), w) in entries {
                    if !memo.contains_key(&mem_id) {
                        let mut kin = st.mems[mem_id as usize].clone();
                        kin.extend(row.iter().cloned());
                        let d = node.kernel.apply_exact(&kin)?;
                        let mut decomposed = Vec::with_capacity(d.support_len());
                        for (kout, kw) in d.iter() {
                            let Value::Tuple(kout) = kout else { unreachable!() };
                            let (mem2, emitted) = kout.split_at(mem_out);
                            let mem2_id = st.intern_mem(mem2.to_vec());
                            let block_id = st.pool.intern_block(emitted);
                            decomposed.push((mem2_id, block_id, kw.clone()));
                        }
                        memo.insert(mem_id, decomposed);
                    }
                    let decomposed = memo.get(&mem_id).unwrap().clone();
                    for (mem2_id, block_id, kw) in decomposed {
                        let hist2 = st.pool.extend(hist_id, block_id);
                        *acc.entry((mem2_id, hist2)).or_insert_with(Rat::zero) +=
                            w.clone() * kw;
                        if acc.len() > cap {
                            return Err(TruncError::Kernel(
                                crate::kernel::KernelError::SupportOverflow {
                                    limit: cap,
                                    attempted: acc.len(),
                                },
                            ));
                        }
                    }
                }
                next.push((key, acc));
            }
        }
        st.table = next;
        if want(t) {
            family.push(Some(st.snapshot(t, &in_arities, &out_arities)?));
        } else {
            family.push(None);
        }
    }
    Ok(family)
}

/// Exact semantics of a stream at every depth `0..=depth`.
pub fn proc_family(
    f: &MStream,
    inputs: &InputSpec,
    depth: usize,
) -> Result<Vec<JointDist>, TruncError> {
    let family = proc_run(f, inputs, depth, |_| true)?;
    Ok(family.into_iter().map(|jd| jd.expect("all depths requested")).collect())
}

/// Exact semantics of the first `depth + 1` steps of a stream.
pub fn proc_semantics(
    f: &MStream,
    inputs: &InputSpec,
    depth: usize,
) -> Result<JointDist, TruncError> {
    let mut family = proc_run(f, inputs, depth, |t| t == depth)?;
    Ok(family.pop().flatten().expect("final depth requested"))
}

/// A failed marginalisation square: at `step`, the truncated distribution
/// for `inputs` disagrees with the shallower semantics.
#[derive(Clone, Debug)]
pub struct CausalityWitness {
    pub step: usize,
    pub inputs: Vec<Value>,
    pub expected: Dist,
    pub got: Dist,
}

#[derive(Clone, Debug)]
pub struct CausalityReport {
    pub pass: bool,
    pub witness: Option<Box<CausalityWitness>>,
}

impl CausalityReport {
    pub fn to_json(&self) -> serde_json::Value {
        match &self.witness {
            None => serde_json::json!({ "verdict": "causal" }),
            Some(w) => serde_json::json!({
                "verdict": "acausal",
                "step": w.step,
                "inputs": w.inputs.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "expected": dist_json(&w.expected),
                "got": dist_json(&w.got),
            }),
        }
    }
}

pub(crate) fn dist_json(d: &Dist) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = d
        .iter()
        .map(|(v, w)| serde_json::json!({ "value": v.to_string(), "p": rat_string(w) }))
        .collect();
    serde_json::Value::Array(entries)
}

/// Check the marginalisation square on a family of joint distributions
/// indexed by depth: truncating the depth-`t+1` member must reproduce the
/// depth-`t` member, for every input history. This simultaneously verifies
/// that earlier outputs do not depend on later inputs.
pub fn check_family_causality(family: &[JointDist]) -> CausalityReport {
    for t in (1..family.len()).rev() {
        match family[t].truncate_once() {
            Err(w) => return CausalityReport { pass: false, witness: Some(w) },
            Ok(truncated) => {
                if truncated != family[t - 1] {
                    let (key, got) = truncated
                        .table
                        .iter()
                        .find(|(k, d)| family[t - 1].table.get(*k) != Some(d))
                        .map(|(k, d)| (k.clone(), d.clone()))
                        .unwrap_or_else(|| (vec![], Dist::dirac(Value::Unit)));
                    let expected = family[t - 1]
                        .table
                        .get(&key)
                        .cloned()
                        .unwrap_or_else(|| Dist::dirac(Value::Unit));
                    return CausalityReport {
                        pass: false,
                        witness: Some(Box::new(CausalityWitness {
                            step: t - 1,
                            inputs: key,
                            expected,
                            got,
                        })),
                    };
                }
            }
        }
    }
    CausalityReport { pass: true, witness: None }
}

/// Verify the causality property of a stream at the given depth by
/// computing its exact semantics at every depth up to `depth` and checking
/// each marginalisation square.
pub fn check_causality(
    f: &MStream,
    inputs: &InputSpec,
    depth: usize,
) -> Result<CausalityReport, TruncError> {
    let family = proc_family(f, inputs, depth)?;
    Ok(check_family_causality(&family))
}
