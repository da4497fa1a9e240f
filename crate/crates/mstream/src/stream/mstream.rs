//! The coinductive stream type and its feedback monoidal structure.

use std::cell::Cell;
use std::sync::{Arc, OnceLock};

use crate::kernel::{Dist, Kernel, SampleRng, Ty, Value};

use super::sched::Schedule;
use super::StreamError;

thread_local! {
    static LATER_FORCES: Cell<u64> = const { Cell::new(0) };
}

/// How many deferred tails the current thread has forced. Productivity
/// means unrolling `n` steps moves this by a bounded multiple of `n`:
/// each step forces at most one cell per layer of the stream expression,
/// and memoization makes repeat unrolls free.
pub fn later_force_count() -> u64 {
    LATER_FORCES.with(Cell::get)
}

type Thunk = Arc<dyn Fn() -> MStream + Send + Sync>;

/// Deferred rest-of-stream: forced at most once, then cached, so repeated
/// unrolling stays linear. Safe to force from concurrent readers.
struct LaterCell {
    cell: OnceLock<MStream>,
    thunk: Thunk,
}

impl LaterCell {
    fn new(thunk: Thunk) -> Self {
        LaterCell { cell: OnceLock::new(), thunk }
    }

    fn force(&self) -> &MStream {
        self.cell.get_or_init(|| {
            LATER_FORCES.with(|c| c.set(c.get() + 1));
            (self.thunk)()
        })
    }
}

struct Inner {
    mem_in: Vec<Ty>,
    mem_out: Vec<Ty>,
    inputs: Schedule,
    outputs: Schedule,
    now: Kernel,
    later: LaterCell,
}

/// A monoidal stream: a "now" kernel of signature
/// `mem_in ++ inputs.at(0) -> mem_out ++ outputs.at(0)` threading a memory
/// channel, plus a deferred "later" stream whose incoming memory is this
/// step's outgoing memory. Immutable and cheap to clone.
#[derive(Clone)]
pub struct MStream(Arc<Inner>);

/// One step of an unrolled stream, with its memory signature.
#[derive(Clone, Debug)]
pub struct StepKernel {
    pub mem_in: Vec<Ty>,
    pub kernel: Kernel,
    pub mem_out: Vec<Ty>,
}

/// Inputs for sample-mode execution.
pub enum RunInputs {
    /// The stream takes no inputs.
    None,
    /// Concrete value tuples, one per step.
    Values(Vec<Vec<Value>>),
    /// Independent input distributions, one tuple of them per step.
    Dists(Vec<Vec<Dist>>),
}

impl MStream {
    fn from_parts(
        mem_in: Vec<Ty>,
        mem_out: Vec<Ty>,
        inputs: Schedule,
        outputs: Schedule,
        now: Kernel,
        later: Thunk,
    ) -> MStream {
        debug_assert_eq!(now.inputs().len(), mem_in.len() + inputs.arity_at(0));
        debug_assert_eq!(now.outputs().len(), mem_out.len() + outputs.arity_at(0));
        MStream(Arc::new(Inner {
            mem_in,
            mem_out,
            inputs,
            outputs,
            now,
            later: LaterCell::new(later),
        }))
    }

    pub fn mem_in(&self) -> &[Ty] {
        &self.0.mem_in
    }

    pub fn mem_out(&self) -> &[Ty] {
        &self.0.mem_out
    }

    pub fn inputs(&self) -> &Schedule {
        &self.0.inputs
    }

    pub fn outputs(&self) -> &Schedule {
        &self.0.outputs
    }

    pub fn now(&self) -> &Kernel {
        &self.0.now
    }

    /// The rest of the stream; memoized.
    pub fn later(&self) -> &MStream {
        self.0.later.force()
    }

    /// The identity stream on a schedule: memoryless, wires through.
    pub fn identity(sched: Schedule) -> MStream {
        let now = Kernel::identity(sched.at(0));
        let tail = sched.tail();
        MStream::from_parts(
            vec![],
            vec![],
            sched.clone(),
            sched,
            now,
            Arc::new(move || MStream::identity(tail.clone())),
        )
    }

    /// The constant memoryless stream applying one kernel at every step.
    pub fn lift(k: Kernel) -> MStream {
        let inputs = Schedule::constant(k.inputs().to_vec());
        let outputs = Schedule::constant(k.outputs().to_vec());
        let again = k.clone();
        MStream::from_parts(
            vec![],
            vec![],
            inputs,
            outputs,
            k,
            Arc::new(move || MStream::lift(again.clone())),
        )
    }

    /// The memoryless stream applying `family(t)` at step `t`. Signatures
    /// are checked against the schedules for every step up to the point
    /// where both schedules repeat.
    pub fn lift_sequence<F>(
        inputs: Schedule,
        outputs: Schedule,
        family: F,
    ) -> Result<MStream, StreamError>
    where
        F: Fn(usize) -> Kernel + Send + Sync + 'static,
    {
        let family = Arc::new(family);
        let horizon = inputs.stabilization().max(outputs.stabilization()) + 1;
        for t in 0..=horizon {
            let k = family(t);
            check_kernel_sig(&k, inputs.at(t), outputs.at(t), t)?;
        }
        Ok(Self::lift_sequence_unchecked(inputs, outputs, family, 0))
    }

    fn lift_sequence_unchecked(
        inputs: Schedule,
        outputs: Schedule,
        family: Arc<dyn Fn(usize) -> Kernel + Send + Sync>,
        offset: usize,
    ) -> MStream {
        let now = family(offset);
        if check_kernel_sig(&now, inputs.at(0), outputs.at(0), offset).is_err() {
            panic!(
                "kernel family changed signature at step {offset}: {:?} does not fit {:?} -> {:?}",
                now,
                inputs.at(0),
                outputs.at(0)
            );
        }
        let (ins_t, outs_t) = (inputs.tail(), outputs.tail());
        MStream::from_parts(
            vec![],
            vec![],
            inputs,
            outputs,
            now,
            Arc::new(move || {
                MStream::lift_sequence_unchecked(
                    ins_t.clone(),
                    outs_t.clone(),
                    family.clone(),
                    offset + 1,
                )
            }),
        )
    }

    /// Sequential composition: `self ; g`. Memories pair up; the composite
    /// first action runs `now(self)` and feeds its outputs to `now(g)`.
    pub fn seq(&self, g: &MStream) -> Result<MStream, StreamError> {
        if !self.outputs().matches(g.inputs()) {
            return Err(StreamError::ScheduleMismatch {
                context: "sequential composition",
                left: format!("{:?}", self.outputs()),
                right: format!("{:?}", g.inputs()),
            });
        }
        Ok(self.seq_unchecked(g))
    }

    fn seq_unchecked(&self, g: &MStream) -> MStream {
        let f = self;
        let mut mem_in = f.mem_in().to_vec();
        mem_in.extend(g.mem_in().iter().cloned());
        let mut mem_out = f.mem_out().to_vec();
        mem_out.extend(g.mem_out().iter().cloned());
        let now = compose_now(
            f.now().clone(),
            f.mem_in().len(),
            f.mem_out().len(),
            g.now().clone(),
            g.mem_in().len(),
        );
        let (fc, gc) = (f.clone(), g.clone());
        MStream::from_parts(
            mem_in,
            mem_out,
            f.inputs().clone(),
            g.outputs().clone(),
            now,
            Arc::new(move || fc.later().seq_unchecked(gc.later())),
        )
    }

    /// Parallel composition: componentwise on inputs and outputs.
    pub fn par(&self, g: &MStream) -> MStream {
        let f = self;
        let mut mem_in = f.mem_in().to_vec();
        mem_in.extend(g.mem_in().iter().cloned());
        let mut mem_out = f.mem_out().to_vec();
        mem_out.extend(g.mem_out().iter().cloned());
        let now = tensor_now(
            f.now().clone(),
            f.mem_in().len(),
            f.mem_out().len(),
            g.now().clone(),
            g.mem_in().len(),
            g.mem_out().len(),
        );
        let (fc, gc) = (f.clone(), g.clone());
        MStream::from_parts(
            mem_in,
            mem_out,
            f.inputs().tensor(g.inputs()),
            f.outputs().tensor(g.outputs()),
            now,
            Arc::new(move || fc.later().par(gc.later())),
        )
    }

    /// The delay of a stream: the trivial action at step 0, then the
    /// original stream shifted by one.
    pub fn delay(&self) -> Result<MStream, StreamError> {
        if !self.mem_in().is_empty() {
            return Err(StreamError::FeedbackShape(
                "delay applies to top-level streams with no incoming memory".into(),
            ));
        }
        let in_arity = self.inputs().arity_at(0);
        let out_arity = self.outputs().arity_at(0);
        let now = Kernel::from_det(
            "delay0",
            vec![Ty::unit(); in_arity],
            vec![Ty::unit(); out_arity],
            move |_| Ok(vec![Value::Unit; out_arity]),
        );
        let fc = self.clone();
        Ok(MStream::from_parts(
            vec![],
            vec![],
            self.inputs().delayed(),
            self.outputs().delayed(),
            now,
            Arc::new(move || fc.clone()),
        ))
    }

    /// Delayed feedback. The body must have input schedule
    /// `delayed(state) (x) X` and output schedule `state (x) Y`; the state
    /// output at step `t` becomes the state input at step `t+1`, threaded
    /// through the memory channel. Step 0 reads no state: the delayed
    /// block is unit-typed there.
    pub fn feedback(&self, state: &Schedule) -> Result<MStream, StreamError> {
        let dstate = state.delayed();
        let rest_in = self.inputs().strip_prefix(&dstate).ok_or_else(|| {
            StreamError::FeedbackShape(format!(
                "input schedule {:?} does not start with the delayed state {:?}",
                self.inputs(),
                dstate
            ))
        })?;
        let rest_out = self.outputs().strip_prefix(state).ok_or_else(|| {
            StreamError::FeedbackShape(format!(
                "output schedule {:?} does not start with the state {:?}",
                self.outputs(),
                state
            ))
        })?;
        let k0 = dstate.arity_at(0);
        let now = inject_units(self.now().clone(), self.mem_in().len(), k0);
        let mut mem_out = self.mem_out().to_vec();
        mem_out.extend(state.at(0).iter().cloned());
        let (fc, st) = (self.clone(), state.clone());
        Ok(MStream::from_parts(
            self.mem_in().to_vec(),
            mem_out,
            rest_in,
            rest_out,
            now,
            Arc::new(move || feedback_step(fc.later(), st.at(0).len(), st.tail())),
        ))
    }

    /// "Followed by": first value from the left argument, later values from
    /// the (delayed) right argument. Memoryless projections.
    pub fn fby(ty: &Ty) -> MStream {
        let val = Schedule::of_types(std::slice::from_ref(ty));
        let inputs = val.tensor(&val.delayed());
        let outputs = val.clone();
        let k = val.at(0).len();
        MStream::lift_sequence(inputs.clone(), outputs, move |t| {
            let picks: Vec<usize> =
                if t == 0 { (0..k).collect() } else { (k..2 * k).collect() };
            Kernel::route(inputs.at(t), &picks)
        })
        .expect("fby projections fit their schedules")
    }

    /// The one-step shift, constructed as feedback over the symmetry:
    /// output at step 0 is unit, output at step `n+1` is input at step `n`.
    pub fn wait(ty: &Ty) -> MStream {
        let state = Schedule::of_types(std::slice::from_ref(ty));
        let dstate = state.delayed();
        let body_in = dstate.tensor(&state);
        let body_out = state.tensor(&dstate);
        let body = {
            let body_in = body_in.clone();
            MStream::lift_sequence(body_in.clone(), body_out, move |t| {
                let row = body_in.at(t);
                let k = row.len() / 2;
                let picks: Vec<usize> = (k..2 * k).chain(0..k).collect();
                Kernel::route(row, &picks)
            })
            .expect("symmetry fits its schedules")
        };
        body.feedback(&state).expect("wait is feedback over the symmetry")
    }

    /// The first `n+1` step kernels with their memory signatures. Pure:
    /// the stream can be unrolled again.
    pub fn unroll(&self, n: usize) -> Vec<StepKernel> {
        let mut out = Vec::with_capacity(n + 1);
        let mut cur = self.clone();
        for t in 0..=n {
            out.push(StepKernel {
                mem_in: cur.mem_in().to_vec(),
                kernel: cur.now().clone(),
                mem_out: cur.mem_out().to_vec(),
            });
            if t < n {
                cur = cur.later().clone();
            }
        }
        out
    }

    /// Sample-mode execution for `steps` steps: threads one concrete memory
    /// value, drawing each stochastic outcome from the seedable source.
    pub fn run_sample(
        &self,
        inputs: &RunInputs,
        steps: usize,
        rng: &mut SampleRng,
    ) -> Result<Vec<Vec<Value>>, StreamError> {
        if !self.mem_in().is_empty() {
            return Err(StreamError::FeedbackShape(
                "run applies to top-level streams with no incoming memory".into(),
            ));
        }
        let mut outputs = Vec::with_capacity(steps);
        let mut mem: Vec<Value> = Vec::new();
        let mut cur = self.clone();
        for t in 0..steps {
            let expected = cur.inputs().arity_at(0);
            let mut row = mem;
            match inputs {
                RunInputs::None => {
                    if expected != 0 {
                        return Err(StreamError::InputArity { step: t, expected, got: 0 });
                    }
                }
                RunInputs::Values(vs) => {
                    let v = vs.get(t).ok_or(StreamError::InputArity {
                        step: t,
                        expected,
                        got: 0,
                    })?;
                    if v.len() != expected {
                        return Err(StreamError::InputArity {
                            step: t,
                            expected,
                            got: v.len(),
                        });
                    }
                    row.extend(v.iter().cloned());
                }
                RunInputs::Dists(ds) => {
                    let d = ds.get(t).ok_or(StreamError::InputArity {
                        step: t,
                        expected,
                        got: 0,
                    })?;
                    if d.len() != expected {
                        return Err(StreamError::InputArity {
                            step: t,
                            expected,
                            got: d.len(),
                        });
                    }
                    for dist in d {
                        row.push(dist.sample(rng));
                    }
                }
            }
            let out = cur.now().apply_sample(&row, rng)?;
            let split = cur.mem_out().len();
            mem = out[..split].to_vec();
            outputs.push(out[split..].to_vec());
            cur = cur.later().clone();
        }
        Ok(outputs)
    }
}

/// Move the leading `k` input wires of step 0 into the memory channel and
/// keep feeding the state back; the recursive case of feedback.
fn feedback_step(g: &MStream, k: usize, rest: Schedule) -> MStream {
    let step0 = g.inputs().at(0);
    debug_assert!(k <= step0.len());
    let mut mem_in = g.mem_in().to_vec();
    mem_in.extend(step0[..k].iter().cloned());
    let inputs = Schedule::cons(
        step0[k..].to_vec(),
        g.inputs()
            .tail()
            .strip_prefix(&rest)
            .expect("feedback tail keeps the state prefix"),
    );
    let outputs = g
        .outputs()
        .strip_prefix(&rest)
        .expect("feedback output keeps the state prefix");
    let mut mem_out = g.mem_out().to_vec();
    mem_out.extend(rest.at(0).iter().cloned());
    let (gc, rc) = (g.clone(), rest.clone());
    MStream::from_parts(
        mem_in,
        mem_out,
        inputs,
        outputs,
        g.now().clone(),
        Arc::new(move || feedback_step(gc.later(), rc.at(0).len(), rc.tail())),
    )
}

/// Composite "now" for sequential composition with memories:
/// `(mf, mg, x) -> (mf', mg', z)` via `f` then `g`.
fn compose_now(f: Kernel, nf_in: usize, nf_out: usize, g: Kernel, ng_in: usize) -> Kernel {
    let mut ins = f.inputs()[..nf_in].to_vec();
    ins.extend(g.inputs()[..ng_in].iter().cloned());
    ins.extend(f.inputs()[nf_in..].iter().cloned());
    let mut outs = f.outputs()[..nf_out].to_vec();
    outs.extend(g.outputs().iter().cloned());
    let name = format!("seq({},{})", f.name(), g.name());
    if f.is_det() && g.is_det() {
        Kernel::from_det(name, ins, outs, move |row| {
            let (mf, rest) = row.split_at(nf_in);
            let (mg, xs) = rest.split_at(ng_in);
            let mut fin = mf.to_vec();
            fin.extend_from_slice(xs);
            let fout = f.apply_det(&fin)?;
            let (mf2, ys) = fout.split_at(nf_out);
            let mut gin = mg.to_vec();
            gin.extend_from_slice(ys);
            let gout = g.apply_det(&gin)?;
            let mut out = mf2.to_vec();
            out.extend(gout);
            Ok(out)
        })
    } else {
        Kernel::from_stoch(name, ins, outs, move |row| {
            let (mf, rest) = row.split_at(nf_in);
            let (mg, xs) = rest.split_at(ng_in);
            let mut fin = mf.to_vec();
            fin.extend_from_slice(xs);
            f.apply_exact(&fin)?.bind(|mid| {
                let Value::Tuple(fout) = mid else {
                    unreachable!("kernel outcomes are tuples")
                };
                let (mf2, ys) = fout.split_at(nf_out);
                let mut gin = mg.to_vec();
                gin.extend_from_slice(ys);
                Ok(g.apply_exact(&gin)?.map(|z| {
                    let Value::Tuple(gout) = z else {
                        unreachable!("kernel outcomes are tuples")
                    };
                    let mut out = mf2.to_vec();
                    out.extend(gout.iter().cloned());
                    Value::Tuple(out)
                }))
            })
        })
    }
}

/// Composite "now" for parallel composition with memories:
/// `(mf, mg, x, x') -> (mf', mg', y, y')`, independent in the stochastic
/// case.
fn tensor_now(
    f: Kernel,
    nf_in: usize,
    nf_out: usize,
    g: Kernel,
    ng_in: usize,
    ng_out: usize,
) -> Kernel {
    let fx = f.inputs().len() - nf_in;
    let mut ins = f.inputs()[..nf_in].to_vec();
    ins.extend(g.inputs()[..ng_in].iter().cloned());
    ins.extend(f.inputs()[nf_in..].iter().cloned());
    ins.extend(g.inputs()[ng_in..].iter().cloned());
    let mut outs = f.outputs()[..nf_out].to_vec();
    outs.extend(g.outputs()[..ng_out].iter().cloned());
    outs.extend(f.outputs()[nf_out..].iter().cloned());
    outs.extend(g.outputs()[ng_out..].iter().cloned());
    let name = format!("par({},{})", f.name(), g.name());
    if f.is_det() && g.is_det() {
        Kernel::from_det(name, ins, outs, move |row| {
            let (mf, rest) = row.split_at(nf_in);
            let (mg, rest) = rest.split_at(ng_in);
            let (xs, xs2) = rest.split_at(fx);
            let mut fin = mf.to_vec();
            fin.extend_from_slice(xs);
            let fout = f.apply_det(&fin)?;
            let mut gin = mg.to_vec();
            gin.extend_from_slice(xs2);
            let gout = g.apply_det(&gin)?;
            Ok(reorder_par(fout, gout, nf_out, ng_out))
        })
    } else {
        Kernel::from_stoch(name, ins, outs, move |row| {
            let (mf, rest) = row.split_at(nf_in);
            let (mg, rest) = rest.split_at(ng_in);
            let (xs, xs2) = rest.split_at(fx);
            let mut fin = mf.to_vec();
            fin.extend_from_slice(xs);
            let mut gin = mg.to_vec();
            gin.extend_from_slice(xs2);
            let df = f.apply_exact(&fin)?;
            let dg = g.apply_exact(&gin)?;
            Ok(df.product(&dg)?.map(|v| {
                let Value::Tuple(all) = v else {
                    unreachable!("kernel outcomes are tuples")
                };
                let (fout, gout) = all.split_at(f.outputs().len());
                Value::Tuple(reorder_par(fout.to_vec(), gout.to_vec(), nf_out, ng_out))
            }))
        })
    }
}

fn reorder_par(fout: Vec<Value>, gout: Vec<Value>, nf: usize, ng: usize) -> Vec<Value> {
    let mut out = fout[..nf].to_vec();
    out.extend(gout[..ng].iter().cloned());
    out.extend(fout[nf..].iter().cloned());
    out.extend(gout[ng..].iter().cloned());
    out
}

/// Wrap a kernel so that `k` unit values are inserted after the first
/// `mem` inputs; the step-0 action of feedback, whose delayed-state block
/// carries no information yet.
fn inject_units(k: Kernel, mem: usize, units: usize) -> Kernel {
    let mut ins = k.inputs()[..mem].to_vec();
    ins.extend(k.inputs()[mem + units..].iter().cloned());
    let outs = k.outputs().to_vec();
    let name = format!("fbk0({})", k.name());
    if k.is_det() {
        Kernel::from_det(name, ins, outs, move |row| {
            let mut full = row[..mem].to_vec();
            full.extend(std::iter::repeat(Value::Unit).take(units));
            full.extend_from_slice(&row[mem..]);
            k.apply_det(&full)
        })
    } else {
        Kernel::from_stoch(name, ins, outs, move |row| {
            let mut full = row[..mem].to_vec();
            full.extend(std::iter::repeat(Value::Unit).take(units));
            full.extend_from_slice(&row[mem..]);
            k.apply_exact(&full)
        })
    }
}

fn check_kernel_sig(
    k: &Kernel,
    ins: &[Ty],
    outs: &[Ty],
    step: usize,
) -> Result<(), StreamError> {
    let fits = |sig: &[Ty], want: &[Ty]| {
        sig.len() == want.len() && sig.iter().zip(want).all(|(a, b)| a.same_shape(b))
    };
    if !fits(k.inputs(), ins) || !fits(k.outputs(), outs) {
        return Err(StreamError::ScheduleMismatch {
            context: "kernel family",
            left: format!("step {step}: {k:?}"),
            right: format!("{ins:?} -> {outs:?}"),
        });
    }
    Ok(())
}
