//! Seeded law suites: the five feedback axioms and the category laws,
//! each decided observationally on random small stochastic instances.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::kernel::{enumerate_tuples, Dist, Kernel, Rat, SampleRng, Ty, Value};
use crate::stream::{MStream, Schedule};

use super::equiv::obs_equiv;
use super::joint::InputSpec;
use super::TruncError;

/// Outcome of one law over many instances.
#[derive(Clone, Debug)]
pub struct LawEntry {
    pub law: String,
    pub instances: usize,
    pub failures: Vec<LawFailure>,
}

#[derive(Clone, Debug)]
pub struct LawFailure {
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct LawReport {
    pub entries: Vec<LawEntry>,
}

impl LawReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.failures.is_empty())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "law": e.law,
                    "instances": e.instances,
                    "failures": e.failures.iter().map(|f| {
                        serde_json::json!({ "seed": f.seed, "detail": f.detail })
                    }).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "pass": self.all_pass(),
            "laws": serde_json::Value::Array(entries),
        })
    }
}

/// A small finite domain: usually 2 values, occasionally 3. Exhaustive
/// enumeration is exponential in depth, so the bias keeps the suites fast
/// while still exercising ternary carriers.
fn random_domain(rng: &mut SampleRng) -> Ty {
    let size = if rng.gen_below(4) == 0 { 3 } else { 2 };
    Ty::int_domain(0..size)
}

/// A table-backed stochastic kernel: for each enumerated input, a random
/// distribution over the enumerated outputs with denominator at most 8.
pub fn random_stoch_kernel(
    rng: &mut SampleRng,
    name: &str,
    ins: Vec<Ty>,
    outs: Vec<Ty>,
) -> Kernel {
    let in_rows = enumerate_tuples(&ins).expect("law domains are finite");
    let out_rows = enumerate_tuples(&outs).expect("law domains are finite");
    let mut table: BTreeMap<Vec<Value>, Dist> = BTreeMap::new();
    for row in in_rows {
        let denom = 1 + rng.gen_below(8);
        let mut weights: BTreeMap<Value, u64> = BTreeMap::new();
        for _ in 0..denom {
            let pick = rng.gen_below(out_rows.len() as u64) as usize;
            *weights.entry(Value::Tuple(out_rows[pick].clone())).or_insert(0) += 1;
        }
        let dist = Dist::from_weights(weights.into_iter().map(|(v, w)| {
            (v, Rat::new(BigInt::from(w), BigInt::from(denom)))
        }))
        .expect("weights sum to one");
        table.insert(row, dist);
    }
    let name = name.to_string();
    Kernel::from_stoch(name.clone(), ins, outs, move |x| {
        table
            .get(x)
            .cloned()
            .ok_or_else(|| crate::kernel::KernelError::IllTyped(format!(
                "kernel `{name}` has no entry for this input"
            )))
    })
}

/// A random stream of feedback shape `delayed(state) (x) xs -> state (x) ys`,
/// with independent kernels for the step-0 action (whose state input is
/// unit) and the steady action.
fn random_feedback_body(
    rng: &mut SampleRng,
    state: &Ty,
    xs: &[Ty],
    ys: &[Ty],
) -> MStream {
    let sstate = Schedule::of_types(std::slice::from_ref(state));
    let in_sched = sstate.delayed().tensor(&Schedule::constant(xs.to_vec()));
    let out_sched = sstate.tensor(&Schedule::constant(ys.to_vec()));
    let k0 = random_stoch_kernel(rng, "body0", in_sched.at(0).to_vec(), out_sched.at(0).to_vec());
    let k1 = random_stoch_kernel(rng, "body", in_sched.at(1).to_vec(), out_sched.at(1).to_vec());
    MStream::lift_sequence(in_sched, out_sched, move |t| {
        if t == 0 {
            k0.clone()
        } else {
            k1.clone()
        }
    })
    .expect("random body fits its schedules")
}

fn check(
    entry: &mut LawEntry,
    seed: u64,
    depth: usize,
    lhs: Result<MStream, TruncError>,
    rhs: Result<MStream, TruncError>,
) {
    let t0 = std::time::Instant::now();
    entry.instances += 1;
    let outcome = (|| -> Result<(), TruncError> {
        let (lhs, rhs) = (lhs?, rhs?);
        let report = obs_equiv(&lhs, &rhs, &InputSpec::FromTypes, depth)?;
        if let Some(w) = report.witness {
            return Err(TruncError::LawViolation(format!(
                "step {}: inputs {:?}: {} vs {}",
                w.step, w.inputs, w.left, w.right
            )));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        entry.failures.push(LawFailure { seed, detail: e.to_string() });
    }
    if std::env::var_os("MSTREAM_LAW_TIMING").is_some() {
        eprintln!("law {}: {:?}", entry.law, t0.elapsed());
    }
}

fn entry(law: &str) -> LawEntry {
    LawEntry { law: law.to_string(), instances: 0, failures: Vec::new() }
}

/// Check the five feedback axioms on `instance_count` seeded random
/// stochastic instances over 2-3 element domains, each decided
/// observationally at `depth`.
pub fn axiom_suite(seed: u64, instance_count: usize, depth: usize) -> LawReport {
    let mut a1 = entry("A1 tightening");
    let mut a2 = entry("A2 vanishing");
    let mut a3 = entry("A3 joining");
    let mut a4 = entry("A4 strength");
    let mut a5 = entry("A5 sliding");
    for i in 0..instance_count {
        let instance_seed = seed.wrapping_add(i as u64);
        let mut rng = SampleRng::from_seed(instance_seed);

        // A1 tightening: u ; fbk(f) ; v = fbk((id (x) u) ; f ; (id (x) v)).
        {
            let s = random_domain(&mut rng);
            let x = random_domain(&mut rng);
            let x2 = random_domain(&mut rng);
            let y = random_domain(&mut rng);
            let y2 = random_domain(&mut rng);
            let sstate = Schedule::of_types(std::slice::from_ref(&s));
            let f = random_feedback_body(&mut rng, &s, &[x.clone()], &[y.clone()]);
            let u = MStream::lift(random_stoch_kernel(&mut rng, "u", vec![x2], vec![x]));
            let v = MStream::lift(random_stoch_kernel(&mut rng, "v", vec![y], vec![y2]));
            let lhs = (|| {
                let core = f.feedback(&sstate)?;
                u.seq(&core)?.seq(&v)
            })()
            .map_err(TruncError::from);
            let rhs = (|| {
                let dstate_id = MStream::identity(sstate.delayed());
                let state_id = MStream::identity(sstate.clone());
                let body = dstate_id.par(&u).seq(&f)?.seq(&state_id.par(&v))?;
                body.feedback(&sstate)
            })()
            .map_err(TruncError::from);
            check(&mut a1, instance_seed, depth, lhs, rhs);
        }

        // A2 vanishing: feedback over the empty state is the stream itself.
        {
            let x = random_domain(&mut rng);
            let y = random_domain(&mut rng);
            let k0 = random_stoch_kernel(&mut rng, "f0", vec![x.clone()], vec![y.clone()]);
            let k1 = random_stoch_kernel(&mut rng, "f", vec![x.clone()], vec![y.clone()]);
            let mk = {
                let (k0, k1) = (k0.clone(), k1.clone());
                MStream::lift_sequence(
                    Schedule::constant(vec![x.clone()]),
                    Schedule::constant(vec![y.clone()]),
                    move |t| if t == 0 { k0.clone() } else { k1.clone() },
                )
                .expect("constant schedules")
            };
            let lhs = mk.feedback(&Schedule::empty()).map_err(TruncError::from);
            check(&mut a2, instance_seed, depth, lhs, Ok(mk));
        }

        // A3 joining: fbk_T(fbk_S(f)) = fbk_{S (x) T}(f).
        {
            let s = random_domain(&mut rng);
            let tdom = random_domain(&mut rng);
            let x = random_domain(&mut rng);
            let y = random_domain(&mut rng);
            let sst = Schedule::of_types(&[s.clone()]);
            let tst = Schedule::of_types(&[tdom.clone()]);
            let joint = Schedule::of_types(&[s.clone(), tdom.clone()]);
            // f : dS (x) dT (x) X -> S (x) T (x) Y, shared by both sides.
            let in_sched = joint.delayed().tensor(&Schedule::constant(vec![x.clone()]));
            let out_sched = joint.tensor(&Schedule::constant(vec![y.clone()]));
            let k0 = random_stoch_kernel(
                &mut rng,
                "j0",
                in_sched.at(0).to_vec(),
                out_sched.at(0).to_vec(),
            );
            let k1 = random_stoch_kernel(
                &mut rng,
                "j",
                in_sched.at(1).to_vec(),
                out_sched.at(1).to_vec(),
            );
            let f = MStream::lift_sequence(in_sched, out_sched, move |t| {
                if t == 0 {
                    k0.clone()
                } else {
                    k1.clone()
                }
            })
            .expect("joint body fits");
            let lhs = (|| f.feedback(&sst)?.feedback(&tst))().map_err(TruncError::from);
            let rhs = f.feedback(&joint).map_err(TruncError::from);
            check(&mut a3, instance_seed, depth, lhs, rhs);
        }

        // A4 strength: fbk_S(f) (x) g = fbk_S(f (x) g).
        {
            let s = random_domain(&mut rng);
            let x = random_domain(&mut rng);
            let y = random_domain(&mut rng);
            let x2 = random_domain(&mut rng);
            let y2 = random_domain(&mut rng);
            let sstate = Schedule::of_types(std::slice::from_ref(&s));
            let f = random_feedback_body(&mut rng, &s, &[x.clone()], &[y.clone()]);
            let g = MStream::lift(random_stoch_kernel(&mut rng, "g", vec![x2], vec![y2]));
            let lhs = f
                .feedback(&sstate)
                .map(|fb| fb.par(&g))
                .map_err(TruncError::from);
            let rhs = f.par(&g).feedback(&sstate).map_err(TruncError::from);
            check(&mut a4, instance_seed, depth, lhs, rhs);
        }

        // A5 sliding: fbk_S(f ; (h (x) id)) = fbk_T((dh (x) id) ; f), for
        // h : S -> T and f : dT (x) X -> S (x) Y.
        {
            let s = random_domain(&mut rng);
            let tdom = random_domain(&mut rng);
            let x = random_domain(&mut rng);
            let y = random_domain(&mut rng);
            let sst = Schedule::of_types(&[s.clone()]);
            let tst = Schedule::of_types(&[tdom.clone()]);
            let f = {
                let in_sched = tst.delayed().tensor(&Schedule::constant(vec![x.clone()]));
                let out_sched = sst.tensor(&Schedule::constant(vec![y.clone()]));
                let k0 = random_stoch_kernel(
                    &mut rng,
                    "s0",
                    in_sched.at(0).to_vec(),
                    out_sched.at(0).to_vec(),
                );
                let k1 = random_stoch_kernel(
                    &mut rng,
                    "s",
                    in_sched.at(1).to_vec(),
                    out_sched.at(1).to_vec(),
                );
                MStream::lift_sequence(in_sched, out_sched, move |t| {
                    if t == 0 {
                        k0.clone()
                    } else {
                        k1.clone()
                    }
                })
                .expect("sliding body fits")
            };
            let h = random_stoch_kernel(&mut rng, "h", vec![s.clone()], vec![tdom.clone()]);
            // Translate after writing: f ; (h (x) id) feeds back over T.
            let lhs = (|| {
                let hy = MStream::lift(h.clone())
                    .par(&MStream::identity(Schedule::constant(vec![y.clone()])));
                f.seq(&hy)?.feedback(&tst)
            })()
            .map_err(TruncError::from);
            // Translate before reading: (dh (x) id) ; f feeds back over S.
            let rhs = (|| {
                let dh = MStream::lift(h.clone()).delay()?;
                let dhx = dh.par(&MStream::identity(Schedule::constant(vec![x.clone()])));
                dhx.seq(&f)?.feedback(&sst)
            })()
            .map_err(TruncError::from);
            check(&mut a5, instance_seed, depth, lhs, rhs);
        }
    }
    LawReport { entries: vec![a1, a2, a3, a4, a5] }
}

/// A random stream `ins -> outs`: either a memoryless per-step family or a
/// feedback over a random body, exercising memory channels.
pub fn random_stream(rng: &mut SampleRng, ins: &[Ty], outs: &[Ty]) -> MStream {
    if rng.gen_below(2) == 0 {
        let in_sched = Schedule::constant(ins.to_vec());
        let out_sched = Schedule::constant(outs.to_vec());
        let k0 = random_stoch_kernel(rng, "m0", ins.to_vec(), outs.to_vec());
        let k1 = random_stoch_kernel(rng, "m", ins.to_vec(), outs.to_vec());
        MStream::lift_sequence(in_sched, out_sched, move |t| {
            if t == 0 {
                k0.clone()
            } else {
                k1.clone()
            }
        })
        .expect("constant schedules")
    } else {
        let s = random_domain(rng);
        let body = random_feedback_body(rng, &s, ins, outs);
        body.feedback(&Schedule::of_types(std::slice::from_ref(&s)))
            .expect("random feedback body has feedback shape")
    }
}

/// Category-law suite: associativity and unitality of sequential
/// composition, functoriality of parallel composition, naturality of the
/// symmetry, and functoriality of delay — all observational at `depth`.
pub fn category_law_suite(seed: u64, instance_count: usize, depth: usize) -> LawReport {
    let mut assoc = entry("seq associativity");
    let mut unital = entry("seq unitality");
    let mut par_fun = entry("par functoriality");
    let mut sym_nat = entry("symmetry naturality");
    let mut delay_fun = entry("delay functoriality");
    for i in 0..instance_count {
        let instance_seed = seed.wrapping_add(0x5eed).wrapping_add(i as u64);
        let mut rng = SampleRng::from_seed(instance_seed);

        let a = random_domain(&mut rng);
        let b = random_domain(&mut rng);
        let c = random_domain(&mut rng);
        let d = random_domain(&mut rng);
        let f = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
        let g = random_stream(&mut rng, &[b.clone()], &[c.clone()]);
        let h = random_stream(&mut rng, &[c.clone()], &[d.clone()]);

        // (f;g);h = f;(g;h)
        let lhs = f
            .seq(&g)
            .and_then(|fg| fg.seq(&h))
            .map_err(TruncError::from);
        let rhs = g
            .seq(&h)
            .and_then(|gh| f.seq(&gh))
            .map_err(TruncError::from);
        check(&mut assoc, instance_seed, depth, lhs, rhs);

        // id;f = f = f;id
        let id_a = MStream::identity(Schedule::constant(vec![a.clone()]));
        let id_b = MStream::identity(Schedule::constant(vec![b.clone()]));
        let lhs = id_a.seq(&f).map_err(TruncError::from);
        check(&mut unital, instance_seed, depth, lhs, Ok(f.clone()));
        let lhs = f.seq(&id_b).map_err(TruncError::from);
        check(&mut unital, instance_seed, depth, lhs, Ok(f.clone()));

        // (f (x) f') ; (g (x) g') = (f;g) (x) (f';g')
        let a2 = random_domain(&mut rng);
        let b2 = random_domain(&mut rng);
        let c2 = random_domain(&mut rng);
        let f2 = random_stream(&mut rng, &[a2.clone()], &[b2.clone()]);
        let g2 = random_stream(&mut rng, &[b2.clone()], &[c2.clone()]);
        let lhs = f.par(&f2).seq(&g.par(&g2)).map_err(TruncError::from);
        let rhs = (|| Ok::<_, crate::stream::StreamError>(f.seq(&g)?.par(&f2.seq(&g2)?)))()
            .map_err(TruncError::from);
        check(&mut par_fun, instance_seed, depth, lhs, rhs);

        // (f (x) f2) ; swap = swap ; (f2 (x) f)
        let swap_out = MStream::lift_sequence(
            Schedule::constant(vec![b.clone(), b2.clone()]),
            Schedule::constant(vec![b2.clone(), b.clone()]),
            {
                let (b, b2) = (b.clone(), b2.clone());
                move |_| Kernel::symmetry(std::slice::from_ref(&b), std::slice::from_ref(&b2))
            },
        )
        .expect("swap fits");
        let swap_in = MStream::lift_sequence(
            Schedule::constant(vec![a.clone(), a2.clone()]),
            Schedule::constant(vec![a2.clone(), a.clone()]),
            {
                let (a, a2) = (a.clone(), a2.clone());
                move |_| Kernel::symmetry(std::slice::from_ref(&a), std::slice::from_ref(&a2))
            },
        )
        .expect("swap fits");
        let lhs = f.par(&f2).seq(&swap_out).map_err(TruncError::from);
        let rhs = swap_in.seq(&f2.par(&f)).map_err(TruncError::from);
        check(&mut sym_nat, instance_seed, depth, lhs, rhs);

        // delay(f;g) = delay(f);delay(g), and delay(id) = id on the
        // delayed schedule.
        let lhs = f
            .seq(&g)
            .map_err(TruncError::from)
            .and_then(|fg| fg.delay().map_err(TruncError::from));
        let rhs = (|| {
            let df = f.delay()?;
            let dg = g.delay()?;
            df.seq(&dg)
        })()
        .map_err(TruncError::from);
        check(&mut delay_fun, instance_seed, depth, lhs, rhs);
        let lhs = id_a.delay().map_err(TruncError::from);
        let rhs = Ok(MStream::identity(Schedule::constant(vec![a.clone()]).delayed()));
        check(&mut delay_fun, instance_seed, depth, lhs, rhs);
    }
    LawReport {
        entries: vec![assoc, unital, par_fun, sym_nat, delay_fun],
    }
}
