//! Observational semantics of engine-built streams: exact joints,
//! causality, paper equivalences, and the causal-function view.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use mstream::kernel::{rat, Dist, Kernel, SampleRng, Ty, Value};
use mstream::stream::{MStream, RunInputs, Schedule};
use mstream::trunc::{
    causal_eval, check_causality, check_family_causality, obs_equiv, proc_semantics,
    random_stream, InputSpec, JointDist, TruncError,
};

fn vi(n: i64) -> Value {
    Value::int(n)
}

/// Fibonacci as feedback over a pair state (current, next).
fn fib_stream() -> MStream {
    let pair = Schedule::constant(vec![Ty::int(), Ty::int()]);
    let out = Schedule::constant(vec![Ty::int()]);
    let body_in = pair.delayed();
    let body_out = pair.tensor(&out);
    let body = MStream::lift_sequence(body_in, body_out, |t| {
        if t == 0 {
            Kernel::from_det(
                "fib0",
                vec![Ty::unit(), Ty::unit()],
                vec![Ty::int(), Ty::int(), Ty::int()],
                |_| Ok(vec![vi(0), vi(1), vi(0)]),
            )
        } else {
            Kernel::from_det(
                "fib",
                vec![Ty::int(), Ty::int()],
                vec![Ty::int(), Ty::int(), Ty::int()],
                |x| {
                    let (a, b) = (x[0].as_int()?, x[1].as_int()?);
                    Ok(vec![Value::Int(b.clone()), Value::Int(a + b), Value::Int(b.clone())])
                },
            )
        }
    })
    .unwrap();
    body.feedback(&Schedule::constant(vec![Ty::int(), Ty::int()])).unwrap()
}

/// The random walk: position fed back, a uniform +/-1 step added each turn.
fn walk_stream() -> MStream {
    let state = Schedule::constant(vec![Ty::int()]);
    let out = Schedule::constant(vec![Ty::int()]);
    let body = MStream::lift_sequence(state.delayed(), state.tensor(&out), |t| {
        if t == 0 {
            Kernel::from_det("walk0", vec![Ty::unit()], vec![Ty::int(), Ty::int()], |_| {
                Ok(vec![vi(0), vi(0)])
            })
        } else {
            Kernel::from_stoch("walk", vec![Ty::int()], vec![Ty::int(), Ty::int()], |x| {
                let pos = x[0].as_int()?;
                let step = Dist::uniform(&[Value::Int(pos - 1), Value::Int(pos + 1)])?;
                Ok(step.map(|v| Value::Tuple(vec![v.clone(), v.clone()])))
            })
        }
    })
    .unwrap();
    body.feedback(&Schedule::constant(vec![Ty::int()])).unwrap()
}

fn hist(vals: &[i64]) -> Value {
    Value::Tuple(vals.iter().map(|&n| vi(n)).collect())
}

#[test]
fn proc_of_fibonacci_is_a_point_mass() {
    let jd = proc_semantics(&fib_stream(), &InputSpec::Closed, 4).unwrap();
    let d = jd.dist_for(&[]).unwrap();
    assert_eq!(*d, Dist::dirac(hist(&[0, 1, 1, 2, 3])));
}

#[test]
fn proc_of_walk_enumerates_both_coin_flips() {
    let jd = proc_semantics(&walk_stream(), &InputSpec::Closed, 2).unwrap();
    let d = jd.dist_for(&[]).unwrap();
    assert_eq!(d.support_len(), 4);
    for h in [[0, -1, -2], [0, -1, 0], [0, 1, 0], [0, 1, 2]] {
        assert_eq!(d.weight(&hist(&h)), rat(1, 4));
    }
}

#[test]
fn proc_of_discard_is_the_empty_history() {
    let f = MStream::lift(Kernel::discard(&[Ty::int_domain([0, 1])]));
    let jd = proc_semantics(&f, &InputSpec::FromTypes, 3).unwrap();
    for (_, d) in jd.table() {
        assert_eq!(*d, Dist::dirac(Value::Tuple(vec![])));
    }
    assert_eq!(jd.table().len(), 16);
}

#[test]
fn walk_and_identity_pass_causality() {
    let report = check_causality(&walk_stream(), &InputSpec::Closed, 5).unwrap();
    assert!(report.pass);
    let id = MStream::identity(Schedule::constant(vec![Ty::int_domain([0, 1])]));
    let report = check_causality(&id, &InputSpec::FromTypes, 4).unwrap();
    assert!(report.pass);
}

#[test]
fn peeking_one_step_ahead_fails_causality_with_a_witness() {
    // A hand-built family whose step-t output copies input t+1: the engine
    // cannot express it, but the checker must reject it.
    let mut family = Vec::new();
    for depth in 0..=2usize {
        let mut table = BTreeMap::new();
        let n = depth + 1;
        for bits in 0..(1u32 << n) {
            let xs: Vec<i64> = (0..n).map(|i| ((bits >> i) & 1) as i64).collect();
            let key: Vec<Value> = xs.iter().map(|&b| vi(b)).collect();
            // Output i is x_{i+1} for i < depth; output depth is x_depth.
            let outs: Vec<i64> =
                (0..n).map(|i| if i < depth { xs[i + 1] } else { xs[depth] }).collect();
            table.insert(key, Dist::dirac(hist(&outs)));
        }
        family.push(JointDist::from_table(vec![1; n], vec![1; n], table));
    }
    let report = check_family_causality(&family);
    assert!(!report.pass);
    let w = report.witness.unwrap();
    assert!(w.step <= 1);
    assert_ne!(w.expected, w.got);
}

#[test]
fn wait_equals_feedback_over_symmetry() {
    // The primitive and a separately hand-built feedback-over-symmetry.
    let t = Ty::int_domain([0, 1]);
    let state = Schedule::of_types(std::slice::from_ref(&t));
    let body_in = state.delayed().tensor(&state);
    let body_out = state.tensor(&state.delayed());
    let body = {
        let body_in = body_in.clone();
        MStream::lift_sequence(body_in.clone(), body_out, move |s| {
            let row = body_in.at(s);
            Kernel::route(row, &[1, 0])
        })
        .unwrap()
    };
    let by_hand = body.feedback(&state).unwrap();
    let primitive = MStream::wait(&t);
    let report = obs_equiv(&primitive, &by_hand, &InputSpec::FromTypes, 5).unwrap();
    assert!(report.equal(), "{:?}", report.witness);
}

#[test]
fn storing_without_emitting_equals_discarding() {
    let t = Ty::int_domain([0, 1]);
    let state = Schedule::of_types(std::slice::from_ref(&t));
    let nothing = Schedule::empty();
    let body = {
        let t = t.clone();
        MStream::lift_sequence(
            state.delayed().tensor(&state),
            state.tensor(&nothing),
            move |s| {
                if s == 0 {
                    // No stored value yet: keep the fresh input.
                    Kernel::route(&[Ty::unit(), t.clone()], &[1])
                } else {
                    // Keep the stored value, drop the input.
                    Kernel::route(&[t.clone(), t.clone()], &[0])
                }
            },
        )
        .unwrap()
        .feedback(&state)
        .unwrap()
    };
    let discard = MStream::lift(Kernel::discard(std::slice::from_ref(&t)));
    let report = obs_equiv(&body, &discard, &InputSpec::FromTypes, 5).unwrap();
    assert!(report.equal(), "{:?}", report.witness);
}

#[test]
fn a_silent_walk_does_nothing() {
    let silent = walk_stream()
        .seq(&MStream::lift(Kernel::discard(&[Ty::int()])))
        .unwrap();
    let nothing = MStream::lift(Kernel::constant("nothing", vec![], vec![]));
    let report = obs_equiv(&silent, &nothing, &InputSpec::Closed, 5).unwrap();
    assert!(report.equal(), "{:?}", report.witness);
}

#[test]
fn causal_eval_runs_fibonacci() {
    let outs = causal_eval(&fib_stream(), &vec![vec![]; 10]).unwrap();
    let got: Vec<Value> = outs.into_iter().map(|mut row| row.remove(0)).collect();
    let want: Vec<Value> = [0, 1, 1, 2, 3, 5, 8, 13, 21, 34].iter().map(|&n| vi(n)).collect();
    assert_eq!(got, want);
}

#[test]
fn causal_eval_of_wait_shifts() {
    let outs = causal_eval(
        &MStream::wait(&Ty::int()),
        &[vec![vi(10)], vec![vi(20)], vec![vi(30)]],
    )
    .unwrap();
    assert_eq!(outs, vec![vec![Value::Unit], vec![vi(10)], vec![vi(20)]]);
}

#[test]
fn causal_eval_prefix_is_invariant_under_future_mutation() {
    let w = MStream::wait(&Ty::int());
    let a = causal_eval(&w, &[vec![vi(1)], vec![vi(2)], vec![vi(3)], vec![vi(4)]]).unwrap();
    let b = causal_eval(&w, &[vec![vi(1)], vec![vi(2)], vec![vi(3)], vec![vi(99)]]).unwrap();
    assert_eq!(a[..4].to_vec(), b[..4].to_vec());
}

#[test]
fn causal_eval_rejects_stochastic_streams() {
    let r = causal_eval(&walk_stream(), &vec![vec![]; 3]);
    assert!(matches!(r, Err(TruncError::NotDeterministic(_))));
}

#[test]
fn det_proc_support_matches_causal_eval() {
    let f = fib_stream();
    let jd = proc_semantics(&f, &InputSpec::Closed, 6).unwrap();
    let d = jd.dist_for(&[]).unwrap();
    let point = d.is_dirac().expect("deterministic stream yields a point mass");
    let outs = causal_eval(&f, &vec![vec![]; 7]).unwrap();
    let flat: Vec<Value> = outs.into_iter().flatten().collect();
    assert_eq!(*point, Value::Tuple(flat));
}

#[test]
fn truncation_is_coherent() {
    let f = walk_stream();
    let deep = proc_semantics(&f, &InputSpec::Closed, 5).unwrap();
    let mut cur = deep;
    for depth in (0..5).rev() {
        cur = cur.truncate_once().unwrap();
        let direct = proc_semantics(&f, &InputSpec::Closed, depth).unwrap();
        assert_eq!(cur, direct);
    }
}

#[test]
fn obs_equiv_is_an_equivalence_on_samples() {
    let mut rng = SampleRng::from_seed(7);
    let a = Ty::int_domain([0, 1]);
    let b = Ty::int_domain([0, 1, 2]);
    let f = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
    let g = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
    let h = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
    let refl = obs_equiv(&f, &f, &InputSpec::FromTypes, 3).unwrap();
    assert!(refl.equal());
    let fg = obs_equiv(&f, &g, &InputSpec::FromTypes, 3).unwrap();
    let gf = obs_equiv(&g, &f, &InputSpec::FromTypes, 3).unwrap();
    assert_eq!(fg.equal(), gf.equal());
    let gh = obs_equiv(&g, &h, &InputSpec::FromTypes, 3).unwrap();
    let fh = obs_equiv(&f, &h, &InputSpec::FromTypes, 3).unwrap();
    if fg.equal() && gh.equal() {
        assert!(fh.equal());
    }
}

#[test]
fn composing_with_identities_never_changes_the_verdict() {
    let mut rng = SampleRng::from_seed(11);
    let a = Ty::int_domain([0, 1]);
    let b = Ty::int_domain([0, 1]);
    let f = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
    let g = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
    let id_a = MStream::identity(Schedule::constant(vec![a.clone()]));
    let id_b = MStream::identity(Schedule::constant(vec![b.clone()]));
    let padded = id_a.seq(&f).unwrap().seq(&id_b).unwrap();
    let plain = obs_equiv(&f, &g, &InputSpec::FromTypes, 3).unwrap();
    let wrapped = obs_equiv(&padded, &g, &InputSpec::FromTypes, 3).unwrap();
    assert_eq!(plain.equal(), wrapped.equal());
}

#[test]
fn obs_equiv_refuses_undeclared_infinite_inputs() {
    let f = MStream::identity(Schedule::constant(vec![Ty::int()]));
    let r = obs_equiv(&f, &f, &InputSpec::FromTypes, 2);
    assert!(matches!(r, Err(TruncError::Kernel(_))), "{r:?}");
}

#[test]
fn random_compositions_pass_causality() {
    let mut rng = SampleRng::from_seed(23);
    for _ in 0..10 {
        let a = Ty::int_domain([0, 1]);
        let b = Ty::int_domain([0, 1]);
        let c = Ty::int_domain([0, 1]);
        let f = random_stream(&mut rng, &[a.clone()], &[b.clone()]);
        let g = random_stream(&mut rng, &[b.clone()], &[c.clone()]);
        let fg = f.seq(&g).unwrap();
        let report = check_causality(&fg, &InputSpec::FromTypes, 3).unwrap();
        assert!(report.pass, "witness: {:?}", report.witness);
    }
}

#[test]
fn sampled_walk_moves_by_single_steps() {
    let outs = walk_stream()
        .run_sample(&RunInputs::None, 200, &mut SampleRng::from_seed(5))
        .unwrap();
    assert_eq!(outs[0], vec![vi(0)]);
    for t in 1..outs.len() {
        let prev = outs[t - 1][0].as_int().unwrap();
        let cur = outs[t][0].as_int().unwrap();
        let diff: BigInt = cur - prev;
        assert_eq!(diff.magnitude().to_string(), "1");
    }
}
