//! One-step processes: typed maps from input tuples to output tuples,
//! deterministic or stochastic, with their monoidal structure.

use std::fmt;
use std::sync::Arc;

use super::{Dist, KernelError, SampleRng, Ty, Value};

type DetFn = dyn Fn(&[Value]) -> Result<Vec<Value>, KernelError> + Send + Sync;
type StochFn = dyn Fn(&[Value]) -> Result<Dist, KernelError> + Send + Sync;

#[derive(Clone)]
enum Body {
    Det(Arc<DetFn>),
    Stoch(Arc<StochFn>),
}

/// Which structural wiring a [`Kernel::structural`] kernel performs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StructuralKind {
    Identity,
    Symmetry,
    Copy,
    Discard,
}

/// A one-step process from an input tuple to an output tuple. Deterministic
/// kernels stay deterministic under composition and tensoring; stochastic
/// kernels return exact finite distributions over output tuples.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    ins: Vec<Ty>,
    outs: Vec<Ty>,
    body: Body,
}

impl Kernel {
    pub fn from_det<F>(name: impl Into<String>, ins: Vec<Ty>, outs: Vec<Ty>, f: F) -> Kernel
    where
        F: Fn(&[Value]) -> Result<Vec<Value>, KernelError> + Send + Sync + 'static,
    {
        Kernel { name: name.into(), ins, outs, body: Body::Det(Arc::new(f)) }
    }

    pub fn from_stoch<F>(name: impl Into<String>, ins: Vec<Ty>, outs: Vec<Ty>, f: F) -> Kernel
    where
        F: Fn(&[Value]) -> Result<Dist, KernelError> + Send + Sync + 'static,
    {
        Kernel { name: name.into(), ins, outs, body: Body::Stoch(Arc::new(f)) }
    }

    /// A constant kernel emitting fixed values on the unit input.
    pub fn constant(name: impl Into<String>, outs: Vec<Ty>, values: Vec<Value>) -> Kernel {
        Kernel::from_det(name, vec![], outs, move |_| Ok(values.clone()))
    }

    /// A nullary stochastic kernel emitting draws from a fixed distribution
    /// over single values.
    pub fn from_dist(name: impl Into<String>, out: Ty, dist: Dist) -> Kernel {
        let tupled = dist.map(|v| Value::Tuple(vec![v.clone()]));
        Kernel::from_stoch(name, vec![], vec![out], move |_| Ok(tupled.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[Ty] {
        &self.ins
    }

    pub fn outputs(&self) -> &[Ty] {
        &self.outs
    }

    pub fn is_det(&self) -> bool {
        matches!(self.body, Body::Det(_))
    }

    fn check_input(&self, input: &[Value]) -> Result<(), KernelError> {
        if input.len() != self.ins.len() {
            return Err(KernelError::IllTyped(format!(
                "kernel `{}` expects {} inputs, got {}",
                self.name,
                self.ins.len(),
                input.len()
            )));
        }
        for (v, t) in input.iter().zip(&self.ins) {
            if !v.has_type(t) {
                return Err(KernelError::IllTyped(format!(
                    "kernel `{}`: input {v} does not have type {t}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Run deterministically, without validation of the output side.
    pub fn apply_det(&self, input: &[Value]) -> Result<Vec<Value>, KernelError> {
        self.check_input(input)?;
        match &self.body {
            Body::Det(f) => f(input),
            Body::Stoch(_) => Err(KernelError::NotDeterministic(self.name.clone())),
        }
    }

    /// Exact mode: the full output distribution over output tuples.
    /// Deterministic kernels yield a point mass.
    pub fn apply_exact(&self, input: &[Value]) -> Result<Dist, KernelError> {
        self.check_input(input)?;
        match &self.body {
            Body::Det(f) => Ok(Dist::dirac(Value::Tuple(f(input)?))),
            Body::Stoch(f) => f(input),
        }
    }

    /// Sample mode: one concrete outcome drawn from the seedable source.
    pub fn apply_sample(
        &self,
        input: &[Value],
        rng: &mut SampleRng,
    ) -> Result<Vec<Value>, KernelError> {
        self.check_input(input)?;
        match &self.body {
            Body::Det(f) => f(input),
            Body::Stoch(f) => match f(input)?.sample(rng) {
                Value::Tuple(vs) => Ok(vs),
                other => Err(KernelError::IllTyped(format!(
                    "stochastic kernel `{}` produced a non-tuple outcome {other}",
                    self.name
                ))),
            },
        }
    }

    /// Sequential composition `self ; g`. Output and input signatures must
    /// agree; a composite of deterministic kernels stays deterministic.
    pub fn compose(&self, g: &Kernel) -> Result<Kernel, KernelError> {
        if self.outs.len() != g.ins.len()
            || !self.outs.iter().zip(&g.ins).all(|(a, b)| a.same_shape(b))
        {
            return Err(KernelError::SignatureMismatch {
                left: format!("{}: {}", self.name, sig(&self.outs)),
                right: format!("{}: {}", g.name, sig(&g.ins)),
            });
        }
        let name = format!("{};{}", self.name, g.name);
        let ins = self.ins.clone();
        let outs = g.outs.clone();
        match (&self.body, &g.body) {
            (Body::Det(f), Body::Det(h)) => {
                let (f, h) = (f.clone(), h.clone());
                Ok(Kernel::from_det(name, ins, outs, move |x| h(&f(x)?)))
            }
            _ => {
                let (f, h) = (self.clone(), g.clone());
                Ok(Kernel::from_stoch(name, ins, outs, move |x| {
                    f.apply_exact(x)?.bind(|mid| match mid {
                        Value::Tuple(vs) => h.apply_exact(vs),
                        other => h.apply_exact(std::slice::from_ref(other)),
                    })
                }))
            }
        }
    }

    /// Monoidal product: acts componentwise; two stochastic factors form
    /// the independent product distribution.
    pub fn tensor(&self, g: &Kernel) -> Kernel {
        let name = format!("{}(x){}", self.name, g.name);
        let mut ins = self.ins.clone();
        ins.extend(g.ins.iter().cloned());
        let mut outs = self.outs.clone();
        outs.extend(g.outs.iter().cloned());
        let split = self.ins.len();
        match (&self.body, &g.body) {
            (Body::Det(f), Body::Det(h)) => {
                let (f, h) = (f.clone(), h.clone());
                Kernel::from_det(name, ins, outs, move |x| {
                    let (a, b) = x.split_at(split);
                    let mut out = f(a)?;
                    out.extend(h(b)?);
                    Ok(out)
                })
            }
            _ => {
                let (f, h) = (self.clone(), g.clone());
                Kernel::from_stoch(name, ins, outs, move |x| {
                    let (a, b) = x.split_at(split);
                    f.apply_exact(a)?.product(&h.apply_exact(b)?)
                })
            }
        }
    }

    /// The Markov structural kernels. `Identity` and `Copy` take the wire
    /// types directly; `Symmetry` swaps the two blocks given as `[a, b]`
    /// (flattening products); `Discard` erases all its inputs.
    pub fn structural(kind: StructuralKind, types: &[Ty]) -> Kernel {
        match kind {
            StructuralKind::Identity => Kernel::identity(types),
            StructuralKind::Copy => Kernel::copy(types),
            StructuralKind::Discard => Kernel::discard(types),
            StructuralKind::Symmetry => {
                let (a, b) = match types {
                    [a, b] => (a.wires(), b.wires()),
                    _ => (
                        types[..types.len() / 2].to_vec(),
                        types[types.len() / 2..].to_vec(),
                    ),
                };
                Kernel::symmetry(&a, &b)
            }
        }
    }

    pub fn identity(types: &[Ty]) -> Kernel {
        let tys: Vec<Ty> = types.iter().flat_map(Ty::wires).collect();
        Kernel::from_det("id", tys.clone(), tys, |x| Ok(x.to_vec()))
    }

    /// Wire swap of two blocks: `(a, b) -> (b, a)`.
    pub fn symmetry(a: &[Ty], b: &[Ty]) -> Kernel {
        let a: Vec<Ty> = a.iter().flat_map(Ty::wires).collect();
        let b: Vec<Ty> = b.iter().flat_map(Ty::wires).collect();
        let split = a.len();
        let mut ins = a.clone();
        ins.extend(b.iter().cloned());
        let mut outs = b;
        outs.extend(a);
        Kernel::from_det("swap", ins, outs, move |x| {
            let (xa, xb) = x.split_at(split);
            let mut out = xb.to_vec();
            out.extend_from_slice(xa);
            Ok(out)
        })
    }

    /// Duplication of a value: sampling once and then copying, never two
    /// independent samples.
    pub fn copy(types: &[Ty]) -> Kernel {
        let tys: Vec<Ty> = types.iter().flat_map(Ty::wires).collect();
        let mut outs = tys.clone();
        outs.extend(tys.iter().cloned());
        Kernel::from_det("copy", tys, outs, |x| {
            let mut out = x.to_vec();
            out.extend_from_slice(x);
            Ok(out)
        })
    }

    pub fn discard(types: &[Ty]) -> Kernel {
        let tys: Vec<Ty> = types.iter().flat_map(Ty::wires).collect();
        Kernel::from_det("discard", tys, vec![], |_| Ok(vec![]))
    }

    /// Rearrangement: output wire `j` carries input wire `picks[j]`.
    /// Duplicated indices copy values; unlisted inputs are discarded.
    pub fn route(ins: &[Ty], picks: &[usize]) -> Kernel {
        let outs: Vec<Ty> = picks.iter().map(|&i| ins[i].clone()).collect();
        let picks = picks.to_vec();
        Kernel::from_det("route", ins.to_vec(), outs, move |x| {
            Ok(picks.iter().map(|&i| x[i].clone()).collect())
        })
    }
}

fn sig(tys: &[Ty]) -> String {
    let parts: Vec<String> = tys.iter().map(Ty::to_string).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Kernel({} : {} -> {}{})",
            self.name,
            sig(&self.ins),
            sig(&self.outs),
            if self.is_det() { "" } else { ", stoch" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::dist::rat;
    use super::super::enumerate_tuples;
    use super::*;

    fn vi(n: i64) -> Value {
        Value::int(n)
    }

    fn add() -> Kernel {
        Kernel::from_det("add", vec![Ty::int(), Ty::int()], vec![Ty::int()], |x| {
            Ok(vec![Value::Int(x[0].as_int()? + x[1].as_int()?)])
        })
    }

    fn negate() -> Kernel {
        Kernel::from_det("neg", vec![Ty::int()], vec![Ty::int()], |x| {
            Ok(vec![Value::Int(-x[0].as_int()?.clone())])
        })
    }

    fn unif_pm1() -> Kernel {
        Kernel::from_dist("unif", Ty::int(), Dist::uniform(&[vi(-1), vi(1)]).unwrap())
    }

    #[test]
    fn det_apply_lifts_to_point_mass() {
        let d = add().apply_exact(&[vi(2), vi(3)]).unwrap();
        assert_eq!(d, Dist::dirac(Value::tuple(vec![vi(5)])));
    }

    #[test]
    fn stochastic_apply_exact() {
        let d = unif_pm1().apply_exact(&[]).unwrap();
        assert_eq!(d.weight(&Value::tuple(vec![vi(-1)])), rat(1, 2));
        assert_eq!(d.weight(&Value::tuple(vec![vi(1)])), rat(1, 2));
    }

    #[test]
    fn move_ball_toggles_membership() {
        let mv = move_ball();
        let out = mv
            .apply_det(&[vi(2), Value::set([1, 2, 3])])
            .unwrap();
        assert_eq!(out, vec![Value::set([1, 3])]);
        let out = mv.apply_det(&[vi(4), Value::set([1, 2])]).unwrap();
        assert_eq!(out, vec![Value::set([1, 2, 4])]);
    }

    fn move_ball() -> Kernel {
        Kernel::from_det(
            "move",
            vec![Ty::int(), Ty::set()],
            vec![Ty::set()],
            |x| {
                let n = x[0].as_int()?;
                let n = i64::try_from(n.clone())
                    .map_err(|_| KernelError::IllTyped("ball label out of range".into()))?;
                let mut s = x[1].as_set()?.clone();
                if !s.remove(&n) {
                    s.insert(n);
                }
                Ok(vec![Value::IntSet(s)])
            },
        )
    }

    #[test]
    fn compose_identity_is_unit() {
        let f = add();
        let idf = Kernel::identity(&[Ty::int(), Ty::int()]).compose(&f).unwrap();
        for ins in enumerate_tuples(&[Ty::int_domain([-1, 0, 2]), Ty::int_domain([3, 7])]).unwrap()
        {
            assert_eq!(idf.apply_exact(&ins).unwrap(), f.apply_exact(&ins).unwrap());
        }
    }

    #[test]
    fn compose_pushes_distributions_forward() {
        // A uniform +/-1 step followed by negation is again uniform +/-1.
        let d = unif_pm1().compose(&negate()).unwrap().apply_exact(&[]).unwrap();
        assert_eq!(d.weight(&Value::tuple(vec![vi(1)])), rat(1, 2));
        assert_eq!(d.weight(&Value::tuple(vec![vi(-1)])), rat(1, 2));
    }

    #[test]
    fn compose_signature_mismatch() {
        assert!(matches!(
            add().compose(&add()),
            Err(KernelError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn compose_is_associative_pointwise() {
        let f = Kernel::copy(&[Ty::int()]);
        let g = add();
        let h = negate();
        let lhs = f.compose(&g.compose(&h).unwrap()).unwrap();
        let rhs = f.compose(&g).unwrap().compose(&h).unwrap();
        for ins in enumerate_tuples(&[Ty::int_domain([-2, 0, 5])]).unwrap() {
            assert_eq!(lhs.apply_exact(&ins).unwrap(), rhs.apply_exact(&ins).unwrap());
        }
    }

    #[test]
    fn tensor_acts_componentwise() {
        let id2 = Kernel::identity(&[Ty::int()]).tensor(&Kernel::identity(&[Ty::set()]));
        let out = id2.apply_det(&[vi(5), Value::set([1])]).unwrap();
        assert_eq!(out, vec![vi(5), Value::set([1])]);
    }

    #[test]
    fn tensor_of_uniforms_is_independent() {
        let d = unif_pm1().tensor(&unif_pm1()).apply_exact(&[]).unwrap();
        assert_eq!(d.support_len(), 4);
        for a in [-1, 1] {
            for b in [-1, 1] {
                assert_eq!(d.weight(&Value::tuple(vec![vi(a), vi(b)])), rat(1, 4));
            }
        }
        // Projecting onto the first block recovers the first factor.
        let m = d.marginal(&[0]).unwrap();
        assert_eq!(m.weight(&vi(-1)), rat(1, 2));
    }

    #[test]
    fn structural_kernels() {
        let c = Kernel::copy(&[Ty::int()]);
        assert_eq!(c.apply_det(&[vi(5)]).unwrap(), vec![vi(5), vi(5)]);

        let s = Kernel::symmetry(&[Ty::int()], &[Ty::set()]);
        assert_eq!(
            s.apply_det(&[vi(1), Value::set([2])]).unwrap(),
            vec![Value::set([2]), vi(1)]
        );

        // Counit law of the comonoid: copy;(discard (x) id) = identity.
        let lhs = c
            .compose(&Kernel::discard(&[Ty::int()]).tensor(&Kernel::identity(&[Ty::int()])))
            .unwrap();
        for ins in enumerate_tuples(&[Ty::int_domain([-1, 0, 1, 9])]).unwrap() {
            assert_eq!(lhs.apply_det(&ins).unwrap(), ins);
        }
    }

    #[test]
    fn discard_is_natural_but_copy_is_not() {
        // f;discard = discard for stochastic f (natural counit).
        let f = unif_pm1();
        let lhs = f.compose(&Kernel::discard(&[Ty::int()])).unwrap();
        assert_eq!(
            lhs.apply_exact(&[]).unwrap(),
            Dist::dirac(Value::tuple(vec![]))
        );
        // copy . unif differs from unif (x) unif: one sample copied vs two
        // independent samples.
        let copied = f.compose(&Kernel::copy(&[Ty::int()])).unwrap().apply_exact(&[]).unwrap();
        let two = f.tensor(&f).apply_exact(&[]).unwrap();
        assert_ne!(copied, two);
        assert_eq!(copied.weight(&Value::tuple(vec![vi(1), vi(1)])), rat(1, 2));
        assert_eq!(two.weight(&Value::tuple(vec![vi(1), vi(1)])), rat(1, 4));
    }

    #[test]
    fn det_embedding_commutes_with_compose_and_tensor() {
        // Deterministic kernels seen as point-mass stochastic kernels
        // compose identically to their deterministic composition.
        let f = Kernel::copy(&[Ty::int()]);
        let g = add();
        let det = f.compose(&g).unwrap();
        let as_stoch = |k: &Kernel| {
            let k = k.clone();
            Kernel::from_stoch(
                format!("lift({})", k.name()),
                k.inputs().to_vec(),
                k.outputs().to_vec(),
                move |x| k.apply_exact(x),
            )
        };
        let stoch = as_stoch(&f).compose(&as_stoch(&g)).unwrap();
        for ins in enumerate_tuples(&[Ty::int_domain([-1, 0, 3])]).unwrap() {
            assert_eq!(det.apply_exact(&ins).unwrap(), stoch.apply_exact(&ins).unwrap());
        }
        let dt = f.tensor(&g);
        let st = as_stoch(&f).tensor(&as_stoch(&g));
        for ins in
            enumerate_tuples(&[Ty::int_domain([0, 1]), Ty::int_domain([2]), Ty::int_domain([4])])
                .unwrap()
        {
            assert_eq!(dt.apply_exact(&ins).unwrap(), st.apply_exact(&ins).unwrap());
        }
    }

    #[test]
    fn ill_typed_input_is_rejected() {
        assert!(matches!(
            add().apply_det(&[vi(1), Value::Unit]),
            Err(KernelError::IllTyped(_))
        ));
        assert!(matches!(
            add().apply_det(&[vi(1)]),
            Err(KernelError::IllTyped(_))
        ));
    }
}
