//! Per-step type signatures of a stream, as finitely-describable functions
//! from step index to type lists.
//!
//! Every schedule built from the constructors (constant, cons, delayed,
//! tensor) is eventually constant, so it is kept in the normal form of a
//! finite prefix followed by a repeating body. Equality of schedules is
//! decidable on this normal form.

use std::fmt;

use crate::kernel::{Ty, TyKind};

#[derive(Clone, Eq)]
pub struct Schedule {
    prefix: Vec<Vec<Ty>>,
    body: Vec<Ty>,
}

impl Schedule {
    /// The same type list at every step.
    pub fn constant(tys: Vec<Ty>) -> Schedule {
        Schedule { prefix: Vec::new(), body: tys }
    }

    /// The empty signature at every step (no wires).
    pub fn empty() -> Schedule {
        Schedule::constant(Vec::new())
    }

    /// A given head at step 0, the tail schedule afterwards.
    pub fn cons(head: Vec<Ty>, tail: Schedule) -> Schedule {
        let mut prefix = vec![head];
        prefix.extend(tail.prefix);
        Schedule { prefix, body: tail.body }.canonical()
    }

    /// The delay of a schedule: unit-typed wires at step 0, then the
    /// original schedule shifted by one.
    pub fn delayed(&self) -> Schedule {
        let units = vec![Ty::unit(); self.at(0).len()];
        Schedule::cons(units, self.clone())
    }

    /// The wire schedule of a list of surface types. Products flatten to
    /// adjacent wires; each `@` on a wire realizes as `Unit` for one more
    /// initial step.
    pub fn of_types(tys: &[Ty]) -> Schedule {
        let wires: Vec<Ty> = tys.iter().flat_map(Ty::wires).collect();
        let mut depth_of = Vec::with_capacity(wires.len());
        let mut atoms = Vec::with_capacity(wires.len());
        let mut max_depth = 0usize;
        for w in &wires {
            let mut d = 0;
            let mut cur = w.clone();
            while let TyKind::Delay(inner) = cur.kind {
                d += 1;
                let mut t = (*inner).clone();
                // Keep an outer domain annotation attached to the atom.
                if t.domain.is_none() {
                    t.domain = cur.domain.clone();
                }
                cur = t;
            }
            max_depth = max_depth.max(d);
            depth_of.push(d);
            atoms.push(cur);
        }
        let mut prefix = Vec::with_capacity(max_depth);
        for step in 0..max_depth {
            prefix.push(
                atoms
                    .iter()
                    .zip(&depth_of)
                    .map(|(a, &d)| if step < d { Ty::unit() } else { a.clone() })
                    .collect(),
            );
        }
        Schedule { prefix, body: atoms }.canonical()
    }

    fn canonical(mut self) -> Schedule {
        while self.prefix.last() == Some(&self.body) {
            self.prefix.pop();
        }
        self
    }

    /// The type list at step `t`.
    pub fn at(&self, t: usize) -> &[Ty] {
        self.prefix.get(t).unwrap_or(&self.body)
    }

    pub fn arity_at(&self, t: usize) -> usize {
        self.at(t).len()
    }

    /// The schedule from step 1 on.
    pub fn tail(&self) -> Schedule {
        if self.prefix.is_empty() {
            self.clone()
        } else {
            Schedule { prefix: self.prefix[1..].to_vec(), body: self.body.clone() }
        }
    }

    /// Pointwise concatenation: the schedule of a parallel pair.
    pub fn tensor(&self, other: &Schedule) -> Schedule {
        let n = self.prefix.len().max(other.prefix.len());
        let prefix = (0..n)
            .map(|t| {
                let mut row = self.at(t).to_vec();
                row.extend_from_slice(other.at(t));
                row
            })
            .collect();
        let mut body = self.body.clone();
        body.extend(other.body.iter().cloned());
        Schedule { prefix, body }.canonical()
    }

    /// Number of steps before both schedules are in their repeating bodies.
    fn horizon(&self, other: &Schedule) -> usize {
        self.prefix.len().max(other.prefix.len())
    }

    /// The step from which this schedule repeats.
    pub fn stabilization(&self) -> usize {
        self.prefix.len()
    }

    /// Signature compatibility at every step, ignoring domain descriptors.
    pub fn matches(&self, other: &Schedule) -> bool {
        let h = self.horizon(other);
        (0..=h).all(|t| {
            let (a, b) = (self.at(t), other.at(t));
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
        })
    }

    /// Split off a leading block: if at every step `other.at(t)` is a
    /// shape-prefix of `self.at(t)`, return the schedule of the remainder.
    pub fn strip_prefix(&self, other: &Schedule) -> Option<Schedule> {
        let h = self.horizon(other);
        for t in 0..=h {
            let (a, b) = (self.at(t), other.at(t));
            if b.len() > a.len() || !a.iter().zip(b).all(|(x, y)| x.same_shape(y)) {
                return None;
            }
        }
        let prefix = (0..h)
            .map(|t| self.at(t)[other.at(t).len()..].to_vec())
            .collect();
        let body = self.body[other.body.len()..].to_vec();
        Some(Schedule { prefix, body }.canonical())
    }

    /// True when the signature is empty at steps `0..=depth`.
    pub fn is_empty_up_to(&self, depth: usize) -> bool {
        (0..=depth).all(|t| self.at(t).is_empty())
    }
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        let h = self.horizon(other);
        (0..=h).all(|t| self.at(t) == other.at(t))
    }
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |tys: &[Ty]| {
            let parts: Vec<String> = tys.iter().map(Ty::to_string).collect();
            format!("[{}]", parts.join(", "))
        };
        for p in &self.prefix {
            write!(f, "{}, ", row(p))?;
        }
        write!(f, "{}...", row(&self.body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delayed_shifts_by_one() {
        let s = Schedule::constant(vec![Ty::int()]);
        let d = s.delayed();
        assert_eq!(d.at(0), &[Ty::unit()]);
        assert_eq!(d.at(1), &[Ty::int()]);
        assert_eq!(d.tail(), s);
    }

    #[test]
    fn of_types_realizes_delays() {
        let s = Schedule::of_types(&[Ty::delay(Ty::int())]);
        assert_eq!(s, Schedule::constant(vec![Ty::int()]).delayed());
        let s2 = Schedule::of_types(&[Ty::delay(Ty::delay(Ty::int()))]);
        assert_eq!(s2.at(0), &[Ty::unit()]);
        assert_eq!(s2.at(1), &[Ty::unit()]);
        assert_eq!(s2.at(2), &[Ty::int()]);
        // Delay distributes over products wire by wire.
        let s3 = Schedule::of_types(&[Ty::delay(Ty::prod(vec![Ty::int(), Ty::set()]))]);
        assert_eq!(s3.at(0), &[Ty::unit(), Ty::unit()]);
        assert_eq!(s3.at(1), &[Ty::int(), Ty::set()]);
    }

    #[test]
    fn equality_is_semantic() {
        let a = Schedule::cons(vec![Ty::int()], Schedule::constant(vec![Ty::int()]));
        let b = Schedule::constant(vec![Ty::int()]);
        assert_eq!(a, b);
        let c = Schedule::cons(vec![Ty::unit()], Schedule::constant(vec![Ty::int()]));
        assert_ne!(c, b);
    }

    #[test]
    fn strip_prefix_subtracts_blocks() {
        let state = Schedule::constant(vec![Ty::int()]);
        let full = state.delayed().tensor(&Schedule::constant(vec![Ty::set()]));
        let rest = full.strip_prefix(&state.delayed()).unwrap();
        assert_eq!(rest, Schedule::constant(vec![Ty::set()]));
        assert!(full.strip_prefix(&Schedule::constant(vec![Ty::set()])).is_none());
    }
}
