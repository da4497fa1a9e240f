//! Runtime values and the types that classify them.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;

use super::KernelError;

/// A runtime datum: unit, arbitrary-precision integer, finite integer set
/// (an urn), or a tuple of values.
///
/// The derived order is used to keep distribution supports in a canonical,
/// deterministic order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Int(BigInt),
    IntSet(BTreeSet<i64>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn int(n: impl Into<BigInt>) -> Self {
        Value::Int(n.into())
    }

    pub fn set<I: IntoIterator<Item = i64>>(elems: I) -> Self {
        Value::IntSet(elems.into_iter().collect())
    }

    pub fn tuple(vs: impl Into<Vec<Value>>) -> Self {
        Value::Tuple(vs.into())
    }

    pub fn as_int(&self) -> Result<&BigInt, KernelError> {
        match self {
            Value::Int(n) => Ok(n),
            other => Err(KernelError::IllTyped(format!(
                "expected an integer, got {other}"
            ))),
        }
    }

    pub fn as_set(&self) -> Result<&BTreeSet<i64>, KernelError> {
        match self {
            Value::IntSet(s) => Ok(s),
            other => Err(KernelError::IllTyped(format!(
                "expected a set, got {other}"
            ))),
        }
    }

    /// Structural check against a type; finite-domain descriptors do not
    /// restrict membership, they only drive enumeration.
    pub fn has_type(&self, ty: &Ty) -> bool {
        match (self, &ty.kind) {
            (Value::Unit, TyKind::Unit) => true,
            (Value::Int(_), TyKind::Int) => true,
            (Value::IntSet(_), TyKind::Set) => true,
            (Value::Tuple(vs), TyKind::Prod(ts)) => {
                vs.len() == ts.len() && vs.iter().zip(ts).all(|(v, t)| v.has_type(t))
            }
            // A delayed type is inhabited by the unit placeholder before the
            // underlying value arrives, and by the underlying value after.
            (v, TyKind::Delay(t)) => matches!(v, Value::Unit) || v.has_type(t),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Int(n) => write!(f, "{n}"),
            Value::IntSet(s) => {
                write!(f, "{{")?;
                for (i, e) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")
            }
            Value::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Shape of a type.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TyKind {
    Int,
    Unit,
    Set,
    Prod(Vec<Ty>),
    Delay(Box<Ty>),
}

/// A type, with an optional finite-domain descriptor listing every
/// inhabitant (used by exact enumeration).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ty {
    pub kind: TyKind,
    pub domain: Option<Arc<Vec<Value>>>,
}

impl Ty {
    pub fn int() -> Self {
        Ty { kind: TyKind::Int, domain: None }
    }

    pub fn unit() -> Self {
        Ty { kind: TyKind::Unit, domain: None }
    }

    pub fn set() -> Self {
        Ty { kind: TyKind::Set, domain: None }
    }

    pub fn prod(tys: impl Into<Vec<Ty>>) -> Self {
        Ty { kind: TyKind::Prod(tys.into()), domain: None }
    }

    pub fn delay(t: Ty) -> Self {
        Ty { kind: TyKind::Delay(Box::new(t)), domain: None }
    }

    /// An `Int` type carrying an explicit finite domain.
    pub fn int_domain<I: IntoIterator<Item = i64>>(elems: I) -> Self {
        let vals: Vec<Value> = elems.into_iter().map(Value::int).collect();
        Ty { kind: TyKind::Int, domain: Some(Arc::new(vals)) }
    }

    pub fn with_domain(mut self, vals: Vec<Value>) -> Self {
        self.domain = Some(Arc::new(vals));
        self
    }

    /// Signature compatibility: same shape, ignoring domain descriptors.
    pub fn same_shape(&self, other: &Ty) -> bool {
        match (&self.kind, &other.kind) {
            (TyKind::Int, TyKind::Int)
            | (TyKind::Unit, TyKind::Unit)
            | (TyKind::Set, TyKind::Set) => true,
            (TyKind::Prod(a), TyKind::Prod(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
            }
            (TyKind::Delay(a), TyKind::Delay(b)) => a.same_shape(b),
            _ => false,
        }
    }

    /// Every inhabitant, if this type is finitely enumerable. `Unit` always
    /// is; other base types need a descriptor; products multiply out.
    pub fn domain_values(&self) -> Option<Vec<Value>> {
        if let Some(d) = &self.domain {
            return Some(d.as_ref().clone());
        }
        match &self.kind {
            TyKind::Unit => Some(vec![Value::Unit]),
            TyKind::Prod(ts) => {
                let parts: Option<Vec<Vec<Value>>> =
                    ts.iter().map(Ty::domain_values).collect();
                let parts = parts?;
                let mut out = vec![Vec::new()];
                for p in &parts {
                    let mut next = Vec::with_capacity(out.len() * p.len());
                    for prefix in &out {
                        for v in p {
                            let mut row = prefix.clone();
                            row.push(v.clone());
                            next.push(row);
                        }
                    }
                    out = next;
                }
                Some(out.into_iter().map(Value::Tuple).collect())
            }
            _ => None,
        }
    }

    /// Flatten products into the list of wire types carried on the monoidal
    /// tensor. `Delay` applies to each wire componentwise.
    pub fn wires(&self) -> Vec<Ty> {
        match &self.kind {
            TyKind::Prod(ts) => ts.iter().flat_map(Ty::wires).collect(),
            TyKind::Delay(t) => t
                .wires()
                .into_iter()
                .map(|w| {
                    let mut d = Ty::delay(w);
                    d.domain = self.domain.clone();
                    d
                })
                .collect(),
            _ => vec![self.clone()],
        }
    }

    /// Strip `n` leading delays off every wire; `None` when some wire does
    /// not carry that many delays.
    pub fn strip_delay(&self, n: usize) -> Option<Ty> {
        if n == 0 {
            return Some(self.clone());
        }
        match &self.kind {
            TyKind::Delay(t) => t.strip_delay(n - 1),
            TyKind::Prod(ts) => {
                let parts: Option<Vec<Ty>> = ts.iter().map(|t| t.strip_delay(n)).collect();
                Some(Ty::prod(parts?))
            }
            _ => None,
        }
    }

    /// Push delays through products: `@(A * B)` reads as `(@A * @B)`.
    pub fn normalize(&self) -> Ty {
        match &self.kind {
            TyKind::Prod(ts) => Ty {
                kind: TyKind::Prod(ts.iter().map(Ty::normalize).collect()),
                domain: self.domain.clone(),
            },
            TyKind::Delay(t) => match t.normalize() {
                Ty { kind: TyKind::Prod(ts), .. } => Ty {
                    kind: TyKind::Prod(ts.into_iter().map(Ty::delay).collect()),
                    domain: self.domain.clone(),
                },
                inner => Ty { kind: TyKind::Delay(Box::new(inner)), domain: self.domain.clone() },
            },
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TyKind::Int => write!(f, "Int"),
            TyKind::Unit => write!(f, "Unit"),
            TyKind::Set => write!(f, "Set"),
            TyKind::Prod(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            TyKind::Delay(t) => write!(f, "@{t}"),
        }
    }
}

/// Enumerate every assignment of values to a list of wire types.
/// Fails with the first wire that has no finite domain.
pub fn enumerate_tuples(tys: &[Ty]) -> Result<Vec<Vec<Value>>, KernelError> {
    let mut rows = vec![Vec::new()];
    for ty in tys {
        let dom = ty
            .domain_values()
            .ok_or_else(|| KernelError::MissingDomain(ty.to_string()))?;
        let mut next = Vec::with_capacity(rows.len() * dom.len());
        for row in &rows {
            for v in &dom {
                let mut r = row.clone();
                r.push(v.clone());
                next.push(r);
            }
        }
        rows = next;
    }
    Ok(rows)
}
