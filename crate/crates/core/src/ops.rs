//! Operation counters.
//!
//! Every group exponentiation, group multiplication, pairing and hash
//! evaluation performed through this crate is tallied in a thread-local
//! counter. [`measure`] scopes a tally to one closure, which is how the
//! harness attributes costs to a single party and protocol step.
//!
//! Well-formedness checks (key validity, signature verification) are tallied
//! in a separate `verification` bucket so the cost of a protocol step can be
//! read with or without them.

use std::cell::{Cell, RefCell};
use std::ops::AddAssign;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub exponentiations: u64,
    pub multiplications: u64,
    pub pairings: u64,
    pub hashes: u64,
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.exponentiations += rhs.exponentiations;
        self.multiplications += rhs.multiplications;
        self.pairings += rhs.pairings;
        self.hashes += rhs.hashes;
    }
}

impl OpCounters {
    pub fn is_zero(&self) -> bool {
        *self == OpCounters::default()
    }
}

/// Counters for one measured region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpTally {
    /// Work the protocol step itself performs.
    pub protocol: OpCounters,
    /// Work spent checking material received from another party.
    pub verification: OpCounters,
}

impl AddAssign for OpTally {
    fn add_assign(&mut self, rhs: Self) {
        self.protocol += rhs.protocol;
        self.verification += rhs.verification;
    }
}

impl OpTally {
    pub fn total(&self) -> OpCounters {
        let mut t = self.protocol;
        t += self.verification;
        t
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Op {
    Exp,
    Mul,
    Pairing,
    Hash,
}

thread_local! {
    static TALLY: RefCell<OpTally> = RefCell::new(OpTally::default());
    static VERIFYING: Cell<bool> = const { Cell::new(false) };
}

pub(crate) fn record(op: Op) {
    let verifying = VERIFYING.with(Cell::get);
    TALLY.with(|t| {
        let mut t = t.borrow_mut();
        let bucket = if verifying { &mut t.verification } else { &mut t.protocol };
        match op {
            Op::Exp => bucket.exponentiations += 1,
            Op::Mul => bucket.multiplications += 1,
            Op::Pairing => bucket.pairings += 1,
            Op::Hash => bucket.hashes += 1,
        }
    });
}

/// Runs `f` and returns what it cost. Nested calls are supported: the outer
/// region still sees the inner region's operations.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, OpTally) {
    let outer = TALLY.with(|t| std::mem::take(&mut *t.borrow_mut()));
    let out = f();
    let inner = TALLY.with(|t| {
        let mut t = t.borrow_mut();
        let inner = *t;
        *t = outer;
        *t += inner;
        inner
    });
    (out, inner)
}

/// Attributes everything inside `f` to the verification bucket.
pub(crate) fn verifying<T>(f: impl FnOnce() -> T) -> T {
    let prev = VERIFYING.with(|v| v.replace(true));
    let out = f();
    VERIFYING.with(|v| v.set(prev));
    out
}
