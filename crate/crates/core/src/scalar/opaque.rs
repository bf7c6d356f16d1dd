//! Opaque matrix-valued callbacks with a shared per-point evaluation
//! cache.
//!
//! Some coefficient matrices have no closed expression tree (pointwise
//! matrix inverses, most prominently).  They are represented as a matrix
//! of opaque scalars that share one callback: the callback is invoked once
//! per distinct point and the resulting matrix memoized, so reading all
//! `dim^2` entries costs a single evaluation.  Entries support affine
//! argument rebinding (composed into the stored binding) but not
//! differentiation.

use super::{Point, ScalarExpr, VarId};
use crate::error::{Error, Result};
use crate::C64;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};
use ndarray::Array2;

type EvalFn = alloc::boxed::Box<dyn Fn(&Point) -> Result<Vec<C64>> + Send + Sync>;

/// One shared callback producing a `dim x dim` complex matrix per point.
pub struct OpaqueTable {
    label: String,
    dim: usize,
    vars: Vec<VarId>,
    eval: EvalFn,
    cache: spin::Mutex<BTreeMap<Vec<(u64, u64)>, Arc<Vec<C64>>>>,
    calls: AtomicUsize,
}

impl core::fmt::Debug for OpaqueTable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "OpaqueTable({}, dim={})", self.label, self.dim)
    }
}

impl OpaqueTable {
    pub fn new(
        label: &str,
        dim: usize,
        vars: Vec<VarId>,
        eval: impl Fn(&Point) -> Result<Vec<C64>> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self {
            label: label.into(),
            dim,
            vars,
            eval: alloc::boxed::Box::new(eval),
            cache: spin::Mutex::new(BTreeMap::new()),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of times the callback has actually run (cache misses).
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn evaluate(&self, bound: &Point) -> Result<Arc<Vec<C64>>> {
        let key: Vec<(u64, u64)> = self
            .vars
            .iter()
            .map(|&v| {
                let c = bound.get(v).unwrap_or(C64::new(0.0, 0.0));
                (c.re.to_bits(), c.im.to_bits())
            })
            .collect();
        // Hold the lock across the callback so concurrent readers of the
        // same point trigger a single flight.
        let mut cache = self.cache.lock();
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let vals = (self.eval)(bound)?;
        if vals.len() != self.dim * self.dim {
            return Err(Error::Dimension(alloc::format!(
                "opaque callback {} returned {} values, expected {}",
                self.label,
                vals.len(),
                self.dim * self.dim
            )));
        }
        let vals = Arc::new(vals);
        cache.insert(key, vals.clone());
        Ok(vals)
    }
}

/// Affine rebinding of one callback variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bind {
    /// Callback variable takes the value `mul * point[src] + add`.
    Affine { src: VarId, mul: C64, add: C64 },
    /// Callback variable pinned to a constant.
    Fixed(C64),
}

impl Bind {
    fn identity(v: VarId) -> Self {
        Bind::Affine { src: v, mul: C64::new(1.0, 0.0), add: C64::new(0.0, 0.0) }
    }
}

/// One entry of an opaque matrix: callback handle, entry index and the
/// affine map applied to the point before lookup.
#[derive(Debug, Clone)]
pub struct OpaqueRef {
    table: Arc<OpaqueTable>,
    index: usize,
    binding: Vec<Bind>, // parallel to table.vars
}

impl OpaqueRef {
    pub fn table(&self) -> &Arc<OpaqueTable> {
        &self.table
    }

    /// Variables of the surrounding expression this entry reads.
    pub fn source_vars(&self) -> Vec<VarId> {
        self.binding
            .iter()
            .filter_map(|b| match b {
                Bind::Affine { src, .. } => Some(*src),
                Bind::Fixed(_) => None,
            })
            .collect()
    }

    pub(super) fn eval(&self, point: &Point) -> Result<C64> {
        let mut bound = Point::new();
        for (slot, b) in self.table.vars.iter().zip(&self.binding) {
            let val = match *b {
                Bind::Affine { src, mul, add } => {
                    mul * point.get(src).ok_or_else(|| super::unassigned(src))? + add
                }
                Bind::Fixed(c) => c,
            };
            bound.insert(*slot, val);
        }
        Ok(self.table.evaluate(&bound)?[self.index])
    }

    /// Always `false` for matrix callbacks; kept so the capability error
    /// message can distinguish the two cases.
    pub fn differentiable(&self) -> bool {
        false
    }

    /// Compose a substitution into the binding.  Succeeds exactly when the
    /// replacement of every bound variable is affine (shift, rescale,
    /// renaming, or a constant).
    pub(super) fn rebind(&self, repl: &dyn Fn(VarId) -> Option<ScalarExpr>) -> Result<Self> {
        let mut binding = self.binding.clone();
        for b in binding.iter_mut() {
            if let Bind::Affine { src, mul, add } = *b {
                if let Some(r) = repl(src) {
                    let (src2, m2, a2) = as_affine(&r).ok_or_else(|| {
                        Error::Capability(
                            "non-affine substitution into an opaque node".into(),
                        )
                    })?;
                    *b = match src2 {
                        Some(s) => Bind::Affine { src: s, mul: mul * m2, add: mul * a2 + add },
                        None => Bind::Fixed(mul * a2 + add),
                    };
                }
            }
        }
        Ok(Self { table: self.table.clone(), index: self.index, binding })
    }
}

/// Recognize `c`, `x`, `x + c`, `c * x`, `c * x + d` shapes.
fn as_affine(e: &ScalarExpr) -> Option<(Option<VarId>, C64, C64)> {
    use super::Expr;
    match e.node() {
        Expr::Const(c) => Some((None, C64::new(0.0, 0.0), *c)),
        Expr::Var(v) => Some((Some(*v), C64::new(1.0, 0.0), C64::new(0.0, 0.0))),
        Expr::Neg(x) => {
            let (v, m, a) = as_affine(x)?;
            Some((v, -m, -a))
        }
        Expr::Sum(xs) => {
            let mut var: Option<VarId> = None;
            let mut mul = C64::new(0.0, 0.0);
            let mut add = C64::new(0.0, 0.0);
            for x in xs {
                let (v, m, a) = as_affine(x)?;
                add += a;
                if let Some(v) = v {
                    if var.is_some() && var != Some(v) {
                        return None;
                    }
                    var = Some(v);
                    mul += m;
                }
            }
            Some((var, mul, add))
        }
        Expr::Prod(xs) => {
            let mut var: Option<VarId> = None;
            let mut mul = C64::new(1.0, 0.0);
            for x in xs {
                let (v, m, a) = as_affine(x)?;
                match v {
                    None => mul *= a,
                    Some(v2) => {
                        if var.is_some() || a != C64::new(0.0, 0.0) {
                            return None;
                        }
                        var = Some(v2);
                        mul *= m;
                    }
                }
            }
            match var {
                Some(v) => Some((Some(v), mul, C64::new(0.0, 0.0))),
                None => Some((None, C64::new(0.0, 0.0), mul)),
            }
        }
        _ => None,
    }
}

/// A `dim x dim` matrix of opaque scalars sharing one cached joint
/// evaluation.  `vars` is the variable set the callback consumes; the
/// returned handle exposes the invocation counter.
pub fn opaque_matrix_fn(
    label: &str,
    dim: usize,
    vars: Vec<VarId>,
    evaluator: impl Fn(&Point) -> Result<Vec<C64>> + Send + Sync + 'static,
) -> Result<(Array2<ScalarExpr>, Arc<OpaqueTable>)> {
    if dim == 0 {
        return Err(Error::Construction("opaque matrix dim must be >= 1".into()));
    }
    let table = OpaqueTable::new(label, dim, vars, evaluator);
    let binding: Vec<Bind> = table.vars.iter().map(|&v| Bind::identity(v)).collect();
    let mat = Array2::from_shape_fn((dim, dim), |(i, j)| {
        ScalarExpr::from_opaque(OpaqueRef {
            table: table.clone(),
            index: i * dim + j,
            binding: binding.clone(),
        })
    });
    Ok((mat, table))
}
