//! Databases, the compression isometry, compressed oracles, and the
//! database-side lower-bound calculator.
//!
//! A database is a partial function table in (Y u {bot})^X: the positions
//! the algorithm could know anything about, with bot marking the rest. The
//! compression isometry maps each input-register position to a database
//! register by sending the Fourier-zero state to |bot> and keeping the
//! other Fourier states; under it the uniform input purification becomes
//! the empty database, and a t-query state occupies databases of size at
//! most t.
//!
//! Database codes are base-(M+1) integers with digit x holding D(x) and the
//! digit value M standing for bot, mirroring the base-M function codes of
//! the oracle module.

use crate::error::{Error, Result};
use crate::linalg::{c64, root_of_unity, spectral_norm, CMatrix, Isometry, C64};
use crate::oracle::{checked_pow, qft, ProblemSpec};
use crate::report::{BoundReport, StepRecord};

/// Default cap on the database-space dimension (M+1)^N.
pub const DB_DIM_CAP: usize = 1 << 11;

/// Iteration guard for analytic-mode bound searches.
const ANALYTIC_STEP_LIMIT: u64 = 10_000_000;

/// A partial function table; `None` is the bot symbol.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Database {
    slots: Vec<Option<usize>>,
}

impl Database {
    pub fn empty(n: usize) -> Database {
        Database {
            slots: vec![None; n],
        }
    }

    pub fn positions(&self) -> usize {
        self.slots.len()
    }

    /// Number of non-bot entries.
    pub fn size(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn get(&self, x: usize) -> Option<usize> {
        self.slots[x]
    }

    /// Union with a fresh pair; defined only where the slot is bot.
    pub fn with_entry(&self, x: usize, y: usize) -> Result<Database> {
        if self.slots[x].is_some() {
            return Err(Error::param(format!(
                "union requires D({x}) = bot, found an entry"
            )));
        }
        let mut next = self.clone();
        next.slots[x] = Some(y);
        Ok(next)
    }

    /// Removal of a pair; defined only where the slot holds exactly y.
    pub fn without_entry(&self, x: usize, y: usize) -> Result<Database> {
        if self.slots[x] != Some(y) {
            return Err(Error::param(format!(
                "removal requires D({x}) = {y}, found {:?}",
                self.slots[x]
            )));
        }
        let mut next = self.clone();
        next.slots[x] = None;
        Ok(next)
    }
}

/// Number of databases, (M+1)^N.
pub fn db_count(n: usize, m: usize) -> Result<usize> {
    checked_pow(m + 1, n)
}

/// Base-(M+1) code of a database; bot encodes as digit M.
pub fn db_index(d: &Database, m: usize) -> usize {
    let mut c = 0usize;
    for slot in d.slots.iter().rev() {
        c = c * (m + 1) + slot.unwrap_or(m);
    }
    c
}

/// Decode a database code.
pub fn db_from_index(idx: usize, n: usize, m: usize) -> Database {
    let mut slots = Vec::with_capacity(n);
    let mut c = idx;
    for _ in 0..n {
        let digit = c % (m + 1);
        slots.push(if digit == m { None } else { Some(digit) });
        c /= m + 1;
    }
    Database { slots }
}

/// Size of the database with the given code, without decoding.
pub fn db_size(idx: usize, n: usize, m: usize) -> usize {
    let mut c = idx;
    let mut s = 0;
    for _ in 0..n {
        if c % (m + 1) != m {
            s += 1;
        }
        c /= m + 1;
    }
    s
}

/// Ascending codes of all databases of size at most s.
pub fn dbs_at_most(n: usize, m: usize, s: usize) -> Result<Vec<usize>> {
    let total = db_count(n, m)?;
    Ok((0..total).filter(|&i| db_size(i, n, m) <= s).collect())
}

/// A k-tuple search property: a set of k-tuples over X x Y. A database
/// exhibits the property when it contains some tuple entrywise.
///
/// The theorem range k <= M - 1 is deliberately not enforced here; it
/// belongs to the bound calculator, and desk-scale instances (collision at
/// M = 2) are useful outside that range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    arity: usize,
    tuples: Vec<Vec<(usize, usize)>>,
}

impl Property {
    pub fn new(arity: usize, mut tuples: Vec<Vec<(usize, usize)>>, n: usize, m: usize) -> Result<Property> {
        if arity == 0 {
            return Err(Error::param("property arity must be at least 1"));
        }
        for t in &tuples {
            if t.len() != arity {
                return Err(Error::param(format!(
                    "tuple {t:?} has length {}, expected {arity}",
                    t.len()
                )));
            }
            for &(x, y) in t {
                if x >= n || y >= m {
                    return Err(Error::param(format!(
                        "tuple entry ({x},{y}) outside X x Y bounds ({n},{m})"
                    )));
                }
            }
        }
        tuples.sort();
        tuples.dedup();
        Ok(Property { arity, tuples })
    }

    /// Two positions sharing one value: tuples ((x1,y),(x2,y)), x1 < x2.
    pub fn collision(n: usize, m: usize) -> Result<Property> {
        if n < 2 {
            return Err(Error::param("collision needs at least two positions"));
        }
        let mut tuples = Vec::new();
        for x1 in 0..n {
            for x2 in x1 + 1..n {
                for y in 0..m {
                    tuples.push(vec![(x1, y), (x2, y)]);
                }
            }
        }
        Property::new(2, tuples, n, m)
    }

    /// k distinct positions all mapping to zero.
    pub fn preimage(n: usize, m: usize, k: usize) -> Result<Property> {
        if k == 0 || k > n {
            return Err(Error::param("preimage arity must lie in 1..=N"));
        }
        let mut tuples = Vec::new();
        let mut idx = vec![0usize; k];
        // Ascending k-subsets of positions.
        fn subsets(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if left == 0 {
                out.push(cur.clone());
                return;
            }
            for x in start..=n.saturating_sub(left) {
                cur.push(x);
                subsets(x + 1, n, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut sets = Vec::new();
        idx.clear();
        subsets(0, n, k, &mut idx, &mut sets);
        for set in sets {
            tuples.push(set.into_iter().map(|x| (x, 0)).collect());
        }
        Property::new(k, tuples, n, m)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tuples(&self) -> &[Vec<(usize, usize)>] {
        &self.tuples
    }

    /// D exhibits the property iff some tuple is contained in D.
    pub fn matches(&self, d: &Database) -> bool {
        self.tuples
            .iter()
            .any(|t| t.iter().all(|&(x, y)| d.get(x) == Some(y)))
    }
}

/// The per-position compression map, (M+1) x M: sends the Fourier-zero
/// state to |bot> and fixes every other Fourier state.
fn comp_position(m: usize) -> Result<CMatrix> {
    let q = qft(m)?;
    let mut c = CMatrix::zeros(m + 1, m);
    for y in 0..m {
        // <0-hat | y> lands on bot.
        c.set(m, y, q.get(y, 0).conj());
        for z in 1..m {
            let bra = q.get(y, z).conj();
            for r in 0..m {
                let cur = c.get(r, y);
                c.set(r, y, cur + q.get(r, z) * bra);
            }
        }
    }
    Ok(c)
}

/// The full compression isometry C[Y^X] -> C[(Y u {bot})^X], the tensor
/// power of the per-position map.
pub fn comp_isometry(spec: &ProblemSpec) -> Result<CMatrix> {
    comp_isometry_with_cap(spec, DB_DIM_CAP)
}

pub fn comp_isometry_with_cap(spec: &ProblemSpec, cap: usize) -> Result<CMatrix> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let dim = db_count(n, m)?;
    if dim > cap {
        return Err(Error::size(format!(
            "database dimension {dim} exceeds cap {cap}"
        )));
    }
    let c = comp_position(m)?;
    let factors = vec![c; n];
    crate::linalg::kron_all(&factors)
}

/// Per-position factors of the compressed oracle at (x, y): the position
/// being queried carries the phase-conjugated factor, every other position
/// the image projector. Both are (M+1)-square.
fn register_factors(spec: &ProblemSpec, x: usize, y: usize) -> Result<(CMatrix, CMatrix)> {
    let m = spec.n_outputs();
    if x >= spec.n_inputs() || y >= m {
        return Err(Error::param("query index or value out of range"));
    }
    let c = comp_position(m)?;
    let g = c.mul(&c.dagger());
    let phases: Vec<C64> = (0..m).map(|f| root_of_unity(-((y * f) as i64), m)).collect();
    let mut cp = CMatrix::zeros(m + 1, m);
    for col in 0..m {
        for row in 0..m + 1 {
            cp.set(row, col, c.get(row, col) * phases[col]);
        }
    }
    let f = cp.mul(&c.dagger());
    Ok((f, g))
}

/// The compressed oracle cO_{x,y} = Comp O_{x,y} Comp^dagger, materialized
/// on the whole database space and identically zero off the image of Comp.
pub fn compressed_oracle(spec: &ProblemSpec, x: usize, y: usize) -> Result<CMatrix> {
    compressed_oracle_with_cap(spec, x, y, DB_DIM_CAP)
}

pub fn compressed_oracle_with_cap(
    spec: &ProblemSpec,
    x: usize,
    y: usize,
    cap: usize,
) -> Result<CMatrix> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let dim = db_count(n, m)?;
    if dim > cap {
        return Err(Error::size(format!(
            "database dimension {dim} exceeds cap {cap}"
        )));
    }
    let (f, g) = register_factors(spec, x, y)?;
    let factors: Vec<CMatrix> = (0..n)
        .rev()
        .map(|pos| if pos == x { f.clone() } else { g.clone() })
        .collect();
    crate::linalg::kron_all(&factors)
}

/// All databases exhibiting the property, ascending by code.
pub fn property_databases(spec: &ProblemSpec, p: &Property) -> Result<Vec<Database>> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let total = db_count(n, m)?;
    Ok((0..total)
        .map(|i| db_from_index(i, n, m))
        .filter(|d| p.matches(d))
        .collect())
}

/// Diagonal projector onto the listed database states, as the isometry of
/// its range.
pub fn db_projector(dbs: &[Database], spec: &ProblemSpec) -> Result<Isometry> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let dim = db_count(n, m)?;
    let mut indices: Vec<usize> = dbs.iter().map(|d| db_index(d, m)).collect();
    indices.sort_unstable();
    indices.dedup();
    let cols: Vec<Vec<C64>> = indices
        .iter()
        .map(|&i| {
            let mut e = vec![c64(0.0, 0.0); dim];
            e[i] = c64(1.0, 0.0);
            e
        })
        .collect();
    Isometry::from_matrix(CMatrix::from_columns(dim, &cols))
}

/// A sandwiched step norm together with the (x, y) attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepNorm {
    pub value: f64,
    pub argmax: (usize, usize),
}

/// max_{x,y} || P_{D<=t cap D_P} cO_{x,y} P_{D<=t-1 minus D_P} ||.
///
/// Sizes above N clamp to N (databases cannot exceed N entries). Ties on
/// the max resolve to the lexicographically smallest (x, y). The sandwich
/// is evaluated entrywise from the per-position factors, so the full
/// database-space operator is never materialized.
pub fn comp_step_norm(spec: &ProblemSpec, p: &Property, t: usize) -> Result<StepNorm> {
    if t == 0 {
        return Err(Error::param("step index t must be at least 1"));
    }
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let total = db_count(n, m)?;
    let hi = t.min(n);
    let lo = (t - 1).min(n);

    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for i in 0..total {
        let d = db_from_index(i, n, m);
        let matches = p.matches(&d);
        if d.size() <= hi && matches {
            rows.push(i);
        }
        if d.size() <= lo && !matches {
            cols.push(i);
        }
    }
    if rows.is_empty() || cols.is_empty() {
        return Ok(StepNorm {
            value: 0.0,
            argmax: (0, 0),
        });
    }

    let digits = |idx: usize| -> Vec<usize> {
        let mut c = idx;
        (0..n)
            .map(|_| {
                let d = c % (m + 1);
                c /= m + 1;
                d
            })
            .collect()
    };
    let row_digits: Vec<Vec<usize>> = rows.iter().map(|&i| digits(i)).collect();
    let col_digits: Vec<Vec<usize>> = cols.iter().map(|&i| digits(i)).collect();

    let mut best = StepNorm {
        value: 0.0,
        argmax: (0, 0),
    };
    let mut first = true;
    for x in 0..n {
        for y in 0..m {
            let (f, g) = register_factors(spec, x, y)?;
            let mut s = CMatrix::zeros(rows.len(), cols.len());
            for (r, rd) in row_digits.iter().enumerate() {
                for (c, cd) in col_digits.iter().enumerate() {
                    let mut prod = c64(1.0, 0.0);
                    for pos in 0..n {
                        let factor = if pos == x { &f } else { &g };
                        prod *= factor.get(rd[pos], cd[pos]);
                        if prod.norm_sqr() == 0.0 {
                            break;
                        }
                    }
                    s.set(r, c, prod);
                }
            }
            let value = spectral_norm(&s);
            if first || value > best.value {
                best = StepNorm {
                    value,
                    argmax: (x, y),
                };
                first = false;
            }
        }
    }
    Ok(best)
}

/// How the per-step norms of [`comp_lower_bound`] are obtained.
pub enum StepMode<'a> {
    /// Compute each step with [`comp_step_norm`], using the plateau rule
    /// beyond t = N.
    Numeric,
    /// Use a supplied per-step bound, e.g. a closed form.
    Analytic(&'a dyn Fn(u64) -> f64),
}

/// Smallest T whose accumulated step norms reach sqrt(1-eps) - sqrt(k/M).
///
/// Requires eps in (0, 1 - k/M); for k >= M that interval is empty and
/// every eps is rejected. Numeric mode computes steps up to t = N + 1 and
/// then extends the constant plateau arithmetically; if the plateau step is
/// zero the bound is reported as unbounded.
pub fn comp_lower_bound(
    spec: &ProblemSpec,
    p: &Property,
    eps: f64,
    mode: StepMode,
) -> Result<BoundReport> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let k = p.arity();
    let ratio = k as f64 / m as f64;
    if !(eps > 0.0 && eps < 1.0 - ratio) {
        return Err(Error::param(format!(
            "eps must lie in (0, 1 - k/M); got eps = {eps} with k = {k}, M = {m}"
        )));
    }
    let target = (1.0 - eps).sqrt() - ratio.sqrt();

    let mut report = BoundReport::new("COMP", format!("property-arity-{k}"));
    report.target = Some(target);
    report.set_param("n", n as u64);
    report.set_param("m", m as u64);
    report.set_param("k", k as u64);
    report.set_param("eps", eps);

    let mut cumulative = 0.0;
    match mode {
        StepMode::Numeric => {
            report.set_param("mode", "numeric");
            for t in 1..=(n as u64 + 1) {
                let step = comp_step_norm(spec, p, t as usize)?;
                cumulative += step.value;
                report.per_step.push(StepRecord {
                    t,
                    value: step.value,
                    cumulative,
                    argmax_x: Some(step.argmax.0),
                    argmax_y: Some(step.argmax.1),
                });
                if cumulative >= target {
                    report.t = Some(t);
                    return Ok(report);
                }
            }
            // Constant plateau from t = N + 1 on.
            let plateau = report.per_step.last().expect("looped at least once").value;
            if plateau <= 1e-12 {
                report.unbounded = true;
                return Ok(report);
            }
            let deficit = target - cumulative;
            let extra = (deficit / plateau).ceil().max(1.0) as u64;
            report.set_param("plateau_step", plateau);
            report.t = Some(n as u64 + 1 + extra);
            Ok(report)
        }
        StepMode::Analytic(step_fn) => {
            report.set_param("mode", "analytic");
            for t in 1..=ANALYTIC_STEP_LIMIT {
                let value = step_fn(t);
                cumulative += value;
                if report.per_step.len() < 10_000 {
                    report.per_step.push(StepRecord {
                        t,
                        value,
                        cumulative,
                        argmax_x: None,
                        argmax_y: None,
                    });
                }
                if cumulative >= target {
                    report.t = Some(t);
                    return Ok(report);
                }
            }
            Err(Error::Numerical(format!(
                "analytic step sum did not reach {target} within {ANALYTIC_STEP_LIMIT} steps"
            )))
        }
    }
}
