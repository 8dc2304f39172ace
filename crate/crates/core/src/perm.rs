//! Inverting a uniformly random permutation: the constrained-superposition
//! chains A_t and B_t, the hat projectors assembled from their orthogonal
//! increments, the two-rung adversary matrix over the permutation space,
//! and the closing success bound.
//!
//! Everything here lives in C[Perm], coordinates indexed by Lehmer rank
//! (lexicographic one-line order). Oracle phases come from the restricted
//! diagonal of the shared oracle machinery, reordered into that indexing.

use crate::error::{Error, Result};
use crate::ladder::{MlaMatrix, SPACE_DIM_CAP};
use crate::linalg::{c64, span_isometry_in, spectral_norm, vec_inner, CMatrix, Isometry, C64};
use crate::oracle::{func_code, phase_diag_restricted, ProblemSpec};
use crate::report::{BoundReport, CheckRecord, SuiteReport};

/// The class of all N! bijections on {0..N-1} with the inversion target
/// F(f) = f^{-1}(0), wrapped around a problem spec whose function filter
/// keeps exactly the permutations.
pub struct PermSpec {
    n: usize,
    perms: Vec<Vec<usize>>,
    problem: ProblemSpec,
    func_pos: Vec<usize>,
}

impl PermSpec {
    pub fn new(n: usize) -> Result<PermSpec> {
        if n == 0 {
            return Err(Error::param("need at least one element to permute"));
        }
        if n > 6 {
            return Err(Error::size(format!(
                "permutation space needs N at most 6; got N = {n}"
            )));
        }
        let mut perms = Vec::new();
        let mut current = Vec::new();
        let mut used = vec![false; n];
        enumerate_perms(n, &mut current, &mut used, &mut perms);
        let problem = ProblemSpec::new(
            n,
            n,
            n,
            |table| {
                let mut seen = vec![false; table.len()];
                table.iter().all(|&v| !std::mem::replace(&mut seen[v], true))
            },
            |table| vec![table.iter().position(|&v| v == 0).expect("permutation")],
        )?;
        let func_pos = perms
            .iter()
            .map(|p| {
                let code = func_code(p, n);
                problem
                    .funcs()
                    .binary_search(&code)
                    .expect("permutation code is in Func")
            })
            .collect();
        Ok(PermSpec {
            n,
            perms,
            problem,
            func_pos,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// N!, the dimension of C[Perm].
    pub fn count(&self) -> usize {
        self.perms.len()
    }

    /// All permutations in Lehmer-rank order.
    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    /// One-line notation, e.g. "[2 0 1]".
    pub fn one_line(&self, idx: usize) -> String {
        let body = self.perms[idx]
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        format!("[{body}]")
    }

    /// Diagonal of the phase oracle for query (x, y) over C[Perm], in
    /// Lehmer order.
    pub fn phase_diag(&self, x: usize, y: usize) -> Result<Vec<C64>> {
        let restricted = phase_diag_restricted(&self.problem, x, y)?;
        Ok(self.func_pos.iter().map(|&p| restricted[p]).collect())
    }
}

fn enumerate_perms(n: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if current.len() == n {
        out.push(current.clone());
        return;
    }
    for v in 0..n {
        if !used[v] {
            used[v] = true;
            current.push(v);
            enumerate_perms(n, current, used, out);
            current.pop();
            used[v] = false;
        }
    }
}

/// Uniform superposition over the permutations satisfying f(xs[i]) = ys[i],
/// normalized by 1/sqrt((N-t)!). Absent when the constraints repeat a
/// position or a value, or point outside the domain.
pub fn perm_v_state(spec: &PermSpec, xs: &[usize], ys: &[usize]) -> Option<Vec<C64>> {
    let n = spec.n();
    if xs.len() != ys.len() || xs.len() > n {
        return None;
    }
    let mut seen_x = vec![false; n];
    let mut seen_y = vec![false; n];
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= n || y >= n {
            return None;
        }
        if std::mem::replace(&mut seen_x[x], true) || std::mem::replace(&mut seen_y[y], true) {
            return None;
        }
    }
    let t = xs.len();
    let mut remaining = n - t;
    let mut coeff = 1.0f64;
    while remaining > 1 {
        coeff *= remaining as f64;
        remaining -= 1;
    }
    let amp = 1.0 / coeff.sqrt();
    let vec = spec
        .permutations()
        .iter()
        .map(|p| {
            if xs.iter().zip(ys).all(|(&x, &y)| p[x] == y) {
                c64(amp, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
        .collect();
    Some(vec)
}

/// The constraint chains of the permutation argument: A_t spans the
/// t-constraint superpositions, B_t those that pin a preimage of zero, and
/// the hat spaces stack the orthogonal increments B_i minus A_{i-1}
/// (captured side) and A_i minus B_i (free side, on top of A_0).
pub struct PermChains {
    /// A_0 .. A_N.
    pub a_chain: Vec<Isometry>,
    /// B_1 .. B_N, index t-1.
    pub b_chain: Vec<Isometry>,
    /// Captured ladder at t = 0..N; level 0 is empty.
    pub hat_high: Vec<Isometry>,
    /// Free ladder at t = 0..N; level 0 is A_0.
    pub hat_low: Vec<Isometry>,
}

impl PermChains {
    pub fn dim(&self) -> usize {
        self.a_chain[0].ambient_dim()
    }

    pub fn levels(&self) -> usize {
        self.a_chain.len() - 1
    }
}

// Double-pass Gram-Schmidt absorption, mirroring the space-chain builder.
fn absorb(basis: &mut Vec<Vec<C64>>, v: &[C64], tol: f64) {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis.iter() {
            let overlap = vec_inner(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= overlap * bi;
            }
        }
    }
    let norm: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > tol {
        for wi in w.iter_mut() {
            *wi /= c64(norm, 0.0);
        }
        basis.push(w);
    }
}

fn sorted_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Injective value tuples of length k drawn from `values`, lexicographic.
fn injective_tuples(values: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(values: &[usize], k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for &v in values {
            if !cur.contains(&v) {
                cur.push(v);
                rec(values, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(values, k, &mut cur, &mut out);
    out
}

const CHAIN_TOL: f64 = 1e-9;

fn a_level_states(spec: &PermSpec, t: usize) -> Vec<Vec<C64>> {
    let n = spec.n();
    let values: Vec<usize> = (0..n).collect();
    let mut states = Vec::new();
    for xs in sorted_subsets(n, t) {
        for ys in injective_tuples(&values, t) {
            if let Some(v) = perm_v_state(spec, &xs, &ys) {
                states.push(v);
            }
        }
    }
    states
}

/// B_t generator as written: the zero constraint occupies the first slot,
/// the other t-1 constraints range over the remaining positions and the
/// nonzero values.
fn b_level_states_first_slot(spec: &PermSpec, t: usize) -> Vec<Vec<C64>> {
    let n = spec.n();
    let nonzero: Vec<usize> = (1..n).collect();
    let mut states = Vec::new();
    for x1 in 0..n {
        let rest_positions: Vec<usize> = (0..n).filter(|&x| x != x1).collect();
        for rest in sorted_subsets(rest_positions.len(), t - 1) {
            let xs: Vec<usize> = std::iter::once(x1)
                .chain(rest.iter().map(|&i| rest_positions[i]))
                .collect();
            for ys_rest in injective_tuples(&nonzero, t - 1) {
                let ys: Vec<usize> = std::iter::once(0).chain(ys_rest.iter().copied()).collect();
                if let Some(v) = perm_v_state(spec, &xs, &ys) {
                    states.push(v);
                }
            }
        }
    }
    states
}

/// B_t generator that lets the zero constraint sit anywhere in the tuple.
fn b_level_states_any_slot(spec: &PermSpec, t: usize) -> Vec<Vec<C64>> {
    let n = spec.n();
    let values: Vec<usize> = (0..n).collect();
    let mut states = Vec::new();
    for xs in sorted_subsets(n, t) {
        for ys in injective_tuples(&values, t) {
            if ys.contains(&0) {
                if let Some(v) = perm_v_state(spec, &xs, &ys) {
                    states.push(v);
                }
            }
        }
    }
    states
}

fn span_of(dim: usize, seed: &[Vec<C64>], states: &[Vec<C64>]) -> Result<Isometry> {
    let mut basis: Vec<Vec<C64>> = seed.to_vec();
    for v in states {
        if basis.len() == dim {
            break;
        }
        absorb(&mut basis, v, CHAIN_TOL);
    }
    Isometry::from_matrix(CMatrix::from_columns(dim, &basis))
}

fn iso_columns(iso: &Isometry) -> Vec<Vec<C64>> {
    (0..iso.rank()).map(|c| iso.basis().col(c)).collect()
}

/// Columns of `of` projected off `minus`, for building B_i minus A_{i-1}
/// and A_i minus B_i. Sound as a space difference because the subtracted
/// space is contained in the other.
fn increment_columns(of: &Isometry, minus: &Isometry) -> Vec<Vec<C64>> {
    let mut cols = Vec::new();
    for c in 0..of.rank() {
        let mut v = of.basis().col(c);
        let coords = minus.coords(&v);
        let mb = minus.basis();
        for r in 0..v.len() {
            let mut acc = c64(0.0, 0.0);
            for (k, ck) in coords.iter().enumerate() {
                acc += mb.get(r, k) * ck;
            }
            v[r] -= acc;
        }
        cols.push(v);
    }
    cols
}

/// Build the A and B chains and both hat ladders.
pub fn perm_chains(spec: &PermSpec) -> Result<PermChains> {
    let n = spec.n();
    let dim = spec.count();

    let mut a_chain: Vec<Isometry> = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let seed = if t == 0 {
            Vec::new()
        } else {
            iso_columns(&a_chain[t - 1])
        };
        a_chain.push(span_of(dim, &seed, &a_level_states(spec, t))?);
    }

    let mut b_chain: Vec<Isometry> = Vec::with_capacity(n);
    for t in 1..=n {
        b_chain.push(span_of(dim, &[], &b_level_states_first_slot(spec, t))?);
    }

    let mut high_blocks: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n);
    let mut low_blocks: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n);
    for i in 1..=n {
        let high = increment_columns(&b_chain[i - 1], &a_chain[i - 1]);
        let low = increment_columns(&a_chain[i], &b_chain[i - 1]);
        high_blocks.push(high);
        low_blocks.push(low);
    }

    let mut hat_high: Vec<Isometry> = Vec::with_capacity(n + 1);
    let mut hat_low: Vec<Isometry> = Vec::with_capacity(n + 1);
    hat_high.push(Isometry::empty(dim));
    hat_low.push(a_chain[0].clone());
    let mut high_cols: Vec<Vec<C64>> = Vec::new();
    let mut low_cols: Vec<Vec<C64>> = iso_columns(&a_chain[0]);
    for i in 1..=n {
        high_cols.extend(high_blocks[i - 1].iter().cloned());
        low_cols.extend(low_blocks[i - 1].iter().cloned());
        hat_high.push(span_isometry_in(dim, &high_cols, CHAIN_TOL)?);
        hat_low.push(span_isometry_in(dim, &low_cols, CHAIN_TOL)?);
    }

    Ok(PermChains {
        a_chain,
        b_chain,
        hat_high,
        hat_low,
    })
}

/// Worst-case distance between the two B_t generation orders, as a
/// projector difference.
pub fn b_generator_defect(spec: &PermSpec, t: usize) -> Result<f64> {
    if t == 0 || t > spec.n() {
        return Err(Error::param(format!(
            "B_t is defined for t in 1..=N; got t = {t} with N = {}",
            spec.n()
        )));
    }
    let dim = spec.count();
    let first = span_of(dim, &[], &b_level_states_first_slot(spec, t))?;
    let any = span_of(dim, &[], &b_level_states_any_slot(spec, t))?;
    Ok(spectral_norm(&first.projector().sub(&any.projector())))
}

/// ||(I - Q) P|| for projector dominance P inside Q, computed on P's basis.
fn dominance_defect(inner: &Isometry, outer: &Isometry) -> f64 {
    if inner.rank() == 0 {
        return 0.0;
    }
    let cols = increment_columns(inner, outer);
    spectral_norm(&CMatrix::from_columns(inner.ambient_dim(), &cols))
}

/// The nesting A_{t-1} inside B_t inside A_t, as projector dominance.
pub fn check_subset_chain(chains: &PermChains) -> SuiteReport {
    let n = chains.levels();
    let mut prev_in_b = 0.0f64;
    let mut b_in_a = 0.0f64;
    for t in 1..=n {
        prev_in_b = prev_in_b.max(dominance_defect(&chains.a_chain[t - 1], &chains.b_chain[t - 1]));
        b_in_a = b_in_a.max(dominance_defect(&chains.b_chain[t - 1], &chains.a_chain[t]));
    }
    let checks = vec![
        CheckRecord::new("previous-level-inside-captured-span", prev_in_b, 1e-10),
        CheckRecord::new("captured-span-inside-level", b_in_a, 1e-10),
    ];
    SuiteReport::from_checks("perm-subset-chain", checks)
}

/// The two-rung adversary matrix: the captured space at full depth gets
/// kappa, its complement stays at one. The uniform state sits in A_0 and
/// is fixed.
pub fn perm_mla_with(chains: &PermChains, kappa: f64) -> Result<MlaMatrix> {
    let top = chains.hat_high[chains.levels()].clone();
    let low = top.complement();
    MlaMatrix::new(kappa, vec![low, top])
}

pub fn perm_mla(spec: &PermSpec, kappa: f64) -> Result<MlaMatrix> {
    let chains = perm_chains(spec)?;
    perm_mla_with(&chains, kappa)
}

/// Re-express a C[Perm] ladder in the full function space so the general
/// ladder validator can run against the uniform-permutation space chain.
/// The complement rung absorbs everything outside the permutation support.
pub fn perm_mla_embedded(spec: &PermSpec, kappa: f64) -> Result<MlaMatrix> {
    let fdim = spec.problem().func_dim();
    if fdim > SPACE_DIM_CAP {
        return Err(Error::size(format!(
            "function-space dimension {fdim} exceeds cap {SPACE_DIM_CAP}"
        )));
    }
    let chains = perm_chains(spec)?;
    let top = &chains.hat_high[chains.levels()];
    let codes: Vec<usize> = spec
        .permutations()
        .iter()
        .map(|p| func_code(p, spec.n()))
        .collect();
    let cols: Vec<Vec<C64>> = (0..top.rank())
        .map(|c| {
            let small = top.basis().col(c);
            let mut big = vec![c64(0.0, 0.0); fdim];
            for (i, &code) in codes.iter().enumerate() {
                big[code] = small[i];
            }
            big
        })
        .collect();
    let top_full = Isometry::from_matrix(CMatrix::from_columns(fdim, &cols))?;
    let low_full = top_full.complement();
    MlaMatrix::new(kappa, vec![low_full, top_full])
}

/// The projector identities tying the adversary split to the hat ladders:
/// Lambda_1 P_{<=t} = hat_{1,t} and P_{<=t} Lambda_0 = hat_{0,t} at every
/// level, 1e-9.
pub fn check_perm_proj_with(chains: &PermChains) -> SuiteReport {
    let n = chains.levels();
    let dim = chains.dim();
    let lam1 = chains.hat_high[n].projector();
    let lam0 = CMatrix::identity(dim).sub(&lam1);
    let mut worst_high = 0.0f64;
    let mut worst_low = 0.0f64;
    for t in 0..=n {
        let p_le = chains.a_chain[t].projector();
        worst_high = worst_high.max(spectral_norm(
            &lam1.mul(&p_le).sub(&chains.hat_high[t].projector()),
        ));
        worst_low = worst_low.max(spectral_norm(
            &p_le.mul(&lam0).sub(&chains.hat_low[t].projector()),
        ));
    }
    let checks = vec![
        CheckRecord::new("captured-rung-matches-hat", worst_high, 1e-9),
        CheckRecord::new("free-rung-matches-hat", worst_low, 1e-9),
    ];
    SuiteReport::from_checks("perm-proj", checks)
}

pub fn check_perm_proj(spec: &PermSpec) -> Result<SuiteReport> {
    let chains = perm_chains(spec)?;
    Ok(check_perm_proj_with(&chains))
}

/// max over (x, y) of the sandwiched query norm between the captured hat
/// at depth t and the free hat at depth t-1.
pub fn perm_step_norm_with(spec: &PermSpec, chains: &PermChains, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::param("step norm needs t at least 1"));
    }
    let high = &chains.hat_high[t.min(chains.levels())];
    let low = &chains.hat_low[(t - 1).min(chains.levels())];
    if high.rank() == 0 || low.rank() == 0 {
        return Ok(0.0);
    }
    let n = spec.n();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let diag = spec.phase_diag(x, y)?;
            let mut twisted = low.basis().clone();
            for r in 0..twisted.rows {
                for c in 0..twisted.cols {
                    let v = twisted.get(r, c) * diag[r];
                    twisted.set(r, c, v);
                }
            }
            let m = high.basis().dagger().mul(&twisted);
            worst = worst.max(spectral_norm(&m));
        }
    }
    Ok(worst)
}

pub fn perm_step_norm(spec: &PermSpec, t: usize) -> Result<f64> {
    let chains = perm_chains(spec)?;
    perm_step_norm_with(spec, &chains, t)
}

/// The cited per-step ceiling min(1, 2 sqrt 2 / sqrt(N - 4t)), absent when
/// N <= 4t leaves it vacuous.
pub fn perm_step_bound(n: usize, t: usize) -> Option<f64> {
    if n > 4 * t {
        Some((2.0 * 2.0f64.sqrt() / ((n - 4 * t) as f64).sqrt()).min(1.0))
    } else {
        None
    }
}

/// Overlap of the depth-T free ladder with each inversion answer: the
/// squared support of any fixed preimage-of-zero event inside hat_{0,T}
/// stays within 1/sqrt(N - 2T).
pub fn perm_eta_with(spec: &PermSpec, chains: &PermChains, big_t: usize) -> Result<SuiteReport> {
    let n = spec.n();
    if n <= 2 * big_t {
        return Err(Error::param(format!(
            "N must exceed 2T; got N = {n} with T = {big_t}"
        )));
    }
    let v0 = &chains.hat_low[big_t.min(chains.levels())];
    let fact_nm1: usize = (1..n).product();
    let mut worst = 0.0f64;
    let mut rank_dev = 0usize;
    for z in 0..n {
        let rows: Vec<usize> = spec
            .permutations()
            .iter()
            .enumerate()
            .filter(|(_, p)| p[z] == 0)
            .map(|(i, _)| i)
            .collect();
        rank_dev = rank_dev.max(rows.len().abs_diff(fact_nm1));
        let mut sub = CMatrix::zeros(rows.len(), v0.rank());
        for (r, &row) in rows.iter().enumerate() {
            for c in 0..v0.rank() {
                sub.set(r, c, v0.basis().get(row, c));
            }
        }
        worst = worst.max(spectral_norm(&sub));
    }
    let bound = 1.0 / ((n - 2 * big_t) as f64).sqrt();
    let checks = vec![
        CheckRecord::new(
            "inverse-overlap-within-bound",
            (worst - bound).max(0.0),
            1e-9,
        )
        .with_note(format!("max overlap {worst:.9}, bound {bound:.9}")),
        CheckRecord::new("preimage-event-rank", rank_dev as f64, 0.0)
            .with_note(format!("every answer is consistent with (N-1)! = {fact_nm1} permutations")),
    ];
    Ok(SuiteReport::from_checks("perm-eta", checks))
}

pub fn perm_eta(spec: &PermSpec, big_t: usize) -> Result<SuiteReport> {
    let chains = perm_chains(spec)?;
    perm_eta_with(spec, &chains, big_t)
}

/// Success ceiling for T-query inversion of a random permutation on N
/// elements: the cited (1 + 2 sqrt 2 T)^2 / (N - 4T) next to the chain this
/// workbench can replay, (8T/sqrt(N-4T) + 1/sqrt(N-2T))^2, which rounds up
/// to (1 + 8T)^2 / (N - 4T). Both are reported; the constants differ and
/// neither is tightened here.
pub fn perm_success_bound(n: usize, big_t: usize) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::param("need at least one element to permute"));
    }
    if n <= 4 * big_t {
        return Err(Error::param(format!(
            "N must exceed 4T; got N = {n} with T = {big_t}"
        )));
    }
    let tf = big_t as f64;
    let cited = (1.0 + 2.0 * 2.0f64.sqrt() * tf).powi(2) / (n as f64 - 4.0 * tf);
    let chain = (8.0 * tf / (n as f64 - 4.0 * tf).sqrt() + 1.0 / (n as f64 - 2.0 * tf).sqrt()).powi(2);
    let derived = (1.0 + 8.0 * tf).powi(2) / (n as f64 - 4.0 * tf);

    let mut report = BoundReport::new("PERM", "permutation-inversion");
    report.t = Some(big_t as u64);
    report.value = Some(cited);
    report.set_param("n", n as u64);
    report.set_param("cited", cited);
    report.set_param("derived", derived);
    report.set_param("derived_chain", chain);
    report.verdicts = vec![
        CheckRecord::new("chain-within-derived", (chain - derived).max(0.0), 1e-12),
        CheckRecord::new("derived-dominates-cited", (cited - derived).max(0.0), 1e-12),
    ];
    Ok(report)
}
