//! Function spaces, input distributions, oracles, and a statevector
//! simulator for bounded-query algorithms.
//!
//! The input to a query algorithm is a function f: X -> Y with |X| = N and
//! |Y| = M, held in superposition on a dedicated input register. Function
//! tables are indexed as base-M integers (digit x holds f(x)), so the input
//! register is C^(M^N) and index arithmetic is O(1). The simulator fixes the
//! register order W (x) X (x) Y (x) I throughout: workspace, query index,
//! query value, input.
//!
//! Queries act in the Fourier picture. A query with the Y register in the
//! computational state |y> multiplies the input register by the diagonal
//! phase e^{-2 pi i y f(x) / M}. This is the standard oracle conjugated by
//! the Fourier transform on Y, so it is equivalent to the additive oracle
//! |x, y, f> -> |x, y + f(x), f> up to a basis change the algorithm's own
//! unitaries can absorb; see [`phase_oracle_component`] for the sign
//! convention and [`purified_oracle`] for the reconstruction identity
//! relating the two forms.

use crate::error::{Error, Result};
use crate::linalg::{c64, root_of_unity, vec_norm, CMatrix, Isometry, C64};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default cap on the full simulator state dimension |W| * N * M * M^N.
/// Exceeding it is an explicit error, never silent truncation.
pub const STATE_DIM_CAP: usize = 1 << 18;

/// Checked integer power; errors when the result would overflow or exceed
/// practical dimensions.
pub fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc
            .checked_mul(base)
            .ok_or_else(|| Error::size(format!("{base}^{exp} overflows usize")))?;
    }
    Ok(acc)
}

/// Number of function tables, M^N.
pub fn func_count(n: usize, m: usize) -> Result<usize> {
    checked_pow(m, n)
}

/// Decode a base-M function code into its table (digit x = f(x)).
pub fn func_table(code: usize, n: usize, m: usize) -> Vec<usize> {
    let mut t = Vec::with_capacity(n);
    let mut c = code;
    for _ in 0..n {
        t.push(c % m);
        c /= m;
    }
    t
}

/// Encode a function table as a base-M integer.
pub fn func_code(table: &[usize], m: usize) -> usize {
    let mut c = 0usize;
    for &digit in table.iter().rev() {
        debug_assert!(digit < m);
        c = c * m + digit;
    }
    c
}

/// A query problem: the function class Func inside Y^X together with the
/// relation deciding which outputs count as correct for each input.
///
/// `target` maps each f in Func to the set of accepted answers, a subset of
/// the output alphabet {0, .., sigma - 1}. The set may be empty: inputs on
/// which no answer is accepted are allowed and simply contribute zero
/// success probability.
pub struct ProblemSpec {
    n_inputs: usize,
    n_outputs: usize,
    sigma: usize,
    funcs: Vec<usize>,
    in_func: Vec<bool>,
    targets: Vec<Vec<usize>>,
}

impl ProblemSpec {
    /// Build a problem from a membership predicate and a target relation,
    /// both evaluated on function tables.
    pub fn new(
        n: usize,
        m: usize,
        sigma: usize,
        filter: impl Fn(&[usize]) -> bool,
        target: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<ProblemSpec> {
        if n == 0 {
            return Err(Error::param("need at least one input position"));
        }
        if m == 0 {
            return Err(Error::param("output set must be nonempty"));
        }
        let count = func_count(n, m)?;
        let mut funcs = Vec::new();
        let mut in_func = vec![false; count];
        let mut targets = vec![Vec::new(); count];
        for code in 0..count {
            let table = func_table(code, n, m);
            if filter(&table) {
                funcs.push(code);
                in_func[code] = true;
                let mut zs = target(&table);
                zs.sort_unstable();
                zs.dedup();
                if let Some(&z) = zs.iter().find(|&&z| z >= sigma) {
                    return Err(Error::param(format!(
                        "target output {z} outside alphabet of size {sigma}"
                    )));
                }
                targets[code] = zs;
            }
        }
        if funcs.is_empty() {
            return Err(Error::param("Func is empty"));
        }
        Ok(ProblemSpec {
            n_inputs: n,
            n_outputs: m,
            sigma,
            funcs,
            in_func,
            targets,
        })
    }

    /// All of Y^X with every answer accepted. A neutral spec for tests and
    /// for simulations whose success measurement is supplied elsewhere.
    pub fn all_functions(n: usize, m: usize, sigma: usize) -> Result<ProblemSpec> {
        let all: Vec<usize> = (0..sigma).collect();
        ProblemSpec::new(n, m, sigma, |_| true, |_| all.clone())
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// Dimension of the input register, M^N.
    pub fn func_dim(&self) -> usize {
        self.in_func.len()
    }

    /// Codes of the functions in Func, ascending.
    pub fn funcs(&self) -> &[usize] {
        &self.funcs
    }

    pub fn contains(&self, code: usize) -> bool {
        self.in_func[code]
    }

    /// Accepted answers for the given function code (empty off Func).
    pub fn target_of(&self, code: usize) -> &[usize] {
        &self.targets[code]
    }

    pub fn accepts(&self, code: usize, z: usize) -> bool {
        self.targets[code].binary_search(&z).is_ok()
    }
}

/// A probability distribution over function tables, zero outside Func.
#[derive(Clone)]
pub struct InputDistribution {
    weights: Vec<f64>,
}

impl InputDistribution {
    pub fn new(spec: &ProblemSpec, weights: Vec<f64>) -> Result<InputDistribution> {
        if weights.len() != spec.func_dim() {
            return Err(Error::param(format!(
                "weight vector has length {}, expected {}",
                weights.len(),
                spec.func_dim()
            )));
        }
        let mut sum = 0.0;
        for (code, &w) in weights.iter().enumerate() {
            if w < 0.0 {
                return Err(Error::param(format!("negative weight at function {code}")));
            }
            if w != 0.0 && !spec.contains(code) {
                return Err(Error::param(format!(
                    "nonzero weight on function {code} outside Func"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!(
                "weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(InputDistribution { weights })
    }

    /// Uniform distribution over Func.
    pub fn uniform(spec: &ProblemSpec) -> InputDistribution {
        let mut weights = vec![0.0; spec.func_dim()];
        let w = 1.0 / spec.funcs().len() as f64;
        for &code in spec.funcs() {
            weights[code] = w;
        }
        InputDistribution { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The purification sum_f sqrt(delta(f)) |f>, a unit vector.
    pub fn purification(&self) -> Vec<C64> {
        self.weights
            .iter()
            .map(|&w| c64(w.sqrt(), 0.0))
            .collect()
    }
}

/// A T-query algorithm: unitaries U_0 .. U_T on W (x) X (x) Y, the
/// workspace dimension, and the designated output block.
///
/// The output is read from the most significant factor of the workspace:
/// writing |W| = output_dim * rest, a basis index w decomposes as
/// w = z * rest + r and the measurement outcome is z. `output_dim` must
/// divide `workspace_dim`.
pub struct QueryAlgorithm {
    pub t_queries: usize,
    pub unitaries: Vec<CMatrix>,
    pub workspace_dim: usize,
    pub output_dim: usize,
}

impl QueryAlgorithm {
    /// Dimension of the register the unitaries act on, |W| * N * M.
    pub fn op_dim(&self, spec: &ProblemSpec) -> usize {
        self.workspace_dim * spec.n_inputs() * spec.n_outputs()
    }

    fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.workspace_dim == 0 || self.output_dim == 0 {
            return Err(Error::param("workspace and output dimensions must be positive"));
        }
        if self.workspace_dim % self.output_dim != 0 {
            return Err(Error::param(format!(
                "output block {} does not divide workspace {}",
                self.output_dim, self.workspace_dim
            )));
        }
        if self.unitaries.len() != self.t_queries + 1 {
            return Err(Error::param(format!(
                "expected {} unitaries for {} queries, got {}",
                self.t_queries + 1,
                self.t_queries,
                self.unitaries.len()
            )));
        }
        let k = self.op_dim(spec);
        for (t, u) in self.unitaries.iter().enumerate() {
            if u.rows != k || u.cols != k {
                return Err(Error::param(format!(
                    "U_{t} is {}x{}, expected {k}x{k}",
                    u.rows, u.cols
                )));
            }
            let defect = unitarity_defect(u);
            if defect > 1e-10 {
                return Err(Error::check(format!(
                    "U_{t} is not unitary: deviation {defect:.3e} exceeds 1e-10"
                )));
            }
        }
        Ok(())
    }
}

/// Max-entry deviation of U form unitarity, ||U* U - I||_max.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..u.cols {
        for j in 0..u.cols {
            let mut acc = c64(0.0, 0.0);
            for k in 0..u.rows {
                acc += u.get(k, i).conj() * u.get(k, j);
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc - c64(target, 0.0)).norm());
        }
    }
    worst
}

/// States and reduced input densities collected while running an algorithm.
///
/// `states[t]` is the state after U_t (before query t+1), a unit vector on
/// W (x) X (x) Y (x) I. `input_densities[t]` is its partial trace down to
/// the input register, PSD with unit trace.
pub struct SimTrace {
    pub states: Vec<Vec<C64>>,
    pub input_densities: Vec<CMatrix>,
}

/// Fourier transform mod m: entry (z, y) = e^{2 pi i y z / m} / sqrt(m).
///
/// The sign convention is forward (+) and fixed once here. Hatted states
/// throughout the crate are columns of this matrix.
pub fn qft(m: usize) -> Result<CMatrix> {
    if m < 2 {
        return Err(Error::param("m must be at least 2"));
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(CMatrix::from_fn(m, m, |z, y| {
        root_of_unity((y * z) as i64, m).scale(scale)
    }))
}

/// Fourier transform on Y extended to Y u {bot} by fixing |bot>.
/// The extra symbol is the last basis index, m.
pub fn qft_extended(m: usize) -> Result<CMatrix> {
    let q = qft(m)?;
    let mut ext = CMatrix::zeros(m + 1, m + 1);
    for z in 0..m {
        for y in 0..m {
            ext.set(z, y, q.get(z, y));
        }
    }
    ext.set(m, m, c64(1.0, 0.0));
    Ok(ext)
}

/// The diagonal phase component O_{x,y} of the purified oracle: multiplies
/// |f> by e^{-2 pi i y f(x) / M} on all of C[Y^X].
///
/// The minus sign is forced by the forward transform of [`qft`] together
/// with the additive oracle: with |y-hat> = QFT |y>, the additive oracle
/// sends |x, y-hat, f> to e^{-2 pi i y f(x) / M} |x, y-hat, f>, which is
/// exactly what the reconstruction identity in [`purified_oracle`] checks.
pub fn phase_oracle_component(spec: &ProblemSpec, x: usize, y: usize) -> Result<CMatrix> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    if x >= n {
        return Err(Error::param(format!("query index {x} outside 0..{n}")));
    }
    if y >= m {
        return Err(Error::param(format!("query value {y} outside 0..{m}")));
    }
    let dim = spec.func_dim();
    let phases = phase_table(m);
    let mut d = CMatrix::zeros(dim, dim);
    let xpow = checked_pow(m, x)?;
    for f in 0..dim {
        let fx = (f / xpow) % m;
        d.set(f, f, phases[(y * fx) % m]);
    }
    Ok(d)
}

/// Diagonal of O_{x,y} on all of C[Y^X] as a plain vector, for callers that
/// apply the phases entrywise instead of forming the matrix.
pub fn phase_diag_full(spec: &ProblemSpec, x: usize, y: usize) -> Result<Vec<C64>> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    if x >= n || y >= m {
        return Err(Error::param("query index or value out of range"));
    }
    let phases = phase_table(m);
    let xpow = checked_pow(m, x)?;
    Ok((0..spec.func_dim())
        .map(|f| phases[(y * ((f / xpow) % m)) % m])
        .collect())
}

/// Diagonal of O_{x,y} restricted to Func, in the order of `spec.funcs()`.
/// Used where the input register is cut down to C[Func].
pub fn phase_diag_restricted(spec: &ProblemSpec, x: usize, y: usize) -> Result<Vec<C64>> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    if x >= n || y >= m {
        return Err(Error::param("query index or value out of range"));
    }
    let phases = phase_table(m);
    let xpow = checked_pow(m, x)?;
    Ok(spec
        .funcs()
        .iter()
        .map(|&f| phases[(y * ((f / xpow) % m)) % m])
        .collect())
}

/// e^{-2 pi i j / m} for j in 0..m.
fn phase_table(m: usize) -> Vec<C64> {
    (0..m).map(|j| root_of_unity(-(j as i64), m)).collect()
}

/// The purified oracle in its computational form: the permutation
/// |x, y, f> -> |x, (y + f(x)) mod M, f> on X (x) Y (x) I.
///
/// Satisfies the reconstruction
/// O = sum_{x,y} |x><x| (x) |y-hat><y-hat| (x) O_{x,y}
/// with O_{x,y} from [`phase_oracle_component`].
pub fn purified_oracle(spec: &ProblemSpec) -> Result<CMatrix> {
    purified_oracle_with_cap(spec, STATE_DIM_CAP)
}

pub fn purified_oracle_with_cap(spec: &ProblemSpec, cap: usize) -> Result<CMatrix> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let fdim = spec.func_dim();
    let dim = n
        .checked_mul(m)
        .and_then(|d| d.checked_mul(fdim))
        .ok_or_else(|| Error::size("oracle dimension overflows usize"))?;
    if dim > cap {
        return Err(Error::size(format!(
            "oracle dimension {dim} exceeds cap {cap}"
        )));
    }
    let mut o = CMatrix::zeros(dim, dim);
    for x in 0..n {
        let xpow = checked_pow(m, x)?;
        for y in 0..m {
            for f in 0..fdim {
                let fx = (f / xpow) % m;
                let from = (x * m + y) * fdim + f;
                let to = (x * m + (y + fx) % m) * fdim + f;
                o.set(to, from, c64(1.0, 0.0));
            }
        }
    }
    Ok(o)
}

/// Run the algorithm on the purification of `dist`.
///
/// The state sequence is psi_t = U_t Q U_{t-1} Q ... Q U_0 |0>|delta> where
/// Q is the phase-picture query: diagonal, multiplying the basis state
/// |w, x, y, f> by e^{-2 pi i y f(x) / M}. Algorithms written for the
/// additive oracle conjugate their unitaries by the Y-register transform;
/// [`lookup_algorithm`] shows the pattern.
pub fn run_algorithm(
    alg: &QueryAlgorithm,
    dist: &InputDistribution,
    spec: &ProblemSpec,
) -> Result<SimTrace> {
    run_algorithm_with_cap(alg, dist, spec, STATE_DIM_CAP)
}

pub fn run_algorithm_with_cap(
    alg: &QueryAlgorithm,
    dist: &InputDistribution,
    spec: &ProblemSpec,
    cap: usize,
) -> Result<SimTrace> {
    let fdim = spec.func_dim();
    let k = alg
        .workspace_dim
        .checked_mul(spec.n_inputs())
        .and_then(|d| d.checked_mul(spec.n_outputs()))
        .ok_or_else(|| Error::size("operator dimension overflows usize"))?;
    let total = k
        .checked_mul(fdim)
        .ok_or_else(|| Error::size("state dimension overflows usize"))?;
    if total > cap {
        return Err(Error::size(format!(
            "state dimension {total} exceeds cap {cap}"
        )));
    }
    alg.validate(spec)?;
    if dist.weights().len() != fdim {
        return Err(Error::param("distribution does not match spec dimensions"));
    }

    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    let phases = phase_table(m);
    let fx_digit: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            let xpow = checked_pow(m, x).expect("within cap");
            (0..fdim).map(|f| (f / xpow) % m).collect()
        })
        .collect();

    // |0>_WXY (x) |delta>
    let mut state = vec![c64(0.0, 0.0); total];
    let delta = dist.purification();
    state[..fdim].copy_from_slice(&delta);

    let mut states = Vec::with_capacity(alg.t_queries + 1);
    let mut densities = Vec::with_capacity(alg.t_queries + 1);

    for t in 0..=alg.t_queries {
        if t > 0 {
            // Query: diagonal phases on (x, y, f), identity on W.
            for w in 0..alg.workspace_dim {
                for x in 0..n {
                    let digits = &fx_digit[x];
                    for y in 0..m {
                        let base = ((w * n + x) * m + y) * fdim;
                        for f in 0..fdim {
                            let p = phases[(y * digits[f]) % m];
                            state[base + f] *= p;
                        }
                    }
                }
            }
        }
        state = apply_block_unitary(&alg.unitaries[t], &state, k, fdim);
        let norm = vec_norm(&state);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "state norm drifted to {norm} after U_{t}"
            )));
        }
        states.push(state.clone());
        densities.push(input_density(&state, k, fdim));
    }

    Ok(SimTrace {
        states,
        input_densities: densities,
    })
}

/// Apply a unitary on the W (x) X (x) Y factor to a state on
/// W (x) X (x) Y (x) I, treating the state as a k x fdim matrix.
fn apply_block_unitary(u: &CMatrix, state: &[C64], k: usize, fdim: usize) -> Vec<C64> {
    let mut out = vec![c64(0.0, 0.0); state.len()];
    for row in 0..k {
        for col in 0..k {
            let entry = u.get(row, col);
            if entry.norm_sqr() == 0.0 {
                continue;
            }
            let src = &state[col * fdim..(col + 1) * fdim];
            let dst = &mut out[row * fdim..(row + 1) * fdim];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += entry * s;
            }
        }
    }
    out
}

/// Partial trace of |psi><psi| down to the input register.
pub fn input_density(state: &[C64], k: usize, fdim: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(fdim, fdim);
    for block in 0..k {
        let chunk = &state[block * fdim..(block + 1) * fdim];
        for (f1, a) in chunk.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (f2, b) in chunk.iter().enumerate() {
                let cur = rho.get(f1, f2);
                rho.set(f1, f2, cur + a * b.conj());
            }
        }
    }
    rho
}

/// Success probability of the final state: the squared norm of
/// Lambda_succ psi_T where Lambda_succ = sum_z |z><z|_{W_O} (x) F_z,
/// diagonal in the simulator basis.
pub fn success_probability(
    trace: &SimTrace,
    spec: &ProblemSpec,
    alg: &QueryAlgorithm,
) -> Result<f64> {
    if alg.output_dim < spec.sigma() {
        return Err(Error::param(format!(
            "output block of size {} cannot hold {} answers",
            alg.output_dim,
            spec.sigma()
        )));
    }
    let fdim = spec.func_dim();
    let k = alg.op_dim(spec);
    let last = trace
        .states
        .last()
        .ok_or_else(|| Error::param("trace is empty"))?;
    if last.len() != k * fdim {
        return Err(Error::param("trace does not match algorithm dimensions"));
    }
    let rest = alg.workspace_dim / alg.output_dim;
    let xy = spec.n_inputs() * spec.n_outputs();
    let mut prob = 0.0;
    for (idx, amp) in last.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let f = idx % fdim;
        let w = (idx / fdim) / xy;
        let z = w / rest;
        if z < spec.sigma() && spec.accepts(f, z) {
            prob += amp.norm_sqr();
        }
    }
    Ok(prob)
}

/// Projector onto the inputs whose accepted-answer set contains z,
/// F_z = sum_{f : z in F(f)} |f><f|, returned as the isometry of its range.
pub fn f_z_projector(spec: &ProblemSpec, z: usize) -> Result<Isometry> {
    if z >= spec.sigma() {
        return Err(Error::param(format!(
            "output {z} outside alphabet of size {}",
            spec.sigma()
        )));
    }
    let fdim = spec.func_dim();
    let cols: Vec<Vec<C64>> = (0..fdim)
        .filter(|&f| spec.accepts(f, z))
        .map(|f| {
            let mut e = vec![c64(0.0, 0.0); fdim];
            e[f] = c64(1.0, 0.0);
            e
        })
        .collect();
    Isometry::from_matrix(CMatrix::from_columns(fdim, &cols))
}

/// Build the t-query lookup algorithm that queries the positions `xs` in
/// order and stores the answers in t workspace slots of dimension M each,
/// so |W| = M^t. Slot i is the i-th base-M digit of the workspace index.
///
/// Each copy is the phase query conjugated by the Y transform: preparing
/// QFT |0> on Y, querying, and transforming again leaves |f(x)> on Y,
/// which is then swapped into the slot.
pub fn lookup_algorithm(spec: &ProblemSpec, xs: &[usize]) -> Result<QueryAlgorithm> {
    build_lookup(spec, xs, None)
}

/// Lookup with a classical postprocessing step: an extra most-significant
/// workspace factor of dimension sigma receives `classify` applied to the
/// tuple of answers, so |W| = sigma * M^t and the output block is sigma.
pub fn classified_lookup_algorithm(
    spec: &ProblemSpec,
    xs: &[usize],
    classify: impl Fn(&[usize]) -> usize,
) -> Result<QueryAlgorithm> {
    build_lookup(spec, xs, Some(&classify))
}

fn build_lookup(
    spec: &ProblemSpec,
    xs: &[usize],
    classify: Option<&dyn Fn(&[usize]) -> usize>,
) -> Result<QueryAlgorithm> {
    let (n, m) = (spec.n_inputs(), spec.n_outputs());
    for &x in xs {
        if x >= n {
            return Err(Error::param(format!("lookup position {x} outside 0..{n}")));
        }
    }
    let t = xs.len();
    let slots = checked_pow(m, t)?;
    let sigma = spec.sigma();
    let wdim = if classify.is_some() {
        slots
            .checked_mul(sigma)
            .ok_or_else(|| Error::size("workspace dimension overflows usize"))?
    } else {
        slots
    };
    let k = wdim * n * m;
    if k > STATE_DIM_CAP {
        return Err(Error::size(format!(
            "lookup operator dimension {k} exceeds cap {STATE_DIM_CAP}"
        )));
    }

    let q = qft(m)?;
    let qy = block_on_y(&q, wdim, n, m);

    // Permutation pieces, assembled as index maps and turned into matrices.
    let set_x = |from: usize, to: usize| -> CMatrix {
        perm_matrix(k, |idx| {
            let (w, x, y) = split_wxy(idx, n, m);
            let nx = if x == from {
                to
            } else if x == to {
                from
            } else {
                x
            };
            join_wxy(w, nx, y, n, m)
        })
    };
    let swap_slot = |slot: usize| -> CMatrix {
        let spow = checked_pow(m, slot).expect("slot within workspace");
        perm_matrix(k, |idx| {
            let (w, x, y) = split_wxy(idx, n, m);
            let digit = (w / spow) % m;
            let nw = w - digit * spow + y * spow;
            join_wxy(nw, x, digit, n, m)
        })
    };

    let mut unitaries = Vec::with_capacity(t + 1);
    if t == 0 {
        unitaries.push(CMatrix::identity(k));
    } else {
        unitaries.push(qy.mul(&set_x(0, xs[0])));
        for i in 1..t {
            // Finish copy i, bank it, point X at the next position, prepare.
            let mut u = swap_slot(i - 1).mul(&qy);
            u = set_x(xs[i - 1], xs[i]).mul(&u);
            u = qy.mul(&u);
            unitaries.push(u);
        }
        let mut last = swap_slot(t - 1).mul(&qy);
        if let Some(classify) = classify {
            let add_class = perm_matrix(k, |idx| {
                let (w, x, y) = split_wxy(idx, n, m);
                let tuple: Vec<usize> = (0..t).map(|i| (w / checked_pow(m, i).unwrap()) % m).collect();
                let z = classify(&tuple);
                debug_assert!(z < sigma, "classifier output out of range");
                let o = w / slots;
                let nw = ((o + z % sigma) % sigma) * slots + (w % slots);
                join_wxy(nw, x, y, n, m)
            });
            last = add_class.mul(&last);
        }
        unitaries.push(last);
    }

    Ok(QueryAlgorithm {
        t_queries: t,
        unitaries,
        workspace_dim: wdim,
        output_dim: if classify.is_some() { sigma } else { wdim },
    })
}

fn split_wxy(idx: usize, n: usize, m: usize) -> (usize, usize, usize) {
    let y = idx % m;
    let x = (idx / m) % n;
    let w = idx / (m * n);
    (w, x, y)
}

fn join_wxy(w: usize, x: usize, y: usize, n: usize, m: usize) -> usize {
    (w * n + x) * m + y
}

fn perm_matrix(dim: usize, map: impl Fn(usize) -> usize) -> CMatrix {
    let mut p = CMatrix::zeros(dim, dim);
    for from in 0..dim {
        p.set(map(from), from, c64(1.0, 0.0));
    }
    p
}

/// I_W (x) I_X (x) Q as a dense matrix on the algorithm register.
fn block_on_y(q: &CMatrix, wdim: usize, n: usize, m: usize) -> CMatrix {
    let k = wdim * n * m;
    let mut out = CMatrix::zeros(k, k);
    for wx in 0..wdim * n {
        for r in 0..m {
            for c in 0..m {
                out.set(wx * m + r, wx * m + c, q.get(r, c));
            }
        }
    }
    out
}

/// Haar-ish random unitary: Gaussian matrix orthonormalized column by
/// column. Good enough for exercising simulator invariants; makes no
/// claim of exact Haar measure.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let col: Vec<C64> = (0..dim).map(|_| c64(gauss(rng), gauss(rng))).collect();
        cols.push(col);
    }
    let iso = crate::linalg::span_isometry_in(dim, &cols, 1e-9)
        .expect("Gaussian matrix is almost surely full rank");
    assert_eq!(iso.rank(), dim, "random matrix was rank deficient");
    iso.basis().clone()
}

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A seeded random T-query algorithm for property tests.
pub fn random_algorithm(
    spec: &ProblemSpec,
    t_queries: usize,
    workspace_dim: usize,
    output_dim: usize,
    seed: u64,
) -> Result<QueryAlgorithm> {
    if workspace_dim % output_dim != 0 {
        return Err(Error::param("output block must divide workspace"));
    }
    let k = workspace_dim * spec.n_inputs() * spec.n_outputs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitaries = (0..=t_queries).map(|_| random_unitary(k, &mut rng)).collect();
    Ok(QueryAlgorithm {
        t_queries,
        unitaries,
        workspace_dim,
        output_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn qft_two_is_hadamard() {
        let q = qft(2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let h = CMatrix::from_rows(vec![
            vec![c64(s, 0.0), c64(s, 0.0)],
            vec![c64(s, 0.0), c64(-s, 0.0)],
        ]);
        assert!(max_diff(&q, &h) <= 1e-15);
    }

    #[test]
    fn qft_three_pinned_entry() {
        let q = qft(3).unwrap();
        let expect = root_of_unity(2, 3).scale(1.0 / 3.0f64.sqrt());
        assert!((q.get(1, 2) - expect).norm() <= 1e-15);
    }

    #[test]
    fn qft_five_columns_orthonormal() {
        let q = qft(5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = c64(0.0, 0.0);
                for k in 0..5 {
                    acc += q.get(k, i).conj() * q.get(k, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc - c64(target, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn qft_rejects_degenerate_modulus() {
        assert!(matches!(qft(1), Err(Error::Parameter(_))));
        assert!(matches!(qft(0), Err(Error::Parameter(_))));
    }

    #[test]
    fn qft_extended_fixes_bottom() {
        let q = qft_extended(3).unwrap();
        assert!((q.get(3, 3) - c64(1.0, 0.0)).norm() == 0.0);
        for i in 0..3 {
            assert_eq!(q.get(i, 3), c64(0.0, 0.0));
            assert_eq!(q.get(3, i), c64(0.0, 0.0));
        }
        assert!(unitarity_defect(&q) <= 1e-12);
    }

    #[test]
    fn func_codes_round_trip() {
        for code in 0..27 {
            let t = func_table(code, 3, 3);
            assert_eq!(func_code(&t, 3), code);
        }
    }

    #[test]
    fn phase_component_zero_query_is_identity() {
        let spec = ProblemSpec::all_functions(2, 3, 1).unwrap();
        let o = phase_oracle_component(&spec, 1, 0).unwrap();
        assert!(max_diff(&o, &CMatrix::identity(9)) == 0.0);
    }

    #[test]
    fn phase_component_single_cell() {
        let spec = ProblemSpec::all_functions(1, 2, 1).unwrap();
        let o = phase_oracle_component(&spec, 0, 1).unwrap();
        let d = CMatrix::diag(&[c64(1.0, 0.0), c64(-1.0, 0.0)]);
        assert!(max_diff(&o, &d) <= 1e-15);
    }

    #[test]
    fn phase_components_compose_additively() {
        let spec = ProblemSpec::all_functions(2, 3, 1).unwrap();
        for x in 0..2 {
            for y1 in 0..3 {
                for y2 in 0..3 {
                    let a = phase_oracle_component(&spec, x, y1).unwrap();
                    let b = phase_oracle_component(&spec, x, y2).unwrap();
                    let c = phase_oracle_component(&spec, x, (y1 + y2) % 3).unwrap();
                    assert!(max_diff(&a.mul(&b), &c) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn purified_oracle_single_position_action() {
        let spec = ProblemSpec::all_functions(1, 2, 1).unwrap();
        let o = purified_oracle(&spec).unwrap();
        // |0, y, f> -> |0, y xor f(0), f> on 4 basis states.
        for y in 0..2usize {
            for f in 0..2usize {
                let from = y * 2 + f;
                let to = (y ^ f) * 2 + f;
                for row in 0..4 {
                    let expect = if row == to { 1.0 } else { 0.0 };
                    assert_eq!(o.get(row, from), c64(expect, 0.0));
                }
            }
        }
    }

    #[test]
    fn purified_oracle_is_unitary() {
        let spec = ProblemSpec::all_functions(2, 3, 1).unwrap();
        let o = purified_oracle(&spec).unwrap();
        assert!(unitarity_defect(&o) <= 1e-10);
    }

    #[test]
    fn purified_oracle_reconstruction() {
        // O = sum_{x,y} |x><x| (x) |y-hat><y-hat| (x) O_{x,y} at N = 2, M = 3.
        let spec = ProblemSpec::all_functions(2, 3, 1).unwrap();
        let o = purified_oracle(&spec).unwrap();
        let q = qft(3).unwrap();
        let mut sum = CMatrix::zeros(o.rows, o.cols);
        for x in 0..2 {
            let ex = CMatrix::from_fn(2, 2, |r, c| {
                c64(if r == x && c == x { 1.0 } else { 0.0 }, 0.0)
            });
            for y in 0..3 {
                let yhat: Vec<C64> = (0..3).map(|z| q.get(z, y)).collect();
                let proj = CMatrix::from_fn(3, 3, |r, c| yhat[r] * yhat[c].conj());
                let oxy = phase_oracle_component(&spec, x, y).unwrap();
                let term = kron(&kron(&ex, &proj).unwrap(), &oxy).unwrap();
                sum = sum.add(&term);
            }
        }
        assert!(max_diff(&o, &sum) <= 1e-10);
    }

    #[test]
    fn fourier_side_action_shifts_the_table() {
        // O |x, y-hat, f-hat> = |x, y-hat, (f - y delta_x)-hat>.
        for m in [2usize, 3] {
            let spec = ProblemSpec::all_functions(2, m, 1).unwrap();
            let o = purified_oracle(&spec).unwrap();
            let q = qft(m).unwrap();
            let qn = kron(&q, &q).unwrap();
            let fdim = m * m;
            for x in 0..2usize {
                for y in 0..m {
                    for f in 0..fdim {
                        let yhat: Vec<C64> = (0..m).map(|z| q.get(z, y)).collect();
                        let fhat: Vec<C64> = (0..fdim).map(|g| qn.get(g, f)).collect();
                        let mut input = vec![c64(0.0, 0.0); 2 * m * fdim];
                        for (yy, ya) in yhat.iter().enumerate() {
                            for (g, ga) in fhat.iter().enumerate() {
                                input[(x * m + yy) * fdim + g] = ya * ga;
                            }
                        }
                        let out = o.apply(&input);
                        let mut table = func_table(f, 2, m);
                        table[x] = (table[x] + m - y) % m;
                        let shifted = func_code(&table, m);
                        let mut expect = vec![c64(0.0, 0.0); 2 * m * fdim];
                        let shat: Vec<C64> = (0..fdim).map(|g| qn.get(g, shifted)).collect();
                        for (yy, ya) in yhat.iter().enumerate() {
                            for (g, ga) in shat.iter().enumerate() {
                                expect[(x * m + yy) * fdim + g] = ya * ga;
                            }
                        }
                        let diff: f64 = out
                            .iter()
                            .zip(&expect)
                            .map(|(a, b)| (a - b).norm())
                            .fold(0.0, f64::max);
                        assert!(diff <= 1e-10, "x={x} y={y} f={f} m={m}: {diff:.3e}");
                    }
                }
            }
        }
    }

    #[test]
    fn conjugating_by_the_y_transform_diagonalizes() {
        let spec = ProblemSpec::all_functions(2, 2, 1).unwrap();
        let o = purified_oracle(&spec).unwrap();
        let q = qft(2).unwrap();
        let change = kron(&kron(&CMatrix::identity(2), &q).unwrap(), &CMatrix::identity(4)).unwrap();
        let conj = change.dagger().mul(&o).mul(&change);
        let mut blocks = CMatrix::zeros(16, 16);
        for x in 0..2 {
            for y in 0..2 {
                let oxy = phase_oracle_component(&spec, x, y).unwrap();
                for f1 in 0..4 {
                    let idx = (x * 2 + y) * 4 + f1;
                    blocks.set(idx, idx, oxy.get(f1, f1));
                }
            }
        }
        assert!(max_diff(&conj, &blocks) <= 1e-10);
    }

    #[test]
    fn distribution_validation() {
        let spec = ProblemSpec::new(2, 2, 1, |t| t[0] == 0, |_| vec![0]).unwrap();
        assert_eq!(spec.funcs().len(), 2);
        let bad_sum = InputDistribution::new(&spec, vec![0.6, 0.0, 0.6, 0.0]);
        assert!(matches!(bad_sum, Err(Error::Parameter(_))));
        let off_support = InputDistribution::new(&spec, vec![0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(off_support, Err(Error::Parameter(_))));
        let negative = InputDistribution::new(&spec, vec![1.5, 0.0, -0.5, 0.0]);
        assert!(matches!(negative, Err(Error::Parameter(_))));
        let ok = InputDistribution::new(&spec, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!((vec_norm(&ok.purification()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn identity_algorithm_leaves_the_input_pure() {
        let spec = ProblemSpec::all_functions(2, 2, 2).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let k = 2 * 2 * 2;
        let alg = QueryAlgorithm {
            t_queries: 2,
            unitaries: vec![CMatrix::identity(k); 3],
            workspace_dim: 2,
            output_dim: 2,
        };
        let trace = run_algorithm(&alg, &dist, &spec).unwrap();
        let delta = dist.purification();
        let pure = CMatrix::from_fn(4, 4, |r, c| delta[r] * delta[c].conj());
        for rho in &trace.input_densities {
            assert!(max_diff(rho, &pure) <= 1e-10);
        }
    }

    #[test]
    fn lookup_algorithm_mixes_into_constraint_states() {
        // After t lookups the input register is the uniform mixture of the
        // t-constraint superpositions, weight M^{-t} each.
        let spec = ProblemSpec::all_functions(2, 2, 4).unwrap();
        let dist = InputDistribution::uniform(&spec);
        for t in 1..=2usize {
            let xs: Vec<usize> = (0..t).collect();
            let alg = lookup_algorithm(&spec, &xs).unwrap();
            let trace = run_algorithm(&alg, &dist, &spec).unwrap();
            let mut expect = CMatrix::zeros(4, 4);
            for assignment in 0..(1usize << t) {
                let ys: Vec<usize> = (0..t).map(|i| (assignment >> i) & 1).collect();
                let consistent: Vec<usize> = (0..4usize)
                    .filter(|&f| {
                        let table = func_table(f, 2, 2);
                        xs.iter().zip(&ys).all(|(&x, &y)| table[x] == y)
                    })
                    .collect();
                let amp = 1.0 / (consistent.len() as f64).sqrt();
                let weight = 1.0 / (1 << t) as f64;
                for &f1 in &consistent {
                    for &f2 in &consistent {
                        let cur = expect.get(f1, f2);
                        expect.set(f1, f2, cur + c64(weight * amp * amp, 0.0));
                    }
                }
            }
            let rho = trace.input_densities.last().unwrap();
            assert!(
                max_diff(rho, &expect) <= 1e-9,
                "t={t}: {:.3e}",
                max_diff(rho, &expect)
            );
        }
    }

    #[test]
    fn lookup_intermediate_density_matches_one_constraint() {
        let spec = ProblemSpec::all_functions(2, 2, 4).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let alg = lookup_algorithm(&spec, &[0, 1]).unwrap();
        let trace = run_algorithm(&alg, &dist, &spec).unwrap();
        let rho1 = &trace.input_densities[1];
        // One constraint in: mixture over f(0) = y of the two consistent
        // tables, weight 1/2 each.
        let mut expect = CMatrix::zeros(4, 4);
        for y in 0..2usize {
            let consistent: Vec<usize> = (0..4usize)
                .filter(|&f| func_table(f, 2, 2)[0] == y)
                .collect();
            for &f1 in &consistent {
                for &f2 in &consistent {
                    let cur = expect.get(f1, f2);
                    expect.set(f1, f2, cur + c64(0.25, 0.0));
                }
            }
        }
        assert!(max_diff(rho1, &expect) <= 1e-9);
    }

    #[test]
    fn random_algorithm_densities_are_states() {
        let spec = ProblemSpec::all_functions(2, 2, 2).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let alg = random_algorithm(&spec, 2, 2, 2, 7).unwrap();
        let trace = run_algorithm(&alg, &dist, &spec).unwrap();
        assert!(
            max_diff(&trace.input_densities[0], &{
                let d = dist.purification();
                CMatrix::from_fn(4, 4, |r, c| d[r] * d[c].conj())
            }) <= 1e-10
        );
        for rho in &trace.input_densities {
            assert!((rho.trace().re - 1.0).abs() <= 1e-9);
            assert!(rho.hermiticity_defect() <= 1e-9);
            let eig = crate::linalg::herm_eig(&rho.symmetrized()).unwrap();
            assert!(eig.values.iter().all(|&v| v >= -1e-9));
        }
    }

    #[test]
    fn success_probability_extremes() {
        let spec_all = ProblemSpec::all_functions(2, 2, 2).unwrap();
        let dist = InputDistribution::uniform(&spec_all);
        let alg = random_algorithm(&spec_all, 1, 2, 2, 3).unwrap();
        let trace = run_algorithm(&alg, &dist, &spec_all).unwrap();
        let p = success_probability(&trace, &spec_all, &alg).unwrap();
        assert!((p - 1.0).abs() <= 1e-9);

        let spec_none = ProblemSpec::new(2, 2, 2, |_| true, |_| vec![]).unwrap();
        let trace2 = run_algorithm(&alg, &dist, &spec_none).unwrap();
        let p2 = success_probability(&trace2, &spec_none, &alg).unwrap();
        assert!(p2 <= 1e-12);
    }

    #[test]
    fn lookup_answers_its_own_query() {
        // Measure f(x0) and output it; target accepts exactly that value.
        let x0 = 1usize;
        let spec = ProblemSpec::new(2, 2, 2, |_| true, |t| vec![t[x0]]).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let alg = lookup_algorithm(&spec, &[x0]).unwrap();
        assert_eq!(alg.workspace_dim, 2);
        let trace = run_algorithm(&alg, &dist, &spec).unwrap();
        let p = success_probability(&trace, &spec, &alg).unwrap();
        assert!((p - 1.0).abs() <= 1e-9, "lookup success {p}");
    }

    #[test]
    fn classified_lookup_applies_the_classifier() {
        // Output f(0) xor f(1) through the classifier slot.
        let spec = ProblemSpec::new(2, 2, 2, |_| true, |t| vec![t[0] ^ t[1]]).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let alg = classified_lookup_algorithm(&spec, &[0, 1], |ys| ys[0] ^ ys[1]).unwrap();
        assert_eq!(alg.workspace_dim, 2 * 4);
        assert_eq!(alg.output_dim, 2);
        let trace = run_algorithm(&alg, &dist, &spec).unwrap();
        let p = success_probability(&trace, &spec, &alg).unwrap();
        assert!((p - 1.0).abs() <= 1e-9, "classified lookup success {p}");
    }

    #[test]
    fn f_z_projector_ranks() {
        let constant = ProblemSpec::new(2, 2, 2, |_| true, |_| vec![1]).unwrap();
        assert_eq!(f_z_projector(&constant, 1).unwrap().rank(), 4);
        assert_eq!(f_z_projector(&constant, 0).unwrap().rank(), 0);

        // Unique marked index: Func is the weight-one tables, the answer is
        // the marked position.
        let search = ProblemSpec::new(
            2,
            2,
            2,
            |t| t.iter().sum::<usize>() == 1,
            |t| vec![t.iter().position(|&v| v == 1).unwrap()],
        )
        .unwrap();
        assert_eq!(f_z_projector(&search, 0).unwrap().rank(), 1);

        let everything = ProblemSpec::all_functions(2, 2, 2).unwrap();
        let f0 = f_z_projector(&everything, 0).unwrap().projector();
        let f1 = f_z_projector(&everything, 1).unwrap().projector();
        assert!(f0.mul(&f1).frob() > 1.0);
    }

    #[test]
    fn simulator_rejects_oversized_state() {
        let spec = ProblemSpec::all_functions(2, 2, 1).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let alg = QueryAlgorithm {
            t_queries: 0,
            unitaries: vec![],
            workspace_dim: 1 << 17,
            output_dim: 1,
        };
        assert!(matches!(
            run_algorithm(&alg, &dist, &spec),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn simulator_rejects_non_unitary_steps() {
        let spec = ProblemSpec::all_functions(2, 2, 1).unwrap();
        let dist = InputDistribution::uniform(&spec);
        let k = 1 * 2 * 2;
        let mut bad = CMatrix::identity(k);
        bad.set(0, 0, c64(0.5, 0.0));
        let alg = QueryAlgorithm {
            t_queries: 0,
            unitaries: vec![bad],
            workspace_dim: 1,
            output_dim: 1,
        };
        assert!(matches!(
            run_algorithm(&alg, &dist, &spec),
            Err(Error::CheckFailed(_))
        ));
    }

    #[test]
    fn restricted_phase_diag_matches_full() {
        let spec = ProblemSpec::new(2, 3, 1, |t| t[0] != t[1], |_| vec![0]).unwrap();
        let full = phase_oracle_component(&spec, 1, 2).unwrap();
        let diag = phase_diag_restricted(&spec, 1, 2).unwrap();
        for (i, &f) in spec.funcs().iter().enumerate() {
            assert_eq!(diag[i], full.get(f, f));
        }
    }
}
