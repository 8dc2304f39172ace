//! Named verification suites and the problem catalog behind the command
//! line. Each suite bundles the checks for one slice of the machinery and
//! emits reports in a fixed order, so a rerun with the same seed is
//! byte-identical.

use crate::compressed::{comp_isometry, dbs_at_most, Property};
use crate::error::{Error, Result};
use crate::ladder::{
    bound_params, eta_for, gen_feasible_gram, madv_step_bound, mladv_step_bound, one_query_defect,
    output_condition_check, progress_checked, space_chain, step_monotonicity_defect, validate_mla,
    MlaMatrix, SpaceChain,
};
use crate::linalg::{CMatrix, Isometry};
use crate::oracle::{func_code, random_algorithm, run_algorithm, InputDistribution, ProblemSpec};
use crate::perm::{
    b_generator_defect, check_perm_proj_with, check_subset_chain, perm_chains, perm_eta_with,
    perm_mla_embedded, perm_mla_with, perm_step_bound, perm_step_norm_with, perm_success_bound,
    perm_v_state, PermSpec,
};
use crate::poly::{
    approx_degree, magnin_fact_spotcheck, parity_ladder_gamma, poly_reduction_bound, target_gram,
    BooleanFunction,
};
use crate::reductions::{
    check_equal_proj, eta_bound_check, gamma_from_property, property_problem,
    reduction_factor_check, sdpt_scalar_checks, tensor_chain_defect, tensor_power,
};
use crate::report::{BoundReport, CheckRecord, SuiteReport};

/// Parameter overrides for a suite run; unset fields fall back to each
/// suite's documented default.
#[derive(Clone, Debug, Default)]
pub struct SuiteConfig {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub eps: Option<f64>,
    pub kappa: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

pub const SUITE_NAMES: [&str; 7] = [
    "space",
    "ladder",
    "reduction",
    "sdpt",
    "poly",
    "perm",
    "all",
];

/// Dispatch a suite by name. "all" concatenates the six suites in the
/// order of [`SUITE_NAMES`].
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    match name {
        "space" => space_suite(cfg),
        "ladder" => ladder_suite(cfg),
        "reduction" => reduction_suite(cfg),
        "sdpt" => sdpt_suite(cfg),
        "poly" => poly_suite(cfg),
        "perm" => perm_suite(cfg),
        "all" => {
            let mut out = Vec::new();
            for suite in &SUITE_NAMES[..6] {
                out.extend(run_suite(suite, cfg)?);
            }
            Ok(out)
        }
        other => Err(Error::param(format!(
            "unknown suite '{other}'; expected one of space, ladder, reduction, sdpt, poly, perm, all"
        ))),
    }
}

fn renamed(mut report: SuiteReport, name: &str) -> SuiteReport {
    report.suite = name.to_string();
    report
}

/// Fold a bound calculator's verdicts into a suite entry so verify-style
/// output stays uniform.
fn verdicts_as_suite(name: &str, report: &BoundReport) -> SuiteReport {
    SuiteReport::from_checks(name, report.verdicts.clone())
}

/// Merge repeated runs of the same check set, keeping the worst violation
/// seen per check name. Order follows the first run.
fn merge_worst(name: &str, runs: Vec<SuiteReport>) -> SuiteReport {
    let mut checks: Vec<CheckRecord> = Vec::new();
    for run in runs {
        for c in run.checks {
            match checks.iter_mut().find(|e| e.name == c.name) {
                Some(e) => {
                    if c.max_violation > e.max_violation {
                        *e = c;
                    }
                }
                None => checks.push(c),
            }
        }
    }
    SuiteReport::from_checks(name, checks)
}

// ---------------------------------------------------------------------
// Problem catalog
// ---------------------------------------------------------------------

/// Search properties by name: "collision" pairs two positions with a common
/// value, "preimage" pins k positions to zero.
pub fn property_by_name(name: &str, n: usize, m: usize, k: usize) -> Result<Property> {
    match name {
        "collision" => Property::collision(n, m),
        "preimage" => Property::preimage(n, m, k),
        other => Err(Error::param(format!(
            "unknown problem '{other}'; expected collision or preimage"
        ))),
    }
}

/// The decision form of collision finding: F(f) = 1 iff f repeats a value.
pub fn collision_decision_spec(n: usize, m: usize) -> Result<ProblemSpec> {
    ProblemSpec::new(n, m, 2, |_| true, |table| {
        let mut seen = vec![false; table.len().max(table.iter().copied().max().unwrap_or(0) + 1)];
        let mut repeat = false;
        for &v in table {
            if std::mem::replace(&mut seen[v], true) {
                repeat = true;
            }
        }
        vec![usize::from(repeat)]
    })
}

/// A Boolean function as a decision problem over its encoded inputs: the
/// n-bit string is the oracle, the answer is F of that string.
pub fn boolean_decision_spec(f: &BooleanFunction) -> Result<ProblemSpec> {
    let table = f.table().to_vec();
    ProblemSpec::new(f.n(), 2, 2, |_| true, move |bits| {
        vec![table[func_code(bits, 2)] as usize]
    })
}

/// Entry (f1, f2) = 1 iff the two inputs share an accepted answer set;
/// the Gram matrix of the ideal output states for a single-valued target.
pub fn target_gram_for(spec: &ProblemSpec) -> Result<CMatrix> {
    for &f in spec.funcs() {
        if spec.target_of(f).len() != 1 {
            return Err(Error::param("target Gram needs a single-valued target"));
        }
    }
    let funcs = spec.funcs();
    let mut g = CMatrix::zeros(funcs.len(), funcs.len());
    for (i, &fi) in funcs.iter().enumerate() {
        for (j, &fj) in funcs.iter().enumerate() {
            if spec.target_of(fi)[0] == spec.target_of(fj)[0] {
                g.set(i, j, crate::linalg::c64(1.0, 0.0));
            }
        }
    }
    Ok(g)
}

/// Two-rung ladder on a reachable chain: the top rung is the final
/// increment, everything below stays at one. Commutes with the chain by
/// construction.
pub fn increment_ladder(chain: &SpaceChain, kappa: f64) -> Result<MlaMatrix> {
    let dim = chain.dim();
    let top = chain.increment(chain.levels()).clone();
    let mut low_cols = Vec::new();
    for t in 0..chain.levels() {
        let inc = chain.increment(t);
        for c in 0..inc.rank() {
            low_cols.push(inc.basis().col(c));
        }
    }
    let low = Isometry::from_matrix(CMatrix::from_columns(dim, &low_cols))?;
    MlaMatrix::new(kappa, vec![low, top])
}

/// Collision query count from the closed-form per-step ceiling
/// sqrt((t-1)/M), with no matrices and no function-space enumeration: the
/// smallest T whose accumulated steps reach sqrt(1-eps) - sqrt(2/M).
pub fn collision_analytic_bound(m: usize, eps: f64) -> Result<BoundReport> {
    let k = 2usize;
    let ratio = k as f64 / m as f64;
    if !(eps > 0.0 && eps < 1.0 - ratio) {
        return Err(Error::param(format!(
            "eps must lie in (0, 1 - k/M); got eps = {eps} with k = {k}, M = {m}"
        )));
    }
    let target = (1.0 - eps).sqrt() - ratio.sqrt();
    let mut report = BoundReport::new("COMP", "collision");
    report.target = Some(target);
    report.set_param("m", m as u64);
    report.set_param("k", k as u64);
    report.set_param("eps", eps);
    report.set_param("mode", "analytic");
    let mut cumulative = 0.0f64;
    let mut t = 0u64;
    while cumulative < target {
        t += 1;
        cumulative += ((t as f64 - 1.0) / m as f64).sqrt();
    }
    report.t = Some(t);
    report.set_param("cumulative", cumulative);
    Ok(report)
}

/// Query count forced by the flat multiplicative step bound: the smallest
/// T with bound^T reaching the success target. Unbounded when the step
/// bound degenerates to 1.
pub fn madv_bound_report(
    spec: &ProblemSpec,
    gamma: &MlaMatrix,
    lam: f64,
    eta: f64,
    eps: f64,
) -> Result<BoundReport> {
    if !(eps > 0.0 && eps < 1.0 - eta) {
        return Err(Error::param(format!(
            "eps must lie in (0, 1 - eta); got eps = {eps} with eta = {eta}"
        )));
    }
    let step = madv_step_bound(&gamma.dense(), spec)?;
    let gap = (1.0 - eps).sqrt() - eta.sqrt();
    let target = 1.0 + (lam - 1.0) * gap * gap;
    let mut report = BoundReport::new("MADV", "flat-step");
    report.target = Some(target);
    report.set_param("n", spec.n_inputs() as u64);
    report.set_param("m", spec.n_outputs() as u64);
    report.set_param("lambda", lam);
    report.set_param("eta", eta);
    report.set_param("eps", eps);
    report.set_param("step_bound", step);
    if step <= 1.0 + 1e-12 {
        if target <= 1.0 + 1e-12 {
            report.t = Some(0);
        } else {
            report.unbounded = true;
        }
    } else {
        let t = (target.ln() / step.ln()).ceil().max(0.0);
        report.t = Some(t as u64);
    }
    Ok(report)
}

// ---------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------

/// Reachable spaces against compressed databases. Defaults N = 3, M = 2.
pub fn space_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let n = cfg.n.unwrap_or(3);
    let m = cfg.m.unwrap_or(2);
    let tol = cfg.tol.unwrap_or(1e-9);
    let spec = ProblemSpec::all_functions(n, m, 1)?;
    let dist = InputDistribution::uniform(&spec);
    let chain = space_chain(&dist, &spec)?;
    let comp = comp_isometry(&spec)?;

    let gram_dev = comp
        .dagger()
        .mul(&comp)
        .sub(&CMatrix::identity(spec.func_dim()))
        .max_abs();

    let mut worst = 0.0f64;
    for t in 0..=n {
        let p_space = chain.at_most(t).projector();
        let keep = dbs_at_most(n, m, t)?;
        let mut masked = CMatrix::zeros(comp.rows, comp.cols);
        for &r in &keep {
            for c in 0..comp.cols {
                masked.set(r, c, comp.get(r, c));
            }
        }
        let p_db = masked.dagger().mul(&masked);
        worst = worst.max(p_space.sub(&p_db).frob());
    }

    let checks = vec![
        CheckRecord::new("compression-columns-orthonormal", gram_dev, 1e-10),
        CheckRecord::new("space-projector-matches-small-databases", worst, tol),
    ];
    Ok(vec![SuiteReport::from_checks("space-db", checks)])
}

/// Chain structure, ladder validation, and progress soundness on one
/// seeded algorithm. Defaults N = 3, M = 2, kappa = 4.
pub fn ladder_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let n = cfg.n.unwrap_or(3);
    let m = cfg.m.unwrap_or(2);
    let kappa = cfg.kappa.unwrap_or(4.0);
    let seed = cfg.seed.unwrap_or(7);
    let spec = ProblemSpec::all_functions(n, m, 1)?;
    let dist = InputDistribution::uniform(&spec);
    let chain = space_chain(&dist, &spec)?;
    let gamma = increment_ladder(&chain, kappa)?;

    let mut out = Vec::new();
    out.push(validate_mla(&gamma, &chain, &spec)?);

    let one_query = one_query_defect(&chain, &spec)?;
    let mono = step_monotonicity_defect(&gamma, &chain, &spec)?;
    out.push(SuiteReport::from_checks(
        "chain-structure",
        vec![
            CheckRecord::new("one-query-stays-within-next-level", one_query, 1e-10),
            CheckRecord::new("step-norms-non-decreasing", mono, 1e-9),
        ],
    ));

    let queries = n.min(3);
    let alg = random_algorithm(&spec, queries, 2, 1, seed)?;
    let trace = run_algorithm(&alg, &dist, &spec)?;
    let (progress, reachable) = progress_checked(&gamma, &trace, &chain)?;
    let start_dev = (progress.values[0] - 1.0).abs();
    let mut ratio_excess = 0.0f64;
    for (t, r) in progress.step_ratios.iter().enumerate() {
        let bound = mladv_step_bound(&gamma, &chain, &spec, t)?;
        ratio_excess = ratio_excess.max(r - bound.value);
    }
    out.push(SuiteReport::from_checks(
        "progress-soundness",
        vec![
            CheckRecord::new("initial-progress-is-one", start_dev, 1e-9),
            CheckRecord::new("step-ratios-within-bound", ratio_excess.max(0.0), 1e-8),
            reachable,
        ],
    ));

    let dec = collision_decision_spec(2, 2)?;
    let p = Property::collision(2, 2)?;
    let g2 = gamma_from_property(&dec, &p, kappa)?;
    let eta = eta_for(&g2, kappa, &dec)?;
    let eps = cfg.eps.unwrap_or(0.25);
    let params = bound_params(&g2, kappa, eta, eps)?;
    let tgt = target_gram_for(&dec)?;
    let dense = g2.dense();
    let mut runs = Vec::new();
    for i in 0..10u64 {
        let gram = gen_feasible_gram(&dec, eps, seed.wrapping_add(i))?;
        runs.push(output_condition_check(&dense, &params, &gram, &tgt)?);
    }
    out.push(merge_worst("output-condition", runs));
    Ok(out)
}

/// Database-split identities, the eta chain, the six-fold query-count
/// comparison, and tensor-power closure. Defaults N = 3, M = 4, k = 2,
/// eps = 0.1.
pub fn reduction_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let n = cfg.n.unwrap_or(3);
    let m = cfg.m.unwrap_or(4);
    let k = cfg.k.unwrap_or(2);
    let eps = cfg.eps.unwrap_or(0.1);
    let spec = ProblemSpec::all_functions(n, m, 1)?;
    let collision = Property::collision(n, m)?;
    let preimage = Property::preimage(n, m, k)?;

    let mut out = Vec::new();
    out.push(renamed(
        check_equal_proj(&spec, &collision)?,
        "equal-proj-collision",
    ));
    out.push(renamed(
        check_equal_proj(&spec, &preimage)?,
        "equal-proj-preimage",
    ));
    out.push(eta_bound_check(&spec, &collision, &collision.tuples()[0])?);
    let factor = reduction_factor_check(&spec, &collision, eps)?;
    out.push(verdicts_as_suite("reduction-factor", &factor));

    let base_spec = property_problem(&Property::collision(2, 2)?, 2, 2)?;
    let base = gamma_from_property(&base_spec, &Property::collision(2, 2)?, cfg.kappa.unwrap_or(3.0))?;
    let power = tensor_power(&base, 2)?;
    let prod_spec = ProblemSpec::all_functions(4, 2, 1)?;
    let prod_dist = InputDistribution::uniform(&prod_spec);
    let prod_chain = space_chain(&prod_dist, &prod_spec)?;
    out.push(renamed(
        validate_mla(&power, &prod_chain, &prod_spec)?,
        "tensor-power-ladder",
    ));
    let base_dist = InputDistribution::uniform(&base_spec);
    let base_chain = space_chain(&base_dist, &base_spec)?;
    let defect = tensor_chain_defect(&base_chain, 2, &prod_chain)?;
    out.push(SuiteReport::from_checks(
        "tensor-power-chain",
        vec![CheckRecord::new(
            "product-chain-splits-by-total-level",
            defect,
            cfg.tol.unwrap_or(1e-9),
        )],
    ));
    Ok(out)
}

/// Scalar inequalities of the direct-product step. Defaults k = 361,
/// lambda = 2, eps = 0.5, eta = 0.5.
pub fn sdpt_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let k = cfg.k.unwrap_or(361);
    let lam = cfg.lambda.unwrap_or(2.0);
    let eps = cfg.eps.unwrap_or(0.5);
    let eta = cfg.eta.unwrap_or(0.5);
    Ok(vec![sdpt_scalar_checks(lam, eps, eta, k)?])
}

/// Degree machinery: the parity ladder, degree pins, the chained bound,
/// the sampled trace fact, and the output condition on the parity ladder.
/// Defaults n = 2, eps = 1/3, kappa = 4, seed = 7.
pub fn poly_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let n = cfg.n.unwrap_or(2);
    let eps = cfg.eps.unwrap_or(1.0 / 3.0);
    let kappa = cfg.kappa.unwrap_or(4.0);
    let seed = cfg.seed.unwrap_or(7);
    let parity = BooleanFunction::parity(n)?;

    let spec = ProblemSpec::all_functions(n, 2, 1)?;
    let dist = InputDistribution::uniform(&spec);
    let chain = space_chain(&dist, &spec)?;
    let gamma = parity_ladder_gamma(n, kappa)?;

    let mut out = Vec::new();
    out.push(renamed(
        validate_mla(&gamma, &chain, &spec)?,
        "parity-ladder",
    ));
    let mut rung_dev = 0.0f64;
    for i in 0..=gamma.levels() {
        rung_dev = rung_dev.max(
            gamma
                .eigenspace(i)
                .projector()
                .sub(&chain.increment(i).projector())
                .frob(),
        );
    }
    out.push(SuiteReport::from_checks(
        "parity-rungs",
        vec![CheckRecord::new(
            "rung-matches-chain-increment",
            rung_dev,
            cfg.tol.unwrap_or(1e-9),
        )],
    ));

    let (d, witness) = approx_degree(&parity, eps)?;
    let degree_gap = d.abs_diff(if eps < 0.5 { n } else { 0 }) as f64;
    let cert_excess = (witness.max_deviation(&parity) - eps).max(0.0);
    out.push(SuiteReport::from_checks(
        "approx-degree",
        vec![
            CheckRecord::new("parity-needs-full-degree", degree_gap, 0.0),
            CheckRecord::new("witness-meets-its-certificate", cert_excess, 1e-9),
        ],
    ));

    let bound = poly_reduction_bound(&parity, eps)?;
    out.push(verdicts_as_suite("poly-chain", &bound));
    out.push(magnin_fact_spotcheck(&parity, eps, 50, seed)?);

    let dec = boolean_decision_spec(&parity)?;
    let lam = cfg.lambda.unwrap_or(kappa);
    let eta = eta_for(&gamma, lam, &dec)?;
    let params = bound_params(&gamma, lam, eta, eps)?;
    let tgt = target_gram(&parity);
    let dense = gamma.dense();
    let mut runs = Vec::new();
    for i in 0..10u64 {
        let gram = gen_feasible_gram(&dec, eps, seed.wrapping_add(i))?;
        runs.push(output_condition_check(&dense, &params, &gram, &tgt)?);
    }
    out.push(merge_worst("output-condition", runs));
    Ok(out)
}

/// Permutation chains, hat identities, the two-rung matrix, step norms,
/// the answer-overlap bound, and the closing arithmetic. Defaults N = 4,
/// kappa = 4, T = 1.
pub fn perm_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    let n = cfg.n.unwrap_or(4);
    let kappa = cfg.kappa.unwrap_or(4.0);
    let spec = PermSpec::new(n)?;
    let chains = perm_chains(&spec)?;

    let mut out = Vec::new();
    out.push(check_subset_chain(&chains));

    let order_levels = if n <= 4 { n } else { 2 };
    let mut order_dev = 0.0f64;
    for t in 1..=order_levels {
        order_dev = order_dev.max(b_generator_defect(&spec, t)?);
    }
    out.push(SuiteReport::from_checks(
        "captured-generators",
        vec![CheckRecord::new(
            "first-slot-spans-match-any-slot",
            order_dev,
            1e-10,
        )
        .with_note(format!("compared at t = 1..={order_levels}"))],
    ));

    out.push(check_perm_proj_with(&chains));

    let gamma = perm_mla_with(&chains, kappa)?;
    let dim = spec.count();
    let completeness = gamma.eigenspace(0).projector()
        .add(&gamma.eigenspace(1).projector())
        .sub(&CMatrix::identity(dim))
        .max_abs();
    let delta = perm_v_state(&spec, &[], &[]).expect("empty constraints");
    let fixed = {
        let image = gamma.dense().apply(&delta);
        image
            .iter()
            .zip(&delta)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max)
    };
    let mut commute = 0.0f64;
    let lam1 = gamma.eigenspace(1).projector();
    for t in 0..=n {
        let p = chains.a_chain[t].projector();
        commute = commute.max(crate::linalg::spectral_norm(
            &lam1.mul(&p).sub(&p.mul(&lam1)),
        ));
    }
    let mut mla_checks = vec![
        CheckRecord::new("rungs-resolve-the-identity", completeness, 1e-9),
        CheckRecord::new("uniform-state-fixed", fixed, 1e-10),
        CheckRecord::new("gamma-commutes-with-levels", commute, 1e-9),
    ];
    if n <= 4 {
        let embedded = perm_mla_embedded(&spec, kappa)?;
        let pdist = InputDistribution::uniform(spec.problem());
        let pchain = space_chain(&pdist, spec.problem())?;
        let full = validate_mla(&embedded, &pchain, spec.problem())?;
        for c in full.checks {
            mla_checks.push(CheckRecord::new(
                format!("function-space-{}", c.name),
                c.max_violation,
                c.tol,
            ));
        }
    }
    out.push(SuiteReport::from_checks("perm-mla", mla_checks));

    let steps = if n <= 4 { n } else { 2 };
    let mut within_one = 0.0f64;
    let mut within_ceiling = 0.0f64;
    for t in 1..=steps {
        let norm = perm_step_norm_with(&spec, &chains, t)?;
        within_one = within_one.max(norm - 1.0);
        let ceiling = perm_step_bound(n, t).unwrap_or(1.0).min(1.0);
        within_ceiling = within_ceiling.max(norm - ceiling);
    }
    out.push(SuiteReport::from_checks(
        "perm-step",
        vec![
            CheckRecord::new("step-norm-within-one", within_one.max(0.0), 1e-9),
            CheckRecord::new("step-norm-within-cited-ceiling", within_ceiling.max(0.0), 1e-9)
                .with_note(format!("checked at t = 1..={steps}; vacuous ceilings clamp to 1")),
        ],
    ));

    let big_t = cfg.t.unwrap_or(1).min((n - 1) / 2);
    out.push(perm_eta_with(&spec, &chains, big_t)?);

    let closing = perm_success_bound(1000, 10)?;
    out.push(verdicts_as_suite("perm-success", &closing));
    Ok(out)
}
