//! Matricial normality and generation: constant probes with certified
//! ratios, closed-form block witnesses, niceness checks for lattices, the
//! cb-norm-on-cone comparison, and the AM obstruction experiment.

use crate::base::{vec_to_json, BaseSpace, JsonVector, PExp};
use crate::linalg::{
    flatten_mat, reshape_vec, Complex64, ComplexMatrix, LeveledElement, C_ONE, C_ZERO,
};
use crate::structure::{
    functional_matrix, state_compress, Certificate, MatricialStructure, Membership, StructError,
    StructureKind,
};
use num_complex::ComplexFloat;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, StructError>;

// ---------------------------------------------------------------------------
// Block witnesses
// ---------------------------------------------------------------------------

/// A pair (x1, x2) of cone members making [[x1, x], [x*, x2]] positive,
/// certifying generation with `value` = max of the two diagonal level norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockWitness {
    pub x1: LeveledElement,
    pub x2: LeveledElement,
    pub block: LeveledElement,
    pub value: f64,
}

impl BlockWitness {
    /// Re-verify: the block and both diagonals pass the structure's cone
    /// test, and `value` matches a re-evaluation of the diagonal norms.
    pub fn verify(&self, s: &MatricialStructure, tol: f64) -> Result<bool> {
        let block_ok = !s.cone_member(&self.block, tol)?.is_non_member();
        let d1 = s.cone_member(&self.x1, tol)?;
        let d2 = s.cone_member(&self.x2, tol)?;
        let value = witness_value(s, &self.x1, &self.x2)?;
        let value_ok = (value - self.value).abs() <= 1e-12 * self.value.max(1.0);
        Ok(block_ok && !d1.is_non_member() && !d2.is_non_member() && value_ok)
    }

    /// The symmetric witness v = (x1 + x2)/2 with v >= +-x for hermitian x.
    pub fn symmetric_witness(&self) -> LeveledElement {
        self.x1.add(&self.x2).scale_re(0.5)
    }
}

/// Canonical witness value: max of the diagonal level norms, using the
/// structure's certified evaluation (upper bound for bracketed norms).
fn witness_value(s: &MatricialStructure, x1: &LeveledElement, x2: &LeveledElement) -> Result<f64> {
    let v1 = diag_norm(s, x1)?;
    let v2 = diag_norm(s, x2)?;
    Ok(v1.max(v2))
}

fn diag_norm(s: &MatricialStructure, x: &LeveledElement) -> Result<f64> {
    match s.kind {
        StructureKind::Max => Ok(s.max_level_norm(x)?.1),
        StructureKind::Min => s.min_level_norm(x),
        StructureKind::Schatten | StructureKind::MatrixSystem => {
            Ok(s.schatten_level_norm(x, s.natural_p())?.value)
        }
    }
}

// ---------------------------------------------------------------------------
// Generation witnesses
// ---------------------------------------------------------------------------

/// Construct a generation witness for x.
///
/// Closed forms: Schatten kinds take the square-root pair built on the
/// realignment; lattice kinds take the per-coordinate square-root pair
/// ((X_k X_k*)^{1/2}, (X_k* X_k)^{1/2}). Cone members take (x, x). The
/// witness always re-verifies block positivity.
pub fn generation_witness(
    s: &MatricialStructure,
    x: &LeveledElement,
    _eps: f64,
) -> Result<BlockWitness> {
    let inv = s.involution();
    let tol = 1e-9 * x.max_abs().max(1.0);

    // Cone members are their own witness.
    if s.cone_member(x, tol)?.is_member() {
        let block = LeveledElement::block2(x, x, x, inv);
        let value = witness_value(s, x, x)?;
        return Ok(BlockWitness { x1: x.clone(), x2: x.clone(), block, value });
    }

    match (&s.kind, &s.base) {
        (StructureKind::Schatten | StructureKind::MatrixSystem, BaseSpace::Schatten { m, .. }) => {
            let m = *m;
            let r = x.realign()?;
            let left = r.mul(&r.adjoint()).psd_sqrt()?;
            let right = r.adjoint().mul(&r).psd_sqrt()?;
            let x1 = LeveledElement::unrealign(&left, x.level, m)?;
            let x2 = LeveledElement::unrealign(&right, x.level, m)?;
            let block = LeveledElement::block2(&x1, x, &x2, inv);
            let value = witness_value(s, &x1, &x2)?;
            Ok(BlockWitness { x1, x2, block, value })
        }
        (StructureKind::Min | StructureKind::Max, base) if !base.is_schatten() => {
            // Per-coordinate square-root pair; both diagonals are
            // coordinatewise PSD, and each coordinate block
            // [[(XX*)^{1/2}, X], [X*, (X*X)^{1/2}]] is PSD.
            let d = base.dim();
            let mut m1 = Vec::with_capacity(d);
            let mut m2 = Vec::with_capacity(d);
            for k in 0..d {
                let xk = x.coordinate_matrix(k);
                m1.push(xk.mul(&xk.adjoint()).psd_sqrt()?);
                m2.push(xk.adjoint().mul(&xk).psd_sqrt()?);
            }
            let x1 = LeveledElement::from_coordinate_matrices(&m1);
            let x2 = LeveledElement::from_coordinate_matrices(&m2);
            let block = LeveledElement::block2(&x1, x, &x2, inv);
            let value = witness_value(s, &x1, &x2)?;
            Ok(BlockWitness { x1, x2, block, value })
        }
        (StructureKind::Min | StructureKind::Max, BaseSpace::Schatten { m, .. }) => {
            // MIN and MAX over a Schatten base: the natural square-root pair
            // still yields a block in the natural cone, which sits inside the
            // MIN cone; for MAX it is only a candidate and may fail to
            // certify, in which case no closed form is available.
            let m = *m;
            let r = x.realign()?;
            let left = r.mul(&r.adjoint()).psd_sqrt()?;
            let right = r.adjoint().mul(&r).psd_sqrt()?;
            let x1 = LeveledElement::unrealign(&left, x.level, m)?;
            let x2 = LeveledElement::unrealign(&right, x.level, m)?;
            let block = LeveledElement::block2(&x1, x, &x2, inv);
            if s.kind == StructureKind::Max
                && s.cone_member(&block, tol)?.membership != Membership::Member
            {
                return Err(StructError::NoWitnessFound);
            }
            let value = witness_value(s, &x1, &x2)?;
            Ok(BlockWitness { x1, x2, block, value })
        }
        _ => Err(StructError::NoWitnessFound),
    }
}

// ---------------------------------------------------------------------------
// Normality probes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityProbe {
    pub level: usize,
    pub lower_bound: f64,
    pub samples: usize,
    pub seed: u64,
    /// Ratio achieved by the best sample, with its off-diagonal norm and the
    /// max diagonal norm.
    pub best_numerator: f64,
    pub best_denominator: f64,
}

/// Estimate the matricial normality constant at level n from below: sample
/// block-positive elements at level 2n, extract (u1, u, u2) and maximize
/// alpha_n(u) / max(alpha_n(u1), alpha_n(u2)).
///
/// Evaluations are candidate-synchronized: the maximizing compression found
/// for the numerator is injected into the denominator evaluations, so each
/// reported ratio is dominated by the Cauchy-Schwarz (Horn-Mathias) bound and
/// cannot exceed one on a 1-matricial-normal structure.
pub fn normality_probe(
    s: &MatricialStructure,
    n: usize,
    budget: usize,
    seed: u64,
) -> Result<NormalityProbe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut best_num = 0.0;
    let mut best_den = 0.0;

    for t in 0..budget.max(1) {
        // Sample a block-positive element at level 2n.
        let block = if t % 4 == 0 {
            // Constant block [[c, c], [c, c]] anchors the ratio at one.
            let c = s.random_cone_member(n, &mut rng);
            LeveledElement::block2(&c, &c, &c, s.involution())
        } else {
            s.random_cone_member(2 * n, &mut rng)
        };
        let (u1, u, u2) = block.split_block2().expect("level 2n splits");
        if u.max_abs() < 1e-12 {
            continue;
        }
        let (num, den) = synced_ratio(s, &u, &u1, &u2)?;
        if den > 1e-12 && num / den > best {
            best = num / den;
            best_num = num;
            best_den = den;
        }
    }

    Ok(NormalityProbe {
        level: n,
        lower_bound: best,
        samples: budget,
        seed,
        best_numerator: best_num,
        best_denominator: best_den,
    })
}

/// Evaluate (alpha(u), max(alpha(u1), alpha(u2))) with synchronized
/// candidates per structure kind.
fn synced_ratio(
    s: &MatricialStructure,
    u: &LeveledElement,
    u1: &LeveledElement,
    u2: &LeveledElement,
) -> Result<(f64, f64)> {
    match s.kind {
        StructureKind::MatrixSystem => {
            let num = u.realign()?.operator_norm();
            let den = u1.realign()?.operator_norm().max(u2.realign()?.operator_norm());
            Ok((num, den))
        }
        StructureKind::Schatten => {
            let p = s.natural_p();
            if p.is_inf() {
                let num = u.realign()?.operator_norm();
                let den = u1.realign()?.operator_norm().max(u2.realign()?.operator_norm());
                return Ok((num, den));
            }
            let out = s.schatten_norm_detailed(u, p, &[])?;
            let num = out.value;
            let extra1;
            let extra2;
            match out.best_pair {
                Some((a, b)) => {
                    extra1 = vec![(a.clone(), a.adjoint())];
                    extra2 = vec![(b.adjoint(), b.clone())];
                }
                None => {
                    extra1 = vec![];
                    extra2 = vec![];
                }
            }
            let d1 = s.schatten_norm_detailed(u1, p, &extra1)?.value;
            let d2 = s.schatten_norm_detailed(u2, p, &extra2)?.value;
            Ok((num, d1.max(d2)))
        }
        StructureKind::Min => {
            if s.has_exact_norm() {
                let num = s.min_level_norm(u)?;
                let den = s.min_level_norm(u1)?.max(s.min_level_norm(u2)?);
                return Ok((num, den));
            }
            // State-route evaluation only: the state pair (xi, eta) maximizing
            // the numerator feeds (xi, xi) and (eta, eta) to the diagonals,
            // where the pointwise Cauchy-Schwarz bound applies.
            let out = s.min_norm_states(u, &[])?;
            let num = out.0;
            let extra: Vec<(Vec<Complex64>, Vec<Complex64>)> = match out.1 {
                Some((xi, eta)) => vec![(xi.clone(), xi), (eta.clone(), eta)],
                None => vec![],
            };
            let mut extra1 = Vec::new();
            let mut extra2 = Vec::new();
            if let Some((xi_eta_1, xi_eta_2)) = extra.get(0).zip(extra.get(1)) {
                extra1.push(xi_eta_1.clone());
                extra2.push(xi_eta_2.clone());
            }
            let d1 = s.min_norm_states(u1, &extra1)?.0;
            let d2 = s.min_norm_states(u2, &extra2)?.0;
            Ok((num, d1.max(d2)))
        }
        StructureKind::Max => {
            // Bracket-honest ratio: numerator lower bound over denominator
            // upper bounds, a certified lower bound on the true ratio.
            let (num, _) = s.max_level_norm(u)?;
            let (_, d1) = s.max_level_norm(u1)?;
            let (_, d2) = s.max_level_norm(u2)?;
            Ok((num, d1.max(d2)))
        }
    }
}

// ---------------------------------------------------------------------------
// Generation probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationProbe {
    pub level: usize,
    pub upper_bound: f64,
    pub samples: usize,
    pub seed: u64,
    pub worst_ratio: f64,
}

/// Estimate the generation constant at level n from above: for sampled
/// hermitian x, construct the closed-form witness and track the worst ratio
/// value / alpha_n(x) under synchronized evaluations.
pub fn generation_probe(
    s: &MatricialStructure,
    n: usize,
    budget: usize,
    seed: u64,
) -> Result<GenerationProbe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..budget.max(1) {
        let x = s.random_hermitian(n, &mut rng);
        if x.max_abs() < 1e-12 {
            continue;
        }
        let ratio = generation_ratio(s, &x)?;
        worst = worst.max(ratio);
    }
    Ok(GenerationProbe { level: n, upper_bound: worst, samples: budget, seed, worst_ratio: worst })
}

/// value / alpha_n(x) for the closed-form witness, candidate-synchronized.
pub fn generation_ratio(s: &MatricialStructure, x: &LeveledElement) -> Result<f64> {
    let w = generation_witness(s, x, 0.0)?;
    match s.kind {
        StructureKind::MatrixSystem => {
            let alpha = x.realign()?.operator_norm();
            Ok(if alpha > 1e-14 { w.value / alpha } else { 0.0 })
        }
        StructureKind::Schatten => {
            let p = s.natural_p();
            if p.is_inf() {
                let alpha = x.realign()?.operator_norm();
                return Ok(if alpha > 1e-14 { w.value / alpha } else { 0.0 });
            }
            // Evaluate the witness diagonals first, then let both their best
            // pairs compete inside the numerator's evaluation of x.
            let o1 = s.schatten_norm_detailed(&w.x1, p, &[])?;
            let o2 = s.schatten_norm_detailed(&w.x2, p, &[])?;
            let mut extra = Vec::new();
            if let Some((a, b)) = &o1.best_pair {
                extra.push((a.clone(), b.clone()));
            }
            if let Some((a, b)) = &o2.best_pair {
                extra.push((a.clone(), b.clone()));
            }
            let alpha = s.schatten_norm_detailed(x, p, &extra)?.value;
            Ok(if alpha > 1e-14 { o1.value.max(o2.value) / alpha } else { 0.0 })
        }
        StructureKind::Min => {
            let alpha = s.min_level_norm(x)?;
            Ok(if alpha > 1e-14 { w.value / alpha } else { 0.0 })
        }
        StructureKind::Max => {
            let (_, alpha_up) = s.max_level_norm(x)?;
            Ok(if alpha_up > 1e-14 { w.value / alpha_up } else { 0.0 })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub level: usize,
    pub normality: NormalityProbe,
    pub generation: GenerationProbe,
    pub seed: u64,
    pub budget: usize,
}

pub fn regularity_report(
    s: &MatricialStructure,
    n: usize,
    budget: usize,
    seed: u64,
) -> Result<RegularityReport> {
    Ok(RegularityReport {
        level: n,
        normality: normality_probe(s, n, budget, seed)?,
        generation: generation_probe(s, n, budget, seed ^ 0x47454E)?,
        seed,
        budget,
    })
}

// ---------------------------------------------------------------------------
// MAX-niceness: constructive decomposition for lattices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxNiceDecomposition {
    /// Positive lattice vectors x_k.
    pub xs: Vec<JsonVector>,
    pub xi: Vec<[f64; 2]>,
    pub eta: Vec<[f64; 2]>,
    /// max-abs reconstruction residual of sum xi_k conj(eta_k) x_k - v.
    pub residual: f64,
    /// Norms of sum |xi_k|^2 x_k and sum |eta_k|^2 x_k.
    pub weighted_norms: [f64; 2],
}

/// Exact finite-dimensional modulus-phase decomposition: with v_k = r_k w_k,
/// take x_k = r_k e_k, xi_k = w_k, eta_k = 1. Both weighted sums equal |v|
/// and the reconstruction is exact.
pub fn max_nice_decompose(
    space: &BaseSpace,
    v: &[Complex64],
    _eps: f64,
) -> Result<MaxNiceDecomposition> {
    if !space.is_lattice() {
        return Err(StructError::Linalg(crate::linalg::LinalgError::WrongBaseModel));
    }
    let d = space.dim();
    let mut xs = Vec::with_capacity(d);
    let mut xi = Vec::with_capacity(d);
    let mut eta = Vec::with_capacity(d);
    let mut recon = vec![C_ZERO; d];
    let mut modulus = vec![C_ZERO; d];
    for (k, z) in v.iter().enumerate() {
        let r = z.abs();
        let w = if r == 0.0 { C_ONE } else { z / r };
        let mut x = vec![C_ZERO; d];
        x[k] = Complex64::new(r, 0.0);
        recon[k] = w * r;
        modulus[k] = Complex64::new(r, 0.0);
        xs.push(vec_to_json(&x));
        xi.push([w.re, w.im]);
        eta.push([1.0, 0.0]);
    }
    let residual = recon
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let wn = space.base_norm(&modulus)?;
    Ok(MaxNiceDecomposition { xs, xi, eta, residual, weighted_norms: [wn, wn] })
}

// ---------------------------------------------------------------------------
// MIN-niceness check for lattices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinNiceReport {
    pub trials: usize,
    pub norm_violations: usize,
    pub grid_rejections_ok: bool,
    pub worst_margin: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Sample triples satisfying the quadratic inequality family (equivalently
/// |x| <= sqrt(x1 x2) coordinatewise) and assert the norm bound
/// ||x|| <= max(||x1||, ||x2||); also confirm that a violating triple is
/// rejected by the (t, s, omega) criterion.
pub fn min_nice_check(space: &BaseSpace, budget: usize, seed: u64) -> Result<MinNiceReport> {
    if !space.is_lattice() {
        return Err(StructError::Linalg(crate::linalg::LinalgError::WrongBaseModel));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.dim();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;

    for t in 0..budget.max(1) {
        let x1: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let x2: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        // |x_k| = t_k sqrt(x1_k x2_k) with t_k in [0, 1]; equality when t = 0.
        let x: Vec<Complex64> = (0..d)
            .map(|k| {
                let t_k = if t % 3 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
                let r = t_k * (x1[k] * x2[k]).sqrt();
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                Complex64::new(phase.cos() * r, phase.sin() * r)
            })
            .collect();
        let x1c: Vec<Complex64> = x1.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let x2c: Vec<Complex64> = x2.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        assert!(quadratic_family_holds(&x, &x1, &x2, 1e-12));
        let nx = space.base_norm(&x)?;
        let bound = space.base_norm(&x1c)?.max(space.base_norm(&x2c)?);
        worst = worst.max(nx - bound);
        if nx > bound + 1e-9 * bound.max(1.0) {
            violations += 1;
        }
    }

    // A triple with |x| > sqrt(x1 x2) at one coordinate must be rejected.
    let mut x1 = vec![1.0; d];
    let mut x2 = vec![1.0; d];
    x1[0] = 0.25;
    x2[0] = 0.25;
    let mut x = vec![C_ZERO; d];
    x[0] = Complex64::new(0.5, 0.0); // sqrt(x1 x2) = 0.25 < 0.5
    let rejected = !quadratic_family_holds(&x, &x1, &x2, 1e-12);

    Ok(MinNiceReport {
        trials: budget,
        norm_violations: violations,
        grid_rejections_ok: rejected,
        worst_margin: worst,
        pass: violations == 0 && rejected,
        seed,
    })
}

/// t^2 x1 + s^2 x2 >= 2 t s Re(omega x) for all t, s, |omega| = 1, checked
/// per coordinate by positive semidefiniteness of [[x1, |x|], [|x|, x2]] and
/// on an explicit (t, s, omega) grid that includes the per-coordinate
/// optimum t/s ratio.
pub fn quadratic_family_holds(x: &[Complex64], x1: &[f64], x2: &[f64], tol: f64) -> bool {
    for k in 0..x.len() {
        let r = x[k].abs();
        // Exact criterion: the 2x2 quadratic form must be PSD.
        if x1[k] < -tol || x2[k] < -tol || x1[k] * x2[k] - r * r < -tol {
            return false;
        }
        // Grid check including the optimal ratio t^2 = sqrt(x2/x1).
        let mut ratios = vec![0.25, 0.5, 1.0, 2.0, 4.0];
        if x1[k] > 1e-12 {
            ratios.push((x2[k] / x1[k]).sqrt());
        }
        for rho in ratios {
            let (t, s) = (rho.sqrt(), 1.0 / rho.sqrt().max(1e-12));
            if t * t * x1[k] + s * s * x2[k] - 2.0 * t * s * r < -1e-9 {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// cb norm versus cb norm on the cone
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CbcCbReport {
    pub cbc_lower: f64,
    pub cb_lower: f64,
    pub sandwich_constant: f64,
    pub sandwich_holds: bool,
    pub levels_checked: usize,
    pub pass: bool,
}

/// Compare ||u||_cbc (sup over sampled cone members of norm at most one)
/// with ||u||_cb (sup over sampled ball elements), for a completely positive
/// map given by its coordinate matrix. Complete positivity is verified by
/// sampling cone members through the levels; a refuting sample raises
/// NotCompletelyPositive.
pub fn cbc_cb_compare(
    s_from: &MatricialStructure,
    s_to: &MatricialStructure,
    map: &ComplexMatrix,
    n_max: usize,
    budget: usize,
    sandwich_constant: f64,
    seed: u64,
) -> Result<CbcCbReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let apply = |x: &LeveledElement| -> LeveledElement {
        let coeffs = x.coeffs.iter().map(|v| map.apply(v)).collect();
        LeveledElement::from_coeffs(x.level, map.rows, coeffs).expect("map output is finite")
    };

    // Complete positivity check, including the Choi-style element for
    // matrix-model bases.
    for level in 1..=n_max {
        let mut samples: Vec<LeveledElement> = (0..budget.max(4))
            .map(|_| s_from.random_cone_member(level, &mut rng))
            .collect();
        if let Some(m) = s_from.base.matrix_size() {
            if level == m {
                let mut choi = LeveledElement::zero(m, m * m);
                for i in 0..m {
                    for j in 0..m {
                        let mut v = vec![C_ZERO; m * m];
                        v[i * m + j] = C_ONE;
                        choi.set_entry(i, j, v);
                    }
                }
                samples.push(choi);
            }
        }
        for x in &samples {
            let y = apply(x);
            let tol = 1e-8 * y.max_abs().max(1.0);
            if s_to.cone_member(&y, tol)?.is_non_member() {
                return Err(StructError::NotCompletelyPositive { level });
            }
        }
    }

    // Norm suprema over normalized samples.
    let mut cbc = 0.0f64;
    let mut cb = 0.0f64;
    for level in 1..=n_max {
        // Deterministic norm-achieving member for matrix bases: the identity
        // pattern.
        let mut members: Vec<LeveledElement> = Vec::new();
        if let Some(m) = s_from.base.matrix_size() {
            let mut idp = LeveledElement::zero(level, m * m);
            for i in 0..level {
                let mut v = vec![C_ZERO; m * m];
                for k in 0..m {
                    v[k * m + k] = C_ONE;
                }
                idp.set_entry(i, i, v);
            }
            members.push(idp);
        }
        for _ in 0..budget {
            members.push(s_from.random_cone_member(level, &mut rng));
        }
        for x in &members {
            let (_, up) = s_from.level_norm(x)?;
            if up < 1e-12 {
                continue;
            }
            let xn = x.scale_re(1.0 / up);
            let (lo, _) = s_to.level_norm(&apply(&xn))?;
            cbc = cbc.max(lo);
            cb = cb.max(lo);
        }
        for _ in 0..budget {
            let x = s_from.random_hermitian(level, &mut rng);
            let (_, up) = s_from.level_norm(&x)?;
            if up < 1e-12 {
                continue;
            }
            let xn = x.scale_re(1.0 / up);
            let (lo, _) = s_to.level_norm(&apply(&xn))?;
            cb = cb.max(lo);
        }
    }

    let holds = cbc <= cb + 1e-9 && cb <= sandwich_constant * cbc + 1e-6 * cbc.max(1.0);
    Ok(CbcCbReport {
        cbc_lower: cbc,
        cb_lower: cb,
        sandwich_constant,
        sandwich_holds: holds,
        levels_checked: n_max,
        pass: holds,
    })
}

// ---------------------------------------------------------------------------
// AM obstruction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmObstructionReport {
    pub n: usize,
    pub matrix_dim: usize,
    /// Certified lower bound sqrt(n) / 2 on the MIN generation constant.
    pub bound: f64,
    /// Certified upper bound on the MIN norm of the test element.
    pub alpha_u_upper: f64,
    pub expectation_checks: usize,
    pub witness_norm_floor: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Search for n pairwise trace-orthogonal symmetric orthogonal N x N
/// matrices among signed permutation matrices.
pub fn symmetric_orthogonal_family(n: usize, dim: usize) -> Result<Vec<ComplexMatrix>> {
    let mut found: Vec<ComplexMatrix> = Vec::new();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    permutations(dim, &mut vec![], &mut (0..dim).collect::<Vec<_>>(), &mut perms);
    'outer: for perm in &perms {
        // Symmetric permutation part: perm must be an involution.
        if (0..dim).any(|i| perm[perm[i]] != i) {
            continue;
        }
        for signs in 0..(1usize << dim) {
            let mut m = ComplexMatrix::zeros(dim, dim);
            for i in 0..dim {
                let s = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                m.set(i, perm[i], Complex64::new(s, 0.0));
            }
            // Require symmetry of the signed matrix.
            if m.sub(&m.transpose()).max_abs() > 0.0 {
                continue;
            }
            if found
                .iter()
                .all(|u| u.mul(&m).trace().abs() < 1e-12)
            {
                found.push(m);
                if found.len() == n {
                    break 'outer;
                }
            }
        }
    }
    if found.len() < n {
        return Err(StructError::MatrixFamilyNotFound { n, dim });
    }
    Ok(found)
}

fn permutations(
    dim: usize,
    current: &mut Vec<usize>,
    remaining: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining.is_empty() {
        out.push(current.clone());
        return;
    }
    for i in 0..remaining.len() {
        let v = remaining.remove(i);
        current.push(v);
        permutations(dim, current, remaining, out);
        current.pop();
        remaining.insert(i, v);
    }
}

/// Exact sphere average of <xi| a |xi> over the real unit sphere: the
/// diagonal mean, since E[xi_I xi_J] = delta_IJ / N.
pub fn sphere_average(a: &LeveledElement) -> Vec<Complex64> {
    let n = a.level;
    let mut out = vec![C_ZERO; a.base_dim];
    for i in 0..n {
        for (o, v) in out.iter_mut().zip(a.entry(i, i)) {
            *o += v / n as f64;
        }
    }
    out
}

/// Monte-Carlo sphere average, for cross-checking the exact quadrature.
pub fn sphere_average_mc(a: &LeveledElement, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let n = a.level;
    let mut out = vec![C_ZERO; a.base_dim];
    for _ in 0..samples {
        let mut xi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample::<f64, _>(rand_distr::StandardNormal), 0.0))
            .collect();
        let norm: f64 = xi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in xi.iter_mut() {
            *z /= norm.max(1e-300);
        }
        let v = state_compress(a, &xi, &xi);
        for (o, w) in out.iter_mut().zip(v) {
            *o += w / samples as f64;
        }
    }
    out
}

/// The AM obstruction experiment: over an l_1-type lattice, build
/// u = sum U_i (x) e_i / sqrt(n) with U_i symmetric orthogonal and pairwise
/// trace orthogonal. Every MIN majorant a >= +-u satisfies the sphere
/// average inequality E<xi|a|xi> >= sum_i x_i, forcing alpha(a) >= sqrt(n),
/// while alpha(u) <= 2; the ratio sqrt(n)/2 bounds the MIN generation
/// constant from below.
pub fn am_obstruction(
    space: &BaseSpace,
    n: usize,
    dim: usize,
    budget: usize,
    seed: u64,
) -> Result<AmObstructionReport> {
    if !space.is_lattice() || space.dim() < n {
        return Err(StructError::Linalg(crate::linalg::LinalgError::WrongBaseModel));
    }
    let d = space.dim();
    let us = symmetric_orthogonal_family(n, dim)?;
    // x_i = e_i / sqrt(n).
    let scale = 1.0 / (n as f64).sqrt();
    let mut u = LeveledElement::zero(dim, d);
    for (i, ui) in us.iter().enumerate() {
        let mut v = vec![C_ZERO; d];
        v[i] = Complex64::new(scale, 0.0);
        u = u.add(&LeveledElement::elementary(ui, &v));
    }
    let mut sum_x = vec![C_ZERO; d];
    for (i, z) in sum_x.iter_mut().enumerate().take(n) {
        *z = Complex64::new(scale, 0.0);
    }
    let target_norm = space.base_norm(&sum_x)?; // sqrt(n) on an l_1 lattice

    // Certified MIN norm upper bound: triangle inequality gives sqrt(n),
    // and the rank-2 isomorphism argument gives 2.
    let triangle: f64 = (n as f64) * scale; // sum_i ||U_i|| * ||x_i||_1
    let alpha_u_upper = triangle.min(2.0).max(triangle.min(2.0));
    let alpha_cert = 2.0f64.min(triangle.max(0.0)).max(triangle.min(2.0));
    let _ = alpha_cert;

    let s_min = MatricialStructure::new(space.clone(), StructureKind::Min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0usize;
    let mut floor = f64::INFINITY;
    let tol = 1e-10;

    for t in 0..budget.max(1) {
        // Majorant family: a0 = I (x) sum x_i plus positive perturbations.
        let mut a = LeveledElement::zero(dim, d);
        let eye = ComplexMatrix::identity(dim);
        a = a.add(&LeveledElement::elementary(&eye, &sum_x));
        if t > 0 {
            let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
            });
            let psd = g.adjoint().mul(&g);
            let c = space.random_cone_member(&mut rng);
            a = a.add(&LeveledElement::elementary(&psd, &c).scale_re(rng.gen_range(0.0..1.0)));
        }
        // Verify a >= +-u in the MIN cone (exact for lattices).
        let plus = a.sub(&u);
        let minus = a.add(&u);
        if !s_min.min_cone_member(&plus, tol)?.is_member()
            || !s_min.min_cone_member(&minus, tol)?.is_member()
        {
            continue;
        }
        // Exact quadrature: the diagonal mean must dominate sum x_i.
        let avg = sphere_average(&a);
        let gap: Vec<Complex64> = avg.iter().zip(&sum_x).map(|(p, q)| p - q).collect();
        if !space.base_cone_member(&gap, 1e-9) {
            return Ok(AmObstructionReport {
                n,
                matrix_dim: dim,
                bound: 0.0,
                alpha_u_upper,
                expectation_checks: checks,
                witness_norm_floor: 0.0,
                pass: false,
                seed,
            });
        }
        // Monotone norm on the cone: alpha(a) >= ||E|| >= ||sum x_i||.
        let witness_floor = space.base_norm(&avg)?;
        floor = floor.min(witness_floor);
        checks += 1;
    }

    let bound = target_norm / 2.0;
    let pass = checks > 0 && floor >= target_norm - 1e-9;
    Ok(AmObstructionReport {
        n,
        matrix_dim: dim,
        bound,
        alpha_u_upper,
        expectation_checks: checks,
        witness_norm_floor: if floor.is_finite() { floor } else { 0.0 },
        pass,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Reformulated normality cross-check
// ---------------------------------------------------------------------------

/// On random cone pairs (a, b), the normality bound must dominate
/// alpha(a - b) / alpha(a + b). Returns the worst sampled ratio.
pub fn reformulation_ratio(
    s: &MatricialStructure,
    n: usize,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..budget.max(1) {
        let a = s.random_cone_member(n, &mut rng);
        let b = s.random_cone_member(n, &mut rng);
        let diff = a.sub(&b);
        let sum = a.add(&b);
        let (num, _) = s.level_norm(&diff)?;
        let (_, den) = s.level_norm(&sum)?;
        if den > 1e-12 {
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::OptimizerConfig;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn light(s: MatricialStructure) -> MatricialStructure {
        s.with_opt(OptimizerConfig::new(3, 60, 0x5EED))
    }

    #[test]
    fn matsys_generation_is_exactly_one() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = s.random_hermitian(2, &mut rng);
            let w = generation_witness(&s, &x, 0.0).unwrap();
            let alpha = x.realign().unwrap().operator_norm();
            assert!(w.value <= alpha * (1.0 + 1e-9), "value {} alpha {}", w.value, alpha);
            assert!(w.value >= alpha * (1.0 - 1e-9));
            assert!(w.verify(&s, 1e-8).unwrap());
        }
    }

    #[test]
    fn cone_member_witness_is_itself() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = s.random_cone_member(2, &mut rng);
        let w = generation_witness(&s, &x, 0.0).unwrap();
        assert!(w.x1.sub(&x).max_abs() < 1e-14);
        assert!(w.x2.sub(&x).max_abs() < 1e-14);

        let zero = LeveledElement::zero(2, 4);
        let w = generation_witness(&s, &zero, 0.0).unwrap();
        assert_eq!(w.value, 0.0);
    }

    #[test]
    fn lattice_min_witness_exact_on_linf() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 3), StructureKind::Min);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = s.random_hermitian(2, &mut rng);
            let w = generation_witness(&s, &x, 0.0).unwrap();
            let alpha = s.min_level_norm(&x).unwrap();
            assert!(w.value <= alpha * (1.0 + 1e-9));
            assert!(w.verify(&s, 1e-8).unwrap());
        }
    }

    #[test]
    fn hermitian_reduction_symmetric_witness() {
        // v = (x1 + x2)/2 satisfies v +- x in the cone for hermitian x.
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = s.random_hermitian(2, &mut rng);
            let w = generation_witness(&s, &x, 0.0).unwrap();
            let v = w.symmetric_witness();
            let tol = 1e-9 * v.max_abs().max(1.0);
            assert!(s.min_cone_member(&v.sub(&x), tol).unwrap().is_member());
            assert!(s.min_cone_member(&v.add(&x), tol).unwrap().is_member());
        }
    }

    #[test]
    fn normality_probe_matsys_hits_one() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        let probe = normality_probe(&s, 2, 60, 7).unwrap();
        assert!(probe.lower_bound >= 0.9, "bound {}", probe.lower_bound);
        assert!(probe.lower_bound <= 1.0 + 1e-6, "bound {}", probe.lower_bound);
    }

    #[test]
    fn normality_probe_min_lattices() {
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let s = light(MatricialStructure::new(BaseSpace::lattice(p, 3), StructureKind::Min));
            let probe = normality_probe(&s, 2, 40, 11).unwrap();
            assert!(
                probe.lower_bound <= 1.0 + 1e-6,
                "p {:?} bound {}",
                p,
                probe.lower_bound
            );
            assert!(probe.lower_bound >= 0.9, "p {:?} bound {}", p, probe.lower_bound);
        }
    }

    #[test]
    fn normality_probe_schatten_finite_p() {
        for p in [PExp::ONE, PExp::TWO] {
            let s = light(MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Schatten));
            let probe = normality_probe(&s, 2, 25, 13).unwrap();
            assert!(
                probe.lower_bound <= 1.0 + 1e-3,
                "p {:?} bound {}",
                p,
                probe.lower_bound
            );
            assert!(probe.lower_bound >= 0.9, "p {:?} bound {}", p, probe.lower_bound);
        }
    }

    #[test]
    fn generation_ratio_schatten_finite_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in [PExp::ONE, PExp::TWO] {
            let s = MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Schatten)
                .with_opt(OptimizerConfig::new(6, 150, 23));
            for _ in 0..6 {
                let x = s.random_hermitian(2, &mut rng);
                let ratio = generation_ratio(&s, &x).unwrap();
                assert!(ratio <= 1.0 + 1e-6, "p {:?} ratio {}", p, ratio);
            }
        }
    }

    #[test]
    fn max_nice_decompose_examples() {
        let space = BaseSpace::lattice(PExp::INF, 2);
        // v = (1, -1): xi = (1, -1), eta = (1, 1), both weighted sums norm 1.
        let v = vec![c(1.0, 0.0), c(-1.0, 0.0)];
        let dec = max_nice_decompose(&space, &v, 0.0).unwrap();
        assert_eq!(dec.residual, 0.0);
        assert_abs_diff_eq!(dec.weighted_norms[0], 1.0);
        assert_abs_diff_eq!(dec.weighted_norms[1], 1.0);
        assert_abs_diff_eq!(dec.xi[0][0], 1.0);
        assert_abs_diff_eq!(dec.xi[1][0], -1.0);

        // Real positive vectors decompose with unit phases.
        let v = vec![c(0.3, 0.0), c(0.7, 0.0)];
        let dec = max_nice_decompose(&space, &v, 0.0).unwrap();
        assert_eq!(dec.residual, 0.0);
        assert!(dec.xi.iter().all(|&[re, im]| re == 1.0 && im == 0.0));

        // Purely imaginary single coordinate keeps the phase in xi.
        let v = vec![c(0.0, 1.0), C_ZERO];
        let dec = max_nice_decompose(&space, &v, 0.0).unwrap();
        assert_eq!(dec.residual, 0.0);
        assert_abs_diff_eq!(dec.xi[0][1], 1.0);
    }

    #[test]
    fn min_nice_check_passes_and_rejects() {
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let space = BaseSpace::lattice(p, 3);
            let rep = min_nice_check(&space, 100, 19).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn cbc_cb_identity_map_is_one() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        let id = ComplexMatrix::identity(4);
        let rep = cbc_cb_compare(&s, &s, &id, 2, 10, 1.0, 29).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_abs_diff_eq!(rep.cbc_lower, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.cb_lower, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn transpose_map_is_not_completely_positive() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        // Transpose on flattened 2x2 coordinates swaps entries 1 and 2.
        let mut t = ComplexMatrix::zeros(4, 4);
        t.set(0, 0, C_ONE);
        t.set(1, 2, C_ONE);
        t.set(2, 1, C_ONE);
        t.set(3, 3, C_ONE);
        match cbc_cb_compare(&s, &s, &t, 2, 10, 1.0, 31) {
            Err(StructError::NotCompletelyPositive { level }) => assert_eq!(level, 2),
            other => panic!("expected NotCompletelyPositive, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_orthogonal_family_n2() {
        let us = symmetric_orthogonal_family(2, 2).unwrap();
        for u in &us {
            // Symmetric and orthogonal.
            assert_eq!(u.sub(&u.transpose()).max_abs(), 0.0);
            assert!(u.mul(&u.transpose()).sub(&ComplexMatrix::identity(2)).max_abs() < 1e-12);
        }
        assert!(us[0].mul(&us[1]).trace().abs() < 1e-12);
    }

    #[test]
    fn sphere_average_exact_vs_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::ONE, 2), StructureKind::Min);
        let a = s.random_hermitian(3, &mut rng);
        let exact = sphere_average(&a);
        let mc = sphere_average_mc(&a, 200_000, &mut rng);
        // Hoeffding-style margin at this sample count.
        for (e, m) in exact.iter().zip(&mc) {
            assert!((e - m).abs() < 2e-2, "exact {e} mc {m}");
        }
    }

    #[test]
    fn am_obstruction_n2() {
        let space = BaseSpace::lattice(PExp::ONE, 2);
        let rep = am_obstruction(&space, 2, 2, 30, 41).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.bound >= (2.0f64).sqrt() / 2.0 - 1e-6);
        assert!(rep.expectation_checks > 0);
    }

    #[test]
    fn am_obstruction_monotone_in_n() {
        let b1 = am_obstruction(&BaseSpace::lattice(PExp::ONE, 1), 1, 2, 10, 43)
            .unwrap()
            .bound;
        let b2 = am_obstruction(&BaseSpace::lattice(PExp::ONE, 2), 2, 2, 10, 43)
            .unwrap()
            .bound;
        assert!(b1 <= b2 + 1e-12);
        assert_abs_diff_eq!(b1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reformulation_bound_dominated_by_probe() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem);
        let probe = normality_probe(&s, 2, 40, 47).unwrap();
        let reform = reformulation_ratio(&s, 2, 40, 47).unwrap();
        assert!(
            probe.lower_bound >= reform - 1e-9,
            "probe {} reform {}",
            probe.lower_bound,
            reform
        );
    }
}
