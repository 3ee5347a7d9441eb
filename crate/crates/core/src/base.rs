//! Descriptors for the finite-dimensional ordered complex Banach spaces the
//! toolkit works over: lattice l_p spaces, Schatten classes S_p^m, and custom
//! polyhedral cones. Each descriptor knows its norm, its positive cone, its
//! dual cone and its involution.

use crate::linalg::{
    flatten_mat, reshape_vec, Complex64, ComplexMatrix, Involution, LinalgError, LeveledElement,
    Result, C_ZERO,
};
use num_complex::ComplexFloat;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Norm exponent in [1, inf]. Serialized as a JSON number, or as the string
/// "inf" for the operator-norm end of the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PExp(pub f64);

impl PExp {
    pub const ONE: PExp = PExp(1.0);
    pub const TWO: PExp = PExp(2.0);
    pub const INF: PExp = PExp(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(PExp(p))
        } else {
            Err(LinalgError::InvalidP(p))
        }
    }

    pub fn is_inf(&self) -> bool {
        self.0.is_infinite()
    }

    /// Hoelder conjugate, exact at the common endpoints.
    pub fn conjugate(&self) -> PExp {
        if self.is_inf() {
            PExp::ONE
        } else if self.0 == 1.0 {
            PExp::INF
        } else if self.0 == 2.0 {
            PExp::TWO
        } else {
            PExp(self.0 / (self.0 - 1.0))
        }
    }
}

impl Serialize for PExp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for PExp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::Number(n) => {
                let p = n.as_f64().ok_or_else(|| D::Error::custom("bad exponent"))?;
                PExp::new(p).map_err(|e| D::Error::custom(e.to_string()))
            }
            serde_json::Value::String(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                Ok(PExp::INF)
            }
            _ => Err(D::Error::custom("exponent must be a number >= 1 or \"inf\"")),
        }
    }
}

/// A complex coordinate vector serialized as [[re, im], ...].
pub type JsonVector = Vec<[f64; 2]>;

pub fn vec_to_json(v: &[Complex64]) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vec_from_json(v: &JsonVector) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

/// Base-space descriptor. The JSON form is the external interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BaseSpace {
    /// Complexified lattice l_p^dim with optional coordinate weights.
    LatticeLp {
        p: PExp,
        dim: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Schatten class S_p^m, coordinates are the row-major matrix entries.
    Schatten { p: PExp, m: usize },
    /// Polyhedral cone inside l_p^dim with explicit generators.
    Custom {
        p: PExp,
        dim: usize,
        cone_generators: Vec<JsonVector>,
        dual_generators: Vec<JsonVector>,
    },
}

impl BaseSpace {
    pub fn lattice(p: PExp, dim: usize) -> Self {
        BaseSpace::LatticeLp { p, dim, weights: None }
    }

    pub fn schatten(p: PExp, m: usize) -> Self {
        BaseSpace::Schatten { p, m }
    }

    pub fn custom(
        p: PExp,
        dim: usize,
        cone_generators: Vec<Vec<Complex64>>,
        dual_generators: Vec<Vec<Complex64>>,
    ) -> Self {
        BaseSpace::Custom {
            p,
            dim,
            cone_generators: cone_generators.iter().map(|v| vec_to_json(v)).collect(),
            dual_generators: dual_generators.iter().map(|v| vec_to_json(v)).collect(),
        }
    }

    /// Ambient complex dimension.
    pub fn dim(&self) -> usize {
        match self {
            BaseSpace::LatticeLp { dim, .. } => *dim,
            BaseSpace::Schatten { m, .. } => m * m,
            BaseSpace::Custom { dim, .. } => *dim,
        }
    }

    pub fn p(&self) -> PExp {
        match self {
            BaseSpace::LatticeLp { p, .. } => *p,
            BaseSpace::Schatten { p, .. } => *p,
            BaseSpace::Custom { p, .. } => *p,
        }
    }

    pub fn matrix_size(&self) -> Option<usize> {
        match self {
            BaseSpace::Schatten { m, .. } => Some(*m),
            _ => None,
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, BaseSpace::LatticeLp { .. })
    }

    pub fn is_schatten(&self) -> bool {
        matches!(self, BaseSpace::Schatten { .. })
    }

    pub fn involution(&self) -> Involution {
        match self {
            BaseSpace::Schatten { .. } => Involution::MatrixAdjoint,
            _ => Involution::CoordinateConjugation,
        }
    }

    /// Cone generators as coordinate vectors. For lattices these are the
    /// standard basis; for Schatten models a mesh of rank-one projectors
    /// (membership itself goes through the exact PSD oracle).
    pub fn cone_generators(&self) -> Vec<Vec<Complex64>> {
        match self {
            BaseSpace::LatticeLp { dim, .. } => standard_basis(*dim),
            BaseSpace::Schatten { m, .. } => rank_one_mesh(*m, 4 * m * m, 424242),
            BaseSpace::Custom { cone_generators, .. } => {
                cone_generators.iter().map(vec_from_json).collect()
            }
        }
    }

    pub fn dual_generators(&self) -> Vec<Vec<Complex64>> {
        match self {
            BaseSpace::LatticeLp { dim, .. } => standard_basis(*dim),
            BaseSpace::Schatten { m, .. } => rank_one_mesh(*m, 4 * m * m, 171717),
            BaseSpace::Custom { dual_generators, .. } => {
                dual_generators.iter().map(vec_from_json).collect()
            }
        }
    }

    /// True when the cone generators are linearly independent, which makes the
    /// generated-cone decomposition unique.
    pub fn has_independent_generators(&self) -> bool {
        match self {
            BaseSpace::LatticeLp { .. } => true,
            BaseSpace::Schatten { .. } => false,
            BaseSpace::Custom { cone_generators, dim, .. } => {
                let gens: Vec<Vec<Complex64>> = cone_generators.iter().map(vec_from_json).collect();
                gens.len() <= *dim && matrix_rank(&gens, *dim) == gens.len()
            }
        }
    }

    /// The base norm of a coordinate vector.
    pub fn base_norm(&self, v: &[Complex64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector length {} does not match space dimension {}",
                v.len(),
                self.dim()
            )));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        match self {
            BaseSpace::LatticeLp { p, weights, .. } => {
                Ok(weighted_lp(v, *p, weights.as_deref()))
            }
            BaseSpace::Schatten { p, .. } => reshape_vec(v)?.schatten_norm(p.0),
            BaseSpace::Custom { p, .. } => Ok(weighted_lp(v, *p, None)),
        }
    }

    /// Exact membership test for the base cone.
    pub fn base_cone_member(&self, v: &[Complex64], tol: f64) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        match self {
            BaseSpace::LatticeLp { .. } => v
                .iter()
                .all(|z| z.im.abs() <= tol && z.re >= -tol),
            BaseSpace::Schatten { .. } => {
                let m = match reshape_vec(v) {
                    Ok(m) => m,
                    Err(_) => return false,
                };
                if m.hermitian_defect() > tol {
                    return false;
                }
                let h = m.add(&m.adjoint()).scale(Complex64::new(0.5, 0.0));
                matches!(h.min_eigenvalue(), Ok(l) if l >= -tol)
            }
            BaseSpace::Custom { dual_generators, .. } => dual_generators
                .iter()
                .all(|f| pair(&vec_from_json(f), v).re() >= -tol),
        }
    }

    pub fn involution_apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.involution().apply(v)
    }

    pub fn is_hermitian_element(&self, x: &LeveledElement, tol: f64) -> bool {
        x.is_hermitian(self.involution(), tol)
    }

    /// The dual space descriptor under the bilinear coordinate pairing.
    pub fn dual(&self) -> Result<BaseSpace> {
        match self {
            BaseSpace::LatticeLp { p, dim, weights } => {
                if weights.is_some() {
                    return Err(LinalgError::DimensionMismatch(
                        "dual descriptors for weighted lattices are not supported".into(),
                    ));
                }
                Ok(BaseSpace::lattice(p.conjugate(), *dim))
            }
            BaseSpace::Schatten { p, m } => Ok(BaseSpace::schatten(p.conjugate(), *m)),
            BaseSpace::Custom { p, dim, cone_generators, dual_generators } => {
                Ok(BaseSpace::Custom {
                    p: p.conjugate(),
                    dim: *dim,
                    cone_generators: dual_generators.clone(),
                    dual_generators: cone_generators.clone(),
                })
            }
        }
    }

    /// A functional f with pair(f, v) = base_norm(v) and dual norm one.
    /// Returns the zero functional for v = 0.
    pub fn norming_functional(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let norm = self.base_norm(v)?;
        if norm == 0.0 {
            return Ok(vec![C_ZERO; self.dim()]);
        }
        match self {
            BaseSpace::Schatten { p, .. } => {
                let m = reshape_vec(v)?;
                Ok(flatten_mat(&schatten_norming(&m, *p, norm).conj()))
            }
            BaseSpace::LatticeLp { p, weights: None, .. } | BaseSpace::Custom { p, .. } => {
                Ok(lattice_norming(v, *p, norm))
            }
            BaseSpace::LatticeLp { .. } => Err(LinalgError::DimensionMismatch(
                "norming functionals for weighted lattices are not supported".into(),
            )),
        }
    }

    pub fn dual_norm(&self, f: &[Complex64]) -> Result<f64> {
        self.dual()?.base_norm(f)
    }

    // --- samplers -----------------------------------------------------------

    pub fn random_vector(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..self.dim())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Random vector fixed by the involution.
    pub fn random_hermitian(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let v = self.random_vector(rng);
        let vs = self.involution_apply(&v);
        v.iter().zip(&vs).map(|(a, b)| (a + b) * 0.5).collect()
    }

    /// Random member of the base cone.
    pub fn random_cone_member(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        match self {
            BaseSpace::LatticeLp { dim, .. } => (0..*dim)
                .map(|_| Complex64::new(rng.gen_range(0.0..1.0), 0.0))
                .collect(),
            BaseSpace::Schatten { m, .. } => {
                let g = ComplexMatrix::from_fn(*m, *m, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                flatten_mat(&g.adjoint().mul(&g))
            }
            BaseSpace::Custom { cone_generators, dim, .. } => {
                let mut v = vec![C_ZERO; *dim];
                for g in cone_generators {
                    let c = rng.gen_range(0.0..1.0);
                    for (vi, gi) in v.iter_mut().zip(vec_from_json(g)) {
                        *vi += gi * c;
                    }
                }
                v
            }
        }
    }
}

/// Bilinear pairing sum_c f_c v_c. For Schatten coordinates this is exactly
/// the trace duality tr(F V^T).
pub fn pair(f: &[Complex64], v: &[Complex64]) -> Complex64 {
    f.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn standard_basis(d: usize) -> Vec<Vec<Complex64>> {
    (0..d)
        .map(|k| {
            let mut v = vec![C_ZERO; d];
            v[k] = Complex64::new(1.0, 0.0);
            v
        })
        .collect()
}

/// Deterministic mesh of rank-one projectors uu* used as Schatten cone
/// sampling directions.
fn rank_one_mesh(m: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count + m);
    // Basis projectors first.
    for k in 0..m {
        let mut v = vec![C_ZERO; m * m];
        v[k * m + k] = Complex64::new(1.0, 0.0);
        out.push(v);
    }
    for _ in 0..count {
        let mut u: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-12 {
            continue;
        }
        for z in u.iter_mut() {
            *z /= n;
        }
        let mut proj = vec![C_ZERO; m * m];
        for k in 0..m {
            for l in 0..m {
                proj[k * m + l] = u[k] * u[l].conj();
            }
        }
        out.push(proj);
    }
    out
}

fn weighted_lp(v: &[Complex64], p: PExp, weights: Option<&[f64]>) -> f64 {
    let w = |k: usize| weights.map_or(1.0, |w| w[k]);
    if p.is_inf() {
        v.iter()
            .enumerate()
            .map(|(k, z)| w(k) * z.abs())
            .fold(0.0, f64::max)
    } else {
        v.iter()
            .enumerate()
            .map(|(k, z)| w(k) * z.abs().powf(p.0))
            .sum::<f64>()
            .powf(1.0 / p.0)
    }
}

fn lattice_norming(v: &[Complex64], p: PExp, norm: f64) -> Vec<Complex64> {
    let d = v.len();
    let phase = |z: Complex64| if z.abs() == 0.0 { C_ZERO } else { z.conj() / z.abs() };
    if p.is_inf() {
        let k = (0..d)
            .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())
            .unwrap();
        let mut f = vec![C_ZERO; d];
        f[k] = phase(v[k]);
        f
    } else if p.0 == 1.0 {
        v.iter().map(|z| phase(*z)).collect()
    } else {
        v.iter()
            .map(|z| phase(*z) * (z.abs() / norm).powf(p.0 - 1.0))
            .collect()
    }
}

/// Norming functional of a matrix under the sesquilinear convention
/// tr(g* V) = norm; callers conjugate for the bilinear pairing.
fn schatten_norming(v: &ComplexMatrix, p: PExp, norm: f64) -> ComplexMatrix {
    let _m = v.rows;
    let (u, sigma, vt) = v.svd();
    let coeff = |k: usize, s: f64| -> f64 {
        if s <= 1e-14 * norm.max(1.0) {
            0.0
        } else if p.is_inf() {
            if k == 0 { 1.0 } else { 0.0 }
        } else if p.0 == 1.0 {
            1.0
        } else {
            (s / norm).powf(p.0 - 1.0)
        }
    };
    // g = U diag(coeff) V†.
    let mut d = ComplexMatrix::zeros(sigma.len(), sigma.len());
    for (k, s) in sigma.iter().enumerate() {
        d.set(k, k, Complex64::new(coeff(k, *s), 0.0));
    }
    let g = u.mul(&d).mul(&vt);
    // Roundoff guard: keep the dual norm certifiably at most one.
    let q = p.conjugate();
    let gq = g.schatten_norm(q.0).unwrap_or(1.0);
    if gq > 1.0 {
        g.scale(Complex64::new(1.0 / gq, 0.0))
    } else {
        g
    }
}

fn matrix_rank(vectors: &[Vec<Complex64>], dim: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = ComplexMatrix::from_fn(vectors.len(), dim, |i, j| vectors[i][j]);
    m.singular_values()
        .iter()
        .filter(|s| **s > 1e-10 * m.max_abs().max(1.0))
        .count()
}

// ---------------------------------------------------------------------------
// Scalar (level-1) regularity
// ---------------------------------------------------------------------------

/// Witness pair for scalar normality or generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarWitness {
    pub x: JsonVector,
    pub y: JsonVector,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarRegularityReport {
    pub normality_lower_bound: f64,
    pub generation_upper_bound: f64,
    pub normality_witness: Option<ScalarWitness>,
    pub generation_witness: Option<ScalarWitness>,
    pub seed: u64,
    pub budget: usize,
}

/// Estimate level-1 normality and generation constants on hermitian inputs.
///
/// Normality lower bound: the best found ||a - b|| / ||a + b|| over cone pairs.
/// Generation upper bound: the worst over sampled hermitian unit x of the best
/// found ||y|| with y >= +-x. Lattice and Schatten models use the closed-form
/// witness y = |x|; polyhedral models use projected coordinate descent.
pub fn scalar_regularity(space: &BaseSpace, budget: usize, seed: u64) -> ScalarRegularityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = budget.max(1);

    let mut nor_best = 0.0;
    let mut nor_wit = None;
    let mut gen_worst = 0.0;
    let mut gen_wit = None;

    for _ in 0..budget {
        // Normality: ratio ||a-b|| / ||a+b|| over random cone pairs.
        let a = space.random_cone_member(&mut rng);
        let b = space.random_cone_member(&mut rng);
        let diff: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ns = space.base_norm(&sum).unwrap_or(0.0);
        if ns > 1e-12 {
            let ratio = space.base_norm(&diff).unwrap_or(0.0) / ns;
            if ratio > nor_best {
                nor_best = ratio;
                nor_wit = Some(ScalarWitness {
                    x: vec_to_json(&diff),
                    y: vec_to_json(&sum),
                    ratio,
                });
            }
        }

        // Generation: best y >= +-x for a random hermitian unit x.
        let mut x = space.random_hermitian(&mut rng);
        let nx = space.base_norm(&x).unwrap_or(0.0);
        if nx < 1e-12 {
            continue;
        }
        for z in x.iter_mut() {
            *z /= nx;
        }
        if let Some(y) = generation_witness_vector(space, &x, &mut rng) {
            let ny = space.base_norm(&y).unwrap_or(f64::INFINITY);
            if ny > gen_worst {
                gen_worst = ny;
                gen_wit = Some(ScalarWitness { x: vec_to_json(&x), y: vec_to_json(&y), ratio: ny });
            }
        }
    }

    ScalarRegularityReport {
        normality_lower_bound: nor_best,
        generation_upper_bound: gen_worst,
        normality_witness: nor_wit,
        generation_witness: gen_wit,
        seed,
        budget,
    }
}

/// Closed-form or searched witness y with y >= +-x in the base cone.
pub fn generation_witness_vector(
    space: &BaseSpace,
    x: &[Complex64],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Complex64>> {
    match space {
        BaseSpace::LatticeLp { .. } => {
            Some(x.iter().map(|z| Complex64::new(z.abs(), 0.0)).collect())
        }
        BaseSpace::Schatten { .. } => {
            let h = reshape_vec(x).ok()?;
            let sqrt = h.mul(&h).psd_sqrt().ok()?;
            Some(flatten_mat(&sqrt))
        }
        BaseSpace::Custom { cone_generators, dim, .. } => {
            // Projected coordinate descent over generator coefficients,
            // minimizing ||y|| subject to y +- x in the cone.
            let gens: Vec<Vec<Complex64>> = cone_generators.iter().map(vec_from_json).collect();
            let tol = 1e-9;
            let feasible = |c: &[f64]| -> Option<Vec<Complex64>> {
                let mut y = vec![C_ZERO; *dim];
                for (ck, g) in c.iter().zip(&gens) {
                    for (yi, gi) in y.iter_mut().zip(g) {
                        *yi += gi * *ck;
                    }
                }
                let plus: Vec<Complex64> = y.iter().zip(x).map(|(a, b)| a + b).collect();
                let minus: Vec<Complex64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                if space.base_cone_member(&plus, tol) && space.base_cone_member(&minus, tol) {
                    Some(y)
                } else {
                    None
                }
            };
            let mut best: Option<(f64, Vec<Complex64>)> = None;
            for _ in 0..8 {
                // Start from a large multiple of a random positive combination.
                let mut c: Vec<f64> = (0..gens.len()).map(|_| rng.gen_range(0.5..1.5)).collect();
                let mut scale = 1.0;
                loop {
                    let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
                    if feasible(&scaled).is_some() || scale > 1e6 {
                        break;
                    }
                    scale *= 2.0;
                }
                for v in c.iter_mut() {
                    *v *= scale;
                }
                if feasible(&c).is_none() {
                    continue;
                }
                // Coordinate descent: shrink each coefficient while feasible.
                for _ in 0..60 {
                    let mut improved = false;
                    for k in 0..c.len() {
                        for factor in [0.5, 0.8, 0.95] {
                            let mut trial = c.clone();
                            trial[k] *= factor;
                            if feasible(&trial).is_some() {
                                c = trial;
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        break;
                    }
                }
                if let Some(y) = feasible(&c) {
                    let ny = space.base_norm(&y).unwrap_or(f64::INFINITY);
                    if best.as_ref().map_or(true, |(b, _)| ny < *b) {
                        best = Some((ny, y));
                    }
                }
            }
            best.map(|(_, y)| y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn base_norm_examples() {
        let linf2 = BaseSpace::lattice(PExp::INF, 2);
        assert_abs_diff_eq!(
            linf2.base_norm(&[c(1.0, 0.0), c(-2.0, 0.0)]).unwrap(),
            2.0
        );
        let l1 = BaseSpace::lattice(PExp::ONE, 2);
        assert_abs_diff_eq!(l1.base_norm(&[c(3.0, 4.0), C_ZERO]).unwrap(), 5.0);
        let sinf2 = BaseSpace::schatten(PExp::INF, 2);
        // Nilpotent [[0,1],[0,0]] has operator norm 1.
        assert_abs_diff_eq!(
            sinf2
                .base_norm(&[C_ZERO, c(1.0, 0.0), C_ZERO, C_ZERO])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn cone_membership_examples() {
        let l = BaseSpace::lattice(PExp::TWO, 2);
        assert!(l.base_cone_member(&[C_ZERO, C_ZERO], 1e-9));
        assert!(!l.base_cone_member(&[c(1.0, 0.0), c(-0.5, 0.0)], 1e-9));
        let s = BaseSpace::schatten(PExp::INF, 2);
        assert!(s.base_cone_member(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)], 1e-9));
    }

    #[test]
    fn cone_closed_under_addition_and_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for space in [
            BaseSpace::lattice(PExp::ONE, 3),
            BaseSpace::schatten(PExp::TWO, 2),
            wedge_space(),
        ] {
            for _ in 0..50 {
                let u = space.random_cone_member(&mut rng);
                let v = space.random_cone_member(&mut rng);
                let (lam, mu) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
                let comb: Vec<Complex64> = u
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| a * lam + b * mu)
                    .collect();
                let scale = 1e-9 * (1.0 + lam + mu) * 4.0;
                assert!(space.base_cone_member(&comb, scale));
                assert!(space.base_cone_member(&space.involution_apply(&u), 1e-9));
            }
        }
    }

    #[test]
    fn lattice_norm_equals_modulus_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let space = BaseSpace::lattice(p, 4);
            for _ in 0..30 {
                let v = space.random_vector(&mut rng);
                let modulus: Vec<Complex64> =
                    v.iter().map(|z| c(z.abs(), 0.0)).collect();
                assert_abs_diff_eq!(
                    space.base_norm(&v).unwrap(),
                    space.base_norm(&modulus).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn hermitian_elements() {
        let l = BaseSpace::lattice(PExp::TWO, 2);
        let x = LeveledElement::from_coeffs(1, 2, vec![vec![c(1.0, 0.0), c(2.0, 0.0)]]).unwrap();
        assert!(l.is_hermitian_element(&x, 1e-12));
        let e12 = ComplexMatrix::matrix_unit(2, 0, 1);
        let y = LeveledElement::elementary(&e12, &[c(1.0, 0.0), C_ZERO]);
        assert!(!l.is_hermitian_element(&y, 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let coeffs = (0..4)
                .map(|_| (0..2).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            let z = LeveledElement::from_coeffs(2, 2, coeffs).unwrap();
            let herm = z.add(&z.adjoint(l.involution())).scale(c(0.5, 0.0));
            assert!(l.is_hermitian_element(&herm, 1e-12));
        }
    }

    #[test]
    fn norming_functionals_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for space in [
            BaseSpace::lattice(PExp::ONE, 3),
            BaseSpace::lattice(PExp::TWO, 3),
            BaseSpace::lattice(PExp::INF, 3),
            BaseSpace::schatten(PExp::ONE, 2),
            BaseSpace::schatten(PExp::TWO, 2),
            BaseSpace::schatten(PExp::INF, 2),
        ] {
            for _ in 0..25 {
                let v = space.random_vector(&mut rng);
                let f = space.norming_functional(&v).unwrap();
                let norm = space.base_norm(&v).unwrap();
                assert_abs_diff_eq!(pair(&f, &v).re(), norm, epsilon = 1e-8 * norm.max(1.0));
                assert!(pair(&f, &v).im().abs() < 1e-8 * norm.max(1.0));
                assert!(space.dual_norm(&f).unwrap() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn dual_of_dual_is_identity() {
        for space in [
            BaseSpace::lattice(PExp::ONE, 3),
            BaseSpace::lattice(PExp::TWO, 3),
            BaseSpace::lattice(PExp::INF, 3),
            BaseSpace::schatten(PExp::TWO, 2),
            wedge_space(),
        ] {
            assert_eq!(space.dual().unwrap().dual().unwrap(), space);
        }
    }

    #[test]
    fn json_round_trip_is_identity() {
        let spaces = vec![
            serde_json::json!({"model": "lattice_lp", "p": 2.0, "dim": 3}),
            serde_json::json!({"model": "lattice_lp", "p": "inf", "dim": 2}),
            serde_json::json!({"model": "schatten", "p": 1.0, "m": 2}),
            serde_json::json!({
                "model": "custom", "p": 2.0, "dim": 2,
                "cone_generators": [[[1.0, 0.0], [0.0, 0.0]]],
                "dual_generators": [[[1.0, 0.0], [0.0, 0.0]]]
            }),
        ];
        for v in spaces {
            let space: BaseSpace = serde_json::from_value(v.clone()).unwrap();
            let back = serde_json::to_value(&space).unwrap();
            assert_eq!(back, v);
        }
    }

    /// The pointed cone {(x, y, z) : z >= |x|, y >= 0} inside l_2^3.
    pub fn wedge_space() -> BaseSpace {
        let g = vec![
            vec![c(1.0, 0.0), C_ZERO, c(1.0, 0.0)],
            vec![c(-1.0, 0.0), C_ZERO, c(1.0, 0.0)],
            vec![C_ZERO, c(1.0, 0.0), C_ZERO],
        ];
        BaseSpace::custom(PExp::TWO, 3, g.clone(), g)
    }

    #[test]
    fn scalar_regularity_lattice_is_one() {
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let space = BaseSpace::lattice(p, 3);
            let rep = scalar_regularity(&space, 200, 7);
            assert!(rep.normality_lower_bound <= 1.0 + 1e-9);
            // The closed-form witness y = |x| achieves generation at exactly 1.
            assert_abs_diff_eq!(rep.generation_upper_bound, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn scalar_regularity_schatten_is_one() {
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let space = BaseSpace::schatten(p, 2);
            let rep = scalar_regularity(&space, 300, 11);
            assert!(rep.normality_lower_bound <= 1.0 + 1e-3);
            assert!(rep.normality_lower_bound > 0.5);
            assert!((rep.generation_upper_bound - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn scalar_regularity_polyhedral_wedge() {
        let rep = scalar_regularity(&wedge_space(), 400, 13);
        assert!(rep.normality_lower_bound <= 1.0 + 1e-3);
        assert!(rep.normality_lower_bound > 0.5);
        // Generation is best-effort for polyhedral cones; the witness must
        // still dominate.
        assert!(rep.generation_upper_bound >= 1.0 - 1e-9);
    }
}
