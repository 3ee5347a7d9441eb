//! Level-n norms and cones for the four matricial structure kinds, plus the
//! Ruan-axiom and cone-axiom property runners.

use crate::base::{pair, BaseSpace, PExp};
use crate::linalg::{
    Complex64, ComplexMatrix, Involution, LinalgError, LeveledElement, C_ONE, C_ZERO,
};
use crate::opt::{maximize, OptimizerConfig};
use num_complex::ComplexFloat;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("operation requires kind {expected} but the structure is {got}")]
    KindMismatch { expected: String, got: String },
    #[error("input must be hermitian for this operation")]
    NonHermitianInput,
    #[error("no generation witness found within the search budget")]
    NoWitnessFound,
    #[error("no symmetric orthogonal trace-orthogonal family of size {n} found in dimension {dim}")]
    MatrixFamilyNotFound { n: usize, dim: usize },
    #[error("map is not completely positive: a level-{level} cone member maps outside the target cone")]
    NotCompletelyPositive { level: usize },
    #[error("no positive completion found within the budget; the order may fail to be majorizing here")]
    Infeasible,
    #[error("unknown experiment {0}")]
    UnknownExperiment(String),
}

pub type Result<T> = std::result::Result<T, StructError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Min,
    Max,
    Schatten,
    MatrixSystem,
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StructureKind::Min => "min",
            StructureKind::Max => "max",
            StructureKind::Schatten => "schatten",
            StructureKind::MatrixSystem => "matsys",
        };
        f.write_str(s)
    }
}

/// A (base space, kind) pair with optimizer configuration. `norm_scale`
/// multiplies every level norm; cones are unaffected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatricialStructure {
    pub base: BaseSpace,
    pub kind: StructureKind,
    pub opt: OptimizerConfig,
    pub norm_scale: f64,
}

impl MatricialStructure {
    pub fn new(base: BaseSpace, kind: StructureKind) -> Self {
        Self { base, kind, opt: OptimizerConfig::default(), norm_scale: 1.0 }
    }

    pub fn with_opt(mut self, opt: OptimizerConfig) -> Self {
        self.opt = opt;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.norm_scale = scale;
        self
    }

    pub fn involution(&self) -> Involution {
        self.base.involution()
    }

    fn require_kind(&self, allowed: &[StructureKind], expected: &str) -> Result<()> {
        if allowed.contains(&self.kind) {
            Ok(())
        } else {
            Err(StructError::KindMismatch {
                expected: expected.into(),
                got: self.kind.to_string(),
            })
        }
    }

    fn require_matrix_base(&self) -> Result<usize> {
        self.base.matrix_size().ok_or(StructError::Linalg(LinalgError::WrongBaseModel))
    }

    /// The Schatten exponent the natural structure carries.
    pub fn natural_p(&self) -> PExp {
        match self.kind {
            StructureKind::MatrixSystem => PExp::INF,
            _ => self.base.p(),
        }
    }

    /// The dual structure: MIN and MAX swap, the Schatten kinds self-pair
    /// with the conjugate exponent.
    pub fn dual(&self) -> Result<MatricialStructure> {
        let kind = match self.kind {
            StructureKind::Min => StructureKind::Max,
            StructureKind::Max => StructureKind::Min,
            StructureKind::Schatten => StructureKind::Schatten,
            StructureKind::MatrixSystem => StructureKind::Schatten,
        };
        Ok(MatricialStructure {
            base: self.base.dual()?,
            kind,
            opt: self.opt,
            norm_scale: self.norm_scale,
        })
    }
}

// ---------------------------------------------------------------------------
// Verdicts and certificates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Membership: a PSD matrix witnesses the cone test directly.
    PsdWitness { description: String, min_eigenvalue: f64 },
    /// Membership: coefficient matrices of a generated-cone decomposition.
    Decomposition { coefficients: Vec<ComplexMatrix> },
    /// Non-membership: a dual functional whose pairing matrix has a negative
    /// eigenvalue, together with the violating vector.
    FunctionalSeparator {
        functional: Vec<[f64; 2]>,
        vector: Vec<[f64; 2]>,
        violation: f64,
    },
    /// Non-membership in a MIN cone: a state pair with
    /// eta* reshape(<xi|x|xi>) eta < -tol.
    StateSeparator {
        xi: Vec<[f64; 2]>,
        eta: Vec<[f64; 2]>,
        violation: f64,
    },
    /// Non-membership in a MAX cone: a positive map given by a conjugation
    /// pair (W, transpose flag) under which the image has a negative
    /// eigenvalue.
    PositiveMapFalsifier {
        conjugator: ComplexMatrix,
        transpose_first: bool,
        min_eigenvalue: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub membership: Membership,
    pub certificate: Option<Certificate>,
    pub tol: f64,
}

impl ConeVerdict {
    pub fn member(cert: Certificate, tol: f64) -> Self {
        Self { membership: Membership::Member, certificate: Some(cert), tol }
    }
    pub fn non_member(cert: Certificate, tol: f64) -> Self {
        Self { membership: Membership::NonMember, certificate: Some(cert), tol }
    }
    pub fn undecided(tol: f64) -> Self {
        Self { membership: Membership::Undecided, certificate: None, tol }
    }
    pub fn is_member(&self) -> bool {
        self.membership == Membership::Member
    }
    pub fn is_non_member(&self) -> bool {
        self.membership == Membership::NonMember
    }
}

pub(crate) fn cvec(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

// ---------------------------------------------------------------------------
// Shared evaluation helpers
// ---------------------------------------------------------------------------

/// <xi| x |eta> = sum_{ij} xi_i conj(eta_j) x_{ij}, a base-space vector.
pub fn state_compress(x: &LeveledElement, xi: &[Complex64], eta: &[Complex64]) -> Vec<Complex64> {
    let n = x.level;
    let mut out = vec![C_ZERO; x.base_dim];
    for i in 0..n {
        for j in 0..n {
            let c = xi[i] * eta[j].conj();
            if c == C_ZERO {
                continue;
            }
            for (o, v) in out.iter_mut().zip(x.entry(i, j)) {
                *o += c * v;
            }
        }
    }
    out
}

/// The n x n scalar matrix (pair(f, x_{ij}))_{ij}.
pub fn functional_matrix(x: &LeveledElement, f: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(x.level, x.level, |i, j| pair(f, x.entry(i, j)))
}

fn normalize_c(v: &mut [Complex64]) -> f64 {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 1e-14 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Partial transpose on the level factor of an (n*m) x (n*m) realigned
/// matrix: result[(i,k),(j,l)] = input[(j,k),(i,l)].
pub fn partial_transpose_level(mat: &ComplexMatrix, n: usize, m: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n * m, n * m, |r, c| {
        let (i, k) = (r / m, r % m);
        let (j, l) = (c / m, c % m);
        mat.get(j * m + k, i * m + l)
    })
}

// ---------------------------------------------------------------------------
// MIN structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MinNormOutcome {
    pub value: f64,
    pub exact: bool,
    /// Maximizing state pair, when the optimizer path ran.
    pub best_states: Option<(Vec<Complex64>, Vec<Complex64>)>,
    /// Maximizing dual functional, when the dual path ran.
    pub best_functional: Option<Vec<Complex64>>,
}

impl MatricialStructure {
    /// MIN level norm sup_{xi,eta} base_norm(<xi|x|eta>). Exact closed form
    /// for lattice l_infinity bases and at level one; otherwise the best of a
    /// state-pair optimizer and a dual-functional optimizer, reported as a
    /// certified lower bound.
    pub fn min_level_norm(&self, x: &LeveledElement) -> Result<f64> {
        self.require_kind(&[StructureKind::Min], "min")?;
        Ok(self.min_norm_detailed(x, &[], &[])?.value * self.norm_scale)
    }

    /// MIN norm engine without the scale factor. Extra state pairs and
    /// functionals join the candidate set, which lets callers synchronize
    /// evaluations across related elements.
    pub fn min_norm_detailed(
        &self,
        x: &LeveledElement,
        extra_states: &[(Vec<Complex64>, Vec<Complex64>)],
        extra_functionals: &[Vec<Complex64>],
    ) -> Result<MinNormOutcome> {
        let n = x.level;
        if n == 1 {
            return Ok(MinNormOutcome {
                value: self.base.base_norm(x.entry(0, 0))?,
                exact: true,
                best_states: None,
                best_functional: None,
            });
        }
        // Exact closed form over lattice l_inf: max_k opnorm of the k-th
        // coordinate matrix.
        if let BaseSpace::LatticeLp { p, weights: None, .. } = &self.base {
            if p.is_inf() {
                let value = (0..self.base.dim())
                    .map(|k| x.coordinate_matrix(k).operator_norm())
                    .fold(0.0, f64::max);
                return Ok(MinNormOutcome {
                    value,
                    exact: true,
                    best_states: None,
                    best_functional: None,
                });
            }
        }

        let d = self.base.dim();
        let mut best = 0.0f64;
        let mut best_states: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
        let mut best_functional: Option<Vec<Complex64>> = None;

        // Candidate states: basis pairs, supplied pairs, then the optimizer.
        let mut eval_state = |xi: &[Complex64], eta: &[Complex64], best: &mut f64| {
            if let Ok(v) = self.base.base_norm(&state_compress(x, xi, eta)) {
                if v > *best {
                    *best = v;
                    best_states = Some((xi.to_vec(), eta.to_vec()));
                }
            }
        };
        for i in 0..n {
            for j in 0..n {
                let mut xi = vec![C_ZERO; n];
                xi[i] = C_ONE;
                let mut eta = vec![C_ZERO; n];
                eta[j] = C_ONE;
                eval_state(&xi, &eta, &mut best);
            }
        }
        for (xi, eta) in extra_states {
            let mut xi = xi.clone();
            let mut eta = eta.clone();
            normalize_c(&mut xi);
            normalize_c(&mut eta);
            eval_state(&xi, &eta, &mut best);
        }

        let project = |params: &mut Vec<f64>| {
            let mut vs = crate::opt::unpack_complex(params, &[n, n]);
            normalize_c(&mut vs[0]);
            normalize_c(&mut vs[1]);
            *params = crate::opt::pack_complex(&[&vs[0], &vs[1]]);
        };
        let objective = |params: &[f64]| -> f64 {
            let vs = crate::opt::unpack_complex(params, &[n, n]);
            self.base
                .base_norm(&state_compress(x, &vs[0], &vs[1]))
                .unwrap_or(0.0)
        };
        let (val, pt) = maximize(&self.opt, 0x4D494E, 4 * n, &[], project, objective);
        if val > best {
            let vs = crate::opt::unpack_complex(&pt, &[n, n]);
            best = val;
            best_states = Some((vs[0].clone(), vs[1].clone()));
        }

        // Dual-functional route: sup over the dual unit ball of the operator
        // norm of the pairing matrix.
        let dual = self.base.dual();
        if let Ok(dual_space) = dual {
            let mut eval_f = |f: &[Complex64], best: &mut f64| {
                let nf = dual_space.base_norm(f).unwrap_or(f64::INFINITY);
                if nf <= 1e-14 {
                    return;
                }
                let v = functional_matrix(x, f).operator_norm() / nf.max(1.0);
                if v > *best {
                    *best = v;
                    best_functional = Some(
                        f.iter().map(|z| z / Complex64::new(nf.max(1.0), 0.0)).collect(),
                    );
                }
            };
            for f in extra_functionals {
                eval_f(f, &mut best);
            }
            // Norming functionals of a few compressions seed the search.
            for i in 0..n {
                for j in 0..n {
                    if let Ok(f) = self.base.norming_functional(x.entry(i, j)) {
                        eval_f(&f, &mut best);
                    }
                }
            }
            let project_f = |params: &mut Vec<f64>| {
                let mut vs = crate::opt::unpack_complex(params, &[d]);
                let nf = dual_space.base_norm(&vs[0]).unwrap_or(0.0);
                if nf > 1.0 {
                    for z in vs[0].iter_mut() {
                        *z /= nf;
                    }
                } else if nf < 1e-14 {
                    vs[0][0] = C_ONE;
                }
                *params = crate::opt::pack_complex(&[&vs[0]]);
            };
            let objective_f = |params: &[f64]| -> f64 {
                let vs = crate::opt::unpack_complex(params, &[d]);
                functional_matrix(x, &vs[0]).operator_norm()
            };
            let (val, pt) = maximize(&self.opt, 0x4D464C, 2 * d, &[], project_f, objective_f);
            if val > best {
                let vs = crate::opt::unpack_complex(&pt, &[d]);
                best = val;
                best_functional = Some(vs[0].clone());
            }
        }

        Ok(MinNormOutcome { value: best, exact: false, best_states, best_functional })
    }

    /// MIN cone membership. Exact for finitely generated dual cones (lattice
    /// and custom bases). For Schatten bases, exact PSD and partial-transpose
    /// certificates are tried before a falsification search; UNDECIDED is a
    /// possible verdict there.
    pub fn min_cone_member(&self, x: &LeveledElement, tol: f64) -> Result<ConeVerdict> {
        self.require_kind(&[StructureKind::Min], "min")?;
        min_cone_member_impl(self, x, tol)
    }
}

fn min_cone_member_impl(
    s: &MatricialStructure,
    x: &LeveledElement,
    tol: f64,
) -> Result<ConeVerdict> {
    let n = x.level;
    match &s.base {
        BaseSpace::LatticeLp { .. } | BaseSpace::Custom { .. } => {
            let duals = s.base.dual_generators();
            let mut worst = f64::INFINITY;
            for f in &duals {
                let m = functional_matrix(x, f);
                let h = m.add(&m.adjoint()).scale(Complex64::new(0.5, 0.0));
                let defect = m.hermitian_defect();
                let lam = h.min_eigenvalue()?;
                let effective = if defect > tol { -defect } else { lam };
                worst = worst.min(effective);
                if effective < -tol {
                    // Eigenvector of the most negative eigenvalue.
                    let (vals, vecs) = h.hermitian_eigen()?;
                    let v: Vec<Complex64> = (0..n).map(|i| vecs.get(i, 0)).collect();
                    let _ = vals;
                    return Ok(ConeVerdict::non_member(
                        Certificate::FunctionalSeparator {
                            functional: cvec(f),
                            vector: cvec(&v),
                            violation: effective,
                        },
                        tol,
                    ));
                }
            }
            Ok(ConeVerdict::member(
                Certificate::PsdWitness {
                    description: format!(
                        "all {} dual-generator pairing matrices are PSD",
                        duals.len()
                    ),
                    min_eigenvalue: worst,
                },
                tol,
            ))
        }
        BaseSpace::Schatten { .. } => {
            let m = s.require_matrix_base()?;
            let r = x.realign()?;
            let sym_defect = r.hermitian_defect();
            let scale = r.max_abs().max(1.0);
            // Exact sufficiency 1: realignment PSD (natural cone inside MIN).
            if sym_defect <= tol * scale {
                let h = r.add(&r.adjoint()).scale(Complex64::new(0.5, 0.0));
                let lam = h.min_eigenvalue()?;
                if lam >= -tol {
                    return Ok(ConeVerdict::member(
                        Certificate::PsdWitness {
                            description: "realignment is PSD".into(),
                            min_eigenvalue: lam,
                        },
                        tol,
                    ));
                }
                // Exact sufficiency 2: partial transpose PSD.
                let pt = partial_transpose_level(&h, n, m);
                if pt.hermitian_defect() <= tol * scale {
                    let lam_pt = pt
                        .add(&pt.adjoint())
                        .scale(Complex64::new(0.5, 0.0))
                        .min_eigenvalue()?;
                    if lam_pt >= -tol {
                        return Ok(ConeVerdict::member(
                            Certificate::PsdWitness {
                                description: "partial transpose of the realignment is PSD".into(),
                                min_eigenvalue: lam_pt,
                            },
                            tol,
                        ));
                    }
                }
            }
            // Falsification: minimize eta* reshape(<xi|x|xi>) eta over states.
            let eval = |xi: &[Complex64], eta: &[Complex64]| -> f64 {
                let v = state_compress(x, xi, xi);
                let mat = match crate::linalg::reshape_vec(&v) {
                    Ok(m) => m,
                    Err(_) => return 0.0,
                };
                mat.form(eta, eta).re()
            };
            let mut worst = f64::INFINITY;
            let mut worst_pair: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
            let mut consider = |xi: &[Complex64], eta: &[Complex64], worst: &mut f64| {
                let v = eval(xi, eta);
                if v < *worst {
                    *worst = v;
                    worst_pair = Some((xi.to_vec(), eta.to_vec()));
                }
            };
            for i in 0..n {
                for k in 0..m {
                    let mut xi = vec![C_ZERO; n];
                    xi[i] = C_ONE;
                    let mut eta = vec![C_ZERO; m];
                    eta[k] = C_ONE;
                    consider(&xi, &eta, &mut worst);
                }
            }
            let project = |params: &mut Vec<f64>| {
                let mut vs = crate::opt::unpack_complex(params, &[n, m]);
                normalize_c(&mut vs[0]);
                normalize_c(&mut vs[1]);
                *params = crate::opt::pack_complex(&[&vs[0], &vs[1]]);
            };
            let objective = |params: &[f64]| -> f64 {
                let vs = crate::opt::unpack_complex(params, &[n, m]);
                -eval(&vs[0], &vs[1])
            };
            let (neg_best, pt) = maximize(&s.opt, 0x4D435345, 2 * (n + m), &[], project, objective);
            if -neg_best < worst {
                let vs = crate::opt::unpack_complex(&pt, &[n, m]);
                worst = -neg_best;
                worst_pair = Some((vs[0].clone(), vs[1].clone()));
            }
            if worst < -tol * scale {
                let (xi, eta) = worst_pair.expect("violation implies a recorded pair");
                return Ok(ConeVerdict::non_member(
                    Certificate::StateSeparator {
                        xi: cvec(&xi),
                        eta: cvec(&eta),
                        violation: worst,
                    },
                    tol,
                ));
            }
            // Hermitian defect of the realignment also refutes membership.
            if sym_defect > tol * scale {
                return Ok(ConeVerdict::undecided(tol));
            }
            Ok(ConeVerdict::undecided(tol))
        }
    }
}

// ---------------------------------------------------------------------------
// MAX structure
// ---------------------------------------------------------------------------

impl MatricialStructure {
    /// MAX cone membership for hermitian inputs. Phase 1 is the exact
    /// generated-cone decomposition when the base cone generators are
    /// linearly independent; phase 2 is a falsification search over positive
    /// maps into matrix algebras.
    pub fn max_cone_member(&self, x: &LeveledElement, tol: f64) -> Result<ConeVerdict> {
        self.require_kind(&[StructureKind::Max], "max")?;
        if !self.base.is_hermitian_element(x, tol.max(1e-9) * x.max_abs().max(1.0) * 10.0) {
            return Err(StructError::NonHermitianInput);
        }
        max_cone_member_impl(self, x, tol)
    }

    /// MAX level norm as a certified bracket [lower, upper].
    pub fn max_level_norm(&self, x: &LeveledElement) -> Result<(f64, f64)> {
        self.require_kind(&[StructureKind::Max], "max")?;
        let (lo, up) = max_norm_bracket(self, x)?;
        Ok((lo * self.norm_scale, up * self.norm_scale))
    }
}

fn max_cone_member_impl(
    s: &MatricialStructure,
    x: &LeveledElement,
    tol: f64,
) -> Result<ConeVerdict> {
    let n = x.level;
    let scale = x.max_abs().max(1.0);

    // Phase 1: exact decomposition over independent generators.
    if s.base.has_independent_generators() {
        let gens = s.base.cone_generators();
        let coeffs = solve_generator_decomposition(&gens, x, tol * scale * 100.0);
        match coeffs {
            Some(mats) => {
                let mut worst = f64::INFINITY;
                for (k, a) in mats.iter().enumerate() {
                    let h = a.add(&a.adjoint()).scale(Complex64::new(0.5, 0.0));
                    let defect = a.hermitian_defect();
                    let lam = h.min_eigenvalue()?;
                    let effective = if defect > tol * scale { -defect } else { lam };
                    worst = worst.min(effective);
                    if effective < -tol * scale {
                        // For lattice bases the matching dual generator is a
                        // positive functional falsifier.
                        let cert = if s.base.is_lattice() {
                            let f = &s.base.dual_generators()[k];
                            let (_, vecs) = h.hermitian_eigen()?;
                            let v: Vec<Complex64> = (0..n).map(|i| vecs.get(i, 0)).collect();
                            Certificate::FunctionalSeparator {
                                functional: cvec(f),
                                vector: cvec(&v),
                                violation: effective,
                            }
                        } else {
                            Certificate::PsdWitness {
                                description: format!(
                                    "unique decomposition has a non-PSD coefficient at generator {k}"
                                ),
                                min_eigenvalue: effective,
                            }
                        };
                        return Ok(ConeVerdict::non_member(cert, tol));
                    }
                }
                return Ok(ConeVerdict::member(Certificate::Decomposition { coefficients: mats }, tol));
            }
            None => {
                // Outside the generator span: not in the generated cone.
                return Ok(ConeVerdict::non_member(
                    Certificate::PsdWitness {
                        description: "element lies outside the span of the cone generators".into(),
                        min_eigenvalue: f64::NEG_INFINITY,
                    },
                    tol,
                ));
            }
        }
    }

    // Phase 2: falsification over positive maps, target dimension capped at n.
    if let Some(m) = s.base.matrix_size() {
        let r = x.realign()?;
        let mut rng = ChaCha8Rng::seed_from_u64(s.opt.seed ^ 0x4D4158);
        let attempts = 100;
        for attempt in 0..attempts {
            let (w, transpose_first) = if attempt == 0 {
                (ComplexMatrix::identity(m), false)
            } else if attempt == 1 {
                (ComplexMatrix::identity(m), true)
            } else {
                let j = 1 + (attempt % n.max(1));
                let w = ComplexMatrix::from_fn(m, j, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                (w, attempt % 2 == 1)
            };
            let image = apply_conjugation_map(&r, n, m, &w, transpose_first);
            let h = image.add(&image.adjoint()).scale(Complex64::new(0.5, 0.0));
            let lam = h.min_eigenvalue()?;
            let wn = w.operator_norm().powi(2).max(1e-14);
            if lam / wn < -tol * scale {
                return Ok(ConeVerdict::non_member(
                    Certificate::PositiveMapFalsifier {
                        conjugator: w,
                        transpose_first,
                        min_eigenvalue: lam / wn,
                    },
                    tol,
                ));
            }
        }
        return Ok(ConeVerdict::undecided(tol));
    }

    Ok(ConeVerdict::undecided(tol))
}

/// Solve x = sum_k A_k (x) g_k entrywise by least squares; None if some entry
/// falls outside the generator span beyond `residual_tol`.
fn solve_generator_decomposition(
    gens: &[Vec<Complex64>],
    x: &LeveledElement,
    residual_tol: f64,
) -> Option<Vec<ComplexMatrix>> {
    let n = x.level;
    let d = x.base_dim;
    let r = gens.len();
    // G is d x r; solve G c = v per entry via the normal equations with a
    // pseudo-inverse built from the SVD.
    let g = ComplexMatrix::from_fn(d, r, |c, k| gens[k][c]);
    let (u, sigma, vt) = g.svd();
    let rank_tol = 1e-12 * sigma.first().copied().unwrap_or(1.0).max(1.0);
    let mut mats = vec![ComplexMatrix::zeros(n, n); r];
    for i in 0..n {
        for j in 0..n {
            let v = x.entry(i, j);
            // c = V diag(1/sigma) U† v on the numerical range.
            let utv: Vec<Complex64> = (0..sigma.len())
                .map(|k| (0..d).map(|c| u.get(c, k).conj() * v[c]).sum())
                .collect();
            let mut coeff = vec![C_ZERO; r];
            for k in 0..sigma.len() {
                if sigma[k] > rank_tol {
                    let ck = utv[k] / sigma[k];
                    for t in 0..r {
                        coeff[t] += vt.get(k, t).conj() * ck;
                    }
                }
            }
            // Residual check.
            let mut rec = vec![C_ZERO; d];
            for (t, c) in coeff.iter().enumerate() {
                for (rc, gc) in rec.iter_mut().zip(&gens[t]) {
                    *rc += c * gc;
                }
            }
            let res: f64 = rec
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if res > residual_tol {
                return None;
            }
            for (t, c) in coeff.iter().enumerate() {
                mats[t].set(i, j, *c);
            }
        }
    }
    Some(mats)
}

/// I (x) T applied to a realigned element, with T(v) = W* V W or W* V^T W.
fn apply_conjugation_map(
    realigned: &ComplexMatrix,
    n: usize,
    m: usize,
    w: &ComplexMatrix,
    transpose_first: bool,
) -> ComplexMatrix {
    let j = w.cols;
    let mut out = ComplexMatrix::zeros(n * j, n * j);
    for bi in 0..n {
        for bj in 0..n {
            // Extract block (bi, bj) of the realignment: an m x m matrix.
            let mut block = ComplexMatrix::zeros(m, m);
            for k in 0..m {
                for l in 0..m {
                    block.set(k, l, realigned.get(bi * m + k, bj * m + l));
                }
            }
            if transpose_first {
                block = block.transpose();
            }
            let img = w.adjoint().mul(&block).mul(w);
            for k in 0..j {
                for l in 0..j {
                    out.set(bi * j + k, bj * j + l, img.get(k, l));
                }
            }
        }
    }
    out
}

/// Certified [lower, upper] bracket for the MAX level norm (unscaled).
fn max_norm_bracket(s: &MatricialStructure, x: &LeveledElement) -> Result<(f64, f64)> {
    let n = x.level;
    if n == 1 {
        let v = s.base.base_norm(x.entry(0, 0))?;
        return Ok((v, v));
    }
    let d = s.base.dim();
    let mut lower = 0.0f64;

    // Functional route: contractive functionals give opnorm of the pairing
    // matrix as a lower bound. Norming functionals of sampled compressions
    // are exact on elementary tensors.
    let dual_space = s.base.dual()?;
    let eval_f = |f: &[Complex64], lower: &mut f64| {
        let nf = dual_space.base_norm(f).unwrap_or(f64::INFINITY);
        if !(nf > 1e-14) {
            return;
        }
        let v = functional_matrix(x, f).operator_norm() / nf.max(1.0);
        if v > *lower {
            *lower = v;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(s.opt.seed ^ 0x4D41584E);
    for i in 0..n {
        for j in 0..n {
            if let Ok(f) = s.base.norming_functional(x.entry(i, j)) {
                eval_f(&f, &mut lower);
            }
        }
    }
    for _ in 0..24 {
        let xi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let eta: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if let Ok(f) = s.base.norming_functional(&state_compress(x, &xi, &eta)) {
            eval_f(&f, &mut lower);
        }
        let f = dual_space.random_vector(&mut rng);
        eval_f(&f, &mut lower);
    }

    // Matrix-valued contractions.
    match &s.base {
        BaseSpace::Schatten { .. } => {
            let m = s.base.matrix_size().expect("schatten base");
            let r = x.realign()?;
            // T = reshape, certifiably contractive for every p >= 1.
            lower = lower.max(r.operator_norm());
            for _ in 0..8 {
                let w = ComplexMatrix::from_fn(m, m, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let c = w.operator_norm().powi(2).max(1e-14);
                let img = apply_conjugation_map(&r, n, m, &w, false);
                lower = lower.max(img.operator_norm() / c);
            }
        }
        BaseSpace::LatticeLp { .. } | BaseSpace::Custom { .. } => {
            // Diagonal coordinate-functional tensor: block diagonal of the
            // coordinate matrices, contractive for every lattice exponent.
            let v = (0..d)
                .map(|k| x.coordinate_matrix(k).operator_norm())
                .fold(0.0, f64::max);
            lower = lower.max(v);
            // Random certified contractions v -> sum_k v_k M_k.
            let q = s.base.p().conjugate();
            for _ in 0..8 {
                let j = 2.min(n * d);
                let mats: Vec<ComplexMatrix> = (0..d)
                    .map(|_| {
                        ComplexMatrix::from_fn(j, j, |_, _| {
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        })
                    })
                    .collect();
                let cert: f64 = if q.is_inf() {
                    mats.iter().map(|m| m.operator_norm()).fold(0.0, f64::max)
                } else {
                    mats.iter()
                        .map(|m| m.operator_norm().powf(q.0))
                        .sum::<f64>()
                        .powf(1.0 / q.0)
                };
                let mut img = ComplexMatrix::zeros(n * j, n * j);
                for k in 0..d {
                    img = img.add(&x.coordinate_matrix(k).kron(&mats[k]));
                }
                lower = lower.max(img.operator_norm() / cert.max(1e-14));
            }
        }
    }

    // Upper bound: best factorization x = a . diag(z) . b* found from the
    // coordinate decomposition and the SVD of the coefficient matrix.
    let mut upper = f64::INFINITY;
    let consider = |terms: &[(ComplexMatrix, Vec<Complex64>)], upper: &mut f64| {
        if let Some(v) = factorization_value(&s.base, terms) {
            if v < *upper {
                *upper = v;
            }
        }
    };
    // Coordinate decomposition.
    let basis_terms: Vec<(ComplexMatrix, Vec<Complex64>)> = (0..d)
        .map(|k| {
            let mut e = vec![C_ZERO; d];
            e[k] = C_ONE;
            (x.coordinate_matrix(k), e)
        })
        .collect();
    consider(&basis_terms, &mut upper);
    // SVD of the n^2 x d coefficient matrix.
    let coeff = ComplexMatrix::from_fn(n * n, d, |row, c| x.coeffs[row][c]);
    let (u, sigma, vt) = coeff.svd();
    let svd_terms: Vec<(ComplexMatrix, Vec<Complex64>)> = sigma
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 1e-13 * sigma[0].max(1.0))
        .map(|(k, s)| {
            let mk = ComplexMatrix::from_fn(n, n, |i, j| u.get(i * n + j, k) * s);
            let zk: Vec<Complex64> = (0..d).map(|c| vt.get(k, c)).collect();
            (mk, zk)
        })
        .collect();
    consider(&svd_terms, &mut upper);

    // The bracket is valid by construction; guard against numerical crossing.
    if lower > upper {
        let mid = 0.5 * (lower + upper);
        return Ok((mid.min(lower), mid.max(upper).max(lower)));
    }
    Ok((lower, upper))
}

/// ||a|| * max_s base_norm(z_s) * ||b|| for the block-row factorization built
/// from per-term SVDs, after normalizing each z_s to unit base norm.
fn factorization_value(base: &BaseSpace, terms: &[(ComplexMatrix, Vec<Complex64>)]) -> Option<f64> {
    if terms.is_empty() {
        return Some(0.0);
    }
    let n = terms[0].0.rows;
    let mut aa = ComplexMatrix::zeros(n, n);
    let mut bb = ComplexMatrix::zeros(n, n);
    for (mk, zk) in terms {
        let nz = base.base_norm(zk).ok()?;
        if nz <= 1e-15 {
            continue;
        }
        let m_scaled = mk.scale(Complex64::new(nz, 0.0));
        // m = P D Q†; contribution P D P† to aa and Q D Q† to bb.
        let (pu, sig, qvt) = m_scaled.svd();
        let q = qvt.adjoint();
        for k in 0..sig.len() {
            for i in 0..n {
                for j in 0..n {
                    let va = aa.get(i, j) + pu.get(i, k) * pu.get(j, k).conj() * sig[k];
                    aa.set(i, j, va);
                    let vb = bb.get(i, j) + q.get(i, k) * q.get(j, k).conj() * sig[k];
                    bb.set(i, j, vb);
                }
            }
        }
    }
    Some((aa.operator_norm() * bb.operator_norm()).sqrt())
}

// ---------------------------------------------------------------------------
// Schatten natural structure
// ---------------------------------------------------------------------------

/// A norm value that is either exact or a certified lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct SchattenNormOutcome {
    pub value: f64,
    pub exact: bool,
    /// Best compression pair (a, b) for finite exponents.
    pub best_pair: Option<(ComplexMatrix, ComplexMatrix)>,
}

impl MatricialStructure {
    /// Natural level norm of the Schatten structure. Exact operator norm of
    /// the realignment at p = infinity; a certified lower bound from the
    /// two-sided compression formula at finite p.
    pub fn schatten_level_norm(&self, x: &LeveledElement, p: PExp) -> Result<NormValue> {
        self.require_kind(
            &[StructureKind::Schatten, StructureKind::MatrixSystem],
            "schatten or matsys",
        )?;
        let out = self.schatten_norm_detailed(x, p, &[])?;
        Ok(NormValue { value: out.value * self.norm_scale, exact: out.exact })
    }

    /// Engine behind [`schatten_level_norm`] (unscaled). Extra compression
    /// pairs join the candidate set.
    pub fn schatten_norm_detailed(
        &self,
        x: &LeveledElement,
        p: PExp,
        extra_pairs: &[(ComplexMatrix, ComplexMatrix)],
    ) -> Result<SchattenNormOutcome> {
        let m = self.require_matrix_base()?;
        let r = x.realign()?;
        if p.is_inf() {
            return Ok(SchattenNormOutcome {
                value: r.operator_norm(),
                exact: true,
                best_pair: None,
            });
        }
        let n = x.level;
        if n == 1 {
            return Ok(SchattenNormOutcome {
                value: r.schatten_norm(p.0)?,
                exact: true,
                best_pair: None,
            });
        }
        let two_p = 2.0 * p.0;
        let eye = ComplexMatrix::identity(m);
        let value_of = |a: &ComplexMatrix, b: &ComplexMatrix| -> f64 {
            let ka = a.kron(&eye);
            let kb = b.kron(&eye);
            ka.mul(&r)
                .mul(&kb)
                .schatten_norm(p.0)
                .unwrap_or(0.0)
        };
        let project_pair = |a: &ComplexMatrix| -> ComplexMatrix {
            let nn = a.schatten_norm(two_p).unwrap_or(0.0);
            if nn > 1.0 {
                a.scale(Complex64::new(1.0 / nn, 0.0))
            } else {
                a.clone()
            }
        };

        let mut best = 0.0f64;
        let mut best_pair: Option<(ComplexMatrix, ComplexMatrix)> = None;
        let mut consider = |a: &ComplexMatrix, b: &ComplexMatrix, best: &mut f64| {
            let (a, b) = (project_pair(a), project_pair(b));
            let v = value_of(&a, &b);
            if v > *best {
                *best = v;
                best_pair = Some((a, b));
            }
        };
        // Deterministic start: balanced identity compressions.
        let id_scale = 1.0 / (n as f64).powf(1.0 / two_p);
        let id = ComplexMatrix::identity(n).scale(Complex64::new(id_scale, 0.0));
        consider(&id, &id, &mut best);
        for (a, b) in extra_pairs {
            consider(a, b, &mut best);
        }

        let dim = 2 * n * n * 2;
        let to_mats = |params: &[f64]| -> (ComplexMatrix, ComplexMatrix) {
            let vs = crate::opt::unpack_complex(params, &[n * n, n * n]);
            let a = ComplexMatrix { rows: n, cols: n, entries: vs[0].clone() };
            let b = ComplexMatrix { rows: n, cols: n, entries: vs[1].clone() };
            (a, b)
        };
        let project = |params: &mut Vec<f64>| {
            let (a, b) = to_mats(params);
            let (a, b) = (project_pair(&a), project_pair(&b));
            *params = crate::opt::pack_complex(&[&a.entries, &b.entries]);
        };
        let objective = |params: &[f64]| -> f64 {
            let (a, b) = to_mats(params);
            value_of(&a, &b)
        };
        let start = crate::opt::pack_complex(&[&id.entries, &id.entries]);
        let (val, pt) = maximize(&self.opt, 0x53434E, dim, &[start], project, objective);
        if val > best {
            let (a, b) = to_mats(&pt);
            best = val;
            best_pair = Some((project_pair(&a), project_pair(&b)));
        }
        Ok(SchattenNormOutcome { value: best, exact: false, best_pair })
    }

    /// Natural cone membership: the realignment must be PSD. Exact.
    pub fn schatten_cone_member(&self, x: &LeveledElement, tol: f64) -> Result<ConeVerdict> {
        self.require_kind(
            &[StructureKind::Schatten, StructureKind::MatrixSystem],
            "schatten or matsys",
        )?;
        let r = x.realign()?;
        let scale = r.max_abs().max(1.0);
        if r.hermitian_defect() > tol * scale {
            return Ok(ConeVerdict::non_member(
                Certificate::PsdWitness {
                    description: "realignment is not hermitian".into(),
                    min_eigenvalue: -r.hermitian_defect(),
                },
                tol,
            ));
        }
        let h = r.add(&r.adjoint()).scale(Complex64::new(0.5, 0.0));
        let (vals, vecs) = h.hermitian_eigen()?;
        let lam = vals[0];
        if lam >= -tol {
            Ok(ConeVerdict::member(
                Certificate::PsdWitness {
                    description: "realignment is PSD".into(),
                    min_eigenvalue: lam,
                },
                tol,
            ))
        } else {
            let v: Vec<Complex64> = (0..h.rows).map(|i| vecs.get(i, 0)).collect();
            Ok(ConeVerdict::non_member(
                Certificate::StateSeparator {
                    xi: cvec(&v),
                    eta: vec![],
                    violation: lam,
                },
                tol,
            ))
        }
    }

    // -----------------------------------------------------------------------
    // Kind dispatch
    // -----------------------------------------------------------------------

    /// Cone membership under the structure's own kind.
    pub fn cone_member(&self, x: &LeveledElement, tol: f64) -> Result<ConeVerdict> {
        match self.kind {
            StructureKind::Min => self.min_cone_member(x, tol),
            StructureKind::Max => self.max_cone_member(x, tol),
            StructureKind::Schatten | StructureKind::MatrixSystem => {
                self.schatten_cone_member(x, tol)
            }
        }
    }

    /// Level norm as a bracket. Exact kinds return lower = upper.
    pub fn level_norm(&self, x: &LeveledElement) -> Result<(f64, f64)> {
        match self.kind {
            StructureKind::Min => {
                let out = self.min_norm_detailed(x, &[], &[])?;
                let lo = out.value * self.norm_scale;
                if out.exact {
                    Ok((lo, lo))
                } else {
                    // The MAX factorization bound dominates every structure
                    // with the same level-one norm.
                    let (_, up) = max_norm_bracket(self, x)?;
                    Ok((lo, (up * self.norm_scale).max(lo)))
                }
            }
            StructureKind::Max => self.max_level_norm(x),
            StructureKind::MatrixSystem => {
                let v = self.schatten_level_norm(x, PExp::INF)?;
                Ok((v.value, v.value))
            }
            StructureKind::Schatten => {
                let p = self.natural_p();
                let v = self.schatten_level_norm(x, p)?;
                if v.exact {
                    Ok((v.value, v.value))
                } else {
                    let (_, up) = max_norm_bracket(self, x)?;
                    Ok((v.value, (up * self.norm_scale).max(v.value)))
                }
            }
        }
    }

    /// Whether the kind's norm evaluator is exact for this configuration.
    pub fn has_exact_norm(&self) -> bool {
        match self.kind {
            StructureKind::MatrixSystem => true,
            StructureKind::Schatten => self.natural_p().is_inf(),
            StructureKind::Min => {
                matches!(&self.base, BaseSpace::LatticeLp { p, weights: None, .. } if p.is_inf())
            }
            StructureKind::Max => false,
        }
    }

    // -----------------------------------------------------------------------
    // Samplers
    // -----------------------------------------------------------------------

    /// Random certified member of the level-n cone.
    pub fn random_cone_member(&self, level: usize, rng: &mut ChaCha8Rng) -> LeveledElement {
        match (&self.kind, &self.base) {
            (StructureKind::Schatten | StructureKind::MatrixSystem, _)
            | (StructureKind::Min, BaseSpace::Schatten { .. })
            | (StructureKind::Max, BaseSpace::Schatten { .. }) => {
                let m = self.base.matrix_size().expect("schatten base");
                let g = ComplexMatrix::from_fn(level * m, level * m, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let psd = g.adjoint().mul(&g).scale(Complex64::new(1.0 / (level * m) as f64, 0.0));
                LeveledElement::unrealign(&psd, level, m).expect("shape fits by construction")
            }
            (_, _) => {
                // Generated cone: sum of A_k (x) g_k with A_k PSD.
                let gens = self.base.cone_generators();
                let mut out = LeveledElement::zero(level, self.base.dim());
                for g in &gens {
                    let h = ComplexMatrix::from_fn(level, level, |_, _| {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    });
                    let a = h.adjoint().mul(&h).scale(Complex64::new(1.0 / level as f64, 0.0));
                    out = out.add(&elementary_from_parts(&a, g));
                }
                out
            }
        }
    }

    /// Random hermitian element at the given level.
    pub fn random_hermitian(&self, level: usize, rng: &mut ChaCha8Rng) -> LeveledElement {
        let d = self.base.dim();
        let coeffs = (0..level * level)
            .map(|_| {
                (0..d)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let x = LeveledElement::from_coeffs(level, d, coeffs).expect("finite by construction");
        let xs = x.adjoint(self.involution());
        x.add(&xs).scale(Complex64::new(0.5, 0.0))
    }
}

pub(crate) fn elementary_from_parts(a: &ComplexMatrix, v: &[Complex64]) -> LeveledElement {
    LeveledElement::elementary(a, v)
}

// ---------------------------------------------------------------------------
// Property runners
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuanReport {
    pub trials: usize,
    pub axiom1_violations: usize,
    pub axiom2_violations: usize,
    pub worst_axiom1_gap: f64,
    pub worst_axiom2_gap: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Verify Ruan's axioms on random samples. For exact norms axiom 2 is an
/// equality check; for bracketed norms the bracket-consistent relaxation is
/// used (lower of the left side against upper of the right side).
pub fn ruan_check(s: &MatricialStructure, budget: usize, seed: u64) -> Result<RuanReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-7;
    let mut a1_viol = 0;
    let mut a2_viol = 0;
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    let exact = s.has_exact_norm();

    for t in 0..budget {
        let n = 2;
        let x = if matches!(s.kind, StructureKind::Max) || s.kind == StructureKind::Min {
            // Hermitian inputs keep MAX membership preconditions available.
            s.random_hermitian(n, &mut rng)
        } else {
            s.random_hermitian(n, &mut rng)
        };
        let m_dim = 1 + (t % 2);
        let a = ComplexMatrix::from_fn(m_dim, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = ComplexMatrix::from_fn(m_dim, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let axb = LeveledElement::compress(&a, &x, &b)?;
        let (lhs_lo, _) = s.level_norm(&axb)?;
        let (_, rhs_up) = s.level_norm(&x)?;
        let bound = a.operator_norm() * b.operator_norm() * rhs_up;
        let gap = lhs_lo - bound;
        worst1 = worst1.max(gap);
        if gap > tol * bound.max(1.0) {
            a1_viol += 1;
        }

        // Axiom 2: direct sums.
        let y = s.random_hermitian(1 + (t % 2), &mut rng);
        let xy = LeveledElement::direct_sum(&x, &y)?;
        let (sum_lo, sum_up) = s.level_norm(&xy)?;
        let (x_lo, x_up) = s.level_norm(&x)?;
        let (y_lo, y_up) = s.level_norm(&y)?;
        let max_lo = x_lo.max(y_lo);
        let max_up = x_up.max(y_up);
        let (gap, viol) = if exact {
            let g = (sum_lo - max_lo).abs();
            (g, g > tol * max_lo.max(1.0))
        } else {
            // Brackets must overlap.
            let g = (sum_lo - max_up).max(max_lo - sum_up).max(0.0);
            (g, g > tol * max_up.max(1.0))
        };
        worst2 = worst2.max(gap);
        if viol {
            a2_viol += 1;
        }
    }

    // Identity compressions give equality exactly.
    let x = s.random_hermitian(2, &mut rng);
    let id = ComplexMatrix::identity(2);
    let xi = LeveledElement::compress(&id, &x, &id)?;
    let (l1, _) = s.level_norm(&xi)?;
    let (l2, _) = s.level_norm(&x)?;
    let id_gap = (l1 - l2).abs();
    worst1 = worst1.max(id_gap - tol * l2.max(1.0));

    let pass = a1_viol == 0 && a2_viol == 0 && id_gap <= 1e-6 * l2.max(1.0);
    Ok(RuanReport {
        trials: budget,
        axiom1_violations: a1_viol,
        axiom2_violations: a2_viol,
        worst_axiom1_gap: worst1,
        worst_axiom2_gap: worst2,
        pass,
        seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeAxiomReport {
    pub trials: usize,
    pub compress_violations: usize,
    pub direct_sum_violations: usize,
    pub additive_violations: usize,
    pub pointedness_violations: usize,
    pub hermitian_violations: usize,
    pub pass: bool,
    pub seed: u64,
}

/// Verify the matricial wedge axioms on random cone members, and search for
/// pointedness failures.
pub fn cone_axiom_check(s: &MatricialStructure, budget: usize, seed: u64) -> Result<ConeAxiomReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compress_viol = 0;
    let mut sum_viol = 0;
    let mut add_viol = 0;
    let mut pointed_viol = 0;
    let mut herm_viol = 0;

    let member = |x: &LeveledElement, tol: f64| -> Result<bool> {
        Ok(s.cone_member(x, tol)?.is_member())
    };

    for t in 0..budget {
        let n = 1 + (t % 2);
        let x = s.random_cone_member(n, &mut rng);
        let scale = x.max_abs().max(1.0);
        let tol = 1e-8 * scale;

        // Members are hermitian.
        if !s.base.is_hermitian_element(&x, 1e-8 * scale) {
            herm_viol += 1;
        }

        // compress(a, ., a*).
        let m_dim = 1 + (t % 2);
        let a = ComplexMatrix::from_fn(m_dim, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let axa = LeveledElement::compress(&a, &x, &a)?;
        let ctol = tol * a.operator_norm().powi(2).max(1.0) * 10.0;
        if !member(&axa, ctol)? {
            compress_viol += 1;
        }
        // compress by zero lands on zero, which is in the cone.
        let z = ComplexMatrix::zeros(n, n);
        let zero_img = LeveledElement::compress(&z, &x, &z)?;
        if !member(&zero_img, 1e-12)? {
            compress_viol += 1;
        }

        // direct sums, additions, scalings.
        let y = s.random_cone_member(1 + (t % 2), &mut rng);
        if !member(&LeveledElement::direct_sum(&x, &y)?, tol.max(1e-8 * y.max_abs().max(1.0)))? {
            sum_viol += 1;
        }
        if x.level == y.level {
            let lam = rng.gen_range(0.0..2.0);
            let mu = rng.gen_range(0.0..2.0);
            let comb = x.scale_re(lam).add(&y.scale_re(mu));
            if !member(&comb, tol * (lam + mu + 1.0) * 4.0)? {
                add_viol += 1;
            }
        }

        // Pointedness: no nonzero element has both signs in the cone.
        let h = s.random_hermitian(n, &mut rng);
        if h.max_abs() > 1e-6 {
            let tol_p = 1e-10 * h.max_abs();
            let plus = s.cone_member(&h, tol_p)?;
            let minus = s.cone_member(&h.scale_re(-1.0), tol_p)?;
            if plus.is_member() && minus.is_member() {
                pointed_viol += 1;
            }
        }
    }

    let pass = compress_viol == 0
        && sum_viol == 0
        && add_viol == 0
        && pointed_viol == 0
        && herm_viol == 0;
    Ok(ConeAxiomReport {
        trials: budget,
        compress_violations: compress_viol,
        direct_sum_violations: sum_viol,
        additive_violations: add_viol,
        pointedness_violations: pointed_viol,
        hermitian_violations: herm_viol,
        pass,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::flip_element;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn light(s: MatricialStructure) -> MatricialStructure {
        let opt = OptimizerConfig::new(6, 120, 0x5EED);
        s.with_opt(opt)
    }

    #[test]
    fn min_norm_closed_form_linf() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min);
        // x = E_11 (x) e1 + E_22 (x) e2: coordinate matrices E_11, E_22.
        let mut x = LeveledElement::zero(2, 2);
        x.set_entry(0, 0, vec![C_ONE, C_ZERO]);
        x.set_entry(1, 1, vec![C_ZERO, C_ONE]);
        assert_abs_diff_eq!(s.min_level_norm(&x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_level_one_is_base_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for base in [
            BaseSpace::lattice(PExp::TWO, 3),
            BaseSpace::schatten(PExp::ONE, 2),
        ] {
            let s = light(MatricialStructure::new(base.clone(), StructureKind::Min));
            for _ in 0..5 {
                let v = base.random_vector(&mut rng);
                let x = LeveledElement::from_coeffs(1, base.dim(), vec![v.clone()]).unwrap();
                assert_abs_diff_eq!(
                    s.min_level_norm(&x).unwrap(),
                    base.base_norm(&v).unwrap(),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn min_norm_optimizer_matches_closed_form_on_linf() {
        // Force the optimizer path through an l_2 treatment of the same data,
        // then compare against the closed form on l_inf: optimizer <= exact.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = BaseSpace::lattice(PExp::INF, 2);
        let s = MatricialStructure::new(base, StructureKind::Min)
            .with_opt(OptimizerConfig::new(12, 250, 7));
        for _ in 0..5 {
            let x = s.random_hermitian(2, &mut rng);
            let exact = s.min_level_norm(&x).unwrap();
            // Optimizer-only route.
            let out = s.min_norm_detailed(&x, &[], &[]).unwrap();
            assert!(out.exact);
            // The generic optimizer on the same data cannot exceed the
            // closed form; run it through level_norm's lower path by
            // rebuilding with a non-closed-form base.
            let s2 = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min)
                .with_opt(OptimizerConfig::new(12, 250, 7));
            let general = general_min_lower(&s2, &x);
            assert!(general <= exact + 1e-6, "general {general} exact {exact}");
            assert!(general >= exact - 1e-6, "general {general} exact {exact}");
        }
    }

    /// Optimizer-only MIN lower bound, bypassing closed forms.
    fn general_min_lower(s: &MatricialStructure, x: &LeveledElement) -> f64 {
        let n = x.level;
        let project = |params: &mut Vec<f64>| {
            let mut vs = crate::opt::unpack_complex(params, &[n, n]);
            normalize_c(&mut vs[0]);
            normalize_c(&mut vs[1]);
            *params = crate::opt::pack_complex(&[&vs[0], &vs[1]]);
        };
        let objective = |params: &[f64]| -> f64 {
            let vs = crate::opt::unpack_complex(params, &[n, n]);
            s.base
                .base_norm(&state_compress(x, &vs[0], &vs[1]))
                .unwrap_or(0.0)
        };
        let (val, _) = maximize(&s.opt, 99, 4 * n, &[], project, objective);
        val
    }

    #[test]
    fn min_cone_lattice_examples() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min);
        // a (x) g with a PSD and g a cone generator is a member.
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let x = LeveledElement::elementary(&a, &[C_ONE, C_ZERO]);
        assert!(s.min_cone_member(&x, 1e-9).unwrap().is_member());

        // Negative diagonal coordinate: non-member with certificate.
        let mut y = x.clone();
        y.set_entry(0, 0, vec![c(-1.0, 0.0), C_ZERO]);
        let v = s.min_cone_member(&y, 1e-9).unwrap();
        assert!(v.is_non_member());
        assert!(matches!(v.certificate, Some(Certificate::FunctionalSeparator { .. })));
    }

    #[test]
    fn flip_is_min_member_over_schatten() {
        let f = flip_element(2);
        for p in [PExp::ONE, PExp::TWO, PExp::INF] {
            let s = light(MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Min));
            let v = s.min_cone_member(&f, 1e-9).unwrap();
            assert!(v.is_member(), "flip must be MIN-positive for p = {:?}", p);
        }
    }

    #[test]
    fn min_cone_schatten_detects_violations() {
        // -identity-pattern is not MIN positive.
        let s = light(MatricialStructure::new(
            BaseSpace::schatten(PExp::INF, 2),
            StructureKind::Min,
        ));
        let mut x = LeveledElement::zero(2, 4);
        x.set_entry(0, 0, vec![c(-1.0, 0.0), C_ZERO, C_ZERO, c(-1.0, 0.0)]);
        x.set_entry(1, 1, vec![c(-1.0, 0.0), C_ZERO, C_ZERO, c(-1.0, 0.0)]);
        let v = s.min_cone_member(&x, 1e-9).unwrap();
        assert!(v.is_non_member());
        assert!(matches!(v.certificate, Some(Certificate::StateSeparator { .. })));
    }

    #[test]
    fn max_cone_lattice_phase1() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Max);
        // Coordinate matrices [[1,1],[1,1]] and [[1,-1],[-1,1]] are both PSD.
        let x1 = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let x2 = ComplexMatrix::from_real_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let x = LeveledElement::from_coordinate_matrices(&[x1, x2]);
        let v = s.max_cone_member(&x, 1e-9).unwrap();
        assert!(v.is_member());
        assert!(matches!(v.certificate, Some(Certificate::Decomposition { .. })));

        // A swap-like non-PSD coefficient refutes membership.
        let bad = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let ok = ComplexMatrix::identity(2);
        let y = LeveledElement::from_coordinate_matrices(&[bad, ok]);
        let v = s.max_cone_member(&y, 1e-9).unwrap();
        assert!(v.is_non_member());
    }

    #[test]
    fn max_cone_requires_hermitian() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Max);
        let e12 = ComplexMatrix::matrix_unit(2, 0, 1);
        let x = LeveledElement::elementary(&e12, &[C_ONE, C_ZERO]);
        assert!(matches!(
            s.max_cone_member(&x, 1e-9),
            Err(StructError::NonHermitianInput)
        ));
    }

    #[test]
    fn flip_is_max_non_member_with_falsifier() {
        let f = flip_element(2);
        let s = light(MatricialStructure::new(
            BaseSpace::schatten(PExp::TWO, 2),
            StructureKind::Max,
        ));
        let v = s.max_cone_member(&f, 1e-9).unwrap();
        assert!(v.is_non_member());
        match v.certificate {
            Some(Certificate::PositiveMapFalsifier { min_eigenvalue, .. }) => {
                assert!(min_eigenvalue < -0.5);
            }
            other => panic!("expected a positive-map falsifier, got {other:?}"),
        }
    }

    #[test]
    fn max_norm_bracket_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = light(MatricialStructure::new(
            BaseSpace::lattice(PExp::TWO, 2),
            StructureKind::Max,
        ));
        // Level 1: both bounds equal the base norm.
        let v = s.base.random_vector(&mut rng);
        let x = LeveledElement::from_coeffs(1, 2, vec![v.clone()]).unwrap();
        let (lo, up) = s.max_level_norm(&x).unwrap();
        let bn = s.base.base_norm(&v).unwrap();
        assert_abs_diff_eq!(lo, bn, epsilon = 1e-9);
        assert_abs_diff_eq!(up, bn, epsilon = 1e-9);

        // Elementary tensor with unit factors brackets 1 tightly.
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let mut vv = s.base.random_vector(&mut rng);
        let nv = s.base.base_norm(&vv).unwrap();
        for z in vv.iter_mut() {
            *z /= nv;
        }
        let x = LeveledElement::elementary(&a, &vv);
        let (lo, up) = s.max_level_norm(&x).unwrap();
        assert!(lo >= 1.0 - 1e-6, "lower {lo}");
        assert!(up <= 1.0 + 1e-6, "upper {up}");

        // Bracket validity on random inputs.
        for _ in 0..25 {
            let x = s.random_hermitian(2, &mut rng);
            let (lo, up) = s.max_level_norm(&x).unwrap();
            assert!(lo <= up + 1e-12, "lower {lo} upper {up}");
        }
    }

    #[test]
    fn schatten_norm_examples() {
        let s = MatricialStructure::new(
            BaseSpace::schatten(PExp::INF, 2),
            StructureKind::MatrixSystem,
        );
        // Identity pattern has operator norm one.
        let mut idp = LeveledElement::zero(2, 4);
        for i in 0..2 {
            idp.set_entry(i, i, vec![C_ONE, C_ZERO, C_ZERO, C_ONE]);
        }
        let v = s.schatten_level_norm(&idp, PExp::INF).unwrap();
        assert!(v.exact);
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-12);

        // The flip is unitary: operator norm one.
        let f = flip_element(2);
        let v = s.schatten_level_norm(&f, PExp::INF).unwrap();
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schatten_finite_p_lower_bound_vs_feasible_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = light(MatricialStructure::new(
            BaseSpace::schatten(PExp::TWO, 2),
            StructureKind::Schatten,
        ));
        for _ in 0..5 {
            let x = s.random_hermitian(2, &mut rng);
            let out = s.schatten_level_norm(&x, PExp::TWO).unwrap();
            assert!(!out.exact);
            // Explicit feasible point a = b = I / n^{1/4}.
            let r = x.realign().unwrap();
            let scale = 1.0 / (2f64).powf(0.25);
            let feasible = r.schatten_norm(2.0).unwrap() * scale * scale;
            assert!(
                out.value >= feasible - 1e-9,
                "optimizer {} under feasible {}",
                out.value,
                feasible
            );
        }
    }

    #[test]
    fn schatten_cone_examples() {
        let s = MatricialStructure::new(BaseSpace::schatten(PExp::TWO, 2), StructureKind::Schatten);
        let f = flip_element(2);
        let v = s.schatten_cone_member(&f, 1e-9).unwrap();
        assert!(v.is_non_member());
        match v.certificate {
            Some(Certificate::StateSeparator { violation, .. }) => {
                assert_abs_diff_eq!(violation, -1.0, epsilon = 1e-9);
            }
            other => panic!("unexpected certificate {other:?}"),
        }

        let zero = LeveledElement::zero(2, 4);
        assert!(s.schatten_cone_member(&zero, 1e-12).unwrap().is_member());

        let a = ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let p = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let x = LeveledElement::elementary(&a, &crate::linalg::flatten_mat(&p));
        assert!(s.schatten_cone_member(&x, 1e-9).unwrap().is_member());
    }

    #[test]
    fn kind_mismatch_errors() {
        let s = MatricialStructure::new(BaseSpace::lattice(PExp::ONE, 2), StructureKind::Min);
        let x = LeveledElement::zero(2, 2);
        assert!(matches!(
            s.max_cone_member(&x, 1e-9),
            Err(StructError::KindMismatch { .. })
        ));
        assert!(matches!(
            s.schatten_level_norm(&x, PExp::TWO),
            Err(StructError::KindMismatch { .. })
        ));
    }

    #[test]
    fn max_cone_inside_min_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for base in [BaseSpace::lattice(PExp::ONE, 2), BaseSpace::lattice(PExp::INF, 3)] {
            let smax = MatricialStructure::new(base.clone(), StructureKind::Max);
            let smin = MatricialStructure::new(base, StructureKind::Min);
            for _ in 0..40 {
                let x = smax.random_cone_member(2, &mut rng);
                assert!(smax.max_cone_member(&x, 1e-8).unwrap().is_member());
                assert!(smin.min_cone_member(&x, 1e-8).unwrap().is_member());
            }
        }
    }

    #[test]
    fn lattice_min_max_cones_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for base in [BaseSpace::lattice(PExp::INF, 2), BaseSpace::lattice(PExp::ONE, 3)] {
            let smax = MatricialStructure::new(base.clone(), StructureKind::Max);
            let smin = MatricialStructure::new(base, StructureKind::Min);
            for _ in 0..60 {
                let x = smin.random_hermitian(2, &mut rng);
                let a = smin.min_cone_member(&x, 1e-9).unwrap().is_member();
                let b = smax.max_cone_member(&x, 1e-9).unwrap().is_member();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn schatten_cone_strictly_between_max_and_min() {
        let f = flip_element(2);
        let p = PExp::TWO;
        let smin = light(MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Min));
        let snat = MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Schatten);
        let smax = light(MatricialStructure::new(BaseSpace::schatten(p, 2), StructureKind::Max));
        assert!(smin.min_cone_member(&f, 1e-9).unwrap().is_member());
        assert!(snat.schatten_cone_member(&f, 1e-9).unwrap().is_non_member());
        assert!(smax.max_cone_member(&f, 1e-9).unwrap().is_non_member());
    }

    #[test]
    fn ruan_check_exact_kinds() {
        for s in [
            MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min),
            MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem),
        ] {
            let rep = ruan_check(&light(s), 40, 11).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn cone_axiom_check_all_kinds() {
        for s in [
            MatricialStructure::new(BaseSpace::lattice(PExp::INF, 2), StructureKind::Min),
            MatricialStructure::new(BaseSpace::lattice(PExp::ONE, 2), StructureKind::Max),
            MatricialStructure::new(BaseSpace::schatten(PExp::TWO, 2), StructureKind::Schatten),
            MatricialStructure::new(BaseSpace::schatten(PExp::INF, 2), StructureKind::MatrixSystem),
        ] {
            let rep = cone_axiom_check(&light(s), 30, 13).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn undecided_is_reachable_for_min_over_schatten() {
        // P + partial-transpose(Q) with both PSD is block positive by
        // construction, but generically neither PSD nor PT-PSD.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = light(MatricialStructure::new(
            BaseSpace::schatten(PExp::INF, 2),
            StructureKind::Min,
        ));
        let mut found_undecided = false;
        for _ in 0..20 {
            let g1 = ComplexMatrix::from_fn(4, 4, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let g2 = ComplexMatrix::from_fn(4, 4, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let p = g1.adjoint().mul(&g1);
            let q = g2.adjoint().mul(&g2);
            let r = p.add(&partial_transpose_level(&q, 2, 2));
            let x = LeveledElement::unrealign(&r, 2, 2).unwrap();
            let v = s.min_cone_member(&x, 1e-9).unwrap();
            assert!(!v.is_non_member(), "block-positive sample was refuted");
            if v.membership == Membership::Undecided {
                found_undecided = true;
            }
        }
        assert!(found_undecided, "expected at least one UNDECIDED verdict");
    }
}
