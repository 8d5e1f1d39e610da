//! Scalar fields with exact derivatives through second order.
//!
//! Everything downstream — operator application, the weighted-inequality
//! expansions, the quadrature sweeps — consumes fields through [`Jet2`]:
//! value, gradient and Hessian at a point. Jets are computed analytically;
//! finite differences exist only as a cross-check ([`fd_jet2`]). Composite
//! expressions are always expanded by product/chain rule at the jet level,
//! never by nested numerical differentiation, so identity residuals stay at
//! round-off scale.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::params::{CarlemanParams, DomainParams};
use crate::{Error, Result};

/// Value, gradient and Hessian of a scalar field at one point.
///
/// The Hessian is stored as a packed lower triangle, so symmetry holds
/// structurally rather than by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    dim: usize,
    pub value: f64,
    gradient: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl Jet2 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            value: 0.0,
            gradient: vec![0.0; dim],
            hess: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut jet = Self::zeros(dim);
        jet.value = value;
        jet
    }

    /// Jet of the coordinate function on `axis` evaluated at `x`.
    pub fn coordinate(dim: usize, axis: usize, x: f64) -> Self {
        let mut jet = Self::zeros(dim);
        jet.value = x;
        jet.gradient[axis] = 1.0;
        jet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn grad(&self, axis: usize) -> f64 {
        self.gradient[axis]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[tri_index(i, j)]
    }

    pub fn set_grad(&mut self, axis: usize, v: f64) {
        self.gradient[axis] = v;
    }

    pub fn set_hess(&mut self, i: usize, j: usize, v: f64) {
        self.hess[tri_index(i, j)] = v;
    }

    pub fn add(&self, other: &Jet2) -> Jet2 {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        out.value += other.value;
        for (a, b) in out.gradient.iter_mut().zip(&other.gradient) {
            *a += b;
        }
        for (a, b) in out.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Jet2) -> Jet2 {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        let mut out = self.clone();
        out.value *= c;
        out.gradient.iter_mut().for_each(|a| *a *= c);
        out.hess.iter_mut().for_each(|a| *a *= c);
        out
    }

    /// Leibniz product to second order.
    pub fn mul(&self, other: &Jet2) -> Jet2 {
        assert_eq!(self.dim, other.dim);
        let mut out = Jet2::zeros(self.dim);
        out.value = self.value * other.value;
        for k in 0..self.dim {
            out.gradient[k] = self.gradient[k] * other.value + self.value * other.gradient[k];
        }
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.value * other.hess(i, j)
                    + other.value * self.hess(i, j)
                    + self.gradient[i] * other.gradient[j]
                    + self.gradient[j] * other.gradient[i];
                out.hess[tri_index(i, j)] = v;
            }
        }
        out
    }

    /// Chain rule through `F` given F(v), F'(v), F''(v).
    fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let mut out = Jet2::zeros(self.dim);
        out.value = f0;
        for k in 0..self.dim {
            out.gradient[k] = f1 * self.gradient[k];
        }
        for i in 0..self.dim {
            for j in 0..=i {
                out.hess[tri_index(i, j)] =
                    f1 * self.hess(i, j) + f2 * self.gradient[i] * self.gradient[j];
            }
        }
        out
    }

    /// Integer power; negative exponents require a nonzero value.
    pub fn powi(&self, k: i32) -> Jet2 {
        let v = self.value;
        let f0 = v.powi(k);
        let f1 = f64::from(k) * v.powi(k - 1);
        let f2 = f64::from(k) * f64::from(k - 1) * v.powi(k - 2);
        self.compose(f0, f1, f2)
    }

    /// Real power; requires a positive value.
    pub fn powf(&self, e: f64) -> Jet2 {
        debug_assert!(self.value > 0.0, "powf needs a positive base");
        let v = self.value;
        self.compose(v.powf(e), e * v.powf(e - 1.0), e * (e - 1.0) * v.powf(e - 2.0))
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn recip(&self) -> Jet2 {
        self.powi(-1)
    }

    /// First-order truncation.
    pub fn jet1(&self) -> Jet1 {
        Jet1 {
            value: self.value,
            gradient: self.gradient.clone(),
        }
    }
}

/// Value and gradient only: the currency of divergence-argument assembly,
/// where second derivatives of the outer products are never needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl Jet1 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            value: 0.0,
            gradient: vec![0.0; dim],
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self {
            value,
            gradient: vec![0.0; dim],
        }
    }

    pub fn from_parts(value: f64, gradient: Vec<f64>) -> Self {
        Self { value, gradient }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn scale(&self, c: f64) -> Jet1 {
        Jet1 {
            value: self.value * c,
            gradient: self.gradient.iter().map(|g| g * c).collect(),
        }
    }

    fn compose(&self, f0: f64, f1: f64) -> Jet1 {
        Jet1 {
            value: f0,
            gradient: self.gradient.iter().map(|g| f1 * g).collect(),
        }
    }

    pub fn powi(&self, k: i32) -> Jet1 {
        self.compose(self.value.powi(k), f64::from(k) * self.value.powi(k - 1))
    }

    pub fn powf(&self, e: f64) -> Jet1 {
        debug_assert!(self.value > 0.0, "powf needs a positive base");
        self.compose(self.value.powf(e), e * self.value.powf(e - 1.0))
    }
}

impl std::ops::Add for &Jet1 {
    type Output = Jet1;
    fn add(self, rhs: &Jet1) -> Jet1 {
        assert_eq!(self.dim(), rhs.dim());
        Jet1 {
            value: self.value + rhs.value,
            gradient: self
                .gradient
                .iter()
                .zip(&rhs.gradient)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: &Jet1) -> Jet1 {
        self + &rhs.scale(-1.0)
    }
}

impl std::ops::Mul for &Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: &Jet1) -> Jet1 {
        assert_eq!(self.dim(), rhs.dim());
        Jet1 {
            value: self.value * rhs.value,
            gradient: self
                .gradient
                .iter()
                .zip(&rhs.gradient)
                .map(|(a, b)| a * rhs.value + self.value * b)
                .collect(),
        }
    }
}

/// One record of a polynomial coefficient table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub multi_index: Vec<u32>,
    pub coefficient: f64,
}

/// Sparse multivariate polynomial with exact jets and exact partials.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn new(dim: usize, raw: Vec<(Vec<u32>, f64)>) -> Self {
        let mut map = std::collections::BTreeMap::<Vec<u32>, f64>::new();
        for (exps, c) in raw {
            assert_eq!(exps.len(), dim, "multi-index length must equal dim");
            *map.entry(exps).or_insert(0.0) += c;
        }
        let terms = map.into_iter().filter(|(_, c)| *c != 0.0).collect();
        Self { dim, terms }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![(vec![0; dim], c)])
    }

    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut exps = vec![0u32; dim];
        exps[axis] = 1;
        Self::new(dim, vec![(exps, 1.0)])
    }

    pub fn from_records(dim: usize, records: &[PolyTerm]) -> Result<Self> {
        for r in records {
            if r.multi_index.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.multi_index.len(),
                });
            }
        }
        Ok(Self::new(
            dim,
            records
                .iter()
                .map(|r| (r.multi_index.clone(), r.coefficient))
                .collect(),
        ))
    }

    pub fn to_records(&self) -> Vec<PolyTerm> {
        self.terms
            .iter()
            .map(|(e, c)| PolyTerm {
                multi_index: e.clone(),
                coefficient: *c,
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        self.terms
            .iter()
            .map(|(exps, c)| {
                c * exps
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Exact 2-jet by monomial calculus.
    pub fn jet2(&self, x: &[f64]) -> Jet2 {
        assert_eq!(x.len(), self.dim);
        let mut out = Jet2::zeros(self.dim);
        for (exps, c) in &self.terms {
            // Powers xi^e, xi^(e-1), xi^(e-2) per axis (zero when e underflows).
            let p0: Vec<f64> = exps
                .iter()
                .zip(x)
                .map(|(&e, &xi)| xi.powi(e as i32))
                .collect();
            let p1: Vec<f64> = exps
                .iter()
                .zip(x)
                .map(|(&e, &xi)| {
                    if e >= 1 {
                        f64::from(e) * xi.powi(e as i32 - 1)
                    } else {
                        0.0
                    }
                })
                .collect();
            let p2: Vec<f64> = exps
                .iter()
                .zip(x)
                .map(|(&e, &xi)| {
                    if e >= 2 {
                        f64::from(e) * f64::from(e - 1) * xi.powi(e as i32 - 2)
                    } else {
                        0.0
                    }
                })
                .collect();
            let prod_skip = |skip: &[usize]| -> f64 {
                (0..self.dim)
                    .filter(|k| !skip.contains(k))
                    .map(|k| p0[k])
                    .product()
            };
            out.value += c * prod_skip(&[]);
            for i in 0..self.dim {
                if exps[i] >= 1 {
                    out.gradient[i] += c * p1[i] * prod_skip(&[i]);
                }
            }
            for i in 0..self.dim {
                for j in 0..=i {
                    let v = if i == j {
                        if exps[i] >= 2 {
                            c * p2[i] * prod_skip(&[i])
                        } else {
                            0.0
                        }
                    } else if exps[i] >= 1 && exps[j] >= 1 {
                        c * p1[i] * p1[j] * prod_skip(&[i, j])
                    } else {
                        0.0
                    };
                    out.hess[tri_index(i, j)] += v;
                }
            }
        }
        out
    }

    /// Exact partial derivative as a new polynomial.
    pub fn partial(&self, axis: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[axis] >= 1)
            .map(|(e, c)| {
                let mut d = e.clone();
                d[axis] -= 1;
                (d, c * f64::from(e[axis]))
            })
            .collect();
        Polynomial::new(self.dim, terms)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Polynomial::new(self.dim, terms)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::new(
            self.dim,
            self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                terms.push((exps, ca * cb));
            }
        }
        Polynomial::new(self.dim, terms)
    }
}

/// Support descriptor of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Defined on the whole box.
    #[serde(rename = "global")]
    Global,
    /// Vanishes (with first and second derivatives) on the shell boundary.
    #[serde(rename = "compact-in-shell")]
    CompactInShell,
}

/// A scalar field exposing an exact 2-jet at any point.
#[derive(Clone)]
pub struct FieldBundle {
    dim: usize,
    smoothness: u32,
    support: Support,
    eval: Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>,
}

impl std::fmt::Debug for FieldBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldBundle")
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl FieldBundle {
    pub fn from_fn<F>(dim: usize, smoothness: u32, support: Support, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Jet2 + Send + Sync + 'static,
    {
        Self {
            dim,
            smoothness,
            support,
            eval: Arc::new(eval),
        }
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        let dim = p.dim();
        Self::from_fn(dim, u32::MAX, Support::Global, move |x| p.jet2(x))
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self::from_fn(dim, u32::MAX, Support::Global, move |_| {
            Jet2::constant(dim, value)
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn jet(&self, point: &[f64]) -> Jet2 {
        assert_eq!(point.len(), self.dim, "point dimension mismatch");
        (self.eval)(point)
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        self.jet(point).value
    }

    /// Pointwise product with Leibniz jets.
    pub fn product(&self, other: &FieldBundle) -> FieldBundle {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let support = if self.support == Support::CompactInShell
            || other.support == Support::CompactInShell
        {
            Support::CompactInShell
        } else {
            Support::Global
        };
        FieldBundle::from_fn(
            self.dim,
            self.smoothness.min(other.smoothness),
            support,
            move |x| a(x).mul(&b(x)),
        )
    }

    pub fn sum(&self, other: &FieldBundle) -> FieldBundle {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let support = if self.support == other.support {
            self.support
        } else {
            Support::Global
        };
        FieldBundle::from_fn(
            self.dim,
            self.smoothness.min(other.smoothness),
            support,
            move |x| a(x).add(&b(x)),
        )
    }

    pub fn scale(&self, c: f64) -> FieldBundle {
        let a = self.eval.clone();
        FieldBundle::from_fn(self.dim, self.smoothness, self.support, move |x| {
            a(x).scale(c)
        })
    }

    /// Jet bundle backed by central finite differences of a value-only
    /// function; used to cross-check analytic jets, never to define them.
    pub fn from_values_fd<F>(d: &DomainParams, h: f64, value: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_fd_step(d, h)?;
        let dim = d.dim();
        Ok(Self::from_fn(dim, 2, Support::Global, move |x| {
            fd_jet2_unchecked(&value, x, h)
        }))
    }
}

/// Jet of the weight level function ψ: slope δ along the first axis, unit
/// curvature along every centered axis, offset α₀.
pub fn psi_jet2(p: &CarlemanParams, d: &DomainParams, point: &[f64]) -> Jet2 {
    let dim = d.dim();
    assert_eq!(point.len(), dim);
    let mut jet = Jet2::zeros(dim);
    let mut value = p.delta * point[0] + p.alpha0;
    jet.set_grad(0, p.delta);
    for axis in 1..dim {
        let t = point[axis] - d.center[axis];
        value += 0.5 * t * t;
        jet.set_grad(axis, t);
        jet.set_hess(axis, axis, 1.0);
    }
    jet.value = value;
    jet
}

/// Value of ψ alone, for hot paths that do not need the jet.
pub fn psi_value(p: &CarlemanParams, d: &DomainParams, point: &[f64]) -> f64 {
    debug_assert_eq!(point.len(), d.dim());
    let mut value = p.delta * point[0] + p.alpha0;
    for axis in 1..d.dim() {
        let t = point[axis] - d.center[axis];
        value += 0.5 * t * t;
    }
    value
}

/// Whether a point lies strictly inside the shell 0 < ψ − α₀ < γ, x₁ > 0.
pub fn in_shell(p: &CarlemanParams, d: &DomainParams, point: &[f64]) -> bool {
    if point[0] <= 0.0 {
        return false;
    }
    let psi = psi_value(p, d, point);
    psi > p.alpha0 && psi < p.alpha0 + p.gamma
}

/// Compactly supported bump on the shell: B = [s(1−s)]³·x₁³ with
/// s = (ψ − α₀)/γ, clamped to zero outside 0 < s < 1, x₁ > 0. The cubic
/// vanishing order makes B, ∇B and the Hessian vanish on all three
/// boundary pieces, so divergence integrals against B-modulated fields
/// reduce to interior quadrature error.
pub fn make_bump(p: &CarlemanParams, d: &DomainParams) -> FieldBundle {
    let p = p.clone();
    let d = d.clone();
    let dim = d.dim();
    FieldBundle::from_fn(dim, 2, Support::CompactInShell, move |x| {
        let psi = psi_jet2(&p, &d, x);
        let s = psi
            .add(&Jet2::constant(dim, -p.alpha0))
            .scale(1.0 / p.gamma);
        if s.value <= 0.0 || s.value >= 1.0 || x[0] <= 0.0 {
            return Jet2::zeros(dim);
        }
        let one_minus = Jet2::constant(dim, 1.0).sub(&s);
        let t = s.mul(&one_minus);
        let t3 = t.mul(&t).mul(&t);
        let x1 = Jet2::coordinate(dim, 0, x[0]);
        t3.mul(&x1.powi(3))
    })
}

/// The level function ψ as an explicit polynomial: slope δ along the first
/// axis, offset α₀, and ½(t − center)² along every other axis. Agrees with
/// [`psi_jet2`] everywhere; exists so that higher derivatives of composites
/// built on ψ stay symbolic.
pub fn psi_polynomial(p: &CarlemanParams, d: &DomainParams) -> Polynomial {
    let dim = d.dim();
    let mut raw = vec![(vec![0u32; dim], p.alpha0)];
    let mut linear = vec![0u32; dim];
    linear[0] = 1;
    raw.push((linear, p.delta));
    for axis in 1..dim {
        let c = d.center[axis];
        let mut sq = vec![0u32; dim];
        sq[axis] = 2;
        raw.push((sq, 0.5));
        if c != 0.0 {
            let mut lin = vec![0u32; dim];
            lin[axis] = 1;
            raw.push((lin, -c));
            raw.push((vec![0u32; dim], 0.5 * c * c));
        }
    }
    Polynomial::new(dim, raw)
}

/// Polynomial with the same interior values as [`make_bump`]:
/// B = [s(1−s)]³·x₁³ with s = (ψ − α₀)/γ, but without the outside-the-shell
/// clamp. Since B and its first two derivatives vanish on the shell
/// boundary, fields modulated by B behave as compactly supported for every
/// integral taken over the shell, while staying polynomial — so exact jets
/// of any order remain available through [`Polynomial::partial`].
pub fn bump_polynomial(p: &CarlemanParams, d: &DomainParams) -> Polynomial {
    let dim = d.dim();
    let s = psi_polynomial(p, d)
        .add(&Polynomial::constant(dim, -p.alpha0))
        .scale(1.0 / p.gamma);
    let one_minus = Polynomial::constant(dim, 1.0).add(&s.scale(-1.0));
    let st = s.mul(&one_minus);
    let st3 = st.mul(&st).mul(&st);
    let x1 = Polynomial::coordinate(dim, 0);
    st3.mul(&x1).mul(&x1).mul(&x1)
}

/// Seeded polynomial with every monomial of total degree ≤ `degree` and
/// coefficients drawn uniformly from [−1, 1]. The stream cipher generator
/// makes the result reproducible across platforms for a fixed seed.
pub fn random_polynomial(dim: usize, degree: u32, seed: u64) -> Polynomial {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::new();
    let mut expo = vec![0u32; dim];
    loop {
        if expo.iter().sum::<u32>() <= degree {
            raw.push((expo.clone(), rng.gen_range(-1.0..=1.0)));
        }
        // Odometer over the (degree+1)-ary exponent tuple, most significant
        // axis last, so enumeration order is independent of coefficients.
        let mut axis = 0;
        loop {
            if axis == dim {
                return Polynomial::new(dim, raw);
            }
            expo[axis] += 1;
            if expo[axis] <= degree {
                break;
            }
            expo[axis] = 0;
            axis += 1;
        }
    }
}

fn check_fd_step(d: &DomainParams, h: f64) -> Result<()> {
    let min_extent = d
        .bounding_box
        .iter()
        .map(|[lo, hi]| hi - lo)
        .fold(f64::INFINITY, f64::min);
    let floor = 1e-8 * min_extent;
    if !(h > floor) {
        return Err(Error::StepUnderflow { h, min: floor });
    }
    Ok(())
}

fn fd_jet2_unchecked<F: Fn(&[f64]) -> f64>(f: &F, point: &[f64], h: f64) -> Jet2 {
    let dim = point.len();
    let mut jet = Jet2::zeros(dim);
    let center = f(point);
    jet.value = center;
    let mut buf = point.to_vec();
    let at = |buf: &mut [f64], i: usize, di: f64, j: usize, dj: f64, f: &F| {
        let (oi, oj) = (buf[i], buf[j]);
        buf[i] += di;
        buf[j] += dj;
        let v = f(buf);
        buf[i] = oi;
        buf[j] = oj;
        v
    };
    for i in 0..dim {
        let fp = at(&mut buf, i, h, i, 0.0, f);
        let fm = at(&mut buf, i, -h, i, 0.0, f);
        jet.set_grad(i, (fp - fm) / (2.0 * h));
        jet.set_hess(i, i, (fp - 2.0 * center + fm) / (h * h));
    }
    for i in 0..dim {
        for j in 0..i {
            let pp = at(&mut buf, i, h, j, h, f);
            let pm = at(&mut buf, i, h, j, -h, f);
            let mp = at(&mut buf, i, -h, j, h, f);
            let mm = at(&mut buf, i, -h, j, -h, f);
            jet.set_hess(i, j, (pp - pm - mp + mm) / (4.0 * h * h));
        }
    }
    jet
}

/// Second-order central-difference jet of a value-only field.
///
/// Cross-check only: O(h²) accurate for C⁴ fields. Steps below 10⁻⁸ of the
/// smallest box extent are rejected as underflow.
pub fn fd_jet2<F: Fn(&[f64]) -> f64>(
    f: &F,
    d: &DomainParams,
    point: &[f64],
    h: f64,
) -> Result<Jet2> {
    check_fd_step(d, h)?;
    Ok(fd_jet2_unchecked(f, point, h))
}
