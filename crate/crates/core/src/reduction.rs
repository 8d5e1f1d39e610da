//! Division by the source factor and the integro-differential identity.
//!
//! Factoring the unknown as u = w·f turns the operator equation into an
//! equation for w whose lower-order coefficients absorb f and its
//! derivatives ([`reduced_coefficients`]). Differentiating that equation
//! along the last axis and writing w as the primitive of z = ∂w/∂y_m turns
//! it into an integro-differential equation for z alone; this module
//! evaluates the primitives with their derivative variants
//! ([`primitive_bundle`]), the residual of the z-equation
//! ([`residual_eq17`]), and the reconstruction identity connecting the two
//! equations ([`check_reduction_identity`]).
//!
//! Primitive convention: the derivation needs the oriented primitive
//! J z = ∫₀^{y_m} z dτ, which is negative for y_m < 0 when z > 0. The
//! unsigned variant I z = sign(y_m)·J z is also provided; the two agree for
//! y_m ≥ 0 and differ by sign below the hyperplane. Identities in this
//! module use J; the integral-inequality checks elsewhere use I.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::fields::{
    bump_polynomial, FieldBundle, Jet2, PolyTerm, Polynomial, Support,
};
use crate::operators::{CoefficientManifest, CoefficientSet};
use crate::params::{CarlemanParams, DomainParams};
use crate::{Error, Result};

/// Pointwise quotient u/f with quotient-rule-exact jets.
///
/// The divisor floor `f_min` must be positive; evaluation at a point where
/// |f| falls below the floor aborts with a message naming the offending
/// value, since a quotient jet near a zero of f is garbage.
pub fn divide_by_f(u: &FieldBundle, f: &FieldBundle, f_min: f64) -> Result<FieldBundle> {
    if u.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: f.dim(),
        });
    }
    if !(f_min > 0.0) {
        return Err(Error::Config(format!(
            "divisor floor must be strictly positive, got {f_min}"
        )));
    }
    let (uj, fj) = (u.clone(), f.clone());
    Ok(FieldBundle::from_fn(
        u.dim(),
        u.smoothness().min(f.smoothness()),
        u.support(),
        move |x| {
            let denom = fj.jet(x);
            assert!(
                denom.value.abs() >= f_min,
                "divisor magnitude {:e} below the floor {f_min:e} at {x:?}",
                denom.value.abs()
            );
            uj.jet(x).mul(&denom.recip())
        },
    ))
}

/// Lower-order coefficients of the factored equation, with exact jets.
///
/// Writing u = w·f and dividing through by f leaves the principal part
/// acting on w and replaces the first- and zero-order coefficients by
///
/// ```text
/// ā₁ = (2(x₁+η₀)⁻² f_{x₁} + a₁ f)/f,
/// āᵢ = (2 f_{xᵢ} + aᵢ f)/f                       (i = 2…n),
/// b̄ⱼ = (−Σᵢ (a_ji + a_ij) f_{yᵢ} + bⱼ f)/f       (j = 1…m),
/// ā₀ = ((x₁+η₀)⁻² f_{x₁x₁} + Δ'f − Σ aᵢⱼ f_{yᵢyⱼ}
///       + Σ aᵢ f_{xᵢ} + Σ bⱼ f_{yⱼ} + a₀ f)/f.
/// ```
///
/// Every numerator is assembled symbolically from the polynomial backing,
/// so the bundles expose exact values, gradients and Hessians even though
/// they involve second derivatives of f.
#[derive(Clone)]
pub struct ReducedCoefficients {
    source: CoefficientSet,
    abar: Vec<FieldBundle>,
    bbar: Vec<FieldBundle>,
    abar0: FieldBundle,
    f_min: f64,
}

impl std::fmt::Debug for ReducedCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReducedCoefficients")
            .field("n", &self.source.n())
            .field("m", &self.source.m())
            .field("f_min", &self.f_min)
            .finish_non_exhaustive()
    }
}

impl ReducedCoefficients {
    pub fn n(&self) -> usize {
        self.source.n()
    }

    pub fn m(&self) -> usize {
        self.source.m()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// The coefficient set the reduction was built from.
    pub fn source(&self) -> &CoefficientSet {
        &self.source
    }

    /// Divisor floor applied to f at every quotient evaluation.
    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    /// Reduced first-order coefficient along xᵢ, 1-based i ≤ n.
    pub fn abar(&self, i: usize) -> &FieldBundle {
        assert!((1..=self.n()).contains(&i), "abar index {i} out of 1..=n");
        &self.abar[i - 1]
    }

    /// Reduced first-order coefficient along yⱼ, 1-based j ≤ m.
    pub fn bbar(&self, j: usize) -> &FieldBundle {
        assert!((1..=self.m()).contains(&j), "bbar index {j} out of 1..=m");
        &self.bbar[j - 1]
    }

    /// Reduced zero-order coefficient.
    pub fn abar0(&self) -> &FieldBundle {
        &self.abar0
    }
}

/// Quotient bundle (shifted·(x₁+η₀)⁻² + plain)/f with all jets exact.
fn quotient_bundle(
    shifted: Option<Polynomial>,
    plain: Polynomial,
    f: Polynomial,
    eta0: f64,
    f_min: f64,
) -> FieldBundle {
    let dim = plain.dim();
    FieldBundle::from_fn(dim, u32::MAX, Support::Global, move |x| {
        let fj = f.jet2(x);
        assert!(
            fj.value.abs() >= f_min,
            "source factor magnitude {:e} below the floor {f_min:e} at {x:?}",
            fj.value.abs()
        );
        let mut num = plain.jet2(x);
        if let Some(s) = &shifted {
            let mut w = Jet2::coordinate(dim, 0, x[0]);
            w.value += eta0;
            num = num.add(&s.jet2(x).mul(&w.powi(-2)));
        }
        num.mul(&fj.recip())
    })
}

/// Build the reduced lower-order coefficients from a polynomial-backed set.
///
/// The divisor floor is 10⁻⁶ of the largest |f| over the box lattice; the
/// same lattice must show |f| above the floor at every shell point, since
/// the whole reduction presumes f bounded away from zero there. Sets built
/// from opaque bundles are rejected: the numerators need derivatives of f
/// beyond what a 2-jet carries, so only symbolic backing keeps them exact.
pub fn reduced_coefficients(
    c: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
) -> Result<ReducedCoefficients> {
    if c.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            got: c.dim(),
        });
    }
    let backing = c.polynomials().ok_or_else(|| {
        Error::Config(
            "reduced coefficients need polynomial-backed sources: quotient \
             jets involve derivatives of f beyond second order"
                .to_string(),
        )
    })?;
    let (n, m, dim) = (c.n(), c.m(), c.dim());
    let f = backing.f.clone();

    // Divisor floor from the lattice supremum of |f|, then the shell check.
    let lattice = d.lattice(9);
    let sup_f = lattice
        .iter()
        .map(|pt| f.eval(pt).abs())
        .fold(0.0f64, f64::max);
    if sup_f == 0.0 {
        return Err(Error::SmallDivisor {
            value: 0.0,
            floor: f64::MIN_POSITIVE,
        });
    }
    let f_min = 1e-6 * sup_f;
    for pt in &lattice {
        if crate::fields::in_shell(p, d, pt) {
            let value = f.eval(pt).abs();
            if value < f_min {
                return Err(Error::SmallDivisor { value, floor: f_min });
            }
        }
    }

    let fx: Vec<Polynomial> = (0..dim).map(|axis| f.partial(axis)).collect();

    // ā₁ and āᵢ.
    let mut abar = Vec::with_capacity(n);
    for i in 0..n {
        let plain = backing.a_x[i].mul(&f);
        let bundle = if i == 0 {
            quotient_bundle(Some(fx[0].scale(2.0)), plain, f.clone(), p.eta0, f_min)
        } else {
            quotient_bundle(None, fx[i].scale(2.0).add(&plain), f.clone(), p.eta0, f_min)
        };
        abar.push(bundle);
    }

    // b̄ⱼ: both printed summands kept separate; they merge to 2Σ aᵢⱼ f_{yᵢ}
    // only when the table is symmetric.
    let mut bbar = Vec::with_capacity(m);
    for j in 0..m {
        let mut num = backing.b_y[j].mul(&f);
        for i in 0..m {
            let a_ji = &backing.a[j * m + i];
            let a_ij = &backing.a[i * m + j];
            num = num.add(&a_ji.add(a_ij).mul(&fx[n + i]).scale(-1.0));
        }
        bbar.push(quotient_bundle(None, num, f.clone(), p.eta0, f_min));
    }

    // ā₀: the (x₁+η₀)⁻² piece is f_{x₁x₁}; the rest is polynomial.
    let mut plain0 = backing.a0.mul(&f);
    for i in 1..n {
        plain0 = plain0.add(&fx[i].partial(i));
    }
    for i in 0..m {
        for j in 0..m {
            let fyy = fx[n + i].partial(n + j);
            plain0 = plain0.add(&backing.a[i * m + j].mul(&fyy).scale(-1.0));
        }
    }
    for i in 0..n {
        plain0 = plain0.add(&backing.a_x[i].mul(&fx[i]));
    }
    for j in 0..m {
        plain0 = plain0.add(&backing.b_y[j].mul(&fx[n + j]));
    }
    let abar0 = quotient_bundle(
        Some(fx[0].partial(0)),
        plain0,
        f.clone(),
        p.eta0,
        f_min,
    );

    Ok(ReducedCoefficients {
        source: c.clone(),
        abar,
        bbar,
        abar0,
        f_min,
    })
}

/// The oriented primitive and its derivative variants at one point.
///
/// `signed` is J z = ∫₀^{y_m} z dτ; `signed_dx[i]`/`signed_dy[j]` carry the
/// axis derivatives, computed under the integral sign, except the last one:
/// ∂(J z)/∂y_m is z itself by the fundamental theorem. The `unsigned`
/// family is sign(y_m) times the signed one, matching the piecewise
/// definition that flips the integration limits below the hyperplane.
#[derive(Debug, Clone)]
pub struct PrimitiveEval {
    pub signed: f64,
    pub signed_dx: Vec<f64>,
    pub signed_dy: Vec<f64>,
    pub unsigned: f64,
    pub unsigned_dx: Vec<f64>,
    pub unsigned_dy: Vec<f64>,
}

/// Composite Simpson weights over the oriented interval [0, y_m].
///
/// The step is signed, so the sum is the oriented integral; an odd panel
/// request is rounded up and everything below 8 panels is raised to 8.
fn simpson_nodes(y_m: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = {
        let p = panels.max(8);
        p + (p & 1)
    };
    let h = y_m / panels as f64;
    (0..=panels)
        .map(|k| {
            let tau = y_m * (k as f64 / panels as f64);
            let weight = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (tau, weight * h / 3.0)
        })
        .collect()
}

/// Oriented primitive J z = ∫₀^{y_m} z(x, y′, τ) dτ alone.
pub fn integral_j(z: &FieldBundle, point: &[f64], panels: usize) -> f64 {
    let last = point.len() - 1;
    let mut buf = point.to_vec();
    simpson_nodes(point[last], panels)
        .into_iter()
        .map(|(tau, wt)| {
            buf[last] = tau;
            wt * z.value(&buf)
        })
        .sum()
}

/// Evaluate the primitive together with every derivative variant.
pub fn primitive_bundle(
    z: &FieldBundle,
    d: &DomainParams,
    point: &[f64],
    panels: usize,
) -> PrimitiveEval {
    primitive_parts(z, d.n, d.m, point, panels)
}

fn primitive_parts(
    z: &FieldBundle,
    n: usize,
    m: usize,
    point: &[f64],
    panels: usize,
) -> PrimitiveEval {
    let last = n + m - 1;
    let mut signed = 0.0;
    let mut signed_dx = vec![0.0; n];
    let mut signed_dy = vec![0.0; m];
    let mut buf = point.to_vec();
    for (tau, wt) in simpson_nodes(point[last], panels) {
        buf[last] = tau;
        let jet = z.jet(&buf);
        signed += wt * jet.value;
        for (i, slot) in signed_dx.iter_mut().enumerate() {
            *slot += wt * jet.grad(i);
        }
        for (j, slot) in signed_dy.iter_mut().enumerate().take(m - 1) {
            *slot += wt * jet.grad(n + j);
        }
    }
    // Fundamental theorem on the integration axis: no quadrature involved.
    signed_dy[m - 1] = z.value(point);

    let sign = if point[last] < 0.0 { -1.0 } else { 1.0 };
    PrimitiveEval {
        unsigned: sign * signed,
        unsigned_dx: signed_dx.iter().map(|v| sign * v).collect(),
        unsigned_dy: signed_dy.iter().map(|v| sign * v).collect(),
        signed,
        signed_dx,
        signed_dy,
    }
}

/// Residual of the integro-differential equation for z at one point:
///
/// ```text
/// L₀z + (x₁+η₀)·( Σ āᵢ z_{xᵢ} + Σ b̄ⱼ z_{yⱼ} + ā₀ z
///               + Σ (∂āᵢ/∂y_m) J_{xᵢ}z + Σ (∂b̄ⱼ/∂y_m) J_{yⱼ}z
///               + (∂ā₀/∂y_m) J z ),
/// ```
///
/// with the oriented primitive J throughout. Vanishes identically when z is
/// the last-axis derivative of a w that solves the factored equation with
/// zero data on the hyperplane.
pub fn residual_eq17(
    z: &FieldBundle,
    rc: &ReducedCoefficients,
    p: &CarlemanParams,
    point: &[f64],
    panels: usize,
) -> f64 {
    let (n, m, dim) = (rc.n(), rc.m(), rc.dim());
    let jet = z.jet(point);
    let l0 = rc
        .source()
        .apply_l0_to_jet(p, &jet, point)
        .expect("evaluation point must keep x1 + eta0 positive");
    let prim = primitive_parts(z, n, m, point, panels);
    let mut acc = 0.0;
    for i in 1..=n {
        let a = rc.abar(i).jet(point);
        acc += a.value * jet.grad(i - 1) + a.grad(dim - 1) * prim.signed_dx[i - 1];
    }
    for j in 1..=m {
        let b = rc.bbar(j).jet(point);
        acc += b.value * jet.grad(n + j - 1) + b.grad(dim - 1) * prim.signed_dy[j - 1];
    }
    let a0 = rc.abar0().jet(point);
    acc += a0.value * jet.value + a0.grad(dim - 1) * prim.signed;
    l0 + p.shift(point[0]) * acc
}

/// Residual between the two routes to the differentiated equation.
///
/// Route one differentiates the factored equation directly: it uses the
/// exact jets of w for the coefficient-derivative terms. Route two is the
/// z-only equation of [`residual_eq17`], which reconstructs those same
/// w-quantities through the oriented primitive of z. For a consistent pair
/// (z = ∂w/∂y_m, w vanishing on the hyperplane) the difference is pure
/// quadrature error and shrinks at the Simpson rate under panel doubling.
///
/// The hyperplane condition is a precondition and is checked by sampling w
/// on the fiber through `point`.
pub fn check_reduction_identity(
    w: &FieldBundle,
    z: &FieldBundle,
    rc: &ReducedCoefficients,
    p: &CarlemanParams,
    point: &[f64],
    panels: usize,
) -> Result<f64> {
    let (n, m, dim) = (rc.n(), rc.m(), rc.dim());
    if w.dim() != dim || z.dim() != dim || point.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.dim().max(z.dim()).max(point.len()),
        });
    }
    let wjet = w.jet(point);
    let mut base = point.to_vec();
    base[dim - 1] = 0.0;
    let trace = w.value(&base);
    let scale = wjet.value.abs().max(1.0);
    if trace.abs() > 1e-9 * scale {
        return Err(Error::Config(format!(
            "w must vanish on the last-axis hyperplane; found {trace:e} at {base:?}"
        )));
    }

    let zjet = z.jet(point);
    let l0 = rc
        .source()
        .apply_l0_to_jet(p, &zjet, point)
        .expect("evaluation point must keep x1 + eta0 positive");
    let mut acc = 0.0;
    for i in 1..=n {
        let a = rc.abar(i).jet(point);
        acc += a.value * zjet.grad(i - 1) + a.grad(dim - 1) * wjet.grad(i - 1);
    }
    for j in 1..=m {
        let b = rc.bbar(j).jet(point);
        acc += b.value * zjet.grad(n + j - 1) + b.grad(dim - 1) * wjet.grad(n + j - 1);
    }
    let a0 = rc.abar0().jet(point);
    acc += a0.value * zjet.value + a0.grad(dim - 1) * wjet.value;
    let direct = l0 + p.shift(point[0]) * acc;

    let reconstructed = residual_eq17(z, rc, p, point, panels);
    Ok((direct - reconstructed).abs())
}

/// A manufactured problem with every identity checkable by construction.
///
/// The unknown is built directly as w = κ·y_m·g·B with a seeded low-degree
/// profile g and the polynomial bump B, so the zero conditions on both
/// hyperplanes hold structurally, z = ∂w/∂y_m is symbolic, and the support
/// is compact in the shell. The coefficient table is a seeded symmetric
/// perturbation of the identity, independent of the last axis, with a
/// positive source factor.
pub struct InverseProblemInstance {
    coeffs: CoefficientSet,
    reduced: ReducedCoefficients,
    w_poly: Polynomial,
    w: FieldBundle,
    z: FieldBundle,
    seed: u64,
}

impl std::fmt::Debug for InverseProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseProblemInstance")
            .field("n", &self.coeffs.n())
            .field("m", &self.coeffs.m())
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Serialized instance: the coefficient manifest plus the unknown's term
/// table (z is rederived on load, never stored).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceManifest {
    pub coefficients: CoefficientManifest,
    pub unknown: Vec<PolyTerm>,
    pub seed: u64,
}

impl InverseProblemInstance {
    /// Seeded instance on the given shell geometry.
    ///
    /// `amplitude` scales the coefficient perturbations; 0.05 keeps the
    /// quadratic-form floor near 1 while exercising variable coefficients.
    pub fn manufactured(
        p: &CarlemanParams,
        d: &DomainParams,
        seed: u64,
        amplitude: f64,
    ) -> Result<Self> {
        let (n, m, dim) = (d.n, d.m, d.dim());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut next_seed = || rng.gen::<u64>();

        // Symmetric aᵢⱼ, independent of the last axis: drop every monomial
        // touching it rather than hoping the generator avoids them.
        let strip_last = |poly: &Polynomial| -> Polynomial {
            let records: Vec<(Vec<u32>, f64)> = poly
                .to_records()
                .into_iter()
                .filter(|t| t.multi_index[dim - 1] == 0)
                .map(|t| (t.multi_index, t.coefficient))
                .collect();
            Polynomial::new(dim, records)
        };
        let mut a = vec![Polynomial::zero(dim); m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut entry =
                    strip_last(&crate::fields::random_polynomial(dim, 2, next_seed()))
                        .scale(amplitude);
                if i == j {
                    entry = entry.add(&Polynomial::constant(dim, 1.0));
                }
                a[i * m + j] = entry.clone();
                a[j * m + i] = entry;
            }
        }
        let a_x: Vec<Polynomial> = (0..n)
            .map(|_| crate::fields::random_polynomial(dim, 2, next_seed()).scale(amplitude))
            .collect();
        let b_y: Vec<Polynomial> = (0..m)
            .map(|_| crate::fields::random_polynomial(dim, 2, next_seed()).scale(amplitude))
            .collect();
        let a0 = crate::fields::random_polynomial(dim, 2, next_seed()).scale(amplitude);
        // Positive source factor: 1 + small perturbation.
        let f = Polynomial::constant(dim, 1.0)
            .add(&crate::fields::random_polynomial(dim, 2, next_seed()).scale(0.25 * amplitude));
        let bound = 1.0 + 8.0 * amplitude;
        let coeffs = CoefficientSet::from_polynomials(n, m, a, a_x, b_y, a0, f, bound)?;

        // Unknown: κ·y_m·g·B, normalized so the bump's interior peak does
        // not bury the field in its (γ/δ)³ smallness.
        let g = Polynomial::constant(dim, 1.0)
            .add(&crate::fields::random_polynomial(dim, 2, next_seed()).scale(0.5));
        let kappa = 64.0 * (p.delta / p.gamma).powi(3);
        let y_m = Polynomial::coordinate(dim, dim - 1);
        let w_poly = y_m
            .mul(&g)
            .mul(&bump_polynomial(p, d))
            .scale(kappa);
        Self::from_parts(coeffs, w_poly, p, d, seed)
    }

    fn from_parts(
        coeffs: CoefficientSet,
        w_poly: Polynomial,
        p: &CarlemanParams,
        d: &DomainParams,
        seed: u64,
    ) -> Result<Self> {
        let reduced = reduced_coefficients(&coeffs, p, d)?;
        let z_poly = w_poly.partial(d.dim() - 1);
        let wp = w_poly.clone();
        let zp = z_poly.clone();
        let w = FieldBundle::from_fn(d.dim(), u32::MAX, Support::CompactInShell, move |x| {
            wp.jet2(x)
        });
        let z = FieldBundle::from_fn(d.dim(), u32::MAX, Support::CompactInShell, move |x| {
            zp.jet2(x)
        });
        Ok(Self {
            coeffs,
            reduced,
            w_poly,
            w,
            z,
            seed,
        })
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn reduced(&self) -> &ReducedCoefficients {
        &self.reduced
    }

    /// The manufactured unknown w.
    pub fn w(&self) -> &FieldBundle {
        &self.w
    }

    /// z = ∂w/∂y_m, differentiated symbolically.
    pub fn z(&self) -> &FieldBundle {
        &self.z
    }

    /// Largest violation of the three zero conditions over a sample sweep:
    /// w and w_{x₁} on {x₁ = 0}, and w on {y_m = 0}.
    pub fn boundary_defect(&self, d: &DomainParams, per_axis: usize) -> f64 {
        let dim = d.dim();
        let mut worst = 0.0f64;
        for pt in d.lattice(per_axis) {
            let mut first = pt.clone();
            first[0] = 0.0;
            let jet = self.w.jet(&first);
            worst = worst.max(jet.value.abs()).max(jet.grad(0).abs());
            let mut last = pt;
            last[dim - 1] = 0.0;
            worst = worst.max(self.w.value(&last).abs());
        }
        worst
    }

    pub fn to_manifest(&self) -> Result<InstanceManifest> {
        Ok(InstanceManifest {
            coefficients: self.coeffs.to_manifest()?,
            unknown: self.w_poly.to_records(),
            seed: self.seed,
        })
    }

    pub fn from_manifest(
        manifest: &InstanceManifest,
        p: &CarlemanParams,
        d: &DomainParams,
    ) -> Result<Self> {
        let coeffs = CoefficientSet::from_manifest(&manifest.coefficients)?;
        let w_poly = Polynomial::from_records(d.dim(), &manifest.unknown)?;
        Self::from_parts(coeffs, w_poly, p, d, manifest.seed)
    }
}
