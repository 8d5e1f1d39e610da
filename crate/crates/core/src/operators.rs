//! The second-order operator under study and its coefficient data.
//!
//! The operator acts on n spatial axes x and m axes y as
//!
//! ```text
//! L u = Σ u_{xᵢxᵢ} − Σ aᵢⱼ u_{yᵢyⱼ} + Σ aᵢ u_{xᵢ} + Σ bⱼ u_{yⱼ} + a₀ u,
//! ```
//!
//! together with its degenerate principal part
//!
//! ```text
//! L₀u = (x₁+η₀)⁻¹ u_{x₁x₁} + (x₁+η₀)(Δ'u − Σ aᵢⱼ u_{yᵢyⱼ}),
//! ```
//!
//! where Δ' sums the second x-derivatives over axes 2..n. A
//! [`CoefficientSet`] carries the aᵢⱼ, the lower-order coefficients, the
//! factored source profile f and the declared C² bound, and can audit its
//! own structural requirements: symmetry of aᵢⱼ, independence from the last
//! y axis, and the bound itself.

use serde::{Deserialize, Serialize};

use crate::fields::{FieldBundle, Jet2, PolyTerm, Polynomial};
use crate::params::{CarlemanParams, ConditionCheck, DomainParams, GridSpec};
use crate::{Error, Result};

/// Polynomial sources for every coefficient; retained when the set was
/// built from polynomials so exact higher derivatives stay available.
#[derive(Debug, Clone)]
pub struct PolyBacking {
    /// Row-major m×m table of aᵢⱼ.
    pub a: Vec<Polynomial>,
    pub a_x: Vec<Polynomial>,
    pub b_y: Vec<Polynomial>,
    pub a0: Polynomial,
    pub f: Polynomial,
}

/// Coefficients of the operator plus the factored source profile f.
#[derive(Clone)]
pub struct CoefficientSet {
    n: usize,
    m: usize,
    bound: f64,
    /// Row-major m×m table of aᵢⱼ.
    a: Vec<FieldBundle>,
    a_x: Vec<FieldBundle>,
    b_y: Vec<FieldBundle>,
    a0: FieldBundle,
    f: FieldBundle,
    poly: Option<PolyBacking>,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("bound", &self.bound)
            .field("polynomial_backed", &self.poly.is_some())
            .finish()
    }
}

/// Serialized form: inline coefficient tables, one record list per entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientManifest {
    pub n: usize,
    pub m: usize,
    pub bound: f64,
    /// m×m nested table of aᵢⱼ records.
    pub second_order_y: Vec<Vec<Vec<PolyTerm>>>,
    pub first_order_x: Vec<Vec<PolyTerm>>,
    pub first_order_y: Vec<Vec<PolyTerm>>,
    pub zero_order: Vec<PolyTerm>,
    pub source_factor: Vec<PolyTerm>,
}

impl CoefficientSet {
    /// Build from explicit polynomials. `a` is the row-major m×m table.
    #[allow(clippy::too_many_arguments)]
    pub fn from_polynomials(
        n: usize,
        m: usize,
        a: Vec<Polynomial>,
        a_x: Vec<Polynomial>,
        b_y: Vec<Polynomial>,
        a0: Polynomial,
        f: Polynomial,
        bound: f64,
    ) -> Result<Self> {
        let dim = n + m;
        if a.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: a.len(),
            });
        }
        if a_x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a_x.len(),
            });
        }
        if b_y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b_y.len(),
            });
        }
        for poly in a.iter().chain(&a_x).chain(&b_y).chain([&a0, &f]) {
            if poly.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: poly.dim(),
                });
            }
        }
        let backing = PolyBacking {
            a: a.clone(),
            a_x: a_x.clone(),
            b_y: b_y.clone(),
            a0: a0.clone(),
            f: f.clone(),
        };
        Ok(Self {
            n,
            m,
            bound,
            a: a.into_iter().map(FieldBundle::from_polynomial).collect(),
            a_x: a_x.into_iter().map(FieldBundle::from_polynomial).collect(),
            b_y: b_y.into_iter().map(FieldBundle::from_polynomial).collect(),
            a0: FieldBundle::from_polynomial(a0),
            f: FieldBundle::from_polynomial(f),
            poly: Some(backing),
        })
    }

    /// Build from arbitrary field bundles (used for transformed
    /// coefficients that are no longer polynomial).
    #[allow(clippy::too_many_arguments)]
    pub fn from_bundles(
        n: usize,
        m: usize,
        a: Vec<FieldBundle>,
        a_x: Vec<FieldBundle>,
        b_y: Vec<FieldBundle>,
        a0: FieldBundle,
        f: FieldBundle,
        bound: f64,
    ) -> Result<Self> {
        if a.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: a.len(),
            });
        }
        if a_x.len() != n || b_y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: n + m,
                got: a_x.len() + b_y.len(),
            });
        }
        Ok(Self {
            n,
            m,
            bound,
            a,
            a_x,
            b_y,
            a0,
            f,
            poly: None,
        })
    }

    /// aᵢⱼ = diag·δᵢⱼ constants, no lower-order terms, f ≡ 1.
    pub fn diagonal_constant(n: usize, m: usize, diag: f64, bound: f64) -> Self {
        let dim = n + m;
        let mut a = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                a.push(if i == j {
                    Polynomial::constant(dim, diag)
                } else {
                    Polynomial::zero(dim)
                });
            }
        }
        Self::from_polynomials(
            n,
            m,
            a,
            vec![Polynomial::zero(dim); n],
            vec![Polynomial::zero(dim); m],
            Polynomial::zero(dim),
            Polynomial::constant(dim, 1.0),
            bound,
        )
        .expect("constant table dimensions are consistent by construction")
    }

    /// aᵢⱼ = scale·x₁·δᵢⱼ, the standard variable-coefficient exercise set:
    /// its x₁-slope matrix is exactly −scale·δᵢⱼ.
    pub fn x1_scaled_identity(n: usize, m: usize, scale: f64, bound: f64) -> Self {
        let dim = n + m;
        let x1 = Polynomial::coordinate(dim, 0);
        let mut a = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                a.push(if i == j {
                    x1.scale(scale)
                } else {
                    Polynomial::zero(dim)
                });
            }
        }
        Self::from_polynomials(
            n,
            m,
            a,
            vec![Polynomial::zero(dim); n],
            vec![Polynomial::zero(dim); m],
            Polynomial::zero(dim),
            Polynomial::constant(dim, 1.0),
            bound,
        )
        .expect("constant table dimensions are consistent by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    /// Declared C² bound M.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn polynomials(&self) -> Option<&PolyBacking> {
        self.poly.as_ref()
    }

    pub fn a_jet(&self, i: usize, j: usize, point: &[f64]) -> Jet2 {
        self.a[i * self.m + j].jet(point)
    }

    pub fn a_value(&self, i: usize, j: usize, point: &[f64]) -> f64 {
        self.a[i * self.m + j].value(point)
    }

    pub fn ax_jet(&self, i: usize, point: &[f64]) -> Jet2 {
        self.a_x[i].jet(point)
    }

    pub fn by_jet(&self, j: usize, point: &[f64]) -> Jet2 {
        self.b_y[j].jet(point)
    }

    pub fn a0_jet(&self, point: &[f64]) -> Jet2 {
        self.a0.jet(point)
    }

    pub fn f_field(&self) -> &FieldBundle {
        &self.f
    }

    pub fn f_jet(&self, point: &[f64]) -> Jet2 {
        self.f.jet(point)
    }

    /// All m² second-order jets at one point, row-major.
    pub fn a_jets(&self, point: &[f64]) -> Vec<Jet2> {
        self.a.iter().map(|f| f.jet(point)).collect()
    }

    /// Full operator L applied to a field at a point.
    pub fn apply_l(&self, u: &FieldBundle, point: &[f64]) -> f64 {
        let jet = u.jet(point);
        self.apply_l_to_jet(&jet, point)
    }

    /// L applied to a precomputed jet (the point is still needed for the
    /// coefficients themselves).
    pub fn apply_l_to_jet(&self, jet: &Jet2, point: &[f64]) -> f64 {
        assert_eq!(jet.dim(), self.dim());
        let n = self.n;
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..n {
            acc += jet.hess(i, i);
        }
        for i in 0..m {
            for j in 0..m {
                acc -= self.a_value(i, j, point) * jet.hess(n + i, n + j);
            }
        }
        for i in 0..n {
            acc += self.a_x[i].value(point) * jet.grad(i);
        }
        for j in 0..m {
            acc += self.b_y[j].value(point) * jet.grad(n + j);
        }
        acc + self.a0.value(point) * jet.value
    }

    /// Degenerate principal part L₀ at a point; rejects x₁ + η₀ ≤ 0.
    pub fn apply_l0(&self, p: &CarlemanParams, u: &FieldBundle, point: &[f64]) -> Result<f64> {
        let jet = u.jet(point);
        self.apply_l0_to_jet(p, &jet, point)
    }

    pub fn apply_l0_to_jet(&self, p: &CarlemanParams, jet: &Jet2, point: &[f64]) -> Result<f64> {
        assert_eq!(jet.dim(), self.dim());
        let shift = p.shift(point[0]);
        if shift <= 0.0 {
            return Err(Error::NonPositiveShift { value: shift });
        }
        let n = self.n;
        let m = self.m;
        let mut lateral = 0.0;
        for i in 1..n {
            lateral += jet.hess(i, i);
        }
        for i in 0..m {
            for j in 0..m {
                lateral -= self.a_value(i, j, point) * jet.hess(n + i, n + j);
            }
        }
        Ok(jet.hess(0, 0) / shift + shift * lateral)
    }

    /// Left side of the shifted divergence-ready equation: L₀u plus the
    /// shift-weighted lower-order terms. The matching right side is
    /// (x₁+η₀)·f·g for a source with profile f.
    pub fn apply_transformed_l(
        &self,
        p: &CarlemanParams,
        u: &FieldBundle,
        point: &[f64],
    ) -> Result<f64> {
        let jet = u.jet(point);
        let l0 = self.apply_l0_to_jet(p, &jet, point)?;
        let shift = p.shift(point[0]);
        let n = self.n;
        let mut lower = 0.0;
        for i in 0..n {
            lower += self.a_x[i].value(point) * jet.grad(i);
        }
        for j in 0..self.m {
            lower += self.b_y[j].value(point) * jet.grad(n + j);
        }
        lower += self.a0.value(point) * jet.value;
        Ok(l0 + shift * lower)
    }

    /// Sampled ellipticity margin of the x₁-slope condition: the smallest
    /// eigenvalue over the lattice of the matrix −∂aᵢⱼ/∂x₁. A positive
    /// return is the largest α₁ the samples support.
    pub fn check_condition4(&self, d: &DomainParams, grid: &GridSpec) -> Result<f64> {
        grid.validated()?;
        let per_axis = grid.points_per_axis;
        let m = self.m;
        let mut worst = f64::INFINITY;
        for point in d.lattice(per_axis) {
            let mut mat = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    mat[i * m + j] = -self.a_jet(i, j, &point).grad(0);
                }
            }
            worst = worst.min(symmetric_min_eigenvalue(&mat, m));
        }
        Ok(worst)
    }

    /// Structural audit: aᵢⱼ symmetry, independence from the last y axis,
    /// and the declared C² bound, all sampled on the lattice.
    pub fn audit(&self, d: &DomainParams, grid: &GridSpec) -> Result<Vec<ConditionCheck>> {
        grid.validated()?;
        let points = d.lattice(grid.points_per_axis);
        let m = self.m;
        let last = d.dim() - 1;

        let mut asym: f64 = 0.0;
        let mut ym_dep: f64 = 0.0;
        let mut c2: f64 = 0.0;
        for point in &points {
            let jets = self.a_jets(point);
            for i in 0..m {
                for j in 0..m {
                    let jet = &jets[i * m + j];
                    asym = asym.max((jet.value - jets[j * m + i].value).abs());
                    ym_dep = ym_dep.max(jet.grad(last).abs());
                    let mut local = jet.value.abs();
                    for k in 0..jet.dim() {
                        local = local.max(jet.grad(k).abs());
                        for l in 0..=k {
                            local = local.max(jet.hess(k, l).abs());
                        }
                    }
                    c2 = c2.max(local);
                }
            }
        }
        let tol = 1e-12;
        Ok(vec![
            ConditionCheck {
                name: "a-symmetry".into(),
                passed: asym <= tol,
                slack: tol - asym,
                detail: format!("max |aij - aji| = {asym:.3e} over {} samples", points.len()),
                informational: false,
            },
            ConditionCheck {
                name: "a-last-axis-independence".into(),
                passed: ym_dep <= tol,
                slack: tol - ym_dep,
                detail: format!("max |da/dy_m| = {ym_dep:.3e}"),
                informational: false,
            },
            ConditionCheck {
                name: "a-c2-bound".into(),
                passed: c2 <= self.bound + tol,
                slack: self.bound - c2,
                detail: format!("sampled C2 norm {c2:.6} vs declared bound {}", self.bound),
                informational: false,
            },
        ])
    }

    /// Largest sampled magnitude among all coefficient values, gradients
    /// and Hessians; feeds the largeness-threshold estimates.
    pub fn sampled_c2_norm(&self, d: &DomainParams, per_axis: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for point in d.lattice(per_axis) {
            for bundle in self
                .a
                .iter()
                .chain(&self.a_x)
                .chain(&self.b_y)
                .chain([&self.a0])
            {
                let jet = bundle.jet(&point);
                worst = worst.max(jet.value.abs());
                for k in 0..jet.dim() {
                    worst = worst.max(jet.grad(k).abs());
                    for l in 0..=k {
                        worst = worst.max(jet.hess(k, l).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn to_manifest(&self) -> Result<CoefficientManifest> {
        let poly = self.poly.as_ref().ok_or_else(|| {
            Error::Config("coefficient set is not polynomial-backed; cannot serialize".into())
        })?;
        Ok(CoefficientManifest {
            n: self.n,
            m: self.m,
            bound: self.bound,
            second_order_y: (0..self.m)
                .map(|i| {
                    (0..self.m)
                        .map(|j| poly.a[i * self.m + j].to_records())
                        .collect()
                })
                .collect(),
            first_order_x: poly.a_x.iter().map(Polynomial::to_records).collect(),
            first_order_y: poly.b_y.iter().map(Polynomial::to_records).collect(),
            zero_order: poly.a0.to_records(),
            source_factor: poly.f.to_records(),
        })
    }

    pub fn from_manifest(manifest: &CoefficientManifest) -> Result<Self> {
        let dim = manifest.n + manifest.m;
        if manifest.second_order_y.len() != manifest.m
            || manifest.second_order_y.iter().any(|row| row.len() != manifest.m)
        {
            return Err(Error::Config(
                "second_order_y must be an m-by-m table".into(),
            ));
        }
        let mut a = Vec::with_capacity(manifest.m * manifest.m);
        for row in &manifest.second_order_y {
            for records in row {
                a.push(Polynomial::from_records(dim, records)?);
            }
        }
        let a_x = manifest
            .first_order_x
            .iter()
            .map(|r| Polynomial::from_records(dim, r))
            .collect::<Result<Vec<_>>>()?;
        let b_y = manifest
            .first_order_y
            .iter()
            .map(|r| Polynomial::from_records(dim, r))
            .collect::<Result<Vec<_>>>()?;
        let a0 = Polynomial::from_records(dim, &manifest.zero_order)?;
        let f = Polynomial::from_records(dim, &manifest.source_factor)?;
        Self::from_polynomials(manifest.n, manifest.m, a, a_x, b_y, a0, f, manifest.bound)
    }
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
/// Sizes here are tiny (the y dimension), so no pivot strategy is needed.
fn symmetric_min_eigenvalue(mat: &[f64], m: usize) -> f64 {
    if m == 1 {
        return mat[0];
    }
    let mut a = mat.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                off += a[i * m + j] * a[i * m + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Support;

    fn desk_params() -> (CarlemanParams, DomainParams) {
        let p = CarlemanParams::derived(0.125, 0.1, 5.0, 2.0, 1.5, 1.0, 0.1, 1.0);
        let mut d = DomainParams::centered(2, 2, &p);
        // Widen past the tight shell so lattice samples exercise more range.
        d.bounding_box = vec![[0.0, 0.2], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]];
        (p, d)
    }

    #[test]
    fn full_operator_matches_hand_value_on_square_sum() {
        // a = −δᵢⱼ turns the y block into +Δ_y, so L(x₁² + y₁²) = 4.
        let coeffs = CoefficientSet::diagonal_constant(2, 2, -1.0, 1.0);
        let x1 = Polynomial::coordinate(4, 0);
        let y1 = Polynomial::coordinate(4, 2);
        let u = FieldBundle::from_polynomial(x1.mul(&x1).add(&y1.mul(&y1)));
        for point in [[0.1, 0.2, 0.3, 0.4], [0.0, 0.0, 0.0, 0.0], [1.0, -1.0, 2.0, -2.0]] {
            let v = coeffs.apply_l(&u, &point);
            assert!((v - 4.0).abs() < 1e-14, "L value {v}");
        }
    }

    #[test]
    fn degenerate_part_matches_hand_values() {
        let (p, _) = desk_params();
        let coeffs = CoefficientSet::diagonal_constant(2, 2, -1.0, 1.0);
        // η₀ = ½·min(α₀, γ) = 0.05; at x₁ = 0.15 the shift is 0.2.
        assert_eq!(p.eta0, 0.05);
        let x1sq = FieldBundle::from_polynomial(Polynomial::new(4, vec![(vec![2, 0, 0, 0], 1.0)]));
        let v = coeffs
            .apply_l0(&p, &x1sq, &[0.15, 0.0, 0.0, 0.0])
            .unwrap();
        assert!((v - 10.0).abs() < 1e-12, "first-axis part {v}");

        // u = y₂²: only the y block contributes, −a₂₂·2·shift = 0.4.
        let ymsq = FieldBundle::from_polynomial(Polynomial::new(4, vec![(vec![0, 0, 0, 2], 1.0)]));
        let v = coeffs.apply_l0(&p, &ymsq, &[0.15, 0.3, 0.1, 0.7]).unwrap();
        assert!((v - 0.4).abs() < 1e-12, "y-block part {v}");

        let err = coeffs.apply_l0(&p, &x1sq, &[-0.1, 0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::NonPositiveShift { .. })));
    }

    #[test]
    fn shifted_form_adds_weighted_lower_order_terms() {
        let (p, _) = desk_params();
        let dim = 4;
        let coeffs = CoefficientSet::from_polynomials(
            2,
            2,
            vec![
                Polynomial::constant(dim, -1.0),
                Polynomial::zero(dim),
                Polynomial::zero(dim),
                Polynomial::constant(dim, -1.0),
            ],
            vec![Polynomial::constant(dim, 2.0), Polynomial::zero(dim)],
            vec![Polynomial::zero(dim), Polynomial::constant(dim, 3.0)],
            Polynomial::constant(dim, 0.5),
            Polynomial::constant(dim, 1.0),
            1.0,
        )
        .unwrap();
        let u = FieldBundle::from_polynomial(Polynomial::new(
            4,
            vec![(vec![1, 0, 0, 0], 1.0), (vec![0, 0, 0, 1], 1.0)],
        ));
        let point = [0.15, 0.0, 0.0, 0.0];
        let shift = p.shift(point[0]);
        let l0 = coeffs.apply_l0(&p, &u, &point).unwrap();
        let expect = l0 + shift * (2.0 * 1.0 + 3.0 * 1.0 + 0.5 * (0.15));
        let got = coeffs.apply_transformed_l(&p, &u, &point).unwrap();
        assert!((got - expect).abs() < 1e-13);
    }

    #[test]
    fn operator_application_is_linear() {
        let coeffs = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        let u = FieldBundle::from_polynomial(Polynomial::new(
            4,
            vec![(vec![2, 0, 0, 0], 1.0), (vec![0, 1, 1, 0], -0.5)],
        ));
        let v = FieldBundle::from_polynomial(Polynomial::new(
            4,
            vec![(vec![0, 0, 2, 0], 2.0), (vec![1, 0, 0, 1], 1.5)],
        ));
        let point = [0.07, -0.2, 0.4, 0.1];
        for (alpha, beta) in [(1.0, 1.0), (2.5, -0.75), (0.0, 3.0)] {
            let combo = u.scale(alpha).sum(&v.scale(beta));
            let lhs = coeffs.apply_l(&combo, &point);
            let rhs = alpha * coeffs.apply_l(&u, &point) + beta * coeffs.apply_l(&v, &point);
            assert!((lhs - rhs).abs() < 1e-12, "alpha {alpha} beta {beta}");
        }
    }

    #[test]
    fn slope_condition_estimates_match_known_sets() {
        let (_, d) = desk_params();
        let grid = GridSpec { points_per_axis: 3 };
        // aᵢⱼ = −x₁δᵢⱼ: slope matrix is the identity, margin 1.
        let good = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        let est = good.check_condition4(&d, &grid).unwrap();
        assert!((est - 1.0).abs() < 1e-12);
        // Flipped sign violates the condition with margin −1.
        let bad = CoefficientSet::x1_scaled_identity(2, 2, 1.0, 1.0);
        let est = bad.check_condition4(&d, &grid).unwrap();
        assert!((est + 1.0).abs() < 1e-12);
        // Doubling the slope doubles the margin.
        let strong = CoefficientSet::x1_scaled_identity(2, 2, -2.0, 2.0);
        let est = strong.check_condition4(&d, &grid).unwrap();
        assert!((est - 2.0).abs() < 1e-12);
    }

    #[test]
    fn audit_flags_each_structural_defect() {
        let (_, d) = desk_params();
        let grid = GridSpec { points_per_axis: 3 };
        let dim = 4;

        let good = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        assert!(good.audit(&d, &grid).unwrap().iter().all(|c| c.passed));

        // Asymmetric: a₁₂ = x₂ but a₂₁ = 0.
        let asym = CoefficientSet::from_polynomials(
            2,
            2,
            vec![
                Polynomial::zero(dim),
                Polynomial::coordinate(dim, 1),
                Polynomial::zero(dim),
                Polynomial::zero(dim),
            ],
            vec![Polynomial::zero(dim); 2],
            vec![Polynomial::zero(dim); 2],
            Polynomial::zero(dim),
            Polynomial::constant(dim, 1.0),
            1.0,
        )
        .unwrap();
        let checks = asym.audit(&d, &grid).unwrap();
        assert!(!checks.iter().find(|c| c.name == "a-symmetry").unwrap().passed);

        // Depends on the last y axis.
        let ym = Polynomial::coordinate(dim, 3);
        let dep = CoefficientSet::from_polynomials(
            2,
            2,
            vec![ym.clone(), Polynomial::zero(dim), Polynomial::zero(dim), ym],
            vec![Polynomial::zero(dim); 2],
            vec![Polynomial::zero(dim); 2],
            Polynomial::zero(dim),
            Polynomial::constant(dim, 1.0),
            1.0,
        )
        .unwrap();
        let checks = dep.audit(&d, &grid).unwrap();
        assert!(
            !checks
                .iter()
                .find(|c| c.name == "a-last-axis-independence")
                .unwrap()
                .passed
        );

        // Declared bound too small for the actual values.
        let tight = CoefficientSet::diagonal_constant(2, 2, -3.0, 1.0);
        let checks = tight.audit(&d, &grid).unwrap();
        assert!(!checks.iter().find(|c| c.name == "a-c2-bound").unwrap().passed);
    }

    #[test]
    fn manifest_roundtrips_through_json() {
        let set = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        let manifest = set.to_manifest().unwrap();
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        let back: CoefficientManifest = serde_json::from_str(&text).unwrap();
        let rebuilt = CoefficientSet::from_manifest(&back).unwrap();
        let point = [0.11, 0.2, -0.3, 0.4];
        assert_eq!(set.a_value(0, 0, &point), rebuilt.a_value(0, 0, &point));
        assert_eq!(set.a_value(1, 0, &point), rebuilt.a_value(1, 0, &point));
        assert_eq!(set.bound(), rebuilt.bound());

        // Bundle-backed sets refuse to serialize rather than lying.
        let opaque = CoefficientSet::from_bundles(
            2,
            2,
            (0..4)
                .map(|_| FieldBundle::constant(4, -1.0))
                .collect(),
            vec![FieldBundle::zero(4), FieldBundle::zero(4)],
            vec![FieldBundle::zero(4), FieldBundle::zero(4)],
            FieldBundle::zero(4),
            FieldBundle::constant(4, 1.0),
            1.0,
        )
        .unwrap();
        assert!(opaque.to_manifest().is_err());
        assert_eq!(opaque.f_field().support(), Support::Global);
    }

    #[test]
    fn min_eigenvalue_solver_handles_known_matrices() {
        // diag(3, −2): minimum −2.
        let m = symmetric_min_eigenvalue(&[3.0, 0.0, 0.0, -2.0], 2);
        assert!((m + 2.0).abs() < 1e-12);
        // [[2,1],[1,2]]: eigenvalues 1 and 3.
        let m = symmetric_min_eigenvalue(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((m - 1.0).abs() < 1e-12);
        // 3×3 with known spectrum: [[2,0,0],[0,5,4],[0,4,5]] → {2,1,9}.
        let m = symmetric_min_eigenvalue(&[2.0, 0.0, 0.0, 0.0, 5.0, 4.0, 0.0, 4.0, 5.0], 3);
        assert!((m - 1.0).abs() < 1e-12);
    }
}
