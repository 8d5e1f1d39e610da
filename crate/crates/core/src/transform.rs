//! Change of variable that flattens the degenerate first axis.
//!
//! The substitution x̃₁ = √(2x₁) − η₀ (inverse x₁ = ½(x̃₁+η₀)²) turns the
//! plain second-order operator into the shifted divergence-ready form: after
//! multiplying the equation by x̃₁ + η₀, the principal part becomes exactly
//! L₀ and every lower-order coefficient picks up the reparametrization. The
//! x̃₁-drift coefficient additionally absorbs the Jacobian of the
//! substitution:
//!
//! ```text
//! ã₁ = a₁(x₁(x̃₁), ·) · (x̃₁+η₀)⁻¹ − (x̃₁+η₀)⁻³.
//! ```
//!
//! `transform_consistency_residual` closes the loop numerically: applying
//! the pushed-forward operator to the transported field must reproduce
//! (x̃₁+η₀) times the original operator value at the pulled-back point.

use crate::fields::{FieldBundle, Jet2, Support};
use crate::operators::CoefficientSet;
use crate::params::CarlemanParams;
use crate::{Error, Result};

/// The substitution along the first axis, fixed by the shift offset η₀.
#[derive(Debug, Clone, Copy)]
pub struct TransformSpec {
    pub eta0: f64,
}

/// Two-sided evaluation of the transformed equation at one point.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyCheck {
    /// Pushed-forward operator applied to the transported field.
    pub transformed_side: f64,
    /// (x̃₁+η₀) times the original operator at the pulled-back point.
    pub scaled_original_side: f64,
    pub residual: f64,
}

impl TransformSpec {
    pub fn from_params(p: &CarlemanParams) -> Self {
        Self { eta0: p.eta0 }
    }

    /// Forward map x₁ ↦ √(2x₁) − η₀. Only x₁ > η₀²/2 lands in the
    /// transformed half-space x̃₁ > 0, so smaller inputs are rejected.
    pub fn to_tilde(&self, x1: f64) -> Result<f64> {
        let floor = 0.5 * self.eta0 * self.eta0;
        if x1 <= floor {
            return Err(Error::TransformDomain {
                detail: format!("x1 = {x1} must exceed eta0^2/2 = {floor}"),
            });
        }
        Ok((2.0 * x1).sqrt() - self.eta0)
    }

    /// Inverse map x̃₁ ↦ ½(x̃₁+η₀)²; the transformed domain is x̃₁ > 0.
    pub fn from_tilde(&self, x1_tilde: f64) -> Result<f64> {
        if x1_tilde <= 0.0 {
            return Err(Error::TransformDomain {
                detail: format!("tilde coordinate {x1_tilde} must be positive"),
            });
        }
        let w = x1_tilde + self.eta0;
        Ok(0.5 * w * w)
    }

    /// Map a full point, first axis only.
    pub fn to_tilde_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = point.to_vec();
        out[0] = self.to_tilde(point[0])?;
        Ok(out)
    }

    pub fn from_tilde_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = point.to_vec();
        out[0] = self.from_tilde(point[0])?;
        Ok(out)
    }

    /// Represent a field of the original variables in transformed
    /// coordinates, with jets rewritten through the chain rule
    /// (dx₁/dx̃₁ = x̃₁+η₀, second derivative 1).
    pub fn to_tilde_field(&self, u: &FieldBundle) -> FieldBundle {
        let spec = *self;
        let u = u.clone();
        FieldBundle::from_fn(u.dim(), u.smoothness(), u.support(), move |tilde| {
            let original = spec
                .from_tilde_point(tilde)
                .expect("tilde point must have a positive first coordinate");
            let w = tilde[0] + spec.eta0;
            compose_through_reparam(&u.jet(&original), w)
        })
    }

    /// Coefficients of the transformed equation. Every entry is the
    /// original one read at the pulled-back point; the x̃₁-drift entry also
    /// carries the Jacobian correction −(x̃₁+η₀)⁻³ plus the (x̃₁+η₀)⁻¹
    /// rescaling of the original drift.
    pub fn pushforward_coeffs(&self, coeffs: &CoefficientSet) -> Result<CoefficientSet> {
        let n = coeffs.n();
        let m = coeffs.m();
        let dim = coeffs.dim();
        let spec = *self;

        let compose = |jet_of: std::sync::Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>| {
            FieldBundle::from_fn(dim, u32::MAX, Support::Global, move |tilde| {
                let original = spec
                    .from_tilde_point(tilde)
                    .expect("tilde point must have a positive first coordinate");
                compose_through_reparam(&jet_of(&original), tilde[0] + spec.eta0)
            })
        };

        let mut a = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let c = coeffs.clone();
                a.push(compose(std::sync::Arc::new(move |pt: &[f64]| {
                    c.a_jet(i, j, pt)
                })));
            }
        }

        let mut a_x = Vec::with_capacity(n);
        // Drift along the transformed first axis: a₁∘r·w⁻¹ − w⁻³.
        {
            let c = coeffs.clone();
            a_x.push(FieldBundle::from_fn(
                dim,
                u32::MAX,
                Support::Global,
                move |tilde| {
                    let original = spec
                        .from_tilde_point(tilde)
                        .expect("tilde point must have a positive first coordinate");
                    let w = Jet2::coordinate(dim, 0, tilde[0])
                        .add(&Jet2::constant(dim, spec.eta0));
                    let a1 = compose_through_reparam(
                        &c.ax_jet(0, &original),
                        tilde[0] + spec.eta0,
                    );
                    a1.mul(&w.powi(-1)).sub(&w.powi(-3))
                },
            ));
        }
        for i in 1..n {
            let c = coeffs.clone();
            a_x.push(compose(std::sync::Arc::new(move |pt: &[f64]| {
                c.ax_jet(i, pt)
            })));
        }

        let mut b_y = Vec::with_capacity(m);
        for j in 0..m {
            let c = coeffs.clone();
            b_y.push(compose(std::sync::Arc::new(move |pt: &[f64]| {
                c.by_jet(j, pt)
            })));
        }

        let a0 = {
            let c = coeffs.clone();
            compose(std::sync::Arc::new(move |pt: &[f64]| c.a0_jet(pt)))
        };
        let f = {
            let c = coeffs.clone();
            compose(std::sync::Arc::new(move |pt: &[f64]| c.f_jet(pt)))
        };

        CoefficientSet::from_bundles(n, m, a, a_x, b_y, a0, f, coeffs.bound())
    }

    /// Evaluate both sides of the transformed equation at a tilde point:
    /// the pushed operator on the transported field against (x̃₁+η₀)·L u at
    /// the pulled-back point. Agreement to round-off certifies the
    /// pushforward, Jacobian term included.
    pub fn transform_consistency_residual(
        &self,
        coeffs: &CoefficientSet,
        p: &CarlemanParams,
        u: &FieldBundle,
        tilde_point: &[f64],
    ) -> Result<ConsistencyCheck> {
        let pushed = self.pushforward_coeffs(coeffs)?;
        let transported = self.to_tilde_field(u);
        let transformed_side = pushed.apply_transformed_l(p, &transported, tilde_point)?;
        let original_point = self.from_tilde_point(tilde_point)?;
        let scaled_original_side =
            (tilde_point[0] + self.eta0) * coeffs.apply_l(u, &original_point);
        Ok(ConsistencyCheck {
            transformed_side,
            scaled_original_side,
            residual: transformed_side - scaled_original_side,
        })
    }
}

/// Rewrite a jet taken at x₁ = ½(x̃₁+η₀)² into tilde coordinates. Only the
/// first axis changes: gradient scales by w = x̃₁+η₀, the (0,0) Hessian
/// entry picks up w² plus the curvature term, mixed entries scale by w.
fn compose_through_reparam(jet: &Jet2, w: f64) -> Jet2 {
    let dim = jet.dim();
    let mut out = jet.clone();
    out.set_grad(0, jet.grad(0) * w);
    out.set_hess(0, 0, jet.hess(0, 0) * w * w + jet.grad(0));
    for k in 1..dim {
        out.set_hess(0, k, jet.hess(0, k) * w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Polynomial;

    fn spec() -> TransformSpec {
        TransformSpec { eta0: 0.05 }
    }

    fn generic_coeffs() -> CoefficientSet {
        let dim = 4;
        let x1 = Polynomial::coordinate(dim, 0);
        let x2 = Polynomial::coordinate(dim, 1);
        let y1 = Polynomial::coordinate(dim, 2);
        // Symmetric aᵢⱼ independent of the last axis, nonzero drift a₁ so
        // the Jacobian interaction is exercised.
        let a11 = x1.scale(-1.0).add(&Polynomial::constant(dim, -0.5));
        let a12 = y1.scale(0.25);
        let a22 = Polynomial::constant(dim, -1.0).add(&x2.mul(&x2).scale(-0.1));
        CoefficientSet::from_polynomials(
            2,
            2,
            vec![a11, a12.clone(), a12, a22],
            vec![
                Polynomial::new(dim, vec![(vec![0, 1, 0, 0], 0.7), (vec![0, 0, 0, 0], 0.3)]),
                Polynomial::coordinate(dim, 2).scale(-0.4),
            ],
            vec![
                Polynomial::constant(dim, 0.6),
                Polynomial::coordinate(dim, 1).scale(0.2),
            ],
            Polynomial::constant(dim, -0.8),
            Polynomial::constant(dim, 1.0),
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn forward_and_inverse_are_mutually_inverse() {
        let t = spec();
        // 10⁴ points across the admissible range on both sides.
        for k in 0..10_000 {
            let x1 = 0.5 * t.eta0 * t.eta0 + 1e-6 + (k as f64) * 1e-4;
            let tilde = t.to_tilde(x1).unwrap();
            let back = t.from_tilde(tilde).unwrap();
            assert!((back - x1).abs() <= 1e-12 * x1.max(1.0), "x1 {x1} back {back}");

            let xt = 1e-6 + (k as f64) * 2e-4;
            let x1 = t.from_tilde(xt).unwrap();
            let back = t.to_tilde(x1).unwrap();
            assert!((back - xt).abs() <= 1e-12, "xt {xt} back {back}");
        }
    }

    #[test]
    fn boundary_inputs_are_rejected() {
        let t = spec();
        assert!(t.to_tilde(0.5 * t.eta0 * t.eta0).is_err());
        assert!(t.to_tilde(0.0).is_err());
        assert!(t.from_tilde(0.0).is_err());
        assert!(t.from_tilde(-0.3).is_err());
        assert!(t.to_tilde_point(&[1e-5, 0.3, 0.3, 0.3]).is_err());
    }

    #[test]
    fn drift_coefficient_gains_jacobian_term() {
        let t = spec();
        // With a₁ ≡ 0 the pushed drift is −(x̃₁+η₀)⁻³: −125 at x̃₁ = 0.15.
        let plain = CoefficientSet::diagonal_constant(2, 2, -1.0, 1.0);
        let pushed = t.pushforward_coeffs(&plain).unwrap();
        let v = pushed.ax_jet(0, &[0.15, 0.0, 0.0, 0.0]).value;
        assert!((v + 125.0).abs() < 1e-9, "drift {v}");
    }

    #[test]
    fn second_order_and_zero_order_push_as_substitution() {
        let t = spec();
        let varying = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        let pushed = t.pushforward_coeffs(&varying).unwrap();
        let tilde = [0.15, 0.1, -0.2, 0.3];
        let w = tilde[0] + t.eta0;
        let expect = -0.5 * w * w;
        let got = pushed.a_value(0, 0, &tilde);
        assert!((got - expect).abs() < 1e-14);
        assert_eq!(pushed.a_value(0, 1, &tilde), 0.0);

        let dim = 4;
        let with_a0 = CoefficientSet::from_polynomials(
            2,
            2,
            vec![
                Polynomial::constant(dim, -1.0),
                Polynomial::zero(dim),
                Polynomial::zero(dim),
                Polynomial::constant(dim, -1.0),
            ],
            vec![Polynomial::zero(dim); 2],
            vec![Polynomial::zero(dim); 2],
            Polynomial::constant(dim, 0.9),
            Polynomial::constant(dim, 1.0),
            1.0,
        )
        .unwrap();
        let pushed = t.pushforward_coeffs(&with_a0).unwrap();
        assert_eq!(pushed.a0_jet(&tilde).value, 0.9);
    }

    #[test]
    fn transported_field_obeys_first_derivative_chain_rule() {
        let t = spec();
        let u = FieldBundle::from_polynomial(Polynomial::new(
            4,
            vec![(vec![2, 0, 0, 0], 1.0), (vec![1, 1, 0, 0], -0.5)],
        ));
        let transported = t.to_tilde_field(&u);
        let tilde = [0.2, 0.3, -0.1, 0.4];
        let original = t.from_tilde_point(&tilde).unwrap();
        let w = tilde[0] + t.eta0;
        let ju = u.jet(&original);
        let jt = transported.jet(&tilde);
        assert!((jt.value - ju.value).abs() < 1e-15);
        assert!((jt.grad(0) - ju.grad(0) * w).abs() < 1e-14);
        assert!((jt.grad(1) - ju.grad(1)).abs() < 1e-15);
    }

    #[test]
    fn pushforward_reproduces_scaled_operator_values() {
        let p = CarlemanParams::derived(0.125, 0.1, 5.0, 2.0, 1.5, 1.0, 0.1, 1.0);
        assert_eq!(p.eta0, 0.05);
        let t = TransformSpec::from_params(&p);
        let coeffs = generic_coeffs();
        let u = FieldBundle::from_polynomial(Polynomial::new(
            4,
            vec![
                (vec![2, 0, 0, 0], 1.0),
                (vec![0, 2, 0, 0], -0.5),
                (vec![0, 0, 1, 1], 0.8),
                (vec![1, 0, 0, 1], 0.4),
                (vec![0, 0, 0, 2], 0.6),
            ],
        ));
        for tilde in [
            [0.05, 0.1, -0.2, 0.3],
            [0.2, -0.3, 0.4, -0.1],
            [0.6, 0.2, 0.2, 0.2],
        ] {
            let check = t
                .transform_consistency_residual(&coeffs, &p, &u, &tilde)
                .unwrap();
            let scale = check
                .transformed_side
                .abs()
                .max(check.scaled_original_side.abs())
                .max(1.0);
            assert!(
                check.residual.abs() <= 1e-9 * scale,
                "residual {} at {:?}",
                check.residual,
                tilde
            );
        }
    }
}
