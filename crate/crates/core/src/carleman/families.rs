//! Auxiliary function families built from powers of the stratified distance.
//!
//! The pointwise expansion repeatedly meets the same handful of combinations:
//! graded powers of `psi` multiplying geometric factors, their first-axis
//! derivatives, and the zeroth-order coefficient bundles that collect them.
//! This module gives each family a jet builder on the frame plus snapshot
//! structs used by the reports and the threshold scan.

use serde::Serialize;

use super::frame::Frame;
use crate::fields::Jet1;

/// Values of the auxiliary families at one point (one parameter set).
#[derive(Debug, Clone, Serialize)]
pub struct AuxFunctions {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
    pub phi21: f64,
    pub phi22: f64,
    pub phi31: f64,
    pub phi32: f64,
}

/// Zeroth-order coefficient bundles entering the three inequality layers,
/// graded by powers of `lambda nu`.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaBundle {
    pub sigma1: f64,
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma2: f64,
    pub sigma21: f64,
    pub sigma22: f64,
    pub sigma23: f64,
    pub sigma3: f64,
    pub sigma31: f64,
    pub sigma32: f64,
    pub sigma33: f64,
}

impl Frame {
    /// `p1 = psi^(-2 nu - 2)`, the quadratic-grade core of the first family.
    pub(crate) fn p1_jet(&self) -> Jet1 {
        self.psi_pow(-2.0 * self.p.nu - 2.0)
    }

    /// `q1 = (nu + 1) psi^(-nu - 2)`, the linear-grade core.
    pub(crate) fn q1_jet(&self) -> Jet1 {
        self.psi_pow(-self.p.nu - 2.0).scale(self.p.nu + 1.0)
    }

    /// `p4 = psi^(-2 nu - 3)`.
    pub(crate) fn p4_jet(&self) -> Jet1 {
        self.psi_pow(-2.0 * self.p.nu - 3.0)
    }

    /// `q4 = (nu + 2) psi^(-nu - 3) / 2`.
    pub(crate) fn q4_jet(&self) -> Jet1 {
        self.psi_pow(-self.p.nu - 3.0).scale(0.5 * (self.p.nu + 2.0))
    }

    /// `phi1 = (lambda nu)^2 p1 - lambda nu q1`.
    pub(crate) fn phi1_jet(&self) -> Jet1 {
        let ln = self.ln();
        &self.p1_jet().scale(ln * ln) - &self.q1_jet().scale(ln)
    }

    /// `phi4 = (lambda nu)^2 p4 - lambda nu q4`.
    pub(crate) fn phi4_jet(&self) -> Jet1 {
        let ln = self.ln();
        &self.p4_jet().scale(ln * ln) - &self.q4_jet().scale(ln)
    }

    /// `phi21 = p1 |grad' psi|^2`, quadratic grade of the lateral family.
    pub(crate) fn phi21_jet(&self) -> Jet1 {
        &self.p1_jet() * &self.grad_prime_psi_sq()
    }

    /// `phi22 = q1 |grad' psi|^2 - (n - 1) psi^(-nu - 1)`.
    pub(crate) fn phi22_jet(&self) -> Jet1 {
        let lat = (self.n - 1) as f64;
        &(&self.q1_jet() * &self.grad_prime_psi_sq())
            - &self.psi_pow(-self.p.nu - 1.0).scale(lat)
    }

    /// `phi2 = (lambda nu)^2 phi21 - lambda nu phi22`.
    pub(crate) fn phi2_jet(&self) -> Jet1 {
        let ln = self.ln();
        &self.phi21_jet().scale(ln * ln) - &self.phi22_jet().scale(ln)
    }

    /// `phi31 = p1 S` with `S = sum a_jk psi_{y_j} psi_{y_k}`.
    pub(crate) fn phi31_jet(&self) -> Jet1 {
        &self.p1_jet() * &self.s_quad()
    }

    /// `phi32 = q1 S - psi^(-nu - 1) tr(a)`.
    pub(crate) fn phi32_jet(&self) -> Jet1 {
        &(&self.q1_jet() * &self.s_quad())
            - &(&self.psi_pow(-self.p.nu - 1.0) * &self.tr_a())
    }

    /// `phi3 = (lambda nu)^2 phi31 - lambda nu phi32`.
    pub(crate) fn phi3_jet(&self) -> Jet1 {
        let ln = self.ln();
        &self.phi31_jet().scale(ln * ln) - &self.phi32_jet().scale(ln)
    }

    /// Zeroth-order bundle `G = delta^2 phi1 + w^2 (phi2 - phi3)`.
    pub(crate) fn g_bundle_jet(&self) -> Jet1 {
        let d2 = self.p.delta * self.p.delta;
        &self.phi1_jet().scale(d2) + &(&self.w_pow(2) * &(&self.phi2_jet() - &self.phi3_jet()))
    }

    /// Quadratic-grade part of `G`: `Ghat3 = delta^2 p1 + w^2 (phi21 - phi31)`.
    pub(crate) fn ghat3_jet(&self) -> Jet1 {
        let d2 = self.p.delta * self.p.delta;
        &self.p1_jet().scale(d2) + &(&self.w_pow(2) * &(&self.phi21_jet() - &self.phi31_jet()))
    }

    /// Linear-grade part of `G`: `Ghat2 = -(delta^2 q1 + w^2 (phi22 - phi32))`.
    pub(crate) fn ghat2_jet(&self) -> Jet1 {
        let d2 = self.p.delta * self.p.delta;
        (&self.q1_jet().scale(d2) + &(&self.w_pow(2) * &(&self.phi22_jet() - &self.phi32_jet())))
            .scale(-1.0)
    }

    /// Snapshot of the family values at this frame's point and parameters.
    pub(crate) fn aux_functions(&self) -> AuxFunctions {
        AuxFunctions {
            phi1: self.phi1_jet().value,
            phi2: self.phi2_jet().value,
            phi3: self.phi3_jet().value,
            phi4: self.phi4_jet().value,
            phi21: self.phi21_jet().value,
            phi22: self.phi22_jet().value,
            phi31: self.phi31_jet().value,
            phi32: self.phi32_jet().value,
        }
    }

    /// Zeroth-order coefficients of the three inequality layers.
    pub(crate) fn sigma_bundle(&self, beta0: f64) -> SigmaBundle {
        let p = &self.p;
        let (nv, w) = (p.nu, self.w);
        let ln = self.ln();
        let psi = self.psi.value;
        let gps = self.grad_prime_psi_sq().value;
        let gys = self.grad_y_psi_sq().value;
        let s = self.s_quad().value;
        let lat = (self.n - 1) as f64;
        let d = p.delta;

        let bracket1 = -2.0 * d.powi(3) * w.powi(-3) + 2.0 * (beta0 - 1.0) * w * w * gps
            - d * p.alpha1 * w * gys;
        let sigma11 = psi.powf(-2.0 * nv - 2.0) * bracket1;
        let sigma12 = (nv + 1.0) * psi.powf(-nv - 2.0) * bracket1
            + psi.powf(-nv - 1.0)
                * (-6.0 * d * d * w.powi(-4) - 2.0 * (beta0 - 1.0) * lat * w * w
                    + d * p.alpha1 * w * self.m as f64);
        let sigma1 = ln.powi(3) * sigma11 + ln * ln * sigma12;

        let common = d * d + w * w * (gps - s);
        let mut div_a_dot = 0.0;
        for j in 0..self.m {
            for k in 0..self.m {
                div_a_dot +=
                    self.a[j][k].grad(self.y_axis(k)) * self.psi.grad(self.y_axis(j));
            }
        }
        let sigma21 = -2.0 * psi.powf(-2.0 * nv - 2.0) * common;
        let sigma22 = -(nv + 1.0) * psi.powf(-nv - 2.0) * common
            + psi.powf(-nv - 1.0)
                * w
                * w
                * (lat - 2.0 * div_a_dot - self.tr_a().value);
        let mut a_trace_yy = 0.0;
        for j in 0..self.m {
            for k in 0..self.m {
                a_trace_yy += self.a[j][k].hess(self.y_axis(j), self.y_axis(k));
            }
        }
        let sigma23 = 0.5 * w * w * a_trace_yy;
        let sigma2 = ln * ln * sigma21 + ln * sigma22 + sigma23;

        let sigma31 = sigma11 + 2.0 * beta0 * sigma21;
        let sigma32 = sigma12 + 2.0 * beta0 * sigma22;
        let sigma33 = 2.0 * beta0 * sigma23;
        let sigma3 = ln.powi(3) * sigma31 + ln * ln * sigma32 + ln * sigma33;

        SigmaBundle {
            sigma1,
            sigma11,
            sigma12,
            sigma2,
            sigma21,
            sigma22,
            sigma23,
            sigma3,
            sigma31,
            sigma32,
            sigma33,
        }
    }

    /// First-axis gradient coefficient after absorbing the lossy remainders:
    /// stays above 1 on the shell for admissible parameters.
    pub(crate) fn beta1(&self) -> f64 {
        let p = &self.p;
        let (mm, w) = (self.m as f64, self.w);
        let mb = p.m_bound;
        let root = (2.0 * p.gamma).sqrt();
        2.0 - mb * mb * mm * mm / p.epsilon0 * w * w
            - mb * mm * mm / p.delta * w * w
            - mb * mm / p.delta * (root * mm + 1.0) * w * w * w
    }

    /// Shell-uniform constant in the second-block gradient budget.
    pub(crate) fn beta21(&self) -> f64 {
        let p = &self.p;
        let (nn, mm, w) = (self.n as f64, self.m as f64, self.w);
        let mb = p.m_bound;
        let root = (2.0 * p.gamma).sqrt();
        root * mm
            + (2.0 * nn * (1.0 + root) + (nn - 1.0) * root
                + 3.0 * mm * mm * mb * (2.0 * root + 1.0))
                * w
                * mm
                * mb
    }

    /// Second-block gradient coefficient `beta2 = delta (alpha1 - m eps0) - beta21`.
    pub(crate) fn beta2(&self) -> f64 {
        let p = &self.p;
        p.delta * (p.alpha1 - self.m as f64 * p.epsilon0) - self.beta21()
    }

    /// Cubic-grade zeroth-order coefficient collected from the remainders.
    pub(crate) fn beta3(&self) -> f64 {
        let p = &self.p;
        let (d, w, nv) = (p.delta, self.w, p.nu);
        let lead = 4.0 * d.powi(3) * w.powi(-3) * self.p1_jet().value
            + 4.0 * d.powi(4) * (nv + 1.0) * w.powi(-2) * self.p4_jet().value
            + 4.0 * d * d * (nv + 1.0) * self.p4_jet().value * self.grad_prime_psi_sq().value;
        lead + self.beta31()
    }

    /// Sign-indefinite tail of `beta3` (the part the thresholds must dominate).
    pub(crate) fn beta31(&self) -> f64 {
        let d = self.p.delta;
        2.0 * d * self.phi31_jet().gradient[0] + self.zeroth_divergence_tail(&self.ghat3_jet())
    }

    /// Normalised tail `beta31 w^2 psi^(2 nu + 3) / (4 delta^2 (nu + 1))`,
    /// the quantity whose supremum fixes one of the order floors.
    pub(crate) fn beta31_tilde(&self) -> f64 {
        let p = &self.p;
        self.beta31() * self.w * self.w * self.psi.value.powf(2.0 * p.nu + 3.0)
            / (4.0 * p.delta * p.delta * (p.nu + 1.0))
    }

    /// Quadratic-grade zeroth-order coefficient collected from the remainders.
    pub(crate) fn beta4(&self) -> f64 {
        let p = &self.p;
        let (d, w, nv) = (p.delta, self.w, p.nu);
        let psi = self.psi.value;
        let lat = (self.n - 1) as f64;
        let lead = -4.0 * d.powi(3) * (nv + 1.0) * w.powi(-3) * psi.powf(-nv - 2.0)
            - 2.0 * d.powi(4) * (nv + 1.0) * (nv + 2.0) * w.powi(-2) * psi.powf(-nv - 3.0)
            - 2.0 * d * d * (nv + 1.0) * (nv + 2.0)
                * psi.powf(-nv - 3.0)
                * self.grad_prime_psi_sq().value
            + 2.0 * d * d * (nv + 1.0) * lat * psi.powf(-nv - 2.0)
            - 2.0 * d * self.phi32_jet().gradient[0];
        lead + self.zeroth_divergence_tail(&self.ghat2_jet())
    }

    /// Shared tail `-2 sum_i d(psi_i F)/dx_i + 2 sum_jk d(a_jk psi_j F)/dy_k`
    /// evaluated on a lambda-free zeroth-order content `F`.
    fn zeroth_divergence_tail(&self, f: &Jet1) -> f64 {
        let mut tail = 0.0;
        for i in 1..self.n {
            tail -= 2.0 * (f.value + self.psi.grad(i) * f.gradient[i]);
        }
        for j in 0..self.m {
            let pj = self.psi.grad(self.y_axis(j));
            for k in 0..self.m {
                let ya = self.y_axis(k);
                let a = &self.a[j][k];
                tail += 2.0
                    * (a.grad(ya) * pj * f.value
                        + a.value * if j == k { f.value } else { 0.0 }
                        + a.value * pj * f.gradient[ya]);
            }
        }
        tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::CoefficientSet;
    use crate::params::{compute_beta0, CarlemanParams, DomainParams};

    fn desk(lambda: f64) -> (CarlemanParams, DomainParams, CoefficientSet) {
        let p = CarlemanParams::derived(0.125, 0.45, 5.0, lambda, 1.2, 1.0, 0.1, 1.0);
        let d = DomainParams::centered(2, 2, &p);
        let c = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        (p, d, c)
    }

    fn shell_point() -> Vec<f64> {
        vec![0.009, 0.2, -0.15, 0.1]
    }

    // --- family values against direct scalar formulas -----------------------

    #[test]
    fn family_values_match_direct_formulas() {
        let (p, d, c) = desk(2.0);
        let pt = shell_point();
        let f = Frame::new(&c, &p, &d, &pt).expect("frame");
        let aux = f.aux_functions();

        let psi = f.psi.value;
        let ln = p.lambda * p.nu;
        let p1 = psi.powf(-2.0 * p.nu - 2.0);
        let q1 = (p.nu + 1.0) * psi.powf(-p.nu - 2.0);
        assert!((aux.phi1 - (ln * ln * p1 - ln * q1)).abs() <= 1e-15 * aux.phi1.abs());

        let gps = (pt[1] - 0.0f64).powi(2);
        let want21 = p1 * gps;
        assert!((aux.phi21 - want21).abs() <= 1e-14 * want21.abs().max(1.0));
        let want22 = q1 * gps - 1.0 * psi.powf(-p.nu - 1.0);
        assert!((aux.phi22 - want22).abs() <= 1e-14 * want22.abs().max(1.0));

        let a_val = -pt[0];
        let s = a_val * (pt[2] * pt[2] + pt[3] * pt[3]);
        let want31 = p1 * s;
        assert!((aux.phi31 - want31).abs() <= 1e-14 * want31.abs().max(1.0));
        let want32 = q1 * s - psi.powf(-p.nu - 1.0) * 2.0 * a_val;
        assert!((aux.phi32 - want32).abs() <= 1e-14 * want32.abs().max(1.0));

        let p4 = psi.powf(-2.0 * p.nu - 3.0);
        let q4 = 0.5 * (p.nu + 2.0) * psi.powf(-p.nu - 3.0);
        assert!((aux.phi4 - (ln * ln * p4 - ln * q4)).abs() <= 1e-15 * aux.phi4.abs());
    }

    // --- the two first-axis derivative identities ---------------------------

    #[test]
    fn first_family_x1_derivative_collapses_to_phi4() {
        let (p, d, c) = desk(2.0);
        let f = Frame::new(&c, &p, &d, &shell_point()).expect("frame");
        let got = f.phi1_jet().gradient[0];
        let want = -2.0 * p.delta * (p.nu + 1.0) * f.phi4_jet().value;
        assert!(
            (got - want).abs() <= 1e-12 * want.abs(),
            "d(phi1)/dx1: {got} vs {want}"
        );
    }

    #[test]
    fn lateral_family_x1_derivative_collapses_to_phi4() {
        let (p, d, c) = desk(2.0);
        let f = Frame::new(&c, &p, &d, &shell_point()).expect("frame");
        let got = f.phi2_jet().gradient[0];
        let ln = p.lambda * p.nu;
        let gps = f.grad_prime_psi_sq().value;
        let lat = 1.0;
        let want = -2.0 * p.delta * (p.nu + 1.0) * gps * f.phi4_jet().value
            - ln * p.delta * (p.nu + 1.0) * lat * f.psi.value.powf(-p.nu - 2.0);
        assert!(
            (got - want).abs() <= 1e-12 * want.abs(),
            "d(phi2)/dx1: {got} vs {want}"
        );
    }

    // --- sigma bundle ---------------------------------------------------------

    #[test]
    fn sigma_layers_combine_exactly() {
        let (p, d, c) = desk(3.0);
        let f = Frame::new(&c, &p, &d, &shell_point()).expect("frame");
        let beta0 = compute_beta0(d.n, d.m, p.m_bound, p.gamma);
        let s = f.sigma_bundle(beta0);
        let ln = p.lambda * p.nu;

        let sigma1 = ln.powi(3) * s.sigma11 + ln * ln * s.sigma12;
        assert!((s.sigma1 - sigma1).abs() <= 1e-15 * sigma1.abs());

        let sigma3 = s.sigma1 + 2.0 * ln * beta0 * s.sigma2;
        assert!(
            (s.sigma3 - sigma3).abs() <= 1e-12 * sigma3.abs().max(1.0),
            "third layer is the first plus 2 lambda nu beta0 times the second"
        );
    }

    #[test]
    fn sigma_grades_are_lambda_free() {
        let (pa, d, c) = desk(1.0);
        let (pb, _, _) = desk(4.0);
        let pt = shell_point();
        let beta0 = compute_beta0(d.n, d.m, pa.m_bound, pa.gamma);
        let sa = Frame::new(&c, &pa, &d, &pt).expect("frame").sigma_bundle(beta0);
        let sb = Frame::new(&c, &pb, &d, &pt).expect("frame").sigma_bundle(beta0);
        for (x, y) in [
            (sa.sigma11, sb.sigma11),
            (sa.sigma12, sb.sigma12),
            (sa.sigma21, sb.sigma21),
            (sa.sigma22, sb.sigma22),
            (sa.sigma23, sb.sigma23),
            (sa.sigma31, sb.sigma31),
            (sa.sigma32, sb.sigma32),
            (sa.sigma33, sb.sigma33),
        ] {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    // --- beta coefficients ----------------------------------------------------

    #[test]
    fn beta1_exceeds_one_on_shell_samples() {
        let (p, d, c) = desk(2.0);
        for &x1 in &[1e-6, 0.004, 0.009, 0.018] {
            let pt = vec![x1, 0.1, -0.1, 0.05];
            let f = Frame::new(&c, &p, &d, &pt).expect("frame");
            assert!(
                f.beta1() > 1.0,
                "beta1 = {} at x1 = {x1}",
                f.beta1()
            );
        }
    }

    #[test]
    fn beta2_dominates_half_delta_alpha1_for_large_enough_delta() {
        let (p0, d, c) = desk(2.0);
        let mb = p0.m_bound;
        let root = (2.0 * p0.gamma).sqrt();
        let l1 = 1.0
            + (d.n as f64 - 1.0) * mb * 0.75 * p0.gamma
            + (2.0 * d.n as f64 * mb + 3.0 * mb * mb * (d.m as f64).powi(2))
                * (1.0 + 2.0 * root)
                * 0.75
                * (p0.gamma / 2.0).sqrt();
        let delta3 = 4.0 * d.m as f64 / p0.alpha1 * root * l1;
        let delta = delta3.max(4.0) + 0.5;
        let p = CarlemanParams::derived(p0.gamma, p0.alpha0, delta, 2.0, p0.nu, p0.alpha1, p0.epsilon0, mb);
        for &x1 in &[1e-6, 0.009, 0.02] {
            let pt = vec![x1, 0.15, -0.1, 0.08];
            let f = Frame::new(&c, &p, &d, &pt).expect("frame");
            assert!(
                f.beta2() >= 0.5 * delta * p.alpha1,
                "beta2 = {} vs {}",
                f.beta2(),
                0.5 * delta * p.alpha1
            );
        }
    }

    #[test]
    fn beta_coefficients_are_lambda_free() {
        let (pa, d, c) = desk(0.7);
        let (pb, _, _) = desk(5.0);
        let pt = shell_point();
        let fa = Frame::new(&c, &pa, &d, &pt).expect("frame");
        let fb = Frame::new(&c, &pb, &d, &pt).expect("frame");
        for (x, y) in [
            (fa.beta1(), fb.beta1()),
            (fa.beta2(), fb.beta2()),
            (fa.beta3(), fb.beta3()),
            (fa.beta4(), fb.beta4()),
            (fa.beta31_tilde(), fb.beta31_tilde()),
        ] {
            assert!((x - y).abs() <= 1e-11 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}
