//! Point-local evaluation frame for the weighted-inequality machinery.
//!
//! Every pointwise check starts by freezing the geometry at one point: the
//! stratified distance jet, the shifted first coordinate, the principal
//! coefficient jets, and the logarithmic gradient of the exponential weight.
//! All downstream algebra is carried in weight-reduced form: a product
//! `chi * q` is represented by `q` together with correction terms built from
//! `c = grad(log chi)`, so the enormous weight values never enter the
//! floating-point pipeline.

use crate::fields::{psi_jet2, Jet1, Jet2};
use crate::operators::CoefficientSet;
use crate::params::{CarlemanParams, DomainParams};
use crate::{Error, Result};

/// Frozen per-point context shared by the expansion and threshold code.
pub(crate) struct Frame {
    /// Spatial split sizes.
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    /// Parameter set in force (the scaling study swaps `lambda` per row).
    pub p: CarlemanParams,
    /// Full second-order jet of the stratified distance function.
    pub psi: Jet2,
    /// Shifted first coordinate `x1 + eta0`.
    pub w: f64,
    /// Principal coefficient jets `a[i][j]` at the point.
    pub a: Vec<Vec<Jet2>>,
    /// Gradient of `log chi`: `c_k = -lambda nu psi^(-nu-1) psi_k`.
    pub c: Vec<f64>,
    /// Jacobian of `c`: `dc[j][k] = d c_k / d x_j` (symmetric).
    pub dc: Vec<Vec<f64>>,
}

/// Weight-reduced jet of `theta = chi * phi`: `v = phi`, `g_k = theta_k / chi`,
/// `h_jk = theta_jk / chi`. Products of these reproduce `chi^2`-normalised
/// quadratic quantities exactly, with the weight divided out symbolically.
pub(crate) struct ReducedTheta {
    pub v: f64,
    pub g: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(
        coeffs: &CoefficientSet,
        p: &CarlemanParams,
        d: &DomainParams,
        point: &[f64],
    ) -> Result<Self> {
        let dim = d.dim();
        if point.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: point.len(),
            });
        }
        if coeffs.n() != d.n || coeffs.m() != d.m {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coeffs.dim(),
            });
        }
        let w = p.shift(point[0]);
        if w <= 0.0 {
            return Err(Error::NonPositiveShift { value: w });
        }
        let psi = psi_jet2(p, d, point);
        let flat = coeffs.a_jets(point);
        let a: Vec<Vec<Jet2>> = flat
            .chunks(d.m)
            .map(|row| row.to_vec())
            .collect();
        let ln = p.lambda * p.nu;
        let pv = psi.value;
        let pe1 = pv.powf(-p.nu - 1.0);
        let pe2 = pv.powf(-p.nu - 2.0);
        let c: Vec<f64> = (0..dim).map(|k| -ln * pe1 * psi.grad(k)).collect();
        let mut dc = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            for k in 0..dim {
                dc[j][k] = -ln
                    * ((-p.nu - 1.0) * pe2 * psi.grad(j) * psi.grad(k) + pe1 * psi.hess(j, k));
            }
        }
        Ok(Self {
            n: d.n,
            m: d.m,
            dim,
            p: p.clone(),
            psi,
            w,
            a,
            c,
            dc,
        })
    }

    /// Global axis index of the k-th second-block coordinate (0-based k).
    pub fn y_axis(&self, k: usize) -> usize {
        self.n + k
    }

    /// `lambda * nu`, the scale that multiplies every weight derivative.
    pub fn ln(&self) -> f64 {
        self.p.lambda * self.p.nu
    }

    /// Weight-reduced jet of `chi * phi` from the plain jet of `phi`.
    pub fn reduced_theta(&self, phi: &Jet2) -> ReducedTheta {
        assert_eq!(phi.dim(), self.dim, "field jet dimension mismatch");
        let v = phi.value;
        let g: Vec<f64> = (0..self.dim)
            .map(|k| phi.grad(k) + self.c[k] * v)
            .collect();
        let mut h = vec![vec![0.0; self.dim]; self.dim];
        for j in 0..self.dim {
            for k in 0..self.dim {
                h[j][k] = phi.hess(j, k)
                    + self.c[j] * phi.grad(k)
                    + self.c[k] * phi.grad(j)
                    + (self.c[j] * self.c[k] + self.dc[j][k]) * v;
            }
        }
        ReducedTheta { v, g, h }
    }

    /// First-order jet of the reduced value `theta / chi = phi`.
    pub fn theta_value_jet(&self, t: &ReducedTheta) -> Jet1 {
        let gradient = (0..self.dim).map(|k| t.g[k] - self.c[k] * t.v).collect();
        Jet1::from_parts(t.v, gradient)
    }

    /// First-order jet of the reduced derivative `theta_axis / chi`.
    pub fn theta_deriv_jet(&self, t: &ReducedTheta, axis: usize) -> Jet1 {
        let gradient = (0..self.dim)
            .map(|k| t.h[axis][k] - self.c[k] * t.g[axis])
            .collect();
        Jet1::from_parts(t.g[axis], gradient)
    }

    /// `chi^2`-normalised divergence along `axis` of a content `F`:
    /// `d(F chi^2)/d axis / chi^2 = F_axis + 2 c_axis F`.
    pub fn div_axis(&self, axis: usize, content: &Jet1) -> f64 {
        content.gradient[axis] + 2.0 * self.c[axis] * content.value
    }

    /// Jet of `psi^e`.
    pub fn psi_pow(&self, e: f64) -> Jet1 {
        self.psi.jet1().powf(e)
    }

    /// Jet of `w^k` (only the first axis contributes to the gradient).
    pub fn w_pow(&self, k: i32) -> Jet1 {
        let mut gradient = vec![0.0; self.dim];
        gradient[0] = f64::from(k) * self.w.powi(k - 1);
        Jet1::from_parts(self.w.powi(k), gradient)
    }

    /// Jet of the first derivative `psi_axis` (gradient row of the Hessian).
    pub fn psi_deriv(&self, axis: usize) -> Jet1 {
        let gradient = (0..self.dim).map(|k| self.psi.hess(axis, k)).collect();
        Jet1::from_parts(self.psi.grad(axis), gradient)
    }

    /// First-order jet of the principal coefficient entry `a[i][j]`.
    pub fn a_entry(&self, i: usize, j: usize) -> Jet1 {
        self.a[i][j].jet1()
    }

    /// First-order jet of the derivative `d a[i][j] / d axis`.
    pub fn a_deriv(&self, i: usize, j: usize, axis: usize) -> Jet1 {
        let jet = &self.a[i][j];
        let gradient = (0..self.dim).map(|k| jet.hess(axis, k)).collect();
        Jet1::from_parts(jet.grad(axis), gradient)
    }

    /// Jet of the lateral gradient square `sum_{i=2..n} psi_i^2`.
    pub fn grad_prime_psi_sq(&self) -> Jet1 {
        let mut acc = Jet1::zeros(self.dim);
        for i in 1..self.n {
            let pd = self.psi_deriv(i);
            acc = &acc + &(&pd * &pd);
        }
        acc
    }

    /// Jet of the second-block gradient square `sum_j psi_{y_j}^2`.
    pub fn grad_y_psi_sq(&self) -> Jet1 {
        let mut acc = Jet1::zeros(self.dim);
        for j in 0..self.m {
            let pd = self.psi_deriv(self.y_axis(j));
            acc = &acc + &(&pd * &pd);
        }
        acc
    }

    /// Jet of the principal quadratic `S = sum_{jk} a_jk psi_{y_j} psi_{y_k}`.
    pub fn s_quad(&self) -> Jet1 {
        let mut acc = Jet1::zeros(self.dim);
        for j in 0..self.m {
            let pj = self.psi_deriv(self.y_axis(j));
            for k in 0..self.m {
                let pk = self.psi_deriv(self.y_axis(k));
                acc = &acc + &(&self.a_entry(j, k) * &(&pj * &pk));
            }
        }
        acc
    }

    /// Jet of the trace `sum_j a_jj`.
    pub fn tr_a(&self) -> Jet1 {
        let mut acc = Jet1::zeros(self.dim);
        for j in 0..self.m {
            acc = &acc + &self.a_entry(j, j);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fd_jet2, FieldBundle, Polynomial, Support};
    use crate::operators::CoefficientSet;
    use crate::params::{CarlemanParams, DomainParams};

    fn desk() -> (CarlemanParams, DomainParams, CoefficientSet) {
        let p = CarlemanParams::derived(0.125, 0.45, 5.0, 0.25, 1.2, 1.0, 0.1, 1.0);
        let d = DomainParams::centered(2, 2, &p);
        let c = CoefficientSet::x1_scaled_identity(2, 2, -1.0, 1.0);
        (p, d, c)
    }

    fn sample_point() -> Vec<f64> {
        vec![0.012, 0.31, -0.22, 0.14]
    }

    // --- weight gradient against finite differences -------------------------

    #[test]
    fn log_weight_gradient_matches_finite_differences() {
        let (p, d, c) = desk();
        let pt = sample_point();
        let frame = Frame::new(&c, &p, &d, &pt).expect("frame");
        let log_weight =
            |x: &[f64]| crate::fields::psi_value(&p, &d, x).powf(-p.nu) * p.lambda;
        let fd = fd_jet2(&log_weight, &d, &pt, 1e-5).expect("fd jet");
        for k in 0..d.dim() {
            assert!(
                (frame.c[k] - fd.grad(k)).abs() <= 1e-6 * (1.0 + fd.grad(k).abs()),
                "c[{k}] = {} vs fd {}",
                frame.c[k],
                fd.grad(k)
            );
            for j in 0..d.dim() {
                assert!(
                    (frame.dc[j][k] - fd.hess(j, k)).abs() <= 1e-4 * (1.0 + fd.hess(j, k).abs()),
                    "dc[{j}][{k}] = {} vs fd {}",
                    frame.dc[j][k],
                    fd.hess(j, k)
                );
            }
        }
    }

    // --- reduced jets against an explicit weighted product ------------------

    #[test]
    fn reduced_theta_matches_explicit_weighted_product() {
        let (p, d, c) = desk();
        let pt = sample_point();
        let frame = Frame::new(&c, &p, &d, &pt).expect("frame");

        let phi = Polynomial::new(
            4,
            vec![
                (vec![0, 0, 0, 0], 0.7),
                (vec![1, 1, 0, 0], -0.4),
                (vec![0, 0, 2, 0], 0.9),
                (vec![0, 1, 0, 1], 0.35),
            ],
        );
        let phi_jet = phi.jet2(&pt);
        let t = frame.reduced_theta(&phi_jet);

        let pc = p.clone();
        let dd = d.clone();
        let weighted = FieldBundle::from_fn(4, 2, Support::Global, move |x| {
            let chi = psi_jet2(&pc, &dd, x).powf(-pc.nu).scale(pc.lambda).exp();
            chi.mul(&phi.jet2(x))
        });
        let theta = weighted.jet(&pt);
        let chi = (p.lambda * crate::fields::psi_value(&p, &d, &pt).powf(-p.nu)).exp();

        assert!((t.v - theta.value / chi).abs() <= 1e-12 * theta.value.abs().max(1.0));
        for k in 0..4 {
            let want = theta.grad(k) / chi;
            assert!(
                (t.g[k] - want).abs() <= 1e-9 * (1.0 + want.abs()),
                "g[{k}]: {} vs {}",
                t.g[k],
                want
            );
            for j in 0..4 {
                let want = theta.hess(j, k) / chi;
                assert!(
                    (t.h[j][k] - want).abs() <= 1e-9 * (1.0 + want.abs()),
                    "h[{j}][{k}]: {} vs {}",
                    t.h[j][k],
                    want
                );
            }
        }
    }

    // --- divergence rule against finite differences of the weighted content -

    #[test]
    fn normalised_divergence_matches_weighted_derivative() {
        let (p, d, c) = desk();
        let pt = sample_point();
        let frame = Frame::new(&c, &p, &d, &pt).expect("frame");

        let e = -p.nu - 1.0;
        let content = frame.psi_pow(e);
        let chi_sq = |x: &[f64]| {
            (2.0 * p.lambda * crate::fields::psi_value(&p, &d, x).powf(-p.nu)).exp()
        };
        for axis in 0..d.dim() {
            let h = 1e-6;
            let mut hi = pt.clone();
            let mut lo = pt.clone();
            hi[axis] += h;
            lo[axis] -= h;
            let f = |x: &[f64]| crate::fields::psi_value(&p, &d, x).powf(e) * chi_sq(x);
            let fd = (f(&hi) - f(&lo)) / (2.0 * h) / chi_sq(&pt);
            let got = frame.div_axis(axis, &content);
            assert!(
                (got - fd).abs() <= 1e-4 * (1.0 + fd.abs()),
                "axis {axis}: {got} vs fd {fd}"
            );
        }
    }

    // --- helper jets -------------------------------------------------------

    #[test]
    fn helper_jets_carry_exact_geometry() {
        let (p, d, c) = desk();
        let pt = sample_point();
        let frame = Frame::new(&c, &p, &d, &pt).expect("frame");

        let w2 = frame.w_pow(2);
        assert!((w2.value - frame.w * frame.w).abs() < 1e-15);
        assert!((w2.gradient[0] - 2.0 * frame.w).abs() < 1e-15);
        assert!(w2.gradient[1].abs() < 1e-15, "w only varies along axis 0");

        let p0 = frame.psi_deriv(0);
        assert!((p0.value - p.delta).abs() < 1e-15);
        assert!(p0.gradient.iter().all(|g| g.abs() < 1e-15));

        let p2 = frame.psi_deriv(2);
        assert!((p2.value - (pt[2] - d.center[2])).abs() < 1e-15);
        assert!((p2.gradient[2] - 1.0).abs() < 1e-15);

        let gps = frame.grad_prime_psi_sq();
        let want = (pt[1] - d.center[1]).powi(2);
        assert!((gps.value - want).abs() < 1e-14, "single lateral axis");

        let gys = frame.grad_y_psi_sq();
        let want = (pt[2] - d.center[2]).powi(2) + pt[3] * pt[3];
        assert!((gys.value - want).abs() < 1e-14);

        let s = frame.s_quad();
        let av = frame.a[0][0].value;
        let want = av * ((pt[2] - d.center[2]).powi(2) + pt[3] * pt[3]);
        assert!(
            (s.value - want).abs() < 1e-14,
            "diagonal principal part: S = a11 |grad_y psi|^2"
        );

        let tr = frame.tr_a();
        assert!((tr.value - 2.0 * av).abs() < 1e-14);
        assert!((tr.gradient[0] - -2.0).abs() < 1e-14, "d(a_jj)/dx1 = -1 each");
    }

    #[test]
    fn frame_rejects_mismatched_point() {
        let (p, d, c) = desk();
        let err = match Frame::new(&c, &p, &d, &[0.0, 0.0]) {
            Err(e) => e,
            Ok(_) => panic!("a two-entry point must not fit a four-axis domain"),
        };
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn frame_rejects_nonpositive_shift() {
        let (p, d, c) = desk();
        let err = match Frame::new(&c, &p, &d, &[-10.0, 0.0, 0.0, 0.0]) {
            Err(e) => e,
            Ok(_) => panic!("a point left of the shifted origin must be refused"),
        };
        assert!(matches!(err, Error::NonPositiveShift { .. }));
    }
}
