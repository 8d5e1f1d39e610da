//! Cross-term expansion of the weighted quadratic inequality.
//!
//! The quadratic lower bound starts from `psi^(nu+1) (A + B)^2 >= 4 lambda nu
//! A b`, where `A` collects the second-order parts of the conjugated operator
//! and `B = 2 lambda nu psi^(-nu-1) b` its first-order weight part. The
//! product splits into fourteen cross terms; each one is rewritten as a total
//! divergence plus a pointwise remainder, and five of the remainders carry a
//! shell-uniform lower bound. Everything here is evaluated in weight-reduced
//! form: all quantities are the true ones divided by `chi^2`.

use serde::Serialize;

use super::frame::Frame;
use crate::fields::{Jet1, Jet2};

/// One cross term of the expansion with its divergence/remainder split.
#[derive(Debug, Clone, Serialize)]
pub struct TermReport {
    /// Which second-order part meets which first-order part.
    pub label: &'static str,
    /// Value of the cross term itself.
    pub total: f64,
    /// Total-divergence portion (normalised by `chi^2`).
    pub divergence: f64,
    /// Pointwise remainder: `total - divergence` in exact arithmetic.
    pub remainder: f64,
    /// `|total - divergence - remainder|`, zero up to rounding.
    pub identity_residual: f64,
    /// Shell-uniform lower bound on the remainder, where one is claimed.
    pub bound: Option<f64>,
    /// `remainder - bound` for bounded terms: nonnegative on the shell.
    pub margin: Option<f64>,
    /// Size reference for tolerance scaling.
    pub scale: f64,
}

/// Full expansion state at one point.
pub(crate) struct Expansion {
    /// Second-order parts: `[A1, A2, A3, A4]` with `A = A1 + A2 + A3 + A4`.
    pub a_parts: [f64; 4],
    /// First-order parts: `[b1, b2, b3]` with `b = b1 + b2 + b3`.
    pub b_parts: [f64; 3],
    /// The fourteen cross terms in catalogue order.
    pub terms: Vec<TermReport>,
    /// Sum of the per-term divergences (the first divergence block).
    pub d1: f64,
}

impl Expansion {
    /// `4 lambda nu A b`, the quantity the fourteen terms must add up to.
    pub fn cross_product(&self, ln: f64) -> f64 {
        let a: f64 = self.a_parts.iter().sum();
        let b: f64 = self.b_parts.iter().sum();
        4.0 * ln * a * b
    }

    pub fn sum_of_terms(&self) -> f64 {
        self.terms.iter().map(|t| t.total).sum()
    }
}

fn report(
    label: &'static str,
    total: f64,
    divergence: f64,
    remainder: f64,
    bound: Option<f64>,
) -> TermReport {
    let scale = total
        .abs()
        .max(divergence.abs())
        .max(remainder.abs())
        .max(1e-300);
    TermReport {
        label,
        total,
        divergence,
        remainder,
        identity_residual: (total - divergence - remainder).abs(),
        bound,
        margin: bound.map(|b| remainder - b),
        scale,
    }
}

/// Expand the quadratic cross product at one point for one field jet.
pub(crate) fn expand(f: &Frame, phi: &Jet2) -> Expansion {
    let t = f.reduced_theta(phi);
    let (n, m, dim) = (f.n, f.m, f.dim);
    let p = &f.p;
    let (d, w, nv) = (p.delta, f.w, p.nu);
    let ln = f.ln();
    let mb = p.m_bound;
    let root = (2.0 * p.gamma).sqrt();
    let y = |k: usize| f.y_axis(k);

    let tdj: Vec<Jet1> = (0..dim).map(|a| f.theta_deriv_jet(&t, a)).collect();
    let tvj = f.theta_value_jet(&t);
    let tv2 = &tvj * &tvj;
    let g0 = t.g[0];
    let g0_sq = g0 * g0;
    let g_lat_sq: f64 = (1..n).map(|i| t.g[i] * t.g[i]).sum();
    let g_y_sq: f64 = (0..m).map(|j| t.g[y(j)] * t.g[y(j)]).sum();

    let aux = f.aux_functions();
    let phi1_jet = f.phi1_jet();
    let phi2_jet = f.phi2_jet();
    let phi3_jet = f.phi3_jet();
    let g_jet = f.g_bundle_jet();

    // Second-order and first-order parts of the conjugated operator.
    let h00 = t.h[0][0];
    let lap_lat: f64 = (1..n).map(|i| t.h[i][i]).sum();
    let mut ayy = 0.0;
    for j in 0..m {
        for k in 0..m {
            ayy += f.a[j][k].value * t.h[y(j)][y(k)];
        }
    }
    let a1 = h00 / w;
    let a2 = w * lap_lat;
    let a3 = -w * ayy;
    let e1 = d * d * aux.phi1 / w;
    let e2 = w * aux.phi2;
    let e3 = -w * aux.phi3;
    let a4 = (e1 + e2 + e3) * t.v;

    let b1 = d * g0 / w;
    let mut b2 = 0.0;
    for i in 1..n {
        b2 += f.psi.grad(i) * t.g[i];
    }
    b2 *= w;
    let mut b3 = 0.0;
    for j in 0..m {
        for k in 0..m {
            b3 += f.a[j][k].value * f.psi.grad(y(j)) * t.g[y(k)];
        }
    }
    b3 *= -w;

    let four = 4.0 * ln;
    let two = 2.0 * ln;
    let mut terms = Vec::with_capacity(14);

    // -- a1 * b1 --------------------------------------------------------------
    {
        let total = four * a1 * b1;
        let content = &f.w_pow(-2) * &(&tdj[0] * &tdj[0]);
        let div = two * d * f.div_axis(0, &content);
        let rem = four * d * w.powi(-3) * g0_sq;
        terms.push(report("a1*b1", total, div, rem, None));
    }

    // -- a2 * b1 --------------------------------------------------------------
    {
        let total = four * a2 * b1;
        let mut div = 0.0;
        for i in 1..n {
            div += four * d * f.div_axis(i, &(&tdj[0] * &tdj[i]));
            div -= two * d * f.div_axis(0, &(&tdj[i] * &tdj[i]));
        }
        terms.push(report("a2*b1", total, div, 0.0, None));
    }

    // -- a3 * b1 --------------------------------------------------------------
    {
        let total = four * a3 * b1;
        let mut div = 0.0;
        let mut rem = 0.0;
        for j in 0..m {
            for k in 0..m {
                let a = f.a_entry(j, k);
                div -= four * d * f.div_axis(y(k), &(&a * &(&tdj[y(j)] * &tdj[0])));
                div += two * d * f.div_axis(0, &(&a * &(&tdj[y(j)] * &tdj[y(k)])));
                let aj = &f.a[j][k];
                rem += four * d * aj.grad(y(k)) * t.g[y(j)] * g0;
                rem -= two * d * aj.grad(0) * t.g[y(j)] * t.g[y(k)];
            }
        }
        let bound = two * d * (p.alpha1 - m as f64 * w * p.epsilon0) * g_y_sq
            - two * d * (m as f64 * mb).powi(2) / (p.epsilon0 * w) * g0_sq;
        terms.push(report("a3*b1", total, div, rem, Some(bound)));
    }

    // -- e1 * b1 --------------------------------------------------------------
    {
        let total = four * e1 * t.v * b1;
        let content = &f.w_pow(-2) * &(&tv2 * &phi1_jet);
        let div = two * d.powi(3) * f.div_axis(0, &content);
        let rem = four * d.powi(3) * w.powi(-3) * aux.phi1 * t.v * t.v
            + four * d.powi(4) * (nv + 1.0) * w.powi(-2) * aux.phi4 * t.v * t.v;
        terms.push(report("e1*b1", total, div, rem, None));
    }

    // -- e2 * b1 --------------------------------------------------------------
    {
        let total = four * e2 * t.v * b1;
        let div = two * d * f.div_axis(0, &(&tv2 * &phi2_jet));
        let gps = f.grad_prime_psi_sq().value;
        let lat = (n - 1) as f64;
        let rem = four * d * d * (nv + 1.0) * aux.phi4 * gps * t.v * t.v
            + 2.0 * ln * ln * d * d * (nv + 1.0) * lat
                * f.psi.value.powf(-nv - 2.0)
                * t.v
                * t.v;
        terms.push(report("e2*b1", total, div, rem, None));
    }

    // -- e3 * b1 --------------------------------------------------------------
    {
        let total = four * e3 * t.v * b1;
        let div = -two * d * f.div_axis(0, &(&tv2 * &phi3_jet));
        let rem = two * d * phi3_jet.gradient[0] * t.v * t.v;
        terms.push(report("e3*b1", total, div, rem, None));
    }

    // -- a1 * b2 --------------------------------------------------------------
    {
        let total = four * a1 * b2;
        let mut div = 0.0;
        for i in 1..n {
            let pd = f.psi_deriv(i);
            div += four * f.div_axis(0, &(&pd * &(&tdj[i] * &tdj[0])));
            div -= two * f.div_axis(i, &(&pd * &(&tdj[0] * &tdj[0])));
        }
        let rem = two * (n - 1) as f64 * g0_sq;
        terms.push(report("a1*b2", total, div, rem, None));
    }

    // -- a2 * b2 --------------------------------------------------------------
    {
        let total = four * a2 * b2;
        let w2 = f.w_pow(2);
        let mut div = 0.0;
        for i in 1..n {
            let pd = f.psi_deriv(i);
            for j in 1..n {
                div += four * f.div_axis(j, &(&w2 * &(&pd * &(&tdj[i] * &tdj[j]))));
                div -= two * f.div_axis(i, &(&w2 * &(&pd * &(&tdj[j] * &tdj[j]))));
            }
        }
        let rem = two * (n as f64 - 3.0) * w * w * g_lat_sq;
        terms.push(report("a2*b2", total, div, rem, None));
    }

    // -- a3 * b2 --------------------------------------------------------------
    {
        let total = four * a3 * b2;
        let w2 = f.w_pow(2);
        let mut div = 0.0;
        let mut rem = 0.0;
        for i in 1..n {
            let pd = f.psi_deriv(i);
            let psi_i = f.psi.grad(i);
            for k in 0..m {
                for s in 0..m {
                    let a = f.a_entry(k, s);
                    let aj = &f.a[k][s];
                    div -= four
                        * f.div_axis(y(s), &(&w2 * &(&pd * &(&a * &(&tdj[i] * &tdj[y(k)])))));
                    div += two
                        * f.div_axis(i, &(&w2 * &(&pd * &(&a * &(&tdj[y(k)] * &tdj[y(s)])))));
                    rem += 2.0 * psi_i * aj.grad(y(s)) * t.g[i] * t.g[y(k)];
                    rem -= (aj.value + psi_i * aj.grad(i)) * t.g[y(k)] * t.g[y(s)];
                }
            }
        }
        rem *= two * w * w;
        let bound = -two * w * w * mb * (1.0 + root)
            * (2.0 * (m * n) as f64 * g_y_sq + (m * m) as f64 * g_lat_sq);
        terms.push(report("a3*b2", total, div, rem, Some(bound)));
    }

    // -- e * b2 ---------------------------------------------------------------
    {
        let total = four * a4 * b2;
        let mut div = 0.0;
        let mut rem = 0.0;
        for i in 1..n {
            let pd = f.psi_deriv(i);
            div += two * f.div_axis(i, &(&tv2 * &(&pd * &g_jet)));
            rem -= two * (g_jet.value + f.psi.grad(i) * g_jet.gradient[i]) * t.v * t.v;
        }
        terms.push(report("e*b2", total, div, rem, None));
    }

    // -- a1 * b3 --------------------------------------------------------------
    {
        let total = four * a1 * b3;
        let mut div = 0.0;
        let mut rem = 0.0;
        for j in 0..m {
            let pd = f.psi_deriv(y(j));
            let psi_j = f.psi.grad(y(j));
            for k in 0..m {
                let a = f.a_entry(j, k);
                let aj = &f.a[j][k];
                div -= four * f.div_axis(0, &(&a * &(&pd * &(&tdj[y(k)] * &tdj[0]))));
                div += two * f.div_axis(y(k), &(&a * &(&pd * &(&tdj[0] * &tdj[0]))));
                rem += four * aj.grad(0) * psi_j * t.g[y(k)] * g0;
                let kron = if j == k { aj.value } else { 0.0 };
                rem -= two * (aj.grad(y(k)) * psi_j + kron) * g0_sq;
            }
        }
        let bound = -two * w * root * m as f64 * g_y_sq
            - two
                * (mb * (m * m) as f64 / w + mb * root * (m * m) as f64 + mb * m as f64)
                * g0_sq;
        terms.push(report("a1*b3", total, div, rem, Some(bound)));
    }

    // -- a2 * b3 --------------------------------------------------------------
    {
        let total = four * a2 * b3;
        let w2 = f.w_pow(2);
        let mut div = 0.0;
        let mut rem = 0.0;
        for i in 1..n {
            for j in 0..m {
                let pd = f.psi_deriv(y(j));
                let psi_j = f.psi.grad(y(j));
                for k in 0..m {
                    let a = f.a_entry(j, k);
                    let aj = &f.a[j][k];
                    div -= four
                        * f.div_axis(i, &(&w2 * &(&a * &(&pd * &(&tdj[y(k)] * &tdj[i])))));
                    div += two
                        * f.div_axis(y(k), &(&w2 * &(&a * &(&pd * &(&tdj[i] * &tdj[i])))));
                    rem += 4.0 * aj.grad(i) * psi_j * t.g[y(k)] * t.g[i];
                    let kron = if j == k { aj.value } else { 0.0 };
                    rem -= 2.0 * (aj.grad(y(k)) * psi_j + kron) * t.g[i] * t.g[i];
                }
            }
        }
        rem *= ln * w * w;
        let bound = -two * w * w * mb * root
            * ((m * m) as f64 * g_lat_sq + ((n - 1) * m) as f64 * g_y_sq)
            - two * w * w * mb * m as f64 * (root * m as f64 + 1.0) * g_lat_sq;
        terms.push(report("a2*b3", total, div, rem, Some(bound)));
    }

    // -- a3 * b3 --------------------------------------------------------------
    {
        let total = four * a3 * b3;
        let w2 = f.w_pow(2);
        let mut div = 0.0;
        let mut rem = 0.0;
        for i in 0..m {
            let pd_i = f.psi_deriv(y(i));
            let psi_i = f.psi.grad(y(i));
            for j in 0..m {
                let a_ij = f.a_entry(i, j);
                let aj_ij = &f.a[i][j];
                for k in 0..m {
                    for s in 0..m {
                        let a_ks = f.a_entry(k, s);
                        let aj_ks = &f.a[k][s];
                        div += four
                            * f.div_axis(
                                y(s),
                                &(&w2
                                    * &(&a_ij
                                        * &(&pd_i * &(&a_ks * &(&tdj[y(j)] * &tdj[y(k)]))))),
                            );
                        div -= two
                            * f.div_axis(
                                y(j),
                                &(&w2
                                    * &(&a_ij
                                        * &(&a_ks * &(&pd_i * &(&tdj[y(k)] * &tdj[y(s)]))))),
                            );
                        let kron_is = if i == s { aj_ij.value * aj_ks.value } else { 0.0 };
                        let kron_ij = if i == j { aj_ij.value * aj_ks.value } else { 0.0 };
                        rem -= 2.0
                            * (aj_ij.grad(y(s)) * aj_ks.value * psi_i
                                + aj_ij.value * aj_ks.grad(y(s)) * psi_i
                                + kron_is)
                            * t.g[y(j)]
                            * t.g[y(k)];
                        rem += (aj_ij.grad(y(j)) * aj_ks.value * psi_i
                            + aj_ij.value * aj_ks.grad(y(j)) * psi_i
                            + kron_ij)
                            * t.g[y(k)]
                            * t.g[y(s)];
                    }
                }
            }
        }
        rem *= two * w * w;
        let bound = -6.0 * ln * w * w * mb * mb * (2.0 * root + 1.0) * (m as f64).powi(3)
            * g_y_sq;
        terms.push(report("a3*b3", total, div, rem, Some(bound)));
    }

    // -- e * b3 ---------------------------------------------------------------
    {
        let total = four * a4 * b3;
        let mut div = 0.0;
        let mut rem = 0.0;
        for j in 0..m {
            let pd = f.psi_deriv(y(j));
            let psi_j = f.psi.grad(y(j));
            for k in 0..m {
                let a = f.a_entry(j, k);
                let aj = &f.a[j][k];
                div -= two * f.div_axis(y(k), &(&a * &(&pd * &(&tv2 * &g_jet))));
                let kron = if j == k { aj.value } else { 0.0 };
                rem += two
                    * (aj.grad(y(k)) * psi_j * g_jet.value
                        + kron * g_jet.value
                        + aj.value * psi_j * g_jet.gradient[y(k)])
                    * t.v
                    * t.v;
            }
        }
        terms.push(report("e*b3", total, div, rem, None));
    }

    let d1 = terms.iter().map(|t| t.divergence).sum();
    Expansion {
        a_parts: [a1, a2, a3, a4],
        b_parts: [b1, b2, b3],
        terms,
        d1,
    }
}

/// The second divergence block: compensation terms produced when the reduced
/// first-axis, lateral, and second-block gradient squares are rewritten in
/// terms of the bare field (normalised by `chi^2`).
pub(crate) fn d2_divergence(f: &Frame, phi: &Jet2, beta0: f64) -> f64 {
    let t = f.reduced_theta(phi);
    let tvj = f.theta_value_jet(&t);
    let tv2 = &tvj * &tvj;
    let p = &f.p;
    let ln = f.ln();
    let e = f.psi_pow(-p.nu - 1.0);
    let mut total = -2.0 * ln * ln * p.delta * p.delta
        * f.div_axis(0, &(&f.w_pow(-3) * &(&e * &tv2)));
    for j in 0..f.m {
        let ya = f.y_axis(j);
        total -= ln * ln * p.delta * p.alpha1
            * f.div_axis(ya, &(&f.w_pow(1) * &(&f.psi_deriv(ya) * &(&e * &tv2))));
    }
    for i in 1..f.n {
        total += 2.0 * ln * ln * (beta0 - 1.0) * f.w * f.w
            * f.div_axis(i, &(&f.psi_deriv(i) * &(&e * &tv2)));
    }
    total
}

/// The third divergence block, produced by the first-order identity that
/// trades `-w phi L0 phi` for gradient squares (normalised by `chi^2`).
pub(crate) fn d3_divergence(f: &Frame, phi: &Jet2) -> f64 {
    let ln = f.ln();
    let p = &f.p;
    let phi1 = phi.jet1();
    let phi_sq = &phi1 * &phi1;
    let e = f.psi_pow(-p.nu - 1.0);
    let dphi = |axis: usize| -> Jet1 {
        let gradient = (0..f.dim).map(|k| phi.hess(axis, k)).collect();
        Jet1::from_parts(phi.grad(axis), gradient)
    };
    let w_sq = f.w * f.w;

    let content0 =
        (&(&phi1 * &dphi(0)) + &(&e * &phi_sq).scale(ln * p.delta)).scale(-1.0);
    let mut total = f.div_axis(0, &content0);

    for i in 1..f.n {
        let content = (&(&phi1 * &dphi(i))
            + &(&f.psi_deriv(i) * &(&e * &phi_sq)).scale(ln))
            .scale(-w_sq);
        total += f.div_axis(i, &content);
    }

    for i in 0..f.m {
        let yi = f.y_axis(i);
        let mut content = Jet1::zeros(f.dim);
        for j in 0..f.m {
            let yj = f.y_axis(j);
            let a = f.a_entry(i, j);
            let inner = &(&dphi(yj) * &phi1)
                + &(&f.psi_deriv(yj) * &(&e * &phi_sq)).scale(ln);
            content = &content + &(&a * &inner);
            content = &content - &(&f.a_deriv(i, j, yj) * &phi_sq).scale(0.5);
        }
        total += f.div_axis(yi, &content.scale(w_sq));
    }
    total
}

/// Full divergence of the combined inequality:
/// `D = D1 + D2 + 2 lambda nu beta0 D3`.
pub(crate) fn total_divergence(f: &Frame, phi: &Jet2, beta0: f64) -> f64 {
    let ex = expand(f, phi);
    ex.d1 + d2_divergence(f, phi, beta0) + 2.0 * f.ln() * beta0 * d3_divergence(f, phi)
}
