//! Sampled largeness thresholds for the weighted estimate chain.
//!
//! The explicit floors (`delta1`, `delta3`, `l1`, `beta0`) come straight
//! from closed formulas in the shell geometry and the declared coefficient
//! bound. The empirical ones are suprema of the sign-indefinite remainder
//! bundles over the shell: those cannot be written in closed form for
//! variable coefficients, so they are sampled on a tensor lattice, filtered
//! to the shell, and multiplied by a caller-chosen safety factor. Sampling
//! is deterministic and order-independent (pure max-reduction), so repeated
//! runs agree bit for bit.
//!
//! Every sampled supremum here is independent of `lambda`: the gradings
//! pull all weight-scale factors out before the suprema are taken. They do
//! depend on `delta` and `nu`, so callers that adjust `delta` to clear
//! `delta_star` should re-estimate and check that the floors stabilise.

use super::frame::Frame;
use crate::operators::CoefficientSet;
use crate::params::{compute_beta0, CarlemanParams, DomainParams, GridSpec, Thresholds};
use crate::{Error, Result};

pub(crate) fn estimate_thresholds_impl(
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    grid: &GridSpec,
    safety: f64,
) -> Result<Thresholds> {
    if coeffs.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            got: coeffs.dim(),
        });
    }
    let beta0 = compute_beta0(d.n, d.m, p.m_bound, p.gamma);
    let shell: Vec<Vec<f64>> = d
        .lattice(grid.points_per_axis)
        .into_iter()
        .filter(|pt| crate::fields::in_shell(p, d, pt))
        .collect();
    if shell.is_empty() {
        return Err(Error::EmptyDomain);
    }

    // Suprema of the normalised remainder bundles over the shell sample.
    let mut sup_sigma31 = 0.0f64;
    let mut sup_sigma32 = 0.0f64;
    let mut sup_sigma33 = 0.0f64;
    let mut sup_beta31t = 0.0f64;
    let mut sup_beta4 = 0.0f64;
    for pt in &shell {
        let frame = Frame::new(coeffs, p, d, pt)?;
        let sig = frame.sigma_bundle(beta0);
        let norm = p.delta.powi(3) * p.nu * frame.psi.value.powf(-2.0 * p.nu - 3.0);
        sup_sigma31 = sup_sigma31.max((sig.sigma31 / norm).abs());
        sup_sigma32 = sup_sigma32.max(sig.sigma32.abs());
        sup_sigma33 = sup_sigma33.max(sig.sigma33.abs());
        sup_beta31t = sup_beta31t.max(frame.beta31_tilde().abs());
        sup_beta4 = sup_beta4.max(frame.beta4().abs());
    }

    // Integral-chain constant: the largest magnitude among the reduced
    // lower-order coefficients and their last-axis derivatives, squared
    // (it enters through a Cauchy-Schwarz split of the squared equation).
    let rc = crate::reduction::reduced_coefficients(coeffs, p, d)?;
    let last = d.dim() - 1;
    let mut sup_rc = 0.0f64;
    for pt in &shell {
        for bundle in (1..=d.n)
            .map(|i| rc.abar(i))
            .chain((1..=d.m).map(|j| rc.bbar(j)))
            .chain(std::iter::once(rc.abar0()))
        {
            let jet = bundle.jet(pt);
            sup_rc = sup_rc.max(jet.value.abs()).max(jet.grad(last).abs());
        }
    }

    let m1 = safety * sup_sigma31;
    let m2 = safety * sup_sigma32;
    let m3 = safety * sup_sigma33;
    let m4 = safety * sup_beta31t;
    let m5_beta4 = safety * sup_beta4;
    let m5_eq19 = safety * sup_rc * sup_rc;

    let (nn, mm) = (d.n as f64, d.m as f64);
    let mb = p.m_bound;
    let root = (2.0 * p.gamma).sqrt();
    let l1 = 1.0
        + (nn - 1.0) * mb * 0.75 * p.gamma
        + (2.0 * nn * mb + 3.0 * mb * mb * mm * mm)
            * (1.0 + 2.0 * root)
            * 0.75
            * (p.gamma / 2.0).sqrt();
    let delta1 = 2.0 / p.alpha1 * (1.0 + 0.75 * mm * beta0 * p.gamma * mb);
    let delta2 = 2.0 * m1;
    let delta3 = 4.0 * mm / p.alpha1 * root * l1;
    let delta4 = (2.0 * m4).sqrt();
    let delta0 = 4.0f64.max(delta3).max(delta4);
    let delta_star = delta0.max(delta1).max(delta2);

    let lambda2 = m5_beta4;
    let lambda0 = lambda2;
    let lambda1 = m2.max(m3.sqrt());
    let lambda_star = lambda0.max(lambda1);
    let lambda_star_integral = 12.0 * m5_eq19 * nn.max(mm) * (1.0 + p.gamma);

    Ok(Thresholds {
        beta0,
        delta0,
        delta1,
        delta2,
        delta3,
        delta4,
        delta_star,
        lambda0,
        lambda1,
        lambda2,
        lambda_star,
        lambda_star_integral,
        m1,
        m2,
        m3,
        m4,
        m5_eq19,
        m5_beta4,
        l1,
    })
}
