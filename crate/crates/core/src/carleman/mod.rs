//! Weighted-inequality machinery: the exponential weight, the pointwise
//! identity and lower-bound checks, the integrated bound with its divergence
//! bookkeeping, and the scaling study over the large parameter.
//!
//! The layering mirrors the proof chain. A first-order identity trades the
//! weighted product `-w phi L0 phi` for gradient squares plus a divergence.
//! A second-order expansion splits the quadratic cross product into fourteen
//! terms, each a divergence plus a remainder, five remainders carrying
//! shell-uniform bounds. Combining the two layers with the threshold
//! constants yields the full lower bound whose integrated form drives the
//! uniqueness argument.

mod expansion;
mod families;
mod frame;
mod thresholds;

pub use expansion::TermReport;
pub use families::{AuxFunctions, SigmaBundle};
pub(crate) use thresholds::estimate_thresholds_impl;

use serde::Serialize;

use crate::fields::{psi_jet2, FieldBundle, Jet2, Support};
use crate::operators::CoefficientSet;
use crate::params::{compute_beta0, CarlemanParams, DomainParams, Thresholds};
use crate::quadrature::{integrate_domain_many, peak_log_weight_sq, shifted_chi_sq, QuadSpec};
use crate::{Error, Result};

use frame::Frame;

/// Exponential weight and its derivatives at one point (true scale).
///
/// The checks themselves never evaluate the raw weight (they work in
/// weight-reduced form); this evaluator exists for inspection and oracle
/// tests. At large `lambda` the raw weight overflows to infinity by design.
#[derive(Debug, Clone, Serialize)]
pub struct WeightEval {
    pub psi: f64,
    pub chi: f64,
    pub grad_psi: Vec<f64>,
    pub grad_chi: Vec<f64>,
    pub hess_chi: Vec<Vec<f64>>,
}

/// Evaluate the weight `chi = exp(lambda psi^(-nu))` with first and second
/// derivatives.
pub fn eval_weight(p: &CarlemanParams, d: &DomainParams, point: &[f64]) -> Result<WeightEval> {
    if point.len() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            got: point.len(),
        });
    }
    let psi = psi_jet2(p, d, point);
    let chi = psi.powf(-p.nu).scale(p.lambda).exp();
    let dim = d.dim();
    let mut hess = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            hess[i][j] = chi.hess(i, j);
        }
    }
    Ok(WeightEval {
        psi: psi.value,
        chi: chi.value,
        grad_psi: psi.gradient().to_vec(),
        grad_chi: chi.gradient().to_vec(),
        hess_chi: hess,
    })
}

/// Where a report was evaluated.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Location {
    Point { coordinates: Vec<f64> },
    Integrated { panels: usize, levels: usize },
}

/// One labelled term of a right-hand side.
#[derive(Debug, Clone, Serialize)]
pub struct RhsTerm {
    pub label: &'static str,
    pub value: f64,
}

/// Outcome of one inequality or identity check.
///
/// The defining relation is `margin = lhs - sum(rhs_terms) - divergence`;
/// `recomputed_margin` re-derives it from the stored fields so a consumer can
/// verify the report is internally consistent. All values are normalised by
/// the squared weight: multiply by `exp(log_weight_offset)` for true scale.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: &'static str,
    pub location: Location,
    pub lhs: f64,
    pub rhs_terms: Vec<RhsTerm>,
    pub divergence: f64,
    pub margin: f64,
    /// Margin with the divergence dropped (integrated runs only: for compact
    /// support the divergence integrates to quadrature noise).
    pub divergence_free_margin: Option<f64>,
    /// Largest per-component quadrature error estimate (integrated runs).
    pub quad_error: Option<f64>,
    /// Size reference: largest magnitude among lhs, rhs terms, divergence.
    pub scale: f64,
    pub lambda: f64,
    pub nu: f64,
    pub delta: f64,
    pub beta0: f64,
    pub log_weight_offset: f64,
    /// Parameter-order preconditions that do not hold, by name.
    pub threshold_violations: Vec<String>,
}

impl InequalityReport {
    pub fn rhs_total(&self) -> f64 {
        self.rhs_terms.iter().map(|t| t.value).sum()
    }

    pub fn recomputed_margin(&self) -> f64 {
        self.lhs - self.rhs_total() - self.divergence
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_header() -> &'static str {
        "name,location,lambda,lhs,rhs_total,divergence,margin,scale,quad_error"
    }

    pub fn csv_row(&self) -> String {
        let location = match &self.location {
            Location::Point { coordinates } => {
                let coords: Vec<String> = coordinates.iter().map(|c| format!("{c:.6}")).collect();
                format!("point({})", coords.join(" "))
            }
            Location::Integrated { panels, levels } => {
                format!("integrated({panels}x{levels})")
            }
        };
        let quad = self
            .quad_error
            .map(|e| format!("{e:.6e}"))
            .unwrap_or_default();
        format!(
            "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            self.name,
            location,
            self.lambda,
            self.lhs,
            self.rhs_total(),
            self.divergence,
            self.margin,
            self.scale,
            quad
        )
    }
}

fn scale_of(lhs: f64, rhs_terms: &[RhsTerm], divergence: f64) -> f64 {
    rhs_terms
        .iter()
        .map(|t| t.value.abs())
        .fold(lhs.abs().max(divergence.abs()), f64::max)
        .max(1e-300)
}

fn gradient_squares(d: &DomainParams, jet: &Jet2) -> (f64, f64, f64) {
    let gx1_sq = jet.grad(0) * jet.grad(0);
    let mut lat_sq = 0.0;
    for i in 1..d.n {
        lat_sq += jet.grad(i) * jet.grad(i);
    }
    let mut y_sq = 0.0;
    for j in 0..d.m {
        y_sq += jet.grad(d.n + j) * jet.grad(d.n + j);
    }
    (gx1_sq, lat_sq, y_sq)
}

/// Check the first-order identity at a point: the weighted product
/// `-w phi L0 phi` equals gradient squares plus a zeroth-order coefficient
/// plus a pure divergence, exactly.
///
/// The left side goes through the operator module, the right side through the
/// expansion machinery, so a defect in either route breaks the margin.
pub fn check_identity_lemma3(
    phi: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    point: &[f64],
) -> Result<InequalityReport> {
    let f = Frame::new(coeffs, p, d, point)?;
    let jet = phi.jet(point);
    let l0 = coeffs.apply_l0_to_jet(p, &jet, point)?;
    let beta0 = compute_beta0(d.n, d.m, p.m_bound, p.gamma);

    let lhs = -f.w * jet.value * l0;

    let (gx1_sq, lat_sq, _) = gradient_squares(d, &jet);
    let mut a_quad = 0.0;
    for j in 0..d.m {
        for k in 0..d.m {
            a_quad += f.a[j][k].value * jet.grad(d.n + j) * jet.grad(d.n + k);
        }
    }
    let sigma = f.sigma_bundle(beta0);
    let rhs_terms = vec![
        RhsTerm {
            label: "first-axis-gradient-sq",
            value: gx1_sq,
        },
        RhsTerm {
            label: "lateral-minus-principal-quadratic",
            value: f.w * f.w * (lat_sq - a_quad),
        },
        RhsTerm {
            label: "zeroth-order",
            value: sigma.sigma2 * jet.value * jet.value,
        },
    ];
    let divergence = expansion::d3_divergence(&f, &jet);
    let margin = lhs - rhs_terms.iter().map(|t| t.value).sum::<f64>() - divergence;
    let scale = scale_of(lhs, &rhs_terms, divergence);

    Ok(InequalityReport {
        name: "first-order-identity",
        location: Location::Point {
            coordinates: point.to_vec(),
        },
        lhs,
        rhs_terms,
        divergence,
        margin,
        divergence_free_margin: None,
        quad_error: None,
        scale,
        lambda: p.lambda,
        nu: p.nu,
        delta: p.delta,
        beta0,
        log_weight_offset: 2.0 * p.lambda * f.psi.value.powf(-p.nu),
        threshold_violations: Vec::new(),
    })
}

/// Expand the fourteen cross terms of the quadratic bound at a point, each
/// split into divergence, remainder, and (where claimed) a lower bound.
pub fn expand_t_terms(
    phi: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    point: &[f64],
) -> Result<Vec<TermReport>> {
    let f = Frame::new(coeffs, p, d, point)?;
    let jet = phi.jet(point);
    Ok(expansion::expand(&f, &jet).terms)
}

/// Check the pointwise second-order lower bound at a point.
///
/// The left side `psi^(nu+1) (L0 phi)^2` dominates first-axis, lateral, and
/// second-block gradient squares, the cubic zeroth-order term, a graded
/// zeroth-order coefficient, and two divergence blocks. The margin is
/// nonnegative on the shell once `delta` and `lambda` clear their floors;
/// violated preconditions are reported, not thrown.
pub fn check_pointwise_lemma2(
    phi: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    thresholds: &Thresholds,
    point: &[f64],
) -> Result<InequalityReport> {
    let f = Frame::new(coeffs, p, d, point)?;
    let jet = phi.jet(point);
    let l0 = coeffs.apply_l0_to_jet(p, &jet, point)?;
    let beta0 = thresholds.beta0;
    let ln = p.lambda * p.nu;
    let (w, psi) = (f.w, f.psi.value);

    let lhs = psi.powf(p.nu + 1.0) * l0 * l0;

    let (gx1_sq, lat_sq, y_sq) = gradient_squares(d, &jet);
    let v_sq = jet.value * jet.value;
    let sigma = f.sigma_bundle(beta0);
    let rhs_terms = vec![
        RhsTerm {
            label: "first-axis-gradient",
            value: 2.0 * ln * p.delta * w.powi(-3) * gx1_sq,
        },
        RhsTerm {
            label: "lateral-gradient",
            value: -2.0 * ln * w * w * (beta0 - 1.0) * lat_sq,
        },
        RhsTerm {
            label: "second-block-gradient",
            value: ln * p.delta * p.alpha1 * w * y_sq,
        },
        RhsTerm {
            label: "zeroth-order-cubic",
            value: 2.0 * p.delta.powi(4) * ln.powi(3) * p.nu * w.powi(-2)
                * psi.powf(-2.0 * p.nu - 3.0)
                * v_sq,
        },
        RhsTerm {
            label: "zeroth-order-graded",
            value: sigma.sigma1 * v_sq,
        },
    ];

    let ex = expansion::expand(&f, &jet);
    let divergence = ex.d1 + expansion::d2_divergence(&f, &jet, beta0);
    let margin = lhs - rhs_terms.iter().map(|t| t.value).sum::<f64>() - divergence;
    let scale = scale_of(lhs, &rhs_terms, divergence);

    let mut threshold_violations = Vec::new();
    if p.delta < thresholds.delta0 {
        threshold_violations.push(format!(
            "delta {} below floor delta0 {}",
            p.delta, thresholds.delta0
        ));
    }
    if p.lambda < thresholds.lambda0 {
        threshold_violations.push(format!(
            "lambda {} below floor lambda0 {}",
            p.lambda, thresholds.lambda0
        ));
    }

    Ok(InequalityReport {
        name: "pointwise-quadratic-bound",
        location: Location::Point {
            coordinates: point.to_vec(),
        },
        lhs,
        rhs_terms,
        divergence,
        margin,
        divergence_free_margin: None,
        quad_error: None,
        scale,
        lambda: p.lambda,
        nu: p.nu,
        delta: p.delta,
        beta0,
        log_weight_offset: 2.0 * p.lambda * psi.powf(-p.nu),
        threshold_violations,
    })
}

/// Left-hand-side form for the combined bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LhsForm {
    /// `psi^(nu+1) (L0 phi)^2 - 2 lambda nu beta0 w phi L0 phi` (the form the
    /// absorption argument actually uses).
    WithShiftFactor,
    /// Same but without the `w` factor on the product term, for comparison.
    PlainProduct,
}

/// Evaluation mode for the combined bound.
#[derive(Debug, Clone)]
pub enum Lemma1Mode {
    Pointwise { point: Vec<f64> },
    Integrated { quad: QuadSpec },
}

struct BoundParts {
    lhs: f64,
    rhs: [f64; 4],
    divergence: f64,
}

fn carleman_bound_parts(
    f: &Frame,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    beta0: f64,
    lhs_form: LhsForm,
    jet: &Jet2,
    point: &[f64],
) -> Result<BoundParts> {
    let l0 = coeffs.apply_l0_to_jet(p, jet, point)?;
    let ln = p.lambda * p.nu;
    let (w, psi) = (f.w, f.psi.value);
    let product_factor = match lhs_form {
        LhsForm::WithShiftFactor => w,
        LhsForm::PlainProduct => 1.0,
    };
    let lhs = psi.powf(p.nu + 1.0) * l0 * l0
        - 2.0 * ln * beta0 * product_factor * jet.value * l0;
    let (gx1_sq, lat_sq, y_sq) = gradient_squares(d, jet);
    let v_sq = jet.value * jet.value;
    let rhs = [
        2.0 * ln * p.delta * w.powi(-3) * gx1_sq,
        2.0 * ln * w * w * lat_sq,
        2.0 * ln * w * y_sq,
        ln.powi(3) * p.nu * p.delta.powi(4) * psi.powf(-2.0 * p.nu - 3.0) * v_sq,
    ];
    let divergence = expansion::total_divergence(f, jet, beta0);
    Ok(BoundParts {
        lhs,
        rhs,
        divergence,
    })
}

const CARLEMAN_RHS_LABELS: [&str; 4] = [
    "first-axis-gradient",
    "lateral-gradient",
    "second-block-gradient",
    "zeroth-order-cubic",
];

/// Check the combined lower bound, pointwise or integrated over the shell.
///
/// Integrated mode requires a compactly supported field (the divergence
/// block then integrates to quadrature noise) and reports both the full
/// margin and the divergence-free margin.
pub fn check_carleman_lemma1(
    phi: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    thresholds: &Thresholds,
    mode: &Lemma1Mode,
    lhs_form: LhsForm,
) -> Result<InequalityReport> {
    let beta0 = thresholds.beta0;
    let mut threshold_violations = Vec::new();
    if p.delta < thresholds.delta_star {
        threshold_violations.push(format!(
            "delta {} below floor delta_star {}",
            p.delta, thresholds.delta_star
        ));
    }
    if p.lambda < thresholds.lambda_star {
        threshold_violations.push(format!(
            "lambda {} below floor lambda_star {}",
            p.lambda, thresholds.lambda_star
        ));
    }

    match mode {
        Lemma1Mode::Pointwise { point } => {
            let f = Frame::new(coeffs, p, d, point)?;
            let jet = phi.jet(point);
            let parts =
                carleman_bound_parts(&f, coeffs, p, d, beta0, lhs_form, &jet, point)?;
            let rhs_terms: Vec<RhsTerm> = CARLEMAN_RHS_LABELS
                .iter()
                .zip(parts.rhs.iter())
                .map(|(&label, &value)| RhsTerm { label, value })
                .collect();
            let margin =
                parts.lhs - parts.rhs.iter().sum::<f64>() - parts.divergence;
            let scale = scale_of(parts.lhs, &rhs_terms, parts.divergence);
            Ok(InequalityReport {
                name: "carleman-bound",
                location: Location::Point {
                    coordinates: point.clone(),
                },
                lhs: parts.lhs,
                rhs_terms,
                divergence: parts.divergence,
                margin,
                divergence_free_margin: None,
                quad_error: None,
                scale,
                lambda: p.lambda,
                nu: p.nu,
                delta: p.delta,
                beta0,
                log_weight_offset: 2.0 * p.lambda * f.psi.value.powf(-p.nu),
                threshold_violations,
            })
        }
        Lemma1Mode::Integrated { quad } => {
            if phi.support() != Support::CompactInShell {
                return Err(Error::Config(
                    "integrated bound needs a compactly supported field \
                     (otherwise the divergence block contributes boundary terms)"
                        .to_string(),
                ));
            }
            let offset = peak_log_weight_sq(p, d, quad);
            let (values, errors) = integrate_domain_many(
                6,
                |point, out| {
                    let weight = shifted_chi_sq(p, d, point, offset);
                    let f = Frame::new(coeffs, p, d, point)
                        .expect("in-shell point makes a valid frame");
                    let jet = phi.jet(point);
                    let parts = carleman_bound_parts(
                        &f, coeffs, p, d, beta0, lhs_form, &jet, point,
                    )
                    .expect("in-shell point evaluates");
                    out[0] = parts.lhs * weight;
                    out[1] = parts.rhs[0] * weight;
                    out[2] = parts.rhs[1] * weight;
                    out[3] = parts.rhs[2] * weight;
                    out[4] = parts.rhs[3] * weight;
                    out[5] = parts.divergence * weight;
                },
                quad,
                p,
                d,
            )?;
            let lhs = values[0];
            let rhs_terms: Vec<RhsTerm> = CARLEMAN_RHS_LABELS
                .iter()
                .zip(values[1..5].iter())
                .map(|(&label, &value)| RhsTerm { label, value })
                .collect();
            let divergence = values[5];
            let rhs_total: f64 = values[1..5].iter().sum();
            let margin = lhs - rhs_total - divergence;
            let divergence_free_margin = Some(lhs - rhs_total);
            let quad_error = Some(errors.iter().fold(0.0f64, |a, &e| a.max(e)));
            let scale = scale_of(lhs, &rhs_terms, divergence);
            Ok(InequalityReport {
                name: "carleman-bound",
                location: Location::Integrated {
                    panels: quad.panels_per_axis,
                    levels: quad.refinement_levels,
                },
                lhs,
                rhs_terms,
                divergence,
                margin,
                divergence_free_margin,
                quad_error,
                scale,
                lambda: p.lambda,
                nu: p.nu,
                delta: p.delta,
                beta0,
                log_weight_offset: offset,
                threshold_violations,
            })
        }
    }
}

/// One row of the scaling study.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub lambda: f64,
    /// Integrated margin of the combined bound at this lambda.
    pub margin: f64,
    /// The weighted cubic reference `lambda^3 nu^4 delta^4 * integral of
    /// psi^(-2nu-3) phi^2` the margin is compared against.
    pub denominator: f64,
    pub ratio: f64,
    pub quad_error: f64,
    pub log_weight_offset: f64,
}

/// Integrated margins of the combined bound over an increasing lambda list.
///
/// Each row reports the margin relative to the cubic zeroth-order reference,
/// so healthy behaviour shows ratios bounded away from zero as lambda grows.
pub fn lambda_scaling_study(
    phi: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    lambdas: &[f64],
    quad: &QuadSpec,
) -> Result<Vec<ScalingRow>> {
    if lambdas.is_empty() {
        return Err(Error::Config("scaling study needs at least one lambda".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) || lambdas[0] <= 0.0 {
        return Err(Error::Config(
            "scaling study lambdas must be positive and strictly increasing".into(),
        ));
    }
    if phi.support() != Support::CompactInShell {
        return Err(Error::Config(
            "scaling study needs a compactly supported field".to_string(),
        ));
    }
    let beta0 = compute_beta0(d.n, d.m, p.m_bound, p.gamma);
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut pl = p.clone();
        pl.lambda = lambda;
        let ln = pl.lambda * pl.nu;
        let cubic = ln.powi(3) * pl.nu * pl.delta.powi(4);
        let offset = peak_log_weight_sq(&pl, d, quad);
        let (values, errors) = integrate_domain_many(
            7,
            |point, out| {
                let weight = shifted_chi_sq(&pl, d, point, offset);
                let f = Frame::new(coeffs, &pl, d, point)
                    .expect("in-shell point makes a valid frame");
                let jet = phi.jet(point);
                let parts = carleman_bound_parts(
                    &f,
                    coeffs,
                    &pl,
                    d,
                    beta0,
                    LhsForm::WithShiftFactor,
                    &jet,
                    point,
                )
                .expect("in-shell point evaluates");
                out[0] = parts.lhs * weight;
                out[1] = parts.rhs[0] * weight;
                out[2] = parts.rhs[1] * weight;
                out[3] = parts.rhs[2] * weight;
                out[4] = parts.rhs[3] * weight;
                out[5] = parts.divergence * weight;
                out[6] = cubic
                    * f.psi.value.powf(-2.0 * pl.nu - 3.0)
                    * jet.value
                    * jet.value
                    * weight;
            },
            quad,
            &pl,
            d,
        )?;
        let margin = values[0] - values[1..5].iter().sum::<f64>() - values[5];
        let denominator = values[6];
        rows.push(ScalingRow {
            lambda,
            margin,
            denominator,
            ratio: margin / denominator.max(f64::MIN_POSITIVE),
            quad_error: errors.iter().fold(0.0f64, |a, &e| a.max(e)),
            log_weight_offset: offset,
        });
    }
    Ok(rows)
}

/// Full divergence block of the combined bound at one in-shell point,
/// normalised by the squared weight (used by the uniqueness assembly).
pub(crate) fn divergence_total(
    z: &FieldBundle,
    coeffs: &CoefficientSet,
    p: &CarlemanParams,
    d: &DomainParams,
    beta0: f64,
    point: &[f64],
) -> f64 {
    let f = Frame::new(coeffs, p, d, point).expect("in-shell point makes a valid frame");
    let jet = z.jet(point);
    expansion::total_divergence(&f, &jet, beta0)
}
