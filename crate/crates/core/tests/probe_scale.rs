use carleman_core::carleman::check_pointwise_lemma2;
use carleman_core::fields::{in_shell, make_bump, random_polynomial, FieldBundle};
use carleman_core::operators::CoefficientSet;
use carleman_core::params::{estimate_thresholds, CarlemanParams, DomainParams, GridSpec};
use rand::{Rng, SeedableRng};

#[test]
fn probe_lemma2_below_floor() {
    let c = CoefficientSet::diagonal_constant(2, 2, 1.0, 1.0);
    let p0 = CarlemanParams::derived(0.125, 0.45, 5.0, 1.0, 1.2, 1.0, 0.1, 1.0);
    let d0 = DomainParams::centered(2, 2, &p0);
    let grid = GridSpec { points_per_axis: 12 };
    let t = estimate_thresholds(&c, &p0, &d0, &grid, 2.0).unwrap();
    println!(
        "delta0={:.4e} lambda0={:.4e} delta_star={:.4e} lambda_star={:.4e}",
        t.delta0, t.lambda0, t.delta_star, t.lambda_star
    );
    // Sweep lemma-2 margins below and at the settled floor, desk delta and settled delta.
    for (dlabel, delta) in [("desk-delta", 5.0), ("settled-delta", t.delta0)] {
        for factor in [0.1, 1.0] {
            let mut p = p0.clone();
            p.delta = delta;
            p.lambda = t.lambda0 * factor;
            let d = DomainParams::centered(2, 2, &p);
            let bump = make_bump(&p, &d);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
            let mut points = Vec::new();
            while points.len() < 50 {
                let pt: Vec<f64> = d
                    .bounding_box
                    .iter()
                    .map(|[lo, hi]| rng.gen_range(*lo..*hi))
                    .collect();
                if in_shell(&p, &d, &pt) {
                    points.push(pt);
                }
            }
            let mut neg = 0usize;
            let mut total = 0usize;
            let mut worst: f64 = f64::INFINITY;
            for seed in 0..20u64 {
                let poly = random_polynomial(d.dim(), 3, 500 + seed);
                let phi = FieldBundle::from_polynomial(poly).product(&bump);
                for pt in &points {
                    let rep = check_pointwise_lemma2(&phi, &c, &p, &d, &t, pt).unwrap();
                    total += 1;
                    let rel = rep.margin / rep.scale;
                    if rel < -1e-9 { neg += 1; }
                    worst = worst.min(rel);
                }
            }
            println!("{dlabel} lambda={factor}*lambda0: negative {neg}/{total}, worst rel {worst:+.3e}");
        }
    }
}
