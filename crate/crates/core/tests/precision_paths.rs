//! Cross-route agreement for diagonal precision entries on sampled data.

use std::collections::BTreeMap;

use preclt::linalg::{projection_complement, qr_gram_schmidt, residual_quadform};
use preclt::precision::{
    lss_difference, precision_diag_cramer, precision_diag_direct, precision_diag_quadform,
    precision_pair_quadform, sample_covariance, PopulationCovariance,
};
use preclt::randgen::{make_distribution, sample_data_matrix, DistributionKind, DistributionSpec, SeedSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn law(kind: DistributionKind) -> DistributionSpec {
    let mut params = BTreeMap::new();
    if kind == DistributionKind::StudentT {
        params.insert("df".to_string(), 10.0);
    }
    make_distribution(kind, &params).unwrap()
}

#[test]
fn four_routes_agree_on_two_hundred_instances() {
    let mut dims = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for inst in 0..200u64 {
        let kind = DistributionKind::ALL[(inst % 4) as usize];
        let p = dims.random_range(2..=40);
        let n = dims.random_range(p + 5..=120);
        let x = sample_data_matrix(&law(kind), p, n, SeedSpec::new(17, inst)).unwrap();
        let s = sample_covariance(&x, &PopulationCovariance::identity(p).unwrap()).unwrap();
        let direct = precision_diag_direct(&s).unwrap();
        for q in 1..=p {
            let d = direct[q - 1];
            worst = worst
                .max(rel(precision_diag_cramer(&s, q).unwrap(), d))
                .max(rel(precision_diag_quadform(&x, q).unwrap(), d));
            let lss = lss_difference(&s, q).unwrap();
            assert!((lss.difference - d.ln()).abs() < 1e-8, "lss identity at p={p} n={n} q={q}");
        }
        let pair = precision_pair_quadform(&x).unwrap();
        worst = worst
            .max(rel(pair.inv_pp, direct[p - 1]))
            .max(rel(pair.inv_pm1, direct[p - 2]))
            .max(rel(pair.inv_pm1_product, direct[p - 2]));
    }
    assert!(worst < 1e-8, "worst relative disagreement {worst:e}");
}

#[test]
fn swapping_rows_permutes_the_entries() {
    let x = sample_data_matrix(&law(DistributionKind::ShiftedExponential), 12, 40, SeedSpec::new(2, 2)).unwrap();
    let (i, j) = (2usize, 9usize);
    let swapped = x.swap_rows(i, j);
    let p = x.p();
    let base: Vec<f64> = (1..=p).map(|q| precision_diag_quadform(&x, q).unwrap()).collect();
    let perm: Vec<f64> = (1..=p).map(|q| precision_diag_quadform(&swapped, q).unwrap()).collect();
    for q in 0..p {
        let src = if q == i { j } else if q == j { i } else { q };
        assert!(rel(perm[q], base[src]) < 1e-10, "q={}", q + 1);
    }
    let mut a = base.clone();
    let mut b = perm.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (u, v) in a.iter().zip(&b) {
        assert!(rel(*u, *v) < 1e-10);
    }
}

#[test]
fn diagonal_population_covariance_scales_identity_entries() {
    let p = 15;
    let values: Vec<f64> = (1..=p).map(|i| 0.5 + i as f64 / 4.0).collect();
    let sigma = PopulationCovariance::diagonal(&values).unwrap();
    let x = sample_data_matrix(&law(DistributionKind::Uniform), p, 50, SeedSpec::new(8, 1)).unwrap();
    let direct = precision_diag_direct(&sample_covariance(&x, &sigma).unwrap()).unwrap();
    for q in 1..=p {
        let reduced = sigma.inverse_diag(q) * precision_diag_quadform(&x, q).unwrap();
        assert!(rel(reduced, direct[q - 1]) < 1e-10, "q={q}");
    }
}

#[test]
fn last_residual_matches_projected_quadratic_form() {
    let x = sample_data_matrix(&DistributionSpec::gaussian(), 10, 30, SeedSpec::new(4, 4)).unwrap();
    let p = x.p();
    let qr = qr_gram_schmidt(&x.transpose()).unwrap();
    let order: Vec<usize> = (0..p - 1).collect();
    let proj = projection_complement(&x.rows_as_columns(&order).transpose()).unwrap();
    assert!((proj.trace() - (x.n() - p + 1) as f64).abs() < 1e-8);
    let quad = residual_quadform(&x.row(p - 1), &proj).unwrap();
    assert!(rel(quad, qr.r_diag_sq(p - 1)) < 1e-8);
}
