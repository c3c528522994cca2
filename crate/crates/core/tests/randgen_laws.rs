use std::collections::{BTreeMap, HashSet};

use preclt::randgen::{
    make_distribution, sample_data_matrix, sample_values, DistributionKind, DistributionSpec, SeedSpec,
};

/// Exact standardized eighth moment, needed for the standard error of the
/// empirical fourth moment.
fn nu8(kind: DistributionKind, df: f64) -> f64 {
    match kind {
        DistributionKind::Gaussian => 105.0,
        // a⁸/9 with a = √3
        DistributionKind::Uniform => 9.0,
        // E[(E - 1)^8] for E ~ Exp(1) is the derangement number D_8
        DistributionKind::ShiftedExponential => 14833.0,
        DistributionKind::StudentT => {
            105.0 * (df - 2.0).powi(3) / ((df - 4.0) * (df - 6.0) * (df - 8.0))
        }
    }
}

fn spec(kind: DistributionKind, df: f64) -> DistributionSpec {
    let mut params = BTreeMap::new();
    if kind == DistributionKind::StudentT {
        params.insert("df".to_string(), df);
    }
    make_distribution(kind, &params).unwrap()
}

struct RawMoments {
    mean: f64,
    second: f64,
    fourth: f64,
}

fn raw_moments(v: &[f64]) -> RawMoments {
    let n = v.len() as f64;
    RawMoments {
        mean: v.iter().sum::<f64>() / n,
        second: v.iter().map(|x| x * x).sum::<f64>() / n,
        fourth: v.iter().map(|x| x.powi(4)).sum::<f64>() / n,
    }
}

fn assert_moments(kind: DistributionKind, df: f64, count: usize, k_se: f64, master_seed: u64) {
    let d = spec(kind, df);
    let values = sample_values(&d, count, SeedSpec::new(master_seed, 7));
    let m = raw_moments(&values);
    let n = count as f64;
    let nu4 = d.nu4();
    let se_mean = (1.0 / n).sqrt();
    let se_second = ((nu4 - 1.0) / n).sqrt();
    let se_fourth = ((nu8(kind, df) - nu4 * nu4) / n).sqrt();
    assert!(m.mean.abs() <= k_se * se_mean, "{kind}: mean {} (se {se_mean})", m.mean);
    assert!(
        (m.second - 1.0).abs() <= k_se * se_second,
        "{kind}: second moment {} (se {se_second})",
        m.second
    );
    assert!(
        (m.fourth - nu4).abs() <= k_se * se_fourth,
        "{kind}: fourth moment {} vs {nu4} (se {se_fourth})",
        m.fourth
    );
}

#[test]
fn every_law_matches_its_analytic_moments_within_five_standard_errors() {
    for (i, kind) in DistributionKind::ALL.into_iter().enumerate() {
        assert_moments(kind, 10.0, 100_000, 5.0, 1000 + i as u64);
    }
}

#[test]
fn uniform_million_draws_within_four_standard_errors() {
    assert_moments(DistributionKind::Uniform, 0.0, 1_000_000, 4.0, 99);
}

#[test]
fn analytic_fourth_moments() {
    assert_eq!(spec(DistributionKind::Gaussian, 0.0).nu4(), 3.0);
    assert!((spec(DistributionKind::Uniform, 0.0).nu4() - 1.8).abs() < 1e-15);
    assert!((spec(DistributionKind::StudentT, 8.0).nu4() - 4.5).abs() < 1e-15);
    assert_eq!(spec(DistributionKind::ShiftedExponential, 0.0).nu4(), 9.0);
}

#[test]
fn sampled_entries_are_pairwise_distinct() {
    for (i, kind) in DistributionKind::ALL.into_iter().enumerate() {
        let d = spec(kind, 10.0);
        let x = sample_data_matrix(&d, 20, 60, SeedSpec::new(5, i as u64)).unwrap();
        let bits: HashSet<u64> = x.entries().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits.len(), 1200, "{kind}: repeated entries");
    }
}

#[test]
fn matrices_are_deterministic_in_the_seed_and_shaped_p_by_n() {
    let d = DistributionSpec::gaussian();
    let a = sample_data_matrix(&d, 3, 5, SeedSpec::new(11, 3)).unwrap();
    let b = sample_data_matrix(&d, 3, 5, SeedSpec::new(11, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.p(), a.n()), (3, 5));
    let c = sample_data_matrix(&d, 3, 5, SeedSpec::new(11, 4)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn streams_do_not_depend_on_call_interleaving() {
    let d = spec(DistributionKind::Uniform, 0.0);
    let sequential: Vec<_> = (0..16)
        .map(|s| sample_data_matrix(&d, 4, 9, SeedSpec::new(3, s)).unwrap())
        .collect();
    let mut reversed: Vec<_> = (0..16)
        .rev()
        .map(|s| (s, sample_data_matrix(&d, 4, 9, SeedSpec::new(3, s)).unwrap()))
        .collect();
    reversed.sort_by_key(|(s, _)| *s);
    for (s, m) in reversed {
        assert_eq!(m, sequential[s as usize]);
    }
}

#[test]
fn invalid_shapes_and_parameters_are_rejected() {
    let d = DistributionSpec::gaussian();
    assert!(sample_data_matrix(&d, 5, 5, SeedSpec::new(0, 0)).is_err());
    assert!(sample_data_matrix(&d, 0, 5, SeedSpec::new(0, 0)).is_err());
    let mut params = BTreeMap::new();
    params.insert("df".to_string(), 4.0);
    assert!(make_distribution(DistributionKind::StudentT, &params).is_err());
}
