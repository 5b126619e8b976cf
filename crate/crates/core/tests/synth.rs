mod common;

use std::collections::BTreeMap;
use std::path::Path;

use vibrancy::glm::{build_design, standard_covariates, Family, ModelSpec, Term};
use vibrancy::ingest::{assign, parse_blockgroups, parse_crimes, parse_permits, parse_profiles, StudyWindow};
use vibrancy::measures::{build_measure_table, log_crime_column, pearson, CrimeTaxonomy, EventTaxonomy};
use vibrancy::psm::{estimate_propensity, run_experiment, MatchOptions, OutcomeSpec, TreatmentRule};
use vibrancy::synth::{simulate, simulate_seeds, CityConfig, LinearModel, TREATMENT_COLUMN};

fn small(n: usize, seed: u64) -> CityConfig {
    CityConfig { n_blockgroups: n, seed, ..CityConfig::default() }
}

#[test]
fn counts_scatter_around_their_expectations() {
    let city = simulate(&small(600, 11)).unwrap();
    let (mut inside, mut total) = (0, 0);
    for u in &city.units {
        for k in 0..u.events.len() {
            let (reg, sp) = u.events[k];
            for (obs, mu) in [((reg + sp) as f64, u.expected_events[k]), (u.crimes[k].iter().sum::<u64>() as f64, u.expected_crimes[k])] {
                total += 1;
                if ((obs - mu) / mu.sqrt()).abs() <= 4.0 {
                    inside += 1;
                }
            }
        }
    }
    assert!(inside as f64 >= 0.99 * total as f64, "{inside}/{total}");
}

#[test]
fn generator_signs_show_in_correlations() {
    let city = simulate(&small(2000, 3)).unwrap();
    let income: Vec<f64> = city.units.iter().map(|u| u.profile.mean_income.ln()).collect();
    let permits: Vec<f64> = city.units.iter().map(|u| u.total_events() as f64).collect();
    let crimes: Vec<f64> = city.units.iter().map(|u| (u.total_crimes() as f64 + 1.0).ln()).collect();
    assert!(pearson(&permits, &income).unwrap() > 0.0);
    assert!(pearson(&crimes, &income).unwrap() < 0.0);

    // Sign flips with the income coefficient of the event model.
    let mut cfg = small(2000, 3);
    cfg.events.coefficients.insert("income".into(), -0.5);
    cfg.treatment.coefficients.insert("income".into(), -1.0);
    let city = simulate(&cfg).unwrap();
    let permits: Vec<f64> = city.units.iter().map(|u| u.total_events() as f64).collect();
    assert!(pearson(&permits, &income).unwrap() < 0.0);
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn same_seed_writes_identical_bundles() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small(120, 77);
    vibrancy::synth::generate_city(&cfg, a.path()).unwrap();
    vibrancy::synth::generate_city(&cfg, b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert_eq!(ta.len(), 6);
    assert_eq!(ta, tb);

    let c = tempfile::tempdir().unwrap();
    vibrancy::synth::generate_city(&small(120, 78), c.path()).unwrap();
    assert_ne!(read_tree(c.path())["crimes.csv"], ta["crimes.csv"]);
}

#[test]
fn bundle_round_trips_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(150, 5);
    let city = simulate(&cfg).unwrap();
    city.write_bundle(dir.path()).unwrap();
    let p = |f: &str| dir.path().join(f);

    let bgs = parse_blockgroups(&p("blockgroups.geojson")).unwrap();
    let profiles = parse_profiles(&p("acs.csv"), &p("landuse.csv")).unwrap();
    let permits = parse_permits(&p("permits.csv"), StudyWindow::permits()).unwrap();
    let crimes = parse_crimes(&p("crimes.csv"), StudyWindow::crimes()).unwrap();
    assert_eq!(permits.skipped_out_of_window + crimes.skipped_out_of_window, 0);
    assert_eq!(bgs.len(), 150);

    let ev = assign(&permits.records, &bgs);
    let cr = assign(&crimes.records, &bgs);
    assert!(ev.iter().chain(&cr).all(|e| e.blockgroup_id.is_some()));
    let ids: Vec<String> = bgs.iter().map(|b| b.id.clone()).collect();
    let table = build_measure_table(&ids, &ev, &cr, EventTaxonomy::standard(), CrimeTaxonomy::standard(), cfg.years()).unwrap();
    let direct = city.measure_table();
    for (a, b) in table.rows.iter().zip(&direct.rows) {
        assert_eq!(a.blockgroup_id, b.blockgroup_id);
        assert_eq!((a.n_events, a.n_spontaneous, a.crime_total), (b.n_events, b.n_spontaneous, b.crime_total));
        assert_eq!((a.crime_violent, a.crime_nonviolent, a.crime_vice), (b.crime_violent, b.crime_nonviolent, b.crime_vice));
        assert_eq!(a.yearly_events, b.yearly_events);
        assert_eq!(a.yearly_crimes, b.yearly_crimes);
    }
    for (a, b) in profiles.iter().zip(city.profiles()) {
        assert_eq!(a.blockgroup_id, b.blockgroup_id);
        assert!((a.mean_income - b.mean_income).abs() < 1e-6 * b.mean_income);
        assert!((a.prop_black - b.prop_black).abs() < 1e-9);
        assert!((a.prop_vacant - b.prop_vacant).abs() < 1e-9);
        assert!((a.total_area - b.total_area).abs() < 1e-6 * b.total_area);
    }
}

#[test]
fn yearly_totals_match_expected_counts() {
    let cfg = small(800, 21);
    let city = simulate(&cfg).unwrap();
    for (k, _) in cfg.years().years().enumerate() {
        let obs: f64 = city.units.iter().map(|u| u.crimes[k].iter().sum::<u64>() as f64).sum();
        let mu: f64 = city.units.iter().map(|u| u.expected_crimes[k]).sum();
        assert!((obs - mu).abs() < 3.0 * mu.sqrt(), "year {k}: {obs} vs {mu}");
        let obs: f64 = city.units.iter().map(|u| (u.events[k].0 + u.events[k].1) as f64).sum();
        let mu: f64 = city.units.iter().map(|u| u.expected_events[k]).sum();
        assert!((obs - mu).abs() < 3.0 * mu.sqrt(), "year {k}: {obs} vs {mu}");
    }
}

#[test]
fn null_city_estimates_are_unbiased() {
    let cfg = CityConfig {
        n_blockgroups: 500,
        tau: 0.0,
        treatment: LinearModel { intercept: -1.6, coefficients: BTreeMap::new() },
        ..CityConfig::default()
    };
    let seeds: Vec<u64> = (1000..1100).collect();
    let cities = simulate_seeds(&cfg, &seeds).unwrap();
    let outcome = OutcomeSpec::continuous("y", &log_crime_column(None));
    let rule = TreatmentRule::Indicator { column: TREATMENT_COLUMN.into() };
    let (mut naive, mut matched) = (Vec::new(), Vec::new());
    for city in &cities {
        let e = run_experiment(&city.to_table(), &rule, &outcome, &standard_covariates(), &MatchOptions::default()).unwrap();
        naive.push(e.naive_diff);
        matched.push(e.inference.mean_diff);
    }
    for est in [&naive, &matched] {
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (est.len() as f64).sqrt(), "bias {m}, sd {sd}");
    }
}

fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Labels thresholded on income observed with noise, so the logistic fit
/// is not perfectly separated.
#[test]
fn income_threshold_labels_are_well_separated() {
    let city = simulate(&small(500, 8)).unwrap();
    let mut table = city.to_table();
    let mut r = common::rng(8);
    let labels: Vec<Option<f64>> = city
        .units
        .iter()
        .map(|u| Some(if (u.profile.mean_income / 45_000.0).ln() + 0.1 * common::normal(&mut r) > 0.0 { 1.0 } else { 0.0 }))
        .collect();
    table.insert("label", labels);
    let spec = ModelSpec { name: "p".into(), family: Family::Logistic, outcome: Term::identity("label"), predictors: standard_covariates() };
    let d = build_design::<f64>(&table, &spec).unwrap();
    let treated: Vec<bool> = d.y.iter().map(|&v| v == 1.0).collect();
    let p = estimate_propensity(&d.x, &treated).unwrap().probability;
    let pos: Vec<f64> = p.iter().zip(&treated).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = p.iter().zip(&treated).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
    assert!(auc(&pos, &neg) > 0.9);
}
