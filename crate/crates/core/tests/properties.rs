mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use common::*;
use vibrancy::glm::{fit_logistic, fit_negbin, fit_ols, logistic::inv_logit};
use vibrancy::ingest::geometry::BlockGroup;
use vibrancy::ingest::{assign_points, parse_permits_from, AssignedEvent, EventKind, StudyWindow};
use vibrancy::linalg::Matrix;
use vibrancy::measures::{build_measure_table, correlation_matrix, CrimeTaxonomy, EventTaxonomy, YearRange};
use vibrancy::psm::{match_pairs, paired_inference, standardized_differences, MatchMode};
use vibrancy::table::Table;
use vibrancy::trends::{fit_yearly_trend, TrendClass};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// Design with an intercept column plus `p - 1` columns from `vals`.
fn design(n: usize, p: usize, vals: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { vals[(i * 7 + j * 13) % vals.len()] + 0.01 * (i * j) as f64 })
}

fn random_design(seed: u64, n: usize, p: usize) -> (Matrix<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { normal(&mut r) });
    let y = (0..n).map(|_| normal(&mut r)).collect();
    (x, y)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn ols_residuals_orthogonal_to_columns(seed in 0u64..10_000, n in 8usize..60, p in 1usize..6) {
        let (x, y) = random_design(seed, n, p);
        let fit = fit_ols(&x, &y).unwrap();
        let fitted = x.mul_vec(&fit.coefficients);
        let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        for g in x.transpose_mul_vec(&r) {
            prop_assert!(g.abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn ols_r_squared_never_drops_with_a_column(seed in 0u64..10_000, n in 10usize..60, p in 1usize..5) {
        let (x, y) = random_design(seed, n, p + 1);
        let small = x.select_columns(&(0..p).collect::<Vec<_>>());
        let r_small = fit_ols(&small, &y).unwrap().r_squared.unwrap();
        let r_big = fit_ols(&x, &y).unwrap().r_squared.unwrap();
        prop_assert!(r_big >= r_small - 1e-12);
    }

    #[test]
    fn ols_rescaled_predictor(seed in 0u64..10_000, c in prop_oneof![0.001f64..0.5, 2.0f64..1000.0]) {
        let (x, y) = random_design(seed, 30, 3);
        let fit = fit_ols(&x, &y).unwrap();
        let xs = Matrix::from_fn(30, 3, |i, j| if j == 1 { x.row(i)[j] * c } else { x.row(i)[j] });
        let scaled = fit_ols(&xs, &y).unwrap();
        prop_assert!((scaled.coefficients[1] * c - fit.coefficients[1]).abs() < 1e-8 * fit.coefficients[1].abs().max(1.0));
        prop_assert!((scaled.coefficients[2] - fit.coefficients[2]).abs() < 1e-8);
        prop_assert!((scaled.p_values[1] - fit.p_values[1]).abs() < 1e-8);
    }

    #[test]
    fn logistic_fitted_probabilities_sum_to_successes(seed in 0u64..10_000, n in 40usize..150) {
        let mut r = rng(seed);
        let x = Matrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { normal(&mut r) });
        let y: Vec<f64> = (0..n).map(|i| if normal(&mut r) + x.row(i)[1] > 0.0 { 1.0 } else { 0.0 }).collect();
        prop_assume!(y.iter().sum::<f64>() > 2.0 && y.iter().sum::<f64>() < n as f64 - 2.0);
        let Ok(fit) = fit_logistic(&x, &y) else { return Ok(()) };
        let p: f64 = x.mul_vec(&fit.coefficients).into_iter().map(inv_logit).sum();
        prop_assert!((p - y.iter().sum::<f64>()).abs() < 1e-6);
        prop_assert!(logistic_score_check(&x, &y, &fit).passes());
        let k = fit.n_params() as f64;
        prop_assert!((fit.aic.unwrap() - (2.0 * k - 2.0 * fit.log_likelihood.unwrap())).abs() < 1e-9);
        prop_assert!(fit.vcov.max_asymmetry() < 1e-12);
    }

    #[test]
    fn negbin_aic_and_vcov(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = 200;
        let x = Matrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { normal(&mut r) });
        let y: Vec<f64> = (0..n).map(|i| nb_draw(&mut r, (1.0 + 0.4 * x.row(i)[1]).exp(), 3.0)).collect();
        let fit = fit_negbin(&x, &y).unwrap();
        let k = fit.n_params() as f64 + 1.0;
        prop_assert!((fit.aic.unwrap() - (2.0 * k - 2.0 * fit.log_likelihood.unwrap())).abs() < 1e-8);
        prop_assert!(fit.vcov.max_asymmetry() < 1e-12);
        if !fit.theta_at_boundary {
            let chk = negbin_score_check(&x, &y, &fit);
            prop_assert!(chk.passes(), "{:?}", chk);
        }
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn greedy_matching_certificate(seed in 0u64..1_000_000, caliper in prop::option::of(0.01f64..0.3)) {
        let (ids, scores, treated) = score_configuration(seed);
        for (mode, replace) in [(MatchMode::OneToOne, false), (MatchMode::ManyToOne, true)] {
            let m = match_pairs(&ids, &scores, &treated, mode, caliper);
            let (pairs, dropped) = greedy_replay(&ids, &scores, &treated, replace, caliper);
            let got: Vec<(usize, usize)> = m.pairs.iter().map(|p| (p.treated, p.control)).collect();
            prop_assert_eq!(&got, &pairs);
            prop_assert_eq!(&m.dropped_treated, &dropped);
            for p in &m.pairs {
                prop_assert!(treated[p.treated] && !treated[p.control]);
                prop_assert_eq!(p.distance, (scores[p.treated] - scores[p.control]).abs());
            }
            if !replace {
                let mut used: Vec<usize> = m.pairs.iter().map(|p| p.control).collect();
                used.sort();
                used.dedup();
                prop_assert_eq!(used.len(), m.pairs.len());
            }
            prop_assert_eq!(m.pairs.len() + m.dropped_treated.len(), treated.iter().filter(|&&t| t).count());
        }
    }

    #[test]
    fn paired_inference_antisymmetry_and_shift(d in prop::collection::vec(-50.0f64..50.0, 2..40), c in -10.0f64..10.0) {
        prop_assume!(d.iter().any(|v| (v - d[0]).abs() > 1e-6));
        let a = paired_inference(&d).unwrap();
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let b = paired_inference(&neg).unwrap();
        prop_assert!((a.mean_diff + b.mean_diff).abs() < 1e-9);
        prop_assert!((a.ci_low + b.ci_high).abs() < 1e-9 && (a.ci_high + b.ci_low).abs() < 1e-9);
        prop_assert!((a.t_p - b.t_p).abs() < 1e-12);
        prop_assert!((a.wilcoxon_p - b.wilcoxon_p).abs() < 1e-12);

        let shifted: Vec<f64> = d.iter().map(|v| v + c).collect();
        let s = paired_inference(&shifted).unwrap();
        prop_assert!((s.mean_diff - a.mean_diff - c).abs() < 1e-9);
        prop_assert!(((s.ci_high - s.ci_low) - (a.ci_high - a.ci_low)).abs() < 1e-7);
        prop_assert!(a.ci_low <= a.mean_diff && a.mean_diff <= a.ci_high);
    }

    #[test]
    fn smd_invariant_to_affine_rescaling(seed in 0u64..10_000, k in 0.01f64..100.0, shift in -1e3f64..1e3) {
        let mut r = rng(seed);
        let n = 40;
        let treated: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let col: Vec<f64> = (0..n).map(|i| normal(&mut r) + if treated[i] { 0.5 } else { 0.0 }).collect();
        let x = Matrix::from_columns(&[col.clone()]);
        let xs = Matrix::from_columns(&[col.iter().map(|v| v * k + shift).collect()]);
        let pairs = match_pairs(&(0..n).map(|i| format!("{i:03}")).collect::<Vec<_>>(), &col, &treated, MatchMode::OneToOne, None).pairs;
        for p in [None, Some(pairs.as_slice())] {
            let a = standardized_differences(&x, &treated, p)[0].unwrap();
            let b = standardized_differences(&xs, &treated, p)[0].unwrap();
            prop_assert!((a - b).abs() < 1e-7 * a.abs().max(1.0));
        }
    }

    #[test]
    fn trend_invariances(v in prop::collection::vec(0.0f64..100.0, 10), shift in -50.0f64..50.0, k in 0.1f64..10.0) {
        let series = |f: &dyn Fn(f64) -> f64| -> BTreeMap<i32, f64> { (2006..).zip(&v).map(|(y, &x)| (y, f(x))).collect() };
        let base = fit_yearly_trend(&series(&|x| x)).unwrap();
        let sh = fit_yearly_trend(&series(&|x| x + shift)).unwrap();
        let sc = fit_yearly_trend(&series(&|x| x * k)).unwrap();
        let ng = fit_yearly_trend(&series(&|x| -x)).unwrap();
        prop_assert!((sh.slope - base.slope).abs() < 1e-8);
        prop_assert!((sc.slope - k * base.slope).abs() < 1e-8 * k.max(1.0) * base.slope.abs().max(1.0));
        prop_assert!((ng.slope + base.slope).abs() < 1e-9);
        let class = base.classify(0.05);
        prop_assert_eq!(sh.classify(0.05), class);
        prop_assert_eq!(sc.classify(0.05), class);
        let flipped = match class {
            TrendClass::Positive => TrendClass::Negative,
            TrendClass::Negative => TrendClass::Positive,
            TrendClass::None => TrendClass::None,
        };
        prop_assert_eq!(ng.classify(0.05), flipped);
    }
}

const EVENT_TYPES: [&str; 4] = ["4th of July", "Birthday Party", "Labor Day", "Graduation Party"];
const CRIME_TYPES: [&str; 4] = ["Burglary", "Homicide", "Gambling", "Vandalism"];

fn events(spec: &[(usize, usize, i32, usize)], kind: EventKind, types: &[&str]) -> Vec<AssignedEvent> {
    spec.iter()
        .map(|&(bg, t, y, m)| AssignedEvent {
            kind,
            date: NaiveDate::from_ymd_opt(y, m as u32, 15).unwrap(),
            raw_type: types[t].to_string(),
            blockgroup_id: (bg < 5).then(|| format!("b{bg}")),
        })
        .collect()
}

fn event_spec() -> impl Strategy<Value = Vec<(usize, usize, i32, usize)>> {
    prop::collection::vec((0usize..6, 0usize..4, 2004i32..2017, 1usize..13), 0..80)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn measure_table_conservation_and_invariance(e in event_spec(), c in event_spec(), seed in 0u64..1000) {
        let ids: Vec<String> = (0..5).map(|i| format!("b{i}")).collect();
        let years = YearRange::default();
        let (et, ct) = (EventTaxonomy::standard(), CrimeTaxonomy::standard());
        let ev = events(&e, EventKind::Permit, &EVENT_TYPES);
        let cr = events(&c, EventKind::Crime, &CRIME_TYPES);
        let t = build_measure_table(&ids, &ev, &cr, et, ct, years).unwrap();

        let n_events: u64 = t.rows.iter().map(|r| r.n_events).sum();
        prop_assert_eq!(n_events as usize + t.unassigned_events, ev.len());
        let n_crimes: u64 = t.rows.iter().map(|r| r.crime_total).sum();
        prop_assert_eq!(n_crimes as usize + t.unassigned_crimes, cr.len());
        for r in &t.rows {
            prop_assert_eq!(r.n_spontaneous + r.n_regular, r.n_events);
            let in_years: u64 = r.yearly_events.values().sum();
            prop_assert!(in_years <= r.n_events);
            prop_assert_eq!(r.crime_violent + r.crime_nonviolent + r.crime_vice <= r.crime_total, true);
        }

        // Input order does not matter.
        let mut r = rng(seed);
        let mut ev2 = ev.clone();
        let mut cr2 = cr.clone();
        use rand::seq::SliceRandom;
        ev2.shuffle(&mut r);
        cr2.shuffle(&mut r);
        let t2 = build_measure_table(&ids, &ev2, &cr2, et, ct, years).unwrap();
        prop_assert_eq!(&t2.rows, &t.rows);

        // Duplicating every record doubles counts and keeps proportions.
        let ev3: Vec<AssignedEvent> = ev.iter().chain(&ev).cloned().collect();
        let cr3: Vec<AssignedEvent> = cr.iter().chain(&cr).cloned().collect();
        let t3 = build_measure_table(&ids, &ev3, &cr3, et, ct, years).unwrap();
        for (a, b) in t.rows.iter().zip(&t3.rows) {
            prop_assert_eq!(2 * a.n_events, b.n_events);
            prop_assert_eq!(2 * a.crime_total, b.crime_total);
            prop_assert_eq!(a.spontaneous_proportion(), b.spontaneous_proportion());
        }
    }

    #[test]
    fn correlation_matrix_symmetric(cols in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, -10.0f64..10.0), 12), 2..5)) {
        let mut t = Table::new((0..12).map(|i| i.to_string()).collect());
        let names: Vec<String> = (0..cols.len()).map(|j| format!("c{j}")).collect();
        for (n, c) in names.iter().zip(&cols) {
            t.insert(n.clone(), c.clone());
        }
        let m = correlation_matrix(&t, &names);
        for i in 0..names.len() {
            if let Some(d) = m.values[i][i] {
                prop_assert_eq!(d, 1.0);
            }
            for j in 0..names.len() {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                if let Some(v) = m.values[i][j] {
                    prop_assert!((-1.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn spatial_join_translation_and_order(seed in 0u64..10_000, dx in -100.0f64..100.0, dy in -50.0f64..50.0) {
        let polys = jittered_grid(5, seed);
        let pts = probe_points(400, seed, &polys);
        let base: Vec<Option<String>> = assign_points(&pts, &polys).into_iter().map(|k| k.map(|k| polys[k].id.clone())).collect();
        prop_assert_eq!(&base, &naive_assignment(&pts, &polys));

        let moved: Vec<BlockGroup> = polys
            .iter()
            .map(|b| BlockGroup::new(b.id.clone(), vec![b.rings[0].iter().map(|&(x, y)| (x + dx, y + dy)).collect()], Some(b.area)))
            .collect();
        let mpts: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        let got: Vec<Option<String>> = assign_points(&mpts, &moved).into_iter().map(|k| k.map(|k| moved[k].id.clone())).collect();
        // Rounding can move points that sit on an edge; compare the rest.
        let clear = |p: (f64, f64)| polys.iter().all(|b| b.rings[0].windows(2).all(|w| seg_dist(p, w[0], w[1]) > 1e-9));
        for (i, p) in pts.iter().enumerate() {
            if clear(*p) {
                prop_assert_eq!(&got[i], &base[i]);
            }
        }

        let mut rev = polys.clone();
        rev.reverse();
        let got: Vec<Option<String>> = assign_points(&pts, &rev).into_iter().map(|k| k.map(|k| rev[k].id.clone())).collect();
        prop_assert_eq!(got, base);
    }

    #[test]
    fn permit_parser_accounts_for_every_row(rows in prop::collection::vec((2000i32..2020, 1u32..13, 1u32..29), 0..60)) {
        let mut text = String::from("date,lat,lon,event_type\n");
        for (y, m, d) in &rows {
            text.push_str(&format!("{y:04}-{m:02}-{d:02},39.95,-75.16,Birthday Party\n"));
        }
        let parsed = parse_permits_from(text.as_bytes(), StudyWindow::permits()).unwrap();
        prop_assert_eq!(parsed.rows, rows.len());
        prop_assert_eq!(parsed.records.len() + parsed.skipped_out_of_window, parsed.rows);
        let inside = rows.iter().filter(|(y, m, d)| StudyWindow::permits().contains(NaiveDate::from_ymd_opt(*y, *m, *d).unwrap())).count();
        prop_assert_eq!(parsed.records.len(), inside);
    }
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    ((p.0 - a.0 - t * vx).powi(2) + (p.1 - a.1 - t * vy).powi(2)).sqrt()
}

#[test]
fn ols_fit_with_fixed_design_is_exact() {
    let x = design(12, 3, &[0.3, -1.2, 2.2, 0.7, -0.4]);
    let y: Vec<f64> = (0..12).map(|i| 2.0 - x.row(i)[1] + 0.5 * x.row(i)[2]).collect();
    let fit = fit_ols(&x, &y).unwrap();
    for (a, b) in fit.coefficients.iter().zip([2.0, -1.0, 0.5]) {
        assert!((a - b).abs() < 1e-10);
    }
}
