use std::sync::Arc;

use distmat_core::bench::{median, synth_clusters};
use distmat_core::linalg::orthonormality_defect;
use distmat_core::norm_sampling::{estimate_row_weights, sample_rows};
use distmat_core::pipeline::{rng_from_seed, Evaluator};
use distmat_core::regress::fit_left_factor;
use distmat_core::sketch::build_right_factor;
use distmat_core::{
    low_rank_approx, read_budget, uniform_baseline, DistanceOracle, MetricKind, PointSet, SketchConfig,
};
use nalgebra::DMatrix;

fn clusters(n: usize, d: usize, c: usize, seed: u64) -> Arc<PointSet> {
    Arc::new(synth_clusters(n, d, c, seed, 1.0).unwrap())
}

#[test]
fn two_point_sketch_residual() {
    // 32 copies each of two distinct points
    let pts = PointSet::new((0..64).map(|i| if i % 2 == 0 { vec![0.0, 0.0] } else { vec![3.0, 4.0] }).collect()).unwrap();
    let o = DistanceOracle::symmetric_points(Arc::new(pts), MetricKind::Euclidean);
    let ev = Evaluator::new(&o).unwrap();
    let cfg = SketchConfig::new(2, 0.25);
    let good = (0..20u64)
        .filter(|&seed| {
            let mut rng = rng_from_seed(seed);
            let w = estimate_row_weights(&o, &mut rng).unwrap();
            let u = build_right_factor(&o, &w, &cfg, &mut rng).unwrap();
            assert!(orthonormality_defect(&u.u) <= 1e-8);
            ev.projection_err_sq(&u.u) <= cfg.eps * ev.fro_sq()
        })
        .count();
    assert!(good >= 18, "{good}/20");
}

#[test]
fn exact_rank_recovery() {
    // three distinct rows, repeated
    let a = DMatrix::from_fn(30, 12, |i, j| match i % 3 {
        0 => 1.0 + j as f64,
        1 => (j % 4) as f64,
        _ => 5.0,
    });
    let o = DistanceOracle::from_matrix(a).unwrap();
    let ev = Evaluator::new(&o).unwrap();
    let cfg = SketchConfig::new(3, 0.5);
    let mut covered = 0;
    for seed in 0..40 {
        let mut rng = rng_from_seed(seed);
        let w = estimate_row_weights(&o, &mut rng).unwrap();
        // the sketch draws its rows first, so a clone of the stream sees the same picks
        let picks = sample_rows(&w, cfg.rows(), &mut rng.clone()).unwrap();
        let u = build_right_factor(&o, &w, &cfg, &mut rng).unwrap();
        if (0..3).all(|p| picks.iter().any(|i| i % 3 == p)) {
            covered += 1;
            assert!(ev.projection_err_sq(&u.u) <= 1e-6 * ev.fro_sq(), "seed {seed}");
        }
    }
    assert!(covered >= 20, "{covered}/40");
}

#[test]
fn more_row_samples_do_not_hurt() {
    let o = DistanceOracle::symmetric_points(clusters(150, 8, 6, 31), MetricKind::Euclidean);
    let ev = Evaluator::new(&o).unwrap();
    let residuals = |cr: f64| {
        let cfg = SketchConfig::new(5, 0.5).with_oversample(cr, 4.0);
        let mut r: Vec<f64> = (0..50u64)
            .map(|seed| {
                let mut rng = rng_from_seed(seed);
                let w = estimate_row_weights(&o, &mut rng).unwrap();
                ev.projection_err_sq(&build_right_factor(&o, &w, &cfg, &mut rng).unwrap().u)
            })
            .collect();
        median(&mut r)
    };
    let (low, high) = (residuals(1.0), residuals(8.0));
    assert!(high <= 1.05 * low, "c_r=8 median {high} vs c_r=1 median {low}");
}

#[test]
fn regression_reads_and_determinism() {
    let o = DistanceOracle::symmetric_points(clusters(40, 3, 4, 32), MetricKind::Manhattan);
    let cfg = SketchConfig::new(2, 0.4);
    let mut rng = rng_from_seed(1);
    let w = estimate_row_weights(&o, &mut rng).unwrap();
    let u = build_right_factor(&o, &w, &cfg, &mut rng).unwrap();
    let before = o.ledger().snapshot();
    let v1 = fit_left_factor(&o, &u, &cfg, &mut rng_from_seed(9)).unwrap();
    let delta = o.ledger().snapshot().since(&before);
    assert_eq!(delta.regression_reads, 40 * cfg.cols() as u64);
    assert!(cfg.cols() as f64 <= 4.0 * 2.0 / 0.4 + 1.0);
    let v2 = fit_left_factor(&o, &u, &cfg, &mut rng_from_seed(9)).unwrap();
    assert_eq!(v1, v2);
}

#[test]
fn regression_within_one_plus_eps() {
    let cfg = SketchConfig::new(3, 0.5);
    let mut good = 0;
    for seed in 0..100u64 {
        let o = DistanceOracle::symmetric_points(clusters(50, 4, 5, 1000 + seed), MetricKind::ALL[seed as usize % 4]);
        let f = low_rank_approx(&o, &cfg, seed).unwrap();
        let ev = Evaluator::new(&o).unwrap();
        let (err, best) = (ev.err_sq(&f), ev.projection_err_sq(f.u()));
        assert!(err >= best * (1.0 - 1e-9));
        good += usize::from(err <= (1.0 + cfg.eps) * best);
    }
    assert!(good >= 90, "{good}/100");
}

#[test]
fn clusters_guarantee_rank_twenty() {
    let o = DistanceOracle::symmetric_points(clusters(512, 32, 20, 33), MetricKind::Euclidean);
    let mut ev = Evaluator::new(&o).unwrap();
    let cfg = SketchConfig::new(20, 0.5);
    let mut good = 0;
    for seed in 0..20 {
        let f = low_rank_approx(&o, &cfg, seed).unwrap();
        let r = ev.report(&f, None).unwrap();
        let (err, opt, fro) = (r.err_sq.unwrap(), r.opt_sq.unwrap(), r.fro_sq.unwrap());
        assert!(err >= opt - 1e-9 * fro);
        assert!((f.ledger.algorithm() as f64) <= read_budget(512, 512, &cfg));
        good += usize::from(r.excess.unwrap() <= cfg.eps);
    }
    assert!(good >= 18, "{good}/20");
}

#[test]
fn composition_chain() {
    let cfg = SketchConfig::new(4, 0.5);
    let o = DistanceOracle::symmetric_points(clusters(120, 6, 8, 34), MetricKind::Chebyshev);
    let mut ev = Evaluator::new(&o).unwrap();
    let opt = ev.opt_sq(cfg.k).unwrap();
    let fro = ev.fro_sq();
    let mut both = 0;
    for seed in 0..30 {
        let f = low_rank_approx(&o, &cfg, seed).unwrap();
        let proj = ev.projection_err_sq(f.u());
        let err = ev.err_sq(&f);
        let sketch_ok = proj <= opt + cfg.eps * fro;
        let regress_ok = err <= (1.0 + cfg.eps) * proj;
        if sketch_ok && regress_ok {
            both += 1;
            assert!(err <= (1.0 + cfg.eps) * (opt + cfg.eps * fro));
        }
    }
    assert!(both >= 25, "{both}/30");
}

#[test]
fn weighted_beats_uniform_with_an_outlier() {
    let near = |i: usize| vec![(i % 3) as f64 * 0.01, (i % 5) as f64 * 0.01];
    let mut left: Vec<Vec<f64>> = (0..99).map(near).collect();
    left.push(vec![100.0, 100.0]);
    let right: Vec<Vec<f64>> = (0..40).map(|i| near(i + 1)).collect();
    let o = DistanceOracle::from_points(
        Arc::new(PointSet::new(left).unwrap()),
        Arc::new(PointSet::new(right).unwrap()),
        MetricKind::Euclidean,
    )
    .unwrap();
    let mut ev = Evaluator::new(&o).unwrap();
    let cfg = SketchConfig::new(1, 0.5);
    let mut weighted = Vec::new();
    let mut uniform = Vec::new();
    for seed in 0..50 {
        weighted.push(ev.report(&low_rank_approx(&o, &cfg, seed).unwrap(), None).unwrap().excess.unwrap());
        uniform.push(ev.report(&uniform_baseline(&o, &cfg, seed).unwrap(), None).unwrap().excess.unwrap());
    }
    let (w, u) = (median(&mut weighted), median(&mut uniform));
    assert!(w <= u, "weighted {w} vs uniform {u}");
}

#[test]
fn uniform_baseline_on_constant_and_bipartite() {
    let o = DistanceOracle::from_matrix(DMatrix::from_element(9, 7, 2.0)).unwrap();
    let cfg = SketchConfig::new(1, 0.5);
    let w = low_rank_approx(&o, &cfg, 3).unwrap();
    let u = uniform_baseline(&o, &cfg, 3).unwrap();
    assert_eq!(w.ledger.weights_reads, 9 + 7);
    assert_eq!(u.ledger.weights_reads, 0);
    assert_eq!(w.ledger.sketch_reads, u.ledger.sketch_reads);
    assert_eq!(w.ledger.regression_reads, u.ledger.regression_reads);
    let ev = Evaluator::new(&o).unwrap();
    assert!(ev.err_sq(&w) <= 1e-9 * ev.fro_sq());
    assert!(ev.err_sq(&u) <= 1e-9 * ev.fro_sq());
}
