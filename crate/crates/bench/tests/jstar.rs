use cadam_bench::jstar::{compute_jstar, JStarCache};
use cadam_core::linalg::{solve, Matrix};
use cadam_core::problems::{NoiseScales, PortfolioData, PortfolioProblem, QuadCompose};
use cadam_core::OracleRng;
use rand::{Rng, SeedableRng};

/// Normal equations solved independently of the problem's own minimizer.
fn least_squares_value(a: &Matrix<f64>, b: &[f64]) -> f64 {
    let (q, p) = (a.rows(), a.cols());
    let ata = Matrix::from_fn(p, p, |i, j| (0..q).map(|k| a.row(k)[i] * a.row(k)[j]).sum());
    let atb: Vec<f64> = (0..p).map(|i| -(0..q).map(|k| a.row(k)[i] * b[k]).sum::<f64>()).collect();
    let x = solve(&ata, &atb).unwrap();
    0.5 * (0..q)
        .map(|k| {
            let r: f64 = a.row(k).iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() + b[k];
            r * r
        })
        .sum::<f64>()
}

#[test]
fn quad_matches_closed_form_least_squares() {
    for seed in 0..5 {
        let prob = QuadCompose::<f64>::random(6, 9, NoiseScales::uniform(0.5), seed).unwrap();
        let exact = least_squares_value(prob.a(), prob.b());
        let j = compute_jstar(&prob, &[0.0; 6], 100_000).unwrap();
        assert!(j.converged, "seed {seed}: |grad| {}", j.grad_norm);
        assert!((j.value - exact).abs() <= 1e-10, "seed {seed}: {} vs {exact}", j.value);
    }
}

/// Mean-variance objective of one asset straight from the return column.
fn one_asset_objective(r: &[f64], x: f64) -> f64 {
    let m = r.len() as f64;
    let mean = r.iter().map(|v| v * x).sum::<f64>() / m;
    r.iter().map(|v| (v * x - mean).powi(2)).sum::<f64>() / m - mean
}

fn grid_and_polish(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 10_000;
    let h = (hi - lo) / n as f64;
    let best = (0..=n).map(|i| lo + h * i as f64).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let (mut a, mut b) = (best - h, best + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn one_asset_portfolio_matches_brute_force() {
    let mut rng = OracleRng::seed_from_u64(4);
    for _ in 0..5 {
        let r: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.5)).collect();
        let rows: Vec<Vec<f64>> = r.iter().map(|v| vec![*v]).collect();
        let prob = PortfolioProblem::new(PortfolioData::from_rows(&rows).unwrap());
        let j = compute_jstar(&prob, &[0.0], 100_000).unwrap();
        let brute = grid_and_polish(|x| one_asset_objective(&r, x), -50.0, 50.0);
        assert!((j.value - brute).abs() <= 1e-8, "{} vs {brute}", j.value);
    }
}

#[test]
fn disk_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let prob = QuadCompose::<f64>::random(3, 4, NoiseScales::none(), 1).unwrap();
    let first = JStarCache::with_dir(dir.path().to_path_buf())
        .get_or_compute("q", || compute_jstar(&prob, &[0.0; 3], 1000))
        .unwrap();
    let again = JStarCache::with_dir(dir.path().to_path_buf())
        .get_or_compute("q", || panic!("should hit the disk cache"))
        .unwrap();
    assert_eq!(first, again);
}
