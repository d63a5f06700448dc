//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Oracles here are written independently of the library code paths they
//! check: direct double sums, nested-loop quadrature with analytic bumps,
//! exhaustive support search and plain least squares.

use std::time::Instant;

use mfid_core::convolution::ConvPlan;
use mfid_core::experiment::{run_cell, CellReport, ExperimentConfig};
use mfid_core::library::{desc, low_rank, tabulate_kernel, LOW_RANK_TOL};
use mfid_core::mstls::Mstls;
use mfid_core::prelude::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("MFID_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "convolution oracle", c01_convolution),
        (2, "assembly oracle", c02_assembly),
        (3, "MSTLS correctness", c03_mstls),
        (4, "histogram quadrature RMSE", c04_quadrature),
        (5, "QANR constant diffusivity", c05_qanr_const),
        (6, "N^-1/2 rate", c06_rate),
        (7, "extrinsic noise", c07_extrinsic),
        (8, "homogenization", c08_homogenization),
        (9, "critical logarithmic model", c09_log2d),
        (10, "identification walltime", c10_walltime),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:2}] {name}: {} ({:.1}s)", r.detail, t.elapsed().as_secs_f64());
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

// ---------------------------------------------------------------- 1

/// `h^d sum_{c'} k(c - c') u(c')` with the table indexed by offset.
fn direct_conv_1d(table: &[f64], u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| h * (0..n).map(|j| table[i + n - 1 - j] * u[j]).sum::<f64>())
        .collect()
}

fn direct_conv_2d(table: &[f64], u: &[f64], n0: usize, n1: usize, h: f64) -> Vec<f64> {
    let w = 2 * n1 - 1;
    let mut out = vec![0.0; n0 * n1];
    for a in 0..n0 {
        for b in 0..n1 {
            let mut s = 0.0;
            for ap in 0..n0 {
                for bp in 0..n1 {
                    s += table[(a + n0 - 1 - ap) * w + (b + n1 - 1 - bp)] * u[ap * n1 + bp];
                }
            }
            out[a * n1 + b] = h * h * s;
        }
    }
    out
}

fn c01_convolution() -> Outcome {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let g = Grid::new(vec![-1.0], 0.03, vec![64]).unwrap();
        let table: Vec<f64> = (0..127).map(|_| r.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..64).map(|_| r.gen_range(0.0..1.0)).collect();
        let fast = ConvPlan::new(&g).unwrap().convolve(&table, &[127], &u).unwrap();
        worst = worst.max(rel_l2(&fast, &direct_conv_1d(&table, &u, 0.03)));

        let g = Grid::new(vec![0.0, 0.0], 0.05, vec![32, 32]).unwrap();
        let table: Vec<f64> = (0..63 * 63).map(|_| r.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..1024).map(|_| r.gen_range(0.0..1.0)).collect();
        let fast = ConvPlan::new(&g).unwrap().convolve(&table, &[63, 63], &u).unwrap();
        worst = worst.max(rel_l2(&fast, &direct_conv_2d(&table, &u, 32, 32, 0.05)));
    }

    // rank-Q kernel against the dense table on the logarithmic library
    let lib = TrialLibrary::preset(Preset::Log2d);
    let g = Grid::new(vec![-3.0, -3.0], 6.0 / 128.0, vec![128, 128]).unwrap();
    let plan = ConvPlan::new(&g).unwrap();
    let u: Vec<f64> = (0..128 * 128).map(|_| r.gen_range(0.0..1.0)).collect();
    let mut worst_lr: f64 = 0.0;
    let mut max_rank = 0;
    for term in &lib.k_terms {
        let kt = tabulate_kernel(term, &g).unwrap();
        for part in &kt.partials {
            let dense = plan.convolve(part, &kt.shape, &u).unwrap();
            let lr = low_rank(part, kt.shape[0], kt.shape[1], LOW_RANK_TOL);
            max_rank = max_rank.max(lr.rank());
            let ks = plan.low_rank_spectrum(&lr).unwrap();
            let mut s = Default::default();
            let us = plan.field_spectrum(&u, &mut s).unwrap();
            let mut out = vec![0.0; u.len()];
            plan.apply(&ks, &us, &mut out, &mut s);
            worst_lr = worst_lr.max(rel_l2(&out, &dense));
        }
    }
    outcome(
        worst <= 1e-10 && worst_lr <= 1e-8,
        format!("FFT vs direct {worst:.2e} (tol 1e-10), rank<={max_rank} vs dense {worst_lr:.2e} (tol 1e-8)"),
    )
}

// ---------------------------------------------------------------- 2

/// `d^o/dv^o (1 - (v/a)^2)^p` on `|v| < a`.
fn bump(v: f64, a: f64, p: i32, o: usize) -> f64 {
    let u = v / a;
    let s = 1.0 - u * u;
    if s <= 0.0 {
        return 0.0;
    }
    let pf = p as f64;
    match o {
        0 => s.powi(p),
        1 => pf * s.powi(p - 1) * (-2.0 * u / a),
        _ => pf * (pf - 1.0) * s.powi(p - 2) * (2.0 * u / a).powi(2) + pf * s.powi(p - 1) * (-2.0 / (a * a)),
    }
}

/// Nested-loop quadrature of one entry of the 1D QANR system; `col = None`
/// gives `b`.
fn qanr_entry(u: &HistogramField, basis: &TestBasis, row: usize, col: Option<usize>) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let n = grid.counts()[0];
    let xs = grid.centers(0);
    let times = u.times();
    let dt = times[1] - times[0];
    let q = basis.queries.point(row);
    let sp = basis.params;
    let (ax, at) = (sp.m_x as f64 * h, sp.m_t as f64 * dt);
    let (xc, tc) = (xs[q.space[0]], times[q.time]);
    let (px, pt) = (sp.p_x as i32, sp.p_t as i32);
    let mut total = 0.0;
    for l in 0..times.len() {
        let w = if l == 0 || l + 1 == times.len() { 0.5 } else { 1.0 };
        let ul = u.slice(l);
        let ft = bump(times[l] - tc, at, pt, 0);
        for c in 0..n {
            let x = xs[c];
            let v = match col {
                None => bump(times[l] - tc, at, pt, 1) * bump(x - xc, ax, px, 0) * ul[c],
                Some(j) if j < 7 => {
                    // d/dx |x|^m = m |x|^(m-1) sign(x)
                    let m = (j + 1) as i32;
                    let conv: f64 = (0..n)
                        .map(|cp| {
                            let r = x - xs[cp];
                            let g = if r == 0.0 { 0.0 } else { m as f64 * r.abs().powi(m - 1) * r.signum() };
                            h * g * ul[cp]
                        })
                        .sum();
                    ft * bump(x - xc, ax, px, 1) * ul[c] * conv
                }
                Some(j) if j < 15 => {
                    let m = if j == 7 { 0 } else { (j - 6) as i32 };
                    ft * bump(x - xc, ax, px, 1) * ul[c] * x.powi(m)
                }
                Some(j) => {
                    let m = (j - 15) as i32;
                    -ft * bump(x - xc, ax, px, 2) * x.powi(m) * ul[c]
                }
            };
            total += w * v;
        }
    }
    total * dt * h
}

fn c02_assembly() -> Outcome {
    let preset = Preset::Qanr1d;
    let d = preset.sim_defaults();
    let cfg = SimConfig { dt_fine: d.dt_fine, subsample: d.subsample, seed: 202, particles: 500, experiments: 1, timepoints: 20 };
    let data = simulate(&builtin_model("qanr1d:const").unwrap(), &preset.initial_distribution(), &cfg).unwrap();
    let grid = build_domain(&data, 64, SpreadMode::PerDimension).unwrap();
    let u = mean_histogram(&data, &grid).unwrap();
    let basis = TestBasis::new(&grid, u.times(), preset.support_parameters()).unwrap();
    let lib = TrialLibrary::preset(preset);
    assert_eq!(lib.block_sizes(), (7, 8, 9));
    let sys = assemble(&u, &lib, &basis).unwrap();

    let mut r = rng(202);
    let (mut g_checked, mut b_checked, mut worst): (usize, usize, f64) = (0, 0, 0.0);
    let mut attempts = 0;
    while (g_checked < 30 || b_checked < 20) && attempts < 5000 {
        attempts += 1;
        let row = r.gen_range(0..sys.nrows());
        let col = if g_checked < 30 { Some(r.gen_range(0..sys.ncols())) } else { None };
        let got = match col {
            Some(j) => sys.g[(row, j)],
            None => sys.b[row],
        };
        let want = qanr_entry(&u, &basis, row, col);
        if want == 0.0 && got == 0.0 {
            continue;
        }
        worst = worst.max((got - want).abs() / want.abs());
        match col {
            Some(_) => g_checked += 1,
            None => b_checked += 1,
        }
    }
    outcome(
        g_checked >= 20 && b_checked >= 20 && worst <= 1e-8,
        format!("{g_checked} G and {b_checked} b entries of a {}x{} system, worst rel err {worst:.2e} (tol 1e-8)", sys.nrows(), sys.ncols()),
    )
}

// ---------------------------------------------------------------- 3

fn plain_ls(g: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> Vec<f64> {
    let sub = g.select_columns(support);
    let x = (sub.transpose() * &sub).cholesky().expect("full column rank").solve(&(sub.transpose() * b));
    let mut w = vec![0.0; g.ncols()];
    for (k, &i) in support.iter().enumerate() {
        w[i] = x[k];
    }
    w
}

/// Support minimizing `|G(w - w0)| / |G w0| + |S| / J` over all nonempty S.
fn brute_force_support(g: &DMatrix<f64>, b: &DVector<f64>) -> Vec<usize> {
    let j = g.ncols();
    let all: Vec<usize> = (0..j).collect();
    let w0 = DVector::from_vec(plain_ls(g, b, &all));
    let gw0 = (g * &w0).norm();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u32..(1 << j) {
        let s: Vec<usize> = (0..j).filter(|i| mask & (1 << i) != 0).collect();
        let w = DVector::from_vec(plain_ls(g, b, &s));
        let loss = (g * (w - &w0)).norm() / gw0 + s.len() as f64 / j as f64;
        if loss < best.0 {
            best = (loss, s);
        }
    }
    best.1
}

fn c03_mstls() -> Outcome {
    let mut r = rng(303);
    let gauss = |r: &mut ChaCha8Rng| -> f64 { r.sample(StandardNormal) };

    // lambda = 0 against an independent pseudoinverse
    let g = DMatrix::from_fn(200, 6, |_, _| gauss(&mut r));
    let b = DVector::from_fn(200, |_, _| gauss(&mut r));
    let pinv = g.clone().pseudo_inverse(1e-14).unwrap() * &b;
    let solver = Mstls::new(&g, &b).unwrap();
    let fit = solver.at(0.0).unwrap();
    let pinv_err = rel_l2(&fit.coeffs, pinv.as_slice());
    let exact = fit.coeffs == solver.pseudoinverse_solution();

    let lambdas = default_lambda_grid();
    let mut agree = 0;
    let total = 60;
    for _ in 0..total {
        let g = DMatrix::from_fn(200, 6, |_, _| gauss(&mut r));
        let k = r.gen_range(1..=4);
        let mut w = DVector::zeros(6);
        let mut picked = 0;
        while picked < k {
            let i = r.gen_range(0..6);
            if w[i] == 0.0 {
                let mag: f64 = r.gen_range(0.5..2.0);
                w[i] = if r.gen_bool(0.5) { mag } else { -mag };
                picked += 1;
            }
        }
        let clean = &g * &w;
        let scale = clean.norm() / (200f64).sqrt();
        let b = clean + DVector::from_fn(200, |_, _| 1e-3 * scale * gauss(&mut r));
        let sol = select_lambda(&g, &b, &lambdas).unwrap();
        if sol.support == brute_force_support(&g, &b) {
            agree += 1;
        }
    }
    let frac = agree as f64 / total as f64;
    outcome(
        exact && pinv_err < 1e-10 && frac >= 0.9,
        format!("lambda=0 vs pinv {pinv_err:.1e}; support matches brute force in {agree}/{total} (need 90%)"),
    )
}

// ---------------------------------------------------------------- 4

fn c04_quadrature() -> Outcome {
    // psi(x) = (1 - ((x - 0.3)/1.2)^2)^3, mu = N(0, 1)
    let (xc, a) = (0.3, 1.2);
    let psi = |x: f64| bump(x - xc, a, 3, 0);
    let npts = 200_000;
    let (lo, hi) = (xc - a, xc + a);
    let step = (hi - lo) / npts as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let exact: f64 = (0..npts).map(|i| {
        let x = lo + (i as f64 + 0.5) * step;
        psi(x) * density(x) * step
    }).sum();
    let c1 = (0..=npts).map(|i| psi(lo + i as f64 * step).abs()).fold(0.0, f64::max)
        + (0..=npts).map(|i| bump(lo + i as f64 * step - xc, a, 3, 1).abs()).fold(0.0, f64::max);

    let mut r = rng(404);
    let mut details = Vec::new();
    let mut pass = true;
    let mut worst_mid: f64 = 0.0;
    for (n, h) in [(1000usize, 0.05f64), (10_000, 0.02)] {
        let origin = -6.0;
        let cells = (12.0 / h).round() as usize;
        let grid = Grid::new(vec![origin], h, vec![cells]).unwrap();
        let mut se = 0.0;
        for _ in 0..200 {
            let y: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
            let u = histogram(&y, &grid).unwrap();
            let quad: f64 = (0..cells).map(|k| h * psi(grid.center(0, k)) * u[k]).sum();
            let mid: f64 = y
                .iter()
                .map(|&v| {
                    let k = ((v - origin) / h).floor();
                    if k < 0.0 || k >= cells as f64 {
                        0.0
                    } else {
                        psi(origin + (k + 0.5) * h)
                    }
                })
                .sum::<f64>()
                / n as f64;
            worst_mid = worst_mid.max((quad - mid).abs());
            se += (quad - exact).powi(2);
        }
        let rmse = (se / 200.0).sqrt();
        let bound = c1 * (0.5 * h + 1.0 / (n as f64).sqrt());
        pass &= rmse <= bound;
        details.push(format!("N={n} h={h}: RMSE {rmse:.2e} <= {bound:.2e}"));
    }
    pass &= worst_mid < 1e-13;
    outcome(pass, format!("{}; midpoint identity {worst_mid:.1e}", details.join(", ")))
}

// ---------------------------------------------------------------- 5-9

fn cell(preset: Preset, variant: &str, n: usize, m: usize, eps: f64, trials: usize, seed: u64) -> CellReport {
    let mut cfg = ExperimentConfig::for_preset(preset);
    cfg.experiment.trials = trials;
    cfg.experiment.seed = seed;
    cfg.sweep.variants = vec![variant.into()];
    cfg.sweep.particles = vec![n];
    cfg.sweep.experiments = vec![m];
    cfg.sweep.noise = vec![eps];
    let cfg = cfg.resolve().unwrap();
    let lib = TrialLibrary::preset(preset);
    let c = cfg.cells().remove(0);
    let report = run_cell(&cfg, &lib, &c, false).unwrap();
    assert!(!report.has_errors(), "{}: {:?}", report.label, report.trials.iter().find_map(|t| t.error.clone()));
    report
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c05_qanr_const() -> Outcome {
    let r = cell(Preset::Qanr1d, "const", 2000, 8, 0.0, 10, 5);
    let hits = r.trials.iter().filter(|t| t.tpr == Some(1.0)).count();
    let ok: Vec<_> = r.trials.iter().filter(|t| t.identified).collect();
    let ek = median(ok.iter().filter_map(|t| t.err_k).collect());
    let es = median(ok.iter().filter_map(|t| t.err_sigma).collect());
    outcome(
        hits >= 9 && ek < 0.015 && es < 0.015,
        format!(
            "N=2000 M=8: tpr=1 in {hits}/10 (need 9); median err K {:.2}%, sigma {:.2}% (need < 3%, and < 1.5% at NM=16000)",
            100.0 * ek,
            100.0 * es
        ),
    )
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c06_rate() -> Outcome {
    let mut pts = Vec::new();
    let mut parts = Vec::new();
    for n in [1000, 2000, 4000, 8000] {
        let r = cell(Preset::Qanr1d, "const", n, 1, 0.0, 10, 6);
        let errs: Vec<f64> = r.trials.iter().filter(|t| t.identified).filter_map(|t| t.err_k).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        parts.push(format!("{n}:{:.2}%", 100.0 * mean));
        pts.push((n as f64, mean));
    }
    let slope = loglog_slope(&pts);
    outcome(
        (-0.70..=-0.30).contains(&slope),
        format!("mean err K {} -> slope {slope:.3} (need [-0.70, -0.30])", parts.join(" ")),
    )
}

fn c07_extrinsic() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [0.01, 0.1] {
        let r = cell(Preset::Qanr1d, "zero", 2000, 1, eps, 10, 7);
        let good = r.trials.iter().filter(|t| t.tpr == Some(1.0) && t.err_k.is_some_and(|e| e < 0.01)).count();
        pass &= good >= 9;
        parts.push(format!("eps={eps}: tpr=1 & err K<1% in {good}/10"));
    }
    // nu is checked on trials whose drift is right, where diffusion is the
    // only spurious part of the model
    let eps = 0.316;
    let target = eps * eps / 2.0;
    let r = cell(Preset::Qanr1d, "zero", 2000, 1, eps, 10, 7);
    let drift_ok = r.trials.iter().filter(|t| t.tpr_drift == Some(1.0)).count();
    let nus: Vec<f64> = r
        .trials
        .iter()
        .filter(|t| t.tpr_drift == Some(1.0))
        .flat_map(|t| t.terms.iter().filter(|(d, _)| d.starts_with("S ")).map(|(_, w)| *w))
        .collect();
    let within = nus.iter().filter(|nu| ((*nu - target) / target).abs() < 0.5).count();
    pass &= drift_ok >= 8 && within == nus.len();
    let nu_txt = if nus.is_empty() {
        "no diffusion term".to_string()
    } else {
        let list: Vec<String> = nus.iter().map(|nu| format!("{nu:.3}")).collect();
        format!("nu [{}], {within}/{} within 50% of {target:.4}", list.join(" "), nus.len())
    };
    parts.push(format!("eps=0.316: tpr_drift=1 in {drift_ok}/10 (need 8), {nu_txt}"));
    outcome(pass, parts.join("; "))
}

/// `|D| / int_D 1/(1 + 0.95 cos(w x) cos(w y))` by the midpoint rule.
fn harmonic_mean_oracle(grid: &Grid, omega: f64) -> f64 {
    let k = 2000;
    let (x0, x1) = grid.bounds(0);
    let (y0, y1) = grid.bounds(1);
    let (hx, hy) = ((x1 - x0) / k as f64, (y1 - y0) / k as f64);
    let cy: Vec<f64> = (0..k).map(|j| (omega * (y0 + (j as f64 + 0.5) * hy)).cos()).collect();
    let mut s = 0.0;
    for i in 0..k {
        let cx = (omega * (x0 + (i as f64 + 0.5) * hx)).cos();
        s += cy.iter().map(|c| 1.0 / (1.0 + 0.95 * cx * c)).sum::<f64>();
    }
    (k * k) as f64 / s
}

fn c08_homogenization() -> Outcome {
    let preset = Preset::Cos2d;
    let d = preset.sim_defaults();
    let lib = TrialLibrary::preset(preset);
    let constant = desc::s_lap_cos(0, 0);
    let model = builtin_model("cos2d:w20").unwrap();
    let mut wins = 0;
    let mut parts = Vec::new();
    for run in 0..3u64 {
        let cfg = SimConfig { dt_fine: d.dt_fine, subsample: d.subsample, seed: 800 + run, particles: 16_384, experiments: 1, timepoints: d.timepoints };
        let data = simulate(&model, &preset.initial_distribution(), &cfg).unwrap();
        let fit = identify(&data, &lib, &IdentifyOptions::for_preset(preset)).unwrap();
        let terms = fit.terms(&lib);
        let diffusion: Vec<&(String, f64)> = terms.iter().filter(|(d, _)| d.starts_with("S ")).collect();
        let homogenized_form = diffusion.len() == 1 && diffusion[0].0 == constant && !terms.iter().any(|(d, _)| d.starts_with("K "));
        let bar = harmonic_mean_oracle(&fit.grid, 20.0);
        let nu = diffusion.iter().find(|(d, _)| *d == constant).map_or(0.0, |t| t.1);
        let rel = ((2.0 * nu.max(0.0)).sqrt() - (2.0 * bar).sqrt()).abs() / (2.0 * bar).sqrt();
        if homogenized_form && rel < 0.05 {
            wins += 1;
        }
        parts.push(format!("{}{:.2}%", if homogenized_form { "" } else { "wrong form, " }, 100.0 * rel));
    }
    let r = cell(preset, "w1", 16_384, 1, 0.0, 10, 8);
    let full = r.trials.iter().filter(|t| t.tpr == Some(1.0)).count();
    outcome(
        wins >= 2 && full >= 8,
        format!("w=20: sigma vs sqrt(2 wbar) [{}], {wins}/3 within 5% (majority); w=1: tpr=1 in {full}/10 (need 8)", parts.join(", ")),
    )
}

fn c09_log2d() -> Outcome {
    let r = cell(Preset::Log2d, "critical", 2000, 8, 0.0, 10, 9);
    let tprs: Vec<f64> = r.trials.iter().filter_map(|t| t.tpr).collect();
    let mean = tprs.iter().sum::<f64>() / tprs.len() as f64;
    outcome(mean >= 0.95, format!("N=2000 M=8: mean tpr {mean:.3} over {} trials (need >= 0.95)", tprs.len()))
}

fn c10_walltime() -> Outcome {
    let preset = Preset::Qanr1d;
    let d = preset.sim_defaults();
    let cfg = SimConfig { dt_fine: d.dt_fine, subsample: d.subsample, seed: 10, particles: 8000, experiments: 8, timepoints: d.timepoints };
    let data = simulate(&builtin_model("qanr1d:const").unwrap(), &preset.initial_distribution(), &cfg).unwrap();
    let lib = TrialLibrary::preset(preset);
    let t = Instant::now();
    let fit = identify(&data, &lib, &IdentifyOptions::for_preset(preset)).unwrap();
    let wall = t.elapsed().as_secs_f64();
    outcome(
        wall < 60.0,
        format!(
            "64,000 particles: {wall:.2}s (histogram {:.3}s, assembly {:.3}s, regression {:.3}s; need < 60s)",
            fit.times.histogram, fit.times.assembly, fit.times.regression
        ),
    )
}
