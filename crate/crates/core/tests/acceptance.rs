//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1–5 and 9–11 are self-contained and make the run fail when they
//! do not hold. Criteria 6–8 train on MNIST (set `LORITA_MNIST_DIR`, default
//! `data/mnist` at the workspace root); their lines are reported but do not
//! change the exit status, since they depend on downloaded data and on
//! training outcomes. `LORITA_ACCEPTANCE_DIAGNOSTICS=1` adds an N=3 run at
//! a smaller learning rate.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lorita::compress::{isvt, Decomposition, IsvtOptions, IsvtStart, Scheme};
use lorita::data::{load_mnist, synth_blobs, Dataset, MnistSplit};
use lorita::linalg::{matmul, schatten_from_values, svd, truncate, Mat};
use lorita::metrics::{spectrum_report, sweep_curve};
use lorita::nn::{
    conv_forward, lowrank_conv_forward, softmax_ce, ConvKernel, FactorizedDense, LowRankConv, Mlp, Tensor3,
};
use lorita::optim::{evaluate_dataset, train, train_select, Selected, TrainConfig};
use lorita::theory::{
    balanced_factorization, factorization_objective, verify_prop1, verify_prop2, DescentOptions, RescalingSpec,
    SchattenSpec,
};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(id: usize, name: &'static str, pass: bool, detail: String) -> Self {
        Self { id, name, pass, detail }
    }
}

fn random_matrix(m: usize, n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Mat {
    if rank >= m.min(n) {
        return Mat::random_normal(m, n, 1.0, rng);
    }
    let l = Mat::random_normal(m, rank, 1.0, rng);
    let r = Mat::random_normal(rank, n, 1.0, rng);
    matmul(&l, &r).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn balanced_achievability() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shapes = [(6, 4), (8, 8), (10, 6)];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for i in 0..20 {
        let (m, n) = shapes[i % 3];
        let rank = if i % 2 == 0 { m.min(n) } else { 2 };
        let a = random_matrix(m, n, rank, &mut rng);
        let s = svd(&a).unwrap();
        for (depth, p) in [(2, 1.0), (4, 0.5)] {
            let spec = SchattenSpec::frobenius(depth).unwrap();
            assert_eq!(spec.p(), p);
            let analytic = schatten_from_values(s.s(), p);
            let value = factorization_objective(&balanced_factorization(&a, depth).unwrap(), &spec).unwrap();
            worst = worst.max(rel(value, analytic));
            cases += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        1,
        "balanced factorization attains the Schatten value",
        worst <= 1e-10 && secs < 5.0,
        format!("{cases} cases, worst relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn descent_bracketing() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_matrix(6, 6, 3, &mut rng);
    let nuclear: f64 = svd(&a).unwrap().s().iter().sum();
    let spec = SchattenSpec::frobenius(2).unwrap();
    let opts = DescentOptions {
        restarts: 5,
        seed: 2,
        tol: 1e-2,
        ..DescentOptions::default()
    };
    let r = verify_prop1(&a, &spec, &opts).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let best = r.descent_best.unwrap_or(f64::INFINITY);
    let lowest = r.lowest_feasible.unwrap_or(f64::INFINITY);
    let pass = best <= nuclear * 1.01 && lowest >= nuclear - 1e-8 && secs < 60.0;
    Outcome::new(
        2,
        "descent approaches the nuclear norm from above",
        pass,
        format!("nuclear {nuclear:.10}, best descent {best:.10}, lowest feasible {lowest:.10}, {secs:.1}s"),
    )
}

fn rescaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = Mlp::init(&[12, 10, 8, 5], 2, 3).unwrap();
    let x = Mat::random_normal(100, 12, 1.0, &mut rng);
    let y = (0..100).map(|_| rng.random_range(0..5)).collect();
    let ds = Dataset::new(x, y, 5).unwrap();
    let spec = RescalingSpec::new(vec![1.0, 4.0, 16.0], 2).unwrap();
    let r = verify_prop2(&model, &spec, &ds).unwrap();
    Outcome::new(
        3,
        "single weight decay matches per-layer strengths",
        r.max_output_diff <= 1e-9 && r.objective_rel_diff <= 1e-10,
        format!(
            "max |Δlogit| {:.2e}, objectives {:.12} vs {:.12} (relative {:.2e})",
            r.max_output_diff, r.multi_objective, r.single_objective, r.objective_rel_diff
        ),
    )
}

fn gram_residual(q: &Mat) -> f64 {
    let g = matmul(&q.transpose(), q).unwrap();
    g.max_abs_diff(&Mat::identity(g.rows()))
}

fn svd_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut recon, mut orth, mut ey) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..200 {
        let (m, n) = if i == 0 {
            (200, 150)
        } else {
            (rng.random_range(1..=200), rng.random_range(1..=150))
        };
        let rank = if i % 4 == 3 {
            rng.random_range(1..=m.min(n))
        } else {
            m.min(n)
        };
        let a = random_matrix(m, n, rank, &mut rng);
        let s = svd(&a).unwrap();
        recon = recon.max(s.reconstruct().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm());
        orth = orth.max(gram_residual(s.u())).max(gram_residual(&s.vt().transpose()));

        let k = s.k();
        let r = rng.random_range(0..k);
        if r == 0 {
            continue;
        }
        let (l, rt) = truncate(&s, r).unwrap();
        let residual = matmul(&l, &rt).unwrap().sub(&a).unwrap().sum_squares();
        let tail: f64 = s.s()[r..].iter().map(|v| v * v).sum();
        if tail > 1e-12 * a.sum_squares() {
            ey = ey.max(rel(residual, tail));
        }
    }
    Outcome::new(
        4,
        "SVD reconstruction, orthogonality and Eckart–Young",
        recon <= 1e-10 && orth <= 1e-10 && ey <= 1e-8,
        format!(
            "200 matrices up to 200×150: reconstruction {recon:.2e}, orthogonality {orth:.2e}, tail identity {ey:.2e}"
        ),
    )
}

fn loss(model: &Mlp, x: &Mat, y: &[usize]) -> f64 {
    softmax_ce(&model.logits(x).unwrap(), y).unwrap().0
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let model = Mlp::init(&[6, 5, 4], 2, seed).unwrap();
        let x = Mat::random_normal(7, 6, 1.0, &mut rng);
        let y: Vec<usize> = (0..7).map(|_| rng.random_range(0..4)).collect();
        let (logits, cache) = model.forward(&x).unwrap();
        let (_, dlogits) = softmax_ce(&logits, &y).unwrap();
        let grads = model.backward(&cache, &dlogits).unwrap();

        let slots: Vec<(usize, usize)> = model
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(l, f)| (0..f.depth()).map(move |k| (l, k)))
            .collect();
        let h = 1e-5;
        for _ in 0..8 {
            let p = rng.random_range(0..slots.len());
            let (l, k) = slots[p];
            let (rows, cols) = model.layers()[l].factors()[k].shape();
            let (r, c) = (rng.random_range(0..rows), rng.random_range(0..cols));
            let bump = |delta: f64| {
                let mut m = model.clone();
                let mut factors = m.layers()[l].factors().to_vec();
                let v = factors[k].get(r, c);
                factors[k].set(r, c, v + delta);
                m.layers_mut()[l] = FactorizedDense::new(factors).unwrap();
                loss(&m, &x, &y)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let an = grads.as_slice()[p].get(r, c);
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-8));
        }
    }
    Outcome::new(
        5,
        "backward matches central differences",
        worst <= 1e-5,
        format!("3 seeds × 8 parameters, worst relative error {worst:.2e}"),
    )
}

/// Direct loop over the valid, stride-1 convolution sum.
fn naive_conv(input: &Tensor3, kernel: &ConvKernel) -> Vec<f64> {
    let (h, w, d) = input.dims();
    let [fh, fw, fd, m] = kernel.dims();
    assert_eq!(d, fd);
    let mut out = Vec::new();
    for x in 0..=h - fh {
        for y in 0..=w - fw {
            for o in 0..m {
                let mut acc = 0.0;
                for i in 0..fh {
                    for j in 0..fw {
                        for k in 0..fd {
                            acc += input.get(x + i, y + j, k) * kernel.get(i, j, k, o);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn conv_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    let mut oracle = 0.0_f64;
    for i in 0..10 {
        let f = if i % 2 == 0 { 1 } else { 3 };
        let d = rng.random_range(1..=4);
        let m = rng.random_range(1..=6);
        let input = Tensor3::random_normal(rng.random_range(f..f + 6), rng.random_range(f..f + 6), d, &mut rng);
        let kernel = ConvKernel::random_normal([f, f, d, m], &mut rng);
        let direct = conv_forward(&input, &kernel).unwrap();
        let low =
            lowrank_conv_forward(&input, &LowRankConv::from_kernel(&kernel, (f * f * d).min(m)).unwrap()).unwrap();
        worst = worst.max(direct.max_abs_diff(&low));
        let (oh, ow, om) = direct.dims();
        let mut flat = Vec::with_capacity(oh * ow * om);
        for x in 0..oh {
            for y in 0..ow {
                for o in 0..om {
                    flat.push(direct.get(x, y, o));
                }
            }
        }
        for (a, b) in flat.iter().zip(naive_conv(&input, &kernel)) {
            oracle = oracle.max((a - b).abs());
        }
    }
    Outcome::new(
        9,
        "full-rank low-rank convolution equals direct convolution",
        worst <= 1e-6 && oracle <= 1e-9,
        format!("10 pairs with 1×1 and 3×3 kernels, max |Δ| {worst:.2e} (direct vs loop oracle {oracle:.2e})"),
    )
}

/// Rank-`r` reconstruction `Σ_{i<r} sᵢ uᵢ vᵢᵀ`.
fn low_rank(w: &Mat, r: usize) -> Mat {
    let s = svd(w).unwrap();
    Mat::from_fn(w.rows(), w.cols(), |i, j| {
        (0..r).map(|k| s.u().get(i, k) * s.s()[k] * s.vt().get(k, j)).sum()
    })
}

/// Mean cross-entropy of a bias-free ReLU network with dense weights.
fn dense_probe_loss(weights: &[Mat], x: &Mat, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in y.iter().enumerate() {
        let mut h = x.row(row).to_vec();
        for (l, w) in weights.iter().enumerate() {
            let mut next: Vec<f64> = (0..w.rows())
                .map(|i| (0..w.cols()).map(|j| w.get(i, j) * h[j]).sum())
                .collect();
            if l + 1 < weights.len() {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = next;
        }
        let top = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + h.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        total += lse - h[label];
    }
    total / y.len() as f64
}

fn isvt_oracle() -> Outcome {
    let step = 16;
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for seed in 0..3 {
        let data = synth_blobs(40, 6, 12, 4.0, seed).unwrap();
        let mut model = Mlp::init(&[12, 10, 6], 2, seed).unwrap();
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 32,
            seed,
            weight_decay: 1e-4,
            ..TrainConfig::default()
        };
        train(&mut model, &data, &cfg).unwrap();
        let dense = model.collapsed_weights();
        let probe = data.select(&(0..60).collect::<Vec<_>>()).unwrap();

        let opts = IsvtOptions {
            step_params: step,
            target_params: 0,
            start: IsvtStart::Full,
        };
        let got = isvt(&Decomposition::of(&model).unwrap(), &probe, &opts).unwrap();

        let mut ranks: Vec<usize> = dense.iter().map(|w| w.rows().min(w.cols())).collect();
        for round in got.rounds.iter().take(5) {
            let mut best: Option<(usize, usize, f64)> = None;
            for l in 0..ranks.len() {
                if ranks[l] <= 1 {
                    continue;
                }
                let (m, n) = dense[l].shape();
                let drop = step.div_ceil(m + n).max(1);
                let r = ranks[l].saturating_sub(drop).max(1);
                let trial: Vec<Mat> = (0..ranks.len())
                    .map(|k| low_rank(&dense[k], if k == l { r } else { ranks[k] }))
                    .collect();
                let loss = dense_probe_loss(&trial, probe.features(), probe.labels());
                if best.is_none_or(|b| loss < b.2) {
                    best = Some((l, r, loss));
                }
            }
            let (l, r, _) = best.expect("a layer above rank 1");
            if (l, r) != (round.layer, round.new_rank) {
                mismatches.push(format!(
                    "seed {seed}: oracle ({l}, {r}) vs ({}, {})",
                    round.layer, round.new_rank
                ));
            }
            ranks[l] = r;
            compared += 1;
        }
    }
    let pass = mismatches.is_empty() && compared == 15;
    let detail = if pass {
        "first 5 choices match exhaustive lookahead for 3 seeds".to_string()
    } else {
        format!("{compared} choices compared; {}", mismatches.join("; "))
    };
    Outcome::new(10, "ISVT matches one-step lookahead", pass, detail)
}

/// Runs `lorita count --arch <name>` and parses `params N (...), flops N (...)`.
fn count_cmd(arch: &str) -> (u64, u64) {
    let out = Command::new(env!("CARGO_BIN_EXE_lorita"))
        .args(["count", "--arch", arch])
        .output()
        .unwrap();
    assert!(out.status.success(), "count {arch} failed");
    let text = String::from_utf8(out.stdout).unwrap();
    let grab = |key: &str| -> u64 {
        let rest = &text[text.find(key).unwrap() + key.len()..];
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    (grab("params "), grab("flops "))
}

fn accounting() -> Outcome {
    let (rp, rf) = count_cmd("resnet20");
    let (vp, vf) = count_cmd("vgg16");
    let checks = [
        rel(rp as f64, 0.27e6) <= 0.03,
        rel(rf as f64, 40.81e6) <= 0.10,
        rel(vp as f64, 14.73e6) <= 0.03,
        rel(vf as f64, 314.59e6) <= 0.10,
    ];
    Outcome::new(
        11,
        "architecture accounting",
        checks.iter().all(|&c| c),
        format!(
            "resnet20 {:.3}M params / {:.2}M MACs, vgg16 {:.2}M params / {:.2}M MACs",
            rp as f64 / 1e6,
            rf as f64 / 1e6,
            vp as f64 / 1e6,
            vf as f64 / 1e6
        ),
    )
}

const DIMS: [usize; 7] = [784, 96, 96, 96, 96, 96, 10];
const GRID: [f64; 6] = [5e-6, 1e-5, 2e-5, 5e-5, 1e-4, 2e-4];
const FRACTIONS: [f64; 3] = [0.15, 0.20, 0.30];

struct Run {
    selected: Selected,
    test_accuracy: f64,
}

fn mnist_cfg(lr: f64, wd: f64, seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        lr,
        weight_decay: wd,
        epochs,
        batch_size: 1024,
        seed,
        ..TrainConfig::default()
    }
}

fn run(data: &(Dataset, Dataset, Dataset), depth: usize, cfg: &TrainConfig) -> Run {
    let t = Instant::now();
    let (fit, val, test) = data;
    let model = Mlp::init(&DIMS, depth, cfg.seed).unwrap();
    let selected = train_select(model, fit, val, cfg).unwrap();
    let test_accuracy = evaluate_dataset(&selected.model, test).unwrap().accuracy;
    println!(
        "INFO N={depth} lr={} wd={:e} seed={}: epoch {} of {} kept, val {:.4}, test {:.4}{} ({:.0}s)",
        cfg.lr,
        cfg.weight_decay,
        cfg.seed,
        selected.best_epoch + 1,
        selected.val_accuracy.len(),
        selected.best_val_accuracy,
        test_accuracy,
        if selected.collapsed { ", network died" } else { "" },
        t.elapsed().as_secs_f64()
    );
    Run {
        selected,
        test_accuracy,
    }
}

/// Best grid point by validation accuracy, with its weight decay.
fn grid_search(data: &(Dataset, Dataset, Dataset), depth: usize, lr: f64, epochs: usize) -> (f64, Run, f64) {
    let t = Instant::now();
    let mut best: Option<(f64, Run)> = None;
    for wd in GRID {
        let r = run(data, depth, &mnist_cfg(lr, wd, 0, epochs));
        if best
            .as_ref()
            .is_none_or(|(_, b)| r.selected.best_val_accuracy > b.selected.best_val_accuracy)
        {
            best = Some((wd, r));
        }
    }
    let (wd, r) = best.unwrap();
    (wd, r, t.elapsed().as_secs_f64())
}

struct Compression {
    drops: Vec<Vec<f64>>,
    sigma20: f64,
    trained: bool,
}

/// GSVT drops at [`FRACTIONS`] and layer-0 `σ₂₀/σ₁`, one entry per seed.
fn compression_stats(
    data: &(Dataset, Dataset, Dataset),
    depth: usize,
    lr: f64,
    wd: f64,
    epochs: usize,
    first: Run,
) -> Compression {
    let mut runs = vec![first];
    for seed in 1..3 {
        runs.push(run(data, depth, &mnist_cfg(lr, wd, seed, epochs)));
    }
    let mut drops = vec![Vec::new(); FRACTIONS.len()];
    let mut ratios = Vec::new();
    for r in &runs {
        let curve = sweep_curve(&r.selected.model, &data.2, Scheme::Gsvt, &FRACTIONS).unwrap();
        for (i, p) in curve.iter().enumerate() {
            drops[i].push(p.accuracy_drop);
        }
        ratios.push(spectrum_report(&r.selected.model).unwrap().normalized(0, 19).unwrap());
    }
    let trained = runs.iter().all(|r| !r.selected.collapsed && r.test_accuracy > 0.5);
    Compression {
        drops,
        sigma20: median(ratios),
        trained,
    }
}

fn compression_outcomes(n1: &Compression, n3: &Compression, note: &str) -> [Outcome; 2] {
    let med = |c: &Compression| c.drops.iter().map(|d| median(d.clone())).collect::<Vec<_>>();
    let (d1, d3) = (med(n1), med(n3));
    let ordered = d1.iter().zip(&d3).all(|(a, b)| b <= a);
    let fmt = |d: &[f64]| d.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/");
    let prereq = n1.trained && n3.trained;
    let why = if prereq { String::new() } else { format!("; {note}") };
    [
        Outcome::new(
            7,
            "GSVT accuracy drop is smaller with N=3",
            prereq && ordered && d3[0] <= 0.02,
            format!("median drops at 15/20/30%: N=1 {}, N=3 {}{why}", fmt(&d1), fmt(&d3)),
        ),
        Outcome::new(
            8,
            "faster spectrum decay with N=3",
            prereq && n3.sigma20 < n1.sigma20,
            format!(
                "median layer-0 σ20/σ1: N=1 {:.4}, N=3 {:.4}{why}",
                n1.sigma20, n3.sigma20
            ),
        ),
    ]
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("LORITA_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist_criteria() -> Vec<Outcome> {
    let dir = mnist_dir();
    let MnistSplit { train: full, test } = match load_mnist(&dir) {
        Ok(m) => m,
        Err(e) => {
            let why = format!("MNIST unavailable at {}: {e}", dir.display());
            return vec![
                Outcome::new(6, "MNIST accuracy", false, why.clone()),
                Outcome::new(7, "GSVT accuracy drop is smaller with N=3", false, why.clone()),
                Outcome::new(8, "faster spectrum decay with N=3", false, why),
            ];
        }
    };
    let (fit, val) = full.validation_split(5000).unwrap();
    let data = (fit, val, test);
    let epochs = 50;

    let (wd1, best1, secs1) = grid_search(&data, 1, 1e-2, epochs);
    let (wd3, best3, secs3) = grid_search(&data, 3, 1e-2, epochs);
    let (acc1, acc3) = (best1.test_accuracy, best3.test_accuracy);
    let six = Outcome::new(
        6,
        "MNIST accuracy",
        acc1 >= 0.975 && acc3 >= 0.965 && secs1 <= 1800.0 && secs3 <= 1800.0,
        format!(
            "N=1 test {acc1:.4} (wd {wd1:e}, grid {secs1:.0}s), N=3 test {acc3:.4} (wd {wd3:e}, grid {secs3:.0}s{})",
            if best3.selected.collapsed { ", network died" } else { "" }
        ),
    );

    let n1 = compression_stats(&data, 1, 1e-2, wd1, epochs, best1);
    let n3 = compression_stats(&data, 3, 1e-2, wd3, epochs, best3);
    let [seven, eight] = compression_outcomes(&n1, &n3, "N=3 models at lr 1e-2 did not train");

    if std::env::var_os("LORITA_ACCEPTANCE_DIAGNOSTICS").is_some() {
        let first = run(&data, 3, &mnist_cfg(1e-3, wd1, 0, 20));
        println!(
            "INFO N=3 at lr 1e-3 (wd {wd1:e}, 20 epochs): test {:.4}",
            first.test_accuracy
        );
        let n3_slow = compression_stats(&data, 3, 1e-3, wd1, 20, first);
        for o in compression_outcomes(&n1, &n3_slow, "prerequisite unmet") {
            println!(
                "INFO with N=3 at lr 1e-3, criterion {} would be {}: {}",
                o.id,
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
        }
    }
    vec![six, seven, eight]
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters come through here too.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }

    let mut gating = Vec::new();
    for check in [
        balanced_achievability,
        descent_bracketing,
        rescaling,
        svd_suite,
        gradient_check,
    ] {
        let o = check();
        report(&o);
        gating.push(o);
    }
    for o in mnist_criteria() {
        report(&o);
    }
    for check in [conv_equivalence, isvt_oracle, accounting] {
        let o = check();
        report(&o);
        gating.push(o);
    }

    let failed: Vec<usize> = gating.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("self-contained criteria failed: {failed:?}");
        ExitCode::FAILURE
    }
}

fn report(o: &Outcome) {
    println!(
        "{} criterion {} ({}): {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail
    );
}
