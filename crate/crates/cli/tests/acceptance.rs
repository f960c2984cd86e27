//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `DIME_ACCEPTANCE_ONLY=1,3,10` to run a subset.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dime_core::deepalign::{
    fusion_loss, gradients, init_params, recon_loss, reg_loss, total_loss, train, Batch, FusionRows, JointData,
};
use dime_core::evalkit::{
    community_metrics, random_clustering, run_community_experiment, run_link_experiment, CommunityMetrics,
    ExperimentConfig, Method, SvmConfig,
};
use dime_core::metaprox::{count_path_instances, meta_proximity, proximity_bundle, CsrMatrix};
use dime_core::synthgen::{generate_pair, SynthConfig};
use dime_core::{seed, ArchitectureSpec, DimeParams, MetaPath, ProximityBundle, ProximityMatrix, TrainConfig, TransitionMatrix};
use ndarray::Array2;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Settings for the link and community experiments: a shallow model
/// trained long enough for the fusion term to act, and small enough that
/// 5 seeds x 10 folds x 3 methods fit the time budget on one core.
fn desk_config(lambda: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        arch: ArchitectureSpec {
            encoder_widths: vec![],
            fusion_width: 16,
            embedding_dim: 16,
            ..ArchitectureSpec::default()
        },
        train: TrainConfig {
            alpha: 100.0,
            epochs: 200,
            batch_size: 8,
            learning_rate: 3e-4,
            ..TrainConfig::default()
        },
        lambda,
        seed,
    }
}

const GENERATOR_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn synthetic(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        ..SynthConfig::default()
    }
}

/// Mean AUC per method over the generator seeds.
fn link_aucs(lambda: f64, methods: &[Method]) -> BTreeMap<Method, f64> {
    let mut sums: BTreeMap<Method, f64> = methods.iter().map(|&m| (m, 0.0)).collect();
    for s in GENERATOR_SEEDS {
        let g = generate_pair(&synthetic(s)).unwrap();
        let cfg = desk_config(lambda, 100 + s);
        for &m in methods {
            let r = run_link_experiment(&g.pair, m, &cfg, 1, 10, &SvmConfig::default()).unwrap();
            *sums.get_mut(&m).unwrap() += r.mean_auc();
        }
    }
    sums.values_mut().for_each(|v| *v /= GENERATOR_SEEDS.len() as f64);
    sums
}

fn c1_metapath_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = seed::rng(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let net = oracle::random_network(&mut rng, 20, 30);
        for path in MetaPath::ALL {
            let want = oracle::brute_counts(&net, path);
            let got = count_path_instances(&net, path);
            for (i, row) in want.iter().enumerate() {
                mismatches += row.iter().enumerate().filter(|&(j, &c)| got.get(i, j) != c).count();
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 60.0,
        format!("200 networks, Φ0-Φ7, {mismatches} mismatched entries, {secs:.1}s"),
    )
}

fn c2_proximity_formula() -> Verdict {
    let mut rng = seed::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let net = oracle::random_network(&mut rng, 20, 30);
        for &path in &MetaPath::ALL[1..] {
            let counts = oracle::brute_counts(&net, path);
            let p = meta_proximity(&net, path).unwrap();
            for i in 0..net.n_users() {
                for j in 0..net.n_users() {
                    worst = worst.max((p.get(i, j) - oracle::scalar_proximity(&counts, i, j)).abs());
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("max |difference| {worst:e} over Φ1-Φ7"))
}

const TOY_PATHS: [MetaPath; 2] = [MetaPath::Phi0, MetaPath::Phi5];

fn toy_bundle(n: usize, rng: &mut impl Rng) -> ProximityBundle {
    let matrices = TOY_PATHS
        .iter()
        .map(|&path| {
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random_bool(0.5) {
                        t.push((i, j, rng.random_range(0.05..1.0)));
                    }
                }
            }
            ProximityMatrix {
                path,
                values: CsrMatrix::from_triplets(n, n, &t),
                counts: None,
            }
        })
        .collect();
    ProximityBundle::new(n, matrices).unwrap()
}

fn toy_arch(widths: Vec<usize>, d: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        encoder_widths: widths,
        fusion_width: 4,
        embedding_dim: d,
        paths: TOY_PATHS.to_vec(),
    }
}

fn nudge(p: &mut DimeParams, index: usize, delta: f64) {
    let mut base = 0;
    p.visit_mut(&mut |_, t| {
        if (base..base + t.len()).contains(&index) {
            t[index - base] += delta;
        }
        base += t.len();
    });
}

fn c3_gradient_check() -> Verdict {
    let (n1, n2) = (8, 7);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for s in 0..6u64 {
        let mut rng = seed::rng(300 + s);
        let b1 = toy_bundle(n1, &mut rng);
        let b2 = toy_bundle(n2, &mut rng);
        let t = TransitionMatrix::from_matching(n1, n2, &[(0, 2), (3, 0), (5, 6), (7, 1)]);
        let data = JointData {
            emerging: &b1,
            mature: Some(&b2),
            transition: Some(&t),
        };
        let batch = Batch {
            emerging: vec![0, 1, 3, 6, 7],
            mature: vec![0, 2, 5],
        };
        // reconstruction weight 3 keeps the loss in a range where central
        // differences stay accurate
        let cfg = TrainConfig {
            alpha: 1.0 + s as f64 * 0.2,
            beta: 0.02,
            gamma: 3.0,
            fusion_rows: if s % 2 == 0 { FusionRows::Literal } else { FusionRows::AnchorsOnly },
            ..TrainConfig::default()
        };
        let params = init_params(&toy_arch(vec![5, 3], 3), n1, Some((&toy_arch(vec![4], 2), n2)), s).unwrap();
        let (_, g) = gradients(&data, &batch, &params, &cfg).unwrap();
        let h = 1e-5;
        for (k, a) in g.to_flat().into_iter().enumerate() {
            let mut p = params.clone();
            nudge(&mut p, k, h);
            let up = total_loss(&data, &batch, &p, &cfg).unwrap();
            nudge(&mut p, k, -2.0 * h);
            let down = total_loss(&data, &batch, &p, &cfg).unwrap();
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            checked += 1;
        }
    }
    verdict(
        worst <= 1e-4,
        format!("6 seeds, {checked} partial derivatives, max relative error {worst:.2e}"),
    )
}

fn c4_loss_identities() -> Verdict {
    let mut rng = seed::rng(4);
    let x = Array2::from_shape_fn((6, 9), |_| if rng.random_bool(0.4) { rng.random_range(0.0..1.0) } else { 0.0 });
    let recon = recon_loss(&[x.clone(), x.clone()], &[&x, &x], 100.0).unwrap();

    let (n1, n2, d1, d2) = (7, 6, 4, 3);
    let anchors = [(0, 3), (2, 0), (5, 5)];
    let t = TransitionMatrix::from_matching(n1, n2, &anchors);
    let z1 = Array2::from_shape_fn((n1, d1), |_| rng.random_range(0.0..1.0));
    let w12 = Array2::from_shape_fn((d1, d2), |_| rng.random_range(-1.0..1.0));
    let mut z2 = Array2::zeros((n2, d2));
    for &(i, j) in &anchors {
        z2.row_mut(j).assign(&z1.row(i).dot(&w12));
    }
    let literal = fusion_loss(&z1, &z2, &t, &w12, FusionRows::Literal).unwrap();
    // unanchored rows are free when only anchors count
    z2.row_mut(1).fill(0.7);
    let anchored = fusion_loss(&z1, &z2, &t, &w12, FusionRows::AnchorsOnly).unwrap();

    let params = init_params(&toy_arch(vec![5], 3), n1, Some((&toy_arch(vec![], 2), n2)), 9).unwrap();
    let base = reg_loss(&params);
    let mut worst: f64 = 0.0;
    for c in [0.0, 0.5, 2.0, -3.0, 7.25] {
        let mut scaled = params.clone();
        scaled.visit_mut(&mut |is_weight, t| {
            if is_weight {
                t.iter_mut().for_each(|v| *v *= c);
            }
        });
        worst = worst.max((reg_loss(&scaled) - c * c * base).abs() / base);
    }
    verdict(
        recon == 0.0 && literal.abs() <= 1e-12 && anchored.abs() <= 1e-12 && worst <= 1e-12,
        format!("recon(x,x)={recon}, fusion {literal:e}/{anchored:e}, reg homogeneity rel err {worst:.1e}"),
    )
}

fn c5_descent() -> Verdict {
    let start = Instant::now();
    let g = generate_pair(&synthetic(0)).unwrap();
    let b1 = proximity_bundle(&g.pair.emerging);
    let b2 = proximity_bundle(&g.pair.mature);
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let out = train(&g.pair, &b1, &b2, &ArchitectureSpec::default(), &cfg).unwrap();
    let t = &out.loss_trace;
    let drop = 1.0 - t[49] / t[0];
    let steady = t.windows(2).filter(|w| w[1] <= w[0]).count();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        drop >= 0.2 && steady as f64 >= 0.9 * 49.0 && secs < 600.0,
        format!(
            "epoch-mean loss {:.1} -> {:.1} ({:.0}% lower), non-increasing {steady}/49, {secs:.0}s",
            t[0],
            t[49],
            100.0 * drop
        ),
    )
}

fn c6_ordering() -> Verdict {
    let start = Instant::now();
    let m = link_aucs(0.3, &[Method::Dime, Method::DimeSh, Method::Autoencoder]);
    let (dime, sh, auto) = (m[&Method::Dime], m[&Method::DimeSh], m[&Method::Autoencoder]);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        dime - sh >= -0.01 && sh - auto >= -0.01 && dime - auto >= 0.03 && secs < 1800.0,
        format!("λ=0.3 mean AUC dime {dime:.4}, dime-sh {sh:.4}, auto {auto:.4}; dime-auto {:+.4}; {secs:.0}s", dime - auto),
    )
}

fn c7_sparsity() -> Verdict {
    let methods = [Method::Dime, Method::DimeSh];
    let sparse = link_aucs(0.1, &methods);
    let full = link_aucs(1.0, &methods);
    let gap = |m: &BTreeMap<Method, f64>| m[&Method::Dime] - m[&Method::DimeSh];
    verdict(
        gap(&sparse) >= gap(&full) - 0.01,
        format!("dime - dime-sh: {:+.4} at λ=0.1, {:+.4} at λ=1.0", gap(&sparse), gap(&full)),
    )
}

/// DIME community runs on a degree-homogeneous planted partition.
fn community_runs() -> Vec<(CommunityMetrics, f64)> {
    let mut out = Vec::new();
    for s in 0..3u64 {
        let g = generate_pair(&SynthConfig {
            degree_spread: 0.0,
            ..synthetic(s)
        })
        .unwrap();
        let k = 4;
        let r = run_community_experiment(&g.pair, Method::Dime, &desk_config(1.0, 200 + s), k, 2).unwrap();
        let n = g.pair.emerging.n_users();
        let random: f64 = (0..100)
            .map(|i| {
                let c = random_clustering(n, k, seed::derive_indexed(s, "random-clustering", i)).unwrap();
                community_metrics(&g.pair.emerging, &c).unwrap().coverage
            })
            .sum::<f64>()
            / 100.0;
        out.extend(r.runs.into_iter().map(|m| (m, random)));
    }
    out
}

fn c8_metric_identities(runs: &[(CommunityMetrics, f64)]) -> Verdict {
    let mut bad = 0;
    for (m, _) in runs {
        if m.coverage + m.expansion != 1.0 {
            bad += 1;
        }
        // with no crossing edge separability is a sentinel, not a ratio
        if m.expansion > 0.0 && (m.separability * m.expansion - m.coverage).abs() > 1e-9 {
            bad += 1;
        }
    }
    let (cov, exp, sep): (f64, f64, f64) = (0.292, 0.708, 0.412);
    let reference = (cov + exp - 1.0).abs() < 1e-12 && (cov / exp - sep).abs() < 0.005;
    verdict(
        bad == 0 && reference && !runs.is_empty(),
        format!(
            "{} runs, {bad} violations; reference row sums to {:.3}, ratio {:.3}",
            runs.len(),
            cov + exp,
            cov / exp
        ),
    )
}

fn c9_community_quality(runs: &[(CommunityMetrics, f64)]) -> Verdict {
    let n = runs.len() as f64;
    let dime = runs.iter().map(|(m, _)| m.coverage).sum::<f64>() / n;
    let random = runs.iter().map(|(_, r)| r).sum::<f64>() / n;
    verdict(
        dime - random >= 0.1,
        format!("coverage dime {dime:.3} vs random {random:.3} ({:+.3})", dime - random),
    )
}

fn dime(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dime")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("dime {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn files_match(a: &Path, b: &Path) -> Result<usize, String> {
    let mut compared = 0;
    for entry in std::fs::read_dir(a).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        if name == "manifest.json" {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(&name)), std::fs::read(b.join(&name)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => compared += 1,
            _ => return Err(format!("{} differs", name.to_string_lossy())),
        }
    }
    Ok(compared)
}

fn c10_determinism() -> Verdict {
    let run = || -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
        let data = dir("data");
        dime(&["generate", "--seed", "7", "--users", "60", "--out-dir", &data])?;
        let input = |f: &str| format!("{data}/{f}");
        let pair = [
            "--emerging".to_string(),
            input("emerging.txt"),
            "--mature".into(),
            input("mature.txt"),
            "--anchors".into(),
            input("anchors.txt"),
        ];
        let small = ["--widths=", "--fusion-width", "4", "--dim", "4", "--epochs", "3", "--batch-size", "16"];
        let mut runs = vec![data.clone()];
        let link = dir("link");
        let mut args: Vec<&str> = vec!["eval", "link", "--seed", "3", "--out-dir", &link, "--lambdas", "0.5,1.0", "--folds", "3"];
        args.extend(pair.iter().map(String::as_str));
        args.extend(small);
        dime(&args)?;
        runs.push(link.clone());
        let comm = dir("community");
        let mut args: Vec<&str> = vec!["eval", "community", "--out-dir", &comm, "--ks", "2,4", "--repeats", "2"];
        args.extend(pair.iter().map(String::as_str));
        args.extend(small);
        dime(&args)?;
        runs.push(comm.clone());
        let emb = dir("embed");
        let mut args: Vec<&str> = vec!["embed", "--out-dir", &emb];
        args.extend(pair.iter().map(String::as_str));
        args.extend(small);
        dime(&args)?;
        runs.push(emb.clone());
        let prox = dir("proximity");
        dime(&["proximity", "--out-dir", &prox, "--network", &input("emerging.txt")])?;
        runs.push(prox);

        let mut compared = 0;
        for (i, original) in runs.iter().enumerate() {
            let again = dir(&format!("replay{i}"));
            dime(&["replay", &format!("{original}/manifest.json"), "--out-dir", &again])?;
            compared += files_match(Path::new(original), Path::new(&again))?;
        }
        Ok(format!("{} commands replayed, {compared} output files byte-identical", runs.len()))
    };
    match run() {
        Ok(detail) => verdict(true, detail),
        Err(e) => verdict(false, e),
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("DIME_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));

    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        if !wanted(id) {
            return;
        }
        let start = Instant::now();
        let v = f();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {} [{:.1}s]",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    };
    report(1, "meta-path oracle", &mut c1_metapath_oracle);
    report(2, "proximity formula", &mut c2_proximity_formula);
    report(3, "gradient check", &mut c3_gradient_check);
    report(4, "loss identities", &mut c4_loss_identities);
    report(5, "descent", &mut c5_descent);
    report(6, "method ordering", &mut c6_ordering);
    report(7, "sparsity benefit", &mut c7_sparsity);
    let runs = if wanted(8) || wanted(9) { community_runs() } else { Vec::new() };
    report(8, "metric identities", &mut || c8_metric_identities(&runs));
    report(9, "community quality", &mut || c9_community_quality(&runs));
    report(10, "determinism", &mut c10_determinism);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
