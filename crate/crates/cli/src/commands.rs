//! The subcommands, each driven entirely by a resolved key table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dime_core::deepalign::checkpoint::write_checkpoint;
use dime_core::deepalign::{embed_single, train, FusionRows, TrainOutput};
use dime_core::evalkit::{run_community_experiment, run_link_experiment, ExperimentConfig, MeanStd, Method, SvmConfig};
use dime_core::metaprox::persist::{read_bundle, write_bundle};
use dime_core::metaprox::{proximity_bundle_for, ProximityOptions};
use dime_core::netcore::io::{load_anchors, load_network, serialize_anchors, write_network};
use dime_core::netcore::TimeBucketing;
use dime_core::synthgen::{generate_pair, SynthConfig};
use dime_core::{seed, AlignedPair, ArchitectureSpec, HeterogeneousNetwork, MetaPath, ProximityBundle, TrainConfig};

use crate::config::Resolved;
use crate::manifest::{file_digest, InputFile, Manifest, Timings, FORMAT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmd {
    Generate,
    Proximity,
    Embed,
    EvalLink,
    EvalCommunity,
}

impl Cmd {
    pub fn name(self) -> &'static str {
        match self {
            Cmd::Generate => "generate",
            Cmd::Proximity => "proximity",
            Cmd::Embed => "embed",
            Cmd::EvalLink => "eval link",
            Cmd::EvalCommunity => "eval community",
        }
    }

    pub fn from_name(name: &str) -> Result<Cmd> {
        [Cmd::Generate, Cmd::Proximity, Cmd::Embed, Cmd::EvalLink, Cmd::EvalCommunity]
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| anyhow!("manifest names unknown command `{name}`"))
    }

    pub fn keys(self) -> Vec<(&'static str, String)> {
        let mut keys = vec![("seed", "0".to_string())];
        match self {
            Cmd::Generate => keys.extend(generator_keys()),
            Cmd::Proximity => {
                keys.push(("network", String::new()));
                keys.push(("paths", all_paths()));
            }
            Cmd::Embed => {
                keys.extend(pair_keys());
                keys.push(("emerging_bundle", String::new()));
                keys.push(("mature_bundle", String::new()));
                keys.push(("mode", "dime".into()));
                keys.extend(training_keys());
            }
            Cmd::EvalLink => {
                keys.extend(pair_keys());
                keys.push(("methods", "dime,dime-sh,auto".into()));
                keys.push(("lambdas", "0.3".into()));
                keys.push(("thetas", "1".into()));
                keys.push(("folds", "10".into()));
                let svm = SvmConfig::default();
                keys.push(("svm_lambda", format!("{:?}", svm.lambda)));
                keys.push(("svm_passes", svm.passes.to_string()));
                keys.extend(training_keys());
            }
            Cmd::EvalCommunity => {
                keys.extend(pair_keys());
                keys.push(("methods", "dime,dime-sh,auto".into()));
                keys.push(("lambdas", "1.0".into()));
                keys.push(("ks", "4".into()));
                keys.push(("repeats", "5".into()));
                keys.extend(training_keys());
            }
        }
        keys
    }

    /// Keys naming input files, digested into the manifest.
    fn input_keys(self) -> &'static [&'static str] {
        match self {
            Cmd::Generate => &[],
            Cmd::Proximity => &["network"],
            Cmd::Embed => &["emerging", "mature", "anchors", "emerging_bundle", "mature_bundle"],
            Cmd::EvalLink | Cmd::EvalCommunity => &["emerging", "mature", "anchors"],
        }
    }
}

fn all_paths() -> String {
    MetaPath::ALL.iter().map(|p| p.id().to_string()).collect::<Vec<_>>().join(",")
}

fn generator_keys() -> Vec<(&'static str, String)> {
    let d = SynthConfig::default();
    vec![
        ("users", d.n_users.to_string()),
        ("communities", d.n_communities.to_string()),
        ("p_intra", format!("{:?}", d.p_intra)),
        ("p_inter", format!("{:?}", d.p_inter)),
        ("size_ratio", format!("{:?}", d.size_ratio)),
        ("degree_spread", format!("{:?}", d.degree_spread)),
        ("posts_per_user", format!("{:?}", d.posts_per_user)),
        ("vocab_size", d.vocab_size.to_string()),
        ("words_per_post", d.words_per_post.to_string()),
        ("locations", d.n_locations.to_string()),
        ("attr_skew", format!("{:?}", d.attr_skew)),
        ("anchor_fraction", format!("{:?}", d.anchor_fraction)),
        ("emergence", format!("{:?}", d.emergence)),
    ]
}

fn pair_keys() -> Vec<(&'static str, String)> {
    vec![("emerging", String::new()), ("mature", String::new()), ("anchors", String::new())]
}

fn training_keys() -> Vec<(&'static str, String)> {
    let a = ArchitectureSpec::default();
    let t = TrainConfig::default();
    let join = |v: &[usize]| v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
    vec![
        ("paths", all_paths()),
        ("widths", join(&a.encoder_widths)),
        ("fusion_width", a.fusion_width.to_string()),
        ("dim", a.embedding_dim.to_string()),
        ("alpha", format!("{:?}", t.alpha)),
        ("beta", format!("{:?}", t.beta)),
        ("gamma", format!("{:?}", t.gamma)),
        ("epochs", t.epochs.to_string()),
        ("batch_size", t.batch_size.to_string()),
        ("learning_rate", format!("{:?}", t.learning_rate)),
    ]
}

/// What a command reports back for its manifest.
#[derive(Default)]
struct Record {
    outputs: Vec<String>,
    stage_seeds: BTreeMap<String, u64>,
}

/// Runs `cmd` with a fully resolved configuration, writing its outputs and
/// manifest into `out_dir`.
pub fn execute(
    cmd: Cmd,
    cfg: &mut Resolved,
    out_dir: &Path,
    argv: Vec<String>,
    threads: usize,
) -> Result<Manifest> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut inputs = BTreeMap::new();
    for &key in cmd.input_keys() {
        if let Some(path) = cfg.optional(key).map(str::to_owned) {
            let abs = fs::canonicalize(&path).with_context(|| format!("input `{key}`: {path}"))?;
            let shown = abs.to_string_lossy().into_owned();
            inputs.insert(
                key.to_owned(),
                InputFile {
                    path: shown.clone(),
                    sha256: file_digest(&abs)?,
                },
            );
            cfg.set(key, shown);
        }
    }
    let base_seed: u64 = cfg.get("seed")?;
    let mut timings = Timings::default();
    let record = match cmd {
        Cmd::Generate => generate(cfg, out_dir, base_seed, &mut timings)?,
        Cmd::Proximity => proximity(cfg, out_dir, &mut timings)?,
        Cmd::Embed => embed(cfg, out_dir, base_seed, &mut timings)?,
        Cmd::EvalLink => eval_link(cfg, out_dir, base_seed, &mut timings)?,
        Cmd::EvalCommunity => eval_community(cfg, out_dir, base_seed, &mut timings)?,
    };
    let mut outputs = BTreeMap::new();
    for name in record.outputs {
        outputs.insert(name.clone(), file_digest(&out_dir.join(&name))?);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        command: cmd.name().to_owned(),
        argv,
        seed: base_seed,
        config: cfg.map().clone(),
        stage_seeds: record.stage_seeds,
        inputs,
        outputs,
        timings_secs: timings.into_map(),
        threads,
    };
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Re-runs the command recorded in `manifest_path` into `out_dir` and checks
/// that every recorded output is reproduced byte for byte.
pub fn replay(manifest_path: &Path, out_dir: &Path, argv: Vec<String>, threads: usize) -> Result<Manifest> {
    let old = Manifest::read(manifest_path)?;
    let cmd = Cmd::from_name(&old.command)?;
    for (key, input) in &old.inputs {
        let now = file_digest(Path::new(&input.path)).with_context(|| format!("input `{key}`"))?;
        if now != input.sha256 {
            bail!("input `{key}` ({}) changed since the manifest was written", input.path);
        }
    }
    let mut cfg = Resolved::from_map(old.config.clone());
    let new = execute(cmd, &mut cfg, out_dir, argv, threads)?;
    let differing: Vec<&String> = old
        .outputs
        .iter()
        .filter(|(name, digest)| new.outputs.get(*name) != Some(*digest))
        .map(|(name, _)| name)
        .collect();
    if !differing.is_empty() || new.outputs.len() != old.outputs.len() {
        bail!("replay did not reproduce: {differing:?}");
    }
    Ok(new)
}

pub fn resolve(
    cmd: Cmd,
    config_file: Option<&Path>,
    seed: Option<u64>,
    flags: Vec<(&'static str, Option<String>)>,
) -> Result<Resolved> {
    let mut flags = flags;
    flags.push(("seed", seed.map(|s| s.to_string())));
    let table = cmd.keys();
    // a generator config file describes the whole synthetic pair
    let mandatory: Vec<&str> = match cmd {
        Cmd::Generate => table.iter().map(|(k, _)| *k).filter(|&k| k != "seed").collect(),
        _ => Vec::new(),
    };
    Resolved::build(&table, config_file, &mandatory, &flags)
}

fn write_text(out_dir: &Path, name: &str, text: &str, record: &mut Record) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    record.outputs.push(name.to_owned());
    Ok(())
}

fn generate(cfg: &Resolved, out: &Path, base: u64, t: &mut Timings) -> Result<Record> {
    let seed = seed::derive_seed(base, "generate");
    let sc = SynthConfig {
        n_users: cfg.get("users")?,
        n_communities: cfg.get("communities")?,
        p_intra: cfg.get("p_intra")?,
        p_inter: cfg.get("p_inter")?,
        size_ratio: cfg.get("size_ratio")?,
        degree_spread: cfg.get("degree_spread")?,
        posts_per_user: cfg.get("posts_per_user")?,
        vocab_size: cfg.get("vocab_size")?,
        words_per_post: cfg.get("words_per_post")?,
        n_locations: cfg.get("locations")?,
        attr_skew: cfg.get("attr_skew")?,
        anchor_fraction: cfg.get("anchor_fraction")?,
        emergence: cfg.get("emergence")?,
        seed,
    };
    let g = t.time("generate", || generate_pair(&sc))?;
    let mut rec = Record::default();
    rec.stage_seeds.insert("generate".into(), seed);
    t.time("write", || -> Result<()> {
        write_network(&g.pair.emerging, out.join("emerging.txt"))?;
        write_network(&g.pair.mature, out.join("mature.txt"))?;
        rec.outputs.extend(["emerging.txt".to_owned(), "mature.txt".to_owned()]);
        write_text(out, "anchors.txt", &serialize_anchors(&g.pair), &mut rec)?;
        write_text(out, "labels.csv", &g.labels_csv(), &mut rec)
    })?;
    Ok(rec)
}

fn parse_paths(cfg: &Resolved) -> Result<Vec<MetaPath>> {
    let ids: Vec<u8> = cfg.list("paths")?;
    if ids.is_empty() {
        bail!("config key `paths` lists no meta paths");
    }
    let mut paths = ids
        .into_iter()
        .map(|i| MetaPath::from_id(i).ok_or_else(|| anyhow!("config key `paths`: no meta path {i}")))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    paths.dedup();
    Ok(paths)
}

fn load(path: &str) -> Result<HeterogeneousNetwork> {
    load_network(path, TimeBucketing::HourOfWeek).with_context(|| format!("loading {path}"))
}

fn proximity(cfg: &Resolved, out: &Path, t: &mut Timings) -> Result<Record> {
    let net = t.time("load", || load(cfg.required("network")?))?;
    let paths = parse_paths(cfg)?;
    let bundle = t.time("proximity", || proximity_bundle_for(&net, &paths, &ProximityOptions::default()));
    let mut rec = Record::default();
    t.time("write", || -> Result<()> {
        let file = File::create(out.join("bundle.bin"))?;
        write_bundle(&bundle, BufWriter::new(file))?;
        rec.outputs.push("bundle.bin".into());
        Ok(())
    })?;
    Ok(rec)
}

fn architecture(cfg: &Resolved, paths: Vec<MetaPath>) -> Result<ArchitectureSpec> {
    Ok(ArchitectureSpec {
        encoder_widths: cfg.list("widths")?,
        fusion_width: cfg.get("fusion_width")?,
        embedding_dim: cfg.get("dim")?,
        paths,
    })
}

fn train_config(cfg: &Resolved, seed: u64) -> Result<TrainConfig> {
    Ok(TrainConfig {
        alpha: cfg.get("alpha")?,
        beta: cfg.get("beta")?,
        gamma: cfg.get("gamma")?,
        epochs: cfg.get("epochs")?,
        batch_size: cfg.get("batch_size")?,
        learning_rate: cfg.get("learning_rate")?,
        seed,
        fusion_rows: FusionRows::Literal,
    })
}

fn load_pair(cfg: &Resolved) -> Result<AlignedPair> {
    let emerging = load(cfg.required("emerging")?)?;
    let mature = load(cfg.required("mature")?)?;
    let anchors = cfg.required("anchors")?;
    load_anchors(anchors, emerging, mature).with_context(|| format!("loading {anchors}"))
}

fn bundle_for(cfg: &Resolved, key: &str, net: &HeterogeneousNetwork, paths: &[MetaPath]) -> Result<ProximityBundle> {
    match cfg.optional(key) {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {path}"))?;
            let bundle = read_bundle(std::io::BufReader::new(file)).with_context(|| format!("reading {path}"))?;
            if bundle.n_users() != net.n_users() {
                bail!(
                    "bundle {path} covers {} users, network has {}",
                    bundle.n_users(),
                    net.n_users()
                );
            }
            Ok(bundle.select(paths)?)
        }
        None => Ok(proximity_bundle_for(net, paths, &ProximityOptions::default())),
    }
}

fn embed(cfg: &Resolved, out: &Path, base: u64, t: &mut Timings) -> Result<Record> {
    let method: Method = cfg.get("mode")?;
    let paths = match method {
        Method::Autoencoder => vec![MetaPath::Phi0],
        _ => parse_paths(cfg)?,
    };
    let arch = architecture(cfg, paths.clone())?;
    let seed = seed::derive_seed(base, "embed");
    let mut tc = train_config(cfg, seed)?;
    let mut rec = Record::default();
    rec.stage_seeds.insert("embed".into(), seed);

    let output: TrainOutput = match method {
        Method::DimeSh | Method::Autoencoder => {
            let net = t.time("load", || load(cfg.required("emerging")?))?;
            let b = t.time("proximity", || bundle_for(cfg, "emerging_bundle", &net, &paths))?;
            t.time("train", || embed_single(&net, &b, &arch, &tc))?
        }
        Method::Dime | Method::DimeAnchorsOnly => {
            if method == Method::DimeAnchorsOnly {
                tc.fusion_rows = FusionRows::AnchorsOnly;
            }
            let pair = t.time("load", || load_pair(cfg))?;
            let (b1, b2) = t.time("proximity", || -> Result<_> {
                Ok((
                    bundle_for(cfg, "emerging_bundle", &pair.emerging, &paths)?,
                    bundle_for(cfg, "mature_bundle", &pair.mature, &paths)?,
                ))
            })?;
            t.time("train", || train(&pair, &b1, &b2, &arch, &tc))?
        }
    };

    t.time("write", || -> Result<()> {
        let csv = |e: &dime_core::EmbeddingMatrix| -> Result<String> {
            let mut buf = Vec::new();
            e.write_csv(&mut buf)?;
            Ok(String::from_utf8(buf)?)
        };
        write_text(out, "embeddings.csv", &csv(&output.emerging)?, &mut rec)?;
        if let Some(m) = &output.mature {
            write_text(out, "mature_embeddings.csv", &csv(m)?, &mut rec)?;
        }
        let mut trace = String::from("epoch,loss,full_loss\n");
        for (i, (a, b)) in output.loss_trace.iter().zip(&output.full_loss_trace).enumerate() {
            writeln!(trace, "{},{a:?},{b:?}", i + 1)?;
        }
        write_text(out, "loss_trace.csv", &trace, &mut rec)?;
        let mut ckpt = Vec::new();
        write_checkpoint(&output.params, &mut ckpt)?;
        fs::write(out.join("checkpoint.bin"), ckpt)?;
        rec.outputs.push("checkpoint.bin".into());
        Ok(())
    })?;
    Ok(rec)
}

const METRIC_HEADER: &str = "method,metric,lambda,theta_or_k,mean,std,n_runs\n";

fn metric_row(out: &mut String, method: Method, metric: &str, lambda: f64, grid: usize, m: MeanStd) {
    let _ = writeln!(out, "{method},{metric},{lambda},{grid},{},{},{}", m.mean, m.std, m.n);
}

fn experiment_setup(cfg: &Resolved) -> Result<(AlignedPair, Vec<Method>, Vec<f64>, ArchitectureSpec, TrainConfig)> {
    let pair = load_pair(cfg)?;
    let methods: Vec<Method> = cfg.list("methods")?;
    let lambdas: Vec<f64> = cfg.list("lambdas")?;
    if methods.is_empty() || lambdas.is_empty() {
        bail!("config keys `methods` and `lambdas` must be non-empty");
    }
    let arch = architecture(cfg, parse_paths(cfg)?)?;
    // per-run seeds are set by the drivers
    let tc = train_config(cfg, 0)?;
    Ok((pair, methods, lambdas, arch, tc))
}

fn eval_link(cfg: &Resolved, out: &Path, base: u64, t: &mut Timings) -> Result<Record> {
    let (pair, methods, lambdas, arch, tc) = t.time("load", || experiment_setup(cfg))?;
    let thetas: Vec<usize> = cfg.list("thetas")?;
    let folds: usize = cfg.get("folds")?;
    let svm = SvmConfig {
        lambda: cfg.get("svm_lambda")?,
        passes: cfg.get("svm_passes")?,
        ..SvmConfig::default()
    };
    let mut rec = Record::default();
    let mut csv = String::from(METRIC_HEADER);
    let mut grid = 0;
    for &lambda in &lambdas {
        for &theta in &thetas {
            // every method sees the same folds and negatives
            let seed = seed::derive_indexed(base, "eval/link", grid);
            rec.stage_seeds.insert(format!("eval/link/lambda={lambda}/theta={theta}"), seed);
            grid += 1;
            let exp = ExperimentConfig {
                arch: arch.clone(),
                train: tc.clone(),
                lambda,
                seed,
            };
            for &method in &methods {
                let r = t.time(&format!("{method}"), || run_link_experiment(&pair, method, &exp, theta, folds, &svm))?;
                for (metric, m) in r.summary() {
                    metric_row(&mut csv, method, metric, lambda, theta, m);
                }
            }
        }
    }
    write_text(out, "link_metrics.csv", &csv, &mut rec)?;
    Ok(rec)
}

fn eval_community(cfg: &Resolved, out: &Path, base: u64, t: &mut Timings) -> Result<Record> {
    let (pair, methods, lambdas, arch, tc) = t.time("load", || experiment_setup(cfg))?;
    let ks: Vec<usize> = cfg.list("ks")?;
    let repeats: usize = cfg.get("repeats")?;
    let mut rec = Record::default();
    let mut csv = String::from(METRIC_HEADER);
    let mut grid = 0;
    for &lambda in &lambdas {
        for &k in &ks {
            let seed = seed::derive_indexed(base, "eval/community", grid);
            rec.stage_seeds.insert(format!("eval/community/lambda={lambda}/k={k}"), seed);
            grid += 1;
            let exp = ExperimentConfig {
                arch: arch.clone(),
                train: tc.clone(),
                lambda,
                seed,
            };
            for &method in &methods {
                let r = t.time(&format!("{method}"), || run_community_experiment(&pair, method, &exp, k, repeats))?;
                for (metric, m) in r.summary() {
                    metric_row(&mut csv, method, metric, lambda, k, m);
                }
            }
        }
    }
    write_text(out, "community_metrics.csv", &csv, &mut rec)?;
    Ok(rec)
}
