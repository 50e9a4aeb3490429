use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use tagforge::evaluation::{default_rho_grid, DEFAULT_SPLIT_FRACTION, DEFAULT_TOP_V};
use tagforge::report::{read_sweep_csv, write_figure_data, write_sweep_csv};
use tagforge::{
    dataset_stats, load_annotations, load_tmn_distribution, make_split_with_fraction, run_sweep, synthesize,
    CategorySet, Error, Folksonomy, ForgeryConfig, PoolMode, PopulationMode, Profile, Result, Strategy, SweepConfig,
};

use crate::config::{ConfigFile, Pool, RhoGrid, StrategyList, SynthArg, TopList};
use crate::{IngestArgs, ReportArgs, SweepArgs, SynthArgs};

pub const DEFAULT_SEED: u64 = 42;
pub const STATS_FILE: &str = "stats.json";
pub const ANNOTATIONS_FILE: &str = "annotations.tsv";
pub const CATEGORIES_FILE: &str = "categories.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PER_USER_FILE: &str = "per_user.jsonl";

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    path.map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn parse_flag<T: FromStr<Err = Error>>(value: Option<String>) -> Result<Option<T>> {
    value.map(|v| v.parse()).transpose()
}

fn out_dir(cfg: &ConfigFile, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = cfg.pick(flag, "out")?.unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn progress(verbose: bool, message: impl AsRef<str>) {
    if verbose {
        println!("{}", message.as_ref());
    }
}

pub fn ingest(args: IngestArgs, verbose: bool) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let data: PathBuf = cfg
        .pick(args.data, "data")?
        .ok_or_else(|| Error::Config("ingest needs --data".into()))?;
    let categories: PathBuf = cfg
        .pick(args.categories, "categories")?
        .ok_or_else(|| Error::Config("ingest needs --categories".into()))?;
    let cats = Arc::new(CategorySet::load(&categories)?);
    let f = load_annotations(&data, cats)?;
    let stats = dataset_stats(&f);
    let dir = out_dir(&cfg, args.out)?;
    let path = dir.join(STATS_FILE);
    let body = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_file(&path, body.as_bytes())?;
    progress(
        verbose,
        format!(
            "{}: {} users, {} items, {} annotations -> {}",
            data.display(),
            stats.num_users,
            stats.num_items,
            stats.num_annotations,
            path.display()
        ),
    );
    Ok(())
}

fn resolve_synth(arg: SynthArg, seed: Option<u64>) -> tagforge::SynthSpec {
    let mut spec = arg.spec;
    if !arg.seed_given {
        spec.seed = seed.unwrap_or(DEFAULT_SEED);
    }
    spec
}

pub fn synth(args: SynthArgs, verbose: bool) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let arg = cfg
        .pick(parse_flag::<SynthArg>(args.synth)?, "synth")?
        .unwrap_or(SynthArg {
            spec: tagforge::SynthSpec::default(),
            seed_given: false,
        });
    let spec = resolve_synth(arg, cfg.pick(args.seed, "seed")?);
    let f = synthesize(&spec)?;
    let dir = out_dir(&cfg, args.out)?;
    let data = dir.join(ANNOTATIONS_FILE);
    tagforge::write_annotations(&f, &data)?;
    f.categories().write(dir.join(CATEGORIES_FILE))?;
    progress(
        verbose,
        format!("wrote {} annotations to {}", f.annotations().len(), data.display()),
    );
    Ok(())
}

struct Dataset {
    folksonomy: Folksonomy,
    description: Value,
}

fn load_dataset(args: &mut SweepArgs, cfg: &ConfigFile) -> Result<Dataset> {
    // a source given on the command line replaces any source in the file
    let flag_source = args.data.is_some() || args.synth.is_some();
    let (data, synth): (Option<PathBuf>, Option<SynthArg>) = if flag_source {
        (args.data.take(), parse_flag(args.synth.take())?)
    } else {
        (cfg.pick(None, "data")?, cfg.pick(None, "synth")?)
    };
    let seed = cfg.pick(args.seed, "seed")?;
    match (data, synth) {
        (Some(_), Some(_)) => Err(Error::Config(
            "give either a data file or a synth spec, not both".into(),
        )),
        (None, None) => Err(Error::Config("sweep needs --data or --synth".into())),
        (Some(data), None) => {
            let categories: PathBuf = cfg
                .pick(args.categories.take(), "categories")?
                .ok_or_else(|| Error::Config("--data requires --categories".into()))?;
            let cats = Arc::new(CategorySet::load(&categories)?);
            let folksonomy = load_annotations(&data, cats)?;
            let description = json!({
                "source": "file",
                "annotations": data.display().to_string(),
                "annotations_sha256": sha256_hex(&read_bytes(&data)?),
                "categories": categories.display().to_string(),
                "categories_sha256": sha256_hex(&read_bytes(&categories)?),
            });
            Ok(Dataset {
                folksonomy,
                description,
            })
        }
        (None, Some(arg)) => {
            let spec = resolve_synth(arg, seed);
            let folksonomy = synthesize(&spec)?;
            let mut rendered = Vec::new();
            folksonomy.write_tsv(&mut rendered).expect("in-memory write");
            let description = json!({
                "source": "synthetic",
                "synth": spec,
                "annotations_sha256": sha256_hex(&rendered),
            });
            Ok(Dataset {
                folksonomy,
                description,
            })
        }
    }
}

pub fn sweep(mut args: SweepArgs, verbose: bool) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let dataset = load_dataset(&mut args, &cfg)?;
    let f = &dataset.folksonomy;
    let cats = f.categories().clone();

    let strategies = cfg
        .pick(parse_flag::<StrategyList>(args.strategies)?, "strategies")?
        .map_or_else(|| Strategy::ALL.to_vec(), |s| s.0);
    let grid = cfg
        .pick(parse_flag::<RhoGrid>(args.rho_grid)?, "rho-grid")?
        .map_or_else(default_rho_grid, |g| g.0);
    let seed = cfg.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    let fraction = cfg.pick(args.split, "split")?.unwrap_or(DEFAULT_SPLIT_FRACTION);
    let top_v = cfg
        .pick(parse_flag::<TopList>(args.top)?, "top")?
        .map_or_else(|| DEFAULT_TOP_V.to_vec(), |t| t.0);
    let population_mode = cfg
        .pick(parse_flag::<PopulationMode>(args.population_mode)?, "population-mode")?
        .unwrap_or_default();
    let smoothing: Option<f64> = cfg.pick(args.smoothing, "smoothing")?;
    if let Some(eps) = smoothing {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing must be finite and non-negative, got {}",
                eps
            )));
        }
    }
    let threads: Option<usize> = cfg.pick(args.threads, "threads")?;
    let dump = cfg.pick(args.per_user_dump, "per-user-dump")?.unwrap_or(false);
    let pool = cfg
        .pick(parse_flag::<Pool>(args.pool)?, "pool")?
        .map_or(PoolMode::Global, |p| p.0);
    let tmn_path: Option<PathBuf> = cfg.pick(args.tmn_dist, "tmn-dist")?;

    let tmn = if strategies.contains(&Strategy::Tmn) {
        Some(match &tmn_path {
            Some(p) => load_tmn_distribution(p, cats.clone())?,
            None => Profile::uniform(cats.clone()),
        })
    } else {
        None
    };
    let templates = strategies
        .iter()
        .map(|&s| ForgeryConfig::new(s, 0.0, if s == Strategy::Tmn { tmn.clone() } else { None }))
        .collect::<Result<Vec<_>>>()?;

    let split = make_split_with_fraction(f, seed, fraction)?;
    let mut config = SweepConfig::new(templates, grid.clone());
    config.top_v = top_v.clone();
    config.population_mode = population_mode;
    config.smoothing = smoothing;
    config.pool = pool;
    config.threads = threads;
    config.keep_outcomes = dump;

    progress(
        verbose,
        format!(
            "sweeping {} users over {} strategies x {} rates",
            f.users().len(),
            strategies.len(),
            grid.len()
        ),
    );
    let report = run_sweep(f, &split, &config)?;

    let dir = out_dir(&cfg, args.out)?;
    let csv_path = dir.join(SWEEP_FILE);
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &report.results, &top_v).expect("in-memory write");
    write_file(&csv_path, &csv)?;

    if dump {
        let path = dir.join(PER_USER_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for cell in &report.outcomes {
            for o in &cell.outcomes {
                let hits: Map<String, Value> = top_v
                    .iter()
                    .zip(&o.hits)
                    .map(|(v, h)| (v.to_string(), json!(h)))
                    .collect();
                let line = json!({
                    "strategy": cell.strategy,
                    "rho": cell.rho,
                    "user": o.user,
                    "initial_risk_bits": o.initial_risk,
                    "final_risk_bits": o.final_risk,
                    "hits": hits,
                    "test_size": o.test_size,
                });
                writeln!(out, "{}", line).map_err(|e| Error::io(&path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
    }

    let strategy_configs: Vec<Value> = strategies
        .iter()
        .map(|&s| match (s, &tmn) {
            (Strategy::Tmn, Some(w)) => {
                let dist: Map<String, Value> = cats
                    .labels()
                    .iter()
                    .zip(w.components())
                    .map(|(l, x)| (l.clone(), json!(x)))
                    .collect();
                json!({
                    "name": s,
                    "distribution_file": tmn_path.as_ref().map(|p| p.display().to_string()),
                    "distribution": dist,
                })
            }
            _ => json!({ "name": s }),
        })
        .collect();
    let manifest = json!({
        "tool": "tagforge",
        "version": env!("CARGO_PKG_VERSION"),
        "dataset": dataset.description,
        "seed": seed,
        "split_fraction": fraction,
        "rho_grid": grid,
        "strategies": strategy_configs,
        "top_v": top_v,
        "population_mode": population_mode.to_string(),
        "smoothing": smoothing,
        "pool": match pool { PoolMode::Global => "global", PoolMode::PerUser => "per-user" },
        "outputs": {
            "sweep": SWEEP_FILE,
            "per_user": dump.then_some(PER_USER_FILE),
        },
    });
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serialize") + "\n";
    write_file(&dir.join(MANIFEST_FILE), body.as_bytes())?;
    progress(verbose, format!("wrote {}", csv_path.display()));
    Ok(())
}

pub fn report(args: ReportArgs, verbose: bool) -> Result<()> {
    let (results, top_v) = read_sweep_csv(&args.sweep_csv)?;
    let dir = args.out.unwrap_or_else(|| match args.sweep_csv.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    });
    for path in write_figure_data(&dir, &results, &top_v)? {
        progress(verbose, format!("wrote {}", path.display()));
    }
    Ok(())
}
