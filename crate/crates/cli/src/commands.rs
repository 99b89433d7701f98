use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use journey_core::clustering::{kmedoids, prototypes, sweep};
use journey_core::counterfactual::{explain_batch, find_counterfactual, CfResult};
use journey_core::ingest::{cleanse, cooccurrence, describe, load, parse_query, CleansingReport, Format};
use journey_core::prediction::evaluate;
use journey_core::{
    distance_matrix, fixture, mds, svg, CfQuery, Dataset, DistanceConfig, Kernel, KnnModel, Outcome, StageMask,
    StageWeights,
};
use serde::Serialize;
use serde_json::json;

use crate::{Cli, Command, Common};

const TOOL: &str = "journeys";
const EMPTY_RESULT: u8 = 2;

/// Every validated setting of a run, echoed into each output.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    input: String,
    format: Format,
    weights: StageWeights,
    kernel: Kernel,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_range: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    knn_k: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_obj: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<StageMask>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bind: Option<String>,
}

impl RunConfig {
    fn new(command: &'static str, common: &Common) -> Result<Self> {
        let weights = StageWeights::parse(&common.w1, &common.w2, &common.w3).context("invalid weights")?;
        let kernel: Kernel = common.kernel.parse().context("invalid kernel")?;
        let format = match &common.format {
            Some(f) => f.parse().context("invalid format")?,
            None => match common.input.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
                Some("jsonl" | "ndjson" | "json") => Format::Jsonl,
                _ => Format::Csv,
            },
        };
        let input = match &common.input {
            Some(p) => p.display().to_string(),
            None => "bundled:survey_fixture.csv".to_string(),
        };
        Ok(RunConfig {
            command,
            input,
            format,
            weights,
            kernel,
            seed: common.seed,
            k: None,
            k_range: None,
            compare: None,
            knn_k: None,
            reps: None,
            lambda: None,
            y_obj: None,
            mask: None,
            base: None,
            bind: None,
        })
    }

    fn distance(&self) -> DistanceConfig {
        DistanceConfig::new(self.weights, self.kernel)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    run_config: &'a RunConfig,
    result: &'a T,
}

fn read_input(common: &Common, cfg: &RunConfig) -> Result<(Result<Dataset, journey_core::Error>, CleansingReport)> {
    let records = match &common.input {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            load(file, cfg.format)?
        }
        None => load(fixture::SURVEY_CSV.as_bytes(), Format::Csv)?,
    };
    Ok(cleanse(&records, cfg.input.clone()))
}

/// The cleansed dataset, or `None` when nothing survived cleansing.
fn dataset(common: &Common, cfg: &RunConfig) -> Result<Option<Dataset>> {
    let (data, report) = read_input(common, cfg)?;
    if report.accepted == 0 {
        eprintln!("error: no valid journeys in {}", cfg.input);
        return Ok(None);
    }
    Ok(Some(data?))
}

fn emit<T: Serialize>(
    common: &Common,
    cfg: &RunConfig,
    result: &T,
    table: &str,
    extra: &[(&str, String)],
) -> Result<()> {
    let doc = Envelope {
        tool: TOOL,
        version: journey_core::VERSION,
        run_config: cfg,
        result,
    };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    print!("{text}");
    if let Some(dir) = &common.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(dir, &format!("{}.json", cfg.command), &text)?;
        let header = format!(
            "# {TOOL} {} {}\n# run_config {}\n",
            journey_core::VERSION,
            cfg.command,
            serde_json::to_string(cfg)?
        );
        write(dir, &format!("{}.txt", cfg.command), &(header + table))?;
        for (name, contents) in extra {
            write(dir, name, contents)?;
        }
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let common = &cli.common;
    match cli.command {
        Command::Validate => {
            let cfg = RunConfig::new("validate", common)?;
            let (data, report) = read_input(common, &cfg)?;
            let mut table = format!("input {}  accepted {}  rejected {}\n", report.input, report.accepted, report.rejected.len());
            for (code, n) in &report.histogram {
                let _ = writeln!(table, "  {code:<18} {n}");
            }
            emit(common, &cfg, &report, &table, &[])?;
            if report.accepted == 0 {
                return Ok(ExitCode::from(EMPTY_RESULT));
            }
            data?;
        }
        Command::Describe => {
            let cfg = RunConfig::new("describe", common)?;
            let Some(data) = dataset(common, &cfg)? else {
                return Ok(ExitCode::from(EMPTY_RESULT));
            };
            let stats = describe(&data);
            let co = cooccurrence(&data);
            let table = format!("{}\n{}", stats.to_table(), co.to_table());
            emit(common, &cfg, &json!({ "stats": stats, "cooccurrence": co }), &table, &[])?;
        }
        Command::Cluster { k, k_min, k_max, compare } => {
            let mut cfg = RunConfig::new("cluster", common)?;
            let ks: Vec<usize> = match k {
                Some(k) => vec![k],
                None => {
                    if k_min == 0 || k_min > k_max {
                        bail!("invalid k range {k_min}..{k_max}");
                    }
                    (k_min..=k_max).collect()
                }
            };
            if ks.contains(&0) {
                bail!("k must be at least 1");
            }
            cfg.k = k;
            cfg.k_range = k.is_none().then_some([k_min, k_max]);
            cfg.compare = Some(compare);
            let configs = if compare {
                let lev = |w: (u64, u64, u64)| -> Result<DistanceConfig> {
                    Ok(DistanceConfig::levenshtein(StageWeights::integers(w.0, w.1, w.2)?))
                };
                vec![
                    lev((1, 1, 1))?,
                    DistanceConfig::new(StageWeights::unit(), Kernel::DamerauLevenshtein),
                    lev((2, 1, 1))?,
                    lev((2, 1, 10))?,
                ]
            } else {
                vec![cfg.distance()]
            };
            let Some(data) = dataset(common, &cfg)? else {
                return Ok(ExitCode::from(EMPTY_RESULT));
            };
            let report = sweep(&data, &configs, &ks, cfg.seed)?;
            // chosen k: the requested one, else the best silhouette of the last configuration
            let row = configs.len() - 1;
            let chosen = k.unwrap_or_else(|| {
                let mut best = ks[0];
                let mut best_sc = f64::NEG_INFINITY;
                for &kk in &ks {
                    let sc = report.cell(row, kk).and_then(|c| c.silhouette).unwrap_or(f64::NEG_INFINITY);
                    if sc > best_sc {
                        best_sc = sc;
                        best = kk;
                    }
                }
                best
            });
            let cell = report.cell(row, chosen).ok_or_else(|| anyhow!("no result for k={chosen}"))?;
            let protos = prototypes(&data, &cell.result);
            let mut table = report.to_table();
            let _ = writeln!(table, "\nprototypes ({}, k={chosen})", cell.config);
            for p in &protos {
                let _ = writeln!(table, "  cluster {} size {:>3}  {:<6} {}", p.cluster, p.size, p.id, p.sequence);
            }
            emit(
                common,
                &cfg,
                &json!({ "sweep": report, "chosen_k": chosen, "prototypes": protos }),
                &table,
                &[],
            )?;
        }
        Command::Embed { k } => {
            let mut cfg = RunConfig::new("embed", common)?;
            cfg.k = Some(k);
            let Some(data) = dataset(common, &cfg)? else {
                return Ok(ExitCode::from(EMPTY_RESULT));
            };
            let matrix = distance_matrix(&data, &cfg.distance(), StageMask::ALL)?;
            let embedding = mds(&matrix)?;
            let clusters = kmedoids(&matrix, k, cfg.seed)?;
            let labels = data.labels();
            let picture = svg::scatter(&embedding, Some(&clusters.assignment), &labels, &clusters.medoids);
            let table = format!(
                "n {}  lambda1 {:.6}  lambda2 {:.6}  negative_mass {:.6}  degenerate {}\n",
                embedding.xy.len(),
                embedding.lambda1,
                embedding.lambda2,
                embedding.negative_mass,
                embedding.degenerate
            );
            let result = json!({
                "embedding": embedding,
                "clusters": clusters.assignment,
                "medoids": clusters.medoids,
                "outcomes": labels,
            });
            emit(common, &cfg, &result, &table, &[("embedding.svg", picture)])?;
        }
        Command::Predict { knn_k, reps } => {
            let mut cfg = RunConfig::new("predict", common)?;
            if reps == 0 {
                bail!("--reps must be at least 1");
            }
            cfg.knn_k = Some(knn_k.clone());
            cfg.reps = Some(reps);
            let Some(data) = dataset(common, &cfg)? else {
                return Ok(ExitCode::from(EMPTY_RESULT));
            };
            let report = evaluate(&data, &knn_k, reps, cfg.seed, cfg.distance())?;
            let table = report.to_table();
            emit(common, &cfg, &report, &table, &[])?;
        }
        Command::Explain { id, items, all, y_obj, lambda, knn_k, mask } => {
            let mut cfg = RunConfig::new("explain", common)?;
            let target = Outcome::from_bit(y_obj).ok_or_else(|| anyhow!("--y-obj must be 0 or 1"))?;
            if !lambda.is_finite() || lambda < 0.0 {
                bail!("--lambda must be a non-negative number");
            }
            let mask: StageMask = mask.parse().context("invalid --mask")?;
            cfg.knn_k = Some(vec![knn_k]);
            cfg.lambda = Some(lambda);
            cfg.y_obj = Some(y_obj);
            cfg.mask = Some(mask);
            cfg.base = id.clone().or_else(|| items.as_ref().map(|i| i.join(",")));
            let Some(data) = dataset(common, &cfg)? else {
                return Ok(ExitCode::from(EMPTY_RESULT));
            };
            let model = KnnModel::fit(&data, knn_k, cfg.distance())?;
            let results: Vec<CfResult> = if all {
                explain_batch(&data, &model, target, lambda, mask)?
            } else {
                let query = if let Some(id) = &id {
                    let row = data.position(id).ok_or_else(|| anyhow!("NotFound: no journey with id {id}"))?;
                    CfQuery::for_row(&data, row, target, lambda)?
                } else if let Some(items) = &items {
                    let base = parse_query("base", items)
                        .map_err(|r| anyhow!("invalid base journey: {} at item {:?}", r.reason, r.position))?;
                    CfQuery::new(base, target, lambda)
                } else {
                    bail!("give --id, --items or --all");
                };
                vec![find_counterfactual(&data, &model, &query.with_mask(mask))?]
            };
            let mut table = String::new();
            for r in &results {
                let _ = writeln!(
                    table,
                    "{} {} -> {} {}  objective {:.4}  distance {:.4}  loss {}  y_hat {:.3}",
                    r.base.id(),
                    r.base.notation(),
                    r.counterfactual.id(),
                    r.counterfactual.notation(),
                    r.objective,
                    r.distance,
                    r.loss,
                    r.model_check
                );
                for line in &r.narrative {
                    let _ = writeln!(table, "    {line}");
                }
                if let Some(w) = &r.warning {
                    eprintln!("warning: {}: {w}", r.base.id());
                    let _ = writeln!(table, "    warning: {w}");
                }
            }
            if all {
                emit(common, &cfg, &results, &table, &[])?;
                if results.is_empty() {
                    return Ok(ExitCode::from(EMPTY_RESULT));
                }
            } else {
                emit(common, &cfg, &results[0], &table, &[])?;
            }
        }
        Command::Serve { bind, snapshot } => {
            let mut cfg = RunConfig::new("serve", common)?;
            cfg.bind = Some(bind.clone());
            let addr: SocketAddr = bind.parse().with_context(|| format!("invalid bind address {bind}"))?;
            let (data, report) = read_input(common, &cfg)?;
            let initial = if report.accepted > 0 { Some((data?, report)) } else { None };
            let state = match snapshot {
                Some(path) => journey_service::AppState::with_persistence(initial, path)?,
                None => journey_service::AppState::new(initial),
            };
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime
                .block_on(journey_service::serve(addr, state))
                .with_context(|| format!("serving on {addr}"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
