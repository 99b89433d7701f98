//! `journeys`: batch front end for the journey analytics pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "journeys", version, about = "Customer-journey analytics: prototypes, maps, prediction, counterfactuals")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Journey file (CSV `id,item,...` or JSONL); defaults to the bundled survey fixture
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Input format; inferred from the file extension when omitted
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Stage-1 weight (integer, decimal or fraction)
    #[arg(long, global = true, default_value = "2")]
    pub w1: String,
    #[arg(long, global = true, default_value = "1")]
    pub w2: String,
    #[arg(long, global = true, default_value = "10")]
    pub w3: String,
    /// levenshtein | damerau_levenshtein
    #[arg(long, global = true, default_value = "levenshtein")]
    pub kernel: String,
    #[arg(long, global = true, env = "JM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also write JSON, text and SVG artifacts here
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cleanse the input and report rejections
    Validate,
    /// Stage frequencies and symbol co-occurrence
    Describe,
    /// k-medoids prototypes over a k range
    Cluster {
        /// Single k; overrides the range
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        /// Sweep LD, DL, LD(2,1,1) and LD(2,1,10) instead of the given weights
        #[arg(long)]
        compare: bool,
    },
    /// Classical MDS map coloured by k-medoids cluster
    Embed {
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
    /// Repeated stratified 80/20 evaluation of k-NN prediction
    Predict {
        /// Neighbour counts to evaluate
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        knn_k: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Counterfactual journey for one base journey, or for every journey
    Explain {
        /// Dataset journey id to explain
        #[arg(long, conflicts_with_all = ["items", "all"])]
        id: Option<String>,
        /// Literal base journey, e.g. `c,c,e,g,0`
        #[arg(long, value_delimiter = ',', conflicts_with = "all")]
        items: Option<Vec<String>>,
        /// Explain every journey whose label differs from --y-obj
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 1)]
        y_obj: u8,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 5)]
        knn_k: usize,
        /// Stages entering the distance
        #[arg(long, default_value = "st1,st2")]
        mask: String,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Persist uploaded datasets to this JSONL file and restore from it
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
