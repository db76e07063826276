use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{ensure, Context};
use clap::{Parser, Subcommand, ValueEnum};
use embdiff::precompute::{self, FreqSpec, ModelSpec, PrecomputeConfig};
use embdiff::{api, store, PairParams};
use embdiff_core::lns::{DEFAULT_K, DEFAULT_K_MAX};

#[derive(Parser)]
#[command(name = "embdiff", version, about = "Compare embedding models by local neighborhood similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, align and precompute neighbor tables into a cache directory.
    Precompute {
        #[arg(long)]
        dataset: String,
        /// name=path:format, where format is word2vec_text, glove_text or tsv.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        /// Keep only the n most frequent tokens of each model before aligning.
        #[arg(long)]
        top_n: Option<usize>,
        /// token<TAB>count file for all models, or name=path for one model.
        /// Without it, file order is taken as frequency order.
        #[arg(long = "freq")]
        freqs: Vec<String>,
        #[arg(long = "metric", default_values_t = vec!["cosine".to_string()])]
        metrics: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP/JSON API from a cache directory.
    Serve {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory of static assets served on every non-API path.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Score one model pair and print the result.
    Compare {
        #[arg(long)]
        cache: PathBuf,
        /// Required when the cache holds more than one dataset.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        metric: String,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Precompute { dataset, models, top_n, freqs, metrics, k_max, out } => {
            let models = models
                .iter()
                .map(|m| m.parse::<ModelSpec>().with_context(|| format!("--model {m:?}")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let freqs = freqs.iter().map(|f| FreqSpec::parse(f, &models)).collect();
            let config = PrecomputeConfig { dataset, models, top_n, freqs, metrics, k_max };
            let start = Instant::now();
            let (pre, dir) = precompute::run(&config, &out)?;
            eprintln!(
                "wrote {} ({} objects, {} models, {} tables) in {:.1}s",
                dir.display(),
                pre.dataset.vocabulary.len(),
                pre.dataset.models.len(),
                pre.tables.len(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Serve { cache, port, host, static_dir } => {
            let service = Arc::new(store::load_service(&cache)?);
            let app = api::router(service, static_dir.as_deref());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let addr = SocketAddr::new(host, port);
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Compare { cache, dataset, a, b, k, metric, format } => {
            let service = store::load_service(&cache)?;
            let dataset = match dataset {
                Some(d) => d,
                None => {
                    let ids: Vec<&str> = service.entries().map(|e| e.dataset.id.as_str()).collect();
                    ensure!(ids.len() == 1, "cache holds datasets {ids:?}; pick one with --dataset");
                    ids[0].to_owned()
                }
            };
            let params = PairParams::new(&dataset, &a, &b, k, &metric);
            let stdout = std::io::stdout();
            let mut out = std::io::BufWriter::new(stdout.lock());
            match format {
                OutputFormat::Json => {
                    out.write_all(&embdiff::compare_json(&service, &params)?)?;
                    out.write_all(b"\n")?;
                }
                OutputFormat::Tsv => embdiff::compare_tsv(&service, &params, &mut out)?,
            }
            out.flush()?;
        }
    }
    Ok(())
}
