use clap::Args;
use geomgraph::cloud::{generate_cloud, SamplingSpec, Surface};
use geomgraph::graph::{
    build_constrained_graph, build_knn_graph, graph_stats, ConstraintParams, GraphMode,
};
use geomgraph::io::{
    format_edge_list, load_cloud, save_cloud, save_descriptors_csv, CloudFormat,
};
use geomgraph::local::compute_descriptors;
use geomgraph::{NeighborGraph, PointCloud, SpatialIndex};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Args)]
pub struct GenerateArgs {
    /// Surface: plane, sphere, cylinder, two-cluster, range-skewed-sphere
    #[arg(long)]
    pub surface: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0.0)]
    pub density_exponent: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (.xyz or .ply)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturesArgs {
    /// Input cloud path
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Input format: xyz or ply (default: guessed from extension)
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub k_feat: usize,
    #[arg(long, default_value_t = 20)]
    pub k_normal: usize,
    #[arg(long, default_value_t = 30)]
    pub k_curv: usize,
    /// Normalize the cloud to the unit sphere before processing
    #[arg(long)]
    pub normalize: bool,
    /// Output descriptor CSV path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GraphArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// knn or constrained
    #[arg(long, default_value = "constrained")]
    pub mode: String,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Exclusion cone half-angle in degrees
    #[arg(long, default_value_t = 30.0)]
    pub theta_deg: f64,
    #[arg(long, default_value_t = 1.25)]
    pub lambda: f64,
    #[arg(long, default_value_t = 4)]
    pub pool_multiplier: usize,
    /// Permit k >= cloud size (out-degrees then saturate at N-1)
    #[arg(long)]
    pub allow_short: bool,
    /// Output edge-list path; a stats CSV is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated surface list
    #[arg(long, default_value = "range-skewed-sphere")]
    pub surfaces: String,
    /// Comma-separated k values
    #[arg(long, default_value = "20")]
    pub k: String,
    /// Comma-separated theta values in degrees
    #[arg(long, default_value = "30")]
    pub theta_deg: String,
    /// Comma-separated lambda values
    #[arg(long, default_value = "1.25")]
    pub lambda: String,
    #[arg(long, default_value_t = 4)]
    pub pool_multiplier: usize,
    #[arg(long, default_value_t = 2.0)]
    pub density_exponent: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 4096)]
    pub count: usize,
    /// First seed of the trial range
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of seeded trials per grid cell
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Output report CSV path
    #[arg(long)]
    pub out: PathBuf,
}

type CmdResult = Result<(), String>;

fn resolve_format(path: &Path, flag: &Option<String>) -> Result<CloudFormat, String> {
    match flag {
        Some(f) => CloudFormat::parse(f).map_err(|e| e.to_string()),
        None => Ok(CloudFormat::from_path(path)),
    }
}

fn load(path: &Path, flag: &Option<String>) -> Result<PointCloud, String> {
    let format = resolve_format(path, flag)?;
    load_cloud(path, format).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn generate(args: GenerateArgs) -> CmdResult {
    let spec = SamplingSpec {
        surface: Surface::parse(&args.surface).map_err(|e| e.to_string())?,
        count: args.count,
        density_exponent: args.density_exponent,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    let cloud = generate_cloud(&spec).map_err(|e| e.to_string())?;
    let format = CloudFormat::from_path(&args.out);
    save_cloud(&cloud, &args.out, format).map_err(|e| e.to_string())?;
    println!("wrote {} points to {}", cloud.len(), args.out.display());
    Ok(())
}

pub fn features(args: FeaturesArgs) -> CmdResult {
    let mut cloud = load(&args.input, &args.format)?;
    if args.normalize {
        cloud = cloud.normalize_unit_sphere().map_err(|e| e.to_string())?;
    }
    let index = SpatialIndex::build(&cloud).map_err(|e| e.to_string())?;
    let descriptors = compute_descriptors(&cloud, &index, args.k_feat, args.k_normal, args.k_curv)
        .map_err(|e| e.to_string())?;
    save_descriptors_csv(&descriptors, &args.out).map_err(|e| e.to_string())?;
    let degenerate = descriptors.iter().filter(|d| d.degenerate).count();
    println!("N={} degenerate={}", cloud.len(), degenerate);
    Ok(())
}

fn build_graph(
    cloud: &PointCloud,
    index: &SpatialIndex,
    mode: GraphMode,
    k: usize,
    params: &ConstraintParams,
) -> Result<NeighborGraph, String> {
    match mode {
        GraphMode::Knn => build_knn_graph(cloud, index, k),
        GraphMode::Constrained => build_constrained_graph(cloud, index, k, params),
    }
    .map_err(|e| e.to_string())
}

fn stats_csv(
    graph: &NeighborGraph,
    cloud: &PointCloud,
    theta_deg: f64,
    lambda: f64,
    pool_multiplier: usize,
) -> String {
    let s = graph_stats(graph, cloud);
    let mut out = String::from(
        "mode,k,theta_deg,lambda,pool_multiplier,mean_out_degree,min_out_degree,max_out_degree,mean_angular_coverage,mean_edge_length",
    );
    for i in 0..16 {
        let _ = write!(out, ",hist_{i}");
    }
    out.push('\n');
    let _ = write!(
        out,
        "{},{},{},{},{},{:.9e},{},{},{:.9e},{:.9e}",
        graph.mode.name(),
        graph.k_target,
        theta_deg,
        lambda,
        pool_multiplier,
        s.mean_out_degree,
        s.min_out_degree,
        s.max_out_degree,
        s.mean_angular_coverage,
        s.mean_edge_length,
    );
    for b in s.edge_length_histogram {
        let _ = write!(out, ",{b}");
    }
    out.push('\n');
    out
}

pub fn graph(args: GraphArgs) -> CmdResult {
    let cloud = load(&args.input, &args.format)?;
    if args.k >= cloud.len() && !args.allow_short {
        return Err(format!(
            "k exceeds cloud size ({} >= {}); pass --allow-short to proceed",
            args.k,
            cloud.len()
        ));
    }
    let mode = match args.mode.as_str() {
        "knn" => GraphMode::Knn,
        "constrained" => GraphMode::Constrained,
        other => return Err(format!("unknown mode {other:?}")),
    };
    let params = ConstraintParams {
        theta: args.theta_deg.to_radians(),
        lambda: args.lambda,
        candidate_multiplier: args.pool_multiplier,
    };
    let index = SpatialIndex::build(&cloud).map_err(|e| e.to_string())?;
    let graph = build_graph(&cloud, &index, mode, args.k, &params)?;
    std::fs::write(&args.out, format_edge_list(&graph))
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    let stats_path = stats_sibling(&args.out);
    std::fs::write(
        &stats_path,
        stats_csv(&graph, &cloud, args.theta_deg, args.lambda, args.pool_multiplier),
    )
    .map_err(|e| format!("{}: {e}", stats_path.display()))?;
    println!(
        "wrote {} edges to {} (stats: {})",
        graph.num_edges(),
        args.out.display(),
        stats_path.display()
    );
    Ok(())
}

fn stats_sibling(edge_path: &Path) -> PathBuf {
    let mut name = edge_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into());
    name.push_str(".stats.csv");
    edge_path.with_file_name(name)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    let vals: Result<Vec<T>, _> = s.split(',').map(|t| t.trim().parse::<T>()).collect();
    let vals = vals.map_err(|_| format!("invalid {what} list {s:?}"))?;
    if vals.is_empty() {
        return Err(format!("empty {what} list"));
    }
    Ok(vals)
}

pub fn bench(args: BenchArgs) -> CmdResult {
    let surfaces: Vec<Surface> = args
        .surfaces
        .split(',')
        .map(|s| Surface::parse(s.trim()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let ks: Vec<usize> = parse_list(&args.k, "k")?;
    let thetas: Vec<f64> = parse_list(&args.theta_deg, "theta")?;
    let lambdas: Vec<f64> = parse_list(&args.lambda, "lambda")?;
    if args.trials == 0 {
        return Err("empty grid: trials must be >= 1".into());
    }
    let mut report = String::from(
        "surface,mode,k,theta_deg,lambda,density_exponent,seed,mean_angular_coverage,mean_out_degree,mean_edge_length,build_ms\n",
    );
    for &surface in &surfaces {
        for &k in &ks {
            for &theta_deg in &thetas {
                for &lambda in &lambdas {
                    for trial in 0..args.trials {
                        let seed = args.seed + trial;
                        let cloud = generate_cloud(&SamplingSpec {
                            surface,
                            count: args.count,
                            density_exponent: args.density_exponent,
                            noise_sigma: args.noise_sigma,
                            seed,
                        })
                        .map_err(|e| e.to_string())?;
                        let index = SpatialIndex::build(&cloud).map_err(|e| e.to_string())?;
                        let params = ConstraintParams {
                            theta: theta_deg.to_radians(),
                            lambda,
                            candidate_multiplier: args.pool_multiplier,
                        };
                        for mode in [GraphMode::Knn, GraphMode::Constrained] {
                            let t0 = Instant::now();
                            let g = build_graph(&cloud, &index, mode, k, &params)?;
                            let build_ms = t0.elapsed().as_secs_f64() * 1e3;
                            let s = graph_stats(&g, &cloud);
                            let _ = writeln!(
                                report,
                                "{},{},{},{},{},{},{},{:.9e},{:.9e},{:.9e},{:.3}",
                                surface.name(),
                                mode.name(),
                                k,
                                theta_deg,
                                lambda,
                                args.density_exponent,
                                seed,
                                s.mean_angular_coverage,
                                s.mean_out_degree,
                                s.mean_edge_length,
                                build_ms,
                            );
                        }
                    }
                }
            }
        }
    }
    std::fs::write(&args.out, report).map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!("wrote benchmark report to {}", args.out.display());
    Ok(())
}
