use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holoscope::render::RenderMode;
use holoscope::workflow::{run, MapSpec, RunConfig, Workflow, ZerosSpec};
use holoscope::{Cx, Error};

#[derive(Parser)]
#[command(name = "holoscope", version, about = "Numerical complex dynamics on the Riemann sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Parses `re,im` or a bare real.
fn complex(s: &str) -> Result<Cx, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("`{s}` is not `re,im`"));
    match parts.as_slice() {
        [re] => Ok(Cx::new(num(re)?, 0.0)),
        [re, im] => Ok(Cx::new(num(re)?, num(im)?)),
        _ => Err(format!("`{s}` is not `re,im`")),
    }
}

fn window(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("`{s}` is not `re_min,re_max,im_min,im_max`"))?;
    v.try_into().map_err(|_| format!("`{s}` needs four numbers"))
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Koenigs linearizer at a repelling fixed point.
    Linearize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        point: Cx,
        #[arg(long)]
        trunc: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Cycles of exact period n with multipliers.
    Periodic {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        period: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Samples of the maximal-entropy measure by inverse iteration.
    Mmem {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        n_points: usize,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        start: Option<Cx>,
        #[command(flatten)]
        common: Common,
    },
    /// Green's function of a polynomial at a point.
    Green {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        z: Cx,
        #[arg(long)]
        nmax: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Harmonic measure of the basin of infinity by walk-on-spheres.
    Harmonic {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        start: Cx,
        #[arg(long)]
        n_walks: usize,
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Binned comparison of two measure files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_parser = window, allow_hyphen_values = true)]
        window: Option<[f64; 4]>,
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Multiplier relations, degree checks and invariant curves for a pair of maps.
    Correspond {
        #[arg(long)]
        map1: PathBuf,
        #[arg(long)]
        map2: PathBuf,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        p1: Cx,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        p2: Cx,
        #[arg(long)]
        amax: usize,
        #[arg(long)]
        bmax: usize,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        max_bidegree: Option<usize>,
        #[arg(long)]
        trunc: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Lyapunov spectrum and rigidity verdict of a Blaschke product.
    Blaschke {
        #[arg(long)]
        zeros: PathBuf,
        #[arg(long)]
        nmax: usize,
        #[arg(long, allow_hyphen_values = true)]
        rotation: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Backward shrinking of a small ball around a Julia point.
    Tce {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = complex, allow_hyphen_values = true)]
        point: Cx,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        branches: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Ball-mass scaling exponents of a measure at given points.
    Ballscale {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        n_radii: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// PPM image of a filled Julia set or of a measure's density.
    Render {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value = "escape-time")]
        mode: String,
        #[arg(long, value_parser = window, allow_hyphen_values = true)]
        window: Option<[f64; 4]>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the workflow described by a config file.
    Run { config: PathBuf },
}

fn base(workflow: Workflow, common: Common) -> RunConfig {
    let mut cfg = RunConfig::new(workflow);
    cfg.seed = common.seed;
    cfg.out = common.out;
    cfg
}

fn config(command: Command) -> Result<RunConfig, Error> {
    let file = |p: PathBuf| Some(MapSpec::File(p));
    let cfg = match command {
        Command::Linearize { map, point, trunc, common } => {
            let mut c = base(Workflow::Linearize, common);
            c.map = file(map);
            c.point = Some(point);
            c.trunc = trunc;
            c
        }
        Command::Periodic { map, period, common } => {
            let mut c = base(Workflow::Periodic, common);
            c.map = file(map);
            c.period = Some(period);
            c
        }
        Command::Mmem { map, n_points, depth, start, common } => {
            let mut c = base(Workflow::Mmem, common);
            c.map = file(map);
            c.n_points = Some(n_points);
            c.depth = depth;
            c.point = start;
            c
        }
        Command::Green { map, z, nmax, common } => {
            let mut c = base(Workflow::Green, common);
            c.map = file(map);
            c.point = Some(z);
            c.n_max = nmax;
            c
        }
        Command::Harmonic { map, start, n_walks, eps, common } => {
            let mut c = base(Workflow::Harmonic, common);
            c.map = file(map);
            c.point = Some(start);
            c.n_walks = Some(n_walks);
            c.eps_stop = eps;
            c
        }
        Command::Compare { a, b, window, bins, common } => {
            let mut c = base(Workflow::Compare, common);
            c.measure = Some(a);
            c.measure2 = Some(b);
            c.window = window;
            c.bins = bins;
            c
        }
        Command::Correspond { map1, map2, p1, p2, amax, bmax, ell, max_bidegree, trunc, common } => {
            let mut c = base(Workflow::Correspond, common);
            c.map = file(map1);
            c.map2 = file(map2);
            c.point = Some(p1);
            c.point2 = Some(p2);
            c.a_max = Some(amax);
            c.b_max = Some(bmax);
            c.ell = ell;
            c.max_bidegree = max_bidegree;
            c.trunc = trunc;
            c
        }
        Command::Blaschke { zeros, nmax, rotation, common } => {
            let mut c = base(Workflow::Blaschke, common);
            c.zeros = Some(ZerosSpec::File(zeros));
            c.n_max = Some(nmax);
            c.rotation = rotation;
            c
        }
        Command::Tce { map, point, radius, nmax, branches, common } => {
            let mut c = base(Workflow::Tce, common);
            c.map = file(map);
            c.point = Some(point);
            c.radius = Some(radius);
            c.n_max = Some(nmax);
            c.branches = branches;
            c
        }
        Command::Ballscale { measure, points, r_min, r_max, n_radii, common } => {
            let mut c = base(Workflow::Ballscale, common);
            c.measure = Some(measure);
            c.points = Some(points);
            c.r_min = r_min;
            c.r_max = r_max;
            c.n_radii = n_radii;
            c
        }
        Command::Render { map, measure, mode, window, width, height, n_points, common } => {
            let mut c = base(Workflow::Render, common);
            c.map = map.map(MapSpec::File);
            c.measure = measure;
            c.mode = Some(mode.parse::<RenderMode>()?);
            c.window = window;
            c.width = width;
            c.height = height;
            c.n_points = n_points;
            c
        }
        Command::Run { config } => RunConfig::from_file(&config)?,
    };
    Ok(cfg)
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("HOLOSCOPE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("HOLOSCOPE_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| config(cli.command)).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
