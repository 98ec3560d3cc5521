use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tropwall::lattice::{GaussianRational, Point, Sector, SignConvention};
use tropwall::series::parse_rat;
use tropwall::{pipeline, Command, Rat, RunConfig};

#[derive(Parser)]
#[command(name = "tropwall", version, about = "Exact scattering diagrams, tropical disc counts and DT invariants")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Complete a scattering diagram and check consistency at every crossing.
    Complete(Common),
    /// List tropical discs ending at a point and their weighted count.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Stop point `x,y` (rationals).
        #[arg(long, value_parser = parse_point)]
        point: Point,
        /// Class coordinates `c1,c2,...`; omit to list every class below the cutoff.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        class: Option<Vec<i64>>,
    },
    /// Tabulate Omega-tilde and Omega on the completed diagram.
    Invariants(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Plus,
    Minus,
}

#[derive(Args)]
struct Common {
    /// Diagram file.
    input: PathBuf,
    /// Truncation order N (cutoff N + 1/2).
    #[arg(long)]
    order: Option<u32>,
    /// Energy cutoff lambda; overrides --order for the cutoff.
    #[arg(long, value_parser = parse_positive)]
    energy: Option<Rat>,
    /// Closed sector `re:im,re:im`, counterclockwise from the first direction to the second.
    #[arg(long, value_parser = parse_sector, allow_hyphen_values = true)]
    sector: Option<Sector>,
    /// Also compute q-refined counts.
    #[arg(long)]
    refined: bool,
    #[arg(long, value_enum)]
    sign_convention: Option<Convention>,
    /// Write the SVG rendering here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn rat(s: &str) -> Result<Rat, String> {
    parse_rat(s).ok_or_else(|| format!("`{s}` is not a rational number"))
}

fn parse_positive(s: &str) -> Result<Rat, String> {
    let r = rat(s)?;
    if r <= Rat::from_integer(0.into()) {
        return Err("must be positive".into());
    }
    Ok(r)
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected `x,y`")?;
    Ok(Point::new(rat(x)?, rat(y)?))
}

fn parse_complex(s: &str) -> Result<GaussianRational, String> {
    let (re, im) = s.split_once(':').ok_or("expected `re:im`")?;
    Ok(GaussianRational::new(rat(re)?, rat(im)?))
}

fn parse_sector(s: &str) -> Result<Sector, String> {
    let (a, b) = s.split_once(',').ok_or("expected `re:im,re:im`")?;
    Sector::closed(parse_complex(a)?, parse_complex(b)?).map_err(|e| e.to_string())
}

fn config(c: Common, command: Command) -> RunConfig {
    RunConfig {
        input: c.input,
        command,
        order: c.order,
        energy: c.energy,
        sector: c.sector,
        refined: c.refined,
        out_dir: c.out,
        svg: c.svg,
        convention: c.sign_convention.map(|v| match v {
            Convention::Plus => SignConvention::Plus,
            Convention::Minus => SignConvention::Minus,
        }),
    }
}

fn main() -> ExitCode {
    // clap's own usage errors would exit with 2, which is reserved for genericity failures
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match cli.command {
        Cmd::Complete(c) => config(c, Command::Complete),
        Cmd::Invariants(c) => config(c, Command::Invariants),
        Cmd::Enumerate { common, point, class } => config(common, Command::Enumerate { point, class }),
    };
    let result = pipeline::run(&cfg).and_then(|r| {
        r.write(cfg.out_dir.as_deref(), cfg.svg.as_deref())?;
        Ok(r)
    });
    match result {
        Ok(r) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(r.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
