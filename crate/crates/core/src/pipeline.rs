//! End-to-end commands behind the command-line tool. Every output is a deterministic string.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::dt::{integrality_report, DtError, InvariantTable};
use crate::format::{write_diagram, DiagramFile, FormatError, ParseError};
use crate::lattice::{GaussianRational, Point, Rat, RelativeClass, Sector, SignConvention};
use crate::refined::{refined_omega, RefinedError};
use crate::scattering::{ScatteringDiagram, ScatteringError};
use crate::series::{class_to_field, rat_to_string};
use crate::svg;
use crate::tropical::{enumerate_discs, omega_trop, SingularBase, TropicalError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Complete,
    /// `class` None lists every class below the cutoff at the point.
    Enumerate { point: Point, class: Option<Vec<i64>> },
    Invariants,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub command: Command,
    pub order: Option<u32>,
    pub energy: Option<Rat>,
    /// Closed counterclockwise sector of wall directions (invariants) or charge phases (enumerate).
    pub sector: Option<Sector>,
    pub refined: bool,
    pub out_dir: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub convention: Option<SignConvention>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}:{0}", path = .1)]
    Parse(ParseError, String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("genericity failure: {0}")]
    Genericity(String),
    #[error("{0}")]
    OnWall(String),
    #[error("io error on {path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// 1 invalid input, 2 genericity failure, 3 point on a wall.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Genericity(_) => 2,
            PipelineError::OnWall(_) => 3,
            _ => 1,
        }
    }
}

impl From<ScatteringError> for PipelineError {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::Genericity { .. } | ScatteringError::NoConvergence => PipelineError::Genericity(e.to_string()),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

impl From<TropicalError> for PipelineError {
    fn from(e: TropicalError) -> Self {
        match e {
            TropicalError::OnWall { .. } => PipelineError::OnWall(e.to_string()),
            TropicalError::Scattering(s) => s.into(),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

impl From<RefinedError> for PipelineError {
    fn from(e: RefinedError) -> Self {
        match e {
            RefinedError::Tropical(t) => t.into(),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

impl From<DtError> for PipelineError {
    fn from(e: DtError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

fn from_format(e: FormatError, path: &str) -> PipelineError {
    match e {
        FormatError::Parse(p) => PipelineError::Parse(p, path.to_string()),
        FormatError::Missing(m) => PipelineError::Config(m),
        FormatError::Scattering(s) => s.into(),
        FormatError::Tropical(t) => t.into(),
    }
}

/// Output of one command: text for stdout plus named files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub stdout: String,
    pub files: BTreeMap<String, String>,
    pub svg: Option<String>,
}

impl Report {
    /// Write files into `out_dir` and the SVG to `svg_path`, if given.
    pub fn write(&self, out_dir: Option<&std::path::Path>, svg_path: Option<&std::path::Path>) -> Result<(), PipelineError> {
        fn io(p: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
            move |err| PipelineError::Io { path: p.display().to_string(), err }
        }
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
            for (name, text) in &self.files {
                let p = dir.join(name);
                std::fs::write(&p, text).map_err(io(&p))?;
            }
        }
        if let (Some(p), Some(s)) = (svg_path, &self.svg) {
            std::fs::write(p, s).map_err(io(p))?;
        }
        Ok(())
    }
}

pub fn parse_input(text: &str, path: &str) -> Result<DiagramFile, PipelineError> {
    DiagramFile::parse(text).map_err(|p| PipelineError::Parse(p, path.to_string()))
}

fn cutoff(config: &RunConfig) -> Option<Rat> {
    config.energy.clone().or_else(|| config.order.map(ScatteringDiagram::order_cutoff))
}

fn singular_points(file: &DiagramFile) -> Vec<Point> {
    file.singularities.iter().map(|s| s.position.clone()).collect()
}

/// Complete the diagram; emits the completed diagram, a slab table and a consistency summary.
pub fn cmd_complete(file: &DiagramFile, path: &str, config: &RunConfig) -> Result<Report, PipelineError> {
    let d = file.diagram(config.convention, cutoff(config)).map_err(|e| from_format(e, path))?;
    let done = d.complete()?;
    let checks = done.consistency_report()?;
    let bad: Vec<&Point> = checks.iter().filter(|c| !c.1).map(|c| &c.0).collect();
    if let Some(p) = bad.first() {
        return Err(PipelineError::Genericity(format!("loop product is not the identity at {p}")));
    }
    let mut slabs = String::from("wall\tkind\tbase\tdirection\tclass\tmultiple\tcoefficient\n");
    for (i, w) in done.walls().iter().enumerate() {
        for (k, c) in &w.slab {
            let _ = writeln!(
                slabs,
                "{i}\t{}\t{},{}\t{},{}\t{}\t{k}\t{}",
                if w.kind == crate::scattering::WallKind::Ray { "ray" } else { "line" },
                rat_to_string(&w.base.x),
                rat_to_string(&w.base.y),
                rat_to_string(&w.direction.x),
                rat_to_string(&w.direction.y),
                class_to_field(&w.class),
                rat_to_string(c)
            );
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "walls\t{}", done.walls().len());
    let _ = writeln!(out, "added\t{}", done.walls().len() - d.walls().len());
    let _ = writeln!(out, "crossings\t{}", checks.len());
    let _ = writeln!(out, "consistent\tyes");
    out.push_str(&slabs);
    let mut r = Report { stdout: out, ..Default::default() };
    r.files.insert("completed.diagram".into(), write_diagram(&done));
    r.files.insert("slabs.tsv".into(), slabs);
    if config.svg.is_some() || config.out_dir.is_some() {
        let pic = svg::render(&done, &singular_points(file));
        r.files.insert("diagram.svg".into(), pic.clone());
        r.svg = Some(pic);
    }
    Ok(r)
}

fn in_sector(sector: &Option<Sector>, z: &GaussianRational) -> bool {
    sector.as_ref().is_none_or(|s| s.contains(z))
}

/// Discs and Omega-tilde at a stop point, for one class or every class below the cutoff.
pub fn cmd_enumerate(file: &DiagramFile, path: &str, config: &RunConfig) -> Result<Report, PipelineError> {
    let Command::Enumerate { point, class } = &config.command else {
        return Err(PipelineError::Config("not an enumerate command".into()));
    };
    let base: SingularBase = file.base(config.convention).map_err(|e| from_format(e, path))?;
    let lambda = cutoff(config).or_else(|| file.cutoff.clone());
    let classes: Vec<RelativeClass> = match class {
        Some(c) => {
            if c.len() != base.rank() {
                return Err(PipelineError::Config(format!("--class needs {} coordinates", base.rank())));
            }
            vec![RelativeClass::new(c.iter().copied())]
        }
        None => {
            let l = lambda.clone().ok_or_else(|| PipelineError::Config("listing all classes needs --energy, --order or a cutoff line".into()))?;
            base.classes_below(point, &l)?
        }
    };
    let mut out = String::new();
    let mut table = String::from("class\tomega_trop");
    if config.refined {
        table.push_str("\trefined_omega\trefined_at_q1");
    }
    table.push('\n');
    for g in classes {
        let z = base.charge().charge(&g, point);
        if !in_sector(&config.sector, &z) {
            continue;
        }
        // any lambda with lambda^2 > |Z|^2 admits the class
        let l = lambda.clone().unwrap_or_else(|| z.norm_sqr() + Rat::from_integer(1.into()));
        let discs = enumerate_discs(&base, point, &g, &l)?;
        let omega = omega_trop(&base, point, &g, &l)?;
        let _ = writeln!(out, "class {g}\tdiscs {}", discs.len());
        for d in &discs {
            out.push_str(&d.to_string());
        }
        let _ = writeln!(out, "omega_trop {}", rat_to_string(&omega));
        let _ = write!(table, "{}\t{}", class_to_field(&g), rat_to_string(&omega));
        if config.refined {
            let q = refined_omega(&base, point, &g, &l)?;
            let at1 = q.at_one().map(|r| rat_to_string(&r)).unwrap_or_else(|_| "pole".into());
            let _ = writeln!(out, "refined_omega {q}");
            let _ = write!(table, "\t{q}\t{at1}");
        }
        table.push('\n');
        out.push('\n');
    }
    let mut r = Report { stdout: out, ..Default::default() };
    r.files.insert("omega.tsv".into(), table);
    Ok(r)
}

/// Omega-tilde / Omega table of the completed diagram with integrality and reality checks.
pub fn cmd_invariants(file: &DiagramFile, path: &str, config: &RunConfig) -> Result<Report, PipelineError> {
    let d = file.diagram(config.convention, cutoff(config)).map_err(|e| from_format(e, path))?;
    let done = d.complete()?;
    let d_cap = config.order.map(u64::from).unwrap_or(12);
    let mut table = InvariantTable::from_diagram(&done, d_cap)?;
    if let Some(s) = &config.sector {
        let walls = done.walls();
        table.rows.retain(|r| s.contains(&walls[r.chamber].direction.as_complex()));
    }
    let tsv = table.to_tsv();
    let rep = integrality_report(&table, d_cap);
    let mut checks = String::new();
    checks.push_str(&rep.to_text());
    let viol = table.reality_violations();
    let _ = writeln!(checks, "integral\t{}", if rep.is_clean() { "yes" } else { "no" });
    let _ = writeln!(checks, "reality\t{}", if viol.is_empty() { "ok" } else { "violated" });
    for (c, ch) in &viol {
        let _ = writeln!(checks, "reality-violation\t{}\t{ch}", class_to_field(c));
    }
    let mut r = Report { stdout: format!("{tsv}{checks}"), ..Default::default() };
    r.files.insert("invariants.tsv".into(), tsv);
    r.files.insert("checks.txt".into(), checks);
    Ok(r)
}

/// Read, parse and dispatch.
pub fn run(config: &RunConfig) -> Result<Report, PipelineError> {
    if let Some(o) = config.order {
        if o == 0 {
            return Err(PipelineError::Config("--order must be at least 1".into()));
        }
    }
    if let Some(e) = &config.energy {
        if *e <= Rat::from_integer(0.into()) {
            return Err(PipelineError::Config("--energy must be positive".into()));
        }
    }
    let path = config.input.display().to_string();
    let text = std::fs::read_to_string(&config.input).map_err(|err| PipelineError::Io { path: path.clone(), err })?;
    run_text(&text, &path, config)
}

pub fn run_text(text: &str, path: &str, config: &RunConfig) -> Result<Report, PipelineError> {
    let file = parse_input(text, path)?;
    match config.command {
        Command::Complete => cmd_complete(&file, path, config),
        Command::Enumerate { .. } => cmd_enumerate(&file, path, config),
        Command::Invariants => cmd_invariants(&file, path, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FF: &str = "lattice {\n gen e 1 0\n}\nsingularity {\n at 0 0\n class e\n}\n";
    const PENT: &str = "lattice {\n gen x 1 0\n gen y 0 1\n}\nsingularity {\n at -1 0\n class x\n}\nsingularity {\n at 0 -1\n class y\n}\n";

    fn cfg(command: Command) -> RunConfig {
        RunConfig {
            input: PathBuf::from("-"),
            command,
            order: Some(4),
            energy: None,
            sector: None,
            refined: false,
            out_dir: None,
            svg: None,
            convention: None,
        }
    }

    #[test]
    fn invariants_examples() {
        let r = run_text(FF, "ff", &cfg(Command::Invariants)).unwrap();
        let tsv = &r.files["invariants.tsv"];
        assert_eq!(tsv.lines().count(), 2, "{tsv}");
        assert!(tsv.contains("1\t0\t1/1\t1/1\tyes"));
        let r = run_text(PENT, "p", &cfg(Command::Invariants)).unwrap();
        let rows: Vec<&str> = r.files["invariants.tsv"].lines().skip(1).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|l| l.split('\t').nth(3) == Some("1/1")));
    }

    #[test]
    fn complete_pentagon() {
        let r = run_text(PENT, "p", &cfg(Command::Complete)).unwrap();
        assert!(r.stdout.starts_with("walls\t3\nadded\t1\n"), "{}", r.stdout);
        assert!(r.files["slabs.tsv"].contains("2\tray\t0/1,0/1\t1/1,1/1\t1,1\t1\t1/1"), "{}", r.files["slabs.tsv"]);
    }

    #[test]
    fn enumerate_examples() {
        let c = cfg(Command::Enumerate { point: Point::from_ints(1, 0), class: Some(vec![1]) });
        let r = run_text(FF, "ff", &c).unwrap();
        assert!(r.stdout.contains("discs 1") && r.stdout.contains("omega_trop 1/1"), "{}", r.stdout);
        let c = cfg(Command::Enumerate { point: Point::from_ints(1, 1), class: Some(vec![1, 1]) });
        let r = run_text(PENT, "p", &c).unwrap();
        assert!(r.stdout.contains("omega_trop 1/1"), "{}", r.stdout);
        let c = cfg(Command::Enumerate { point: Point::from_ints(0, 0), class: Some(vec![1, 1]) });
        assert_eq!(run_text(PENT, "p", &c).unwrap_err().exit_code(), 3);
    }
}
