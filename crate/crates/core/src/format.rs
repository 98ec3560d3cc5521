//! Text format for lattices, charges, walls and singular bases.
//!
//! ```text
//! # comments run to the end of the line
//! lattice {
//!   gen x 1 0            # name, boundary vector
//!   gen y 0 1
//! }
//! convention plus        # or minus
//! charge {
//!   x 1 0  1 0  0 1      # name, Z base (re im), dZ/du_x (re im), dZ/du_y (re im)
//!   y 1 0  0 -1  1 0
//! }
//! wall {
//!   kind ray             # or line; default ray
//!   base -1 0
//!   dir 1 0
//!   class 1 0
//!   slab 1:1             # d:c pairs, slab 1 + sum c z^(d class); default 1:1
//! }
//! singularity {
//!   at -1 0
//!   class x              # thimble generator; its boundary is the invariant direction
//!   cut 1 0              # optional branch cut direction
//! }
//! phase 1 0              # optional phase for diagrams built from singularities
//! cutoff 13/2
//! ```
//!
//! Numbers are integers or `p/q` rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{CentralCharge, ChargeLattice, GaussianRational, Point, Rat, RelativeClass, SignConvention};
use crate::scattering::{ScatteringDiagram, ScatteringError, Wall, WallKind};
use crate::series::parse_rat;
use crate::tropical::{SingularBase, Singularity, TropicalError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
}

#[derive(Debug, Clone)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

impl Tok<'_> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, msg: msg.into() }
    }

    fn rat(&self) -> Result<Rat, ParseError> {
        parse_rat(self.text).filter(|_| !self.text.contains(char::is_whitespace)).ok_or_else(|| self.err(format!("expected a rational, found `{}`", self.text)))
    }

    fn int(&self) -> Result<i64, ParseError> {
        self.text.parse().map_err(|_| self.err(format!("expected an integer, found `{}`", self.text)))
    }
}

fn tokenize(text: &str) -> Vec<Vec<Tok<'_>>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        for (j, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push(Tok { text: &body[s..j], line: i + 1, col: body[..s].chars().count() + 1 });
                }
            } else if start.is_none() {
                start = Some(j);
            }
        }
        lines.push(toks);
    }
    lines
}

/// Parsed diagram file. Location info is kept for validation errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramFile {
    pub names: Vec<String>,
    pub boundary: Vec<[i64; 2]>,
    pub convention: SignConvention,
    pub charge: Option<CentralCharge>,
    pub walls: Vec<Wall>,
    pub singularities: Vec<Singularity>,
    pub phase: Option<GaussianRational>,
    pub cutoff: Option<Rat>,
    wall_lines: Vec<usize>,
    charge_line: usize,
    sing_line: usize,
}

struct Cursor<'a> {
    lines: Vec<Vec<Tok<'a>>>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next_nonempty(&mut self) -> Option<Vec<Tok<'a>>> {
        while self.pos < self.lines.len() {
            let l = self.lines[self.pos].clone();
            self.pos += 1;
            if !l.is_empty() {
                return Some(l);
            }
        }
        None
    }

    /// Lines of a block up to its closing brace.
    fn block(&mut self, open: &Tok<'a>) -> Result<Vec<Vec<Tok<'a>>>, ParseError> {
        let mut out = Vec::new();
        loop {
            let Some(l) = self.next_nonempty() else {
                return Err(open.err(format!("unterminated `{}` block", open.text)));
            };
            if l[0].text == "}" {
                if l.len() > 1 {
                    return Err(l[1].err("unexpected token after `}`"));
                }
                return Ok(out);
            }
            out.push(l);
        }
    }
}

fn arity(l: &[Tok<'_>], n: usize) -> Result<(), ParseError> {
    if l.len() < n + 1 {
        let last = l.last().unwrap();
        return Err(ParseError { line: last.line, col: last.col + last.text.chars().count(), msg: format!("`{}` expects {n} values", l[0].text) });
    }
    if l.len() > n + 1 {
        return Err(l[n + 1].err(format!("`{}` expects {n} values", l[0].text)));
    }
    Ok(())
}

fn point(a: &Tok<'_>, b: &Tok<'_>) -> Result<Point, ParseError> {
    Ok(Point::new(a.rat()?, b.rat()?))
}

fn complex(a: &Tok<'_>, b: &Tok<'_>) -> Result<GaussianRational, ParseError> {
    Ok(GaussianRational::new(a.rat()?, b.rat()?))
}

impl DiagramFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cur = Cursor { lines: tokenize(text), pos: 0 };
        let mut f = DiagramFile {
            names: vec![],
            boundary: vec![],
            convention: SignConvention::Plus,
            charge: None,
            walls: vec![],
            singularities: vec![],
            phase: None,
            cutoff: None,
            wall_lines: vec![],
            charge_line: 0,
            sing_line: 0,
        };
        let mut seen_lattice = false;
        let mut charge_rows: Option<Vec<Vec<Tok<'_>>>> = None;
        let mut sing_blocks: Vec<(Tok<'_>, Vec<Vec<Tok<'_>>>)> = Vec::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        while let Some(l) = cur.next_nonempty() {
            let head = &l[0];
            let is_block = l.len() == 2 && l[1].text == "{";
            match head.text {
                "lattice" | "charge" | "wall" | "singularity" => {
                    if !is_block {
                        return Err(l.get(1).unwrap_or(head).err(format!("expected `{} {{`", head.text)));
                    }
                    let body = cur.block(head)?;
                    match head.text {
                        "lattice" => {
                            if seen_lattice {
                                return Err(head.err("duplicate lattice block"));
                            }
                            seen_lattice = true;
                            f.parse_lattice(head, &body)?;
                        }
                        "charge" => {
                            if charge_rows.is_some() {
                                return Err(head.err("duplicate charge block"));
                            }
                            if !seen_lattice {
                                return Err(head.err("charge block before lattice block"));
                            }
                            f.charge_line = head.line;
                            charge_rows = Some(body);
                        }
                        "wall" => {
                            if !seen_lattice {
                                return Err(head.err("wall block before lattice block"));
                            }
                            let w = f.parse_wall(head, &body)?;
                            f.walls.push(w);
                            f.wall_lines.push(head.line);
                        }
                        _ => {
                            if !seen_lattice {
                                return Err(head.err("singularity block before lattice block"));
                            }
                            if f.sing_line == 0 {
                                f.sing_line = head.line;
                            }
                            sing_blocks.push((head.clone(), body));
                        }
                    }
                }
                "convention" | "phase" | "cutoff" => {
                    if !seen.insert(head.text) {
                        return Err(head.err(format!("duplicate `{}`", head.text)));
                    }
                    match head.text {
                        "convention" => {
                            arity(&l, 1)?;
                            f.convention = match l[1].text {
                                "plus" => SignConvention::Plus,
                                "minus" => SignConvention::Minus,
                                _ => return Err(l[1].err("convention must be `plus` or `minus`")),
                            };
                        }
                        "phase" => {
                            arity(&l, 2)?;
                            let z = complex(&l[1], &l[2])?;
                            if z.is_zero() {
                                return Err(l[1].err("phase must be nonzero"));
                            }
                            f.phase = Some(z);
                        }
                        _ => {
                            arity(&l, 1)?;
                            let c = l[1].rat()?;
                            if c <= Rat::from_integer(0.into()) {
                                return Err(l[1].err("cutoff must be positive"));
                            }
                            f.cutoff = Some(c);
                        }
                    }
                }
                other => return Err(head.err(format!("unknown statement `{other}`"))),
            }
        }
        if !seen_lattice {
            return Err(ParseError { line: 1, col: 1, msg: "missing lattice block".into() });
        }
        if let Some(rows) = charge_rows {
            f.charge = Some(f.parse_charge(&rows)?);
        }
        f.parse_singularities(sing_blocks)?;
        Ok(f)
    }

    fn parse_lattice(&mut self, head: &Tok<'_>, body: &[Vec<Tok<'_>>]) -> Result<(), ParseError> {
        for l in body {
            if l[0].text != "gen" {
                return Err(l[0].err(format!("expected `gen`, found `{}`", l[0].text)));
            }
            arity(l, 3)?;
            let name = l[1].text;
            if !name.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(l[1].err(format!("invalid generator name `{name}`")));
            }
            if self.names.iter().any(|n| n == name) {
                return Err(l[1].err(format!("duplicate generator `{name}`")));
            }
            self.names.push(name.to_string());
            self.boundary.push([l[2].int()?, l[3].int()?]);
        }
        if self.names.is_empty() {
            return Err(head.err("lattice block has no generators"));
        }
        Ok(())
    }

    fn gen_index(&self, t: &Tok<'_>) -> Result<usize, ParseError> {
        self.names.iter().position(|n| n == t.text).ok_or_else(|| t.err(format!("unknown generator `{}`", t.text)))
    }

    fn parse_charge(&self, rows: &[Vec<Tok<'_>>]) -> Result<CentralCharge, ParseError> {
        let n = self.names.len();
        let mut base: Vec<Option<GaussianRational>> = vec![None; n];
        let mut grad: Vec<Option<[GaussianRational; 2]>> = vec![None; n];
        for l in rows {
            let i = self.gen_index(&l[0])?;
            if base[i].is_some() {
                return Err(l[0].err(format!("duplicate charge for `{}`", l[0].text)));
            }
            if l.len() != 7 {
                return Err(l[0].err("charge rows are `name re im dx_re dx_im dy_re dy_im`"));
            }
            base[i] = Some(complex(&l[1], &l[2])?);
            grad[i] = Some([complex(&l[3], &l[4])?, complex(&l[5], &l[6])?]);
        }
        if let Some(i) = base.iter().position(|b| b.is_none()) {
            return Err(ParseError { line: self.charge_line, col: 1, msg: format!("no charge given for `{}`", self.names[i]) });
        }
        Ok(CentralCharge::new(base.into_iter().flatten().collect(), grad.into_iter().flatten().collect()).expect("equal lengths"))
    }

    fn parse_wall(&self, head: &Tok<'_>, body: &[Vec<Tok<'_>>]) -> Result<Wall, ParseError> {
        let mut kind = None;
        let mut base = None;
        let mut dir = None;
        let mut class = None;
        let mut slab: Option<BTreeMap<u64, Rat>> = None;
        for l in body {
            let dup = |set: bool| if set { Err(l[0].err(format!("duplicate `{}`", l[0].text))) } else { Ok(()) };
            match l[0].text {
                "kind" => {
                    dup(kind.is_some())?;
                    arity(l, 1)?;
                    kind = Some(match l[1].text {
                        "ray" => WallKind::Ray,
                        "line" => WallKind::Line,
                        _ => return Err(l[1].err("kind must be `ray` or `line`")),
                    });
                }
                "base" => {
                    dup(base.is_some())?;
                    arity(l, 2)?;
                    base = Some(point(&l[1], &l[2])?);
                }
                "dir" => {
                    dup(dir.is_some())?;
                    arity(l, 2)?;
                    dir = Some(point(&l[1], &l[2])?);
                }
                "class" => {
                    dup(class.is_some())?;
                    arity(l, self.names.len())?;
                    let c: Result<Vec<i64>, _> = l[1..].iter().map(|t| t.int()).collect();
                    class = Some(RelativeClass::new(c?));
                }
                "slab" => {
                    dup(slab.is_some())?;
                    let mut m = BTreeMap::new();
                    for t in &l[1..] {
                        let (d, c) = t.text.split_once(':').ok_or_else(|| t.err("slab entries are `d:c`"))?;
                        let d: u64 = d.parse().ok().filter(|d| *d > 0).ok_or_else(|| t.err("slab multiple must be a positive integer"))?;
                        let c = parse_rat(c).ok_or_else(|| t.err(format!("bad coefficient `{c}`")))?;
                        if m.insert(d, c).is_some() {
                            return Err(t.err(format!("duplicate multiple {d}")));
                        }
                    }
                    slab = Some(m);
                }
                other => return Err(l[0].err(format!("unknown wall field `{other}`"))),
            }
        }
        let need = |what: &str| head.err(format!("wall block is missing `{what}`"));
        Ok(Wall {
            base: base.ok_or_else(|| need("base"))?,
            direction: dir.ok_or_else(|| need("dir"))?,
            class: class.ok_or_else(|| need("class"))?,
            slab: slab.unwrap_or_else(Wall::unit_slab),
            kind: kind.unwrap_or(WallKind::Ray),
        })
    }

    fn parse_singularities(&mut self, blocks: Vec<(Tok<'_>, Vec<Vec<Tok<'_>>>)>) -> Result<(), ParseError> {
        if blocks.is_empty() {
            return Ok(());
        }
        let n = self.names.len();
        let mut slots: Vec<Option<Singularity>> = vec![None; n];
        for (head, body) in &blocks {
            let mut at = None;
            let mut gen = None;
            let mut cut = None;
            for l in body {
                match l[0].text {
                    "at" => {
                        arity(l, 2)?;
                        at = Some(point(&l[1], &l[2])?);
                    }
                    "class" => {
                        arity(l, 1)?;
                        gen = Some(self.gen_index(&l[1])?);
                        if slots[gen.unwrap()].is_some() {
                            return Err(l[1].err(format!("generator `{}` already has a singularity", l[1].text)));
                        }
                    }
                    "cut" => {
                        arity(l, 2)?;
                        cut = Some(point(&l[1], &l[2])?);
                    }
                    other => return Err(l[0].err(format!("unknown singularity field `{other}`"))),
                }
            }
            let at = at.ok_or_else(|| head.err("singularity block is missing `at`"))?;
            let g = gen.ok_or_else(|| head.err("singularity block is missing `class`"))?;
            let m = self.boundary[g];
            let cut = cut.unwrap_or_else(|| Point::from_ints(m[0], m[1]));
            slots[g] = Some(Singularity { position: at, invariant: m, cut });
        }
        if let Some(i) = slots.iter().position(|s| s.is_none()) {
            return Err(ParseError { line: self.sing_line, col: 1, msg: format!("generator `{}` has no singularity", self.names[i]) });
        }
        self.singularities = slots.into_iter().flatten().collect();
        Ok(())
    }

    pub fn lattice(&self, convention: Option<SignConvention>) -> Arc<ChargeLattice> {
        Arc::new(
            ChargeLattice::new(self.boundary.clone())
                .expect("nonempty")
                .with_labels(self.names.iter().cloned().map(Some).collect())
                .with_convention(convention.unwrap_or(self.convention)),
        )
    }

    pub fn has_singularities(&self) -> bool {
        !self.singularities.is_empty()
    }

    /// Singular base; the charge defaults to Z_s(u) = conj(m_s)(u - p_s).
    pub fn base(&self, convention: Option<SignConvention>) -> Result<SingularBase, FormatError> {
        if self.singularities.is_empty() {
            return Err(FormatError::Missing("the file declares no singularities".into()));
        }
        let loc = |e: TropicalError| ParseError { line: self.sing_line, col: 1, msg: e.to_string() };
        let conv = convention.unwrap_or(self.convention);
        let base = match &self.charge {
            Some(c) => SingularBase::from_parts(self.lattice(Some(conv)), c.clone(), self.singularities.clone()),
            None => {
                let pts = self.singularities.iter().map(|s| (s.position.clone(), s.invariant)).collect();
                SingularBase::new(pts, conv).and_then(|mut b| {
                    for (i, s) in self.singularities.iter().enumerate() {
                        b = b.with_cut(i, s.cut.clone())?;
                    }
                    Ok(b)
                })
            }
        };
        Ok(base.map_err(loc)?)
    }

    /// Scattering diagram: the declared walls, or the initial rays of the singular base at `phase`.
    pub fn diagram(&self, convention: Option<SignConvention>, cutoff: Option<Rat>) -> Result<ScatteringDiagram, FormatError> {
        let cutoff = cutoff.or_else(|| self.cutoff.clone()).ok_or_else(|| FormatError::Missing("no cutoff: pass --order or --energy, or add a cutoff line".into()))?;
        if self.walls.is_empty() && self.has_singularities() {
            let zeta = self.phase.clone().unwrap_or_else(GaussianRational::one);
            return Ok(self.base(convention)?.diagram_at_phase(&zeta, cutoff)?);
        }
        let charge = self.charge.clone().ok_or_else(|| FormatError::Missing("the file declares walls but no charge block".into()))?;
        if charge.rank() != self.names.len() {
            return Err(ParseError { line: self.charge_line, col: 1, msg: "charge rank differs from lattice rank".into() }.into());
        }
        ScatteringDiagram::new(self.lattice(convention), charge, self.walls.clone(), cutoff).map_err(|e| match e {
            ScatteringError::InvalidWall { index, msg } => {
                ParseError { line: self.wall_lines[index], col: 1, msg: format!("invalid wall: {msg}") }.into()
            }
            other => other.into(),
        })
    }
}

/// Canonical text of a diagram, readable by [`DiagramFile::parse`].
pub fn write_diagram(d: &ScatteringDiagram) -> String {
    let lat = d.lattice();
    let names: Vec<String> =
        lat.labels().iter().enumerate().map(|(i, l)| l.clone().unwrap_or_else(|| format!("g{}", i + 1))).collect();
    let mut s = String::from("lattice {\n");
    for (n, b) in names.iter().zip(lat.boundary_columns()) {
        let _ = writeln!(s, "  gen {n} {} {}", b[0], b[1]);
    }
    s.push_str("}\n");
    let conv = match lat.convention() {
        SignConvention::Plus => "plus",
        SignConvention::Minus => "minus",
    };
    let _ = writeln!(s, "convention {conv}");
    s.push_str("charge {\n");
    let ch = d.charge();
    for (i, n) in names.iter().enumerate() {
        let b = &ch.base_values()[i];
        let [gx, gy] = &ch.gradients()[i];
        let _ = writeln!(s, "  {n} {} {}  {} {}  {} {}", b.re, b.im, gx.re, gx.im, gy.re, gy.im);
    }
    s.push_str("}\n");
    for w in d.walls() {
        s.push_str("wall {\n");
        let _ = writeln!(s, "  kind {}", if w.kind == WallKind::Ray { "ray" } else { "line" });
        let _ = writeln!(s, "  base {} {}", w.base.x, w.base.y);
        let _ = writeln!(s, "  dir {} {}", w.direction.x, w.direction.y);
        let cl: Vec<String> = w.class.coords().iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "  class {}", cl.join(" "));
        let sl: Vec<String> = w.slab.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        let _ = writeln!(s, "  slab {}", sl.join(" "));
        s.push_str("}\n");
    }
    let _ = writeln!(s, "cutoff {}", d.cutoff());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::int;

    const PENTAGON: &str = "\
lattice {
  gen x 1 0
  gen y 0 1
}
charge {
  x 1 0  1 0  0 1
  y 1 0  0 -1  1 0
}
wall {
  base -1 0
  dir 1 0
  class 1 0
}
wall {
  base 0 -1
  dir 0 1
  class 0 1
}
cutoff 5/2
";

    #[test]
    fn round_trip() {
        let f = DiagramFile::parse(PENTAGON).unwrap();
        let d = f.diagram(None, None).unwrap();
        assert_eq!(d.walls().len(), 2);
        let text = write_diagram(&d);
        let again = DiagramFile::parse(&text).unwrap().diagram(None, None).unwrap();
        assert_eq!(again, d);
        assert_eq!(write_diagram(&again), text);
    }

    #[test]
    fn errors_carry_locations() {
        let e = DiagramFile::parse("lattice {\n  gen x 1\n}\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 10));
        let e = DiagramFile::parse("lattice {\n  gen x 1 0\n").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
        let e = DiagramFile::parse("lattice {\n  gen x 1 0\n}\ncutoff abc\n").unwrap_err();
        assert_eq!((e.line, e.col), (4, 8));
        let e = DiagramFile::parse("bogus\n").unwrap_err();
        assert_eq!(e.to_string(), "1:1: unknown statement `bogus`");
        let bad_wall = PENTAGON.replace("dir 1 0", "dir -1 0");
        match DiagramFile::parse(&bad_wall).unwrap().diagram(None, None) {
            Err(FormatError::Parse(p)) => assert_eq!(p.line, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singular_base_file() {
        let text = "lattice {\n gen x 1 0\n gen y 0 1\n}\nsingularity {\n at -1 0\n class x\n}\nsingularity {\n at 0 -1\n class y\n}\n";
        let f = DiagramFile::parse(text).unwrap();
        let b = f.base(None).unwrap();
        assert_eq!(b.singularities().len(), 2);
        let d = f.diagram(None, Some(int(3))).unwrap();
        assert_eq!(d.walls().len(), 2);
    }
}
