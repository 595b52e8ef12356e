//! Line-oriented problem specs.
//!
//! ```text
//! # comment
//! domain  LO HI [LO HI ...]             one pair per axis
//! op      laplacian | identity | transport BETA | (a,b,...) EXPR
//! forcing EXPR                          right-hand side g (default 0)
//! bc      SEGMENT KIND [A B] [= EXPR]   dirichlet, neumann, robin A B, cauchy
//! truth   EXPR                          closed-form solution, if known
//! kernel  rbf h=V | aniso theta=V s=V [scale=V]
//! temps   gamma=V rho=V eta=V
//! quad    m=N [mode=corrected|uniform] [boundary=N]
//! obs     [layout=grid|uniform] [n=N] [noise=V] [phys_noise=V] [seed=N]
//! ```
//!
//! `op` lines accumulate terms. Values may be constant expressions such as
//! `2*pi` and may use parameters bound at parse time (e.g. `beta`).
//! Segments are named `x{i}-` and `x{i}+` for the lower and upper face of axis `i`.

use std::fmt;

use pile_core::expr::{CoefficientFn, Expr};
use pile_core::gram::{PhysicsNodes, Temperatures};
use pile_core::kernels::{KernelFamily, KernelSpec};
use pile_core::operators::{
    self, is_identity, make_boundary_operator, BoundaryKind, DomainSpec, MultiIndex, OperatorSpec, OperatorTerm, Region,
};
use pile_core::points::PointSet;
use pile_core::quadrature::{boundary_rule, interior_rule, monte_carlo, QuadratureRule, WeightMode};
use pile_core::selection::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::SpecError;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub segment: String,
    pub kind: BoundaryKind,
    /// Boundary data `h`; for Cauchy conditions it is the value target and the
    /// normal-derivative target is zero.
    pub data: CoefficientFn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub per_axis: usize,
    pub mode: WeightMode,
    /// Nodes per boundary segment; 0 leaves boundary conditions unenforced.
    pub boundary: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Observations on the interior quadrature grid.
    Grid,
    /// `n` points uniform on the domain.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsSettings {
    pub layout: Layout,
    pub n: usize,
    pub noise: f64,
    pub phys_noise: f64,
    pub seed: u64,
}

impl Default for ObsSettings {
    fn default() -> Self {
        Self {
            layout: Layout::Grid,
            n: 0,
            noise: 0.0,
            phys_noise: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub interior: Vec<OperatorTerm>,
    pub forcing: CoefficientFn,
    pub boundary: Vec<BoundarySpec>,
    pub truth: Option<CoefficientFn>,
    pub kernel: KernelSpec,
    pub temperatures: Temperatures,
    pub quad: QuadSettings,
    pub obs: ObsSettings,
}

/// Physics nodes with their noise-free targets (`g` inside, `h` on segments).
#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub nodes: PhysicsNodes,
    pub targets: Vec<f64>,
}

type Token<'a> = (usize, &'a str);

struct Line<'a> {
    number: usize,
    text: &'a str,
    tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn new(number: usize, raw: &'a str) -> Self {
        let text = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    tokens.push((s + 1, &text[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push((s + 1, &text[s..]));
        }
        Self { number, text, tokens }
    }

    fn err(&self, column: usize, message: impl Into<String>) -> SpecError {
        SpecError::new(self.number, column, message)
    }

    /// Text from the given 1-based column to the end of the line.
    fn tail(&self, column: usize) -> &'a str {
        self.text[column - 1..].trim_end()
    }
}

struct Parser<'p> {
    params: &'p [(&'p str, f64)],
}

impl Parser<'_> {
    fn expr(&self, line: &Line, column: usize, text: &str, dim: usize) -> Result<CoefficientFn, SpecError> {
        let parsed = Expr::parse(text).map_err(|e| match e {
            pile_core::Error::Syntax { column: c, message } => line.err(column + c - 1, message),
            other => line.err(column, other.to_string()),
        })?;
        CoefficientFn::new(parsed.bind(self.params), dim).map_err(|e| match e {
            pile_core::Error::DimensionMismatch { got, .. } => {
                line.err(column, format!("coordinate x{got} out of range for dimension {dim}"))
            }
            other => line.err(column, other.to_string()),
        })
    }

    fn value(&self, line: &Line, (column, text): Token) -> Result<f64, SpecError> {
        if let Ok(v) = text.parse::<f64>() {
            return Ok(v);
        }
        let f = self.expr(line, column, text, 0)?;
        f.as_constant().ok_or_else(|| line.err(column, format!("`{text}` is not a constant")))
    }

    fn count(&self, line: &Line, (column, text): Token) -> Result<usize, SpecError> {
        text.parse().map_err(|_| line.err(column, format!("expected a non-negative integer, got `{text}`")))
    }
}

/// `key=value` arguments, checked against the allowed keys.
fn pairs<'a>(line: &Line<'a>, allowed: &[&str]) -> Result<Vec<(&'a str, Token<'a>)>, SpecError> {
    let mut out: Vec<(&str, Token)> = Vec::new();
    for &(column, text) in &line.tokens[1..] {
        let (key, value) = text.split_once('=').ok_or_else(|| line.err(column, format!("expected key=value, got `{text}`")))?;
        if !allowed.contains(&key) {
            return Err(line.err(column, format!("unknown key `{key}` (expected one of {})", allowed.join(", "))));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(line.err(column, format!("duplicate key `{key}`")));
        }
        if value.is_empty() {
            return Err(line.err(column + key.len() + 1, format!("missing value for `{key}`")));
        }
        out.push((key, (column + key.len() + 1, value)));
    }
    Ok(out)
}

fn lookup<'a>(pairs: &[(&str, Token<'a>)], key: &str) -> Option<Token<'a>> {
    pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn require<'a>(line: &Line, pairs: &[(&str, Token<'a>)], key: &str) -> Result<Token<'a>, SpecError> {
    lookup(pairs, key).ok_or_else(|| line.err(1, format!("missing required key `{key}`")))
}

const KEYWORDS: [&str; 9] = ["domain", "op", "forcing", "bc", "truth", "kernel", "temps", "quad", "obs"];

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        Self::parse_with(text, &[])
    }

    /// Parses with named parameters bound to values.
    pub fn parse_with(text: &str, params: &[(&str, f64)]) -> Result<Self, SpecError> {
        let p = Parser { params };
        let lines: Vec<Line> = text
            .lines()
            .enumerate()
            .map(|(i, l)| Line::new(i + 1, l))
            .filter(|l| !l.tokens.is_empty())
            .collect();
        for line in &lines {
            let (column, word) = line.tokens[0];
            if !KEYWORDS.contains(&word) {
                return Err(line.err(column, format!("unknown stanza `{word}`")));
            }
        }
        let singleton = |word: &str| -> Result<Option<&Line>, SpecError> {
            let mut found = lines.iter().filter(|l| l.tokens[0].1 == word);
            let first = found.next();
            if let Some(dup) = found.next() {
                return Err(dup.err(1, format!("duplicate `{word}` stanza")));
            }
            Ok(first)
        };
        let missing = |word: &str| SpecError::new(lines.last().map_or(1, |l| l.number), 1, format!("missing `{word}` stanza"));

        let domain_line = singleton("domain")?.ok_or_else(|| missing("domain"))?;
        let domain = parse_domain(&p, domain_line)?;
        let dim = domain.dim();

        let mut interior = Vec::new();
        let mut boundary: Vec<BoundarySpec> = Vec::new();
        for line in &lines {
            match line.tokens[0].1 {
                "op" => interior.extend(parse_op(&p, line, dim)?),
                "bc" => {
                    let bc = parse_bc(&p, line, &domain)?;
                    if boundary.iter().any(|b| b.segment == bc.segment) {
                        return Err(line.err(line.tokens[1].0, format!("segment `{}` already has a condition", bc.segment)));
                    }
                    boundary.push(bc);
                }
                _ => {}
            }
        }
        if interior.is_empty() {
            return Err(missing("op"));
        }
        let interior = canonical(&interior, dim);

        let forcing = match singleton("forcing")? {
            Some(l) => p.expr(l, l.tokens.get(1).ok_or_else(|| l.err(l.text.len() + 1, "missing expression"))?.0, l.tail(l.tokens[1].0), dim)?,
            None => CoefficientFn::constant(0.0),
        };
        let truth = match singleton("truth")? {
            Some(l) => Some(p.expr(l, l.tokens.get(1).ok_or_else(|| l.err(l.text.len() + 1, "missing expression"))?.0, l.tail(l.tokens[1].0), dim)?),
            None => None,
        };
        let kernel = parse_kernel(&p, singleton("kernel")?.ok_or_else(|| missing("kernel"))?, dim)?;
        let temperatures = parse_temps(&p, singleton("temps")?.ok_or_else(|| missing("temps"))?)?;
        let quad = parse_quad(&p, singleton("quad")?.ok_or_else(|| missing("quad"))?)?;
        let obs = match singleton("obs")? {
            Some(l) => parse_obs(&p, l)?,
            None => ObsSettings::default(),
        };
        let spec = Self {
            domain,
            interior,
            forcing,
            boundary,
            truth,
            kernel,
            temperatures,
            quad,
            obs,
        };
        spec.operator().map_err(|e| SpecError::new(1, 1, e.to_string()))?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn operator(&self) -> pile_core::Result<OperatorSpec> {
        let mut entries = Vec::new();
        for bc in &self.boundary {
            let id = self.domain.segment_id(&bc.segment)?;
            entries.extend(make_boundary_operator(&self.domain, bc.kind, id)?);
        }
        OperatorSpec::new(&self.domain, self.interior.clone(), entries)
    }

    pub fn interior_rule(&self) -> pile_core::Result<QuadratureRule> {
        interior_rule(&self.domain, self.quad.per_axis, self.quad.mode)
    }

    /// Interior nodes carrying `D`, then one rule per boundary condition in
    /// declaration order.
    pub fn physics(&self) -> pile_core::Result<Physics> {
        let op = self.operator()?;
        let mut rules = vec![self.interior_rule()?];
        if self.quad.boundary > 0 {
            for bc in &self.boundary {
                let id = self.domain.segment_id(&bc.segment)?;
                rules.push(boundary_rule(&self.domain, id, self.quad.boundary, self.quad.mode)?);
            }
        }
        let nodes = PhysicsNodes::from_rules(&op, &rules, false)?;
        let targets = (0..nodes.len())
            .map(|j| {
                let z = nodes.points().point(j);
                match nodes.regions()[j] {
                    Region::Interior => self.forcing.eval(z),
                    Region::Segment(id) => {
                        let name = &self.domain.segment(id).expect("node on a known segment").name;
                        let bc = self.boundary.iter().find(|b| &b.segment == name).expect("rule built from a condition");
                        if bc.kind == BoundaryKind::Cauchy && !is_identity(nodes.operator(j)) {
                            0.0
                        } else {
                            bc.data.eval(z)
                        }
                    }
                }
            })
            .collect();
        Ok(Physics { nodes, targets })
    }

    pub fn observation_points(&self) -> pile_core::Result<PointSet> {
        match self.obs.layout {
            Layout::Grid => Ok(self.interior_rule()?.points().clone()),
            Layout::Uniform => Ok(monte_carlo(self.obs.n, &self.domain, self.obs.seed, false)?.points().clone()),
        }
    }

    /// Noisy observations of `truth` at `points` and noisy physics targets.
    /// Physics noise is added at interior nodes only; boundary data stays exact.
    pub fn simulate(&self, truth: &dyn Fn(&[f64]) -> f64, points: &PointSet, physics: &Physics, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let y = points.iter().map(|x| truth(x) + self.obs.noise * normal()).collect();
        let r = self.perturb(physics, &mut normal);
        Dataset { y, r }
    }

    /// Physics targets alone, for observations read from a file.
    pub fn simulate_targets(&self, physics: &Physics, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        self.perturb(physics, &mut || StandardNormal.sample(&mut rng))
    }

    fn perturb(&self, physics: &Physics, normal: &mut dyn FnMut() -> f64) -> Vec<f64> {
        physics
            .targets
            .iter()
            .zip(physics.nodes.regions())
            .map(|(t, region)| match region {
                Region::Interior => t + self.obs.phys_noise * normal(),
                Region::Segment(_) => *t,
            })
            .collect()
    }
}

/// Operator terms in `op` syntax, several forms separated by `;`
/// (e.g. `(1,0) 1; (0,1) beta`).
pub fn parse_operator(text: &str, dim: usize, params: &[(&str, f64)]) -> Result<Vec<OperatorTerm>, SpecError> {
    let p = Parser { params };
    let mut terms = Vec::new();
    for part in text.split(';') {
        let line_text = format!("op {part}");
        let line = Line::new(1, &line_text);
        if line.tokens.len() < 2 {
            return Err(SpecError::new(1, 1, "empty operator"));
        }
        terms.extend(parse_op(&p, &line, dim)?);
    }
    Ok(canonical(&terms, dim))
}

fn parse_domain(p: &Parser, line: &Line) -> Result<DomainSpec, SpecError> {
    let args = &line.tokens[1..];
    if args.is_empty() || args.len() % 2 != 0 {
        return Err(line.err(line.tokens[0].0, "expected LO HI pairs, one per axis"));
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for pair in args.chunks(2) {
        lower.push(p.value(line, pair[0])?);
        upper.push(p.value(line, pair[1])?);
    }
    DomainSpec::new(lower, upper).map_err(|e| line.err(args[0].0, e.to_string()))
}

fn parse_op(p: &Parser, line: &Line, dim: usize) -> Result<Vec<OperatorTerm>, SpecError> {
    let (column, word) = *line.tokens.get(1).ok_or_else(|| line.err(line.text.len() + 1, "missing operator"))?;
    let no_more = |n: usize| match line.tokens.get(n) {
        Some(&(c, t)) => Err(line.err(c, format!("unexpected `{t}`"))),
        None => Ok(()),
    };
    match word {
        "laplacian" => no_more(2).map(|_| operators::laplacian(dim)),
        "identity" => no_more(2).map(|_| operators::identity(dim)),
        "transport" => {
            if dim != 2 {
                return Err(line.err(column, "transport needs a 2-D domain"));
            }
            let beta = p.value(line, *line.tokens.get(2).ok_or_else(|| line.err(line.text.len() + 1, "missing speed"))?)?;
            no_more(3).map(|_| operators::transport(beta))
        }
        _ if word.starts_with('(') => {
            let index = parse_index(line, column, word, dim)?;
            let &(ec, _) = line.tokens.get(2).ok_or_else(|| line.err(line.text.len() + 1, "missing coefficient"))?;
            let coefficient = p.expr(line, ec, line.tail(ec), dim)?;
            Ok(vec![OperatorTerm::new(index, coefficient)])
        }
        other => Err(line.err(column, format!("unknown operator `{other}`"))),
    }
}

fn parse_index(line: &Line, column: usize, word: &str, dim: usize) -> Result<MultiIndex, SpecError> {
    let inner = word
        .strip_prefix('(')
        .and_then(|w| w.strip_suffix(')'))
        .ok_or_else(|| line.err(column, format!("malformed multi-index `{word}`")))?;
    let entries: Vec<u32> = inner
        .split(',')
        .map(|e| e.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| line.err(column, format!("malformed multi-index `{word}`")))?;
    if entries.len() != dim {
        return Err(line.err(column, format!("multi-index `{word}` has {} entries, domain has {dim} axes", entries.len())));
    }
    MultiIndex::new(entries).map_err(|e| line.err(column, e.to_string()))
}

fn parse_bc(p: &Parser, line: &Line, domain: &DomainSpec) -> Result<BoundarySpec, SpecError> {
    let end = line.text.len() + 1;
    let &(sc, segment) = line.tokens.get(1).ok_or_else(|| line.err(end, "missing segment"))?;
    domain.segment_id(segment).map_err(|e| line.err(sc, e.to_string()))?;
    let &(kc, kind_name) = line.tokens.get(2).ok_or_else(|| line.err(end, "missing condition kind"))?;
    let mut next = 3;
    let mut params = Vec::new();
    if kind_name == "robin" {
        for _ in 0..2 {
            let tok = *line.tokens.get(next).ok_or_else(|| line.err(end, "robin needs coefficients A B"))?;
            params.push(p.value(line, tok)?);
            next += 1;
        }
    }
    let kind = BoundaryKind::from_name(kind_name, &params).map_err(|e| line.err(kc, e.to_string()))?;
    let data = match line.tokens.get(next) {
        None => CoefficientFn::constant(0.0),
        Some(&(c, "=")) => {
            let &(ec, _) = line.tokens.get(next + 1).ok_or_else(|| line.err(end, "missing boundary data after `=`"))?;
            let _ = c;
            p.expr(line, ec, line.tail(ec), domain.dim())?
        }
        Some(&(c, t)) => return Err(line.err(c, format!("expected `=` before boundary data, got `{t}`"))),
    };
    Ok(BoundarySpec {
        segment: segment.to_string(),
        kind,
        data,
    })
}

fn positive(line: &Line, (column, key): (usize, &str), v: f64) -> Result<f64, SpecError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(line.err(column, format!("`{key}` must be positive and finite, got {v}")))
    }
}

fn parse_kernel(p: &Parser, line: &Line, dim: usize) -> Result<KernelSpec, SpecError> {
    let &(fc, family) = line.tokens.get(1).ok_or_else(|| line.err(line.text.len() + 1, "missing kernel family"))?;
    let rest = Line {
        number: line.number,
        text: line.text,
        tokens: line.tokens[1..].to_vec(),
    };
    let result = match family {
        "rbf" => {
            let args = pairs(&rest, &["h"])?;
            let h = require(line, &args, "h")?;
            KernelSpec::rbf(dim, positive(line, (h.0, "h"), p.value(line, h)?)?)
        }
        "aniso" => {
            let args = pairs(&rest, &["theta", "s", "scale"])?;
            let theta = p.value(line, require(line, &args, "theta")?)?;
            let s = require(line, &args, "s")?;
            let s = positive(line, (s.0, "s"), p.value(line, s)?)?;
            let scale = match lookup(&args, "scale") {
                Some(t) => positive(line, (t.0, "scale"), p.value(line, t)?)?,
                None => 1.0,
            };
            KernelSpec::new(dim, KernelFamily::Anisotropic { theta, s, scale })
        }
        other => return Err(line.err(fc, format!("unknown kernel family `{other}`"))),
    };
    result.map_err(|e| line.err(fc, e.to_string()))
}

fn parse_temps(p: &Parser, line: &Line) -> Result<Temperatures, SpecError> {
    let args = pairs(line, &["gamma", "rho", "eta"])?;
    let get = |key: &'static str| -> Result<f64, SpecError> {
        let tok = require(line, &args, key)?;
        positive(line, (tok.0, key), p.value(line, tok)?)
    };
    Ok(Temperatures {
        gamma: get("gamma")?,
        rho: get("rho")?,
        eta: get("eta")?,
    })
}

fn parse_quad(p: &Parser, line: &Line) -> Result<QuadSettings, SpecError> {
    let args = pairs(line, &["m", "mode", "boundary"])?;
    let m = require(line, &args, "m")?;
    let per_axis = p.count(line, m)?;
    if per_axis == 0 {
        return Err(line.err(m.0, "`m` must be at least 1"));
    }
    let mode = match lookup(&args, "mode") {
        None | Some((_, "corrected")) => WeightMode::Corrected,
        Some((_, "uniform")) => WeightMode::Uniform,
        Some((c, other)) => return Err(line.err(c, format!("unknown weight mode `{other}`"))),
    };
    let boundary = match lookup(&args, "boundary") {
        Some(t) => p.count(line, t)?,
        None => 0,
    };
    Ok(QuadSettings { per_axis, mode, boundary })
}

fn parse_obs(p: &Parser, line: &Line) -> Result<ObsSettings, SpecError> {
    let args = pairs(line, &["layout", "n", "noise", "phys_noise", "seed"])?;
    let mut obs = ObsSettings::default();
    if let Some((c, layout)) = lookup(&args, "layout") {
        obs.layout = match layout {
            "grid" => Layout::Grid,
            "uniform" => Layout::Uniform,
            other => return Err(line.err(c, format!("unknown layout `{other}`"))),
        };
    }
    if let Some(t) = lookup(&args, "n") {
        obs.n = p.count(line, t)?;
    }
    for (key, slot) in [("noise", &mut obs.noise), ("phys_noise", &mut obs.phys_noise)] {
        if let Some(t) = lookup(&args, key) {
            let v = p.value(line, t)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(line.err(t.0, format!("`{key}` must be non-negative")));
            }
            *slot = v;
        }
    }
    if let Some((c, text)) = lookup(&args, "seed") {
        obs.seed = text.parse().map_err(|_| line.err(c, format!("invalid seed `{text}`")))?;
    }
    if obs.layout == Layout::Uniform && obs.n == 0 {
        return Err(line.err(1, "uniform layout needs n >= 1"));
    }
    Ok(obs)
}

/// Re-parses coefficients from their printed form so that specs built from
/// shorthands compare equal to their round-tripped text.
fn canonical(terms: &[OperatorTerm], dim: usize) -> Vec<OperatorTerm> {
    terms
        .iter()
        .map(|t| {
            let coefficient = CoefficientFn::parse(&t.coefficient.to_string(), dim).expect("printed coefficients parse");
            OperatorTerm::new(t.index.clone(), coefficient)
        })
        .collect()
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("domain")?;
        for (lo, hi) in self.domain.lower().iter().zip(self.domain.upper()) {
            write!(f, " {lo} {hi}")?;
        }
        writeln!(f)?;
        for t in &self.interior {
            writeln!(f, "op {} {}", t.index, t.coefficient)?;
        }
        if !self.forcing.is_zero() {
            writeln!(f, "forcing {}", self.forcing)?;
        }
        for bc in &self.boundary {
            let kind = match bc.kind {
                BoundaryKind::Dirichlet => "dirichlet".to_string(),
                BoundaryKind::Neumann => "neumann".to_string(),
                BoundaryKind::Robin { a, b } => format!("robin {a} {b}"),
                BoundaryKind::Cauchy => "cauchy".to_string(),
            };
            writeln!(f, "bc {} {kind} = {}", bc.segment, bc.data)?;
        }
        if let Some(t) = &self.truth {
            writeln!(f, "truth {t}")?;
        }
        match self.kernel.family() {
            KernelFamily::Rbf { h } => writeln!(f, "kernel rbf h={h}")?,
            KernelFamily::Anisotropic { theta, s, scale } => writeln!(f, "kernel aniso theta={theta} s={s} scale={scale}")?,
        }
        let t = self.temperatures;
        writeln!(f, "temps gamma={} rho={} eta={}", t.gamma, t.rho, t.eta)?;
        let mode = match self.quad.mode {
            WeightMode::Corrected => "corrected",
            WeightMode::Uniform => "uniform",
        };
        writeln!(f, "quad m={} mode={mode} boundary={}", self.quad.per_axis, self.quad.boundary)?;
        let o = self.obs;
        let layout = match o.layout {
            Layout::Grid => "grid",
            Layout::Uniform => "uniform",
        };
        writeln!(f, "obs layout={layout} n={} noise={} phys_noise={} seed={}", o.n, o.noise, o.phys_noise, o.seed)
    }
}
