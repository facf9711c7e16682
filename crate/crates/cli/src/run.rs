//! Command dispatch and report rendering.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fivebrane::bundle_model::{Bundle, Field};
use fivebrane::char_calc::{ch_expand, Validity};
use fivebrane::cover_cohomology::{betti_numbers, betti_table, rational_cover_cohomology, Series};
use fivebrane::cs_forms::verify_transgression;
use fivebrane::obstruction::{
    anomaly_polynomial, count_structures, evaluate_anomaly, structure_ladder, AnomalyModel,
    FivebraneNorm, LadderMode, LadderOptions, Level, LevelReport, ObstructionReport,
};
use fivebrane::par::{self, Execution};

use crate::document::{self, InputDocument, Model};

#[derive(Parser, Debug)]
#[command(
    name = "fivebrane",
    version,
    about = "Characteristic classes, anomaly polynomials and the String/Fivebrane obstruction ladder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Human-readable text, a `[result]` key-value block, or both.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Kv,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the oriented/spin/string/fivebrane ladder on a document.
    Check(CheckArgs),
    /// Evaluate an anomaly polynomial on the document's bundles.
    Anomaly(AnomalyArgs),
    /// Rational cohomology of a Whitehead-tower stage of BU or BSO.
    Covers(CoversArgs),
    /// Verify dT = Tr(F^j) for the document's connection.
    CsVerify(CsVerifyArgs),
    /// ch_k in terms of Chern classes.
    ChExpand(ChExpandArgs),
    /// The group acting on String or Fivebrane structures.
    Count(CountArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct BundleChoice {
    /// Real bundle playing TX (default: `TX`, else the only real bundle).
    #[arg(long)]
    pub tangent: Option<String>,
    /// Complex gauge bundle E (default: `E`, else the only complex bundle).
    #[arg(long)]
    pub gauge: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[arg(required_unless_present = "all")]
    pub input: Option<PathBuf>,
    /// Check every `.fb` document in a directory.
    #[arg(long, conflicts_with = "input")]
    pub all: Option<PathBuf>,
    #[command(flatten)]
    pub bundles: BundleChoice,
    /// manifold or pair (default: pair when --gauge is given).
    #[arg(long)]
    pub mode: Option<LadderMode>,
    /// Fivebrane normalization: six or fortyeight.
    #[arg(long)]
    pub norm: Option<FivebraneNorm>,
    /// Exit 0 even when a level is obstructed.
    #[arg(long)]
    pub report_only: bool,
}

#[derive(Args, Debug, Clone)]
pub struct AnomalyArgs {
    pub input: PathBuf,
    /// gs, iia, heterotic or reduced.
    #[arg(long)]
    pub model: AnomalyModel,
    #[command(flatten)]
    pub bundles: BundleChoice,
}

#[derive(Args, Debug, Clone)]
pub struct CoversArgs {
    /// bu or bso.
    #[arg(long)]
    pub series: Series,
    /// A number n (π below n killed) or, for bso, o, so, spin, string, fivebrane.
    #[arg(long)]
    pub stage: String,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(0..=64))]
    pub maxdeg: u32,
}

#[derive(Args, Debug, Clone)]
pub struct CsVerifyArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub j: u32,
    /// Connection to use (default: the only one).
    #[arg(long)]
    pub connection: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ChExpandArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=16))]
    pub k: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CountLevel {
    String,
    Fivebrane,
}

#[derive(Args, Debug, Clone)]
pub struct CountArgs {
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub level: CountLevel,
    /// Space to use (default: the only one).
    #[arg(long)]
    pub space: Option<String>,
    /// A class generating the image to quotient by; repeatable.
    #[arg(long)]
    pub image: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Obstructed = 1,
    InputError = 2,
    Internal = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// A `[result]` block: optional section name and entries.
pub type Block = (String, Vec<(String, String)>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandResult {
    pub status: Status,
    pub human: String,
    pub machine: Vec<Block>,
}

impl CommandResult {
    fn new(status: Status, human: String, entries: Vec<(String, String)>) -> Self {
        Self {
            status,
            human,
            machine: vec![(String::new(), entries)],
        }
    }

    fn input_error(command: &str, message: String) -> Self {
        Self::failure(Status::InputError, command, message)
    }

    fn failure(status: Status, command: &str, message: String) -> Self {
        let kind = if status == Status::Internal {
            "internal error"
        } else {
            "input error"
        };
        Self::new(
            status,
            format!("error: {message}\n"),
            vec![
                kv("command", command),
                kv("status", kind),
                kv("error", &message),
            ],
        )
    }

    /// The `[result]` text; it parses with [`document::parse`].
    pub fn machine_text(&self) -> String {
        let mut out = String::new();
        for (i, (name, entries)) in self.machine.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if name.is_empty() {
                out.push_str("[result]\n");
            } else {
                out.push_str(&format!("[result {name}]\n"));
            }
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.human.clone(),
            Format::Kv => self.machine_text(),
            Format::Both => format!("{}\n{}", self.human, self.machine_text()),
        }
    }
}

/// Values may not contain comment markers or line breaks, and may not be empty.
fn kv(key: &str, value: &str) -> (String, String) {
    let clean: String = value
        .chars()
        .map(|c| if c == '#' || c.is_control() { ' ' } else { c })
        .collect();
    let clean = clean.trim();
    let clean = if clean.is_empty() { "none" } else { clean };
    (key.to_string(), clean.to_string())
}

pub fn execute(cli: &Cli) -> CommandResult {
    match &cli.command {
        Command::Check(a) => match &a.all {
            Some(dir) => batch(dir, a),
            None => with_document(
                a.input.as_deref().expect("required by clap"),
                "check",
                |d| check(d, a),
            ),
        },
        Command::Anomaly(a) => with_document(&a.input, "anomaly", |d| anomaly(d, a)),
        Command::Covers(a) => covers(a),
        Command::CsVerify(a) => with_document(&a.input, "cs-verify", |d| cs_verify(d, a)),
        Command::ChExpand(a) => ch_expand_cmd(a),
        Command::Count(a) => with_document(&a.input, "count", |d| count(d, a)),
    }
}

fn with_document(
    path: &Path,
    command: &str,
    f: impl FnOnce(&InputDocument) -> CommandResult,
) -> CommandResult {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return CommandResult::input_error(command, format!("{}: {e}", path.display())),
    };
    match document::parse_bytes(&bytes) {
        Ok(doc) => f(&doc),
        Err(d) => CommandResult::input_error(command, format!("{}: {d}", path.display())),
    }
}

fn pick<'a>(
    model: &'a Model,
    name: Option<&str>,
    default: &str,
    field: Field,
) -> Result<Option<&'a Bundle>, String> {
    if let Some(n) = name {
        let b = model
            .bundle(n)
            .ok_or_else(|| format!("no bundle named `{n}`"))?;
        if b.field != field {
            return Err(format!("bundle `{n}` is {}, expected {field}", b.field));
        }
        return Ok(Some(b));
    }
    if let Some(b) = model.bundle(default).filter(|b| b.field == field) {
        return Ok(Some(b));
    }
    let mut of_field = model.bundles.iter().filter(|b| b.field == field);
    match (of_field.next(), of_field.next()) {
        (Some(b), None) => Ok(Some(b)),
        (None, _) => Ok(None),
        (Some(_), Some(_)) => Err(format!("several {field} bundles; choose one by name")),
    }
}

fn select<'a>(
    model: &'a Model,
    choice: &BundleChoice,
    want_gauge: bool,
) -> Result<(&'a Bundle, Option<&'a Bundle>), String> {
    let tx = pick(model, choice.tangent.as_deref(), "TX", Field::Real)?
        .ok_or("no real bundle to use as TX")?;
    let e = if want_gauge {
        pick(model, choice.gauge.as_deref(), "E", Field::Complex)?
    } else {
        None
    };
    if let Some(e) = e {
        if e.base != tx.base {
            return Err(format!(
                "`{}` and `{}` live over different spaces",
                tx.name, e.name
            ));
        }
    }
    Ok((tx, e))
}

fn check(doc: &InputDocument, args: &CheckArgs) -> CommandResult {
    let mode = args.mode.unwrap_or(if args.bundles.gauge.is_some() {
        LadderMode::Pair
    } else {
        LadderMode::Manifold
    });
    let (tx, e) = match select(doc.model(), &args.bundles, mode == LadderMode::Pair) {
        Ok(x) => x,
        Err(m) => return CommandResult::input_error("check", m),
    };
    let options = LadderOptions {
        mode,
        normalization: args.norm,
    };
    let report = match structure_ladder(tx, e, options) {
        Ok(r) => r,
        Err(err) => return CommandResult::input_error("check", err.to_string()),
    };
    if !report.is_monotone() {
        return CommandResult::failure(
            Status::Internal,
            "check",
            "ladder report is not monotone".into(),
        );
    }
    let obstructed = report.any_obstructed();
    let status = if obstructed && !args.report_only {
        Status::Obstructed
    } else {
        Status::Ok
    };
    let mut res = render_ladder(&report, tx, e);
    res.status = status;
    res.machine[0]
        .1
        .push(kv("status", if obstructed { "obstructed" } else { "ok" }));
    res
}

fn render_ladder(report: &ObstructionReport, tx: &Bundle, e: Option<&Bundle>) -> CommandResult {
    let mut human = format!(
        "structure ladder for {}{} over {} ({} mode, fivebrane normalization {})\n",
        tx.name,
        e.map(|e| format!(" with {}", e.name)).unwrap_or_default(),
        tx.base.name(),
        report.mode,
        report.normalization
    );
    let mut m = vec![
        kv("command", "check"),
        kv("space", tx.base.name()),
        kv("tangent", &tx.name),
        kv("gauge", e.map_or("none", |e| e.name.as_str())),
        kv("mode", &report.mode.to_string()),
        kv("normalization", &report.normalization.to_string()),
    ];
    for l in &report.levels {
        level_lines(l, &mut human, &mut m);
    }
    CommandResult::new(Status::Ok, human, m)
}

fn level_lines(l: &LevelReport, human: &mut String, m: &mut Vec<(String, String)>) {
    let p = l.level.as_str();
    human.push_str(&format!("  {:<10} {}\n", p, l.verdict));
    m.push(kv(&format!("{p}.verdict"), l.verdict.as_str()));
    let mut detail = |label: &str, key: &str, value: String| {
        human.push_str(&format!("      {label}: {value}\n"));
        m.push(kv(&format!("{p}.{key}"), &value));
    };
    if let Some(o) = &l.obstruction {
        detail("obstruction", "obstruction", o.render());
    }
    if let Some(c) = &l.obstruction_class {
        detail("obstruction class", "obstruction_class", c.render());
    }
    if let Some(n) = &l.fractional_class_solutions {
        let what = if l.level == Level::String {
            "solutions of 2y = p1"
        } else {
            "solutions of 6y = p2"
        };
        detail(what, "solutions", n.to_string());
    }
    if let Some(t) = &l.torsor {
        detail("structures", "torsor", t.to_string());
    }
    if l.validity != Validity::Exact {
        detail("validity", "validity", l.validity.as_str().to_string());
    }
    if let Some(n) = &l.note {
        detail("note", "note", n.clone());
    }
}

fn batch(dir: &Path, args: &CheckArgs) -> CommandResult {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "fb"))
            .collect(),
        Err(e) => return CommandResult::input_error("check", format!("{}: {e}", dir.display())),
    };
    files.sort();
    let results = par::map(Execution::default(), &files, |path| {
        with_document(path, "check", |d| check(d, args))
    });
    let mut out = CommandResult {
        status: Status::Ok,
        human: String::new(),
        machine: Vec::new(),
    };
    for (path, r) in files.iter().zip(results) {
        out.status = out.status.max(r.status);
        out.human
            .push_str(&format!("== {} ==\n{}", path.display(), r.human));
        let stem = path
            .file_stem()
            .map(|s| {
                s.to_string_lossy()
                    .replace(|c: char| !c.is_ascii_graphic() || c == ']' || c == '#', "_")
            })
            .unwrap_or_default();
        for (_, mut entries) in r.machine {
            entries.insert(0, kv("file", &path.display().to_string()));
            out.machine.push((stem.clone(), entries));
        }
    }
    if files.is_empty() {
        out.human = format!("no .fb documents in {}\n", dir.display());
        out.machine.push((
            String::new(),
            vec![kv("command", "check"), kv("files", "0")],
        ));
    }
    out
}

fn anomaly(doc: &InputDocument, args: &AnomalyArgs) -> CommandResult {
    let wants_gauge = args.model != AnomalyModel::TypeIiaDual;
    let (tx, e) = match select(doc.model(), &args.bundles, wants_gauge) {
        Ok(x) => x,
        Err(m) => return CommandResult::input_error("anomaly", m),
    };
    let poly = anomaly_polynomial(args.model);
    let eval = match evaluate_anomaly(args.model, tx, e) {
        Ok(v) => v,
        Err(err) => return CommandResult::input_error("anomaly", err.to_string()),
    };
    let n = poly.normalization;
    let lhs = format!("d{}", n.field);
    let rhs = match n.two_pi_power {
        0 => poly.value.render(),
        1 => format!("2*pi*({})", poly.value.render()),
        k => format!("(2*pi)^{k}*({})", poly.value.render()),
    };
    let integral = if eval.is_integral() { "yes" } else { "no" };
    let mut human = format!("model {}: {lhs} = {rhs}\n", args.model);
    human.push_str(&format!(
        "  evaluated on {}{}: {}\n",
        tx.name,
        e.map(|e| format!(", {}", e.name)).unwrap_or_default(),
        eval.value.render()
    ));
    human.push_str(&format!("  free part: {}\n", eval.value.render_free()));
    human.push_str(&format!(
        "  integral: {integral}\n  integral solutions: {}\n",
        eval.integral_solutions
    ));
    if let Some(c) = &eval.integral {
        human.push_str(&format!("  integral class: {}\n", c.render()));
    }
    human.push_str(&format!(
        "  vanishes: {}\n",
        if eval.vanishes() { "yes" } else { "no" }
    ));
    if eval.validity != Validity::Exact {
        human.push_str(&format!("  validity: {}\n", eval.validity.as_str()));
    }
    let mut m = vec![
        kv("command", "anomaly"),
        kv("model", args.model.as_str()),
        kv("polynomial", &poly.value.render()),
        kv("field", &lhs),
        kv("two_pi_power", &n.two_pi_power.to_string()),
        kv("value", &eval.value.render()),
        kv("free_part", &eval.value.render_free()),
        kv("integral", integral),
        kv("integral_solutions", &eval.integral_solutions.to_string()),
        kv("vanishes", if eval.vanishes() { "yes" } else { "no" }),
        kv("validity", eval.validity.as_str()),
    ];
    if let Some(c) = &eval.integral {
        m.push(kv("integral_class", &c.render()));
    }
    m.push(kv("status", "ok"));
    CommandResult::new(Status::Ok, human, m)
}

fn covers(args: &CoversArgs) -> CommandResult {
    let stage = match args.series.parse_stage(&args.stage) {
        Ok(s) => s,
        Err(e) => return CommandResult::input_error("covers", e.to_string()),
    };
    let ring = match rational_cover_cohomology(args.series, stage, args.maxdeg) {
        Ok(r) => r,
        Err(e) => return CommandResult::input_error("covers", e.to_string()),
    };
    let table = betti_table(&ring, args.maxdeg);
    // Independent count straight from the generating function.
    let oracle = betti_numbers(&ring.degrees(), args.maxdeg);
    if table.iter().any(|(&d, &b)| oracle[d as usize] != b) {
        return CommandResult::failure(
            Status::Internal,
            "covers",
            "Betti table disagrees with the generating function".into(),
        );
    }
    let mut human = format!("H*({}<{}>; Q) = {}\n", args.series, stage, ring.render());
    for s in &ring.steps {
        human.push_str(&format!(
            "  killed {} (fibre K(Q,{}))\n",
            s.killed, s.fibre_degree
        ));
    }
    human.push_str(&format!("  {:>6}  {:>6}\n", "degree", "betti"));
    for (d, b) in &table {
        if *b > 0 {
            human.push_str(&format!("  {d:>6}  {b:>6}\n"));
        }
    }
    let gens: Vec<&str> = ring.generators.iter().map(|(n, _)| n.as_str()).collect();
    let killed: Vec<&str> = ring.steps.iter().map(|s| s.killed.as_str()).collect();
    let mut m = vec![
        kv("command", "covers"),
        kv("series", &args.series.to_string()),
        kv("stage", &stage.to_string()),
        kv("max_degree", &args.maxdeg.to_string()),
        kv("ring", &ring.render()),
        kv("generators", &gens.join(", ")),
        kv("killed", &killed.join(", ")),
    ];
    for (d, b) in &table {
        m.push(kv(&format!("betti.{d}"), &b.to_string()));
    }
    m.push(kv("status", "ok"));
    CommandResult::new(Status::Ok, human, m)
}

fn cs_verify(doc: &InputDocument, args: &CsVerifyArgs) -> CommandResult {
    let model = doc.model();
    let conn = match &args.connection {
        Some(n) => model.connection(n),
        None if model.connections.len() == 1 => model.connections.first(),
        None => None,
    };
    let Some(conn) = conn else {
        let m = match &args.connection {
            Some(n) => format!("no connection named `{n}`"),
            None => format!(
                "expected exactly one connection, found {}",
                model.connections.len()
            ),
        };
        return CommandResult::input_error("cs-verify", m);
    };
    let j = args.j;
    let check = match verify_transgression(&conn.form, j, Execution::default()) {
        Ok(c) => c,
        Err(e) => return CommandResult::input_error("cs-verify", e.to_string()),
    };
    let t = &check.transgression;
    let verdict = if check.exact { "exact" } else { "FAILED" };
    let odd = 2 * j - 1;
    let mut human = format!(
        "connection {} on patch {} (dimension {}, matrix size {})\n",
        conn.name,
        conn.patch,
        conn.form.dim(),
        conn.form.size()
    );
    human.push_str(&format!("  T{odd} = {}\n", t.unnormalized_form));
    human.push_str(&format!("  Tr(F^{j}) = {}\n", check.character.trace_power));
    human.push_str(&format!("  CS{odd} = {} * T{odd}\n", t.prefactor));
    human.push_str(&format!("dT{odd} = Tr(F^{j}): {verdict}\n"));
    let m = vec![
        kv("command", "cs-verify"),
        kv("connection", &conn.name),
        kv("j", &j.to_string()),
        kv("transgression", &t.unnormalized_form.render()),
        kv("character", &check.character.trace_power.render()),
        kv("prefactor", &t.prefactor.to_string()),
        kv("integral_prefactor", &t.integral_prefactor.to_string()),
        kv("identity", verdict),
        kv("status", if check.exact { "ok" } else { "internal error" }),
    ];
    let status = if check.exact {
        Status::Ok
    } else {
        Status::Internal
    };
    CommandResult::new(status, human, m)
}

fn ch_expand_cmd(args: &ChExpandArgs) -> CommandResult {
    let k = args.k;
    match ch_expand(k) {
        Ok(p) => {
            let text = p.render_over_common_denominator();
            let human = format!("ch{k} = {text}\n");
            let m = vec![
                kv("command", "ch-expand"),
                kv("k", &k.to_string()),
                kv(&format!("ch{k}"), &text),
                kv("status", "ok"),
            ];
            CommandResult::new(Status::Ok, human, m)
        }
        Err(e) => CommandResult::input_error("ch-expand", e.to_string()),
    }
}

fn count(doc: &InputDocument, args: &CountArgs) -> CommandResult {
    let model = doc.model();
    let space = match &args.space {
        Some(n) => model.spaces.get(n),
        None if model.spaces.len() == 1 => model.spaces.values().next(),
        None => None,
    };
    let Some(space) = space else {
        return CommandResult::input_error("count", "choose a space with --space".into());
    };
    let (level, degree) = match args.level {
        CountLevel::String => (Level::String, 3),
        CountLevel::Fivebrane => (Level::Fivebrane, 7),
    };
    let mut image = Vec::new();
    for text in &args.image {
        match document::resolve_class(space, degree, text) {
            Ok((c, _)) => image.push(c),
            Err((at, kind, m)) => {
                return CommandResult::input_error(
                    "count",
                    format!("--image `{text}` at offset {at}: {kind}: {m}"),
                )
            }
        }
    }
    let image = (!args.image.is_empty()).then_some(image.as_slice());
    match count_structures(space, level, image) {
        Ok(t) => {
            let human = format!("{level} structures on {}: {t}\n", space.name());
            let m = vec![
                kv("command", "count"),
                kv("space", space.name()),
                kv("level", level.as_str()),
                kv("degree", &degree.to_string()),
                kv("group", &t.group.to_string()),
                kv("upper_bound", if t.upper_bound { "yes" } else { "no" }),
                kv("torsor", &t.to_string()),
                kv("status", "ok"),
            ];
            CommandResult::new(Status::Ok, human, m)
        }
        Err(e) => CommandResult::input_error("count", e.to_string()),
    }
}
