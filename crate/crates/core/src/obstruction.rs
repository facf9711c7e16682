//! Orientation, Spin, String and Fivebrane structures: the lifting ladder, anomaly
//! polynomials and the groups acting on the sets of lifts.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::abelian::{AbelianGroup, GroupError};
use crate::bundle_model::{
    divide_class, division_count, evaluate_poly, BaseSpace, Bundle, BundleError, CohClass, Field,
    RationalClass,
};
use crate::char_calc::Validity;
use crate::graded_ring::{GradedPoly, GradedRing, RingError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ObstructionError {
    #[error("unknown anomaly model `{0}` (expected gs, iia, heterotic or reduced)")]
    UnknownModel(String),
    #[error("`{0}` must be a real bundle")]
    NotReal(String),
    #[error("`{0}` must be a complex bundle")]
    NotComplex(String),
    #[error("designated `{key}` does not satisfy {factor}*{key} = {class}")]
    InconsistentDesignation {
        key: String,
        factor: u32,
        class: String,
    },
    #[error("H{degree} of `{space}` is not presented")]
    MissingDegree { space: String, degree: u32 },
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnomalyModel {
    /// ch₂ − ½p₁, degree 4.
    HeteroticGs,
    /// (p₂ − (½p₁)²)/48.
    TypeIiaDual,
    /// ch₄ − p₁ch₂/48 + p₁²/64 − p₂/48.
    HeteroticDual,
    /// ch₄ − p₂/48.
    Reduced,
}

impl AnomalyModel {
    pub const ALL: [AnomalyModel; 4] = [
        AnomalyModel::HeteroticGs,
        AnomalyModel::TypeIiaDual,
        AnomalyModel::HeteroticDual,
        AnomalyModel::Reduced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyModel::HeteroticGs => "heterotic_gs",
            AnomalyModel::TypeIiaDual => "type_iia_dual",
            AnomalyModel::HeteroticDual => "heterotic_dual",
            AnomalyModel::Reduced => "reduced",
        }
    }

    pub fn degree(self) -> u32 {
        match self {
            AnomalyModel::HeteroticGs => 4,
            _ => 8,
        }
    }

    fn source(self) -> &'static str {
        match self {
            AnomalyModel::HeteroticGs => "ch2 - 1/2*p1",
            AnomalyModel::TypeIiaDual => "(p2 - (1/2*p1)^2)/48",
            AnomalyModel::HeteroticDual => "ch4 - 1/48*p1*ch2 + 1/64*p1^2 - 1/48*p2",
            AnomalyModel::Reduced => "ch4 - 1/48*p2",
        }
    }
}

impl fmt::Display for AnomalyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyModel {
    type Err = ObstructionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gs" | "heterotic_gs" => Ok(AnomalyModel::HeteroticGs),
            "iia" | "type_iia_dual" => Ok(AnomalyModel::TypeIiaDual),
            "heterotic" | "heterotic_dual" => Ok(AnomalyModel::HeteroticDual),
            "reduced" => Ok(AnomalyModel::Reduced),
            other => Err(ObstructionError::UnknownModel(other.to_string())),
        }
    }
}

/// Bookkeeping for the field-strength identity dH = (2π)^k · polynomial. The stored
/// polynomial is always in characteristic-class normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Normalization {
    pub two_pi_power: u32,
    pub field: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnomalyPolynomial {
    pub model: AnomalyModel,
    pub value: GradedPoly,
    pub normalization: Normalization,
}

/// ℚ[p₁, p₂, ch₂, ch₄] truncated at 16.
pub fn anomaly_ring() -> Arc<GradedRing> {
    static RING: OnceLock<Arc<GradedRing>> = OnceLock::new();
    Arc::clone(RING.get_or_init(|| {
        GradedRing::new([("p1", 4), ("p2", 8), ("ch2", 4), ("ch4", 8)], 16).expect("valid ring")
    }))
}

pub fn anomaly_polynomial(model: AnomalyModel) -> AnomalyPolynomial {
    let value = anomaly_ring()
        .parse(model.source())
        .expect("built-in polynomial");
    let normalization = match model {
        AnomalyModel::HeteroticGs => Normalization {
            two_pi_power: 0,
            field: "H3",
        },
        AnomalyModel::TypeIiaDual => Normalization {
            two_pi_power: 0,
            field: "H7",
        },
        AnomalyModel::HeteroticDual | AnomalyModel::Reduced => Normalization {
            two_pi_power: 1,
            field: "H7",
        },
    };
    AnomalyPolynomial {
        model,
        value,
        normalization,
    }
}

impl AnomalyPolynomial {
    pub fn degree(&self) -> u32 {
        self.model.degree()
    }

    /// Drops every monomial that is a product of two or more classes.
    pub fn strip_decomposables(&self) -> AnomalyPolynomial {
        let ring = self.value.ring();
        let mut out = ring.zero();
        for (exps, c) in self.value.terms() {
            if exps.iter().sum::<u32>() <= 1 {
                let mut m = ring.one();
                for (g, e) in ring.generators().iter().zip(exps) {
                    if *e == 1 {
                        m = m
                            .multiply(&ring.generator(&g.name).expect("own generator"))
                            .expect("same ring");
                    }
                }
                out = out.add(&m.scale(c)).expect("same ring");
            }
        }
        AnomalyPolynomial {
            value: out,
            ..self.clone()
        }
    }

    /// Sets the named generators to zero.
    pub fn vanish(&self, names: &[&str]) -> Result<AnomalyPolynomial, RingError> {
        let ring = self.value.ring();
        let bindings = names
            .iter()
            .map(|n| {
                ring.generator(n)?;
                Ok((n.to_string(), ring.zero()))
            })
            .collect::<Result<_, RingError>>()?;
        Ok(AnomalyPolynomial {
            value: self.value.substitute(&bindings)?,
            ..self.clone()
        })
    }
}

/// The anomaly polynomial evaluated on a base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnomalyEvaluation {
    pub model: AnomalyModel,
    pub value: RationalClass,
    /// Integral classes y with value = y; empty when the free part is fractional.
    pub integral_solutions: BigInt,
    /// The integral class when it is unique.
    pub integral: Option<CohClass>,
    pub validity: Validity,
}

impl AnomalyEvaluation {
    pub fn is_integral(&self) -> bool {
        !self.integral_solutions.is_zero()
    }

    pub fn vanishes(&self) -> bool {
        self.value.numerator.is_zero()
    }
}

fn check_pair(tx: &Bundle, e: Option<&Bundle>) -> Result<(), ObstructionError> {
    if tx.field != Field::Real {
        return Err(ObstructionError::NotReal(tx.name.clone()));
    }
    if let Some(e) = e {
        if e.field != Field::Complex {
            return Err(ObstructionError::NotComplex(e.name.clone()));
        }
        if !(Arc::ptr_eq(&tx.base, &e.base) || tx.base == e.base) {
            return Err(
                BundleError::BaseMismatch(tx.base.name().into(), e.base.name().into()).into(),
            );
        }
    }
    Ok(())
}

/// Values for p₁, p₂, ½p₁, ⅙p₂ of `tx` and ch₂, ch₄ of `e` (zero when `e` is absent).
fn class_lookup<'a>(
    tx: &'a Bundle,
    e: Option<&'a Bundle>,
) -> impl Fn(&str) -> Option<RationalClass> + 'a {
    move |name: &str| match name {
        "p1" | "p2" => tx.lookup(name).map(RationalClass::integral),
        "half_p1" | "sixth_p2" => tx
            .entry(name)
            .map(|e| RationalClass::integral(e.class.clone())),
        "ch2" | "ch4" => {
            let k = if name == "ch2" { 2 } else { 4 };
            match e {
                Some(e) => e.chern_character(k).ok(),
                None => Some(RationalClass::integral(tx.base.zero(2 * k))),
            }
        }
        _ => None,
    }
}

fn name_missing(err: BundleError, tx: &Bundle, e: Option<&Bundle>) -> BundleError {
    match err {
        BundleError::MissingClass { key, .. } => {
            let bundle = match key.as_str() {
                "ch2" | "ch4" => e.map_or(String::new(), |e| e.name.clone()),
                _ => tx.name.clone(),
            };
            BundleError::MissingClass { bundle, key }
        }
        other => other,
    }
}

fn pontrjagin_validity(tx: &Bundle) -> Validity {
    ["p1", "p2"]
        .iter()
        .filter_map(|k| tx.entry(k))
        .fold(Validity::Exact, |v, e| v.combine(e.validity))
}

/// Evaluates an anomaly polynomial on TX and an optional gauge bundle E. When E is
/// absent its Chern character vanishes.
pub fn evaluate_anomaly(
    model: AnomalyModel,
    tx: &Bundle,
    e: Option<&Bundle>,
) -> Result<AnomalyEvaluation, ObstructionError> {
    check_pair(tx, e)?;
    let poly = anomaly_polynomial(model);
    let value = evaluate_poly(&tx.base, &poly.value, poly.degree(), &class_lookup(tx, e))
        .map_err(|err| name_missing(err, tx, e))?;
    let integral_solutions = value.solution_count();
    let integral = value.unique_integral();
    Ok(AnomalyEvaluation {
        model,
        value,
        integral_solutions,
        integral,
        validity: pontrjagin_validity(tx),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LadderMode {
    Manifold,
    Pair,
}

impl FromStr for LadderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manifold" => Ok(LadderMode::Manifold),
            "pair" => Ok(LadderMode::Pair),
            other => Err(format!(
                "unknown mode `{other}` (expected manifold or pair)"
            )),
        }
    }
}

impl fmt::Display for LadderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LadderMode::Manifold => "manifold",
            LadderMode::Pair => "pair",
        })
    }
}

/// Which multiple of the degree-8 class the Fivebrane condition asks to vanish:
/// `Six` tests ⅙p₂ (for a pair: ⅙p₂ − 8ch₄ + decomposables), `FortyEight` tests
/// p₂/48 (for a pair: the full dual anomaly polynomial).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FivebraneNorm {
    Six,
    FortyEight,
}

impl FivebraneNorm {
    pub fn default_for(mode: LadderMode) -> Self {
        match mode {
            LadderMode::Manifold => FivebraneNorm::Six,
            LadderMode::Pair => FivebraneNorm::FortyEight,
        }
    }
}

impl FromStr for FivebraneNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "six" | "6" => Ok(FivebraneNorm::Six),
            "fortyeight" | "48" => Ok(FivebraneNorm::FortyEight),
            other => Err(format!(
                "unknown normalization `{other}` (expected six or fortyeight)"
            )),
        }
    }
}

impl fmt::Display for FivebraneNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FivebraneNorm::Six => "six",
            FivebraneNorm::FortyEight => "fortyeight",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Oriented,
    Spin,
    String,
    Fivebrane,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::Oriented,
        Level::Spin,
        Level::String,
        Level::Fivebrane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Oriented => "oriented",
            Level::Spin => "spin",
            Level::String => "string",
            Level::Fivebrane => "fivebrane",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered from best to worst so that `max` clamps a level by the one below it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Admits,
    Undetermined,
    Obstructed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Admits => "admits",
            Verdict::Undetermined => "undetermined",
            Verdict::Obstructed => "obstructed",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The group acting freely and transitively on the lifts, or an upper bound for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsorDescription {
    pub level: Level,
    pub degree: u32,
    pub group: AbelianGroup,
    pub upper_bound: bool,
    /// Whether `group` is a quotient of the cohomology group by a supplied image.
    pub quotiented: bool,
}

impl fmt::Display for TorsorDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.group.is_trivial() {
            return if self.quotiented {
                write!(f, "unique (quotient of H{} is trivial)", self.degree)
            } else {
                write!(f, "unique (H{} = 0)", self.degree)
            };
        }
        write!(f, "torsor over {}", self.group)?;
        if self.upper_bound {
            f.write_str(" (upper bound; quotient undetermined)")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelReport {
    pub level: Level,
    pub verdict: Verdict,
    /// The class whose vanishing is the lifting condition, possibly fractional.
    pub obstruction: Option<RationalClass>,
    /// Its integral value when that is unique and nonzero.
    pub obstruction_class: Option<CohClass>,
    /// Number of solutions of 2y = p₁ (String) or 6y = p₂ (Fivebrane); 1 when designated.
    pub fractional_class_solutions: Option<BigInt>,
    pub torsor: Option<TorsorDescription>,
    pub validity: Validity,
    pub note: Option<String>,
}

impl LevelReport {
    fn new(level: Level, verdict: Verdict) -> Self {
        Self {
            level,
            verdict,
            obstruction: None,
            obstruction_class: None,
            fractional_class_solutions: None,
            torsor: None,
            validity: Validity::Exact,
            note: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObstructionReport {
    pub mode: LadderMode,
    pub normalization: FivebraneNorm,
    pub levels: Vec<LevelReport>,
}

impl ObstructionReport {
    pub fn verdict(&self, level: Level) -> Verdict {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .map_or(Verdict::Undetermined, |l| l.verdict)
    }

    pub fn is_monotone(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].verdict != Verdict::Admits || w[0].verdict == Verdict::Admits)
    }

    pub fn any_obstructed(&self) -> bool {
        self.levels.iter().any(|l| l.verdict == Verdict::Obstructed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LadderOptions {
    pub mode: LadderMode,
    pub normalization: Option<FivebraneNorm>,
}

impl LadderOptions {
    pub fn new(mode: LadderMode) -> Self {
        Self {
            mode,
            normalization: None,
        }
    }
}

fn condition_ring() -> Arc<GradedRing> {
    static RING: OnceLock<Arc<GradedRing>> = OnceLock::new();
    Arc::clone(RING.get_or_init(|| {
        GradedRing::new(
            [
                ("p1", 4),
                ("p2", 8),
                ("ch2", 4),
                ("ch4", 8),
                ("half_p1", 4),
                ("sixth_p2", 8),
            ],
            16,
        )
        .expect("valid ring")
    }))
}

/// The class whose vanishing is the String (degree 4) or Fivebrane (degree 8) condition.
fn condition(
    level: Level,
    mode: LadderMode,
    norm: FivebraneNorm,
    designated: bool,
) -> &'static str {
    match (level, mode, norm, designated) {
        (Level::String, LadderMode::Manifold, _, false) => "1/2*p1",
        (Level::String, LadderMode::Manifold, _, true) => "half_p1",
        (Level::String, LadderMode::Pair, _, false) => "1/2*p1 - ch2",
        (Level::String, LadderMode::Pair, _, true) => "half_p1 - ch2",
        (_, LadderMode::Manifold, FivebraneNorm::Six, false) => "1/6*p2",
        (_, LadderMode::Manifold, FivebraneNorm::Six, true) => "sixth_p2",
        (_, LadderMode::Manifold, FivebraneNorm::FortyEight, false) => "(p2 - (1/2*p1)^2)/48",
        (_, LadderMode::Manifold, FivebraneNorm::FortyEight, true) => "sixth_p2/8 - p1^2/192",
        (_, LadderMode::Pair, FivebraneNorm::Six, false) => {
            "1/6*p2 - 8*ch4 + 1/6*p1*ch2 - 1/8*p1^2"
        }
        (_, LadderMode::Pair, FivebraneNorm::Six, true) => {
            "sixth_p2 - 8*ch4 + 1/6*p1*ch2 - 1/8*p1^2"
        }
        (_, LadderMode::Pair, FivebraneNorm::FortyEight, false) => {
            "1/48*p2 - ch4 + 1/48*p1*ch2 - 1/64*p1^2"
        }
        (_, LadderMode::Pair, FivebraneNorm::FortyEight, true) => {
            "sixth_p2/8 - ch4 + 1/48*p1*ch2 - 1/64*p1^2"
        }
    }
}

fn check_designation(
    tx: &Bundle,
    key: &str,
    base_key: &str,
    factor: u32,
) -> Result<(), ObstructionError> {
    let (Some(d), Some(p)) = (tx.entry(key), tx.lookup(base_key)) else {
        return Ok(());
    };
    if d.class.scale(&BigInt::from(factor)) != p {
        return Err(ObstructionError::InconsistentDesignation {
            key: key.to_string(),
            factor,
            class: p.render(),
        });
    }
    Ok(())
}

fn stiefel_whitney_level(
    level: Level,
    sw: &crate::bundle_model::StiefelWhitney,
    label: &str,
) -> LevelReport {
    use crate::bundle_model::StiefelWhitney as Sw;
    let mut r = LevelReport::new(
        level,
        match sw {
            Sw::Vanishes => Verdict::Admits,
            Sw::NonVanishing(_) => Verdict::Obstructed,
            Sw::Unknown => Verdict::Undetermined,
        },
    );
    r.note = match sw {
        Sw::Vanishes => None,
        Sw::NonVanishing(Some(name)) => Some(format!("{label} = {name} is nonzero")),
        Sw::NonVanishing(None) => Some(format!("{label} is nonzero")),
        Sw::Unknown => Some(format!("{label} not given")),
    };
    r
}

fn class_level(
    level: Level,
    tx: &Bundle,
    e: Option<&Bundle>,
    mode: LadderMode,
    norm: FivebraneNorm,
) -> Result<LevelReport, ObstructionError> {
    let (key, base_key, factor, degree) = match level {
        Level::String => ("half_p1", "p1", 2u64, 4u32),
        _ => ("sixth_p2", "p2", 6, 8),
    };
    let designated = tx.entry(key).is_some();
    let poly = condition_ring()
        .parse(condition(level, mode, norm, designated))
        .expect("built-in condition");
    let mut r = LevelReport::new(level, Verdict::Undetermined);
    r.validity = pontrjagin_validity(tx);
    r.fractional_class_solutions = if designated {
        Some(BigInt::one())
    } else {
        tx.lookup(base_key).map(|p| division_count(&p, factor))
    };
    r.torsor = count_structures(&tx.base, level, None).ok();

    let value = match evaluate_poly(&tx.base, &poly, degree, &class_lookup(tx, e)) {
        Ok(v) => v,
        Err(BundleError::UndeterminedProduct(m)) => {
            r.note = Some(format!("needs the cup product {m}"));
            return Ok(r);
        }
        Err(BundleError::MissingClass { key, .. }) => {
            let owner = match key.as_str() {
                "ch2" | "ch4" => e.map_or("E", |e| e.name.as_str()),
                _ => tx.name.as_str(),
            };
            r.note = Some(format!("{key} of {owner} not known"));
            return Ok(r);
        }
        Err(other) => return Err(other.into()),
    };
    if value.numerator.is_zero() {
        // Zero is a solution; any other torsion solution could be the true class.
        let count = value.solution_count();
        if count.is_one() {
            r.verdict = Verdict::Admits;
        } else {
            r.note = Some(format!(
                "{} candidate classes differ by torsion; designate {key} to decide",
                count
            ));
        }
        let group = tx.base.group(degree);
        let has_two_torsion = group.group.torsion().iter().any(|n| n % 2 == 0);
        if r.verdict == Verdict::Admits && r.validity == Validity::Mod2Torsion && has_two_torsion {
            r.verdict = Verdict::Undetermined;
            r.note = Some("classes only known modulo 2-torsion".into());
        }
    } else {
        r.verdict = Verdict::Obstructed;
        r.obstruction_class = value.unique_integral();
        if value.solution_count().is_zero() {
            let note = if value.free_part().iter().all(|c| c.is_integer()) {
                format!("torsion part is not divisible by {}", value.denominator)
            } else {
                format!("fractional free part {}", value.render_free())
            };
            r.note = Some(note);
        }
    }
    r.obstruction = Some(value);
    Ok(r)
}

/// Runs the ladder oriented → spin → string → fivebrane. A level never admits unless
/// every level below it does.
pub fn structure_ladder(
    tx: &Bundle,
    e: Option<&Bundle>,
    options: LadderOptions,
) -> Result<ObstructionReport, ObstructionError> {
    check_pair(tx, e)?;
    check_designation(tx, "half_p1", "p1", 2)?;
    check_designation(tx, "sixth_p2", "p2", 6)?;
    let mode = options.mode;
    let norm = options
        .normalization
        .unwrap_or(FivebraneNorm::default_for(mode));
    let e = if mode == LadderMode::Pair { e } else { None };

    let mut levels = vec![
        stiefel_whitney_level(Level::Oriented, &tx.w1, "w1"),
        stiefel_whitney_level(Level::Spin, &tx.w2, "w2"),
        class_level(Level::String, tx, e, mode, norm)?,
        class_level(Level::Fivebrane, tx, e, mode, norm)?,
    ];
    for i in 1..levels.len() {
        let below = levels[i - 1].verdict;
        if below > levels[i].verdict {
            levels[i].verdict = below;
            let below_level = levels[i - 1].level;
            let article = if below_level == Level::Oriented {
                "an"
            } else {
                "a"
            };
            levels[i].note = Some(format!("requires {article} {below_level} structure"));
        }
    }
    Ok(ObstructionReport {
        mode,
        normalization: norm,
        levels,
    })
}

/// All y with 8y = ⅙p₂.
pub fn refine_division_by_8(sixth_p2: &CohClass) -> Vec<CohClass> {
    divide_class(sixth_p2, 8)
}

/// The group acting on String (H³) or Fivebrane (H⁷) lifts. Without `quotient_image`
/// the whole group is returned as an upper bound.
pub fn count_structures(
    space: &BaseSpace,
    level: Level,
    quotient_image: Option<&[CohClass]>,
) -> Result<TorsorDescription, ObstructionError> {
    let degree = match level {
        Level::Oriented => 0,
        Level::Spin => 1,
        Level::String => 3,
        Level::Fivebrane => 7,
    };
    if degree <= space.dimension() && !space.is_declared(degree) {
        return Err(ObstructionError::MissingDegree {
            space: space.name().to_string(),
            degree,
        });
    }
    let h = space.group(degree);
    let (group, upper_bound) = match quotient_image {
        None => (h.group.clone(), !h.group.is_trivial()),
        Some(image) => {
            let gens = image
                .iter()
                .map(|c| {
                    if c.degree() != degree {
                        return Err(BundleError::DegreeMismatch {
                            key: c.render(),
                            expected: degree,
                            got: c.degree(),
                        }
                        .into());
                    }
                    let free = c
                        .free()
                        .iter()
                        .map(|x| {
                            if x.is_integer() {
                                Ok(x.to_integer())
                            } else {
                                Err(GroupError::NonIntegral(crate::rational::render(x)))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok((free, c.torsion().to_vec()))
                })
                .collect::<Result<Vec<_>, ObstructionError>>()?;
            (h.group.quotient(&gens)?, false)
        }
    };
    Ok(TorsorDescription {
        level,
        degree,
        group,
        upper_bound,
        quotiented: quotient_image.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle_model::StiefelWhitney;
    use crate::rational::q;

    fn space(h4: Option<AbelianGroup>, h8: AbelianGroup) -> Arc<BaseSpace> {
        let mut x = BaseSpace::new("X", 10);
        if let Some(h4) = h4 {
            x.declare(4, h4, vec![]).unwrap();
        }
        x.declare(8, h8, vec![]).unwrap();
        x.declare(3, AbelianGroup::trivial(), vec![]).unwrap();
        x.declare(7, AbelianGroup::new(1, vec![2]).unwrap(), vec![])
            .unwrap();
        Arc::new(x)
    }

    fn free(n: usize) -> AbelianGroup {
        AbelianGroup::new(n, vec![]).unwrap()
    }

    fn tangent(x: &Arc<BaseSpace>, p1: Option<i64>, p2: i64) -> Bundle {
        let mut tx = Bundle::new("TX", Arc::clone(x), Field::Real, 10);
        tx.w1 = StiefelWhitney::Vanishes;
        tx.w2 = StiefelWhitney::Vanishes;
        if let Some(p1) = p1 {
            tx.set_class(
                "p1",
                x.generator_class("h4_1").unwrap().scale(&BigInt::from(p1)),
            )
            .unwrap();
        }
        tx.set_class(
            "p2",
            x.generator_class("h8_1").unwrap().scale(&BigInt::from(p2)),
        )
        .unwrap();
        tx
    }

    fn gauge(x: &Arc<BaseSpace>, ch4: i64) -> Bundle {
        let mut e = Bundle::new("E", Arc::clone(x), Field::Complex, 16);
        e.set_class("ch2", x.zero(4)).unwrap();
        e.set_class(
            "ch4",
            x.generator_class("h8_1").unwrap().scale(&BigInt::from(ch4)),
        )
        .unwrap();
        e
    }

    #[test]
    fn polynomials() {
        let het = anomaly_polynomial(AnomalyModel::HeteroticDual);
        let reduced = het.vanish(&["p1", "ch2"]).unwrap();
        assert_eq!(
            reduced.value,
            anomaly_polynomial(AnomalyModel::Reduced).value
        );
        assert_eq!(reduced.value.render(), "-1/48*p2 + ch4");
        let iia = anomaly_polynomial(AnomalyModel::TypeIiaDual)
            .vanish(&["p1"])
            .unwrap();
        assert_eq!(iia.value.render(), "1/48*p2");
        let gs = anomaly_polynomial(AnomalyModel::HeteroticGs);
        assert!(gs.value.is_homogeneous_of(4));
        assert_eq!(
            het.vanish(&["p1", "ch2", "ch4"]).unwrap().value.render(),
            "-1/48*p2"
        );
        assert_eq!(het.strip_decomposables().value, reduced.value);
        assert_eq!(het.normalization.two_pi_power, 1);
        assert!("nope".parse::<AnomalyModel>().is_err());
    }

    #[test]
    fn anomaly_cancels() {
        let x = space(None, free(1));
        let tx = tangent(&x, None, 48);
        let e = gauge(&x, 1);
        let v = evaluate_anomaly(AnomalyModel::Reduced, &tx, Some(&e)).unwrap();
        assert!(v.vanishes());
        let v2 = evaluate_anomaly(AnomalyModel::HeteroticDual, &tx, Some(&e)).unwrap();
        assert_eq!(v.value.free_part(), v2.value.free_part());
    }

    #[test]
    fn fractional_anomaly() {
        let x = space(None, free(1));
        let tx = tangent(&x, None, 6);
        let v = evaluate_anomaly(AnomalyModel::Reduced, &tx, None).unwrap();
        assert_eq!(v.value.free_part(), vec![q(-1, 8)]);
        assert!(!v.is_integral());
        assert_eq!(v.value.render_free(), "-1/8*h8_1");
        let zero = tangent(&x, None, 0);
        assert!(evaluate_anomaly(AnomalyModel::Reduced, &zero, None)
            .unwrap()
            .vanishes());
    }

    #[test]
    fn trivial_data_admits_everything() {
        let x = space(Some(free(1)), free(1));
        let tx = tangent(&x, Some(0), 0);
        for mode in [LadderMode::Manifold, LadderMode::Pair] {
            let r = structure_ladder(&tx, None, LadderOptions::new(mode)).unwrap();
            assert!(
                r.levels.iter().all(|l| l.verdict == Verdict::Admits),
                "{r:?}"
            );
        }
    }

    #[test]
    fn string_obstruction_class() {
        let x = space(Some(free(1)), free(1));
        let tx = tangent(&x, Some(2), 0);
        let r = structure_ladder(&tx, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Spin), Verdict::Admits);
        assert_eq!(r.verdict(Level::String), Verdict::Obstructed);
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Obstructed);
        let string = &r.levels[2];
        assert_eq!(
            string.obstruction_class,
            Some(x.generator_class("h4_1").unwrap())
        );
    }

    #[test]
    fn four_connected_pair_admits() {
        let x = space(None, free(1));
        let tx = tangent(&x, None, 48);
        let e = gauge(&x, 1);
        let r = structure_ladder(&tx, Some(&e), LadderOptions::new(LadderMode::Pair)).unwrap();
        assert_eq!(r.normalization, FivebraneNorm::FortyEight);
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Admits);
        // In the six normalization ⅙p₂ = 8u = 8ch₄ also cancels.
        let six = LadderOptions {
            mode: LadderMode::Pair,
            normalization: Some(FivebraneNorm::Six),
        };
        assert_eq!(
            structure_ladder(&tx, Some(&e), six)
                .unwrap()
                .verdict(Level::Fivebrane),
            Verdict::Admits
        );
        // As a bare manifold ⅙p₂ = 8u ≠ 0.
        let r = structure_ladder(&tx, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Obstructed);
    }

    #[test]
    fn torsion_leaves_sixth_undetermined() {
        let x = space(None, AbelianGroup::new(1, vec![2, 3]).unwrap());
        let tx = tangent(&x, None, 0);
        let r = structure_ladder(&tx, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::String), Verdict::Admits);
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Undetermined);
        assert_eq!(
            r.levels[3].fractional_class_solutions,
            Some(BigInt::from(6))
        );

        let mut designated = tx.clone();
        designated.set_class("sixth_p2", x.zero(8)).unwrap();
        let r =
            structure_ladder(&designated, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Admits);

        let mut t2 = tx.clone();
        t2.set_class("sixth_p2", x.generator_class("h8_2").unwrap())
            .unwrap();
        let r = structure_ladder(&t2, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Obstructed);

        let mut bad = tx.clone();
        bad.set_class("sixth_p2", x.generator_class("h8_1").unwrap())
            .unwrap();
        assert!(matches!(
            structure_ladder(&bad, None, LadderOptions::new(LadderMode::Manifold)),
            Err(ObstructionError::InconsistentDesignation { .. })
        ));
    }

    #[test]
    fn pair_with_trivial_gauge_is_manifold() {
        let x = space(Some(free(1)), AbelianGroup::new(1, vec![3]).unwrap());
        let triv = Bundle::trivial("E", Arc::clone(&x), Field::Complex, 8);
        for (p1, p2) in [(0, 0), (0, 6), (2, 0), (0, 12), (4, 5)] {
            let tx = tangent(&x, Some(p1), p2);
            for norm in [FivebraneNorm::Six, FivebraneNorm::FortyEight] {
                let pair = LadderOptions {
                    mode: LadderMode::Pair,
                    normalization: Some(norm),
                };
                let man = LadderOptions {
                    mode: LadderMode::Manifold,
                    normalization: Some(norm),
                };
                let a = structure_ladder(&tx, Some(&triv), pair).unwrap();
                let b = structure_ladder(&tx, None, man).unwrap();
                let va: Vec<_> = a.levels.iter().map(|l| l.verdict).collect();
                let vb: Vec<_> = b.levels.iter().map(|l| l.verdict).collect();
                assert_eq!(va, vb, "p1={p1} p2={p2} {norm}");
            }
        }
    }

    #[test]
    fn stiefel_whitney_clamps() {
        let x = space(Some(free(1)), free(1));
        let mut tx = tangent(&x, Some(0), 0);
        tx.w2 = StiefelWhitney::NonVanishing(Some("a".into()));
        let r = structure_ladder(&tx, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Oriented), Verdict::Admits);
        assert_eq!(r.verdict(Level::Spin), Verdict::Obstructed);
        assert_eq!(r.verdict(Level::Fivebrane), Verdict::Obstructed);
        assert!(r.is_monotone());
        tx.w1 = StiefelWhitney::Unknown;
        let r = structure_ladder(&tx, None, LadderOptions::new(LadderMode::Manifold)).unwrap();
        assert_eq!(r.verdict(Level::Oriented), Verdict::Undetermined);
        assert_eq!(r.verdict(Level::String), Verdict::Obstructed);
    }

    #[test]
    fn division_by_eight() {
        let x = space(None, free(1));
        let u = x.generator_class("h8_1").unwrap();
        assert_eq!(
            refine_division_by_8(&u.scale(&BigInt::from(8))),
            vec![u.clone()]
        );
        assert!(refine_division_by_8(&u).is_empty());
        let y = space(None, AbelianGroup::new(1, vec![8]).unwrap());
        let sols = refine_division_by_8(&y.zero(8));
        assert_eq!(sols.len(), 8);
        let brute: Vec<u64> = (0..8).filter(|t| (8 * t) % 8 == 0).collect();
        let mut got: Vec<u64> = sols.iter().map(|s| s.torsion()[0]).collect();
        got.sort();
        assert_eq!(got, brute);
    }

    #[test]
    fn structure_counts() {
        let x = space(None, free(1));
        let fb = count_structures(&x, Level::Fivebrane, None).unwrap();
        assert!(fb.upper_bound);
        assert_eq!(
            fb.to_string(),
            "torsor over Z + Z/2 (upper bound; quotient undetermined)"
        );
        let st = count_structures(&x, Level::String, None).unwrap();
        assert_eq!(st.to_string(), "unique (H3 = 0)");
        let t = x.generator_class("h7_2").unwrap();
        let q = count_structures(&x, Level::Fivebrane, Some(&[t])).unwrap();
        assert_eq!(q.group, free(1));
        assert!(!q.upper_bound);
        let bare = BaseSpace::new("Y", 10);
        assert!(matches!(
            count_structures(&bare, Level::String, None),
            Err(ObstructionError::MissingDegree { degree: 3, .. })
        ));
        let small = BaseSpace::new("Z", 2);
        assert!(count_structures(&small, Level::String, None)
            .unwrap()
            .group
            .is_trivial());
    }
}
