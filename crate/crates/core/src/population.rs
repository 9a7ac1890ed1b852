//! Commuter microdata: zone tables, population ingestion and synthesis.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mode::Mode;
use crate::rng::{self, Domain};

/// Tolerance on categorical weights summing to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub const POPULATION_HEADER: [&str; 13] = [
    "id",
    "age",
    "gender",
    "disability",
    "education",
    "income_bucket",
    "industry",
    "home_zone",
    "work_zone",
    "arrival_hour",
    "hours_per_week",
    "dwelling",
    "baseline_mode",
];

pub const ZONE_HEADER: [&str; 5] = [
    "id",
    "centroid_x_km",
    "centroid_y_km",
    "region_tag",
    "bike_accessible",
];

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("{}", format_rows(.0))]
    InvalidRows(Vec<RowError>),
    #[error("duplicate zone id `{0}`")]
    DuplicateZone(String),
    #[error("zone `{0}` has a non-finite centroid")]
    NonFiniteCentroid(String),
    #[error("unknown zone id `{0}`")]
    UnknownZone(String),
    #[error("synthesis parameter `{field}`: {message}")]
    Params { field: &'static str, message: String },
}

/// A validation failure on one data row (1-based, header excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}, field {}: {}", self.row, self.field, self.message)
    }
}

fn format_rows(rows: &[RowError]) -> String {
    let mut out = format!("{} invalid row(s): ", rows.len());
    for (i, r) in rows.iter().take(10).enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&r.to_string());
    }
    if rows.len() > 10 {
        out.push_str("; ...");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Manhattan,
    Bronx,
    Queens,
    Brooklyn,
    StatenIsland,
    #[serde(alias = "north_n_j")]
    NorthNj,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    NotCollege,
    College,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Industry {
    WhiteCollar,
    Service,
    BlueCollar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dwelling {
    SingleFamilyOwned,
    Apartment,
}

/// Parses a snake_case enum token through its serde representation, so CSV
/// and JSON share a vocabulary.
fn parse_token<T: serde::de::DeserializeOwned>(raw: &str) -> Result<T, String> {
    let norm = raw.trim().to_ascii_lowercase().replace(['-', ' '], "_");
    serde_json::from_value(serde_json::Value::String(norm)).map_err(|_| format!("invalid value `{raw}`"))
}

macro_rules! token_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                parse_token(s)
            }
        }
    )*};
}

token_from_str!(Region, Gender, Education, Industry, Dwelling);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub centroid_x_km: f64,
    pub centroid_y_km: f64,
    #[serde(rename = "region_tag")]
    pub region: Region,
    pub bike_accessible: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneTable {
    zones: Vec<Zone>,
    index: HashMap<String, usize>,
}

impl ZoneTable {
    pub fn new(zones: Vec<Zone>) -> Result<Self, PopulationError> {
        let mut index = HashMap::with_capacity(zones.len());
        for (i, z) in zones.iter().enumerate() {
            if !(z.centroid_x_km.is_finite() && z.centroid_y_km.is_finite()) {
                return Err(PopulationError::NonFiniteCentroid(z.id.clone()));
            }
            if index.insert(z.id.clone(), i).is_some() {
                return Err(PopulationError::DuplicateZone(z.id.clone()));
            }
        }
        Ok(Self { zones, index })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PopulationError> {
        Self::from_reader(open(path.as_ref())?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, PopulationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        check_header(rdr.headers()?, &ZONE_HEADER)?;
        let mut zones = Vec::new();
        let mut errors = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let mut fields = Fields { rec: &rec, row, errors: &mut errors };
            let id = fields.get::<String>(0, "id");
            let x = fields.get::<f64>(1, "centroid_x_km");
            let y = fields.get::<f64>(2, "centroid_y_km");
            let region = fields.get::<Region>(3, "region_tag");
            let bike = fields.flag(4, "bike_accessible");
            if let (Some(id), Some(x), Some(y), Some(region), Some(bike)) = (id, x, y, region, bike) {
                zones.push(Zone {
                    id,
                    centroid_x_km: x,
                    centroid_y_km: y,
                    region,
                    bike_accessible: bike,
                });
            }
        }
        if !errors.is_empty() {
            return Err(PopulationError::InvalidRows(errors));
        }
        Self::new(zones)
    }

    pub fn get(&self, id: &str) -> Option<&Zone> {
        self.index.get(id).map(|&i| &self.zones[i])
    }

    pub fn resolve(&self, id: &str) -> Result<&Zone, PopulationError> {
        self.get(id).ok_or_else(|| PopulationError::UnknownZone(id.to_string()))
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }
}

/// One commuter record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub age: u32,
    pub gender: Gender,
    pub has_disability: bool,
    pub education: Education,
    /// Household income bucket, 0 (`$0-25k`) through 6 (`>= $200k`).
    pub income_bucket: u8,
    pub industry: Industry,
    pub home_zone: String,
    pub work_zone: String,
    pub arrival_hour: u8,
    pub hours_per_week: f64,
    pub dwelling: Dwelling,
    pub baseline_mode: Mode,
}

pub const MIN_AGE: u32 = 16;
pub const INCOME_BUCKETS: usize = 7;

impl Individual {
    /// Checks the record invariants, returning `(field, message)` on failure.
    pub fn check(&self, zones: &ZoneTable) -> Result<(), (&'static str, String)> {
        if self.age < MIN_AGE {
            return Err(("age", format!("{} is below the minimum of {MIN_AGE}", self.age)));
        }
        if usize::from(self.income_bucket) >= INCOME_BUCKETS {
            return Err(("income_bucket", format!("{} is outside 0..=6", self.income_bucket)));
        }
        if self.arrival_hour > 23 {
            return Err(("arrival_hour", format!("{} is outside 0..=23", self.arrival_hour)));
        }
        if !(self.hours_per_week.is_finite() && self.hours_per_week >= 0.0) {
            return Err(("hours_per_week", format!("{} must be finite and >= 0", self.hours_per_week)));
        }
        if zones.get(&self.home_zone).is_none() {
            return Err(("home_zone", format!("unknown zone id `{}`", self.home_zone)));
        }
        if zones.get(&self.work_zone).is_none() {
            return Err(("work_zone", format!("unknown zone id `{}`", self.work_zone)));
        }
        Ok(())
    }

    /// Whole working hours per day, assuming a five-day week.
    pub fn daily_hours(&self) -> u8 {
        (self.hours_per_week / 5.0).round().clamp(1.0, 23.0) as u8
    }

    pub fn departure_hour(&self) -> u8 {
        (self.arrival_hour + self.daily_hours()) % 24
    }
}

fn open(path: &Path) -> Result<std::fs::File, PopulationError> {
    std::fs::File::open(path).map_err(|source| PopulationError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), PopulationError> {
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(PopulationError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    row: usize,
    errors: &'a mut Vec<RowError>,
}

impl Fields<'_> {
    fn get<T>(&mut self, idx: usize, field: &'static str) -> Option<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.rec.get(idx).unwrap_or("");
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(RowError {
                    row: self.row,
                    field,
                    message: format!("cannot parse `{raw}`: {e}"),
                });
                None
            }
        }
    }

    fn flag(&mut self, idx: usize, field: &'static str) -> Option<bool> {
        match self.rec.get(idx).unwrap_or("") {
            "0" => Some(false),
            "1" => Some(true),
            other => {
                self.errors.push(RowError {
                    row: self.row,
                    field,
                    message: format!("expected 0 or 1, found `{other}`"),
                });
                None
            }
        }
    }
}

/// Loads a population CSV, validating every row against `zones`.
pub fn load_population(path: impl AsRef<Path>, zones: &ZoneTable) -> Result<Vec<Individual>, PopulationError> {
    read_population(open(path.as_ref())?, zones)
}

pub fn read_population(reader: impl Read, zones: &ZoneTable) -> Result<Vec<Individual>, PopulationError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &POPULATION_HEADER)?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != POPULATION_HEADER.len() {
            errors.push(RowError {
                row,
                field: "*",
                message: format!("expected {} fields, found {}", POPULATION_HEADER.len(), rec.len()),
            });
            continue;
        }
        let before = errors.len();
        let mut f = Fields { rec: &rec, row, errors: &mut errors };
        let parsed = (
            f.get::<u64>(0, "id"),
            f.get::<u32>(1, "age"),
            f.get::<Gender>(2, "gender"),
            f.flag(3, "disability"),
            f.get::<Education>(4, "education"),
            f.get::<u8>(5, "income_bucket"),
            f.get::<Industry>(6, "industry"),
            f.get::<String>(7, "home_zone"),
            f.get::<String>(8, "work_zone"),
            f.get::<u8>(9, "arrival_hour"),
            f.get::<f64>(10, "hours_per_week"),
            f.get::<Dwelling>(11, "dwelling"),
            f.get::<Mode>(12, "baseline_mode"),
        );
        if errors.len() > before {
            continue;
        }
        let ind = Individual {
            id: parsed.0.unwrap(),
            age: parsed.1.unwrap(),
            gender: parsed.2.unwrap(),
            has_disability: parsed.3.unwrap(),
            education: parsed.4.unwrap(),
            income_bucket: parsed.5.unwrap(),
            industry: parsed.6.unwrap(),
            home_zone: parsed.7.unwrap(),
            work_zone: parsed.8.unwrap(),
            arrival_hour: parsed.9.unwrap(),
            hours_per_week: parsed.10.unwrap(),
            dwelling: parsed.11.unwrap(),
            baseline_mode: parsed.12.unwrap(),
        };
        match ind.check(zones) {
            Ok(()) => out.push(ind),
            Err((field, message)) => errors.push(RowError { row, field, message }),
        }
    }
    if !errors.is_empty() {
        return Err(PopulationError::InvalidRows(errors));
    }
    Ok(out)
}

/// Writes a population in the CSV schema accepted by [`read_population`].
pub fn write_population(pop: &[Individual], writer: impl std::io::Write) -> Result<(), PopulationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(POPULATION_HEADER)?;
    for p in pop {
        w.write_record([
            p.id.to_string(),
            p.age.to_string(),
            token(&p.gender),
            u8::from(p.has_disability).to_string(),
            token(&p.education),
            p.income_bucket.to_string(),
            token(&p.industry),
            p.home_zone.clone(),
            p.work_zone.clone(),
            p.arrival_hour.to_string(),
            p.hours_per_week.to_string(),
            token(&p.dwelling),
            p.baseline_mode.to_string(),
        ])?;
    }
    w.flush().map_err(|source| PopulationError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

fn token<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Planar distance between zone centroids, in km.
pub fn commute_distance(home: &Zone, work: &Zone) -> f64 {
    (home.centroid_x_km - work.centroid_x_km).hypot(home.centroid_y_km - work.centroid_y_km)
}

/// Convenience lookup of an individual's one-way commute distance.
pub fn individual_distance(ind: &Individual, zones: &ZoneTable) -> Result<f64, PopulationError> {
    Ok(commute_distance(zones.resolve(&ind.home_zone)?, zones.resolve(&ind.work_zone)?))
}

// ---------------------------------------------------------------------------
// Synthesis

/// A categorical distribution over explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical<T> {
    pub values: Vec<T>,
    pub weights: Vec<f64>,
}

impl<T> Categorical<T> {
    fn validate(&self, field: &'static str) -> Result<(), PopulationError> {
        let err = |message: String| PopulationError::Params { field, message };
        if self.values.is_empty() {
            return Err(err("no values".into()));
        }
        if self.values.len() != self.weights.len() {
            return Err(err(format!(
                "{} values but {} weights",
                self.values.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(err("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(err(format!("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOLERANCE:e}")));
        }
        Ok(())
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        // validated: non-empty, non-negative, sums to one
        WeightedIndex::new(&self.weights).expect("validated weights")
    }
}

/// Integer-valued distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntDist {
    /// Uniform over the inclusive range `min..=max`.
    Uniform { min: u32, max: u32 },
    Categorical(Categorical<u32>),
}

/// Real-valued distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealDist {
    /// Uniform over `[min, max)`.
    Uniform { min: f64, max: f64 },
    Categorical(Categorical<f64>),
}

/// Per-field marginal distributions used by [`synthesize_population`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub age: IntDist,
    pub gender: Categorical<Gender>,
    pub disability_rate: f64,
    pub education: Categorical<Education>,
    pub income_bucket: Categorical<u8>,
    pub industry: Categorical<Industry>,
    pub home_zone: Categorical<String>,
    pub work_zone: Categorical<String>,
    pub arrival_hour: IntDist,
    pub hours_per_week: RealDist,
    pub dwelling: Categorical<Dwelling>,
    pub baseline_mode: Categorical<Mode>,
}

impl SynthesisParams {
    pub fn from_json(text: &str) -> Result<Self, PopulationError> {
        serde_json::from_str(text).map_err(|e| PopulationError::Params {
            field: "document",
            message: e.to_string(),
        })
    }

    /// Validates distributions and value ranges; zone ids are checked when a
    /// table is supplied.
    pub fn validate(&self, zones: Option<&ZoneTable>) -> Result<(), PopulationError> {
        validate_int(&self.age, "age", MIN_AGE, u32::MAX)?;
        self.gender.validate("gender")?;
        if !(0.0..=1.0).contains(&self.disability_rate) {
            return Err(PopulationError::Params {
                field: "disability_rate",
                message: format!("{} is not a probability", self.disability_rate),
            });
        }
        self.education.validate("education")?;
        self.income_bucket.validate("income_bucket")?;
        if let Some(b) = self.income_bucket.values.iter().find(|&&b| usize::from(b) >= INCOME_BUCKETS) {
            return Err(PopulationError::Params {
                field: "income_bucket",
                message: format!("bucket {b} is outside 0..=6"),
            });
        }
        self.industry.validate("industry")?;
        self.home_zone.validate("home_zone")?;
        self.work_zone.validate("work_zone")?;
        validate_int(&self.arrival_hour, "arrival_hour", 0, 23)?;
        match &self.hours_per_week {
            RealDist::Uniform { min, max } => {
                if !(min.is_finite() && max.is_finite() && *min >= 0.0 && min <= max) {
                    return Err(PopulationError::Params {
                        field: "hours_per_week",
                        message: format!("invalid range [{min}, {max})"),
                    });
                }
            }
            RealDist::Categorical(c) => {
                c.validate("hours_per_week")?;
                if c.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(PopulationError::Params {
                        field: "hours_per_week",
                        message: "values must be finite and >= 0".into(),
                    });
                }
            }
        }
        self.dwelling.validate("dwelling")?;
        self.baseline_mode.validate("baseline_mode")?;
        if let Some(zones) = zones {
            for (field, dist) in [("home_zone", &self.home_zone), ("work_zone", &self.work_zone)] {
                if let Some(z) = dist.values.iter().find(|z| zones.get(z).is_none()) {
                    return Err(PopulationError::Params {
                        field,
                        message: format!("unknown zone id `{z}`"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn validate_int(dist: &IntDist, field: &'static str, lo: u32, hi: u32) -> Result<(), PopulationError> {
    let err = |message: String| PopulationError::Params { field, message };
    match dist {
        IntDist::Uniform { min, max } => {
            if min > max || *min < lo || *max > hi {
                return Err(err(format!("range {min}..={max} outside {lo}..={hi}")));
            }
        }
        IntDist::Categorical(c) => {
            c.validate(field)?;
            if let Some(v) = c.values.iter().find(|&&v| v < lo || v > hi) {
                return Err(err(format!("value {v} outside {lo}..={hi}")));
            }
        }
    }
    Ok(())
}

enum IntSampler<'a> {
    Uniform(u32, u32),
    Categorical(&'a [u32], WeightedIndex<f64>),
}

impl<'a> IntSampler<'a> {
    fn new(d: &'a IntDist) -> Self {
        match d {
            IntDist::Uniform { min, max } => IntSampler::Uniform(*min, *max),
            IntDist::Categorical(c) => IntSampler::Categorical(&c.values, c.sampler()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match self {
            IntSampler::Uniform(lo, hi) => rng.random_range(*lo..=*hi),
            IntSampler::Categorical(v, w) => v[w.sample(rng)],
        }
    }
}

struct Cat<'a, T> {
    values: &'a [T],
    index: WeightedIndex<f64>,
}

impl<'a, T: Clone> Cat<'a, T> {
    fn new(c: &'a Categorical<T>) -> Self {
        Self { values: &c.values, index: c.sampler() }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> T {
        self.values[self.index.sample(rng)].clone()
    }
}

/// Draws `n` individuals from independent per-field marginals.
///
/// Individual `i` (ids start at 1) is drawn from its own random stream, so the
/// output is identical for any thread count.
pub fn synthesize_population(n: usize, params: &SynthesisParams, seed: u64) -> Result<Vec<Individual>, PopulationError> {
    params.validate(None)?;
    let age = IntSampler::new(&params.age);
    let gender = Cat::new(&params.gender);
    let education = Cat::new(&params.education);
    let income = Cat::new(&params.income_bucket);
    let industry = Cat::new(&params.industry);
    let home = Cat::new(&params.home_zone);
    let work = Cat::new(&params.work_zone);
    let arrival = IntSampler::new(&params.arrival_hour);
    let hours: Box<dyn Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync> = match &params.hours_per_week {
        RealDist::Uniform { min, max } => {
            let (lo, hi) = (*min, *max);
            Box::new(move |rng| if hi > lo { rng.random_range(lo..hi) } else { lo })
        }
        RealDist::Categorical(c) => {
            let cat = Cat::new(c);
            Box::new(move |rng| cat.sample(rng))
        }
    };
    let dwelling = Cat::new(&params.dwelling);
    let baseline = Cat::new(&params.baseline_mode);

    let pop = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let id = i + 1;
            let mut rng = rng::stream(seed, Domain::Synthesis, id);
            Individual {
                id,
                age: age.sample(&mut rng),
                gender: gender.sample(&mut rng),
                has_disability: rng.random::<f64>() < params.disability_rate,
                education: education.sample(&mut rng),
                income_bucket: income.sample(&mut rng),
                industry: industry.sample(&mut rng),
                home_zone: home.sample(&mut rng),
                work_zone: work.sample(&mut rng),
                arrival_hour: arrival.sample(&mut rng) as u8,
                hours_per_week: hours(&mut rng),
                dwelling: dwelling.sample(&mut rng),
                baseline_mode: baseline.sample(&mut rng),
            }
        })
        .collect();
    Ok(pop)
}
