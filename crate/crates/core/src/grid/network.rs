use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GridError;
use crate::energy::HOURS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Base withdrawal per hour.
    pub load_mw: [f64; HOURS],
    pub is_manhattan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: String,
    pub to: String,
    pub susceptance: f64,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: String,
    pub p_min_mw: f64,
    /// May be infinite.
    pub p_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub name: String,
    pub slack_bus: String,
}

/// A DC network with hourly base loads and a designated set of buses that may
/// receive additional load.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    slack: usize,
    index: HashMap<String, usize>,
    line_ends: Vec<(usize, usize)>,
    gen_bus: Vec<usize>,
}

impl Network {
    pub fn new(
        name: impl Into<String>,
        slack_bus: &str,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
    ) -> Result<Self, GridError> {
        let mut index = HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id.clone(), i).is_some() {
                return Err(GridError::Invalid(format!("duplicate bus id `{}`", b.id)));
            }
            if b.load_mw.iter().any(|v| !v.is_finite()) {
                return Err(GridError::Invalid(format!("bus `{}` has a non-finite load", b.id)));
            }
        }
        let lookup = |id: &str, what: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| GridError::Invalid(format!("{what} references unknown bus `{id}`")))
        };
        let slack = lookup(slack_bus, "slack")?;
        let mut line_ends = Vec::with_capacity(lines.len());
        for (k, l) in lines.iter().enumerate() {
            let ends = (lookup(&l.from, &format!("line {k}"))?, lookup(&l.to, &format!("line {k}"))?);
            if ends.0 == ends.1 {
                return Err(GridError::Invalid(format!("line {k} connects bus `{}` to itself", l.from)));
            }
            if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                return Err(GridError::Invalid(format!("line {k} ({}-{}) needs susceptance > 0", l.from, l.to)));
            }
            if l.capacity_mw.is_nan() || l.capacity_mw <= 0.0 {
                return Err(GridError::Invalid(format!("line {k} ({}-{}) needs capacity > 0", l.from, l.to)));
            }
            line_ends.push(ends);
        }
        let mut gen_bus = Vec::with_capacity(generators.len());
        for (k, g) in generators.iter().enumerate() {
            gen_bus.push(lookup(&g.bus, &format!("generator {k}"))?);
            if !g.p_min_mw.is_finite() || g.p_max_mw.is_nan() || g.p_min_mw > g.p_max_mw {
                return Err(GridError::Invalid(format!(
                    "generator {k} at `{}` needs finite p_min <= p_max",
                    g.bus
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            buses,
            lines,
            generators,
            slack,
            index,
            line_ends,
            gen_bus,
        })
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn slack_id(&self) -> &str {
        &self.buses[self.slack].id
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn line_ends(&self) -> &[(usize, usize)] {
        &self.line_ends
    }

    pub fn gen_bus(&self) -> &[usize] {
        &self.gen_bus
    }

    /// Indices of buses that may take additional load.
    pub fn manhattan(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&i| self.buses[i].is_manhattan).collect()
    }

    pub fn base_load(&self, hour: usize) -> Vec<f64> {
        self.buses.iter().map(|b| b.load_mw[hour]).collect()
    }

    /// Groups of mutually reachable buses, as bus ids.
    pub fn components(&self) -> Vec<Vec<String>> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for &(f, t) in &self.line_ends {
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![root];
            let mut comp = BTreeSet::new();
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            out.push(comp.into_iter().map(|i| self.buses[i].id.clone()).collect());
        }
        out
    }

    /// Loads `meta.json`, `buses.csv`, `lines.csv` and `generators.csv` from a
    /// directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, GridError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|source| GridError::Io { path: p.display().to_string(), source })
        };
        Self::from_strs(&read("meta.json")?, &read("buses.csv")?, &read("lines.csv")?, &read("generators.csv")?)
    }

    pub fn from_strs(meta: &str, buses: &str, lines: &str, generators: &str) -> Result<Self, GridError> {
        let meta: NetworkMeta = serde_json::from_str(meta).map_err(|e| GridError::Parse { file: "meta.json", message: e.to_string() })?;
        let buses = parse_buses(buses.as_bytes())?;
        let lines: Vec<Line> = parse_rows(lines.as_bytes(), "lines.csv", &["from", "to", "susceptance", "capacity_mw"])?;
        let generators: Vec<Generator> =
            parse_rows(generators.as_bytes(), "generators.csv", &["bus", "p_min_mw", "p_max_mw"])?;
        Self::new(meta.name, &meta.slack_bus, buses, lines, generators)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), GridError> {
        let dir = dir.as_ref();
        let io = |p: &Path, source| GridError::Io { path: p.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let meta = NetworkMeta { name: self.name.clone(), slack_bus: self.slack_id().to_string() };
        let p = dir.join("meta.json");
        std::fs::write(&p, serde_json::to_string_pretty(&meta).expect("meta serializes")).map_err(|e| io(&p, e))?;

        let mut header: Vec<String> = vec!["id".into()];
        header.extend((0..HOURS).map(|h| format!("load_mw_h{h}")));
        header.push("is_manhattan".into());
        let mut w = csv::Writer::from_path(dir.join("buses.csv"))?;
        w.write_record(&header)?;
        for b in &self.buses {
            let mut rec = vec![b.id.clone()];
            rec.extend(b.load_mw.iter().map(f64::to_string));
            rec.push(u8::from(b.is_manhattan).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("lines.csv"))?;
        for l in &self.lines {
            w.serialize(l)?;
        }
        w.flush().map_err(|e| io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("generators.csv"))?;
        for g in &self.generators {
            w.serialize(g)?;
        }
        w.flush().map_err(|e| io(dir, e))?;
        Ok(())
    }
}

fn parse_rows<T: serde::de::DeserializeOwned>(
    reader: impl Read,
    file: &'static str,
    header: &[&str],
) -> Result<Vec<T>, GridError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(GridError::Parse { file, message: format!("expected header `{}`", header.join(",")) });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| GridError::Parse { file, message: format!("row {}: {e}", i + 1) }))
        .collect()
}

fn parse_buses(reader: impl Read) -> Result<Vec<Bus>, GridError> {
    const FILE: &str = "buses.csv";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let ok = header.len() == HOURS + 2
        && &header[0] == "id"
        && &header[HOURS + 1] == "is_manhattan"
        && (0..HOURS).all(|h| header[h + 1] == format!("load_mw_h{h}"));
    if !ok {
        return Err(GridError::Parse { file: FILE, message: "expected header `id,load_mw_h0..load_mw_h23,is_manhattan`".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| GridError::Parse { file: FILE, message: format!("row {}: {message}", i + 1) };
        let mut load_mw = [0.0; HOURS];
        for (h, slot) in load_mw.iter_mut().enumerate() {
            *slot = rec[h + 1].parse().map_err(|_| bad(format!("load_mw_h{h} `{}` is not a number", &rec[h + 1])))?;
        }
        let is_manhattan = match &rec[HOURS + 1] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("is_manhattan must be 0 or 1, found `{other}`"))),
        };
        out.push(Bus { id: rec[0].to_string(), load_mw, is_manhattan });
    }
    Ok(out)
}
