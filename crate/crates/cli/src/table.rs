//! Figure-ready tables: one fixed schema, written as CSV or JSON.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const HEADER: [&str; 11] = [
    "nt",
    "nr",
    "alpha",
    "bits_per_block",
    "K",
    "metric",
    "value",
    "stderr",
    "analytic",
    "source",
    "seed",
];

pub const SIGNIFICANT_DIGITS: usize = 12;

/// One output row.
///
/// Large-system rows leave `nt` empty and carry `nr_bar` in `nr` and `b_bar`
/// in `bits_per_block`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub nt: Option<u64>,
    #[serde(with = "opt_float")]
    pub nr: Option<f64>,
    #[serde(with = "float")]
    pub alpha: f64,
    #[serde(with = "float")]
    pub bits_per_block: f64,
    #[serde(rename = "K")]
    pub k: Option<u64>,
    pub metric: String,
    #[serde(with = "float")]
    pub value: f64,
    #[serde(with = "opt_float")]
    pub stderr: Option<f64>,
    #[serde(with = "opt_float")]
    pub analytic: Option<f64>,
    pub source: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a table goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Stdout => f.write_str("<stdout>"),
            Destination::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// `%.12g`-style formatting: shortest of fixed or exponent notation, trailing
/// zeros removed, two-digit exponent.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cell_f(x: f64) -> String {
    format_g(x, SIGNIFICANT_DIGITS)
}

fn cell_opt_f(x: Option<f64>) -> String {
    x.map(cell_f).unwrap_or_default()
}

fn cell_opt_u(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[Row]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            cell_opt_u(r.nt),
            cell_opt_f(r.nr),
            cell_f(r.alpha),
            cell_f(r.bits_per_block),
            cell_opt_u(r.k),
            r.metric.clone(),
            cell_f(r.value),
            cell_opt_f(r.stderr),
            cell_opt_f(r.analytic),
            r.source.clone(),
            cell_opt_u(r.seed),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn to_json(rows: &[Row]) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(rows)?;
    out.push(b'\n');
    Ok(out)
}

pub fn render(rows: &[Row], format: Format) -> io::Result<Vec<u8>> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    }
}

pub fn from_json(bytes: &[u8]) -> serde_json::Result<Vec<Row>> {
    serde_json::from_slice(bytes)
}

/// Write `rows` to `dest`. I/O failures name the path.
pub fn emit_table(rows: &[Row], format: Format, dest: &Destination) -> Result<(), String> {
    if rows.is_empty() {
        return Err("refusing to write an empty table".into());
    }
    let bytes = render(rows, format).map_err(|e| format!("{dest}: {e}"))?;
    match dest {
        Destination::Stdout => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes)
                .and_then(|_| out.flush())
                .map_err(|e| format!("{dest}: {e}"))
        }
        Destination::File(path) => write_file(path, &bytes),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// JSON numbers for finite values, strings for `inf`, `-inf` and `nan`.
mod float {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::format_g(*x, 1))
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "super::float")] f64);

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::float::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
