//! CSV and JSON encodings of profiles and trajectories. Floats are written
//! with 17 significant digits so that every value reads back bit-exact.

use std::io::{Read, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{HenonError, Result};
use crate::numeric::derivative5;
use crate::params::{phi, ProblemParams};
use crate::phase::PhaseTrajectory;
use crate::radial::{RadialSolution, SolveMeta};
use crate::transforms::{TransformKind, TransformedProfile};

/// Compact JSON formatter printing every float as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FullPrecision);
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn radial_to_csv<W: Write>(sol: &RadialSolution, writer: W) -> Result<()> {
    write_rows(
        writer,
        &["r", "u", "flux"],
        (0..sol.len()).map(|i| vec![fmt_f64(sol.r[i]), fmt_f64(sol.u[i]), fmt_f64(sol.flux[i])]),
    )
}

fn read_columns<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Result<Option<Vec<f64>>> {
    let Some(j) = header.iter().position(|h| h == name) else {
        return Ok(None);
    };
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.get(j)
                .ok_or_else(|| HenonError::InvalidArgument(format!("row {} has no `{name}` field", i + 1)))?
                .parse::<f64>()
                .map_err(|e| HenonError::InvalidArgument(format!("row {}: bad `{name}`: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn required(header: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>> {
    column(header, rows, name)?.ok_or_else(|| HenonError::InvalidArgument(format!("CSV is missing column `{name}`")))
}

/// Reads `r,u[,flux]`. Without a flux column the flux is built from
/// five-point differences of `u`.
pub fn radial_from_csv<R: Read>(reader: R, params: &ProblemParams) -> Result<RadialSolution> {
    let (header, rows) = read_columns(reader)?;
    let r = required(&header, &rows, "r")?;
    let u = required(&header, &rows, "u")?;
    let flux = match column(&header, &rows, "flux")? {
        Some(f) => f,
        None => {
            if r.len() < 5 {
                return Err(HenonError::InsufficientData(
                    "need at least 5 rows to differentiate u".into(),
                ));
            }
            let n = params.dim();
            derivative5(&r, &u)
                .iter()
                .zip(&r)
                .map(|(du, r)| r.powf(n - 1.0) * phi(*du, params.p))
                .collect()
        }
    };
    RadialSolution::new(*params, r, u, flux, SolveMeta::analytic("csv"))
}

pub fn kind_tag(kind: TransformKind) -> &'static str {
    match kind {
        TransformKind::EmdenFowler => "EmdenFowler",
        TransformKind::LogDelta => "LogDelta",
        TransformKind::LogPN => "LogPN",
    }
}

fn parse_kind(tag: &str) -> Result<TransformKind> {
    match tag {
        "EmdenFowler" => Ok(TransformKind::EmdenFowler),
        "LogDelta" => Ok(TransformKind::LogDelta),
        "LogPN" => Ok(TransformKind::LogPN),
        other => Err(HenonError::InvalidArgument(format!("unknown transform kind `{other}`"))),
    }
}

pub fn profile_to_csv<W: Write>(profile: &TransformedProfile, writer: W) -> Result<()> {
    let tag = kind_tag(profile.kind);
    write_rows(
        writer,
        &["kind", "s", "value", "dvalue"],
        (0..profile.len()).map(|i| {
            vec![
                tag.to_string(),
                fmt_f64(profile.s[i]),
                fmt_f64(profile.value[i]),
                fmt_f64(profile.dvalue[i]),
            ]
        }),
    )
}

pub fn profile_from_csv<R: Read>(reader: R) -> Result<TransformedProfile> {
    let (header, rows) = read_columns(reader)?;
    let j = header
        .iter()
        .position(|h| h == "kind")
        .ok_or_else(|| HenonError::InvalidArgument("CSV is missing column `kind`".into()))?;
    let first = rows
        .first()
        .ok_or_else(|| HenonError::InsufficientData("empty profile".into()))?;
    let kind = parse_kind(&first[j])?;
    if rows.iter().any(|row| row.get(j) != Some(&first[j])) {
        return Err(HenonError::InvalidArgument("mixed transform kinds in one file".into()));
    }
    TransformedProfile::new(
        kind,
        required(&header, &rows, "s")?,
        required(&header, &rows, "value")?,
        required(&header, &rows, "dvalue")?,
    )
}

pub fn trajectory_to_csv<W: Write>(traj: &PhaseTrajectory, writer: W) -> Result<()> {
    write_rows(
        writer,
        &["s", "w", "dw"],
        traj.s
            .iter()
            .zip(&traj.states)
            .map(|(s, st)| vec![fmt_f64(*s), fmt_f64(st.w), fmt_f64(st.dw)]),
    )
}
