//! CSV dialect: header row, `,` separator, `.` decimal, 9 significant digits.

use std::io::{Read, Write};

use crate::{Error, Result};

/// Formats `x` with 9 significant digits. Moderate magnitudes use fixed
/// notation, others scientific; trailing zeros are dropped.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn parse_f64(field: &str) -> Result<f64> {
    match field.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        t => t
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad number `{field}`: {e}"))),
    }
}

pub fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Reads the `value` column of a CSV with a header row. A single-column file
/// is accepted whatever its header says.
pub fn read_values<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = match headers.iter().position(|h| h == "value") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(Error::Config("input CSV has no `value` column".into())),
    };
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec
            .get(col)
            .ok_or_else(|| Error::Config(format!("row {} has no value field", i + 2)))?;
        values.push(parse_f64(field)?);
    }
    Ok(values)
}
