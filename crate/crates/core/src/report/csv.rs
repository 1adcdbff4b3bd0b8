use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{EvalSide, EvaluationRecord, GridKind};

pub const CSV_HEADER: [&str; 11] = [
    "kind",
    "alpha1",
    "alpha2",
    "seed",
    "src_lang",
    "tgt_lang",
    "task",
    "eval_side",
    "metric",
    "value",
    "normalized",
];

/// Formats with 9 significant digits, plain decimal for moderate exponents and
/// trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        let trimmed = if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.')
        } else {
            &fixed
        };
        if trimmed == "-0" {
            "0".into()
        } else {
            trimmed.to_string()
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

/// Records as CSV text in output order.
pub fn emit_records_csv(records: &[EvaluationRecord]) -> Result<String> {
    let mut sorted: Vec<&EvaluationRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.output_cmp(b));
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in sorted {
        w.write_record([
            r.kind.as_str().to_string(),
            fmt_sig9(r.alpha1),
            r.alpha2.map(fmt_sig9).unwrap_or_default(),
            r.seed.to_string(),
            r.src_lang.clone(),
            r.tgt_lang.clone(),
            r.task.clone(),
            r.eval_side.as_str().to_string(),
            r.metric.clone(),
            fmt_sig9(r.value),
            r.normalized.map(fmt_sig9).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn parse_field<T: FromStr>(row: usize, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::invalid(format!("row {row}: bad {name} `{s}`")))
}

fn parse_opt(row: usize, name: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(row, name, s).map(Some)
    }
}

pub fn parse_records_csv(text: &str) -> Result<Vec<EvaluationRecord>> {
    let mut rdr = ::csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::invalid(format!(
            "unexpected csv header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let n = i + 2;
        let f = |k: usize| row.get(k).unwrap_or("");
        let kind: GridKind = f(0).parse()?;
        let alpha2 = parse_opt(n, "alpha2", f(2))?;
        if alpha2.is_some() != (kind == GridKind::TwoD) {
            return Err(Error::invalid(format!(
                "row {n}: alpha2 must be present exactly for two_d records"
            )));
        }
        let value: f64 = parse_field(n, "value", f(9))?;
        if !value.is_finite() {
            return Err(Error::invalid(format!("row {n}: non-finite value")));
        }
        out.push(EvaluationRecord {
            kind,
            alpha1: parse_field(n, "alpha1", f(1))?,
            alpha2,
            seed: parse_field(n, "seed", f(3))?,
            src_lang: f(4).to_string(),
            tgt_lang: f(5).to_string(),
            task: f(6).to_string(),
            eval_side: f(7).parse::<EvalSide>()?,
            metric: f(8).to_string(),
            value,
            normalized: parse_opt(n, "normalized", f(10))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> EvaluationRecord {
        EvaluationRecord {
            kind: GridKind::OneD,
            alpha1: 0.5,
            alpha2: None,
            seed: 0,
            src_lang: "src".into(),
            tgt_lang: "tgt".into(),
            task: "toy".into(),
            eval_side: EvalSide::Target,
            metric: "acc".into(),
            value: 0.75,
            normalized: None,
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.75), "0.75");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(-0.5), "-0.5");
        assert_eq!(fmt_sig9(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig9(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_sig9(123456.789), "123456.789");
        assert_eq!(fmt_sig9(1.5e-9), "1.5e-9");
        assert_eq!(fmt_sig9(0.0), "0");
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(
            emit_records_csv(&[]).unwrap(),
            format!("{}\n", CSV_HEADER.join(","))
        );
    }

    #[test]
    fn one_record_two_lines() {
        let text = emit_records_csv(&[rec()]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "one_d,0.5,,0,src,tgt,toy,target,acc,0.75,"
        );
        assert_eq!(parse_records_csv(&text).unwrap(), vec![rec()]);
    }

    #[test]
    fn rows_sorted() {
        let mut a = rec();
        a.alpha1 = 1.0;
        let mut b = rec();
        b.eval_side = EvalSide::Source;
        let text = emit_records_csv(&[a.clone(), rec(), b.clone()]).unwrap();
        let back = parse_records_csv(&text).unwrap();
        assert_eq!(back, vec![b, rec(), a]);
    }

    #[test]
    fn bad_rows_rejected() {
        let header = CSV_HEADER.join(",");
        assert!(parse_records_csv("a,b\n").is_err());
        let missing_a2 = format!("{header}\ntwo_d,0,,0,s,t,x,source,acc,1,\n");
        assert!(parse_records_csv(&missing_a2).is_err());
        let bad_side = format!("{header}\none_d,0,,0,s,t,x,left,acc,1,\n");
        assert!(parse_records_csv(&bad_side).is_err());
    }
}
