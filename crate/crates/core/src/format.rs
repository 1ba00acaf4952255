//! Plain-text table formats shared by the CLI and downstream plotting.
//!
//! Trace table: header `step,p_marked,p_subspace,p_conditional`, one row
//! per recorded step, values with 12 significant digits, `nan` where the
//! conditional probability is undefined.
//!
//! Summary table: header `generation,n_last,t_p,two_sqrt_n_last,p_bar`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::search::{ProbabilityTrace, SummaryRow, TraceRow};

pub const TRACE_HEADER: &str = "step,p_marked,p_subspace,p_conditional";
pub const SUMMARY_HEADER: &str = "generation,n_last,t_p,two_sqrt_n_last,p_bar";

const SIGNIFICANT: i32 = 12;

/// `%.12g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (SIGNIFICANT - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT).contains(&exp) {
        let decimals = (SIGNIFICANT - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_trace<T: Real>(trace: &ProbabilityTrace<T>) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace.rows() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.step,
            format_sig(r.p_marked.as_f64()),
            format_sig(r.p_subspace.as_f64()),
            format_sig(r.p_conditional.map_or(f64::NAN, Real::as_f64)),
        );
    }
    out
}

fn parse_field<F: std::str::FromStr>(field: Option<&str>, line: usize, name: &str) -> Result<F> {
    let field = field.ok_or_else(|| Error::format(format!("line {line}"), format!("missing {name}")))?;
    field
        .trim()
        .parse()
        .map_err(|_| Error::format(format!("line {line}"), format!("cannot parse {name} from {field:?}")))
}

fn check_header(text: &str, header: &str) -> Result<()> {
    match text.lines().next() {
        Some(h) if h.trim() == header => Ok(()),
        Some(h) => Err(Error::format("line 1", format!("expected header {header:?}, found {h:?}"))),
        None => Err(Error::format("line 1", "empty input")),
    }
}

pub fn read_trace(text: &str) -> Result<ProbabilityTrace<f64>> {
    check_header(text, TRACE_HEADER)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let mut f = line.split(',');
        let step: usize = parse_field(f.next(), n, "step")?;
        let p_marked: f64 = parse_field(f.next(), n, "p_marked")?;
        let p_subspace: f64 = parse_field(f.next(), n, "p_subspace")?;
        let cond: f64 = parse_field(f.next(), n, "p_conditional")?;
        if f.next().is_some() {
            return Err(Error::format(format!("line {n}"), "too many fields"));
        }
        rows.push(TraceRow {
            step,
            p_marked,
            p_subspace,
            p_conditional: (!cond.is_nan()).then_some(cond),
        });
    }
    Ok(ProbabilityTrace::from_rows(rows))
}

pub fn write_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.generation,
            r.n_last,
            r.t_p,
            format_sig(r.two_sqrt_n_last),
            format_sig(r.p_bar)
        );
    }
    out
}

pub fn read_summary(text: &str) -> Result<Vec<SummaryRow>> {
    check_header(text, SUMMARY_HEADER)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let mut f = line.split(',');
        rows.push(SummaryRow {
            generation: parse_field(f.next(), n, "generation")?,
            n_last: parse_field(f.next(), n, "n_last")?,
            t_p: parse_field(f.next(), n, "t_p")?,
            two_sqrt_n_last: parse_field(f.next(), n, "two_sqrt_n_last")?,
            p_bar: parse_field(f.next(), n, "p_bar")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.0 / 27.0), "0.037037037037");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(10.392304845413264), "10.3923048454");
        assert_eq!(format_sig(1.5e-9), "1.5e-9");
        assert_eq!(format_sig(f64::NAN), "nan");
    }

    #[test]
    fn trace_table_layout() {
        let tr = ProbabilityTrace::from_pairs(&[(0.25, 0.5), (0.0, 0.0)]);
        let text = write_trace(&tr);
        assert_eq!(text, "step,p_marked,p_subspace,p_conditional\n0,0.25,0.5,0.5\n1,0,0,nan\n");
        assert_eq!(read_trace(&text).unwrap(), tr);
    }

    #[test]
    fn bad_tables_report_line() {
        let err = read_trace("step,p_marked,p_subspace,p_conditional\n0,0.1,x,0.2\n").unwrap_err();
        assert!(matches!(err, Error::Format { ref location, .. } if location == "line 2"));
        assert!(read_summary("nope\n").is_err());
    }

    proptest! {
        #[test]
        fn twelve_digit_round_trip(x in 1e-12f64..1.0) {
            let back: f64 = format_sig(x).parse().unwrap();
            prop_assert!(((back - x) / x).abs() < 1e-11);
        }
    }
}
