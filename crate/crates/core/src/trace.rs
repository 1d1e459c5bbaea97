//! CSV serialization of run traces. Reals are written with 17 significant
//! digits so that a trace round-trips bit for bit.

use std::io::{self, Write};

use crate::full::FullTraceRecord;
use crate::minimal::MinimalTraceRecord;

pub const FULL_HEADER: &str = "k,beta_k,ng,v,v_h,drift_slack";
pub const MINIMAL_HEADER: &str =
    "k,beta_k,alpha_k,ng,v,w,t,min_mass_p1,min_mass_p2,delta_good";

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn write_full_trace<W: Write>(mut out: W, records: &[FullTraceRecord]) -> io::Result<()> {
    writeln!(out, "{FULL_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            fmt_real(r.beta_k),
            fmt_real(r.ng),
            fmt_real(r.v),
            fmt_real(r.v_h),
            opt_real(r.drift_slack)
        )?;
    }
    Ok(())
}

pub fn write_minimal_trace<W: Write>(mut out: W, records: &[MinimalTraceRecord]) -> io::Result<()> {
    writeln!(out, "{MINIMAL_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_real(r.beta_k),
            fmt_real(r.alpha_k),
            fmt_real(r.ng),
            fmt_real(r.v),
            fmt_real(r.w),
            fmt_real(r.t),
            fmt_real(r.min_mass_p1),
            fmt_real(r.min_mass_p2),
            r.delta_good.map(|b| b.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn full_rows() {
        let rec = FullTraceRecord { k: 1, beta_k: 0.1, ng: 0.0, v: 1.5, v_h: 1.0, drift_slack: None };
        let mut buf = Vec::new();
        write_full_trace(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(FULL_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        assert_eq!(row[0], "1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.1);
        assert_eq!(row[5], "");
    }

    #[test]
    fn minimal_rows() {
        let rec = MinimalTraceRecord {
            k: 3,
            beta_k: 0.2,
            alpha_k: 2.0,
            ng: 0.5,
            v: 0.7,
            w: 0.1,
            t: 0.8,
            min_mass_p1: 0.25,
            min_mass_p2: 0.4,
            delta_good: Some(true),
        };
        let mut buf = Vec::new();
        write_minimal_trace(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[9], "true");
    }
}
