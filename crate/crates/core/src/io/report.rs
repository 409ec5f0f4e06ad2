//! Neighborhood report CSV.
//!
//! ```text
//! population,count
//! particles,55
//! ab_initio_calculations,45
//! _average,21.0
//! ```
//!
//! Rows are ranked by descending count then name; the average row always
//! comes last with one decimal. LF line endings, UTF-8.

use std::io::{Read, Write};

use thiserror::Error;

use crate::metrics::{NeighborhoodReport, PopulationCount};

pub const HEADER: [&str; 2] = ["population", "count"];
pub const AVERAGE_ROW: &str = "_average";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report schema: {0}")]
    Schema(String),
}

fn schema(msg: impl Into<String>) -> ReportError {
    ReportError::Schema(msg.into())
}

/// Serialize `report` to `sink`; returns the number of bytes written.
pub fn write_report_csv<W: Write>(
    report: &NeighborhoodReport,
    mut sink: W,
) -> Result<usize, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER)?;
    for row in report.ranked() {
        w.write_record([row.name.as_str(), &row.count.to_string()])?;
    }
    w.write_record([AVERAGE_ROW, &format!("{:.1}", report.global_average)])?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    sink.write_all(&bytes)?;
    Ok(bytes.len())
}

/// Read a report CSV back. Target, distance and tick are not part of the
/// file and come back empty; the average is taken from the `_average` row.
pub fn read_report_csv<R: Read>(source: R) -> Result<NeighborhoodReport, ReportError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(source);
    let mut records = r.records();
    let header = records.next().ok_or_else(|| schema("empty file"))??;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(schema(format!(
            "expected header `population,count`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut counts = Vec::new();
    let mut average = None;
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if average.is_some() {
            return Err(schema(format!("line {line}: row after `{AVERAGE_ROW}`")));
        }
        let (name, value) = (&rec[0], &rec[1]);
        if name == AVERAGE_ROW {
            let avg: f64 = value
                .parse()
                .map_err(|_| schema(format!("line {line}: bad average {value:?}")))?;
            average = Some(avg);
        } else {
            let count: u64 = value
                .parse()
                .map_err(|_| schema(format!("line {line}: bad count {value:?}")))?;
            counts.push(PopulationCount {
                name: name.to_string(),
                count,
            });
        }
    }
    let global_average = average.ok_or_else(|| schema(format!("missing `{AVERAGE_ROW}` row")))?;
    Ok(NeighborhoodReport {
        target: String::new(),
        distance: 0.0,
        tick: 0,
        counts,
        global_average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, count: u64) -> PopulationCount {
        PopulationCount {
            name: name.into(),
            count,
        }
    }

    fn csv_of(report: &NeighborhoodReport) -> String {
        let mut buf = Vec::new();
        let n = write_report_csv(report, &mut buf).unwrap();
        assert_eq!(n, buf.len());
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_report() {
        let r = NeighborhoodReport::from_counts("t", 2.0, 0, vec![]);
        assert_eq!(csv_of(&r), "population,count\n_average,0.0\n");
    }

    #[test]
    fn ties_in_name_order() {
        let r = NeighborhoodReport::from_counts(
            "t",
            2.0,
            0,
            vec![row("zeta", 5), row("alpha", 2), row("beta", 5)],
        );
        assert_eq!(
            csv_of(&r),
            "population,count\nbeta,5\nzeta,5\nalpha,2\n_average,4.0\n"
        );
    }

    #[test]
    fn published_table_leads_with_particles() {
        let r = NeighborhoodReport {
            target: "walkers".into(),
            distance: 2.0,
            tick: 1000,
            counts: vec![
                row("ab_initio_calculations", 45),
                row("particles", 55),
                row("abnormal_magnetic", 16),
            ],
            global_average: 21.0,
        };
        let text = csv_of(&r);
        assert_eq!(text.lines().nth(1), Some("particles,55"));
        assert!(text.ends_with("_average,21.0\n"));
        let back = read_report_csv(text.as_bytes()).unwrap();
        assert_eq!(back.global_average, 21.0);
        assert_eq!(back.count_of("particles"), Some(55));
    }

    #[test]
    fn schema_violations() {
        for bad in [
            "",
            "name,count\na,1\n_average,1.0\n",
            "population,count\na,x\n_average,1.0\n",
            "population,count\na,1\n",
            "population,count\n_average,1.0\na,1\n",
            "population,count\na\n_average,1.0\n",
        ] {
            assert!(read_report_csv(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
