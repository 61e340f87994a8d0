//! Command-line workflows: ingestion, configuration, reports and the Monte
//! Carlo driver.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod mc;
pub mod report;

pub use commands::{rerun, run, Command, Manifest, Rerun};
pub use config::RunConfig;
pub use ingest::{ingest, ingest_readers, Dataset, IngestSummary};
pub use mc::{run_mc, McReport, McRow};

/// Six significant digits, shortest representation of the rounded value.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{r}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(0.453), "0.453");
        assert_eq!(fmt6(1.0 / 3.0), "0.333333");
        assert_eq!(fmt6(-123456789.0), "-123457000");
        assert_eq!(fmt6(2.0f64.sqrt() * 1e-5), "0.0000141421");
    }
}
