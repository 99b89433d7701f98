//! Bundled 127-record survey fixture (104 valid journeys).

use crate::error::Result;
use crate::ingest::{read_dataset, CleansingReport, Format};
use crate::model::Dataset;

pub const SURVEY_CSV: &str = include_str!("../data/survey_fixture.csv");
pub const PROVENANCE: &str = "bundled survey fixture";

pub fn survey() -> Result<(Dataset, CleansingReport)> {
    read_dataset(SURVEY_CSV.as_bytes(), Format::Csv, PROVENANCE)
}
