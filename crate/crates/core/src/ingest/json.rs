use std::path::Path;

use crate::model::{Clinic, ClinicFile, ProtocolTable, TreatmentProtocol};
use crate::Result;

pub fn parse_protocols(json: &str) -> Result<ProtocolTable> {
    let list: Vec<TreatmentProtocol> = serde_json::from_str(json)?;
    ProtocolTable::new(list)
}

pub fn load_protocols(path: &Path) -> Result<ProtocolTable> {
    parse_protocols(&std::fs::read_to_string(path)?)
}

pub fn parse_clinic(json: &str) -> Result<Clinic> {
    let file: ClinicFile = serde_json::from_str(json)?;
    Clinic::from_file(file)
}

pub fn load_clinic(path: &Path) -> Result<Clinic> {
    parse_clinic(&std::fs::read_to_string(path)?)
}
