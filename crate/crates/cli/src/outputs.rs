use std::path::Path;

use crate::CliResult;

/// Output files kept in memory until every one of them is ready, so a
/// failing command leaves no partial results behind.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Serializes `value` with the run configuration embedded.
    pub fn add_json(
        &mut self,
        name: impl Into<String>,
        config: &rtsched::config::RunConfig,
        key: &str,
        value: &impl serde::Serialize,
    ) -> CliResult<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("run_config".into(), serde_json::to_value(config)?);
        obj.insert(key.into(), serde_json::to_value(value)?);
        let mut bytes = serde_json::to_vec_pretty(&obj)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}
