pub mod estimate;
pub mod learn;
pub mod oracle;
pub mod simulate;

use std::path::Path;

use anyhow::Context;

use crate::CliError;

/// Writes a file, creating parent directories first.
pub fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(CliError::config)?;
    }
    std::fs::write(path, content)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::config)
}
