use std::io::Write;
use std::path::Path;

use dce_core::Trajectory;

use crate::CliError;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
        CliError::Io(format!(
            "cannot create a temporary file in {}: {e}",
            dir.display()
        ))
    })?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot move output to {}: {e}", path.display())))?;
    Ok(())
}

/// `t,omega_q,n_expect,norm` rows.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(format!("cannot format trajectory: {e}"));
    w.write_record(["t", "omega_q", "n_expect", "norm"])
        .map_err(io)?;
    for i in 0..traj.len() {
        w.write_record([
            traj.times[i].to_string(),
            traj.omega_q[i].to_string(),
            traj.n_expect[i].to_string(),
            traj.norm[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Io(format!("cannot format trajectory: {e}")))
}
