//! Plot-ready data: the subgroup scatter, the fitted line and the SIMEX
//! extrapolation curve.

use std::fs::File;
use std::path::{Path, PathBuf};

use hte_mediation_core::{EffectDataset, SimexFit, SlopeFit};

use crate::io::IoError;

fn writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    let file = File::create(path).map_err(|e| IoError::File { path: path.display().to_string(), message: e.to_string() })?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `scatter.csv` (one row per subgroup), `line.csv` (the fitted line
/// at the smallest and largest `gamma_hat`) and, for SIMEX fits,
/// `simex_curve.csv` (one row per grid point plus the extrapolated point at
/// `zeta = -1`). Returns the files written.
pub fn emit_plot_data(dataset: &EffectDataset, fit: &SlopeFit, simex: Option<&SimexFit>, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::File { path: dir.display().to_string(), message: e.to_string() })?;
    let mut written = Vec::new();

    let path = dir.join("scatter.csv");
    let mut w = writer(&path)?;
    w.write_record(["group_id", "gamma_hat", "tau_hat", "se_gamma", "se_tau"])?;
    for e in dataset.effects() {
        w.write_record([
            e.group_id.clone(),
            e.gamma_hat.to_string(),
            e.tau_hat.to_string(),
            e.se_gamma.to_string(),
            e.se_tau.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IoError::Csv(e.to_string()))?;
    written.push(path);

    let gammas = dataset.gamma_hats();
    let lo = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let path = dir.join("line.csv");
    let mut w = writer(&path)?;
    w.write_record(["gamma", "tau"])?;
    for x in [lo, hi] {
        w.write_record([x.to_string(), (fit.intercept_hat + fit.beta_hat * x).to_string()])?;
    }
    w.flush().map_err(|e| IoError::Csv(e.to_string()))?;
    written.push(path);

    if let Some(s) = simex {
        let path = dir.join("simex_curve.csv");
        let mut w = writer(&path)?;
        w.write_record(["zeta", "beta", "kind"])?;
        for (z, g) in &s.curve {
            w.write_record([z.to_string(), g.to_string(), "simulated".into()])?;
        }
        let (z, g) = s.extrapolated_point();
        w.write_record([z.to_string(), g.to_string(), "extrapolated".into()])?;
        w.flush().map_err(|e| IoError::Csv(e.to_string()))?;
        written.push(path);
    }
    Ok(written)
}
