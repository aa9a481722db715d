//! CSV emission and reading, the run manifest and plot scripts.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(headers).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A CSV file read back as text cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
        let headers = r
            .headers()
            .map_err(|e| CliError::io(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?;
        Ok(Self { headers, rows })
    }

    pub fn require(&self, path: &Path, expected: &[&str]) -> Result<(), CliError> {
        if expected.iter().all(|c| self.headers.iter().any(|h| h == c)) {
            Ok(())
        } else {
            Err(CliError::Io(format!(
                "{}: expected columns {expected:?}, found {:?}",
                path.display(),
                self.headers
            )))
        }
    }

    /// Column parsed as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| r.get(i).and_then(|v| v.parse().ok()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Pressure,
    Force,
    PdTrace,
    FreqSweep,
    SeoMap,
}

impl PlotKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Pressure => &["z_m", "pressure_pa"],
            PlotKind::Force => &["gap_m", "casimir_n", "coulomb_n", "total_n"],
            PlotKind::PdTrace => &["x_m", "reflection"],
            PlotKind::FreqSweep => &["d_m", "omega_ratio"],
            PlotKind::SeoMap => &["d_m", "P_L_W", "gamma_eff", "seo", "omega_seo_ratio"],
        }
    }

    fn body(self, csv: &str) -> String {
        let load = format!(
            "import csv\nimport math\nimport sys\n\nimport matplotlib.pyplot as plt\n\n\
             def load(path):\n    with open(path, newline=\"\") as f:\n        rows = list(csv.DictReader(f))\n    \
             return {{k: [float(r[k]) for r in rows] for k in rows[0]}} if rows else {{}}\n\n\
             data = load(\"{csv}\")\nfig, ax = plt.subplots()\n"
        );
        let plot = match self {
            PlotKind::Pressure => "ax.loglog(data[\"z_m\"], [abs(p) for p in data[\"pressure_pa\"]])\n\
                 ax.set_xlabel(\"separation (m)\")\nax.set_ylabel(\"|P| (Pa)\")\n"
                .to_string(),
            PlotKind::Force => "for key in (\"casimir_n\", \"coulomb_n\", \"total_n\"):\n    \
                 ax.loglog(data[\"gap_m\"], data[key], label=key)\nax.legend()\n\
                 ax.set_xlabel(\"gap (m)\")\nax.set_ylabel(\"force (N)\")\n"
                .to_string(),
            PlotKind::PdTrace => "ax.plot([x * 1e9 for x in data[\"x_m\"]], data[\"reflection\"])\n\
                 ax.set_xlabel(\"x (nm)\")\nax.set_ylabel(\"R_C\")\n"
                .to_string(),
            PlotKind::FreqSweep => "pts = [(d, w) for d, w in zip(data[\"d_m\"], data[\"omega_ratio\"]) if not math.isnan(w)]\n\
                 ax.plot([d * 1e6 for d, _ in pts], [w for _, w in pts])\n\
                 ax.set_xlabel(\"d (um)\")\nax.set_ylabel(\"omega_f / omega_m\")\n"
                .to_string(),
            PlotKind::SeoMap => "ds = sorted(set(data[\"d_m\"]))\nps = sorted(set(data[\"P_L_W\"]))\n\
                 grid = [[float(\"nan\")] * len(ds) for _ in ps]\n\
                 for d, p, s, w in zip(data[\"d_m\"], data[\"P_L_W\"], data[\"seo\"], data[\"omega_seo_ratio\"]):\n    \
                 grid[ps.index(p)][ds.index(d)] = w if s else float(\"nan\")\n\
                 mesh = ax.pcolormesh([d * 1e6 for d in ds], [p * 1e9 for p in ps], grid, shading=\"nearest\")\n\
                 fig.colorbar(mesh, label=\"omega_SEO / omega_m\")\n\
                 try:\n    lines = load(\"bifurcation.csv\")\nexcept FileNotFoundError:\n    lines = {}\n\
                 if lines:\n    for k in sorted(set(lines[\"line\"])):\n        \
                 idx = [i for i, v in enumerate(lines[\"line\"]) if v == k]\n        \
                 ax.plot([lines[\"d_m\"][i] * 1e6 for i in idx], [lines[\"P_L_W\"][i] * 1e9 for i in idx], \"k-\")\n\
                 ax.set_xlabel(\"d (um)\")\nax.set_ylabel(\"P_L (nW)\")\n"
                .to_string(),
        };
        format!(
            "#!/usr/bin/env python3\n{load}{plot}fig.tight_layout()\n\
             fig.savefig(sys.argv[1] if len(sys.argv) > 1 else \"{csv}\".replace(\".csv\", \".png\"))\n"
        )
    }
}

/// Writes `plot_<stem>.py` next to `csv_path` after checking its header.
pub fn emit_plot_script(csv_path: &Path, kind: PlotKind) -> Result<PathBuf, CliError> {
    Table::read(csv_path)?.require(csv_path, kind.columns())?;
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Io("bad CSV path".into()))?;
    let stem = name.trim_end_matches(".csv");
    let script = csv_path.with_file_name(format!("plot_{stem}.py"));
    fs::write(&script, kind.body(name)).map_err(|e| CliError::io(&script, e))?;
    Ok(script)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `manifest.toml`: subcommand, input hash, resolved configuration and
/// output files with their hashes. Contains no timestamps.
pub fn write_manifest(
    out: &Path,
    subcommand: &str,
    config_toml: &str,
    extra_inputs: &[(&str, Vec<u8>)],
    outputs: &[PathBuf],
) -> Result<PathBuf, CliError> {
    let mut hasher = Sha256::new();
    hasher.update(subcommand.as_bytes());
    hasher.update([0]);
    hasher.update(config_toml.as_bytes());
    for (name, bytes) in extra_inputs {
        hasher.update([0]);
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(bytes);
    }
    let mut doc = toml::Table::new();
    doc.insert("subcommand".into(), subcommand.into());
    doc.insert(
        "inputs_sha256".into(),
        hex::encode(hasher.finalize()).into(),
    );
    doc.insert("package_version".into(), env!("CARGO_PKG_VERSION").into());
    let mut files = toml::Table::new();
    for p in outputs {
        let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        files.insert(name, sha256_hex(&bytes).into());
    }
    doc.insert("outputs".into(), toml::Value::Table(files));
    let params: toml::Table =
        toml::from_str(config_toml).map_err(|e| CliError::config(e.to_string()))?;
    doc.insert("parameters".into(), toml::Value::Table(params));
    let path = out.join("manifest.toml");
    let text = toml::to_string_pretty(&doc).map_err(|e| CliError::config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
