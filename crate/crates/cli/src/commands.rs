use std::fs;
use std::path::{Path, PathBuf};

use optomech::calibrate::{
    fit_frequency_curve, fit_pd_trace, FitResult, FitSpec, FrequencyModel, MeasuredSeries,
    PdTraceModel,
};
use optomech::cavity::{pd_trace, reflection};
use optomech::equilibrium::{distance_at_frequency_ratio, frequency_vs_distance, pull_in_distance};
use optomech::lifshitz::pressure_prefactor;
use optomech::proximity::{
    casimir_force, casimir_pressure_magnitude, force_gradient, trapped_charge_force,
};
use optomech::seo::{bifurcation_lines, seo_grid, CellStatus};

use crate::config::{FitKind, RunConfig};
use crate::error::CliError;
use crate::output::{emit_plot_script, fmt_f64, write_csv, write_manifest, PlotKind};
use crate::Command;

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let config_toml = cfg.to_toml();
    let mut extra_inputs = Vec::new();
    let mut files = match command {
        Command::Defaults => {
            let path = out.join("config.toml");
            fs::write(&path, &config_toml).map_err(|e| CliError::io(&path, e))?;
            vec![path]
        }
        Command::Pressure => pressure(cfg, out)?,
        Command::Force => force(cfg, out)?,
        Command::Pdtrace => pdtrace(cfg, out)?,
        Command::Freqsweep => freqsweep(cfg, out)?,
        Command::Pullin => pullin(cfg, out)?,
        Command::Seomap => seomap(cfg, out)?,
        Command::Fit => {
            let (files, data) = fit(cfg, out)?;
            extra_inputs.push(("data", data));
            files
        }
    };
    let manifest = write_manifest(out, command.name(), &config_toml, &extra_inputs, &files)?;
    files.push(manifest);
    for f in &files {
        log::info!("wrote {}", f.display());
    }
    Ok(files)
}

fn with_plot(csv: PathBuf, kind: PlotKind) -> Result<Vec<PathBuf>, CliError> {
    let script = emit_plot_script(&csv, kind)?;
    Ok(vec![csv, script])
}

fn pressure(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.force_model()?;
    let eps = cfg.materials.epsilon;
    let rows = cfg
        .pressure
        .values("pressure")?
        .into_iter()
        .map(|z| {
            let p = casimir_pressure_magnitude(z, &model)?;
            Ok(vec![
                fmt_f64(z),
                fmt_f64(p / pressure_prefactor(z, eps).abs()),
                fmt_f64(-p),
            ])
        })
        .collect::<Result<Vec<_>, optomech::Error>>()?;
    let path = out.join("pressure.csv");
    write_csv(&path, &["z_m", "lifshitz_factor", "pressure_pa"], &rows)?;
    with_plot(path, PlotKind::Pressure)
}

fn force(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.force_model()?;
    let rows = cfg
        .force
        .values("force")?
        .into_iter()
        .map(|gap| {
            let fc = casimir_force(gap, &model)?;
            let ft = trapped_charge_force(gap, &model.charge)?;
            let g = force_gradient(gap, &model)?;
            Ok(vec![
                fmt_f64(gap),
                fmt_f64(fc),
                fmt_f64(ft),
                fmt_f64(fc + ft),
                fmt_f64(g),
            ])
        })
        .collect::<Result<Vec<_>, optomech::Error>>()?;
    let path = out.join("force.csv");
    write_csv(
        &path,
        &[
            "gap_m",
            "casimir_n",
            "coulomb_n",
            "total_n",
            "gradient_n_per_m",
        ],
        &rows,
    )?;
    with_plot(path, PlotKind::Force)
}

fn pdtrace(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cavity = cfg.cavity();
    let xs = cfg.pdtrace.grid.values("pdtrace.grid")?;
    let volts = pd_trace(&xs, &cavity, cfg.pdtrace.pd_gain, cfg.pdtrace.pd_offset)?;
    let rows: Vec<Vec<String>> = xs
        .iter()
        .zip(&volts)
        .map(|(&x, &v)| vec![fmt_f64(x), fmt_f64(reflection(x, &cavity)), fmt_f64(v)])
        .collect();
    let path = out.join("pdtrace.csv");
    write_csv(&path, &["x_m", "reflection", "pd_v"], &rows)?;
    with_plot(path, PlotKind::PdTrace)
}

fn freqsweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.force_model()?;
    let mode = cfg.mode()?;
    let grid = cfg.freqsweep.values("freqsweep")?;
    let recs = frequency_vs_distance(&grid, &model, &mode)?;
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.d),
                fmt_f64(r.x_f),
                fmt_f64(r.omega_ratio),
                flag(r.stable),
            ]
        })
        .collect();
    let path = out.join("freqsweep.csv");
    write_csv(&path, &["d_m", "x_f_m", "omega_ratio", "stable"], &rows)?;
    with_plot(path, PlotKind::FreqSweep)
}

fn pullin(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.force_model()?;
    let mode = cfg.mode()?;
    let p = &cfg.pullin;
    let d_pi = pull_in_distance(&model, &mode, (p.bracket_min, p.bracket_max))?;
    // Just above pull-in the ratio is near zero, so this brackets the target
    let d_target = distance_at_frequency_ratio(
        p.target_ratio,
        &model,
        &mode,
        (d_pi * (1.0 + 1e-6), p.target_max),
    )?;
    let path = out.join("pullin.csv");
    write_csv(
        &path,
        &["d_pull_in_m", "target_ratio", "d_at_target_m"],
        &[vec![
            fmt_f64(d_pi),
            fmt_f64(p.target_ratio),
            fmt_f64(d_target),
        ]],
    )?;
    Ok(vec![path])
}

fn seomap(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.seo_model()?;
    let d = cfg.seomap.distance.values("seomap.distance")?;
    let p = cfg.seomap.power.values("seomap.power")?;
    let grid = seo_grid(&d, &p, &model)?;
    let mut rows = Vec::with_capacity(d.len() * p.len());
    for (j, &pl) in p.iter().enumerate() {
        for (i, &dd) in d.iter().enumerate() {
            let status = match grid.status[j][i] {
                CellStatus::Solved => "0",
                CellStatus::PullIn => "1",
                CellStatus::Failed(_) => "2",
            };
            rows.push(vec![
                fmt_f64(dd),
                fmt_f64(pl),
                fmt_f64(grid.gamma_eff[j][i]),
                flag(grid.seo_mask[j][i]),
                fmt_f64(grid.omega_seo_ratio[j][i]),
                status.to_string(),
            ]);
        }
    }
    let map = out.join("seomap.csv");
    write_csv(
        &map,
        &[
            "d_m",
            "P_L_W",
            "gamma_eff",
            "seo",
            "omega_seo_ratio",
            "status",
        ],
        &rows,
    )?;

    let lines = bifurcation_lines(&grid);
    let line_rows: Vec<Vec<String>> = lines
        .iter()
        .enumerate()
        .flat_map(|(k, l)| {
            l.iter()
                .map(move |&(x, y)| vec![k.to_string(), fmt_f64(x), fmt_f64(y)])
        })
        .collect();
    let bif = out.join("bifurcation.csv");
    write_csv(&bif, &["line", "d_m", "P_L_W"], &line_rows)?;

    let th_rows: Vec<Vec<String>> = grid
        .thresholds()
        .iter()
        .zip(&d)
        .map(|(t, &dd)| vec![fmt_f64(dd), fmt_f64(t.unwrap_or(f64::NAN))])
        .collect();
    let th = out.join("thresholds.csv");
    write_csv(&th, &["d_m", "threshold_W"], &th_rows)?;

    let mut files = with_plot(map, PlotKind::SeoMap)?;
    files.extend([bif, th]);
    Ok(files)
}

fn fit(cfg: &RunConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<u8>), CliError> {
    let f = &cfg.fit;
    let data_path = f
        .data
        .as_ref()
        .ok_or_else(|| CliError::config("fit.data: path to the measured CSV is required"))?;
    let data_path = Path::new(data_path);
    let bytes = fs::read(data_path).map_err(|e| CliError::io(data_path, e))?;
    let data = MeasuredSeries::from_csv(f.kind.into(), bytes.as_slice())?;
    let mut spec = FitSpec::new(&f.free).max_iterations(f.max_iterations);
    for (k, &v) in &f.initial {
        spec = spec.initial(k, v);
    }
    for (k, &[lo, hi]) in &f.bounds {
        spec = spec.bounds(k, lo, hi);
    }
    let result = match f.kind {
        FitKind::FrequencyVsDistance => {
            let model = FrequencyModel {
                force: cfg.force_model()?,
                mode: cfg.mode()?,
            };
            fit_frequency_curve(&data, &model, &spec)?
        }
        FitKind::PdTrace => {
            let model = PdTraceModel {
                cavity: cfg.cavity(),
                piezo_gain: 1.0,
                pd_gain: cfg.pdtrace.pd_gain,
                pd_offset: cfg.pdtrace.pd_offset,
            };
            fit_pd_trace(&data, &model, &spec)?
        }
    };
    let report = out.join("fit_report.txt");
    fs::write(&report, report_text(f.kind, &result)).map_err(|e| CliError::io(&report, e))?;
    let (xc, yc) = optomech::calibrate::SeriesKind::from(f.kind).columns();
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| {
            vec![
                fmt_f64(data.abscissa[i]),
                fmt_f64(data.ordinate[i]),
                fmt_f64(result.residuals[i]),
            ]
        })
        .collect();
    let residuals = out.join("fit_residuals.csv");
    write_csv(&residuals, &[xc, yc, "residual"], &rows)?;
    Ok((vec![report, residuals], bytes))
}

fn report_text(kind: FitKind, r: &FitResult) -> String {
    let kind = match kind {
        FitKind::FrequencyVsDistance => "frequency_vs_distance",
        FitKind::PdTrace => "pd_trace",
    };
    let mut s = format!(
        "kind = {kind}\nconverged = {}\ndegenerate = {}\niterations = {}\nresidual_norm = {}\nfree = {}\n",
        r.converged,
        r.degenerate,
        r.iterations,
        fmt_f64(r.residual_norm),
        r.free.join(",")
    );
    for (k, v) in &r.parameters {
        s.push_str(&format!("param.{k} = {}\n", fmt_f64(*v)));
    }
    if let Some(cov) = &r.covariance {
        for (i, name) in r.free.iter().enumerate() {
            s.push_str(&format!(
                "stderr.{name} = {}\n",
                fmt_f64(cov[(i, i)].sqrt())
            ));
        }
    }
    s
}
