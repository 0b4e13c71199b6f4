//! Experiment execution: everything is computed in memory first, so a
//! failed run leaves no partial outputs behind.

use crate::manifest::{tau_grid, ExperimentManifest, Kind};
use anyhow::{anyhow, Context, Result};
use ilc_core::controller::{
    self, confidence_floor, parameter_sweep, run_campaign, similarity_thresholds,
    SuggestionSource,
};
use ilc_core::embedding::{bin, embed, shared_grid};
use ilc_core::plant::{LorenzPlant, Plant, PlantRunSpec};
use ilc_core::signal::{greedy_tau_scan, hilbert_phase, smi_reconstruct, welch_psd};
use ilc_core::surrogate;

/// One CSV table to be written.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn cloned_as(&self, name: &str) -> Self {
        Self {
            name: name.to_string(),
            header: self.header.clone(),
            rows: self.rows.clone(),
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Tables plus derived metadata for the sidecar record.
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub derived: Vec<(String, toml::Value)>,
}

pub fn execute(manifest: &ExperimentManifest) -> Result<RunOutput> {
    let plant = LorenzPlant {
        rtol: manifest.plant.rtol,
        atol: manifest.plant.atol,
    };
    match manifest.kind {
        Kind::Trajectory => trajectory(manifest, &plant),
        Kind::Sweep => sweep(manifest, &plant),
        Kind::Floor => floor(manifest, &plant),
        Kind::Campaign1d => campaign_1d(manifest, &plant),
        Kind::Campaign2d | Kind::CampaignRobust => campaign_2d(manifest, &plant),
        Kind::Psd => psd(manifest, &plant),
        Kind::Phase => phase(manifest, &plant),
        Kind::SmiScan => smi_scan(manifest, &plant),
    }
}

fn trajectory(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest
        .trajectory
        .as_ref()
        .ok_or_else(|| anyhow!("missing [trajectory] section"))?;
    let dt = manifest.plant.dt;
    let reference = manifest.reference_params().map_err(|e| anyhow!(e))?;
    let warmup = (section.warmup / dt).round() as usize;
    let n_pre = (section.pre_duration / dt).round() as usize;
    let n_post = (section.post_duration / dt).round() as usize;

    let pre = plant.run(&PlantRunSpec::new(
        reference,
        manifest.initial_state(),
        dt,
        n_pre,
        warmup,
    )?)?;

    let mut table = Table::new("fig2", &["t", "x", "y", "z"]);
    let mut signal = Vec::with_capacity(n_pre + n_post);
    for (k, s) in pre.samples.iter().enumerate() {
        let t = -(section.pre_duration) + (k + 1) as f64 * dt;
        table.push(vec![fmt(t), fmt(s.x), fmt(s.y), fmt(s.z)]);
        signal.push(s.x);
    }

    let mut derived: Vec<(String, toml::Value)> = Vec::new();
    if n_post > 0 {
        let mut changed = reference;
        for (name, &value) in &section.change {
            changed.set(name, value).map_err(|e| anyhow!("{e}"))?;
            derived.push((format!("changed_{name}"), toml::Value::Float(value)));
        }
        let post = plant.run(&PlantRunSpec::new(changed, pre.last_state(), dt, n_post, 0)?)?;
        for (k, s) in post.samples.iter().enumerate() {
            let t = (k + 1) as f64 * dt;
            table.push(vec![fmt(t), fmt(s.x), fmt(s.y), fmt(s.z)]);
            signal.push(s.x);
        }
    }

    let mut tables = vec![table.cloned_as("results"), table];
    if section.emit_tlpp {
        let embedded = embed(&signal, &[manifest.embedding.tau1], dt)?;
        let mut unbinned = Table::new("fig4a", &["x", "x_lagged"]);
        for p in embedded.iter_points().take(section.tlpp_points) {
            unbinned.push(vec![fmt(p[0]), fmt(p[1])]);
        }
        let grid = shared_grid(&embedded, manifest.embedding.bins, manifest.embedding.padding)?;
        let pdf = bin(&embedded, &grid)?;
        let mut binned = Table::new("fig4b", &["ix", "iy", "x_center", "y_center", "count"]);
        for (ix, iy, count) in pdf.occupied() {
            let center = grid.center(ix, iy);
            binned.push(vec![
                ix.to_string(),
                iy.to_string(),
                fmt(center[0]),
                fmt(center[1]),
                fmt(count),
            ]);
        }
        derived.push(("grid_lo".into(), toml_pair(grid.lo)));
        derived.push(("grid_hi".into(), toml_pair(grid.hi)));
        tables.push(unbinned);
        tables.push(binned);
    }
    Ok(RunOutput { tables, derived })
}

fn sweep(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("missing [sweep] section"))?;
    let config = manifest.base_config()?;
    let values: Vec<f64> = if section.count == 1 {
        vec![section.start]
    } else {
        (0..section.count)
            .map(|k| {
                section.start
                    + (section.stop - section.start) * k as f64 / (section.count - 1) as f64
            })
            .collect()
    };
    let points = parameter_sweep(plant, &config, &section.parameter, &values)
        .context("parameter sweep failed")?;
    let mut table = Table::new("fig5a", &[&section.parameter, "emd", "log10_emd"]);
    for p in &points {
        table.push(vec![fmt(p.value), fmt(p.raw_emd), fmt(p.log10_emd)]);
    }
    let argmin = points
        .iter()
        .min_by(|a, b| a.raw_emd.total_cmp(&b.raw_emd))
        .expect("non-empty sweep");
    let derived = vec![
        ("sweep_parameter".into(), toml::Value::String(section.parameter.clone())),
        ("minimum_value".into(), toml::Value::Float(argmin.value)),
        ("minimum_emd".into(), toml::Value::Float(argmin.raw_emd)),
    ];
    Ok(RunOutput {
        tables: vec![table.cloned_as("results"), table],
        derived,
    })
}

fn floor(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest.floor.clone().unwrap_or_default();
    let config = manifest.base_config()?;
    let result = confidence_floor(plant, &config, section.n_runs, section.perturbation)
        .context("confidence floor failed")?;
    let mut table = Table::new("fig6", &["run", "emd", "log10_emd"]);
    for (run, &sample) in result.samples.iter().enumerate() {
        table.push(vec![run.to_string(), fmt(sample), fmt(sample.max(1.0).log10())]);
    }
    let (tight, loose) = similarity_thresholds(result.floor);
    let derived = vec![
        ("floor_mean".into(), toml::Value::Float(result.mean)),
        ("floor_stddev".into(), toml::Value::Float(result.stddev)),
        ("floor".into(), toml::Value::Float(result.floor)),
        ("floor_log10".into(), toml::Value::Float(result.floor.log10())),
        ("threshold_tight".into(), toml::Value::Float(tight)),
        ("threshold_loose".into(), toml::Value::Float(loose)),
    ];
    Ok(RunOutput {
        tables: vec![table.cloned_as("results"), table],
        derived,
    })
}

fn history_table(result: &controller::CampaignResult, names: &[String]) -> Table {
    let mut header = vec!["iteration".to_string(), "source".to_string()];
    header.extend(names.iter().cloned());
    header.push("emd".to_string());
    header.push("log10_emd".to_string());
    let mut table = Table {
        name: "results".to_string(),
        header,
        rows: Vec::new(),
    };
    for record in &result.history {
        let mut row = vec![
            record.index.to_string(),
            match record.source {
                SuggestionSource::Prior => "prior".to_string(),
                SuggestionSource::Acquisition => "acquisition".to_string(),
            },
        ];
        row.extend(record.params.iter().map(|&v| fmt(v)));
        row.push(fmt(record.raw_emd));
        row.push(fmt(record.log10_emd));
        table.push(row);
    }
    table
}

fn campaign_derived(result: &controller::CampaignResult, config: &controller::CampaignConfig) -> Vec<(String, toml::Value)> {
    let mut derived = vec![
        (
            "best_guess".into(),
            toml::Value::Array(result.best_guess.iter().map(|&v| toml::Value::Float(v)).collect()),
        ),
        (
            "best_observed_params".into(),
            toml::Value::Array(
                result
                    .best_observed
                    .params
                    .iter()
                    .map(|&v| toml::Value::Float(v))
                    .collect(),
            ),
        ),
        (
            "best_observed_log10_emd".into(),
            toml::Value::Float(result.best_observed.objective),
        ),
        (
            "actuation_interval".into(),
            toml::Value::Float(config.actuation_interval()),
        ),
        ("n_failures".into(), toml::Value::Integer(result.failures.len() as i64)),
    ];
    if !config.hidden.is_empty() {
        for (name, value) in &config.hidden {
            derived.push((format!("hidden_{name}"), toml::Value::Float(*value)));
        }
    }
    derived
}

fn campaign_1d(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest.controller.as_ref().expect("validated");
    let config = manifest.campaign_config()?;
    let result = run_campaign(plant, &config).context("campaign failed")?;
    let name = &section.parameters[0];
    let (lo, hi) = (section.lower[0], section.upper[0]);
    let curve: Vec<f64> = (0..section.curve_points)
        .map(|k| lo + (hi - lo) * k as f64 / (section.curve_points - 1) as f64)
        .collect();

    let mut tables = vec![history_table(&result, section.parameters.as_slice())];

    // Per-iteration model snapshots: replay the in-loop fit sequence
    // (deterministic, same warm-start chain) over history prefixes.
    if section.snapshots {
        let observations: Vec<surrogate::Observation> = result
            .history
            .iter()
            .map(|r| surrogate::Observation {
                params: r.params.clone(),
                objective: r.log10_emd,
            })
            .collect();
        let mut snapshots = Table::new("fig7", &["iteration", name, "mu_log10_emd", "sigma_log10_emd"]);
        let mut warm: Option<surrogate::Hyperparams> = None;
        for upto in config.n_prior..=observations.len() {
            let model = surrogate::fit_with_warm_start(
                &observations[..upto],
                &config.space,
                &config.gp,
                warm.as_ref(),
            )?;
            let iteration = upto - config.n_prior;
            for &v in &curve {
                let (mu, sigma) = model.predict(&[v])?;
                snapshots.push(vec![iteration.to_string(), fmt(v), fmt(mu), fmt(sigma)]);
            }
            warm = Some(model.hypers().clone());
        }
        tables.push(snapshots);
    }

    let mut final_curve = Table::new("fig8", &[name, "mu_log10_emd", "sigma_log10_emd"]);
    for &v in &curve {
        let (mu, sigma) = result.final_model.predict(&[v])?;
        final_curve.push(vec![fmt(v), fmt(mu), fmt(sigma)]);
    }
    tables.push(final_curve);

    Ok(RunOutput {
        tables,
        derived: campaign_derived(&result, &config),
    })
}

fn campaign_2d(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest.controller.as_ref().expect("validated");
    let config = manifest.campaign_config()?;
    let result = run_campaign(plant, &config).context("campaign failed")?;

    let figure = if manifest.kind == Kind::CampaignRobust {
        "fig10"
    } else {
        "fig9"
    };
    let (n0, n1) = (&section.parameters[0], &section.parameters[1]);
    let mut map = Table::new(
        figure,
        &[n0, n1, "mu_log10_emd", "sigma_log10_emd"],
    );
    // 2D maps get a coarser default than curves; cap the per-axis count.
    let per_axis = section.curve_points.min(120);
    for i in 0..per_axis {
        let a = section.lower[0]
            + (section.upper[0] - section.lower[0]) * i as f64 / (per_axis - 1) as f64;
        for j in 0..per_axis {
            let b = section.lower[1]
                + (section.upper[1] - section.lower[1]) * j as f64 / (per_axis - 1) as f64;
            let (mu, sigma) = result.final_model.predict(&[a, b])?;
            map.push(vec![fmt(a), fmt(b), fmt(mu), fmt(sigma)]);
        }
    }

    let tables = vec![history_table(&result, section.parameters.as_slice()), map];
    Ok(RunOutput {
        tables,
        derived: campaign_derived(&result, &config),
    })
}

fn psd(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest.psd.clone().unwrap_or_default();
    let reference = manifest.reference_params().map_err(|e| anyhow!(e))?;
    let traj = plant.run(&PlantRunSpec::new(
        reference,
        manifest.initial_state(),
        section.step,
        section.n_points,
        section.warmup_points,
    )?)?;
    let abs_x: Vec<f64> = traj.samples.iter().map(|s| s.x.abs()).collect();
    let spectra = [
        ("psd_x", welch_psd(&traj.xs(), section.step, section.segment, section.overlap)?),
        ("psd_y", welch_psd(&traj.ys(), section.step, section.segment, section.overlap)?),
        ("psd_z", welch_psd(&traj.zs(), section.step, section.segment, section.overlap)?),
        ("psd_abs_x", welch_psd(&abs_x, section.step, section.segment, section.overlap)?),
    ];

    let mut table = Table::new("fig11a", &["frequency", "psd_x", "psd_y", "psd_z", "psd_abs_x"]);
    let n_bins = spectra[0].1.frequencies.len();
    for k in 0..n_bins {
        let mut row = vec![fmt(spectra[0].1.frequencies[k])];
        for (_, psd) in &spectra {
            row.push(fmt(psd.power[k]));
        }
        table.push(row);
    }

    let z = &spectra[2].1;
    let mut derived = Vec::new();
    if let Some((f_primary, _)) = z.peak_in_band(0.5, 3.0) {
        derived.push(("z_primary_peak".into(), toml::Value::Float(f_primary)));
        if let Some((f_secondary, _)) = z
            .frequencies
            .iter()
            .zip(&z.power)
            .filter(|(&f, _)| (1.4..=1.7).contains(&f) && (f - f_primary).abs() > 0.1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&f, &p)| (f, p))
        {
            derived.push(("z_secondary_peak".into(), toml::Value::Float(f_secondary)));
        }
    }
    Ok(RunOutput {
        tables: vec![table.cloned_as("results"), table],
        derived,
    })
}

fn phase(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let reference = manifest.reference_params().map_err(|e| anyhow!(e))?;
    let traj = plant.run(&PlantRunSpec::new(
        reference,
        manifest.initial_state(),
        manifest.plant.dt,
        manifest.plant.n_keep,
        manifest.plant.n_discard,
    )?)?;
    let xs = traj.xs();
    let phases = hilbert_phase(&xs);
    let mut table = Table::new("fig11b", &["t", "x", "phase_rad"]);
    for (k, (&x, &p)) in xs.iter().zip(&phases).enumerate() {
        table.push(vec![fmt(traj.time_at(k)), fmt(x), fmt(p)]);
    }
    Ok(RunOutput {
        tables: vec![table.cloned_as("results"), table],
        derived: Vec::new(),
    })
}

fn smi_scan(manifest: &ExperimentManifest, plant: &LorenzPlant) -> Result<RunOutput> {
    let section = manifest.smi.clone().unwrap_or_default();
    let reference = manifest.reference_params().map_err(|e| anyhow!(e))?;
    let traj = plant.run(&PlantRunSpec::new(
        reference,
        manifest.initial_state(),
        manifest.plant.dt,
        manifest.plant.n_keep,
        manifest.plant.n_discard,
    )?)?;
    let x = traj.xs();
    let z = traj.zs();
    let grid = tau_grid(&section, manifest.plant.dt);
    let scan = greedy_tau_scan(&x, &z, manifest.plant.dt, section.e_max, &grid)?;

    let mut curve_table = Table::new("fig12a", &["dim", "tau", "pearson"]);
    let mut derived = Vec::new();
    for curve in &scan.curves {
        for &(tau, rho) in &curve.scanned {
            curve_table.push(vec![curve.dim.to_string(), fmt(tau), fmt(rho)]);
        }
        derived.push((
            format!("best_tau_e{}", curve.dim),
            toml::Value::Float(curve.best_lag),
        ));
        derived.push((
            format!("best_pearson_e{}", curve.dim),
            toml::Value::Float(curve.best_pearson),
        ));
    }

    // Example reconstruction at the best 2D lag.
    let best_tau = scan.curves[0].best_lag;
    let recon = smi_reconstruct(&x, &z, &[best_tau], manifest.plant.dt, 3)?;
    let mut recon_table = Table::new("fig12b", &["t", "z_true", "z_reconstructed"]);
    for (k, &value) in recon.reconstruction.iter().enumerate() {
        recon_table.push(vec![fmt(traj.time_at(k)), fmt(z[k]), fmt(value)]);
    }

    Ok(RunOutput {
        tables: vec![curve_table.cloned_as("results"), curve_table, recon_table],
        derived,
    })
}

fn toml_pair(values: [f64; 2]) -> toml::Value {
    toml::Value::Array(values.iter().map(|&v| toml::Value::Float(v)).collect())
}

/// The kind-to-figure coverage matrix printed by `run --list`.
pub fn coverage_matrix() -> String {
    let mut out = String::from("kind,figures,description\n");
    for kind in Kind::ALL {
        out.push_str(&format!(
            "{},{},{}\n",
            kind.name(),
            kind.figures().join("+"),
            kind.description()
        ));
    }
    out
}
