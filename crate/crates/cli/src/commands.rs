use std::fs;
use std::path::Path;

use isrs_core::bench::{
    linspace, max_db_error, run_order_sweep, total_power_error_ratio, SweepConfig,
};
use isrs_core::closedform::{longitudinal_profile, power_profile, ClosedFormParams};
use isrs_core::inverse::{preemphasis_multispan, preemphasis_single_span, Constraint};
use isrs_core::multispan::{propagate_multispan_closedform, ReceiverBoost};
use isrs_core::ode::propagate_link_numerical;
use isrs_core::osnr::{
    ase_accumulate, estimate_osnr, osnr_profile, peak_to_peak_db, target_osnr, AseConfig,
};
use isrs_core::profiles::units::{dbm_to_watt, linear_to_db, watt_to_dbm};
use isrs_core::profiles::ChannelGrid;
use isrs_core::{Error, PowerSpectrum};

use crate::config::{LaunchConfig, PreemphasisConfig, Scenario};
use crate::output::{Cell, Format, Table};
use crate::{CliError, Command};

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Config(msg.into()))
}

pub fn dispatch(
    command: Command,
    scenario: &Scenario,
    out: &Path,
    format: Format,
) -> Result<Vec<String>, CliError> {
    if command == Command::ValidateConfig {
        return validate(scenario);
    }
    fs::create_dir_all(out).map_err(|e| CliError::Output {
        path: out.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut report = Report::new(out, format);
    match command {
        Command::Solve => solve(scenario, &mut report)?,
        Command::ClosedForm => closed_form(scenario, &mut report)?,
        Command::Multispan => multispan(scenario, &mut report)?,
        Command::Sweep => sweep(scenario, &mut report)?,
        Command::Preemph => preemph(scenario, &mut report)?,
        Command::OsnrTarget => osnr_target(scenario, &mut report)?,
        Command::ValidateConfig => unreachable!(),
    }
    Ok(report.lines)
}

/// Collects written files and summary lines.
struct Report<'a> {
    dir: &'a Path,
    format: Format,
    lines: Vec<String>,
}

impl<'a> Report<'a> {
    fn new(dir: &'a Path, format: Format) -> Self {
        Self {
            dir,
            format,
            lines: Vec::new(),
        }
    }

    fn write(&mut self, table: &Table) -> Result<(), CliError> {
        let path = table.write(self.dir, self.format)?;
        self.lines
            .push(format!("wrote {} ({} rows)", path.display(), table.len()));
        Ok(())
    }

    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

fn channel_cells(grid: &ChannelGrid, i: usize) -> Vec<Cell> {
    vec![
        i.into(),
        grid.frequency(i).into(),
        grid.band_name_of(i).into(),
    ]
}

fn spectrum_table(name: &str, extra: &[&str]) -> Table {
    let mut columns = vec!["channel", "frequency_thz", "band"];
    columns.extend_from_slice(extra);
    Table::with_columns(name, &columns)
}

/// z, total power and every channel power in dBm.
fn longitudinal_table(name: &str, channels: usize, with_span: bool) -> Table {
    let mut columns = Vec::with_capacity(channels + 3);
    if with_span {
        columns.push("span".to_string());
    }
    columns.push("z_km".into());
    columns.push("total_dbm".into());
    columns.extend((0..channels).map(|i| format!("ch{i}_dbm")));
    Table::new(name, columns)
}

fn longitudinal_row(span: Option<usize>, z: f64, spectrum: &PowerSpectrum) -> Vec<Cell> {
    let mut row = Vec::with_capacity(spectrum.len() + 3);
    if let Some(k) = span {
        row.push(k.into());
    }
    row.push(z.into());
    row.push(watt_to_dbm(spectrum.total()).into());
    row.extend(spectrum.powers().iter().map(|p| Cell::Num(watt_to_dbm(*p))));
    row
}

fn sample_positions(scenario: &Scenario, length: f64) -> Result<Vec<f64>, CliError> {
    let points = scenario.output.longitudinal_points;
    if points < 2 {
        return Err(config_error(
            "output.longitudinal_points must be at least 2",
        ));
    }
    Ok(linspace(0.0, length, points))
}

/// Launch spectrum plus, for pre-emphasis requests, the designed output of
/// the last span.
fn resolve_launch(scenario: &Scenario) -> Result<(PowerSpectrum, Option<PowerSpectrum>), CliError> {
    if let Some(launch) = scenario.explicit_launch()? {
        return Ok((launch, None));
    }
    let Some(LaunchConfig::Preemphasis(request)) = &scenario.launch else {
        unreachable!("explicit_launch handles every other mode")
    };
    let (launch, designed) = preemphasize(scenario, request)?;
    Ok((launch, Some(designed)))
}

fn preemphasize(
    scenario: &Scenario,
    request: &PreemphasisConfig,
) -> Result<(PowerSpectrum, PowerSpectrum), CliError> {
    let target = scenario.target(&request.target)?;
    let total = request.total_power_dbm.map(dbm_to_watt);
    if scenario.link.spans.len() == 1 {
        let constraint = match total {
            Some(t) => Constraint::InputTotalPower(t),
            None => Constraint::OutputAbsolute,
        };
        let solved =
            preemphasis_single_span(&target, &scenario.link.spans[0], scenario.order, constraint)?;
        Ok((solved.launch, solved.output))
    } else {
        let total = total.ok_or_else(|| {
            config_error("multi-span pre-emphasis needs `total_power_dbm` for the launch")
        })?;
        let solved = preemphasis_multispan(&target, &scenario.link, total, scenario.order)?;
        let designed = solved
            .spans
            .last()
            .expect("at least one span")
            .output
            .clone();
        Ok((solved.launch, designed))
    }
}

fn solve(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    let (launch, _) = resolve_launch(scenario)?;
    let grid = launch.grid_arc().clone();
    let result = propagate_link_numerical(&launch, &scenario.link, &scenario.solver)?;
    let mut longitudinal = longitudinal_table("longitudinal", grid.len(), false);
    for (z, spectrum) in result.profile.z_samples.iter().zip(&result.profile.spectra) {
        longitudinal.push(longitudinal_row(None, *z, spectrum));
    }
    let output = &result.trace.spans.last().expect("at least one span").output;
    let received = &result.trace.received;
    let mut spectrum = spectrum_table("spectrum", &["launch_dbm", "output_dbm", "received_dbm"]);
    for i in 0..grid.len() {
        let mut row = channel_cells(&grid, i);
        row.push(watt_to_dbm(launch.powers()[i]).into());
        row.push(watt_to_dbm(output.powers()[i]).into());
        row.push(watt_to_dbm(received.powers()[i]).into());
        spectrum.push(row);
    }
    report.say(format!(
        "RK4 over {} span(s), {} steps per span: output total {:.3} dBm",
        scenario.link.spans.len(),
        scenario.solver.steps_per_span,
        watt_to_dbm(output.total())
    ));
    report.write(&longitudinal)?;
    report.write(&spectrum)
}

fn closed_form(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    if scenario.link.spans.len() != 1 {
        return Err(config_error(
            "closed-form models a single span; use `multispan` for linked spans",
        ));
    }
    let fiber = &scenario.link.spans[0];
    let (launch, _) = resolve_launch(scenario)?;
    let grid = launch.grid_arc().clone();
    let params = ClosedFormParams::from_launch(&launch, fiber, scenario.order)?;
    let positions = sample_positions(scenario, fiber.length)?;
    let profiles = longitudinal_profile(&launch, &params, &positions)?;
    let mut longitudinal = longitudinal_table("longitudinal", grid.len(), false);
    for (z, spectrum) in positions.iter().zip(&profiles) {
        longitudinal.push(longitudinal_row(None, *z, spectrum));
    }
    let output = profiles.last().expect("at least two samples");
    report.say(format!(
        "closed form, order {}: alpha0 {:.6e} 1/km, gamma_ref {:.6} THz, output total {:.3} dBm",
        scenario.order,
        params.alpha0,
        params.gamma_ref,
        watt_to_dbm(output.total())
    ));

    let oracle = if scenario.output.compare_with_oracle {
        let numerical = propagate_link_numerical(&launch, &scenario.link, &scenario.solver)?;
        let mut table = longitudinal_table("longitudinal_oracle", grid.len(), false);
        for (z, spectrum) in numerical
            .profile
            .z_samples
            .iter()
            .zip(&numerical.profile.spectra)
        {
            table.push(longitudinal_row(None, *z, spectrum));
        }
        let out = numerical.trace.spans[0].output.clone();
        report.say(format!(
            "vs RK4 ({} steps): total power ratio {:.6}, max channel error {:.4} dB",
            scenario.solver.steps_per_span,
            total_power_error_ratio(output, &out)?,
            max_db_error(output, &out)?
        ));
        Some((table, out))
    } else {
        None
    };

    let mut columns = vec!["launch_dbm", "gamma_thz", "output_dbm"];
    if oracle.is_some() {
        columns.extend(["oracle_output_dbm", "error_db"]);
    }
    let mut spectrum = spectrum_table("spectrum", &columns);
    for i in 0..grid.len() {
        let mut row = channel_cells(&grid, i);
        let cf = watt_to_dbm(output.powers()[i]);
        row.push(watt_to_dbm(launch.powers()[i]).into());
        row.push(params.gamma[i].into());
        row.push(cf.into());
        if let Some((_, out)) = &oracle {
            let o = watt_to_dbm(out.powers()[i]);
            row.push(o.into());
            row.push((cf - o).into());
        }
        spectrum.push(row);
    }
    report.write(&longitudinal)?;
    if let Some((table, _)) = &oracle {
        report.write(table)?;
    }
    report.write(&spectrum)
}

fn multispan(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    let (launch, _) = resolve_launch(scenario)?;
    let grid = launch.grid_arc().clone();
    let result = propagate_multispan_closedform(&launch, &scenario.link, scenario.order)?;
    let mut longitudinal = longitudinal_table("longitudinal", grid.len(), true);
    for (k, (span, params)) in result.trace.spans.iter().zip(&result.params).enumerate() {
        let start = scenario.link.span_start(k);
        let input = span.input.clone().with_z(0.0);
        for local in sample_positions(scenario, params.length)? {
            let spectrum = power_profile(&input, params, local)?;
            longitudinal.push(longitudinal_row(Some(k), start + local, &spectrum));
        }
    }
    let output = result.final_output();
    let received = &result.trace.received;
    report.say(format!(
        "closed form over {} span(s), order {}: last span output total {:.3} dBm",
        scenario.link.spans.len(),
        scenario.order,
        watt_to_dbm(output.total())
    ));

    let oracle = if scenario.output.compare_with_oracle {
        let numerical = propagate_link_numerical(&launch, &scenario.link, &scenario.solver)?;
        let mut table = longitudinal_table("longitudinal_oracle", grid.len(), false);
        for (z, spectrum) in numerical
            .profile
            .z_samples
            .iter()
            .zip(&numerical.profile.spectra)
        {
            table.push(longitudinal_row(None, *z, spectrum));
        }
        let out = numerical
            .trace
            .spans
            .last()
            .expect("at least one span")
            .output
            .clone();
        report.say(format!(
            "vs RK4 ({} steps per span): total power ratio {:.6}, max channel error {:.4} dB",
            scenario.solver.steps_per_span,
            total_power_error_ratio(output, &out)?,
            max_db_error(output, &out)?
        ));
        Some((table, out))
    } else {
        None
    };

    let mut columns = vec!["launch_dbm", "output_dbm", "received_dbm"];
    if oracle.is_some() {
        columns.extend(["oracle_output_dbm", "error_db"]);
    }
    let mut spectrum = spectrum_table("spectrum", &columns);
    for i in 0..grid.len() {
        let mut row = channel_cells(&grid, i);
        let cf = watt_to_dbm(output.powers()[i]);
        row.push(watt_to_dbm(launch.powers()[i]).into());
        row.push(cf.into());
        row.push(watt_to_dbm(received.powers()[i]).into());
        if let Some((_, out)) = &oracle {
            let o = watt_to_dbm(out.powers()[i]);
            row.push(o.into());
            row.push((cf - o).into());
        }
        spectrum.push(row);
    }
    report.write(&longitudinal)?;
    if let Some((table, _)) = &oracle {
        report.write(table)?;
    }
    report.write(&spectrum)
}

fn sweep(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    let config = scenario.sweep.clone().unwrap_or_else(|| SweepConfig {
        attenuation: scenario.fiber.attenuation.clone(),
        solver: scenario.solver,
        spacing: scenario.grid.spacing(),
        window: scenario.fiber.raman.window(),
        ..SweepConfig::default()
    });
    let result = run_order_sweep(&config)?;
    let cell = [
        "band",
        "raman_peak",
        "launch_power_dbm",
        "length_km",
        "order",
    ];
    let mut records = Table::with_columns(
        "sweep_records",
        &[&cell[..], &["error_ratio", "abs_deviation", "max_db_error"]].concat(),
    );
    let mut runtimes = Table::with_columns(
        "sweep_runtimes",
        &[&cell[..], &["oracle_seconds", "closedform_seconds"]].concat(),
    );
    for r in &result.records {
        let key: Vec<Cell> = vec![
            r.band.as_str().into(),
            r.raman_peak.into(),
            r.launch_power_dbm.into(),
            r.length.into(),
            r.order.into(),
        ];
        let mut row = key.clone();
        row.extend([
            r.error_ratio.into(),
            (r.error_ratio - 1.0).abs().into(),
            r.max_db_error.into(),
        ]);
        records.push(row);
        let mut row = key;
        row.extend([r.oracle_seconds.into(), r.closedform_seconds.into()]);
        runtimes.push(row);
    }
    let mut summary = Table::with_columns(
        "sweep_summary",
        &[
            "band",
            "order",
            "count",
            "mean_abs_deviation",
            "median",
            "q1",
            "q3",
            "whisker_low",
            "whisker_high",
            "outliers",
        ],
    );
    let mut outliers = Table::with_columns("sweep_outliers", &["band", "order", "error_ratio"]);
    for s in &result.summary {
        summary.push(vec![
            s.band.as_str().into(),
            s.order.into(),
            s.count.into(),
            s.mean_abs_deviation.into(),
            s.median.into(),
            s.q1.into(),
            s.q3.into(),
            s.whisker_low.into(),
            s.whisker_high.into(),
            s.outliers.len().into(),
        ]);
        for v in &s.outliers {
            outliers.push(vec![s.band.as_str().into(), s.order.into(), (*v).into()]);
        }
    }
    let mut failures = Table::with_columns("sweep_failures", &[&cell[..], &["error"]].concat());
    for f in &result.failures {
        failures.push(vec![
            f.band.as_str().into(),
            f.raman_peak.into(),
            f.launch_power_dbm.into(),
            f.length.into(),
            f.order.map_or(Cell::Text("all".into()), Cell::from),
            f.error.to_string().into(),
        ]);
    }
    report.say(format!(
        "{} records, {} failures",
        result.records.len(),
        result.failures.len()
    ));
    let wide: Vec<&str> = config
        .bands
        .iter()
        .map(String::as_str)
        .filter(|b| *b != "C")
        .collect();
    let bands: Vec<&str> = if wide.is_empty() {
        config.bands.iter().map(String::as_str).collect()
    } else {
        wide
    };
    for (n, dev) in result.mean_abs_deviation_by_order(&bands) {
        report.say(format!(
            "order {n}: mean |eps - 1| over {} = {dev:.4e}",
            bands.join("/")
        ));
    }
    if let Some(n) = result.best_order(&bands) {
        report.say(format!("best order: {n}"));
    }
    report.write(&records)?;
    report.write(&summary)?;
    report.write(&outliers)?;
    report.write(&runtimes)?;
    report.write(&failures)
}

/// dB values with their mean removed.
fn demean(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn preemph(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    let Some(LaunchConfig::Preemphasis(request)) = &scenario.launch else {
        return Err(config_error("preemph needs a `launch.preemphasis` section"));
    };
    let (launch, designed) = preemphasize(scenario, request)?;
    let grid = launch.grid_arc().clone();
    let forward = propagate_multispan_closedform(&launch, &scenario.link, scenario.order)?;
    let cf_out = forward.final_output();
    let numerical = propagate_link_numerical(&launch, &scenario.link, &scenario.solver)?;
    let oracle_out = &numerical
        .trace
        .spans
        .last()
        .expect("at least one span")
        .output;

    let designed_db = designed.to_dbm();
    let cf_err: Vec<f64> = cf_out
        .to_dbm()
        .iter()
        .zip(&designed_db)
        .map(|(a, b)| a - b)
        .collect();
    let oracle_err: Vec<f64> = oracle_out
        .to_dbm()
        .iter()
        .zip(&designed_db)
        .map(|(a, b)| a - b)
        .collect();
    let oracle_shape = demean(&oracle_err);

    let mut table = spectrum_table(
        "launch",
        &[
            "target_output_dbm",
            "launch_dbm",
            "closedform_output_dbm",
            "oracle_output_dbm",
            "oracle_error_db",
            "oracle_shape_error_db",
        ],
    );
    for i in 0..grid.len() {
        let mut row = channel_cells(&grid, i);
        row.extend([
            designed_db[i].into(),
            watt_to_dbm(launch.powers()[i]).into(),
            watt_to_dbm(cf_out.powers()[i]).into(),
            watt_to_dbm(oracle_out.powers()[i]).into(),
            oracle_err[i].into(),
            oracle_shape[i].into(),
        ]);
        table.push(row);
    }
    report.say(format!(
        "launch total {:.3} dBm over {} span(s)",
        watt_to_dbm(launch.total()),
        scenario.link.spans.len()
    ));
    report.say(format!(
        "closed-form round trip: max error {:.4} dB, shape error {:.4} dB",
        max_abs(&cf_err),
        max_abs(&demean(&cf_err))
    ));
    report.say(format!(
        "RK4 round trip ({} steps per span): max error {:.4} dB, shape error {:.4} dB",
        scenario.solver.steps_per_span,
        max_abs(&oracle_err),
        max_abs(&oracle_shape)
    ));
    report.write(&table)
}

/// Received OSNR of a launch under the RK4 oracle.
fn oracle_osnr(
    launch: &PowerSpectrum,
    scenario: &Scenario,
    link: &isrs_core::multispan::LinkSpec,
    ase: &AseConfig,
) -> Result<Vec<f64>, CliError> {
    let numerical = propagate_link_numerical(launch, link, &scenario.solver)?;
    let noise = ase_accumulate(link, &numerical.trace, ase)?;
    Ok(osnr_profile(&numerical.trace.received, &noise)?)
}

fn osnr_target(scenario: &Scenario, report: &mut Report) -> Result<(), CliError> {
    let Some((target_config, options, total)) = &scenario.osnr else {
        return Err(config_error("osnr-target needs an `osnr` section"));
    };
    let launch_total = total.or_else(|| scenario.launch_total()).ok_or_else(|| {
        config_error("osnr: set `total_power_dbm` or an explicit launch to fix the launch power")
    })?;
    let mut link = scenario.link.clone();
    if link.receiver_boost == ReceiverBoost::Off {
        link.receiver_boost = ReceiverBoost::Ideal;
    }
    let target = scenario.target(target_config)?;
    let run = match target_osnr(&target, &link, launch_total, options) {
        Ok(run) => run,
        Err(Error::NotConverged { history }) => {
            report.write(&history_table(&history))?;
            return Err(CliError::Core(Error::NotConverged { history }));
        }
        Err(e) => return Err(e.into()),
    };
    let grid = run.launch.grid_arc().clone();
    let flat = PowerSpectrum::flat(grid.clone(), launch_total / grid.len() as f64)?;
    let flat_cf = estimate_osnr(&flat, &link, options.order, &options.ase)?;
    let oracle = oracle_osnr(&run.launch, scenario, &link, &options.ase)?;
    let flat_oracle = oracle_osnr(&flat, scenario, &link, &options.ase)?;

    let mut table = spectrum_table(
        "launch",
        &[
            "target_osnr_norm_db",
            "launch_dbm",
            "flat_launch_dbm",
            "received_dbm",
            "ase_dbm",
            "osnr_db",
            "oracle_osnr_db",
            "flat_osnr_db",
            "flat_oracle_osnr_db",
        ],
    );
    for i in 0..grid.len() {
        let mut row = channel_cells(&grid, i);
        row.extend([
            linear_to_db(run.target[i]).into(),
            watt_to_dbm(run.launch.powers()[i]).into(),
            watt_to_dbm(flat.powers()[i]).into(),
            watt_to_dbm(run.received.powers()[i]).into(),
            watt_to_dbm(run.noise.powers()[i]).into(),
            linear_to_db(run.osnr[i]).into(),
            linear_to_db(oracle[i]).into(),
            linear_to_db(flat_cf.osnr[i]).into(),
            linear_to_db(flat_oracle[i]).into(),
        ]);
        table.push(row);
    }
    report.say(format!(
        "converged in {} iteration(s), final RMSE {:.3e}",
        run.history.len(),
        run.history.last().copied().unwrap_or(f64::NAN)
    ));
    report.say(format!(
        "OSNR peak-to-peak, closed form: {:.3} dB pre-emphasized, {:.3} dB flat",
        peak_to_peak_db(&run.osnr),
        peak_to_peak_db(&flat_cf.osnr)
    ));
    report.say(format!(
        "OSNR peak-to-peak, RK4: {:.3} dB pre-emphasized, {:.3} dB flat",
        peak_to_peak_db(&oracle),
        peak_to_peak_db(&flat_oracle)
    ));
    report.write(&table)?;
    report.write(&history_table(&run.history))
}

fn history_table(history: &[f64]) -> Table {
    let mut table = Table::with_columns("history", &["iteration", "rmse"]);
    for (k, rmse) in history.iter().enumerate() {
        table.push(vec![(k + 1).into(), (*rmse).into()]);
    }
    table
}

fn validate(scenario: &Scenario) -> Result<Vec<String>, CliError> {
    let mut lines = Vec::new();
    match &scenario.launch {
        Some(LaunchConfig::Preemphasis(request)) => {
            scenario.target(&request.target)?;
            if scenario.link.spans.len() > 1 && request.total_power_dbm.is_none() {
                return Err(config_error(
                    "multi-span pre-emphasis needs `total_power_dbm` for the launch",
                ));
            }
        }
        Some(_) => {
            scenario.explicit_launch()?;
        }
        None => {}
    }
    if let Some((target, _, _)) = &scenario.osnr {
        scenario.target(target)?;
        for amp in &scenario.link.amplifiers {
            for band in scenario.grid.bands() {
                amp.noise_figure(&band.name)?;
            }
        }
        if let ReceiverBoost::Amplified(amp) = &scenario.link.receiver_boost {
            for band in scenario.grid.bands() {
                amp.noise_figure(&band.name)?;
            }
        }
    }
    let bands: Vec<&str> = scenario
        .grid
        .bands()
        .iter()
        .map(|b| b.name.as_str())
        .collect();
    lines.push(format!(
        "ok: scenario `{}`: {} channels in bands {}, {} span(s) of {} km, order {}",
        scenario.name,
        scenario.grid.len(),
        bands.join("/"),
        scenario.link.spans.len(),
        scenario.fiber.length,
        scenario.order
    ));
    Ok(lines)
}
