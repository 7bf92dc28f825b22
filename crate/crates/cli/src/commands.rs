use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hdivflow::benchmarks::run::{boundary_for, discretise};
use hdivflow::benchmarks::{
    convergence_study, parse_pairs, restore, run_from, snapshot, CaseConfig, CaseSetup, InitialMode, RunOutput,
};
use hdivflow::diagnostics::{divergence_sup, energy_spectrum, enstrophy, kinetic_energy, write_vtk, Spectrum};
use hdivflow::solver::checkpoint::{read_checkpoint, write_checkpoint, Snapshot};
use hdivflow::solver::FlowState;
use hdivflow::space::VelocityField;

use crate::error::CliError;
use crate::Common;

type Result<T> = std::result::Result<T, CliError>;

/// Config file pairs, then `--set` pairs, on top of `base`.
fn load_config(common: &Common, base: &[(String, String)]) -> Result<CaseConfig> {
    let mut pairs = base.to_vec();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        pairs.extend(parse_pairs(&text).map_err(hdivflow::Error::from)?);
    }
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {o:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if !pairs.iter().any(|(k, _)| k == "case") {
        return Err(CliError::Usage("no case given; pass --config FILE or --set case=<id>".into()));
    }
    Ok(CaseConfig::from_pairs(&pairs).map_err(hdivflow::Error::from)?)
}

fn out_dir(common: &Common, config: &CaseConfig) -> Result<PathBuf> {
    let dir = common.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

fn say(common: &Common, line: impl AsRef<str>) {
    if !common.quiet {
        println!("{}", line.as_ref());
    }
}

fn time_label(t: f64) -> String {
    format!("{t:.4}")
}

pub fn run(common: &Common) -> Result<()> {
    let config = load_config(common, &[])?;
    let dir = out_dir(common, &config)?;
    let started = Instant::now();
    let setup = CaseSetup::new(&config)?;
    let initial = setup.initial_state()?;
    say(
        common,
        format!(
            "{}: {} velocity + {} pressure dofs",
            config.case.id(),
            setup.disc.velocity.num_dofs(),
            setup.disc.pressure.num_dofs()
        ),
    );
    let out = run_from(&setup, initial, &mut |row| {
        if !common.quiet {
            let delta = row.delta_ratio.map_or(String::new(), |d| format!(" delta/delta0={d:.4}"));
            println!("t={:.6} K={:.10e} E={:.6e} div_max={:.2e}{delta}", row.t, row.kinetic_energy, row.enstrophy, row.div_max);
        }
    })?;
    write_run(&dir, &setup, &out, started.elapsed().as_secs_f64())?;
    for line in summary_lines(&out, started.elapsed().as_secs_f64()) {
        say(common, line);
    }
    match out.error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn summary_lines(out: &RunOutput, wall: f64) -> Vec<String> {
    let last = out.record.last();
    let field = |f: fn(&hdivflow::diagnostics::SeriesRow) -> f64| last.map_or("nan".to_string(), |r| f(r).to_string());
    vec![
        format!("case = {}", out.record.case),
        format!("complete = {}", out.record.complete),
        format!("failure = {}", out.record.failure.as_deref().unwrap_or("")),
        format!("steps = {}", out.reports.len()),
        format!("t_final = {}", out.final_state.t),
        format!("K_final = {}", field(|r| r.kinetic_energy)),
        format!("E_final = {}", field(|r| r.enstrophy)),
        format!("div_max = {}", out.record.max_divergence()),
        format!("max_energy_growth = {}", out.max_energy_growth.map_or("nan".to_string(), |g| g.to_string())),
        format!("wall_time_s = {wall:.3}"),
    ]
}

fn write_run(dir: &Path, setup: &CaseSetup, out: &RunOutput, wall: f64) -> Result<()> {
    write_file(&dir.join("series.csv"), |w| out.record.write_csv(w))?;
    for (t, s) in &out.record.spectra {
        let text = s.to_csv();
        write_file(&dir.join(format!("spectrum_t{}.csv", time_label(*t))), |w| w.write_all(text.as_bytes()))?;
    }
    for (i, s) in out.snapshots.iter().enumerate() {
        write_file(&dir.join(format!("snapshot_{i:03}.vtk")), |w| write_vtk(w, &s.velocity, s.t))?;
    }
    let mut snaps: Vec<Snapshot> = out.snapshots.iter().map(snapshot).collect();
    if snaps.last().is_none_or(|s| s.t != out.final_state.t) {
        snaps.push(snapshot(&out.final_state));
    }
    write_file(&dir.join("checkpoint.chk"), |w| write_checkpoint(w, &setup.checkpoint_header(), &snaps))?;
    let summary = summary_lines(out, wall).join("\n") + "\n";
    write_file(&dir.join("summary.txt"), |w| w.write_all(summary.as_bytes()))
}

pub fn convergence(common: &Common) -> Result<()> {
    let config = load_config(common, &[])?;
    let dir = out_dir(common, &config)?;
    let table = convergence_study(&config)?;
    let csv = table.to_csv();
    write_file(&dir.join("convergence.csv"), |w| w.write_all(csv.as_bytes()))?;
    say(common, csv.trim_end());
    let check = table.check(config.order_norm, config.expected_order, config.order_tolerance);
    let observed = check.observed.map_or("undefined".to_string(), |o| format!("{o:.4}"));
    let line = format!(
        "{} order ({:?} norm): observed {observed}, expected {} +/- {}",
        config.case.id(),
        config.order_norm,
        check.expected,
        check.tolerance
    );
    if check.passed {
        say(common, format!("PASS {line}"));
        Ok(())
    } else {
        Err(CliError::CheckFailed(line))
    }
}

pub fn spectrum(common: &Common, checkpoint: &Path, grid: Option<usize>, time: Option<f64>) -> Result<()> {
    let file = fs::File::open(checkpoint).map_err(CliError::io(checkpoint))?;
    let (header, snapshots) = read_checkpoint(BufReader::new(file))?;
    let config = load_config(common, &[("case".to_string(), header.case.clone())])?;
    let snap = match time {
        None => snapshots.last(),
        Some(t) => snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())),
    }
    .ok_or_else(|| CliError::Usage(format!("{} holds no snapshots", checkpoint.display())))?;
    let (_, state) = restore(&header, snap)?;
    let grid = grid.unwrap_or(config.spectrum_grid);
    let s = energy_spectrum(&state.velocity, grid).map_err(hdivflow::Error::from)?;
    let dir = out_dir(common, &config)?;
    let text = s.to_csv();
    write_file(&dir.join(format!("spectrum_t{}.csv", time_label(state.t))), |w| w.write_all(text.as_bytes()))?;
    for line in spectrum_lines(&s, state.t, config.kappa_range) {
        say(common, line);
    }
    Ok(())
}

fn spectrum_lines(s: &Spectrum, t: f64, (lo, hi): (usize, usize)) -> Vec<String> {
    let slope = match s.fit_slope(lo, hi) {
        Some(m) => format!("{m:.4}"),
        None => "undefined (fewer than two populated bins)".to_string(),
    };
    vec![
        format!("t = {t}"),
        format!("grid = {}", s.grid),
        format!("slope[{lo},{hi}] = {slope}"),
        format!("parseval_defect = {:e}", s.parseval_defect()),
    ]
}

pub fn project(common: &Common) -> Result<()> {
    let mut config = load_config(common, &[])?;
    let dir = out_dir(common, &config)?;
    config.initial = InitialMode::Interpolate;
    let base = CaseSetup::new(&config)?;
    let interpolated = base.initial_state()?;
    config.initial = InitialMode::StokesProjection;
    let setup = CaseSetup::on(&config, base.disc.clone())?;
    let projected = setup.initial_state()?;
    let diff: Vec<f64> = projected.velocity.coeffs().iter().zip(interpolated.velocity.coeffs()).map(|(a, b)| a - b).collect();
    let diff = VelocityField::new(setup.disc.velocity.clone(), diff).map_err(hdivflow::Error::from)?;
    for (name, state) in [("interpolant", &interpolated), ("projection", &projected)] {
        say(common, describe(name, state));
    }
    say(common, format!("l2_difference = {:e}", (2.0 * kinetic_energy(&diff)).sqrt()));
    write_file(&dir.join("projection.vtk"), |w| write_vtk(w, &projected.velocity, projected.t))?;
    write_file(&dir.join("projection.chk"), |w| write_checkpoint(w, &setup.checkpoint_header(), &[snapshot(&projected)]))
}

fn describe(name: &str, s: &FlowState) -> String {
    format!(
        "{name}: K = {} E = {} div_max = {:e}",
        kinetic_energy(&s.velocity),
        enstrophy(&s.velocity),
        divergence_sup(&s.velocity)
    )
}

pub fn info(common: &Common) -> Result<()> {
    let config = load_config(common, &[])?;
    let disc = discretise(&config.mesh, config.k, boundary_for(config.case))?;
    let stats = disc.velocity.mesh().statistics().map_err(hdivflow::Error::from)?;
    println!("{}", config.to_text().trim_end());
    println!("# triangles = {}", stats.num_triangles);
    println!("# facets = {}", stats.num_facets);
    println!("# h_max = {} h_min = {}", stats.h_max, stats.h_min);
    println!("# velocity_dofs = {}", disc.velocity.num_dofs());
    println!("# pressure_dofs = {}", disc.pressure.num_dofs());
    println!("# sigma = {}", config.sigma());
    if config.case.is_manufactured() {
        println!("# meshes = {:?}", config.meshes);
    }
    Ok(())
}
