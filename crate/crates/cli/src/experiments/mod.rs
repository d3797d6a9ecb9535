//! The experiment families.

mod convolution;
mod heat;
mod mean;
mod sigma;
mod wilson_cowan;

use sigmahom::io::CsvTable;
use sigmahom::sigma::MacroField;
use sigmahom::trajectory::FieldTrajectory;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::Outcome;

/// Checks every referenced type eagerly, before any solve.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if let Some(b) = &cfg.mean_value {
        mean::validate(b)?;
    }
    if let Some(b) = &cfg.sigma_check {
        sigma::validate(b)?;
    }
    if let Some(b) = &cfg.convolution_check {
        convolution::validate(b)?;
    }
    if let Some(b) = &cfg.wilson_cowan {
        wilson_cowan::validate(b)?;
    }
    if let Some(b) = &cfg.nonlocal_heat {
        heat::validate(b)?;
    }
    if let Some(b) = &cfg.cell_solve {
        heat::validate_cell(b)?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let missing = || CliError::Parse("experiment block missing".into());
    match cfg.experiment {
        crate::config::Experiment::MeanValue => mean::run(cfg.mean_value.as_ref().ok_or_else(missing)?, cfg.seed),
        crate::config::Experiment::SigmaCheck => sigma::run(cfg.sigma_check.as_ref().ok_or_else(missing)?),
        crate::config::Experiment::ConvolutionCheck => {
            convolution::run(cfg.convolution_check.as_ref().ok_or_else(missing)?, cfg.seed)
        }
        crate::config::Experiment::WilsonCowan => wilson_cowan::run(cfg.wilson_cowan.as_ref().ok_or_else(missing)?),
        crate::config::Experiment::NonlocalHeat => heat::run(cfg.nonlocal_heat.as_ref().ok_or_else(missing)?),
        crate::config::Experiment::CellSolve => heat::run_cell(cfg.cell_solve.as_ref().ok_or_else(missing)?),
    }
}

/// Rows `t, x_0.., u` for every `stride`-th state, the last one included.
pub(crate) fn snapshot_csv(traj: &FieldTrajectory<MacroField>, stride: usize) -> String {
    let Some(first) = traj.states.first() else {
        return String::new();
    };
    let n = first.grid.n_space();
    let mut head = vec!["t".to_string()];
    head.extend((0..n).map(|i| format!("x_{i}")));
    head.push("u".into());
    let mut t = CsvTable::new(&head.iter().map(String::as_str).collect::<Vec<_>>());
    let points = first.grid.points();
    let last = traj.states.len() - 1;
    for k in (0..=last).filter(|k| k % stride.max(1) == 0 || *k == last) {
        for (p, v) in points.iter().zip(&traj.states[k].values) {
            let mut row = vec![traj.times[k]];
            row.extend(p);
            row.push(*v);
            t.push_numeric(&row);
        }
    }
    t.render()
}
