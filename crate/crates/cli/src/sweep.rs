//! Runs every grid cell, in parallel, and collects rows in grid order.

use std::time::Instant;

use flexprot_core::metrics::{
    bandwidth_blocking_probability, blocking_probability, capacity_used_for_protection, restorability,
    spectrum_utilization,
};
use flexprot_core::sim::{run, Scenario};
use rayon::prelude::*;

use crate::config::{Cell, SweepSpec};
use crate::output::ResultRow;

#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    pub cell: Cell,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<CellError>,
}

pub fn scenario_for(template: &Scenario, cell: &Cell) -> Scenario {
    Scenario {
        mode: cell.mode,
        load_erlang: cell.load_erlang,
        avg_link_availability: cell.avg_avail,
        a_th: cell.a_th,
        seed: cell.seed,
        ..template.clone()
    }
}

pub fn run_cell(template: &Scenario, cell: &Cell, timing: bool) -> Result<ResultRow, String> {
    let started = Instant::now();
    let sc = scenario_for(template, cell);
    let r = run(&sc).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    Ok(ResultRow {
        mode: cell.mode.to_string(),
        load_erlang: cell.load_erlang,
        avg_avail: cell.avg_avail,
        a_th: cell.a_th,
        seed: cell.seed,
        bp: blocking_probability(&r).map_err(|e| e.to_string())?,
        bbp: bandwidth_blocking_probability(&r).map_err(|e| e.to_string())?,
        utilization: spectrum_utilization(&r),
        protection_capacity: capacity_used_for_protection(&r),
        restorability: restorability(&r),
        runtime_s: timing.then_some(elapsed),
    })
}

/// Runs the sweep. Failed cells go to `errors`; the rest keep grid order.
pub fn run_sweep(spec: &SweepSpec, timing: bool) -> anyhow::Result<SweepResult> {
    spec.validate()?;
    let template = spec.resolved_template()?;
    let outcomes: Vec<(Cell, Result<ResultRow, String>)> = spec
        .cells()
        .into_par_iter()
        .map(|cell| {
            let res = run_cell(&template, &cell, timing);
            (cell, res)
        })
        .collect();
    let mut out = SweepResult::default();
    for (cell, res) in outcomes {
        match res {
            Ok(row) => out.rows.push(row),
            Err(message) => out.errors.push(CellError { cell, message }),
        }
    }
    Ok(out)
}
