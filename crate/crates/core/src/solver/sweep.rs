use super::{solve_coupled, solve_limit, LimitSolution, Problem};
use crate::diagnostics::{ConvergenceRow, ConvergenceTable};
use crate::error::{Error, Result};

/// Solves at every `q` in ascending order, each solve starting from the
/// previous converged `u` (the first from the limit solution).
///
/// Per-row failures are recorded in the table; the next row then restarts
/// from the last converged state.
pub fn q_sweep(problem: &Problem, q_list: &[f64]) -> Result<(ConvergenceTable, LimitSolution)> {
    let limit = solve_limit(problem)?;
    let table = q_sweep_with_limit(problem, q_list, &limit)?;
    Ok((table, limit))
}

pub fn q_sweep_with_limit(
    problem: &Problem,
    q_list: &[f64],
    limit: &LimitSolution,
) -> Result<ConvergenceTable> {
    if q_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NotAscending);
    }
    let mut table = ConvergenceTable::default();
    let mut warm = limit.u_inf.clone();
    for &q in q_list {
        let row = problem
            .at_q(q)
            .and_then(|p| solve_coupled(&p, Some(warm.clone())))
            .and_then(|b| {
                let row = ConvergenceRow::from_bundle(&b, limit)?;
                warm = b.u;
                Ok(row)
            });
        table
            .rows
            .push(row.unwrap_or_else(|e| ConvergenceRow::failed(q, &e)));
    }
    Ok(table)
}
