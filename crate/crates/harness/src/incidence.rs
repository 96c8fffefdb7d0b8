//! Incidence-matrix heatmap export and the rover-tower pairing readout.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use hgac::agents::Critic;
use hgac::approximator::{ParamStore, Tape};
use hgac::envs::Role;
use hgac::learner::Transition;
use hgac::{Error, Result, Scalar};
use ndarray::Array2;

/// Per head, the `N x M` incidence averaged over `batch`; cell `(j, i)` is
/// the membership of agent `j` in hyperedge `i`.
pub fn mean_incidence<T: Scalar>(
    critic: &Critic,
    params: &ParamStore<T>,
    batch: &[Transition<T>],
) -> Result<Vec<Array2<f64>>> {
    if batch.is_empty() {
        return Err(Error::Config("incidence dump needs at least one transition".into()));
    }
    let samples: Vec<(&[Vec<T>], &[usize])> = batch
        .iter()
        .map(|t| (t.obs.as_slice(), t.actions.as_slice()))
        .collect();
    let mut tape = Tape::new();
    let g = critic.record(&mut tape, params, &samples)?;
    let n = critic.layout().n_agents();
    Ok(g.incidence
        .iter()
        .map(|&h| {
            let v = tape.value(h);
            let mut acc = Array2::<f64>::zeros((n, v.ncols()));
            for (r, row) in v.rows().into_iter().enumerate() {
                for (c, x) in row.iter().enumerate() {
                    acc[[r % n, c]] += x.as_f64();
                }
            }
            acc / batch.len() as f64
        })
        .collect())
}

/// Fixed-point with 12 decimals; values lie in `[0, 1]`.
pub fn to_csv(m: &Array2<f64>) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12}")).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad cell `{c}`: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config("ragged incidence CSV".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / cols.max(1), cols), flat)
        .map_err(|e| Error::Config(e.to_string()))
}

/// Writes `<dir>/<tag>_head<k>.csv` for every head; returns the paths.
pub fn dump_incidence<T: Scalar>(
    critic: &Critic,
    params: &ParamStore<T>,
    batch: &[Transition<T>],
    dir: &Path,
    tag: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    mean_incidence(critic, params, batch)?
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let path = dir.join(format!("{tag}_head{k}.csv"));
            std::fs::write(&path, to_csv(m))?;
            Ok(path)
        })
        .collect()
}

/// For each rover row, the tower whose hyperedge holds the rover most
/// strongly. Returned as tower indices `0..R` (tower agent `R + t`).
pub fn rover_tower_assignment(m: &Array2<f64>, roles: &[Role]) -> Vec<usize> {
    let rovers: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Rover).collect();
    let towers: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Tower).collect();
    rovers
        .iter()
        .map(|&r| {
            (0..towers.len())
                .max_by(|&a, &b| m[[r, towers[a]]].total_cmp(&m[[r, towers[b]]]))
                .expect("scenario has towers")
        })
        .collect()
}

pub fn is_permutation(assign: &[usize]) -> bool {
    let mut seen = vec![false; assign.len()];
    assign
        .iter()
        .all(|&t| t < seen.len() && !std::mem::replace(&mut seen[t], true))
}
