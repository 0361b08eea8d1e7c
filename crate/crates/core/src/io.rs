//! Output writers: trajectory and trace CSVs, labeled gains files, and the
//! run summary.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a value
//! read back parses to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::{Matrix, SymMatrix};
use crate::riccati::ViTrace;
use crate::sim::{RunMetrics, Trajectory};

pub const TRAJECTORY_HEADER: &str =
    "t_s,x_km,y_km,z_km,xdot_kms,ydot_kms,zdot_kms,u1,u2,u3,e1_km,e2_km,e3_km";

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..traj.len() {
        let _ = write!(out, "{}", traj.time(k));
        for x in traj
            .state(k)
            .iter()
            .chain(traj.input(k))
            .chain(traj.error(k))
        {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    write_file(path.as_ref(), &trajectory_csv(traj))
}

pub fn trace_csv(trace: &ViTrace) -> String {
    let mut out = String::from("k,metric,reset\n");
    let mut resets = trace.resets.iter().peekable();
    for (i, m) in trace.metrics.iter().enumerate() {
        let k = i + 1;
        let reset = resets.next_if(|&&r| r == k).is_some();
        let _ = writeln!(out, "{k},{m},{}", u8::from(reset));
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &ViTrace) -> Result<()> {
    write_file(path.as_ref(), &trace_csv(trace))
}

/// Feedback, feedforward and value matrices as stored in a gains file.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub k: Matrix,
    pub l: Matrix,
    pub p: SymMatrix,
}

fn push_block(out: &mut String, label: &str, m: &Matrix) {
    let _ = writeln!(out, "[{label}] {} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn gains_text(g: &Gains) -> String {
    let mut out = String::new();
    push_block(&mut out, "K", &g.k);
    push_block(&mut out, "L", &g.l);
    push_block(&mut out, "P", g.p.as_matrix());
    out
}

pub fn write_gains(path: impl AsRef<Path>, g: &Gains) -> Result<()> {
    write_file(path.as_ref(), &gains_text(g))
}

pub fn parse_gains(text: &str, origin: &str) -> Result<Gains> {
    let bad = |msg: String| Error::Parse {
        path: origin.into(),
        message: msg,
    };
    let mut blocks: Vec<(String, Matrix)> = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    while let Some((ln, header)) = lines.next() {
        let mut parts = header.split_whitespace();
        let label = parts
            .next()
            .and_then(|s| s.strip_prefix('[')?.strip_suffix(']'))
            .ok_or_else(|| bad(format!("line {}: expected a [LABEL] header", ln + 1)))?;
        let dims: Vec<usize> = parts
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
        let [rows, cols] = dims[..] else {
            return Err(bad(format!("line {}: expected `rows cols`", ln + 1)));
        };
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let (rl, row) = lines
                .next()
                .ok_or_else(|| bad(format!("block {label} ends early")))?;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", rl + 1)))?;
            if vals.len() != cols {
                return Err(bad(format!("line {}: expected {cols} values", rl + 1)));
            }
            for (j, v) in vals.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        blocks.push((label.to_string(), m));
    }
    let mut take = |label: &str| {
        blocks
            .iter()
            .position(|(l, _)| l == label)
            .map(|i| blocks.swap_remove(i).1)
            .ok_or_else(|| bad(format!("missing [{label}] block")))
    };
    let k = take("K")?;
    let l = take("L")?;
    let p = SymMatrix::new(take("P")?)?;
    if k.nrows() != l.nrows() || k.ncols() != p.dim() {
        return Err(bad("K, L and P have inconsistent shapes".into()));
    }
    Ok(Gains { k, l, p })
}

pub fn read_gains(path: impl AsRef<Path>) -> Result<Gains> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gains(&text, &path.display().to_string())
}

pub const SUMMARY_HEADER: &str =
    "branch,cost,initial_error_km,terminal_error_km,settling_time_s,max_input";

/// One row per branch; an empty settling field means the run never settled.
pub fn summary_csv(rows: &[(&str, &RunMetrics)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (name, m) in rows {
        let settle = m.settling_time.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{name},{},{},{},{settle},{}",
            m.cost, m.initial_error, m.terminal_error, m.max_input
        );
    }
    out
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[(&str, &RunMetrics)]) -> Result<()> {
    write_file(path.as_ref(), &summary_csv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_gains() -> Gains {
        Gains {
            k: Matrix::from_fn(3, 6, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0)),
            l: Matrix::from_fn(3, 8, |i, j| -(i as f64) * 1e-7 + j as f64 * std::f64::consts::PI),
            p: SymMatrix::symmetrize(Matrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64))),
        }
    }

    #[test]
    fn gains_round_trip_exactly() {
        let g = sample_gains();
        let text = gains_text(&g);
        assert!(text.starts_with("[K] 3 6\n"));
        assert!(text.contains("[L] 3 8\n"));
        assert!(text.contains("[P] 6 6\n"));
        assert_eq!(parse_gains(&text, "mem").unwrap(), g);
    }

    #[test]
    fn malformed_gains_are_rejected() {
        let text = gains_text(&sample_gains());
        assert!(parse_gains(&text.replace("[L] 3 8", "[L] 3 9"), "m").is_err());
        assert!(parse_gains(&text.replace("[P]", "[Q]"), "m").is_err());
        assert!(parse_gains("K 3 6\n", "m").is_err());
    }

    #[test]
    fn trace_marks_resets() {
        let trace = ViTrace {
            metrics: vec![3.0, 2.0, 1.0],
            resets: vec![2],
            iterations: 3,
            final_r: 1,
        };
        assert_eq!(trace_csv(&trace), "k,metric,reset\n1,3,0\n2,2,1\n3,1,0\n");
    }

    #[test]
    fn summary_leaves_unsettled_blank() {
        let m = RunMetrics {
            cost: 1.5,
            terminal_error: 0.25,
            initial_error: 2.0,
            settling_time: None,
            max_input: 3.0,
        };
        assert_eq!(
            summary_csv(&[("vi", &m)]),
            format!("{SUMMARY_HEADER}\nvi,1.5,2,0.25,,3\n")
        );
    }
}
