//! CSV writers. Each file opens with a `# columns: …` comment line followed
//! by a plain header row.

use std::io::{self, Write};

use crate::bounds::SoundnessSample;
use crate::engine::{EnsembleSummary, EventLog, TrajectoryRecord};
use crate::markov::ModePath;

fn header<W: Write>(w: &mut W, columns: &[String]) -> io::Result<()> {
    let joined = columns.join(",");
    writeln!(w, "# columns: {joined}")?;
    writeln!(w, "{joined}")
}

fn indexed(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |k| format!("{prefix}{k}"))
}

/// One row per sample and node: `t,node,x1..xn,s1..sn,V`.
pub fn write_trajectory<W: Write>(w: &mut W, record: &TrajectoryRecord) -> io::Result<()> {
    let n = record.dim;
    let mut cols = vec!["t".to_string(), "node".to_string()];
    cols.extend(indexed("x", n));
    cols.extend(indexed("s", n));
    cols.push("V".into());
    header(w, &cols)?;
    for (k, &t) in record.times.iter().enumerate() {
        let states = &record.states[k];
        let target = &record.targets[k];
        for i in 0..record.nodes {
            write!(w, "{t},{}", i + 1)?;
            for v in &states[i * n..(i + 1) * n] {
                write!(w, ",{v}")?;
            }
            for v in target {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", record.lyapunov[k])?;
        }
    }
    Ok(())
}

/// `t,node,cause`.
pub fn write_events<W: Write>(w: &mut W, log: &EventLog) -> io::Result<()> {
    header(w, &["t".into(), "node".into(), "cause".into()])?;
    for e in &log.events {
        writeln!(w, "{},{},{}", e.time, e.node + 1, e.cause)?;
    }
    Ok(())
}

/// `u,t_start,t_end` with 1-based modes.
pub fn write_modes<W: Write>(w: &mut W, path: &ModePath) -> io::Result<()> {
    header(w, &["u".into(), "t_start".into(), "t_end".into()])?;
    for s in &path.segments {
        writeln!(w, "{},{},{}", s.mode + 1, s.start, s.end)?;
    }
    Ok(())
}

/// `t,mean_sq_err_node_1..m,mean_max_sq_err,ci95,mean_V`.
pub fn write_ensemble<W: Write>(w: &mut W, summary: &EnsembleSummary) -> io::Result<()> {
    let m = summary.mean_sq_error.first().map_or(0, Vec::len);
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("mean_sq_err_node_", m));
    cols.extend(["mean_max_sq_err", "ci95", "mean_V"].map(String::from));
    header(w, &cols)?;
    for (k, t) in summary.times.iter().enumerate() {
        write!(w, "{t}")?;
        for v in &summary.mean_sq_error[k] {
            write!(w, ",{v}")?;
        }
        writeln!(
            w,
            ",{},{},{}",
            summary.mean_max_sq_error[k], summary.ci95_max_sq_error[k], summary.mean_lyapunov[k]
        )?;
    }
    Ok(())
}

/// Rule-violation counts per node inside `[from, to]`: `node,count`.
pub fn write_histogram<W: Write>(w: &mut W, log: &EventLog, from: f64, to: f64) -> io::Result<()> {
    writeln!(w, "# window: [{from}, {to}]")?;
    header(w, &["node".into(), "count".into()])?;
    for (i, c) in log.window_counts(from, to).iter().enumerate() {
        writeln!(w, "{},{c}", i + 1)?;
    }
    Ok(())
}

/// `t,rho,deviation,varrho,distance`.
pub fn write_bounds_test<W: Write>(w: &mut W, samples: &[SoundnessSample]) -> io::Result<()> {
    header(
        w,
        &["t", "rho", "deviation", "varrho", "distance"].map(String::from),
    )?;
    for s in samples {
        writeln!(w, "{},{},{},{},{}", s.t, s.rho, s.deviation, s.varrho, s.distance)?;
    }
    Ok(())
}
