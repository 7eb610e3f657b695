//! CSV artifacts. Floats use `{:.16e}` (17 significant digits), lines end
//! in `\n`, and nothing time-dependent enters a CSV file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::ScenarioConfig;
use super::scenario::{u_coordinates, DataSet, RunResult};
use crate::diagnostics::PercentileBands;
use crate::error::{Error, Result};
use crate::model::{DiscretizationParam, Location};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-by-row CSV text.
#[derive(Debug, Default)]
pub struct Csv(String);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv(String::new());
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let mut first = true;
        for cell in cells {
            if !first {
                self.0.push(',');
            }
            first = false;
            self.0.push_str(&cell);
        }
        self.0.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.0).map_err(|e| io_err(path, e))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn location_cells(l: &Location<f64>) -> [String; 2] {
    match l {
        Location::Line(x) => [fmt_f64(*x), String::new()],
        Location::Plane(p) => [fmt_f64(p[0]), fmt_f64(p[1])],
    }
}

/// `data.csv` (sensors and observations) and `truth.csv` (long format).
pub fn write_data(dir: &Path, data: &DataSet) -> Result<()> {
    ensure_dir(dir)?;
    let mut d = Csv::new(&["index", "x", "y", "value"]);
    for (i, (l, y)) in data.obs.locations().iter().zip(data.obs.data()).enumerate() {
        let [x, yy] = location_cells(l);
        d.row([i.to_string(), x, yy, fmt_f64(*y)]);
    }
    d.write(&dir.join("data.csv"))?;

    let mut t = Csv::new(&["quantity", "index", "coord", "value"]);
    for (i, (c, v)) in u_coordinates(&data.truth).iter().zip(data.truth.coords()).enumerate() {
        t.row(["u".into(), i.to_string(), fmt_f64(*c), fmt_f64(*v)]);
    }
    for (i, (l, v)) in data.obs.locations().iter().zip(&data.clean).enumerate() {
        let [x, _] = location_cells(l);
        t.row(["output".into(), i.to_string(), x, fmt_f64(*v)]);
    }
    if let Some(p) = &data.trajectory {
        for (i, (c, v)) in p.nodes.iter().zip(&p.z).enumerate() {
            t.row(["z".into(), i.to_string(), fmt_f64(*c), fmt_f64(*v)]);
        }
    }
    t.write(&dir.join("truth.csv"))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_f64)
}

/// Ordered `key,value` pairs of `summary.csv`.
pub fn summary_rows(cfg: &ScenarioConfig, r: &RunResult) -> Vec<(String, String)> {
    let mut s: Vec<(String, String)> = vec![
        ("scenario".into(), cfg.kind.id().into()),
        ("baseline".into(), cfg.baseline.to_string()),
        ("chain_seed".into(), cfg.chain_seed.to_string()),
        ("n_iterations".into(), r.record.n_iterations.to_string()),
        ("n_post_burn_in_samples".into(), r.n_post.to_string()),
        ("acceptance_u".into(), opt(r.acceptance.u)),
        ("acceptance_a".into(), opt(r.acceptance.a)),
        ("acceptance_relocation".into(), opt(r.acceptance.relocation)),
        ("acceptance_birth_death".into(), opt(r.acceptance.birth_death)),
        ("acceptance_theta".into(), opt(r.acceptance.theta)),
        ("solver_failures".into(), r.record.solver_failures.to_string()),
        ("failed_pushforward_evaluations".into(), r.failed_outputs.to_string()),
        ("reconstruction_error".into(), fmt_f64(r.reconstruction.total)),
        (
            "mean_pushforward_rms".into(),
            fmt_f64(r.pushforward_rms.iter().sum::<f64>() / r.pushforward_rms.len().max(1) as f64),
        ),
    ];
    if let Some(f) = r.fraction_before_last_sensor {
        s.push(("grid_fraction_before_last_sensor".into(), fmt_f64(f)));
    }
    if let Some(h) = &r.histogram {
        for i in 0..h.n_intervals {
            s.push((format!("grid_mean_count_{i}"), fmt_f64(h.mean_count(i))));
        }
    }
    if let Some(x) = r.mesh_density_ratio {
        s.push(("mesh_density_ratio".into(), fmt_f64(x)));
    }
    if let Some(f) = &r.fine_pushforward_rms {
        s.push(("mean_fine_pushforward_rms".into(), fmt_f64(f.iter().sum::<f64>() / f.len().max(1) as f64)));
    }
    for (i, m) in r.posterior_mean_u.iter().enumerate().take(8) {
        s.push((format!("posterior_mean_u_{i}"), fmt_f64(*m)));
    }
    let k_mean = r.record.samples.iter().map(|s| s.a.k() as f64).sum::<f64>() / r.record.samples.len() as f64;
    s.push(("mean_k".into(), fmt_f64(k_mean)));
    s
}

fn write_summary(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut c = Csv::new(&["key", "value"]);
    for (k, v) in rows {
        c.row([k.clone(), v.clone()]);
    }
    c.write(path)
}

fn band_rows(c: &mut Csv, quantity: &str, coords: &[Vec<f64>], b: &PercentileBands) {
    for (i, coord) in coords.iter().enumerate() {
        let mut row = vec![quantity.to_string(), i.to_string()];
        row.push(coord.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"));
        row.push(fmt_f64(b.mean[i]));
        row.extend(b.bands.iter().map(|l| fmt_f64(l[i])));
        c.row(row);
    }
}

/// Writes every per-chain artifact into `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, r: &RunResult) -> Result<()> {
    ensure_dir(dir)?;
    let samples = &r.record.samples;

    let dim = samples.first().map_or(0, |s| s.u.coords().len());
    let mut header = vec!["iteration".to_string(), "potential".to_string()];
    header.extend((0..dim).map(|i| format!("u{i}")));
    let mut cu = Csv(String::new());
    cu.row(header);
    for s in samples {
        let mut row = vec![s.iteration.to_string(), fmt_f64(s.potential)];
        row.extend(s.u.coords().iter().map(|x| fmt_f64(*x)));
        cu.row(row);
    }
    cu.write(&dir.join("chain_u.csv"))?;

    let a_rows: Vec<_> = if cfg.baseline { samples.iter().take(1).collect() } else { samples.iter().collect() };
    let ca = match samples.first().map(|s| &s.a) {
        Some(DiscretizationParam::DensityBased { .. }) => {
            let mut c = Csv::new(&["iteration", "k", "alpha1", "beta1", "alpha2", "beta2"]);
            for s in &a_rows {
                if let DiscretizationParam::DensityBased { k, theta } = &s.a {
                    let mut row = vec![s.iteration.to_string(), k.to_string()];
                    row.extend(theta.iter().map(|t| fmt_f64(*t)));
                    c.row(row);
                }
            }
            c
        }
        _ => {
            let mut c = Csv::new(&["iteration", "k", "points"]);
            for s in &a_rows {
                let pts = s.a.sorted_points().iter().map(|p| fmt_f64(*p)).collect::<Vec<_>>().join(";");
                c.row([s.iteration.to_string(), s.a.k().to_string(), pts]);
            }
            c
        }
    };
    ca.write(&dir.join("chain_a.csv"))?;

    if let Some(h) = &r.histogram {
        let mut header = vec!["sample".to_string()];
        header.extend((0..h.n_intervals).map(|i| format!("interval_{i}")));
        let mut c = Csv(String::new());
        c.row(header);
        for (n, counts) in h.counts.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(counts.iter().map(|x| x.to_string()));
            c.row(row);
        }
        c.write(&dir.join("grid_histogram.csv"))?;

        let mut header = vec!["bucket_lo".to_string(), "bucket_hi".to_string()];
        header.extend((0..h.n_intervals).map(|i| format!("interval_{i}")));
        let mut t = Csv(String::new());
        t.row(header);
        for (b, probs) in h.table().iter().enumerate() {
            let mut row = vec![(b * h.bucket_width).to_string(), (b * h.bucket_width + h.bucket_width - 1).to_string()];
            row.extend(probs.iter().map(|p| fmt_f64(*p)));
            t.row(row);
        }
        t.write(&dir.join("grid_table.csv"))?;
    }

    let mut header = vec!["quantity", "index", "coord", "mean"];
    let names: Vec<String> = r.u_bands.levels.iter().map(|l| format!("p{l}")).collect();
    header.extend(names.iter().map(String::as_str));
    let mut b = Csv::new(&header);
    let ucoords: Vec<Vec<f64>> = r.u_coords.iter().map(|x| vec![*x]).collect();
    band_rows(&mut b, "u", &ucoords, &r.u_bands);
    band_rows(&mut b, "output", &r.sensor_coords, &r.output_bands);
    if let Some((grid, tb)) = &r.trajectory_bands {
        let coords: Vec<Vec<f64>> = grid.iter().map(|x| vec![*x]).collect();
        band_rows(&mut b, "z", &coords, tb);
    }
    b.write(&dir.join("bands.csv"))?;

    let mut e = Csv::new(&["sensor", "coord", "e_r", "pushforward_rms", "fine_pushforward_rms"]);
    for (i, c) in r.sensor_coords.iter().enumerate() {
        e.row([
            i.to_string(),
            c.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"),
            fmt_f64(r.reconstruction.per_sensor[i]),
            fmt_f64(r.pushforward_rms[i]),
            r.fine_pushforward_rms.as_ref().map_or_else(String::new, |f| fmt_f64(f[i])),
        ]);
    }
    e.write(&dir.join("reconstruction_error.csv"))?;

    let mut header = vec!["iteration".to_string()];
    header.extend((0..r.sensor_coords.len()).map(|i| format!("sensor_{i}")));
    let mut pf = Csv(String::new());
    pf.row(header);
    for (it, o) in &r.outputs {
        let mut row = vec![it.to_string()];
        row.extend(o.iter().map(|x| fmt_f64(*x)));
        pf.row(row);
    }
    pf.write(&dir.join("pushforward.csv"))?;

    if !r.traces.is_empty() {
        let mut header = vec!["iteration".to_string()];
        for (x, _) in &r.traces {
            header.push(format!("u_at_{x}"));
            header.push(format!("running_mean_at_{x}"));
        }
        let mut c = Csv(String::new());
        c.row(header);
        let means: Vec<Vec<f64>> = r.traces.iter().map(|(_, t)| crate::diagnostics::running_mean(t)).collect();
        for (n, s) in samples.iter().enumerate() {
            let mut row = vec![s.iteration.to_string()];
            for (t, m) in r.traces.iter().zip(&means) {
                row.push(fmt_f64(t.1[n]));
                row.push(fmt_f64(m[n]));
            }
            c.row(row);
        }
        c.write(&dir.join("traces.csv"))?;
    }

    if let Some(mesh) = &r.final_mesh {
        let mut c = Csv::new(&["record", "index", "v0", "v1", "v2"]);
        for (i, (p, bnd)) in mesh.nodes.iter().zip(&mesh.boundary).enumerate() {
            c.row(["node".into(), i.to_string(), fmt_f64(p[0]), fmt_f64(p[1]), u8::from(*bnd).to_string()]);
        }
        for (i, t) in mesh.triangles.iter().enumerate() {
            c.row(["triangle".into(), i.to_string(), t[0].to_string(), t[1].to_string(), t[2].to_string()]);
        }
        c.write(&dir.join("mesh_final.csv"))?;
    }

    write_summary(&dir.join("summary.csv"), &summary_rows(cfg, r))?;
    let runtime = format!("{:.3}\n", r.runtime_secs);
    fs::write(dir.join("runtime.txt"), runtime).map_err(|e| io_err(dir, e))
}

/// Writes a single chain into `dir`, or `dir/chain_i` per chain plus a
/// merged `summary.csv` when there are several.
pub fn write_runs(dir: &Path, cfgs: &[ScenarioConfig], runs: &[RunResult]) -> Result<()> {
    if runs.len() == 1 {
        return write_run(dir, &cfgs[0], &runs[0]);
    }
    ensure_dir(dir)?;
    let mut tables = Vec::new();
    for (i, (c, r)) in cfgs.iter().zip(runs).enumerate() {
        write_run(&dir.join(format!("chain_{i}")), c, r)?;
        tables.push(summary_rows(c, r));
    }
    write_summary(&dir.join("summary.csv"), &merge_summaries(&tables))
}

/// Averages numeric entries across chains and pools acceptance counts.
pub fn merge_summaries(tables: &[Vec<(String, String)>]) -> Vec<(String, String)> {
    let Some(first) = tables.first() else { return Vec::new() };
    let mut out = vec![("n_chains".to_string(), tables.len().to_string())];
    for (key, value) in first {
        if key == "chain_seed" {
            continue;
        }
        let nums: Option<Vec<f64>> = tables
            .iter()
            .map(|t| t.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.parse::<f64>().ok()))
            .collect();
        let merged = match nums {
            Some(v) if value.parse::<u64>().is_err() || key.starts_with("acceptance") => {
                fmt_f64(v.iter().sum::<f64>() / v.len() as f64)
            }
            Some(v) => (v.iter().sum::<f64>() as u64).to_string(),
            None => value.clone(),
        };
        out.push((key.clone(), merged));
    }
    out
}

/// Parses a `key,value` summary file.
pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("key,value") {
        return Err(Error::Parse(format!("{}: missing `key,value` header", path.display())));
    }
    lines
        .map(|l| {
            l.split_once(',')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("{}: malformed line `{l}`", path.display())))
        })
        .collect()
}

/// Summary of a run directory: its own `summary.csv`, or the merge of the
/// `chain_*` subdirectories when the top-level file is absent.
pub fn summarize_dir(dir: &Path) -> Result<Vec<(String, String)>> {
    let top = dir.join("summary.csv");
    if top.exists() {
        return read_summary(&top);
    }
    let mut subdirs: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.csv").exists())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(io_err(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no summary.csv found")));
    }
    let tables = subdirs.iter().map(|p| read_summary(&p.join("summary.csv"))).collect::<Result<Vec<_>>>()?;
    Ok(merge_summaries(&tables))
}

/// Aligned text rendering of summary pairs.
pub fn render_summary(rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<w$}  {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_rows_use_lf() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(["1".to_string(), "2".to_string()]);
        assert_eq!(c.as_str(), "a,b\n1,2\n");
    }

    #[test]
    fn merge_averages_rates_and_sums_counts() {
        let a = vec![("acceptance_u".into(), "0.2".into()), ("solver_failures".into(), "3".into())];
        let b = vec![("acceptance_u".into(), "0.4".into()), ("solver_failures".into(), "1".into())];
        let m = merge_summaries(&[a, b]);
        assert_eq!(m[0], ("n_chains".into(), "2".into()));
        assert!((m[1].1.parse::<f64>().unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(m[2].1, "4");
    }
}
