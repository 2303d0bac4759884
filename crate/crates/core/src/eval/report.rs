//! CSV logs, the `.results` exchange format and the SVG report.
//!
//! A `.results` file has the same layout as `trips.csv`:
//! `policy,regime,seed,trip_id,depart_s,duration_s` with an empty duration
//! for trips censored at the hard cap.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use statrs::statistics::{Data, OrderStatistics, Statistics};

use super::{EpisodeResult, EvalError, PairedReport, Regime, TripRecord};

const TRIPS_HEADER: &str = "policy,regime,seed,trip_id,depart_s,duration_s";

pub fn write_trips_csv<W: Write>(mut w: W, results: &[EpisodeResult]) -> std::io::Result<()> {
    writeln!(w, "{TRIPS_HEADER}")?;
    for r in results {
        for t in &r.trips {
            let d = t.duration.map_or_else(String::new, |d| d.to_string());
            writeln!(w, "{},{},{},{},{},{}", r.policy, r.regime, r.seed, t.id, t.depart, d)?;
        }
    }
    Ok(())
}

pub fn results_to_string(results: &[EpisodeResult]) -> String {
    let mut buf = Vec::new();
    write_trips_csv(&mut buf, results).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

pub fn save_results(path: impl AsRef<Path>, results: &[EpisodeResult]) -> Result<(), EvalError> {
    std::fs::write(path, results_to_string(results))?;
    Ok(())
}

/// Parses a `.results` file back into episodes (without delay curves).
pub fn read_results(text: &str) -> Result<Vec<EpisodeResult>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRIPS_HEADER => {}
        _ => return Err(EvalError::Parse(format!("expected header `{TRIPS_HEADER}`"))),
    }
    let mut out: Vec<EpisodeResult> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| EvalError::Parse(format!("line {}: {m}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let regime: Regime = f[1].parse().map_err(|e: String| bad(&e))?;
        let seed: u64 = f[2].parse().map_err(|_| bad("bad seed"))?;
        let id: u64 = f[3].parse().map_err(|_| bad("bad trip id"))?;
        let depart: f64 = f[4].parse().map_err(|_| bad("bad departure"))?;
        let duration = if f[5].is_empty() { None } else { Some(f[5].parse().map_err(|_| bad("bad duration"))?) };
        let same = out.last().is_some_and(|r| r.policy == f[0] && r.seed == seed && r.regime == regime);
        if !same {
            out.push(EpisodeResult { policy: f[0].to_string(), seed, regime, delay: Vec::new(), trips: Vec::new() });
        }
        out.last_mut().expect("pushed above").trips.push(TripRecord { id, depart, duration });
    }
    Ok(out)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<EpisodeResult>, EvalError> {
    read_results(&std::fs::read_to_string(path)?)
}

pub fn write_delay_csv<W: Write>(mut w: W, results: &[EpisodeResult]) -> std::io::Result<()> {
    writeln!(w, "policy,regime,seed,t,total_delay")?;
    for r in results {
        for (t, d) in r.delay.iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", r.policy, r.regime, r.seed, t + 1, d)?;
        }
    }
    Ok(())
}

/// Trip-duration statistics of one policy in one regime, pooled over runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub policy: String,
    pub regime: Regime,
    pub runs: usize,
    pub completed: usize,
    pub censored: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// One summary per `(policy, regime)`, in first-appearance order.
pub fn summarize(results: &[EpisodeResult]) -> Vec<Summary> {
    let mut keys: Vec<(String, Regime)> = Vec::new();
    for r in results {
        if !keys.iter().any(|(p, g)| *p == r.policy && *g == r.regime) {
            keys.push((r.policy.clone(), r.regime));
        }
    }
    keys.into_iter()
        .map(|(policy, regime)| {
            let runs: Vec<&EpisodeResult> = results.iter().filter(|r| r.policy == policy && r.regime == regime).collect();
            let d: Vec<f64> = runs.iter().flat_map(|r| r.durations()).collect();
            let censored = runs.iter().map(|r| r.censored()).sum();
            let nan = f64::NAN;
            let (mean, min, max) = if d.is_empty() { (nan, nan, nan) } else { (d.iter().mean(), Statistics::min(d.iter()), Statistics::max(d.iter())) };
            let mut data = Data::new(d.clone());
            let (median, q1, q3) = if d.is_empty() {
                (nan, nan, nan)
            } else {
                (data.median(), data.lower_quartile(), data.upper_quartile())
            };
            Summary { policy, regime, runs: runs.len(), completed: d.len(), censored, mean, median, q1, q3, min, max }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(mut w: W, summaries: &[Summary]) -> std::io::Result<()> {
    writeln!(w, "policy,regime,runs,completed,censored,mean_s,median_s,q1_s,q3_s,min_s,max_s")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.policy, s.regime, s.runs, s.completed, s.censored, s.mean, s.median, s.q1, s.q3, s.min, s.max
        )?;
    }
    Ok(())
}

/// Per-trip deltas of every comparison, then a `#`-prefixed statistics
/// line per comparison.
pub fn write_paired_csv<W: Write>(mut w: W, reports: &[PairedReport]) -> std::io::Result<()> {
    writeln!(w, "a,b,seed,trip_id,delta_s")?;
    for r in reports {
        for d in &r.deltas {
            writeln!(w, "{},{},{},{},{}", r.a, r.b, d.seed, d.trip, d.delta)?;
        }
    }
    for r in reports {
        let opt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        writeln!(
            w,
            "# {} vs {}: n={} excluded={} mean={} median={} sd={} t={} p={}",
            r.a,
            r.b,
            r.deltas.len(),
            r.excluded,
            r.mean,
            r.median,
            r.sd,
            opt(r.t),
            opt(r.p)
        )?;
    }
    Ok(())
}

/// Writes `trips.csv`, `delay.csv`, `summary.csv`, `paired.csv` and
/// `report.svg` into `dir`.
pub fn emit_report(dir: impl AsRef<Path>, results: &[EpisodeResult], paired: &[PairedReport]) -> Result<(), EvalError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let summaries = summarize(results);
    let file = |n: &str| std::fs::File::create(dir.join(n)).map(std::io::BufWriter::new);
    write_trips_csv(file("trips.csv")?, results)?;
    write_delay_csv(file("delay.csv")?, results)?;
    write_summary_csv(file("summary.csv")?, &summaries)?;
    write_paired_csv(file("paired.csv")?, paired)?;
    std::fs::write(dir.join("report.svg"), render_svg(results, &summaries, paired))?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const W: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;

fn finite_max(xs: impl Iterator<Item = f64>) -> f64 {
    xs.filter(|x| x.is_finite()).fold(0.0, f64::max)
}

/// Mean delay over runs at each step; finished runs count as zero delay.
fn mean_curve(runs: &[&EpisodeResult]) -> Vec<f64> {
    let len = runs.iter().map(|r| r.delay.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| runs.iter().map(|r| r.delay.get(t).copied().unwrap_or(0.0)).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// Three panels: mean delay curves, duration box plots and paired-delta
/// histograms. Axes are not truncated.
pub fn render_svg(results: &[EpisodeResult], summaries: &[Summary], paired: &[PairedReport]) -> String {
    let hist_h = PANEL_H * paired.len().max(1) as f64;
    let height = 2.0 * PANEL_H + hist_h + 60.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let pw = W - LEFT - RIGHT;

    // delay curves
    let y0 = 30.0;
    let ph = PANEL_H - 60.0;
    let _ = writeln!(s, "<text x=\"{LEFT}\" y=\"{}\">mean total delay per step</text>", y0 - 10.0);
    let curves: Vec<(String, Vec<f64>)> = summaries
        .iter()
        .map(|sm| {
            let runs: Vec<&EpisodeResult> =
                results.iter().filter(|r| r.policy == sm.policy && r.regime == sm.regime).collect();
            (format!("{} ({})", sm.policy, sm.regime), mean_curve(&runs))
        })
        .collect();
    let tmax = curves.iter().map(|c| c.1.len()).max().unwrap_or(0).max(1) as f64;
    let dmax = finite_max(curves.iter().flat_map(|c| c.1.iter().copied())).max(1e-9);
    axes(&mut s, y0, ph, &format!("{tmax:.0} s"), &format!("{dmax:.1}"));
    for (k, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let stride = (c.len() / 600).max(1);
        let pts: Vec<String> = c
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(t, d)| format!("{:.1},{:.1}", LEFT + pw * (t + 1) as f64 / tmax, y0 + ph - ph * d / dmax))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", pts.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>", W - 200.0, y0 + 12.0 * (k + 1) as f64);
    }

    // box plots
    let y0 = y0 + PANEL_H;
    let _ = writeln!(s, "<text x=\"{LEFT}\" y=\"{}\">trip duration (min, quartiles, max; + mean)</text>", y0 - 10.0);
    let vmax = finite_max(summaries.iter().map(|m| m.max)).max(1e-9);
    axes(&mut s, y0, ph, "", &format!("{vmax:.0} s"));
    let slot = pw / summaries.len().max(1) as f64;
    for (k, m) in summaries.iter().enumerate() {
        if !m.median.is_finite() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let cx = LEFT + slot * (k as f64 + 0.5);
        let y = |v: f64| y0 + ph - ph * v / vmax;
        let bw = (slot * 0.4).min(40.0);
        let _ = writeln!(s, "<line x1=\"{cx:.1}\" x2=\"{cx:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\"/>", y(m.min), y(m.max));
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{bw:.1}\" height=\"{:.1}\" fill=\"white\" stroke=\"{color}\"/>",
            cx - bw / 2.0,
            y(m.q3),
            (y(m.q1) - y(m.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            cx - bw / 2.0,
            cx + bw / 2.0,
            y(m.median),
            y(m.median)
        );
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\" text-anchor=\"middle\">+</text>", cx, y(m.mean) + 4.0);
        let _ = writeln!(
            s,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{} ({})</text>",
            y0 + ph + 14.0,
            m.policy,
            m.regime
        );
    }

    // paired histograms
    for (k, r) in paired.iter().enumerate() {
        let y0 = 30.0 + 2.0 * PANEL_H + PANEL_H * k as f64;
        let _ = writeln!(
            s,
            "<text x=\"{LEFT}\" y=\"{}\">duration {} minus {} per trip (n={}, mean={:.2} s)</text>",
            y0 - 10.0,
            r.a,
            r.b,
            r.deltas.len(),
            r.mean
        );
        let d: Vec<f64> = r.deltas.iter().map(|x| x.delta).collect();
        if d.is_empty() {
            axes(&mut s, y0, ph, "", "0");
            continue;
        }
        let (lo, hi) = (Statistics::min(d.iter()), Statistics::max(d.iter()));
        let bins = 40usize;
        let width = ((hi - lo) / bins as f64).max(1e-9);
        let mut counts = vec![0usize; bins];
        for x in &d {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
        let cmax = *counts.iter().max().unwrap_or(&1) as f64;
        axes(&mut s, y0, ph, &format!("[{lo:.0}, {hi:.0}] s"), &format!("{cmax:.0}"));
        for (b, &c) in counts.iter().enumerate() {
            let h = ph * c as f64 / cmax;
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
                LEFT + pw * b as f64 / bins as f64,
                y0 + ph - h,
                pw / bins as f64 - 1.0,
                PALETTE[0]
            );
        }
        if lo < 0.0 && hi > 0.0 {
            let x0 = LEFT + pw * (-lo) / (hi - lo);
            let _ = writeln!(s, "<line x1=\"{x0:.1}\" x2=\"{x0:.1}\" y1=\"{y0}\" y2=\"{}\" stroke=\"black\" stroke-dasharray=\"3\"/>", y0 + ph);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, y0: f64, ph: f64, xlabel: &str, ymax: &str) {
    let x1 = W - RIGHT;
    let yb = y0 + ph;
    let _ = writeln!(s, "<line x1=\"{LEFT}\" x2=\"{x1}\" y1=\"{yb}\" y2=\"{yb}\" stroke=\"black\"/>");
    let _ = writeln!(s, "<line x1=\"{LEFT}\" x2=\"{LEFT}\" y1=\"{y0}\" y2=\"{yb}\" stroke=\"black\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{ymax}</text>", LEFT - 4.0, y0 + 4.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>", LEFT - 4.0, yb);
    if !xlabel.is_empty() {
        let _ = writeln!(s, "<text x=\"{x1}\" y=\"{}\" text-anchor=\"end\">{xlabel}</text>", yb + 14.0);
    }
}
