//! Plot data from run directories as tidy CSV.
//!
//! Every file has the columns `series,x,y,band,seeds`: `y` is the mean over
//! seeds, `band` the population standard deviation over seeds and `seeds`
//! the number of seeds behind the point.
//!
//! * curves: `x` is the episode, the per-seed value is the mean return over
//!   agents in that episode.
//! * delay: `x` is the delay step, the per-seed value is the mean return
//!   over the final `last` episodes.
//! * outcomes: `x` is success, crash or stuck, the per-seed value is the
//!   fraction of the final `last` episodes with that outcome.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use damarl_core::envs::Outcome;
use damarl_core::marl::{EpisodeRecord, MetricsHeader};

/// One seed's parsed metrics stream.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub dir: PathBuf,
    pub header: MetricsHeader,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunMetrics {
    /// Series label: the group directory name.
    pub fn series(&self) -> String {
        self.dir
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dir.display().to_string())
    }

    /// Series label without the delay suffix, for delay sweeps.
    pub fn series_without_delay(&self) -> String {
        let s = self.series();
        match s.rfind("_k") {
            Some(i) => s[..i].to_string(),
            None => s,
        }
    }

    pub fn delay(&self) -> usize {
        self.header.delays.iter().copied().max().unwrap_or(0)
    }

    fn tail(&self, last: usize) -> &[EpisodeRecord] {
        &self.episodes[self.episodes.len().saturating_sub(last)..]
    }
}

#[derive(Debug, serde::Deserialize)]
struct HeaderLine {
    header: MetricsHeader,
}

pub fn read_metrics(dir: &Path) -> Result<RunMetrics> {
    let path = dir.join("metrics.jsonl");
    let file = std::fs::File::open(&path)
        .with_context(|| format!("run {}: missing metrics file {}", dir.display(), path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .with_context(|| format!("run {}: empty metrics file", dir.display()))??;
    let header: HeaderLine =
        serde_json::from_str(&first).with_context(|| format!("run {}: bad metrics header", dir.display()))?;
    let episodes = lines
        .enumerate()
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).with_context(|| format!("run {}: metrics line {}", dir.display(), i + 2))
        })
        .collect::<Result<Vec<EpisodeRecord>>>()?;
    Ok(RunMetrics {
        dir: dir.to_path_buf(),
        header: header.header,
        episodes,
    })
}

/// Seed directories under `path`: the path itself if it holds a run, its
/// `seed_*` children, or those of each child group.
pub fn find_runs(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        bail!("run {}: not a directory", path.display());
    }
    if is_seed_dir(path) || path.join("metrics.jsonl").is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut children: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    let seeds: Vec<PathBuf> = children.iter().filter(|p| is_seed_dir(p)).cloned().collect();
    if !seeds.is_empty() {
        return Ok(seeds);
    }
    let mut out = Vec::new();
    for c in children {
        out.extend(std::fs::read_dir(&c)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| is_seed_dir(p)));
    }
    out.sort();
    if out.is_empty() {
        bail!("run {}: no seed_* directories found", path.display());
    }
    Ok(out)
}

fn is_seed_dir(p: &Path) -> bool {
    p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("seed_"))
}

pub fn load_runs(paths: &[PathBuf]) -> Result<Vec<RunMetrics>> {
    let mut runs = Vec::new();
    for p in paths {
        for dir in find_runs(p)? {
            runs.push(read_metrics(&dir)?);
        }
    }
    Ok(runs)
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn team_return(r: &EpisodeRecord) -> f64 {
    r.returns.iter().sum::<f64>() / r.returns.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub series: String,
    pub x: String,
    pub y: f64,
    pub band: f64,
    pub seeds: usize,
}

fn group<K: Ord>(runs: &[RunMetrics], key: impl Fn(&RunMetrics) -> K) -> BTreeMap<K, Vec<&RunMetrics>> {
    let mut map: BTreeMap<K, Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        map.entry(key(r)).or_default().push(r);
    }
    map
}

/// Learning curves: one point per episode present in every seed.
pub fn curves(runs: &[RunMetrics]) -> Vec<Point> {
    let mut out = Vec::new();
    for (series, members) in group(runs, RunMetrics::series) {
        let len = members.iter().map(|r| r.episodes.len()).min().unwrap_or(0);
        for e in 0..len {
            let ys: Vec<f64> = members.iter().map(|r| team_return(&r.episodes[e])).collect();
            let (y, band) = mean_std(&ys);
            out.push(Point {
                series: series.clone(),
                x: members[0].episodes[e].episode.to_string(),
                y,
                band,
                seeds: ys.len(),
            });
        }
    }
    out
}

/// Final-performance versus delay step.
pub fn delay_sweep(runs: &[RunMetrics], last: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for ((series, k), members) in group(runs, |r| (r.series_without_delay(), r.delay())) {
        let ys: Vec<f64> = members
            .iter()
            .map(|r| {
                let tail = r.tail(last);
                tail.iter().map(team_return).sum::<f64>() / tail.len().max(1) as f64
            })
            .collect();
        let (y, band) = mean_std(&ys);
        out.push(Point {
            series,
            x: k.to_string(),
            y,
            band,
            seeds: ys.len(),
        });
    }
    out
}

/// Outcome rates over the final episodes.
pub fn outcome_rates(runs: &[RunMetrics], last: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for (series, members) in group(runs, RunMetrics::series) {
        for (name, which) in [("success", Outcome::Success), ("crash", Outcome::Crash), ("stuck", Outcome::Stuck)] {
            let ys: Vec<f64> = members
                .iter()
                .map(|r| {
                    let tail = r.tail(last);
                    tail.iter().filter(|e| e.outcome == Some(which)).count() as f64 / tail.len().max(1) as f64
                })
                .collect();
            let (y, band) = mean_std(&ys);
            out.push(Point {
                series: series.clone(),
                x: name.into(),
                y,
                band,
                seeds: ys.len(),
            });
        }
    }
    out
}

pub fn to_csv(points: &[Point]) -> String {
    let mut s = String::from("series,x,y,band,seeds\n");
    for p in points {
        let _ = writeln!(s, "{},{},{:?},{:?},{}", p.series, p.x, p.y, p.band, p.seeds);
    }
    s
}
