//! The trajectory farm: embarrassingly parallel `run_trajectory` calls,
//! per-trajectory reduction to small observable records, an order-fixed
//! merge, CSV emission and a resumable JSON manifest.
//!
//! Determinism: trajectory `i` of a run is fully determined by
//! `(seed, config)`; records are folded in trajectory-index order, so the
//! outputs are identical for any worker count, and a resumed run reproduces
//! an uninterrupted one bit for bit.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::collapse::{
    crossing_locator, fit_collapse, CollapseResult, Curve, ScalingDataset, ScalingPoint,
    DEFAULT_WINDOW,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::observables::{
    covariance, density_correlator, displacement_average, ell_tilde, entropy_profile,
    CorrelatorSamples, Region,
};
use crate::stats::Accumulator;
use crate::theory::NlsmParams;
use crate::trajectory::{derive_seed, run_trajectory, Protocol};
use crate::VERSION;

// ---------------------------------------------------------------------------
// manifest

/// Reduced observables of one completed trajectory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryRecord {
    /// Translation-averaged correlator `c(r)`, linearized displacement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_x: Option<Vec<f64>>,
    /// Quarter-strip particle-number covariance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_ab: Option<f64>,
    /// Strip profile: `(entropy, cumulant2)` for `ell = 1..=L/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<(f64, f64)>>,
    pub repurifications: u32,
    pub n_events: u64,
}

/// Resumable record of a run: completed trajectory summaries keyed by
/// index, plus failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub digest: String,
    /// Digest of the enclosing sweep, when this run is a sweep cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_digest: Option<String>,
    pub l: usize,
    pub d: usize,
    pub j: f64,
    pub gamma: f64,
    pub rho: f64,
    pub time: f64,
    pub trajectories: u64,
    pub seed: u64,
    pub completed: BTreeMap<u64, TrajectoryRecord>,
    /// Trajectory index -> error description (excluded from averages).
    pub failed: BTreeMap<u64, String>,
}

impl Manifest {
    fn fresh(config: &RunConfig, sweep_digest: Option<String>) -> Result<Self> {
        Ok(Self {
            version: VERSION.to_string(),
            digest: config.digest(),
            sweep_digest,
            l: config.l,
            d: config.d,
            j: config.j,
            gamma: config.gamma,
            rho: config.rho,
            time: config.total_time()?,
            trajectories: config.trajectories,
            seed: config.seed,
            completed: BTreeMap::new(),
            failed: BTreeMap::new(),
        })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_str(&text)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

/// Metadata line carried by every table (`# ` + space-separated `k=v`).
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub version: String,
    pub digest: String,
    pub sweep_digest: Option<String>,
    pub l: usize,
    pub d: usize,
    pub j: f64,
    pub gamma: f64,
    pub rho: f64,
    pub trajectories: u64,
}

impl TableMeta {
    fn from_manifest(m: &Manifest) -> Self {
        Self {
            version: m.version.clone(),
            digest: m.digest.clone(),
            sweep_digest: m.sweep_digest.clone(),
            l: m.l,
            d: m.d,
            j: m.j,
            gamma: m.gamma,
            rho: m.rho,
            trajectories: m.completed.len() as u64,
        }
    }

    fn header_line(&self) -> String {
        let mut s = format!(
            "# mipt={} digest={} l={} d={} j={} gamma={} rho={} trajectories={}",
            self.version, self.digest, self.l, self.d, self.j, self.gamma, self.rho,
            self.trajectories
        );
        if let Some(sd) = &self.sweep_digest {
            let _ = write!(s, " sweep={sd}");
        }
        s
    }

    fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Schema("missing metadata line".into()))?;
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for token in body.split_whitespace() {
            if let Some((k, v)) = token.split_once('=') {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Schema(format!("metadata missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Schema(format!("bad metadata `{k}`")))
        };
        Ok(Self {
            version: get("mipt")?.to_string(),
            digest: get("digest")?.to_string(),
            sweep_digest: fields.get("sweep").map(|s| s.to_string()),
            l: num("l")? as usize,
            d: num("d")? as usize,
            j: num("j")?,
            gamma: num("gamma")?,
            rho: num("rho")?,
            trajectories: num("trajectories")? as u64,
        })
    }
}

fn write_table(path: &Path, meta: &TableMeta, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", meta.header_line());
    let _ = writeln!(text, "{header}");
    for row in rows {
        let _ = writeln!(text, "{row}");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse a table file: metadata line, column header, rows.
pub fn read_table(text: &str) -> Result<(TableMeta, Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let meta = TableMeta::parse(
        lines
            .next()
            .ok_or_else(|| Error::Schema("empty table".into()))?,
    )?;
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Schema("missing column header".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(Error::Schema(format!(
                "row has {} columns, header has {}",
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    Ok((meta, header, rows))
}

fn fmt_err(e: Option<f64>) -> String {
    e.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// simulate

/// Summary returned by [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub out: PathBuf,
    pub digest: String,
    pub completed: u64,
    pub failed: u64,
    pub repurifications: u64,
    /// Worst per-trajectory `|C(q = 0)|` (exact zero for pure states).
    pub worst_q0: Option<f64>,
    pub mean_g_ab: Option<(f64, Option<f64>)>,
}

fn reduce_trajectory(
    config: &RunConfig,
    protocol: &Protocol,
    regions: Option<&(Region, Region)>,
    index: u64,
) -> Result<TrajectoryRecord> {
    let result = run_trajectory(protocol, config.seed, index)?;
    let lattice = protocol.spectrum.lattice;
    let c_x = config.correlators.then(|| {
        let c = density_correlator(&result.green);
        displacement_average(&lattice, &c)
    });
    let g_ab = match regions {
        Some((a, b)) => Some(covariance(&result.green, a, b)?),
        None => None,
    };
    let profile = if config.entropy_profile {
        Some(
            entropy_profile(&result.green, &lattice)?
                .into_iter()
                .map(|p| (p.entropy, p.cumulant2))
                .collect(),
        )
    } else {
        None
    };
    Ok(TrajectoryRecord {
        c_x,
        g_ab,
        profile,
        repurifications: result.repurifications,
        n_events: result.n_events as u64,
    })
}

/// Run (or resume) a batch of trajectories and write the observable tables.
pub fn simulate(config: &RunConfig, resume: bool) -> Result<SimulateReport> {
    simulate_cell(config, resume, None)
}

fn simulate_cell(
    config: &RunConfig,
    resume: bool,
    sweep_digest: Option<String>,
) -> Result<SimulateReport> {
    config.validate()?;
    let spectrum = config.build_spectrum()?;
    let protocol = config.protocol(spectrum)?;

    std::fs::create_dir_all(&config.out)
        .map_err(|e| Error::io(config.out.display().to_string(), e))?;
    let manifest_path = config.out.join("manifest.json");
    let manifest = if resume && manifest_path.exists() {
        let m = Manifest::load(&manifest_path)?;
        if m.digest != config.digest() {
            return Err(Error::Config(format!(
                "manifest digest {} does not match configuration digest {}",
                m.digest,
                config.digest()
            )));
        }
        m
    } else {
        Manifest::fresh(config, sweep_digest)?
    };

    let regions = if config.covariance {
        Some(Region::quarter_strips(&config.lattice()?)?)
    } else {
        None
    };

    let pending: Vec<u64> = (0..config.trajectories)
        .filter(|i| !manifest.completed.contains_key(i) && !manifest.failed.contains_key(i))
        .collect();

    // single-writer aggregation; the manifest hits disk every few finished
    // trajectories so an interrupted batch resumes close to where it died
    let shared = std::sync::Mutex::new(manifest);
    let work = |indices: &[u64]| {
        indices.par_iter().for_each(|&i| {
            let outcome = reduce_trajectory(config, &protocol, regions.as_ref(), i);
            let mut m = shared.lock().unwrap();
            match outcome {
                Ok(record) => {
                    m.completed.insert(i, record);
                }
                Err(e) => {
                    m.failed.insert(i, e.to_string());
                }
            }
            let done = m.completed.len() + m.failed.len();
            if done % 8 == 0 {
                let _ = m.save(&manifest_path);
            }
        });
    };
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| work(&pending));
    } else {
        work(&pending);
    }

    let manifest = shared.into_inner().unwrap();
    manifest.save(&manifest_path)?;
    write_run_tables(config, &manifest)
}

fn write_run_tables(config: &RunConfig, manifest: &Manifest) -> Result<SimulateReport> {
    let lattice = config.lattice()?;
    let meta = TableMeta::from_manifest(manifest);

    let mut samples = config.correlators.then(|| CorrelatorSamples::new(lattice));
    let mut g_ab_acc = Accumulator::new();
    let half = config.l / 2;
    let mut entropy_acc = vec![Accumulator::new(); half];
    let mut c2_acc = vec![Accumulator::new(); half];
    let mut repurifications = 0u64;

    // fold in index order (BTreeMap iterates sorted)
    for record in manifest.completed.values() {
        if let (Some(samples), Some(c_x)) = (samples.as_mut(), record.c_x.as_ref()) {
            samples.push_displacement(c_x);
        }
        if let Some(g) = record.g_ab {
            g_ab_acc.push(g);
        }
        if let Some(profile) = &record.profile {
            for (k, &(s, c2)) in profile.iter().enumerate() {
                entropy_acc[k].push(s);
                c2_acc[k].push(c2);
            }
        }
        repurifications += record.repurifications as u64;
    }

    if let Some(samples) = &samples {
        if samples.n_trajectories() > 0 {
            // axis cut: q_tilde, c_q, err
            let rows: Vec<String> = samples
                .momentum_cut_estimate()
                .into_iter()
                .map(|(qt, mean, err)| format!("{qt:.12e},{mean:.12e},{}", fmt_err(err)))
                .collect();
            write_table(
                &config.out.join("correlator_q.csv"),
                &meta,
                "q_tilde,c_q,err",
                &rows,
            )?;

            // raw displacement map
            let est = samples.displacement_estimate();
            let coord_header: String = (1..=config.d)
                .map(|a| format!("r{a}"))
                .collect::<Vec<_>>()
                .join(",");
            let rows: Vec<String> = (0..est.len())
                .map(|idx| {
                    let coords = lattice.site_coords(idx);
                    let cs: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                    format!(
                        "{},{:.12e},{}",
                        cs.join(","),
                        est.mean(idx),
                        fmt_err(est.std_err(idx))
                    )
                })
                .collect();
            write_table(
                &config.out.join("correlator_x.csv"),
                &meta,
                &format!("{coord_header},c_x,err"),
                &rows,
            )?;

            // raw momentum grid
            let grid = samples.momentum_grid_estimate();
            let coord_header: String = (1..=config.d)
                .map(|a| format!("m{a}"))
                .collect::<Vec<_>>()
                .join(",");
            let rows: Vec<String> = (0..grid.len())
                .map(|idx| {
                    let coords = lattice.site_coords(idx);
                    let cs: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                    format!(
                        "{},{:.12e},{}",
                        cs.join(","),
                        grid.mean(idx),
                        fmt_err(grid.std_err(idx))
                    )
                })
                .collect();
            write_table(
                &config.out.join("correlator_grid.csv"),
                &meta,
                &format!("{coord_header},c_q,err"),
                &rows,
            )?;
        }
    }

    let mean_g_ab = (g_ab_acc.count() > 0).then(|| (g_ab_acc.mean(), g_ab_acc.std_err()));
    if let Some((mean, err)) = mean_g_ab {
        let row = format!(
            "{},{},{:.12e},{}",
            config.l,
            config.gamma,
            mean,
            fmt_err(err)
        );
        write_table(
            &config.out.join("covariance.csv"),
            &meta,
            "l,gamma,g_ab,err",
            &[row],
        )?;
    }

    if config.entropy_profile && entropy_acc.first().is_some_and(|a| a.count() > 0) {
        let rows: Vec<String> = (0..half)
            .map(|k| {
                let ell = k + 1;
                let s = &entropy_acc[k];
                let c = &c2_acc[k];
                let ratio = s.mean() / c.mean();
                // quadrature propagation of the two standard errors
                let ratio_err = match (s.std_err(), c.std_err()) {
                    (Some(es), Some(ec)) if s.mean() != 0.0 && c.mean() != 0.0 => Some(
                        ratio.abs()
                            * ((es / s.mean()).powi(2) + (ec / c.mean()).powi(2)).sqrt(),
                    ),
                    _ => None,
                };
                format!(
                    "{ell},{:.12e},{:.12e},{},{:.12e},{},{:.12e},{}",
                    ell_tilde(ell, config.l),
                    s.mean(),
                    fmt_err(s.std_err()),
                    c.mean(),
                    fmt_err(c.std_err()),
                    ratio,
                    fmt_err(ratio_err)
                )
            })
            .collect();
        write_table(
            &config.out.join("entropy_profile.csv"),
            &meta,
            "ell,ell_tilde,entropy,entropy_err,c2,c2_err,ratio,ratio_err",
            &rows,
        )?;
    }

    Ok(SimulateReport {
        out: config.out.clone(),
        digest: manifest.digest.clone(),
        completed: manifest.completed.len() as u64,
        failed: manifest.failed.len() as u64,
        repurifications,
        worst_q0: samples.as_ref().map(|s| s.worst_q0()),
        mean_g_ab,
    })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug)]
pub struct SweepReport {
    pub out: PathBuf,
    pub sweep_digest: String,
    pub cells: Vec<(usize, f64, Result<SimulateReport>)>,
    pub dataset: PathBuf,
}

/// Independent sub-runs over the `(L, gamma)` grid with derived seeds, plus
/// the merged covariance dataset ready for the collapse fit.
pub fn sweep(
    template: &RunConfig,
    sizes: &[usize],
    gammas: &[f64],
    resume: bool,
) -> Result<SweepReport> {
    if sizes.is_empty() || gammas.is_empty() {
        return Err(Error::Config("sweep needs non-empty size and gamma lists".into()));
    }
    let root = template.out.clone();
    std::fs::create_dir_all(&root).map_err(|e| Error::io(root.display().to_string(), e))?;

    // digest of the sweep = digest of the template plus the grids
    let mut canon = template.canonical();
    let _ = write!(canon, "\nsweep-sizes = {sizes:?}\nsweep-gammas = {gammas:?}");
    let sweep_digest = {
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(canon.as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect::<String>()
    };

    let mut cells = Vec::new();
    let mut rows: Vec<(usize, f64, String)> = Vec::new();
    for (cell_index, (&l, &gamma)) in sizes
        .iter()
        .flat_map(|l| gammas.iter().map(move |g| (l, g)))
        .enumerate()
    {
        let mut cfg = template.clone();
        cfg.l = l;
        cfg.gamma = gamma;
        cfg.seed = derive_seed(template.seed, cell_index as u64);
        cfg.out = root.join(format!("L{l}_g{gamma}"));
        let report = simulate_cell(&cfg, resume, Some(sweep_digest.clone()));
        if let Ok(r) = &report {
            if let Some((mean, err)) = r.mean_g_ab {
                rows.push((
                    l,
                    gamma,
                    format!("{l},{gamma},{mean:.12e},{}", fmt_err(err)),
                ));
            }
        }
        cells.push((l, gamma, report));
    }

    rows.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    let meta = TableMeta {
        version: VERSION.to_string(),
        digest: sweep_digest.clone(),
        sweep_digest: Some(sweep_digest.clone()),
        l: 0,
        d: template.d,
        j: template.j,
        gamma: 0.0,
        rho: template.rho,
        trajectories: template.trajectories,
    };
    let dataset = root.join("dataset.csv");
    write_table(
        &dataset,
        &meta,
        "l,gamma,g_ab,err",
        &rows.into_iter().map(|(_, _, r)| r).collect::<Vec<_>>(),
    )?;

    Ok(SweepReport {
        out: root,
        sweep_digest,
        cells,
        dataset,
    })
}

// ---------------------------------------------------------------------------
// dataset parsing and the collapse / crossing entry points

/// Parse a `l,gamma,g_ab,err` table (the sweep dataset schema).
pub fn parse_dataset_csv(text: &str) -> Result<Vec<ScalingPoint>> {
    let (_, header, rows) = read_table(text)?;
    if header != ["l", "gamma", "g_ab", "err"] {
        return Err(Error::Schema(format!(
            "expected columns l,gamma,g_ab,err; got {header:?}"
        )));
    }
    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        let size: usize = row[0]
            .parse()
            .map_err(|_| Error::Schema(format!("bad size `{}`", row[0])))?;
        let gamma: f64 = row[1]
            .parse()
            .map_err(|_| Error::Schema(format!("bad gamma `{}`", row[1])))?;
        let value: f64 = row[2]
            .parse()
            .map_err(|_| Error::Schema(format!("bad value `{}`", row[2])))?;
        let std_err: f64 = row[3]
            .parse()
            .map_err(|_| Error::Schema(format!("bad error `{}`", row[3])))?;
        if !gamma.is_finite() || !value.is_finite() || !std_err.is_finite() {
            return Err(Error::Schema("non-finite dataset entry".into()));
        }
        points.push(ScalingPoint {
            size,
            gamma,
            value,
            std_err,
        });
    }
    Ok(points)
}

pub fn load_dataset(path: &Path) -> Result<Vec<ScalingPoint>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_dataset_csv(&text)
}

/// JSON-serializable collapse summary written by the `collapse` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseSummary {
    pub gamma_c: f64,
    pub gamma_c_err: Option<f64>,
    pub nu: f64,
    pub nu_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_err: Option<f64>,
    pub chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_points: usize,
    pub excluded_points: usize,
    pub window: (f64, f64),
}

impl CollapseSummary {
    pub fn new(result: &CollapseResult, window: (f64, f64)) -> Self {
        Self {
            gamma_c: result.gamma_c,
            gamma_c_err: result.gamma_c_err(),
            nu: result.nu,
            nu_err: result.nu_err(),
            zeta: result.zeta,
            zeta_err: result.zeta_err(),
            chi2: result.chi2,
            converged: result.converged,
            iterations: result.iterations,
            n_points: result.n_points,
            excluded_points: result.excluded_points,
            window,
        }
    }
}

/// Fit a dataset file within a gamma window and write the JSON summary.
pub fn collapse_file(
    input: &Path,
    window: Option<(f64, f64)>,
    init: (f64, f64),
    fit_zeta: bool,
    out: Option<&Path>,
) -> Result<CollapseSummary> {
    let window = window.unwrap_or(DEFAULT_WINDOW);
    let points = load_dataset(input)?;
    let dataset = ScalingDataset::new(points)?.restrict_gamma(window.0, window.1)?;
    let result = fit_collapse(&dataset, init, fit_zeta)?;
    let summary = CollapseSummary::new(&result, window);
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(summary)
}

/// Group a dataset into per-size curves and locate the crossing.
pub fn crossing_from_points(points: &[ScalingPoint]) -> Result<Option<crate::collapse::CrossingEstimate>> {
    let mut by_size: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        by_size.entry(p.size).or_default().push((p.gamma, p.value));
    }
    let mut curves: Vec<Curve> = by_size
        .into_iter()
        .map(|(size, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve { size, points }
        })
        .collect();
    curves.sort_by_key(|c| c.size);
    crossing_locator(&curves)
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Momentum,
    Covariance,
    Entropy,
}

/// Digest-compatibility rule: all inputs must carry the same digest, or all
/// belong to the same sweep, unless `force`.
fn check_digests(metas: &[TableMeta], force: bool) -> Result<()> {
    if force || metas.len() <= 1 {
        return Ok(());
    }
    let same_digest = metas.iter().all(|m| m.digest == metas[0].digest);
    let same_sweep = metas[0].sweep_digest.is_some()
        && metas
            .iter()
            .all(|m| m.sweep_digest == metas[0].sweep_digest);
    if same_digest || same_sweep {
        Ok(())
    } else {
        Err(Error::Schema(
            "inputs carry mixed config digests (rerun with --force to combine anyway)".into(),
        ))
    }
}

/// Produce the figure-style tables from raw run outputs.
///
/// * `Momentum`: per input run, `C(q)/(g0 q~)` against `q~ l0` (the
///   saturation plot); columns
///   `gamma,q_tilde,q_tilde_l0,c_q,err,ratio,ratio_err`.
/// * `Covariance`: gather covariance rows into the `l,gamma,g_ab,err`
///   dataset schema (input: run dirs or a sweep root).
/// * `Entropy`: merge entropy profiles, tagged by gamma.
pub fn analyze(mode: AnalyzeMode, inputs: &[PathBuf], out: &Path, force: bool) -> Result<()> {
    match mode {
        AnalyzeMode::Momentum => {
            let mut metas = Vec::new();
            let mut rows = Vec::new();
            for dir in inputs {
                let text = read_to_string(&dir.join("correlator_q.csv"))?;
                let (meta, header, table) = read_table(&text)?;
                if header != ["q_tilde", "c_q", "err"] {
                    return Err(Error::Schema(format!(
                        "unexpected correlator columns {header:?}"
                    )));
                }
                let params = NlsmParams::new(meta.d as f64, meta.j, meta.gamma, meta.rho)?;
                let g0 = params.bare_coupling();
                let l0 = params.mean_free_path();
                for row in &table {
                    let qt: f64 = row[0]
                        .parse()
                        .map_err(|_| Error::Schema("bad q_tilde".into()))?;
                    if qt == 0.0 {
                        continue;
                    }
                    let cq: f64 = row[1]
                        .parse()
                        .map_err(|_| Error::Schema("bad c_q".into()))?;
                    let err: Option<f64> = row[2].parse().ok();
                    let ratio = cq / (g0 * qt);
                    let ratio_err = err.map(|e| e / (g0 * qt));
                    rows.push(format!(
                        "{},{qt:.12e},{:.12e},{cq:.12e},{},{ratio:.12e},{}",
                        meta.gamma,
                        qt * l0,
                        fmt_err(err),
                        fmt_err(ratio_err)
                    ));
                }
                metas.push(meta);
            }
            check_digests(&metas, force)?;
            write_table(
                out,
                &metas[0],
                "gamma,q_tilde,q_tilde_l0,c_q,err,ratio,ratio_err",
                &rows,
            )
        }
        AnalyzeMode::Covariance => {
            // a sweep root with dataset.csv is passed through; otherwise
            // gather covariance.csv from each run dir
            if inputs.len() == 1 && inputs[0].join("dataset.csv").exists() {
                let text = read_to_string(&inputs[0].join("dataset.csv"))?;
                let (meta, header, rows) = read_table(&text)?;
                if header != ["l", "gamma", "g_ab", "err"] {
                    return Err(Error::Schema(format!("unexpected columns {header:?}")));
                }
                let rows: Vec<String> = rows.into_iter().map(|r| r.join(",")).collect();
                return write_table(out, &meta, "l,gamma,g_ab,err", &rows);
            }
            let mut metas = Vec::new();
            let mut entries = Vec::new();
            for dir in inputs {
                let text = read_to_string(&dir.join("covariance.csv"))?;
                let (meta, header, rows) = read_table(&text)?;
                if header != ["l", "gamma", "g_ab", "err"] {
                    return Err(Error::Schema(format!("unexpected columns {header:?}")));
                }
                for row in rows {
                    let l: usize = row[0].parse().map_err(|_| Error::Schema("bad l".into()))?;
                    let g: f64 = row[1]
                        .parse()
                        .map_err(|_| Error::Schema("bad gamma".into()))?;
                    entries.push((l, g, row.join(",")));
                }
                metas.push(meta);
            }
            check_digests(&metas, force)?;
            entries.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
            write_table(
                out,
                &metas[0],
                "l,gamma,g_ab,err",
                &entries.into_iter().map(|(_, _, r)| r).collect::<Vec<_>>(),
            )
        }
        AnalyzeMode::Entropy => {
            let mut metas = Vec::new();
            let mut rows = Vec::new();
            for dir in inputs {
                let text = read_to_string(&dir.join("entropy_profile.csv"))?;
                let (meta, header, table) = read_table(&text)?;
                let expect = [
                    "ell",
                    "ell_tilde",
                    "entropy",
                    "entropy_err",
                    "c2",
                    "c2_err",
                    "ratio",
                    "ratio_err",
                ];
                if header != expect {
                    return Err(Error::Schema(format!(
                        "unexpected entropy columns {header:?}"
                    )));
                }
                for row in table {
                    rows.push(format!("{},{}", meta.gamma, row.join(",")));
                }
                metas.push(meta);
            }
            check_digests(&metas, force)?;
            write_table(
                out,
                &metas[0],
                "gamma,ell,ell_tilde,entropy,entropy_err,c2,c2_err,ratio,ratio_err",
                &rows,
            )
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}
