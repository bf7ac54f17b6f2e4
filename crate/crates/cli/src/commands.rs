use std::f64::consts::TAU;
use std::path::Path;

use photon_bell_core::wwzb::{correlation_matrix, two_mode_as_qubits};
use photon_bell_core::{
    averaged_table, bell_value_averaged, chsh_horodecki, maximize_bell, optimal_amplitudes_at_zero,
    threshold_efficiency, violation_samples, wwzb_value, Amplitudes, MeasurementStrategy,
    OptimizationSpec, PhaseMode, PhaseModel, SearchSpace, SubspaceState, ViolationHistogram,
    ViolationSpec,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::manifest::{sidecar_path, RunManifest};
use crate::output::{json_document, write_bytes, Cell, Format, Table};

/// Samples per parallel work item in Monte Carlo runs.
const SAMPLE_CHUNK: usize = 256;

pub fn dispatch(common: &Common, command: &Command) -> Result<()> {
    match command {
        Command::Fig1(a) => fig1(common, a),
        Command::Fig2(a) => fig2(common, a),
        Command::Fig3(a) => fig3(common, a),
        Command::Smax(a) => smax(common, a),
        Command::Eta(a) => eta(common, a),
        Command::ViolationDist(a) => violation_dist(common, a),
        Command::ChshFootnote => chsh_mixture(common),
        Command::Correlators(a) => correlators(common, a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_seed(common: &Common, command: &str) -> Result<u64> {
    common
        .seed
        .ok_or_else(|| usage(format!("`{command}` is a Monte Carlo command and needs --seed")))
}

/// Summary lines go to stdout when the data went to a file, else to stderr.
fn summary(common: &Common, line: &str) {
    if common.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

/// Writes one output document: to `--out` with a sidecar manifest, or to stdout.
fn emit(
    common: &Common,
    manifest: &RunManifest,
    render: impl Fn(Option<&str>) -> Result<String>,
) -> Result<()> {
    match &common.out {
        Some(path) => {
            let sidecar = sidecar_path(path);
            let name = file_name(&sidecar);
            write_bytes(path, render(Some(&name))?.as_bytes())?;
            manifest.write(&sidecar)
        }
        None => {
            print!("{}", render(None)?);
            Ok(())
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn fig1(common: &Common, a: &Fig1Args) -> Result<()> {
    if a.r.is_nan() || a.r <= 0.0 {
        return Err(usage("--r must be positive"));
    }
    if a.grid == 0 {
        return Err(usage("--grid must be at least 1"));
    }
    let state = SubspaceState::w_state(2)?;
    let strategy = MeasurementStrategy::counting_and_displacement(2, a.r)?;
    let points: Vec<(f64, f64)> = a
        .deltas
        .iter()
        .flat_map(|&d| (0..a.grid).map(move |i| (d, i as f64 * TAU / a.grid as f64)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(delta, phi)| {
            let model = PhaseModel::new(vec![phi], delta)?;
            Ok(bell_value_averaged(&state, &strategy, &model)?.s_value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut table = Table::new(vec!["delta", "phi_bar", "S"]);
    for (&(d, phi), s) in points.iter().zip(values) {
        table.push(vec![Cell::Real(d), Cell::Real(phi), Cell::Real(s)]);
    }
    let manifest = RunManifest::new("fig1", json!({ "r": a.r, "deltas": a.deltas, "grid": a.grid }), None);
    let format = common.format.unwrap_or(Format::Csv);
    emit(common, &manifest, |m| table.render(format, m))
}

fn width_grid(step: f64, max: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || max.is_nan() || max < 0.0 {
        return Err(usage("delta grid needs a positive step and nonnegative maximum"));
    }
    let count = (max / step + 1e-9).floor() as usize;
    // round away the accumulated k * step representation error
    Ok((0..=count).map(|k| (k as f64 * step * 1e9).round() / 1e9).collect())
}

fn phase_mode(free: bool) -> PhaseMode {
    if free {
        PhaseMode::Optimize
    } else {
        PhaseMode::Pinned
    }
}

#[derive(Debug, Serialize)]
struct Fig2Row {
    n: usize,
    delta: f64,
    s_max: f64,
    eta_threshold: f64,
    amplitudes: [f64; 2],
}

fn fig2(common: &Common, a: &Fig2Args) -> Result<()> {
    if a.parties.is_empty() {
        return Err(usage("--n needs at least one party count"));
    }
    let widths = width_grid(a.delta_step, a.delta_max)?;
    let jobs: Vec<(usize, f64)> = a
        .parties
        .iter()
        .flat_map(|&n| widths.iter().map(move |&d| (n, d)))
        .collect();
    let seed = common.seed.unwrap_or(0);
    let rows = jobs
        .par_iter()
        .map(|&(n, delta)| {
            let spec = OptimizationSpec::new(n, delta, 1.0)
                .with_phases(phase_mode(a.free_centers))
                .with_seed(seed);
            let best = maximize_bell(&spec)?;
            let threshold = threshold_efficiency(&spec, a.tolerance)?;
            if !threshold.monotone {
                return Err(CliError::Consistency(format!(
                    "S_max is not monotone in the efficiency for N={n}, delta={delta}: {:?}",
                    threshold.coarse_grid
                )));
            }
            Ok(Fig2Row {
                n,
                delta,
                s_max: best.best_s,
                eta_threshold: threshold.eta,
                amplitudes: best.amplitudes[0],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for pair in rows.windows(2) {
        if pair[0].n == pair[1].n && pair[1].s_max > pair[0].s_max + 1e-7 {
            return Err(CliError::Consistency(format!(
                "S_max increased with delta for N={}: {} at {} -> {} at {}",
                pair[0].n, pair[0].s_max, pair[0].delta, pair[1].s_max, pair[1].delta
            )));
        }
    }
    let mut table = Table::new(vec!["N", "delta", "s_max", "eta_threshold"]);
    for r in &rows {
        table.push(vec![Cell::Int(r.n as u64), Cell::Real(r.delta), Cell::Real(r.s_max), Cell::Real(r.eta_threshold)]);
    }
    let mut manifest = RunManifest::new(
        "fig2",
        json!({
            "n": a.parties, "delta_step": a.delta_step, "delta_max": a.delta_max,
            "tolerance": a.tolerance, "free_centers": a.free_centers, "efficiency": 1.0,
        }),
        common.seed,
    );
    manifest.derive("optimal_amplitudes", &rows)?;
    let format = common.format.unwrap_or(Format::Csv);
    emit(common, &manifest, |m| table.render(format, m))
}

/// Histogram plus the run parameters it belongs to.
#[derive(Debug, Serialize)]
struct HistogramRecord {
    n_parties: usize,
    pairs: usize,
    width: f64,
    efficiency: f64,
    #[serde(flatten)]
    histogram: ViolationHistogram,
}

fn sample_histogram(spec: &ViolationSpec, amps: Amplitudes) -> Result<ViolationHistogram> {
    if spec.n_samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let chunks: Vec<_> = (0..spec.n_samples)
        .step_by(SAMPLE_CHUNK)
        .map(|start| start..(start + SAMPLE_CHUNK).min(spec.n_samples))
        .collect();
    let parts = chunks
        .into_par_iter()
        .map(|range| violation_samples(spec, amps, range))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let values: Vec<f64> = parts.into_iter().flatten().collect();
    Ok(ViolationHistogram::from_values(&values, spec.bins)?)
}

fn histogram_table(h: &ViolationHistogram) -> Table {
    let mut table = Table::new(vec!["bin_low", "bin_high", "count"]);
    for (i, &c) in h.counts.iter().enumerate() {
        table.push(vec![Cell::Real(h.bin_edges[i]), Cell::Real(h.bin_edges[i + 1]), Cell::Int(c)]);
    }
    table
}

fn render_histogram(record: &HistogramRecord, format: Format, manifest: Option<&str>) -> Result<String> {
    match format {
        Format::Json => json_document(manifest, "histogram", record),
        Format::Csv => Ok(histogram_table(&record.histogram).to_csv()),
    }
}

fn resolve_amplitudes(given: Option<&[f64]>, n: usize, delta: f64, eta: f64) -> Result<Amplitudes> {
    match given {
        Some([r, r_prime]) => Ok(Amplitudes { r: *r, r_prime: *r_prime }),
        Some(_) => Err(usage("--amplitudes takes exactly two values")),
        None => Ok(optimal_amplitudes_at_zero(n, delta, eta)?.shared_amplitudes()),
    }
}

fn fig3(common: &Common, a: &Fig3Args) -> Result<()> {
    let seed = require_seed(common, "fig3")?;
    if a.pairs.is_empty() {
        return Err(usage("--m needs at least one value"));
    }
    let amps = resolve_amplitudes(None, 2, a.delta, a.eta)?;
    let format = common.format.unwrap_or(Format::Json);
    let mut manifest = RunManifest::new(
        "fig3",
        json!({ "n": 2, "m": a.pairs, "delta": a.delta, "eta": a.eta, "samples": a.samples, "bins": a.bins }),
        Some(seed),
    );
    manifest.derive("amplitudes", amps)?;
    let mut fractions = Vec::new();
    for &m in &a.pairs {
        let spec = ViolationSpec {
            n_parties: 2,
            width: a.delta,
            efficiency: a.eta,
            pairs: m,
            n_samples: a.samples,
            seed,
            bins: a.bins,
        };
        let record = HistogramRecord {
            n_parties: 2,
            pairs: m,
            width: a.delta,
            efficiency: a.eta,
            histogram: sample_histogram(&spec, amps)?,
        };
        if let Some(dir) = &common.out {
            let ext = if format == Format::Json { "json" } else { "csv" };
            let path = dir.join(format!("histogram_m{m}.{ext}"));
            write_bytes(&path, render_histogram(&record, format, Some("manifest.json"))?.as_bytes())?;
        }
        summary(common, &format!("m={m} fraction_violating={}", record.histogram.fraction_violating));
        fractions.push(json!({ "m": m, "fraction_violating": record.histogram.fraction_violating }));
    }
    manifest.derive("fraction_violating", fractions)?;
    if let Some(dir) = &common.out {
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

fn optimization_spec(common: &Common, o: &OptimizeArgs, eta: f64) -> OptimizationSpec {
    let search = if o.per_party { SearchSpace::PerParty } else { SearchSpace::Shared };
    OptimizationSpec::new(o.parties, o.delta, eta)
        .with_phases(phase_mode(o.free_centers))
        .with_search(search)
        .with_restarts(o.restarts)
        .with_seed(common.seed.unwrap_or(0))
}

fn smax(common: &Common, a: &SmaxArgs) -> Result<()> {
    let spec = optimization_spec(common, &a.opt, a.eta);
    let report = maximize_bell(&spec)?;
    let mut manifest = RunManifest::new("smax", serde_json::to_value(&spec)?, common.seed);
    manifest.derive("amplitudes", &report.amplitudes)?;
    manifest.derive("centers", &report.centers)?;
    summary(common, &format!("S_max = {}", report.best_s));
    match common.format.unwrap_or(Format::Json) {
        Format::Json => emit(common, &manifest, |m| json_document(m, "report", &report)),
        Format::Csv => {
            let mut table = Table::new(vec!["N", "delta", "eta", "s_max", "r", "r_prime"]);
            let amps = report.shared_amplitudes();
            table.push(vec![
                Cell::Int(spec.n_parties as u64),
                Cell::Real(spec.width),
                Cell::Real(spec.efficiency),
                Cell::Real(report.best_s),
                Cell::Real(amps.r),
                Cell::Real(amps.r_prime),
            ]);
            emit(common, &manifest, |_| Ok(table.to_csv()))
        }
    }
}

fn eta(common: &Common, a: &EtaArgs) -> Result<()> {
    let spec = optimization_spec(common, &a.opt, 1.0);
    let report = threshold_efficiency(&spec, a.tolerance)?;
    if !report.monotone {
        return Err(CliError::Consistency(format!(
            "S_max is not monotone in the efficiency on the check grid: {:?}",
            report.coarse_grid
        )));
    }
    let mut manifest = RunManifest::new(
        "eta",
        json!({ "spec": spec, "tolerance": a.tolerance }),
        common.seed,
    );
    manifest.derive("bracket", report.bracket)?;
    summary(common, &format!("eta_threshold = {}", report.eta));
    match common.format.unwrap_or(Format::Json) {
        Format::Json => emit(common, &manifest, |m| json_document(m, "report", &report)),
        Format::Csv => {
            let mut table = Table::new(vec!["N", "delta", "eta_threshold", "bracket_low", "bracket_high"]);
            table.push(vec![
                Cell::Int(spec.n_parties as u64),
                Cell::Real(spec.width),
                Cell::Real(report.eta),
                Cell::Real(report.bracket.0),
                Cell::Real(report.bracket.1),
            ]);
            emit(common, &manifest, |_| Ok(table.to_csv()))
        }
    }
}

fn violation_dist(common: &Common, a: &ViolationArgs) -> Result<()> {
    let seed = require_seed(common, "violation-dist")?;
    let amps = resolve_amplitudes(a.amplitudes.as_deref(), a.parties, a.delta, a.eta)?;
    let spec = ViolationSpec {
        n_parties: a.parties,
        width: a.delta,
        efficiency: a.eta,
        pairs: a.pairs,
        n_samples: a.samples,
        seed,
        bins: a.bins,
    };
    let record = HistogramRecord {
        n_parties: a.parties,
        pairs: a.pairs,
        width: a.delta,
        efficiency: a.eta,
        histogram: sample_histogram(&spec, amps)?,
    };
    let mut manifest = RunManifest::new("violation-dist", serde_json::to_value(&spec)?, Some(seed));
    manifest.derive("amplitudes", amps)?;
    summary(common, &format!("fraction_violating = {}", record.histogram.fraction_violating));
    let format = common.format.unwrap_or(Format::Json);
    emit(common, &manifest, |m| render_histogram(&record, format, m))
}

pub const NO_VIOLATION: &str = "no violation";

#[derive(Debug, Serialize)]
struct ChshReport {
    chsh: f64,
    correlation_matrix: Vec<Vec<f64>>,
    verdict: String,
}

fn chsh_mixture(common: &Common) -> Result<()> {
    if common.format == Some(Format::Csv) {
        return Err(usage("chsh-footnote writes json only"));
    }
    // (2/3)|psi><psi| + (1/3)|00><00| is the two-mode W state with efficiency 2/3
    let state = SubspaceState::lossy_w_state(2, 2.0 / 3.0)?;
    let rho = two_mode_as_qubits(&state)?;
    let chsh = chsh_horodecki(&rho)?;
    let t = correlation_matrix(&rho);
    let verdict = if chsh > 2.0 { "violation" } else { NO_VIOLATION };
    println!("CHSH = {chsh:.6}");
    println!("verdict: {verdict}");
    if common.out.is_some() {
        let report = ChshReport {
            chsh,
            correlation_matrix: (0..3).map(|i| (0..3).map(|j| t[(i, j)]).collect()).collect(),
            verdict: verdict.to_string(),
        };
        let mut manifest = RunManifest::new("chsh-footnote", json!({ "efficiency": 2.0 / 3.0 }), None);
        manifest.derive("chsh", chsh)?;
        emit(common, &manifest, |m| json_document(m, "report", &report))?;
    }
    Ok(())
}

fn correlators(common: &Common, a: &CorrelatorArgs) -> Result<()> {
    let n = a.parties;
    if !(1..=20).contains(&n) {
        return Err(usage("--n must be between 1 and 20"));
    }
    let centers = a.centers.clone().unwrap_or_else(|| vec![0.0; n - 1]);
    let state = SubspaceState::lossy_w_state(n, a.eta)?;
    let strategy = MeasurementStrategy::uniform(a.r, a.r_prime, &vec![0.0; n])?;
    let model = PhaseModel::new(centers.clone(), a.delta)?;
    let table = averaged_table(&state, &strategy, &strategy.default_choice(), &model)?;
    let bell = wwzb_value(&table);
    let mut out = Table::new(vec!["s", "xi"]);
    for (s, &v) in table.values().iter().enumerate() {
        out.push(vec![Cell::Int(s as u64), Cell::Real(v)]);
    }
    let mut manifest = RunManifest::new(
        "correlators",
        json!({ "n": n, "eta": a.eta, "r": a.r, "r_prime": a.r_prime, "delta": a.delta, "centers": centers }),
        None,
    );
    manifest.derive("s_value", bell.s_value)?;
    manifest.derive("dominant_r", bell.dominant_r)?;
    summary(common, &format!("S = {}", bell.s_value));
    let format = common.format.unwrap_or(Format::Csv);
    emit(common, &manifest, |m| out.render(format, m))
}
