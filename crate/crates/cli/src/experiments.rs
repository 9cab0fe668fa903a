//! One function per command. Each returns its result files in memory so
//! the runner (and the tests) decide where they go.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use ghz_core::analysis::{
    bell_settings, bell_value, density_matrix_table, fit_phase_scan, max_fidelity_over_phase,
    mle_reconstruct, monte_carlo_errors, phase_witness, simulate_records, simulate_tomography,
    stabilizer_witness, BellResult, DensityMatrixJson, MeasurementRecord, MleOptions, PhaseFit,
    TomographySet, WitnessResult, PHASE_WITNESS_SETTINGS,
};
use ghz_core::chip::{heater_forward, heater_solve, HeaterCalibration, MziPhases, MziSetting};
use ghz_core::qmath::{
    fidelity_to_pure, outcome_label, purity, DensityMatrix, PauliLabel, PureState, DIM, QUBITS,
};
use ghz_core::qss::{expected_qber, run_qss, transcript_csv, QssReport};
use ghz_core::rng::child_seed;
use ghz_core::simulator::{
    coincidence_rate, measurement_settings, sample_counts, LossBudget, NoiseModel, NoiseToggles,
    Simulator, RATE_DISCREPANCY_NOTE,
};
use ghz_core::source::Pair;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::{CliError, SCHEMA_VERSION};

/// Files produced by a command plus a short human-readable summary.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub result: serde_json::Value,
}

impl Artifacts {
    fn new(command: &str, result: impl Serialize) -> Self {
        let result = serde_json::to_value(result).expect("result serializes");
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "result": result,
        });
        Self {
            files: vec![(
                format!("{command}.json"),
                serde_json::to_string_pretty(&doc).expect("json") + "\n",
            )],
            summary: Vec::new(),
            result,
        }
    }

    fn file(mut self, name: impl Into<String>, contents: String) -> Self {
        self.files.push((name.into(), contents));
        self
    }

    fn line(mut self, s: impl Into<String>) -> Self {
        self.summary.push(s.into());
        self
    }
}

fn mle_options(cfg: &ExperimentConfig) -> MleOptions {
    MleOptions {
        max_iterations: cfg.tomography.max_iterations,
        tolerance: cfg.tomography.tolerance,
        ..MleOptions::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResult {
    pub settings: [PauliLabel; QUBITS],
    pub success_probability: f64,
    pub discard_mass: f64,
    pub outcomes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub conditional: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let sim = cfg.noise.simulator()?;
    let dist = sim.measure(&cfg.simulate.settings)?;
    let conditional = dist.conditional()?;
    let counts = match cfg.shots() {
        Some(n) => Some(sample_counts(&dist, n, cfg.seed)?.to_vec()),
        None => None,
    };
    let res = SimulateResult {
        settings: cfg.simulate.settings,
        success_probability: dist.success_probability(),
        discard_mass: dist.discard_mass,
        outcomes: (0..DIM).map(outcome_label).collect(),
        probabilities: dist.probs.to_vec(),
        conditional: conditional.to_vec(),
        counts,
    };
    let mut top: Vec<usize> = (0..DIM).collect();
    top.sort_by(|a, b| conditional[*b].total_cmp(&conditional[*a]));
    let mut out = Artifacts::new("simulate", &res)
        .file("simulate.csv", dist.to_csv())
        .line(format!(
            "success probability {:.6}",
            res.success_probability
        ));
    for &i in top.iter().take(4) {
        out = out.line(format!("P({}) = {:.6}", outcome_label(i), conditional[i]));
    }
    Ok(out)
}

/// Witness readings while heater `cfg.phase_scan.heater` is swept.
pub fn phase_scan_points(
    cfg: &ExperimentConfig,
    cal: &HeaterCalibration,
) -> Result<Vec<(f64, f64)>, CliError> {
    let ps = &cfg.phase_scan;
    let mut model = cfg.noise;
    model.theta = ps.phase_at_zero_power;
    let sim = model.simulator()?;
    let base = measurement_settings(&PHASE_WITNESS_SETTINGS)?;
    let r = cal.resistances[ps.heater - 1];
    let mut points = Vec::with_capacity(ps.points);
    for k in 0..ps.points {
        let p_mw = ps.power_min_mw
            + (ps.power_max_mw - ps.power_min_mw) * k as f64 / (ps.points - 1) as f64;
        let mut currents = [0.0; 16];
        currents[ps.heater - 1] = (p_mw * 1e-3 / r).sqrt();
        let shift = heater_forward(cal, &currents)?.alpha;
        let settings: [MziSetting; QUBITS] = std::array::from_fn(|q| {
            let mut s = MziSetting::new(base[q].alpha + shift[q], base[q].phi);
            s.label = base[q].label;
            s
        });
        let dist = sim.distribution(&settings)?;
        let record = match cfg.shots() {
            None => MeasurementRecord::exact(PHASE_WITNESS_SETTINGS, dist.conditional()?),
            Some(n) => MeasurementRecord::counts(
                PHASE_WITNESS_SETTINGS,
                sample_counts(&dist, n, child_seed(cfg.seed, k as u64))?,
            ),
        };
        points.push((p_mw, phase_witness(&record)?));
    }
    Ok(points)
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseScanResult {
    pub heater: usize,
    pub powers_mw: Vec<f64>,
    pub witness: Vec<f64>,
    pub fit: PhaseFit,
}

pub fn phase_scan(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let cal = cfg.heater_calibration()?;
    let points = phase_scan_points(cfg, &cal)?;
    let fit = fit_phase_scan(&points)?;
    let mut dat = String::from("# power_mw witness fit\n");
    for &(p, w) in &points {
        let _ = writeln!(dat, "{p:.6} {w:.9} {:.9}", fit.eval(p));
    }
    let res = PhaseScanResult {
        heater: cfg.phase_scan.heater,
        powers_mw: points.iter().map(|p| p.0).collect(),
        witness: points.iter().map(|p| p.1).collect(),
        fit,
    };
    Ok(Artifacts::new("phase-scan", &res)
        .file("phase_scan.dat", dat)
        .line(format!(
            "amplitude {:.4}, slope {:.5} rad/mW, maximum at {:.2} mW",
            fit.amplitude, fit.slope, fit.p0
        )))
}

#[derive(Debug, Clone, Serialize)]
pub struct TomographyResult {
    pub fidelity: f64,
    pub purity: f64,
    pub best_phase: f64,
    pub best_phase_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity_error: Option<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn fidelity_and_purity(rho: &DensityMatrix, theta: f64) -> Result<(f64, f64), CliError> {
    Ok((fidelity_to_pure(rho, &PureState::ghz4(theta))?, purity(rho)))
}

pub fn tomography(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let sim = cfg.noise.simulator()?;
    let ts = simulate_tomography(&sim, cfg.shots(), cfg.seed)?;
    let opts = mle_options(cfg);
    let mle = mle_reconstruct(&ts, &opts)?;
    let (fidelity, purity) = fidelity_and_purity(&mle.rho, cfg.noise.theta)?;
    let (best_phase, best_phase_fidelity) = max_fidelity_over_phase(&mle.rho)?;
    let errors = if cfg.tomography.resamples >= 2 && ts.has_counts() {
        let theta = cfg.noise.theta;
        let e = monte_carlo_errors(
            &ts,
            |t| {
                let r = mle_reconstruct(t, &opts)?;
                Ok(vec![
                    fidelity_to_pure(&r.rho, &PureState::ghz4(theta))?,
                    ghz_core::qmath::purity(&r.rho),
                ])
            },
            cfg.tomography.resamples,
            child_seed(cfg.seed, u64::MAX),
        )?;
        Some((e[0], e[1]))
    } else {
        None
    };
    let res = TomographyResult {
        fidelity,
        purity,
        best_phase,
        best_phase_fidelity,
        fidelity_error: errors.map(|e| e.0),
        purity_error: errors.map(|e| e.1),
        log_likelihood: mle.log_likelihood,
        iterations: mle.iterations,
        converged: mle.converged,
    };
    let pm = |e: Option<f64>| e.map(|e| format!(" +- {e:.4}")).unwrap_or_default();
    Ok(Artifacts::new("tomography", &res)
        .file("tomography_counts.json", to_json(&ts))
        .file(
            "tomography_rho.json",
            to_json(&DensityMatrixJson::from(&mle.rho)),
        )
        .file("tomography_rho.txt", density_matrix_table(&mle.rho))
        .line(format!("fidelity {fidelity:.4}{}", pm(res.fidelity_error)))
        .line(format!("purity {purity:.4}{}", pm(res.purity_error)))
        .line(format!(
            "best phase {best_phase:.4} rad, fidelity {best_phase_fidelity:.4}"
        )))
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

pub fn witness(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let sim = cfg.noise.simulator()?;
    let recs = simulate_records(
        &sim,
        &[[PauliLabel::X; QUBITS], [PauliLabel::Z; QUBITS]],
        cfg.shots(),
        cfg.seed,
    )?;
    let w: WitnessResult = stabilizer_witness(&recs[0], &recs[1])?;
    Ok(
        Artifacts::new("witness", json!({ "witness": w, "records": recs })).line(format!(
            "<W> = {:.4}, fidelity >= {:.4}",
            w.value, w.fidelity_lower_bound
        )),
    )
}

pub fn bell(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let sim = cfg.noise.simulator()?;
    let recs = simulate_records(&sim, &bell_settings(), cfg.shots(), cfg.seed)?;
    let b: BellResult = bell_value(&recs)?;
    Ok(
        Artifacts::new("bell", json!({ "bell": b, "records": recs })).line(format!(
            "I = {:.4} +- {:.4} (classical bound 6)",
            b.value, b.standard_error
        )),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub scale: f64,
    pub min_overlap: f64,
    pub value: f64,
    pub standard_error: f64,
}

/// Smallest pairwise master-state overlap the simulator actually uses.
pub fn min_overlap(model: &NoiseModel) -> Result<f64, CliError> {
    let (source, fractions, _, _) = model.effective()?;
    let x: Vec<f64> = (0..4)
        .map(|i| fractions.0[i] * source.distinguishability_scale[i])
        .collect();
    Ok(Pair::ALL
        .iter()
        .map(|p| {
            let (i, j) = p.indices();
            x[i] * x[j]
        })
        .fold(f64::INFINITY, f64::min))
}

pub fn bell_sweep(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let photon = cfg.bell_sweep.photon - 1;
    let mut points = Vec::new();
    for (i, &s) in cfg.bell_sweep.scales.iter().enumerate() {
        let mut model = cfg.noise;
        model.source.distinguishability_scale[photon] = s;
        let sim: Simulator = model.simulator()?;
        let recs = simulate_records(
            &sim,
            &bell_settings(),
            cfg.shots(),
            child_seed(cfg.seed, i as u64),
        )?;
        let b = bell_value(&recs)?;
        points.push(SweepPoint {
            scale: s,
            min_overlap: min_overlap(&model)?,
            value: b.value,
            standard_error: b.standard_error,
        });
    }
    let mut dat = String::from("# min_overlap bell_value standard_error scale\n");
    for p in &points {
        let _ = writeln!(
            dat,
            "{:.6} {:.6} {:.6} {:.4}",
            p.min_overlap, p.value, p.standard_error, p.scale
        );
    }
    let mut out = Artifacts::new("bell-sweep", &points).file("bell_sweep.dat", dat);
    for p in &points {
        out = out.line(format!(
            "scale {:.2}: min overlap {:.3}, I = {:.4}",
            p.scale, p.min_overlap, p.value
        ));
    }
    Ok(out)
}

/// Rows of the noise-budget table: name and the imperfections switched on.
pub fn ablation_rows() -> Vec<(&'static str, NoiseToggles)> {
    let only = |f: fn(&mut NoiseToggles)| {
        let mut t = NoiseToggles::NONE;
        f(&mut t);
        t
    };
    vec![
        ("ideal", NoiseToggles::NONE),
        ("couplers", only(|t| t.imperfect_couplers = true)),
        ("multiphoton", only(|t| t.multiphoton = true)),
        ("distinguishability", only(|t| t.distinguishability = true)),
        ("detectors", only(|t| t.detector_imbalance = true)),
        ("all_but_detectors", NoiseToggles::WITHOUT_DETECTORS),
        ("all", NoiseToggles::ALL),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub toggles: NoiseToggles,
    pub fidelity: f64,
    pub purity: f64,
}

/// Tomography and MLE of the state produced by `model`.
pub fn reconstruct(
    model: &NoiseModel,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(TomographySet, DensityMatrix), CliError> {
    let sim = model.simulator()?;
    let ts = simulate_tomography(&sim, cfg.shots(), seed)?;
    let mle = mle_reconstruct(&ts, &mle_options(cfg))?;
    Ok((ts, mle.rho))
}

pub fn ablation(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let mut rows = Vec::new();
    for (i, (name, toggles)) in ablation_rows().into_iter().enumerate() {
        let mut model = cfg.noise;
        model.toggles = toggles;
        let (_, rho) = reconstruct(&model, cfg, child_seed(cfg.seed, i as u64))?;
        let (fidelity, purity) = fidelity_and_purity(&rho, cfg.noise.theta)?;
        log::info!("ablation row {name}: F = {fidelity:.4}, P = {purity:.4}");
        rows.push(AblationRow {
            name: name.to_string(),
            toggles,
            fidelity,
            purity,
        });
    }
    let mut csv = String::from("row,multiphoton,distinguishability,imperfect_couplers,detector_imbalance,fidelity,purity\n");
    for r in &rows {
        let t = r.toggles;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.6},{:.6}",
            r.name,
            t.multiphoton,
            t.distinguishability,
            t.imperfect_couplers,
            t.detector_imbalance,
            r.fidelity,
            r.purity
        );
    }
    let mut out = Artifacts::new("ablation", &rows).file("ablation.csv", csv);
    for r in &rows {
        out = out.line(format!(
            "{:<20} F = {:.3}  P = {:.3}",
            r.name, r.fidelity, r.purity
        ));
    }
    Ok(out)
}

pub fn qss(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let sim = cfg.noise.simulator()?;
    let run = run_qss(&sim, cfg.qss.rounds, cfg.seed)?;
    let limit = expected_qber(&sim)?;
    let r: QssReport = run.report;
    Ok(
        Artifacts::new("qss", json!({ "report": r, "qber_limit": limit }))
            .file("qss_transcript.csv", transcript_csv(&run.transcript))
            .line(format!(
                "raw {} -> sifted {} ({:.1}%)",
                r.raw_length,
                r.sifted_length,
                100.0 * r.sift_rate
            ))
            .line(format!(
                "QBER {:.2}% (infinite-key {:.2}%), {}",
                100.0 * r.qber,
                100.0 * limit,
                if r.secure { "secure" } else { "insecure" }
            )),
    )
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrateResult {
    pub target: MziPhases,
    pub currents_ma: Vec<f64>,
    pub powers_mw: Vec<f64>,
    pub total_power_mw: f64,
    pub max_phase_error: f64,
}

pub fn calibrate(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let cal = cfg.heater_calibration()?;
    let target = MziPhases {
        alpha: cfg.calibrate.alpha,
        phi: cfg.calibrate.phi,
    };
    let currents = heater_solve(&cal, &target)?;
    let achieved = heater_forward(&cal, &currents)?;
    let max_phase_error = achieved
        .alpha
        .iter()
        .zip(&target.alpha)
        .chain(achieved.phi.iter().zip(&target.phi))
        .map(|(a, t)| wrap(a - t).abs())
        .fold(0.0, f64::max);
    let powers_mw: Vec<f64> = currents
        .iter()
        .zip(&cal.resistances)
        .map(|(i, r)| 1e3 * r * i * i)
        .collect();
    let res = CalibrateResult {
        target,
        currents_ma: currents.iter().map(|i| 1e3 * i).collect(),
        total_power_mw: powers_mw.iter().sum(),
        powers_mw,
        max_phase_error,
    };
    let mut out = Artifacts::new("calibrate", &res);
    for (k, i) in res.currents_ma.iter().enumerate() {
        if *i > 0.0 {
            out = out.line(format!("R{:<2} {:8.3} mA", k + 1, i));
        }
    }
    Ok(out.line(format!(
        "total {:.2} mW, max phase error {:.2e} rad",
        res.total_power_mw, res.max_phase_error
    )))
}

pub fn rate(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let budget: LossBudget = cfg.rate;
    let rate = coincidence_rate(&budget)?;
    Ok(Artifacts::new(
        "rate",
        json!({ "rate_hz": rate, "budget": budget, "note": RATE_DISCREPANCY_NOTE }),
    )
    .line(format!("four-fold rate {rate:.2} Hz"))
    .line(format!("note: {RATE_DISCREPANCY_NOTE}")))
}
