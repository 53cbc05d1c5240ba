//! Scenario registry: parameters, output tables and engines of every scenario.
//!
//! Rows are sampled at steps `0, stride, 2·stride, ...` unless noted.

use std::error::Error;

use collide::collision::{
    self, all_qubit_coupling, apply_kraus, collide, exchange_coupling, kraus_operators, kraus_superop,
    multibath_operators, product_ancilla, steady_by_squaring, CollisionModelSpec, Variant,
};
use collide::linalg::{self, cr, ops, Mat};
use collide::master_eq::{generator_from_moments, integrate, spontaneous_emission_moments, MAX_STEP_FRACTION};
use collide::nonmarkov::{composite_recurrence, cossin_amplitude, CompositeSpec};
use collide::states::{oscillator_hamiltonian, qubit_hamiltonian, thermal_oscillator, DensityMatrix, TAIL_MASS_TOL};
use collide::thermo::{
    self, landauer_rate, second_law_and_landauer, step_energetics, two_bath_steady, LedgerRow, StepOperators, DECOMPOSITION_TOL,
    FIRST_LAW_TOL, SIGMA_TOL,
};
use collide::trajectories::{ensemble_average, run_ensemble, simulate_trajectory, MeasurementBasis};

use crate::config::{Family, Param, Range, ScenarioConfig, Violation};

pub type RunError = Box<dyn Error + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableDef {
    /// File name of the CSV.
    pub file: &'static str,
    pub columns: &'static [&'static str],
}

pub struct ScenarioDef {
    pub name: &'static str,
    pub family: Family,
    pub summary: &'static str,
    pub model: &'static [Param],
    /// Accepted `[numerics]` keys with defaults; `None` means derived when absent.
    pub numerics: &'static [(&'static str, Option<f64>)],
    pub default_stride: usize,
    /// Individual trajectories written by default (trajectory scenarios only).
    pub default_trajectories: Option<usize>,
    pub tables: &'static [TableDef],
    /// Cross-field checks run after per-field validation.
    pub validate: fn(&ScenarioConfig) -> Vec<Violation>,
    pub run: fn(&ScenarioConfig, &RunContext) -> Result<RunOutput, RunError>,
}

impl std::fmt::Debug for ScenarioDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioDef").field("name", &self.name).field("family", &self.family).finish()
    }
}

impl ScenarioDef {
    pub fn has_column(&self, name: &str) -> bool {
        self.tables.iter().any(|t| t.columns.contains(&name))
    }

    pub fn all_columns(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for c in self.tables.iter().flat_map(|t| t.columns.iter()) {
            if !out.contains(c) {
                out.push(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<Option<f64>> for Cell {
    /// `None` marks an infinite quantity.
    fn from(x: Option<f64>) -> Self {
        Cell::Real(x.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub def: TableDef,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(def: TableDef) -> Self {
        Self { def, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.def.columns.len(), "row width of {}", self.def.file);
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn below(name: &str, value: f64, tol: f64, what: &str) -> Self {
        Check { name: name.into(), passed: value <= tol, detail: format!("{what} = {value:.3e} (tolerance {tol:.1e})") }
    }

    fn above(name: &str, value: f64, floor: f64, what: &str) -> Self {
        Check { name: name.into(), passed: value >= floor, detail: format!("{what} = {value:.3e} (floor {floor:.1e})") }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

pub fn find(name: &str) -> Option<&'static ScenarioDef> {
    SCENARIOS.iter().find(|s| s.name == name)
}

fn sampled(n: usize, stride: usize) -> bool {
    n.is_multiple_of(stride)
}

fn no_cross_checks(_: &ScenarioConfig) -> Vec<Violation> {
    Vec::new()
}

fn vacuum() -> Result<DensityMatrix, RunError> {
    Ok(DensityMatrix::single(linalg::projector(&ops::ground()), "A")?)
}

fn emission_spec(gamma: f64, dt: f64, g_z: f64) -> Result<CollisionModelSpec, RunError> {
    Ok(CollisionModelSpec::basic(
        Mat::zeros(2, 2),
        Mat::zeros(2, 2),
        all_qubit_coupling((gamma / dt).sqrt(), g_z),
        vacuum()?,
        dt,
    ))
}

fn excited_population(rho: &Mat) -> f64 {
    rho[(ops::EXCITED, ops::EXCITED)].re
}

fn plus_survival(rho: &Mat) -> f64 {
    let plus = ops::plus();
    plus.dotc(&(rho * &plus)).re
}

/// Smallest truncation whose top-level thermal weight `e^{−βω₀(d−1)}` is within the tail tolerance.
pub fn thermal_truncation(beta: f64, omega0: f64) -> usize {
    ((-TAIL_MASS_TOL.ln()) / (beta * omega0)).ceil() as usize + 1
}

fn truncation_violation(key: &str, d: usize, beta: f64, omega0: f64) -> Option<Violation> {
    let tail = (-beta * omega0 * (d as f64 - 1.0)).exp();
    (tail > TAIL_MASS_TOL).then(|| {
        Violation::new(
            format!("numerics.{key}"),
            format!(
                "{d} levels leave thermal weight {tail:.1e} > {TAIL_MASS_TOL:.0e} at βω₀ = {}; need at least {}",
                beta * omega0,
                thermal_truncation(beta, omega0)
            ),
        )
    })
}

// ---------------------------------------------------------------------------
// spontaneous_emission

const SE_MODEL: &[Param] = &[
    Param::new("gamma", Range::Positive, Some(1.0), "emission rate γ"),
    Param::new("p0", Range::Probability, Some(1.0), "initial excited population"),
];

const SE_TABLES: &[TableDef] =
    &[TableDef { file: "populations.csv", columns: &["t", "p", "p_exact", "n_collision", "p_collision"] }];

fn se_validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let product = cfg.numeric("dt") * cfg.model("gamma");
    if product > MAX_STEP_FRACTION {
        vec![Violation::new("numerics.dt", format!("dt·γ = {product} exceeds {MAX_STEP_FRACTION}; dt too coarse"))]
    } else {
        Vec::new()
    }
}

/// Master equation from vacuum-ancilla moments, integrated with RK4, beside the
/// stroboscopic collision populations at `n = round(t/Δt)`.
fn se_run(cfg: &ScenarioConfig, _: &RunContext) -> Result<RunOutput, RunError> {
    let (gamma, p0) = (cfg.model("gamma"), cfg.model("p0"));
    let dt_c = cfg.numeric("dt_collision");
    let gen = generator_from_moments(&spontaneous_emission_moments(gamma, dt_c)?, dt_c)?;
    let mut rho0 = Mat::zeros(2, 2);
    rho0[(ops::EXCITED, ops::EXCITED)] = cr(p0);
    rho0[(ops::GROUND, ops::GROUND)] = cr(1.0 - p0);
    let sol = integrate(&gen, &rho0, cfg.numeric("t_max"), cfg.numeric("dt"), cfg.stride)?;
    let spec = emission_spec(gamma, dt_c, 0.0)?;
    let ks = kraus_operators(&spec.unitary(1)?, spec.ancilla.at(1).matrix(), 2)?;

    let mut table = Table::new(SE_TABLES[0]);
    let (mut rho_c, mut n_c) = (rho0.clone(), 0usize);
    let mut worst: f64 = 0.0;
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let target = (t / dt_c).round() as usize;
        while n_c < target {
            rho_c = apply_kraus(&ks, &rho_c);
            n_c += 1;
        }
        let p = excited_population(rho);
        let exact = p0 * (-gamma * t).exp();
        worst = worst.max((p - exact).abs());
        table.push(vec![(*t).into(), p.into(), exact.into(), n_c.into(), excited_population(&rho_c).into()]);
    }
    let tol = cfg.numeric("tolerance");
    Ok(RunOutput { tables: vec![table], checks: vec![Check::below("p matches p0·e^{-γt}", worst, tol, "max |p − p_exact|")] })
}

// ---------------------------------------------------------------------------
// fig-CTL

const CTL_MODEL: &[Param] = &[
    Param::new("g", Range::Positive, Some(1.0), "exchange coupling g"),
    Param::new("g_z", Range::Finite, Some(0.0), "σz⊗σz coupling g_z"),
];

const CTL_TABLES: &[TableDef] = &[TableDef {
    file: "survival.csv",
    columns: &["n", "t", "survival", "survival_exact", "p", "c_re", "c_im"],
}];

/// All-qubit collisions with vacuum ancillas from `|+⟩`; the survival
/// probability is `½(1 + cosⁿ(gΔt) cos(2g_z nΔt))`.
fn ctl_run(cfg: &ScenarioConfig, _: &RunContext) -> Result<RunOutput, RunError> {
    let (g, g_z) = (cfg.model("g"), cfg.model("g_z"));
    let dt = cfg.numeric("dt_collision");
    let steps = cfg.count("steps");
    let spec = CollisionModelSpec::basic(Mat::zeros(2, 2), Mat::zeros(2, 2), all_qubit_coupling(g, g_z), vacuum()?, dt);
    let states = collision::run_states(&spec, &linalg::projector(&ops::plus()), steps)?;
    let co = (g * dt).cos();
    let mut table = Table::new(CTL_TABLES[0]);
    let mut worst: f64 = 0.0;
    for (n, rho) in states.iter().enumerate() {
        let survival = plus_survival(rho);
        let exact = 0.5 * (1.0 + co.powi(n as i32) * (2.0 * g_z * n as f64 * dt).cos());
        worst = worst.max((survival - exact).abs());
        if sampled(n, cfg.stride) {
            let c = rho[(ops::EXCITED, ops::GROUND)];
            table.push(vec![
                n.into(),
                (n as f64 * dt).into(),
                survival.into(),
                exact.into(),
                excited_population(rho).into(),
                c.re.into(),
                c.im.into(),
            ]);
        }
    }
    let tol = cfg.numeric("tolerance");
    Ok(RunOutput {
        tables: vec![table],
        checks: vec![Check::below("survival matches closed form", worst, tol, "max |survival − exact| over all n")],
    })
}

// ---------------------------------------------------------------------------
// fig-qt1

const QT_MODEL: &[Param] = &[Param::new("gamma", Range::Positive, Some(1.0), "emission rate γ; g = √(γ/Δt)")];

const QT_TABLES: &[TableDef] = &[
    TableDef {
        file: "trajectories.csv",
        columns: &["traj", "n", "t", "outcome", "survival", "psi_e_re", "psi_e_im", "psi_g_re", "psi_g_im"],
    },
    TableDef {
        file: "ensemble.csv",
        columns: &["n", "t", "mean_survival", "std_error", "exact_survival", "trace_distance"],
    },
];

/// Ensembles smaller than this are written but not checked statistically.
pub const MIN_CHECKED_ENSEMBLE: usize = 100;

fn qt_validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let x = cfg.model("gamma") * cfg.numeric("dt_collision");
    if x > 1.0 {
        vec![Violation::new("numerics.dt_collision", format!("γΔt = {x} > 1 leaves the weak-collision regime"))]
    } else {
        Vec::new()
    }
}

/// Photodetection trajectories of spontaneous emission from `|+⟩`: ancillas
/// measured in `{|0⟩, |1⟩}` after every collision.
fn qt_run(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<RunOutput, RunError> {
    let gamma = cfg.model("gamma");
    let dt = cfg.numeric("dt_collision");
    let (steps, n_traj, stride) = (cfg.count("steps"), cfg.count("n_traj"), cfg.stride);
    let spec = emission_spec(gamma, dt, 0.0)?;
    let basis = MeasurementBasis::qubit_jump();
    let plus = ops::plus();
    let records =
        run_ensemble(n_traj, |i| simulate_trajectory(&spec, &plus, &basis, ctx.seed, i, steps).map(|r| r.subsample(stride)))?;

    let mut single = Table::new(QT_TABLES[0]);
    for rec in records.iter().take(cfg.trajectories.unwrap_or(0)) {
        for (k, psi) in rec.states.iter().enumerate() {
            let n = k * stride;
            let outcome = if n == 0 { Cell::Empty } else { rec.outcomes[n - 1].into() };
            let (e, g) = (psi[ops::EXCITED], psi[ops::GROUND]);
            single.push(vec![
                (rec.index as usize).into(),
                n.into(),
                (n as f64 * dt).into(),
                outcome,
                plus.dotc(psi).norm_sqr().into(),
                e.re.into(),
                e.im.into(),
                g.re.into(),
                g.im.into(),
            ]);
        }
    }

    let avg = ensemble_average(&records)?;
    let exact = collision::run_states(&spec, &linalg::projector(&plus), steps)?;
    let overlaps: Vec<Vec<f64>> = records.iter().map(|r| r.overlaps(&plus)).collect();
    let count = records.len() as f64;
    let mut ensemble = Table::new(QT_TABLES[1]);
    let mut worst_z: f64 = 0.0;
    for (k, mean) in avg.mean.iter().enumerate() {
        let n = k * stride;
        let m = plus_survival(mean);
        let var = overlaps.iter().map(|o| (o[k] - m).powi(2)).sum::<f64>() / (count - 1.0);
        let se = (var / count).sqrt();
        let ex = plus_survival(&exact[n]);
        let td = linalg::trace_distance(mean, &exact[n])?;
        let dev = (m - ex).abs();
        if dev > 1e-12 {
            worst_z = worst_z.max(if se > 0.0 { dev / se } else { f64::INFINITY });
        }
        ensemble.push(vec![n.into(), (n as f64 * dt).into(), m.into(), se.into(), ex.into(), td.into()]);
    }

    let tol = cfg.numeric("tolerance");
    let final_dev = overlaps.iter().map(|o| (o.last().unwrap() - 0.5).abs()).fold(0.0, f64::max);
    let mut checks = vec![Check::below(
        "trajectories end at survival 1/2",
        final_dev,
        tol,
        "max |survival(final) − 1/2| over trajectories",
    )];
    if records.len() >= MIN_CHECKED_ENSEMBLE {
        checks.push(Check::below("ensemble mean matches collision map", worst_z, 5.0, "max |mean − exact| / std_error"));
    }
    Ok(RunOutput { tables: vec![single, ensemble], checks })
}

// ---------------------------------------------------------------------------
// fig-comp2

const COMP_MODEL: &[Param] = &[
    Param::new("gamma", Range::Positive, Some(1.0), "memory–bath rate γ; g = √(γ/Δt)"),
    Param::new("G", Range::Positive, Some(1.0), "system–memory coupling G"),
];

const COMP_TABLES: &[TableDef] = &[TableDef {
    file: "populations.csv",
    columns: &["n", "t", "alpha_re", "alpha_im", "p_s", "beta_re", "beta_im", "p_m", "p_s_continuum"],
}];

/// Continuum comparison is checked only in the small-step regime.
pub const CONTINUUM_GAMMA_DT: f64 = 1e-3;

fn comp_validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    if cfg.numeric("t_max") < cfg.numeric("dt_collision") {
        vec![Violation::new("numerics.t_max", "shorter than one collision")]
    } else {
        Vec::new()
    }
}

fn interior_maxima(xs: &[f64]) -> usize {
    xs.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

/// Composite model: system, memory qubit, bath ancillas. Revivals of the
/// system population are expected when `4G² > γ²/4`.
fn comp_run(cfg: &ScenarioConfig, _: &RunContext) -> Result<RunOutput, RunError> {
    let (gamma, big_g) = (cfg.model("gamma"), cfg.model("G"));
    let dt = cfg.numeric("dt_collision");
    let steps = (cfg.numeric("t_max") / dt).round() as usize;
    let spec = CompositeSpec::new(big_g, (gamma / dt).sqrt(), dt)?;
    let rec = composite_recurrence(&spec, steps)?;
    let mut table = Table::new(COMP_TABLES[0]);
    let mut continuum_dev: f64 = 0.0;
    for (n, (a, b)) in rec.iter().enumerate() {
        let t = n as f64 * dt;
        let cont = cossin_amplitude(gamma, big_g, t);
        continuum_dev = continuum_dev.max((a - cont).norm());
        if sampled(n, cfg.stride) {
            table.push(vec![
                n.into(),
                t.into(),
                a.re.into(),
                a.im.into(),
                a.norm_sqr().into(),
                b.re.into(),
                b.im.into(),
                b.norm_sqr().into(),
                cont.norm_sqr().into(),
            ]);
        }
    }
    let p_s: Vec<f64> = rec.iter().map(|(a, _)| a.norm_sqr()).collect();
    let p_m: Vec<f64> = rec.iter().map(|(_, b)| b.norm_sqr()).collect();
    let (ms, mm) = (interior_maxima(&p_s), interior_maxima(&p_m));
    let underdamped = 4.0 * big_g * big_g > gamma * gamma / 4.0;
    let shape = if underdamped {
        Check {
            name: "system population revives".into(),
            passed: ms >= 1,
            detail: format!("p_S has {ms} interior maxima (expected >= 1)"),
        }
    } else {
        Check {
            name: "monotonic system decay".into(),
            passed: ms == 0 && mm == 1,
            detail: format!("p_S has {ms} interior maxima (expected 0), p_M has {mm} (expected 1)"),
        }
    };
    let mut checks = vec![shape];
    if gamma * dt <= CONTINUUM_GAMMA_DT {
        checks.push(Check::below("amplitude matches continuum", continuum_dev, cfg.numeric("tolerance"), "max |α_n − α(t)|"));
    }
    Ok(RunOutput { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// two_bath_steady

const TB_MODEL: &[Param] = &[
    Param::new("omega0", Range::Positive, Some(1.0), "qubit and bath frequency ω₀"),
    Param::new("gamma1", Range::Positive, Some(1.0), "coupling rate to bath 1"),
    Param::new("gamma2", Range::Positive, Some(1.0), "coupling rate to bath 2"),
    Param::new("beta1", Range::Positive, Some(1.0), "inverse temperature of bath 1"),
    Param::new("beta2", Range::Positive, Some(2.0), "inverse temperature of bath 2"),
];

const LEDGER2: &[&str] = &[
    "n", "dE_S", "dEp_S", "dQ_total", "dQ_bath1", "dQ_bath2", "dW_d", "dW_sw", "Sigma", "I_Sn", "Srel_anc", "dS_S", "res1",
];

const LEDGER1: &[&str] =
    &["n", "dE_S", "dEp_S", "dQ_total", "dQ_bath1", "dW_d", "dW_sw", "Sigma", "I_Sn", "Srel_anc", "dS_S", "res1"];

const TB_TABLES: &[TableDef] = &[
    TableDef { file: "ledger.csv", columns: LEDGER2 },
    TableDef {
        file: "currents.csv",
        columns: &["n", "t", "p", "current1", "current2", "beta_eff", "current_theory", "beta_eff_theory"],
    },
];

/// Joint system–baths dimension above which the two-bath scenario is refused.
pub const TWO_BATH_DIM_CAP: usize = 1024;

fn tb_truncations(cfg: &ScenarioConfig) -> (usize, usize) {
    let omega0 = cfg.model("omega0");
    let d = |key: &str, beta: f64| cfg.numeric_opt(key).map_or_else(|| thermal_truncation(beta, omega0), |x| x as usize);
    (d("truncation1", cfg.model("beta1")), d("truncation2", cfg.model("beta2")))
}

fn tb_validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let omega0 = cfg.model("omega0");
    let (d1, d2) = tb_truncations(cfg);
    let mut out: Vec<Violation> = [("truncation1", d1, cfg.model("beta1")), ("truncation2", d2, cfg.model("beta2"))]
        .into_iter()
        .filter_map(|(k, d, b)| truncation_violation(k, d, b, omega0))
        .collect();
    let joint = 2 * d1 * d2;
    if joint > TWO_BATH_DIM_CAP {
        out.push(Violation::new(
            "model.beta1",
            format!("baths of {d1} and {d2} levels give joint dimension {joint} > {TWO_BATH_DIM_CAP}; use colder baths"),
        ));
    }
    out
}

/// A qubit colliding with one oscillator of each bath per step. Rows sample
/// the relaxation from the excited state; the last row of `currents.csv` and
/// `ledger.csv` is the fixed point found by superoperator squaring.
fn tb_run(cfg: &ScenarioConfig, _: &RunContext) -> Result<RunOutput, RunError> {
    let omega0 = cfg.model("omega0");
    let (gamma1, gamma2, beta1, beta2) = (cfg.model("gamma1"), cfg.model("gamma2"), cfg.model("beta1"), cfg.model("beta2"));
    let dt = cfg.numeric("dt_collision");
    let (d1, d2) = tb_truncations(cfg);
    let h1 = oscillator_hamiltonian(omega0, d1);
    let h2 = oscillator_hamiltonian(omega0, d2);
    let v1 = exchange_coupling(&ops::sigma_minus(), &ops::annihilation(d1), (gamma1 / dt).sqrt());
    let v2 = exchange_coupling(&ops::sigma_minus(), &ops::annihilation(d2), (gamma2 / dt).sqrt());
    let (h_baths, v) = multibath_operators(2, &[(h1.clone(), v1), (h2.clone(), v2)])?;
    let eta = product_ancilla(&[&thermal_oscillator(beta1, omega0, d1)?, &thermal_oscillator(beta2, omega0, d2)?])?;
    let h_s = qubit_hamiltonian(omega0);
    let spec = CollisionModelSpec {
        variant: Variant::MultiBath { bath_dims: vec![d1, d2] },
        ..CollisionModelSpec::basic(h_s.clone(), h_baths.clone(), v.clone(), eta.clone(), dt)
    };
    let u = spec.unitary(1)?;
    let s = kraus_superop(&kraus_operators(&u, eta.matrix(), 2)?);
    let bath_hs = [h1, h2];
    let ops_ = StepOperators {
        h_s_prev: &h_s,
        h_s: &h_s,
        h_n: &h_baths,
        bath_hamiltonians: &bath_hs,
        v: &v,
        v_next: &v,
        eta_next: eta.matrix(),
    };
    let theory = two_bath_steady(gamma1, gamma2, beta1, beta2, omega0);

    let mut ledger = Table::new(TB_TABLES[0]);
    let mut currents = Table::new(TB_TABLES[1]);
    let mut worst_residual: f64 = 0.0;
    let mut emit = |n: Option<usize>, t: f64, rho: &Mat| -> Result<(f64, f64), RunError> {
        let rho = normalized(rho);
        let rec = collide(&DensityMatrix::single(rho.clone(), "S")?, &eta, &u)?;
        let row = step_energetics(n.map_or(0, |n| n + 1), &rec, &ops_)?;
        worst_residual = worst_residual.max(row.residual.abs());
        let p = excited_population(&rho);
        let beta_eff = ((1.0 - p) / p).ln() / omega0;
        let current = row.d_q_bath[0] / dt;
        let n_cell = n.map_or(Cell::Empty, Cell::from);
        let mut cells = ledger_cells(&row);
        cells[0] = n.map_or(Cell::Empty, |n| Cell::from(n + 1));
        ledger.push(cells);
        currents.push(vec![
            n_cell,
            t.into(),
            p.into(),
            current.into(),
            (row.d_q_bath[1] / dt).into(),
            beta_eff.into(),
            theory.current.into(),
            theory.beta_eff.into(),
        ]);
        Ok((current, beta_eff))
    };

    let stride = cfg.stride;
    let s_stride = superop_power(&s, stride);
    let mut rho = linalg::projector(&ops::excited());
    for k in 0..cfg.count("samples") {
        if k > 0 {
            rho = normalized(&linalg::apply_superop(&s_stride, &rho));
        }
        emit(Some(k * stride), (k * stride) as f64 * dt, &rho)?;
    }
    let (rho_ss, squarings) =
        steady_by_squaring(&s, &linalg::projector(&ops::excited()), 1e-14, 64).ok_or("no fixed point within 2^64 collisions")?;
    let n_ss = (squarings < 63).then(|| 1usize << squarings);
    let (current, beta_eff) = emit(n_ss, 2f64.powi(squarings as i32) * dt, &rho_ss)?;

    let tol = cfg.numeric("tolerance");
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    Ok(RunOutput {
        tables: vec![ledger, currents],
        checks: vec![
            Check::below("steady heat current", rel(current, theory.current), tol, "relative deviation of current1"),
            Check::below("effective inverse temperature", rel(beta_eff, theory.beta_eff), tol, "relative deviation of β_eff"),
            Check::below("first law", worst_residual, FIRST_LAW_TOL, "max |res1|"),
        ],
    })
}

fn normalized(rho: &Mat) -> Mat {
    let h = (rho + rho.adjoint()) * cr(0.5);
    let tr = h.trace();
    h / tr
}

/// `S^k` by binary exponentiation.
fn superop_power(s: &Mat, mut k: usize) -> Mat {
    let mut base = s.clone();
    let mut acc = linalg::identity(s.nrows());
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    acc
}

fn ledger_cells(row: &LedgerRow) -> Vec<Cell> {
    let mut cells = vec![row.n.into(), row.d_e_s.into(), row.d_ep_s.into(), row.d_q_total.into()];
    cells.extend(row.d_q_bath.iter().map(|&q| Cell::from(q)));
    cells.push(row.d_w_d.into());
    cells.push(row.d_w_sw.into());
    match &row.entropy {
        Some(e) => {
            cells.push(e.sigma.into());
            cells.push(e.mutual_information.into());
            cells.push(e.ancilla_relative_entropy.into());
            cells.push(e.d_s_s.into());
        }
        None => cells.extend([Cell::Empty; 4]),
    }
    cells.push(row.residual.into());
    cells
}

// ---------------------------------------------------------------------------
// thermal_ledger

const TL_MODEL: &[Param] = &[
    Param::new("omega0", Range::Positive, Some(1.0), "qubit and oscillator frequency ω₀"),
    Param::new("gamma", Range::Positive, Some(1.0), "coupling rate γ; g = √(γ/Δt)"),
    Param::new("beta", Range::Positive, Some(std::f64::consts::LN_2), "bath inverse temperature β"),
    Param::new("p0", Range::Probability, Some(1.0), "initial excited population"),
];

const TL_TABLES: &[TableDef] = &[
    TableDef { file: "ledger.csv", columns: LEDGER1 },
    TableDef { file: "margins.csv", columns: &["n", "t", "p", "second_law", "landauer", "landauer_closed_form"] },
];

fn tl_truncation(cfg: &ScenarioConfig) -> usize {
    cfg.numeric_opt("truncation")
        .map_or_else(|| thermal_truncation(cfg.model("beta"), cfg.model("omega0")), |x| x as usize)
}

fn tl_validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    truncation_violation("truncation", tl_truncation(cfg), cfg.model("beta"), cfg.model("omega0")).into_iter().collect()
}

/// Thermal relaxation of a qubit through resonant exchange with thermal
/// oscillators; energy and entropy bookkeeping for every collision.
fn tl_run(cfg: &ScenarioConfig, _: &RunContext) -> Result<RunOutput, RunError> {
    let (omega0, gamma, beta, p0) = (cfg.model("omega0"), cfg.model("gamma"), cfg.model("beta"), cfg.model("p0"));
    let dt = cfg.numeric("dt_collision");
    let d = tl_truncation(cfg);
    let v = exchange_coupling(&ops::sigma_minus(), &ops::annihilation(d), (gamma / dt).sqrt());
    let spec = CollisionModelSpec::basic(
        qubit_hamiltonian(omega0),
        oscillator_hamiltonian(omega0, d),
        v,
        thermal_oscillator(beta, omega0, d)?,
        dt,
    );
    let mut rho0 = Mat::zeros(2, 2);
    rho0[(ops::EXCITED, ops::EXCITED)] = cr(p0);
    rho0[(ops::GROUND, ops::GROUND)] = cr(1.0 - p0);
    let records = collision::run(&spec, &DensityMatrix::single(rho0, "S")?, cfg.count("steps"))?;
    let rows = thermo::ledger(&spec, &records, &[], true)?;

    let mut ledger = Table::new(TL_TABLES[0]);
    let mut margins = Table::new(TL_TABLES[1]);
    let (mut residual, mut sigma_min, mut decomposition, mut second_min, mut landauer_min) =
        (0.0_f64, f64::INFINITY, 0.0_f64, f64::INFINITY, f64::INFINITY);
    for (row, rec) in rows.iter().zip(&records) {
        let e = row.entropy.expect("ledger computed with entropies");
        residual = residual.max(row.residual.abs());
        if let Some(sigma) = e.sigma {
            sigma_min = sigma_min.min(sigma);
        }
        if let Some(r) = e.decomposition_residual() {
            decomposition = decomposition.max(r.abs());
        }
        let m = second_law_and_landauer(row, beta)?;
        second_min = second_min.min(m.second_law);
        landauer_min = landauer_min.min(m.landauer);
        if sampled(row.n, cfg.stride) || row.n == 1 {
            ledger.push(ledger_cells(row));
            margins.push(vec![
                row.n.into(),
                (row.n as f64 * dt).into(),
                thermo::excited_population(&rec.rho).into(),
                m.second_law.into(),
                m.landauer.into(),
                (landauer_rate(gamma, beta, omega0, thermo::excited_population(&rec.rho_prev)) * dt).into(),
            ]);
        }
    }
    Ok(RunOutput {
        tables: vec![ledger, margins],
        checks: vec![
            Check::below("first law", residual, FIRST_LAW_TOL, "max |res1|"),
            Check::above("entropy production", sigma_min, -SIGMA_TOL, "min Σ"),
            Check::below("Σ = I_Sn + S(η'‖η)", decomposition, DECOMPOSITION_TOL, "max decomposition residual"),
            Check::above("second law", second_min, -SIGMA_TOL, "min ΔS_S − βδQ"),
            Check::above("Landauer bound", landauer_min, -SIGMA_TOL, "min Landauer margin"),
        ],
    })
}

// ---------------------------------------------------------------------------

pub static SCENARIOS: &[ScenarioDef] = &[
    ScenarioDef {
        name: "spontaneous_emission",
        family: Family::Simulate,
        summary: "qubit decay into vacuum ancillas: master equation and collision map",
        model: SE_MODEL,
        numerics: &[("dt_collision", Some(1e-3)), ("dt", Some(1e-3)), ("t_max", Some(5.0)), ("tolerance", Some(1e-6))],
        default_stride: 100,
        default_trajectories: None,
        tables: SE_TABLES,
        validate: se_validate,
        run: se_run,
    },
    ScenarioDef {
        name: "fig-CTL",
        family: Family::Simulate,
        summary: "survival of |+> under all-qubit collisions with vacuum ancillas",
        model: CTL_MODEL,
        numerics: &[("dt_collision", Some(0.1)), ("steps", Some(200.0)), ("tolerance", Some(1e-12))],
        default_stride: 1,
        default_trajectories: None,
        tables: CTL_TABLES,
        validate: no_cross_checks,
        run: ctl_run,
    },
    ScenarioDef {
        name: "fig-qt1",
        family: Family::Trajectories,
        summary: "photodetection trajectories of spontaneous emission from |+>",
        model: QT_MODEL,
        numerics: &[("dt_collision", Some(0.04)), ("steps", Some(400.0)), ("n_traj", Some(4.0)), ("tolerance", Some(1e-3))],
        default_stride: 1,
        default_trajectories: Some(4),
        tables: QT_TABLES,
        validate: qt_validate,
        run: qt_run,
    },
    ScenarioDef {
        name: "fig-comp2",
        family: Family::NonMarkov,
        summary: "composite collision model: system, memory qubit and bath ancillas",
        model: COMP_MODEL,
        numerics: &[("dt_collision", Some(0.1)), ("t_max", Some(20.0)), ("tolerance", Some(1e-2))],
        default_stride: 1,
        default_trajectories: None,
        tables: COMP_TABLES,
        validate: comp_validate,
        run: comp_run,
    },
    ScenarioDef {
        name: "two_bath_steady",
        family: Family::Thermo,
        summary: "qubit between two thermal baths: relaxation, steady heat current and effective temperature",
        model: TB_MODEL,
        numerics: &[
            ("dt_collision", Some(1e-5)),
            ("samples", Some(8.0)),
            ("truncation1", None),
            ("truncation2", None),
            ("tolerance", Some(1e-4)),
        ],
        default_stride: 20_000,
        default_trajectories: None,
        tables: TB_TABLES,
        validate: tb_validate,
        run: tb_run,
    },
    ScenarioDef {
        name: "thermal_ledger",
        family: Family::Thermo,
        summary: "energy and entropy ledger of a qubit thermalizing with oscillator ancillas",
        model: TL_MODEL,
        numerics: &[("dt_collision", Some(0.01)), ("steps", Some(300.0)), ("truncation", None)],
        default_stride: 10,
        default_trajectories: None,
        tables: TL_TABLES,
        validate: tl_validate,
        run: tl_run,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_truncation_meets_tail_tolerance() {
        for (beta, omega0) in [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (std::f64::consts::LN_2, 1.0)] {
            let d = thermal_truncation(beta, omega0);
            assert!(truncation_violation("t", d, beta, omega0).is_none());
            assert!(truncation_violation("t", d - 1, beta, omega0).is_some());
        }
    }

    #[test]
    fn ledger_tables_use_thermo_columns() {
        assert_eq!(LEDGER1, LedgerRow::csv_columns(1));
        assert_eq!(LEDGER2, LedgerRow::csv_columns(2));
    }

    #[test]
    fn superop_power_matches_repeated_products() {
        let s = Mat::from_fn(4, 4, |i, j| cr(((i * 4 + j) as f64).sin()));
        let mut expected = linalg::identity(4);
        for _ in 0..7 {
            expected = &expected * &s;
        }
        assert!(linalg::max_abs_diff(&superop_power(&s, 7), &expected) < 1e-9);
    }

    #[test]
    fn scenario_names_are_unique() {
        for (i, a) in SCENARIOS.iter().enumerate() {
            assert!(SCENARIOS[i + 1..].iter().all(|b| b.name != a.name));
        }
    }
}
