//! Per-collision thermodynamics: energy changes, heat, drive and switching
//! work, entropy production and its decomposition, and two-bath steady states.

use thiserror::Error;

use crate::collision::{CollisionError, CollisionModelSpec, StepRecord, Variant};
use crate::linalg::{self, cr, kron, LinalgError, Mat};
use crate::states::{self, mean_occupation, DensityMatrix, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("joint state not retained")]
    JointNotRetained,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, ThermoError>;

pub const FIRST_LAW_TOL: f64 = 1e-10;
pub const SIGMA_TOL: f64 = 1e-12;
pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// Operators needed to book-keep collision `n`.
#[derive(Debug, Clone, Copy)]
pub struct StepOperators<'a> {
    /// `Ĥ_S^{(n−1)}`.
    pub h_s_prev: &'a Mat,
    /// `Ĥ_S^{(n)}`, the system Hamiltonian during collision `n`.
    pub h_s: &'a Mat,
    /// Free Hamiltonian of the ancilla register.
    pub h_n: &'a Mat,
    /// Per-bath free Hamiltonians, for multi-bath registers. Empty for one bath.
    pub bath_hamiltonians: &'a [Mat],
    pub v: &'a Mat,
    pub v_next: &'a Mat,
    pub eta_next: &'a Mat,
}

/// Entropy bookkeeping of one collision (nats). `None` marks an infinite relative entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyProduction {
    pub sigma: Option<f64>,
    pub mutual_information: f64,
    pub ancilla_relative_entropy: Option<f64>,
    pub d_s_s: f64,
    pub d_s_n: f64,
}

impl EntropyProduction {
    /// `Σ − I_Sn − S(η'‖η)` when both relative entropies are finite.
    pub fn decomposition_residual(&self) -> Option<f64> {
        Some(self.sigma? - self.mutual_information - self.ancilla_relative_entropy?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub n: usize,
    pub d_e_s: f64,
    pub d_ep_s: f64,
    pub d_q_total: f64,
    pub d_q_bath: Vec<f64>,
    pub d_w_d: f64,
    pub d_w_sw: f64,
    pub entropy: Option<EntropyProduction>,
    pub residual: f64,
}

impl LedgerRow {
    pub fn work(&self) -> f64 {
        self.d_w_d + self.d_w_sw
    }

    pub const CSV_HEADER: [&'static str; 12] =
        ["n", "dE_S", "dEp_S", "dQ_total", "dQ_bath", "dW_d", "dW_sw", "Sigma", "I_Sn", "Srel_anc", "dS_S", "res1"];

    /// Column names, with `dQ_bath` expanded to `dQ_bath1, dQ_bath2, ...`.
    pub fn csv_columns(n_baths: usize) -> Vec<String> {
        let mut out = Vec::new();
        for h in Self::CSV_HEADER {
            if h == "dQ_bath" {
                out.extend((1..=n_baths).map(|k| format!("dQ_bath{k}")));
            } else {
                out.push(h.to_string());
            }
        }
        out
    }
}

fn tr_re(op: &Mat, rho: &Mat) -> f64 {
    linalg::expect(op, rho).re
}

/// `ΔE_S`, `ΔE'_S`, heat and work for one recorded collision.
pub fn step_energetics(n: usize, record: &StepRecord, ops: &StepOperators<'_>) -> Result<LedgerRow> {
    let joint = record.joint.as_ref().ok_or(ThermoError::JointNotRetained)?;
    let rho_prev = record.rho_prev.matrix();
    let rho = record.rho.matrix();
    let eta = record.eta_in.matrix();
    let eta_out = record.eta_out.matrix();
    let d_h = ops.h_s - ops.h_s_prev;
    let d_w_d = tr_re(&d_h, rho_prev);
    let d_e_s = d_w_d + tr_re(ops.h_s, &(rho - rho_prev));
    let d_q_total = -tr_re(ops.h_n, &(eta_out - eta));
    let d_q_bath = if ops.bath_hamiltonians.is_empty() {
        vec![d_q_total]
    } else {
        let dims = record.eta_in.space().dims().to_vec();
        if dims.len() != ops.bath_hamiltonians.len() {
            return Err(ThermoError::DimensionMismatch(format!(
                "{} bath Hamiltonians for {} baths",
                ops.bath_hamiltonians.len(),
                dims.len()
            )));
        }
        let mut out = Vec::with_capacity(dims.len());
        for (k, h) in ops.bath_hamiltonians.iter().enumerate() {
            let before = linalg::partial_trace_idx(eta, &dims, &[k])?;
            let after = linalg::partial_trace_idx(eta_out, &dims, &[k])?;
            out.push(-tr_re(h, &(after - before)));
        }
        out
    };
    let next_product = kron(rho, ops.eta_next)?;
    let prev_product = kron(rho_prev, eta)?;
    let d_w_sw = tr_re(ops.v_next, &next_product) - tr_re(ops.v, joint.matrix());
    let d_ep_s = tr_re(ops.v_next, &next_product) - tr_re(ops.v, &prev_product);
    let mut row = LedgerRow { n, d_e_s, d_ep_s, d_q_total, d_q_bath, d_w_d, d_w_sw, entropy: None, residual: 0.0 };
    row.residual = first_law_residual(&row);
    Ok(row)
}

/// `ΔE_S + ΔE'_S − δQ − δW_d − δW_sw`.
pub fn first_law_residual(row: &LedgerRow) -> f64 {
    row.d_e_s + row.d_ep_s - row.d_q_total - row.d_w_d - row.d_w_sw
}

/// `Σ = S(ϱ_Sn ‖ ρ_n ⊗ η_n)` and its pieces.
pub fn entropy_production(rho_prev: &Mat, eta: &Mat, joint: &Mat) -> Result<EntropyProduction> {
    let (ds, da) = (rho_prev.nrows(), eta.nrows());
    if joint.nrows() != ds * da {
        return Err(ThermoError::DimensionMismatch(format!("joint {} ≠ {ds}·{da}", joint.nrows())));
    }
    let rho = linalg::partial_trace_idx(joint, &[ds, da], &[0])?;
    let eta_out = linalg::partial_trace_idx(joint, &[ds, da], &[1])?;
    let s_joint = states::entropy(joint)?;
    let (s_rho, s_rho_prev) = (states::entropy(&rho)?, states::entropy(rho_prev)?);
    let (s_eta_out, s_eta) = (states::entropy(&eta_out)?, states::entropy(eta)?);
    let finite = |r: std::result::Result<f64, StateError>| match r {
        Ok(v) => Ok(Some(v)),
        Err(StateError::RelativeEntropyInfinite) => Ok(None),
        Err(e) => Err(ThermoError::from(e)),
    };
    let sigma = finite(states::relative_entropy(joint, &kron(&rho, eta)?))?;
    let ancilla_relative_entropy = finite(states::relative_entropy(&eta_out, eta))?;
    Ok(EntropyProduction {
        sigma,
        mutual_information: s_rho + s_eta_out - s_joint,
        ancilla_relative_entropy,
        d_s_s: s_rho - s_rho_prev,
        d_s_n: s_eta_out - s_eta,
    })
}

/// Energetics plus entropy production for one recorded collision.
pub fn ledger_row(n: usize, record: &StepRecord, ops: &StepOperators<'_>) -> Result<LedgerRow> {
    let mut row = step_energetics(n, record, ops)?;
    let joint = record.joint.as_ref().ok_or(ThermoError::JointNotRetained)?;
    row.entropy = Some(entropy_production(record.rho_prev.matrix(), record.eta_in.matrix(), joint.matrix())?);
    Ok(row)
}

/// Ledger for a run of a basic or multi-bath model, using `Ĥ_S^{(0)} = spec.h_s.at(0)`.
pub fn ledger(spec: &CollisionModelSpec, records: &[StepRecord], bath_hamiltonians: &[Mat], with_entropy: bool) -> Result<Vec<LedgerRow>> {
    if matches!(spec.variant, Variant::Cascaded { .. }) {
        return Err(ThermoError::Unsupported("cascaded collisions have no single coupling per step".into()));
    }
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let n = rec.index;
        let (h_s_prev, h_s, h_n) = (spec.h_s.at(n - 1), spec.h_s.at(n), spec.h_anc.at(n));
        let (v, v_next) = (spec.coupling.at(n), spec.coupling.at(n + 1));
        let eta_next = spec.ancilla.at(n + 1);
        let ops = StepOperators {
            h_s_prev: &h_s_prev,
            h_s: &h_s,
            h_n: &h_n,
            bath_hamiltonians,
            v: &v,
            v_next: &v_next,
            eta_next: eta_next.matrix(),
        };
        out.push(if with_entropy { ledger_row(n, rec, &ops)? } else { step_energetics(n, rec, &ops)? });
    }
    Ok(out)
}

/// Second-law and Landauer margins of a thermal-bath row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondLawMargins {
    /// `ΔS_S − βδQ`.
    pub second_law: f64,
    /// `βδQ̃ − ΔS̃` with `Q̃ = −Q`, `S̃ = −S`.
    pub landauer: f64,
}

pub fn second_law_and_landauer(row: &LedgerRow, beta: f64) -> Result<SecondLawMargins> {
    let e = row.entropy.ok_or(ThermoError::JointNotRetained)?;
    let q_tilde = -row.d_q_total;
    let s_tilde = -e.d_s_s;
    Ok(SecondLawMargins { second_law: e.d_s_s - beta * row.d_q_total, landauer: beta * q_tilde - s_tilde })
}

/// Landauer margin rate `βQ̃̇ − S̃̇` of a qubit relaxing with rates `γ(n̄+1)`, `γn̄`
/// at excited population `p` and zero coherence.
pub fn landauer_rate(gamma: f64, beta: f64, omega0: f64, p: f64) -> f64 {
    let nbar = mean_occupation(beta, omega0);
    let bw = beta * omega0;
    gamma * nbar * (bw + (p / (1.0 - p)).ln()) * ((1.0 + bw.exp()) * p - 1.0)
}

/// Detuned-qubit switching-work rate `δ[γ₊(1−p) − γ₋p]`.
pub fn switching_work_rate(delta: f64, gamma_plus: f64, gamma_minus: f64, p: f64) -> f64 {
    delta * (gamma_plus * (1.0 - p) - gamma_minus * p)
}

/// Emission and absorption rates `(γ₋, γ₊) = (γ(n̄+1), γn̄)`.
pub fn thermal_rates(gamma: f64, beta: f64, omega0: f64) -> (f64, f64) {
    let n = mean_occupation(beta, omega0);
    (gamma * (n + 1.0), gamma * n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBathSteady {
    pub beta_eff: f64,
    /// Steady heat current out of bath 1.
    pub current: f64,
    pub excited_population: f64,
}

/// Steady state of a qubit between two oscillator baths at frequency `ω₀`.
pub fn two_bath_steady(gamma1: f64, gamma2: f64, beta1: f64, beta2: f64, omega0: f64) -> TwoBathSteady {
    let (m1, p1) = thermal_rates(gamma1, beta1, omega0);
    let (m2, p2) = thermal_rates(gamma2, beta2, omega0);
    let (gm, gp) = (m1 + m2, p1 + p2);
    let (n1, n2) = (mean_occupation(beta1, omega0), mean_occupation(beta2, omega0));
    let current = omega0 * gamma1 * gamma2 * (n1 - n2) / (gamma1 + gamma2 + 2.0 * (gamma1 * n1 + gamma2 * n2));
    TwoBathSteady { beta_eff: (gm / gp).ln() / omega0, current, excited_population: gp / (gp + gm) }
}

/// Expanded closed form of `β_eff` in terms of the bath temperatures.
pub fn beta_eff_expanded(gamma1: f64, gamma2: f64, beta1: f64, beta2: f64, omega0: f64) -> f64 {
    let (e1, e2) = ((beta1 * omega0).exp(), (beta2 * omega0).exp());
    let num = (gamma1 + gamma2) * ((beta1 + beta2) * omega0).exp() - gamma1 * e1 - gamma2 * e2;
    let den = gamma2 * (e1 - 1.0) + gamma1 * (e2 - 1.0);
    (num / den).ln() / omega0
}

/// Couples every system transition to every ancilla transition of the same
/// Bohr frequency: `V = g Σ (A†B + AB†)`.
pub fn energy_conserving_coupling(h_s: &Mat, h_n: &Mat, g: f64, tol: f64) -> Result<Mat> {
    let (es, us) = linalg::eigh(h_s)?;
    let (en, un) = linalg::eigh(h_n)?;
    let (ds, dn) = (es.len(), en.len());
    let mut v = Mat::zeros(ds * dn, ds * dn);
    for i in 0..ds {
        for j in 0..ds {
            let w = es[i] - es[j];
            if w <= tol {
                continue;
            }
            // A = |j⟩⟨i| lowers S by w
            let a = linalg::outer(&us.column(j).into_owned(), &us.column(i).into_owned());
            for k in 0..dn {
                for l in 0..dn {
                    if ((en[k] - en[l]) - w).abs() > tol {
                        continue;
                    }
                    let b = linalg::outer(&un.column(l).into_owned(), &un.column(k).into_owned());
                    let term = kron(&a.adjoint(), &b)? + kron(&a, &b.adjoint())?;
                    v += term * cr(g);
                }
            }
        }
    }
    Ok(v)
}

/// `ΔE_S − δQ` per step; zero for energy-conserving, undriven collisions.
pub fn energy_balance(row: &LedgerRow) -> f64 {
    row.d_e_s - row.d_q_total
}

/// Excited population of a qubit state in the `{|1⟩, |0⟩}` ordering.
pub fn excited_population(rho: &DensityMatrix) -> f64 {
    rho.matrix()[(linalg::ops::EXCITED, linalg::ops::EXCITED)].re
}
