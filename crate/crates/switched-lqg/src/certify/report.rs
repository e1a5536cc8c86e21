//! Text serialization of certificates: `lqg-certificates v1`, the same
//! key-value/matrix-literal family as the model files, with every constant
//! under its analysis symbol. Output is deterministic (shortest round-trip
//! float formatting of deterministically computed values).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{AssumptionReport, DwellCertificate, EfficiencyCertificate, SafetyCertificate};

const HEADER: &str = "lqg-certificates v1";

/// Everything one `certify` run produced; absent layers were unavailable
/// (their preconditions failed).
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub assumptions: AssumptionReport,
    pub safety: Option<SafetyCertificate>,
    pub dwell: Option<DwellCertificate>,
    pub efficiency: Option<EfficiencyCertificate>,
}

fn scalar(out: &mut String, name: &str, v: f64) {
    writeln!(out, "scalar {name} {v}").unwrap();
}

fn boolean(out: &mut String, name: &str, v: bool) {
    writeln!(out, "bool {name} {v}").unwrap();
}

fn integer(out: &mut String, name: &str, v: usize) {
    writeln!(out, "int {name} {v}").unwrap();
}

fn matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

impl CertificateReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();

        writeln!(out, "section assumptions").unwrap();
        for (name, value) in self.assumptions.rows() {
            scalar(&mut out, name, value);
        }
        boolean(&mut out, "assumption1", self.assumptions.assumption1);
        boolean(&mut out, "assumption2", self.assumptions.assumption2);

        if let Some(s) = &self.safety {
            writeln!(out, "section safety").unwrap();
            scalar(&mut out, "M", s.m);
            scalar(&mut out, "rho0", s.rho0);
            scalar(&mut out, "input_block_norm", s.input_block_norm);
            scalar(&mut out, "noise_trace_term", s.noise_trace_term);
            scalar(&mut out, "mean_v0_bound", s.mean_v0_bound);
            scalar(&mut out, "cost_bound", s.cost_bound);
            matrix(&mut out, "P0", s.p0.matrix());
        }

        if let Some(d) = &self.dwell {
            writeln!(out, "section dwell").unwrap();
            scalar(&mut out, "rho", d.rho);
            integer(&mut out, "t_min", d.t_min);
            matrix(&mut out, "P", d.p.matrix());
        }

        if let Some(e) = &self.efficiency {
            writeln!(out, "section efficiency").unwrap();
            integer(&mut out, "N", e.n_total);
            scalar(&mut out, "M", e.m);
            integer(&mut out, "t", e.t);
            scalar(&mut out, "rho", e.rho);
            scalar(&mut out, "rho_escape", e.rho_escape);
            boolean(&mut out, "rho_inflated", e.rho_inflated);
            scalar(&mut out, "Q_script", e.q_cal);
            scalar(&mut out, "a0", e.a0);
            scalar(&mut out, "K_script", e.k_diff);
            scalar(&mut out, "sigma_tilde_norm", e.sigma_tilde_norm);
            scalar(&mut out, "P_norm", e.p_norm);
            scalar(&mut out, "P_inv_norm", e.p_inv_norm);
            scalar(&mut out, "trace_sigma_P", e.trace_sigma_p);
            scalar(&mut out, "trace_sigma_tilde_P", e.trace_sigma_tilde_p);
            scalar(&mut out, "P0_norm_P", e.p0_pnorm);
            scalar(&mut out, "P0_norm_sigma_tilde_inv", e.p0_sigma_tilde_inv_norm);
            scalar(&mut out, "fourth_moment_bound", e.fourth_moment_bound);
            scalar(&mut out, "escape_prefactor", e.escape_prefactor);
            scalar(&mut out, "escape_rate", e.escape_rate);
            scalar(&mut out, "c1", e.c1);
            scalar(&mut out, "c2_literal", e.c2_literal);
            scalar(&mut out, "c2_similarity", e.c2_similarity);
            scalar(&mut out, "c2", e.c2);
            scalar(&mut out, "delta_norm_literal", e.delta_norm_literal);
            scalar(&mut out, "delta_norm_similarity", e.delta_norm_similarity);
            scalar(&mut out, "delta_norm", e.delta_norm);
            scalar(&mut out, "escape_at_M_over_K", e.escape(e.m / e.k_diff));
            scalar(&mut out, "switch_prob_bound", e.switch_prob_bound(e.m, e.t));
            scalar(&mut out, "G", e.g_factor(e.m, e.t));
            scalar(&mut out, "gap_bound", e.gap_bound(e.m, e.t));
            scalar(&mut out, "log_gap_bound", e.log_gap_bound(e.m, e.t));
            scalar(&mut out, "gap_decay_rate", e.gap_decay_rate);
            scalar(&mut out, "switch_prob_decay_rate", e.switch_prob_decay_rate);
            boolean(&mut out, "valid_M", e.valid_m);
            boolean(&mut out, "valid_t", e.valid_t);
            matrix(&mut out, "Sigma", &e.sigma);
            matrix(&mut out, "Sigma_tilde", &e.sigma_tilde);
            matrix(&mut out, "Qscr1", &e.q_scr1);
            matrix(&mut out, "Delta", &e.delta);
        }

        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{
        check_assumptions, dwell_certificate, efficiency_certificate, safety_certificate,
    };
    use crate::model::{random_stable_system, synth_optimal_controller, zero_fallback};
    use crate::supervisor::SupervisorConfig;

    #[test]
    fn report_text_is_deterministic_and_complete() {
        let sys = random_stable_system(15, 3, 2, 2, 0.8).unwrap();
        let primary = synth_optimal_controller(&sys).unwrap();
        let fallback = zero_fallback(&sys).unwrap();
        let cfg = SupervisorConfig::new(1.0, 10).unwrap();
        let report = CertificateReport {
            assumptions: check_assumptions(&sys, &primary, &fallback).unwrap(),
            safety: Some(safety_certificate(&sys, &fallback, 1.0).unwrap()),
            dwell: Some(dwell_certificate(&sys, &primary, &fallback).unwrap()),
            efficiency: Some(efficiency_certificate(&sys, &primary, &fallback, &cfg).unwrap()),
        };
        let a = report.to_text();
        let b = report.to_text();
        assert_eq!(a, b);
        for key in [
            "lqg-certificates v1",
            "rho0",
            "cost_bound",
            "t_min",
            "Q_script",
            "a0",
            "K_script",
            "gap_bound",
            "gap_decay_rate",
            "matrix P0",
            "matrix Sigma_tilde",
            "matrix Delta",
        ] {
            assert!(a.contains(key), "report missing '{key}':\n{a}");
        }
    }
}
