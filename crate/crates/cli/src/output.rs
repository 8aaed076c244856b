//! Report documents and their two renderings: structured JSON (lossless,
//! byte-deterministic) and human text (6 significant digits).

use serde::{Deserialize, Serialize};

use kktcheck::kkt::{KktReport, Verdict};
use kktcheck::oracle::Counterexample;

/// Format a real with 6 significant digits, printf `%g` style: plain
/// decimal in mid magnitudes, scientific outside, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mantissa, exponent) = s.split_once('e').expect("e-notation");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

pub fn sig6_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&v| sig6(v)).collect();
    format!("({})", parts.join(", "))
}

/// Structured output of `check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDocument {
    pub command: String,
    pub point: Vec<f64>,
    pub verdict: Verdict,
    pub feasible: bool,
    pub max_violation: f64,
    pub active_set: Vec<usize>,
    pub licq_rank: kktcheck::RankReport,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub stationarity_residual: Option<f64>,
    pub sign_violations: Vec<(usize, f64)>,
    pub complementarity: Vec<f64>,
    pub inequality_values: Vec<f64>,
    pub tolerances: kktcheck::Tolerances,
}

impl CheckDocument {
    pub fn from_report(report: &KktReport, point: &[f64]) -> Self {
        let (lambda, mu) = match &report.multipliers {
            Some(m) => (m.lambda.clone(), m.mu.clone()),
            None => (Vec::new(), Vec::new()),
        };
        CheckDocument {
            command: "check".to_string(),
            point: point.to_vec(),
            verdict: report.verdict,
            feasible: report.feasible,
            max_violation: report.max_violation,
            active_set: report.active_set.indices.clone(),
            licq_rank: report.licq.clone(),
            lambda,
            mu,
            stationarity_residual: report.stationarity_residual,
            sign_violations: report.sign_violations.clone(),
            complementarity: report.complementarity.clone(),
            inequality_values: report.inequality_values.clone(),
            tolerances: report.tolerances,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("point: {}\n", sig6_vec(&self.point)));
        out.push_str(&format!(
            "feasible: {}  (max violation {})\n",
            if self.feasible { "yes" } else { "no" },
            sig6(self.max_violation)
        ));
        let active: Vec<String> = self.active_set.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("active set: {{{}}}\n", active.join(", ")));
        out.push_str(&format!(
            "LICQ: {} (rank {} of {} active gradients)\n",
            if self.licq_rank.independent {
                "independent"
            } else {
                "DEPENDENT"
            },
            self.licq_rank.numerical_rank,
            self.active_set.len()
        ));
        if !self.lambda.is_empty() || !self.mu.is_empty() {
            out.push_str("multipliers:\n");
            for (i, v) in self.lambda.iter().enumerate() {
                out.push_str(&format!("  λ_{} = {}\n", i + 1, sig6(*v)));
            }
            for (j, v) in self.mu.iter().enumerate() {
                out.push_str(&format!("  μ_{} = {}\n", j + 1, sig6(*v)));
            }
        }
        if let Some(residual) = self.stationarity_residual {
            out.push_str(&format!("stationarity residual: {}\n", sig6(residual)));
        }
        for (j, mu) in &self.sign_violations {
            out.push_str(&format!("sign violation: μ_{} = {} < 0\n", j, sig6(*mu)));
        }
        if !self.complementarity.is_empty() {
            let parts: Vec<String> = self.complementarity.iter().map(|&v| sig6(v)).collect();
            out.push_str(&format!("complementarity products: [{}]\n", parts.join(", ")));
            let slacks: Vec<String> = self.inequality_values.iter().map(|&v| sig6(v)).collect();
            out.push_str(&format!("inequality values: [{}]\n", slacks.join(", ")));
        }
        out.push_str(&format!("verdict: {}\n", self.verdict.as_str()));
        out
    }
}

/// Structured output of `witness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessDocument {
    pub command: String,
    pub point: Vec<f64>,
    pub verdict: Verdict,
    /// "descent", "sign", or "none".
    pub construction: String,
    pub x_nu: Option<Vec<f64>>,
    pub objective_drop: Option<f64>,
    pub max_constraint_violation: Option<f64>,
    pub nu: Option<f64>,
    pub epsilon: Option<f64>,
    pub j0: Option<usize>,
    pub mu_j0: Option<f64>,
    pub newton_iters: Option<usize>,
    pub note: Option<String>,
}

impl WitnessDocument {
    pub fn none(point: &[f64], verdict: Verdict, note: &str) -> Self {
        WitnessDocument {
            command: "witness".to_string(),
            point: point.to_vec(),
            verdict,
            construction: "none".to_string(),
            x_nu: None,
            objective_drop: None,
            max_constraint_violation: None,
            nu: None,
            epsilon: None,
            j0: None,
            mu_j0: None,
            newton_iters: None,
            note: Some(note.to_string()),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("point: {}\n", sig6_vec(&self.point)));
        out.push_str(&format!("verdict: {}\n", self.verdict.as_str()));
        out.push_str(&format!("construction: {}\n", self.construction));
        if let Some(x) = &self.x_nu {
            out.push_str(&format!("witness point: {}\n", sig6_vec(x)));
        }
        if let Some(v) = self.objective_drop {
            out.push_str(&format!("objective drop: {}\n", sig6(v)));
        }
        if let Some(v) = self.max_constraint_violation {
            out.push_str(&format!("max constraint violation: {}\n", sig6(v)));
        }
        if let Some(v) = self.nu {
            out.push_str(&format!("ν = {}\n", sig6(v)));
        }
        if let Some(v) = self.epsilon {
            out.push_str(&format!("ε = {}\n", sig6(v)));
        }
        if let (Some(j0), Some(mu)) = (self.j0, self.mu_j0) {
            out.push_str(&format!("relaxed inequality {} (μ_{} = {})\n", j0, j0, sig6(mu)));
        }
        if let Some(iters) = self.newton_iters {
            out.push_str(&format!("newton iterations: {iters}\n"));
        }
        if let Some(note) = &self.note {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Structured output of `curve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub command: String,
    pub point: Vec<f64>,
    pub j0: usize,
    pub epsilons: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub constraint_values: Vec<f64>,
    pub w_j0: Vec<f64>,
    pub slope_finite_difference: Option<f64>,
    pub slope_analytic: Option<f64>,
}

impl CurveDocument {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("point: {}\n", sig6_vec(&self.point)));
        out.push_str(&format!("relaxing inequality {}\n", self.j0));
        out.push_str(&format!("w_j0 = {}\n", sig6_vec(&self.w_j0)));
        for ((eps, pt), value) in self
            .epsilons
            .iter()
            .zip(&self.points)
            .zip(&self.constraint_values)
        {
            out.push_str(&format!(
                "  ε = {:<10} x̃(ε) = {}  constraint = {}\n",
                sig6(*eps),
                sig6_vec(pt),
                sig6(*value)
            ));
        }
        if let Some(s) = self.slope_finite_difference {
            out.push_str(&format!("slope (forward difference): {}\n", sig6(s)));
        }
        if let Some(s) = self.slope_analytic {
            out.push_str(&format!("slope (analytic −f0'·w): {}\n", sig6(s)));
        }
        out
    }
}

/// Structured output of `probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDocument {
    pub command: String,
    pub point: Vec<f64>,
    pub samples_tested: usize,
    pub counterexample: Option<Counterexample>,
    pub best_feasible_value: f64,
    pub radius: f64,
    pub seed: u64,
    pub rng: String,
}

impl ProbeDocument {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("point: {}\n", sig6_vec(&self.point)));
        out.push_str(&format!(
            "samples tested: {} (radius {}, seed {})\n",
            self.samples_tested,
            sig6(self.radius),
            self.seed
        ));
        out.push_str(&format!(
            "best feasible value: {}\n",
            sig6(self.best_feasible_value)
        ));
        match &self.counterexample {
            Some(c) => out.push_str(&format!(
                "counterexample: {} with objective {} (sample {})\n",
                sig6_vec(&c.point),
                sig6(c.objective),
                c.sample_index
            )),
            None => out.push_str("no counterexample found\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_mid_range() {
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(-0.5), "-0.5");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.23456789), "1.23457");
        assert_eq!(sig6(123456.0), "123456");
    }

    #[test]
    fn sig6_extremes_use_scientific() {
        assert_eq!(sig6(1e-7), "1e-7");
        assert_eq!(sig6(1.23e-9), "1.23e-9");
        assert_eq!(sig6(1.5e12), "1.5e12");
    }

    #[test]
    fn sig6_rounds_to_six_digits() {
        assert_eq!(sig6(0.4999999999), "0.5");
        assert_eq!(sig6(1.0000001), "1");
    }
}
