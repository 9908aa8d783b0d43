use crate::bell::scenario::Scenario;
use crate::error::{Error, Result};

const NONNEG_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
pub const NO_SIGNALING_TOL: f64 = 1e-9;

/// A table of conditional probabilities P(outputs | inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    probs: Vec<f64>,
}

impl Behavior {
    /// Validates nonnegativity and per-input normalization. No-signaling is
    /// not required here; see [`Behavior::signaling_violation`].
    pub fn new(scenario: Scenario, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != scenario.table_len() {
            return Err(Error::ScenarioMismatch(format!(
                "table of {} entries for a scenario needing {}",
                probs.len(),
                scenario.table_len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= -NONNEG_TOL)) {
            return Err(Error::InvalidArgument(format!("negative probability {p}")));
        }
        let n_out = scenario.num_output_tuples();
        for (x, row) in probs.chunks(n_out).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "probabilities for inputs {:?} sum to {total}",
                    scenario.input_tuple(x)
                )));
            }
        }
        Ok(Self { scenario, probs })
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(&[usize], &[usize]) -> f64) -> Result<Self> {
        let mut probs = Vec::with_capacity(scenario.table_len());
        for x in 0..scenario.num_input_tuples() {
            let xs = scenario.input_tuple(x);
            for a in 0..scenario.num_output_tuples() {
                probs.push(f(&xs, &scenario.output_tuple(a)));
            }
        }
        Self::new(scenario, probs)
    }

    /// Every output tuple equally likely for every input tuple.
    pub fn uniform(scenario: Scenario) -> Self {
        let n_out = scenario.num_output_tuples();
        let probs = vec![1.0 / n_out as f64; scenario.table_len()];
        Self { scenario, probs }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outputs: &[usize], inputs: &[usize]) -> Result<f64> {
        let x = self.scenario.input_index(inputs)?;
        let a = self.scenario.output_index(outputs)?;
        Ok(self.probs[self.scenario.cell(x, a)])
    }

    /// ⟨∏_{k ∈ S} A_k⟩ for binary outputs, where S are the parties with
    /// `Some` input. Absent parties use input 0 and are summed over.
    pub fn correlator(&self, inputs: &[Option<usize>]) -> Result<f64> {
        if !self.scenario.is_binary() {
            return Err(Error::InvalidFunctional("correlators need binary outputs".into()));
        }
        let full: Vec<usize> = inputs.iter().map(|x| x.unwrap_or(0)).collect();
        let x = self.scenario.input_index(&full)?;
        let mut acc = 0.0;
        for a in 0..self.scenario.num_output_tuples() {
            let outs = self.scenario.output_tuple(a);
            let parity: usize = outs
                .iter()
                .zip(inputs)
                .filter(|(_, x)| x.is_some())
                .map(|(o, _)| *o)
                .sum();
            let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * self.probs[self.scenario.cell(x, a)];
        }
        Ok(acc)
    }

    /// Largest change of any party-removed marginal when that party's input
    /// changes. Zero (within rounding) for no-signaling behaviors.
    pub fn signaling_violation(&self) -> f64 {
        let s = &self.scenario;
        let n = s.n_parties();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let mut others_in = s.inputs().to_vec();
            others_in[k] = 1;
            let mut others_out = s.outputs().to_vec();
            others_out[k] = 1;
            let rest = Scenario::new(others_in, others_out).unwrap();
            for xr in 0..rest.num_input_tuples() {
                let mut xs = rest.input_tuple(xr);
                for ar in 0..rest.num_output_tuples() {
                    let mut outs = rest.output_tuple(ar);
                    let mut first: Option<f64> = None;
                    for xk in 0..s.inputs()[k] {
                        xs[k] = xk;
                        let xi = s.input_index(&xs).unwrap();
                        let mut marginal = 0.0;
                        for ak in 0..s.outputs()[k] {
                            outs[k] = ak;
                            let ai = s.output_index(&outs).unwrap();
                            marginal += self.probs[s.cell(xi, ai)];
                        }
                        match first {
                            None => first = Some(marginal),
                            Some(m) => worst = worst.max((m - marginal).abs()),
                        }
                    }
                    outs[k] = 0;
                }
                xs[k] = 0;
            }
        }
        worst
    }

    pub fn is_no_signaling(&self) -> bool {
        self.signaling_violation() <= NO_SIGNALING_TOL
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// P(a,b|x,y) = 1/2 when a ⊕ b = x·y.
    pub fn pr_box() -> Behavior {
        let s = Scenario::uniform(2, 2, 2).unwrap();
        Behavior::from_fn(s, |x, a| {
            if (a[0] ^ a[1]) == (x[0] & x[1]) {
                0.5
            } else {
                0.0
            }
        })
        .unwrap()
    }
}
