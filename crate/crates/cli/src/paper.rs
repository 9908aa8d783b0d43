//! Published numbers, used only for comparison columns.

use serde::Deserialize;

const PAPER_VALUES: &str = include_str!("../data/paper_values.json");

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedCorrelator {
    pub triple: [usize; 3],
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PaperValues {
    pub correlators: Vec<PublishedCorrelator>,
    pub bell_value: f64,
    pub classical_bound: f64,
    pub threshold_sin2theta: f64,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub visibility_hv: f64,
    pub visibility_hv_stderr: f64,
    pub visibility_da: f64,
    pub visibility_da_stderr: f64,
    pub classical_visibility_limit: f64,
    pub p_value: f64,
    pub case_probs: [f64; 3],
}

pub fn paper_values() -> PaperValues {
    serde_json::from_str(PAPER_VALUES).expect("bundled paper values parse")
}

impl PaperValues {
    /// Correlators in the library's triple order.
    pub fn correlator_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (o, t) in out.iter_mut().zip(bellwire::protocol::TRIPLES) {
            *o = self
                .correlators
                .iter()
                .find(|c| c.triple == t)
                .map(|c| c.value)
                .expect("every triple is listed");
        }
        out
    }
}
