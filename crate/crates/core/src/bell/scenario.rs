use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Party count plus per-party input and output alphabet sizes.
///
/// Input and output tuples are flattened with mixed-radix indices, party 0
/// being the most significant digit (the same convention as tensor factors).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl Scenario {
    pub fn new(inputs: Vec<usize>, outputs: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidScenario("no parties".into()));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidScenario(format!(
                "{} input counts but {} output counts",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.iter().chain(&outputs).any(|&c| c == 0) {
            return Err(Error::InvalidScenario("every count must be at least 1".into()));
        }
        Ok(Self { inputs, outputs })
    }

    /// `parties` parties with identical alphabets.
    pub fn uniform(parties: usize, inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(vec![inputs; parties], vec![outputs; parties])
    }

    pub fn n_parties(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn is_binary(&self) -> bool {
        self.outputs.iter().all(|&o| o == 2)
    }

    pub fn is_uniform(&self) -> bool {
        self.inputs.windows(2).all(|w| w[0] == w[1]) && self.outputs.windows(2).all(|w| w[0] == w[1])
    }

    pub fn num_input_tuples(&self) -> usize {
        self.inputs.iter().product()
    }

    pub fn num_output_tuples(&self) -> usize {
        self.outputs.iter().product()
    }

    /// Size of a full P(outputs|inputs) table.
    pub fn table_len(&self) -> usize {
        self.num_input_tuples() * self.num_output_tuples()
    }

    pub fn input_index(&self, inputs: &[usize]) -> Result<usize> {
        encode(inputs, &self.inputs, "input")
    }

    pub fn output_index(&self, outputs: &[usize]) -> Result<usize> {
        encode(outputs, &self.outputs, "output")
    }

    pub fn input_tuple(&self, index: usize) -> Vec<usize> {
        decode(index, &self.inputs)
    }

    pub fn output_tuple(&self, index: usize) -> Vec<usize> {
        decode(index, &self.outputs)
    }

    /// Flat index into a table laid out as `[input_index][output_index]`.
    pub fn cell(&self, input_index: usize, output_index: usize) -> usize {
        input_index * self.num_output_tuples() + output_index
    }
}

fn encode(tuple: &[usize], radix: &[usize], what: &str) -> Result<usize> {
    if tuple.len() != radix.len() {
        return Err(Error::OutOfScenario(format!(
            "{what} tuple {tuple:?} has {} entries for {} parties",
            tuple.len(),
            radix.len()
        )));
    }
    let mut idx = 0;
    for (k, (&v, &r)) in tuple.iter().zip(radix).enumerate() {
        if v >= r {
            return Err(Error::OutOfScenario(format!(
                "{what} {v} of party {k} exceeds range {r}"
            )));
        }
        idx = idx * r + v;
    }
    Ok(idx)
}

pub(crate) fn decode(mut index: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for k in (0..radix.len()).rev() {
        out[k] = index % radix[k];
        index /= radix[k];
    }
    out
}
