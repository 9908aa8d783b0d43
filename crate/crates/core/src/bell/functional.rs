use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bell::behavior::Behavior;
use crate::bell::scenario::Scenario;
use crate::error::{Error, Result};

/// A linear Bell expression Σ α(x, a) P(a|x) over a scenario.
///
/// Coefficients are stored densely in the same `[input][output]` layout as
/// [`Behavior`], so evaluation is a dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    scenario: Scenario,
    coeffs: Vec<f64>,
    declared_bound: Option<f64>,
}

impl BellFunctional {
    pub fn zero(scenario: Scenario) -> Self {
        let coeffs = vec![0.0; scenario.table_len()];
        Self {
            scenario,
            coeffs,
            declared_bound: None,
        }
    }

    /// Accumulates `(inputs, outputs, α)` terms; repeated cells add up.
    pub fn from_terms<'a>(
        scenario: Scenario,
        terms: impl IntoIterator<Item = (&'a [usize], &'a [usize], f64)>,
    ) -> Result<Self> {
        let mut f = Self::zero(scenario);
        for (x, a, c) in terms {
            f.add_term(x, a, c)?;
        }
        Ok(f)
    }

    pub fn add_term(&mut self, inputs: &[usize], outputs: &[usize], coeff: f64) -> Result<()> {
        let x = self.scenario.input_index(inputs)?;
        let a = self.scenario.output_index(outputs)?;
        let cell = self.scenario.cell(x, a);
        self.coeffs[cell] += coeff;
        Ok(())
    }

    pub fn with_declared_bound(mut self, bound: Option<f64>) -> Self {
        self.declared_bound = bound;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    /// Dense coefficients in `[input_index][output_index]` layout.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, inputs: &[usize], outputs: &[usize]) -> Result<f64> {
        let x = self.scenario.input_index(inputs)?;
        let a = self.scenario.output_index(outputs)?;
        Ok(self.coeffs[self.scenario.cell(x, a)])
    }

    /// Nonzero terms as `(inputs, outputs, α)`.
    pub fn terms(&self) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
        let n_out = self.scenario.num_output_tuples();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, &c)| {
                (
                    self.scenario.input_tuple(i / n_out),
                    self.scenario.output_tuple(i % n_out),
                    c,
                )
            })
            .collect()
    }

    /// Input tuples (as flat indices) that carry at least one nonzero term.
    pub(crate) fn active_inputs(&self) -> Vec<usize> {
        let n_out = self.scenario.num_output_tuples();
        (0..self.scenario.num_input_tuples())
            .filter(|&x| self.coeffs[x * n_out..(x + 1) * n_out].iter().any(|c| *c != 0.0))
            .collect()
    }

    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::ScenarioMismatch(format!(
                "functional on {:?}, behavior on {:?}",
                self.scenario,
                behavior.scenario()
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(behavior.probs())
            .map(|(c, p)| c * p)
            .sum())
    }

    /// Sum of two functionals on the same scenario. The declared bound is
    /// dropped.
    pub fn sum(&self, other: &BellFunctional) -> Result<BellFunctional> {
        if self.scenario != other.scenario {
            return Err(Error::ScenarioMismatch("summing functionals".into()));
        }
        Ok(BellFunctional {
            scenario: self.scenario.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            declared_bound: None,
        })
    }
}

/// A linear combination of (possibly partial) full correlators
/// ⟨∏_{k ∈ S} A^{(k)}_{x_k}⟩ over a binary-output scenario. A `None` input
/// marks a party outside S.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorFunctional {
    scenario: Scenario,
    terms: BTreeMap<Vec<Option<usize>>, f64>,
    declared_bound: Option<f64>,
}

impl CorrelatorFunctional {
    pub fn new(scenario: Scenario) -> Result<Self> {
        if !scenario.is_binary() {
            return Err(Error::InvalidFunctional(
                "correlator functionals need two outputs per party".into(),
            ));
        }
        Ok(Self {
            scenario,
            terms: BTreeMap::new(),
            declared_bound: None,
        })
    }

    /// Builds a functional from full correlator terms (every party present).
    pub fn from_full_terms(scenario: Scenario, terms: &[(&[usize], f64)]) -> Result<Self> {
        let mut f = Self::new(scenario)?;
        for (x, c) in terms {
            f.add_term(x.iter().map(|&v| Some(v)).collect(), *c)?;
        }
        Ok(f)
    }

    pub fn add_term(&mut self, inputs: Vec<Option<usize>>, coeff: f64) -> Result<()> {
        if inputs.len() != self.scenario.n_parties() {
            return Err(Error::OutOfScenario(format!(
                "term {inputs:?} for {} parties",
                self.scenario.n_parties()
            )));
        }
        for (k, x) in inputs.iter().enumerate() {
            if let Some(x) = x {
                if *x >= self.scenario.inputs()[k] {
                    return Err(Error::OutOfScenario(format!(
                        "input {x} of party {k} in term {inputs:?}"
                    )));
                }
            }
        }
        *self.terms.entry(inputs).or_insert(0.0) += coeff;
        Ok(())
    }

    pub fn with_declared_bound(mut self, bound: Option<f64>) -> Self {
        self.declared_bound = bound;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Option<usize>>, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn coefficient(&self, inputs: &[Option<usize>]) -> f64 {
        self.terms.get(inputs).copied().unwrap_or(0.0)
    }

    /// Coefficient of a full correlator term.
    pub fn full_coefficient(&self, inputs: &[usize]) -> f64 {
        let key: Vec<Option<usize>> = inputs.iter().map(|&x| Some(x)).collect();
        self.coefficient(&key)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.values().filter(|c| **c != 0.0).count()
    }

    /// Evaluates directly from the correlators of `behavior`.
    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::ScenarioMismatch("correlator functional vs behavior".into()));
        }
        let mut acc = 0.0;
        for (x, c) in &self.terms {
            acc += c * behavior.correlator(x)?;
        }
        Ok(acc)
    }

    /// Probability-form equivalent via ⟨∏ A⟩ = Σ (−1)^{Σ a} P(a|x), with
    /// absent parties at input 0 and summed over their outputs.
    pub fn to_probability_form(&self) -> BellFunctional {
        let s = &self.scenario;
        let mut f = BellFunctional::zero(s.clone());
        for (x, &c) in &self.terms {
            let full: Vec<usize> = x.iter().map(|v| v.unwrap_or(0)).collect();
            let xi = s.input_index(&full).expect("validated on insert");
            for ai in 0..s.num_output_tuples() {
                let a = s.output_tuple(ai);
                let parity: usize = a
                    .iter()
                    .zip(x)
                    .filter(|(_, x)| x.is_some())
                    .map(|(o, _)| *o)
                    .sum();
                let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
                f.coeffs[s.cell(xi, ai)] += sign * c;
            }
        }
        f.declared_bound = self.declared_bound;
        f
    }

    /// Winning probability of the associated parity game, where a referee
    /// picks one of the T terms uniformly: p = 1/2 + value / (2T).
    pub fn game_win_probability(&self, value: f64) -> Result<f64> {
        let t = self.num_terms();
        if t == 0 {
            return Err(Error::InvalidFunctional("functional has no terms".into()));
        }
        if let Some((x, c)) = self.terms.iter().find(|(_, c)| **c != 0.0 && c.abs() != 1.0) {
            return Err(Error::InvalidFunctional(format!(
                "term {x:?} has coefficient {c}, need ±1"
            )));
        }
        Ok(0.5 + value / (2.0 * t as f64))
    }
}

/// CHSH: ⟨A0B0⟩ + ⟨A0B1⟩ + ⟨A1B0⟩ − ⟨A1B1⟩, classical bound 2.
pub fn chsh() -> CorrelatorFunctional {
    let s = Scenario::uniform(2, 2, 2).unwrap();
    CorrelatorFunctional::from_full_terms(
        s,
        &[(&[0, 0], 1.0), (&[0, 1], 1.0), (&[1, 0], 1.0), (&[1, 1], -1.0)],
    )
    .unwrap()
    .with_declared_bound(Some(2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountSpec {
    Uniform(usize),
    PerParty(Vec<usize>),
}

impl CountSpec {
    fn expand(&self, parties: usize) -> Result<Vec<usize>> {
        match self {
            CountSpec::Uniform(c) => Ok(vec![*c; parties]),
            CountSpec::PerParty(v) if v.len() == parties => Ok(v.clone()),
            CountSpec::PerParty(v) => Err(Error::InvalidScenario(format!(
                "{} counts for {parties} parties",
                v.len()
            ))),
        }
    }

    fn compress(v: &[usize]) -> Self {
        if v.windows(2).all(|w| w[0] == w[1]) {
            CountSpec::Uniform(v[0])
        } else {
            CountSpec::PerParty(v.to_vec())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub parties: usize,
    pub inputs: CountSpec,
    pub outputs: CountSpec,
}

impl ScenarioDoc {
    pub fn to_scenario(&self) -> Result<Scenario> {
        Scenario::new(
            self.inputs.expand(self.parties)?,
            self.outputs.expand(self.parties)?,
        )
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            parties: s.n_parties(),
            inputs: CountSpec::compress(s.inputs()),
            outputs: CountSpec::compress(s.outputs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTermDoc {
    /// `null` marks a party outside the correlator.
    pub inputs: Vec<Option<usize>>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTermDoc {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub coeff: f64,
}

/// JSON form of a functional. Correlator terms and probability terms may
/// both be present; they add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDoc {
    pub scenario: ScenarioDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub correlator_terms: Vec<CorrelatorTermDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probability_terms: Vec<ProbabilityTermDoc>,
    #[serde(default)]
    pub declared_bound: Option<f64>,
}

impl FunctionalDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_correlator(f: &CorrelatorFunctional) -> Self {
        Self {
            scenario: ScenarioDoc::from_scenario(f.scenario()),
            correlator_terms: f
                .terms()
                .map(|(x, c)| CorrelatorTermDoc {
                    inputs: x.clone(),
                    coeff: c,
                })
                .collect(),
            probability_terms: Vec::new(),
            declared_bound: f.declared_bound(),
        }
    }

    pub fn from_probability(f: &BellFunctional) -> Self {
        Self {
            scenario: ScenarioDoc::from_scenario(f.scenario()),
            correlator_terms: Vec::new(),
            probability_terms: f
                .terms()
                .into_iter()
                .map(|(inputs, outputs, coeff)| ProbabilityTermDoc {
                    inputs,
                    outputs,
                    coeff,
                })
                .collect(),
            declared_bound: f.declared_bound(),
        }
    }

    /// The correlator part alone, if the document has no probability terms.
    pub fn to_correlator(&self) -> Result<Option<CorrelatorFunctional>> {
        if !self.probability_terms.is_empty() {
            return Ok(None);
        }
        let scenario = self.scenario.to_scenario()?;
        if !scenario.is_binary() {
            return Ok(None);
        }
        let mut f = CorrelatorFunctional::new(scenario)?;
        for t in &self.correlator_terms {
            f.add_term(t.inputs.clone(), t.coeff)?;
        }
        Ok(Some(f.with_declared_bound(self.declared_bound)))
    }

    pub fn to_functional(&self) -> Result<BellFunctional> {
        let scenario = self.scenario.to_scenario()?;
        let mut f = if self.correlator_terms.is_empty() {
            BellFunctional::zero(scenario.clone())
        } else {
            let mut c = CorrelatorFunctional::new(scenario.clone())?;
            for t in &self.correlator_terms {
                c.add_term(t.inputs.clone(), t.coeff)?;
            }
            c.to_probability_form()
        };
        for t in &self.probability_terms {
            f.add_term(&t.inputs, &t.outputs, t.coeff)?;
        }
        Ok(f.with_declared_bound(self.declared_bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::behavior::fixtures::pr_box;
    use crate::bell::behavior::Behavior;
    use proptest::prelude::*;

    #[test]
    fn chsh_on_reference_behaviors() {
        let f = chsh().to_probability_form();
        let s = f.scenario().clone();
        assert_eq!(f.evaluate(&Behavior::uniform(s.clone())).unwrap(), 0.0);
        let all_zero = Behavior::from_fn(s, |_, a| if a == [0, 0] { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(f.evaluate(&all_zero).unwrap(), 2.0);
        assert_eq!(f.evaluate(&pr_box()).unwrap(), 4.0);
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let f = chsh().to_probability_form();
        let other = Behavior::uniform(Scenario::uniform(2, 3, 2).unwrap());
        assert!(matches!(f.evaluate(&other), Err(Error::ScenarioMismatch(_))));
    }

    #[test]
    fn single_marginal_term_expands() {
        let s = Scenario::uniform(1, 1, 2).unwrap();
        let mut c = CorrelatorFunctional::new(s).unwrap();
        c.add_term(vec![Some(0)], 1.0).unwrap();
        let p = c.to_probability_form();
        assert_eq!(p.coefficient(&[0], &[0]).unwrap(), 1.0);
        assert_eq!(p.coefficient(&[0], &[1]).unwrap(), -1.0);
    }

    #[test]
    fn chsh_probability_form_has_sixteen_terms() {
        assert_eq!(chsh().to_probability_form().terms().len(), 16);
    }

    #[test]
    fn non_binary_scenarios_are_rejected() {
        let s = Scenario::uniform(2, 2, 3).unwrap();
        assert!(CorrelatorFunctional::new(s).is_err());
    }

    #[test]
    fn out_of_range_terms_are_rejected() {
        let mut f = CorrelatorFunctional::new(Scenario::uniform(2, 2, 2).unwrap()).unwrap();
        assert!(f.add_term(vec![Some(2), Some(0)], 1.0).is_err());
        assert!(f.add_term(vec![Some(0)], 1.0).is_err());
    }

    #[test]
    fn game_win_probability_examples() {
        let f = chsh();
        assert_eq!(f.game_win_probability(2.0).unwrap(), 0.75);
        assert_eq!(f.game_win_probability(0.0).unwrap(), 0.5);
        let mut g = CorrelatorFunctional::new(Scenario::uniform(2, 2, 2).unwrap()).unwrap();
        g.add_term(vec![Some(0), Some(0)], 2.0).unwrap();
        assert!(g.game_win_probability(1.0).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut f = chsh();
        f.add_term(vec![Some(1), None], 0.123_456_789_012_345_6).unwrap();
        let f = f.with_declared_bound(Some(std::f64::consts::PI));
        let text = FunctionalDoc::from_correlator(&f).to_json().unwrap();
        let back = FunctionalDoc::from_json(&text).unwrap().to_correlator().unwrap().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn json_accepts_documented_shape() {
        let text = r#"{
            "scenario": {"parties": 2, "inputs": 2, "outputs": 2},
            "correlator_terms": [
                {"inputs": [0, 0], "coeff": 1}, {"inputs": [0, 1], "coeff": 1},
                {"inputs": [1, 0], "coeff": 1}, {"inputs": [1, 1], "coeff": -1}
            ],
            "declared_bound": 2
        }"#;
        let doc = FunctionalDoc::from_json(text).unwrap();
        assert_eq!(doc.to_correlator().unwrap().unwrap(), chsh());
        assert_eq!(doc.to_functional().unwrap(), chsh().to_probability_form());
    }

    fn random_no_signaling_behavior(weights: &[f64]) -> Behavior {
        // Mixture of the local deterministic points plus the PR box: always
        // no-signaling, generally nonlocal.
        let s = Scenario::uniform(2, 2, 2).unwrap();
        let mut probs = vec![0.0; s.table_len()];
        let total: f64 = weights.iter().sum();
        for (k, w) in weights.iter().take(16).enumerate() {
            let (a0, a1, b0, b1) = (k & 1, (k >> 1) & 1, (k >> 2) & 1, (k >> 3) & 1);
            for x in 0..2 {
                for y in 0..2 {
                    let a = if x == 0 { a0 } else { a1 };
                    let b = if y == 0 { b0 } else { b1 };
                    let xi = s.input_index(&[x, y]).unwrap();
                    let ai = s.output_index(&[a, b]).unwrap();
                    probs[s.cell(xi, ai)] += w / total;
                }
            }
        }
        let pr = pr_box();
        for (p, q) in probs.iter_mut().zip(pr.probs()) {
            *p += weights[16] / total * q;
        }
        Behavior::new(s, probs).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn correlator_and_probability_forms_agree(
            weights in proptest::collection::vec(0.01f64..1.0, 17),
            coeffs in proptest::collection::vec(-2.0f64..2.0, 8),
        ) {
            let b = random_no_signaling_behavior(&weights);
            prop_assert!(b.is_no_signaling());
            let s = b.scenario().clone();
            let mut f = CorrelatorFunctional::new(s).unwrap();
            let keys: [Vec<Option<usize>>; 8] = [
                vec![Some(0), Some(0)], vec![Some(0), Some(1)], vec![Some(1), Some(0)],
                vec![Some(1), Some(1)], vec![Some(0), None], vec![Some(1), None],
                vec![None, Some(0)], vec![None, Some(1)],
            ];
            for (k, c) in keys.iter().zip(&coeffs) {
                f.add_term(k.clone(), *c).unwrap();
            }
            let direct = f.evaluate(&b).unwrap();
            let via_prob = f.to_probability_form().evaluate(&b).unwrap();
            prop_assert!((direct - via_prob).abs() < 1e-10);
        }
    }
}
