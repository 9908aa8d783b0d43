use rayon::prelude::*;

use crate::bell::behavior::Behavior;
use crate::bell::functional::BellFunctional;
use crate::bell::scenario::{decode, Scenario};
use crate::error::{Error, Result};

/// Upper limit on the number of deterministic strategies enumerated.
pub const MAX_STRATEGIES: u128 = 10_000_000;

const CHUNK: usize = 4096;

/// One fixed output per input for every party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    /// `responses[party][input]` is the party's output.
    pub responses: Vec<Vec<usize>>,
}

impl DeterministicStrategy {
    pub fn output(&self, party: usize, input: usize) -> usize {
        self.responses[party][input]
    }

    pub fn behavior(&self, scenario: &Scenario) -> Result<Behavior> {
        if self.responses.len() != scenario.n_parties()
            || self
                .responses
                .iter()
                .zip(scenario.inputs())
                .any(|(r, &n)| r.len() != n)
        {
            return Err(Error::ScenarioMismatch("strategy does not cover the scenario".into()));
        }
        Behavior::from_fn(scenario.clone(), |x, a| {
            let hit = x
                .iter()
                .enumerate()
                .all(|(k, &xk)| self.responses[k][xk] == a[k]);
            if hit {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Number of deterministic strategies, Π_k outputs_k^{inputs_k}.
pub fn strategy_count(scenario: &Scenario) -> u128 {
    scenario
        .inputs()
        .iter()
        .zip(scenario.outputs())
        .map(|(&i, &o)| (o as u128).saturating_pow(i as u32))
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

/// Maximum of `f` over all deterministic strategies, by exhaustive
/// enumeration. Strategies are visited in mixed-radix counter order (party 0
/// most significant, each party's response function read as a base-`outputs`
/// number with input 0 most significant); ties go to the lowest counter.
pub fn classical_bound(f: &BellFunctional) -> Result<(f64, DeterministicStrategy)> {
    let scenario = f.scenario();
    let count = strategy_count(scenario);
    if count > MAX_STRATEGIES {
        return Err(Error::GuardExceeded {
            what: "deterministic strategies",
            size: count,
            limit: MAX_STRATEGIES,
        });
    }
    let count = count as usize;
    let n = scenario.n_parties();

    // Per party: table of response functions, each a vector of outputs.
    let responses: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|k| {
            let radix = vec![scenario.outputs()[k]; scenario.inputs()[k]];
            let per_party = scenario.outputs()[k].pow(scenario.inputs()[k] as u32);
            (0..per_party).map(|r| decode(r, &radix)).collect()
        })
        .collect();
    let per_party: Vec<usize> = responses.iter().map(|r| r.len()).collect();
    let active = f.active_inputs();
    let active_tuples: Vec<Vec<usize>> = active.iter().map(|&x| scenario.input_tuple(x)).collect();
    let n_out = scenario.num_output_tuples();
    let coeffs = f.coeffs();

    let value_of = |idx: usize| -> f64 {
        let choice = decode(idx, &per_party);
        active
            .iter()
            .zip(&active_tuples)
            .map(|(&xi, xs)| {
                let mut ai = 0;
                for k in 0..n {
                    ai = ai * scenario.outputs()[k] + responses[k][choice[k]][xs[k]];
                }
                coeffs[xi * n_out + ai]
            })
            .sum()
    };

    let best = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(count);
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for idx in start..end {
                let v = value_of(idx);
                if v > best.0 {
                    best = (v, idx);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    let choice = decode(best.1, &per_party);
    let strategy = DeterministicStrategy {
        responses: (0..n).map(|k| responses[k][choice[k]].clone()).collect(),
    };
    Ok((best.0, strategy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::functional::{chsh, CorrelatorFunctional};

    #[test]
    fn chsh_classical_bound_is_two() {
        let f = chsh().to_probability_form();
        let (value, witness) = classical_bound(&f).unwrap();
        assert_eq!(value, 2.0);
        let b = witness.behavior(f.scenario()).unwrap();
        assert_eq!(f.evaluate(&b).unwrap(), value);
        // first counter reaching 2 is the all-zero strategy
        assert_eq!(witness.responses, vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn single_term_bound_is_one() {
        let s = Scenario::uniform(2, 2, 2).unwrap();
        let f = CorrelatorFunctional::from_full_terms(s, &[(&[0, 0], 1.0)]).unwrap();
        assert_eq!(classical_bound(&f.to_probability_form()).unwrap().0, 1.0);
    }

    #[test]
    fn empty_functional_bound_is_zero() {
        let f = BellFunctional::zero(Scenario::uniform(2, 2, 2).unwrap());
        assert_eq!(classical_bound(&f).unwrap().0, 0.0);
    }

    #[test]
    fn guard_rejects_huge_scenarios() {
        let f = BellFunctional::zero(Scenario::uniform(4, 8, 2).unwrap());
        assert!(matches!(classical_bound(&f), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn strategy_count_examples() {
        assert_eq!(strategy_count(&Scenario::uniform(2, 2, 2).unwrap()), 16);
        assert_eq!(strategy_count(&Scenario::uniform(3, 3, 2).unwrap()), 512);
    }
}
