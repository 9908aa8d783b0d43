use crate::bell::behavior::Behavior;
use crate::bell::functional::{BellFunctional, CorrelatorFunctional};
use crate::bell::scenario::Scenario;
use crate::error::{Error, Result};
use crate::qlinalg::{hermitian_eig, kron_all, ComplexMatrix, DensityMatrix, Observable, C64, MAX_DIM};

const EFFECT_TOL: f64 = 1e-9;

/// Two-outcome measurement as a pair of effects (outcome 0, outcome 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    effects: [ComplexMatrix; 2],
}

impl Measurement {
    pub fn from_observable(o: &Observable) -> Self {
        Self {
            effects: [o.projector(0), o.projector(1)],
        }
    }

    /// Validates that both effects are PSD and sum to the identity.
    pub fn from_effects(m0: ComplexMatrix, m1: ComplexMatrix) -> Result<Self> {
        if !m0.is_square() || m0.rows() != m1.rows() || m0.cols() != m1.cols() {
            return Err(Error::DimensionMismatch("effects of different shapes".into()));
        }
        for m in [&m0, &m1] {
            let eig = hermitian_eig(m)?;
            if eig.values[0] < -EFFECT_TOL {
                return Err(Error::InvalidObservable(format!(
                    "effect has eigenvalue {}",
                    eig.values[0]
                )));
            }
        }
        let id = ComplexMatrix::identity(m0.rows());
        let sum = &m0 + &m1;
        if sum.max_abs_diff(&id) > EFFECT_TOL {
            return Err(Error::InvalidObservable("effects do not sum to identity".into()));
        }
        Ok(Self { effects: [m0, m1] })
    }

    pub fn effect(&self, outcome: usize) -> &ComplexMatrix {
        &self.effects[outcome]
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    /// M_0 − M_1.
    pub fn observable_matrix(&self) -> ComplexMatrix {
        &self.effects[0] - &self.effects[1]
    }
}

/// Shared state plus one two-outcome measurement per party and input.
#[derive(Debug, Clone)]
pub struct QuantumStrategy {
    state: DensityMatrix,
    local_dims: Vec<usize>,
    measurements: Vec<Vec<Measurement>>,
}

impl QuantumStrategy {
    pub fn new(
        state: DensityMatrix,
        local_dims: Vec<usize>,
        measurements: Vec<Vec<Measurement>>,
    ) -> Result<Self> {
        let total: usize = local_dims.iter().product();
        if total != state.dim() {
            return Err(Error::DimensionMismatch(format!(
                "local dimensions {local_dims:?} for a state of dimension {}",
                state.dim()
            )));
        }
        if measurements.len() != local_dims.len() {
            return Err(Error::ScenarioMismatch(format!(
                "{} parties of measurements for {} subsystems",
                measurements.len(),
                local_dims.len()
            )));
        }
        for (k, ms) in measurements.iter().enumerate() {
            if ms.is_empty() {
                return Err(Error::ScenarioMismatch(format!("party {k} has no inputs")));
            }
            if let Some(m) = ms.iter().find(|m| m.dim() != local_dims[k]) {
                return Err(Error::DimensionMismatch(format!(
                    "party {k} measurement of dimension {} on a subsystem of dimension {}",
                    m.dim(),
                    local_dims[k]
                )));
            }
        }
        Ok(Self {
            state,
            local_dims,
            measurements,
        })
    }

    pub fn from_observables(
        state: DensityMatrix,
        local_dims: Vec<usize>,
        observables: &[Vec<Observable>],
    ) -> Result<Self> {
        let ms = observables
            .iter()
            .map(|party| party.iter().map(Measurement::from_observable).collect())
            .collect();
        Self::new(state, local_dims, ms)
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn measurements(&self) -> &[Vec<Measurement>] {
        &self.measurements
    }

    pub fn scenario(&self) -> Scenario {
        let inputs = self.measurements.iter().map(|m| m.len()).collect();
        Scenario::new(inputs, vec![2; self.local_dims.len()]).unwrap()
    }
}

/// Born-rule behavior P(a|x) = Tr[(⊗_k M_{a_k|x_k}) ρ].
pub fn quantum_behavior(s: &QuantumStrategy) -> Result<Behavior> {
    let scenario = s.scenario();
    let n_out = scenario.num_output_tuples();
    let mut probs = Vec::with_capacity(scenario.table_len());
    for x in 0..scenario.num_input_tuples() {
        let xs = scenario.input_tuple(x);
        for a in 0..n_out {
            let outs = scenario.output_tuple(a);
            let op = kron_all(
                xs.iter()
                    .zip(&outs)
                    .enumerate()
                    .map(|(k, (&xk, &ak))| s.measurements[k][xk].effect(ak)),
            );
            let p = s.state.matrix().trace_product(&op)?.re;
            // clip rounding noise below zero
            probs.push(if p < 0.0 && p > -1e-12 { 0.0 } else { p });
        }
    }
    Behavior::new(scenario, probs)
}

/// Σ_terms coeff · ⊗_k O_k, with the identity for parties absent from a
/// term. Hermitian by construction.
pub fn bell_operator(
    f: &CorrelatorFunctional,
    observables: &[Vec<Observable>],
) -> Result<ComplexMatrix> {
    let scenario = f.scenario();
    let dims = check_observables(scenario, observables)?;
    let total: usize = dims.iter().product();
    let ids: Vec<ComplexMatrix> = dims.iter().map(|&d| ComplexMatrix::identity(d)).collect();
    let mut w = ComplexMatrix::zeros(total, total);
    for (key, coeff) in f.terms() {
        let factors = key.iter().enumerate().map(|(k, x)| match x {
            Some(x) => observables[k][*x].matrix(),
            None => &ids[k],
        });
        w.add_scaled(&kron_all(factors), coeff);
    }
    Ok(w)
}

/// Σ_{x,a} α(x,a) ⊗_k M_{a_k|x_k} for a probability-form functional.
pub fn bell_operator_from_effects(
    f: &BellFunctional,
    measurements: &[Vec<Measurement>],
) -> Result<ComplexMatrix> {
    let scenario = f.scenario();
    if measurements.len() != scenario.n_parties()
        || measurements
            .iter()
            .zip(scenario.inputs())
            .any(|(m, &n)| m.len() != n)
        || !scenario.is_binary()
    {
        return Err(Error::ScenarioMismatch("measurements do not fit the scenario".into()));
    }
    let total: usize = measurements.iter().map(|m| m[0].dim()).product();
    let mut w = ComplexMatrix::zeros(total, total);
    for (xs, outs, c) in f.terms() {
        let op = kron_all(
            xs.iter()
                .zip(&outs)
                .enumerate()
                .map(|(k, (&xk, &ak))| measurements[k][xk].effect(ak)),
        );
        w.add_scaled(&op, c);
    }
    Ok(w)
}

fn check_observables(scenario: &Scenario, observables: &[Vec<Observable>]) -> Result<Vec<usize>> {
    if observables.len() != scenario.n_parties() {
        return Err(Error::ScenarioMismatch(format!(
            "{} parties of observables for {} parties",
            observables.len(),
            scenario.n_parties()
        )));
    }
    let mut dims = Vec::with_capacity(observables.len());
    for (k, (obs, &n)) in observables.iter().zip(scenario.inputs()).enumerate() {
        if obs.len() != n {
            return Err(Error::ScenarioMismatch(format!(
                "party {k} has {} observables for {n} inputs",
                obs.len()
            )));
        }
        let d = obs[0].dim();
        if obs.iter().any(|o| o.dim() != d) {
            return Err(Error::DimensionMismatch(format!("party {k} observables differ in dimension")));
        }
        dims.push(d);
    }
    let total: usize = dims.iter().product();
    if total > MAX_DIM {
        return Err(Error::DimensionMismatch(format!("total dimension {total} exceeds {MAX_DIM}")));
    }
    Ok(dims)
}

/// |Φ+⟩ = (|00⟩ + |11⟩)/√2.
pub fn phi_plus() -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)]
}
