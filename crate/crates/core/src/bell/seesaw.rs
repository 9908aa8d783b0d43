//! Seesaw lower bounds on quantum values of binary-output Bell functionals.
//!
//! Each sweep updates every party's observables to the sign of its effective
//! operator with everything else held fixed, then (when the state is free)
//! replaces the state by the top eigenvector of the Bell operator. Every step
//! is an exact partial maximization, so the objective never decreases.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bell::functional::BellFunctional;
use crate::bell::quantum::QuantumStrategy;
use crate::error::{Error, Result};
use crate::qlinalg::{
    kron_all, sign_decomposition, top_eigenpair, ComplexMatrix, DensityMatrix, Observable, C64,
    MAX_DIM,
};

const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SeesawOptions {
    pub seed: u64,
    pub restarts: usize,
    pub iters: usize,
    /// Stop once a sweep gains less than this.
    pub tol: f64,
    /// `(party, input)` slots restricted to the trivial observables ±I.
    pub classical_slots: Vec<(usize, usize)>,
    /// Keep observables real (the zx plane for qubits).
    pub real_plane: bool,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 20,
            iters: 200,
            tol: 1e-10,
            classical_slots: Vec::new(),
            real_plane: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeesawResult {
    pub value: f64,
    pub strategy: QuantumStrategy,
    pub observables: Vec<Vec<Observable>>,
    pub state: Vec<C64>,
    /// Objective after each sweep of the winning restart.
    pub history: Vec<f64>,
    pub restart_values: Vec<f64>,
}

/// A fixed pure state paired with the functional evaluated on it.
#[derive(Debug, Clone)]
pub struct FixedStateBlock {
    pub functional: BellFunctional,
    pub state: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct FixedStateResult {
    pub value: f64,
    pub observables: Vec<Vec<Observable>>,
    pub history: Vec<f64>,
    pub restart_values: Vec<f64>,
}

/// Best seesaw value of `f` over pure states on `local_dims` and two-outcome
/// projective measurements, across `opts.restarts` random starts.
pub fn seesaw(f: &BellFunctional, local_dims: &[usize], opts: &SeesawOptions) -> Result<SeesawResult> {
    let engine = Engine::new(
        std::slice::from_ref(f),
        local_dims,
        &opts.classical_slots,
        opts.real_plane,
    )?;
    let runs = run_restarts(&engine, opts, None, true)?;
    let (best, restart_values) = pick_best(runs);
    let observables = to_observables(&best.observables)?;
    let state = best.states.into_iter().next().unwrap();
    let rho = DensityMatrix::from_pure(&state)?;
    let strategy = QuantumStrategy::from_observables(rho, local_dims.to_vec(), &observables)?;
    Ok(SeesawResult {
        value: best.value,
        strategy,
        observables,
        state,
        history: best.history,
        restart_values,
    })
}

/// Seesaw over observables only, shared across several fixed states; the
/// objective is the sum of each block's expectation.
pub fn seesaw_fixed_states(
    blocks: &[FixedStateBlock],
    local_dims: &[usize],
    opts: &SeesawOptions,
) -> Result<FixedStateResult> {
    seesaw_fixed_states_from(blocks, local_dims, opts, None)
}

/// As [`seesaw_fixed_states`], with `start` used as an extra first restart.
pub fn seesaw_fixed_states_from(
    blocks: &[FixedStateBlock],
    local_dims: &[usize],
    opts: &SeesawOptions,
    start: Option<&[Vec<Observable>]>,
) -> Result<FixedStateResult> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("no blocks".into()));
    }
    let functionals: Vec<BellFunctional> = blocks.iter().map(|b| b.functional.clone()).collect();
    let engine = Engine::new(&functionals, local_dims, &opts.classical_slots, opts.real_plane)?;
    for b in blocks {
        if b.state.len() != engine.total {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for total dimension {}",
                b.state.len(),
                engine.total
            )));
        }
    }
    let states: Vec<Vec<C64>> = blocks.iter().map(|b| b.state.clone()).collect();
    let start = start
        .map(|s| {
            engine.check_start(s)?;
            Ok::<_, Error>(
                s.iter()
                    .map(|p| p.iter().map(|o| o.matrix().clone()).collect())
                    .collect::<Vec<Vec<ComplexMatrix>>>(),
            )
        })
        .transpose()?;
    let runs = run_restarts(&engine, opts, Some((&states, start.as_ref())), false)?;
    let (best, restart_values) = pick_best(runs);
    Ok(FixedStateResult {
        value: best.value,
        observables: to_observables(&best.observables)?,
        history: best.history,
        restart_values,
    })
}

struct Run {
    value: f64,
    observables: Vec<Vec<ComplexMatrix>>,
    states: Vec<Vec<C64>>,
    history: Vec<f64>,
}

/// Per block and party: terms grouped by the other parties' inputs and
/// outputs, each group listing `(own input, own output, coefficient)`.
type Groups = BTreeMap<(Vec<usize>, Vec<usize>), Vec<(usize, usize, f64)>>;

struct Engine {
    dims: Vec<usize>,
    total: usize,
    inputs: Vec<usize>,
    terms: Vec<Vec<(Vec<usize>, Vec<usize>, f64)>>,
    groups: Vec<Vec<Groups>>,
    classical: Vec<Vec<bool>>,
    real_plane: bool,
    /// `slices[k][r]` lists the global indices with rest-index `r`, ordered
    /// by party k's digit.
    slices: Vec<Vec<Vec<usize>>>,
}

impl Engine {
    fn new(
        functionals: &[BellFunctional],
        dims: &[usize],
        classical_slots: &[(usize, usize)],
        real_plane: bool,
    ) -> Result<Self> {
        let scenario = functionals[0].scenario().clone();
        if functionals.iter().any(|f| f.scenario() != &scenario) {
            return Err(Error::ScenarioMismatch("blocks use different scenarios".into()));
        }
        if !scenario.is_binary() {
            return Err(Error::InvalidScenario("seesaw needs binary outputs".into()));
        }
        if dims.len() != scenario.n_parties() || dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "local dimensions {dims:?} for {} parties",
                scenario.n_parties()
            )));
        }
        let total: usize = dims.iter().product();
        if total > MAX_DIM {
            return Err(Error::DimensionMismatch(format!("total dimension {total} exceeds {MAX_DIM}")));
        }
        let n = dims.len();
        let inputs = scenario.inputs().to_vec();
        let mut classical: Vec<Vec<bool>> = inputs.iter().map(|&m| vec![false; m]).collect();
        for &(k, x) in classical_slots {
            if k >= n || x >= inputs[k] {
                return Err(Error::OutOfScenario(format!("classical slot ({k}, {x})")));
            }
            classical[k][x] = true;
        }

        let terms: Vec<Vec<(Vec<usize>, Vec<usize>, f64)>> =
            functionals.iter().map(|f| f.terms()).collect();
        let groups = terms
            .iter()
            .map(|ts| {
                (0..n)
                    .map(|k| {
                        let mut g: Groups = BTreeMap::new();
                        for (xs, outs, c) in ts {
                            let mut xr = xs.clone();
                            let mut ar = outs.clone();
                            xr[k] = 0;
                            ar[k] = 0;
                            g.entry((xr, ar)).or_default().push((xs[k], outs[k], *c));
                        }
                        g
                    })
                    .collect()
            })
            .collect();

        let slices = (0..n)
            .map(|k| {
                let rest = total / dims[k];
                let stride: usize = dims[k + 1..].iter().product();
                (0..rest)
                    .map(|r| {
                        let (hi, lo) = (r / stride, r % stride);
                        (0..dims[k])
                            .map(|d| (hi * dims[k] + d) * stride + lo)
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            dims: dims.to_vec(),
            total,
            inputs,
            terms,
            groups,
            classical,
            real_plane,
            slices,
        })
    }

    fn check_start(&self, start: &[Vec<Observable>]) -> Result<()> {
        if start.len() != self.dims.len()
            || start.iter().zip(&self.inputs).any(|(p, &m)| p.len() != m)
            || start
                .iter()
                .zip(&self.dims)
                .any(|(p, &d)| p.iter().any(|o| o.dim() != d))
        {
            return Err(Error::ScenarioMismatch("starting observables do not fit".into()));
        }
        Ok(())
    }

    fn random_observables(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<ComplexMatrix>> {
        self.dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                (0..self.inputs[k])
                    .map(|x| {
                        if self.classical[k][x] {
                            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            ComplexMatrix::identity(d).scale(s)
                        } else if d == 2 {
                            Observable::zx_plane(TAU * rng.random::<f64>()).matrix().clone()
                        } else {
                            let mut g = ComplexMatrix::zeros(d, d);
                            for r in 0..d {
                                for c in r..d {
                                    let v: f64 = rng.sample(StandardNormal);
                                    g[(r, c)] = C64::new(v, 0.0);
                                    g[(c, r)] = C64::new(v, 0.0);
                                }
                            }
                            sign_decomposition(&g).expect("symmetric by construction")
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn effect(o: &ComplexMatrix, a: usize) -> ComplexMatrix {
        let mut p = ComplexMatrix::identity(o.rows()).scale(0.5);
        p.add_scaled(o, if a == 0 { 0.5 } else { -0.5 });
        p
    }

    fn bell_operator(&self, block: usize, obs: &[Vec<ComplexMatrix>]) -> ComplexMatrix {
        let effects: Vec<Vec<[ComplexMatrix; 2]>> = obs
            .iter()
            .map(|p| p.iter().map(|o| [Self::effect(o, 0), Self::effect(o, 1)]).collect())
            .collect();
        let mut w = ComplexMatrix::zeros(self.total, self.total);
        for (xs, outs, c) in &self.terms[block] {
            let op = kron_all(
                xs.iter()
                    .zip(outs)
                    .enumerate()
                    .map(|(k, (&x, &a))| &effects[k][x][a]),
            );
            w.add_scaled(&op, *c);
        }
        w
    }

    fn value(&self, obs: &[Vec<ComplexMatrix>], states: &[Vec<C64>]) -> f64 {
        states
            .iter()
            .enumerate()
            .map(|(b, psi)| {
                let w = self.bell_operator(b, obs);
                let wpsi = w.apply(psi).unwrap();
                psi.iter().zip(&wpsi).map(|(p, q)| (p.conj() * q).re).sum::<f64>()
            })
            .sum()
    }

    /// Tr_¬k |φ⟩⟨ψ| as a `d_k × d_k` matrix.
    fn reduced_cross(&self, k: usize, phi: &[C64], psi: &[C64]) -> ComplexMatrix {
        let d = self.dims[k];
        let mut r = ComplexMatrix::zeros(d, d);
        for slice in &self.slices[k] {
            for (i, &gi) in slice.iter().enumerate() {
                let p = phi[gi];
                if p == C64::new(0.0, 0.0) {
                    continue;
                }
                for (j, &gj) in slice.iter().enumerate() {
                    r[(i, j)] += p * psi[gj].conj();
                }
            }
        }
        r
    }

    fn update_party(&self, k: usize, obs: &mut [Vec<ComplexMatrix>], states: &[Vec<C64>]) {
        let d = self.dims[k];
        let mut drive: Vec<ComplexMatrix> = (0..self.inputs[k]).map(|_| ComplexMatrix::zeros(d, d)).collect();
        let ids: Vec<ComplexMatrix> = self.dims.iter().map(|&dd| ComplexMatrix::identity(dd)).collect();
        for (b, psi) in states.iter().enumerate() {
            for ((xr, ar), members) in &self.groups[b][k] {
                let effects: Vec<ComplexMatrix> = (0..self.dims.len())
                    .map(|j| {
                        if j == k {
                            ids[j].clone()
                        } else {
                            Self::effect(&obs[j][xr[j]], ar[j])
                        }
                    })
                    .collect();
                let op = kron_all(effects.iter());
                let phi = op.apply(psi).unwrap();
                let r = self.reduced_cross(k, &phi, psi).hermitian_part();
                for &(x, a, c) in members {
                    drive[x].add_scaled(&r, if a == 0 { c } else { -c });
                }
            }
        }
        for (x, dx) in drive.into_iter().enumerate() {
            obs[k][x] = if self.classical[k][x] {
                let s = if dx.trace().re >= 0.0 { 1.0 } else { -1.0 };
                ComplexMatrix::identity(d).scale(s)
            } else {
                let dx = if self.real_plane { dx.real_part() } else { dx };
                sign_decomposition(&dx).expect("Hermitian drive")
            };
        }
    }

    fn run(&self, mut obs: Vec<Vec<ComplexMatrix>>, mut states: Vec<Vec<C64>>, free_state: bool, opts: &SeesawOptions) -> Run {
        let refresh_state = |obs: &[Vec<ComplexMatrix>], states: &mut Vec<Vec<C64>>| -> f64 {
            let w = self.bell_operator(0, obs);
            let (top, v) = top_eigenpair(&w).expect("Hermitian Bell operator");
            states[0] = v;
            top
        };
        let mut value = if free_state {
            refresh_state(&obs, &mut states)
        } else {
            self.value(&obs, &states)
        };
        let mut history = vec![value];
        for _ in 0..opts.iters {
            for k in 0..self.dims.len() {
                self.update_party(k, &mut obs, &states);
            }
            let next = if free_state {
                refresh_state(&obs, &mut states)
            } else {
                self.value(&obs, &states)
            };
            assert!(
                next >= value - MONOTONE_SLACK * value.abs().max(1.0),
                "seesaw objective decreased: {value} -> {next}"
            );
            history.push(next);
            let gain = next - value;
            value = value.max(next);
            if gain < opts.tol {
                break;
            }
        }
        Run {
            value,
            observables: obs,
            states,
            history,
        }
    }
}

fn run_restarts(
    engine: &Engine,
    opts: &SeesawOptions,
    fixed: Option<(&Vec<Vec<C64>>, Option<&Vec<Vec<ComplexMatrix>>>)>,
    free_state: bool,
) -> Result<Vec<Run>> {
    let restarts = opts.restarts.max(1);
    let initial_states = match fixed {
        Some((s, _)) => s.clone(),
        None => vec![vec![C64::new(0.0, 0.0); engine.total]],
    };
    let start = fixed.and_then(|(_, s)| s.cloned());
    let mut runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let obs = engine.random_observables(&mut rng);
            engine.run(obs, initial_states.clone(), free_state, opts)
        })
        .collect();
    if let Some(obs) = start {
        runs.insert(0, engine.run(obs, initial_states, free_state, opts));
    }
    Ok(runs)
}

/// Highest value wins; ties go to the lowest restart index.
fn pick_best(runs: Vec<Run>) -> (Run, Vec<f64>) {
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let run = runs.into_iter().nth(best).unwrap();
    (run, values)
}

fn to_observables(obs: &[Vec<ComplexMatrix>]) -> Result<Vec<Vec<Observable>>> {
    obs.iter()
        .map(|p| p.iter().map(|o| Observable::new(o.clone())).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::classical::classical_bound;
    use crate::bell::functional::{chsh, CorrelatorFunctional};
    use crate::bell::nosignaling::no_signaling_bound;
    use crate::bell::quantum::{bell_operator, quantum_behavior};
    use crate::bell::scenario::Scenario;
    use std::f64::consts::SQRT_2;

    #[test]
    fn chsh_reaches_tsirelson() {
        let f = chsh().to_probability_form();
        let r = seesaw(&f, &[2, 2], &SeesawOptions::default()).unwrap();
        assert!(r.value >= 2.0 * SQRT_2 - 1e-6, "{}", r.value);
        assert!(r.value <= 2.0 * SQRT_2 + 1e-9);
        // the returned strategy reproduces the value
        let b = quantum_behavior(&r.strategy).unwrap();
        assert!((f.evaluate(&b).unwrap() - r.value).abs() < 1e-9);
        // and it is the top eigenvalue of the Bell operator at those settings
        let w = bell_operator(&chsh(), &r.observables).unwrap();
        let (top, _) = top_eigenpair(&w).unwrap();
        assert!((top - r.value).abs() < 1e-9);
    }

    #[test]
    fn history_is_monotone() {
        let f = chsh().to_probability_form();
        let opts = SeesawOptions {
            restarts: 4,
            seed: 11,
            ..Default::default()
        };
        let r = seesaw(&f, &[2, 2], &opts).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn single_party_marginal() {
        let s = Scenario::uniform(1, 1, 2).unwrap();
        let mut f = CorrelatorFunctional::new(s).unwrap();
        f.add_term(vec![Some(0)], 1.0).unwrap();
        let r = seesaw(&f.to_probability_form(), &[2], &SeesawOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_in_seed() {
        let f = chsh().to_probability_form();
        let opts = SeesawOptions {
            restarts: 6,
            seed: 5,
            iters: 3,
            ..Default::default()
        };
        let a = seesaw(&f, &[2, 2], &opts).unwrap();
        let b = seesaw(&f, &[2, 2], &opts).unwrap();
        assert_eq!(a.restart_values, b.restart_values);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn classical_slots_fall_back_to_classical_value() {
        // with Bob's inputs forced to ±I, CHSH reduces to a one-party problem
        let f = chsh().to_probability_form();
        let opts = SeesawOptions {
            classical_slots: vec![(1, 0), (1, 1)],
            restarts: 5,
            ..Default::default()
        };
        let r = seesaw(&f, &[2, 2], &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn fixed_state_matches_direct_expectation() {
        let f = chsh().to_probability_form();
        let phi = crate::bell::quantum::phi_plus();
        let blocks = vec![FixedStateBlock {
            functional: f,
            state: phi,
        }];
        let opts = SeesawOptions {
            real_plane: true,
            ..Default::default()
        };
        let r = seesaw_fixed_states(&blocks, &[2, 2], &opts).unwrap();
        assert!((r.value - 2.0 * SQRT_2).abs() < 1e-8, "{}", r.value);
        for p in &r.observables {
            for o in p {
                assert!(o.matrix().data().iter().all(|z| z.im.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn sandwich_on_pairwise_sum() {
        let s = Scenario::uniform(3, 2, 2).unwrap();
        let mut f = CorrelatorFunctional::new(s).unwrap();
        for (i, j) in [(0, 1), (0, 2)] {
            for (x, y, c) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)] {
                let mut key = vec![None; 3];
                key[i] = Some(x);
                key[j] = Some(y);
                f.add_term(key, c).unwrap();
            }
        }
        let p = f.to_probability_form();
        let c = classical_bound(&p).unwrap().0;
        let ns = no_signaling_bound(&p).unwrap();
        let q = seesaw(&p, &[2, 2, 2], &SeesawOptions { restarts: 8, ..Default::default() })
            .unwrap()
            .value;
        assert!(c <= q + 1e-6 && q <= ns + 1e-6, "{c} {q} {ns}");
        // classical strategies already saturate the no-signaling value
        assert!((c - 4.0).abs() < 1e-12 && (q - 4.0).abs() < 1e-6, "{q}");
    }
}
