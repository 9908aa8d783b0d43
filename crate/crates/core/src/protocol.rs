//! Exact model of the dynamical swap protocol.
//!
//! A source prepares cosθ|00⟩ + sinθ|11⟩ on (A, B) and a single-qubit state
//! on C. Whichever party receives input 2 decides a permutation of the three
//! particles before distribution; that party then outputs a classical ±1 bit
//! with mean β instead of measuring. The other two measure qubit observables
//! for inputs 0 and 1.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::functional::CorrelatorFunctional;
use crate::bell::scenario::Scenario;
use crate::bell::seesaw::{seesaw_fixed_states_from, FixedStateBlock, SeesawOptions};
use crate::error::{Error, Result};
use crate::io::MatrixDoc;
use crate::qlinalg::{
    expectation_of, kron_all, kron_vec, permutation_operator, ComplexMatrix,
    DensityMatrix, Observable, C64,
};
use crate::sampler::CorrelatorTable;

/// The twelve input triples of the tripartite functional, grouped by the
/// party holding input 2 (C, then B, then A).
pub const TRIPLES: [[usize; 3]; 12] = [
    [0, 0, 2],
    [0, 1, 2],
    [1, 0, 2],
    [1, 1, 2],
    [0, 2, 0],
    [0, 2, 1],
    [1, 2, 0],
    [1, 2, 1],
    [2, 0, 0],
    [2, 0, 1],
    [2, 1, 0],
    [2, 1, 1],
];

/// The party whose input is 2. Triples with no or several 2s are rejected.
pub fn classical_party(inputs: &[usize; 3]) -> Result<usize> {
    let twos: Vec<usize> = (0..3).filter(|&k| inputs[k] == 2).collect();
    if twos.len() != 1 || inputs.iter().any(|&x| x > 2) {
        return Err(Error::InvalidDispatch(*inputs));
    }
    Ok(twos[0])
}

/// Source case encoding: 0 sends the pair to A and B, 1 to B and C, 2 to A
/// and C. Returns the party left with the classical setting.
pub fn party_of_case(case: usize) -> usize {
    [2, 0, 1][case]
}

pub fn case_of_party(party: usize) -> usize {
    [1, 2, 0][party]
}

#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub theta: f64,
    /// Weight of the pure pair in v·|Φ⟩⟨Φ| + (1 − v)·I/4.
    pub visibility: f64,
    pub base_state_c: DensityMatrix,
    /// Indexed by the party holding input 2; slot `s` of the distributed
    /// state receives particle `perm[s]`.
    pub swap_rules: [Vec<usize>; 3],
    /// `measurements[party][input]` for inputs 0 and 1.
    pub measurements: [[Observable; 2]; 3],
    /// Mean of each party's classical output under input 2.
    pub classical_bias: [f64; 3],
    /// Probabilities of the three source cases.
    pub case_probs: [f64; 3],
}

pub fn default_swap_rules() -> [Vec<usize>; 3] {
    [vec![2, 1, 0], vec![0, 2, 1], vec![0, 1, 2]]
}

/// A and C measure σz, σx; B measures (σz ± σx)/√2.
pub fn default_measurements() -> [[Observable; 2]; 3] {
    let b0 = Observable::zx_plane(std::f64::consts::FRAC_PI_4);
    let b1 = Observable::zx_plane(-std::f64::consts::FRAC_PI_4);
    [
        [Observable::sigma_z(), Observable::sigma_x()],
        [b0, b1],
        [Observable::sigma_z(), Observable::sigma_x()],
    ]
}

pub const EXPERIMENT_BIAS: f64 = 0.97;
pub const EXPERIMENT_CASE_PROBS: [f64; 3] = [0.33549, 0.33241, 0.33210];

impl ProtocolSpec {
    pub fn paper_default() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_4,
            visibility: 1.0,
            base_state_c: DensityMatrix::basis(2, 0).unwrap(),
            swap_rules: default_swap_rules(),
            measurements: default_measurements(),
            classical_bias: [1.0; 3],
            case_probs: [1.0 / 3.0; 3],
        }
    }

    pub fn experiment() -> Self {
        Self {
            classical_bias: [EXPERIMENT_BIAS; 3],
            case_probs: EXPERIMENT_CASE_PROBS,
            ..Self::paper_default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-default" => Ok(Self::paper_default()),
            "experiment" => Ok(Self::experiment()),
            other => Err(Error::InvalidProtocol(format!("unknown preset {other:?}"))),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_sin2theta(self, s: f64) -> Self {
        self.with_theta(0.5 * s.clamp(-1.0, 1.0).asin())
    }

    pub fn sin2theta(&self) -> f64 {
        (2.0 * self.theta).sin()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidTheta(self.theta));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidProtocol(format!("visibility {}", self.visibility)));
        }
        if self.base_state_c.dim() != 2 {
            return Err(Error::InvalidProtocol("base state of C must be a qubit".into()));
        }
        for rule in &self.swap_rules {
            permutation_operator(rule, &[2, 2, 2])
                .map_err(|_| Error::InvalidProtocol(format!("swap rule {rule:?} is not a permutation")))?;
        }
        if self.measurements.iter().flatten().any(|o| o.dim() != 2) {
            return Err(Error::InvalidProtocol("measurements must be qubit observables".into()));
        }
        if let Some(b) = self.classical_bias.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(Error::InvalidProtocol(format!("classical bias {b} outside [-1, 1]")));
        }
        let total: f64 = self.case_probs.iter().sum();
        if self.case_probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProtocol(format!(
                "case probabilities {:?} must be nonnegative and sum to 1",
                self.case_probs
            )));
        }
        Ok(())
    }
}

/// cosθ|00⟩ + sinθ|11⟩.
pub fn epr_ket(theta: f64) -> Result<Vec<C64>> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidTheta(theta));
    }
    let (s, c) = theta.sin_cos();
    let z = C64::new(0.0, 0.0);
    Ok(vec![C64::new(c, 0.0), z, z, C64::new(s, 0.0)])
}

pub fn epr_state(theta: f64) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&epr_ket(theta)?)
}

/// The two-qubit state the source emits, with white noise mixed in.
pub fn pair_state(spec: &ProtocolSpec) -> Result<DensityMatrix> {
    let pure = epr_state(spec.theta)?;
    if spec.visibility == 1.0 {
        return Ok(pure);
    }
    pure.mix(&DensityMatrix::maximally_mixed(4)?, spec.visibility)
}

/// State distributed for a triple holding exactly one 2.
pub fn dispatch_state(spec: &ProtocolSpec, inputs: [usize; 3]) -> Result<DensityMatrix> {
    let k = classical_party(&inputs)?;
    dispatch_for_party(spec, k)
}

/// State distributed when party `k` holds the classical setting.
pub fn dispatch_for_party(spec: &ProtocolSpec, k: usize) -> Result<DensityMatrix> {
    spec.validate()?;
    let rho = pair_state(spec)?.tensor(&spec.base_state_c);
    let p = permutation_operator(&spec.swap_rules[k], &[2, 2, 2])?;
    rho.conjugate(&p)
}

/// Pure dispatched state with C prepared in |0⟩. The classical party's slot
/// never enters a correlator, so this stands in for any base state of C.
pub fn dispatch_ket(spec: &ProtocolSpec, k: usize) -> Result<Vec<C64>> {
    spec.validate()?;
    let zero = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let ket = kron_vec(&epr_ket(spec.theta)?, &zero);
    permutation_operator(&spec.swap_rules[k], &[2, 2, 2])?.apply(&ket)
}

/// β_k · Tr[ρ_dispatch (O ⊗ O ⊗ I)] with the identity in the classical slot.
pub fn exact_correlator(spec: &ProtocolSpec, inputs: [usize; 3]) -> Result<f64> {
    exact_correlator_with(spec, &spec.measurements, inputs)
}

fn exact_correlator_with(
    spec: &ProtocolSpec,
    measurements: &[[Observable; 2]; 3],
    inputs: [usize; 3],
) -> Result<f64> {
    let k = classical_party(&inputs)?;
    let rho = dispatch_for_party(spec, k)?;
    let id = ComplexMatrix::identity(2);
    let op = kron_all((0..3).map(|j| {
        if j == k {
            &id
        } else {
            measurements[j][inputs[j]].matrix()
        }
    }));
    Ok(spec.classical_bias[k] * expectation_of(&rho, &op)?)
}

/// The twelve exact correlators as a zero-error table.
pub fn exact_correlators(spec: &ProtocolSpec) -> Result<CorrelatorTable> {
    let mut table = CorrelatorTable::default();
    for t in TRIPLES {
        table.insert_exact(t, exact_correlator(spec, t)?);
    }
    Ok(table)
}

/// The 12-term functional's scenario: three parties, inputs {0, 1, 2}.
pub fn protocol_scenario() -> Scenario {
    Scenario::uniform(3, 3, 2).unwrap()
}

fn protocol_terms(f: &CorrelatorFunctional) -> Result<Vec<([usize; 3], f64)>> {
    if f.scenario() != &protocol_scenario() {
        return Err(Error::ScenarioMismatch(
            "protocol functionals live on 3 parties with inputs {0, 1, 2}".into(),
        ));
    }
    let mut out = Vec::new();
    for (key, c) in f.terms() {
        if c == 0.0 {
            continue;
        }
        if key.iter().any(|x| x.is_none()) {
            return Err(Error::OutOfScenario(format!("term {key:?} is not a full triple")));
        }
        let t = [key[0].unwrap(), key[1].unwrap(), key[2].unwrap()];
        classical_party(&t)?;
        out.push((t, c));
    }
    Ok(out)
}

/// Σ coeff × exact correlator over the functional's triples.
pub fn exact_bell_value(spec: &ProtocolSpec, f: &CorrelatorFunctional) -> Result<f64> {
    bell_value_with(spec, f, &spec.measurements)
}

fn bell_value_with(
    spec: &ProtocolSpec,
    f: &CorrelatorFunctional,
    measurements: &[[Observable; 2]; 3],
) -> Result<f64> {
    let mut acc = 0.0;
    for (t, c) in protocol_terms(f)? {
        acc += c * exact_correlator_with(spec, measurements, t)?;
    }
    Ok(acc)
}

/// Value of the 12-term functional under the default measurements:
/// √2(1 + s)(β_A + β_C) + (1 − s)β_B with s = sin 2θ.
pub fn closed_form_bell_value(theta: f64, bias: [f64; 3]) -> f64 {
    let s = (2.0 * theta).sin();
    std::f64::consts::SQRT_2 * (1.0 + s) * (bias[0] + bias[2]) + (1.0 - s) * bias[1]
}

/// Per classical party: the functional restricted to that party's block,
/// written on the two quantum parties' settings with β folded in.
pub fn protocol_blocks(spec: &ProtocolSpec, f: &CorrelatorFunctional) -> Result<Vec<FixedStateBlock>> {
    let terms = protocol_terms(f)?;
    let s = Scenario::uniform(3, 2, 2).unwrap();
    let mut blocks = Vec::new();
    for k in 0..3 {
        let mut g = CorrelatorFunctional::new(s.clone())?;
        let mut any = false;
        for (t, c) in terms.iter().filter(|(t, _)| t[k] == 2) {
            let key = (0..3).map(|j| if j == k { None } else { Some(t[j]) }).collect();
            g.add_term(key, c * spec.classical_bias[k])?;
            any = true;
        }
        if any {
            blocks.push(FixedStateBlock {
                functional: g.to_probability_form(),
                state: dispatch_ket(spec, k)?,
            });
        }
    }
    if blocks.is_empty() {
        return Err(Error::InvalidFunctional("functional has no protocol terms".into()));
    }
    Ok(blocks)
}

#[derive(Debug, Clone)]
pub struct OptimizedMeasurements {
    pub value: f64,
    pub measurements: [[Observable; 2]; 3],
}

/// Protocol seesaw defaults: observables restricted to the zx plane.
pub fn protocol_seesaw_options(seed: u64) -> SeesawOptions {
    SeesawOptions {
        seed,
        real_plane: true,
        ..SeesawOptions::default()
    }
}

/// Seesaw over each party's two qubit observables, shared by all dispatch
/// cases, with the spec's own measurements as one of the starting points.
pub fn optimize_protocol_measurements(
    spec: &ProtocolSpec,
    f: &CorrelatorFunctional,
    opts: &SeesawOptions,
) -> Result<OptimizedMeasurements> {
    let blocks = protocol_blocks(spec, f)?;
    let start: Vec<Vec<Observable>> = spec.measurements.iter().map(|m| m.to_vec()).collect();
    let r = seesaw_fixed_states_from(&blocks, &[2, 2, 2], opts, Some(&start))?;
    let m = &r.observables;
    let measurements = [
        [m[0][0].clone(), m[0][1].clone()],
        [m[1][0].clone(), m[1][1].clone()],
        [m[2][0].clone(), m[2][1].clone()],
    ];
    // report the value through the exact dispatch model
    let value = bell_value_with(&ProtocolSpec { visibility: 1.0, ..spec.clone() }, f, &measurements)?;
    Ok(OptimizedMeasurements { value, measurements })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOracleResult {
    pub value: f64,
    /// zx-plane angles `[party][input]`.
    pub angles: [[f64; 2]; 3],
}

/// Independent check of the optimized value: planar observables at angle α
/// give ⟨O(α) ⊗ O(γ)⟩ = v(cosα cosγ + s sinα sinγ) on the pair. A and B
/// angles are scanned on a `steps`-point grid and refined by pattern
/// search; C's angles are optimal in closed form (norm of its drive).
/// Only the default swap rules are supported.
pub fn grid_oracle(spec: &ProtocolSpec, f: &CorrelatorFunctional, steps: usize) -> Result<GridOracleResult> {
    spec.validate()?;
    if spec.swap_rules != default_swap_rules() {
        return Err(Error::InvalidProtocol("grid oracle assumes the default swap rules".into()));
    }
    if steps < 4 {
        return Err(Error::InvalidArgument("grid needs at least 4 steps".into()));
    }
    let terms = protocol_terms(f)?;
    let s = spec.sin2theta();
    let v = spec.visibility;
    let beta = spec.classical_bias;

    let evaluate = |ab: &[f64; 4]| -> (f64, [f64; 2]) {
        let (a, b) = ([ab[0], ab[1]], [ab[2], ab[3]]);
        let mut value = 0.0;
        let mut drive = [[0.0f64; 2]; 2];
        for &(t, c) in &terms {
            let k = classical_party(&t).unwrap();
            let w = c * beta[k] * v;
            match k {
                2 => {
                    let (x, y) = (a[t[0]], b[t[1]]);
                    value += w * (x.cos() * y.cos() + s * x.sin() * y.sin());
                }
                1 => {
                    let x = a[t[0]];
                    drive[t[2]][0] += w * x.cos();
                    drive[t[2]][1] += w * s * x.sin();
                }
                _ => {
                    let y = b[t[1]];
                    drive[t[2]][0] += w * y.cos();
                    drive[t[2]][1] += w * s * y.sin();
                }
            }
        }
        let mut gamma = [0.0; 2];
        for z in 0..2 {
            let [dc, ds] = drive[z];
            value += dc.hypot(ds);
            gamma[z] = ds.atan2(dc);
        }
        (value, gamma)
    };

    let step = TAU / steps as f64;
    let mut coarse: Vec<(f64, [f64; 4])> = (0..steps)
        .into_par_iter()
        .map(|i0| {
            let mut best: Vec<(f64, [f64; 4])> = Vec::new();
            for i1 in 0..steps {
                for j0 in 0..steps {
                    for j1 in 0..steps {
                        let ab = [i0 as f64 * step, i1 as f64 * step, j0 as f64 * step, j1 as f64 * step];
                        let (val, _) = evaluate(&ab);
                        keep_top(&mut best, (val, ab), 4);
                    }
                }
            }
            best
        })
        .flatten()
        .collect();
    coarse.sort_by(|x, y| y.0.total_cmp(&x.0));
    coarse.truncate(8);

    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for (val, mut ab) in coarse {
        let mut cur = val;
        let mut h = step / 2.0;
        while h > 1e-10 {
            let mut improved = false;
            for i in 0..4 {
                for d in [h, -h] {
                    let mut trial = ab;
                    trial[i] += d;
                    let (tv, _) = evaluate(&trial);
                    if tv > cur + 1e-15 {
                        cur = tv;
                        ab = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                h /= 2.0;
            }
        }
        if cur > best.0 {
            best = (cur, ab);
        }
    }
    let (value, gamma) = evaluate(&best.1);
    Ok(GridOracleResult {
        value,
        angles: [[best.1[0], best.1[1]], [best.1[2], best.1[3]], gamma],
    })
}

fn keep_top(best: &mut Vec<(f64, [f64; 4])>, cand: (f64, [f64; 4]), k: usize) {
    if best.len() < k {
        best.push(cand);
    } else {
        let (idx, worst) = best
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, w)| (i, w.0))
            .unwrap();
        if cand.0 > worst {
            best[idx] = cand;
        }
    }
}

/// How the Bell value is obtained at each scan point.
#[derive(Debug, Clone)]
pub enum ScanMode {
    /// The spec's own measurements.
    Fixed,
    /// Seesaw-optimized measurements.
    Optimized(SeesawOptions),
    /// The planar grid oracle with the given step count.
    Oracle(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    /// `(sin 2θ, value)` at every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
    /// Smallest sin 2θ with value above the bound, refined to 1e-6.
    pub threshold: Option<f64>,
    /// Whether a non-violating point below the threshold was actually seen.
    pub bracketed: bool,
    pub bound: f64,
    /// Grid points where the value dropped relative to the previous one.
    pub monotonicity_violations: Vec<f64>,
}

/// Strict margin for "value exceeds the bound".
pub const VIOLATION_MARGIN: f64 = 1e-9;
pub const THRESHOLD_RESOLUTION: f64 = 1e-6;

pub fn protocol_value(spec: &ProtocolSpec, f: &CorrelatorFunctional, mode: &ScanMode) -> Result<f64> {
    match mode {
        ScanMode::Fixed => exact_bell_value(spec, f),
        ScanMode::Optimized(opts) => Ok(optimize_protocol_measurements(spec, f, opts)?.value),
        ScanMode::Oracle(steps) => Ok(grid_oracle(spec, f, *steps)?.value),
    }
}

/// Bell value along an ascending grid of sin 2θ values and the first
/// crossing of `bound`, refined by bisection.
pub fn theta_threshold_scan(
    template: &ProtocolSpec,
    f: &CorrelatorFunctional,
    grid: &[f64],
    mode: &ScanMode,
    bound: f64,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sin 2θ grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(Error::InvalidArgument(
            "grid must be strictly ascending within (0, 1]".into(),
        ));
    }
    let value_at = |s: f64| protocol_value(&template.clone().with_sin2theta(s), f, mode);
    let values: Vec<f64> = grid.iter().map(|&s| value_at(s)).collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();
    let monotonicity_violations = curve
        .windows(2)
        .filter(|w| w[1].1 < w[0].1 - 1e-7)
        .map(|w| w[1].0)
        .collect();

    let violates = |v: f64| v > bound + VIOLATION_MARGIN;
    let first = values.iter().position(|&v| violates(v));
    let (threshold, bracketed) = match first {
        None => (None, false),
        Some(i) => {
            let mut lo = if i == 0 { 0.0 } else { grid[i - 1] };
            let mut hi = grid[i];
            let mut bracketed = i > 0;
            while hi - lo > THRESHOLD_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if violates(value_at(mid)?) {
                    hi = mid;
                } else {
                    lo = mid;
                    bracketed = true;
                }
            }
            (Some(hi), bracketed)
        }
    };
    Ok(ScanResult {
        curve,
        threshold,
        bracketed,
        bound,
        monotonicity_violations,
    })
}

/// Visibility v* at which the value, affine in v, meets `bound`.
pub fn critical_visibility(
    spec: &ProtocolSpec,
    f: &CorrelatorFunctional,
    measurements: &[[Observable; 2]; 3],
    bound: f64,
) -> Result<f64> {
    let at = |v: f64| {
        bell_value_with(
            &ProtocolSpec {
                visibility: v,
                ..spec.clone()
            },
            f,
            measurements,
        )
    };
    let one = at(1.0)?;
    let zero = at(0.0)?;
    solve_affine(zero, one, bound)
}

fn solve_affine(zero: f64, one: f64, bound: f64) -> Result<f64> {
    if one <= bound {
        return Err(Error::NoViolation(format!("value {one} at full visibility does not exceed {bound}")));
    }
    Ok(((bound - zero) / (one - zero)).max(0.0))
}

/// Critical visibility of a bipartite functional on the Werner state
/// v|Φ+⟩⟨Φ+| + (1 − v)I/4 for the given observables.
pub fn bipartite_critical_visibility(
    f: &CorrelatorFunctional,
    observables: &[Vec<Observable>],
    bound: f64,
) -> Result<f64> {
    let w = crate::bell::quantum::bell_operator(f, observables)?;
    if w.rows() != 4 {
        return Err(Error::DimensionMismatch("bipartite qubit functional expected".into()));
    }
    let phi = DensityMatrix::from_pure(&crate::bell::quantum::phi_plus())?;
    let one = expectation_of(&phi, &w)?;
    let zero = expectation_of(&DensityMatrix::maximally_mixed(4)?, &w)?;
    solve_affine(zero, one, bound)
}

/// Least-squares single β for the ideal θ = π/4 model against twelve
/// correlators listed in [`TRIPLES`] order. Returns β and the model values.
pub fn fit_single_bias(observed: &[f64; 12]) -> Result<(f64, [f64; 12])> {
    let spec = ProtocolSpec::paper_default();
    let mut model = [0.0; 12];
    for (m, t) in model.iter_mut().zip(TRIPLES) {
        *m = exact_correlator(&spec, t)?;
    }
    let num: f64 = model.iter().zip(observed).map(|(m, o)| m * o).sum();
    let den: f64 = model.iter().map(|m| m * m).sum();
    let beta = num / den;
    let mut fitted = [0.0; 12];
    for (f, m) in fitted.iter_mut().zip(model) {
        *f = beta * m;
    }
    Ok((beta, fitted))
}

/// (2/3)√(2/5) − 1/3.
pub fn threshold_formula_value() -> f64 {
    2.0 / 3.0 * (0.4f64).sqrt() - 1.0 / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseStateDoc {
    Named(String),
    Matrix(MatrixDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementsDoc {
    Named(String),
    /// `[party][input]` 2×2 Hermitian matrices.
    Explicit(Vec<Vec<MatrixDoc>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRulesDoc {
    pub x2: Vec<usize>,
    pub y2: Vec<usize>,
    pub z2: Vec<usize>,
}

/// JSON form of a protocol spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDoc {
    pub theta: f64,
    #[serde(default = "default_base_doc")]
    pub base_state_c: BaseStateDoc,
    #[serde(default)]
    pub swap_rules: Option<SwapRulesDoc>,
    #[serde(default = "default_measurements_doc")]
    pub measurements: MeasurementsDoc,
    pub classical_bias: [f64; 3],
    pub case_probs: [f64; 3],
    #[serde(default = "one")]
    pub visibility: f64,
}

fn default_base_doc() -> BaseStateDoc {
    BaseStateDoc::Named("zero".into())
}

fn default_measurements_doc() -> MeasurementsDoc {
    MeasurementsDoc::Named("eprn".into())
}

fn one() -> f64 {
    1.0
}

impl ProtocolDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_spec(spec: &ProtocolSpec) -> Self {
        let base = if spec.base_state_c == DensityMatrix::basis(2, 0).unwrap() {
            default_base_doc()
        } else if spec.base_state_c == DensityMatrix::basis(2, 1).unwrap() {
            BaseStateDoc::Named("one".into())
        } else {
            BaseStateDoc::Matrix(MatrixDoc::from_matrix(spec.base_state_c.matrix()))
        };
        let measurements = if spec.measurements == default_measurements() {
            default_measurements_doc()
        } else {
            MeasurementsDoc::Explicit(
                spec.measurements
                    .iter()
                    .map(|p| p.iter().map(|o| MatrixDoc::from_matrix(o.matrix())).collect())
                    .collect(),
            )
        };
        let swap_rules = if spec.swap_rules == default_swap_rules() {
            None
        } else {
            Some(SwapRulesDoc {
                x2: spec.swap_rules[0].clone(),
                y2: spec.swap_rules[1].clone(),
                z2: spec.swap_rules[2].clone(),
            })
        };
        Self {
            theta: spec.theta,
            base_state_c: base,
            swap_rules,
            measurements,
            classical_bias: spec.classical_bias,
            case_probs: spec.case_probs,
            visibility: spec.visibility,
        }
    }

    pub fn to_spec(&self) -> Result<ProtocolSpec> {
        let base_state_c = match &self.base_state_c {
            BaseStateDoc::Named(n) if n == "zero" => DensityMatrix::basis(2, 0)?,
            BaseStateDoc::Named(n) if n == "one" => DensityMatrix::basis(2, 1)?,
            BaseStateDoc::Named(n) => {
                return Err(Error::InvalidProtocol(format!("unknown base state {n:?}")))
            }
            BaseStateDoc::Matrix(m) => DensityMatrix::new(m.to_matrix()?)?,
        };
        let measurements = match &self.measurements {
            MeasurementsDoc::Named(n) if n == "eprn" || n == "paper-default" => default_measurements(),
            MeasurementsDoc::Named(n) => {
                return Err(Error::InvalidProtocol(format!("unknown measurement preset {n:?}")))
            }
            MeasurementsDoc::Explicit(parties) => {
                if parties.len() != 3 || parties.iter().any(|p| p.len() != 2) {
                    return Err(Error::InvalidProtocol(
                        "explicit measurements need 3 parties × 2 inputs".into(),
                    ));
                }
                let o = |k: usize, x: usize| Observable::new(parties[k][x].to_matrix()?);
                [[o(0, 0)?, o(0, 1)?], [o(1, 0)?, o(1, 1)?], [o(2, 0)?, o(2, 1)?]]
            }
        };
        let swap_rules = match &self.swap_rules {
            None => default_swap_rules(),
            Some(r) => [r.x2.clone(), r.y2.clone(), r.z2.clone()],
        };
        let spec = ProtocolSpec {
            theta: self.theta,
            visibility: self.visibility,
            base_state_c,
            swap_rules,
            measurements,
            classical_bias: self.classical_bias,
            case_probs: self.case_probs,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// ⟨Φ(θ)| O(α) ⊗ O(γ) |Φ(θ)⟩ for zx-plane observables.
pub fn planar_pair_correlator(theta: f64, alpha: f64, gamma: f64) -> f64 {
    let s = (2.0 * theta).sin();
    alpha.cos() * gamma.cos() + s * alpha.sin() * gamma.sin()
}
