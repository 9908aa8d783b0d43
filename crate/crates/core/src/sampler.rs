//! Monte Carlo trials of the swap protocol, coincidence tallies, the
//! correlator estimator with Poisson error bars, and a Hoeffding P-value.
//!
//! Trial `i` of a run with seed `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! on stream `i`, consuming in order: case (f64), the measuring parties'
//! inputs (u32 in 0..4), the quantum outcome pair (f64), the classical bit
//! (f64). Trials are therefore independent of how a run is chunked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bell::functional::CorrelatorFunctional;
use crate::error::{Error, Result};
use crate::io::sig10;
use crate::protocol::{
    case_of_party, classical_party, dispatch_for_party, party_of_case, ProtocolSpec, TRIPLES,
};
use crate::qlinalg::{embed_operator, expectation_of, kron};

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRecord {
    pub case: usize,
    pub inputs: [usize; 3],
    /// ±1 per party.
    pub outcomes: [i8; 3],
}

impl TrialRecord {
    fn check(&self) -> Result<()> {
        let k = classical_party(&self.inputs)
            .map_err(|_| Error::InconsistentRecord(format!("inputs {:?}", self.inputs)))?;
        if self.case > 2 || party_of_case(self.case) != k {
            return Err(Error::InconsistentRecord(format!(
                "case {} with inputs {:?}",
                self.case, self.inputs
            )));
        }
        if self.outcomes.iter().any(|&o| o != 1 && o != -1) {
            return Err(Error::InconsistentRecord(format!("outcomes {:?}", self.outcomes)));
        }
        Ok(())
    }
}

/// Born-rule outcome distributions for every case and input pair.
#[derive(Debug, Clone)]
pub struct SamplingModel {
    case_cdf: [f64; 3],
    /// `[case][u][v]` → probabilities of (+,+), (+,−), (−,+), (−,−) for the
    /// two measuring parties in party order.
    probs: [[[[f64; 4]; 2]; 2]; 3],
    bias: [f64; 3],
}

/// The two measuring parties when `k` holds the classical setting.
fn measuring_pair(k: usize) -> [usize; 2] {
    match k {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

fn triple_of(case: usize, u: usize, v: usize) -> [usize; 3] {
    let k = party_of_case(case);
    let [i, j] = measuring_pair(k);
    let mut t = [2; 3];
    t[i] = u;
    t[j] = v;
    t
}

impl SamplingModel {
    pub fn new(spec: &ProtocolSpec) -> Result<Self> {
        spec.validate()?;
        let mut probs = [[[[0.0; 4]; 2]; 2]; 3];
        for (case, per_case) in probs.iter_mut().enumerate() {
            let k = party_of_case(case);
            let [i, j] = measuring_pair(k);
            let rho = dispatch_for_party(spec, k)?;
            for u in 0..2 {
                for v in 0..2 {
                    for (cell, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                        let pa = spec.measurements[i][u].projector(a);
                        let pb = spec.measurements[j][v].projector(b);
                        let op = embed_operator(&kron(&pa, &pb), &[i, j], &[2, 2, 2])?;
                        per_case[u][v][cell] = expectation_of(&rho, &op)?.max(0.0);
                    }
                    let total: f64 = per_case[u][v].iter().sum();
                    for p in per_case[u][v].iter_mut() {
                        *p /= total;
                    }
                }
            }
        }
        let p = spec.case_probs;
        Ok(Self {
            case_cdf: [p[0], p[0] + p[1], 1.0],
            probs,
            bias: spec.classical_bias,
        })
    }

    pub fn outcome_probs(&self, case: usize, u: usize, v: usize) -> [f64; 4] {
        self.probs[case][u][v]
    }

    pub fn trial(&self, seed: u64, index: u64) -> TrialRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let uc: f64 = rng.random();
        let case = self.case_cdf.iter().position(|&c| uc < c).unwrap_or(2);
        let uv: u32 = rng.random_range(0..4);
        let (u, v) = ((uv >> 1) as usize, (uv & 1) as usize);
        let uo: f64 = rng.random();
        let p = &self.probs[case][u][v];
        let mut acc = 0.0;
        let mut cell = 3;
        for (n, pn) in p.iter().enumerate() {
            acc += pn;
            if uo < acc {
                cell = n;
                break;
            }
        }
        let k = party_of_case(case);
        let ucl: f64 = rng.random();
        let classical: i8 = if ucl < 0.5 * (1.0 + self.bias[k]) { 1 } else { -1 };
        let [i, j] = measuring_pair(k);
        let mut outcomes = [0i8; 3];
        outcomes[i] = if cell < 2 { 1 } else { -1 };
        outcomes[j] = if cell % 2 == 0 { 1 } else { -1 };
        outcomes[k] = classical;
        TrialRecord {
            case,
            inputs: triple_of(case, u, v),
            outcomes,
        }
    }
}

/// `n` trials, in trial-index order.
pub fn sample_trials(spec: &ProtocolSpec, n: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let model = SamplingModel::new(spec)?;
    Ok((0..n).into_par_iter().map(|i| model.trial(seed, i)).collect())
}

/// Coincidence tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountsTable {
    /// `[case][u][v]` → N^{++}, N^{+−}, N^{−+}, N^{−−} of the measuring pair.
    pub cells: [[[[u64; 4]; 2]; 2]; 3],
    /// `[case]` → N̂⁺, N̂⁻ of the classical output.
    pub nhat: [[u64; 2]; 3],
    pub trials: u64,
}

impl CountsTable {
    fn add_valid(&mut self, t: &TrialRecord) {
        let k = party_of_case(t.case);
        let [i, j] = measuring_pair(k);
        let cell = 2 * usize::from(t.outcomes[i] < 0) + usize::from(t.outcomes[j] < 0);
        self.cells[t.case][t.inputs[i]][t.inputs[j]][cell] += 1;
        self.nhat[t.case][usize::from(t.outcomes[k] < 0)] += 1;
        self.trials += 1;
    }

    pub fn add(&mut self, t: &TrialRecord) -> Result<()> {
        t.check()?;
        self.add_valid(t);
        Ok(())
    }

    pub fn merge(mut self, other: &CountsTable) -> CountsTable {
        for c in 0..3 {
            for u in 0..2 {
                for v in 0..2 {
                    for n in 0..4 {
                        self.cells[c][u][v][n] += other.cells[c][u][v][n];
                    }
                }
            }
            self.nhat[c][0] += other.nhat[c][0];
            self.nhat[c][1] += other.nhat[c][1];
        }
        self.trials += other.trials;
        self
    }

    pub fn cell(&self, triple: [usize; 3]) -> Result<([u64; 4], [u64; 2])> {
        let k = classical_party(&triple)?;
        let case = case_of_party(k);
        let [i, j] = measuring_pair(k);
        if triple[i] > 1 || triple[j] > 1 {
            return Err(Error::InvalidDispatch(triple));
        }
        Ok((self.cells[case][triple[i]][triple[j]], self.nhat[case]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,x,y,z,n_pp,n_pm,n_mp,n_mm,nhat_p,nhat_m\n");
        for case in 0..3 {
            for u in 0..2 {
                for v in 0..2 {
                    let t = triple_of(case, u, v);
                    let n = self.cells[case][u][v];
                    let h = self.nhat[case];
                    out.push_str(&format!(
                        "{case},{},{},{},{},{},{},{},{},{}\n",
                        t[0], t[1], t[2], n[0], n[1], n[2], n[3], h[0], h[1]
                    ));
                }
            }
        }
        out
    }
}

/// Exact tallies of a record stream; order-independent.
pub fn accumulate_counts<'a>(trials: impl IntoIterator<Item = &'a TrialRecord>) -> Result<CountsTable> {
    let mut table = CountsTable::default();
    for t in trials {
        table.add(t)?;
    }
    Ok(table)
}

/// Samples and tallies `n` trials in parallel chunks without storing them.
pub fn simulate_counts(spec: &ProtocolSpec, n: u64, seed: u64) -> Result<CountsTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let model = SamplingModel::new(spec)?;
    let chunks = n.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut table = CountsTable::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                table.add_valid(&model.trial(seed, i));
            }
            table
        })
        .reduce(CountsTable::default, |a, b| a.merge(&b)))
}

/// Single-threaded reference for [`simulate_counts`].
pub fn simulate_counts_serial(spec: &ProtocolSpec, n: u64, seed: u64) -> Result<CountsTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let model = SamplingModel::new(spec)?;
    let mut table = CountsTable::default();
    for i in 0..n {
        table.add_valid(&model.trial(seed, i));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelatorEntry {
    pub triple: [usize; 3],
    pub estimate: f64,
    pub stderr: f64,
    pub n_events: u64,
    /// No events in the cell or no classical signals in the case.
    pub empty: bool,
}

/// Correlators keyed by input triple, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorrelatorTable {
    entries: Vec<CorrelatorEntry>,
}

impl CorrelatorTable {
    pub fn insert(&mut self, entry: CorrelatorEntry) {
        match self.entries.iter_mut().find(|e| e.triple == entry.triple) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn insert_exact(&mut self, triple: [usize; 3], value: f64) {
        self.insert(CorrelatorEntry {
            triple,
            estimate: value,
            stderr: 0.0,
            n_events: 0,
            empty: false,
        });
    }

    /// Table from `(triple, estimate, stderr)` rows.
    pub fn from_values(rows: &[([usize; 3], f64, f64)]) -> Self {
        let mut t = Self::default();
        for &(triple, estimate, stderr) in rows {
            t.insert(CorrelatorEntry {
                triple,
                estimate,
                stderr,
                n_events: 0,
                empty: false,
            });
        }
        t
    }

    pub fn get(&self, triple: [usize; 3]) -> Option<&CorrelatorEntry> {
        self.entries.iter().find(|e| e.triple == triple)
    }

    pub fn entries(&self) -> &[CorrelatorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,estimate,stderr,n_events\n");
        for e in &self.entries {
            let (est, err) = if e.empty {
                (String::new(), String::new())
            } else {
                (sig10(e.estimate), sig10(e.stderr))
            };
            out.push_str(&format!(
                "{},{},{},{est},{err},{}\n",
                e.triple[0], e.triple[1], e.triple[2], e.n_events
            ));
        }
        out
    }
}

/// (Σ s_i N_i) / (Σ N_i) for signs s_i = ±1 and its Poisson delta-method
/// variance Σ (s_i − R)² N_i / N².
fn signed_ratio(counts: &[(u64, f64)]) -> (f64, f64) {
    let n: f64 = counts.iter().map(|(c, _)| *c as f64).sum();
    let r = counts.iter().map(|(c, s)| s * *c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|(c, s)| (s - r).powi(2) * *c as f64)
        .sum::<f64>()
        / (n * n);
    (r, var)
}

/// The protocol's product estimator for every triple, in table order.
pub fn estimate_correlators(counts: &CountsTable) -> CorrelatorTable {
    let mut table = CorrelatorTable::default();
    for triple in TRIPLES {
        let (cell, nhat) = counts.cell(triple).expect("protocol triple");
        let n_events: u64 = cell.iter().sum();
        if n_events == 0 || nhat[0] + nhat[1] == 0 {
            table.insert(CorrelatorEntry {
                triple,
                estimate: f64::NAN,
                stderr: f64::NAN,
                n_events,
                empty: true,
            });
            continue;
        }
        let (q, var_q) = signed_ratio(&[(cell[0], 1.0), (cell[1], -1.0), (cell[2], -1.0), (cell[3], 1.0)]);
        let (r, var_r) = signed_ratio(&[(nhat[0], 1.0), (nhat[1], -1.0)]);
        table.insert(CorrelatorEntry {
            triple,
            estimate: q * r,
            stderr: (r * r * var_q + q * q * var_r).sqrt(),
            n_events,
            empty: false,
        });
    }
    table
}

/// Σ coeff × estimate with independent-cell error propagation.
pub fn estimate_bell_value(table: &CorrelatorTable, f: &CorrelatorFunctional) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut var = 0.0;
    for (key, c) in f.terms() {
        if c == 0.0 {
            continue;
        }
        if key.len() != 3 || key.iter().any(|x| x.is_none()) {
            return Err(Error::OutOfScenario(format!("term {key:?} is not a full triple")));
        }
        let t = [key[0].unwrap(), key[1].unwrap(), key[2].unwrap()];
        let e = table.get(t).filter(|e| !e.empty).ok_or(Error::MissingTriple(t))?;
        value += c * e.estimate;
        var += c * c * e.stderr * e.stderr;
    }
    Ok((value, var.sqrt()))
}

/// Hoeffding tail for the parity game with `terms` questions: with
/// p̂ = 1/2 + observed/(2T) and p_c the same map of the classical bound,
/// p = exp(−2 N (p̂ − p_c)²) where N = n_per_term · T; 1 when p̂ ≤ p_c.
pub fn p_value(observed: f64, stderr: f64, n_per_term: f64, classical_bound: f64, terms: usize) -> f64 {
    if !observed.is_finite() || !stderr.is_finite() || terms == 0 || !(n_per_term > 0.0) {
        return 1.0;
    }
    let t = terms as f64;
    let p_hat = 0.5 + observed / (2.0 * t);
    let p_c = 0.5 + classical_bound / (2.0 * t);
    if p_hat <= p_c {
        return 1.0;
    }
    let n_tot = n_per_term * t;
    (-2.0 * n_tot * (p_hat - p_c).powi(2)).exp()
}

/// Standard error of a Bell value summed from `terms` correlators over
/// `n_total` trials, when every question is won with the probability that
/// the classical bound allows.
pub fn null_stderr(classical_bound: f64, terms: usize, n_total: f64) -> f64 {
    let t = terms as f64;
    let p_c = (0.5 + classical_bound / (2.0 * t)).clamp(0.0, 1.0);
    2.0 * t * (p_c * (1.0 - p_c) / n_total).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monogamy::tripartite_wired_chsh;
    use crate::protocol::{exact_bell_value, exact_correlators};

    fn counts_with(cell: [u64; 4], nhat: [u64; 2]) -> CountsTable {
        let mut t = CountsTable::default();
        t.cells[0][0][0] = cell;
        t.nhat[0] = nhat;
        t
    }

    #[test]
    fn estimator_examples() {
        let e = estimate_correlators(&counts_with([75, 0, 0, 25], [100, 0]));
        assert_eq!(e.get([0, 0, 2]).unwrap().estimate, 1.0);
        let e = estimate_correlators(&counts_with([50, 50, 0, 0], [100, 0]));
        assert_eq!(e.get([0, 0, 2]).unwrap().estimate, 0.0);
        let e = estimate_correlators(&counts_with([70, 10, 5, 15], [40, 40]));
        assert_eq!(e.get([0, 0, 2]).unwrap().estimate, 0.0);
        // unobserved cells are flagged
        assert!(e.get([0, 1, 2]).unwrap().empty);
    }

    #[test]
    fn delta_method_matches_closed_form() {
        let (r, var) = signed_ratio(&[(30, 1.0), (10, -1.0)]);
        assert_eq!(r, 0.5);
        let want = 4.0 * 30.0 * 10.0 / 40f64.powi(3);
        assert!((var - want).abs() < 1e-15);
    }

    #[test]
    fn degenerate_case_distribution() {
        let spec = ProtocolSpec {
            case_probs: [1.0, 0.0, 0.0],
            ..ProtocolSpec::paper_default()
        };
        let trials = sample_trials(&spec, 500, 3).unwrap();
        assert!(trials.iter().all(|t| t.inputs[2] == 2 && t.case == 0));
    }

    #[test]
    fn perfect_correlation_on_ac_pair() {
        let trials = sample_trials(&ProtocolSpec::paper_default(), 20_000, 4).unwrap();
        let hits: Vec<&TrialRecord> = trials.iter().filter(|t| t.inputs == [0, 2, 0]).collect();
        assert!(hits.len() > 1000);
        assert!(hits.iter().all(|t| t.outcomes[0] == t.outcomes[2]));
    }

    #[test]
    fn accumulation_is_order_independent() {
        let trials = sample_trials(&ProtocolSpec::experiment(), 3000, 8).unwrap();
        let a = accumulate_counts(&trials).unwrap();
        let mut rev = trials.clone();
        rev.reverse();
        assert_eq!(a, accumulate_counts(&rev).unwrap());
        assert_eq!(a, simulate_counts(&ProtocolSpec::experiment(), 3000, 8).unwrap());
        assert_eq!(accumulate_counts(&[]).unwrap(), CountsTable::default());
        let one = trials[0];
        let ten = vec![one; 10];
        let t = accumulate_counts(&ten).unwrap();
        assert_eq!(t.trials, 10);
        assert_eq!(t.cells.iter().flatten().flatten().flatten().filter(|&&c| c == 10).count(), 1);
    }

    #[test]
    fn inconsistent_records_rejected() {
        let bad = TrialRecord {
            case: 1,
            inputs: [0, 0, 2],
            outcomes: [1, 1, 1],
        };
        assert!(accumulate_counts(&[bad]).is_err());
        let bad = TrialRecord {
            case: 0,
            inputs: [0, 0, 2],
            outcomes: [1, 0, 1],
        };
        assert!(accumulate_counts(&[bad]).is_err());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let spec = ProtocolSpec::experiment();
        let a = simulate_counts(&spec, 100_000, 42).unwrap();
        let b = simulate_counts_serial(&spec, 100_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 100_000);
        assert_ne!(a, simulate_counts(&spec, 100_000, 43).unwrap());
    }

    #[test]
    fn case_frequencies_concentrate() {
        let c = simulate_counts(&ProtocolSpec::paper_default(), 1_000_000, 6).unwrap();
        for case in 0..3 {
            let n = c.nhat[case][0] + c.nhat[case][1];
            assert!((n as f64 / 1e6 - 1.0 / 3.0).abs() < 0.002);
        }
    }

    #[test]
    fn exact_table_reproduces_exact_value() {
        let f = tripartite_wired_chsh();
        for spec in [ProtocolSpec::paper_default(), ProtocolSpec::experiment().with_theta(0.3)] {
            let table = exact_correlators(&spec).unwrap();
            let (v, err) = estimate_bell_value(&table, &f).unwrap();
            assert!((v - exact_bell_value(&spec, &f).unwrap()).abs() < 1e-12);
            assert_eq!(err, 0.0);
        }
        let zero = CorrelatorTable::from_values(&TRIPLES.map(|t| (t, 0.0, 0.0)));
        assert_eq!(estimate_bell_value(&zero, &f).unwrap().0, 0.0);
        let mut partial = CorrelatorTable::default();
        partial.insert_exact([0, 0, 2], 1.0);
        assert!(matches!(estimate_bell_value(&partial, &f), Err(Error::MissingTriple(_))));
    }

    #[test]
    fn poisson_errors_match_bootstrap() {
        let spec = ProtocolSpec::experiment();
        let trials = sample_trials(&spec, 20_000, 17).unwrap();
        let table = estimate_correlators(&accumulate_counts(&trials).unwrap());
        let b = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(b); 12];
        for _ in 0..b {
            let mut c = CountsTable::default();
            for _ in 0..trials.len() {
                c.add_valid(&trials[rng.random_range(0..trials.len())]);
            }
            let e = estimate_correlators(&c);
            for (i, t) in TRIPLES.iter().enumerate() {
                samples[i].push(e.get(*t).unwrap().estimate);
            }
        }
        for (i, t) in TRIPLES.iter().enumerate() {
            let xs = &samples[i];
            let mean = xs.iter().sum::<f64>() / b as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();
            let poisson = table.get(*t).unwrap().stderr;
            assert!((poisson / sd - 1.0).abs() < 0.2, "{t:?}: {poisson} vs {sd}");
        }
    }

    #[test]
    fn p_value_examples() {
        assert_eq!(p_value(6.0, 0.01, 1000.0, 6.0, 12), 1.0);
        assert_eq!(p_value(5.0, 0.01, 1000.0, 6.0, 12), 1.0);
        // gap of 0.05 in win probability over 10^4 trials
        let observed = 6.0 + 0.05 * 2.0 * 12.0;
        let p = p_value(observed, 0.01, 1e4 / 12.0, 6.0, 12);
        assert!((p / (-50.0f64).exp() - 1.0).abs() < 1e-9);
        let p2 = p_value(observed, 0.01, 2e4 / 12.0, 6.0, 12);
        assert!((p2 / (p * p) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn null_stderr_scale() {
        // p_c = 3/4 for a 12-question game with bound 6
        let s = null_stderr(6.0, 12, 1e5);
        assert!((s - 24.0 * (0.1875f64 / 1e5).sqrt()).abs() < 1e-15);
        assert!((null_stderr(6.0, 12, 4e5) * 2.0 - s).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let c = simulate_counts(&ProtocolSpec::paper_default(), 1000, 1).unwrap();
        let csv = c.to_csv();
        assert!(csv.starts_with("case,x,y,z,n_pp,n_pm,n_mp,n_mm,nhat_p,nhat_m\n"));
        assert_eq!(csv.lines().count(), 13);
        let e = estimate_correlators(&c).to_csv();
        assert!(e.starts_with("x,y,z,estimate,stderr,n_events\n"));
        assert_eq!(e.lines().count(), 13);
    }
}
