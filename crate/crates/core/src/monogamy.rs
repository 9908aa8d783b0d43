//! Wired monogamy relations: a base Bell functional applied to every
//! index-ordered subset of parties in one larger experiment.

use serde::{Deserialize, Serialize};

use crate::bell::classical::classical_bound;
use crate::bell::functional::{BellFunctional, CorrelatorFunctional, FunctionalDoc};
use crate::bell::nosignaling::no_signaling_bound;
use crate::bell::scenario::Scenario;
use crate::error::{Error, Result};

/// Upper limit on the number of cells of a wired probability table.
pub const MAX_WIRED_CELLS: usize = 1 << 20;

const HOLDS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base: String,
    pub n: usize,
    pub m: usize,
    pub embedding: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonogamyRelation {
    pub functional: BellFunctional,
    /// Present when the base was given in correlator form.
    pub correlator: Option<CorrelatorFunctional>,
    pub bound: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonogamyReport {
    pub classical: f64,
    pub no_signaling: f64,
    pub bound: f64,
    pub holds: bool,
}

/// All `m`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < m - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m <= n {
        go(0, n, m, &mut Vec::new(), &mut out);
    }
    out
}

pub fn binomial(n: usize, m: usize) -> u128 {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    (0..m).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

const EMBEDDING: &str = "non-participating parties use input 0, outputs summed";

fn wired_scenario(base: &Scenario, n: usize) -> Result<Scenario> {
    let m = base.n_parties();
    if n < m {
        return Err(Error::InvalidArgument(format!("cannot wire {m} parties into {n}")));
    }
    if !base.is_uniform() {
        return Err(Error::InvalidScenario(
            "wiring needs every base party to share input and output counts".into(),
        ));
    }
    let cells = (base.inputs()[0] as u128 * base.outputs()[0] as u128).saturating_pow(n as u32);
    if cells > MAX_WIRED_CELLS as u128 {
        return Err(Error::GuardExceeded {
            what: "wired table cells",
            size: cells,
            limit: MAX_WIRED_CELLS as u128,
        });
    }
    Scenario::uniform(n, base.inputs()[0], base.outputs()[0])
}

/// Σ over all C(n, m) subsets of the m-partite `base`, with bound
/// c·C(n, m) where c is the base's computed classical bound.
pub fn wire_m_of_n(base: &BellFunctional, n: usize) -> Result<MonogamyRelation> {
    let bs = base.scenario();
    let m = bs.n_parties();
    let scenario = wired_scenario(bs, n)?;
    let mut f = BellFunctional::zero(scenario.clone());
    let n_out_rest: Vec<usize> = vec![bs.outputs()[0]; n];
    for subset in subsets(n, m) {
        let rest: Vec<usize> = (0..n).filter(|k| !subset.contains(k)).collect();
        let rest_radix: Vec<usize> = rest.iter().map(|&k| n_out_rest[k]).collect();
        let rest_count: usize = rest_radix.iter().product();
        for (x, a, c) in base.terms() {
            let mut xs = vec![0; n];
            let mut outs = vec![0; n];
            for (j, &k) in subset.iter().enumerate() {
                xs[k] = x[j];
                outs[k] = a[j];
            }
            for r in 0..rest_count {
                let digits = crate::bell::scenario::decode(r, &rest_radix);
                for (&k, &d) in rest.iter().zip(&digits) {
                    outs[k] = d;
                }
                f.add_term(&xs, &outs, c)?;
            }
        }
    }
    let c = classical_bound(base)?.0;
    let bound = c * binomial(n, m) as f64;
    Ok(MonogamyRelation {
        functional: f.with_declared_bound(Some(bound)),
        correlator: None,
        bound,
        provenance: Provenance {
            base: "probability functional".into(),
            n,
            m,
            embedding: EMBEDDING.into(),
        },
    })
}

/// [`wire_m_of_n`] for a correlator-form base; the relation also carries the
/// wired correlator functional.
pub fn wire_correlator_m_of_n(base: &CorrelatorFunctional, n: usize) -> Result<MonogamyRelation> {
    let m = base.scenario().n_parties();
    let mut rel = wire_m_of_n(&base.to_probability_form(), n)?;
    let mut wired = CorrelatorFunctional::new(rel.functional.scenario().clone())?;
    for subset in subsets(n, m) {
        for (key, c) in base.terms() {
            let mut full = vec![None; n];
            for (j, &k) in subset.iter().enumerate() {
                full[k] = key[j];
            }
            wired.add_term(full, c)?;
        }
    }
    rel.correlator = Some(wired.with_declared_bound(Some(rel.bound)));
    rel.provenance.base = "correlator functional".into();
    Ok(rel)
}

/// Pairwise wiring of a bipartite base over `n` parties.
pub fn wire_pairwise(base: &CorrelatorFunctional, n: usize) -> Result<MonogamyRelation> {
    if base.scenario().n_parties() != 2 {
        return Err(Error::InvalidFunctional(format!(
            "pairwise wiring needs a bipartite base, got {} parties",
            base.scenario().n_parties()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("pairwise wiring needs n ≥ 2".into()));
    }
    wire_correlator_m_of_n(base, n)
}

/// The 12-term tripartite functional: three CHSH blocks, one per party
/// holding the classical setting 2, each with signs (+, +, +, −) and the
/// minus on the (1, 1) pair of quantum settings. Declared bound 6.
pub fn tripartite_wired_chsh() -> CorrelatorFunctional {
    let s = Scenario::uniform(3, 3, 2).unwrap();
    let mut f = CorrelatorFunctional::new(s).unwrap();
    for classical in [2usize, 1, 0] {
        for (u, v, c) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)] {
            let mut key = [0usize; 3];
            let others: Vec<usize> = (0..3).filter(|&k| k != classical).collect();
            key[others[0]] = u;
            key[others[1]] = v;
            key[classical] = 2;
            f.add_term(key.iter().map(|&x| Some(x)).collect(), c).unwrap();
        }
    }
    f.with_declared_bound(Some(6.0))
}

/// Classical and no-signaling maxima of the relation's functional, compared
/// against its bound.
pub fn verify_monogamy(r: &MonogamyRelation) -> Result<MonogamyReport> {
    let classical = classical_bound(&r.functional)?.0;
    let no_signaling = no_signaling_bound(&r.functional)?;
    Ok(MonogamyReport {
        classical,
        no_signaling,
        bound: r.bound,
        holds: no_signaling <= r.bound + HOLDS_TOL,
    })
}

/// A relation built directly from a functional and an explicit bound.
pub fn relation_from_functional(f: &CorrelatorFunctional, bound: f64, base: &str) -> MonogamyRelation {
    let n = f.scenario().n_parties();
    MonogamyRelation {
        functional: f.to_probability_form().with_declared_bound(Some(bound)),
        correlator: Some(f.clone().with_declared_bound(Some(bound))),
        bound,
        provenance: Provenance {
            base: base.into(),
            n,
            m: n,
            embedding: "identity".into(),
        },
    }
}

/// JSON: the functional document plus `bound` and `provenance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonogamyDoc {
    #[serde(flatten)]
    pub functional: FunctionalDoc,
    pub bound: f64,
    pub provenance: Provenance,
}

impl MonogamyDoc {
    pub fn from_relation(r: &MonogamyRelation) -> Self {
        let functional = match &r.correlator {
            Some(c) => FunctionalDoc::from_correlator(c),
            None => FunctionalDoc::from_probability(&r.functional),
        };
        Self {
            functional,
            bound: r.bound,
            provenance: r.provenance.clone(),
        }
    }

    pub fn to_relation(&self) -> Result<MonogamyRelation> {
        Ok(MonogamyRelation {
            functional: self.functional.to_functional()?,
            correlator: self.functional.to_correlator()?,
            bound: self.bound,
            provenance: self.provenance.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::behavior::Behavior;
    use crate::bell::functional::chsh;
    use proptest::prelude::*;

    #[test]
    fn subsets_and_binomials() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(2, 3).len(), 0);
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn single_pair_has_no_monogamy() {
        let r = wire_pairwise(&chsh(), 2).unwrap();
        assert_eq!(r.bound, 2.0);
        let rep = verify_monogamy(&r).unwrap();
        assert_eq!(rep.classical, 2.0);
        assert!((rep.no_signaling - 4.0).abs() < 1e-9);
        assert!(!rep.holds);
    }

    #[test]
    fn three_party_collapse() {
        let r = wire_pairwise(&chsh(), 3).unwrap();
        assert_eq!(r.bound, 6.0);
        assert_eq!(r.correlator.as_ref().unwrap().num_terms(), 12);
        let rep = verify_monogamy(&r).unwrap();
        assert_eq!(rep.classical, 6.0);
        assert!((rep.no_signaling - 6.0).abs() < 1e-8);
        assert!(rep.holds);
    }

    #[test]
    fn four_party_collapse() {
        let r = wire_pairwise(&chsh(), 4).unwrap();
        assert_eq!(r.bound, 12.0);
        let rep = verify_monogamy(&r).unwrap();
        assert_eq!(rep.classical, 12.0);
        assert!((rep.no_signaling - 12.0).abs() < 1e-8, "{}", rep.no_signaling);
    }

    #[test]
    fn m_of_n_matches_pairwise() {
        let a = wire_m_of_n(&chsh().to_probability_form(), 3).unwrap();
        let b = wire_pairwise(&chsh(), 3).unwrap();
        assert_eq!(a.functional.coeffs(), b.functional.coeffs());
        assert_eq!(a.bound, b.bound);
    }

    #[test]
    fn identity_wiring() {
        let base = tripartite_wired_chsh();
        let r = wire_correlator_m_of_n(&base, 3).unwrap();
        assert_eq!(r.bound, 6.0);
        assert_eq!(r.functional.coeffs(), base.to_probability_form().coeffs());
    }

    #[test]
    fn tripartite_terms() {
        let f = tripartite_wired_chsh();
        assert_eq!(f.num_terms(), 12);
        assert_eq!(f.full_coefficient(&[1, 1, 2]), -1.0);
        assert_eq!(f.full_coefficient(&[0, 2, 0]), 1.0);
        assert_eq!(f.full_coefficient(&[1, 2, 1]), -1.0);
        assert_eq!(f.full_coefficient(&[2, 1, 1]), -1.0);
        assert_eq!(f.full_coefficient(&[2, 2, 0]), 0.0);
        let (c, witness) = classical_bound(&f.to_probability_form()).unwrap();
        assert_eq!(c, 6.0);
        let b = witness.behavior(f.scenario()).unwrap();
        assert_eq!(f.evaluate(&b).unwrap(), 6.0);
    }

    #[test]
    fn static_tripartite_is_not_monogamous_under_no_signaling() {
        let r = relation_from_functional(&tripartite_wired_chsh(), 6.0, "tripartite");
        let rep = verify_monogamy(&r).unwrap();
        assert_eq!(rep.classical, 6.0);
        assert!(rep.no_signaling >= 6.0 - 1e-9);
    }

    #[test]
    fn relabeling_parties_keeps_bounds() {
        // swap parties 0 and 2 of the tripartite functional
        let f = tripartite_wired_chsh();
        let mut g = CorrelatorFunctional::new(f.scenario().clone()).unwrap();
        for (k, c) in f.terms() {
            g.add_term(vec![k[2], k[1], k[0]], c).unwrap();
        }
        let pf = f.to_probability_form();
        let pg = g.to_probability_form();
        assert_eq!(classical_bound(&pf).unwrap().0, classical_bound(&pg).unwrap().0);
        let a = no_signaling_bound(&pf).unwrap();
        let b = no_signaling_bound(&pg).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let r = wire_pairwise(&chsh(), 3).unwrap();
        let doc = MonogamyDoc::from_relation(&r);
        let text = doc.to_json().unwrap();
        assert!(text.contains("\"bound\""));
        assert!(text.contains("\"provenance\""));
        let back = MonogamyDoc::from_json(&text).unwrap().to_relation().unwrap();
        assert_eq!(back.bound, r.bound);
        assert_eq!(back.functional.coeffs(), r.functional.coeffs());
    }

    #[test]
    fn non_bipartite_base_rejected() {
        assert!(wire_pairwise(&tripartite_wired_chsh(), 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn identity_wiring_evaluates_like_base(raw in proptest::collection::vec(0.0f64..1.0, 16)) {
            let s = Scenario::uniform(2, 2, 2).unwrap();
            let mut probs = raw.clone();
            for row in probs.chunks_mut(4) {
                let t: f64 = row.iter().sum::<f64>() + 1e-12;
                for p in row.iter_mut() { *p /= t; }
                let t2: f64 = row.iter().sum();
                row[0] += 1.0 - t2;
                if row[0] < 0.0 { row[0] = 0.0; }
            }
            if let Ok(b) = Behavior::new(s, probs) {
                let base = chsh();
                let r = wire_correlator_m_of_n(&base, 2).unwrap();
                let lhs = r.functional.evaluate(&b).unwrap();
                let rhs = base.to_probability_form().evaluate(&b).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
