use crate::bell::functional::BellFunctional;
use crate::bell::scenario::Scenario;
use crate::bell::simplex;
use crate::error::{Error, Result};

/// Upper limit on LP variables (cells of the probability table).
pub const MAX_LP_VARIABLES: usize = 5000;

/// Equality constraints of the no-signaling polytope: normalization for every
/// input tuple, and for every party k the chain conditions
/// Σ_{a_k} P(a | x_k = i, x_rest) = Σ_{a_k} P(a | x_k = i+1, x_rest).
pub fn no_signaling_constraints(scenario: &Scenario) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n_vars = scenario.table_len();
    let n_out = scenario.num_output_tuples();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();

    for x in 0..scenario.num_input_tuples() {
        let mut row = vec![0.0; n_vars];
        for a in 0..n_out {
            row[scenario.cell(x, a)] = 1.0;
        }
        rows.push(row);
        rhs.push(1.0);
    }

    for k in 0..scenario.n_parties() {
        for x in 0..scenario.num_input_tuples() {
            let xs = scenario.input_tuple(x);
            if xs[k] + 1 >= scenario.inputs()[k] {
                continue;
            }
            let mut next = xs.clone();
            next[k] += 1;
            let x_next = scenario.input_index(&next).unwrap();
            // one row per output assignment of the other parties
            for a in 0..n_out {
                let outs = scenario.output_tuple(a);
                if outs[k] != 0 {
                    continue;
                }
                let mut row = vec![0.0; n_vars];
                let mut o = outs.clone();
                for ak in 0..scenario.outputs()[k] {
                    o[k] = ak;
                    let ai = scenario.output_index(&o).unwrap();
                    row[scenario.cell(x, ai)] += 1.0;
                    row[scenario.cell(x_next, ai)] -= 1.0;
                }
                rows.push(row);
                rhs.push(0.0);
            }
        }
    }
    (rows, rhs)
}

/// Maximum of `f` over the no-signaling polytope.
pub fn no_signaling_bound(f: &BellFunctional) -> Result<f64> {
    Ok(no_signaling_optimum(f)?.0)
}

/// Maximum and an optimal behavior table.
pub fn no_signaling_optimum(f: &BellFunctional) -> Result<(f64, Vec<f64>)> {
    let n = f.scenario().table_len();
    if n > MAX_LP_VARIABLES {
        return Err(Error::GuardExceeded {
            what: "LP variables",
            size: n as u128,
            limit: MAX_LP_VARIABLES as u128,
        });
    }
    let (a, b) = no_signaling_constraints(f.scenario());
    let sol = simplex::maximize(f.coeffs(), &a, &b)?;
    Ok((sol.value, sol.x))
}
