use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use bellwire::bell::{classical_bound, no_signaling_bound, seesaw, CorrelatorFunctional, FunctionalDoc, SeesawOptions};
use bellwire::io::{sig10, MatrixDoc};
use bellwire::monogamy::{
    tripartite_wired_chsh, verify_monogamy, wire_correlator_m_of_n, wire_m_of_n, MonogamyDoc,
};
use bellwire::protocol::{
    closed_form_bell_value, exact_bell_value, exact_correlators, fit_single_bias, protocol_seesaw_options,
    theta_threshold_scan, threshold_formula_value, ProtocolDoc, ProtocolSpec, ScanMode, TRIPLES,
    VIOLATION_MARGIN,
};
use bellwire::qlinalg::DensityMatrix;
use bellwire::sampler::{estimate_bell_value, estimate_correlators, p_value, simulate_counts, CorrelatorTable};
use bellwire::tomography::{
    default_grid, fidelity_to_bell_state, reconstruct_density, reconstruct_from_probabilities,
    synthesize_tomography_counts, tomography_probabilities, visibility_curve, werner,
};

use crate::paper::paper_values;
use crate::report::{read_config, CliError, CliResult, OutputArgs, Report};

fn parse_slot(s: &str) -> Result<(usize, usize), String> {
    let (p, x) = s.split_once(':').ok_or("expected party:input")?;
    Ok((
        p.trim().parse().map_err(|e| format!("{e}"))?,
        x.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn load_functional_doc(path: &PathBuf) -> CliResult<FunctionalDoc> {
    Ok(FunctionalDoc::from_json(&read_config(path)?)?)
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Functional document (JSON).
    pub file: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Restrict a seesaw slot to ±identity, as party:input; repeatable.
    #[arg(long = "classical-slot", value_parser = parse_slot)]
    pub classical_slots: Vec<(usize, usize)>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn bounds(args: &BoundsArgs) -> CliResult<Report> {
    let doc = load_functional_doc(&args.file)?;
    let f = doc.to_functional()?;
    let config = json!({
        "functional": doc,
        "restarts": args.restarts,
        "classical_slots": args.classical_slots,
    });
    let (classical, strategy) = classical_bound(&f)?;
    let no_signaling = no_signaling_bound(&f)?;
    let opts = SeesawOptions {
        seed: args.seed,
        restarts: args.restarts,
        classical_slots: args.classical_slots.clone(),
        ..SeesawOptions::default()
    };
    let dims = f.scenario().outputs().to_vec();
    let quantum = match seesaw(&f, &dims, &opts) {
        Ok(r) => Some(r.value),
        Err(bellwire::Error::DimensionMismatch(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let declared = f.declared_bound();
    let mut csv = String::from("quantity,value\n");
    for (name, v) in [
        ("classical", Some(classical)),
        ("no_signaling", Some(no_signaling)),
        ("seesaw_lower_bound", quantum),
        ("declared_bound", declared),
    ] {
        csv.push_str(&format!("{name},{}\n", v.map(sig10).unwrap_or_default()));
    }
    Ok(Report {
        command: "bounds",
        seed: Some(args.seed),
        config,
        result: json!({
            "classical": classical,
            "classical_strategy": strategy.responses,
            "no_signaling": no_signaling,
            "seesaw_lower_bound": quantum,
            "declared_bound": declared,
        }),
        csv,
        flat: false,
    })
}

#[derive(Debug, Clone, Args)]
pub struct WireArgs {
    /// Base functional document (JSON).
    pub file: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Parties per copy; must match the base functional.
    #[arg(long)]
    pub m: Option<usize>,
    /// Also compute classical and no-signaling maxima of the wiring.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn wire(args: &WireArgs) -> CliResult<Report> {
    let doc = load_functional_doc(&args.file)?;
    let parties = doc.scenario.parties;
    if let Some(m) = args.m {
        if m != parties {
            return Err(CliError::config(format!("--m {m} differs from the base's {parties} parties")));
        }
    }
    let relation = match doc.to_correlator()? {
        Some(c) => wire_correlator_m_of_n(&c, args.n)?,
        None => wire_m_of_n(&doc.to_functional()?, args.n)?,
    };
    let wired = MonogamyDoc::from_relation(&relation);
    let verification = if args.verify {
        Some(verify_monogamy(&relation)?)
    } else {
        None
    };
    let mut csv = String::new();
    let f = &wired.functional;
    if f.probability_terms.is_empty() {
        let header: Vec<String> = (0..args.n).map(|k| format!("x{k}")).collect();
        csv.push_str(&format!("{},coeff\n", header.join(",")));
        for t in &f.correlator_terms {
            let cols: Vec<String> = t
                .inputs
                .iter()
                .map(|x| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into()))
                .collect();
            csv.push_str(&format!("{},{}\n", cols.join(","), sig10(t.coeff)));
        }
    } else {
        let xs: Vec<String> = (0..args.n).map(|k| format!("x{k}")).collect();
        let outs: Vec<String> = (0..args.n).map(|k| format!("a{k}")).collect();
        csv.push_str(&format!("{},{},coeff\n", xs.join(","), outs.join(",")));
        for t in &f.probability_terms {
            let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            csv.push_str(&format!("{},{},{}\n", join(&t.inputs), join(&t.outputs), sig10(t.coeff)));
        }
    }
    let mut result = serde_json::to_value(&wired).expect("document serializes");
    if let Some(v) = verification {
        result["verification"] = json!(v);
    }
    Ok(Report {
        command: "wire",
        seed: None,
        config: json!({ "base": doc, "n": args.n }),
        result,
        csv,
        flat: true,
    })
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    /// Named protocol: paper-default or experiment.
    #[arg(long, conflicts_with = "file")]
    pub preset: Option<String>,
    /// Protocol document (JSON).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Tripartite correlator functional; defaults to the wired CHSH sum.
    #[arg(long)]
    pub functional: Option<PathBuf>,
}

impl ProtocolArgs {
    fn load(&self) -> CliResult<(String, ProtocolSpec, CorrelatorFunctional)> {
        let (name, spec) = match (&self.preset, &self.file) {
            (_, Some(path)) => ("file".to_string(), ProtocolDoc::from_json(&read_config(path)?)?.to_spec()?),
            (Some(p), None) => (p.clone(), ProtocolSpec::preset(p)?),
            (None, None) => ("paper-default".to_string(), ProtocolSpec::paper_default()),
        };
        let f = match &self.functional {
            None => tripartite_wired_chsh(),
            Some(path) => load_functional_doc(path)?
                .to_correlator()?
                .filter(|f| f.scenario().n_parties() == 3)
                .ok_or_else(|| CliError::config("protocol functionals must be tripartite correlator sums"))?,
        };
        Ok((name, spec, f))
    }
}

fn functional_bound(f: &CorrelatorFunctional) -> CliResult<f64> {
    Ok(match f.declared_bound() {
        Some(b) => b,
        None => classical_bound(&f.to_probability_form())?.0,
    })
}

fn table_json(table: &CorrelatorTable) -> Value {
    Value::Array(
        table
            .entries()
            .iter()
            .map(|e| {
                if e.empty {
                    json!({ "triple": e.triple, "estimate": null, "stderr": null, "n_events": e.n_events, "empty": true })
                } else {
                    json!(e)
                }
            })
            .collect(),
    )
}

/// Model against published correlators, plus the audit of the published
/// Bell value against the published correlators.
pub fn published_comparison(spec: &ProtocolSpec, f: &CorrelatorFunctional) -> CliResult<Value> {
    let paper = paper_values();
    let model = exact_correlators(spec)?;
    let published = paper.correlator_array();
    let rows: Vec<Value> = TRIPLES
        .iter()
        .zip(published)
        .map(|(t, p)| {
            let m = model.get(*t).map(|e| e.estimate).unwrap_or(f64::NAN);
            json!({ "triple": t, "published": p, "model": m, "deviation": m - p })
        })
        .collect();
    let max_dev = TRIPLES
        .iter()
        .zip(published)
        .map(|(t, p)| (model.get(*t).map(|e| e.estimate).unwrap_or(f64::NAN) - p).abs())
        .fold(0.0, f64::max);
    let (beta, fitted) = fit_single_bias(&published)?;
    let fitted_dev = fitted.iter().zip(published).map(|(m, p)| (m - p).abs()).fold(0.0, f64::max);
    let table = CorrelatorTable::from_values(
        &paper
            .correlators
            .iter()
            .map(|c| (c.triple, c.value, c.stderr))
            .collect::<Vec<_>>(),
    );
    let (sum, sum_err) = estimate_bell_value(&table, f)?;
    let gap = paper.bell_value - sum;
    Ok(json!({
        "correlators": rows,
        "max_abs_deviation": max_dev,
        "fitted_bias": beta,
        "fitted_max_abs_deviation": fitted_dev,
        "audit": {
            "sum_of_published_correlators": sum,
            "stderr": sum_err,
            "published_bell_value": paper.bell_value,
            "difference": gap,
            "discrepancy": gap.abs() > 3.0 * sum_err,
        },
    }))
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report exact correlators instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Also write the raw coincidence counts as CSV.
    #[arg(long)]
    pub counts_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Report> {
    let (name, spec, f) = args.protocol.load()?;
    if !args.exact && args.trials == 0 {
        return Err(CliError::config("--trials must be positive"));
    }
    let bound = functional_bound(&f)?;
    let exact = exact_correlators(&spec)?;
    let exact_value = exact_bell_value(&spec, &f)?;
    let config = json!({
        "preset": name,
        "protocol": ProtocolDoc::from_spec(&spec),
        "functional": FunctionalDoc::from_correlator(&f),
        "trials": if args.exact { None } else { Some(args.trials) },
        "exact": args.exact,
    });
    let mut result = json!({
        "classical_bound": bound,
        "exact_correlators": table_json(&exact),
        "exact_value": exact_value,
        "closed_form_default_measurements": closed_form_bell_value(spec.theta, spec.classical_bias),
    });
    let csv = if args.exact {
        exact.to_csv()
    } else {
        let counts = simulate_counts(&spec, args.trials, args.seed)?;
        let table = estimate_correlators(&counts);
        if let Some(path) = &args.counts_out {
            crate::report::write_text(Some(path), &counts.to_csv())?;
        }
        result["estimates"] = table_json(&table);
        match estimate_bell_value(&table, &f) {
            Ok((value, stderr)) => {
                let terms = f.terms().filter(|(_, c)| *c != 0.0).count();
                let events: u64 = table.entries().iter().map(|e| e.n_events).sum();
                let per_term = events as f64 / table.len().max(1) as f64;
                result["estimated_value"] = json!(value);
                result["stderr"] = json!(stderr);
                result["sigmas_above_bound"] = json!((value - bound) / stderr);
                result["p_value"] = json!(p_value(value, stderr, per_term, bound, terms));
            }
            Err(bellwire::Error::MissingTriple(t)) => {
                result["estimated_value"] = Value::Null;
                result["missing_triple"] = json!(t);
            }
            Err(e) => return Err(e.into()),
        }
        table.to_csv()
    };
    if name == "experiment" {
        result["published_comparison"] = published_comparison(&spec, &f)?;
    }
    Ok(Report {
        command: "simulate",
        seed: (!args.exact).then_some(args.seed),
        config,
        result,
        csv,
        flat: false,
    })
}

/// `a:b:steps`, evenly spaced and inclusive.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::config(format!("grid {s:?} is not a:b:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(CliError::config("empty grid"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// sin 2θ grid as a:b:steps.
    #[arg(long)]
    pub grid: String,
    /// Seesaw-optimize the measurements at every point.
    #[arg(long)]
    pub optimized: bool,
    /// Use the planar grid oracle with this many steps instead.
    #[arg(long, conflicts_with = "optimized")]
    pub oracle: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn scan(args: &ScanArgs) -> CliResult<Report> {
    let (name, spec, f) = args.protocol.load()?;
    let grid = parse_grid(&args.grid)?;
    let bound = functional_bound(&f)?;
    let (mode, mode_name) = if args.optimized {
        let opts = SeesawOptions {
            restarts: args.restarts,
            ..protocol_seesaw_options(args.seed)
        };
        (ScanMode::Optimized(opts), "optimized")
    } else if let Some(steps) = args.oracle {
        (ScanMode::Oracle(steps), "oracle")
    } else {
        (ScanMode::Fixed, "fixed")
    };
    let r = theta_threshold_scan(&spec, &f, &grid, &mode, bound)?;
    let paper = paper_values();
    let mut csv = String::from("sin2theta,value\n");
    for (s, v) in &r.curve {
        csv.push_str(&format!("{},{}\n", sig10(*s), sig10(*v)));
    }
    let status = match (r.threshold, r.bracketed) {
        (None, _) => "no violation in range",
        (Some(_), true) => "threshold bracketed",
        (Some(_), false) => "violation from the lowest grid point; threshold below the grid",
    };
    Ok(Report {
        command: "scan",
        seed: args.optimized.then_some(args.seed),
        config: json!({
            "preset": name,
            "protocol": ProtocolDoc::from_spec(&spec),
            "functional": FunctionalDoc::from_correlator(&f),
            "grid": args.grid,
            "mode": mode_name,
            "oracle_steps": args.oracle,
            "restarts": args.optimized.then_some(args.restarts),
        }),
        result: json!({
            "bound": bound,
            "curve": r.curve.iter().map(|(s, v)| json!({"sin2theta": s, "value": v})).collect::<Vec<_>>(),
            "threshold": r.threshold,
            "bracketed": r.bracketed,
            "status": status,
            "violation_margin": VIOLATION_MARGIN,
            "monotonicity_violations": r.monotonicity_violations,
            "published_threshold": paper.threshold_sin2theta,
            "formula_threshold": threshold_formula_value(),
        }),
        csv,
        flat: false,
    })
}

#[derive(Debug, Clone, Args)]
pub struct TomoArgs {
    /// phi+, mixed, or werner:<v>.
    #[arg(long, default_value = "phi+")]
    pub state: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reconstruct from exact probabilities instead of sampled counts.
    #[arg(long)]
    pub exact: bool,
    /// Analyzer angles per visibility curve.
    #[arg(long, default_value_t = 36)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn parse_state(s: &str) -> CliResult<DensityMatrix> {
    match s.trim() {
        "phi+" => Ok(werner(1.0)?),
        "mixed" => Ok(werner(0.0)?),
        other => match other.strip_prefix("werner:") {
            Some(v) => {
                let v: f64 = v.parse().map_err(|_| CliError::config(format!("bad Werner parameter in {s:?}")))?;
                Ok(werner(v)?)
            }
            None => Err(CliError::config(format!("unknown state {s:?}"))),
        },
    }
}

pub fn tomo(args: &TomoArgs) -> CliResult<Report> {
    let truth = parse_state(&args.state)?;
    if !args.exact && args.shots == 0 {
        return Err(CliError::config("--shots must be positive"));
    }
    if args.points < 3 {
        return Err(CliError::config("--points must be at least 3"));
    }
    let rho = if args.exact {
        reconstruct_from_probabilities(&tomography_probabilities(&truth)?)?
    } else {
        reconstruct_density(&synthesize_tomography_counts(&truth, args.shots, args.seed)?)?
    };
    let grid = default_grid(args.points);
    let paper = paper_values();
    let mut curves = Vec::new();
    let mut csv = String::from("theta1,theta2,rate\n");
    for theta1 in [0.0, FRAC_PI_4] {
        let c = visibility_curve(&rho, theta1, &grid)?;
        let t = visibility_curve(&truth, theta1, &grid)?;
        for (th, r) in c.grid.iter().zip(&c.rates) {
            csv.push_str(&format!("{},{},{}\n", sig10(theta1), sig10(*th), sig10(*r)));
        }
        curves.push(json!({
            "theta1": theta1,
            "visibility": c.visibility,
            "true_visibility": t.visibility,
            "degenerate": c.degenerate,
            "theta2": c.grid,
            "rates": c.rates,
        }));
    }
    Ok(Report {
        command: "tomo",
        seed: (!args.exact).then_some(args.seed),
        config: json!({
            "state": args.state,
            "shots": if args.exact { None } else { Some(args.shots) },
            "exact": args.exact,
            "points": args.points,
        }),
        result: json!({
            "fidelity": fidelity_to_bell_state(&rho)?,
            "true_fidelity": fidelity_to_bell_state(&truth)?,
            "reconstructed": MatrixDoc::from_matrix(rho.matrix()),
            "curves": curves,
            "published": {
                "fidelity": paper.fidelity,
                "fidelity_stderr": paper.fidelity_stderr,
                "visibility_hv": paper.visibility_hv,
                "visibility_da": paper.visibility_da,
                "classical_visibility_limit": paper.classical_visibility_limit,
            },
        }),
        csv,
        flat: false,
    })
}
