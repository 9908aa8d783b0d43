//! Two-qubit Pauli tomography by linear inversion, and polarization
//! visibility fringes. H and V are encoded as |0⟩ and |1⟩.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::bell::quantum::phi_plus;
use crate::error::{Error, Result};
use crate::io::sig10;
use crate::qlinalg::{
    expectation_of, hermitian_eig, kron, ComplexMatrix, DensityMatrix, Observable, C64,
};

pub const AXIS_NAMES: [char; 3] = ['x', 'y', 'z'];

fn pauli(axis: usize) -> Observable {
    match axis {
        0 => Observable::sigma_x(),
        1 => Observable::sigma_y(),
        _ => Observable::sigma_z(),
    }
}

/// Coincidences for one pair of local Pauli axes, ordered
/// (+,+), (+,−), (−,+), (−,−).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SettingCounts {
    pub axes: [usize; 2],
    pub counts: [u64; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TomographyCounts {
    pub shots: u64,
    pub settings: Vec<SettingCounts>,
}

/// Born probabilities for every setting: `[a][b]` → four outcome pairs.
pub fn tomography_probabilities(rho: &DensityMatrix) -> Result<[[[f64; 4]; 3]; 3]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("need two qubits, got dimension {}", rho.dim())));
    }
    let mut out = [[[0.0; 4]; 3]; 3];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, probs) in row.iter_mut().enumerate() {
            let (oa, ob) = (pauli(a), pauli(b));
            for (cell, p) in probs.iter_mut().enumerate() {
                let op = kron(&oa.projector(cell / 2), &ob.projector(cell % 2));
                *p = expectation_of(rho, &op)?.max(0.0);
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
        }
    }
    Ok(out)
}

/// Multinomial counts for all nine settings; setting `3a + b` draws from
/// its own stream of the seeded generator.
pub fn synthesize_tomography_counts(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<TomographyCounts> {
    let probs = tomography_probabilities(rho)?;
    let mut settings = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((3 * a + b) as u64);
            let p = probs[a][b];
            let mut counts = [0u64; 4];
            let mut left = shots;
            let mut mass = 1.0;
            for cell in 0..3 {
                let q = if mass > 0.0 { (p[cell] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let draw = Binomial::new(left, q)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(&mut rng);
                counts[cell] = draw;
                left -= draw;
                mass -= p[cell];
            }
            counts[3] = left;
            settings.push(SettingCounts { axes: [a, b], counts });
        }
    }
    Ok(TomographyCounts { shots, settings })
}

impl TomographyCounts {
    fn frequencies(&self) -> Result<[[[f64; 4]; 3]; 3]> {
        let mut seen = [[false; 3]; 3];
        let mut out = [[[0.0; 4]; 3]; 3];
        for s in &self.settings {
            let [a, b] = s.axes;
            if a > 2 || b > 2 {
                return Err(Error::InvalidArgument(format!("axes {:?}", s.axes)));
            }
            let total: u64 = s.counts.iter().sum();
            if total == 0 {
                return Err(Error::InvalidArgument(format!("setting {:?} has no counts", s.axes)));
            }
            for c in 0..4 {
                out[a][b][c] = s.counts[c] as f64 / total as f64;
            }
            seen[a][b] = true;
        }
        for (a, row) in seen.iter().enumerate() {
            for (b, ok) in row.iter().enumerate() {
                if !ok {
                    return Err(Error::InvalidArgument(format!(
                        "missing setting {}{}",
                        AXIS_NAMES[a], AXIS_NAMES[b]
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,n_pp,n_pm,n_mp,n_mm\n");
        for s in &self.settings {
            let c = s.counts;
            out.push_str(&format!(
                "{}{},{},{},{},{}\n",
                AXIS_NAMES[s.axes[0]], AXIS_NAMES[s.axes[1]], c[0], c[1], c[2], c[3]
            ));
        }
        out
    }
}

/// ½Σ T_ij σ_i⊗σ_j from outcome frequencies, before any positivity fix.
pub fn linear_inversion(freq: &[[[f64; 4]; 3]; 3]) -> ComplexMatrix {
    let mut t = [[0.0; 4]; 4];
    t[0][0] = 1.0;
    for a in 0..3 {
        for b in 0..3 {
            let p = freq[a][b];
            t[a + 1][b + 1] = p[0] - p[1] - p[2] + p[3];
            t[a + 1][0] += (p[0] + p[1] - p[2] - p[3]) / 3.0;
            t[0][b + 1] += (p[0] - p[1] + p[2] - p[3]) / 3.0;
        }
    }
    let basis = |i: usize| match i {
        0 => ComplexMatrix::identity(2),
        k => pauli(k - 1).matrix().clone(),
    };
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (i, row) in t.iter().enumerate() {
        for (j, &tij) in row.iter().enumerate() {
            rho.add_scaled(&kron(&basis(i), &basis(j)), tij / 4.0);
        }
    }
    rho
}

/// Clips negative eigenvalues and restores unit trace.
pub fn project_to_state(m: &ComplexMatrix) -> Result<DensityMatrix> {
    let eig = hermitian_eig(&m.hermitian_part())?;
    let total: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidState("no positive spectrum to keep".into()));
    }
    DensityMatrix::new(eig.spectral_map(|l| l.max(0.0) / total))
}

pub fn reconstruct_from_probabilities(freq: &[[[f64; 4]; 3]; 3]) -> Result<DensityMatrix> {
    project_to_state(&linear_inversion(freq))
}

pub fn reconstruct_density(counts: &TomographyCounts) -> Result<DensityMatrix> {
    reconstruct_from_probabilities(&counts.frequencies()?)
}

/// ⟨Φ+|ρ|Φ+⟩.
pub fn fidelity_to_bell_state(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("need two qubits, got dimension {}", rho.dim())));
    }
    Ok(expectation_of(rho, &ComplexMatrix::outer(&phi_plus()))?.clamp(0.0, 1.0))
}

/// v·|Φ+⟩⟨Φ+| + (1−v)·I/4.
pub fn werner(v: f64) -> Result<DensityMatrix> {
    if !(-1.0 / 3.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("Werner parameter {v} outside [-1/3, 1]")));
    }
    DensityMatrix::from_pure(&phi_plus())?.mix(&DensityMatrix::maximally_mixed(4)?, v)
}

/// Projector onto cosθ|H⟩ + sinθ|V⟩.
pub fn polarizer(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    ComplexMatrix::outer(&[C64::new(c, 0.0), C64::new(s, 0.0)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityCurve {
    pub theta1: f64,
    pub grid: Vec<f64>,
    pub rates: Vec<f64>,
    pub visibility: f64,
    /// Offset and amplitude of the fitted A + B·cos(2(θ2 − φ)).
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Flat or underdetermined curve; the visibility is reported as 0.
    pub degenerate: bool,
}

impl VisibilityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta2,rate\n");
        for (t, r) in self.grid.iter().zip(&self.rates) {
            out.push_str(&format!("{},{}\n", sig10(*t), sig10(*r)));
        }
        out
    }
}

fn solve3(m: [[f64; 3]; 3], y: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(d.abs() > 1e-12 * scale.powi(3)) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = y[r];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

/// Least-squares fit of A + b1·cos2θ + b2·sin2θ; V = √(b1²+b2²)/A.
pub fn fit_visibility(theta1: f64, grid: &[f64], rates: &[f64]) -> Result<VisibilityCurve> {
    if grid.len() != rates.len() {
        return Err(Error::DimensionMismatch("grid and rates differ in length".into()));
    }
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&t, &r) in grid.iter().zip(rates) {
        let f = [1.0, (2.0 * t).cos(), (2.0 * t).sin()];
        for i in 0..3 {
            rhs[i] += f[i] * r;
            for j in 0..3 {
                normal[i][j] += f[i] * f[j];
            }
        }
    }
    let mut curve = VisibilityCurve {
        theta1,
        grid: grid.to_vec(),
        rates: rates.to_vec(),
        visibility: 0.0,
        offset: 0.0,
        amplitude: 0.0,
        phase: 0.0,
        degenerate: true,
    };
    let Some([a, b1, b2]) = solve3(normal, rhs) else {
        return Ok(curve);
    };
    let amp = b1.hypot(b2);
    curve.offset = a;
    curve.amplitude = amp;
    curve.phase = 0.5 * b2.atan2(b1);
    if a > 0.0 && amp > 1e-12 * a {
        curve.visibility = amp / a;
        curve.degenerate = false;
    }
    Ok(curve)
}

/// Coincidence rate Tr[ρ·Π(θ1)⊗Π(θ2)] over the grid, with its fitted fringe.
pub fn visibility_curve(rho: &DensityMatrix, theta1: f64, grid: &[f64]) -> Result<VisibilityCurve> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("need two qubits, got dimension {}", rho.dim())));
    }
    let p1 = polarizer(theta1);
    let rates = grid
        .iter()
        .map(|&t| expectation_of(rho, &kron(&p1, &polarizer(t))))
        .collect::<Result<Vec<f64>>>()?;
    fit_visibility(theta1, grid, &rates)
}

/// `n` evenly spaced analyzer angles covering one period [0, π).
pub fn default_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::FRAC_PI_4;

    fn random_state(seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ComplexMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = g.matmul(&g.adjoint()).unwrap();
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(1.0 / tr)).unwrap()
    }

    #[test]
    fn phi_plus_zz_outcomes() {
        let rho = werner(1.0).unwrap();
        let c = synthesize_tomography_counts(&rho, 10_000, 1).unwrap();
        let zz = c.settings.iter().find(|s| s.axes == [2, 2]).unwrap();
        assert_eq!(zz.counts[1] + zz.counts[2], 0);
        assert_eq!(zz.counts.iter().sum::<u64>(), 10_000);
        assert!(c.settings.iter().all(|s| s.counts.iter().sum::<u64>() == 10_000));
    }

    #[test]
    fn mixed_state_counts_are_uniform_and_deterministic() {
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let c = synthesize_tomography_counts(&rho, 100_000, 5).unwrap();
        for s in &c.settings {
            for n in s.counts {
                assert!((n as f64 - 25_000.0).abs() < 700.0);
            }
        }
        assert_eq!(c, synthesize_tomography_counts(&rho, 100_000, 5).unwrap());
    }

    #[test]
    fn exact_inversion_recovers_bell_and_werner() {
        for v in [1.0, 0.9] {
            let rho = werner(v).unwrap();
            let back = reconstruct_from_probabilities(&tomography_probabilities(&rho).unwrap()).unwrap();
            assert!(back.matrix().approx_eq(rho.matrix(), 1e-10));
        }
    }

    #[test]
    fn round_trip_on_random_states() {
        for seed in 0..50 {
            let rho = random_state(seed);
            let back = reconstruct_from_probabilities(&tomography_probabilities(&rho).unwrap()).unwrap();
            assert!(back.matrix().approx_eq(rho.matrix(), 1e-9), "seed {seed}");
        }
    }

    #[test]
    fn finite_shot_fidelity() {
        let c = synthesize_tomography_counts(&werner(1.0).unwrap(), 1_000_000, 11).unwrap();
        let rho = reconstruct_density(&c).unwrap();
        assert!(fidelity_to_bell_state(&rho).unwrap() >= 0.997);
    }

    #[test]
    fn missing_setting_rejected() {
        let mut c = synthesize_tomography_counts(&werner(1.0).unwrap(), 100, 1).unwrap();
        c.settings.pop();
        assert!(reconstruct_density(&c).is_err());
    }

    #[test]
    fn fidelity_examples() {
        assert!((fidelity_to_bell_state(&werner(1.0).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        assert!((fidelity_to_bell_state(&mixed).unwrap() - 0.25).abs() < 1e-12);
        for v in [0.0, 0.5, 0.987] {
            let f = fidelity_to_bell_state(&werner(v).unwrap()).unwrap();
            assert!((f - (1.0 + 3.0 * v) / 4.0).abs() < 1e-12);
        }
        assert!(werner(1.5).is_err());
    }

    #[test]
    fn visibility_examples() {
        let grid = default_grid(36);
        let c = visibility_curve(&werner(1.0).unwrap(), 0.0, &grid).unwrap();
        assert!((c.visibility - 1.0).abs() < 1e-10);
        for (t, r) in grid.iter().zip(&c.rates) {
            assert!((r - 0.5 * t.cos().powi(2)).abs() < 1e-12);
        }
        for v in [0.5, 0.9956] {
            for theta1 in [0.0, FRAC_PI_4] {
                let c = visibility_curve(&werner(v).unwrap(), theta1, &grid).unwrap();
                assert!((c.visibility - v).abs() < 1e-10);
            }
        }
        let flat = visibility_curve(&DensityMatrix::maximally_mixed(4).unwrap(), 0.0, &grid).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.visibility, 0.0);
        let short = fit_visibility(0.0, &[0.1, 0.2], &[1.0, 2.0]).unwrap();
        assert!(short.degenerate);
    }

    proptest! {
        #[test]
        fn visibility_ignores_scale(v in 0.05f64..1.0, k in 0.01f64..100.0) {
            let grid = default_grid(24);
            let c = visibility_curve(&werner(v).unwrap(), 0.0, &grid).unwrap();
            let scaled: Vec<f64> = c.rates.iter().map(|r| r * k).collect();
            let d = fit_visibility(0.0, &grid, &scaled).unwrap();
            prop_assert!((c.visibility - d.visibility).abs() < 1e-9);
        }

        #[test]
        fn reconstruction_is_a_state(seed in 0u64..1000, shots in 1u64..2000) {
            let c = synthesize_tomography_counts(&random_state(seed), shots, seed).unwrap();
            let rho = reconstruct_density(&c).unwrap();
            prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
        }
    }
}
