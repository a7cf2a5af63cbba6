//! Surface gain and phase updates.
//!
//! The quartic surface design is split into paired tracks (two copies of the
//! gain vector, two of the phase vector) coupled by a Lagrangian penalty.
//! Each track update is one step of power iteration on a diagonally loaded
//! bordered matrix; the phase step additionally pushes its output toward the
//! M-level grid through exponents that decay with the outer iteration count.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{hadamard, loading_bound, two_norm, CMatrix};
use crate::scene::{grid_angle, nearest_integer, quantize_phase, IrsMode, Quantization, ScenarioConfig};

/// Paired gain and phase tracks of the reflecting surface.
#[derive(Debug, Clone)]
pub struct IrsState {
    /// Real-positive gain tracks, each with ‖b‖² equal to the surface budget
    /// in active mode; all-ones in passive mode.
    pub gains: [Vec<f64>; 2],
    /// Phase tracks; unit-modulus in continuous mode, relaxed magnitudes
    /// during quantized iteration until the final requantization.
    pub phases: [CMatrix; 2],
    pub mode: IrsMode,
}

impl IrsState {
    /// Deterministic start: uniform gains meeting the power budget (active)
    /// or all-ones (passive); seeded uniform phases. The start point is the
    /// same for every quantization level so runs over a shared seed differ
    /// only through the projection itself; feasibility is enforced by the
    /// final requantization, not the start.
    pub fn init(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Self {
        let l = config.irs_elements();
        let gains = match config.mode {
            IrsMode::Active => vec![(config.p_irs() / l as f64).sqrt(); l],
            IrsMode::Passive => vec![1.0; l],
        };
        let phases: Vec<Complex64> = (0..l)
            .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU))
            .collect();
        let phases = CMatrix::column(phases);
        Self {
            gains: [gains.clone(), gains],
            phases: [phases.clone(), phases],
            mode: config.mode,
        }
    }

    pub fn elements(&self) -> usize {
        self.gains[0].len()
    }

    pub fn gain_column(&self, track: usize) -> CMatrix {
        CMatrix::column(self.gains[track].iter().map(|&g| Complex64::new(g, 0.0)).collect())
    }

    /// Composite reflection vector of the given tracks, b ⊙ u.
    pub fn reflection_of(&self, gain_track: usize, phase_track: usize) -> CMatrix {
        hadamard(&self.gain_column(gain_track), &self.phases[phase_track])
    }

    /// Reported reflection vector (track 1 of each pair).
    pub fn reflection(&self) -> CMatrix {
        self.reflection_of(0, 0)
    }

    pub fn gain_gap(&self) -> f64 {
        self.gains[0]
            .iter()
            .zip(&self.gains[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn phase_gap(&self) -> f64 {
        two_norm(&self.phases[0].sub(&self.phases[1]))
    }

    /// Worst relative deviation of ‖b‖² from the active-mode budget.
    pub fn gain_budget_defect(&self, p_irs: f64) -> f64 {
        self.gains
            .iter()
            .map(|g| {
                let sq: f64 = g.iter().map(|x| x * x).sum();
                (sq - p_irs).abs() / p_irs
            })
            .fold(0.0, f64::max)
    }

    /// Hard-snap both phase tracks onto the M-level grid with unit modulus.
    pub fn requantize(&mut self, levels: u32) {
        for track in 0..2 {
            let snapped: Vec<Complex64> = (0..self.elements())
                .map(|i| {
                    let z = self.phases[track].get(i, 0);
                    Complex64::from_polar(1.0, quantize_phase(z.arg(), levels))
                })
                .collect();
            self.phases[track] = CMatrix::column(snapped);
        }
    }
}

/// A diagonally loaded bordered matrix together with the scalars that built
/// it; PSD by construction of the outer loading.
#[derive(Debug, Clone)]
pub struct LoadedQuadratic {
    pub matrix: CMatrix,
    /// Loading applied to the bordered matrix (λ̌-type scalar).
    pub outer_loading: f64,
    /// Loading applied to the inner objective block (λ′-type scalar).
    pub inner_loading: f64,
}

fn load_flip(m: &CMatrix, lambda: f64) -> CMatrix {
    CMatrix::identity(m.rows()).scale_re(lambda).sub(m)
}

/// Gain-track step matrix: load the masked weighted objective, border it
/// with the penalty coupling to the opposite track, and flip once more so
/// power iteration maximizes.
///
/// `masked_weighted` is the (L+1)² weighted objective masked by the current
/// phase vector; `gain_bar_i` is the opposite gain track with a unit entry
/// appended.
pub fn build_gain_step(
    masked_weighted: &CMatrix,
    gain_bar_i: &CMatrix,
    tau: f64,
    p_irs: f64,
    seed: u64,
) -> LoadedQuadratic {
    assert!(
        masked_weighted.is_hermitian(1e-10),
        "build_gain_step: objective block must be Hermitian"
    );
    assert_eq!(gain_bar_i.rows(), masked_weighted.rows(), "build_gain_step: track length mismatch");
    let inner = loading_bound(masked_weighted, seed);
    let penalized = CMatrix::bordered(
        &load_flip(masked_weighted, inner),
        &gain_bar_i.scale_re(-tau),
        2.0 * tau * p_irs,
    );
    let outer = loading_bound(&penalized, seed);
    LoadedQuadratic {
        matrix: load_flip(&penalized, outer),
        outer_loading: outer,
        inner_loading: inner,
    }
}

/// One gain-track power step: multiply, truncate to the first L entries,
/// take elementwise moduli (gains are real positive) and rescale to meet the
/// power budget exactly. Returns the previous track untouched with the
/// degenerate flag when the product vanishes.
pub fn update_gain(
    state: &IrsState,
    step: &LoadedQuadratic,
    p_irs: f64,
    track_j: usize,
) -> (Vec<f64>, bool) {
    let l = state.elements();
    let lifted = state.gain_column(track_j).append_ones(2);
    assert_eq!(step.matrix.rows(), l + 2, "update_gain: step matrix size mismatch");
    let product = step.matrix.mul(&lifted).head(l);
    let moduli: Vec<f64> = (0..l).map(|i| product.get(i, 0).norm()).collect();
    let norm = moduli.iter().map(|m| m * m).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (state.gains[track_j].clone(), true);
    }
    let scale = p_irs.sqrt() / norm;
    (moduli.iter().map(|m| m * scale).collect(), false)
}

/// Phase-track step matrix, the quantized-side analogue of
/// [`build_gain_step`] with the penalty corner 2τ̆L.
pub fn build_phase_step(
    masked_weighted: &CMatrix,
    phase_bar_i: &CMatrix,
    tau_phase: f64,
    elements: usize,
    seed: u64,
) -> LoadedQuadratic {
    assert!(
        masked_weighted.is_hermitian(1e-10),
        "build_phase_step: objective block must be Hermitian"
    );
    assert_eq!(phase_bar_i.rows(), masked_weighted.rows(), "build_phase_step: track length mismatch");
    let inner = loading_bound(masked_weighted, seed);
    let penalized = CMatrix::bordered(
        &load_flip(masked_weighted, inner),
        &phase_bar_i.scale_re(-tau_phase),
        2.0 * tau_phase * elements as f64,
    );
    // The loading must dominate both the bordered matrix (for PSD) and the
    // inner objective's top eigenvalue.
    let outer = loading_bound(&penalized, seed).max(inner);
    LoadedQuadratic {
        matrix: load_flip(&penalized, outer),
        outer_loading: outer,
        inner_loading: inner,
    }
}

/// Relaxed power step for the phase track.
///
/// With M levels the output element is |z|^e^{−ν₁t} · e^{j(2π/M)([x] + {x}e^{−ν₂t})}
/// where x = M·arg(z)/2π; both exponents decay toward the hard M-ary
/// projection as t grows. The continuous sentinel dispatches to
/// [`update_phase_continuous`]'s unit-modulus projection. Elements whose
/// product is exactly zero keep their previous value and set the flag.
pub fn update_phase_quantized(
    state: &IrsState,
    step: &LoadedQuadratic,
    quantization: Quantization,
    nu1: f64,
    nu2: f64,
    t: usize,
    track_j: usize,
) -> (CMatrix, bool) {
    let levels = match quantization {
        Quantization::Continuous => return update_phase_continuous(state, step, track_j),
        Quantization::Levels(m) => m,
    };
    let l = state.elements();
    let lifted = state.phases[track_j].append_ones(2);
    assert_eq!(step.matrix.rows(), l + 2, "update_phase_quantized: step matrix size mismatch");
    let product = step.matrix.mul(&lifted).head(l);
    let magnitude_exp = (-nu1 * t as f64).exp();
    let fraction_scale = (-nu2 * t as f64).exp();
    let mut frozen = false;
    let mut out = Vec::with_capacity(l);
    for i in 0..l {
        let z = product.get(i, 0);
        if z.norm() == 0.0 {
            out.push(state.phases[track_j].get(i, 0));
            frozen = true;
            continue;
        }
        let magnitude = z.norm().powf(magnitude_exp);
        let x = levels as f64 * z.arg() / std::f64::consts::TAU;
        let int_part = nearest_integer(x);
        let fraction = x - int_part;
        if fraction_scale == 0.0 {
            // Fully decayed: land bit-exactly on the grid.
            let m = (int_part as i64).rem_euclid(levels as i64) as u32;
            out.push(Complex64::from_polar(magnitude, grid_angle(m, levels)));
        } else {
            let angle =
                std::f64::consts::TAU / levels as f64 * (int_part + fraction * fraction_scale);
            out.push(Complex64::from_polar(magnitude, angle));
        }
    }
    (CMatrix::column(out), frozen)
}

/// Unit-modulus power step for continuous phases: e^{j·arg} of the product,
/// truncated to the first L entries.
pub fn update_phase_continuous(
    state: &IrsState,
    step: &LoadedQuadratic,
    track_j: usize,
) -> (CMatrix, bool) {
    let l = state.elements();
    let lifted = state.phases[track_j].append_ones(2);
    assert_eq!(step.matrix.rows(), l + 2, "update_phase_continuous: step matrix size mismatch");
    let product = step.matrix.mul(&lifted).head(l);
    let mut frozen = false;
    let mut out = Vec::with_capacity(l);
    for i in 0..l {
        let z = product.get(i, 0);
        if z.norm() == 0.0 {
            out.push(state.phases[track_j].get(i, 0));
            frozen = true;
        } else {
            out.push(Complex64::from_polar(1.0, z.arg()));
        }
    }
    (CMatrix::column(out), frozen)
}
