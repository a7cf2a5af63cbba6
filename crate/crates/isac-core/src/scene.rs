//! Physical scenario construction: steering vectors, quantized phase
//! alphabet, Rician CSI matrices, and the run configuration.
//!
//! Everything is built deterministically from [`ScenarioConfig::seed`]; two
//! builds from equal configs produce bit-identical channels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{kron, CMatrix};

/// Configuration validation failure, naming the offending field.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Phase-shift resolution of the reflecting surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    /// M-level phase grid {2πm/M}.
    Levels(u32),
    /// Unquantized phases (the M → ∞ limit).
    Continuous,
}

impl Quantization {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Quantization::Continuous)
    }
}

/// Whether the surface elements amplify or only phase-shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsMode {
    Active,
    Passive,
}

/// Track refresh order inside one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    /// The second track of a pair sees the first track's fresh value.
    GaussSeidel,
    /// Both tracks of a pair use the previous iteration's values.
    Jacobi,
}

/// All physical and algorithmic parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Transmit (= receive) antenna count at the base station.
    pub tx_antennas: usize,
    /// Reflecting elements along the x-axis.
    pub irs_x: usize,
    /// Reflecting elements along the y-axis.
    pub irs_y: usize,
    /// Communications user count.
    pub users: usize,
    pub quantization: Quantization,
    /// Radar/communications weight in [0, 1].
    pub beta: f64,
    pub p_t_dbm: f64,
    pub p_irs_dbm: f64,
    pub sigma_c_sq_dbm: f64,
    pub sigma_r_sq_dbm: f64,
    /// Target radar cross-section.
    pub alpha_t: Complex64,
    /// Scalar multiplier folded onto alpha_t (stand-in for unmodeled path loss).
    pub path_loss: f64,
    /// Target range in metres; carried in the configuration but outside the
    /// SNR model.
    pub range_m: f64,
    /// Target azimuth seen from the surface, degrees.
    pub theta_h_deg: f64,
    /// Target elevation seen from the surface, degrees.
    pub theta_v_deg: f64,
    /// Incidence azimuth for the Tx→IRS line-of-sight component, degrees.
    pub incidence_h_deg: f64,
    /// Incidence elevation for the Tx→IRS line-of-sight component, degrees.
    pub incidence_v_deg: f64,
    pub rician_kappa: f64,
    /// Magnitude-relaxation decay rate of the quantized phase update.
    pub nu1: f64,
    /// Phase-relaxation decay rate of the quantized phase update.
    pub nu2: f64,
    /// Gain-track coupling multiplier.
    pub tau_gain: f64,
    /// Phase-track coupling multiplier.
    pub tau_phase: f64,
    /// Precoder-track coupling multiplier.
    pub tau_precoder: f64,
    /// Covariance-penalty multiplier.
    pub gamma_cov: f64,
    /// Convergence threshold on |ΔSNR_T| (linear).
    pub epsilon: f64,
    pub max_outer_iter: usize,
    /// Power-step repetitions per track per outer iteration.
    pub inner_iters: usize,
    pub update_order: UpdateOrder,
    pub seed: u64,
    pub mode: IrsMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tx_antennas: 4,
            irs_x: 4,
            irs_y: 4,
            users: 5,
            quantization: Quantization::Levels(4),
            beta: 0.5,
            p_t_dbm: 0.0,
            p_irs_dbm: 30.0,
            sigma_c_sq_dbm: 33.0,
            sigma_r_sq_dbm: 33.0,
            alpha_t: Complex64::new(1e-2, 0.0),
            path_loss: 1.0,
            range_m: 2500.0,
            theta_h_deg: 33.0,
            theta_v_deg: 21.0,
            incidence_h_deg: 33.0,
            incidence_v_deg: 21.0,
            rician_kappa: 10.0,
            nu1: 1.2,
            nu2: 1e-9,
            tau_gain: 1.0,
            tau_phase: 1.0,
            tau_precoder: 1.0,
            gamma_cov: 1.0,
            epsilon: 1e-3,
            max_outer_iter: 1000,
            inner_iters: 1,
            update_order: UpdateOrder::GaussSeidel,
            seed: 0,
            mode: IrsMode::Active,
        }
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl ScenarioConfig {
    /// Total reflecting-element count.
    pub fn irs_elements(&self) -> usize {
        self.irs_x * self.irs_y
    }

    /// Transmit power budget in milliwatts.
    pub fn p_t(&self) -> f64 {
        dbm_to_mw(self.p_t_dbm)
    }

    /// Surface power budget in milliwatts.
    pub fn p_irs(&self) -> f64 {
        dbm_to_mw(self.p_irs_dbm)
    }

    pub fn sigma_c_sq(&self) -> f64 {
        dbm_to_mw(self.sigma_c_sq_dbm)
    }

    pub fn sigma_r_sq(&self) -> f64 {
        dbm_to_mw(self.sigma_r_sq_dbm)
    }

    /// Effective cross-section after the path-loss multiplier.
    pub fn effective_rcs(&self) -> Complex64 {
        self.alpha_t.scale(self.path_loss)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(field: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid {
                field,
                reason: reason.into(),
            })
        }
        if self.tx_antennas == 0 {
            return fail("array.n", "antenna count must be >= 1");
        }
        if self.irs_x == 0 || self.irs_y == 0 {
            return fail("array.l_x / array.l_y", "IRS grid counts must be >= 1");
        }
        if self.users == 0 {
            return fail("array.k", "user count must be >= 1");
        }
        if let Quantization::Levels(m) = self.quantization {
            if m < 2 {
                return fail("quantization.m", "level count must be >= 2 (or 'continuous')");
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return fail("weights.beta", format!("beta = {} outside [0, 1]", self.beta));
        }
        if self.rician_kappa < 0.0 || !self.rician_kappa.is_finite() {
            return fail("channel.rician_kappa", "kappa must be finite and >= 0");
        }
        if !(self.epsilon > 0.0) {
            return fail("solver.epsilon", "epsilon must be > 0");
        }
        if self.inner_iters == 0 {
            return fail("solver.inner_iters", "inner iteration count must be >= 1");
        }
        for (field, v) in [
            ("power.p_t_dbm", self.p_t_dbm),
            ("power.p_irs_dbm", self.p_irs_dbm),
            ("noise.sigma_c_sq_dbm", self.sigma_c_sq_dbm),
            ("noise.sigma_r_sq_dbm", self.sigma_r_sq_dbm),
        ] {
            if !v.is_finite() {
                return fail(field, "must be finite");
            }
        }
        if !(self.path_loss > 0.0) || !self.path_loss.is_finite() {
            return fail("target.path_loss", "must be finite and > 0");
        }
        if !(self.nu1 >= 0.0) || !(self.nu2 >= 0.0) {
            return fail("relaxation.nu1 / relaxation.nu2", "relaxation rates must be >= 0");
        }
        Ok(())
    }
}

/// The three CSI matrices plus target geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct base-station → users channel, K×N.
    pub direct: CMatrix,
    /// Base-station → surface channel, L×N.
    pub tx_irs: CMatrix,
    /// Surface → users channel, K×L.
    pub irs_users: CMatrix,
    /// Target steering vector at the surface, length L, unit-modulus entries.
    pub steering: CMatrix,
    /// Effective radar cross-section.
    pub rcs: Complex64,
}

/// The M-level phase grid {2πm/M : m = 0..M−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    pub levels: u32,
    pub angles: Vec<f64>,
}

/// Grid angle 2πm/M, the single expression shared by the quantizer, the
/// relaxation operator and the membership check so equality is bit-exact.
pub fn grid_angle(m: u32, levels: u32) -> f64 {
    2.0 * PI * (m as f64) / (levels as f64)
}

impl PhaseSet {
    pub fn new(levels: u32) -> Self {
        assert!(levels >= 2, "phase set needs at least two levels");
        let angles = (0..levels).map(|m| grid_angle(m, levels)).collect();
        Self { levels, angles }
    }

    /// Grid points as unit-modulus complex numbers.
    pub fn points(&self) -> Vec<Complex64> {
        self.angles
            .iter()
            .map(|&a| Complex64::from_polar(1.0, a))
            .collect()
    }

    /// Exact membership: the value must be bit-identical to a grid point.
    pub fn contains_exact(&self, z: Complex64) -> bool {
        self.points().iter().any(|p| p.re == z.re && p.im == z.im)
    }
}

/// Closest integer, ties resolved to the larger integer.
pub fn nearest_integer(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Fractional remainder x − [x], in [−1/2, 1/2).
pub fn fractional_part(x: f64) -> f64 {
    x - nearest_integer(x)
}

/// Snap a phase to the M-level grid, reduced into [0, 2π).
pub fn quantize_phase(omega: f64, levels: u32) -> f64 {
    assert!(levels >= 2, "quantize_phase needs at least two levels");
    let m = nearest_integer(levels as f64 * omega / (2.0 * PI)) as i64;
    let m = m.rem_euclid(levels as i64) as u32;
    grid_angle(m, levels)
}

/// Planar-array steering vector a = a_x ⊗ a_y at half-wavelength spacing.
///
/// Per-axis entries are e^{jπm·cosθ_h·sinθ_v}, m = 0..count−1.
pub fn steering_vector(theta_h_deg: f64, theta_v_deg: f64, l_x: usize, l_y: usize) -> CMatrix {
    assert!(l_x >= 1 && l_y >= 1, "steering_vector needs positive counts");
    let phase_step = PI * theta_h_deg.to_radians().cos() * theta_v_deg.to_radians().sin();
    let axis = |count: usize| -> CMatrix {
        CMatrix::column(
            (0..count)
                .map(|m| Complex64::from_polar(1.0, phase_step * m as f64))
                .collect(),
        )
    };
    kron(&axis(l_x), &axis(l_y))
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box–Muller; the (0,1] clamp keeps ln() finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * PI * u2;
    // Two N(0,1) components scaled so E|z|² = 1.
    Complex64::new(radius * angle.cos(), radius * angle.sin()).scale(std::f64::consts::FRAC_1_SQRT_2)
}

/// Rician fading draw: √(κ/(1+κ))·los + √(1/(1+κ))·W with W i.i.d. CN(0,1).
///
/// Entries are drawn column-major from the given stream, so equal seeds give
/// bit-identical matrices.
pub fn rician_channel(
    rows: usize,
    cols: usize,
    kappa: f64,
    los: &CMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<CMatrix, ConfigError> {
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(ConfigError::Invalid {
            field: "channel.rician_kappa",
            reason: format!("kappa = {kappa} must be finite and >= 0"),
        });
    }
    assert_eq!(
        (los.rows(), los.cols()),
        (rows, cols),
        "rician_channel: line-of-sight shape mismatch"
    );
    let los_weight = (kappa / (1.0 + kappa)).sqrt();
    let scatter_weight = (1.0 / (1.0 + kappa)).sqrt();
    let mut out = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let w = complex_gaussian(rng);
            out.set(r, c, los.get(r, c).scale(los_weight) + w.scale(scatter_weight));
        }
    }
    Ok(out)
}

/// Deterministic channel construction from the configuration.
///
/// Draw order is fixed (direct, tx→irs, irs→users) so the stream layout is
/// part of the reproducibility contract. The direct and surface→users links
/// use an all-ones line-of-sight component; the tx→surface link uses the
/// rank-one outer product of the surface steering vector at the configured
/// incidence angle with a transmit-side linear-array steering vector.
pub fn build_scenario(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<ChannelSet, ConfigError> {
    config.validate()?;
    let n = config.tx_antennas;
    let l = config.irs_elements();
    let k = config.users;

    let ones = |rows: usize, cols: usize| CMatrix::from_fn(rows, cols, |_, _| Complex64::ONE);

    let direct = rician_channel(k, n, config.rician_kappa, &ones(k, n), rng)?;

    let irs_incident = steering_vector(config.incidence_h_deg, config.incidence_v_deg, config.irs_x, config.irs_y);
    let tx_axis = steering_vector(config.incidence_h_deg, config.incidence_v_deg, n, 1);
    let tx_irs_los = irs_incident.mul(&crate::linalg::conj_transpose(&tx_axis));
    let tx_irs = rician_channel(l, n, config.rician_kappa, &tx_irs_los, rng)?;

    let irs_users = rician_channel(k, l, config.rician_kappa, &ones(k, l), rng)?;

    let steering = steering_vector(config.theta_h_deg, config.theta_v_deg, config.irs_x, config.irs_y);

    Ok(ChannelSet {
        direct,
        tx_irs,
        irs_users,
        steering,
        rcs: config.effective_rcs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, two_norm};
    use rand::SeedableRng;

    #[test]
    fn steering_vector_degenerate_and_flat() {
        let a = steering_vector(30.0, 60.0, 1, 1);
        assert_eq!(a.get(0, 0), Complex64::ONE);
        // sin(0) kills the phase ramp.
        let flat = steering_vector(30.0, 0.0, 3, 2);
        for i in 0..6 {
            assert!((flat.get(i, 0) - Complex64::ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn steering_vector_matches_direct_formula() {
        let a = steering_vector(45.0, 45.0, 2, 2);
        let step = PI * 0.5; // π·cos45°·sin45°
        let ax = [Complex64::ONE, Complex64::from_polar(1.0, step)];
        for ix in 0..2 {
            for iy in 0..2 {
                let want = ax[ix] * ax[iy];
                assert!((a.get(ix * 2 + iy, 0) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn steering_vector_unit_modulus_grid_sweep() {
        let mut h = -90.0;
        while h <= 90.0 {
            let mut v = -90.0;
            while v <= 90.0 {
                let a = steering_vector(h, v, 3, 4);
                for i in 0..12 {
                    assert!((a.get(i, 0).norm() - 1.0).abs() < 1e-14, "h={h} v={v}");
                }
                v += 5.0;
            }
            h += 5.0;
        }
    }

    #[test]
    fn quantize_phase_basics() {
        // Nearest of {0, π}.
        assert_eq!(quantize_phase(0.1 * PI, 2), 0.0);
        // Exact tie resolves to the larger integer.
        assert_eq!(quantize_phase(PI / 4.0, 4), grid_angle(1, 4));
    }

    #[test]
    fn quantize_phase_grid_membership_and_distance() {
        let set = PhaseSet::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let omega = rng.gen::<f64>() * 4.0 * PI - 2.0 * PI;
            let snapped = quantize_phase(omega, 8);
            assert!(set.angles.contains(&snapped));
            // Distance mod 2π never exceeds half a grid step.
            let diff = (snapped - omega).rem_euclid(2.0 * PI);
            let dist = diff.min(2.0 * PI - diff);
            assert!(dist <= PI / 8.0 + 1e-12, "omega={omega} snapped={snapped}");
        }
    }

    #[test]
    fn quantize_phase_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let omega = rng.gen::<f64>() * 20.0 - 10.0;
            let once = quantize_phase(omega, 16);
            assert_eq!(quantize_phase(once, 16), once);
        }
    }

    #[test]
    fn nearest_integer_tie_break_upward() {
        assert_eq!(nearest_integer(0.5), 1.0);
        assert_eq!(nearest_integer(-0.5), 0.0);
        assert_eq!(nearest_integer(2.5), 3.0);
        assert_eq!(nearest_integer(-1.2), -1.0);
    }

    #[test]
    fn rician_limit_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let los = CMatrix::from_fn(3, 2, |r, c| Complex64::new(r as f64 + 1.0, c as f64));
        let nearly_los = rician_channel(3, 2, 1e12, &los, &mut rng).unwrap();
        assert!(frobenius_norm(&nearly_los.sub(&los)) < 1e-5 * frobenius_norm(&los));

        let err = rician_channel(3, 2, -1.0, &los, &mut rng);
        assert!(err.is_err());
    }

    #[test]
    fn rician_rayleigh_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let los = CMatrix::from_fn(1, 1, |_, _| Complex64::ONE);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let m = rician_channel(1, 1, 0.0, &los, &mut rng).unwrap();
            acc += m.get(0, 0).norm_sqr();
        }
        let var = acc / draws as f64;
        assert!((var - 1.0).abs() < 0.02, "empirical variance {var}");
    }

    #[test]
    fn rician_seed_determinism() {
        let los = CMatrix::from_fn(4, 3, |_, _| Complex64::ONE);
        let mut rng_a = ChaCha8Rng::seed_from_u64(15);
        let mut rng_b = ChaCha8Rng::seed_from_u64(15);
        let a = rician_channel(4, 3, 5.0, &los, &mut rng_a).unwrap();
        let b = rician_channel(4, 3, 5.0, &los, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn build_scenario_paper_scale_shapes() {
        let config = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let set = build_scenario(&config, &mut rng).unwrap();
        assert_eq!((set.direct.rows(), set.direct.cols()), (5, 4));
        assert_eq!((set.tx_irs.rows(), set.tx_irs.cols()), (16, 4));
        assert_eq!((set.irs_users.rows(), set.irs_users.cols()), (5, 16));
        assert_eq!(set.steering.rows(), 16);
        for i in 0..16 {
            assert!((set.steering.get(i, 0).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn build_scenario_deterministic_and_minimal() {
        let config = ScenarioConfig::default();
        let mut rng_a = ChaCha8Rng::seed_from_u64(config.seed);
        let mut rng_b = ChaCha8Rng::seed_from_u64(config.seed);
        assert_eq!(
            build_scenario(&config, &mut rng_a).unwrap(),
            build_scenario(&config, &mut rng_b).unwrap()
        );

        let tiny = ScenarioConfig {
            tx_antennas: 1,
            irs_x: 1,
            irs_y: 1,
            users: 1,
            ..ScenarioConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = build_scenario(&tiny, &mut rng).unwrap();
        assert_eq!((set.direct.rows(), set.direct.cols()), (1, 1));
        assert_eq!(set.steering.get(0, 0), Complex64::ONE);
    }

    #[test]
    fn config_validation_rejects_bad_beta() {
        let config = ScenarioConfig {
            beta: 1.5,
            ..ScenarioConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn phase_set_exact_membership() {
        let set = PhaseSet::new(4);
        assert_eq!(set.angles.len(), 4);
        for m in 0..4 {
            let z = Complex64::from_polar(1.0, grid_angle(m, 4));
            assert!(set.contains_exact(z));
        }
        assert!(!set.contains_exact(Complex64::from_polar(1.0, 0.3)));
    }

    #[test]
    fn dbm_conversion() {
        let config = ScenarioConfig {
            p_t_dbm: 50.0,
            p_irs_dbm: 30.0,
            ..ScenarioConfig::default()
        };
        assert!((config.p_t() - 1e5).abs() < 1e-9);
        assert!((config.p_irs() - 1e3).abs() < 1e-12);
        let zero_dbm = ScenarioConfig { sigma_c_sq_dbm: 0.0, ..ScenarioConfig::default() };
        assert!((zero_dbm.sigma_c_sq() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn steering_norm_is_sqrt_l() {
        let a = steering_vector(20.0, 70.0, 4, 4);
        assert!((two_norm(&a) - 4.0).abs() < 1e-12);
    }
}
