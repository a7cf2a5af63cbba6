//! Precoder updates.
//!
//! The precoder block maximizes the weighted SNR subject to a power budget
//! and a soft covariance-matching penalty. The quartic in the vectorized
//! precoder is handled the same way as the surface blocks: paired tracks,
//! penalty coupling, diagonal loading, one power step per track.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::irs_solver::LoadedQuadratic;
use crate::linalg::{gram, kron, loading_bound, two_norm, CMatrix};
use crate::scene::ScenarioConfig;

/// Paired vectorized-precoder tracks plus the covariance target.
#[derive(Debug, Clone)]
pub struct PrecoderState {
    /// Column-major vectorized precoders, length NK, ‖p̃‖² equal to the
    /// transmit budget.
    pub tracks: [CMatrix; 2],
    /// Desired transmit covariance, Hermitian PSD with trace equal to the
    /// transmit budget.
    pub desired_cov: CMatrix,
    pub antennas: usize,
    pub users: usize,
}

impl PrecoderState {
    /// Perturbed-uniform start rescaled onto the power sphere; the desired
    /// covariance defaults to the omnidirectional (P_T/N)·I.
    pub fn init(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Self {
        let n = config.tx_antennas;
        let k = config.users;
        let p_t = config.p_t();
        let raw = CMatrix::from_fn(n * k, 1, |_, _| {
            Complex64::ONE
                + Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).scale(0.1)
        });
        let track = raw.scale_re(p_t.sqrt() / two_norm(&raw));
        let desired_cov = CMatrix::identity(n).scale_re(p_t / n as f64);
        Self {
            tracks: [track.clone(), track],
            desired_cov,
            antennas: n,
            users: k,
        }
    }

    /// Replace the covariance target (must be Hermitian with trace P_T).
    pub fn with_desired_cov(mut self, desired_cov: CMatrix, p_t: f64) -> Self {
        assert!(desired_cov.is_hermitian(1e-10), "desired covariance must be Hermitian");
        let tr = crate::linalg::trace(&desired_cov);
        assert!(
            (tr.re - p_t).abs() <= 1e-8 * p_t.max(1.0) && tr.im.abs() <= 1e-8 * p_t.max(1.0),
            "desired covariance trace must equal the transmit budget"
        );
        self.desired_cov = desired_cov;
        self
    }

    /// N×K matrix view of a track (column-major unvec).
    pub fn precoder_matrix(&self, track: usize) -> CMatrix {
        CMatrix::from_data(self.antennas, self.users, self.tracks[track].entries().to_vec())
    }

    pub fn track_gap(&self) -> f64 {
        two_norm(&self.tracks[0].sub(&self.tracks[1]))
    }

    /// Worst relative deviation of ‖p̃‖² from the transmit budget.
    pub fn budget_defect(&self, p_t: f64) -> f64 {
        self.tracks
            .iter()
            .map(|t| {
                let sq = two_norm(t).powi(2);
                (sq - p_t).abs() / p_t
            })
            .fold(0.0, f64::max)
    }
}

/// Weighted SNR curvature Z = (β/σ²_r)·RᴴR + ((1−β)/σ²_c)·CᴴC, N×N
/// Hermitian PSD; its quadratic form in the vectorized precoder equals the
/// weighted SNR.
pub fn build_snr_weight(
    radar_resp: &CMatrix,
    comm_chan: &CMatrix,
    beta: f64,
    sigma_r_sq: f64,
    sigma_c_sq: f64,
) -> CMatrix {
    assert!(radar_resp.is_square(), "build_snr_weight: radar response must be N×N");
    assert_eq!(
        radar_resp.cols(),
        comm_chan.cols(),
        "build_snr_weight: antenna dimension mismatch"
    );
    gram(radar_resp)
        .scale_re(beta / sigma_r_sq)
        .add(&gram(comm_chan).scale_re((1.0 - beta) / sigma_c_sq))
}

/// Diagonally loaded block weight Z̆ = λ_m·I − I_K ⊗ Z (λ_m bounds the
/// spectrum of Z, which the Kronecker lift shares).
pub fn build_loaded_weight(snr_weight: &CMatrix, users: usize, seed: u64) -> (CMatrix, f64) {
    let lambda = loading_bound(snr_weight, seed);
    let lifted = kron(&CMatrix::identity(users), snr_weight);
    let loaded = CMatrix::identity(lifted.rows()).scale_re(lambda).sub(&lifted);
    (loaded, lambda)
}

/// Penalized quartic kernel Ω̆(p̃) = Z̆ + γ(I_K ⊗ PPᴴ) − 2γ(I_K ⊗ R_D).
pub fn build_penalized_quad(
    p_tilde: &CMatrix,
    loaded_weight: &CMatrix,
    gamma: f64,
    desired_cov: &CMatrix,
    antennas: usize,
    users: usize,
) -> CMatrix {
    assert_eq!(p_tilde.rows(), antennas * users, "build_penalized_quad: track length mismatch");
    assert_eq!(loaded_weight.rows(), antennas * users, "build_penalized_quad: weight size mismatch");
    let p_matrix = CMatrix::from_data(antennas, users, p_tilde.entries().to_vec());
    let covariance = gram(&crate::linalg::conj_transpose(&p_matrix));
    let eye = CMatrix::identity(users);
    loaded_weight
        .add(&kron(&eye, &covariance).scale_re(gamma))
        .sub(&kron(&eye, desired_cov).scale_re(2.0 * gamma))
}

/// Bordered, loaded precoder step matrix ℬ(p̃_i).
pub fn build_precoder_step(
    p_tilde_i: &CMatrix,
    penalized: &CMatrix,
    tau_precoder: f64,
    p_t: f64,
    seed: u64,
) -> LoadedQuadratic {
    assert!(
        penalized.is_hermitian(1e-10),
        "build_precoder_step: penalized kernel must be Hermitian"
    );
    assert_eq!(p_tilde_i.rows(), penalized.rows(), "build_precoder_step: track length mismatch");
    let inner = loading_bound(penalized, seed);
    let bordered = CMatrix::bordered(
        penalized,
        &p_tilde_i.scale_re(-tau_precoder),
        2.0 * tau_precoder * p_t,
    );
    let outer = loading_bound(&bordered, seed).max(inner);
    LoadedQuadratic {
        matrix: CMatrix::identity(bordered.rows())
            .scale_re(outer)
            .sub(&bordered),
        outer_loading: outer,
        inner_loading: inner,
    }
}

/// One precoder power step: multiply, truncate to the first NK entries,
/// rescale onto the power sphere. Keeps the previous track (flagged) when the
/// product vanishes.
pub fn update_precoder(
    state: &PrecoderState,
    step: &LoadedQuadratic,
    p_t: f64,
    track_j: usize,
) -> (CMatrix, bool) {
    let nk = state.antennas * state.users;
    let lifted = state.tracks[track_j].append_ones(1);
    assert_eq!(step.matrix.rows(), nk + 1, "update_precoder: step matrix size mismatch");
    let product = step.matrix.mul(&lifted).head(nk);
    let norm = two_norm(&product);
    if norm == 0.0 {
        return (state.tracks[track_j].clone(), true);
    }
    (product.scale_re(p_t.sqrt() / norm), false)
}
