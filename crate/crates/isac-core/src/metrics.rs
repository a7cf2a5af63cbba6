//! Radar and communications SNR evaluation.
//!
//! Both SNRs exist in two algebraically equivalent forms:
//!
//! * trace forms on the raw channel matrices — the ground truth every run
//!   reports, and
//! * quadratic/quartic forms in the reflection vector — what the solvers
//!   consume.
//!
//! The two routes must agree to 1e−9 relative; a disagreement indicts the
//! quadratic-side construction, never the trace side.

use num_complex::Complex64;

use crate::linalg::{
    conj_transpose, frobenius_norm, gram, hadamard, hermitian_sandwich, kron, selection_matrix,
    vectorize, CMatrix,
};
use crate::scene::ChannelSet;

/// Combined effective downlink channel C = F + HΦG, K×N.
pub fn comm_channel(channels: &ChannelSet, phi: &CMatrix) -> CMatrix {
    channels
        .direct
        .add(&channels.irs_users.mul(phi).mul(&channels.tx_irs))
}

/// Two-bounce radar response R = α·GᵀΦa aᵀΦG, N×N.
pub fn radar_response(channels: &ChannelSet, phi: &CMatrix) -> CMatrix {
    let outbound = channels.tx_irs.transpose().mul(phi).mul(&channels.steering);
    let inbound = channels.steering.transpose().mul(phi).mul(&channels.tx_irs);
    outbound.mul(&inbound).scale(channels.rcs)
}

/// Communications SNR in trace form: Tr(C P Pᴴ Cᴴ)/σ²_c = ‖CP‖²_F/σ²_c.
pub fn comm_snr_trace(channels: &ChannelSet, phi: &CMatrix, precoder: &CMatrix, sigma_c_sq: f64) -> f64 {
    assert!(sigma_c_sq > 0.0, "comm_snr_trace: noise variance must be positive");
    let received = comm_channel(channels, phi).mul(precoder);
    let norm = frobenius_norm(&received);
    norm * norm / sigma_c_sq
}

/// Radar SNR in trace form: Tr(R P Pᴴ Rᴴ)/σ²_r = ‖RP‖²_F/σ²_r.
pub fn radar_snr_trace(channels: &ChannelSet, phi: &CMatrix, precoder: &CMatrix, sigma_r_sq: f64) -> f64 {
    assert!(sigma_r_sq > 0.0, "radar_snr_trace: noise variance must be positive");
    let received = radar_response(channels, phi).mul(precoder);
    let norm = frobenius_norm(&received);
    norm * norm / sigma_r_sq
}

/// Precomputed factors of the communications SNR quadratic in the augmented
/// reflection vector, plus the cascade matrix the radar quartic needs.
#[derive(Debug, Clone)]
pub struct SnrCache {
    /// vec(F), length KN.
    pub f_vec: CMatrix,
    /// Gᵀ ⊗ H, (KN)×L².
    pub chan_kron: CMatrix,
    /// Selection matrix with T·v = vec(Diag(v)), L²×L.
    pub selection: CMatrix,
    /// (Pᵀ⊗I_K)ᴴ(Pᵀ⊗I_K), NK×NK Hermitian PSD.
    pub precoder_gram: CMatrix,
    /// Cross term (G̃T)ᴴ Q̂ F̃, length L.
    pub cross_vec: CMatrix,
    /// (G̃T)ᴴ Q̂ (G̃T), L×L Hermitian PSD.
    pub reflect_gram: CMatrix,
    /// The (L+1)×(L+1) bordered matrix with v̄ᴴ·comm_quad·v̄ = SNR_c.
    pub comm_quad: CMatrix,
    /// Cascade Diag(a)·G, L×N.
    pub cascade: CMatrix,
}

/// Assemble the quadratic-form cache for a given precoder.
pub fn build_snr_cache(channels: &ChannelSet, precoder: &CMatrix, sigma_c_sq: f64) -> SnrCache {
    assert!(sigma_c_sq > 0.0, "build_snr_cache: noise variance must be positive");
    let l = channels.tx_irs.rows();
    let k = channels.irs_users.rows();

    let f_vec = vectorize(&channels.direct);
    let chan_kron = kron(&channels.tx_irs.transpose(), &channels.irs_users);
    let selection = selection_matrix(l);
    let lifted = kron(&precoder.transpose(), &CMatrix::identity(k));
    let precoder_gram = gram(&lifted);

    let reduced = chan_kron.mul(&selection);
    let cross_vec = conj_transpose(&reduced).mul(&precoder_gram.mul(&f_vec));
    let reflect_gram = hermitian_sandwich(&precoder_gram, &reduced);
    let corner = conj_transpose(&f_vec)
        .mul(&precoder_gram.mul(&f_vec))
        .get(0, 0)
        .re;
    let comm_quad = CMatrix::bordered(&reflect_gram, &cross_vec, corner).scale_re(1.0 / sigma_c_sq);

    let cascade = CMatrix::diag(&channels.steering).mul(&channels.tx_irs);

    SnrCache {
        f_vec,
        chan_kron,
        selection,
        precoder_gram,
        cross_vec,
        reflect_gram,
        comm_quad,
        cascade,
    }
}

/// Radar SNR quartic kernel: the L×L Hermitian PSD matrix with
/// vᴴ·Q(v)·v equal to the radar trace SNR at reflection vector v.
pub fn radar_quadratic(
    reflection: &CMatrix,
    cascade: &CMatrix,
    precoder: &CMatrix,
    rcs: Complex64,
    sigma_r_sq: f64,
) -> CMatrix {
    assert!(sigma_r_sq > 0.0, "radar_quadratic: noise variance must be positive");
    assert_eq!(reflection.cols(), 1, "radar_quadratic: reflection must be a column");
    assert_eq!(reflection.rows(), cascade.rows(), "radar_quadratic: shape mismatch");
    let cascade_conj = cascade.conj();
    let left = kron(
        &conj_transpose(reflection).mul(&cascade_conj),
        &cascade_conj.mul(&precoder.conj()),
    );
    let right = kron(
        &cascade.transpose().mul(reflection),
        &precoder.transpose().mul(&cascade.transpose()),
    );
    left.mul(&right)
        .scale_re(rcs.norm_sqr() / sigma_r_sq)
        .hermitized()
}

/// Weighted objective matrix: β·[[Q(v), 0],[0, 0]] + (1−β)·comm_quad.
pub fn weighted_quadratic(beta: f64, radar_quad: &CMatrix, comm_quad: &CMatrix) -> CMatrix {
    assert_eq!(
        radar_quad.rows() + 1,
        comm_quad.rows(),
        "weighted_quadratic: block sizes must differ by one"
    );
    CMatrix::pad_corner(radar_quad)
        .scale_re(beta)
        .add(&comm_quad.scale_re(1.0 - beta))
}

/// Congruence mask w*wᵀ ⊙ A, satisfying xᴴ(w*wᵀ ⊙ A)x = (w⊙x)ᴴA(w⊙x).
pub fn mask_quadratic(a: &CMatrix, w: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "mask_quadratic: matrix must be square");
    assert_eq!(w.cols(), 1, "mask_quadratic: mask must be a column");
    assert_eq!(w.rows(), a.rows(), "mask_quadratic: mask length mismatch");
    let rank_one = CMatrix::from_fn(a.rows(), a.rows(), |r, c| w.get(r, 0).conj() * w.get(c, 0));
    hadamard(&rank_one, a)
}

/// Weighted SNR summary. The weighted total is β·snr_r + (1−β)·snr_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrBreakdown {
    pub snr_r: f64,
    pub snr_c: f64,
    pub snr_t: f64,
}

/// Evaluate both SNRs (trace forms) at a reflection vector and precoder.
pub fn evaluate_snr(
    channels: &ChannelSet,
    reflection: &CMatrix,
    precoder: &CMatrix,
    beta: f64,
    sigma_c_sq: f64,
    sigma_r_sq: f64,
) -> SnrBreakdown {
    let phi = CMatrix::diag(reflection);
    let snr_c = comm_snr_trace(channels, &phi, precoder, sigma_c_sq);
    let snr_r = radar_snr_trace(channels, &phi, precoder, sigma_r_sq);
    SnrBreakdown {
        snr_r,
        snr_c,
        snr_t: beta * snr_r + (1.0 - beta) * snr_c,
    }
}
