// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "riskit/types.hpp"

namespace riskit::channel {

struct SystemDims {
    int n_bs = 1;
    int m_ris = 1;
    // Planar layout; both zero means "not declared" (treated as m_x = m_ris, m_z = 1).
    int m_x = 0;
    int m_z = 0;
    int k_users = 1;

    void validate() const;
    bool planar() const { return m_x > 0 && m_z > 0; }
    int rows_x() const { return planar() ? m_x : m_ris; }
    int rows_z() const { return planar() ? m_z : 1; }
};

// Per-user scalars accept either one value per user, a single value broadcast
// to all users, or nothing (defaults documented per field).
struct RicianConfig {
    double beta = 1.0;           // RIS-BS pathloss
    std::vector<double> alpha;   // user-RIS pathloss, default 1
    std::vector<double> gamma;   // user-BS pathloss, default 1
    double delta = 0.0;          // RIS-BS Rician factor
    std::vector<double> eps;     // user-RIS Rician factors, default 0
    std::vector<double> varpi;   // user-BS Rician factors, default 0

    CMat h_los;                  // N x M, default zero
    std::vector<CVec> hr_los;    // M each, default zero
    std::vector<CVec> hd_los;    // N each, default zero

    CMat r_hr;                   // M x M receive-side correlation at the RIS, default I
    CMat r_hb;                   // N x N correlation at the BS, default I
    std::vector<CMat> r_hrr;     // per user M x M, default I
    std::vector<CMat> r_hdb;     // per user N x N, default I

    // Drop every NLoS part (the infinite-Rician-factor limit).
    bool los_only = false;

    void validate(const SystemDims& dims) const;
};

struct ChannelSet {
    CMat h;                  // RIS -> BS, N x M
    std::vector<CVec> hr;    // user -> RIS, M each
    std::vector<CVec> hd;    // user -> BS, N each

    int users() const { return static_cast<int>(hr.size()); }
    CMat cascaded(int k) const;
};

// Entry (i, j) = rho^|i-j|.
CMat exp_correlation_matrix(int n, double rho);

// Returns L with L L^H = r. Cholesky first; otherwise an eigen-decomposition
// with small negative eigenvalues (>= -1e-10 relative) clipped to zero.
CMat coloring_factor(const CMat& r);

ChannelSet gen_unstructured(const SystemDims& dims, const RicianConfig& cfg, std::uint64_t seed);

// Mean channel E{.} under cfg (LoS parts scaled by their Rician weights).
ChannelSet mean_channels(const SystemDims& dims, const RicianConfig& cfg);

CVec ula_steering(double omega, int n);
CVec upa_steering(double omega_x, double omega_z, int m_x, int m_z);

struct SpatialFreq2 {
    double x = 0.0;
    double z = 0.0;
};

struct SvUser {
    CVec beta;                          // L_RU gains
    std::vector<SpatialFreq2> omega_rhr; // L_RU user-side frequencies at the RIS
};

struct SvParams {
    CVec alpha;                          // L_BR gains
    std::vector<double> omega_bh;        // L_BR BS-side frequencies
    std::vector<SpatialFreq2> omega_rh;  // L_BR RIS-side frequencies of the RIS-BS link
    std::vector<SvUser> users;

    int l_br() const { return static_cast<int>(alpha.size()); }
};

// H = A_B diag(alpha) A_R^H, h_r = A_R(user freqs) beta, h_d = 0.
ChannelSet sv_channels(const SystemDims& dims, const SvParams& p);

// G = H diag(h_r).
CMat cascaded_channel(const CMat& h, const CVec& hr);

struct NearFieldScene {
    Vec3 ris_origin = Vec3::Zero();
    int m_x = 1;
    int m_z = 1;
    double wavelength = 1.0;
    double spacing = 0.0;               // <= 0 selects wavelength / 2
    std::vector<Vec3> bs_positions;     // one entry per BS antenna
    double bs_ris_gain = 1.0;           // common pathloss of the BS-RIS LoS link
    Vec3 mu_position = Vec3::Zero();
    cd mu_gain{1.0, 0.0};
    std::vector<Vec3> scatterer_positions;
    std::vector<cd> scatterer_gains;

    void validate() const;
    double element_spacing() const { return spacing > 0.0 ? spacing : 0.5 * wavelength; }
    int elements() const { return m_x * m_z; }
    // Element (ix, iz) sits at index ix * m_z + iz on the XOZ plane.
    std::vector<Vec3> ris_elements() const;
    double aperture_side() const { return std::max(m_x, m_z) * element_spacing(); }
};

// Entries exp(-j 2 pi / lambda * |source - element|).
CVec nearfield_steering(const NearFieldScene& scene, const Vec3& source);

// H(n, m) = alpha exp(+j 2 pi / lambda * r_nm), BS antenna n to RIS element m.
CMat nearfield_bs_ris(const NearFieldScene& scene);

// Uniform linear array positions centred at `center` along the unit `axis`.
std::vector<Vec3> ula_positions(const Vec3& center, int n, double spacing, const Vec3& axis);

// y = H diag(theta) sum_l gain_l a(p_l) for the MU (l = 0) and scatterers.
CVec nearfield_received(const NearFieldScene& scene, const CVec& theta);

double fraunhofer_distance(double aperture, double wavelength);

enum class LinkKind { direct, reflected };

// Direct links take one distance, reflected links take (d_BR, d_RM).
double pathloss_db(LinkKind kind, const std::vector<double>& distances, double fc_hz,
                   double exponent, double shadow_db);

} // namespace riskit::channel
