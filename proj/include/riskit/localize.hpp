// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "riskit/channel.hpp"
#include "riskit/errors.hpp"
#include "riskit/types.hpp"

namespace riskit::localize {

// Degenerate geometry or a solver that failed to converge.
class SolverError : public NumericError {
public:
    using NumericError::NumericError;
};

// ---------------------------------------------------------------- far field

struct FarFieldScene {
    Vec3 bs = Vec3::Zero();
    std::vector<Vec3> ris;
    Vec3 mu = Vec3::Zero();       // z must be 0
    double alpha = 0.0;           // MU rotation in [0, pi)
    double c = 299792458.0;
    void validate() const;
};

enum class MeasKind {
    toa_direct,     // |q - p| / c, seconds
    toa_ris,        // |p - s_k| / c, seconds
    tdoa,           // |p - s_k| - |q - p|, metres
    aod_bs,         // asin((p_x - q_x) / |p - q|)
    aoa_ris_az,     // asin((p_y - s_ky) / horizontal distance)
    aoa_ris_el,     // acos(-s_kz / |p - s_k|)
    aoa_mu_direct,  // rotated arrival angle at the MU from the BS
    aoa_mu_ris,     // rotated arrival angle at the MU from RIS k
};

struct Measurement {
    MeasKind kind = MeasKind::tdoa;
    int anchor = 0;          // RIS index for per-RIS kinds, ignored otherwise
    double value = 0.0;
    double variance = 0.0;
};

using MeasurementSet = std::vector<Measurement>;

struct MeasurementMask {
    bool toa = false;
    bool tdoa = true;
    bool aod_bs = false;
    bool ris_angles = false;
    bool mu_angles = false;
};

struct NoiseStd {
    double toa_s = 0.0;
    double tdoa_m = 0.0;
    double angle_rad = 0.0;
};

// Noise-free value at eta = (p_x, p_y, alpha).
double measurement_model(const FarFieldScene& scene, MeasKind kind, int anchor, const Vec3& eta);
// (d/dp_x, d/dp_y, d/dalpha) of measurement_model.
Vec3 measurement_jacobian(const FarFieldScene& scene, MeasKind kind, int anchor, const Vec3& eta);
bool depends_on_rotation(MeasKind kind);

MeasurementSet simulate_measurements(const FarFieldScene& scene, const NoiseStd& noise, std::uint64_t seed,
                                     const MeasurementMask& mask = {});

struct FimResult {
    RMat j_eta;     // diagonal measurement-domain FIM
    RMat t;         // rows: p_x, p_y (and alpha when observable)
    RMat j;         // T J_eta T^T
    double peb = 0.0;
    double reb = 0.0;  // infinity when no measurement depends on alpha
    bool singular = false;
};

FimResult measurement_fim(const FarFieldScene& scene, const MeasurementSet& meas);

enum class ChanStage2 { automatic, always, never };

struct ChanOptions {
    // automatic runs the constrained second stage and falls back to the
    // linear solution when that stage has no real root.
    ChanStage2 stage2 = ChanStage2::automatic;
    std::vector<double> variances;  // per difference; empty means equal
};

// Closed-form two-step weighted LS on distance differences
// d_k = |p - s_k| - |p - ref|, with p on the z = 0 plane.
Eigen::Vector2d chan_solve(const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref,
                           const ChanOptions& opt = {});

struct TaylorOptions {
    int max_iters = 50;
    double tol = 1e-10;
    std::vector<double> variances;
};

struct TaylorResult {
    Eigen::Vector2d position;
    int iterations = 0;
    std::vector<double> update_norms;
    bool converged = false;
};

// Gauss-Newton on the same model; throws SolverError after five consecutive
// growing updates.
TaylorResult taylor_solve(const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref,
                          const Eigen::Vector2d& init, const TaylorOptions& opt = {});

// Helpers for TDoA-only sets built by simulate_measurements.
std::vector<double> tdoa_values(const MeasurementSet& meas);

// --------------------------------------------------------------- near field

// Points on the plane z = plane_z, given in polar form around `origin`
// (its z is ignored): azimuth measured from +x, horizontal distance.
struct PolarGrid {
    Vec3 origin = Vec3::Zero();
    double plane_z = 0.0;
    std::vector<double> azimuth;
    std::vector<double> distance;

    int size() const { return static_cast<int>(azimuth.size() * distance.size()); }
    int index(int ia, int id) const { return ia * static_cast<int>(distance.size()) + id; }
    Vec3 point(int i) const;
    Vec3 at(double az, double dist) const;
};

// Uniform azimuths in [az_min, az_max], geometric distances in [d_min, d_max].
PolarGrid make_polar_grid(const Vec3& origin, double plane_z, int n_az, double az_min, double az_max, int n_dist,
                          double d_min, double d_max);

// Received pilots stacked over one or more RIS configurations.
struct NfModel {
    channel::NearFieldScene scene;
    CMat b;  // [H diag(theta_1); H diag(theta_2); ...]
    // Orthonormal basis of the numerical range of b (singular values above
    // 1e-10 of the largest) and b expressed in it. Searches run in these
    // coordinates; the out-of-range part of y only adds a constant.
    CMat basis;
    CMat b_reduced;

    NfModel(channel::NearFieldScene s, const CVec& theta_hat);
    NfModel(channel::NearFieldScene s, const std::vector<CVec>& snapshots);
    int snapshots() const;
    CVec response(const Vec3& p) const;
    CVec reduced_response(const Vec3& p) const;
};

// Phases maximizing received power from `focus` (principal eigenvector).
CVec nf_focus_phases(const channel::NearFieldScene& scene, const Vec3& focus);

// One reduced-coordinate response per grid point (columns).
CMat nf_responses(const NfModel& model, const PolarGrid& grid);

struct NfPath {
    Vec3 position = Vec3::Zero();
    cd gain{0.0, 0.0};
    int grid_index = -1;
    double azimuth = 0.0;
    double distance = 0.0;
};

// Gain-projected grid search; responses may be precomputed by nf_responses.
NfPath nf_coarse_localize(const CVec& y, const NfModel& model, const PolarGrid& grid, const CMat* responses = nullptr);

struct NfCoarseResult {
    std::vector<NfPath> paths;             // MU first, then scatterers in detection order
    std::vector<double> residual_norms;    // ||y||, after MU, after each scatterer
    CVec residual;
};

NfCoarseResult nf_cancel_and_localize(const CVec& y, const NfModel& model, const PolarGrid& grid, int l_ru,
                                      const CMat* responses = nullptr);

struct NfRefineResult {
    std::vector<NfPath> paths;
    std::vector<double> residual_norms;  // start, then after each round
};

NfRefineResult nf_refine(const CVec& y, const NfModel& model, const PolarGrid& grid, std::vector<NfPath> paths,
                         int factor = 4, int rounds = 2);

} // namespace riskit::localize
