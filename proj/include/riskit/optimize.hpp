// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "riskit/types.hpp"

namespace riskit::optimize {

// Downlink: user k sees e_{k,i} = (h_d,k^H + theta^T G_k^H) w_i.
struct DownlinkInstance {
    std::vector<CMat> g;   // per user, N x M
    std::vector<CVec> hd;  // per user, N
    RVec sigma2;           // per user noise power
    CMat w;                // N x K beam matrix

    int users() const { return static_cast<int>(g.size()); }
    int antennas() const { return g.empty() ? 0 : static_cast<int>(g.front().rows()); }
    int elements() const { return g.empty() ? 0 : static_cast<int>(g.front().cols()); }
    void validate() const;
};

struct RateResult {
    RVec sinr;
    RVec rate;
    double sum_rate = 0.0;
};

RateResult sinr_and_rate(const DownlinkInstance& inst, const CVec& theta);

// Columns q_k = h_d,k + G_k conj(theta), so that e_{k,i} = q_k^H w_i.
CMat effective_channels(const DownlinkInstance& inst, const CVec& theta);

enum class BeamKind { mrt, mrc, zf, lmmse_rx };

// q holds one effective channel per column. powers may have size 1 (broadcast).
CMat beamformer(BeamKind kind, const CMat& q, const RVec& powers, double sigma2 = 1.0);

CVec project_unit_modulus(const CVec& z);
CVec mm_subproblem(const CVec& q);

// Objective to maximize. gradient() returns 2 df/d(conj theta), i.e. the
// real gradient packed as d/dRe + j d/dIm.
class SmoothObjective {
public:
    virtual ~SmoothObjective() = default;
    virtual double value(const CVec& theta) const = 0;
    virtual CVec gradient(const CVec& theta) const = 0;
    // out[c] = value(theta with entry m replaced by candidates[c]).
    virtual void coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const;
};

// Re{theta^H q}
class LinearObjective final : public SmoothObjective {
public:
    explicit LinearObjective(CVec q) : q_(std::move(q)) {}
    double value(const CVec& theta) const override;
    CVec gradient(const CVec& theta) const override;

private:
    CVec q_;
};

// c * base
class ScaledObjective final : public SmoothObjective {
public:
    ScaledObjective(const SmoothObjective& base, double c) : base_(base), c_(c) {}
    double value(const CVec& theta) const override { return c_ * base_.value(theta); }
    CVec gradient(const CVec& theta) const override { return c_ * base_.gradient(theta); }
    void coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const override;

private:
    const SmoothObjective& base_;
    double c_;
};

// Sum of log2(1 + SINR_k) for fixed beams.
class SumRateObjective final : public SmoothObjective {
public:
    explicit SumRateObjective(DownlinkInstance inst);
    double value(const CVec& theta) const override;
    CVec gradient(const CVec& theta) const override;
    void coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const override;
    const DownlinkInstance& instance() const { return inst_; }

private:
    DownlinkInstance inst_;
    CMat a_;               // a(k, i) = h_d,k^H w_i
    std::vector<CMat> b_;  // b_[k](:, i) = G_k^H w_i  (M x K)
    CMat terms(const CVec& theta) const;
};

struct OptimizerReport {
    CVec theta;
    std::vector<double> trace;        // one entry per iteration plus the start
    std::vector<double> elapsed_ns;   // matches trace
    std::vector<double> aux;          // method specific (APG momentum, ADMM residual, ...)
    std::vector<CVec> iterates;       // filled only when requested
    int iterations = 0;
    double wall_time = 0.0;           // seconds
    double final_value = 0.0;         // objective at theta
    bool lipschitz_adjusted = false;  // MM had to enlarge L after a decrease
    bool diverged = false;
    std::string note;

    void write_csv(std::ostream& os) const;
};

// 2 df/d(conj theta) by central differences on real and imaginary parts.
CVec numeric_gradient(const std::function<double(const CVec&)>& fn, const CVec& theta, double h = 1e-6);

// Largest |eigenvalue| of the real Hessian near theta (power iteration on
// finite-difference Hessian-vector products).
double estimate_lipschitz(const SmoothObjective& obj, const CVec& theta, int iters = 20);

struct MmOptions {
    int iters = 200;
    double lipschitz = 0.0;  // <= 0: 10x the estimate_lipschitz value at theta0
    double tol = 1e-10;      // relative improvement below which iteration stops
};
OptimizerReport optimize_mm(const SmoothObjective& obj, const CVec& theta0, const MmOptions& opt = {});

// Riemannian tangent projection on the complex circle manifold.
CVec ccm_tangent(const CVec& eta, const CVec& theta);

struct CcmOptions {
    double step = 1.0;   // initial step, in radians of the largest entry move
    int iters = 200;
    int max_halvings = 40;
    double tol = 1e-10;
};
OptimizerReport optimize_ccm(const SmoothObjective& obj, const CVec& theta0, const CcmOptions& opt = {});

struct GdOptions {
    double step = 1.0;   // relative to the largest gradient entry
    int iters = 200;
    int max_halvings = 40;
    double tol = 1e-10;
};
OptimizerReport optimize_gd(const SmoothObjective& obj, const CVec& theta0, const GdOptions& opt = {});

// Momentum recursion xi_{i+1} = (1 + sqrt(1 + 4 xi_i^2)) / 2.
double apg_momentum(double xi);

struct ApgOptions {
    int iters = 200;
    int max_halvings = 40;
};
// aux holds xi_0, xi_1, ...; theta is the best iterate seen.
OptimizerReport optimize_apg(const SmoothObjective& obj, const CVec& theta0, const ApgOptions& opt = {});

struct BcdOptions {
    int grid = 360;
    int sweeps = 10;
    double tol = 1e-12;
};
OptimizerReport optimize_bcd(const SmoothObjective& obj, const CVec& theta0, const BcdOptions& opt = {});

struct AdmmOptions {
    double penalty = 0.0;  // initial value; <= 0: twice the Lipschitz estimate. Grows 1.1x while the residual stalls
    int inner_steps = 20;
    int iters = 300;
    double tol = 1e-6;     // stop once the primal residual is below this
};
// aux holds the primal residual ||theta - omega|| per iteration.
OptimizerReport optimize_admm(const SmoothObjective& obj, const CVec& theta0, const AdmmOptions& opt = {});

// -ln(x)/kappa for x > 0, +inf otherwise.
double log_barrier(double x, double kappa);

struct BarrierOptions {
    double kappa = 100.0;
    int p = 20;
    int iters = 200;
    double slack = 1.05;   // feasibility radius relative to the unit-modulus p-norm
    double tol = 1e-10;
};
OptimizerReport optimize_barrier(const SmoothObjective& obj, const CVec& theta0, const BarrierOptions& opt = {});

using ValueFn = std::function<double(const CVec&)>;

struct GaOptions {
    int population = 40;
    int generations = 100;
    int bits = 0;              // 0: continuous phases
    std::uint64_t seed = 1;
    double crossover = 0.9;
    double mutation = 0.0;     // per-gene rate; <= 0 means 1/M
    double mutation_sigma = 0.5;
    int elites = 2;
};
OptimizerReport optimize_ga(const ValueFn& fn, int m, const GaOptions& opt, const std::optional<CVec>& incumbent = {});

// Discrete set {exp(j 2 pi l / L)}, L = 2^bits; rotated adds pi/L.
CVec discrete_set(int bits, bool rotated = false);
CVec discretize_round(const CVec& theta, int bits, bool rotated = false);

// Closed-form projection onto the convex hull of the rotated discrete set.
cd project_rotated_hull(cd u, int bits);
CVec project_rotated_hull(const CVec& u, int bits);

struct NspOptions {
    int bits = 1;
    double lambda = 0.0;  // <= 0: the Lipschitz estimate at theta0
    int iters = 30;       // majorization rounds
    int inner_iters = 50;
    int max_halvings = 40;
    bool record_iterates = false;
};
// trace holds the penalized value -f - lambda ||theta||^2 (minimized);
// theta is snapped onto the rotated discrete set.
OptimizerReport optimize_nsp(const SmoothObjective& obj, const CVec& theta0, const NspOptions& opt = {});

using PhasePass = std::function<OptimizerReport(const SmoothObjective&, const CVec&)>;

struct AoResult {
    CVec theta;
    CMat w;
    std::vector<double> sum_rate;  // after each round
};

// Alternates closed-form beams (mrt or zf, column power sqrt(P_k)) with a
// phase pass over the sum rate.
AoResult alternating_optimize(DownlinkInstance inst, const CVec& theta0, BeamKind beams, const RVec& powers,
                              const PhasePass& pass, int rounds = 10);

} // namespace riskit::optimize
