// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "riskit/channel.hpp"
#include "riskit/rng.hpp"
#include "riskit/types.hpp"

namespace riskit::estimation {

enum class TrainingKind { onoff, dft, hadamard };

struct TrainingMatrix {
    CMat phi;  // T x (M + 1); row t is [1, theta_t^T] up to the pilot symbol
    TrainingKind kind = TrainingKind::dft;

    int slots() const { return static_cast<int>(phi.rows()); }
    int elements() const { return static_cast<int>(phi.cols()) - 1; }
};

// Smallest power of two >= m + 1.
int hadamard_length(int m);

// t <= 0 picks the shortest admissible length for the kind.
TrainingMatrix build_training(TrainingKind kind, int m, int t = 0);

struct StackedObservation {
    CVec y;            // N T, slot-major: [y_1; ...; y_T]
    CVec x;            // pilot symbol per slot, |x_t| = 1
    double p = 1.0;
    double sigma2 = 1.0;

    int slots() const { return static_cast<int>(x.size()); }
    int n_bs() const { return slots() == 0 ? 0 : static_cast<int>(y.size()) / slots(); }
};

struct ChannelEstimate {
    CVec c_hat;                  // [h_d; g_1; ...; g_M]
    std::optional<CMat> err_cov;

    // Views of c_hat as h_d and the N x M cascaded matrix.
    CVec direct(int n_bs) const { return c_hat.head(n_bs); }
    CMat cascaded(int n_bs) const;
};

// c = [h_d; vec(G)].
CVec stack_channel(const CVec& hd, const CMat& g);

// Noiseless y = sqrt(P) X (Phi kron I_N) c; x defaults to all ones.
CVec forward_model(const CVec& c, const TrainingMatrix& phi, double p, const CVec& x = CVec());

// Forward model plus CN(0, sigma2) noise drawn from rng.
StackedObservation observe(const CVec& c, const TrainingMatrix& phi, double p, double sigma2, Rng& rng,
                           const CVec& x = CVec());

ChannelEstimate ls_estimate(const StackedObservation& obs, const TrainingMatrix& phi, bool with_cov = true);

// (sigma2 / P) (Phi^H Phi)^{-1} kron I_N.
CMat ls_error_cov(const TrainingMatrix& phi, double p, double sigma2, int n_bs);

// blockdiag(R_hdB, (R_hrR o R_HR) kron R_HB).
CMat build_ccc(const CMat& r_hdb, const CMat& r_hrr, const CMat& r_hr, const CMat& r_hb);

// Zero-mean LMMSE estimator with its filter cached, so Monte-Carlo loops pay
// for the matrix inverse once per (Phi, C, P, sigma2).
class LmmseFilter {
public:
    LmmseFilter(const TrainingMatrix& phi, const CMat& ccc, double p, double sigma2);

    CVec apply(const StackedObservation& obs) const;
    const CMat& error_cov() const { return err_cov_; }

private:
    CMat phi_;
    CMat filter_;
    CMat err_cov_;
    int n_bs_;
    double p_;
};

ChannelEstimate lmmse_estimate(const StackedObservation& obs, const TrainingMatrix& phi, const CMat& ccc);

// G' = G (I_{M/J} kron 1_J): sums of J adjacent columns.
CMat element_group(const CMat& g, int j);
// G ~= (G' kron 1_J^T) / J.
CMat eg_recover(const CMat& g_reduced, int j);
// Full-size training where every reduced column drives J adjacent elements.
TrainingMatrix expand_grouped(const TrainingMatrix& reduced, int j);

// Column k of the result is Y_t x_k^*. Pilots must satisfy X^H X = K I.
// The output carries K times the single-user signal and noise variance K sigma2.
CMat mu_decorrelate(const CMat& y_t, const CMat& pilots);

struct ThreeStageConfig {
    double sigma2 = 0.0;
    std::vector<double> powers;  // per user; empty means 1
};

struct ThreeStageResult {
    std::vector<CVec> hd_hat;
    std::vector<CMat> g_hat;
    int pilots = 0;
};

// Simulates and runs the three-stage multi-user scheme on `truth`.
ThreeStageResult three_stage_estimate(const channel::ChannelSet& truth, const ThreeStageConfig& cfg,
                                      std::uint64_t seed);

enum class PilotMethod { direct, grouping, three_stage };

int pilot_count(PilotMethod method, int k, int m, int n, int j = 1);

double mse(const CMat& estimate, const CMat& truth);

} // namespace riskit::estimation
