// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "riskit/channel.hpp"
#include "riskit/optimize.hpp"
#include "riskit/types.hpp"

namespace riskit::protocols {

enum class Regime { instantaneous, instantaneous_ideal, two_timescale, long_term };

const char* regime_name(Regime r);

struct CoherenceConfig {
    int t_c = 196;      // slots per coherence block
    int u_blocks = 50;  // blocks sharing the long-term statistics
    void validate() const;
};

// instantaneous: K + M + max(K-1, (K-1) ceil(M/N)); ideal and two-timescale: K; long-term: 0.
int pilot_length(Regime regime, int k, int m, int n);

struct UplinkParams {
    RVec powers = RVec::Ones(1);  // size 1 broadcasts
    double sigma2 = 1.0;
};

// Columns q_k = H diag(theta) h_r,k + h_d,k.
CMat uplink_effective(const channel::ChannelSet& ch, const CVec& theta);

// SINR_k = P_k |w_k^H q_k|^2 / (sum_{i!=k} P_i |w_k^H q_i|^2 + sigma2 ||w_k||^2).
RVec uplink_sinr(const CMat& q, const CMat& w, const UplinkParams& link);

// Sum of log2(1 + SINR) with MRC (w = q).
double mrc_sum_rate(const channel::ChannelSet& ch, const CVec& theta, const UplinkParams& link);

struct RegimeResult {
    RMat sinr;                   // U x K
    double average_rate = 0.0;   // overhead factor applied
    double raw_rate = 0.0;       // before the overhead factor
    int pilot_length = 0;
    double overhead_factor = 1.0;
    std::string warning;
};

// Picks theta for block u.
using PhaseDesigner = std::function<CVec(const channel::ChannelSet& block, std::size_t u)>;

RegimeResult instantaneous_rate(const std::vector<channel::ChannelSet>& blocks, const PhaseDesigner& design,
                                const UplinkParams& link, const CoherenceConfig& cfg, bool ideal);

RegimeResult two_timescale_rate(const std::vector<channel::ChannelSet>& blocks, const CVec& theta,
                                const UplinkParams& link, const CoherenceConfig& cfg);

// Decoders fixed from the mean channels.
RegimeResult longterm_rate(const std::vector<channel::ChannelSet>& blocks, const CVec& theta,
                           const channel::ChannelSet& mean, const UplinkParams& link);

// Theta maximizing the Monte-Carlo average MRC sum rate over `samples` draws.
optimize::OptimizerReport ga_longterm_theta(const channel::SystemDims& dims, const channel::RicianConfig& rician,
                                            const UplinkParams& link, int samples, const optimize::GaOptions& ga,
                                            std::uint64_t seed);

struct RegimeSetup {
    channel::SystemDims dims;
    channel::RicianConfig rician;
    UplinkParams link;
    CoherenceConfig coherence;
    int longterm_samples = 10;
    optimize::GaOptions longterm_ga{20, 30};
    optimize::GaOptions block_ga{10, 10};
};

struct RegimeComparison {
    RegimeResult instantaneous;
    RegimeResult instantaneous_ideal;
    RegimeResult two_timescale;
    RegimeResult long_term;
    CVec theta_longterm;
};

// One seeded run of all regimes on shared channel draws and a shared long-term theta.
RegimeComparison compare_regimes(const RegimeSetup& setup, std::uint64_t seed);

} // namespace riskit::protocols
