// SPDX-License-Identifier: Apache-2.0
#include "riskit/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "riskit/errors.hpp"
#include "riskit/rng.hpp"

namespace riskit::protocols {

namespace {

double power_of(const UplinkParams& link, Eigen::Index k)
{
    return link.powers.size() == 1 ? link.powers(0) : link.powers(k);
}

double rate_of(const RVec& sinr)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < sinr.size(); ++i)
        s += std::log2(1.0 + sinr(i));
    return s;
}

void fill_factor(RegimeResult& r, int t_c)
{
    r.overhead_factor = 1.0 - static_cast<double>(r.pilot_length) / t_c;
    if (r.overhead_factor <= 0.0) {
        r.overhead_factor = 0.0;
        r.warning = "pilot length " + std::to_string(r.pilot_length) + " leaves no data slots in T_c = " +
                    std::to_string(t_c);
    }
    r.average_rate = r.overhead_factor * r.raw_rate;
}

} // namespace

const char* regime_name(Regime r)
{
    switch (r) {
    case Regime::instantaneous:
        return "instantaneous";
    case Regime::instantaneous_ideal:
        return "instantaneous_ideal";
    case Regime::two_timescale:
        return "two_timescale";
    case Regime::long_term:
        return "long_term";
    }
    return "unknown";
}

void CoherenceConfig::validate() const
{
    if (t_c < 1 || u_blocks < 1)
        throw DomainError("CoherenceConfig: t_c and u_blocks must be >= 1");
}

int pilot_length(Regime regime, int k, int m, int n)
{
    if (k < 1 || m < 1 || n < 1)
        throw DimensionError("pilot_length: dimensions must be >= 1");
    switch (regime) {
    case Regime::instantaneous: {
        const int ceil_mn = (m + n - 1) / n;
        return k + m + std::max(k - 1, (k - 1) * ceil_mn);
    }
    case Regime::instantaneous_ideal:
    case Regime::two_timescale:
        return k;
    case Regime::long_term:
        return 0;
    }
    throw DomainError("pilot_length: unknown regime");
}

CMat uplink_effective(const channel::ChannelSet& ch, const CVec& theta)
{
    if (theta.size() != ch.h.cols())
        throw DimensionError("uplink_effective: theta length must equal M");
    CMat q(ch.h.rows(), ch.users());
    for (int k = 0; k < ch.users(); ++k) {
        const auto sk = static_cast<std::size_t>(k);
        q.col(k) = ch.h * theta.cwiseProduct(ch.hr[sk]) + ch.hd[sk];
    }
    return q;
}

RVec uplink_sinr(const CMat& q, const CMat& w, const UplinkParams& link)
{
    if (q.rows() != w.rows() || q.cols() != w.cols())
        throw DimensionError("uplink_sinr: q and w must have the same shape");
    if (link.powers.size() != 1 && link.powers.size() != q.cols())
        throw DimensionError("uplink_sinr: powers must have size 1 or K");
    if (!(link.sigma2 > 0.0))
        throw DomainError("uplink_sinr: sigma2 must be > 0");
    const CMat c = w.adjoint() * q;  // c(k, i) = w_k^H q_i
    const Eigen::Index k = q.cols();
    RVec s(k);
    for (Eigen::Index u = 0; u < k; ++u) {
        double den = link.sigma2 * w.col(u).squaredNorm();
        for (Eigen::Index i = 0; i < k; ++i)
            if (i != u)
                den += power_of(link, i) * std::norm(c(u, i));
        const double num = power_of(link, u) * std::norm(c(u, u));
        s(u) = den > 0.0 ? num / den : 0.0;
    }
    return s;
}

double mrc_sum_rate(const channel::ChannelSet& ch, const CVec& theta, const UplinkParams& link)
{
    const CMat q = uplink_effective(ch, theta);
    return rate_of(uplink_sinr(q, q, link));
}

RegimeResult instantaneous_rate(const std::vector<channel::ChannelSet>& blocks, const PhaseDesigner& design,
                                const UplinkParams& link, const CoherenceConfig& cfg, bool ideal)
{
    cfg.validate();
    if (blocks.empty())
        throw DimensionError("instantaneous_rate: no blocks");
    const channel::ChannelSet& b0 = blocks.front();
    RegimeResult r;
    const int k = b0.users();
    r.pilot_length = pilot_length(ideal ? Regime::instantaneous_ideal : Regime::instantaneous, k,
                                  static_cast<int>(b0.h.cols()), static_cast<int>(b0.h.rows()));
    r.sinr.resize(static_cast<Eigen::Index>(blocks.size()), k);
    double total = 0.0;
    for (std::size_t u = 0; u < blocks.size(); ++u) {
        const CVec theta = design(blocks[u], u);
        const CMat q = uplink_effective(blocks[u], theta);
        const RVec s = uplink_sinr(q, q, link);
        r.sinr.row(static_cast<Eigen::Index>(u)) = s.transpose();
        total += rate_of(s);
    }
    r.raw_rate = total / static_cast<double>(blocks.size());
    fill_factor(r, cfg.t_c);
    return r;
}

RegimeResult two_timescale_rate(const std::vector<channel::ChannelSet>& blocks, const CVec& theta,
                                const UplinkParams& link, const CoherenceConfig& cfg)
{
    cfg.validate();
    if (blocks.empty())
        throw DimensionError("two_timescale_rate: no blocks");
    RegimeResult r;
    const int k = blocks.front().users();
    r.pilot_length = pilot_length(Regime::two_timescale, k, static_cast<int>(theta.size()),
                                  static_cast<int>(blocks.front().h.rows()));
    r.sinr.resize(static_cast<Eigen::Index>(blocks.size()), k);
    double total = 0.0;
    for (std::size_t u = 0; u < blocks.size(); ++u) {
        const CMat q = uplink_effective(blocks[u], theta);
        const RVec s = uplink_sinr(q, q, link);
        r.sinr.row(static_cast<Eigen::Index>(u)) = s.transpose();
        total += rate_of(s);
    }
    r.raw_rate = total / static_cast<double>(blocks.size());
    fill_factor(r, cfg.t_c);
    return r;
}

RegimeResult longterm_rate(const std::vector<channel::ChannelSet>& blocks, const CVec& theta,
                           const channel::ChannelSet& mean, const UplinkParams& link)
{
    if (blocks.empty())
        throw DimensionError("longterm_rate: no blocks");
    const CMat w = uplink_effective(mean, theta);
    RegimeResult r;
    const int k = blocks.front().users();
    r.sinr.resize(static_cast<Eigen::Index>(blocks.size()), k);
    double total = 0.0;
    for (std::size_t u = 0; u < blocks.size(); ++u) {
        const CMat q = uplink_effective(blocks[u], theta);
        const RVec s = uplink_sinr(q, w, link);
        r.sinr.row(static_cast<Eigen::Index>(u)) = s.transpose();
        total += rate_of(s);
    }
    r.raw_rate = total / static_cast<double>(blocks.size());
    r.pilot_length = 0;
    r.overhead_factor = 1.0;
    r.average_rate = r.raw_rate;
    return r;
}

optimize::OptimizerReport ga_longterm_theta(const channel::SystemDims& dims, const channel::RicianConfig& rician,
                                            const UplinkParams& link, int samples, const optimize::GaOptions& ga,
                                            std::uint64_t seed)
{
    if (samples < 1)
        throw DomainError("ga_longterm_theta: samples must be >= 1");
    std::vector<channel::ChannelSet> draws;
    draws.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s)
        draws.push_back(channel::gen_unstructured(dims, rician, derive_seed(seed, 11, static_cast<std::uint64_t>(s))));
    auto fn = [&](const CVec& theta) {
        double acc = 0.0;
        for (const auto& d : draws)
            acc += mrc_sum_rate(d, theta, link);
        return acc / samples;
    };
    optimize::GaOptions opt = ga;
    opt.seed = derive_seed(seed, 12);
    return optimize::optimize_ga(fn, dims.m_ris, opt);
}

RegimeComparison compare_regimes(const RegimeSetup& setup, std::uint64_t seed)
{
    setup.dims.validate();
    setup.rician.validate(setup.dims);
    setup.coherence.validate();
    RegimeComparison out;
    const optimize::OptimizerReport lt =
        ga_longterm_theta(setup.dims, setup.rician, setup.link, setup.longterm_samples, setup.longterm_ga,
                          derive_seed(seed, 1));
    out.theta_longterm = lt.theta;

    std::vector<channel::ChannelSet> blocks;
    blocks.reserve(static_cast<std::size_t>(setup.coherence.u_blocks));
    for (int u = 0; u < setup.coherence.u_blocks; ++u)
        blocks.push_back(
            channel::gen_unstructured(setup.dims, setup.rician, derive_seed(seed, 2, static_cast<std::uint64_t>(u))));

    // Per-block designs are shared by the ideal and overhead-aware variants.
    std::vector<CVec> per_block(blocks.size());
    for (std::size_t u = 0; u < blocks.size(); ++u) {
        optimize::GaOptions opt = setup.block_ga;
        opt.seed = derive_seed(seed, 3, u);
        const channel::ChannelSet& b = blocks[u];
        auto fn = [&](const CVec& theta) { return mrc_sum_rate(b, theta, setup.link); };
        per_block[u] = optimize::optimize_ga(fn, setup.dims.m_ris, opt, out.theta_longterm).theta;
    }
    auto design = [&](const channel::ChannelSet&, std::size_t u) { return per_block[u]; };
    out.instantaneous = instantaneous_rate(blocks, design, setup.link, setup.coherence, false);
    out.instantaneous_ideal = instantaneous_rate(blocks, design, setup.link, setup.coherence, true);
    out.two_timescale = two_timescale_rate(blocks, out.theta_longterm, setup.link, setup.coherence);
    out.long_term = longterm_rate(blocks, out.theta_longterm, channel::mean_channels(setup.dims, setup.rician),
                                  setup.link);
    return out;
}

} // namespace riskit::protocols
