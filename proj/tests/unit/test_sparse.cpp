// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "riskit/channel.hpp"
#include "riskit/errors.hpp"
#include "riskit/rng.hpp"
#include "riskit/sparse.hpp"

using namespace riskit;
using namespace riskit::sparse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_abs(const CMat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// Cascaded channel whose BS and RIS-side frequencies sit on the dictionary grids.
struct OnGrid {
    CMat h;
    CVec hr;
    CMat g;
};

OnGrid on_grid_truth(const Dictionary& bs, const Dictionary& ris, const std::vector<int>& bs_idx,
                     const std::vector<int>& ris_idx, const std::vector<int>& user_idx, Rng& rng)
{
    channel::SystemDims dims;
    dims.n_bs = bs.size_x;
    dims.m_x = ris.size_x;
    dims.m_z = ris.size_z;
    dims.m_ris = ris.size_x * ris.size_z;
    channel::SvParams p;
    p.alpha = rng.cnormal_vec(static_cast<Eigen::Index>(bs_idx.size()));
    for (std::size_t l = 0; l < bs_idx.size(); ++l) {
        p.omega_bh.push_back(bs.freq_x(bs_idx[l]));
        p.omega_rh.push_back({ris.freq_x(ris_idx[l]), ris.freq_z(ris_idx[l])});
    }
    channel::SvUser u;
    u.beta = rng.cnormal_vec(static_cast<Eigen::Index>(user_idx.size()));
    for (int c : user_idx)
        u.omega_rhr.push_back({ris.freq_x(c), ris.freq_z(c)});
    p.users = {u};
    const auto ch = channel::sv_channels(dims, p);
    return {ch.h, ch.hr[0], channel::cascaded_channel(ch.h, ch.hr[0])};
}

} // namespace

TEST_CASE("dictionaries", "[sparse]")
{
    const Dictionary d = make_dictionary_ula(2, 4);
    REQUIRE(d.grid_x.size() == 4);
    CHECK_THAT(d.grid_x[0], WithinAbs(-kPi, 1e-15));
    CHECK_THAT(d.grid_x[1], WithinAbs(-kPi / 2, 1e-15));
    CHECK_THAT(d.grid_x[2], WithinAbs(0.0, 1e-15));
    CHECK(max_abs(d.atoms.col(2) - CVec::Ones(2)) == 0.0);

    const Dictionary u = make_dictionary_upa(2, 2, 4);
    CHECK(u.atoms.rows() == 4);
    CHECK(u.atoms.cols() == 4);

    for (const Dictionary& dd : {make_dictionary_ula(5, 20), make_dictionary_upa(3, 2, 36)}) {
        CHECK((dd.atoms.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
        CHECK((dd.gram.diagonal().real().array() - dd.atoms.rows()).abs().maxCoeff() < 1e-12);
        CHECK(max_abs(dd.gram - dd.atoms.adjoint() * dd.atoms) < 1e-12);
        for (std::size_t i = 1; i < dd.grid_x.size(); ++i)
            CHECK(dd.grid_x[i] > dd.grid_x[i - 1]);
        for (int c = 0; c < dd.columns(); ++c)
            CHECK(dd.nearest(dd.freq_x(c), dd.freq_z(c)) == c);
    }
    CHECK(d.nearest(kPi - 1e-9) == 0);

    CHECK_THROWS_AS(make_dictionary_ula(8, 4), UndercompleteDictionary);
    CHECK_NOTHROW(make_dictionary_ula(8, 4, true));
    CHECK_THROWS_AS(make_dictionary_upa(4, 4, 9), UndercompleteDictionary);
    CHECK_THROWS_AS(make_dictionary_upa(2, 2, 8), DimensionError);
}

TEST_CASE("OMP basics", "[sparse]")
{
    const Dictionary d = make_dictionary_ula(8, 16);
    const CVec y = 2.0 * d.atoms.col(3);
    const SparseSolution s = omp_solve(y, d.atoms, 1);
    REQUIRE(s.support == std::vector<int>{3});
    CHECK(std::abs(s.gains(0) - 2.0) < 1e-12);
    CHECK(s.residual_norm < 1e-12);

    CMat a = CMat::Zero(3, 2);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    CVec orth = CVec::Zero(3);
    orth(2) = 2.0;
    const SparseSolution none = omp_solve(orth, a, 2);
    CHECK(none.support.empty());
    CHECK_THAT(none.residual_norm, WithinAbs(2.0, 1e-15));

    CHECK_THROWS_AS(omp_solve(orth, CMat::Zero(3, 2), 1), NumericError);
    CHECK_THROWS_AS(omp_solve(orth, a, 3), DimensionError);

    const CVec two = cd(1.0, -0.5) * d.atoms.col(2) + cd(0.3, 0.8) * d.atoms.col(10);
    const SparseSolution s2 = omp_solve(two, d.atoms, 2);
    REQUIRE(s2.support.size() == 2);
    const int i2 = s2.support[0] == 2 ? 0 : 1;
    CHECK(s2.support[static_cast<std::size_t>(1 - i2)] == 10);
    CHECK(std::abs(s2.gains(i2) - cd(1.0, -0.5)) < 1e-8);
    CHECK(std::abs(s2.gains(1 - i2) - cd(0.3, 0.8)) < 1e-8);

    const SparseSolution tol = omp_solve(two, d.atoms, 5, 1e-9);
    CHECK(tol.support.size() == 2);
}

TEST_CASE("OMP residual never increases", "[sparse]")
{
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const CMat a = rng.cnormal_mat(12, 30);
        const CVec y = rng.cnormal_vec(12);
        const SparseSolution s = omp_solve(y, a, 10);
        CHECK_THAT(s.residual_trace.front(), WithinRel(y.norm(), 1e-12));
        for (std::size_t k = 1; k < s.residual_trace.size(); ++k)
            CHECK(s.residual_trace[k] <= s.residual_trace[k - 1] * (1.0 + 1e-12));
        // unique support
        auto sup = s.support;
        std::sort(sup.begin(), sup.end());
        CHECK(std::adjacent_find(sup.begin(), sup.end()) == sup.end());
    }
}

TEST_CASE("SOMP shares one support across columns", "[sparse]")
{
    const Dictionary d = make_dictionary_ula(8, 16);
    Rng rng(6);
    const CMat y = d.atoms.col(1) * rng.cnormal_mat(1, 5) + d.atoms.col(9) * rng.cnormal_mat(1, 5);
    const MmvSolution s = somp_solve(y, d.atoms, 2);
    auto sup = s.support;
    std::sort(sup.begin(), sup.end());
    CHECK(sup == std::vector<int>{1, 9});
    CHECK(s.residual_norm < 1e-10);
    CHECK(s.gains.rows() == 2);
    CHECK(s.gains.cols() == 5);
}

TEST_CASE("one-stage and two-stage recover on-grid channels", "[sparse]")
{
    Rng rng(7);
    const Dictionary bs = make_dictionary_ula(8, 16);
    const Dictionary ris = make_dictionary_upa(4, 4, 64);
    const OnGrid t = on_grid_truth(bs, ris, {3, 11}, {9, 40}, {18, 53}, rng);
    const CMat training = rng.phase_vec(16 * 24).reshaped(16, 24);
    const CascadedObservation obs = observe_cascaded(t.g, training, 1.0, 0.0, rng);

    OneStageOptions o1;
    o1.sparsity = 4;
    const OneStageResult r1 = one_stage_estimate(obs, bs, ris, o1);
    CHECK(nmse(r1.g_hat, t.g) < 1e-6);

    for (auto mode : {TwoStageMode::correlation_ignored, TwoStageMode::correlation_based}) {
        TwoStageOptions o2;
        o2.l_br = 2;
        o2.l_ru = 2;
        o2.mode = mode;
        const TwoStageResult r2 = two_stage_estimate(obs, bs, ris, o2);
        CHECK(nmse(r2.g_hat, t.g) < 1e-6);
        auto idx = r2.bs_index;
        std::sort(idx.begin(), idx.end());
        CHECK(idx == std::vector<int>{3, 11});
        for (double w : r2.omega_bh)
            CHECK(std::find(bs.grid_x.begin(), bs.grid_x.end(), w) != bs.grid_x.end());
        if (mode == TwoStageMode::correlation_based) {
            CHECK(r2.full_solves == 1);
            CHECK(r2.single_solves == 1);
        } else {
            CHECK(r2.full_solves == 2);
            CHECK(r2.single_solves == 0);
        }
    }

    // scaling ambiguity of the (H, h_r) factorisation does not reach the estimate
    const CVec lam = rng.phase_vec(16) * 1.7;
    const CMat g2 = channel::cascaded_channel(t.h * lam.asDiagonal(), lam.cwiseInverse().cwiseProduct(t.hr));
    const CascadedObservation obs2 = observe_cascaded(g2, training, 1.0, 0.0, rng);
    CHECK(max_abs(one_stage_estimate(obs2, bs, ris, o1).g_hat - r1.g_hat) < 1e-9);
    TwoStageOptions o2;
    o2.l_br = 2;
    o2.l_ru = 2;
    CHECK(max_abs(two_stage_estimate(obs2, bs, ris, o2).g_hat - two_stage_estimate(obs, bs, ris, o2).g_hat) <
          1e-9);

    CascadedObservation zero = obs;
    zero.y.setZero();
    CHECK(max_abs(one_stage_estimate(zero, bs, ris, o1).g_hat) == 0.0);
    CHECK(max_abs(two_stage_estimate(zero, bs, ris, o2).g_hat) == 0.0);

    o1.column_budget = 100.0;
    CHECK_THROWS_AS(one_stage_estimate(obs, bs, ris, o1), DimensionError);
    o2.l_br = 8;
    CHECK_THROWS_AS(two_stage_estimate(obs, bs, ris, o2), DimensionError);
}

TEST_CASE("two-stage stage-1 tolerance raises a stage error", "[sparse]")
{
    Rng rng(8);
    const Dictionary bs = make_dictionary_ula(8, 16);
    const Dictionary ris = make_dictionary_upa(2, 2, 16);
    CascadedObservation obs;
    obs.training = rng.phase_vec(4 * 8).reshaped(4, 8);
    obs.y = rng.cnormal_mat(8, 8);
    TwoStageOptions o;
    o.stage1_tol = 1e-6;
    try {
        two_stage_estimate(obs, bs, ris, o);
        FAIL("expected a stage failure");
    } catch (const StageError& e) {
        CHECK(e.stage() == 1);
    }
}

TEST_CASE("exhaustive beam training", "[sparse]")
{
    const Dictionary bs = make_dictionary_ula(8, 16);
    const Dictionary ris = make_dictionary_ula(8, 16);
    const CMat g = bs.atoms.col(5) * ris.atoms.col(12).transpose();
    std::vector<CVec> bcb, rcb;
    for (int c = 0; c < 16; ++c) {
        bcb.push_back(bs.atoms.col(c) / std::sqrt(8.0));
        rcb.push_back(ris.atoms.col(c));
    }
    const PowerOracle oracle = [&](const CVec& f, const CVec& th) {
        return std::norm(f.dot(g * th));
    };
    const BeamChoice b = beam_train_exhaustive(oracle, bcb, rcb);
    CHECK(b.bs_index == 5);
    // conj(a(w)) = a(-w): grid index 12 (w = pi/2) pairs with index 4 (w = -pi/2)
    CHECK(b.ris_index == 4);
    CHECK_THAT(b.power, WithinRel(8.0 * 64.0, 1e-12));

    Rng rng(9);
    for (int i = 0; i < 100; ++i)
        CHECK(oracle(rng.cnormal_vec(8).normalized(), rng.phase_vec(8)) <= b.power);

    const BeamChoice one = beam_train_exhaustive(oracle, {bcb[2]}, {rcb[7]});
    CHECK(one.bs_index == 0);
    CHECK(one.ris_index == 0);
    CHECK_THROWS_AS(beam_train_exhaustive(oracle, {}, rcb), DimensionError);
}

TEST_CASE("nmse metric", "[sparse]")
{
    Rng rng(10);
    const CMat g = rng.cnormal_mat(3, 5);
    CHECK(nmse(g, g) == 0.0);
    CHECK_THAT(nmse(CMat::Zero(3, 5), g), WithinAbs(1.0, 1e-15));
    CHECK_THAT(nmse(2.0 * g, g), WithinAbs(1.0, 1e-14));
    CHECK_THROWS_AS(nmse(g, CMat::Zero(3, 5)), DomainError);
}

TEST_CASE("compressed-sensing overhead laws", "[sparse]")
{
    OverheadParams p;
    p.l_br = 4;
    p.l_ru = 4;
    p.m = 100;
    p.n = 100;
    // hand values with G_B = 400, G_R = 400
    CHECK_THAT(cs_pilot_overhead(CsMethod::one_stage, p), WithinRel(16.0 / 100.0 * 15.201804919084164, 1e-12));
    CHECK_THAT(cs_pilot_overhead(CsMethod::two_stage, p), WithinRel(4.0 * 4.605170185988092, 1e-12));
    CHECK_THAT(cs_pilot_overhead(CsMethod::multi_user_jiechen, p), WithinRel(6.25, 1e-12));
    CHECK_THAT(cs_pilot_overhead(CsMethod::multi_user_gui, p),
               WithinRel(cs_pilot_overhead(CsMethod::two_stage, p), 1e-12));
    p.k = 3;
    CHECK_THAT(cs_pilot_overhead(CsMethod::multi_user_gui, p), WithinRel(6.0 * 4.605170185988092, 1e-12));
    p.l_br = 0;
    CHECK_THROWS_AS(cs_pilot_overhead(CsMethod::one_stage, p), DimensionError);
}
