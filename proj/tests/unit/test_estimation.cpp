// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "riskit/channel.hpp"
#include "riskit/errors.hpp"
#include "riskit/estimation.hpp"
#include "riskit/rng.hpp"

using namespace riskit;
using namespace riskit::estimation;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_abs(const CMat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// Explicit Z = X (Phi kron I_N) built entry by entry.
CMat explicit_z(const TrainingMatrix& phi, int n)
{
    const int t = phi.slots(), cols = static_cast<int>(phi.phi.cols());
    CMat z = CMat::Zero(static_cast<Eigen::Index>(n) * t, static_cast<Eigen::Index>(n) * cols);
    for (int r = 0; r < t; ++r)
        for (int c = 0; c < cols; ++c)
            for (int i = 0; i < n; ++i)
                z(r * n + i, c * n + i) = phi.phi(r, c);
    return z;
}

CMat random_psd_unit_diag(Rng& rng, int n)
{
    const CMat a = rng.cnormal_mat(n, n + 2);
    CMat r = a * a.adjoint();
    const RVec d = r.diagonal().real().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * r * d.asDiagonal();
}

} // namespace

TEST_CASE("training matrices", "[estimation]")
{
    CMat onoff(3, 3);
    onoff << 1, 0, 0, 1, 1, 0, 1, 0, 1;
    CHECK(max_abs(build_training(TrainingKind::onoff, 2).phi - onoff) == 0.0);

    CMat d2(2, 2);
    d2 << 1, 1, 1, -1;
    CHECK(max_abs(build_training(TrainingKind::hadamard, 1, 2).phi - d2) == 0.0);

    const CMat f = build_training(TrainingKind::dft, 3, 4).phi;
    CHECK(max_abs(f.adjoint() * f - 4.0 * CMat::Identity(4, 4)) < 1e-12);

    for (int m : {1, 3, 7, 12, 63}) {
        for (auto kind : {TrainingKind::dft, TrainingKind::hadamard}) {
            const TrainingMatrix tm = build_training(kind, m);
            CHECK(tm.slots() >= m + 1);
            CHECK(max_abs(tm.phi.col(0) - CVec::Ones(tm.slots())) == 0.0);
            CHECK((tm.phi.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
            CHECK(max_abs(tm.phi.adjoint() * tm.phi - tm.slots() * CMat::Identity(m + 1, m + 1)) < 1e-9);
        }
    }
    CHECK(hadamard_length(63) == 64);
    CHECK(hadamard_length(64) == 128);
    CHECK_THROWS_AS(build_training(TrainingKind::onoff, 2, 4), DimensionError);
    CHECK_THROWS_AS(build_training(TrainingKind::dft, 4, 3), DimensionError);
    CHECK_THROWS_AS(build_training(TrainingKind::hadamard, 3, 6), DimensionError);
}

TEST_CASE("forward model matches the explicit Kronecker product", "[estimation]")
{
    Rng rng(1);
    const int n = 3, m = 4;
    const TrainingMatrix phi = build_training(TrainingKind::dft, m, 7);
    const CVec c = rng.cnormal_vec(n * (m + 1));
    CHECK(max_abs(forward_model(c, phi, 2.0) - std::sqrt(2.0) * explicit_z(phi, n) * c) < 1e-12);
}

TEST_CASE("LS recovers noiseless channels for all training kinds", "[estimation]")
{
    Rng rng(2);
    for (auto kind : {TrainingKind::onoff, TrainingKind::dft, TrainingKind::hadamard}) {
        const TrainingMatrix phi = build_training(kind, 5);
        const CVec c = rng.cnormal_vec(4 * 6);
        StackedObservation obs = observe(c, phi, 3.0, 0.0, rng);
        CHECK((ls_estimate(obs, phi).c_hat - c).norm() < 1e-9);
        obs.y.setZero();
        CHECK(ls_estimate(obs, phi).c_hat.norm() == 0.0);
    }
}

TEST_CASE("LS equals an independent pseudo-inverse", "[estimation]")
{
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const int n = 1 + static_cast<int>(rng.index(4)), m = 1 + static_cast<int>(rng.index(6));
        const int t = m + 1 + static_cast<int>(rng.index(4));
        const TrainingMatrix phi = build_training(TrainingKind::dft, m, t);
        const CVec c = rng.cnormal_vec(n * (m + 1));
        const StackedObservation obs = observe(c, phi, 1.5, 0.4, rng);
        const CMat z = std::sqrt(1.5) * explicit_z(phi, n);
        const CVec oracle = z.completeOrthogonalDecomposition().pseudoInverse() * obs.y;
        CHECK((ls_estimate(obs, phi, false).c_hat - oracle).norm() < 1e-10);
    }
}

TEST_CASE("LS error covariance closed forms", "[estimation]")
{
    const double p = 2.0, s2 = 0.5;
    const CMat on1 = ls_error_cov(build_training(TrainingKind::onoff, 1), p, s2, 2);
    CMat small(2, 2);
    small << 1, -1, -1, 2;
    CMat want = CMat::Zero(4, 4);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int b = 0; b < 2; ++b)
                want(i * 2 + b, j * 2 + b) = s2 / p * small(i, j);
    CHECK(max_abs(on1 - want) < 1e-12);

    const CMat dft = ls_error_cov(build_training(TrainingKind::dft, 10, 64), p, s2, 3);
    CHECK(max_abs(dft - s2 / (64 * p) * CMat::Identity(33, 33)) < 1e-12);

    const CMat on = ls_error_cov(build_training(TrainingKind::onoff, 6), p, s2, 2);
    for (int i = 2; i < on.rows(); ++i)
        CHECK_THAT(on(i, i).real(), WithinRel(2.0 * s2 / p, 1e-12));
    CHECK_THAT(on(0, 0).real(), WithinRel(s2 / p, 1e-12));

    // rank-deficient training: two identical rows cannot identify three unknowns
    TrainingMatrix bad;
    bad.phi = CMat::Ones(3, 3);
    CHECK_THROWS_AS(ls_error_cov(bad, p, s2, 1), SingularError);
}

TEST_CASE("empirical LS MSE matches the error covariance", "[estimation]")
{
    const int n = 2, m = 3, trials = 2000;
    const double p = 1.0, s2 = 0.3;
    for (auto kind : {TrainingKind::onoff, TrainingKind::dft, TrainingKind::hadamard}) {
        const TrainingMatrix phi = build_training(kind, m);
        Rng rng(10 + static_cast<int>(kind));
        RVec acc = RVec::Zero(n * (m + 1));
        for (int tr = 0; tr < trials; ++tr) {
            const CVec c = rng.cnormal_vec(n * (m + 1));
            const CVec e = ls_estimate(observe(c, phi, p, s2, rng), phi, false).c_hat - c;
            acc += e.cwiseAbs2();
        }
        acc /= trials;
        const RVec diag = ls_error_cov(phi, p, s2, n).diagonal().real();
        // 2000 draws of an exponential variable: ~2.2% sd, pool the entries sharing a variance
        CHECK_THAT(acc.sum(), WithinRel(diag.sum(), 0.05));
        for (Eigen::Index i = 0; i < acc.size(); ++i)
            CHECK_THAT(acc(i), WithinRel(diag(i), 0.1));
    }
}

TEST_CASE("build_ccc structure", "[estimation]")
{
    const int n = 2, m = 3;
    const CMat ccc = build_ccc(CMat::Identity(n, n), CMat::Identity(m, m), CMat::Identity(m, m),
                               CMat::Identity(n, n));
    CHECK(max_abs(ccc - CMat::Identity(n * (m + 1), n * (m + 1))) == 0.0);

    using channel::exp_correlation_matrix;
    const CMat c99 = build_ccc(exp_correlation_matrix(n, 0.99), exp_correlation_matrix(m, 0.99),
                               exp_correlation_matrix(m, 0.99), exp_correlation_matrix(n, 0.99));
    Eigen::SelfAdjointEigenSolver<CMat> es(c99);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(max_abs(c99.block(0, n, n, n * m)) == 0.0);
    CHECK((c99.diagonal().real().array() - 1.0).abs().maxCoeff() < 1e-12);

    Rng rng(4);
    const CMat a = random_psd_unit_diag(rng, 4), b = random_psd_unit_diag(rng, 4);
    CHECK((a.cwiseProduct(b).diagonal().real().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(build_ccc(CMat::Identity(2, 2), CMat::Identity(3, 3), CMat::Identity(2, 2),
                              CMat::Identity(2, 2)),
                    DimensionError);
}

TEST_CASE("LMMSE error covariance and shrinkage", "[estimation]")
{
    const int n = 2, m = 7, t = 8;
    const double p = 1.0, s2 = 0.7;
    const TrainingMatrix phi = build_training(TrainingKind::dft, m, t);
    const LmmseFilter filt(phi, CMat::Identity(n * (m + 1), n * (m + 1)), p, s2);
    CHECK((filt.error_cov().diagonal().real().array() - s2 / (s2 + t * p)).abs().maxCoeff() < 1e-12);

    Rng rng(5);
    const CVec c = rng.cnormal_vec(n * (m + 1));
    const StackedObservation loud = observe(c, phi, p, 1e12, rng);
    const LmmseFilter huge(phi, CMat::Identity(n * (m + 1), n * (m + 1)), p, 1e12);
    CHECK(huge.apply(loud).norm() < 1e-4);

    // trace comparison against LS on random PSD priors
    const int mm = 3;
    const TrainingMatrix ph = build_training(TrainingKind::hadamard, mm);
    for (int i = 0; i < 20; ++i) {
        const CMat ccc = build_ccc(random_psd_unit_diag(rng, n), random_psd_unit_diag(rng, mm),
                                   random_psd_unit_diag(rng, mm), random_psd_unit_diag(rng, n));
        const LmmseFilter f(ph, ccc, p, s2);
        CHECK(f.error_cov().trace().real() <= ls_error_cov(ph, p, s2, n).trace().real() + 1e-12);
    }
}

TEST_CASE("LMMSE filter equals the textbook formula", "[estimation]")
{
    Rng rng(6);
    const int n = 2, m = 3;
    const double p = 1.3, s2 = 0.4;
    const TrainingMatrix phi = build_training(TrainingKind::dft, m, 5);
    const CMat ccc = build_ccc(random_psd_unit_diag(rng, n), random_psd_unit_diag(rng, m),
                               random_psd_unit_diag(rng, m), random_psd_unit_diag(rng, n));
    const CVec c = rng.cnormal_vec(n * (m + 1));
    const StackedObservation obs = observe(c, phi, p, s2, rng);
    const CMat z = explicit_z(phi, n);
    const CMat inner = p * z * ccc * z.adjoint() + s2 * CMat::Identity(z.rows(), z.rows());
    const CVec oracle = std::sqrt(p) * ccc * z.adjoint() * inner.ldlt().solve(obs.y);
    const ChannelEstimate est = lmmse_estimate(obs, phi, ccc);
    CHECK((est.c_hat - oracle).norm() < 1e-10);
    REQUIRE(est.err_cov.has_value());
    const CMat want = (ccc.inverse() + (p / s2) * z.adjoint() * z).inverse();
    CHECK(max_abs(*est.err_cov - want) < 1e-10);
}

TEST_CASE("LMMSE empirical MSE is below LS on shared draws", "[estimation]")
{
    const int n = 2, m = 3, trials = 1000;
    const double p = 1.0, s2 = 2.0;
    const TrainingMatrix phi = build_training(TrainingKind::dft, m);
    const CMat r = channel::exp_correlation_matrix(m, 0.8);
    const CMat ccc = build_ccc(CMat::Identity(n, n), r, r, CMat::Identity(n, n));
    const CMat col = channel::coloring_factor(ccc);
    const LmmseFilter filt(phi, ccc, p, s2);
    Rng rng(7);
    double ls = 0.0, lm = 0.0;
    for (int tr = 0; tr < trials; ++tr) {
        const CVec c = col * rng.cnormal_vec(ccc.rows());
        const StackedObservation obs = observe(c, phi, p, s2, rng);
        ls += (ls_estimate(obs, phi, false).c_hat - c).squaredNorm();
        lm += (filt.apply(obs) - c).squaredNorm();
    }
    CHECK(lm < ls);
}

TEST_CASE("element grouping", "[estimation]")
{
    Rng rng(8);
    const CMat g = rng.cnormal_mat(3, 6);
    CHECK(max_abs(element_group(g, 1) - g) == 0.0);
    CHECK(max_abs(eg_recover(element_group(g, 1), 1) - g) == 0.0);
    CHECK(max_abs(element_group(g, 6) - g.rowwise().sum()) < 1e-14);
    const CMat pairs = element_group(g, 2);
    CHECK(max_abs(pairs.col(1) - g.col(2) - g.col(3)) < 1e-14);

    CMat eq(3, 6);
    for (int j = 0; j < 6; ++j)
        eq.col(j) = g.col(j / 3 * 3);
    CHECK(max_abs(eg_recover(element_group(eq, 3), 3) - eq) < 1e-14);
    CHECK_THROWS_AS(element_group(g, 4), DimensionError);

    // grouped training on the full model equals plain training on the reduced model
    const TrainingMatrix red = build_training(TrainingKind::dft, 3);
    const TrainingMatrix full = expand_grouped(red, 2);
    CHECK(full.elements() == 6);
    const CVec hd = rng.cnormal_vec(3);
    const CVec y_full = forward_model(stack_channel(hd, g), full, 1.0);
    const CVec y_red = forward_model(stack_channel(hd, pairs), red, 1.0);
    CHECK((y_full - y_red).norm() < 1e-12);
}

TEST_CASE("multi-user decorrelation", "[estimation]")
{
    Rng rng(9);
    const CMat y = rng.cnormal_mat(3, 1);
    CHECK(max_abs(mu_decorrelate(y, CMat::Ones(1, 1)) - y) == 0.0);

    const CMat x = build_training(TrainingKind::dft, 1, 2).phi;
    const CVec u1 = rng.cnormal_vec(4), u2 = rng.cnormal_vec(4);
    const CMat mix = u1 * x.col(0).transpose() + u2 * x.col(1).transpose();
    const CMat dec = mu_decorrelate(mix, x);
    CHECK((dec.col(0) / 2.0 - u1).norm() < 1e-12);
    CHECK((dec.col(1) / 2.0 - u2).norm() < 1e-12);

    const int k = 4, draws = 20000;
    const double s2 = 0.5;
    const CMat x4 = build_training(TrainingKind::dft, k - 1, k).phi;
    CMat cov = CMat::Zero(k, k);
    for (int i = 0; i < draws; ++i) {
        const CMat out = mu_decorrelate(std::sqrt(s2) * rng.cnormal_mat(1, k), x4);
        cov += out.adjoint() * out;
    }
    cov /= draws;
    CHECK(max_abs(cov - k * s2 * CMat::Identity(k, k)) < 0.05 * k * s2);

    CMat skew = CMat::Ones(2, 2);
    CHECK_THROWS_AS(mu_decorrelate(CMat::Ones(2, 2), skew), DomainError);
}

TEST_CASE("three-stage estimation", "[estimation]")
{
    channel::SystemDims dims;
    channel::RicianConfig cfg;
    for (auto [n, m, k] : {std::tuple{8, 6, 3}, std::tuple{4, 10, 3}, std::tuple{4, 4, 1}}) {
        dims.n_bs = n;
        dims.m_ris = m;
        dims.k_users = k;
        const auto truth = channel::gen_unstructured(dims, cfg, 42);
        const ThreeStageResult r = three_stage_estimate(truth, {}, 7);
        REQUIRE(static_cast<int>(r.g_hat.size()) == k);
        for (int u = 0; u < k; ++u) {
            CHECK(max_abs(r.g_hat[u] - truth.cascaded(u)) < 1e-8);
            CHECK((r.hd_hat[u] - truth.hd[u]).norm() < 1e-8);
        }
        CHECK(r.pilots == pilot_count(PilotMethod::three_stage, k, m, n));
    }

    // a zero reference cascaded channel makes every stage-3 block singular
    dims.n_bs = 2;
    dims.m_ris = 2;
    dims.k_users = 2;
    auto truth = channel::gen_unstructured(dims, cfg, 1);
    truth.hr[0].setZero();
    try {
        three_stage_estimate(truth, {}, 1);
        FAIL("expected a stage failure");
    } catch (const StageError& e) {
        CHECK(e.stage() == 3);
    }
}

TEST_CASE("pilot counts", "[estimation]")
{
    CHECK(pilot_count(PilotMethod::direct, 2, 3, 1) == 8);
    CHECK(pilot_count(PilotMethod::grouping, 1, 8, 1, 4) == 5);
    CHECK(pilot_count(PilotMethod::three_stage, 1, 8, 8) == 9);
    CHECK(pilot_count(PilotMethod::three_stage, 4, 63, 8) == 91);
    CHECK_THROWS_AS(pilot_count(PilotMethod::direct, 0, 3, 1), DimensionError);
}

TEST_CASE("mse metric", "[estimation]")
{
    Rng rng(11);
    const CMat a = rng.cnormal_mat(3, 4), b = rng.cnormal_mat(3, 4);
    CHECK(mse(a, a) == 0.0);
    CHECK_THAT(mse(CMat::Ones(5, 1), CMat::Zero(5, 1)), WithinAbs(1.0, 1e-15));
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            acc += std::norm(a(i, j) - b(i, j));
    CHECK_THAT(mse(a, b), WithinRel(acc / 12.0, 1e-12));
    CHECK_THROWS_AS(mse(a, CMat::Zero(4, 3)), DimensionError);
}
