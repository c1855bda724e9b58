// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "riskit/errors.hpp"
#include "riskit/optimize.hpp"
#include "riskit/rng.hpp"

using namespace riskit;
using namespace riskit::optimize;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_abs(const CMat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double modulus_error(const CVec& t) { return (t.cwiseAbs().array() - 1.0).abs().maxCoeff(); }

DownlinkInstance random_instance(std::uint64_t seed, int n, int m, int k, double sigma2 = 1.0)
{
    Rng rng(seed);
    DownlinkInstance inst;
    for (int u = 0; u < k; ++u) {
        inst.g.push_back(rng.cnormal_mat(n, m));
        inst.hd.push_back(rng.cnormal_vec(n));
    }
    inst.sigma2 = RVec::Constant(k, sigma2);
    inst.w = rng.cnormal_mat(n, k);
    return inst;
}

bool monotone(const std::vector<double>& tr, double tol)
{
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i] < tr[i - 1] - tol)
            return false;
    return true;
}

} // namespace

TEST_CASE("SINR and rate", "[optimize]")
{
    DownlinkInstance one;
    one.g = {CMat::Zero(1, 1)};
    one.hd = {CVec::Ones(1)};
    one.sigma2 = RVec::Ones(1);
    one.w = CMat::Ones(1, 1);
    const RateResult r = sinr_and_rate(one, CVec::Ones(1));
    CHECK_THAT(r.sinr(0), WithinAbs(1.0, 1e-15));
    CHECK_THAT(r.rate(0), WithinAbs(1.0, 1e-15));

    // scalar expansion oracle, K = 2, N = 2, M = 2
    DownlinkInstance inst = random_instance(3, 2, 2, 2, 0.7);
    Rng rng(4);
    const CVec th = rng.phase_vec(2);
    const RateResult got = sinr_and_rate(inst, th);
    for (int k = 0; k < 2; ++k) {
        double num = 0.0, den = 0.7;
        for (int i = 0; i < 2; ++i) {
            cd e = 0.0;
            for (int n = 0; n < 2; ++n) {
                cd row = std::conj(inst.hd[k](n));
                for (int m = 0; m < 2; ++m)
                    row += th(m) * std::conj(inst.g[k](n, m));
                e += row * inst.w(n, i);
            }
            (i == k ? num : den) += std::norm(e);
        }
        CHECK_THAT(got.sinr(k), WithinRel(num / den, 1e-12));
    }

    DownlinkInstance scaled = inst;
    scaled.w *= 3.0;
    scaled.sigma2 *= 9.0;
    CHECK(max_abs((sinr_and_rate(scaled, th).sinr - got.sinr).cast<cd>()) < 1e-12);
    CHECK((got.rate.array() >= 0.0).all());

    inst.sigma2(1) = 0.0;
    CHECK_THROWS_AS(sinr_and_rate(inst, th), DomainError);
}

TEST_CASE("beamformers", "[optimize]")
{
    const CMat q = CMat::Identity(4, 2);
    CHECK(max_abs(beamformer(BeamKind::zf, q, RVec::Ones(1)) - q) < 1e-14);

    Rng rng(5);
    const CMat qr = rng.cnormal_mat(6, 3);
    CHECK(max_abs(qr.adjoint() * beamformer(BeamKind::zf, qr, RVec::Ones(1)) - CMat::Identity(3, 3)) < 1e-12);
    const CMat mrt = beamformer(BeamKind::mrt, qr, RVec::Constant(1, 4.0));
    for (int i = 0; i < 3; ++i)
        CHECK_THAT(mrt.col(i).norm(), WithinAbs(2.0, 1e-14));
    CHECK(max_abs(beamformer(BeamKind::mrc, qr, RVec::Ones(1)) - qr) == 0.0);

    const CMat q1 = rng.cnormal_mat(5, 1);
    const CVec v = beamformer(BeamKind::lmmse_rx, q1, RVec::Ones(1), 0.3).col(0);
    const cd align = v.normalized().dot(q1.col(0).normalized());
    CHECK_THAT(std::abs(align), WithinAbs(1.0, 1e-10));

    // closed form (sum P_i q_i q_i^H + sigma2 I)^{-1} q_k
    const RVec pw = (RVec(3) << 1.0, 2.0, 0.5).finished();
    CMat r = 0.4 * CMat::Identity(6, 6);
    for (int i = 0; i < 3; ++i)
        r += pw(i) * qr.col(i) * qr.col(i).adjoint();
    CHECK(max_abs(beamformer(BeamKind::lmmse_rx, qr, pw, 0.4) - r.inverse() * qr) < 1e-10);

    CHECK_THROWS_AS(beamformer(BeamKind::zf, rng.cnormal_mat(2, 3), RVec::Ones(1)), SingularError);
    CMat dup(3, 2);
    dup.col(0) = qr.col(0).head(3);
    dup.col(1) = dup.col(0);
    CHECK_THROWS_AS(beamformer(BeamKind::zf, dup, RVec::Ones(1)), SingularError);
}

TEST_CASE("unit-modulus projection and the MM subproblem", "[optimize]")
{
    CVec z(3);
    z << cd(0, 2), cd(0, 0), cd(-3, 0);
    const CVec p = project_unit_modulus(z);
    CHECK(std::abs(p(0) - cd(0, 1)) < 1e-15);
    CHECK(p(1) == cd(1, 0));
    CHECK(std::abs(p(2) - cd(-1, 0)) < 1e-15);
    CHECK(max_abs(project_unit_modulus(p) - p) < 1e-15);

    CVec q(2);
    q << cd(1, 1), cd(-2, 0);
    const CVec t = mm_subproblem(q);
    CHECK(std::abs(t(0) - std::polar(1.0, kPi / 4)) < 1e-15);
    CHECK(std::abs(t(1) - std::polar(1.0, kPi)) < 1e-15);
    CHECK(max_abs(mm_subproblem(CVec::Constant(4, 2.5)) - CVec::Ones(4)) < 1e-15);

    Rng rng(6);
    const CVec qq = rng.cnormal_vec(10);
    const double best = mm_subproblem(qq).dot(qq).real();
    for (int i = 0; i < 1000; ++i)
        CHECK(rng.phase_vec(10).dot(qq).real() <= best + 1e-12);
}

TEST_CASE("gradients match finite differences", "[optimize]")
{
    Rng rng(7);
    const CVec q = rng.cnormal_vec(6);
    const LinearObjective lin(q);
    const CVec ng = numeric_gradient([&](const CVec& t) { return lin.value(t); }, rng.phase_vec(6));
    CHECK((ng - q).norm() < 1e-8);
    CHECK(numeric_gradient([](const CVec&) { return 3.0; }, rng.phase_vec(4)).norm() == 0.0);

    const SumRateObjective obj(random_instance(8, 4, 8, 2));
    for (int i = 0; i < 10; ++i) {
        const CVec th = rng.phase_vec(8);
        const CVec a = obj.gradient(th);
        const CVec n = numeric_gradient([&](const CVec& t) { return obj.value(t); }, th);
        CHECK((a - n).norm() <= 1e-4 * a.norm());
    }

    // coordinate_values agrees with direct evaluation
    const CVec th = rng.phase_vec(8);
    const CVec cand = rng.phase_vec(5);
    RVec out;
    obj.coordinate_values(th, 3, cand, out);
    REQUIRE(out.size() == 5);
    for (int c = 0; c < 5; ++c) {
        CVec t = th;
        t(3) = cand(c);
        CHECK_THAT(out(c), WithinRel(obj.value(t), 1e-12));
    }
}

TEST_CASE("MM", "[optimize]")
{
    Rng rng(9);
    const CVec q = rng.cnormal_vec(6);
    const LinearObjective lin(q);
    MmOptions o;
    o.lipschitz = 1.0;
    o.iters = 1;
    const CVec start = rng.phase_vec(6);
    const OptimizerReport r = optimize_mm(lin, start, o);
    // the quadratic penalty around the start adds L * theta0 to the linear term
    CHECK(max_abs(r.theta - mm_subproblem(q + start)) < 1e-12);

    for (int s = 0; s < 10; ++s) {
        const SumRateObjective obj(random_instance(100 + s, 4, 8, 2));
        const CVec t0 = rng.phase_vec(8);
        const OptimizerReport rep = optimize_mm(obj, t0, {});
        CHECK(monotone(rep.trace, 1e-9));
        CHECK(rep.trace.size() == static_cast<std::size_t>(rep.iterations) + 1);
        CHECK(rep.final_value >= obj.value(t0) - 1e-12);
        CHECK(modulus_error(rep.theta) < 1e-12);
    }
}

TEST_CASE("CCM tangent and ascent", "[optimize]")
{
    Rng rng(10);
    for (int i = 0; i < 20; ++i) {
        const CVec th = rng.phase_vec(7);
        const CVec p = ccm_tangent(rng.cnormal_vec(7), th);
        CHECK((p.conjugate().cwiseProduct(th)).real().cwiseAbs().maxCoeff() < 1e-12);
    }
    const LinearObjective zero(CVec::Zero(5));
    const CVec t0 = rng.phase_vec(5);
    CHECK(max_abs(optimize_ccm(zero, t0).theta - t0) < 1e-15);
    CHECK(max_abs(optimize_gd(zero, t0).theta - t0) < 1e-15);

    const SumRateObjective obj(random_instance(11, 10, 100, 4));
    const CVec s0 = rng.phase_vec(100);
    const OptimizerReport c = optimize_ccm(obj, s0);
    CHECK(c.final_value > obj.value(s0));
    CHECK(modulus_error(c.theta) < 1e-12);
}

TEST_CASE("projected gradient ascent", "[optimize]")
{
    Rng rng(12);
    const CVec q = rng.cnormal_vec(6);
    GdOptions o;
    o.step = 100.0;
    const OptimizerReport r = optimize_gd(LinearObjective(q), rng.phase_vec(6), o);
    CHECK(max_abs(r.theta - mm_subproblem(q)) < 1e-6);
    for (double v : r.trace)
        CHECK(std::isfinite(v));

    const SumRateObjective obj(random_instance(13, 4, 8, 2));
    const CVec t0 = rng.phase_vec(8);
    CHECK(optimize_gd(obj, t0).final_value >= obj.value(t0));
}

TEST_CASE("APG", "[optimize]")
{
    CHECK_THAT(apg_momentum(1.0), WithinAbs(0.5 * (1.0 + std::sqrt(5.0)), 1e-15));
    Rng rng(14);
    const CVec q = rng.cnormal_vec(6);
    const OptimizerReport r = optimize_apg(LinearObjective(q), rng.phase_vec(6));
    CHECK(max_abs(r.theta - mm_subproblem(q)) < 1e-6);
    REQUIRE(r.aux.size() >= 2);
    CHECK(r.aux[0] == 1.0);
    for (std::size_t i = 1; i < r.aux.size(); ++i)
        CHECK(r.aux[i] == apg_momentum(r.aux[i - 1]));

    const SumRateObjective obj(random_instance(15, 4, 8, 2));
    const CVec t0 = rng.phase_vec(8);
    const OptimizerReport a = optimize_apg(obj, t0);
    CHECK(a.final_value >= obj.value(t0));
    CHECK(modulus_error(a.theta) < 1e-12);
}

TEST_CASE("BCD", "[optimize]")
{
    Rng rng(16);
    // M = 1: best of the grid
    const CVec q1 = CVec::Constant(1, std::polar(1.0, 0.3));
    BcdOptions o1;
    o1.grid = 8;
    const OptimizerReport r1 = optimize_bcd(LinearObjective(q1), CVec::Constant(1, std::polar(1.0, 3.0)), o1);
    CHECK(std::abs(std::arg(r1.theta(0))) < 1e-12);

    // M = 2 with a 4-phase grid against all 16 candidates
    for (int s = 0; s < 5; ++s) {
        const SumRateObjective obj(random_instance(200 + s, 2, 2, 2));
        BcdOptions o;
        o.grid = 4;
        const OptimizerReport r = optimize_bcd(obj, CVec::Ones(2), o);
        double best = -1.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                CVec t(2);
                t << std::polar(1.0, kPi / 2 * a), std::polar(1.0, kPi / 2 * b);
                best = std::max(best, obj.value(t));
            }
        CHECK(monotone(r.trace, 1e-9));
        CHECK(r.final_value <= best + 1e-12);
        // coordinate ascent stops at a coordinate-wise optimum of the grid
        for (int c = 0; c < 2; ++c)
            for (int a = 0; a < 4; ++a) {
                CVec t = r.theta;
                t(c) = std::polar(1.0, kPi / 2 * a);
                CHECK(obj.value(t) <= r.final_value + 1e-12);
            }
    }
}

TEST_CASE("ADMM", "[optimize]")
{
    const LinearObjective zero(CVec::Zero(4));
    Rng rng(17);
    const CVec t0 = rng.phase_vec(4);
    AdmmOptions o;
    o.penalty = 1.0;
    CHECK(max_abs(optimize_admm(zero, t0, o).theta - t0) < 1e-12);

    const SumRateObjective obj(random_instance(18, 4, 8, 2));
    const OptimizerReport r = optimize_admm(obj, rng.phase_vec(8));
    REQUIRE(!r.aux.empty());
    CHECK(r.aux.back() < 1e-3);
    CHECK(modulus_error(r.theta) < 1e-12);
}

TEST_CASE("log barrier", "[optimize]")
{
    CHECK(log_barrier(1.0, 100.0) == 0.0);
    CHECK(std::isinf(log_barrier(0.0, 100.0)));
    CHECK(std::isinf(log_barrier(-1.0, 100.0)));
    CHECK_THAT(log_barrier(0.5, 2.0), WithinRel(std::log(2.0) / 2.0, 1e-14));

    Rng rng(19);
    const SumRateObjective obj(random_instance(20, 4, 8, 2));
    const CVec t0 = rng.phase_vec(8);
    const OptimizerReport r = optimize_barrier(obj, t0);
    CHECK(r.final_value >= obj.value(t0));
    CHECK(modulus_error(r.theta) < 1e-12);
}

TEST_CASE("GA", "[optimize]")
{
    const SumRateObjective obj(random_instance(21, 2, 2, 2));
    const ValueFn fn = [&](const CVec& t) { return obj.value(t); };
    GaOptions o;
    o.population = 10;
    o.generations = 20;
    o.bits = 1;
    o.seed = 3;
    const OptimizerReport r = optimize_ga(fn, 2, o);
    double best = -1.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            CVec t(2);
            t << (a ? -1.0 : 1.0), (b ? -1.0 : 1.0);
            best = std::max(best, fn(t));
        }
    CHECK_THAT(r.final_value, WithinRel(best, 1e-12));
    CHECK(monotone(r.trace, 0.0));
    const OptimizerReport again = optimize_ga(fn, 2, o);
    CHECK(again.trace == r.trace);
    CHECK(max_abs(again.theta - r.theta) == 0.0);

    GaOptions z = o;
    z.generations = 0;
    z.bits = 0;
    const CVec inc = CVec::Constant(2, std::polar(1.0, 0.7));
    const OptimizerReport r0 = optimize_ga(fn, 2, z, inc);
    CHECK(r0.trace.size() == 1);
    CHECK(r0.final_value >= fn(inc));

    z.population = 1;
    CHECK_THROWS_AS(optimize_ga(fn, 2, z), DomainError);
}

TEST_CASE("discrete rounding", "[optimize]")
{
    CHECK(std::abs(discretize_round(CVec::Constant(1, std::polar(1.0, 0.6 * kPi)), 1)(0) - cd(-1.0, 0.0)) < 1e-15);
    const CVec s = discrete_set(2);
    CHECK(max_abs(discretize_round(s, 2) - s) == 0.0);
    CHECK(discretize_round(CVec::Constant(1, std::polar(1.0, kPi / 2)), 1)(0) == cd(1.0, 0.0));

    // nearest in chordal distance for random phases
    Rng rng(22);
    for (int bits = 1; bits <= 3; ++bits) {
        const CVec set = discrete_set(bits);
        const CVec th = rng.phase_vec(200);
        const CVec r = discretize_round(th, bits);
        for (Eigen::Index i = 0; i < th.size(); ++i) {
            double dmin = 1e9;
            for (Eigen::Index j = 0; j < set.size(); ++j)
                dmin = std::min(dmin, std::abs(th(i) - set(j)));
            CHECK(std::abs(th(i) - r(i)) <= dmin + 1e-12);
        }
    }
}

TEST_CASE("rotated hull projection", "[optimize]")
{
    for (int bits = 1; bits <= 3; ++bits) {
        const CVec ext = discrete_set(bits, true);
        CHECK(max_abs(project_rotated_hull(ext, bits) - ext) < 1e-14);
    }
    // 0 lies inside the hull, so it is its own projection
    CHECK(std::abs(project_rotated_hull(cd(0.0, 0.0), 2)) == 0.0);
    CHECK(std::abs(project_rotated_hull(cd(5.0, 0.0), 2) - cd(std::cos(kPi / 4), 0.0)) < 1e-14);

    // idempotent, and the result is no farther from u than any sampled hull point
    Rng rng(23);
    const CVec verts = discrete_set(2, true);
    for (int i = 0; i < 200; ++i) {
        const cd u = 2.0 * rng.cnormal();
        const cd p = project_rotated_hull(u, 2);
        CHECK(std::abs(project_rotated_hull(p, 2) - p) < 1e-12);
        for (int k = 0; k < 20; ++k) {
            RVec w = RVec::NullaryExpr(4, [&]() { return rng.uniform(); });
            w /= w.sum();
            const cd h = (verts.array() * w.cast<cd>().array()).sum();
            CHECK(std::abs(u - p) <= std::abs(u - h) + 1e-12);
        }
    }
}

TEST_CASE("NSP stays in the hull and snaps to the rotated set", "[optimize]")
{
    Rng rng(24);
    const SumRateObjective obj(random_instance(25, 2, 2, 2));
    NspOptions o;
    o.bits = 1;
    o.record_iterates = true;
    const OptimizerReport r = optimize_nsp(obj, rng.phase_vec(2), o);
    for (const CVec& it : r.iterates)
        CHECK(max_abs(project_rotated_hull(it, 1) - it) < 1e-12);
    const CVec set = discrete_set(1, true);
    for (Eigen::Index i = 0; i < r.theta.size(); ++i)
        CHECK(((set.array() - r.theta(i)).abs() < 1e-12).any());
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i] <= r.trace[i - 1] + 1e-9);
}

TEST_CASE("NSP against rounding the continuous optimum", "[optimize]")
{
    int wins = 0;
    for (int s = 0; s < 20; ++s) {
        const SumRateObjective obj(random_instance(300 + s, 2, 2, 2));
        Rng rng(400 + s);
        const CVec t0 = rng.phase_vec(2);
        NspOptions o;
        o.bits = 1;
        const double nsp = obj.value(optimize_nsp(obj, t0, o).theta);
        const double rounded = obj.value(discretize_round(optimize_mm(obj, t0, {}).theta, 1, true));
        if (nsp >= rounded - 1e-12)
            ++wins;
    }
    CHECK(wins >= 10);
}

TEST_CASE("objective scaling leaves backtracking optimizers unchanged", "[optimize]")
{
    Rng rng(26);
    const SumRateObjective obj(random_instance(27, 4, 8, 2));
    const ScaledObjective big(obj, 7.0);
    const CVec t0 = rng.phase_vec(8);
    CHECK(max_abs(optimize_bcd(obj, t0).theta - optimize_bcd(big, t0).theta) < 1e-12);
    CHECK(max_abs(optimize_ccm(obj, t0).theta - optimize_ccm(big, t0).theta) < 1e-9);
}

TEST_CASE("alternating optimization and report serialisation", "[optimize]")
{
    Rng rng(28);
    DownlinkInstance inst = random_instance(29, 4, 16, 2);
    const PhasePass pass = [](const SmoothObjective& o, const CVec& t) { return optimize_mm(o, t, {}); };
    const AoResult ao = alternating_optimize(inst, rng.phase_vec(16), BeamKind::mrt, RVec::Ones(1), pass, 4);
    CHECK(ao.sum_rate.size() == 4);
    CHECK(modulus_error(ao.theta) < 1e-12);
    for (int i = 0; i < 2; ++i)
        CHECK_THAT(ao.w.col(i).norm(), WithinAbs(1.0, 1e-12));
    CHECK_THROWS_AS(alternating_optimize(inst, ao.theta, BeamKind::mrc, RVec::Ones(1), pass), DomainError);

    OptimizerReport r;
    r.trace = {1.0, 2.5};
    r.elapsed_ns = {0.0, 10.0};
    std::ostringstream os;
    r.write_csv(os);
    CHECK(os.str() == "iteration,objective,elapsed_ns\n0,1,0\n1,2.5,10\n");
}
