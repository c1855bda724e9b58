// SPDX-License-Identifier: Apache-2.0
#include "riskit/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "riskit/errors.hpp"
#include "riskit/rng.hpp"

namespace riskit::optimize {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kLn2 = 0.69314718055994530942;

class Timer {
public:
    Timer() : start_(Clock::now()) {}
    double ns() const
    {
        return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count());
    }

private:
    Clock::time_point start_;
};

void push(OptimizerReport& rep, const Timer& t, double v)
{
    rep.trace.push_back(v);
    rep.elapsed_ns.push_back(t.ns());
}

void finish(OptimizerReport& rep, const Timer& t, int iterations)
{
    rep.iterations = iterations;
    rep.wall_time = t.ns() * 1e-9;
}

void check_finite(const CVec& g, const char* who)
{
    if (!g.allFinite())
        throw NumericError(std::string(who) + ": non-finite gradient");
}

bool stalled(double f_new, double f_old, double tol)
{
    return f_new - f_old <= tol * std::abs(f_old);
}

} // namespace

void DownlinkInstance::validate() const
{
    const std::size_t k = g.size();
    if (k == 0)
        throw DimensionError("DownlinkInstance: no users");
    if (hd.size() != k || static_cast<std::size_t>(sigma2.size()) != k)
        throw DimensionError("DownlinkInstance: per-user vectors disagree with the user count");
    const Eigen::Index n = g.front().rows(), m = g.front().cols();
    for (std::size_t i = 0; i < k; ++i) {
        if (g[i].rows() != n || g[i].cols() != m || hd[i].size() != n)
            throw DimensionError("DownlinkInstance: inconsistent channel shapes");
        if (!(sigma2(static_cast<Eigen::Index>(i)) > 0.0))
            throw DomainError("DownlinkInstance: noise power must be > 0");
    }
    if (w.rows() != n || w.cols() != static_cast<Eigen::Index>(k))
        throw DimensionError("DownlinkInstance: beam matrix must be N x K");
}

CMat effective_channels(const DownlinkInstance& inst, const CVec& theta)
{
    const int k = inst.users();
    if (k == 0 || theta.size() != inst.elements())
        throw DimensionError("effective_channels: theta length must equal M");
    CMat q(inst.antennas(), k);
    const CVec tc = theta.conjugate();
    for (int i = 0; i < k; ++i)
        q.col(i) = inst.hd[static_cast<std::size_t>(i)] + inst.g[static_cast<std::size_t>(i)] * tc;
    return q;
}

RateResult sinr_and_rate(const DownlinkInstance& inst, const CVec& theta)
{
    inst.validate();
    const CMat q = effective_channels(inst, theta);
    const CMat e = q.adjoint() * inst.w;  // e(k, i) = q_k^H w_i
    const int k = inst.users();
    RateResult r;
    r.sinr.resize(k);
    r.rate.resize(k);
    for (int u = 0; u < k; ++u) {
        double interf = inst.sigma2(u);
        for (int i = 0; i < k; ++i)
            if (i != u)
                interf += std::norm(e(u, i));
        r.sinr(u) = std::norm(e(u, u)) / interf;
        r.rate(u) = std::log2(1.0 + r.sinr(u));
    }
    r.sum_rate = r.rate.sum();
    return r;
}

CMat beamformer(BeamKind kind, const CMat& q, const RVec& powers, double sigma2)
{
    const Eigen::Index k = q.cols();
    if (k == 0)
        throw DimensionError("beamformer: no channels");
    if (powers.size() != 1 && powers.size() != k)
        throw DimensionError("beamformer: powers must have size 1 or K");
    auto pw = [&](Eigen::Index i) { return powers.size() == 1 ? powers(0) : powers(i); };
    switch (kind) {
    case BeamKind::mrt: {
        CMat w(q.rows(), k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const double nq = q.col(i).norm();
            if (nq == 0.0)
                throw DomainError("beamformer: zero effective channel");
            w.col(i) = std::sqrt(pw(i)) * q.col(i) / nq;
        }
        return w;
    }
    case BeamKind::mrc:
        return q;
    case BeamKind::zf: {
        if (k > q.rows())
            throw SingularError("beamformer: zf needs K <= N");
        const CMat gram = q.adjoint() * q;
        Eigen::FullPivLU<CMat> lu(gram);
        lu.setThreshold(1e-12);
        if (lu.rank() < k)
            throw SingularError("beamformer: singular Gram matrix for zf");
        return q * lu.inverse();
    }
    case BeamKind::lmmse_rx: {
        if (!(sigma2 > 0.0))
            throw DomainError("beamformer: lmmse needs sigma2 > 0");
        CMat r = sigma2 * CMat::Identity(q.rows(), q.rows());
        for (Eigen::Index i = 0; i < k; ++i)
            r += pw(i) * q.col(i) * q.col(i).adjoint();
        return r.ldlt().solve(q);
    }
    }
    throw DomainError("beamformer: unknown kind");
}

CVec project_unit_modulus(const CVec& z)
{
    CVec out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double a = std::abs(z(i));
        out(i) = a > 0.0 ? z(i) / a : cd(1.0, 0.0);
    }
    return out;
}

CVec mm_subproblem(const CVec& q) { return project_unit_modulus(q); }

void SmoothObjective::coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const
{
    out.resize(candidates.size());
    CVec t = theta;
    for (Eigen::Index c = 0; c < candidates.size(); ++c) {
        t(m) = candidates(c);
        out(c) = value(t);
    }
}

double LinearObjective::value(const CVec& theta) const { return theta.dot(q_).real(); }

CVec LinearObjective::gradient(const CVec&) const { return q_; }

void ScaledObjective::coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const
{
    base_.coordinate_values(theta, m, candidates, out);
    out *= c_;
}

SumRateObjective::SumRateObjective(DownlinkInstance inst) : inst_(std::move(inst))
{
    inst_.validate();
    const int k = inst_.users();
    a_.resize(k, k);
    b_.resize(static_cast<std::size_t>(k));
    for (int u = 0; u < k; ++u) {
        const auto su = static_cast<std::size_t>(u);
        a_.row(u) = inst_.hd[su].adjoint() * inst_.w;
        b_[su] = inst_.g[su].adjoint() * inst_.w;
    }
}

CMat SumRateObjective::terms(const CVec& theta) const
{
    if (theta.size() != inst_.elements())
        throw DimensionError("SumRateObjective: theta length must equal M");
    CMat e = a_;
    for (int u = 0; u < inst_.users(); ++u)
        e.row(u) += (b_[static_cast<std::size_t>(u)].transpose() * theta).transpose();
    return e;
}

double SumRateObjective::value(const CVec& theta) const
{
    const CMat e = terms(theta);
    double s = 0.0;
    for (int u = 0; u < inst_.users(); ++u) {
        double interf = inst_.sigma2(u);
        for (int i = 0; i < inst_.users(); ++i)
            if (i != u)
                interf += std::norm(e(u, i));
        s += std::log2(1.0 + std::norm(e(u, u)) / interf);
    }
    return s;
}

CVec SumRateObjective::gradient(const CVec& theta) const
{
    const CMat e = terms(theta);
    const int k = inst_.users();
    CVec g = CVec::Zero(theta.size());
    for (int u = 0; u < k; ++u) {
        const CMat& b = b_[static_cast<std::size_t>(u)];
        double interf = inst_.sigma2(u);
        for (int i = 0; i < k; ++i)
            if (i != u)
                interf += std::norm(e(u, i));
        const double total = interf + std::norm(e(u, u));
        // d|e|^2 = 2 e conj(b)
        CVec d_int = CVec::Zero(theta.size());
        for (int i = 0; i < k; ++i)
            if (i != u)
                d_int += 2.0 * e(u, i) * b.col(i).conjugate();
        const CVec d_tot = d_int + 2.0 * e(u, u) * b.col(u).conjugate();
        g += (d_tot / total - d_int / interf) / kLn2;
    }
    return g;
}

void SumRateObjective::coordinate_values(const CVec& theta, int m, const CVec& candidates, RVec& out) const
{
    const CMat e = terms(theta);
    const int k = inst_.users();
    out.resize(candidates.size());
    CMat e2(k, k);
    for (Eigen::Index c = 0; c < candidates.size(); ++c) {
        const cd delta = candidates(c) - theta(m);
        for (int u = 0; u < k; ++u)
            e2.row(u) = e.row(u) + delta * b_[static_cast<std::size_t>(u)].row(m);
        double s = 0.0;
        for (int u = 0; u < k; ++u) {
            double interf = inst_.sigma2(u);
            for (int i = 0; i < k; ++i)
                if (i != u)
                    interf += std::norm(e2(u, i));
            s += std::log2(1.0 + std::norm(e2(u, u)) / interf);
        }
        out(c) = s;
    }
}

void OptimizerReport::write_csv(std::ostream& os) const
{
    os << "iteration,objective,elapsed_ns\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double el = i < elapsed_ns.size() ? elapsed_ns[i] : 0.0;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, trace[i], el);
        os << buf;
    }
}

CVec numeric_gradient(const std::function<double(const CVec&)>& fn, const CVec& theta, double h)
{
    if (!(h > 0.0))
        throw DomainError("numeric_gradient: h must be > 0");
    CVec g(theta.size());
    CVec t = theta;
    for (Eigen::Index m = 0; m < theta.size(); ++m) {
        const cd orig = t(m);
        t(m) = orig + h;
        const double fpr = fn(t);
        t(m) = orig - h;
        const double fmr = fn(t);
        t(m) = orig + cd(0.0, h);
        const double fpi = fn(t);
        t(m) = orig - cd(0.0, h);
        const double fmi = fn(t);
        t(m) = orig;
        g(m) = cd((fpr - fmr) / (2.0 * h), (fpi - fmi) / (2.0 * h));
    }
    return g;
}

double estimate_lipschitz(const SmoothObjective& obj, const CVec& theta, int iters)
{
    Rng rng(0x5eedULL);
    CVec v = rng.cnormal_vec(theta.size());
    v /= v.norm();
    const double h = 1e-4 * std::max(1.0, theta.norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, theta.size()))));
    double lam = 0.0;
    for (int i = 0; i < iters; ++i) {
        const CVec hv = (obj.gradient(theta + h * v) - obj.gradient(theta - h * v)) / (2.0 * h);
        const double nrm = hv.norm();
        if (!std::isfinite(nrm))
            throw NumericError("estimate_lipschitz: non-finite curvature");
        lam = nrm;
        if (nrm <= 1e-300)
            return 0.0;
        v = hv / nrm;
    }
    return lam;
}

OptimizerReport optimize_mm(const SmoothObjective& obj, const CVec& theta0, const MmOptions& opt)
{
    Timer timer;
    OptimizerReport rep;
    CVec theta = project_unit_modulus(theta0);
    double l = opt.lipschitz > 0.0 ? opt.lipschitz : 10.0 * estimate_lipschitz(obj, theta);
    double f = obj.value(theta);
    push(rep, timer, f);
    int it = 0;
    for (; it < opt.iters; ++it) {
        const CVec g = obj.gradient(theta);
        check_finite(g, "optimize_mm");
        CVec next;
        double fn = 0.0;
        int tries = 0;
        for (;; ++tries) {
            next = mm_subproblem(l * theta + g);
            fn = obj.value(next);
            if (fn >= f || tries >= 60)
                break;
            // surrogate was not a minorizer: enlarge L
            l = l > 0.0 ? 2.0 * l : std::max(1e-12, g.cwiseAbs().maxCoeff());
            rep.lipschitz_adjusted = true;
        }
        if (fn < f) {
            push(rep, timer, f);
            ++it;
            break;
        }
        const double prev = f;
        theta = next;
        f = fn;
        push(rep, timer, f);
        if (stalled(f, prev, opt.tol)) {
            ++it;
            break;
        }
    }
    if (rep.lipschitz_adjusted)
        rep.note = "lipschitz constant enlarged to " + std::to_string(l);
    rep.theta = theta;
    rep.final_value = f;
    finish(rep, timer, it);
    return rep;
}

CVec ccm_tangent(const CVec& eta, const CVec& theta)
{
    if (eta.size() != theta.size())
        throw DimensionError("ccm_tangent: size mismatch");
    CVec out(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        out(i) = eta(i) - (std::conj(eta(i)) * theta(i)).real() * theta(i);
    return out;
}

namespace {

// Shared loop for the projected ascent methods; direction(theta, g) gives the
// raw ascent direction.
template <class Dir>
OptimizerReport projected_ascent(const SmoothObjective& obj, const CVec& theta0, double step0, int iters,
                                 int max_halvings, double tol, Dir direction, const char* who)
{
    if (!(step0 > 0.0))
        throw DomainError(std::string(who) + ": step must be > 0");
    Timer timer;
    OptimizerReport rep;
    CVec theta = project_unit_modulus(theta0);
    double f = obj.value(theta);
    push(rep, timer, f);
    double step = step0;
    int it = 0;
    for (; it < iters; ++it) {
        const CVec g = obj.gradient(theta);
        check_finite(g, who);
        const CVec d = direction(theta, g);
        const double dmax = d.cwiseAbs().maxCoeff();
        if (dmax == 0.0) {
            push(rep, timer, f);
            ++it;
            break;
        }
        step = std::min(2.0 * step, step0);
        // only the tangent part of d changes the objective to first order
        const double slope = ccm_tangent(d, theta).squaredNorm() / dmax;
        bool ok = false;
        CVec next;
        double fn = f;
        for (int h = 0; h <= max_halvings; ++h) {
            next = project_unit_modulus(theta + (step / dmax) * d);
            fn = obj.value(next);
            if (fn >= f + 1e-4 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            push(rep, timer, f);
            ++it;
            break;
        }
        const double prev = f;
        theta = next;
        f = fn;
        push(rep, timer, f);
        if (stalled(f, prev, tol)) {
            ++it;
            break;
        }
    }
    rep.theta = theta;
    rep.final_value = f;
    finish(rep, timer, it);
    return rep;
}

} // namespace

OptimizerReport optimize_ccm(const SmoothObjective& obj, const CVec& theta0, const CcmOptions& opt)
{
    return projected_ascent(obj, theta0, opt.step, opt.iters, opt.max_halvings, opt.tol,
                            [](const CVec& t, const CVec& g) { return ccm_tangent(g, t); }, "optimize_ccm");
}

OptimizerReport optimize_gd(const SmoothObjective& obj, const CVec& theta0, const GdOptions& opt)
{
    return projected_ascent(obj, theta0, opt.step, opt.iters, opt.max_halvings, opt.tol,
                            [](const CVec&, const CVec& g) { return g; }, "optimize_gd");
}

double apg_momentum(double xi) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * xi * xi)); }

OptimizerReport optimize_apg(const SmoothObjective& obj, const CVec& theta0, const ApgOptions& opt)
{
    Timer timer;
    OptimizerReport rep;
    CVec theta = project_unit_modulus(theta0);
    CVec prev = theta;
    double f = obj.value(theta);
    CVec best = theta;
    double best_f = f;
    push(rep, timer, f);
    double xi_prev = 1.0;
    rep.aux.push_back(xi_prev);
    const CVec g0 = obj.gradient(theta);
    check_finite(g0, "optimize_apg");
    const double gmax = g0.cwiseAbs().maxCoeff();
    double s = gmax > 0.0 ? 1.0 / gmax : 1.0;  // step 1/gamma
    int it = 0;
    for (; it < opt.iters; ++it) {
        const double xi = apg_momentum(xi_prev);
        const double alpha = (xi_prev - 1.0) / xi;
        rep.aux.push_back(xi);
        xi_prev = xi;
        const CVec z = theta + alpha * (theta - prev);
        const CVec gz = obj.gradient(z);
        check_finite(gz, "optimize_apg");
        const double fz = obj.value(z);
        s *= 1.5;
        bool ok = false;
        CVec next;
        double fn = 0.0;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            next = project_unit_modulus(z + s * gz);
            fn = obj.value(next);
            const CVec dz = next - z;
            if (fn >= fz + gz.dot(dz).real() - dz.squaredNorm() / (2.0 * s)) {
                ok = true;
                break;
            }
            s *= 0.5;
        }
        if (!ok) {
            rep.note = "line search failed";
            push(rep, timer, f);
            ++it;
            break;
        }
        prev = theta;
        theta = next;
        f = fn;
        push(rep, timer, f);
        if (f > best_f) {
            best_f = f;
            best = theta;
        }
    }
    rep.theta = best;
    rep.final_value = best_f;
    finish(rep, timer, it);
    return rep;
}

OptimizerReport optimize_bcd(const SmoothObjective& obj, const CVec& theta0, const BcdOptions& opt)
{
    if (opt.grid < 2)
        throw DomainError("optimize_bcd: grid must be >= 2");
    Timer timer;
    OptimizerReport rep;
    CVec theta = project_unit_modulus(theta0);
    double f = obj.value(theta);
    push(rep, timer, f);
    CVec cand(opt.grid + 1);
    for (int i = 0; i < opt.grid; ++i)
        cand(i + 1) = std::polar(1.0, 2.0 * kPi * i / opt.grid);
    RVec vals;
    int it = 0;
    for (; it < opt.sweeps; ++it) {
        const double start = f;
        for (Eigen::Index m = 0; m < theta.size(); ++m) {
            cand(0) = theta(m);  // incumbent first so ties keep it
            obj.coordinate_values(theta, static_cast<int>(m), cand, vals);
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < vals.size(); ++c)
                if (vals(c) > vals(best))
                    best = c;
            if (best != 0 && vals(best) > f) {
                theta(m) = cand(best);
                f = vals(best);
            }
        }
        f = obj.value(theta);
        push(rep, timer, f);
        if (stalled(f, start, opt.tol)) {
            ++it;
            break;
        }
    }
    rep.theta = theta;
    rep.final_value = f;
    finish(rep, timer, it);
    return rep;
}

OptimizerReport optimize_admm(const SmoothObjective& obj, const CVec& theta0, const AdmmOptions& opt)
{
    Timer timer;
    OptimizerReport rep;
    CVec omega = project_unit_modulus(theta0);
    CVec theta = omega;
    CVec lam = CVec::Zero(omega.size());
    const double lest = estimate_lipschitz(obj, omega);
    double rho = opt.penalty;
    if (!(rho > 0.0))
        rho = lest > 0.0 ? 2.0 * lest : 1.0;
    const double rho_cap = 1e6 * rho;
    push(rep, timer, obj.value(omega));
    double prev_res = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opt.iters; ++it) {
        const double eta = 1.0 / (lest + rho);
        // theta-step on -f + rho/2 ||theta - omega + lam||^2
        for (int s = 0; s < opt.inner_steps; ++s) {
            const CVec g = obj.gradient(theta);
            check_finite(g, "optimize_admm");
            theta -= eta * (-g + rho * (theta - omega + lam));
        }
        omega = project_unit_modulus(theta + lam);
        lam += theta - omega;
        const double res = (theta - omega).norm();
        rep.aux.push_back(res);
        push(rep, timer, obj.value(omega));
        if (res < opt.tol) {
            ++it;
            break;
        }
        // residual not shrinking: stiffen the penalty, rescale the scaled dual to match
        if (res > 0.9 * prev_res) {
            if (rho >= rho_cap) {
                rep.diverged = true;
                rep.note = "penalty reached its cap without closing the primal residual";
                ++it;
                break;
            }
            const double grown = std::min(1.1 * rho, rho_cap);
            lam *= rho / grown;
            rho = grown;
        }
        prev_res = res;
    }
    rep.theta = project_unit_modulus(omega);
    rep.final_value = obj.value(rep.theta);
    finish(rep, timer, it);
    return rep;
}

double log_barrier(double x, double kappa)
{
    if (!(kappa > 0.0))
        throw DomainError("log_barrier: kappa must be > 0");
    return x > 0.0 ? -std::log(x) / kappa : std::numeric_limits<double>::infinity();
}

OptimizerReport optimize_barrier(const SmoothObjective& obj, const CVec& theta0, const BarrierOptions& opt)
{
    if (!(opt.kappa > 0.0) || opt.p < 2 || opt.p % 2 != 0 || !(opt.slack > 1.0))
        throw DomainError("optimize_barrier: need kappa > 0, even p >= 2, slack > 1");
    Timer timer;
    OptimizerReport rep;
    const double m = static_cast<double>(theta0.size());
    const double p = opt.p;
    const double radius = opt.slack * std::pow(m, 1.0 / p);
    auto pnorm = [&](const CVec& t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < t.size(); ++i)
            s += std::pow(std::abs(t(i)), p);
        return std::pow(s, 1.0 / p);
    };
    auto big_g = [&](const CVec& t) { return -obj.value(t) + log_barrier(1.0 - pnorm(t) / radius, opt.kappa); };
    auto normalize = [&](CVec t) {
        const double n = t.norm();
        if (n > 0.0)
            t *= std::sqrt(m) / n;
        return t;
    };

    CVec theta = project_unit_modulus(theta0);
    double gval = big_g(theta);
    if (!std::isfinite(gval))
        throw NumericError("optimize_barrier: start point outside the barrier domain");
    CVec best = theta;
    double best_f = obj.value(theta);
    push(rep, timer, best_f);
    int it = 0;
    for (; it < opt.iters; ++it) {
        const double pn = pnorm(theta);
        CVec xi(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            xi(i) = theta(i) * std::pow(std::abs(theta(i)), p - 2.0);
        const CVec g = obj.gradient(theta);
        check_finite(g, "optimize_barrier");
        const CVec grad = -g + (std::pow(pn, 1.0 - p) / (opt.kappa * radius * (1.0 - pn / radius))) * xi;
        const CVec d = -grad;
        const CVec dp = d - (theta.dot(d) / theta.squaredNorm()) * theta;
        const double dn = dp.norm();
        if (dn == 0.0) {
            push(rep, timer, obj.value(theta));
            ++it;
            break;
        }
        const CVec target = std::sqrt(m) * dp / dn;
        double best_a = 0.0, best_g = gval;
        CVec best_t = theta;
        for (int h = 0; h <= 40; ++h) {
            const double a = std::ldexp(1.0, -h);
            const CVec cand = normalize((1.0 - a) * theta + a * target);
            const double gv = big_g(cand);  // +inf rejects
            if (gv < best_g) {
                best_g = gv;
                best_a = a;
                best_t = cand;
            }
        }
        if (best_a == 0.0) {
            push(rep, timer, obj.value(theta));
            ++it;
            break;
        }
        const double prev = gval;
        theta = best_t;
        gval = best_g;
        const CVec proj = project_unit_modulus(theta);
        const double fp = obj.value(proj);
        if (fp > best_f) {
            best_f = fp;
            best = proj;
        }
        push(rep, timer, obj.value(theta));
        if (prev - gval <= opt.tol * std::abs(prev)) {
            ++it;
            break;
        }
    }
    rep.theta = best;
    rep.final_value = best_f;
    finish(rep, timer, it);
    return rep;
}

CVec discrete_set(int bits, bool rotated)
{
    if (bits < 1 || bits > 16)
        throw DomainError("discrete_set: bits must be in [1, 16]");
    const int l = 1 << bits;
    CVec s(l);
    const double off = rotated ? kPi / l : 0.0;
    for (int i = 0; i < l; ++i)
        s(i) = std::polar(1.0, 2.0 * kPi * i / l + off);
    return s;
}

CVec discretize_round(const CVec& theta, int bits, bool rotated)
{
    const CVec s = discrete_set(bits, rotated);
    CVec out(theta.size());
    std::vector<double> d(static_cast<std::size_t>(s.size()));
    for (Eigen::Index m = 0; m < theta.size(); ++m) {
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            d[static_cast<std::size_t>(i)] = std::abs(theta(m) - s(i));
            dmin = std::min(dmin, d[static_cast<std::size_t>(i)]);
        }
        // ties (to rounding) go to the smaller index
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (d[static_cast<std::size_t>(i)] <= dmin + 1e-12) {
                out(m) = s(i);
                break;
            }
    }
    return out;
}

cd project_rotated_hull(cd u, int bits)
{
    if (bits < 1 || bits > 16)
        throw DomainError("project_rotated_hull: bits must be in [1, 16]");
    const double l = static_cast<double>(1 << bits);
    const double n = std::floor((std::arg(u) + kPi / l) / (2.0 * kPi / l));
    const cd rot = std::polar(1.0, 2.0 * kPi * n / l);
    const cd ut = u * std::conj(rot);
    const double c = std::cos(kPi / l), s = std::sin(kPi / l);
    return rot * cd(std::clamp(ut.real(), 0.0, c), std::clamp(ut.imag(), -s, s));
}

CVec project_rotated_hull(const CVec& u, int bits)
{
    CVec out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
        out(i) = project_rotated_hull(u(i), bits);
    return out;
}

OptimizerReport optimize_nsp(const SmoothObjective& obj, const CVec& theta0, const NspOptions& opt)
{
    Timer timer;
    OptimizerReport rep;
    CVec theta = project_rotated_hull(theta0, opt.bits);
    double lam = opt.lambda;
    if (!(lam > 0.0)) {
        lam = estimate_lipschitz(obj, project_unit_modulus(theta0));
        if (!(lam > 0.0))
            lam = 1.0;
    }
    auto penalized = [&](const CVec& t) { return -obj.value(t) - lam * t.squaredNorm(); };
    double fpen = penalized(theta);
    push(rep, timer, fpen);
    if (opt.record_iterates)
        rep.iterates.push_back(theta);
    double s = 1.0 / lam;
    int it = 0;
    for (; it < opt.iters; ++it) {
        const CVec anchor = theta;
        const double anchor_sq = anchor.squaredNorm();
        auto sur = [&](const CVec& t) {
            return -obj.value(t) - lam * (2.0 * t.dot(anchor).real() - anchor_sq);
        };
        auto sur_grad = [&](const CVec& t) { return CVec(-obj.gradient(t) - 2.0 * lam * anchor); };
        // monotone FISTA on the surrogate
        CVec x = anchor, y = anchor;
        double gx = sur(x);
        double t = 1.0;
        for (int in = 0; in < opt.inner_iters; ++in) {
            const CVec gy = sur_grad(y);
            check_finite(gy, "optimize_nsp");
            const double fy = sur(y);
            s *= 1.5;
            CVec z;
            double gz = 0.0;
            for (int h = 0; h <= opt.max_halvings; ++h) {
                z = project_rotated_hull(CVec(y - s * gy), opt.bits);
                gz = sur(z);
                const CVec dz = z - y;
                if (gz <= fy + gy.dot(dz).real() + dz.squaredNorm() / (2.0 * s))
                    break;
                s *= 0.5;
            }
            const CVec xold = x;
            if (gz <= gx) {
                x = z;
                gx = gz;
            }
            const double tn = apg_momentum(t);
            y = x + (t / tn) * (z - x) + ((t - 1.0) / tn) * (x - xold);
            t = tn;
            if (opt.record_iterates)
                rep.iterates.push_back(x);
        }
        const double prev = fpen;
        theta = x;
        fpen = penalized(theta);
        push(rep, timer, fpen);
        if (prev - fpen <= 1e-12 * std::abs(prev)) {
            ++it;
            break;
        }
    }
    rep.theta = discretize_round(theta, opt.bits, true);
    rep.final_value = obj.value(rep.theta);
    finish(rep, timer, it);
    return rep;
}

OptimizerReport optimize_ga(const ValueFn& fn, int m, const GaOptions& opt, const std::optional<CVec>& incumbent)
{
    if (opt.population < 2)
        throw DomainError("optimize_ga: population must be >= 2");
    if (m < 1 || opt.generations < 0 || opt.bits < 0)
        throw DomainError("optimize_ga: invalid sizes");
    if (incumbent && incumbent->size() != m)
        throw DimensionError("optimize_ga: incumbent length must equal M");
    Timer timer;
    OptimizerReport rep;
    Rng rng(opt.seed);
    const bool discrete = opt.bits > 0;
    const int levels = discrete ? (1 << opt.bits) : 0;
    const double pm = opt.mutation > 0.0 ? opt.mutation : 1.0 / m;
    const int np = opt.population;
    const int elites = std::clamp(opt.elites, 1, np);

    auto to_phase = [&](double gene) { return discrete ? 2.0 * kPi * gene / levels : gene; };
    auto decode = [&](const RVec& genes) {
        CVec t(m);
        for (int i = 0; i < m; ++i)
            t(i) = std::polar(1.0, to_phase(genes(i)));
        return t;
    };
    auto random_gene = [&]() {
        return discrete ? static_cast<double>(rng.index(static_cast<std::size_t>(levels))) : rng.uniform(-kPi, kPi);
    };

    std::vector<RVec> pop(static_cast<std::size_t>(np), RVec(m));
    for (auto& ind : pop)
        for (int i = 0; i < m; ++i)
            ind(i) = random_gene();
    if (incumbent) {
        const CVec inc = discrete ? discretize_round(*incumbent, opt.bits) : project_unit_modulus(*incumbent);
        for (int i = 0; i < m; ++i) {
            double ph = std::arg(inc(i));
            if (discrete) {
                if (ph < 0.0)
                    ph += 2.0 * kPi;
                ph = std::fmod(std::round(ph / (2.0 * kPi / levels)), static_cast<double>(levels));
            }
            pop[0](i) = ph;
        }
    }
    std::vector<double> fit(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i)
        fit[static_cast<std::size_t>(i)] = fn(decode(pop[static_cast<std::size_t>(i)]));

    std::vector<int> order(static_cast<std::size_t>(np));
    auto rank = [&]() {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return fit[static_cast<std::size_t>(a)] > fit[static_cast<std::size_t>(b)];
        });
    };
    rank();
    push(rep, timer, fit[static_cast<std::size_t>(order[0])]);
    auto tournament = [&]() {
        const std::size_t a = rng.index(static_cast<std::size_t>(np)), b = rng.index(static_cast<std::size_t>(np));
        return fit[a] >= fit[b] ? a : b;
    };

    for (int gen = 0; gen < opt.generations; ++gen) {
        std::vector<RVec> next;
        std::vector<double> nfit;
        next.reserve(static_cast<std::size_t>(np));
        for (int e = 0; e < elites; ++e) {
            next.push_back(pop[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]);
            nfit.push_back(fit[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]);
        }
        while (static_cast<int>(next.size()) < np) {
            const RVec& pa = pop[tournament()];
            const RVec& pb = pop[tournament()];
            RVec child = pa;
            if (rng.uniform() < opt.crossover)
                for (int i = 0; i < m; ++i)
                    if (rng.uniform() < 0.5)
                        child(i) = pb(i);
            for (int i = 0; i < m; ++i) {
                if (rng.uniform() >= pm)
                    continue;
                if (discrete) {
                    child(i) = random_gene();
                } else {
                    child(i) = std::remainder(child(i) + opt.mutation_sigma * rng.normal(), 2.0 * kPi);
                }
            }
            nfit.push_back(fn(decode(child)));
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        fit = std::move(nfit);
        rank();
        push(rep, timer, fit[static_cast<std::size_t>(order[0])]);
    }
    rep.theta = decode(pop[static_cast<std::size_t>(order[0])]);
    rep.final_value = fit[static_cast<std::size_t>(order[0])];
    finish(rep, timer, opt.generations);
    return rep;
}

AoResult alternating_optimize(DownlinkInstance inst, const CVec& theta0, BeamKind beams, const RVec& powers,
                              const PhasePass& pass, int rounds)
{
    if (beams != BeamKind::mrt && beams != BeamKind::zf)
        throw DomainError("alternating_optimize: beams must be mrt or zf");
    if (rounds < 1)
        throw DomainError("alternating_optimize: rounds must be >= 1");
    AoResult res;
    res.theta = project_unit_modulus(theta0);
    const Eigen::Index k = inst.users();
    for (int r = 0; r < rounds; ++r) {
        const CMat q = effective_channels(inst, res.theta);
        CMat w = beamformer(beams, q, powers);
        if (beams == BeamKind::zf)
            for (Eigen::Index i = 0; i < k; ++i)
                w.col(i) *= std::sqrt(powers.size() == 1 ? powers(0) : powers(i)) / w.col(i).norm();
        inst.w = w;
        const SumRateObjective obj(inst);
        const OptimizerReport rep = pass(obj, res.theta);
        // keep the incumbent when a pass does not improve on it
        if (obj.value(rep.theta) >= obj.value(res.theta))
            res.theta = rep.theta;
        res.sum_rate.push_back(obj.value(res.theta));
    }
    res.w = inst.w;
    return res;
}

} // namespace riskit::optimize
