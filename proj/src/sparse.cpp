// SPDX-License-Identifier: Apache-2.0
#include "riskit/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riskit/channel.hpp"

namespace riskit::sparse {

namespace {

std::vector<double> uniform_grid(int g)
{
    std::vector<double> w(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i)
        w[static_cast<std::size_t>(i)] = -kPi + 2.0 * kPi * i / g;
    return w;
}

int nearest_on_grid(double w, std::size_t g)
{
    const double step = 2.0 * kPi / static_cast<double>(g);
    double x = std::fmod(w + kPi, 2.0 * kPi);
    if (x < 0.0)
        x += 2.0 * kPi;
    long idx = std::lround(x / step);
    return static_cast<int>(idx % static_cast<long>(g));
}

RVec column_norms(const CMat& a)
{
    RVec n(a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        n(c) = a.col(c).norm();
    return n;
}

} // namespace

double Dictionary::freq_x(int c) const
{
    return grid_x.at(static_cast<std::size_t>(c) / grid_z.size());
}

double Dictionary::freq_z(int c) const
{
    return grid_z.at(static_cast<std::size_t>(c) % grid_z.size());
}

int Dictionary::nearest(double wx, double wz) const
{
    const int ix = nearest_on_grid(wx, grid_x.size());
    const int iz = grid_z.size() == 1 ? 0 : nearest_on_grid(wz, grid_z.size());
    return ix * static_cast<int>(grid_z.size()) + iz;
}

Dictionary make_dictionary_ula(int n, int g, bool allow_undercomplete)
{
    if (n < 1 || g < 1)
        throw DimensionError("make_dictionary_ula: sizes must be >= 1");
    if (g < n && !allow_undercomplete)
        throw UndercompleteDictionary("make_dictionary_ula: grid smaller than the array (under-complete)");
    Dictionary d;
    d.kind = ArrayKind::ula;
    d.size_x = n;
    d.size_z = 1;
    d.grid_x = uniform_grid(g);
    d.grid_z = {0.0};
    d.atoms.resize(n, g);
    for (int c = 0; c < g; ++c)
        d.atoms.col(c) = channel::ula_steering(d.grid_x[static_cast<std::size_t>(c)], n);
    d.gram = d.atoms.adjoint() * d.atoms;
    return d;
}

Dictionary make_dictionary_upa(int m_x, int m_z, int g, bool allow_undercomplete)
{
    if (m_x < 1 || m_z < 1 || g < 1)
        throw DimensionError("make_dictionary_upa: sizes must be >= 1");
    const int q = static_cast<int>(std::lround(std::sqrt(static_cast<double>(g))));
    if (q * q != g)
        throw DimensionError("make_dictionary_upa: grid count must be a perfect square");
    if ((q < m_x || q < m_z) && !allow_undercomplete)
        throw UndercompleteDictionary("make_dictionary_upa: grid smaller than the array (under-complete)");
    Dictionary d;
    d.kind = ArrayKind::upa;
    d.size_x = m_x;
    d.size_z = m_z;
    d.grid_x = uniform_grid(q);
    d.grid_z = uniform_grid(q);
    d.atoms.resize(m_x * m_z, g);
    for (int ix = 0; ix < q; ++ix)
        for (int iz = 0; iz < q; ++iz)
            d.atoms.col(ix * q + iz) =
                channel::upa_steering(d.grid_x[static_cast<std::size_t>(ix)], d.grid_z[static_cast<std::size_t>(iz)], m_x, m_z);
    d.gram = d.atoms.adjoint() * d.atoms;
    return d;
}

SparseSolution omp_solve(const CVec& y, const CMat& a, int max_atoms, double tol)
{
    if (a.rows() != y.size())
        throw DimensionError("omp_solve: sensing matrix rows must match y");
    if (max_atoms < 0 || max_atoms > a.cols())
        throw DimensionError("omp_solve: sparsity exceeds the column count");
    const RVec norms = column_norms(a);
    if (a.cols() == 0 || norms.maxCoeff() == 0.0)
        throw NumericError("omp_solve: sensing matrix is zero, no progress possible");

    SparseSolution sol;
    CVec r = y;
    sol.residual_norm = r.norm();
    sol.residual_trace.push_back(sol.residual_norm);
    sol.gains = CVec();
    std::vector<char> used(static_cast<std::size_t>(a.cols()), 0);
    const double floor = 1e-13 * norms.maxCoeff();
    while (static_cast<int>(sol.support.size()) < max_atoms && sol.residual_norm > tol) {
        const CVec corr = a.adjoint() * r;
        int best = -1;
        double best_score = 0.0;
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            if (used[static_cast<std::size_t>(c)] || norms(c) == 0.0)
                continue;
            const double s = std::abs(corr(c)) / norms(c);
            if (s > best_score) {
                best_score = s;
                best = static_cast<int>(c);
            }
        }
        if (best < 0 || best_score <= floor * std::max(sol.residual_norm, 1e-300))
            break; // residual orthogonal to every unused column
        used[static_cast<std::size_t>(best)] = 1;
        sol.support.push_back(best);
        CMat sub(a.rows(), static_cast<Eigen::Index>(sol.support.size()));
        for (std::size_t i = 0; i < sol.support.size(); ++i)
            sub.col(static_cast<Eigen::Index>(i)) = a.col(sol.support[i]);
        sol.gains = sub.colPivHouseholderQr().solve(y);
        r = y - sub * sol.gains;
        sol.residual_norm = std::min(r.norm(), sol.residual_norm);
        sol.residual_trace.push_back(sol.residual_norm);
    }
    if (sol.support.empty())
        sol.gains = CVec();
    return sol;
}

MmvSolution somp_solve(const CMat& y, const CMat& a, int max_atoms, double tol)
{
    if (a.rows() != y.rows())
        throw DimensionError("somp_solve: sensing matrix rows must match Y");
    if (max_atoms < 0 || max_atoms > a.cols())
        throw DimensionError("somp_solve: sparsity exceeds the column count");
    const RVec norms = column_norms(a);
    if (a.cols() == 0 || norms.maxCoeff() == 0.0)
        throw NumericError("somp_solve: sensing matrix is zero, no progress possible");

    MmvSolution sol;
    CMat r = y;
    sol.residual_norm = r.norm();
    sol.residual_trace.push_back(sol.residual_norm);
    std::vector<char> used(static_cast<std::size_t>(a.cols()), 0);
    const double floor = 1e-13 * norms.maxCoeff();
    while (static_cast<int>(sol.support.size()) < max_atoms && sol.residual_norm > tol) {
        const CMat corr = a.adjoint() * r;
        int best = -1;
        double best_score = 0.0;
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            if (used[static_cast<std::size_t>(c)] || norms(c) == 0.0)
                continue;
            const double s = corr.row(c).norm() / norms(c);
            if (s > best_score) {
                best_score = s;
                best = static_cast<int>(c);
            }
        }
        if (best < 0 || best_score <= floor * std::max(sol.residual_norm, 1e-300))
            break;
        used[static_cast<std::size_t>(best)] = 1;
        sol.support.push_back(best);
        CMat sub(a.rows(), static_cast<Eigen::Index>(sol.support.size()));
        for (std::size_t i = 0; i < sol.support.size(); ++i)
            sub.col(static_cast<Eigen::Index>(i)) = a.col(sol.support[i]);
        sol.gains = sub.colPivHouseholderQr().solve(y);
        r = y - sub * sol.gains;
        sol.residual_norm = std::min(r.norm(), sol.residual_norm);
        sol.residual_trace.push_back(sol.residual_norm);
    }
    return sol;
}

CascadedObservation observe_cascaded(const CMat& g, const CMat& training, double p, double sigma2, Rng& rng)
{
    if (g.cols() != training.rows())
        throw DimensionError("observe_cascaded: training rows must equal M");
    CascadedObservation obs;
    obs.training = training;
    obs.p = p;
    obs.y = std::sqrt(p) * g * training;
    if (sigma2 > 0.0)
        obs.y += std::sqrt(sigma2) * rng.cnormal_mat(obs.y.rows(), obs.y.cols());
    return obs;
}

OneStageResult one_stage_estimate(const CascadedObservation& obs, const Dictionary& bs, const Dictionary& ris,
                                  const OneStageOptions& opt)
{
    const CMat& ab = bs.atoms;
    const CMat& ar = ris.atoms;
    if (obs.y.rows() != ab.rows() || obs.training.rows() != ar.rows() || obs.y.cols() != obs.training.cols())
        throw DimensionError("one_stage_estimate: observation and dictionaries disagree");
    const double width = static_cast<double>(ab.cols()) * static_cast<double>(ar.cols());
    if (width > opt.column_budget)
        throw DimensionError("one_stage_estimate: composite dictionary has " + std::to_string(width) +
                             " columns, above the budget of " + std::to_string(opt.column_budget));
    if (opt.sparsity < 0 || opt.sparsity > width)
        throw DimensionError("one_stage_estimate: invalid sparsity");

    const CMat dr = obs.training.transpose() * ar;  // T x G_R
    const RVec nb = column_norms(ab);
    const RVec nr = column_norms(dr);
    const CMat gb = bs.gram.rows() == ab.cols() ? bs.gram : CMat(ab.adjoint() * ab);
    // Gram columns of dr are formed only for selected atoms
    CMat gr_sel(dr.cols(), 0);
    const CMat cy = (ab.adjoint() * obs.y) * dr.conjugate();
    const RVec inb2 = nb.unaryExpr([](double v) { return v > 0.0 ? 1.0 / (v * v) : 0.0; });
    const RVec inr2 = nr.unaryExpr([](double v) { return v > 0.0 ? 1.0 / (v * v) : 0.0; });

    OneStageResult res;
    res.g_hat = CMat::Zero(ab.rows(), ar.rows());
    std::vector<std::pair<int, int>> sup;
    CVec coef;
    const double ynorm2 = obs.y.squaredNorm();
    double rnorm = std::sqrt(ynorm2);
    const double floor = 1e-13 * nb.maxCoeff() * nr.maxCoeff();
    CMat cr = cy;
    while (static_cast<int>(sup.size()) < opt.sparsity && rnorm > opt.tol) {
        int bb = -1, rr = -1;
        double best2 = 0.0;  // squared normalised score
        for (Eigen::Index c = 0; c < cr.cols(); ++c) {
            if (inr2(c) == 0.0)
                continue;
            for (Eigen::Index b = 0; b < cr.rows(); ++b) {
                const double sc = std::norm(cr(b, c)) * inb2(b) * inr2(c);
                if (sc > best2) {
                    bool taken = false;
                    for (const auto& pr : sup)
                        taken = taken || (pr.first == b && pr.second == c);
                    if (!taken) {
                        best2 = sc;
                        bb = static_cast<int>(b);
                        rr = static_cast<int>(c);
                    }
                }
            }
        }
        if (bb < 0 || std::sqrt(best2) <= floor * std::max(rnorm, 1e-300))
            break;
        sup.emplace_back(bb, rr);
        gr_sel.conservativeResize(Eigen::NoChange, gr_sel.cols() + 1);
        gr_sel.col(gr_sel.cols() - 1) = dr.adjoint() * dr.col(rr);
        // Composite atoms are vec(a_b d_r^T), so their Gram matrix and
        // correlations with y factor through gb, gr and cy.
        const auto k = static_cast<Eigen::Index>(sup.size());
        CMat gram(k, k);
        CVec rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto [bi, ri] = sup[static_cast<std::size_t>(i)];
            rhs(i) = cy(bi, ri);
            for (Eigen::Index j = 0; j < k; ++j) {
                const auto [bj, rj] = sup[static_cast<std::size_t>(j)];
                gram(i, j) = gb(bi, bj) * gr_sel(ri, j);
            }
        }
        coef = gram.completeOrthogonalDecomposition().solve(rhs);
        rnorm = std::sqrt(std::max(0.0, ynorm2 - std::real(rhs.dot(coef))));
        CMat left(gb.rows(), k), right(gr_sel.rows(), k);
        for (Eigen::Index i = 0; i < k; ++i) {
            left.col(i) = gb.col(sup[static_cast<std::size_t>(i)].first) * coef(i);
            right.col(i) = gr_sel.col(i);
        }
        cr = cy;
        cr.noalias() -= left * right.transpose();
    }
    const double scale = 1.0 / std::sqrt(obs.p);
    res.gains = sup.empty() ? CVec() : CVec(coef * scale);
    for (std::size_t s = 0; s < sup.size(); ++s) {
        res.bs_index.push_back(sup[s].first);
        res.ris_index.push_back(sup[s].second);
        res.g_hat += res.gains(static_cast<Eigen::Index>(s)) * ab.col(sup[s].first) * ar.col(sup[s].second).transpose();
    }
    return res;
}

TwoStageResult two_stage_estimate(const CascadedObservation& obs, const Dictionary& bs, const Dictionary& ris,
                                  const TwoStageOptions& opt)
{
    const CMat& ab = bs.atoms;
    const CMat& ar = ris.atoms;
    if (obs.y.rows() != ab.rows() || obs.training.rows() != ar.rows() || obs.y.cols() != obs.training.cols())
        throw DimensionError("two_stage_estimate: observation and dictionaries disagree");
    if (opt.l_br < 1 || opt.l_ru < 1 || opt.l_br >= ab.rows())
        throw DimensionError("two_stage_estimate: need 1 <= L_BR < N and L_RU >= 1");

    TwoStageResult res;
    const MmvSolution st1 = somp_solve(obs.y, ab, opt.l_br);
    const double ynorm = obs.y.norm();
    if (ynorm > 0.0 && st1.residual_norm / ynorm > opt.stage1_tol)
        throw StageError(1, "BS-side residual " + std::to_string(st1.residual_norm / ynorm) + " above tolerance");
    if (st1.support.empty()) {
        res.g_hat = CMat::Zero(ab.rows(), ar.rows());
        return res;
    }
    const Eigen::Index lb = static_cast<Eigen::Index>(st1.support.size());
    CMat a_b(ab.rows(), lb);
    for (Eigen::Index l = 0; l < lb; ++l) {
        a_b.col(l) = ab.col(st1.support[static_cast<std::size_t>(l)]);
        res.bs_index.push_back(st1.support[static_cast<std::size_t>(l)]);
        res.omega_bh.push_back(bs.freq_x(st1.support[static_cast<std::size_t>(l)]));
    }
    // Y_R = (A_B^+ Y)^T / sqrt(P) = Xi^T B
    const CMat y_r = CMat(a_b.colPivHouseholderQr().solve(obs.y)).transpose() / std::sqrt(obs.p);
    const CMat dr = obs.training.transpose() * ar;

    CMat b = CMat::Zero(ar.rows(), lb);
    auto full_solve = [&](Eigen::Index l) {
        const SparseSolution s = omp_solve(y_r.col(l), dr, opt.l_ru);
        for (std::size_t i = 0; i < s.support.size(); ++i)
            b.col(l) += s.gains(static_cast<Eigen::Index>(i)) * ar.col(s.support[i]);
        ++res.full_solves;
    };
    if (opt.mode == TwoStageMode::correlation_ignored) {
        for (Eigen::Index l = 0; l < lb; ++l)
            full_solve(l);
    } else {
        full_solve(0);
        const CVec b1 = b.col(0);
        const CMat shifted = ar.conjugate().array().colwise() * b1.array();
        const CMat d1 = obs.training.transpose() * shifted;
        for (Eigen::Index l = 1; l < lb; ++l) {
            const SparseSolution s = omp_solve(y_r.col(l), d1, 1);
            if (!s.support.empty())
                b.col(l) = s.gains(0) * shifted.col(s.support[0]);
            ++res.single_solves;
        }
    }
    res.g_hat = a_b * b.transpose();
    return res;
}

BeamChoice beam_train_exhaustive(const PowerOracle& oracle, const std::vector<CVec>& bs_codebook,
                                 const std::vector<CVec>& ris_codebook)
{
    if (bs_codebook.empty() || ris_codebook.empty())
        throw DimensionError("beam_train_exhaustive: codebooks must be nonempty");
    BeamChoice best;
    best.power = -1.0;
    for (std::size_t i = 0; i < bs_codebook.size(); ++i)
        for (std::size_t j = 0; j < ris_codebook.size(); ++j) {
            const double p = oracle(bs_codebook[i], ris_codebook[j]);
            if (p > best.power) {
                best.power = p;
                best.bs_index = static_cast<int>(i);
                best.ris_index = static_cast<int>(j);
            }
        }
    return best;
}

double nmse(const CMat& g_hat, const CMat& g)
{
    if (g_hat.rows() != g.rows() || g_hat.cols() != g.cols())
        throw DimensionError("nmse: shapes differ");
    const double den = g.squaredNorm();
    if (!(den > 0.0))
        throw DomainError("nmse: reference channel is zero");
    return (g_hat - g).squaredNorm() / den;
}

double cs_pilot_overhead(CsMethod method, const OverheadParams& p)
{
    if (p.l_br < 1 || p.l_ru < 1 || p.n < 1 || p.m < 1 || p.k < 1)
        throw DimensionError("cs_pilot_overhead: counts must be >= 1");
    const double gb = p.g_b > 0 ? p.g_b : 4.0 * p.n;
    const double gr = p.g_r > 0 ? p.g_r : 4.0 * p.m;
    const double lbr = p.l_br, lru = p.l_ru;
    switch (method) {
    case CsMethod::one_stage:
        return lbr * lru / p.n * std::log(gb * gr * gr / (lbr * lru));
    case CsMethod::two_stage:
        return lru * std::log(gr / lru);
    case CsMethod::multi_user_jiechen:
        return static_cast<double>(p.k) * p.m / (lbr * lru);
    case CsMethod::multi_user_gui:
        return lru * std::log(gr / lru) + (p.k - 1) * (lru / lbr) * std::log(gr / lru);
    }
    throw DomainError("cs_pilot_overhead: unknown method");
}

} // namespace riskit::sparse
