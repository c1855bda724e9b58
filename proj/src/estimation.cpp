// SPDX-License-Identifier: Apache-2.0
#include "riskit/estimation.hpp"

#include <cmath>
#include <string>

#include "riskit/errors.hpp"

namespace riskit::estimation {

namespace {

// Square n-point DFT matrix.
CMat dft_square(int n)
{
    CMat f(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            f(r, c) = std::polar(1.0, -2.0 * kPi * static_cast<double>((static_cast<long>(r) * c) % n) / n);
    return f;
}

CVec pilots_or_ones(const CVec& x, int t)
{
    if (x.size() == 0)
        return CVec::Ones(t);
    if (x.size() != t)
        throw DimensionError("pilot vector length must equal the number of slots");
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (std::abs(std::abs(x(i)) - 1.0) > 1e-12)
            throw DomainError("pilot symbols must have unit modulus");
    return x;
}

// A = diag(x) Phi, so that Y = sqrt(P) C A^T.
CMat pilot_weighted(const TrainingMatrix& phi, const CVec& x)
{
    return x.asDiagonal() * phi.phi;
}

CMat kron_identity(const CMat& a, int n)
{
    CMat out = CMat::Zero(a.rows() * n, a.cols() * n);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            for (int d = 0; d < n; ++d)
                out(i * n + d, j * n + d) = a(i, j);
    return out;
}

CMat full_rank_inverse(const CMat& gram, const char* who)
{
    Eigen::FullPivLU<CMat> lu(gram);
    lu.setThreshold(1e-10);
    if (lu.rank() < gram.rows())
        throw SingularError(std::string(who) + ": training matrix is rank deficient");
    return lu.inverse();
}

} // namespace

CMat ChannelEstimate::cascaded(int n_bs) const
{
    const Eigen::Index m = c_hat.size() / n_bs - 1;
    return Eigen::Map<const CMat>(c_hat.data() + n_bs, n_bs, m);
}

int hadamard_length(int m)
{
    if (m < 1)
        throw DimensionError("hadamard_length: m must be >= 1");
    int t = 1;
    while (t < m + 1)
        t *= 2;
    return t;
}

TrainingMatrix build_training(TrainingKind kind, int m, int t)
{
    if (m < 1)
        throw DimensionError("build_training: m must be >= 1");
    TrainingMatrix out;
    out.kind = kind;
    switch (kind) {
    case TrainingKind::onoff: {
        if (t <= 0)
            t = m + 1;
        if (t != m + 1)
            throw DimensionError("build_training: on-off training needs T = M + 1");
        out.phi = CMat::Zero(t, m + 1);
        out.phi.col(0).setOnes();
        out.phi.bottomRightCorner(m, m).setIdentity();
        break;
    }
    case TrainingKind::dft: {
        if (t <= 0)
            t = m + 1;
        if (t < m + 1)
            throw DimensionError("build_training: DFT training needs T >= M + 1");
        out.phi.resize(t, m + 1);
        for (int r = 0; r < t; ++r)
            for (int c = 0; c <= m; ++c) {
                // reduce the exponent first so the phase stays exact for large T
                const long e = (static_cast<long>(r) * c) % t;
                out.phi(r, c) = std::polar(1.0, -2.0 * kPi * static_cast<double>(e) / t);
            }
        break;
    }
    case TrainingKind::hadamard: {
        if (t <= 0)
            t = hadamard_length(m);
        if (t < m + 1 || (t & (t - 1)) != 0)
            throw DimensionError("build_training: Hadamard training needs T = 2^n >= M + 1");
        RMat d = RMat::Ones(1, 1);
        while (d.rows() < t) {
            const Eigen::Index s = d.rows();
            RMat next(2 * s, 2 * s);
            next << d, d, d, -d;
            d = next;
        }
        out.phi = d.leftCols(m + 1).cast<cd>();
        break;
    }
    }
    return out;
}

CVec stack_channel(const CVec& hd, const CMat& g)
{
    if (g.rows() != hd.size())
        throw DimensionError("stack_channel: h_d and G row counts differ");
    CVec c(hd.size() * (g.cols() + 1));
    c.head(hd.size()) = hd;
    c.tail(g.size()) = Eigen::Map<const CVec>(g.data(), g.size());
    return c;
}

CVec forward_model(const CVec& c, const TrainingMatrix& phi, double p, const CVec& x)
{
    const int t = phi.slots();
    const int cols = static_cast<int>(phi.phi.cols());
    if (c.size() % cols != 0)
        throw DimensionError("forward_model: channel length is not a multiple of M + 1");
    const Eigen::Index n = c.size() / cols;
    const CVec xs = pilots_or_ones(x, t);
    const Eigen::Map<const CMat> cm(c.data(), n, cols);
    CMat y = std::sqrt(p) * cm * pilot_weighted(phi, xs).transpose();
    return Eigen::Map<const CVec>(y.data(), y.size());
}

StackedObservation observe(const CVec& c, const TrainingMatrix& phi, double p, double sigma2, Rng& rng,
                           const CVec& x)
{
    StackedObservation obs;
    obs.x = pilots_or_ones(x, phi.slots());
    obs.p = p;
    obs.sigma2 = sigma2;
    obs.y = forward_model(c, phi, p, obs.x);
    if (sigma2 > 0.0)
        obs.y += std::sqrt(sigma2) * rng.cnormal_vec(obs.y.size());
    return obs;
}

ChannelEstimate ls_estimate(const StackedObservation& obs, const TrainingMatrix& phi, bool with_cov)
{
    const int t = phi.slots();
    if (obs.x.size() != t || t == 0 || obs.y.size() % t != 0)
        throw DimensionError("ls_estimate: observation does not match the training length");
    if (!(obs.p > 0.0))
        throw DomainError("ls_estimate: power must be > 0");
    const int n = obs.n_bs();
    const CMat a = pilot_weighted(phi, pilots_or_ones(obs.x, t));
    const CMat inv = full_rank_inverse(a.adjoint() * a, "ls_estimate");
    const Eigen::Map<const CMat> y(obs.y.data(), n, t);
    // C = (1/sqrt P) Y conj(A) conj((A^H A)^{-1})
    const CMat c = (y * a.conjugate()) * inv.conjugate() / std::sqrt(obs.p);
    ChannelEstimate est;
    est.c_hat = Eigen::Map<const CVec>(c.data(), c.size());
    if (with_cov)
        est.err_cov = kron_identity(inv * (obs.sigma2 / obs.p), n);
    return est;
}

CMat ls_error_cov(const TrainingMatrix& phi, double p, double sigma2, int n_bs)
{
    if (!(p > 0.0) || sigma2 < 0.0)
        throw DomainError("ls_error_cov: need P > 0 and sigma2 >= 0");
    const CMat inv = full_rank_inverse(phi.phi.adjoint() * phi.phi, "ls_error_cov");
    return kron_identity(inv * (sigma2 / p), n_bs);
}

CMat build_ccc(const CMat& r_hdb, const CMat& r_hrr, const CMat& r_hr, const CMat& r_hb)
{
    const Eigen::Index n = r_hb.rows(), m = r_hr.rows();
    if (r_hdb.rows() != n || r_hdb.cols() != n || r_hb.cols() != n || r_hr.cols() != m ||
        r_hrr.rows() != m || r_hrr.cols() != m)
        throw DimensionError("build_ccc: correlation sizes disagree");
    const CMat ris = r_hrr.cwiseProduct(r_hr);
    CMat c = CMat::Zero(n * (m + 1), n * (m + 1));
    c.topLeftCorner(n, n) = r_hdb;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            c.block(n + i * n, n + j * n, n, n) = ris(i, j) * r_hb;
    return c;
}

LmmseFilter::LmmseFilter(const TrainingMatrix& phi, const CMat& ccc, double p, double sigma2)
    : phi_(phi.phi), p_(p)
{
    if (!(p > 0.0) || !(sigma2 > 0.0))
        throw DomainError("lmmse: need P > 0 and sigma2 > 0");
    const Eigen::Index cols = phi.phi.cols();
    if (ccc.rows() != ccc.cols() || ccc.rows() % cols != 0)
        throw DimensionError("lmmse: covariance size must be N (M + 1)");
    n_bs_ = static_cast<int>(ccc.rows() / cols);
    const CMat k = kron_identity(phi.phi.adjoint() * phi.phi, n_bs_);
    const Eigen::Index d = ccc.rows();
    // (P C Z^H Z + sigma2 I) is nonsingular for sigma2 > 0 and PSD C.
    Eigen::PartialPivLU<CMat> lu(p * ccc * k + sigma2 * CMat::Identity(d, d));
    filter_ = std::sqrt(p) * lu.solve(ccc);
    if (!filter_.allFinite())
        throw SingularError("lmmse: inner matrix is singular");
    err_cov_ = sigma2 * lu.solve(ccc);
    err_cov_ = 0.5 * (err_cov_ + err_cov_.adjoint()).eval();
}

CVec LmmseFilter::apply(const StackedObservation& obs) const
{
    const Eigen::Index t = phi_.rows();
    if (obs.x.size() != t || obs.y.size() != n_bs_ * t)
        throw DimensionError("lmmse: observation does not match the filter");
    for (Eigen::Index i = 0; i < t; ++i)
        if (std::abs(std::abs(obs.x(i)) - 1.0) > 1e-12)
            throw DomainError("lmmse: pilot symbols must have unit modulus");
    const CMat a = obs.x.asDiagonal() * phi_;
    const Eigen::Map<const CMat> y(obs.y.data(), n_bs_, t);
    const CMat zy = y * a.conjugate();
    return filter_ * Eigen::Map<const CVec>(zy.data(), zy.size());
}

ChannelEstimate lmmse_estimate(const StackedObservation& obs, const TrainingMatrix& phi, const CMat& ccc)
{
    LmmseFilter f(phi, ccc, obs.p, obs.sigma2);
    ChannelEstimate est;
    est.c_hat = f.apply(obs);
    est.err_cov = f.error_cov();
    return est;
}

CMat element_group(const CMat& g, int j)
{
    if (j < 1 || g.cols() % j != 0)
        throw DimensionError("element_group: J must divide M");
    const Eigen::Index mr = g.cols() / j;
    CMat out = CMat::Zero(g.rows(), mr);
    for (Eigen::Index c = 0; c < mr; ++c)
        out.col(c) = g.middleCols(c * j, j).rowwise().sum();
    return out;
}

CMat eg_recover(const CMat& g_reduced, int j)
{
    if (j < 1)
        throw DimensionError("eg_recover: J must be >= 1");
    CMat out(g_reduced.rows(), g_reduced.cols() * j);
    for (Eigen::Index c = 0; c < g_reduced.cols(); ++c)
        for (int r = 0; r < j; ++r)
            out.col(c * j + r) = g_reduced.col(c) / static_cast<double>(j);
    return out;
}

TrainingMatrix expand_grouped(const TrainingMatrix& reduced, int j)
{
    if (j < 1)
        throw DimensionError("expand_grouped: J must be >= 1");
    const Eigen::Index mr = reduced.phi.cols() - 1;
    TrainingMatrix out;
    out.kind = reduced.kind;
    out.phi.resize(reduced.phi.rows(), mr * j + 1);
    out.phi.col(0) = reduced.phi.col(0);
    for (Eigen::Index c = 0; c < mr; ++c)
        for (int r = 0; r < j; ++r)
            out.phi.col(1 + c * j + r) = reduced.phi.col(1 + c);
    return out;
}

CMat mu_decorrelate(const CMat& y_t, const CMat& pilots)
{
    const Eigen::Index k = pilots.cols();
    if (pilots.rows() != k || y_t.cols() != k)
        throw DimensionError("mu_decorrelate: pilots must be K x K and match Y_t columns");
    const CMat gram = pilots.adjoint() * pilots;
    const CMat want = static_cast<double>(k) * CMat::Identity(k, k);
    if ((gram - want).cwiseAbs().maxCoeff() > 1e-9 * static_cast<double>(k))
        throw DomainError("mu_decorrelate: pilots must satisfy X^H X = K I");
    return y_t * pilots.conjugate();
}

ThreeStageResult three_stage_estimate(const channel::ChannelSet& truth, const ThreeStageConfig& cfg,
                                      std::uint64_t seed)
{
    const int k = truth.users();
    const Eigen::Index n = truth.h.rows(), m = truth.h.cols();
    if (k < 1)
        throw DimensionError("three_stage_estimate: need at least one user");
    if (!cfg.powers.empty() && static_cast<int>(cfg.powers.size()) != k)
        throw DimensionError("three_stage_estimate: one power per user");
    auto power = [&](int u) { return cfg.powers.empty() ? 1.0 : cfg.powers[u]; };
    Rng rng(seed);
    const double sd = std::sqrt(std::max(cfg.sigma2, 0.0));
    auto noise = [&](Eigen::Index r, Eigen::Index c) -> CMat {
        if (sd == 0.0)
            return CMat::Zero(r, c);
        return sd * rng.cnormal_mat(r, c);
    };

    ThreeStageResult res;

    // Stage 1: RIS off, K orthogonal pilots.
    const CMat pil = dft_square(k);
    CMat y1 = noise(n, k);
    for (int u = 0; u < k; ++u)
        y1 += std::sqrt(power(u)) * truth.hd[u] * pil.col(u).transpose();
    const CMat dec = mu_decorrelate(y1, pil);
    for (int u = 0; u < k; ++u)
        res.hd_hat.push_back(dec.col(u) / (static_cast<double>(k) * std::sqrt(power(u))));

    // Stage 2: user 1 alone, M slots of DFT phase patterns.
    const CMat g1 = truth.cascaded(0);
    const CMat xi = dft_square(static_cast<int>(m));
    const double s1 = std::sqrt(power(0));
    CMat y2 = s1 * (truth.hd[0] * RVec::Ones(m).transpose().cast<cd>() + g1 * xi) + noise(n, m);
    y2 -= s1 * res.hd_hat[0] * RVec::Ones(m).transpose().cast<cd>();
    const CMat g1_hat = y2 * xi.adjoint() / (static_cast<double>(m) * s1);
    res.g_hat.push_back(g1_hat);

    // Stage 3: remaining users, windows of at most N active elements.
    const Eigen::Index windows = (m + n - 1) / n;
    for (int u = 1; u < k; ++u) {
        const CMat gu = truth.cascaded(u);
        const double su = std::sqrt(power(u));
        CVec ratio(m);
        for (Eigen::Index w = 0; w < windows; ++w) {
            const Eigen::Index lo = w * n;
            const Eigen::Index len = std::min(n, m - lo);
            const CVec y3 = su * (truth.hd[u] + gu.middleCols(lo, len).rowwise().sum()) + noise(n, 1);
            const CMat block = g1_hat.middleCols(lo, len);
            Eigen::ColPivHouseholderQR<CMat> qr(block);
            qr.setThreshold(1e-10);
            if (qr.rank() < len)
                throw StageError(3, "singular sub-block " + std::to_string(w) + " of the reference cascaded channel");
            ratio.segment(lo, len) = qr.solve(CVec(y3 / su - res.hd_hat[u]));
        }
        res.g_hat.push_back(g1_hat * ratio.asDiagonal());
    }
    res.pilots = static_cast<int>(k + m + (k - 1) * windows);
    return res;
}

int pilot_count(PilotMethod method, int k, int m, int n, int j)
{
    if (k < 1 || m < 1 || n < 1 || j < 1)
        throw DimensionError("pilot_count: dimensions must be >= 1");
    switch (method) {
    case PilotMethod::direct:
        return k * (m + 1);
    case PilotMethod::grouping:
        return j + 1;
    case PilotMethod::three_stage: {
        const int windows = (m + n - 1) / n;
        return k + m + std::max(k - 1, (k - 1) * windows);
    }
    }
    throw DomainError("pilot_count: unknown method");
}

double mse(const CMat& estimate, const CMat& truth)
{
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw DimensionError("mse: shapes differ");
    if (truth.size() == 0)
        return 0.0;
    return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

} // namespace riskit::estimation
