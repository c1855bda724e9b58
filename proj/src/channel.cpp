// SPDX-License-Identifier: Apache-2.0
#include "riskit/channel.hpp"

#include <cmath>
#include <string>

#include "riskit/errors.hpp"
#include "riskit/rng.hpp"

namespace riskit::channel {

namespace {

double per_user(const std::vector<double>& v, int k, double fallback)
{
    if (v.empty())
        return fallback;
    if (v.size() == 1)
        return v[0];
    return v.at(static_cast<std::size_t>(k));
}

void check_count(const std::vector<double>& v, int k, const char* name)
{
    if (!v.empty() && v.size() != 1 && static_cast<int>(v.size()) != k)
        throw DimensionError(std::string(name) + ": expected 1 or K entries");
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw DomainError(std::string(name) + ": must be finite and >= 0");
}

void check_cov(const CMat& r, int n, const char* name)
{
    if (r.size() == 0)
        return;
    if (r.rows() != n || r.cols() != n)
        throw DimensionError(std::string(name) + ": wrong size");
    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw DomainError(std::string(name) + ": not Hermitian");
    for (int i = 0; i < n; ++i)
        if (std::abs(r(i, i) - 1.0) > 1e-9)
            throw DomainError(std::string(name) + ": diagonal must be 1");
}

// Coloured draw L w with L L^H = R; identity when R is empty.
CVec colored(const CMat& factor, Rng& rng, Eigen::Index n)
{
    CVec w = rng.cnormal_vec(n);
    if (factor.size() == 0)
        return w;
    return factor * w;
}

void check_freq(double w, const char* what)
{
    if (!(w >= -2.0 * kPi && w < 2.0 * kPi))
        throw DomainError(std::string(what) + ": spatial frequency outside [-2pi, 2pi)");
}

} // namespace

void SystemDims::validate() const
{
    if (n_bs < 1 || m_ris < 1 || k_users < 1)
        throw DimensionError("SystemDims: counts must be >= 1");
    if ((m_x != 0 || m_z != 0) && (m_x < 1 || m_z < 1 || m_x * m_z != m_ris))
        throw DimensionError("SystemDims: m_x * m_z must equal m_ris");
}

void RicianConfig::validate(const SystemDims& dims) const
{
    const int n = dims.n_bs, m = dims.m_ris, k = dims.k_users;
    if (!(beta >= 0.0) || !(delta >= 0.0))
        throw DomainError("RicianConfig: beta and delta must be >= 0");
    check_count(alpha, k, "alpha");
    check_count(gamma, k, "gamma");
    check_count(eps, k, "eps");
    check_count(varpi, k, "varpi");
    if (h_los.size() != 0 && (h_los.rows() != n || h_los.cols() != m))
        throw DimensionError("RicianConfig: h_los must be N x M");
    auto vec_list = [](const std::vector<CVec>& v, int kk, int len, const char* name) {
        if (v.empty())
            return;
        if (static_cast<int>(v.size()) != kk)
            throw DimensionError(std::string(name) + ": one vector per user");
        for (const auto& x : v)
            if (x.size() != len)
                throw DimensionError(std::string(name) + ": wrong length");
    };
    vec_list(hr_los, k, m, "hr_los");
    vec_list(hd_los, k, n, "hd_los");
    check_cov(r_hr, m, "r_hr");
    check_cov(r_hb, n, "r_hb");
    auto cov_list = [](const std::vector<CMat>& v, int kk, int len, const char* name) {
        if (v.empty())
            return;
        if (v.size() != 1 && static_cast<int>(v.size()) != kk)
            throw DimensionError(std::string(name) + ": expected 1 or K matrices");
        for (const auto& r : v)
            check_cov(r, len, name);
    };
    cov_list(r_hrr, k, m, "r_hrr");
    cov_list(r_hdb, k, n, "r_hdb");
}

CMat ChannelSet::cascaded(int k) const
{
    return cascaded_channel(h, hr.at(static_cast<std::size_t>(k)));
}

CMat exp_correlation_matrix(int n, double rho)
{
    if (n < 1)
        throw DimensionError("exp_correlation_matrix: n must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0))
        throw DomainError("exp_correlation_matrix: rho must lie in [0, 1)");
    CMat r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            r(i, j) = std::pow(rho, std::abs(i - j));
    return r;
}

CMat coloring_factor(const CMat& r)
{
    if (r.rows() != r.cols())
        throw DimensionError("coloring_factor: matrix must be square");
    Eigen::LLT<CMat> llt(r);
    if (llt.info() == Eigen::Success)
        return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<CMat> es(r);
    if (es.info() != Eigen::Success)
        throw SingularError("coloring_factor: eigen-decomposition failed");
    RVec ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-10 * scale)
            throw DomainError("coloring_factor: covariance is not positive semidefinite");
        ev(i) = std::max(ev(i), 0.0);
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

ChannelSet gen_unstructured(const SystemDims& dims, const RicianConfig& cfg, std::uint64_t seed)
{
    dims.validate();
    cfg.validate(dims);
    const int n = dims.n_bs, m = dims.m_ris, k = dims.k_users;
    Rng rng(seed);

    auto los_w = [&](double factor) { return cfg.los_only ? 1.0 : std::sqrt(factor / (1.0 + factor)); };
    auto nlos_w = [&](double factor) { return cfg.los_only ? 0.0 : std::sqrt(1.0 / (1.0 + factor)); };

    ChannelSet out;
    out.h = CMat::Zero(n, m);
    if (cfg.h_los.size() != 0)
        out.h += los_w(cfg.delta) * cfg.h_los;
    if (!cfg.los_only) {
        CMat w = rng.cnormal_mat(n, m);
        if (cfg.r_hb.size() != 0)
            w = coloring_factor(cfg.r_hb) * w;
        if (cfg.r_hr.size() != 0)
            w = w * coloring_factor(cfg.r_hr).transpose();
        out.h += nlos_w(cfg.delta) * w;
    }
    out.h *= std::sqrt(cfg.beta);

    auto factor_for = [](const std::vector<CMat>& v, int kk) -> CMat {
        if (v.empty())
            return {};
        return coloring_factor(v.size() == 1 ? v[0] : v[static_cast<std::size_t>(kk)]);
    };

    out.hr.resize(k);
    out.hd.resize(k);
    for (int u = 0; u < k; ++u) {
        const double e = per_user(cfg.eps, u, 0.0);
        const double v = per_user(cfg.varpi, u, 0.0);
        CVec hr = CVec::Zero(m);
        CVec hd = CVec::Zero(n);
        if (!cfg.hr_los.empty())
            hr += los_w(e) * cfg.hr_los[u];
        if (!cfg.hd_los.empty())
            hd += los_w(v) * cfg.hd_los[u];
        if (!cfg.los_only) {
            hr += nlos_w(e) * colored(factor_for(cfg.r_hrr, u), rng, m);
            hd += nlos_w(v) * colored(factor_for(cfg.r_hdb, u), rng, n);
        }
        out.hr[u] = std::sqrt(per_user(cfg.alpha, u, 1.0)) * hr;
        out.hd[u] = std::sqrt(per_user(cfg.gamma, u, 1.0)) * hd;
    }
    return out;
}

ChannelSet mean_channels(const SystemDims& dims, const RicianConfig& cfg)
{
    dims.validate();
    cfg.validate(dims);
    auto los_w = [&](double factor) { return cfg.los_only ? 1.0 : std::sqrt(factor / (1.0 + factor)); };
    ChannelSet out;
    out.h = CMat::Zero(dims.n_bs, dims.m_ris);
    if (cfg.h_los.size() != 0)
        out.h = std::sqrt(cfg.beta) * los_w(cfg.delta) * cfg.h_los;
    out.hr.assign(dims.k_users, CVec::Zero(dims.m_ris));
    out.hd.assign(dims.k_users, CVec::Zero(dims.n_bs));
    for (int u = 0; u < dims.k_users; ++u) {
        if (!cfg.hr_los.empty())
            out.hr[u] = std::sqrt(per_user(cfg.alpha, u, 1.0)) * los_w(per_user(cfg.eps, u, 0.0)) * cfg.hr_los[u];
        if (!cfg.hd_los.empty())
            out.hd[u] = std::sqrt(per_user(cfg.gamma, u, 1.0)) * los_w(per_user(cfg.varpi, u, 0.0)) * cfg.hd_los[u];
    }
    return out;
}

CVec ula_steering(double omega, int n)
{
    if (n < 1)
        throw DimensionError("ula_steering: n must be >= 1");
    CVec a(n);
    for (int i = 0; i < n; ++i)
        a(i) = std::polar(1.0, omega * i);
    return a;
}

CVec upa_steering(double omega_x, double omega_z, int m_x, int m_z)
{
    const CVec ax = ula_steering(omega_x, m_x);
    const CVec az = ula_steering(omega_z, m_z);
    CVec a(m_x * m_z);
    for (int ix = 0; ix < m_x; ++ix)
        for (int iz = 0; iz < m_z; ++iz)
            a(ix * m_z + iz) = ax(ix) * az(iz);
    return a;
}

ChannelSet sv_channels(const SystemDims& dims, const SvParams& p)
{
    dims.validate();
    const int l_br = p.l_br();
    if (static_cast<int>(p.omega_bh.size()) != l_br || static_cast<int>(p.omega_rh.size()) != l_br)
        throw DimensionError("sv_channels: BS-side path counts disagree");
    if (static_cast<int>(p.users.size()) != dims.k_users)
        throw DimensionError("sv_channels: one SvUser per user required");
    const int mx = dims.rows_x(), mz = dims.rows_z();

    ChannelSet out;
    out.h = CMat::Zero(dims.n_bs, dims.m_ris);
    for (int l = 0; l < l_br; ++l) {
        check_freq(p.omega_bh[l], "omega_bh");
        check_freq(p.omega_rh[l].x, "omega_rh");
        check_freq(p.omega_rh[l].z, "omega_rh");
        out.h += p.alpha(l) * ula_steering(p.omega_bh[l], dims.n_bs) *
                 upa_steering(p.omega_rh[l].x, p.omega_rh[l].z, mx, mz).adjoint();
    }
    for (const auto& u : p.users) {
        if (u.beta.size() != static_cast<Eigen::Index>(u.omega_rhr.size()))
            throw DimensionError("sv_channels: user gain/frequency counts disagree");
        CVec hr = CVec::Zero(dims.m_ris);
        for (Eigen::Index l = 0; l < u.beta.size(); ++l) {
            check_freq(u.omega_rhr[l].x, "omega_rhr");
            check_freq(u.omega_rhr[l].z, "omega_rhr");
            hr += u.beta(l) * upa_steering(u.omega_rhr[l].x, u.omega_rhr[l].z, mx, mz);
        }
        out.hr.push_back(hr);
        out.hd.push_back(CVec::Zero(dims.n_bs));
    }
    return out;
}

CMat cascaded_channel(const CMat& h, const CVec& hr)
{
    if (h.cols() != hr.size())
        throw DimensionError("cascaded_channel: H columns must match h_r length");
    return h * hr.asDiagonal();
}

void NearFieldScene::validate() const
{
    if (!(wavelength > 0.0))
        throw DomainError("NearFieldScene: wavelength must be > 0");
    if (!(element_spacing() > 0.0))
        throw DomainError("NearFieldScene: spacing must be > 0");
    if (m_x < 1 || m_z < 1)
        throw DimensionError("NearFieldScene: RIS size must be >= 1");
    if (!ris_origin.allFinite() || !mu_position.allFinite())
        throw DomainError("NearFieldScene: positions must be finite");
    if (scatterer_gains.size() != scatterer_positions.size())
        throw DimensionError("NearFieldScene: one gain per scatterer");
}

std::vector<Vec3> NearFieldScene::ris_elements() const
{
    const double d = element_spacing();
    std::vector<Vec3> pos;
    pos.reserve(static_cast<std::size_t>(m_x * m_z));
    for (int ix = 0; ix < m_x; ++ix)
        for (int iz = 0; iz < m_z; ++iz)
            pos.push_back(ris_origin + Vec3((ix - 0.5 * (m_x - 1)) * d, 0.0, (iz - 0.5 * (m_z - 1)) * d));
    return pos;
}

CVec nearfield_steering(const NearFieldScene& scene, const Vec3& source)
{
    scene.validate();
    const auto el = scene.ris_elements();
    const double k = 2.0 * kPi / scene.wavelength;
    CVec a(static_cast<Eigen::Index>(el.size()));
    for (std::size_t i = 0; i < el.size(); ++i)
        a(static_cast<Eigen::Index>(i)) = std::polar(1.0, -k * (source - el[i]).norm());
    return a;
}

CMat nearfield_bs_ris(const NearFieldScene& scene)
{
    scene.validate();
    const auto el = scene.ris_elements();
    const double k = 2.0 * kPi / scene.wavelength;
    CMat h(static_cast<Eigen::Index>(scene.bs_positions.size()), static_cast<Eigen::Index>(el.size()));
    for (std::size_t n = 0; n < scene.bs_positions.size(); ++n)
        for (std::size_t m = 0; m < el.size(); ++m)
            h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) =
                scene.bs_ris_gain * std::polar(1.0, k * (scene.bs_positions[n] - el[m]).norm());
    return h;
}

std::vector<Vec3> ula_positions(const Vec3& center, int n, double spacing, const Vec3& axis)
{
    if (n < 1 || !(spacing > 0.0))
        throw DomainError("ula_positions: need n >= 1 and spacing > 0");
    const Vec3 u = axis.normalized();
    std::vector<Vec3> out;
    for (int i = 0; i < n; ++i)
        out.push_back(center + (i - 0.5 * (n - 1)) * spacing * u);
    return out;
}

CVec nearfield_received(const NearFieldScene& scene, const CVec& theta)
{
    CVec hr = scene.mu_gain * nearfield_steering(scene, scene.mu_position);
    for (std::size_t l = 0; l < scene.scatterer_positions.size(); ++l)
        hr += scene.scatterer_gains[l] * nearfield_steering(scene, scene.scatterer_positions[l]);
    if (theta.size() != hr.size())
        throw DimensionError("nearfield_received: theta length must equal RIS size");
    return nearfield_bs_ris(scene) * theta.cwiseProduct(hr);
}

double fraunhofer_distance(double aperture, double wavelength)
{
    if (!(aperture > 0.0) || !(wavelength > 0.0))
        throw DomainError("fraunhofer_distance: inputs must be > 0");
    return 2.0 * aperture * aperture / wavelength;
}

double pathloss_db(LinkKind kind, const std::vector<double>& distances, double fc_hz, double exponent,
                   double shadow_db)
{
    if (!(fc_hz > 0.0))
        throw DomainError("pathloss_db: carrier frequency must be > 0");
    const std::size_t want = kind == LinkKind::direct ? 1 : 2;
    if (distances.size() != want)
        throw DimensionError("pathloss_db: direct takes 1 distance, reflected takes 2");
    double prod = 1.0;
    for (double d : distances) {
        if (!(d > 0.0))
            throw DomainError("pathloss_db: distances must be > 0");
        prod *= d;
    }
    const double base = 10.0 * std::log10(64.0 * kPi * kPi * kPi);
    const double freq = (kind == LinkKind::direct ? 20.0 : 40.0) * std::log10(fc_hz);
    return base + 10.0 * exponent * std::log10(prod) + freq + shadow_db;
}

} // namespace riskit::channel
