// SPDX-License-Identifier: Apache-2.0
#include "riskit/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskit/rng.hpp"

namespace riskit::localize {

namespace {

Vec3 mu_point(const Vec3& eta) { return Vec3(eta(0), eta(1), 0.0); }

const Vec3& ris_at(const FarFieldScene& s, int k)
{
    if (k < 0 || k >= static_cast<int>(s.ris.size()))
        throw DimensionError("measurement: RIS index out of range");
    return s.ris[static_cast<std::size_t>(k)];
}

// d asin(u) = du / sqrt(1 - u^2)
double dasin(double u) { return 1.0 / std::sqrt(std::max(1e-300, 1.0 - u * u)); }

} // namespace

void FarFieldScene::validate() const
{
    if (ris.size() < 2)
        throw DomainError("FarFieldScene: need at least the BS and two RIS anchors");
    if (mu.z() != 0.0)
        throw DomainError("FarFieldScene: MU height must be 0");
    if (!(c > 0.0))
        throw DomainError("FarFieldScene: propagation speed must be > 0");
    std::vector<Vec3> all = ris;
    all.push_back(bs);
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if ((all[i] - all[j]).norm() == 0.0)
                throw DomainError("FarFieldScene: anchors must be pairwise distinct");
}

bool depends_on_rotation(MeasKind kind) { return kind == MeasKind::aoa_mu_direct || kind == MeasKind::aoa_mu_ris; }

double measurement_model(const FarFieldScene& s, MeasKind kind, int anchor, const Vec3& eta)
{
    const Vec3 p = mu_point(eta);
    const double a = eta(2);
    switch (kind) {
    case MeasKind::toa_direct:
        return (s.bs - p).norm() / s.c;
    case MeasKind::toa_ris:
        return (p - ris_at(s, anchor)).norm() / s.c;
    case MeasKind::tdoa:
        return (p - ris_at(s, anchor)).norm() - (s.bs - p).norm();
    case MeasKind::aod_bs:
        return std::asin((p.x() - s.bs.x()) / (p - s.bs).norm());
    case MeasKind::aoa_ris_az: {
        const Vec3 d = p - ris_at(s, anchor);
        return std::asin(d.y() / std::hypot(d.x(), d.y()));
    }
    case MeasKind::aoa_ris_el: {
        const Vec3& sk = ris_at(s, anchor);
        return std::acos(-sk.z() / (p - sk).norm());
    }
    case MeasKind::aoa_mu_direct:
    case MeasKind::aoa_mu_ris: {
        const Vec3 ref = kind == MeasKind::aoa_mu_direct ? s.bs : ris_at(s, anchor);
        const Vec3 d = p - ref;
        return std::asin((d.x() * std::cos(a) - d.y() * std::sin(a)) / d.norm());
    }
    }
    throw DomainError("measurement_model: unknown kind");
}

Vec3 measurement_jacobian(const FarFieldScene& s, MeasKind kind, int anchor, const Vec3& eta)
{
    const Vec3 p = mu_point(eta);
    const double a = eta(2);
    auto range_grad = [&](const Vec3& ref) {
        const Vec3 d = p - ref;
        const double r = d.norm();
        return Vec3(d.x() / r, d.y() / r, 0.0);
    };
    switch (kind) {
    case MeasKind::toa_direct:
        return range_grad(s.bs) / s.c;
    case MeasKind::toa_ris:
        return range_grad(ris_at(s, anchor)) / s.c;
    case MeasKind::tdoa:
        return range_grad(ris_at(s, anchor)) - range_grad(s.bs);
    case MeasKind::aod_bs: {
        const Vec3 d = p - s.bs;
        const double r = d.norm(), r3 = r * r * r;
        const double u = d.x() / r;
        return dasin(u) * Vec3(1.0 / r - d.x() * d.x() / r3, -d.x() * d.y() / r3, 0.0);
    }
    case MeasKind::aoa_ris_az: {
        const Vec3 d = p - ris_at(s, anchor);
        const double h = std::hypot(d.x(), d.y()), h3 = h * h * h;
        const double u = d.y() / h;
        return dasin(u) * Vec3(-d.x() * d.y() / h3, 1.0 / h - d.y() * d.y() / h3, 0.0);
    }
    case MeasKind::aoa_ris_el: {
        const Vec3& sk = ris_at(s, anchor);
        const Vec3 d = p - sk;
        const double r = d.norm(), r3 = r * r * r;
        const double v = -sk.z() / r;
        // d acos(v) = -dv / sqrt(1 - v^2), dv/dp = s_z d / r^3
        return -dasin(v) * Vec3(sk.z() * d.x() / r3, sk.z() * d.y() / r3, 0.0);
    }
    case MeasKind::aoa_mu_direct:
    case MeasKind::aoa_mu_ris: {
        const Vec3 ref = kind == MeasKind::aoa_mu_direct ? s.bs : ris_at(s, anchor);
        const Vec3 d = p - ref;
        const double r = d.norm(), r3 = r * r * r;
        const double ca = std::cos(a), sa = std::sin(a);
        const double n = d.x() * ca - d.y() * sa;
        const double u = n / r;
        return dasin(u) * Vec3(ca / r - n * d.x() / r3, -sa / r - n * d.y() / r3, (-d.x() * sa - d.y() * ca) / r);
    }
    }
    throw DomainError("measurement_jacobian: unknown kind");
}

MeasurementSet simulate_measurements(const FarFieldScene& scene, const NoiseStd& noise, std::uint64_t seed,
                                     const MeasurementMask& mask)
{
    scene.validate();
    if (noise.toa_s < 0.0 || noise.tdoa_m < 0.0 || noise.angle_rad < 0.0)
        throw DomainError("simulate_measurements: noise std must be >= 0");
    const Vec3 eta(scene.mu.x(), scene.mu.y(), scene.alpha);
    const int k = static_cast<int>(scene.ris.size());
    MeasurementSet out;
    auto add = [&](MeasKind kind, int anchor, double std) {
        out.push_back({kind, anchor, measurement_model(scene, kind, anchor, eta), std * std});
    };
    if (mask.toa) {
        add(MeasKind::toa_direct, 0, noise.toa_s);
        for (int i = 0; i < k; ++i)
            add(MeasKind::toa_ris, i, noise.toa_s);
    }
    if (mask.tdoa)
        for (int i = 0; i < k; ++i)
            add(MeasKind::tdoa, i, noise.tdoa_m);
    if (mask.aod_bs)
        add(MeasKind::aod_bs, 0, noise.angle_rad);
    if (mask.ris_angles)
        for (int i = 0; i < k; ++i) {
            add(MeasKind::aoa_ris_az, i, noise.angle_rad);
            add(MeasKind::aoa_ris_el, i, noise.angle_rad);
        }
    if (mask.mu_angles) {
        add(MeasKind::aoa_mu_direct, 0, noise.angle_rad);
        for (int i = 0; i < k; ++i)
            add(MeasKind::aoa_mu_ris, i, noise.angle_rad);
    }
    Rng rng(seed);
    for (auto& m : out)
        m.value += std::sqrt(m.variance) * rng.normal();
    return out;
}

FimResult measurement_fim(const FarFieldScene& scene, const MeasurementSet& meas)
{
    if (meas.empty())
        throw DimensionError("measurement_fim: no measurements");
    const Vec3 eta(scene.mu.x(), scene.mu.y(), scene.alpha);
    bool rot = false;
    for (const auto& m : meas) {
        if (!(m.variance > 0.0))
            throw DomainError("measurement_fim: variances must be > 0");
        rot = rot || depends_on_rotation(m.kind);
    }
    const Eigen::Index np = rot ? 3 : 2;
    const Eigen::Index nm = static_cast<Eigen::Index>(meas.size());
    FimResult r;
    r.j_eta = RMat::Zero(nm, nm);
    r.t.resize(np, nm);
    for (Eigen::Index i = 0; i < nm; ++i) {
        const auto& m = meas[static_cast<std::size_t>(i)];
        r.j_eta(i, i) = 1.0 / m.variance;
        r.t.col(i) = measurement_jacobian(scene, m.kind, m.anchor, eta).head(np);
    }
    r.j = r.t * r.j_eta * r.t.transpose();
    Eigen::FullPivLU<RMat> lu(r.j);
    lu.setThreshold(1e-12);
    if (lu.rank() < np) {
        r.singular = true;
        r.peb = r.reb = std::numeric_limits<double>::infinity();
        return r;
    }
    const RMat inv = lu.inverse();
    r.peb = std::sqrt(inv(0, 0) + inv(1, 1));
    r.reb = rot ? std::sqrt(inv(2, 2)) : std::numeric_limits<double>::infinity();
    return r;
}

std::vector<double> tdoa_values(const MeasurementSet& meas)
{
    std::vector<double> out;
    for (const auto& m : meas)
        if (m.kind == MeasKind::tdoa)
            out.push_back(m.value);
    return out;
}

Eigen::Vector2d chan_solve(const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref,
                           const ChanOptions& opt)
{
    const std::size_t k = anchors.size();
    if (k < 3 || tdoa.size() != k)
        throw DimensionError("chan_solve: need >= 3 anchors and one difference per anchor");
    if (!opt.variances.empty() && opt.variances.size() != k)
        throw DimensionError("chan_solve: one variance per difference");
    const Eigen::Index n = static_cast<Eigen::Index>(k);
    // 2 (s_k - q)_xy . p + 2 d_k r0 = |s_k|^2 - |q|^2 - d_k^2
    RMat ga(n, 3);
    RVec h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& s = anchors[static_cast<std::size_t>(i)];
        const double d = tdoa[static_cast<std::size_t>(i)];
        ga(i, 0) = 2.0 * (s.x() - ref.x());
        ga(i, 1) = 2.0 * (s.y() - ref.y());
        ga(i, 2) = 2.0 * d;
        h(i) = s.squaredNorm() - ref.squaredNorm() - d * d;
    }
    // collinear horizontal geometry leaves the position columns rank deficient
    Eigen::ColPivHouseholderQR<RMat> qr_xy(ga.leftCols(2));
    qr_xy.setThreshold(1e-9);
    if (qr_xy.rank() < 2)
        throw SolverError("chan_solve: anchors are collinear in the horizontal plane");
    Eigen::ColPivHouseholderQR<RMat> qr(ga);
    qr.setThreshold(1e-12);
    if (qr.rank() < 3)
        throw SolverError("chan_solve: degenerate anchor geometry");

    RVec q = RVec::Ones(n);
    if (!opt.variances.empty())
        for (Eigen::Index i = 0; i < n; ++i)
            q(i) = opt.variances[static_cast<std::size_t>(i)];

    auto wls = [](const RMat& g, const RVec& rhs, const RMat& psi) {
        const RMat w = psi.inverse();
        const RMat a = g.transpose() * w * g;
        return std::pair<RVec, RMat>(a.ldlt().solve(g.transpose() * w * rhs), a.inverse());
    };
    RVec za = qr.solve(h);
    RMat cov = (ga.transpose() * ga).inverse();
    if (n > 3) {
        for (int pass = 0; pass < 2; ++pass) {
            RMat psi = RMat::Zero(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double rk = std::max(1e-9, std::abs(za(2) + tdoa[static_cast<std::size_t>(i)]));
                psi(i, i) = 4.0 * rk * rk * q(i);
            }
            std::tie(za, cov) = wls(ga, h, psi);
        }
    } else {
        RMat psi = RMat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double rk = std::max(1e-9, std::abs(za(2) + tdoa[static_cast<std::size_t>(i)]));
            psi(i, i) = 4.0 * rk * rk * q(i);
        }
        const RMat gi = ga.inverse();
        cov = gi * psi * gi.transpose();
    }
    Eigen::Vector2d p(za(0), za(1));
    const bool run2 = opt.stage2 != ChanStage2::never;
    if (!run2)
        return p;

    // r0^2 = (x - q_x)^2 + (y - q_y)^2 + q_z^2
    const double dx = za(0) - ref.x(), dy = za(1) - ref.y(), r0 = za(2);
    RMat g2(3, 2);
    g2 << 1, 0, 0, 1, 1, 1;
    RVec h2(3);
    h2 << dx * dx, dy * dy, r0 * r0 - ref.z() * ref.z();
    RMat b2 = RMat::Zero(3, 3);
    b2(0, 0) = dx;
    b2(1, 1) = dy;
    b2(2, 2) = r0;
    RMat psi2 = 4.0 * b2 * cov * b2;
    psi2 += 1e-12 * psi2.trace() * RMat::Identity(3, 3);
    const RVec z2 = wls(g2, h2, psi2).first;
    if (z2(0) < 0.0 || z2(1) < 0.0)
        return p;  // constrained stage infeasible under this noise draw
    p(0) = ref.x() + (dx < 0.0 ? -1.0 : 1.0) * std::sqrt(z2(0));
    p(1) = ref.y() + (dy < 0.0 ? -1.0 : 1.0) * std::sqrt(z2(1));
    return p;
}

TaylorResult taylor_solve(const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref,
                          const Eigen::Vector2d& init, const TaylorOptions& opt)
{
    const std::size_t k = anchors.size();
    if (k < 2 || tdoa.size() != k)
        throw DimensionError("taylor_solve: one difference per anchor, at least two");
    if (!opt.variances.empty() && opt.variances.size() != k)
        throw DimensionError("taylor_solve: one variance per difference");
    const Eigen::Index n = static_cast<Eigen::Index>(k);
    TaylorResult r;
    Eigen::Vector2d p = init;
    int growing = 0;
    for (int it = 0; it < opt.max_iters; ++it) {
        RMat jac(n, 2);
        RVec res(n);
        const Vec3 p3(p(0), p(1), 0.0);
        const Vec3 dq = p3 - ref;
        const double rq = dq.norm();
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vec3 ds = p3 - anchors[static_cast<std::size_t>(i)];
            const double rs = ds.norm();
            const double w = opt.variances.empty() ? 1.0 : 1.0 / std::sqrt(opt.variances[static_cast<std::size_t>(i)]);
            res(i) = w * (tdoa[static_cast<std::size_t>(i)] - (rs - rq));
            jac(i, 0) = w * (ds.x() / rs - dq.x() / rq);
            jac(i, 1) = w * (ds.y() / rs - dq.y() / rq);
        }
        Eigen::ColPivHouseholderQR<RMat> qr(jac);
        if (qr.rank() < 2)
            throw SolverError("taylor_solve: singular linearization");
        const Eigen::Vector2d step = qr.solve(res);
        if (!step.allFinite())
            throw SolverError("taylor_solve: non-finite update");
        p += step;
        const double sn = step.norm();
        if (!r.update_norms.empty() && sn > r.update_norms.back())
            ++growing;
        else
            growing = 0;
        r.update_norms.push_back(sn);
        r.iterations = it + 1;
        if (growing >= 5) {
            std::string trace;
            for (double v : r.update_norms)
                trace += " " + std::to_string(v);
            throw SolverError("taylor_solve: diverging, update norms" + trace);
        }
        if (sn < opt.tol * std::max(1.0, p.norm())) {
            r.converged = true;
            break;
        }
    }
    r.position = p;
    return r;
}

// --------------------------------------------------------------- near field

Vec3 PolarGrid::point(int i) const
{
    const int nd = static_cast<int>(distance.size());
    return at(azimuth.at(static_cast<std::size_t>(i / nd)), distance.at(static_cast<std::size_t>(i % nd)));
}

Vec3 PolarGrid::at(double az, double dist) const
{
    return Vec3(origin.x() + dist * std::cos(az), origin.y() + dist * std::sin(az), plane_z);
}

PolarGrid make_polar_grid(const Vec3& origin, double plane_z, int n_az, double az_min, double az_max, int n_dist,
                          double d_min, double d_max)
{
    if (n_az < 1 || n_dist < 1)
        throw DimensionError("make_polar_grid: counts must be >= 1");
    if (!(d_min > 0.0) || d_max < d_min || az_max < az_min)
        throw DomainError("make_polar_grid: need 0 < d_min <= d_max and az_min <= az_max");
    PolarGrid g;
    g.origin = origin;
    g.plane_z = plane_z;
    for (int i = 0; i < n_az; ++i)
        g.azimuth.push_back(n_az == 1 ? az_min : az_min + (az_max - az_min) * i / (n_az - 1));
    for (int i = 0; i < n_dist; ++i)
        g.distance.push_back(n_dist == 1 ? d_min : d_min * std::pow(d_max / d_min, static_cast<double>(i) / (n_dist - 1)));
    return g;
}

NfModel::NfModel(channel::NearFieldScene s, const CVec& theta_hat)
    : NfModel(std::move(s), std::vector<CVec>{theta_hat})
{
}

NfModel::NfModel(channel::NearFieldScene s, const std::vector<CVec>& snapshots) : scene(std::move(s))
{
    scene.validate();
    if (snapshots.empty())
        throw DimensionError("NfModel: need at least one RIS configuration");
    const CMat h = channel::nearfield_bs_ris(scene);
    b.resize(h.rows() * static_cast<Eigen::Index>(snapshots.size()), h.cols());
    for (std::size_t t = 0; t < snapshots.size(); ++t) {
        if (snapshots[t].size() != scene.elements())
            throw DimensionError("NfModel: theta length must equal the element count");
        b.middleRows(h.rows() * static_cast<Eigen::Index>(t), h.rows()) = h * snapshots[t].asDiagonal();
    }
    Eigen::BDCSVD<CMat> svd(b, Eigen::ComputeThinU);
    const RVec sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > 1e-10 * sv(0))
        ++r;
    if (r == 0)
        throw NumericError("NfModel: BS-RIS channel is zero");
    basis = svd.matrixU().leftCols(r);
    b_reduced = basis.adjoint() * b;
}

CVec NfModel::reduced_response(const Vec3& p) const { return b_reduced * channel::nearfield_steering(scene, p); }

int NfModel::snapshots() const
{
    return static_cast<int>(b.rows() / static_cast<Eigen::Index>(scene.bs_positions.size()));
}

CVec NfModel::response(const Vec3& p) const { return b * channel::nearfield_steering(scene, p); }

CVec nf_focus_phases(const channel::NearFieldScene& scene, const Vec3& focus)
{
    const CMat h = channel::nearfield_bs_ris(scene);
    const CVec a = channel::nearfield_steering(scene, focus);
    const CMat hd = h * a.asDiagonal();
    // principal right singular vector of H diag(a)
    Eigen::JacobiSVD<CMat> svd(hd, Eigen::ComputeThinV);
    CVec v = svd.matrixV().col(0);
    CVec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out(i) = std::abs(v(i)) > 0.0 ? v(i) / std::abs(v(i)) : cd(1.0, 0.0);
    return out;
}

CMat nf_responses(const NfModel& model, const PolarGrid& grid)
{
    CMat a(model.scene.elements(), grid.size());
    for (int i = 0; i < grid.size(); ++i)
        a.col(i) = channel::nearfield_steering(model.scene, grid.point(i));
    return model.b_reduced * a;
}

namespace {

NfPath search(const CVec& y, const CMat& resp, const PolarGrid& grid)
{
    int best = -1;
    double best_score = -1.0;
    cd best_gain{0.0, 0.0};
    bool any = false;
    for (Eigen::Index i = 0; i < resp.cols(); ++i) {
        const double nn = resp.col(i).squaredNorm();
        if (nn == 0.0)
            continue;
        any = true;
        const cd c = resp.col(i).dot(y);
        // ||y - beta r||^2 = ||y||^2 - |r^H y|^2 / ||r||^2 at the projected gain
        const double score = std::norm(c) / nn;
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(i);
            best_gain = c / nn;
        }
    }
    if (!any)
        throw NumericError("nf_coarse_localize: every effective response is zero");
    NfPath p;
    p.grid_index = best;
    p.position = grid.point(best);
    p.gain = best_gain;
    const int nd = static_cast<int>(grid.distance.size());
    p.azimuth = grid.azimuth[static_cast<std::size_t>(best / nd)];
    p.distance = grid.distance[static_cast<std::size_t>(best % nd)];
    return p;
}

} // namespace

NfPath nf_coarse_localize(const CVec& y, const NfModel& model, const PolarGrid& grid, const CMat* responses)
{
    if (grid.size() == 0)
        throw DimensionError("nf_coarse_localize: empty grid");
    if (y.size() != model.b.rows())
        throw DimensionError("nf_coarse_localize: y length must match the model");
    const CVec yr = model.basis.adjoint() * y;
    if (responses)
        return search(yr, *responses, grid);
    return search(yr, nf_responses(model, grid), grid);
}

NfCoarseResult nf_cancel_and_localize(const CVec& y, const NfModel& model, const PolarGrid& grid, int l_ru,
                                      const CMat* responses)
{
    if (l_ru < 0)
        throw DomainError("nf_cancel_and_localize: L_RU must be >= 0");
    if (y.size() != model.b.rows())
        throw DimensionError("nf_cancel_and_localize: y length must match the model");
    CMat local;
    if (!responses) {
        local = nf_responses(model, grid);
        responses = &local;
    }
    NfCoarseResult r;
    r.residual = y;
    r.residual_norms.push_back(y.norm());
    CVec yr = model.basis.adjoint() * y;
    for (int l = 0; l <= l_ru; ++l) {
        NfPath p = search(yr, *responses, grid);
        yr -= p.gain * responses->col(p.grid_index);
        r.residual -= p.gain * model.response(p.position);
        r.residual_norms.push_back(r.residual.norm());
        r.paths.push_back(p);
    }
    return r;
}

namespace {

double joint_residual(const CVec& y, const CMat& cols, CVec* gains)
{
    Eigen::ColPivHouseholderQR<CMat> qr(cols);
    const CVec g = qr.solve(y);
    if (gains)
        *gains = g;
    return (y - cols * g).norm();
}

} // namespace

NfRefineResult nf_refine(const CVec& y, const NfModel& model, const PolarGrid& grid, std::vector<NfPath> paths,
                         int factor, int rounds)
{
    if (factor < 1 || rounds < 0)
        throw DomainError("nf_refine: factor >= 1 and rounds >= 0 required");
    NfRefineResult r;
    if (paths.empty()) {
        r.residual_norms.push_back(y.norm());
        r.paths = std::move(paths);
        return r;
    }
    if (y.size() != model.b.rows())
        throw DimensionError("nf_refine: y length must match the model");
    const Eigen::Index np = static_cast<Eigen::Index>(paths.size());
    const CVec yr = model.basis.adjoint() * y;
    const double outside = std::max(0.0, y.squaredNorm() - yr.squaredNorm());
    auto full = [&](double reduced) { return std::sqrt(reduced * reduced + outside); };
    CMat cols(yr.size(), np);
    for (Eigen::Index l = 0; l < np; ++l)
        cols.col(l) = model.reduced_response(paths[static_cast<std::size_t>(l)].position);
    CVec gains;
    double res = joint_residual(yr, cols, &gains);
    r.residual_norms.push_back(full(res));

    const double daz = grid.azimuth.size() > 1 ? grid.azimuth[1] - grid.azimuth[0] : 0.0;
    const double dratio = grid.distance.size() > 1 ? grid.distance[1] / grid.distance[0] : 1.0;
    double span = 1.0;
    for (int round = 0; round < rounds; ++round) {
        for (Eigen::Index l = 0; l < np; ++l) {
            NfPath& cur = paths[static_cast<std::size_t>(l)];
            const CVec keep = cols.col(l);
            double best_res = res;
            double best_az = cur.azimuth, best_d = cur.distance;
            CVec best_col = keep;
            for (int ia = -factor; ia <= factor; ++ia) {
                for (int id = -factor; id <= factor; ++id) {
                    if (ia == 0 && id == 0)
                        continue;  // current point is the incumbent
                    const double az = cur.azimuth + span * daz * ia / factor;
                    const double d = cur.distance * std::pow(dratio, span * id / factor);
                    cols.col(l) = model.reduced_response(grid.at(az, d));
                    const double rr = joint_residual(yr, cols, nullptr);
                    if (rr < best_res) {
                        best_res = rr;
                        best_az = az;
                        best_d = d;
                        best_col = cols.col(l);
                    }
                }
            }
            cols.col(l) = best_col;
            if (best_res < res) {
                cur.azimuth = best_az;
                cur.distance = best_d;
                cur.position = grid.at(best_az, best_d);
                cur.grid_index = -1;
                res = best_res;
            }
        }
        joint_residual(yr, cols, &gains);
        r.residual_norms.push_back(full(res));
        span /= factor;
    }
    for (Eigen::Index l = 0; l < np; ++l)
        paths[static_cast<std::size_t>(l)].gain = gains(l);
    r.paths = std::move(paths);
    return r;
}

} // namespace riskit::localize
