// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "riskit/channel.hpp"
#include "riskit/errors.hpp"
#include "riskit/estimation.hpp"
#include "riskit/localize.hpp"
#include "riskit/optimize.hpp"
#include "riskit/parallel.hpp"
#include "riskit/protocols.hpp"
#include "riskit/rng.hpp"
#include "riskit/sparse.hpp"

namespace riskit::cli::detail {

namespace {

double from_db(double db) { return std::pow(10.0, db / 10.0); }

std::vector<double> dvec(const Json& j) { return j.get<std::vector<double>>(); }
std::vector<int> ivec(const Json& j) { return j.get<std::vector<int>>(); }

Vec3 vec3(const Json& j, const char* key)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3)
        throw ConfigError(std::string("params.") + key + ": expected 3 coordinates");
    return Vec3(v[0], v[1], v[2]);
}

struct Stats {
    double mean = 0.0;
    double ci95 = 0.0;
};

Stats stats(const std::vector<double>& xs)
{
    Stats s;
    if (xs.empty())
        return s;
    for (double x : xs)
        s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs)
            v += (x - s.mean) * (x - s.mean);
        v /= static_cast<double>(xs.size() - 1);
        s.ci95 = 1.96 * std::sqrt(v / static_cast<double>(xs.size()));
    }
    return s;
}

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw ConfigError(msg);
}

// ---------------------------------------------------------------- fig2

Json fig2_defaults()
{
    return {{"trials", 1000},
            {"n", 8},
            {"m", 63},
            {"pilots", 64},
            {"snr_db", -10.0},
            {"rho", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}},
            {"eg_group", 3}};
}

ScenarioOutput run_fig2(const Json& p, std::uint64_t seed, int trials)
{
    using namespace estimation;
    const int n = p["n"], m = p["m"], t = p["pilots"], j = p["eg_group"];
    const double pw = 1.0, sigma2 = pw / from_db(p["snr_db"].get<double>());
    const auto rhos = dvec(p["rho"]);

    const TrainingMatrix onoff = build_training(TrainingKind::onoff, m);
    const TrainingMatrix dft = build_training(TrainingKind::dft, m, t);
    const TrainingMatrix had = build_training(TrainingKind::hadamard, m, t);
    const TrainingMatrix reduced = build_training(TrainingKind::dft, m / j, t);
    const TrainingMatrix grouped = expand_grouped(reduced, j);
    const std::array<const char*, 5> methods{"LS-onoff", "LS-DFT", "LS-Hadamard", "LS-EG-DFT", "LMMSE-DFT"};

    ResultTable tab;
    tab.name = "mse";
    tab.columns = {"rho", "method", "mse"};
    channel::SystemDims dims;
    dims.n_bs = n;
    dims.m_ris = m;
    dims.k_users = 1;
    for (std::size_t ir = 0; ir < rhos.size(); ++ir) {
        const double rho = rhos[ir];
        const CMat rn = channel::exp_correlation_matrix(n, rho);
        const CMat rm = channel::exp_correlation_matrix(m, rho);
        channel::RicianConfig rc;
        rc.r_hb = rn;
        rc.r_hr = rm;
        rc.r_hrr = {rm};
        rc.r_hdb = {rn};
        const LmmseFilter lmmse(dft, build_ccc(rn, rm, rm, rn), pw, sigma2);

        // Same channel and noise streams at every rho (common random numbers), so the
        // curves differ only through the correlation.
        std::vector<std::array<double, 5>> err(static_cast<std::size_t>(trials));
        parallel_for(err.size(), [&](std::size_t tr) {
            const auto ch = channel::gen_unstructured(dims, rc, derive_seed(seed, 200, tr));
            const CVec c = stack_channel(ch.hd[0], ch.cascaded(0));
            Rng rng(derive_seed(seed, 300, tr));
            auto err_of = [&](const CVec& est) { return (est - c).squaredNorm() / static_cast<double>(c.size()); };
            auto ls = [&](const TrainingMatrix& phi) {
                return ls_estimate(observe(c, phi, pw, sigma2, rng), phi, false).c_hat;
            };
            auto& e = err[tr];
            e[0] = err_of(ls(onoff));
            e[1] = err_of(ls(dft));
            e[2] = err_of(ls(had));
            const ChannelEstimate eg = ls_estimate(observe(c, grouped, pw, sigma2, rng), reduced, false);
            e[3] = err_of(stack_channel(eg.direct(n), eg_recover(eg.cascaded(n), j)));
            e[4] = err_of(lmmse.apply(observe(c, dft, pw, sigma2, rng)));
        });
        for (std::size_t k = 0; k < methods.size(); ++k) {
            double s = 0.0;
            for (const auto& e : err)
                s += e[k];
            tab.add_row({rho, std::string(methods[k]), s / trials});
        }
    }
    tab.sort_rows(2);
    ScenarioOutput out;
    out.tables.push_back(std::move(tab));
    out.notes["sigma2_over_p"] = sigma2 / pw;
    out.notes["ls_dft_theory"] = sigma2 / (t * pw);
    return out;
}

// ---------------------------------------------------------------- fig3

Json fig3_defaults()
{
    return {{"trials", 1000},
            {"n", 100},
            {"m_x", 10},
            {"m_z", 10},
            {"l_br", 4},
            {"l_ru", 4},
            {"snr_db", 0.0},
            {"pilots", {16, 32, 48, 64, 80}},
            {"bs_grid_factor", 2},
            {"ris_grid_factor", 2},
            {"on_grid", true},
            {"min_separation", 2}};
}

// `count` points on a circular grid of `g` cells per axis, pairwise at least
// `sep` cells apart in the max norm.
std::vector<std::vector<int>> spaced_cells(Rng& rng, int g, int count, int dims, int sep)
{
    std::vector<std::vector<int>> out;
    int attempts = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++attempts > 100000)
            throw ConfigError("fig3: cannot place paths with the requested min_separation");
        std::vector<int> c;
        for (int d = 0; d < dims; ++d)
            c.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(g))));
        bool ok = true;
        for (const auto& o : out) {
            int far = 0;
            for (int d = 0; d < dims; ++d) {
                const int dd = std::abs(o[static_cast<std::size_t>(d)] - c[static_cast<std::size_t>(d)]);
                far = std::max(far, std::min(dd, g - dd));
            }
            ok = ok && far >= sep;
        }
        if (ok)
            out.push_back(std::move(c));
    }
    return out;
}

// Frequency of cell i (possibly jittered off the grid).
double cell_freq(const std::vector<double>& grid, int i, bool on_grid, Rng& rng)
{
    const double step = 2.0 * kPi / static_cast<double>(grid.size());
    double w = grid[static_cast<std::size_t>(i)];
    if (!on_grid)
        w += rng.uniform(-0.5, 0.5) * step;
    if (w < -kPi)
        w += 2.0 * kPi;
    if (w >= kPi)
        w -= 2.0 * kPi;
    return w;
}

ScenarioOutput run_fig3(const Json& p, std::uint64_t seed, int trials)
{
    const int n = p["n"], mx = p["m_x"], mz = p["m_z"], lbr = p["l_br"], lru = p["l_ru"];
    const int m = mx * mz;
    const int fb = p["bs_grid_factor"], fr = p["ris_grid_factor"], sep = p["min_separation"];
    const bool on_grid = p["on_grid"];
    // SNR of one received pilot entry: P M E|g|^2 / sigma2 with unit-power cascaded entries.
    const double pw = 1.0;
    const double sigma2 = pw * m / from_db(p["snr_db"].get<double>());
    const auto pilots = ivec(p["pilots"]);
    const sparse::Dictionary db = sparse::make_dictionary_ula(n, fb * n);
    const sparse::Dictionary dr = sparse::make_dictionary_upa(mx, mz, fr * fr * m);
    channel::SystemDims dims;
    dims.n_bs = n;
    dims.m_ris = m;
    dims.m_x = mx;
    dims.m_z = mz;
    dims.k_users = 1;

    const std::array<const char*, 3> methods{"one-stage", "two-stage", "two-stage-correlated"};
    ResultTable tab;
    tab.name = "nmse";
    tab.columns = {"pilots", "method", "nmse"};
    for (std::size_t ip = 0; ip < pilots.size(); ++ip) {
        const int t = pilots[ip];
        std::vector<std::array<double, 3>> err(static_cast<std::size_t>(trials));
        parallel_for(err.size(), [&](std::size_t tr) {
            Rng rng(derive_seed(seed, 400 + ip, tr));
            const auto bi = spaced_cells(rng, static_cast<int>(db.grid_x.size()), lbr, 1, sep);
            const auto ri = spaced_cells(rng, static_cast<int>(dr.grid_x.size()), lbr, 2, sep);
            const auto ui = spaced_cells(rng, static_cast<int>(dr.grid_x.size()), lru, 2, sep);
            channel::SvParams sv;
            sv.alpha = rng.cnormal_vec(lbr) / std::sqrt(static_cast<double>(lbr));
            for (int l = 0; l < lbr; ++l) {
                const auto& b = bi[static_cast<std::size_t>(l)];
                const auto& r = ri[static_cast<std::size_t>(l)];
                sv.omega_bh.push_back(cell_freq(db.grid_x, b[0], on_grid, rng));
                sv.omega_rh.push_back({cell_freq(dr.grid_x, r[0], on_grid, rng), cell_freq(dr.grid_z, r[1], on_grid, rng)});
            }
            channel::SvUser u;
            u.beta = rng.cnormal_vec(lru) / std::sqrt(static_cast<double>(lru));
            for (int l = 0; l < lru; ++l) {
                const auto& c = ui[static_cast<std::size_t>(l)];
                u.omega_rhr.push_back({cell_freq(dr.grid_x, c[0], on_grid, rng), cell_freq(dr.grid_z, c[1], on_grid, rng)});
            }
            sv.users.push_back(u);
            const CMat g = channel::sv_channels(dims, sv).cascaded(0);
            const CMat xi = rng.phase_vec(static_cast<Eigen::Index>(m) * t).reshaped(m, t);
            const auto obs = sparse::observe_cascaded(g, xi, pw, sigma2, rng);

            sparse::OneStageOptions o1;
            o1.sparsity = lbr * lru;
            sparse::TwoStageOptions o2;
            o2.l_br = lbr;
            o2.l_ru = lru;
            auto& e = err[tr];
            e[0] = sparse::nmse(sparse::one_stage_estimate(obs, db, dr, o1).g_hat, g);
            e[1] = sparse::nmse(sparse::two_stage_estimate(obs, db, dr, o2).g_hat, g);
            o2.mode = sparse::TwoStageMode::correlation_based;
            e[2] = sparse::nmse(sparse::two_stage_estimate(obs, db, dr, o2).g_hat, g);
        });
        for (std::size_t k = 0; k < methods.size(); ++k) {
            double s = 0.0;
            for (const auto& e : err)
                s += e[k];
            tab.add_row({static_cast<double>(t), std::string(methods[k]), s / trials});
        }
    }
    tab.sort_rows(2);
    ScenarioOutput out;
    out.tables.push_back(std::move(tab));
    out.notes["snr_definition"] = "per received pilot entry, P*M/sigma2 with unit-power cascaded entries";
    return out;
}

// ---------------------------------------------------------------- fig4

Json fig4_defaults()
{
    return {{"trials", 20},
            {"n", 10},
            {"m", 100},
            {"k", 4},
            {"snr_db", 5.0},
            {"ao_rounds", 5},
            {"iters", 100},
            {"bcd_sweeps", 10},
            {"ga_population", 30},
            {"ga_generations", 50},
            {"random_draws", 100},
            {"methods", {"mm", "ccm", "bcd", "admm", "barrier", "apg", "gd", "ga"}},
            {"record_timing", false}};
}

optimize::PhasePass make_pass(const std::string& name, const Json& p, std::uint64_t ga_seed, int* ga_calls)
{
    using namespace optimize;
    const int iters = p["iters"];
    if (name == "mm")
        return [iters](const SmoothObjective& o, const CVec& t) {
            MmOptions opt;
            opt.iters = iters;
            return optimize_mm(o, t, opt);
        };
    if (name == "ccm")
        return [iters](const SmoothObjective& o, const CVec& t) {
            CcmOptions opt;
            opt.iters = iters;
            return optimize_ccm(o, t, opt);
        };
    if (name == "gd")
        return [iters](const SmoothObjective& o, const CVec& t) {
            GdOptions opt;
            opt.iters = iters;
            return optimize_gd(o, t, opt);
        };
    if (name == "apg")
        return [iters](const SmoothObjective& o, const CVec& t) {
            ApgOptions opt;
            opt.iters = iters;
            return optimize_apg(o, t, opt);
        };
    if (name == "admm")
        return [iters](const SmoothObjective& o, const CVec& t) {
            AdmmOptions opt;
            opt.iters = iters;
            return optimize_admm(o, t, opt);
        };
    if (name == "barrier")
        return [iters](const SmoothObjective& o, const CVec& t) {
            BarrierOptions opt;
            opt.iters = iters;
            return optimize_barrier(o, t, opt);
        };
    if (name == "bcd") {
        const int sweeps = p["bcd_sweeps"];
        return [sweeps](const SmoothObjective& o, const CVec& t) {
            BcdOptions opt;
            opt.sweeps = sweeps;
            return optimize_bcd(o, t, opt);
        };
    }
    if (name == "ga") {
        GaOptions ga;
        ga.population = p["ga_population"];
        ga.generations = p["ga_generations"];
        return [ga, ga_seed, ga_calls](const SmoothObjective& o, const CVec& t) {
            GaOptions opt = ga;
            opt.seed = derive_seed(ga_seed, static_cast<std::uint64_t>((*ga_calls)++));
            return optimize_ga([&o](const CVec& x) { return o.value(x); }, static_cast<int>(t.size()), opt, t);
        };
    }
    throw ConfigError("fig4: unknown method '" + name + "'");
}

ScenarioOutput run_fig4(const Json& p, std::uint64_t seed, int trials)
{
    using namespace optimize;
    const int n = p["n"], m = p["m"], k = p["k"], rounds = p["ao_rounds"], draws = p["random_draws"];
    const bool timing = p["record_timing"];
    const auto methods = p["methods"].get<std::vector<std::string>>();
    const RVec powers = RVec::Constant(1, from_db(p["snr_db"].get<double>()) / k);
    channel::SystemDims dims;
    dims.n_bs = n;
    dims.m_ris = m;
    dims.k_users = k;
    const channel::RicianConfig rc;

    struct SeedResult {
        std::vector<double> rate, umod, seconds;
        double random_mean = 0.0;
        std::vector<OptimizerReport> first_pass;
        std::vector<std::vector<double>> ao_trace;
    };
    std::vector<SeedResult> res(static_cast<std::size_t>(trials));
    parallel_for(res.size(), [&](std::size_t s) {
        const auto ch = channel::gen_unstructured(dims, rc, derive_seed(seed, 500, s));
        DownlinkInstance inst;
        for (int i = 0; i < k; ++i) {
            inst.g.push_back(ch.cascaded(i));
            inst.hd.push_back(ch.hd[static_cast<std::size_t>(i)]);
        }
        inst.sigma2 = RVec::Ones(k);
        inst.w = CMat::Zero(n, k);
        const CVec theta0 = Rng(derive_seed(seed, 501, s)).phase_vec(m);

        SeedResult& r = res[s];
        Rng rr(derive_seed(seed, 502, s));
        for (int d = 0; d < draws; ++d) {
            DownlinkInstance ri = inst;
            const CVec th = rr.phase_vec(m);
            ri.w = beamformer(BeamKind::mrt, effective_channels(ri, th), powers);
            r.random_mean += sinr_and_rate(ri, th).sum_rate / draws;
        }
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            int ga_calls = 0;
            const PhasePass inner = make_pass(methods[mi], p, derive_seed(seed, 503 + mi, s), &ga_calls);
            bool first = true;
            OptimizerReport first_rep;
            const PhasePass pass = [&](const SmoothObjective& o, const CVec& t) {
                OptimizerReport rep = inner(o, t);
                if (first) {
                    first_rep = rep;
                    first = false;
                }
                return rep;
            };
            const auto t0 = std::chrono::steady_clock::now();
            const AoResult ao = alternating_optimize(inst, theta0, BeamKind::mrt, powers, pass, rounds);
            r.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            r.rate.push_back(ao.sum_rate.back());
            r.umod.push_back((ao.theta.cwiseAbs().array() - 1.0).abs().maxCoeff());
            r.first_pass.push_back(std::move(first_rep));
            r.ao_trace.push_back(ao.sum_rate);
        }
    });

    ScenarioOutput out;
    ResultTable summary;
    summary.name = "sum_rate";
    summary.columns = {"method", "mean_sum_rate", "ci95"};
    if (timing)
        summary.columns.push_back("mean_seconds");
    ResultTable per_seed;
    per_seed.name = "per_seed";
    per_seed.columns = {"seed_index", "method", "sum_rate", "unit_modulus_error"};
    ResultTable trace;
    trace.name = "trace";
    trace.columns = {"method", "iteration", "objective"};
    if (timing)
        trace.columns.push_back("elapsed_ns");
    ResultTable ao;
    ao.name = "ao_rounds";
    ao.columns = {"method", "round", "sum_rate"};

    for (std::size_t mi = 0; mi <= methods.size(); ++mi) {
        const bool random = mi == methods.size();
        const std::string name = random ? "random" : methods[mi];
        std::vector<double> rates, secs;
        for (std::size_t s = 0; s < res.size(); ++s) {
            const double v = random ? res[s].random_mean : res[s].rate[mi];
            rates.push_back(v);
            if (!random)
                secs.push_back(res[s].seconds[mi]);
            per_seed.add_row({static_cast<double>(s), name, v, random ? 0.0 : res[s].umod[mi]});
        }
        const Stats st = stats(rates);
        std::vector<Cell> row{name, st.mean, st.ci95};
        if (timing)
            row.emplace_back(random ? 0.0 : stats(secs).mean);
        summary.add_row(std::move(row));
        if (random || res.empty())
            continue;
        const OptimizerReport& rep = res[0].first_pass[mi];
        for (std::size_t it = 0; it < rep.trace.size(); ++it) {
            std::vector<Cell> tr{name, static_cast<double>(it), rep.trace[it]};
            if (timing)
                tr.emplace_back(it < rep.elapsed_ns.size() ? rep.elapsed_ns[it] : 0.0);
            trace.add_row(std::move(tr));
        }
        for (std::size_t rd = 0; rd < res[0].ao_trace[mi].size(); ++rd)
            ao.add_row({name, static_cast<double>(rd), res[0].ao_trace[mi][rd]});
    }
    summary.sort_rows(1);
    per_seed.sort_rows(2);
    trace.sort_rows(2);
    ao.sort_rows(2);
    out.tables = {summary, per_seed, trace, ao};
    return out;
}

// ---------------------------------------------------------------- fig5

Json fig5_defaults()
{
    return {{"trials", 20},
            {"n", 100},
            {"m_values", {16, 36, 64, 100, 144}},
            {"k", 4},
            {"u_blocks", 50},
            {"t_c", 196},
            {"delta", 1.0},
            {"eps", 20.0},
            {"varpi", 0.0},
            {"beta_db", -30.0},
            {"alpha_db", -30.0},
            {"gamma_db", -60.0},
            {"snr_db", 40.0},
            {"bs_omega", 0.7},
            {"ris_omega", {-0.4, 0.3}},
            {"user_omegas", {{0.9, 0.2}, {-1.1, 0.5}, {0.3, -0.8}, {-0.2, 1.2}}},
            {"longterm_samples", 10},
            {"longterm_population", 20},
            {"longterm_generations", 30},
            {"block_population", 10},
            {"block_generations", 10}};
}

ScenarioOutput run_fig5(const Json& p, std::uint64_t seed, int trials)
{
    const int n = p["n"], k = p["k"];
    const auto ms = ivec(p["m_values"]);
    const auto ris_w = dvec(p["ris_omega"]);
    const auto users = p["user_omegas"].get<std::vector<std::vector<double>>>();
    require(ris_w.size() == 2, "params.ris_omega: expected [omega_x, omega_z]");
    require(static_cast<int>(users.size()) >= k, "params.user_omegas: need one [omega_x, omega_z] per user");

    ResultTable tab;
    tab.name = "rate";
    tab.columns = {"M", "regime", "mean_rate", "ci95"};
    ScenarioOutput out;
    for (std::size_t im = 0; im < ms.size(); ++im) {
        const int m = ms[im];
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
        protocols::RegimeSetup s;
        s.dims.n_bs = n;
        s.dims.m_ris = m;
        s.dims.m_x = side;
        s.dims.m_z = side;
        s.dims.k_users = k;
        auto& r = s.rician;
        r.beta = from_db(p["beta_db"].get<double>());
        r.alpha = {from_db(p["alpha_db"].get<double>())};
        r.gamma = {from_db(p["gamma_db"].get<double>())};
        r.delta = p["delta"];
        r.eps = {p["eps"].get<double>()};
        r.varpi = {p["varpi"].get<double>()};
        r.h_los = channel::ula_steering(p["bs_omega"].get<double>(), n) *
                  channel::upa_steering(ris_w[0], ris_w[1], side, side).adjoint();
        for (int i = 0; i < k; ++i) {
            const auto& w = users[static_cast<std::size_t>(i)];
            require(w.size() == 2, "params.user_omegas: each entry is [omega_x, omega_z]");
            r.hr_los.push_back(channel::upa_steering(w[0], w[1], side, side));
        }
        s.link.powers = RVec::Constant(1, from_db(p["snr_db"].get<double>()));
        s.link.sigma2 = 1.0;
        s.coherence.t_c = p["t_c"];
        s.coherence.u_blocks = p["u_blocks"];
        s.longterm_samples = p["longterm_samples"];
        s.longterm_ga.population = p["longterm_population"];
        s.longterm_ga.generations = p["longterm_generations"];
        s.block_ga.population = p["block_population"];
        s.block_ga.generations = p["block_generations"];

        std::vector<protocols::RegimeComparison> cmp(static_cast<std::size_t>(trials));
        parallel_for(cmp.size(), [&](std::size_t sd) { cmp[sd] = protocols::compare_regimes(s, derive_seed(seed, 600 + im, sd)); });

        const std::array<protocols::Regime, 4> regimes{protocols::Regime::instantaneous,
                                                       protocols::Regime::instantaneous_ideal,
                                                       protocols::Regime::two_timescale, protocols::Regime::long_term};
        for (auto reg : regimes) {
            std::vector<double> v;
            std::string warning;
            for (const auto& c : cmp) {
                const protocols::RegimeResult& rr = reg == protocols::Regime::instantaneous         ? c.instantaneous
                                                    : reg == protocols::Regime::instantaneous_ideal ? c.instantaneous_ideal
                                                    : reg == protocols::Regime::two_timescale       ? c.two_timescale
                                                                                                     : c.long_term;
                v.push_back(rr.average_rate);
                if (!rr.warning.empty())
                    warning = rr.warning;
            }
            const Stats st = stats(v);
            tab.add_row({static_cast<double>(m), std::string(protocols::regime_name(reg)), st.mean, st.ci95});
            const std::string key = std::to_string(m) + "/" + protocols::regime_name(reg);
            out.notes["pilot_length"][key] = protocols::pilot_length(reg, k, m, n);
            if (!warning.empty())
                out.notes["warnings"][key] = warning;
        }
    }
    tab.sort_rows(2);
    out.tables.push_back(std::move(tab));
    return out;
}

// ---------------------------------------------------------------- fig6

Json fig6_defaults()
{
    return {{"trials", 2000},
            {"bs", {0.0, 0.0, 40.0}},
            {"mu", {90.0, 30.0}},
            {"ris", {{60.0, 45.0, 15.0}, {50.0, 50.0, 5.0}, {40.0, 20.0, 10.0}}},
            {"sigma_td", {0.01, 0.02, 0.05, 0.1, 0.2, 0.5}},
            {"taylor_max_iters", 50}};
}

ScenarioOutput run_fig6(const Json& p, std::uint64_t seed, int trials)
{
    using namespace localize;
    FarFieldScene scene;
    scene.bs = vec3(p["bs"], "bs");
    const auto mu = dvec(p["mu"]);
    require(mu.size() == 2, "params.mu: expected [x, y]");
    scene.mu = Vec3(mu[0], mu[1], 0.0);
    for (const auto& r : p["ris"])
        scene.ris.push_back(vec3(r, "ris"));
    scene.validate();
    const auto sigmas = dvec(p["sigma_td"]);
    TaylorOptions topt;
    topt.max_iters = p["taylor_max_iters"];

    // The TDoA-only bound scales linearly with the noise standard deviation.
    NoiseStd unit;
    unit.tdoa_m = 1.0;
    const double peb_unit = measurement_fim(scene, simulate_measurements(scene, unit, seed)).peb;

    ResultTable tab;
    tab.name = "rmse";
    tab.columns = {"sigma_td", "method", "rmse", "peb"};
    ScenarioOutput out;
    const Eigen::Vector2d truth(mu[0], mu[1]);
    for (std::size_t is = 0; is < sigmas.size(); ++is) {
        const double sig = sigmas[is];
        NoiseStd noise;
        noise.tdoa_m = sig;
        std::vector<std::array<double, 3>> err(static_cast<std::size_t>(trials));
        parallel_for(err.size(), [&](std::size_t t) {
            const auto d = tdoa_values(simulate_measurements(scene, noise, derive_seed(seed, 700 + is, t)));
            const Eigen::Vector2d pc = chan_solve(d, scene.ris, scene.bs);
            Eigen::Vector2d pt = pc;
            double failed = 0.0;
            try {
                pt = taylor_solve(d, scene.ris, scene.bs, pc, topt).position;
            } catch (const SolverError&) {
                failed = 1.0;
            }
            err[t] = {(pc - truth).squaredNorm(), (pt - truth).squaredNorm(), failed};
        });
        double ec = 0.0, et = 0.0, fails = 0.0;
        for (const auto& e : err) {
            ec += e[0];
            et += e[1];
            fails += e[2];
        }
        const double peb = sig * peb_unit;
        tab.add_row({sig, std::string("chan"), std::sqrt(ec / trials), peb});
        tab.add_row({sig, std::string("taylor"), std::sqrt(et / trials), peb});
        if (fails > 0)
            out.notes["taylor_fallbacks"][format_number(sig)] = fails;
    }
    tab.sort_rows(2);
    out.tables.push_back(std::move(tab));
    out.notes["sigma_td_meaning"] = "standard deviation of the TDoA range error in metres";
    return out;
}

// ---------------------------------------------------------------- fig7

Json fig7_defaults()
{
    return {{"trials", 500},
            {"carrier_ghz", 240.0},
            {"ris_origin", {0.0, 0.5, 2.0}},
            {"ris_side", 21},
            {"bs_center", {3.0, 0.0, 3.0}},
            {"bs_antennas", 32},
            {"focus", {0.0, -2.5, 0.0}},
            {"snapshots", 16},
            {"snr_db", {-10.0, -5.0, 0.0, 5.0, 10.0}},
            {"scatterers", {0, 1, 2, 3}},
            {"scatterer_amplitude", 0.2},
            {"area_x", {-2.5, 2.5}},
            {"area_y", {-5.0, 0.0}},
            {"grid_origin", {0.0, 0.5, 0.0}},
            {"grid_azimuths", 91},
            {"grid_distances", 40},
            {"grid_d_min", 0.3},
            {"grid_d_max", 6.2},
            {"refine_factor", 4},
            {"refine_rounds", 2}};
}

ScenarioOutput run_fig7(const Json& p, std::uint64_t seed, int trials)
{
    using namespace localize;
    channel::NearFieldScene sc;
    sc.ris_origin = vec3(p["ris_origin"], "ris_origin");
    sc.m_x = sc.m_z = p["ris_side"];
    sc.wavelength = 299792458.0 / (p["carrier_ghz"].get<double>() * 1e9);
    sc.bs_positions = channel::ula_positions(vec3(p["bs_center"], "bs_center"), p["bs_antennas"], sc.wavelength / 2,
                                             Vec3(1.0, 0.0, 0.0));
    sc.validate();
    const CVec focus_theta = nf_focus_phases(sc, vec3(p["focus"], "focus"));
    // First snapshot focuses on the configured point, the rest add random phase offsets.
    std::vector<CVec> snaps{focus_theta};
    Rng pr(derive_seed(seed, 800));
    for (int t = 1; t < p["snapshots"].get<int>(); ++t)
        snaps.push_back(focus_theta.cwiseProduct(pr.phase_vec(focus_theta.size())));
    const NfModel model(sc, snaps);
    const PolarGrid grid = make_polar_grid(vec3(p["grid_origin"], "grid_origin"), 0.0, p["grid_azimuths"], kPi,
                                           2.0 * kPi, p["grid_distances"], p["grid_d_min"], p["grid_d_max"]);
    const CMat resp = nf_responses(model, grid);

    const auto snrs = dvec(p["snr_db"]);
    const auto counts = ivec(p["scatterers"]);
    const auto ax = dvec(p["area_x"]), ay = dvec(p["area_y"]);
    require(ax.size() == 2 && ay.size() == 2 && ax[0] < ax[1] && ay[0] < ay[1], "fig7: area bounds must be [lo, hi]");
    const double amp = p["scatterer_amplitude"];
    const int factor = p["refine_factor"], rounds = p["refine_rounds"];
    const int max_count = *std::max_element(counts.begin(), counts.end());
    const std::size_t cells = counts.size() * snrs.size();

    // Common random numbers: one MU, one nested scatterer set and one unit noise
    // draw per trial, reused across every (count, SNR) cell.
    std::vector<std::vector<std::array<double, 2>>> err(static_cast<std::size_t>(trials));
    parallel_for(err.size(), [&](std::size_t t) {
        Rng rng(derive_seed(seed, 900, t));
        auto draw = [&] { return Vec3(rng.uniform(ax[0], ax[1]), rng.uniform(ay[0], ay[1]), 0.0); };
        const Vec3 p0 = draw();
        const CVec r0 = model.response(p0);
        std::vector<CVec> scat;
        for (int l = 0; l < max_count; ++l) {
            const CVec rs = model.response(draw());
            scat.push_back(amp * r0.norm() / rs.norm() * rng.unit_phase() * rs);
        }
        const CVec w = rng.cnormal_vec(r0.size());
        const double sig = r0.squaredNorm() / static_cast<double>(r0.size());
        auto& e = err[t];
        e.resize(cells);
        for (std::size_t ic = 0; ic < counts.size(); ++ic) {
            CVec clean = r0;
            for (int l = 0; l < counts[ic]; ++l)
                clean += scat[static_cast<std::size_t>(l)];
            for (std::size_t is = 0; is < snrs.size(); ++is) {
                const CVec y = clean + std::sqrt(sig / from_db(snrs[is])) * w;
                const auto coarse = nf_cancel_and_localize(y, model, grid, counts[ic], &resp);
                const auto fine = nf_refine(y, model, grid, coarse.paths, factor, rounds);
                e[ic * snrs.size() + is] = {(coarse.paths[0].position - p0).squaredNorm(),
                                            (fine.paths[0].position - p0).squaredNorm()};
            }
        }
    });

    ResultTable tab, tab_coarse;
    tab.name = "mse";
    tab_coarse.name = "mse_coarse";
    tab.columns = tab_coarse.columns = {"snr", "n_scatterers", "mse"};
    for (std::size_t ic = 0; ic < counts.size(); ++ic)
        for (std::size_t is = 0; is < snrs.size(); ++is) {
            double c = 0.0, f = 0.0;
            for (const auto& e : err) {
                c += e[ic * snrs.size() + is][0];
                f += e[ic * snrs.size() + is][1];
            }
            tab.add_row({snrs[is], static_cast<double>(counts[ic]), f / trials});
            tab_coarse.add_row({snrs[is], static_cast<double>(counts[ic]), c / trials});
        }
    tab.sort_rows(2);
    tab_coarse.sort_rows(2);
    ScenarioOutput out;
    out.tables = {tab, tab_coarse};
    out.notes["fraunhofer_distance_m"] = channel::fraunhofer_distance(sc.aperture_side(), sc.wavelength);
    out.notes["model_rank"] = static_cast<int>(model.basis.cols());
    out.notes["snr_definition"] = "per received entry, MU path only";
    return out;
}

} // namespace

Json defaults_for(const std::string& name)
{
    if (name == "fig2")
        return fig2_defaults();
    if (name == "fig3")
        return fig3_defaults();
    if (name == "fig4")
        return fig4_defaults();
    if (name == "fig5")
        return fig5_defaults();
    if (name == "fig6")
        return fig6_defaults();
    if (name == "fig7")
        return fig7_defaults();
    throw ConfigError("unknown scenario '" + name + "'");
}

void validate_params(const std::string& name, const Json& p)
{
    auto positive = [&](const char* key) {
        require(p[key].get<double>() > 0, "params." + std::string(key) + " must be > 0");
    };
    if (name == "fig2") {
        positive("n");
        positive("m");
        positive("eg_group");
        require(p["m"].get<int>() % p["eg_group"].get<int>() == 0, "params.eg_group must divide params.m");
        require(p["pilots"].get<int>() >= p["m"].get<int>() + 1, "params.pilots must be >= m + 1");
        for (double r : dvec(p["rho"]))
            require(r >= 0.0 && r < 1.0, "params.rho entries must lie in [0, 1)");
    } else if (name == "fig3") {
        for (const char* k : {"n", "m_x", "m_z", "l_br", "l_ru", "bs_grid_factor", "ris_grid_factor"})
            positive(k);
        require(p["min_separation"].get<int>() >= 0, "params.min_separation must be >= 0");
        for (int t : ivec(p["pilots"]))
            require(t >= 1, "params.pilots entries must be >= 1");
    } else if (name == "fig4") {
        for (const char* k : {"n", "m", "k", "ao_rounds", "iters", "bcd_sweeps", "ga_population", "ga_generations",
                              "random_draws"})
            positive(k);
        for (const auto& mth : p["methods"].get<std::vector<std::string>>())
            require(mth == "mm" || mth == "ccm" || mth == "bcd" || mth == "admm" || mth == "barrier" ||
                        mth == "apg" || mth == "gd" || mth == "ga",
                    "params.methods: unknown method '" + mth + "'");
    } else if (name == "fig5") {
        for (int m : ivec(p["m_values"])) {
            const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
            require(m > 0 && side * side == m, "params.m_values entries must be perfect squares");
        }
        for (const char* k : {"n", "k", "u_blocks", "t_c", "longterm_samples", "longterm_population",
                              "longterm_generations", "block_population", "block_generations"})
            positive(k);
    } else if (name == "fig6") {
        for (double s : dvec(p["sigma_td"]))
            require(s >= 0.0, "params.sigma_td entries must be >= 0");
        require(p["ris"].size() >= 3, "params.ris: at least three RIS anchors are needed");
        positive("taylor_max_iters");
    } else if (name == "fig7") {
        for (const char* k : {"carrier_ghz", "ris_side", "bs_antennas", "snapshots", "grid_azimuths",
                              "grid_distances", "grid_d_min", "grid_d_max", "refine_factor"})
            positive(k);
        require(p["grid_d_max"].get<double>() > p["grid_d_min"].get<double>(), "params.grid_d_max must exceed grid_d_min");
        require(p["scatterer_amplitude"].get<double>() >= 0.0, "params.scatterer_amplitude must be >= 0");
        for (int c : ivec(p["scatterers"]))
            require(c >= 0, "params.scatterers entries must be >= 0");
    }
}

ScenarioOutput run(const std::string& name, const Json& p, std::uint64_t seed, int trials)
{
    if (name == "fig2")
        return run_fig2(p, seed, trials);
    if (name == "fig3")
        return run_fig3(p, seed, trials);
    if (name == "fig4")
        return run_fig4(p, seed, trials);
    if (name == "fig5")
        return run_fig5(p, seed, trials);
    if (name == "fig6")
        return run_fig6(p, seed, trials);
    if (name == "fig7")
        return run_fig7(p, seed, trials);
    throw ConfigError("unknown scenario '" + name + "'");
}

} // namespace riskit::cli::detail
