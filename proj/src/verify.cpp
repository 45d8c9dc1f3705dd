#include "boxlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

namespace boxlab {

namespace {

// Endpoint images S_w(0), S_w(1) for every stopped word.
void append_word_endpoints(const Cifs& system, const Word& w, PointCloud* cloud) {
    if (system.kind == SystemKind::kGauss) {
        // Rational Moebius evaluation in doubles (shallow scales only).
        double pp = 1, p = 0, qp = 0, q = 1;
        for (std::uint32_t l : w.letters) {
            const GaussBranch& b = system.branches[l];
            double d = static_cast<double>(b.digit);
            double npp, np, nqp, nq;
            if (!b.composed_with_one) {
                npp = p; np = pp + p * d; nqp = q; nq = qp + q * d;
            } else {
                npp = pp + p * d; np = npp + p; nqp = qp + q * d; nq = nqp + q;
            }
            pp = npp; p = np; qp = nqp; q = nq;
            if (q > 1e140) { pp *= 1e-140; p *= 1e-140; qp *= 1e-140; q *= 1e-140; }
        }
        cloud->push_fixed1(Fixed96::from_double(p / q));
        cloud->push_fixed1(Fixed96::from_double((pp + p) / (qp + q)));
        return;
    }
    const int d = system.dim;
    std::vector<double> lo(static_cast<std::size_t>(d), 0.0), hi(static_cast<std::size_t>(d), 1.0);
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) {
        const Similarity& g = system.sims[*it];
        for (int a = 0; a < d; ++a) {
            lo[static_cast<std::size_t>(a)] = g.ratio * lo[static_cast<std::size_t>(a)] +
                                              g.translation[static_cast<std::size_t>(a)];
            hi[static_cast<std::size_t>(a)] = g.ratio * hi[static_cast<std::size_t>(a)] +
                                              g.translation[static_cast<std::size_t>(a)];
        }
    }
    cloud->push(lo);
    cloud->push(hi);
}

double fixed_point_of_first_generator(const Cifs& system) {
    PointCloud f = fixed_points(system, 1);
    return f.at(0, 0).to_double();
}

}  // namespace

PointCloud cylinder_cloud(const Cifs& system, double r, std::uint64_t word_budget,
                          bool* complete) {
    SymbolicCover cover = stopping_words(system, r, word_budget);
    bool ok = cover.complete;
    // Endpoint images are evaluated in doubles; below their resolution the
    // cloud silently undercounts, so flag instead.
    if (r < 1e-14) ok = false;
    if (complete) *complete = ok;
    PointCloud cloud(system.dim);
    for (const CoverWord& cw : cover.stopped) append_word_endpoints(system, cw.word, &cloud);
    return cloud;
}

std::vector<ResidualRow> empirical_vs_formula(const Cifs& system,
                                              const std::vector<double>& scales,
                                              const VerifyBudget& budget,
                                              const DimBracket* h_hint) {
    DimBracket h = h_hint ? *h_hint : hausdorff_dim(system, budget.dim_tol, budget.pressure_level);
    PointCloud f_cloud = fixed_points(system);
    double x0 = fixed_point_of_first_generator(system);
    PointCloud fm_cloud =
        budget.tau_level == 1 ? f_cloud : orbit_set(system, x0, budget.tau_level, budget.point_budget);

    // Fixed-point exponent evaluator feeding psi: exact memoized counts for
    // small clouds, a dense dyadic profile otherwise.
    std::function<double(double)> s_fn;
    std::shared_ptr<ProfileExponent> prof_exp;
    auto count_cache = std::make_shared<std::map<double, double>>();
    if (f_cloud.size() <= 5000 && f_cloud.dim == 1) {
        auto counter = std::make_shared<SortedCounter>(f_cloud);
        s_fn = [counter, count_cache](double rr) {
            auto it = count_cache->find(rr);
            if (it != count_cache->end()) return it->second;
            double s = rr >= 1.0 ? 0.0 : box_exponent(counter->count(rr), rr);
            (*count_cache)[rr] = s;
            return s;
        };
    } else if (f_cloud.size() <= 5000) {
        s_fn = [&f_cloud, count_cache](double rr) {
            auto it = count_cache->find(rr);
            if (it != count_cache->end()) return it->second;
            double s = rr >= 1.0 ? 0.0 : box_exponent(count_boxes(f_cloud, rr), rr);
            (*count_cache)[rr] = s;
            return s;
        };
    } else {
        double r_min = *std::min_element(scales.begin(), scales.end());
        int k_max = static_cast<int>(std::ceil(std::log2(1.0 / r_min))) + 2;
        k_max = std::min(k_max, 94);
        std::vector<Fixed96> grid;
        for (int k = 1; k <= k_max; ++k) grid.push_back(Fixed96::from_pow2(k));
        prof_exp = std::make_shared<ProfileExponent>(covering_profile(f_cloud, grid));
        s_fn = [prof_exp](double rr) { return (*prof_exp)(rr); };
    }

    std::vector<ResidualRow> rows;
    for (double r : scales) {
        ResidualRow row;
        row.r = r;
        PsiResult pr = psi(s_fn, h.mid(), r, system.dim, budget.psi_eps);
        row.psi_value = pr.value;
        row.psi_theta = pr.theta_star;

        bool complete = true;
        // Cheap lower bound on the enumeration cost: every generator above
        // the stopping scale fans out over the whole alphabet.
        std::size_t gens = system.generator_count();
        std::size_t above = 0;
        if (system.kind == SystemKind::kGauss) {
            for (const auto& b : system.branches) {
                double rho = b.composed_with_one
                                 ? 1.0 / (static_cast<double>(b.digit + 1) *
                                          static_cast<double>(b.digit + 1))
                                 : 1.0 / (static_cast<double>(b.digit) *
                                          static_cast<double>(b.digit));
                if (rho > r) ++above;
            }
        } else {
            for (const auto& g : system.sims)
                if (g.ratio > r) ++above;
        }
        bool hopeless = static_cast<double>(above + 1) * static_cast<double>(gens) >
                        static_cast<double>(budget.word_budget);
        try {
            if (hopeless) throw std::runtime_error("budget exceeded");
            PointCloud direct = cylinder_cloud(system, r, budget.word_budget, &complete);
            if (complete && !direct.empty()) {
                row.direct_exponent = box_exponent(count_boxes(direct, r), r);
                row.direct_ok = true;
            }
        } catch (const std::exception&) {
            row.direct_ok = false;
        }
        try {
            TauEstimate tau = symbolic_covering_estimate(system, r, budget.tau_level, fm_cloud,
                                                         budget.word_budget);
            if (tau.complete && tau.tau >= 1) {
                row.symbolic_exponent = std::log(tau.tau) / std::log(1.0 / r);
                row.symbolic_ok = true;
                row.slack = std::log(tau.slack_factor) / std::log(1.0 / r);
            }
        } catch (const std::exception&) {
            row.symbolic_ok = false;
        }
        row.residual = row.direct_ok ? row.direct_exponent - row.psi_value : 0.0;
        row.slack += grid_constant(system.dim) / std::log(1.0 / r) + h.width() +
                     std::log(system.distortion) / std::log(1.0 / r);
        rows.push_back(row);
    }
    return rows;
}

DimensionReport dimension_report(const Cifs& system, const ReportOptions& options) {
    DimensionReport rep;
    rep.dim = system.dim;
    rep.window_fraction = options.window_fraction;

    std::vector<double> scales = options.scales;
    if (scales.empty()) {
        for (int k = 2; k <= 20; ++k) scales.push_back(std::pow(2.0, -k));
    }
    std::sort(scales.begin(), scales.end(), std::greater<double>());

    rep.h = hausdorff_dim(system, options.budget.dim_tol, options.budget.pressure_level);

    // Exact profile of the fixed-point cloud at the instrumented scales
    // (plus any extra profile scales).
    PointCloud f_cloud = fixed_points(system);
    std::vector<double> prof_scales = scales;
    if (options.profile_scales)
        prof_scales.insert(prof_scales.end(), options.profile_scales->begin(),
                           options.profile_scales->end());
    std::sort(prof_scales.begin(), prof_scales.end(), std::greater<double>());
    prof_scales.erase(std::unique(prof_scales.begin(), prof_scales.end()), prof_scales.end());
    std::vector<Fixed96> fixed_scales;
    for (double r : prof_scales) fixed_scales.push_back(Fixed96::from_double(r));
    rep.fixed_profile = covering_profile(f_cloud, fixed_scales);

    // Tail estimates: min/max exponent over the finest window of the
    // *instrumented* scales (a windowed proxy for liminf/limsup).  The
    // profile already carries exact counts at every instrumented scale.
    std::size_t n = scales.size();
    std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                      std::ceil(n * options.window_fraction)));
    std::vector<double> inst_exponents;
    {
        std::size_t pi = 0;
        for (double r : scales) {
            while (pi < rep.fixed_profile.entries.size() &&
                   rep.fixed_profile.entries[pi].r > r * (1 + 1e-12))
                ++pi;
            inst_exponents.push_back(rep.fixed_profile.entries[pi].exponent);
        }
    }
    rep.s_low = *std::min_element(inst_exponents.end() - static_cast<long>(window),
                                  inst_exponents.end());
    rep.s_up = *std::max_element(inst_exponents.end() - static_cast<long>(window),
                                 inst_exponents.end());

    rep.interval = dim_interval(rep.h.mid(), std::min(rep.s_low, rep.h.mid()),
                                std::max({rep.s_up, rep.s_low, rep.h.mid()}),
                                static_cast<double>(system.dim));
    rep.exists_verdict = box_dimension_exists(rep.h.mid(), rep.s_low, rep.s_up);

    rep.rows = empirical_vs_formula(system, scales, options.budget, &rep.h);

    // Trivial-bounds chain on direct rows over the finest window.
    std::vector<double> direct;
    for (const ResidualRow& row : rep.rows)
        if (row.direct_ok) direct.push_back(row.direct_exponent);
    rep.has_direct_rows = !direct.empty();
    if (rep.has_direct_rows) {
        std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                     direct.size() * options.window_fraction)));
        rep.measured_dim_lower = *std::min_element(direct.end() - static_cast<long>(w), direct.end());
        rep.measured_dim_upper = *std::max_element(direct.end() - static_cast<long>(w), direct.end());
        double slack = 0;
        for (const ResidualRow& row : rep.rows) slack = std::max(slack, row.slack);
        rep.slack = slack + 0.08;
        rep.chain_ok = std::max(rep.h.lo, rep.s_low) <= rep.measured_dim_lower + rep.slack &&
                       rep.measured_dim_upper <= std::max(rep.h.hi, rep.s_up) + rep.slack;
    }
    return rep;
}

double rate_form_check(const Cifs& system, const std::vector<double>& window_scales,
                       const VerifyBudget& budget) {
    if (window_scales.size() < 3) throw std::invalid_argument("insufficient window");
    std::vector<double> scales = window_scales;
    std::sort(scales.begin(), scales.end(), std::greater<double>());

    DimBracket h = hausdorff_dim(system, budget.dim_tol, budget.pressure_level);
    PointCloud f_cloud = fixed_points(system);

    SampledFunction f_class;
    SampledFunction l_class;
    for (double r : scales) {
        if (!(r < std::exp(-1.0))) throw std::invalid_argument("scale too coarse for doubly-logarithmic chart");
        double x = std::log(std::log(1.0 / r));
        long long cf = count_boxes(f_cloud, Fixed96::from_double(r));
        bool complete = true;
        PointCloud direct = cylinder_cloud(system, r, budget.word_budget, &complete);
        if (!complete) continue;
        f_class.xs.push_back(x);
        f_class.values.push_back(box_exponent(cf, r));
        l_class.xs.push_back(x);
        l_class.values.push_back(box_exponent(count_boxes(direct, r), r));
    }
    if (f_class.xs.size() < 3) throw std::invalid_argument("insufficient window");

    SampledFunction envelope = minimal_envelope(f_class, h.lo);
    double gap = 0;
    for (std::size_t i = 0; i < envelope.xs.size(); ++i)
        gap = std::max(gap, std::fabs(envelope.values[i] - l_class.values[i]));
    return gap;
}

nlohmann::json DimensionReport::to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    j["hausdorff"] = {{"lo", h.lo}, {"hi", h.hi}, {"certified", h.certified},
                      {"envelope_lo", h.env_lo}, {"envelope_hi", h.env_hi}};
    j["s_low"] = s_low;
    j["s_up"] = s_up;
    j["window_fraction"] = window_fraction;
    j["dim_interval"] = {{"lo", interval.lo}, {"hi", interval.hi}, {"degenerate", interval.degenerate}};
    j["box_dimension_exists"] = exists_verdict;
    j["measured_dim_lower"] = measured_dim_lower;
    j["measured_dim_upper"] = measured_dim_upper;
    j["chain_ok"] = chain_ok;
    j["slack"] = slack;
    j["fixed_profile"] = nlohmann::json::array();
    for (const auto& e : fixed_profile.entries)
        j["fixed_profile"].push_back({{"r", e.r}, {"count", e.count}, {"exponent", e.exponent}});
    j["rows"] = nlohmann::json::array();
    for (const auto& row : rows)
        j["rows"].push_back({{"r", row.r},
                             {"direct_exponent", row.direct_exponent},
                             {"symbolic_exponent", row.symbolic_exponent},
                             {"psi", row.psi_value},
                             {"psi_theta", row.psi_theta},
                             {"residual", row.residual},
                             {"slack", row.slack},
                             {"direct_ok", row.direct_ok},
                             {"symbolic_ok", row.symbolic_ok}});
    return j;
}

std::string DimensionReport::render_text() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "hausdorff  [%.6f, %.6f]%s\n", h.lo, h.hi,
                  h.certified ? " (certified)" : "");
    os << buf;
    std::snprintf(buf, sizeof buf, "fixed-point tails  s_low=%.4f  s_up=%.4f\n", s_low, s_up);
    os << buf;
    std::snprintf(buf, sizeof buf, "dim interval  [%.6f, %.6f]%s\n", interval.lo, interval.hi,
                  interval.degenerate ? " (singleton)" : "");
    os << buf;
    os << "box dimension exists: " << (exists_verdict ? "yes" : "no") << "\n";
    os << "          r    direct  symbolic       psi  residual     slack\n";
    for (const auto& row : rows) {
        char direct[32], symbolic[32], residual[32];
        if (row.direct_ok) std::snprintf(direct, sizeof direct, "%9.4f", row.direct_exponent);
        else std::snprintf(direct, sizeof direct, "%9s", "--");
        if (row.symbolic_ok) std::snprintf(symbolic, sizeof symbolic, "%9.4f", row.symbolic_exponent);
        else std::snprintf(symbolic, sizeof symbolic, "%9s", "--");
        if (row.direct_ok) std::snprintf(residual, sizeof residual, "%9.4f", row.residual);
        else std::snprintf(residual, sizeof residual, "%9s", "--");
        std::snprintf(buf, sizeof buf, "%11.3e %s %s %9.4f %s %9.4f\n", row.r, direct, symbolic,
                      row.psi_value, residual, row.slack);
        os << buf;
    }
    return os.str();
}

std::string DimensionReport::rows_csv() const {
    std::ostringstream os;
    os << "r,direct_exponent,symbolic_exponent,psi,residual,slack,direct_ok,symbolic_ok\n";
    char buf[256];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", row.r,
                      row.direct_exponent, row.symbolic_exponent, row.psi_value, row.residual,
                      row.slack, row.direct_ok ? 1 : 0, row.symbolic_ok ? 1 : 0);
        os << buf;
    }
    return os.str();
}

}  // namespace boxlab
