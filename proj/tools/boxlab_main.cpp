// boxlab: batch front end for covering-number experiments.
//
// Subcommands: construct | profile | report | verify | plotdata.
// Exit codes: 0 ok, 1 check failure, 2 config error, 3 budget-partial.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "boxlab/constructions.hpp"
#include "boxlab/covering.hpp"
#include "boxlab/ifs.hpp"
#include "boxlab/scaling.hpp"
#include "boxlab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace boxlab;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> budget_words;
    std::optional<int> precision_bits;
    std::optional<std::string> scales_spec;  // base:kmin:kmax
};

struct Experiment {
    json config;
    Cifs system;
    std::optional<PrescribedSystem> prescribed;
    std::optional<SharpnessSystem> sharpness;
    std::optional<DigitSet> digit_set;
    std::optional<PointCloud> cloud;  // explicit cloud input
    json provenance;
    std::vector<double> scales;
    VerifyBudget budget;
    std::uint64_t seed = 20260101;
    bool partial = false;
};

[[noreturn]] void config_error(const std::string& msg) {
    std::cerr << "config error: " << msg << "\n";
    std::exit(2);
}

ScalingFunction parse_class(const json& j) {
    if (j.contains("constant")) return ScalingFunction::constant(j["constant"].get<double>());
    return ScalingFunction::from_json(j);
}

void build_system(Experiment* exp) {
    const json& j = exp->config;
    if (j.contains("cloud")) {
        const json& jc = j["cloud"];
        std::ifstream in(jc.at("csv").get<std::string>());
        if (!in) config_error("cannot open cloud csv");
        exp->cloud = PointCloud::read_csv(in, jc.value("dim", 1));
        return;
    }
    if (!j.contains("system")) config_error("missing system");
    const json& js = j["system"];
    if (!js.contains("recipe")) {
        exp->system = Cifs::from_json(js);
        return;
    }
    std::string recipe = js["recipe"].get<std::string>();
    if (recipe == "cantor13") {
        exp->system = make_similarity_system(
            1, {Similarity{1.0 / 3.0, {0.0}}, Similarity{1.0 / 3.0, {2.0 / 3.0}}});
    } else if (recipe == "gauss") {
        exp->system = gauss_cifs(js.at("digits").get<std::vector<std::uint64_t>>());
    } else if (recipe == "prescribed") {
        exp->prescribed = ifs_with_prescribed(parse_class(js.at("class")), js.at("h").get<double>(),
                                              js.value("dim", 1));
        exp->system = exp->prescribed->system;
        exp->provenance = exp->prescribed->provenance;
    } else if (recipe == "sharpness") {
        SharpnessParams p;
        p.h = js.at("h").get<double>();
        p.s = js.at("s").get<double>();
        p.t = js.at("t").get<double>();
        p.beta = js.at("beta").get<double>();
        p.dim = js.value("dim", 1);
        p.delta = js.value("delta", 0.01);
        p.stages = js.value("stages", 5);
        exp->sharpness = sharpness_system(p);
        exp->provenance = exp->sharpness->provenance;
        if (js.value("realize", true)) {
            exp->prescribed = ifs_with_prescribed(exp->sharpness->f, p.h, p.dim);
            exp->system = exp->prescribed->system;
            exp->provenance["system"] = exp->prescribed->provenance;
        }
    } else if (recipe == "cf-nonexistence") {
        exp->digit_set = nonexistence_digit_set(js.value("stages", 3), js.value("containment", 1.0));
        exp->system = gauss_cifs(*exp->digit_set);
        exp->provenance = exp->digit_set->provenance;
        if (exp->scales.empty()) {
            // default instrumentation: the stage dichotomy scales
            for (std::size_t n = 1; n < exp->digit_set->a_seq.size(); ++n) {
                double a = static_cast<double>(exp->digit_set->a_seq[n]);
                exp->scales.push_back(1.0 / (a * a));
                exp->scales.push_back(1.0 / (8.0 * a * a * a));
            }
            std::sort(exp->scales.begin(), exp->scales.end(), std::greater<double>());
        }
        exp->budget.pressure_level = 1;
        exp->budget.dim_tol = 5e-3;
    } else if (recipe == "moran") {
        // Emits points rather than an IFS; consumed by the profile experiment.
        MoranSpec spec = moran_scales_from_class(parse_class(js.at("class")), js.value("dim", 1),
                                                 js.value("depth", 10));
        int depth = std::min(js.value("depth", 10), static_cast<int>(spec.ratios.size()));
        exp->cloud = moran_points(spec, depth);
        json ratios = json::array();
        for (double r : spec.ratios) ratios.push_back(r);
        exp->provenance = {{"ratios", ratios}, {"depth", depth}};
        if (exp->scales.empty())
            for (int k = 1; k <= depth; ++k)
                exp->scales.push_back(spec.rho[static_cast<std::size_t>(k) - 1]);
    } else {
        config_error("unknown recipe: " + recipe);
    }
}

void parse_config(Experiment* exp, const CliOptions& cli) {
    std::ifstream in(cli.config_path);
    if (!in) config_error("cannot open config: " + cli.config_path);
    try {
        in >> exp->config;
    } catch (const std::exception& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    const json& j = exp->config;
    if (j.contains("budgets")) {
        const json& b = j["budgets"];
        exp->budget.word_budget = b.value("words", exp->budget.word_budget);
        exp->budget.point_budget = b.value("points", exp->budget.point_budget);
        int bits = b.value("precision_bits", 96);
        if (bits > Fixed96::kFracBits) config_error("precision_bits above 96 is not supported");
        if (bits < 16) config_error("precision_bits must be at least 16");
    }
    if (cli.budget_words) exp->budget.word_budget = *cli.budget_words;
    if (cli.precision_bits && *cli.precision_bits > Fixed96::kFracBits)
        config_error("precision_bits above 96 is not supported");
    if (j.contains("report")) {
        const json& r = j["report"];
        exp->budget.pressure_level = r.value("pressure_level", exp->budget.pressure_level);
        exp->budget.dim_tol = r.value("dim_tol", exp->budget.dim_tol);
        exp->budget.tau_level = r.value("tau_level", exp->budget.tau_level);
        exp->budget.psi_eps = r.value("psi_eps", exp->budget.psi_eps);
    }
    exp->seed = j.value("seed", exp->seed);

    if (j.contains("scales")) {
        const json& s = j["scales"];
        if (s.contains("list")) {
            exp->scales = s["list"].get<std::vector<double>>();
        } else {
            double base = s.value("base", 2.0);
            int kmin = s.value("kmin", 2);
            int kmax = s.value("kmax", 20);
            if (!(base > 1.0) || kmin < 1 || kmax < kmin) config_error("invalid scale grid");
            exp->scales.clear();
            for (int k = kmin; k <= kmax; ++k) exp->scales.push_back(std::pow(base, -k));
        }
    }
    if (cli.scales_spec) {
        double base;
        int kmin, kmax;
        if (std::sscanf(cli.scales_spec->c_str(), "%lf:%d:%d", &base, &kmin, &kmax) != 3 ||
            !(base > 1.0) || kmin < 1 || kmax < kmin)
            config_error("invalid --scales spec (want base:kmin:kmax)");
        exp->scales.clear();
        for (int k = kmin; k <= kmax; ++k) exp->scales.push_back(std::pow(base, -k));
    }
    std::sort(exp->scales.begin(), exp->scales.end(), std::greater<double>());
    for (double r : exp->scales)
        if (!(r > 0 && r < 1)) config_error("scale out of range");

    build_system(exp);
    if (exp->scales.empty())
        for (int k = 2; k <= 16; ++k) exp->scales.push_back(std::pow(2.0, -k));
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) config_error("cannot write " + path.string());
    out << contents;
}

std::string profile_csv(const CoveringProfile& profile) {
    std::ostringstream os;
    os << "r,count,exponent\n";
    char buf[128];
    for (const auto& e : profile.entries) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g\n", e.r, e.count, e.exponent);
        os << buf;
    }
    return os.str();
}

int run_construct(Experiment* exp, const fs::path& out) {
    json artifact;
    if (exp->cloud) {
        std::ostringstream os;
        exp->cloud->write_csv(os);
        write_file(out / "points.csv", os.str());
        artifact["points"] = "points.csv";
    } else {
        artifact["system"] = exp->system.to_json();
    }
    if (exp->sharpness) {
        artifact["target_class"] = exp->sharpness->f.to_json();
        artifact["predicted_envelope"] = exp->sharpness->predicted_envelope.to_json();
    }
    artifact["provenance"] = exp->provenance;
    write_file(out / "system.json", artifact.dump(2) + "\n");
    std::cout << "wrote " << (out / "system.json").string() << "\n";
    return 0;
}

int run_profile(Experiment* exp, const fs::path& out) {
    PointCloud cloud = exp->cloud ? *exp->cloud : fixed_points(exp->system);
    std::vector<Fixed96> scales;
    for (double r : exp->scales) scales.push_back(Fixed96::from_double(r));
    CoveringProfile profile = covering_profile(cloud, scales);
    write_file(out / "profile.csv", profile_csv(profile));
    std::cout << "wrote " << (out / "profile.csv").string() << " (" << profile.entries.size()
              << " scales, A_d=" << profile.grid_constant << ")\n";
    return 0;
}

int run_report(Experiment* exp, const fs::path& out) {
    if (exp->cloud) config_error("report needs a system, not a point cloud");
    ReportOptions opt;
    opt.scales = exp->scales;
    opt.budget = exp->budget;
    DimensionReport rep = dimension_report(exp->system, opt);
    json j = rep.to_json();
    j["provenance"] = exp->provenance;
    write_file(out / "report.json", j.dump(2) + "\n");
    write_file(out / "report.txt", rep.render_text());
    write_file(out / "rows.csv", rep.rows_csv());
    std::cout << rep.render_text();
    for (const auto& row : rep.rows)
        if (!row.direct_ok || !row.symbolic_ok) exp->partial = true;
    if (exp->partial)
        std::cout << "warning: some rows exhausted their budget and were flagged\n";
    return exp->partial ? 3 : 0;
}

int run_verify(Experiment* exp, const fs::path& out) {
    if (exp->cloud) config_error("verify needs a system, not a point cloud");
    std::ostringstream os;
    bool ok = true;
    auto line = [&](const std::string& name, bool pass) {
        os << (pass ? "[PASS] " : "[FAIL] ") << name << "\n";
        ok = ok && pass;
    };

    // covering regularity over the fixed-point profile
    PointCloud f = fixed_points(exp->system);
    std::vector<Fixed96> scales;
    for (double r : exp->scales) scales.push_back(Fixed96::from_double(r));
    CoveringProfile profile = covering_profile(f, scales);
    bool reg = true;
    for (std::size_t coarse = 0; coarse < profile.entries.size(); ++coarse) {
        for (std::size_t fine = coarse; fine < profile.entries.size(); ++fine) {
            double r = profile.entries[fine].r;
            double theta = std::log(profile.entries[coarse].r) / std::log(r);
            double s_r = profile.entries[fine].exponent;
            double s_t = profile.entries[coarse].exponent;
            int d = exp->system.dim;
            reg = reg && theta * s_t <= s_r + 1e-9;
            reg = reg && s_r <= d - (d - s_t) * theta +
                             profile.grid_constant / std::log(1.0 / r) + 1e-9;
        }
    }
    line("covering regularity on the fixed-point profile", reg);

    // rho submultiplicativity on random word pairs
    if (exp->system.kind == SystemKind::kGauss) {
        std::mt19937_64 rng(exp->seed);
        std::uniform_int_distribution<std::uint32_t> letter(
            0, static_cast<std::uint32_t>(
                   std::min<std::size_t>(exp->system.generator_count(), 64) - 1));
        std::uniform_int_distribution<int> len(1, 6);
        bool sub = true;
        for (int trial = 0; trial < 2000; ++trial) {
            Word a, b, ab;
            for (int k = len(rng); k > 0; --k) a.letters.push_back(letter(rng));
            for (int k = len(rng); k > 0; --k) b.letters.push_back(letter(rng));
            ab.letters = a.letters;
            ab.letters.insert(ab.letters.end(), b.letters.begin(), b.letters.end());
            double ra = contraction_norm(exp->system, a).hi();
            double rb = contraction_norm(exp->system, b).hi();
            double rab = contraction_norm(exp->system, ab).hi();
            sub = sub && rab <= ra * rb * (1 + 1e-12);
            sub = sub && rab >= ra * rb / exp->system.distortion * (1 - 1e-12);
        }
        line("rho approximate submultiplicativity", sub);
    }

    // psi endpoint identities on the instrumented scales
    DimBracket h = hausdorff_dim(exp->system, exp->budget.dim_tol, exp->budget.pressure_level);
    SortedCounter counter(f);
    bool endpoints = true;
    for (double r : exp->scales) {
        double s_r = box_exponent(counter.count(r), r);
        PsiResult pr =
            psi([&](double rr) { return rr >= 1.0 ? 0.0 : box_exponent(counter.count(rr), rr); },
                h.mid(), r, exp->system.dim, exp->budget.psi_eps);
        endpoints = endpoints && pr.value >= s_r - 1e-6 && pr.value >= h.mid() - 1e-9;
    }
    line("psi endpoint identities", endpoints);

    write_file(out / "verify.txt", os.str());
    std::cout << os.str();
    return ok ? 0 : 1;
}

int run_plotdata(Experiment* exp, const fs::path& out) {
    std::string path = exp->config.value("report_path", (out / "report.json").string());
    std::ifstream in(path);
    if (!in) config_error("cannot open report: " + path);
    json j;
    in >> j;
    if (!j.contains("rows") || !j.contains("fixed_profile") || !j.contains("hausdorff"))
        config_error("incomplete report");

    // measured fixed-point class on the doubly-logarithmic chart
    SampledFunction f_class;
    for (const auto& e : j["fixed_profile"]) {
        double r = e.at("r").get<double>();
        if (!(r < std::exp(-1.0))) continue;
        f_class.xs.push_back(std::log(std::log(1.0 / r)));
        f_class.values.push_back(e.at("exponent").get<double>());
    }
    if (f_class.xs.size() < 2) config_error("incomplete report");
    SampledFunction envelope = minimal_envelope(f_class, j["hausdorff"].at("lo").get<double>());

    std::ostringstream os;
    os << "x,s_fixed,psi,envelope,measured_limit_set\n";
    char buf[256];
    for (const auto& row : j["rows"]) {
        double r = row.at("r").get<double>();
        if (!(r < std::exp(-1.0))) continue;
        double x = std::log(std::log(1.0 / r));
        double meas = row.at("direct_ok").get<bool>() ? row.at("direct_exponent").get<double>()
                                                      : std::nan("");
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", x, f_class.eval(x),
                      row.at("psi").get<double>(), envelope.eval(x), meas);
        os << buf;
    }
    write_file(out / "plotdata.csv", os.str());
    std::cout << "wrote " << (out / "plotdata.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"box-counting laboratory for countable conformal iterated function systems"};
    app.require_subcommand(1);

    CliOptions cli;
    app.add_option("--config", cli.config_path, "experiment configuration (JSON)")->required();
    app.add_option("--out", cli.out_dir, "output directory");
    app.add_option("--budget-words", cli.budget_words, "word enumeration budget");
    app.add_option("--precision-bits", cli.precision_bits, "requested coordinate precision");
    app.add_option("--scales", cli.scales_spec, "scale grid base:kmin:kmax");

    auto* c_construct = app.add_subcommand("construct", "build a system from a recipe");
    auto* c_profile = app.add_subcommand("profile", "covering profile of a cloud or fixed points");
    auto* c_report = app.add_subcommand("report", "full dimension report");
    auto* c_verify = app.add_subcommand("verify", "run invariant checks");
    auto* c_plotdata = app.add_subcommand("plotdata", "export plot series from a report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Experiment exp;
    try {
        parse_config(&exp, cli);
    } catch (const std::exception& e) {
        config_error(e.what());
    }

    fs::path out(cli.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);

    try {
        if (c_construct->parsed()) return run_construct(&exp, out);
        if (c_profile->parsed()) return run_profile(&exp, out);
        if (c_report->parsed()) return run_report(&exp, out);
        if (c_verify->parsed()) return run_verify(&exp, out);
        if (c_plotdata->parsed()) return run_plotdata(&exp, out);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        if (msg.find("budget") != std::string::npos) {
            std::cerr << "warning: " << msg << " (partial artifacts)\n";
            return 3;
        }
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 2;
}
