#pragma once

// Experiment harness tying the counting side to the formula side: empirical
// exponents against psi(r), dimension reports, and the envelope comparison
// between the limit-set class and the fixed-point class.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxlab/cloud.hpp"
#include "boxlab/covering.hpp"
#include "boxlab/ifs.hpp"
#include "boxlab/scaling.hpp"

namespace boxlab {

struct VerifyBudget {
    std::uint64_t word_budget = 10'000'000;
    std::uint64_t point_budget = 4'000'000;
    int tau_level = 1;          // m in tau_m
    int pressure_level = 12;
    double dim_tol = 2e-3;
    double psi_eps = 1e-4;
};

struct ResidualRow {
    double r = 0;
    double direct_exponent = 0;   // depth-limited cylinder-endpoint cloud
    double symbolic_exponent = 0; // log tau_m / log(1/r)
    double psi_value = 0;
    double psi_theta = 0;
    double residual = 0;          // direct - psi
    double slack = 0;             // documented per-row error budget
    bool direct_ok = false;
    bool symbolic_ok = false;
};

// Cylinder-endpoint cloud: both endpoints of every stopped cylinder at scale r.
PointCloud cylinder_cloud(const Cifs& system, double r, std::uint64_t word_budget,
                          bool* complete = nullptr);

// h_hint skips the internal Hausdorff solve when the caller already has one.
std::vector<ResidualRow> empirical_vs_formula(const Cifs& system,
                                              const std::vector<double>& scales,
                                              const VerifyBudget& budget = {},
                                              const DimBracket* h_hint = nullptr);

struct DimensionReport {
    int dim = 1;
    DimBracket h;
    CoveringProfile fixed_profile;    // exact counts of the fixed-point cloud
    double s_low = 0, s_up = 0;       // min/max exponent over the finest third
    DimInterval interval;
    bool exists_verdict = false;
    std::vector<ResidualRow> rows;
    double window_fraction = 1.0 / 3.0;
    // Trivial-bounds chain on the report's own estimates.
    double measured_dim_lower = 0, measured_dim_upper = 0;
    bool chain_ok = true;
    bool has_direct_rows = false;
    double slack = 0;

    nlohmann::json to_json() const;
    std::string render_text() const;
    std::string rows_csv() const;
};

struct ReportOptions {
    std::vector<double> scales;       // instrumented scales (decreasing); default geometric
    std::optional<std::vector<double>> profile_scales;  // extra scales for the F profile
    double window_fraction = 1.0 / 3.0;
    VerifyBudget budget;
};

DimensionReport dimension_report(const Cifs& system, const ReportOptions& options = {});

// Sup-norm gap on the window between the measured limit-set class and the
// minimal envelope (at lambda = lower Hausdorff estimate) of the measured
// fixed-point class.
double rate_form_check(const Cifs& system, const std::vector<double>& window_scales,
                       const VerifyBudget& budget = {});

}  // namespace boxlab
