#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carat/core.hpp"
#include "carat/randomize.hpp"

namespace carat {

/// One grid cell: a fully resolved scenario plus how to evaluate it.
struct CellSpec {
  Scenario scenario;
  std::vector<Method> methods{Method::wald};
  std::size_t replications = 5000;
  double alpha = 0.05;
  std::size_t mc_b = 500;
  std::string label;  // plan section the cell came from

  /// Stable key of the scenario; seeds the cell's random streams. Cells
  /// with equal scenarios draw identical streams in any plan.
  std::uint64_t stream_key() const;
};

struct ExperimentPlan {
  std::uint64_t seed = 0;
  std::vector<CellSpec> cells;
};

/// The adjusted test matching a design's imbalance class.
Method adjusted_method_for(DesignTag design);

struct Trial {
  std::vector<TrialRecord> records;
  ImbalanceSnapshot snapshot;
};

/// Covariates for all n patients, then sequential assignment, then
/// responses from the true model.
Trial run_trial(const Scenario& scenario, Rng& rng);

struct MethodSummary {
  Method method = Method::wald;
  std::size_t rejections = 0;
  double rate = 0.0;
  double mc_se = 0.0;  // sqrt(rate (1 - rate) / R)
  double stat_mean = 0.0;
  double stat_var = 0.0;
  std::optional<double> predicted_size;
};

struct CellResult {
  CellSpec spec;
  std::vector<MethodSummary> methods;
  std::size_t non_estimable = 0;
  std::optional<double> mean_sigma_h_sq;  // when the general adjustment ran

  const MethodSummary& summary(Method method) const;
};

CellResult run_cell(const CellSpec& cell, std::uint64_t seed, std::size_t threads = 1);

/// Null cell; throws ConfigError when delta != 0.
CellResult run_size_cell(const CellSpec& cell, std::uint64_t seed, std::size_t threads = 1);

std::vector<CellResult> run_power_curve(const CellSpec& base, std::span<const double> deltas,
                                        std::uint64_t seed, std::size_t threads = 1);

std::vector<CellResult> run_plan(const ExperimentPlan& plan, std::size_t threads = 1);

/// Population-level sigma_h^2 for a design: Monte Carlo replays on
/// `sequences` sampled covariate sequences of the scenario's size with the
/// true stratum means, averaged.
double simulate_sigma_h_sq(const Scenario& scenario, std::size_t replays, std::size_t sequences, Rng& rng);

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string family;
  std::string design;
  std::size_t n = 0;
  double delta = 0.0;
  std::string method;
  double rate = 0.0;
  double mc_se = 0.0;
  double stat_mean = 0.0;
  double stat_var = 0.0;
  std::optional<double> predicted_size;
  std::size_t non_estimable = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

std::vector<ReportRow> report_rows(std::span<const CellResult> results);

/// Columns: family, design, n, delta, method, rate, mc_se, stat_mean,
/// stat_var, predicted_size, non_estimable. Reals use the shortest
/// round-trip representation; a missing predicted size is an empty field.
void write_csv(std::ostream& out, std::span<const ReportRow> rows);
std::vector<ReportRow> read_csv(std::istream& in);

/// Aligned text table with rates in percent.
void write_table(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace carat
