#include "carat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "carat/adjust.hpp"
#include "carat/glm.hpp"
#include "carat/theory.hpp"

namespace carat {

namespace {

std::string format_real(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_real(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("not a number: '" + std::string(text) + "'");
  return value;
}

std::size_t parse_count(std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("not a count: '" + std::string(text) + "'");
  return value;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

constexpr std::uint64_t kTrialStream = 0;
constexpr std::uint64_t kReplayStream = 1;
constexpr std::size_t kMaxRedraws = 1000;

struct ReplicationOutcome {
  std::vector<TestReport> reports;  // one per requested method
  std::size_t redraws = 0;
  double sigma_h_sq = 0.0;
};

ReplicationOutcome run_replication(const CellSpec& cell, std::uint64_t seed, std::uint64_t key,
                                   std::size_t rep) {
  const Scenario& sc = cell.scenario;
  const GlmFamily family = family_of(sc);
  ReplicationOutcome out;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt > kMaxRedraws)
      throw Error("replication " + std::to_string(rep) + " stayed non-estimable after " +
                  std::to_string(kMaxRedraws) + " redraws");
    Rng rng = make_stream({seed, key, rep, attempt, kTrialStream});
    Trial trial = run_trial(sc, rng);
    try {
      const std::span<const TrialRecord> data(trial.records);
      const FitResult fit = fit_working_model(data, family);
      const double ybar = sample_mean(data);
      std::optional<StratumSummary> strata;
      auto within = [&]() -> const StratumSummary& {
        if (!strata) strata = pooled_within_stratum_variance(data, sc.space);
        return *strata;
      };

      out.reports.clear();
      for (Method method : cell.methods) {
        switch (method) {
          case Method::wald:
            out.reports.push_back(wald_statistic(fit, cell.alpha));
            break;
          case Method::adj_stratified:
            out.reports.push_back(
                adjusted_statistic_stratified(fit, within().sigma_nu_sq, ybar, family, sc.n, cell.alpha));
            break;
          case Method::adj_general: {
            std::vector<CovariateProfile> profiles;
            profiles.reserve(trial.records.size());
            for (const TrialRecord& r : trial.records) profiles.push_back(r.profile);
            auto design = make_design(sc.design, sc.space);
            Rng replay = make_stream({seed, key, rep, attempt, kReplayStream});
            out.sigma_h_sq = estimate_sigma_h_mc(profiles, *design, within().stratum_means, cell.mc_b, replay);
            out.reports.push_back(adjusted_statistic_general(fit, within().sigma_nu_sq, out.sigma_h_sq, ybar,
                                                             family, sc.n, cell.alpha));
            break;
          }
          case Method::adj_cr:
            out.reports.push_back(
                adjusted_statistic_cr(fit, overall_sample_variance(data), ybar, family, sc.n, cell.alpha));
            break;
        }
      }
      return out;
    } catch (const NonEstimable&) {
      ++out.redraws;
    } catch (const DegenerateVariance&) {
      ++out.redraws;
    }
  }
}

bool has_method(const CellSpec& cell, Method m) {
  return std::find(cell.methods.begin(), cell.methods.end(), m) != cell.methods.end();
}

std::optional<double> predicted_for(const CellSpec& cell, Method method, std::optional<double> sigma_h_sq) {
  const Scenario& sc = cell.scenario;
  if (sc.delta != 0.0) return std::nullopt;
  if (method != Method::wald) {
    if (method == adjusted_method_for(sc.design.tag)) return cell.alpha;
    return std::nullopt;
  }
  double sh = 0.0;
  if (sc.design.tag != DesignTag::cr && !bounds_within_stratum(sc.design.tag)) {
    if (!sigma_h_sq) return std::nullopt;
    sh = *sigma_h_sq;
  }
  try {
    return predicted_size(asymptotic_s_variance(sc, sh), cell.alpha);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t CellSpec::stream_key() const {
  const Scenario& s = scenario;
  std::ostringstream key;
  key << to_string(s.family) << '|' << format_real(s.phi) << '|' << format_real(s.mu) << '|'
      << format_real(s.delta) << "|beta";
  for (double b : s.beta) key << ',' << format_real(b);
  key << "|space";
  for (std::size_t k = 0; k < s.space.factors(); ++k) {
    key << ';' << s.space.levels(k);
    for (double q : s.space.factor_probs()[k]) key << ',' << format_real(q);
  }
  key << '|' << s.n << '|' << to_string(s.design.tag) << '|' << s.design.block_size << '|'
      << format_real(s.design.coin_p) << '|' << to_string(s.design.ps_criterion) << "|hh";
  for (double w : s.design.hh_weights) key << ',' << format_real(w);
  return stable_hash(key.str());
}

Method adjusted_method_for(DesignTag design) {
  if (design == DesignTag::cr) return Method::adj_cr;
  if (bounds_within_stratum(design)) return Method::adj_stratified;
  return Method::adj_general;
}

Trial run_trial(const Scenario& scenario, Rng& rng) {
  const GlmFamily family = family_of(scenario);
  Trial trial;
  trial.records.resize(scenario.n);
  for (TrialRecord& r : trial.records) r.profile = sample_profile(scenario.space, rng);

  auto design = make_design(scenario.design, scenario.space);
  for (TrialRecord& r : trial.records) r.arm = design->assign(r.profile, rng);

  for (TrialRecord& r : trial.records) r.y = family.sample(linear_predictor(scenario, r.profile, r.arm), rng);
  trial.snapshot = imbalance_snapshot(design->state());
  return trial;
}

const MethodSummary& CellResult::summary(Method method) const {
  for (const MethodSummary& m : methods)
    if (m.method == method) return m;
  throw Error("cell did not evaluate method " + std::string(to_string(method)));
}

CellResult run_cell(const CellSpec& cell, std::uint64_t seed, std::size_t threads) {
  cell.scenario.validate();
  if (cell.replications < 1) throw ConfigError("replications must be at least 1");
  if (cell.methods.empty()) throw ConfigError("a cell needs at least one test method");
  if (has_method(cell, Method::adj_general) && cell.mc_b < 2) throw ConfigError("mc_b must be at least 2");
  // Fail on domain violations up front rather than deep inside a worker.
  for (std::size_t j = 0; j < cell.scenario.space.strata(); ++j) {
    const CovariateProfile profile = decode_stratum(StratumId{j}, cell.scenario.space);
    const GlmFamily family = family_of(cell.scenario);
    for (Arm arm : {Arm::control, Arm::treatment})
      if (!family.eta_in_domain(linear_predictor(cell.scenario, profile, arm)))
        throw DomainError("stratum " + std::to_string(j) + " has a linear predictor outside the domain of " +
                          std::string(to_string(cell.scenario.family)));
  }

  const std::uint64_t key = cell.stream_key();
  std::vector<ReplicationOutcome> outcomes(cell.replications);
  parallel_for(cell.replications, threads,
               [&](std::size_t rep) { outcomes[rep] = run_replication(cell, seed, key, rep); });

  CellResult result;
  result.spec = cell;
  const auto reps = static_cast<double>(cell.replications);
  for (const ReplicationOutcome& o : outcomes) result.non_estimable += o.redraws;
  if (has_method(cell, Method::adj_general)) {
    double total = 0.0;
    for (const ReplicationOutcome& o : outcomes) total += o.sigma_h_sq;
    result.mean_sigma_h_sq = total / reps;
  }

  for (std::size_t m = 0; m < cell.methods.size(); ++m) {
    MethodSummary s;
    s.method = cell.methods[m];
    double mean = 0.0;
    for (const ReplicationOutcome& o : outcomes) {
      s.rejections += o.reports[m].reject ? 1 : 0;
      mean += o.reports[m].statistic;
    }
    mean /= reps;
    double ss = 0.0;
    for (const ReplicationOutcome& o : outcomes) ss += (o.reports[m].statistic - mean) * (o.reports[m].statistic - mean);
    s.stat_mean = mean;
    s.stat_var = cell.replications > 1 ? ss / (reps - 1.0) : 0.0;
    s.rate = static_cast<double>(s.rejections) / reps;
    s.mc_se = std::sqrt(s.rate * (1.0 - s.rate) / reps);
    s.predicted_size = predicted_for(cell, s.method, result.mean_sigma_h_sq);
    result.methods.push_back(s);
  }
  return result;
}

CellResult run_size_cell(const CellSpec& cell, std::uint64_t seed, std::size_t threads) {
  if (cell.scenario.delta != 0.0) throw ConfigError("size cells require delta = 0");
  return run_cell(cell, seed, threads);
}

std::vector<CellResult> run_power_curve(const CellSpec& base, std::span<const double> deltas,
                                        std::uint64_t seed, std::size_t threads) {
  if (deltas.empty()) throw ConfigError("power curve needs at least one delta");
  std::vector<CellResult> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    CellSpec cell = base;
    cell.scenario.delta = d;
    out.push_back(run_cell(cell, seed, threads));
  }
  return out;
}

std::vector<CellResult> run_plan(const ExperimentPlan& plan, std::size_t threads) {
  std::vector<CellResult> out;
  out.reserve(plan.cells.size());
  for (const CellSpec& cell : plan.cells) out.push_back(run_cell(cell, plan.seed, threads));
  return out;
}

double simulate_sigma_h_sq(const Scenario& scenario, std::size_t replays, std::size_t sequences, Rng& rng) {
  if (sequences < 1) throw ConfigError("need at least one covariate sequence");
  const GlmFamily family = family_of(scenario);
  Scenario null = scenario;
  null.delta = 0.0;
  std::vector<double> means(scenario.space.strata());
  for (std::size_t j = 0; j < means.size(); ++j)
    means[j] = family.mean(linear_predictor(null, decode_stratum(StratumId{j}, scenario.space), Arm::control));

  auto design = make_design(scenario.design, scenario.space);
  double total = 0.0;
  std::vector<CovariateProfile> profiles(scenario.n);
  for (std::size_t s = 0; s < sequences; ++s) {
    for (CovariateProfile& p : profiles) p = sample_profile(scenario.space, rng);
    total += estimate_sigma_h_mc(profiles, *design, means, replays, rng);
  }
  return total / static_cast<double>(sequences);
}

// ---------------------------------------------------------------------------

std::vector<ReportRow> report_rows(std::span<const CellResult> results) {
  std::vector<ReportRow> rows;
  for (const CellResult& r : results) {
    for (const MethodSummary& m : r.methods) {
      ReportRow row;
      row.family = to_string(r.spec.scenario.family);
      row.design = to_string(r.spec.scenario.design.tag);
      row.n = r.spec.scenario.n;
      row.delta = r.spec.scenario.delta;
      row.method = to_string(m.method);
      row.rate = m.rate;
      row.mc_se = m.mc_se;
      row.stat_mean = m.stat_mean;
      row.stat_var = m.stat_var;
      row.predicted_size = m.predicted_size;
      row.non_estimable = r.non_estimable;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {
constexpr std::string_view kCsvHeader =
    "family,design,n,delta,method,rate,mc_se,stat_mean,stat_var,predicted_size,non_estimable";
}

void write_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << kCsvHeader << '\n';
  for (const ReportRow& r : rows) {
    out << r.family << ',' << r.design << ',' << r.n << ',' << format_real(r.delta) << ',' << r.method << ','
        << format_real(r.rate) << ',' << format_real(r.mc_se) << ',' << format_real(r.stat_mean) << ','
        << format_real(r.stat_var) << ',' << (r.predicted_size ? format_real(*r.predicted_size) : "") << ','
        << r.non_estimable << '\n';
  }
}

std::vector<ReportRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("CSV header does not match the report format");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 11) throw ConfigError("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
    ReportRow r;
    r.family = f[0];
    r.design = f[1];
    r.n = parse_count(f[2]);
    r.delta = parse_real(f[3]);
    r.method = f[4];
    r.rate = parse_real(f[5]);
    r.mc_se = parse_real(f[6]);
    r.stat_mean = parse_real(f[7]);
    r.stat_var = parse_real(f[8]);
    if (!f[9].empty()) r.predicted_size = parse_real(f[9]);
    r.non_estimable = parse_count(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_table(std::ostream& out, std::span<const ReportRow> rows) {
  out << std::left << std::setw(24) << "family" << std::setw(7) << "design" << std::right << std::setw(6) << "n"
      << std::setw(8) << "delta" << "  " << std::left << std::setw(15) << "method" << std::right << std::setw(9)
      << "rate%" << std::setw(8) << "se%" << std::setw(10) << "mean" << std::setw(9) << "var" << std::setw(10)
      << "pred%" << std::setw(8) << "redraw" << '\n';
  out << std::fixed;
  for (const ReportRow& r : rows) {
    out << std::left << std::setw(24) << r.family << std::setw(7) << r.design << std::right << std::setw(6) << r.n
        << std::setw(8) << std::setprecision(3) << r.delta << "  " << std::left << std::setw(15) << r.method
        << std::right << std::setw(9) << std::setprecision(2) << 100.0 * r.rate << std::setw(8) << 100.0 * r.mc_se
        << std::setw(10) << std::setprecision(4) << r.stat_mean << std::setw(9) << r.stat_var;
    if (r.predicted_size)
      out << std::setw(10) << std::setprecision(2) << 100.0 * *r.predicted_size;
    else
      out << std::setw(10) << "-";
    out << std::setw(8) << r.non_estimable << '\n';
  }
  out.unsetf(std::ios_base::floatfield);
}

}  // namespace carat
