// carat: size/power tables, asymptotic theory and sequential allocation for
// two-arm trials under covariate-adaptive randomization.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "carat/config.hpp"
#include "carat/harness.hpp"
#include "carat/randomize.hpp"
#include "carat/theory.hpp"

namespace {

using namespace carat;

struct RunFlags {
  std::string plan;
  std::string out;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::string adjust;
  std::size_t mc_b = 0;
  std::size_t reps = 0;
};

void apply_overrides(ExperimentPlan& plan, const RunFlags& flags) {
  for (CellSpec& cell : plan.cells) {
    if (!flags.adjust.empty()) {
      cell.methods = {Method::wald};
      if (flags.adjust == "stratified") cell.methods.push_back(Method::adj_stratified);
      if (flags.adjust == "general") cell.methods.push_back(Method::adj_general);
      if (flags.adjust == "cr") cell.methods.push_back(Method::adj_cr);
    }
    if (flags.mc_b > 0) cell.mc_b = flags.mc_b;
    if (flags.reps > 0) cell.replications = flags.reps;
  }
}

int run_grid(const RunFlags& flags, bool null_only) {
  ExperimentPlan plan = plan_from_config(Config::load(flags.plan));
  apply_overrides(plan, flags);
  if (null_only)
    for (const CellSpec& cell : plan.cells)
      if (cell.scenario.delta != 0.0) throw ConfigError("size plans must use delta = 0; use 'carat power' instead");

  std::vector<CellResult> results;
  for (const CellSpec& cell : plan.cells) {
    results.push_back(run_cell(cell, plan.seed, flags.threads));
    std::cerr << "done " << to_string(cell.scenario.family) << '/' << to_string(cell.scenario.design.tag)
              << "/n=" << cell.scenario.n << "/delta=" << cell.scenario.delta << '\n';
  }
  const auto rows = report_rows(results);
  write_table(std::cout, rows);
  if (!flags.out.empty()) {
    std::ofstream csv(flags.out, std::ios::binary);
    if (!csv) throw ConfigError("cannot write " + flags.out);
    write_csv(csv, rows);
  }
  return 0;
}

void print_summary(const Scenario& sc, const AsymptoticSummary& s, double alpha) {
  const double size = predicted_size(s, alpha);
  std::cout << std::left;
  auto line = [](std::string_view key, const auto& value) {
    std::cout << "  " << std::setw(18) << key << value << '\n';
  };
  std::cout << "scenario " << to_string(sc.family) << " / " << to_string(sc.design.tag) << '\n';
  std::cout << std::setprecision(10);
  line("E[Y]", s.e_y);
  line("Var(Y)", s.var_y);
  line("E[Var(Y|X)]", s.e_var_y_given_x);
  line("denominator", s.denom);
  line("sigma_h^2", s.sigma_h_sq);
  line("s_variance", s.s_variance);
  line("classification", to_string(s.classification));
  line("predicted_size", size);
  std::cout << "\nfamily,design,e_y,var_y,e_var_y_given_x,denom,sigma_h_sq,s_variance,classification,predicted_size\n"
            << std::setprecision(17) << to_string(sc.family) << ',' << to_string(sc.design.tag) << ',' << s.e_y << ','
            << s.var_y << ',' << s.e_var_y_given_x << ',' << s.denom << ',' << s.sigma_h_sq << ',' << s.s_variance
            << ',' << to_string(s.classification) << ',' << size << '\n';
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) out.push_back(std::stoi(token));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-adaptive randomization: Wald test size, adjusted tests and allocation"};
  app.require_subcommand(1);

  RunFlags size_flags;
  auto* size = app.add_subcommand("size", "Simulated size table for a null plan");
  RunFlags power_flags;
  auto* power = app.add_subcommand("power", "Simulated power over a plan's delta grid");
  for (auto [cmd, flags] : {std::pair{size, &size_flags}, std::pair{power, &power_flags}}) {
    cmd->add_option("--plan", flags->plan, "Plan config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", flags->out, "CSV output path");
    cmd->add_option("--threads", flags->threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--adjust", flags->adjust, "Adjusted statistic to add to the Wald test")
        ->check(CLI::IsMember({"none", "stratified", "general", "cr"}));
    cmd->add_option("--mc-b", flags->mc_b, "Monte Carlo replays for sigma_h^2")->check(CLI::Range(2, 1 << 30));
    cmd->add_option("--reps", flags->reps, "Override replications per cell")->check(CLI::PositiveNumber);
  }

  std::string scenario_path;
  double sigma_h_sq = -1.0;
  double alpha = 0.05;
  std::size_t theory_b = 500;
  std::size_t theory_sequences = 20;
  auto* theory = app.add_subcommand("theory", "Asymptotic variance and predicted size of the Wald test");
  theory->add_option("--scenario", scenario_path, "Scenario config file")->required()->check(CLI::ExistingFile);
  theory->add_option("--sigma-h2", sigma_h_sq, "sigma_h^2 for designs without bounded within-stratum imbalance");
  theory->add_option("--alpha", alpha, "Significance level");
  theory->add_option("--mc-b", theory_b, "Replays per sequence when sigma_h^2 is simulated");
  theory->add_option("--sequences", theory_sequences, "Covariate sequences when sigma_h^2 is simulated");

  std::string design_tag;
  std::string factors = "2,2";
  std::uint64_t seed = 1;
  DesignSpec assign_spec;
  bool stream = false;
  auto* assign = app.add_subcommand("assign", "Sequential allocation of profiles read from stdin");
  assign->add_option("--design", design_tag, "Design tag (cr, sb, sbc, ps, hh, pb, bcd)")->required();
  assign->add_flag("--stream", stream, "Read one profile per line (1-based levels), emit the arm as 1/0");
  assign->add_option("--factors", factors, "Comma-separated level counts");
  assign->add_option("--seed", seed, "RNG seed");
  assign->add_option("--block-size", assign_spec.block_size, "Permuted block size");
  assign->add_option("--coin-p", assign_spec.coin_p, "Biased coin probability");
  assign->add_option("--hh-weights", assign_spec.hh_weights, "Hu-Hu weights: overall, margins..., stratum");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*size) return run_grid(size_flags, true);
    if (*power) return run_grid(power_flags, false);
    if (*theory) {
      Scenario sc = scenario_from_config(Config::load(scenario_path));
      double sh = 0.0;
      if (sc.design.tag != DesignTag::cr && !bounds_within_stratum(sc.design.tag)) {
        if (sigma_h_sq >= 0.0) {
          sh = sigma_h_sq;
        } else {
          const Config cfg = Config::load(scenario_path);
          Rng rng = make_stream({plan_from_config(cfg).seed, 0x7468656F7279ULL});
          sh = simulate_sigma_h_sq(sc, theory_b, theory_sequences, rng);
        }
      }
      print_summary(sc, asymptotic_s_variance(sc, sh), alpha);
      return 0;
    }
    if (*assign) {
      assign_spec.tag = parse_design(design_tag);
      const CovariateSpace space = CovariateSpace::uniform(parse_levels(factors));
      auto design = make_design(assign_spec, space);
      Rng rng = make_stream({seed});
      std::string line;
      while (std::getline(std::cin, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream in(line);
        CovariateProfile profile;
        for (int level; in >> level;) profile.levels.push_back(level);
        if (profile.levels.empty()) continue;
        std::cout << indicator(design->assign(profile, rng)) << '\n';
        if (stream) std::cout.flush();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "carat: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
