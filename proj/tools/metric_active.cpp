#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metric_active/csv.hpp"
#include "metric_active/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  std::string config;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<std::string> k;
  std::vector<std::string> budgets;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> generator;
  std::optional<std::string> family;
  std::optional<std::string> out;

  nlohmann::json patch() const {
    using nlohmann::json;
    json p = json::object();
    if (gamma) p["gamma"] = *gamma;
    if (delta) p["delta"] = *delta;
    if (k) {
      if (*k == "auto") {
        p["k"] = "auto";
      } else {
        try {
          std::size_t used = 0;
          const long long v = std::stoll(*k, &used);
          if (used != k->size()) throw std::invalid_argument(*k);
          p["k"] = v;
        } catch (const std::exception&) {
          throw metric_active::ConfigError("k", "expected a positive integer or auto, got '" + *k + "'");
        }
      }
    }
    if (!budgets.empty()) {
      json b = json::array();
      for (const auto& s : budgets) {
        if (s == "all" || s == "theorem") {
          b.push_back(s);
          continue;
        }
        try {
          std::size_t used = 0;
          const long long v = std::stoll(s, &used);
          if (used != s.size()) throw std::invalid_argument(s);
          b.push_back(v);
        } catch (const std::exception&) {
          throw metric_active::ConfigError("budgets", "expected an integer, all or theorem, got '" + s + "'");
        }
      }
      p["budgets"] = b;
    }
    if (!seeds.empty()) p["seeds"] = seeds;
    if (generator) p["generator"]["model"] = *generator;
    if (family) p["family"] = *family;
    if (out) p["output"] = *out;
    return p;
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--gamma", o.gamma, "margin gamma in (0, 1)");
  cmd->add_option("--delta", o.delta, "failure probability delta in (0, 1)");
  cmd->add_option("--k", o.k, "sample size per ball, or auto");
  cmd->add_option("--budget", o.budgets, "query budget: integer, all or theorem (repeatable)");
  cmd->add_option("--seed", o.seeds, "run seed (repeatable)");
  cmd->add_option("--generator", o.generator, "eta model: monotonic1d, massart1d, curved2d, custom");
  cmd->add_option("--family", o.family, "ball family: intervals or euclidean");
  cmd->add_option("--out", o.out, "output directory");
}

void print_row(const metric_active::MetricsRow& r) {
  std::cout << "n=" << r.n << " budget=" << r.budget << " seed=" << r.seed << " k=" << r.k
            << (r.k < r.required_k ? " (below required " + std::to_string(r.required_k) + ")" : "")
            << " queries=" << r.queries_used << " mistakes=" << r.mistakes << " unlabeled=" << r.unlabeled_in_scope
            << " correct=" << r.correct << "/" << r.in_scope << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neighborhood-based active learning simulator"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, verify_o;
  bool inject_fault = false;
  auto* run_cmd = app.add_subcommand("run", "run every (n, budget, seed) cell and write the CSVs");
  add_common(run_cmd, run_o);
  auto* sweep_cmd = app.add_subcommand("sweep", "cross-product sweep with per-(n, budget) aggregation");
  add_common(sweep_cmd, sweep_o);
  auto* verify_cmd = app.add_subcommand("verify", "check the learner's invariants against the theory oracle");
  add_common(verify_cmd, verify_o);
  verify_cmd->add_flag("--inject-fault", inject_fault, "flip one ball estimate to exercise the audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      const auto cfg = metric_active::load_config(run_o.config, run_o.patch());
      for (const auto& r : metric_active::run_experiment(cfg)) print_row(r);
      std::cout << "wrote " << cfg.output.string() << '\n';
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = metric_active::load_config(sweep_o.config, sweep_o.patch());
      const auto res = metric_active::sweep(cfg);
      for (const auto& c : res.cells) {
        std::cout << "n=" << c.n << " budget=" << c.budget << " runs=" << c.runs
                  << " mean_mistakes=" << metric_active::format_double(c.mean_mistakes)
                  << " success_fraction=" << metric_active::format_double(c.success_fraction) << '\n';
      }
      for (const auto& [n, b] : res.min_success_budget) {
        std::cout << "n=" << n << " min_success_budget=" << (b ? std::to_string(*b) : "none") << '\n';
      }
      std::cout << "wrote " << cfg.output.string() << '\n';
      return kExitOk;
    }
    const auto cfg = metric_active::load_config(verify_o.config, verify_o.patch());
    metric_active::VerifyOptions opts;
    opts.inject_fault = inject_fault;
    const auto rep = metric_active::verify(cfg, opts);
    std::size_t failed = 0;
    for (const auto& c : rep.checks) {
      if (c.passed) continue;
      ++failed;
      std::cout << "FAIL " << c.name << (c.cell.empty() ? "" : " [" + c.cell + "]") << ": " << c.detail << '\n';
    }
    if (rep.injected_ball) std::cout << "injected fault into ball " << *rep.injected_ball << '\n';
    std::cout << rep.checks.size() - failed << "/" << rep.checks.size() << " checks passed\n";
    std::cout << "wrote " << cfg.output.string() << '\n';
    return rep.passed() ? kExitOk : kExitFailure;
  } catch (const metric_active::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const metric_active::CostCapError& e) {
    std::cerr << "refusing: " << e.what()
              << "\nlower generator.n or raise theory.cost_cap in the config to verify this instance\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
