#include "commands.hpp"

#include "bsrg/errors.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>

using namespace bsrg;
using namespace bsrg::cli;

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> budget;
  std::optional<int> samples;
  std::string out;
  std::vector<std::string> kinds;
};

void common_flags(CLI::App* sub, Args& a) {
  sub->add_option("--config", a.config, "JSON run configuration");
  sub->add_option("--seed", a.seed, "RNG seed");
  sub->add_option("--budget", a.budget, "integrand evaluations per estimate");
  sub->add_option("--out", a.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-spin RG desk-scale verification driver"};
  app.require_subcommand(1);
  Args a;

  using Command = std::function<int(const RunConfig&, const Overrides&, std::ostream&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto* vb = app.add_subcommand("verify-bounds", "symbol scans and randomized sandwich bounds");
  common_flags(vb, a);
  vb->add_option("--samples", a.samples, "random fields");
  commands.emplace_back(vb, cmd_verify_bounds);
  auto* st = app.add_subcommand("stokes", "contour-shift identity and wall positivity");
  common_flags(st, a);
  st->add_option("--samples", a.samples, "wall samples per t");
  commands.emplace_back(st, cmd_stokes);
  auto* sc = app.add_subcommand("scaling", "nonperturbative error-scaling experiments");
  common_flags(sc, a);
  sc->add_option("--kind", a.kinds, "step1, step2, step3-wall, corollary or all");
  commands.emplace_back(sc, cmd_scaling);
  auto* rg = app.add_subcommand("rg-step", "full integral against the three-step approximation");
  common_flags(rg, a);
  commands.emplace_back(rg, cmd_rg_step);
  auto* ex = app.add_subcommand("export-operators", "write the operator matrices");
  common_flags(ex, a);
  commands.emplace_back(ex, cmd_export_operators);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    Overrides o;
    if (!a.out.empty()) o.out = a.out;
    o.seed = a.seed;
    o.budget = a.budget;
    o.samples = a.samples;
    if (o.samples && *o.samples <= 0) throw UsageError("--samples must be positive");
    if (o.budget && *o.budget <= 0) throw UsageError("--budget must be positive");
    o.kinds = a.kinds;

    const RunConfig cfg = a.config.empty() ? run_config_from_json(nlohmann::json::object()) : load_run_config(a.config);
    for (const auto& [sub, run] : commands)
      if (sub->parsed()) return run(cfg, o, std::cout);
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kViolation;
  }
  return kUsage;
}
