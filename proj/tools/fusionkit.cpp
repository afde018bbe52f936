#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fusionkit/bundle.hpp"
#include "fusionkit/checkpoint.hpp"
#include "fusionkit/config.hpp"
#include "fusionkit/grid.hpp"
#include "fusionkit/matcher.hpp"
#include "fusionkit/ops.hpp"
#include "fusionkit/oracles/suites.hpp"
#include "fusionkit/trainer.hpp"

namespace fs = std::filesystem;
using namespace fusionkit;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kDiverged = 3 };

// --seed, then FUSIONKIT_SEED, then whatever the config says.
std::optional<std::uint64_t> effective_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  const char* env = std::getenv("FUSIONKIT_SEED");
  if (!env || !*env) return std::nullopt;
  std::size_t pos = 0;
  const std::string s = env;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("FUSIONKIT_SEED is not an integer: " + s);
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

int cmd_train(const fs::path& config, const std::optional<std::uint64_t>& seed_flag, const fs::path& out) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config).experiment;
    if (auto s = effective_seed(seed_flag)) cfg.train.seed = *s;
    resolve(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << config.string() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << config.string() << ": " << e.what() << '\n';
    return kUsage;
  }
  try {
    const RunResult r = train(cfg);
    const auto dir = persist(r, cfg, out);
    for (const auto& rep : r.reports) std::cout << rep.task << ' ' << rep.metric << ' ' << rep.value << '\n';
    std::cout << "params " << r.param_count << " (+" << r.head_param_count << " head)\n";
    std::cout << "wrote " << dir.string() << '\n';
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  }
  return kOk;
}

int cmd_grid(const fs::path& config, const fs::path& out, std::optional<std::size_t> jobs) {
  std::vector<ExperimentConfig> configs;
  std::size_t n_jobs = 1;
  try {
    const ConfigFile file = load_config(config);
    if (!file.grid) throw ConfigError("no [grid] section");
    const GridSpec& g = *file.grid;
    if (g.interfaces.empty() || g.combos.empty() || g.seeds.empty()) throw ConfigError("grid is empty");
    configs = expand_grid(file.experiment, g);
    for (const auto& c : configs) resolve(c);
    n_jobs = jobs.value_or(g.jobs);
  } catch (const ConfigError& e) {
    std::cerr << "grid error: " << config.string() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "grid error: " << config.string() << ": " << e.what() << '\n';
    return kUsage;
  }
  try {
    auto progress = [](std::size_t done, std::size_t total, const RunResult& r) {
      std::fprintf(stderr, "[%zu/%zu] %s %s seed %llu: %s %.4f (%.1fs)\n", done, total, r.combo.c_str(),
                   to_string(r.interface_kind), static_cast<unsigned long long>(r.seed),
                   r.report(Split::test).metric.c_str(), r.report(Split::test).value, r.wall_seconds);
    };
    const GridReport rep = run_grid(configs, n_jobs, progress);
    for (std::size_t i = 0; i < configs.size(); ++i) persist(rep.runs[i], configs[i], out / "runs");
    write_text(out / "grid.md", rep.markdown);
    write_text(out / "grid.csv", rep.csv);
    std::cout << rep.markdown;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  }
  return kOk;
}

int cmd_export(const std::vector<fs::path>& bundle_paths, const fs::path& checkpoint, const fs::path& out) {
  std::vector<HiddenStateBundle> bundles;
  for (const auto& p : bundle_paths) bundles.push_back(read_bundle(p));
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  Interface iface = interface_from_checkpoint(ckpt);
  if (bundles.size() != iface.n_models()) {
    std::cerr << "export-features: checkpoint expects " << iface.n_models() << " bundle(s), got " << bundles.size()
              << '\n';
    return kUsage;
  }
  MatchPolicy policy;
  policy.target_rule = TargetRule::explicit_size;
  policy.layers = iface.layers();
  policy.dim_rule = dim_rule_from_checkpoint(ckpt);
  std::uint32_t framerate = bundles.front().framerate_hz;
  for (const auto& b : bundles) {
    if (b.frames() > policy.frames) {
      policy.frames = b.frames();
      framerate = b.framerate_hz;
    }
  }
  std::vector<HiddenStateBundle> matched;
  try {
    matched = match_bundles(bundles, policy);
  } catch (const std::invalid_argument& e) {
    std::cerr << "export-features: " << e.what() << '\n';
    return kUsage;
  }
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (matched[i].dim() != iface.input_dims()[i]) {
      std::cerr << "export-features: bundle " << bundle_paths[i].string() << " has D=" << matched[i].dim()
                << " but the checkpoint expects D=" << iface.input_dims()[i] << '\n';
      return kUsage;
    }
  }
  std::vector<Tensor> stacks;
  for (const auto& b : matched) stacks.push_back(b.data);
  Tensor fused;
  {
    NoGradGuard no_grad;
    fused = iface.forward(stacks, Mode::eval);
  }
  std::string id;
  for (const auto& b : bundles) id += (id.empty() ? "" : "+") + b.model_id;
  HiddenStateBundle result(id + "/" + to_string(iface.config().kind), framerate,
                           round_to_float32(reshape(fused, {1, fused.dim(0), fused.dim(1)})));
  write_bundle(result, out);
  std::cout << "wrote " << out.string() << ": L=1 T=" << result.frames() << " D=" << result.dim() << '\n';
  return kOk;
}

void print_suite(const oracles::SuiteResult& r, std::uint64_t seed) {
  std::printf("%-6s %s  worst %.3e (tol %.0e) over %zu cases, %.2fs\n", r.name.c_str(), r.passed ? "ok  " : "FAIL",
              r.worst, r.tolerance, r.cases, r.seconds);
  if (!r.worst_case.empty()) std::printf("       worst case: %s\n", r.worst_case.c_str());
  for (const auto& n : r.notes) std::printf("       %s\n", n.c_str());
  for (const auto& f : r.failures) std::printf("       failed (suite seed %llu): %s\n", static_cast<unsigned long long>(seed), f.c_str());
}

int cmd_verify(const std::string& suite, const std::optional<fs::path>& fixture, std::uint64_t seed) {
  std::vector<oracles::SuiteResult> results;
  if (suite == "grad") {
    results.push_back(oracles::run_grad_suite());
  } else if (suite == "ctc") {
    results.push_back(oracles::run_ctc_suite(100, seed));
  } else if (suite == "interp") {
    results.push_back(oracles::run_interp_suite(1000, seed));
  } else if (suite == "eer") {
    results.push_back(oracles::run_eer_suite(1000, seed));
    results.push_back(oracles::run_edit_suite(10000, seed));
  } else if (suite == "format") {
    results.push_back(oracles::run_format_suite(fixture, seed));
  }
  bool ok = true;
  for (const auto& r : results) {
    print_suite(r, seed);
    ok = ok && r.passed;
  }
  return ok ? kOk : kFailure;
}

int cmd_inspect(const fs::path& path) {
  const HiddenStateBundle b = read_bundle(path);
  std::cout << "file         " << path.string() << '\n'
            << "version      " << kBundleVersion << '\n'
            << "model_id     " << b.model_id << '\n'
            << "layers       " << b.layers() << '\n'
            << "frames       " << b.frames() << '\n'
            << "dim          " << b.dim() << '\n'
            << "framerate_hz " << b.framerate_hz << '\n'
            << "bytes        " << fs::file_size(path) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer and model fusion over frozen synthetic encoders"};
  app.require_subcommand(1);

  fs::path config, out = "results";
  std::optional<std::uint64_t> seed;
  auto* train_cmd = app.add_subcommand("train", "Train one experiment and write its artifacts");
  train_cmd->add_option("--config", config, "Experiment config")->required();
  train_cmd->add_option("--seed", seed, "Training seed (overrides FUSIONKIT_SEED and the config)");
  train_cmd->add_option("--out", out, "Output directory")->capture_default_str();

  std::optional<std::size_t> jobs;
  auto* grid_cmd = app.add_subcommand("grid", "Run every (combo, interface, seed) cell and tabulate");
  grid_cmd->add_option("--config", config, "Grid config")->required();
  grid_cmd->add_option("--out", out, "Output directory")->capture_default_str();
  grid_cmd->add_option("--jobs", jobs, "Cells trained in parallel (default: grid.jobs)")->check(CLI::PositiveNumber);

  std::vector<fs::path> bundles;
  fs::path checkpoint, export_out;
  auto* export_cmd = app.add_subcommand("export-features", "Fuse bundles through a trained interface");
  export_cmd->add_option("--bundles", bundles, "Hidden-state bundles, one per model")->required();
  export_cmd->add_option("--checkpoint", checkpoint, "Interface checkpoint")->required();
  export_cmd->add_option("--out", export_out, "Output bundle (L=1)")->required();

  std::string suite;
  std::optional<fs::path> fixture;
  std::uint64_t verify_seed = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Check library routines against reference oracles");
  verify_cmd->add_option("--suite", suite, "Oracle suite")
      ->required()
      ->check(CLI::IsMember({"grad", "ctc", "interp", "eer", "format"}));
  verify_cmd->add_option("--fixture", fixture, "Bundle that must decode (format suite)");
  verify_cmd->add_option("--seed", verify_seed, "Case generator seed")->capture_default_str();

  fs::path bundle_path;
  auto* inspect_cmd = app.add_subcommand("inspect-bundle", "Print a bundle's header fields");
  inspect_cmd->add_option("bundle", bundle_path, "Bundle file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(config, seed, out);
    if (*grid_cmd) return cmd_grid(config, out, jobs);
    if (*export_cmd) return cmd_export(bundles, checkpoint, export_out);
    if (*verify_cmd) {
      if (auto s = effective_seed(std::nullopt); s && verify_cmd->count("--seed") == 0) verify_seed = *s;
      return cmd_verify(suite, fixture, verify_seed);
    }
    if (*inspect_cmd) return cmd_inspect(bundle_path);
  } catch (const FormatError& e) {
    std::cerr << "format error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
