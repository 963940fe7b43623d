// phail: run Poisson hail experiments from JSON configs.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "phail/harness.hpp"

namespace h = phail::harness;

namespace {

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << h::error_record(kind, message, code).dump() << '\n';
  return code;
}

int print_outcome(const h::Outcome& o, const std::string& out) {
  std::cout << "wrote " << out << "/manifest.json (status " << o.manifest.value("status", "?") << ")\n";
  if (!o.error.is_null()) std::cerr << o.error.dump() << '\n';
  return o.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phail: Poisson hail queueing experiments"};
  app.require_subcommand(1);

  std::string config, out, manifest;
  bool verify = false;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("config", config, "experiment config (JSON)")->required();
  run->add_option("-o,--out", out, "output directory (overrides output_dir)");

  auto* sweep = app.add_subcommand("sweep", "run every cell of the config's sweep grid");
  sweep->add_option("config", config, "experiment config (JSON)")->required();
  sweep->add_option("-o,--out", out, "output directory (overrides output_dir)");

  auto* validate = app.add_subcommand("validate-config", "check a config without running it");
  validate->add_option("config", config, "experiment config (JSON)")->required();

  auto* show = app.add_subcommand("show-manifest", "print a run manifest");
  show->add_option("manifest", manifest, "manifest.json or its directory")->required();
  show->add_flag("--verify", verify, "recompute output checksums");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return h::kUsage;
  }

  try {
    if (*show) {
      std::filesystem::path p = manifest;
      if (std::filesystem::is_directory(p)) p /= "manifest.json";
      std::cout << nlohmann::json::parse(h::read_file(p)).dump(2) << '\n';
      if (!verify) return h::kOk;
      auto bad = h::verify_manifest(p);
      for (auto& b : bad) std::cerr << b << '\n';
      std::cout << (bad.empty() ? "checksums ok\n" : "checksums FAILED\n");
      return bad.empty() ? h::kOk : h::kUsage;
    }
    auto cfg = h::load_config(config);
    if (*validate) {
      h::validate_config(cfg);
      std::size_t cells = cfg.sweep ? cfg.sweep->cells() : 1;
      std::cout << "ok: kind " << cfg.kind << ", dimension " << cfg.dimension << ", " << cells << " cell(s)\n";
      return h::kOk;
    }
    if (out.empty()) out = cfg.output_dir;
    auto workers = h::worker_count();
    if (*run) {
      if (cfg.sweep) throw phail::ConfigError("config has a sweep block; use `phail sweep`");
      return print_outcome(h::run_experiment(cfg, out, workers), out);
    }
    return print_outcome(h::run_sweep(cfg, out, workers), out);
  } catch (const phail::ConfigError& e) {
    return report("config", e.what(), h::kConfig);
  } catch (const phail::CapacityError& e) {
    return report("capacity", e.what(), h::kCapacity);
  } catch (const phail::UsageError& e) {
    return report("usage", e.what(), h::kUsage);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), h::kUsage);
  }
}
