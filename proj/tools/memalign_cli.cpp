// memalign command-line front end.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memalign/config_io.hpp"
#include "memalign/error.hpp"
#include "memalign/experiment.hpp"
#include "memalign/io_util.hpp"
#include "memalign/snapshot.hpp"

namespace fs = std::filesystem;
using namespace memalign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr const char* kOutDirEnv = "MEMALIGN_OUT_DIR";

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

// --out-dir beats $MEMALIGN_OUT_DIR beats the config file.
ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig config = load_config_file(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.out_dir) {
    config.out_dir = *opts.out_dir;
  } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    config.out_dir = env;
  }
  return config;
}

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> values;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ConfigError("values", "empty entry in --values");
    values.push_back(item.substr(first, last - first + 1));
  }
  if (values.empty()) throw ConfigError("values", "--values needs at least one entry");
  return values;
}

int cmd_run(const CommonOptions& opts, const std::optional<std::string>& snapshot_path) {
  const auto config = resolve_config(opts);
  const auto result = run_experiment(config);
  const fs::path report_path = fs::path(config.out_dir) / "report.json";
  write_file_atomically(report_path, report_to_json(config, result.report));
  if (snapshot_path) write_snapshot_file(result.final_bank, *snapshot_path);

  const auto& r = result.report;
  std::cout << "target accuracy      " << r.target_accuracy << " (initial " << r.initial_target_accuracy << ")\n"
            << "miss rate minibatch  " << r.miss_rate_minibatch << "\n"
            << "miss rate memory     " << r.miss_rate_memory << "\n"
            << "mean pair similarity " << r.mean_pair_similarity << "\n"
            << "report               " << report_path.string() << "\n";
  if (snapshot_path) std::cout << "memory snapshot      " << *snapshot_path << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param_name, const std::string& values_list,
              std::size_t jobs) {
  const auto param = sweep_param_from_string(param_name);
  const auto values = split_values(values_list);
  const auto config = resolve_config(opts);
  const auto table = sweep(config, param, values, jobs);

  const fs::path dir(config.out_dir);
  write_file_atomically(dir / "sweep.csv", sweep_to_csv(table));
  write_file_atomically(dir / "sweep.json", sweep_to_json(config, table));
  std::cout << sweep_to_csv(table);
  return kExitOk;
}

int cmd_inspect(const std::string& path) {
  const auto bank = read_snapshot_file(path);
  const auto spread = intra_class_spread(bank);
  std::cout << "policy      " << to_string(bank.policy().variant) << "\n"
            << "gamma       " << bank.policy().gamma << "\n"
            << "generation  " << bank.generation() << "\n"
            << "categories  " << bank.categories() << "\n"
            << "dimension   " << bank.dim() << "\n"
            << "total       " << bank.total_size() << "\n\n"
            << "category      count   capacity   variance_proxy\n";
  for (std::size_t c = 0; c < bank.categories(); ++c) {
    const int cat = static_cast<int>(c);
    std::cout << std::setw(8) << c << std::setw(11) << bank.size(cat) << std::setw(11) << bank.capacity(cat)
              << std::setw(17) << std::setprecision(6) << spread[c] << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-based instance alignment: experiments, sweeps and memory snapshots"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::optional<std::string> snapshot_path;
  auto* run = app.add_subcommand("run", "Run one experiment and write report.json");
  run->add_option("config", run_opts.config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", run_opts.seed, "Override the config seed");
  run->add_option("--out-dir", run_opts.out_dir, "Output directory (default: $MEMALIGN_OUT_DIR, then config)");
  run->add_option("--memory-snapshot", snapshot_path, "Write the final memory bank to this .membank file");

  CommonOptions sweep_opts;
  std::string param;
  std::string values;
  std::size_t jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one parameter over several values");
  sweep_cmd->add_option("config", sweep_opts.config_path, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("--param", param, "lambda3 | K | gamma | policy")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", sweep_opts.seed, "Override the first seed");
  sweep_cmd->add_option("--out-dir", sweep_opts.out_dir, "Output directory (default: $MEMALIGN_OUT_DIR, then config)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a .membank snapshot");
  inspect->add_option("snapshot", inspect_path, ".membank file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts, snapshot_path);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, param, values, jobs);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "snapshot error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
