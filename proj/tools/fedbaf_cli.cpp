#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedbaf/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitAnalysis = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedBaF federated-learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, run_dir, paired_dir, checks_csv;
  std::vector<std::string> compare_configs;
  std::optional<std::uint64_t> seed;
  int trials = 1;
  double threshold = 0.8;
  bool debug_alpha = false;

  auto* pretrain = app.add_subcommand("pretrain", "Train a foundation model checkpoint");
  pretrain->add_option("--config", config_path, "Experiment config file")->required();
  pretrain->add_option("--out", out_path, "Checkpoint output path (overrides [pretrain] out)");
  pretrain->add_option("--seed", seed, "Override the pretrain seed");

  auto* run = app.add_subcommand("run", "Run one federated experiment");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--out", out_path, "Output directory (overrides [run] out_dir)");
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--trials", trials, "Repeat with consecutive master seeds");
  run->add_flag("--debug-alpha", debug_alpha, "Include the server-private alpha in rounds.csv");

  auto* compare = app.add_subcommand("compare", "Run several arms and tabulate results");
  compare->add_option("--config", compare_configs, "Config file, one per arm (repeatable)")
      ->required();
  compare->add_option("--threshold", threshold, "Global accuracy threshold for rounds-to-threshold");
  compare->add_option("--trials", trials, "Trials per arm");
  compare->add_option("--out", out_path, "Directory for compare.json / compare.txt");

  auto* analyze = app.add_subcommand("analyze", "Run analysis checks over a completed run");
  analyze->add_option("--run", run_dir, "Run directory")->required();
  analyze->add_option("--checks", checks_csv,
                      "Comma-separated subset of prop1,prop2,dist,noise,extraction,chi,mac");
  analyze->add_option("--paired-run", paired_dir, "Static-alpha twin run (extraction check)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) {
      fedbaf::ExperimentConfig config = fedbaf::load_config(config_path);
      if (seed) config.pretrain.seed = *seed;
      auto outcome = fedbaf::cmd_pretrain(config, out_path);
      std::printf("foundation checkpoint: %s\n", outcome.checkpoint_path.c_str());
      std::printf("pretrain accuracy: train %.4f test %.4f\n", outcome.train_acc,
                  outcome.test_acc);
    } else if (run->parsed()) {
      fedbaf::ExperimentConfig config = fedbaf::load_config(config_path);
      auto outcome = fedbaf::cmd_run(config, out_path, trials, seed, debug_alpha);
      for (const auto& t : outcome.trials)
        std::printf("trial seed=%llu final_acc=%.4f best_acc=%.4f -> %s\n",
                    static_cast<unsigned long long>(t.seed), t.final_acc, t.best_acc,
                    t.dir.c_str());
      if (outcome.trials.size() > 1)
        std::printf("best of %zu trials: %.4f\n", outcome.trials.size(), outcome.best_final_acc);
    } else if (compare->parsed()) {
      std::vector<fedbaf::ExperimentConfig> configs;
      for (const auto& path : compare_configs) configs.push_back(fedbaf::load_config(path));
      auto report = fedbaf::cmd_compare(configs, threshold, trials, out_path);
      std::fputs(report.text.c_str(), stdout);
    } else if (analyze->parsed()) {
      std::vector<std::string> checks;
      std::string cur;
      for (char ch : checks_csv) {
        if (ch == ',') {
          if (!cur.empty()) checks.push_back(cur);
          cur.clear();
        } else {
          cur += ch;
        }
      }
      if (!cur.empty()) checks.push_back(cur);
      std::string json = fedbaf::cmd_analyze(run_dir, checks, paired_dir);
      std::fputs(json.c_str(), stdout);
      std::fputs("\n", stdout);
    }
  } catch (const fedbaf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fedbaf::AnalysisPreconditionError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const fedbaf::DegenerateRoundError& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
