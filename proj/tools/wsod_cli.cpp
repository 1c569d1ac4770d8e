// Experiment runner: generates synthetic worlds, runs the budget sweep and
// the self-training shift study from declarative json configs, evaluates
// saved models, and emits plot-ready per-policy tables.

#include <CLI11.hpp>
#include <wsod/dataset_io.hpp>
#include <wsod/experiment.hpp>
#include <wsod/model_io.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 0;
  int trials = 0;
};

wsod::ExperimentConfig load_with_overrides(const CommonArgs& args) {
  wsod::ExperimentConfig cfg = wsod::load_experiment_config(args.config);
  cfg.master_seed = args.seed;
  cfg.output_dir = args.out;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.trials > 0) cfg.n_trials = args.trials;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment config json")->required();
  cmd->add_option("--seed", args.seed, "master seed")->required();
  cmd->add_option("--out", args.out, "output directory")->required();
  cmd->add_option("--workers", args.workers, "override worker count");
  cmd->add_option("--trials", args.trials, "override trial count");
}

int run_generate(const CommonArgs& args, bool gzip) {
  wsod::ExperimentConfig cfg = wsod::load_experiment_config(args.config);
  cfg.world.seed = args.seed;
  cfg.world.validate();
  const wsod::World world = wsod::generate_world(cfg.world);

  std::filesystem::create_directories(args.out);
  wsod::DatasetMeta meta;
  meta.num_classes = cfg.world.num_classes;
  meta.feature_dim = cfg.world.feature_dim;
  meta.scene_width = cfg.world.scene_width;
  meta.scene_height = cfg.world.scene_height;
  const std::string ext = gzip ? ".jsonl.gz" : ".jsonl";

  meta.name = "source";
  wsod::save_dataset(args.out + "/source" + ext, world.source.frames, meta);
  meta.name = "stream";
  wsod::save_dataset(args.out + "/stream" + ext, world.target.frames(), meta,
                     /*include_gt=*/false);
  meta.name = "stream_oracle";
  wsod::save_dataset(args.out + "/stream_oracle" + ext, world.target.frames(), meta);
  meta.name = "test";
  wsod::save_dataset(args.out + "/test" + ext, world.target_test.frames, meta);

  nlohmann::json summary{{"seed", cfg.world.seed},
                         {"num_classes", cfg.world.num_classes},
                         {"feature_dim", cfg.world.feature_dim},
                         {"n_labeled", static_cast<int>(world.source.frames.size())},
                         {"n_stream", static_cast<int>(world.target.size())},
                         {"n_test", static_cast<int>(world.target_test.frames.size())},
                         {"shift_magnitude", cfg.world.shift_magnitude},
                         {"observed_shift", wsod::shift_report(world)}};
  std::ofstream summary_out(args.out + "/world.json");
  summary_out << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int run_sweep(const CommonArgs& args) {
  const wsod::ExperimentConfig cfg = load_with_overrides(args);
  const wsod::ExperimentOutput out = wsod::run_budget_sweep(cfg);
  wsod::write_sweep_csvs(cfg.output_dir, out);
  for (const wsod::AggregateResult& row : out.aggregate) {
    std::printf("%-16s k=%-4d mAP %.3f +- %.3f  (n=%d)\n", row.policy.c_str(), row.budget,
                row.mean_map, row.std_map, row.n);
  }
  std::cout << "tables written to " << cfg.output_dir << '\n';
  if (out.failed_cells > 0) {
    std::cerr << out.failed_cells << " cell(s) aborted\n";
    return 2;
  }
  return 0;
}

int run_shift(const CommonArgs& args) {
  const wsod::ExperimentConfig cfg = load_with_overrides(args);
  const wsod::ExperimentOutput out = wsod::run_shift_study(cfg);
  wsod::write_shift_csvs(cfg.output_dir, out);
  std::ifstream table(cfg.output_dir + "/shift_table.txt");
  std::cout << table.rdbuf();
  std::cout << "tables written to " << cfg.output_dir << '\n';
  if (out.failed_cells > 0) {
    std::cerr << out.failed_cells << " cell(s) aborted\n";
    return 2;
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_path) {
  const wsod::DetectorModel model = wsod::load_model(model_path);
  const wsod::Dataset dataset = wsod::load_dataset(data_path);
  wsod::LabeledSet set;
  set.frames = dataset.frames;
  const wsod::EvalResult result = wsod::evaluate(model, set);

  nlohmann::json j{{"map", result.map}, {"n_classes_evaluated", result.n_classes_evaluated}};
  j["per_class_ap"] = nlohmann::json::array();
  for (const auto& ap : result.per_class_ap) {
    if (ap) {
      j["per_class_ap"].push_back(*ap);
    } else {
      j["per_class_ap"].push_back(nullptr);
    }
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_report(const std::string& in_path, const std::string& out_dir) {
  const std::vector<wsod::AggregateResult> rows = wsod::read_aggregate_csv(in_path);
  const std::vector<std::string> written = wsod::emit_plots_data(rows, out_dir);
  for (const std::string& path : written) std::cout << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-stream experiments for weakly supervised detector adaptation"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  bool gen_gzip = false;
  CLI::App* gen = app.add_subcommand("generate", "generate a world and save its datasets");
  gen->add_option("--config", gen_args.config, "experiment config json")->required();
  gen->add_option("--seed", gen_args.seed, "world seed")->required();
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_flag("--gzip", gen_gzip, "compress datasets");

  CommonArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "run the policy/budget sweep");
  add_common(sweep, sweep_args);

  CommonArgs shift_args;
  CLI::App* shift = app.add_subcommand("shift", "run the self-training shift study");
  add_common(shift, shift_args);

  std::string eval_model;
  std::string eval_data;
  std::string eval_out;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on a saved dataset");
  eval->add_option("--model", eval_model, "model json")->required();
  eval->add_option("--data", eval_data, "dataset jsonl[.gz]")->required();
  eval->add_option("--out", eval_out, "also write the result json here");

  std::string report_in;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "emit per-policy plot csv files");
  report->add_option("--in", report_in, "results_aggregate.csv")->required();
  report->add_option("--out", report_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate(gen_args, gen_gzip);
    if (sweep->parsed()) return run_sweep(sweep_args);
    if (shift->parsed()) return run_shift(shift_args);
    if (eval->parsed()) return run_eval(eval_model, eval_data, eval_out);
    if (report->parsed()) return run_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
