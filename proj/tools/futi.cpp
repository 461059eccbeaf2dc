// futi: batch front end for LBP extraction, dataset splits, training,
// evaluation, report comparison and synthetic data generation.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "futi/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ultrasound tongue image classification with LBP texture fusion"};
  app.require_subcommand(1);

  std::string config_path, seed, out, scenario, model;
  std::vector<std::string> sets, reports;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed, "run seed (u64)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--scenario", scenario,
                    "speaker_dependent | multi_speaker | speaker_independent");
    sub->add_option("--model", model, "dnn | cnn | fusionnet");
    sub->add_option("--set", sets, "override a config key: key=value (repeatable)");
  };

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"extract-lbp", "write one LBP histogram row per image"},
      {"split", "write the train/test split for a scenario"},
      {"train", "train a model and write checkpoint, history and metadata"},
      {"evaluate", "score a checkpoint and write report and confusion matrix"},
      {"compare", "tabulate accuracy and precision across reports"},
      {"synth", "generate a synthetic labelled frame set with manifest"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "compare") sub->add_option("reports", reports, "report.txt files");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    futi::config::RunConfig cfg;
    if (!config_path.empty()) cfg = futi::config::RunConfig::from_file(config_path);
    if (!seed.empty()) cfg.set("seed", seed);
    if (!out.empty()) cfg.set("out", out);
    if (!scenario.empty()) cfg.set("scenario", scenario);
    if (!model.empty()) cfg.set("model", model);
    if (!reports.empty()) {
      std::string joined;
      for (const auto& r : reports) joined += (joined.empty() ? "" : ",") + r;
      cfg.set("reports", joined);
    }
    for (const auto& kv : sets) cfg.set_assignment(kv);
    return futi::cli::run_command(command, cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "futi " << command << ": " << e.what() << '\n';
    return 1;
  }
}
