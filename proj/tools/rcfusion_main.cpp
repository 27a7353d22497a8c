#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rcf/harness.hpp"

namespace {

bool parse_radar_flag(const std::string& value, bool& out, std::string& error) {
  if (value == "on") {
    out = true;
  } else if (value == "off") {
    out = false;
  } else {
    error = "--radar must be 'on' or 'off', got '" + value + "'";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse camera-radar fusion: scene generation, training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  int workers = 1;
  app.add_option("--workers", workers, "worker threads for scene-parallel stages")
      ->check(CLI::PositiveNumber);

  rcf::GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "render scenes from a config file");
  generate->add_option("--config", gen.config_path, "JSON configuration")->required();
  generate->add_option("--out", gen.out_dir, "output scene directory")->required();

  rcf::TrainArgs train;
  std::string train_radar = "on";
  CLI::App* train_cmd = app.add_subcommand("train", "fit a model on generated scenes");
  train_cmd->add_option("--scenes", train.scenes_dir, "scene directory")->required();
  train_cmd->add_option("--epochs", train.epochs, "training epochs")
      ->required()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", train.seed, "initialization and shuffle seed")->required();
  train_cmd->add_option("--radar", train_radar, "radar arm: on|off");
  train_cmd->add_option("--out", train.out_path, "output parameter file")->required();

  rcf::EvalArgs eval;
  std::string eval_radar = "on";
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
  eval_cmd->add_option("--scenes", eval.scenes_dir, "scene directory")->required();
  eval_cmd->add_option("--params", eval.params_path, "parameter file from train")->required();
  eval_cmd->add_option("--radar", eval_radar, "radar arm: on|off");
  eval_cmd->add_option("--out", eval.out_dir, "output metrics directory")->required();
  eval_cmd->add_flag("--oracle", eval.oracle, "replace the model with ground-truth outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rcf::kExitUsage;
  }

  std::string radar_error;
  if (generate->parsed()) {
    gen.workers = workers;
    return rcf::cmd_generate(gen);
  }
  if (train_cmd->parsed()) {
    if (!parse_radar_flag(train_radar, train.radar, radar_error)) {
      std::cerr << "error: " << radar_error << "\n";
      return rcf::kExitUsage;
    }
    train.workers = workers;
    return rcf::cmd_train(train);
  }
  if (!parse_radar_flag(eval_radar, eval.radar, radar_error)) {
    std::cerr << "error: " << radar_error << "\n";
    return rcf::kExitUsage;
  }
  eval.workers = workers;
  return rcf::cmd_eval(eval);
}
