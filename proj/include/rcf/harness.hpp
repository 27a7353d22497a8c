#pragma once

#include <cstdint>
#include <string>

namespace rcf {

struct GenerateArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 1;
};

struct TrainArgs {
  std::string scenes_dir;
  int epochs = 0;
  std::uint64_t seed = 0;
  bool radar = true;
  std::string out_path;
  int workers = 1;
};

struct EvalArgs {
  std::string scenes_dir;
  std::string params_path;
  bool radar = true;
  std::string out_dir;
  bool oracle = false;
  int workers = 1;
};

// Subcommand drivers; each returns the process exit code (0 success,
// 2 usage or configuration error, 3 runtime failure).
int cmd_generate(const GenerateArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

}  // namespace rcf
