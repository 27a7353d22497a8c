#pragma once

#include <string>

#include "rcf/train.hpp"
#include "rcf/world.hpp"

namespace rcf {

// Everything one JSON config file drives: scene generation, the model
// configuration, and the training schedule. `map_template` additionally
// accepts "mixed", which rotates the three templates across scenes.
struct GenerationConfig {
  int num_scenes = 8;
  ScenarioConfig scenario;
  FusionConfig model;
  TrainConfig train;
};

// Parses and validates; missing fields keep their defaults. Throws
// std::runtime_error naming the offending field for unknown keys, type
// mismatches, and out-of-range values.
GenerationConfig parse_config(const std::string& text);
GenerationConfig load_config(const std::string& path);

// Full echo of every field, pretty-printed.
std::string config_to_json(const GenerationConfig& cfg);
void save_config(const GenerationConfig& cfg, const std::string& path);

}  // namespace rcf
