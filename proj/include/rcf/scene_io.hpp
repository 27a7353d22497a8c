#pragma once

#include <string>
#include <vector>

#include "rcf/planner.hpp"
#include "rcf/world.hpp"

namespace rcf {

// Scene files ("rcf-scene-v1") store the scenario configuration, ground
// truth, and radar returns. Camera feature grids are not stored: they are
// re-rendered deterministically from the per-frame feature seed, at the
// channel width the consumer needs.
void save_scene(const std::string& path, const ScenarioConfig& scenario,
                const std::vector<Frame>& frames);

struct LoadedScene {
  ScenarioConfig scenario;
  std::vector<Frame> frames;
};

// channels == 0 keeps the width the scene was generated with.
LoadedScene load_scene(const std::string& path, int channels = 0);

// Model files ("rcf-params-v1") store the configuration, anchor
// initializations, every named tensor, and a content hash that is verified
// on load.
void save_model(const std::string& path, const PlannerModel& model, bool radar_enabled);

struct LoadedModel {
  PlannerModel model;
  bool radar_enabled = true;
};

LoadedModel load_model(const std::string& path);

}  // namespace rcf
