#pragma once

#include <string>

#include "tabletrec/adam.hpp"
#include "tabletrec/losses.hpp"
#include "tabletrec/merge.hpp"
#include "tabletrec/raster.hpp"

namespace tabletrec {

struct Schedule {
  int keyframes_per_fragment = 9;
  int epochs_separate = 32;
  int epochs_joint = 9;
  std::vector<int> merge_epochs{8, 16, 24};  // within the separate phase
  int joint_merge_interval = 3;              // plus one merge before and after the joint phase
  double keyframe_translation = 0.1;         // meters
  double keyframe_rotation_deg = 15.0;
  double distance_lr_after_second_merge = 2e-4;
};

struct Config {
  Schedule schedule;
  MergeConfig merge;
  WeightCheckConfig weight_check;
  LossWeights weights;
  LossConfig loss;
  RasterConfig raster;
  AdamConfig adam;
  int superpixel_block = 12;  // one superpixel per block x block pixels
  double slic_compactness = 10.0;
  int working_long_side = 320;  // images are downscaled to this long side
  uint64_t seed = 0;
};

// Key-value text config ("key = value", '#' comments). Unknown keys are errors.
Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);
std::string serialize_config(const Config& config);

}  // namespace tabletrec
