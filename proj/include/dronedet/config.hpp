#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dronedet/anchors.hpp"
#include "dronedet/augment.hpp"

namespace dronedet {

// Optimizer settings recorded from the training recipe. The toolkit does no
// training; these exist so configurations are complete and reproducible.
struct TrainingDefaults {
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double learning_rate = 1e-3;
  double lr_decay = 0.8;
  int lr_decay_every_epochs = 5;
  int batch_size = 16;
};

struct AnchorParams {
  double s_min = 0.15;
  double s_max = 0.95;
  std::vector<double> beta;  // empty = derive the tailored default
  int image_size = 512;

  std::vector<LayerAnchorConfig> layer_configs() const {
    return layer_configs_from_scales(
        s_min, s_max, beta.empty() ? default_beta(s_min, s_max, image_size) : beta,
        image_size);
  }
};

struct RunConfig {
  std::uint64_t seed = 42;
  int workers = 1;
  double iou_threshold = 0.5;
  AnchorParams anchors;
  AugmentConfig augment;
  TrainingDefaults training;
};

}  // namespace dronedet
