#pragma once

#include <array>

#include "coreuda/image.hpp"
#include "coreuda/rng.hpp"
#include "coreuda/tensor.hpp"

namespace coreuda {

enum class Stage { pretrain, finetune, eval };

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);

struct AugmentationPolicy {
  int target_h = 256;
  int target_w = 128;
  int pad = 10;
  double flip_prob = 0.5;
  double color_dropout_prob = 0.4;
  double erase_prob = 0.5;  // applied in the finetune stage only
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  Stage stage = Stage::pretrain;

  void validate() const;
};

// Training pipeline: resize -> edge-pad -> random crop -> random hflip ->
// grayscale patch dropout -> random erase (finetune only).
// Eval stage resizes only and needs no rng.
Image augment(const Image& img, const AugmentationPolicy& policy, Rng* rng);

// (v - mean[c]) / std[c] per channel; output is H x W x 3 doubles.
Tensor normalize(const Image& img, const AugmentationPolicy& policy);

// Inverse of normalize, for round-trip checks.
Image denormalize(const Tensor& hwc, const AugmentationPolicy& policy);

// Stacks normalized images into an N x 3 x H x W batch tensor.
Tensor make_batch(const std::vector<Image>& images, const AugmentationPolicy& policy);

}  // namespace coreuda
