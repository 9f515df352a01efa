#pragma once

#include <array>
#include <functional>
#include <vector>

#include "coreuda/dataset.hpp"
#include "coreuda/image.hpp"

namespace coreuda {

// Number of generator models needed to translate between all ordered camera
// pairs: C * (C - 1).
int count_style_models(int num_cameras);

// Per-channel affine color map, clipped to [0, 1].
struct ColorStyleTransform {
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> offset{0.0, 0.0, 0.0};

  Image apply(const Image& img) const;
  ColorStyleTransform inverse() const;
  // this transform followed by `then`
  ColorStyleTransform compose(const ColorStyleTransform& then) const;
};

// Fixed per-camera color signature of the source domain. Keyed only by the
// camera index so translations are stable across runs.
ColorStyleTransform source_camera_transform(int camera);

// Deterministic stand-in for a trained camera-to-camera translator: undoes
// the source camera's color signature and applies the destination's.
// The pair (c, c) is the identity.
ColorStyleTransform builtin_style_transform(int cam_src, int cam_dst);
std::function<Image(const Image&)> builtin_style_fn(int cam_src, int cam_dst);

using ImageFn = std::function<Image(const Image&)>;
using DiscriminatorFn = std::function<double(const Image&)>;
using TranslatorFn = std::function<Image(const Image&, int cam_src, int cam_dst)>;

struct GanLossReport {
  double loss_gan_G = 0.0;
  double loss_gan_F = 0.0;
  double loss_cycle = 0.0;
  double loss_identity = 0.0;
  double loss_cyclegan_total = 0.0;
  double loss_total = 0.0;
  double lambda_cyc = 0.0;
  // discriminator-side objectives, reported alongside the generator terms
  double loss_disc_X = 0.0;
  double loss_disc_Y = 0.0;
};

// Least-squares adversarial terms plus cycle and identity L1 terms. Computes
// values only; no parameters are updated.
GanLossReport cyclegan_losses(const ImageFn& G, const ImageFn& F, const DiscriminatorFn& D_X,
                              const DiscriminatorFn& D_Y, const std::vector<Image>& batch_x,
                              const std::vector<Image>& batch_y, double lambda_cyc);

// Merges train and test splits into one training pool and adds, for each real
// image from camera c, one styled copy per other camera. Identities are
// remapped densely (train identities first, then unseen test identities).
std::vector<ImageRecord> assemble_full_training_set(const std::vector<ImageRecord>& source,
                                                    const TranslatorFn& translator);

}  // namespace coreuda
