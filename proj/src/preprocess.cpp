#include "coreuda/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "coreuda/errors.hpp"

namespace coreuda {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::finetune: return "finetune";
    case Stage::eval: return "eval";
  }
  return "pretrain";
}

Stage stage_from_name(const std::string& name) {
  if (name == "pretrain") return Stage::pretrain;
  if (name == "finetune") return Stage::finetune;
  if (name == "eval") return Stage::eval;
  throw ConfigError("unknown stage: " + name);
}

void AugmentationPolicy::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(flip_prob) || !prob_ok(color_dropout_prob) || !prob_ok(erase_prob))
    throw ConfigError("augmentation probabilities must lie in [0,1]");
  for (double s : std)
    if (s <= 0.0) throw ConfigError("augmentation std components must be positive");
  if (target_h <= 0 || target_w <= 0 || pad < 0) throw ConfigError("bad augmentation geometry");
}

namespace {

// Patch geometry shared by grayscale dropout and random erasing: area
// fraction uniform in [0.02, 0.4], aspect ratio uniform in [0.3, 3.3].
struct Patch {
  int y0, x0, h, w;
};

Patch sample_patch(int img_h, int img_w, Rng& rng) {
  double area = rng.uniform(0.02, 0.4) * img_h * img_w;
  double aspect = rng.uniform(0.3, 3.3);
  int ph = static_cast<int>(std::lround(std::sqrt(area * aspect)));
  int pw = static_cast<int>(std::lround(std::sqrt(area / aspect)));
  ph = std::clamp(ph, 1, img_h);
  pw = std::clamp(pw, 1, img_w);
  int y0 = rng.uniform_int(img_h - ph + 1);
  int x0 = rng.uniform_int(img_w - pw + 1);
  return {y0, x0, ph, pw};
}

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

}  // namespace

Image augment(const Image& img, const AugmentationPolicy& policy, Rng* rng) {
  if (img.height <= 0 || img.width <= 0 || img.data.size() != static_cast<size_t>(img.height) * img.width * 3)
    throw BadShape("augment: input must be a non-empty H x W x 3 image");
  policy.validate();

  Image out = resize_bilinear(img, policy.target_h, policy.target_w);
  if (policy.stage == Stage::eval) return out;
  if (rng == nullptr) throw BadShape("augment: training stages require an rng");

  // edge pad then random crop back to target size
  out = edge_pad(out, policy.pad);
  int dy = rng->uniform_int(2 * policy.pad + 1);
  int dx = rng->uniform_int(2 * policy.pad + 1);
  out = crop(out, dy, dx, policy.target_h, policy.target_w);

  if (rng->uniform() < policy.flip_prob) out = hflip(out);

  if (rng->uniform() < policy.color_dropout_prob) {
    Patch p = sample_patch(out.height, out.width, *rng);
    for (int y = p.y0; y < p.y0 + p.h; ++y)
      for (int x = p.x0; x < p.x0 + p.w; ++x) {
        float luma = static_cast<float>(kLumaR * out.at(y, x, 0) + kLumaG * out.at(y, x, 1) +
                                        kLumaB * out.at(y, x, 2));
        out.at(y, x, 0) = luma;
        out.at(y, x, 1) = luma;
        out.at(y, x, 2) = luma;
      }
  }

  if (policy.stage == Stage::finetune && rng->uniform() < policy.erase_prob) {
    Patch p = sample_patch(out.height, out.width, *rng);
    for (int y = p.y0; y < p.y0 + p.h; ++y)
      for (int x = p.x0; x < p.x0 + p.w; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(rng->uniform());
  }
  return out;
}

Tensor normalize(const Image& img, const AugmentationPolicy& policy) {
  Tensor out(Shape{img.height, img.width, 3});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = (static_cast<double>(img.at(y, x, c)) - policy.mean[static_cast<size_t>(c)]) /
                          policy.std[static_cast<size_t>(c)];
  return out;
}

Image denormalize(const Tensor& hwc, const AugmentationPolicy& policy) {
  Image out(hwc.dim(0), hwc.dim(1));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = static_cast<float>(hwc.at(y, x, c) * policy.std[static_cast<size_t>(c)] +
                                             policy.mean[static_cast<size_t>(c)]);
  return out;
}

Tensor make_batch(const std::vector<Image>& images, const AugmentationPolicy& policy) {
  if (images.empty()) throw EmptyBatch("make_batch: no images");
  const int h = images[0].height, w = images[0].width;
  Tensor batch(Shape{static_cast<int>(images.size()), 3, h, w});
  for (size_t i = 0; i < images.size(); ++i) {
    const Image& im = images[i];
    if (im.height != h || im.width != w) throw ShapeMismatch("make_batch: mixed image sizes");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          batch.at(static_cast<int>(i), c, y, x) =
              (static_cast<double>(im.at(y, x, c)) - policy.mean[static_cast<size_t>(c)]) /
              policy.std[static_cast<size_t>(c)];
  }
  return batch;
}

}  // namespace coreuda
