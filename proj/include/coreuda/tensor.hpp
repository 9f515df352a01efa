#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace coreuda {

using Shape = std::vector<int>;

inline long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_to_string(const Shape& s);

// Dense row-major tensor of doubles. Training math runs in double so that
// finite-difference gradient checks are meaningful; checkpoints quantize to
// 32-bit floats at the container boundary.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

  static Tensor from_data(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long long numel() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  // 2-d / 3-d / 4-d accessors (row-major).
  double& at(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double at(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double& at(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double at(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double& at(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  double at(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

bool all_finite(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(const double* p, long long n);

// FNV-1a over the raw bytes of a double buffer; used for parameter checksums.
std::uint64_t fnv1a_bytes(const void* data, size_t nbytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Runs fn over [0, n) split into contiguous chunks, one chunk per worker.
// Every index is touched by exactly one invocation, so writes to disjoint
// outputs are deterministic for any worker count. Reductions must not use
// this directly; accumulate per chunk and combine in chunk order instead.
void parallel_chunks(long long n, const std::function<void(long long, long long)>& fn);

int worker_count();

}  // namespace coreuda
