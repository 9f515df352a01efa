#include "coreuda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace coreuda {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<long long>(data.size())) {
    throw std::invalid_argument("Tensor::from_data: shape " + shape_to_string(shape) +
                                " does not match data size " + std::to_string(data.size()));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

bool all_finite(const Tensor& t) {
  for (double v : t.vec()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (long long i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_norm(const double* p, long long n) {
  double s = 0.0;
  for (long long i = 0; i < n; ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

std::uint64_t fnv1a_bytes(const void* data, size_t nbytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (size_t i = 0; i < nbytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

int worker_count() {
  static int cached = [] {
    if (const char* env = std::getenv("COREUDA_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 8u));
  }();
  return cached;
}

void parallel_chunks(long long n, const std::function<void(long long, long long)>& fn) {
  if (n <= 0) return;
  int workers = worker_count();
  if (workers <= 1 || n < 256) {
    fn(0, n);
    return;
  }
  long long chunks = std::min<long long>(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(chunks));
  for (long long c = 0; c < chunks; ++c) {
    long long begin = n * c / chunks;
    long long end = n * (c + 1) / chunks;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace coreuda
