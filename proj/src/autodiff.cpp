#include "coreuda/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "coreuda/errors.hpp"

namespace coreuda {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, const char* op) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor(value.shape());
  n->value = std::move(value);
  n->op = op;
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  n->parents = std::move(parents);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.value().shape() != b.value().shape()) {
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_to_string(a.value().shape()) +
                        " vs " + shape_to_string(b.value().shape()));
  }
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor(value.shape());
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(n);
}

void backward(const Var& root) {
  // Iterative post-order DFS for a reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto n = make_node(std::move(out), {a.node(), b.node()}, "add");
  n->backward_fn = [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& par = *self.parents[static_cast<size_t>(p)];
      if (!par.requires_grad) continue;
      for (long long i = 0; i < self.grad.numel(); ++i) par.grad[i] += self.grad[i];
    }
  };
  return Var(n);
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto n = make_node(std::move(out), {a.node(), b.node()}, "sub");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad)
      for (long long i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (long long i = 0; i < self.grad.numel(); ++i) pb.grad[i] -= self.grad[i];
  };
  return Var(n);
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto n = make_node(std::move(out), {a.node(), b.node()}, "mul");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad)
      for (long long i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    if (pb.requires_grad)
      for (long long i = 0; i < self.grad.numel(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
  };
  return Var(n);
}

Var scale(const Var& a, double s) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * s;
  auto n = make_node(std::move(out), {a.node()}, "scale");
  n->backward_fn = [s](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i] * s;
  };
  return Var(n);
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + s;
  auto n = make_node(std::move(out), {a.node()}, "add_scalar");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i];
  };
  return Var(n);
}

Var relu(const Var& a) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  auto n = make_node(std::move(out), {a.node()}, "relu");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i)
      if (pa.value[i] > 0.0) pa.grad[i] += self.grad[i];
  };
  return Var(n);
}

Var sigmoid(const Var& a) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) {
    double x = a.value()[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  auto n = make_node(std::move(out), {a.node()}, "sigmoid");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i) {
      double y = self.value[i];
      pa.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  };
  return Var(n);
}

Var sqrt_v(const Var& a) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) out[i] = std::sqrt(a.value()[i]);
  auto n = make_node(std::move(out), {a.node()}, "sqrt");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i) {
      double y = self.value[i];
      if (y > 0.0) pa.grad[i] += self.grad[i] * 0.5 / y;
      // subgradient 0 at the origin
    }
  };
  return Var(n);
}

Var softplus(const Var& a) {
  Tensor out(a.value().shape());
  for (long long i = 0; i < out.numel(); ++i) {
    double x = a.value()[i];
    out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  auto n = make_node(std::move(out), {a.node()}, "softplus");
  n->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (long long i = 0; i < self.grad.numel(); ++i) {
      double x = pa.value[i];
      double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      pa.grad[i] += self.grad[i] * s;
    }
  };
  return Var(n);
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(1)) {
    throw ShapeMismatch("linear: x " + shape_to_string(xv.shape()) + " w " +
                        shape_to_string(wv.shape()));
  }
  const int n = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
  if (bias.defined() && (bias.value().ndim() != 1 || bias.value().dim(0) != out_dim)) {
    throw ShapeMismatch("linear: bias shape " + shape_to_string(bias.value().shape()));
  }
  Tensor out(Shape{n, out_dim});
  const double* xp = xv.data();
  const double* wp = wv.data();
  const double* bp = bias.defined() ? bias.value().data() : nullptr;
  parallel_chunks(static_cast<long long>(n) * out_dim, [&](long long b, long long e) {
    for (long long idx = b; idx < e; ++idx) {
      int i = static_cast<int>(idx / out_dim);
      int o = static_cast<int>(idx % out_dim);
      double acc = bp ? bp[o] : 0.0;
      const double* xr = xp + static_cast<size_t>(i) * in;
      const double* wr = wp + static_cast<size_t>(o) * in;
      for (int k = 0; k < in; ++k) acc += xr[k] * wr[k];
      out[idx] = acc;
    }
  });
  std::vector<NodePtr> parents{x.node(), w.node()};
  if (bias.defined()) parents.push_back(bias.node());
  auto nd = make_node(std::move(out), std::move(parents), "linear");
  nd->backward_fn = [n, in, out_dim](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const double* gy = self.grad.data();
    if (px.requires_grad) {
      double* gx = px.grad.data();
      const double* wp2 = pw.value.data();
      for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_dim; ++o) {
          double g = gy[static_cast<size_t>(i) * out_dim + o];
          if (g == 0.0) continue;
          const double* wr = wp2 + static_cast<size_t>(o) * in;
          double* gxr = gx + static_cast<size_t>(i) * in;
          for (int k = 0; k < in; ++k) gxr[k] += g * wr[k];
        }
    }
    if (pw.requires_grad) {
      double* gw = pw.grad.data();
      const double* xp2 = px.value.data();
      for (int o = 0; o < out_dim; ++o)
        for (int i = 0; i < n; ++i) {
          double g = gy[static_cast<size_t>(i) * out_dim + o];
          if (g == 0.0) continue;
          const double* xr = xp2 + static_cast<size_t>(i) * in;
          double* gwr = gw + static_cast<size_t>(o) * in;
          for (int k = 0; k < in; ++k) gwr[k] += g * xr[k];
        }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      double* gb = self.parents[2]->grad.data();
      for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_dim; ++o) gb[o] += gy[static_cast<size_t>(i) * out_dim + o];
    }
  };
  return Var(nd);
}

Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.ndim() != 4 || wv.ndim() != 4 || xv.dim(1) != wv.dim(1)) {
    throw ShapeMismatch("conv2d: x " + shape_to_string(xv.shape()) + " w " +
                        shape_to_string(wv.shape()));
  }
  const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d: output would be empty");
  Tensor out(Shape{n, cout, ho, wo});
  const double* xp = xv.data();
  const double* wp = wv.data();
  double* op = out.data();
  parallel_chunks(static_cast<long long>(n) * cout, [&](long long b, long long e) {
    for (long long idx = b; idx < e; ++idx) {
      const int ni = static_cast<int>(idx / cout);
      const int co = static_cast<int>(idx % cout);
      double* orow = op + ((static_cast<size_t>(ni) * cout + co) * ho) * wo;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          const int iy0 = oy * stride - pad;
          const int ix0 = ox * stride - pad;
          for (int ci = 0; ci < cin; ++ci) {
            const double* xc = xp + ((static_cast<size_t>(ni) * cin + ci) * h) * wd;
            const double* wc = wp + ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= wd) continue;
                acc += xc[static_cast<size_t>(iy) * wd + ix] * wc[static_cast<size_t>(ky) * kw + kx];
              }
            }
          }
          orow[static_cast<size_t>(oy) * wo + ox] = acc;
        }
      }
    }
  });
  auto nd = make_node(std::move(out), {x.node(), w.node()}, "conv2d");
  nd->backward_fn = [n, cin, h, wd, cout, kh, kw, ho, wo, stride, pad](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const double* gy = self.grad.data();
    if (px.requires_grad) {
      // one worker per image: every dx element written by exactly one chunk
      double* gx = px.grad.data();
      const double* wp2 = pw.value.data();
      parallel_chunks(n, [&](long long b, long long e) {
        for (long long ni = b; ni < e; ++ni) {
          for (int co = 0; co < cout; ++co) {
            const double* gyc = gy + ((static_cast<size_t>(ni) * cout + co) * ho) * wo;
            for (int oy = 0; oy < ho; ++oy)
              for (int ox = 0; ox < wo; ++ox) {
                double g = gyc[static_cast<size_t>(oy) * wo + ox];
                if (g == 0.0) continue;
                const int iy0 = oy * stride - pad;
                const int ix0 = ox * stride - pad;
                for (int ci = 0; ci < cin; ++ci) {
                  double* gxc = gx + ((static_cast<size_t>(ni) * cin + ci) * h) * wd;
                  const double* wc = wp2 + ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                      const int ix = ix0 + kx;
                      if (ix < 0 || ix >= wd) continue;
                      gxc[static_cast<size_t>(iy) * wd + ix] += g * wc[static_cast<size_t>(ky) * kw + kx];
                    }
                  }
                }
              }
          }
        }
      });
    }
    if (pw.requires_grad) {
      // one worker per output channel; sums over images sequentially
      double* gw = pw.grad.data();
      const double* xp2 = px.value.data();
      parallel_chunks(cout, [&](long long b, long long e) {
        for (long long co = b; co < e; ++co) {
          for (int ni = 0; ni < n; ++ni) {
            const double* gyc = gy + ((static_cast<size_t>(ni) * cout + co) * ho) * wo;
            for (int oy = 0; oy < ho; ++oy)
              for (int ox = 0; ox < wo; ++ox) {
                double g = gyc[static_cast<size_t>(oy) * wo + ox];
                if (g == 0.0) continue;
                const int iy0 = oy * stride - pad;
                const int ix0 = ox * stride - pad;
                for (int ci = 0; ci < cin; ++ci) {
                  const double* xc = xp2 + ((static_cast<size_t>(ni) * cin + ci) * h) * wd;
                  double* gwc = gw + ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                      const int ix = ix0 + kx;
                      if (ix < 0 || ix >= wd) continue;
                      gwc[static_cast<size_t>(ky) * kw + kx] += g * xc[static_cast<size_t>(iy) * wd + ix];
                    }
                  }
                }
              }
          }
        }
      });
    }
  };
  return Var(nd);
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
              Tensor& running_var, bool training, double momentum, double eps) {
  const Tensor& xv = x.value();
  const bool is4d = xv.ndim() == 4;
  if (!is4d && xv.ndim() != 2) throw ShapeMismatch("batchnorm: expected 2-d or 4-d input");
  const int n = xv.dim(0);
  const int c = xv.dim(1);
  const int hw = is4d ? xv.dim(2) * xv.dim(3) : 1;
  if (gamma.value().dim(0) != c) throw ShapeMismatch("batchnorm: gamma channels");
  const long long per_channel = static_cast<long long>(n) * hw;

  Tensor mean(Shape{c}), var(Shape{c});
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* base = xv.data() + (static_cast<size_t>(i) * c + ch) * hw;
        for (int k = 0; k < hw; ++k) s += base[k];
      }
      mean[ch] = s / static_cast<double>(per_channel);
    }
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* base = xv.data() + (static_cast<size_t>(i) * c + ch) * hw;
        for (int k = 0; k < hw; ++k) {
          double d = base[k] - mean[ch];
          s += d * d;
        }
      }
      var[ch] = s / static_cast<double>(per_channel);
    }
    // running stats: biased mean, unbiased variance
    double unbias = per_channel > 1 ? static_cast<double>(per_channel) / (per_channel - 1) : 1.0;
    for (int ch = 0; ch < c; ++ch) {
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean[ch];
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var[ch] * unbias;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      var[ch] = running_var[ch];
    }
  }

  Tensor inv_std(Shape{c});
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);

  Tensor out(xv.shape());
  auto xhat = std::make_shared<Tensor>(xv.shape());
  const double* gp = gamma.value().data();
  const double* bp = beta.defined() ? beta.value().data() : nullptr;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
      for (int k = 0; k < hw; ++k) {
        double xh = (xv.data()[base + k] - mean[ch]) * inv_std[ch];
        (*xhat)[static_cast<long long>(base) + k] = xh;
        out[static_cast<long long>(base) + k] = gp[ch] * xh + (bp ? bp[ch] : 0.0);
      }
    }

  std::vector<NodePtr> parents{x.node(), gamma.node()};
  if (beta.defined()) parents.push_back(beta.node());
  auto nd = make_node(std::move(out), std::move(parents), "batchnorm");
  nd->backward_fn = [n, c, hw, training, xhat, inv_std](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const double* gy = self.grad.data();
    const double per = static_cast<double>(n) * hw;
    for (int ch = 0; ch < c; ++ch) {
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
        for (int k = 0; k < hw; ++k) {
          sum_gy += gy[base + k];
          sum_gy_xhat += gy[base + k] * (*xhat)[static_cast<long long>(base) + k];
        }
      }
      if (pg.requires_grad) pg.grad[ch] += sum_gy_xhat;
      if (pb && pb->requires_grad) pb->grad[ch] += sum_gy;
      if (px.requires_grad) {
        const double g = pg.value[ch];
        if (training) {
          for (int i = 0; i < n; ++i) {
            const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
            for (int k = 0; k < hw; ++k) {
              double xh = (*xhat)[static_cast<long long>(base) + k];
              px.grad[base + k] += g * inv_std[ch] / per *
                                   (per * gy[base + k] - sum_gy - xh * sum_gy_xhat);
            }
          }
        } else {
          for (int i = 0; i < n; ++i) {
            const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
            for (int k = 0; k < hw; ++k) px.grad[base + k] += g * inv_std[ch] * gy[base + k];
          }
        }
      }
    }
  };
  return Var(nd);
}

Var gap2d(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 4) throw ShapeMismatch("gap2d: expected 4-d input");
  const int n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(Shape{n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double* base = xv.data() + (static_cast<size_t>(i) * c + ch) * hw;
      double s = 0.0;
      for (int k = 0; k < hw; ++k) s += base[k];
      out.at(i, ch) = s / hw;
    }
  auto nd = make_node(std::move(out), {x.node()}, "gap2d");
  nd->backward_fn = [n, c, hw](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        double g = self.grad.at(i, ch) / hw;
        double* base = px.grad.data() + (static_cast<size_t>(i) * c + ch) * hw;
        for (int k = 0; k < hw; ++k) base[k] += g;
      }
  };
  return Var(nd);
}

Var spatial_max(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 4) throw ShapeMismatch("spatial_max: expected 4-d input");
  const int n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(Shape{n, c});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(n) * c);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double* base = xv.data() + (static_cast<size_t>(i) * c + ch) * hw;
      int best = 0;
      for (int k = 1; k < hw; ++k)
        if (base[k] > base[best]) best = k;  // first max wins ties
      out.at(i, ch) = base[best];
      (*argmax)[static_cast<size_t>(i) * c + ch] = best;
    }
  auto nd = make_node(std::move(out), {x.node()}, "spatial_max");
  nd->backward_fn = [n, c, hw, argmax](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        int k = (*argmax)[static_cast<size_t>(i) * c + ch];
        px.grad[(static_cast<size_t>(i) * c + ch) * hw + k] += self.grad.at(i, ch);
      }
  };
  return Var(nd);
}

Var slice_rows(const Var& x, int r0, int r1) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 4) throw ShapeMismatch("slice_rows: expected 4-d input");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (r0 < 0 || r1 > h || r0 >= r1) throw ShapeMismatch("slice_rows: bad row range");
  const int hs = r1 - r0;
  Tensor out(Shape{n, c, hs, w});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < hs; ++y) {
        const double* src = xv.data() + ((static_cast<size_t>(i) * c + ch) * h + (r0 + y)) * w;
        double* dst = out.data() + ((static_cast<size_t>(i) * c + ch) * hs + y) * w;
        std::copy(src, src + w, dst);
      }
  auto nd = make_node(std::move(out), {x.node()}, "slice_rows");
  nd->backward_fn = [n, c, h, w, r0, hs](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < hs; ++y) {
          const double* g = self.grad.data() + ((static_cast<size_t>(i) * c + ch) * hs + y) * w;
          double* dst = px.grad.data() + ((static_cast<size_t>(i) * c + ch) * h + (r0 + y)) * w;
          for (int k = 0; k < w; ++k) dst[k] += g[k];
        }
  };
  return Var(nd);
}

Var concat_features(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_features: no inputs");
  const int n = parts[0].value().dim(0);
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (p.value().ndim() != 2 || p.value().dim(0) != n)
      throw ShapeMismatch("concat_features: inputs must be N x D with equal N");
    widths.push_back(p.value().dim(1));
    total += p.value().dim(1);
  }
  Tensor out(Shape{n, total});
  int off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& v = parts[pi].value();
    for (int i = 0; i < n; ++i)
      std::copy(v.data() + static_cast<size_t>(i) * widths[pi],
                v.data() + static_cast<size_t>(i + 1) * widths[pi],
                out.data() + static_cast<size_t>(i) * total + off);
    off += widths[pi];
  }
  std::vector<NodePtr> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  auto nd = make_node(std::move(out), std::move(parents), "concat");
  nd->backward_fn = [n, widths, total](Node& self) {
    int off2 = 0;
    for (size_t pi = 0; pi < self.parents.size(); ++pi) {
      Node& par = *self.parents[pi];
      if (par.requires_grad) {
        for (int i = 0; i < n; ++i) {
          const double* g = self.grad.data() + static_cast<size_t>(i) * total + off2;
          double* dst = par.grad.data() + static_cast<size_t>(i) * widths[pi];
          for (int k = 0; k < widths[pi]; ++k) dst[k] += g[k];
        }
      }
      off2 += widths[pi];
    }
  };
  return Var(nd);
}

Var channel_scale(const Var& map, const Var& attn) {
  const Tensor& mv = map.value();
  const Tensor& av = attn.value();
  if (mv.ndim() != 4 || av.ndim() != 2 || mv.dim(0) != av.dim(0) || mv.dim(1) != av.dim(1))
    throw ChannelMismatch("channel_scale: map " + shape_to_string(mv.shape()) + " attn " +
                          shape_to_string(av.shape()));
  const int n = mv.dim(0), c = mv.dim(1), hw = mv.dim(2) * mv.dim(3);
  Tensor out(mv.shape());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double a = av.at(i, ch);
      const double* src = mv.data() + (static_cast<size_t>(i) * c + ch) * hw;
      double* dst = out.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int k = 0; k < hw; ++k) dst[k] = a * src[k];
    }
  auto nd = make_node(std::move(out), {map.node(), attn.node()}, "channel_scale");
  nd->backward_fn = [n, c, hw](Node& self) {
    Node& pm = *self.parents[0];
    Node& pa = *self.parents[1];
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
        if (pm.requires_grad) {
          const double a = pa.value.at(i, ch);
          for (int k = 0; k < hw; ++k) pm.grad[base + k] += self.grad[base + k] * a;
        }
        if (pa.requires_grad) {
          double s = 0.0;
          for (int k = 0; k < hw; ++k) s += self.grad[base + k] * pm.value[base + k];
          pa.grad.at(i, ch) += s;
        }
      }
  };
  return Var(nd);
}

Var l2norm_rows(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw ShapeMismatch("l2norm_rows: expected N x D");
  const int n = xv.dim(0), d = xv.dim(1);
  Tensor out(xv.shape());
  auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = xv.data() + static_cast<size_t>(i) * d;
    double nm = l2_norm(row, d);
    if (nm < 1e-12) throw ZeroMeanFeature("l2norm_rows: row " + std::to_string(i) + " has near-zero norm");
    (*norms)[static_cast<size_t>(i)] = nm;
    double* dst = out.data() + static_cast<size_t>(i) * d;
    for (int k = 0; k < d; ++k) dst[k] = row[k] / nm;
  }
  auto nd = make_node(std::move(out), {x.node()}, "l2norm_rows");
  nd->backward_fn = [n, d, norms](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (int i = 0; i < n; ++i) {
      const double* y = self.value.data() + static_cast<size_t>(i) * d;
      const double* gy = self.grad.data() + static_cast<size_t>(i) * d;
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += y[k] * gy[k];
      double* gx = px.grad.data() + static_cast<size_t>(i) * d;
      const double nm = (*norms)[static_cast<size_t>(i)];
      for (int k = 0; k < d; ++k) gx[k] += (gy[k] - y[k] * dot) / nm;
    }
  };
  return Var(nd);
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw ShapeMismatch("gather_rows: expected N x D");
  const int d = xv.dim(1);
  Tensor out(Shape{static_cast<int>(idx.size()), d});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(xv.data() + static_cast<size_t>(idx[i]) * d,
              xv.data() + static_cast<size_t>(idx[i] + 1) * d, out.data() + i * d);
  auto indices = std::make_shared<std::vector<int>>(idx);
  auto nd = make_node(std::move(out), {x.node()}, "gather_rows");
  nd->backward_fn = [d, indices](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (size_t i = 0; i < indices->size(); ++i) {
      const double* g = self.grad.data() + i * d;
      double* dst = px.grad.data() + static_cast<size_t>((*indices)[i]) * d;
      for (int k = 0; k < d; ++k) dst[k] += g[k];
    }
  };
  return Var(nd);
}

Var rowsum(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw ShapeMismatch("rowsum: expected N x D");
  const int n = xv.dim(0), d = xv.dim(1);
  Tensor out(Shape{n});
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = xv.data() + static_cast<size_t>(i) * d;
    for (int k = 0; k < d; ++k) s += row[k];
    out[i] = s;
  }
  auto nd = make_node(std::move(out), {x.node()}, "rowsum");
  nd->backward_fn = [n, d](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (int i = 0; i < n; ++i) {
      double g = self.grad[i];
      double* dst = px.grad.data() + static_cast<size_t>(i) * d;
      for (int k = 0; k < d; ++k) dst[k] += g;
    }
  };
  return Var(nd);
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (long long i = 0; i < x.value().numel(); ++i) s += x.value()[i];
  auto nd = make_node(Tensor(Shape{1}, s), {x.node()}, "sum_all");
  nd->backward_fn = [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    double g = self.grad[0];
    for (long long i = 0; i < px.grad.numel(); ++i) px.grad[i] += g;
  };
  return Var(nd);
}

Var mean_all(const Var& x) {
  long long n = x.value().numel();
  return scale(sum_all(x), 1.0 / static_cast<double>(n));
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
  const Tensor& lv = logits.value();
  if (lv.ndim() != 2) throw ShapeMismatch("cross_entropy: expected N x M logits");
  const int n = lv.dim(0), m = lv.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeMismatch("cross_entropy: labels size mismatch");
  for (int i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= m)
      throw LabelOutOfRange("cross_entropy: label " + std::to_string(labels[i]) +
                            " outside [0," + std::to_string(m) + ")");
  auto softmax = std::make_shared<Tensor>(lv.shape());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = lv.data() + static_cast<size_t>(i) * m;
    double mx = row[0];
    for (int k = 1; k < m; ++k) mx = std::max(mx, row[k]);
    double z = 0.0;
    for (int k = 0; k < m; ++k) z += std::exp(row[k] - mx);
    double logz = std::log(z) + mx;
    for (int k = 0; k < m; ++k)
      (*softmax)[static_cast<size_t>(i) * m + k] = std::exp(row[k] - logz);
    total += logz - row[labels[i]];
  }
  auto lab = std::make_shared<std::vector<int>>(labels);
  auto nd = make_node(Tensor(Shape{1}, total / n), {logits.node()}, "cross_entropy");
  nd->backward_fn = [n, m, softmax, lab](Node& self) {
    Node& pl = *self.parents[0];
    if (!pl.requires_grad) return;
    const double g = self.grad[0] / n;
    for (int i = 0; i < n; ++i) {
      double* dst = pl.grad.data() + static_cast<size_t>(i) * m;
      const double* sm = softmax->data() + static_cast<size_t>(i) * m;
      for (int k = 0; k < m; ++k) dst[k] += g * sm[k];
      dst[(*lab)[static_cast<size_t>(i)]] -= g;
    }
  };
  return Var(nd);
}

}  // namespace coreuda
