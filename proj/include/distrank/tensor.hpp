#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace distrank {

/// Dense row-major tensor of doubles.
class tensor {
 public:
  tensor() = default;

  explicit tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count_of(shape_), 0.0) {}

  tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != count_of(shape_)) {
      throw std::invalid_argument("tensor: value count does not match shape");
    }
  }

  static tensor matrix(std::size_t rows, std::size_t cols) {
    return tensor({rows, cols});
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const tensor& other) const { return shape_ == other.shape_; }

  static std::size_t count_of(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Reverse-mode differentiation. Each op builds a node holding its value, the
// parents it was computed from and a closure that scatters the node's
// gradient back into them. backward() walks the graph once in reverse
// topological order, so repeated calls on the same graph are rejected.
// ---------------------------------------------------------------------------

struct var;
using var_ptr = std::shared_ptr<var>;

struct var {
  tensor value;
  tensor grad;
  bool requires_grad = false;
  std::vector<var_ptr> parents;
  std::function<void(var&)> backprop;

  explicit var(tensor v, bool req = false)
      : value(std::move(v)), requires_grad(req) {
    if (requires_grad) grad = tensor(value.shape());
  }

  void ensure_grad() {
    if (grad.size() != value.size()) grad = tensor(value.shape());
  }

  void zero_grad() { grad.fill(0.0); }
};

inline var_ptr make_leaf(tensor v, bool requires_grad = false) {
  return std::make_shared<var>(std::move(v), requires_grad);
}

namespace detail {

inline var_ptr make_op(tensor value, std::vector<var_ptr> parents,
                       std::function<void(var&)> backprop) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  auto node = std::make_shared<var>(std::move(value), needs);
  if (needs) {
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return node;
}

inline void topo_sort(const var_ptr& root, std::vector<var*>& order) {
  // Iterative post-order DFS; parent visit order is fixed so gradient
  // accumulation is bitwise deterministic across runs.
  std::unordered_set<var*> seen;
  std::vector<std::pair<var*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      var* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

/// Seeds the root gradient and propagates it to every reachable leaf.
inline void backward(const var_ptr& root, const tensor& seed) {
  if (!root->value.same_shape(seed)) {
    throw std::invalid_argument("backward: seed shape mismatch");
  }
  if (!root->requires_grad) return;
  std::vector<var*> order;
  detail::topo_sort(root, order);
  // Interior nodes start from zero every pass; leaves (parameters) keep
  // accumulating so batched lists can share one optimizer step.
  for (var* n : order) {
    n->ensure_grad();
    if (n->backprop && n != root.get()) n->zero_grad();
  }
  root->grad = seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    var* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ----------------------------- operations ---------------------------------

/// C = A * B for [n,k] x [k,m].
inline var_ptr matmul(const var_ptr& a, const var_ptr& b) {
  const std::size_t n = a->value.rows(), k = a->value.cols();
  if (b->value.rows() != k) throw std::invalid_argument("matmul: inner dims");
  const std::size_t m = b->value.cols();
  tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a->value.at(i, l);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) {
        out.at(i, j) += av * b->value.at(l, j);
      }
    }
  }
  return detail::make_op(std::move(out), {a, b}, [a, b, n, k, m](var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double g = self.grad.at(i, j);
          if (g == 0.0) continue;
          for (std::size_t l = 0; l < k; ++l)
            a->grad.at(i, l) += g * b->value.at(l, j);
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          const double av = a->value.at(i, l);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j)
            b->grad.at(l, j) += av * self.grad.at(i, j);
        }
    }
  });
}

/// C = A * B^T for [n,k] x [m,k].
inline var_ptr matmul_nt(const var_ptr& a, const var_ptr& b) {
  const std::size_t n = a->value.rows(), k = a->value.cols();
  if (b->value.cols() != k) throw std::invalid_argument("matmul_nt: inner dims");
  const std::size_t m = b->value.rows();
  tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l)
        acc += a->value.at(i, l) * b->value.at(j, l);
      out.at(i, j) = acc;
    }
  return detail::make_op(std::move(out), {a, b}, [a, b, n, k, m](var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double g = self.grad.at(i, j);
          for (std::size_t l = 0; l < k; ++l)
            a->grad.at(i, l) += g * b->value.at(j, l);
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double g = self.grad.at(i, j);
          for (std::size_t l = 0; l < k; ++l)
            b->grad.at(j, l) += g * a->value.at(i, l);
        }
    }
  });
}

inline var_ptr add(const var_ptr& a, const var_ptr& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shapes");
  tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return detail::make_op(std::move(out), {a, b}, [a, b](var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] += self.grad[i];
    }
  });
}

/// Adds a length-m row vector to every row of an [n,m] matrix.
inline var_ptr add_rowvec(const var_ptr& a, const var_ptr& bias) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  if (bias->value.size() != m) throw std::invalid_argument("add_rowvec: width");
  tensor out = a->value;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) += bias->value[j];
  return detail::make_op(std::move(out), {a, bias}, [a, bias, n, m](var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (bias->requires_grad) {
      bias->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) bias->grad[j] += self.grad.at(i, j);
    }
  });
}

inline var_ptr scale(const var_ptr& a, double c) {
  tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return detail::make_op(std::move(out), {a}, [a, c](var& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += c * self.grad[i];
  });
}

inline var_ptr relu(const var_ptr& a) {
  tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return detail::make_op(std::move(out), {a}, [a](var& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (a->value[i] > 0.0) a->grad[i] += self.grad[i];
  });
}

inline var_ptr sigmoid(const var_ptr& a) {
  tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  auto node = detail::make_op(std::move(out), {a}, [a](var& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      a->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  return node;
}

/// Row-wise softmax of an [n,m] matrix.
inline var_ptr softmax_rows(const var_ptr& a) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = a->value.at(i, 0);
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, a->value.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      out.at(i, j) = std::exp(a->value.at(i, j) - mx);
      sum += out.at(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) /= sum;
  }
  return detail::make_op(std::move(out), {a}, [a, n, m](var& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
      for (std::size_t j = 0; j < m; ++j) {
        a->grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
      }
    }
  });
}

/// Normalizes every feature column to mean 0 and std 1 over the list axis.
/// The std is floored to keep degenerate columns (and single-item lists)
/// finite; a floored column backpropagates through the floor constant.
inline var_ptr feature_norm(const var_ptr& a, double std_floor = 1e-6) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  tensor out({n, m});
  std::vector<double> stds(m);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a->value.at(i, j);
    mean /= static_cast<double>(n);
    double varsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a->value.at(i, j) - mean;
      varsum += d * d;
    }
    const double sd = std::sqrt(varsum / static_cast<double>(n));
    stds[j] = std::max(sd, std_floor);
    for (std::size_t i = 0; i < n; ++i) out.at(i, j) = (a->value.at(i, j) - mean) / stds[j];
  }
  return detail::make_op(
      std::move(out), {a}, [a, n, m, stds, std_floor](var& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < m; ++j) {
          double gmean = 0.0, gymean = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            gmean += self.grad.at(i, j);
            gymean += self.grad.at(i, j) * self.value.at(i, j);
          }
          gmean *= inv_n;
          gymean *= inv_n;
          const bool floored = stds[j] <= std_floor;
          for (std::size_t i = 0; i < n; ++i) {
            double g = self.grad.at(i, j) - gmean;
            if (!floored) g -= self.value.at(i, j) * gymean;
            a->grad.at(i, j) += g / stds[j];
          }
        }
      });
}

/// Concatenates same-height matrices along the column axis.
inline var_ptr concat_cols(const std::vector<var_ptr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const std::size_t n = parts[0]->value.rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->value.rows() != n) throw std::invalid_argument("concat_cols: rows");
    total += p->value.cols();
  }
  tensor out({n, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t m = p->value.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out.at(i, off + j) = p->value.at(i, j);
    off += m;
  }
  return detail::make_op(std::move(out), parts, [parts, n](var& self) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t m = p->value.cols();
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) p->grad.at(i, j) += self.grad.at(i, off + j);
      }
      off += m;
    }
  });
}

}  // namespace distrank
