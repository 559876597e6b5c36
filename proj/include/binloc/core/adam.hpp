#pragma once

// Adam with bias correction and a global L2 gradient-norm clip. Parameters
// live outside the optimizer; state (m, v, step count) lives here so it can
// be checkpointed alongside them.

#include <cmath>
#include <string>
#include <vector>

#include "binloc/core/array.hpp"
#include "binloc/core/error.hpp"

namespace binloc {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // 0 disables clipping
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  uint64_t step_count() const { return t_; }

  std::vector<Array>& m_state() { return m_; }
  std::vector<Array>& v_state() { return v_; }
  const std::vector<Array>& m_state() const { return m_; }
  const std::vector<Array>& v_state() const { return v_; }
  void set_step_count(uint64_t t) { t_ = t; }

  // One update over matched parameter/gradient lists. Refuses to apply a
  // step containing non-finite gradients so a bad batch cannot poison m/v.
  void step(std::vector<Array*>& params, const std::vector<Array>& grads) {
    require(params.size() == grads.size(), "adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Array* p : params) {
        m_.push_back(Array::zeros(p->shape));
        v_.push_back(Array::zeros(p->shape));
      }
    }
    require(m_.size() == params.size(), "adam: state size does not match parameter count");

    double sq = 0.0;
    for (size_t k = 0; k < grads.size(); ++k) {
      require(params[k]->same_shape(grads[k]), "adam: gradient shape mismatch at slot " + std::to_string(k));
      for (double g : grads[k].data) {
        if (!std::isfinite(g)) throw numeric_error("adam: non-finite gradient, update aborted");
        sq += g * g;
      }
    }
    const double norm = std::sqrt(sq);
    const double gscale = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params.size(); ++k) {
      double* p = params[k]->ptr();
      const double* g = grads[k].ptr();
      double* m = m_[k].ptr();
      double* v = v_[k].ptr();
      const int64_t n = grads[k].size();
      for (int64_t i = 0; i < n; ++i) {
        const double gi = g[i] * gscale;
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  uint64_t t_ = 0;
  std::vector<Array> m_;
  std::vector<Array> v_;
};

}  // namespace binloc
