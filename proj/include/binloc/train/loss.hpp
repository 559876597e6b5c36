#pragma once

// Training objectives: summed binary cross-entropy over the DOA classes at
// the final frame, cross-entropy over the three count classes, and their
// affine combination L = a*L_doa + (1-a)*L_csd. Probabilities are clamped to
// [1e-7, 1-1e-7] so both losses stay finite.

#include <cmath>
#include <string>

#include <json.hpp>

#include "binloc/core/array.hpp"
#include "binloc/core/error.hpp"
#include "binloc/core/tape.hpp"

namespace binloc {

inline constexpr double kProbClamp = 1e-7;

struct LossConfig {
  double alpha = 0.97;
  bool dual_task = false;

  // DOA-only training ignores the count term entirely.
  double effective_alpha() const { return dual_task ? alpha : 1.0; }

  void validate() const { require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]"); }

  nlohmann::json to_json() const {
    return {{"alpha", alpha}, {"mode", dual_task ? "dual_task" : "doa_only"}};
  }

  static LossConfig from_json(const nlohmann::json& j) {
    LossConfig c;
    c.alpha = j.at("alpha").get<double>();
    const std::string mode = j.at("mode").get<std::string>();
    require_data(mode == "dual_task" || mode == "doa_only", "unknown loss mode: " + mode);
    c.dual_task = mode == "dual_task";
    c.validate();
    return c;
  }
};

inline double clamp_prob(double p) {
  return p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
}

// Summed (not class-averaged) binary cross-entropy for one sample.
inline double doa_loss(const Array& p, const Array& y) {
  require(p.shape == y.shape, "doa_loss: posterior/label shape mismatch");
  double tot = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i) {
    const double pi = clamp_prob(p.data[i]);
    const double yi = y.data[i];
    tot -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
  }
  return tot;
}

inline double csd_loss(const Array& q_hat, const Array& onehot) {
  require(q_hat.shape == onehot.shape, "csd_loss: posterior/label shape mismatch");
  double ones = 0.0;
  for (double v : onehot.data) {
    require(v == 0.0 || v == 1.0, "csd_loss: label must be one-hot");
    ones += v;
  }
  require(ones == 1.0, "csd_loss: label must be one-hot");
  double tot = 0.0;
  for (size_t i = 0; i < q_hat.data.size(); ++i)
    if (onehot.data[i] != 0.0) tot -= onehot.data[i] * std::log(clamp_prob(q_hat.data[i]));
  return tot;
}

inline double combined_loss(double l_doa, double l_csd, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
  return alpha * l_doa + (1.0 - alpha) * l_csd;
}

// --- tape variants, used inside the training graph -------------------------

inline Ref doa_loss_ref(Tape& t, Ref doa_logits, Array y) {
  return t.bce_sum(t.clamp(t.sigmoid(doa_logits), kProbClamp, 1.0 - kProbClamp), std::move(y));
}

inline Ref csd_loss_ref(Tape& t, Ref csd_logits, Array onehot) {
  return t.cross_entropy(t.clamp(t.softmax(csd_logits), kProbClamp, 1.0 - kProbClamp), std::move(onehot));
}

// alpha = 1 leaves the count head entirely out of the graph, so its gradients
// match a DOA-only model bit for bit; alpha = 0 mirrors that for the DOA head.
inline Ref combined_loss_ref(Tape& t, Ref l_doa, Ref l_csd, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
  if (alpha == 1.0) return l_doa;
  if (alpha == 0.0) return l_csd;
  return t.add(t.scale(l_doa, alpha), t.scale(l_csd, 1.0 - alpha));
}

}  // namespace binloc
