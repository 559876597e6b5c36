#pragma once

// Finite-difference audit of every differentiable op kind on the tape. Each
// trial draws fresh shapes and values, reduces the op's output to a scalar
// through a fixed random weighting, and compares the tape's gradients against
// central differences coordinate by coordinate. Graphs are rebuilt from
// scratch for every probe, so ops with internal randomness (dropout) must
// reproduce their draw from the per-trial op seed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/core/tape.hpp"

namespace binloc {

constexpr double kGradTol = 1e-4;

struct GradCheckResult {
  std::string layer;
  double max_rel_err = 0.0;
  int trials = 0;
  int coords = 0;

  bool pass(double tol = kGradTol) const { return max_rel_err < tol; }
};

namespace gradcheckdetail {

// Builds a scalar loss from staged leaves. op_seed must fully determine the
// graph so finite-difference rebuilds see the same function.
using BuildFn = std::function<Tape::Ref(Tape&, const std::vector<Tape::Ref>&, uint64_t)>;

struct LayerCase {
  std::string name;
  std::function<std::vector<Array>(Rng&)> draw_inputs;
  BuildFn build;
};

inline int tape_numel(Tape& t, Tape::Ref x) { return static_cast<int>(t.value(x).data.size()); }

inline Array random_array(Rng& rng, std::vector<int> shape, double lo = -2.0, double hi = 2.0) {
  Array a = Array::zeros(std::move(shape));
  for (auto& v : a.data) v = rng.uniform(lo, hi);
  return a;
}

// Random but fixed weighting that turns a tensor into a scalar without the
// symmetric cancellations a plain sum can hide behind.
inline Tape::Ref weighted_sum(Tape& tape, Tape::Ref x, uint64_t op_seed) {
  Rng wr(Rng::derive(op_seed, "weights"));
  const Array w = random_array(wr, tape.value(x).shape, -1.0, 1.0);
  return tape.sum(tape.mul(x, tape.constant(w)));
}

inline double eval_loss(const LayerCase& c, const std::vector<Array>& vals, uint64_t op_seed) {
  Tape tape;
  std::vector<Tape::Ref> leaves;
  for (const Array& v : vals) leaves.push_back(tape.leaf(v, true));
  return tape.value(c.build(tape, leaves, op_seed)).data[0];
}

inline std::vector<LayerCase> layer_cases() {
  std::vector<LayerCase> cases;

  cases.push_back({"conv2d",
                   [](Rng& r) {
                     const int ci = 1 + r.uniform_int(3), co = 1 + r.uniform_int(3);
                     const int h = 3 + r.uniform_int(4), w = 3 + r.uniform_int(4);
                     return std::vector<Array>{random_array(r, {ci, h, w}), random_array(r, {co, ci, 3, 3}),
                                               random_array(r, {co})};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.conv2d(in[0], in[1], in[2]), s);
                   }});

  cases.push_back({"linear",
                   [](Rng& r) {
                     const int i = 2 + r.uniform_int(6), o = 2 + r.uniform_int(6);
                     return std::vector<Array>{random_array(r, {i}), random_array(r, {o, i}), random_array(r, {o})};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.linear(in[0], in[1], in[2]), s);
                   }});

  cases.push_back({"gru_step",
                   [](Rng& r) {
                     const int i = 2 + r.uniform_int(4), h = 2 + r.uniform_int(4);
                     return std::vector<Array>{random_array(r, {i}),          random_array(r, {h}),
                                               random_array(r, {3 * h, i}),   random_array(r, {3 * h, h}),
                                               random_array(r, {3 * h}),      random_array(r, {3 * h})};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.gru_step(in[0], in[1], in[2], in[3], in[4], in[5]), s);
                   }});

  // Values stay clear of the kink at zero so central differences see one
  // linear branch.
  cases.push_back({"relu",
                   [](Rng& r) {
                     Array x = Array::zeros({2 + r.uniform_int(10)});
                     for (auto& v : x.data) {
                       v = r.uniform(0.1, 2.0);
                       if (r.uniform() < 0.5) v = -v;
                     }
                     return std::vector<Array>{x};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.relu(in[0]), s);
                   }});

  cases.push_back({"sigmoid",
                   [](Rng& r) { return std::vector<Array>{random_array(r, {2 + r.uniform_int(10)}, -4.0, 4.0)}; },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.sigmoid(in[0]), s);
                   }});

  cases.push_back({"softmax",
                   [](Rng& r) { return std::vector<Array>{random_array(r, {2 + r.uniform_int(6)}, -3.0, 3.0)}; },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.softmax(in[0]), s);
                   }});

  // Both clamp branches appear; values keep a margin to the cut points so a
  // probe never crosses them.
  cases.push_back({"clamp",
                   [](Rng& r) {
                     Array x = Array::zeros({4 + r.uniform_int(8)});
                     for (auto& v : x.data) {
                       v = r.uniform(-2.5, 2.5);
                       if (std::fabs(std::fabs(v) - 1.5) < 0.05) v = 0.5;
                     }
                     return std::vector<Array>{x};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     return weighted_sum(t, t.clamp(in[0], -1.5, 1.5), s);
                   }});

  // The mask is drawn from the op seed, so rebuilds keep it fixed and the
  // function stays piecewise linear in x.
  cases.push_back({"dropout",
                   [](Rng& r) { return std::vector<Array>{random_array(r, {6 + r.uniform_int(10)})}; },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     Rng mask(Rng::derive(s, "mask"));
                     return weighted_sum(t, t.dropout(in[0], 0.3, mask, true), s);
                   }});

  cases.push_back({"reshape_concat",
                   [](Rng& r) {
                     const int n = 2 + r.uniform_int(3);
                     return std::vector<Array>{random_array(r, {n, 4}), random_array(r, {8})};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     const int n = tape_numel(t, in[0]);
                     return weighted_sum(t, t.concat(t.reshape(in[0], {n}), in[1]), s);
                   }});

  cases.push_back({"arithmetic",
                   [](Rng& r) {
                     const int n = 3 + r.uniform_int(6);
                     return std::vector<Array>{random_array(r, {n}), random_array(r, {n}), random_array(r, {n})};
                   },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     const Tape::Ref mixed = t.add(t.mul(in[0], in[1]), t.scale(t.sub(in[1], in[2]), 0.7));
                     return weighted_sum(t, mixed, s);
                   }});

  cases.push_back({"bce",
                   [](Rng& r) { return std::vector<Array>{random_array(r, {3 + r.uniform_int(8)}, -3.0, 3.0)}; },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     Rng tr(Rng::derive(s, "target"));
                     Array y = Array::zeros(t.value(in[0]).shape);
                     for (auto& v : y.data) v = tr.uniform() < 0.5 ? 0.0 : 1.0;
                     return t.bce_sum(t.clamp(t.sigmoid(in[0]), 1e-7, 1.0 - 1e-7), y);
                   }});

  cases.push_back({"cross_entropy",
                   [](Rng& r) { return std::vector<Array>{random_array(r, {3 + r.uniform_int(5)}, -3.0, 3.0)}; },
                   [](Tape& t, const std::vector<Tape::Ref>& in, uint64_t s) {
                     Rng tr(Rng::derive(s, "target"));
                     const int n = tape_numel(t, in[0]);
                     Array y = Array::zeros({n});
                     y.data[static_cast<size_t>(tr.uniform_int(n))] = 1.0;
                     return t.cross_entropy(t.clamp(t.softmax(in[0]), 1e-9, 1.0), y);
                   }});

  return cases;
}

}  // namespace gradcheckdetail

// Runs `trials` random instances of every layer kind. Naming a layer in
// `corrupt_layer` perturbs one of its analytic gradient components on
// purpose; a healthy checker must then fail.
inline std::vector<GradCheckResult> run_gradcheck(uint64_t seed, int trials = 20,
                                                  const std::string& corrupt_layer = "") {
  using namespace gradcheckdetail;
  require(trials >= 1, "need at least one trial");

  const double h = 1e-5;
  std::vector<GradCheckResult> results;

  for (const LayerCase& c : layer_cases()) {
    GradCheckResult res;
    res.layer = c.name;

    for (int trial = 0; trial < trials; ++trial) {
      const uint64_t trial_seed = Rng::derive(seed, c.name, static_cast<uint64_t>(trial));
      Rng rng(trial_seed);
      const std::vector<Array> vals = c.draw_inputs(rng);
      const uint64_t op_seed = Rng::derive(trial_seed, "op");

      Tape tape;
      std::vector<Tape::Ref> leaves;
      for (const Array& v : vals) leaves.push_back(tape.leaf(v, true));
      tape.backward(c.build(tape, leaves, op_seed));

      std::vector<Array> analytic;
      for (Tape::Ref l : leaves) analytic.push_back(tape.grad(l));
      if (c.name == corrupt_layer && !analytic[0].data.empty()) analytic[0].data[0] += 1e-2;

      for (size_t li = 0; li < vals.size(); ++li) {
        const int n = static_cast<int>(vals[li].data.size());
        const int probes = std::min(5, n);
        for (int k = 0; k < probes; ++k) {
          const int coord = probes == n ? k : rng.uniform_int(n);
          std::vector<Array> plus = vals, minus = vals;
          plus[li].data[static_cast<size_t>(coord)] += h;
          minus[li].data[static_cast<size_t>(coord)] -= h;
          const double fd = (eval_loss(c, plus, op_seed) - eval_loss(c, minus, op_seed)) / (2.0 * h);
          const double an = analytic[li].data[static_cast<size_t>(coord)];
          const double rel = std::fabs(an - fd) / std::max(1e-6, std::fabs(an) + std::fabs(fd));
          res.max_rel_err = std::max(res.max_rel_err, rel);
          ++res.coords;
        }
      }
      ++res.trials;
    }
    results.push_back(std::move(res));
  }
  return results;
}

inline bool gradcheck_passed(const std::vector<GradCheckResult>& results) {
  if (results.empty()) return false;
  for (const auto& r : results)
    if (!r.pass()) return false;
  return true;
}

}  // namespace binloc
