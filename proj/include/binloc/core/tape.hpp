#pragma once

// Reverse-mode autodiff over whole arrays. Ops compute eagerly and, while
// recording, push a backward closure; backward() replays them once in
// reverse creation order, accumulating gradients additively.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "binloc/core/array.hpp"
#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"

namespace binloc {

class Tape {
 public:
  using Ref = int;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  void clear() {
    slots_.clear();
    nodes_.clear();
  }

  Ref leaf(Array v, bool needs_grad) {
    slots_.push_back(Slot{std::move(v), Array{}, needs_grad, false});
    return static_cast<Ref>(slots_.size() - 1);
  }

  Ref constant(Array v) { return leaf(std::move(v), false); }

  const Array& value(Ref r) const { return slots_[static_cast<size_t>(r)].value; }

  // Gradient of a slot after backward(); zeros when the slot never
  // participated in the loss.
  Array grad(Ref r) const {
    const Slot& s = slots_[static_cast<size_t>(r)];
    if (!s.grad_ready) return Array::zeros(s.value.shape);
    return s.grad;
  }

  // --- layers ---------------------------------------------------------

  Ref conv2d(Ref input, Ref kernels, Ref bias) {
    const Array& in = value(input);
    const Array& k = value(kernels);
    const Array& b = value(bias);
    require(in.shape.size() == 3, "conv2d: input must be CxHxW, got " + shape_str(in.shape));
    require(k.shape.size() == 4 && k.dim(2) == 3 && k.dim(3) == 3,
            "conv2d: kernels must be CoutxCinx3x3, got " + shape_str(k.shape));
    const int cin = in.dim(0), h = in.dim(1), w = in.dim(2);
    const int cout = k.dim(0);
    require(k.dim(1) == cin, "conv2d: kernel Cin mismatch");
    require(b.shape == std::vector<int>{cout}, "conv2d: bias shape mismatch");

    Array out = Array::zeros({cout, h, w});
    conv_forward_kernel(in.ptr(), k.ptr(), b.ptr(), out.ptr(), cin, cout, h, w);
    return push(std::move(out), "conv2d", {input, kernels, bias},
                [input, kernels, bias, cin, cout, h, w](Tape& t, const Array& g) {
                  const Array& in = t.value(input);
                  const Array& k = t.value(kernels);
                  double* din = t.want_grad(input);
                  double* dk = t.want_grad(kernels);
                  double* db = t.want_grad(bias);
                  conv_backward_kernel(in.ptr(), k.ptr(), g.ptr(), din, dk, db, cin, cout, h, w);
                });
  }

  Ref linear(Ref x, Ref wref, Ref bref) {
    const Array& xv = value(x);
    const Array& w = value(wref);
    const Array& b = value(bref);
    require(xv.shape.size() == 1 && w.shape.size() == 2, "linear: expects vector input and OxI weight");
    const int i_dim = xv.dim(0), o_dim = w.dim(0);
    require(w.dim(1) == i_dim, "linear: weight columns " + std::to_string(w.dim(1)) +
                                   " != input size " + std::to_string(i_dim));
    require(b.shape == std::vector<int>{o_dim}, "linear: bias shape mismatch");

    Array out = Array::zeros({o_dim});
    for (int o = 0; o < o_dim; ++o) {
      const double* wrow = w.ptr() + static_cast<int64_t>(o) * i_dim;
      double acc = b.data[static_cast<size_t>(o)];
      for (int i = 0; i < i_dim; ++i) acc += wrow[i] * xv.data[static_cast<size_t>(i)];
      out.data[static_cast<size_t>(o)] = acc;
    }
    return push(std::move(out), "linear", {x, wref, bref},
                [x, wref, bref, i_dim, o_dim](Tape& t, const Array& g) {
                  const Array& xv = t.value(x);
                  const Array& w = t.value(wref);
                  double* dx = t.want_grad(x);
                  double* dw = t.want_grad(wref);
                  double* db = t.want_grad(bref);
                  for (int o = 0; o < o_dim; ++o) {
                    const double go = g.data[static_cast<size_t>(o)];
                    if (db) db[o] += go;
                    const double* wrow = w.ptr() + static_cast<int64_t>(o) * i_dim;
                    double* dwrow = dw ? dw + static_cast<int64_t>(o) * i_dim : nullptr;
                    for (int i = 0; i < i_dim; ++i) {
                      if (dx) dx[i] += go * wrow[i];
                      if (dwrow) dwrow[i] += go * xv.data[static_cast<size_t>(i)];
                    }
                  }
                });
  }

  // Gate rows stacked as [reset; update; candidate]. Update rule keeps the
  // previous state where the update gate is closed:
  //   h' = (1-z) * h_prev + z * tanh(Wn x + bn + r * (Un h_prev + cn))
  Ref gru_step(Ref x, Ref h_prev, Ref wx, Ref wh, Ref bx, Ref bh) {
    const Array& xv = value(x);
    const Array& hv = value(h_prev);
    require(xv.shape.size() == 1 && hv.shape.size() == 1, "gru_step: x and h must be vectors");
    const int in_dim = xv.dim(0), hidden = hv.dim(0);
    require(value(wx).shape == (std::vector<int>{3 * hidden, in_dim}), "gru_step: wx shape mismatch");
    require(value(wh).shape == (std::vector<int>{3 * hidden, hidden}), "gru_step: wh shape mismatch");
    require(value(bx).shape == (std::vector<int>{3 * hidden}), "gru_step: bx shape mismatch");
    require(value(bh).shape == (std::vector<int>{3 * hidden}), "gru_step: bh shape mismatch");

    std::vector<double> a(static_cast<size_t>(3 * hidden));
    std::vector<double> c(static_cast<size_t>(3 * hidden));
    matvec(value(wx).ptr(), xv.ptr(), value(bx).ptr(), a.data(), 3 * hidden, in_dim);
    matvec(value(wh).ptr(), hv.ptr(), value(bh).ptr(), c.data(), 3 * hidden, hidden);

    std::vector<double> r(static_cast<size_t>(hidden)), z(static_cast<size_t>(hidden)),
        m(static_cast<size_t>(hidden)), cand(static_cast<size_t>(hidden));
    Array out = Array::zeros({hidden});
    for (int j = 0; j < hidden; ++j) {
      r[static_cast<size_t>(j)] = sigmoid_scalar(a[static_cast<size_t>(j)] + c[static_cast<size_t>(j)]);
      z[static_cast<size_t>(j)] =
          sigmoid_scalar(a[static_cast<size_t>(hidden + j)] + c[static_cast<size_t>(hidden + j)]);
      m[static_cast<size_t>(j)] = c[static_cast<size_t>(2 * hidden + j)];
      cand[static_cast<size_t>(j)] = std::tanh(a[static_cast<size_t>(2 * hidden + j)] +
                                               r[static_cast<size_t>(j)] * m[static_cast<size_t>(j)]);
      out.data[static_cast<size_t>(j)] = (1.0 - z[static_cast<size_t>(j)]) * hv.data[static_cast<size_t>(j)] +
                                         z[static_cast<size_t>(j)] * cand[static_cast<size_t>(j)];
    }

    return push(std::move(out), "gru_step", {x, h_prev, wx, wh, bx, bh},
                [x, h_prev, wx, wh, bx, bh, in_dim, hidden, r = std::move(r), z = std::move(z),
                 m = std::move(m), cand = std::move(cand)](Tape& t, const Array& g) {
                  const Array& xv = t.value(x);
                  const Array& hv = t.value(h_prev);
                  const Array& wxv = t.value(wx);
                  const Array& whv = t.value(wh);
                  double* dx = t.want_grad(x);
                  double* dh = t.want_grad(h_prev);
                  double* dwx = t.want_grad(wx);
                  double* dwh = t.want_grad(wh);
                  double* dbx = t.want_grad(bx);
                  double* dbh = t.want_grad(bh);

                  // d of the three pre-activations, stacked like the weights
                  std::vector<double> da(static_cast<size_t>(3 * hidden));
                  std::vector<double> dc3(static_cast<size_t>(hidden));  // d(Un h + cn)
                  for (int j = 0; j < hidden; ++j) {
                    const double go = g.data[static_cast<size_t>(j)];
                    const double rj = r[static_cast<size_t>(j)], zj = z[static_cast<size_t>(j)];
                    const double gj = cand[static_cast<size_t>(j)], mj = m[static_cast<size_t>(j)];
                    const double dcand = go * zj * (1.0 - gj * gj);
                    da[static_cast<size_t>(2 * hidden + j)] = dcand;
                    dc3[static_cast<size_t>(j)] = dcand * rj;
                    da[static_cast<size_t>(j)] = dcand * mj * rj * (1.0 - rj);
                    da[static_cast<size_t>(hidden + j)] =
                        go * (gj - hv.data[static_cast<size_t>(j)]) * zj * (1.0 - zj);
                    if (dh) dh[j] += go * (1.0 - zj);
                  }
                  // r and z share pre-activation grads between the x and h paths;
                  // the candidate's h path is gated by r (dc3).
                  for (int row = 0; row < 3 * hidden; ++row) {
                    const double dr = da[static_cast<size_t>(row)];
                    const double dch = (row < 2 * hidden) ? dr : dc3[static_cast<size_t>(row - 2 * hidden)];
                    if (dbx) dbx[row] += dr;
                    if (dbh) dbh[row] += dch;
                    const double* wxrow = wxv.ptr() + static_cast<int64_t>(row) * in_dim;
                    const double* whrow = whv.ptr() + static_cast<int64_t>(row) * hidden;
                    if (dx || dwx) {
                      double* dwxrow = dwx ? dwx + static_cast<int64_t>(row) * in_dim : nullptr;
                      for (int i = 0; i < in_dim; ++i) {
                        if (dx) dx[i] += dr * wxrow[i];
                        if (dwxrow) dwxrow[i] += dr * xv.data[static_cast<size_t>(i)];
                      }
                    }
                    if (dh || dwh) {
                      double* dwhrow = dwh ? dwh + static_cast<int64_t>(row) * hidden : nullptr;
                      for (int j = 0; j < hidden; ++j) {
                        if (dh) dh[j] += dch * whrow[j];
                        if (dwhrow) dwhrow[j] += dch * hv.data[static_cast<size_t>(j)];
                      }
                    }
                  }
                });
  }

  // --- elementwise ------------------------------------------------------

  Ref relu(Ref x) {
    Array out = value(x);
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), "relu", {x}, [x](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      const Array& xv = t.value(x);
      for (int64_t i = 0; i < xv.size(); ++i)
        if (xv.data[static_cast<size_t>(i)] > 0.0) dx[i] += g.data[static_cast<size_t>(i)];
    });
  }

  Ref sigmoid(Ref x) {
    Array out = value(x);
    for (auto& v : out.data) v = sigmoid_scalar(v);
    std::vector<double> s = out.data;
    return push(std::move(out), "sigmoid", {x}, [x, s = std::move(s)](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      for (size_t i = 0; i < s.size(); ++i) dx[i] += g.data[i] * s[i] * (1.0 - s[i]);
    });
  }

  Ref softmax(Ref x) {
    const Array& xv = value(x);
    require(xv.shape.size() == 1, "softmax: expects a vector");
    Array out = xv;
    double mx = out.data[0];
    for (double v : out.data) mx = std::max(mx, v);
    double tot = 0.0;
    for (auto& v : out.data) {
      v = std::exp(v - mx);
      tot += v;
    }
    for (auto& v : out.data) v /= tot;
    std::vector<double> s = out.data;
    return push(std::move(out), "softmax", {x}, [x, s = std::move(s)](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      double dot = 0.0;
      for (size_t i = 0; i < s.size(); ++i) dot += g.data[i] * s[i];
      for (size_t i = 0; i < s.size(); ++i) dx[i] += s[i] * (g.data[i] - dot);
    });
  }

  Ref clamp(Ref x, double lo, double hi) {
    const Array& xv = value(x);
    Array out = xv;
    for (auto& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    return push(std::move(out), "clamp", {x}, [x, lo, hi](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      const Array& xv = t.value(x);
      for (int64_t i = 0; i < xv.size(); ++i) {
        const double v = xv.data[static_cast<size_t>(i)];
        if (v > lo && v < hi) dx[i] += g.data[static_cast<size_t>(i)];
      }
    });
  }

  // Training: keep each element with prob 1-rate and scale by 1/(1-rate).
  // Inference: identity.
  Ref dropout(Ref x, double rate, Rng& rng, bool training) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    const Array& xv = value(x);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(static_cast<size_t>(xv.size()));
    for (auto& mv : mask) mv = rng.uniform() >= rate ? keep_scale : 0.0;
    Array out = xv;
    for (size_t i = 0; i < mask.size(); ++i) out.data[i] *= mask[i];
    return push(std::move(out), "dropout", {x}, [x, mask = std::move(mask)](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      for (size_t i = 0; i < mask.size(); ++i) dx[i] += g.data[i] * mask[i];
    });
  }

  Ref reshape(Ref x, std::vector<int> shape) {
    const Array& xv = value(x);
    require(numel(shape) == xv.size(), "reshape: element count mismatch");
    Array out(shape, xv.data);
    return push(std::move(out), "reshape", {x}, [x](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      for (size_t i = 0; i < g.data.size(); ++i) dx[i] += g.data[i];
    });
  }

  Ref concat(Ref a, Ref b) {
    const Array& av = value(a);
    const Array& bv = value(b);
    require(av.shape.size() == 1 && bv.shape.size() == 1, "concat: expects vectors");
    Array out = Array::zeros({av.dim(0) + bv.dim(0)});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.dim(0));
    const int na = av.dim(0);
    return push(std::move(out), "concat", {a, b}, [a, b, na](Tape& t, const Array& g) {
      double* da = t.want_grad(a);
      double* db = t.want_grad(b);
      if (da)
        for (int i = 0; i < na; ++i) da[i] += g.data[static_cast<size_t>(i)];
      if (db)
        for (size_t i = static_cast<size_t>(na); i < g.data.size(); ++i) db[i - static_cast<size_t>(na)] += g.data[i];
    });
  }

  Ref add(Ref a, Ref b) { return binary(a, b, "add", 1.0); }
  Ref sub(Ref a, Ref b) { return binary(a, b, "sub", -1.0); }

  Ref mul(Ref a, Ref b) {
    const Array& av = value(a);
    const Array& bv = value(b);
    require(av.same_shape(bv), "mul: shape mismatch");
    Array out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    return push(std::move(out), "mul", {a, b}, [a, b](Tape& t, const Array& g) {
      const Array& av = t.value(a);
      const Array& bv = t.value(b);
      double* da = t.want_grad(a);
      double* db = t.want_grad(b);
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (da) da[i] += g.data[i] * bv.data[i];
        if (db) db[i] += g.data[i] * av.data[i];
      }
    });
  }

  Ref scale(Ref x, double c) {
    Array out = value(x);
    for (auto& v : out.data) v *= c;
    return push(std::move(out), "scale", {x}, [x, c](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      for (size_t i = 0; i < g.data.size(); ++i) dx[i] += g.data[i] * c;
    });
  }

  Ref sum(Ref x) {
    const Array& xv = value(x);
    double tot = 0.0;
    for (double v : xv.data) tot += v;
    return push(Array::scalar(tot), "sum", {x}, [x](Tape& t, const Array& g) {
      double* dx = t.want_grad(x);
      if (!dx) return;
      const double go = g.data[0];
      const Array& xv = t.value(x);
      for (int64_t i = 0; i < xv.size(); ++i) dx[i] += go;
    });
  }

  // --- losses -----------------------------------------------------------

  // Summed binary cross-entropy against a fixed multi-hot target. The caller
  // clamps p away from {0, 1} first.
  Ref bce_sum(Ref p, Array target) {
    const Array& pv = value(p);
    require(pv.same_shape(target), "bce_sum: target shape mismatch");
    double tot = 0.0;
    for (size_t i = 0; i < pv.data.size(); ++i) {
      const double pi = pv.data[i], yi = target.data[i];
      tot -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
    }
    return push(Array::scalar(tot), "bce_sum", {p}, [p, target = std::move(target)](Tape& t, const Array& g) {
      double* dp = t.want_grad(p);
      if (!dp) return;
      const Array& pv = t.value(p);
      const double go = g.data[0];
      for (size_t i = 0; i < pv.data.size(); ++i) {
        const double pi = pv.data[i], yi = target.data[i];
        dp[i] += go * (-yi / pi + (1.0 - yi) / (1.0 - pi));
      }
    });
  }

  // -sum(onehot * log q); q pre-clamped by the caller.
  Ref cross_entropy(Ref q, Array onehot) {
    const Array& qv = value(q);
    require(qv.same_shape(onehot), "cross_entropy: target shape mismatch");
    double tot = 0.0;
    for (size_t i = 0; i < qv.data.size(); ++i)
      if (onehot.data[i] != 0.0) tot -= onehot.data[i] * std::log(qv.data[i]);
    return push(Array::scalar(tot), "cross_entropy", {q}, [q, onehot = std::move(onehot)](Tape& t, const Array& g) {
      double* dq = t.want_grad(q);
      if (!dq) return;
      const Array& qv = t.value(q);
      const double go = g.data[0];
      for (size_t i = 0; i < qv.data.size(); ++i)
        if (onehot.data[i] != 0.0) dq[i] += go * (-onehot.data[i] / qv.data[i]);
    });
  }

  // --- reverse pass -----------------------------------------------------

  void backward(Ref loss) {
    require(recording_, "backward: tape is not recording");
    Slot& ls = slots_[static_cast<size_t>(loss)];
    require(ls.value.is_scalar(), "backward: loss must be scalar, got " + shape_str(ls.value.shape));
    if (!std::isfinite(ls.value.data[0])) throw numeric_error("backward: loss is not finite");
    ensure_grad(loss);
    ls.grad.data[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      const Slot& out = slots_[static_cast<size_t>(it->out)];
      if (!out.grad_ready) continue;  // not on any path to the loss
      it->back(*this, out.grad);
    }
    for (const Slot& s : slots_) {
      if (s.grad_ready && !all_finite(s.grad.ptr(), s.grad.size()))
        throw numeric_error("backward: non-finite gradient encountered during reverse pass");
    }
  }

 private:
  struct Slot {
    Array value;
    Array grad;
    bool needs_grad = false;
    bool grad_ready = false;
  };
  struct Node {
    Ref out;
    std::function<void(Tape&, const Array&)> back;
  };

  static double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  static void matvec(const double* w, const double* x, const double* b, double* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
      const double* row = w + static_cast<int64_t>(r) * cols;
      double acc = b[r];
      for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
      out[r] = acc;
    }
  }

  static void conv_forward_kernel(const double* in, const double* k, const double* b, double* out,
                                  int cin, int cout, int h, int w) {
    for (int co = 0; co < cout; ++co) {
      const double bias = b[co];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = bias;
          const double* kc = k + static_cast<int64_t>(co) * cin * 9;
          for (int ci = 0; ci < cin; ++ci, kc += 9) {
            const double* plane = in + static_cast<int64_t>(ci) * h * w;
            for (int u = 0; u < 3; ++u) {
              const int yy = y + u - 1;
              if (yy < 0 || yy >= h) continue;
              const double* row = plane + static_cast<int64_t>(yy) * w;
              for (int v = 0; v < 3; ++v) {
                const int xx = x + v - 1;
                if (xx < 0 || xx >= w) continue;
                acc += row[xx] * kc[u * 3 + v];
              }
            }
          }
          out[(static_cast<int64_t>(co) * h + y) * w + x] = acc;
        }
      }
    }
  }

  static void conv_backward_kernel(const double* in, const double* k, const double* g, double* din,
                                   double* dk, double* db, int cin, int cout, int h, int w) {
    for (int co = 0; co < cout; ++co) {
      const double* gplane = g + static_cast<int64_t>(co) * h * w;
      if (db) {
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += gplane[i];
        db[co] += acc;
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double go = gplane[static_cast<int64_t>(y) * w + x];
          if (go == 0.0) continue;
          const double* kc = k + static_cast<int64_t>(co) * cin * 9;
          for (int ci = 0; ci < cin; ++ci, kc += 9) {
            const double* plane = in + static_cast<int64_t>(ci) * h * w;
            double* dplane = din ? din + static_cast<int64_t>(ci) * h * w : nullptr;
            double* dkc = dk ? dk + (static_cast<int64_t>(co) * cin + ci) * 9 : nullptr;
            for (int u = 0; u < 3; ++u) {
              const int yy = y + u - 1;
              if (yy < 0 || yy >= h) continue;
              for (int v = 0; v < 3; ++v) {
                const int xx = x + v - 1;
                if (xx < 0 || xx >= w) continue;
                const int64_t idx = static_cast<int64_t>(yy) * w + xx;
                if (dkc) dkc[u * 3 + v] += go * plane[idx];
                if (dplane) dplane[idx] += go * kc[u * 3 + v];
              }
            }
          }
        }
      }
    }
  }

  Ref binary(Ref a, Ref b, const char* name, double bsign) {
    const Array& av = value(a);
    const Array& bv = value(b);
    require(av.same_shape(bv), std::string(name) + ": shape mismatch " + shape_str(av.shape) + " vs " +
                                    shape_str(bv.shape));
    Array out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bsign * bv.data[i];
    return push(std::move(out), name, {a, b}, [a, b, bsign](Tape& t, const Array& g) {
      double* da = t.want_grad(a);
      double* db = t.want_grad(b);
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (da) da[i] += g.data[i];
        if (db) db[i] += bsign * g.data[i];
      }
    });
  }

  // Allocates (zeroed) gradient storage for a slot that wants one; returns
  // nullptr for slots that do not require grad.
  double* want_grad(Ref r) {
    Slot& s = slots_[static_cast<size_t>(r)];
    if (!s.needs_grad) return nullptr;
    ensure_grad(r);
    return s.grad.ptr();
  }

  void ensure_grad(Ref r) {
    Slot& s = slots_[static_cast<size_t>(r)];
    if (!s.grad_ready) {
      s.grad = Array::zeros(s.value.shape);
      s.grad_ready = true;
    }
  }

  template <typename F>
  Ref push(Array out, const char* opname, std::initializer_list<Ref> inputs, F&& back) {
    require_finite(out, opname);
    bool needs = false;
    for (Ref r : inputs) needs = needs || slots_[static_cast<size_t>(r)].needs_grad;
    slots_.push_back(Slot{std::move(out), Array{}, needs, false});
    const Ref ref = static_cast<Ref>(slots_.size() - 1);
    if (recording_ && needs) nodes_.push_back(Node{ref, std::forward<F>(back)});
    return ref;
  }

  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace binloc
