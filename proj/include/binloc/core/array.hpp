#pragma once

// Dense row-major double arrays. Deliberately tiny: the model is ~38k
// parameters, so clarity and numeric headroom beat raw speed.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "binloc/core/error.hpp"

namespace binloc {

inline int64_t numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

struct Array {
  std::vector<int> shape;
  std::vector<double> data;

  Array() = default;
  Array(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    require(numel(shape) == static_cast<int64_t>(data.size()),
            "array data length does not match shape " + shape_str(shape));
  }

  static Array zeros(std::vector<int> s) {
    Array a;
    a.data.assign(static_cast<size_t>(numel(s)), 0.0);
    a.shape = std::move(s);
    return a;
  }

  static Array full(std::vector<int> s, double v) {
    Array a = zeros(std::move(s));
    std::fill(a.data.begin(), a.data.end(), v);
    return a;
  }

  static Array scalar(double v) { return Array({1}, {v}); }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool same_shape(const Array& o) const { return shape == o.shape; }
  bool is_scalar() const { return size() == 1; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
};

inline bool all_finite(const double* p, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

inline void require_finite(const Array& a, const char* where) {
  if (!all_finite(a.ptr(), a.size()))
    throw numeric_error(std::string("non-finite value produced by ") + where);
}

}  // namespace binloc
