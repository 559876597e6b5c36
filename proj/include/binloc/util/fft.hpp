#pragma once

// Complex FFT: iterative radix-2 for power-of-two sizes, Bluestein's chirp-z
// for everything else (the 25 ms sub-windows are 400 samples at 16 kHz).

#include <complex>
#include <vector>

#include "binloc/core/error.hpp"

namespace binloc {

using cplx = std::complex<double>;

namespace fftdetail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place radix-2 Cooley-Tukey; inverse includes the 1/n scale.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  if (n <= 1) return;
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[static_cast<size_t>(i)], a[static_cast<size_t>(j)]);
  }
  const double pi = 3.14159265358979323846264338327950288;
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / len * (inverse ? 1.0 : -1.0);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        cplx u = a[static_cast<size_t>(i + k)];
        cplx v = a[static_cast<size_t>(i + k + len / 2)] * w;
        a[static_cast<size_t>(i + k)] = u + v;
        a[static_cast<size_t>(i + k + len / 2)] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / n;
    for (auto& x : a) x *= inv;
  }
}

}  // namespace fftdetail

// One transform size, forward and inverse. Bluestein tables are built once.
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    require(n >= 1, "fft size must be positive");
    if (!fftdetail::is_pow2(n_)) build_bluestein();
  }

  int size() const { return n_; }

  std::vector<cplx> forward(std::vector<cplx> a) const { return run(std::move(a), false); }
  std::vector<cplx> inverse(std::vector<cplx> a) const { return run(std::move(a), true); }

  // Real input -> first n/2+1 bins.
  std::vector<cplx> forward_real(const std::vector<double>& x) const {
    require(static_cast<int>(x.size()) == n_, "fft input length mismatch");
    std::vector<cplx> a(x.begin(), x.end());
    a = forward(std::move(a));
    a.resize(static_cast<size_t>(n_ / 2 + 1));
    return a;
  }

  // Hermitian half-spectrum (n/2+1 bins) -> real signal of length n.
  std::vector<double> inverse_real(const std::vector<cplx>& half) const {
    require(static_cast<int>(half.size()) == n_ / 2 + 1, "half-spectrum length mismatch");
    std::vector<cplx> a(static_cast<size_t>(n_));
    for (int k = 0; k <= n_ / 2; ++k) a[static_cast<size_t>(k)] = half[static_cast<size_t>(k)];
    for (int k = n_ / 2 + 1; k < n_; ++k) a[static_cast<size_t>(k)] = std::conj(half[static_cast<size_t>(n_ - k)]);
    a = inverse(std::move(a));
    std::vector<double> out(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) out[static_cast<size_t>(i)] = a[static_cast<size_t>(i)].real();
    return out;
  }

 private:
  std::vector<cplx> run(std::vector<cplx> a, bool inverse) const {
    require(static_cast<int>(a.size()) == n_, "fft input length mismatch");
    if (fftdetail::is_pow2(n_)) {
      fftdetail::fft_pow2(a, inverse);
      return a;
    }
    if (!inverse) return bluestein(std::move(a));
    // inverse via conj(forward(conj(x)))/n
    for (auto& v : a) v = std::conj(v);
    a = bluestein(std::move(a));
    const double inv = 1.0 / n_;
    for (auto& v : a) v = std::conj(v) * inv;
    return a;
  }

  void build_bluestein() {
    m_ = fftdetail::next_pow2(2 * n_ - 1);
    chirp_.resize(static_cast<size_t>(n_));
    const double pi = 3.14159265358979323846264338327950288;
    for (int k = 0; k < n_; ++k) {
      // exp(-i*pi*k^2/n), k^2 reduced mod 2n to keep the argument small
      const long long k2 = (static_cast<long long>(k) * k) % (2LL * n_);
      const double ang = -pi * static_cast<double>(k2) / n_;
      chirp_[static_cast<size_t>(k)] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> b(static_cast<size_t>(m_), cplx(0.0, 0.0));
    b[0] = std::conj(chirp_[0]);
    for (int k = 1; k < n_; ++k) {
      b[static_cast<size_t>(k)] = std::conj(chirp_[static_cast<size_t>(k)]);
      b[static_cast<size_t>(m_ - k)] = std::conj(chirp_[static_cast<size_t>(k)]);
    }
    fftdetail::fft_pow2(b, false);
    bhat_ = std::move(b);
  }

  std::vector<cplx> bluestein(std::vector<cplx> x) const {
    std::vector<cplx> a(static_cast<size_t>(m_), cplx(0.0, 0.0));
    for (int k = 0; k < n_; ++k)
      a[static_cast<size_t>(k)] = x[static_cast<size_t>(k)] * chirp_[static_cast<size_t>(k)];
    fftdetail::fft_pow2(a, false);
    for (int k = 0; k < m_; ++k) a[static_cast<size_t>(k)] *= bhat_[static_cast<size_t>(k)];
    fftdetail::fft_pow2(a, true);
    std::vector<cplx> out(static_cast<size_t>(n_));
    for (int k = 0; k < n_; ++k)
      out[static_cast<size_t>(k)] = a[static_cast<size_t>(k)] * chirp_[static_cast<size_t>(k)];
    return out;
  }

  int n_;
  int m_ = 0;
  std::vector<cplx> chirp_;
  std::vector<cplx> bhat_;
};

}  // namespace binloc
