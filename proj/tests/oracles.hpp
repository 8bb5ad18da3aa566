#pragma once

// Naive reference implementations used to cross-check the library. They
// loop over output elements one at a time and accumulate in ascending index
// order, which is the summation order the library promises.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "scsco/tensor.hpp"

namespace oracle {

using scsco::BasicTensor;
using scsco::Shape;

template <typename T>
BasicTensor<T> random_tensor(std::mt19937_64& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  BasicTensor<T> t(s);
  for (T& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                      int stride, int pad) {
  const Shape si = x.shape();
  const Shape sw = w.shape();
  const int oh = (si.h + 2 * pad - sw.h) / stride + 1;
  const int ow = (si.w + 2 * pad - sw.w) / stride + 1;
  BasicTensor<T> out({si.n, sw.n, oh, ow});
  for (int n = 0; n < si.n; ++n)
    for (int co = 0; co < sw.n; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b.at(0, co, 0, 0);
          for (int ci = 0; ci < si.c; ++ci)
            for (int ky = 0; ky < sw.h; ++ky)
              for (int kx = 0; kx < sw.w; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= si.h || ix < 0 || ix >= si.w) continue;
                acc += w.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
              }
          out.at(n, co, oy, ox) = acc;
        }
  return out;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out({1, 1, a.rows(), b.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      T acc = 0;
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

// Weighted mean and sqrt(weighted population variance + eps), accumulated
// in double.
template <typename T>
void weighted_moments(const BasicTensor<T>& f, const BasicTensor<T>& w, double eps,
                      BasicTensor<T>& mu, BasicTensor<T>& sigma) {
  const Shape s = f.shape();
  mu = BasicTensor<T>({s.n, s.c, 1, 1});
  sigma = BasicTensor<T>({s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    double total = 0;
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) total += w.at(n, 0, y, x);
    for (int c = 0; c < s.c; ++c) {
      double m = 0;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          m += static_cast<double>(w.at(n, 0, y, x)) * f.at(n, c, y, x);
      m /= total;
      double v = 0;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const double d = f.at(n, c, y, x) - m;
          const double wd = w.at(n, 0, y, x);
          v += wd * d * d;
        }
      v /= total;
      mu.at(n, c, 0, 0) = static_cast<T>(m);
      sigma.at(n, c, 0, 0) = static_cast<T>(std::sqrt(v + eps));
    }
  }
}

// Channel-by-channel inner products of two [1, c, h, w] maps over positions,
// divided by the position count.
template <typename T>
BasicTensor<T> gram(const BasicTensor<T>& f, const BasicTensor<T>& b) {
  const Shape s = f.shape();
  const T inv = static_cast<T>(1.0 / (s.h * s.w));
  BasicTensor<T> out({1, 1, s.c, s.c});
  for (int i = 0; i < s.c; ++i)
    for (int j = 0; j < s.c; ++j) {
      T acc = 0;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) acc += f.at(0, i, y, x) * b.at(0, j, y, x);
      out(i, j) = acc * inv;
    }
  return out;
}

// Foreground MSE by explicit enumeration of the foreground pixel set.
inline double fmse(const scsco::Tensor& a, const scsco::Tensor& b, const scsco::Tensor& mask) {
  const Shape s = a.shape();
  struct Px { int n, y, x; };
  std::vector<Px> fg;
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        if (mask.at(n, 0, y, x) == 1.0f) fg.push_back({n, y, x});
  double acc = 0;
  for (const Px& p : fg)
    for (int c = 0; c < s.c; ++c) {
      const double d = 255.0 * a.at(p.n, c, p.y, p.x) - 255.0 * b.at(p.n, c, p.y, p.x);
      acc += d * d;
    }
  return acc / static_cast<double>(fg.size() * s.c);
}

// Scalar Adam with bias correction, written out step by step.
struct ScalarAdam {
  double m = 0, v = 0;
  long long t = 0;

  double step(double param, double grad, double lr, double b1 = 0.9, double b2 = 0.999,
              double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace oracle
