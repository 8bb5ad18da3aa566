#include "scsco/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scsco {
namespace {

template <typename T>
void require_same(const char* op, Var<T> a, Var<T> b) {
  check_shape(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + a.shape().str() +
                                          " vs " + b.shape().str());
}

template <typename T>
void require_matrix(const char* op, const Shape& s) {
  check_shape(s.n == 1 && s.c == 1, std::string(op) + ": expected a [1,1,r,c] matrix, got " +
                                        s.str());
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const char* op, Var<T> x, Fwd fwd, Deriv deriv) {
  const auto& xv = x.value();
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return x.tape->record(op, std::move(out), {x},
                        [ix = x.id, deriv](Tape<T>& t, std::size_t self, const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          const auto& xv = t.value(ix);
                          const auto& yv = t.value(self);
                          auto& gx = t.grad_slot(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            gx[i] += g[i] * deriv(xv[i], yv[i]);
                          }
                        });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same("add", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return a.tape->record("add", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          t.accumulate(ia, g);
                          t.accumulate(ib, g);
                        });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same("sub", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return a.tape->record("sub", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          t.accumulate(ia, g);
                          if (t.requires_grad(ib)) {
                            auto& gb = t.grad_slot(ib);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                          }
                        });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same("mul", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape->record("mul", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          const auto& av = t.value(ia);
                          const auto& bv = t.value(ib);
                          if (t.requires_grad(ia)) {
                            auto& ga = t.grad_slot(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                          }
                          if (t.requires_grad(ib)) {
                            auto& gb = t.grad_slot(ib);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                          }
                        });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  require_same("div", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (bv[i] == T(0)) throw NumericError("div: division by zero");
    out[i] = av[i] / bv[i];
  }
  return a.tape->record("div", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self,
                                               const BasicTensor<T>& g) {
                          const auto& bv = t.value(ib);
                          const auto& yv = t.value(self);
                          if (t.requires_grad(ia)) {
                            auto& ga = t.grad_slot(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
                          }
                          if (t.requires_grad(ib)) {
                            auto& gb = t.grad_slot(ib);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[i] -= g[i] * yv[i] / bv[i];
                            }
                          }
                        });
}

template <typename T>
Var<T> scale(Var<T> x, double s) {
  const T k = static_cast<T>(s);
  return unary<T>("scale", x, [k](T v) { return v * k; }, [k](T, T) { return k; });
}

template <typename T>
Var<T> add_scalar(Var<T> x, double s) {
  const T k = static_cast<T>(s);
  return unary<T>("add_scalar", x, [k](T v) { return v + k; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> one_minus(Var<T> x) {
  return unary<T>("one_minus", x, [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> relu(Var<T> x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, double slope) {
  const T k = static_cast<T>(slope);
  return unary<T>(
      "leaky_relu", x, [k](T v) { return v > T(0) ? v : v * k; },
      [k](T v, T) { return v > T(0) ? T(1) : k; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        // Split by sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> sqrt(Var<T> x) {
  for (T v : x.value().data()) {
    if (!(v > T(0))) throw NumericError("sqrt: non-positive input");
  }
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> abs(Var<T> x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(Var<T> x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> sum(Var<T> x) {
  double acc = 0;
  for (T v : x.value().data()) acc += v;
  return x.tape->record("sum", BasicTensor<T>::scalar(static_cast<T>(acc)), {x},
                        [ix = x.id](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          auto& gx = t.grad_slot(ix);
                          for (auto& v : gx.data()) v += g[0];
                        });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const std::size_t count = x.value().size();
  check_shape(count > 0, "mean: empty tensor");
  double acc = 0;
  for (T v : x.value().data()) acc += v;
  return x.tape->record("mean", BasicTensor<T>::scalar(static_cast<T>(acc / count)), {x},
                        [ix = x.id, count](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          auto& gx = t.grad_slot(ix);
                          const T d = static_cast<T>(static_cast<double>(g[0]) / count);
                          for (auto& v : gx.data()) v += d;
                        });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  return x.tape->record("reshape", x.value().reshaped(shape), {x},
                        [ix = x.id](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          auto& gx = t.grad_slot(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

template <typename T>
Var<T> transpose(Var<T> x) {
  const auto& xv = x.value();
  require_matrix<T>("transpose", xv.shape());
  const int r = xv.rows();
  const int c = xv.cols();
  BasicTensor<T> out({1, 1, c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(j, i) = xv(i, j);
  return x.tape->record("transpose", std::move(out), {x},
                        [ix = x.id, r, c](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          auto& gx = t.grad_slot(ix);
                          for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j) gx(i, j) += g(j, i);
                        });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  check_shape(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
              "concat_channels: incompatible " + sa.str() + " and " + sb.str());
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  BasicTensor<T> out(so);
  const std::size_t pa = sa.c * sa.plane();
  const std::size_t pb = sb.c * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().data().begin() + n * pa, pa, out.data().begin() + n * (pa + pb));
    std::copy_n(b.value().data().begin() + n * pb, pb, out.data().begin() + n * (pa + pb) + pa);
  }
  return a.tape->record("concat_channels", std::move(out), {a, b},
                        [ia = a.id, ib = b.id, pa, pb, nn = sa.n](Tape<T>& t, std::size_t,
                                                                  const BasicTensor<T>& g) {
                          for (int n = 0; n < nn; ++n) {
                            const std::size_t base = n * (pa + pb);
                            if (t.requires_grad(ia)) {
                              auto& ga = t.grad_slot(ia);
                              for (std::size_t i = 0; i < pa; ++i) ga[n * pa + i] += g[base + i];
                            }
                            if (t.requires_grad(ib)) {
                              auto& gb = t.grad_slot(ib);
                              for (std::size_t i = 0; i < pb; ++i) {
                                gb[n * pb + i] += g[base + pa + i];
                              }
                            }
                          }
                        });
}

template <typename T>
Var<T> upsample_nearest(Var<T> x, int factor) {
  check_shape(factor >= 1, "upsample_nearest: factor must be >= 1");
  const Shape s = x.shape();
  const Shape so{s.n, s.c, s.h * factor, s.w * factor};
  BasicTensor<T> out(so);
  const auto& xv = x.value();
  for (int p = 0; p < s.n * s.c; ++p)
    for (int y = 0; y < so.h; ++y)
      for (int xx = 0; xx < so.w; ++xx)
        out[(p * so.h + y) * so.w + xx] = xv[(p * s.h + y / factor) * s.w + xx / factor];
  return x.tape->record("upsample_nearest", std::move(out), {x},
                        [ix = x.id, s, so, factor](Tape<T>& t, std::size_t,
                                                   const BasicTensor<T>& g) {
                          if (!t.requires_grad(ix)) return;
                          auto& gx = t.grad_slot(ix);
                          for (int p = 0; p < s.n * s.c; ++p)
                            for (int y = 0; y < so.h; ++y)
                              for (int xx = 0; xx < so.w; ++xx)
                                gx[(p * s.h + y / factor) * s.w + xx / factor] +=
                                    g[(p * so.h + y) * so.w + xx];
                        });
}

namespace {

struct ConvGeom {
  int n, ci, h, w, co, kh, kw, stride, pad, oh, ow;
};

// Range of output columns whose input column ox*stride + kx - pad lies in [0, w).
inline void valid_cols(const ConvGeom& g, int kx, int& lo, int& hi) {
  const int off = kx - g.pad;
  lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  const int last = g.w - 1 - off;
  hi = last < 0 ? -1 : std::min(g.ow - 1, last / g.stride);
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, int stride, int pad) {
  const Shape si = input.shape();
  const Shape sw = weight.shape();
  check_shape(stride >= 1, "conv2d: stride must be >= 1");
  check_shape(pad >= 0, "conv2d: pad must be >= 0");
  check_shape(sw.c == si.c, "conv2d: weight expects " + std::to_string(sw.c) +
                                " input channels, input " + si.str() + " has " +
                                std::to_string(si.c));
  check_shape(bias.shape() == Shape{1, sw.n, 1, 1},
              "conv2d: bias must be [1," + std::to_string(sw.n) + ",1,1], got " +
                  bias.shape().str());
  const int oh_num = si.h + 2 * pad - sw.h;
  const int ow_num = si.w + 2 * pad - sw.w;
  check_shape(oh_num >= 0 && ow_num >= 0 && si.n > 0,
              "conv2d: zero-sized output for input " + si.str() + " and kernel " + sw.str());
  const ConvGeom geo{si.n, si.c, si.h, si.w, sw.n, sw.h, sw.w, stride, pad,
                     oh_num / stride + 1, ow_num / stride + 1};

  BasicTensor<T> out({geo.n, geo.co, geo.oh, geo.ow});
  const T* in = input.value().data().data();
  const T* wt = weight.value().data().data();
  const T* bs = bias.value().data().data();
  T* op = out.data().data();
  const std::size_t in_plane = static_cast<std::size_t>(geo.h) * geo.w;
  const std::size_t out_plane = static_cast<std::size_t>(geo.oh) * geo.ow;

  for (int n = 0; n < geo.n; ++n) {
    for (int co = 0; co < geo.co; ++co) {
      T* o = op + (static_cast<std::size_t>(n) * geo.co + co) * out_plane;
      std::fill(o, o + out_plane, bs[co]);
      for (int ci = 0; ci < geo.ci; ++ci) {
        const T* ip = in + (static_cast<std::size_t>(n) * geo.ci + ci) * in_plane;
        for (int ky = 0; ky < geo.kh; ++ky) {
          for (int kx = 0; kx < geo.kw; ++kx) {
            const T wv = wt[((static_cast<std::size_t>(co) * geo.ci + ci) * geo.kh + ky) * geo.kw + kx];
            int lo, hi;
            valid_cols(geo, kx, lo, hi);
            for (int oy = 0; oy < geo.oh; ++oy) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= geo.h) continue;
              const T* irow = ip + static_cast<std::size_t>(iy) * geo.w + (kx - pad);
              T* orow = o + static_cast<std::size_t>(oy) * geo.ow;
              for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * irow[ox * stride];
            }
          }
        }
      }
    }
  }

  return input.tape->record(
      "conv2d", std::move(out), {input, weight, bias},
      [ii = input.id, iw = weight.id, ib = bias.id, geo, in_plane, out_plane](
          Tape<T>& t, std::size_t, const BasicTensor<T>& gout) {
        const T* g = gout.data().data();
        const T* in = t.value(ii).data().data();
        const T* wt = t.value(iw).data().data();
        const int stride = geo.stride;
        const int pad = geo.pad;
        if (t.requires_grad(ib)) {
          auto& gb = t.grad_slot(ib);
          for (int n = 0; n < geo.n; ++n)
            for (int co = 0; co < geo.co; ++co) {
              const T* gp = g + (static_cast<std::size_t>(n) * geo.co + co) * out_plane;
              T acc = 0;
              for (std::size_t i = 0; i < out_plane; ++i) acc += gp[i];
              gb[co] += acc;
            }
        }
        T* gi = t.requires_grad(ii) ? t.grad_slot(ii).data().data() : nullptr;
        T* gw = t.requires_grad(iw) ? t.grad_slot(iw).data().data() : nullptr;
        if (!gi && !gw) return;
        for (int n = 0; n < geo.n; ++n) {
          for (int co = 0; co < geo.co; ++co) {
            const T* gp = g + (static_cast<std::size_t>(n) * geo.co + co) * out_plane;
            for (int ci = 0; ci < geo.ci; ++ci) {
              const std::size_t ibase = (static_cast<std::size_t>(n) * geo.ci + ci) * in_plane;
              for (int ky = 0; ky < geo.kh; ++ky) {
                for (int kx = 0; kx < geo.kw; ++kx) {
                  const std::size_t widx =
                      ((static_cast<std::size_t>(co) * geo.ci + ci) * geo.kh + ky) * geo.kw + kx;
                  const T wv = wt[widx];
                  int lo, hi;
                  valid_cols(geo, kx, lo, hi);
                  T wacc = 0;
                  for (int oy = 0; oy < geo.oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= geo.h) continue;
                    const std::size_t roff = ibase + static_cast<std::size_t>(iy) * geo.w + (kx - pad);
                    const T* grow = gp + static_cast<std::size_t>(oy) * geo.ow;
                    if (gi) {
                      T* girow = gi + roff;
                      for (int ox = lo; ox <= hi; ++ox) girow[ox * stride] += wv * grow[ox];
                    }
                    if (gw) {
                      const T* irow = in + roff;
                      for (int ox = lo; ox <= hi; ++ox) wacc += grow[ox] * irow[ox * stride];
                    }
                  }
                  if (gw) gw[widx] += wacc;
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_matrix<T>("matmul", av.shape());
  require_matrix<T>("matmul", bv.shape());
  const int r = av.rows();
  const int k = av.cols();
  const int c = bv.cols();
  check_shape(bv.rows() == k, "matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                                  std::to_string(bv.rows()) + ")");
  BasicTensor<T> out({1, 1, r, c});
  for (int i = 0; i < r; ++i) {
    T* orow = &out(i, 0);
    for (int kk = 0; kk < k; ++kk) {
      const T aik = av(i, kk);
      const T* brow = &bv(kk, 0);
      for (int j = 0; j < c; ++j) orow[j] += aik * brow[j];
    }
  }
  return a.tape->record(
      "matmul", std::move(out), {a, b},
      [ia = a.id, ib = b.id, r, k, c](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
        const auto& av = t.value(ia);
        const auto& bv = t.value(ib);
        if (t.requires_grad(ia)) {
          auto& ga = t.grad_slot(ia);
          // dA = G * B^T
          for (int i = 0; i < r; ++i)
            for (int kk = 0; kk < k; ++kk) {
              T acc = 0;
              const T* grow = &g(i, 0);
              const T* brow = &bv(kk, 0);
              for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
              ga(i, kk) += acc;
            }
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad_slot(ib);
          // dB = A^T * G
          for (int i = 0; i < r; ++i)
            for (int kk = 0; kk < k; ++kk) {
              const T aik = av(i, kk);
              T* gbrow = &gb(kk, 0);
              const T* grow = &g(i, 0);
              for (int j = 0; j < c; ++j) gbrow[j] += aik * grow[j];
            }
        }
      });
}

template <typename T>
Var<T> softmax_rows(Var<T> logits, const BasicTensor<T>& additive_mask) {
  const auto& lv = logits.value();
  require_matrix<T>("softmax_rows", lv.shape());
  check_shape(additive_mask.shape() == lv.shape(), "softmax_rows: mask shape " +
                                                       additive_mask.shape().str() +
                                                       " does not match " + lv.shape().str());
  const int r = lv.rows();
  const int c = lv.cols();
  BasicTensor<T> out(lv.shape());
  for (int i = 0; i < r; ++i) {
    bool any_open = false;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < c; ++j) {
      if (additive_mask(i, j) > T(kMaskedLogit / 2)) any_open = true;
      mx = std::max(mx, lv(i, j) + additive_mask(i, j));
    }
    if (!any_open) {
      throw DegenerateRegion("softmax_rows: row " + std::to_string(i) +
                             " is fully masked (empty background region)");
    }
    double total = 0;
    for (int j = 0; j < c; ++j) {
      const T e = std::exp(lv(i, j) + additive_mask(i, j) - mx);
      out(i, j) = e;
      total += e;
    }
    for (int j = 0; j < c; ++j) out(i, j) = static_cast<T>(out(i, j) / total);
  }
  return logits.tape->record(
      "softmax_rows", std::move(out), {logits},
      [il = logits.id, r, c](Tape<T>& t, std::size_t self, const BasicTensor<T>& g) {
        if (!t.requires_grad(il)) return;
        const auto& y = t.value(self);
        auto& gl = t.grad_slot(il);
        for (int i = 0; i < r; ++i) {
          T dot = 0;
          for (int j = 0; j < c; ++j) dot += y(i, j) * g(i, j);
          for (int j = 0; j < c; ++j) gl(i, j) += y(i, j) * (g(i, j) - dot);
        }
      });
}

template <typename T>
Moments<T> weighted_channel_moments(Var<T> features, Var<T> weights) {
  const Shape sf = features.shape();
  const Shape sw = weights.shape();
  check_shape(sw == Shape{sf.n, 1, sf.h, sf.w}, "weighted_channel_moments: weights " + sw.str() +
                                                    " do not match features " + sf.str());
  const auto& fv = features.value();
  const auto& wv = weights.value();
  const std::size_t plane = sf.plane();
  BasicTensor<T> mu({sf.n, sf.c, 1, 1});
  BasicTensor<T> sigma({sf.n, sf.c, 1, 1});
  std::vector<double> wsum(sf.n);
  std::vector<double> var(static_cast<std::size_t>(sf.n) * sf.c);
  for (int n = 0; n < sf.n; ++n) {
    const T* w = wv.data().data() + n * plane;
    double s = 0;
    for (std::size_t p = 0; p < plane; ++p) s += w[p];
    if (!(s >= kMinRegionWeight)) {
      throw DegenerateRegion("weighted_channel_moments: region weight sum " + std::to_string(s) +
                             " below " + std::to_string(kMinRegionWeight) + " for sample " +
                             std::to_string(n));
    }
    wsum[n] = s;
    for (int c = 0; c < sf.c; ++c) {
      const T* f = fv.data().data() + (static_cast<std::size_t>(n) * sf.c + c) * plane;
      double m = 0;
      for (std::size_t p = 0; p < plane; ++p) m += static_cast<double>(w[p]) * f[p];
      m /= s;
      double v = 0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = f[p] - m;
        v += w[p] * d * d;
      }
      v /= s;
      mu[n * sf.c + c] = static_cast<T>(m);
      sigma[n * sf.c + c] = static_cast<T>(std::sqrt(v + kEpsInstance));
      var[n * sf.c + c] = v;
    }
  }
  Tape<T>& tape = *features.tape;
  Var<T> mu_var = tape.record(
      "moments_mu", std::move(mu), {features, weights},
      [iF = features.id, iW = weights.id, sf, wsum](Tape<T>& t, std::size_t self,
                                                    const BasicTensor<T>& g) {
        const auto& fv = t.value(iF);
        const auto& wv = t.value(iW);
        const auto& mu = t.value(self);
        const std::size_t plane = sf.plane();
        T* gf = t.requires_grad(iF) ? t.grad_slot(iF).data().data() : nullptr;
        T* gw = t.requires_grad(iW) ? t.grad_slot(iW).data().data() : nullptr;
        for (int n = 0; n < sf.n; ++n) {
          const T* w = wv.data().data() + n * plane;
          for (int c = 0; c < sf.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * sf.c + c) * plane;
            const double gs = g[n * sf.c + c] / wsum[n];
            const double m = mu[n * sf.c + c];
            for (std::size_t p = 0; p < plane; ++p) {
              if (gf) gf[base + p] += static_cast<T>(gs * w[p]);
              if (gw) gw[n * plane + p] += static_cast<T>(gs * (fv[base + p] - m));
            }
          }
        }
      });
  Var<T> sigma_var = tape.record(
      "moments_sigma", std::move(sigma), {features, weights},
      [iF = features.id, iW = weights.id, sf, wsum, var, mu_id = mu_var.id](
          Tape<T>& t, std::size_t self, const BasicTensor<T>& g) {
        const auto& fv = t.value(iF);
        const auto& wv = t.value(iW);
        const auto& mu = t.value(mu_id);
        const auto& sg = t.value(self);
        const std::size_t plane = sf.plane();
        T* gf = t.requires_grad(iF) ? t.grad_slot(iF).data().data() : nullptr;
        T* gw = t.requires_grad(iW) ? t.grad_slot(iW).data().data() : nullptr;
        for (int n = 0; n < sf.n; ++n) {
          const T* w = wv.data().data() + n * plane;
          for (int c = 0; c < sf.c; ++c) {
            const std::size_t idx = n * sf.c + c;
            const std::size_t base = idx * plane;
            // d sigma / d var = 1 / (2 sigma); the mean's own dependence cancels.
            const double gs = g[idx] / (2.0 * sg[idx] * wsum[n]);
            const double m = mu[idx];
            for (std::size_t p = 0; p < plane; ++p) {
              const double d = fv[base + p] - m;
              if (gf) gf[base + p] += static_cast<T>(gs * 2.0 * w[p] * d);
              if (gw) gw[n * plane + p] += static_cast<T>(gs * (d * d - var[idx]));
            }
          }
        }
      });
  return {mu_var, sigma_var};
}

template <typename T>
Var<T> avgpool_mask(Var<T> mask, int factor) {
  const Shape s = mask.shape();
  check_shape(factor >= 1, "avgpool_mask: factor must be >= 1");
  check_shape(s.h % factor == 0 && s.w % factor == 0,
              "avgpool_mask: " + s.str() + " not divisible by factor " + std::to_string(factor));
  const Shape so{s.n, s.c, s.h / factor, s.w / factor};
  const auto& mv = mask.value();
  BasicTensor<T> out(so);
  const T inv = T(1) / static_cast<T>(factor * factor);
  for (int p = 0; p < s.n * s.c; ++p)
    for (int oy = 0; oy < so.h; ++oy)
      for (int ox = 0; ox < so.w; ++ox) {
        T acc = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            acc += mv[(static_cast<std::size_t>(p) * s.h + oy * factor + dy) * s.w + ox * factor + dx];
        out[(static_cast<std::size_t>(p) * so.h + oy) * so.w + ox] = acc * inv;
      }
  return mask.tape->record(
      "avgpool_mask", std::move(out), {mask},
      [im = mask.id, s, so, factor, inv](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
        if (!t.requires_grad(im)) return;
        auto& gm = t.grad_slot(im);
        for (int p = 0; p < s.n * s.c; ++p)
          for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
              gm[(static_cast<std::size_t>(p) * s.h + y) * s.w + x] +=
                  g[(static_cast<std::size_t>(p) * so.h + y / factor) * so.w + x / factor] * inv;
      });
}

template <typename T>
Var<T> mul_mask(Var<T> x, Var<T> mask) {
  const Shape sx = x.shape();
  const Shape sm = mask.shape();
  check_shape(sm == Shape{sx.n, 1, sx.h, sx.w},
              "mul_mask: mask " + sm.str() + " does not match " + sx.str());
  const std::size_t plane = sx.plane();
  const auto& xv = x.value();
  const auto& mv = mask.value();
  BasicTensor<T> out(sx);
  for (int n = 0; n < sx.n; ++n)
    for (int c = 0; c < sx.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * sx.c + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) out[base + p] = xv[base + p] * mv[n * plane + p];
    }
  return x.tape->record(
      "mul_mask", std::move(out), {x, mask},
      [ix = x.id, im = mask.id, sx, plane](Tape<T>& t, std::size_t, const BasicTensor<T>& g) {
        const auto& xv = t.value(ix);
        const auto& mv = t.value(im);
        T* gx = t.requires_grad(ix) ? t.grad_slot(ix).data().data() : nullptr;
        T* gm = t.requires_grad(im) ? t.grad_slot(im).data().data() : nullptr;
        for (int n = 0; n < sx.n; ++n)
          for (int c = 0; c < sx.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * sx.c + c) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
              if (gx) gx[base + p] += g[base + p] * mv[n * plane + p];
              if (gm) gm[n * plane + p] += g[base + p] * xv[base + p];
            }
          }
      });
}

template <typename T>
Var<T> normalize_channels(Var<T> x, Var<T> mu, Var<T> sigma) {
  const Shape sx = x.shape();
  const Shape ss{sx.n, sx.c, 1, 1};
  check_shape(mu.shape() == ss && sigma.shape() == ss,
              "normalize_channels: statistics must be " + ss.str());
  const std::size_t plane = sx.plane();
  const auto& xv = x.value();
  const auto& mv = mu.value();
  const auto& sv = sigma.value();
  BasicTensor<T> out(sx);
  for (std::size_t k = 0; k < static_cast<std::size_t>(sx.n) * sx.c; ++k) {
    if (!(sv[k] > T(0))) throw NumericError("normalize_channels: non-positive sigma");
    for (std::size_t p = 0; p < plane; ++p) out[k * plane + p] = (xv[k * plane + p] - mv[k]) / sv[k];
  }
  return x.tape->record(
      "normalize_channels", std::move(out), {x, mu, sigma},
      [ix = x.id, imu = mu.id, isg = sigma.id, sx, plane](Tape<T>& t, std::size_t self,
                                                          const BasicTensor<T>& g) {
        const auto& sv = t.value(isg);
        const auto& y = t.value(self);
        T* gx = t.requires_grad(ix) ? t.grad_slot(ix).data().data() : nullptr;
        T* gmu = t.requires_grad(imu) ? t.grad_slot(imu).data().data() : nullptr;
        T* gsg = t.requires_grad(isg) ? t.grad_slot(isg).data().data() : nullptr;
        for (std::size_t k = 0; k < static_cast<std::size_t>(sx.n) * sx.c; ++k) {
          const T inv = T(1) / sv[k];
          T gsum = 0;
          T gy = 0;
          for (std::size_t p = 0; p < plane; ++p) {
            const T gv = g[k * plane + p];
            if (gx) gx[k * plane + p] += gv * inv;
            gsum += gv;
            gy += gv * y[k * plane + p];
          }
          if (gmu) gmu[k] -= gsum * inv;
          // d/dsigma of (x - mu)/sigma = -y/sigma
          if (gsg) gsg[k] -= gy * inv;
        }
      });
}

template <typename T>
Var<T> channel_affine(Var<T> x, Var<T> gain, Var<T> shift) {
  const Shape sx = x.shape();
  const Shape ss{sx.n, sx.c, 1, 1};
  check_shape(gain.shape() == ss && shift.shape() == ss,
              "channel_affine: coefficients must be " + ss.str());
  const std::size_t plane = sx.plane();
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = shift.value();
  BasicTensor<T> out(sx);
  for (std::size_t k = 0; k < static_cast<std::size_t>(sx.n) * sx.c; ++k)
    for (std::size_t p = 0; p < plane; ++p) out[k * plane + p] = xv[k * plane + p] * gv[k] + bv[k];
  return x.tape->record(
      "channel_affine", std::move(out), {x, gain, shift},
      [ix = x.id, ig = gain.id, ib = shift.id, sx, plane](Tape<T>& t, std::size_t,
                                                          const BasicTensor<T>& g) {
        const auto& xv = t.value(ix);
        const auto& gv = t.value(ig);
        T* gx = t.requires_grad(ix) ? t.grad_slot(ix).data().data() : nullptr;
        T* gg = t.requires_grad(ig) ? t.grad_slot(ig).data().data() : nullptr;
        T* gb = t.requires_grad(ib) ? t.grad_slot(ib).data().data() : nullptr;
        for (std::size_t k = 0; k < static_cast<std::size_t>(sx.n) * sx.c; ++k) {
          T gsum = 0;
          T gxs = 0;
          for (std::size_t p = 0; p < plane; ++p) {
            const T gvp = g[k * plane + p];
            if (gx) gx[k * plane + p] += gvp * gv[k];
            gsum += gvp;
            gxs += gvp * xv[k * plane + p];
          }
          if (gg) gg[k] += gxs;
          if (gb) gb[k] += gsum;
        }
      });
}

#define SCSCO_INSTANTIATE_OPS(T)                                                  \
  template Var<T> add(Var<T>, Var<T>);                                            \
  template Var<T> sub(Var<T>, Var<T>);                                            \
  template Var<T> mul(Var<T>, Var<T>);                                            \
  template Var<T> div(Var<T>, Var<T>);                                            \
  template Var<T> scale(Var<T>, double);                                          \
  template Var<T> add_scalar(Var<T>, double);                                     \
  template Var<T> one_minus(Var<T>);                                              \
  template Var<T> relu(Var<T>);                                                   \
  template Var<T> leaky_relu(Var<T>, double);                                     \
  template Var<T> sigmoid(Var<T>);                                                \
  template Var<T> sqrt(Var<T>);                                                   \
  template Var<T> abs(Var<T>);                                                    \
  template Var<T> square(Var<T>);                                                 \
  template Var<T> sum(Var<T>);                                                    \
  template Var<T> mean(Var<T>);                                                   \
  template Var<T> reshape(Var<T>, Shape);                                         \
  template Var<T> transpose(Var<T>);                                              \
  template Var<T> concat_channels(Var<T>, Var<T>);                                \
  template Var<T> upsample_nearest(Var<T>, int);                                  \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                       \
  template Var<T> matmul(Var<T>, Var<T>);                                         \
  template Var<T> softmax_rows(Var<T>, const BasicTensor<T>&);                    \
  template Moments<T> weighted_channel_moments(Var<T>, Var<T>);                   \
  template Var<T> avgpool_mask(Var<T>, int);                                      \
  template Var<T> mul_mask(Var<T>, Var<T>);                                       \
  template Var<T> normalize_channels(Var<T>, Var<T>, Var<T>);                     \
  template Var<T> channel_affine(Var<T>, Var<T>, Var<T>);

SCSCO_INSTANTIATE_OPS(float)
SCSCO_INSTANTIATE_OPS(double)

}  // namespace scsco
