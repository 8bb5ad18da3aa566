#include "scsco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace scsco {

double mse(const Tensor& a, const Tensor& b) {
  check_shape(a.shape() == b.shape(), "mse: " + a.shape().str() + " vs " + b.shape().str());
  check_shape(a.size() > 0, "mse: empty images");
  // Pixel-major order, shared with fmse so an all-ones mask reproduces mse bitwise.
  const Shape s = a.shape();
  const std::size_t plane = s.plane();
  double acc = 0;
  for (int n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < s.c; ++c) {
        const std::size_t i = (static_cast<std::size_t>(n) * s.c + c) * plane + p;
        const double d = 255.0 * a[i] - 255.0 * b[i];
        acc += d * d;
      }
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse_value));
}

double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse(a, b)); }

double fmse(const Tensor& a, const Tensor& b, const Tensor& mask) {
  const Shape s = a.shape();
  check_shape(s == b.shape(), "fmse: " + s.str() + " vs " + b.shape().str());
  check_shape(mask.shape() == Shape{s.n, 1, s.h, s.w},
              "fmse: mask " + mask.shape().str() + " does not match " + s.str());
  const std::size_t plane = s.plane();
  double acc = 0;
  std::size_t pixels = 0;
  for (int n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < plane; ++p) {
      if (mask[n * plane + p] != 1.0f) continue;
      ++pixels;
      for (int c = 0; c < s.c; ++c) {
        const std::size_t i = (static_cast<std::size_t>(n) * s.c + c) * plane + p;
        const double d = 255.0 * a[i] - 255.0 * b[i];
        acc += d * d;
      }
    }
  if (pixels == 0) throw DegenerateRegion("fmse: empty foreground");
  return acc / static_cast<double>(pixels * s.c);
}

void PairwiseTally::validate() const {
  const std::size_t n = methods.size();
  if (n < 2) throw InvalidArgument("tally: need at least two methods");
  if (wins.size() != n) throw InvalidArgument("tally: win matrix row count differs from methods");
  for (std::size_t i = 0; i < n; ++i) {
    if (wins[i].size() != n) throw InvalidArgument("tally: win matrix is not square");
    if (wins[i][i] != 0) throw InvalidArgument("tally: diagonal must be zero");
    for (long long w : wins[i]) {
      if (w < 0) throw InvalidArgument("tally: negative count");
    }
  }
}

PairwiseTally PairwiseTally::scaled(long long factor) const {
  PairwiseTally out = *this;
  for (auto& row : out.wins)
    for (auto& w : row) w *= factor;
  return out;
}

double bt_log_likelihood(const PairwiseTally& tally, const std::vector<double>& strengths) {
  double ll = 0;
  const std::size_t n = tally.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || tally.wins[i][j] == 0) continue;
      ll += tally.wins[i][j] * std::log(strengths[i] / (strengths[i] + strengths[j]));
    }
  return ll;
}

namespace {

// Every method reachable from every other along "beat" edges.
bool strongly_connected(const PairwiseTally& tally) {
  const std::size_t n = tally.size();
  auto reach_all = [&](bool forward) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        const long long w = forward ? tally.wins[i][j] : tally.wins[j][i];
        if (w > 0 && !seen[j]) {
          seen[j] = true;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reach_all(true) && reach_all(false);
}

}  // namespace

BtFit bt_fit(const PairwiseTally& tally, int max_iters, double tol) {
  tally.validate();
  if (max_iters < 1) throw InvalidArgument("bt_fit: iterations must be >= 1");
  const std::size_t n = tally.size();
  for (std::size_t i = 0; i < n; ++i) {
    long long total = 0;
    for (std::size_t j = 0; j < n; ++j) total += tally.wins[i][j] + tally.wins[j][i];
    if (total == 0) {
      throw InvalidArgument("tally: method '" + tally.methods[i] + "' has no comparisons");
    }
  }
  if (!strongly_connected(tally)) {
    throw InvalidArgument(
        "tally: comparison graph is disconnected or some method never wins/loses "
        "against the rest; Bradley-Terry scores are not identifiable");
  }

  std::vector<double> p(n, 1.0);
  std::vector<double> wins_total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) wins_total[i] += static_cast<double>(tally.wins[i][j]);

  BtFit fit;
  fit.log_likelihood.push_back(bt_log_likelihood(tally, p));
  std::vector<double> prev_scores(n, 0.0);
  for (int it = 1; it <= max_iters; ++it) {
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double games = static_cast<double>(tally.wins[i][j] + tally.wins[j][i]);
        if (games > 0) denom += games / (p[i] + p[j]);
      }
      next[i] = wins_total[i] / denom;
    }
    // Geometric mean 1.
    double log_mean = 0;
    for (double v : next) log_mean += std::log(v);
    log_mean /= static_cast<double>(n);
    double change = 0;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::log(next[i]) - log_mean;
      next[i] = std::exp(scores[i]);
      change = std::max(change, std::abs(scores[i] - prev_scores[i]));
    }
    p = next;
    prev_scores = scores;
    fit.log_likelihood.push_back(bt_log_likelihood(tally, p));
    fit.iterations = it;
    if (change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.scores = prev_scores;
  return fit;
}

std::vector<double> bt_scores(const PairwiseTally& tally, int max_iters, double tol) {
  return bt_fit(tally, max_iters, tol).scores;
}

}  // namespace scsco
