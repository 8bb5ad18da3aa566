#pragma once

#include <string>
#include <vector>

#include "scsco/tensor.hpp"

namespace scsco {

// Image metrics on the 0-255 scale. Inputs are [n, c, h, w] in [0, 1] and are
// scaled without rounding.
double mse(const Tensor& a, const Tensor& b);

inline constexpr double kPsnrCap = 100.0;

// 10 log10(255^2 / mse); kPsnrCap for identical images.
double psnr(const Tensor& a, const Tensor& b);
double psnr_from_mse(double mse_value);

// Squared error over pixels with mask == 1, divided by (pixel count * channels).
double fmse(const Tensor& a, const Tensor& b, const Tensor& mask);

// wins[i][j] = number of times method i was preferred over method j.
struct PairwiseTally {
  std::vector<std::string> methods;
  std::vector<std::vector<long long>> wins;

  std::size_t size() const { return methods.size(); }
  void validate() const;
  PairwiseTally scaled(long long factor) const;
};

struct BtFit {
  std::vector<double> scores;  // natural-log strengths, mean zero
  std::vector<double> log_likelihood;  // after each iteration (index 0: start)
  int iterations = 0;
  bool converged = false;
};

// Bradley-Terry maximum likelihood by minorization-maximization. Rejects
// tallies whose win graph is not strongly connected (no finite MLE).
BtFit bt_fit(const PairwiseTally& tally, int max_iters = 10000, double tol = 1e-10);
std::vector<double> bt_scores(const PairwiseTally& tally, int max_iters = 10000,
                              double tol = 1e-10);

double bt_log_likelihood(const PairwiseTally& tally, const std::vector<double>& strengths);

}  // namespace scsco
