#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scsco/tape.hpp"

namespace scsco {

// One argument of a checked function. Inputs with wrt == false (masks,
// detached targets) are passed as constants and never perturbed.
struct GradInput {
  TensorD value;
  bool wrt = true;
};

using GradFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckOptions {
  double h = 1e-3;
  double tol = 1e-4;
  // Relative error denominator is max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  // Above this many differentiable scalars, a fixed-seed subset is probed.
  std::size_t max_probes = 512;
  std::uint64_t seed = 0x5eed;
};

struct GradCheckReport {
  std::string op;
  std::size_t probed = 0;
  double max_rel_err = 0;
  double max_abs_err = 0;
  double tol = 0;
  bool pass = false;
};

// Compares the tape gradient of L = sum(r * f(inputs)), r a fixed-seed
// Gaussian projection, with central finite differences.
GradCheckReport grad_check(const std::string& name, const GradFn& fn,
                           const std::vector<GradInput>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace scsco
