#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scsco/gradcheck.hpp"

namespace scsco {

// Fixed-seed finite-difference checks for every differentiable operation,
// grouped by scope: "tensor" (primitives), "bain" (normalization layers),
// "loss" (style and contrastive losses) and "net" (end-to-end through the
// harmonizer).
struct GradCase {
  std::string scope;
  std::string name;
  std::function<GradCheckReport()> run;
};

const std::vector<std::string>& grad_scopes();

// All cases of one scope, or every case for "all". Unknown scopes throw
// InvalidArgument.
std::vector<GradCase> grad_cases(const std::string& scope);

struct GradSuiteResult {
  std::vector<GradCheckReport> reports;
  bool pass = true;
};

GradSuiteResult run_grad_suite(const std::string& scope,
                               const std::function<void(const GradCheckReport&)>& on_report = {});

}  // namespace scsco
