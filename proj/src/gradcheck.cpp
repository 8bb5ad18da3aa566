#include "scsco/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace scsco {
namespace {

double projected(const GradFn& fn, const std::vector<GradInput>& inputs,
                 const TensorD& projection) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (const auto& in : inputs) vars.push_back(tape.constant(in.value));
  const auto& y = fn(tape, vars).value();
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += projection[i] * y[i];
  return acc;
}

}  // namespace

GradCheckReport grad_check(const std::string& name, const GradFn& fn,
                           const std::vector<GradInput>& inputs,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.op = name;
  report.tol = options.tol;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Analytic pass.
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.push_back(tape.leaf(in.value, in.wrt));
  const Var<double> out = fn(tape, vars);
  TensorD projection(out.shape());
  for (auto& v : projection.data()) v = normal(rng);
  tape.backward(out, projection);

  std::vector<TensorD> analytic;
  for (const auto& v : vars) analytic.push_back(tape.grad(v));

  // (input, flat index) pairs to probe.
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].wrt) continue;
    for (std::size_t i = 0; i < inputs[k].value.size(); ++i) probes.emplace_back(k, i);
  }
  if (probes.size() > options.max_probes) {
    std::shuffle(probes.begin(), probes.end(), rng);
    probes.resize(options.max_probes);
    std::sort(probes.begin(), probes.end());
  }

  std::vector<GradInput> work = inputs;
  for (const auto& [k, i] : probes) {
    const double x0 = work[k].value[i];
    work[k].value[i] = x0 + options.h;
    const double up = projected(fn, work, projection);
    work[k].value[i] = x0 - options.h;
    const double down = projected(fn, work, projection);
    work[k].value[i] = x0;
    const double numeric = (up - down) / (2 * options.h);
    const double a = analytic[k][i];
    const double abs_err = std::abs(a - numeric);
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
  }
  report.probed = probes.size();
  report.pass = report.max_rel_err <= options.tol;
  return report;
}

}  // namespace scsco
