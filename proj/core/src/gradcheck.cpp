#include "sepcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>
#include <utility>

#include "sepcnn/optim.hpp"

namespace sepcnn {

bool GradCheckReport::passed() const {
  return !tensors.empty() && std::all_of(tensors.begin(), tensors.end(), [](const auto& t) { return t.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& t : tensors) worst = std::max(worst, t.max_rel_error);
  return worst;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  char line[200];
  for (const auto& t : tensors) {
    std::snprintf(line, sizeof line, "%-44s n=%-7zu max_rel=%.3e max_abs=%.3e retries=%-3zu %s\n", t.name.c_str(),
                  t.count, t.max_rel_error, t.max_abs_error, t.kink_retries, t.passed ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

namespace {

// Central difference of loss() with respect to t[i].
template <typename LossFn>
double central_difference(Tensor64& t, std::size_t i, double h, LossFn& loss) {
  const double saved = t[i];
  t[i] = saved + h;
  const double plus = loss();
  t[i] = saved - h;
  const double minus = loss();
  t[i] = saved;
  return (plus - minus) / (2.0 * h);
}

// Compares every element of t's analytic gradient against central differences.
// An element that fails at the configured step is measured once more at a
// tenth of it: a ReLU or max-pool switch inside [t-h, t+h] spoils the wide
// difference but not the narrow one, while a wrong gradient fails both.
template <typename LossFn>
TensorCheck compare(std::string name, Tensor64 analytic, Tensor64& t, LossFn&& loss, const GradCheckOptions& opt) {
  if (opt.corrupt) opt.corrupt(name, analytic);
  TensorCheck check{std::move(name), analytic.size()};
  auto errors = [&](double a, double n) {
    const double abs_err = std::abs(a - n);
    return std::pair{abs_err, abs_err / std::max({std::abs(a), std::abs(n), opt.floor})};
  };
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    auto [abs_err, rel] = errors(a, central_difference(t, i, opt.step, loss));
    if (rel >= opt.tolerance && opt.kink_retry) {
      ++check.kink_retries;
      std::tie(abs_err, rel) = errors(a, central_difference(t, i, opt.step / 10.0, loss));
    }
    check.max_abs_error = std::max(check.max_abs_error, abs_err);
    check.max_rel_error = std::max(check.max_rel_error, rel);
  }
  check.passed = check.max_rel_error < opt.tolerance;
  return check;
}

}  // namespace

GradCheckReport grad_check(Model<double>& model, const Tensor64& input, const Tensor64& labels,
                           const GradCheckOptions& options) {
  const Mode saved_mode = model.mode();
  model.set_mode(Mode::train_no_dropout);
  auto loss = [&] { return cross_entropy(model.forward(input), labels).mean_loss; };

  const auto first = model.forward(input);
  const auto second = model.forward(input);
  if (!(first == second)) {
    model.set_mode(saved_mode);
    throw Error(ErrorCode::NonDeterministicForward, "two identical forwards disagree");
  }

  model.zero_grad();
  model.forward(input);
  model.backward(softmax_xent_grad(model.logits(), labels));

  GradCheckReport report;
  for (auto& p : model.trainable_params()) {
    report.tensors.push_back(compare(p.name, *p.slot.grad, *p.slot.value, loss, options));
  }
  model.set_mode(saved_mode);
  return report;
}

GradCheckReport grad_check(const Model<float>& model, const Tensor64& input, const Tensor64& labels,
                           const GradCheckOptions& options) {
  auto wide = model.cast<double>();
  return grad_check(wide, input, labels, options);
}

GradCheckReport grad_check(Layer<double>& layer, const Tensor64& input, const Tensor64& projection,
                           const GradCheckOptions& options) {
  Tensor64 x = input;
  auto loss = [&] {
    const auto y = layer.forward(x, Mode::train_no_dropout);
    if (y.shape() != projection.shape()) {
      throw Error(ErrorCode::ShapeMismatch, "projection " + projection.shape().to_string() + " vs output " +
                                                y.shape().to_string());
    }
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += projection[i] * y[i];
    return l;
  };
  const auto first = layer.forward(x, Mode::train_no_dropout);
  if (!(first == layer.forward(x, Mode::train_no_dropout))) {
    throw Error(ErrorCode::NonDeterministicForward, "two identical forwards disagree");
  }

  layer.zero_grad();
  layer.forward(x, Mode::train_no_dropout);
  Tensor64 grad_input = layer.backward(projection);

  GradCheckReport report;
  report.tensors.push_back(compare("input", grad_input, x, loss, options));
  for (auto& slot : layer.params()) {
    if (!slot.trainable) continue;
    report.tensors.push_back(compare(layer.name() + "." + slot.name, *slot.grad, *slot.value, loss, options));
  }
  return report;
}

}  // namespace sepcnn
