#include "sepcnn_cli/checks.hpp"

#include "sepcnn/optim.hpp"

namespace sepcnn::cli {

namespace {

void open_biases(std::vector<ParamSlot<double>> slots, Rng& rng) {
  for (auto& s : slots) {
    if (s.trainable && s.name.ends_with("bias")) *s.value = Tensor64::random(s.value->shape(), UniformDist{0.05, 0.3}, rng);
  }
}

GradCheckReport check_layer(Layer<double>& layer, const Shape& in, Rng& rng, const GradCheckOptions& opts) {
  open_biases(layer.params(), rng);
  const auto x = Tensor64::random(in, UniformDist{-1.0, 1.0}, rng);
  const auto proj = Tensor64::random(layer.output_shape(in), UniformDist{-1.0, 1.0}, rng);
  return grad_check(layer, x, proj, opts);
}

}  // namespace

const std::vector<std::string>& gradcheck_scopes() {
  static const std::vector<std::string> scopes = {"full", "dense", "batchnorm", "se", "sepconv"};
  return scopes;
}

ScopedCheck run_gradcheck(std::string_view scope, std::uint64_t seed, bool flip_sign) {
  Rng rng(seed);
  GradCheckOptions opts;
  if (flip_sign) {
    opts.corrupt = [](std::string_view, Tensor64& g) {
      for (auto& v : g.data()) v = -v;
    };
  }
  ScopedCheck out{std::string(scope), 1e-5, {}};
  opts.tolerance = out.tolerance;

  if (scope == "full") {
    ModelConfig cfg;
    cfg.input_h = cfg.input_w = 12;
    cfg.input_c = 1;
    cfg.filter_ladder = {4};
    cfg.se_ratio = 2;
    cfg.head_widths = {6};
    cfg.head_dropout = {0.3};
    cfg.num_classes = 3;
    auto model = build_model<double>(cfg, rng);
    for (auto& p : model.trainable_params()) {
      if (p.name.ends_with("bias")) *p.slot.value = Tensor64::random(p.slot.value->shape(), UniformDist{0.05, 0.3}, rng);
    }
    const auto x = Tensor64::random(Shape{4, 12, 12, 1}, UniformDist{0.0, 1.0}, rng);
    out.tolerance = opts.tolerance = 1e-4;
    out.report = grad_check(model, x, one_hot<double>({0, 1, 2, 1}, 3), opts);
  } else if (scope == "dense") {
    Dense<double> layer(6, 4, rng);
    out.report = check_layer(layer, Shape{3, 6}, rng, opts);
  } else if (scope == "batchnorm") {
    BatchNorm<double> layer(4, 1e-3, 0.99);
    out.report = check_layer(layer, Shape{3, 3, 3, 4}, rng, opts);
  } else if (scope == "se") {
    SEBlock<double> layer(8, 2, rng);
    out.report = check_layer(layer, Shape{2, 4, 4, 8}, rng, opts);
  } else if (scope == "sepconv") {
    SeparableConv2D<double> layer(3, 4, ConvGeometry{}, rng);
    out.report = check_layer(layer, Shape{2, 6, 6, 3}, rng, opts);
  } else {
    throw Error(ErrorCode::BadConfig, "unknown gradcheck scope '" + std::string(scope) + "'");
  }
  return out;
}

}  // namespace sepcnn::cli
