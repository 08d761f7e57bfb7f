#include "goft/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "goft/error.hpp"

namespace goft {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Transform identity_transform(Method method, std::size_t d, std::size_t cayley_block) {
  switch (method) {
    case Method::kGoft:
      return GivensChain(build_plan(d));
    case Method::kQGoft:
      return QuasiChain(build_plan(d));
    case Method::kGoftStar:
      return NormOnlyChain(build_plan(d));
    case Method::kOftCayley:
      return CayleyTransform(d, cayley_block == 0 ? d : cayley_block);
  }
  throw ConfigError("unknown method");
}

std::size_t transform_dim(const Transform& t) {
  return std::visit([](const auto& c) { return c.dim(); }, t);
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::kGoft:
      return "goft";
    case Method::kQGoft:
      return "qgoft";
    case Method::kGoftStar:
      return "goft-star";
    case Method::kOftCayley:
      return "oft-cayley";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kGoft, Method::kQGoft, Method::kGoftStar, Method::kOftCayley}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected goft, qgoft, goft-star or oft-cayley)");
}

Matrix plain_forward(const FrozenWeight& weight, const Matrix& x) {
  if (x.rows() != weight.w.rows()) {
    throw ShapeError("forward: input has " + std::to_string(x.rows()) + " rows, weight expects " +
                     std::to_string(weight.w.rows()));
  }
  Matrix y = weight.w.transpose() * x;
  if (weight.bias) y.colwise() += *weight.bias;
  return y;
}

Adapter::Adapter(FrozenWeight weight, Method method, std::size_t cayley_block)
    : weight_(std::move(weight)),
      transform_(identity_transform(method, weight_.input_dim(), cayley_block)) {
  if (weight_.bias && static_cast<std::size_t>(weight_.bias->size()) != weight_.output_dim()) {
    throw ShapeError("bias length must equal the weight's output dimension");
  }
}

Adapter::Adapter(FrozenWeight weight, Transform transform)
    : weight_(std::move(weight)), transform_(std::move(transform)) {
  if (transform_dim(transform_) != weight_.input_dim()) {
    throw ShapeError("transform dimension " + std::to_string(transform_dim(transform_)) +
                     " does not match weight input dimension " +
                     std::to_string(weight_.input_dim()));
  }
  if (weight_.bias && static_cast<std::size_t>(weight_.bias->size()) != weight_.output_dim()) {
    throw ShapeError("bias length must equal the weight's output dimension");
  }
}

Method Adapter::method() const noexcept {
  return std::visit(Overloaded{
                        [](const GivensChain&) { return Method::kGoft; },
                        [](const QuasiChain&) { return Method::kQGoft; },
                        [](const NormOnlyChain&) { return Method::kGoftStar; },
                        [](const CayleyTransform&) { return Method::kOftCayley; },
                    },
                    transform_);
}

std::vector<double> Adapter::parameters() const {
  return std::visit([](const auto& c) { return goft::parameters(c); }, transform_);
}

void Adapter::set_parameters(std::span<const double> values) {
  std::visit([values](auto& c) { goft::set_parameters(c, values); }, transform_);
}

Matrix Adapter::transformed_weight() const {
  return std::visit([this](const auto& c) { return apply_chain_matrix(c, weight_.w); },
                    transform_);
}

Matrix forward(const Adapter& adapter, const Matrix& x) {
  if (static_cast<std::size_t>(x.rows()) != adapter.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.rows()) + " rows, adapter expects " +
                     std::to_string(adapter.input_dim()));
  }
  Matrix y = adapter.transformed_weight().transpose() * x;
  if (adapter.weight().bias) y.colwise() += *adapter.weight().bias;
  return y;
}

Vector forward(const Adapter& adapter, const Vector& x) {
  return forward(adapter, Matrix(x)).col(0);
}

Matrix forward_input_side(const Adapter& adapter, const Matrix& x) {
  if (static_cast<std::size_t>(x.rows()) != adapter.input_dim()) {
    throw ShapeError("forward_input_side: input has " + std::to_string(x.rows()) +
                     " rows, adapter expects " + std::to_string(adapter.input_dim()));
  }
  Matrix rx(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Vector col = x.col(c);
    rx.col(c) = std::visit(
        [&](const auto& t) -> Vector {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, NormOnlyChain>) {
            Vector scaled = col;
            for (Eigen::Index k = 0; k < scaled.size(); ++k) {
              scaled[k] *= t.scale()[static_cast<std::size_t>(k)];
            }
            return transpose_apply(t.base(), scaled);
          } else if constexpr (std::is_same_v<T, CayleyTransform>) {
            return t.dense().transpose() * col;
          } else {
            return transpose_apply(t, col);
          }
        },
        adapter.transform());
  }
  Matrix y = adapter.weight().w.transpose() * rx;
  if (adapter.weight().bias) y.colwise() += *adapter.weight().bias;
  return y;
}

double ortho_penalty(const QuasiChain& chain) {
  double total = 0.0;
  for (const auto& b : chain.blocks()) {
    const double ip = b.inner();
    total += ip * ip;
  }
  return total;
}

double ortho_penalty(const Transform& transform) {
  if (const auto* q = std::get_if<QuasiChain>(&transform)) return ortho_penalty(*q);
  throw ModeError("orthogonality penalty is only defined for qgoft transforms");
}

std::vector<double> ortho_penalty_gradient(const QuasiChain& chain) {
  std::vector<double> g;
  g.reserve(4 * chain.blocks().size());
  for (const auto& b : chain.blocks()) {
    const double two_ip = 2.0 * b.inner();
    g.insert(g.end(), {two_ip * b.beta[0], two_ip * b.beta[1], two_ip * b.alpha[0],
                       two_ip * b.alpha[1]});
  }
  return g;
}

double max_abs_inner(const QuasiChain& chain) {
  double m = 0.0;
  for (const auto& b : chain.blocks()) m = std::max(m, std::abs(b.inner()));
  return m;
}

Eigen::Matrix2d block_gram(const QuasiBlock& block) {
  const double aa = block.alpha[0] * block.alpha[0] + block.alpha[1] * block.alpha[1];
  const double bb = block.beta[0] * block.beta[0] + block.beta[1] * block.beta[1];
  const double ab = block.inner();
  Eigen::Matrix2d g;
  g << aa, ab, ab, bb;
  return g;
}

FrozenWeight merge(const Adapter& adapter) {
  return FrozenWeight{adapter.transformed_weight(), adapter.weight().bias};
}

std::size_t param_count(Method method, std::size_t d, std::size_t cayley_block) {
  switch (method) {
    case Method::kGoft:
      return d - 1;
    case Method::kQGoft:
      return 4 * (d - 1);
    case Method::kGoftStar:
      return (d - 1) + d;
    case Method::kOftCayley:
      return block_diag_param_count(d, cayley_block == 0 ? d : cayley_block);
  }
  return 0;
}

std::size_t param_count(const Adapter& adapter) {
  std::size_t block = 0;
  if (const auto* c = std::get_if<CayleyTransform>(&adapter.transform())) block = c->block_size();
  return param_count(adapter.method(), adapter.input_dim(), block);
}

}  // namespace goft
