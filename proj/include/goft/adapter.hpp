#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "goft/cayley.hpp"
#include "goft/chain.hpp"

namespace goft {

enum class Method { kGoft, kQGoft, kGoftStar, kOftCayley };

std::string_view to_string(Method m) noexcept;
/// Accepts "goft", "qgoft", "goft-star", "oft-cayley"; throws ConfigError.
Method parse_method(std::string_view name);

/// Pretrained weight, stored d x n (input dim d, output dim n).
struct FrozenWeight {
  Matrix w;
  std::optional<Vector> bias;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w.rows()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(w.cols()); }
};

/// W^T X (+ bias) for X with one sample per column.
Matrix plain_forward(const FrozenWeight& weight, const Matrix& x);

using Transform = std::variant<GivensChain, QuasiChain, NormOnlyChain, CayleyTransform>;

/// A frozen linear layer with a learnable transform on its input dimension.
/// Forward computes ((T W)^T x) + bias, with T applied to W by the staged
/// kernel. W and the bias are read-only through this interface.
class Adapter {
 public:
  /// Identity-initialized transform for `method`. `cayley_block` selects the
  /// OFT block size (0 means full d) and is ignored by the other methods.
  Adapter(FrozenWeight weight, Method method, std::size_t cayley_block = 0);
  /// Wraps an existing transform; throws ShapeError when its d differs.
  Adapter(FrozenWeight weight, Transform transform);

  Method method() const noexcept;
  const FrozenWeight& weight() const noexcept { return weight_; }
  const Transform& transform() const noexcept { return transform_; }
  Transform& transform() noexcept { return transform_; }

  std::size_t input_dim() const noexcept { return weight_.input_dim(); }
  std::size_t output_dim() const noexcept { return weight_.output_dim(); }

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  /// T W, computed column-wise without materializing T (except for the
  /// Cayley baseline, which is dense by nature).
  Matrix transformed_weight() const;

 private:
  FrozenWeight weight_;
  Transform transform_;
};

Matrix forward(const Adapter& adapter, const Matrix& x);
Vector forward(const Adapter& adapter, const Vector& x);

/// Same map as forward, evaluated as W^T (R^T x) without forming R W.
/// Merge checks compare against this path.
Matrix forward_input_side(const Adapter& adapter, const Matrix& x);

/// Sum over blocks of <alpha, beta>^2.
double ortho_penalty(const QuasiChain& chain);
/// Throws ModeError unless the transform is a QuasiChain.
double ortho_penalty(const Transform& transform);

/// d(ortho_penalty)/d(params) in the flat QuasiChain layout.
std::vector<double> ortho_penalty_gradient(const QuasiChain& chain);

/// max_i |<alpha_i, beta_i>|.
double max_abs_inner(const QuasiChain& chain);

/// G^T G = [[|alpha|^2, <alpha, beta>], [<alpha, beta>, |beta|^2]].
Eigen::Matrix2d block_gram(const QuasiBlock& block);

/// W* = T W as a new FrozenWeight (bias carried over); the adapter is untouched.
FrozenWeight merge(const Adapter& adapter);

/// goft: d-1, qgoft: 4(d-1), goft-star: 2d-1, oft-cayley: (d/b) b(b-1)/2.
std::size_t param_count(const Adapter& adapter);
std::size_t param_count(Method method, std::size_t d, std::size_t cayley_block = 0);

}  // namespace goft
