#include "goft/verify.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "goft/adapter.hpp"
#include "goft/align.hpp"
#include "goft/autodiff.hpp"
#include "goft/cayley.hpp"
#include "goft/error.hpp"

namespace goft {
namespace {

// Tracks the worst error of one property. NaN always counts as a failure.
class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    result_.name = std::move(name);
    result_.tolerance = tolerance;
    result_.passed = true;
  }

  void observe(double err, const std::string& where) {
    if (!std::isnan(result_.worst) && !(err <= result_.worst)) {
      result_.worst = err;
      result_.detail = where;
    }
    if (!(err <= result_.tolerance)) result_.passed = false;
  }

  PropertyResult done() { return result_; }

 private:
  PropertyResult result_;
};

std::string at(std::size_t d, std::uint64_t seed) {
  return "d=" + std::to_string(d) + " seed=" + std::to_string(seed);
}

Vector gaussian_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = n01(rng);
  return v;
}

Matrix gaussian_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = n01(rng);
  return m;
}

std::vector<double> uniform_angles(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  std::vector<double> a(count);
  for (auto& x : a) x = u(rng);
  return a;
}

PropertyResult plan_counts(const VerifyOptions& opt) {
  Tracker t("plan-counts", 0.0);
  for (std::size_t d : opt.dims) {
    const RotationPlan plan = build_plan(d);
    std::size_t stages = 0;
    while ((std::size_t{1} << stages) < d) ++stages;
    double bad = 0.0;
    if (plan.total_pairs() != d - 1 || plan.stage_count() != stages) bad = 1.0;
    std::set<std::size_t> zeroed;
    for (std::size_t r = 1; r <= plan.stage_count(); ++r) {
      std::set<std::size_t> touched;
      for (const auto& p : plan.stage(r)) {
        if (!touched.insert(p.i).second || !touched.insert(p.j).second) bad = 1.0;
        if (p.j >= d || p.i >= p.j) bad = 1.0;
        zeroed.insert(p.j);
      }
    }
    if (zeroed.size() != d - 1 || zeroed.count(0) != 0) bad = 1.0;
    t.observe(bad, "d=" + std::to_string(d));
  }
  return t.done();
}

void orthogonality(const VerifyOptions& opt, std::vector<PropertyResult>& out) {
  Tracker ortho("orthogonality", 1e-10);
  Tracker det("determinant", 1e-10);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      auto angles = uniform_angles(rng, d - 1);
      if (opt.corrupt_angles) angles[0] = std::numeric_limits<double>::quiet_NaN();
      const Matrix r = dense_matrix(GivensChain(build_plan(d), std::move(angles)));
      const auto id = Matrix::Identity(r.rows(), r.cols());
      ortho.observe((r.transpose() * r - id).norm(), at(d, seed));
      det.observe(std::abs(r.determinant() - 1.0), at(d, seed));
    }
  }
  out.push_back(ortho.done());
  out.push_back(det.done());
}

PropertyResult cayley_orthogonality(const VerifyOptions& opt) {
  Tracker t("cayley-orthogonality", 1e-10);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      std::normal_distribution<double> n01(0.0, 0.5);
      std::vector<double> q(SkewParam::count(d));
      for (auto& x : q) x = n01(rng);
      const Matrix r = cayley(SkewParam(d, q));
      const auto id = Matrix::Identity(r.rows(), r.cols());
      t.observe((r.transpose() * r - id).norm(), at(d, seed));
      t.observe(std::abs(r.determinant() - 1.0), at(d, seed) + " (det)");
    }
  }
  return t.done();
}

PropertyResult alignment(const VerifyOptions& opt) {
  Tracker t("alignment", 1e-9);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      const Vector x = gaussian_vector(rng, d);
      t.observe(align_parallel(x, build_plan(d)).residual, at(d, seed) + " (tree)");
      t.observe(align_sequential(x).residual, at(d, seed) + " (sequential)");
    }
  }
  return t.done();
}

PropertyResult transport_property(const VerifyOptions& opt) {
  Tracker t("transport", 1e-9);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      const Vector x = gaussian_vector(rng, d);
      Vector y = gaussian_vector(rng, d);
      y *= x.norm() / y.norm();
      const TransportMap map = transport(x, y);
      t.observe((map.apply(x) - y).cwiseAbs().maxCoeff(), at(d, seed));
    }
  }
  return t.done();
}

void gradients(const VerifyOptions& opt, std::vector<PropertyResult>& out) {
  constexpr double kTol = 1e-5;
  Tracker goft("gradient-goft", kTol);
  Tracker qgoft("gradient-qgoft", kTol);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      const Matrix input = gaussian_matrix(rng, d, 3);
      const auto loss = quadratic_loss(gaussian_matrix(rng, d, 3));
      const GivensChain g(build_plan(d), uniform_angles(rng, d - 1));
      goft.observe(grad_check(g, input, loss, kTol).max_rel_error, at(d, seed));

      QuasiChain q(build_plan(d));
      std::normal_distribution<double> n01(0.0, 0.3);
      for (auto& b : q.blocks()) {
        b = QuasiBlock::from_rotation(uniform_angles(rng, 1)[0]);
        b.alpha = {b.alpha[0] + n01(rng), b.alpha[1] + n01(rng)};
        b.beta = {b.beta[0] + n01(rng), b.beta[1] + n01(rng)};
      }
      qgoft.observe(grad_check(q, input, loss, kTol).max_rel_error, at(d, seed));
    }
  }
  out.push_back(goft.done());
  out.push_back(qgoft.done());
}

PropertyResult merge_equivalence(const VerifyOptions& opt) {
  Tracker t("merge-equivalence", 1e-10);
  for (std::size_t d : opt.dims) {
    for (std::uint64_t seed : opt.seeds) {
      std::mt19937_64 rng(seed * 1000 + d);
      const FrozenWeight w{gaussian_matrix(rng, d, 4), gaussian_vector(rng, 4)};
      for (Method m : {Method::kGoft, Method::kQGoft, Method::kGoftStar, Method::kOftCayley}) {
        Adapter a(w, m);
        auto p = a.parameters();
        std::normal_distribution<double> n01(0.0, 0.3);
        for (auto& x : p) x += n01(rng);
        a.set_parameters(p);
        const Matrix probe = gaussian_matrix(rng, d, 8);
        const double dev =
            (plain_forward(merge(a), probe) - forward_input_side(a, probe)).cwiseAbs().maxCoeff();
        t.observe(dev, at(d, seed) + " " + std::string(to_string(m)));
      }
    }
  }
  return t.done();
}

}  // namespace

bool VerifyReport::passed() const noexcept {
  for (const auto& p : properties)
    if (!p.passed) return false;
  return !properties.empty();
}

VerifyReport run_verify(const VerifyOptions& options) {
  VerifyReport report;
  auto& out = report.properties;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      out.push_back(PropertyResult{name, false, 0.0, 0.0, std::string("threw: ") + e.what()});
    }
  };
  guarded("plan-counts", [&] { out.push_back(plan_counts(options)); });
  guarded("orthogonality", [&] { orthogonality(options, out); });
  guarded("cayley-orthogonality", [&] { out.push_back(cayley_orthogonality(options)); });
  guarded("alignment", [&] { out.push_back(alignment(options)); });
  guarded("transport", [&] { out.push_back(transport_property(options)); });
  guarded("gradients", [&] { gradients(options, out); });
  guarded("merge-equivalence", [&] { out.push_back(merge_equivalence(options)); });
  return report;
}

}  // namespace goft
