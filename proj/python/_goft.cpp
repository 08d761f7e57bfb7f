#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "goft/adapter.hpp"
#include "goft/align.hpp"
#include "goft/autodiff.hpp"
#include "goft/bench.hpp"
#include "goft/cayley.hpp"
#include "goft/error.hpp"
#include "goft/io.hpp"
#include "goft/trainer.hpp"
#include "goft/verify.hpp"

namespace py = pybind11;
using namespace goft;

namespace {

GivensChain givens(const std::vector<double>& angles) {
  return GivensChain(build_plan(angles.size() + 1), angles);
}

QuasiChain quasi(std::size_t d, const std::vector<double>& flat) {
  QuasiChain q(build_plan(d));
  set_parameters(q, flat);
  return q;
}

py::dict alignment_dict(const AlignmentResult& r) {
  py::dict out;
  out["angles"] = r.angles;
  out["pairs"] = r.pairs;
  out["rotated"] = r.rotated;
  out["residual"] = r.residual;
  out["pairing"] = r.pairing == Pairing::kParallelTree ? "tree" : "sequential";
  return out;
}

py::dict report_dict(const TrainReport& r) {
  py::dict out;
  out["step_loss"] = r.step_loss;
  out["step_penalty"] = r.step_penalty;
  out["initial_mse"] = r.initial_mse;
  out["final_mse"] = r.final_mse;
  out["final_penalty"] = r.final_penalty;
  out["final_max_abs_inner"] = r.final_max_abs_inner;
  out["param_count"] = r.param_count;
  out["steps"] = r.steps;
  out["wall_clock_seconds"] = r.wall_clock_seconds;
  out["warnings"] = r.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_goft, m) {
  m.doc() = "Givens-rotation orthogonal fine-tuning core";

  py::register_exception<Error>(m, "GoftError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<InvalidDimension>(m, "InvalidDimension", PyExc_ValueError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.attr("PAIRING_RULE") = RotationPlan::kPairingRule;
  m.attr("LAMBDA_GRID") = std::vector<double>(kLambdaGrid.begin(), kLambdaGrid.end());

  m.def(
      "plan",
      [](std::size_t d) {
        const RotationPlan p = build_plan(d);
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> stages;
        for (std::size_t r = 1; r <= p.stage_count(); ++r) {
          auto& s = stages.emplace_back();
          for (const auto& pair : p.stage(r)) s.emplace_back(pair.i, pair.j);
        }
        return stages;
      },
      py::arg("d"), "Stages of (i, j) pairs for dimension d.");

  m.def(
      "apply_chain",
      [](const std::vector<double>& angles, const Matrix& x) {
        return apply_chain_matrix(givens(angles), x);
      },
      py::arg("angles"), py::arg("x"), "R x for the chain with d - 1 angles; x is d x B.");
  m.def(
      "apply_chain_transpose",
      [](const std::vector<double>& angles, const Vector& x) {
        return transpose_apply(givens(angles), x);
      },
      py::arg("angles"), py::arg("x"));
  m.def(
      "dense_matrix", [](const std::vector<double>& angles) { return dense_matrix(givens(angles)); },
      py::arg("angles"));
  m.def(
      "apply_quasi",
      [](const std::vector<double>& blocks, const Matrix& x) {
        return apply_chain_matrix(quasi(static_cast<std::size_t>(x.rows()), blocks), x);
      },
      py::arg("blocks"), py::arg("x"),
      "Quasi-Givens chain; blocks is flat (alpha1, alpha2, beta1, beta2) per pair.");

  m.def(
      "align",
      [](const Vector& x, bool sequential) {
        return alignment_dict(sequential ? align_sequential(x)
                                         : align_parallel(x, build_plan(x.size())));
      },
      py::arg("x"), py::arg("sequential") = false);
  m.def(
      "transport",
      [](const Vector& x, const Vector& y) {
        const TransportMap t = transport(x, y);
        return py::make_tuple(std::vector<double>(t.to_axis().angles().begin(),
                                                  t.to_axis().angles().end()),
                              std::vector<double>(t.from_axis().angles().begin(),
                                                  t.from_axis().angles().end()),
                              t.dense());
      },
      py::arg("x"), py::arg("y"), "(to_axis angles, from_axis angles, dense map)");

  m.def(
      "chain_gradient",
      [](const std::vector<double>& angles, const Matrix& input, const Matrix& d_output) {
        const GivensChain c = givens(angles);
        const auto taped = forward_with_tape(c, input);
        const Pullback pb = backward(c, taped.tape, d_output);
        return py::make_tuple(taped.output, pb.grad.d_angles, pb.d_input);
      },
      py::arg("angles"), py::arg("input"), py::arg("d_output"),
      "(output, d_angles, d_input) for a Givens chain.");
  m.def(
      "quasi_gradient",
      [](const std::vector<double>& blocks, const Matrix& input, const Matrix& d_output) {
        const QuasiChain c = quasi(static_cast<std::size_t>(input.rows()), blocks);
        const auto taped = forward_with_tape(c, input);
        const Pullback pb = backward(c, taped.tape, d_output);
        return py::make_tuple(taped.output, pb.grad.flat(), pb.d_input);
      },
      py::arg("blocks"), py::arg("input"), py::arg("d_output"));

  m.def(
      "cayley",
      [](std::size_t d, const std::vector<double>& upper) { return cayley(SkewParam(d, upper)); },
      py::arg("d"), py::arg("upper"), "Cayley rotation from the strict upper triangle, row-major.");

  py::class_<Adapter>(m, "Adapter")
      .def(py::init([](const Matrix& w, const std::string& method, std::optional<Vector> bias,
                       std::size_t cayley_block) {
             return Adapter(FrozenWeight{w, std::move(bias)}, parse_method(method), cayley_block);
           }),
           py::arg("w"), py::arg("method") = "goft", py::arg("bias") = py::none(),
           py::arg("cayley_block") = 0)
      .def_property_readonly("method", [](const Adapter& a) { return std::string(to_string(a.method())); })
      .def_property("parameters", &Adapter::parameters,
                    [](Adapter& a, const std::vector<double>& p) { a.set_parameters(p); })
      .def_property_readonly("param_count", [](const Adapter& a) { return param_count(a); })
      .def_property_readonly("weight", [](const Adapter& a) { return a.weight().w; })
      .def("forward", [](const Adapter& a, const Matrix& x) { return forward(a, x); }, py::arg("x"))
      .def("transformed_weight", &Adapter::transformed_weight)
      .def("merge", [](const Adapter& a) { return merge(a).w; })
      .def("ortho_penalty", [](const Adapter& a) { return ortho_penalty(a.transform()); });

  m.def(
      "make_task",
      [](const std::string& kind, std::size_t d, std::size_t n, std::size_t samples, double noise,
         std::uint64_t seed) {
        TaskSpec spec;
        spec.kind = parse_task_kind(kind);
        spec.d = d;
        spec.n = n;
        spec.samples = samples;
        spec.noise = noise;
        spec.seed = seed;
        const Task t = make_task(spec);
        py::dict out;
        out["w"] = t.weight.w;
        out["x"] = t.data.x;
        out["y"] = t.data.y;
        return out;
      },
      py::arg("kind"), py::arg("d"), py::arg("n"), py::arg("samples") = 2000,
      py::arg("noise") = 0.0, py::arg("seed") = 0);

  m.def(
      "train_json",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(nlohmann::json::parse(config_json));
        const Task t = make_task(cfg.task);
        Adapter a(t.weight, cfg.train.method, cfg.train.cayley_block);
        TrainReport r;
        {
          py::gil_scoped_release release;
          r = train(a, t.data, cfg.train);
        }
        py::dict out = report_dict(r);
        out["parameters"] = a.parameters();
        return out;
      },
      py::arg("config_json"), "Trains from an experiment config given as JSON text.");

  m.def("read_weights", &read_weights, py::arg("path"));
  m.def(
      "write_weights", [](const std::filesystem::path& p, const Matrix& w) { write_weights(p, w); },
      py::arg("path"), py::arg("w"));

  m.def(
      "bench",
      [](const std::vector<std::size_t>& dims, std::size_t cols, std::size_t reps) {
        py::list rows;
        for (const auto& r : run_bench(dims, cols, reps)) {
          py::dict row;
          row["d"] = r.d;
          row["cols"] = r.cols;
          row["stages"] = r.stages;
          row["staged_flops"] = r.staged_flops;
          row["dense_flops"] = r.dense_flops;
          row["staged_seconds"] = r.staged_seconds;
          row["dense_seconds"] = r.dense_seconds;
          rows.append(row);
        }
        return rows;
      },
      py::arg("dims"), py::arg("cols") = 1, py::arg("reps") = 3);

  m.def(
      "verify",
      [](bool corrupt_angles) {
        VerifyOptions opt;
        opt.corrupt_angles = corrupt_angles;
        py::list out;
        for (const auto& p : run_verify(opt).properties) {
          py::dict d;
          d["name"] = p.name;
          d["passed"] = p.passed;
          d["worst"] = p.worst;
          d["tolerance"] = p.tolerance;
          d["detail"] = p.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("corrupt_angles") = false);
}
