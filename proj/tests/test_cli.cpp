// Drives the goft executable end to end. GOFT_CLI and GOFT_CONFIG_DIR are
// injected by the build.

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "goft/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" GOFT_CLI "\" " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<json> records(const std::string& out) {
  std::vector<json> v;
  std::istringstream is(out);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) v.push_back(json::parse(line));
  return v;
}

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "goft_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config(const std::string& name) { return std::string(GOFT_CONFIG_DIR) + "/" + name; }

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

json small_config(const std::string& method) {
  return {{"seed", 4},
          {"task", {{"kind", "scaled-rotation-recovery"}, {"d", 8}, {"n", 3}, {"samples", 200}}},
          {"train", {{"method", method}, {"steps", 150}, {"batch_size", 16}}}};
}

}  // namespace

TEST_CASE("align: 2-D analytic case") {
  const Run r = run("--json align --dim 2 --input \"0.6 0.8\"");
  CHECK(r.code == 0);
  const json last = records(r.out).back();
  CHECK(last["angles"][0].get<double>() == doctest::Approx(-0.9273).epsilon(1e-4));
  CHECK(last["residual"].get<double>() < 1e-12);
}

TEST_CASE("align: random d = 8 and trivial input") {
  const Run r = run("--json align --dim 8 --seed 7");
  CHECK(r.code == 0);
  const auto recs = records(r.out);
  CHECK(recs.back()["residual"].get<double>() < 1e-10);
  CHECK(recs.size() == 4);  // three stage vectors plus the summary

  const Run t = run("--json align --input \"1 0 0 0\"");
  CHECK(t.code == 0);
  for (const auto& a : records(t.out).back()["angles"]) CHECK(a.get<double>() == 0.0);

  const Run s = run("align --dim 5 --seed 3 --sequential");
  CHECK(s.code == 0);
  CHECK(s.out.find("residual") != std::string::npos);
}

TEST_CASE("align: errors") {
  CHECK(run("align --input \"0 0 0\"").code == 2);
  CHECK(run("align --input \"1 x\"").code == 2);
  CHECK(run("align --dim 3 --input \"1 2\"").code == 2);
  CHECK(run("align").code == 2);
}

TEST_CASE("align: GOFT_SEED overrides --seed") {
  const auto a = run("--json align --dim 6 --seed 1", "GOFT_SEED=99");
  const auto b = run("--json align --dim 6 --seed 2", "GOFT_SEED=99");
  const auto c = run("--json align --dim 6 --seed 1");
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(run("align --dim 6", "GOFT_SEED=abc").code == 2);
}

TEST_CASE("train: bundled rotation-recovery config") {
  const fs::path dir = workdir("rr");
  const Run r = run("--json train --config " + config("rotation-recovery.json") + " --out " +
                    dir.string());
  CHECK(r.code == 0);
  const json report = records(r.out).back();
  CHECK(report["record"] == "report");
  CHECK(report["final_mse"].get<double>() < 1e-6);
  CHECK(report["param_count"] == 31);
  CHECK(fs::exists(dir / "checkpoint.json"));
  CHECK(fs::exists(dir / "report.jsonl"));
  CHECK(fs::exists(dir / "weights.goftw"));
}

TEST_CASE("train: schema violations and divergence") {
  const fs::path dir = workdir("bad");
  json j = small_config("goft");
  j["train"].erase("method");
  Run r = run("train --config " + write_config(dir, j).string() + " --out " + dir.string());
  CHECK(r.code == 2);

  CHECK(run("train --config " + (dir / "missing.json").string()).code == 2);
  CHECK(run("train").code == 2);

  j = small_config("goft-star");
  j["train"]["learning_rate"] = 1e300;
  r = run("train --config " + write_config(dir, j).string() + " --out " + dir.string());
  CHECK(r.code == 3);
}

TEST_CASE("train: resume reproduces the uninterrupted curve") {
  const fs::path dir = workdir("resume");
  json j = small_config("qgoft");
  j["train"]["lambda"] = 0.05;
  const std::string cfg = write_config(dir, j).string();
  REQUIRE(run("train --config " + cfg + " --out " + (dir / "full").string()).code == 0);
  REQUIRE(run("train --config " + cfg + " --out " + (dir / "part").string() + " --max-steps 61")
              .code == 0);
  REQUIRE(run("train --resume " + (dir / "part" / "checkpoint.json").string() + " --out " +
              (dir / "part").string())
              .code == 0);

  const auto full = goft::load_checkpoint(dir / "full" / "checkpoint.json");
  const auto resumed = goft::load_checkpoint(dir / "part" / "checkpoint.json");
  CHECK(resumed.state.step == 150);
  CHECK(goft::encode_doubles(resumed.state.loss_history) ==
        goft::encode_doubles(full.state.loss_history));
  CHECK(goft::encode_doubles(resumed.state.parameters) ==
        goft::encode_doubles(full.state.parameters));
}

TEST_CASE("train: GOFT_SEED overrides the config seed") {
  const fs::path dir = workdir("seed");
  const std::string cfg = write_config(dir, small_config("goft")).string();
  REQUIRE(run("train --config " + cfg + " --out " + (dir / "a").string(), "GOFT_SEED=12").code == 0);
  const auto ckpt = goft::load_checkpoint(dir / "a" / "checkpoint.json");
  CHECK(ckpt.config.seed == 12);
}

TEST_CASE("merge: identity, trained checkpoints, dimension mismatch") {
  const fs::path dir = workdir("merge");
  for (const std::string method : {"goft", "qgoft"}) {
    CAPTURE(method);
    json j = small_config(method);
    const std::string cfg = write_config(dir, j).string();
    const fs::path out = dir / method;
    REQUIRE(run("train --config " + cfg + " --out " + out.string()).code == 0);
    const Run m = run("--json merge --checkpoint " + (out / "checkpoint.json").string() +
                      " --weights " + (out / "weights.goftw").string() + " --out " +
                      (out / "m.goftw").string());
    CHECK(m.code == 0);
    CHECK(records(m.out).back()["probe_max_abs_deviation"].get<double>() < 1e-10);
  }

  json j = small_config("goft");
  j["train"]["steps"] = 0;
  const fs::path id = dir / "identity";
  REQUIRE(run("train --config " + write_config(dir, j).string() + " --out " + id.string()).code ==
          0);
  REQUIRE(run("merge --checkpoint " + (id / "checkpoint.json").string() + " --weights " +
              (id / "weights.goftw").string() + " --out " + (id / "m.goftw").string())
              .code == 0);
  CHECK(goft::read_weights(id / "m.goftw") == goft::read_weights(id / "weights.goftw"));

  goft::write_weights(dir / "wrong.goftw", goft::Matrix::Ones(5, 3));
  CHECK(run("merge --checkpoint " + (id / "checkpoint.json").string() + " --weights " +
            (dir / "wrong.goftw").string() + " --out " + (dir / "x.goftw").string())
            .code == 2);
}

TEST_CASE("verify: green, and red under angle corruption") {
  const Run ok = run("--json verify");
  CHECK(ok.code == 0);
  CHECK(records(ok.out).back()["passed"] == true);

  const Run bad = run("--json verify --inject-angle-corruption");
  CHECK(bad.code == 1);
  bool ortho_failed = false;
  for (const auto& r : records(bad.out))
    if (r["record"] == "property" && r["name"] == "orthogonality") ortho_failed = !r["passed"];
  CHECK(ortho_failed);
}

TEST_CASE("bench: exact flop counts") {
  const Run r = run("--json bench --dims 768,1024 --cols 1 --reps 1");
  CHECK(r.code == 0);
  const auto recs = records(r.out);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0]["stages"] == 10);
  CHECK(recs[1]["staged_flops"] == 4092);
  CHECK(recs[1]["dense_flops"] == 2097152);
  CHECK(run("bench --dims 1").code == 2);
}

TEST_CASE("sweep: one row per method and lambda") {
  const fs::path dir = workdir("sweep");
  json j = small_config("goft");
  j["train"]["steps"] = 20;
  const Run r = run("--json sweep --config " + write_config(dir, j).string() +
                    " --methods goft,qgoft --lambdas 0.01,0.1 --seeds 1,2 --threads 2");
  CHECK(r.code == 0);
  int rows = 0;
  for (const auto& rec : records(r.out)) rows += rec["record"] == "sweep_row";
  CHECK(rows == 3);
  CHECK(run("sweep --config " + write_config(dir, j).string() + " --methods lora").code == 2);
}

TEST_CASE("usage errors") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("train --bogus").code == 2);
  CHECK(run("--help").code == 0);
}
