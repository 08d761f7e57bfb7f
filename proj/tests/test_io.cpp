#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "goft/error.hpp"
#include "goft/io.hpp"
#include "oracles.hpp"

using namespace goft;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "goft_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> bits_of_interest() {
  return {0.0,
          -0.0,
          1.0,
          -2.5,
          0.1,
          std::numeric_limits<double>::denorm_min(),
          std::numeric_limits<double>::max(),
          std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity(),
          std::nextafter(1.0, 2.0)};
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

ExperimentConfig small_experiment(Method m) {
  ExperimentConfig c;
  c.task.kind = TaskKind::kScaledRotationRecovery;
  c.task.d = 8;
  c.task.n = 3;
  c.task.samples = 100;
  c.train.method = m;
  c.train.steps = 60;
  c.train.batch_size = 8;
  c.train.lambda = m == Method::kQGoft ? 0.05 : 0.0;
  c.seed = 9;
  c.task.seed = c.train.seed = c.seed;
  return c;
}

}  // namespace

TEST_CASE("base64 float64 round-trip is bitwise") {
  const auto values = bits_of_interest();
  CHECK(same_bits(decode_doubles(encode_doubles(values)), values));
  CHECK(encode_doubles({}).empty());
  CHECK(decode_doubles("").empty());
  // 1.0 is 0x3FF0000000000000; little-endian bytes 00 .. 00 F0 3F.
  CHECK(encode_doubles({1.0}) == "AAAAAAAA8D8=");
  const auto nan = decode_doubles(encode_doubles({std::numeric_limits<double>::quiet_NaN()}));
  CHECK(std::isnan(nan[0]));
  CHECK_THROWS_AS(decode_doubles("AAA"), ConfigError);
  CHECK_THROWS_AS(decode_doubles("AAAA"), ConfigError);
  CHECK_THROWS_AS(decode_doubles("AA*AAAAA8D8="), ConfigError);
}

TEST_CASE("weight file round-trip and layout") {
  std::mt19937_64 rng(1);
  const Matrix w = oracle::random_matrix(rng, 5, 3);
  const auto path = scratch("w.goftw");
  write_weights(path, w);
  CHECK(read_weights(path) == w);
  CHECK(fs::file_size(path) == 6 + 12 + 8 * 15);

  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "GOFTW");
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);   // version, little-endian
  CHECK(bytes[10] == 5);  // d
  CHECK(bytes[14] == 3);  // n
  // Row-major: the second stored value is w(0, 1).
  double second;
  std::memcpy(&second, bytes.data() + 18 + 8, 8);
  CHECK(second == w(0, 1));
}

TEST_CASE("malformed weight files") {
  const auto path = scratch("bad.goftw");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTGOFT";
  }
  CHECK_THROWS_AS(read_weights(path), ConfigError);
  std::mt19937_64 rng(2);
  write_weights(path, oracle::random_matrix(rng, 2, 2));
  fs::resize_file(path, fs::file_size(path) - 3);
  CHECK_THROWS_AS(read_weights(path), ConfigError);
  CHECK_THROWS_AS(read_weights(scratch("missing.goftw")), ConfigError);
}

TEST_CASE("config parsing applies defaults and the shared seed") {
  const auto cfg = parse_config(nlohmann::json::parse(R"({
    "seed": 5,
    "task": {"kind": "rotation-recovery", "d": 16, "n": 4},
    "train": {"method": "qgoft", "lambda": 0.1, "steps": 10, "adam": {"beta1": 0.8}}
  })"));
  CHECK(cfg.task.d == 16);
  CHECK(cfg.task.samples == TaskSpec{}.samples);
  CHECK(cfg.train.method == Method::kQGoft);
  CHECK(cfg.train.lambda == 0.1);
  CHECK(cfg.train.adam.beta1 == 0.8);
  CHECK(cfg.train.adam.beta2 == 0.999);
  CHECK(cfg.task.seed == 5);
  CHECK(cfg.train.seed == 5);

  const auto again = parse_config(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("config schema violations name every offending key") {
  try {
    parse_config(nlohmann::json::parse(R"({
      "task": {"kind": "rotation-recovery", "d": "sixteen", "n": 4, "colour": 1},
      "train": {"lambda": -1}
    })"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("train.method (missing)") != std::string::npos);
    CHECK(msg.find("task.d") != std::string::npos);
    CHECK(msg.find("task.colour (unknown key)") != std::string::npos);
    CHECK(msg.find("train.lambda") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"task": {}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse("[1, 2]")), ConfigError);
  CHECK_THROWS_AS(
      parse_config(nlohmann::json::parse(
          R"({"task": {"kind": "rotation-recovery", "d": 4, "n": 1}, "train": {"method": "lora"}})")),
      ConfigError);
}

TEST_CASE("checkpoint round-trip is bitwise and resumes identically") {
  for (Method m : {Method::kGoft, Method::kQGoft, Method::kGoftStar}) {
    CAPTURE(to_string(m));
    const auto cfg = small_experiment(m);
    const Task task = make_task(cfg.task);

    Trainer straight(Adapter(task.weight, m), task.data, cfg.train);
    straight.run();

    Trainer first(Adapter(task.weight, m), task.data, cfg.train);
    first.run_until(23);
    const auto path = scratch("ckpt.json");
    save_checkpoint(path, make_checkpoint(first, cfg));
    const Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.method == m);
    CHECK(loaded.d == 8);
    CHECK(loaded.n == 3);
    CHECK(same_bits(loaded.state.parameters, first.adapter().parameters()));
    CHECK(same_bits(loaded.state.optimizer.m, first.optimizer().m));
    CHECK(same_bits(loaded.state.optimizer.v, first.optimizer().v));
    CHECK(same_bits(loaded.state.loss_history, first.loss_history()));
    CHECK(loaded.state.rng_state == first.rng_state());
    CHECK(config_to_json(loaded.config) == config_to_json(cfg));

    Trainer resumed(adapter_from_checkpoint(loaded, task.weight), task.data, loaded.config.train);
    resumed.restore(loaded.state);
    resumed.run();
    CHECK(same_bits(resumed.loss_history(), straight.loss_history()));
    CHECK(same_bits(resumed.adapter().parameters(), straight.adapter().parameters()));
  }
}

TEST_CASE("checkpoint json carries a readable summary and plan descriptor") {
  const auto cfg = small_experiment(Method::kQGoft);
  const Task task = make_task(cfg.task);
  Trainer t(Adapter(task.weight, Method::kQGoft), task.data, cfg.train);
  t.run_until(5);
  const auto j = checkpoint_to_json(make_checkpoint(t, cfg));
  CHECK(j["format_version"] == kCheckpointFormatVersion);
  CHECK(j["method"] == "qgoft");
  CHECK(j["plan"]["d"] == 8);
  CHECK(j["plan"]["pairing_rule"] == "binary-tree-v1");
  CHECK(j["plan"]["stages"] == 3);
  CHECK(j["summary"]["step"] == 5);
  CHECK(j["summary"]["parameter_count"] == 28);
  CHECK(j["summary"]["parameters_head"].size() == 8);

  auto bad = j;
  bad["format_version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
  bad = j;
  bad["plan"]["pairing_rule"] = "adjacent";
  CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
  bad = j;
  bad["method"] = "goft";
  CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
  bad = j;
  bad.erase("optimizer");
  CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
}

TEST_CASE("adapter from checkpoint rejects mismatched weights") {
  const auto cfg = small_experiment(Method::kGoft);
  const Task task = make_task(cfg.task);
  Trainer t(Adapter(task.weight, Method::kGoft), task.data, cfg.train);
  const Checkpoint ckpt = make_checkpoint(t, cfg);
  std::mt19937_64 rng(3);
  const FrozenWeight wrong{oracle::random_matrix(rng, 9, 3), std::nullopt};
  CHECK_THROWS_AS(adapter_from_checkpoint(ckpt, wrong), ShapeError);
  // A fresh checkpoint merges to the original weights.
  CHECK(merge(adapter_from_checkpoint(ckpt, task.weight)).w == task.weight.w);
}
