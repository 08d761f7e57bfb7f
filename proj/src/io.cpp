#include "goft/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "goft/error.hpp"
#include "goft/plan.hpp"

namespace goft {
namespace {

using nlohmann::json;

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

std::string base64(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t k = 0;
  for (; k + 2 < bytes.size(); k += 3) {
    const auto v = (std::uint32_t(std::uint8_t(bytes[k])) << 16) |
                   (std::uint32_t(std::uint8_t(bytes[k + 1])) << 8) | std::uint8_t(bytes[k + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  const std::size_t rest = bytes.size() - k;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t(std::uint8_t(bytes[k])) << 16;
    if (rest == 2) v |= std::uint32_t(std::uint8_t(bytes[k + 1])) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string unbase64(std::string_view text) {
  if (text.size() % 4 != 0) throw ConfigError("base64: length is not a multiple of 4");
  std::array<int, 256> index;
  index.fill(-1);
  for (std::size_t k = 0; k < kAlphabet.size(); ++k) index[std::uint8_t(kAlphabet[k])] = int(k);
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t k = 0; k < text.size(); k += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t m = 0; m < 4; ++m) {
      const char c = text[k + m];
      if (c == '=' && k + 4 == text.size() && m >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = index[std::uint8_t(c)];
      if (d < 0 || pad > 0) throw ConfigError("base64: invalid character");
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) throw ConfigError("weight file is truncated");
  return std::uint32_t(buf[0]) | std::uint32_t(buf[1]) << 8 | std::uint32_t(buf[2]) << 16 |
         std::uint32_t(buf[3]) << 24;
}

constexpr char kMagic[6] = {'G', 'O', 'F', 'T', 'W', '\0'};

// Collects schema problems so they can be reported together.
class SchemaReader {
 public:
  void unknown_keys(const json& obj, const std::string& prefix,
                    std::initializer_list<std::string_view> allowed) {
    for (const auto& item : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || item.key() == a;
      if (!ok) issues_.push_back(prefix + item.key() + " (unknown key)");
    }
  }

  const json* object(const json& parent, const std::string& prefix, const char* key,
                     bool required) {
    if (!parent.contains(key)) {
      if (required) issues_.push_back(prefix + key + " (missing)");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      issues_.push_back(prefix + key + " (expected object)");
      return nullptr;
    }
    return &v;
  }

  template <class T>
  void field(const json& obj, const std::string& prefix, const char* key, T& out,
             bool required = false) {
    if (!obj.contains(key)) {
      if (required) issues_.push_back(prefix + key + " (missing)");
      return;
    }
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return bad(prefix + key, "string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return bad(prefix + key, "number");
      out = v.get<double>();
    } else {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        return bad(prefix + key, "non-negative integer");
      }
      out = v.get<T>();
    }
  }

  template <class Fn>
  void parsed(const json& obj, const std::string& prefix, const char* key, Fn&& fn,
              bool required) {
    std::string text;
    if (!obj.contains(key)) {
      if (required) issues_.push_back(prefix + key + " (missing)");
      return;
    }
    field(obj, prefix, key, text);
    if (!obj.at(key).is_string()) return;
    try {
      fn(text);
    } catch (const ConfigError& e) {
      issues_.push_back(prefix + key + " (" + e.what() + ")");
    }
  }

  void check(bool ok, const std::string& key, const std::string& why) {
    if (!ok) issues_.push_back(key + " (" + why + ")");
  }

  void raise_if_any() const {
    if (issues_.empty()) return;
    std::string msg = "config schema violation:";
    for (const auto& i : issues_) msg += "\n  " + i;
    throw ConfigError(msg);
  }

 private:
  void bad(const std::string& key, const char* expected) {
    issues_.push_back(key + " (expected " + expected + ")");
  }

  std::vector<std::string> issues_;
};

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<double> decode_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ConfigError(std::string("checkpoint: missing array '") + key + "'");
  }
  return decode_doubles(j.at(key).get<std::string>());
}

}  // namespace

std::string encode_doubles(const std::vector<double>& values) {
  std::string bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) put_u64_le(bytes, std::bit_cast<std::uint64_t>(v));
  return base64(bytes);
}

std::vector<double> decode_doubles(std::string_view text) {
  const std::string bytes = unbase64(text);
  if (bytes.size() % 8 != 0) throw ConfigError("base64 payload is not a float64 array");
  std::vector<double> out(bytes.size() / 8);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::bit_cast<double>(get_u64_le(p + 8 * k));
  return out;
}

void write_weights(const std::filesystem::path& path, const Matrix& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kWeightFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(w.rows()));
  write_u32(out, static_cast<std::uint32_t>(w.cols()));
  std::string row;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    row.clear();
    for (Eigen::Index c = 0; c < w.cols(); ++c) put_u64_le(row, std::bit_cast<std::uint64_t>(w(r, c)));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

Matrix read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) {
    throw ConfigError("'" + path.string() + "' is not a GOFTW weight file");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kWeightFormatVersion) {
    throw ConfigError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t d = read_u32(in);
  const std::uint32_t n = read_u32(in);
  Matrix w(d, n);
  unsigned char buf[8];
  for (std::uint32_t r = 0; r < d; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) {
      if (!in.read(reinterpret_cast<char*>(buf), 8)) throw ConfigError("weight file is truncated");
      w(r, c) = std::bit_cast<double>(get_u64_le(buf));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ConfigError("weight file has trailing bytes");
  }
  return w;
}

ExperimentConfig parse_config(const json& j) {
  SchemaReader rd;
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("config schema violation:\n  <root> (expected object)");
  rd.unknown_keys(j, "", {"format_version", "seed", "task", "train"});
  std::uint64_t version = kConfigFormatVersion;
  rd.field(j, "", "format_version", version);
  rd.check(version == kConfigFormatVersion, "format_version",
           "expected " + std::to_string(kConfigFormatVersion));
  rd.field(j, "", "seed", cfg.seed);

  if (const json* t = rd.object(j, "", "task", true)) {
    const std::string p = "task.";
    rd.unknown_keys(*t, p, {"kind", "d", "n", "samples", "noise", "angle_range",
                            "log2_scale_range", "csv_path"});
    rd.parsed(*t, p, "kind", [&](const std::string& s) { cfg.task.kind = parse_task_kind(s); }, true);
    rd.field(*t, p, "d", cfg.task.d, true);
    rd.field(*t, p, "n", cfg.task.n, true);
    rd.field(*t, p, "samples", cfg.task.samples);
    rd.field(*t, p, "noise", cfg.task.noise);
    rd.field(*t, p, "angle_range", cfg.task.angle_range);
    rd.field(*t, p, "log2_scale_range", cfg.task.log2_scale_range);
    rd.field(*t, p, "csv_path", cfg.task.csv_path);
    rd.check(cfg.task.d >= 2, "task.d", "must be >= 2");
    rd.check(cfg.task.n >= 1, "task.n", "must be >= 1");
    rd.check(cfg.task.noise >= 0.0, "task.noise", "must be >= 0");
  }

  if (const json* t = rd.object(j, "", "train", true)) {
    const std::string p = "train.";
    rd.unknown_keys(*t, p, {"method", "lambda", "learning_rate", "steps", "batch_size",
                            "schedule", "min_lr_fraction", "cayley_block", "adam"});
    rd.parsed(*t, p, "method", [&](const std::string& s) { cfg.train.method = parse_method(s); },
              true);
    rd.field(*t, p, "lambda", cfg.train.lambda);
    rd.field(*t, p, "learning_rate", cfg.train.learning_rate);
    rd.field(*t, p, "steps", cfg.train.steps);
    rd.field(*t, p, "batch_size", cfg.train.batch_size);
    rd.parsed(*t, p, "schedule",
              [&](const std::string& s) { cfg.train.schedule = parse_lr_schedule(s); }, false);
    rd.field(*t, p, "min_lr_fraction", cfg.train.min_lr_fraction);
    rd.field(*t, p, "cayley_block", cfg.train.cayley_block);
    if (const json* a = rd.object(*t, p, "adam", false)) {
      rd.unknown_keys(*a, p + "adam.", {"beta1", "beta2", "epsilon"});
      rd.field(*a, p + "adam.", "beta1", cfg.train.adam.beta1);
      rd.field(*a, p + "adam.", "beta2", cfg.train.adam.beta2);
      rd.field(*a, p + "adam.", "epsilon", cfg.train.adam.epsilon);
    }
    rd.check(cfg.train.lambda >= 0.0, "train.lambda", "must be >= 0");
    rd.check(cfg.train.learning_rate > 0.0, "train.learning_rate", "must be > 0");
    rd.check(cfg.train.min_lr_fraction >= 0.0 && cfg.train.min_lr_fraction <= 1.0,
             "train.min_lr_fraction", "must lie in [0, 1]");
  }
  rd.raise_if_any();
  cfg.task.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json(path));
}

json config_to_json(const ExperimentConfig& c) {
  json task = {{"kind", to_string(c.task.kind)},
               {"d", c.task.d},
               {"n", c.task.n},
               {"samples", c.task.samples},
               {"noise", c.task.noise},
               {"angle_range", c.task.angle_range},
               {"log2_scale_range", c.task.log2_scale_range}};
  if (!c.task.csv_path.empty()) task["csv_path"] = c.task.csv_path;
  json train = {{"method", to_string(c.train.method)},
                {"lambda", c.train.lambda},
                {"learning_rate", c.train.learning_rate},
                {"steps", c.train.steps},
                {"batch_size", c.train.batch_size},
                {"schedule", to_string(c.train.schedule)},
                {"min_lr_fraction", c.train.min_lr_fraction},
                {"cayley_block", c.train.cayley_block},
                {"adam",
                 {{"beta1", c.train.adam.beta1},
                  {"beta2", c.train.adam.beta2},
                  {"epsilon", c.train.adam.epsilon}}}};
  return {{"format_version", kConfigFormatVersion}, {"seed", c.seed}, {"task", task},
          {"train", train}};
}

Checkpoint make_checkpoint(const Trainer& trainer, const ExperimentConfig& config) {
  const Adapter& a = trainer.adapter();
  return Checkpoint{a.method(), a.input_dim(), a.output_dim(), trainer.config().cayley_block,
                    trainer.snapshot(), config};
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& s = ckpt.state;
  const RotationPlan plan = build_plan(ckpt.d);
  json summary = {{"step", s.step},
                  {"parameter_count", s.parameters.size()},
                  {"initial_mse", s.initial_mse}};
  if (!s.loss_history.empty()) {
    summary["last_batch_loss"] = s.loss_history.back();
    summary["last_penalty"] = s.penalty_history.back();
  }
  const std::size_t preview = std::min<std::size_t>(s.parameters.size(), 8);
  summary["parameters_head"] =
      std::vector<double>(s.parameters.begin(), s.parameters.begin() + preview);

  return {{"format_version", kCheckpointFormatVersion},
          {"method", to_string(ckpt.method)},
          {"plan",
           {{"d", ckpt.d},
            {"pairing_rule", RotationPlan::kPairingRule},
            {"pairs", plan.total_pairs()},
            {"stages", plan.stage_count()}}},
          {"n", ckpt.n},
          {"cayley_block", ckpt.cayley_block},
          {"step", s.step},
          {"parameters", encode_doubles(s.parameters)},
          {"optimizer",
           {{"t", s.optimizer.t},
            {"m", encode_doubles(s.optimizer.m)},
            {"v", encode_doubles(s.optimizer.v)}}},
          {"rng_state", s.rng_state},
          {"initial_mse", encode_doubles({s.initial_mse})},
          {"loss_history", encode_doubles(s.loss_history)},
          {"penalty_history", encode_doubles(s.penalty_history)},
          {"config", config_to_json(ckpt.config)},
          {"summary", summary}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ConfigError("checkpoint: unsupported format_version " + j.at("format_version").dump());
    }
    Checkpoint c;
    c.method = parse_method(j.at("method").get<std::string>());
    const json& plan = j.at("plan");
    if (plan.at("pairing_rule").get<std::string>() != RotationPlan::kPairingRule) {
      throw ConfigError("checkpoint: unknown pairing rule " + plan.at("pairing_rule").dump());
    }
    c.d = plan.at("d").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    c.cayley_block = j.at("cayley_block").get<std::size_t>();
    c.state.step = j.at("step").get<std::size_t>();
    c.state.parameters = decode_field(j, "parameters");
    const json& opt = j.at("optimizer");
    c.state.optimizer.t = opt.at("t").get<std::uint64_t>();
    c.state.optimizer.m = decode_field(opt, "m");
    c.state.optimizer.v = decode_field(opt, "v");
    c.state.rng_state = j.at("rng_state").get<std::string>();
    const auto init = decode_field(j, "initial_mse");
    if (init.size() != 1) throw ConfigError("checkpoint: initial_mse must hold one value");
    c.state.initial_mse = init[0];
    c.state.loss_history = decode_field(j, "loss_history");
    c.state.penalty_history = decode_field(j, "penalty_history");
    c.config = parse_config(j.at("config"));
    if (c.state.parameters.size() != param_count(c.method, c.d, c.cayley_block)) {
      throw ConfigError("checkpoint: parameter array length does not match method and d");
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json(path));
}

Adapter adapter_from_checkpoint(const Checkpoint& ckpt, const FrozenWeight& weight) {
  if (static_cast<std::size_t>(weight.w.rows()) != ckpt.d) {
    throw ShapeError("weights have d = " + std::to_string(weight.w.rows()) +
                     " but the checkpoint was trained with d = " + std::to_string(ckpt.d));
  }
  Adapter a(weight, ckpt.method, ckpt.cayley_block);
  a.set_parameters(ckpt.state.parameters);
  return a;
}

}  // namespace goft
