#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "goft/adapter.hpp"
#include "goft/trainer.hpp"

namespace goft {

/// Little-endian IEEE-754 float64 array <-> base64 text.
std::string encode_doubles(const std::vector<double>& values);
std::vector<double> decode_doubles(std::string_view text);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

/// Binary weight container: "GOFTW\0", u32 version, u32 d, u32 n, then the
/// d x n matrix as row-major float64, all little-endian. Bias is not stored.
void write_weights(const std::filesystem::path& path, const Matrix& w);
Matrix read_weights(const std::filesystem::path& path);

inline constexpr int kConfigFormatVersion = 1;

/// Everything a training run needs. `seed` drives both data generation and
/// the batch sampler.
struct ExperimentConfig {
  TaskSpec task;
  TrainConfig train;
  std::uint64_t seed = 0;
};

/// Validates against the config schema. Every problem is collected and
/// thrown as one ConfigError whose message names the offending keys.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  Method method = Method::kGoft;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t cayley_block = 0;
  Trainer::Snapshot state;
  ExperimentConfig config;
};

Checkpoint make_checkpoint(const Trainer& trainer, const ExperimentConfig& config);
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ConfigError on a wrong format version, unknown pairing rule or
/// inconsistent arrays.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Adapter over `weight` carrying the checkpoint's parameters. Throws
/// ShapeError if the weight's input dimension differs from the checkpoint's.
Adapter adapter_from_checkpoint(const Checkpoint& ckpt, const FrozenWeight& weight);

}  // namespace goft
