#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/data.hpp"
#include "sstgnn/model.hpp"

namespace sstgnn {

inline constexpr char checkpoint_magic[6] = {'S', 'S', 'T', 'G', 'N', 'N'};
inline constexpr std::uint32_t checkpoint_version = 1;

/// Everything needed to rebuild a trained model and reproduce its outputs.
///
/// On disk: the 6-byte magic "SSTGNN", a u32 format version, a u32 tensor
/// count, then per tensor a u32 name length, the name bytes, a u32 rank,
/// u64 dims and the raw f64 values. All integers and floats are
/// little-endian. Config, normalizer, encoder alignment and seed are stored
/// as small named tensors ("config.*", "normalizer.*", "encoding.*",
/// "meta.*"); parameters as "param.<id>"; anything else under "extra.<name>".
struct Checkpoint {
	ModelConfig config;
	ParameterSet params;
	Normalizer normalizer;
	int samples_per_hour = 12;
	std::int64_t t0_offset = 0;
	std::uint64_t seed = 0;
	std::map<std::string, Tensor> extra;
};

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
/// Throws DataError on a bad magic, a version mismatch, or missing entries.
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Builds a model from a checkpoint's config and parameter values.
SstGnn restore_model(const Checkpoint &ckpt);

} // namespace sstgnn
