#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sstgnn/model.hpp"
#include "sstgnn/train.hpp"

namespace sstgnn::cli {

/// Fully materialized settings for one command. Sections of the config
/// file mirror the members: [data] [synth] [graph] [model] [train] [eval].
struct RunConfig {
	// data
	std::string speeds;
	std::string distances;
	std::string id_map;
	std::string preset = "none";
	int samples_per_hour = 12;
	std::int64_t t0_offset = 0;
	std::size_t train_days = 0; // 0: use fractions
	std::size_t val_days = 0;   // 0 with train_days set: half of the remaining days
	double train_fraction = 0.6;
	double val_fraction = 0.2;
	std::string normalization = "global";
	std::string missing = "reject";
	std::size_t stride = 1;

	// synth
	std::size_t synth_nodes = 10;
	std::size_t synth_days = 14;
	double synth_noise = 3.0;
	double synth_persistence = 0.97;

	// graph
	double delta = 0.1;
	double epsilon = 0.5;
	double distance_scale = 1.0;

	ModelConfig model;
	TrainConfig train;

	// eval
	double mask_floor = 1.0;
	std::vector<std::size_t> report_steps{3, 6, 9, 12};
	std::string split = "test";
	std::size_t eval_batch = 64;

	std::string out_dir;
};

struct ConfigField {
	std::string section;
	std::string key;
	std::string flag;
	std::string help;
	std::function<std::string(const RunConfig &)> get;
	std::function<void(RunConfig &, const std::string &)> set;
};

const std::vector<ConfigField> &config_fields();

/// Applies `[section]` / `key = value` lines; errors carry file and line.
void apply_config_file(RunConfig &config, const std::filesystem::path &path);
void apply_preset(RunConfig &config, const std::string &preset);
void write_config_snapshot(const RunConfig &config, const std::filesystem::path &path);

std::string default_out_dir();

} // namespace sstgnn::cli
