#include "sstgnn/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "sstgnn/errors.hpp"

namespace sstgnn {

namespace {

template <typename T>
T to_little(T v) {
	if constexpr (std::endian::native == std::endian::big) {
		auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
		std::reverse(bytes.begin(), bytes.end());
		return std::bit_cast<T>(bytes);
	}
	return v;
}

class Writer {
public:
	explicit Writer(std::ostream &out) : out_(out) {}

	template <typename T>
	void put(T v) {
		v = to_little(v);
		out_.write(reinterpret_cast<const char *>(&v), sizeof(T));
	}

	void tensor(const std::string &name, const Tensor &t) {
		put(static_cast<std::uint32_t>(name.size()));
		out_.write(name.data(), static_cast<std::streamsize>(name.size()));
		put(static_cast<std::uint32_t>(t.rank()));
		for (auto d : t.shape()) {
			put(static_cast<std::uint64_t>(d));
		}
		for (double v : t.values()) {
			put(std::bit_cast<std::uint64_t>(v));
		}
	}

private:
	std::ostream &out_;
};

class Reader {
public:
	Reader(std::istream &in, std::string source) : in_(in), source_(std::move(source)) {}

	template <typename T>
	T get() {
		T v{};
		in_.read(reinterpret_cast<char *>(&v), sizeof(T));
		if (!in_) {
			throw DataError(source_ + ": truncated checkpoint");
		}
		return to_little(v);
	}

	std::pair<std::string, Tensor> tensor() {
		const auto len = get<std::uint32_t>();
		if (len > (1u << 16)) {
			throw DataError(source_ + ": corrupt tensor name length");
		}
		std::string name(len, '\0');
		in_.read(name.data(), len);
		const auto rank = get<std::uint32_t>();
		if (rank > 8) {
			throw DataError(source_ + ": corrupt tensor rank for '" + name + "'");
		}
		Shape shape(rank);
		for (auto &d : shape) {
			d = static_cast<std::size_t>(get<std::uint64_t>());
		}
		const std::size_t n = shape_size(shape);
		if (n > (std::size_t{1} << 34)) {
			throw DataError(source_ + ": corrupt tensor size for '" + name + "'");
		}
		std::vector<double> values(n);
		for (auto &v : values) {
			v = std::bit_cast<double>(get<std::uint64_t>());
		}
		return {std::move(name), Tensor(std::move(shape), std::move(values))};
	}

private:
	std::istream &in_;
	std::string source_;
};

Tensor scalar(double v) {
	return Tensor::scalar(v);
}

Tensor vector_of(const std::vector<double> &v) {
	return Tensor({v.size()}, v);
}

} // namespace

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path) {
	std::vector<std::pair<std::string, Tensor>> entries;
	const auto &c = ckpt.config;
	entries.emplace_back("config.window", scalar(static_cast<double>(c.window)));
	entries.emplace_back("config.max_hop", scalar(static_cast<double>(c.max_hop)));
	entries.emplace_back("config.history_days", scalar(static_cast<double>(c.history_days)));
	entries.emplace_back("config.hidden_dim", scalar(static_cast<double>(c.hidden_dim)));
	entries.emplace_back("config.final_dim", scalar(static_cast<double>(c.final_dim)));
	entries.emplace_back("config.head_dim", scalar(static_cast<double>(c.head_dim)));
	std::vector<double> horizons(c.horizons.begin(), c.horizons.end());
	entries.emplace_back("config.horizons", vector_of(horizons));
	entries.emplace_back("config.branches", scalar(static_cast<double>(static_cast<int>(c.branches))));
	entries.emplace_back("config.share_weights", scalar(c.share_weights ? 1.0 : 0.0));
	entries.emplace_back("normalizer.mean", vector_of(ckpt.normalizer.mean));
	entries.emplace_back("normalizer.std", vector_of(ckpt.normalizer.stddev));
	entries.emplace_back("encoding.samples_per_hour", scalar(ckpt.samples_per_hour));
	entries.emplace_back("encoding.t0_offset", scalar(static_cast<double>(ckpt.t0_offset)));
	entries.emplace_back("meta.seed_hi", scalar(static_cast<double>(ckpt.seed >> 32)));
	entries.emplace_back("meta.seed_lo", scalar(static_cast<double>(ckpt.seed & 0xffffffffu)));
	for (const auto &p : ckpt.params) {
		entries.emplace_back("param." + p->id, p->value);
	}
	for (const auto &[name, t] : ckpt.extra) {
		entries.emplace_back("extra." + name, t);
	}

	const auto tmp = path.string() + ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) {
			throw DataError("cannot write checkpoint '" + path.string() + "'");
		}
		out.write(checkpoint_magic, sizeof(checkpoint_magic));
		Writer w(out);
		w.put(checkpoint_version);
		w.put(static_cast<std::uint32_t>(entries.size()));
		for (const auto &[name, t] : entries) {
			w.tensor(name, t);
		}
		if (!out) {
			throw DataError("write failed for checkpoint '" + path.string() + "'");
		}
	}
	std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw DataError("cannot open checkpoint '" + path.string() + "'");
	}
	char magic[sizeof(checkpoint_magic)] = {};
	in.read(magic, sizeof(magic));
	if (!in || std::memcmp(magic, checkpoint_magic, sizeof(magic)) != 0) {
		throw DataError(path.string() + ": not a checkpoint (bad magic)");
	}
	Reader r(in, path.string());
	const auto version = r.get<std::uint32_t>();
	if (version != checkpoint_version) {
		throw DataError(path.string() + ": checkpoint format version " + std::to_string(version) +
		                " is not supported (expected " + std::to_string(checkpoint_version) + ")");
	}
	const auto count = r.get<std::uint32_t>();
	std::map<std::string, Tensor> meta;
	std::vector<std::pair<std::string, Tensor>> params;
	Checkpoint ckpt;
	for (std::uint32_t i = 0; i < count; ++i) {
		auto [name, t] = r.tensor();
		if (name.starts_with("param.")) {
			params.emplace_back(name.substr(6), std::move(t));
		} else if (name.starts_with("extra.")) {
			ckpt.extra.emplace(name.substr(6), std::move(t));
		} else {
			meta.emplace(std::move(name), std::move(t));
		}
	}
	auto need = [&](const std::string &key) -> const Tensor & {
		const auto it = meta.find(key);
		if (it == meta.end()) {
			throw DataError(path.string() + ": checkpoint lacks '" + key + "'");
		}
		return it->second;
	};
	auto size_of = [&](const std::string &key) { return static_cast<std::size_t>(need(key)[0]); };

	auto &c = ckpt.config;
	c.window = size_of("config.window");
	c.max_hop = size_of("config.max_hop");
	c.history_days = size_of("config.history_days");
	c.hidden_dim = size_of("config.hidden_dim");
	c.final_dim = size_of("config.final_dim");
	c.head_dim = size_of("config.head_dim");
	c.horizons.clear();
	for (double h : need("config.horizons").values()) {
		c.horizons.push_back(static_cast<std::size_t>(h));
	}
	c.branches = static_cast<BranchMode>(static_cast<int>(need("config.branches")[0]));
	c.share_weights = need("config.share_weights")[0] != 0.0;
	const auto &mean = need("normalizer.mean");
	const auto &sd = need("normalizer.std");
	ckpt.normalizer.mean.assign(mean.values().begin(), mean.values().end());
	ckpt.normalizer.stddev.assign(sd.values().begin(), sd.values().end());
	ckpt.samples_per_hour = static_cast<int>(need("encoding.samples_per_hour")[0]);
	ckpt.t0_offset = static_cast<std::int64_t>(need("encoding.t0_offset")[0]);
	ckpt.seed = (static_cast<std::uint64_t>(need("meta.seed_hi")[0]) << 32) |
	            static_cast<std::uint64_t>(need("meta.seed_lo")[0]);
	for (auto &[id, t] : params) {
		ckpt.params.add(id, std::move(t));
	}
	return ckpt;
}

SstGnn restore_model(const Checkpoint &ckpt) {
	SstGnn model(ckpt.config);
	model.load_values(ckpt.params);
	return model;
}

} // namespace sstgnn
