#include "sstgnn/encoding.hpp"

#include <cmath>
#include <numbers>

#include "sstgnn/errors.hpp"

namespace sstgnn {

namespace {

std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
	const auto r = a % m;
	return r < 0 ? r + m : r;
}

} // namespace

PositionalEncoder::PositionalEncoder(int samples_per_hour, std::int64_t t0_offset)
    : samples_per_hour_(samples_per_hour), t0_offset_(t0_offset), day_(24 * static_cast<std::int64_t>(samples_per_hour)),
      week_(7 * day_) {
	if (samples_per_hour < 1) {
		throw ConfigError("samples per hour must be at least 1");
	}
}

double PositionalEncoder::daily_term(std::int64_t t) const {
	const auto slot = floor_mod(t + t0_offset_, day_);
	return std::sin(2.0 * std::numbers::pi * static_cast<double>(slot) / static_cast<double>(day_));
}

double PositionalEncoder::weekly_term(std::int64_t t) const {
	const auto slot = floor_mod(t + t0_offset_, week_);
	return std::sin(2.0 * std::numbers::pi * static_cast<double>(slot) / static_cast<double>(week_));
}

double PositionalEncoder::encode(std::int64_t t) const {
	return daily_term(t) + weekly_term(t);
}

} // namespace sstgnn
