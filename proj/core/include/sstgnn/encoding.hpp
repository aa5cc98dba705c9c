#pragma once

#include <cstdint>

namespace sstgnn {

/// Scalar daily + weekly sinusoidal position of a sample index.
///
/// encode(t) = sin(2*pi*t / day) + sin(2*pi*t / week) with
/// day = 24 * samples_per_hour and week = 7 * day. Both arguments are
/// reduced modulo their period before the sine is taken, so indices one
/// week apart encode to bit-identical values.
class PositionalEncoder {
public:
	/// `t0_offset` is added to every index; use it when sample 0 is not midnight.
	explicit PositionalEncoder(int samples_per_hour = 12, std::int64_t t0_offset = 0);

	double encode(std::int64_t t) const;

	int samples_per_hour() const noexcept { return samples_per_hour_; }
	std::int64_t t0_offset() const noexcept { return t0_offset_; }
	std::int64_t day_length() const noexcept { return day_; }
	std::int64_t week_length() const noexcept { return week_; }

	double daily_term(std::int64_t t) const;
	double weekly_term(std::int64_t t) const;

private:
	int samples_per_hour_;
	std::int64_t t0_offset_;
	std::int64_t day_;
	std::int64_t week_;
};

} // namespace sstgnn
