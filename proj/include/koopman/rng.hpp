#pragma once

#include <cstdint>
#include <random>

namespace koopman {

/// SplitMix64 finalizer; used to derive well-separated seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
	z += 0x9e3779b97f4a7c15ULL;
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
	return z ^ (z >> 31);
}

/**
 * Seedable, splittable 64-bit generator.
 *
 * All randomness in the library flows through an Rng built from an explicit
 * seed. split(stream) returns an independent child whose seed depends only on
 * (parent seed, stream), so sub-tasks stay reproducible regardless of the
 * order in which they are created.
 */
class Rng {
public:
	using result_type = std::mt19937_64::result_type;

	explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

	Rng split(std::uint64_t stream) const { return Rng(mix64(seed_ ^ mix64(stream + 0x5851f42d4c957f2dULL))); }

	std::uint64_t seed() const noexcept { return seed_; }

	static constexpr result_type min() { return std::mt19937_64::min(); }
	static constexpr result_type max() { return std::mt19937_64::max(); }
	result_type operator()() { return engine_(); }

	double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
	double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

	/// Uniform integer in [0, n).
	std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }

private:
	std::uint64_t seed_;
	std::mt19937_64 engine_;
};

} // namespace koopman
