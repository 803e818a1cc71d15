#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace koopman {

enum class KernelFamily { gaussian, laplacian, cauchy };

inline std::string_view to_string(KernelFamily f) {
	switch (f) {
		case KernelFamily::gaussian: return "gaussian";
		case KernelFamily::laplacian: return "laplacian";
		case KernelFamily::cauchy: return "cauchy";
	}
	return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
	if (name == "gaussian") return KernelFamily::gaussian;
	if (name == "laplacian") return KernelFamily::laplacian;
	if (name == "cauchy") return KernelFamily::cauchy;
	throw Error(ErrorKind::argument, "unknown kernel family '" + std::string(name) + "'");
}

/**
 * Translation-invariant kernel normalized to k(x, x) = 1.
 *
 *   gaussian   exp(-|x-y|_2^2 / (2 sigma^2))
 *   laplacian  exp(-|x-y|_1 / sigma)
 *   cauchy     prod_j 1 / (1 + ((x_j - y_j) / sigma)^2)
 *
 * Each has a product-form spectral density: normal (std 1/sigma), Cauchy
 * (scale 1/sigma) and Laplace (scale 1/sigma) per coordinate respectively.
 */
class KernelSpec {
public:
	KernelSpec(KernelFamily family, double sigma) : family_(family), sigma_(sigma) {
		require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::argument,
				"kernel bandwidth must be positive and finite");
	}

	KernelFamily family() const noexcept { return family_; }
	double sigma() const noexcept { return sigma_; }

	/// Kernel value from the difference vector r = x - y.
	template <class Diff>
	double from_difference(const Eigen::MatrixBase<Diff>& r) const {
		switch (family_) {
			case KernelFamily::gaussian: return std::exp(-r.squaredNorm() / (2.0 * sigma_ * sigma_));
			case KernelFamily::laplacian: return std::exp(-r.template lpNorm<1>() / sigma_);
			case KernelFamily::cauchy: {
				double p = 1.0;
				for (Index j = 0; j < r.size(); ++j) {
					const double t = r(j) / sigma_;
					p /= 1.0 + t * t;
				}
				return p;
			}
		}
		return 0.0;
	}

	/// One draw from the spectral density for a single coordinate.
	double sample_coordinate(Rng& rng) const {
		switch (family_) {
			case KernelFamily::gaussian: return std::normal_distribution<double>(0.0, 1.0 / sigma_)(rng);
			case KernelFamily::laplacian: return std::cauchy_distribution<double>(0.0, 1.0 / sigma_)(rng);
			case KernelFamily::cauchy: {
				const double magnitude = std::exponential_distribution<double>(sigma_)(rng);
				return rng.uniform() < 0.5 ? -magnitude : magnitude;
			}
		}
		return 0.0;
	}

	friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

private:
	KernelFamily family_;
	double sigma_;
};

template <class A, class B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
	require(x.size() == y.size() && x.size() >= 1, ErrorKind::argument,
			"kernel arguments must share a dimension >= 1 (got " + std::to_string(x.size()) + " and " +
				std::to_string(y.size()) + ")");
	return spec.from_difference((x - y).eval());
}

/// K x d matrix of i.i.d. frequency rows drawn from the kernel's spectral density.
inline RealMatrix sample_frequencies(const KernelSpec& spec, Index k, Index d, std::uint64_t seed) {
	require(k >= 1, ErrorKind::argument, "number of frequencies must be positive");
	require(d >= 1, ErrorKind::argument, "state dimension must be positive");
	Rng rng(seed);
	RealMatrix z(k, d);
	for (Index i = 0; i < k; ++i)
		for (Index j = 0; j < d; ++j) z(i, j) = spec.sample_coordinate(rng);
	return z;
}

/// Mean Euclidean distance over an explicit list of column pairs.
inline double mean_pair_distance(const RealMatrix& x, const std::vector<std::pair<Index, Index>>& pairs) {
	require(!pairs.empty(), ErrorKind::argument, "no snapshot pairs given");
	double sum = 0.0;
	for (auto [i, j] : pairs) {
		require(i >= 0 && j >= 0 && i < x.cols() && j < x.cols() && i != j, ErrorKind::argument,
				"pair index out of range");
		sum += (x.col(i) - x.col(j)).norm();
	}
	return sum / static_cast<double>(pairs.size());
}

/**
 * Distinct pairs (i < j) of snapshot columns: all of them when there are at
 * most max_pairs, otherwise max_pairs drawn uniformly without replacement.
 */
inline std::vector<std::pair<Index, Index>> sample_snapshot_pairs(Index m, Index max_pairs, std::uint64_t seed) {
	require(m >= 2, ErrorKind::insufficient_data, "need at least 2 snapshots to measure distances");
	require(max_pairs >= 1, ErrorKind::argument, "max_pairs must be positive");
	const auto total = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m - 1) / 2;
	const auto want = std::min<std::uint64_t>(total, static_cast<std::uint64_t>(max_pairs));

	std::vector<std::uint64_t> chosen;
	Rng rng(seed);
	if (2 * want > total) {
		std::vector<std::uint64_t> all(total);
		std::iota(all.begin(), all.end(), 0);
		for (std::uint64_t k = 0; k < want; ++k) std::swap(all[k], all[k + rng.below(total - k)]);
		chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(want));
	} else {
		std::unordered_set<std::uint64_t> seen;
		while (chosen.size() < want) {
			const std::uint64_t p = rng.below(total);
			if (seen.insert(p).second) chosen.push_back(p);
		}
	}
	std::sort(chosen.begin(), chosen.end());
	std::vector<std::pair<Index, Index>> pairs;
	pairs.reserve(chosen.size());
	// Linear pair index -> (i, j), row-major over the strict upper triangle.
	Index i = 0;
	std::uint64_t row_start = 0;
	std::uint64_t row_len = static_cast<std::uint64_t>(m - 1);
	for (std::uint64_t p : chosen) {
		while (p >= row_start + row_len) {
			row_start += row_len;
			--row_len;
			++i;
		}
		pairs.emplace_back(i, i + 1 + static_cast<Index>(p - row_start));
	}
	return pairs;
}

inline constexpr Index default_bandwidth_pairs = 10'000;

/// Bandwidth heuristic: mean distance between randomly sampled snapshot pairs.
inline double estimate_bandwidth(const RealMatrix& x, Index max_pairs = default_bandwidth_pairs,
								 std::uint64_t seed = 0) {
	const auto pairs = sample_snapshot_pairs(x.cols(), max_pairs, seed);
	const double sigma = mean_pair_distance(x, pairs);
	require(std::isfinite(sigma), ErrorKind::numeric, "non-finite snapshot distance");
	require(sigma > 0.0, ErrorKind::degenerate, "all sampled snapshots are identical");
	return sigma;
}

} // namespace koopman
