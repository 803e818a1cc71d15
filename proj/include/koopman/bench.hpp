#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edmd.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace koopman::bench {

enum class Phase { basis, koopman, eigen, total };
enum class Axis { k, m, d };

inline std::string_view to_string(Phase p) {
	switch (p) {
		case Phase::basis: return "basis";
		case Phase::koopman: return "koopman";
		case Phase::eigen: return "eigen";
		case Phase::total: return "total";
	}
	return "?";
}

inline std::string_view to_string(Axis a) {
	switch (a) {
		case Axis::k: return "K";
		case Axis::m: return "M";
		case Axis::d: return "d";
	}
	return "?";
}

inline Axis parse_axis(std::string_view s) {
	if (s == "K" || s == "k") return Axis::k;
	if (s == "M" || s == "m") return Axis::m;
	if (s == "d" || s == "D") return Axis::d;
	throw Error(ErrorKind::argument, "unknown axis '" + std::string(s) + "' (expected K, M or d)");
}

struct BenchCase {
	FeatureMethod method = FeatureMethod::rff;
	Index k = 50;
	Index m = 1000;
	Index d = 1000;
	int repeats = 3;
	std::uint64_t seed = 0;

	Index axis_value(Axis a) const { return a == Axis::k ? k : (a == Axis::m ? m : d); }
};

struct BenchResult {
	BenchCase bench_case;
	double basis = 0.0;   ///< median seconds
	double koopman = 0.0;
	double eigen = 0.0;
	double total = 0.0;
	std::uint64_t memory_estimate = 0; ///< bytes
	ComplexVector eigenvalues;         ///< outputs of the last run, for determinism checks

	double phase(Phase p) const {
		switch (p) {
			case Phase::basis: return basis;
			case Phase::koopman: return koopman;
			case Phase::eigen: return eigen;
			case Phase::total: return total;
		}
		return 0.0;
	}
};

inline constexpr std::uint64_t default_memory_budget = 4ULL << 30;

/// Working-set guard: (K M + M d + K^2) entries of 16 bytes.
inline std::uint64_t memory_estimate(const BenchCase& c) {
	const auto k = static_cast<std::uint64_t>(c.k);
	const auto m = static_cast<std::uint64_t>(c.m);
	const auto d = static_cast<std::uint64_t>(c.d);
	return 16 * (k * m + m * d + k * k);
}

/// Seeded standard-normal snapshot pairs; dynamics are irrelevant to runtime.
inline SnapshotSet synthetic_snapshots(Index d, Index m, std::uint64_t seed) {
	Rng rng(seed);
	RealMatrix x(d, m);
	RealMatrix y(d, m);
	for (Index j = 0; j < m; ++j)
		for (Index i = 0; i < d; ++i) x(i, j) = rng.normal();
	for (Index j = 0; j < m; ++j)
		for (Index i = 0; i < d; ++i) y(i, j) = rng.normal();
	return SnapshotSet(std::move(x), std::move(y), 1.0);
}

struct PhaseTimes {
	double basis, koopman, eigen, total;
	ComplexVector eigenvalues;
};

/// One end-to-end pipeline run, each phase timed over a disjoint code region.
inline PhaseTimes time_pipeline(const BenchCase& c, const SnapshotSet& snaps, const KernelSpec& kernel) {
	using clock = std::chrono::steady_clock;
	auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

	const auto t0 = clock::now();
	FeatureModel model = build_feature_matrices(c.method, snaps, c.k, kernel, c.seed);
	const auto t1 = clock::now();
	const ComplexMatrix a = koopman_matrix(build_gram(model.psi));
	const auto t2 = clock::now();
	KoopmanDecomposition dec = model.rows.empty() ? spectrum(a, model.psi, snaps.x(), snaps.dt())
												  : spectrum(a, model.psi, model.states(snaps), snaps.dt());
	const auto t3 = clock::now();
	return {seconds(t0, t1), seconds(t1, t2), seconds(t2, t3), seconds(t0, t3), std::move(dec.mu)};
}

/**
 * Median per-phase wall times over `repeats` runs, after one discarded
 * warm-up run. Refuses cases whose working set exceeds `memory_budget`.
 */
inline BenchResult run_case(const BenchCase& c, std::uint64_t memory_budget = default_memory_budget) {
	require(c.k >= 1 && c.m >= 1 && c.d >= 1, ErrorKind::argument, "K, M and d must be positive");
	require(c.repeats >= 1, ErrorKind::argument, "repeats must be at least 1");
	require(c.method != FeatureMethod::linear, ErrorKind::argument, "the linear method is not benchmarked");
	if (c.method != FeatureMethod::rff)
		require(c.k <= c.m, ErrorKind::argument, "Nystrom benchmarks need K <= M");
	const std::uint64_t need = memory_estimate(c);
	if (need > memory_budget)
		throw Error(ErrorKind::budget, "case needs an estimated " + std::to_string(need) + " bytes, budget is " +
										   std::to_string(memory_budget));

	const SnapshotSet snaps = synthetic_snapshots(c.d, c.m, c.seed);
	// Mean distance between independent standard normal vectors is ~sqrt(2d).
	const KernelSpec kernel(KernelFamily::gaussian, std::sqrt(2.0 * static_cast<double>(c.d)));

	time_pipeline(c, snaps, kernel);
	std::vector<double> basis, koop, eig, total;
	BenchResult r;
	r.bench_case = c;
	r.memory_estimate = need;
	for (int i = 0; i < c.repeats; ++i) {
		PhaseTimes t = time_pipeline(c, snaps, kernel);
		basis.push_back(t.basis);
		koop.push_back(t.koopman);
		eig.push_back(t.eigen);
		total.push_back(t.total);
		r.eigenvalues = std::move(t.eigenvalues);
	}
	r.basis = median(basis);
	r.koopman = median(koop);
	r.eigen = median(eig);
	r.total = median(total);
	return r;
}

/// Least-squares slope of log(time) against log(axis value).
inline double fit_scaling(const std::vector<BenchResult>& results, Axis axis, Phase phase) {
	require(results.size() >= 3, ErrorKind::argument, "scaling fits need at least 3 results");
	std::vector<double> xs, ys;
	for (const auto& r : results) {
		xs.push_back(static_cast<double>(r.bench_case.axis_value(axis)));
		ys.push_back(r.phase(phase));
	}
	return loglog_slope(xs, ys);
}

/**
 * Exponent of the dominant asymptotic term along one axis, in the K << d, M
 * regime: CN basis K^2 d + K^3, RF basis K M d, EN basis K M d + K^2 (d + M) + K^3;
 * Koopman K^3 (CN) or K^2 M + K^3; eigenspectrum K^2 d + K^3 (CN) or K M d + K^2 d + K^3.
 */
inline double predicted_exponent(FeatureMethod method, Axis axis, Phase phase) {
	const bool cheap = method == FeatureMethod::nystrom_cheap;
	switch (phase) {
		case Phase::basis:
			if (cheap) return axis == Axis::k ? 2.0 : (axis == Axis::d ? 1.0 : 0.0);
			return 1.0;
		case Phase::koopman:
			if (cheap) return axis == Axis::k ? 3.0 : 0.0;
			return axis == Axis::k ? 2.0 : (axis == Axis::m ? 1.0 : 0.0);
		case Phase::eigen:
		case Phase::total:
			if (cheap) return axis == Axis::k ? 2.0 : (axis == Axis::d ? 1.0 : 0.0);
			return 1.0;
	}
	return 0.0;
}

inline std::string csv_header() { return "method,K,M,d,phase,median_seconds,repeats,seed\n"; }

inline std::string csv_rows(const BenchResult& r) {
	std::ostringstream out;
	out.precision(9);
	const auto& c = r.bench_case;
	for (Phase p : {Phase::basis, Phase::koopman, Phase::eigen})
		out << to_string(c.method) << ',' << c.k << ',' << c.m << ',' << c.d << ',' << to_string(p) << ','
			<< r.phase(p) << ',' << c.repeats << ',' << c.seed << '\n';
	return out.str();
}

} // namespace koopman::bench
