#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <set>

#include "support.hpp"

using namespace koopman;
using namespace testing_support;

namespace {

RealVector vec(std::initializer_list<double> v) {
	RealVector out(static_cast<Index>(v.size()));
	Index i = 0;
	for (double x : v) out(i++) = x;
	return out;
}

const KernelFamily all_families[] = {KernelFamily::gaussian, KernelFamily::laplacian, KernelFamily::cauchy};

} // namespace

TEST(KernelEval, ClosedForms) {
	const KernelSpec g(KernelFamily::gaussian, 1.0);
	EXPECT_EQ(kernel_eval(g, vec({0.3, -1.0}), vec({0.3, -1.0})), 1.0);
	EXPECT_NEAR(kernel_eval(g, vec({0.0}), vec({2.0})), std::exp(-2.0), 1e-15);
	EXPECT_NEAR(kernel_eval(g, vec({0.0}), vec({2.0})), 0.135335, 1e-6);
	EXPECT_NEAR(kernel_eval(KernelSpec(KernelFamily::laplacian, 1.0), vec({0, 0}), vec({1, 1})), std::exp(-2.0), 1e-15);
	EXPECT_NEAR(kernel_eval(KernelSpec(KernelFamily::cauchy, 2.0), vec({0, 0}), vec({2, 4})), 0.5 * 0.2, 1e-15);
	EXPECT_NEAR(kernel_eval(KernelSpec(KernelFamily::gaussian, 0.5), vec({1}), vec({0})), std::exp(-2.0), 1e-15);
}

TEST(KernelEval, SymmetryAndRange) {
	const RealMatrix pts = random_real(4, 40, 11);
	for (KernelFamily f : all_families) {
		const KernelSpec k(f, 1.3);
		for (Index i = 0; i + 1 < pts.cols(); ++i) {
			const double a = kernel_eval(k, pts.col(i), pts.col(i + 1));
			EXPECT_EQ(a, kernel_eval(k, pts.col(i + 1), pts.col(i)));
			EXPECT_GT(a, 0.0);
			EXPECT_LE(a, 1.0);
			EXPECT_EQ(kernel_eval(k, pts.col(i), pts.col(i)), 1.0);
		}
	}
}

TEST(KernelEval, Errors) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	EXPECT_ERROR_KIND(kernel_eval(k, vec({1, 2}), vec({1})), ErrorKind::argument);
	EXPECT_ERROR_KIND(KernelSpec(KernelFamily::gaussian, 0.0), ErrorKind::argument);
	EXPECT_ERROR_KIND(KernelSpec(KernelFamily::gaussian, -1.0), ErrorKind::argument);
	EXPECT_ERROR_KIND(KernelSpec(KernelFamily::gaussian, std::numeric_limits<double>::infinity()), ErrorKind::argument);
	EXPECT_ERROR_KIND(parse_kernel_family("polynomial"), ErrorKind::argument);
	EXPECT_EQ(parse_kernel_family("laplacian"), KernelFamily::laplacian);
}

TEST(SampleFrequencies, Deterministic) {
	const KernelSpec k(KernelFamily::laplacian, 0.7);
	EXPECT_EQ(sample_frequencies(k, 50, 3, 5), sample_frequencies(k, 50, 3, 5));
	EXPECT_NE(sample_frequencies(k, 50, 3, 5), sample_frequencies(k, 50, 3, 6));
	EXPECT_ERROR_KIND(sample_frequencies(k, 0, 3, 1), ErrorKind::argument);
	EXPECT_ERROR_KIND(sample_frequencies(k, 3, 0, 1), ErrorKind::argument);
}

TEST(SampleFrequencies, GaussianInverseBandwidthStd) {
	const double four_pi = 4.0 * std::numbers::pi;
	const RealMatrix z = sample_frequencies(KernelSpec(KernelFamily::gaussian, 1.0 / four_pi), 100000, 1, 3);
	const double mean = z.mean();
	const double sd = std::sqrt((z.array() - mean).square().sum() / static_cast<double>(z.size() - 1));
	EXPECT_NEAR(sd / four_pi, 1.0, 0.01);
}

TEST(SampleFrequencies, GaussianVariance) {
	const RealMatrix z = sample_frequencies(KernelSpec(KernelFamily::gaussian, 2.0), 100000, 3, 4);
	for (Index j = 0; j < z.cols(); ++j) {
		const double m = z.col(j).mean();
		const double var = (z.col(j).array() - m).square().sum() / static_cast<double>(z.rows() - 1);
		EXPECT_NEAR(var / 0.25, 1.0, 0.02);
	}
}

TEST(SampleFrequencies, HeavyTailedScales) {
	// Cauchy(scale s): median |z| = s.  Laplace(scale s): mean |z| = s.
	RealMatrix z = sample_frequencies(KernelSpec(KernelFamily::laplacian, 0.5), 100000, 1, 7);
	std::vector<double> mags(z.data(), z.data() + z.size());
	for (double& v : mags) v = std::abs(v);
	EXPECT_NEAR(median(mags) / 2.0, 1.0, 0.02);

	z = sample_frequencies(KernelSpec(KernelFamily::cauchy, 0.5), 100000, 1, 8);
	EXPECT_NEAR(z.cwiseAbs().mean() / 2.0, 1.0, 0.02);
}

TEST(SampleFrequencies, CharacteristicFunctionMatchesKernel) {
	// Bochner: E[cos(z r)] = k(r) for the 1-D density of each family.
	for (KernelFamily f : all_families) {
		const KernelSpec k(f, 0.8);
		const RealMatrix z = sample_frequencies(k, 200000, 1, 21);
		for (double r : {0.2, 0.8, 1.5}) {
			const double mc = (z.array() * r).cos().mean();
			EXPECT_NEAR(mc, kernel_eval(k, vec({r}), vec({0.0})), 0.01) << to_string(f) << " r=" << r;
		}
	}
}

TEST(Bandwidth, TwoSnapshots) {
	RealMatrix x(2, 2);
	x << 0, 2, 0, 0;
	EXPECT_DOUBLE_EQ(estimate_bandwidth(x, 10, 0), 2.0);
}

TEST(Bandwidth, IdenticalSnapshotsAreDegenerate) {
	EXPECT_ERROR_KIND(estimate_bandwidth(RealMatrix::Constant(3, 10, 0.5), 100, 0), ErrorKind::degenerate);
	EXPECT_ERROR_KIND(estimate_bandwidth(RealMatrix::Ones(3, 1), 100, 0), ErrorKind::insufficient_data);
}

TEST(Bandwidth, ExhaustiveWhenFewPairs) {
	const RealMatrix x = random_real(3, 12, 2);
	double sum = 0.0;
	for (Index i = 0; i < 12; ++i)
		for (Index j = i + 1; j < 12; ++j) sum += (x.col(i) - x.col(j)).norm();
	EXPECT_NEAR(estimate_bandwidth(x, 1000, 9), sum / 66.0, 1e-12);
}

TEST(Bandwidth, PermutationInvariantForFixedPairs) {
	const RealMatrix x = random_real(4, 60, 5);
	const auto pairs = sample_snapshot_pairs(60, 200, 3);
	std::vector<Index> perm(60);
	std::iota(perm.begin(), perm.end(), 0);
	std::reverse(perm.begin(), perm.end());
	std::rotate(perm.begin(), perm.begin() + 17, perm.end());
	RealMatrix xp(4, 60);
	std::vector<Index> where(60);
	for (Index j = 0; j < 60; ++j) {
		xp.col(j) = x.col(perm[j]);
		where[perm[j]] = j;
	}
	std::vector<std::pair<Index, Index>> moved;
	for (auto [i, j] : pairs) moved.emplace_back(std::min(where[i], where[j]), std::max(where[i], where[j]));
	std::sort(moved.begin(), moved.end());
	EXPECT_NEAR(mean_pair_distance(x, pairs), mean_pair_distance(xp, moved), 1e-12);
}

TEST(Bandwidth, PairSamplingContract) {
	for (auto [m, cap] : std::vector<std::pair<Index, Index>>{{5, 100}, {50, 1000}, {50, 1200}, {3000, 10000}}) {
		const auto pairs = sample_snapshot_pairs(m, cap, 1);
		const std::uint64_t total = static_cast<std::uint64_t>(m) * (m - 1) / 2;
		EXPECT_EQ(pairs.size(), std::min<std::uint64_t>(total, cap));
		std::set<std::pair<Index, Index>> uniq(pairs.begin(), pairs.end());
		EXPECT_EQ(uniq.size(), pairs.size());
		EXPECT_TRUE(std::is_sorted(pairs.begin(), pairs.end()));
		for (auto [i, j] : pairs) {
			EXPECT_LT(i, j);
			EXPECT_GE(i, 0);
			EXPECT_LT(j, m);
		}
		EXPECT_EQ(pairs, sample_snapshot_pairs(m, cap, 1));
	}
}

TEST(Bandwidth, FitzhughNagumoScale) {
	const SnapshotSet s = fn::generate_dataset(fn::Config{});
	const double sigma = estimate_bandwidth(s.x(), default_bandwidth_pairs, 0);
	EXPECT_GT(sigma, 1.0 / 3.0);
	EXPECT_LT(sigma, 3.0);
}
