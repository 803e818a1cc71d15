#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "support.hpp"

using namespace koopman;
using namespace testing_support;

namespace {

long double kernel_ld(const KernelSpec& k, const RealVector& a, const RealVector& b) {
	long double s = 0.0L;
	for (Index i = 0; i < a.size(); ++i) {
		const long double r = static_cast<long double>(a(i)) - static_cast<long double>(b(i));
		s += r * r;
	}
	return std::exp(-s / (2.0L * k.sigma() * k.sigma()));
}

} // namespace

TEST(Rff, ZeroStateGivesOnes) {
	const FourierBasis basis = FourierBasis::sample(KernelSpec(KernelFamily::gaussian, 0.3), 17, 4, 1);
	const ComplexMatrix psi = rff_evaluate(basis, RealMatrix::Zero(4, 2));
	EXPECT_EQ(psi, ComplexMatrix::Ones(2, 17));
}

TEST(Rff, MatchesNaiveLoop) {
	const FourierBasis basis = FourierBasis::sample(KernelSpec(KernelFamily::cauchy, 1.1), 23, 3, 2);
	const RealMatrix s = random_real(3, 600, 3);
	const ComplexMatrix psi = rff_evaluate(basis, s);
	ASSERT_EQ(psi.rows(), 600);
	ASSERT_EQ(psi.cols(), 23);
	double worst = 0.0;
	for (Index m = 0; m < s.cols(); ++m)
		for (Index j = 0; j < basis.size(); ++j) {
			long double phase = 0.0L;
			for (Index i = 0; i < 3; ++i)
				phase += static_cast<long double>(basis.frequencies()(j, i)) * static_cast<long double>(s(i, m));
			worst = std::max(worst, std::abs(psi(m, j) - Complex(static_cast<double>(std::cos(phase)),
																 static_cast<double>(std::sin(phase)))));
		}
	EXPECT_LT(worst, 1e-12);
}

TEST(Rff, IndependentOfThreadCount) {
	const FourierBasis basis = FourierBasis::sample(KernelSpec(KernelFamily::gaussian, 1.0), 40, 5, 4);
	const RealMatrix s = random_real(5, 1000, 5);
	setenv("KOOPMAN_THREADS", "1", 1);
	const ComplexMatrix one = rff_evaluate(basis, s);
	setenv("KOOPMAN_THREADS", "4", 1);
	const ComplexMatrix four = rff_evaluate(basis, s);
	unsetenv("KOOPMAN_THREADS");
	EXPECT_EQ(one, four);
}

TEST(Rff, DimensionMismatch) {
	const FourierBasis basis = FourierBasis::sample(KernelSpec(KernelFamily::gaussian, 1.0), 4, 3, 4);
	EXPECT_ERROR_KIND(rff_evaluate(basis, RealMatrix::Zero(2, 5)), ErrorKind::argument);
	EXPECT_ERROR_KIND(FourierBasis(RealMatrix(0, 3), KernelSpec(KernelFamily::gaussian, 1.0)), ErrorKind::argument);
}

TEST(RffKernelEstimate, EqualPointsGiveExactlyOne) {
	const FourierBasis basis = FourierBasis::sample(KernelSpec(KernelFamily::laplacian, 1.0), 300, 4, 6);
	const RealVector x = random_real(4, 1, 7).col(0);
	EXPECT_EQ(rff_kernel_estimate(basis, x, x).value, 1.0);
}

TEST(RffKernelEstimate, SingleFrequencyIsCosine) {
	RealMatrix z(1, 2);
	z << 0.7, -1.9;
	const FourierBasis basis(z, KernelSpec(KernelFamily::gaussian, 1.0));
	RealVector x(2), y(2);
	x << 0.3, 1.0;
	y << -0.4, 0.2;
	EXPECT_NEAR(rff_kernel_estimate(basis, x, y).value, std::cos(z.row(0).dot(x - y)), 1e-15);
}

TEST(RffKernelEstimate, GaussianAccuracyAt4096) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const FourierBasis basis = FourierBasis::sample(k, 4096, 5, 8);
	const RealMatrix a = random_real(5, 100, 9) * std::sqrt(0.2);
	const RealMatrix b = random_real(5, 100, 10) * std::sqrt(0.2);
	double err = 0.0;
	for (Index j = 0; j < 100; ++j)
		err += std::abs(rff_kernel_estimate(basis, a.col(j), b.col(j)).value - kernel_eval(k, a.col(j), b.col(j)));
	EXPECT_LT(err / 100.0, 0.05);
}

TEST(RffKernelEstimate, GramConsistency) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const FourierBasis basis = FourierBasis::sample(k, 4096, 5, 11);
	const RealMatrix x = random_real(5, 50, 12) * std::sqrt(0.2);
	const ComplexMatrix psi = rff_evaluate(basis, x);
	const ComplexMatrix approx = psi * psi.adjoint() / 4096.0;
	const RealMatrix exact = kernel_matrix(k, x, x);
	EXPECT_LT((approx - exact.cast<Complex>()).cwiseAbs().mean(), 0.05);
}

TEST(KernelConvergence, ErrorDecreasesAtMonteCarloRate) {
	const auto pts = kernel_convergence(KernelSpec(KernelFamily::gaussian, 1.0), 5, {256, 1024, 4096, 16384}, 100, 0);
	ASSERT_EQ(pts.size(), 4u);
	EXPECT_LT(pts[2].error, pts[0].error);
	std::vector<double> ks, errs;
	for (const auto& p : pts) {
		ks.push_back(static_cast<double>(p.k));
		errs.push_back(p.error);
	}
	EXPECT_NEAR(loglog_slope(ks, errs), -0.5, 0.15);
	const auto again = kernel_convergence(KernelSpec(KernelFamily::gaussian, 1.0), 5, {256, 1024, 4096, 16384}, 100, 0);
	for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].error, again[i].error);
}

TEST(KernelMatrix, MatchesPointwise) {
	const KernelSpec k(KernelFamily::laplacian, 0.9);
	const RealMatrix a = random_real(3, 300, 13);
	const RealMatrix b = random_real(3, 7, 14);
	const RealMatrix km = kernel_matrix(k, a, b);
	for (Index i = 0; i < a.cols(); ++i)
		for (Index j = 0; j < b.cols(); ++j) EXPECT_EQ(km(i, j), kernel_eval(k, a.col(i), b.col(j)));
}

TEST(Nystrom, SingleLandmark) {
	const NystromBasis basis = nystrom_fit(random_real(3, 1, 1), KernelSpec(KernelFamily::gaussian, 1.0));
	ASSERT_EQ(basis.rank, 1);
	EXPECT_NEAR(basis.lambda(0), 1.0, 1e-15);
	EXPECT_NEAR(std::abs(basis.landmark_features()(0, 0)), 1.0, 1e-15);
	EXPECT_NEAR(std::abs(nystrom_interpolate(basis, basis.landmarks)(0, 0)), 1.0, 1e-15);
}

TEST(Nystrom, DuplicateLandmarkIsTruncated) {
	RealMatrix lm = random_real(2, 6, 2) * 2.0;
	lm.col(5) = lm.col(2);
	const NystromBasis basis = nystrom_fit(lm, KernelSpec(KernelFamily::gaussian, 1.0));
	EXPECT_EQ(basis.rank, 5);
	EXPECT_LT(std::abs(basis.lambda(5)), 1e-12 * basis.lambda(0));
}

TEST(Nystrom, ReconstructionIdentity) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const RealMatrix lm = random_real(4, 60, 3);
	const NystromBasis basis = nystrom_fit(lm, k);
	EXPECT_EQ(basis.rank, 60);
	const RealMatrix mk = kernel_matrix(k, lm, lm);
	const RealMatrix rebuilt = basis.u * basis.lambda.asDiagonal() * basis.u.transpose();
	EXPECT_LT((rebuilt - mk).cwiseAbs().maxCoeff(), 1e-10);
	EXPECT_LT((basis.u.transpose() * basis.u - RealMatrix::Identity(60, 60)).cwiseAbs().maxCoeff(), 1e-12);
	for (Index i = 0; i + 1 < 60; ++i) EXPECT_GE(basis.lambda(i), basis.lambda(i + 1));
	EXPECT_NEAR(basis.operator_eigenvalue(0), basis.lambda(0) / 60.0, 1e-15);
}

TEST(Nystrom, InterpolationAtLandmarks) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const NystromBasis basis = nystrom_fit(random_real(4, 60, 3), k);
	const RealMatrix at = nystrom_interpolate(basis, basis.landmarks);
	EXPECT_LT((at - basis.landmark_features()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Nystrom, FarPointsVanish) {
	const NystromBasis basis = nystrom_fit(random_real(3, 20, 4), KernelSpec(KernelFamily::gaussian, 0.5));
	const RealMatrix far = RealMatrix::Constant(3, 2, 40.0);
	EXPECT_LT(nystrom_interpolate(basis, far).rowwise().norm().maxCoeff(), 1e-6);
}

TEST(Nystrom, InterpolationMatchesExtendedPrecisionOracle) {
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const NystromBasis basis = nystrom_fit(random_real(3, 25, 5) * 1.5, k);
	const RealMatrix ys = random_real(3, 10, 6);
	const RealMatrix got = nystrom_interpolate(basis, ys);
	ASSERT_EQ(got.cols(), basis.rank);
	for (Index n = 0; n < ys.cols(); ++n)
		for (Index i = 0; i < basis.rank; ++i) {
			long double sum = 0.0L;
			for (Index j = 0; j < basis.size(); ++j)
				sum += kernel_ld(k, ys.col(n), basis.landmarks.col(j)) * static_cast<long double>(basis.u(j, i));
			const long double expect = std::sqrt(25.0L) / static_cast<long double>(basis.lambda(i)) * sum;
			EXPECT_NEAR(got(n, i), static_cast<double>(expect), 1e-12 * std::max(1.0, std::abs(static_cast<double>(expect))));
		}
}

TEST(Nystrom, Errors) {
	EXPECT_ERROR_KIND(nystrom_fit(RealMatrix(3, 0), KernelSpec(KernelFamily::gaussian, 1.0)), ErrorKind::argument);
	RealMatrix bad = RealMatrix::Zero(2, 3);
	bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
	EXPECT_ERROR_KIND(nystrom_fit(bad, KernelSpec(KernelFamily::gaussian, 1.0)), ErrorKind::numeric);
}

TEST(Landmarks, DistinctSortedDeterministic) {
	const auto idx = sample_landmarks(1000, 100, 3);
	ASSERT_EQ(idx.size(), 100u);
	EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
	EXPECT_EQ(std::set<Index>(idx.begin(), idx.end()).size(), 100u);
	EXPECT_GE(idx.front(), 0);
	EXPECT_LT(idx.back(), 1000);
	EXPECT_EQ(idx, sample_landmarks(1000, 100, 3));
	const auto all = sample_landmarks(10, 10, 1);
	for (Index i = 0; i < 10; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
	EXPECT_ERROR_KIND(sample_landmarks(5, 6, 1), ErrorKind::argument);
}

TEST(BuildFeatures, LinearIsIdentityMap) {
	const SnapshotSet s(random_real(3, 9, 1), random_real(3, 9, 2), 1.0);
	const FeatureModel m = build_feature_matrices(FeatureMethod::linear, s, 0, KernelSpec(KernelFamily::gaussian, 1.0), 0);
	EXPECT_EQ(m.psi.psi_x, s.x().transpose().cast<Complex>());
	EXPECT_EQ(m.psi.psi_y, s.y().transpose().cast<Complex>());
	EXPECT_TRUE(std::holds_alternative<std::monostate>(m.basis));
}

TEST(BuildFeatures, CheapNystromAtFullSampling) {
	const SnapshotSet s(random_real(4, 40, 3), random_real(4, 40, 4), 1.0);
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const FeatureModel cheap = build_feature_matrices(FeatureMethod::nystrom_cheap, s, 40, k, 5);
	const auto& basis = std::get<NystromBasis>(cheap.basis);
	ASSERT_EQ(basis.rank, 40);
	EXPECT_LT((cheap.psi.psi_x.real() - std::sqrt(40.0) * basis.u).cwiseAbs().maxCoeff(), 1e-12);
	EXPECT_EQ(cheap.psi.psi_x.imag(), RealMatrix::Zero(40, 40));

	const FeatureModel expensive = build_feature_matrices(FeatureMethod::nystrom_expensive, s, 40, k, 5);
	EXPECT_LT((expensive.psi.psi_x - cheap.psi.psi_x).cwiseAbs().maxCoeff(), 1e-10);
	EXPECT_LT((expensive.psi.psi_y - cheap.psi.psi_y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildFeatures, CheapUsesLandmarkSuccessors) {
	const RealMatrix traj = random_real(3, 101, 6);
	const SnapshotSet s = SnapshotSet::from_trajectory(traj, 1.0);
	const KernelSpec k(KernelFamily::gaussian, 1.5);
	const FeatureModel cheap = build_feature_matrices(FeatureMethod::nystrom_cheap, s, 20, k, 7);
	ASSERT_EQ(cheap.rows.size(), 20u);
	EXPECT_EQ(cheap.rows, sample_landmarks(100, 20, 7));
	EXPECT_EQ(cheap.psi.rows(), 20);
	const auto& basis = std::get<NystromBasis>(cheap.basis);
	EXPECT_EQ(cheap.psi.psi_y.real(), nystrom_interpolate(basis, select_columns(s.y(), cheap.rows)));
	EXPECT_EQ(cheap.states(s), select_columns(s.x(), cheap.rows));

	const FeatureModel expensive = build_feature_matrices(FeatureMethod::nystrom_expensive, s, 20, k, 7);
	EXPECT_EQ(expensive.psi.rows(), 100);
	EXPECT_TRUE(expensive.rows.empty());
}

TEST(BuildFeatures, RffShapesAndSeed) {
	const SnapshotSet s(random_real(3, 30, 8), random_real(3, 30, 9), 1.0);
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	const FeatureModel a = build_feature_matrices(FeatureMethod::rff, s, 64, k, 10);
	const FeatureModel b = build_feature_matrices(FeatureMethod::rff, s, 64, k, 10);
	EXPECT_EQ(a.psi.psi_x.rows(), 30);
	EXPECT_EQ(a.psi.psi_x.cols(), 64);
	EXPECT_EQ(a.psi.psi_x, b.psi.psi_x);
	EXPECT_EQ(a.psi.psi_y, rff_evaluate(std::get<FourierBasis>(a.basis), s.y()));
}

TEST(BuildFeatures, Validation) {
	const SnapshotSet s(random_real(3, 30, 8), random_real(3, 30, 9), 1.0);
	const KernelSpec k(KernelFamily::gaussian, 1.0);
	EXPECT_ERROR_KIND(build_feature_matrices(FeatureMethod::rff, s, 0, k, 0), ErrorKind::argument);
	EXPECT_ERROR_KIND(build_feature_matrices(FeatureMethod::nystrom_expensive, s, 31, k, 0), ErrorKind::argument);
	EXPECT_ERROR_KIND(build_feature_matrices(FeatureMethod::nystrom_cheap, s, 0, k, 0), ErrorKind::argument);
	EXPECT_ERROR_KIND(parse_feature_method("kdmd"), ErrorKind::argument);
	EXPECT_EQ(parse_feature_method("nystrom-cheap"), FeatureMethod::nystrom_cheap);
}
