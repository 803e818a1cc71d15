#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace koopman {

enum class FeatureMethod { rff, nystrom_cheap, nystrom_expensive, linear };

inline std::string_view to_string(FeatureMethod m) {
	switch (m) {
		case FeatureMethod::rff: return "rff";
		case FeatureMethod::nystrom_cheap: return "nystrom-cheap";
		case FeatureMethod::nystrom_expensive: return "nystrom-expensive";
		case FeatureMethod::linear: return "linear";
	}
	return "unknown";
}

inline FeatureMethod parse_feature_method(std::string_view name) {
	if (name == "rff") return FeatureMethod::rff;
	if (name == "nystrom-cheap" || name == "nystrom_cheap") return FeatureMethod::nystrom_cheap;
	if (name == "nystrom-expensive" || name == "nystrom_expensive") return FeatureMethod::nystrom_expensive;
	if (name == "linear") return FeatureMethod::linear;
	throw Error(ErrorKind::argument, "unknown feature method '" + std::string(name) + "'");
}

/// Snapshot columns handled per parallel task; fixed so results never depend on thread count.
inline constexpr Index feature_chunk = 256;

/// Row-per-snapshot feature matrices (M x K), complex throughout.
struct FeatureMatrices {
	ComplexMatrix psi_x;
	ComplexMatrix psi_y;

	Index rows() const noexcept { return psi_x.rows(); }
	Index features() const noexcept { return psi_x.cols(); }
};

// ---------------------------------------------------------------------------
// Random Fourier features
// ---------------------------------------------------------------------------

/// Frequencies z_j (rows of a K x d matrix) defining psi_j(x) = exp(i <z_j, x>).
class FourierBasis {
public:
	FourierBasis(RealMatrix frequencies, KernelSpec kernel, std::uint64_t seed = 0)
		: z_(std::move(frequencies)), kernel_(kernel), seed_(seed) {
		require(z_.rows() >= 1 && z_.cols() >= 1, ErrorKind::argument, "Fourier basis needs at least one frequency");
		require(z_.allFinite(), ErrorKind::numeric, "Fourier frequencies must be finite");
	}

	static FourierBasis sample(const KernelSpec& kernel, Index k, Index d, std::uint64_t seed) {
		return FourierBasis(sample_frequencies(kernel, k, d, seed), kernel, seed);
	}

	const RealMatrix& frequencies() const noexcept { return z_; }
	const KernelSpec& kernel() const noexcept { return kernel_; }
	std::uint64_t seed() const noexcept { return seed_; }
	Index size() const noexcept { return z_.rows(); }
	Index dim() const noexcept { return z_.cols(); }

	/// Basis with `extra` frequency rows appended.
	FourierBasis appended(const RealMatrix& extra) const {
		require(extra.cols() == dim(), ErrorKind::argument, "appended frequencies have the wrong dimension");
		RealMatrix z(size() + extra.rows(), dim());
		z << z_, extra;
		return FourierBasis(std::move(z), kernel_, seed_);
	}

private:
	RealMatrix z_;
	KernelSpec kernel_;
	std::uint64_t seed_;
};

/// n x K matrix with entry (m, j) = exp(i <z_j, s_m>) for the columns s_m of `snapshots`.
inline ComplexMatrix rff_evaluate(const FourierBasis& basis, const RealMatrix& snapshots) {
	require(snapshots.rows() == basis.dim(), ErrorKind::argument,
			"snapshot dimension " + std::to_string(snapshots.rows()) + " does not match basis dimension " +
				std::to_string(basis.dim()));
	const Index n = snapshots.cols();
	const Index k = basis.size();
	ComplexMatrix out(n, k);
	parallel_chunks(n, feature_chunk, [&](Index begin, Index end) {
		const RealMatrix phase = snapshots.middleCols(begin, end - begin).transpose() * basis.frequencies().transpose();
		for (Index j = 0; j < k; ++j)
			for (Index i = 0; i < phase.rows(); ++i) out(begin + i, j) = std::polar(1.0, phase(i, j));
	});
	return out;
}

struct KernelEstimate {
	double value; ///< real part of the Monte Carlo average
	double imag;  ///< discarded imaginary part, reported for diagnostics
};

/// Monte Carlo kernel estimate (1/K) sum_j psi_j(x) conj(psi_j(y)).
template <class A, class B>
KernelEstimate rff_kernel_estimate(const FourierBasis& basis, const Eigen::MatrixBase<A>& x,
								   const Eigen::MatrixBase<B>& y) {
	require(x.size() == basis.dim() && y.size() == basis.dim(), ErrorKind::argument,
			"kernel estimate arguments must match the basis dimension");
	const RealVector phase = basis.frequencies() * (x - y).eval();
	double re = 0.0;
	double im = 0.0;
	for (Index j = 0; j < phase.size(); ++j) {
		re += std::cos(phase(j));
		im += std::sin(phase(j));
	}
	const double k = static_cast<double>(phase.size());
	return {re / k, im / k};
}

struct ConvergencePoint {
	Index k;
	double error; ///< mean |estimate - exact| over the test pairs
};

/**
 * RFF kernel-approximation error against the exact kernel for each K.
 * Test points are N(0, sigma^2/d) per coordinate, so |x - y| ~ sqrt(2) sigma;
 * each K gets its own frequency draw.
 */
inline std::vector<ConvergencePoint> kernel_convergence(const KernelSpec& kernel, Index d,
														 const std::vector<Index>& k_list, Index pairs,
														 std::uint64_t seed) {
	require(d >= 1 && pairs >= 1, ErrorKind::argument, "kernel check needs d >= 1 and at least one pair");
	Rng rng = Rng(seed).split(0);
	const double scale = kernel.sigma() / std::sqrt(static_cast<double>(d));
	RealMatrix x(d, pairs), y(d, pairs);
	for (Index j = 0; j < pairs; ++j)
		for (Index i = 0; i < d; ++i) x(i, j) = scale * rng.normal();
	for (Index j = 0; j < pairs; ++j)
		for (Index i = 0; i < d; ++i) y(i, j) = scale * rng.normal();

	std::vector<ConvergencePoint> out;
	for (std::size_t n = 0; n < k_list.size(); ++n) {
		require(k_list[n] >= 1, ErrorKind::argument, "every K must be positive");
		const FourierBasis basis = FourierBasis::sample(kernel, k_list[n], d, Rng(seed).split(n + 1).seed());
		double err = 0.0;
		for (Index j = 0; j < pairs; ++j)
			err += std::abs(rff_kernel_estimate(basis, x.col(j), y.col(j)).value - kernel_eval(kernel, x.col(j), y.col(j)));
		out.push_back({k_list[n], err / static_cast<double>(pairs)});
	}
	return out;
}

// ---------------------------------------------------------------------------
// Kernel matrices and Nystrom bases
// ---------------------------------------------------------------------------

/// n x m matrix of k(a_i, b_j) over the columns of a (d x n) and b (d x m).
inline RealMatrix kernel_matrix(const KernelSpec& kernel, const RealMatrix& a, const RealMatrix& b) {
	require(a.rows() == b.rows(), ErrorKind::argument, "kernel matrix arguments differ in dimension");
	const Index n = a.cols();
	const Index m = b.cols();
	const double sigma = kernel.sigma();
	RealMatrix out(n, m);
	parallel_chunks(n, feature_chunk, [&](Index begin, Index end) {
		const auto block = a.middleCols(begin, end - begin);
		for (Index j = 0; j < m; ++j) {
			const RealMatrix diff = block.colwise() - b.col(j);
			switch (kernel.family()) {
				case KernelFamily::gaussian:
					out.col(j).segment(begin, end - begin) =
						(diff.colwise().squaredNorm().array() / (-2.0 * sigma * sigma)).exp().transpose();
					break;
				case KernelFamily::laplacian:
					out.col(j).segment(begin, end - begin) =
						(diff.cwiseAbs().colwise().sum().array() / -sigma).exp().transpose();
					break;
				case KernelFamily::cauchy:
					for (Index i = 0; i < diff.cols(); ++i) out(begin + i, j) = kernel.from_difference(diff.col(i));
					break;
			}
		}
	});
	return out;
}

/**
 * Empirical kernel eigenbasis from K landmark snapshots.
 *
 * Holds the full eigendecomposition M_k = U diag(lambda) U^T of the landmark
 * kernel matrix (descending), plus the number of leading pairs retained for
 * feature evaluation. Retained eigenvalues exceed trunc_tol * lambda_max.
 */
struct NystromBasis {
	RealMatrix landmarks; ///< d x K
	RealMatrix u;         ///< K x K, orthonormal columns
	RealVector lambda;    ///< K, descending
	KernelSpec kernel;
	Index rank = 0;

	Index size() const noexcept { return landmarks.cols(); }
	Index dim() const noexcept { return landmarks.rows(); }

	/// Approximate eigenvalue of the kernel integral operator, lambda_i / K.
	double operator_eigenvalue(Index i) const { return lambda(i) / static_cast<double>(size()); }

	/// Feature values at the landmarks, sqrt(K) * U (K x rank).
	RealMatrix landmark_features() const { return std::sqrt(static_cast<double>(size())) * u.leftCols(rank); }
};

inline constexpr double default_trunc_tol = 1e-12;

inline NystromBasis nystrom_fit(const RealMatrix& landmarks, const KernelSpec& kernel,
								double trunc_tol = default_trunc_tol) {
	require(landmarks.cols() >= 1 && landmarks.rows() >= 1, ErrorKind::argument, "Nystrom fit needs landmarks");
	require(trunc_tol >= 0.0, ErrorKind::argument, "truncation tolerance must be nonnegative");
	const RealMatrix mk = kernel_matrix(kernel, landmarks, landmarks);
	require(mk.allFinite(), ErrorKind::numeric, "landmark kernel matrix has non-finite entries");

	Eigen::SelfAdjointEigenSolver<RealMatrix> eig(mk);
	require(eig.info() == Eigen::Success, ErrorKind::numeric, "kernel matrix eigendecomposition failed");
	const Index k = mk.rows();
	NystromBasis basis{landmarks, eig.eigenvectors().rowwise().reverse(), eig.eigenvalues().reverse(), kernel, 0};
	const double top = basis.lambda(0);
	require(top > 0.0, ErrorKind::degenerate, "kernel matrix has no positive eigenvalue");
	while (basis.rank < k && basis.lambda(basis.rank) > trunc_tol * top) ++basis.rank;
	require(basis.rank >= 1, ErrorKind::degenerate, "all kernel eigenvalues fall below the truncation tolerance");
	return basis;
}

/// Out-of-sample features psi_i(y) = sqrt(K)/lambda_i * sum_j k(y, x_j) U_ji (n x rank).
inline RealMatrix nystrom_interpolate(const NystromBasis& basis, const RealMatrix& snapshots) {
	require(snapshots.rows() == basis.dim(), ErrorKind::argument,
			"snapshot dimension does not match the Nystrom landmarks");
	const RealMatrix kxs = kernel_matrix(basis.kernel, snapshots, basis.landmarks);
	const RealVector scale = std::sqrt(static_cast<double>(basis.size())) * basis.lambda.head(basis.rank).cwiseInverse();
	RealMatrix out = kxs * basis.u.leftCols(basis.rank);
	out *= scale.asDiagonal();
	return out;
}

/// K distinct indices from [0, m), uniformly without replacement, ascending. O(K) work.
inline std::vector<Index> sample_landmarks(Index m, Index k, std::uint64_t seed) {
	require(k >= 1, ErrorKind::argument, "number of landmarks must be positive");
	require(k <= m, ErrorKind::argument,
			"cannot draw " + std::to_string(k) + " landmarks from " + std::to_string(m) + " snapshots");
	// Floyd's algorithm.
	Rng rng(seed);
	std::set<Index> chosen;
	for (Index j = m - k; j < m; ++j) {
		const auto t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(j) + 1));
		if (!chosen.insert(t).second) chosen.insert(j);
	}
	return {chosen.begin(), chosen.end()};
}

inline RealMatrix select_columns(const RealMatrix& m, const std::vector<Index>& cols) {
	RealMatrix out(m.rows(), static_cast<Index>(cols.size()));
	for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
	return out;
}

// ---------------------------------------------------------------------------
// Feature construction for a snapshot set
// ---------------------------------------------------------------------------

using Basis = std::variant<std::monostate, FourierBasis, NystromBasis>;

/**
 * Feature matrices together with the basis that produced them.
 *
 * `rows` lists the snapshot columns the feature rows refer to; it is empty when
 * every snapshot pair is used (all methods except the cheap Nystrom variant).
 */
struct FeatureModel {
	FeatureMethod method;
	Basis basis;
	FeatureMatrices psi;
	std::vector<Index> rows;

	/// States matching the feature rows (d x rows()).
	RealMatrix states(const SnapshotSet& snapshots) const {
		return rows.empty() ? snapshots.x() : select_columns(snapshots.x(), rows);
	}
};

inline FeatureMatrices rff_features(const FourierBasis& basis, const SnapshotSet& snapshots) {
	return {rff_evaluate(basis, snapshots.x()), rff_evaluate(basis, snapshots.y())};
}

inline FeatureMatrices linear_features(const SnapshotSet& snapshots) {
	return {snapshots.x().transpose().cast<std::complex<double>>(),
			snapshots.y().transpose().cast<std::complex<double>>()};
}

struct FeatureOptions {
	double trunc_tol = default_trunc_tol;
};

/**
 * Builds Psi_X, Psi_Y for the chosen method.
 *
 * Nystrom landmarks are K columns of X drawn uniformly without replacement.
 * The cheap variant evaluates Psi_X at the landmarks and interpolates Psi_Y at
 * their successors only, so its effective snapshot count is K. The linear
 * method uses the state coordinates themselves and ignores K.
 */
inline FeatureModel build_feature_matrices(FeatureMethod method, const SnapshotSet& snapshots, Index k,
										   const KernelSpec& kernel, std::uint64_t seed,
										   const FeatureOptions& options = {}) {
	if (method == FeatureMethod::linear) return {method, std::monostate{}, linear_features(snapshots), {}};
	require(k >= 1, ErrorKind::argument, "number of features K must be positive");

	if (method == FeatureMethod::rff) {
		auto basis = FourierBasis::sample(kernel, k, snapshots.dim(), seed);
		auto psi = rff_features(basis, snapshots);
		return {method, std::move(basis), std::move(psi), {}};
	}

	require(k <= snapshots.pairs(), ErrorKind::argument,
			"Nystrom methods need K <= M (K = " + std::to_string(k) + ", M = " + std::to_string(snapshots.pairs()) +
				")");
	std::vector<Index> idx = sample_landmarks(snapshots.pairs(), k, seed);
	NystromBasis basis = nystrom_fit(select_columns(snapshots.x(), idx), kernel, options.trunc_tol);

	FeatureMatrices psi;
	if (method == FeatureMethod::nystrom_cheap) {
		psi.psi_x = basis.landmark_features().cast<std::complex<double>>();
		psi.psi_y = nystrom_interpolate(basis, select_columns(snapshots.y(), idx)).cast<std::complex<double>>();
		return {method, std::move(basis), std::move(psi), std::move(idx)};
	}
	psi.psi_x = nystrom_interpolate(basis, snapshots.x()).cast<std::complex<double>>();
	psi.psi_y = nystrom_interpolate(basis, snapshots.y()).cast<std::complex<double>>();
	return {method, std::move(basis), std::move(psi), {}};
}

} // namespace koopman
