#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "features.hpp"

namespace koopman {

using Complex = std::complex<double>;

inline constexpr double default_rcond = 1e-10;

/// G = Psi_X^H Psi_X (Hermitian PSD) and H = Psi_X^H Psi_Y.
struct GramPair {
	ComplexMatrix g;
	ComplexMatrix h;
};

/// Exactly Hermitian A^H A, accumulated in the lower triangle and mirrored.
inline ComplexMatrix hermitian_gram(const ComplexMatrix& a) {
	ComplexMatrix g = ComplexMatrix::Zero(a.cols(), a.cols());
	g.selfadjointView<Eigen::Lower>().rankUpdate(a.adjoint());
	return g.selfadjointView<Eigen::Lower>();
}

inline GramPair build_gram(const FeatureMatrices& psi) {
	require(psi.psi_x.rows() == psi.psi_y.rows() && psi.psi_x.cols() == psi.psi_y.cols(), ErrorKind::argument,
			"Psi_X and Psi_Y must have the same shape");
	require(psi.psi_x.allFinite() && psi.psi_y.allFinite(), ErrorKind::numeric, "feature matrices are not finite");
	return {hermitian_gram(psi.psi_x), psi.psi_x.adjoint() * psi.psi_y};
}

struct PseudoInverse {
	ComplexMatrix matrix;
	Index rank = 0;
};

/**
 * Moore-Penrose pseudoinverse of a Hermitian matrix through its
 * eigendecomposition. Eigenvalues with |lambda| <= rcond * max|lambda| are
 * treated as zero.
 */
inline PseudoInverse pinv_hermitian(const ComplexMatrix& g, double rcond = default_rcond) {
	require(g.rows() == g.cols(), ErrorKind::argument, "pseudoinverse input must be square");
	if (g.rows() == 0) return {ComplexMatrix(0, 0), 0};
	require(g.allFinite(), ErrorKind::numeric, "matrix has non-finite entries");
	Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(g);
	require(eig.info() == Eigen::Success, ErrorKind::numeric, "Hermitian eigendecomposition failed");
	const RealVector& lambda = eig.eigenvalues();
	const double top = lambda.cwiseAbs().maxCoeff();
	require(top > 0.0, ErrorKind::degenerate, "Gram matrix is identically zero");
	std::vector<Index> keep;
	for (Index i = 0; i < lambda.size(); ++i)
		if (std::abs(lambda(i)) > rcond * top) keep.push_back(i);
	ComplexMatrix v(g.rows(), static_cast<Index>(keep.size()));
	RealVector inv(static_cast<Index>(keep.size()));
	for (std::size_t j = 0; j < keep.size(); ++j) {
		v.col(static_cast<Index>(j)) = eig.eigenvectors().col(keep[j]);
		inv(static_cast<Index>(j)) = 1.0 / lambda(keep[j]);
	}
	return {v * inv.asDiagonal() * v.adjoint(), static_cast<Index>(keep.size())};
}

/// Pseudoinverse of a general (rectangular) matrix by truncated SVD.
inline PseudoInverse pinv_general(const ComplexMatrix& a, double rcond = default_rcond) {
	if (a.size() == 0) return {ComplexMatrix::Zero(a.cols(), a.rows()), 0};
	require(a.allFinite(), ErrorKind::numeric, "matrix has non-finite entries");
	Eigen::BDCSVD<ComplexMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
	const RealVector& s = svd.singularValues();
	if (s(0) <= 0.0) return {ComplexMatrix::Zero(a.cols(), a.rows()), 0};
	Index r = 0;
	while (r < s.size() && s(r) > rcond * s(0)) ++r;
	const RealVector inv = s.head(r).cwiseInverse();
	return {svd.matrixV().leftCols(r) * inv.asDiagonal() * svd.matrixU().leftCols(r).adjoint(), r};
}

/// EDMD Koopman matrix A = pinv(G) H, the minimum-norm least-squares solution of Psi_X A = Psi_Y.
inline ComplexMatrix koopman_matrix(const GramPair& gram, double rcond = default_rcond) {
	require(gram.g.rows() == gram.g.cols() && gram.h.rows() == gram.g.rows(), ErrorKind::argument,
			"G and H shapes do not agree");
	return pinv_hermitian(gram.g, rcond).matrix * gram.h;
}

/**
 * Koopman eigenvalues, eigenfunction coefficients and modes.
 *
 * Pairs are ordered by |Re(log(mu) / dt)| ascending, with complex-conjugate
 * partners kept adjacent. `order[p]` is the index of entry p in the raw
 * eigendecomposition of `a`, so (mu, xi) are a pure reordering of it.
 * Modes are columns of a d x n matrix, each rotated so its largest-magnitude
 * component is real and positive.
 */
struct KoopmanDecomposition {
	ComplexMatrix a;
	ComplexVector mu;
	ComplexMatrix xi;
	ComplexMatrix modes;
	double dt = 1.0;
	ComplexVector cont_eigs;
	RealVector eig_residuals; ///< |A xi_i - mu_i xi_i| / |A|
	bool defective = false;
	std::vector<Index> order;

	Index size() const noexcept { return mu.size(); }
};

inline Complex continuous_eigenvalue(Complex mu, double dt) {
	if (mu == Complex(0.0, 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0};
	return std::log(mu) / dt;
}

/// Spectral ordering: ascending |Re(cont)|, conjugate pairs adjacent.
inline std::vector<Index> spectral_order(const ComplexVector& mu, double dt, double pair_tol = 1e-8) {
	const Index n = mu.size();
	std::vector<double> key(static_cast<std::size_t>(n));
	for (Index i = 0; i < n; ++i) key[static_cast<std::size_t>(i)] = std::abs(continuous_eigenvalue(mu(i), dt).real());
	std::vector<Index> ord(static_cast<std::size_t>(n));
	std::iota(ord.begin(), ord.end(), Index{0});
	std::stable_sort(ord.begin(), ord.end(),
					 [&](Index a, Index b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });

	for (std::size_t p = 0; p + 1 < ord.size(); ++p) {
		const Complex m = mu(ord[p]);
		const double tol = pair_tol * std::max(1.0, std::abs(m));
		if (std::abs(m.imag()) <= tol) continue;
		for (std::size_t q = p + 1; q < ord.size(); ++q) {
			if (std::abs(mu(ord[q]) - std::conj(m)) <= tol) {
				std::rotate(ord.begin() + static_cast<std::ptrdiff_t>(p + 1), ord.begin() + static_cast<std::ptrdiff_t>(q),
							ord.begin() + static_cast<std::ptrdiff_t>(q + 1));
				++p;
				break;
			}
		}
	}
	return ord;
}

inline void normalize_mode_phase(Eigen::Ref<ComplexVector> mode) {
	Index k = 0;
	if (mode.size() == 0 || mode.cwiseAbs().maxCoeff(&k) == 0.0) return;
	const double mag = std::abs(mode(k));
	mode *= std::conj(mode(k)) / mag;
	mode(k) = mag;
}

struct SpectrumOptions {
	Index n_modes = 0; ///< 0 keeps every eigenpair
	double rcond = default_rcond;
	double defect_tol = 1e-8;
};

namespace detail {

inline KoopmanDecomposition assemble(ComplexMatrix a, const ComplexVector& mu_raw, const ComplexMatrix& xi_raw,
									 const ComplexMatrix& modes_raw, double dt, Index n_modes, double defect_tol) {
	KoopmanDecomposition dec;
	const double a_norm = a.norm();
	const RealVector residual_raw =
		(a * xi_raw - xi_raw * mu_raw.asDiagonal()).colwise().norm().transpose() / (a_norm > 0.0 ? a_norm : 1.0);

	std::vector<Index> ord = spectral_order(mu_raw, dt);
	const Index n = (n_modes <= 0 || n_modes > mu_raw.size()) ? mu_raw.size() : n_modes;
	ord.resize(static_cast<std::size_t>(n));

	dec.a = std::move(a);
	dec.dt = dt;
	dec.mu.resize(n);
	dec.cont_eigs.resize(n);
	dec.eig_residuals.resize(n);
	dec.xi.resize(xi_raw.rows(), n);
	dec.modes.resize(modes_raw.rows(), n);
	for (Index p = 0; p < n; ++p) {
		const Index i = ord[static_cast<std::size_t>(p)];
		dec.mu(p) = mu_raw(i);
		dec.cont_eigs(p) = continuous_eigenvalue(mu_raw(i), dt);
		dec.eig_residuals(p) = residual_raw(i);
		dec.xi.col(p) = xi_raw.col(i);
		dec.modes.col(p) = modes_raw.col(i);
		normalize_mode_phase(dec.modes.col(p));
	}
	dec.defective = n > 0 && dec.eig_residuals.maxCoeff() > defect_tol;
	dec.order = std::move(ord);
	return dec;
}

} // namespace detail

/**
 * Eigendecomposition of an EDMD Koopman matrix plus Koopman modes.
 *
 * Eigenfunction samples Phi = Psi_X xi; modes solve the least-squares
 * reconstruction X^T ~ Phi V, i.e. V = pinv(Phi) X^T, with mode i the i-th
 * row of V. `states` holds the snapshots matching the rows of Psi_X (d x M).
 */
inline KoopmanDecomposition spectrum(const ComplexMatrix& a, const FeatureMatrices& psi, const RealMatrix& states,
									 double dt, const SpectrumOptions& options = {}) {
	require(a.rows() == a.cols() && a.rows() == psi.features(), ErrorKind::argument,
			"Koopman matrix size does not match the feature count");
	require(states.cols() == psi.rows(), ErrorKind::argument,
			"states (" + std::to_string(states.cols()) + " columns) do not match feature rows (" +
				std::to_string(psi.rows()) + ")");
	require(dt > 0.0, ErrorKind::argument, "dt must be positive");
	require(a.allFinite(), ErrorKind::numeric, "Koopman matrix has non-finite entries");

	Eigen::ComplexEigenSolver<ComplexMatrix> eig(a, true);
	require(eig.info() == Eigen::Success, ErrorKind::numeric, "Koopman eigendecomposition failed");
	const ComplexMatrix phi = psi.psi_x * eig.eigenvectors();
	const ComplexMatrix v = pinv_general(phi, options.rcond).matrix * states.transpose().cast<Complex>();
	return detail::assemble(a, eig.eigenvalues(), eig.eigenvectors(), v.transpose(), dt, options.n_modes,
							options.defect_tol);
}

/// Per retained pair: |Psi_Y xi_i - mu_i Psi_X xi_i| / |Psi_X xi_i| (infinite when the sample norm is 0).
inline RealVector eigenfunction_residuals(const KoopmanDecomposition& dec, const FeatureMatrices& psi) {
	require(dec.xi.rows() == psi.features(), ErrorKind::argument, "decomposition does not match the features");
	RealVector out(dec.size());
	for (Index i = 0; i < dec.size(); ++i) {
		const ComplexVector phi_x = psi.psi_x * dec.xi.col(i);
		const double denom = phi_x.norm();
		if (denom == 0.0) {
			out(i) = std::numeric_limits<double>::infinity();
			continue;
		}
		out(i) = (psi.psi_y * dec.xi.col(i) - dec.mu(i) * phi_x).norm() / denom;
	}
	return out;
}

/**
 * Exact DMD baseline. X = U S V^H truncated to `rank` (default: numerical
 * rank at rcond), A~ = U^H Y V S^-1, modes Y V S^-1 w / mu (projected U w
 * when mu = 0). Eigenvalues are discrete-time.
 */
inline KoopmanDecomposition dmd(const SnapshotSet& snapshots, std::optional<Index> rank = std::nullopt,
								const SpectrumOptions& options = {}) {
	const RealMatrix& x = snapshots.x();
	const RealMatrix& y = snapshots.y();
	const Index max_rank = std::min(x.rows(), x.cols());
	if (rank) {
		require(*rank >= 1 && *rank <= max_rank, ErrorKind::argument,
				"DMD rank " + std::to_string(*rank) + " outside [1, " + std::to_string(max_rank) + "]");
	}
	Eigen::BDCSVD<RealMatrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
	const RealVector& s = svd.singularValues();
	require(s(0) > 0.0, ErrorKind::degenerate, "snapshot matrix X is zero");
	Index r = 0;
	if (rank) {
		r = *rank;
		require(s(r - 1) > 0.0, ErrorKind::degenerate, "requested DMD rank exceeds the rank of X");
	} else {
		while (r < s.size() && s(r) > options.rcond * s(0)) ++r;
	}
	const RealMatrix u = svd.matrixU().leftCols(r);
	const RealMatrix yv = y * svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
	const RealMatrix a_tilde = u.transpose() * yv;

	Eigen::ComplexEigenSolver<ComplexMatrix> eig(a_tilde.cast<Complex>(), true);
	require(eig.info() == Eigen::Success, ErrorKind::numeric, "DMD eigendecomposition failed");
	const ComplexVector& mu = eig.eigenvalues();
	const ComplexMatrix& w = eig.eigenvectors();
	ComplexMatrix modes = yv.cast<Complex>() * w;
	for (Index i = 0; i < r; ++i) {
		if (mu(i) != Complex(0.0, 0.0))
			modes.col(i) /= mu(i);
		else
			modes.col(i) = u.cast<Complex>() * w.col(i);
	}
	return detail::assemble(a_tilde.cast<Complex>(), mu, w, modes, snapshots.dt(), options.n_modes,
							options.defect_tol);
}

/// Positions of the first `count` entries whose continuous-time eigenvalue is not stationary (|c| > tol).
inline std::vector<Index> leading_nonstationary(const KoopmanDecomposition& dec, Index count,
												double stationary_tol = 1e-3) {
	std::vector<Index> out;
	for (Index p = 0; p < dec.size() && static_cast<Index>(out.size()) < count; ++p)
		if (std::abs(dec.cont_eigs(p)) > stationary_tol) out.push_back(p);
	return out;
}

/// |<a, b>| / (|a| |b|); invariant to a phase factor on either argument.
inline double abs_cosine(const ComplexVector& a, const ComplexVector& b) {
	const double na = a.norm();
	const double nb = b.norm();
	if (na == 0.0 || nb == 0.0) return 0.0;
	return std::abs(a.dot(b)) / (na * nb);
}

} // namespace koopman
