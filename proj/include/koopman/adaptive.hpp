#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>

#include "edmd.hpp"
#include "errors.hpp"
#include "features.hpp"

namespace koopman {

/// Relative Moore-Penrose residuals of a candidate pseudoinverse P of G.
struct PenroseResiduals {
	double gpg = 0.0;  ///< |G P G - G| / |G|
	double pgp = 0.0;  ///< |P G P - P| / |P|
	double gp_h = 0.0; ///< |(G P)^H - G P| / |G P|
	double pg_h = 0.0; ///< |(P G)^H - P G| / |P G|

	double max() const { return std::max(std::max(gpg, pgp), std::max(gp_h, pg_h)); }
};

inline PenroseResiduals penrose_residuals(const ComplexMatrix& g, const ComplexMatrix& p) {
	auto rel = [](const ComplexMatrix& diff, const ComplexMatrix& ref) {
		const double n = ref.norm();
		return n > 0.0 ? diff.norm() / n : diff.norm();
	};
	const ComplexMatrix gp = g * p;
	const ComplexMatrix pg = p * g;
	return {rel(gp * g - g, g), rel(pg * p - p, p), rel(gp.adjoint() - gp, gp), rel(pg.adjoint() - pg, pg)};
}

/**
 * Block pseudoinverse of G = [[G0, G1], [G1^H, G2]] from a known G0^+.
 *
 * With Q = G2 - G1^H G0^+ G1 and B = G0^+ G1:
 *
 *   G^+ = [[G0^+ + B Q^+ B^H, -B Q^+], [-Q^+ B^H, Q^+]]
 *
 * Exact when G is Hermitian PSD and rank(G) = rank(G0) + rank(G2).
 */
inline ComplexMatrix block_pseudoinverse(const ComplexMatrix& g0_pinv, const ComplexMatrix& g1,
										 const ComplexMatrix& g2, double rcond = default_rcond) {
	const Index k0 = g0_pinv.rows();
	const Index kn = g2.rows();
	const ComplexMatrix b = g0_pinv * g1;
	ComplexMatrix q = g2 - g1.adjoint() * b;
	q = (0.5 * (q + q.adjoint())).eval();
	const ComplexMatrix q_pinv = q.cwiseAbs().maxCoeff() > 0.0 ? pinv_hermitian(q, rcond).matrix
															  : ComplexMatrix::Zero(kn, kn).eval();
	const ComplexMatrix bq = b * q_pinv;

	ComplexMatrix out(k0 + kn, k0 + kn);
	out.topLeftCorner(k0, k0) = g0_pinv + bq * b.adjoint();
	out.topRightCorner(k0, kn) = -bq;
	out.bottomLeftCorner(kn, k0) = -bq.adjoint();
	out.bottomRightCorner(kn, kn) = q_pinv;
	return out;
}

/**
 * EDMD state that can absorb new feature columns without recomputing the
 * existing Gram blocks. Single owner; each extension returns a new state.
 */
struct AdaptiveState {
	FeatureMatrices psi;
	GramPair gram;
	ComplexMatrix g_pinv;
	ComplexMatrix a;
	double rcond = default_rcond;
	bool used_fallback = false;   ///< last extension recomputed G^+ from scratch
	double penrose_residual = 0.; ///< max relative residual of the last assembled G^+

	Index features() const noexcept { return psi.features(); }

	static AdaptiveState from_features(FeatureMatrices psi, double rcond = default_rcond) {
		AdaptiveState s;
		s.gram = build_gram(psi);
		s.g_pinv = pinv_hermitian(s.gram.g, rcond).matrix;
		s.a = s.g_pinv * s.gram.h;
		s.psi = std::move(psi);
		s.rcond = rcond;
		return s;
	}

	/// Rebuilds a state from stored Gram data (features are recomputed by the caller).
	static AdaptiveState from_parts(FeatureMatrices psi, GramPair gram, ComplexMatrix g_pinv, ComplexMatrix a,
									double rcond = default_rcond) {
		require(gram.g.rows() == psi.features() && g_pinv.rows() == psi.features() && a.rows() == psi.features(),
				ErrorKind::argument, "stored Gram data does not match the feature count");
		AdaptiveState s;
		s.psi = std::move(psi);
		s.gram = std::move(gram);
		s.g_pinv = std::move(g_pinv);
		s.a = std::move(a);
		s.rcond = rcond;
		return s;
	}
};

inline constexpr double fallback_penrose_tol = 1e-6;

/**
 * Appends K_new feature columns. Only the new Gram blocks are formed
 * (O(K0 K_new M + K_new^2 M)); G^+ is assembled blockwise from the stored
 * G0^+. If the assembled G^+ misses the Moore-Penrose identities by more than
 * 1e-6 (rank condition violated), G^+ is recomputed directly and
 * `used_fallback` is set.
 */
inline AdaptiveState extend(const AdaptiveState& state, const ComplexMatrix& psi_x_new,
							const ComplexMatrix& psi_y_new) {
	require(psi_x_new.rows() == state.psi.rows() && psi_y_new.rows() == state.psi.rows(), ErrorKind::argument,
			"new features must have one row per snapshot (" + std::to_string(state.psi.rows()) + ")");
	require(psi_x_new.cols() == psi_y_new.cols(), ErrorKind::argument, "new Psi_X and Psi_Y differ in width");
	if (psi_x_new.cols() == 0) {
		AdaptiveState same = state;
		same.used_fallback = false;
		return same;
	}
	require(psi_x_new.allFinite() && psi_y_new.allFinite(), ErrorKind::numeric, "new features are not finite");

	const ComplexMatrix& x0 = state.psi.psi_x;
	const ComplexMatrix& y0 = state.psi.psi_y;
	const Index k0 = x0.cols();
	const Index kn = psi_x_new.cols();
	const Index k = k0 + kn;

	AdaptiveState next;
	next.rcond = state.rcond;
	next.psi.psi_x.resize(x0.rows(), k);
	next.psi.psi_x << x0, psi_x_new;
	next.psi.psi_y.resize(y0.rows(), k);
	next.psi.psi_y << y0, psi_y_new;

	const ComplexMatrix g1 = x0.adjoint() * psi_x_new;
	const ComplexMatrix g2 = hermitian_gram(psi_x_new);

	next.gram.g.resize(k, k);
	next.gram.g.topLeftCorner(k0, k0) = state.gram.g;
	next.gram.g.topRightCorner(k0, kn) = g1;
	next.gram.g.bottomLeftCorner(kn, k0) = g1.adjoint();
	next.gram.g.bottomRightCorner(kn, kn) = g2;

	next.gram.h.resize(k, k);
	next.gram.h.topLeftCorner(k0, k0) = state.gram.h;
	next.gram.h.topRightCorner(k0, kn) = x0.adjoint() * psi_y_new;
	next.gram.h.bottomLeftCorner(kn, k0) = psi_x_new.adjoint() * y0;
	next.gram.h.bottomRightCorner(kn, kn) = psi_x_new.adjoint() * psi_y_new;

	if (k0 == 0) {
		next.g_pinv = pinv_hermitian(next.gram.g, next.rcond).matrix;
	} else {
		next.g_pinv = block_pseudoinverse(state.g_pinv, g1, g2, next.rcond);
	}
	next.penrose_residual = penrose_residuals(next.gram.g, next.g_pinv).max();
	if (!(next.penrose_residual <= fallback_penrose_tol)) {
		next.g_pinv = pinv_hermitian(next.gram.g, next.rcond).matrix;
		next.used_fallback = true;
		next.penrose_residual = penrose_residuals(next.gram.g, next.g_pinv).max();
	}
	next.a = next.g_pinv * next.gram.h;
	return next;
}

/**
 * Leading-order operation counts for appending K_new features to a K0-feature
 * model over M snapshots, incremental versus recomputing from scratch.
 *
 * Gram-type counts are entries formed times M, per matrix (G and H alike):
 * batch (K0+Kn)^2 M, incremental (2 K0 Kn + Kn^2) M.
 */
struct UpdateCost {
	double gram_batch = 0.0;
	double gram_incremental = 0.0;
	double gram_savings = 1.0; ///< batch / incremental for the G, H update
	double pinv_batch = 0.0;   ///< (K0+Kn)^3
	double pinv_incremental = 0.0; ///< K0^2 Kn + Kn^3
	double product = 0.0;      ///< G^+ H, (K0+Kn)^3 either way
	double total_batch = 0.0;
	double total_incremental = 0.0;
	double total_savings = 1.0;
	bool degenerate = false;   ///< M = 0: no Gram work at all
};

inline UpdateCost update_cost_report(std::uint64_t k0, std::uint64_t k_new, std::uint64_t m) {
	const double a = static_cast<double>(k0);
	const double b = static_cast<double>(k_new);
	const double n = static_cast<double>(m);
	auto ratio = [](double num, double den) {
		if (den > 0.0) return num / den;
		return num > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
	};
	UpdateCost c;
	c.degenerate = m == 0;
	c.gram_batch = 2.0 * (a + b) * (a + b) * n;
	c.gram_incremental = 2.0 * (2.0 * a * b + b * b) * n;
	c.gram_savings = ratio(c.gram_batch, c.gram_incremental);
	c.pinv_batch = (a + b) * (a + b) * (a + b);
	c.pinv_incremental = k_new == 0 ? 0.0 : a * a * b + b * b * b;
	c.product = k_new == 0 ? 0.0 : (a + b) * (a + b) * (a + b);
	c.total_batch = c.gram_batch + c.pinv_batch + (a + b) * (a + b) * (a + b);
	c.total_incremental = c.gram_incremental + c.pinv_incremental + c.product;
	c.total_savings = ratio(c.total_batch, c.total_incremental);
	return c;
}

} // namespace koopman
