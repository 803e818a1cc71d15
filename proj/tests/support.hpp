#pragma once

#include <koopman/koopman.hpp>

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing_support {

using namespace koopman;

inline RealMatrix random_real(Index rows, Index cols, std::uint64_t seed) {
	Rng rng(seed);
	RealMatrix m(rows, cols);
	for (Index j = 0; j < cols; ++j)
		for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
	return m;
}

inline ComplexMatrix random_complex(Index rows, Index cols, std::uint64_t seed) {
	Rng rng(seed);
	ComplexMatrix m(rows, cols);
	for (Index j = 0; j < cols; ++j)
		for (Index i = 0; i < rows; ++i) m(i, j) = {rng.normal(), rng.normal()};
	return m;
}

/// Hermitian PSD matrix of the given rank: B B^H with B k x rank.
inline ComplexMatrix random_psd(Index k, Index rank, std::uint64_t seed) {
	const ComplexMatrix b = random_complex(k, rank, seed);
	return b * b.adjoint();
}

/// Random matrix with spectral radius `radius`.
inline RealMatrix random_stable(Index d, double radius, std::uint64_t seed) {
	RealMatrix a = random_real(d, d, seed);
	const double rho = Eigen::EigenSolver<RealMatrix>(a, false).eigenvalues().cwiseAbs().maxCoeff();
	return a * (radius / rho);
}

/// M independent random initial states x_j with y_j = A x_j.
inline SnapshotSet linear_snapshots(const RealMatrix& a, Index m, std::uint64_t seed) {
	RealMatrix x = random_real(a.cols(), m, seed);
	RealMatrix y = a * x;
	return SnapshotSet(std::move(x), std::move(y), 1.0);
}

inline double rel_fro(const ComplexMatrix& a, const ComplexMatrix& b) {
	const double n = b.norm();
	return (a - b).norm() / (n > 0.0 ? n : 1.0);
}

/// Max over a of the distance to the nearest element of b.
inline double set_distance(const ComplexVector& a, const ComplexVector& b) {
	double worst = 0.0;
	for (Index i = 0; i < a.size(); ++i) {
		double best = std::numeric_limits<double>::infinity();
		for (Index j = 0; j < b.size(); ++j) best = std::min(best, std::abs(a(i) - b(j)));
		worst = std::max(worst, best);
	}
	return worst;
}

/// Symmetric set distance.
inline double spectrum_distance(const ComplexVector& a, const ComplexVector& b) {
	return std::max(set_distance(a, b), set_distance(b, a));
}

class TempDir {
public:
	explicit TempDir(const std::string& tag) {
		static int counter = 0;
		path_ = std::filesystem::temp_directory_path() /
				("koopman_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
		std::filesystem::remove_all(path_);
		std::filesystem::create_directories(path_);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir&) = delete;
	TempDir& operator=(const TempDir&) = delete;

	const std::filesystem::path& path() const { return path_; }
	std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
	std::filesystem::path path_;
};

} // namespace testing_support

#define EXPECT_ERROR_KIND(stmt, expected_kind)                                   \
	do {                                                                         \
		try {                                                                    \
			stmt;                                                                \
			ADD_FAILURE() << "no error from " #stmt;                             \
		} catch (const koopman::Error& e) {                                      \
			EXPECT_EQ(e.kind(), expected_kind) << e.what();                      \
		}                                                                        \
	} while (0)
