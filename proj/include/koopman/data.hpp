#pragma once

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace koopman {

using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/**
 * Paired snapshot matrices. Column j of X is the state at time j, column j
 * of Y its successor one sampling interval later. Immutable once built.
 */
class SnapshotSet {
public:
	SnapshotSet(RealMatrix x, RealMatrix y, double dt) : x_(std::move(x)), y_(std::move(y)), dt_(dt) {
		require(x_.rows() == y_.rows() && x_.cols() == y_.cols(), ErrorKind::argument,
				"X and Y must have identical dimensions");
		require(x_.rows() >= 1, ErrorKind::argument, "state dimension must be at least 1");
		require(x_.cols() >= 1, ErrorKind::insufficient_data, "at least one snapshot pair is required");
		require(dt_ > 0.0 && std::isfinite(dt_), ErrorKind::argument, "dt must be positive and finite");
	}

	/// Shift pairing of a d x (M+1) trajectory.
	static SnapshotSet from_trajectory(const RealMatrix& trajectory, double dt) {
		require(dt > 0.0 && std::isfinite(dt), ErrorKind::argument, "dt must be positive and finite");
		require(trajectory.cols() >= 2, ErrorKind::insufficient_data,
				"a trajectory needs at least 2 snapshots, got " + std::to_string(trajectory.cols()));
		const Index m = trajectory.cols() - 1;
		return SnapshotSet(trajectory.leftCols(m), trajectory.rightCols(m), dt);
	}

	const RealMatrix& x() const noexcept { return x_; }
	const RealMatrix& y() const noexcept { return y_; }
	double dt() const noexcept { return dt_; }
	Index dim() const noexcept { return x_.rows(); }
	Index pairs() const noexcept { return x_.cols(); }

private:
	RealMatrix x_;
	RealMatrix y_;
	double dt_;
};

// ---------------------------------------------------------------------------
// KMX1 binary matrix format
//
//   "KMX1" | u64 rows | u64 cols | u8 kind (0 real, 1 complex) | f64 payload
//
// All integers and floats little-endian; payload row-major, complex entries
// interleaved (re, im).
// ---------------------------------------------------------------------------

using MatrixData = std::variant<RealMatrix, ComplexMatrix>;

inline constexpr std::array<char, 4> kmx_magic{'K', 'M', 'X', '1'};
inline constexpr std::size_t kmx_header_bytes = 4 + 8 + 8 + 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
	for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const unsigned char* p) {
	std::uint64_t v = 0;
	for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
	return v;
}

inline void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

inline std::string read_file(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
	std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	if (in.bad()) throw Error(ErrorKind::io, "read failed for " + path.string());
	return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

} // namespace detail

inline std::string encode_matrix(const MatrixData& m) {
	std::string out;
	std::visit(
		[&](const auto& mat) {
			using M = std::decay_t<decltype(mat)>;
			constexpr bool complex = std::is_same_v<M, ComplexMatrix>;
			const auto rows = static_cast<std::uint64_t>(mat.rows());
			const auto cols = static_cast<std::uint64_t>(mat.cols());
			out.reserve(kmx_header_bytes + rows * cols * (complex ? 16 : 8));
			out.append(kmx_magic.data(), kmx_magic.size());
			detail::put_u64(out, rows);
			detail::put_u64(out, cols);
			out.push_back(complex ? 1 : 0);
			for (Index i = 0; i < mat.rows(); ++i)
				for (Index j = 0; j < mat.cols(); ++j) {
					if constexpr (complex) {
						detail::put_f64(out, mat(i, j).real());
						detail::put_f64(out, mat(i, j).imag());
					} else {
						detail::put_f64(out, mat(i, j));
					}
				}
		},
		m);
	return out;
}

inline MatrixData decode_matrix(std::string_view bytes) {
	const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
	if (bytes.size() < 4 || std::memcmp(p, kmx_magic.data(), 4) != 0) throw FormatError("missing KMX1 magic", 0);
	if (bytes.size() < kmx_header_bytes) throw FormatError("truncated KMX1 header", bytes.size());
	const std::uint64_t rows = detail::get_u64(p + 4);
	const std::uint64_t cols = detail::get_u64(p + 12);
	const unsigned kind = p[20];
	if (kind > 1) throw FormatError("unknown KMX1 kind flag " + std::to_string(kind), 20);
	const std::uint64_t width = kind == 1 ? 2 : 1;
	const std::uint64_t limit = (bytes.size() - kmx_header_bytes) / 8;
	if (rows != 0 && (cols > limit / rows || rows * cols > limit / width))
		throw FormatError("KMX1 payload shorter than declared " + std::to_string(rows) + "x" + std::to_string(cols),
						  bytes.size());
	const std::uint64_t expected = kmx_header_bytes + rows * cols * width * 8;
	if (bytes.size() != expected) {
		throw FormatError("KMX1 payload size mismatch: expected " + std::to_string(expected) + " bytes, file has " +
							  std::to_string(bytes.size()),
						  std::min<std::uint64_t>(expected, bytes.size()));
	}
	const unsigned char* q = p + kmx_header_bytes;
	auto next = [&q] {
		double v = std::bit_cast<double>(detail::get_u64(q));
		q += 8;
		return v;
	};
	if (kind == 0) {
		RealMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
		for (Index i = 0; i < m.rows(); ++i)
			for (Index j = 0; j < m.cols(); ++j) m(i, j) = next();
		return m;
	}
	ComplexMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
	for (Index i = 0; i < m.rows(); ++i)
		for (Index j = 0; j < m.cols(); ++j) {
			const double re = next();
			m(i, j) = {re, next()};
		}
	return m;
}

inline void save_matrix(const MatrixData& m, const std::filesystem::path& path) {
	detail::write_file(path, encode_matrix(m));
}

inline MatrixData load_matrix(const std::filesystem::path& path) { return decode_matrix(detail::read_file(path)); }

inline RealMatrix load_real_matrix(const std::filesystem::path& path) {
	auto m = load_matrix(path);
	if (auto* r = std::get_if<RealMatrix>(&m)) return std::move(*r);
	throw FormatError("expected a real matrix in " + path.string(), 20);
}

inline ComplexMatrix load_complex_matrix(const std::filesystem::path& path) {
	auto m = load_matrix(path);
	if (auto* c = std::get_if<ComplexMatrix>(&m)) return std::move(*c);
	return std::get<RealMatrix>(m).cast<std::complex<double>>();
}

// ---------------------------------------------------------------------------
// CSV: one row per state dimension, comma separated.
// ---------------------------------------------------------------------------

inline RealMatrix parse_csv_matrix(std::string_view text) {
	std::vector<double> values;
	Index rows = 0;
	Index cols = -1;
	std::size_t pos = 0;
	while (pos < text.size()) {
		std::size_t eol = text.find('\n', pos);
		if (eol == std::string_view::npos) eol = text.size();
		std::string_view line = text.substr(pos, eol - pos);
		if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
		const std::size_t line_start = pos;
		pos = eol + 1;
		if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

		Index count = 0;
		std::size_t field = 0;
		while (true) {
			std::size_t comma = line.find(',', field);
			std::size_t end = comma == std::string_view::npos ? line.size() : comma;
			std::size_t b = field;
			std::size_t e = end;
			while (b < e && (line[b] == ' ' || line[b] == '\t')) ++b;
			while (e > b && (line[e - 1] == ' ' || line[e - 1] == '\t')) --e;
			if (b < e && line[b] == '+') ++b;
			double v = 0.0;
			auto [ptr, ec] = std::from_chars(line.data() + b, line.data() + e, v);
			if (b == e || ec != std::errc() || ptr != line.data() + e)
				throw FormatError("invalid number '" + std::string(line.substr(field, end - field)) + "'",
								  line_start + field);
			values.push_back(v);
			++count;
			if (comma == std::string_view::npos) break;
			field = comma + 1;
		}
		if (cols < 0) cols = count;
		if (count != cols)
			throw FormatError("row " + std::to_string(rows) + " has " + std::to_string(count) + " values, expected " +
								  std::to_string(cols),
							  line_start);
		++rows;
	}
	if (rows == 0) return RealMatrix(0, 0);
	RealMatrix m(rows, cols);
	for (Index i = 0; i < rows; ++i)
		for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
	return m;
}

inline std::string format_csv_matrix(const RealMatrix& m) {
	std::string out;
	char buf[32];
	for (Index i = 0; i < m.rows(); ++i) {
		for (Index j = 0; j < m.cols(); ++j) {
			if (j) out.push_back(',');
			auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
			out.append(buf, ptr);
		}
		out.push_back('\n');
	}
	return out;
}

/// Reads a real matrix from either a KMX1 file (detected by magic) or CSV.
inline RealMatrix read_real_matrix_any(const std::filesystem::path& path) {
	const std::string bytes = detail::read_file(path);
	if (bytes.size() >= 4 && std::memcmp(bytes.data(), kmx_magic.data(), 4) == 0) {
		auto m = decode_matrix(bytes);
		if (auto* r = std::get_if<RealMatrix>(&m)) return std::move(*r);
		throw FormatError("snapshot matrices must be real", 20);
	}
	return parse_csv_matrix(bytes);
}

/// Loads a d x (M+1) trajectory and forms the shift-paired snapshot set.
inline SnapshotSet load_snapshots(const std::filesystem::path& path, double dt) {
	require(dt > 0.0 && std::isfinite(dt), ErrorKind::argument, "dt must be positive and finite");
	return SnapshotSet::from_trajectory(read_real_matrix_any(path), dt);
}

/// Loads explicitly paired X and Y files (e.g. several trajectories concatenated).
inline SnapshotSet load_snapshot_pair(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
									  double dt) {
	require(dt > 0.0 && std::isfinite(dt), ErrorKind::argument, "dt must be positive and finite");
	return SnapshotSet(read_real_matrix_any(x_path), read_real_matrix_any(y_path), dt);
}

} // namespace koopman
