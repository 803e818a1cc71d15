#pragma once

// On-disk forms of bases and decompositions: KMX1 matrices plus JSON sidecars.

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "data.hpp"
#include "edmd.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "kernels.hpp"

namespace koopman {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline json kernel_to_json(const KernelSpec& k) { return {{"family", to_string(k.family())}, {"sigma", k.sigma()}}; }

inline KernelSpec kernel_from_json(const json& j) {
	return KernelSpec(parse_kernel_family(j.at("family").get<std::string>()), j.at("sigma").get<double>());
}

inline json read_json(const fs::path& path) {
	std::ifstream in(path);
	if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
	try {
		return json::parse(in);
	} catch (const json::parse_error& e) {
		throw FormatError(path.string() + ": " + e.what(), e.byte);
	}
}

inline void write_json(const json& j, const fs::path& path) {
	std::ofstream out(path, std::ios::trunc);
	if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
	out << j.dump(2) << '\n';
}

inline void write_text(const std::string& text, const fs::path& path) { detail::write_file(path, text); }

inline void save_basis(const FourierBasis& basis, const fs::path& dir) {
	save_matrix(basis.frequencies(), dir / "basis_frequencies.kmx");
	write_json({{"type", "rff"},
				{"kernel", kernel_to_json(basis.kernel())},
				{"seed", basis.seed()},
				{"K", basis.size()},
				{"d", basis.dim()}},
			   dir / "basis.json");
}

inline void save_basis(const NystromBasis& basis, const fs::path& dir) {
	save_matrix(basis.landmarks, dir / "basis_landmarks.kmx");
	save_matrix(basis.u, dir / "basis_U.kmx");
	save_matrix(RealMatrix(basis.lambda), dir / "basis_lambda.kmx");
	write_json({{"type", "nystrom"},
				{"kernel", kernel_to_json(basis.kernel)},
				{"rank", basis.rank},
				{"K", basis.size()},
				{"d", basis.dim()}},
			   dir / "basis.json");
}

inline void save_basis(const Basis& basis, const fs::path& dir) {
	std::visit(
		[&](const auto& b) {
			if constexpr (!std::is_same_v<std::decay_t<decltype(b)>, std::monostate>) save_basis(b, dir);
		},
		basis);
}

inline Basis load_basis(const fs::path& dir) {
	const json meta = read_json(dir / "basis.json");
	const std::string type = meta.at("type").get<std::string>();
	const KernelSpec kernel = kernel_from_json(meta.at("kernel"));
	if (type == "rff")
		return FourierBasis(load_real_matrix(dir / "basis_frequencies.kmx"), kernel, meta.value("seed", std::uint64_t{0}));
	if (type == "nystrom") {
		NystromBasis b{load_real_matrix(dir / "basis_landmarks.kmx"), load_real_matrix(dir / "basis_U.kmx"),
					   load_real_matrix(dir / "basis_lambda.kmx").col(0), kernel, meta.at("rank").get<Index>()};
		require(b.u.rows() == b.size() && b.u.cols() == b.size() && b.lambda.size() == b.size() && b.rank >= 1 &&
					b.rank <= b.size(),
				ErrorKind::format, "inconsistent Nystrom basis files in " + dir.string());
		return b;
	}
	throw Error(ErrorKind::format, "unknown basis type '" + type + "' in " + (dir / "basis.json").string());
}

inline std::string format_double(double v) {
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

/// Columns: re, im, |mu|, re(cont), im(cont).
inline std::string eigenvalues_csv(const KoopmanDecomposition& dec) {
	std::string out = "re,im,abs,cont_re,cont_im\n";
	for (Index i = 0; i < dec.size(); ++i) {
		const Complex m = dec.mu(i);
		const Complex c = dec.cont_eigs(i);
		out += format_double(m.real()) + ',' + format_double(m.imag()) + ',' + format_double(std::abs(m)) + ',' +
			   format_double(c.real()) + ',' + format_double(c.imag()) + '\n';
	}
	return out;
}

/// Parses an eigenvalue CSV back into discrete-time eigenvalues.
inline ComplexVector read_eigenvalues_csv(const fs::path& path) {
	std::ifstream in(path);
	if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
	std::string line;
	std::getline(in, line);
	std::vector<Complex> mu;
	while (std::getline(in, line)) {
		if (line.empty()) continue;
		const RealMatrix row = parse_csv_matrix(line);
		require(row.cols() == 5, ErrorKind::format, "eigenvalue rows need 5 columns");
		mu.emplace_back(row(0, 0), row(0, 1));
	}
	ComplexVector out(static_cast<Index>(mu.size()));
	for (std::size_t i = 0; i < mu.size(); ++i) out(static_cast<Index>(i)) = mu[i];
	return out;
}

inline void save_decomposition(const KoopmanDecomposition& dec, const fs::path& dir) {
	write_text(eigenvalues_csv(dec), dir / "eigenvalues.csv");
	save_matrix(dec.modes, dir / "modes.kmx");
}

} // namespace koopman
