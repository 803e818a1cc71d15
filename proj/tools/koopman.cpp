#include <CLI11.hpp>
#include <openssl/evp.h>

#include <koopman/koopman.hpp>
#include <koopman/persist.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace koopman;

// Exit codes: 0 success, 1 usage/validation, 2 numeric/runtime failure.
int exit_code(ErrorKind kind) {
	switch (kind) {
		case ErrorKind::argument:
		case ErrorKind::format:
		case ErrorKind::insufficient_data:
		case ErrorKind::unsupported:
		case ErrorKind::budget: return 1;
		default: return 2;
	}
}

/// Git blob object id: sha1("blob <size>\0" + bytes).
std::string git_blob_hash(const std::string& bytes) {
	std::string obj = "blob " + std::to_string(bytes.size());
	obj.push_back('\0');
	obj += bytes;
	unsigned char md[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	if (EVP_Digest(obj.data(), obj.size(), md, &len, EVP_sha1(), nullptr) != 1)
		throw Error(ErrorKind::io, "SHA-1 digest failed");
	std::string hex;
	char buf[3];
	for (unsigned int i = 0; i < len; ++i) {
		std::snprintf(buf, sizeof buf, "%02x", md[i]);
		hex += buf;
	}
	return hex;
}

std::string file_hash(const fs::path& p) { return git_blob_hash(detail::read_file(p)); }

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void prepare_dir(const fs::path& dir) {
	std::error_code ec;
	fs::create_directories(dir, ec);
	if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
}

struct Manifest {
	std::string subcommand;
	std::vector<std::string> argv;
	json parameters = json::object();
	std::vector<std::string> command; ///< replay arguments, minus --out
	std::vector<fs::path> inputs;

	void write(const fs::path& dir) const {
		json in = json::array();
		for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"sha1", file_hash(p)}});
		write_json({{"subcommand", subcommand},
					{"argv", argv},
					{"parameters", parameters},
					{"command", command},
					{"version", version},
					{"inputs", in}},
				   dir / "manifest.json");
	}
};

json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

json leading_json(const KoopmanDecomposition& dec, Index n) {
	json out = json::array();
	for (Index i = 0; i < std::min(n, dec.size()); ++i)
		out.push_back({{"mu", complex_json(dec.mu(i))},
					   {"abs", std::abs(dec.mu(i))},
					   {"continuous", complex_json(dec.cont_eigs(i))}});
	return out;
}

std::string residuals_csv(const KoopmanDecomposition& dec, const RealVector* eigenfunction) {
	std::string out = eigenfunction ? "index,eig_residual,eigenfunction_residual\n" : "index,eig_residual\n";
	for (Index i = 0; i < dec.size(); ++i) {
		out += std::to_string(i) + ',' + format_double(dec.eig_residuals(i));
		if (eigenfunction) out += ',' + format_double((*eigenfunction)(i));
		out += '\n';
	}
	return out;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
	fn::Config cfg;
	std::string out;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
	auto& c = a.cfg;
	app.add_option("--out", a.out, "Output directory")->required();
	app.add_option("--snapshots", c.n_snapshots, "Snapshot pairs M")->capture_default_str();
	app.add_option("--seed", c.seed, "Forcing seed")->capture_default_str();
	app.add_option("--nx", c.nx, "Grid points")->capture_default_str();
	app.add_option("--length", c.length, "Domain length")->capture_default_str();
	app.add_option("--c0", c.c0)->capture_default_str();
	app.add_option("--c1", c.c1)->capture_default_str();
	app.add_option("--delta", c.delta, "Diffusion ratio on w")->capture_default_str();
	app.add_option("--epsilon", c.epsilon)->capture_default_str();
	app.add_option("--dt-snap", c.dt_snap, "Snapshot interval")->capture_default_str();
	app.add_option("--inner-dt", c.inner_dt, "Euler step")->capture_default_str();
	app.add_option("--perturb-every", c.perturb_every, "Snapshots between forcing events")->capture_default_str();
	app.add_option("--perturb-amp", c.perturb_amp, "Bump amplitude scale")->capture_default_str();
	app.add_option("--bump-count", c.bump_count)->capture_default_str();
	app.add_option("--bump-width", c.bump_width, "Bump width as a fraction of the length")->capture_default_str();
	app.add_option("--burn-in", c.burn_in, "Relaxation time before recording")->capture_default_str();
	app.add_flag("!--no-polish", c.polish_front, "Skip the Newton solve for the standing front");
}

json config_json(const fn::Config& c) {
	return {{"nx", c.nx},
			{"length", c.length},
			{"c0", c.c0},
			{"c1", c.c1},
			{"delta", c.delta},
			{"epsilon", c.epsilon},
			{"dt_snap", c.dt_snap},
			{"inner_dt", c.inner_dt},
			{"n_snapshots", c.n_snapshots},
			{"perturb_every", c.perturb_every},
			{"perturb_amp", c.perturb_amp},
			{"bump_count", c.bump_count},
			{"bump_width", c.bump_width},
			{"burn_in", c.burn_in},
			{"polish_front", c.polish_front},
			{"seed", c.seed}};
}

void run_simulate(const SimulateArgs& a, Manifest& m) {
	const auto& c = a.cfg;
	c.validate();
	const RealMatrix traj = fn::simulate_trajectory(c);
	const fs::path dir = a.out;
	prepare_dir(dir);
	save_matrix(traj, dir / "trajectory.kmx");
	write_json({{"config", config_json(c)},
				{"seed", c.seed},
				{"observable", "v"},
				{"shape", {traj.rows(), traj.cols()}},
				{"forcing", "sum of bump_count Gaussian bumps (uniform centers, N(0, perturb_amp^2) heights, sd "
							"bump_width * length) added to v after recording every perturb_every-th snapshot"},
				{"trajectory_sha1", file_hash(dir / "trajectory.kmx")}},
			   dir / "metadata.json");

	m.parameters = config_json(c);
	m.parameters["out"] = absolute(a.out);
	m.command = {"simulate-fn",
				 "--snapshots", std::to_string(c.n_snapshots),
				 "--seed", std::to_string(c.seed),
				 "--nx", std::to_string(c.nx),
				 "--length", format_double(c.length),
				 "--c0", format_double(c.c0),
				 "--c1", format_double(c.c1),
				 "--delta", format_double(c.delta),
				 "--epsilon", format_double(c.epsilon),
				 "--dt-snap", format_double(c.dt_snap),
				 "--inner-dt", format_double(c.inner_dt),
				 "--perturb-every", std::to_string(c.perturb_every),
				 "--perturb-amp", format_double(c.perturb_amp),
				 "--bump-count", std::to_string(c.bump_count),
				 "--bump-width", format_double(c.bump_width),
				 "--burn-in", format_double(c.burn_in)};
	if (!c.polish_front) m.command.push_back("--no-polish");
	m.write(dir);
	std::cout << "wrote " << traj.rows() << " x " << traj.cols() << " trajectory to " << (dir / "trajectory.kmx")
			  << '\n';
}

// ---------------------------------------------------------------------------

struct FitArgs {
	std::string in;
	std::string y;
	double dt = 1.0;
	std::string method = "rff";
	Index k = 100;
	std::string kernel = "gaussian";
	std::string sigma = "auto";
	std::uint64_t seed = 0;
	std::string frequencies;
	Index rank = 0;
	Index n_modes = 0;
	double rcond = default_rcond;
	Index bandwidth_pairs = default_bandwidth_pairs;
	std::string out;
};

void add_fit(CLI::App& app, FitArgs& a) {
	app.add_option("--in", a.in, "Snapshot trajectory (KMX1 or CSV, d x (M+1)), or X when --y is given")
		->required()
		->check(CLI::ExistingFile);
	app.add_option("--y", a.y, "Successor snapshots Y (d x M)")->check(CLI::ExistingFile);
	app.add_option("--dt", a.dt, "Snapshot interval")->capture_default_str();
	app.add_option("--method", a.method, "rff | nystrom-cheap | nystrom-expensive | dmd | linear")
		->capture_default_str();
	app.add_option("--k", a.k, "Number of features")->capture_default_str();
	app.add_option("--kernel", a.kernel, "gaussian | laplacian | cauchy")->capture_default_str();
	app.add_option("--sigma", a.sigma, "Kernel bandwidth or 'auto'")->capture_default_str();
	app.add_option("--seed", a.seed)->capture_default_str();
	app.add_option("--frequencies", a.frequencies, "Fixed RFF frequencies (K x d)")->check(CLI::ExistingFile);
	app.add_option("--rank", a.rank, "DMD truncation rank (0: numerical rank)")->capture_default_str();
	app.add_option("--n-modes", a.n_modes, "Keep only the leading modes (0: all)")->capture_default_str();
	app.add_option("--rcond", a.rcond, "Relative pseudoinverse cutoff")->capture_default_str();
	app.add_option("--bandwidth-pairs", a.bandwidth_pairs, "Snapshot pairs for --sigma auto")->capture_default_str();
	app.add_option("--out", a.out, "Output directory")->required();
}

SnapshotSet load_input(const std::string& in, const std::string& y, double dt) {
	return y.empty() ? load_snapshots(in, dt) : load_snapshot_pair(in, y, dt);
}

/// Writes everything an EDMD model directory holds; shared by fit and extend.
void write_edmd_model(const fs::path& dir, const Basis& basis, const AdaptiveState& st,
					  const KoopmanDecomposition& dec, const json& summary) {
	save_basis(basis, dir);
	save_matrix(st.gram.g, dir / "G.kmx");
	save_matrix(st.gram.h, dir / "H.kmx");
	save_matrix(st.g_pinv, dir / "Ginv.kmx");
	save_matrix(st.a, dir / "A.kmx");
	save_decomposition(dec, dir);
	const RealVector ef = eigenfunction_residuals(dec, st.psi);
	write_text(residuals_csv(dec, &ef), dir / "residuals.csv");
	write_json(summary, dir / "summary.json");
}

void run_fit(const FitArgs& a, CLI::App& app, Manifest& m) {
	require(a.dt > 0.0, ErrorKind::argument, "--dt must be positive");
	require(a.n_modes >= 0 && a.rank >= 0, ErrorKind::argument, "--n-modes and --rank must be nonnegative");
	require(a.rcond > 0.0 && a.rcond < 1.0, ErrorKind::argument, "--rcond must lie in (0, 1)");
	const bool is_dmd = a.method == "dmd";
	const FeatureMethod method = is_dmd ? FeatureMethod::linear : parse_feature_method(a.method);
	const bool fixed_z = !a.frequencies.empty();
	if (fixed_z) require(method == FeatureMethod::rff, ErrorKind::argument, "--frequencies applies to --method rff");
	if (!is_dmd && method != FeatureMethod::linear && !(fixed_z && app.count("--k") == 0))
		require(a.k >= 1, ErrorKind::argument, "--k must be positive");

	const SnapshotSet snaps = load_input(a.in, a.y, a.dt);
	const SpectrumOptions opts{a.n_modes, a.rcond};
	const fs::path dir = a.out;

	m.inputs.push_back(absolute(a.in));
	if (!a.y.empty()) m.inputs.push_back(absolute(a.y));
	m.parameters = {{"method", a.method}, {"in", absolute(a.in)}, {"y", a.y.empty() ? "" : absolute(a.y)},
					{"dt", a.dt},		  {"seed", a.seed},		   {"n_modes", a.n_modes},
					{"rcond", a.rcond},	  {"out", absolute(a.out)}, {"M", snaps.pairs()},
					{"d", snaps.dim()}};
	m.command = {"fit", "--in", absolute(a.in), "--dt", format_double(a.dt), "--method", a.method,
				 "--seed", std::to_string(a.seed), "--n-modes", std::to_string(a.n_modes), "--rcond",
				 format_double(a.rcond)};
	if (!a.y.empty()) m.command.insert(m.command.end(), {"--y", absolute(a.y)});

	json summary = {{"method", a.method}, {"M", snaps.pairs()}, {"d", snaps.dim()}, {"dt", a.dt}};

	if (is_dmd) {
		std::optional<Index> rank;
		if (a.rank > 0) rank = a.rank;
		const KoopmanDecomposition dec = dmd(snaps, rank, opts);
		prepare_dir(dir);
		save_decomposition(dec, dir);
		write_text(residuals_csv(dec, nullptr), dir / "residuals.csv");
		summary["rank"] = dec.size();
		summary["defective"] = dec.defective;
		summary["leading"] = leading_json(dec, 10);
		write_json(summary, dir / "summary.json");
		m.parameters["rank"] = a.rank;
		m.command.insert(m.command.end(), {"--rank", std::to_string(a.rank)});
		m.write(dir);
		std::cout << "DMD rank " << dec.size() << ", wrote " << dir.string() << '\n';
		return;
	}

	FeatureModel model{method, std::monostate{}, {}, {}};
	std::optional<KernelSpec> kernel;
	if (method != FeatureMethod::linear) {
		const KernelFamily family = parse_kernel_family(a.kernel);
		double sigma = 0.0;
		if (a.sigma == "auto") {
			require(a.bandwidth_pairs >= 1, ErrorKind::argument, "--bandwidth-pairs must be positive");
			sigma = estimate_bandwidth(snaps.x(), a.bandwidth_pairs, a.seed);
		} else {
			try {
				std::size_t used = 0;
				sigma = std::stod(a.sigma, &used);
				require(used == a.sigma.size(), ErrorKind::argument, "");
			} catch (const std::exception&) {
				throw Error(ErrorKind::argument, "--sigma must be a positive number or 'auto', got '" + a.sigma + "'");
			}
		}
		kernel = KernelSpec(family, sigma);
		m.parameters["kernel"] = a.kernel;
		m.parameters["sigma"] = a.sigma;
		m.parameters["sigma_resolved"] = sigma;
		m.parameters["bandwidth_pairs"] = a.bandwidth_pairs;
		m.command.insert(m.command.end(), {"--kernel", a.kernel, "--sigma", a.sigma, "--bandwidth-pairs",
										   std::to_string(a.bandwidth_pairs)});
		summary["kernel"] = kernel_to_json(*kernel);
	}

	if (fixed_z) {
		FourierBasis basis(read_real_matrix_any(a.frequencies), *kernel, a.seed);
		if (app.count("--k"))
			require(a.k == basis.size(), ErrorKind::argument, "--k disagrees with the rows of --frequencies");
		model.psi = rff_features(basis, snaps);
		model.basis = std::move(basis);
		m.inputs.push_back(absolute(a.frequencies));
		m.parameters["frequencies"] = absolute(a.frequencies);
		m.command.insert(m.command.end(), {"--frequencies", absolute(a.frequencies)});
	} else {
		model = build_feature_matrices(method, snaps, a.k, kernel.value_or(KernelSpec(KernelFamily::gaussian, 1.0)),
									   a.seed);
		if (method != FeatureMethod::linear) m.command.insert(m.command.end(), {"--k", std::to_string(a.k)});
	}
	m.parameters["K"] = model.psi.features();

	const AdaptiveState st = AdaptiveState::from_features(model.psi, a.rcond);
	const KoopmanDecomposition dec = spectrum(st.a, st.psi, model.states(snaps), a.dt, opts);
	const PseudoInverse gp = pinv_hermitian(st.gram.g, a.rcond);

	summary["K"] = model.psi.features();
	summary["rows"] = model.psi.rows();
	summary["gram_rank"] = gp.rank;
	summary["defective"] = dec.defective;
	summary["max_eig_residual"] = dec.size() ? dec.eig_residuals.maxCoeff() : 0.0;
	summary["leading"] = leading_json(dec, 10);

	prepare_dir(dir);
	write_edmd_model(dir, model.basis, st, dec, summary);
	m.write(dir);
	std::cout << a.method << " K=" << model.psi.features() << " M=" << snaps.pairs() << ", wrote " << dir.string()
			  << '\n';
}

// ---------------------------------------------------------------------------

struct ExtendArgs {
	std::string model;
	Index k_new = 0;
	std::optional<std::uint64_t> seed;
	std::string out;
};

void add_extend(CLI::App& app, ExtendArgs& a) {
	app.add_option("--model", a.model, "Directory written by fit (rff) or extend")
		->required()
		->check(CLI::ExistingDirectory);
	app.add_option("--k-new", a.k_new, "Features to append")->required();
	app.add_option("--seed", a.seed, "Seed for the new frequencies (default: model seed + feature count)");
	app.add_option("--out", a.out, "Output directory")->required();
}

void run_extend(const ExtendArgs& a, Manifest& m) {
	require(a.k_new >= 0, ErrorKind::argument, "--k-new must be nonnegative");
	const fs::path src = a.model;
	const json prev = read_json(src / "manifest.json");
	const json& p = prev.at("parameters");
	const std::string method = p.at("method").get<std::string>();
	if (method != "rff")
		throw Error(ErrorKind::unsupported, "extend supports rff models only (model method is " + method + ")");

	const std::string in = p.at("in").get<std::string>();
	const std::string y = p.value("y", std::string());
	for (const auto& rec : prev.at("inputs")) {
		const fs::path path = rec.at("path").get<std::string>();
		if (path == fs::path(in) || (!y.empty() && path == fs::path(y)))
			require(fs::exists(path) && file_hash(path) == rec.at("sha1").get<std::string>(), ErrorKind::format,
					"dataset " + path.string() + " changed since the model was fitted");
	}
	const double dt = p.at("dt").get<double>();
	const double rcond = p.at("rcond").get<double>();
	const Index n_modes = p.at("n_modes").get<Index>();
	const SnapshotSet snaps = load_input(in, y, dt);

	const Basis loaded = load_basis(src);
	const auto* basis = std::get_if<FourierBasis>(&loaded);
	require(basis != nullptr, ErrorKind::format, "model basis is not an rff basis");
	const FeatureMatrices psi = rff_features(*basis, snaps);
	AdaptiveState st = AdaptiveState::from_parts(
		psi, {load_complex_matrix(src / "G.kmx"), load_complex_matrix(src / "H.kmx")},
		load_complex_matrix(src / "Ginv.kmx"), load_complex_matrix(src / "A.kmx"), rcond);

	const auto k0 = static_cast<std::uint64_t>(basis->size());
	const std::uint64_t seed = a.seed.value_or(basis->seed() + k0);
	FourierBasis grown = *basis;
	ComplexMatrix new_x(snaps.pairs(), 0), new_y(snaps.pairs(), 0);
	if (a.k_new > 0) {
		const FourierBasis extra = FourierBasis::sample(basis->kernel(), a.k_new, basis->dim(), seed);
		const FeatureMatrices f = rff_features(extra, snaps);
		new_x = f.psi_x;
		new_y = f.psi_y;
		grown = basis->appended(extra.frequencies());
	}
	const AdaptiveState next = extend(st, new_x, new_y);
	if (next.used_fallback)
		std::cerr << "warning: rank condition failed (Moore-Penrose residual above " << fallback_penrose_tol
				  << "); G^+ recomputed from scratch\n";
	const KoopmanDecomposition dec = spectrum(next.a, next.psi, snaps.x(), dt, {n_modes, rcond});

	const UpdateCost cost = update_cost_report(k0, static_cast<std::uint64_t>(a.k_new),
											   static_cast<std::uint64_t>(snaps.pairs()));
	const json cost_json = {{"K0", k0},
							{"K_new", a.k_new},
							{"M", snaps.pairs()},
							{"gram_batch", cost.gram_batch},
							{"gram_incremental", cost.gram_incremental},
							{"gram_savings", cost.gram_savings},
							{"pinv_batch", cost.pinv_batch},
							{"pinv_incremental", cost.pinv_incremental},
							{"product", cost.product},
							{"total_batch", cost.total_batch},
							{"total_incremental", cost.total_incremental},
							{"total_savings", cost.total_savings},
							{"degenerate", cost.degenerate},
							{"used_fallback", next.used_fallback},
							{"penrose_residual", next.penrose_residual}};

	json summary = read_json(src / "summary.json");
	summary["K"] = next.features();
	summary["gram_rank"] = pinv_hermitian(next.gram.g, rcond).rank;
	summary["defective"] = dec.defective;
	summary["max_eig_residual"] = dec.size() ? dec.eig_residuals.maxCoeff() : 0.0;
	summary["leading"] = leading_json(dec, 10);

	const fs::path dir = a.out;
	prepare_dir(dir);
	write_edmd_model(dir, grown, next, dec, summary);
	write_json(cost_json, dir / "cost_report.json");

	m.parameters = p;
	m.parameters["out"] = absolute(a.out);
	m.parameters["K"] = next.features();
	m.parameters["extended_from"] = absolute(a.model);
	m.parameters["k_new"] = a.k_new;
	m.parameters["extend_seed"] = seed;
	m.command = {"extend", "--model", absolute(a.model), "--k-new", std::to_string(a.k_new), "--seed",
				 std::to_string(seed)};
	m.inputs.push_back(in);
	if (!y.empty()) m.inputs.push_back(y);
	for (const char* f : {"manifest.json", "basis.json", "basis_frequencies.kmx", "G.kmx", "H.kmx", "Ginv.kmx", "A.kmx"})
		m.inputs.push_back(fs::absolute(src / f));
	m.write(dir);
	std::cout << "extended " << k0 << " -> " << next.features() << " features"
			  << (next.used_fallback ? " (batch fallback)" : "") << ", gram savings x" << cost.gram_savings << '\n';
}

// ---------------------------------------------------------------------------

struct KernelCheckArgs {
	std::string kernel = "gaussian";
	double sigma = 1.0;
	Index d = 5;
	std::vector<Index> k_list{256, 1024, 4096, 16384};
	Index pairs = 100;
	std::uint64_t seed = 0;
	std::string out;
};

void add_kernel_check(CLI::App& app, KernelCheckArgs& a) {
	app.add_option("--kernel", a.kernel, "gaussian | laplacian | cauchy")->capture_default_str();
	app.add_option("--sigma", a.sigma)->capture_default_str();
	app.add_option("--d", a.d, "State dimension")->capture_default_str();
	app.add_option("--k-list", a.k_list, "Feature counts")->delimiter(',')->capture_default_str();
	app.add_option("--pairs", a.pairs, "Test pairs")->capture_default_str();
	app.add_option("--seed", a.seed)->capture_default_str();
	app.add_option("--out", a.out, "Output directory")->required();
}

void run_kernel_check(const KernelCheckArgs& a, Manifest& m) {
	require(!a.k_list.empty(), ErrorKind::argument, "--k-list is empty");
	const KernelSpec kernel(parse_kernel_family(a.kernel), a.sigma);
	const auto points = kernel_convergence(kernel, a.d, a.k_list, a.pairs, a.seed);

	std::string csv = "K,error\n";
	std::vector<double> ks, errs;
	json pts = json::array();
	for (const auto& pt : points) {
		csv += std::to_string(pt.k) + ',' + format_double(pt.error) + '\n';
		ks.push_back(static_cast<double>(pt.k));
		errs.push_back(pt.error);
		pts.push_back({{"K", pt.k}, {"error", pt.error}});
	}
	json summary = {{"kernel", kernel_to_json(kernel)}, {"d", a.d}, {"pairs", a.pairs}, {"points", pts}};
	if (points.size() >= 2) summary["slope"] = loglog_slope(ks, errs);

	const fs::path dir = a.out;
	prepare_dir(dir);
	write_text(csv, dir / "kernel_check.csv");
	write_json(summary, dir / "kernel_check.json");

	std::string list;
	for (std::size_t i = 0; i < a.k_list.size(); ++i) list += (i ? "," : "") + std::to_string(a.k_list[i]);
	m.parameters = {{"kernel", a.kernel}, {"sigma", a.sigma}, {"d", a.d},
					{"k_list", a.k_list}, {"pairs", a.pairs}, {"seed", a.seed},
					{"out", absolute(a.out)}};
	m.command = {"kernel-check", "--kernel", a.kernel, "--sigma", format_double(a.sigma), "--d", std::to_string(a.d),
				 "--k-list", list, "--pairs", std::to_string(a.pairs), "--seed", std::to_string(a.seed)};
	m.write(dir);
	std::cout << csv;
	if (summary.contains("slope")) std::cout << "slope " << summary["slope"].get<double>() << '\n';
}

// ---------------------------------------------------------------------------

struct BenchArgs {
	std::vector<std::string> methods{"rff", "nystrom-cheap", "nystrom-expensive"};
	std::string axis = "M";
	std::vector<Index> values;
	Index k = 50;
	Index m = 2000;
	Index d = 1000;
	int repeats = 3;
	std::uint64_t seed = 0;
	double budget_gib = 4.0;
	std::string out;
};

void add_bench(CLI::App& app, BenchArgs& a) {
	app.add_option("--method", a.methods, "Methods to time")->delimiter(',')->capture_default_str();
	app.add_option("--axis", a.axis, "Swept axis: K, M or d")->capture_default_str();
	app.add_option("--values", a.values, "Axis values (default: M 1000,4000,16000; d 250,1000,4000; K 25,50,100)")
		->delimiter(',');
	app.add_option("--k", a.k, "Fixed K")->capture_default_str();
	app.add_option("--m", a.m, "Fixed M")->capture_default_str();
	app.add_option("--d", a.d, "Fixed d")->capture_default_str();
	app.add_option("--repeats", a.repeats)->capture_default_str();
	app.add_option("--seed", a.seed)->capture_default_str();
	app.add_option("--memory-budget", a.budget_gib, "Working-set budget in GiB")->capture_default_str();
	app.add_option("--out", a.out, "Output directory")->required();
}

void run_bench(const BenchArgs& a, Manifest& man) {
	const bench::Axis axis = bench::parse_axis(a.axis);
	std::vector<Index> values = a.values;
	if (values.empty()) {
		switch (axis) {
			case bench::Axis::m: values = {1000, 4000, 16000}; break;
			case bench::Axis::d: values = {250, 1000, 4000}; break;
			case bench::Axis::k: values = {25, 50, 100}; break;
		}
	}
	require(a.budget_gib > 0.0, ErrorKind::argument, "--memory-budget must be positive");
	const auto budget = static_cast<std::uint64_t>(a.budget_gib * static_cast<double>(1ULL << 30));
	std::vector<FeatureMethod> methods;
	for (const auto& s : a.methods) methods.push_back(parse_feature_method(s));

	std::vector<bench::BenchCase> cases;
	for (FeatureMethod method : methods)
		for (Index v : values) {
			bench::BenchCase c{method, a.k, a.m, a.d, a.repeats, a.seed};
			(axis == bench::Axis::k ? c.k : axis == bench::Axis::m ? c.m : c.d) = v;
			cases.push_back(c);
		}
	// Validate every case before spending time on any of them.
	for (const auto& c : cases) {
		require(c.method != FeatureMethod::linear, ErrorKind::argument, "the linear method is not benchmarked");
		require(c.k >= 1 && c.m >= 1 && c.d >= 1 && c.repeats >= 1, ErrorKind::argument,
				"K, M, d and repeats must be positive");
		if (c.method != FeatureMethod::rff)
			require(c.k <= c.m, ErrorKind::argument, "Nystrom benchmarks need K <= M");
		if (bench::memory_estimate(c) > budget)
			throw Error(ErrorKind::budget, "case " + std::string(to_string(c.method)) + " K=" + std::to_string(c.k) +
											   " M=" + std::to_string(c.m) + " d=" + std::to_string(c.d) +
											   " needs an estimated " + std::to_string(bench::memory_estimate(c)) +
											   " bytes, budget is " + std::to_string(budget));
	}

	const fs::path dir = a.out;
	prepare_dir(dir);
	std::string csv = bench::csv_header();
	json case_json = json::array();
	json fits = json::array();
	for (FeatureMethod method : methods) {
		std::vector<bench::BenchResult> results;
		for (const auto& c : cases) {
			if (c.method != method) continue;
			bench::BenchResult r = bench::run_case(c, budget);
			std::cerr << to_string(method) << " K=" << c.k << " M=" << c.m << " d=" << c.d << ": basis " << r.basis
					  << " s, koopman " << r.koopman << " s, eigen " << r.eigen << " s\n";
			csv += bench::csv_rows(r);
			case_json.push_back({{"method", to_string(method)},
								 {"K", c.k},
								 {"M", c.m},
								 {"d", c.d},
								 {"basis", r.basis},
								 {"koopman", r.koopman},
								 {"eigen", r.eigen},
								 {"total", r.total},
								 {"memory_estimate", r.memory_estimate}});
			results.push_back(std::move(r));
		}
		if (results.size() < 3) continue;
		for (bench::Phase ph : {bench::Phase::basis, bench::Phase::koopman, bench::Phase::eigen, bench::Phase::total}) {
			json fit = {{"method", to_string(method)},
						{"axis", to_string(axis)},
						{"phase", to_string(ph)},
						{"predicted", bench::predicted_exponent(method, axis, ph)}};
			try {
				fit["slope"] = bench::fit_scaling(results, axis, ph);
			} catch (const Error& e) {
				fit["slope"] = nullptr;
				fit["note"] = e.what();
			}
			fits.push_back(fit);
		}
	}
	write_text(csv, dir / "bench.csv");
	write_json({{"axis", to_string(axis)}, {"repeats", a.repeats}, {"seed", a.seed}, {"cases", case_json},
				{"fits", fits}},
			   dir / "bench_summary.json");

	std::string vlist, mlist;
	for (std::size_t i = 0; i < values.size(); ++i) vlist += (i ? "," : "") + std::to_string(values[i]);
	for (std::size_t i = 0; i < a.methods.size(); ++i) mlist += (i ? "," : "") + a.methods[i];
	man.parameters = {{"methods", a.methods}, {"axis", to_string(axis)}, {"values", values}, {"K", a.k},
					  {"M", a.m},			  {"d", a.d},				 {"repeats", a.repeats}, {"seed", a.seed},
					  {"memory_budget", budget}, {"out", absolute(a.out)}};
	man.command = {"bench", "--method", mlist, "--axis", std::string(to_string(axis)), "--values", vlist,
				   "--k", std::to_string(a.k), "--m", std::to_string(a.m), "--d", std::to_string(a.d),
				   "--repeats", std::to_string(a.repeats), "--seed", std::to_string(a.seed),
				   "--memory-budget", format_double(a.budget_gib)};
	man.write(dir);
	for (const auto& f : fits)
		if (!f["slope"].is_null())
			std::cout << f["method"].get<std::string>() << ' ' << f["phase"].get<std::string>() << " slope "
					  << f["slope"].get<double>() << " (predicted " << f["predicted"].get<double>() << ")\n";
}

// ---------------------------------------------------------------------------

void run_info(bool as_json) {
	const json info = {
		{"version", version},
		{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
					  std::to_string(EIGEN_MINOR_VERSION)},
		{"threads", thread_count()},
		{"methods", {"rff", "nystrom-cheap", "nystrom-expensive", "dmd", "linear"}},
		{"kernels", {"gaussian", "laplacian", "cauchy"}},
		{"formats", {"KMX1", "CSV"}}};
	if (as_json) {
		std::cout << info.dump(2) << '\n';
		return;
	}
	std::cout << "koopman " << version << "\n"
			  << "eigen    " << info["eigen"].get<std::string>() << "\n"
			  << "threads  " << thread_count() << " (KOOPMAN_THREADS caps this)\n"
			  << "methods  rff nystrom-cheap nystrom-expensive dmd linear\n"
			  << "kernels  gaussian laplacian cauchy\n";
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Koopman operator approximation with randomized kernel features"};
	app.require_subcommand(1);

	SimulateArgs sim;
	FitArgs fit;
	ExtendArgs ext;
	KernelCheckArgs kc;
	BenchArgs bn;
	bool info_json = false;

	auto* sim_cmd = app.add_subcommand("simulate-fn", "Generate a forced Fitzhugh-Nagumo snapshot dataset");
	add_simulate(*sim_cmd, sim);
	auto* fit_cmd = app.add_subcommand("fit", "Fit a Koopman model and export its spectrum");
	add_fit(*fit_cmd, fit);
	auto* ext_cmd = app.add_subcommand("extend", "Append random Fourier features to a fitted model");
	add_extend(*ext_cmd, ext);
	auto* kc_cmd = app.add_subcommand("kernel-check", "RFF kernel approximation error versus K");
	add_kernel_check(*kc_cmd, kc);
	auto* bench_cmd = app.add_subcommand("bench", "Per-phase runtime scaling");
	add_bench(*bench_cmd, bn);
	auto* info_cmd = app.add_subcommand("info", "Version and build information");
	info_cmd->add_flag("--json", info_json);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : 1;
	}

	Manifest m;
	m.argv.assign(argv, argv + argc);
	try {
		if (*sim_cmd) {
			m.subcommand = "simulate-fn";
			run_simulate(sim, m);
		} else if (*fit_cmd) {
			m.subcommand = "fit";
			run_fit(fit, *fit_cmd, m);
		} else if (*ext_cmd) {
			m.subcommand = "extend";
			run_extend(ext, m);
		} else if (*kc_cmd) {
			m.subcommand = "kernel-check";
			run_kernel_check(kc, m);
		} else if (*bench_cmd) {
			m.subcommand = "bench";
			run_bench(bn, m);
		} else if (*info_cmd) {
			run_info(info_json);
		}
	} catch (const Error& e) {
		std::cerr << "error: " << e.what() << '\n';
		return exit_code(e.kind());
	} catch (const json::exception& e) {
		std::cerr << "error (format): " << e.what() << '\n';
		return 1;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 2;
	}
	return 0;
}
