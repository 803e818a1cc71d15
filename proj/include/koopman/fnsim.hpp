#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

#include "data.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace koopman::fn {

/**
 * 1-D Fitzhugh-Nagumo reaction-diffusion system on [0, length]:
 *
 *   v_t = v_xx + v - w - v^3
 *   w_t = delta w_xx + epsilon (v - c1 w - c0)
 *
 * with zero-flux (Neumann) boundaries, nx grid points including both ends.
 */
struct Config {
	Index nx = 100;
	double length = 20.0;
	double c0 = -0.03;
	double c1 = 2.0;
	double delta = 4.0;
	double epsilon = 0.02;
	double dt_snap = 1.0;
	double inner_dt = 0.004;
	Index n_snapshots = 2500;   ///< snapshot pairs M; the trajectory has M + 1 states
	Index perturb_every = 25;
	double perturb_amp = 0.1;   ///< bump amplitudes are perturb_amp * N(0, 1)
	Index bump_count = 5;
	double bump_width = 0.1;    ///< bump standard deviation as a fraction of length
	double burn_in = 50.0;      ///< relaxation time from the tanh front
	bool polish_front = true;   ///< Newton-solve for the exact standing front after burn-in
	std::uint64_t seed = 0;

	double dx() const { return length / static_cast<double>(nx - 1); }

	/// Largest stable explicit step for the diffusion terms.
	double stability_limit() const { return dx() * dx() / (2.0 * std::max(1.0, delta)); }

	Index steps_per_snapshot() const { return static_cast<Index>(std::llround(dt_snap / inner_dt)); }

	void validate() const {
		require(nx >= 3, ErrorKind::argument, "nx must be at least 3");
		require(length > 0.0 && std::isfinite(length), ErrorKind::argument, "domain length must be positive");
		require(dt_snap > 0.0 && inner_dt > 0.0, ErrorKind::argument, "time steps must be positive");
		require(inner_dt < stability_limit(), ErrorKind::argument,
				"inner_dt " + std::to_string(inner_dt) + " violates the diffusion stability bound " +
					std::to_string(stability_limit()));
		const double steps = dt_snap / inner_dt;
		require(std::abs(steps - std::round(steps)) <= 1e-9 * steps, ErrorKind::argument,
				"inner_dt must divide the snapshot interval");
		require(n_snapshots >= 1, ErrorKind::insufficient_data, "empty trajectory: n_snapshots must be at least 1");
		require(perturb_every >= 1, ErrorKind::argument, "perturb_every must be positive");
		require(perturb_amp >= 0.0 && bump_count >= 0 && bump_width > 0.0, ErrorKind::argument,
				"invalid perturbation parameters");
		require(burn_in >= 0.0, ErrorKind::argument, "burn_in must be nonnegative");
	}
};

struct State {
	RealVector v;
	RealVector w;
	double t = 0.0;
};

/// Second-order central Laplacian with ghost-point Neumann ends.
inline RealVector laplacian(const RealVector& u, double dx) {
	const Index n = u.size();
	RealVector out(n);
	const double s = 1.0 / (dx * dx);
	out(0) = 2.0 * (u(1) - u(0)) * s;
	for (Index i = 1; i + 1 < n; ++i) out(i) = (u(i + 1) - 2.0 * u(i) + u(i - 1)) * s;
	out(n - 1) = 2.0 * (u(n - 2) - u(n - 1)) * s;
	return out;
}

/// Right-hand side (v_t; w_t) stacked.
inline RealVector rhs(const RealVector& v, const RealVector& w, const Config& cfg) {
	const Index n = v.size();
	RealVector out(2 * n);
	out.head(n) = laplacian(v, cfg.dx()).array() + v.array() - w.array() - v.array().cube();
	out.tail(n) = cfg.delta * laplacian(w, cfg.dx()).array() + cfg.epsilon * (v.array() - cfg.c1 * w.array() - cfg.c0);
	return out;
}

/// One explicit Euler step of length cfg.inner_dt.
inline State fn_step(const State& s, const Config& cfg) {
	require(s.v.size() == cfg.nx && s.w.size() == cfg.nx, ErrorKind::argument, "state size does not match nx");
	require(cfg.inner_dt < cfg.stability_limit(), ErrorKind::argument, "inner_dt violates the stability bound");
	const Index n = cfg.nx;
	const RealVector f = rhs(s.v, s.w, cfg);
	State out{s.v + cfg.inner_dt * f.head(n), s.w + cfg.inner_dt * f.tail(n), s.t + cfg.inner_dt};
	if (!out.v.allFinite() || !out.w.allFinite())
		throw Error(ErrorKind::instability, "non-finite state after the step ending at t = " + std::to_string(out.t));
	return out;
}

inline RealVector grid(const Config& cfg) { return RealVector::LinSpaced(cfg.nx, 0.0, cfg.length); }

/// tanh front centered at length/2, with w on the v-nullcline of the w equation.
inline State front_initial_condition(const Config& cfg) {
	const RealVector x = grid(cfg);
	State s;
	s.v = (x.array() - 0.5 * cfg.length).tanh();
	s.w = (s.v.array() - cfg.c0) / cfg.c1;
	return s;
}

/**
 * Newton iteration for a steady state of the discretized system. The
 * discrete fixed point of the Euler scheme coincides with it, so the result
 * is an exact standing front of the simulator.
 */
inline State solve_standing_front(const State& guess, const Config& cfg, double tol = 1e-12, int max_iter = 50) {
	const Index n = cfg.nx;
	const double s = 1.0 / (cfg.dx() * cfg.dx());
	RealMatrix lap = RealMatrix::Zero(n, n);
	lap(0, 0) = -2.0 * s;
	lap(0, 1) = 2.0 * s;
	for (Index i = 1; i + 1 < n; ++i) {
		lap(i, i - 1) = s;
		lap(i, i) = -2.0 * s;
		lap(i, i + 1) = s;
	}
	lap(n - 1, n - 2) = 2.0 * s;
	lap(n - 1, n - 1) = -2.0 * s;

	RealVector u(2 * n);
	u << guess.v, guess.w;
	RealVector f = rhs(u.head(n), u.tail(n), cfg);
	for (int iter = 0; iter < max_iter && f.lpNorm<Eigen::Infinity>() > tol; ++iter) {
		RealMatrix jac = RealMatrix::Zero(2 * n, 2 * n);
		jac.topLeftCorner(n, n) = lap;
		jac.topLeftCorner(n, n).diagonal().array() += 1.0 - 3.0 * u.head(n).array().square();
		jac.topRightCorner(n, n).diagonal().setConstant(-1.0);
		jac.bottomLeftCorner(n, n).diagonal().setConstant(cfg.epsilon);
		jac.bottomRightCorner(n, n) = cfg.delta * lap;
		jac.bottomRightCorner(n, n).diagonal().array() -= cfg.epsilon * cfg.c1;
		const RealVector step = jac.partialPivLu().solve(-f);

		// Backtrack until the residual decreases.
		double scale = 1.0;
		const double f_norm = f.norm();
		RealVector trial = u + step;
		RealVector f_trial = rhs(trial.head(n), trial.tail(n), cfg);
		while (!(f_trial.norm() < f_norm) && scale > 1e-4) {
			scale *= 0.5;
			trial = u + scale * step;
			f_trial = rhs(trial.head(n), trial.tail(n), cfg);
		}
		u = trial;
		f = f_trial;
	}
	if (!(f.lpNorm<Eigen::Infinity>() <= tol))
		throw Error(ErrorKind::numeric, "standing-front Newton iteration did not converge (residual " +
											std::to_string(f.lpNorm<Eigen::Infinity>()) + ")");
	return {u.head(n), u.tail(n), guess.t};
}

/// Sum of bump_count Gaussian bumps with uniform centers and N(0, perturb_amp^2) heights.
inline RealVector random_bumps(const Config& cfg, Rng& rng) {
	const RealVector x = grid(cfg);
	const double width = cfg.bump_width * cfg.length;
	RealVector field = RealVector::Zero(cfg.nx);
	for (Index b = 0; b < cfg.bump_count; ++b) {
		const double center = cfg.length * rng.uniform();
		const double height = cfg.perturb_amp * rng.normal();
		field.array() += height * (-(x.array() - center).square() / (2.0 * width * width)).exp();
	}
	return field;
}

/**
 * The v observable over M + 1 snapshots (nx x (M+1)).
 *
 * Starts from a tanh front relaxed for burn_in time units (then Newton-polished
 * to the standing front when polish_front is set). At every snapshot index that
 * is a multiple of perturb_every, including 0, a random bump field is added to
 * v right after the snapshot is recorded.
 */
inline RealMatrix simulate_trajectory(const Config& cfg) {
	cfg.validate();
	State s = front_initial_condition(cfg);
	const auto burn_steps = static_cast<Index>(std::llround(cfg.burn_in / cfg.inner_dt));
	for (Index k = 0; k < burn_steps; ++k) s = fn_step(s, cfg);
	if (cfg.polish_front) s = solve_standing_front(s, cfg);

	Rng rng(cfg.seed);
	const Index steps = cfg.steps_per_snapshot();
	RealMatrix out(cfg.nx, cfg.n_snapshots + 1);
	for (Index n = 0; n <= cfg.n_snapshots; ++n) {
		if (n > 0)
			for (Index k = 0; k < steps; ++k) s = fn_step(s, cfg);
		out.col(n) = s.v;
		if (cfg.perturb_amp > 0.0 && n % cfg.perturb_every == 0) s.v += random_bumps(cfg, rng);
	}
	return out;
}

inline SnapshotSet generate_dataset(const Config& cfg) {
	return SnapshotSet::from_trajectory(simulate_trajectory(cfg), cfg.dt_snap);
}

} // namespace koopman::fn
