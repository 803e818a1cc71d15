#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace koopman {

inline double median(std::vector<double> v) {
	require(!v.empty(), ErrorKind::argument, "median of an empty sample");
	std::sort(v.begin(), v.end());
	const std::size_t n = v.size();
	return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
	require(x.size() == y.size() && x.size() >= 2, ErrorKind::argument, "slope fit needs matching samples (>= 2)");
	const double n = static_cast<double>(x.size());
	double mx = 0.0, my = 0.0;
	for (std::size_t i = 0; i < x.size(); ++i) {
		require(x[i] > 0.0 && y[i] > 0.0, ErrorKind::degenerate, "log-log fit needs positive values");
		mx += std::log(x[i]);
		my += std::log(y[i]);
	}
	mx /= n;
	my /= n;
	double sxx = 0.0, sxy = 0.0;
	for (std::size_t i = 0; i < x.size(); ++i) {
		const double dx = std::log(x[i]) - mx;
		sxx += dx * dx;
		sxy += dx * (std::log(y[i]) - my);
	}
	require(sxx > 0.0, ErrorKind::degenerate, "axis values do not vary");
	return sxy / sxx;
}

} // namespace koopman
