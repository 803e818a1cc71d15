#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace koopman {

/// Worker count: hardware concurrency, capped by KOOPMAN_THREADS when set.
inline unsigned thread_count() {
	unsigned n = std::max(1u, std::thread::hardware_concurrency());
	if (const char* env = std::getenv("KOOPMAN_THREADS")) {
		try {
			long cap = std::stol(env);
			if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
		} catch (...) {
		}
	}
	return n;
}

/**
 * Runs body(begin, end) over [0, n) in chunks of fixed size `chunk`.
 *
 * Chunk boundaries do not depend on the worker count, so any computation that
 * writes disjoint outputs per chunk is bitwise identical for every thread count.
 */
template <class Body>
void parallel_chunks(std::ptrdiff_t n, std::ptrdiff_t chunk, Body&& body) {
	if (n <= 0) return;
	chunk = std::max<std::ptrdiff_t>(1, chunk);
	const std::ptrdiff_t n_chunks = (n + chunk - 1) / chunk;
	const auto workers = static_cast<std::ptrdiff_t>(std::min<std::ptrdiff_t>(thread_count(), n_chunks));
	auto run = [&](std::ptrdiff_t c) { body(c * chunk, std::min(n, (c + 1) * chunk)); };
	if (workers <= 1) {
		for (std::ptrdiff_t c = 0; c < n_chunks; ++c) run(c);
		return;
	}
	std::vector<std::thread> pool;
	std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
	for (std::ptrdiff_t w = 0; w < workers; ++w) {
		pool.emplace_back([&, w] {
			try {
				for (std::ptrdiff_t c = w; c < n_chunks; c += workers) run(c);
			} catch (...) {
				errors[static_cast<std::size_t>(w)] = std::current_exception();
			}
		});
	}
	for (auto& t : pool) t.join();
	for (auto& e : errors)
		if (e) std::rethrow_exception(e);
}

} // namespace koopman
