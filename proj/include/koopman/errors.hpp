#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace koopman {

enum class ErrorKind {
	argument,          // invalid parameter or shape mismatch
	format,            // malformed input file
	insufficient_data, // not enough snapshots
	degenerate,        // data or matrix carries no usable information
	numeric,           // non-finite values, failed decomposition
	instability,       // time integrator blew up
	unsupported,       // operation not defined for this model
	budget,            // memory guard refusal
	io                 // filesystem failure
};

inline const char* to_string(ErrorKind kind) {
	switch (kind) {
		case ErrorKind::argument: return "argument error";
		case ErrorKind::format: return "format error";
		case ErrorKind::insufficient_data: return "insufficient data";
		case ErrorKind::degenerate: return "degenerate data";
		case ErrorKind::numeric: return "numeric error";
		case ErrorKind::instability: return "instability";
		case ErrorKind::unsupported: return "unsupported";
		case ErrorKind::budget: return "memory budget exceeded";
		case ErrorKind::io: return "i/o error";
	}
	return "error";
}

class Error : public std::runtime_error {
public:
	Error(ErrorKind kind, const std::string& what)
		: std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

	ErrorKind kind() const noexcept { return kind_; }

private:
	ErrorKind kind_;
};

/// Malformed file; carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
	FormatError(const std::string& what, std::uint64_t offset)
		: Error(ErrorKind::format, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

	std::uint64_t offset() const noexcept { return offset_; }

private:
	std::uint64_t offset_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
	if (!condition) throw Error(kind, what);
}

} // namespace koopman
