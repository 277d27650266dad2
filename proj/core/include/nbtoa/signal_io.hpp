#pragma once

#include <filesystem>
#include <string>

#include "nbtoa/signal.hpp"

namespace nbtoa::io {

// Binary signal format: `<stem>.c128` holds little-endian interleaved float64 (re, im) pairs,
// `<stem>.json` holds {"rate_hz", "t0_s", "n_samples"}.

/// Writes `<stem>.c128` and `<stem>.json`; `path` may name either file or the bare stem.
void write_signal(const std::filesystem::path& path, const Signal& s);
[[nodiscard]] Signal read_signal(const std::filesystem::path& path);

/// Debug CSV with header `index,re,im`.
void write_signal_csv(const std::filesystem::path& path, const Signal& s);

/// Hex SHA-256 over the sample bytes (little-endian float64 pairs), rate and t0.
[[nodiscard]] std::string signal_digest(const Signal& s);

} // namespace nbtoa::io
