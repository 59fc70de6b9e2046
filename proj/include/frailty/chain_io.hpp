#pragma once

#include "frailty/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace frailty {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::uint64_t digest);
std::string file_digest(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

enum class LoglikFormat { csv, binary };
LoglikFormat parse_loglik_format(const std::string& text);

/// Writes one delimited file per parameter block plus chain.json:
///   gamma.csv, frailties.csv, hyper.csv (theta, c), forest.csv (one row per
///   draw and node: path, level, coefficients), loglik.csv and the
///   per-observation matrix as record_loglik.csv or record_loglik.bin.
/// Returns the file names written, in a fixed order.
std::vector<std::string> write_chain(const PosteriorChain& chain, const std::filesystem::path& dir,
                                     LoglikFormat format = LoglikFormat::csv);

/// Inverse of write_chain. The design-expansion hook is not persisted.
PosteriorChain read_chain(const std::filesystem::path& dir);

/// Stacks the draws of several chains of the same model.
PosteriorChain concatenate_chains(const std::vector<PosteriorChain>& chains);

}  // namespace frailty
