#pragma once

#include "netlds/ensemble.hpp"
#include "netlds/estimators.hpp"

#include <filesystem>
#include <string>

namespace netlds::io {

/// Container format version written into every file. Readers reject other
/// versions and foreign "format" tags.
inline constexpr int kFormatVersion = 1;

// All containers are JSON objects with a "format" tag, a "version", the
// explicit (m, d[, T]) header, and matrices stored row-major as flat arrays:
//
//   netlds.ensemble      {m, d, meta: {beta?, normalized, s_m?}, mats: [[d*d]..m]}
//   netlds.trajectories  {m, d, T, seed, states: [[d*(T+1)]..m], noise?: [...]}
//   netlds.estimates     {m, d, mats: [[d*d]..m], diagnostics: {...}}
//
// Doubles are written with round-trip precision.

std::string ensemble_to_json(const SystemEnsemble& e);
SystemEnsemble ensemble_from_json(const std::string& text);

std::string bundle_to_json(const TrajectoryBundle& b, bool include_noise = true);
TrajectoryBundle bundle_from_json(const std::string& text);

std::string estimates_to_json(const EstimateSet& est);
EstimateSet estimates_from_json(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

inline SystemEnsemble load_ensemble(const std::filesystem::path& p) { return ensemble_from_json(read_file(p)); }
inline TrajectoryBundle load_bundle(const std::filesystem::path& p) { return bundle_from_json(read_file(p)); }
inline void save_ensemble(const std::filesystem::path& p, const SystemEnsemble& e) { write_file(p, ensemble_to_json(e)); }
inline void save_bundle(const std::filesystem::path& p, const TrajectoryBundle& b) { write_file(p, bundle_to_json(b)); }

}  // namespace netlds::io
