#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trp/dataset.hpp"
#include "trp/gibbs.hpp"

namespace trp {

/// Strict CSV reader: header row whose first column is `y`, remaining
/// columns covariates, decimal-dot numerals only. Throws ParseError naming
/// the offending row and column (1-based, header is row 1).
Dataset load_dataset(const std::string& path);

/// Writes the matching CSV with %.17g values so reloading reproduces every
/// double bit for bit.
void save_dataset(const std::string& path, const Dataset& dataset);

struct Manifest {
  std::string target;
  std::vector<std::string> sources;
  bool standardize = false;
  std::uint64_t seed = 0;
};

/// Reads manifest JSON {"target": str, "sources": [str], "standardize":
/// bool, "seed": int}; relative paths resolve against the manifest's
/// directory.
Manifest load_manifest(const std::string& path);

/// Loads target and sources per the manifest. When standardize is set,
/// covariate columns are z-scored with moments computed on the target and
/// applied everywhere; near-constant columns are left untouched.
TransferProblem load_problem(const Manifest& manifest);

/// Draws CSV (header derived from the layout, one row per retained draw) and
/// a JSON sidecar with the config echo, layout, acceptance and swap
/// statistics. Neither carries timestamps, so outputs are reproducible.
void save_draws(const std::string& csv_path, const std::string& meta_path,
                const PosteriorDraws& draws);

}  // namespace trp
