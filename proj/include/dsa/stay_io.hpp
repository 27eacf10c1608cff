#pragma once

#include <string>
#include <vector>

#include "dsa/core.hpp"

namespace dsa {

// Shortest decimal form that parses back to the same double ("1e-06"-style
// exponents included). Used for every number we persist, so rewriting a file
// we produced is byte-identical.
std::string format_double(double value);

// Stay CSV: header `stay_id,step,feat_0,...,feat_{d-1},event`, rows sorted by
// (stay_id, step), steps 0-based and contiguous per stay.
void write_stays_csv(const std::string& path, const std::vector<Stay>& stays);

// Parses and validates; throws std::runtime_error on malformed input (missing
// header, step gaps or duplicates, ragged rows) and std::invalid_argument on
// stay-invariant violations.
std::vector<Stay> read_stays_csv(const std::string& path);

// Ground-truth CSV: `stay_id,step,onset_prob`, aligned with the stays.
void write_ground_truth_csv(const std::string& path, const std::vector<Stay>& stays,
                            const std::vector<std::vector<double>>& onset_prob);

}  // namespace dsa
