#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "vmcp/label_set.hpp"

namespace vmcp {

/// Writes the stream CSV: header `p_0..p_{K-1},y_0..y_{K-1}`, probabilities
/// as fixed-point decimals with 9 fractional digits, labels as 0/1.
void write_stream_csv(std::ostream& out, std::span<const Sample> samples);

/// Parses the stream CSV. Throws DataError carrying the offending line.
std::vector<Sample> read_stream_csv(std::istream& in);

}  // namespace vmcp
