#include "vmcp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "vmcp/errors.hpp"

namespace vmcp {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void write_stream_csv(std::ostream& out, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("write_stream_csv: no samples");
  const int num_classes = samples.front().num_classes();
  for (int k = 0; k < num_classes; ++k) out << (k ? "," : "") << "p_" << k;
  for (int k = 0; k < num_classes; ++k) out << ",y_" << k;
  out << '\n';
  char buf[32];
  for (const Sample& s : samples) {
    if (s.num_classes() != num_classes) throw std::invalid_argument("write_stream_csv: inconsistent class count");
    for (int k = 0; k < num_classes; ++k) {
      std::snprintf(buf, sizeof buf, "%.9f", s.probs[static_cast<std::size_t>(k)]);
      if (k) out << ',';
      out << buf;
    }
    for (int k = 0; k < num_classes; ++k) out << ',' << (s.labels.contains(k) ? '1' : '0');
    out << '\n';
  }
}

std::vector<Sample> read_stream_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("empty stream file", 1);
  const auto header = split_commas(trim(line));
  if (header.size() % 2 != 0 || header.empty()) throw DataError("header must list p_k then y_k columns", 1);
  const int num_classes = static_cast<int>(header.size() / 2);
  if (num_classes > kMaxClasses) throw DataError("more than 64 classes", 1);
  for (int k = 0; k < num_classes; ++k) {
    if (trim(header[static_cast<std::size_t>(k)]) != "p_" + std::to_string(k) ||
        trim(header[static_cast<std::size_t>(num_classes + k)]) != "y_" + std::to_string(k))
      throw DataError("unexpected header column near class " + std::to_string(k), 1);
  }

  std::vector<Sample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split_commas(row);
    if (fields.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                      line_no);
    Sample s;
    s.probs.resize(static_cast<std::size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) {
      const std::string_view f = trim(fields[static_cast<std::size_t>(k)]);
      double p = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), p);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(p) || p < 0.0 || p > 1.0)
        throw DataError("bad probability '" + std::string(f) + "' for class " + std::to_string(k), line_no);
      s.probs[static_cast<std::size_t>(k)] = p;
    }
    for (int k = 0; k < num_classes; ++k) {
      const std::string_view f = trim(fields[static_cast<std::size_t>(num_classes + k)]);
      if (f == "1") {
        s.labels = s.labels.with(k);
      } else if (f != "0") {
        throw DataError("label for class " + std::to_string(k) + " must be 0 or 1", line_no);
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace vmcp
