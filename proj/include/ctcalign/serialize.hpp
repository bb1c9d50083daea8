#pragma once

// JSON encodings of alignment outputs, line sets and metric reports.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ctcalign/aligner.hpp"
#include "ctcalign/metrics.hpp"

namespace ctcalign {

// Insertion-ordered so output fields follow the documented layout.
using Json = nlohmann::ordered_json;

Json to_json(const AlignmentResult& result);
AlignmentResult alignment_from_json(const Json& doc);

/// Two-space indented JSON followed by a newline.
std::string dump(const Json& doc);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

AlignmentResult load_alignment(const std::filesystem::path& path);

/// Accepts a single object or an array. Each object is either
/// {letter_id, lines: [string]} or an alignment output whose lines carry "text".
std::vector<LineSet> line_sets_from_json(const Json& doc);
std::vector<LineSet> load_line_sets(const std::filesystem::path& path);
LineSet to_line_set(const AlignmentResult& result);
Json to_json(const LineSet& set);

Json to_json(const MetricsReport& report);

/// Expands shell wildcards; a pattern without wildcards is returned as is.
/// Results are sorted.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace ctcalign
