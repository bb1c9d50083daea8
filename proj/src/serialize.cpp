#include "ctcalign/serialize.hpp"

#include <fmt/format.h>
#include <glob.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ctcalign/error.hpp"

namespace ctcalign {

using json = Json;
namespace fs = std::filesystem;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string dump(const json& doc) { return doc.dump(2) + '\n'; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw FormatError(fmt::format("failed writing {}", path.string()));
}

json to_json(const AlignmentResult& r) {
  json doc;
  doc["letter_id"] = r.letter_id;
  doc["total_log_prob"] = r.total_log_prob;
  doc["runtime_seconds"] = r.runtime_seconds;
  doc["lines"] = json::array();
  for (const auto& line : r.lines) {
    json l;
    l["line_id"] = line.line_id;
    l["text"] = line.text;
    l["start_step"] = line.start_step;
    l["end_step"] = line.end_step;
    l["gamma"] = line.gamma;
    l["gamma6"] = line.gamma6;
    doc["lines"].push_back(std::move(l));
  }
  return doc;
}

AlignmentResult alignment_from_json(const json& doc) {
  try {
    AlignmentResult r;
    r.letter_id = doc.at("letter_id").get<std::string>();
    r.total_log_prob = doc.value("total_log_prob", 0.0);
    r.runtime_seconds = doc.value("runtime_seconds", 0.0);
    for (const auto& l : doc.at("lines")) {
      AlignedLine line;
      line.line_id = l.at("line_id").get<std::string>();
      line.text = l.at("text").get<std::string>();
      line.start_step = l.value("start_step", std::size_t{0});
      line.end_step = l.value("end_step", std::size_t{0});
      line.gamma = l.at("gamma").get<double>();
      line.gamma6 = l.at("gamma6").get<double>();
      r.lines.push_back(std::move(line));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("invalid alignment record: {}", e.what()));
  }
}

AlignmentResult load_alignment(const fs::path& path) {
  try {
    return alignment_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<LineSet> line_sets_from_json(const json& doc) {
  std::vector<LineSet> out;
  auto one = [&](const json& obj) {
    LineSet set;
    set.letter_id = obj.at("letter_id").get<std::string>();
    for (const auto& l : obj.at("lines")) {
      set.lines.push_back(l.is_string() ? l.get<std::string>() : l.at("text").get<std::string>());
    }
    out.push_back(std::move(set));
  };
  try {
    if (doc.is_array()) {
      for (const auto& obj : doc) one(obj);
    } else {
      one(doc);
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("invalid line set: {}", e.what()));
  }
  return out;
}

std::vector<LineSet> load_line_sets(const fs::path& path) {
  try {
    return line_sets_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

LineSet to_line_set(const AlignmentResult& result) {
  LineSet set{result.letter_id, {}};
  for (const auto& line : result.lines) set.lines.push_back(line.text);
  return set;
}

json to_json(const LineSet& set) { return {{"letter_id", set.letter_id}, {"lines", set.lines}}; }

json to_json(const MetricsReport& r) {
  json doc;
  doc["line_accuracy"] = optional_number(r.line_accuracy);
  doc["cer"] = optional_number(r.cer);
  doc["wer"] = optional_number(r.wer);
  doc["cer_n"] = optional_number(r.cer_n);
  doc["n"] = r.n;
  doc["counts"] = {{"gt_lines", r.counts.gt_lines},       {"matched_lines", r.counts.matched_lines},
                   {"edit_ops", r.counts.edit_ops},       {"gt_chars", r.counts.gt_chars},
                   {"gt_words", r.counts.gt_words},       {"word_edit_ops", r.counts.word_edit_ops},
                   {"boundary_edit_ops", r.counts.boundary_edit_ops},
                   {"boundary_chars", r.counts.boundary_chars}};
  return doc;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  if (pattern.find_first_of("*?[") == std::string::npos) return {fs::path(pattern)};
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  ::globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw FormatError(fmt::format("cannot expand '{}'", pattern));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ctcalign
