#include "ctcalign/filter.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "ctcalign/error.hpp"

namespace ctcalign {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ConfidenceMeasure measure) {
  return measure == ConfidenceMeasure::kGamma ? "gamma" : "gamma6";
}

ConfidenceMeasure parse_measure(std::string_view name) {
  if (name == "gamma6") return ConfidenceMeasure::kGamma6;
  if (name == "gamma") return ConfidenceMeasure::kGamma;
  throw ValidationError(fmt::format("unknown confidence measure '{}'", name));
}

namespace {

void check_spec(const FilterSpec& spec) {
  if (!(spec.threshold >= 0.0 && spec.threshold <= 1.0)) {
    throw ValidationError(fmt::format("threshold {} outside [0,1]", spec.threshold));
  }
}

double confidence(const AlignedLine& line, ConfidenceMeasure measure) {
  return measure == ConfidenceMeasure::kGamma ? line.gamma : line.gamma6;
}

double parse_double(std::string_view s) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError(fmt::format("not a number: '{}'", s));
  return value;
}

}  // namespace

bool keeps(const AlignedLine& line, const FilterSpec& spec) {
  return !line.text.empty() && confidence(line, spec.measure) > spec.threshold;
}

TrainingManifest filter_alignments(std::span<const AlignmentResult> results, const FilterSpec& spec,
                                   std::vector<SourceRef> sources) {
  check_spec(spec);
  TrainingManifest m;
  m.spec = spec;
  m.sources = std::move(sources);
  for (const auto& result : results) {
    for (const auto& line : result.lines) {
      if (keeps(line, spec)) m.entries.push_back({result.letter_id, line.line_id, line.text, line.gamma, line.gamma6});
    }
  }
  return m;
}

std::vector<SweepRow> threshold_sweep(std::span<const AlignmentResult> results, std::span<const double> thresholds,
                                      ConfidenceMeasure measure) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw ValidationError("sweep thresholds must be ascending");
  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (double threshold : thresholds) {
    const FilterSpec spec{threshold, measure};
    check_spec(spec);
    SweepRow row{threshold, 0};
    for (const auto& result : results) {
      row.kept += static_cast<std::size_t>(
          std::count_if(result.lines.begin(), result.lines.end(), [&](const auto& l) { return keeps(l, spec); }));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> parse_sweep(std::string_view range) {
  const auto a = range.find(':');
  const auto b = a == std::string_view::npos ? a : range.find(':', a + 1);
  if (b == std::string_view::npos) throw ValidationError(fmt::format("sweep '{}' is not start:stop:step", range));
  const double start = parse_double(range.substr(0, a));
  const double stop = parse_double(range.substr(a + 1, b - a - 1));
  const double step = parse_double(range.substr(b + 1));
  if (!(step > 0.0) || stop < start) throw ValidationError(fmt::format("sweep '{}' has an empty or reversed range", range));
  const auto count = static_cast<std::size_t>(std::ceil((stop - start) / step - 1e-9));
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

ManifestDiff diff_manifests(const TrainingManifest& before, const TrainingManifest& after) {
  std::map<EntryKey, const ManifestEntry*> old_entries;
  for (const auto& e : before.entries) old_entries.emplace(EntryKey{e.letter_id, e.line_id}, &e);
  ManifestDiff diff;
  std::map<EntryKey, bool> seen;
  for (const auto& e : after.entries) {
    EntryKey key{e.letter_id, e.line_id};
    auto it = old_entries.find(key);
    if (it == old_entries.end()) {
      diff.added.push_back(key);
    } else if (it->second->text != e.text) {
      diff.modified.push_back(key);
    }
    seen[key] = true;
  }
  for (const auto& e : before.entries) {
    EntryKey key{e.letter_id, e.line_id};
    if (!seen.contains(key)) diff.removed.push_back(std::move(key));
  }
  return diff;
}

IterationOutcome iteration_step(const TrainingManifest& prior, std::span<const AlignmentResult> new_results,
                                const FilterSpec& spec, std::vector<SourceRef> sources) {
  IterationOutcome out;
  out.manifest = filter_alignments(new_results, spec, std::move(sources));
  out.manifest.iteration = prior.iteration + 1;
  out.diff = diff_manifests(prior, out.manifest);
  return out;
}

std::string manifest_to_jsonl(const TrainingManifest& m) {
  ojson header;
  header["type"] = "header";
  header["iteration"] = m.iteration;
  header["filter"] = {{"measure", to_string(m.spec.measure)}, {"threshold", m.spec.threshold}};
  header["sources"] = ojson::array();
  for (const auto& s : m.sources) header["sources"].push_back({{"path", s.path}, {"sha256", s.sha256}});
  std::string out = header.dump() + '\n';
  for (const auto& e : m.entries) {
    ojson line;
    line["letter_id"] = e.letter_id;
    line["line_id"] = e.line_id;
    line["text"] = e.text;
    line["gamma"] = e.gamma;
    line["gamma6"] = e.gamma6;
    out += line.dump() + '\n';
  }
  return out;
}

TrainingManifest manifest_from_jsonl(std::string_view text) {
  TrainingManifest m;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (!text.empty()) {
      const auto nl = text.find('\n');
      const auto line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++line_no;
      if (line.empty()) continue;
      const auto doc = ojson::parse(line);
      if (!have_header) {
        if (doc.value("type", "") != "header") throw FormatError("first manifest record must be the header");
        m.iteration = doc.at("iteration").get<std::size_t>();
        m.spec.measure = parse_measure(doc.at("filter").at("measure").get<std::string>());
        m.spec.threshold = doc.at("filter").at("threshold").get<double>();
        for (const auto& s : doc.at("sources")) {
          m.sources.push_back({s.at("path").get<std::string>(), s.at("sha256").get<std::string>()});
        }
        have_header = true;
        continue;
      }
      m.entries.push_back({doc.at("letter_id").get<std::string>(), doc.at("line_id").get<std::string>(),
                           doc.at("text").get<std::string>(), doc.at("gamma").get<double>(),
                           doc.at("gamma6").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest record {}: {}", line_no, e.what()));
  }
  if (!have_header) throw FormatError("manifest has no header record");
  return m;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

}  // namespace ctcalign
