#include "ctcalign/posteriors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ctcalign/error.hpp"
#include "ctcalign/utf8.hpp"

namespace ctcalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'T', 'C', 'P'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::size_t kHeaderSize = 16;

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
  return value;
}

template <typename T>
void write_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

// ---------------------------------------------------------------- Alphabet

Alphabet::Alphabet(std::vector<char32_t> symbols) {
  symbols_.reserve(symbols.size() + 1);
  symbols_.push_back(0);
  for (char32_t c : symbols) {
    if (!index_.emplace(c, symbols_.size()).second) {
      throw FormatError(fmt::format("duplicate alphabet symbol {}", utf8::describe(c)));
    }
    symbols_.push_back(c);
  }
  if (symbols_.size() < 2) throw FormatError("alphabet needs at least one symbol besides <eps>");
}

std::optional<std::size_t> Alphabet::index_of(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Alphabet::to_text() const {
  std::string out{kEpsilonToken};
  out += '\n';
  for (std::size_t i = 1; i < symbols_.size(); ++i) {
    out += symbols_[i] == U' ' ? std::string{kSpaceToken} : utf8::encode(symbols_[i]);
    out += '\n';
  }
  return out;
}

Alphabet parse_alphabet(std::string_view text) {
  std::vector<char32_t> symbols;
  bool seen_eps = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim_cr(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) {
      throw FormatError("alphabet file must not start with a byte order mark");
    }
    if (line.empty()) {
      // A trailing newline at end of file produces one empty line.
      if (text.empty()) break;
      throw FormatError(fmt::format("alphabet line {} is empty", line_no));
    }
    if (line == Alphabet::kEpsilonToken) {
      if (line_no != 1) throw FormatError(fmt::format("<eps> must be the first line, found on line {}", line_no));
      seen_eps = true;
      continue;
    }
    if (line_no == 1) throw FormatError("alphabet file must start with <eps>");
    if (line == Alphabet::kSpaceToken) {
      symbols.push_back(U' ');
      continue;
    }
    const auto decoded = utf8::decode(line);
    if (decoded.size() != 1) {
      throw FormatError(fmt::format("alphabet line {} must hold exactly one symbol, got '{}'", line_no, line));
    }
    symbols.push_back(decoded.front());
  }
  if (!seen_eps) throw FormatError("alphabet file is missing the <eps> line");
  return Alphabet(std::move(symbols));
}

Alphabet load_alphabet(const fs::path& path) {
  try {
    return parse_alphabet(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_alphabet(const Alphabet& alphabet, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  out << alphabet.to_text();
}

// ---------------------------------------------------------------- matrices

void validate_matrix(const PosteriorMatrix& m) {
  if (m.probs.size() != m.steps * m.cols) throw ValidationError("matrix storage does not match its dimensions");
  for (std::size_t t = 0; t < m.steps; ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
      const float p = m.at(t, c);
      if (!std::isfinite(p)) throw ValidationError(fmt::format("non-finite value at row {}, col {}", t, c));
      if (p < 0.0f || p > 1.0f) throw ValidationError(fmt::format("value {} outside [0,1] at row {}, col {}", p, t, c));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError(fmt::format("row {} sums to {} (tolerance {})", t, sum, kRowSumTolerance));
    }
  }
}

PosteriorMatrix decode_matrix(std::span<const std::uint8_t> bytes, std::string line_id) {
  if (bytes.size() < kHeaderSize) throw FormatError("matrix file shorter than its header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw FormatError("bad magic, expected CTCP");
  const auto version = read_le<std::uint16_t>(bytes, 4);
  if (version != kFormatVersion) throw FormatError(fmt::format("unsupported matrix format version {}", version));
  if (read_le<std::uint16_t>(bytes, 6) != 0) throw FormatError("reserved header field is not zero");
  PosteriorMatrix m;
  m.line_id = std::move(line_id);
  m.steps = read_le<std::uint32_t>(bytes, 8);
  m.cols = read_le<std::uint32_t>(bytes, 12);
  const std::size_t count = m.steps * m.cols;
  if (bytes.size() != kHeaderSize + 4 * count) {
    throw FormatError(fmt::format("matrix payload is {} bytes, header declares {}x{}", bytes.size() - kHeaderSize,
                                  m.steps, m.cols));
  }
  m.probs.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.probs[i] = std::bit_cast<float>(read_le<std::uint32_t>(bytes, kHeaderSize + 4 * i));
  }
  return m;
}

std::vector<std::uint8_t> encode_matrix(const PosteriorMatrix& m) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderSize + 4 * m.probs.size());
  write_le<std::uint16_t>(out, kFormatVersion);
  write_le<std::uint16_t>(out, 0);
  write_le(out, static_cast<std::uint32_t>(m.steps));
  write_le(out, static_cast<std::uint32_t>(m.cols));
  for (float p : m.probs) write_le(out, std::bit_cast<std::uint32_t>(p));
  return out;
}

PosteriorMatrix load_matrix(const fs::path& path, const Alphabet& alphabet, std::string line_id) {
  try {
    auto m = decode_matrix(read_bytes(path), std::move(line_id));
    if (m.cols != alphabet.size()) {
      throw ValidationError(fmt::format("matrix has {} columns, alphabet has {} symbols", m.cols, alphabet.size()));
    }
    validate_matrix(m);
    return m;
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_matrix(const PosteriorMatrix& matrix, const fs::path& path) {
  const auto bytes = encode_matrix(matrix);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------- letters

LetterBundle concatenate(std::vector<PosteriorMatrix> lines, std::string letter_id) {
  if (lines.empty()) throw ValidationError("cannot concatenate an empty line list");
  LetterBundle bundle;
  bundle.letter_id = std::move(letter_id);
  const std::size_t cols = lines.front().cols;
  std::size_t offset = 0;
  for (const auto& line : lines) {
    if (line.cols != cols) {
      throw ValidationError(fmt::format("line '{}' has {} columns, expected {}", line.line_id, line.cols, cols));
    }
    if (line.steps == 0) throw ValidationError(fmt::format("line '{}' has no time steps", line.line_id));
    offset += line.steps;
    bundle.boundaries.push_back(offset);
  }
  bundle.lines = std::move(lines);
  return bundle;
}

LetterManifest load_manifest(const fs::path& path) {
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    const auto doc = json::parse(read_text(path));
    LetterManifest m;
    m.letter_id = doc.at("letter_id").get<std::string>();
    m.alphabet = resolve(doc.at("alphabet").get<std::string>());
    for (const auto& entry : doc.at("lines")) {
      m.lines.push_back({entry.at("line_id").get<std::string>(), resolve(entry.at("matrix").get<std::string>())});
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: invalid letter manifest: {}", path.string(), e.what()));
  }
}

void save_manifest(const LetterManifest& manifest, const fs::path& path) {
  json doc;
  doc["letter_id"] = manifest.letter_id;
  doc["alphabet"] = manifest.alphabet.generic_string();
  doc["lines"] = json::array();
  for (const auto& line : manifest.lines) {
    doc["lines"].push_back({{"line_id", line.line_id}, {"matrix", line.matrix.generic_string()}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
}

LoadedLetter load_letter(const fs::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  auto alphabet = load_alphabet(manifest.alphabet);
  std::vector<PosteriorMatrix> lines;
  lines.reserve(manifest.lines.size());
  for (const auto& ref : manifest.lines) lines.push_back(load_matrix(ref.matrix, alphabet, ref.line_id));
  auto bundle = concatenate(std::move(lines), manifest.letter_id);
  return {std::move(alphabet), std::move(bundle)};
}

// ---------------------------------------------------------------- compression

StepSpan CompressedSequence::line_span(std::size_t k) const {
  const auto first = std::lower_bound(line_of_step.begin(), line_of_step.end(), k);
  const auto last = std::upper_bound(first, line_of_step.end(), k);
  return {static_cast<std::size_t>(first - line_of_step.begin()), static_cast<std::size_t>(last - line_of_step.begin())};
}

CompressedSequence epsilon_compress(const LetterBundle& bundle, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ValidationError(fmt::format("theta {} outside (0,1)", theta));
  CompressedSequence out;
  out.cols = bundle.cols();
  out.raw_steps = bundle.total_steps();
  out.log_probs.reserve(out.raw_steps * out.cols);

  std::size_t offset = 0;
  for (std::size_t k = 0; k < bundle.lines.size(); ++k) {
    const auto& line = bundle.lines[k];
    std::size_t t = 0;
    while (t < line.steps) {
      std::size_t end = t + 1;
      if (line.at(t, Alphabet::kEpsilon) > theta) {
        while (end < line.steps && line.at(end, Alphabet::kEpsilon) > theta) ++end;
      }
      const std::size_t row0 = out.log_probs.size();
      out.log_probs.resize(row0 + out.cols, 0.0);
      for (std::size_t j = t; j < end; ++j) {
        for (std::size_t c = 0; c < out.cols; ++c) out.log_probs[row0 + c] += std::log(static_cast<double>(line.at(j, c)));
      }
      out.origin_spans.push_back({offset + t, offset + end});
      out.line_of_step.push_back(k);
      t = end;
    }
    offset += line.steps;
  }
  out.steps = out.origin_spans.size();
  out.compression_ratio = out.steps == 0 ? 1.0 : static_cast<double>(out.raw_steps) / static_cast<double>(out.steps);
  return out;
}

CompressedSequence uncompressed_sequence(std::vector<double> log_probs, std::size_t cols,
                                         std::vector<std::size_t> line_of_step) {
  CompressedSequence out;
  out.cols = cols;
  out.steps = cols == 0 ? 0 : log_probs.size() / cols;
  out.raw_steps = out.steps;
  out.log_probs = std::move(log_probs);
  if (line_of_step.empty()) line_of_step.assign(out.steps, 0);
  if (line_of_step.size() != out.steps) throw ValidationError("line_of_step length does not match step count");
  out.line_of_step = std::move(line_of_step);
  for (std::size_t t = 0; t < out.steps; ++t) out.origin_spans.push_back({t, t + 1});
  return out;
}

CompressionStats compression_stats(const LetterBundle& bundle, const CompressedSequence& compressed) {
  CompressionStats s;
  s.raw_letter_steps = bundle.total_steps();
  s.compressed_letter_steps = compressed.steps;
  s.avg_line_steps = bundle.lines.empty() ? 0.0
                                          : static_cast<double>(s.raw_letter_steps) /
                                                static_cast<double>(bundle.lines.size());
  s.ratio = compressed.compression_ratio;
  return s;
}

}  // namespace ctcalign
