#include "ctcalign/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctcalign/error.hpp"
#include "ctcalign/serialize.hpp"
#include "ctcalign/utf8.hpp"

namespace ctcalign {

namespace fs = std::filesystem;

double Prng::exponential() { return -std::log1p(-uniform()); }

namespace {

// Fills `row` with mass (1 - noise) on `target` and flat-Dirichlet noise
// over the remaining symbols.
void fill_row(std::span<float> row, std::size_t target, double noise, Prng& rng) {
  const std::size_t cols = row.size();
  std::vector<double> values(cols, 0.0);
  values[target] = 1.0 - noise;
  if (noise > 0.0 && cols > 1) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c == target) continue;
      values[c] = rng.exponential();
      total += values[c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (c != target) values[c] = noise * values[c] / total;
    }
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  for (std::size_t c = 0; c < cols; ++c) row[c] = static_cast<float>(values[c] / sum);
}

std::vector<double> dirichlet_row(Prng& rng, std::size_t cols) {
  std::vector<double> row(cols);
  double total = 0.0;
  for (auto& v : row) {
    v = rng.exponential();
    total += v;
  }
  for (auto& v : row) v /= total;
  return row;
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.lines.empty()) throw ValidationError("synthetic letter needs at least one line");
  if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw ValidationError(fmt::format("noise {} outside [0,1)", spec.noise));
  if (spec.steps_per_char < 1) throw ValidationError("steps_per_char must be at least 1");
  if (spec.epsilon_run < 1) throw ValidationError("epsilon_run must be at least 1");
}

std::u32string synth_transcription(const SynthSpec& spec) {
  if (spec.transcription) return make_transcription(*spec.transcription).text;
  std::u32string out;
  for (const auto& line : spec.lines) {
    if (line.empty()) continue;
    if (!out.empty()) out.push_back(U' ');
    out += utf8::decode(line);
  }
  return out;
}

std::vector<std::u32string> emitted_line_texts(const SynthSpec& spec) {
  const auto text = synth_transcription(spec);
  std::vector<std::u32string> out;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < spec.lines.size(); ++k) {
    const auto line = utf8::decode(spec.lines[k]);
    if (line.empty()) {
      out.emplace_back();
      continue;
    }
    if (text.compare(cursor, line.size(), line) != 0) {
      throw ValidationError(fmt::format("line {} '{}' does not continue the transcription at character {}", k,
                                        spec.lines[k], cursor));
    }
    cursor += line.size();
    std::u32string emitted = line;
    if (cursor < text.size() && utf8::is_whitespace(text[cursor])) emitted.push_back(text[cursor++]);
    out.push_back(std::move(emitted));
  }
  if (cursor != text.size()) {
    throw ValidationError(fmt::format("transcription has {} characters not covered by any line", text.size() - cursor));
  }
  return out;
}

LetterBundle generate_posteriors(const SynthSpec& spec, const Alphabet& alphabet) {
  validate(spec);
  Prng rng(spec.seed);
  const auto emitted = emitted_line_texts(spec);
  const std::size_t cols = alphabet.size();
  std::vector<PosteriorMatrix> lines;
  for (std::size_t k = 0; k < emitted.size(); ++k) {
    PosteriorMatrix m;
    m.line_id = fmt::format("{}_l{:03}", spec.letter_id, k);
    m.cols = cols;
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < emitted[k].size(); ++i) {
      const auto symbol = alphabet.index_of(emitted[k][i]);
      if (!symbol) {
        throw ValidationError(fmt::format("character {} of line {} is not in the alphabet",
                                          utf8::describe(emitted[k][i]), k));
      }
      targets.insert(targets.end(), spec.epsilon_run, Alphabet::kEpsilon);
      targets.insert(targets.end(), spec.steps_per_char, *symbol);
    }
    targets.insert(targets.end(), spec.epsilon_run, Alphabet::kEpsilon);
    m.steps = targets.size();
    m.probs.resize(m.steps * cols);
    for (std::size_t t = 0; t < m.steps; ++t) {
      fill_row(std::span<float>(m.probs.data() + t * cols, cols), targets[t], spec.noise, rng);
    }
    lines.push_back(std::move(m));
  }
  return concatenate(std::move(lines), spec.letter_id);
}

Alphabet alphabet_for(const SynthSpec& spec) {
  std::vector<char32_t> symbols;
  auto add = [&](char32_t c) {
    if (std::find(symbols.begin(), symbols.end(), c) == symbols.end()) symbols.push_back(c);
  };
  for (char32_t c : synth_transcription(spec)) add(c);
  for (const auto& line : emitted_line_texts(spec)) {
    for (char32_t c : line) add(c);
  }
  if (symbols.empty()) symbols.push_back(U' ');
  return Alphabet(std::move(symbols));
}

Alphabet latin_alphabet() {
  std::vector<char32_t> symbols{U' '};
  for (char32_t c = U'a'; c <= U'z'; ++c) symbols.push_back(c);
  for (char32_t c = U'A'; c <= U'Z'; ++c) symbols.push_back(c);
  for (char32_t c = U'0'; c <= U'9'; ++c) symbols.push_back(c);
  for (char32_t c : std::u32string_view(U"äöüß.,;:-()?!'/")) symbols.push_back(c);
  return Alphabet(std::move(symbols));
}

SynthSpec synth_spec_from_json_text(std::string_view text) {
  try {
    const auto doc = Json::parse(text);
    SynthSpec spec;
    spec.letter_id = doc.value("letter_id", spec.letter_id);
    spec.lines = doc.at("lines").get<std::vector<std::string>>();
    if (doc.contains("transcription")) spec.transcription = doc.at("transcription").get<std::string>();
    spec.steps_per_char = doc.value("steps_per_char", spec.steps_per_char);
    spec.epsilon_run = doc.value("epsilon_run", spec.epsilon_run);
    spec.noise = doc.value("noise", spec.noise);
    spec.seed = doc.value("seed", spec.seed);
    validate(spec);
    return spec;
  } catch (const Json::exception& e) {
    throw FormatError(fmt::format("invalid synthetic spec: {}", e.what()));
  }
}

fs::path write_synthetic_letter(const SynthSpec& spec, const Alphabet& alphabet, const fs::path& out_dir) {
  const auto bundle = generate_posteriors(spec, alphabet);
  fs::create_directories(out_dir);
  save_alphabet(alphabet, out_dir / "alphabet.txt");

  Json manifest;
  manifest["letter_id"] = spec.letter_id;
  manifest["alphabet"] = "alphabet.txt";
  manifest["lines"] = Json::array();
  for (std::size_t k = 0; k < bundle.lines.size(); ++k) {
    const auto name = fmt::format("line_{:03}.ctcp", k);
    save_matrix(bundle.lines[k], out_dir / name);
    manifest["lines"].push_back({{"line_id", bundle.lines[k].line_id}, {"matrix", name}});
  }
  manifest["synth"] = {{"prng", kPrngName},
                       {"seed", spec.seed},
                       {"noise", spec.noise},
                       {"steps_per_char", spec.steps_per_char},
                       {"epsilon_run", spec.epsilon_run}};
  const auto manifest_path = out_dir / "manifest.json";
  write_file(manifest_path, dump(manifest));
  write_file(out_dir / "transcription.txt", utf8::encode(synth_transcription(spec)) + "\n");
  write_file(out_dir / "ground_truth.json", dump(to_json(LineSet{spec.letter_id, spec.lines})));
  return manifest_path;
}

double path_log_prob(const CompressedSequence& seq, const TranscriptionFsa& fsa, const std::vector<StateId>& states) {
  double total = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) total += seq.log_prob(t, fsa.state(states[t]).symbol);
  return total;
}

PathSolution brute_force_align(const CompressedSequence& seq, const TranscriptionFsa& fsa) {
  if (seq.steps < fsa.min_path_length()) throw AlignmentInfeasible(seq.steps, fsa.min_path_length());
  const auto paths = enumerate_paths(fsa, seq.steps);
  PathSolution best;
  best.log_prob = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) {
    const double score = path_log_prob(seq, fsa, p);
    if (best.states.empty() || score > best.log_prob) {
      best.log_prob = score;
      best.states = p;
    }
  }
  if (best.log_prob == -std::numeric_limits<double>::infinity()) throw NumericallyInfeasible(seq.steps - 1);
  for (std::size_t t = 0; t < best.states.size(); ++t) {
    const double lp = seq.log_prob(t, fsa.state(best.states[t]).symbol);
    best.step_log_prob.push_back(lp);
    best.per_step_prob.push_back(std::exp(lp));
  }
  return best;
}

PathSolution brute_force_align(const LetterBundle& bundle, const Transcription& transcription,
                               const Alphabet& alphabet, double theta) {
  return brute_force_align(epsilon_compress(bundle, theta), build_fsa(transcription, alphabet));
}

RandomInstance random_instance(Prng& rng, std::size_t max_chars, std::size_t max_steps, std::size_t symbols) {
  std::vector<char32_t> letters;
  for (std::size_t i = 0; i < symbols; ++i) letters.push_back(static_cast<char32_t>(U'a' + i));
  Alphabet alphabet(letters);
  for (;;) {
    Transcription tr;
    const std::size_t n = 1 + rng.below(max_chars);
    for (std::size_t i = 0; i < n; ++i) tr.text.push_back(letters[rng.below(letters.size())]);
    const auto fsa = build_fsa(tr, alphabet);
    if (fsa.min_path_length() > max_steps) continue;
    const std::size_t T = fsa.min_path_length() + rng.below(max_steps - fsa.min_path_length() + 1);
    std::vector<double> logs;
    logs.reserve(T * alphabet.size());
    for (std::size_t t = 0; t < T; ++t) {
      for (double p : dirichlet_row(rng, alphabet.size())) logs.push_back(std::log(p));
    }
    return {std::move(alphabet), std::move(tr), uncompressed_sequence(std::move(logs), letters.size() + 1)};
  }
}

PosteriorMatrix random_matrix(Prng& rng, std::size_t steps, std::size_t cols, std::string line_id) {
  PosteriorMatrix m;
  m.line_id = std::move(line_id);
  m.steps = steps;
  m.cols = cols;
  m.probs.resize(steps * cols);
  bool blank_run = false;
  for (std::size_t t = 0; t < steps; ++t) {
    if (rng.uniform() < 0.3) blank_run = !blank_run;
    auto row = std::span<float>(m.probs.data() + t * cols, cols);
    if (blank_run) {
      // Blank mass straddling the usual 0.99 threshold.
      fill_row(row, Alphabet::kEpsilon, 0.02 * rng.uniform(), rng);
    } else {
      const auto values = dirichlet_row(rng, cols);
      for (std::size_t c = 0; c < cols; ++c) row[c] = static_cast<float>(values[c]);
    }
  }
  return m;
}

}  // namespace ctcalign
