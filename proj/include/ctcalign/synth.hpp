#pragma once

// Synthetic CTC-like posteriors and brute-force oracles for verifying the
// pipeline without a trained recognizer.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctcalign/aligner.hpp"
#include "ctcalign/fsa.hpp"
#include "ctcalign/posteriors.hpp"

namespace ctcalign {

/// Generator recorded in output metadata. Doubles are drawn as the top 53
/// bits of each 64-bit output, so streams match across standard libraries.
inline constexpr std::string_view kPrngName = "mt19937_64";

class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n); n > 0.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double exponential();

 private:
  std::mt19937_64 engine_;
};

struct SynthSpec {
  std::string letter_id = "synthetic";
  std::vector<std::string> lines;  // UTF-8 target line texts, "" for a gap
  /// Full letter text; defaults to the non-empty lines joined by one space.
  std::optional<std::string> transcription;
  std::size_t steps_per_char = 1;
  std::size_t epsilon_run = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

std::u32string synth_transcription(const SynthSpec& spec);

/// Characters each line image "shows": the line text plus the whitespace that
/// separates it from the next non-empty line.
std::vector<std::u32string> emitted_line_texts(const SynthSpec& spec);

/// Per emitted character: epsilon_run blank rows then steps_per_char rows
/// peaked on the character; a trailing blank run closes every line. Each row
/// puts 1 - noise on its target and spreads noise over the other symbols
/// with flat-Dirichlet weights.
LetterBundle generate_posteriors(const SynthSpec& spec, const Alphabet& alphabet);

/// Every symbol the synthetic letter uses, in order of first use.
Alphabet alphabet_for(const SynthSpec& spec);

/// 79 symbols: epsilon, space, Latin letters, digits, umlauts and punctuation.
Alphabet latin_alphabet();

SynthSpec synth_spec_from_json_text(std::string_view text);

/// Writes alphabet.txt, line_NNN.ctcp, manifest.json, transcription.txt and
/// ground_truth.json into `out_dir`. Returns the manifest path.
std::filesystem::path write_synthetic_letter(const SynthSpec& spec, const Alphabet& alphabet,
                                             const std::filesystem::path& out_dir);

/// Exhaustive maximum over every accepted path; the first maximum in
/// enumeration order wins.
PathSolution brute_force_align(const CompressedSequence& sequence, const TranscriptionFsa& fsa);
PathSolution brute_force_align(const LetterBundle& bundle, const Transcription& transcription,
                               const Alphabet& alphabet, double theta = kDefaultTheta);

/// Sum of path log probabilities, accumulated in time order.
double path_log_prob(const CompressedSequence& sequence, const TranscriptionFsa& fsa,
                     const std::vector<StateId>& states);

/// Random dense instance: `symbols` non-blank symbols, text of length in
/// [1, max_chars], T in [min feasible, max_steps], Dirichlet rows.
struct RandomInstance {
  Alphabet alphabet;
  Transcription transcription;
  CompressedSequence sequence;
};

RandomInstance random_instance(Prng& rng, std::size_t max_chars, std::size_t max_steps, std::size_t symbols = 3);

/// Random row-stochastic matrix with occasional blank-dominated runs.
PosteriorMatrix random_matrix(Prng& rng, std::size_t steps, std::size_t cols, std::string line_id = {});

}  // namespace ctcalign
