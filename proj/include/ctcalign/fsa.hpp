#pragma once

// Linear transcription automaton with interleaved epsilon states.
//
// State ids for a transcription of n characters:
//   even id 2k   -> epsilon state after character k (eps_0 .. eps_n)
//   odd id 2k-1  -> character state for character k (c_1 .. c_n)
// Characters are 1-based in the automaton, 0-based in the transcription.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctcalign/posteriors.hpp"

namespace ctcalign {

struct Transcription {
  std::u32string text;

  std::size_t char_count() const { return text.size(); }
};

/// Drops every newline and carriage return, rejects invalid UTF-8.
Transcription make_transcription(std::string_view utf8_text);
Transcription load_transcription(const std::filesystem::path& path);

using StateId = std::size_t;

enum class StateKind { kEpsilon, kCharacter };

struct FsaState {
  StateKind kind;
  std::size_t symbol;    // alphabet index
  std::size_t position;  // character index (0-based) or gap index
};

/// Predecessor slots are ordered by tie-break priority: self-loop, epsilon
/// predecessor, skip predecessor. Absent slots are kNoState.
struct Predecessors {
  static constexpr StateId kNoState = static_cast<StateId>(-1);
  StateId self = kNoState;
  StateId epsilon = kNoState;
  StateId skip = kNoState;
};

class TranscriptionFsa {
 public:
  TranscriptionFsa(const Transcription& transcription, const Alphabet& alphabet);

  std::size_t state_count() const { return states_.size(); }
  std::size_t char_count() const { return (states_.size() - 1) / 2; }
  const FsaState& state(StateId id) const { return states_[id]; }
  const Predecessors& predecessors(StateId id) const { return preds_[id]; }
  std::vector<StateId> predecessor_list(StateId id) const;
  std::vector<StateId> successor_list(StateId id) const;

  static StateId char_state(std::size_t position) { return 2 * position + 1; }
  static StateId epsilon_state(std::size_t gap) { return 2 * gap; }

  std::vector<StateId> initial_states() const { return {0, 1}; }
  std::vector<StateId> final_states() const { return {state_count() - 2, state_count() - 1}; }
  bool is_initial(StateId id) const { return id <= 1; }
  bool is_final(StateId id) const { return id + 2 >= state_count(); }

  bool has_skip(std::size_t position) const;

  /// Shortest accepting path: every character plus one separating epsilon
  /// between each pair of identical neighbours.
  std::size_t min_path_length() const { return min_path_length_; }

  /// Fewest steps needed from `id` (inclusive) to an accepting end.
  std::size_t steps_to_final(StateId id) const { return to_final_[id]; }
  /// Fewest steps needed from an initial state to reach `id` (inclusive).
  std::size_t steps_from_initial(StateId id) const { return from_initial_[id]; }

  const std::u32string& text() const { return text_; }

  /// One state per line: "<id> <label> pred=[...]" followed by markers.
  std::string debug_dump() const;

 private:
  std::u32string text_;
  std::vector<FsaState> states_;
  std::vector<Predecessors> preds_;
  std::vector<std::size_t> to_final_;
  std::vector<std::size_t> from_initial_;
  std::size_t min_path_length_ = 0;
};

TranscriptionFsa build_fsa(const Transcription& transcription, const Alphabet& alphabet);

constexpr std::size_t kEnumerationGuard = 1'000'000;

/// All accepted state sequences of exactly `length` steps, in lexicographic
/// order of state ids. Throws InstanceTooLarge when states * length exceeds
/// kEnumerationGuard.
std::vector<std::vector<StateId>> enumerate_paths(const TranscriptionFsa& fsa, std::size_t length);

/// Number of accepted paths of `length` steps, by forward dynamic programming.
double count_paths(const TranscriptionFsa& fsa, std::size_t length);

}  // namespace ctcalign
