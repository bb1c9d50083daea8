#include "ctcalign/error.hpp"

#include <fmt/format.h>

namespace ctcalign {

AlignmentInfeasible::AlignmentInfeasible(std::size_t steps, std::size_t min_steps)
    : Error(fmt::format("alignment infeasible: sequence has {} steps, transcription needs at least {}",
                        steps, min_steps)),
      steps_(steps),
      min_steps_(min_steps) {}

NumericallyInfeasible::NumericallyInfeasible(std::size_t step)
    : Error(fmt::format("numerically infeasible: every path has zero probability at step {}", step)),
      step_(step) {}

}  // namespace ctcalign
