#pragma once

#include <cmath>

#include "periq/errors.hpp"

namespace periq {

enum class ScheduleMode { fixed, dynamic };

inline const char* to_string(ScheduleMode m) {
  return m == ScheduleMode::fixed ? "fixed" : "dynamic";
}

// Stepped multiplicative amplitude schedule: the amplitude changes at epoch
// boundaries, first at epoch == step_period_epochs, so epochs [0, period) use
// the start amplitude. start_amplitude 0 disables the penalty entirely
// (baseline runs).
struct AmplitudeSchedule {
  double start_amplitude = 1e-4;
  double step_factor = 10.0;
  int step_period_epochs = 30;
  ScheduleMode mode = ScheduleMode::fixed;
};

inline void validate(const AmplitudeSchedule& s) {
  if (!(s.start_amplitude >= 0.0))
    throw config_error("schedule: start_amplitude must be >= 0");
  if (!(s.step_factor >= 1.0)) throw config_error("schedule: step_factor must be >= 1");
  if (s.step_period_epochs < 1) throw config_error("schedule: step_period_epochs must be >= 1");
}

inline double amplitude_at(const AmplitudeSchedule& s, int epoch) {
  if (epoch < 0) throw config_error("amplitude_at: epoch must be >= 0");
  if (s.mode == ScheduleMode::fixed) return s.start_amplitude;
  return s.start_amplitude * std::pow(s.step_factor, epoch / s.step_period_epochs);
}

}  // namespace periq
