#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memento {

enum class Errc {
  non_normalized_prediction,
  bin_out_of_range,
  negative_probability,
  empty_input,
  length_mismatch,
  undefined_divergence,
  non_positive_bandwidth,
  last_batch,
  index_out_of_range,
  negative_temperature,
  capacity_too_small_for_one_batch,
  empty_current_set,
  missing_scores,
  not_classification,
  empty_committee,
  predictor_dimension_mismatch,
  empty_training_set,
  bad_schedule,
  bad_fraction,
  unbalanced_eval_set,
  config_error,
  io_error,
  parse_error,
  duplicate_sample_id,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::non_normalized_prediction: return "NonNormalizedPrediction";
    case Errc::bin_out_of_range: return "BinOutOfRange";
    case Errc::negative_probability: return "NegativeProbability";
    case Errc::empty_input: return "EmptyInput";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::undefined_divergence: return "UndefinedDivergence";
    case Errc::non_positive_bandwidth: return "NonPositiveBandwidth";
    case Errc::last_batch: return "LastBatch";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::negative_temperature: return "NegativeTemperature";
    case Errc::capacity_too_small_for_one_batch: return "CapacityTooSmallForOneBatch";
    case Errc::empty_current_set: return "EmptyCurrentSet";
    case Errc::missing_scores: return "MissingScores";
    case Errc::not_classification: return "NotClassification";
    case Errc::empty_committee: return "EmptyCommittee";
    case Errc::predictor_dimension_mismatch: return "PredictorDimensionMismatch";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::bad_schedule: return "BadSchedule";
    case Errc::bad_fraction: return "BadFraction";
    case Errc::unbalanced_eval_set: return "UnbalancedEvalSet";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_sample_id: return "DuplicateSampleId";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace memento
