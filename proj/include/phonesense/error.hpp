#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phonesense {

enum class ErrorCode {
  // session data
  missing_channel,
  malformed_row,
  excessive_data_loss,
  invalid_metadata,
  unsorted_input,
  not_enough_events,
  // preprocessing
  out_of_bounds,
  missing_data_in_window,
  invalid_smoothing,
  // features
  too_short,
  wrong_length,
  unknown_channel,
  empty_training_set,
  // reduction and models
  single_class,
  k_out_of_range,
  degenerate_input,
  dimension_mismatch,
  // evaluation
  unbalanced_participant,
  single_class_fold,
  length_mismatch,
  empty_input,
  // cli
  io_failure,
  config_error,
  sample_mismatch,
  no_results,
  internal,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure the library reports carries one of the codes above so that
/// callers (tests, the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// The text without the code prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace phonesense
