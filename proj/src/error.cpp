#include "phonesense/error.hpp"

namespace phonesense {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::missing_channel: return "MissingChannel";
    case ErrorCode::malformed_row: return "MalformedRow";
    case ErrorCode::excessive_data_loss: return "ExcessiveDataLoss";
    case ErrorCode::invalid_metadata: return "InvalidMetadata";
    case ErrorCode::unsorted_input: return "UnsortedInput";
    case ErrorCode::not_enough_events: return "NotEnoughEvents";
    case ErrorCode::out_of_bounds: return "OutOfBounds";
    case ErrorCode::missing_data_in_window: return "MissingDataInWindow";
    case ErrorCode::invalid_smoothing: return "InvalidSmoothing";
    case ErrorCode::too_short: return "TooShort";
    case ErrorCode::wrong_length: return "WrongLength";
    case ErrorCode::unknown_channel: return "UnknownChannel";
    case ErrorCode::empty_training_set: return "EmptyTrainingSet";
    case ErrorCode::single_class: return "SingleClass";
    case ErrorCode::k_out_of_range: return "KOutOfRange";
    case ErrorCode::degenerate_input: return "DegenerateInput";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::unbalanced_participant: return "UnbalancedParticipant";
    case ErrorCode::single_class_fold: return "SingleClassFold";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::sample_mismatch: return "SampleMismatch";
    case ErrorCode::no_results: return "NoResults";
    case ErrorCode::internal: return "Internal";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace phonesense
