#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ndt {

enum class ErrorCode {
  invalid_config,
  scenario_not_found,
  series_too_short,
  wrong_window_length,
  degenerate_dims,
  dim_mismatch,
  k_out_of_range,
  empty_group,
  out_of_order_sample,
  insufficient_history,
  not_a_distribution,
  bad_bins,
  unknown_station,
  empty_mirror,
  invalid_argument,
  io_error,
  parse_error,
  validation_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::scenario_not_found: return "scenario-not-found";
    case ErrorCode::series_too_short: return "series-too-short";
    case ErrorCode::wrong_window_length: return "wrong-window-length";
    case ErrorCode::degenerate_dims: return "degenerate-dims";
    case ErrorCode::dim_mismatch: return "dim-mismatch";
    case ErrorCode::k_out_of_range: return "k-out-of-range";
    case ErrorCode::empty_group: return "empty-group";
    case ErrorCode::out_of_order_sample: return "out-of-order-sample";
    case ErrorCode::insufficient_history: return "insufficient-history";
    case ErrorCode::not_a_distribution: return "not-a-distribution";
    case ErrorCode::bad_bins: return "bad-bins";
    case ErrorCode::unknown_station: return "unknown-station";
    case ErrorCode::empty_mirror: return "empty-mirror";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::validation_error: return "validation-error";
  }
  return "unknown";
}

/// Exception carrying a machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace ndt
