#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rbguard {

enum class errc {
  config,
  parse,
  empty_trace,
  too_few_ues,
  bad_generator_params,
  insufficient_history,
  numeric_overflow,
  empty_sample_set,
  no_stable_bound,
  insufficient_samples,
  shape_mismatch,
  empty_dataset,
  diverged_loss,
  infeasible,
  search_space_too_large,
  empty_records,
  io,
};

constexpr std::string_view to_string(errc e) {
  switch (e) {
    case errc::config: return "ConfigError";
    case errc::parse: return "ParseError";
    case errc::empty_trace: return "EmptyTrace";
    case errc::too_few_ues: return "TooFewUes";
    case errc::bad_generator_params: return "BadGeneratorParams";
    case errc::insufficient_history: return "InsufficientHistory";
    case errc::numeric_overflow: return "NumericOverflow";
    case errc::empty_sample_set: return "EmptySampleSet";
    case errc::no_stable_bound: return "NoStableBound";
    case errc::insufficient_samples: return "InsufficientSamples";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::diverged_loss: return "DivergedLoss";
    case errc::infeasible: return "Infeasible";
    case errc::search_space_too_large: return "SearchSpaceTooLarge";
    case errc::empty_records: return "EmptyRecords";
    case errc::io: return "IoError";
  }
  return "Error";
}

// Every failure in the library is reported through this one exception type;
// callers switch on code() when they need to recover from a specific case.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

// ParseError carries the offending 1-based line number.
class parse_error : public error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : error(errc::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rbguard
