#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coexec {

enum class ErrorCode {
  // program validation
  NonDivisibleWorkSize,
  BadOutPattern,
  EmptyProgram,
  IndivisiblePackage,
  // scheduler
  TooFewWorkGroups,
  BadSchedulerConfig,
  SchedulerError,
  // engine
  InputSizeMismatch,
  KernelPanic,
  EmptyQueueWithPendingWork,
  TallyViolation,
  // metrics
  EmptyTrace,
  NonPositiveTime,
  MissingBaseline,
  NonPositiveReference,
  // workloads
  UnknownKernel,
  UnknownProfile,
  BadKernelArgs,
  // io / config
  MalformedTrace,
  ConfigError,
  IoError,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonDivisibleWorkSize: return "NonDivisibleWorkSize";
    case ErrorCode::BadOutPattern: return "BadOutPattern";
    case ErrorCode::EmptyProgram: return "EmptyProgram";
    case ErrorCode::IndivisiblePackage: return "IndivisiblePackage";
    case ErrorCode::TooFewWorkGroups: return "TooFewWorkGroups";
    case ErrorCode::BadSchedulerConfig: return "BadSchedulerConfig";
    case ErrorCode::SchedulerError: return "SchedulerError";
    case ErrorCode::InputSizeMismatch: return "InputSizeMismatch";
    case ErrorCode::KernelPanic: return "KernelPanic";
    case ErrorCode::EmptyQueueWithPendingWork: return "EmptyQueueWithPendingWork";
    case ErrorCode::TallyViolation: return "TallyViolation";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::MissingBaseline: return "MissingBaseline";
    case ErrorCode::NonPositiveReference: return "NonPositiveReference";
    case ErrorCode::UnknownKernel: return "UnknownKernel";
    case ErrorCode::UnknownProfile: return "UnknownProfile";
    case ErrorCode::BadKernelArgs: return "BadKernelArgs";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Aggregate failure raised by the engine after draining all workers.
class EngineFailure : public std::runtime_error {
 public:
  explicit EngineFailure(std::vector<Error> errors)
      : std::runtime_error(errors.empty() ? "engine failed"
                                          : "engine failed: " + std::string(errors.front().what())),
        errors_(std::move(errors)) {}

  const std::vector<Error>& errors() const noexcept { return errors_; }

  bool has(ErrorCode code) const noexcept {
    for (const auto& e : errors_)
      if (e.code() == code) return true;
    return false;
  }

 private:
  std::vector<Error> errors_;
};

}  // namespace coexec
