#pragma once

#include <stdexcept>
#include <string>

namespace vidpipe {

// Every failure the pipeline can raise, one code per contract violation.
enum class ErrorCode {
  // core
  DimensionMismatch,
  ZeroVector,
  // sampler
  InsufficientFrames,
  IndexOutOfRange,
  // backends
  TransportError,
  ProtocolError,
  BackendError,
  CacheCorrupt,
  // retrieval
  MissingGoldAnswer,
  EmptyPool,
  // dialogue
  EmptyFrames,
  TemplateError,
  EmptyDescription,
  EmptyAnswer,
  // arbiter
  MissingSimilarity,
  // eval
  JudgeParseError,
  EmptyRun,
  MixedModes,
  // cli / dataset
  SchemaError,
  DanglingVideo,
  BadBreakpoint,
  ConfigError,
  IoError,
  // generic contract violation (wrong mode, wrong role, bad argument)
  Precondition,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vidpipe
