#include "vidpipe/error.hpp"

namespace vidpipe {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::MissingGoldAnswer: return "MissingGoldAnswer";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptyFrames: return "EmptyFrames";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::EmptyDescription: return "EmptyDescription";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::MissingSimilarity: return "MissingSimilarity";
    case ErrorCode::JudgeParseError: return "JudgeParseError";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::MixedModes: return "MixedModes";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DanglingVideo: return "DanglingVideo";
    case ErrorCode::BadBreakpoint: return "BadBreakpoint";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Precondition: return "Precondition";
  }
  return "UnknownError";
}

}  // namespace vidpipe
