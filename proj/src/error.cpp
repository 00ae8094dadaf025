#include "murmur/error.hpp"

namespace murmur {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePatient: return "DuplicatePatient";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::StateError: return "StateError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NumericError: return "NumericError";
    case ErrorCode::CalibrationError: return "CalibrationError";
    case ErrorCode::OverflowError: return "OverflowError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptyLocation: return "EmptyLocation";
    case ErrorCode::EmptyPatient: return "EmptyPatient";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace murmur
