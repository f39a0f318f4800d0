#include "coverid/error.hpp"

namespace coverid {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::MalformedModelFile: return "MalformedModelFile";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::InsufficientCliques: return "InsufficientCliques";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::MissingMatrix: return "MissingMatrix";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingQuery: return "MissingQuery";
    case ErrorCode::NoRelevantCandidate: return "NoRelevantCandidate";
    case ErrorCode::NoInputs: return "NoInputs";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace coverid
