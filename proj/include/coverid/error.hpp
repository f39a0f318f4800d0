#pragma once

#include <stdexcept>
#include <string>

namespace coverid {

enum class ErrorCode {
  MalformedContainer,
  UnsupportedEncoding,
  EmptyAudio,
  TooShort,
  InvalidArgument,
  MalformedFile,
  ShapeMismatch,
  DegenerateBatch,
  StaleCache,
  MalformedModelFile,
  SpecMismatch,
  InsufficientCliques,
  EmptyDataset,
  DivergedLoss,
  InvalidConfig,
  InvalidManifest,
  MissingMatrix,
  LengthMismatch,
  MissingQuery,
  NoRelevantCandidate,
  NoInputs,
  Io,
};

const char* to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coverid
