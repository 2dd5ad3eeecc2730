#include "scitag/error.hpp"

namespace scitag {

std::string_view errcName(Errc code) {
  switch (code) {
    case Errc::Io: return "Io";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::Network: return "Network";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyParts: return "EmptyParts";
    case Errc::PositionOutOfRange: return "PositionOutOfRange";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::MissingSection: return "MissingSection";
    case Errc::UnknownSection: return "UnknownSection";
    case Errc::MissingClassKey: return "MissingClassKey";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::UnsupportedClass: return "UnsupportedClass";
    case Errc::ParamTypeError: return "ParamTypeError";
    case Errc::MissingParam: return "MissingParam";
    case Errc::ExtraParam: return "ExtraParam";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::ConfigError: return "ConfigError";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::NotBioLabelSet: return "NotBioLabelSet";
    case Errc::EmptyDocument: return "EmptyDocument";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::Empty: return "Empty";
    case Errc::UnknownTagFormat: return "UnknownTagFormat";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::UnknownQuery: return "UnknownQuery";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool isConfigError(Errc code) {
  switch (code) {
    case Errc::SyntaxError:
    case Errc::MissingSection:
    case Errc::UnknownSection:
    case Errc::MissingClassKey:
    case Errc::UnknownClass:
    case Errc::UnsupportedClass:
    case Errc::ParamTypeError:
    case Errc::MissingParam:
    case Errc::ExtraParam:
    case Errc::CycleDetected:
    case Errc::DanglingReference:
    case Errc::DuplicateId:
    case Errc::ConfigError:
      return true;
    default:
      return false;
  }
}

}  // namespace scitag
