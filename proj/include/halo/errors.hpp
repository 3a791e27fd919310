#pragma once

#include <stdexcept>
#include <string>

namespace halo {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// -- backend ----------------------------------------------------------------
struct BackendUnreachable : Error {
  using Error::Error;
};
struct MalformedResponse : Error {
  using Error::Error;
};
struct ScriptExhausted : Error {
  using Error::Error;
};

// -- retrieval --------------------------------------------------------------
struct SearchUnreachable : Error {
  using Error::Error;
};

// -- scoring ----------------------------------------------------------------
struct EmptyTokenList : Error {
  using Error::Error;
};

// -- validation / mitigation ------------------------------------------------
struct EmptyQuestion : Error {
  using Error::Error;
};
struct EmptyRepair : Error {
  using Error::Error;
};
struct EmptyRectification : Error {
  using Error::Error;
};

// -- evaluation -------------------------------------------------------------
struct LengthMismatch : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct EmptyCurve : Error {
  using Error::Error;
};
struct MissingIndex : Error {
  using Error::Error;
};
struct NoScoredConcepts : Error {
  using Error::Error;
};

// -- configuration ----------------------------------------------------------
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace halo
