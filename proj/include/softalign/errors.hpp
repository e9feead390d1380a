#pragma once

#include <stdexcept>
#include <string>

namespace softalign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or record that cannot be parsed: truncated, bad checksum, malformed line.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint or artifact written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// An artifact produced under a different configuration than the one in use.
class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

/// Remote judge could not be reached; the request may succeed on retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Remote judge answered with something that is not a valid judgement.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace softalign
