#pragma once

#include <stdexcept>
#include <string>

namespace llmeval {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };

// gateway
class TransportError : public Error { using Error::Error; };
class AuthError : public Error { using Error::Error; };
class MockExhausted : public Error { using Error::Error; };

// corpus / latex
class MalformedId : public Error { using Error::Error; };
class NoMainFile : public Error { using Error::Error; };
class CorruptArchive : public Error { using Error::Error; };
class UnbalancedBraces : public Error { using Error::Error; };

// statistics
class TooFewObservations : public Error { using Error::Error; };

// store
class InsufficientPapers : public Error { using Error::Error; };

}  // namespace llmeval
