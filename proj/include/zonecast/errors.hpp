#pragma once

#include <stdexcept>
#include <string>

namespace zonecast {

/// Base class for all pipeline errors. Subclasses map onto CLI exit codes:
/// configuration problems exit 2, missing stage inputs exit 3, data errors 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigurationError : public Error {
public:
    explicit ConfigurationError(const std::string& msg) : Error(msg) {}
};

/// A stage was asked to run before its predecessor produced the needed file.
class StageError : public Error {
public:
    explicit StageError(const std::string& msg) : Error(msg) {}
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& msg) : Error(msg) {}
};

class DuplicateSiteError : public GeometryError {
public:
    explicit DuplicateSiteError(const std::string& msg) : GeometryError(msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

class IngestError : public Error {
public:
    explicit IngestError(const std::string& msg) : Error(msg) {}
};

class InterpolationError : public Error {
public:
    explicit InterpolationError(const std::string& msg) : Error(msg) {}
};

class FeatureError : public Error {
public:
    explicit FeatureError(const std::string& msg) : Error(msg) {}
};

class AnalysisError : public Error {
public:
    explicit AnalysisError(const std::string& msg) : Error(msg) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& msg) : Error(msg) {}
};

}  // namespace zonecast
