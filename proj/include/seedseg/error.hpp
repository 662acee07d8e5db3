#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg {

// Base of every error raised by the toolkit. Callers that map errors onto
// exit codes or HTTP statuses switch on the concrete type.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BoundsError : public Error {
  public:
    using Error::Error;
};

class PreconditionError : public Error {
  public:
    using Error::Error;
};

class DomainError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

/// Malformed user input (strokes, pipelines, CSV rows). Carries the index of
/// the offending item when one applies, -1 otherwise.
class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what, int item = -1)
        : Error(what)
        , m_item(item) {}
    int item() const { return m_item; }

  private:
    int m_item;
};

/// Seed strokes that assign different labels to the same voxel.
class ConflictError : public ValidationError {
  public:
    ConflictError(const std::string& what, std::vector<Index3> voxels)
        : ValidationError(what)
        , m_voxels(std::move(voxels)) {}
    const std::vector<Index3>& voxels() const { return m_voxels; }

  private:
    std::vector<Index3> m_voxels;
};

/// A NRRD header asked for something outside the supported subset.
class UnsupportedFormatError : public Error {
  public:
    UnsupportedFormatError(std::string field, const std::string& what)
        : Error(what)
        , m_field(std::move(field)) {}
    const std::string& field() const { return m_field; }

  private:
    std::string m_field;
};

class CorruptFileError : public Error {
  public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace seedseg
