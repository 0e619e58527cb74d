#pragma once

#include <stdexcept>
#include <string>

namespace ccesar {

/// Base of every error raised by the library. `category()` is the short tag
/// the CLI prints in its one-line diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define CCESAR_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

CCESAR_DEFINE_ERROR(UnsupportedTiff)
CCESAR_DEFINE_ERROR(MalformedTiff)
CCESAR_DEFINE_ERROR(WriteError)
CCESAR_DEFINE_ERROR(ShapeError)
CCESAR_DEFINE_ERROR(ManifestError)
CCESAR_DEFINE_ERROR(GenerationError)
CCESAR_DEFINE_ERROR(DomainError)
CCESAR_DEFINE_ERROR(PolygonError)
CCESAR_DEFINE_ERROR(GeoError)
CCESAR_DEFINE_ERROR(ModelError)
CCESAR_DEFINE_ERROR(DataError)
CCESAR_DEFINE_ERROR(MetricUndefined)
CCESAR_DEFINE_ERROR(ConfigError)
CCESAR_DEFINE_ERROR(MissingInput)

#undef CCESAR_DEFINE_ERROR

}  // namespace ccesar
