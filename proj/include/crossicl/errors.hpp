#pragma once

#include <stdexcept>
#include <string>

namespace crossicl {

// Base error. `kind()` is a stable machine-readable tag (e.g. "malformed",
// "tag_missing"); what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string category, std::string kind, const std::string& msg)
      : std::runtime_error(category + "(" + kind + "): " + msg),
        category_(std::move(category)),
        kind_(std::move(kind)) {}

  const std::string& category() const { return category_; }
  const std::string& kind() const { return kind_; }

 private:
  std::string category_;
  std::string kind_;
};

#define CROSSICL_DEFINE_ERROR(Name)                          \
  class Name : public Error {                                \
   public:                                                   \
    Name(std::string kind, const std::string& msg)           \
        : Error(#Name, std::move(kind), msg) {}              \
  };

CROSSICL_DEFINE_ERROR(IngestError)
CROSSICL_DEFINE_ERROR(IndexError)
CROSSICL_DEFINE_ERROR(MetricError)
CROSSICL_DEFINE_ERROR(ProviderError)
CROSSICL_DEFINE_ERROR(CapabilityError)
CROSSICL_DEFINE_ERROR(SelectionError)
CROSSICL_DEFINE_ERROR(AdaptError)
CROSSICL_DEFINE_ERROR(ComposeError)
CROSSICL_DEFINE_ERROR(ConfigError)

#undef CROSSICL_DEFINE_ERROR

}  // namespace crossicl
