#pragma once

#include <stdexcept>
#include <string>

namespace tabletrec {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateBasis : Error {
  using Error::Error;
};

struct AntiparallelNormals : Error {
  using Error::Error;
};

struct InvalidDistance : Error {
  using Error::Error;
};

struct EmptySuperpixel : Error {
  using Error::Error;
};

struct NonFiniteGradient : Error {
  int tablet_id;
  explicit NonFiniteGradient(int id)
      : Error("non-finite gradient on tablet " + std::to_string(id)), tablet_id(id) {}
};

struct NotFound : Error {
  using Error::Error;
};

struct LoadError : Error {
  using Error::Error;
};

}  // namespace tabletrec
