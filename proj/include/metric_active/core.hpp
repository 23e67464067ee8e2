#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace metric_active {

using PointIndex = std::int32_t;
using BallId = std::int64_t;

// Error hierarchy. Everything derives from Error so callers can catch
// one type at the CLI boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidBallError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UndefinedSignError : public Error {
 public:
  using Error::Error;
};

class CostCapError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A level that may be unbounded. Infinite compares greater than every
// finite level and never participates in arithmetic.
class ExtLevel {
 public:
  constexpr ExtLevel() = default;
  constexpr explicit ExtLevel(int v) : value_(v) {}
  static constexpr ExtLevel infinite() {
    ExtLevel l;
    l.value_ = kInf;
    return l;
  }

  constexpr bool is_infinite() const { return value_ == kInf; }
  constexpr bool is_finite() const { return value_ != kInf; }
  int value() const {
    if (is_infinite()) throw Error("ExtLevel: value() of an infinite level");
    return value_;
  }

  constexpr auto operator<=>(const ExtLevel&) const = default;
  constexpr bool operator==(const ExtLevel&) const = default;
  constexpr bool operator<=(int v) const { return is_finite() && value_ <= v; }
  constexpr bool operator>=(int v) const { return is_infinite() || value_ >= v; }

  std::string str() const { return is_infinite() ? "inf" : std::to_string(value_); }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max();
  int value_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, const ExtLevel& l) { return os << l.str(); }

}  // namespace metric_active
