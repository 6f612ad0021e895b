#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace embias {

/// Row-major so each word vector is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Binary gender group label used by word sets and test sets.
enum class Group { M, F };

Group parse_group(std::string_view s);
std::string_view to_string(Group g);

inline constexpr std::uint64_t kDefaultSeed = 20210801;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Raised when she - he (or any fem - masc pair) has near-zero norm.
class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Warnings go to stderr unless silenced (tests silence them).
void set_warnings_enabled(bool enabled);
void warn(std::string_view message);

std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Parses a double, rejecting trailing garbage and non-finite values.
bool parse_double(std::string_view token, double& out);

/// FNV-1a 64-bit, used for cache keys and stable ids.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace embias
