#pragma once

#include <istream>
#include <string>
#include <vector>

namespace busroute::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and `""`
/// escapes; records spanning several lines are not supported.
std::vector<std::string> split_record(std::string const& line);

/// Quotes a field when it holds a comma, quote or line break.
std::string quote(std::string const& field);

/// Line-oriented reader that tracks the 1-based line number of the last row.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_{in} {}

  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

}  // namespace busroute::csv
