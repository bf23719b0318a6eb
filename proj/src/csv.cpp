#include "busroute/csv.hpp"

namespace busroute::csv {

std::vector<std::string> split_record(std::string const& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char const c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool Reader::next(std::vector<std::string>& fields) {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (line_ == 1 && buf_.size() >= 3 &&
        buf_.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      buf_.erase(0, 3);
    }
    if (buf_.empty() || buf_ == "\r") continue;
    fields = split_record(buf_);
    return true;
  }
  return false;
}

std::string quote(std::string const& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (auto const c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace busroute::csv
