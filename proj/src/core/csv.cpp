#include "herdpipe/core/csv.hpp"

#include "herdpipe/error.hpp"

namespace herdpipe::csv {

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  int line = 1;
  current.line = 1;
  std::size_t i = 0;
  bool record_open = false;

  auto end_record = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(current));
    current = Record{};
    record_open = false;
  };

  while (i < text.size()) {
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    char c = text[i];
    if (c == '"' && field.empty()) {
      const int start_line = line;
      ++i;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        if (text[i] == '\n') ++line;
        field += text[i++];
      }
      if (!closed) throw ParseError("unterminated quoted field", start_line);
      if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        throw ParseError("unexpected character after closing quote", line);
      }
      continue;
    }
    if (c == ',') {
      current.fields.push_back(std::move(field));
      field.clear();
      ++i;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      i += 2;
      ++line;
    } else if (c == '\n') {
      end_record();
      ++i;
      ++line;
    } else if (c == '"') {
      throw ParseError("quote inside unquoted field", line);
    } else {
      field += c;
      ++i;
    }
  }
  if (record_open) end_record();
  return records;
}

}  // namespace herdpipe::csv
