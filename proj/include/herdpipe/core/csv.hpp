#pragma once

#include <string>
#include <string_view>
#include <vector>

// Minimal RFC-4180 field quoting and record splitting.
namespace herdpipe::csv {

// Wraps the field in double quotes when it contains a comma, quote, CR or LF;
// embedded quotes are doubled.
std::string quote(std::string_view field);

struct Record {
  int line = 0;  // 1-based line on which the record starts
  std::vector<std::string> fields;
};

// Splits `text` into records. Records end with LF or CRLF; a trailing line
// break does not produce an empty record. Throws ParseError on an
// unterminated quoted field or stray characters after a closing quote.
std::vector<Record> parse(std::string_view text);

}  // namespace herdpipe::csv
