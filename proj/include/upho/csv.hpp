#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace upho::csv {

struct Row {
    std::size_t line = 0;  // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

/// Streaming RFC 4180 reader: quoted fields, doubled quotes, CRLF and
/// embedded newlines inside quotes.
class Reader {
public:
    explicit Reader(std::istream& in) : in_{in} {}

    std::optional<Row> next();

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

std::vector<Row> read_all(std::istream& in);

std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string join_header(const std::vector<std::string>& columns);

}  // namespace upho::csv
