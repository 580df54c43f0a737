#pragma once

#include "crashsev/error.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace crashsev::csv {

/// RFC 4180 style reader: quoted fields may contain commas, doubled quotes
/// and line breaks. Accepts LF or CRLF line endings.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next record into fields; false at end of input.
    bool next(std::vector<std::string>& fields) {
        fields.clear();
        if (in_.peek() == std::char_traits<char>::eof()) return false;
        ++line_;
        std::string field;
        bool quoted = false;
        bool was_quoted = false;
        for (;;) {
            int ch = in_.get();
            if (ch == std::char_traits<char>::eof()) {
                if (quoted) throw Error(ErrorCode::MalformedRow, "unterminated quote starting on line " + std::to_string(line_));
                fields.push_back(std::move(field));
                return true;
            }
            char c = static_cast<char>(ch);
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && field.empty() && !was_quoted) {
                quoted = was_quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
                was_quoted = false;
            } else if (c == '\r' && in_.peek() == '\n') {
                continue;
            } else if (c == '\n') {
                fields.push_back(std::move(field));
                return true;
            } else {
                field.push_back(c);
            }
        }
    }

    /// Line on which the last returned record ended (1-based).
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline bool needs_quoting(std::string_view field) {
    return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void write_field(std::ostream& out, std::string_view field) {
    if (!needs_quoting(field)) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        write_field(out, fields[i]);
    }
    out << '\n';
}

} // namespace crashsev::csv
